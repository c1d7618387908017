//! Signed, weighted, undirected networks partitioned into three clusters.
//!
//! Agents and clusters are 0-based inside the library. The JSON network
//! format and every human-facing report use 1-based indices.

use std::collections::VecDeque;
use std::fmt;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Threshold for strict vector inequalities such as `a << 0`.
pub const STRICT_TOL: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum NetworkError {
    #[error("malformed network document: {0}")]
    Malformed(#[from] serde_json::Error),
    #[error("cannot read network file: {0}")]
    Io(#[from] std::io::Error),
    #[error("conflicting duplicate edge ({i},{j}): {first} vs {second}")]
    ConflictingEdge { i: usize, j: usize, first: f64, second: f64 },
    #[error("self-loop on agent {0} with nonzero weight")]
    SelfLoop(usize),
    #[error("agent index {index} out of range [1,{n}]")]
    IndexOutOfRange { index: usize, n: usize },
    #[error("invalid partition: {0}")]
    Partition(String),
    #[error("weight matrix is not symmetric at ({0},{1})")]
    Asymmetric(usize, usize),
    #[error("weight matrix has nonzero diagonal at agent {0}")]
    NonzeroDiagonal(usize),
    #[error("non-finite weight on edge ({0},{1})")]
    NonFinite(usize, usize),
    #[error("invalid cluster index {0}")]
    InvalidCluster(usize),
    #[error("invalid labeling {0:?}: must be a permutation of clusters")]
    InvalidLabeling([usize; 3]),
}

/// On-disk representation of a network.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkFile {
    pub n: usize,
    pub clusters: Vec<Vec<usize>>,
    pub edges: Vec<EdgeRecord>,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EdgeRecord {
    pub i: usize,
    pub j: usize,
    pub w: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SignedNetwork {
    weights: DMatrix<f64>,
    clusters: [Vec<usize>; 3],
    membership: Vec<usize>,
}

impl SignedNetwork {
    /// Builds a network from a dense weight matrix and a 0-based partition.
    ///
    /// Storage invariants (exact symmetry, zero diagonal, finite entries and
    /// a partition covering every agent) are enforced here. The sign pattern,
    /// connectivity and minimality are hypotheses, reported by
    /// [`validate_clustering`] instead.
    pub fn new(weights: DMatrix<f64>, clusters: [Vec<usize>; 3]) -> Result<Self, NetworkError> {
        let n = weights.nrows();
        if n == 0 || weights.ncols() != n {
            return Err(NetworkError::Partition(format!(
                "weight matrix must be square and nonempty, got {}x{}",
                weights.nrows(),
                weights.ncols()
            )));
        }
        for i in 0..n {
            if weights[(i, i)] != 0.0 {
                return Err(NetworkError::NonzeroDiagonal(i + 1));
            }
            for j in 0..n {
                if !weights[(i, j)].is_finite() {
                    return Err(NetworkError::NonFinite(i + 1, j + 1));
                }
                if weights[(i, j)] != weights[(j, i)] {
                    return Err(NetworkError::Asymmetric(i + 1, j + 1));
                }
            }
        }
        let mut membership = vec![usize::MAX; n];
        for (p, cluster) in clusters.iter().enumerate() {
            if cluster.is_empty() {
                return Err(NetworkError::Partition(format!("cluster {} is empty", p + 1)));
            }
            for &agent in cluster {
                if agent >= n {
                    return Err(NetworkError::IndexOutOfRange { index: agent + 1, n });
                }
                if membership[agent] != usize::MAX {
                    return Err(NetworkError::Partition(format!(
                        "agent {} appears in more than one cluster",
                        agent + 1
                    )));
                }
                membership[agent] = p;
            }
        }
        if let Some(missing) = membership.iter().position(|&p| p == usize::MAX) {
            return Err(NetworkError::Partition(format!(
                "agent {} is not assigned to any cluster",
                missing + 1
            )));
        }
        Ok(Self { weights, clusters, membership })
    }

    pub fn from_file_doc(doc: &NetworkFile) -> Result<Self, NetworkError> {
        let n = doc.n;
        if n == 0 {
            return Err(NetworkError::Partition("network has no agents".into()));
        }
        if doc.clusters.len() != 3 {
            return Err(NetworkError::Partition(format!(
                "expected exactly 3 clusters, got {}",
                doc.clusters.len()
            )));
        }
        let mut clusters: [Vec<usize>; 3] = Default::default();
        for (p, members) in doc.clusters.iter().enumerate() {
            for &agent in members {
                if agent == 0 || agent > n {
                    return Err(NetworkError::IndexOutOfRange { index: agent, n });
                }
                clusters[p].push(agent - 1);
            }
        }
        let mut weights = DMatrix::zeros(n, n);
        let mut seen = DMatrix::from_element(n, n, false);
        for e in &doc.edges {
            for index in [e.i, e.j] {
                if index == 0 || index > n {
                    return Err(NetworkError::IndexOutOfRange { index, n });
                }
            }
            if !e.w.is_finite() {
                return Err(NetworkError::NonFinite(e.i, e.j));
            }
            let (i, j) = (e.i - 1, e.j - 1);
            if i == j {
                if e.w != 0.0 {
                    return Err(NetworkError::SelfLoop(e.i));
                }
                continue;
            }
            if seen[(i, j)] {
                if weights[(i, j)] != e.w {
                    return Err(NetworkError::ConflictingEdge {
                        i: e.i,
                        j: e.j,
                        first: weights[(i, j)],
                        second: e.w,
                    });
                }
                continue;
            }
            seen[(i, j)] = true;
            seen[(j, i)] = true;
            weights[(i, j)] = e.w;
            weights[(j, i)] = e.w;
        }
        Self::new(weights, clusters)
    }

    pub fn to_file_doc(&self) -> NetworkFile {
        let n = self.size();
        let mut edges = Vec::new();
        for i in 0..n {
            for j in (i + 1)..n {
                let w = self.weights[(i, j)];
                if w != 0.0 {
                    edges.push(EdgeRecord { i: i + 1, j: j + 1, w });
                }
            }
        }
        NetworkFile {
            n,
            clusters: self
                .clusters
                .iter()
                .map(|c| c.iter().map(|&a| a + 1).collect())
                .collect(),
            edges,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_file_doc()).expect("network serializes")
    }

    pub fn size(&self) -> usize {
        self.weights.nrows()
    }

    pub fn weights(&self) -> &DMatrix<f64> {
        &self.weights
    }

    pub fn weight(&self, i: usize, j: usize) -> f64 {
        self.weights[(i, j)]
    }

    pub fn clusters(&self) -> &[Vec<usize>; 3] {
        &self.clusters
    }

    pub fn cluster(&self, p: usize) -> &[usize] {
        &self.clusters[p]
    }

    pub fn cluster_sizes(&self) -> [usize; 3] {
        [self.clusters[0].len(), self.clusters[1].len(), self.clusters[2].len()]
    }

    pub fn cluster_of(&self, agent: usize) -> usize {
        self.membership[agent]
    }

    /// The adjacency block `A_{p,q}` with rows ordered as cluster `p` and
    /// columns as cluster `q`.
    pub fn block(&self, p: usize, q: usize) -> DMatrix<f64> {
        let rows = &self.clusters[p];
        let cols = &self.clusters[q];
        DMatrix::from_fn(rows.len(), cols.len(), |r, c| self.weights[(rows[r], cols[c])])
    }

    /// Concatenates the given clusters' agents, in order.
    pub fn agents_in(&self, order: &[usize]) -> Vec<usize> {
        order.iter().flat_map(|&p| self.clusters[p].iter().copied()).collect()
    }

    /// Scatters per-cluster vectors into a vector indexed by agent.
    pub fn scatter(&self, per_cluster: &[DVector<f64>; 3]) -> DVector<f64> {
        let mut out = DVector::zeros(self.size());
        for (p, values) in per_cluster.iter().enumerate() {
            assert_eq!(values.len(), self.clusters[p].len(), "cluster {p} length mismatch");
            for (k, &agent) in self.clusters[p].iter().enumerate() {
                out[agent] = values[k];
            }
        }
        out
    }

    /// Gathers the entries of an agent-indexed vector belonging to cluster `p`.
    pub fn gather(&self, full: &DVector<f64>, p: usize) -> DVector<f64> {
        DVector::from_iterator(self.clusters[p].len(), self.clusters[p].iter().map(|&a| full[a]))
    }

    /// Returns a copy with clusters renumbered: new cluster `k` is old
    /// cluster `perm[k]`.
    pub fn permute_clusters(&self, perm: [usize; 3]) -> Self {
        let clusters = [
            self.clusters[perm[0]].clone(),
            self.clusters[perm[1]].clone(),
            self.clusters[perm[2]].clone(),
        ];
        Self::new(self.weights.clone(), clusters).expect("permutation preserves invariants")
    }
}

pub fn load_network(document: &str) -> Result<SignedNetwork, NetworkError> {
    let doc: NetworkFile = serde_json::from_str(document)?;
    SignedNetwork::from_file_doc(&doc)
}

pub fn load_network_file(path: impl AsRef<Path>) -> Result<SignedNetwork, NetworkError> {
    load_network(&std::fs::read_to_string(path)?)
}

/// Which cluster plays each role `(i1, i2, i3)` in the synthesis hypotheses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Labeling([usize; 3]);

impl Labeling {
    pub fn new(i1: usize, i2: usize, i3: usize) -> Result<Self, NetworkError> {
        let roles = [i1, i2, i3];
        let mut seen = [false; 3];
        for &r in &roles {
            if r > 2 || seen[r] {
                return Err(NetworkError::InvalidLabeling(roles));
            }
            seen[r] = true;
        }
        Ok(Self(roles))
    }

    pub fn from_one_based(roles: [usize; 3]) -> Result<Self, NetworkError> {
        if roles.contains(&0) {
            return Err(NetworkError::InvalidLabeling(roles));
        }
        Self::new(roles[0] - 1, roles[1] - 1, roles[2] - 1)
            .map_err(|_| NetworkError::InvalidLabeling(roles))
    }

    /// All six labelings in lexicographic order.
    pub fn all() -> impl Iterator<Item = Labeling> {
        const PERMS: [[usize; 3]; 6] =
            [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];
        PERMS.into_iter().map(Labeling)
    }

    pub fn i1(&self) -> usize {
        self.0[0]
    }

    pub fn i2(&self) -> usize {
        self.0[1]
    }

    pub fn i3(&self) -> usize {
        self.0[2]
    }

    pub fn roles(&self) -> [usize; 3] {
        self.0
    }

    pub fn one_based(&self) -> [usize; 3] {
        [self.0[0] + 1, self.0[1] + 1, self.0[2] + 1]
    }

    /// Cluster occupying each block position in the working order used by
    /// the synthesis routines: `i1` first, `i3` in the middle, `i2` last.
    pub fn block_order(&self) -> [usize; 3] {
        [self.0[0], self.0[2], self.0[1]]
    }
}

impl fmt::Display for Labeling {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let [a, b, c] = self.one_based();
        write!(f, "({a},{b},{c})")
    }
}

/// Row sums `a[p][q] = A_{p,q} 1` of every adjacency block.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockRowSums {
    sums: [[DVector<f64>; 3]; 3],
}

impl BlockRowSums {
    pub fn get(&self, p: usize, q: usize) -> &DVector<f64> {
        &self.sums[p][q]
    }
}

pub fn block_row_sums(net: &SignedNetwork) -> BlockRowSums {
    let sums = std::array::from_fn(|p| {
        std::array::from_fn(|q| {
            let cols = net.cluster(q);
            DVector::from_iterator(
                net.cluster(p).len(),
                net.cluster(p).iter().map(|&i| cols.iter().map(|&j| net.weight(i, j)).sum()),
            )
        })
    });
    BlockRowSums { sums }
}

pub fn strictly_negative(v: &DVector<f64>) -> bool {
    v.iter().all(|&x| x < -STRICT_TOL)
}

pub fn strictly_positive(v: &DVector<f64>) -> bool {
    v.iter().all(|&x| x > STRICT_TOL)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TripartiteCandidate {
    #[serde(serialize_with = "ser_labeling")]
    pub labeling: Labeling,
    /// Cluster `h` (0-based internally, 1-based when serialized) whose
    /// enemies cover all of `V_{i1}`.
    #[serde(serialize_with = "ser_cluster")]
    pub h: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Admissible {
    pub tripartite: Vec<TripartiteCandidate>,
    #[serde(serialize_with = "ser_labelings")]
    pub sign: Vec<Labeling>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    pub checks: Vec<Check>,
    pub admissible_tripartite: Vec<TripartiteCandidate>,
    #[serde(serialize_with = "ser_labelings")]
    pub admissible_sign: Vec<Labeling>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for c in &self.checks {
            let mark = if c.passed { "PASS" } else { "FAIL" };
            out.push_str(&format!("[{mark}] {}: {}\n", c.name, c.detail));
        }
        out.push_str("admissible tripartite labelings:");
        if self.admissible_tripartite.is_empty() {
            out.push_str(" none");
        }
        out.push('\n');
        for cand in &self.admissible_tripartite {
            out.push_str(&format!("  {} h={}\n", cand.labeling, cand.h + 1));
        }
        out.push_str("admissible sign labelings:");
        if self.admissible_sign.is_empty() {
            out.push_str(" none");
        }
        out.push('\n');
        for l in &self.admissible_sign {
            out.push_str(&format!("  {l}\n"));
        }
        out
    }
}

fn ser_labeling<S: serde::Serializer>(l: &Labeling, s: S) -> Result<S::Ok, S::Error> {
    l.one_based().serialize(s)
}

fn ser_labelings<S: serde::Serializer>(ls: &[Labeling], s: S) -> Result<S::Ok, S::Error> {
    ls.iter().map(Labeling::one_based).collect::<Vec<_>>().serialize(s)
}

fn ser_cluster<S: serde::Serializer>(p: &usize, s: S) -> Result<S::Ok, S::Error> {
    (p + 1).serialize(s)
}

pub const CHECK_SYMMETRY: &str = "symmetry";
pub const CHECK_ZERO_DIAGONAL: &str = "zero-diagonal";
pub const CHECK_SIGN_PATTERN: &str = "sign-pattern";
pub const CHECK_CONNECTIVITY: &str = "connectivity";
pub const CHECK_MINIMALITY: &str = "minimality";

/// Checks every clustering-balance hypothesis. Failures are report
/// entries; the admissible lists are left empty.
pub fn validate_clustering(net: &SignedNetwork) -> ValidationReport {
    let n = net.size();
    let w = net.weights();
    let mut checks = Vec::with_capacity(5);

    let asym = (0..n)
        .flat_map(|i| (0..n).map(move |j| (i, j)))
        .find(|&(i, j)| w[(i, j)] != w[(j, i)]);
    checks.push(Check {
        name: CHECK_SYMMETRY.into(),
        passed: asym.is_none(),
        detail: match asym {
            None => "weights symmetric".into(),
            Some((i, j)) => format!("w[{},{}] != w[{},{}]", i + 1, j + 1, j + 1, i + 1),
        },
    });

    let diag = (0..n).find(|&i| w[(i, i)] != 0.0);
    checks.push(Check {
        name: CHECK_ZERO_DIAGONAL.into(),
        passed: diag.is_none(),
        detail: match diag {
            None => "no self-loops".into(),
            Some(i) => format!("w[{0},{0}] = {1}", i + 1, w[(i, i)]),
        },
    });

    let mut violations = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            let same = net.cluster_of(i) == net.cluster_of(j);
            let x = w[(i, j)];
            if (same && x < 0.0) || (!same && x > 0.0) {
                violations.push((i, j, x));
            }
        }
    }
    checks.push(Check {
        name: CHECK_SIGN_PATTERN.into(),
        passed: violations.is_empty(),
        detail: match violations.first() {
            None => "intra-cluster weights >= 0, inter-cluster weights <= 0".into(),
            Some(&(i, j, x)) => format!(
                "{} violation(s), first: w[{},{}] = {} ({})",
                violations.len(),
                i + 1,
                j + 1,
                x,
                if net.cluster_of(i) == net.cluster_of(j) { "negative intra" } else { "positive inter" }
            ),
        },
    });

    let all: Vec<usize> = (0..n).collect();
    let comps = components(&all, |i, j| w[(i, j)] != 0.0);
    checks.push(Check {
        name: CHECK_CONNECTIVITY.into(),
        passed: comps.len() == 1,
        detail: format!("{} connected component(s)", comps.len()),
    });

    let mut empty_blocks = Vec::new();
    for p in 0..3 {
        for q in (p + 1)..3 {
            if net.block(p, q).iter().all(|&x| x == 0.0) {
                empty_blocks.push(format!("A[{},{}]", p + 1, q + 1));
            }
        }
    }
    checks.push(Check {
        name: CHECK_MINIMALITY.into(),
        passed: empty_blocks.is_empty(),
        detail: if empty_blocks.is_empty() {
            "every inter-cluster block is nonzero".into()
        } else {
            format!("zero blocks {} (clusters mergeable)", empty_blocks.join(", "))
        },
    });

    ValidationReport { checks, admissible_tripartite: Vec::new(), admissible_sign: Vec::new() }
}

/// Full validation: clustering-balance checks plus, when they pass, the
/// admissible labelings for both synthesis modes.
pub fn validate(net: &SignedNetwork) -> ValidationReport {
    let mut report = validate_clustering(net);
    if report.passed() {
        let adm = enumerate_admissible_labelings(net);
        report.admissible_tripartite = adm.tripartite;
        report.admissible_sign = adm.sign;
    }
    report
}

/// Connected components of the graph restricted to `nodes`, where `linked`
/// decides adjacency. Breadth-first, components in order of first node.
pub(crate) fn components(nodes: &[usize], linked: impl Fn(usize, usize) -> bool) -> Vec<Vec<usize>> {
    let mut comp_of = vec![usize::MAX; nodes.len()];
    let mut comps = Vec::new();
    for start in 0..nodes.len() {
        if comp_of[start] != usize::MAX {
            continue;
        }
        let id = comps.len();
        let mut comp = vec![nodes[start]];
        comp_of[start] = id;
        let mut queue = VecDeque::from([start]);
        while let Some(u) = queue.pop_front() {
            for v in 0..nodes.len() {
                if comp_of[v] == usize::MAX && linked(nodes[u], nodes[v]) {
                    comp_of[v] = id;
                    comp.push(nodes[v]);
                    queue.push_back(v);
                }
            }
        }
        comps.push(comp);
    }
    comps
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FriendshipCheck {
    pub holds: bool,
    /// First pair (0-based agents) of `V_{i2}` that is neither friendly nor
    /// bridged by enemies in a common friendship component of `V_{i1}`.
    pub failing_pair: Option<(usize, usize)>,
}

/// Close-friendship test for the cluster pair `(i1, i2)`.
pub fn check_close_friendship(
    net: &SignedNetwork,
    i1: usize,
    i2: usize,
) -> Result<FriendshipCheck, NetworkError> {
    if i1 > 2 {
        return Err(NetworkError::InvalidCluster(i1));
    }
    if i2 > 2 || i2 == i1 {
        return Err(NetworkError::InvalidCluster(i2));
    }
    let group = net.cluster(i2);
    if group.len() == 1 {
        return Ok(FriendshipCheck { holds: true, failing_pair: None });
    }
    let anchor = net.cluster(i1);
    let comps = components(anchor, |r, s| net.weight(r, s) > 0.0);
    // For each agent of V_{i2}: the friendship components of V_{i1} that
    // contain at least one of its enemies.
    let enemy_comps: Vec<Vec<bool>> = group
        .iter()
        .map(|&i| {
            comps.iter().map(|c| c.iter().any(|&r| net.weight(i, r) < 0.0)).collect()
        })
        .collect();
    for a in 0..group.len() {
        for b in (a + 1)..group.len() {
            let (i, j) = (group[a], group[b]);
            if net.weight(i, j) > 0.0 {
                continue;
            }
            let bridged = (0..comps.len()).any(|c| enemy_comps[a][c] && enemy_comps[b][c]);
            if !bridged {
                return Ok(FriendshipCheck { holds: false, failing_pair: Some((i, j)) });
            }
        }
    }
    Ok(FriendshipCheck { holds: true, failing_pair: None })
}

/// Labelings satisfying the structural hypotheses of each synthesis
/// mode. Order is lexicographic on `(i1, i2, i3)`, then on `h`.
pub fn enumerate_admissible_labelings(net: &SignedNetwork) -> Admissible {
    let sums = block_row_sums(net);
    let mut adm = Admissible::default();
    for labeling in Labeling::all() {
        let (i1, i2, i3) = (labeling.i1(), labeling.i2(), labeling.i3());
        let friendly = check_close_friendship(net, i1, i2).map(|c| c.holds).unwrap_or(false);
        if !friendly {
            continue;
        }
        if strictly_negative(sums.get(i3, i2)) {
            let mut hs = [i2, i3];
            hs.sort_unstable();
            for h in hs {
                if strictly_negative(sums.get(i1, h)) {
                    adm.tripartite.push(TripartiteCandidate { labeling, h });
                }
            }
        }
        if strictly_negative(sums.get(i1, i2)) {
            adm.sign.push(labeling);
        }
    }
    adm
}
