//! Gain synthesis for tripartite consensus.
//!
//! Working order: the cluster in role `i1` occupies block position 0, `i3`
//! position 1 and `i2` position 2 (see [`Labeling::block_order`]). The
//! structured kernel vector is `[1 * 1, v2 * 1, v3 * 1]` in that order, and
//! for fixed ratios `(v2, v3)` the gains are the unique diagonal making it a
//! null vector of `M`:
//!
//! ```text
//! d_0 = a_00 + v2 a_01 + v3 a_02
//! d_1 = a_11 + a_10 / v2 + (v3 / v2) a_12
//! d_2 = a_22 + a_20 / v3 + (v2 / v3) a_21
//! ```
//!
//! Every candidate is certified on the final `M`: PSD, simple zero
//! eigenvalue, and a kernel with the block-constant pattern.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::closed_loop::ClosedLoopMatrix;
use crate::matalg::{nonneg_inverse, numerical_rank, MatalgError, SpectralSummary};
use crate::network::{
    block_row_sums, check_close_friendship, enumerate_admissible_labelings, strictly_negative,
    validate_clustering, BlockRowSums, Labeling, NetworkError, SignedNetwork, STRICT_TOL,
};
use crate::outcome::{Infeasibility, Outcome};

/// Relative tolerance for the rank of the reduced `N x 3` matrix.
pub const RANK_TOL: f64 = 1e-9;
/// Entrywise tolerance when matching the normalized kernel vector.
pub const KERNEL_MATCH_TOL: f64 = 1e-6;
/// Tolerance on `||Phi_3 1||_inf`.
pub const SCHUR_NULL_TOL: f64 = 1e-8;

#[derive(Debug, Error)]
pub enum SynthesisError {
    #[error("zero kernel ratio")]
    ZeroRatio,
    #[error("non-finite kernel ratio")]
    NonFiniteRatio,
    #[error("inadmissible labeling {labeling} with h = {h}")]
    InadmissibleLabeling { labeling: Labeling, h: usize },
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error(transparent)]
    Matalg(#[from] MatalgError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct TripartiteGains {
    pub labeling: Labeling,
    /// Kernel ratios `(1, v2, v3)` in working order.
    pub v: [f64; 3],
    /// Gain vectors indexed by original cluster, entries in cluster order.
    pub d: [DVector<f64>; 3],
    pub m: ClosedLoopMatrix,
}

impl TripartiteGains {
    /// The structured null vector, indexed by agent.
    pub fn kernel_vector(&self, net: &SignedNetwork) -> DVector<f64> {
        let mut w = DVector::zeros(net.size());
        for (pos, &cluster) in self.labeling.block_order().iter().enumerate() {
            for &agent in net.cluster(cluster) {
                w[agent] = self.v[pos];
            }
        }
        w
    }

    /// Kernel value carried by each original cluster.
    pub fn cluster_ratios(&self) -> [f64; 3] {
        let mut out = [0.0; 3];
        for (pos, &cluster) in self.labeling.block_order().iter().enumerate() {
            out[cluster] = self.v[pos];
        }
        out
    }

    pub fn to_record(&self) -> TripartiteRecord {
        TripartiteRecord {
            labeling: self.labeling.one_based(),
            v: self.v,
            d: gains_map(&self.d),
        }
    }
}

pub(crate) fn gains_map(d: &[DVector<f64>; 3]) -> BTreeMap<String, Vec<f64>> {
    (0..3).map(|p| ((p + 1).to_string(), d[p].as_slice().to_vec())).collect()
}

/// Serialized tripartite gains, keyed by 1-based original cluster.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TripartiteRecord {
    pub labeling: [usize; 3],
    pub v: [f64; 3],
    pub d: BTreeMap<String, Vec<f64>>,
}

/// Row sums `a_pq` re-indexed by working position.
struct WorkingSums<'a> {
    sums: &'a BlockRowSums,
    order: [usize; 3],
}

impl WorkingSums<'_> {
    fn a(&self, p: usize, q: usize) -> &DVector<f64> {
        self.sums.get(self.order[p], self.order[q])
    }
}

pub fn gains_from_ratios(
    net: &SignedNetwork,
    labeling: Labeling,
    v2: f64,
    v3: f64,
) -> Result<TripartiteGains, SynthesisError> {
    if v2 == 0.0 || v3 == 0.0 {
        return Err(SynthesisError::ZeroRatio);
    }
    if !v2.is_finite() || !v3.is_finite() {
        return Err(SynthesisError::NonFiniteRatio);
    }
    let sums = block_row_sums(net);
    let order = labeling.block_order();
    let ws = WorkingSums { sums: &sums, order };
    let by_position = [
        ws.a(0, 0) + ws.a(0, 1) * v2 + ws.a(0, 2) * v3,
        ws.a(1, 1) + ws.a(1, 0) / v2 + ws.a(1, 2) * (v3 / v2),
        ws.a(2, 2) + ws.a(2, 0) / v3 + ws.a(2, 1) * (v2 / v3),
    ];
    let mut d: [DVector<f64>; 3] = Default::default();
    for (pos, values) in by_position.into_iter().enumerate() {
        d[order[pos]] = values;
    }
    let m = ClosedLoopMatrix::new(net, net.scatter(&d))?;
    Ok(TripartiteGains { labeling, v: [1.0, v2, v3], d, m })
}

/// Rebuilds gains from a serialized record, recomputing `M`.
pub fn gains_from_record(net: &SignedNetwork, rec: &TripartiteRecord) -> Result<TripartiteGains, SynthesisError> {
    let labeling = Labeling::from_one_based(rec.labeling)?;
    let d = record_gains(net, &rec.d)?;
    let m = ClosedLoopMatrix::new(net, net.scatter(&d))?;
    Ok(TripartiteGains { labeling, v: rec.v, d, m })
}

pub(crate) fn record_gains(
    net: &SignedNetwork,
    map: &BTreeMap<String, Vec<f64>>,
) -> Result<[DVector<f64>; 3], NetworkError> {
    let mut d: [DVector<f64>; 3] = Default::default();
    for (p, slot) in d.iter_mut().enumerate() {
        let key = (p + 1).to_string();
        let values = map
            .get(&key)
            .ok_or_else(|| NetworkError::Partition(format!("gains missing cluster {key}")))?;
        if values.len() != net.cluster(p).len() {
            return Err(NetworkError::Partition(format!(
                "gains for cluster {key} have length {}, cluster has {} agents",
                values.len(),
                net.cluster(p).len()
            )));
        }
        *slot = DVector::from_column_slice(values);
    }
    Ok(d)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "status", content = "detail", rename_all = "kebab-case")]
pub enum ConstraintStatus {
    Passed,
    Failed(String),
    Skipped(String),
}

impl ConstraintStatus {
    pub fn passed(&self) -> bool {
        matches!(self, ConstraintStatus::Passed)
    }
}

/// The sufficient inequality chain behind the construction.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConstraintReport {
    /// `d_0 >> a_00`, making `D_0 - A_00` positive definite.
    pub first_block_dominance: ConstraintStatus,
    /// `d_1 >> a_11 + A_10 (D_0 - A_00)^{-1} a_01`.
    pub middle_block_floor: ConstraintStatus,
    /// `Phi_3 1 = 0` for the trailing Schur complement.
    pub trailing_schur_null: ConstraintStatus,
}

impl ConstraintReport {
    pub fn all_passed(&self) -> bool {
        self.first_block_dominance.passed() && self.middle_block_floor.passed() && self.trailing_schur_null.passed()
    }
}

fn first_violation(lhs: &DVector<f64>, rhs: &DVector<f64>) -> Option<(usize, f64, f64)> {
    (0..lhs.len()).find(|&k| lhs[k] - rhs[k] <= STRICT_TOL).map(|k| (k, lhs[k], rhs[k]))
}

/// Lower bound `a_11 + A_10 (D_0 - A_00)^{-1} a_01` on the middle-block
/// gains, in working order for `labeling`.
pub(crate) fn middle_floor(
    net: &SignedNetwork,
    labeling: Labeling,
    first_gains: &DVector<f64>,
) -> Result<DVector<f64>, MatalgError> {
    let [p0, p1, _] = labeling.block_order();
    let inv = nonneg_inverse(first_gains, &net.block(p0, p0))?;
    let sums = block_row_sums(net);
    Ok(sums.get(p1, p1) + net.block(p1, p0) * inv * sums.get(p0, p1))
}

/// `||Phi_3 1||_inf` for the trailing Schur complement of the working-order
/// `M`. Needs the leading two blocks of `M` to be positive definite.
pub fn schur_null_residual(net: &SignedNetwork, gains: &TripartiteGains) -> Result<f64, MatalgError> {
    let phi = gains.m.trailing_schur(net, gains.labeling.block_order())?;
    let ones = DVector::from_element(phi.nrows(), 1.0);
    Ok((phi * ones).amax())
}

pub fn check_inequality_constraints(net: &SignedNetwork, gains: &TripartiteGains) -> ConstraintReport {
    let order = gains.labeling.block_order();
    let sums = block_row_sums(net);
    let d0 = &gains.d[order[0]];
    let d1 = &gains.d[order[1]];

    if let Some((k, d, a)) = first_violation(d0, sums.get(order[0], order[0])) {
        let why = "first-block dominance failed".to_string();
        return ConstraintReport {
            first_block_dominance: ConstraintStatus::Failed(format!(
                "agent {} of cluster {}: d = {d} <= a = {a}",
                k + 1,
                order[0] + 1
            )),
            middle_block_floor: ConstraintStatus::Skipped(why.clone()),
            trailing_schur_null: ConstraintStatus::Skipped(why),
        };
    }

    let middle = match middle_floor(net, gains.labeling, d0) {
        Err(e) => ConstraintStatus::Failed(e.to_string()),
        Ok(floor) => match first_violation(d1, &floor) {
            None => ConstraintStatus::Passed,
            Some((k, d, f)) => ConstraintStatus::Failed(format!(
                "agent {} of cluster {}: d = {d} <= floor = {f}",
                k + 1,
                order[1] + 1
            )),
        },
    };
    let trailing = if !middle.passed() {
        ConstraintStatus::Skipped("middle-block floor failed".into())
    } else {
        match schur_null_residual(net, gains) {
            Err(e) => ConstraintStatus::Failed(e.to_string()),
            Ok(r) if r < SCHUR_NULL_TOL * gains.m.max_abs_entry().max(1.0) => ConstraintStatus::Passed,
            Ok(r) => ConstraintStatus::Failed(format!("||Phi_3 1||_inf = {r:e}")),
        }
    };
    ConstraintReport {
        first_block_dominance: ConstraintStatus::Passed,
        middle_block_floor: middle,
        trailing_schur_null: trailing,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "status", content = "reason", rename_all = "kebab-case")]
pub enum KernelVerdict {
    Certified,
    Rejected(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthesisResult {
    pub gains: TripartiteGains,
    pub certificate: SpectralSummary,
    pub reduced_rank: usize,
    pub constraints: ConstraintReport,
    pub status: KernelVerdict,
}

impl SynthesisResult {
    pub fn is_certified(&self) -> bool {
        self.status == KernelVerdict::Certified
    }
}

/// The `N x 3` matrix whose block row `p` is
/// `[-a_p0 | -a_p1 | -a_p2]` with `d_p - a_pp` on the diagonal block, in
/// working order.
pub fn reduced_matrix(net: &SignedNetwork, gains: &TripartiteGains) -> DMatrix<f64> {
    let order = gains.labeling.block_order();
    let sums = block_row_sums(net);
    let n = net.size();
    let mut r = DMatrix::zeros(n, 3);
    let mut row = 0;
    for p in 0..3 {
        let len = net.cluster(order[p]).len();
        for k in 0..len {
            for q in 0..3 {
                let a = sums.get(order[p], order[q])[k];
                r[(row + k, q)] = if p == q { gains.d[order[p]][k] - a } else { -a };
            }
        }
        row += len;
    }
    r
}

/// Checks that `expected` spans the (one-dimensional) kernel.
pub(crate) fn kernel_matches(basis: &DVector<f64>, expected: &DVector<f64>, tol: f64) -> bool {
    let e = expected / expected.norm();
    let sign = if basis.dot(&e) < 0.0 { -1.0 } else { 1.0 };
    (basis * sign - e).amax() < tol
}

pub fn verify_structured_kernel(net: &SignedNetwork, gains: &TripartiteGains) -> SynthesisResult {
    verify_with_tol(net, gains, KERNEL_MATCH_TOL)
}

pub fn verify_with_tol(net: &SignedNetwork, gains: &TripartiteGains, kernel_tol: f64) -> SynthesisResult {
    let certificate = gains.m.spectrum().clone();
    let reduced_rank = numerical_rank(&reduced_matrix(net, gains), RANK_TOL);
    let status = if !certificate.is_psd() {
        KernelVerdict::Rejected(format!(
            "M not positive semidefinite (min eigenvalue {:e})",
            certificate.min_eigenvalue()
        ))
    } else if certificate.zero_multiplicity == 0 {
        KernelVerdict::Rejected("M nonsingular".into())
    } else if certificate.zero_multiplicity > 1 {
        KernelVerdict::Rejected(format!(
            "zero eigenvalue not simple (multiplicity {})",
            certificate.zero_multiplicity
        ))
    } else if reduced_rank >= 3 {
        KernelVerdict::Rejected("reduced matrix has full rank".into())
    } else if !kernel_matches(&certificate.kernel_basis[0], &gains.kernel_vector(net), kernel_tol) {
        KernelVerdict::Rejected("kernel vector lacks the block-constant pattern".into())
    } else {
        KernelVerdict::Certified
    };
    SynthesisResult {
        constraints: check_inequality_constraints(net, gains),
        gains: gains.clone(),
        certificate,
        reduced_rank,
        status,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchConfig {
    /// Candidate magnitudes for `|v2|` and `|v3|`.
    pub magnitudes: Vec<f64>,
    /// Try only this `(v2, v3)` pair.
    pub pinned: Option<(f64, f64)>,
    pub kernel_tol: f64,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            magnitudes: (-2..=10).map(|k| 2f64.powi(k)).collect(),
            pinned: None,
            kernel_tol: KERNEL_MATCH_TOL,
        }
    }
}

/// Candidate `(v2, v3)` pairs in trial order. When `h` is the middle
/// cluster (`i3`) the guided quadrant is `v2 < 0`, `v3 > 0`; when it is
/// `i2` the mirrored quadrant comes first. The remaining quadrants follow.
pub fn ratio_grid(labeling: Labeling, h: usize, cfg: &SearchConfig) -> Vec<(f64, f64)> {
    if let Some(p) = cfg.pinned {
        return vec![p];
    }
    let mut quadrants = vec![(-1.0, 1.0), (1.0, -1.0), (1.0, 1.0), (-1.0, -1.0)];
    if h == labeling.i2() {
        quadrants.swap(0, 1);
    }
    let mut grid = Vec::with_capacity(4 * cfg.magnitudes.len().pow(2));
    for (s2, s3) in quadrants {
        for &m2 in &cfg.magnitudes {
            for &m3 in &cfg.magnitudes {
                grid.push((s2 * m2, s3 * m3));
            }
        }
    }
    grid
}

fn search(
    net: &SignedNetwork,
    labeling: Labeling,
    h: usize,
    cfg: &SearchConfig,
) -> Result<Option<SynthesisResult>, SynthesisError> {
    let admissible = enumerate_admissible_labelings(net)
        .tripartite
        .iter()
        .any(|c| c.labeling == labeling && c.h == h);
    if !admissible {
        return Err(SynthesisError::InadmissibleLabeling { labeling, h: h + 1 });
    }
    for (v2, v3) in ratio_grid(labeling, h, cfg) {
        let gains = match gains_from_ratios(net, labeling, v2, v3) {
            Ok(g) => g,
            Err(SynthesisError::Matalg(_)) => continue,
            Err(e) => return Err(e),
        };
        let result = verify_with_tol(net, &gains, cfg.kernel_tol);
        if result.is_certified() {
            return Ok(Some(result));
        }
    }
    Ok(None)
}

/// First grid pair `(v2, v3)` whose gains certify, or `None`.
pub fn search_ratios(
    net: &SignedNetwork,
    labeling: Labeling,
    h: usize,
    cfg: &SearchConfig,
) -> Result<Option<(f64, f64)>, SynthesisError> {
    Ok(search(net, labeling, h, cfg)?.map(|r| (r.gains.v[1], r.gains.v[2])))
}

pub fn synthesize_tripartite(net: &SignedNetwork, cfg: &SearchConfig) -> Outcome<SynthesisResult> {
    let mut why = Infeasibility::default();
    let report = validate_clustering(net);
    if !report.passed() {
        let failed: Vec<_> = report.checks.iter().filter(|c| !c.passed).map(|c| c.name.as_str()).collect();
        why.push(None, format!("clustering balance fails: {}", failed.join(", ")));
        return Outcome::Infeasible(why);
    }
    let sums = block_row_sums(net);
    let admissible = enumerate_admissible_labelings(net).tripartite;
    for labeling in Labeling::all() {
        let candidates: Vec<_> = admissible.iter().filter(|c| c.labeling == labeling).collect();
        if candidates.is_empty() {
            why.push(Some(labeling), inadmissibility_reason(net, &sums, labeling));
            continue;
        }
        for cand in candidates {
            match search(net, labeling, cand.h, cfg) {
                Ok(Some(result)) => return Outcome::Certified(result),
                Ok(None) => why.push(Some(labeling), format!("ratio grid exhausted (h = {})", cand.h + 1)),
                Err(e) => why.push(Some(labeling), e.to_string()),
            }
        }
    }
    Outcome::Infeasible(why)
}

fn inadmissibility_reason(net: &SignedNetwork, sums: &BlockRowSums, l: Labeling) -> String {
    let friendly = check_close_friendship(net, l.i1(), l.i2()).map(|c| c.holds).unwrap_or(false);
    if !friendly {
        "close friendship fails".into()
    } else if !strictly_negative(sums.get(l.i3(), l.i2())) {
        format!("some agent of cluster {} has no enemy in cluster {}", l.i3() + 1, l.i2() + 1)
    } else {
        format!("some agent of cluster {} lacks enemies in both other clusters", l.i1() + 1)
    }
}
