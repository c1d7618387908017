//! Gain synthesis for sign consensus.
//!
//! Roles follow the labeling: cluster `i1` converges to values of one sign,
//! cluster `i2` to the opposite sign and cluster `i3` to zero. The kernel
//! vector is `[v1, 0, v3]` in working order (`i1`, `i3`, `i2`) with
//! `v1 >> 0`, `v3 << 0` and `A_{i3,i1} v1 + A_{i3,i2} v3 = 0`. The two outer
//! gain blocks are fixed by that vector; the middle block is the floor
//! `a_{i3,i3} + A_{i3,i1} (D_{i1} - A_{i1,i1})^{-1} a_{i1,i3}` plus a margin
//! that doubles until the closed loop certifies.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::closed_loop::ClosedLoopMatrix;
use crate::matalg::{
    eig_sym, least_distance, metzler_summary, nonneg_inverse, null_space, MatalgError, MetzlerSummary,
    SpectralSummary,
};
use crate::network::{
    block_row_sums, check_close_friendship, enumerate_admissible_labelings, validate_clustering, Labeling,
    NetworkError, SignedNetwork,
};
use crate::outcome::{Infeasibility, Outcome};
use crate::tripartite::{gains_map, kernel_matches, middle_floor, record_gains, KernelVerdict, KERNEL_MATCH_TOL};

/// Relative tolerance for the null-space identity on the middle cluster.
pub const NULL_IDENTITY_TOL: f64 = 1e-10;
/// Strict positivity threshold for the off-diagonal entries of `-Phi_3`.
pub const OFF_DIAGONAL_TOL: f64 = 1e-10;
/// Tolerance on the Frobenius eigenvalue of `-Phi_3` being zero.
pub const FROBENIUS_ZERO_TOL: f64 = 1e-8;
/// Singular values below this (relative) span the null space.
pub const NULL_SPACE_TOL: f64 = 1e-10;

#[derive(Debug, Error)]
pub enum SignError {
    #[error("zero component in null vector")]
    ZeroComponent,
    #[error("null vector length mismatch: expected ({0}, {1})")]
    LengthMismatch(usize, usize),
    #[error("gain identity residual {0:e} exceeds tolerance")]
    Residual(f64),
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error(transparent)]
    Matalg(#[from] MatalgError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SignGains {
    pub labeling: Labeling,
    /// Strictly positive, indexed by the agents of cluster `i1`.
    pub v1: DVector<f64>,
    /// Strictly negative, indexed by the agents of cluster `i2`.
    pub v3: DVector<f64>,
    pub d: [DVector<f64>; 3],
    pub margin: f64,
    pub m: ClosedLoopMatrix,
}

impl SignGains {
    pub fn kernel_vector(&self, net: &SignedNetwork) -> DVector<f64> {
        let mut parts: [DVector<f64>; 3] = std::array::from_fn(|p| DVector::zeros(net.cluster(p).len()));
        parts[self.labeling.i1()] = self.v1.clone();
        parts[self.labeling.i2()] = self.v3.clone();
        net.scatter(&parts)
    }

    /// The cluster whose agents converge to zero.
    pub fn zero_cluster(&self) -> usize {
        self.labeling.i3()
    }

    pub fn to_record(&self) -> SignRecord {
        SignRecord {
            labeling: self.labeling.one_based(),
            v1: self.v1.as_slice().to_vec(),
            v3: self.v3.as_slice().to_vec(),
            d: gains_map(&self.d),
            margin: self.margin,
        }
    }
}

/// Serialized sign-consensus gains, `d` keyed by 1-based original cluster.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SignRecord {
    pub labeling: [usize; 3],
    pub v1: Vec<f64>,
    pub v3: Vec<f64>,
    pub d: std::collections::BTreeMap<String, Vec<f64>>,
    pub margin: f64,
}

pub fn gains_from_record(net: &SignedNetwork, rec: &SignRecord) -> Result<SignGains, SignError> {
    let labeling = Labeling::from_one_based(rec.labeling)?;
    let d = record_gains(net, &rec.d)?;
    let (n1, n3) = (net.cluster(labeling.i1()).len(), net.cluster(labeling.i2()).len());
    if rec.v1.len() != n1 || rec.v3.len() != n3 {
        return Err(SignError::LengthMismatch(n1, n3));
    }
    let m = ClosedLoopMatrix::new(net, net.scatter(&d))?;
    Ok(SignGains {
        labeling,
        v1: DVector::from_column_slice(&rec.v1),
        v3: DVector::from_column_slice(&rec.v3),
        d,
        margin: rec.margin,
        m,
    })
}

fn null_identity_residual(net: &SignedNetwork, labeling: Labeling, v1: &DVector<f64>, v3: &DVector<f64>) -> f64 {
    let (i1, i2, i3) = (labeling.i1(), labeling.i2(), labeling.i3());
    (net.block(i3, i1) * v1 + net.block(i3, i2) * v3).amax()
}

fn identity_scale(net: &SignedNetwork, v1: &DVector<f64>, v3: &DVector<f64>) -> f64 {
    (net.weights().amax() * v1.amax().max(v3.amax()) * net.size() as f64).max(1.0)
}

/// A pair `(v1, v3)` of null-vector blocks.
pub type NullPair = (DVector<f64>, DVector<f64>);

/// Sign-constrained vector in the null space of `[A_{i3,i1} | A_{i3,i2}]`.
///
/// Among all null vectors with `v1 >= 1` and `v3 <= -1` the one of least
/// Euclidean norm is returned, rescaled if needed so that
/// `||[v1; v3]||_inf <= 10`; entries must then clear `eps` in magnitude.
pub fn find_signed_nullspace(
    net: &SignedNetwork,
    labeling: Labeling,
    eps: f64,
) -> Result<Option<NullPair>, SignError> {
    let (i1, i2, i3) = (labeling.i1(), labeling.i2(), labeling.i3());
    let (n1, n3) = (net.cluster(i1).len(), net.cluster(i2).len());
    let left = net.block(i3, i1);
    let right = net.block(i3, i2);
    let mut stacked = DMatrix::zeros(left.nrows(), n1 + n3);
    stacked.view_mut((0, 0), (left.nrows(), n1)).copy_from(&left);
    stacked.view_mut((0, n1), (left.nrows(), n3)).copy_from(&right);

    let basis = null_space(&stacked, NULL_SPACE_TOL);
    if basis.ncols() == 0 {
        return Ok(None);
    }
    // v = Z y; rows of G flip sign on the v3 coordinates so that G y >= 1
    let mut g = basis.clone();
    for r in n1..(n1 + n3) {
        g.row_mut(r).neg_mut();
    }
    let Some(y) = least_distance(&g, &DVector::from_element(n1 + n3, 1.0)) else {
        return Ok(None);
    };
    let mut v = &basis * y;
    let top = v.amax();
    if top > 10.0 {
        v *= 10.0 / top;
    }
    let v1 = v.rows(0, n1).into_owned();
    let v3 = v.rows(n1, n3).into_owned();
    if v1.iter().any(|&x| x <= eps) || v3.iter().any(|&x| x >= -eps) {
        return Ok(None);
    }
    if null_identity_residual(net, labeling, &v1, &v3) > NULL_IDENTITY_TOL * identity_scale(net, &v1, &v3) {
        return Ok(None);
    }
    Ok(Some((v1, v3)))
}

/// Outer gain blocks making `[v1, 0, v3]` a null vector: for `p` the
/// cluster of `i1` (resp. `i2`) and `q` the other outer cluster,
/// `[D_p]_ii = ([A_pp v_p]_i + [A_pq v_q]_i) / [v_p]_i`.
///
/// Returns `(d for cluster i1, d for cluster i2)`.
pub fn boundary_gains(
    net: &SignedNetwork,
    labeling: Labeling,
    v1: &DVector<f64>,
    v3: &DVector<f64>,
) -> Result<(DVector<f64>, DVector<f64>), SignError> {
    let (i1, i2) = (labeling.i1(), labeling.i2());
    let (n1, n3) = (net.cluster(i1).len(), net.cluster(i2).len());
    if v1.len() != n1 || v3.len() != n3 {
        return Err(SignError::LengthMismatch(n1, n3));
    }
    if v1.iter().chain(v3.iter()).any(|&x| x == 0.0) {
        return Err(SignError::ZeroComponent);
    }
    let solve = |p: usize, q: usize, vp: &DVector<f64>, vq: &DVector<f64>| {
        let rhs = net.block(p, p) * vp + net.block(p, q) * vq;
        let d = rhs.component_div(vp);
        let residual = (d.component_mul(vp) - rhs).amax();
        (d, residual)
    };
    let (d1, r1) = solve(i1, i2, v1, v3);
    let (d3, r3) = solve(i2, i1, v3, v1);
    let residual = r1.max(r3);
    if residual > NULL_IDENTITY_TOL * identity_scale(net, v1, v3) {
        return Err(SignError::Residual(residual));
    }
    Ok((d1, d3))
}

/// Strict lower bound on the gains of the zero cluster `i3` given the gains
/// of cluster `i1`. Requires `D_{i1} - A_{i1,i1}` positive definite.
pub fn middle_gain_floor(net: &SignedNetwork, labeling: Labeling, d1: &DVector<f64>) -> Result<DVector<f64>, SignError> {
    Ok(middle_floor(net, labeling, d1)?)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SignCertification {
    pub certificate: SpectralSummary,
    pub phi3: Option<DMatrix<f64>>,
    pub phi3_metzler: Option<MetzlerSummary>,
    pub status: KernelVerdict,
}

/// Certifies sign consensus for the given gains: `-Phi_3` irreducible
/// Metzler with positive off-diagonal entries and Frobenius eigenvalue 0
/// (simple), `Phi_3` PSD with a simple zero, and `M` PSD with a simple zero
/// whose kernel is spanned by `[v1, 0, v3]`.
pub fn certify_sign(net: &SignedNetwork, gains: &SignGains, kernel_tol: f64) -> SignCertification {
    let certificate = gains.m.spectrum().clone();
    let reject = |phi3, phi3_metzler, reason: String| SignCertification {
        certificate: certificate.clone(),
        phi3,
        phi3_metzler,
        status: KernelVerdict::Rejected(reason),
    };
    let phi3 = match gains.m.trailing_schur(net, gains.labeling.block_order()) {
        Ok(p) => p,
        Err(e) => return reject(None, None, format!("Schur chain broken: {e}")),
    };
    let neg = -&phi3;
    let metz = metzler_summary(&neg);
    let n = phi3.nrows();
    let off_diag_positive = (0..n).all(|r| (0..n).all(|c| r == c || neg[(r, c)] > OFF_DIAGONAL_TOL));
    if !metz.is_metzler || !metz.is_irreducible || !off_diag_positive {
        return reject(Some(phi3), Some(metz), "-Phi_3 is not an irreducible Metzler matrix with positive off-diagonal".into());
    }
    let lead = metz.frobenius_eig.unwrap_or(f64::NAN);
    let zero_lead = lead.abs() < FROBENIUS_ZERO_TOL * phi3.amax().max(1.0);
    if !zero_lead || metz.frobenius_multiplicity != 1 {
        return reject(
            Some(phi3),
            Some(metz),
            format!("Frobenius eigenvalue of -Phi_3 is {lead:e}, not a simple zero"),
        );
    }
    match eig_sym(&phi3) {
        Ok(s) if s.is_psd() && s.zero_multiplicity == 1 => {}
        Ok(s) => {
            return reject(
                Some(phi3),
                Some(metz),
                format!("Phi_3 not PSD with simple zero (zero multiplicity {})", s.zero_multiplicity),
            )
        }
        Err(e) => return reject(Some(phi3), Some(metz), e.to_string()),
    }
    let status = if !certificate.is_psd() {
        KernelVerdict::Rejected(format!("M not positive semidefinite (min eigenvalue {:e})", certificate.min_eigenvalue()))
    } else if certificate.zero_multiplicity != 1 {
        KernelVerdict::Rejected(format!("M zero eigenvalue multiplicity {}", certificate.zero_multiplicity))
    } else if !kernel_matches(&certificate.kernel_basis[0], &gains.kernel_vector(net), kernel_tol) {
        KernelVerdict::Rejected("kernel vector is not proportional to [v1, 0, v3]".into())
    } else {
        KernelVerdict::Certified
    };
    SignCertification { certificate, phi3: Some(phi3), phi3_metzler: Some(metz), status }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SignConfig {
    pub eps: f64,
    pub margin0: f64,
    pub max_doublings: u32,
    /// Null vectors `(v1, v3)` to use instead of the canonical choice.
    pub pinned: Option<(Vec<f64>, Vec<f64>)>,
    pub kernel_tol: f64,
}

impl Default for SignConfig {
    fn default() -> Self {
        Self { eps: 1e-3, margin0: 1.0, max_doublings: 40, pinned: None, kernel_tol: KERNEL_MATCH_TOL }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SignSynthesisResult {
    pub gains: SignGains,
    pub certificate: SpectralSummary,
    pub phi3: DMatrix<f64>,
    pub phi3_metzler: MetzlerSummary,
    pub doublings: u32,
}

/// Builds gains for a fixed labeling, null vectors and middle margin.
pub fn assemble_gains(
    net: &SignedNetwork,
    labeling: Labeling,
    v1: &DVector<f64>,
    v3: &DVector<f64>,
    margin: f64,
) -> Result<SignGains, SignError> {
    let (d1, d3) = boundary_gains(net, labeling, v1, v3)?;
    let floor = middle_gain_floor(net, labeling, &d1)?;
    let mut d: [DVector<f64>; 3] = Default::default();
    d[labeling.i1()] = d1;
    d[labeling.i2()] = d3;
    d[labeling.i3()] = floor.add_scalar(margin);
    let m = ClosedLoopMatrix::new(net, net.scatter(&d))?;
    Ok(SignGains { labeling, v1: v1.clone(), v3: v3.clone(), d, margin, m })
}

fn pinned_for(net: &SignedNetwork, labeling: Labeling, pinned: &(Vec<f64>, Vec<f64>)) -> Option<(DVector<f64>, DVector<f64>)> {
    let (n1, n3) = (net.cluster(labeling.i1()).len(), net.cluster(labeling.i2()).len());
    if pinned.0.len() != n1 || pinned.1.len() != n3 {
        return None;
    }
    let mut v1 = DVector::from_column_slice(&pinned.0);
    let mut v3 = DVector::from_column_slice(&pinned.1);
    if v1.iter().all(|&x| x < 0.0) && v3.iter().all(|&x| x > 0.0) {
        v1.neg_mut();
        v3.neg_mut();
    }
    let signed = v1.iter().all(|&x| x > 0.0) && v3.iter().all(|&x| x < 0.0);
    let fits = null_identity_residual(net, labeling, &v1, &v3) < NULL_IDENTITY_TOL * identity_scale(net, &v1, &v3);
    (signed && fits).then_some((v1, v3))
}

pub fn synthesize_sign(net: &SignedNetwork, cfg: &SignConfig) -> Outcome<SignSynthesisResult> {
    let mut why = Infeasibility::default();
    let report = validate_clustering(net);
    if !report.passed() {
        let failed: Vec<_> = report.checks.iter().filter(|c| !c.passed).map(|c| c.name.as_str()).collect();
        why.push(None, format!("clustering balance fails: {}", failed.join(", ")));
        return Outcome::Infeasible(why);
    }
    let admissible = enumerate_admissible_labelings(net).sign;
    for labeling in Labeling::all() {
        if !admissible.contains(&labeling) {
            let friendly = check_close_friendship(net, labeling.i1(), labeling.i2()).map(|c| c.holds).unwrap_or(false);
            why.push(
                Some(labeling),
                if friendly {
                    format!(
                        "enemy coverage fails: some agent of cluster {} has no enemy in cluster {}",
                        labeling.i1() + 1,
                        labeling.i2() + 1
                    )
                } else {
                    "close friendship fails".into()
                },
            );
            continue;
        }
        match try_labeling(net, labeling, cfg) {
            Ok(result) => return Outcome::Certified(result),
            Err(reason) => why.push(Some(labeling), reason),
        }
    }
    Outcome::Infeasible(why)
}

fn try_labeling(net: &SignedNetwork, labeling: Labeling, cfg: &SignConfig) -> Result<SignSynthesisResult, String> {
    let (v1, v3) = match &cfg.pinned {
        Some(p) => pinned_for(net, labeling, p).ok_or("pinned null vectors do not fit this labeling")?,
        None => find_signed_nullspace(net, labeling, cfg.eps)
            .map_err(|e| e.to_string())?
            .ok_or("no sign-constrained null vector")?,
    };
    let mut last = String::new();
    for k in 0..=cfg.max_doublings {
        let margin = cfg.margin0 * 2f64.powi(k as i32);
        let gains = assemble_gains(net, labeling, &v1, &v3, margin).map_err(|e| e.to_string())?;
        let cert = certify_sign(net, &gains, cfg.kernel_tol);
        match cert.status {
            KernelVerdict::Certified => {
                return Ok(SignSynthesisResult {
                    certificate: cert.certificate,
                    phi3: cert.phi3.expect("certified implies Phi_3"),
                    phi3_metzler: cert.phi3_metzler.expect("certified implies Metzler summary"),
                    gains,
                    doublings: k,
                })
            }
            KernelVerdict::Rejected(reason) => last = reason,
        }
    }
    Err(format!("margin escalation exhausted ({last})"))
}

/// Residuals of the two cancellations behind the sign construction:
/// `-D_{i2} v3 + A_{i2,i2} v3 + A_{i2,i1} X A_{i1,i2} v3` and
/// `A_{i3,i1} X A_{i1,i2} v3 + A_{i3,i2} v3`, with
/// `X = (D_{i1} - A_{i1,i1})^{-1}`.
pub fn cancellation_residuals(net: &SignedNetwork, gains: &SignGains) -> Result<(f64, f64), SignError> {
    let (i1, i2, i3) = (gains.labeling.i1(), gains.labeling.i2(), gains.labeling.i3());
    let x = nonneg_inverse(&gains.d[i1], &net.block(i1, i1))?;
    let pulled = x * (net.block(i1, i2) * &gains.v3);
    let outer = -gains.d[i2].component_mul(&gains.v3) + net.block(i2, i2) * &gains.v3 + net.block(i2, i1) * &pulled;
    let middle = net.block(i3, i1) * &pulled + net.block(i3, i2) * &gains.v3;
    Ok((outer.amax(), middle.amax()))
}

/// `A_{i1,i2} 1 << 0`, i.e. every agent of `i1` has an enemy in `i2`.
pub fn enemy_coverage(net: &SignedNetwork, labeling: Labeling) -> bool {
    crate::network::strictly_negative(block_row_sums(net).get(labeling.i1(), labeling.i2()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::load_network;
    use approx::assert_relative_eq;
    use nalgebra::dvector;

    fn triangle() -> SignedNetwork {
        load_network(
            r#"{"n":3,"clusters":[[1],[2],[3]],"edges":[
            {"i":1,"j":2,"w":-1},{"i":1,"j":3,"w":-1},{"i":2,"j":3,"w":-1}]}"#,
        )
        .unwrap()
    }

    #[test]
    fn singleton_null_vector() {
        let l = Labeling::new(0, 2, 1).unwrap();
        let (v1, v3) = find_signed_nullspace(&triangle(), l, 1e-3).unwrap().unwrap();
        assert_relative_eq!(v1[0], 1.0, epsilon = 1e-10);
        assert_relative_eq!(v3[0], -1.0, epsilon = 1e-10);
    }

    #[test]
    fn overdetermined_null_space_is_empty() {
        // middle cluster of two agents: -v1 - v3 = 0 and -2 v1 - v3 = 0
        let doc = r#"{"n":4,"clusters":[[1],[2,3],[4]],"edges":[
            {"i":2,"j":1,"w":-1},{"i":3,"j":1,"w":-2},
            {"i":2,"j":4,"w":-1},{"i":3,"j":4,"w":-1},{"i":1,"j":4,"w":-1}]}"#;
        let net = load_network(doc).unwrap();
        let l = Labeling::new(0, 2, 1).unwrap();
        assert_eq!(find_signed_nullspace(&net, l, 1e-3).unwrap(), None);
    }

    #[test]
    fn boundary_gains_collapse_without_friends() {
        // A_pp = 0 and v_p = 1: D_p = diag(A_pq v_q)
        let net = triangle();
        let l = Labeling::new(0, 2, 1).unwrap();
        let (d1, d3) = boundary_gains(&net, l, &dvector![1.0], &dvector![-3.0]).unwrap();
        assert_relative_eq!(d1[0], 3.0);
        assert_relative_eq!(d3[0], 1.0 / 3.0, epsilon = 1e-15);
        assert!(matches!(
            boundary_gains(&net, l, &dvector![0.0], &dvector![-1.0]),
            Err(SignError::ZeroComponent)
        ));
    }

    #[test]
    fn floor_for_singletons() {
        // A11 = 0, D1 = delta, A21 = [-alpha]: floor = alpha^2 / delta
        let doc = r#"{"n":3,"clusters":[[1],[2],[3]],"edges":[
            {"i":1,"j":2,"w":-1.5},{"i":1,"j":3,"w":-1},{"i":2,"j":3,"w":-1}]}"#;
        let net = load_network(doc).unwrap();
        let l = Labeling::new(0, 2, 1).unwrap();
        let floor = middle_gain_floor(&net, l, &dvector![0.5]).unwrap();
        assert_relative_eq!(floor[0], 1.5 * 1.5 / 0.5, epsilon = 1e-12);
        assert!(middle_gain_floor(&net, l, &dvector![-0.5]).is_err());
    }

    #[test]
    fn floor_without_coupling_is_row_sum() {
        // cluster 2 has no edge to cluster 1, so the floor is a_22
        let doc = r#"{"n":5,"clusters":[[1],[2,3],[4,5]],"edges":[
            {"i":2,"j":3,"w":2},{"i":4,"j":5,"w":1},
            {"i":1,"j":4,"w":-1},{"i":1,"j":5,"w":-1},{"i":2,"j":4,"w":-1},{"i":3,"j":5,"w":-1}]}"#;
        let net = load_network(doc).unwrap();
        let l = Labeling::new(0, 2, 1).unwrap();
        let floor = middle_gain_floor(&net, l, &dvector![5.0]).unwrap();
        assert_eq!(floor, dvector![2.0, 2.0]);
    }

    #[test]
    fn singleton_toy_certifies_at_small_margin() {
        let net = triangle();
        let r = synthesize_sign(&net, &SignConfig::default()).certified().unwrap();
        // labeling (1,2,3): v1 = 1, v3 = -1, D_{i1} = D_{i2} = 1, floor = 1,
        // so the middle gain is 2 and Phi_3 = [0]
        assert_eq!(r.gains.labeling, Labeling::new(0, 1, 2).unwrap());
        assert_eq!(r.doublings, 0);
        assert_relative_eq!(r.gains.d[0][0], 1.0, epsilon = 1e-12);
        assert_relative_eq!(r.gains.d[1][0], 1.0, epsilon = 1e-12);
        assert_relative_eq!(r.gains.d[2][0], 2.0, epsilon = 1e-12);
        assert_eq!(r.certificate.zero_multiplicity, 1);
    }

    #[test]
    fn missing_enemy_row_blocks_every_labeling() {
        // agent 2 (cluster 1) only has a friend; agent 4 (cluster 2) and
        // agent 6 (cluster 3) likewise, so no A_{i1,i2} 1 is strictly negative
        let doc = r#"{"n":6,"clusters":[[1,2],[3,4],[5,6]],"edges":[
            {"i":1,"j":2,"w":1},{"i":3,"j":4,"w":1},{"i":5,"j":6,"w":1},
            {"i":1,"j":3,"w":-1},{"i":1,"j":5,"w":-1},{"i":3,"j":5,"w":-1}]}"#;
        let net = load_network(doc).unwrap();
        let Outcome::Infeasible(why) = synthesize_sign(&net, &SignConfig::default()) else {
            panic!("expected infeasible");
        };
        assert!(why.attempts.iter().all(|a| a.reason.starts_with("enemy coverage fails")));
    }

    #[test]
    fn record_roundtrip() {
        let net = triangle();
        let r = synthesize_sign(&net, &SignConfig::default()).certified().unwrap();
        let json = serde_json::to_string(&r.gains.to_record()).unwrap();
        let back: SignRecord = serde_json::from_str(&json).unwrap();
        let g = gains_from_record(&net, &back).unwrap();
        assert_eq!(g.d, r.gains.d);
        assert_eq!(certify_sign(&net, &g, KERNEL_MATCH_TOL).status, KernelVerdict::Certified);
    }
}
