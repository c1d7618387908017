//! Closed-loop dynamics `x' = -M x`: fixed-step integration, analytic
//! limits and consensus classification.

use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::Serialize;
use thiserror::Error;

use crate::closed_loop::ClosedLoopMatrix;
use crate::network::SignedNetwork;

/// Explicit RK4 is used only while `dt * lambda_max < MAX_STEP_PRODUCT`.
pub const MAX_STEP_PRODUCT: f64 = 2.5;
pub const DEFAULT_DT: f64 = 1e-3;
pub const DEFAULT_HORIZON: f64 = 10.0;
pub const DEFAULT_CLASSIFY_TOL: f64 = 1e-6;
/// Variance of the seeded Gaussian initial conditions.
pub const INITIAL_VARIANCE: f64 = 4.0;

#[derive(Debug, Error, PartialEq)]
pub enum SimulateError {
    #[error("step too large: dt = {dt} but stability needs dt < {bound:e}")]
    StepTooLarge { dt: f64, bound: f64 },
    #[error("invalid step or horizon: dt = {dt}, T = {horizon}")]
    BadHorizon { dt: f64, horizon: f64 },
    #[error("initial state has length {0}, expected {1}")]
    DimensionMismatch(usize, usize),
    #[error("M not positive semidefinite (min eigenvalue {0:e})")]
    NotPsd(f64),
    #[error("kernel dimension {0} > 1, classification undefined")]
    KernelDimension(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    /// One state per sample; the first is `x0`.
    pub states: Vec<DVector<f64>>,
    pub dt: f64,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn final_state(&self) -> &DVector<f64> {
        self.states.last().expect("trajectory holds at least x0")
    }

    /// State at the first sample with `t >= time`, or the last one.
    pub fn state_at(&self, time: f64) -> &DVector<f64> {
        let k = self.times.iter().position(|&t| t >= time - 0.5 * self.dt).unwrap_or(self.len() - 1);
        &self.states[k]
    }

    /// First sample time with `||x(t) - target|| <= rel_eps * ||x0 - target||`.
    pub fn first_time_within(&self, target: &DVector<f64>, rel_eps: f64) -> Option<f64> {
        let e0 = (&self.states[0] - target).norm();
        self.states
            .iter()
            .zip(&self.times)
            .find(|(x, _)| (*x - target).norm() <= rel_eps * e0)
            .map(|(_, &t)| t)
    }

    /// CSV with header `t,x1,...,xN`, every `stride`-th sample plus the last.
    pub fn to_csv(&self, stride: usize) -> String {
        let stride = stride.max(1);
        let n = self.states.first().map_or(0, |x| x.len());
        let mut out = String::from("t");
        for i in 1..=n {
            write!(out, ",x{i}").unwrap();
        }
        out.push('\n');
        let last = self.len() - 1;
        for k in (0..self.len()).filter(|&k| k % stride == 0 || k == last) {
            write!(out, "{:.11e}", self.times[k]).unwrap();
            for v in self.states[k].iter() {
                write!(out, ",{v:.11e}").unwrap();
            }
            out.push('\n');
        }
        out
    }
}

/// One RK4 step of a linear system collapses to multiplication by the
/// degree-4 Taylor polynomial of `exp(-dt M)`.
fn rk4_propagator(m: &DMatrix<f64>, dt: f64) -> DMatrix<f64> {
    let n = m.nrows();
    let h = m * (-dt);
    let mut term = DMatrix::identity(n, n);
    let mut p = term.clone();
    for k in 1..=4 {
        term = &term * &h / k as f64;
        p += &term;
    }
    p
}

/// Row-major copy of a propagator, applied with plain loops.
struct Stepper {
    n: usize,
    rows: Vec<f64>,
}

impl Stepper {
    fn new(m: &DMatrix<f64>, dt: f64) -> Self {
        let p = rk4_propagator(m, dt);
        Self { n: p.nrows(), rows: p.transpose().as_slice().to_vec() }
    }

    fn apply(&self, x: &[f64], out: &mut [f64]) {
        for (o, row) in out.iter_mut().zip(self.rows.chunks_exact(self.n)) {
            *o = row.iter().zip(x).map(|(a, b)| a * b).sum();
        }
    }
}

fn check_step(m: &ClosedLoopMatrix, dt: f64, horizon: f64) -> Result<(), SimulateError> {
    let valid = dt > 0.0 && horizon >= dt && dt.is_finite() && horizon.is_finite();
    if !valid {
        return Err(SimulateError::BadHorizon { dt, horizon });
    }
    let s = m.spectrum();
    let rho = s.max_eigenvalue().abs().max(s.min_eigenvalue().abs());
    if dt * rho >= MAX_STEP_PRODUCT {
        return Err(SimulateError::StepTooLarge { dt, bound: MAX_STEP_PRODUCT / rho });
    }
    Ok(())
}

fn step_count(dt: f64, horizon: f64) -> usize {
    (horizon / dt - 1e-9).ceil() as usize
}

/// Classical RK4 on `x' = -M x`, sampled at every step up to `horizon`.
pub fn integrate(m: &ClosedLoopMatrix, x0: &DVector<f64>, dt: f64, horizon: f64) -> Result<Trajectory, SimulateError> {
    if x0.len() != m.dim() {
        return Err(SimulateError::DimensionMismatch(x0.len(), m.dim()));
    }
    check_step(m, dt, horizon)?;
    let stepper = Stepper::new(m.matrix(), dt);
    let steps = step_count(dt, horizon);
    let mut times = Vec::with_capacity(steps + 1);
    let mut states = Vec::with_capacity(steps + 1);
    times.push(0.0);
    states.push(x0.clone());
    for k in 1..=steps {
        let mut next = DVector::zeros(x0.len());
        stepper.apply(states[k - 1].as_slice(), next.as_mut_slice());
        states.push(next);
        times.push(k as f64 * dt);
    }
    Ok(Trajectory { times, states, dt })
}

/// `u(t) = -M x(t)`.
pub fn control_input(m: &ClosedLoopMatrix, x: &DVector<f64>) -> DVector<f64> {
    -(m.matrix() * x)
}

/// Orthogonal projection of `x0` onto the numerical kernel of `M`.
pub fn analytic_limit(m: &ClosedLoopMatrix, x0: &DVector<f64>) -> Result<DVector<f64>, SimulateError> {
    if x0.len() != m.dim() {
        return Err(SimulateError::DimensionMismatch(x0.len(), m.dim()));
    }
    let s = m.spectrum();
    if !s.is_psd() {
        return Err(SimulateError::NotPsd(s.min_eigenvalue()));
    }
    let mut limit = DVector::zeros(x0.len());
    for b in &s.kernel_basis {
        limit += b * (b.dot(x0) / b.norm_squared());
    }
    Ok(limit)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ConsensusKind {
    Tripartite,
    Sign,
    None,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConsensusVerdict {
    pub kind: ConsensusKind,
    pub limit: Vec<f64>,
    /// Mean limit of each cluster.
    pub cluster_values: [f64; 3],
    /// -1, 0 or 1 per cluster when the cluster's limit has uniform sign.
    pub cluster_signs: [Option<i8>; 3],
    /// 1-based cluster converging to zero (sign consensus only).
    pub zero_cluster: Option<usize>,
    /// Cluster values divided by the first nonzero one (tripartite only).
    pub ratios: Option<[f64; 3]>,
    pub degenerate: bool,
}

impl ConsensusVerdict {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("verdict serializes")
    }
}

/// Classifies the limit reached from `x0`.
///
/// With `thr = tol * (1 + ||limit||_inf)`: tripartite when every cluster
/// spread is below `thr` and some cluster value exceeds it; sign when
/// exactly one cluster stays below `thr` and the other two have uniform
/// opposite signs with magnitudes above it. `||limit||_inf < tol` marks the
/// draw degenerate.
pub fn classify(
    m: &ClosedLoopMatrix,
    net: &SignedNetwork,
    x0: &DVector<f64>,
    tol: f64,
) -> Result<ConsensusVerdict, SimulateError> {
    let kdim = m.spectrum().zero_multiplicity;
    if kdim > 1 {
        return Err(SimulateError::KernelDimension(kdim));
    }
    let limit = analytic_limit(m, x0)?;
    let scale = limit.amax();
    let thr = tol * (1.0 + scale);
    let parts: Vec<DVector<f64>> = (0..3).map(|p| net.gather(&limit, p)).collect();
    let cluster_values: [f64; 3] = std::array::from_fn(|p| parts[p].mean());
    let cluster_signs: [Option<i8>; 3] = std::array::from_fn(|p| {
        let c = &parts[p];
        if c.amax() < thr {
            Some(0)
        } else if c.iter().all(|&x| x > thr) {
            Some(1)
        } else if c.iter().all(|&x| x < -thr) {
            Some(-1)
        } else {
            None
        }
    });
    let mut verdict = ConsensusVerdict {
        kind: ConsensusKind::None,
        limit: limit.as_slice().to_vec(),
        cluster_values,
        cluster_signs,
        zero_cluster: None,
        ratios: None,
        degenerate: scale < tol,
    };
    if verdict.degenerate {
        return Ok(verdict);
    }
    let flat = parts.iter().all(|c| c.max() - c.min() < thr);
    if flat {
        if let Some(base) = cluster_values.iter().copied().find(|c| c.abs() > thr) {
            verdict.kind = ConsensusKind::Tripartite;
            verdict.ratios = Some(cluster_values.map(|c| c / base));
            return Ok(verdict);
        }
    }
    let zeros: Vec<usize> = (0..3).filter(|&p| cluster_signs[p] == Some(0)).collect();
    if let [z] = zeros[..] {
        let others: Vec<Option<i8>> = (0..3).filter(|&p| p != z).map(|p| cluster_signs[p]).collect();
        if matches!(others[..], [Some(a), Some(b)] if a != 0 && a == -b) {
            verdict.kind = ConsensusKind::Sign;
            verdict.zero_cluster = Some(z + 1);
        }
    }
    Ok(verdict)
}

/// Smallest sampled `t <= horizon` with
/// `||x(t) - x_inf|| <= rel_eps * ||x0 - x_inf||`; `Some(0)` when `x0`
/// already is its limit, `None` when the horizon is too short.
pub fn convergence_time(
    m: &ClosedLoopMatrix,
    x0: &DVector<f64>,
    rel_eps: f64,
    dt: f64,
    horizon: f64,
) -> Result<Option<f64>, SimulateError> {
    let target = analytic_limit(m, x0)?;
    let e0 = (x0 - &target).norm();
    if e0 == 0.0 {
        return Ok(Some(0.0));
    }
    check_step(m, dt, horizon)?;
    let stepper = Stepper::new(m.matrix(), dt);
    let (mut x, mut next) = (x0.clone(), x0.clone());
    for k in 1..=step_count(dt, horizon) {
        stepper.apply(x.as_slice(), next.as_mut_slice());
        std::mem::swap(&mut x, &mut next);
        if (&x - &target).norm() <= rel_eps * e0 {
            return Ok(Some(k as f64 * dt));
        }
    }
    Ok(None)
}

/// Deterministic draw from `N(0, INITIAL_VARIANCE)^n`.
pub fn random_initial_state(n: usize, seed: u64) -> DVector<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, INITIAL_VARIANCE.sqrt()).expect("positive std");
    DVector::from_iterator(n, (0..n).map(|_| normal.sample(&mut rng)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::load_network;
    use approx::assert_relative_eq;
    use nalgebra::{dmatrix, dvector};

    fn scalar(v: f64) -> ClosedLoopMatrix {
        ClosedLoopMatrix::from_matrix(dmatrix![v]).unwrap()
    }

    fn triangle() -> SignedNetwork {
        load_network(
            r#"{"n":3,"clusters":[[1],[2],[3]],"edges":[
            {"i":1,"j":2,"w":-1},{"i":1,"j":3,"w":-1},{"i":2,"j":3,"w":-1}]}"#,
        )
        .unwrap()
    }

    #[test]
    fn zero_matrix_freezes_state() {
        let m = ClosedLoopMatrix::from_matrix(DMatrix::zeros(3, 3)).unwrap();
        let x0 = dvector![1.0, -2.0, 3.0];
        let traj = integrate(&m, &x0, 0.1, 1.0).unwrap();
        assert!(traj.states.iter().all(|x| x == &x0));
        assert_eq!(traj.len(), 11);
    }

    #[test]
    fn scalar_decay_matches_exponential() {
        let traj = integrate(&scalar(1.0), &dvector![1.0], DEFAULT_DT, 1.0).unwrap();
        assert_relative_eq!(*traj.times.last().unwrap(), 1.0, epsilon = 1e-12);
        assert!((traj.final_state()[0] - (-1.0f64).exp()).abs() < 1e-8);
    }

    #[test]
    fn decay_time_is_log_hundred() {
        let t = convergence_time(&scalar(1.0), &dvector![1.0], 0.01, DEFAULT_DT, 10.0).unwrap().unwrap();
        assert!((t - 100f64.ln()).abs() <= DEFAULT_DT);
        let m = ClosedLoopMatrix::from_matrix(dmatrix![0.0]).unwrap();
        assert_eq!(convergence_time(&m, &dvector![2.0], 0.01, DEFAULT_DT, 1.0).unwrap(), Some(0.0));
    }

    #[test]
    fn rejects_unstable_step() {
        let err = integrate(&scalar(100.0), &dvector![1.0], 0.03, 1.0).unwrap_err();
        assert!(matches!(err, SimulateError::StepTooLarge { .. }));
        assert!(err.to_string().contains("2.5e-2"));
    }

    #[test]
    fn limit_projects_onto_kernel() {
        let m = ClosedLoopMatrix::from_matrix(dmatrix![1.0, -1.0; -1.0, 1.0]).unwrap();
        let w = dvector![1.0, 1.0];
        assert_relative_eq!(analytic_limit(&m, &w).unwrap(), w, epsilon = 1e-12);
        assert!(analytic_limit(&m, &dvector![1.0, -1.0]).unwrap().amax() < 1e-12);
        let neg = ClosedLoopMatrix::from_matrix(dmatrix![-1.0]).unwrap();
        assert!(matches!(analytic_limit(&neg, &dvector![1.0]), Err(SimulateError::NotPsd(_))));
    }

    #[test]
    fn triangle_tripartite_limits() {
        // M = J + diag(d - 1); kernel (3, -1, -1) for d = (2/3, 2, 2)
        let net = triangle();
        let m = ClosedLoopMatrix::new(&net, dvector![2.0 / 3.0, 2.0, 2.0]).unwrap();
        let w = dvector![3.0, -1.0, -1.0];
        assert!((m.matrix() * &w).amax() < 1e-12);
        let v = classify(&m, &net, &dvector![0.3, 0.1, -0.7], DEFAULT_CLASSIFY_TOL).unwrap();
        assert_eq!(v.kind, ConsensusKind::Tripartite);
        let r = v.ratios.unwrap();
        assert_relative_eq!(r[1], -1.0 / 3.0, epsilon = 1e-9);
        assert_relative_eq!(r[2], -1.0 / 3.0, epsilon = 1e-9);
        let flat = classify(&m, &net, &dvector![1.0, 1.0, 2.0], DEFAULT_CLASSIFY_TOL).unwrap();
        assert!(flat.degenerate);
        assert_eq!(flat.kind, ConsensusKind::None);
    }

    #[test]
    fn singleton_clusters_prefer_tripartite() {
        // kernel (1, -1, 0); singleton clusters are always flat
        let net = triangle();
        let m = ClosedLoopMatrix::new(&net, dvector![1.0, 1.0, 2.0]).unwrap();
        let v = classify(&m, &net, &dvector![2.0, 0.5, 0.1], DEFAULT_CLASSIFY_TOL).unwrap();
        assert_eq!(v.kind, ConsensusKind::Tripartite);
        assert_eq!(v.cluster_signs, [Some(1), Some(-1), Some(0)]);
    }

    #[test]
    fn sign_limits_on_spread_clusters() {
        let net = load_network(include_str!("../data/example2.json")).unwrap();
        let r = crate::signcons::synthesize_sign(&net, &Default::default()).certified().unwrap();
        let v = classify(&r.gains.m, &net, &random_initial_state(net.size(), 3), DEFAULT_CLASSIFY_TOL).unwrap();
        assert_eq!(v.kind, ConsensusKind::Sign);
        assert_eq!(v.zero_cluster, Some(r.gains.zero_cluster() + 1));
    }

    #[test]
    fn csv_layout() {
        let traj = integrate(&scalar(1.0), &dvector![1.0], 0.25, 1.0).unwrap();
        let csv = traj.to_csv(3);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "t,x1");
        assert_eq!(lines[1], "0.00000000000e0,1.00000000000e0");
        // samples 0, 3 and the last (4)
        assert_eq!(lines.len(), 4);
    }

    #[test]
    fn seeded_draws_repeat() {
        assert_eq!(random_initial_state(5, 7), random_initial_state(5, 7));
        assert_ne!(random_initial_state(5, 7), random_initial_state(5, 8));
    }
}
