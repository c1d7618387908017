//! Dense symmetric spectral tools, the diagonal-minus-nonnegative
//! positive-definiteness test, Schur complements and Metzler analysis.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use petgraph::algo::tarjan_scc;
use petgraph::graph::DiGraph;
use serde::Serialize;
use thiserror::Error;

/// Relative tolerance for accepting a matrix as symmetric.
pub const SYMMETRY_TOL: f64 = 1e-9;
/// Relative factor for declaring an eigenvalue numerically zero.
pub const ZERO_EIG_FACTOR: f64 = 1e-8;
/// Entries above this magnitude count as edges of a support pattern.
pub const PATTERN_TOL: f64 = 1e-12;
/// Most negative entry tolerated in a nonnegative inverse.
pub const NONNEG_SLACK: f64 = 1e-12;

#[derive(Debug, Error, PartialEq)]
pub enum MatalgError {
    #[error("matrix is not square ({0}x{1})")]
    NotSquare(usize, usize),
    #[error("matrix is not symmetric: max asymmetry {0:e}")]
    NotSymmetric(f64),
    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("matrix has a negative entry {value} at ({row},{col})")]
    NegativeEntry { row: usize, col: usize, value: f64 },
    #[error("matrix not positive definite")]
    NotPositiveDefinite,
    #[error("leading {0}x{0} block is not positive definite")]
    LeadingBlockNotPd(usize),
    #[error("inverse failed sanity check: {0}")]
    InverseCheck(String),
}

/// Eigen-decomposition of a symmetric matrix, eigenvalues ascending.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpectralSummary {
    #[serde(serialize_with = "ser_dvec")]
    pub eigenvalues: DVector<f64>,
    #[serde(skip)]
    pub eigenvectors: DMatrix<f64>,
    pub zero_tol: f64,
    pub zero_multiplicity: usize,
    #[serde(skip)]
    pub kernel_basis: Vec<DVector<f64>>,
    pub min_nonzero: Option<f64>,
}

fn ser_dvec<S: serde::Serializer>(v: &DVector<f64>, s: S) -> Result<S::Ok, S::Error> {
    v.as_slice().serialize(s)
}

impl SpectralSummary {
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max_eigenvalue(&self) -> f64 {
        self.eigenvalues.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Positive semidefinite up to the zero tolerance.
    pub fn is_psd(&self) -> bool {
        self.dim() == 0 || self.min_eigenvalue() >= -self.zero_tol
    }

    /// (positive, negative, zero) eigenvalue counts.
    pub fn inertia(&self) -> (usize, usize, usize) {
        inertia_with(&self.eigenvalues, self.zero_tol)
    }
}

pub fn inertia_with(eigenvalues: &DVector<f64>, tol: f64) -> (usize, usize, usize) {
    let pos = eigenvalues.iter().filter(|&&l| l > tol).count();
    let neg = eigenvalues.iter().filter(|&&l| l < -tol).count();
    (pos, neg, eigenvalues.len() - pos - neg)
}

fn require_square(m: &DMatrix<f64>) -> Result<usize, MatalgError> {
    if m.nrows() != m.ncols() {
        return Err(MatalgError::NotSquare(m.nrows(), m.ncols()));
    }
    Ok(m.nrows())
}

fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0_f64, |acc, x| acc.max(x.abs()))
}

fn check_symmetric(m: &DMatrix<f64>) -> Result<(), MatalgError> {
    let asym = max_abs(&(m - m.transpose()));
    if asym > SYMMETRY_TOL * max_abs(m).max(1.0) {
        return Err(MatalgError::NotSymmetric(asym));
    }
    Ok(())
}

pub fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

pub fn eig_sym(m: &DMatrix<f64>) -> Result<SpectralSummary, MatalgError> {
    let n = require_square(m)?;
    check_symmetric(m)?;
    if n == 0 {
        return Ok(SpectralSummary {
            eigenvalues: DVector::zeros(0),
            eigenvectors: DMatrix::zeros(0, 0),
            zero_tol: ZERO_EIG_FACTOR,
            zero_multiplicity: 0,
            kernel_basis: Vec::new(),
            min_nonzero: None,
        });
    }
    let eig = SymmetricEigen::new(symmetrize(m));
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let eigenvalues = DVector::from_iterator(n, order.iter().map(|&k| eig.eigenvalues[k]));
    let eigenvectors = DMatrix::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);

    let spectral_norm = eigenvalues.iter().fold(0.0_f64, |acc, l| acc.max(l.abs()));
    let zero_tol = ZERO_EIG_FACTOR * spectral_norm.max(1.0);
    let kernel_basis: Vec<DVector<f64>> = (0..n)
        .filter(|&k| eigenvalues[k].abs() < zero_tol)
        .map(|k| eigenvectors.column(k).into_owned())
        .collect();
    let min_nonzero = eigenvalues.iter().copied().find(|&l| l >= zero_tol);
    Ok(SpectralSummary {
        zero_multiplicity: kernel_basis.len(),
        eigenvalues,
        eigenvectors,
        zero_tol,
        kernel_basis,
        min_nonzero,
    })
}

fn check_diag_nonneg(d: &DVector<f64>, a: &DMatrix<f64>) -> Result<usize, MatalgError> {
    let n = require_square(a)?;
    if d.len() != n {
        return Err(MatalgError::DimensionMismatch(d.len(), n));
    }
    check_symmetric(a)?;
    for r in 0..n {
        for c in 0..n {
            if a[(r, c)] < 0.0 {
                return Err(MatalgError::NegativeEntry { row: r, col: c, value: a[(r, c)] });
            }
        }
    }
    Ok(n)
}

fn diag_minus(d: &DVector<f64>, a: &DMatrix<f64>) -> DMatrix<f64> {
    DMatrix::from_diagonal(d) - a
}

/// Decides whether `diag(d) - A` is positive definite for symmetric
/// nonnegative `A`, returning a strictly positive certificate `v` with
/// `(diag(d) - A) v >> 0` when it is.
///
/// `diag(d) - A` is a symmetric Z-matrix, so it is positive definite exactly
/// when it is invertible with a nonnegative inverse. The test solves
/// `(diag(d) - A) v = 1` and accepts iff `v >> 0`; that `v` is then the
/// certificate.
pub fn z_matrix_pd_test(d: &DVector<f64>, a: &DMatrix<f64>) -> Result<Option<DVector<f64>>, MatalgError> {
    let n = check_diag_nonneg(d, a)?;
    if n == 0 {
        return Ok(Some(DVector::zeros(0)));
    }
    let m = diag_minus(d, a);
    let ones = DVector::from_element(n, 1.0);
    let Some(v) = m.clone().lu().solve(&ones) else {
        return Ok(None);
    };
    if v.iter().all(|x| x.is_finite() && *x > 0.0) && (&m * &v).iter().all(|&x| x > 0.0) {
        Ok(Some(v))
    } else {
        Ok(None)
    }
}

/// `(diag(d) - A)^{-1}`, which is symmetric and entrywise nonnegative when
/// `diag(d) - A` is positive definite.
pub fn nonneg_inverse(d: &DVector<f64>, a: &DMatrix<f64>) -> Result<DMatrix<f64>, MatalgError> {
    if z_matrix_pd_test(d, a)?.is_none() {
        return Err(MatalgError::NotPositiveDefinite);
    }
    let m = diag_minus(d, a);
    let inv = m
        .cholesky()
        .ok_or(MatalgError::NotPositiveDefinite)?
        .inverse();
    check_symmetric(&inv).map_err(|e| MatalgError::InverseCheck(e.to_string()))?;
    let inv = symmetrize(&inv);
    let min = inv.iter().copied().fold(f64::INFINITY, f64::min);
    if min < -NONNEG_SLACK {
        return Err(MatalgError::InverseCheck(format!("negative entry {min:e}")));
    }
    Ok(inv)
}

/// `M22 - M21 M11^{-1} M12` for the leading `head x head` block `M11`.
pub fn schur_complement(m: &DMatrix<f64>, head: usize) -> Result<DMatrix<f64>, MatalgError> {
    let n = require_square(m)?;
    check_symmetric(m)?;
    if head > n {
        return Err(MatalgError::DimensionMismatch(head, n));
    }
    let m = symmetrize(m);
    let tail = n - head;
    let m22 = m.view((head, head), (tail, tail)).into_owned();
    if head == 0 {
        return Ok(m22);
    }
    let m11 = m.view((0, 0), (head, head)).into_owned();
    let m12 = m.view((0, head), (head, tail)).into_owned();
    let chol = m11.cholesky().ok_or(MatalgError::LeadingBlockNotPd(head))?;
    let x = chol.solve(&m12);
    Ok(symmetrize(&(m22 - m12.transpose() * x)))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetzlerSummary {
    pub is_metzler: bool,
    pub is_irreducible: bool,
    /// Largest real part over the spectrum; present for Metzler matrices.
    pub frobenius_eig: Option<f64>,
    /// Eigenvalues within [`FROBENIUS_CLUSTER_TOL`] of the Frobenius
    /// eigenvalue (0 when not Metzler).
    pub frobenius_multiplicity: usize,
}

pub const FROBENIUS_CLUSTER_TOL: f64 = 1e-8;

/// Strong connectivity of the off-diagonal support pattern.
pub fn is_irreducible(m: &DMatrix<f64>) -> bool {
    let n = m.nrows();
    if n <= 1 {
        return true;
    }
    let mut g = DiGraph::<(), ()>::with_capacity(n, n * n);
    let nodes: Vec<_> = (0..n).map(|_| g.add_node(())).collect();
    for r in 0..n {
        for c in 0..n {
            if r != c && m[(r, c)].abs() > PATTERN_TOL {
                g.add_edge(nodes[r], nodes[c], ());
            }
        }
    }
    tarjan_scc(&g).len() == 1
}

pub fn metzler_summary(m: &DMatrix<f64>) -> MetzlerSummary {
    let n = m.nrows();
    assert_eq!(n, m.ncols(), "metzler_summary needs a square matrix");
    let is_metzler = (0..n).all(|r| (0..n).all(|c| r == c || m[(r, c)] >= -PATTERN_TOL));
    let is_irreducible = is_irreducible(m);
    if !is_metzler || n == 0 {
        return MetzlerSummary { is_metzler, is_irreducible, frobenius_eig: None, frobenius_multiplicity: 0 };
    }
    let spectrum = m.clone().complex_eigenvalues();
    let lead = spectrum.iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max);
    let scale = lead.abs().max(1.0);
    let multiplicity = spectrum
        .iter()
        .filter(|z| (z.re - lead).abs() <= FROBENIUS_CLUSTER_TOL * scale && z.im.abs() <= FROBENIUS_CLUSTER_TOL * scale)
        .count();
    MetzlerSummary {
        is_metzler,
        is_irreducible,
        frobenius_eig: Some(lead),
        frobenius_multiplicity: multiplicity,
    }
}

/// Numerical rank: singular values above `rel_tol * max(1, sigma_max)`.
pub fn numerical_rank(m: &DMatrix<f64>, rel_tol: f64) -> usize {
    if m.is_empty() {
        return 0;
    }
    let sv = m.clone().svd(false, false).singular_values;
    let top = sv.iter().copied().fold(0.0_f64, f64::max);
    sv.iter().filter(|&&s| s > rel_tol * top.max(1.0)).count()
}

/// Orthonormal basis (as columns) of the numerical null space of `m`.
pub fn null_space(m: &DMatrix<f64>, rel_tol: f64) -> DMatrix<f64> {
    let cols = m.ncols();
    if cols == 0 {
        return DMatrix::zeros(0, 0);
    }
    // pad to at least square so the SVD returns a full right basis
    let rows = m.nrows().max(cols);
    let mut padded = DMatrix::zeros(rows, cols);
    padded.view_mut((0, 0), (m.nrows(), cols)).copy_from(m);
    let svd = padded.svd(false, true);
    let v_t = svd.v_t.expect("requested V^T");
    let top = svd.singular_values.iter().copied().fold(0.0_f64, f64::max);
    let keep: Vec<usize> = (0..cols)
        .filter(|&k| svd.singular_values[k] <= rel_tol * top.max(1.0))
        .collect();
    DMatrix::from_fn(cols, keep.len(), |r, c| v_t[(keep[c], r)])
}

/// Lawson-Hanson nonnegative least squares: `min ||E u - f||`, `u >= 0`.
pub fn nnls(e: &DMatrix<f64>, f: &DVector<f64>) -> DVector<f64> {
    let (m, n) = e.shape();
    assert_eq!(m, f.len());
    let tol = 1e-12 * e.iter().fold(1.0_f64, |a, x| a.max(x.abs())) * (m.max(n) as f64);
    let mut u = DVector::zeros(n);
    let mut passive = vec![false; n];
    let solve_passive = |passive: &[bool]| -> DVector<f64> {
        let idx: Vec<usize> = (0..n).filter(|&k| passive[k]).collect();
        let sub = DMatrix::from_fn(m, idx.len(), |r, c| e[(r, idx[c])]);
        let sol = sub
            .svd(true, true)
            .solve(f, 1e-14)
            .expect("svd solve with U and V");
        let mut z = DVector::zeros(n);
        for (k, &j) in idx.iter().enumerate() {
            z[j] = sol[k];
        }
        z
    };
    for _ in 0..(3 * n + 10) {
        let w = e.transpose() * (f - e * &u);
        let candidate = (0..n)
            .filter(|&k| !passive[k] && w[k] > tol)
            .max_by(|&a, &b| w[a].total_cmp(&w[b]));
        let Some(t) = candidate else { break };
        passive[t] = true;
        loop {
            let z = solve_passive(&passive);
            if (0..n).filter(|&k| passive[k]).all(|k| z[k] > 0.0) {
                u = z;
                break;
            }
            let mut alpha = f64::INFINITY;
            for k in (0..n).filter(|&k| passive[k] && z[k] <= 0.0) {
                alpha = alpha.min(u[k] / (u[k] - z[k]));
            }
            u += (z - &u) * alpha;
            for k in 0..n {
                if passive[k] && u[k] <= tol {
                    passive[k] = false;
                    u[k] = 0.0;
                }
            }
        }
    }
    u
}

/// Minimum-norm `y` with `G y >= h`, or `None` when the system is
/// infeasible (least-distance programming via NNLS).
pub fn least_distance(g: &DMatrix<f64>, h: &DVector<f64>) -> Option<DVector<f64>> {
    let (m, n) = g.shape();
    let mut e = DMatrix::zeros(n + 1, m);
    e.view_mut((0, 0), (n, m)).copy_from(&g.transpose());
    for k in 0..m {
        e[(n, k)] = h[k];
    }
    let mut f = DVector::zeros(n + 1);
    f[n] = 1.0;
    let u = nnls(&e, &f);
    let r = &e * &u - &f;
    if r.norm() < 1e-12 || r[n].abs() < 1e-14 {
        return None;
    }
    let y = DVector::from_iterator(n, (0..n).map(|k| -r[k] / r[n]));
    // guard against the NNLS terminating on a non-optimal active set
    if (g * &y - h).iter().all(|&s| s >= -1e-9 * h.amax().max(1.0)) {
        Some(y)
    } else {
        None
    }
}
