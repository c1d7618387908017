use nalgebra::{DMatrix, DVector};

use crate::matalg::{eig_sym, schur_complement, MatalgError, SpectralSummary};
use crate::network::SignedNetwork;

/// `M = diag(gains) - A` together with its spectrum.
#[derive(Debug, Clone, PartialEq)]
pub struct ClosedLoopMatrix {
    gains: DVector<f64>,
    matrix: DMatrix<f64>,
    spectrum: SpectralSummary,
}

impl ClosedLoopMatrix {
    pub fn new(net: &SignedNetwork, gains: DVector<f64>) -> Result<Self, MatalgError> {
        if gains.len() != net.size() {
            return Err(MatalgError::DimensionMismatch(gains.len(), net.size()));
        }
        let matrix = DMatrix::from_diagonal(&gains) - net.weights();
        let spectrum = eig_sym(&matrix)?;
        Ok(Self { gains, matrix, spectrum })
    }

    /// Wraps an arbitrary symmetric matrix; the diagonal is taken as gains.
    pub fn from_matrix(matrix: DMatrix<f64>) -> Result<Self, MatalgError> {
        let spectrum = eig_sym(&matrix)?;
        Ok(Self { gains: matrix.diagonal(), matrix, spectrum })
    }

    pub fn gains(&self) -> &DVector<f64> {
        &self.gains
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn spectrum(&self) -> &SpectralSummary {
        &self.spectrum
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn max_abs_entry(&self) -> f64 {
        self.matrix.amax()
    }

    /// `M` with rows and columns reordered so that `order[k]` becomes index `k`.
    pub fn permuted(&self, order: &[usize]) -> DMatrix<f64> {
        DMatrix::from_fn(order.len(), order.len(), |r, c| self.matrix[(order[r], order[c])])
    }

    /// Schur complement of the leading two cluster blocks of `M` after
    /// reordering agents by the clusters in `order`.
    pub fn trailing_schur(&self, net: &SignedNetwork, order: [usize; 3]) -> Result<DMatrix<f64>, MatalgError> {
        let sizes = net.cluster_sizes();
        let reordered = self.permuted(&net.agents_in(&order));
        schur_complement(&reordered, sizes[order[0]] + sizes[order[1]])
    }
}
