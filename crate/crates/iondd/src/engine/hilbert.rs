use crate::error::{Error, Result};

pub const DEFAULT_BUDGET: usize = 200_000;

/// Qubits ⊗ truncated Fock modes. Amplitudes are stored spin-major; the mode
/// index is row-major with mode 0 slowest.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HilbertSpec {
    pub n_qubits: usize,
    pub cutoffs: Vec<usize>,
}

impl HilbertSpec {
    pub fn new(n_qubits: usize, cutoffs: Vec<usize>) -> Result<Self> {
        Self::with_budget(n_qubits, cutoffs, DEFAULT_BUDGET)
    }

    pub fn with_budget(n_qubits: usize, cutoffs: Vec<usize>, budget: usize) -> Result<Self> {
        if n_qubits == 0 || n_qubits > 16 {
            return Err(Error::invalid(format!("unsupported qubit count {n_qubits}")));
        }
        if cutoffs.iter().any(|&c| c < 1) {
            return Err(Error::invalid("every mode cutoff must be at least 1"));
        }
        let spec = Self { n_qubits, cutoffs };
        let dim = spec
            .mode_dims()
            .iter()
            .try_fold(spec.spin_dim(), |acc, &d| acc.checked_mul(d))
            .unwrap_or(usize::MAX);
        if dim > budget {
            return Err(Error::BudgetExceeded { dim, budget });
        }
        Ok(spec)
    }

    pub fn n_modes(&self) -> usize {
        self.cutoffs.len()
    }

    pub fn spin_dim(&self) -> usize {
        1 << self.n_qubits
    }

    pub fn mode_dims(&self) -> Vec<usize> {
        self.cutoffs.iter().map(|c| c + 1).collect()
    }

    pub fn mode_dim(&self) -> usize {
        self.mode_dims().iter().product()
    }

    pub fn dim(&self) -> usize {
        self.spin_dim() * self.mode_dim()
    }

    /// Row-major stride of each mode inside the mode index.
    pub fn strides(&self) -> Vec<usize> {
        let dims = self.mode_dims();
        let mut strides = vec![1; dims.len()];
        for m in (0..dims.len().saturating_sub(1)).rev() {
            strides[m] = strides[m + 1] * dims[m + 1];
        }
        strides
    }

    pub fn fock_index(&self, labels: &[usize]) -> Result<usize> {
        if labels.len() != self.n_modes() || labels.iter().zip(&self.cutoffs).any(|(n, c)| n > c) {
            return Err(Error::invalid(format!("Fock labels {labels:?} outside cutoffs {:?}", self.cutoffs)));
        }
        Ok(labels.iter().zip(self.strides()).map(|(n, s)| n * s).sum())
    }

    pub fn fock_labels(&self, mut index: usize) -> Vec<usize> {
        let strides = self.strides();
        strides
            .iter()
            .map(|s| {
                let n = index / s;
                index %= s;
                n
            })
            .collect()
    }

    /// Occupation of mode `m` for every mode index.
    pub fn occupations(&self, m: usize) -> Vec<usize> {
        let s = self.strides()[m];
        let d = self.cutoffs[m] + 1;
        (0..self.mode_dim()).map(|k| (k / s) % d).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn indexing_round_trip() {
        let h = HilbertSpec::new(2, vec![3, 4]).unwrap();
        assert_eq!(h.dim(), 4 * 4 * 5);
        let k = h.fock_index(&[2, 3]).unwrap();
        assert_eq!(k, 2 * 5 + 3);
        assert_eq!(h.fock_labels(k), vec![2, 3]);
        assert!(HilbertSpec::new(2, vec![0]).is_err());
        assert!(matches!(
            HilbertSpec::with_budget(6, vec![12; 6], 1000),
            Err(Error::BudgetExceeded { .. })
        ));
    }
}
