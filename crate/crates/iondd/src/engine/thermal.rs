use crate::error::{Error, Result};

pub const DEFAULT_TAIL_TOLERANCE: f64 = 1e-6;

/// One product-Fock component of a thermal mixture.
#[derive(Debug, Clone, PartialEq)]
pub struct FockBranch {
    pub weight: f64,
    pub fock: Vec<usize>,
}

/// Diagonal mode state Σ w |n⟩⟨n|, sorted by decreasing weight.
#[derive(Debug, Clone, PartialEq)]
pub struct ThermalMixture {
    pub branches: Vec<FockBranch>,
    pub nbar: Vec<f64>,
}

impl ThermalMixture {
    pub fn ground(n_modes: usize) -> Self {
        Self { branches: vec![FockBranch { weight: 1.0, fock: vec![0; n_modes] }], nbar: vec![0.0; n_modes] }
    }

    /// Keeps the `k` heaviest branches and renormalises.
    pub fn truncate(&self, k: usize) -> Self {
        let mut branches: Vec<FockBranch> = self.branches.iter().take(k.max(1)).cloned().collect();
        let total: f64 = branches.iter().map(|b| b.weight).sum();
        for b in &mut branches {
            b.weight /= total;
        }
        Self { branches, nbar: self.nbar.clone() }
    }

    /// Largest Fock label used by each mode.
    pub fn max_labels(&self) -> Vec<usize> {
        let k = self.nbar.len();
        (0..k).map(|m| self.branches.iter().map(|b| b.fock[m]).max().unwrap_or(0)).collect()
    }
}

/// p_n = n̄ⁿ/(1+n̄)^{n+1}.
pub fn thermal_population(nbar: f64, n: usize) -> f64 {
    if nbar == 0.0 {
        return if n == 0 { 1.0 } else { 0.0 };
    }
    let r = nbar / (1.0 + nbar);
    r.powi(n as i32) / (1.0 + nbar)
}

/// Thermal product state over modes, truncated at `cutoffs` with the kept
/// populations renormalised. Fails when any mode loses more than `tail_tol`.
pub fn thermal_state_with_tolerance(nbar: &[f64], cutoffs: &[usize], tail_tol: f64) -> Result<ThermalMixture> {
    if nbar.len() != cutoffs.len() {
        return Err(Error::invalid("occupation and cutoff lists differ in length"));
    }
    if nbar.iter().any(|&n| !(n >= 0.0)) {
        return Err(Error::invalid("mean occupations must be non-negative"));
    }
    let mut per_mode = Vec::with_capacity(nbar.len());
    for (&nb, &cut) in nbar.iter().zip(cutoffs) {
        let p: Vec<f64> = (0..=cut).map(|n| thermal_population(nb, n)).collect();
        let kept: f64 = p.iter().sum();
        let tail = 1.0 - kept;
        if tail > tail_tol {
            return Err(Error::ThermalTail { tail, tol: tail_tol, cutoff: cut });
        }
        per_mode.push(p.into_iter().map(|x| x / kept).collect::<Vec<_>>());
    }
    let count: usize = per_mode.iter().map(|p| p.len()).product();
    if count > 5_000_000 {
        return Err(Error::invalid(format!("{count} thermal branches is too many to enumerate")));
    }
    let mut branches = vec![FockBranch { weight: 1.0, fock: vec![] }];
    for p in &per_mode {
        let mut next = Vec::with_capacity(branches.len() * p.len());
        for b in &branches {
            for (n, &w) in p.iter().enumerate() {
                if w == 0.0 {
                    continue;
                }
                let mut fock = b.fock.clone();
                fock.push(n);
                next.push(FockBranch { weight: b.weight * w, fock });
            }
        }
        branches = next;
    }
    branches.sort_by(|a, b| b.weight.total_cmp(&a.weight).then_with(|| a.fock.cmp(&b.fock)));
    Ok(ThermalMixture { branches, nbar: nbar.to_vec() })
}

pub fn thermal_state(nbar: &[f64], cutoffs: &[usize]) -> Result<ThermalMixture> {
    thermal_state_with_tolerance(nbar, cutoffs, DEFAULT_TAIL_TOLERANCE)
}

/// Smallest cutoff whose thermal tail mass is at most `tail_tol`.
pub fn cutoff_for_tail(nbar: f64, tail_tol: f64) -> usize {
    if nbar == 0.0 {
        return 0;
    }
    // Tail above n_max is (n̄/(1+n̄))^{n_max+1}.
    let r = nbar / (1.0 + nbar);
    ((tail_tol.ln() / r.ln()).ceil() as usize).saturating_sub(1)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn populations() {
        assert_eq!(thermal_population(0.0, 0), 1.0);
        assert!((thermal_population(0.5, 0) - 2.0 / 3.0).abs() < 1e-15);
        assert!((thermal_population(0.5, 1) - 2.0 / 9.0).abs() < 1e-15);
        assert!((thermal_population(1.0, 3) - 1.0 / 16.0).abs() < 1e-15);
        assert_eq!(cutoff_for_tail(1.0, 1e-6), 19);
        assert!(thermal_state(&[1.0], &[18]).is_err());
        assert!(thermal_state(&[1.0], &[19]).is_ok());
    }

    #[test]
    fn ground_state_only() {
        let t = thermal_state(&[0.0, 0.0], &[3, 3]).unwrap();
        assert_eq!(t.branches.len(), 1);
        assert_eq!(t.branches[0].fock, vec![0, 0]);
    }
}
