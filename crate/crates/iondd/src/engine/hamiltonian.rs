use crate::engine::hilbert::HilbertSpec;
use crate::engine::sparse::CsrMatrix;
use crate::engine::{IonSystem, NoiseModel};
use crate::error::{Error, Result};
use crate::linalg::{c, cis, C64};
use crate::pulses::PulseSequence;
use crate::spin;

/// Time-independent pieces of H^I(t), cached for repeated application:
///
/// H^I(t) = Σ_m (e^{−iν_m t} A_m + h.c.) + (Ω+δΩ)/2 (S⁺e^{iφ} + S⁻e^{−iφ}) + (ε/2) Σ_j σ^z_j,
/// A_m = ν_m Σ_j η_jm (1 + σ^z_j) a_m.
#[derive(Debug, Clone)]
pub struct InteractionOperator {
    pub spec: HilbertSpec,
    freqs: Vec<f64>,
    lowering: Vec<CsrMatrix>,
    raising: Vec<CsrMatrix>,
    s_plus: CsrMatrix,
    s_minus: CsrMatrix,
    /// (ε/2) Σ_j σ^z_j on every basis state.
    detuning: Vec<f64>,
    d_omega: f64,
}

/// Drive amplitude (Ω+δΩ)/2 and phase φ.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Drive {
    pub amplitude: f64,
    pub phase: f64,
}

impl InteractionOperator {
    pub fn new(system: &IonSystem, spec: &HilbertSpec, noise: &NoiseModel) -> Result<Self> {
        let n = system.n_qubits();
        if spec.n_qubits != n || spec.n_modes() != system.n_modes() {
            return Err(Error::invalid("Hilbert space does not match the ion system"));
        }
        noise.validate(system.n_modes())?;
        let dim = spec.dim();
        let dm = spec.mode_dim();
        let strides = spec.strides();
        let mut lowering = Vec::with_capacity(spec.n_modes());
        for m in 0..spec.n_modes() {
            let nu = system.modes.freqs[m];
            let occ = spec.occupations(m);
            let mut trip = Vec::new();
            for s in 0..spec.spin_dim() {
                let coef = nu * system.displacement_coefficient(s, m);
                if coef == 0.0 {
                    continue;
                }
                for k in 0..dm {
                    if occ[k] > 0 {
                        // a|n⟩ = √n |n−1⟩.
                        trip.push((s * dm + k - strides[m], s * dm + k, c(coef * (occ[k] as f64).sqrt(), 0.0)));
                    }
                }
            }
            lowering.push(CsrMatrix::from_triplets(dim, dim, trip));
        }
        let raising = lowering.iter().map(CsrMatrix::adjoint).collect();
        let mut trip = Vec::new();
        for s in 0..spec.spin_dim() {
            for j in 0..n {
                let bit = 1 << (n - 1 - j);
                if s & bit != 0 {
                    // σ⁺_j: |g⟩ → |e⟩ clears the bit.
                    for k in 0..dm {
                        trip.push(((s & !bit) * dm + k, s * dm + k, c(1.0, 0.0)));
                    }
                }
            }
        }
        let s_plus = CsrMatrix::from_triplets(dim, dim, trip);
        let s_minus = s_plus.adjoint();
        let detuning = (0..dim).map(|i| 0.5 * noise.eps * spin::total_z(i / dm, n)).collect();
        Ok(Self { spec: spec.clone(), freqs: system.modes.freqs.clone(), lowering, raising, s_plus, s_minus, detuning, d_omega: noise.d_omega })
    }

    pub fn max_frequency(&self) -> f64 {
        self.freqs.iter().copied().fold(0.0, f64::max)
    }

    pub fn dim(&self) -> usize {
        self.spec.dim()
    }

    /// Drive active at `t`, if a pulse is on.
    pub fn drive_at(&self, seq: Option<&PulseSequence>, t: f64) -> Option<Drive> {
        let seq = seq?;
        let p = seq.pulses[seq.active(t)?];
        Some(Drive { amplitude: 0.5 * (p.rabi + self.d_omega), phase: p.phase })
    }

    /// y += a · H^I(t) x.
    pub fn apply(&self, t: f64, drive: Option<Drive>, a: C64, x: &[C64], y: &mut [C64]) {
        for (m, &nu) in self.freqs.iter().enumerate() {
            let ph = cis(-nu * t);
            self.lowering[m].mul_add(a * ph, x, y);
            self.raising[m].mul_add(a * ph.conj(), x, y);
        }
        if let Some(d) = drive {
            let ph = cis(d.phase) * d.amplitude;
            self.s_plus.mul_add(a * ph, x, y);
            self.s_minus.mul_add(a * ph.conj(), x, y);
        }
        for ((yi, xi), &e) in y.iter_mut().zip(x).zip(&self.detuning) {
            if e != 0.0 {
                *yi += a * xi * e;
            }
        }
    }

    /// Assembled H^I(t).
    pub fn assemble(&self, t: f64, drive: Option<Drive>) -> CsrMatrix {
        let dim = self.dim();
        let mut trip: Vec<(usize, usize, C64)> = Vec::new();
        for (m, &nu) in self.freqs.iter().enumerate() {
            let ph = cis(-nu * t);
            trip.extend(self.lowering[m].triplets().map(|(r, c, v)| (r, c, v * ph)));
            trip.extend(self.raising[m].triplets().map(|(r, c, v)| (r, c, v * ph.conj())));
        }
        if let Some(d) = drive {
            let ph = cis(d.phase) * d.amplitude;
            trip.extend(self.s_plus.triplets().map(|(r, c, v)| (r, c, v * ph)));
            trip.extend(self.s_minus.triplets().map(|(r, c, v)| (r, c, v * ph.conj())));
        }
        trip.extend(self.detuning.iter().enumerate().filter(|(_, &e)| e != 0.0).map(|(i, &e)| (i, i, c(e, 0.0))));
        CsrMatrix::from_triplets(dim, dim, trip)
    }
}

/// H^I(t) of the driven chain as a sparse matrix. The drive term appears only
/// while a pulse of `seq` is on.
pub fn build_interaction_hamiltonian(
    system: &IonSystem,
    seq: Option<&PulseSequence>,
    noise: &NoiseModel,
    spec: &HilbertSpec,
    t: f64,
) -> Result<CsrMatrix> {
    if !(t >= 0.0) {
        return Err(Error::invalid(format!("time {t} must be non-negative")));
    }
    let op = InteractionOperator::new(system, spec, noise)?;
    Ok(op.assemble(t, op.drive_at(seq, t)))
}
