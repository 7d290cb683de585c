//! Exact segment-by-segment propagation in the frame where the modes keep
//! their free evolution Σ ν_m a_m†a_m.
//!
//! Between pulses the Hamiltonian is block diagonal in the spin basis and
//! factorises over modes, h_{s,m} = ν_m (a†a + c_{s,m}(a + a†)), so each
//! block is advanced with small per-mode exponentials. During a pulse of
//! phase φ the Hamiltonian is R H₀ R† with R = exp(iφ Σσ^z/2) and H₀ real
//! symmetric; one eigendecomposition serves every pulse of equal amplitude.
//! Above `dense_limit` pulses fall back to adaptive Runge–Kutta.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::engine::hamiltonian::InteractionOperator;
use crate::engine::hilbert::HilbertSpec;
use crate::engine::ode::OdeStats;
use crate::engine::schrodinger::{integrate_interaction, segments};
use crate::engine::state::reduce_pure;
use crate::engine::thermal::ThermalMixture;
use crate::engine::{IonSystem, NoiseModel};
use crate::error::{Error, Result};
use crate::linalg::{c, cis, CMatrix, CVector, C64};
use crate::par;
use crate::pulses::PulseSequence;
use crate::spin;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PropagatorOptions {
    /// Largest dimension for which pulses use a dense eigendecomposition.
    pub dense_limit: usize,
    /// Runge–Kutta tolerance for the fallback path.
    pub tol: f64,
}

impl Default for PropagatorOptions {
    fn default() -> Self {
        Self { dense_limit: 4000, tol: 1e-10 }
    }
}

/// Eigensystem of the φ = 0 pulse Hamiltonian for one drive amplitude.
#[derive(Debug, Clone)]
struct PulseEigen {
    amplitude: f64,
    w: Vec<f64>,
    v: DMatrix<f64>,
    vt: DMatrix<f64>,
}

#[derive(Debug)]
pub struct SequencePropagator<'a> {
    seq: Option<&'a PulseSequence>,
    spec: HilbertSpec,
    noise: NoiseModel,
    opts: PropagatorOptions,
    /// (w, V) of h_{s,m}, indexed [s][m].
    mode_eigen: Vec<Vec<(Vec<f64>, DMatrix<f64>)>>,
    /// Σ_m ν_m n_m for every mode index.
    mode_energy: Vec<f64>,
    pulses: Vec<PulseEigen>,
    fallback: Option<InteractionOperator>,
}

pub(crate) fn mode_hamiltonian(nu: f64, coef: f64, n_max: usize) -> DMatrix<f64> {
    let d = n_max + 1;
    let mut h = DMatrix::zeros(d, d);
    for n in 0..d {
        h[(n, n)] = nu * n as f64;
        if n > 0 {
            let x = nu * coef * (n as f64).sqrt();
            h[(n - 1, n)] = x;
            h[(n, n - 1)] = x;
        }
    }
    h
}

pub(crate) fn eigen(h: DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let e = SymmetricEigen::new(h);
    (e.eigenvalues.iter().copied().collect(), e.eigenvectors)
}

/// V diag(e^{−iwΔ}) Vᵀ.
pub(crate) fn exp_from_eigen(w: &[f64], v: &DMatrix<f64>, dt: f64) -> CMatrix {
    let d = w.len();
    let ph: Vec<C64> = w.iter().map(|&x| cis(-x * dt)).collect();
    CMatrix::from_fn(d, d, |r, col| (0..d).map(|k| ph[k] * (v[(r, k)] * v[(col, k)])).sum())
}

/// Applies `u` along one mode axis of a row-major mode block.
fn apply_mode(block: &mut [C64], u: &CMatrix, stride: usize, buf: &mut Vec<C64>) {
    let d = u.nrows();
    let outer = block.len() / (d * stride);
    buf.resize(d, c(0.0, 0.0));
    for o in 0..outer {
        for inner in 0..stride {
            let base = o * d * stride + inner;
            for k in 0..d {
                buf[k] = block[base + k * stride];
            }
            for r in 0..d {
                let mut acc = c(0.0, 0.0);
                for k in 0..d {
                    acc += u[(r, k)] * buf[k];
                }
                block[base + r * stride] = acc;
            }
        }
    }
}

/// Σ_m ν_m n_m for every mode index.
pub(crate) fn mode_energies(system: &IonSystem, spec: &HilbertSpec) -> Vec<f64> {
    let mut out = vec![0.0; spec.mode_dim()];
    for m in 0..spec.n_modes() {
        for (e, n) in out.iter_mut().zip(spec.occupations(m)) {
            *e += system.modes.freqs[m] * n as f64;
        }
    }
    out
}

/// Lab-mode-frame Hamiltonian with the drive at φ = 0 and amplitude `amp`:
/// Σ ν a†a + Σ ν c_{s,m}(a + a†) + (ε/2)Σσ^z + amp Σσ^x. Real symmetric.
pub(crate) fn lab_hamiltonian(system: &IonSystem, spec: &HilbertSpec, eps: f64, amp: f64) -> DMatrix<f64> {
    let n = spec.n_qubits;
    let dm = spec.mode_dim();
    let strides = spec.strides();
    let dim = spec.dim();
    let energy = mode_energies(system, spec);
    let mut h = DMatrix::zeros(dim, dim);
    for s in 0..spec.spin_dim() {
        let e_s = 0.5 * eps * spin::total_z(s, n);
        for k in 0..dm {
            h[(s * dm + k, s * dm + k)] = energy[k] + e_s;
        }
        for m in 0..spec.n_modes() {
            let x = system.modes.freqs[m] * system.displacement_coefficient(s, m);
            for (k, occ) in spec.occupations(m).into_iter().enumerate() {
                if occ > 0 {
                    let v = x * (occ as f64).sqrt();
                    let (i, j) = (s * dm + k - strides[m], s * dm + k);
                    h[(i, j)] = v;
                    h[(j, i)] = v;
                }
            }
        }
        for j in 0..n {
            let flipped = s ^ (1 << (n - 1 - j));
            for k in 0..dm {
                h[(flipped * dm + k, s * dm + k)] = amp;
            }
        }
    }
    h
}

impl<'a> SequencePropagator<'a> {
    pub fn new(
        system: &'a IonSystem,
        seq: Option<&'a PulseSequence>,
        spec: HilbertSpec,
        noise: &NoiseModel,
        opts: PropagatorOptions,
    ) -> Result<Self> {
        if let Some(seq) = seq {
            seq.validate()?;
        }
        let rabis: Vec<f64> = seq.map(|s| s.pulses.iter().map(|p| p.rabi).collect()).unwrap_or_default();
        let mut prop = Self::prepare(system, spec, noise, opts, &rabis)?;
        prop.seq = seq;
        Ok(prop)
    }

    /// A propagator with pulse eigensystems for the given nominal Rabi
    /// frequencies but no sequence attached; see [`Self::run_sequence`].
    pub fn prepare(system: &IonSystem, spec: HilbertSpec, noise: &NoiseModel, opts: PropagatorOptions, rabis: &[f64]) -> Result<Self> {
        if spec.n_qubits != system.n_qubits() || spec.n_modes() != system.n_modes() {
            return Err(Error::invalid("Hilbert space does not match the ion system"));
        }
        noise.validate(system.n_modes())?;
        let mode_eigen = (0..spec.spin_dim())
            .map(|s| {
                (0..spec.n_modes())
                    .map(|m| {
                        let nu = system.modes.freqs[m];
                        eigen(mode_hamiltonian(nu, system.displacement_coefficient(s, m), spec.cutoffs[m]))
                    })
                    .collect()
            })
            .collect();
        let mode_energy = mode_energies(system, &spec);
        let mut prop = Self {
            seq: None,
            spec,
            noise: noise.clone(),
            opts,
            mode_eigen,
            mode_energy,
            pulses: Vec::new(),
            fallback: None,
        };
        if prop.spec.dim() <= opts.dense_limit {
            for &rabi in rabis {
                let amp = 0.5 * (rabi + noise.d_omega);
                if !prop.pulses.iter().any(|e| e.amplitude == amp) {
                    let (w, v) = eigen(lab_hamiltonian(system, &prop.spec, noise.eps, amp));
                    let vt = v.transpose();
                    prop.pulses.push(PulseEigen { amplitude: amp, w, v, vt });
                }
            }
        } else if !rabis.is_empty() {
            prop.fallback = Some(InteractionOperator::new(system, &prop.spec, noise)?);
        }
        Ok(prop)
    }

    pub fn spec(&self) -> &HilbertSpec {
        &self.spec
    }

    fn spin_energy(&self, s: usize) -> f64 {
        0.5 * self.noise.eps * spin::total_z(s, self.spec.n_qubits)
    }

    /// Free evolution for `dt` of one state in the lab-mode frame.
    fn gap(&self, psi: &mut [C64], dt: f64, units: &[Vec<CMatrix>]) {
        let dm = self.spec.mode_dim();
        let strides = self.spec.strides();
        let mut buf = Vec::new();
        for s in 0..self.spec.spin_dim() {
            let block = &mut psi[s * dm..(s + 1) * dm];
            for (m, u) in units[s].iter().enumerate() {
                apply_mode(block, u, strides[m], &mut buf);
            }
            let ph = cis(-self.spin_energy(s) * dt);
            block.iter_mut().for_each(|z| *z *= ph);
        }
    }

    fn gap_unitaries(&self, dt: f64) -> Vec<Vec<CMatrix>> {
        self.mode_eigen.iter().map(|per_mode| per_mode.iter().map(|(w, v)| exp_from_eigen(w, v, dt)).collect()).collect()
    }

    /// R diag entries e^{iφ Σσ^z/2} per basis state.
    fn rotation(&self, phase: f64) -> Vec<C64> {
        let dm = self.spec.mode_dim();
        let n = self.spec.n_qubits;
        (0..self.spec.spin_dim())
            .flat_map(|s| std::iter::repeat(cis(0.5 * phase * spin::total_z(s, n))).take(dm))
            .collect()
    }

    /// Dense pulse on a batch of columns.
    fn dense_pulse(&self, batch: &mut CMatrix, eig: &PulseEigen, phase: f64, dt: f64) {
        let r = self.rotation(phase);
        let (dim, b) = batch.shape();
        let mut xr = DMatrix::<f64>::zeros(dim, b);
        let mut xi = DMatrix::<f64>::zeros(dim, b);
        for col in 0..b {
            for i in 0..dim {
                let z = batch[(i, col)] * r[i].conj();
                xr[(i, col)] = z.re;
                xi[(i, col)] = z.im;
            }
        }
        let mut yr = &eig.vt * &xr;
        let mut yi = &eig.vt * &xi;
        for i in 0..dim {
            let ph = cis(-eig.w[i] * dt);
            for col in 0..b {
                let z = c(yr[(i, col)], yi[(i, col)]) * ph;
                yr[(i, col)] = z.re;
                yi[(i, col)] = z.im;
            }
        }
        let wr = &eig.v * &yr;
        let wi = &eig.v * &yi;
        for col in 0..b {
            for i in 0..dim {
                batch[(i, col)] = c(wr[(i, col)], wi[(i, col)]) * r[i];
            }
        }
    }

    /// Converts between lab-mode and interaction frames at time `t`:
    /// ψ_I = e^{iH₀t} ψ_L for `sign = +1`.
    fn frame(&self, psi: &mut [C64], t: f64, sign: f64) {
        let dm = self.spec.mode_dim();
        for (i, z) in psi.iter_mut().enumerate() {
            *z *= cis(sign * self.mode_energy[i % dm] * t);
        }
    }

    /// Advances the columns of `batch` (interaction-picture states at t = 0)
    /// to `t_final`, returning interaction-picture states.
    pub fn run_batch(&self, batch: &mut CMatrix, t_final: f64) -> Result<()> {
        self.run_sequence(self.seq, batch, t_final)
    }

    /// As [`Self::run_batch`] for an arbitrary sequence whose Rabi
    /// frequencies were prepared.
    pub fn run_sequence(&self, seq: Option<&PulseSequence>, batch: &mut CMatrix, t_final: f64) -> Result<()> {
        if batch.nrows() != self.spec.dim() {
            return Err(Error::invalid("state dimension does not match the propagator"));
        }
        if !(t_final >= 0.0) {
            return Err(Error::invalid("final time must be non-negative"));
        }
        let mut gap_cache: Vec<(f64, Vec<Vec<CMatrix>>)> = Vec::new();
        for (a, b) in segments(seq, 0.0, t_final) {
            let dt = b - a;
            let active = seq.and_then(|s| s.active(0.5 * (a + b)).map(|k| s.pulses[k]));
            match active {
                None => {
                    if !gap_cache.iter().any(|(d, _)| *d == dt) {
                        gap_cache.push((dt, self.gap_unitaries(dt)));
                    }
                    let units = &gap_cache.iter().find(|(d, _)| *d == dt).unwrap().1;
                    for mut col in batch.column_iter_mut() {
                        self.gap(col.as_mut_slice(), dt, units);
                    }
                }
                Some(p) => {
                    let amp = 0.5 * (p.rabi + self.noise.d_omega);
                    if let Some(eig) = self.pulses.iter().find(|e| e.amplitude == amp) {
                        self.dense_pulse(batch, eig, p.phase, dt);
                    } else {
                        let op = self.fallback.as_ref().ok_or_else(|| Error::invalid("no pulse propagator prepared"))?;
                        for mut col in batch.column_iter_mut() {
                            let psi = col.as_mut_slice();
                            self.frame(psi, a, 1.0);
                            let mut stats = OdeStats::default();
                            integrate_interaction(op, seq, psi, a, b, self.opts.tol, &mut stats)?;
                            self.frame(psi, b, -1.0);
                        }
                    }
                }
            }
        }
        for mut col in batch.column_iter_mut() {
            self.frame(col.as_mut_slice(), t_final, 1.0);
        }
        Ok(())
    }

    pub fn run(&self, psi0: &CVector, t_final: f64) -> Result<CVector> {
        let mut batch = CMatrix::from_column_slice(psi0.len(), 1, psi0.as_slice());
        self.run_batch(&mut batch, t_final)?;
        Ok(batch.column(0).into_owned())
    }
}

/// Reduced spin state after evolving a thermal mixture of Fock branches.
#[derive(Debug, Clone, PartialEq)]
pub struct ThermalRun {
    /// Σ_b w_b Tr_M |ψ_b⟩⟨ψ_b|.
    pub rho_spin: CMatrix,
    /// Per-branch reduced states, in branch order.
    pub branch_states: Vec<CMatrix>,
    pub weights: Vec<f64>,
    pub cutoffs: Vec<usize>,
}

/// Evolves |spin⟩ ⊗ |n_b⟩ for every branch of `mixture` to `t_final` with
/// evolution cutoffs `max label + margin` per mode. Branches are split over
/// workers in contiguous chunks.
pub fn simulate_thermal(
    system: &IonSystem,
    seq: Option<&PulseSequence>,
    noise: &NoiseModel,
    mixture: &ThermalMixture,
    spin0: &CVector,
    t_final: f64,
    margin: usize,
    opts: PropagatorOptions,
) -> Result<ThermalRun> {
    let cutoffs: Vec<usize> = mixture.max_labels().iter().map(|l| (l + margin).max(1)).collect();
    let spec = HilbertSpec::new(system.n_qubits(), cutoffs)?;
    let prop = SequencePropagator::new(system, seq, spec, noise, opts)?;
    thermal_run(&prop, seq, mixture, spin0, t_final)
}

/// Thermal evolution with a prepared propagator; every branch label must
/// fit inside the propagator's cutoffs.
pub fn thermal_run(
    prop: &SequencePropagator<'_>,
    seq: Option<&PulseSequence>,
    mixture: &ThermalMixture,
    spin0: &CVector,
    t_final: f64,
) -> Result<ThermalRun> {
    let spec = prop.spec();
    if spin0.len() != spec.spin_dim() {
        return Err(Error::invalid("spin state length does not match the qubit count"));
    }
    let dm = spec.mode_dim();
    let n_br = mixture.branches.len();
    if n_br == 0 {
        return Err(Error::invalid("thermal mixture has no branches"));
    }
    let chunks = par::threads().clamp(1, n_br);
    let per = n_br.div_ceil(chunks);
    let ranges: Vec<(usize, usize)> = (0..n_br).step_by(per).map(|lo| (lo, (lo + per).min(n_br))).collect();
    let results = par::try_map(ranges, |(lo, hi)| {
        let mut batch = CMatrix::zeros(spec.dim(), hi - lo);
        for (col, br) in mixture.branches[lo..hi].iter().enumerate() {
            let k = spec.fock_index(&br.fock)?;
            for s in 0..spec.spin_dim() {
                batch[(s * dm + k, col)] = spin0[s];
            }
        }
        prop.run_sequence(seq, &mut batch, t_final)?;
        Ok((0..hi - lo).map(|col| reduce_pure(batch.column(col).as_slice(), spec.spin_dim(), dm)).collect::<Vec<_>>())
    })?;
    let branch_states: Vec<CMatrix> = results.into_iter().flatten().collect();
    let weights: Vec<f64> = mixture.branches.iter().map(|b| b.weight).collect();
    let mut rho_spin = CMatrix::zeros(spec.spin_dim(), spec.spin_dim());
    for (r, &w) in branch_states.iter().zip(&weights) {
        rho_spin += r * c(w, 0.0);
    }
    Ok(ThermalRun { rho_spin, branch_states, weights, cutoffs: spec.cutoffs.clone() })
}
