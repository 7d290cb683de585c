//! Heating master equation
//! dρ/dt = −i[H, ρ] + Σ_m Γ_m/2 (N̄_m+1) D[a_m]ρ + Γ_m/2 N̄_m D[a_m†]ρ,
//! D[L]ρ = 2LρL† − L†Lρ − ρL†L.
//!
//! Free segments are exact: for each spin pair (s, s′) the generator acts on
//! the mode block X_{ss′} as a sum of commuting single-mode superoperators.
//! Pulses use Strang splitting between the exact unitary and the dissipator,
//! with the number of substeps chosen by step doubling.

use nalgebra::DMatrix;

use crate::engine::hamiltonian::InteractionOperator;
use crate::engine::hilbert::HilbertSpec;
use crate::engine::ode::{integrate, OdeOptions, OdeStats};
use crate::engine::propagator::{eigen, lab_hamiltonian, mode_energies, mode_hamiltonian};
use crate::engine::schrodinger::segments;
use crate::engine::state::{QuantumState, StateData};
use crate::engine::{IonSystem, ModeHeating, NoiseModel};
use crate::error::{Error, Result};
use crate::linalg::{annihilation, c, cis, expm, min_eigenvalue, CMatrix, C64, I};
use crate::pulses::PulseSequence;
use crate::spin;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LindbladOptions {
    /// Bound on the splitting error of one pulse (max element), and the
    /// Runge–Kutta tolerance of the reference integrator.
    pub tol: f64,
    /// Maximum dimension (of ρ's side) accepted.
    pub max_dim: usize,
}

impl Default for LindbladOptions {
    fn default() -> Self {
        Self { tol: 1e-10, max_dim: 1200 }
    }
}

/// Superoperator of X ↦ A X B on row-major vec(X).
fn left_right(a: &CMatrix, b: &CMatrix) -> CMatrix {
    let d = a.nrows();
    CMatrix::from_fn(d * d, d * d, |r, col| {
        let (k, kp) = (r / d, r % d);
        let (l, lp) = (col / d, col % d);
        a[(k, l)] * b[(lp, kp)]
    })
}

fn dissipator(n_max: usize, heat: &ModeHeating) -> CMatrix {
    let d = n_max + 1;
    let a = annihilation(n_max).map(|x| c(x, 0.0));
    let ad = a.transpose();
    let id = CMatrix::identity(d, d);
    let ada = &ad * &a;
    let aad = &a * &ad;
    let down = (left_right(&a, &ad) * c(2.0, 0.0) - left_right(&ada, &id) - left_right(&id, &ada))
        * c(0.5 * heat.gamma * (heat.nbar_bath + 1.0), 0.0);
    let up = (left_right(&ad, &a) * c(2.0, 0.0) - left_right(&aad, &id) - left_right(&id, &aad))
        * c(0.5 * heat.gamma * heat.nbar_bath, 0.0);
    down + up
}

/// Applies a single-mode superoperator to mode `m` of the block at
/// (`row0`, `col0`) of ρ.
fn apply_block_superop(rho: &mut CMatrix, row0: usize, col0: usize, spec: &HilbertSpec, m: usize, sup: &CMatrix, buf: &mut Vec<C64>) {
    let dm = spec.mode_dim();
    let d = spec.cutoffs[m] + 1;
    let st = spec.strides()[m];
    let bases: Vec<usize> = (0..dm).filter(|k| (k / st) % d == 0).collect();
    buf.resize(d * d, c(0.0, 0.0));
    for &kc in &bases {
        for &kr in &bases {
            for a in 0..d {
                for b in 0..d {
                    buf[a * d + b] = rho[(row0 + kr + a * st, col0 + kc + b * st)];
                }
            }
            for a in 0..d {
                for b in 0..d {
                    let row = sup.row(a * d + b);
                    let acc: C64 = row.iter().zip(buf.iter()).map(|(x, y)| x * y).sum();
                    rho[(row0 + kr + a * st, col0 + kc + b * st)] = acc;
                }
            }
        }
    }
}

/// (Ar + iAi)(Br + iBi) with real GEMMs.
fn cgemm(ar: &DMatrix<f64>, ai: &DMatrix<f64>, br: &DMatrix<f64>, bi: &DMatrix<f64>) -> (DMatrix<f64>, DMatrix<f64>) {
    (ar * br - ai * bi, ar * bi + ai * br)
}

fn split(m: &CMatrix) -> (DMatrix<f64>, DMatrix<f64>) {
    (m.map(|z| z.re), m.map(|z| z.im))
}

struct GapSuperops {
    dt: f64,
    /// Distinct (exp(L Δ), L); generators depend on a spin pair only through
    /// the two displacement coefficients, so many pairs share one.
    exps: Vec<(CMatrix, CMatrix)>,
    /// index[pair][mode] into `exps`, pair = s·S + s′.
    index: Vec<Vec<usize>>,
}

struct LindbladPropagator<'a> {
    system: &'a IonSystem,
    spec: HilbertSpec,
    noise: NoiseModel,
    heating: Vec<ModeHeating>,
    dissipators: Vec<CMatrix>,
    mode_energy: Vec<f64>,
}

impl LindbladPropagator<'_> {
    fn open(&self) -> bool {
        self.heating.iter().any(|h| h.gamma > 0.0)
    }

    fn spin_energy(&self, s: usize) -> f64 {
        0.5 * self.noise.eps * spin::total_z(s, self.spec.n_qubits)
    }

    fn generator(&self, s: usize, sp: usize, m: usize) -> CMatrix {
        let n_max = self.spec.cutoffs[m];
        let nu = self.system.modes.freqs[m];
        let h = mode_hamiltonian(nu, self.system.displacement_coefficient(s, m), n_max).map(|x| c(x, 0.0));
        let hp = mode_hamiltonian(nu, self.system.displacement_coefficient(sp, m), n_max).map(|x| c(x, 0.0));
        let id = CMatrix::identity(n_max + 1, n_max + 1);
        (left_right(&h, &id) - left_right(&id, &hp)) * (-I) + &self.dissipators[m]
    }

    fn gap_superops(&self, dt: f64) -> GapSuperops {
        let ns = self.spec.spin_dim();
        let mut keys: Vec<(u64, u64, usize)> = Vec::new();
        let mut exps = Vec::new();
        let mut index = vec![Vec::with_capacity(self.spec.n_modes()); ns * ns];
        for s in 0..ns {
            for sp in s..ns {
                for m in 0..self.spec.n_modes() {
                    let key = (
                        self.system.displacement_coefficient(s, m).to_bits(),
                        self.system.displacement_coefficient(sp, m).to_bits(),
                        m,
                    );
                    let idx = keys.iter().position(|k| *k == key).unwrap_or_else(|| {
                        let l = self.generator(s, sp, m);
                        exps.push((expm(&(&l * c(dt, 0.0))), l));
                        keys.push(key);
                        keys.len() - 1
                    });
                    index[s * ns + sp].push(idx);
                }
            }
        }
        GapSuperops { dt, exps, index }
    }

    /// Copies the adjoint of each upper block (s < s′) into the lower one.
    fn mirror_blocks(&self, rho: &mut CMatrix) {
        let ns = self.spec.spin_dim();
        let dm = self.spec.mode_dim();
        for s in 0..ns {
            for sp in s + 1..ns {
                let upper = rho.view((s * dm, sp * dm), (dm, dm)).adjoint();
                rho.view_mut((sp * dm, s * dm), (dm, dm)).copy_from(&upper);
            }
        }
    }

    fn gap(&self, rho: &mut CMatrix, ops: &GapSuperops, dt: f64) {
        let ns = self.spec.spin_dim();
        let dm = self.spec.mode_dim();
        // Exact in dt: exp(LΔ) = exp(LΔ₀) exp(Lδ) with |δ| ≪ Δ₀ from rounding.
        let delta = dt - ops.dt;
        let sups: Vec<CMatrix> = ops
            .exps
            .iter()
            .map(|(e, l)| {
                if delta == 0.0 {
                    e.clone()
                } else {
                    let ld = l * c(delta, 0.0);
                    e * (CMatrix::identity(e.nrows(), e.nrows()) + &ld + &ld * &ld * c(0.5, 0.0))
                }
            })
            .collect();
        let mut buf = Vec::new();
        for s in 0..ns {
            for sp in s..ns {
                for m in 0..self.spec.n_modes() {
                    let sup = &sups[ops.index[s * ns + sp][m]];
                    apply_block_superop(rho, s * dm, sp * dm, &self.spec, m, sup, &mut buf);
                }
                let ph = cis(-(self.spin_energy(s) - self.spin_energy(sp)) * dt);
                let mut block = rho.view_mut((s * dm, sp * dm), (dm, dm));
                block *= ph;
            }
        }
        self.mirror_blocks(rho);
    }

    fn dissipate(&self, rho: &mut CMatrix, sups: &[CMatrix]) {
        let ns = self.spec.spin_dim();
        let dm = self.spec.mode_dim();
        let mut buf = Vec::new();
        for s in 0..ns {
            for sp in s..ns {
                for (m, sup) in sups.iter().enumerate() {
                    apply_block_superop(rho, s * dm, sp * dm, &self.spec, m, sup, &mut buf);
                }
            }
        }
        self.mirror_blocks(rho);
    }

    /// One pulse of duration `dt` split into `k` Strang substeps.
    fn pulse(&self, rho: &CMatrix, w: &[f64], v: &DMatrix<f64>, phase: f64, dt: f64, k: usize) -> CMatrix {
        let h = dt / k as f64;
        let u = CMatrix::from_fn(v.nrows(), v.nrows(), |r, col| {
            (0..w.len()).map(|q| cis(-w[q] * h) * (v[(r, q)] * v[(col, q)])).sum()
        });
        let (ur, ui) = split(&u);
        let (urt, uit) = (ur.transpose(), ui.transpose().map(|x| -x));
        let n = self.spec.n_qubits;
        let dm = self.spec.mode_dim();
        let r: Vec<C64> = (0..self.spec.dim()).map(|i| cis(0.5 * phase * spin::total_z(i / dm, n))).collect();
        let half: Vec<CMatrix> = self.dissipators.iter().map(|d| expm(&(d * c(0.5 * h, 0.0)))).collect();
        let mut out = CMatrix::from_fn(rho.nrows(), rho.ncols(), |i, j| rho[(i, j)] * r[i].conj() * r[j]);
        for _ in 0..k {
            if self.open() {
                self.dissipate(&mut out, &half);
            }
            let (sr, si) = split(&out);
            let (tr, ti) = cgemm(&ur, &ui, &sr, &si);
            let (pr, pi) = cgemm(&tr, &ti, &urt, &uit);
            out = CMatrix::from_fn(pr.nrows(), pr.ncols(), |i, j| c(pr[(i, j)], pi[(i, j)]));
            if self.open() {
                self.dissipate(&mut out, &half);
            }
        }
        CMatrix::from_fn(out.nrows(), out.ncols(), |i, j| out[(i, j)] * r[i] * r[j].conj())
    }
}

/// Master-equation evolution of `rho0` (pure inputs are promoted) to
/// `t_final`; the result is in the interaction picture of Σ ν a†a.
pub fn evolve_lindblad(
    system: &IonSystem,
    rho0: &QuantumState,
    seq: Option<&PulseSequence>,
    noise: &NoiseModel,
    t_final: f64,
    opts: &LindbladOptions,
) -> Result<QuantumState> {
    let spec = rho0.spec.clone();
    if spec.n_qubits != system.n_qubits() || spec.n_modes() != system.n_modes() {
        return Err(Error::invalid("Hilbert space does not match the ion system"));
    }
    if spec.dim() > opts.max_dim {
        return Err(Error::BudgetExceeded { dim: spec.dim(), budget: opts.max_dim });
    }
    noise.validate(system.n_modes())?;
    if !(t_final >= 0.0) {
        return Err(Error::invalid("final time must be non-negative"));
    }
    let heating = if noise.heating.is_empty() {
        vec![ModeHeating { gamma: 0.0, nbar_bath: 0.0 }; spec.n_modes()]
    } else {
        noise.heating.clone()
    };
    let dissipators = heating.iter().zip(&spec.cutoffs).map(|(h, &n)| dissipator(n, h)).collect();
    let prop = LindbladPropagator {
        system,
        mode_energy: mode_energies(system, &spec),
        spec: spec.clone(),
        noise: noise.clone(),
        heating,
        dissipators,
    };
    let mut rho = rho0.density_matrix();
    let mut gap_cache: Vec<GapSuperops> = Vec::new();
    let mut pulse_cache: Vec<(f64, Vec<f64>, DMatrix<f64>, usize)> = Vec::new();
    for (a, b) in segments(seq, 0.0, t_final) {
        let dt = b - a;
        match seq.and_then(|s| s.active(0.5 * (a + b)).map(|k| s.pulses[k])) {
            None => {
                let idx = match gap_cache.iter().position(|g| (g.dt - dt).abs() <= 1e-9 * dt) {
                    Some(i) => i,
                    None => {
                        gap_cache.push(prop.gap_superops(dt));
                        gap_cache.len() - 1
                    }
                };
                prop.gap(&mut rho, &gap_cache[idx], dt);
            }
            Some(p) => {
                let amp = 0.5 * (p.rabi + noise.d_omega);
                let idx = match pulse_cache.iter().position(|e| e.0 == amp) {
                    Some(i) => i,
                    None => {
                        let (w, v) = eigen(lab_hamiltonian(system, &spec, noise.eps, amp));
                        pulse_cache.push((amp, w, v, 0));
                        pulse_cache.len() - 1
                    }
                };
                let (_, w, v, k) = &pulse_cache[idx];
                let mut k = *k;
                let next = if k > 0 {
                    prop.pulse(&rho, w, v, p.phase, dt, k)
                } else if !prop.open() {
                    k = 1;
                    prop.pulse(&rho, w, v, p.phase, dt, 1)
                } else {
                    // Step doubling on the first pulse fixes the substep count.
                    k = 1;
                    let mut coarse = prop.pulse(&rho, w, v, p.phase, dt, 1);
                    loop {
                        let fine = prop.pulse(&rho, w, v, p.phase, dt, 2 * k);
                        let diff = (&fine - &coarse).iter().map(|z| z.norm()).fold(0.0, f64::max);
                        k *= 2;
                        if diff <= opts.tol {
                            break fine;
                        }
                        if k > 4096 {
                            return Err(Error::Convergence { what: "Strang substeps during a pulse", residual: diff });
                        }
                        coarse = fine;
                    }
                };
                pulse_cache[idx].3 = k;
                rho = next;
            }
        }
    }
    // Lab → interaction frame.
    let dm = spec.mode_dim();
    let e = &prop.mode_energy;
    let rho = CMatrix::from_fn(rho.nrows(), rho.ncols(), |i, j| rho[(i, j)] * cis((e[i % dm] - e[j % dm]) * t_final));
    check_physical(rho, spec)
}

fn check_physical(rho: CMatrix, spec: HilbertSpec) -> Result<QuantumState> {
    let tr = rho.trace();
    if (tr.re - 1.0).abs() > 1e-8 || tr.im.abs() > 1e-8 {
        return Err(Error::Convergence { what: "trace drift in master-equation evolution", residual: tr.re - 1.0 });
    }
    let lmin = min_eigenvalue(&rho);
    if lmin < -1e-8 {
        return Err(Error::NonPhysical { min_eigenvalue: lmin });
    }
    Ok(QuantumState { data: StateData::Mixed(rho), spec })
}

/// Reference integrator: adaptive Runge–Kutta on the interaction-picture
/// master equation with dense operators. Meant for small dimensions.
pub fn evolve_lindblad_rk(
    system: &IonSystem,
    rho0: &QuantumState,
    seq: Option<&PulseSequence>,
    noise: &NoiseModel,
    t_final: f64,
    opts: &LindbladOptions,
) -> Result<QuantumState> {
    let spec = rho0.spec.clone();
    let dim = spec.dim();
    if dim > 128 {
        return Err(Error::BudgetExceeded { dim, budget: 128 });
    }
    let op = InteractionOperator::new(system, &spec, noise)?;
    let heating = noise.heating.clone();
    let ladders: Vec<CMatrix> = (0..spec.n_modes())
        .map(|m| {
            let occ = spec.occupations(m);
            let st = spec.strides()[m];
            let dm = spec.mode_dim();
            let mut a = CMatrix::zeros(dim, dim);
            for s in 0..spec.spin_dim() {
                for k in 0..dm {
                    if occ[k] > 0 {
                        a[(s * dm + k - st, s * dm + k)] = c((occ[k] as f64).sqrt(), 0.0);
                    }
                }
            }
            a
        })
        .collect();
    // D[L]ρ terms as jumps L ρ L† plus a non-Hermitian damping −i K.
    let mut damping = CMatrix::zeros(dim, dim);
    let mut jumps = Vec::new();
    for (a, heat) in ladders.iter().zip(&heating) {
        let ad = a.adjoint();
        let (down, up) = (heat.gamma * (heat.nbar_bath + 1.0), heat.gamma * heat.nbar_bath);
        damping += (&ad * a * c(0.5 * down, 0.0)) + (a * &ad * c(0.5 * up, 0.0));
        jumps.push((a.clone(), down));
        jumps.push((ad, up));
    }
    let mut y: Vec<C64> = rho0.density_matrix().iter().copied().collect();
    let nu_max = op.max_frequency();
    let mut stats = OdeStats::default();
    for (a, b) in segments(seq, 0.0, t_final) {
        let drive = op.drive_at(seq, 0.5 * (a + b));
        let h_max = match drive {
            Some(d) => 1.0 / (50.0 * nu_max.max(2.0 * d.amplitude)),
            None => 1.0 / nu_max,
        };
        let rhs = |t: f64, r: &[C64], dr: &mut [C64]| {
            let rho = CMatrix::from_column_slice(dim, dim, r);
            let h = op.assemble(t, drive).to_dense() - &damping * I;
            let hr = &h * &rho;
            let mut out = (&hr - &rho * h.adjoint()) * (-I);
            for (j, rate) in &jumps {
                out += j * &rho * j.adjoint() * c(*rate, 0.0);
            }
            dr.copy_from_slice(out.as_slice());
        };
        integrate(rhs, a, b, &mut y, 0.1 * h_max, &OdeOptions::new(opts.tol, h_max), &mut stats)?;
    }
    check_physical(CMatrix::from_column_slice(dim, dim, &y), spec)
}
