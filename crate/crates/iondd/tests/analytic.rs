use std::f64::consts::PI;

use proptest::prelude::*;

use iondd::analytic::{
    bell_fidelity_estimate, displacement_amplitudes, fidelity_bound, free_phase, free_propagator_state,
    pure_target_fidelity, residual_density_matrix,
};
use iondd::chain::{coupling_matrix, gate_time, normal_modes, GateKind, LambDickeMatrix, ModeData};
use iondd::linalg::{c, cis, CMatrix, CVector, C64};
use iondd::spin;
use iondd::units::khz;

fn two_ion(eta: f64, nu_khz: f64) -> (ModeData, LambDickeMatrix) {
    let modes = normal_modes(2).unwrap().with_trap_frequency(khz(nu_khz));
    let eta = LambDickeMatrix::from_base(eta, &modes);
    (modes, eta)
}

fn thermal_weight(nbar: f64, n: usize) -> f64 {
    nbar.powi(n as i32) / (nbar + 1.0).powi(n as i32 + 1)
}

/// Tr_M[U_F (|B⟩⟨B| ⊗ ρ_T) U_F†] by brute force: each Fock branch is
/// propagated with the closed-form U_S U_F, U_S is undone on the spins, and
/// the modes are traced out.
fn residual_state_by_branches(eta: &LambDickeMatrix, modes: &ModeData, t: f64, nbar: [f64; 2], n_max: usize) -> CMatrix {
    let bell = spin::bell_state();
    let theta = free_phase(eta, modes, t);
    let us_phase = |s: usize| -> f64 {
        let mut p = 0.0;
        for i in 0..2 {
            for j in 0..2 {
                p += 4.0 * theta[(i, j)] * spin::excited(s, i, 2) * spin::excited(s, j, 2);
            }
        }
        p
    };
    let mut rho = CMatrix::zeros(4, 4);
    for n1 in 0..=n_max {
        for n2 in 0..=n_max {
            let w = thermal_weight(nbar[0], n1) * thermal_weight(nbar[1], n2);
            if w < 1e-16 {
                continue;
            }
            let cut = [n1 + 10, n2 + 10];
            let psi = free_propagator_state(eta, modes, t, &bell, &[n1, n2], &cut).unwrap();
            let dm = (cut[0] + 1) * (cut[1] + 1);
            for s in 0..4 {
                for sp in 0..4 {
                    let undo = cis(us_phase(sp) - us_phase(s));
                    let mut acc = c(0.0, 0.0);
                    for k in 0..dm {
                        acc += psi[s * dm + k] * psi[sp * dm + k].conj();
                    }
                    rho[(s, sp)] += acc * undo * w;
                }
            }
        }
    }
    rho
}

fn max_diff(a: &CMatrix, b: &CMatrix) -> f64 {
    (a - b).iter().map(|z| z.norm()).fold(0.0, f64::max)
}

#[test]
fn displacement_examples() {
    let (modes, eta) = two_ion(0.018, 220.0);
    let a0 = displacement_amplitudes(&eta, &modes, 0.0);
    assert!(a0.alpha.iter().all(|z| z.norm() == 0.0));
    for m in 0..2 {
        let half = displacement_amplitudes(&eta, &modes, PI / modes.freqs[m]);
        let full = displacement_amplitudes(&eta, &modes, 2.0 * PI / modes.freqs[m]);
        for j in 0..2 {
            assert!((half.alpha[(j, m)] - c(2.0 * eta.eta[(j, m)], 0.0)).norm() < 1e-15);
            assert!(full.alpha[(j, m)].norm() < 1e-15);
        }
    }
}

#[test]
fn free_phase_examples() {
    let (modes, eta) = two_ion(0.018, 220.0);
    let j = coupling_matrix(&eta, &modes).unwrap();
    assert!(free_phase(&eta, &modes, 0.0).iter().all(|&x| x == 0.0));
    let t_long = 1e3 * 2.0 * PI / modes.freqs[0];
    let slope = free_phase(&eta, &modes, t_long)[(0, 1)] / t_long;
    assert!((slope / j.j[(0, 1)] - 1.0).abs() < 1.0 / (modes.freqs[0] * t_long));
    let tg = gate_time(&j, GateKind::Multi).unwrap();
    assert!((tg / 2.62e-3 - 1.0).abs() < 0.01);
    let theta = free_phase(&eta, &modes, 2.62e-3)[(0, 1)];
    assert!((theta / (PI / 8.0) - 1.0).abs() < 0.01, "{theta}");
}

#[test]
fn bound_values() {
    assert!((fidelity_bound(0.056) - 9.64e-4).abs() < 1e-6);
    assert!((fidelity_bound(0.018) - 1.03e-5).abs() < 1e-7);
    assert_eq!(fidelity_bound(0.0), 0.0);
}

#[test]
fn estimate_examples() {
    let zero = [c(0.0, 0.0); 2];
    assert_eq!(bell_fidelity_estimate(&zero, &zero, &[1.0, 1.0]).unwrap().value, 1.0);
    assert!(bell_fidelity_estimate(&zero, &zero, &[1.0]).is_err());
    assert!(bell_fidelity_estimate(&zero, &zero, &[-1.0, 0.0]).is_err());
    // Worst case α = 2η (every mode at half period) at n̄ = 1 reproduces the unrounded bound
    // 18(6 − 4·3^{-3/2} + 6·3^{-3})η⁴ ≈ 98.14η⁴.
    let coeff = 18.0 * (6.0 - 4.0 * 3f64.powf(-1.5) + 6.0 / 27.0);
    for eta_base in [0.018, 0.056] {
        let (_, eta) = two_ion(eta_base, 220.0);
        let worst = |j: usize| -> Vec<C64> { (0..2).map(|m| c(2.0 * eta.eta[(j, m)], 0.0)).collect() };
        let est = bell_fidelity_estimate(&worst(0), &worst(1), &[1.0, 1.0]).unwrap();
        let want = coeff * eta_base.powi(4);
        assert!((est.infidelity() / want - 1.0).abs() < 1e-9, "{} vs {want}", est.infidelity());
        assert!((est.infidelity() / fidelity_bound(eta_base) - 1.0).abs() < 2e-3);
    }
}

#[test]
fn residual_matrix_at_zero_displacement_is_bell_projector() {
    let zero = [c(0.0, 0.0); 2];
    let rho = residual_density_matrix(&zero, &zero, &[0.5, 2.0]).unwrap();
    let b = spin::bell_state();
    let proj = &b * b.adjoint();
    assert!(max_diff(&rho, &proj) < 1e-15);
}

#[test]
fn residual_matrix_matches_fock_branch_oracle() {
    let (modes, eta) = two_ion(0.05, 220.0);
    for (t, nbar) in [(0.7e-6, [0.3, 0.0]), (1.9e-6, [0.2, 0.4]), (3.3e-6, [0.0, 0.0])] {
        let alpha = displacement_amplitudes(&eta, &modes, t);
        let closed = residual_density_matrix(&alpha.ion(0), &alpha.ion(1), &nbar).unwrap();
        let brute = residual_state_by_branches(&eta, &modes, t, nbar, 28);
        assert!(max_diff(&closed, &brute) < 1e-9, "t={t}: {}", max_diff(&closed, &brute));
    }
}

#[test]
fn estimate_tracks_exact_fidelity() {
    let (modes, eta) = two_ion(0.05, 220.0);
    let bell = spin::bell_state();
    // Fixed pseudo-random times inside the first few mode periods.
    for (k, nbar) in [[0.0, 0.0], [1.0, 1.0], [1.0, 0.0], [0.0, 1.0]].into_iter().enumerate() {
        let t = (0.37 + 0.61 * k as f64) * 2.0 * PI / modes.freqs[0];
        let alpha = displacement_amplitudes(&eta, &modes, t);
        let est = bell_fidelity_estimate(&alpha.ion(0), &alpha.ion(1), &nbar).unwrap();
        let rho = residual_state_by_branches(&eta, &modes, t, nbar, 40);
        let exact = 1.0 - pure_target_fidelity(&rho, &bell);
        assert!((est.infidelity() - exact).abs() <= 0.25 * exact, "n̄={nbar:?}: estimate {} exact {exact}", est.infidelity());
    }
}

#[test]
fn residual_matrix_agrees_with_estimate_to_sixth_order() {
    let (modes, eta) = two_ion(0.02, 220.0);
    let bell = spin::bell_state();
    for t in [0.3e-6, 1.1e-6, 2.0e-6] {
        let alpha = displacement_amplitudes(&eta, &modes, t);
        let nbar = [0.5, 0.5];
        let rho = residual_density_matrix(&alpha.ion(0), &alpha.ion(1), &nbar).unwrap();
        let est = bell_fidelity_estimate(&alpha.ion(0), &alpha.ion(1), &nbar).unwrap();
        let g2: f64 = alpha.alpha.iter().map(|z| z.norm_sqr()).sum::<f64>() * 8.0;
        let diff = (pure_target_fidelity(&rho, &bell) - est.value).abs();
        assert!(diff < 10.0 * g2.powi(3), "{diff} vs g⁶ ≈ {}", g2.powi(3));
    }
}

#[test]
fn propagator_state_validates_inputs() {
    let (modes, eta) = two_ion(0.02, 220.0);
    let psi = spin::plus_state(2);
    assert!(free_propagator_state(&eta, &modes, 1e-6, &psi, &[3, 0], &[2, 2]).is_err());
    assert!(free_propagator_state(&eta, &modes, 1e-6, &psi, &[0], &[2, 2]).is_err());
    assert!(free_propagator_state(&eta, &modes, 1e-6, &CVector::zeros(2), &[0, 0], &[2, 2]).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn displacement_is_bounded(eta_base in 0.0f64..0.1, t in 0.0f64..1e-2, n in 2usize..=6) {
        let modes = normal_modes(n).unwrap().with_trap_frequency(khz(200.0));
        let eta = LambDickeMatrix::from_base(eta_base, &modes);
        let a = displacement_amplitudes(&eta, &modes, t);
        for j in 0..n {
            for m in 0..n {
                prop_assert!(a.alpha[(j, m)].norm() <= 2.0 * eta.eta[(j, m)].abs() * (1.0 + 1e-12));
            }
        }
    }

    #[test]
    fn periodic_part_of_phase_is_bounded(eta_base in 0.0f64..0.1, t in 0.0f64..1e-2, n in 2usize..=6) {
        let modes = normal_modes(n).unwrap().with_trap_frequency(khz(200.0));
        let eta = LambDickeMatrix::from_base(eta_base, &modes);
        let j = coupling_matrix(&eta, &modes).unwrap();
        let theta = free_phase(&eta, &modes, t);
        for a in 0..n {
            for b in 0..n {
                if a == b { continue; }
                let bound: f64 = (0..n).map(|m| (eta.eta[(a, m)] * eta.eta[(b, m)]).abs()).sum();
                prop_assert!((theta[(a, b)] - j.j[(a, b)] * t).abs() <= bound * (1.0 + 1e-9) + 1e-15);
            }
        }
    }

    #[test]
    fn residual_matrix_is_a_state(
        x in proptest::collection::vec(-0.05f64..0.05, 4),
        phi in proptest::collection::vec(0.0f64..6.3, 2),
        nbar in proptest::collection::vec(0.0f64..2.0, 2),
    ) {
        // Physical amplitudes share the mode phase: α_jm = x_jm (1 − e^{iφ_m}).
        let a = |j: usize, m: usize| (c(1.0, 0.0) - cis(phi[m])) * x[2 * j + m];
        let ai = [a(0, 0), a(0, 1)];
        let aj = [a(1, 0), a(1, 1)];
        let rho = residual_density_matrix(&ai, &aj, &nbar).unwrap();
        prop_assert!((rho.trace() - c(1.0, 0.0)).norm() < 1e-12);
        prop_assert!(max_diff(&rho, &rho.adjoint()) < 1e-14);
        let f = pure_target_fidelity(&rho, &spin::bell_state());
        prop_assert!(f <= 1.0 + 1e-12 && f > 0.0);
        let est = bell_fidelity_estimate(&ai, &aj, &nbar).unwrap();
        prop_assert!(est.value <= 1.0 + 1e-15);
    }
}
