use std::f64::consts::{FRAC_PI_2, PI, TAU};

use proptest::prelude::*;

use iondd::linalg::{c, cis, C64, I};
use iondd::pulses::{
    build_xy8_sequence, compose_pulses, dd_block_first_order, imperfect_pulse_unitary, make_phase_schedule,
    pulse_unitary_gamma_beta, z_statistic, Mat2, PhasePolicy, PhaseSchedule, Pulse, PulseError, XY8_PHASES,
};
use iondd::rng::derive_seed;

const RABI: f64 = 2.0 * PI * 40e3;

/// RK4 integration of i dU/dt = H U for H = (ε/2)σ^z + ((Ω+δΩ)/2)(σ⁺e^{iφ} + σ⁻e^{−iφ})
/// over π/Ω, in the (g, e) basis, times the global phase −1.
fn ode_pulse(rabi: f64, phase: f64, eps: f64, d_omega: f64) -> Mat2 {
    let sp = Mat2::new(c(0.0, 0.0), c(0.0, 0.0), c(1.0, 0.0), c(0.0, 0.0));
    let sz = Mat2::new(c(-1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(1.0, 0.0));
    let h = sz * c(0.5 * eps, 0.0) + (sp * cis(phase) + sp.adjoint() * cis(-phase)) * c(0.5 * (rabi + d_omega), 0.0);
    let rhs = |u: &Mat2| -(h * u) * I;
    let steps = 4000;
    let dt = PI / rabi / steps as f64;
    let mut u = Mat2::identity();
    for _ in 0..steps {
        let k1 = rhs(&u);
        let k2 = rhs(&(u + k1 * c(0.5 * dt, 0.0)));
        let k3 = rhs(&(u + k2 * c(0.5 * dt, 0.0)));
        let k4 = rhs(&(u + k3 * c(dt, 0.0)));
        u += (k1 + k2 * c(2.0, 0.0) + k3 * c(2.0, 0.0) + k4) * c(dt / 6.0, 0.0);
    }
    -u
}

fn max_el(m: &Mat2) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

fn unitarity_defect(u: &Mat2) -> f64 {
    max_el(&(u.adjoint() * u - Mat2::identity()))
}

/// δΩ giving γ ≈ `gamma` at ε = 0.
fn d_omega_for(gamma: f64) -> f64 {
    2.0 * RABI * gamma / PI
}

fn block(tau: f64, phi: f64) -> Vec<Pulse> {
    let s = PhaseSchedule { phis: vec![phi], ..PhaseSchedule::zeros(1) };
    build_xy8_sequence(1, tau, RABI, &s).unwrap().pulses
}

#[test]
fn pulse_unitary_matches_ode_oracle() {
    let grid = [0.0, 0.02, -0.02, 0.05, -0.05];
    let mut worst: f64 = 0.0;
    for &e in &grid {
        for &d in &grid {
            for phase in [0.0, FRAC_PI_2, 1.3] {
                let u = imperfect_pulse_unitary(RABI, phase, PulseError::new(e * RABI, d * RABI));
                let v = ode_pulse(RABI, phase, e * RABI, d * RABI);
                worst = worst.max(max_el(&(u - v)));
                assert!(unitarity_defect(&u) < 1e-12);
            }
        }
    }
    assert!(worst < 1e-8, "{worst}");
}

#[test]
fn pulse_unitary_examples() {
    let ideal = imperfect_pulse_unitary(RABI, 0.0, PulseError::default());
    let want = Mat2::new(c(0.0, 0.0), I, I, c(0.0, 0.0));
    assert!(max_el(&(ideal - want)) < 1e-15);
    let e = PulseError::default();
    assert_eq!((e.gamma(RABI), e.beta(RABI)), (0.0, 0.0));
}

#[test]
fn detuning_sign_flips_beta() {
    for (e, d) in [(0.02, 0.03), (0.05, -0.01), (0.01, 0.0)] {
        let p = PulseError::new(e * RABI, d * RABI);
        let m = PulseError::new(-e * RABI, d * RABI);
        assert!((p.beta(RABI) + m.beta(RABI)).abs() < 1e-15);
        assert_eq!(p.gamma(RABI), m.gamma(RABI));
        // In the (γ, β) form, flipping ε is the same as shifting φ by −2β.
        for phase in [0.0, 0.7] {
            let a = pulse_unitary_gamma_beta(RABI, phase, m);
            let b = pulse_unitary_gamma_beta(RABI, phase - 2.0 * p.beta(RABI), p);
            assert!(max_el(&(a - b)) < 1e-14);
        }
    }
}

#[test]
fn block_coefficient_rotates_with_global_phase() {
    let tau = 50.28e-6;
    let err = PulseError::new(0.0, d_omega_for(1e-4));
    let base = dd_block_first_order(&block(tau, 0.0), (0.0, 8.0 * tau), err).unwrap();
    assert!((err.gamma(RABI) / 1e-4 - 1.0).abs() < 1e-6);
    assert!(base.c.norm() > 0.0);
    for xi in [0.3, FRAC_PI_2, 2.0, 5.5] {
        let shifted = dd_block_first_order(&block(tau, xi), (0.0, 8.0 * tau), err).unwrap();
        let d = (shifted.c - base.c * cis(-xi)).norm();
        assert!(d < 1e-10, "ξ = {xi}: {d}");
    }
    // Same law with a detuning present.
    let err = PulseError::new(d_omega_for(1e-4), d_omega_for(1e-4));
    let base = dd_block_first_order(&block(tau, 0.0), (0.0, 8.0 * tau), err).unwrap();
    let shifted = dd_block_first_order(&block(tau, 1.0), (0.0, 8.0 * tau), err).unwrap();
    assert!((shifted.c - base.c * cis(-1.0)).norm() < 1e-10);
}

#[test]
fn block_extraction_rejects_bad_input() {
    let tau = 50.28e-6;
    let pulses = block(tau, 0.0);
    let err = PulseError::new(0.0, d_omega_for(1e-4));
    assert!(dd_block_first_order(&pulses[..7], (0.0, 8.0 * tau), err).unwrap_err().is_validation());
    assert!(dd_block_first_order(&[], (0.0, 8.0 * tau), err).is_err());
    assert!(dd_block_first_order(&pulses, (0.0, 8.0 * tau), PulseError::new(0.0, 0.2 * RABI)).is_err());
    assert!(dd_block_first_order(&pulses, (0.0, 8.0 * tau), PulseError::default()).is_err());
}

#[test]
fn xy8_cancels_the_first_order_coefficient() {
    // XY8 is robust to first order, so C itself is O(γ).
    let tau = 50.28e-6;
    for e in [0.0, 0.3, 1.0] {
        let err = PulseError::new(e * d_omega_for(1e-4), d_omega_for(1e-4));
        let x = dd_block_first_order(&block(tau, 0.0), (0.0, 8.0 * tau), err).unwrap();
        assert!(x.c.norm() < 10.0 * err.gamma(RABI), "{}", x.c);
    }
}

/// Off-diagonal element of one normalised block propagator.
fn block_offdiag(tau: f64, phi: f64, err: PulseError) -> C64 {
    let pulses = block(tau, phi);
    let window = (0.0, 8.0 * tau);
    let norm = compose_pulses(&pulses, window, PulseError::default())[(0, 0)];
    (compose_pulses(&pulses, window, err) / norm)[(0, 1)]
}

#[test]
fn block_error_rotates_exactly_with_global_phase() {
    let tau = 50.28e-6;
    let err = PulseError::new(0.3 * d_omega_for(1e-3), d_omega_for(1e-3));
    let b0 = block_offdiag(tau, 0.0, err);
    for xi in [0.3, 2.0, 5.5] {
        let bx = block_offdiag(tau, xi, err);
        assert!((bx - b0 * cis(-xi)).norm() < 1e-9 * b0.norm());
    }
}

/// M blocks with phases Φ_s compose to an off-diagonal M·Z_M·b, where b is
/// the single-block off-diagonal, up to corrections of relative size M|b|.
#[test]
fn repeated_blocks_compose_through_z_statistic() {
    let tau = 50.28e-6;
    let err = PulseError::new(0.3 * d_omega_for(1e-3), d_omega_for(1e-3));
    let b = block_offdiag(tau, 0.0, err);
    assert!(b.norm() > 1e-9);
    for m in [2usize, 10] {
        for (k, policy) in [PhasePolicy::FixedZero, PhasePolicy::Fixed, PhasePolicy::Random, PhasePolicy::Correlated(2)]
            .into_iter()
            .enumerate()
        {
            let sched = make_phase_schedule(m, policy, derive_seed(11, &[m as u64, k as u64])).unwrap();
            let seq = build_xy8_sequence(m, tau, RABI, &sched).unwrap();
            let window = (0.0, seq.duration());
            let norm = compose_pulses(&seq.pulses, window, PulseError::default())[(0, 0)];
            let got = (compose_pulses(&seq.pulses, window, err) / norm)[(0, 1)];
            let want: C64 = z_statistic(&sched) * (m as f64) * b;
            let rel = (got - want).norm() / (m as f64 * b.norm());
            assert!(rel < 10.0 * m as f64 * b.norm(), "M={m} {policy}: {got} vs {want}");
        }
    }
}

#[test]
fn phase_schedule_statistics() {
    for m in [1, 4, 10] {
        let s = make_phase_schedule(m, PhasePolicy::Fixed, 5).unwrap();
        assert!((z_statistic(&s).norm() - 1.0).abs() < 1e-12);
    }
    for g in [2, 5, 10] {
        for seed in 0..20 {
            let s = make_phase_schedule(10, PhasePolicy::Correlated(g), seed).unwrap();
            assert!(z_statistic(&s).norm() < 1e-12);
        }
    }
    let m = 10;
    let n = 10_000;
    let samples: Vec<f64> = (0..n)
        .map(|k| z_statistic(&make_phase_schedule(m, PhasePolicy::Random, derive_seed(2024, &[k])).unwrap()).norm_sqr())
        .collect();
    let mean = samples.iter().sum::<f64>() / n as f64;
    let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    let se = (var / n as f64).sqrt();
    assert!((mean - 1.0 / m as f64).abs() < 3.0 * se, "mean {mean} ± {se}");
}

#[test]
fn schedule_examples() {
    let s = make_phase_schedule(10, PhasePolicy::Correlated(2), 9).unwrap();
    for pair in s.phis.chunks(2) {
        assert!(((pair[1] - pair[0]) - PI).abs() < 1e-12);
    }
    let z = z_statistic(&PhaseSchedule { phis: vec![0.0, PI], ..PhaseSchedule::zeros(2) });
    assert!(z.norm() < 1e-15);
    assert_eq!(z_statistic(&PhaseSchedule::zeros(3)), c(1.0, 0.0));
    assert!(make_phase_schedule(10, PhasePolicy::Correlated(3), 1).unwrap_err().is_validation());
    assert!(make_phase_schedule(0, PhasePolicy::Random, 1).is_err());
    let f = make_phase_schedule(6, PhasePolicy::Fixed, 1).unwrap();
    assert!(f.phis.iter().all(|&p| p == f.phis[0] && (0.0..TAU).contains(&p)));
}

#[test]
fn schedules_are_deterministic() {
    for policy in [PhasePolicy::Fixed, PhasePolicy::Random, PhasePolicy::Correlated(5)] {
        let a = make_phase_schedule(10, policy, 42).unwrap();
        let b = make_phase_schedule(10, policy, 42).unwrap();
        assert_eq!(a.phis.iter().map(|x| x.to_bits()).collect::<Vec<_>>(), b.phis.iter().map(|x| x.to_bits()).collect::<Vec<_>>());
        assert_ne!(a.phis, make_phase_schedule(10, policy, 43).unwrap().phis);
    }
}

#[test]
fn xy8_layout_examples() {
    let seq = build_xy8_sequence(8, 50.28e-6, RABI, &PhaseSchedule::zeros(8)).unwrap();
    assert_eq!(seq.pulses.len(), 64);
    assert!((seq.pulse_duration() - 12.5e-6).abs() < 1e-15);
    assert!((seq.duration() / 3.22e-3 - 1.0).abs() < 1e-3);
    seq.validate().unwrap();

    let rabi = 2.0 * PI * 60e3;
    let seq = build_xy8_sequence(4, 146.56e-6, rabi, &PhaseSchedule::zeros(4)).unwrap();
    assert_eq!(seq.pulses.len(), 32);
    assert!((seq.pulse_duration() - 8.333e-6).abs() < 1e-9);
    assert!((seq.duration() / 4.69e-3 - 1.0).abs() < 1e-3);

    let one = build_xy8_sequence(1, 50e-6, RABI, &PhaseSchedule::zeros(1)).unwrap();
    assert_eq!(one.pulses.iter().map(|p| p.phase).collect::<Vec<_>>(), XY8_PHASES.to_vec());
    assert!(build_xy8_sequence(1, PI / RABI, RABI, &PhaseSchedule::zeros(1)).is_err());
    assert!(build_xy8_sequence(1, 12.0e-6, RABI, &PhaseSchedule::zeros(1)).is_err());
    assert!(build_xy8_sequence(0, 50e-6, RABI, &PhaseSchedule::zeros(0)).is_err());
    assert!(build_xy8_sequence(2, 50e-6, RABI, &PhaseSchedule::zeros(1)).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn pulse_unitaries_are_unitary(e in -0.3f64..0.3, d in -0.3f64..0.3, phase in 0.0f64..TAU) {
        let err = PulseError::new(e * RABI, d * RABI);
        prop_assert!(unitarity_defect(&imperfect_pulse_unitary(RABI, phase, err)) < 1e-12);
        prop_assert!(unitarity_defect(&pulse_unitary_gamma_beta(RABI, phase, err)) < 1e-12);
    }

    #[test]
    fn gamma_is_even_and_beta_odd_in_detuning(e in -0.3f64..0.3, d in -0.3f64..0.3) {
        let p = PulseError::new(e * RABI, d * RABI);
        let m = PulseError::new(-e * RABI, d * RABI);
        prop_assert!((p.gamma(RABI) - m.gamma(RABI)).abs() < 1e-15);
        prop_assert!((p.beta(RABI) + m.beta(RABI)).abs() < 1e-15);
    }

    #[test]
    fn sequences_satisfy_layout_invariants(blocks in 1usize..12, tau_us in 13.0f64..200.0, seed in any::<u64>()) {
        let tau = tau_us * 1e-6;
        let sched = make_phase_schedule(blocks, PhasePolicy::Random, seed).unwrap();
        let seq = build_xy8_sequence(blocks, tau, RABI, &sched).unwrap();
        prop_assert_eq!(seq.pulses.len(), 8 * blocks);
        prop_assert!(seq.validate().is_ok());
        for (k, p) in seq.pulses.iter().enumerate() {
            prop_assert!((p.start + 0.5 * p.duration - (k as f64 + 0.5) * tau).abs() < 1e-15);
            prop_assert_eq!(p.phase, XY8_PHASES[k % 8] + sched.phis[k / 8]);
        }
        prop_assert!((seq.pulses.last().unwrap().end() - seq.duration()) < 0.5 * tau);
    }

    #[test]
    fn correlated_groups_sum_to_zero(groups in 1usize..6, s in 2usize..=10, seed in any::<u64>()) {
        let sched = make_phase_schedule(groups * s, PhasePolicy::Correlated(s), seed).unwrap();
        for g in sched.phis.chunks(s) {
            prop_assert!(g.iter().map(|&p| cis(-p)).sum::<C64>().norm() < 1e-12);
        }
    }
}
