use std::f64::consts::PI;

use nalgebra::{DMatrix, SymmetricEigen};
use proptest::prelude::*;

use iondd::chain::{
    chain_modes, coupling_matrix, equilibrium_positions, gate_time, lamb_dicke, normal_modes, ChainConfig, GateKind,
    LambDickeMatrix,
};
use iondd::units::khz;

/// Brute-force oracle: finite-difference Hessian of the dimensionless
/// potential Σ u²/2 + Σ_{i<j} 1/|u_i − u_j| at positions found by plain
/// gradient descent from an evenly spaced start.
fn oracle_modes(n: usize) -> (Vec<f64>, DMatrix<f64>) {
    let v = |u: &[f64]| {
        let mut e = 0.0;
        for i in 0..n {
            e += 0.5 * u[i] * u[i];
            for j in 0..i {
                e += 1.0 / (u[i] - u[j]).abs();
            }
        }
        e
    };
    let grad = |u: &[f64]| -> Vec<f64> {
        (0..n)
            .map(|i| u[i] - (0..n).filter(|&j| j != i).map(|j| (u[i] - u[j]).signum() / (u[i] - u[j]).powi(2)).sum::<f64>())
            .collect()
    };
    let mut u: Vec<f64> = (0..n).map(|i| i as f64 - 0.5 * (n - 1) as f64).collect();
    for _ in 0..200_000 {
        let g = grad(&u);
        if g.iter().map(|x| x * x).sum::<f64>().sqrt() < 1e-13 {
            break;
        }
        for i in 0..n {
            u[i] -= 0.05 * g[i];
        }
    }
    let h = 1e-4;
    let hess = DMatrix::from_fn(n, n, |i, j| {
        let f = |di: f64, dj: f64| {
            let mut w = u.clone();
            w[i] += di;
            w[j] += dj;
            v(&w)
        };
        (f(h, h) - f(h, -h) - f(-h, h) + f(-h, -h)) / (4.0 * h * h)
    });
    let eig = SymmetricEigen::new(hess);
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let freqs = idx.iter().map(|&k| eig.eigenvalues[k].sqrt()).collect();
    let vecs = DMatrix::from_fn(n, n, |j, m| eig.eigenvectors[(j, idx[m])]);
    (freqs, vecs)
}

#[test]
fn two_and_six_ion_tables() {
    let m2 = normal_modes(2).unwrap();
    let want2 = [1.0, 3f64.sqrt()];
    for (a, b) in m2.ratios().iter().zip(want2) {
        assert!((a - b).abs() < 1e-10);
    }
    for x in m2.bmat.iter() {
        assert!((x.abs() - 0.5f64.sqrt()).abs() < 1e-10);
    }

    let m6 = normal_modes(6).unwrap();
    let want6 = [1.0, 3.0, 5.824, 9.352, 13.51, 18.27].map(f64::sqrt);
    for (a, b) in m6.ratios().iter().zip(want6) {
        assert!((a - b).abs() < 1e-3, "{a} vs {b}");
    }
    for j in 0..6 {
        assert!((m6.bmat[(j, 0)].abs() - 0.4082).abs() < 1e-3);
    }
}

#[test]
fn three_ions_match_brute_force_oracle() {
    let modes = normal_modes(3).unwrap();
    let (freqs, vecs) = oracle_modes(3);
    let closed = [1.0, 3f64.sqrt(), 5.8f64.sqrt()];
    for m in 0..3 {
        assert!((modes.freqs[m] - freqs[m]).abs() < 1e-5, "{} vs {}", modes.freqs[m], freqs[m]);
        assert!((modes.freqs[m] - closed[m]).abs() < 1e-10);
        for j in 0..3 {
            assert!((modes.bmat[(j, m)].abs() - vecs[(j, m)].abs()).abs() < 1e-5);
        }
    }
    let pos = equilibrium_positions(3).unwrap();
    let x = 1.25f64.cbrt();
    assert!((pos[0] + x).abs() < 1e-10 && pos[1].abs() < 1e-10 && (pos[2] - x).abs() < 1e-10);
}

#[test]
fn larger_chains_match_brute_force_oracle() {
    for n in [4, 5, 7] {
        let modes = normal_modes(n).unwrap();
        let (freqs, _) = oracle_modes(n);
        for m in 0..n {
            assert!((modes.freqs[m] - freqs[m]).abs() < 1e-4, "N={n} m={m}");
        }
    }
}

#[test]
fn gradient_to_lamb_dicke() {
    let c = ChainConfig::yb171(2, khz(220.0), 150.0);
    assert!((c.base_eta() - 0.056).abs() < 0.001, "{}", c.base_eta());
    let c = ChainConfig::yb171(2, khz(200.0), 26.8);
    assert!((c.base_eta() - 0.0113).abs() < 0.0002, "{}", c.base_eta());
    let c = ChainConfig::yb171(2, khz(220.0), 0.0);
    let eta = lamb_dicke(&c, &chain_modes(&c).unwrap()).unwrap();
    assert!(eta.eta.iter().all(|&x| x == 0.0));
    let j = coupling_matrix(&eta, &chain_modes(&c).unwrap()).unwrap();
    assert!(j.j.iter().all(|&x| x == 0.0));
    assert!(gate_time(&j, GateKind::Multi).is_err());
}

#[test]
fn per_mode_formula_agrees_with_scaling_relation() {
    for n in [2, 3, 6] {
        let c = ChainConfig::yb171(n, khz(210.0), 40.0);
        let modes = chain_modes(&c).unwrap();
        let a = lamb_dicke(&c, &modes).unwrap();
        let b = LambDickeMatrix::from_base(c.base_eta(), &modes);
        for (x, y) in a.eta.iter().zip(b.eta.iter()) {
            assert!((x - y).abs() <= 1e-12 * y.abs().max(1e-3 * c.base_eta()));
        }
    }
}

#[test]
fn two_ion_coupling_closed_form() {
    let nu = khz(220.0);
    let modes = normal_modes(2).unwrap().with_trap_frequency(nu);
    let eta = LambDickeMatrix::from_base(0.018, &modes);
    let j = coupling_matrix(&eta, &modes).unwrap();
    let want = nu * 0.018f64.powi(2) / 3.0;
    assert!((j.j[(0, 1)] - want).abs() < 1e-12 * want);
    let tg = gate_time(&j, GateKind::BellPair { i: 0, j: 1 }).unwrap();
    assert!((tg - gate_time(&j, GateKind::Multi).unwrap()).abs() < 1e-12 * tg);
    assert!((tg / 2.62e-3 - 1.0).abs() < 0.01, "{tg}");
}

#[test]
fn six_ion_couplings_and_gate_time() {
    let modes = normal_modes(6).unwrap().with_trap_frequency(khz(220.0));
    let eta = LambDickeMatrix::from_base(0.018, &modes);
    let j = coupling_matrix(&eta, &modes).unwrap();
    let tg = gate_time(&j, GateKind::Multi).unwrap();
    assert!((tg / 4.50e-3 - 1.0).abs() < 0.01, "{tg}");
    // Positive everywhere, strongest between neighbours.
    for i in 0..6 {
        for k in 0..6 {
            if i != k {
                assert!(j.j[(i, k)] > 0.0);
            }
        }
    }
    let (a, b) = j.strongest_pair();
    assert_eq!(b - a, 1);
    for i in 0..5 {
        assert!(j.j[(i, i + 1)] > j.j[(i, (i + 2).min(5))] || i + 2 > 5);
    }
}

#[test]
fn slow_two_ion_gate_time() {
    let modes = normal_modes(2).unwrap().with_trap_frequency(khz(200.0));
    let j = coupling_matrix(&LambDickeMatrix::from_base(0.0113, &modes), &modes).unwrap();
    let tg = gate_time(&j, GateKind::Multi).unwrap();
    // Closed form ≈ 7.34 ms; the reference curve crosses at ≈ 7.1 ms.
    assert!((tg / 7.1e-3 - 1.0).abs() < 0.05, "{tg}");
    assert!((tg - PI / (8.0 * 2.0 * PI * 200e3 * 0.0113f64.powi(2) / 3.0)).abs() < 1e-12);
}

#[test]
fn rejects_invalid_chains() {
    assert!(normal_modes(1).is_err());
    assert!(normal_modes(11).is_err());
    let mut c = ChainConfig::yb171(2, khz(200.0), 10.0);
    c.gradient = -1.0;
    assert!(c.validate().is_err());
    c = ChainConfig::yb171(2, 0.0, 10.0);
    assert!(c.validate().is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn modes_are_orthonormal_with_com_first(n in 2usize..=10) {
        let m = normal_modes(n).unwrap();
        let defect = (m.bmat.transpose() * &m.bmat - DMatrix::identity(n, n)).abs().max();
        prop_assert!(defect < 1e-10);
        prop_assert!((m.freqs[0] - 1.0).abs() < 1e-10);
        prop_assert!(m.freqs.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn eta_scales_with_gradient_and_frequency(g in 1.0f64..200.0, f_khz in 50.0f64..1000.0) {
        let a = ChainConfig::yb171(2, khz(f_khz), g);
        let b = ChainConfig::yb171(2, khz(f_khz), 2.0 * g);
        let c = ChainConfig::yb171(2, khz(2.0 * f_khz), g);
        prop_assert!((b.base_eta() / a.base_eta() - 2.0).abs() < 1e-12);
        prop_assert!((c.base_eta() / a.base_eta() - 2f64.powf(-1.5)).abs() < 1e-12);
        prop_assert!((a.gradient_for_eta(a.base_eta()) / g - 1.0).abs() < 1e-12);
    }

    #[test]
    fn coupling_is_symmetric_and_permutes_with_ions(n in 2usize..=7, eta in 0.001f64..0.06, seed in any::<u64>()) {
        let modes = normal_modes(n).unwrap().with_trap_frequency(khz(200.0));
        let ld = LambDickeMatrix::from_base(eta, &modes);
        let j = coupling_matrix(&ld, &modes).unwrap();
        prop_assert!((&j.j - j.j.transpose()).abs().max() == 0.0);
        prop_assert!((0..n).all(|i| j.j[(i, i)] == 0.0));
        // Relabel ions with a seeded permutation.
        let mut perm: Vec<usize> = (0..n).collect();
        let mut s = seed;
        for i in (1..n).rev() {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            perm.swap(i, (s >> 33) as usize % (i + 1));
        }
        let mut permuted = modes.clone();
        permuted.bmat = DMatrix::from_fn(n, n, |r, m| modes.bmat[(perm[r], m)]);
        let jp = coupling_matrix(&LambDickeMatrix::from_base(eta, &permuted), &permuted).unwrap();
        for a in 0..n {
            for b in 0..n {
                prop_assert!((jp.j[(a, b)] - j.j[(perm[a], perm[b])]).abs() <= 1e-12 * j.max_abs());
            }
        }
    }
}
