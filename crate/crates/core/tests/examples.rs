//! Worked examples on the built-in K3/P3 systems and closed-form checks of
//! the certificate helpers.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use symgeo_core::dynamics::fields::{
    executive_drive, neuromod_readout, precision_field, valuative_drive, valuative_rhs, StageScalars,
};
use symgeo_core::dynamics::params::{ACH, DA};
use symgeo_core::integrator::{integrate, random_history, RecordOptions};
use symgeo_core::scenarios::{
    build_k3p3, build_k3p3_full, build_k3p3_valuation, by_name, coarse_grain_report, K3p3Params, ValuationParams,
    SCENARIO_NAMES,
};
use symgeo_core::stability::{
    executive_crossgain, lyapunov_value, one_sided_lipschitz_estimate, radial_margin_check, small_gain_check,
    LkConstants,
};
use symgeo_core::state::random_state;
use symgeo_core::{HistoryBuffer, StateVector};

#[test]
fn precision_modulated_gap_stays_above_floor() {
    let p = K3p3Params::default();
    let cfg = build_k3p3(&p).unwrap();
    let arch = &cfg.arch;
    let floor = 3.0 * (1.0 - p.delta_q);
    for k in 0..=200 {
        let y = -1.0 + 2.0 * k as f64 / 200.0;
        let mu = neuromod_readout(&[y], &cfg.params.neuromod);
        let q = precision_field(mu[ACH], arch, &cfg.params.precision);
        // Q(Y) = 1 + δ tanh Y, written out independently
        let expected = 1.0 + p.delta_q * y.tanh();
        assert!(
            q.iter().all(|v| (v - expected).abs() <= 1e-12),
            "Q({y}) = {q:?}, expected {expected}"
        );
        let weights: Vec<f64> = arch.graph_l.weights().iter().zip(&q).map(|(w, q)| w * q).collect();
        let gap = arch.graph_l.with_weights(weights).unwrap().spectral_gap().unwrap();
        assert!(gap >= floor - 1e-12, "gap {gap} below {floor} at Y = {y}");
    }
}

#[test]
fn coupling_budget_closed_form() {
    for (k, sa, sb) in [(0.05, 0.05, 0.05), (0.1, 0.02, 0.07), (0.01, 0.0, 0.0), (0.2, 0.2, 0.1)] {
        let p = K3p3Params {
            k,
            sigma_alpha: sa,
            sigma_beta: sb,
            ..K3p3Params::default()
        };
        let cfg = build_k3p3(&p).unwrap();
        let want = 15f64.sqrt() / 2.0 * (k + sa.max(sb));
        assert!((cfg.kernel.family_budget() - want).abs() <= 1e-12);
        assert!((p.coupling_budget() - want).abs() <= 1e-12);
    }
}

#[test]
fn valuation_drives_vanish_at_equilibrium() {
    let cfg = build_k3p3_valuation(&ValuationParams::default()).unwrap();
    let eq = cfg.equilibrium.clone().unwrap();
    let p = &cfg.params;
    let scalars = StageScalars {
        homeostatic: vec![0.0; cfg.arch.n_u],
        prediction_error: 0.0,
        novelty: 0.0,
        outcome: 0.0,
    };
    let ry = valuative_drive(
        &p.valuative,
        &p.symbolic,
        &p.geometric,
        &eq.h,
        &eq.x,
        &eq.p,
        &eq.m,
        &scalars,
    );
    assert!(ry.iter().all(|v| v.abs() <= 1e-15), "r_Y = {ry:?}");
    let mu = neuromod_readout(&eq.y, &p.neuromod);
    let rp = executive_drive(
        &p.executive,
        &p.symbolic,
        &p.geometric,
        &eq.h,
        &eq.x,
        &eq.y,
        mu[DA],
        0.0,
    );
    assert!(rp.iter().all(|v| v.abs() <= 1e-15), "r_P = {rp:?}");
}

#[test]
fn valuation_points_inward_at_its_boundary() {
    let cfg = build_k3p3_valuation(&ValuationParams::default()).unwrap();
    let v = &cfg.params.valuative;
    for r in [-100.0, -1.0, 0.0, 0.3, 1.0, 100.0] {
        let dy = valuative_rhs(v, &[1.0], &[r])[0];
        assert!(dy <= -v.kappa + v.amplitude + 1e-15, "dY = {dy} at drive {r}");
        let dy = valuative_rhs(v, &[-1.0], &[r])[0];
        assert!(dy >= v.kappa - v.amplitude - 1e-15);
    }
}

#[test]
fn invalid_parameters_are_rejected() {
    let mut p = ValuationParams::default();
    p.a_y = p.base.kappa_y * 1.5;
    assert!(build_k3p3_valuation(&p).is_err());
    for delta in [1.0, 1.5] {
        let q = K3p3Params {
            delta_q: delta,
            ..K3p3Params::default()
        };
        assert!(build_k3p3(&q).is_err());
        let w = K3p3Params {
            delta_w: delta,
            ..K3p3Params::default()
        };
        assert!(build_k3p3(&w).is_err());
    }
}

#[test]
fn coarse_grain_classes() {
    let cfg = build_k3p3(&K3p3Params::default()).unwrap();
    let report = coarse_grain_report(&cfg, 0, 500);
    assert_eq!(report.len(), 9);
    assert!(report.iter().all(|c| c.pass), "{report:?}");

    let mut no_floor = cfg.clone();
    no_floor.arch.eps_q = 0.0;
    let report = coarse_grain_report(&no_floor, 0, 500);
    for c in &report {
        assert_eq!(c.pass, c.class != "A_Q", "{c:?}");
    }

    let mut full = build_k3p3_full(&ValuationParams::default()).unwrap();
    let lambda_reg = full.params.policy.lambda_reg;
    full.params.policy.eta = vec![1.5 / lambda_reg; full.arch.policies.len()];
    let report = coarse_grain_report(&full, 0, 500);
    let theta = report.iter().find(|c| c.class == "A_theta").unwrap();
    assert!(!theta.pass && (theta.measured - 1.5).abs() <= 1e-12);
}

#[test]
fn small_gain_closed_forms() {
    let (ok, a_l, a_r) = small_gain_check(0.0, 2.0, 3.0).unwrap();
    assert!(ok && a_l == 1.0 && a_r == 1.5);
    // C² = μ_L μ_R exactly: both margins vanish and the check fails
    let (ok, a_l, a_r) = small_gain_check(2.0, 1.0, 4.0).unwrap();
    assert!(!ok && a_l == 0.0 && a_r == 0.0);
    assert!(small_gain_check(1.99, 1.0, 4.0).unwrap().0);
    assert!(small_gain_check(0.1, 0.0, 1.0).is_err());
    assert!(small_gain_check(0.1, 1.0, -1.0).is_err());
}

#[test]
fn radial_margin_equality_passes() {
    let (r_l, r_r, c) = (2.0, 3.0, 0.5);
    assert!(radial_margin_check(3.0, 3.0, r_l, r_r, c));
    assert!(!radial_margin_check(3.0 - 1e-12, 3.0, r_l, r_r, c));
    assert!(!radial_margin_check(3.0, 2.9, r_l, r_r, c));
}

fn perturbed_history(cfg: &symgeo_core::SystemConfig, eq: &StateVector, scale: f64, seed: u64) -> HistoryBuffer {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let depth = cfg.arch.history_depth();
    let states = (0..=depth)
        .map(|_| {
            let noise = random_state(&cfg.arch, &mut rng);
            let mut z = eq.clone();
            for (a, b) in z.h.as_mut_slice().iter_mut().zip(noise.h.as_slice()) {
                *a += scale * b;
            }
            for (a, b) in z.x.as_mut_slice().iter_mut().zip(noise.x.as_slice()) {
                *a += scale * b;
            }
            for (a, b) in z.p.iter_mut().zip(&noise.p) {
                *a += scale * b;
            }
            z
        })
        .collect();
    HistoryBuffer::from_states(states, depth).unwrap()
}

#[test]
fn lyapunov_value_cases() {
    let cfg = build_k3p3(&K3p3Params::default()).unwrap();
    let eq = cfg.equilibrium.clone().unwrap();
    let (n_rl, n_lr) = cfg.arch.delay_indices();
    let dt = cfg.arch.dt;
    let c = LkConstants::from_config(&cfg);
    let at_eq = HistoryBuffer::constant(eq.clone(), cfg.arch.history_depth());
    assert_eq!(lyapunov_value(&at_eq, n_rl, n_lr, dt, &c, &eq).unwrap(), 0.0);

    let h1 = perturbed_history(&cfg, &eq, 0.1, 4);
    let uncoupled = LkConstants { c_k: 0.0, ..c };
    let z = h1.current();
    let sq = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>();
    let direct = 0.5 * (sq(z.h.as_slice(), eq.h.as_slice()) + sq(z.x.as_slice(), eq.x.as_slice()) + sq(&z.p, &eq.p));
    let v0 = lyapunov_value(&h1, n_rl, n_lr, dt, &uncoupled, &eq).unwrap();
    assert!((v0 - direct).abs() <= 1e-15 * direct.max(1.0));

    let h2 = perturbed_history(&cfg, &eq, 0.2, 4);
    let v1 = lyapunov_value(&h1, n_rl, n_lr, dt, &c, &eq).unwrap();
    let v2 = lyapunov_value(&h2, n_rl, n_lr, dt, &c, &eq).unwrap();
    assert!((v2 - 4.0 * v1).abs() <= 1e-12 * v2, "{v2} vs 4 x {v1}");
}

#[test]
fn one_sided_lipschitz_cases() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut sampler = move || {
        use rand::Rng;
        let a: Vec<f64> = (0..4).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let b: Vec<f64> = (0..4).map(|_| rng.gen_range(-2.0..2.0)).collect();
        (a, b)
    };
    let neg = one_sided_lipschitz_estimate(|x| x.iter().map(|v| -v).collect(), &mut sampler, 500);
    assert!((neg + 1.0).abs() <= 1e-12);
    let id = one_sided_lipschitz_estimate(|x| x.to_vec(), &mut sampler, 500);
    assert!((id - 1.0).abs() <= 1e-12);
    // W = 0.3 × rotation, so ‖W‖ = 0.3
    let w = [
        [0.0, 0.3, 0.0, 0.0],
        [-0.3, 0.0, 0.0, 0.0],
        [0.0, 0.0, 0.0, 0.3],
        [0.0, 0.0, 0.3, 0.0],
    ];
    let f = |x: &[f64]| -> Vec<f64> {
        (0..4)
            .map(|i| -x[i] + (0..4).map(|j| w[i][j] * x[j]).sum::<f64>().tanh())
            .collect()
    };
    let est = one_sided_lipschitz_estimate(f, &mut sampler, 2000);
    assert!(est <= -0.7 + 1e-12, "estimate {est}");
}

#[test]
fn crossgain_structure() {
    let (m, min_eig) = executive_crossgain(0.4, 0.6, 0.0, 0.0, 0.0, 1.0, 1.0, 0.8);
    for (i, row) in m.iter().enumerate() {
        for (j, v) in row.iter().enumerate() {
            if i != j {
                assert_eq!(*v, 0.0);
            }
        }
    }
    assert!((min_eig - 0.4).abs() <= 1e-12);

    // With only c_PH active the determinant of the (H, P) block vanishes at
    // c_PH = 2 √(ω_L μ_P).
    let (omega_l, omega_r, mu_p) = (0.4, 0.6, 0.8);
    let eig = |c: f64| executive_crossgain(omega_l, omega_r, c, 0.0, 0.0, 0.0, 0.0, mu_p).1;
    let (mut lo, mut hi) = (0.0, 10.0);
    assert!(eig(lo) > 0.0 && eig(hi) < 0.0);
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if eig(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let want = 2.0 * (omega_l * mu_p).sqrt();
    assert!((lo - want).abs() <= 1e-9, "{lo} vs {want}");
}

#[test]
fn scenarios_are_deterministic() {
    for name in SCENARIO_NAMES {
        let a = by_name(name).unwrap().unwrap();
        let b = by_name(name).unwrap().unwrap();
        assert_eq!(a, b);
        a.validate().unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let h = random_history(&a.arch, &mut rng).unwrap();
        let ta = integrate(&a, h.clone(), 300, RecordOptions { every: 50 }).unwrap();
        let tb = integrate(&b, h, 300, RecordOptions { every: 50 }).unwrap();
        assert_eq!(ta, tb);
    }
    assert!(by_name("no-such-scenario").is_none());
}
