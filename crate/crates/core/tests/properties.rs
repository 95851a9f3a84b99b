//! Property tests. Each compares against an independent oracle: a dense
//! eigen-solver, an exhaustive quadratic program, direct sums or a second
//! code path through the integrator.

use nalgebra::{DMatrix, SymmetricEigen};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use symgeo_core::coupling::CouplingKernel;
use symgeo_core::integrator::{random_history, Integrator};
use symgeo_core::scenarios::{build_k3p3, build_k3p3_full, sample_config, K3p3Params, ValuationParams};
use symgeo_core::simplex::{epsilon_floor, project_ball, sparsemax};
use symgeo_core::stability::{lyapunov_value, small_gain_check, LkConstants, LyapunovTracker};
use symgeo_core::state::{project_state, random_state, validate_state};
use symgeo_core::{HistoryBuffer, Mat, WeightedGraph};

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Random undirected graph: upper-triangle weights in `[0, 2)`, zero
/// meaning no edge.
fn graph_strategy() -> impl Strategy<Value = (usize, Vec<f64>)> {
    (2usize..=6).prop_flat_map(|n| {
        (
            Just(n),
            prop::collection::vec(prop_oneof![Just(0.0), 0.0..2.0f64], n * (n - 1) / 2),
        )
    })
}

fn build_graph(n: usize, upper: &[f64]) -> (WeightedGraph, DMatrix<f64>) {
    let mut edges = Vec::new();
    let mut weights = Vec::new();
    let mut dense = DMatrix::<f64>::zeros(n, n);
    let mut k = 0;
    for i in 0..n {
        for j in i + 1..n {
            let w = upper[k];
            k += 1;
            if w > 0.0 {
                edges.push([i, j]);
                edges.push([j, i]);
                weights.push(w);
                weights.push(w);
                dense[(i, j)] -= w;
                dense[(j, i)] -= w;
                dense[(i, i)] += w;
                dense[(j, j)] += w;
            }
        }
    }
    (WeightedGraph::new(n, edges, weights).unwrap(), dense)
}

fn brute_force_projection(z: &[f64]) -> Vec<f64> {
    let d = z.len();
    let mut best: Option<(f64, Vec<f64>)> = None;
    for mask in 1u32..(1 << d) {
        let support: Vec<usize> = (0..d).filter(|i| mask & (1 << i) != 0).collect();
        let tau = (support.iter().map(|&i| z[i]).sum::<f64>() - 1.0) / support.len() as f64;
        let mut p = vec![0.0; d];
        for &i in &support {
            p[i] = z[i] - tau;
        }
        if p.iter().any(|v| *v < -1e-15) {
            continue;
        }
        let dist: f64 = p.iter().zip(z).map(|(a, b)| (a - b) * (a - b)).sum();
        if best.as_ref().is_none_or(|(bd, _)| dist < *bd) {
            best = Some((dist, p));
        }
    }
    best.unwrap().1
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn laplacian_spectrum_matches_dense_solver((n, upper) in graph_strategy()) {
        let (g, dense) = build_graph(n, &upper);
        let mut want: Vec<f64> = SymmetricEigen::new(dense).eigenvalues.iter().copied().collect();
        want.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let got = g.laplacian_spectrum().unwrap();
        for (a, b) in got.iter().zip(&want) {
            prop_assert!((a - b).abs() <= 1e-9, "{got:?} vs {want:?}");
        }
        prop_assert_eq!(g.spectral_gap().unwrap() > 1e-9, g.is_connected() || n == 1);
    }

    #[test]
    fn sparsemax_is_the_simplex_projection(z in prop::collection::vec(-5.0..5.0f64, 2..=6), shift in -3.0..3.0f64) {
        let p = sparsemax(&z);
        let oracle = brute_force_projection(&z);
        for (a, b) in p.iter().zip(&oracle) {
            prop_assert!((a - b).abs() <= 1e-9);
        }
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
        prop_assert!(p.iter().all(|v| *v >= 0.0));
        let shifted: Vec<f64> = z.iter().map(|v| v + shift).collect();
        let q = sparsemax(&shifted);
        for (a, b) in p.iter().zip(&q) {
            prop_assert!((a - b).abs() <= 1e-12);
        }
    }

    #[test]
    fn projections_are_nonexpansive(
        a in prop::collection::vec(-4.0..4.0f64, 1..8),
        b in prop::collection::vec(-4.0..4.0f64, 1..8),
        r in 0.1..3.0f64,
    ) {
        let d = a.len().min(b.len());
        let (a, b) = (&a[..d], &b[..d]);
        let dz = norm(&a.iter().zip(b).map(|(x, y)| x - y).collect::<Vec<_>>());
        let (pa, pb) = (project_ball(a, r), project_ball(b, r));
        prop_assert!(norm(&pa.iter().zip(&pb).map(|(x, y)| x - y).collect::<Vec<_>>()) <= dz + 1e-12);
        prop_assert!(norm(&pa) <= r + 1e-12);
        let (sa, sb) = (sparsemax(a), sparsemax(b));
        prop_assert!(norm(&sa.iter().zip(&sb).map(|(x, y)| x - y).collect::<Vec<_>>()) <= dz + 1e-12);
    }

    #[test]
    fn epsilon_floor_bounds_entries(z in prop::collection::vec(-3.0..3.0f64, 2..=6), eps in 0.0..1.0f64) {
        let p = epsilon_floor(&sparsemax(&z), eps).unwrap();
        let d = z.len() as f64;
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
        prop_assert!(p.iter().all(|v| *v >= eps / d - 1e-15));
    }

    #[test]
    fn fixed_kernel_norm_is_the_frobenius_sum(
        t in 1usize..4, n in 1usize..4, d_l in 1usize..3, d_r in 1usize..3, seed in any::<u64>(),
    ) {
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let blocks: Vec<Mat> = (0..t * n)
            .map(|_| Mat::from_row_major(d_l, d_r, (0..d_l * d_r).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap())
            .collect();
        let direct = blocks.iter().flat_map(|b| b.as_slice().iter()).map(|v| v * v).sum::<f64>().sqrt();
        let k = CouplingKernel::Fixed { tokens: t, nodes: n, blocks };
        prop_assert!((k.hs_norm() - direct).abs() <= 1e-12 * direct.max(1.0));
    }

    #[test]
    fn small_gain_iff_positive_margins(c in 0.0..3.0f64, mu_l in 0.01..3.0f64, mu_r in 0.01..3.0f64, a in -1.0..1.0f64, b in -1.0..1.0f64) {
        let (ok, al, ar) = small_gain_check(c, mu_l, mu_r).unwrap();
        prop_assert_eq!(ok, al > 0.0 && ar > 0.0);
        if ok && (a != 0.0 || b != 0.0) {
            prop_assert!(mu_l * a * a + mu_r * b * b - 2.0 * c * a.abs() * b.abs() > 0.0);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn projection_is_idempotent_and_lands_in_the_domain(seed in any::<u64>(), scale in 1.0..4.0f64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let cfg = sample_config(&mut rng).unwrap();
        let mut z = random_state(&cfg.arch, &mut rng);
        prop_assert!(validate_state(&z, &cfg.arch).unwrap().is_empty());
        prop_assert!(project_state(&z, &cfg.arch).unwrap().distance(&z) <= 1e-12);
        for v in z.h.as_mut_slice().iter_mut().chain(z.y.iter_mut()).chain(z.q.iter_mut()).chain(z.w.iter_mut()) {
            *v *= scale;
            *v += 0.3;
        }
        let p = project_state(&z, &cfg.arch).unwrap();
        prop_assert!(validate_state(&p, &cfg.arch).unwrap().is_empty());
        prop_assert!(project_state(&p, &cfg.arch).unwrap().distance(&p) <= 1e-12);
    }

    #[test]
    fn resume_from_checkpoint_is_bit_identical(seed in any::<u64>(), first in 0u64..150, second in 1u64..150) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let cfg = sample_config(&mut rng).unwrap();
        let history = random_history(&cfg.arch, &mut rng).unwrap();
        let mut straight = Integrator::new(&cfg, history.clone()).unwrap();
        straight.run(first + second).unwrap();
        let mut split = Integrator::new(&cfg, history).unwrap();
        split.run(first).unwrap();
        let ck = split.checkpoint();
        let mut resumed = Integrator::from_checkpoint(&cfg, ck).unwrap();
        resumed.run(second).unwrap();
        prop_assert_eq!(straight.current(), resumed.current());
        prop_assert_eq!(straight.carry(), resumed.carry());
        prop_assert_eq!(straight.steps_done(), resumed.steps_done());
    }

    #[test]
    fn tracker_matches_direct_lyapunov_differences(seed in any::<u64>(), tau in prop::sample::select(vec![0.0, 0.003, 0.01])) {
        let p = K3p3Params { tau, ..K3p3Params::default() };
        let cfg = build_k3p3(&p).unwrap();
        let eq = cfg.equilibrium.clone().unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let history = random_history(&cfg.arch, &mut rng).unwrap();
        let (n_rl, n_lr) = cfg.arch.delay_indices();
        let dt = cfg.arch.dt;
        let c = LkConstants::from_config(&cfg);
        let mut tracker = LyapunovTracker::new(c, n_rl, n_lr, dt, eq.clone(), history.iter());
        let mut integ = Integrator::new(&cfg, history).unwrap();
        for _ in 0..40 {
            let before: HistoryBuffer = integ.history().clone();
            let v0 = lyapunov_value(&before, n_rl, n_lr, dt, &c, &eq).unwrap();
            prop_assert!((tracker.value() - v0).abs() <= 1e-10 * v0.max(1.0));
            integ.step().unwrap();
            let v1 = lyapunov_value(integ.history(), n_rl, n_lr, dt, &c, &eq).unwrap();
            let z = before.current();
            let sq = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>();
            let direct = (v1 - v0) / dt
                + c.alpha_l() * sq(z.h.as_slice(), eq.h.as_slice())
                + c.alpha_r() * sq(z.x.as_slice(), eq.x.as_slice())
                + c.mu_p * sq(&z.p, &eq.p);
            let rate = tracker.push(integ.current());
            prop_assert!((rate - direct).abs() <= 1e-6 * direct.abs().max(1.0), "{rate} vs {direct}");
        }
    }
}

/// Projected Euler is first order: successive differences of the endpoint
/// under step halving shrink by a factor close to two.
#[test]
fn euler_refinement_is_first_order() {
    let endpoint = |dt: f64| {
        let p = K3p3Params {
            tau: 0.0,
            dt,
            ..K3p3Params::default()
        };
        let cfg = build_k3p3(&p).unwrap();
        let mut z = cfg.equilibrium.clone().unwrap();
        for (i, v) in z.h.as_mut_slice().iter_mut().enumerate() {
            *v += 0.3 * (i as f64 + 1.0);
        }
        z.x.as_mut_slice()[2] -= 0.5;
        let mut integ = Integrator::constant(&cfg, z).unwrap();
        integ.run((1.0 / dt).round() as u64).unwrap();
        let s = integ.current();
        let mut v = s.h.as_slice().to_vec();
        v.extend_from_slice(s.x.as_slice());
        v
    };
    let (a, b, c) = (endpoint(4e-3), endpoint(2e-3), endpoint(1e-3));
    let d1 = norm(&a.iter().zip(&b).map(|(x, y)| x - y).collect::<Vec<_>>());
    let d2 = norm(&b.iter().zip(&c).map(|(x, y)| x - y).collect::<Vec<_>>());
    let ratio = d1 / d2;
    assert!((1.8..2.2).contains(&ratio), "refinement ratio {ratio}");
}

/// The full scenario carries every auxiliary; a long run stays finite and
/// in the domain.
#[test]
fn full_scenario_stays_in_domain() {
    let cfg = build_k3p3_full(&ValuationParams::default()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut integ = Integrator::new(&cfg, random_history(&cfg.arch, &mut rng).unwrap()).unwrap();
    for _ in 0..20 {
        integ.run(500).unwrap();
        assert!(integ.current().is_finite().is_none());
        assert!(validate_state(integ.current(), &cfg.arch).unwrap().is_empty());
    }
}
