//! Acceptance suite. Runs every criterion at its stated tolerance, prints one
//! PASS/FAIL line per criterion and exits nonzero if any fails.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use symgeo_core::coupling::example_channel;
use symgeo_core::dynamics::audit::verify;
use symgeo_core::dynamics::{relaxation_field, Audit, Carry};
use symgeo_core::integrator::{find_equilibrium, interpolated_history, random_history, Integrator};
use symgeo_core::scenarios::{
    build_k3p3, build_k3p3_closed, build_k3p3_full, build_k3p3_valuation, sample_config, K3p3Params, ValuationParams,
};
use symgeo_core::simplex::{sparsemax, tangent_cone_ok, ConvexComponentSpec};
use symgeo_core::stability::{
    quasi_steady_valuation, sampled_constants, slowfast_bound_check, LkConstants, LyapunovTracker, StabilityReport,
};
use symgeo_core::state::{project_state, random_state, validate_state};
use symgeo_core::{StateVector, SystemConfig, WeightedGraph};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn within(elapsed: Duration, limit: Duration) -> bool {
    elapsed <= limit
}

/// Principal distance to `H* = X* = e1`, `P* = 0`, written out by hand.
fn distance_to_e1(z: &StateVector) -> f64 {
    let e1 = [1.0, 0.0, 0.0];
    let mut s = 0.0;
    for (a, b) in z.h.as_slice().iter().zip(e1) {
        s += (a - b) * (a - b);
    }
    for (a, b) in z.x.as_slice().iter().zip(e1) {
        s += (a - b) * (a - b);
    }
    s += z.p.iter().map(|v| v * v).sum::<f64>();
    s.sqrt()
}

fn spectral_gaps() -> Outcome {
    let t = Instant::now();
    let k3 = WeightedGraph::complete(3, 1.0).unwrap().spectral_gap().unwrap();
    let p3 = WeightedGraph::path(3, 1.0).unwrap().spectral_gap().unwrap();
    let el = t.elapsed();
    let pass = (k3 - 3.0).abs() <= 1e-9 && (p3 - 1.0).abs() <= 1e-9 && within(el, Duration::from_secs(1));
    outcome(pass, format!("lambda2(K3) = {k3:.12}, lambda2(P3) = {p3:.12}, {el:?}"))
}

fn channel_norm() -> Outcome {
    let t = Instant::now();
    let n = example_channel().hs_norm();
    let el = t.elapsed();
    let want = 15f64.sqrt() / 2.0;
    let pass = (n - want).abs() <= 1e-12 && within(el, Duration::from_secs(1));
    outcome(
        pass,
        format!("hs_norm = {n:.15}, |err| = {:.1e}, {el:?}", (n - want).abs()),
    )
}

fn equilibria() -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for (name, cfg) in [
        ("k3p3", build_k3p3(&K3p3Params::default()).unwrap()),
        (
            "k3p3-valuation",
            build_k3p3_valuation(&ValuationParams::default()).unwrap(),
        ),
    ] {
        let t = Instant::now();
        let eq = find_equilibrium(&cfg, 1e-12, 100_000).unwrap();
        let el = t.elapsed();
        let d = distance_to_e1(&eq.state);
        let y = eq.state.y.iter().map(|v| v * v).sum::<f64>().sqrt();
        let ok = eq.residual <= 1e-10 && d <= 1e-10 && y <= 1e-10 && within(el, Duration::from_secs(5));
        pass &= ok;
        parts.push(format!(
            "{name}: residual {:.1e}, |Z - Z*| {d:.1e}, |Y| {y:.1e}, {el:?}",
            eq.residual
        ));
    }
    outcome(pass, parts.join("; "))
}

fn delayed_convergence() -> Outcome {
    let t = Instant::now();
    let taus = [0.0, 0.5, 2.0, 10.0];
    let results: Vec<(f64, u64, f64)> = std::thread::scope(|s| {
        let handles: Vec<_> = taus
            .iter()
            .flat_map(|&tau| (0..5u64).map(move |seed| (tau, seed)))
            .map(|(tau, seed)| {
                s.spawn(move || {
                    let p = K3p3Params {
                        tau,
                        dt: 1e-3,
                        ..K3p3Params::default()
                    };
                    let cfg = build_k3p3(&p).unwrap();
                    let mut rng = ChaCha8Rng::seed_from_u64(1000 + seed);
                    let history = random_history(&cfg.arch, &mut rng).unwrap();
                    let mut integ = Integrator::new(&cfg, history).unwrap();
                    integ.run(200_000).unwrap();
                    (tau, seed, distance_to_e1(integ.current()))
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().unwrap()).collect()
    });
    let el = t.elapsed();
    let worst = results.iter().map(|r| r.2).fold(0.0, f64::max);
    let pass = results.len() == 20 && worst <= 1e-6 && within(el, Duration::from_secs(300));
    outcome(
        pass,
        format!("{} runs, worst final error {worst:.1e}, {el:?}", results.len()),
    )
}

/// Largest dissipation-inequality increment rate in the closed regime, from
/// a perturbed history around `Z*`. Its positive part is the violation.
fn closed_increment(dt: f64, seed: u64) -> f64 {
    let p = K3p3Params {
        dt,
        ..K3p3Params::default()
    };
    let cfg = build_k3p3_closed(&p).unwrap();
    let eq = cfg.equilibrium.clone().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let perturbed = |rng: &mut ChaCha8Rng| {
        let mut z = eq.clone();
        for v in
            z.h.as_mut_slice()
                .iter_mut()
                .chain(z.x.as_mut_slice())
                .chain(z.p.iter_mut())
        {
            *v += rng.gen_range(-0.4..0.4);
        }
        project_state(&z, &cfg.arch).unwrap()
    };
    let a = perturbed(&mut rng);
    let b = perturbed(&mut rng);
    let history = interpolated_history(&cfg.arch, &a, &b).unwrap();
    let (n_rl, n_lr) = cfg.arch.delay_indices();
    let mut tracker = LyapunovTracker::new(LkConstants::from_config(&cfg), n_rl, n_lr, dt, eq, history.iter());
    let mut integ = Integrator::new(&cfg, history).unwrap();
    let steps = (10.0 / dt).round() as u64;
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..steps {
        integ.step().unwrap();
        worst = worst.max(tracker.push(integ.current()));
    }
    worst
}

fn lyapunov_decrease() -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for seed in 0..3 {
        let (raw_coarse, raw_fine) = (closed_increment(1e-3, seed), closed_increment(1e-4, seed));
        let (coarse, fine) = (raw_coarse.max(0.0), raw_fine.max(0.0));
        pass &= coarse <= 1e-2 && fine <= coarse / 5.0;
        parts.push(format!(
            "seed {seed}: {coarse:.2e} -> {fine:.2e} (signed max {raw_coarse:.2e}, {raw_fine:.2e})"
        ));
    }
    outcome(
        pass,
        format!("max positive rate (dt 1e-3 -> 1e-4) {}", parts.join(", ")),
    )
}

/// Push `z` onto faces of every relaxation-form component.
fn to_boundary(z: &mut StateVector, cfg: &SystemConfig, rng: &mut ChaCha8Rng) {
    let arch = &cfg.arch;
    let onto_sphere = |v: &mut [f64], r: f64, rng: &mut ChaCha8Rng| {
        let mut n = v.iter().map(|a| a * a).sum::<f64>().sqrt();
        if n == 0.0 {
            v.iter_mut().for_each(|a| *a = rng.gen_range(-1.0..1.0));
            n = v.iter().map(|a| a * a).sum::<f64>().sqrt();
        }
        v.iter_mut().for_each(|a| *a *= r / n);
    };
    onto_sphere(&mut z.y, arch.radii.y, rng);
    onto_sphere(&mut z.p, arch.radii.p, rng);
    onto_sphere(&mut z.m, arch.radii.m, rng);
    for (k, spec) in arch.policies.iter().enumerate() {
        onto_sphere(&mut z.traces[k], spec.r_z, rng);
        onto_sphere(&mut z.policies[k], spec.r_theta, rng);
    }
    for q in &mut z.q {
        *q = if rng.gen_bool(0.5) { arch.eps_q } else { arch.r_q };
    }
    for rho in &mut z.rho {
        *rho = if rng.gen_bool(0.5) { 0.0 } else { 1.0 };
    }
    let zero_one = |v: &mut [f64], rng: &mut ChaCha8Rng| {
        if v.len() < 2 {
            return;
        }
        let k = rng.gen_range(0..v.len());
        v[k] = 0.0;
        let s: f64 = v.iter().sum();
        if s > 0.0 {
            v.iter_mut().for_each(|a| *a /= s);
        } else {
            v[(k + 1) % v.len()] = 1.0;
        }
    };
    for group in arch.graph_r.in_edges() {
        let mut vals: Vec<f64> = group.iter().map(|e| z.w[*e]).collect();
        zero_one(&mut vals, rng);
        for (e, v) in group.iter().zip(vals) {
            z.w[*e] = v;
        }
    }
    for i in 0..arch.n_s {
        zero_one(z.routing.row_mut(i), rng);
    }
}

/// Tangent-cone condition of the relaxation field at `z` for every
/// relaxation-form component. Returns the first failing component.
fn cone_failure(cfg: &SystemConfig, z: &StateVector) -> Option<String> {
    let arch = &cfg.arch;
    let input = cfg.input.at(0, arch);
    let carry = Carry::steady(cfg, &input.u);
    let v = relaxation_field(cfg, z, &carry, &input).unwrap();
    let tol = 1e-9;
    let ball = |name: &str, x: &[f64], dx: &[f64], r: f64| {
        (!tangent_cone_ok(&ConvexComponentSpec::Ball(r), x, dx, tol).unwrap()).then(|| name.to_string())
    };
    let boxed = ConvexComponentSpec::Box {
        lower: vec![arch.eps_q; z.q.len()],
        upper: vec![arch.r_q; z.q.len()],
    };
    if !tangent_cone_ok(&boxed, &z.q, &v.q, tol).unwrap() {
        return Some("q".into());
    }
    let unit = ConvexComponentSpec::Box {
        lower: vec![0.0; z.rho.len()],
        upper: vec![1.0; z.rho.len()],
    };
    if !tangent_cone_ok(&unit, &z.rho, &v.rho, tol).unwrap() {
        return Some("rho".into());
    }
    for group in arch.graph_r.in_edges().iter().filter(|g| !g.is_empty()) {
        let x: Vec<f64> = group.iter().map(|e| z.w[*e]).collect();
        let dx: Vec<f64> = group.iter().map(|e| v.w[*e]).collect();
        if !tangent_cone_ok(&ConvexComponentSpec::Simplex(x.len()), &x, &dx, tol).unwrap() {
            return Some("w".into());
        }
    }
    for i in 0..arch.n_s {
        if !tangent_cone_ok(
            &ConvexComponentSpec::Simplex(arch.n_s),
            z.routing.row(i),
            v.routing.row(i),
            tol,
        )
        .unwrap()
        {
            return Some("routing".into());
        }
    }
    ball("y", &z.y, &v.y, arch.radii.y)
        .or_else(|| ball("p", &z.p, &v.p, arch.radii.p))
        .or_else(|| ball("m", &z.m, &v.m, arch.radii.m))
        .or_else(|| {
            arch.policies.iter().enumerate().find_map(|(k, s)| {
                ball("traces", &z.traces[k], &v.traces[k], s.r_z)
                    .or_else(|| ball("policies", &z.policies[k], &v.policies[k], s.r_theta))
            })
        })
}

fn forward_invariance() -> Outcome {
    let t = Instant::now();
    let configs: u64 = 100;
    let results: Vec<(usize, usize, Option<String>)> = std::thread::scope(|s| {
        let handles: Vec<_> = (0..configs)
            .map(|i| {
                s.spawn(move || {
                    let mut rng = ChaCha8Rng::seed_from_u64(5000 + i);
                    let cfg = sample_config(&mut rng).unwrap();
                    let history = random_history(&cfg.arch, &mut rng).unwrap();
                    let mut integ = Integrator::new(&cfg, history).unwrap();
                    let mut violations = 0;
                    for _ in 0..10_000 {
                        match integ.step() {
                            Ok(()) => violations += validate_state(integ.current(), &cfg.arch).unwrap().len(),
                            Err(_) => {
                                violations += 1;
                                break;
                            }
                        }
                    }
                    let mut cone = None;
                    let mut checked = 0;
                    for _ in 0..20 {
                        let mut z = random_state(&cfg.arch, &mut rng);
                        to_boundary(&mut z, &cfg, &mut rng);
                        checked += 1;
                        if let Some(c) = cone_failure(&cfg, &z) {
                            cone = Some(c);
                            break;
                        }
                    }
                    (violations, checked, cone)
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().unwrap()).collect()
    });
    let el = t.elapsed();
    let violations: usize = results.iter().map(|r| r.0).sum();
    let boundary: usize = results.iter().map(|r| r.1).sum();
    let cone: Vec<&String> = results.iter().filter_map(|r| r.2.as_ref()).collect();
    let pass = violations == 0 && cone.is_empty();
    outcome(
        pass,
        format!("{configs} configs x 1e4 steps: {violations} violations; {boundary} boundary states, cone failures {cone:?}, {el:?}"),
    )
}

/// Euclidean projection onto the simplex by enumerating supports: for each
/// support the KKT point is `z_S − τ` with `τ = (Σ_S z − 1)/|S|`; keep the
/// feasible candidate nearest to `z`.
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
    best.expect("the full support of a shifted vector is never empty of candidates")
        .1
}

fn sparsemax_projection() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let mut worst: f64 = 0.0;
    let mut expansion: f64 = f64::NEG_INFINITY;
    for _ in 0..10_000 {
        let d = rng.gen_range(2..=6);
        let a: Vec<f64> = (0..d).map(|_| rng.gen_range(-3.0..3.0)).collect();
        let b: Vec<f64> = (0..d).map(|_| rng.gen_range(-3.0..3.0)).collect();
        let pa = sparsemax(&a);
        let oracle = brute_force_projection(&a);
        worst = worst.max(pa.iter().zip(&oracle).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max));
        let pb = sparsemax(&b);
        let num = pa.iter().zip(&pb).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
        let den = a.iter().zip(&b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
        expansion = expansion.max(num - den);
    }
    let pass = worst <= 1e-9 && expansion <= 1e-12;
    outcome(
        pass,
        format!("max |sparsemax - QP| {worst:.1e}, max (|dP| - |dz|) {expansion:.1e}"),
    )
}

fn sampled_dissipativity() -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for (name, cfg) in [
        ("k3p3", build_k3p3(&K3p3Params::default()).unwrap()),
        (
            "k3p3-valuation",
            build_k3p3_valuation(&ValuationParams::default()).unwrap(),
        ),
    ] {
        let s = sampled_constants(&cfg, 11, 10_000);
        let d = &cfg.declared;
        pass &= s.f_l <= -0.9 * d.mu_l && s.f_r <= -0.9 * d.mu_r && s.p <= -0.9 * d.mu_p;
        parts.push(format!(
            "{name}: F_L {:.4} (mu {}), F_R {:.4} (mu {}), P {:.4} (mu {})",
            s.f_l, d.mu_l, s.f_r, d.mu_r, s.p, d.mu_p
        ));
    }
    outcome(pass, parts.join("; "))
}

fn slow_fast_tracking() -> Outcome {
    let mut p = ValuationParams::default();
    p.base.kappa_y = 10.0;
    p.base.dt = 1e-3;
    let cfg = build_k3p3_valuation(&p).unwrap();
    let mut worst = f64::NEG_INFINITY;
    let mut g1: f64 = 0.0;
    for seed in 0..3 {
        let mut rng = ChaCha8Rng::seed_from_u64(900 + seed);
        let history = random_history(&cfg.arch, &mut rng).unwrap();
        let mut integ = Integrator::new(&cfg, history).unwrap();
        let (mut ys, mut phis) = (Vec::new(), Vec::new());
        for _ in 0..20_000 {
            let z = integ.current().clone();
            let carry = integ.carry().clone();
            let input = integ.next_input();
            integ.step().unwrap();
            ys.push(z.y.clone());
            phis.push(quasi_steady_valuation(&cfg, &z, integ.current(), &carry, &input));
        }
        let r = slowfast_bound_check(1e-3, &ys, &phis, 10.0).unwrap();
        worst = worst.max(r.max_violation);
        g1 = g1.max(r.g1);
    }
    outcome(
        worst <= 1e-3,
        format!("max excess over bound {worst:.2e} (G1 {g1:.3e})"),
    )
}

fn strengthened_margin() -> Outcome {
    let cfg = build_k3p3(&K3p3Params::default()).unwrap();
    let r = StabilityReport::compute(&cfg, 0, 1000).unwrap();
    let want = 15f64.sqrt() / 2.0 * 0.05 + 0.15;
    let m = r.m_sdc.unwrap_or(f64::NAN);
    let pass = (m - want).abs() <= 1e-12 && r.c_k * r.c_k + m * m < 1.0 && r.strengthened_ok == Some(true);
    outcome(
        pass,
        format!(
            "M_sdc {m:.6} (closed form {want:.6}), C_K^2 + M^2 = {:.4}",
            r.c_k * r.c_k + m * m
        ),
    )
}

fn stage_causality() -> Outcome {
    let cfg = build_k3p3_full(&ValuationParams::default()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let history = random_history(&cfg.arch, &mut rng).unwrap();
    let mut integ = Integrator::new(&cfg, history).unwrap();
    let mut audit = Audit::new();
    integ.step_audited(&mut audit).unwrap();
    match verify(&audit) {
        Ok(()) => outcome(true, format!("{} stages, acyclic, table matches", audit.records.len())),
        Err(e) => outcome(false, e),
    }
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() -> ExitCode {
    let criteria: [Criterion; 11] = [
        ("spectral gaps of K3 and P3", spectral_gaps),
        ("Hilbert-Schmidt norm of the example channel", channel_norm),
        ("equilibrium solver recovers Z*", equilibria),
        ("convergence for every delay and history", delayed_convergence),
        ("Lyapunov-Krasovskii decrease in the closed regime", lyapunov_decrease),
        ("forward invariance and tangent cones", forward_invariance),
        ("sparsemax equals the simplex projection", sparsemax_projection),
        ("sampled one-sided constants", sampled_dissipativity),
        ("slow-fast valuation tracking", slow_fast_tracking),
        ("strengthened small-gain margin", strengthened_margin),
        ("stage dependency graph", stage_causality),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let o = run();
        println!(
            "criterion {:>2} {}: {} ({})",
            i + 1,
            if o.pass { "PASS" } else { "FAIL" },
            name,
            o.detail
        );
        failed += usize::from(!o.pass);
    }
    println!(
        "acceptance: {} of {} criteria pass",
        criteria.len() - failed,
        criteria.len()
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
