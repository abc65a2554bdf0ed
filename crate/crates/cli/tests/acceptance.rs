//! End-to-end acceptance checks. Each criterion prints one PASS/FAIL line;
//! the process exits nonzero if any fails.
//!
//! `SSK_ACCEPTANCE=quick` skips the long Monte Carlo criteria (6 to 10).

use std::process::Command;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use ssk::cavity1d::{nu0_monomial_quadrature, phi_max_numeric, x0_closed_form, CavityDensityParams, DEFAULT_HERMITE_ORDER};
use ssk::fluctuation::LIMIT_NAMES;
use ssk::moment_engine::{compute_v, nu0_monomial, relations_table, v1_by_expansion};
use ssk::simulator::{run_experiment, thermo_integrate_free_energy, uniform_grid, ExperimentReport, SimConfig};
use ssk::{limiting_covariances, rs_point, MixturePolynomial, MixtureTerm, RSPoint, ReplicaMonomial};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn sk() -> MixturePolynomial {
    MixturePolynomial::pure(2, 1.0).unwrap()
}

fn headline() -> RSPoint {
    rs_point(&sk(), 0.2, 0.3, 1e-12).unwrap()
}

/// Random points with beta in [0, 0.3], h in [0, 0.5] and mixtures over degrees 2 to 4.
fn random_points(count: usize) -> Vec<RSPoint> {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    (0..count)
        .map(|_| {
            let terms: Vec<MixtureTerm> = (2..=4)
                .filter_map(|p| {
                    let w: f64 = rng.random_range(0.0..1.0);
                    (p == 2 || rng.random_bool(0.6)).then_some(MixtureTerm { p, w })
                })
                .collect();
            let mixture = MixturePolynomial::new(terms).unwrap();
            let beta = rng.random_range(0.0..0.3);
            let h = rng.random_range(0.0..0.5);
            rs_point(&mixture, beta, h, 1e-12).unwrap()
        })
        .collect()
}

fn relations() -> Outcome {
    let mut worst: f64 = 0.0;
    for p in random_points(100) {
        match relations_table(&p) {
            Ok(rows) => {
                for r in rows {
                    let mono = ReplicaMonomial::new(r.monomial.clone()).unwrap();
                    let direct = nu0_monomial(&mono, &p);
                    worst = worst.max((direct - r.closed_form).abs()).max((r.engine - r.closed_form).abs());
                }
            }
            Err(e) => return outcome(false, format!("relations failed: {e}")),
        }
    }
    outcome(worst <= 1e-12, format!("max |engine - closed form| = {worst:.2e}"))
}

fn v_vector() -> Outcome {
    let mut worst: f64 = 0.0;
    let mut finite = true;
    for p in random_points(100) {
        let v = match compute_v(&p) {
            Ok(v) => v,
            Err(e) => return outcome(false, e.to_string()),
        };
        finite &= v.iter().all(|x| x.is_finite());
        worst = worst.max((v1_by_expansion(&p) - v[0]).abs());
    }
    outcome(worst <= 1e-12 && finite, format!("max |v1 expansion - closed form| = {worst:.2e}, all finite: {finite}"))
}

fn quadrature_rate() -> Outcome {
    let monos: [&[u32]; 11] =
        [&[1], &[2], &[1, 1], &[3], &[2, 1], &[1, 1, 1], &[4], &[3, 1], &[2, 2], &[2, 1, 1], &[1, 1, 1, 1]];
    let ns = [1_000u64, 10_000, 100_000];
    let points = [headline(), rs_point(&"p2:0.6,p3:0.4".parse().unwrap(), 0.3, 0.5, 1e-12).unwrap()];
    let mut worst: f64 = 1.0;
    for p in &points {
        for m in monos {
            let mono = ReplicaMonomial::new(m.to_vec()).unwrap();
            let engine = nu0_monomial(&mono, p);
            let scaled: Vec<f64> = ns
                .iter()
                .map(|&n| (nu0_monomial_quadrature(&mono, p, n, DEFAULT_HERMITE_ORDER).unwrap() - engine).abs() * n as f64)
                .collect();
            let hi = scaled.iter().cloned().fold(0.0, f64::max);
            let lo = scaled.iter().cloned().fold(f64::INFINITY, f64::min);
            worst = worst.max(hi / lo);
        }
    }
    outcome(worst <= 3.0, format!("max over monomials of max/min N|gap| = {worst:.4}"))
}

fn recursion() -> Outcome {
    let b = headline().b;
    let ns = [1_000u64, 10_000, 100_000];
    let (mut worst_gap, mut worst_slope): (f64, f64) = (0.0, 0.0);
    for a in [0.3, 1.0, -0.7] {
        for k in 1..=8 {
            let mut logs = Vec::new();
            for &n in &ns {
                let p = CavityDensityParams::new(n, a, b).unwrap();
                let r = p.recursion_residual(k).unwrap();
                let d = p.recursion_residual_direct(k).unwrap();
                worst_gap = worst_gap.max((r - d).abs());
                logs.push(((n as f64).ln(), d.abs().ln()));
            }
            let mx = logs.iter().map(|l| l.0).sum::<f64>() / 3.0;
            let my = logs.iter().map(|l| l.1).sum::<f64>() / 3.0;
            let slope = logs.iter().map(|l| (l.0 - mx) * (l.1 - my)).sum::<f64>()
                / logs.iter().map(|l| (l.0 - mx).powi(2)).sum::<f64>();
            worst_slope = worst_slope.max((slope + 1.0).abs());
        }
    }
    outcome(
        worst_gap <= 1e-10 && worst_slope <= 0.05,
        format!("max |residual - direct| = {worst_gap:.2e}, max |slope + 1| = {worst_slope:.2e}"),
    )
}

fn saddle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (mut worst, mut alt_worst): (f64, f64) = (0.0, 0.0);
    for _ in 0..1000 {
        let c: f64 = rng.random_range(-5.0..5.0);
        let n: u64 = rng.random_range(4..1_000_000);
        let c_n = n as f64 * c / (n as f64 - 3.0);
        let numeric = phi_max_numeric(c, n).unwrap();
        let x0 = match x0_closed_form(c_n) {
            Ok(sp) => sp.x0,
            Err(e) => return outcome(false, e.to_string()),
        };
        worst = worst.max((x0 - numeric).abs());
        let alt = 2.0 * c_n / (1.0 + (1.0 + 2.0 * c_n * c_n).sqrt());
        alt_worst = alt_worst.max((alt - numeric).abs());
    }
    outcome(
        worst <= 1e-10 && alt_worst > 1e-3,
        format!("4c^2 form max error {worst:.2e}; 2c^2 form max error {alt_worst:.2e}"),
    )
}

fn simulate(n: usize, beta: f64, h: f64, sweeps: u64, burnin: u64) -> ExperimentReport {
    let mut cfg = SimConfig::new(sk(), beta, h, n);
    cfg.sweeps = sweeps;
    cfg.burnin = burnin;
    run_experiment(&cfg).unwrap().report
}

fn uniform_sphere() -> Outcome {
    let rep = simulate(400, 0.0, 0.0, 20_000, 5_000);
    let s = rep.scaled_array();
    let checks = [("f1", &s[0], 1.0), ("f6", &s[5], 1.0), ("f2", &s[1], 0.0), ("f3", &s[2], 0.0), ("f7", &s[6], 0.0)];
    let detail: Vec<String> =
        checks.iter().map(|(n, e, t)| format!("{n} {:.4}±{:.4} (z {:+.2})", e.mean, e.stderr, e.z_score(*t))).collect();
    outcome(checks.iter().all(|(_, e, t)| e.z_score(*t).abs() <= 3.0), detail.join(", "))
}

struct Headline {
    runs: Vec<(usize, ExperimentReport)>,
}

impl Headline {
    fn report(&self, n: usize) -> &ExperimentReport {
        &self.runs.iter().find(|r| r.0 == n).unwrap().1
    }
}

fn headline_runs() -> Headline {
    let runs = [100, 200, 400].into_iter().map(|n| (n, simulate(n, 0.2, 0.3, 100_000, 20_000))).collect();
    Headline { runs }
}

fn fluctuations(hl: &Headline) -> Outcome {
    let fl = limiting_covariances(&headline()).unwrap();
    let (limits, alternative) = (fl.limits.to_array(), fl.limits_alternative.to_array());
    let mut pass = true;
    let mut lines = Vec::new();
    for n in [200, 400] {
        let rep = hl.report(n);
        for (i, est) in rep.scaled_array().iter().enumerate() {
            let z = est.z_score(limits[i]);
            pass &= z.abs() <= 3.0;
            lines.push(format!(
                "    N={n} {:<14} {:.5}±{:.5} theory {:.5} z {:+.2} (Y4 variant {:.5}, z {:+.2})",
                LIMIT_NAMES[i],
                est.mean,
                est.stderr,
                limits[i],
                z,
                alternative[i],
                est.z_score(alternative[i])
            ));
        }
    }
    let (a, b) = (hl.report(200).scaled_array(), hl.report(400).scaled_array());
    let mut drift_ok = true;
    for i in 0..7 {
        let z = (b[i].mean - a[i].mean) / (a[i].stderr.powi(2) + b[i].stderr.powi(2)).sqrt();
        drift_ok &= z.abs() <= 3.0;
        lines.push(format!("    drift 200->400 {:<14} z {:+.2}", LIMIT_NAMES[i], z));
    }
    for n in [200, 400] {
        let d = &hl.report(n).diagnostics;
        lines.push(format!(
            "    N={n} acceptance {:.3}, step {:.3}, max R-hat {:.3}, energy drift {:.1e}",
            d.acceptance_mean, d.step_size_mean, d.rhat_max, d.max_energy_drift
        ));
    }
    outcome(pass && drift_ok, format!("all |z| <= 3: {pass}, drift consistent: {drift_ok}\n{}", lines.join("\n")))
}

fn fixed_point(hl: &Headline) -> Outcome {
    let p = headline();
    let rep = hl.report(400);
    let (z12, z1) = (rep.r12.z_score(p.q), rep.r1.z_score(p.r));
    outcome(
        z12.abs() <= 3.0 && z1.abs() <= 3.0,
        format!(
            "R12 {:.5}±{:.5} vs q {:.5} (z {z12:+.2}); R1 {:.5}±{:.5} vs r {:.5} (z {z1:+.2})",
            rep.r12.mean, rep.r12.stderr, p.q, rep.r1.mean, rep.r1.stderr, p.r
        ),
    )
}

fn concentration(hl: &Headline) -> Outcome {
    let freqs: Vec<(usize, f64)> = hl.runs.iter().map(|(n, r)| (*n, r.tail.mean)).collect();
    let at_400 = hl.report(400).tail.mean;
    let monotone = freqs.windows(2).all(|w| w[1].1 <= w[0].1);
    let detail: Vec<String> = freqs.iter().map(|(n, f)| format!("N={n}: {f:.2e}")).collect();
    outcome(at_400 < 0.01 && monotone, format!("tail frequency {}", detail.join(", ")))
}

fn free_energy() -> Outcome {
    let mut cfg = SimConfig::new(sk(), 0.2, 0.3, 400);
    cfg.sweeps = 20_000;
    cfg.burnin = 5_000;
    let rep = match thermo_integrate_free_energy(&cfg, &uniform_grid(0.2, 9)) {
        Ok(r) => r,
        Err(e) => return outcome(false, e.to_string()),
    };
    let tol = (3.0 * rep.stderr).max(0.01);
    let gap = rep.free_energy - rep.f_rs;
    outcome(
        gap.abs() <= tol,
        format!(
            "TI {:.5}±{:.5} (trapezoid {:.5}) vs replica-symmetric {:.5}; gap {gap:+.2e}, tolerance {tol:.3}",
            rep.free_energy, rep.stderr, rep.trapezoid, rep.f_rs
        ),
    )
}

fn determinism() -> Outcome {
    let run = || {
        Command::new(env!("CARGO_BIN_EXE_ssk"))
            .args(["verify", "--seed", "99", "--n", "60", "--n-disorder", "8", "--sweeps", "4000", "--burnin", "1000"])
            .output()
            .unwrap()
    };
    let (a, b) = (run(), run());
    let same = a.stdout == b.stdout && !a.stdout.is_empty();
    outcome(same && a.status.code().is_some_and(|c| c < 2), format!("{} bytes, identical: {same}", a.stdout.len()))
}

fn main() {
    let quick = std::env::var("SSK_ACCEPTANCE").is_ok_and(|v| v == "quick");
    type Check = fn() -> Outcome;
    let fast: [(u32, &str, Check, Duration); 5] = [
        (1, "relations identities", relations, Duration::from_secs(1)),
        (2, "v-vector identity", v_vector, Duration::from_secs(1)),
        (3, "quadrature vs engine at rate 1/N", quadrature_rate, Duration::from_secs(30)),
        (4, "recursion residual", recursion, Duration::from_secs(30)),
        (5, "saddle point", saddle, Duration::from_secs(5)),
    ];
    let mut failures = 0;
    let mut report = |id: u32, name: &str, o: Outcome, elapsed: Duration, budget: Duration| {
        let in_time = elapsed <= budget;
        let pass = o.pass && in_time;
        failures += usize::from(!pass);
        println!(
            "criterion {id:>2} {name}: {} ({:.1}s of {:.0}s) {}",
            if pass { "PASS" } else { "FAIL" },
            elapsed.as_secs_f64(),
            budget.as_secs_f64(),
            o.detail
        );
    };
    let timed = |f: &dyn Fn() -> Outcome| {
        let t = Instant::now();
        let o = f();
        (o, t.elapsed())
    };

    for (id, name, f, budget) in fast {
        let (o, el) = timed(&f);
        report(id, name, o, el, budget);
    }
    if quick {
        println!("criteria 6-10 skipped (SSK_ACCEPTANCE=quick)");
    } else {
        let (o, el) = timed(&|| uniform_sphere());
        report(6, "uniform-sphere exactness", o, el, Duration::from_secs(120));

        let t = Instant::now();
        let hl = headline_runs();
        let el = t.elapsed();
        report(7, "headline fluctuations", fluctuations(&hl), el, Duration::from_secs(1800));
        report(8, "fixed point and magnetization", fixed_point(&hl), el, Duration::from_secs(1800));
        report(10, "overlap concentration", concentration(&hl), el, Duration::from_secs(1800));

        let (o, el) = timed(&|| free_energy());
        report(9, "free energy by thermodynamic integration", o, el, Duration::from_secs(2700));
    }
    let (o, el) = timed(&|| determinism());
    report(11, "determinism", o, el, Duration::from_secs(60));

    if failures > 0 {
        println!("{failures} criteria failed");
        std::process::exit(1);
    }
}
