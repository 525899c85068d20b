//! Acceptance suite. Each criterion prints one PASS/FAIL line with the
//! measured quantities; the test fails if any criterion fails.

use std::io::Write as _;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use lorenz_lab::agents::{
    fit_time_scale, interpolate, run_agents, transact, AgentConfig, AgentInitial, AgentPopulation, Conservation,
};
use lorenz_lab::analytic::{
    flipped_quadratic_potential_residual, heat_lorenz_curve, heat_time, heat_to_quadratic_map,
    quadratic_potential_residual, scaled_time,
};
use lorenz_lab::fpe::{run_fpe, Boundary, CoefficientSpec, FpeRunConfig, GridSpec, InitialDensity, TimeSpec};
use lorenz_lab::harness::{load_config, run_comparison};
use lorenz_lab::lorenz_core::{
    density_from_lorenz, gini_from_density, gini_from_lorenz, gini_rate_density, gini_rate_lorenz, lorenz_from_density,
    DensityField, Domain, SpatialGrid,
};
use lorenz_lab::lorenz_solver::{
    pde_residual, run_lorenz, InitialCurve, LorenzControls, LorenzRunConfig, RightBoundary,
};

const WINDOW: [f64; 2] = [0.05, 0.95];

struct Outcome {
    pass: bool,
    detail: String,
}

impl Outcome {
    fn new(pass: bool, detail: impl Into<String>) -> Self {
        Self {
            pass,
            detail: detail.into(),
        }
    }
}

/// Sup of `|r|` over residual entries whose node lies in the window; entry
/// `k` belongs to node `k + 1` of an `n`-node grid.
fn interior_window_sup(r: &[f64], n: usize) -> f64 {
    let h = 1.0 / (n - 1) as f64;
    r.iter()
        .enumerate()
        .filter(|(k, _)| in_window((k + 1) as f64 * h))
        .map(|(_, v)| v.abs())
        .fold(0.0, f64::max)
}

fn in_window(f: f64) -> bool {
    (WINDOW[0] - 1e-12..=WINDOW[1] + 1e-12).contains(&f)
}

fn yard_sale_fpe(gamma: f64, hi: f64, count: usize, t_end: f64, every: f64) -> FpeRunConfig {
    FpeRunConfig {
        grid: GridSpec::wealth(hi, count),
        initial: InitialDensity::Gamma { shape: 4.0, mean: 1.0 },
        time: TimeSpec {
            t_end,
            dt: None,
            record_interval: Some(every),
        },
        coefficients: CoefficientSpec::yard_sale(gamma).unwrap(),
        boundary: Boundary::default(),
    }
}

fn heat_residual() -> Outcome {
    let spec = CoefficientSpec::heat(1.0).unwrap();
    let n = 513;
    let dt = 1e-5;
    let mut worst: f64 = 0.0;
    let mut parts = Vec::new();
    for t in [0.05, 0.1, 0.5] {
        let prev = heat_lorenz_curve(n, t - dt, 1.0, 0.0).unwrap();
        let next = heat_lorenz_curve(n, t + dt, 1.0, 0.0).unwrap();
        let r = pde_residual(&prev, &next, 2.0 * dt, &spec).unwrap();
        let sup = interior_window_sup(&r, n);
        parts.push(format!("t={t}: {sup:.2e}"));
        worst = worst.max(sup);
    }
    Outcome::new(worst <= 5e-3, format!("sup residual {} (limit 5e-3)", parts.join(", ")))
}

fn heat_triangulation() -> Outcome {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/configs/heat_compare.toml");
    let config = load_config(path.as_ref()).unwrap();
    let cmp = run_comparison(&config).unwrap();
    let last = cmp.report.rows.last().unwrap();
    let fl = last.fpe_vs_lorenz.sup;
    let fa = last.fpe_vs_analytic.unwrap().sup;
    let la = last.lorenz_vs_analytic.unwrap().sup;
    let pass = (last.time - 0.1).abs() < 1e-12 && fl <= 1e-2 && fa <= 1e-2 && la <= 1e-2;
    Outcome::new(
        pass,
        format!(
            "t={}: fpe-lorenz {fl:.2e}, fpe-analytic {fa:.2e}, lorenz-analytic {la:.2e} (limit 1e-2)",
            last.time
        ),
    )
}

fn ou_relaxation() -> Outcome {
    let (rate, target, d) = (1.0, 2.0, 1.0);
    let config = FpeRunConfig {
        grid: GridSpec {
            lo: -6.0,
            hi: 8.0,
            count: 701,
            domain: Domain::RealLine,
        },
        initial: InitialDensity::PointMass { at: 0.0 },
        time: TimeSpec {
            t_end: 2.0,
            dt: None,
            record_interval: Some(0.5),
        },
        coefficients: CoefficientSpec::ornstein_uhlenbeck(rate, target, d).unwrap(),
        boundary: Boundary::default(),
    };
    let run = run_fpe(&config).unwrap();
    let var0 = run.snapshots[0].std().powi(2);
    let mut worst_mean: f64 = 0.0;
    let mut worst_std: f64 = 0.0;
    for snap in &run.snapshots {
        let t = snap.time();
        if ![0.5, 1.0, 2.0].iter().any(|&c| (t - c).abs() < 1e-9) {
            continue;
        }
        let mean = target * (1.0 - (-rate * t).exp());
        let var = var0 * (-2.0 * rate * t).exp() - (d / rate) * (-2.0 * rate * t).exp_m1();
        worst_mean = worst_mean.max((snap.mean() - mean).abs() / mean);
        worst_std = worst_std.max((snap.std() - var.sqrt()).abs() / var.sqrt());
    }
    Outcome::new(
        worst_mean <= 0.01 && worst_std <= 0.02,
        format!("max relative error: mean {worst_mean:.2e} (limit 1e-2), std {worst_std:.2e} (limit 2e-2)"),
    )
}

fn scaling_map() -> Outcome {
    let ds = 1e-4;
    let n = 513;
    let mut worst: f64 = 0.0;
    let mut flipped: f64 = f64::INFINITY;
    let mut parts = Vec::new();
    for t in [0.1, 1.0] {
        let s = scaled_time(t);
        let [p, m, q] = [s - ds, s, s + ds].map(|si| {
            let heat = heat_lorenz_curve(n, heat_time(si), 1.0, 0.0).unwrap();
            heat_to_quadratic_map(&heat).unwrap().0
        });
        let r = interior_window_sup(&quadratic_potential_residual(&p, &m, &q, ds).unwrap(), n);
        let rf = interior_window_sup(&flipped_quadratic_potential_residual(&p, &m, &q, ds).unwrap(), n);
        parts.push(format!("t={t}: {r:.2e}"));
        worst = worst.max(r);
        flipped = flipped.min(rf);
    }
    Outcome::new(
        worst <= 1e-2,
        format!(
            "J_s + J + 1/J_hh residual {} (limit 1e-2); sign-flipped form residual >= {flipped:.2}",
            parts.join(", ")
        ),
    )
}

fn gini_pair(d: &DensityField, f_count: usize) -> (f64, f64) {
    let gd = gini_from_density(d).unwrap();
    let gl = gini_from_lorenz(&lorenz_from_density(d, f_count).unwrap()).unwrap();
    (gd, gl)
}

fn gini_identities() -> Outcome {
    let uniform = DensityField::from_fn(
        SpatialGrid::uniform(0.0, 2.0, 1024, Domain::PositiveHalfLine).unwrap(),
        0.0,
        |_| 0.5,
    )
    .unwrap();
    let (ua, ub) = gini_pair(&uniform, 1025);

    // Unit mean: log-mean -sigma^2/2.
    let sigma: f64 = 0.5;
    let lognormal = DensityField::from_fn(GridSpec::wealth(30.0, 2048).build().unwrap(), 0.0, |w| {
        if w <= 0.0 {
            return 0.0;
        }
        let z = (w.ln() + 0.5 * sigma * sigma) / sigma;
        (-0.5 * z * z).exp() / (w * sigma * (2.0 * std::f64::consts::PI).sqrt())
    })
    .unwrap();
    let (la, lb) = gini_pair(&lognormal, 2049);
    let lognormal_exact = lorenz_lab::analytic::erf(sigma / 2.0);

    let run = run_fpe(&yard_sale_fpe(0.1, 24.0, 1024, 24.0, 24.0)).unwrap();
    let late = run.snapshots.last().unwrap();
    let (ya, yb) = gini_pair(late, 2049);

    let gaps = [(ua - ub).abs(), (la - lb).abs(), (ya - yb).abs()];
    let oracle = (ua - 1.0 / 3.0).abs().max((ub - 1.0 / 3.0).abs());
    let pass = gaps.iter().all(|&g| g <= 1e-3) && oracle <= 1e-3;
    Outcome::new(
        pass,
        format!(
            "uniform {ua:.6}/{ub:.6} (1/3 off by {oracle:.1e}), lognormal {la:.6}/{lb:.6} (exact {lognormal_exact:.6}), \
             yard-sale t={} {ya:.6}/{yb:.6}; max gap {:.2e} (limit 1e-3)",
            late.time(),
            gaps.iter().cloned().fold(0.0, f64::max)
        ),
    )
}

fn gini_rate() -> Outcome {
    let every = 0.5;
    let config = yard_sale_fpe(0.1, 24.0, 512, 20.0, every);
    let run = run_fpe(&config).unwrap();
    let g = &run.metrics.gini;
    let mut worst_pair: f64 = 0.0;
    let mut worst_cd: f64 = 0.0;
    for t in [2.0, 5.0, 10.0, 15.0, 19.0] {
        let k = (t / every) as usize;
        let d = &run.snapshots[k];
        assert!((d.time() - t).abs() < 1e-9);
        let rd = gini_rate_density(d, &config.coefficients).unwrap();
        let curve = lorenz_from_density(d, 1025).unwrap();
        let rl = gini_rate_lorenz(&curve, &config.coefficients).unwrap();
        let cd = (g[k + 1].unwrap() - g[k - 1].unwrap()) / (2.0 * every);
        worst_pair = worst_pair.max((rd - rl).abs() / rd.abs());
        worst_cd = worst_cd.max((rd - cd).abs() / cd.abs()).max((rl - cd).abs() / cd.abs());
    }
    Outcome::new(
        worst_pair <= 0.02 && worst_cd <= 0.05,
        format!(
            "five checkpoints: density vs Lorenz rate {worst_pair:.2e} (limit 2e-2), \
             vs central difference {worst_cd:.2e} (limit 5e-2)"
        ),
    )
}

fn monotone_gini() -> Outcome {
    let config = LorenzRunConfig {
        f_count: 513,
        domain: Domain::PositiveHalfLine,
        initial: InitialCurve::FromDensity {
            grid: GridSpec::wealth(24.0, 2048),
            density: InitialDensity::Gamma { shape: 4.0, mean: 1.0 },
        },
        time: TimeSpec {
            t_end: 40.0,
            dt: None,
            record_interval: Some(4.0),
        },
        coefficients: CoefficientSpec::yard_sale(0.1).unwrap(),
        right_boundary: RightBoundary::Conserved,
        controls: LorenzControls::default(),
    };
    let run = run_lorenz(&config).unwrap();
    let worst_step = run
        .step_gini
        .windows(2)
        .map(|w| w[1] - w[0])
        .fold(f64::INFINITY, f64::min);
    let g = &run.step_gini;
    Outcome::new(
        worst_step >= -1e-6 && run.min_convexity_margin >= -1e-10,
        format!(
            "{} steps, G {:.4} -> {:.4}, most negative step change {worst_step:.2e} (limit -1e-6), \
             min convexity margin {:.2e} (limit -1e-10)",
            run.steps,
            g[0],
            g[g.len() - 1],
            run.min_convexity_margin
        ),
    )
}

fn agent_mean_field() -> Outcome {
    let gamma = 0.05;
    let pde = run_fpe(&yard_sale_fpe(gamma, 32.0, 1024, 100.0, 0.5)).unwrap();
    let pde_gini = pde.metrics.gini_values();

    // One-time fit on a calibration ensemble, time measured in sweeps.
    let calibration = AgentConfig {
        agents: 1000,
        gamma,
        replicas: 32,
        seed: 20240611,
        initial: AgentInitial::Gamma { shape: 4 },
        t_end: 48.0,
        record_interval: 2.0,
        time_scale: 1.0,
    };
    let cal = run_agents(&calibration).unwrap();
    let c = fit_time_scale(&cal.times, &cal.mean_gini, &pde_gini, 0.05, 20.0).unwrap();

    // Validation on an independent seed with the fitted scale frozen.
    let validation = AgentConfig {
        seed: 7,
        t_end: 90.0,
        record_interval: 10.0,
        time_scale: c,
        ..calibration.clone()
    };
    let val = run_agents(&validation).unwrap();
    let mut worst_z: f64 = 0.0;
    for t in [10.0, 30.0, 50.0, 70.0, 90.0] {
        let k = val.times.iter().position(|&s| (s - t).abs() < 1e-9).unwrap();
        let p = interpolate(&pde_gini, t).unwrap();
        worst_z = worst_z.max((val.mean_gini[k] - p).abs() / val.gini_se[k]);
    }

    let long = AgentConfig {
        seed: 11,
        t_end: 1000.0,
        record_interval: 250.0,
        time_scale: c,
        ..calibration
    };
    let long_run = run_agents(&long).unwrap();
    let trend = long_run.mean_gini.windows(2).all(|w| w[1] > w[0]);
    let g_end = *long_run.mean_gini.last().unwrap();
    Outcome::new(
        worst_z <= 3.0 && g_end > 0.9 && trend,
        format!(
            "fitted time scale {c:.4}; max |agent - PDE| / SE {worst_z:.2} at 5 times (limit 3); \
             long run G(t={}) {g_end:.4} (limit 0.9), increasing {trend}",
            long.t_end
        ),
    )
}

/// Relative L1 error of the round-trip density against the true pdf at the
/// reconstructed nodes.
fn round_trip_error(d: &DensityField, pdf: impl Fn(f64) -> f64) -> f64 {
    let r = density_from_lorenz(&lorenz_from_density(d, d.nodes().len()).unwrap()).unwrap();
    let xs = r.density.nodes();
    let rv = r.density.values();
    let (mut num, mut den) = (0.0, 0.0);
    for i in 1..xs.len() - 1 {
        let w = 0.5 * (xs[i + 1] - xs[i - 1]);
        num += (rv[i] - pdf(xs[i])).abs() * w;
        den += pdf(xs[i]) * w;
    }
    num / den
}

fn round_trip() -> Outcome {
    let gauss = |x: f64| (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt();
    let mut pass = true;
    let mut parts = Vec::new();
    for name in ["gaussian", "uniform"] {
        let mut errs = Vec::new();
        for n in [512, 1024] {
            let (d, err) = if name == "gaussian" {
                let g = SpatialGrid::uniform(-8.0, 8.0, n, Domain::RealLine).unwrap();
                let d = DensityField::from_fn(g, 0.0, gauss).unwrap();
                let e = round_trip_error(&d, gauss);
                (d, e)
            } else {
                let g = SpatialGrid::uniform(0.0, 2.0, n, Domain::PositiveHalfLine).unwrap();
                let d = DensityField::from_fn(g, 0.0, |_| 0.5).unwrap();
                let e = round_trip_error(&d, |_| 0.5);
                (d, e)
            };
            let dx = d.grid().max_spacing();
            pass &= err <= 10.0 * dx * dx;
            errs.push(err);
        }
        let ratio = errs[0] / errs[1];
        // A density the scheme reproduces to rounding has no truncation
        // error to converge; the ratio test applies above that floor.
        let exact = errs.iter().all(|&e| e < 1e-10);
        pass &= exact || (3.0..=5.0).contains(&ratio);
        parts.push(format!(
            "{name} {:.2e}/{:.2e} ratio {ratio:.2}{}",
            errs[0],
            errs[1],
            if exact { " (exact to rounding)" } else { "" }
        ));
    }
    Outcome::new(
        pass,
        format!(
            "relative L1 at 512/1024 nodes: {} (limit 10 dx^2, ratio 4+-1)",
            parts.join("; ")
        ),
    )
}

/// Error-free sum: `a + b == s + e` exactly.
fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

fn micro_exactness() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let mut ok = true;
    let mut parts = Vec::new();
    for gamma in [0.01, 0.5, 0.99] {
        let mut counts = [0usize; 3];
        for _ in 0..1_000_000 {
            // Log-uniform wealths over twelve decades.
            let wi = 10f64.powf(rng.random_range(-6.0..6.0));
            let wj = 10f64.powf(rng.random_range(-6.0..6.0));
            let (a, b, tier) = transact(wi, wj, gamma, rng.random()).unwrap();
            ok &= a > 0.0 && b > 0.0 && a + b == wi + wj;
            match tier {
                Conservation::Exact => {
                    ok &= two_sum(a, b) == two_sum(wi, wj);
                    counts[0] += 1;
                }
                Conservation::Rounded => counts[1] += 1,
                Conservation::Skipped => counts[2] += 1,
            }
        }
        parts.push(format!(
            "gamma={gamma}: exact {} rounded {} skipped {}",
            counts[0], counts[1], counts[2]
        ));
    }

    // The population keeps wealth on a lattice, where every transfer is exact.
    let wealths = AgentInitial::Gamma { shape: 2 }
        .build(1000, &mut ChaCha8Rng::seed_from_u64(1))
        .unwrap();
    let mut pop = AgentPopulation::new(wealths, 0.5, ChaCha8Rng::seed_from_u64(2)).unwrap();
    let before = pop.total();
    pop.run(1_000_000);
    let lattice_ok = pop.total() == before && pop.wealths().iter().all(|&w| w > 0.0);
    ok &= lattice_ok;
    Outcome::new(
        ok,
        format!(
            "3x10^6 calls keep the f64 pair sum and positivity, exact tier is exact in reals ({}); \
             lattice population total unchanged over 10^6 transactions: {lattice_ok}",
            parts.join("; ")
        ),
    )
}

type Criterion = (&'static str, Duration, fn() -> Outcome);

#[test]
fn acceptance() {
    let criteria: [Criterion; 10] = [
        ("analytic heat residual", Duration::from_secs(1), heat_residual),
        ("heat triangulation", Duration::from_secs(30), heat_triangulation),
        ("OU mean relaxation", Duration::from_secs(30), ou_relaxation),
        ("scaling map", Duration::from_secs(1), scaling_map),
        ("Gini identities", Duration::from_secs(5), gini_identities),
        ("Gini-rate identity", Duration::from_secs(60), gini_rate),
        ("monotone Gini and convexity", Duration::from_secs(60), monotone_gini),
        ("agent/mean-field agreement", Duration::from_secs(300), agent_mean_field),
        ("round-trip transform", Duration::from_secs(5), round_trip),
        ("micro-transaction exactness", Duration::from_secs(5), micro_exactness),
    ];
    let mut failed = Vec::new();
    for (k, (name, budget, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = check();
        let elapsed = start.elapsed();
        let in_time = elapsed <= *budget;
        let pass = outcome.pass && in_time;
        // Written to stderr directly so the report survives output capture.
        let _ = writeln!(
            std::io::stderr(),
            "criterion {:>2} {} {name}: {} [{:.2} s, budget {} s]",
            k + 1,
            if pass { "PASS" } else { "FAIL" },
            outcome.detail,
            elapsed.as_secs_f64(),
            budget.as_secs()
        );
        if !pass {
            failed.push(k + 1);
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
