//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line for
//! each, and exits nonzero if any fails.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use nalgebra::{DMatrix, SymmetricEigen};
use rand::Rng;
use rand_distr::StandardNormal;

use gridfilter::filter::{
    estimate, filter_step, posterior_covariance, predict_functional, run_filter, FilterState, FunctionalTable,
};
use gridfilter::grid::Grid;
use gridfilter::harness::bounds::{MARGINAL_PATH, MARKOVIAN_PATH};
use gridfilter::harness::sweep::mean_worst_error;
use gridfilter::harness::{run_bound_checks, run_error_sweep, run_regularity_report, ExperimentConfig, HName};
use gridfilter::models::{HiddenModel, MeanFn, ObservationModel, TruncGaussNar};
use gridfilter::particle::{pf_posterior_mean, reweight, systematic_resample, ParticleCloud};
use gridfilter::rng::{StreamKey, StreamRng};
use gridfilter::transition::{nar_closed_form_transition, BeliefVector, TransitionMatrix};

type Check = fn() -> Result<String, String>;

fn main() {
    let criteria: [(u32, &str, Check, Duration); 8] = [
        (1, "exact HMM equivalence", exact_hmm, Duration::from_secs(1)),
        (
            2,
            "closed-form transition vs quadrature",
            closed_form_vs_quadrature,
            Duration::from_secs(10),
        ),
        (
            3,
            "error-vs-resolution trend",
            resolution_trend,
            Duration::from_secs(30 * 60),
        ),
        (
            4,
            "pathwise quantization bounds",
            pathwise_bounds,
            Duration::from_secs(30),
        ),
        (
            5,
            "filter algebraic invariants",
            algebraic_invariants,
            Duration::from_secs(600),
        ),
        (6, "particle oracle sanity", particle_sanity, Duration::from_secs(600)),
        (7, "regularity diagnostics", regularity, Duration::from_secs(120)),
        (
            8,
            "determinism and serialization",
            determinism,
            Duration::from_secs(600),
        ),
    ];
    let mut failed = 0;
    for (id, name, check, budget) in criteria {
        let start = Instant::now();
        let result = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let elapsed = start.elapsed();
        let (pass, detail) = match result {
            Ok(d) if elapsed <= budget => (true, d),
            Ok(d) => (false, format!("{d}; over the {}s budget", budget.as_secs())),
            Err(d) => (false, d),
        };
        println!(
            "criterion {id} {}: {name}: {detail} ({:.2}s)",
            if pass { "PASS" } else { "FAIL" },
            elapsed.as_secs_f64()
        );
        if !pass {
            failed += 1;
        }
    }
    println!("acceptance: {} passed, {failed} failed", 8 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn rng(label: &str) -> StreamRng {
    StreamKey::new(20_240_601).child(label).rng()
}

fn random_stochastic(n: usize, rng: &mut StreamRng) -> TransitionMatrix {
    let cols: Vec<Vec<f64>> = (0..n)
        .map(|_| {
            let c: Vec<f64> = (0..n).map(|_| -(1.0 - rng.random::<f64>()).ln()).collect();
            let s: f64 = c.iter().sum();
            c.into_iter().map(|v| v / s).collect()
        })
        .collect();
    TransitionMatrix::from_columns(&cols, 1e-12).unwrap()
}

// ---- 1 ----

/// Normalized forward recursion for a chain on `centers` with observations
/// `y_t ~ N(c 1_N, var I)`.
fn forward_means(p: &TransitionMatrix, centers: &[f64], var: f64, ys: &[Vec<f64>]) -> Vec<f64> {
    let n = centers.len();
    let mut alpha = vec![1.0 / n as f64; n];
    let mut means = Vec::new();
    for y in ys {
        let mut next = vec![0.0; n];
        for (i, nx) in next.iter_mut().enumerate() {
            let pred: f64 = (0..n).map(|j| p.get(i, j) * alpha[j]).sum();
            let d2: f64 = y.iter().map(|v| (v - centers[i]).powi(2)).sum();
            *nx = pred * (-0.5 * d2 / var).exp();
        }
        let s: f64 = next.iter().sum();
        alpha = next.into_iter().map(|v| v / s).collect();
        means.push(alpha.iter().zip(centers).map(|(a, c)| a * c).sum());
    }
    means
}

fn exact_hmm() -> Result<String, String> {
    let mut r = rng("hmm");
    let grid = Grid::uniform(0.0, 1.0, 1, 10).unwrap();
    let centers: Vec<f64> = grid.centers().map(|c| c[0]).collect();
    let mut worst = 0.0f64;
    for (obs_dim, var) in [(1, 0.04f64), (1, 0.5), (2, 0.1), (3, 0.01), (1, 2.0)] {
        let p = random_stochastic(10, &mut r);
        let mut s = r.random_range(0..10);
        let mut ys = Vec::new();
        for _ in 0..=100 {
            let u: f64 = r.random();
            let col = p.column(s);
            let mut acc = 0.0;
            s = col
                .iter()
                .position(|&v| {
                    acc += v;
                    u < acc
                })
                .unwrap_or(9);
            ys.push(
                (0..obs_dim)
                    .map(|_| centers[s] + var.sqrt() * r.sample::<f64, _>(StandardNormal))
                    .collect::<Vec<f64>>(),
            );
        }
        let obs = ObservationModel::isotropic(obs_dim, MeanFn::Identity, var).unwrap();
        let out = run_filter(&p, &grid, &obs, &ys, &BeliefVector::uniform(10)).map_err(|e| e.to_string())?;
        let reference = forward_means(&p, &centers, var, &ys);
        for (o, m) in out.iter().zip(&reference) {
            worst = worst.max((o.estimate[0] - m).abs());
        }
    }
    ensure(worst <= 1e-10, || format!("max deviation {worst:e} > 1e-10"))?;
    Ok(format!("max deviation {worst:.2e} over 5 chains x 101 steps"))
}

// ---- 2 ----

fn gauss_legendre(n: usize) -> Vec<(f64, f64)> {
    (1..=n)
        .map(|i| {
            let mut x = (std::f64::consts::PI * (i as f64 - 0.25) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (mut p0, mut p1) = (1.0, x);
                for k in 2..=n {
                    let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                    p0 = p1;
                    p1 = p2;
                }
                dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
                let dx = p1 / dp;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            (x, 2.0 / ((1.0 - x * x) * dp * dp))
        })
        .collect()
}

fn composite(f: impl Fn(f64) -> f64, a: f64, b: f64, pieces: usize, rule: &[(f64, f64)]) -> f64 {
    if b <= a {
        return 0.0;
    }
    let h = (b - a) / pieces as f64;
    (0..pieces)
        .map(|k| {
            let lo = a + k as f64 * h;
            rule.iter()
                .map(|(x, w)| 0.5 * h * w * f(lo + 0.5 * h * (x + 1.0)))
                .sum::<f64>()
        })
        .sum()
}

fn closed_form_vs_quadrature() -> Result<String, String> {
    let nar = TruncGaussNar::reference();
    let (alpha, sigma) = (1.0, 0.3);
    let rule = gauss_legendre(12);
    let gauss = |w: f64| (-0.5 * (w / sigma).powi(2)).exp() / (sigma * (2.0 * std::f64::consts::PI).sqrt());
    let z = composite(gauss, -alpha, alpha, 64, &rule);
    let mut worst = 0.0f64;
    let mut worst_sum = 0.0f64;
    for levels in [8, 32] {
        let grid = Grid::uniform(-2.0, 2.0, 1, levels).unwrap();
        let p = nar_closed_form_transition(&nar, &grid).map_err(|e| e.to_string())?;
        for j in 0..levels {
            let hj = (1.3 * grid.center(j)[0]).tanh();
            for i in 0..levels {
                let (lo, hi) = grid.cell_bounds(i).unwrap();
                let a = lo[0].max(hj - alpha);
                let b = hi[0].min(hj + alpha);
                let q = composite(|x| gauss(x - hj), a, b, 16, &rule) / z;
                worst = worst.max((p.get(i, j) - q).abs());
            }
        }
        for s in p.column_sums() {
            worst_sum = worst_sum.max((s - 1.0).abs());
        }
    }
    ensure(worst <= 1e-8, || format!("entry deviation {worst:e} > 1e-8"))?;
    ensure(worst_sum <= 1e-10, || {
        format!("column sum deviation {worst_sum:e} > 1e-10")
    })?;
    Ok(format!(
        "entry deviation {worst:.2e}, column sums within {worst_sum:.2e}"
    ))
}

// ---- 3 ----

fn halving(rows: &[(usize, usize, f64)], lo: usize, hi: usize, dims: &[usize]) -> Result<String, String> {
    let mut notes = Vec::new();
    for &n in dims {
        let at = |l: usize| rows.iter().find(|r| r.0 == n && r.1 == l).map(|r| r.2).unwrap();
        let (a, b) = (at(lo), at(hi));
        ensure(b <= 0.5 * a, || {
            format!("N = {n}: error {b:.4} at L_S = {hi} vs {a:.4} at L_S = {lo}")
        })?;
        notes.push(format!("N={n}: {a:.3}->{b:.3}"));
    }
    Ok(notes.join(", "))
}

fn ols_slope(points: &[(f64, f64)]) -> f64 {
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}

fn resolution_trend() -> Result<String, String> {
    let mut smoke = ExperimentConfig::default();
    smoke.horizon = 60;
    smoke.trials = 3;
    smoke.particles = 1000;
    smoke.levels = vec![4, 12, 24, 48];
    let start = Instant::now();
    let rows = run_error_sweep(&smoke).map_err(|e| e.to_string())?;
    let smoke_time = start.elapsed();
    ensure(smoke_time < Duration::from_secs(120), || {
        format!("smoke profile took {smoke_time:?}")
    })?;
    let smoke_note = halving(&mean_worst_error(&rows), 4, 48, &smoke.obs_dims).map_err(|e| format!("smoke: {e}"))?;

    let full = ExperimentConfig::default();
    let rows = run_error_sweep(&full).map_err(|e| e.to_string())?;
    let means = mean_worst_error(&rows);
    let full_note = halving(&means, 4, 50, &full.obs_dims).map_err(|e| format!("full: {e}"))?;
    let mut slopes = Vec::new();
    for &n in &full.obs_dims {
        let pts: Vec<(f64, f64)> = means.iter().filter(|r| r.0 == n).map(|r| (r.1 as f64, r.2)).collect();
        let slope = ols_slope(&pts);
        ensure(slope < 0.0, || {
            format!("full: N = {n}: OLS slope {slope:e} is not negative")
        })?;
        slopes.push(format!("{slope:.2e}"));
    }
    Ok(format!(
        "smoke [{smoke_note}] in {:.1}s; full [{full_note}], slopes {}",
        smoke_time.as_secs_f64(),
        slopes.join("/")
    ))
}

// ---- 4 ----

fn pathwise_bounds() -> Result<String, String> {
    let mut c = ExperimentConfig::default();
    c.h = HName::TanhScaled;
    c.bound = 0.6;
    c.h_scale = 1.0;
    c.bound_points = 100_000;
    c.bound_levels = vec![4, 16, 64];
    c.bound_horizon = 200;
    let rows = run_bound_checks(&c).map_err(|e| e.to_string())?;
    for check in [MARGINAL_PATH, MARKOVIAN_PATH] {
        let n = rows.iter().filter(|r| r.check == check).count();
        ensure(n == 3, || format!("{check}: {n} rows"))?;
    }
    if let Some(r) = rows.iter().find(|r| !r.pass) {
        return Err(format!(
            "{} at L_S = {}: {} > {}",
            r.check, r.levels, r.measured, r.bound
        ));
    }
    let worst = rows
        .iter()
        .filter(|r| r.check == MARKOVIAN_PATH)
        .map(|r| r.measured / r.bound)
        .fold(0.0, f64::max);
    Ok(format!(
        "{} rows hold; Markovian path uses at most {:.0}% of its bound",
        rows.len(),
        100.0 * worst
    ))
}

// ---- 5 ----

fn random_vec(n: usize, rng: &mut StreamRng, lo: f64, hi: f64) -> Vec<f64> {
    (0..n).map(|_| lo + (hi - lo) * rng.random::<f64>()).collect()
}

fn state(belief: Vec<f64>) -> FilterState {
    FilterState {
        belief,
        log_norm: 0.0,
        t: 0,
    }
}

fn algebraic_invariants() -> Result<String, String> {
    let mut r = rng("invariants");
    let cases = 10_000;
    let mut scale_dev = 0.0f64;
    let mut mass_dev = 0.0f64;
    let mut min_eig = f64::INFINITY;
    let mut comp_dev = 0.0f64;
    for _ in 0..cases {
        let n = r.random_range(2..=12);
        let p = random_stochastic(n, &mut r);
        let e = random_vec(n, &mut r, 0.0, 1.0);
        let lambda = random_vec(n, &mut r, 0.0, 1.0);
        let x = DMatrix::from_fn(2, n, |_, _| r.random_range(-3.0..3.0));
        let table = FunctionalTable::from_matrix(x.clone());
        let c1 = 10f64.powf(r.random_range(-6.0..6.0));
        let c2 = 10f64.powf(r.random_range(-6.0..6.0));

        let a = filter_step(&state(e.clone()), &p, &lambda, false).map_err(|e| e.to_string())?;
        let scaled_e: Vec<f64> = e.iter().map(|v| c1 * v).collect();
        let scaled_l: Vec<f64> = lambda.iter().map(|v| c2 * v).collect();
        let b = filter_step(&state(scaled_e), &p, &scaled_l, false).map_err(|e| e.to_string())?;
        for (u, v) in estimate(&a, &x).iter().zip(estimate(&b, &x)) {
            scale_dev = scale_dev.max((u - v).abs() / u.abs().max(v.abs()).max(1e-300));
        }

        let c = filter_step(&state(e.clone()), &p, &vec![1.0; n], false).map_err(|e| e.to_string())?;
        let before: f64 = e.iter().sum();
        mass_dev = mass_dev.max((c.mass() - before).abs() / before);

        let rho = r.random_range(0..4);
        let cov = posterior_covariance(&a, &p, &table, rho).map_err(|e| e.to_string())?;
        min_eig = min_eig.min(SymmetricEigen::new(cov).eigenvalues.min());

        let (r1, r2) = (r.random_range(0..5), r.random_range(0..5));
        let direct = predict_functional(&a, &p, &table, r1 + r2).map_err(|e| e.to_string())?;
        let mid = state(p.apply_power(&a.normalized(), r1));
        let composed = predict_functional(&mid, &p, &table, r2).map_err(|e| e.to_string())?;
        for (u, v) in direct.iter().zip(&composed) {
            comp_dev = comp_dev.max((u - v).abs() / u.abs().max(v.abs()).max(1.0));
        }
    }
    ensure(scale_dev <= 1e-12, || format!("scale invariance off by {scale_dev:e}"))?;
    ensure(mass_dev <= 1e-12, || format!("mass changed by {mass_dev:e}"))?;
    ensure(min_eig >= -1e-10, || format!("covariance eigenvalue {min_eig:e}"))?;
    ensure(comp_dev <= 1e-12, || {
        format!("prediction composition off by {comp_dev:e}")
    })?;
    Ok(format!(
        "{cases} cases: scale {scale_dev:.1e}, mass {mass_dev:.1e}, min eigenvalue {min_eig:.1e}, composition {comp_dev:.1e}"
    ))
}

// ---- 6 ----

/// `X_{-1} ~ N(m, s^2)`, `X_t = a X_{t-1} + N(0, q)`, on a support wide enough
/// never to bind.
struct LinearGaussian {
    m: f64,
    s: f64,
    a: f64,
    q: f64,
}

impl HiddenModel for LinearGaussian {
    fn dim(&self) -> usize {
        1
    }
    fn support(&self) -> Vec<(f64, f64)> {
        vec![(-1e3, 1e3)]
    }
    fn sample_initial(&self, rng: &mut StreamRng) -> Vec<f64> {
        vec![self.m + self.s * rng.sample::<f64, _>(StandardNormal)]
    }
    fn sample_next(&self, x: &[f64], rng: &mut StreamRng) -> Vec<f64> {
        vec![self.a * x[0] + self.q.sqrt() * rng.sample::<f64, _>(StandardNormal)]
    }
}

fn particle_sanity() -> Result<String, String> {
    let mut r = rng("resampler");
    for case in 0..10_000 {
        let len = r.random_range(1..=40);
        let mut w: Vec<f64> = (0..len)
            .map(|_| if r.random_bool(0.2) { 0.0 } else { r.random::<f64>() })
            .collect();
        if w.iter().all(|&v| v == 0.0) {
            w[0] = 1.0;
        }
        let n_out = r.random_range(1..=200);
        let u: f64 = r.random();
        let idx = systematic_resample(&w, u, n_out).map_err(|e| e.to_string())?;
        let total: f64 = w.iter().sum();
        let mut counts = vec![0usize; len];
        for &i in &idx {
            counts[i] += 1;
        }
        for (k, (&c, &wk)) in counts.iter().zip(&w).enumerate() {
            let expected = n_out as f64 * wk / total;
            ensure(c as f64 >= expected.floor() && c as f64 <= expected.ceil(), || {
                format!("case {case}: ancestor {k} drawn {c} times, expected {expected}")
            })?;
        }
    }

    let model = LinearGaussian {
        m: 0.4,
        s: 0.8,
        a: 0.9,
        q: 0.3,
    };
    let obs_var = 0.5;
    let y = 1.1;
    let obs = ObservationModel::isotropic(1, MeanFn::Identity, obs_var).map_err(|e| e.to_string())?;
    let mut pr = rng("kalman");
    let n = 100_000;
    let cloud = ParticleCloud::uniform((0..n).map(|_| model.sample_initial(&mut pr)).collect());
    let weighted = reweight(&cloud, &model, &obs, 0, &[y], &mut pr).map_err(|e| e.to_string())?;
    let mean = pf_posterior_mean(&weighted)[0];
    let se = weighted
        .particles
        .iter()
        .zip(&weighted.weights)
        .map(|(x, w)| (w * (x[0] - mean)).powi(2))
        .sum::<f64>()
        .sqrt();
    let pm = model.a * model.m;
    let pv = model.a * model.a * model.s * model.s + model.q;
    let kalman = pm + pv / (pv + obs_var) * (y - pm);
    let z = (mean - kalman).abs() / se;
    ensure(z <= 3.0, || format!("PF mean {mean} vs Kalman {kalman}: {z:.2} SE"))?;
    Ok(format!(
        "resampler bracket exact on 10^4 vectors; Kalman mean within {z:.2} SE (SE {se:.1e})"
    ))
}

// ---- 7 ----

fn regularity() -> Result<String, String> {
    let cfg = ExperimentConfig::default();
    let report = run_regularity_report(&cfg).map_err(|e| e.to_string())?;
    let mut notes = Vec::new();
    for &l in &cfg.reg_levels {
        let rows: Vec<_> = report.rows.iter().filter(|r| r.levels == l).collect();
        let ok = rows
            .iter()
            .filter(|r| r.deficit_ii <= r.bound_ii + 3.0 * r.se_ii)
            .count();
        ensure(rows.len() == 100, || format!("L_S = {l}: {} rows", rows.len()))?;
        ensure(ok * 100 >= 95 * rows.len(), || {
            format!("L_S = {l}: bound holds on {ok}/{}", rows.len())
        })?;
        notes.push(format!("L_S={l}: {ok}/{}", rows.len()));
    }
    let mut constant = cfg.clone();
    constant.h = HName::Constant;
    constant.bound = 0.5;
    let report = run_regularity_report(&constant).map_err(|e| e.to_string())?;
    for r in &report.rows {
        ensure(r.deficit_ii <= 3.0 * r.se_ii, || format!("constant h: {r:?}"))?;
        ensure(r.deficit_i <= 3.0 * r.se_i + 1e-8, || format!("constant h: {r:?}"))?;
    }
    Ok(format!(
        "bound holds {}; constant-h deficits within 3 SE",
        notes.join(", ")
    ))
}

// ---- 8 ----

fn cli(args: &[&str]) -> Result<(), String> {
    let out = Command::new(env!("CARGO_BIN_EXE_gridfilter"))
        .args(args)
        .env("RUST_LOG", "error")
        .output()
        .map_err(|e| e.to_string())?;
    ensure(out.status.success(), || {
        format!("{args:?} failed: {}", String::from_utf8_lossy(&out.stderr))
    })
}

fn read(p: &Path) -> Vec<u8> {
    std::fs::read(p).unwrap()
}

fn determinism() -> Result<String, String> {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let runs: [(&str, &[&str]); 4] = [
        (
            "sweep",
            &[
                "--set",
                "levels=3,9",
                "--set",
                "trials=2",
                "--set",
                "horizon=20",
                "--set",
                "particles=300",
            ],
        ),
        (
            "bounds",
            &["--set", "bound_points=5000", "--set", "bound=0.6", "--set", "h_scale=1"],
        ),
        (
            "regularity",
            &[
                "--set",
                "reg_points=8",
                "--set",
                "reg_samples=20000",
                "--set",
                "reg_max_conditioning=100",
            ],
        ),
        ("train", &["--set", "levels=12", "--set", "training_samples=50000"]),
    ];
    for (cmd, extra) in runs {
        let mut outputs = Vec::new();
        for jobs in ["1", "2"] {
            let out = dir.path().join(format!("{cmd}-{jobs}.out"));
            let mut args = vec![cmd, "--seed", "17", "--jobs", jobs, "--out", out.to_str().unwrap()];
            args.extend_from_slice(extra);
            cli(&args)?;
            outputs.push(out);
        }
        ensure(read(&outputs[0]) == read(&outputs[1]), || {
            format!("{cmd}: outputs differ")
        })?;
        if cmd == "train" {
            let m = TransitionMatrix::load(&outputs[0]).map_err(|e| e.to_string())?;
            let again = dir.path().join("again.gftm");
            m.save(&again).map_err(|e| e.to_string())?;
            ensure(read(&again) == read(&outputs[0]), || "GFTM re-save differs".into())?;
        }
    }

    let grid = Grid::uniform(-2.0, 2.0, 1, 17).unwrap();
    let p = nar_closed_form_transition(&TruncGaussNar::reference(), &grid).map_err(|e| e.to_string())?;
    let path = dir.path().join("p.gftm");
    p.save(&path).map_err(|e| e.to_string())?;
    let back = TransitionMatrix::load(&path).map_err(|e| e.to_string())?;
    let bits = |v: &[f64]| v.iter().map(|x| x.to_bits()).collect::<Vec<u64>>();
    ensure(bits(back.as_column_major()) == bits(p.as_column_major()), || {
        "GFTM round trip".into()
    })?;

    let mut r = rng("belief");
    let e = BeliefVector::new((0..33).map(|_| r.random::<f64>() * 1e-3).collect()).unwrap();
    let path = dir.path().join("e.gfbv");
    e.save(&path).map_err(|e| e.to_string())?;
    let back = BeliefVector::load(&path).map_err(|e| e.to_string())?;
    ensure(bits(back.as_slice()) == bits(e.as_slice()), || "GFBV round trip".into())?;
    Ok("sweep, bounds, regularity and train outputs byte-identical across runs; GFTM/GFBV bit-exact".into())
}
