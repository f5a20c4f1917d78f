//! Pathwise quantization-error bounds, measured against their analytic values.

use log::warn;
use rand::Rng;
use rayon::prelude::*;

use crate::error::Result;
use crate::grid::Grid;
use crate::harness::config::ExperimentConfig;
use crate::harness::csv::Table;
use crate::models::{HiddenModel, NarModel, TransitionMapping};
use crate::rng::{labels, StreamKey};

pub const UNIFORM_SAMPLES: &str = "quantizer_uniform_samples";
pub const GRID_POINTS: &str = "quantizer_grid_points";
pub const MARGINAL_PATH: &str = "marginal_path";
pub const MARKOVIAN_PATH: &str = "markovian_path";

#[derive(Clone, Debug, PartialEq)]
pub struct BoundRow {
    pub check: &'static str,
    pub levels: usize,
    pub measured: f64,
    pub bound: f64,
    pub pass: bool,
}

impl BoundRow {
    fn new(check: &'static str, levels: usize, measured: f64, bound: f64) -> Self {
        Self {
            check,
            levels,
            measured,
            bound,
            pass: measured <= bound,
        }
    }
}

/// `sum_m |x_m - Q(x)_m|`, the distance the bounds are stated in.
fn error(grid: &Grid, x: &[f64]) -> Result<f64> {
    let q = grid.snap(x)?;
    Ok(x.iter().zip(q).map(|(a, b)| (a - b).abs()).sum())
}

fn uniform_samples(model: &NarModel, grid: &Grid, n: usize, key: &StreamKey) -> Result<f64> {
    let mut rng = key.rng();
    let (a, b) = model.support()[0];
    let mut worst = 0.0f64;
    for _ in 0..n {
        let x = a + (b - a) * rng.random::<f64>();
        worst = worst.max(error(grid, &[x])?);
    }
    Ok(worst)
}

fn grid_points(grid: &Grid) -> Result<f64> {
    let mut worst = 0.0f64;
    for c in grid.centers() {
        worst = worst.max(error(grid, c)?);
    }
    Ok(worst)
}

/// Error of the marginal quantization `Q(X_t)` along `paths` chains that
/// together visit `points` states.
fn marginal_paths(model: &NarModel, grid: &Grid, points: usize, paths: usize, key: &StreamKey) -> Result<f64> {
    let per_path = points.div_ceil(paths);
    let mut worst = 0.0f64;
    let mut remaining = points;
    for p in 0..paths {
        let k = key.index(p as u64);
        let mut init = k.child(labels::INITIAL_CONDITION).rng();
        let mut rng = k.child(labels::STATE_INNOVATIONS).rng();
        let mut x = model.sample_initial(&mut init);
        for _ in 0..per_path.min(remaining) {
            x = model.sample_next(&x, &mut rng);
            worst = worst.max(error(grid, &x)?);
        }
        remaining = remaining.saturating_sub(per_path);
    }
    Ok(worst)
}

/// `sup_t |X_t - X~_t|` where `X~` is the Markovian quantization driven by
/// the same innovations: `X~_{-1} = Q(X_{-1})`, `X~_t = Q(f(X~_{t-1}, W_t))`.
fn markovian_paths(model: &NarModel, grid: &Grid, horizon: usize, paths: usize, key: &StreamKey) -> Result<f64> {
    let mut worst = 0.0f64;
    for p in 0..paths {
        let k = key.index(p as u64);
        let mut init = k.child(labels::INITIAL_CONDITION).rng();
        let mut rng = k.child(labels::STATE_INNOVATIONS).rng();
        let mut x = model.sample_initial(&mut init);
        let mut xq = grid.snap(&x)?.to_vec();
        worst = worst.max((x[0] - xq[0]).abs());
        for _ in 0..=horizon {
            let w = model.sample_innovation(&mut rng);
            x = TransitionMapping::apply(model, &x, &w);
            xq = grid.snap(&TransitionMapping::apply(model, &xq, &w))?.to_vec();
            worst = worst.max((x[0] - xq[0]).abs());
        }
    }
    Ok(worst)
}

/// Markovian-path bound `e (2 - K) / (1 - K)`, `e` the worst single-step
/// quantization error and `K < 1` the Lipschitz constant of the dynamics.
pub fn markovian_bound(grid: &Grid, k: f64) -> f64 {
    grid.max_quantization_error() * (2.0 - k) / (1.0 - k)
}

pub fn run_bound_checks(cfg: &ExperimentConfig) -> Result<Vec<BoundRow>> {
    cfg.validate()?;
    let model = cfg.nar_model()?;
    let key = StreamKey::new(cfg.seed).child("bounds");
    let contraction = model.lipschitz_bound().filter(|&k| k < 1.0);
    if contraction.is_none() {
        warn!(
            "h = {:?} is not known to be contractive; skipping the Markovian path rows",
            model.nar.map()
        );
    }
    let per_level: Vec<Vec<BoundRow>> = cfg
        .bound_levels
        .par_iter()
        .map(|&l| {
            let grid = model.grid(l)?;
            let e = grid.max_quantization_error();
            let lk = |name: &str| key.child(name).index(l as u64);
            let mut rows = vec![
                BoundRow::new(
                    UNIFORM_SAMPLES,
                    l,
                    uniform_samples(&model, &grid, cfg.bound_points, &lk(UNIFORM_SAMPLES))?,
                    e,
                ),
                BoundRow::new(GRID_POINTS, l, grid_points(&grid)?, e),
                BoundRow::new(
                    MARGINAL_PATH,
                    l,
                    marginal_paths(&model, &grid, cfg.bound_points, cfg.bound_paths, &lk(MARGINAL_PATH))?,
                    e,
                ),
            ];
            if let Some(k) = contraction {
                let measured = markovian_paths(&model, &grid, cfg.bound_horizon, cfg.bound_paths, &lk(MARKOVIAN_PATH))?;
                rows.push(BoundRow::new(MARKOVIAN_PATH, l, measured, markovian_bound(&grid, k)));
            }
            Ok(rows)
        })
        .collect::<Result<_>>()?;
    let mut rows: Vec<BoundRow> = per_level.into_iter().flatten().collect();
    rows.sort_by_key(|r| (r.check, r.levels));
    Ok(rows)
}

pub fn bounds_table(cfg: &ExperimentConfig, rows: &[BoundRow]) -> Table {
    let mut t = Table::new(
        vec!["check_name", "L_S", "measured", "bound", "pass"],
        &cfg.hash(),
        cfg.seed,
    );
    for r in rows {
        t.push(vec![
            r.check.into(),
            r.levels.into(),
            r.measured.into(),
            r.bound.into(),
            r.pass.into(),
        ]);
    }
    t
}
