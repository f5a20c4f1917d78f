//! Worst-case error of the grid filter against a particle-filter reference,
//! across filter resolutions.

use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;

use crate::error::Result;
use crate::filter::run_filter;
use crate::harness::config::ExperimentConfig;
use crate::harness::csv::Table;
use crate::harness::train::{build_transition, Trained};
use crate::models::{simulate_trajectory, Trajectory};
use crate::particle::BootstrapFilter;
use crate::rng::{labels, StreamKey};
use crate::transition::{initial_belief, BeliefVector, DEFAULT_INITIAL_SAMPLES};

#[derive(Clone, Debug, PartialEq)]
pub struct SweepRow {
    pub obs_dim: usize,
    pub levels: usize,
    pub trial: usize,
    /// `max_t |grid estimate - particle estimate|`.
    pub worst_abs_error: f64,
    /// Wall-clock seconds of the grid filter run; not part of the
    /// deterministic output.
    pub runtime_seconds: f64,
}

struct Reference {
    obs_dim: usize,
    trial: usize,
    trajectory: Trajectory,
    estimates: Vec<Vec<f64>>,
}

/// Stream for the trajectory and reference filter of `(N, trial)`; shared by
/// every resolution so that all `L_S` see the same observations.
pub fn trial_key(master: &StreamKey, obs_dim: usize, trial: usize) -> StreamKey {
    master.child("sweep").index(obs_dim as u64).index(trial as u64)
}

pub fn run_error_sweep(cfg: &ExperimentConfig) -> Result<Vec<SweepRow>> {
    cfg.validate()?;
    let model = cfg.nar_model()?;
    let key = StreamKey::new(cfg.seed);

    let trained: Vec<(Trained, BeliefVector)> = cfg
        .levels
        .par_iter()
        .map(|&l| {
            let t = build_transition(cfg, &model, l, &key)?;
            let mut rng = key.child(labels::INITIAL_CONDITION).index(l as u64).rng();
            let e0 = initial_belief(&t.grid, &model, DEFAULT_INITIAL_SAMPLES, &mut rng)?;
            Ok((t, e0))
        })
        .collect::<Result<_>>()?;

    let jobs: Vec<(usize, usize)> = cfg
        .obs_dims
        .iter()
        .flat_map(|&n| (0..cfg.trials).map(move |k| (n, k)))
        .collect();
    let references: Vec<Reference> = jobs
        .par_iter()
        .map(|&(n, k)| {
            let obs = cfg.observation_model(n)?;
            let tk = trial_key(&key, n, k);
            let trajectory = simulate_trajectory(&model, &obs, cfg.horizon, &tk)?;
            let estimates = BootstrapFilter::new(&model, &obs, cfg.particles, &tk.child("oracle"))?
                .run(&trajectory.observations)?;
            Ok(Reference {
                obs_dim: n,
                trial: k,
                trajectory,
                estimates,
            })
        })
        .collect::<Result<_>>()?;

    let pairs: Vec<(&Reference, &(Trained, BeliefVector))> = references
        .iter()
        .flat_map(|r| trained.iter().map(move |t| (r, t)))
        .collect();
    let mut rows: Vec<SweepRow> = pairs
        .par_iter()
        .map(|&(r, (t, e0))| {
            let obs = cfg.observation_model(r.obs_dim)?;
            let start = Instant::now();
            let out = run_filter(&t.matrix, &t.grid, &obs, &r.trajectory.observations, e0)?;
            let runtime_seconds = start.elapsed().as_secs_f64();
            let worst = out
                .iter()
                .zip(&r.estimates)
                .map(|(g, p)| (g.estimate[0] - p[0]).abs())
                .fold(0.0, f64::max);
            Ok(SweepRow {
                obs_dim: r.obs_dim,
                levels: t.grid.len(),
                trial: r.trial,
                worst_abs_error: worst,
                runtime_seconds,
            })
        })
        .collect::<Result<_>>()?;
    rows.sort_by_key(|r| (r.obs_dim, r.levels, r.trial));
    Ok(rows)
}

pub fn sweep_table(cfg: &ExperimentConfig, rows: &[SweepRow]) -> Table {
    let mut t = Table::new(vec!["N", "L_S", "trial", "worst_abs_error"], &cfg.hash(), cfg.seed);
    for r in rows {
        t.push(vec![
            r.obs_dim.into(),
            r.levels.into(),
            r.trial.into(),
            r.worst_abs_error.into(),
        ]);
    }
    t
}

/// Runtimes go to a sidecar so the main table stays byte-reproducible.
pub fn timing_table(cfg: &ExperimentConfig, rows: &[SweepRow]) -> Table {
    let mut t = Table::new(vec!["N", "L_S", "trial", "runtime_seconds"], &cfg.hash(), cfg.seed);
    for r in rows {
        t.push(vec![
            r.obs_dim.into(),
            r.levels.into(),
            r.trial.into(),
            r.runtime_seconds.into(),
        ]);
    }
    t
}

pub fn timing_path(out: &Path) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(".timing.csv");
    PathBuf::from(s)
}

/// Mean over trials of the worst error, per `(N, L_S)` in sorted order.
pub fn mean_worst_error(rows: &[SweepRow]) -> Vec<(usize, usize, f64)> {
    let mut out: Vec<(usize, usize, f64, usize)> = Vec::new();
    for r in rows {
        match out.last_mut() {
            Some(last) if last.0 == r.obs_dim && last.1 == r.levels => {
                last.2 += r.worst_abs_error;
                last.3 += 1;
            }
            _ => out.push((r.obs_dim, r.levels, r.worst_abs_error, 1)),
        }
    }
    out.into_iter().map(|(n, l, s, c)| (n, l, s / c as f64)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> ExperimentConfig {
        let mut c = ExperimentConfig::default();
        c.obs_dims = vec![1, 4];
        c.levels = vec![6];
        c.trials = 2;
        c.horizon = 10;
        c.particles = 200;
        c.training_samples = 20_000;
        c
    }

    #[test]
    fn one_level_gives_trials_rows_per_n() {
        let rows = run_error_sweep(&small()).unwrap();
        assert_eq!(rows.len(), 4);
        assert_eq!(
            rows.iter().map(|r| (r.obs_dim, r.trial)).collect::<Vec<_>>(),
            vec![(1, 0), (1, 1), (4, 0), (4, 1)]
        );
        assert!(rows
            .iter()
            .all(|r| r.worst_abs_error.is_finite() && r.worst_abs_error >= 0.0));
        assert_eq!(mean_worst_error(&rows).len(), 2);
    }

    #[test]
    fn adding_levels_keeps_shared_rows() {
        let a = run_error_sweep(&small()).unwrap();
        let mut c = small();
        c.levels = vec![3, 6];
        let b = run_error_sweep(&c).unwrap();
        let b6: Vec<f64> = b.iter().filter(|r| r.levels == 6).map(|r| r.worst_abs_error).collect();
        let a6: Vec<f64> = a.iter().map(|r| r.worst_abs_error).collect();
        assert_eq!(a6, b6);
    }
}
