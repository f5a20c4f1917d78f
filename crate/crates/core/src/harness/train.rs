//! Offline construction of the transition matrix.

use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::harness::config::{ExperimentConfig, Quantization, TransitionSource};
use crate::harness::csv::Table;
use crate::models::NarModel;
use crate::rng::{labels, StreamKey};
use crate::transition::{
    empirical_transition_marginal, empirical_transition_markovian, nar_closed_form_transition, TransitionMatrix,
};

#[derive(Clone, Debug)]
pub struct Trained {
    pub grid: Grid,
    pub matrix: TransitionMatrix,
    /// Per-column visit counts; `None` for the closed form.
    pub visits: Option<Vec<u64>>,
    pub zero_visit_columns: Vec<usize>,
}

/// Builds `P` at `levels` cells as configured. Empirical estimates draw from
/// the training stream for `levels`, so the sweep and `train` agree.
pub fn build_transition(cfg: &ExperimentConfig, model: &NarModel, levels: usize, key: &StreamKey) -> Result<Trained> {
    let grid = model.grid(levels)?;
    let mut rng = key.child(labels::TRAINING).index(levels as u64).rng();
    let trained = match (cfg.quantization, cfg.transition) {
        (Quantization::Markovian, TransitionSource::ClosedForm) => Trained {
            matrix: nar_closed_form_transition(&model.nar, &grid)?,
            grid,
            visits: None,
            zero_visit_columns: Vec::new(),
        },
        (Quantization::Markovian, TransitionSource::Empirical) => {
            let e = empirical_transition_markovian(model, &grid, cfg.training_samples, &mut rng)?;
            Trained {
                grid,
                matrix: e.matrix,
                visits: Some(e.visits),
                zero_visit_columns: e.zero_visit_columns,
            }
        }
        (Quantization::Marginal, TransitionSource::Empirical) => {
            let e = empirical_transition_marginal(model, &grid, cfg.training_samples, cfg.burn_in, &mut rng)?;
            Trained {
                grid,
                matrix: e.matrix,
                visits: Some(e.visits),
                zero_visit_columns: e.zero_visit_columns,
            }
        }
        (Quantization::Marginal, TransitionSource::ClosedForm) => {
            return Err(Error::Config(
                "the closed-form transition matrix describes the Markovian quantization only".into(),
            ))
        }
    };
    Ok(trained)
}

/// Path of the visit-count sidecar written next to a matrix file.
pub fn visits_path(out: &Path) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(".visits.csv");
    PathBuf::from(s)
}

/// Trains at the single configured resolution, writes the GFTM file to `out`
/// and, for empirical estimates, a CSV of column visit counts beside it.
pub fn train_transition(cfg: &ExperimentConfig, out: &Path) -> Result<Trained> {
    cfg.validate()?;
    let [levels] = cfg.levels[..] else {
        return Err(Error::Config(format!(
            "train needs exactly one entry in `levels`, got {}",
            cfg.levels.len()
        )));
    };
    let model = cfg.nar_model()?;
    let trained = build_transition(cfg, &model, levels, &StreamKey::new(cfg.seed))
        .map_err(|e| e.context(format!("training at L_S = {levels}")))?;
    trained.matrix.save(out)?;
    if let Some(visits) = &trained.visits {
        let mut table = Table::new(vec!["cell", "center", "visits"], &cfg.hash(), cfg.seed);
        table
            .comments
            .push(format!("zero_visit_columns={}", trained.zero_visit_columns.len()));
        for (l, &v) in visits.iter().enumerate() {
            table.push(vec![l.into(), trained.grid.center(l)[0].into(), v.into()]);
        }
        table.write(&visits_path(out))?;
    }
    Ok(trained)
}
