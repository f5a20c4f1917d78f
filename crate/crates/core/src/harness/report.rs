//! Regularity report driver.

use crate::error::Result;
use crate::harness::config::ExperimentConfig;
use crate::harness::csv::Table;
use crate::models::{HiddenModel, NarModel};
use crate::regularity::{regularity_report, RegularityOptions, RegularityReport};
use crate::rng::{labels, StreamKey};

/// Spacing between the chain states used as evaluation points.
const X_THINNING: usize = 50;

fn chain(model: &NarModel, n: usize, burn_in: usize, thin: usize, key: &StreamKey) -> Vec<f64> {
    let mut init = key.child(labels::INITIAL_CONDITION).rng();
    let mut rng = key.child(labels::STATE_INNOVATIONS).rng();
    let mut x = model.sample_initial(&mut init);
    for _ in 0..burn_in {
        x = model.sample_next(&x, &mut rng);
    }
    (0..n)
        .map(|_| {
            for _ in 0..thin {
                x = model.sample_next(&x, &mut rng);
            }
            x[0]
        })
        .collect()
}

/// Draws conditioning samples and evaluation points from two independent
/// stationary runs of the configured chain, then evaluates both deficits and
/// the drift bound at every configured resolution.
pub fn run_regularity_report(cfg: &ExperimentConfig) -> Result<RegularityReport> {
    cfg.validate()?;
    let model = cfg.nar_model()?;
    let key = StreamKey::new(cfg.seed).child("regularity");
    let samples = chain(&model, cfg.reg_samples, cfg.burn_in, 1, &key.child("conditioning"));
    let xs = chain(&model, cfg.reg_points, cfg.burn_in, X_THINNING, &key.child("points"));
    let options = RegularityOptions {
        quad_tol: cfg.reg_quad_tol,
        y_points_per_level: cfg.reg_y_points_per_level,
        max_conditioning: cfg.reg_max_conditioning,
    };
    regularity_report(&model.nar, &cfg.reg_levels, &samples, &xs, &options)
}

pub fn regularity_table(cfg: &ExperimentConfig, report: &RegularityReport) -> Table {
    let mut t = Table::new(
        vec![
            "L_S",
            "x",
            "deficit_I",
            "deficit_II",
            "bound_II",
            "se_I",
            "se_II",
            "fw_alpha",
            "in_cell_samples",
        ],
        &cfg.hash(),
        cfg.seed,
    );
    t.comments.push(report.caveat.to_string());
    for r in &report.rows {
        t.push(vec![
            r.levels.into(),
            r.x.into(),
            r.deficit_i.into(),
            r.deficit_ii.into(),
            r.bound_ii.into(),
            r.se_i.into(),
            r.se_ii.into(),
            r.fw_alpha.into(),
            r.samples.into(),
        ]);
    }
    t
}
