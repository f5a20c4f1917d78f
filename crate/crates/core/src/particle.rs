//! Bootstrap particle filter with systematic resampling, used as the
//! reference filter when the exact posterior is out of reach.

use rand::Rng;

use crate::error::{Error, Result};
use crate::models::{HiddenModel, ObservationModel};
use crate::rng::{labels, StreamKey, StreamRng};

pub const DEFAULT_PARTICLES: usize = 5000;

#[derive(Clone, Debug, PartialEq)]
pub struct ParticleCloud {
    pub particles: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
}

impl ParticleCloud {
    /// Equally weighted cloud.
    pub fn uniform(particles: Vec<Vec<f64>>) -> Self {
        let n = particles.len();
        Self {
            particles,
            weights: vec![1.0 / n as f64; n],
        }
    }

    pub fn from_initial(hidden: &dyn HiddenModel, n: usize, rng: &mut StreamRng) -> Self {
        Self::uniform((0..n).map(|_| hidden.sample_initial(rng)).collect())
    }

    pub fn len(&self) -> usize {
        self.particles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.particles.is_empty()
    }

    /// Effective sample size `1 / sum w_i^2`.
    pub fn ess(&self) -> f64 {
        1.0 / self.weights.iter().map(|w| w * w).sum::<f64>()
    }
}

/// Systematic resampling: probes `(u + i) / n_out`, `i = 0..n_out`, are mapped
/// through the cumulative weights. Returns ancestor indices in ascending order.
/// Weights need not be normalized.
pub fn systematic_resample(weights: &[f64], u: f64, n_out: usize) -> Result<Vec<usize>> {
    if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
        return Err(Error::invalid("weights must be finite and nonnegative"));
    }
    let total: f64 = weights.iter().sum();
    if !(total > 0.0) {
        return Err(Error::invalid("cannot resample all-zero weights"));
    }
    if !(0.0..1.0).contains(&u) {
        return Err(Error::invalid(format!("offset u = {u} not in [0, 1)")));
    }
    // scaled so probes are u + i and the cumulative weights end at n_out
    let scale = n_out as f64 / total;
    let last = weights.iter().rposition(|&w| w > 0.0).expect("total is positive");
    let mut out = Vec::with_capacity(n_out);
    let mut cum = 0.0;
    let mut k = 0;
    for i in 0..n_out {
        let probe = u + i as f64;
        while k < last && cum + weights[k] * scale <= probe {
            cum += weights[k] * scale;
            k += 1;
        }
        out.push(k);
    }
    Ok(out)
}

/// `sum_i w_i x_i` over a normalized cloud.
pub fn pf_posterior_mean(cloud: &ParticleCloud) -> Vec<f64> {
    let dim = cloud.particles.first().map_or(0, Vec::len);
    let total: f64 = cloud.weights.iter().sum();
    let mut mean = vec![0.0; dim];
    for (x, &w) in cloud.particles.iter().zip(&cloud.weights) {
        for (m, v) in mean.iter_mut().zip(x) {
            *m += w * v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= total);
    mean
}

/// Both halves of a bootstrap step.
#[derive(Clone, Debug)]
pub struct PfStep {
    /// Propagated particles with normalized observation weights.
    pub weighted: ParticleCloud,
    /// The weighted cloud after resampling; weights are uniform.
    pub resampled: ParticleCloud,
}

/// Normalized weights from log-weights, shifted by their maximum.
fn normalize_log_weights(log_w: &[f64]) -> Option<Vec<f64>> {
    let max = log_w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return None;
    }
    let w: Vec<f64> = log_w.iter().map(|l| (l - max).exp()).collect();
    let s: f64 = w.iter().sum();
    Some(w.into_iter().map(|v| v / s).collect())
}

/// Propagates every particle through the state dynamics and weights it by the
/// observation likelihood (the same routine the grid filter uses).
pub fn reweight(
    cloud: &ParticleCloud,
    hidden: &dyn HiddenModel,
    obs: &ObservationModel,
    t: usize,
    y: &[f64],
    rng: &mut StreamRng,
) -> Result<ParticleCloud> {
    if cloud.is_empty() {
        return Err(Error::invalid("empty particle cloud"));
    }
    let particles: Vec<Vec<f64>> = cloud.particles.iter().map(|x| hidden.sample_next(x, rng)).collect();
    let mut log_w = Vec::with_capacity(particles.len());
    for (x, &w0) in particles.iter().zip(&cloud.weights) {
        log_w.push(obs.log_likelihood(t, x, y)? + w0.ln());
    }
    // linear domain first; the shifted log domain only if everything underflows
    let linear: Vec<f64> = log_w.iter().map(|l| l.exp()).collect();
    let total: f64 = linear.iter().sum();
    let weights = if total > 0.0 && total.is_finite() {
        linear.into_iter().map(|w| w / total).collect()
    } else {
        normalize_log_weights(&log_w).ok_or(Error::ZeroPosterior {
            t: t as i64,
            max_likelihood: 0.0,
        })?
    };
    Ok(ParticleCloud { particles, weights })
}

pub fn resample(cloud: &ParticleCloud, rng: &mut StreamRng) -> Result<ParticleCloud> {
    let u: f64 = rng.random();
    let idx = systematic_resample(&cloud.weights, u, cloud.len())?;
    Ok(ParticleCloud::uniform(
        idx.into_iter().map(|i| cloud.particles[i].clone()).collect(),
    ))
}

/// One bootstrap step: propagate, weight by `N(y; mu(x), C(x))`, normalize,
/// resample systematically.
pub fn bootstrap_pf_step(
    cloud: &ParticleCloud,
    hidden: &dyn HiddenModel,
    obs: &ObservationModel,
    t: usize,
    y: &[f64],
    rng: &mut StreamRng,
) -> Result<PfStep> {
    let weighted = reweight(cloud, hidden, obs, t, y, rng)?;
    let resampled = resample(&weighted, rng)?;
    Ok(PfStep { weighted, resampled })
}

/// Bootstrap particle filter over a whole observation sequence.
///
/// Resamples at every step unless `ess_threshold` is set, in which case it
/// resamples only when the effective sample size drops below
/// `ess_threshold * n`.
#[derive(Clone, Debug)]
pub struct BootstrapFilter<'a> {
    hidden: &'a dyn HiddenModel,
    obs: &'a ObservationModel,
    cloud: ParticleCloud,
    propagation: StreamRng,
    resampling: StreamRng,
    ess_threshold: Option<f64>,
    t: usize,
}

impl<'a> BootstrapFilter<'a> {
    pub fn new(hidden: &'a dyn HiddenModel, obs: &'a ObservationModel, n: usize, key: &StreamKey) -> Result<Self> {
        if n == 0 {
            return Err(Error::invalid("particle count must be positive"));
        }
        let mut init = key.child(labels::INITIAL_CONDITION).rng();
        Ok(Self {
            hidden,
            obs,
            cloud: ParticleCloud::from_initial(hidden, n, &mut init),
            propagation: key.child(labels::PARTICLE_PROPAGATION).rng(),
            resampling: key.child(labels::PARTICLE_RESAMPLING).rng(),
            ess_threshold: None,
            t: 0,
        })
    }

    pub fn with_ess_threshold(mut self, threshold: Option<f64>) -> Self {
        self.ess_threshold = threshold;
        self
    }

    pub fn cloud(&self) -> &ParticleCloud {
        &self.cloud
    }

    /// Absorbs `y_t` and returns the weighted posterior mean (computed before
    /// resampling).
    pub fn step(&mut self, y: &[f64]) -> Result<Vec<f64>> {
        let weighted = reweight(&self.cloud, self.hidden, self.obs, self.t, y, &mut self.propagation)?;
        let mean = pf_posterior_mean(&weighted);
        let must_resample = match self.ess_threshold {
            None => true,
            Some(th) => weighted.ess() < th * weighted.len() as f64,
        };
        self.cloud = if must_resample {
            resample(&weighted, &mut self.resampling)?
        } else {
            weighted
        };
        self.t += 1;
        Ok(mean)
    }

    pub fn run(mut self, observations: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        observations.iter().map(|y| self.step(y)).collect()
    }
}
