//! Flat `key = value` experiment configuration.
//!
//! Lines are `key = value`; `#` starts a comment; blank lines are ignored.
//! Lists are comma separated, and integer lists also accept inclusive ranges
//! such as `2..50`. Later assignments override earlier ones, which is how
//! `--set key=value` flags are applied.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::models::{InitialLaw, MeanFn, NarModel, ObservationModel, ScalarMap, TruncGaussNar};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum HName {
    /// `B * tanh(scale * x)`
    TanhScaled,
    /// `scale * x` clipped to `[-B, B]`
    Linear,
    /// `h = B`
    Constant,
}

impl HName {
    fn as_str(self) -> &'static str {
        match self {
            HName::TanhScaled => "tanh_scaled",
            HName::Linear => "linear",
            HName::Constant => "constant",
        }
    }
}

impl FromStr for HName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "tanh_scaled" => Ok(HName::TanhScaled),
            "linear" => Ok(HName::Linear),
            "constant" => Ok(HName::Constant),
            _ => Err(Error::Config(format!(
                "unknown h `{s}` (tanh_scaled, linear, constant)"
            ))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Quantization {
    Markovian,
    Marginal,
}

impl FromStr for Quantization {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "markovian" => Ok(Quantization::Markovian),
            "marginal" => Ok(Quantization::Marginal),
            _ => Err(Error::Config(format!(
                "unknown quantization `{s}` (markovian, marginal)"
            ))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TransitionSource {
    ClosedForm,
    Empirical,
}

impl FromStr for TransitionSource {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "closed_form" => Ok(TransitionSource::ClosedForm),
            "empirical" => Ok(TransitionSource::Empirical),
            _ => Err(Error::Config(format!(
                "unknown transition source `{s}` (closed_form, empirical)"
            ))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum InitialSpec {
    Uniform,
    Point(f64),
}

/// Everything an experiment run depends on. The defaults reproduce the
/// error-versus-resolution experiment: `h(x) = tanh(1.3 x)`, `alpha = 1`,
/// `sigma = 0.3`, `y_t = X_t^3 1_N + w_t` with noise variance 2,
/// `N in {1, 4, 16}`, uniform `X_{-1}`, marginal quantization trained on
/// `3 * 10^5` samples, a 5000-particle reference, `T = 150`, 10 trials and
/// `L_S = 2..50`.
#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub h: HName,
    pub h_scale: f64,
    pub bound: f64,
    pub alpha: f64,
    pub sigma: f64,
    pub initial: InitialSpec,

    pub obs_dims: Vec<usize>,
    pub obs_mean: String,
    pub obs_variance: f64,

    pub levels: Vec<usize>,
    pub quantization: Quantization,
    pub transition: TransitionSource,
    pub training_samples: usize,
    pub burn_in: usize,

    pub particles: usize,

    pub horizon: usize,
    pub trials: usize,
    pub seed: u64,
    pub output: Option<PathBuf>,

    pub bound_points: usize,
    pub bound_levels: Vec<usize>,
    pub bound_horizon: usize,
    pub bound_paths: usize,

    pub reg_levels: Vec<usize>,
    pub reg_points: usize,
    pub reg_samples: usize,
    pub reg_max_conditioning: usize,
    pub reg_y_points_per_level: usize,
    pub reg_quad_tol: f64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            h: HName::TanhScaled,
            h_scale: 1.3,
            bound: 1.0,
            alpha: 1.0,
            sigma: 0.3,
            initial: InitialSpec::Uniform,
            obs_dims: vec![1, 4, 16],
            obs_mean: "cubic".into(),
            obs_variance: 2.0,
            levels: (2..=50).collect(),
            quantization: Quantization::Marginal,
            transition: TransitionSource::Empirical,
            training_samples: 300_000,
            burn_in: 1000,
            particles: 5000,
            horizon: 150,
            trials: 10,
            seed: 0,
            output: None,
            bound_points: 100_000,
            bound_levels: vec![4, 16, 64],
            bound_horizon: 200,
            bound_paths: 10,
            reg_levels: vec![8, 32],
            reg_points: 100,
            reg_samples: 100_000,
            reg_max_conditioning: 1000,
            reg_y_points_per_level: 10,
            reg_quad_tol: 1e-11,
        }
    }
}

fn parse_num<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("{key}: cannot parse `{value}`")))
}

fn parse_usize_list(key: &str, value: &str) -> Result<Vec<usize>> {
    let mut out = Vec::new();
    for part in value.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        if let Some((lo, hi)) = part.split_once("..") {
            let lo: usize = parse_num(key, lo.trim())?;
            let hi: usize = parse_num(key, hi.trim())?;
            if hi < lo {
                return Err(Error::Config(format!("{key}: empty range `{part}`")));
            }
            out.extend(lo..=hi);
        } else {
            out.push(parse_num(key, part)?);
        }
    }
    Ok(out)
}

fn render_list(v: &[usize]) -> String {
    v.iter().map(usize::to_string).collect::<Vec<_>>().join(",")
}

impl ExperimentConfig {
    /// Parses configuration text on top of the defaults.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected `key = value`", n + 1)))?;
            cfg.set(k.trim(), v.trim())
                .map_err(|e| e.context(format!("line {}", n + 1)))?;
        }
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text).map_err(|e| e.context(path.display().to_string()))
    }

    /// Applies a `key=value` override.
    pub fn apply_override(&mut self, assignment: &str) -> Result<()> {
        let (k, v) = assignment
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("override `{assignment}` is not key=value")))?;
        self.set(k.trim(), v.trim())
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "h" => self.h = value.parse()?,
            "h_scale" => self.h_scale = parse_num(key, value)?,
            "bound" => self.bound = parse_num(key, value)?,
            "alpha" => self.alpha = parse_num(key, value)?,
            "sigma" => self.sigma = parse_num(key, value)?,
            "initial" => {
                self.initial = match value {
                    "uniform" => InitialSpec::Uniform,
                    v if v.starts_with("point:") => InitialSpec::Point(parse_num(key, &v[6..])?),
                    _ => return Err(Error::Config(format!("initial: `{value}` (uniform, point:<x>)"))),
                }
            }
            "obs_dims" => self.obs_dims = parse_usize_list(key, value)?,
            "obs_mean" => self.obs_mean = value.to_string(),
            "obs_variance" => self.obs_variance = parse_num(key, value)?,
            "levels" => self.levels = parse_usize_list(key, value)?,
            "quantization" => self.quantization = value.parse()?,
            "transition" => self.transition = value.parse()?,
            "training_samples" => self.training_samples = parse_num(key, value)?,
            "burn_in" => self.burn_in = parse_num(key, value)?,
            "particles" => self.particles = parse_num(key, value)?,
            "horizon" => self.horizon = parse_num(key, value)?,
            "trials" => self.trials = parse_num(key, value)?,
            "seed" => self.seed = parse_num(key, value)?,
            "output" => self.output = Some(PathBuf::from(value)),
            "bound_points" => self.bound_points = parse_num(key, value)?,
            "bound_levels" => self.bound_levels = parse_usize_list(key, value)?,
            "bound_horizon" => self.bound_horizon = parse_num(key, value)?,
            "bound_paths" => self.bound_paths = parse_num(key, value)?,
            "reg_levels" => self.reg_levels = parse_usize_list(key, value)?,
            "reg_points" => self.reg_points = parse_num(key, value)?,
            "reg_samples" => self.reg_samples = parse_num(key, value)?,
            "reg_max_conditioning" => self.reg_max_conditioning = parse_num(key, value)?,
            "reg_y_points_per_level" => self.reg_y_points_per_level = parse_num(key, value)?,
            "reg_quad_tol" => self.reg_quad_tol = parse_num(key, value)?,
            _ => return Err(Error::Config(format!("unknown key `{key}`"))),
        }
        Ok(())
    }

    /// Checks counts, parameter ranges and option combinations.
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("training_samples", self.training_samples),
            ("particles", self.particles),
            ("horizon", self.horizon),
            ("trials", self.trials),
            ("bound_points", self.bound_points),
            ("bound_horizon", self.bound_horizon),
            ("bound_paths", self.bound_paths),
            ("reg_points", self.reg_points),
            ("reg_samples", self.reg_samples),
            ("reg_max_conditioning", self.reg_max_conditioning),
            ("reg_y_points_per_level", self.reg_y_points_per_level),
        ];
        for (k, v) in positive {
            if v == 0 {
                return Err(Error::Config(format!("{k} must be positive")));
            }
        }
        for (k, list) in [
            ("obs_dims", &self.obs_dims),
            ("levels", &self.levels),
            ("bound_levels", &self.bound_levels),
            ("reg_levels", &self.reg_levels),
        ] {
            if list.is_empty() || list.contains(&0) {
                return Err(Error::Config(format!(
                    "{k} must be a non-empty list of positive integers"
                )));
            }
            let mut sorted = list.clone();
            sorted.sort_unstable();
            sorted.dedup();
            if sorted.len() != list.len() {
                return Err(Error::Config(format!("{k} has repeated entries")));
            }
        }
        for (k, v) in [
            ("alpha", self.alpha),
            ("sigma", self.sigma),
            ("obs_variance", self.obs_variance),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{k} must be positive, got {v}")));
            }
        }
        if !(self.bound >= 0.0 && self.bound.is_finite() && self.h_scale.is_finite()) {
            return Err(Error::Config("bound must be nonnegative and h_scale finite".into()));
        }
        if MeanFn::from_name(&self.obs_mean).is_none() {
            return Err(Error::Config(format!(
                "unknown obs_mean `{}` (identity, cubic)",
                self.obs_mean
            )));
        }
        if self.quantization == Quantization::Marginal && self.transition == TransitionSource::ClosedForm {
            return Err(Error::Config(
                "the closed-form transition matrix describes the Markovian quantization only".into(),
            ));
        }
        if !(self.reg_quad_tol > 0.0) {
            return Err(Error::Config("reg_quad_tol must be positive".into()));
        }
        self.nar_model().map_err(|e| Error::Config(e.to_string()))?;
        Ok(())
    }

    pub fn scalar_map(&self) -> ScalarMap {
        match self.h {
            HName::TanhScaled => ScalarMap::Tanh {
                amplitude: self.bound,
                scale: self.h_scale,
            },
            HName::Linear => ScalarMap::ClippedLinear {
                slope: self.h_scale,
                bound: self.bound,
            },
            HName::Constant => ScalarMap::Constant(self.bound),
        }
    }

    pub fn nar(&self) -> Result<TruncGaussNar> {
        TruncGaussNar::new(self.scalar_map(), self.alpha, self.sigma)
    }

    pub fn nar_model(&self) -> Result<NarModel> {
        let initial = match self.initial {
            InitialSpec::Uniform => InitialLaw::Uniform,
            InitialSpec::Point(p) => InitialLaw::PointMass(vec![p]),
        };
        NarModel::new(self.nar()?, initial)
    }

    pub fn observation_model(&self, obs_dim: usize) -> Result<ObservationModel> {
        let mean = MeanFn::from_name(&self.obs_mean)
            .ok_or_else(|| Error::Config(format!("unknown obs_mean `{}`", self.obs_mean)))?;
        ObservationModel::isotropic(obs_dim, mean, self.obs_variance)
    }

    /// Canonical `key = value` rendering; parsing it gives back `self`.
    pub fn render(&self) -> String {
        let mut s = String::new();
        let initial = match self.initial {
            InitialSpec::Uniform => "uniform".to_string(),
            InitialSpec::Point(p) => format!("point:{p:?}"),
        };
        let quant = match self.quantization {
            Quantization::Markovian => "markovian",
            Quantization::Marginal => "marginal",
        };
        let source = match self.transition {
            TransitionSource::ClosedForm => "closed_form",
            TransitionSource::Empirical => "empirical",
        };
        let pairs: Vec<(&str, String)> = vec![
            ("h", self.h.as_str().into()),
            ("h_scale", format!("{:?}", self.h_scale)),
            ("bound", format!("{:?}", self.bound)),
            ("alpha", format!("{:?}", self.alpha)),
            ("sigma", format!("{:?}", self.sigma)),
            ("initial", initial),
            ("obs_dims", render_list(&self.obs_dims)),
            ("obs_mean", self.obs_mean.clone()),
            ("obs_variance", format!("{:?}", self.obs_variance)),
            ("levels", render_list(&self.levels)),
            ("quantization", quant.into()),
            ("transition", source.into()),
            ("training_samples", self.training_samples.to_string()),
            ("burn_in", self.burn_in.to_string()),
            ("particles", self.particles.to_string()),
            ("horizon", self.horizon.to_string()),
            ("trials", self.trials.to_string()),
            ("seed", self.seed.to_string()),
            ("bound_points", self.bound_points.to_string()),
            ("bound_levels", render_list(&self.bound_levels)),
            ("bound_horizon", self.bound_horizon.to_string()),
            ("bound_paths", self.bound_paths.to_string()),
            ("reg_levels", render_list(&self.reg_levels)),
            ("reg_points", self.reg_points.to_string()),
            ("reg_samples", self.reg_samples.to_string()),
            ("reg_max_conditioning", self.reg_max_conditioning.to_string()),
            ("reg_y_points_per_level", self.reg_y_points_per_level.to_string()),
            ("reg_quad_tol", format!("{:?}", self.reg_quad_tol)),
        ];
        for (k, v) in pairs {
            let _ = writeln!(s, "{k} = {v}");
        }
        if let Some(out) = &self.output {
            let _ = writeln!(s, "output = {}", out.display());
        }
        s
    }

    /// First 16 hex digits of the SHA-256 of [`render`](Self::render),
    /// ignoring the output path.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.output = None;
        let digest = Sha256::digest(c.render().as_bytes());
        digest[..8].iter().map(|b| format!("{b:02x}")).collect()
    }
}
