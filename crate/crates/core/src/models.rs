//! The partially observed system: hidden state dynamics on a compact support,
//! and a conditionally Gaussian observation law.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, SymmetricEigen};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::normal;
use crate::rng::{labels, StreamKey, StreamRng};

/// Above this truncation ratio `alpha / sigma` the inverse-CDF sampler loses
/// accuracy and rejection sampling is used instead.
const INVERSE_CDF_MAX_RATIO: f64 = 8.0;

/// A bounded, continuous scalar map `h` driving an additive autoregression.
#[derive(Clone)]
pub enum ScalarMap {
    /// `amplitude * tanh(scale * x)`
    Tanh {
        amplitude: f64,
        scale: f64,
    },
    /// `slope * x`, clipped to `[-bound, bound]`
    ClippedLinear {
        slope: f64,
        bound: f64,
    },
    Constant(f64),
    Custom {
        f: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
        bound: f64,
        lipschitz: Option<f64>,
    },
}

impl ScalarMap {
    pub fn eval(&self, x: f64) -> f64 {
        match self {
            ScalarMap::Tanh { amplitude, scale } => amplitude * (scale * x).tanh(),
            ScalarMap::ClippedLinear { slope, bound } => (slope * x).clamp(-bound, *bound),
            ScalarMap::Constant(c) => *c,
            ScalarMap::Custom { f, .. } => f(x),
        }
    }

    /// `sup |h|`.
    pub fn bound(&self) -> f64 {
        match self {
            ScalarMap::Tanh { amplitude, .. } => amplitude.abs(),
            ScalarMap::ClippedLinear { bound, .. } => bound.abs(),
            ScalarMap::Constant(c) => c.abs(),
            ScalarMap::Custom { bound, .. } => *bound,
        }
    }

    pub fn lipschitz(&self) -> Option<f64> {
        match self {
            ScalarMap::Tanh { amplitude, scale } => Some((amplitude * scale).abs()),
            ScalarMap::ClippedLinear { slope, .. } => Some(slope.abs()),
            ScalarMap::Constant(_) => Some(0.0),
            ScalarMap::Custom { lipschitz, .. } => *lipschitz,
        }
    }
}

impl fmt::Debug for ScalarMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ScalarMap::Tanh { amplitude, scale } => write!(f, "{amplitude}*tanh({scale}*x)"),
            ScalarMap::ClippedLinear { slope, bound } => write!(f, "clip({slope}*x, {bound})"),
            ScalarMap::Constant(c) => write!(f, "{c}"),
            ScalarMap::Custom { bound, .. } => write!(f, "custom(|h| <= {bound})"),
        }
    }
}

/// Additive nonlinear autoregression `X_t = h(X_{t-1}) + W_t`, with `W_t` a
/// zero-mean Gaussian of scale `sigma` truncated to `[-alpha, alpha]`.
///
/// The state lives on `[-(B + alpha), B + alpha]` with `B = sup |h|`.
#[derive(Clone, Debug)]
pub struct TruncGaussNar {
    h: ScalarMap,
    bound: f64,
    alpha: f64,
    sigma: f64,
    // 2 Phi(alpha / sigma) - 1
    mass: f64,
}

impl TruncGaussNar {
    pub fn new(h: ScalarMap, alpha: f64, sigma: f64) -> Result<Self> {
        let bound = h.bound();
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(Error::invalid(format!("alpha must be positive, got {alpha}")));
        }
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::invalid(format!("sigma must be positive, got {sigma}")));
        }
        if !(bound.is_finite() && bound >= 0.0) {
            return Err(Error::invalid(format!("bound of h must be finite, got {bound}")));
        }
        let mass = normal::interval_mass(-alpha / sigma, alpha / sigma);
        Ok(Self {
            h,
            bound,
            alpha,
            sigma,
            mass,
        })
    }

    /// The experiment model: `h(x) = tanh(1.3 x)`, `alpha = 1`, `sigma = 0.3`.
    pub fn reference() -> Self {
        Self::new(
            ScalarMap::Tanh {
                amplitude: 1.0,
                scale: 1.3,
            },
            1.0,
            0.3,
        )
        .expect("reference parameters are valid")
    }

    pub fn h(&self, x: f64) -> f64 {
        self.h.eval(x)
    }

    pub fn map(&self) -> &ScalarMap {
        &self.h
    }

    pub fn bound(&self) -> f64 {
        self.bound
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    /// Half-width `B + alpha` of the state support.
    pub fn half_width(&self) -> f64 {
        self.bound + self.alpha
    }

    /// Gaussian mass kept by the truncation, `2 Phi(alpha / sigma) - 1`.
    pub fn truncation_mass(&self) -> f64 {
        self.mass
    }

    /// Innovation density `f_W(w) = phi(w / sigma) / (2 sigma Phi(alpha / sigma) - sigma)` on
    /// `[-alpha, alpha]`, zero elsewhere.
    pub fn fw_density(&self, w: f64) -> f64 {
        if w.abs() > self.alpha {
            return 0.0;
        }
        normal::pdf(w / self.sigma) / (self.sigma * self.mass)
    }

    /// `P(W in [lo, hi])`.
    pub fn fw_interval_mass(&self, lo: f64, hi: f64) -> f64 {
        let lo = lo.max(-self.alpha);
        let hi = hi.min(self.alpha);
        if hi <= lo {
            return 0.0;
        }
        normal::interval_mass(lo / self.sigma, hi / self.sigma) / self.mass
    }

    /// Transition density `kappa(y | x) = f_W(y - h(x))`.
    pub fn kernel_density(&self, y: f64, x: f64) -> f64 {
        self.fw_density(y - self.h(x))
    }

    pub fn sample_innovation(&self, rng: &mut StreamRng) -> f64 {
        let r = self.alpha / self.sigma;
        let w = if r <= INVERSE_CDF_MAX_RATIO {
            let lo = normal::cdf(-r);
            let u: f64 = rng.random();
            self.sigma * normal::quantile(lo + u * self.mass)
        } else {
            loop {
                let z: f64 = rng.sample(StandardNormal);
                if z.abs() <= r {
                    break self.sigma * z;
                }
            }
        };
        w.clamp(-self.alpha, self.alpha)
    }

    /// One draw of `h(x) + W`.
    pub fn step(&self, x: f64, rng: &mut StreamRng) -> f64 {
        self.apply(x, self.sample_innovation(rng))
    }

    pub fn apply(&self, x: f64, w: f64) -> f64 {
        let b = self.half_width();
        (self.h(x) + w).clamp(-b, b)
    }
}

/// Law of the initial state `X_{-1}` of an autoregression, applied
/// independently on every axis of the support.
#[derive(Clone, Debug, PartialEq)]
pub enum InitialLaw {
    /// Uniform on the whole support.
    Uniform,
    /// Dirac mass at a point.
    PointMass(Vec<f64>),
    /// Gaussian `N(mean, sd^2)` conditioned on the support.
    TruncatedGaussian { mean: f64, sd: f64 },
}

/// A transition mapping `X_t = f(X_{t-1}, W_t)` with its innovation sampler.
pub trait TransitionMapping: Send + Sync {
    fn sample_innovation(&self, rng: &mut StreamRng) -> Vec<f64>;

    fn apply(&self, x: &[f64], w: &[f64]) -> Vec<f64>;

    /// Uniform Lipschitz constant `K*` of `f(., w)`, if known. Values below 1
    /// mark the uniformly contractive case.
    fn lipschitz_bound(&self) -> Option<f64> {
        None
    }
}

/// A Markov state process on a compact hyperrectangle.
pub trait HiddenModel: Send + Sync {
    fn dim(&self) -> usize;

    /// Per-axis `(a, b)` of the support.
    fn support(&self) -> Vec<(f64, f64)>;

    fn sample_initial(&self, rng: &mut StreamRng) -> Vec<f64>;

    fn sample_next(&self, x: &[f64], rng: &mut StreamRng) -> Vec<f64>;

    /// The transition mapping, for models given in mapping form.
    fn mapping(&self) -> Option<&dyn TransitionMapping> {
        None
    }

    /// Closed-form `P(X_{-1} in cell j)` for every cell of `grid`, if available.
    fn initial_cell_mass(&self, _grid: &Grid) -> Option<Vec<f64>> {
        None
    }

    fn in_support(&self, x: &[f64]) -> bool {
        x.len() == self.dim() && x.iter().zip(self.support()).all(|(&v, (a, b))| v >= a && v <= b)
    }
}

impl fmt::Debug for dyn HiddenModel + '_ {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "HiddenModel(dim = {})", self.dim())
    }
}

/// A [`TruncGaussNar`] together with the law of its initial state.
#[derive(Clone, Debug)]
pub struct NarModel {
    pub nar: TruncGaussNar,
    pub initial: InitialLaw,
}

impl NarModel {
    pub fn new(nar: TruncGaussNar, initial: InitialLaw) -> Result<Self> {
        let b = nar.half_width();
        match &initial {
            InitialLaw::PointMass(p) if p.len() != 1 || p[0].abs() > b => {
                return Err(Error::invalid(format!("initial point {p:?} outside [-{b}, {b}]")));
            }
            InitialLaw::TruncatedGaussian { sd, .. } if !(*sd > 0.0) => {
                return Err(Error::invalid("initial sd must be positive"));
            }
            _ => {}
        }
        Ok(Self { nar, initial })
    }

    /// Grid of `levels` cells spanning the model support exactly.
    pub fn grid(&self, levels: usize) -> Result<Grid> {
        let b = self.nar.half_width();
        Grid::uniform(-b, b, 1, levels)
    }
}

impl TransitionMapping for NarModel {
    fn sample_innovation(&self, rng: &mut StreamRng) -> Vec<f64> {
        vec![self.nar.sample_innovation(rng)]
    }

    fn apply(&self, x: &[f64], w: &[f64]) -> Vec<f64> {
        vec![self.nar.apply(x[0], w[0])]
    }

    fn lipschitz_bound(&self) -> Option<f64> {
        self.nar.map().lipschitz()
    }
}

impl HiddenModel for NarModel {
    fn dim(&self) -> usize {
        1
    }

    fn support(&self) -> Vec<(f64, f64)> {
        let b = self.nar.half_width();
        vec![(-b, b)]
    }

    fn sample_initial(&self, rng: &mut StreamRng) -> Vec<f64> {
        let b = self.nar.half_width();
        let x = match &self.initial {
            InitialLaw::Uniform => -b + 2.0 * b * rng.random::<f64>(),
            InitialLaw::PointMass(p) => p[0],
            InitialLaw::TruncatedGaussian { mean, sd } => {
                let lo = normal::cdf((-b - mean) / sd);
                let hi = normal::cdf((b - mean) / sd);
                let u: f64 = rng.random();
                mean + sd * normal::quantile(lo + u * (hi - lo))
            }
        };
        vec![x.clamp(-b, b)]
    }

    fn sample_next(&self, x: &[f64], rng: &mut StreamRng) -> Vec<f64> {
        vec![self.nar.step(x[0], rng)]
    }

    fn mapping(&self) -> Option<&dyn TransitionMapping> {
        Some(self)
    }

    fn initial_cell_mass(&self, grid: &Grid) -> Option<Vec<f64>> {
        if grid.dim() != 1 {
            return None;
        }
        let b = self.nar.half_width();
        let ax = grid.axes()[0];
        let n = grid.len();
        match &self.initial {
            InitialLaw::Uniform => {
                if ax.lower == -b && ax.upper == b {
                    return Some(vec![1.0 / n as f64; n]);
                }
                let mass = (0..n)
                    .map(|l| {
                        let (lo, hi) = grid.cell_bounds(l).expect("index in range");
                        (hi[0].min(b) - lo[0].max(-b)).max(0.0) / (2.0 * b)
                    })
                    .collect();
                Some(mass)
            }
            InitialLaw::PointMass(p) => {
                let mut mass = vec![0.0; n];
                mass[grid.quantize(p).ok()?] = 1.0;
                Some(mass)
            }
            InitialLaw::TruncatedGaussian { mean, sd } => {
                let z = normal::interval_mass((-b - mean) / sd, (b - mean) / sd);
                let mass = (0..n)
                    .map(|l| {
                        let (lo, hi) = grid.cell_bounds(l).expect("index in range");
                        let lo = lo[0].max(-b);
                        let hi = hi[0].min(b);
                        normal::interval_mass((lo - mean) / sd, (hi - mean) / sd) / z
                    })
                    .collect();
                Some(mass)
            }
        }
    }
}

pub type MeanClosure = Arc<dyn Fn(usize, &[f64]) -> Vec<f64> + Send + Sync>;
pub type CovarianceClosure = Arc<dyn Fn(usize, &[f64]) -> DMatrix<f64> + Send + Sync>;

/// Observation mean `mu(x)`. The named variants apply a scalar map to state
/// coordinates and tile the result: `mu_n(x) = g(x_{n mod M})`.
#[derive(Clone)]
pub enum MeanFn {
    Identity,
    Cubic,
    Custom(MeanClosure),
}

impl MeanFn {
    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "identity" => Some(MeanFn::Identity),
            "cubic" => Some(MeanFn::Cubic),
            _ => None,
        }
    }

    fn eval_into(&self, t: usize, x: &[f64], out: &mut [f64]) {
        match self {
            MeanFn::Identity => {
                for (n, o) in out.iter_mut().enumerate() {
                    *o = x[n % x.len()];
                }
            }
            MeanFn::Cubic => {
                for (n, o) in out.iter_mut().enumerate() {
                    let v = x[n % x.len()];
                    *o = v * v * v;
                }
            }
            MeanFn::Custom(f) => out.copy_from_slice(&f(t, x)),
        }
    }
}

impl fmt::Debug for MeanFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MeanFn::Identity => f.write_str("identity"),
            MeanFn::Cubic => f.write_str("cubic"),
            MeanFn::Custom(_) => f.write_str("custom"),
        }
    }
}

#[derive(Clone)]
pub enum CovarianceFn {
    Constant(DMatrix<f64>),
    StateDependent(CovarianceClosure),
}

impl fmt::Debug for CovarianceFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CovarianceFn::Constant(m) => write!(f, "Constant({m:?})"),
            CovarianceFn::StateDependent(_) => f.write_str("StateDependent"),
        }
    }
}

/// Cholesky factor of an effective covariance plus its log-determinant.
#[derive(Clone, Debug)]
struct Factor {
    n: usize,
    // row-major lower triangle
    lower: Vec<f64>,
    log_det: f64,
}

impl Factor {
    fn new(c: DMatrix<f64>) -> Option<Self> {
        let n = c.nrows();
        let chol = c.cholesky()?;
        let l = chol.l();
        let mut lower = vec![0.0; n * n];
        let mut log_det = 0.0;
        for i in 0..n {
            for j in 0..=i {
                lower[i * n + j] = l[(i, j)];
            }
            log_det += 2.0 * l[(i, i)].ln();
        }
        Some(Self { n, lower, log_det })
    }

    /// `r^T C^{-1} r` by forward substitution.
    fn mahalanobis(&self, r: &mut [f64]) -> f64 {
        let n = self.n;
        let mut q = 0.0;
        for i in 0..n {
            let row = &self.lower[i * n..i * n + i + 1];
            let mut s = r[i];
            for j in 0..i {
                s -= row[j] * r[j];
            }
            let z = s / row[i];
            r[i] = z;
            q += z * z;
        }
        q
    }

    fn apply(&self, u: &[f64], out: &mut [f64]) {
        let n = self.n;
        for i in 0..n {
            out[i] += (0..=i).map(|j| self.lower[i * n + j] * u[j]).sum::<f64>();
        }
    }
}

/// Conditionally Gaussian observations
/// `y_t | X_t ~ N(mu_t(X_t), Sigma_t(X_t) + sigma_base^2 I)`.
#[derive(Clone, Debug)]
pub struct ObservationModel {
    obs_dim: usize,
    mean: MeanFn,
    covariance: CovarianceFn,
    sigma_base: f64,
    cached: Option<Factor>,
}

impl ObservationModel {
    pub fn new(obs_dim: usize, mean: MeanFn, covariance: CovarianceFn, sigma_base: f64) -> Result<Self> {
        if obs_dim == 0 {
            return Err(Error::invalid("observation dimension must be positive"));
        }
        if !(sigma_base >= 0.0 && sigma_base.is_finite()) {
            return Err(Error::invalid("sigma_base must be finite and nonnegative"));
        }
        let cached = match &covariance {
            CovarianceFn::Constant(s) => {
                if s.shape() != (obs_dim, obs_dim) {
                    return Err(Error::invalid(format!(
                        "covariance is {:?}, expected {obs_dim}x{obs_dim}",
                        s.shape()
                    )));
                }
                let c = s + DMatrix::identity(obs_dim, obs_dim) * sigma_base.powi(2);
                Some(Factor::new(c).ok_or(Error::Factorization { x: vec![] })?)
            }
            CovarianceFn::StateDependent(_) => None,
        };
        Ok(Self {
            obs_dim,
            mean,
            covariance,
            sigma_base,
            cached,
        })
    }

    /// `y = g(x) 1_N + w` with `w ~ N(0, variance I_N)`.
    pub fn isotropic(obs_dim: usize, mean: MeanFn, variance: f64) -> Result<Self> {
        if !(variance > 0.0) {
            return Err(Error::invalid("noise variance must be positive"));
        }
        Self::new(
            obs_dim,
            mean,
            CovarianceFn::Constant(DMatrix::identity(obs_dim, obs_dim) * variance),
            0.0,
        )
    }

    pub fn obs_dim(&self) -> usize {
        self.obs_dim
    }

    pub fn sigma_base(&self) -> f64 {
        self.sigma_base
    }

    pub fn is_time_invariant(&self) -> bool {
        !matches!(self.mean, MeanFn::Custom(_)) && matches!(self.covariance, CovarianceFn::Constant(_))
    }

    pub fn mean(&self, t: usize, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.obs_dim];
        self.mean.eval_into(t, x, &mut out);
        out
    }

    /// `C_t(x) = Sigma_t(x) + sigma_base^2 I`.
    pub fn effective_covariance(&self, t: usize, x: &[f64]) -> DMatrix<f64> {
        let s = match &self.covariance {
            CovarianceFn::Constant(s) => s.clone(),
            CovarianceFn::StateDependent(f) => f(t, x),
        };
        s + DMatrix::identity(self.obs_dim, self.obs_dim) * self.sigma_base.powi(2)
    }

    /// Smallest eigenvalue of `C_t(x)`. Values above 1 satisfy the usual
    /// normalization of the observations; the model is not rescaled either way.
    pub fn min_eigenvalue(&self, t: usize, x: &[f64]) -> f64 {
        SymmetricEigen::new(self.effective_covariance(t, x))
            .eigenvalues
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min)
    }

    fn with_factor<R>(&self, t: usize, x: &[f64], f: impl FnOnce(&Factor) -> R) -> Result<R> {
        match &self.cached {
            Some(factor) => Ok(f(factor)),
            None => {
                let factor = Factor::new(self.effective_covariance(t, x))
                    .ok_or_else(|| Error::Factorization { x: x.to_vec() })?;
                Ok(f(&factor))
            }
        }
    }

    /// `ln L_t(x, y) = -ln det(C)/2 - (y - mu)^T C^{-1} (y - mu) / 2`.
    pub fn log_likelihood(&self, t: usize, x: &[f64], y: &[f64]) -> Result<f64> {
        if y.len() != self.obs_dim {
            return Err(Error::invalid(format!(
                "observation has dimension {}, model has {}",
                y.len(),
                self.obs_dim
            )));
        }
        let mut r = vec![0.0; self.obs_dim];
        self.mean.eval_into(t, x, &mut r);
        for (ri, yi) in r.iter_mut().zip(y) {
            *ri = yi - *ri;
        }
        self.with_factor(t, x, |f| -0.5 * (f.log_det + f.mahalanobis(&mut r)))
    }

    /// Scaled Gaussian density `L_t(x, y) = (2 pi)^{N/2} N(y; mu_t(x), C_t(x))`.
    pub fn likelihood(&self, t: usize, x: &[f64], y: &[f64]) -> Result<f64> {
        Ok(self.log_likelihood(t, x, y)?.exp())
    }

    /// Unscaled Gaussian density `N(y; mu_t(x), C_t(x))`.
    pub fn density(&self, t: usize, x: &[f64], y: &[f64]) -> Result<f64> {
        Ok((self.log_likelihood(t, x, y)? - 0.5 * self.obs_dim as f64 * (2.0 * PI).ln()).exp())
    }

    /// Diagonal of the likelihood matrix: `L_t(center_l, y)` for every cell.
    pub fn likelihood_vector(&self, grid: &Grid, t: usize, y: &[f64]) -> Result<Vec<f64>> {
        Ok(self
            .log_likelihood_vector(grid, t, y)?
            .into_iter()
            .map(f64::exp)
            .collect())
    }

    pub fn log_likelihood_vector(&self, grid: &Grid, t: usize, y: &[f64]) -> Result<Vec<f64>> {
        grid.centers()
            .enumerate()
            .map(|(cell, x)| {
                self.log_likelihood(t, x, y).map_err(|e| Error::Likelihood {
                    cell,
                    source: Box::new(e),
                })
            })
            .collect()
    }

    /// Draws `y = mu_t(x) + sqrt(C_t(x)) u` with `u` standard normal.
    pub fn sample(&self, t: usize, x: &[f64], rng: &mut StreamRng) -> Result<Vec<f64>> {
        let u: Vec<f64> = (0..self.obs_dim).map(|_| rng.sample(StandardNormal)).collect();
        let mut y = self.mean(t, x);
        self.with_factor(t, x, |f| f.apply(&u, &mut y))?;
        Ok(y)
    }
}

/// A simulated path: `states[0]` is `X_{-1}`, `states[t + 1]` is `X_t`, and
/// `observations[t]` is `y_t`.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub states: Vec<Vec<f64>>,
    pub observations: Vec<Vec<f64>>,
}

/// Simulates `X_{-1}, X_0, ..., X_T` and `y_0, ..., y_T`. The initial state,
/// the state innovations and the observation noise use independent
/// sub-streams of `key`.
pub fn simulate_trajectory(
    hidden: &dyn HiddenModel,
    obs: &ObservationModel,
    horizon: usize,
    key: &StreamKey,
) -> Result<Trajectory> {
    let mut init_rng = key.child(labels::INITIAL_CONDITION).rng();
    let mut state_rng = key.child(labels::STATE_INNOVATIONS).rng();
    let mut noise_rng = key.child(labels::OBSERVATION_NOISE).rng();

    let mut x = hidden.sample_initial(&mut init_rng);
    check_support(hidden, &x)?;
    let mut states = Vec::with_capacity(horizon + 2);
    let mut observations = Vec::with_capacity(horizon + 1);
    states.push(x.clone());
    for t in 0..=horizon {
        x = hidden.sample_next(&x, &mut state_rng);
        check_support(hidden, &x)?;
        observations.push(obs.sample(t, &x, &mut noise_rng)?);
        states.push(x.clone());
    }
    Ok(Trajectory { states, observations })
}

pub(crate) fn check_support(hidden: &dyn HiddenModel, x: &[f64]) -> Result<()> {
    if hidden.in_support(x) {
        Ok(())
    } else {
        Err(Error::OutOfSupport {
            point: x.to_vec(),
            tolerance: 0.0,
        })
    }
}
