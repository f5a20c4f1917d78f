//! The grid filter recursion `E_t = Lambda_t P E_{t-1}`, with the state
//! estimate `X E_t / ||E_t||_1`, rho-step prediction of bounded functionals
//! and the posterior covariance.
//!
//! Markovian and marginal filters run this same recursion; they differ only in
//! the transition matrix they are given.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::models::ObservationModel;
use crate::transition::{BeliefVector, TransitionMatrix};

#[derive(Clone, Debug, PartialEq)]
pub struct FilterState {
    /// `E_t`, normalized to unit mass unless a step ran without renormalization.
    pub belief: Vec<f64>,
    /// Sum of the logs of all normalizers divided out so far.
    pub log_norm: f64,
    /// Time index of `belief`; `-1` before the first observation.
    pub t: i64,
}

impl FilterState {
    /// Starts the recursion at `E_{-1}` (normalized; the mass goes into `log_norm`).
    pub fn new(init: &BeliefVector) -> Self {
        let total = init.total();
        Self {
            belief: init.as_slice().iter().map(|v| v / total).collect(),
            log_norm: total.ln(),
            t: -1,
        }
    }

    pub fn mass(&self) -> f64 {
        self.belief.iter().sum()
    }

    pub fn normalized(&self) -> Vec<f64> {
        let s = self.mass();
        self.belief.iter().map(|v| v / s).collect()
    }
}

/// One recursion step with linear-domain likelihoods `lambda`.
pub fn filter_step(
    state: &FilterState,
    p: &TransitionMatrix,
    lambda: &[f64],
    renormalize: bool,
) -> Result<FilterState> {
    check_len(p.len(), state.belief.len(), lambda.len())?;
    let mut belief = p.apply(&state.belief);
    for (e, &l) in belief.iter_mut().zip(lambda) {
        *e *= l;
    }
    finish(
        state,
        belief,
        0.0,
        lambda.iter().copied().fold(0.0, f64::max),
        renormalize,
    )
}

/// One recursion step with log-likelihoods. The likelihoods are shifted by
/// their maximum before exponentiation; the shift is added to `log_norm`, so
/// the normalized belief is the same as with [`filter_step`] but cannot
/// underflow for lack of dynamic range.
pub fn filter_step_log(
    state: &FilterState,
    p: &TransitionMatrix,
    log_lambda: &[f64],
    renormalize: bool,
) -> Result<FilterState> {
    check_len(p.len(), state.belief.len(), log_lambda.len())?;
    let mut belief = p.apply(&state.belief);
    let shift = belief
        .iter()
        .zip(log_lambda)
        .filter(|(e, _)| **e > 0.0)
        .map(|(_, &l)| l)
        .fold(f64::NEG_INFINITY, f64::max);
    if !shift.is_finite() {
        return Err(Error::ZeroPosterior {
            t: state.t + 1,
            max_likelihood: log_lambda.iter().copied().fold(f64::NEG_INFINITY, f64::max).exp(),
        });
    }
    for (e, &l) in belief.iter_mut().zip(log_lambda) {
        *e *= (l - shift).exp();
    }
    let max_lik = log_lambda.iter().copied().fold(f64::NEG_INFINITY, f64::max).exp();
    finish(state, belief, shift, max_lik, renormalize)
}

fn check_len(n: usize, belief: usize, lambda: usize) -> Result<()> {
    if belief != n || lambda != n {
        return Err(Error::invalid(format!(
            "size mismatch: P is {n}x{n}, belief has {belief}, likelihood has {lambda}"
        )));
    }
    Ok(())
}

fn finish(
    state: &FilterState,
    mut belief: Vec<f64>,
    shift: f64,
    max_likelihood: f64,
    renormalize: bool,
) -> Result<FilterState> {
    let t = state.t + 1;
    let total: f64 = belief.iter().sum();
    if !(total > 0.0 && total.is_finite()) {
        return Err(Error::ZeroPosterior { t, max_likelihood });
    }
    let mut log_norm = state.log_norm + shift;
    if renormalize {
        belief.iter_mut().for_each(|e| *e /= total);
        log_norm += total.ln();
    }
    Ok(FilterState { belief, log_norm, t })
}

/// `X E / ||E||_1`: the belief-weighted mean of the columns of `x`.
pub fn estimate(state: &FilterState, x: &DMatrix<f64>) -> Vec<f64> {
    weighted_columns(x, &state.normalized())
}

fn weighted_columns(table: &DMatrix<f64>, weights: &[f64]) -> Vec<f64> {
    (table * DVector::from_column_slice(weights)).as_slice().to_vec()
}

/// Values of a functional `phi` at every grid center, one column per cell.
#[derive(Clone, Debug, PartialEq)]
pub struct FunctionalTable(DMatrix<f64>);

impl FunctionalTable {
    pub fn from_matrix(table: DMatrix<f64>) -> Self {
        Self(table)
    }

    pub fn from_fn(grid: &Grid, phi: impl Fn(&[f64]) -> Vec<f64>) -> Result<Self> {
        let cols: Vec<Vec<f64>> = grid.centers().map(phi).collect();
        let rows = cols.first().map_or(0, Vec::len);
        if rows == 0 || cols.iter().any(|c| c.len() != rows) {
            return Err(Error::invalid(
                "functional must return vectors of one fixed nonzero length",
            ));
        }
        Ok(Self(DMatrix::from_column_slice(rows, cols.len(), &cols.concat())))
    }

    /// The reconstruction matrix: `phi(x) = x`.
    pub fn identity(grid: &Grid) -> Self {
        Self(grid.reconstruction_matrix())
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.0.ncols() == 0
    }
}

fn predicted_mass(state: &FilterState, p: &TransitionMatrix, table: &FunctionalTable, rho: usize) -> Result<Vec<f64>> {
    if table.len() != p.len() || state.belief.len() != p.len() {
        return Err(Error::invalid(format!(
            "size mismatch: P is {0}x{0}, table has {1} columns, belief has {2}",
            p.len(),
            table.len(),
            state.belief.len()
        )));
    }
    Ok(p.apply_power(&state.normalized(), rho))
}

/// `Phi P^rho E_t / ||E_t||_1`, the rho-step prediction of `E[phi(X_{t+rho}) | Y_t]`.
pub fn predict_functional(
    state: &FilterState,
    p: &TransitionMatrix,
    table: &FunctionalTable,
    rho: usize,
) -> Result<Vec<f64>> {
    let v = predicted_mass(state, p, table, rho)?;
    Ok(weighted_columns(table.matrix(), &v))
}

/// `Phi [diag(v) - v v^T] Phi^T` with `v = P^rho E_t / ||E_t||_1`: the
/// covariance of `phi` under the predicted point mass.
pub fn posterior_covariance(
    state: &FilterState,
    p: &TransitionMatrix,
    table: &FunctionalTable,
    rho: usize,
) -> Result<DMatrix<f64>> {
    let v = predicted_mass(state, p, table, rho)?;
    Ok(covariance_of(table.matrix(), &v))
}

fn covariance_of(phi: &DMatrix<f64>, v: &[f64]) -> DMatrix<f64> {
    let d = phi.nrows();
    let mean = weighted_columns(phi, v);
    // centered two-pass form; algebraically equal to Phi diag(v) Phi^T - m m^T
    let mut cov = DMatrix::zeros(d, d);
    for (l, &w) in v.iter().enumerate() {
        if w == 0.0 {
            continue;
        }
        let col = phi.column(l);
        for a in 0..d {
            let da = col[a] - mean[a];
            for b in 0..=a {
                cov[(a, b)] += w * da * (col[b] - mean[b]);
            }
        }
    }
    for a in 0..d {
        for b in 0..a {
            cov[(b, a)] = cov[(a, b)];
        }
    }
    cov
}

/// Per-step output of [`run_filter`].
#[derive(Clone, Debug, PartialEq)]
pub struct FilterOutput {
    pub t: i64,
    pub estimate: Vec<f64>,
    pub covariance_diagonal: Vec<f64>,
}

/// A running grid filter over a fixed grid, transition matrix and
/// observation model.
#[derive(Clone, Debug)]
pub struct GridFilter<'a> {
    p: &'a TransitionMatrix,
    grid: &'a Grid,
    obs: &'a ObservationModel,
    x: DMatrix<f64>,
    state: FilterState,
}

impl<'a> GridFilter<'a> {
    pub fn new(
        p: &'a TransitionMatrix,
        grid: &'a Grid,
        obs: &'a ObservationModel,
        init: &BeliefVector,
    ) -> Result<Self> {
        if p.len() != grid.len() || init.len() != grid.len() {
            return Err(Error::invalid(format!(
                "size mismatch: grid has {} cells, P is {}x{}, E_init has {}",
                grid.len(),
                p.len(),
                p.len(),
                init.len()
            )));
        }
        Ok(Self {
            p,
            grid,
            obs,
            x: grid.reconstruction_matrix(),
            state: FilterState::new(init),
        })
    }

    pub fn state(&self) -> &FilterState {
        &self.state
    }

    /// Absorbs the next observation. Likelihoods are used in the linear domain
    /// unless every predicted cell underflows, in which case the step is redone
    /// with max-shifted log-likelihoods.
    pub fn step(&mut self, y: &[f64]) -> Result<FilterOutput> {
        let t = usize::try_from(self.state.t + 1).expect("time index is nonnegative");
        let log_lambda = self.obs.log_likelihood_vector(self.grid, t, y)?;
        let lambda: Vec<f64> = log_lambda.iter().map(|l| l.exp()).collect();
        self.state = match filter_step(&self.state, self.p, &lambda, true) {
            Ok(s) => s,
            Err(Error::ZeroPosterior { .. }) => filter_step_log(&self.state, self.p, &log_lambda, true)?,
            Err(e) => return Err(e),
        };
        let weights = self.state.normalized();
        let cov = covariance_of(&self.x, &weights);
        Ok(FilterOutput {
            t: self.state.t,
            estimate: weighted_columns(&self.x, &weights),
            covariance_diagonal: cov.diagonal().as_slice().to_vec(),
        })
    }
}

/// Runs the filter over `observations` (`y_0, y_1, ...`) from `E_{-1} = init`.
pub fn run_filter(
    p: &TransitionMatrix,
    grid: &Grid,
    obs: &ObservationModel,
    observations: &[Vec<f64>],
    init: &BeliefVector,
) -> Result<Vec<FilterOutput>> {
    if observations.is_empty() {
        return Err(Error::invalid("no observations"));
    }
    let mut filter = GridFilter::new(p, grid, obs, init)?;
    observations
        .iter()
        .enumerate()
        .map(|(t, y)| filter.step(y).map_err(|e| e.context(format!("filter step t = {t}"))))
        .collect()
}
