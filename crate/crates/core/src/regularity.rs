//! Conditional-regularity diagnostics for scalar Markov kernels against a
//! quantizer.
//!
//! For a point `x` with cell `Z(x)`, the Type I deficit compares the cell
//! probabilities `K(A | x)` with their average over states `theta` in `Z(x)`;
//! the Type II deficit does the same for the densities `kappa(y | x)`. The
//! averages are sample means over conditioning states drawn from the chain.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::models::TruncGaussNar;
use crate::quadrature;

/// Printed with every report.
pub const CAVEAT: &str = "finite-resolution deficits evidence but never certify conditional regularity";

/// A scalar transition density `kappa(y | x)`.
pub trait KernelDensity: Sync {
    fn density(&self, y: f64, x: f64) -> f64;

    /// Points in `y` where `kappa(. | x)` may jump; used as quadrature breaks.
    fn discontinuities(&self, _x: f64) -> Vec<f64> {
        Vec::new()
    }
}

impl KernelDensity for TruncGaussNar {
    fn density(&self, y: f64, x: f64) -> f64 {
        self.kernel_density(y, x)
    }

    fn discontinuities(&self, x: f64) -> Vec<f64> {
        let c = self.h(x);
        vec![c - self.alpha(), c + self.alpha()]
    }
}

/// A deficit estimate with the standard error of its sample-mean term,
/// both taken at the maximizing cell or evaluation point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Deficit {
    pub value: f64,
    pub std_error: f64,
    /// Number of conditioning samples in `Z(x)`.
    pub samples: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RegularityOptions {
    /// Absolute tolerance of the cell-probability quadrature.
    pub quad_tol: f64,
    /// Evaluation points per grid level for the Type II maximum over `y`.
    pub y_points_per_level: usize,
    /// Upper limit on conditioning samples used per cell (the first ones in
    /// sample order are kept).
    pub max_conditioning: usize,
}

impl Default for RegularityOptions {
    fn default() -> Self {
        Self {
            quad_tol: 1e-11,
            y_points_per_level: 10,
            max_conditioning: 1000,
        }
    }
}

fn scalar_grid(grid: &Grid) -> Result<()> {
    if grid.dim() != 1 {
        return Err(Error::invalid(format!(
            "regularity diagnostics need a scalar grid, got dimension {}",
            grid.dim()
        )));
    }
    Ok(())
}

fn in_cell(grid: &Grid, samples: &[f64], x: f64) -> Result<(usize, Vec<f64>)> {
    scalar_grid(grid)?;
    let cell = grid.quantize(&[x])?;
    let theta: Vec<f64> = samples
        .iter()
        .copied()
        .filter(|&s| grid.contains(&[s]) && grid.quantize_clamped(&[s]) == cell)
        .collect();
    if theta.is_empty() {
        return Err(Error::InsufficientData(format!(
            "no conditioning samples in the cell of x = {x}"
        )));
    }
    Ok((cell, theta))
}

fn mean_and_se(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// `K(A | x)` for every cell `A` of a scalar grid.
pub fn cell_probabilities<K: KernelDensity + ?Sized>(kernel: &K, grid: &Grid, x: f64, tol: f64) -> Vec<f64> {
    let breaks = kernel.discontinuities(x);
    (0..grid.len())
        .map(|l| {
            let (lo, hi) = grid.cell_bounds(l).expect("cell index in range");
            quadrature::integrate_with_breaks(|y| kernel.density(y, x), lo[0], hi[0], &breaks, tol)
        })
        .collect()
}

/// Type I deficit `L_S * max_A |K(A | x) - K(A | in Z(x))|`.
pub fn crt1_deficit<K: KernelDensity + ?Sized>(
    kernel: &K,
    grid: &Grid,
    conditioning_samples: &[f64],
    x: f64,
    tol: f64,
) -> Result<Deficit> {
    let (_, theta) = in_cell(grid, conditioning_samples, x)?;
    let at_x = cell_probabilities(kernel, grid, x, tol);
    let per_theta: Vec<Vec<f64>> = theta
        .iter()
        .map(|&t| cell_probabilities(kernel, grid, t, tol))
        .collect();
    let mut best = (0.0, 0.0);
    let mut column = vec![0.0; theta.len()];
    for (a, &kx) in at_x.iter().enumerate() {
        for (c, p) in column.iter_mut().zip(&per_theta) {
            *c = kx - p[a];
        }
        let (mean, se) = mean_and_se(&column);
        let diff = mean.abs();
        if diff > best.0 {
            best = (diff, se);
        }
    }
    let scale = grid.len() as f64;
    Ok(Deficit {
        value: scale * best.0,
        std_error: scale * best.1,
        samples: theta.len(),
    })
}

/// `n` evenly spaced points over `[a, b]`, endpoints included.
pub fn default_y_grid(grid: &Grid, points_per_level: usize) -> Vec<f64> {
    let ax = &grid.axes()[0];
    let n = (points_per_level * ax.levels).max(2);
    (0..n)
        .map(|i| ax.lower + (ax.upper - ax.lower) * i as f64 / (n - 1) as f64)
        .collect()
}

/// Type II deficit `max_y |kappa(y | x) - kappa(y | in Z(x))|` over `y_grid`.
pub fn crt2_deficit<K: KernelDensity + ?Sized>(
    kernel: &K,
    grid: &Grid,
    conditioning_samples: &[f64],
    x: f64,
    y_grid: &[f64],
) -> Result<Deficit> {
    if y_grid.is_empty() {
        return Err(Error::invalid("empty evaluation grid"));
    }
    let (_, theta) = in_cell(grid, conditioning_samples, x)?;
    let mut best = (0.0, 0.0);
    let mut values = vec![0.0; theta.len()];
    for &y in y_grid {
        let kx = kernel.density(y, x);
        for (v, &t) in values.iter_mut().zip(&theta) {
            *v = kx - kernel.density(y, t);
        }
        let (mean, se) = mean_and_se(&values);
        let diff = mean.abs();
        if diff > best.0 {
            best = (diff, se);
        }
    }
    Ok(Deficit {
        value: best.0,
        std_error: best.1,
        samples: theta.len(),
    })
}

/// Drift bound for additive NARs:
/// `f_W(alpha) + sup_{theta in Z(x)} |h(x) - h(theta)| / ((2 sigma^2 Phi(alpha / sigma) - sigma^2) sqrt(2 e pi))`,
/// with the supremum over 201 points spanning the cell.
pub fn nar_crt2_bound(nar: &TruncGaussNar, grid: &Grid, x: f64) -> Result<f64> {
    scalar_grid(grid)?;
    let cell = grid.quantize(&[x])?;
    let (lo, hi) = grid.cell_bounds(cell)?;
    let hx = nar.h(x);
    let sup = (0..=200)
        .map(|i| {
            let theta = lo[0] + (hi[0] - lo[0]) * i as f64 / 200.0;
            (hx - nar.h(theta)).abs()
        })
        .fold(0.0, f64::max);
    let s2 = nar.sigma() * nar.sigma();
    let denom = s2 * nar.truncation_mass() * (2.0 * std::f64::consts::E * std::f64::consts::PI).sqrt();
    Ok(nar.fw_density(nar.alpha()) + sup / denom)
}

#[derive(Clone, Debug, PartialEq)]
pub struct RegularityRow {
    pub levels: usize,
    pub x: f64,
    pub deficit_i: f64,
    pub se_i: f64,
    pub deficit_ii: f64,
    pub se_ii: f64,
    pub bound_ii: f64,
    pub fw_alpha: f64,
    pub samples: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RegularityReport {
    pub rows: Vec<RegularityRow>,
    pub options: RegularityOptions,
    pub conditioning_samples: usize,
    pub caveat: &'static str,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Summary {
    pub max_i: f64,
    pub mean_i: f64,
    pub max_ii: f64,
    pub mean_ii: f64,
}

impl RegularityReport {
    /// Max and mean deficits over the rows at resolution `levels`.
    pub fn summary(&self, levels: usize) -> Option<Summary> {
        let rows: Vec<&RegularityRow> = self.rows.iter().filter(|r| r.levels == levels).collect();
        if rows.is_empty() {
            return None;
        }
        let n = rows.len() as f64;
        Some(Summary {
            max_i: rows.iter().map(|r| r.deficit_i).fold(0.0, f64::max),
            mean_i: rows.iter().map(|r| r.deficit_i).sum::<f64>() / n,
            max_ii: rows.iter().map(|r| r.deficit_ii).fold(0.0, f64::max),
            mean_ii: rows.iter().map(|r| r.deficit_ii).sum::<f64>() / n,
        })
    }
}

/// Evaluates both deficits and the drift bound at every `(L_S, x)` pair.
/// Points whose cell holds no conditioning samples are an error.
pub fn regularity_report(
    nar: &TruncGaussNar,
    levels: &[usize],
    conditioning_samples: &[f64],
    xs: &[f64],
    options: &RegularityOptions,
) -> Result<RegularityReport> {
    let b = nar.half_width();
    let fw_alpha = nar.fw_density(nar.alpha());
    let mut rows = Vec::with_capacity(levels.len() * xs.len());
    for &l in levels {
        let grid = Grid::uniform(-b, b, 1, l)?;
        // keep at most max_conditioning samples per cell
        let mut kept = Vec::new();
        let mut counts = vec![0usize; grid.len()];
        for &s in conditioning_samples {
            if !grid.contains(&[s]) {
                continue;
            }
            let c = grid.quantize_clamped(&[s]);
            if counts[c] < options.max_conditioning {
                counts[c] += 1;
                kept.push(s);
            }
        }
        let y_grid = default_y_grid(&grid, options.y_points_per_level);
        let part: Result<Vec<RegularityRow>> = xs
            .par_iter()
            .map(|&x| {
                let d1 = crt1_deficit(nar, &grid, &kept, x, options.quad_tol)?;
                let d2 = crt2_deficit(nar, &grid, &kept, x, &y_grid)?;
                Ok(RegularityRow {
                    levels: l,
                    x,
                    deficit_i: d1.value,
                    se_i: d1.std_error,
                    deficit_ii: d2.value,
                    se_ii: d2.std_error,
                    bound_ii: nar_crt2_bound(nar, &grid, x)?,
                    fw_alpha,
                    samples: d1.samples,
                })
            })
            .collect();
        rows.extend(part.map_err(|e| e.context(format!("regularity at L_S = {l}")))?);
    }
    Ok(RegularityReport {
        rows,
        options: options.clone(),
        conditioning_samples: conditioning_samples.len(),
        caveat: CAVEAT,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{HiddenModel, InitialLaw, NarModel, ScalarMap};
    use crate::rng::StreamKey;

    fn constant_nar() -> TruncGaussNar {
        TruncGaussNar::new(ScalarMap::Constant(0.5), 1.0, 0.3).unwrap()
    }

    fn chain_samples(nar: &TruncGaussNar, n: usize, seed: u64) -> Vec<f64> {
        let model = NarModel::new(nar.clone(), InitialLaw::Uniform).unwrap();
        let mut rng = StreamKey::new(seed).child("samples").rng();
        let mut x = model.sample_initial(&mut rng);
        for _ in 0..200 {
            x = model.sample_next(&x, &mut rng);
        }
        (0..n)
            .map(|_| {
                x = model.sample_next(&x, &mut rng);
                x[0]
            })
            .collect()
    }

    fn median(mut v: Vec<f64>) -> f64 {
        v.sort_by(f64::total_cmp);
        let n = v.len();
        if n % 2 == 1 {
            v[n / 2]
        } else {
            0.5 * (v[n / 2 - 1] + v[n / 2])
        }
    }

    #[test]
    fn constant_kernel_has_zero_deficits() {
        let nar = constant_nar();
        let grid = Grid::uniform(-1.5, 1.5, 1, 8).unwrap();
        let samples: Vec<f64> = (0..64).map(|i| -1.5 + 3.0 * (i as f64 + 0.5) / 64.0).collect();
        for &x in &[-1.2, 0.1, 0.9] {
            let d1 = crt1_deficit(&nar, &grid, &samples, x, 1e-12).unwrap();
            assert!(d1.value < 1e-8, "{d1:?}");
            let d2 = crt2_deficit(&nar, &grid, &samples, x, &default_y_grid(&grid, 10)).unwrap();
            assert!(d2.value <= 3.0 * d2.std_error + 1e-15, "{d2:?}");
        }
    }

    #[test]
    fn single_sample_at_x_gives_zero() {
        let nar = TruncGaussNar::reference();
        let grid = Grid::uniform(-2.0, 2.0, 1, 8).unwrap();
        let x = 0.3;
        assert_eq!(crt1_deficit(&nar, &grid, &[x], x, 1e-10).unwrap().value, 0.0);
        let d2 = crt2_deficit(&nar, &grid, &[x], x, &default_y_grid(&grid, 10)).unwrap();
        assert_eq!(d2.value, 0.0);
    }

    #[test]
    fn empty_cell_is_insufficient_data() {
        let nar = TruncGaussNar::reference();
        let grid = Grid::uniform(-2.0, 2.0, 1, 8).unwrap();
        let err = crt1_deficit(&nar, &grid, &[1.9], -1.9, 1e-10).unwrap_err();
        assert!(matches!(err, Error::InsufficientData(_)));
        let err = crt2_deficit(&nar, &grid, &[1.9], -1.9, &[0.0]).unwrap_err();
        assert!(matches!(err, Error::InsufficientData(_)));
        assert!(crt2_deficit(&nar, &grid, &[1.9], 1.9, &[]).is_err());
    }

    #[test]
    fn constant_bound_is_fw_alpha() {
        let nar = constant_nar();
        let grid = Grid::uniform(-1.5, 1.5, 1, 8).unwrap();
        assert_eq!(nar_crt2_bound(&nar, &grid, 0.2).unwrap(), nar.fw_density(1.0));
    }

    #[test]
    fn bound_within_lipschitz_majorant_and_monotone() {
        let nar = TruncGaussNar::reference();
        let s2m = 0.09 * nar.truncation_mass() * (2.0 * std::f64::consts::E * std::f64::consts::PI).sqrt();
        for &x in &[-1.7, -0.4, 0.0, 0.35, 1.99] {
            let mut prev = f64::INFINITY;
            for l in [4, 8, 16, 32, 64] {
                let grid = Grid::uniform(-2.0, 2.0, 1, l).unwrap();
                let bound = nar_crt2_bound(&nar, &grid, x).unwrap();
                let majorant = 1.3 * 4.0 / l as f64 / s2m + nar.fw_density(1.0);
                assert!(bound <= majorant + 1e-12);
                assert!(bound <= prev + 1e-12, "x = {x}, L = {l}");
                prev = bound;
            }
        }
    }

    #[test]
    fn deficits_shrink_with_resolution() {
        let nar = TruncGaussNar::reference();
        let samples = chain_samples(&nar, 40_000, 3);
        let xs: Vec<f64> = (0..15).map(|i| -1.4 + 2.8 * i as f64 / 14.0).collect();
        let options = RegularityOptions {
            max_conditioning: 300,
            ..RegularityOptions::default()
        };
        let report = regularity_report(&nar, &[4, 8, 16, 32], &samples, &xs, &options).unwrap();
        let fwa = nar.fw_density(1.0);
        let med = |l: usize, f: &dyn Fn(&RegularityRow) -> f64| {
            median(report.rows.iter().filter(|r| r.levels == l).map(f).collect())
        };
        let d1: Vec<f64> = [4, 8, 16, 32].iter().map(|&l| med(l, &|r| r.deficit_i)).collect();
        let d2: Vec<f64> = [4, 8, 16, 32]
            .iter()
            .map(|&l| med(l, &|r| r.deficit_ii - fwa))
            .collect();
        assert!(d1[3] < d1[0], "{d1:?}");
        assert!(d2[3] < d2[0], "{d2:?}");
        for r in &report.rows {
            assert!(r.deficit_i >= 0.0 && r.deficit_ii >= 0.0);
            assert!(r.deficit_ii <= r.bound_ii + 3.0 * r.se_ii + 1e-12, "{r:?}");
            assert_eq!(r.fw_alpha, fwa);
        }
        assert_eq!(report.caveat, CAVEAT);
        assert!(report.summary(8).is_some() && report.summary(5).is_none());
    }
}
