//! Uniform hyperrectangular quantizers of a compact state support.
//!
//! A [`Grid`] partitions `[a_1, b_1] x ... x [a_M, b_M]` into `L_1 * ... * L_M`
//! cells. Cells are half-open `[lower, upper)` along every axis except the
//! last level, which is closed at the upper bound, so the cells tile the box
//! exactly. Each cell is represented by its center.
//!
//! Flat indices are zero-based and row-major with the last axis varying
//! fastest: for `M = 2, L = 2` the order is `(0,0), (0,1), (1,0), (1,1)`.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// One axis of a grid: support `[lower, upper]` split into `levels` cells.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Axis {
    pub lower: f64,
    pub upper: f64,
    pub levels: usize,
}

impl Axis {
    pub fn new(lower: f64, upper: f64, levels: usize) -> Self {
        Self { lower, upper, levels }
    }

    pub fn width(&self) -> f64 {
        (self.upper - self.lower) / self.levels as f64
    }

    pub fn center(&self, k: usize) -> f64 {
        self.lower + (2 * k + 1) as f64 * (self.upper - self.lower) / (2 * self.levels) as f64
    }

    fn level_of(&self, x: f64) -> usize {
        let scaled = (x - self.lower) * self.levels as f64 / (self.upper - self.lower);
        if scaled <= 0.0 {
            0
        } else {
            (scaled.floor() as usize).min(self.levels - 1)
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Grid {
    axes: Vec<Axis>,
    len: usize,
    // row-major, `len * dim` entries
    centers: Vec<f64>,
}

impl Grid {
    /// The grid on `[a, b]^dim` with `levels` cells per axis.
    pub fn uniform(a: f64, b: f64, dim: usize, levels: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("grid dimension must be positive"));
        }
        Self::with_axes(vec![Axis::new(a, b, levels); dim])
    }

    /// A grid with its own support and resolution on every axis.
    pub fn with_axes(axes: Vec<Axis>) -> Result<Self> {
        if axes.is_empty() {
            return Err(Error::invalid("grid dimension must be positive"));
        }
        let mut len: usize = 1;
        for (m, ax) in axes.iter().enumerate() {
            if !(ax.lower.is_finite() && ax.upper.is_finite()) || ax.upper <= ax.lower {
                return Err(Error::invalid(format!(
                    "axis {m}: need finite bounds with b > a, got [{}, {}]",
                    ax.lower, ax.upper
                )));
            }
            if ax.levels == 0 {
                return Err(Error::invalid(format!("axis {m}: levels must be positive")));
            }
            len = len
                .checked_mul(ax.levels)
                .ok_or_else(|| Error::invalid("number of grid cells overflows usize"))?;
        }
        let dim = axes.len();
        let mut centers = Vec::with_capacity(len.checked_mul(dim).ok_or_else(|| Error::invalid("grid too large"))?);
        let mut multi = vec![0usize; dim];
        for _ in 0..len {
            centers.extend(multi.iter().zip(&axes).map(|(&k, ax)| ax.center(k)));
            for m in (0..dim).rev() {
                multi[m] += 1;
                if multi[m] < axes[m].levels {
                    break;
                }
                multi[m] = 0;
            }
        }
        Ok(Self { axes, len, centers })
    }

    pub fn dim(&self) -> usize {
        self.axes.len()
    }

    /// Total number of cells `L_S`.
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn axes(&self) -> &[Axis] {
        &self.axes
    }

    pub fn center(&self, l: usize) -> &[f64] {
        let d = self.dim();
        &self.centers[l * d..(l + 1) * d]
    }

    pub fn centers(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.centers.chunks_exact(self.dim())
    }

    pub fn multi_index(&self, mut l: usize) -> Vec<usize> {
        let mut out = vec![0; self.dim()];
        for m in (0..self.dim()).rev() {
            out[m] = l % self.axes[m].levels;
            l /= self.axes[m].levels;
        }
        out
    }

    pub fn flat_index(&self, multi: &[usize]) -> usize {
        multi
            .iter()
            .zip(&self.axes)
            .fold(0, |acc, (&k, ax)| acc * ax.levels + k)
    }

    /// Cell index of `x`, rejecting points outside the support.
    pub fn quantize(&self, x: &[f64]) -> Result<usize> {
        self.quantize_with_tolerance(x, 0.0)
    }

    /// Cell index of `x`. Coordinates up to `tolerance` outside the support are
    /// clamped to the boundary; anything further out is an error.
    pub fn quantize_with_tolerance(&self, x: &[f64], tolerance: f64) -> Result<usize> {
        if x.len() != self.dim() {
            return Err(Error::invalid(format!(
                "point has dimension {}, grid has {}",
                x.len(),
                self.dim()
            )));
        }
        let mut l = 0;
        for (&xm, ax) in x.iter().zip(&self.axes) {
            if !(xm >= ax.lower - tolerance && xm <= ax.upper + tolerance) {
                return Err(Error::OutOfSupport {
                    point: x.to_vec(),
                    tolerance,
                });
            }
            l = l * ax.levels + ax.level_of(xm.clamp(ax.lower, ax.upper));
        }
        Ok(l)
    }

    /// Quantizer for points already known to be in the support (clamps silently).
    pub(crate) fn quantize_clamped(&self, x: &[f64]) -> usize {
        x.iter()
            .zip(&self.axes)
            .fold(0, |l, (&xm, ax)| l * ax.levels + ax.level_of(xm))
    }

    /// Nearest reconstruction point `Q(x)`.
    pub fn snap(&self, x: &[f64]) -> Result<&[f64]> {
        Ok(self.center(self.quantize(x)?))
    }

    /// The `M x L_S` matrix whose column `l` is the center of cell `l`.
    pub fn reconstruction_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_column_slice(self.dim(), self.len, &self.centers)
    }

    pub fn cell_bounds(&self, l: usize) -> Result<(Vec<f64>, Vec<f64>)> {
        if l >= self.len {
            return Err(Error::invalid(format!(
                "cell index {l} out of range (grid has {} cells)",
                self.len
            )));
        }
        let multi = self.multi_index(l);
        let lower = multi
            .iter()
            .zip(&self.axes)
            .map(|(&k, ax)| ax.lower + k as f64 * ax.width())
            .collect();
        let upper = multi
            .iter()
            .zip(&self.axes)
            .map(|(&k, ax)| {
                if k + 1 == ax.levels {
                    ax.upper
                } else {
                    ax.lower + (k + 1) as f64 * ax.width()
                }
            })
            .collect();
        Ok((lower, upper))
    }

    /// Worst-case L1 distance between a support point and its cell center,
    /// `sum_m (b_m - a_m) / (2 L_m)`.
    pub fn max_quantization_error(&self) -> f64 {
        self.axes.iter().map(|ax| 0.5 * ax.width()).sum()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim() && x.iter().zip(&self.axes).all(|(&v, ax)| v >= ax.lower && v <= ax.upper)
    }
}
