//! Column-stochastic transition matrices over grid cells, their closed-form
//! and empirical constructors, and the initial belief vector.
//!
//! `P(i, j)` is the probability of moving to cell `i` from cell `j`, so every
//! column of `P` sums to one and the predicted belief is `P * E`.

use std::io::{Read, Write};
use std::path::Path;

use log::warn;

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::models::{check_support, HiddenModel, TruncGaussNar};
use crate::normal;
use crate::rng::StreamRng;

pub const MATRIX_MAGIC: &[u8; 4] = b"GFTM";
pub const BELIEF_MAGIC: &[u8; 4] = b"GFBV";
pub const FORMAT_VERSION: u32 = 1;

/// Default number of steps discarded before counting marginal transitions.
pub const DEFAULT_BURN_IN: usize = 1000;

/// Default Monte Carlo sample count for initial beliefs without a closed form.
pub const DEFAULT_INITIAL_SAMPLES: usize = 1_000_000;

/// Dense `L_S x L_S` column-stochastic matrix, stored column-major.
#[derive(Clone, Debug, PartialEq)]
pub struct TransitionMatrix {
    n: usize,
    data: Vec<f64>,
}

impl TransitionMatrix {
    pub fn identity(n: usize) -> Self {
        let mut data = vec![0.0; n * n];
        for j in 0..n {
            data[j * n + j] = 1.0;
        }
        Self { n, data }
    }

    /// Builds a matrix from column-major data, checking that it is column
    /// stochastic within `tol`.
    pub fn from_column_major(n: usize, data: Vec<f64>, tol: f64) -> Result<Self> {
        if n == 0 || data.len() != n * n {
            return Err(Error::invalid(format!(
                "expected {n}x{n} = {} entries, got {}",
                n * n,
                data.len()
            )));
        }
        let m = Self { n, data };
        m.validate(tol)?;
        Ok(m)
    }

    pub fn from_columns(columns: &[Vec<f64>], tol: f64) -> Result<Self> {
        let n = columns.len();
        if columns.iter().any(|c| c.len() != n) {
            return Err(Error::invalid("transition matrix must be square"));
        }
        Self::from_column_major(n, columns.concat(), tol)
    }

    /// Row-major input, i.e. `rows[i][j] = P(i, j)`.
    pub fn from_rows(rows: &[Vec<f64>], tol: f64) -> Result<Self> {
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(Error::invalid("transition matrix must be square"));
        }
        let mut data = vec![0.0; n * n];
        for (i, row) in rows.iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                data[j * n + i] = v;
            }
        }
        Self::from_column_major(n, data, tol)
    }

    pub fn validate(&self, tol: f64) -> Result<()> {
        for (j, col) in self.data.chunks_exact(self.n).enumerate() {
            if let Some(i) = col.iter().position(|&p| !(0.0..=1.0).contains(&p)) {
                return Err(Error::invalid(format!(
                    "entry ({i}, {j}) = {} is not a probability",
                    col[i]
                )));
            }
            let s: f64 = col.iter().sum();
            if (s - 1.0).abs() > tol {
                return Err(Error::invalid(format!("column {j} sums to {s}")));
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[j * self.n + i]
    }

    pub fn column(&self, j: usize) -> &[f64] {
        &self.data[j * self.n..(j + 1) * self.n]
    }

    pub fn as_column_major(&self) -> &[f64] {
        &self.data
    }

    pub fn column_sums(&self) -> Vec<f64> {
        self.data.chunks_exact(self.n).map(|c| c.iter().sum()).collect()
    }

    /// `P * v`.
    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(v.len(), self.n, "vector length must match the matrix");
        let mut out = vec![0.0; self.n];
        for (col, &vj) in self.data.chunks_exact(self.n).zip(v) {
            if vj == 0.0 {
                continue;
            }
            for (o, &p) in out.iter_mut().zip(col) {
                *o += p * vj;
            }
        }
        out
    }

    /// `P^rho * v` by repeated products.
    pub fn apply_power(&self, v: &[f64], rho: usize) -> Vec<f64> {
        let mut out = v.to_vec();
        for _ in 0..rho {
            out = self.apply(&out);
        }
        out
    }

    pub fn write_to<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        w.write_all(MATRIX_MAGIC)?;
        w.write_all(&FORMAT_VERSION.to_le_bytes())?;
        w.write_all(&(self.n as u64).to_le_bytes())?;
        w.write_all(&(self.n as u64).to_le_bytes())?;
        for i in 0..self.n {
            for j in 0..self.n {
                w.write_all(&self.get(i, j).to_le_bytes())?;
            }
        }
        Ok(())
    }

    /// Reads a GFTM container. Entries are taken verbatim; call
    /// [`validate`](Self::validate) to check stochasticity.
    pub fn read_from<R: Read>(mut r: R) -> Result<Self> {
        let (rows, cols) = read_header(&mut r, MATRIX_MAGIC, 2)?;
        if rows != cols || rows == 0 {
            return Err(Error::Format(format!(
                "transition matrix must be square and nonempty, got {rows}x{cols}"
            )));
        }
        let n = rows;
        let row_major = read_f64s(
            &mut r,
            n.checked_mul(n)
                .ok_or_else(|| Error::Format("dimension overflow".into()))?,
        )?;
        let mut data = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                data[j * n + i] = row_major[i * n + j];
            }
        }
        Ok(Self { n, data })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = std::io::BufWriter::new(file);
        self.write_to(&mut w)
            .and_then(|()| w.flush())
            .map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_from(std::io::BufReader::new(file))
    }
}

fn read_header<R: Read>(r: &mut R, magic: &[u8; 4], ndims: usize) -> Result<(usize, usize)> {
    let mut buf4 = [0u8; 4];
    read_exact(r, &mut buf4)?;
    if &buf4 != magic {
        return Err(Error::Format(format!(
            "bad magic {:?}, expected {:?}",
            String::from_utf8_lossy(&buf4),
            String::from_utf8_lossy(magic)
        )));
    }
    read_exact(r, &mut buf4)?;
    let version = u32::from_le_bytes(buf4);
    if version != FORMAT_VERSION {
        return Err(Error::Format(format!("unsupported version {version}")));
    }
    let mut dims = [0usize; 2];
    for d in dims.iter_mut().take(ndims) {
        let mut buf8 = [0u8; 8];
        read_exact(r, &mut buf8)?;
        *d = usize::try_from(u64::from_le_bytes(buf8)).map_err(|_| Error::Format("dimension too large".into()))?;
    }
    Ok((dims[0], dims[1]))
}

fn read_f64s<R: Read>(r: &mut R, count: usize) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(count.min(1 << 24));
    let mut buf = [0u8; 8];
    for _ in 0..count {
        read_exact(r, &mut buf)?;
        out.push(f64::from_le_bytes(buf));
    }
    let mut extra = [0u8; 1];
    match r.read(&mut extra) {
        Ok(0) => Ok(out),
        Ok(_) => Err(Error::Format("trailing bytes after payload".into())),
        Err(e) => Err(Error::Format(e.to_string())),
    }
}

fn read_exact<R: Read>(r: &mut R, buf: &mut [u8]) -> Result<()> {
    r.read_exact(buf)
        .map_err(|e| Error::Format(format!("truncated container: {e}")))
}

/// Nonnegative, not identically zero point mass over grid cells.
#[derive(Clone, Debug, PartialEq)]
pub struct BeliefVector(Vec<f64>);

impl BeliefVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::invalid("belief entries must be finite and nonnegative"));
        }
        if values.iter().all(|&v| v == 0.0) {
            return Err(Error::invalid("belief vector is identically zero"));
        }
        Ok(Self(values))
    }

    pub fn uniform(n: usize) -> Self {
        Self(vec![1.0 / n as f64; n])
    }

    pub fn indicator(n: usize, l: usize) -> Self {
        let mut v = vec![0.0; n];
        v[l] = 1.0;
        Self(v)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn total(&self) -> f64 {
        self.0.iter().sum()
    }

    pub fn normalized(&self) -> Vec<f64> {
        let s = self.total();
        self.0.iter().map(|v| v / s).collect()
    }

    pub fn write_to<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        w.write_all(BELIEF_MAGIC)?;
        w.write_all(&FORMAT_VERSION.to_le_bytes())?;
        w.write_all(&(self.0.len() as u64).to_le_bytes())?;
        for v in &self.0 {
            w.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_from<R: Read>(mut r: R) -> Result<Self> {
        let (n, _) = read_header(&mut r, BELIEF_MAGIC, 1)?;
        let values = read_f64s(&mut r, n)?;
        Self::new(values).map_err(|e| Error::Format(e.to_string()))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = std::io::BufWriter::new(file);
        self.write_to(&mut w)
            .and_then(|()| w.flush())
            .map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_from(std::io::BufReader::new(file))
    }
}

/// Closed-form transition matrix of the Markovian quantization of a
/// truncated-Gaussian NAR: `P(i, j) = P(h(x_j) + W in cell i)`.
///
/// The probability is the integral of `f_W` over the shifted cell,
/// `[Phi(p / sigma) - Phi(q / sigma)] / (2 Phi(alpha / sigma) - 1)`, with
/// `p = min(alpha, x_i - h(x_j) + w/2)` and `q = max(-alpha, x_i - h(x_j) - w/2)`
/// for cell width `w`. Note the denominator carries no factor `sigma`: it is
/// the truncation mass, so every column sums to one.
pub fn nar_closed_form_transition(nar: &TruncGaussNar, grid: &Grid) -> Result<TransitionMatrix> {
    if grid.dim() != 1 {
        return Err(Error::invalid(
            "closed-form NAR transitions need a one-dimensional grid",
        ));
    }
    let ax = grid.axes()[0];
    let b = nar.half_width();
    let tol = 1e-12 * b.max(1.0);
    if (ax.lower + b).abs() > tol || (ax.upper - b).abs() > tol {
        return Err(Error::invalid(format!(
            "grid spans [{}, {}] but the NAR support is [-{b}, {b}]",
            ax.lower, ax.upper
        )));
    }
    let n = grid.len();
    let half = 0.5 * ax.width();
    let (alpha, sigma) = (nar.alpha(), nar.sigma());
    let mut data = vec![0.0; n * n];
    for j in 0..n {
        let hj = nar.h(grid.center(j)[0]);
        for i in 0..n {
            let d = grid.center(i)[0] - hj;
            let p = alpha.min(d + half);
            let q = (-alpha).max(d - half);
            if q < p {
                data[j * n + i] = normal::interval_mass(q / sigma, p / sigma) / nar.truncation_mass();
            }
        }
    }
    Ok(TransitionMatrix { n, data })
}

/// An empirically estimated transition matrix with its visit statistics.
#[derive(Clone, Debug)]
pub struct EmpiricalTransition {
    pub matrix: TransitionMatrix,
    /// Number of transitions counted out of each cell.
    pub visits: Vec<u64>,
    /// Columns never visited; they hold the uniform distribution.
    pub zero_visit_columns: Vec<usize>,
}

fn normalize_counts(n: usize, counts: Vec<u64>) -> EmpiricalTransition {
    let mut data = vec![0.0; n * n];
    let mut visits = vec![0u64; n];
    let mut zero = Vec::new();
    for j in 0..n {
        let col = &counts[j * n..(j + 1) * n];
        let total: u64 = col.iter().sum();
        visits[j] = total;
        if total == 0 {
            zero.push(j);
            data[j * n..(j + 1) * n].fill(1.0 / n as f64);
        } else {
            for (d, &c) in data[j * n..(j + 1) * n].iter_mut().zip(col) {
                *d = c as f64 / total as f64;
            }
        }
    }
    if !zero.is_empty() {
        warn!(
            "{} of {n} cells were never visited during training; their columns are uniform",
            zero.len()
        );
    }
    EmpiricalTransition {
        matrix: TransitionMatrix { n, data },
        visits,
        zero_visit_columns: zero,
    }
}

/// Estimates `P` by simulating the Markovian quantization
/// `X_t = Q(f(X_{t-1}, W_t))` for `n_samples` transitions, starting from a
/// quantized initial draw, and normalizing the transition counts.
pub fn empirical_transition_markovian(
    hidden: &dyn HiddenModel,
    grid: &Grid,
    n_samples: usize,
    rng: &mut StreamRng,
) -> Result<EmpiricalTransition> {
    if n_samples == 0 {
        return Err(Error::invalid("n_samples must be positive"));
    }
    let mapping = hidden
        .mapping()
        .ok_or_else(|| Error::invalid("Markovian estimation needs a transition mapping"))?;
    let n = grid.len();
    let mut counts = vec![0u64; n * n];
    let x0 = hidden.sample_initial(rng);
    check_support(hidden, &x0)?;
    let mut from = grid.quantize(&x0)?;
    for _ in 0..n_samples {
        let w = mapping.sample_innovation(rng);
        let next = mapping.apply(grid.center(from), &w);
        check_support(hidden, &next)?;
        let to = grid.quantize(&next)?;
        counts[from * n + to] += 1;
        from = to;
    }
    Ok(normalize_counts(n, counts))
}

/// Estimates `P` for the marginal quantization: simulate the true chain,
/// discard `burn_in` steps, then count transitions between the cells of
/// consecutive states.
pub fn empirical_transition_marginal(
    hidden: &dyn HiddenModel,
    grid: &Grid,
    n_samples: usize,
    burn_in: usize,
    rng: &mut StreamRng,
) -> Result<EmpiricalTransition> {
    if n_samples == 0 {
        return Err(Error::invalid("n_samples must be positive"));
    }
    let n = grid.len();
    let mut counts = vec![0u64; n * n];
    let mut x = hidden.sample_initial(rng);
    check_support(hidden, &x)?;
    for _ in 0..burn_in {
        x = hidden.sample_next(&x, rng);
    }
    check_support(hidden, &x)?;
    let mut from = grid.quantize(&x)?;
    for _ in 0..n_samples {
        x = hidden.sample_next(&x, rng);
        check_support(hidden, &x)?;
        let to = grid.quantize(&x)?;
        counts[from * n + to] += 1;
        from = to;
    }
    Ok(normalize_counts(n, counts))
}

/// `E_{-1}(j) = P(X_{-1} in cell j)`: closed form when the model provides it,
/// otherwise the normalized histogram of `n_samples` initial draws.
pub fn initial_belief(
    grid: &Grid,
    hidden: &dyn HiddenModel,
    n_samples: usize,
    rng: &mut StreamRng,
) -> Result<BeliefVector> {
    if let Some(mass) = hidden.initial_cell_mass(grid) {
        return BeliefVector::new(mass);
    }
    if n_samples == 0 {
        return Err(Error::invalid("n_samples must be positive"));
    }
    let mut counts = vec![0u64; grid.len()];
    for _ in 0..n_samples {
        let x = hidden.sample_initial(rng);
        counts[grid.quantize(&x)?] += 1;
    }
    BeliefVector::new(counts.into_iter().map(|c| c as f64 / n_samples as f64).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{InitialLaw, NarModel, ScalarMap, TransitionMapping};
    use crate::quadrature;
    use crate::rng::StreamKey;
    use rand::Rng;

    /// `f(x, w) = x`: every cell is absorbing.
    struct Sticky;

    impl TransitionMapping for Sticky {
        fn sample_innovation(&self, _: &mut StreamRng) -> Vec<f64> {
            vec![0.0]
        }
        fn apply(&self, x: &[f64], _: &[f64]) -> Vec<f64> {
            x.to_vec()
        }
    }

    impl HiddenModel for Sticky {
        fn dim(&self) -> usize {
            1
        }
        fn support(&self) -> Vec<(f64, f64)> {
            vec![(0.0, 1.0)]
        }
        fn sample_initial(&self, rng: &mut StreamRng) -> Vec<f64> {
            vec![rng.random()]
        }
        fn sample_next(&self, x: &[f64], _: &mut StreamRng) -> Vec<f64> {
            x.to_vec()
        }
        fn mapping(&self) -> Option<&dyn TransitionMapping> {
            Some(self)
        }
    }

    #[test]
    fn matrix_products() {
        let p = TransitionMatrix::from_rows(&[vec![0.9, 0.2], vec![0.1, 0.8]], 1e-12).unwrap();
        assert_eq!(p.get(1, 0), 0.1);
        let v = p.apply(&[1.0, 0.0]);
        assert_eq!(v, vec![0.9, 0.1]);
        let v2 = p.apply_power(&[1.0, 0.0], 2);
        assert!((v2[0] - (0.81 + 0.02)).abs() < 1e-15);
        assert!(TransitionMatrix::from_rows(&[vec![0.9, 0.2], vec![0.2, 0.8]], 1e-12).is_err());
        assert!(TransitionMatrix::from_rows(&[vec![1.1, 0.0], vec![-0.1, 1.0]], 1.0).is_err());
    }

    #[test]
    fn closed_form_columns_sum_to_one() {
        let nar = TruncGaussNar::reference();
        for levels in [2, 8, 33] {
            let g = Grid::uniform(-2.0, 2.0, 1, levels).unwrap();
            let p = nar_closed_form_transition(&nar, &g).unwrap();
            for s in p.column_sums() {
                assert!((s - 1.0).abs() < 1e-12);
            }
        }
        let g = Grid::uniform(-1.0, 1.0, 1, 8).unwrap();
        assert!(nar_closed_form_transition(&nar, &g).is_err());
    }

    #[test]
    fn closed_form_constant_h_has_identical_columns() {
        let nar = TruncGaussNar::new(ScalarMap::Constant(0.0), 1.0, 0.3).unwrap();
        let g = Grid::uniform(-1.0, 1.0, 1, 10).unwrap();
        let p = nar_closed_form_transition(&nar, &g).unwrap();
        for j in 1..10 {
            assert_eq!(p.column(j), p.column(0));
        }
    }

    #[test]
    fn closed_form_matches_quadrature() {
        let nar = TruncGaussNar::reference();
        let g = Grid::uniform(-2.0, 2.0, 1, 8).unwrap();
        let p = nar_closed_form_transition(&nar, &g).unwrap();
        for j in 0..8 {
            let hj = nar.h(g.center(j)[0]);
            for i in 0..8 {
                let (lo, hi) = g.cell_bounds(i).unwrap();
                let q = quadrature::integrate_with_breaks(
                    |x| nar.fw_density(x - hj),
                    lo[0],
                    hi[0],
                    &[hj - 1.0, hj + 1.0],
                    1e-13,
                );
                assert!((p.get(i, j) - q).abs() < 1e-8, "({i},{j})");
            }
        }
    }

    #[test]
    fn wide_truncation_approaches_gaussian_cells() {
        let sigma = 0.3;
        let nar = TruncGaussNar::new(
            ScalarMap::Tanh {
                amplitude: 1.0,
                scale: 1.3,
            },
            20.0 * sigma,
            sigma,
        )
        .unwrap();
        let b = nar.half_width();
        let g = Grid::uniform(-b, b, 1, 16).unwrap();
        let p = nar_closed_form_transition(&nar, &g).unwrap();
        for j in 0..16 {
            let hj = nar.h(g.center(j)[0]);
            for i in 0..16 {
                let (lo, hi) = g.cell_bounds(i).unwrap();
                let erf_cell = 0.5
                    * (statrs::function::erf::erf((hi[0] - hj) / (sigma * std::f64::consts::SQRT_2))
                        - statrs::function::erf::erf((lo[0] - hj) / (sigma * std::f64::consts::SQRT_2)));
                assert!((p.get(i, j) - erf_cell).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn powers_stay_stochastic() {
        let p =
            nar_closed_form_transition(&TruncGaussNar::reference(), &Grid::uniform(-2.0, 2.0, 1, 12).unwrap()).unwrap();
        for rho in 1..=10 {
            for j in 0..12 {
                let mut e = vec![0.0; 12];
                e[j] = 1.0;
                let s: f64 = p.apply_power(&e, rho).iter().sum();
                assert!((s - 1.0).abs() <= rho as f64 * 1e-12);
            }
        }
    }

    #[test]
    fn sticky_dynamics_give_identity() {
        let g = Grid::uniform(0.0, 1.0, 1, 5).unwrap();
        let mut rng = StreamKey::new(1).rng();
        let est = empirical_transition_markovian(&Sticky, &g, 100, &mut rng).unwrap();
        // only the starting cell is visited; it must be absorbing
        let start = (0..5).find(|&j| est.visits[j] > 0).unwrap();
        assert_eq!(est.matrix.get(start, start), 1.0);
        assert_eq!(est.zero_visit_columns.len(), 4);
        for &j in &est.zero_visit_columns {
            assert!(est.matrix.column(j).iter().all(|&v| v == 0.2));
        }

        let mut marg_rng = StreamKey::new(2).rng();
        let est = empirical_transition_marginal(&Sticky, &g, 50, 10, &mut marg_rng).unwrap();
        let start = (0..5).find(|&j| est.visits[j] > 0).unwrap();
        assert_eq!(est.matrix.get(start, start), 1.0);
        assert!(empirical_transition_marginal(&Sticky, &g, 0, 10, &mut marg_rng).is_err());
        assert!(empirical_transition_markovian(&Sticky, &g, 0, &mut marg_rng).is_err());
    }

    #[test]
    fn empirical_columns_sum_to_one() {
        let model = NarModel::new(TruncGaussNar::reference(), InitialLaw::Uniform).unwrap();
        let g = model.grid(8).unwrap();
        let mut rng = StreamKey::new(3).rng();
        let est = empirical_transition_marginal(&model, &g, 20_000, 100, &mut rng).unwrap();
        for s in est.matrix.column_sums() {
            assert!((s - 1.0).abs() < 1e-15);
        }
        let est = empirical_transition_markovian(&model, &g, 20_000, &mut rng).unwrap();
        for s in est.matrix.column_sums() {
            assert!((s - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn initial_belief_sources() {
        let model = NarModel::new(TruncGaussNar::reference(), InitialLaw::Uniform).unwrap();
        let g = model.grid(8).unwrap();
        let mut rng = StreamKey::new(4).rng();
        let e = initial_belief(&g, &model, 10, &mut rng).unwrap();
        assert_eq!(e.as_slice(), &[0.125; 8]);

        // no closed form: histogram of draws
        let e = initial_belief(&Grid::uniform(0.0, 1.0, 1, 4).unwrap(), &Sticky, 40_000, &mut rng).unwrap();
        assert!((e.total() - 1.0).abs() < 1e-15);
        for v in e.as_slice() {
            assert!((v - 0.25).abs() < 0.02);
        }
    }

    #[test]
    fn belief_validation() {
        assert!(BeliefVector::new(vec![0.0, 0.0]).is_err());
        assert!(BeliefVector::new(vec![0.5, -0.1]).is_err());
        assert!(BeliefVector::new(vec![f64::NAN]).is_err());
        assert_eq!(BeliefVector::indicator(3, 1).as_slice(), &[0.0, 1.0, 0.0]);
    }

    #[test]
    fn container_errors() {
        let p = TransitionMatrix::identity(3);
        let mut buf = Vec::new();
        p.write_to(&mut buf).unwrap();
        assert_eq!(&buf[..4], b"GFTM");
        assert_eq!(buf.len(), 4 + 4 + 16 + 9 * 8);
        assert!(TransitionMatrix::read_from(&buf[..buf.len() - 1]).is_err());
        let mut extra = buf.clone();
        extra.push(0);
        assert!(TransitionMatrix::read_from(&extra[..]).is_err());
        let mut wrong = buf.clone();
        wrong[0] = b'X';
        assert!(TransitionMatrix::read_from(&wrong[..]).is_err());
        assert!(BeliefVector::read_from(&buf[..]).is_err());
    }
}
