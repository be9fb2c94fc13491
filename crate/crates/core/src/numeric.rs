//! Small dense vectors and matrices, the seeded random source, and the
//! central-difference oracle used to check every analytic derivative.
//!
//! Matrices follow the "numerator becomes a row" convention: for a derivative
//! of a vector `y` with respect to a vector `x`, element `(i, j)` holds
//! `∂y^j/∂x^i`. A backward recursion such as `g_t = J_t · g_{t+1}` is then a
//! plain matrix-vector product.

use std::fmt;
use std::ops::{Index, IndexMut};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use smallvec::SmallVec;

use crate::error::{Error, Result};

type VecStore = SmallVec<[f64; 4]>;
type MatStore = SmallVec<[f64; 9]>;

#[derive(Clone, PartialEq, Default)]
pub struct RealVec(VecStore);

impl RealVec {
    pub fn zeros(n: usize) -> Self {
        RealVec(SmallVec::from_elem(0.0, n))
    }

    pub fn from_slice(v: &[f64]) -> Self {
        RealVec(SmallVec::from_slice(v))
    }

    pub fn scalar(v: f64) -> Self {
        Self::from_slice(&[v])
    }

    pub fn basis(n: usize, i: usize) -> Self {
        let mut v = Self::zeros(n);
        v[i] = 1.0;
        v
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.0
    }

    pub fn iter(&self) -> std::slice::Iter<'_, f64> {
        self.0.iter()
    }

    pub fn to_vec(&self) -> Vec<f64> {
        self.0.to_vec()
    }

    pub fn dot(&self, other: &RealVec) -> f64 {
        debug_assert_eq!(self.len(), other.len());
        self.0.iter().zip(other.0.iter()).map(|(a, b)| a * b).sum()
    }

    pub fn norm(&self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.0.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }

    pub fn scaled(&self, s: f64) -> RealVec {
        RealVec(self.0.iter().map(|v| v * s).collect())
    }

    pub fn add(&self, other: &RealVec) -> RealVec {
        debug_assert_eq!(self.len(), other.len());
        RealVec(self.0.iter().zip(other.0.iter()).map(|(a, b)| a + b).collect())
    }

    pub fn sub(&self, other: &RealVec) -> RealVec {
        debug_assert_eq!(self.len(), other.len());
        RealVec(self.0.iter().zip(other.0.iter()).map(|(a, b)| a - b).collect())
    }

    /// `self += s * other`
    pub fn axpy(&mut self, s: f64, other: &RealVec) {
        debug_assert_eq!(self.len(), other.len());
        for (a, b) in self.0.iter_mut().zip(other.0.iter()) {
            *a += s * b;
        }
    }

    /// Checks the type invariants: non-empty and all elements finite.
    pub fn validate(&self, what: &str) -> Result<()> {
        if self.is_empty() {
            return Err(Error::Argument(format!("{what}: empty vector")));
        }
        if !self.is_finite() {
            return Err(Error::Argument(format!("{what}: non-finite element in {self:?}")));
        }
        Ok(())
    }
}

impl From<Vec<f64>> for RealVec {
    fn from(v: Vec<f64>) -> Self {
        RealVec(SmallVec::from_vec(v))
    }
}

impl FromIterator<f64> for RealVec {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        RealVec(iter.into_iter().collect())
    }
}

impl Index<usize> for RealVec {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

impl IndexMut<usize> for RealVec {
    fn index_mut(&mut self, i: usize) -> &mut f64 {
        &mut self.0[i]
    }
}

impl fmt::Debug for RealVec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.0.iter()).finish()
    }
}

/// Row-major dense matrix.
#[derive(Clone, PartialEq)]
pub struct RealMat {
    rows: usize,
    cols: usize,
    data: MatStore,
}

impl RealMat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        RealMat { rows, cols, data: SmallVec::from_elem(0.0, rows * cols) }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_row_major(rows: usize, cols: usize, data: &[f64]) -> Result<Self> {
        if rows * cols != data.len() {
            return Err(Error::Argument(format!(
                "{rows}x{cols} matrix needs {} elements, got {}",
                rows * cols,
                data.len()
            )));
        }
        Ok(RealMat { rows, cols, data: SmallVec::from_slice(data) })
    }

    pub fn diag(d: &[f64]) -> Self {
        let mut m = Self::zeros(d.len(), d.len());
        for (i, v) in d.iter().enumerate() {
            m[(i, i)] = *v;
        }
        m
    }

    /// `u vᵀ`
    pub fn outer(u: &RealVec, v: &RealVec) -> Self {
        let mut m = Self::zeros(u.len(), v.len());
        for i in 0..u.len() {
            for j in 0..v.len() {
                m[(i, j)] = u[i] * v[j];
            }
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> RealVec {
        RealVec::from_slice(&self.data[i * self.cols..(i + 1) * self.cols])
    }

    pub fn column(&self, j: usize) -> RealVec {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn set_row(&mut self, i: usize, v: &RealVec) {
        debug_assert_eq!(v.len(), self.cols);
        self.data[i * self.cols..(i + 1) * self.cols].copy_from_slice(v.as_slice());
    }

    pub fn set_column(&mut self, j: usize, v: &RealVec) {
        debug_assert_eq!(v.len(), self.rows);
        for i in 0..self.rows {
            self[(i, j)] = v[i];
        }
    }

    /// `self · v`
    pub fn mul_vec(&self, v: &RealVec) -> RealVec {
        debug_assert_eq!(self.cols, v.len());
        (0..self.rows)
            .map(|i| {
                let row = &self.data[i * self.cols..(i + 1) * self.cols];
                row.iter().zip(v.iter()).map(|(a, b)| a * b).sum()
            })
            .collect()
    }

    /// `selfᵀ · v`
    pub fn tr_mul_vec(&self, v: &RealVec) -> RealVec {
        debug_assert_eq!(self.rows, v.len());
        let mut out = RealVec::zeros(self.cols);
        for i in 0..self.rows {
            let vi = v[i];
            if vi == 0.0 {
                continue;
            }
            for j in 0..self.cols {
                out[j] += self[(i, j)] * vi;
            }
        }
        out
    }

    pub fn matmul(&self, other: &RealMat) -> RealMat {
        debug_assert_eq!(self.cols, other.rows);
        let mut out = RealMat::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == 0.0 {
                    continue;
                }
                for j in 0..other.cols {
                    out[(i, j)] += a * other[(k, j)];
                }
            }
        }
        out
    }

    pub fn transpose(&self) -> RealMat {
        let mut out = RealMat::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out[(j, i)] = self[(i, j)];
            }
        }
        out
    }

    pub fn add(&self, other: &RealMat) -> RealMat {
        debug_assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        RealMat {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(other.data.iter()).map(|(a, b)| a + b).collect(),
        }
    }

    pub fn sub(&self, other: &RealMat) -> RealMat {
        self.add(&other.scaled(-1.0))
    }

    pub fn scaled(&self, s: f64) -> RealMat {
        RealMat { rows: self.rows, cols: self.cols, data: self.data.iter().map(|v| v * s).collect() }
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    pub fn trace(&self) -> f64 {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).sum()
    }

    /// Determinant of a 2×2 matrix.
    pub fn det2(&self) -> f64 {
        debug_assert_eq!((self.rows, self.cols), (2, 2));
        self[(0, 0)] * self[(1, 1)] - self[(0, 1)] * self[(1, 0)]
    }

    /// Inverse of a 2×2 matrix, `None` when singular.
    pub fn inverse2(&self) -> Option<RealMat> {
        let det = self.det2();
        if det == 0.0 || !det.is_finite() {
            return None;
        }
        let mut out = RealMat::zeros(2, 2);
        out[(0, 0)] = self[(1, 1)] / det;
        out[(1, 1)] = self[(0, 0)] / det;
        out[(0, 1)] = -self[(0, 1)] / det;
        out[(1, 0)] = -self[(1, 0)] / det;
        Some(out)
    }
}

impl Index<(usize, usize)> for RealMat {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for RealMat {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }
}

impl fmt::Debug for RealMat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "RealMat{}x{}[", self.rows, self.cols)?;
        for i in 0..self.rows {
            if i > 0 {
                write!(f, "; ")?;
            }
            for j in 0..self.cols {
                if j > 0 {
                    write!(f, ", ")?;
                }
                write!(f, "{}", self[(i, j)])?;
            }
        }
        write!(f, "]")
    }
}

/// Deterministic random source. Each trial owns one; identical seeds replay
/// identical draw sequences.
#[derive(Clone, Debug)]
pub struct SeededRng {
    seed: u64,
    inner: ChaCha8Rng,
}

impl SeededRng {
    pub fn new(seed: u64) -> Self {
        SeededRng { seed, inner: ChaCha8Rng::seed_from_u64(seed) }
    }

    /// Independent stream for trial `index` of a run seeded with `seed`.
    pub fn for_trial(seed: u64, index: u64) -> Self {
        let mut inner = ChaCha8Rng::seed_from_u64(seed);
        inner.set_stream(index);
        SeededRng { seed, inner }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Uniform draw in `[lo, hi]`.
    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        if lo == hi {
            return lo;
        }
        self.inner.random_range(lo..=hi)
    }

    pub fn standard_normal(&mut self) -> f64 {
        StandardNormal.sample(&mut self.inner)
    }

    /// Draw from N(0, sd²); `sd == 0` returns exactly zero without consuming
    /// randomness.
    pub fn normal(&mut self, sd: f64) -> Result<f64> {
        rnd(sd, self)
    }
}

/// Normally distributed exploration noise with mean 0 and standard deviation `eps`.
pub fn rnd(eps: f64, rng: &mut SeededRng) -> Result<f64> {
    if !(eps >= 0.0) || !eps.is_finite() {
        return Err(Error::Argument(format!("noise standard deviation must be >= 0, got {eps}")));
    }
    if eps == 0.0 {
        return Ok(0.0);
    }
    let dist = Normal::new(0.0, eps).map_err(|e| Error::Argument(e.to_string()))?;
    Ok(dist.sample(&mut rng.inner))
}

/// Default relative probe size for [`fd_gradient`].
pub const FD_STEP: f64 = 1e-5;

fn probe_step(h: f64, xi: f64) -> f64 {
    h * xi.abs().max(1.0)
}

/// Central-difference gradient of a scalar function. The probe along
/// coordinate `i` is `h · max(1, |x_i|)`.
pub fn fd_gradient<F>(f: F, point: &RealVec, h: f64) -> Result<RealVec>
where
    F: Fn(&RealVec) -> f64,
{
    if !(h > 0.0) {
        return Err(Error::Argument(format!("finite-difference step must be positive, got {h}")));
    }
    let mut grad = RealVec::zeros(point.len());
    let mut probe = point.clone();
    for i in 0..point.len() {
        let hi = probe_step(h, point[i]);
        probe[i] = point[i] + hi;
        let up = f(&probe);
        probe[i] = point[i] - hi;
        let down = f(&probe);
        probe[i] = point[i];
        if !up.is_finite() || !down.is_finite() {
            return Err(Error::Oracle(format!(
                "non-finite evaluation along coordinate {i} at {point:?} (f+ = {up}, f- = {down})"
            )));
        }
        grad[i] = (up - down) / (2.0 * hi);
    }
    Ok(grad)
}

/// Central-difference Jacobian of a vector function, in the row convention:
/// element `(i, j)` is `∂f^j/∂x^i`.
pub fn fd_jacobian<F>(f: F, point: &RealVec, h: f64) -> Result<RealMat>
where
    F: Fn(&RealVec) -> RealVec,
{
    if !(h > 0.0) {
        return Err(Error::Argument(format!("finite-difference step must be positive, got {h}")));
    }
    let base = f(point);
    let mut jac = RealMat::zeros(point.len(), base.len());
    let mut probe = point.clone();
    for i in 0..point.len() {
        let hi = probe_step(h, point[i]);
        probe[i] = point[i] + hi;
        let up = f(&probe);
        probe[i] = point[i] - hi;
        let down = f(&probe);
        probe[i] = point[i];
        if !up.is_finite() || !down.is_finite() {
            return Err(Error::Oracle(format!("non-finite evaluation along coordinate {i} at {point:?}")));
        }
        let row = up.sub(&down).scaled(1.0 / (2.0 * hi));
        jac.set_row(i, &row);
    }
    Ok(jac)
}

/// Relative error `|a − b| / max(1, |b|)`, the comparison used by all
/// derivative checks.
pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1.0)
}

pub fn max_rel_err(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let scale = b.iter().fold(1.0_f64, |m, v| m.max(v.abs()));
    a.iter().zip(b).fold(0.0_f64, |m, (x, y)| m.max((x - y).abs() / scale))
}
