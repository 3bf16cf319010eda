//! Small dense complex vectors and matrices.
//!
//! Everything the beamformers need reduces to inner products, rank-1
//! updates of the identity and one small linear solve, so this module stays
//! deliberately narrow: no eigendecompositions and no general inverse.

use std::ops::{Index, IndexMut};

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};

/// A column vector of complex entries.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexVector(Vec<Complex64>);

/// A dense row-major complex matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexMatrix {
    rows: usize,
    cols: usize,
    data: Vec<Complex64>,
}

fn check_len(expected: usize, actual: usize) -> Result<()> {
    if expected != actual {
        return Err(Error::Dimension { expected, actual });
    }
    Ok(())
}

impl ComplexVector {
    pub fn new(entries: Vec<Complex64>) -> Self {
        Self(entries)
    }

    pub fn zeros(len: usize) -> Self {
        Self(vec![Complex64::new(0.0, 0.0); len])
    }

    /// Builds a vector from real entries.
    pub fn from_real(entries: &[f64]) -> Self {
        Self(entries.iter().map(|&x| Complex64::new(x, 0.0)).collect())
    }

    /// The `k`-th standard basis vector of length `len`.
    pub fn basis(len: usize, k: usize) -> Self {
        let mut v = Self::zeros(len);
        v.0[k] = Complex64::new(1.0, 0.0);
        v
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.0
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Complex64> {
        self.0.iter()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.0.iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn norm(&self) -> f64 {
        norm(self)
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    pub fn scale(&self, s: Complex64) -> Self {
        Self(self.0.iter().map(|&z| z * s).collect())
    }

    /// `self + s * other`.
    pub fn axpy(&self, s: Complex64, other: &Self) -> Result<Self> {
        check_len(self.len(), other.len())?;
        Ok(Self(
            self.0
                .iter()
                .zip(&other.0)
                .map(|(&a, &b)| a + s * b)
                .collect(),
        ))
    }

    /// Euclidean distance `‖self − other‖`.
    pub fn distance(&self, other: &Self) -> Result<f64> {
        check_len(self.len(), other.len())?;
        Ok(self
            .0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (a - b).norm_sqr())
            .sum::<f64>()
            .sqrt())
    }
}

impl Index<usize> for ComplexVector {
    type Output = Complex64;
    fn index(&self, idx: usize) -> &Complex64 {
        &self.0[idx]
    }
}

impl IndexMut<usize> for ComplexVector {
    fn index_mut(&mut self, idx: usize) -> &mut Complex64 {
        &mut self.0[idx]
    }
}

impl From<Vec<Complex64>> for ComplexVector {
    fn from(v: Vec<Complex64>) -> Self {
        Self(v)
    }
}

impl ComplexMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![Complex64::new(0.0, 0.0); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for k in 0..n {
            m[(k, k)] = Complex64::new(1.0, 0.0);
        }
        m
    }

    /// Builds a matrix from row-major entries.
    pub fn from_rows(rows: usize, cols: usize, data: Vec<Complex64>) -> Result<Self> {
        check_len(rows * cols, data.len())?;
        if rows == 0 || cols == 0 {
            return Err(Error::Dimension {
                expected: 1,
                actual: 0,
            });
        }
        Ok(Self { rows, cols, data })
    }

    /// Builds a matrix from real row-major entries.
    pub fn from_real_rows(rows: usize, cols: usize, data: &[f64]) -> Result<Self> {
        Self::from_rows(
            rows,
            cols,
            data.iter().map(|&x| Complex64::new(x, 0.0)).collect(),
        )
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn entries(&self) -> &[Complex64] {
        &self.data
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    /// Maximum absolute column sum.
    pub fn norm_1(&self) -> f64 {
        (0..self.cols)
            .map(|c| (0..self.rows).map(|r| self[(r, c)].norm()).sum::<f64>())
            .fold(0.0, f64::max)
    }
}

impl Index<(usize, usize)> for ComplexMatrix {
    type Output = Complex64;
    fn index(&self, (r, c): (usize, usize)) -> &Complex64 {
        &self.data[r * self.cols + c]
    }
}

impl IndexMut<(usize, usize)> for ComplexMatrix {
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut Complex64 {
        &mut self.data[r * self.cols + c]
    }
}

/// `aᴴb`.
pub fn herm_inner(a: &ComplexVector, b: &ComplexVector) -> Result<Complex64> {
    check_len(a.len(), b.len())?;
    Ok(a.0.iter().zip(&b.0).map(|(x, y)| x.conj() * y).sum())
}

pub fn norm(a: &ComplexVector) -> f64 {
    a.norm_sqr().sqrt()
}

/// Scales `a` to unit norm.
pub fn normalize(a: &ComplexVector) -> Result<ComplexVector> {
    let n = norm(a);
    if n == 0.0 || !n.is_finite() {
        return Err(Error::Degenerate("cannot normalize a zero or non-finite vector"));
    }
    Ok(a.scale(Complex64::new(1.0 / n, 0.0)))
}

/// `Hx`.
pub fn matvec(h: &ComplexMatrix, x: &ComplexVector) -> Result<ComplexVector> {
    check_len(h.cols, x.len())?;
    let out = (0..h.rows)
        .map(|r| {
            h.data[r * h.cols..(r + 1) * h.cols]
                .iter()
                .zip(&x.0)
                .map(|(a, b)| a * b)
                .sum()
        })
        .collect();
    Ok(ComplexVector(out))
}

/// `Hᴴx`.
pub fn matvec_herm(h: &ComplexMatrix, x: &ComplexVector) -> Result<ComplexVector> {
    check_len(h.rows, x.len())?;
    let mut out = vec![Complex64::new(0.0, 0.0); h.cols];
    for r in 0..h.rows {
        let xr = x.0[r];
        for (c, o) in out.iter_mut().enumerate() {
            *o += h.data[r * h.cols + c].conj() * xr;
        }
    }
    Ok(ComplexVector(out))
}

/// Applies `(I + rho·g gᴴ)⁻¹` to `h` via Sherman–Morrison.
pub fn rank1_mmse_direction(g: &ComplexVector, rho: f64, h: &ComplexVector) -> Result<ComplexVector> {
    check_len(g.len(), h.len())?;
    if rho < 0.0 {
        return Err(Error::Precondition(format!("rho must be non-negative, got {rho}")));
    }
    let gh = herm_inner(g, h)?;
    let coeff = gh * (rho / (1.0 + rho * g.norm_sqr()));
    h.axpy(-coeff, g)
}

/// Removes the component of `h` along `g`.
pub fn project_orthogonal(h: &ComplexVector, g: &ComplexVector) -> Result<ComplexVector> {
    check_len(g.len(), h.len())?;
    let gg = g.norm_sqr();
    if gg == 0.0 {
        return Err(Error::Degenerate("projection onto the complement of a zero vector"));
    }
    let coeff = herm_inner(g, h)? / gg;
    h.axpy(-coeff, g)
}

/// A unit vector orthogonal to `g` (`g` nonzero, `len ≥ 2`).
///
/// Projects each standard basis vector and keeps the largest residual, so the
/// result is deterministic.
pub fn any_orthogonal_unit(g: &ComplexVector) -> Result<ComplexVector> {
    if g.len() < 2 {
        return Err(Error::Dimension {
            expected: 2,
            actual: g.len(),
        });
    }
    let mut best: Option<ComplexVector> = None;
    let mut best_norm = 0.0;
    for k in 0..g.len() {
        let r = project_orthogonal(&ComplexVector::basis(g.len(), k), g)?;
        let n = r.norm();
        if n > best_norm {
            best_norm = n;
            best = Some(r);
        }
    }
    normalize(&best.ok_or(Error::Degenerate("no orthogonal direction"))?)
}

pub fn complex_gaussian_vector<R: Rng + ?Sized>(dim: usize, variance: f64, rng: &mut R) -> ComplexVector {
    let s = (variance / 2.0).sqrt();
    ComplexVector(
        (0..dim)
            .map(|_| {
                let re: f64 = StandardNormal.sample(rng);
                let im: f64 = StandardNormal.sample(rng);
                Complex64::new(s * re, s * im)
            })
            .collect(),
    )
}

/// Two orthonormal vectors from Gram–Schmidt on a pair of complex Gaussian draws.
pub fn random_orthonormal_pair<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Result<(ComplexVector, ComplexVector)> {
    if dim < 2 {
        return Err(Error::Dimension {
            expected: 2,
            actual: dim,
        });
    }
    loop {
        let a = complex_gaussian_vector(dim, 1.0, rng);
        let b = complex_gaussian_vector(dim, 1.0, rng);
        let Ok(u) = normalize(&a) else { continue };
        // modified Gram–Schmidt with one re-orthogonalization pass
        let mut q = b;
        for _ in 0..2 {
            let c = herm_inner(&u, &q)?;
            q = q.axpy(-c, &u)?;
        }
        if q.norm() < 1e-8 {
            continue;
        }
        return Ok((u, normalize(&q)?));
    }
}

/// LU factorization with partial pivoting of a square matrix.
#[derive(Debug, Clone)]
pub struct Lu {
    n: usize,
    lu: Vec<Complex64>,
    perm: Vec<usize>,
}

impl Lu {
    pub fn factor(a: &ComplexMatrix) -> Result<Self> {
        if a.rows != a.cols {
            return Err(Error::Dimension {
                expected: a.rows,
                actual: a.cols,
            });
        }
        let n = a.rows;
        let mut lu = a.data.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        for k in 0..n {
            let (p, pmax) = (k..n)
                .map(|r| (r, lu[r * n + k].norm()))
                .fold((k, -1.0), |acc, x| if x.1 > acc.1 { x } else { acc });
            if pmax == 0.0 {
                return Err(Error::Degenerate("singular matrix"));
            }
            if p != k {
                for c in 0..n {
                    lu.swap(k * n + c, p * n + c);
                }
                perm.swap(k, p);
            }
            let pivot = lu[k * n + k];
            for r in k + 1..n {
                let f = lu[r * n + k] / pivot;
                lu[r * n + k] = f;
                for c in k + 1..n {
                    let t = lu[k * n + c];
                    lu[r * n + c] -= f * t;
                }
            }
        }
        Ok(Self { n, lu, perm })
    }

    pub fn solve(&self, b: &ComplexVector) -> Result<ComplexVector> {
        check_len(self.n, b.len())?;
        let n = self.n;
        let mut x: Vec<Complex64> = self.perm.iter().map(|&p| b[p]).collect();
        for r in 0..n {
            for c in 0..r {
                let t = x[c];
                x[r] -= self.lu[r * n + c] * t;
            }
        }
        for r in (0..n).rev() {
            for c in r + 1..n {
                let t = x[c];
                x[r] -= self.lu[r * n + c] * t;
            }
            x[r] /= self.lu[r * n + r];
        }
        Ok(ComplexVector(x))
    }

    /// 1-norm condition number `‖A‖₁‖A⁻¹‖₁` of the factored matrix `a`,
    /// computed column by column (fine for the antenna counts in play).
    pub fn condition_1(&self, a: &ComplexMatrix) -> Result<f64> {
        let mut inv_norm: f64 = 0.0;
        for k in 0..self.n {
            let col = self.solve(&ComplexVector::basis(self.n, k))?;
            let s: f64 = col.iter().map(|z| z.norm()).sum();
            if !s.is_finite() {
                return Ok(f64::INFINITY);
            }
            inv_norm = inv_norm.max(s);
        }
        Ok(a.norm_1() * inv_norm)
    }
}
