//! Dense positive-definite solvers used by the filter design.
//!
//! Both solvers run a row-blocked Cholesky factorization. Complex matrices are
//! stored as split real and imaginary planes so the inner products vectorize.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex64;
#[allow(unused_imports)] // needed for float methods without std
use num_traits::Float;

use crate::{Error, Result};

/// Above this condition estimate the default policy applies diagonal loading.
pub const DEFAULT_CONDITION_LIMIT: f64 = 1e12;
/// Default loading, relative to the mean diagonal entry.
pub const DEFAULT_RELATIVE_LOADING: f64 = 1e-10;

const BLOCK: usize = 48;
const HERMITIAN_TOLERANCE: f64 = 1e-9;

/// Dense square complex matrix intended to be Hermitian, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct HermitianMatrix {
    dim: usize,
    re: Vec<f64>,
    im: Vec<f64>,
}

impl HermitianMatrix {
    pub fn zeros(dim: usize) -> Self {
        Self { dim, re: vec![0.0; dim * dim], im: vec![0.0; dim * dim] }
    }

    pub fn from_fn<F: FnMut(usize, usize) -> Complex64>(dim: usize, mut f: F) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            for j in 0..dim {
                m.set(i, j, f(i, j));
            }
        }
        m
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        let k = i * self.dim + j;
        Complex64::new(self.re[k], self.im[k])
    }

    pub fn set(&mut self, i: usize, j: usize, v: Complex64) {
        let k = i * self.dim + j;
        self.re[k] = v.re;
        self.im[k] = v.im;
    }

    pub fn mul_vec(&self, x: &[Complex64]) -> Vec<Complex64> {
        (0..self.dim)
            .map(|i| (0..self.dim).map(|j| self.get(i, j) * x[j]).sum())
            .collect()
    }

    /// Largest absolute row sum.
    pub fn norm_inf(&self) -> f64 {
        (0..self.dim)
            .map(|i| (0..self.dim).map(|j| self.get(i, j).norm()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    fn check_hermitian(&self) -> Result<()> {
        let scale = self
            .re
            .iter()
            .zip(&self.im)
            .map(|(r, i)| r.abs().max(i.abs()))
            .fold(0.0, f64::max)
            .max(f64::MIN_POSITIVE);
        for i in 0..self.dim {
            for j in i..self.dim {
                let d = self.get(i, j) - self.get(j, i).conj();
                if d.norm() > HERMITIAN_TOLERANCE * scale {
                    return Err(Error::Shape(format!(
                        "matrix is not Hermitian at ({i}, {j}): mismatch {:.3e}",
                        d.norm()
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Dense square real matrix intended to be symmetric, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SymmetricMatrix {
    dim: usize,
    data: Vec<f64>,
}

impl SymmetricMatrix {
    pub fn zeros(dim: usize) -> Self {
        Self { dim, data: vec![0.0; dim * dim] }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.dim + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.dim + j] = v;
    }

    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.dim + j] += v;
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn scale(&mut self, factor: f64) {
        self.data.iter_mut().for_each(|v| *v *= factor);
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.dim).map(|i| dot_real(self.row(i), x)).collect()
    }

    pub fn norm_inf(&self) -> f64 {
        (0..self.dim)
            .map(|i| self.row(i).iter().map(|v| v.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    fn check_symmetric(&self) -> Result<()> {
        let scale = self.data.iter().map(|v| v.abs()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
        for i in 0..self.dim {
            for j in i + 1..self.dim {
                if (self.get(i, j) - self.get(j, i)).abs() > HERMITIAN_TOLERANCE * scale {
                    return Err(Error::Shape(format!("matrix is not symmetric at ({i}, {j})")));
                }
            }
        }
        Ok(())
    }
}

/// Loading policy shared by both solvers. `None` selects the default: no
/// loading unless the condition estimate exceeds [`DEFAULT_CONDITION_LIMIT`]
/// or the factorization breaks down, in which case
/// `DEFAULT_RELATIVE_LOADING * trace / dim` is added to the diagonal.
trait Factorable {
    type Factor;
    fn dim(&self) -> usize;
    fn trace(&self) -> f64;
    fn factor(&self, loading: f64) -> core::result::Result<Self::Factor, f64>;
    fn condition_estimate(factor: &Self::Factor) -> f64;
}

fn factor_with_policy<M: Factorable>(a: &M, loading: Option<f64>) -> Result<M::Factor> {
    if let Some(delta) = loading {
        if !(delta >= 0.0) || !delta.is_finite() {
            return Err(Error::Config(format!("diagonal loading must be finite and non-negative, got {delta}")));
        }
        return a.factor(delta).map_err(|condition| Error::Singular { condition });
    }
    let fallback = DEFAULT_RELATIVE_LOADING * a.trace() / a.dim().max(1) as f64;
    match a.factor(0.0) {
        Ok(f) if M::condition_estimate(&f) <= DEFAULT_CONDITION_LIMIT => Ok(f),
        _ => a.factor(fallback).map_err(|condition| Error::Singular { condition }),
    }
}

/// Solves `A x = b` for Hermitian positive (semi)definite `A`.
pub fn hermitian_solve(a: &HermitianMatrix, b: &[Complex64], loading: Option<f64>) -> Result<Vec<Complex64>> {
    if b.len() != a.dim {
        return Err(Error::Shape(format!("matrix is {0}x{0} but right-hand side has {1} entries", a.dim, b.len())));
    }
    a.check_hermitian()?;
    let f = factor_with_policy(a, loading)?;
    Ok(f.solve(b))
}

/// Solves `A x = b` for real symmetric positive (semi)definite `A`.
pub fn symmetric_solve(a: &SymmetricMatrix, b: &[f64], loading: Option<f64>) -> Result<Vec<f64>> {
    if b.len() != a.dim {
        return Err(Error::Shape(format!("matrix is {0}x{0} but right-hand side has {1} entries", a.dim, b.len())));
    }
    a.check_symmetric()?;
    let f = factor_with_policy(a, loading)?;
    Ok(f.solve(b))
}

/// Lower Cholesky factor of a Hermitian matrix, split planes.
pub struct ComplexCholesky {
    dim: usize,
    re: Vec<f64>,
    im: Vec<f64>,
}

/// Lower Cholesky factor of a symmetric matrix.
pub struct RealCholesky {
    dim: usize,
    data: Vec<f64>,
}

fn breakdown_condition(max_pivot: f64, pivot: f64) -> f64 {
    if pivot <= 0.0 {
        f64::INFINITY
    } else {
        max_pivot / pivot
    }
}

impl Factorable for HermitianMatrix {
    type Factor = ComplexCholesky;

    fn dim(&self) -> usize {
        self.dim
    }

    fn trace(&self) -> f64 {
        (0..self.dim).map(|i| self.re[i * self.dim + i]).sum()
    }

    fn factor(&self, loading: f64) -> core::result::Result<ComplexCholesky, f64> {
        let n = self.dim;
        let mut lr = vec![0.0; n * n];
        let mut li = vec![0.0; n * n];
        let max_diag = (0..n).map(|i| self.re[i * n + i]).fold(0.0, f64::max);
        let floor = max_diag * 1e-15;
        for i0 in (0..n).step_by(BLOCK) {
            let i1 = (i0 + BLOCK).min(n);
            for j in 0..i1 {
                for i in i0.max(j)..i1 {
                    let (s_re, s_im) = dot_conj(&lr[i * n..i * n + j], &li[i * n..i * n + j], &lr[j * n..j * n + j], &li[j * n..j * n + j]);
                    let k = i * n + j;
                    if i == j {
                        let pivot = self.re[k] + loading - s_re;
                        if !(pivot > floor) {
                            return Err(breakdown_condition(max_diag + loading, pivot));
                        }
                        lr[k] = pivot.sqrt();
                    } else {
                        let d = lr[j * n + j];
                        lr[k] = (self.re[k] - s_re) / d;
                        li[k] = (self.im[k] - s_im) / d;
                    }
                }
            }
        }
        Ok(ComplexCholesky { dim: n, re: lr, im: li })
    }

    fn condition_estimate(f: &ComplexCholesky) -> f64 {
        diag_condition((0..f.dim).map(|i| f.re[i * f.dim + i]))
    }
}

impl Factorable for SymmetricMatrix {
    type Factor = RealCholesky;

    fn dim(&self) -> usize {
        self.dim
    }

    fn trace(&self) -> f64 {
        (0..self.dim).map(|i| self.data[i * self.dim + i]).sum()
    }

    fn factor(&self, loading: f64) -> core::result::Result<RealCholesky, f64> {
        let n = self.dim;
        let mut l = vec![0.0; n * n];
        let max_diag = (0..n).map(|i| self.data[i * n + i]).fold(0.0, f64::max);
        let floor = max_diag * 1e-15;
        for i0 in (0..n).step_by(BLOCK) {
            let i1 = (i0 + BLOCK).min(n);
            for j in 0..i1 {
                for i in i0.max(j)..i1 {
                    let s = dot_real(&l[i * n..i * n + j], &l[j * n..j * n + j]);
                    let k = i * n + j;
                    if i == j {
                        let pivot = self.data[k] + loading - s;
                        if !(pivot > floor) {
                            return Err(breakdown_condition(max_diag + loading, pivot));
                        }
                        l[k] = pivot.sqrt();
                    } else {
                        l[k] = (self.data[k] - s) / l[j * n + j];
                    }
                }
            }
        }
        Ok(RealCholesky { dim: n, data: l })
    }

    fn condition_estimate(f: &RealCholesky) -> f64 {
        diag_condition((0..f.dim).map(|i| f.data[i * f.dim + i]))
    }
}

/// `(max L_ii / min L_ii)^2`, a lower bound on the 2-norm condition number.
fn diag_condition<I: Iterator<Item = f64>>(diag: I) -> f64 {
    let (lo, hi) = diag.fold((f64::INFINITY, 0.0f64), |(lo, hi), d| (lo.min(d), hi.max(d)));
    if lo <= 0.0 {
        f64::INFINITY
    } else {
        (hi / lo) * (hi / lo)
    }
}

impl ComplexCholesky {
    pub fn solve(&self, b: &[Complex64]) -> Vec<Complex64> {
        let n = self.dim;
        let mut y = b.to_vec();
        for i in 0..n {
            let mut acc = y[i];
            for k in 0..i {
                acc -= Complex64::new(self.re[i * n + k], self.im[i * n + k]) * y[k];
            }
            y[i] = acc / self.re[i * n + i];
        }
        for i in (0..n).rev() {
            let mut acc = y[i];
            for k in i + 1..n {
                acc -= Complex64::new(self.re[k * n + i], -self.im[k * n + i]) * y[k];
            }
            y[i] = acc / self.re[i * n + i];
        }
        y
    }
}

impl RealCholesky {
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.dim;
        let mut y = b.to_vec();
        for i in 0..n {
            let acc = y[i] - dot_real(&self.data[i * n..i * n + i], &y[..i]);
            y[i] = acc / self.data[i * n + i];
        }
        for i in (0..n).rev() {
            let mut acc = y[i];
            for k in i + 1..n {
                acc -= self.data[k * n + i] * y[k];
            }
            y[i] = acc / self.data[i * n + i];
        }
        y
    }
}

fn dot_real(x: &[f64], y: &[f64]) -> f64 {
    let mut acc = [0.0; 4];
    let chunks = x.len() / 4;
    for c in 0..chunks {
        for t in 0..4 {
            acc[t] += x[4 * c + t] * y[4 * c + t];
        }
    }
    let mut s = (acc[0] + acc[1]) + (acc[2] + acc[3]);
    for k in 4 * chunks..x.len() {
        s += x[k] * y[k];
    }
    s
}

/// `sum_k x_k conj(y_k)` on split planes.
fn dot_conj(xr: &[f64], xi: &[f64], yr: &[f64], yi: &[f64]) -> (f64, f64) {
    let mut a = [0.0; 4];
    let mut b = [0.0; 4];
    let chunks = xr.len() / 4;
    for c in 0..chunks {
        for t in 0..4 {
            let k = 4 * c + t;
            a[t] += xr[k] * yr[k] + xi[k] * yi[k];
            b[t] += xi[k] * yr[k] - xr[k] * yi[k];
        }
    }
    let mut sa = (a[0] + a[1]) + (a[2] + a[3]);
    let mut sb = (b[0] + b[1]) + (b[2] + b[3]);
    for k in 4 * chunks..xr.len() {
        sa += xr[k] * yr[k] + xi[k] * yi[k];
        sb += xi[k] * yr[k] - xr[k] * yi[k];
    }
    (sa, sb)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::SeededRng;
    use proptest::prelude::*;

    /// Gaussian elimination with partial pivoting on a general complex system.
    fn gauss_solve(a: &[Vec<Complex64>], b: &[Complex64]) -> Vec<Complex64> {
        let n = b.len();
        let mut m: Vec<Vec<Complex64>> = a.iter().cloned().collect();
        let mut r = b.to_vec();
        for col in 0..n {
            let p = (col..n).max_by(|&x, &y| m[x][col].norm().total_cmp(&m[y][col].norm())).unwrap();
            m.swap(col, p);
            r.swap(col, p);
            for row in col + 1..n {
                let f = m[row][col] / m[col][col];
                for k in col..n {
                    let v = m[col][k];
                    m[row][k] -= f * v;
                }
                let v = r[col];
                r[row] -= f * v;
            }
        }
        let mut x = vec![Complex64::default(); n];
        for i in (0..n).rev() {
            let mut acc = r[i];
            for k in i + 1..n {
                acc -= m[i][k] * x[k];
            }
            x[i] = acc / m[i][i];
        }
        x
    }

    fn random_hpd(rng: &mut SeededRng, n: usize) -> Vec<Vec<Complex64>> {
        let g: Vec<Vec<Complex64>> = (0..n)
            .map(|_| (0..n).map(|_| Complex64::new(rng.gaussian(), rng.gaussian())).collect())
            .collect();
        (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| {
                        let mut s: Complex64 = (0..n).map(|k| g[i][k] * g[j][k].conj()).sum();
                        if i == j {
                            s += n as f64 * 0.1;
                        }
                        s
                    })
                    .collect()
            })
            .collect()
    }

    #[test]
    fn identity_returns_rhs() {
        let a = HermitianMatrix::from_fn(3, |i, j| if i == j { Complex64::new(1.0, 0.0) } else { Complex64::default() });
        let b = [Complex64::new(1.0, 2.0), Complex64::new(-3.0, 0.5), Complex64::new(0.0, -1.0)];
        let x = hermitian_solve(&a, &b, Some(0.0)).unwrap();
        for (u, v) in x.iter().zip(&b) {
            assert!((u - v).norm() < 1e-15);
        }
    }

    #[test]
    fn matches_gaussian_elimination() {
        let mut rng = SeededRng::new(11, 0);
        for n in [1, 2, 5, 47, 48, 49, 101] {
            let a = random_hpd(&mut rng, n);
            let b: Vec<Complex64> = (0..n).map(|_| Complex64::new(rng.gaussian(), rng.gaussian())).collect();
            let m = HermitianMatrix::from_fn(n, |i, j| a[i][j]);
            let x = hermitian_solve(&m, &b, None).unwrap();
            let oracle = gauss_solve(&a, &b);
            let scale = oracle.iter().map(|v| v.norm()).fold(0.0, f64::max);
            for (u, v) in x.iter().zip(&oracle) {
                assert!((u - v).norm() <= 1e-9 * scale, "n={n}");
            }
        }
    }

    #[test]
    fn rejects_non_hermitian() {
        let mut m = HermitianMatrix::from_fn(2, |i, j| if i == j { Complex64::new(2.0, 0.0) } else { Complex64::default() });
        m.set(0, 1, Complex64::new(0.5, 0.5));
        m.set(1, 0, Complex64::new(0.5, 0.5));
        let err = hermitian_solve(&m, &[Complex64::default(); 2], None).unwrap_err();
        assert!(matches!(err, Error::Shape(_)));
    }

    #[test]
    fn singular_without_loading_reports_condition() {
        let one = Complex64::new(1.0, 0.0);
        let m = HermitianMatrix::from_fn(2, |_, _| one);
        let err = hermitian_solve(&m, &[one, one], Some(0.0)).unwrap_err();
        match err {
            Error::Singular { condition } => assert!(condition > 1e12),
            other => panic!("unexpected {other:?}"),
        }
        // The default policy loads the diagonal and succeeds.
        let x = hermitian_solve(&m, &[one, one], None).unwrap();
        assert!((x[0] + x[1] - one).norm() < 1e-6);
    }

    #[test]
    fn rhs_length_mismatch_is_shape_error() {
        let m = HermitianMatrix::zeros(3);
        assert!(matches!(hermitian_solve(&m, &[Complex64::default(); 2], None), Err(Error::Shape(_))));
        let s = SymmetricMatrix::zeros(3);
        assert!(matches!(symmetric_solve(&s, &[0.0; 4], None), Err(Error::Shape(_))));
    }

    #[test]
    fn symmetric_solver_agrees_with_complex_solver() {
        let mut rng = SeededRng::new(5, 3);
        let n = 60;
        let g: Vec<f64> = rng.gaussian_vec(n * n);
        let mut s = SymmetricMatrix::zeros(n);
        for i in 0..n {
            for j in 0..n {
                let v: f64 = (0..n).map(|k| g[i * n + k] * g[j * n + k]).sum::<f64>() + if i == j { 1.0 } else { 0.0 };
                s.set(i, j, v);
            }
        }
        let b = rng.gaussian_vec(n);
        let x = symmetric_solve(&s, &b, None).unwrap();
        let h = HermitianMatrix::from_fn(n, |i, j| Complex64::new(s.get(i, j), 0.0));
        let bc: Vec<Complex64> = b.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        let xc = hermitian_solve(&h, &bc, None).unwrap();
        for (u, v) in x.iter().zip(&xc) {
            assert!((u - v.re).abs() < 1e-9 * (1.0 + u.abs()));
        }
    }

    proptest! {
        #[test]
        fn residual_is_small(seed in 0u64..1000, n in 1usize..24) {
            let mut rng = SeededRng::new(seed, 9);
            let a = random_hpd(&mut rng, n);
            let b: Vec<Complex64> = (0..n).map(|_| Complex64::new(rng.gaussian(), rng.gaussian())).collect();
            let m = HermitianMatrix::from_fn(n, |i, j| a[i][j]);
            let x = hermitian_solve(&m, &b, None).unwrap();
            let ax = m.mul_vec(&x);
            let res = ax.iter().zip(&b).map(|(u, v)| (u - v).norm_sqr()).sum::<f64>().sqrt();
            let xn = x.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
            let bn = b.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
            prop_assert!(res <= 1e-8 * (m.norm_inf() * xn + bn));
        }
    }
}
