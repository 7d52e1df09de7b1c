//! Exponentially weighted recursive least squares for FRESH coefficients.
//!
//! [`RlsState`] is the textbook per-sample recursion. [`BlockRls`] keeps the
//! same cost function in information form (weighted correlation sums) and
//! solves for the coefficients only at block boundaries, which is what a
//! receiver that adapts once per code word needs. At every block boundary
//! both produce the same coefficients.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex64;
#[allow(unused_imports)] // needed for float methods without std
use num_traits::Float;

use crate::design::{solve_fresh_system, FilterShape, FreshFilterSpec};
use crate::linalg::HermitianMatrix;
use crate::signal::unit_phasor;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RlsConfig {
    /// Per-sample forgetting factor in `(0, 1]`. The memory `1 / (1 - lambda)`
    /// should be many times the coefficient count.
    pub lambda: f64,
    /// Initial inverse-correlation matrix is `p0_scale * I`.
    pub p0_scale: f64,
}

impl Default for RlsConfig {
    fn default() -> Self {
        Self { lambda: 0.99999, p0_scale: 1e2 }
    }
}

impl RlsConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda > 0.0 && self.lambda <= 1.0) {
            return Err(Error::Config(format!("forgetting factor {} outside (0, 1]", self.lambda)));
        }
        if !(self.p0_scale > 0.0 && self.p0_scale.is_finite()) {
            return Err(Error::Config("initial P scale must be positive".into()));
        }
        Ok(())
    }
}

/// Regressor `z[n]` of a FRESH filter on the real input `x`, with zero
/// samples before the record: `z[p L + q] = x[n - q] e^{-j 2 pi alpha_p (n - q)}`.
pub fn fresh_regressor(freqs: &[f64], fir_len: usize, x: &[f64], n: usize) -> Vec<Complex64> {
    let mut z = vec![Complex64::default(); freqs.len() * fir_len];
    for (p, &alpha) in freqs.iter().enumerate() {
        for q in 0..fir_len.min(n + 1) {
            let m = n - q;
            z[p * fir_len + q] = x[m] * unit_phasor(alpha * m as f64);
        }
    }
    z
}

/// Per-sample exponentially weighted RLS state.
#[derive(Debug, Clone)]
pub struct RlsState {
    h: Vec<Complex64>,
    /// Row-major `dim x dim`.
    p: Vec<Complex64>,
    lambda: f64,
    steps: u64,
}

impl RlsState {
    /// Starts from the pass-through filter: a single unit coefficient at lag
    /// 0 of branch `zero_branch`.
    pub fn new(branches: usize, fir_len: usize, zero_branch: usize, cfg: RlsConfig) -> Result<Self> {
        cfg.validate()?;
        if branches == 0 || fir_len == 0 || zero_branch >= branches {
            return Err(Error::Config("invalid RLS geometry".into()));
        }
        let dim = branches * fir_len;
        let mut h = vec![Complex64::default(); dim];
        h[zero_branch * fir_len] = Complex64::new(1.0, 0.0);
        let mut p = vec![Complex64::default(); dim * dim];
        for i in 0..dim {
            p[i * dim + i] = Complex64::new(cfg.p0_scale, 0.0);
        }
        Ok(Self { h, p, lambda: cfg.lambda, steps: 0 })
    }

    pub fn dim(&self) -> usize {
        self.h.len()
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.h
    }

    pub fn p(&self, i: usize, j: usize) -> Complex64 {
        self.p[i * self.dim() + j]
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    /// One update with regressor `z` and reference `d`. Returns the a-priori
    /// output `h^H z`.
    pub fn step(&mut self, z: &[Complex64], d: Complex64) -> Result<Complex64> {
        let dim = self.dim();
        if z.len() != dim {
            return Err(Error::Shape(format!("regressor has {} entries, filter has {dim}", z.len())));
        }
        if !(d.re.is_finite() && d.im.is_finite()) || z.iter().any(|v| !(v.re.is_finite() && v.im.is_finite())) {
            return Err(Error::Numeric(format!("non-finite input at step {}", self.steps)));
        }
        let y: Complex64 = self.h.iter().zip(z).map(|(h, z)| h.conj() * z).sum();
        let xi = d - y;
        let pi: Vec<Complex64> = (0..dim)
            .map(|i| self.p[i * dim..(i + 1) * dim].iter().zip(z).map(|(a, b)| a * b).sum())
            .collect();
        let denom = self.lambda + z.iter().zip(&pi).map(|(a, b)| (a.conj() * b).re).sum::<f64>();
        let k: Vec<Complex64> = pi.iter().map(|v| v / denom).collect();
        for (h, kv) in self.h.iter_mut().zip(&k) {
            *h += kv * xi.conj();
        }
        let inv_l = 1.0 / self.lambda;
        for i in 0..dim {
            for j in 0..dim {
                let v = (self.p[i * dim + j] - k[i] * pi[j].conj()) * inv_l;
                self.p[i * dim + j] = v;
            }
        }
        for i in 0..dim {
            self.p[i * dim + i].im = 0.0;
            for j in i + 1..dim {
                let avg = (self.p[i * dim + j] + self.p[j * dim + i].conj()) * 0.5;
                self.p[i * dim + j] = avg;
                self.p[j * dim + i] = avg.conj();
            }
        }
        self.steps += 1;
        Ok(y)
    }
}

pub fn rls_init(branches: usize, fir_len: usize, zero_branch: usize, cfg: RlsConfig) -> Result<RlsState> {
    RlsState::new(branches, fir_len, zero_branch, cfg)
}

pub fn rls_step(state: &mut RlsState, z: &[Complex64], d: Complex64) -> Result<Complex64> {
    state.step(z, d)
}

/// RLS in information form for a FRESH filter on a real input. Holds
/// `Phi = sum lambda^{N-1-n} z[n] z^H[n]` and `theta = sum lambda^{N-1-n} z[n] d[n]`
/// and solves `(Phi + lambda^N / p0 I) h = theta + lambda^N / p0 h0`.
#[derive(Debug, Clone)]
pub struct BlockRls {
    freqs: Vec<f64>,
    fir_len: usize,
    delay: usize,
    cfg: RlsConfig,
    h0: Vec<Complex64>,
    phi: HermitianMatrix,
    theta: Vec<Complex64>,
    samples: u64,
    coeffs: Vec<Complex64>,
}

impl BlockRls {
    /// Starts from the pass-through filter.
    pub fn new(shape: &FilterShape, cfg: RlsConfig) -> Result<Self> {
        Self::with_initial(FreshFilterSpec::selector(shape.freqs.clone(), shape.fir_len, shape.delay)?, cfg)
    }

    pub fn with_initial(spec: FreshFilterSpec, cfg: RlsConfig) -> Result<Self> {
        cfg.validate()?;
        let dim = spec.dim();
        Ok(Self {
            freqs: spec.freqs,
            fir_len: spec.fir_len,
            delay: spec.delay,
            cfg,
            h0: spec.coeffs.clone(),
            phi: HermitianMatrix::zeros(dim),
            theta: vec![Complex64::default(); dim],
            samples: 0,
            coeffs: spec.coeffs,
        })
    }

    pub fn dim(&self) -> usize {
        self.theta.len()
    }

    pub fn delay(&self) -> usize {
        self.delay
    }

    pub fn samples(&self) -> u64 {
        self.samples
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn filter(&self) -> FreshFilterSpec {
        FreshFilterSpec {
            freqs: self.freqs.clone(),
            fir_len: self.fir_len,
            coeffs: self.coeffs.clone(),
            delay: self.delay,
        }
    }

    /// Adds samples `start..end` of input `x` (zero before index 0) with
    /// references `reference[n - start]`.
    pub fn accumulate(&mut self, x: &[f64], reference: &[f64], start: usize, end: usize) -> Result<()> {
        if end <= start {
            return Ok(());
        }
        if end > x.len() || reference.len() != end - start {
            return Err(Error::Shape("block exceeds the input or reference length".into()));
        }
        if x[start..end].iter().chain(reference).any(|v| !v.is_finite()) {
            return Err(Error::Numeric(format!("non-finite input in block starting at {start}")));
        }
        let l = self.fir_len;
        let k = self.freqs.len();
        let lambda = self.cfg.lambda;
        let b = end - start;
        let decay = lambda.powi(b as i32);
        // u[p][m - base] for m in base..end, zero before the record.
        let base = start as i64 - (l as i64 - 1);
        let u: Vec<Vec<Complex64>> = self
            .freqs
            .iter()
            .map(|&alpha| {
                (base..end as i64)
                    .map(|m| if m < 0 { Complex64::default() } else { x[m as usize] * unit_phasor(alpha * m as f64) })
                    .collect()
            })
            .collect();
        let at = |p: usize, m: i64| u[p][(m - base) as usize];
        let mut w = vec![0.0; b];
        let mut acc = 1.0;
        for wn in w.iter_mut().rev() {
            *wn = acc;
            acc *= lambda;
        }

        for p in 0..k {
            for q in 0..l {
                let mut s = Complex64::default();
                for (i, (&wn, &dn)) in w.iter().zip(reference).enumerate() {
                    s += at(p, (start + i) as i64 - q as i64) * (wn * dn);
                }
                let idx = p * l + q;
                self.theta[idx] = self.theta[idx] * decay + s;
            }
        }

        let s_i = start as i64;
        let e_i = end as i64;
        let inv_l = 1.0 / lambda;
        let mut g = vec![Complex64::default(); l * l];
        for p in 0..k {
            let uw: Vec<Complex64> = (0..b).map(|i| at(p, s_i + i as i64) * w[i]).collect();
            for pp in p..k {
                // First row and first column directly.
                for qq in 0..l {
                    let mut s = Complex64::default();
                    for (i, v) in uw.iter().enumerate() {
                        s += v * at(pp, s_i + i as i64 - qq as i64).conj();
                    }
                    g[qq] = s;
                }
                for q in 1..l {
                    let mut s = Complex64::default();
                    for i in 0..b {
                        s += at(p, s_i + i as i64 - q as i64) * w[i] * at(pp, s_i + i as i64).conj();
                    }
                    g[q * l] = s;
                }
                // Shifting both lags by one moves the window back a sample.
                for q in 0..l - 1 {
                    for qq in 0..l - 1 {
                        let head = at(p, s_i - 1 - q as i64) * at(pp, s_i - 1 - qq as i64).conj();
                        let tail = at(p, e_i - 1 - q as i64) * at(pp, e_i - 1 - qq as i64).conj();
                        g[(q + 1) * l + qq + 1] = (g[q * l + qq] + head * decay - tail) * inv_l;
                    }
                }
                for q in 0..l {
                    for qq in 0..l {
                        let (i, j) = (p * l + q, pp * l + qq);
                        if p == pp && qq < q {
                            continue;
                        }
                        let v = self.phi.get(i, j) * decay + g[q * l + qq];
                        let v = if i == j { Complex64::new(v.re, 0.0) } else { v };
                        self.phi.set(i, j, v);
                        self.phi.set(j, i, v.conj());
                    }
                }
            }
        }
        self.samples += b as u64;
        Ok(())
    }

    /// Recomputes the coefficients from the accumulated sums.
    pub fn solve(&mut self) -> Result<()> {
        if self.samples == 0 {
            self.coeffs = self.h0.clone();
            return Ok(());
        }
        let reg = self.cfg.lambda.powf(self.samples as f64) / self.cfg.p0_scale;
        let mut a = self.phi.clone();
        for i in 0..self.dim() {
            let v = a.get(i, i);
            a.set(i, i, v + reg);
        }
        let rhs: Vec<Complex64> = self.theta.iter().zip(&self.h0).map(|(t, h)| t + h * reg).collect();
        self.coeffs = solve_fresh_system(&a, &rhs, &self.freqs, self.fir_len)?.coeffs;
        Ok(())
    }

    pub fn update(&mut self, x: &[f64], reference: &[f64], start: usize, end: usize) -> Result<()> {
        self.accumulate(x, reference, start, end)?;
        self.solve()
    }
}
