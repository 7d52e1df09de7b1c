//! Conditional gain of a two-stage receiver. With total delay `D` the
//! output satisfies `E{y[n + D] | d[n]} = psi[n] d[n]`.
//!
//! For a Gaussian desired signal `E{d[n-s] | d[n]} = kappa[n, s] d[n]` with
//! `kappa[n, s] = c_dd(n, -s) / c_dd(n, 0)` for lags `s` of either sign.
//! Pushing this through both filter stages gives
//! `psi[n] = sum_k sum_i conj(h2_k[i]) e^{-j2pi beta_k (n+D-i)}
//!           sum_m sum_l a_m[l] kappa[n, i+l-D] e^{-j2pi alpha_m (n+D-i-l)}`
//! where `a_m[l] = [m = 0-branch, l = D1] - conj(h1_m[l])`.

use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex64;

use crate::design::TwoStageReceiver;
use crate::ofdm::OfdmConfig;
use crate::signal::{unit_phasor, PeriodicAutocorrelation};
use crate::{Error, Result};

/// `kappa[n, s]` for `n` in one period of `c_dd` and `|s| <= max_lag`,
/// stored sparsely as the lags where it is nonzero anywhere in the period.
#[derive(Debug, Clone)]
pub struct ConditionalKernel {
    period: usize,
    lags: Vec<i64>,
    /// `values[n * lags.len() + idx]`.
    values: Vec<f64>,
}

impl ConditionalKernel {
    pub fn from_autocorr(c_dd: &PeriodicAutocorrelation, max_lag: usize) -> Result<Self> {
        let p = c_dd.period();
        let m = max_lag as i64;
        let mut lags = Vec::new();
        for s in -m..=m {
            let mut any = false;
            for n in 0..p {
                if c_dd.get(n as i64, -s)?.norm() > 1e-14 {
                    any = true;
                    break;
                }
            }
            if any {
                lags.push(s);
            }
        }
        let mut values = vec![0.0; p * lags.len()];
        for n in 0..p {
            let power = c_dd.get(n as i64, 0)?.re;
            if power <= 0.0 {
                return Err(Error::Numeric("desired signal has zero instantaneous power".into()));
            }
            for (idx, &s) in lags.iter().enumerate() {
                values[n * lags.len() + idx] = c_dd.get(n as i64, -s)?.re / power;
            }
        }
        Ok(Self { period: p, lags, values })
    }

    pub fn lags(&self) -> &[i64] {
        &self.lags
    }

    pub fn get(&self, n: usize, lag_index: usize) -> f64 {
        self.values[(n % self.period) * self.lags.len() + lag_index]
    }

    pub fn value(&self, n: usize, lag: i64) -> f64 {
        match self.lags.iter().position(|&s| s == lag) {
            Some(idx) => self.get(n, idx),
            None => 0.0,
        }
    }
}

/// Prefix form of the kernel for white-within-symbol OFDM:
/// `kappa[n, s] = [s = 0] + [n in prefix source] [s = N_data] cos(2 pi f_c N_data)
///               + [n in prefix] [s = -N_data] cos(2 pi f_c N_data)`.
pub fn prefix_kernel(cfg: &OfdmConfig, n: usize, lag: i64) -> f64 {
    let nd = cfg.n_data as i64;
    let mut v = if lag == 0 { 1.0 } else { 0.0 };
    if lag == nd && cfg.in_prefix_source(n as i64) {
        v += cfg.prefix_sign();
    }
    if lag == -nd && cfg.in_prefix_source(n as i64 + nd) {
        v += cfg.prefix_sign();
    }
    v
}

/// `psi[n]` for `n` in `0..period`.
pub fn scaling_profile(
    rx: &TwoStageReceiver,
    c_dd: &PeriodicAutocorrelation,
    period: usize,
) -> Result<Vec<Complex64>> {
    let h1 = &rx.h1;
    let h2 = &rx.h2;
    let zero = h1
        .zero_branch()
        .ok_or_else(|| Error::Config("noise estimator must include the zero cyclic frequency".into()))?;
    let delay = rx.delay() as i64;
    let span = (h1.fir_len + h2.fir_len - 2) as i64;
    let kernel = ConditionalKernel::from_autocorr(c_dd, delay.max(span - delay) as usize)?;
    let mut a: Vec<Vec<Complex64>> = (0..h1.branches())
        .map(|m| (0..h1.fir_len).map(|l| -h1.coeff(m, l).conj()).collect())
        .collect();
    a[zero][h1.delay] += Complex64::new(1.0, 0.0);
    let mut out = vec![Complex64::default(); period];
    for (n, slot) in out.iter_mut().enumerate() {
        let mut acc = Complex64::default();
        for (sdx, &s) in kernel.lags().iter().enumerate() {
            let kap = kernel.get(n, sdx);
            let j = s + delay;
            if kap == 0.0 || j < 0 || j > span {
                continue;
            }
            let j = j as usize;
            // alpha_m phase depends only on n - s.
            let inner: Vec<Complex64> =
                (0..h1.branches()).map(|m| unit_phasor(h1.freqs[m] * (n as i64 - s) as f64)).collect();
            for (k, &beta) in h2.freqs.iter().enumerate() {
                for i in 0..h2.fir_len.min(j + 1) {
                    let l = j - i;
                    if l >= h1.fir_len {
                        continue;
                    }
                    let h = h2.coeff(k, i).conj();
                    if h == Complex64::default() {
                        continue;
                    }
                    let mut sum = Complex64::default();
                    for m in 0..h1.branches() {
                        sum += a[m][l] * inner[m];
                    }
                    acc += h * unit_phasor(beta * (n as i64 + delay - i as i64) as f64) * sum * kap;
                }
            }
        }
        *slot = acc;
    }
    Ok(out)
}
