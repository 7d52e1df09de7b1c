//! Cyclic autocorrelation components `C^nu(tau) = <c(n, tau) e^{-j 2 pi nu n}>`.
//!
//! Every time-averaged second-order quantity in the filter design reduces to
//! these components evaluated at sums and differences of cyclic frequencies.

use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex64;
#[allow(unused_imports)] // needed for float methods without std
use num_traits::Float;

use crate::signal::{unit_phasor, PeriodicAutocorrelation};
use crate::Result;

const FREQ_TOL: f64 = 1e-12;

/// How time averages are taken.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Averaging {
    /// Long-run average. For cyclic frequencies commensurate with the
    /// period this equals the average over one common period; components at
    /// any other frequency vanish.
    #[default]
    LongRun,
    /// Average over samples `0..samples` of an observation record.
    Window { samples: usize },
}

/// Cached cyclic components of one periodic autocorrelation over lags
/// `-max_lag..=max_lag`.
#[derive(Debug, Clone)]
pub struct CyclicSpectrum {
    acf: PeriodicAutocorrelation,
    averaging: Averaging,
    max_lag: usize,
    cache: Vec<(f64, Option<Vec<Complex64>>)>,
}

fn wrap_freq(nu: f64) -> f64 {
    let w = nu - nu.round();
    if (w.abs() - 0.5).abs() < FREQ_TOL {
        0.5
    } else {
        w
    }
}

impl CyclicSpectrum {
    pub fn new(acf: PeriodicAutocorrelation, averaging: Averaging, max_lag: usize) -> Self {
        Self { acf, averaging, max_lag, cache: Vec::new() }
    }

    pub fn acf(&self) -> &PeriodicAutocorrelation {
        &self.acf
    }

    pub fn max_lag(&self) -> usize {
        self.max_lag
    }

    /// Per-sample weights `w[n]` over one period such that the component is
    /// `sum_n c(n, tau) w[n]`, or `None` when the component is identically 0.
    fn weights(&self, nu: f64) -> Option<Vec<Complex64>> {
        let p = self.acf.period();
        match self.averaging {
            Averaging::LongRun => {
                let k = nu * p as f64;
                if (k - k.round()).abs() > 1e-9 {
                    return None;
                }
                let k = k.round() as i64;
                Some((0..p).map(|n| unit_phasor((k * n as i64).rem_euclid(p as i64) as f64 / p as f64) / p as f64).collect())
            }
            Averaging::Window { samples } => {
                // Sample n0 + j P (j = 0..count) contributes e^{-j2pi nu n0}
                // times a geometric sum over j.
                let step = unit_phasor(nu * p as f64);
                Some(
                    (0..p)
                        .map(|n0| {
                            if n0 >= samples {
                                return Complex64::default();
                            }
                            let count = (samples - n0).div_ceil(p);
                            let geo = if (step - Complex64::new(1.0, 0.0)).norm() < 1e-14 {
                                Complex64::new(count as f64, 0.0)
                            } else {
                                (Complex64::new(1.0, 0.0) - step.powu(count as u32)) / (Complex64::new(1.0, 0.0) - step)
                            };
                            unit_phasor(nu * n0 as f64) * geo / samples as f64
                        })
                        .collect(),
                )
            }
        }
    }

    fn compute(&self, nu: f64) -> Result<Option<Vec<Complex64>>> {
        let Some(w) = self.weights(nu) else { return Ok(None) };
        let m = self.max_lag as i64;
        let mut out = vec![Complex64::default(); 2 * self.max_lag + 1];
        for (idx, tau) in (-m..=m).enumerate() {
            if self.acf.complete_support() && tau.unsigned_abs() >= self.acf.max_lag() as u64 {
                continue;
            }
            let mut acc = Complex64::default();
            for (n, wn) in w.iter().enumerate() {
                acc += self.acf.get(n as i64, tau)? * wn;
            }
            out[idx] = acc;
        }
        Ok(Some(out))
    }

    fn slot(&mut self, nu: f64) -> Result<usize> {
        let key = wrap_freq(nu);
        if let Some(i) = self.cache.iter().position(|(f, _)| (f - key).abs() < FREQ_TOL) {
            return Ok(i);
        }
        let v = self.compute(key)?;
        self.cache.push((key, v));
        Ok(self.cache.len() - 1)
    }

    /// Component at frequency `nu` over all lags, or `None` when it is zero.
    pub fn component(&mut self, nu: f64) -> Result<Option<&[Complex64]>> {
        let i = self.slot(nu)?;
        Ok(self.cache[i].1.as_deref())
    }

    /// Single value `C^nu(tau)`.
    pub fn value(&mut self, nu: f64, tau: i64) -> Result<Complex64> {
        let m = self.max_lag as i64;
        if tau.abs() > m {
            return Err(crate::Error::LagOutOfRange { lag: tau, max_lag: self.max_lag });
        }
        Ok(self.component(nu)?.map_or(Complex64::default(), |c| c[(tau + m) as usize]))
    }
}
