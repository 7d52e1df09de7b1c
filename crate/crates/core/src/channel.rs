//! Known linear channel applied to the transmitted signal.

use alloc::vec::Vec;

use num_complex::Complex64;

use crate::signal::{unit_phasor, PeriodicAutocorrelation, RealSignal};
use crate::{Error, Result};

/// Real FIR channel `g[0..L_ISI)`.
#[derive(Debug, Clone, PartialEq)]
pub struct IsiChannel {
    taps: Vec<f64>,
}

impl IsiChannel {
    pub fn new(taps: Vec<f64>) -> Result<Self> {
        if taps.is_empty() {
            return Err(Error::Config("channel needs at least one tap".into()));
        }
        if taps.iter().any(|t| !t.is_finite()) {
            return Err(Error::Config("channel taps must be finite".into()));
        }
        Ok(Self { taps })
    }

    /// Identity channel.
    pub fn flat() -> Self {
        Self { taps: alloc::vec![1.0] }
    }

    /// Exponentially decaying taps `1, 0.1, 0.01, 0.001`.
    pub fn decaying_example() -> Self {
        Self { taps: alloc::vec![1.0, 0.1, 0.01, 0.001] }
    }

    pub fn taps(&self) -> &[f64] {
        &self.taps
    }

    /// `G(f) = sum_i g[i] e^{-j 2 pi f i}`.
    pub fn frequency_response(&self, freq: f64) -> Complex64 {
        self.taps
            .iter()
            .enumerate()
            .map(|(i, &g)| g * unit_phasor(freq * i as f64))
            .sum()
    }

    /// Convolution with zero samples before the start of the record. The
    /// output has the input length.
    pub fn apply(&self, d: &[f64]) -> RealSignal {
        (0..d.len())
            .map(|n| {
                self.taps
                    .iter()
                    .enumerate()
                    .take(n + 1)
                    .map(|(i, g)| g * d[n - i])
                    .sum()
            })
            .collect()
    }

    /// Steady-state autocorrelation of the channel output,
    /// `sum_i sum_k g[i] g[k] c(n - k, l + k - i)`.
    pub fn output_autocorr(&self, input: &PeriodicAutocorrelation) -> Result<PeriodicAutocorrelation> {
        let span = self.taps.len() - 1;
        let (max_lag, complete) = if input.complete_support() {
            (input.max_lag() + span, true)
        } else {
            if input.max_lag() <= span {
                return Err(Error::LagOutOfRange { lag: span as i64, max_lag: input.max_lag() });
            }
            (input.max_lag() - span, false)
        };
        let g = &self.taps;
        let mut out = PeriodicAutocorrelation::zeros(input.period(), max_lag, complete)?;
        for n in 0..input.period() {
            for l in 0..max_lag {
                let mut acc = Complex64::default();
                for (i, gi) in g.iter().enumerate() {
                    for (k, gk) in g.iter().enumerate() {
                        let lag = l as i64 + k as i64 - i as i64;
                        acc += gi * gk * input.get(n as i64 - k as i64, lag)?;
                    }
                }
                out.set(n, l, acc);
            }
        }
        Ok(out)
    }
}

/// Convenience wrapper for [`IsiChannel::apply`].
pub fn apply_isi(channel: &IsiChannel, d: &[f64]) -> RealSignal {
    channel.apply(d)
}

/// Convenience wrapper for [`IsiChannel::output_autocorr`].
pub fn isi_autocorr(channel: &IsiChannel, c_dd: &PeriodicAutocorrelation) -> Result<PeriodicAutocorrelation> {
    channel.output_autocorr(c_dd)
}
