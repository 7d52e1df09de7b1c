//! Cyclostationary Gaussian noise: the Katayama variance-modulated model,
//! the switched-filter LPTV model and white Gaussian noise.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use num_complex::Complex64;
#[allow(unused_imports)] // needed for float methods without std
use num_traits::Float;

use crate::signal::{PeriodicAutocorrelation, RealSignal, SeededRng};
use crate::{Error, Result};

/// Default period of the noise statistics in samples (half a mains cycle).
pub const DEFAULT_NOISE_PERIOD: usize = 1000;
/// Mains frequency used to convert the spectral decay to per-sample units.
pub const DEFAULT_MAINS_HZ: f64 = 50.0;

const SHAPING_GRID: usize = 8192;
const SHAPING_TAIL: f64 = 1e-12;

/// One term `A |sin(pi n / N + theta)|^exponent` of the Katayama variance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KatayamaComponent {
    pub amplitude: f64,
    pub exponent: f64,
    pub phase_rad: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KatayamaParams {
    pub components: Vec<KatayamaComponent>,
    /// Spectral decay of `(a/2) e^{-a |f|}` in seconds.
    pub spectral_decay_s: f64,
    pub period: usize,
    /// Mains frequency in Hz. The sampling rate is `2 * period * mains_hz`,
    /// so one noise period spans half a mains cycle.
    pub mains_hz: f64,
}

fn components(amplitudes: [f64; 3], exponents: [f64; 3], phases_deg: [f64; 3]) -> Vec<KatayamaComponent> {
    (0..3)
        .map(|i| KatayamaComponent {
            amplitude: amplitudes[i],
            exponent: exponents[i],
            phase_rad: phases_deg[i].to_radians(),
        })
        .collect()
}

impl KatayamaParams {
    /// Measured low-voltage site with a broad variance swell and a narrow
    /// impulsive peak.
    pub fn kata1() -> Self {
        Self {
            components: components([0.23, 1.38, 7.17], [0.0, 1.91, 1.57e5], [0.0, -6.0, -35.0]),
            spectral_decay_s: 1.2e-5,
            period: DEFAULT_NOISE_PERIOD,
            mains_hz: DEFAULT_MAINS_HZ,
        }
    }

    /// Measured site with a low floor, a sharp swell and a strong impulse.
    pub fn kata2() -> Self {
        Self {
            components: components([0.13, 2.8, 16.0], [0.0, 9.3, 5.3e3], [0.0, 128.0, 161.0]),
            spectral_decay_s: 8.9e-6,
            period: DEFAULT_NOISE_PERIOD,
            mains_hz: DEFAULT_MAINS_HZ,
        }
    }

    pub fn preset(name: &str) -> Option<Self> {
        match name.to_ascii_uppercase().as_str() {
            "KATA1" => Some(Self::kata1()),
            "KATA2" => Some(Self::kata2()),
            _ => None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.period < 2 {
            return Err(Error::Config(format!("noise period must be at least 2, got {}", self.period)));
        }
        if !(self.spectral_decay_s > 0.0) || !(self.mains_hz > 0.0) {
            return Err(Error::Config("spectral decay and mains frequency must be positive".into()));
        }
        if self.components.is_empty() {
            return Err(Error::Config("Katayama model needs at least one component".into()));
        }
        for c in &self.components {
            if !(c.amplitude >= 0.0) || !c.exponent.is_finite() || c.exponent < 0.0 || !c.phase_rad.is_finite() {
                return Err(Error::Config(format!("invalid Katayama component {c:?}")));
            }
        }
        Ok(())
    }

    /// Spectral decay in per-sample units, `a * f_s`.
    pub fn decay_per_sample(&self) -> f64 {
        self.spectral_decay_s * 2.0 * self.period as f64 * self.mains_hz
    }

    /// Instantaneous variance `sum_i A_i |sin(pi n / N + theta_i)|^{n_i}`,
    /// with `0^0 = 1`.
    pub fn beta(&self, n: i64) -> f64 {
        let phase = PI * n.rem_euclid(self.period as i64) as f64 / self.period as f64;
        self.components
            .iter()
            .map(|c| c.amplitude * (phase + c.phase_rad).sin().abs().powf(c.exponent))
            .sum()
    }

    /// Normalized autocorrelation `a^2 / (a^2 + (2 pi l)^2)` of the
    /// stationary factor; the inverse transform of `(a/2) e^{-a|f|}`.
    pub fn lag_shape(&self, lag: i64) -> f64 {
        let a = self.decay_per_sample();
        let w = 2.0 * PI * lag as f64;
        a * a / (a * a + w * w)
    }

    /// `sqrt(beta[n] beta[n+l]) * lag_shape(l)` for `|l| < max_lag`.
    pub fn autocorr(&self, max_lag: usize) -> Result<PeriodicAutocorrelation> {
        self.validate()?;
        let beta: Vec<f64> = (0..self.period as i64).map(|n| self.beta(n)).collect();
        let shape: Vec<f64> = (0..max_lag as i64).map(|l| self.lag_shape(l)).collect();
        let p = self.period;
        PeriodicAutocorrelation::from_fn(p, max_lag, false, |n, l| {
            Complex64::new((beta[n] * beta[(n + l) % p]).sqrt() * shape[l], 0.0)
        })
    }

    /// Symmetric FIR whose output, driven by unit white noise, has
    /// autocorrelation [`Self::lag_shape`]. Built from the square root of
    /// the aliased spectrum on a dense grid and truncated once the tail
    /// energy is negligible.
    pub fn shaping_filter(&self) -> Vec<f64> {
        let a = self.decay_per_sample();
        let m = SHAPING_GRID;
        let norm = (a / 2.0) / (1.0 - (-a).exp());
        let root: Vec<f64> = (0..m)
            .map(|k| {
                let f = k as f64 / m as f64;
                (norm * ((-a * f).exp() + (-a * (1.0 - f)).exp())).sqrt()
            })
            .collect();
        let cos_table: Vec<f64> = (0..m).map(|j| (2.0 * PI * j as f64 / m as f64).cos()).collect();
        let half: Vec<f64> = (0..m / 2)
            .map(|t| {
                root.iter()
                    .enumerate()
                    .map(|(k, r)| r * cos_table[(k * t) % m])
                    .sum::<f64>()
                    / m as f64
            })
            .collect();
        let total: f64 = half[0] * half[0] + 2.0 * half[1..].iter().map(|v| v * v).sum::<f64>();
        let mut tail = total;
        let mut keep = 0;
        for (t, v) in half.iter().enumerate() {
            tail -= if t == 0 { v * v } else { 2.0 * v * v };
            keep = t;
            if tail <= SHAPING_TAIL * total {
                break;
            }
        }
        let mut taps: Vec<f64> = half[1..=keep].iter().rev().copied().collect();
        taps.extend_from_slice(&half[..=keep]);
        let energy: f64 = taps.iter().map(|v| v * v).sum();
        let fix = 1.0 / energy.sqrt();
        taps.iter_mut().for_each(|v| *v *= fix);
        taps
    }

    pub fn generate(&self, length: usize, rng: &mut SeededRng) -> Result<RealSignal> {
        self.validate()?;
        let taps = self.shaping_filter();
        let white = rng.gaussian_vec(length + taps.len() - 1);
        Ok((0..length)
            .map(|n| {
                let g: f64 = taps.iter().zip(&white[n..]).map(|(h, v)| h * v).sum();
                self.beta(n as i64).sqrt() * g
            })
            .collect())
    }

    pub fn average_power(&self) -> f64 {
        (0..self.period as i64).map(|n| self.beta(n)).sum::<f64>() / self.period as f64
    }
}

/// One interval of the LPTV model: from `start` up to the next interval's
/// start, the noise is white noise filtered by `taps`.
#[derive(Debug, Clone, PartialEq)]
pub struct LptvInterval {
    pub start: usize,
    pub taps: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LptvParams {
    pub period: usize,
    /// Intervals sorted by start; the first starts at 0 and the last runs
    /// to the end of the period.
    pub intervals: Vec<LptvInterval>,
}

impl LptvParams {
    /// Non-normative three-state stand-in over a 1000-sample period: a quiet
    /// low-pass state, a 35 % duty high-power state with high-pass
    /// character, and a medium low-pass state.
    pub fn standin() -> Self {
        Self {
            period: DEFAULT_NOISE_PERIOD,
            intervals: vec![
                LptvInterval { start: 0, taps: vec![0.3, 0.15] },
                LptvInterval { start: 300, taps: vec![1.5, -0.9, 0.4] },
                LptvInterval { start: 650, taps: vec![0.6, 0.3, 0.1] },
            ],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.period == 0 {
            return Err(Error::InvalidPeriod("LPTV period must be positive".into()));
        }
        if self.intervals.is_empty() || self.intervals[0].start != 0 {
            return Err(Error::Config("LPTV intervals must start at sample 0".into()));
        }
        for w in self.intervals.windows(2) {
            if w[1].start <= w[0].start {
                return Err(Error::Config("LPTV interval starts must be strictly increasing".into()));
            }
        }
        if self.intervals.last().map_or(true, |i| i.start >= self.period) {
            return Err(Error::Config("LPTV interval start beyond the period".into()));
        }
        if self.intervals.iter().any(|i| i.taps.is_empty() || i.taps.iter().any(|t| !t.is_finite())) {
            return Err(Error::Config("every LPTV filter needs finite taps".into()));
        }
        Ok(())
    }

    fn active(&self, n: i64) -> &[f64] {
        let phase = n.rem_euclid(self.period as i64) as usize;
        let idx = self.intervals.partition_point(|i| i.start <= phase) - 1;
        &self.intervals[idx].taps
    }

    fn longest(&self) -> usize {
        self.intervals.iter().map(|i| i.taps.len()).max().unwrap_or(1)
    }

    /// `c(n, l) = sum_j h_{i(n+l)}[j + l] h_{i(n)}[j]`, exact, full support.
    pub fn autocorr(&self) -> Result<PeriodicAutocorrelation> {
        self.validate()?;
        PeriodicAutocorrelation::from_fn(self.period, self.longest(), true, |n, l| {
            let now = self.active(n as i64);
            let later = self.active((n + l) as i64);
            let v: f64 = now
                .iter()
                .enumerate()
                .filter_map(|(j, h)| later.get(j + l).map(|g| g * h))
                .sum();
            Complex64::new(v, 0.0)
        })
    }

    pub fn generate(&self, length: usize, rng: &mut SeededRng) -> Result<RealSignal> {
        self.validate()?;
        let pre = self.longest() - 1;
        let white = rng.gaussian_vec(length + pre);
        Ok((0..length)
            .map(|n| {
                self.active(n as i64)
                    .iter()
                    .enumerate()
                    .map(|(l, h)| h * white[n + pre - l])
                    .sum()
            })
            .collect())
    }

    pub fn average_power(&self) -> f64 {
        (0..self.period as i64)
            .map(|n| self.active(n).iter().map(|h| h * h).sum::<f64>())
            .sum::<f64>()
            / self.period as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AwgnParams {
    pub variance: f64,
}

impl AwgnParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.variance > 0.0) || !self.variance.is_finite() {
            return Err(Error::Config(format!("AWGN variance must be positive, got {}", self.variance)));
        }
        Ok(())
    }

    pub fn autocorr(&self) -> Result<PeriodicAutocorrelation> {
        self.validate()?;
        PeriodicAutocorrelation::from_fn(1, 1, true, |_, _| Complex64::new(self.variance, 0.0))
    }

    pub fn generate(&self, length: usize, rng: &mut SeededRng) -> Result<RealSignal> {
        self.validate()?;
        let s = self.variance.sqrt();
        Ok((0..length).map(|_| s * rng.gaussian()).collect())
    }
}

/// Noise model selector with a common interface.
#[derive(Debug, Clone, PartialEq)]
pub enum NoiseModel {
    Katayama(KatayamaParams),
    Lptv(LptvParams),
    Awgn(AwgnParams),
}

impl NoiseModel {
    /// Period of the noise statistics.
    pub fn period(&self) -> usize {
        match self {
            Self::Katayama(p) => p.period,
            Self::Lptv(p) => p.period,
            Self::Awgn(_) => 1,
        }
    }

    /// Analytic autocorrelation valid for lags `|l| < max_lag` at least.
    pub fn autocorr(&self, max_lag: usize) -> Result<PeriodicAutocorrelation> {
        match self {
            Self::Katayama(p) => p.autocorr(max_lag),
            Self::Lptv(p) => p.autocorr(),
            Self::Awgn(p) => p.autocorr(),
        }
    }

    pub fn generate(&self, length: usize, rng: &mut SeededRng) -> Result<RealSignal> {
        if length == 0 {
            return Err(Error::Config("noise length must be at least 1".into()));
        }
        match self {
            Self::Katayama(p) => p.generate(length, rng),
            Self::Lptv(p) => p.generate(length, rng),
            Self::Awgn(p) => p.generate(length, rng),
        }
    }

    /// Time-averaged variance.
    pub fn average_power(&self) -> f64 {
        match self {
            Self::Katayama(p) => p.average_power(),
            Self::Lptv(p) => p.average_power(),
            Self::Awgn(p) => p.variance,
        }
    }
}

pub fn katayama_beta(p: &KatayamaParams, n: i64) -> f64 {
    p.beta(n)
}

pub fn katayama_autocorr(p: &KatayamaParams, max_lag: usize) -> Result<PeriodicAutocorrelation> {
    p.autocorr(max_lag)
}

pub fn katayama_generate(p: &KatayamaParams, length: usize, rng: &mut SeededRng) -> Result<RealSignal> {
    NoiseModel::Katayama(p.clone()).generate(length, rng)
}

pub fn lptv_autocorr(p: &LptvParams) -> Result<PeriodicAutocorrelation> {
    p.autocorr()
}

pub fn lptv_generate(p: &LptvParams, length: usize, rng: &mut SeededRng) -> Result<RealSignal> {
    NoiseModel::Lptv(p.clone()).generate(length, rng)
}

pub fn awgn_generate(p: &AwgnParams, length: usize, rng: &mut SeededRng) -> Result<RealSignal> {
    NoiseModel::Awgn(*p).generate(length, rng)
}
