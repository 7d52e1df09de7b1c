//! Sampled signals, periodic second-order statistics and seeded randomness.

use alloc::vec::Vec;
use core::f64::consts::PI;
use core::ops::{Add, Div};

use num_complex::Complex64;
#[allow(unused_imports)] // needed for float methods without std
use num_traits::Float;
use num_traits::Zero;
use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};
use rand_distr::{Distribution, StandardNormal};

use crate::{Error, Result};

/// A finite real-valued sample sequence starting at index 0.
pub type RealSignal = Vec<f64>;
/// A finite complex-valued sample sequence starting at index 0.
pub type ComplexSignal = Vec<Complex64>;

pub fn gcd(a: usize, b: usize) -> usize {
    let (mut a, mut b) = (a, b);
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

pub fn lcm(a: usize, b: usize) -> usize {
    if a == 0 || b == 0 {
        return 0;
    }
    a / gcd(a, b) * b
}

/// `e^{-j 2 pi cycles}` with the phase reduced modulo one cycle first.
pub fn unit_phasor(cycles: f64) -> Complex64 {
    let frac = cycles - cycles.floor();
    let (s, c) = (2.0 * PI * frac).sin_cos();
    Complex64::new(c, -s)
}

/// Multiplies `x[n]` by `e^{-j 2 pi alpha n}`.
pub fn frequency_shift<T: Into<Complex64> + Copy>(x: &[T], alpha: f64) -> ComplexSignal {
    x.iter()
        .enumerate()
        .map(|(n, &v)| v.into() * unit_phasor(alpha * n as f64))
        .collect()
}

/// Average of `f(0), ..., f(period - 1)`.
pub fn time_average_periodic<T, F>(f: F, period: usize) -> Result<T>
where
    T: Copy + Zero + Add<Output = T> + Div<f64, Output = T>,
    F: Fn(usize) -> T,
{
    if period == 0 {
        return Err(Error::InvalidPeriod("averaging period must be positive".into()));
    }
    let mut acc = T::zero();
    for n in 0..period {
        acc = acc + f(n);
    }
    Ok(acc / period as f64)
}

/// The autocorrelation `c(n, l) = E{x[n + l] x*[n]}` of a process that is
/// periodic in `n`.
///
/// Only lags `0..max_lag` are stored; negative lags are resolved through
/// `c(n, -l) = conj(c(n - l, l))`. When `complete_support` is set the stored
/// lags cover the whole support, and lags beyond the table are exactly zero
/// rather than unknown.
#[derive(Debug, Clone, PartialEq)]
pub struct PeriodicAutocorrelation {
    period: usize,
    max_lag: usize,
    complete_support: bool,
    table: Vec<Complex64>,
}

impl PeriodicAutocorrelation {
    pub fn zeros(period: usize, max_lag: usize, complete_support: bool) -> Result<Self> {
        if period == 0 {
            return Err(Error::InvalidPeriod("autocorrelation period must be positive".into()));
        }
        if max_lag == 0 {
            return Err(Error::Shape("autocorrelation needs at least lag 0".into()));
        }
        Ok(Self {
            period,
            max_lag,
            complete_support,
            table: alloc::vec![Complex64::zero(); period * max_lag],
        })
    }

    /// Tabulates `f(n, l)` for `n` in one period and `l` in `0..max_lag`.
    pub fn from_fn<F>(period: usize, max_lag: usize, complete_support: bool, f: F) -> Result<Self>
    where
        F: Fn(usize, usize) -> Complex64,
    {
        let mut out = Self::zeros(period, max_lag, complete_support)?;
        for n in 0..period {
            for l in 0..max_lag {
                out.table[n * max_lag + l] = f(n, l);
            }
        }
        Ok(out)
    }

    pub fn period(&self) -> usize {
        self.period
    }

    pub fn max_lag(&self) -> usize {
        self.max_lag
    }

    pub fn complete_support(&self) -> bool {
        self.complete_support
    }

    /// Lags that can be queried: everything when the support is complete,
    /// otherwise `|l| < max_lag`.
    pub fn covers_lag(&self, lag: i64) -> bool {
        self.complete_support || lag.unsigned_abs() < self.max_lag as u64
    }

    fn row(&self, n: i64) -> usize {
        n.rem_euclid(self.period as i64) as usize
    }

    pub fn get(&self, n: i64, lag: i64) -> Result<Complex64> {
        let mag = lag.unsigned_abs();
        if mag >= self.max_lag as u64 {
            return if self.complete_support {
                Ok(Complex64::zero())
            } else {
                Err(Error::LagOutOfRange { lag, max_lag: self.max_lag })
            };
        }
        let mag = mag as usize;
        if lag >= 0 {
            Ok(self.table[self.row(n) * self.max_lag + mag])
        } else {
            Ok(self.table[self.row(n - mag as i64) * self.max_lag + mag].conj())
        }
    }

    /// Stored value for `n` in one period and `0 <= lag < max_lag`.
    pub fn stored(&self, n: usize, lag: usize) -> Complex64 {
        self.table[(n % self.period) * self.max_lag + lag]
    }

    pub fn set(&mut self, n: usize, lag: usize, value: Complex64) {
        let idx = (n % self.period) * self.max_lag + lag;
        self.table[idx] = value;
    }

    /// Time-averaged power `<c(n, 0)>`.
    pub fn average_power(&self) -> f64 {
        (0..self.period).map(|n| self.stored(n, 0).re).sum::<f64>() / self.period as f64
    }

    pub fn scaled(&self, factor: f64) -> Self {
        let mut out = self.clone();
        out.table.iter_mut().for_each(|v| *v *= factor);
        out
    }

    /// Autocorrelation of the sum of two uncorrelated processes.
    pub fn sum_uncorrelated(&self, other: &Self) -> Self {
        let period = lcm(self.period, other.period);
        let max_lag = self.max_lag.max(other.max_lag);
        let complete = self.complete_support && other.complete_support;
        let lag_limit = if complete {
            max_lag
        } else {
            let a = if self.complete_support { usize::MAX } else { self.max_lag };
            let b = if other.complete_support { usize::MAX } else { other.max_lag };
            a.min(b)
        };
        let mut out = Self::zeros(period, lag_limit, complete).expect("nonzero period and lag");
        for n in 0..period {
            for l in 0..lag_limit {
                let a = self.get(n as i64, l as i64).unwrap_or_default();
                let b = other.get(n as i64, l as i64).unwrap_or_default();
                out.set(n, l, a + b);
            }
        }
        out
    }

    /// Sample estimate of the periodic autocorrelation of `x`, averaging
    /// over every complete pair available in the record.
    pub fn estimate(x: &[f64], period: usize, max_lag: usize) -> Result<Self> {
        let mut out = Self::zeros(period, max_lag, false)?;
        let mut counts = alloc::vec![0usize; period];
        for n in 0..x.len() {
            if n + max_lag > x.len() {
                break;
            }
            let row = n % period;
            counts[row] += 1;
            for l in 0..max_lag {
                out.table[row * max_lag + l] += x[n + l] * x[n];
            }
        }
        for (row, &count) in counts.iter().enumerate() {
            if count == 0 {
                return Err(Error::Shape("record shorter than one period plus max lag".into()));
            }
            for l in 0..max_lag {
                out.table[row * max_lag + l] /= count as f64;
            }
        }
        Ok(out)
    }
}

/// Deterministic random source keyed by a seed and a stream index, so that
/// independent parts of a scenario draw from non-overlapping sequences.
#[derive(Debug, Clone)]
pub struct SeededRng {
    inner: ChaCha8Rng,
}

impl SeededRng {
    pub fn new(seed: u64, stream: u64) -> Self {
        let mut inner = ChaCha8Rng::seed_from_u64(seed);
        inner.set_stream(stream);
        Self { inner }
    }

    pub fn gaussian(&mut self) -> f64 {
        StandardNormal.sample(&mut self.inner)
    }

    pub fn gaussian_vec(&mut self, len: usize) -> RealSignal {
        (0..len).map(|_| self.gaussian()).collect()
    }

    pub fn bits(&mut self, len: usize) -> Vec<u8> {
        (0..len).map(|_| (self.inner.next_u32() & 1) as u8).collect()
    }

    /// Uniform in `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        (self.inner.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }
}

impl RngCore for SeededRng {
    fn next_u32(&mut self) -> u32 {
        self.inner.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    fn fill_bytes(&mut self, dest: &mut [u8]) {
        self.inner.fill_bytes(dest)
    }

    fn try_fill_bytes(&mut self, dest: &mut [u8]) -> core::result::Result<(), rand_core::Error> {
        self.inner.try_fill_bytes(dest)
    }
}
