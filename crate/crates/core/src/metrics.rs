//! Performance measures shared by the simulator and the tests.

use alloc::vec::Vec;

#[allow(unused_imports)] // needed for float methods without std
use num_traits::Float;

use crate::{Error, Result};

pub fn to_db(x: f64) -> f64 {
    10.0 * x.log10()
}

pub fn from_db(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// Input SNR `P_d / <E w^2>`.
pub fn snr_in(desired_power: f64, noise_power: f64) -> f64 {
    desired_power / noise_power
}

/// Factor applied to the noise power so that the input SNR equals
/// `snr_db`.
pub fn noise_gain_for_snr(desired_power: f64, unit_noise_power: f64, snr_db: f64) -> f64 {
    desired_power / (unit_noise_power * from_db(snr_db))
}

/// Mean squared error between `y` and `d` over whole periods of `period`
/// samples starting at `start`.
pub fn empirical_ta_mse(y: &[f64], d: &[f64], start: usize, period: usize) -> Result<f64> {
    if y.len() != d.len() {
        return Err(Error::Shape("output and reference lengths differ".into()));
    }
    if period == 0 {
        return Err(Error::InvalidPeriod("averaging period must be positive".into()));
    }
    let avail = y.len().saturating_sub(start);
    let periods = avail / period;
    if periods == 0 {
        return Err(Error::Shape("record holds no complete period after warm-up".into()));
    }
    let end = start + periods * period;
    let sum: f64 = y[start..end].iter().zip(&d[start..end]).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok(sum / (end - start) as f64)
}

/// Average of `y[n] / d[n]` over samples where `|d[n]|` exceeds `threshold`.
pub fn measured_scaling(y: &[f64], d: &[f64], start: usize, threshold: f64) -> Result<f64> {
    let (sum, count) = y
        .iter()
        .zip(d)
        .skip(start)
        .filter(|(_, b)| b.abs() > threshold)
        .fold((0.0, 0usize), |(s, c), (a, b)| (s + a / b, c + 1));
    if count == 0 {
        return Err(Error::Shape("no samples above the scaling threshold".into()));
    }
    Ok(sum / count as f64)
}

/// Fraction of differing bits.
pub fn bit_error_rate(a: &[u8], b: &[u8]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::Shape("bit sequences differ in length".into()));
    }
    if a.is_empty() {
        return Ok(0.0);
    }
    Ok(a.iter().zip(b).filter(|(x, y)| (*x & 1) != (*y & 1)).count() as f64 / a.len() as f64)
}

/// Input SNR at which a curve reaches `level`, by linear interpolation
/// between neighbouring points. The curve is a list of `(snr, value)`
/// pairs sorted by SNR with values decreasing in SNR. Values are
/// interpolated on a logarithmic scale when `log_scale` is set.
pub fn snr_at_level(curve: &[(f64, f64)], level: f64, log_scale: bool) -> Option<f64> {
    let tr = |v: f64| if log_scale { v.log10() } else { v };
    let target = tr(level);
    curve.windows(2).find_map(|w| {
        let (s0, v0) = (w[0].0, tr(w[0].1));
        let (s1, v1) = (w[1].0, tr(w[1].1));
        if !(v0.is_finite() && v1.is_finite()) {
            return None;
        }
        let (lo, hi) = if v0 <= v1 { (v0, v1) } else { (v1, v0) };
        if target < lo || target > hi || v0 == v1 {
            return None;
        }
        Some(s0 + (target - v0) * (s1 - s0) / (v1 - v0))
    })
}

/// Horizontal gain of curve `better` over curve `worse` at each SNR of
/// `better`: the extra input SNR `worse` needs to reach the same value.
/// Points outside the range of `worse` are skipped.
pub fn horizontal_gains(better: &[(f64, f64)], worse: &[(f64, f64)], log_scale: bool) -> Vec<(f64, f64)> {
    better
        .iter()
        .filter_map(|&(s, v)| snr_at_level(worse, v, log_scale).map(|sw| (s, sw - s)))
        .collect()
}
