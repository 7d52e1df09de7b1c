//! Applying designed FRESH filters to sample records.

use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex64;
#[allow(unused_imports)] // needed for float methods without std
use num_traits::Float;

use crate::design::{FreshFilterSpec, TwoStageReceiver};
use crate::signal::{unit_phasor, ComplexSignal, RealSignal};

/// `y[n] = sum_p sum_q conj(h_p[q]) x[n-q] e^{-j 2 pi alpha_p (n-q)}` with
/// zero samples before the record.
pub fn apply_fresh(spec: &FreshFilterSpec, x: &[f64]) -> ComplexSignal {
    let mut y = vec![Complex64::default(); x.len()];
    for (p, &alpha) in spec.freqs.iter().enumerate() {
        let shifted: Vec<Complex64> = x
            .iter()
            .enumerate()
            .map(|(n, &v)| v * unit_phasor(alpha * n as f64))
            .collect();
        for q in 0..spec.fir_len {
            let h = spec.coeff(p, q).conj();
            if h == Complex64::default() {
                continue;
            }
            for n in q..x.len() {
                y[n] += h * shifted[n - q];
            }
        }
    }
    y
}

/// Real part of [`apply_fresh`], computed with real arithmetic. Branches
/// at `alpha` and `-alpha` share their cosine and sine channels.
pub fn apply_fresh_real(spec: &FreshFilterSpec, x: &[f64]) -> RealSignal {
    apply_fresh_real_at(spec, x, 0)
}

/// Outputs for `n` in `start..end` of [`apply_fresh_real`] over the record
/// `x[..end]`, touching only the samples the taps reach.
pub fn apply_fresh_real_block(spec: &FreshFilterSpec, x: &[f64], start: usize, end: usize) -> RealSignal {
    let from = start.saturating_sub(spec.fir_len - 1);
    let y = apply_fresh_real_at(spec, &x[from..end], from);
    y[start - from..].to_vec()
}

/// [`apply_fresh_real`] for a slice whose first sample sits at absolute
/// time `origin`; samples before the slice are taken as zero.
fn apply_fresh_real_at(spec: &FreshFilterSpec, x: &[f64], origin: usize) -> RealSignal {
    // Re{conj(h) e^{-j theta}} = Re(h) cos(theta) - Im(h) sin(theta)
    struct Channel {
        freq: f64,
        cos_taps: Vec<f64>,
        sin_taps: Vec<f64>,
    }
    let l = spec.fir_len;
    let mut channels: Vec<Channel> = Vec::new();
    for (p, &alpha) in spec.freqs.iter().enumerate() {
        let mut f = alpha - alpha.round();
        let mut sign = 1.0;
        if f < 0.0 {
            f = -f;
            sign = -1.0;
        }
        let idx = match channels.iter().position(|c| (c.freq - f).abs() < 1e-12) {
            Some(i) => i,
            None => {
                channels.push(Channel { freq: f, cos_taps: vec![0.0; l], sin_taps: vec![0.0; l] });
                channels.len() - 1
            }
        };
        let ch = &mut channels[idx];
        for q in 0..l {
            let h = spec.coeff(p, q);
            ch.cos_taps[q] += h.re;
            ch.sin_taps[q] -= sign * h.im;
        }
    }
    let mut y = vec![0.0; x.len()];
    let mut carrier = vec![0.0; x.len()];
    for ch in &channels {
        for (taps, use_sin) in [(&ch.cos_taps, false), (&ch.sin_taps, true)] {
            if taps.iter().all(|t| *t == 0.0) {
                continue;
            }
            for (n, c) in carrier.iter_mut().enumerate() {
                // unit_phasor(f n) = cos(theta) - j sin(theta)
                let ph = unit_phasor(ch.freq * (origin + n) as f64);
                *c = x[n] * if use_sin { -ph.im } else { ph.re };
            }
            for (q, &t) in taps.iter().enumerate() {
                if t == 0.0 {
                    continue;
                }
                for (out, &u) in y[q..].iter_mut().zip(&carrier) {
                    *out += t * u;
                }
            }
        }
    }
    y
}

/// Signals produced by the two-stage receiver.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterChainOutput {
    /// Recovered desired signal.
    pub y: RealSignal,
    /// Noise estimate.
    pub w_hat: RealSignal,
    /// Delayed input with the noise estimate removed.
    pub t: RealSignal,
}

/// `r[n - delay] - w_hat[n]` with zeros before the record.
pub fn subtract_delayed(r: &[f64], w_hat: &[f64], delay: usize) -> RealSignal {
    w_hat
        .iter()
        .enumerate()
        .map(|(n, w)| if n >= delay { r[n - delay] - w } else { -w })
        .collect()
}

/// Noise estimation, subtraction, then signal extraction. The output
/// `y[n]` estimates `d[n - rx.delay()]`.
pub fn apply_two_stage(rx: &TwoStageReceiver, r: &[f64]) -> FilterChainOutput {
    let w_hat = apply_fresh_real(&rx.h1, r);
    let t = subtract_delayed(r, &w_hat, rx.h1.delay);
    let y = apply_fresh_real(&rx.h2, &t);
    FilterChainOutput { y, w_hat, t }
}

/// Samples at the start of a record affected by the zero prehistory of a
/// filter chain with the given total tap span.
pub fn warmup_len(total_taps: usize, n_data: usize) -> usize {
    total_taps.max(n_data)
}
