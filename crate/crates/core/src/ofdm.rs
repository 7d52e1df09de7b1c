//! Cyclic-prefix OFDM: mapping, passband modulation, demodulation and the
//! exact second-order statistics of the transmitted signal.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::{FRAC_1_SQRT_2, PI};

use num_complex::Complex64;
#[allow(unused_imports)] // needed for float methods without std
use num_traits::Float;

use crate::channel::IsiChannel;
use crate::signal::{unit_phasor, PeriodicAutocorrelation, RealSignal};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct OfdmConfig {
    /// DFT size, samples in the useful part of a symbol.
    pub n_data: usize,
    /// Cyclic prefix length.
    pub n_cp: usize,
    /// DFT bins carrying data, in mapping order.
    pub active_carriers: Vec<usize>,
    /// Carrier frequency in cycles per sample.
    pub carrier_freq: f64,
}

impl Default for OfdmConfig {
    /// 64-point DFT, 16-sample prefix, 32 carriers occupying baseband bins
    /// -16..15. The carrier at 33/128 centers the real passband spectrum on a
    /// quarter of the sampling rate while keeping every carrier separable
    /// from its mirror image.
    fn default() -> Self {
        Self {
            n_data: 64,
            n_cp: 16,
            active_carriers: (48..64).chain(0..16).collect(),
            carrier_freq: 33.0 / 128.0,
        }
    }
}

impl OfdmConfig {
    pub fn n_sym(&self) -> usize {
        self.n_data + self.n_cp
    }

    pub fn bits_per_symbol(&self) -> usize {
        2 * self.active_carriers.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_data == 0 || self.n_cp >= self.n_data {
            return Err(Error::Config(format!(
                "need 0 <= N_cp < N_data, got N_data={} N_cp={}",
                self.n_data, self.n_cp
            )));
        }
        if self.active_carriers.is_empty() || self.active_carriers.len() > self.n_data {
            return Err(Error::Config("active carrier count must be in 1..=N_data".into()));
        }
        let mut seen = vec![false; self.n_data];
        for &k in &self.active_carriers {
            if k >= self.n_data || seen[k] {
                return Err(Error::Config(format!("invalid or repeated carrier index {k}")));
            }
            seen[k] = true;
        }
        if !self.carrier_freq.is_finite() {
            return Err(Error::Config("carrier frequency must be finite".into()));
        }
        Ok(())
    }

    /// `cos(2 pi f_c N_data)`: the sign relating a prefix sample of the real
    /// passband signal to the sample `N_data` later.
    pub fn prefix_sign(&self) -> f64 {
        (2.0 * PI * self.carrier_freq * self.n_data as f64).cos()
    }

    /// Whether `n` lies in the last `N_cp` samples of its symbol (the samples
    /// copied into the prefix).
    pub fn in_prefix_source(&self, n: i64) -> bool {
        n.rem_euclid(self.n_sym() as i64) as usize >= self.n_data
    }

    /// Whether `n` lies in the prefix of its symbol.
    pub fn in_prefix(&self, n: i64) -> bool {
        (n.rem_euclid(self.n_sym() as i64) as usize) < self.n_cp
    }

    /// Bin where the image of carrier `k` lands after real-passband
    /// down-conversion, or `None` when the image is not bin-aligned.
    fn mirror_bin(&self, k: usize) -> Option<usize> {
        let shift = 2.0 * self.carrier_freq * self.n_data as f64;
        if (shift - shift.round()).abs() > 1e-9 {
            return None;
        }
        let n = self.n_data as i64;
        Some((-(k as i64) - shift.round() as i64).rem_euclid(n) as usize)
    }

    /// True when every active carrier can be recovered from the real signal.
    pub fn is_separable(&self) -> bool {
        let mut used = vec![false; self.n_data];
        for &k in &self.active_carriers {
            used[k] = true;
        }
        self.active_carriers
            .iter()
            .all(|&k| matches!(self.mirror_bin(k), Some(m) if !used[m]))
    }
}

/// Gray-labelled constellation. Point `i` carries the bits of `i`, most
/// significant first.
#[derive(Debug, Clone, PartialEq)]
pub struct Constellation {
    points: Vec<Complex64>,
    bits_per_point: usize,
}

impl Constellation {
    /// Unit-energy QPSK: bits `(b0, b1)` map to `((1 - 2 b0) + j (1 - 2 b1)) / sqrt 2`.
    pub fn qpsk() -> Self {
        let points = (0..4)
            .map(|i| {
                let b0 = (i >> 1) & 1;
                let b1 = i & 1;
                Complex64::new(1.0 - 2.0 * b0 as f64, 1.0 - 2.0 * b1 as f64) * FRAC_1_SQRT_2
            })
            .collect();
        Self { points, bits_per_point: 2 }
    }

    pub fn points(&self) -> &[Complex64] {
        &self.points
    }

    pub fn bits_per_point(&self) -> usize {
        self.bits_per_point
    }

    pub fn map(&self, bits: &[u8]) -> Result<Vec<Complex64>> {
        if bits.len() % self.bits_per_point != 0 {
            return Err(Error::Framing(format!(
                "{} bits is not a multiple of {} bits per point",
                bits.len(),
                self.bits_per_point
            )));
        }
        Ok(bits
            .chunks(self.bits_per_point)
            .map(|c| self.points[c.iter().fold(0usize, |acc, &b| (acc << 1) | (b & 1) as usize)])
            .collect())
    }

    /// Nearest point; ties resolve to the lowest index.
    pub fn slice(&self, y: Complex64) -> usize {
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for (i, p) in self.points.iter().enumerate() {
            let d = (y - p).norm_sqr();
            if d < best_d {
                best = i;
                best_d = d;
            }
        }
        best
    }

    pub fn hard_bits(&self, y: &[Complex64]) -> Vec<u8> {
        let mut out = Vec::with_capacity(y.len() * self.bits_per_point);
        for &v in y {
            let idx = self.slice(v);
            for b in (0..self.bits_per_point).rev() {
                out.push(((idx >> b) & 1) as u8);
            }
        }
        out
    }

    /// Per-bit soft values scaled so a noiseless point gives `+1` for bit 0
    /// and `-1` for bit 1.
    pub fn soft_bits(&self, y: &[Complex64]) -> Vec<f64> {
        debug_assert_eq!(self.bits_per_point, 2);
        let s = 2.0f64.sqrt();
        y.iter().flat_map(|v| [v.re * s, v.im * s]).collect()
    }
}

/// Data symbols indexed by OFDM symbol and DFT bin. Inactive bins hold zero.
#[derive(Debug, Clone, PartialEq)]
pub struct SymbolGrid {
    n_data: usize,
    symbols: Vec<Complex64>,
}

impl SymbolGrid {
    pub fn zeros(n_symbols: usize, n_data: usize) -> Self {
        Self { n_data, symbols: vec![Complex64::default(); n_symbols * n_data] }
    }

    /// Maps bits onto the active carriers, one OFDM symbol after another.
    pub fn from_bits(cfg: &OfdmConfig, constellation: &Constellation, bits: &[u8]) -> Result<Self> {
        cfg.validate()?;
        let per_symbol = cfg.active_carriers.len() * constellation.bits_per_point();
        if bits.len() % per_symbol != 0 {
            return Err(Error::Framing(format!(
                "{} bits do not fill whole OFDM symbols of {per_symbol} bits",
                bits.len()
            )));
        }
        let points = constellation.map(bits)?;
        let n_symbols = bits.len() / per_symbol;
        let mut grid = Self::zeros(n_symbols, cfg.n_data);
        for (m, chunk) in points.chunks(cfg.active_carriers.len()).enumerate() {
            for (&k, &p) in cfg.active_carriers.iter().zip(chunk) {
                grid.set(m, k, p);
            }
        }
        Ok(grid)
    }

    pub fn n_symbols(&self) -> usize {
        self.symbols.len() / self.n_data
    }

    pub fn n_data(&self) -> usize {
        self.n_data
    }

    pub fn get(&self, symbol: usize, bin: usize) -> Complex64 {
        self.symbols[symbol * self.n_data + bin]
    }

    pub fn set(&mut self, symbol: usize, bin: usize, v: Complex64) {
        self.symbols[symbol * self.n_data + bin] = v;
    }

    /// Values on the active carriers, in mapping order.
    pub fn active_values(&self, cfg: &OfdmConfig) -> Vec<Complex64> {
        (0..self.n_symbols())
            .flat_map(|m| cfg.active_carriers.iter().map(move |&k| self.get(m, k)))
            .collect()
    }
}

fn twiddles(n: usize) -> Vec<Complex64> {
    (0..n).map(|k| unit_phasor(-(k as f64) / n as f64)).collect()
}

/// Real passband OFDM signal `Re{s[n] e^{j 2 pi f_c n}}` where `s` is the
/// prefixed inverse DFT of each symbol scaled by `1/sqrt(N_data)`.
pub fn modulate(cfg: &OfdmConfig, grid: &SymbolGrid) -> Result<RealSignal> {
    modulate_from(cfg, grid, 0)
}

/// Like [`modulate`] for symbols that sit at `first_symbol` onwards in a
/// longer transmission, so the carrier phase follows absolute time.
pub fn modulate_from(cfg: &OfdmConfig, grid: &SymbolGrid, first_symbol: usize) -> Result<RealSignal> {
    cfg.validate()?;
    if grid.n_data() != cfg.n_data {
        return Err(Error::Shape("symbol grid width differs from N_data".into()));
    }
    let n = cfg.n_data;
    let n_sym = cfg.n_sym();
    let tw = twiddles(n);
    let norm = 1.0 / (n as f64).sqrt();
    let mut out = Vec::with_capacity(grid.n_symbols() * n_sym);
    for m in 0..grid.n_symbols() {
        let active: Vec<(usize, Complex64)> =
            (0..n).map(|k| (k, grid.get(m, k))).filter(|(_, a)| *a != Complex64::default()).collect();
        for j in 0..n_sym {
            let mut s = Complex64::default();
            for &(k, a) in &active {
                s += a * tw[(k * j) % n];
            }
            let idx = ((first_symbol + m) * n_sym + j) as f64;
            out.push((s * norm * unit_phasor(-cfg.carrier_freq * idx)).re);
        }
    }
    Ok(out)
}

/// Recovers the active-carrier symbols from a real passband signal. With a
/// known channel each carrier is divided by the channel response at its
/// passband frequency.
pub fn demodulate(
    cfg: &OfdmConfig,
    signal: &[f64],
    n_symbols: usize,
    channel: Option<&IsiChannel>,
) -> Result<SymbolGrid> {
    demodulate_range(cfg, signal, 0, n_symbols, channel)
}

/// Demodulates symbols `first_symbol..first_symbol + n_symbols` of a record
/// that starts at symbol 0.
pub fn demodulate_range(
    cfg: &OfdmConfig,
    signal: &[f64],
    first_symbol: usize,
    n_symbols: usize,
    channel: Option<&IsiChannel>,
) -> Result<SymbolGrid> {
    cfg.validate()?;
    if !cfg.is_separable() {
        return Err(Error::Config("carrier images overlap active carriers; signal is not demodulable".into()));
    }
    let n = cfg.n_data;
    let n_sym = cfg.n_sym();
    if signal.len() < (first_symbol + n_symbols) * n_sym {
        return Err(Error::Framing(format!(
            "{} samples cannot hold symbols up to {} of {n_sym} samples",
            signal.len(),
            first_symbol + n_symbols
        )));
    }
    let tw = twiddles(n);
    let gains: Vec<Complex64> = cfg
        .active_carriers
        .iter()
        .map(|&k| match channel {
            Some(ch) => ch.frequency_response(cfg.carrier_freq + k as f64 / n as f64),
            None => Complex64::new(1.0, 0.0),
        })
        .collect();
    let scale = 2.0 / (n as f64).sqrt();
    let mut grid = SymbolGrid::zeros(n_symbols, n);
    let mut base = vec![Complex64::default(); n];
    for m in 0..n_symbols {
        for j in cfg.n_cp..n_sym {
            let idx = (first_symbol + m) * n_sym + j;
            base[j % n] = signal[idx] * unit_phasor(cfg.carrier_freq * idx as f64);
        }
        for (&k, g) in cfg.active_carriers.iter().zip(&gains) {
            let mut acc = Complex64::default();
            for (u, &b) in base.iter().enumerate() {
                acc += b * tw[(k * u) % n].conj();
            }
            grid.set(m, k, acc * scale / g);
        }
    }
    Ok(grid)
}

/// Exact periodic autocorrelation of the passband OFDM signal for i.i.d.
/// unit-energy proper symbols. Period `N_sym`, support `|l| < N_sym`.
pub fn analytic_autocorr_ofdm(cfg: &OfdmConfig) -> Result<PeriodicAutocorrelation> {
    cfg.validate()?;
    let n = cfg.n_data;
    let n_sym = cfg.n_sym();
    let rho: Vec<Complex64> = (0..n)
        .map(|l| {
            cfg.active_carriers
                .iter()
                .map(|&k| unit_phasor(-(((k * l) % n) as f64) / n as f64))
                .sum::<Complex64>()
                / n as f64
        })
        .collect();
    PeriodicAutocorrelation::from_fn(n_sym, n_sym, true, |t, l| {
        if t + l >= n_sym {
            return Complex64::default();
        }
        let c = rho[l % n] * unit_phasor(-cfg.carrier_freq * l as f64);
        Complex64::new(0.5 * c.re, 0.0)
    })
}
