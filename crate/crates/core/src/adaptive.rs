//! Adaptive receivers: supervised acquisition on a known reference and
//! decision-directed tracking that rebuilds the reference from decoded
//! code words. Coefficients change only at block boundaries.

use alloc::vec::Vec;

use crate::channel::IsiChannel;
use crate::design::{FilterShape, FreshFilterSpec, TwoStageReceiver};
use crate::fec::{CodecConfig, CodewordDecode};
use crate::ofdm::{demodulate_range, modulate_from, Constellation, OfdmConfig, SymbolGrid};
use crate::rls::{BlockRls, RlsConfig};
use crate::runtime::apply_fresh_real_block;
use crate::{Error, Result};

#[derive(Debug, Clone)]
enum Stages {
    Direct(BlockRls),
    TwoStage { noise: BlockRls, signal: BlockRls },
}

/// A single FRESH filter or a noise-cancelling pair, adapted block by block.
/// Output sample `n` estimates `d[n - delay()]`.
#[derive(Debug, Clone)]
pub struct AdaptiveChain {
    stages: Stages,
    /// Delayed input with the noise estimate removed (two-stage only).
    cleaned: Vec<f64>,
    output: Vec<f64>,
}

fn at(x: &[f64], n: i64) -> f64 {
    if n < 0 {
        0.0
    } else {
        x[n as usize]
    }
}

impl AdaptiveChain {
    pub fn direct(shape: &FilterShape, cfg: RlsConfig) -> Result<Self> {
        Ok(Self { stages: Stages::Direct(BlockRls::new(shape, cfg)?), cleaned: Vec::new(), output: Vec::new() })
    }

    /// The noise estimator starts at zero, the signal extractor as a
    /// pass-through.
    pub fn two_stage(noise: &FilterShape, signal: &FilterShape, cfg: RlsConfig) -> Result<Self> {
        let zero = FreshFilterSpec::zeros(noise.freqs.clone(), noise.fir_len)?.with_delay(noise.delay)?;
        let noise = BlockRls::with_initial(zero, cfg)?;
        let signal = BlockRls::new(signal, cfg)?;
        Ok(Self { stages: Stages::TwoStage { noise, signal }, cleaned: Vec::new(), output: Vec::new() })
    }

    /// Lag of the output behind the input.
    pub fn delay(&self) -> usize {
        match &self.stages {
            Stages::Direct(f) => f.delay(),
            Stages::TwoStage { noise, signal } => noise.delay() + signal.delay(),
        }
    }

    /// Samples filtered so far.
    pub fn processed(&self) -> usize {
        self.output.len()
    }

    pub fn output(&self) -> &[f64] {
        &self.output
    }

    pub fn direct_filter(&self) -> Option<FreshFilterSpec> {
        match &self.stages {
            Stages::Direct(f) => Some(f.filter()),
            Stages::TwoStage { .. } => None,
        }
    }

    pub fn two_stage_receiver(&self) -> Option<TwoStageReceiver> {
        match &self.stages {
            Stages::Direct(_) => None,
            Stages::TwoStage { noise, signal } => Some(TwoStageReceiver { h1: noise.filter(), h2: signal.filter() }),
        }
    }

    /// Filters `r[processed()..end]` with the current coefficients and
    /// returns the new output samples.
    pub fn filter_block(&mut self, r: &[f64], end: usize) -> Result<&[f64]> {
        let start = self.processed();
        if end < start || end > r.len() {
            return Err(Error::Shape("block end outside the received record".into()));
        }
        match &self.stages {
            Stages::Direct(f) => {
                let y = apply_fresh_real_block(&f.filter(), r, start, end);
                self.output.extend(y);
            }
            Stages::TwoStage { noise, signal } => {
                let w_hat = apply_fresh_real_block(&noise.filter(), r, start, end);
                let d1 = noise.delay() as i64;
                self.cleaned.extend((start..end).zip(&w_hat).map(|(n, w)| at(r, n as i64 - d1) - w));
                let y = apply_fresh_real_block(&signal.filter(), &self.cleaned, start, end);
                self.output.extend(y);
            }
        }
        Ok(&self.output[start..end])
    }

    /// Adapts on output samples `start..end`, already filtered, toward the
    /// desired record `desired` (indexed like `r`, zero before 0).
    pub fn adapt(&mut self, r: &[f64], desired: &[f64], start: usize, end: usize) -> Result<()> {
        if end > self.processed() {
            return Err(Error::Shape("cannot adapt on samples that were not filtered yet".into()));
        }
        let delay = self.delay();
        if desired.len() < end.saturating_sub(delay) {
            return Err(Error::Shape("desired record ends before the block target".into()));
        }
        let target = |n: usize, lag: usize| at(desired, n as i64 - lag as i64);
        match &mut self.stages {
            Stages::Direct(f) => {
                let reference: Vec<f64> = (start..end).map(|n| target(n, delay)).collect();
                f.update(r, &reference, start, end)
            }
            Stages::TwoStage { noise, signal } => {
                // The noise estimate for desired sample m is output m + d1 of
                // the first stage, so its block sits d2 samples earlier.
                let d1 = noise.delay();
                let d2 = delay - d1;
                let (s1, e1) = (start.saturating_sub(d2), end.saturating_sub(d2));
                let noise_ref: Vec<f64> = (s1..e1).map(|n| at(r, n as i64 - d1 as i64) - target(n, d1)).collect();
                noise.update(r, &noise_ref, s1, e1)?;
                let reference: Vec<f64> = (start..end).map(|n| target(n, delay)).collect();
                signal.update(&self.cleaned, &reference, start, end)
            }
        }
    }
}

/// Output MSE of one block before its update.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainingPoint {
    pub block: usize,
    pub end: usize,
    pub mse: f64,
}

/// Supervised adaptation with the error-free desired signal `d`, updating
/// every `cadence` samples. Block errors compare `y[n]` with `d[n - delay]`.
pub fn run_training(chain: &mut AdaptiveChain, r: &[f64], d: &[f64], cadence: usize) -> Result<Vec<TrainingPoint>> {
    if r.len() != d.len() {
        return Err(Error::Shape("received and reference records differ in length".into()));
    }
    if cadence == 0 {
        return Err(Error::Config("update cadence must be positive".into()));
    }
    let delay = chain.delay() as i64;
    let mut points = Vec::new();
    let mut start = chain.processed();
    while start < r.len() {
        let end = (start + cadence).min(r.len());
        let y = chain.filter_block(r, end)?;
        let mse = y
            .iter()
            .enumerate()
            .map(|(i, a)| {
                let e = a - at(d, (start + i) as i64 - delay);
                e * e
            })
            .sum::<f64>()
            / (end - start) as f64;
        chain.adapt(r, d, start, end)?;
        points.push(TrainingPoint { block: points.len(), end, mse });
        start = end;
    }
    Ok(points)
}

/// Transmission layout shared by transmitter and decision-directed receiver.
#[derive(Debug, Clone)]
pub struct LinkSetup {
    pub ofdm: OfdmConfig,
    pub constellation: Constellation,
    pub codec: CodecConfig,
    pub channel: Option<IsiChannel>,
}

impl LinkSetup {
    pub fn new(ofdm: OfdmConfig, codec: CodecConfig, channel: Option<IsiChannel>) -> Self {
        Self { ofdm, constellation: Constellation::qpsk(), codec, channel }
    }

    pub fn bits_per_symbol(&self) -> usize {
        self.ofdm.active_carriers.len() * self.constellation.bits_per_point()
    }

    pub fn symbols_per_codeword(&self) -> usize {
        self.codec.padded_bits(self.bits_per_symbol()) / self.bits_per_symbol()
    }

    pub fn samples_per_codeword(&self) -> usize {
        self.symbols_per_codeword() * self.ofdm.n_sym()
    }

    /// Clean passband signal (before any channel) for code word `index`
    /// carrying `info_bits`.
    pub fn modulate_codeword(&self, index: usize, info_bits: &[u8]) -> Result<Vec<f64>> {
        let coded = self.codec.encode_codeword(info_bits, self.bits_per_symbol())?;
        let grid = SymbolGrid::from_bits(&self.ofdm, &self.constellation, &coded)?;
        modulate_from(&self.ofdm, &grid, index * self.symbols_per_codeword())
    }

    /// Transmitted signal for consecutive code words.
    pub fn transmit(&self, info_bits: &[u8]) -> Result<Vec<f64>> {
        let k = self.codec.info_bits();
        if info_bits.len() % k != 0 {
            return Err(Error::Framing("information bits must fill whole code words".into()));
        }
        let mut out = Vec::with_capacity(info_bits.len() / k * self.samples_per_codeword());
        for (i, chunk) in info_bits.chunks(k).enumerate() {
            out.extend(self.modulate_codeword(i, chunk)?);
        }
        Ok(out)
    }

    /// Channel soft values for code word `index` of the filtered record `y`.
    pub fn soft_values(&self, y: &[f64], index: usize) -> Result<Vec<f64>> {
        let grid = demodulate_range(
            &self.ofdm,
            y,
            index * self.symbols_per_codeword(),
            self.symbols_per_codeword(),
            self.channel.as_ref(),
        )?;
        Ok(self.constellation.soft_bits(&grid.active_values(&self.ofdm)))
    }

    pub fn decode(&self, y: &[f64], index: usize) -> Result<CodewordDecode> {
        self.codec.decode_codeword(&self.soft_values(y, index)?, self.bits_per_symbol())
    }
}

/// Outcome of one code word in a decision-directed run.
#[derive(Debug, Clone, PartialEq)]
pub struct CodewordRecord {
    pub index: usize,
    pub preamble: bool,
    pub decode: CodewordDecode,
    /// False when the update was skipped after an RS failure.
    pub updated: bool,
}

/// Filters code word by code word. The first `preamble_info.len() / k`
/// code words adapt on the known preamble; afterwards each decoded code
/// word is re-encoded and re-modulated into the reference. Code words whose
/// RS decoding fails do not update the filters. A code word is decoded once
/// the output covers it, `delay` samples after it ends in `r`, so `r`
/// should run at least that far past the last code word.
pub fn run_decision_directed(
    chain: &mut AdaptiveChain,
    r: &[f64],
    link: &LinkSetup,
    preamble_info: &[u8],
) -> Result<Vec<CodewordRecord>> {
    let k = link.codec.info_bits();
    if preamble_info.is_empty() || preamble_info.len() % k != 0 {
        return Err(Error::Framing("preamble must hold at least one whole code word".into()));
    }
    if chain.processed() != 0 {
        return Err(Error::Config("decision-directed run needs a fresh chain".into()));
    }
    let preamble = preamble_info.len() / k;
    let cw = link.samples_per_codeword();
    let delay = chain.delay();
    let count = r.len().saturating_sub(delay) / cw;
    let span = link.channel.as_ref().map_or(1, |c| c.taps().len());
    let mut clean: Vec<f64> = Vec::with_capacity(count * cw);
    let mut desired: Vec<f64> = Vec::with_capacity(count * cw);
    let mut records = Vec::with_capacity(count);
    for index in 0..count {
        let (start, end) = (index * cw, (index + 1) * cw);
        chain.filter_block(r, end + delay)?;
        let decode = link.decode(&chain.output()[delay..], index)?;
        let is_preamble = index < preamble;
        let info: &[u8] = if is_preamble { &preamble_info[index * k..(index + 1) * k] } else { &decode.info_bits };
        clean.extend(link.modulate_codeword(index, info)?);
        match &link.channel {
            Some(ch) => {
                let from = start.saturating_sub(span - 1);
                desired.extend_from_slice(&ch.apply(&clean[from..end])[start - from..]);
            }
            None => desired.extend_from_slice(&clean[start..end]),
        }
        let update = is_preamble || decode.rs_ok;
        if update {
            chain.adapt(r, &desired, start + delay, end + delay)?;
        }
        records.push(CodewordRecord { index, preamble: is_preamble, decode, updated: update });
    }
    Ok(records)
}
