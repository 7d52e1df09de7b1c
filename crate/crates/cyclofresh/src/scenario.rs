//! Scenario execution: synthesis, receiver design or adaptation, filtering,
//! demodulation, decoding and metrics for every (SNR, receiver) cell.

use anyhow::{bail, Context};
use cyclofresh_core::adaptive::{run_decision_directed, run_training, AdaptiveChain, LinkSetup};
use cyclofresh_core::channel::{isi_autocorr, IsiChannel};
use cyclofresh_core::design::{DesignContext, DesignInputs, FreshFilterSpec, TwoStageReceiver};
use cyclofresh_core::metrics::{empirical_ta_mse, measured_scaling, noise_gain_for_snr, to_db};
use cyclofresh_core::noise::NoiseModel;
use cyclofresh_core::ofdm::{analytic_autocorr_ofdm, OfdmConfig};
use cyclofresh_core::runtime::{apply_fresh_real, apply_two_stage};
use cyclofresh_core::scaling::scaling_profile;
use cyclofresh_core::signal::{lcm, PeriodicAutocorrelation, SeededRng};
use cyclofresh_core::Averaging;
use rayon::prelude::*;

use crate::config::{Mode, ReceiverKind, ScenarioConfig};
use crate::formats::{MetricRecord, StoredFilter, TrajectoryPoint};

/// Everything about a scenario that does not depend on the SNR.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub cfg: ScenarioConfig,
    pub ofdm: OfdmConfig,
    pub noise: NoiseModel,
    pub channel: Option<IsiChannel>,
    pub link: LinkSetup,
    pub inputs: DesignInputs,
    /// Power of the desired signal at the receiver input.
    pub desired_power: f64,
    /// Noise power before SNR scaling.
    pub unit_noise_power: f64,
    /// Averaging period of the metrics.
    pub period: usize,
    pub warmup: usize,
}

impl Prepared {
    pub fn new(cfg: &ScenarioConfig) -> anyhow::Result<Self> {
        cfg.validate()?;
        let ofdm = cfg.ofdm()?;
        let noise = cfg.noise_model()?;
        let channel = cfg.channel()?;
        let g = &cfg.geometry;
        let c_tx = analytic_autocorr_ofdm(&ofdm)?;
        let c_dd = match &channel {
            Some(ch) => isi_autocorr(ch, &c_tx)?,
            None => c_tx,
        };
        let c_ww = noise.autocorr(g.max_lag() + 1)?;
        let mut inputs = DesignInputs::new(c_dd, c_ww);
        let period = lcm(ofdm.n_sym(), noise.period());
        if cfg.delta.is_some() || cfg.averaging_window.is_some() {
            let samples = cfg.averaging_window.unwrap_or(cfg.budget.samples);
            inputs.averaging = Averaging::Window { samples };
        }
        let link = LinkSetup::new(ofdm.clone(), cfg.codec(), channel.clone());
        Ok(Self {
            desired_power: inputs.c_dd.average_power(),
            unit_noise_power: noise.average_power(),
            warmup: g.warmup(ofdm.n_data),
            cfg: cfg.clone(),
            ofdm,
            noise,
            channel,
            link,
            inputs,
            period,
        })
    }

    pub fn noise_gain(&self, snr_db: f64) -> f64 {
        noise_gain_for_snr(self.desired_power, self.unit_noise_power, snr_db)
    }

    pub fn context(&self, snr_db: f64) -> DesignContext {
        let mut ctx = DesignContext::new(&self.inputs, self.cfg.geometry.max_lag());
        ctx.set_noise_gain(self.noise_gain(snr_db));
        ctx
    }

    /// Designs `receiver` at `snr_db` and returns it with its TA-MSE.
    pub fn design(&self, ctx: &mut DesignContext, receiver: ReceiverKind) -> anyhow::Result<(Option<StoredFilter>, f64)> {
        let g = &self.cfg.geometry;
        let n_sym = self.ofdm.n_sym();
        Ok(match receiver {
            ReceiverKind::Rx1 => (None, ctx.noise_power()),
            ReceiverKind::Rx2 => {
                let d = ctx.design_direct(&g.wiener())?;
                (Some(StoredFilter::Direct(d.filter)), d.ta_mse)
            }
            ReceiverKind::Rx3 => {
                let d = ctx.design_direct(&g.direct(n_sym))?;
                (Some(StoredFilter::Direct(d.filter)), d.ta_mse)
            }
            ReceiverKind::Rx4 => {
                let d = ctx.design_noise_canceller(
                    &g.noise_stage(self.noise.period(), self.cfg.delta),
                    &g.signal_stage(n_sym),
                )?;
                (Some(StoredFilter::TwoStage(d.receiver)), d.ta_mse)
            }
        })
    }

    /// Average conditional gain over one metrics period.
    pub fn scaling_theory(&self, filter: Option<&StoredFilter>) -> anyhow::Result<f64> {
        let Some(f) = filter else { return Ok(1.0) };
        let rx = as_two_stage(f)?;
        let psi = scaling_profile(&rx, &self.inputs.c_dd, self.period)?;
        Ok(psi.iter().map(|v| v.re).sum::<f64>() / psi.len() as f64)
    }

    /// Random record of `codewords` code words at `snr_db`.
    pub fn synthesize(&self, snr_db: f64, codewords: usize, stream: u64) -> anyhow::Result<Record> {
        let k = self.link.codec.info_bits();
        let mut data_rng = SeededRng::new(self.cfg.seed, 2 * stream);
        let mut noise_rng = SeededRng::new(self.cfg.seed, 2 * stream + 1);
        let info = data_rng.bits(codewords * k);
        let tx = self.link.transmit(&info)?;
        let d = match &self.channel {
            Some(ch) => ch.apply(&tx),
            None => tx,
        };
        let amp = self.noise_gain(snr_db).sqrt();
        let w = self.noise.generate(d.len(), &mut noise_rng)?;
        let r = d.iter().zip(&w).map(|(a, b)| a + amp * b).collect();
        Ok(Record { info, d, r })
    }
}

/// Delay-free receivers are two-stage receivers with a zero noise estimator.
fn as_two_stage(f: &StoredFilter) -> anyhow::Result<TwoStageReceiver> {
    Ok(match f {
        StoredFilter::TwoStage(rx) => rx.clone(),
        StoredFilter::Direct(h) => TwoStageReceiver { h1: FreshFilterSpec::zeros(vec![0.0], 1)?, h2: h.clone() },
    })
}

/// Output of `filter` on `r` and its delay.
pub fn apply_stored(filter: Option<&StoredFilter>, r: &[f64]) -> (Vec<f64>, usize) {
    match filter {
        None => (r.to_vec(), 0),
        Some(StoredFilter::Direct(h)) => (apply_fresh_real(h, r), h.delay),
        Some(StoredFilter::TwoStage(rx)) => (apply_two_stage(rx, r).y, rx.delay()),
    }
}

/// Transmitted information, desired signal at the receiver and received
/// signal.
#[derive(Debug, Clone)]
pub struct Record {
    pub info: Vec<u8>,
    pub d: Vec<f64>,
    pub r: Vec<f64>,
}

/// Running bit-error counts.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct BitErrors {
    pub coded_errors: u64,
    pub coded_bits: u64,
    pub raw_errors: u64,
    pub raw_bits: u64,
}

impl BitErrors {
    pub fn coded_rate(&self) -> Option<f64> {
        (self.coded_bits > 0).then(|| self.coded_errors as f64 / self.coded_bits as f64)
    }

    pub fn raw_rate(&self) -> Option<f64> {
        (self.raw_bits > 0).then(|| self.raw_errors as f64 / self.raw_bits as f64)
    }

    fn add(&mut self, o: BitErrors) {
        self.coded_errors += o.coded_errors;
        self.coded_bits += o.coded_bits;
        self.raw_errors += o.raw_errors;
        self.raw_bits += o.raw_bits;
    }
}

/// Demodulates and decodes code words `indices` of the aligned output
/// `y` (`y[n]` estimates `d[n]`).
pub fn count_errors(link: &LinkSetup, y: &[f64], info: &[u8], indices: impl Iterator<Item = usize>) -> anyhow::Result<BitErrors> {
    let k = link.codec.info_bits();
    let bps = link.bits_per_symbol();
    let mut out = BitErrors::default();
    for i in indices {
        let truth = &info[i * k..(i + 1) * k];
        let sent = link.codec.encode_codeword(truth, bps)?;
        let soft = link.soft_values(y, i)?;
        out.raw_errors += sent.iter().zip(&soft).filter(|(b, s)| (**b == 1) != (**s < 0.0)).count() as u64;
        out.raw_bits += sent.len() as u64;
        let dec = link.codec.decode_codeword(&soft, bps)?;
        out.coded_errors += dec.info_bits.iter().zip(truth).filter(|(a, b)| a != b).count() as u64;
        out.coded_bits += k as u64;
    }
    Ok(out)
}

/// Code words of `cw` samples in a record whose first `warmup` samples are
/// unusable and whose aligned output ends at `aligned_len`.
fn decodable(cw: usize, warmup: usize, aligned_len: usize) -> std::ops::Range<usize> {
    warmup.div_ceil(cw)..aligned_len / cw
}

#[derive(Debug, Default)]
struct CellStats {
    mse_sum: f64,
    mse_count: usize,
    scaling_sum: f64,
    scaling_count: usize,
    errors: BitErrors,
}

/// Runs every cell of the scenario. Cells run in parallel; the result is
/// ordered by SNR then receiver. A failing cell is logged and left out.
pub fn run_scenario(cfg: &ScenarioConfig) -> anyhow::Result<Vec<MetricRecord>> {
    let prep = Prepared::new(cfg)?;
    let cells: Vec<(usize, ReceiverKind)> = (0..cfg.snr_grid_db.len())
        .flat_map(|s| cfg.receivers.iter().map(move |&r| (s, r)))
        .collect();
    let results: Vec<Option<MetricRecord>> = cells
        .par_iter()
        .map(|&(s, rx)| {
            let snr = cfg.snr_grid_db[s];
            let res = match cfg.mode {
                Mode::Optimal => run_optimal_cell(&prep, s, rx),
                Mode::Adaptive => run_adaptive_cell(&prep, s, rx).map(|(rec, _)| rec),
            };
            match res {
                Ok(r) => Some(r),
                Err(e) => {
                    log::error!("scenario {} cell {rx} at {snr} dB failed: {e:#}", cfg.id);
                    None
                }
            }
        })
        .collect();
    Ok(results.into_iter().flatten().collect())
}

fn trial_stream(snr_index: usize, trial: usize) -> u64 {
    ((snr_index as u64) << 32) | trial as u64
}

/// Designed receiver measured on `trials` records, with BER records added
/// until the stopping rule is met.
pub fn run_optimal_cell(prep: &Prepared, snr_index: usize, receiver: ReceiverKind) -> anyhow::Result<MetricRecord> {
    let cfg = &prep.cfg;
    let snr = cfg.snr_grid_db[snr_index];
    let mut ctx = prep.context(snr);
    let (filter, theory) = prep.design(&mut ctx, receiver).with_context(|| format!("designing {receiver}"))?;
    drop(ctx);
    let scaling_theory = prep.scaling_theory(filter.as_ref())?;
    let delay = filter.as_ref().map_or(0, stored_delay);
    let cw = prep.link.samples_per_codeword();
    let whole_periods = cfg.budget.samples.div_ceil(prep.period) * prep.period;
    let codewords = (prep.warmup + whole_periods + delay).div_ceil(cw);
    let threshold = cfg.budget.scaling_threshold * prep.desired_power.sqrt();

    let mut stats = CellStats::default();
    let mut trial = 0usize;
    loop {
        let ber_only = trial >= cfg.trials;
        if ber_only && !ber_continue(cfg, &stats.errors) {
            break;
        }
        let rec = prep.synthesize(snr, codewords, trial_stream(snr_index, trial))?;
        let (y, delay) = apply_stored(filter.as_ref(), &rec.r);
        let aligned = &y[delay..];
        let desired = &rec.d[..aligned.len()];
        if !ber_only {
            let end = (prep.warmup + whole_periods).min(aligned.len());
            stats.mse_sum += empirical_ta_mse(&aligned[..end], &desired[..end], prep.warmup, prep.period)?;
            stats.mse_count += 1;
            stats.scaling_sum += measured_scaling(&aligned[..end], &desired[..end], prep.warmup, threshold)?;
            stats.scaling_count += 1;
        }
        if cfg.budget.ber {
            let idx = decodable(cw, prep.warmup, aligned.len());
            if idx.is_empty() {
                bail!("record too short to decode a code word");
            }
            stats.errors.add(count_errors(&prep.link, aligned, &rec.info, idx)?);
        }
        trial += 1;
        if !cfg.budget.ber && trial >= cfg.trials {
            break;
        }
    }
    Ok(MetricRecord {
        scenario_id: cfg.id.clone(),
        receiver: receiver.label().into(),
        snr_in_db: snr,
        ta_mse_db: to_db(stats.mse_sum / stats.mse_count as f64),
        ta_mse_theory_db: Some(to_db(theory)),
        ber_uncoded: stats.errors.raw_rate(),
        ber_coded: stats.errors.coded_rate(),
        scaling_measured: Some(stats.scaling_sum / stats.scaling_count as f64),
        scaling_theory: Some(scaling_theory),
        trials: cfg.trials,
        seed: cfg.seed,
    })
}

fn ber_continue(cfg: &ScenarioConfig, e: &BitErrors) -> bool {
    cfg.budget.ber && (e.coded_errors as usize) < cfg.budget.ber_min_errors && (e.coded_bits as usize) < cfg.budget.ber_max_bits
}

fn stored_delay(f: &StoredFilter) -> usize {
    match f {
        StoredFilter::Direct(h) => h.delay,
        StoredFilter::TwoStage(rx) => rx.delay(),
    }
}

/// Adaptive chain with the receiver's geometry, or `None` for Rx1.
pub fn adaptive_chain(prep: &Prepared, receiver: ReceiverKind) -> anyhow::Result<Option<AdaptiveChain>> {
    let g = &prep.cfg.geometry;
    let rls = prep.cfg.adaptive.rls()?;
    let n_sym = prep.ofdm.n_sym();
    Ok(match receiver {
        ReceiverKind::Rx1 => None,
        ReceiverKind::Rx2 => Some(AdaptiveChain::direct(&g.wiener(), rls)?),
        ReceiverKind::Rx3 => Some(AdaptiveChain::direct(&g.direct(n_sym), rls)?),
        ReceiverKind::Rx4 => Some(AdaptiveChain::two_stage(
            &g.noise_stage(prep.noise.period(), prep.cfg.delta),
            &g.signal_stage(n_sym),
            rls,
        )?),
    })
}

/// Per-code-word TA-MSE and running coded BER of an aligned output.
fn trajectory(
    prep: &Prepared,
    aligned: &[f64],
    rec: &Record,
    preamble: usize,
    flags: &[(bool, bool)],
) -> anyhow::Result<Vec<TrajectoryPoint>> {
    let cw = prep.link.samples_per_codeword();
    let mut total = BitErrors::default();
    let mut out = Vec::new();
    for (i, &(updated, rs_ok)) in flags.iter().enumerate() {
        let (s, e) = (i * cw, (i + 1) * cw);
        if e > aligned.len() {
            break;
        }
        let mse = aligned[s..e].iter().zip(&rec.d[s..e]).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / cw as f64;
        if i >= preamble {
            total.add(count_errors(&prep.link, aligned, &rec.info, i..i + 1)?);
        }
        out.push(TrajectoryPoint {
            codeword: i,
            preamble: i < preamble,
            updated,
            rs_ok,
            ta_mse_db: to_db(mse),
            ber_so_far: total.coded_rate().unwrap_or(0.0),
        });
    }
    Ok(out)
}

/// Decision-directed run (or supervised training when `training` is set)
/// of one receiver at one SNR, returning the aligned output.
pub fn run_adaptive(
    prep: &Prepared,
    snr_index: usize,
    receiver: ReceiverKind,
    training: bool,
) -> anyhow::Result<(Record, Vec<f64>, Vec<TrajectoryPoint>, Option<AdaptiveChain>)> {
    let cfg = &prep.cfg;
    let snr = cfg.snr_grid_db[snr_index];
    let a = &cfg.adaptive;
    let total = a.preamble_codewords + a.codewords + 1;
    let rec = prep.synthesize(snr, total, trial_stream(snr_index, 0))?;
    let k = prep.link.codec.info_bits();
    let cw = prep.link.samples_per_codeword();
    let Some(mut chain) = adaptive_chain(prep, receiver)? else {
        let flags = vec![(false, true); total];
        let traj = trajectory(prep, &rec.r, &rec, a.preamble_codewords, &flags)?;
        let y = rec.r.clone();
        return Ok((rec, y, traj, None));
    };
    let delay = chain.delay();
    let flags: Vec<(bool, bool)> = if training {
        run_training(&mut chain, &rec.r, &rec.d, cw)?;
        vec![(true, true); total]
    } else {
        let recs = run_decision_directed(&mut chain, &rec.r, &prep.link, &rec.info[..a.preamble_codewords * k])?;
        recs.iter().map(|c| (c.updated, c.decode.rs_ok)).collect()
    };
    let aligned = chain.output()[delay..].to_vec();
    let traj = trajectory(prep, &aligned, &rec, a.preamble_codewords, &flags)?;
    Ok((rec, aligned, traj, Some(chain)))
}

/// Decision-directed cell: metrics over the code words after the preamble.
pub fn run_adaptive_cell(
    prep: &Prepared,
    snr_index: usize,
    receiver: ReceiverKind,
) -> anyhow::Result<(MetricRecord, Vec<TrajectoryPoint>)> {
    let cfg = &prep.cfg;
    let snr = cfg.snr_grid_db[snr_index];
    let (rec, aligned, traj, _) = run_adaptive(prep, snr_index, receiver, false)?;
    let cw = prep.link.samples_per_codeword();
    let first = cfg.adaptive.preamble_codewords;
    let last = (aligned.len() / cw).min(first + cfg.adaptive.codewords);
    if last <= first {
        bail!("no code words after the preamble");
    }
    let (s, e) = (first * cw, last * cw);
    let mse = aligned[s..e].iter().zip(&rec.d[s..e]).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / (e - s) as f64;
    let errors = count_errors(&prep.link, &aligned, &rec.info, first..last)?;
    let threshold = cfg.budget.scaling_threshold * prep.desired_power.sqrt();
    let mut ctx = prep.context(snr);
    let (_, theory) = prep.design(&mut ctx, receiver)?;
    Ok((
        MetricRecord {
            scenario_id: cfg.id.clone(),
            receiver: receiver.label().into(),
            snr_in_db: snr,
            ta_mse_db: to_db(mse),
            ta_mse_theory_db: Some(to_db(theory)),
            ber_uncoded: errors.raw_rate(),
            ber_coded: errors.coded_rate(),
            scaling_measured: Some(measured_scaling(&aligned[s..e], &rec.d[s..e], 0, threshold)?),
            scaling_theory: None,
            trials: 1,
            seed: cfg.seed,
        },
        traj,
    ))
}

/// Designed filters for every receiver at one SNR.
pub fn design_all(prep: &Prepared, snr_db: f64, receivers: &[ReceiverKind]) -> anyhow::Result<Vec<(ReceiverKind, Option<StoredFilter>, f64)>> {
    let mut ctx = prep.context(snr_db);
    receivers
        .iter()
        .map(|&r| {
            let (f, mse) = prep.design(&mut ctx, r)?;
            Ok((r, f, mse))
        })
        .collect()
}

/// Autocorrelation of the desired signal at the receiver input.
pub fn desired_autocorr(prep: &Prepared) -> &PeriodicAutocorrelation {
    &prep.inputs.c_dd
}
