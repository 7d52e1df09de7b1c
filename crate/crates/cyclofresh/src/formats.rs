//! File formats.
//!
//! Filter files are TOML with one `[[stage]]` table per filter (one for a
//! single-stage receiver, noise estimator then signal extractor for a
//! two-stage one):
//!
//! ```toml
//! receiver = "rx4"
//! [[stage]]
//! role = "noise"
//! fir_len = 500
//! delay = 250
//! freqs = [-0.002, -0.001, 0.0, 0.001, 0.002]
//! # branch-major, interleaved re/im: re(h_0[0]), im(h_0[0]), re(h_0[1]), ...
//! coeffs = [ ... ]
//! ```
//!
//! LPTV parameter files are TOML too:
//!
//! ```toml
//! period = 1000
//! [[interval]]
//! start = 0
//! taps = [0.3, 0.15]
//! [[interval]]
//! start = 300
//! taps = [1.5, -0.9, 0.4]
//! ```
//!
//! Metric records, adaptive trajectories and noise records are CSV with a
//! single header row, UTF-8 and LF line endings.

use std::io::Write;
use std::path::Path;

use anyhow::{bail, Context};
use cyclofresh_core::design::{FreshFilterSpec, TwoStageReceiver};
use cyclofresh_core::noise::{LptvInterval, LptvParams};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

/// A designed receiver as stored in a filter file.
#[derive(Debug, Clone, PartialEq)]
pub enum StoredFilter {
    Direct(FreshFilterSpec),
    TwoStage(TwoStageReceiver),
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FilterFile {
    receiver: String,
    #[serde(rename = "stage")]
    stages: Vec<StageRecord>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct StageRecord {
    role: String,
    fir_len: usize,
    delay: usize,
    freqs: Vec<f64>,
    coeffs: Vec<f64>,
}

impl StageRecord {
    fn from_spec(role: &str, f: &FreshFilterSpec) -> Self {
        Self {
            role: role.into(),
            fir_len: f.fir_len,
            delay: f.delay,
            freqs: f.freqs.clone(),
            coeffs: f.coeffs.iter().flat_map(|c| [c.re, c.im]).collect(),
        }
    }

    fn spec(&self) -> anyhow::Result<FreshFilterSpec> {
        if self.coeffs.len() % 2 != 0 {
            bail!("stage `{}` has an odd number of coefficient values", self.role);
        }
        let coeffs = self.coeffs.chunks(2).map(|c| Complex64::new(c[0], c[1])).collect();
        Ok(FreshFilterSpec::new(self.freqs.clone(), self.fir_len, coeffs)?.with_delay(self.delay)?)
    }
}

pub fn filter_to_toml(receiver: &str, filter: &StoredFilter) -> anyhow::Result<String> {
    let stages = match filter {
        StoredFilter::Direct(f) => vec![StageRecord::from_spec("signal", f)],
        StoredFilter::TwoStage(rx) => {
            vec![StageRecord::from_spec("noise", &rx.h1), StageRecord::from_spec("signal", &rx.h2)]
        }
    };
    Ok(toml::to_string(&FilterFile { receiver: receiver.into(), stages })?)
}

/// Receiver label and filter.
pub fn filter_from_toml(text: &str) -> anyhow::Result<(String, StoredFilter)> {
    let file: FilterFile = toml::from_str(text).context("parsing filter file")?;
    let roles: Vec<&str> = file.stages.iter().map(|s| s.role.as_str()).collect();
    let filter = match roles.as_slice() {
        ["signal"] => StoredFilter::Direct(file.stages[0].spec()?),
        ["noise", "signal"] => StoredFilter::TwoStage(TwoStageReceiver {
            h1: file.stages[0].spec()?,
            h2: file.stages[1].spec()?,
        }),
        other => bail!("expected stages [signal] or [noise, signal], found {other:?}"),
    };
    Ok((file.receiver, filter))
}

pub fn write_filter_file(path: &Path, receiver: &str, filter: &StoredFilter) -> anyhow::Result<()> {
    std::fs::write(path, filter_to_toml(receiver, filter)?).with_context(|| format!("writing {}", path.display()))
}

pub fn read_filter_file(path: &Path) -> anyhow::Result<(String, StoredFilter)> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    filter_from_toml(&text).with_context(|| format!("in {}", path.display()))
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LptvFile {
    period: usize,
    #[serde(rename = "interval")]
    intervals: Vec<IntervalRecord>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct IntervalRecord {
    start: usize,
    taps: Vec<f64>,
}

pub fn lptv_to_toml(p: &LptvParams) -> anyhow::Result<String> {
    let file = LptvFile {
        period: p.period,
        intervals: p.intervals.iter().map(|i| IntervalRecord { start: i.start, taps: i.taps.clone() }).collect(),
    };
    Ok(toml::to_string(&file)?)
}

pub fn lptv_from_toml(text: &str) -> anyhow::Result<LptvParams> {
    let file: LptvFile = toml::from_str(text).context("parsing LPTV parameters")?;
    let p = LptvParams {
        period: file.period,
        intervals: file.intervals.into_iter().map(|i| LptvInterval { start: i.start, taps: i.taps }).collect(),
    };
    p.validate()?;
    Ok(p)
}

pub fn read_lptv_file(path: &Path) -> anyhow::Result<LptvParams> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    lptv_from_toml(&text).with_context(|| format!("in {}", path.display()))
}

/// One (scenario, receiver, SNR) cell. Field order is the CSV column order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRecord {
    pub scenario_id: String,
    pub receiver: String,
    pub snr_in_db: f64,
    pub ta_mse_db: f64,
    pub ta_mse_theory_db: Option<f64>,
    pub ber_uncoded: Option<f64>,
    pub ber_coded: Option<f64>,
    pub scaling_measured: Option<f64>,
    pub scaling_theory: Option<f64>,
    pub trials: usize,
    pub seed: u64,
}

pub const METRIC_COLUMNS: [&str; 11] = [
    "scenario_id",
    "receiver",
    "snr_in_db",
    "ta_mse_db",
    "ta_mse_theory_db",
    "ber_uncoded",
    "ber_coded",
    "scaling_measured",
    "scaling_theory",
    "trials",
    "seed",
];

fn csv_writer<W: Write>(out: W) -> csv::Writer<W> {
    csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out)
}

/// Writes records with one header row. The header is written even when
/// there are no records.
pub fn write_records<W: Write, T: Serialize>(out: W, header: &[&str], records: &[T]) -> anyhow::Result<()> {
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out);
    w.write_record(header)?;
    for r in records {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_metrics<W: Write>(out: W, records: &[MetricRecord]) -> anyhow::Result<()> {
    write_records(out, &METRIC_COLUMNS, records)
}

pub fn read_metrics<R: std::io::Read>(input: R) -> anyhow::Result<Vec<MetricRecord>> {
    let mut r = csv::Reader::from_reader(input);
    let header: Vec<String> = r.headers()?.iter().map(String::from).collect();
    if header != METRIC_COLUMNS {
        bail!("unexpected metric columns {header:?}");
    }
    r.deserialize().map(|row| row.map_err(Into::into)).collect()
}

/// One code word of an adaptive run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryPoint {
    pub codeword: usize,
    pub preamble: bool,
    pub updated: bool,
    pub rs_ok: bool,
    pub ta_mse_db: f64,
    pub ber_so_far: f64,
}

pub const TRAJECTORY_COLUMNS: [&str; 6] = ["codeword", "preamble", "updated", "rs_ok", "ta_mse_db", "ber_so_far"];

pub fn write_trajectory<W: Write>(out: W, points: &[TrajectoryPoint]) -> anyhow::Result<()> {
    write_records(out, &TRAJECTORY_COLUMNS, points)
}

/// Noise record as `n,w` rows.
pub fn write_samples<W: Write>(out: W, samples: &[f64]) -> anyhow::Result<()> {
    let mut w = csv_writer(out);
    w.write_record(["n", "w"])?;
    for (n, v) in samples.iter().enumerate() {
        w.write_record([n.to_string(), v.to_string()])?;
    }
    w.flush()?;
    Ok(())
}
