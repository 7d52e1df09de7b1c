//! Scenario files.
//!
//! A scenario is a TOML document. Every section except `noise` and the SNR
//! grid has defaults, so a minimal file reads
//!
//! ```toml
//! id = "kata2"
//! snr_grid_db = [-4, -2, 0, 2, 4, 6]
//! [noise]
//! model = "kata2"
//! ```

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{bail, Context};
use cyclofresh_core::channel::IsiChannel;
use cyclofresh_core::design::{symmetric_freqs, with_cyclic_freq_error, FilterShape};
use cyclofresh_core::fec::{CodecConfig, Decision};
use cyclofresh_core::noise::{AwgnParams, KatayamaParams, LptvParams, NoiseModel};
use cyclofresh_core::ofdm::OfdmConfig;
use cyclofresh_core::rls::RlsConfig;
use serde::{Deserialize, Serialize};

use crate::formats::read_lptv_file;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReceiverKind {
    /// No filtering.
    Rx1,
    /// Stationary Wiener filter.
    Rx2,
    /// FRESH filter extracting the signal directly.
    Rx3,
    /// Noise-cancelling FRESH pair.
    Rx4,
}

impl ReceiverKind {
    pub const ALL: [ReceiverKind; 4] = [ReceiverKind::Rx1, ReceiverKind::Rx2, ReceiverKind::Rx3, ReceiverKind::Rx4];

    pub fn label(self) -> &'static str {
        match self {
            ReceiverKind::Rx1 => "rx1",
            ReceiverKind::Rx2 => "rx2",
            ReceiverKind::Rx3 => "rx3",
            ReceiverKind::Rx4 => "rx4",
        }
    }
}

impl fmt::Display for ReceiverKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for ReceiverKind {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> anyhow::Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "rx1" => Ok(ReceiverKind::Rx1),
            "rx2" => Ok(ReceiverKind::Rx2),
            "rx3" => Ok(ReceiverKind::Rx3),
            "rx4" => Ok(ReceiverKind::Rx4),
            other => bail!("unknown receiver `{other}` (expected rx1..rx4)"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// Filters designed from the model statistics.
    #[default]
    Optimal,
    /// Decision-directed RLS after a known preamble.
    Adaptive,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NoiseKind {
    Kata1,
    Kata2,
    Lptv,
    Awgn,
}

impl FromStr for NoiseKind {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> anyhow::Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "kata1" => Ok(NoiseKind::Kata1),
            "kata2" => Ok(NoiseKind::Kata2),
            "lptv" => Ok(NoiseKind::Lptv),
            "awgn" => Ok(NoiseKind::Awgn),
            other => bail!("unknown noise model `{other}`"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSection {
    pub model: NoiseKind,
    /// LPTV parameter file; the built-in stand-in is used when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lptv_file: Option<PathBuf>,
}

impl NoiseSection {
    /// Resolves the model; relative LPTV paths are taken from `base`.
    pub fn model(&self, base: &Path) -> anyhow::Result<NoiseModel> {
        Ok(match self.model {
            NoiseKind::Kata1 => NoiseModel::Katayama(KatayamaParams::kata1()),
            NoiseKind::Kata2 => NoiseModel::Katayama(KatayamaParams::kata2()),
            NoiseKind::Awgn => NoiseModel::Awgn(AwgnParams { variance: 1.0 }),
            NoiseKind::Lptv => match &self.lptv_file {
                Some(p) => NoiseModel::Lptv(read_lptv_file(&base.join(p))?),
                None => NoiseModel::Lptv(LptvParams::standin()),
            },
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OfdmSection {
    pub n_data: usize,
    pub n_cp: usize,
    pub carrier_freq: f64,
    pub active_carriers: Vec<usize>,
}

impl Default for OfdmSection {
    fn default() -> Self {
        let c = OfdmConfig::default();
        Self { n_data: c.n_data, n_cp: c.n_cp, carrier_freq: c.carrier_freq, active_carriers: c.active_carriers }
    }
}

impl OfdmSection {
    pub fn config(&self) -> anyhow::Result<OfdmConfig> {
        let cfg = OfdmConfig {
            n_data: self.n_data,
            n_cp: self.n_cp,
            active_carriers: self.active_carriers.clone(),
            carrier_freq: self.carrier_freq,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelSection {
    pub taps: Vec<f64>,
}

/// Branch counts, tap budgets and target delays of Rx2-Rx4.
///
/// Rx2 and Rx3 use `direct_len` taps with target delay `direct_delay`. Rx4
/// uses `noise_len` taps delayed by `noise_delay` for the noise estimator
/// and `signal_len` taps delayed by `signal_delay` for the signal
/// extractor. Signal branches sit at `k / N_sym`, noise branches at
/// `k / N_noise` with `k` symmetric around 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Geometry {
    pub signal_branches: usize,
    pub noise_branches: usize,
    pub direct_len: usize,
    pub direct_delay: usize,
    pub noise_len: usize,
    pub noise_delay: usize,
    pub signal_len: usize,
    pub signal_delay: usize,
    /// Noise-branch period used when the noise is stationary.
    pub stationary_noise_period: usize,
}

impl Default for Geometry {
    fn default() -> Self {
        Self::for_periods(80, 64, 1000)
    }
}

impl Geometry {
    /// `N_noise / 2` taps for the noise estimator, targeting the middle of
    /// its window. The signal stage spans `2 N_data + 1` taps centred on its
    /// target so it sees the prefix copy on either side. The single-stage
    /// receivers get `N_sym + N_noise / 2` taps and the same total delay as
    /// Rx4.
    pub fn for_periods(n_sym: usize, n_data: usize, n_noise: usize) -> Self {
        let noise_len = n_noise / 2;
        let noise_delay = noise_len / 2;
        let signal_delay = n_data;
        Self {
            signal_branches: 5,
            noise_branches: 5,
            direct_len: n_sym + noise_len,
            direct_delay: noise_delay + signal_delay,
            noise_len,
            noise_delay,
            signal_len: 2 * n_data + 1,
            signal_delay,
            stationary_noise_period: n_noise,
        }
    }

    pub fn signal_freqs(&self, n_sym: usize) -> Vec<f64> {
        symmetric_freqs(self.signal_branches, n_sym)
    }

    /// Noise branches, with the receiver's belief about the period off by a
    /// factor `1 + delta`.
    pub fn noise_freqs(&self, noise_period: usize, delta: Option<f64>) -> Vec<f64> {
        let period = if noise_period <= 1 { self.stationary_noise_period } else { noise_period };
        let f = symmetric_freqs(self.noise_branches, period);
        match delta {
            Some(d) if d != 0.0 => with_cyclic_freq_error(&f, period, d),
            _ => f,
        }
    }

    pub fn wiener(&self) -> FilterShape {
        FilterShape::new(vec![0.0], self.direct_len, self.direct_delay)
    }

    pub fn direct(&self, n_sym: usize) -> FilterShape {
        FilterShape::new(self.signal_freqs(n_sym), self.direct_len, self.direct_delay)
    }

    pub fn noise_stage(&self, noise_period: usize, delta: Option<f64>) -> FilterShape {
        FilterShape::new(self.noise_freqs(noise_period, delta), self.noise_len, self.noise_delay)
    }

    pub fn signal_stage(&self, n_sym: usize) -> FilterShape {
        FilterShape::new(self.signal_freqs(n_sym), self.signal_len, self.signal_delay)
    }

    /// Largest lag any design needs.
    pub fn max_lag(&self) -> usize {
        let two = self.noise_len + self.signal_len - 2;
        two.max(self.direct_len - 1)
    }

    /// Samples at the start of a record excluded from metrics.
    pub fn warmup(&self, n_data: usize) -> usize {
        (self.noise_len + self.signal_len).max(self.direct_len).max(n_data)
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        if self.signal_branches == 0 || self.noise_branches == 0 {
            bail!("receivers need at least one branch");
        }
        if self.direct_delay >= self.direct_len
            || self.noise_delay >= self.noise_len
            || self.signal_delay >= self.signal_len
        {
            bail!("every target delay must be shorter than its filter");
        }
        if self.noise_delay + self.signal_delay != self.direct_delay {
            log::warn!("Rx4 and the single-stage receivers have different delays");
        }
        Ok(())
    }
}

/// Monte-Carlo budget per cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Budget {
    /// Post-warm-up samples per trial for TA-MSE.
    pub samples: usize,
    /// Measure BER as well as TA-MSE.
    pub ber: bool,
    /// BER runs stop after this many coded bit errors ...
    pub ber_min_errors: usize,
    /// ... or this many information bits.
    pub ber_max_bits: usize,
    /// Samples with `|d| <=` this fraction of the signal RMS are left out of
    /// the measured scaling.
    pub scaling_threshold: f64,
}

impl Default for Budget {
    fn default() -> Self {
        Self { samples: 200_000, ber: false, ber_min_errors: 100, ber_max_bits: 20_000_000, scaling_threshold: 0.5 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AdaptiveSection {
    pub lambda: f64,
    pub p0_scale: f64,
    pub preamble_codewords: usize,
    pub codewords: usize,
}

impl Default for AdaptiveSection {
    fn default() -> Self {
        let r = RlsConfig::default();
        Self { lambda: r.lambda, p0_scale: r.p0_scale, preamble_codewords: 4, codewords: 40 }
    }
}

impl AdaptiveSection {
    pub fn rls(&self) -> anyhow::Result<RlsConfig> {
        let cfg = RlsConfig { lambda: self.lambda, p0_scale: self.p0_scale };
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DecisionKind {
    #[default]
    Soft,
    Hard,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub id: String,
    pub snr_grid_db: Vec<f64>,
    pub noise: NoiseSection,
    #[serde(default = "all_receivers")]
    pub receivers: Vec<ReceiverKind>,
    #[serde(default = "one")]
    pub trials: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub mode: Mode,
    /// Relative error in the noise period assumed by Rx4.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    /// Finite averaging window for designs with mismatched frequencies;
    /// defaults to the TA-MSE record length when `delta` is set.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub averaging_window: Option<usize>,
    #[serde(default)]
    pub decision: DecisionKind,
    #[serde(default)]
    pub ofdm: OfdmSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub channel: Option<ChannelSection>,
    #[serde(default)]
    pub geometry: Geometry,
    #[serde(default)]
    pub budget: Budget,
    #[serde(default)]
    pub adaptive: AdaptiveSection,
    /// Directory relative paths are resolved against.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

fn all_receivers() -> Vec<ReceiverKind> {
    ReceiverKind::ALL.to_vec()
}

fn one() -> usize {
    1
}

impl ScenarioConfig {
    /// Minimal scenario with every default.
    pub fn new(id: &str, noise: NoiseKind, snr_grid_db: Vec<f64>) -> Self {
        Self {
            id: id.into(),
            snr_grid_db,
            noise: NoiseSection { model: noise, lptv_file: None },
            receivers: all_receivers(),
            trials: 1,
            seed: 0,
            mode: Mode::Optimal,
            delta: None,
            averaging_window: None,
            decision: DecisionKind::Soft,
            ofdm: OfdmSection::default(),
            channel: None,
            geometry: Geometry::default(),
            budget: Budget::default(),
            adaptive: AdaptiveSection::default(),
            base_dir: PathBuf::new(),
        }
    }

    pub fn from_toml(text: &str) -> anyhow::Result<Self> {
        let cfg: Self = toml::from_str(text).context("parsing scenario")?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let mut cfg = Self::from_toml(&text).with_context(|| format!("in {}", path.display()))?;
        cfg.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(cfg)
    }

    pub fn to_toml(&self) -> anyhow::Result<String> {
        Ok(toml::to_string_pretty(self)?)
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        if self.trials == 0 {
            bail!("trials must be at least 1");
        }
        if self.snr_grid_db.is_empty() {
            bail!("SNR grid is empty");
        }
        if self.snr_grid_db.iter().any(|s| !s.is_finite()) {
            bail!("SNR grid values must be finite");
        }
        if self.receivers.is_empty() {
            bail!("no receivers selected");
        }
        if self.budget.samples == 0 {
            bail!("sample budget must be positive");
        }
        if let Some(d) = self.delta {
            if !d.is_finite() || d <= -1.0 {
                bail!("delta must be finite and above -1");
            }
        }
        if self.mode == Mode::Adaptive && self.adaptive.preamble_codewords == 0 {
            bail!("adaptive runs need at least one preamble code word");
        }
        self.ofdm.config()?;
        self.channel()?;
        self.geometry.validate()?;
        Ok(())
    }

    pub fn ofdm(&self) -> anyhow::Result<OfdmConfig> {
        self.ofdm.config()
    }

    pub fn noise_model(&self) -> anyhow::Result<NoiseModel> {
        self.noise.model(&self.base_dir)
    }

    pub fn channel(&self) -> anyhow::Result<Option<IsiChannel>> {
        self.channel.as_ref().map(|c| IsiChannel::new(c.taps.clone()).map_err(Into::into)).transpose()
    }

    pub fn codec(&self) -> CodecConfig {
        let decision = match self.decision {
            DecisionKind::Soft => Decision::Soft,
            DecisionKind::Hard => Decision::Hard,
        };
        CodecConfig { decision, ..CodecConfig::default() }
    }
}
