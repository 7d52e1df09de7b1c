use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use clap::{Parser, Subcommand};
use cyclofresh::config::{NoiseKind, NoiseSection, ReceiverKind, ScenarioConfig};
use cyclofresh::formats::{write_filter_file, write_metrics, write_samples, write_trajectory};
use cyclofresh::scenario::{design_all, run_adaptive, run_scenario, Prepared};
use cyclofresh_core::signal::SeededRng;

#[derive(Parser, Debug)]
#[command(name = "cyclofresh", version, about = "FRESH-filter OFDM receivers over power-line noise")]
struct Cli {
    /// Worker threads for parallel sweeps (0 = all cores).
    #[arg(long, global = true, env = "CYCLOFRESH_THREADS", default_value_t = 0)]
    threads: usize,
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Design receivers at one SNR and write filter files.
    Design {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long, allow_hyphen_values = true)]
        snr: f64,
        /// Receivers to design (default: those of the scenario).
        #[arg(long, value_delimiter = ',')]
        receivers: Vec<ReceiverKind>,
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
    },
    /// Run one scenario and write its metrics CSV.
    Simulate {
        #[arg(long)]
        scenario: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
        /// Output file; standard output when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run several scenarios, one CSV each.
    Sweep {
        #[arg(required = true)]
        scenarios: Vec<PathBuf>,
        #[command(flatten)]
        overrides: Overrides,
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
    },
    /// Adaptive run of one receiver; writes the per-code-word trajectory.
    Adapt {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long, allow_hyphen_values = true)]
        snr: f64,
        #[arg(long, default_value = "rx4")]
        receiver: ReceiverKind,
        /// Train on the true desired signal instead of decisions.
        #[arg(long)]
        training: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write a noise realization as CSV.
    NoiseGen {
        #[arg(long)]
        model: NoiseKind,
        #[arg(long)]
        lptv_file: Option<PathBuf>,
        #[arg(long, default_value_t = 10_000)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(clap::Args, Debug)]
struct Overrides {
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    snr: Vec<f64>,
    #[arg(long, value_delimiter = ',')]
    receivers: Vec<ReceiverKind>,
    /// Enable BER counting.
    #[arg(long)]
    ber: bool,
    #[arg(long)]
    samples: Option<usize>,
}

impl Overrides {
    fn apply(&self, cfg: &mut ScenarioConfig) -> anyhow::Result<()> {
        if let Some(t) = self.trials {
            cfg.trials = t;
        }
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if !self.snr.is_empty() {
            cfg.snr_grid_db = self.snr.clone();
        }
        if !self.receivers.is_empty() {
            cfg.receivers = self.receivers.clone();
        }
        if self.ber {
            cfg.budget.ber = true;
        }
        if let Some(s) = self.samples {
            cfg.budget.samples = s;
        }
        cfg.validate()
    }
}

fn output(path: Option<&Path>) -> anyhow::Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p).with_context(|| format!("creating {}", p.display()))?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn main() -> anyhow::Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    rayon::ThreadPoolBuilder::new().num_threads(cli.threads).build_global()?;

    match cli.cmd {
        Command::Design { scenario, snr, receivers, out_dir } => {
            let cfg = ScenarioConfig::load(&scenario)?;
            let receivers = if receivers.is_empty() { cfg.receivers.clone() } else { receivers };
            let prep = Prepared::new(&cfg)?;
            std::fs::create_dir_all(&out_dir)?;
            for (rx, filter, mse) in design_all(&prep, snr, &receivers)? {
                log::info!("{rx} at {snr} dB: TA-MSE {:.3} dB", 10.0 * mse.log10());
                match filter {
                    Some(f) => {
                        let path = out_dir.join(format!("{}_{}.toml", cfg.id, rx.label()));
                        write_filter_file(&path, rx.label(), &f)?;
                        log::info!("wrote {}", path.display());
                    }
                    None => log::info!("{rx} has no filter"),
                }
            }
        }
        Command::Simulate { scenario, overrides, out } => {
            let mut cfg = ScenarioConfig::load(&scenario)?;
            overrides.apply(&mut cfg)?;
            let records = run_scenario(&cfg)?;
            write_metrics(output(out.as_deref())?, &records)?;
        }
        Command::Sweep { scenarios, overrides, out_dir } => {
            std::fs::create_dir_all(&out_dir)?;
            let mut failed = 0;
            for path in &scenarios {
                let res = ScenarioConfig::load(path).and_then(|mut cfg| {
                    overrides.apply(&mut cfg)?;
                    let records = run_scenario(&cfg)?;
                    let out = out_dir.join(format!("{}.csv", cfg.id));
                    write_metrics(output(Some(&out))?, &records)?;
                    log::info!("wrote {}", out.display());
                    Ok(())
                });
                if let Err(e) = res {
                    log::error!("{}: {e:#}", path.display());
                    failed += 1;
                }
            }
            if failed > 0 {
                bail!("{failed} of {} scenarios failed", scenarios.len());
            }
        }
        Command::Adapt { scenario, snr, receiver, training, out } => {
            let mut cfg = ScenarioConfig::load(&scenario)?;
            cfg.snr_grid_db = vec![snr];
            let prep = Prepared::new(&cfg)?;
            let (_, _, traj, _) = run_adaptive(&prep, 0, receiver, training)?;
            write_trajectory(output(out.as_deref())?, &traj)?;
        }
        Command::NoiseGen { model, lptv_file, samples, seed, out } => {
            let noise = NoiseSection { model, lptv_file }.model(Path::new(""))?;
            let mut rng = SeededRng::new(seed, 0);
            let w = noise.generate(samples, &mut rng)?;
            write_samples(output(out.as_deref())?, &w)?;
        }
    }
    Ok(())
}
