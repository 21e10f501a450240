use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use gpsm_core::bmfd::{BmfdChannel, ChannelSubset};
use gpsm_core::config::ModelConfig;
use gpsm_core::decision::{self, PsychometricSample};
use gpsm_core::harness::{self, output, registry, RunOptions, SearchMode};
use gpsm_core::model::Model;
use gpsm_core::response;
use gpsm_core::stimuli;
use gpsm_core::Error;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Parser)]
#[command(name = "gpsm", version, about = "Binaural generalized power-spectrum model")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// List the built-in experiments.
    List,
    /// Run one or more experiments.
    Run {
        /// Experiment ids or paths to experiment definition files.
        #[arg(required = true)]
        ids: Vec<String>,
        #[command(flatten)]
        common: Common,
        /// Simulate a 2-down 1-up staircase instead of bisection.
        #[arg(long)]
        staircase: bool,
        /// Only run conditions whose label contains this string (repeatable).
        #[arg(long)]
        only: Vec<String>,
    },
    /// Run every built-in experiment and score it.
    Suite {
        #[command(flatten)]
        common: Common,
    },
    /// Compare a target-plus-masker and a masker WAV file.
    Analyze {
        target_plus_masker: PathBuf,
        masker: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_parser = parse_subset)]
        channels: Option<ChannelSubset>,
        /// Write the report here instead of standard output.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Steady-state BMFD output against IPD and ILD for one auditory channel.
    ResponseCurves {
        #[arg(long, default_value_t = 500.0)]
        frequency: f64,
        #[arg(long, default_value_t = 65.0)]
        level: f64,
        #[arg(long, default_value_t = 1.0)]
        step_deg: f64,
        /// Analysis sample rate. At 48 kHz one sample spans 3.6 degrees at
        /// 500 Hz, which hides the location of the flat maximum.
        #[arg(long, default_value_t = 192_000)]
        sample_rate: u32,
        #[arg(long, default_value = "results")]
        out: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Calibrate the observer constant k from simulated psychometric samples.
    Calibrate {
        /// JSON array of {"levels": [...], "overall_snr": [...]} objects.
        samples: PathBuf,
        #[arg(long, allow_hyphen_values = true)]
        target_srt: f64,
        #[arg(long)]
        config: Option<PathBuf>,
    },
}

#[derive(Args)]
struct Common {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Trials per probe; defaults to each experiment's own count.
    #[arg(long)]
    trials: Option<usize>,
    /// Channel subsets, comma separated: all5, lcr, lr, c, bel.
    #[arg(long, value_delimiter = ',', value_parser = parse_subset)]
    channels: Vec<ChannelSubset>,
    #[arg(long, default_value = "results")]
    out: PathBuf,
    #[arg(long)]
    config: Option<PathBuf>,
    /// Worker threads.
    #[arg(long)]
    jobs: Option<usize>,
}

fn parse_subset(s: &str) -> Result<ChannelSubset, String> {
    ChannelSubset::parse(s).ok_or_else(|| format!("unknown channel subset `{s}` (expected all5, lcr, lr, c or bel)"))
}

fn load_config(path: Option<&Path>) -> anyhow::Result<ModelConfig> {
    match path {
        Some(p) => Ok(ModelConfig::load(p)?),
        None => Ok(ModelConfig::default()),
    }
}

fn set_jobs(jobs: Option<usize>) -> anyhow::Result<()> {
    if let Some(n) = jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build_global()
            .context("configuring worker threads")?;
    }
    Ok(())
}

fn run_ids(ids: &[String], common: &Common, mode: SearchMode, only: Vec<String>, write_scores: bool) -> anyhow::Result<()> {
    set_jobs(common.jobs)?;
    let config = load_config(common.config.as_deref())?;
    // Resolve every id before doing any work.
    let specs = ids.iter().map(|id| resolve(id)).collect::<anyhow::Result<Vec<_>>>()?;
    let opts = RunOptions {
        seed: common.seed,
        trials: common.trials,
        subsets: common.channels.clone(),
        mode,
        only,
    };
    let mut results = Vec::new();
    for spec in &specs {
        let r = harness::run_experiment(&config, spec, &opts)?;
        output::write_experiment(&common.out, &r)?;
        print!("{}", summary(&r));
        results.push(r);
    }
    if write_scores {
        output::write_suite(&common.out, &results)?;
    }
    Ok(())
}

/// A registered id, or a path to an experiment definition file.
fn resolve(id: &str) -> anyhow::Result<harness::ExperimentSpec> {
    if id.ends_with(".json") && Path::new(id).is_file() {
        let text = fs::read_to_string(id).with_context(|| format!("reading {id}"))?;
        return Ok(registry::parse(&text)?);
    }
    Ok(registry::get(id)?)
}

fn summary(r: &harness::ExperimentResult) -> String {
    let mut s = String::new();
    for t in &r.thresholds {
        let flag = match (&t.bracket_error, t.non_monotone) {
            (Some(_), _) => " (at bound)",
            (None, true) => " (non-monotone)",
            _ => "",
        };
        // Interaural delays are printed in microseconds.
        let (value, unit) = if r.tracked == harness::Tracked::ItdS {
            (t.threshold * 1e6, "us")
        } else {
            (t.threshold, r.unit.as_str())
        };
        let _ = writeln!(s, "{}\t{}\t{}\t{:.4}\t{}{}", r.id, t.condition, t.subset.name(), value, unit, flag);
    }
    for surf in &r.trading {
        for (itd, iid) in surf.itds.iter().zip(&surf.minimizing_iid) {
            let _ = writeln!(s, "{}\titd={:.0}us\t{}\tmin d' at IID {} dB", r.id, itd * 1e6, surf.subset.name(), iid);
        }
    }
    for sc in &r.scores {
        if sc.points > 0 {
            let _ = writeln!(s, "{}\tscore\t{}\tRMSE {:.3}\tR2 {:.3}\t({} points)", r.id, sc.subset.name(), sc.rmse, sc.r2, sc.points);
        }
    }
    s
}

fn analyze(sn: &Path, n: &Path, config: Option<&Path>, seed: u64, channels: Option<ChannelSubset>, out: Option<&Path>) -> anyhow::Result<()> {
    let mut config = load_config(config)?;
    if let Some(c) = channels {
        config = config.with_subset(c);
    }
    let model = Model::new(config)?;
    let a = stimuli::read_wav(sn)?;
    let b = stimuli::read_wav(n)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = model.compare(&a, &b, &mut rng)?;
    let report = serde_json::json!({
        "overall_snr": d.combined.overall_snr,
        "d_prime": d.combined.d_prime,
        "detected": d.detected,
        "winning_domain": d.combined.winning_domain,
        "snr_env": d.combined.snr_env,
        "snr_dc": d.combined.snr_dc,
        "channels": d.dc.channels.iter().map(|c: &BmfdChannel| c.label()).collect::<Vec<_>>(),
        "center_freqs": model.center_freqs(),
        "dc_grid": d.dc,
        "env_grid": d.env,
        "config_hash": model.config().hash(),
    });
    let text = serde_json::to_string_pretty(&report)? + "\n";
    match out {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display()))?,
        None => print!("{text}"),
    }
    Ok(())
}

fn response_curves(frequency: f64, level: f64, step: f64, fs_: u32, out: &Path, config: Option<&Path>) -> anyhow::Result<()> {
    if step.is_nan() || step <= 0.0 {
        bail!("step must be positive");
    }
    let config = load_config(config)?;
    let ipd = response::response_vs_ipd(&config, frequency, level, &response::ipd_grid(step), fs_)?;
    let ilds: Vec<f64> = (0..=40).map(|i| -20.0 + i as f64).collect();
    let ild = response::response_vs_ild(&config, frequency, level, &ilds, fs_)?;
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    for curve in [&ipd, &ild] {
        let mut body = format!("# {} {}", curve.variable, BmfdChannel::ALL.map(|c| c.label()).join(" "));
        body.push('\n');
        for p in &curve.points {
            let _ = writeln!(
                body,
                "{} {}",
                p.x,
                p.power.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(" ")
            );
        }
        let stem = format!("response_{}_{}hz", curve.variable, frequency);
        fs::write(out.join(format!("{stem}.dat")), body)?;
        fs::write(out.join(format!("{stem}.json")), serde_json::to_string_pretty(curve)?)?;
    }
    let (min, max) = ipd.extrema(BmfdChannel::BiL);
    println!("BI_L minimum at IPD {:.1} deg, maximum at {:.1} deg", min.to_degrees(), max.to_degrees());
    Ok(())
}

fn calibrate(samples: &Path, target: f64, config: Option<&Path>) -> anyhow::Result<()> {
    let config = load_config(config)?;
    let text = fs::read_to_string(samples).with_context(|| format!("reading {}", samples.display()))?;
    let samples: Vec<PsychometricSample> = serde_json::from_str(&text).context("parsing psychometric samples")?;
    let k = decision::calibrate_k(&samples, target, &config.observer)?;
    println!("{}", serde_json::to_string_pretty(&k)?);
    Ok(())
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::List => {
            for spec in registry::all()? {
                println!("{}\t{}", spec.id, spec.description);
            }
            Ok(())
        }
        Command::Run {
            ids,
            common,
            staircase,
            only,
        } => {
            let mode = if staircase { SearchMode::Staircase } else { SearchMode::Bisection };
            run_ids(&ids, &common, mode, only, false)
        }
        Command::Suite { common } => {
            let ids: Vec<String> = registry::ids().into_iter().map(String::from).collect();
            run_ids(&ids, &common, SearchMode::Bisection, Vec::new(), true)
        }
        Command::Analyze {
            target_plus_masker,
            masker,
            config,
            seed,
            channels,
            out,
        } => analyze(&target_plus_masker, &masker, config.as_deref(), seed, channels, out.as_deref()),
        Command::ResponseCurves {
            frequency,
            level,
            step_deg,
            sample_rate,
            out,
            config,
        } => response_curves(frequency, level, step_deg, sample_rate, &out, config.as_deref()),
        Command::Calibrate {
            samples,
            target_srt,
            config,
        } => calibrate(&samples, target_srt, config.as_deref()),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            // Unknown identifiers are usage errors, like bad flags.
            if matches!(e.downcast_ref::<Error>(), Some(Error::UnknownExperiment(_))) {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}
