//! Decision breakdown of one probe of an experiment.
//!
//! Usage: diagnose <experiment id or json> <condition index> <value> [trial]
//!
//! Prints the overall SNR, the per-channel frame powers at the auditory
//! channel nearest to `FC` (default 500 Hz) and the SNR norms per BMFD channel.

use std::process::ExitCode;

use gpsm_core::config::ModelConfig;
use gpsm_core::harness::runner::experiment_config;
use gpsm_core::harness::{registry, ExperimentSpec, TrialSeeds};
use gpsm_core::model::Model;

fn spec(arg: &str) -> Result<ExperimentSpec, Box<dyn std::error::Error>> {
    if arg.ends_with(".json") {
        Ok(registry::parse(&std::fs::read_to_string(arg)?)?)
    } else {
        Ok(registry::get(arg)?)
    }
}

fn run(args: &[String]) -> Result<(), Box<dyn std::error::Error>> {
    let spec = spec(&args[0])?;
    let index: usize = args[1].parse()?;
    let value: f64 = args[2].parse()?;
    let trial: usize = args.get(3).map_or(Ok(0), |t| t.parse())?;
    let fc: f64 = std::env::var("FC").map_or(Ok(500.0), |v| v.parse())?;

    let model = Model::new(experiment_config(&ModelConfig::default(), &spec)?)?;
    let conditions = spec.conditions();
    let condition = conditions.get(index).ok_or("condition index out of range")?;
    let seeds = TrialSeeds::derive(0, &spec.id, index, trial);
    let probe = spec.probe(index, seeds)?;
    let jitter = model.draw_jitter(&mut seeds.jitter_rng());
    let n = model.features(probe.masker(), &jitter)?;
    let sn = model.features(&probe.target_plus_masker(value)?, &jitter)?;
    let d = model.decide(&sn, &n)?;
    println!(
        "{} at {value}: overall {:.3}, d' {:.3}, {:?} domain",
        condition.label,
        d.combined.overall_snr,
        d.d_prime(),
        d.combined.winning_domain
    );

    let freqs = model.center_freqs();
    let p = (0..freqs.len())
        .min_by(|&a, &b| (freqs[a] - fc).abs().total_cmp(&(freqs[b] - fc).abs()))
        .ok_or("no auditory channels")?;
    let mean_db = |v: &[f64]| 10.0 * (v.iter().sum::<f64>() / v.len().max(1) as f64).log10();
    println!("P_DC at {:.0} Hz (masker / with target):", freqs[p]);
    for (a, b) in n.channels.iter().zip(&sn.channels) {
        println!("  {:<5} {:8.2} {:8.2} dB", a.channel.label(), mean_db(&a.dc[p]), mean_db(&b.dc[p]));
    }
    println!("SNR norms (power / envelope):");
    for (c, (dc, env)) in d.dc.channels.iter().zip(d.dc.snr.iter().zip(&d.env.snr)) {
        let dc: f64 = dc.iter().flatten().map(|v| v * v).sum::<f64>().sqrt();
        let env: f64 = env.iter().flatten().flatten().map(|v| v * v).sum::<f64>().sqrt();
        println!("  {:<5} {dc:8.3} {env:8.3}", c.label());
    }
    Ok(())
}

fn main() -> ExitCode {
    let args: Vec<String> = std::env::args().skip(1).collect();
    if args.len() < 3 {
        eprintln!("usage: diagnose <experiment id or json> <condition index> <value> [trial]");
        return ExitCode::from(2);
    }
    match run(&args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
