//! Acceptance run: one PASS/FAIL line per criterion.
//!
//! Failing criteria are reported but only turn the exit status non-zero when
//! `GPSM_ACCEPTANCE_STRICT` is set.

use std::f64::consts::PI;
use std::time::Instant;

use gpsm_core::bmfd::{binaural_interaction, BmfdChannel, BmfdParams, ChannelSubset, Jitter};
use gpsm_core::config::ModelConfig;
use gpsm_core::decision::{
    self, calibrate_k, combine_channels, combine_domains, dprime_from_snr, max_normal_moments, percent_correct,
    DecisionParams, Domain, ObserverParams, PsychometricSample,
};
use gpsm_core::features::{dc_power, snr_dc_value, DcFeatureGrid, EnvFeatureGrid};
use gpsm_core::harness::{output, registry, run_experiment, ExperimentResult, RunOptions, SearchMode};
use gpsm_core::model::Model;
use gpsm_core::periphery::{AdaptationMode, ChannelBank, FilterbankSpec};
use gpsm_core::response::{ipd_grid, response_vs_ipd};
use gpsm_core::dsp;
use gpsm_core::stimuli::{apply_ramps, generate, StimulusKind, StimulusParams};
use gpsm_core::{Result, Signal, StereoSignal};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

type Res<T> = std::result::Result<T, Box<dyn std::error::Error>>;
type Outcome = Res<(bool, String)>;

const SUBSETS: [ChannelSubset; 3] = [ChannelSubset::All5, ChannelSubset::BiLcr, ChannelSubset::BiLr];

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-9
}

fn run(id: &str, only: &[&str], trials: usize) -> Result<ExperimentResult> {
    let spec = registry::get(id)?;
    let opts = RunOptions {
        seed: 0,
        trials: Some(trials),
        subsets: SUBSETS.to_vec(),
        mode: SearchMode::Bisection,
        only: only.iter().map(|s| s.to_string()).collect(),
    };
    run_experiment(&ModelConfig::default(), &spec, &opts)
}

fn threshold(r: &ExperimentResult, condition: &str) -> Res<f64> {
    let t = r
        .threshold(condition, ChannelSubset::All5)
        .ok_or_else(|| format!("{} has no condition {condition}", r.id))?;
    Ok(t.threshold)
}

fn bank(channels: Vec<Vec<f64>>, center_freqs: Vec<f64>) -> ChannelBank {
    ChannelBank {
        channels,
        center_freqs,
        sample_rate: 48_000,
    }
}

fn equations() -> Outcome {
    let mut bad = Vec::new();
    let mut expect = |what: &str, got: f64, want: f64| {
        if !close(got, want) {
            bad.push(format!("{what}: {got} != {want}"));
        }
    };

    // At 6 kHz the internal delay is exactly one sample at 48 kHz.
    let l = vec![1.0, 0.5, 0.2, 0.0, 0.9];
    let r = vec![0.1, 0.3, 0.0, 0.4, 0.25];
    let params = BmfdParams {
        jitter_enabled: false,
        ..BmfdParams::default()
    };
    let out = binaural_interaction(&bank(vec![l.clone()], vec![6000.0]), &bank(vec![r.clone()], vec![6000.0]), &params, &Jitter::none(1))?;
    let get = |c: BmfdChannel| out.get(c).map(|b| b.channels[0].clone()).unwrap_or_default();
    let bil = get(BmfdChannel::BiL);
    let bir = get(BmfdChannel::BiR);
    let bic = get(BmfdChannel::BiC);
    for n in 0..l.len() {
        let r_tau = if n == 0 { 0.0 } else { r[n - 1] };
        let l_tau = if n == 0 { 0.0 } else { l[n - 1] };
        expect("BI_L", bil[n], (l[n] - 3.0 * r_tau).max(0.0));
        expect("BI_R", bir[n], (r[n] - 3.0 * l_tau).max(0.0));
        expect("BI_C", bic[n], (l[n] * r[n]).sqrt());
    }

    expect("P_DC constant", dc_power(&[0.3; 8], 60.0, 35.0, 1e-10), 0.045);
    expect("P_DC ramp", dc_power(&[0.2, 0.4, 0.6], 60.0, 35.0, 1e-10), 0.08);
    expect("P_DC below threshold", dc_power(&[0.3; 8], 20.0, 35.0, 1e-10), 1e-10);
    expect("SNR_DC 2/1", snr_dc_value(2.0, 1.0), 1.0);
    expect("SNR_DC equal", snr_dc_value(1.0, 1.0), 0.0);
    expect("SNR_DC clamp", snr_dc_value(0.5, 1.0), 0.0);

    let d = DecisionParams::default();
    let env_only = combine_domains(vec![vec![1.0, 0.0]], vec![0.0, 0.0], &d);
    expect("env weight", env_only.overall_snr, 0.21);
    let dc_only = combine_domains(vec![vec![0.0]], vec![1.0, 0.0], &d);
    expect("dc weight", dc_only.overall_snr, 0.45);
    let mixed = combine_domains(vec![vec![0.3, 0.4]], vec![0.6, 0.8], &d);
    expect("mixed", mixed.overall_snr, 0.45);
    if env_only.winning_domain != Domain::Envelope || mixed.winning_domain != Domain::Power {
        expect("winning domain", 0.0, 1.0);
    }

    // Antiphase alternation across two channels: the frame-wise max is 1 everywhere.
    let dc = DcFeatureGrid {
        snr: vec![vec![vec![1.0, 0.0, 1.0, 0.0]], vec![vec![0.0, 1.0, 0.0, 1.0]]],
        channels: vec![BmfdChannel::BeL, BmfdChannel::BeR],
    };
    let env = EnvFeatureGrid {
        snr: vec![vec![vec![vec![0.5, 0.0]]], vec![vec![vec![0.0, 0.5]]]],
        channels: dc.channels.clone(),
        mod_channels: vec![Vec::new()],
    };
    let (snr_env, snr_dc) = combine_channels(&dc, &env)?;
    expect("channel max dc", snr_dc[0], 1.0);
    expect("channel max env", snr_env[0][0], 0.5);

    expect("d' of 2", dprime_from_snr(2.0), 2.0);
    expect("d' at criterion", d.criterion_dprime(), 0.5f64.sqrt());
    let at = |x: f64| decision::detect(&combine_domains(vec![], vec![x / 0.45], &d), &d);
    if at(0.25) || !at(0.26) || at(0.0) {
        expect("detection criterion", 0.0, 1.0);
    }
    Ok((bad.is_empty(), if bad.is_empty() { "all hand values match".into() } else { bad.join("; ") }))
}

fn random_left_only(rng: &mut ChaCha8Rng) -> Result<(StereoSignal, StereoSignal)> {
    let duration = rng.random_range(0.15..0.3);
    let masker = generate(&StimulusParams::band_noise(
        rng.random_range(50.0..500.0),
        rng.random_range(2000.0..10_000.0),
        rng.random_range(40.0..75.0),
        duration,
        rng.random(),
    ))?;
    let target = generate(&StimulusParams {
        kind: if rng.random_bool(0.5) { StimulusKind::Tone } else { StimulusKind::SamNoise },
        frequency: rng.random_range(100.0..6000.0),
        band: Some((200.0, 4000.0)),
        modulation_rate: rng.random_range(4.0..64.0),
        modulation_depth: gpsm_core::stimuli::Depth::Linear(0.5),
        level_db: rng.random_range(30.0..70.0),
        duration,
        seed: rng.random(),
        ..StimulusParams::default()
    })?;
    Ok((StereoSignal::left_only(masker.add(&target)?), StereoSignal::left_only(masker)))
}

fn monaural_reduction() -> Outcome {
    let base = ModelConfig::default().with_jitter(false);
    let all5 = Model::new(base.clone().with_subset(ChannelSubset::All5))?;
    let bel = Model::new(base.with_subset(ChannelSubset::BeL))?;
    let mut rng = ChaCha8Rng::seed_from_u64(20);
    let mut mismatches = 0;
    let mut detected = 0;
    for _ in 0..20 {
        let (sn, n) = random_left_only(&mut rng)?;
        let a = all5.compare(&sn, &n, &mut ChaCha8Rng::seed_from_u64(0))?;
        let b = bel.compare(&sn, &n, &mut ChaCha8Rng::seed_from_u64(0))?;
        if a.combined != b.combined {
            mismatches += 1;
        }
        detected += usize::from(a.detected);
    }
    Ok((
        mismatches == 0,
        format!("{mismatches}/20 stimuli differ ({detected} detected)"),
    ))
}

fn steady_power(x: &[f64], skip: usize) -> f64 {
    let seg = &x[skip..x.len() - skip];
    seg.iter().map(|v| v * v).sum::<f64>() / seg.len() as f64
}

fn inhibition_null() -> Outcome {
    let mut cfg = ModelConfig::default().with_jitter(false);
    cfg.adaptation.mode = AdaptationMode::None;
    cfg.filterbank = FilterbankSpec {
        f_low: 500.0,
        f_high: 500.5,
        ..cfg.filterbank
    };
    let model = Model::new(cfg)?;
    let tau_phase = model.config().bmfd.tau_phase;
    let tone = |gain_db: f64, phase: f64| {
        generate(&StimulusParams {
            phase,
            ..StimulusParams::tone(500.0, 65.0 + gain_db, 0.3)
        })
    };
    let left = model.ear(&tone(0.0, 0.0)?)?;
    let mut worst: f64 = 0.0;
    for gain_db in [0.0, -3.0, -6.0, -9.0] {
        // The right ear leads by the internal delay.
        let right = model.ear(&tone(gain_db, tau_phase)?)?;
        let out = binaural_interaction(&left.adapted, &right.adapted, &model.config().bmfd, &Jitter::none(1))?;
        let skip = 2400;
        let bil = steady_power(&out.get(BmfdChannel::BiL).expect("all5").channels[0], skip);
        let bel = steady_power(&out.get(BmfdChannel::BeL).expect("all5").channels[0], skip);
        worst = worst.max(bil / bel);
    }
    // At 48 kHz one sample spans 3.6 degrees, wider than the grid step.
    let curve = response_vs_ipd(&ModelConfig::default(), 500.0, 65.0, &ipd_grid(1.0), 192_000)?;
    let (min, max) = curve.extrema(BmfdChannel::BiL);
    let (min, max) = (min.to_degrees(), max.to_degrees());
    let ok = worst < 1e-6 && (min + 45.0).abs() < 0.5 && (max - 135.0).abs() < 0.5;
    Ok((
        ok,
        format!("worst BI_L/BE_L power {worst:.2e} over 0..-9 dB; minimum {min:.0} deg, maximum {max:.0} deg"),
    ))
}

fn slope_per_doubling(points: &[(f64, f64)]) -> f64 {
    let n = points.len() as f64;
    let xs: Vec<f64> = points.iter().map(|p| p.0.log2()).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(points).map(|(x, p)| (x - mx) * (p.1 - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

const DURATIONS: [&str; 7] = ["0.004", "0.008", "0.016", "0.032", "0.064", "0.128", "0.256"];

fn duration_slope(r: &ExperimentResult) -> Outcome {
    let mut pts = Vec::new();
    for d in DURATIONS {
        pts.push((d.parse::<f64>().expect("literal"), threshold(r, &format!("N0Spi500@{d}"))?));
    }
    let slope = slope_per_doubling(&pts);
    let values: Vec<String> = pts.iter().map(|p| format!("{:.1}", p.1)).collect();
    Ok((
        (slope + 3.0).abs() <= 0.7,
        format!("slope {slope:.2} dB/doubling; thresholds {} dB", values.join(" ")),
    ))
}

fn bmld(r: &ExperimentResult) -> Outcome {
    let mut ok = true;
    let mut parts = Vec::new();
    for f in [250, 500, 4000] {
        let diff = threshold(r, &format!("NpiS0@{f}"))? - threshold(r, &format!("N0Spi@{f}"))?;
        ok &= if f <= 500 { diff >= 5.0 } else { diff <= 3.0 };
        parts.push(format!("{f} Hz {diff:.1} dB"));
    }
    Ok((ok, format!("NpiS0 - N0Spi: {}", parts.join(", "))))
}

fn itd_plateau(r: &ExperimentResult) -> Outcome {
    let mut ok = true;
    let mut parts = Vec::new();
    for f in [500.0, 700.0, 900.0] {
        let itd = threshold(r, &format!("tone@{f}"))?;
        let ipd = 2.0 * PI * f * itd;
        ok &= (0.05..=0.12).contains(&ipd);
        parts.push(format!("{f} Hz {ipd:.3} rad ({:.1} us)", itd * 1e6));
    }
    Ok((ok, parts.join(", ")))
}

fn iid_pattern(r: &ExperimentResult) -> Outcome {
    let low = threshold(r, "tone@62.5")?;
    let high = threshold(r, "tone@2000")?;
    let ok = (low - 2.0).abs() <= 0.7 && (high - 1.1).abs() <= 0.7 && low > high;
    Ok((ok, format!("62.5 Hz {low:.2} dB, 2 kHz {high:.2} dB")))
}

fn tmtf_floor() -> Outcome {
    let spec = registry::get("mon-exp5")?;
    let opts = RunOptions {
        seed: 0,
        trials: Some(4),
        only: vec!["bb@".into()],
        ..RunOptions::default()
    };
    let r = run_experiment(&ModelConfig::default(), &spec, &opts)?;
    let lowest = r.thresholds.iter().map(|t| t.threshold).fold(f64::INFINITY, f64::min);
    let mut worst: f64 = 0.0;
    for rate in [4, 8, 16] {
        let cond = format!("bb@{rate}");
        let reference = spec
            .references
            .iter()
            .find(|x| x.condition == cond)
            .map(|x| x.value)
            .ok_or_else(|| format!("no reference for {cond}"))?;
        worst = worst.max((threshold(&r, &cond)? - reference).abs());
    }
    Ok((
        lowest >= -27.0 && worst <= 4.0,
        format!(
            "{} rates, lowest {lowest:.1} dB; largest low-rate deviation {worst:.1} dB",
            r.thresholds.len()
        ),
    ))
}

fn subset_ordering(runs: &[&ExperimentResult]) -> Outcome {
    let mut points = 0;
    let mut violations = Vec::new();
    for r in runs {
        let res = r.tracked.resolution();
        for t in r.thresholds.iter().filter(|t| t.subset == ChannelSubset::All5) {
            let get = |s| r.threshold(&t.condition, s).map(|x| x.threshold);
            let (Some(lcr), Some(lr)) = (get(ChannelSubset::BiLcr), get(ChannelSubset::BiLr)) else {
                violations.push(format!("{} {} missing a subset", r.id, t.condition));
                continue;
            };
            points += 1;
            if t.threshold > lcr + res || lcr > lr + res {
                violations.push(format!("{} {}: {} / {} / {}", r.id, t.condition, t.threshold, lcr, lr));
            }
        }
    }
    Ok((
        violations.is_empty() && points > 0,
        if violations.is_empty() {
            format!("{points} binaural points ordered")
        } else {
            violations.join("; ")
        },
    ))
}

fn max_normal_monte_carlo(n: usize, samples: usize) -> (f64, f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let (mut s1, mut s2) = (0.0, 0.0);
    for _ in 0..samples {
        let mut m = f64::NEG_INFINITY;
        for _ in 0..n {
            m = m.max(rng.sample::<f64, _>(StandardNormal));
        }
        s1 += m;
        s2 += m * m;
    }
    let mean = s1 / samples as f64;
    (mean, (s2 / samples as f64 - mean * mean).sqrt())
}

/// Level-dependent overall SNR of a speech-like target against two maskers,
/// per channel subset, on a fixed level grid.
fn srt_by_subset(model: &Model, masker: &StereoSignal, target: &Signal, groups: &[&[BmfdChannel]]) -> Result<Vec<f64>> {
    let obs = model.config().observer;
    let (mu, _) = max_normal_moments(obs.m - 1);
    // Overall SNR giving 50 % correct.
    let snr50 = (mu / obs.k).powf(1.0 / obs.q);
    let levels: Vec<f64> = (0..=24).map(|i| -24.0 + 1.5 * i as f64).collect();
    let draws = 3;
    let mut curves = vec![vec![0.0; levels.len()]; groups.len()];
    for seed in 0..draws {
        let jitter = model.draw_jitter(&mut ChaCha8Rng::seed_from_u64(seed));
        let fn_ = model.features(masker, &jitter)?;
        for (li, &rel) in levels.iter().enumerate() {
            let t = StereoSignal::diotic(target.clone().scaled(10f64.powf(rel / 20.0)));
            let fsn = model.features(&t.add(masker)?, &jitter)?;
            for (g, chans) in groups.iter().enumerate() {
                curves[g][li] += model.decide_with(&fsn, &fn_, chans)?.combined.overall_snr / draws as f64;
            }
        }
    }
    Ok(curves
        .iter()
        .map(|c| {
            // Running maximum keeps the crossing unique.
            let mut m = c.clone();
            for i in 1..m.len() {
                m[i] = m[i].max(m[i - 1]);
            }
            match m.iter().position(|&v| v >= snr50) {
                Some(0) => levels[0],
                Some(i) => levels[i - 1] + (snr50 - m[i - 1]) / (m[i] - m[i - 1]) * (levels[i] - levels[i - 1]),
                None => f64::INFINITY,
            }
        })
        .collect())
}

/// Fraction of (auditory channel, frame) cells, over both domains, in which
/// each BMFD channel has the largest positive SNR.
fn winner_share(d: &gpsm_core::Decision) -> Vec<f64> {
    let nc = d.dc.channels.len();
    let mut wins = vec![0usize; nc];
    let mut total = 0usize;
    let mut count = |vals: &[f64]| {
        let (best, &v) = vals.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).expect("channels");
        if v > 0.0 {
            wins[best] += 1;
            total += 1;
        }
    };
    for p in 0..d.dc.snr[0].len() {
        for j in 0..d.dc.snr[0][p].len() {
            count(&d.dc.snr.iter().map(|c| c[p][j]).collect::<Vec<_>>());
        }
        for n in 0..d.env.snr[0][p].len() {
            for i in 0..d.env.snr[0][p][n].len() {
                count(&d.env.snr.iter().map(|c| c[p][n][i]).collect::<Vec<_>>());
            }
        }
    }
    wins.iter().map(|&w| w as f64 / total.max(1) as f64).collect()
}

fn spatial_release() -> Outcome {
    let model = Model::new(ModelConfig::speech())?;
    let duration = 0.5;
    let target = generate(&StimulusParams {
        kind: StimulusKind::SpeechEnvelopeNoise,
        band: Some((100.0, 8000.0)),
        modulation_rate: 4.0,
        modulation_depth: gpsm_core::stimuli::Depth::Linear(1.0),
        level_db: 65.0,
        duration,
        seed: 1,
        ..StimulusParams::default()
    })?;
    let fs = target.sample_rate();
    // Noise with a frequency-independent IPD, ramped after the phase shift.
    let masker = |seed, ipd: f64| -> Result<StereoSignal> {
        let raw = generate(&StimulusParams {
            ramp: 0.0,
            ..StimulusParams::band_noise(100.0, 8000.0, 62.0, duration, seed)
        })?;
        let side = |phase: f64| {
            let mut x = dsp::phase_shift(raw.samples(), phase);
            apply_ramps(&mut x, fs as f64, 0.01);
            Signal::new(x, fs)
        };
        StereoSignal::new(side(ipd / 2.0)?, side(-ipd / 2.0)?)
    };
    let ipd = PI / 2.0;
    let colocated = masker(2, 0.0)?.add(&masker(3, 0.0)?)?;
    let separated = masker(2, ipd)?.add(&masker(3, -ipd)?)?;
    let groups: [&[BmfdChannel]; 3] = [
        ChannelSubset::All5.channels(),
        &[BmfdChannel::BiC],
        &[BmfdChannel::BeL, BmfdChannel::BeR, BmfdChannel::BiL, BmfdChannel::BiR],
    ];
    let co = srt_by_subset(&model, &colocated, &target, &groups)?;
    let sep = srt_by_subset(&model, &separated, &target, &groups)?;
    let srm: Vec<f64> = co.iter().zip(&sep).map(|(c, s)| c - s).collect();
    let jitter = model.draw_jitter(&mut ChaCha8Rng::seed_from_u64(0));
    let t = StereoSignal::diotic(target.clone().scaled(10f64.powf(sep[0] / 20.0)));
    let d = model.decide(&model.features(&t.add(&separated)?, &jitter)?, &model.features(&separated, &jitter)?)?;
    let share = winner_share(&d);
    let bic = d.dc.channels.iter().position(|&c| c == BmfdChannel::BiC).expect("all five channels");
    // BI_C dominates when it alone yields more release than the other four
    // channels together.
    let ok = srm[0] > 0.0 && srm[1] >= srm[2];
    Ok((
        ok,
        format!(
            "SRM all5 {:.1} dB, BI_C alone {:.1} dB, other channels {:.1} dB, BI_C wins {:.0} % of cells",
            srm[0],
            srm[1],
            srm[2],
            100.0 * share[bic]
        ),
    ))
}

fn si_machinery() -> Outcome {
    let obs = ObserverParams::default();
    let grid: Vec<f64> = (0..=500).map(|i| i as f64 * 0.01).collect();
    let increasing = grid.windows(2).all(|w| percent_correct(w[1], &obs) > percent_correct(w[0], &obs));

    let n = (obs.m - 1) as usize;
    let (mu, sd) = max_normal_moments(obs.m - 1);
    let (mc_mu, mc_sd) = max_normal_monte_carlo(n, 1_000_000);
    let moments = ((mu - mc_mu) / mc_mu).abs() < 0.005 && ((sd - mc_sd) / mc_sd).abs() < 0.005;

    let truth = ObserverParams { k: 0.8, ..obs };
    let levels: Vec<f64> = (0..=400).map(|i| -20.0 + 0.1 * i as f64).collect();
    let sample = PsychometricSample {
        overall_snr: levels.iter().map(|l| 10f64.powf(l / 10.0)).collect(),
        levels,
    };
    let srt = 10.0 * ((mu / truth.k).powf(1.0 / truth.q)).log10();
    let k = calibrate_k(&[sample], srt, &obs)?.k_mean;
    let recovered = (k / truth.k - 1.0).abs() < 0.01;

    let (srm_ok, srm) = spatial_release()?;
    Ok((
        increasing && moments && recovered && srm_ok,
        format!(
            "Pc increasing {increasing}; max of {n} normals {mu:.4}/{sd:.4} vs MC {mc_mu:.4}/{mc_sd:.4}; k {k:.4} for 0.8; {srm}"
        ),
    ))
}

fn determinism() -> Outcome {
    let spec = registry::get("bin-exp4")?;
    let opts = RunOptions {
        seed: 3,
        trials: Some(1),
        only: vec!["N0Spi500@0.032".into()],
        ..RunOptions::default()
    };
    let dirs = [tempfile::tempdir()?, tempfile::tempdir()?];
    let mut files = Vec::new();
    for d in &dirs {
        let r = run_experiment(&ModelConfig::default(), &spec, &opts)?;
        files.push(output::write_experiment(d.path(), &r)?);
    }
    let mut same = files[0].len() == files[1].len() && !files[0].is_empty();
    for (a, b) in files[0].iter().zip(&files[1]) {
        same &= std::fs::read(a)? == std::fs::read(b)?;
    }
    Ok((same, format!("{} files compared", files[0].len())))
}

fn main() {
    // GPSM_ACCEPTANCE_ONLY=4,9 restricts the run to the listed criteria.
    let only: Option<Vec<usize>> = std::env::var("GPSM_ACCEPTANCE_ONLY")
        .ok()
        .map(|v| v.split(',').filter_map(|x| x.trim().parse().ok()).collect());
    let wanted = |n: usize| only.as_ref().is_none_or(|o| o.contains(&n));
    let mut failed = 0;
    let mut ran = 0;
    let mut report = |n: usize, name: &str, outcome: &dyn Fn() -> Outcome| {
        if !wanted(n) {
            return;
        }
        let started = Instant::now();
        let (ok, detail) = outcome().unwrap_or_else(|e| (false, format!("error: {e}")));
        ran += 1;
        if !ok {
            failed += 1;
        }
        let secs = started.elapsed().as_secs_f64();
        println!("{} {n:>2} {name}: {detail} [{secs:.0} s]", if ok { "PASS" } else { "FAIL" });
    };

    report(1, "equation unit values", &equations);
    report(2, "monaural reduction", &monaural_reduction);
    report(3, "inhibition null", &inhibition_null);

    let binaural = |n: usize, id: &str, only: &[&str], trials: usize| {
        (wanted(n) || wanted(9)).then(|| run(id, only, trials).map_err(|e| e.to_string()))
    };
    let exp4_only: Vec<String> = DURATIONS.iter().map(|d| format!("N0Spi500@{d}")).collect();
    let exp4 = binaural(4, "bin-exp4", &exp4_only.iter().map(String::as_str).collect::<Vec<_>>(), 12);
    let exp3 = binaural(
        5,
        "bin-exp3",
        &["N0Spi@250", "NpiS0@250", "N0Spi@500", "NpiS0@500", "N0Spi@4000", "NpiS0@4000"],
        12,
    );
    let itd = binaural(6, "bin-exp1", &["tone@500", "tone@700", "tone@900"], 24);
    let iid = binaural(7, "bin-exp2", &["tone@62.5", "tone@2000"], 12);
    let use_run = |r: &Option<std::result::Result<ExperimentResult, String>>, f: fn(&ExperimentResult) -> Outcome| -> Outcome {
        match r {
            Some(Ok(r)) => f(r),
            Some(Err(e)) => Err(e.clone().into()),
            None => Err("not run".into()),
        }
    };
    report(4, "N0Spi duration slope", &|| use_run(&exp4, duration_slope));
    report(5, "BMLD sign and size", &|| use_run(&exp3, bmld));
    report(6, "ITD plateau", &|| use_run(&itd, itd_plateau));
    report(7, "IID pattern", &|| use_run(&iid, iid_pattern));
    report(8, "TMTF floor", &tmtf_floor);
    let runs: Vec<&ExperimentResult> = [&exp4, &exp3, &itd, &iid]
        .into_iter()
        .filter_map(|r| r.as_ref().and_then(|r| r.as_ref().ok()))
        .collect();
    report(9, "channel-subset ordering", &|| subset_ordering(&runs));
    report(10, "SI machinery", &si_machinery);
    report(11, "determinism", &determinism);

    println!("{failed} of {ran} criteria failed");
    if failed > 0 && std::env::var_os("GPSM_ACCEPTANCE_STRICT").is_some() {
        std::process::exit(1);
    }
}
