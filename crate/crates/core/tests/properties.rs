use gpsm_core::bmfd::{binaural_interaction, BmfdChannel, BmfdParams, ChannelSubset, Jitter};
use gpsm_core::config::ModelConfig;
use gpsm_core::decision::{self, ObserverParams};
use gpsm_core::features::{self, tile_frames};
use gpsm_core::model::Model;
use gpsm_core::periphery::{gammatone_bank, FilterbankSpec};
use gpsm_core::stimuli::{apply_interaural, generate, InterauralPhase, StimulusParams};
use gpsm_core::{Signal, StereoSignal};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const FS: u32 = 48_000;

fn noise(seed: u64, level: f64, dur: f64) -> Signal {
    generate(&StimulusParams::band_noise(100.0, 6000.0, level, dur, seed)).unwrap()
}

fn small_bank() -> FilterbankSpec {
    FilterbankSpec {
        f_low: 250.0,
        f_high: 4000.0,
        ..FilterbankSpec::default()
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn filterbank_is_linear(sa in 0u64..1000, sb in 0u64..1000, a in -3.0f64..3.0, b in -3.0f64..3.0) {
        let x = noise(sa, 60.0, 0.05);
        let y = noise(sb, 50.0, 0.05);
        let mix: Vec<f64> = x.samples().iter().zip(y.samples()).map(|(p, q)| a * p + b * q).collect();
        let spec = small_bank();
        let bx = gammatone_bank(&x, &spec).unwrap();
        let by = gammatone_bank(&y, &spec).unwrap();
        let bm = gammatone_bank(&Signal::new(mix, FS).unwrap(), &spec).unwrap();
        for p in 0..bm.num_channels() {
            for t in 0..bm.len() {
                let want = a * bx.channels[p][t] + b * by.channels[p][t];
                prop_assert!((bm.channels[p][t] - want).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn bmfd_outputs_are_nonnegative_and_mirror(sl in 0u64..1000, sr in 0u64..1000, js in 0u64..1000) {
        let spec = small_bank();
        let mut l = gammatone_bank(&noise(sl, 60.0, 0.05), &spec).unwrap();
        let mut r = gammatone_bank(&noise(sr, 55.0, 0.05), &spec).unwrap();
        gpsm_core::periphery::half_wave_rectify(&mut l);
        gpsm_core::periphery::half_wave_rectify(&mut r);
        let params = BmfdParams::default();
        let jitter = Jitter::draw(l.num_channels(), &params, &mut ChaCha8Rng::seed_from_u64(js));
        let out = binaural_interaction(&l, &r, &params, &jitter).unwrap();
        for (_, bank) in &out.channels {
            prop_assert!(bank.channels.iter().flatten().all(|&v| v >= 0.0));
        }
        let swapped = binaural_interaction(&r, &l, &params, &jitter.mirrored()).unwrap();
        for (a, b) in [
            (BmfdChannel::BiL, BmfdChannel::BiR),
            (BmfdChannel::BeL, BmfdChannel::BeR),
            (BmfdChannel::BiC, BmfdChannel::BiC),
        ] {
            prop_assert_eq!(out.get(a).unwrap(), swapped.get(b).unwrap());
        }
    }

    #[test]
    fn frame_tiling_covers_signal(len in 1usize..5000, frame in 1usize..700) {
        let frames = tile_frames(len, frame);
        if 2 * len < frame {
            prop_assert!(frames.is_empty());
            return Ok(());
        }
        prop_assert_eq!(frames[0].0, 0);
        prop_assert_eq!(frames.last().unwrap().1, len);
        for w in frames.windows(2) {
            prop_assert_eq!(w[0].1, w[1].0);
        }
        prop_assert!(frames.iter().all(|(a, b)| b > a));
    }

    #[test]
    fn power_floors_hold(vals in prop::collection::vec(0.0f64..1e-3, 2..200), level in -20.0f64..100.0) {
        let p = features::dc_power(&vals, level, 0.0, 1e-10);
        prop_assert!(p >= 1e-10);
        let floor = 10f64.powf(-2.7);
        prop_assert!(features::env_power(&vals, &vals, floor, 1e-10) >= floor);
    }

    #[test]
    fn dprime_and_percent_correct_are_monotone(a in 0.0f64..8.0, b in 0.0f64..8.0) {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        prop_assert!(decision::dprime_from_snr(lo * 5.0) <= decision::dprime_from_snr(hi * 5.0));
        // Beyond d' of about 8 the probability is 1 to double precision.
        let obs = ObserverParams::default();
        prop_assume!(hi - lo > 1e-6);
        prop_assert!(decision::percent_correct(lo, &obs) < decision::percent_correct(hi, &obs));
    }

    #[test]
    fn anti_phase_twice_is_identity(seed in 0u64..1000, itd in -5e-4f64..5e-4) {
        let x = noise(seed, 60.0, 0.05);
        let once = apply_interaural(&x, itd, 0.0, InterauralPhase::AntiPhase).unwrap();
        prop_assert_eq!(once.len(), x.len());
        let (l, r) = once.into_parts();
        let back: Vec<f64> = r.samples().iter().map(|v| -v).collect();
        let twice = apply_interaural(&x, itd, 0.0, InterauralPhase::InPhase).unwrap();
        prop_assert_eq!(l.samples(), twice.left().samples());
        prop_assert_eq!(&back[..], twice.right().samples());
    }
}

proptest! {
    // Full model evaluations are slow; a handful of cases suffices.
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn channel_max_is_monotone_and_order_free(seed in 0u64..1000, tone_db in 40.0f64..70.0, itd in 0.0f64..3e-4) {
        let model = Model::new(ModelConfig::default()).unwrap();
        let n = noise(seed, 60.0, 0.3);
        let t = generate(&StimulusParams::tone(500.0, tone_db, 0.3)).unwrap();
        let ns = StereoSignal::diotic(n.clone());
        let sn = ns.add(&apply_interaural(&t, itd, 0.0, InterauralPhase::AntiPhase).unwrap()).unwrap();
        let j = model.draw_jitter(&mut ChaCha8Rng::seed_from_u64(seed));
        let fsn = model.features(&sn, &j).unwrap();
        let fnn = model.features(&ns, &j).unwrap();
        let d = |c: &[BmfdChannel]| model.decide_with(&fsn, &fnn, c).unwrap().d_prime();
        let all = d(ChannelSubset::All5.channels());
        let lcr = d(ChannelSubset::BiLcr.channels());
        let lr = d(ChannelSubset::BiLr.channels());
        prop_assert!(all >= lcr && lcr >= lr);
        let mut rev = ChannelSubset::All5.channels().to_vec();
        rev.reverse();
        prop_assert_eq!(d(&rev), all);
    }

    #[test]
    fn identical_inputs_give_zero_snr(seed in 0u64..1000, level in 20.0f64..80.0) {
        let model = Model::new(ModelConfig::default()).unwrap();
        let x = StereoSignal::diotic(noise(seed, level, 0.2));
        let d = model.compare(&x, &x, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
        prop_assert!(d.dc.snr.iter().flatten().flatten().all(|&v| v == 0.0));
        prop_assert!(d.env.snr.iter().flatten().flatten().flatten().all(|&v| v == 0.0));
        prop_assert_eq!(d.d_prime(), 0.0);
    }
}

#[test]
fn center_frequencies_do_not_depend_on_signal() {
    let spec = FilterbankSpec::default();
    let a = gammatone_bank(&noise(1, 60.0, 0.05), &spec).unwrap();
    let b = gammatone_bank(&Signal::silence(100, FS), &spec).unwrap();
    assert_eq!(a.center_freqs, b.center_freqs);
    assert_eq!(a.num_channels(), 24);
}
