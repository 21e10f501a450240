//! Shared stimuli for the benchmarks.

use gpsm_core::stimuli::{generate, StimulusParams};
use gpsm_core::{Signal, StereoSignal};

/// A 300 ms, 65 dB SPL band of noise from 100 Hz to 8 kHz.
pub fn noise() -> Signal {
    generate(&StimulusParams::band_noise(100.0, 8000.0, 65.0, 0.3, 7)).expect("valid noise")
}

/// The noise diotically, and with an antiphasic 500 Hz tone added.
pub fn n0_spi_pair() -> (StereoSignal, StereoSignal) {
    let n = noise();
    let tone = generate(&StimulusParams::tone(500.0, 55.0, 0.3)).expect("valid tone");
    let left = n.add(&tone).expect("same shape");
    let right = n.add(&tone.clone().scaled(-1.0)).expect("same shape");
    (
        StereoSignal::new(left, right).expect("same shape"),
        StereoSignal::diotic(n),
    )
}
