//! Small filter and delay primitives shared by the processing stages.

use std::f64::consts::PI;

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

/// First-order low-pass from the bilinear transform, prewarped so the
/// magnitude is exactly -3 dB at the cutoff.
#[derive(Debug, Clone, Copy)]
pub struct OnePoleLowpass {
    b0: f64,
    b1: f64,
    a1: f64,
}

impl OnePoleLowpass {
    pub fn new(cutoff_hz: f64, sample_rate: f64) -> Self {
        let k = (PI * cutoff_hz / sample_rate).tan();
        let norm = 1.0 / (1.0 + k);
        Self {
            b0: k * norm,
            b1: k * norm,
            a1: (k - 1.0) * norm,
        }
    }

    pub fn filter_in_place(&self, x: &mut [f64]) {
        let (mut x1, mut y1) = (0.0, 0.0);
        for v in x.iter_mut() {
            let y = self.b0 * *v + self.b1 * x1 - self.a1 * y1;
            x1 = *v;
            y1 = y;
            *v = y;
        }
    }

    pub fn filter(&self, x: &[f64]) -> Vec<f64> {
        let mut y = x.to_vec();
        self.filter_in_place(&mut y);
        y
    }

    /// Magnitude response at `freq_hz`.
    pub fn magnitude(&self, freq_hz: f64, sample_rate: f64) -> f64 {
        let w = 2.0 * PI * freq_hz / sample_rate;
        let z1 = Complex::from_polar(1.0, -w);
        let h = (Complex::new(self.b0, 0.0) + z1 * self.b1) / (Complex::new(1.0, 0.0) + z1 * self.a1);
        h.norm()
    }
}

/// Second-order section in transposed direct form II.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Biquad {
    pub b0: f64,
    pub b1: f64,
    pub b2: f64,
    pub a1: f64,
    pub a2: f64,
}

impl Biquad {
    /// Constant 0 dB peak band-pass; half-power bandwidth is `center / q`.
    pub fn bandpass(center_hz: f64, q: f64, sample_rate: f64) -> Self {
        let w0 = 2.0 * PI * center_hz / sample_rate;
        let alpha = w0.sin() / (2.0 * q);
        let a0 = 1.0 + alpha;
        Self {
            b0: alpha / a0,
            b1: 0.0,
            b2: -alpha / a0,
            a1: -2.0 * w0.cos() / a0,
            a2: (1.0 - alpha) / a0,
        }
    }

    /// Second-order low-pass with quality factor `q` (bilinear, prewarped).
    pub fn lowpass(cutoff_hz: f64, q: f64, sample_rate: f64) -> Self {
        let k = (PI * cutoff_hz / sample_rate).tan();
        let k2 = k * k;
        let norm = 1.0 / (1.0 + k / q + k2);
        Self {
            b0: k2 * norm,
            b1: 2.0 * k2 * norm,
            b2: k2 * norm,
            a1: 2.0 * (k2 - 1.0) * norm,
            a2: (1.0 - k / q + k2) * norm,
        }
    }

    /// First-order low-pass embedded in a biquad (b2 = a2 = 0).
    pub fn first_order_lowpass(cutoff_hz: f64, sample_rate: f64) -> Self {
        let lp = OnePoleLowpass::new(cutoff_hz, sample_rate);
        Self {
            b0: lp.b0,
            b1: lp.b1,
            b2: 0.0,
            a1: lp.a1,
            a2: 0.0,
        }
    }

    pub fn filter_in_place(&self, x: &mut [f64]) {
        let (mut s1, mut s2) = (0.0, 0.0);
        for v in x.iter_mut() {
            let input = *v;
            let y = self.b0 * input + s1;
            s1 = self.b1 * input - self.a1 * y + s2;
            s2 = self.b2 * input - self.a2 * y;
            *v = y;
        }
    }

    pub fn magnitude(&self, freq_hz: f64, sample_rate: f64) -> f64 {
        let w = 2.0 * PI * freq_hz / sample_rate;
        let z1 = Complex::from_polar(1.0, -w);
        let z2 = z1 * z1;
        let num = Complex::new(self.b0, 0.0) + z1 * self.b1 + z2 * self.b2;
        let den = Complex::new(1.0, 0.0) + z1 * self.a1 + z2 * self.a2;
        (num / den).norm()
    }
}

/// A cascade of second-order sections.
#[derive(Debug, Clone, PartialEq)]
pub struct Cascade(pub Vec<Biquad>);

impl Cascade {
    /// Third-order Butterworth low-pass: one real pole and one pole pair with Q = 1.
    pub fn butterworth3_lowpass(cutoff_hz: f64, sample_rate: f64) -> Self {
        Cascade(vec![
            Biquad::first_order_lowpass(cutoff_hz, sample_rate),
            Biquad::lowpass(cutoff_hz, 1.0, sample_rate),
        ])
    }

    pub fn filter_in_place(&self, x: &mut [f64]) {
        for section in &self.0 {
            section.filter_in_place(x);
        }
    }

    pub fn magnitude(&self, freq_hz: f64, sample_rate: f64) -> f64 {
        self.0
            .iter()
            .map(|s| s.magnitude(freq_hz, sample_rate))
            .product()
    }
}

fn bessel_i0(x: f64) -> f64 {
    let mut sum = 1.0;
    let mut term = 1.0;
    let half = x / 2.0;
    for k in 1..64 {
        term *= (half / k as f64) * (half / k as f64);
        sum += term;
        if term < sum * 1e-17 {
            break;
        }
    }
    sum
}

fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-12 {
        1.0
    } else {
        (PI * x).sin() / (PI * x)
    }
}

const KAISER_BETA: f64 = 8.0;

/// Kaiser-windowed sinc kernel for a delay of `frac` samples in [0, 1).
/// Returns (first tap offset, taps) so that `y[n] = sum_j h[j] x[n - k - (offset + j)]`.
fn fractional_kernel(frac: f64, taps: usize) -> (isize, Vec<f64>) {
    let half = (taps / 2) as isize;
    let offset = -(half - 1);
    let radius = half as f64;
    let i0b = bessel_i0(KAISER_BETA);
    let mut h: Vec<f64> = (0..taps)
        .map(|j| {
            let t = (offset + j as isize) as f64 - frac;
            let r = (t / radius).clamp(-1.0, 1.0);
            sinc(t) * bessel_i0(KAISER_BETA * (1.0 - r * r).sqrt()) / i0b
        })
        .collect();
    let sum: f64 = h.iter().sum();
    h.iter_mut().for_each(|v| *v /= sum);
    (offset, h)
}

/// Time-varying delay: `out[i] = x(i - delays[i])` by four-point Lagrange
/// interpolation. Samples outside the signal read as zero.
pub fn variable_delay(x: &[f64], delays: &[f64]) -> Vec<f64> {
    debug_assert_eq!(x.len(), delays.len());
    let n = x.len() as isize;
    let at = |k: isize| if (0..n).contains(&k) { x[k as usize] } else { 0.0 };
    delays
        .iter()
        .enumerate()
        .map(|(i, &d)| {
            let t = i as f64 - d;
            let k = t.floor();
            let u = t - k;
            let k = k as isize;
            let (xm, x0, x1, x2) = (at(k - 1), at(k), at(k + 1), at(k + 2));
            let cm = -u * (u - 1.0) * (u - 2.0) / 6.0;
            let c0 = (u + 1.0) * (u - 1.0) * (u - 2.0) / 2.0;
            let c1 = -(u + 1.0) * u * (u - 2.0) / 2.0;
            let c2 = (u + 1.0) * u * (u - 1.0) / 6.0;
            cm * xm + c0 * x0 + c1 * x1 + c2 * x2
        })
        .collect()
}

/// Delays `x` by `delay` samples (negative values advance), keeping the length.
/// Samples shifted in from outside the signal are zero. Integer delays are exact.
pub fn delay(x: &[f64], delay: f64, taps: usize) -> Vec<f64> {
    let mut out = vec![0.0; x.len()];
    delay_into(x, delay, taps, &mut out);
    out
}

pub fn delay_into(x: &[f64], delay: f64, taps: usize, out: &mut [f64]) {
    let n = x.len() as isize;
    let whole = delay.floor();
    let frac = delay - whole;
    let k = whole as isize;
    out.iter_mut().for_each(|v| *v = 0.0);
    if !(1e-9..=1.0 - 1e-9).contains(&frac) {
        let k = if frac > 0.5 { k + 1 } else { k };
        for (i, o) in out.iter_mut().enumerate() {
            let src = i as isize - k;
            if (0..n).contains(&src) {
                *o = x[src as usize];
            }
        }
        return;
    }
    let (offset, h) = fractional_kernel(frac, taps);
    let span = h.len() as isize;
    for (i, o) in out.iter_mut().enumerate() {
        // y[i] = sum_j h[j] x[i - k - offset - j]
        let top = i as isize - k - offset;
        let bottom = top - (span - 1);
        if bottom >= 0 && top < n {
            let mut acc = 0.0;
            for (j, hj) in h.iter().enumerate() {
                acc += hj * x[(top - j as isize) as usize];
            }
            *o = acc;
        } else if top >= 0 && bottom < n {
            let mut acc = 0.0;
            for (j, hj) in h.iter().enumerate() {
                let src = top - j as isize;
                if (0..n).contains(&src) {
                    acc += hj * x[src as usize];
                }
            }
            *o = acc;
        }
    }
}

/// Zero-phase filtering by spectral weighting. `gain(f)` maps a non-negative
/// frequency in Hz to a linear gain; the signal is zero-padded by `pad`
/// samples to keep circular wrap-around away from the output.
pub fn zero_phase_filter(x: &[f64], sample_rate: f64, pad: usize, gain: impl Fn(f64) -> f64) -> Vec<f64> {
    if x.is_empty() {
        return Vec::new();
    }
    let n = (x.len() + pad).next_power_of_two();
    let mut planner = FftPlanner::<f64>::new();
    let fwd = planner.plan_fft_forward(n);
    let inv = planner.plan_fft_inverse(n);
    let mut buf: Vec<Complex<f64>> = x
        .iter()
        .map(|&v| Complex::new(v, 0.0))
        .chain(std::iter::repeat(Complex::new(0.0, 0.0)))
        .take(n)
        .collect();
    fwd.process(&mut buf);
    let df = sample_rate / n as f64;
    for (k, v) in buf.iter_mut().enumerate() {
        let bin = if k <= n / 2 { k } else { n - k };
        *v *= gain(bin as f64 * df);
    }
    inv.process(&mut buf);
    let scale = 1.0 / n as f64;
    buf.iter().take(x.len()).map(|c| c.re * scale).collect()
}

/// Brick-wall band limiting over the whole (circular) signal: bins outside
/// `[low_hz, high_hz]` are zeroed. The FFT length equals the signal length.
pub fn spectral_band_limit(x: &[f64], sample_rate: f64, low_hz: f64, high_hz: f64) -> Vec<f64> {
    let n = x.len();
    if n == 0 {
        return Vec::new();
    }
    let mut planner = FftPlanner::<f64>::new();
    let fwd = planner.plan_fft_forward(n);
    let inv = planner.plan_fft_inverse(n);
    let mut buf: Vec<Complex<f64>> = x.iter().map(|&v| Complex::new(v, 0.0)).collect();
    fwd.process(&mut buf);
    let df = sample_rate / n as f64;
    for (k, v) in buf.iter_mut().enumerate() {
        let bin = if k <= n / 2 { k } else { n - k };
        let f = bin as f64 * df;
        if f < low_hz || f > high_hz {
            *v = Complex::new(0.0, 0.0);
        }
    }
    inv.process(&mut buf);
    let scale = 1.0 / n as f64;
    buf.iter().map(|c| c.re * scale).collect()
}

/// Circular phase shift of every frequency component by `phase` radians
/// (positive frequencies advance). DC and Nyquist are left unchanged.
pub fn phase_shift(x: &[f64], phase: f64) -> Vec<f64> {
    let n = x.len();
    if n == 0 {
        return Vec::new();
    }
    let mut planner = FftPlanner::<f64>::new();
    let fwd = planner.plan_fft_forward(n);
    let inv = planner.plan_fft_inverse(n);
    let mut buf: Vec<Complex<f64>> = x.iter().map(|&v| Complex::new(v, 0.0)).collect();
    fwd.process(&mut buf);
    let rot = Complex::from_polar(1.0, phase);
    for (k, v) in buf.iter_mut().enumerate() {
        if k == 0 || 2 * k == n {
            continue;
        }
        *v *= if 2 * k < n { rot } else { rot.conj() };
    }
    inv.process(&mut buf);
    let scale = 1.0 / n as f64;
    buf.iter().map(|c| c.re * scale).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn db(x: f64) -> f64 {
        20.0 * x.log10()
    }

    #[test]
    fn one_pole_is_3db_down_at_cutoff() {
        let lp = OnePoleLowpass::new(150.0, 48_000.0);
        assert!((db(lp.magnitude(150.0, 48_000.0)) + 3.0103).abs() < 1e-3);
        assert!((lp.magnitude(0.0, 48_000.0) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn bandpass_peaks_at_unity() {
        let bp = Biquad::bandpass(16.0, 1.0, 3000.0);
        assert!((bp.magnitude(16.0, 3000.0) - 1.0).abs() < 1e-9);
        let lo = bp.magnitude(16.0 * 0.618_034, 3000.0);
        let hi = bp.magnitude(16.0 * 1.618_034, 3000.0);
        // Q = 1 half-power points of the analog prototype sit at f0 * (sqrt(5) -+ 1) / 2.
        assert!((db(lo) + 3.0103).abs() < 0.05, "{}", db(lo));
        assert!((db(hi) + 3.0103).abs() < 0.05, "{}", db(hi));
    }

    #[test]
    fn butterworth3_is_3db_at_cutoff_and_18db_per_octave() {
        let lp = Cascade::butterworth3_lowpass(1.0, 3000.0);
        assert!((db(lp.magnitude(1.0, 3000.0)) + 3.0103).abs() < 1e-3);
        let at8 = db(lp.magnitude(8.0, 3000.0));
        assert!((at8 + 54.2).abs() < 0.5, "{at8}");
    }

    #[test]
    fn integer_delay_is_exact_shift() {
        let x: Vec<f64> = (0..50).map(|i| i as f64).collect();
        let y = delay(&x, 12.0, 16);
        assert!(y[..12].iter().all(|&v| v == 0.0));
        assert_eq!(&y[12..], &x[..38]);
        let z = delay(&x, -3.0, 16);
        assert_eq!(&z[..47], &x[3..]);
    }

    #[test]
    fn fractional_delay_matches_shifted_sine() {
        let fs = 48_000.0;
        let f = 1000.0;
        let x: Vec<f64> = (0..4000).map(|i| (2.0 * PI * f * i as f64 / fs).sin()).collect();
        let d = 3.37;
        let y = delay(&x, d, 32);
        let err = (200..3800)
            .map(|i| (y[i] - (2.0 * PI * f * (i as f64 - d) / fs).sin()).abs())
            .fold(0.0, f64::max);
        assert!(err < 1e-3, "{err}");
    }

    #[test]
    fn zero_phase_filter_with_unity_gain_is_identity() {
        let x: Vec<f64> = (0..1000).map(|i| ((i * 7919) % 101) as f64 - 50.0).collect();
        let y = zero_phase_filter(&x, 48_000.0, 256, |_| 1.0);
        for (a, b) in x.iter().zip(&y) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn phase_shift_of_a_periodic_cosine() {
        let n = 480;
        let x: Vec<f64> = (0..n).map(|i| (2.0 * PI * 5.0 * i as f64 / n as f64).cos()).collect();
        let y = phase_shift(&x, PI / 2.0);
        for (i, v) in y.iter().enumerate() {
            let want = (2.0 * PI * 5.0 * i as f64 / n as f64 + PI / 2.0).cos();
            assert!((v - want).abs() < 1e-12);
        }
        assert_eq!(phase_shift(&[], 1.0), Vec::<f64>::new());
    }
}
