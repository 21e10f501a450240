//! Threshold search over mean d′.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One evaluated point of a search.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbePoint {
    pub value: f64,
    pub mean_dprime: f64,
    pub sd_dprime: f64,
    /// Per-trial d′ values.
    pub dprimes: Vec<f64>,
}

impl ProbePoint {
    pub fn new(value: f64, dprimes: Vec<f64>) -> Self {
        let (mean, sd) = mean_sd(&dprimes);
        Self {
            value,
            mean_dprime: mean,
            sd_dprime: sd,
            dprimes,
        }
    }

    fn standard_error(&self) -> f64 {
        if self.dprimes.len() < 2 {
            0.0
        } else {
            self.sd_dprime / (self.dprimes.len() as f64).sqrt()
        }
    }
}

pub fn mean_sd(x: &[f64]) -> (f64, f64) {
    if x.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    if x.len() < 2 {
        return (mean, 0.0);
    }
    let var = x.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchOutcome {
    pub threshold: f64,
    pub bracket: (f64, f64),
    pub trace: Vec<ProbePoint>,
    /// A probe's mean d′ fell outside its bracket by more than two standard errors.
    pub non_monotone: bool,
}

impl SearchOutcome {
    /// SD of per-trial thresholds, each read off its own d′ trace by linear
    /// interpolation at the criterion and clamped to the probed range.
    pub fn per_trial_sd(&self, criterion: f64) -> f64 {
        let mut pts: Vec<&ProbePoint> = self.trace.iter().collect();
        pts.sort_by(|a, b| a.value.total_cmp(&b.value));
        pts.dedup_by(|a, b| a.value == b.value);
        let trials = pts.first().map_or(0, |p| p.dprimes.len());
        if trials < 2 || pts.iter().any(|p| p.dprimes.len() != trials) {
            return 0.0;
        }
        let per_trial: Vec<f64> = (0..trials)
            .map(|t| {
                let mut estimate = pts[pts.len() - 1].value;
                if pts[0].dprimes[t] > criterion {
                    return pts[0].value;
                }
                for w in pts.windows(2) {
                    let (a, b) = (w[0].dprimes[t], w[1].dprimes[t]);
                    if a <= criterion && b > criterion {
                        let f = (criterion - a) / (b - a);
                        estimate = w[0].value + f * (w[1].value - w[0].value);
                        break;
                    }
                }
                estimate
            })
            .collect();
        mean_sd(&per_trial).1
    }
}

/// Bisection for the smallest value whose mean d′ exceeds `criterion`.
///
/// `eval` returns per-trial d′ at a value. Mean d′ must lie at or below the
/// criterion at `bounds.0` and above it at `bounds.1`.
pub fn bisect<F>(mut eval: F, bounds: (f64, f64), resolution: f64, criterion: f64) -> Result<SearchOutcome>
where
    F: FnMut(f64) -> Result<Vec<f64>>,
{
    let (mut lo, mut hi) = bounds;
    if !(lo < hi) || !(resolution > 0.0) {
        return Err(Error::invalid(format!("bad search bounds [{lo}, {hi}] or resolution {resolution}")));
    }
    let mut trace = Vec::new();
    let mut p_lo = ProbePoint::new(lo, eval(lo)?);
    let mut p_hi = ProbePoint::new(hi, eval(hi)?);
    trace.push(p_lo.clone());
    trace.push(p_hi.clone());
    if p_lo.mean_dprime > criterion {
        return Err(Error::NoBracket {
            lo,
            hi,
            detail: format!("mean d' {:.4} at the lower bound already exceeds the criterion", p_lo.mean_dprime),
        });
    }
    if p_hi.mean_dprime <= criterion {
        return Err(Error::NoBracket {
            lo,
            hi,
            detail: format!("mean d' {:.4} at the upper bound does not reach the criterion", p_hi.mean_dprime),
        });
    }
    let mut non_monotone = false;
    while hi - lo > resolution {
        let mid = 0.5 * (lo + hi);
        let p = ProbePoint::new(mid, eval(mid)?);
        let tol_lo = 2.0 * p.standard_error().hypot(p_lo.standard_error());
        let tol_hi = 2.0 * p.standard_error().hypot(p_hi.standard_error());
        if p.mean_dprime < p_lo.mean_dprime - tol_lo - 1e-12 || p.mean_dprime > p_hi.mean_dprime + tol_hi + 1e-12 {
            non_monotone = true;
        }
        trace.push(p.clone());
        if p.mean_dprime > criterion {
            hi = mid;
            p_hi = p;
        } else {
            lo = mid;
            p_lo = p;
        }
    }
    Ok(SearchOutcome {
        threshold: 0.5 * (lo + hi),
        bracket: (lo, hi),
        trace,
        non_monotone,
    })
}

/// Parameters of a transformed up-down staircase.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StaircaseParams {
    /// Consecutive detections required for a downward step.
    pub down: usize,
    pub initial_step: f64,
    pub min_step: f64,
    pub reversals: usize,
    /// Number of final reversals averaged for the estimate.
    pub averaged: usize,
    pub max_steps: usize,
}

impl StaircaseParams {
    pub fn for_bounds(bounds: (f64, f64), resolution: f64) -> Self {
        Self {
            down: 2,
            initial_step: (bounds.1 - bounds.0) / 8.0,
            min_step: 2.0 * resolution,
            reversals: 12,
            averaged: 8,
            max_steps: 400,
        }
    }
}

/// Simulated 2-down 1-up staircase. `detect(value, step)` decides one trial;
/// the step index picks the trial's noise token. Starts at the upper bound and
/// halves the step at each reversal down to `min_step`.
pub fn staircase<F>(mut detect: F, bounds: (f64, f64), params: &StaircaseParams) -> Result<SearchOutcome>
where
    F: FnMut(f64, usize) -> Result<(bool, f64)>,
{
    let (lo, hi) = bounds;
    let mut value = hi;
    let mut step = params.initial_step;
    let mut run = 0;
    let mut last_dir = 0i32;
    let mut reversal_values = Vec::new();
    let mut trace = Vec::new();
    for i in 0..params.max_steps {
        if reversal_values.len() >= params.reversals {
            break;
        }
        let (hit, d) = detect(value, i)?;
        trace.push(ProbePoint::new(value, vec![d]));
        let dir = if hit {
            run += 1;
            if run >= params.down {
                run = 0;
                -1
            } else {
                0
            }
        } else {
            run = 0;
            1
        };
        if dir == 0 {
            continue;
        }
        if last_dir != 0 && dir != last_dir {
            reversal_values.push(value);
            step = (step / 2.0).max(params.min_step);
        }
        last_dir = dir;
        value = (value + dir as f64 * step).clamp(lo, hi);
    }
    if reversal_values.is_empty() {
        return Err(Error::NoBracket {
            lo,
            hi,
            detail: "staircase did not reverse".into(),
        });
    }
    let used = &reversal_values[reversal_values.len().saturating_sub(params.averaged)..];
    let threshold = used.iter().sum::<f64>() / used.len() as f64;
    let bracket = used
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    Ok(SearchOutcome {
        threshold,
        bracket,
        trace,
        non_monotone: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    const CRIT: f64 = std::f64::consts::FRAC_1_SQRT_2;

    #[test]
    fn synthetic_linear_model() {
        let out = bisect(|l| Ok(vec![(l - 60.0) / 10.0]), (30.0, 100.0), 0.1, CRIT).unwrap();
        let exact = 60.0 + 10.0 * CRIT;
        assert!((out.threshold - exact).abs() < 0.1, "{}", out.threshold);
        assert!(out.bracket.1 - out.bracket.0 <= 0.1);
        assert!(!out.non_monotone);
        // Bracket invariant at termination.
        let at = |v: f64| out.trace.iter().find(|p| p.value == v).unwrap().mean_dprime;
        assert!(at(out.bracket.0) <= CRIT && at(out.bracket.1) > CRIT);
    }

    #[test]
    fn bracketing_errors() {
        let above = bisect(|l| Ok(vec![(l - 60.0) / 10.0]), (70.0, 100.0), 0.1, CRIT);
        assert!(matches!(above, Err(Error::NoBracket { .. })));
        let below = bisect(|l| Ok(vec![(l - 60.0) / 10.0]), (0.0, 10.0), 0.1, CRIT);
        assert!(matches!(below, Err(Error::NoBracket { .. })));
    }

    #[test]
    fn flags_non_monotone_curve() {
        // A spike at the first midpoint exceeds the value at the upper bound.
        let f = |l: f64| Ok(vec![if (l - 65.0).abs() < 0.01 { 20.0 } else { (l - 60.0) / 10.0 }]);
        let out = bisect(f, (30.0, 100.0), 0.1, CRIT).unwrap();
        assert!(out.non_monotone);
    }

    fn noisy_threshold_sd(trials: usize, seeds: u64) -> f64 {
        let normal = Normal::new(0.0, 1.0).unwrap();
        let thresholds: Vec<f64> = (0..seeds)
            .map(|s| {
                let mut rng = ChaCha8Rng::seed_from_u64(s);
                let offsets: Vec<f64> = (0..trials).map(|_| normal.sample(&mut rng)).collect();
                // Frozen per-trial offsets shared by every probe.
                let f = |l: f64| Ok(offsets.iter().map(|o| (l - 60.0 + o) / 10.0).collect());
                bisect(f, (30.0, 100.0), 0.01, CRIT).unwrap().threshold
            })
            .collect();
        mean_sd(&thresholds).1
    }

    #[test]
    fn doubling_trials_shrinks_spread() {
        let a = noisy_threshold_sd(8, 400);
        let b = noisy_threshold_sd(16, 400);
        let ratio = a / b;
        assert!((ratio - 2f64.sqrt()).abs() < 0.2, "{ratio}");
    }

    #[test]
    fn per_trial_sd_recovers_offsets() {
        let offsets = [-1.0, 0.0, 1.0];
        let f = |l: f64| Ok(offsets.iter().map(|o| (l - 60.0 + o) / 10.0).collect());
        let out = bisect(f, (30.0, 100.0), 0.01, CRIT).unwrap();
        assert!((out.per_trial_sd(CRIT) - 1.0).abs() < 0.05, "{}", out.per_trial_sd(CRIT));
    }

    #[test]
    fn staircase_converges_near_deterministic_threshold() {
        let params = StaircaseParams::for_bounds((30.0, 100.0), 0.1);
        let f = |l: f64, _| {
            let d = (l - 60.0) / 10.0;
            Ok((d > CRIT, d))
        };
        let out = staircase(f, (30.0, 100.0), &params).unwrap();
        assert!((out.threshold - 67.07).abs() < 1.0, "{}", out.threshold);
    }
}
