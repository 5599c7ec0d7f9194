use super::LoopRecord;
use crate::error::{Error, Result};

/// Peak-to-trough swings of the overconfidence series.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CycleSummary {
    /// Completed peak-then-trough swings.
    pub count: usize,
    pub mean_amplitude: f64,
    /// Mean distance between successive peaks, in periods; zero with fewer than two peaks.
    pub mean_period: f64,
}

/// Detection settings.
///
/// A turning point is confirmed once the series retraces by at least
/// `max(min_swing, relative_swing * |turning value|)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CycleOptions {
    /// Leading periods ignored.
    pub burn_in: usize,
    pub min_swing: f64,
    pub relative_swing: f64,
}

impl Default for CycleOptions {
    fn default() -> Self {
        Self {
            burn_in: 50,
            min_swing: 0.0,
            relative_swing: 0.25,
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Trend {
    Unknown,
    Up,
    Down,
}

/// Turning points of `xs` that reverse by at least `min_swing`, as `(index, value, is_peak)`.
fn pivots(xs: &[f64], opts: &CycleOptions) -> Vec<(usize, f64, bool)> {
    let mut out = Vec::new();
    let mut trend = Trend::Unknown;
    let (mut hi, mut lo) = ((0, xs[0]), (0, xs[0]));
    let reverses = |d: f64, from: f64| d > 0.0 && d >= opts.min_swing.max(opts.relative_swing * from.abs());
    for (i, &x) in xs.iter().enumerate().skip(1) {
        match trend {
            Trend::Unknown => {
                if x > hi.1 {
                    hi = (i, x);
                }
                if x < lo.1 {
                    lo = (i, x);
                }
                if reverses(hi.1 - lo.1, if hi.0 > lo.0 { lo.1 } else { hi.1 }) {
                    if hi.0 > lo.0 {
                        out.push((lo.0, lo.1, false));
                        trend = Trend::Up;
                    } else {
                        out.push((hi.0, hi.1, true));
                        trend = Trend::Down;
                    }
                }
            }
            Trend::Up => {
                if x > hi.1 {
                    hi = (i, x);
                } else if reverses(hi.1 - x, hi.1) {
                    out.push((hi.0, hi.1, true));
                    trend = Trend::Down;
                    lo = (i, x);
                }
            }
            Trend::Down => {
                if x < lo.1 {
                    lo = (i, x);
                } else if reverses(x - lo.1, lo.1) {
                    out.push((lo.0, lo.1, false));
                    trend = Trend::Up;
                    hi = (i, x);
                }
            }
        }
    }
    out
}

/// Detect overconfidence cycles. Each confirmed peak followed by a confirmed
/// trough is one cycle, with amplitude peak minus trough.
pub fn overconfidence_cycles(records: &[LoopRecord], opts: &CycleOptions) -> Result<CycleSummary> {
    if records.len() < 10 {
        return Err(Error::TooFewRecords { needed: 10, got: records.len() });
    }
    if !(opts.min_swing >= 0.0 && opts.relative_swing >= 0.0) {
        return Err(Error::Config("swing thresholds must be non-negative".into()));
    }
    let xs: Vec<f64> = records.iter().skip(opts.burn_in).map(|r| r.overconfidence).collect();
    if xs.is_empty() {
        return Err(Error::TooFewRecords { needed: opts.burn_in + 1, got: records.len() });
    }
    Ok(summarise(&pivots(&xs, opts)))
}

fn summarise(p: &[(usize, f64, bool)]) -> CycleSummary {
    let amps: Vec<f64> = p
        .windows(2)
        .filter(|w| w[0].2 && !w[1].2)
        .map(|w| w[0].1 - w[1].1)
        .collect();
    let peaks: Vec<usize> = p.iter().filter(|x| x.2).map(|x| x.0).collect();
    let count = amps.len();
    CycleSummary {
        count,
        mean_amplitude: if count > 0 { amps.iter().sum::<f64>() / count as f64 } else { 0.0 },
        mean_period: if peaks.len() > 1 {
            (peaks[peaks.len() - 1] - peaks[0]) as f64 / (peaks.len() - 1) as f64
        } else {
            0.0
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn recs(xs: &[f64]) -> Vec<LoopRecord> {
        xs.iter()
            .enumerate()
            .map(|(i, &x)| LoopRecord {
                period: i as u64 + 1,
                alpha: 0.0,
                sigma_z2_emp: 0.0,
                sigma_hat2_emp: 0.0,
                overconfidence: x,
                mean_abs_price_error: 0.0,
                mean_payoff: 0.0,
                payoff_variance: 0.0,
                mean_price_gap: 0.0,
                price_gap_se: 0.0,
                reset: false,
            })
            .collect()
    }

    fn abs(min_swing: f64) -> CycleOptions {
        CycleOptions { burn_in: 0, min_swing, relative_swing: 0.0 }
    }

    #[test]
    fn monotone_has_no_cycles() {
        let xs: Vec<f64> = (0..50).map(|i| (i as f64).sqrt()).collect();
        assert_eq!(overconfidence_cycles(&recs(&xs), &abs(0.0)).unwrap().count, 0);
        let down: Vec<f64> = xs.iter().map(|x| -x).collect();
        assert_eq!(overconfidence_cycles(&recs(&down), &abs(0.0)).unwrap().count, 0);
    }

    #[test]
    fn constant_has_no_cycles() {
        let s = overconfidence_cycles(&recs(&[3.0; 40]), &abs(0.0)).unwrap();
        assert_eq!((s.count, s.mean_amplitude), (0, 0.0));
    }

    #[test]
    fn sinusoid_amplitude_and_period() {
        let amp = 3.0;
        let xs: Vec<f64> = (0..500)
            .map(|i| 1.0 + 0.5 * amp * (2.0 * std::f64::consts::PI * i as f64 / 37.0).sin())
            .collect();
        let s = overconfidence_cycles(&recs(&xs), &abs(0.1)).unwrap();
        assert!(s.count >= 12);
        assert!((s.mean_amplitude - amp).abs() < 0.05 * amp);
        assert!((s.mean_period - 37.0).abs() < 1.0);
    }

    #[test]
    fn small_wiggles_are_ignored() {
        let xs: Vec<f64> = (0..200)
            .map(|i| i as f64 * 0.1 + if i % 2 == 0 { 0.1 } else { -0.1 })
            .collect();
        assert_eq!(overconfidence_cycles(&recs(&xs), &abs(0.5)).unwrap().count, 0);
        assert!(overconfidence_cycles(&recs(&xs), &abs(0.0)).unwrap().count > 50);
    }

    #[test]
    fn relative_threshold_scales_with_level() {
        let xs: Vec<f64> = (0..100).map(|i| 100.0 + if i % 10 < 5 { 10.0 } else { 0.0 }).collect();
        let opts = CycleOptions { burn_in: 0, min_swing: 0.0, relative_swing: 0.25 };
        assert_eq!(overconfidence_cycles(&recs(&xs), &opts).unwrap().count, 0);
        let ys: Vec<f64> = xs.iter().map(|x| x - 95.0).collect();
        assert!(overconfidence_cycles(&recs(&ys), &opts).unwrap().count >= 8);
    }

    #[test]
    fn short_series_rejected() {
        assert!(overconfidence_cycles(&recs(&[1.0; 5]), &abs(0.0)).is_err());
    }
}
