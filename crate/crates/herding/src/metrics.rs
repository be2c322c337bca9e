//! Herding success metrics and run classification.
//!
//! `l_mu` is the norm of the time-averaged centroid-to-reference error and
//! `l_sigma` the norm of the time-averaged per-axis mean squared deviation of
//! the evaders about their centroid (the herd spread). A run fails when an
//! evader escapes the herders' convex hull for a sustained interval or the
//! centroid error is large; it loses coalition when the herd stays captive
//! but too spread out.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{self, Point2};
use crate::scalar::Real;
use crate::simulator::RunLog;

/// Three-way outcome of a run.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Classification {
    Success,
    CoalitionLoss,
    Failure,
}

impl std::fmt::Display for Classification {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::Success => write!(f, "Success"),
            Self::CoalitionLoss => write!(f, "CoalitionLoss"),
            Self::Failure => write!(f, "Failure"),
        }
    }
}

/// Classification thresholds. The defaults separate the published outcome
/// grid: successful cells stay below 0.6 m of averaged centroid error and
/// 1.0 m^2 of averaged spread, and an evader counts as escaped after more
/// than 5 s continuously outside the herders' hull.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
#[serde(bound(
    serialize = "T: Real + Serialize",
    deserialize = "T: Real + serde::Deserialize<'de>"
))]
pub struct ClassifyThresholds<T> {
    pub theta_mu: T,
    pub theta_sigma: T,
    pub t_escape: T,
}

impl<T: Real> Default for ClassifyThresholds<T> {
    fn default() -> Self {
        Self {
            theta_mu: T::of(0.6),
            theta_sigma: T::of(1.0),
            t_escape: T::of(5.0),
        }
    }
}

impl<T: Real> ClassifyThresholds<T> {
    pub fn validate(&self) -> Result<()> {
        if !(self.theta_mu > T::zero())
            || !(self.theta_sigma > T::zero())
            || !(self.t_escape > T::zero())
        {
            return Err(Error::InvalidConfig("thresholds must be positive".into()));
        }
        Ok(())
    }
}

/// Metric values, escape count and classification over a window.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct MetricReport<T> {
    pub l_mu_m: T,
    pub l_sigma_m2: T,
    pub classification: Classification,
    pub escape_count: usize,
    pub window: (T, T),
}

fn window_indices<T: Real>(log: &RunLog<T>, t0: T, t1: T) -> Result<std::ops::Range<usize>> {
    if log.records.is_empty() || !(t0 < t1) {
        return Err(Error::WindowOutsideLog);
    }
    let slack = T::of(1e-9) * (T::one() + t1.abs());
    let first = log.records[0].time;
    let last = log.records[log.records.len() - 1].time;
    if t0 < first - slack || t1 > last + slack {
        return Err(Error::WindowOutsideLog);
    }
    let lo = log.records.iter().position(|r| r.time >= t0 - slack);
    let hi = log.records.iter().rposition(|r| r.time <= t1 + slack);
    match (lo, hi) {
        (Some(lo), Some(hi)) if hi > lo => Ok(lo..hi + 1),
        _ => Err(Error::WindowOutsideLog),
    }
}

/// Trapezoidal time average of a per-record 2-vector over `[t0, t1]`.
fn time_average<T: Real>(
    log: &RunLog<T>,
    t0: T,
    t1: T,
    mut value: impl FnMut(usize) -> Point2<T>,
) -> Result<Point2<T>> {
    let range = window_indices(log, t0, t1)?;
    let mut integral = Point2::zero();
    let mut prev_t = log.records[range.start].time;
    let mut prev_v = value(range.start);
    for k in range.clone().skip(1) {
        let t = log.records[k].time;
        let v = value(k);
        integral = integral + (prev_v + v).scaled((t - prev_t) / T::of(2.0));
        prev_t = t;
        prev_v = v;
    }
    let span = log.records[range.end - 1].time - log.records[range.start].time;
    Ok(integral.scaled(T::one() / span))
}

fn centroid_error<T: Real>(log: &RunLog<T>, k: usize) -> Point2<T> {
    let record = &log.records[k];
    let c = geometry::centroid(&record.evaders).expect("non-empty herd");
    c - record.reference.position
}

fn spread_vector<T: Real>(log: &RunLog<T>, k: usize) -> Point2<T> {
    let record = &log.records[k];
    let c = geometry::centroid(&record.evaders).expect("non-empty herd");
    let mut sum = Point2::zero();
    for &e in &record.evaders {
        let d = e - c;
        sum = sum + Point2::new(d.x * d.x, d.y * d.y);
    }
    sum.scaled(T::one() / T::of(record.evaders.len() as f64))
}

/// Norm of the time-averaged centroid-to-reference error over `[t0, t1]`.
pub fn l_mu<T: Real>(log: &RunLog<T>, t0: T, t1: T) -> Result<T> {
    Ok(time_average(log, t0, t1, |k| centroid_error(log, k))?.norm())
}

/// Norm of the time-averaged per-axis mean squared deviation of the evaders
/// about their centroid over `[t0, t1]`.
pub fn l_sigma<T: Real>(log: &RunLog<T>, t0: T, t1: T) -> Result<T> {
    Ok(time_average(log, t0, t1, |k| spread_vector(log, k))?.norm())
}

/// Number of evaders that stay outside the herders' convex hull for strictly
/// more than `t_escape` consecutive seconds anywhere in the log.
pub fn escape_count<T: Real>(log: &RunLog<T>, t_escape: T) -> Result<usize> {
    if log.records.is_empty() {
        return Err(Error::WindowOutsideLog);
    }
    let m = log.records[0].evaders.len();
    let mut streak = vec![0usize; m];
    let mut escaped = vec![false; m];
    for record in &log.records {
        let hull = geometry::convex_hull(&record.herders)?;
        for (j, &e) in record.evaders.iter().enumerate() {
            if geometry::point_in_hull(e, &hull, &record.herders)? {
                streak[j] = 0;
            } else {
                streak[j] += 1;
                // Duration between the first and last sample of the streak.
                if streak[j] >= 2 && T::of((streak[j] - 1) as f64) * log.dt > t_escape {
                    escaped[j] = true;
                }
            }
        }
    }
    Ok(escaped.iter().filter(|&&e| e).count())
}

/// Classify a run over the window `[t0, t1]`: `Failure` on any escape or an
/// averaged centroid error above `theta_mu`; otherwise `CoalitionLoss` when
/// the averaged spread exceeds `theta_sigma`; otherwise `Success`. Escapes
/// are detected over the whole log, not just the window.
pub fn classify<T: Real>(
    log: &RunLog<T>,
    t0: T,
    t1: T,
    thresholds: &ClassifyThresholds<T>,
) -> Result<MetricReport<T>> {
    thresholds.validate()?;
    let l_mu_m = l_mu(log, t0, t1)?;
    let l_sigma_m2 = l_sigma(log, t0, t1)?;
    let escapes = escape_count(log, thresholds.t_escape)?;
    let classification = if escapes > 0 || l_mu_m > thresholds.theta_mu {
        Classification::Failure
    } else if l_sigma_m2 > thresholds.theta_sigma {
        Classification::CoalitionLoss
    } else {
        Classification::Success
    };
    Ok(MetricReport {
        l_mu_m,
        l_sigma_m2,
        classification,
        escape_count: escapes,
        window: (t0, t1),
    })
}

/// Classification with window fallbacks for short or aborted logs: prefer
/// `[t0, t1]`, fall back to the full log span, and for a single-record log
/// use the snapshot values (the time average of a constant).
pub fn classify_with_fallback<T: Real>(
    log: &RunLog<T>,
    t0: T,
    t1: T,
    thresholds: &ClassifyThresholds<T>,
) -> Result<MetricReport<T>> {
    if log.records.is_empty() {
        return Err(Error::WindowOutsideLog);
    }
    if let Ok(report) = classify(log, t0, t1, thresholds) {
        return Ok(report);
    }
    let first = log.records[0].time;
    let last = log.records[log.records.len() - 1].time;
    if first < last {
        return classify(log, first, last, thresholds);
    }
    thresholds.validate()?;
    let l_mu_m = centroid_error(log, 0).norm();
    let l_sigma_m2 = spread_vector(log, 0).norm();
    let escapes = escape_count(log, thresholds.t_escape)?;
    let classification = if escapes > 0 || l_mu_m > thresholds.theta_mu {
        Classification::Failure
    } else if l_sigma_m2 > thresholds.theta_sigma {
        Classification::CoalitionLoss
    } else {
        Classification::Success
    };
    Ok(MetricReport {
        l_mu_m,
        l_sigma_m2,
        classification,
        escape_count: escapes,
        window: (first, last),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::controller::Reference;
    use crate::simulator::StepRecord;
    use approx::assert_relative_eq;

    /// Synthetic log with explicit evader positions, herders parked far out
    /// on a big triangle, and the reference at a fixed point.
    fn synthetic_log(
        times: &[f64],
        evaders_at: impl Fn(f64) -> Vec<Point2<f64>>,
        reference_at: impl Fn(f64) -> Point2<f64>,
    ) -> RunLog<f64> {
        let herders = vec![
            Point2::new(-1000.0, -1000.0),
            Point2::new(1000.0, -1000.0),
            Point2::new(0.0, 1500.0),
        ];
        let records = times
            .iter()
            .map(|&t| {
                let evaders = evaders_at(t);
                let m = evaders.len();
                StepRecord {
                    time: t,
                    evaders,
                    herders: herders.clone(),
                    reference: Reference::new(reference_at(t), Point2::zero()),
                    selected: vec![],
                    h_norm: 0.0,
                    evader_saturated: vec![false; m],
                    herder_saturated: vec![false; 3],
                    controllability_loss: false,
                }
            })
            .collect();
        RunLog {
            records,
            dt: times.get(1).map(|&t1| t1 - times[0]).unwrap_or(1.0),
            abort: None,
        }
    }

    fn uniform_times(t0: f64, t1: f64, steps: usize) -> Vec<f64> {
        (0..=steps)
            .map(|k| t0 + (t1 - t0) * k as f64 / steps as f64)
            .collect()
    }

    #[test]
    fn l_mu_zero_when_centroid_tracks() {
        let times = uniform_times(0.0, 10.0, 100);
        let log = synthetic_log(
            &times,
            |_| vec![Point2::new(1.0, 1.0), Point2::new(3.0, 1.0)],
            |_| Point2::new(2.0, 1.0),
        );
        assert_relative_eq!(l_mu(&log, 0.0, 10.0).unwrap(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn l_mu_of_constant_offset() {
        let times = uniform_times(0.0, 10.0, 100);
        let log = synthetic_log(
            &times,
            |_| vec![Point2::new(3.0, 4.0)],
            |_| Point2::new(0.0, 0.0),
        );
        assert_relative_eq!(l_mu(&log, 0.0, 10.0).unwrap(), 5.0, max_relative = 1e-12);
    }

    #[test]
    fn l_mu_of_sinusoid_over_full_period_vanishes() {
        let period = 2.0 * std::f64::consts::PI;
        let times = uniform_times(0.0, period, 2000);
        let log = synthetic_log(
            &times,
            |t| vec![Point2::new(t.sin(), 0.0)],
            |_| Point2::new(0.0, 0.0),
        );
        assert!(l_mu(&log, 0.0, period).unwrap() < 1e-6);
    }

    #[test]
    fn l_sigma_zero_for_coincident_evaders() {
        let times = uniform_times(0.0, 5.0, 10);
        let log = synthetic_log(
            &times,
            |_| vec![Point2::new(1.0, 2.0); 4],
            |_| Point2::new(1.0, 2.0),
        );
        assert_eq!(l_sigma(&log, 0.0, 5.0).unwrap(), 0.0);
    }

    #[test]
    fn l_sigma_of_fixed_pair() {
        let times = uniform_times(0.0, 5.0, 50);
        let log = synthetic_log(
            &times,
            |_| vec![Point2::new(-1.0, 0.0), Point2::new(1.0, 0.0)],
            |_| Point2::new(0.0, 0.0),
        );
        assert_relative_eq!(l_sigma(&log, 0.0, 5.0).unwrap(), 1.0, max_relative = 1e-12);
    }

    #[test]
    fn static_log_metrics_equal_snapshot_values() {
        let times = uniform_times(0.0, 8.0, 20);
        let evaders = vec![Point2::new(0.0, 0.0), Point2::new(2.0, 2.0)];
        let log = synthetic_log(&times, |_| evaders.clone(), |_| Point2::new(5.0, 5.0));
        let c = Point2::new(1.0, 1.0);
        let expected_mu = c.dist(Point2::new(5.0, 5.0));
        let expected_sigma = Point2::new(1.0, 1.0).norm();
        assert_relative_eq!(
            l_mu(&log, 0.0, 8.0).unwrap(),
            expected_mu,
            max_relative = 1e-12
        );
        assert_relative_eq!(
            l_sigma(&log, 0.0, 8.0).unwrap(),
            expected_sigma,
            max_relative = 1e-12
        );
    }

    #[test]
    fn metrics_invariant_to_evader_relabeling() {
        let times = uniform_times(0.0, 4.0, 16);
        let a = synthetic_log(
            &times,
            |t| vec![Point2::new(t, 0.0), Point2::new(-t, 1.0), Point2::new(0.5, -t)],
            |_| Point2::new(0.1, 0.2),
        );
        let b = synthetic_log(
            &times,
            |t| vec![Point2::new(0.5, -t), Point2::new(t, 0.0), Point2::new(-t, 1.0)],
            |_| Point2::new(0.1, 0.2),
        );
        assert_relative_eq!(
            l_mu(&a, 0.0, 4.0).unwrap(),
            l_mu(&b, 0.0, 4.0).unwrap(),
            max_relative = 1e-12
        );
        assert_relative_eq!(
            l_sigma(&a, 0.0, 4.0).unwrap(),
            l_sigma(&b, 0.0, 4.0).unwrap(),
            max_relative = 1e-12
        );
    }

    #[test]
    fn l_mu_translation_invariant() {
        let times = uniform_times(0.0, 4.0, 16);
        let offset = Point2::new(7.0, -3.0);
        let a = synthetic_log(
            &times,
            |t| vec![Point2::new(t, 1.0), Point2::new(1.0, t)],
            |_| Point2::new(0.5, 0.5),
        );
        let b = synthetic_log(
            &times,
            |t| vec![Point2::new(t, 1.0) + offset, Point2::new(1.0, t) + offset],
            |_| Point2::new(0.5, 0.5) + offset,
        );
        assert_relative_eq!(
            l_mu(&a, 0.0, 4.0).unwrap(),
            l_mu(&b, 0.0, 4.0).unwrap(),
            max_relative = 1e-9,
            epsilon = 1e-12
        );
    }

    #[test]
    fn window_errors() {
        let times = uniform_times(0.0, 4.0, 16);
        let log = synthetic_log(&times, |_| vec![Point2::zero()], |_| Point2::zero());
        assert_eq!(l_mu(&log, 2.0, 9.0).unwrap_err(), Error::WindowOutsideLog);
        assert_eq!(l_mu(&log, -3.0, 2.0).unwrap_err(), Error::WindowOutsideLog);
        assert_eq!(l_mu(&log, 3.0, 3.0).unwrap_err(), Error::WindowOutsideLog);
    }

    #[test]
    fn diverging_evader_classifies_as_failure() {
        let times = uniform_times(0.0, 100.0, 400);
        let log = synthetic_log(
            &times,
            |t| vec![Point2::new(0.0, 0.0), Point2::new(2000.0 + 40.0 * t, 0.0)],
            |_| Point2::new(0.0, 0.0),
        );
        let report = classify(&log, 0.0, 100.0, &ClassifyThresholds::default()).unwrap();
        assert_eq!(report.classification, Classification::Failure);
        assert_eq!(report.escape_count, 1);
    }

    #[test]
    fn spread_above_threshold_is_coalition_loss() {
        let times = uniform_times(0.0, 10.0, 40);
        // Pair straddling the reference: centroid error 0, spread 1.1 > 1.0.
        let half = 1.1f64.sqrt();
        let log = synthetic_log(
            &times,
            move |_| vec![Point2::new(-half, 0.0), Point2::new(half, 0.0)],
            |_| Point2::new(0.0, 0.0),
        );
        let report = classify(&log, 0.0, 10.0, &ClassifyThresholds::default()).unwrap();
        assert_eq!(report.classification, Classification::CoalitionLoss);
        assert!(report.l_mu_m < 1e-9);
        assert!(report.l_sigma_m2 > 1.0);
    }

    #[test]
    fn compact_tracking_herd_is_success() {
        let times = uniform_times(0.0, 10.0, 40);
        let log = synthetic_log(
            &times,
            |_| vec![Point2::new(-0.3, 0.0), Point2::new(0.3, 0.0)],
            |_| Point2::new(0.0, 0.0),
        );
        let report = classify(&log, 0.0, 10.0, &ClassifyThresholds::default()).unwrap();
        assert_eq!(report.classification, Classification::Success);
        assert_eq!(report.escape_count, 0);
    }

    #[test]
    fn scaling_spread_never_improves_classification() {
        let times = uniform_times(0.0, 10.0, 40);
        let rank = |c: Classification| match c {
            Classification::Success => 0,
            Classification::CoalitionLoss => 1,
            Classification::Failure => 2,
        };
        let mut prev = 0;
        for scale in [0.3, 1.2, 40.0, 2000.0] {
            let log = synthetic_log(
                &times,
                move |_| vec![Point2::new(-scale, 0.0), Point2::new(scale, 0.0)],
                |_| Point2::new(0.0, 0.0),
            );
            let report = classify(&log, 0.0, 10.0, &ClassifyThresholds::default()).unwrap();
            let r = rank(report.classification);
            assert!(r >= prev, "classification improved when spread grew");
            prev = r;
        }
    }

    #[test]
    fn brief_excursion_is_not_an_escape() {
        // Outside the hull for 2 s, then back inside: below the 5 s limit.
        let times = uniform_times(0.0, 10.0, 100);
        let log = synthetic_log(
            &times,
            |t| {
                let x = if (4.0..6.0).contains(&t) { 5000.0 } else { 0.0 };
                vec![Point2::new(x, 0.0)]
            },
            |_| Point2::new(0.0, 0.0),
        );
        assert_eq!(escape_count(&log, 5.0).unwrap(), 0);
        let log_long = synthetic_log(
            &times,
            |t| {
                let x = if t >= 4.0 { 5000.0 } else { 0.0 };
                vec![Point2::new(x, 0.0)]
            },
            |_| Point2::new(0.0, 0.0),
        );
        assert_eq!(escape_count(&log_long, 5.0).unwrap(), 1);
    }

    #[test]
    fn fallback_handles_single_record_logs() {
        let log = synthetic_log(&[0.0], |_| vec![Point2::new(3.0, 4.0)], |_| Point2::zero());
        let report =
            classify_with_fallback(&log, 160.0, 400.0, &ClassifyThresholds::default()).unwrap();
        assert_eq!(report.classification, Classification::Failure);
        assert_relative_eq!(report.l_mu_m, 5.0, max_relative = 1e-12);
    }

    #[test]
    fn report_serializes_with_named_fields() {
        let report = MetricReport {
            l_mu_m: 0.1,
            l_sigma_m2: 0.2,
            classification: Classification::Success,
            escape_count: 0,
            window: (160.0, 400.0),
        };
        let json = serde_json::to_value(report).unwrap();
        assert_eq!(json["l_mu_m"], 0.1);
        assert_eq!(json["l_sigma_m2"], 0.2);
        assert_eq!(json["classification"], "Success");
        assert_eq!(json["escape_count"], 0);
        assert_eq!(json["window"][0], 160.0);
    }
}
