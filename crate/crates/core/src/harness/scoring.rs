//! Detection scoring of a violation log against ground truth.

use serde::{Deserialize, Serialize};

use super::generator::{GroundTruth, TruthInterval};
use crate::metrics::MetricFamily;

/// The parts of a violation that scoring looks at.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Detection {
    pub event_index: u64,
    pub family: MetricFamily,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntervalScore {
    pub mutation: String,
    pub family: MetricFamily,
    pub onset: u64,
    pub end: u64,
    pub first_detection: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionScore {
    pub violations: u64,
    pub true_positives: u64,
    pub false_positives: u64,
    /// True positives over violations; undefined without violations.
    pub precision: Option<f64>,
    /// Detected intervals over intervals; undefined without mutations.
    pub recall: Option<f64>,
    /// Largest delay from onset to first true positive over detected intervals.
    pub latency: Option<u64>,
    pub intervals: Vec<IntervalScore>,
}

fn matches(i: &TruthInterval, d: &Detection, grace: u64) -> bool {
    d.family == i.family && d.event_index >= i.onset && d.event_index <= i.end.saturating_add(grace)
}

/// A violation is a true positive when its metric family matches an
/// interval's and its event index lies in `[onset, end + grace]`.
pub fn score_detection(detections: &[Detection], truth: &GroundTruth, grace: u64) -> DetectionScore {
    let tp = detections
        .iter()
        .filter(|d| truth.intervals.iter().any(|i| matches(i, d, grace)))
        .count() as u64;
    let intervals: Vec<IntervalScore> = truth
        .intervals
        .iter()
        .map(|i| IntervalScore {
            mutation: i.mutation.clone(),
            family: i.family,
            onset: i.onset,
            end: i.end,
            first_detection: detections
                .iter()
                .filter(|d| matches(i, d, grace))
                .map(|d| d.event_index)
                .min(),
        })
        .collect();
    let n = detections.len() as u64;
    let detected = intervals.iter().filter(|i| i.first_detection.is_some()).count();
    DetectionScore {
        violations: n,
        true_positives: tp,
        false_positives: n - tp,
        precision: (n > 0).then(|| tp as f64 / n as f64),
        recall: (!intervals.is_empty()).then(|| detected as f64 / intervals.len() as f64),
        latency: intervals
            .iter()
            .filter_map(|i| i.first_detection.map(|f| f - i.onset))
            .max(),
        intervals,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn truth(onset: u64, end: u64) -> GroundTruth {
        GroundTruth {
            scenario: "s".into(),
            seed: 1,
            n_events: 20_000,
            intervals: vec![TruthInterval {
                mutation: "m".into(),
                effect: "bias(b,0.5)".into(),
                family: MetricFamily::Fairness,
                onset,
                end,
            }],
        }
    }

    fn det(event_index: u64, family: MetricFamily) -> Detection {
        Detection { event_index, family }
    }

    #[test]
    fn perfect_detection_at_onset() {
        let s = score_detection(&[det(10_000, MetricFamily::Fairness)], &truth(10_000, 19_999), 4000);
        assert_eq!((s.precision, s.recall, s.latency), (Some(1.0), Some(1.0), Some(0)));
    }

    #[test]
    fn empty_log_has_zero_recall() {
        let s = score_detection(&[], &truth(10_000, 19_999), 4000);
        assert_eq!((s.precision, s.recall, s.latency), (None, Some(0.0), None));
    }

    #[test]
    fn latency_grace_and_family() {
        let log = [
            det(9_999, MetricFamily::Fairness),
            det(11_500, MetricFamily::Fairness),
            det(11_000, MetricFamily::Flag),
            det(14_000, MetricFamily::Fairness),
            det(14_001, MetricFamily::Fairness),
        ];
        let s = score_detection(&log, &truth(10_000, 10_000), 4000);
        assert_eq!(s.latency, Some(1500));
        assert_eq!((s.true_positives, s.false_positives), (2, 3));
        assert_eq!(s.precision, Some(0.4));
    }
}
