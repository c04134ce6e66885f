use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dsml::{parse_call, CallArg};
use crate::engine::EventKind;

/// A reference to one entry of the metric catalog, with its arguments bound.
#[derive(Debug, Clone, PartialEq)]
pub enum MetricRef {
    DemographicParity,
    DisparateImpact,
    KsDrift { field: String },
    PsiDrift { field: String, bins: u32 },
    PredictionDrift,
    Accuracy,
    MeanConfidence,
    RangeRate { field: String, low: f64, high: f64 },
    FlagRate { field: String },
}

/// Coarse grouping of metrics, used to match violations against injected faults.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricFamily {
    Fairness,
    InputDrift,
    PredictionDrift,
    Performance,
    Range,
    Flag,
}

impl fmt::Display for MetricFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MetricFamily::Fairness => "fairness",
            MetricFamily::InputDrift => "input_drift",
            MetricFamily::PredictionDrift => "prediction_drift",
            MetricFamily::Performance => "performance",
            MetricFamily::Range => "range",
            MetricFamily::Flag => "flag",
        })
    }
}

pub const CATALOG: [&str; 9] = [
    "demographic_parity",
    "disparate_impact",
    "ks_drift",
    "psi_drift",
    "prediction_drift",
    "accuracy",
    "mean_confidence",
    "range_rate",
    "flag_rate",
];

impl MetricRef {
    pub fn name(&self) -> &'static str {
        match self {
            MetricRef::DemographicParity => "demographic_parity",
            MetricRef::DisparateImpact => "disparate_impact",
            MetricRef::KsDrift { .. } => "ks_drift",
            MetricRef::PsiDrift { .. } => "psi_drift",
            MetricRef::PredictionDrift => "prediction_drift",
            MetricRef::Accuracy => "accuracy",
            MetricRef::MeanConfidence => "mean_confidence",
            MetricRef::RangeRate { .. } => "range_rate",
            MetricRef::FlagRate { .. } => "flag_rate",
        }
    }

    pub fn family(&self) -> MetricFamily {
        match self {
            MetricRef::DemographicParity | MetricRef::DisparateImpact => MetricFamily::Fairness,
            MetricRef::KsDrift { .. } | MetricRef::PsiDrift { .. } => MetricFamily::InputDrift,
            MetricRef::PredictionDrift => MetricFamily::PredictionDrift,
            MetricRef::Accuracy | MetricRef::MeanConfidence => MetricFamily::Performance,
            MetricRef::RangeRate { .. } => MetricFamily::Range,
            MetricRef::FlagRate { .. } => MetricFamily::Flag,
        }
    }

    pub fn is_fairness(&self) -> bool {
        self.family() == MetricFamily::Fairness
    }

    /// Drift metrics compare the window against a baseline sample.
    pub fn needs_baseline(&self) -> bool {
        matches!(
            self,
            MetricRef::KsDrift { .. } | MetricRef::PsiDrift { .. } | MetricRef::PredictionDrift
        )
    }

    /// Event kinds an evaluator of this metric consumes.
    pub fn event_kinds(&self) -> &'static [EventKind] {
        match self {
            MetricRef::DemographicParity
            | MetricRef::DisparateImpact
            | MetricRef::PredictionDrift
            | MetricRef::MeanConfidence => &[EventKind::Prediction],
            MetricRef::Accuracy => &[EventKind::Prediction, EventKind::Feedback],
            MetricRef::KsDrift { .. }
            | MetricRef::PsiDrift { .. }
            | MetricRef::RangeRate { .. }
            | MetricRef::FlagRate { .. } => &[EventKind::Prediction, EventKind::Signal],
        }
    }

    /// Event fields read by an evaluator of this metric.
    pub fn fields(&self, sensitive_attributes: &[String]) -> Vec<String> {
        match self {
            MetricRef::DemographicParity | MetricRef::DisparateImpact => {
                let mut f = sensitive_attributes.to_vec();
                f.push("prediction".into());
                f
            }
            MetricRef::KsDrift { field }
            | MetricRef::PsiDrift { field, .. }
            | MetricRef::RangeRate { field, .. }
            | MetricRef::FlagRate { field } => vec![field.clone()],
            MetricRef::PredictionDrift => vec!["prediction".into()],
            MetricRef::Accuracy => vec!["label".into(), "prediction".into()],
            MetricRef::MeanConfidence => vec!["confidence".into()],
        }
    }

    pub fn from_parts(name: &str, args: &[CallArg]) -> Result<Self, String> {
        let arity = |n: usize| {
            if args.len() == n {
                Ok(())
            } else {
                Err(format!(
                    "metric `{name}` takes {n} argument(s), got {}",
                    args.len()
                ))
            }
        };
        let field = |i: usize| match args.get(i) {
            Some(CallArg::Ident(s)) => Ok(s.clone()),
            _ => Err(format!("metric `{name}` expects a field name as argument {}", i + 1)),
        };
        let number = |i: usize| match args.get(i) {
            Some(CallArg::Num(n)) => Ok(*n),
            _ => Err(format!("metric `{name}` expects a number as argument {}", i + 1)),
        };
        Ok(match name {
            "demographic_parity" => {
                arity(0)?;
                MetricRef::DemographicParity
            }
            "disparate_impact" => {
                arity(0)?;
                MetricRef::DisparateImpact
            }
            "ks_drift" => {
                arity(1)?;
                MetricRef::KsDrift { field: field(0)? }
            }
            "psi_drift" => {
                arity(2)?;
                let bins = number(1)?;
                if bins < 2.0 || bins.fract() != 0.0 || bins > 10_000.0 {
                    return Err(format!("psi_drift needs an integer bin count >= 2, got {bins}"));
                }
                MetricRef::PsiDrift {
                    field: field(0)?,
                    bins: bins as u32,
                }
            }
            "prediction_drift" => {
                arity(0)?;
                MetricRef::PredictionDrift
            }
            "accuracy" => {
                arity(0)?;
                MetricRef::Accuracy
            }
            "mean_confidence" => {
                arity(0)?;
                MetricRef::MeanConfidence
            }
            "range_rate" => {
                arity(3)?;
                let (low, high) = (number(1)?, number(2)?);
                if low > high {
                    return Err(format!("range_rate bounds reversed: {low} > {high}"));
                }
                MetricRef::RangeRate {
                    field: field(0)?,
                    low,
                    high,
                }
            }
            "flag_rate" => {
                arity(1)?;
                MetricRef::FlagRate { field: field(0)? }
            }
            other => {
                return Err(format!(
                    "unknown metric `{other}` (expected one of {})",
                    CATALOG.join(", ")
                ))
            }
        })
    }

    pub fn args(&self) -> Vec<CallArg> {
        match self {
            MetricRef::KsDrift { field } | MetricRef::FlagRate { field } => {
                vec![CallArg::Ident(field.clone())]
            }
            MetricRef::PsiDrift { field, bins } => {
                vec![CallArg::Ident(field.clone()), CallArg::Num(f64::from(*bins))]
            }
            MetricRef::RangeRate { field, low, high } => vec![
                CallArg::Ident(field.clone()),
                CallArg::Num(*low),
                CallArg::Num(*high),
            ],
            _ => Vec::new(),
        }
    }
}

/// Compact form, e.g. `range_rate(speed,0,15)`.
impl fmt::Display for MetricRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())?;
        let args = self.args();
        if !args.is_empty() {
            f.write_str("(")?;
            for (i, a) in args.iter().enumerate() {
                if i > 0 {
                    f.write_str(",")?;
                }
                write!(f, "{a}")?;
            }
            f.write_str(")")?;
        }
        Ok(())
    }
}

impl FromStr for MetricRef {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (name, args) = parse_call(s)?;
        MetricRef::from_parts(&name, &args)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn catalog_names_parse_with_matching_arity() {
        for s in [
            "demographic_parity",
            "disparate_impact",
            "ks_drift(distance)",
            "psi_drift(battery,10)",
            "prediction_drift",
            "accuracy",
            "mean_confidence",
            "range_rate(speed,0,15)",
            "flag_rate(image_stored)",
        ] {
            let m: MetricRef = s.parse().unwrap();
            assert_eq!(m.to_string(), s);
        }
        assert!("ks_drift".parse::<MetricRef>().is_err());
        assert!("accuracy(x)".parse::<MetricRef>().is_err());
        assert!("psi_drift(x,1)".parse::<MetricRef>().is_err());
        assert!("range_rate(x,5,1)".parse::<MetricRef>().is_err());
        assert!("entropy".parse::<MetricRef>().is_err());
    }
}
