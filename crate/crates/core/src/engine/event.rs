use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EventKind {
    Prediction,
    Feedback,
    Signal,
}

impl EventKind {
    pub const ALL: [EventKind; 3] = [EventKind::Prediction, EventKind::Feedback, EventKind::Signal];

    pub fn keyword(self) -> &'static str {
        match self {
            EventKind::Prediction => "prediction",
            EventKind::Feedback => "feedback",
            EventKind::Signal => "signal",
        }
    }
}

impl fmt::Display for EventKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.keyword())
    }
}

impl FromStr for EventKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        EventKind::ALL
            .into_iter()
            .find(|k| k.keyword() == s)
            .ok_or_else(|| format!("unknown event kind `{s}`"))
    }
}

/// A feature, signal, prediction or label value on the wire.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum FieldValue {
    Bool(bool),
    Num(f64),
    Text(String),
}

impl FieldValue {
    pub fn as_f64(&self) -> Option<f64> {
        match self {
            FieldValue::Num(x) => Some(*x),
            _ => None,
        }
    }

    pub fn as_bool(&self) -> Option<bool> {
        match self {
            FieldValue::Bool(b) => Some(*b),
            _ => None,
        }
    }

    /// Category label used for grouping, prediction histograms and
    /// prediction/label comparison.
    pub fn category(&self) -> String {
        match self {
            FieldValue::Bool(b) => b.to_string(),
            FieldValue::Num(x) => x.to_string(),
            FieldValue::Text(s) => s.clone(),
        }
    }

    /// Whether the value counts as a positive outcome for fairness metrics.
    pub fn is_positive(&self) -> bool {
        match self {
            FieldValue::Bool(b) => *b,
            FieldValue::Num(x) => *x != 0.0,
            FieldValue::Text(s) => matches!(s.as_str(), "true" | "1" | "yes" | "positive"),
        }
    }
}

impl From<bool> for FieldValue {
    fn from(b: bool) -> Self {
        FieldValue::Bool(b)
    }
}

impl From<f64> for FieldValue {
    fn from(x: f64) -> Self {
        FieldValue::Num(x)
    }
}

impl From<&str> for FieldValue {
    fn from(s: &str) -> Self {
        FieldValue::Text(s.to_string())
    }
}

/// One line of the event stream.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObservationEvent {
    /// Unix milliseconds.
    pub ts: i64,
    pub component: String,
    pub kind: EventKind,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub features: BTreeMap<String, FieldValue>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prediction: Option<FieldValue>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub confidence: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<FieldValue>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ref_id: Option<String>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub signals: BTreeMap<String, FieldValue>,
}

impl ObservationEvent {
    pub fn new(ts: i64, component: impl Into<String>, kind: EventKind) -> Self {
        Self {
            ts,
            component: component.into(),
            kind,
            features: BTreeMap::new(),
            prediction: None,
            confidence: None,
            label: None,
            ref_id: None,
            signals: BTreeMap::new(),
        }
    }

    /// Checks the per-kind requirements the JSON schema alone cannot express.
    pub fn check(&self) -> Result<(), String> {
        match self.kind {
            EventKind::Feedback if self.label.is_none() => return Err("feedback without label".into()),
            EventKind::Feedback if self.ref_id.is_none() => return Err("feedback without ref_id".into()),
            EventKind::Prediction if self.prediction.is_none() => {
                return Err("prediction event without prediction".into())
            }
            _ => {}
        }
        if let Some(c) = self.confidence {
            if !(0.0..=1.0).contains(&c) {
                return Err(format!("confidence {c} outside [0, 1]"));
            }
        }
        Ok(())
    }

    /// Parses one wire line and applies `check`.
    pub fn parse_line(line: &str) -> Result<Self, String> {
        let ev: ObservationEvent = serde_json::from_str(line).map_err(|e| e.to_string())?;
        ev.check()?;
        Ok(ev)
    }

    pub fn to_line(&self) -> String {
        serde_json::to_string(self).expect("events always serialize")
    }

    /// Reads a named field: features first, then signals, then the
    /// `prediction`, `label` and `confidence` slots.
    pub fn field(&self, name: &str) -> Option<FieldValue> {
        if let Some(v) = self.features.get(name).or_else(|| self.signals.get(name)) {
            return Some(v.clone());
        }
        match name {
            "prediction" => self.prediction.clone(),
            "label" => self.label.clone(),
            "confidence" => self.confidence.map(FieldValue::Num),
            _ => None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wire_round_trip() {
        let line = r#"{"ts":5,"component":"C","kind":"prediction","features":{"g":"a","x":1.5},"prediction":true,"confidence":0.9,"signals":{"image_stored":false}}"#;
        let ev = ObservationEvent::parse_line(line).unwrap();
        assert_eq!(ev.field("g"), Some(FieldValue::Text("a".into())));
        assert_eq!(ev.field("image_stored"), Some(FieldValue::Bool(false)));
        assert_eq!(ev.to_line(), line);
    }

    #[test]
    fn schema_failures() {
        assert!(ObservationEvent::parse_line(r#"{"ts":1,"component":"C","kind":"signal","extra":1}"#).is_err());
        assert!(ObservationEvent::parse_line(r#"{"ts":1,"component":"C","kind":"feedback","label":"x"}"#)
            .unwrap_err()
            .contains("ref_id"));
        assert!(ObservationEvent::parse_line(r#"{"ts":1,"component":"C","kind":"prediction"}"#).is_err());
        assert!(ObservationEvent::parse_line(r#"{"ts":1,"component":"C","kind":"prediction","prediction":1,"confidence":1.5}"#).is_err());
        assert!(ObservationEvent::parse_line("not json").is_err());
    }
}
