//! Small model sets shared by unit tests.

use crate::compiler::{compile, MonitorSpec};
use crate::dsml::{parse_model, SourceModel};
use crate::weaver::{weave, WovenModel};

pub const HCR: &str = "model hcr H;
requirement Root {
  category: values;
  severity: low;
  requirement Fair { category: fairness; severity: high; }
  requirement Private { category: privacy; severity: critical; }
}
requirement Honesty { category: transparency; severity: medium; }
";

pub const ARCH: &str = "model arch A;
component Ranker { kind: ml; implements: Parity, Ratio; }
component Recogniser { kind: ml; implements: Leak, Correct; }
component Camera { kind: traditional; implements: Leak; }
component Nav { kind: traditional; implements: Speed; }
";

pub const DESIGN: &str = "model design D;
design Cnn { for: Recogniser; algorithm: \"cnn\"; framework: \"torch\"; }
design Trees { for: Ranker; algorithm: \"gbt\"; framework: \"lgbm\"; }
";

pub const CONTEXT: &str = "model context C;
context RankerCtx { for: Ranker; sensitive_attributes: group; }
context RecCtx {
  for: Recogniser;
  deployment: \"suburbs\";
  dataset Train { source: \"images\"; role: training; baseline: \"train.jsonl\"; }
}
";

/// Technical model: fairness on `Ranker`, a leak flag with an obfuscate
/// adaptation, accuracy, and a speed range on `Nav`. Windows are small so
/// tests can drive them with a few events.
pub const TECH: &str = "model tech T;
techreq Parity {
  metric: demographic_parity; scope: Ranker; threshold: <= 0.1;
  window: 100ev; min_samples: 10; satisfies: Fair;
}
techreq Ratio {
  metric: disparate_impact; scope: Ranker; threshold: >= 0.8;
  window: 100ev; min_samples: 10; satisfies: Fair;
}
techreq Leak {
  metric: flag_rate(image_stored); scope: Recogniser; threshold: <= 0.1;
  window: 10ev; min_samples: 5; satisfies: Private;
  adaptation Hide { action: obfuscate(image_stored); cooldown: 10s; }
}
techreq Correct {
  metric: accuracy; scope: Recogniser; threshold: >= 0.5;
  window: 10ev; min_samples: 4; satisfies: Fair, Private;
}
techreq Speed {
  metric: range_rate(speed, 0, 15); scope: Nav; threshold: <= 0.2;
  window: 5s; min_samples: 1; satisfies: Private;
  adaptation Ground { action: shutdown(Nav); }
}
";

pub fn parse_all(sources: &[&str]) -> Vec<SourceModel> {
    sources
        .iter()
        .map(|s| parse_model(s, None).unwrap_or_else(|e| panic!("{e:?}")))
        .collect()
}

pub fn woven(sources: &[&str]) -> WovenModel {
    weave(&parse_all(sources)).unwrap_or_else(|e| panic!("{e:?}"))
}

pub fn spec_with(tech: &str) -> MonitorSpec {
    compile(&woven(&[HCR, tech, ARCH, DESIGN, CONTEXT])).unwrap_or_else(|e| panic!("{e:?}"))
}

pub fn spec() -> MonitorSpec {
    spec_with(TECH)
}
