mod common;

use std::fs;
use std::path::PathBuf;

use common::{compile_dir, hcm_files, models_dir, weave_dir};
use hcmon::compiler::{compile, emit_plan, load_plan};
use hcmon::diag::Location;
use hcmon::dsml::{parse_model, serialize_model, SourceModel};
use hcmon::weaver::weave;

fn well_formed() -> Vec<PathBuf> {
    let root = models_dir();
    let mut dirs = vec![root.join("drone"), root.join("recruitment")];
    for d in ["conflict", "dangling", "empty", "many_to_many"] {
        dirs.push(root.join("fixtures").join(d));
    }
    dirs.iter().flat_map(|d| hcm_files(d)).collect()
}

fn parse_file(path: &PathBuf) -> SourceModel {
    parse_model(&fs::read_to_string(path).unwrap(), None).unwrap_or_else(|e| panic!("{}: {e:?}", path.display()))
}

#[test]
fn every_corpus_model_round_trips() {
    let files = well_formed();
    assert!(files.len() >= 15, "{} files", files.len());
    for path in &files {
        let model = parse_file(path);
        let text = serialize_model(&model);
        let again = parse_model(&text, None).unwrap_or_else(|e| panic!("{}: {e:?}\n{text}", path.display()));
        assert_eq!(again, model, "{}", path.display());
        assert_eq!(serialize_model(&again), text, "{}", path.display());
    }
}

#[test]
fn malformed_models_report_located_errors() {
    let expected = [
        ("duplicate_id", "duplicate-id", (7, 1)),
        ("malformed_threshold", "malformed-threshold", (5, 14)),
        ("malformed_window", "malformed-window", (4, 3)),
        ("missing_property", "missing-property", (3, 1)),
        ("missing_semicolon", "syntax", (5, 3)),
        ("unclosed_block", "syntax", (6, 1)),
        ("unknown_category", "invalid-value", (4, 3)),
        ("unknown_kind", "unknown-kind", (1, 7)),
        ("unknown_metric", "invalid-metric", (4, 3)),
        ("unterminated_string", "syntax", (5, 15)),
        ("wrong_keyword", "unknown-keyword", (3, 1)),
    ];
    let dir = models_dir().join("malformed");
    assert_eq!(hcm_files(&dir).len(), expected.len());
    for (name, code, (line, column)) in expected {
        let text = fs::read_to_string(dir.join(format!("{name}.hcm"))).unwrap();
        let errors = parse_model(&text, None).expect_err(name);
        let first = &errors[0];
        assert!(first.is_error(), "{name}");
        assert_eq!(first.code, code, "{name}: {}", first.message);
        assert_eq!(first.location, Location::new(line, column), "{name}: {}", first.message);
    }
}

#[test]
fn well_formed_systems_compile() {
    let root = models_dir();
    for dir in [
        root.join("drone"),
        root.join("recruitment"),
        root.join("fixtures/empty"),
        root.join("fixtures/many_to_many"),
    ] {
        let spec = compile_dir(&dir);
        assert_eq!(load_plan(&emit_plan(&spec)).unwrap(), spec, "{}", dir.display());
    }
    assert!(compile_dir(&root.join("fixtures/empty")).evaluators.is_empty());
    assert!(compile_dir(&root.join("drone")).evaluators.len() >= 5);
}

#[test]
fn conflicting_thresholds_block_compilation() {
    let woven = weave_dir(&models_dir().join("fixtures/conflict"));
    let conflicts: Vec<_> = woven.diagnostics.iter().filter(|d| d.code == "conflict").collect();
    assert_eq!(conflicts.len(), 1);
    assert!(conflicts[0].message.contains("`LooseParity` (>=0.2) and `StrictParity` (<=0.1)"));
    assert!(compile(&woven).is_err());
}

#[test]
fn dangling_references_block_weaving() {
    let dir = models_dir().join("fixtures/dangling");
    let models: Vec<SourceModel> = hcm_files(&dir).iter().map(parse_file).collect();
    let errors = weave(&models).map(|w| w.diagnostics).unwrap_or_else(|e| e);
    let codes: Vec<&str> = errors.iter().filter(|d| d.is_error()).map(|d| d.code.as_str()).collect();
    assert_eq!(codes.iter().filter(|c| **c == "dangling-reference").count(), 2);
    assert!(codes.contains(&"unknown-scope"));
}

#[test]
fn committed_plans_are_current() {
    let root = models_dir();
    for (dir, plan) in [("drone", "drone.plan"), ("recruitment", "screening.plan")] {
        let spec = compile_dir(&root.join(dir));
        let committed = fs::read_to_string(root.join(dir).join(plan)).unwrap();
        assert_eq!(emit_plan(&spec), committed, "{dir}/{plan}");
    }
}
