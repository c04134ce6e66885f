//! Helpers shared by the integration tests.

#![allow(dead_code)]

use std::fs;
use std::path::{Path, PathBuf};

use hcmon::compiler::{compile, MonitorSpec};
use hcmon::dsml::{parse_model, SourceModel};
use hcmon::weaver::{weave, WovenModel};

pub fn models_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../models")
}

/// Sorted `.hcm` files directly inside `dir`.
pub fn hcm_files(dir: &Path) -> Vec<PathBuf> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)
        .unwrap_or_else(|e| panic!("{}: {e}", dir.display()))
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|x| x == "hcm"))
        .collect();
    files.sort();
    files
}

pub fn parse_texts(texts: &[&str]) -> Vec<SourceModel> {
    texts
        .iter()
        .map(|t| parse_model(t, None).unwrap_or_else(|e| panic!("{e:?}\n{t}")))
        .collect()
}

pub fn spec_from_texts(texts: &[&str]) -> MonitorSpec {
    compile(&weave(&parse_texts(texts)).unwrap()).unwrap_or_else(|e| panic!("{e:?}"))
}

pub fn weave_dir(dir: &Path) -> WovenModel {
    let models: Vec<SourceModel> = hcm_files(dir)
        .iter()
        .map(|p| parse_model(&fs::read_to_string(p).unwrap(), None).unwrap_or_else(|e| panic!("{}: {e:?}", p.display())))
        .collect();
    weave(&models).unwrap_or_else(|e| panic!("{e:?}"))
}

pub fn compile_dir(dir: &Path) -> MonitorSpec {
    compile(&weave_dir(dir)).unwrap_or_else(|e| panic!("{e:?}"))
}
