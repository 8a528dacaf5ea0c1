//! The engine configuration file.
//!
//! ```toml
//! [sut]
//! backend = "toy"            # or "external"
//! name = "balanced_parens"
//! format = "parens"
//!
//! [runner]
//! kind = "builtin"           # or "command"
//!
//! [llm]
//! backend = "mock"           # or "http"
//!
//! [evolution]
//! iterations = 30
//! mutants = 20
//! survivors = 3
//! ```
//!
//! Unknown keys are rejected. Every key may be overridden with
//! `section.key=value`, where the value is read as TOML and falls back to a
//! plain string.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::evolution::{Ablation, EvolutionConfig};
use crate::harness::{ApproxCovConfig, CoverageBackend, RunnerConfig};
use crate::llm::LlmConfig;
use crate::mutation::MutationKind;
use crate::selection::SelectionConfig;
use crate::toy;
use crate::zest::ZestConfig;

#[derive(Debug, Error, PartialEq, Eq)]
#[error("{0}")]
pub struct ConfigError(pub String);

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SutKind {
    #[default]
    Toy,
    External,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SutSection {
    pub backend: SutKind,
    /// Toy SUT name.
    pub name: String,
    /// External harness argv with `{testcase_path}`.
    pub harness: Vec<String>,
    pub harness_timeout_secs: f64,
    pub format: String,
    pub format_hint: Option<String>,
    /// Seed generator source; `<FORMAT>` is replaced by `format`.
    pub seed_template: Option<String>,
    /// File holding the seed generator, relative to the config file.
    pub seed_template_path: Option<PathBuf>,
}

impl Default for SutSection {
    fn default() -> Self {
        SutSection {
            backend: SutKind::Toy,
            name: "balanced_parens".into(),
            harness: Vec::new(),
            harness_timeout_secs: 10.0,
            format: "parens".into(),
            format_hint: None,
            seed_template: None,
            seed_template_path: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvolutionSection {
    pub iterations: u32,
    pub mutants: usize,
    pub survivors: usize,
    pub rng_seed: u64,
    pub enabled_mutators: Vec<MutationKind>,
    pub ablation: Ablation,
    pub infill_max_lines: usize,
    pub inputs_per_measurement: usize,
    pub time_budget_secs: f64,
}

impl Default for EvolutionSection {
    fn default() -> Self {
        let e = EvolutionConfig::default();
        let a = ApproxCovConfig::default();
        EvolutionSection {
            iterations: e.iterations,
            mutants: e.mutants_per_iteration,
            survivors: e.survivors,
            rng_seed: e.rng_seed,
            enabled_mutators: e.enabled_mutators,
            ablation: e.ablation,
            infill_max_lines: e.infill_max_lines,
            inputs_per_measurement: a.inputs_per_measurement,
            time_budget_secs: a.time_budget_secs,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SelectionSection {
    pub restarts: usize,
}

impl Default for SelectionSection {
    fn default() -> Self {
        SelectionSection { restarts: SelectionConfig::default().restarts }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EngineConfig {
    pub sut: SutSection,
    pub runner: RunnerConfig,
    pub llm: LlmConfig,
    pub evolution: EvolutionSection,
    pub selection: SelectionSection,
    pub zest: ZestConfig,
    /// Directory relative paths are resolved against.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

fn parse_value(raw: &str) -> toml::Value {
    let doc = format!("v = {raw}");
    match doc.parse::<toml::Table>() {
        Ok(mut t) => t.remove("v").expect("key v present"),
        Err(_) => toml::Value::String(raw.to_string()),
    }
}

/// Applies a `section.key=value` override to a parsed document.
pub fn apply_override(doc: &mut toml::Table, spec: &str) -> Result<(), ConfigError> {
    let (path, raw) = spec
        .split_once('=')
        .ok_or_else(|| ConfigError(format!("override {spec:?} is not of the form section.key=value")))?;
    let keys: Vec<&str> = path.trim().split('.').collect();
    if keys.iter().any(|k| k.is_empty()) {
        return Err(ConfigError(format!("override {spec:?} has an empty key")));
    }
    let mut table = doc;
    for k in &keys[..keys.len() - 1] {
        let entry = table.entry(k.to_string()).or_insert_with(|| toml::Value::Table(toml::Table::new()));
        table = entry
            .as_table_mut()
            .ok_or_else(|| ConfigError(format!("override {spec:?}: {k} is not a section")))?;
    }
    table.insert(keys[keys.len() - 1].to_string(), parse_value(raw.trim()));
    Ok(())
}

impl EngineConfig {
    pub fn from_toml(text: &str, overrides: &[String]) -> Result<Self, ConfigError> {
        let mut doc: toml::Table = text.parse().map_err(|e: toml::de::Error| ConfigError(e.to_string()))?;
        for o in overrides {
            apply_override(&mut doc, o)?;
        }
        let cfg: EngineConfig = doc.try_into().map_err(|e: toml::de::Error| ConfigError(e.message().to_string()))?;
        Ok(cfg)
    }

    pub fn load(path: &Path, overrides: &[String]) -> Result<Self, ConfigError> {
        let text = fs::read_to_string(path).map_err(|e| ConfigError(format!("{}: {e}", path.display())))?;
        let mut cfg = Self::from_toml(&text, overrides).map_err(|e| ConfigError(format!("{}: {e}", path.display())))?;
        cfg.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(cfg)
    }

    pub fn coverage_backend(&self) -> CoverageBackend {
        match self.sut.backend {
            SutKind::Toy => CoverageBackend::Toy { name: self.sut.name.clone() },
            SutKind::External => CoverageBackend::External {
                argv: self.sut.harness.clone(),
                timeout_secs: self.sut.harness_timeout_secs,
            },
        }
    }

    /// Runner settings; the toy SUT's generator constants are added unless
    /// the file sets them.
    pub fn runner(&self) -> RunnerConfig {
        let mut r = self.runner.clone();
        if self.sut.backend == SutKind::Toy {
            for (k, v) in toy::toy_constants() {
                r.constants.entry(k).or_insert(v);
            }
        }
        r
    }

    pub fn seed_template(&self) -> Result<String, ConfigError> {
        match (&self.sut.seed_template, &self.sut.seed_template_path) {
            (Some(_), Some(_)) => Err(ConfigError("set only one of sut.seed_template and sut.seed_template_path".into())),
            (Some(t), None) => Ok(t.clone()),
            (None, Some(p)) => {
                let p = self.base_dir.join(p);
                fs::read_to_string(&p).map_err(|e| ConfigError(format!("sut.seed_template_path {}: {e}", p.display())))
            }
            (None, None) => Ok(toy::programs::SEED_TEMPLATE.to_string()),
        }
    }

    pub fn evolution(&self) -> Result<EvolutionConfig, ConfigError> {
        let e = &self.evolution;
        let cfg = EvolutionConfig {
            iterations: e.iterations,
            mutants_per_iteration: e.mutants,
            survivors: e.survivors,
            rng_seed: e.rng_seed,
            enabled_mutators: e.enabled_mutators.clone(),
            ablation: e.ablation,
            infill_max_lines: e.infill_max_lines,
            selection_restarts: self.selection.restarts,
            format: self.sut.format.clone(),
            format_hint: self.sut.format_hint.clone(),
            seed_template: self.seed_template()?,
            sut: self.coverage_backend(),
            runner: self.runner(),
            approx: ApproxCovConfig {
                inputs_per_measurement: e.inputs_per_measurement,
                time_budget_secs: e.time_budget_secs,
            },
            llm: self.llm.clone(),
        };
        cfg.validate().map_err(ConfigError)?;
        Ok(cfg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults() {
        let cfg = EngineConfig::from_toml("", &[]).unwrap();
        let e = cfg.evolution().unwrap();
        assert_eq!((e.iterations, e.mutants_per_iteration, e.survivors), (50, 200, 10));
        assert_eq!(e.approx.inputs_per_measurement, 1000);
        assert_eq!(e.llm.temperature, 0.2);
        assert_eq!(e.llm.repetition_penalty, 1.15);
        assert_eq!(e.llm.max_total_tokens, 8192);
        assert_eq!(e.runner.constants.get("MAX_LEN"), Some(&16));
    }

    #[test]
    fn unknown_keys_are_named() {
        let e = EngineConfig::from_toml("[evolution]\nmutnats = 3\n", &[]).unwrap_err();
        assert!(e.0.contains("mutnats"), "{e}");
        let e = EngineConfig::from_toml("[bogus]\n", &[]).unwrap_err();
        assert!(e.0.contains("bogus"), "{e}");
    }

    #[test]
    fn overrides_apply() {
        let o = vec!["evolution.iterations=7".to_string(), "llm.backend=http".into(), "sut.format=xml".into(), "evolution.ablation=noFS".into()];
        let cfg = EngineConfig::from_toml("[evolution]\niterations = 3\n", &o).unwrap();
        assert_eq!(cfg.evolution.iterations, 7);
        assert_eq!(cfg.llm.backend, crate::llm::BackendKind::Http);
        assert_eq!(cfg.sut.format, "xml");
        assert_eq!(cfg.evolution.ablation, Ablation::NoFs);
        assert!(EngineConfig::from_toml("", &["nokey".into()]).is_err());
    }

    #[test]
    fn mutator_list_parses() {
        let cfg = EngineConfig::from_toml("[evolution]\nenabled_mutators = [\"completion\"]\n", &[]).unwrap();
        assert_eq!(cfg.evolution().unwrap().mutators(), vec![MutationKind::Completion]);
    }

    #[test]
    fn invalid_values_rejected() {
        let cfg = EngineConfig::from_toml("[evolution]\nsurvivors = 0\n", &[]).unwrap();
        assert!(cfg.evolution().is_err());
        let cfg = EngineConfig::from_toml("[runner]\nkind = \"command\"\ncommand = [\"x\"]\n", &[]).unwrap();
        assert!(cfg.evolution().unwrap_err().0.contains("placeholder"));
    }
}
