//! Experiment configuration: a TOML document with `dataset`, `train` and
//! `detector` tables plus a few top-level keys.
//!
//! ```toml
//! seed = 0
//! runs = 10
//!
//! [dataset]
//! kind = "equidistant"
//! gamma_D = 2000
//! f = 0.2
//! subsampled = "one-per-class"
//!
//! [train]
//! max_epochs = 50000
//!
//! [detector]
//! tau = 0.99
//! ```

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use grokbench::grokdetect::DetectorParams;
use grokbench::nn::TrainConfig;
use grokbench::sampler::{Fraction, ShiftPlan, SubsampleSelector};
use grokbench::topology::{build_spec, DatasetKind, GroupedDatasetSpec};
use serde::{Deserialize, Serialize};

use crate::error::{HarnessError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DatasetConfig {
    pub kind: DatasetKind,
    pub p: u32,
    pub r: usize,
    pub sigma_scale: f64,
    /// Training points kept before subsampling, split by the shift plan.
    #[serde(rename = "gamma_D", alias = "gamma_d")]
    pub gamma_d: u64,
    pub f: Fraction,
    pub subsampled: SubsampleSelector,
    /// Size of the balanced test set.
    pub test_total: usize,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        DatasetConfig {
            kind: DatasetKind::Equidistant,
            p: 9,
            r: 13,
            sigma_scale: 0.25,
            gamma_d: 2000,
            f: Fraction::ONE,
            subsampled: SubsampleSelector::None,
            test_total: 10_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Base seed. Run `i` trains with seed `seed + i`; the class geometry is
    /// drawn from `seed` itself and shared by every run.
    pub seed: u64,
    pub runs: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    pub dataset: DatasetConfig,
    /// `train.seed` is assigned per run and must be left at 0.
    pub train: TrainConfig,
    pub detector: DetectorParams,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            seed: 0,
            runs: 10,
            output_dir: None,
            dataset: DatasetConfig::default(),
            train: TrainConfig::default(),
            detector: DetectorParams::default(),
        }
    }
}

fn field(section: &str) -> impl Fn(grokbench::Error) -> HarnessError + '_ {
    move |e| HarnessError::config(format!("{section}: {e}"))
}

impl ExperimentConfig {
    /// Checks every nested invariant, including that the dataset can be built.
    pub fn validate(&self) -> Result<()> {
        if self.runs == 0 {
            return Err(HarnessError::config("runs: must be at least 1"));
        }
        if self.seed.checked_add(self.runs as u64 - 1).is_none() {
            return Err(HarnessError::config("seed: seed + runs overflows"));
        }
        if self.train.seed != 0 {
            return Err(HarnessError::config(
                "train.seed: assigned per run from the top-level `seed`; set that instead",
            ));
        }
        self.train.validate().map_err(field("train"))?;
        self.detector.validate().map_err(field("detector"))?;
        let spec = self.spec()?;
        self.plan(&spec)?;
        if self.dataset.test_total == 0 {
            return Err(HarnessError::config("dataset.test_total: must be at least 1"));
        }
        Ok(())
    }

    pub fn spec(&self) -> Result<GroupedDatasetSpec> {
        let d = &self.dataset;
        build_spec(d.kind, d.p, d.r, d.sigma_scale, self.seed).map_err(field("dataset"))
    }

    pub fn plan(&self, spec: &GroupedDatasetSpec) -> Result<ShiftPlan> {
        let d = &self.dataset;
        ShiftPlan::new(spec, d.f, d.gamma_d, &d.subsampled).map_err(field("dataset"))
    }

    pub fn run_seed(&self, run: usize) -> u64 {
        self.seed + run as u64
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| HarnessError::config(format!("cannot serialize config: {e}")))
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| HarnessError::config(e.to_string()))
    }
}

/// Builds a config from an optional base (a preset), an optional TOML file
/// layered over it, and `key=value` overrides layered over both.
///
/// Override keys are dotted paths such as `train.max_epochs` or `runs`; values
/// are TOML literals, with bare words read as strings.
pub fn load(base: Option<&ExperimentConfig>, file: Option<&Path>, overrides: &[String]) -> Result<ExperimentConfig> {
    let mut table = match base {
        Some(cfg) => toml::Table::try_from(cfg).map_err(|e| HarnessError::config(e.to_string()))?,
        None => toml::Table::new(),
    };
    if let Some(path) = file {
        let text = std::fs::read_to_string(path)
            .map_err(|e| HarnessError::config(format!("cannot read {}: {e}", path.display())))?;
        let layer: toml::Table = text
            .parse()
            .map_err(|e| HarnessError::config(format!("{}: {e}", path.display())))?;
        merge(&mut table, layer);
    }
    for item in overrides {
        let (key, value) = item
            .split_once('=')
            .ok_or_else(|| HarnessError::config(format!("override `{item}` is not key=value")))?;
        set_path(&mut table, key.trim(), parse_literal(value.trim()))?;
    }
    let cfg: ExperimentConfig = toml::Value::Table(table)
        .try_into()
        .map_err(|e: toml::de::Error| HarnessError::config(e.to_string()))?;
    Ok(cfg)
}

fn merge(into: &mut toml::Table, layer: toml::Table) {
    for (k, v) in layer {
        match (into.get_mut(&k), v) {
            (Some(toml::Value::Table(dst)), toml::Value::Table(src)) => merge(dst, src),
            (_, v) => {
                into.insert(k, v);
            }
        }
    }
}

fn parse_literal(text: &str) -> toml::Value {
    let doc = format!("v = {text}");
    match doc.parse::<toml::Table>() {
        Ok(mut t) => t.remove("v").expect("key present"),
        Err(_) => toml::Value::String(text.to_string()),
    }
}

fn set_path(table: &mut toml::Table, key: &str, value: toml::Value) -> Result<()> {
    let parts: Vec<&str> = key.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(HarnessError::config(format!("override key `{key}` is malformed")));
    }
    let mut cur = table;
    for part in &parts[..parts.len() - 1] {
        let entry = cur
            .entry(part.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = entry
            .as_table_mut()
            .ok_or_else(|| HarnessError::config(format!("override key `{key}`: `{part}` is not a table")))?;
    }
    cur.insert(parts[parts.len() - 1].to_string(), value);
    Ok(())
}

/// A parameter that can be swept.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Axis {
    GammaD,
    F,
    LearningRate,
    WeightDecay,
    InitScale,
}

impl Axis {
    pub const ALL: [Axis; 5] = [
        Axis::GammaD,
        Axis::F,
        Axis::LearningRate,
        Axis::WeightDecay,
        Axis::InitScale,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Axis::GammaD => "gamma_D",
            Axis::F => "f",
            Axis::LearningRate => "learning_rate",
            Axis::WeightDecay => "weight_decay",
            Axis::InitScale => "init_scale",
        }
    }

    pub fn apply(&self, cfg: &mut ExperimentConfig, value: f64) -> Result<()> {
        let bad = |why: &str| HarnessError::config(format!("{}={value}: {why}", self.name()));
        if !value.is_finite() {
            return Err(bad("not a finite number"));
        }
        match self {
            Axis::GammaD => {
                if value < 0.0 || value.fract() != 0.0 || value > u64::MAX as f64 {
                    return Err(bad("must be a non-negative integer"));
                }
                cfg.dataset.gamma_d = value as u64;
            }
            Axis::F => cfg.dataset.f = Fraction::from_f64(value).map_err(|e| bad(&e.to_string()))?,
            Axis::LearningRate => cfg.train.learning_rate = value,
            Axis::WeightDecay => cfg.train.weight_decay = value,
            Axis::InitScale => cfg.train.init_scale = value,
        }
        Ok(())
    }
}

impl fmt::Display for Axis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Axis {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self> {
        Axis::ALL
            .into_iter()
            .find(|a| a.name() == s || (*a == Axis::GammaD && s == "gamma_d"))
            .ok_or_else(|| {
                let names: Vec<&str> = Axis::ALL.iter().map(Axis::name).collect();
                HarnessError::config(format!("unknown axis `{s}`; expected one of {}", names.join(", ")))
            })
    }
}

/// One configuration of a sweep, with the axis values that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct GridPoint {
    pub overrides: Vec<(Axis, f64)>,
    pub config: ExperimentConfig,
}

impl GridPoint {
    pub fn new(base: &ExperimentConfig, overrides: Vec<(Axis, f64)>) -> Result<Self> {
        let mut config = base.clone();
        for &(axis, value) in &overrides {
            axis.apply(&mut config, value)?;
        }
        Ok(GridPoint { overrides, config })
    }

    /// `f=0.2,gamma_D=2000`, or `base` without overrides.
    pub fn label(&self) -> String {
        if self.overrides.is_empty() {
            return "base".to_string();
        }
        self.overrides
            .iter()
            .map(|(a, v)| format!("{a}={v}"))
            .collect::<Vec<_>>()
            .join(",")
    }
}

/// One grid point per value of `axis`.
pub fn sweep_grid(base: &ExperimentConfig, axis: Axis, values: &[f64]) -> Result<Vec<GridPoint>> {
    if values.is_empty() {
        return Err(HarnessError::config(format!("sweep over {axis}: no values given")));
    }
    values.iter().map(|&v| GridPoint::new(base, vec![(axis, v)])).collect()
}
