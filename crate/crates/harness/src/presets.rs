//! Named experiment grids for the equidistant and equivariant benchmarks.
//!
//! `fig3a` through `fig4b` are the standard benchmark grids; `fsweep` runs
//! the full range of imbalance fractions on one dataset.

use grokbench::sampler::{Fraction, SubsampleSelector};
use grokbench::topology::DatasetKind;

use crate::config::{Axis, ExperimentConfig, GridPoint};
use crate::error::{HarnessError, Result};

pub const NAMES: [&str; 6] = ["fig3a", "fig3b", "fig3c", "fig4a", "fig4b", "fsweep"];

#[derive(Debug, Clone, PartialEq)]
pub struct Preset {
    pub name: &'static str,
    pub description: &'static str,
    pub base: ExperimentConfig,
    pub points: Vec<Vec<(Axis, f64)>>,
}

impl Preset {
    /// Grid points with `base` standing in for the preset's own base config,
    /// so file and flag overrides apply to every point.
    pub fn grid(&self, base: &ExperimentConfig) -> Result<Vec<GridPoint>> {
        self.points.iter().map(|o| GridPoint::new(base, o.clone())).collect()
    }
}

fn base(kind: DatasetKind, f: Fraction, subsampled: SubsampleSelector) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::default();
    cfg.dataset.kind = kind;
    cfg.dataset.gamma_d = 2000;
    cfg.dataset.f = f;
    cfg.dataset.subsampled = subsampled;
    cfg
}

pub fn preset(name: &str) -> Result<Preset> {
    use Axis::{GammaD, F};
    let p = match name {
        "fig3a" => Preset {
            name: "fig3a",
            description: "equidistant, balanced sampling, gamma_D in {400, 1000, 2000, 4000}",
            base: base(DatasetKind::Equidistant, Fraction::ONE, SubsampleSelector::None),
            points: [400.0, 1000.0, 2000.0, 4000.0]
                .iter()
                .map(|&g| vec![(GammaD, g)])
                .collect(),
        },
        "fig3b" => Preset {
            name: "fig3b",
            description: "equidistant, gamma_D 2000, one subclass per class at f in {0, 0.2}",
            base: base(DatasetKind::Equidistant, Fraction::ZERO, SubsampleSelector::OnePerClass),
            points: vec![vec![(F, 0.0)], vec![(F, 0.2)]],
        },
        "fig3c" => Preset {
            name: "fig3c",
            description: "equidistant, gamma_D in {4000, 5000} with f in {0.01, 0.05}",
            base: base(DatasetKind::Equidistant, Fraction::ZERO, SubsampleSelector::OnePerClass),
            points: [4000.0, 5000.0]
                .iter()
                .flat_map(|&g| [0.01, 0.05].map(|f| vec![(GammaD, g), (F, f)]))
                .collect(),
        },
        "fig4a" => Preset {
            name: "fig4a",
            description: "equivariant, gamma_D 2000, one subclass per class removed (f = 0)",
            base: base(DatasetKind::Equivariant, Fraction::ZERO, SubsampleSelector::OnePerClass),
            points: vec![vec![(F, 0.0)]],
        },
        "fig4b" => Preset {
            name: "fig4b",
            description: "equivariant, gamma_D 2000, one subclass per class at f = 0.2",
            base: base(DatasetKind::Equivariant, Fraction::ZERO, SubsampleSelector::OnePerClass),
            points: vec![vec![(F, 0.2)]],
        },
        "fsweep" => Preset {
            name: "fsweep",
            description: "equidistant, gamma_D 2000, one subclass per class at f in {0, 0.01, 0.05, 0.2, 1}",
            base: base(DatasetKind::Equidistant, Fraction::ZERO, SubsampleSelector::OnePerClass),
            points: [0.0, 0.01, 0.05, 0.2, 1.0].iter().map(|&f| vec![(F, f)]).collect(),
        },
        other => {
            return Err(HarnessError::config(format!(
                "unknown preset `{other}`; expected one of {}",
                NAMES.join(", ")
            )))
        }
    };
    Ok(p)
}
