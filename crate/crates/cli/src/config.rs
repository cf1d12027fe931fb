//! Pipeline configuration file.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use setaside_core::econometrics::{HcFlavor, Response, Weighting};
use setaside_core::equilibrium::{ValueDistribution, DEFAULT_GRID_SIZE, DEFAULT_TOLERANCE};
use setaside_core::simulation::SimConfig;

use crate::error::CliError;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub schema_version: u32,
    #[serde(default)]
    pub paths: Paths,
    pub simulation: SimConfig,
    #[serde(default)]
    pub regressions: RegressionSelection,
    #[serde(default)]
    pub equilibrium: EquilibriumSection,
    #[serde(default)]
    pub output: OutputSwitches,
}

/// With `bids` set the pipeline regresses that file instead of simulating.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Paths {
    pub out_dir: Option<PathBuf>,
    pub bids: Option<PathBuf>,
    pub wholesale: Option<PathBuf>,
    pub usda: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegressionSelection {
    pub responses: Vec<Response>,
    pub weightings: Vec<Weighting>,
    #[serde(default)]
    pub hc: HcFlavor,
}

impl Default for RegressionSelection {
    fn default() -> Self {
        Self {
            responses: vec![Response::NBidders, Response::LogOffer, Response::LogWin],
            weightings: vec![Weighting::Quantity, Weighting::ProductEqualized],
            hc: HcFlavor::Hc1,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EquilibriumSection {
    /// One solved strategy file per level.
    pub alphas: Vec<f64>,
    pub small_cost: ValueDistribution,
    pub large_cost: ValueDistribution,
    #[serde(default = "grid_size")]
    pub grid_size: usize,
    #[serde(default = "tolerance")]
    pub tolerance: f64,
}

fn grid_size() -> usize {
    DEFAULT_GRID_SIZE
}

fn tolerance() -> f64 {
    DEFAULT_TOLERANCE
}

impl Default for EquilibriumSection {
    fn default() -> Self {
        Self {
            alphas: vec![0.0, 0.5, 1.0],
            small_cost: ValueDistribution::uniform(0.0, 1.0),
            large_cost: ValueDistribution::uniform(0.0, 1.0),
            grid_size: DEFAULT_GRID_SIZE,
            tolerance: DEFAULT_TOLERANCE,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSwitches {
    /// Aligned text tables next to the CSVs.
    pub text: bool,
    /// Plot-data CSVs for the bidder-pool timeline and win-share figures.
    pub plots: bool,
}

impl Default for OutputSwitches {
    fn default() -> Self {
        Self { text: true, plots: true }
    }
}

impl PipelineConfig {
    /// The illustrative beef-market campaign with default reports.
    pub fn default_for(seed: u64) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            paths: Paths::default(),
            simulation: SimConfig::beef_program(seed),
            regressions: RegressionSelection::default(),
            equilibrium: EquilibriumSection::default(),
            output: OutputSwitches::default(),
        }
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let cfg: Self = serde_json::from_str(&text)
            .map_err(|e| CliError::validation(format!("{}: {e}", path.display())))?;
        // relative paths are taken from the config file's directory
        let base = path.parent().unwrap_or(Path::new(""));
        Ok(cfg.rebased(base))
    }

    fn rebased(mut self, base: &Path) -> Self {
        let fix = |p: &mut Option<PathBuf>| {
            if let Some(q) = p.as_mut() {
                if q.is_relative() {
                    *q = base.join(&*q);
                }
            }
        };
        fix(&mut self.paths.out_dir);
        fix(&mut self.paths.bids);
        fix(&mut self.paths.wholesale);
        fix(&mut self.paths.usda);
        self
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(CliError::validation(format!(
                "unsupported schema_version {} (expected {SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        self.simulation.validate()?;
        for p in [&self.paths.bids, &self.paths.wholesale, &self.paths.usda].into_iter().flatten() {
            if !p.is_file() {
                return Err(CliError::validation(format!("input file {} does not exist", p.display())));
            }
        }
        if self.paths.bids.is_none() && (self.paths.wholesale.is_some() || self.paths.usda.is_some()) {
            return Err(CliError::validation("wholesale and usda inputs are only used with a bids input"));
        }
        if let Some(out) = &self.paths.out_dir {
            let parent = out.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
            if !parent.is_dir() {
                return Err(CliError::validation(format!("output directory parent {} does not exist", parent.display())));
            }
        }
        let r = &self.regressions;
        if r.responses.is_empty() || r.weightings.is_empty() {
            return Err(CliError::validation("regressions need at least one response and one weighting"));
        }
        let e = &self.equilibrium;
        if e.alphas.iter().any(|a| !(0.0..=1.0).contains(a)) {
            return Err(CliError::validation("equilibrium alphas must lie in [0, 1]"));
        }
        e.small_cost.validate().map_err(CliError::validation)?;
        e.large_cost.validate().map_err(CliError::validation)?;
        if e.grid_size < 3 || !(e.tolerance > 0.0) {
            return Err(CliError::validation("equilibrium grid_size must be at least 3 and tolerance positive"));
        }
        Ok(())
    }
}
