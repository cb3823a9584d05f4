//! Scenario files for the command-line runner. Every block rejects unknown
//! keys; omitted blocks fall back to per-command defaults.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::checks::CheckConfig;
use crate::dissipation::DissipationSpec;
use crate::error::{Error, Result};
use crate::lab::SweepConfig;
use crate::load::LoadProgram;
use crate::material::MaterialModel;
use crate::point_solver::PointSolverOptions;
use crate::prox::ProxOptions;
use crate::quasistatic::sweep::{Competitor, QuasiSweepConfig};
use crate::quasistatic::{QuasiLoad, QuasiOptions};
use crate::tensor3::DevSym3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    PointRun,
    PointSweep,
    QuasiRun,
    QuasiSweep,
    Check,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LoadBlock {
    /// Strain program of the single-point commands.
    pub point: Option<LoadProgram>,
    /// Traction and body force of the quasistatic commands.
    pub quasi: Option<QuasiLoad>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverBlock {
    pub steps: Option<usize>,
    /// `ε` list of the sweeps.
    pub eps: Option<Vec<f64>>,
    pub mesh: Option<[usize; 3]>,
    pub prox: Option<ProxOptions>,
    pub quasi: Option<QuasiOptions>,
    /// Initial `log Cp` (point) or `z` (sweeps).
    pub initial_log: Option<DevSym3>,
    pub final_tolerance: Option<f64>,
    pub competitor: Option<Competitor>,
    /// Draws per property of the `check` command.
    pub samples: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub command: Command,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub output: Option<PathBuf>,
    #[serde(default)]
    pub material: Option<MaterialModel>,
    #[serde(default)]
    pub dissipation: Option<DissipationSpec>,
    #[serde(default)]
    pub load: LoadBlock,
    #[serde(default)]
    pub solver: SolverBlock,
}

/// Fully resolved point run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PointRun {
    pub model: MaterialModel,
    pub dissipation: DissipationSpec,
    pub program: LoadProgram,
    pub steps: usize,
    pub initial_log: DevSym3,
    pub options: PointSolverOptions,
}

/// Fully resolved quasistatic run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QuasiRun {
    pub model: MaterialModel,
    pub dissipation: DissipationSpec,
    pub load: QuasiLoad,
    pub mesh: [usize; 3],
    pub steps: usize,
    pub options: QuasiOptions,
}

impl ScenarioConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(m) = &self.material {
            m.validate()
                .map_err(|e| Error::Config(format!("material: {e}")))?;
        }
        if let Some(p) = &self.load.point {
            p.validate()
                .map_err(|e| Error::Config(format!("load.point: {e}")))?;
        }
        if self.solver.steps == Some(0) {
            return Err(Error::Config("solver.steps: must be positive".into()));
        }
        if let Some(eps) = &self.solver.eps {
            if eps.is_empty() || eps.iter().any(|e| !(*e > 0.0)) {
                return Err(Error::Config("solver.eps: needs positive entries".into()));
            }
        }
        Ok(())
    }

    fn model_or(&self, default: MaterialModel) -> MaterialModel {
        self.material.clone().unwrap_or(default)
    }

    fn spec_for(&self, m: &MaterialModel) -> DissipationSpec {
        self.dissipation
            .unwrap_or_else(|| DissipationSpec::log_bound(m.yield_radius))
    }

    pub fn point_run(&self) -> PointRun {
        let model = self.model_or(MaterialModel::default());
        PointRun {
            dissipation: self.spec_for(&model),
            program: self.load.point.clone().unwrap_or_default(),
            steps: self.solver.steps.unwrap_or(256),
            initial_log: self.solver.initial_log.unwrap_or(DevSym3::ZERO),
            options: PointSolverOptions {
                prox: self.solver.prox.unwrap_or_default(),
                seed: self.seed,
                ..Default::default()
            },
            model,
        }
    }

    pub fn point_sweep(&self) -> SweepConfig {
        let base = SweepConfig::default();
        let model = self.model_or(base.model.clone());
        SweepConfig {
            eps: self.solver.eps.clone().unwrap_or(base.eps),
            steps: self.solver.steps.unwrap_or(base.steps),
            program: self.load.point.clone().unwrap_or(base.program),
            dissipation: self.spec_for(&model),
            model,
            z0: self.solver.initial_log.unwrap_or(base.z0),
            prox: self.solver.prox.unwrap_or(base.prox),
            final_tolerance: self.solver.final_tolerance.unwrap_or(base.final_tolerance),
            seed: self.seed,
        }
    }

    pub fn quasi_run(&self) -> QuasiRun {
        let model = self.model_or(MaterialModel::default());
        QuasiRun {
            dissipation: self.spec_for(&model),
            load: self.load.quasi.clone().unwrap_or_default(),
            mesh: self.solver.mesh.unwrap_or([2, 2, 2]),
            steps: self.solver.steps.unwrap_or(64),
            options: QuasiOptions {
                seed: self.seed,
                ..self.solver.quasi.unwrap_or_default()
            },
            model,
        }
    }

    pub fn quasi_sweep(&self) -> QuasiSweepConfig {
        let base = QuasiSweepConfig::default();
        let model = self.model_or(base.model.clone());
        QuasiSweepConfig {
            eps: self.solver.eps.clone().unwrap_or(base.eps),
            mesh: self.solver.mesh.unwrap_or(base.mesh),
            steps: self.solver.steps.unwrap_or(base.steps),
            load: self.load.quasi.clone().unwrap_or(base.load),
            dissipation: self.spec_for(&model),
            model,
            solver: QuasiOptions {
                seed: self.seed,
                ..self.solver.quasi.unwrap_or(base.solver)
            },
            competitor: self.solver.competitor.unwrap_or(base.competitor),
        }
    }

    pub fn check(&self) -> CheckConfig {
        let base = CheckConfig::default();
        CheckConfig {
            seed: self.seed,
            samples: self.solver.samples.unwrap_or(base.samples),
            ..base
        }
    }
}
