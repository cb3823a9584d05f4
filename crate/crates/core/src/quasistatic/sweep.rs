//! Rescaled quasistatic runs against the small-strain limit on one mesh and
//! partition, with the mutual-recovery competitors evaluated at the horizon.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::linear::{linearized_quasistatic_solve, LinearQuasi, LinearQuasiOptions};
use super::{
    quasistatic_solve, BoxMesh, QuasiLoad, QuasiOptions, QuasiState, QuasiSystem, QuasiTrajectory,
    Scaling,
};
use crate::dissipation::DissipationSpec;
use crate::error::{Error, Result};
use crate::linearized::LinearModel;
use crate::material::{MaterialModel, PlasticParams};
use crate::projection::project;
use crate::tensor3::{DevSym3, UnitDetSpd};

/// Smooth competitor `(ũ, z̃)`: `ũ = amp_u b(x) e_u`, `z̃ = amp_z b(x) e_z` with
/// `b = 16 x²(1 - x)²`, which vanishes on the clamped face.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Competitor {
    pub displacement: [f64; 3],
    pub plastic: DevSym3,
}

impl Default for Competitor {
    fn default() -> Self {
        Competitor {
            displacement: [0.2, 0.1, 0.0],
            plastic: DevSym3([8.0, 2.0, 0.0, 1.0, 0.0]),
        }
    }
}

fn bump(x: &[f64; 3]) -> f64 {
    16.0 * x[0] * x[0] * (1.0 - x[0]) * (1.0 - x[0])
}

impl Competitor {
    pub fn displacement_at(&self, x: &[f64; 3]) -> [f64; 3] {
        self.displacement.map(|a| a * bump(x))
    }

    pub fn plastic_at(&self, x: &[f64; 3]) -> DevSym3 {
        self.plastic * bump(x)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct QuasiSweepConfig {
    pub eps: Vec<f64>,
    pub mesh: [usize; 3],
    pub steps: usize,
    pub load: QuasiLoad,
    pub model: MaterialModel,
    pub dissipation: DissipationSpec,
    pub solver: QuasiOptions,
    pub competitor: Competitor,
}

impl Default for QuasiSweepConfig {
    fn default() -> Self {
        let model = MaterialModel {
            plastic: PlasticParams {
                k_radius: Some(1.75),
                ..Default::default()
            },
            gradient_coef: 0.05,
            ..Default::default()
        };
        QuasiSweepConfig {
            eps: vec![0.1, 0.03, 0.01],
            mesh: [2, 2, 2],
            steps: 16,
            load: QuasiLoad {
                traction: [0.3, 0.0, 0.0],
                ..Default::default()
            },
            dissipation: DissipationSpec::log_bound(model.yield_radius),
            model,
            solver: QuasiOptions {
                tol: 1e-13,
                ..Default::default()
            },
            competitor: Competitor::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuasiConvergenceRow {
    pub eps: f64,
    /// `supₜ ‖u_ε - u‖_{L²}`.
    pub u_error: f64,
    /// `supₜ ‖z_ε - z‖_{L²}`.
    pub z_error: f64,
    pub dissipation_error: f64,
    pub energy_error: f64,
    /// `|𝒟_ε(z_ε, ẑ_ε) - 𝒟₀(z, z + z̃)|` at the horizon.
    pub recovery_dissipation_gap: f64,
    /// Gap between the rescaled and limit energy increments of the competitors.
    pub recovery_energy_gap: f64,
    pub unconverged_steps: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuasiConvergenceReport {
    pub rows: Vec<QuasiConvergenceRow>,
    pub signal_u: f64,
    pub signal_z: f64,
    pub limit_dissipation: f64,
    pub errors_decreasing: bool,
    pub gaps_non_increasing: bool,
    pub pass: bool,
}

impl QuasiConvergenceReport {
    pub fn write_csv(&self, out: &mut impl Write) -> Result<()> {
        writeln!(out, "eps,u_error,z_error,dissipation_error,energy_error,recovery_dissipation_gap,recovery_energy_gap")?;
        for r in &self.rows {
            writeln!(
                out,
                "{:.6e},{:.15e},{:.15e},{:.15e},{:.15e},{:.15e},{:.15e}",
                r.eps,
                r.u_error,
                r.z_error,
                r.dissipation_error,
                r.energy_error,
                r.recovery_dissipation_gap,
                r.recovery_energy_gap
            )?;
        }
        Ok(())
    }
}

fn z_l2(mesh: &BoxMesh, a: &[DevSym3], b: &[DevSym3]) -> f64 {
    (mesh.element_volume()
        * a.iter()
            .zip(b)
            .map(|(x, y)| (*x - *y).dot(&(*x - *y)))
            .sum::<f64>())
    .sqrt()
}

fn u_l2(mesh: &BoxMesh, a: &[f64], b: &[f64]) -> f64 {
    let diff: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    mesh.l2_norm_sq(&diff).sqrt()
}

/// `(û_ε, ẑ_ε)` built from a rescaled state and the competitor.
pub fn recovery_state(
    mesh: &BoxMesh,
    state: &QuasiState,
    eps: f64,
    k_radius: f64,
    competitor: &Competitor,
) -> Result<QuasiState> {
    let mut v = state.v.clone();
    for a in 0..mesh.node_count() {
        let x = mesh.node_coords(a);
        let moved = [0, 1, 2].map(|d| x[d] + eps * state.v[3 * a + d]);
        let add = competitor.displacement_at(&moved);
        for d in 0..3 {
            if mesh.dof_map[3 * a + d].is_some() {
                v[3 * a + d] += add[d];
            }
        }
    }
    let mut w = Vec::with_capacity(state.w.len());
    for (e, z) in state.w.iter().enumerate() {
        let target = (*z + competitor.plastic_at(&mesh.element_center(e))) * (2.0 * eps);
        let projected = project(&UnitDetSpd::from_log(&target), k_radius)?;
        w.push(projected.log() * (0.5 / eps));
    }
    Ok(QuasiState { v, w })
}

/// `(u + ũ, z + z̃)` on the mesh.
pub fn limit_competitor(mesh: &BoxMesh, state: &QuasiState, competitor: &Competitor) -> QuasiState {
    let mut v = state.v.clone();
    for a in 0..mesh.node_count() {
        let add = competitor.displacement_at(&mesh.node_coords(a));
        for d in 0..3 {
            if mesh.dof_map[3 * a + d].is_some() {
                v[3 * a + d] += add[d];
            }
        }
    }
    let w = state
        .w
        .iter()
        .enumerate()
        .map(|(e, z)| *z + competitor.plastic_at(&mesh.element_center(e)))
        .collect();
    QuasiState { v, w }
}

fn sup_gap(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

pub fn quasistatic_epsilon_sweep(cfg: &QuasiSweepConfig) -> Result<QuasiConvergenceReport> {
    cfg.model.validate()?;
    let k_radius = cfg.model.plastic.k_radius.ok_or_else(|| {
        Error::InvalidParameter("the quasistatic sweep needs a constrained hardening radius".into())
    })?;
    if cfg.eps.is_empty() {
        return Err(Error::InvalidParameter("ε list is empty".into()));
    }
    let mesh = BoxMesh::unit_cube(cfg.mesh)?;
    let lm = LinearModel::from_material(&cfg.model)?;
    let lopts = LinearQuasiOptions::default();
    let limit = linearized_quasistatic_solve(
        &mesh,
        &lm,
        cfg.model.gradient_coef,
        &cfg.load,
        cfg.steps,
        &lopts,
    )?;
    let limit_sys = LinearQuasi::new(&mesh, lm, cfg.model.gradient_coef, &cfg.load)?;
    let zero = QuasiState::zero(&mesh);
    let signal_u = limit
        .states
        .iter()
        .map(|s| u_l2(&mesh, &s.v, &zero.v))
        .fold(0.0, f64::max);
    let signal_z = limit
        .states
        .iter()
        .map(|s| z_l2(&mesh, &s.w, &zero.w))
        .fold(0.0, f64::max);
    let horizon = cfg.load.horizon;
    let last = cfg.steps;
    let limit_hat = limit_competitor(&mesh, &limit.states[last], &cfg.competitor);
    let limit_dissipation_gap = limit_sys.dissipation(&limit.states[last].w, &limit_hat.w);
    let limit_energy_gap =
        limit_sys.energy(&limit_hat, horizon)? - limit_sys.energy(&limit.states[last], horizon)?;
    let rows = cfg
        .eps
        .par_iter()
        .map(|&eps| -> Result<QuasiConvergenceRow> {
            let finite: QuasiTrajectory = quasistatic_solve(
                &mesh,
                &cfg.model,
                &cfg.dissipation,
                &cfg.load,
                cfg.steps,
                Scaling::Rescaled(eps),
                &cfg.solver,
            )?;
            let sys = QuasiSystem::new(
                &mesh,
                &cfg.model,
                cfg.dissipation,
                &cfg.load,
                Scaling::Rescaled(eps),
            )?;
            let state = &finite.states[last];
            let hat = recovery_state(&mesh, state, eps, k_radius, &cfg.competitor)?;
            let dissipation = sys.dissipation(&state.w, &hat.w);
            let energy = sys.energy(&hat, horizon)? - sys.energy(state, horizon)?;
            Ok(QuasiConvergenceRow {
                eps,
                u_error: finite
                    .states
                    .iter()
                    .zip(&limit.states)
                    .map(|(a, b)| u_l2(&mesh, &a.v, &b.v))
                    .fold(0.0, f64::max),
                z_error: finite
                    .states
                    .iter()
                    .zip(&limit.states)
                    .map(|(a, b)| z_l2(&mesh, &a.w, &b.w))
                    .fold(0.0, f64::max),
                dissipation_error: sup_gap(
                    &finite.cumulative_dissipation(),
                    &limit.cumulative_dissipation(),
                ),
                energy_error: sup_gap(&finite.energies, &limit.energies),
                recovery_dissipation_gap: (dissipation - limit_dissipation_gap).abs(),
                recovery_energy_gap: (energy - limit_energy_gap).abs(),
                unconverged_steps: finite.unconverged_steps.len(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let errors_decreasing = rows.windows(2).all(|w| {
        w[1].u_error < w[0].u_error
            && w[1].z_error < w[0].z_error
            && w[1].dissipation_error < w[0].dissipation_error
            && w[1].energy_error < w[0].energy_error
    });
    let gaps_non_increasing = rows.windows(2).all(|w| {
        w[1].recovery_dissipation_gap <= w[0].recovery_dissipation_gap
            && w[1].recovery_energy_gap <= w[0].recovery_energy_gap
    });
    Ok(QuasiConvergenceReport {
        rows,
        signal_u,
        signal_z,
        limit_dissipation: limit.total_dissipation(),
        errors_decreasing,
        gaps_non_increasing,
        pass: errors_decreasing && gaps_non_increasing,
    })
}
