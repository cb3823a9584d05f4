//! Rescaled point problem `u = (F - I)/ε`, `z = log Cp / (2ε)`, its sweep
//! towards the small-strain limit, and the mutual-recovery construction.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dissipation::DissipationSpec;
use crate::error::{Error, Result};
use crate::linearized::{solve_linearized, LinearModel};
use crate::load::LoadProgram;
use crate::material::MaterialModel;
use crate::point_solver::{StateKind, Trajectory};
use crate::prox::{minimize, ProxOptions, SmoothObjective};
use crate::quadrature::gauss_legendre;
use crate::sampling::substream;
use crate::tensor3::{DevSym3, SymTensor3, Tensor3, UnitDetSpd};

/// `((F - I)/ε, log Cp / (2ε))`.
pub fn rescale(f: &Tensor3, cp: &UnitDetSpd, eps: f64) -> (Tensor3, DevSym3) {
    (
        (*f - Tensor3::identity()) * (1.0 / eps),
        cp.log() * (0.5 / eps),
    )
}

/// `W(I + 2εe, exp(2εz)) / ε²`.
pub fn rescaled_energy(e: &SymTensor3, z: &DevSym3, eps: f64, m: &MaterialModel) -> Result<f64> {
    Ok(m.density_log(&(*e * (2.0 * eps)), &(*z * (2.0 * eps)))? / (eps * eps))
}

/// `D(exp 2εz₁, exp 2εz₂) / (2ε)`, which is `(r/2)|z₂ - z₁|` for every `ε`.
pub fn rescaled_distance(z1: &DevSym3, z2: &DevSym3, spec: &DissipationSpec) -> f64 {
    spec.log_weight() * (*z2 - *z1).norm()
}

/// Smooth part of the rescaled incremental problem in `z`.
pub struct RescaledObjective<'a> {
    pub model: &'a MaterialModel,
    pub strain: SymTensor3,
    pub eps: f64,
}

impl SmoothObjective for RescaledObjective<'_> {
    fn value(&self, z: &DevSym3) -> f64 {
        rescaled_energy(&self.strain, z, self.eps, self.model).unwrap_or(f64::INFINITY)
    }

    fn gradient(&self, z: &DevSym3) -> DevSym3 {
        let cm = self.strain * (2.0 * self.eps);
        match self
            .model
            .density_log_gradient(&cm, &(*z * (2.0 * self.eps)))
        {
            Ok(g) => g * (2.0 / self.eps),
            Err(_) => DevSym3([f64::NAN; 5]),
        }
    }
}

/// Energetic scheme for the rescaled problem; states are `z`.
#[allow(clippy::too_many_arguments)]
pub fn solve_rescaled(
    program: &LoadProgram,
    z0: &DevSym3,
    steps: usize,
    eps: f64,
    model: &MaterialModel,
    spec: &DissipationSpec,
    prox: &ProxOptions,
    seed: u64,
) -> Result<Trajectory> {
    if !(eps > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "ε = {eps} must be positive"
        )));
    }
    let horizon = program.horizon();
    let e0 = rescaled_energy(&program.strain(0.0)?.0, z0, eps, model)?;
    if !e0.is_finite() {
        return Err(Error::NonFiniteEnergy);
    }
    let rule = gauss_legendre(4);
    let mut traj = Trajectory::new(StateKind::Linear, 0.0, *z0, e0);
    let mut z_prev = *z0;
    for i in 1..=steps {
        let t_prev = horizon * (i - 1) as f64 / steps as f64;
        let t = horizon * i as f64 / steps as f64;
        let strain = program.strain(t)?.0;
        let obj = RescaledObjective { model, strain, eps };
        let mut rng = substream(seed, i as u64);
        let z = minimize(&obj, z_prev, spec.log_weight(), z_prev, prox, &mut rng).x;
        // ∂ₜ of W(I + 2εe, exp 2εz)/ε² is the elastic stress paired with 2ε ė, over ε².
        let mut work = 0.0;
        for &(s, w) in &rule {
            let (es, de) = program.strain(t_prev + (t - t_prev) * s)?;
            let pb = crate::material::pull_back(&(es * (2.0 * eps)), &(z * (2.0 * eps)));
            let g = model.elastic.stress_strain(&pb.strain)?;
            work +=
                w * (t - t_prev) * g.ddot(&SymTensor3::sandwich(&pb.inv_sqrt, &(de * (2.0 / eps))));
        }
        traj.times.push(t);
        traj.states.push(z);
        traj.energies.push(obj.value(&z));
        traj.stay_energies.push(obj.value(&z_prev));
        traj.dissipation.push(rescaled_distance(&z_prev, &z, spec));
        traj.work.push(work);
        traj.margins.push(0.0);
        traj.residuals.push(0.0);
        z_prev = z;
    }
    Ok(traj)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepConfig {
    pub eps: Vec<f64>,
    pub steps: usize,
    pub program: LoadProgram,
    pub model: MaterialModel,
    pub dissipation: DissipationSpec,
    pub z0: DevSym3,
    pub prox: ProxOptions,
    /// Largest final `z` error as a fraction of `max |z|` of the limit.
    pub final_tolerance: f64,
    pub seed: u64,
}

impl Default for SweepConfig {
    /// Ramp of a unit deviatoric strain to 0.1, yielding at mid-horizon for
    /// the default material.
    fn default() -> Self {
        let model = MaterialModel::default();
        SweepConfig {
            eps: vec![0.1, 0.03, 0.01, 0.003],
            steps: 128,
            program: LoadProgram::Proportional {
                direction: DevSym3::unit(0).to_sym(),
                shape: crate::load::TimeShape::Ramp { amplitude: 0.1 },
                horizon: 1.0,
            },
            dissipation: DissipationSpec::log_bound(model.yield_radius),
            model,
            z0: DevSym3::ZERO,
            prox: ProxOptions {
                random_starts: 2,
                ..Default::default()
            },
            final_tolerance: 0.05,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRow {
    pub eps: f64,
    /// `maxᵢ |z_ε(tᵢ) - z(tᵢ)|`.
    pub z_error: f64,
    /// `maxᵢ |Diss_ε(tᵢ) - Diss(tᵢ)|` of the cumulative dissipation.
    pub dissipation_error: f64,
    /// `maxᵢ |E_ε(tᵢ) - E(tᵢ)|`.
    pub energy_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub rows: Vec<ConvergenceRow>,
    /// `maxᵢ |z(tᵢ)|` of the limit trajectory.
    pub signal: f64,
    pub limit_dissipation: f64,
    pub strictly_decreasing: bool,
    pub final_relative_error: f64,
    pub final_tolerance: f64,
    pub pass: bool,
}

impl ConvergenceReport {
    pub fn write_csv(&self, out: &mut impl Write) -> Result<()> {
        writeln!(out, "eps,z_error,dissipation_error,energy_error")?;
        for r in &self.rows {
            writeln!(
                out,
                "{:.6e},{:.15e},{:.15e},{:.15e}",
                r.eps, r.z_error, r.dissipation_error, r.energy_error
            )?;
        }
        Ok(())
    }
}

fn compare(finite: &Trajectory, limit: &Trajectory, eps: f64) -> ConvergenceRow {
    let sup = |a: &[f64], b: &[f64]| {
        a.iter()
            .zip(b)
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max)
    };
    let z_error = finite
        .states
        .iter()
        .zip(&limit.states)
        .map(|(a, b)| (*a - *b).norm())
        .fold(0.0, f64::max);
    ConvergenceRow {
        eps,
        z_error,
        dissipation_error: sup(
            &finite.cumulative_dissipation(),
            &limit.cumulative_dissipation(),
        ),
        energy_error: sup(&finite.energies, &limit.energies),
    }
}

/// Runs the rescaled problem for each `ε` and the limit problem on the same
/// partition. PASS when every error column decreases strictly along the
/// list and the last `z` error is within tolerance of the signal.
pub fn epsilon_sweep(cfg: &SweepConfig) -> Result<ConvergenceReport> {
    cfg.model.validate()?;
    if cfg.eps.is_empty() {
        return Err(Error::InvalidParameter("ε list is empty".into()));
    }
    let lm = LinearModel::from_material(&cfg.model)?;
    let limit = solve_linearized(&cfg.program, &cfg.z0, cfg.steps, &lm)?;
    let signal = limit.states.iter().map(DevSym3::norm).fold(0.0, f64::max);
    // Legs are independent and individually seeded, so the order of completion is irrelevant.
    let rows = cfg
        .eps
        .par_iter()
        .map(|&eps| {
            let finite = solve_rescaled(
                &cfg.program,
                &cfg.z0,
                cfg.steps,
                eps,
                &cfg.model,
                &cfg.dissipation,
                &cfg.prox,
                cfg.seed,
            )?;
            Ok(compare(&finite, &limit, eps))
        })
        .collect::<Result<Vec<_>>>()?;
    let strictly_decreasing = rows.windows(2).all(|w| {
        w[1].z_error < w[0].z_error
            && w[1].dissipation_error < w[0].dissipation_error
            && w[1].energy_error < w[0].energy_error
    });
    let final_relative_error = rows
        .last()
        .map_or(f64::INFINITY, |r| r.z_error / signal.max(1e-300));
    let pass = strictly_decreasing && final_relative_error <= cfg.final_tolerance;
    Ok(ConvergenceReport {
        rows,
        signal,
        limit_dissipation: limit.total_dissipation(),
        strictly_decreasing,
        final_relative_error,
        final_tolerance: cfg.final_tolerance,
        pass,
    })
}

/// Competitor energies of `ẑ` against `z`: rescaled at `ε` and in the limit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RecoveryCheck {
    /// `E_ε(ẑ) - E_ε(z) + D_ε(z, ẑ)`.
    pub rescaled: f64,
    /// `E₀(ẑ) - E₀(z) + D₀(z, ẑ)`.
    pub limit: f64,
}

impl RecoveryCheck {
    pub fn gap(&self) -> f64 {
        (self.rescaled - self.limit).abs()
    }
}

pub fn recovery_sequence_point(
    z: &DevSym3,
    z_hat: &DevSym3,
    e: &SymTensor3,
    eps: f64,
    m: &MaterialModel,
    spec: &DissipationSpec,
) -> Result<RecoveryCheck> {
    let lm = LinearModel::from_material(m)?;
    let rescaled = rescaled_energy(e, z_hat, eps, m)? - rescaled_energy(e, z, eps, m)?
        + rescaled_distance(z, z_hat, spec);
    let limit = lm.energy(e, z_hat) - lm.energy(e, z) + lm.rho * (*z_hat - *z).norm();
    Ok(RecoveryCheck { rescaled, limit })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rescaled_energy_tends_to_limit_energy() {
        let m = MaterialModel::default();
        let lm = LinearModel::from_material(&m).unwrap();
        let e = SymTensor3([0.3, -0.1, 0.05, 0.1, 0.0, 0.2]);
        let z = DevSym3([0.1, 0.05, -0.05, 0.0, 0.1]);
        let target = lm.energy(&e, &z);
        let errs: Vec<f64> = [1e-1, 1e-2, 1e-3]
            .iter()
            .map(|&eps| (rescaled_energy(&e, &z, eps, &m).unwrap() - target).abs())
            .collect();
        assert!(errs[1] < errs[0] && errs[2] < errs[1] && errs[2] < 1e-3);
    }

    #[test]
    fn rescaled_distance_is_scale_free() {
        let spec = DissipationSpec::log_bound(0.2);
        let (z1, z2) = (
            DevSym3([0.1, 0.0, 0.2, 0.0, 0.0]),
            DevSym3([0.0, 0.3, 0.0, 0.1, 0.0]),
        );
        for eps in [1.0, 0.1, 0.01] {
            let c1 = UnitDetSpd::from_log(&(z1 * (2.0 * eps)));
            let c2 = UnitDetSpd::from_log(&(z2 * (2.0 * eps)));
            let d = crate::dissipation::distance(&c1, &c2, &spec) / (2.0 * eps);
            assert!((d - rescaled_distance(&z1, &z2, &spec)).abs() < 1e-12);
        }
    }

    #[test]
    fn rescale_round_trip() {
        let f = Tensor3([[1.01, 0.002, 0.0], [0.0, 0.99, 0.001], [0.0, 0.0, 1.0]]);
        let cp = UnitDetSpd::from_log(&DevSym3([0.02, 0.0, 0.0, 0.0, 0.0]));
        let (u, z) = rescale(&f, &cp, 0.01);
        assert!((u.0[0][0] - 1.0).abs() < 1e-12);
        assert!((z.0[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rescaled_gradient_matches_finite_differences() {
        let m = MaterialModel::default();
        let obj = RescaledObjective {
            model: &m,
            strain: SymTensor3([0.2, -0.1, 0.0, 0.05, 0.0, 0.1]),
            eps: 0.01,
        };
        let z = DevSym3([0.05, 0.02, 0.0, -0.03, 0.01]);
        let g = obj.gradient(&z);
        for k in 0..5 {
            let h = 1e-5;
            let e = DevSym3::unit(k) * h;
            let fd = (obj.value(&(z + e)) - obj.value(&(z - e))) / (2.0 * h);
            assert!((g.0[k] - fd).abs() < 1e-7);
        }
    }
}
