//! Small-strain linear-hardening limit: energy `½|e - z|²_ℂ + ½|z|²_ℍ`,
//! dissipation `ρ|ż|`, and its return map.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::load::LoadProgram;
use crate::material::{linearization_tensors, MaterialModel};
use crate::point_solver::{StateKind, Trajectory};
use crate::prox::{solve_quadratic_prox, Mat5};
use crate::quadrature::gauss_legendre;
use crate::tensor3::{DevSym3, SymTensor3, Tensor4MinorSym};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub elasticity: Tensor4MinorSym,
    pub hardening: Tensor4MinorSym,
    /// Yield radius of the limit, `r/2`.
    pub rho: f64,
}

impl LinearModel {
    /// `ℂ = 2μ sym + λ tr I`, `ℍ = η I`.
    pub fn isotropic(shear: f64, lame: f64, hardening: f64, rho: f64) -> Self {
        LinearModel {
            elasticity: Tensor4MinorSym::isotropic(shear, lame),
            hardening: Tensor4MinorSym::scaled_identity(hardening),
            rho,
        }
    }

    /// Limit of the finite model: exact tensors for the default density,
    /// finite differences otherwise; `ρ = r/2`.
    pub fn from_material(m: &MaterialModel) -> Result<Self> {
        let rho = 0.5 * m.yield_radius;
        match m.isotropic_constants() {
            Some((shear, lame, hard)) => Ok(Self::isotropic(shear, lame, hard, rho)),
            None => {
                let (elasticity, hardening) = linearization_tensors(m)?;
                Ok(LinearModel {
                    elasticity,
                    hardening,
                    rho,
                })
            }
        }
    }

    pub fn energy(&self, e: &SymTensor3, z: &DevSym3) -> f64 {
        let zs = z.to_sym();
        0.5 * self.elasticity.quad(&(*e - zs)) + 0.5 * self.hardening.quad(&zs)
    }

    /// `dev(ℍz - ℂ(e - z))` in deviator coordinates.
    pub fn gradient(&self, e: &SymTensor3, z: &DevSym3) -> DevSym3 {
        let zs = z.to_sym();
        DevSym3::from_sym(&(self.hardening.apply(&zs) - self.elasticity.apply(&(*e - zs))))
    }

    /// Hessian of the energy in `z`.
    pub fn dev_hessian(&self) -> Mat5 {
        let c = self.elasticity.deviatoric_block();
        let h = self.hardening.deviatoric_block();
        Mat5::from_fn(|i, j| c[i][j] + h[i][j])
    }

    /// `(2μ, η)` when both tensors act as multiples of the identity on deviators.
    pub fn deviatoric_moduli(&self) -> Option<(f64, f64)> {
        let c = self.elasticity.deviatoric_block();
        let h = self.hardening.deviatoric_block();
        let scalar = |m: &[[f64; 5]; 5]| {
            let d = m[0][0];
            let ok = (0..5).all(|i| {
                (0..5).all(|j| {
                    (m[i][j] - if i == j { d } else { 0.0 }).abs() <= 1e-12 * d.abs().max(1.0)
                })
            });
            ok.then_some(d)
        };
        Some((scalar(&c)?, scalar(&h)?))
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rho >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "limit yield radius {} must be non-negative",
                self.rho
            )));
        }
        let min = nalgebra::SymmetricEigen::new(self.dev_hessian())
            .eigenvalues
            .min();
        if !(min > 0.0) {
            return Err(Error::InvalidParameter(
                "limit energy is not positive definite on deviators".into(),
            ));
        }
        Ok(())
    }
}

/// `argmin_z ½|e - z|²_ℂ + ½|z|²_ℍ + ρ|z - z_prev|`.
pub fn return_map(z_prev: &DevSym3, e: &SymTensor3, lm: &LinearModel) -> DevSym3 {
    match lm.deviatoric_moduli() {
        Some((two_mu, eta)) => {
            let trial = DevSym3::from_sym(&e.dev()) * two_mu - *z_prev * (two_mu + eta);
            let size = trial.norm();
            if size <= lm.rho {
                *z_prev
            } else {
                *z_prev + trial * ((size - lm.rho) / ((two_mu + eta) * size))
            }
        }
        None => return_map_generic(z_prev, e, lm),
    }
}

/// Anisotropic route: exact model problem through the secular equation.
pub fn return_map_generic(z_prev: &DevSym3, e: &SymTensor3, lm: &LinearModel) -> DevSym3 {
    *z_prev + solve_quadratic_prox(&lm.dev_hessian(), &lm.gradient(e, z_prev), lm.rho)
}

/// Distance of `0` from `∇E₀(z) + ρ ∂|z - z_prev|`.
pub fn inclusion_residual(z_prev: &DevSym3, z: &DevSym3, e: &SymTensor3, lm: &LinearModel) -> f64 {
    let q = lm.gradient(e, z);
    let w = *z - *z_prev;
    if w.norm() > 0.0 {
        (q + w * (lm.rho / w.norm())).norm()
    } else {
        (q.norm() - lm.rho).max(0.0)
    }
}

pub fn solve_linearized(
    program: &LoadProgram,
    z0: &DevSym3,
    steps: usize,
    lm: &LinearModel,
) -> Result<Trajectory> {
    lm.validate()?;
    program.validate()?;
    if steps == 0 {
        return Err(Error::InvalidParameter(
            "at least one step is required".into(),
        ));
    }
    let horizon = program.horizon();
    let rule = gauss_legendre(4);
    let mut traj = Trajectory::new(
        StateKind::Linear,
        0.0,
        *z0,
        lm.energy(&program.strain(0.0)?.0, z0),
    );
    let mut z_prev = *z0;
    for i in 1..=steps {
        let t_prev = horizon * (i - 1) as f64 / steps as f64;
        let t = horizon * i as f64 / steps as f64;
        let e = program.strain(t)?.0;
        let z = return_map(&z_prev, &e, lm);
        let mut work = 0.0;
        for &(s, w) in &rule {
            let (es, de) = program.strain(t_prev + (t - t_prev) * s)?;
            work += w * (t - t_prev) * lm.elasticity.apply(&(es - z.to_sym())).ddot(&de);
        }
        traj.times.push(t);
        traj.states.push(z);
        traj.energies.push(lm.energy(&e, &z));
        traj.stay_energies.push(lm.energy(&e, &z_prev));
        traj.dissipation.push(lm.rho * (z - z_prev).norm());
        traj.work.push(work);
        traj.margins.push(0.0);
        traj.residuals.push(inclusion_residual(&z_prev, &z, &e, lm));
        z_prev = z;
    }
    Ok(traj)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn model() -> LinearModel {
        LinearModel::isotropic(1.0, 1.0, 1.0, 0.1)
    }

    #[test]
    fn worked_example() {
        let e = SymTensor3::diag([0.2, -0.2, 0.0]);
        let z = return_map(&DevSym3::ZERO, &e, &model());
        assert!((z.norm() - 0.155_228_5).abs() < 1e-6);
        let direction = DevSym3::from_sym(&e) * (1.0 / DevSym3::from_sym(&e).norm());
        assert!((z - direction * z.norm()).norm() < 1e-14);
    }

    #[test]
    fn elastic_trial_sticks() {
        let z_prev = DevSym3([0.01, 0.0, 0.0, 0.0, 0.0]);
        let e = z_prev.to_sym() * 1.5;
        assert_eq!(return_map(&z_prev, &e, &model()), z_prev);
    }

    #[test]
    fn closed_form_agrees_with_generic_route() {
        let lm = model();
        let e = SymTensor3([0.3, -0.1, 0.05, 0.2, 0.0, -0.1]);
        let z_prev = DevSym3([0.02, -0.01, 0.0, 0.03, 0.01]);
        let a = return_map(&z_prev, &e, &lm);
        let b = return_map_generic(&z_prev, &e, &lm);
        assert!((a - b).norm() < 1e-12);
        assert!(inclusion_residual(&z_prev, &a, &e, &lm) < 1e-12);
    }

    #[test]
    fn proportional_loading_closed_form() {
        // e(t) = t E0 with |dev E0| = 1: yield at ρ/(2μ), then slope 2μ/(2μ + η).
        let lm = model();
        let program = LoadProgram::Proportional {
            direction: DevSym3::unit(0).to_sym(),
            shape: crate::load::TimeShape::Ramp { amplitude: 0.2 },
            horizon: 1.0,
        };
        let traj = solve_linearized(&program, &DevSym3::ZERO, 100, &lm).unwrap();
        for (t, z) in traj.times.iter().zip(&traj.states) {
            let strain = 0.2 * t;
            let expected = ((2.0 * strain - 0.1) / 3.0).max(0.0);
            assert!((z.norm() - expected).abs() < 1e-12, "t = {t}");
        }
    }
}
