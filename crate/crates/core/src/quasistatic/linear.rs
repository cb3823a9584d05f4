//! Small-strain limit on the same mesh: linear elasticity in `u` solved by
//! conjugate gradients, element plastic strains `z` updated by exact
//! proximal steps with the face coupling `2μ Σ κ |z_a - z_b|²`.

use nalgebra::{DMatrix, DVector};

use super::{BoxMesh, QuasiKind, QuasiLoad, QuasiState, QuasiTrajectory};
use crate::error::{Error, Result};
use crate::linearized::LinearModel;
use crate::prox::{solve_quadratic_prox, Mat5};
use crate::tensor3::{DevSym3, SymTensor3};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearQuasiOptions {
    /// Alternation stops once no element moves by more than this.
    pub z_tol: f64,
    pub max_sweeps: usize,
    pub cg_tol: f64,
}

impl Default for LinearQuasiOptions {
    fn default() -> Self {
        LinearQuasiOptions {
            z_tol: 1e-13,
            max_sweeps: 20_000,
            cg_tol: 1e-14,
        }
    }
}

pub struct LinearQuasi<'a> {
    pub mesh: &'a BoxMesh,
    pub lm: LinearModel,
    pub gradient_coef: f64,
    pub load: &'a QuasiLoad,
    f_unit: Vec<f64>,
    stiffness: DMatrix<f64>,
}

/// `sym(eⱼ ⊗ ∇N)` for a unit displacement of one node along axis `j`.
fn unit_strain(grad: &[f64; 3], j: usize) -> SymTensor3 {
    let mut t = crate::tensor3::Tensor3::ZERO;
    t.0[j] = *grad;
    t.sym()
}

impl<'a> LinearQuasi<'a> {
    pub fn new(
        mesh: &'a BoxMesh,
        lm: LinearModel,
        gradient_coef: f64,
        load: &'a QuasiLoad,
    ) -> Result<Self> {
        lm.validate()?;
        if !(gradient_coef >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "gradient coefficient {gradient_coef} must be non-negative"
            )));
        }
        let f_unit = mesh.load_vector(load.traction, load.body_force);
        let wj = mesh.gauss_weight();
        let mut local = [[0.0; 24]; 24];
        for q in 0..8 {
            for b in 0..8 {
                for j in 0..3 {
                    let sigma = lm.elasticity.apply(&unit_strain(&mesh.grads[q][b], j));
                    for a in 0..8 {
                        for i in 0..3 {
                            local[3 * a + i][3 * b + j] +=
                                wj * sigma.ddot(&unit_strain(&mesh.grads[q][a], i));
                        }
                    }
                }
            }
        }
        let n = mesh.free_dofs;
        let mut stiffness = DMatrix::zeros(n, n);
        for e in 0..mesh.element_count() {
            let dofs: Vec<Option<usize>> = mesh
                .element_nodes(e)
                .iter()
                .flat_map(|&node| (0..3).map(move |d| 3 * node + d))
                .map(|g| mesh.dof_map[g])
                .collect();
            for (la, da) in dofs.iter().enumerate() {
                for (lb, db) in dofs.iter().enumerate() {
                    if let (Some(r), Some(c)) = (da, db) {
                        stiffness[(*r, *c)] += local[la][lb];
                    }
                }
            }
        }
        Ok(LinearQuasi {
            mesh,
            lm,
            gradient_coef,
            load,
            f_unit,
            stiffness,
        })
    }

    pub fn strain(&self, e: usize, q: usize, u: &[f64]) -> SymTensor3 {
        crate::tensor3::Tensor3(self.mesh.gradient(e, q, u)).sym()
    }

    pub fn energy(&self, state: &QuasiState, t: f64) -> Result<f64> {
        let wj = self.mesh.gauss_weight();
        let mut total = 0.0;
        for e in 0..self.mesh.element_count() {
            for q in 0..8 {
                total += wj * self.lm.energy(&self.strain(e, q, &state.v), &state.w[e]);
            }
        }
        total += 2.0 * self.gradient_coef * self.coupling_sum(&state.w);
        let pairing: f64 = self.f_unit.iter().zip(&state.v).map(|(f, x)| f * x).sum();
        Ok(total - self.load.amplitude(t)? * pairing)
    }

    fn coupling_sum(&self, z: &[DevSym3]) -> f64 {
        self.mesh
            .faces
            .iter()
            .map(|f| f.weight * (z[f.a] - z[f.b]).dot(&(z[f.a] - z[f.b])))
            .sum()
    }

    pub fn dissipation(&self, z_prev: &[DevSym3], z: &[DevSym3]) -> f64 {
        let weight = self.lm.rho * self.mesh.element_volume();
        z_prev
            .iter()
            .zip(z)
            .map(|(a, b)| weight * (*b - *a).norm())
            .sum()
    }

    fn rhs(&self, z: &[DevSym3], amp: f64) -> DVector<f64> {
        let wj = self.mesh.gauss_weight();
        let mut rhs = DVector::zeros(self.mesh.free_dofs);
        for (g, slot) in self.mesh.dof_map.iter().enumerate() {
            if let Some(i) = slot {
                rhs[*i] += amp * self.f_unit[g];
            }
        }
        for e in 0..self.mesh.element_count() {
            let sigma = self.lm.elasticity.apply(&z[e].to_sym());
            for (a, node) in self.mesh.element_nodes(e).into_iter().enumerate() {
                for i in 0..3 {
                    if let Some(r) = self.mesh.dof_map[3 * node + i] {
                        for q in 0..8 {
                            rhs[r] += wj * sigma.ddot(&unit_strain(&self.mesh.grads[q][a], i));
                        }
                    }
                }
            }
        }
        rhs
    }

    fn scatter(&self, free: &DVector<f64>, u: &mut [f64]) {
        for (g, slot) in self.mesh.dof_map.iter().enumerate() {
            u[g] = slot.map_or(0.0, |i| free[i]);
        }
    }

    fn gather(&self, u: &[f64]) -> DVector<f64> {
        let mut free = DVector::zeros(self.mesh.free_dofs);
        for (g, slot) in self.mesh.dof_map.iter().enumerate() {
            if let Some(i) = slot {
                free[*i] = u[g];
            }
        }
        free
    }

    /// Equilibrium in `u` at fixed `z`, warm-started from `u`.
    pub fn displacement_step(
        &self,
        u: &mut [f64],
        z: &[DevSym3],
        amp: f64,
        tol: f64,
    ) -> Result<()> {
        let b = self.rhs(z, amp);
        let mut x = self.gather(u);
        let mut r = &b - &self.stiffness * &x;
        let target = tol * b.norm().max(1e-300);
        let mut p = r.clone();
        let mut rr = r.dot(&r);
        let limit = 10 * self.mesh.free_dofs + 100;
        let mut iterations = 0;
        while rr.sqrt() > target {
            if iterations == limit {
                return Err(Error::SolverDivergence(format!(
                    "conjugate gradients stalled at residual {:.3e}",
                    rr.sqrt()
                )));
            }
            let kp = &self.stiffness * &p;
            let alpha = rr / p.dot(&kp);
            x += alpha * &p;
            r -= alpha * &kp;
            let next = r.dot(&r);
            p = &r + (next / rr) * &p;
            rr = next;
            iterations += 1;
        }
        self.scatter(&x, u);
        Ok(())
    }

    /// `Σ_q w_q ∂_z` of the bulk energy plus the face coupling, for element `e`.
    fn element_gradient(&self, e: usize, u: &[f64], z: &[DevSym3]) -> DevSym3 {
        let wj = self.mesh.gauss_weight();
        let mut g = DevSym3::ZERO;
        for q in 0..8 {
            g += self.lm.gradient(&self.strain(e, q, u), &z[e]) * wj;
        }
        for &(b, k) in &self.mesh.neighbors[e] {
            g += (z[e] - z[b]) * (4.0 * self.gradient_coef * k);
        }
        g
    }

    fn element_hessian(&self, e: usize) -> Mat5 {
        let coupling: f64 = self.mesh.neighbors[e]
            .iter()
            .map(|&(_, k)| 4.0 * self.gradient_coef * k)
            .sum();
        self.lm.dev_hessian() * self.mesh.element_volume() + Mat5::identity() * coupling
    }

    /// Red-black exact minimization over each element's `z`; returns the largest move.
    pub fn plastic_step(&self, u: &[f64], z: &mut [DevSym3], z_prev: &[DevSym3]) -> f64 {
        let weight = self.lm.rho * self.mesh.element_volume();
        let mut moved: f64 = 0.0;
        for color in 0..2 {
            for e in (0..self.mesh.element_count()).filter(|&e| self.mesh.color(e) == color) {
                let old = z[e];
                z[e] = z_prev[e];
                let c = self.element_gradient(e, u, z);
                z[e] = z_prev[e] + solve_quadratic_prox(&self.element_hessian(e), &c, weight);
                moved = moved.max((z[e] - old).norm());
            }
        }
        moved
    }

    /// Largest per-volume distance of `0` from the element subdifferentials.
    pub fn inclusion_residual(&self, u: &[f64], z: &[DevSym3], z_prev: &[DevSym3]) -> f64 {
        let vol = self.mesh.element_volume();
        (0..self.mesh.element_count())
            .map(|e| {
                let q = self.element_gradient(e, u, z) * (1.0 / vol);
                let w = z[e] - z_prev[e];
                if w.norm() > 0.0 {
                    (q + w * (self.lm.rho / w.norm())).norm()
                } else {
                    (q.norm() - self.lm.rho).max(0.0)
                }
            })
            .fold(0.0, f64::max)
    }

    /// Relative residual of the displacement equilibrium.
    pub fn equilibrium_residual(&self, u: &[f64], z: &[DevSym3], amp: f64) -> f64 {
        let b = self.rhs(z, amp);
        (&b - &self.stiffness * self.gather(u)).norm() / b.norm().max(1e-300)
    }

    pub fn increment(
        &self,
        start: &QuasiState,
        z_prev: &[DevSym3],
        t: f64,
        opts: &LinearQuasiOptions,
    ) -> Result<(QuasiState, usize, bool)> {
        let amp = self.load.amplitude(t)?;
        let mut state = start.clone();
        for sweep in 1..=opts.max_sweeps {
            self.displacement_step(&mut state.v, &state.w, amp, opts.cg_tol)?;
            let moved = self.plastic_step(&state.v, &mut state.w, z_prev);
            if moved <= opts.z_tol {
                self.displacement_step(&mut state.v, &state.w, amp, opts.cg_tol)?;
                return Ok((state, sweep, true));
            }
        }
        self.displacement_step(&mut state.v, &state.w, amp, opts.cg_tol)?;
        Ok((state, opts.max_sweeps, false))
    }
}

pub fn linearized_quasistatic_solve(
    mesh: &BoxMesh,
    lm: &LinearModel,
    gradient_coef: f64,
    load: &QuasiLoad,
    steps: usize,
    opts: &LinearQuasiOptions,
) -> Result<QuasiTrajectory> {
    if steps == 0 {
        return Err(Error::InvalidParameter(
            "at least one step is required".into(),
        ));
    }
    let sys = LinearQuasi::new(mesh, *lm, gradient_coef, load)?;
    let mut state = QuasiState::zero(mesh);
    let mut traj =
        QuasiTrajectory::start(QuasiKind::Linear, state.clone(), sys.energy(&state, 0.0)?);
    for i in 1..=steps {
        let t0 = load.horizon * (i - 1) as f64 / steps as f64;
        let t = load.horizon * i as f64 / steps as f64;
        let (next, sweeps, converged) = sys.increment(&state, &state.w, t, opts)?;
        traj.stay_energies.push(sys.energy(&state, t)?);
        traj.dissipation.push(sys.dissipation(&state.w, &next.w));
        let pairing: f64 = sys.f_unit.iter().zip(&next.v).map(|(f, x)| f * x).sum();
        traj.work
            .push(-(load.amplitude(t)? - load.amplitude(t0)?) * pairing);
        state = next;
        traj.times.push(t);
        traj.energies.push(sys.energy(&state, t)?);
        traj.sweeps.push(sweeps);
        if !converged {
            traj.unconverged_steps.push(i);
        }
        traj.states.push(state.clone());
    }
    Ok(traj)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linearized::return_map;

    fn setup() -> (BoxMesh, LinearModel, QuasiLoad) {
        (
            BoxMesh::unit_cube([2, 2, 2]).unwrap(),
            LinearModel::isotropic(1.0, 1.0, 1.0, 0.1),
            QuasiLoad {
                traction: [0.4, 0.1, 0.0],
                ..Default::default()
            },
        )
    }

    #[test]
    fn decoupled_limit_matches_return_map() {
        let (mesh, lm, load) = setup();
        let traj =
            linearized_quasistatic_solve(&mesh, &lm, 0.0, &load, 8, &LinearQuasiOptions::default())
                .unwrap();
        let sys = LinearQuasi::new(&mesh, lm, 0.0, &load).unwrap();
        assert!(traj.total_dissipation() > 0.0);
        for i in 1..traj.times.len() {
            let (prev, cur) = (&traj.states[i - 1], &traj.states[i]);
            for e in 0..mesh.element_count() {
                let mean = (0..8).fold(SymTensor3::ZERO, |acc, q| {
                    acc + sys.strain(e, q, &cur.v) * 0.125
                });
                let z = return_map(&prev.w[e], &mean, &lm);
                assert!((z - cur.w[e]).norm() < 1e-10, "step {i} element {e}");
            }
        }
    }

    #[test]
    fn converged_steps_satisfy_the_inclusion() {
        let (mesh, lm, load) = setup();
        let traj =
            linearized_quasistatic_solve(&mesh, &lm, 0.3, &load, 8, &LinearQuasiOptions::default())
                .unwrap();
        let sys = LinearQuasi::new(&mesh, lm, 0.3, &load).unwrap();
        assert!(traj.unconverged_steps.is_empty());
        for i in 1..traj.times.len() {
            let s = &traj.states[i];
            assert!(sys.inclusion_residual(&s.v, &s.w, &traj.states[i - 1].w) <= 1e-6);
            assert!(
                sys.equilibrium_residual(&s.v, &s.w, load.amplitude(traj.times[i]).unwrap())
                    <= 1e-10
            );
        }
    }

    #[test]
    fn coupling_vanishes_on_uniform_z() {
        let (mesh, lm, load) = setup();
        let mut state = QuasiState::zero(&mesh);
        state
            .v
            .iter_mut()
            .enumerate()
            .for_each(|(k, x)| *x = 0.01 * (k % 7) as f64);
        state
            .w
            .iter_mut()
            .for_each(|z| *z = DevSym3([0.02, -0.01, 0.0, 0.01, 0.0]));
        let plain = LinearQuasi::new(&mesh, lm, 0.0, &load)
            .unwrap()
            .energy(&state, 0.5)
            .unwrap();
        let coupled = LinearQuasi::new(&mesh, lm, 5.0, &load)
            .unwrap()
            .energy(&state, 0.5)
            .unwrap();
        assert_eq!(plain, coupled);
        state.w[3] = DevSym3::ZERO;
        let coupled = LinearQuasi::new(&mesh, lm, 5.0, &load)
            .unwrap()
            .energy(&state, 0.5)
            .unwrap();
        assert!(coupled > plain);
    }
}
