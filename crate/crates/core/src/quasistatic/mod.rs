//! Quasistatic evolution on the unit cube: trilinear displacements,
//! element-constant plastic strains with a face-based gradient penalty,
//! clamped at `x = 0`, loaded on `x = 1`. Each increment alternates a damped
//! Newton solve in the deformation with blockwise plastic minimizations.

pub mod linear;
pub mod mesh;
pub mod sweep;

use std::io::Write;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::dissipation::DissipationSpec;
use crate::error::{Error, Result};
use crate::load::TimeShape;
use crate::material::MaterialModel;
use crate::prox::{minimize, ProxOptions, SmoothObjective};
use crate::sampling::substream;
use crate::tensor3::{exp_derivative, spectral, DevSym3, SymTensor3, Tensor3};

pub use mesh::BoxMesh;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct QuasiLoad {
    /// Uniform traction on `x = 1` at unit amplitude.
    pub traction: [f64; 3],
    /// Uniform body force at unit amplitude.
    pub body_force: [f64; 3],
    pub shape: TimeShape,
    pub horizon: f64,
}

impl Default for QuasiLoad {
    fn default() -> Self {
        QuasiLoad {
            traction: [0.35, 0.0, 0.0],
            body_force: [0.0; 3],
            shape: TimeShape::Ramp { amplitude: 1.0 },
            horizon: 1.0,
        }
    }
}

impl QuasiLoad {
    pub fn amplitude(&self, t: f64) -> Result<f64> {
        Ok(self.shape.eval(t, self.horizon)?.0)
    }
}

/// Variables `(v, w)` map to displacement `s_d v` and `log Cp = s_L w`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scaling {
    Physical,
    /// `u = d/ε`, `z = log Cp/(2ε)`, energy `𝒲/ε² - ⟨ℓ, u⟩`.
    Rescaled(f64),
}

impl Scaling {
    pub fn displacement(self) -> f64 {
        match self {
            Scaling::Physical => 1.0,
            Scaling::Rescaled(eps) => eps,
        }
    }

    pub fn plastic(self) -> f64 {
        match self {
            Scaling::Physical => 1.0,
            Scaling::Rescaled(eps) => 2.0 * eps,
        }
    }

    pub fn energy(self) -> f64 {
        match self {
            Scaling::Physical => 1.0,
            Scaling::Rescaled(eps) => 1.0 / (eps * eps),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuasiState {
    /// Nodal displacement variable, three per node.
    pub v: Vec<f64>,
    /// Element plastic variable.
    pub w: Vec<DevSym3>,
}

impl QuasiState {
    pub fn zero(mesh: &BoxMesh) -> Self {
        QuasiState {
            v: vec![0.0; 3 * mesh.node_count()],
            w: vec![DevSym3::ZERO; mesh.element_count()],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct QuasiOptions {
    pub max_sweeps: usize,
    /// Alternation stops when a sweep lowers the functional by less than
    /// `tol (1 + |ℰ|)`.
    pub tol: f64,
    pub newton_max: usize,
    pub prox: ProxOptions,
    pub seed: u64,
}

impl Default for QuasiOptions {
    fn default() -> Self {
        QuasiOptions {
            max_sweeps: 50,
            tol: 1e-10,
            newton_max: 30,
            prox: ProxOptions::lean(),
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum QuasiKind {
    Finite(Scaling),
    Linear,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuasiTrajectory {
    pub kind: QuasiKind,
    pub times: Vec<f64>,
    pub states: Vec<QuasiState>,
    pub energies: Vec<f64>,
    pub stay_energies: Vec<f64>,
    pub dissipation: Vec<f64>,
    pub work: Vec<f64>,
    pub sweeps: Vec<usize>,
    /// Largest increase of the incremental functional over any half-step.
    pub monotone_violation: f64,
    /// Steps that hit the sweep limit before the decrease tolerance.
    pub unconverged_steps: Vec<usize>,
}

impl QuasiTrajectory {
    fn start(kind: QuasiKind, state: QuasiState, energy: f64) -> Self {
        QuasiTrajectory {
            kind,
            times: vec![0.0],
            states: vec![state],
            energies: vec![energy],
            stay_energies: vec![energy],
            dissipation: vec![0.0],
            work: vec![0.0],
            sweeps: vec![0],
            monotone_violation: 0.0,
            unconverged_steps: Vec::new(),
        }
    }

    pub fn steps(&self) -> usize {
        self.times.len() - 1
    }

    pub fn total_dissipation(&self) -> f64 {
        self.dissipation.iter().sum()
    }

    pub fn cumulative_dissipation(&self) -> Vec<f64> {
        self.dissipation
            .iter()
            .scan(0.0, |acc, d| {
                *acc += d;
                Some(*acc)
            })
            .collect()
    }

    /// `ℰ(T) + Diss - ℰ(0) - ∫ ∂ₜℰ` with backward-constant states.
    pub fn balance_residual(&self) -> f64 {
        let n = self.steps();
        self.energies[n] + self.total_dissipation()
            - self.energies[0]
            - self.work.iter().sum::<f64>()
    }

    pub fn step_inequality_violation(&self) -> f64 {
        (1..self.times.len())
            .map(|i| self.energies[i] + self.dissipation[i] - self.stay_energies[i])
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// One row per element and time: centre, mean displacement, and `Cp`
    /// (finite) or `z` (linear).
    pub fn write_fields_csv(&self, mesh: &BoxMesh, out: &mut impl Write) -> Result<()> {
        writeln!(out, "t,element,x,y,z,ux,uy,uz,xx,yy,zz,yz,xz,xy")?;
        let (sd, sl) = match self.kind {
            QuasiKind::Finite(s) => (s.displacement(), Some(s.plastic())),
            QuasiKind::Linear => (1.0, None),
        };
        for (t, state) in self.times.iter().zip(&self.states) {
            for e in 0..mesh.element_count() {
                let c = mesh.element_center(e);
                let mut u = [0.0; 3];
                for node in mesh.element_nodes(e) {
                    for d in 0..3 {
                        u[d] += 0.125 * sd * state.v[3 * node + d];
                    }
                }
                let s = match sl {
                    Some(sl) => *crate::tensor3::UnitDetSpd::from_log(&(state.w[e] * sl)).as_sym(),
                    None => state.w[e].to_sym(),
                };
                write!(out, "{t:.15e},{e},{:.6e},{:.6e},{:.6e}", c[0], c[1], c[2])?;
                for x in u.iter().chain(s.0.iter()) {
                    write!(out, ",{x:.15e}")?;
                }
                writeln!(out)?;
            }
        }
        Ok(())
    }

    pub fn write_steps_csv(&self, out: &mut impl Write) -> Result<()> {
        writeln!(out, "step,t,sweeps,energy,dissipation")?;
        let cumulative = self.cumulative_dissipation();
        for i in 0..self.times.len() {
            writeln!(
                out,
                "{i},{:.15e},{},{:.15e},{:.15e}",
                self.times[i], self.sweeps[i], self.energies[i], cumulative[i]
            )?;
        }
        Ok(())
    }
}

/// Finite-strain discrete system at one scaling.
pub struct QuasiSystem<'a> {
    pub mesh: &'a BoxMesh,
    pub model: &'a MaterialModel,
    pub spec: DissipationSpec,
    pub load: &'a QuasiLoad,
    pub scaling: Scaling,
    f_unit: Vec<f64>,
    /// `⟨ℓ, x⟩` per unit amplitude in the physical scaling, zero otherwise.
    reference_work: f64,
}

impl<'a> QuasiSystem<'a> {
    pub fn new(
        mesh: &'a BoxMesh,
        model: &'a MaterialModel,
        spec: DissipationSpec,
        load: &'a QuasiLoad,
        scaling: Scaling,
    ) -> Result<Self> {
        model.validate()?;
        if let Scaling::Rescaled(eps) = scaling {
            if !(eps > 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "ε = {eps} must be positive"
                )));
            }
        }
        let f_unit = mesh.load_vector(load.traction, load.body_force);
        let reference_work = match scaling {
            Scaling::Physical => (0..mesh.node_count())
                .map(|a| {
                    let x = mesh.node_coords(a);
                    (0..3).map(|d| f_unit[3 * a + d] * x[d]).sum::<f64>()
                })
                .sum(),
            Scaling::Rescaled(_) => 0.0,
        };
        Ok(QuasiSystem {
            mesh,
            model,
            spec,
            load,
            scaling,
            f_unit,
            reference_work,
        })
    }

    fn local_v(&self, e: usize, v: &[f64]) -> [f64; 24] {
        let mut out = [0.0; 24];
        for (a, node) in self.mesh.element_nodes(e).into_iter().enumerate() {
            out[3 * a..3 * a + 3].copy_from_slice(&v[3 * node..3 * node + 3]);
        }
        out
    }

    /// `(C - I, F)` at the Gauss points of an element.
    fn kinematics(&self, e: usize, local: &[f64; 24]) -> Result<[(SymTensor3, Tensor3); 8]> {
        let sd = self.scaling.displacement();
        let mut out = [(SymTensor3::ZERO, Tensor3::ZERO); 8];
        for (q, slot) in out.iter_mut().enumerate() {
            let mut h = Tensor3::ZERO;
            for a in 0..8 {
                for i in 0..3 {
                    for j in 0..3 {
                        h.0[i][j] += sd * local[3 * a + i] * self.mesh.grads[q][a][j];
                    }
                }
            }
            let f = Tensor3::identity() + h;
            if !(f.det() > 0.0) {
                return Err(Error::ElementInversion {
                    element: e,
                    gauss: q,
                });
            }
            let cm = (h + h.transpose() + h.transpose().matmul(&h)).sym();
            *slot = (cm, f);
        }
        Ok(out)
    }

    fn plastic_exp(&self, w: &[DevSym3]) -> Vec<SymTensor3> {
        let sl = self.scaling.plastic();
        w.iter()
            .map(|x| spectral(&(*x * sl).to_sym()).compose(f64::exp))
            .collect()
    }

    /// `α 𝒲(v, w)`; `+∞` outside the hardening constraint.
    pub fn stored_energy(&self, v: &[f64], w: &[DevSym3]) -> Result<f64> {
        let sl = self.scaling.plastic();
        let wj = self.mesh.gauss_weight();
        let mut total = 0.0;
        for e in 0..self.mesh.element_count() {
            let kin = self.kinematics(e, &self.local_v(e, v))?;
            let l = w[e] * sl;
            for (cm, _) in kin.iter() {
                total += wj * self.model.density_log(cm, &l)?;
            }
        }
        if self.model.gradient_coef > 0.0 {
            let p = self.plastic_exp(w);
            total += 0.5
                * self.model.gradient_coef
                * self
                    .mesh
                    .faces
                    .iter()
                    .map(|f| f.weight * (p[f.a] - p[f.b]).ddot(&(p[f.a] - p[f.b])))
                    .sum::<f64>();
        }
        Ok(self.scaling.energy() * total)
    }

    fn load_pairing(&self, v: &[f64]) -> f64 {
        self.f_unit.iter().zip(v).map(|(f, x)| f * x).sum::<f64>() + self.reference_work
    }

    pub fn energy(&self, state: &QuasiState, t: f64) -> Result<f64> {
        Ok(self.stored_energy(&state.v, &state.w)?
            - self.load.amplitude(t)? * self.load_pairing(&state.v))
    }

    pub fn dissipation(&self, w_prev: &[DevSym3], w: &[DevSym3]) -> f64 {
        let weight = self.spec.log_weight() * self.mesh.element_volume();
        w_prev
            .iter()
            .zip(w)
            .map(|(a, b)| weight * (*b - *a).norm())
            .sum()
    }

    /// `∫ ∂ₜℰ` over `[t0, t1]` at a frozen state.
    pub fn work(&self, state: &QuasiState, t0: f64, t1: f64) -> Result<f64> {
        Ok(-(self.load.amplitude(t1)? - self.load.amplitude(t0)?) * self.load_pairing(&state.v))
    }

    /// Derivative of `α 𝒲` in the element's displacement variables.
    fn element_force(&self, e: usize, local: &[f64; 24], l: &DevSym3) -> Result<[f64; 24]> {
        let kin = self.kinematics(e, local)?;
        let scale = self.scaling.energy() * self.scaling.displacement() * self.mesh.gauss_weight();
        let mut out = [0.0; 24];
        for (q, (cm, f)) in kin.iter().enumerate() {
            let pb = crate::material::pull_back(cm, l);
            let g = self.model.elastic.stress_strain(&pb.strain)?;
            let s = SymTensor3::sandwich(&pb.inv_sqrt, &g) * 2.0;
            let p = f.matmul(&s.to_tensor());
            for a in 0..8 {
                let grad = self.mesh.grads[q][a];
                for i in 0..3 {
                    out[3 * a + i] += scale * (0..3).map(|j| p.0[i][j] * grad[j]).sum::<f64>();
                }
            }
        }
        Ok(out)
    }

    fn residual_and_tangent(
        &self,
        v: &[f64],
        w: &[DevSym3],
        amp: f64,
    ) -> Result<(DVector<f64>, DMatrix<f64>)> {
        let n = self.mesh.free_dofs;
        let mut r = DVector::zeros(n);
        let mut k = DMatrix::zeros(n, n);
        let sl = self.scaling.plastic();
        for e in 0..self.mesh.element_count() {
            let nodes = self.mesh.element_nodes(e);
            let dofs: Vec<Option<usize>> = nodes
                .iter()
                .flat_map(|&node| (0..3).map(move |d| 3 * node + d))
                .map(|g| self.mesh.dof_map[g])
                .collect();
            let local = self.local_v(e, v);
            let l = w[e] * sl;
            let f0 = self.element_force(e, &local, &l)?;
            for (lj, dj) in dofs.iter().enumerate() {
                if let Some(i) = dj {
                    r[*i] += f0[lj];
                }
            }
            for (lb, db) in dofs.iter().enumerate() {
                let Some(col) = db else { continue };
                let step = 1e-6 * (1.0 + local[lb].abs());
                let mut plus = local;
                let mut minus = local;
                plus[lb] += step;
                minus[lb] -= step;
                let fp = self.element_force(e, &plus, &l)?;
                let fm = self.element_force(e, &minus, &l)?;
                for (la, da) in dofs.iter().enumerate() {
                    if let Some(row) = da {
                        k[(*row, *col)] += (fp[la] - fm[la]) / (2.0 * step);
                    }
                }
            }
        }
        for (g, slot) in self.mesh.dof_map.iter().enumerate() {
            if let Some(i) = slot {
                r[*i] -= amp * self.f_unit[g];
            }
        }
        let k = (&k + k.transpose()) * 0.5;
        Ok((r, k))
    }

    fn energy_or_inf(&self, v: &[f64], w: &[DevSym3], amp: f64) -> f64 {
        match self.stored_energy(v, w) {
            Ok(s) => s - amp * self.load_pairing(v),
            Err(_) => f64::INFINITY,
        }
    }

    /// Damped Newton in the displacement variables; never increases the energy.
    pub fn displacement_step(
        &self,
        v: &mut [f64],
        w: &[DevSym3],
        t: f64,
        opts: &QuasiOptions,
    ) -> Result<()> {
        let amp = self.load.amplitude(t)?;
        let mut current = self.energy_or_inf(v, w, amp);
        if !current.is_finite() {
            return Err(Error::NonFiniteEnergy);
        }
        for _ in 0..opts.newton_max {
            let (r, k) = self.residual_and_tangent(v, w, amp)?;
            let mut dir = solve_spd(k, &(-&r));
            let mut slope = r.dot(&dir);
            if !(slope < 0.0) {
                dir = -&r;
                slope = -r.dot(&r);
            }
            if -slope <= 1e-15 * (1.0 + current.abs()) {
                break;
            }
            let mut alpha = 1.0;
            let mut accepted = false;
            while alpha > 1e-10 {
                let mut trial = v.to_vec();
                for (g, slot) in self.mesh.dof_map.iter().enumerate() {
                    if let Some(i) = slot {
                        trial[g] += alpha * dir[*i];
                    }
                }
                let value = self.energy_or_inf(&trial, w, amp);
                if value <= current + 1e-4 * alpha * slope {
                    v.copy_from_slice(&trial);
                    current = value;
                    accepted = true;
                    break;
                }
                alpha *= 0.5;
            }
            if !accepted || -slope <= 1e-13 * (1.0 + current.abs()) {
                break;
            }
        }
        Ok(())
    }

    /// Red-black blockwise minimization in the plastic variables.
    pub fn plastic_step(
        &self,
        v: &[f64],
        w: &mut [DevSym3],
        w_prev: &[DevSym3],
        opts: &QuasiOptions,
        rng_label: u64,
    ) -> Result<()> {
        let sl = self.scaling.plastic();
        let weight = self.spec.log_weight() * self.mesh.element_volume();
        let mut rng = substream(opts.seed, rng_label);
        for color in 0..2 {
            let p = self.plastic_exp(w);
            for e in (0..self.mesh.element_count()).filter(|&e| self.mesh.color(e) == color) {
                let kin = self.kinematics(e, &self.local_v(e, v))?;
                let obj = ElementPlastic {
                    system: self,
                    cms: kin.map(|(cm, _)| cm),
                    neighbors: self.mesh.neighbors[e]
                        .iter()
                        .map(|&(b, k)| (p[b], k))
                        .collect(),
                    scale: sl,
                };
                w[e] = minimize(&obj, w_prev[e], weight, w[e], &opts.prox, &mut rng).x;
            }
        }
        Ok(())
    }

    /// Alternating minimization of `ℰ(·, t) + 𝒟(w_prev, ·)` from `start`.
    pub fn increment(
        &self,
        start: &QuasiState,
        w_prev: &[DevSym3],
        t: f64,
        opts: &QuasiOptions,
        step: usize,
    ) -> Result<IncrementReport> {
        let mut state = start.clone();
        let total = |s: &QuasiState| -> Result<f64> {
            Ok(self.energy(s, t)? + self.dissipation(w_prev, &s.w))
        };
        let mut current = total(&state)?;
        let mut violation: f64 = 0.0;
        let mut sweeps = 0;
        let mut converged = false;
        while sweeps < opts.max_sweeps {
            sweeps += 1;
            let before = current;
            self.displacement_step(&mut state.v, &state.w, t, opts)?;
            let mid = total(&state)?;
            self.plastic_step(
                &state.v,
                &mut state.w,
                w_prev,
                opts,
                (step as u64) << 8 | sweeps as u64,
            )?;
            let after = total(&state)?;
            violation = violation.max(mid - before).max(after - mid);
            current = after;
            if before - after < opts.tol * (1.0 + after.abs()) {
                converged = true;
                break;
            }
        }
        Ok(IncrementReport {
            state,
            sweeps,
            converged,
            monotone_violation: violation,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IncrementReport {
    pub state: QuasiState,
    pub sweeps: usize,
    pub converged: bool,
    pub monotone_violation: f64,
}

fn solve_spd(k: DMatrix<f64>, rhs: &DVector<f64>) -> DVector<f64> {
    let diag = k.diagonal().amax().max(1e-300);
    let mut shift = 0.0;
    for _ in 0..30 {
        let shifted = &k + DMatrix::identity(k.nrows(), k.ncols()) * shift;
        if let Some(ch) = shifted.cholesky() {
            return ch.solve(rhs);
        }
        shift = if shift == 0.0 {
            1e-10 * diag
        } else {
            shift * 10.0
        };
    }
    rhs.clone()
}

/// Smooth part of one element's plastic subproblem.
struct ElementPlastic<'s, 'a> {
    system: &'s QuasiSystem<'a>,
    cms: [SymTensor3; 8],
    neighbors: Vec<(SymTensor3, f64)>,
    scale: f64,
}

impl SmoothObjective for ElementPlastic<'_, '_> {
    fn value(&self, w: &DevSym3) -> f64 {
        let sys = self.system;
        let l = *w * self.scale;
        let wj = sys.mesh.gauss_weight();
        let mut total = 0.0;
        for cm in &self.cms {
            match sys.model.density_log(cm, &l) {
                Ok(v) => total += wj * v,
                Err(_) => return f64::INFINITY,
            }
        }
        if sys.model.gradient_coef > 0.0 {
            let p = spectral(&l.to_sym()).compose(f64::exp);
            total += 0.5
                * sys.model.gradient_coef
                * self
                    .neighbors
                    .iter()
                    .map(|(q, k)| k * (p - *q).ddot(&(p - *q)))
                    .sum::<f64>();
        }
        sys.scaling.energy() * total
    }

    fn gradient(&self, w: &DevSym3) -> DevSym3 {
        let sys = self.system;
        let l = *w * self.scale;
        let wj = sys.mesh.gauss_weight();
        let mut g = DevSym3::ZERO;
        for cm in &self.cms {
            match sys.model.density_log_gradient(cm, &l) {
                Ok(x) => g += x * wj,
                Err(_) => return DevSym3([f64::NAN; 5]),
            }
        }
        if sys.model.gradient_coef > 0.0 {
            let ls = l.to_sym();
            let p = spectral(&ls).compose(f64::exp);
            let mut pull = SymTensor3::ZERO;
            for (q, k) in &self.neighbors {
                pull += (p - *q) * *k;
            }
            g += DevSym3::from_sym(&exp_derivative(&ls, &pull)) * sys.model.gradient_coef;
        }
        g * (sys.scaling.energy() * self.scale)
    }
}

/// Runs `steps` increments from the undeformed, plastically virgin state.
pub fn quasistatic_solve(
    mesh: &BoxMesh,
    model: &MaterialModel,
    spec: &DissipationSpec,
    load: &QuasiLoad,
    steps: usize,
    scaling: Scaling,
    opts: &QuasiOptions,
) -> Result<QuasiTrajectory> {
    if steps == 0 {
        return Err(Error::InvalidParameter(
            "at least one step is required".into(),
        ));
    }
    let sys = QuasiSystem::new(mesh, model, *spec, load, scaling)?;
    let mut state = QuasiState::zero(mesh);
    let mut traj = QuasiTrajectory::start(
        QuasiKind::Finite(scaling),
        state.clone(),
        sys.energy(&state, 0.0)?,
    );
    for i in 1..=steps {
        let t0 = load.horizon * (i - 1) as f64 / steps as f64;
        let t = load.horizon * i as f64 / steps as f64;
        let report = sys.increment(&state, &state.w, t, opts, i)?;
        traj.stay_energies.push(sys.energy(&state, t)?);
        traj.dissipation
            .push(sys.dissipation(&state.w, &report.state.w));
        state = report.state;
        traj.times.push(t);
        traj.energies.push(sys.energy(&state, t)?);
        traj.work.push(sys.work(&state, t0, t)?);
        traj.sweeps.push(report.sweeps);
        traj.monotone_violation = traj.monotone_violation.max(report.monotone_violation);
        if !report.converged {
            traj.unconverged_steps.push(i);
        }
        traj.states.push(state.clone());
    }
    Ok(traj)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn element_force_matches_energy_differences() {
        let mesh = BoxMesh::unit_cube([1, 1, 1]).unwrap();
        let model = MaterialModel::default();
        let load = QuasiLoad::default();
        let sys = QuasiSystem::new(
            &mesh,
            &model,
            DissipationSpec::log_bound(0.2),
            &load,
            Scaling::Physical,
        )
        .unwrap();
        let mut state = QuasiState::zero(&mesh);
        for (k, x) in state.v.iter_mut().enumerate() {
            *x = 0.01 * ((k * 7 % 11) as f64 - 5.0);
        }
        state.w[0] = DevSym3([0.05, -0.02, 0.01, 0.0, 0.03]);
        let local = sys.local_v(0, &state.v);
        let force = sys.element_force(0, &local, &state.w[0]).unwrap();
        for k in [0usize, 7, 13, 23] {
            let h = 1e-6;
            let mut vp = state.v.clone();
            let mut vm = state.v.clone();
            let node = mesh.element_nodes(0)[k / 3];
            vp[3 * node + k % 3] += h;
            vm[3 * node + k % 3] -= h;
            let fd = (sys.stored_energy(&vp, &state.w).unwrap()
                - sys.stored_energy(&vm, &state.w).unwrap())
                / (2.0 * h);
            assert!((force[k] - fd).abs() < 1e-8, "dof {k}");
        }
    }

    #[test]
    fn element_plastic_gradient_matches_differences() {
        let mesh = BoxMesh::unit_cube([2, 1, 1]).unwrap();
        let model = MaterialModel {
            gradient_coef: 0.7,
            ..Default::default()
        };
        let load = QuasiLoad::default();
        let sys = QuasiSystem::new(
            &mesh,
            &model,
            DissipationSpec::log_bound(0.2),
            &load,
            Scaling::Rescaled(0.1),
        )
        .unwrap();
        let mut v = vec![0.0; 3 * mesh.node_count()];
        v.iter_mut()
            .enumerate()
            .for_each(|(k, x)| *x = 0.1 * ((k % 5) as f64 - 2.0));
        let kin = sys.kinematics(0, &sys.local_v(0, &v)).unwrap();
        let nb = spectral(&DevSym3([0.02, 0.01, 0.0, 0.0, 0.0]).to_sym()).compose(f64::exp);
        let obj = ElementPlastic {
            system: &sys,
            cms: kin.map(|(c, _)| c),
            neighbors: vec![(nb, 2.0)],
            scale: 0.2,
        };
        let w = DevSym3([0.3, -0.1, 0.2, 0.0, 0.1]);
        let g = obj.gradient(&w);
        for k in 0..5 {
            let h = 1e-6;
            let e = DevSym3::unit(k) * h;
            let fd = (obj.value(&(w + e)) - obj.value(&(w - e))) / (2.0 * h);
            assert!(
                (g.0[k] - fd).abs() < 1e-6 * (1.0 + fd.abs()),
                "{k}: {} vs {fd}",
                g.0[k]
            );
        }
    }
}
