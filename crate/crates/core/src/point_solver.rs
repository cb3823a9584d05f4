//! Time-incremental energetic scheme at a material point with prescribed
//! `C(t)`: each step minimizes `W(C(tᵢ), Cp) + D(Cp_{i-1}, Cp)` over the
//! unit-determinant manifold, parametrized by `L = log Cp`.

use std::io::Write;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dissipation::{distance_log, DissipationSpec};
use crate::error::{Error, Result};
use crate::load::LoadProgram;
use crate::material::{driving_force, pull_back, yield_value, MaterialModel};
use crate::prox::{criticality_defect, minimize, ProxOptions, SmoothObjective};
use crate::quadrature::gauss_legendre;
use crate::sampling::{substream, unit_dev};
use crate::tensor3::{DevSym3, SymTensor3, UnitDetSpd};

/// Smooth part of the incremental functional at fixed `C`.
pub struct PointObjective<'a> {
    pub model: &'a MaterialModel,
    pub c_minus_i: SymTensor3,
}

impl SmoothObjective for PointObjective<'_> {
    fn value(&self, l: &DevSym3) -> f64 {
        self.model
            .density_log(&self.c_minus_i, l)
            .unwrap_or(f64::INFINITY)
    }

    fn gradient(&self, l: &DevSym3) -> DevSym3 {
        self.model
            .density_log_gradient(&self.c_minus_i, l)
            .unwrap_or(DevSym3([f64::NAN; 5]))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PointSolverOptions {
    pub prox: ProxOptions,
    /// Competitors per step in the sampled stability margin; 0 disables it.
    pub stability_samples: usize,
    /// Directions per step in the criticality residual; 0 disables it.
    pub criticality_samples: usize,
    pub seed: u64,
}

impl Default for PointSolverOptions {
    fn default() -> Self {
        PointSolverOptions {
            prox: ProxOptions::default(),
            stability_samples: 32,
            criticality_samples: 8,
            seed: 0,
        }
    }
}

/// One incremental minimization in logarithmic coordinates.
pub fn incremental_step_log(
    l_prev: &DevSym3,
    c_minus_i: &SymTensor3,
    model: &MaterialModel,
    spec: &DissipationSpec,
    prox: &ProxOptions,
    rng: &mut impl Rng,
) -> Result<DevSym3> {
    let obj = PointObjective {
        model,
        c_minus_i: *c_minus_i,
    };
    if !obj.value(l_prev).is_finite() {
        return Err(Error::NonFiniteEnergy);
    }
    Ok(minimize(&obj, *l_prev, spec.log_weight(), *l_prev, prox, rng).x)
}

/// `argmin_Cp W(C, Cp) + D(Cp_prev, Cp)` with default options and seed.
pub fn incremental_step(
    cp_prev: &UnitDetSpd,
    c: &SymTensor3,
    model: &MaterialModel,
    spec: &DissipationSpec,
) -> Result<UnitDetSpd> {
    let l = incremental_step_log(
        &cp_prev.log(),
        &(*c - SymTensor3::identity()),
        model,
        spec,
        &ProxOptions::default(),
        &mut substream(0, 0),
    )?;
    Ok(UnitDetSpd::from_log(&l))
}

/// Smallest sampled value of `E(Ĉ) + D(Cp, Ĉ) - E(Cp)`; competitors are
/// random perturbations of `log Cp` at several scales and the critical
/// point of the smooth part.
pub fn stability_check_log(
    l: &DevSym3,
    c_minus_i: &SymTensor3,
    model: &MaterialModel,
    spec: &DissipationSpec,
    samples: usize,
    rng: &mut impl Rng,
) -> f64 {
    let obj = PointObjective {
        model,
        c_minus_i: *c_minus_i,
    };
    let base = obj.value(l);
    let weight = spec.log_weight();
    let margin = |cand: DevSym3| obj.value(&cand) + weight * (cand - *l).norm() - base;
    let scales = [1e-3, 1e-2, 1e-1, 1.0];
    let mut worst = f64::INFINITY;
    for k in 0..samples {
        let cand = *l + unit_dev(rng) * scales[k % scales.len()];
        worst = worst.min(margin(cand));
    }
    let critical = minimize(&obj, *l, 0.0, *l, &ProxOptions::lean(), rng).x;
    worst.min(margin(critical))
}

pub fn stability_check(
    cp: &UnitDetSpd,
    c: &SymTensor3,
    model: &MaterialModel,
    spec: &DissipationSpec,
    samples: usize,
    seed: u64,
) -> f64 {
    stability_check_log(
        &cp.log(),
        &(*c - SymTensor3::identity()),
        model,
        spec,
        samples,
        &mut substream(seed, 1),
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StateKind {
    /// `log Cp`; the CSV reports `Cp`.
    PlasticLog,
    /// Small-strain plastic strain `z`.
    Linear,
}

/// Discrete solution on a uniform partition. Index 0 is the initial state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub kind: StateKind,
    pub times: Vec<f64>,
    pub states: Vec<DevSym3>,
    /// `E(stateᵢ, tᵢ)`.
    pub energies: Vec<f64>,
    /// `E(state_{i-1}, tᵢ)`, the energy of staying put.
    pub stay_energies: Vec<f64>,
    /// Dissipation increments, zero at index 0.
    pub dissipation: Vec<f64>,
    /// `∫ ∂ₜE(stateᵢ, t) dt` over `(t_{i-1}, tᵢ)`, zero at index 0.
    pub work: Vec<f64>,
    /// Sampled stability margins.
    pub margins: Vec<f64>,
    /// Sampled criticality defects of each step's minimizer.
    pub residuals: Vec<f64>,
    pub warnings: Vec<String>,
}

impl Trajectory {
    pub fn new(kind: StateKind, t0: f64, state: DevSym3, energy: f64) -> Self {
        Trajectory {
            kind,
            times: vec![t0],
            states: vec![state],
            energies: vec![energy],
            stay_energies: vec![energy],
            dissipation: vec![0.0],
            work: vec![0.0],
            margins: vec![0.0],
            residuals: vec![0.0],
            warnings: Vec::new(),
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

    /// `E(T) + Diss - E(0) - ∫ ∂ₜE`; non-negative for stable states, `O(τ)`.
    pub fn balance_residual(&self) -> f64 {
        let n = self.steps();
        self.energies[n] + self.total_dissipation()
            - self.energies[0]
            - self.work.iter().sum::<f64>()
    }

    /// Largest `E(Cpᵢ, tᵢ) + dᵢ - E(Cp_{i-1}, tᵢ)`; never positive.
    pub fn step_inequality_violation(&self) -> f64 {
        (1..self.times.len())
            .map(|i| self.energies[i] + self.dissipation[i] - self.stay_energies[i])
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min_margin(&self) -> f64 {
        self.margins.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    pub fn plastic_state(&self, i: usize) -> UnitDetSpd {
        UnitDetSpd::from_log(&self.states[i])
    }

    /// Columns: `t`, six state components (`Cp` or `z`), energy, cumulative
    /// dissipation, stability margin, residual.
    pub fn write_csv(&self, out: &mut impl Write) -> Result<()> {
        writeln!(
            out,
            "t,xx,yy,zz,yz,xz,xy,energy,dissipation,margin,residual"
        )?;
        let cumulative = self.cumulative_dissipation();
        for i in 0..self.times.len() {
            let s = match self.kind {
                StateKind::PlasticLog => *self.plastic_state(i).as_sym(),
                StateKind::Linear => self.states[i].to_sym(),
            };
            write!(out, "{:.15e}", self.times[i])?;
            for v in s.0 {
                write!(out, ",{v:.15e}")?;
            }
            writeln!(
                out,
                ",{:.15e},{:.15e},{:.15e},{:.15e}",
                self.energies[i], cumulative[i], self.margins[i], self.residuals[i]
            )?;
        }
        Ok(())
    }
}

/// `∫ G(Ce) : Cp^{-1/2} Ċ Cp^{-1/2} dt` over `[a, b]` at fixed `L`.
fn power_integral(
    program: &LoadProgram,
    model: &MaterialModel,
    l: &DevSym3,
    a: f64,
    b: f64,
) -> Result<f64> {
    let mut total = 0.0;
    for (s, w) in gauss_legendre(4) {
        let t = a + (b - a) * s;
        let (e, de) = program.strain(t)?;
        let pb = pull_back(&(e * 2.0), l);
        let g = model.elastic.stress_strain(&pb.strain)?;
        total += w * (b - a) * g.ddot(&SymTensor3::sandwich(&pb.inv_sqrt, &(de * 2.0)));
    }
    Ok(total)
}

/// Runs `steps` increments of the program from `cp0`.
pub fn solve(
    cp0: &UnitDetSpd,
    program: &LoadProgram,
    steps: usize,
    model: &MaterialModel,
    spec: &DissipationSpec,
    opts: &PointSolverOptions,
) -> Result<Trajectory> {
    model.validate()?;
    program.validate()?;
    if steps == 0 {
        return Err(Error::InvalidParameter(
            "at least one step is required".into(),
        ));
    }
    let horizon = program.horizon();
    let l0 = cp0.log();
    let c0 = program.c_minus_identity(0.0)?;
    let e0 = model.density_log(&c0, &l0)?;
    if !e0.is_finite() {
        return Err(Error::NonFiniteEnergy);
    }
    let mut traj = Trajectory::new(StateKind::PlasticLog, 0.0, l0, e0);
    if opts.stability_samples > 0 {
        let m0 = stability_check_log(
            &l0,
            &c0,
            model,
            spec,
            opts.stability_samples,
            &mut substream(opts.seed, u64::MAX),
        );
        traj.margins[0] = m0;
        if m0 < -1e-6 * (1.0 + e0.abs()) {
            traj.warnings.push(format!(
                "initial state is not stable: sampled margin {m0:.3e}"
            ));
        }
    }
    let mut l_prev = l0;
    for i in 1..=steps {
        let t_prev = horizon * (i - 1) as f64 / steps as f64;
        let t = horizon * i as f64 / steps as f64;
        let cm = program.c_minus_identity(t)?;
        let mut rng = substream(opts.seed, i as u64);
        let l = incremental_step_log(&l_prev, &cm, model, spec, &opts.prox, &mut rng)?;
        let obj = PointObjective {
            model,
            c_minus_i: cm,
        };
        traj.times.push(t);
        traj.states.push(l);
        traj.energies.push(obj.value(&l));
        traj.stay_energies.push(obj.value(&l_prev));
        traj.dissipation.push(distance_log(&l_prev, &l, spec));
        traj.work
            .push(power_integral(program, model, &l, t_prev, t)?);
        traj.margins.push(if opts.stability_samples > 0 {
            stability_check_log(&l, &cm, model, spec, opts.stability_samples, &mut rng)
        } else {
            0.0
        });
        traj.residuals.push(if opts.criticality_samples > 0 {
            criticality_defect(
                &obj,
                l_prev,
                spec.log_weight(),
                l,
                opts.criticality_samples,
                &mut rng,
            )
        } else {
            0.0
        });
        l_prev = l;
    }
    Ok(traj)
}

/// Discrete flow-rule diagnostics of one step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FlowRuleEntry {
    pub t_mid: f64,
    pub plastic: bool,
    /// Sticking: `max(φ̂, 0)` at the end of the step. Plastic: `|φ̂|` at the midpoint.
    pub yield_defect: f64,
    /// Distance between the unit rate direction and the predicted direction
    /// `Cp^{1/2} dev(Cp^{1/2} T Cp^{1/2}) Cp^{1/2}`; zero when sticking.
    pub alignment_defect: f64,
    /// `|ż φ̂|` with `ż = |Cp^{-1/2} Ċp Cp^{-1/2}|/2`.
    pub complementarity: f64,
}

pub fn flow_rule_residual(
    traj: &Trajectory,
    program: &LoadProgram,
    model: &MaterialModel,
) -> Result<Vec<FlowRuleEntry>> {
    let r = model.yield_radius;
    let mut out = Vec::with_capacity(traj.steps());
    for i in 1..traj.times.len() {
        let (t0, t1) = (traj.times[i - 1], traj.times[i]);
        let tau = t1 - t0;
        let dl = traj.states[i] - traj.states[i - 1];
        let plastic = dl.norm() > 1e-12;
        if !plastic {
            let c = program.c_minus_identity(t1)? + SymTensor3::identity();
            let cp = traj.plastic_state(i);
            let phi = yield_value(&cp, &driving_force(&c, &cp, model)?, r);
            out.push(FlowRuleEntry {
                t_mid: 0.5 * (t0 + t1),
                plastic,
                yield_defect: phi.max(0.0),
                alignment_defect: 0.0,
                complementarity: 0.0,
            });
            continue;
        }
        let t_mid = 0.5 * (t0 + t1);
        let c = program.c_minus_identity(t_mid)? + SymTensor3::identity();
        let cp = UnitDetSpd::from_log(&((traj.states[i] + traj.states[i - 1]) * 0.5));
        let t = driving_force(&c, &cp, model)?;
        let phi = yield_value(&cp, &t, r);
        let rate =
            (*traj.plastic_state(i).as_sym() - *traj.plastic_state(i - 1).as_sym()) * (1.0 / tau);
        let p = cp.power(0.5);
        let predicted = SymTensor3::sandwich(&p, &SymTensor3::sandwich(&p, &t).dev());
        let unit = |s: SymTensor3| s * (1.0 / s.norm().max(1e-300));
        let alignment = (unit(rate) - unit(predicted)).norm();
        let zdot = 0.5 * SymTensor3::sandwich(&cp.power(-0.5), &rate).norm();
        out.push(FlowRuleEntry {
            t_mid,
            plastic,
            yield_defect: phi.abs(),
            alignment_defect: alignment,
            complementarity: (zdot * phi).abs(),
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor3::Tensor3;

    fn quick() -> PointSolverOptions {
        PointSolverOptions {
            prox: ProxOptions {
                random_starts: 2,
                ..Default::default()
            },
            stability_samples: 8,
            criticality_samples: 4,
            seed: 1,
        }
    }

    #[test]
    fn elastic_regime_sticks_exactly() {
        let m = MaterialModel::default();
        let spec = DissipationSpec::log_bound(m.yield_radius);
        let c = SymTensor3::identity() + DevSym3([0.02, 0.0, 0.0, 0.0, 0.0]).to_sym();
        let cp = incremental_step(&UnitDetSpd::identity(), &c, &m, &spec).unwrap();
        assert_eq!(cp, UnitDetSpd::identity());
    }

    #[test]
    fn beyond_yield_moves_and_lowers_energy() {
        let m = MaterialModel::default();
        let spec = DissipationSpec::log_bound(m.yield_radius);
        let c = SymTensor3::identity() + DevSym3([0.6, 0.0, 0.0, 0.0, 0.0]).to_sym();
        let cp = incremental_step(&UnitDetSpd::identity(), &c, &m, &spec).unwrap();
        assert!(cp.log().norm() > 1e-3);
        let e_new = crate::material::total_density(&c, &cp, &m).unwrap();
        let e_old = crate::material::total_density(&c, &UnitDetSpd::identity(), &m).unwrap();
        assert!(e_new + crate::dissipation::distance(&UnitDetSpd::identity(), &cp, &spec) < e_old);
    }

    #[test]
    fn rotation_invariance_of_step() {
        let m = MaterialModel::default();
        let spec = DissipationSpec::log_bound(m.yield_radius);
        let c = SymTensor3([1.3, 0.8, 1.0, 0.1, 0.0, 0.05]);
        let q = crate::sampling::rotation(&mut crate::sampling::rng(9));
        let rot = |s: &SymTensor3| q.matmul(&s.to_tensor()).matmul(&q.transpose()).sym();
        let cp = incremental_step(&UnitDetSpd::identity(), &c, &m, &spec).unwrap();
        let cp_rot = incremental_step(&UnitDetSpd::identity(), &rot(&c), &m, &spec).unwrap();
        assert!((rot(cp.as_sym()) - *cp_rot.as_sym()).norm() < 1e-8);
        let _ = Tensor3::identity();
    }

    #[test]
    fn trajectory_satisfies_discrete_inequalities() {
        let m = MaterialModel::default();
        let spec = DissipationSpec::log_bound(m.yield_radius);
        let traj = solve(
            &UnitDetSpd::identity(),
            &LoadProgram::default(),
            32,
            &m,
            &spec,
            &quick(),
        )
        .unwrap();
        assert!(traj.step_inequality_violation() <= 0.0);
        assert!(traj.total_dissipation() > 0.0);
        assert!(traj.min_margin() > -1e-8);
        assert!(traj.balance_residual() >= -1e-12);
        let flow = flow_rule_residual(&traj, &LoadProgram::default(), &m).unwrap();
        assert!(flow
            .iter()
            .filter(|f| !f.plastic)
            .all(|f| f.yield_defect < 1e-9));
    }

    #[test]
    fn csv_has_header_and_rows() {
        let m = MaterialModel::default();
        let spec = DissipationSpec::log_bound(m.yield_radius);
        let traj = solve(
            &UnitDetSpd::identity(),
            &LoadProgram::default(),
            4,
            &m,
            &spec,
            &quick(),
        )
        .unwrap();
        let mut buf = Vec::new();
        traj.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 6);
        assert!(text.starts_with("t,xx,yy,zz,yz,xz,xy,energy"));
    }
}
