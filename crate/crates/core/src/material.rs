//! Constitutive model: elastic density of `Ce = Cp^{-1/2} C Cp^{-1/2}`,
//! logarithmic hardening on `Cp`, stresses and the small-strain tensors.
//!
//! Energies are evaluated from `Ce - I` through its eigenvalues with
//! `log1p`/`expm1`, so densities of order `ε²` keep full relative precision.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor3::{
    exp_derivative_spectral, spectral, DevSym3, Spectral, SymTensor3, Tensor4MinorSym, UnitDetSpd,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ElasticFamily {
    NeoHookean,
    Ogden(OgdenParams),
}

/// `Σ aᵢ (tr Ce^{γᵢ/2} - 3) + Σ bⱼ (tr (cof Ce)^{δⱼ/2} - 3) + Γ(√det Ce) - Γ(1)`
/// with `Γ(s) = (b/2)(s-1)² - g ln s`, `g` fixed so the reference is stress-free.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OgdenParams {
    /// Pairs `(aᵢ, γᵢ)`.
    pub stretch_terms: Vec<(f64, f64)>,
    /// Pairs `(bⱼ, δⱼ)`.
    #[serde(default)]
    pub cofactor_terms: Vec<(f64, f64)>,
}

impl OgdenParams {
    fn log_coefficient(&self) -> f64 {
        self.stretch_terms.iter().map(|(a, g)| a * g).sum::<f64>()
            + 2.0 * self.cofactor_terms.iter().map(|(b, d)| b * d).sum::<f64>()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ElasticParams {
    /// Shear-like modulus; unused by the Ogden family.
    pub a: f64,
    /// Volumetric modulus.
    pub b: f64,
    #[serde(default = "neo_hookean")]
    pub family: ElasticFamily,
}

fn neo_hookean() -> ElasticFamily {
    ElasticFamily::NeoHookean
}

impl Default for ElasticParams {
    fn default() -> Self {
        ElasticParams {
            a: 1.0,
            b: 1.0,
            family: ElasticFamily::NeoHookean,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlasticParams {
    /// Hardening modulus in `(h/4)|log Cp|²`.
    pub h: f64,
    /// Radius of the admissible set `{|Cp| ≤ r, |Cp⁻¹| ≤ r}`; `None` is unconstrained.
    #[serde(default)]
    pub k_radius: Option<f64>,
}

impl Default for PlasticParams {
    fn default() -> Self {
        PlasticParams {
            h: 0.5,
            k_radius: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MaterialModel {
    #[serde(default)]
    pub elastic: ElasticParams,
    #[serde(default)]
    pub plastic: PlasticParams,
    #[serde(default = "default_yield_radius")]
    pub yield_radius: f64,
    /// Coefficient of the plastic-gradient term; the exponent is fixed at 2.
    #[serde(default)]
    pub gradient_coef: f64,
}

fn default_yield_radius() -> f64 {
    0.2
}

impl Default for MaterialModel {
    fn default() -> Self {
        MaterialModel {
            elastic: ElasticParams::default(),
            plastic: PlasticParams::default(),
            yield_radius: default_yield_radius(),
            gradient_coef: 0.0,
        }
    }
}

/// `x - log(1 + x)` without cancellation near zero.
fn x_minus_log1p(x: f64) -> f64 {
    if x.abs() < 1e-3 {
        let x2 = x * x;
        x2 * (0.5 - x / 3.0 + x2 / 4.0 - x2 * x / 5.0 + x2 * x2 / 6.0)
    } else {
        x - x.ln_1p()
    }
}

fn spectral_strain(x: &SymTensor3) -> Result<Spectral> {
    if !x.is_finite() {
        return Err(Error::NonSpd(f64::NAN));
    }
    let sp = spectral(x);
    if sp.values[2] <= -1.0 {
        return Err(Error::NonSpd(1.0 + sp.values[2]));
    }
    Ok(sp)
}

impl ElasticParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.b > 0.0) || !self.b.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "volumetric modulus b = {} must be positive",
                self.b
            )));
        }
        match &self.family {
            ElasticFamily::NeoHookean if !(self.a > 0.0) || !self.a.is_finite() => Err(
                Error::InvalidParameter(format!("shear modulus a = {} must be positive", self.a)),
            ),
            ElasticFamily::Ogden(o) if o.stretch_terms.is_empty() => Err(Error::InvalidParameter(
                "ogden family needs at least one stretch term".into(),
            )),
            _ => Ok(()),
        }
    }

    /// Elastic density as a function of `X = Ce - I`.
    pub fn energy_strain(&self, x: &SymTensor3) -> Result<f64> {
        let sp = spectral_strain(x)?;
        Ok(self.energy_eigen(sp.values))
    }

    fn energy_eigen(&self, x: [f64; 3]) -> f64 {
        let log_det: f64 = x.iter().map(|v| v.ln_1p()).sum();
        let j_minus_1 = (0.5 * log_det).exp_m1();
        match &self.family {
            ElasticFamily::NeoHookean => {
                0.5 * self.a * x.iter().map(|&v| x_minus_log1p(v)).sum::<f64>()
                    + 0.5 * self.b * j_minus_1 * j_minus_1
            }
            ElasticFamily::Ogden(o) => {
                let c = x.map(|v| 1.0 + v);
                let cof = [c[1] * c[2], c[0] * c[2], c[0] * c[1]];
                let stretch: f64 = o
                    .stretch_terms
                    .iter()
                    .map(|&(a, g)| a * (c.iter().map(|v| v.powf(0.5 * g)).sum::<f64>() - 3.0))
                    .sum();
                let cofac: f64 = o
                    .cofactor_terms
                    .iter()
                    .map(|&(b, d)| b * (cof.iter().map(|v| v.powf(0.5 * d)).sum::<f64>() - 3.0))
                    .sum();
                stretch + cofac + 0.5 * self.b * j_minus_1 * j_minus_1
                    - o.log_coefficient() * 0.5 * log_det
            }
        }
    }

    /// `∂Ŵe/∂Ce` as a function of `X = Ce - I`.
    pub fn stress_strain(&self, x: &SymTensor3) -> Result<SymTensor3> {
        let sp = spectral_strain(x)?;
        match &self.family {
            ElasticFamily::NeoHookean => {
                let log_det: f64 = sp.values.iter().map(|v| v.ln_1p()).sum();
                let jm1 = (0.5 * log_det).exp_m1();
                let vol = self.b * (1.0 + jm1) * jm1;
                Ok(sp.compose(|v| 0.5 * (self.a * v + vol) / (1.0 + v)))
            }
            ElasticFamily::Ogden(_) => {
                // Central differences in Mandel coordinates.
                let base = x.mandel();
                let mut grad = [0.0; 6];
                for (k, g) in grad.iter_mut().enumerate() {
                    let step = 1e-5 * (1.0 + base[k].abs());
                    let mut plus = base;
                    let mut minus = base;
                    plus[k] += step;
                    minus[k] -= step;
                    let fp = self.energy_strain(&SymTensor3::from_mandel(plus))?;
                    let fm = self.energy_strain(&SymTensor3::from_mandel(minus))?;
                    *g = (fp - fm) / (2.0 * step);
                }
                Ok(SymTensor3::from_mandel(grad))
            }
        }
    }
}

impl PlasticParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.h > 0.0) || !self.h.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "hardening modulus h = {} must be positive",
                self.h
            )));
        }
        if let Some(rk) = self.k_radius {
            if !(rk * rk > 3.0) {
                return Err(Error::InvalidParameter(format!(
                    "constraint radius {rk} must exceed √3"
                )));
            }
        }
        Ok(())
    }

    /// Hardening energy in logarithmic coordinates, `+∞` outside the admissible set.
    pub fn energy_log(&self, l: &DevSym3) -> f64 {
        if let Some(rk) = self.k_radius {
            let sp = spectral(&l.to_sym());
            let norm = |s: f64| {
                sp.values
                    .iter()
                    .map(|v| (2.0 * s * v).exp())
                    .sum::<f64>()
                    .sqrt()
            };
            if norm(1.0) > rk || norm(-1.0) > rk {
                return f64::INFINITY;
            }
        }
        0.25 * self.h * l.dot(l)
    }
}

/// `Cp^{-1/2}` and `Ce - I` for `Cp = exp L`, computed without cancellation.
#[derive(Debug, Clone, Copy)]
pub struct PullBack {
    pub log_spectral: Spectral,
    pub inv_sqrt: SymTensor3,
    pub strain: SymTensor3,
}

pub fn pull_back(c_minus_i: &SymTensor3, l: &DevSym3) -> PullBack {
    let log_spectral = spectral(&l.to_sym());
    let inv_sqrt = log_spectral.compose(|v| (-0.5 * v).exp());
    let shift = log_spectral.compose(|v| (-v).exp_m1());
    let strain = SymTensor3::sandwich(&inv_sqrt, c_minus_i) + shift;
    PullBack {
        log_spectral,
        inv_sqrt,
        strain,
    }
}

impl MaterialModel {
    pub fn validate(&self) -> Result<()> {
        self.elastic.validate()?;
        self.plastic.validate()?;
        if !(self.yield_radius > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "yield radius {} must be positive",
                self.yield_radius
            )));
        }
        if !(self.gradient_coef >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "gradient coefficient {} must be non-negative",
                self.gradient_coef
            )));
        }
        Ok(())
    }

    /// `W(C, exp L)` from `C - I`; `+∞` when the hardening constraint is violated.
    pub fn density_log(&self, c_minus_i: &SymTensor3, l: &DevSym3) -> Result<f64> {
        let plastic = self.plastic.energy_log(l);
        if plastic.is_infinite() {
            return Ok(f64::INFINITY);
        }
        let pb = pull_back(c_minus_i, l);
        Ok(self.elastic.energy_strain(&pb.strain)? + plastic)
    }

    /// Gradient of [`MaterialModel::density_log`] with respect to the deviatoric `L`
    /// (constraint ignored).
    pub fn density_log_gradient(&self, c_minus_i: &SymTensor3, l: &DevSym3) -> Result<DevSym3> {
        let pb = pull_back(c_minus_i, l);
        let g = self.elastic.stress_strain(&pb.strain)?;
        let c = *c_minus_i + SymTensor3::identity();
        let ceg = c
            .to_tensor()
            .matmul(&pb.inv_sqrt.to_tensor())
            .matmul(&g.to_tensor());
        let m = (ceg + ceg.transpose()).sym();
        let half = Spectral {
            values: pb.log_spectral.values.map(|v| -0.5 * v),
            vectors: pb.log_spectral.vectors,
        };
        let elastic = DevSym3::from_sym(&exp_derivative_spectral(&half, &m)) * -0.5;
        Ok(elastic + *l * (0.5 * self.plastic.h))
    }

    /// Small-strain shear modulus, Lamé modulus and hardening modulus when exact.
    pub fn isotropic_constants(&self) -> Option<(f64, f64, f64)> {
        match self.elastic.family {
            ElasticFamily::NeoHookean => {
                Some((self.elastic.a, self.elastic.b, 2.0 * self.plastic.h))
            }
            ElasticFamily::Ogden(_) => None,
        }
    }
}

pub fn elastic_energy(ce: &SymTensor3, p: &ElasticParams) -> Result<f64> {
    p.energy_strain(&(*ce - SymTensor3::identity()))
}

pub fn elastic_stress(ce: &SymTensor3, p: &ElasticParams) -> Result<SymTensor3> {
    p.stress_strain(&(*ce - SymTensor3::identity()))
}

pub fn plastic_energy(cp: &UnitDetSpd, p: &PlasticParams) -> f64 {
    p.energy_log(&cp.log())
}

/// `W(C, Cp) = Ŵe(Ce) + Ŵp(Cp)`, `+∞` outside the hardening constraint.
pub fn total_density(c: &SymTensor3, cp: &UnitDetSpd, m: &MaterialModel) -> Result<f64> {
    m.density_log(&(*c - SymTensor3::identity()), &cp.log())
}

/// `S = 2 Cp^{-1/2} ∂Ŵe(Ce) Cp^{-1/2}`.
pub fn pk2_stress(c: &SymTensor3, cp: &UnitDetSpd, m: &MaterialModel) -> Result<SymTensor3> {
    let pb = pull_back(&(*c - SymTensor3::identity()), &cp.log());
    let g = m.elastic.stress_strain(&pb.strain)?;
    Ok(SymTensor3::sandwich(&pb.inv_sqrt, &g) * 2.0)
}

/// `T = 2 P⁻¹ Ce ∂Ŵe(Ce) P⁻¹ - 2 ∂Ŵp(Cp)`, `P = Cp^{1/2}`.
pub fn driving_force(c: &SymTensor3, cp: &UnitDetSpd, m: &MaterialModel) -> Result<SymTensor3> {
    let pb = pull_back(&(*c - SymTensor3::identity()), &cp.log());
    let g = m.elastic.stress_strain(&pb.strain)?;
    let ce = pb.strain + SymTensor3::identity();
    let ceg = ce.matmul(&g).sym();
    let elastic = SymTensor3::sandwich(&pb.inv_sqrt, &ceg) * 2.0;
    Ok(elastic - hardening_gradient(cp, &m.plastic) * 2.0)
}

/// `∂Ŵp/∂Cp = (h/2) Cp⁻¹ log Cp`.
pub fn hardening_gradient(cp: &UnitDetSpd, p: &PlasticParams) -> SymTensor3 {
    spectral(cp.as_sym()).compose(|v| 0.5 * p.h * v.ln() / v)
}

/// `|dev(Cp^{1/2} T Cp^{1/2})| - r`.
pub fn yield_value(cp: &UnitDetSpd, t: &SymTensor3, r: f64) -> f64 {
    let p = cp.power(0.5);
    SymTensor3::sandwich(&p, t).dev().norm() - r
}

/// `(ℂ, ℍ) = (4 ∂²Ŵe(I), 4 ∂²Ŵp(I))` by Richardson-extrapolated second differences.
pub fn linearization_tensors(m: &MaterialModel) -> Result<(Tensor4MinorSym, Tensor4MinorSym)> {
    let elastic = |v: [f64; 6]| m.elastic.energy_strain(&SymTensor3::from_mandel(v));
    let plastic = |v: [f64; 6]| -> Result<f64> {
        let c = SymTensor3::from_mandel(v) + SymTensor3::identity();
        let sp = spectral(&c);
        if sp.values[2] <= 0.0 {
            return Err(Error::NonSpd(sp.values[2]));
        }
        let l = sp.compose(f64::ln);
        Ok(0.25 * m.plastic.h * l.ddot(&l))
    };
    Ok((hessian4(elastic)?, hessian4(plastic)?))
}

fn hessian4(f: impl Fn([f64; 6]) -> Result<f64>) -> Result<Tensor4MinorSym> {
    let second = |i: usize, j: usize, h: f64| -> Result<f64> {
        let eval = |si: f64, sj: f64| {
            let mut v = [0.0; 6];
            v[i] += si * h;
            v[j] += sj * h;
            f(v)
        };
        Ok(
            (eval(1.0, 1.0)? - eval(1.0, -1.0)? - eval(-1.0, 1.0)? + eval(-1.0, -1.0)?)
                / (4.0 * h * h),
        )
    };
    let mut out = [[0.0; 6]; 6];
    for i in 0..6 {
        for j in i..6 {
            let coarse = second(i, j, 2e-3)?;
            let fine = second(i, j, 1e-3)?;
            let value = 4.0 * (4.0 * fine - coarse) / 3.0;
            out[i][j] = value;
            out[j][i] = value;
        }
    }
    Ok(Tensor4MinorSym(out))
}
