//! Time-dependent strain programs `e(t) = (C(t) - I)/2` for the point model.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor3::{DevSym3, SymTensor3};

/// Natural cubic spline through `(x, y)`.
#[derive(Debug, Clone, PartialEq)]
pub struct CubicSpline {
    x: Vec<f64>,
    y: Vec<f64>,
    second: Vec<f64>,
}

impl CubicSpline {
    pub fn new(x: &[f64], y: &[f64]) -> Result<Self> {
        let n = x.len();
        if n < 2 || y.len() != n {
            return Err(Error::InvalidParameter(
                "spline needs at least two matching knots".into(),
            ));
        }
        if x.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidParameter(
                "spline knots must increase strictly".into(),
            ));
        }
        // Tridiagonal system for the second derivatives, natural ends.
        let mut second = vec![0.0; n];
        let mut u = vec![0.0; n];
        for i in 1..n - 1 {
            let sig = (x[i] - x[i - 1]) / (x[i + 1] - x[i - 1]);
            let p = sig * second[i - 1] + 2.0;
            second[i] = (sig - 1.0) / p;
            let dy = (y[i + 1] - y[i]) / (x[i + 1] - x[i]) - (y[i] - y[i - 1]) / (x[i] - x[i - 1]);
            u[i] = (6.0 * dy / (x[i + 1] - x[i - 1]) - sig * u[i - 1]) / p;
        }
        second[n - 1] = 0.0;
        for k in (0..n - 1).rev() {
            second[k] = second[k] * second[k + 1] + u[k];
        }
        Ok(CubicSpline {
            x: x.to_vec(),
            y: y.to_vec(),
            second,
        })
    }

    /// Value and derivative; constant extrapolation of the end slopes.
    pub fn eval(&self, t: f64) -> (f64, f64) {
        let n = self.x.len();
        let k = match self.x.iter().position(|&xi| xi > t) {
            Some(0) => 0,
            Some(i) => i - 1,
            None => n - 2,
        };
        let h = self.x[k + 1] - self.x[k];
        let a = (self.x[k + 1] - t) / h;
        let b = (t - self.x[k]) / h;
        let (m0, m1) = (self.second[k], self.second[k + 1]);
        let value = a * self.y[k]
            + b * self.y[k + 1]
            + ((a.powi(3) - a) * m0 + (b.powi(3) - b) * m1) * h * h / 6.0;
        let slope = (self.y[k + 1] - self.y[k]) / h - (3.0 * a * a - 1.0) / 6.0 * h * m0
            + (3.0 * b * b - 1.0) / 6.0 * h * m1;
        (value, slope)
    }
}

/// Scalar amplitude `β(t)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case", deny_unknown_fields)]
pub enum TimeShape {
    /// `amplitude · t / horizon`.
    Ramp { amplitude: f64 },
    /// `amplitude · sin(2π cycles t / horizon)`.
    Sine { amplitude: f64, cycles: f64 },
    /// Natural cubic spline through `(times, values)`.
    Spline { times: Vec<f64>, values: Vec<f64> },
}

impl TimeShape {
    pub fn eval(&self, t: f64, horizon: f64) -> Result<(f64, f64)> {
        Ok(match self {
            TimeShape::Ramp { amplitude } => (amplitude * t / horizon, amplitude / horizon),
            TimeShape::Sine { amplitude, cycles } => {
                let w = 2.0 * std::f64::consts::PI * cycles / horizon;
                (amplitude * (w * t).sin(), amplitude * w * (w * t).cos())
            }
            TimeShape::Spline { times, values } => CubicSpline::new(times, values)?.eval(t),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum LoadProgram {
    /// `e(t) = β(t) · direction`.
    Proportional {
        direction: SymTensor3,
        shape: TimeShape,
        horizon: f64,
    },
    /// Componentwise natural cubic spline through strain knots.
    Knots {
        times: Vec<f64>,
        values: Vec<SymTensor3>,
    },
}

impl Default for LoadProgram {
    /// Unit isochoric shear direction ramped to 0.2, yielding at mid-horizon
    /// for the default material.
    fn default() -> Self {
        LoadProgram::Proportional {
            direction: DevSym3([1.0, 0.0, 0.0, 0.0, 0.0]).to_sym(),
            shape: TimeShape::Ramp { amplitude: 0.2 },
            horizon: 1.0,
        }
    }
}

impl LoadProgram {
    pub fn horizon(&self) -> f64 {
        match self {
            LoadProgram::Proportional { horizon, .. } => *horizon,
            LoadProgram::Knots { times, .. } => times.last().copied().unwrap_or(0.0),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.horizon() > 0.0) {
            return Err(Error::InvalidParameter(
                "load horizon must be positive".into(),
            ));
        }
        self.strain(0.0).map(|_| ())
    }

    /// Strain `e(t)` and rate `ė(t)`.
    pub fn strain(&self, t: f64) -> Result<(SymTensor3, SymTensor3)> {
        match self {
            LoadProgram::Proportional {
                direction,
                shape,
                horizon,
            } => {
                let (b, db) = shape.eval(t, *horizon)?;
                Ok((*direction * b, *direction * db))
            }
            LoadProgram::Knots { times, values } => {
                if values.len() != times.len() {
                    return Err(Error::InvalidParameter(
                        "strain knots and times differ in length".into(),
                    ));
                }
                let mut e = [0.0; 6];
                let mut de = [0.0; 6];
                for c in 0..6 {
                    let ys: Vec<f64> = values.iter().map(|v| v.0[c]).collect();
                    (e[c], de[c]) = CubicSpline::new(times, &ys)?.eval(t);
                }
                Ok((SymTensor3(e), SymTensor3(de)))
            }
        }
    }

    /// `C(t) - I = 2 e(t)`.
    pub fn c_minus_identity(&self, t: f64) -> Result<SymTensor3> {
        Ok(self.strain(t)?.0 * 2.0)
    }
}
