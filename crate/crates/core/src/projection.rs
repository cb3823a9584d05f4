//! Norm-reducing projection onto `K = {|C| ≤ r}` along the flow
//! `Ċ = -(C - 3|C⁻¹|⁻² C⁻¹)`, which stays on the unit-determinant manifold
//! and drives `C` towards `I`.

use crate::error::{Error, Result};
use crate::tensor3::{SymTensor3, UnitDetSpd};

/// Base RK4 step.
pub const STEP: f64 = 1e-2;
/// Flow time after which [`project`] gives up.
pub const MAX_TIME: f64 = 200.0;
/// Tolerance of the hitting-time bisection.
pub const EVENT_TOL: f64 = 1e-10;

/// Right-hand side of the flow; `tr(C⁻¹ Ċ) = 0`.
pub fn flow_rhs(c: &SymTensor3) -> SymTensor3 {
    let inv = c.cofactor() * (1.0 / c.det());
    let n2 = inv.ddot(&inv);
    (*c - inv * (3.0 / n2)) * -1.0
}

fn rk4(c: &SymTensor3, h: f64) -> SymTensor3 {
    let k1 = flow_rhs(c);
    let k2 = flow_rhs(&(*c + k1 * (0.5 * h)));
    let k3 = flow_rhs(&(*c + k2 * (0.5 * h)));
    let k4 = flow_rhs(&(*c + k3 * h));
    let next = *c + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
    next * next.det().powf(-1.0 / 3.0)
}

fn finish(c: SymTensor3) -> Result<UnitDetSpd> {
    if !c.is_finite() {
        return Err(Error::IntegrationFailure(
            "flow left the finite range".into(),
        ));
    }
    UnitDetSpd::new(c)
}

/// `Φ_t(C)`.
pub fn flow(c0: &UnitDetSpd, t: f64) -> Result<UnitDetSpd> {
    if !(t >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "flow time {t} must be non-negative"
        )));
    }
    let mut c = *c0.as_sym();
    let mut elapsed = 0.0;
    while elapsed < t {
        let h = STEP.min(t - elapsed);
        c = rk4(&c, h);
        elapsed += h;
    }
    finish(c)
}

/// `Π(C) = Φ_{t*}(C)` with `t*` the first time `|Φ_t(C)| = r`; identity on `K`.
pub fn project(c: &UnitDetSpd, radius: f64) -> Result<UnitDetSpd> {
    if !(radius * radius > 3.0) {
        return Err(Error::InvalidParameter(format!(
            "projection radius {radius} must exceed √3"
        )));
    }
    if c.norm() <= radius {
        return Ok(*c);
    }
    let mut state = *c.as_sym();
    let mut elapsed = 0.0;
    loop {
        if elapsed > MAX_TIME {
            return Err(Error::MaxTimeExceeded);
        }
        let next = rk4(&state, STEP);
        if !next.is_finite() {
            return Err(Error::IntegrationFailure(
                "flow left the finite range".into(),
            ));
        }
        if next.norm() > radius {
            state = next;
            elapsed += STEP;
            continue;
        }
        let (mut lo, mut hi) = (0.0, STEP);
        while hi - lo > EVENT_TOL {
            let mid = 0.5 * (lo + hi);
            if rk4(&state, mid).norm() > radius {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        return finish(rk4(&state, hi));
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor3::DevSym3;

    #[test]
    fn identity_on_k() {
        let c = UnitDetSpd::from_log(&DevSym3([0.3, 0.0, 0.0, 0.0, 0.0]));
        assert_eq!(project(&c, 2.0).unwrap(), c);
    }

    #[test]
    fn hits_the_sphere() {
        let c = UnitDetSpd::new(SymTensor3::diag([4.0, 0.5, 0.5])).unwrap();
        let p = project(&c, 2.0).unwrap();
        assert!((p.norm() - 2.0).abs() < 1e-8);
        assert!((p.as_sym().det() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn flow_keeps_trace_constraint() {
        let c = UnitDetSpd::from_log(&DevSym3([1.0, -0.5, 0.3, 0.2, 0.1]));
        let rhs = flow_rhs(c.as_sym());
        assert!(c.inverse().as_sym().ddot(&rhs).abs() < 1e-12);
    }

    #[test]
    fn flow_fixes_identity() {
        assert!(flow_rhs(&SymTensor3::identity()).norm() < 1e-15);
    }
}
