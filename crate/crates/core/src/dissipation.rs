//! Plastic dissipation: the trace-constrained potential, its pull-backs to
//! the unit-determinant manifold, the logarithmic distance used by the
//! solvers and a path-based oracle that probes the Finsler infimum.

use serde::{Deserialize, Serialize};

use crate::quadrature::gauss_legendre;
use crate::tensor3::{spectral, DevSym3, SymTensor3, Tensor3, UnitDetSpd};

/// Traces below this magnitude count as zero.
pub const TRACE_TOL: f64 = 1e-9;

/// `(r/2)|A|` on trace-free `A`, `+∞` otherwise.
pub fn r_tilde(a: &Tensor3, r: f64) -> f64 {
    if a.trace().abs() <= TRACE_TOL {
        0.5 * r * a.norm()
    } else {
        f64::INFINITY
    }
}

/// `R̃(Cp⁻¹ Ċp)`.
pub fn r_hat(cp: &UnitDetSpd, cp_dot: &SymTensor3, r: f64) -> f64 {
    r_tilde(&cp.inverse().as_sym().matmul(cp_dot), r)
}

/// `R̃(Cp^{-1/2} Ċp Cp^{-1/2})`; agrees with [`r_hat`] when `Cp` and `Ċp`
/// commute and is never larger otherwise.
pub fn r_hat_symmetric(cp: &UnitDetSpd, cp_dot: &SymTensor3, r: f64) -> f64 {
    let half = cp.power(-0.5);
    r_tilde(&SymTensor3::sandwich(&half, cp_dot).to_tensor(), r)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PathOracleOptions {
    /// Interior knots of the piecewise-linear log path.
    #[serde(default = "default_knots")]
    pub knots: usize,
    /// Coordinate-descent sweeps.
    #[serde(default = "default_iterations")]
    pub iterations: usize,
}

fn default_knots() -> usize {
    2
}

fn default_iterations() -> usize {
    200
}

impl Default for PathOracleOptions {
    fn default() -> Self {
        PathOracleOptions {
            knots: default_knots(),
            iterations: default_iterations(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MetricMode {
    /// `(r/2)|log C1 - log C2|`, the distance the solvers use.
    LogBound,
    /// Optimized path cost; diagnostic only.
    PathOracle(PathOracleOptions),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DissipationSpec {
    pub radius: f64,
    #[serde(default = "log_bound")]
    pub mode: MetricMode,
    /// Multiplier on the distance; 1 except in negative-control runs.
    #[serde(default = "unit", skip_serializing_if = "is_unit")]
    pub scale: f64,
}

fn log_bound() -> MetricMode {
    MetricMode::LogBound
}

fn unit() -> f64 {
    1.0
}

fn is_unit(x: &f64) -> bool {
    *x == 1.0
}

impl DissipationSpec {
    pub fn log_bound(radius: f64) -> Self {
        DissipationSpec {
            radius,
            mode: MetricMode::LogBound,
            scale: 1.0,
        }
    }

    /// Coefficient of `|ΔL|` in the canonical distance.
    pub fn log_weight(&self) -> f64 {
        0.5 * self.scale * self.radius
    }
}

/// Canonical distance between two logarithms.
pub fn distance_log(l1: &DevSym3, l2: &DevSym3, spec: &DissipationSpec) -> f64 {
    spec.log_weight() * (*l1 - *l2).norm()
}

pub fn distance(c1: &UnitDetSpd, c2: &UnitDetSpd, spec: &DissipationSpec) -> f64 {
    match spec.mode {
        MetricMode::LogBound => distance_log(&c1.log(), &c2.log(), spec),
        MetricMode::PathOracle(opts) => spec.scale * path_oracle(c1, c2, spec.radius, &opts).cost,
    }
}

/// `2r(|C1| + |C2| + 6)`.
pub fn point_bound(c1: &UnitDetSpd, c2: &UnitDetSpd, r: f64) -> f64 {
    2.0 * r * (c1.norm() + c2.norm() + 6.0)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PathOracleResult {
    /// Cost of the best path found.
    pub cost: f64,
    /// Canonical log distance of the same endpoints.
    pub log_bound: f64,
    /// Cost of the straight log path, the search's starting point.
    pub straight_cost: f64,
    pub knots: Vec<DevSym3>,
}

impl PathOracleResult {
    /// Positive when the oracle found no path as cheap as the log distance.
    pub fn gap(&self) -> f64 {
        self.cost - self.log_bound
    }
}

/// `sinh(u)/u`.
fn sinhc(u: f64) -> f64 {
    if u.abs() < 1e-4 {
        1.0 + u * u / 6.0
    } else {
        u.sinh() / u
    }
}

/// `∫ R̂(C, Ċ) dt` along `C = exp(L)`, `L` linear from `a` to `b`, using
/// `R̂ = R̃(C^{-1/2} Ċ C^{-1/2})` and 16-point Gauss quadrature.
///
/// In the eigenbasis of `L`, `C^{-1/2} Dexp(L)[H] C^{-1/2}` scales `Hᵢⱼ` by
/// `sinhc((λᵢ-λⱼ)/2)`.
pub fn segment_cost(a: &DevSym3, b: &DevSym3, r: f64, rule: &[(f64, f64)]) -> f64 {
    let dir = (*b - *a).to_sym();
    rule.iter()
        .map(|&(s, w)| {
            let l = *a + (*b - *a) * s;
            let sp = spectral(&l.to_sym());
            let mut hh = sp.rotate_in(&dir);
            for i in 0..3 {
                for j in 0..3 {
                    hh.0[i][j] *= sinhc(0.5 * (sp.values[i] - sp.values[j]));
                }
            }
            w * 0.5 * r * hh.norm()
        })
        .sum()
}

pub fn path_cost(
    l1: &DevSym3,
    l2: &DevSym3,
    knots: &[DevSym3],
    r: f64,
    rule: &[(f64, f64)],
) -> f64 {
    let mut points = Vec::with_capacity(knots.len() + 2);
    points.push(*l1);
    points.extend_from_slice(knots);
    points.push(*l2);
    points
        .windows(2)
        .map(|w| segment_cost(&w[0], &w[1], r, rule))
        .sum()
}

/// Coordinate descent over the interior knots, started from the straight log
/// path. The step grows after an improving sweep and halves otherwise.
pub fn path_oracle(
    c1: &UnitDetSpd,
    c2: &UnitDetSpd,
    r: f64,
    opts: &PathOracleOptions,
) -> PathOracleResult {
    let rule = gauss_legendre(16);
    let (l1, l2) = (c1.log(), c2.log());
    let span = (l2 - l1).norm();
    let n = opts.knots;
    let mut points: Vec<DevSym3> = (0..=n + 1)
        .map(|k| l1 + (l2 - l1) * (k as f64 / (n + 1) as f64))
        .collect();
    // segments[k] joins points[k] and points[k + 1].
    let mut segments: Vec<f64> = points
        .windows(2)
        .map(|w| segment_cost(&w[0], &w[1], r, &rule))
        .collect();
    let straight_cost: f64 = segments.iter().sum();
    let mut step = 0.1 * span.max(1e-3);
    for _ in 0..opts.iterations {
        if step < 1e-10 * (1.0 + span) {
            break;
        }
        let mut improved = false;
        for k in 1..=n {
            for c in 0..5 {
                for sign in [1.0, -1.0] {
                    let mut trial = points[k];
                    trial.0[c] += sign * step;
                    let before = segments[k - 1] + segments[k];
                    let left = segment_cost(&points[k - 1], &trial, r, &rule);
                    let right = segment_cost(&trial, &points[k + 1], r, &rule);
                    if left + right < before {
                        points[k] = trial;
                        segments[k - 1] = left;
                        segments[k] = right;
                        improved = true;
                        break;
                    }
                }
            }
        }
        step *= if improved { 1.5 } else { 0.5 };
    }
    let cost = segments.iter().sum();
    let knots = points[1..=n].to_vec();
    PathOracleResult {
        cost,
        log_bound: 0.5 * r * span,
        straight_cost,
        knots,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampling::{commuting_logs, rng, unit_det_spd};
    use crate::tensor3::exp_derivative;

    #[test]
    fn potential_examples() {
        let a = Tensor3::diag([1.0, -1.0, 0.0]);
        assert!((r_tilde(&a, 2.0) - 2f64.sqrt()).abs() < 1e-15);
        assert!(r_tilde(&Tensor3::identity(), 2.0).is_infinite());
    }

    #[test]
    fn pull_backs_agree_on_commuting_pairs() {
        let mut g = rng(3);
        for _ in 0..100 {
            let (l, h) = commuting_logs(&mut g, 2.0);
            let cp = UnitDetSpd::from_log(&l);
            let dot = exp_derivative(&l.to_sym(), &h.to_sym());
            let a = r_hat(&cp, &dot, 0.7);
            let right = r_tilde(&dot.matmul(cp.inverse().as_sym()), 0.7);
            let sym = r_hat_symmetric(&cp, &dot, 0.7);
            assert!((a - right).abs() < 1e-10 && (a - sym).abs() < 1e-10);
            assert!((a - 0.35 * h.norm()).abs() < 1e-10);
        }
    }

    #[test]
    fn symmetric_pull_back_is_smallest() {
        let mut g = rng(4);
        for _ in 0..100 {
            let cp = unit_det_spd(&mut g, 2.0);
            let dot = exp_derivative(
                &cp.log().to_sym(),
                &crate::sampling::unit_dev(&mut g).to_sym(),
            );
            assert!(r_hat_symmetric(&cp, &dot, 1.0) <= r_hat(&cp, &dot, 1.0) + 1e-12);
        }
    }

    #[test]
    fn canonical_distance_example() {
        let c = UnitDetSpd::new(SymTensor3::diag([2.0, 1.0, 0.5])).unwrap();
        let d = distance(
            &c,
            &UnitDetSpd::identity(),
            &DissipationSpec::log_bound(1.0),
        );
        assert!((d - 0.490_129_071).abs() < 1e-8);
    }

    #[test]
    fn straight_path_is_exact_for_commuting_endpoints() {
        let mut g = rng(5);
        let rule = gauss_legendre(16);
        for _ in 0..20 {
            let (a, b) = commuting_logs(&mut g, 2.0);
            let cost = segment_cost(&a, &b, 1.3, &rule);
            assert!((cost - 0.65 * (a - b).norm()).abs() < 1e-12);
        }
    }

    #[test]
    fn segment_cost_matches_direct_quadrature() {
        // Independent route: symmetric pull-back of the finite-difference velocity.
        let mut g = rng(6);
        let a = crate::sampling::dev_in_ball(&mut g, 1.5);
        let b = crate::sampling::dev_in_ball(&mut g, 1.5);
        let rule = gauss_legendre(16);
        let direct: f64 = rule
            .iter()
            .map(|&(s, w)| {
                let at = |t: f64| UnitDetSpd::from_log(&(a + (b - a) * t));
                let h = 1e-5;
                let dot = (*at(s + h).as_sym() - *at(s - h).as_sym()) * (0.5 / h);
                w * r_hat_symmetric(&at(s), &dot, 1.0)
            })
            .sum();
        let cost = segment_cost(&a, &b, 1.0, &rule);
        assert!((cost - direct).abs() < 1e-7, "{cost} vs {direct}");
    }

    #[test]
    fn oracle_never_worse_than_straight_path() {
        let mut g = rng(7);
        let c1 = unit_det_spd(&mut g, 1.0);
        let c2 = unit_det_spd(&mut g, 1.0);
        let res = path_oracle(
            &c1,
            &c2,
            1.0,
            &PathOracleOptions {
                knots: 1,
                iterations: 40,
            },
        );
        assert!(res.cost <= res.straight_cost);
        assert!(res.cost >= res.log_bound - 1e-12);
    }

    #[test]
    fn point_bound_dominates() {
        let mut g = rng(8);
        for _ in 0..200 {
            let c1 = unit_det_spd(&mut g, 3.0);
            let c2 = unit_det_spd(&mut g, 3.0);
            let spec = DissipationSpec::log_bound(1.0);
            assert!(distance(&c1, &c2, &spec) <= point_bound(&c1, &c2, 1.0));
        }
    }
}
