//! Minimization of `g(x) + ρ|x - a|` over deviators: the incremental
//! problem shared by the point solver, the quasistatic plastic step and the
//! small-strain return map.
//!
//! Proximal Newton: each model problem `½wᵀHw + cᵀw + ρ|w|` is solved exactly
//! through the secular equation in the eigenbasis of `H`.

use nalgebra::{SMatrix, SVector, SymmetricEigen};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::sampling::dev_in_ball;
use crate::tensor3::DevSym3;

pub type Mat5 = SMatrix<f64, 5, 5>;
type Vec5 = SVector<f64, 5>;

pub trait SmoothObjective {
    /// May be `+∞` outside the admissible set.
    fn value(&self, x: &DevSym3) -> f64;
    fn gradient(&self, x: &DevSym3) -> DevSym3;
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProxOptions {
    pub max_iter: usize,
    /// Random perturbations of the incumbent tried as extra starts.
    pub random_starts: usize,
    /// Radius floor for the random starts.
    pub start_radius: f64,
    /// Add the minimizer of the smooth part as a start.
    pub smooth_guess: bool,
    /// Compass search around the result before accepting it.
    pub pattern_check: bool,
    pub fd_step: f64,
}

impl Default for ProxOptions {
    fn default() -> Self {
        ProxOptions {
            max_iter: 60,
            random_starts: 8,
            start_radius: 0.05,
            smooth_guess: true,
            pattern_check: true,
            fd_step: 1e-6,
        }
    }
}

impl ProxOptions {
    /// Single start, no verification; for inner loops of block schemes.
    pub fn lean() -> Self {
        ProxOptions {
            random_starts: 0,
            smooth_guess: false,
            pattern_check: false,
            ..Default::default()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProxOutcome {
    pub x: DevSym3,
    pub value: f64,
    pub iterations: usize,
}

fn to_vec(x: &DevSym3) -> Vec5 {
    Vec5::from_column_slice(&x.0)
}

fn to_dev(v: &Vec5) -> DevSym3 {
    DevSym3([v[0], v[1], v[2], v[3], v[4]])
}

/// `argmin ½wᵀHw + cᵀw + ρ|w|` for symmetric `H`; eigenvalues are floored
/// at a small positive fraction of the largest.
pub fn solve_quadratic_prox(h: &Mat5, c: &DevSym3, rho: f64) -> DevSym3 {
    let cn = c.norm();
    if cn <= rho {
        return DevSym3::ZERO;
    }
    let eig = SymmetricEigen::new(*h);
    let top = eig
        .eigenvalues
        .iter()
        .fold(0.0f64, |m, v| m.max(v.abs()))
        .max(1e-300);
    let lam: Vec<f64> = eig
        .eigenvalues
        .iter()
        .map(|&v| v.max(1e-12 * top))
        .collect();
    let chat = eig.eigenvectors.transpose() * to_vec(c);
    let excess = |s: f64| {
        chat.iter()
            .zip(&lam)
            .map(|(ci, li)| (ci / (s * li + rho)).powi(2))
            .sum::<f64>()
            - 1.0
    };
    if rho == 0.0 {
        let w = Vec5::from_iterator(chat.iter().zip(&lam).map(|(ci, li)| -ci / li));
        return to_dev(&(eig.eigenvectors * w));
    }
    let lam_min = lam.iter().cloned().fold(f64::INFINITY, f64::min);
    let (mut lo, mut hi) = (0.0, (cn - rho) / lam_min);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if excess(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let s = 0.5 * (lo + hi);
    let w = Vec5::from_iterator(
        chat.iter()
            .zip(&lam)
            .map(|(ci, li)| -ci * s / (s * li + rho)),
    );
    to_dev(&(eig.eigenvectors * w))
}

struct Problem<'a, F: SmoothObjective> {
    smooth: &'a F,
    anchor: DevSym3,
    weight: f64,
    opts: ProxOptions,
}

impl<F: SmoothObjective> Problem<'_, F> {
    fn value(&self, x: &DevSym3) -> f64 {
        let v = self.smooth.value(x);
        if self.weight == 0.0 {
            v
        } else {
            v + self.weight * (*x - self.anchor).norm()
        }
    }

    fn hessian(&self, x: &DevSym3) -> Mat5 {
        let step = self.opts.fd_step * (1.0 + x.norm());
        let mut h = Mat5::zeros();
        for k in 0..5 {
            let e = DevSym3::unit(k) * step;
            let gp = self.smooth.gradient(&(*x + e));
            let gm = self.smooth.gradient(&(*x - e));
            for i in 0..5 {
                h[(i, k)] = (gp.0[i] - gm.0[i]) / (2.0 * step);
            }
        }
        if h.iter().any(|v| !v.is_finite()) {
            return Mat5::identity();
        }
        (h + h.transpose()) * 0.5
    }

    fn polish(&self, start: DevSym3) -> ProxOutcome {
        let mut x = start;
        let mut fx = self.value(&x);
        let mut iterations = 0;
        if !fx.is_finite() {
            return ProxOutcome {
                x,
                value: fx,
                iterations,
            };
        }
        for _ in 0..self.opts.max_iter {
            iterations += 1;
            let q = self.smooth.gradient(&x);
            if !q.is_finite() {
                break;
            }
            let h = self.hessian(&x);
            let v = x - self.anchor;
            let c = q - to_dev(&(h * to_vec(&v)));
            let w = solve_quadratic_prox(&h, &c, self.weight);
            let d = (self.anchor + w) - x;
            if d.norm() <= 1e-15 * (1.0 + x.norm()) {
                break;
            }
            let predicted = q.dot(&d) + self.weight * (w.norm() - v.norm());
            if predicted >= 0.0 {
                break;
            }
            let mut alpha = 1.0;
            let mut accepted = None;
            while alpha > 1e-12 {
                let trial = if alpha == 1.0 {
                    self.anchor + w
                } else {
                    x + d * alpha
                };
                let ft = self.value(&trial);
                if ft <= fx + 1e-4 * alpha * predicted {
                    accepted = Some((trial, ft));
                    break;
                }
                alpha *= 0.5;
            }
            let Some((trial, ft)) = accepted else { break };
            let moved = (trial - x).norm();
            let gain = fx - ft;
            x = trial;
            fx = ft;
            if moved <= 1e-14 * (1.0 + x.norm()) || gain <= 1e-17 * (1.0 + fx.abs()) {
                break;
            }
        }
        ProxOutcome {
            x,
            value: fx,
            iterations,
        }
    }

    /// Compass search with halving steps; returns whether it moved.
    fn pattern(&self, best: &mut ProxOutcome, initial: f64) -> bool {
        let mut step = initial;
        let mut moved = false;
        while step > 1e-10 * (1.0 + best.x.norm()) {
            let mut improved = false;
            let toward = self.anchor - best.x;
            let mut dirs: Vec<DevSym3> = (0..5)
                .flat_map(|k| [DevSym3::unit(k), -DevSym3::unit(k)])
                .collect();
            if toward.norm() > 0.0 {
                dirs.push(toward * (1.0 / toward.norm()));
            }
            for dir in dirs {
                let trial = best.x + dir * step;
                let ft = self.value(&trial);
                if ft < best.value - 1e-15 * (1.0 + best.value.abs()) {
                    best.x = trial;
                    best.value = ft;
                    improved = true;
                    moved = true;
                }
            }
            if !improved {
                step *= 0.5;
            }
        }
        moved
    }
}

/// Minimizes `smooth(x) + weight·|x - anchor|` starting from `incumbent`.
/// The result is never worse than the incumbent.
pub fn minimize<F: SmoothObjective>(
    smooth: &F,
    anchor: DevSym3,
    weight: f64,
    incumbent: DevSym3,
    opts: &ProxOptions,
    rng: &mut impl Rng,
) -> ProxOutcome {
    let problem = Problem {
        smooth,
        anchor,
        weight,
        opts: *opts,
    };
    let f_inc = problem.value(&incumbent);
    let mut best = problem.polish(incumbent);
    let mut starts = Vec::new();
    let mut radius = opts.start_radius;
    if opts.smooth_guess {
        let smooth_only = Problem {
            smooth,
            anchor,
            weight: 0.0,
            opts: *opts,
        };
        let guess = smooth_only.polish(incumbent).x;
        radius = radius.max((guess - incumbent).norm());
        starts.push(guess);
    }
    for _ in 0..opts.random_starts {
        starts.push(incumbent + dev_in_ball(rng, radius));
    }
    for s in starts {
        let out = problem.polish(s);
        if out.value < best.value {
            best = out;
        }
    }
    if opts.pattern_check
        && best.value.is_finite()
        && problem.pattern(&mut best, 1e-3 * (1.0 + radius))
    {
        let again = problem.polish(best.x);
        if again.value <= best.value {
            best = again;
        }
    }
    if !(best.value <= f_inc) {
        return ProxOutcome {
            x: incumbent,
            value: f_inc,
            iterations: best.iterations,
        };
    }
    best
}

/// Largest relative decrease of the objective found along sampled
/// directions and steps; near zero at a local minimizer.
pub fn criticality_defect<F: SmoothObjective>(
    smooth: &F,
    anchor: DevSym3,
    weight: f64,
    x: DevSym3,
    samples: usize,
    rng: &mut impl Rng,
) -> f64 {
    let problem = Problem {
        smooth,
        anchor,
        weight,
        opts: ProxOptions::default(),
    };
    let fx = problem.value(&x);
    let mut worst: f64 = 0.0;
    for _ in 0..samples {
        let dir = crate::sampling::unit_dev(rng);
        for h in [1e-3, 1e-5] {
            let drop = (fx - problem.value(&(x + dir * h))) / (1.0 + fx.abs());
            worst = worst.max(drop);
        }
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampling::rng;

    struct Quadratic {
        h: Mat5,
        c: DevSym3,
    }

    impl SmoothObjective for Quadratic {
        fn value(&self, x: &DevSym3) -> f64 {
            let v = to_vec(x);
            0.5 * (v.transpose() * self.h * v)[0] + self.c.dot(x)
        }
        fn gradient(&self, x: &DevSym3) -> DevSym3 {
            to_dev(&(self.h * to_vec(x))) + self.c
        }
    }

    fn spd(seed: u64) -> Mat5 {
        let mut g = rng(seed);
        let a = Mat5::from_fn(|_, _| g.gen::<f64>() - 0.5);
        a * a.transpose() + Mat5::identity() * 0.3
    }

    #[test]
    fn quadratic_prox_satisfies_optimality() {
        let h = spd(1);
        let c = DevSym3([1.0, -0.5, 0.3, 0.2, 0.9]);
        let rho = 0.4;
        let w = solve_quadratic_prox(&h, &c, rho);
        let residual = to_dev(&(h * to_vec(&w))) + c + w * (rho / w.norm());
        assert!(residual.norm() < 1e-12);
    }

    #[test]
    fn quadratic_prox_sticks_inside_ball() {
        let w = solve_quadratic_prox(&spd(2), &DevSym3([0.1, 0.0, 0.0, 0.0, 0.0]), 0.2);
        assert_eq!(w, DevSym3::ZERO);
    }

    #[test]
    fn minimize_matches_exact_quadratic_solution() {
        let q = Quadratic {
            h: spd(3),
            c: DevSym3([0.5, 0.1, -0.7, 0.2, 0.0]),
        };
        let anchor = DevSym3([0.2, 0.0, 0.1, -0.1, 0.3]);
        let rho = 0.3;
        let exact = anchor + solve_quadratic_prox(&q.h, &(q.gradient(&anchor)), rho);
        let out = minimize(
            &q,
            anchor,
            rho,
            anchor,
            &ProxOptions::default(),
            &mut rng(0),
        );
        assert!((out.x - exact).norm() < 1e-9);
    }

    #[test]
    fn incumbent_is_never_beaten_by_worse_points() {
        let q = Quadratic {
            h: spd(4),
            c: DevSym3::ZERO,
        };
        let out = minimize(
            &q,
            DevSym3::ZERO,
            0.1,
            DevSym3::ZERO,
            &ProxOptions::default(),
            &mut rng(0),
        );
        assert_eq!(out.x, DevSym3::ZERO);
    }
}
