//! Test-side oracles. None of them calls the library routine it is used to check.
#![allow(dead_code)]

use cpflow::quasistatic::BoxMesh;
use cpflow::tensor3::{DevSym3, SymTensor3};
use nalgebra::{DMatrix, DVector, Matrix3, SymmetricEigen};

pub fn to_mat(s: &SymTensor3) -> Matrix3<f64> {
    Matrix3::from_fn(|i, j| s.get(i, j))
}

/// `exp` by scaling and squaring of a truncated Taylor series.
pub fn taylor_exp(x: &Matrix3<f64>) -> Matrix3<f64> {
    let norm = x.norm();
    let squarings = if norm > 0.5 {
        (norm / 0.5).log2().ceil() as u32
    } else {
        0
    };
    let a = x / 2f64.powi(squarings as i32);
    let mut term = Matrix3::identity();
    let mut sum = Matrix3::identity();
    for k in 1..=20 {
        term = term * a / k as f64;
        sum += term;
    }
    for _ in 0..squarings {
        sum = sum * sum;
    }
    sum
}

/// `log` of an SPD matrix through nalgebra's symmetric eigensolver.
pub fn eigen_log(c: &Matrix3<f64>) -> Matrix3<f64> {
    let eig = SymmetricEigen::new(*c);
    let logs = eig.eigenvalues.map(f64::ln);
    eig.eigenvectors * Matrix3::from_diagonal(&logs) * eig.eigenvectors.transpose()
}

fn dev(m: &Matrix3<f64>) -> Matrix3<f64> {
    m - Matrix3::identity() * (m.trace() / 3.0)
}

/// Isotropic small-strain step `μ|e - z|² + (λ/2)(tr(e - z))² + (η/2)|z|² + ρ|z - z_prev|`
/// over trace-free symmetric `z`, minimized by accelerated proximal gradient.
pub struct LinearStep {
    pub e: Matrix3<f64>,
    pub z_prev: Matrix3<f64>,
    pub shear: f64,
    pub lame: f64,
    pub hardening: f64,
    pub rho: f64,
}

impl LinearStep {
    pub fn smooth_gradient(&self, z: &Matrix3<f64>) -> Matrix3<f64> {
        let diff = self.e - z;
        let full = -diff * (2.0 * self.shear) - Matrix3::identity() * (self.lame * diff.trace())
            + z * self.hardening;
        dev(&full)
    }

    pub fn objective(&self, z: &Matrix3<f64>) -> f64 {
        let diff = self.e - z;
        self.shear * diff.norm_squared()
            + 0.5 * self.lame * diff.trace().powi(2)
            + 0.5 * self.hardening * z.norm_squared()
            + self.rho * (z - self.z_prev).norm()
    }

    /// FISTA with a deliberately loose Lipschitz bound.
    pub fn brute_force(&self) -> Matrix3<f64> {
        let lip = 2.0 * self.shear + 3.0 * self.lame + self.hardening;
        let step = 1.0 / lip;
        let prox = |y: Matrix3<f64>| {
            let d = y - self.z_prev;
            let n = d.norm();
            if n <= step * self.rho {
                self.z_prev
            } else {
                self.z_prev + d * ((n - step * self.rho) / n)
            }
        };
        let mut x = self.z_prev;
        let mut y = x;
        let mut t = 1.0f64;
        for _ in 0..20000 {
            let next = prox(y - self.smooth_gradient(&y) * step);
            let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
            y = next + (next - x) * ((t - 1.0) / t_next);
            let moved = (next - x).norm();
            x = next;
            t = t_next;
            if moved <= 1e-16 {
                break;
            }
        }
        x
    }

    /// Distance of `0` from `∇f(z) + ρ ∂|z - z_prev|`.
    pub fn residual(&self, z: &Matrix3<f64>) -> f64 {
        let g = self.smooth_gradient(z);
        let d = z - self.z_prev;
        if d.norm() > 0.0 {
            (g + d * (self.rho / d.norm())).norm()
        } else {
            (g.norm() - self.rho).max(0.0)
        }
    }
}

pub fn dev_to_mat(z: &DevSym3) -> Matrix3<f64> {
    to_mat(&z.to_sym())
}

/// Compressible neo-Hookean `(a/2)(|F|² - 3 - 2 ln J) + (b/2)(J - 1)²`.
pub fn neo_hookean(f: &Matrix3<f64>, a: f64, b: f64) -> f64 {
    let j = f.determinant();
    if j <= 0.0 {
        return f64::INFINITY;
    }
    0.5 * a * (f.norm_squared() - 3.0 - 2.0 * j.ln()) + 0.5 * b * (j - 1.0).powi(2)
}

/// Purely elastic equilibrium of the unit cube clamped on `x = 0` under a
/// uniform traction on `x = 1`, on its own trilinear grid.
pub struct ElasticCube {
    pub n: usize,
    pub a: f64,
    pub b: f64,
    pub traction: [f64; 3],
    /// Free unknown index of each grid dof, `None` when clamped.
    free: Vec<Option<usize>>,
    pub unknowns: usize,
}

impl ElasticCube {
    pub fn new(n: usize, a: f64, b: f64, traction: [f64; 3]) -> Self {
        let nodes = (n + 1).pow(3);
        let mut free = Vec::with_capacity(3 * nodes);
        let mut next = 0;
        for node in 0..nodes {
            let i = node % (n + 1);
            for _ in 0..3 {
                free.push((i > 0).then(|| {
                    next += 1;
                    next - 1
                }));
            }
        }
        ElasticCube {
            n,
            a,
            b,
            traction,
            free,
            unknowns: next,
        }
    }

    fn node(&self, i: usize, j: usize, k: usize) -> usize {
        i + (self.n + 1) * (j + (self.n + 1) * k)
    }

    fn grid_field(&self, x: &DVector<f64>) -> Vec<f64> {
        self.free
            .iter()
            .map(|slot| slot.map_or(0.0, |s| x[s]))
            .collect()
    }

    pub fn energy(&self, x: &DVector<f64>, amplitude: f64) -> f64 {
        let u = self.grid_field(x);
        let h = 1.0 / self.n as f64;
        let g = 1.0 / 3f64.sqrt();
        let mut total = 0.0;
        for k in 0..self.n {
            for j in 0..self.n {
                for i in 0..self.n {
                    for gp in 0..8 {
                        let xi = [
                            if gp & 1 == 0 { -g } else { g },
                            if gp & 2 == 0 { -g } else { g },
                            if gp & 4 == 0 { -g } else { g },
                        ];
                        let mut f = Matrix3::identity();
                        for corner in 0..8 {
                            let s = [
                                if corner & 1 == 0 { -1.0 } else { 1.0 },
                                if corner & 2 == 0 { -1.0 } else { 1.0 },
                                if corner & 4 == 0 { -1.0 } else { 1.0 },
                            ];
                            let node = self.node(
                                i + (corner & 1),
                                j + ((corner >> 1) & 1),
                                k + ((corner >> 2) & 1),
                            );
                            let factor = [0, 1, 2].map(|d| 1.0 + s[d] * xi[d]);
                            for d in 0..3 {
                                let (d1, d2) = ((d + 1) % 3, (d + 2) % 3);
                                let dn = 0.125 * s[d] * factor[d1] * factor[d2] * 2.0 / h;
                                for c in 0..3 {
                                    f[(c, d)] += u[3 * node + c] * dn;
                                }
                            }
                        }
                        total += h * h * h / 8.0 * neo_hookean(&f, self.a, self.b);
                    }
                }
            }
        }
        let area = h * h;
        let mut work = 0.0;
        for k in 0..self.n {
            for j in 0..self.n {
                for (dj, dk) in [(0, 0), (1, 0), (0, 1), (1, 1)] {
                    let node = self.node(self.n, j + dj, k + dk);
                    for c in 0..3 {
                        work += self.traction[c] * area / 4.0 * u[3 * node + c];
                    }
                }
            }
        }
        total - amplitude * work
    }

    /// Fourth-order central differences of the energy.
    pub fn gradient(&self, x: &DVector<f64>, amplitude: f64) -> DVector<f64> {
        let h = 1e-3;
        let mut g = DVector::zeros(self.unknowns);
        let mut y = x.clone();
        for i in 0..self.unknowns {
            let base = x[i];
            let mut at = |s: f64| {
                y[i] = base + s * h;
                self.energy(&y, amplitude)
            };
            let (p1, m1, p2, m2) = (at(1.0), at(-1.0), at(2.0), at(-2.0));
            y[i] = base;
            g[i] = (8.0 * (p1 - m1) - (p2 - m2)) / (12.0 * h);
        }
        g
    }

    fn hessian(&self, x: &DVector<f64>, amplitude: f64) -> DMatrix<f64> {
        let h = 1e-4;
        let mut hess = DMatrix::zeros(self.unknowns, self.unknowns);
        let mut y = x.clone();
        for i in 0..self.unknowns {
            y[i] = x[i] + h;
            let gp = self.gradient(&y, amplitude);
            y[i] = x[i] - h;
            let gm = self.gradient(&y, amplitude);
            y[i] = x[i];
            hess.set_column(i, &((gp - gm) / (2.0 * h)));
        }
        (&hess + hess.transpose()) * 0.5
    }

    /// Newton from `start`; the tangent is refreshed every iteration.
    pub fn solve(&self, start: &DVector<f64>, amplitude: f64) -> DVector<f64> {
        let mut x = start.clone();
        for _ in 0..20 {
            let g = self.gradient(&x, amplitude);
            if g.norm() <= 1e-13 {
                break;
            }
            let hess = self.hessian(&x, amplitude);
            let dx = hess.lu().solve(&(-g)).expect("elastic tangent is singular");
            x += &dx;
            if dx.norm() <= 1e-15 {
                break;
            }
        }
        x
    }

    /// Nodal displacement of a library mesh node, matched by coordinates.
    pub fn at_mesh_node(&self, x: &DVector<f64>, mesh: &BoxMesh, a: usize) -> [f64; 3] {
        let c = mesh.node_coords(a);
        let idx = c.map(|v| (v * self.n as f64).round() as usize);
        let node = self.node(idx[0], idx[1], idx[2]);
        let u = self.grid_field(x);
        [u[3 * node], u[3 * node + 1], u[3 * node + 2]]
    }
}
