//! Second-order tensors in three dimensions, the symmetric and deviatoric
//! subspaces, the unit-determinant SPD manifold and spectral matrix functions.

use std::ops::{Add, AddAssign, Mul, Neg, Sub, SubAssign};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const SQRT2: f64 = std::f64::consts::SQRT_2;
const FRAC_1_SQRT6: f64 = 0.408_248_290_463_863;

/// Relative determinant drift accepted silently by [`UnitDetSpd::new`].
pub const DET_EXACT_TOL: f64 = 1e-10;
/// Largest determinant drift that is repaired by renormalization.
pub const DET_REPAIR_TOL: f64 = 1e-6;

/// General 3x3 tensor, row-major.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Tensor3(pub [[f64; 3]; 3]);

impl Tensor3 {
    pub const ZERO: Tensor3 = Tensor3([[0.0; 3]; 3]);

    pub fn identity() -> Self {
        Self::diag([1.0, 1.0, 1.0])
    }

    pub fn diag(d: [f64; 3]) -> Self {
        let mut m = [[0.0; 3]; 3];
        for i in 0..3 {
            m[i][i] = d[i];
        }
        Tensor3(m)
    }

    pub fn transpose(&self) -> Self {
        let mut m = [[0.0; 3]; 3];
        for (i, row) in m.iter_mut().enumerate() {
            for (j, x) in row.iter_mut().enumerate() {
                *x = self.0[j][i];
            }
        }
        Tensor3(m)
    }

    pub fn trace(&self) -> f64 {
        self.0[0][0] + self.0[1][1] + self.0[2][2]
    }

    pub fn ddot(&self, other: &Tensor3) -> f64 {
        self.0
            .iter()
            .flatten()
            .zip(other.0.iter().flatten())
            .map(|(a, b)| a * b)
            .sum()
    }

    pub fn norm(&self) -> f64 {
        self.ddot(self).sqrt()
    }

    pub fn det(&self) -> f64 {
        let m = &self.0;
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
            - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    }

    /// Cofactor matrix, `cof A = det(A) A^{-T}` for invertible `A`.
    pub fn cofactor(&self) -> Self {
        let m = &self.0;
        let mut c = [[0.0; 3]; 3];
        for (i, row) in c.iter_mut().enumerate() {
            for (j, x) in row.iter_mut().enumerate() {
                let (i1, i2) = ((i + 1) % 3, (i + 2) % 3);
                let (j1, j2) = ((j + 1) % 3, (j + 2) % 3);
                *x = m[i1][j1] * m[i2][j2] - m[i1][j2] * m[i2][j1];
            }
        }
        Tensor3(c)
    }

    pub fn inverse(&self) -> Result<Self> {
        let det = self.det();
        let scale = self.norm().powi(3).max(f64::MIN_POSITIVE);
        if !det.is_finite() || det.abs() <= 1e-14 * scale {
            return Err(Error::Singular);
        }
        Ok(self.cofactor().transpose() * (1.0 / det))
    }

    pub fn sym(&self) -> SymTensor3 {
        let m = &self.0;
        SymTensor3([
            m[0][0],
            m[1][1],
            m[2][2],
            0.5 * (m[1][2] + m[2][1]),
            0.5 * (m[0][2] + m[2][0]),
            0.5 * (m[0][1] + m[1][0]),
        ])
    }

    pub fn dev(&self) -> Self {
        let t = self.trace() / 3.0;
        *self - Self::identity() * t
    }

    pub fn matmul(&self, other: &Tensor3) -> Tensor3 {
        let mut m = [[0.0; 3]; 3];
        for (i, row) in m.iter_mut().enumerate() {
            for (j, x) in row.iter_mut().enumerate() {
                *x = (0..3).map(|k| self.0[i][k] * other.0[k][j]).sum();
            }
        }
        Tensor3(m)
    }

    pub fn apply(&self, v: [f64; 3]) -> [f64; 3] {
        let mut out = [0.0; 3];
        for (i, o) in out.iter_mut().enumerate() {
            *o = (0..3).map(|k| self.0[i][k] * v[k]).sum();
        }
        out
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().flatten().all(|x| x.is_finite())
    }
}

impl Add for Tensor3 {
    type Output = Tensor3;
    fn add(mut self, rhs: Tensor3) -> Tensor3 {
        self.0
            .iter_mut()
            .flatten()
            .zip(rhs.0.iter().flatten())
            .for_each(|(a, b)| *a += b);
        self
    }
}

impl Sub for Tensor3 {
    type Output = Tensor3;
    fn sub(mut self, rhs: Tensor3) -> Tensor3 {
        self.0
            .iter_mut()
            .flatten()
            .zip(rhs.0.iter().flatten())
            .for_each(|(a, b)| *a -= b);
        self
    }
}

impl Mul<f64> for Tensor3 {
    type Output = Tensor3;
    fn mul(mut self, rhs: f64) -> Tensor3 {
        self.0.iter_mut().flatten().for_each(|a| *a *= rhs);
        self
    }
}

impl Mul for Tensor3 {
    type Output = Tensor3;
    fn mul(self, rhs: Tensor3) -> Tensor3 {
        self.matmul(&rhs)
    }
}

/// Symmetric tensor stored as `[xx, yy, zz, yz, xz, xy]`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct SymTensor3(pub [f64; 6]);

impl SymTensor3 {
    pub const ZERO: SymTensor3 = SymTensor3([0.0; 6]);

    pub fn identity() -> Self {
        SymTensor3([1.0, 1.0, 1.0, 0.0, 0.0, 0.0])
    }

    pub fn diag(d: [f64; 3]) -> Self {
        SymTensor3([d[0], d[1], d[2], 0.0, 0.0, 0.0])
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        const IDX: [[usize; 3]; 3] = [[0, 5, 4], [5, 1, 3], [4, 3, 2]];
        self.0[IDX[i][j]]
    }

    pub fn to_tensor(&self) -> Tensor3 {
        let mut m = [[0.0; 3]; 3];
        for (i, row) in m.iter_mut().enumerate() {
            for (j, x) in row.iter_mut().enumerate() {
                *x = self.get(i, j);
            }
        }
        Tensor3(m)
    }

    pub fn trace(&self) -> f64 {
        self.0[0] + self.0[1] + self.0[2]
    }

    pub fn dev(&self) -> Self {
        let t = self.trace() / 3.0;
        let v = self.0;
        SymTensor3([v[0] - t, v[1] - t, v[2] - t, v[3], v[4], v[5]])
    }

    pub fn ddot(&self, o: &SymTensor3) -> f64 {
        let (a, b) = (self.0, o.0);
        a[0] * b[0] + a[1] * b[1] + a[2] * b[2] + 2.0 * (a[3] * b[3] + a[4] * b[4] + a[5] * b[5])
    }

    pub fn norm(&self) -> f64 {
        self.ddot(self).sqrt()
    }

    pub fn det(&self) -> f64 {
        let [xx, yy, zz, yz, xz, xy] = self.0;
        xx * (yy * zz - yz * yz) - xy * (xy * zz - yz * xz) + xz * (xy * yz - yy * xz)
    }

    pub fn cofactor(&self) -> Self {
        let [xx, yy, zz, yz, xz, xy] = self.0;
        SymTensor3([
            yy * zz - yz * yz,
            xx * zz - xz * xz,
            xx * yy - xy * xy,
            xy * xz - xx * yz,
            xy * yz - yy * xz,
            yz * xz - xy * zz,
        ])
    }

    pub fn inverse(&self) -> Result<Self> {
        let det = self.det();
        let scale = self.norm().powi(3).max(f64::MIN_POSITIVE);
        if !det.is_finite() || det.abs() <= 1e-14 * scale {
            return Err(Error::Singular);
        }
        Ok(self.cofactor() * (1.0 / det))
    }

    pub fn matmul(&self, o: &SymTensor3) -> Tensor3 {
        self.to_tensor().matmul(&o.to_tensor())
    }

    /// `a s a` for symmetric `a`; symmetric up to rounding, symmetrized.
    pub fn sandwich(a: &SymTensor3, s: &SymTensor3) -> SymTensor3 {
        let at = a.to_tensor();
        at.matmul(&s.to_tensor()).matmul(&at).sym()
    }

    /// Coordinates in the orthonormal Mandel basis; `mandel(a)·mandel(b) = a:b`.
    pub fn mandel(&self) -> [f64; 6] {
        let v = self.0;
        [v[0], v[1], v[2], SQRT2 * v[3], SQRT2 * v[4], SQRT2 * v[5]]
    }

    pub fn from_mandel(m: [f64; 6]) -> Self {
        SymTensor3([m[0], m[1], m[2], m[3] / SQRT2, m[4] / SQRT2, m[5] / SQRT2])
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|x| x.is_finite())
    }
}

impl Add for SymTensor3 {
    type Output = SymTensor3;
    fn add(mut self, rhs: SymTensor3) -> SymTensor3 {
        self.0.iter_mut().zip(rhs.0).for_each(|(a, b)| *a += b);
        self
    }
}

impl AddAssign for SymTensor3 {
    fn add_assign(&mut self, rhs: SymTensor3) {
        self.0.iter_mut().zip(rhs.0).for_each(|(a, b)| *a += b);
    }
}

impl Sub for SymTensor3 {
    type Output = SymTensor3;
    fn sub(mut self, rhs: SymTensor3) -> SymTensor3 {
        self.0.iter_mut().zip(rhs.0).for_each(|(a, b)| *a -= b);
        self
    }
}

impl Mul<f64> for SymTensor3 {
    type Output = SymTensor3;
    fn mul(mut self, rhs: f64) -> SymTensor3 {
        self.0.iter_mut().for_each(|a| *a *= rhs);
        self
    }
}

impl Neg for SymTensor3 {
    type Output = SymTensor3;
    fn neg(self) -> SymTensor3 {
        self * -1.0
    }
}

/// Trace-free symmetric tensor in orthonormal coordinates, so the Euclidean
/// norm of the coordinates is the Frobenius norm of the tensor.
///
/// Basis: `diag(1,-1,0)/√2`, `diag(1,1,-2)/√6`, and the unit off-diagonal
/// tensors in the yz, xz, xy slots.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct DevSym3(pub [f64; 5]);

impl DevSym3 {
    pub const ZERO: DevSym3 = DevSym3([0.0; 5]);

    /// Orthogonal projection of a symmetric tensor onto the deviators.
    pub fn from_sym(s: &SymTensor3) -> Self {
        let v = s.0;
        DevSym3([
            (v[0] - v[1]) / SQRT2,
            (v[0] + v[1] - 2.0 * v[2]) * FRAC_1_SQRT6,
            SQRT2 * v[3],
            SQRT2 * v[4],
            SQRT2 * v[5],
        ])
    }

    pub fn to_sym(&self) -> SymTensor3 {
        let c = self.0;
        let a = c[0] / SQRT2;
        let b = c[1] * FRAC_1_SQRT6;
        SymTensor3([
            a + b,
            -a + b,
            -2.0 * b,
            c[2] / SQRT2,
            c[3] / SQRT2,
            c[4] / SQRT2,
        ])
    }

    pub fn dot(&self, o: &DevSym3) -> f64 {
        self.0.iter().zip(o.0).map(|(a, b)| a * b).sum()
    }

    pub fn norm(&self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|x| x.is_finite())
    }

    pub fn unit(k: usize) -> Self {
        let mut c = [0.0; 5];
        c[k] = 1.0;
        DevSym3(c)
    }
}

impl Add for DevSym3 {
    type Output = DevSym3;
    fn add(mut self, rhs: DevSym3) -> DevSym3 {
        self.0.iter_mut().zip(rhs.0).for_each(|(a, b)| *a += b);
        self
    }
}

impl AddAssign for DevSym3 {
    fn add_assign(&mut self, rhs: DevSym3) {
        self.0.iter_mut().zip(rhs.0).for_each(|(a, b)| *a += b);
    }
}

impl Sub for DevSym3 {
    type Output = DevSym3;
    fn sub(mut self, rhs: DevSym3) -> DevSym3 {
        self.0.iter_mut().zip(rhs.0).for_each(|(a, b)| *a -= b);
        self
    }
}

impl SubAssign for DevSym3 {
    fn sub_assign(&mut self, rhs: DevSym3) {
        self.0.iter_mut().zip(rhs.0).for_each(|(a, b)| *a -= b);
    }
}

impl Mul<f64> for DevSym3 {
    type Output = DevSym3;
    fn mul(mut self, rhs: f64) -> DevSym3 {
        self.0.iter_mut().for_each(|a| *a *= rhs);
        self
    }
}

impl Neg for DevSym3 {
    type Output = DevSym3;
    fn neg(self) -> DevSym3 {
        self * -1.0
    }
}

/// Eigen-decomposition of a symmetric tensor; values descending, vectors as
/// columns of `vectors`.
#[derive(Debug, Clone, Copy)]
pub struct Spectral {
    pub values: [f64; 3],
    pub vectors: Tensor3,
}

impl Spectral {
    /// `Σ f(λ_k) q_k ⊗ q_k`.
    pub fn compose(&self, f: impl Fn(f64) -> f64) -> SymTensor3 {
        let d = self.values.map(f);
        let q = &self.vectors.0;
        let entry = |i: usize, j: usize| (0..3).map(|k| d[k] * q[i][k] * q[j][k]).sum::<f64>();
        SymTensor3([
            entry(0, 0),
            entry(1, 1),
            entry(2, 2),
            entry(1, 2),
            entry(0, 2),
            entry(0, 1),
        ])
    }

    /// `Qᵀ s Q`, the representation of `s` in the eigenbasis.
    pub fn rotate_in(&self, s: &SymTensor3) -> Tensor3 {
        let q = self.vectors;
        q.transpose().matmul(&s.to_tensor()).matmul(&q)
    }

    /// Inverse of [`Spectral::rotate_in`] for a symmetric eigenbasis representation.
    pub fn rotate_out(&self, m: &Tensor3) -> SymTensor3 {
        let q = self.vectors;
        q.matmul(m).matmul(&q.transpose()).sym()
    }
}

/// Cyclic Jacobi eigen-solver; off-diagonal entries are driven to exact zero.
pub fn spectral(s: &SymTensor3) -> Spectral {
    let mut a = s.to_tensor().0;
    let mut v = Tensor3::identity().0;
    for sweep in 0..64 {
        let off = a[0][1].abs() + a[0][2].abs() + a[1][2].abs();
        if off == 0.0 {
            break;
        }
        let thresh = if sweep < 3 { 0.2 * off / 9.0 } else { 0.0 };
        for (p, q) in [(0usize, 1usize), (0, 2), (1, 2)] {
            let g = 100.0 * a[p][q].abs();
            if sweep > 3 && a[p][p].abs() + g == a[p][p].abs() && a[q][q].abs() + g == a[q][q].abs()
            {
                a[p][q] = 0.0;
                a[q][p] = 0.0;
                continue;
            }
            if a[p][q].abs() <= thresh || a[p][q] == 0.0 {
                continue;
            }
            let h = a[q][q] - a[p][p];
            let t = if h.abs() + g == h.abs() {
                a[p][q] / h
            } else {
                let theta = 0.5 * h / a[p][q];
                let t = 1.0 / (theta.abs() + (theta * theta + 1.0).sqrt());
                if theta < 0.0 {
                    -t
                } else {
                    t
                }
            };
            let c = 1.0 / (t * t + 1.0).sqrt();
            let sn = t * c;
            let mut rot = Tensor3::identity();
            rot.0[p][p] = c;
            rot.0[q][q] = c;
            rot.0[p][q] = sn;
            rot.0[q][p] = -sn;
            a = rot.transpose().matmul(&Tensor3(a)).matmul(&rot).0;
            a[p][q] = 0.0;
            a[q][p] = 0.0;
            v = Tensor3(v).matmul(&rot).0;
        }
    }
    let mut order = [0usize, 1, 2];
    order.sort_by(|&i, &j| a[j][j].total_cmp(&a[i][i]));
    let mut vectors = [[0.0; 3]; 3];
    for (col, &k) in order.iter().enumerate() {
        for row in 0..3 {
            vectors[row][col] = v[row][k];
        }
    }
    Spectral {
        values: order.map(|k| a[k][k]),
        vectors: Tensor3(vectors),
    }
}

/// Scalar functions applied spectrally by [`mat_fn`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MatFn {
    Log,
    Exp,
    Power(f64),
    Sqrt,
}

pub fn mat_fn(s: &SymTensor3, f: MatFn) -> Result<SymTensor3> {
    let sp = spectral(s);
    let needs_spd = !matches!(f, MatFn::Exp);
    let min = sp.values[2];
    if needs_spd && min <= 0.0 {
        return Err(Error::NonSpd(min));
    }
    Ok(match f {
        MatFn::Log => sp.compose(f64::ln),
        MatFn::Exp => sp.compose(f64::exp),
        MatFn::Power(alpha) => sp.compose(|x| x.powf(alpha)),
        MatFn::Sqrt => sp.compose(f64::sqrt),
    })
}

/// Fréchet derivative of the matrix exponential at `x` in direction `h`
/// (divided differences in the eigenbasis). Self-adjoint for `:`.
pub fn exp_derivative(x: &SymTensor3, h: &SymTensor3) -> SymTensor3 {
    exp_derivative_spectral(&spectral(x), h)
}

pub fn exp_derivative_spectral(sp: &Spectral, h: &SymTensor3) -> SymTensor3 {
    let lam = sp.values;
    let mut hh = sp.rotate_in(h);
    for i in 0..3 {
        for j in 0..3 {
            let d = lam[i] - lam[j];
            let dd = if d == 0.0 {
                lam[i].exp()
            } else {
                lam[j].exp() * d.exp_m1() / d
            };
            hh.0[i][j] *= dd;
        }
    }
    sp.rotate_out(&hh)
}

/// Symmetric tensor on the unit-determinant SPD manifold.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SymTensor3", into = "SymTensor3")]
pub struct UnitDetSpd(SymTensor3);

impl UnitDetSpd {
    /// Validates positivity; renormalizes `C / det^{1/3}` when the drift lies
    /// in `(1e-10, 1e-6]`, rejects larger drifts.
    pub fn new(s: SymTensor3) -> Result<Self> {
        if !s.is_finite() {
            return Err(Error::NonSpd(f64::NAN));
        }
        let min = spectral(&s).values[2];
        if min <= 0.0 {
            return Err(Error::NonSpd(min));
        }
        let det = s.det();
        let drift = (det - 1.0).abs();
        if drift <= DET_EXACT_TOL {
            Ok(UnitDetSpd(s))
        } else if drift <= DET_REPAIR_TOL {
            Ok(UnitDetSpd(s * det.powf(-1.0 / 3.0)))
        } else {
            Err(Error::DeterminantDrift(det))
        }
    }

    pub fn identity() -> Self {
        UnitDetSpd(SymTensor3::identity())
    }

    pub fn from_log(l: &DevSym3) -> Self {
        UnitDetSpd(spectral(&l.to_sym()).compose(f64::exp))
    }

    pub fn log(&self) -> DevSym3 {
        DevSym3::from_sym(&spectral(&self.0).compose(f64::ln))
    }

    pub fn as_sym(&self) -> &SymTensor3 {
        &self.0
    }

    pub fn norm(&self) -> f64 {
        self.0.norm()
    }

    /// Inverse through the cofactor, exact for unit determinant.
    pub fn inverse(&self) -> UnitDetSpd {
        UnitDetSpd(self.0.cofactor() * (1.0 / self.0.det()))
    }

    pub fn power(&self, alpha: f64) -> SymTensor3 {
        spectral(&self.0).compose(|x| x.powf(alpha))
    }
}

impl TryFrom<SymTensor3> for UnitDetSpd {
    type Error = Error;
    fn try_from(s: SymTensor3) -> Result<Self> {
        UnitDetSpd::new(s)
    }
}

impl From<UnitDetSpd> for SymTensor3 {
    fn from(c: UnitDetSpd) -> SymTensor3 {
        c.0
    }
}

/// Fourth-order tensor with both minor symmetries, as a 6x6 matrix acting on
/// Mandel coordinates; major symmetry is the symmetry of that matrix.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tensor4MinorSym(pub [[f64; 6]; 6]);

impl Tensor4MinorSym {
    pub fn isotropic(shear: f64, lame: f64) -> Self {
        let mut m = [[0.0; 6]; 6];
        for (i, row) in m.iter_mut().enumerate() {
            row[i] = 2.0 * shear;
            if i < 3 {
                row[..3].iter_mut().for_each(|x| *x += lame);
            }
        }
        Tensor4MinorSym(m)
    }

    /// `A ↦ A^sym` scaled; acts as `factor · I` on symmetric tensors.
    pub fn scaled_identity(factor: f64) -> Self {
        Self::isotropic(0.5 * factor, 0.0)
    }

    pub fn apply(&self, a: &SymTensor3) -> SymTensor3 {
        let v = a.mandel();
        let mut out = [0.0; 6];
        for (i, o) in out.iter_mut().enumerate() {
            *o = (0..6).map(|k| self.0[i][k] * v[k]).sum();
        }
        SymTensor3::from_mandel(out)
    }

    /// `a : self a`; the energy uses half of this.
    pub fn quad(&self, a: &SymTensor3) -> f64 {
        self.apply(a).ddot(a)
    }

    pub fn asymmetry(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..6 {
            for j in 0..6 {
                worst = worst.max((self.0[i][j] - self.0[j][i]).abs());
            }
        }
        worst
    }

    /// Restriction to the deviators as a 5x5 matrix in [`DevSym3`] coordinates.
    pub fn deviatoric_block(&self) -> [[f64; 5]; 5] {
        let mut out = [[0.0; 5]; 5];
        for j in 0..5 {
            let col = DevSym3::from_sym(&self.apply(&DevSym3::unit(j).to_sym()));
            for i in 0..5 {
                out[i][j] = col.0[i];
            }
        }
        out
    }
}

/// One sample of the logarithm's local Lipschitz bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LipschitzSample {
    /// `|log C1 - log C2|`.
    pub lhs: f64,
    /// `(1 + max(|C1|,|C2|)²) |C1 - C2|`.
    pub rhs_factor: f64,
    pub ratio: f64,
}

pub fn lipschitz_log_check(c1: &UnitDetSpd, c2: &UnitDetSpd) -> LipschitzSample {
    let lhs = (c1.log() - c2.log()).norm();
    let big = c1.norm().max(c2.norm());
    let rhs_factor = (1.0 + big * big) * (*c1.as_sym() - *c2.as_sym()).norm();
    let ratio = if rhs_factor > 0.0 {
        lhs / rhs_factor
    } else {
        0.0
    };
    LipschitzSample {
        lhs,
        rhs_factor,
        ratio,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> SymTensor3 {
        SymTensor3([2.0, 1.5, 0.7, 0.3, -0.2, 0.4])
    }

    /// Truncated Taylor series, independent of the spectral path.
    fn exp_series(x: &SymTensor3) -> Tensor3 {
        let a = x.to_tensor();
        let mut term = Tensor3::identity();
        let mut sum = term;
        for k in 1..60 {
            term = term.matmul(&a) * (1.0 / k as f64);
            sum = sum + term;
        }
        sum
    }

    #[test]
    fn spectral_reconstructs_and_orders() {
        let s = sample();
        let sp = spectral(&s);
        assert!(sp.values[0] >= sp.values[1] && sp.values[1] >= sp.values[2]);
        assert!((sp.compose(|x| x) - s).norm() < 1e-14);
        let qtq = sp.vectors.transpose().matmul(&sp.vectors);
        assert!((qtq - Tensor3::identity()).norm() < 1e-14);
    }

    #[test]
    fn spectral_handles_repeated_eigenvalues() {
        let sp = spectral(&SymTensor3::diag([2.0, 2.0, 1.0]));
        assert_eq!(sp.values, [2.0, 2.0, 1.0]);
        let sp = spectral(&SymTensor3::identity());
        assert_eq!(sp.values, [1.0; 3]);
    }

    #[test]
    fn exp_matches_series() {
        let x = sample() * 0.7;
        let e = mat_fn(&x, MatFn::Exp).unwrap().to_tensor();
        assert!((e - exp_series(&x)).norm() < 1e-12 * e.norm());
    }

    #[test]
    fn log_of_diagonal() {
        let l = mat_fn(&SymTensor3::diag([2.0, 1.0, 0.5]), MatFn::Log).unwrap();
        let ln2 = 2f64.ln();
        assert!((l - SymTensor3::diag([ln2, 0.0, -ln2])).norm() < 1e-15);
        assert!((l.norm() - SQRT2 * ln2).abs() < 1e-15);
    }

    #[test]
    fn log_rejects_indefinite() {
        assert!(matches!(
            mat_fn(&SymTensor3::diag([1.0, -1.0, 1.0]), MatFn::Log),
            Err(Error::NonSpd(_))
        ));
    }

    #[test]
    fn deviatoric_coordinates_are_isometric() {
        let s = sample();
        let d = DevSym3::from_sym(&s);
        assert!((d.norm() - s.dev().norm()).abs() < 1e-14);
        assert!((d.to_sym() - s.dev()).norm() < 1e-15);
        assert!(d.to_sym().trace().abs() < 1e-15);
    }

    #[test]
    fn exp_derivative_matches_central_differences() {
        let x = sample() * 0.8;
        let h = SymTensor3([0.1, -0.3, 0.2, 0.5, 0.05, -0.4]);
        let step = 1e-5;
        let plus = mat_fn(&(x + h * step), MatFn::Exp).unwrap();
        let minus = mat_fn(&(x - h * step), MatFn::Exp).unwrap();
        let fd = (plus - minus) * (0.5 / step);
        assert!((exp_derivative(&x, &h) - fd).norm() < 1e-8);
    }

    #[test]
    fn exp_derivative_is_self_adjoint() {
        let x = sample();
        let a = SymTensor3([0.1, -0.3, 0.2, 0.5, 0.05, -0.4]);
        let b = SymTensor3([-0.7, 0.2, 0.1, 0.0, 0.3, 0.2]);
        let lhs = exp_derivative(&x, &a).ddot(&b);
        let rhs = a.ddot(&exp_derivative(&x, &b));
        assert!((lhs - rhs).abs() < 1e-13 * lhs.abs().max(1.0));
    }

    #[test]
    fn cofactor_identity() {
        let a = Tensor3([[1.0, 2.0, 0.5], [0.3, -1.0, 2.0], [0.0, 0.7, 3.0]]);
        let prod = a.matmul(&a.cofactor().transpose());
        assert!((prod - Tensor3::identity() * a.det()).norm() < 1e-13);
        let s = sample();
        assert!((s.cofactor().to_tensor() - s.to_tensor().cofactor()).norm() < 1e-14);
    }

    #[test]
    fn unit_det_renormalization_window() {
        let s = SymTensor3::identity() * (1.0 + 1e-8);
        let c = UnitDetSpd::new(s).unwrap();
        assert!((c.as_sym().det() - 1.0).abs() < 1e-14);
        assert!(matches!(
            UnitDetSpd::new(SymTensor3::identity() * 1.01),
            Err(Error::DeterminantDrift(_))
        ));
    }

    #[test]
    fn lipschitz_example() {
        let c1 = UnitDetSpd::new(SymTensor3::diag([2.0, 1.0, 0.5])).unwrap();
        let s = lipschitz_log_check(&c1, &UnitDetSpd::identity());
        assert!((s.lhs - 0.980_258_143).abs() < 1e-8);
        assert!(((*c1.as_sym() - SymTensor3::identity()).norm() - 1.118_033_989).abs() < 1e-8);
    }

    #[test]
    fn isotropic_tensor_diagonal() {
        let c = Tensor4MinorSym::isotropic(1.0, 1.0);
        assert_eq!(c.0[0][0], 3.0);
        assert_eq!(c.0[3][3], 2.0);
        let a = SymTensor3([0.1, 0.2, -0.1, 0.3, 0.0, 0.1]);
        let direct = a * 2.0 + SymTensor3::identity() * a.trace();
        assert!((c.apply(&a) - direct).norm() < 1e-15);
    }
}
