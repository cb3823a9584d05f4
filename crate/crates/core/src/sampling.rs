//! Seeded random draws of tensors used by checks, oracles and solvers.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::tensor3::{DevSym3, Tensor3, UnitDetSpd};

pub type SeededRng = ChaCha8Rng;

pub fn rng(seed: u64) -> SeededRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Independent stream derived from a base seed and a label.
pub fn substream(seed: u64, label: u64) -> SeededRng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(label);
    r
}

fn standard_normal(rng: &mut impl Rng) -> f64 {
    // Box–Muller; one draw discarded for simplicity.
    let u1: f64 = 1.0 - rng.gen::<f64>();
    let u2: f64 = rng.gen();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

/// Uniformly distributed unit deviator.
pub fn unit_dev(rng: &mut impl Rng) -> DevSym3 {
    loop {
        let d = DevSym3([0; 5].map(|_| standard_normal(rng)));
        let n = d.norm();
        if n > 1e-12 {
            return d * (1.0 / n);
        }
    }
}

/// Deviator with norm uniform in `[0, max_norm]`.
pub fn dev_in_ball(rng: &mut impl Rng, max_norm: f64) -> DevSym3 {
    unit_dev(rng) * (max_norm * rng.gen::<f64>())
}

pub fn unit_det_spd(rng: &mut impl Rng, max_log_norm: f64) -> UnitDetSpd {
    UnitDetSpd::from_log(&dev_in_ball(rng, max_log_norm))
}

/// Haar-distributed rotation from a random unit quaternion.
pub fn rotation(rng: &mut impl Rng) -> Tensor3 {
    let mut q = [0.0; 4].map(|_| standard_normal(rng));
    let n = q.iter().map(|x| x * x).sum::<f64>().sqrt();
    q.iter_mut().for_each(|x| *x /= n);
    let [w, x, y, z] = q;
    Tensor3([
        [
            1.0 - 2.0 * (y * y + z * z),
            2.0 * (x * y - w * z),
            2.0 * (x * z + w * y),
        ],
        [
            2.0 * (x * y + w * z),
            1.0 - 2.0 * (x * x + z * z),
            2.0 * (y * z - w * x),
        ],
        [
            2.0 * (x * z - w * y),
            2.0 * (y * z + w * x),
            1.0 - 2.0 * (x * x + y * y),
        ],
    ])
}

/// Two deviators sharing a random eigenframe, hence commuting.
pub fn commuting_logs(rng: &mut impl Rng, max_log_norm: f64) -> (DevSym3, DevSym3) {
    let q = rotation(rng);
    let mut draw = || {
        let a = standard_normal(rng);
        let b = standard_normal(rng);
        let d = Tensor3::diag([a, b, -a - b]);
        let m = q.matmul(&d).matmul(&q.transpose()).sym();
        let l = DevSym3::from_sym(&m);
        l * (max_log_norm * rng.gen::<f64>() / l.norm().max(1e-12))
    };
    let first = draw();
    (first, draw())
}
