//! Structured trilinear hexahedral mesh of the unit cube.

use crate::error::{Error, Result};

/// Natural coordinates of the eight local nodes.
const CORNERS: [[f64; 3]; 8] = [
    [-1.0, -1.0, -1.0],
    [1.0, -1.0, -1.0],
    [1.0, 1.0, -1.0],
    [-1.0, 1.0, -1.0],
    [-1.0, -1.0, 1.0],
    [1.0, -1.0, 1.0],
    [1.0, 1.0, 1.0],
    [-1.0, 1.0, 1.0],
];

/// Interior face between two elements; `weight` is area over centre spacing.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Face {
    pub a: usize,
    pub b: usize,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoxMesh {
    pub n: [usize; 3],
    pub h: [f64; 3],
    /// Shape-function gradients `[gauss][node]`, identical for every element.
    pub grads: [[[f64; 3]; 8]; 8],
    /// Shape-function values `[gauss][node]`.
    pub shapes: [[f64; 8]; 8],
    pub faces: Vec<Face>,
    /// `neighbors[e]` lists `(other element, face weight)`.
    pub neighbors: Vec<Vec<(usize, f64)>>,
    /// Index into the free-dof vector, `None` on the clamped face `x = 0`.
    pub dof_map: Vec<Option<usize>>,
    pub free_dofs: usize,
}

impl BoxMesh {
    pub fn unit_cube(n: [usize; 3]) -> Result<Self> {
        if n.contains(&0) {
            return Err(Error::InvalidParameter(
                "mesh needs at least one element per direction".into(),
            ));
        }
        let h = n.map(|k| 1.0 / k as f64);
        let g = 1.0 / 3f64.sqrt();
        let mut grads = [[[0.0; 3]; 8]; 8];
        let mut shapes = [[0.0; 8]; 8];
        for (q, corner_q) in CORNERS.iter().enumerate() {
            let xi = corner_q.map(|s| s * g);
            for (a, ca) in CORNERS.iter().enumerate() {
                let f = [0, 1, 2].map(|d| 1.0 + ca[d] * xi[d]);
                shapes[q][a] = 0.125 * f[0] * f[1] * f[2];
                for d in 0..3 {
                    let (d1, d2) = ((d + 1) % 3, (d + 2) % 3);
                    grads[q][a][d] = 0.125 * ca[d] * f[d1] * f[d2] * 2.0 / h[d];
                }
            }
        }
        let mut mesh = BoxMesh {
            n,
            h,
            grads,
            shapes,
            faces: Vec::new(),
            neighbors: Vec::new(),
            dof_map: Vec::new(),
            free_dofs: 0,
        };
        let ne = mesh.element_count();
        let area = [h[1] * h[2], h[0] * h[2], h[0] * h[1]];
        mesh.neighbors = vec![Vec::new(); ne];
        for e in 0..ne {
            let ijk = mesh.element_ijk(e);
            for d in 0..3 {
                if ijk[d] + 1 < n[d] {
                    let mut other = ijk;
                    other[d] += 1;
                    let b = mesh.element_index(other);
                    let weight = area[d] / h[d];
                    mesh.faces.push(Face { a: e, b, weight });
                    mesh.neighbors[e].push((b, weight));
                    mesh.neighbors[b].push((e, weight));
                }
            }
        }
        let mut next = 0;
        for a in 0..mesh.node_count() {
            let clamped = mesh.node_ijk(a)[0] == 0;
            for _ in 0..3 {
                mesh.dof_map.push(if clamped {
                    None
                } else {
                    next += 1;
                    Some(next - 1)
                });
            }
        }
        mesh.free_dofs = next;
        Ok(mesh)
    }

    pub fn node_count(&self) -> usize {
        (self.n[0] + 1) * (self.n[1] + 1) * (self.n[2] + 1)
    }

    pub fn element_count(&self) -> usize {
        self.n[0] * self.n[1] * self.n[2]
    }

    pub fn node_ijk(&self, a: usize) -> [usize; 3] {
        let (nx, ny) = (self.n[0] + 1, self.n[1] + 1);
        [a % nx, (a / nx) % ny, a / (nx * ny)]
    }

    pub fn node_index(&self, ijk: [usize; 3]) -> usize {
        ijk[0] + (self.n[0] + 1) * (ijk[1] + (self.n[1] + 1) * ijk[2])
    }

    pub fn node_coords(&self, a: usize) -> [f64; 3] {
        let ijk = self.node_ijk(a);
        [0, 1, 2].map(|d| ijk[d] as f64 * self.h[d])
    }

    pub fn element_ijk(&self, e: usize) -> [usize; 3] {
        [
            e % self.n[0],
            (e / self.n[0]) % self.n[1],
            e / (self.n[0] * self.n[1]),
        ]
    }

    pub fn element_index(&self, ijk: [usize; 3]) -> usize {
        ijk[0] + self.n[0] * (ijk[1] + self.n[1] * ijk[2])
    }

    pub fn element_nodes(&self, e: usize) -> [usize; 8] {
        let base = self.element_ijk(e);
        CORNERS.map(|c| {
            let off = c.map(|s| usize::from(s > 0.0));
            self.node_index([base[0] + off[0], base[1] + off[1], base[2] + off[2]])
        })
    }

    pub fn element_center(&self, e: usize) -> [f64; 3] {
        let ijk = self.element_ijk(e);
        [0, 1, 2].map(|d| (ijk[d] as f64 + 0.5) * self.h[d])
    }

    pub fn element_volume(&self) -> f64 {
        self.h[0] * self.h[1] * self.h[2]
    }

    /// Quadrature weight times Jacobian of each Gauss point.
    pub fn gauss_weight(&self) -> f64 {
        self.element_volume() / 8.0
    }

    /// Physical coordinates of Gauss point `q` of element `e`.
    pub fn gauss_point(&self, e: usize, q: usize) -> [f64; 3] {
        let nodes = self.element_nodes(e);
        let mut x = [0.0; 3];
        for (a, &node) in nodes.iter().enumerate() {
            let xa = self.node_coords(node);
            for d in 0..3 {
                x[d] += self.shapes[q][a] * xa[d];
            }
        }
        x
    }

    /// Red-black colouring: elements of one colour share no face.
    pub fn color(&self, e: usize) -> usize {
        self.element_ijk(e).iter().sum::<usize>() % 2
    }

    /// Consistent nodal forces of a uniform traction on `x = 1` and a uniform body force.
    pub fn load_vector(&self, traction: [f64; 3], body: [f64; 3]) -> Vec<f64> {
        let mut f = vec![0.0; 3 * self.node_count()];
        let vol = self.element_volume();
        for e in 0..self.element_count() {
            for node in self.element_nodes(e) {
                for d in 0..3 {
                    f[3 * node + d] += body[d] * vol / 8.0;
                }
            }
        }
        let face_area = self.h[1] * self.h[2];
        for k in 0..self.n[2] {
            for j in 0..self.n[1] {
                for (dj, dk) in [(0, 0), (1, 0), (0, 1), (1, 1)] {
                    let node = self.node_index([self.n[0], j + dj, k + dk]);
                    for d in 0..3 {
                        f[3 * node + d] += traction[d] * face_area / 4.0;
                    }
                }
            }
        }
        f
    }

    /// `∇u` at Gauss point `q` of element `e` for nodal field `u`.
    pub fn gradient(&self, e: usize, q: usize, u: &[f64]) -> [[f64; 3]; 3] {
        let mut g = [[0.0; 3]; 3];
        for (a, node) in self.element_nodes(e).into_iter().enumerate() {
            for i in 0..3 {
                for j in 0..3 {
                    g[i][j] += u[3 * node + i] * self.grads[q][a][j];
                }
            }
        }
        g
    }

    /// `∫ |u|²` of the trilinear interpolant.
    pub fn l2_norm_sq(&self, u: &[f64]) -> f64 {
        let w = self.gauss_weight();
        (0..self.element_count())
            .map(|e| {
                let nodes = self.element_nodes(e);
                (0..8)
                    .map(|q| {
                        let mut v = [0.0; 3];
                        for (a, &node) in nodes.iter().enumerate() {
                            for d in 0..3 {
                                v[d] += self.shapes[q][a] * u[3 * node + d];
                            }
                        }
                        w * v.iter().map(|x| x * x).sum::<f64>()
                    })
                    .sum::<f64>()
            })
            .sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counts_and_faces() {
        let m = BoxMesh::unit_cube([2, 2, 2]).unwrap();
        assert_eq!(m.node_count(), 27);
        assert_eq!(m.element_count(), 8);
        assert_eq!(m.faces.len(), 12);
        assert_eq!(m.free_dofs, 54);
    }

    #[test]
    fn gradients_reproduce_linear_fields() {
        let m = BoxMesh::unit_cube([2, 3, 1]).unwrap();
        let mut u = vec![0.0; 3 * m.node_count()];
        for a in 0..m.node_count() {
            let x = m.node_coords(a);
            u[3 * a] = 2.0 * x[0] - x[2];
            u[3 * a + 1] = 0.5 * x[1];
            u[3 * a + 2] = x[0] + 3.0 * x[1];
        }
        let g = m.gradient(3, 5, &u);
        let expected = [[2.0, 0.0, -1.0], [0.0, 0.5, 0.0], [1.0, 3.0, 0.0]];
        for i in 0..3 {
            for j in 0..3 {
                assert!((g[i][j] - expected[i][j]).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn load_vector_totals() {
        let m = BoxMesh::unit_cube([2, 2, 2]).unwrap();
        let f = m.load_vector([1.0, 0.0, 0.0], [0.0, 0.0, 2.0]);
        let fx: f64 = (0..m.node_count()).map(|a| f[3 * a]).sum();
        let fz: f64 = (0..m.node_count()).map(|a| f[3 * a + 2]).sum();
        assert!((fx - 1.0).abs() < 1e-14 && (fz - 2.0).abs() < 1e-14);
    }

    #[test]
    fn colors_alternate_across_faces() {
        let m = BoxMesh::unit_cube([3, 2, 2]).unwrap();
        assert!(m.faces.iter().all(|f| m.color(f.a) != m.color(f.b)));
    }
}
