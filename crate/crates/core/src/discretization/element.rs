//! Affine triangle geometry with quadratic (P2) and linear (P1) Lagrange bases.

use crate::Point;

#[derive(Debug, Clone, Copy)]
pub struct AffineTriangle {
    pub vertices: [Point; 3],
    pub area: f64,
    /// Gradients of the barycentric coordinates.
    pub grad_lambda: [[f64; 2]; 3],
}

impl AffineTriangle {
    pub fn new(v: [Point; 3]) -> Self {
        let two_a = (v[1][0] - v[0][0]) * (v[2][1] - v[0][1]) - (v[2][0] - v[0][0]) * (v[1][1] - v[0][1]);
        let inv = 1.0 / two_a;
        let grad_lambda = [
            [(v[1][1] - v[2][1]) * inv, (v[2][0] - v[1][0]) * inv],
            [(v[2][1] - v[0][1]) * inv, (v[0][0] - v[2][0]) * inv],
            [(v[0][1] - v[1][1]) * inv, (v[1][0] - v[0][0]) * inv],
        ];
        Self {
            vertices: v,
            area: 0.5 * two_a,
            grad_lambda,
        }
    }

    pub fn point(&self, l: [f64; 3]) -> Point {
        let v = &self.vertices;
        [
            l[0] * v[0][0] + l[1] * v[1][0] + l[2] * v[2][0],
            l[0] * v[0][1] + l[1] * v[1][1] + l[2] * v[2][1],
        ]
    }

    /// Barycentric coordinates of a physical point.
    pub fn barycentric(&self, x: Point) -> [f64; 3] {
        let v0 = self.vertices[0];
        let d = [x[0] - v0[0], x[1] - v0[1]];
        let g = &self.grad_lambda;
        let l1 = g[1][0] * d[0] + g[1][1] * d[1];
        let l2 = g[2][0] * d[0] + g[2][1] * d[1];
        [1.0 - l1 - l2, l1, l2]
    }

    /// P2 basis gradients at barycentric point `l`.
    pub fn p2_gradients(&self, l: [f64; 3]) -> [[f64; 2]; 6] {
        let g = &self.grad_lambda;
        let mut out = [[0.0; 2]; 6];
        for i in 0..3 {
            let c = 4.0 * l[i] - 1.0;
            out[i] = [c * g[i][0], c * g[i][1]];
        }
        for k in 0..3 {
            let (i, j) = (k, (k + 1) % 3);
            out[3 + k] = [
                4.0 * (l[i] * g[j][0] + l[j] * g[i][0]),
                4.0 * (l[i] * g[j][1] + l[j] * g[i][1]),
            ];
        }
        out
    }
}

pub fn p2_values(l: [f64; 3]) -> [f64; 6] {
    [
        l[0] * (2.0 * l[0] - 1.0),
        l[1] * (2.0 * l[1] - 1.0),
        l[2] * (2.0 * l[2] - 1.0),
        4.0 * l[0] * l[1],
        4.0 * l[1] * l[2],
        4.0 * l[2] * l[0],
    ]
}

/// Barycentric coordinates of the six P2 nodes.
pub const P2_NODES: [[f64; 3]; 6] = [
    [1.0, 0.0, 0.0],
    [0.0, 1.0, 0.0],
    [0.0, 0.0, 1.0],
    [0.5, 0.5, 0.0],
    [0.0, 0.5, 0.5],
    [0.5, 0.0, 0.5],
];
