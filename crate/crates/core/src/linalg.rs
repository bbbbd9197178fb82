//! Closed-form 2x2 linear algebra.

use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Mat2 {
    rows: [[f64; 2]; 2],
}

impl Mat2 {
    pub fn new(row0: [f64; 2], row1: [f64; 2]) -> Self {
        Mat2 { rows: [row0, row1] }
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.rows[i][j]
    }

    pub fn rows(&self) -> [[f64; 2]; 2] {
        self.rows
    }

    pub fn row_sum(&self, i: usize) -> f64 {
        self.rows[i][0] + self.rows[i][1]
    }

    pub fn trace(&self) -> f64 {
        self.rows[0][0] + self.rows[1][1]
    }

    pub fn det(&self) -> f64 {
        self.rows[0][0] * self.rows[1][1] - self.rows[0][1] * self.rows[1][0]
    }

    /// Row vector times matrix, `v A`.
    pub fn left_mul(&self, v: [f64; 2]) -> [f64; 2] {
        [
            v[0] * self.rows[0][0] + v[1] * self.rows[1][0],
            v[0] * self.rows[0][1] + v[1] * self.rows[1][1],
        ]
    }

    /// Real eigenvalues `(larger, smaller)`, or `None` when they are complex.
    pub fn real_eigenvalues(&self) -> Option<(f64, f64)> {
        let half_tr = 0.5 * self.trace();
        let d = 0.5 * (self.rows[0][0] - self.rows[1][1]);
        let disc = d * d + self.rows[0][1] * self.rows[1][0];
        if disc < 0.0 {
            return None;
        }
        let s = disc.sqrt();
        Some((half_tr + s, half_tr - s))
    }

    /// Dominant eigenvalue and left eigenvector `[1, v_y]` of a matrix with
    /// strictly positive off-diagonal entries (irreducible Metzler matrix).
    ///
    /// Returns `None` if an off-diagonal entry is not strictly positive.
    pub fn perron_left(&self) -> Option<(f64, [f64; 2])> {
        let [[a, b], [c, d]] = self.rows;
        if !(b > 0.0 && c > 0.0) {
            return None;
        }
        // v A = r v with v = [1, v_y] gives
        //   v_y = (r - a) / c = b / (r - d)
        // and r - a = (gap + s) / 2, r - d = (s - gap) / 2 with gap = d - a.
        // Pick the form whose numerator has no cancellation.
        let gap = d - a;
        let s = (gap * gap + 4.0 * b * c).sqrt();
        let r = 0.5 * (a + d + s);
        let v_y = if gap >= 0.0 {
            (gap + s) / (2.0 * c)
        } else {
            2.0 * b / (s - gap)
        };
        Some((r, [1.0, v_y]))
    }
}
