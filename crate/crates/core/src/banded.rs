//! Square banded matrix with in-place LU (no pivoting).

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct BandedMatrix {
    n: usize,
    lower: usize,
    upper: usize,
    // entry (i, j) lives at (i - j + upper) * n + j
    data: Vec<f64>,
    factored: bool,
}

impl BandedMatrix {
    pub fn zeros(n: usize, lower: usize, upper: usize) -> Self {
        Self {
            n,
            lower,
            upper,
            data: vec![0.0; (lower + upper + 1) * n],
            factored: false,
        }
    }

    pub fn size(&self) -> usize {
        self.n
    }

    fn in_band(&self, i: usize, j: usize) -> bool {
        i < self.n && j < self.n && i + self.upper >= j && j + self.lower >= i
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        if self.in_band(i, j) {
            self.data[(i + self.upper - j) * self.n + j]
        } else {
            0.0
        }
    }

    /// Panics outside the band.
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        assert!(self.in_band(i, j), "({i}, {j}) outside band");
        self.data[(i + self.upper - j) * self.n + j] = v;
    }

    fn at(&mut self, i: usize, j: usize) -> &mut f64 {
        &mut self.data[(i + self.upper - j) * self.n + j]
    }

    /// Doolittle factorization in place; L has a unit diagonal.
    pub fn factor(&mut self) -> Result<()> {
        let n = self.n;
        for k in 0..n {
            let pivot = self.get(k, k);
            if pivot == 0.0 || !pivot.is_finite() {
                return Err(Error::Singular("banded LU pivot"));
            }
            let i_max = (k + self.lower).min(n - 1);
            let j_max = (k + self.upper).min(n - 1);
            for i in k + 1..=i_max {
                let l = self.get(i, k);
                if l != 0.0 {
                    *self.at(i, k) = l / pivot;
                }
            }
            for j in k + 1..=j_max {
                let u = self.get(k, j);
                if u == 0.0 {
                    continue;
                }
                for i in k + 1..=i_max {
                    let l = self.get(i, k);
                    if l != 0.0 {
                        *self.at(i, j) -= l * u;
                    }
                }
            }
        }
        self.factored = true;
        Ok(())
    }

    pub fn is_factored(&self) -> bool {
        self.factored
    }

    /// Solves `A x = b` for `cols` right-hand sides stored row-major in `b`.
    pub fn solve_in_place(&self, b: &mut [f64], cols: usize) {
        assert!(self.factored && b.len() == self.n * cols);
        let n = self.n;
        for j in 0..n {
            for i in j + 1..=(j + self.lower).min(n.saturating_sub(1)) {
                let l = self.get(i, j);
                if l != 0.0 {
                    for c in 0..cols {
                        b[i * cols + c] -= l * b[j * cols + c];
                    }
                }
            }
        }
        for j in (0..n).rev() {
            let d = self.get(j, j);
            for c in 0..cols {
                b[j * cols + c] /= d;
            }
            for i in j.saturating_sub(self.upper)..j {
                let u = self.get(i, j);
                if u != 0.0 {
                    for c in 0..cols {
                        b[i * cols + c] -= u * b[j * cols + c];
                    }
                }
            }
        }
    }

    /// Solves `A^T x = b`.
    pub fn solve_transpose_in_place(&self, b: &mut [f64], cols: usize) {
        assert!(self.factored && b.len() == self.n * cols);
        let n = self.n;
        for j in 0..n {
            let d = self.get(j, j);
            for c in 0..cols {
                b[j * cols + c] /= d;
            }
            for i in j + 1..=(j + self.upper).min(n.saturating_sub(1)) {
                let u = self.get(j, i);
                if u != 0.0 {
                    for c in 0..cols {
                        b[i * cols + c] -= u * b[j * cols + c];
                    }
                }
            }
        }
        for j in (0..n).rev() {
            for i in j.saturating_sub(self.lower)..j {
                let l = self.get(j, i);
                if l != 0.0 {
                    for c in 0..cols {
                        b[i * cols + c] -= l * b[j * cols + c];
                    }
                }
            }
        }
    }
}
