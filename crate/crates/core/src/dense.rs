//! Dense column-major matrix with an LU factorization (partial pivoting).
//! Used for the interface condensed operator, whose size stays small.

use crate::error::{Error, Result};

#[derive(Clone, Debug)]
pub struct DenseMat {
    pub n_rows: usize,
    pub n_cols: usize,
    data: Vec<f64>,
}

impl DenseMat {
    pub fn zeros(n_rows: usize, n_cols: usize) -> Self {
        DenseMat {
            n_rows,
            n_cols,
            data: vec![0.0; n_rows * n_cols],
        }
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[c * self.n_rows + r]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[c * self.n_rows + r] = v;
    }

    #[inline]
    pub fn add(&mut self, r: usize, c: usize, v: f64) {
        self.data[c * self.n_rows + r] += v;
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n_rows];
        for c in 0..self.n_cols {
            let xc = x[c];
            if xc == 0.0 {
                continue;
            }
            let col = &self.data[c * self.n_rows..(c + 1) * self.n_rows];
            for (yi, &a) in y.iter_mut().zip(col) {
                *yi += a * xc;
            }
        }
        y
    }
}

/// LU factorization with partial pivoting, stored in place.
pub struct DenseLu {
    n: usize,
    lu: Vec<f64>,
    piv: Vec<usize>,
}

impl DenseLu {
    pub fn factor(mat: &DenseMat) -> Result<DenseLu> {
        assert_eq!(mat.n_rows, mat.n_cols);
        let n = mat.n_rows;
        let mut lu = mat.data.clone();
        let mut piv = vec![0usize; n];
        for k in 0..n {
            let mut p = k;
            let mut pmax = lu[k * n + k].abs();
            for r in k + 1..n {
                let v = lu[k * n + r].abs();
                if v > pmax {
                    pmax = v;
                    p = r;
                }
            }
            if pmax == 0.0 {
                return Err(Error::SingularInterfaceOperator);
            }
            piv[k] = p;
            if p != k {
                for c in 0..n {
                    lu.swap(c * n + k, c * n + p);
                }
            }
            let pivot = lu[k * n + k];
            for r in k + 1..n {
                lu[k * n + r] /= pivot;
            }
            for c in k + 1..n {
                let ukc = lu[c * n + k];
                if ukc == 0.0 {
                    continue;
                }
                let (head, tail) = lu.split_at_mut(c * n);
                let lcol = &head[k * n + k + 1..k * n + n];
                let ucol = &mut tail[k + 1..n];
                for (u, &l) in ucol.iter_mut().zip(lcol) {
                    *u -= l * ukc;
                }
            }
        }
        Ok(DenseLu { n, lu, piv })
    }

    pub fn solve_in_place(&self, b: &mut [f64]) {
        let n = self.n;
        for k in 0..n {
            let p = self.piv[k];
            if p != k {
                b.swap(k, p);
            }
        }
        // forward: L has unit diagonal
        for k in 0..n {
            let bk = b[k];
            if bk == 0.0 {
                continue;
            }
            for r in k + 1..n {
                b[r] -= self.lu[k * n + r] * bk;
            }
        }
        // backward
        for k in (0..n).rev() {
            b[k] /= self.lu[k * n + k];
            let bk = b[k];
            if bk == 0.0 {
                continue;
            }
            for r in 0..k {
                b[r] -= self.lu[k * n + r] * bk;
            }
        }
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut x = b.to_vec();
        self.solve_in_place(&mut x);
        x
    }
}
