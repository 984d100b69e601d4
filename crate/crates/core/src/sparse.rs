//! Triplet accumulation and CSR storage for the bulk finite element blocks.
//! Assembly pushes (row, col, value) triplets in a fixed element order; the
//! CSR conversion merges duplicates deterministically so that identical
//! inputs produce bit-identical matrices.

#[derive(Clone, Debug, Default)]
pub struct Coo {
    pub n_rows: usize,
    pub n_cols: usize,
    pub entries: Vec<(u32, u32, f64)>,
}

impl Coo {
    pub fn new(n_rows: usize, n_cols: usize) -> Self {
        Coo {
            n_rows,
            n_cols,
            entries: Vec::new(),
        }
    }

    pub fn with_capacity(n_rows: usize, n_cols: usize, cap: usize) -> Self {
        Coo {
            n_rows,
            n_cols,
            entries: Vec::with_capacity(cap),
        }
    }

    #[inline]
    pub fn push(&mut self, r: usize, c: usize, v: f64) {
        self.entries.push((r as u32, c as u32, v));
    }

    /// Merge duplicates and build CSR. Duplicate entries are summed in
    /// insertion order within each (row, col) pair.
    pub fn to_csr(&self) -> Csr {
        let n = self.n_rows;
        let mut counts = vec![0usize; n + 1];
        for &(r, _, _) in &self.entries {
            counts[r as usize + 1] += 1;
        }
        for i in 0..n {
            counts[i + 1] += counts[i];
        }
        let mut order = vec![0u32; self.entries.len()];
        {
            let mut next = counts.clone();
            for (i, &(r, _, _)) in self.entries.iter().enumerate() {
                order[next[r as usize]] = i as u32;
                next[r as usize] += 1;
            }
        }
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut col_idx: Vec<u32> = Vec::with_capacity(self.entries.len());
        let mut values: Vec<f64> = Vec::with_capacity(self.entries.len());
        row_ptr.push(0);
        let mut scratch: Vec<(u32, f64, u32)> = Vec::new();
        for r in 0..n {
            scratch.clear();
            for &e in &order[counts[r]..counts[r + 1]] {
                let (_, c, v) = self.entries[e as usize];
                scratch.push((c, v, e));
            }
            // stable sort by column, then original order for deterministic sums
            scratch.sort_by_key(|&(c, _, e)| (c, e));
            let mut i = 0;
            while i < scratch.len() {
                let c = scratch[i].0;
                let mut v = 0.0;
                while i < scratch.len() && scratch[i].0 == c {
                    v += scratch[i].1;
                    i += 1;
                }
                col_idx.push(c);
                values.push(v);
            }
            row_ptr.push(col_idx.len());
        }
        Csr {
            n_rows: self.n_rows,
            n_cols: self.n_cols,
            row_ptr,
            col_idx,
            values,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Csr {
    pub n_rows: usize,
    pub n_cols: usize,
    pub row_ptr: Vec<usize>,
    pub col_idx: Vec<u32>,
    pub values: Vec<f64>,
}

impl Csr {
    pub fn matvec_into(&self, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.n_cols);
        debug_assert_eq!(y.len(), self.n_rows);
        for r in 0..self.n_rows {
            let mut s = 0.0;
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                s += self.values[k] * x[self.col_idx[k] as usize];
            }
            y[r] = s;
        }
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n_rows];
        self.matvec_into(x, &mut y);
        y
    }

    /// y += A^T x
    pub fn matvec_transpose_add(&self, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.n_rows);
        debug_assert_eq!(y.len(), self.n_cols);
        for r in 0..self.n_rows {
            let xr = x[r];
            if xr == 0.0 {
                continue;
            }
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                y[self.col_idx[k] as usize] += self.values[k] * xr;
            }
        }
    }

    pub fn matvec_transpose(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n_cols];
        self.matvec_transpose_add(x, &mut y);
        y
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn duplicates_are_summed() {
        let mut coo = Coo::new(2, 2);
        coo.push(0, 0, 1.0);
        coo.push(0, 0, 2.0);
        coo.push(1, 0, 4.0);
        coo.push(0, 1, -1.0);
        let csr = coo.to_csr();
        assert_eq!(csr.nnz(), 3);
        let y = csr.matvec(&[1.0, 1.0]);
        assert_eq!(y, vec![2.0, 4.0]);
    }

    #[test]
    fn transpose_matvec() {
        let mut coo = Coo::new(2, 3);
        coo.push(0, 0, 1.0);
        coo.push(0, 2, 2.0);
        coo.push(1, 1, 3.0);
        let csr = coo.to_csr();
        let yt = csr.matvec_transpose(&[1.0, 1.0]);
        assert_eq!(yt, vec![1.0, 3.0, 2.0]);
    }
}
