//! Envelope (skyline) Cholesky factorization.
//!
//! Row `i` of the lower triangle is stored densely from its first structural
//! nonzero column `first[i]` up to the diagonal. Cholesky fill never leaves the
//! envelope, so the factor reuses the same storage. For banded systems the cost
//! is `O(n · b²)` with `b` the half bandwidth.

/// Symmetric matrix in envelope storage, factorized in place.
#[derive(Debug, Clone)]
pub struct Skyline {
    first: Vec<usize>,
    offset: Vec<usize>,
    values: Vec<f64>,
    /// Number of pivots that had to be replaced during the last factorization.
    replaced_pivots: usize,
}

/// Pivots that fall below this fraction of the original diagonal are treated as
/// numerically zero and replaced by a huge value, which freezes that component.
const PIVOT_RELATIVE_TOL: f64 = 1e-15;
const HUGE_PIVOT: f64 = 1e64;

impl Skyline {
    /// `first[i] <= i` is the first column of row `i` that may be nonzero.
    pub fn with_envelope(first: Vec<usize>) -> Self {
        let mut offset = Vec::with_capacity(first.len() + 1);
        let mut total = 0;
        for (i, &f) in first.iter().enumerate() {
            assert!(f <= i, "envelope start {f} beyond diagonal of row {i}");
            offset.push(total);
            total += i - f + 1;
        }
        offset.push(total);
        Self {
            first,
            offset,
            values: vec![0.0; total],
            replaced_pivots: 0,
        }
    }

    pub fn dim(&self) -> usize {
        self.first.len()
    }

    /// Number of stored entries of the lower triangle.
    pub fn envelope_size(&self) -> usize {
        self.values.len()
    }

    pub fn replaced_pivots(&self) -> usize {
        self.replaced_pivots
    }

    pub fn clear(&mut self) {
        self.values.iter_mut().for_each(|v| *v = 0.0);
    }

    /// Adds `v` at `(i, j)` of the lower triangle (`j <= i`).
    #[inline]
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        debug_assert!(j <= i && j >= self.first[i], "({i}, {j}) outside envelope");
        self.values[self.offset[i] + j - self.first[i]] += v;
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (i, j) = if j > i { (j, i) } else { (i, j) };
        if j < self.first[i] {
            0.0
        } else {
            self.values[self.offset[i] + j - self.first[i]]
        }
    }

    #[inline]
    fn row(&self, i: usize) -> &[f64] {
        &self.values[self.offset[i]..self.offset[i + 1]]
    }

    /// In-place `L Lᵀ` factorization of the stored matrix.
    pub fn factorize(&mut self) {
        let n = self.dim();
        self.replaced_pivots = 0;
        for i in 0..n {
            let fi = self.first[i];
            let oi = self.offset[i];
            for j in fi..i {
                let fj = self.first[j];
                let oj = self.offset[j];
                let k0 = fi.max(fj);
                let len = j - k0;
                let ri = &self.values[oi + k0 - fi..oi + k0 - fi + len];
                let rj = &self.values[oj + k0 - fj..oj + k0 - fj + len];
                let dot: f64 = ri.iter().zip(rj).map(|(a, b)| a * b).sum();
                let djj = self.values[oj + j - fj];
                let idx = oi + j - fi;
                self.values[idx] = (self.values[idx] - dot) / djj;
            }
            let diag_idx = oi + i - fi;
            let original = self.values[diag_idx];
            let sq: f64 = self.values[oi..diag_idx].iter().map(|v| v * v).sum();
            let pivot = original - sq;
            let tol = PIVOT_RELATIVE_TOL * original.abs().max(1e-300);
            self.values[diag_idx] = if pivot > tol {
                pivot.sqrt()
            } else {
                self.replaced_pivots += 1;
                HUGE_PIVOT.sqrt()
            };
        }
    }

    /// Solves `L Lᵀ x = b` in place using the factor.
    pub fn solve_in_place(&self, b: &mut [f64]) {
        let n = self.dim();
        debug_assert_eq!(b.len(), n);
        // forward: L y = b
        for i in 0..n {
            let fi = self.first[i];
            let row = self.row(i);
            let dot: f64 = row[..i - fi].iter().zip(&b[fi..i]).map(|(l, y)| l * y).sum();
            b[i] = (b[i] - dot) / row[i - fi];
        }
        // backward: Lᵀ x = y
        for i in (0..n).rev() {
            let fi = self.first[i];
            let row = self.row(i);
            b[i] /= row[i - fi];
            let xi = b[i];
            for (bj, l) in b[fi..i].iter_mut().zip(&row[..i - fi]) {
                *bj -= l * xi;
            }
        }
    }
}
