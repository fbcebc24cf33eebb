//! Compressed-row symmetric operators and a profile (skyline) Cholesky
//! factorization for the SPD systems that come out of assembly.

use nalgebra::DMatrix;

use crate::error::{MpaError, Result};

/// Square sparse matrix in compressed row layout.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
    symmetric: bool,
}

impl CsrMatrix {
    /// Builds from `(row, col, value)` triplets. Duplicates are summed in the
    /// order they appear, which keeps assembly bitwise reproducible.
    pub fn from_triplets(n: usize, mut triplets: Vec<(usize, usize, f64)>, symmetric: bool) -> Self {
        // stable sort keeps the insertion order within each (row, col)
        triplets.sort_by_key(|&(r, c, _)| (r, c));
        let mut row_ptr = vec![0; n + 1];
        let mut cols = Vec::new();
        let mut vals: Vec<f64> = Vec::new();
        let mut last = None;
        for (r, c, v) in triplets {
            if last == Some((r, c)) {
                *vals.last_mut().unwrap() += v;
            } else {
                cols.push(c);
                vals.push(v);
                row_ptr[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for r in 0..n {
            row_ptr[r + 1] += row_ptr[r];
        }
        Self {
            n,
            row_ptr,
            cols,
            vals,
            symmetric,
        }
    }

    pub fn from_dense(a: &DMatrix<f64>) -> Self {
        let n = a.nrows();
        let mut t = Vec::new();
        for r in 0..n {
            for c in 0..n {
                if a[(r, c)] != 0.0 {
                    t.push((r, c, a[(r, c)]));
                }
            }
        }
        let symmetric = (0..n).all(|r| (0..n).all(|c| a[(r, c)] == a[(c, r)]));
        Self::from_triplets(n, t, symmetric)
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn is_symmetric(&self) -> bool {
        self.symmetric
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let range = self.row_ptr[r]..self.row_ptr[r + 1];
        self.cols[range.clone()]
            .iter()
            .copied()
            .zip(self.vals[range].iter().copied())
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.row(r).find(|&(cc, _)| cc == c).map_or(0.0, |(_, v)| v)
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        self.mul_vec_into(x, &mut y);
        y
    }

    pub fn mul_vec_into(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.n);
        for (r, yr) in y.iter_mut().enumerate() {
            *yr = self.row(r).map(|(c, v)| v * x[c]).sum();
        }
    }

    /// Bilinear form `uᵀ A v`.
    pub fn form(&self, u: &[f64], v: &[f64]) -> f64 {
        (0..self.n)
            .map(|r| u[r] * self.row(r).map(|(c, a)| a * v[c]).sum::<f64>())
            .sum()
    }

    /// `self + s * other`, entrywise over the union of both patterns.
    pub fn add_scaled(&self, s: f64, other: &CsrMatrix) -> CsrMatrix {
        assert_eq!(self.n, other.n);
        let mut t = Vec::with_capacity(self.nnz() + other.nnz());
        for r in 0..self.n {
            t.extend(self.row(r).map(|(c, v)| (r, c, v)));
            t.extend(other.row(r).map(|(c, v)| (r, c, s * v)));
        }
        CsrMatrix::from_triplets(self.n, t, self.symmetric && other.symmetric)
    }

    pub fn scaled(&self, s: f64) -> CsrMatrix {
        let mut out = self.clone();
        out.vals.iter_mut().for_each(|v| *v *= s);
        out
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut d = DMatrix::zeros(self.n, self.n);
        for r in 0..self.n {
            for (c, v) in self.row(r) {
                d[(r, c)] = v;
            }
        }
        d
    }

    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.n).map(|r| self.row(r).map(|(_, v)| v).sum()).collect()
    }
}

/// Cholesky factor stored by rows over the matrix envelope: row `i` keeps
/// columns `first[i]..=i`.
#[derive(Debug, Clone)]
pub struct SkylineCholesky {
    n: usize,
    first: Vec<usize>,
    start: Vec<usize>,
    data: Vec<f64>,
}

impl SkylineCholesky {
    pub fn factor(a: &CsrMatrix) -> Result<Self> {
        if !a.is_symmetric() {
            return Err(MpaError::InvalidArgument(
                "Cholesky factorization needs a symmetric operator".into(),
            ));
        }
        let n = a.dim();
        let first: Vec<usize> = (0..n)
            .map(|r| a.row(r).map(|(c, _)| c).filter(|&c| c <= r).min().unwrap_or(r))
            .collect();
        let mut start = Vec::with_capacity(n + 1);
        start.push(0);
        for r in 0..n {
            start.push(start[r] + r - first[r] + 1);
        }
        let mut data = vec![0.0; start[n]];
        for r in 0..n {
            for (c, v) in a.row(r).filter(|&(c, _)| c <= r) {
                data[start[r] + c - first[r]] = v;
            }
        }
        let scale = (0..n).map(|r| a.get(r, r).abs()).fold(0.0, f64::max);
        for i in 0..n {
            let fi = first[i];
            for j in fi..=i {
                let fj = first[j];
                let k0 = fi.max(fj);
                let row_i = &data[start[i] + k0 - fi..start[i] + j - fi];
                let row_j = &data[start[j] + k0 - fj..start[j] + j - fj];
                let dot: f64 = row_i.iter().zip(row_j).map(|(x, y)| x * y).sum();
                let s = data[start[i] + j - fi] - dot;
                if j < i {
                    data[start[i] + j - fi] = s / data[start[j] + j - fj];
                } else {
                    if s <= f64::EPSILON * scale * n as f64 || !s.is_finite() {
                        return Err(MpaError::NumericFailure(format!(
                            "Cholesky breakdown at row {i}: pivot {s:e}, operator is not positive definite"
                        )));
                    }
                    data[start[i] + i - fi] = s.sqrt();
                }
            }
        }
        Ok(Self {
            n,
            first,
            start,
            data,
        })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    fn entry(&self, i: usize, j: usize) -> f64 {
        self.data[self.start[i] + j - self.first[i]]
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut x = b.to_vec();
        self.solve_in_place(&mut x);
        x
    }

    pub fn solve_in_place(&self, x: &mut [f64]) {
        assert_eq!(x.len(), self.n);
        for i in 0..self.n {
            let fi = self.first[i];
            let row = &self.data[self.start[i]..self.start[i + 1] - 1];
            let dot: f64 = row.iter().zip(&x[fi..i]).map(|(l, y)| l * y).sum();
            x[i] = (x[i] - dot) / self.entry(i, i);
        }
        for i in (0..self.n).rev() {
            x[i] /= self.entry(i, i);
            let fi = self.first[i];
            let xi = x[i];
            let row = &self.data[self.start[i]..self.start[i + 1] - 1];
            for (l, y) in row.iter().zip(&mut x[fi..i]) {
                *y -= l * xi;
            }
        }
    }
}

fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Solves `op x = rhs` for SPD `op` with a prefactored Cholesky, refining once
/// when the relative residual exceeds `1e-12`.
pub fn solve_with_factor(op: &CsrMatrix, chol: &SkylineCholesky, rhs: &[f64]) -> Result<Vec<f64>> {
    let rhs_norm = norm(rhs);
    if rhs_norm == 0.0 {
        return Ok(vec![0.0; rhs.len()]);
    }
    let mut x = chol.solve(rhs);
    let mut rel = 0.0;
    for _ in 0..3 {
        let ax = op.mul_vec(&x);
        let r: Vec<f64> = rhs.iter().zip(&ax).map(|(b, y)| b - y).collect();
        rel = norm(&r) / rhs_norm;
        if rel <= 1e-12 {
            return Ok(x);
        }
        let dx = chol.solve(&r);
        x.iter_mut().zip(dx).for_each(|(xi, d)| *xi += d);
    }
    if rel.is_finite() && rel <= 1e-10 {
        // refinement stalls at the conditioning floor; keep the refined answer
        return Ok(x);
    }
    Err(MpaError::NumericFailure(format!(
        "SPD solve did not reach the residual target: relative residual {rel:e}"
    )))
}

/// Factors and solves in one go.
pub fn solve_spd(op: &CsrMatrix, rhs: &[f64]) -> Result<Vec<f64>> {
    let chol = SkylineCholesky::factor(op)?;
    solve_with_factor(op, &chol, rhs)
}
