//! Sparse least squares through banded Cholesky of the normal equations.

use crate::{IflError, Result};

/// Symmetric positive definite band matrix, lower band stored row by row.
#[derive(Clone, Debug)]
pub struct BandedSpd {
    n: usize,
    bw: usize,
    data: Vec<f64>,
}

impl BandedSpd {
    pub fn zeros(n: usize, bw: usize) -> Self {
        BandedSpd {
            n,
            bw,
            data: vec![0.0; n * (bw + 1)],
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn bandwidth(&self) -> usize {
        self.bw
    }

    fn idx(&self, i: usize, j: usize) -> usize {
        i * (self.bw + 1) + (i - j)
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (i, j) = if i >= j { (i, j) } else { (j, i) };
        if i - j > self.bw {
            0.0
        } else {
            self.data[self.idx(i, j)]
        }
    }

    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        let (i, j) = if i >= j { (i, j) } else { (j, i) };
        assert!(i - j <= self.bw, "entry ({i},{j}) outside band {}", self.bw);
        let k = self.idx(i, j);
        self.data[k] += v;
    }

    /// In-place factorisation A = L L^T.
    pub fn cholesky(mut self) -> Result<BandedCholesky> {
        let (n, bw) = (self.n, self.bw);
        for j in 0..n {
            let lo = j.saturating_sub(bw);
            let mut s = self.data[self.idx(j, j)];
            for k in lo..j {
                let l = self.data[self.idx(j, k)];
                s -= l * l;
            }
            if !(s > 0.0) {
                return Err(IflError::Numerical(format!(
                    "matrix not positive definite at pivot {j}"
                )));
            }
            let d = s.sqrt();
            let jj = self.idx(j, j);
            self.data[jj] = d;
            for i in j + 1..n.min(j + bw + 1) {
                let lo = i.saturating_sub(bw);
                let mut s = self.data[self.idx(i, j)];
                for k in lo..j {
                    s -= self.data[self.idx(i, k)] * self.data[self.idx(j, k)];
                }
                let ij = self.idx(i, j);
                self.data[ij] = s / d;
            }
        }
        Ok(BandedCholesky { l: self })
    }
}

#[derive(Clone, Debug)]
pub struct BandedCholesky {
    l: BandedSpd,
}

impl BandedCholesky {
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let l = &self.l;
        let (n, bw) = (l.n, l.bw);
        let mut y = b.to_vec();
        for i in 0..n {
            let mut s = y[i];
            for k in i.saturating_sub(bw)..i {
                s -= l.data[l.idx(i, k)] * y[k];
            }
            y[i] = s / l.data[l.idx(i, i)];
        }
        for i in (0..n).rev() {
            let mut s = y[i];
            for k in i + 1..n.min(i + bw + 1) {
                s -= l.data[l.idx(k, i)] * y[k];
            }
            y[i] = s / l.data[l.idx(i, i)];
        }
        y
    }
}

/// A sparse row of a linear system with its right-hand side.
#[derive(Clone, Debug, Default)]
pub struct SparseRow {
    pub entries: Vec<(usize, f64)>,
    pub rhs: f64,
}

impl SparseRow {
    pub fn dot(&self, x: &[f64]) -> f64 {
        self.entries.iter().map(|&(j, a)| a * x[j]).sum()
    }
}

#[derive(Clone, Debug)]
pub struct LeastSquares {
    pub x: Vec<f64>,
    /// Euclidean norm of the final residual.
    pub residual: f64,
    pub bandwidth: usize,
}

/// Minimises |Ax - b| for a full-column-rank sparse system, with two rounds
/// of residual correction.
pub fn least_squares(n: usize, rows: &[SparseRow]) -> Result<LeastSquares> {
    let mut bw = 0;
    for r in rows {
        if let (Some(lo), Some(hi)) = (
            r.entries.iter().map(|e| e.0).min(),
            r.entries.iter().map(|e| e.0).max(),
        ) {
            if hi >= n {
                return Err(IflError::InvalidArgument(format!("column {hi} out of range")));
            }
            bw = bw.max(hi - lo);
        }
    }
    let mut ata = BandedSpd::zeros(n, bw);
    for r in rows {
        for &(i, a) in &r.entries {
            for &(j, b) in &r.entries {
                if i >= j {
                    ata.add(i, j, a * b);
                }
            }
        }
    }
    let chol = ata.cholesky()?;
    let atb = |res: &[f64]| {
        let mut v = vec![0.0; n];
        for (r, &b) in rows.iter().zip(res) {
            for &(j, a) in &r.entries {
                v[j] += a * b;
            }
        }
        v
    };
    let rhs: Vec<f64> = rows.iter().map(|r| r.rhs).collect();
    let mut x = chol.solve(&atb(&rhs));
    let residual_of = |x: &[f64]| -> Vec<f64> { rows.iter().map(|r| r.rhs - r.dot(x)).collect() };
    for _ in 0..2 {
        let res = residual_of(&x);
        let dx = chol.solve(&atb(&res));
        for (xi, d) in x.iter_mut().zip(dx) {
            *xi += d;
        }
    }
    let residual = residual_of(&x).iter().map(|r| r * r).sum::<f64>().sqrt();
    Ok(LeastSquares {
        x,
        residual,
        bandwidth: bw,
    })
}
