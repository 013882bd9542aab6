//! Small numerical kernels: banded symmetric storage, SVD least squares and
//! the symmetric tridiagonal eigenproblem.

use std::io::Write;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::io::fmt17;

/// Symmetric banded matrix stored by its lower band.
///
/// Local indices run over `0..n`; `offset` is the global scalar index of
/// local index 0 and is used only for export.
#[derive(Debug, Clone, PartialEq)]
pub struct BandSym {
    n: usize,
    bw: usize,
    offset: i64,
    data: Vec<f64>,
}

impl BandSym {
    pub fn zeros(n: usize, bw: usize, offset: i64) -> Self {
        BandSym { n, bw, offset, data: vec![0.0; n * (bw + 1)] }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn bandwidth(&self) -> usize {
        self.bw
    }

    pub fn offset(&self) -> i64 {
        self.offset
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (r, c) = if i >= j { (i, j) } else { (j, i) };
        if r - c > self.bw {
            0.0
        } else {
            self.data[r * (self.bw + 1) + (r - c)]
        }
    }

    /// Sets entries `(i, j)` and `(j, i)`. Panics outside the band.
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        let (r, c) = if i >= j { (i, j) } else { (j, i) };
        assert!(r - c <= self.bw, "entry ({i}, {j}) outside bandwidth {}", self.bw);
        self.data[r * (self.bw + 1) + (r - c)] = v;
    }

    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        for (i, yi) in y.iter_mut().enumerate().take(self.n) {
            let lo = i.saturating_sub(self.bw);
            let hi = (i + self.bw + 1).min(self.n);
            let mut s = 0.0;
            for (j, xj) in x.iter().enumerate().take(hi).skip(lo) {
                s += self.get(i, j) * xj;
            }
            *yi = s;
        }
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.n, self.n, |i, j| self.get(i, j))
    }

    /// Writes nonzero entries as `row col value` lines with global indices.
    pub fn write_coo<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        for i in 0..self.n {
            let lo = i.saturating_sub(self.bw);
            let hi = (i + self.bw + 1).min(self.n);
            for j in lo..hi {
                let v = self.get(i, j);
                if v != 0.0 {
                    writeln!(
                        out,
                        "{} {} {}",
                        self.offset + i as i64,
                        self.offset + j as i64,
                        fmt17(v)
                    )?;
                }
            }
        }
        Ok(())
    }
}

/// Least-squares solution of `m x = rhs` by SVD.
///
/// Fails when the smallest singular value is below `rcond` times the largest.
pub fn lstsq(m: &DMatrix<f64>, rhs: &DVector<f64>, rcond: f64) -> Result<DVector<f64>> {
    let svd = m.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    if !(smin > rcond * smax) {
        return Err(Error::Singular(format!(
            "condition estimate {:e}",
            if smin > 0.0 { smax / smin } else { f64::INFINITY }
        )));
    }
    svd.solve(rhs, 0.0).map_err(|e| Error::Singular(e.to_string()))
}

/// Eigenvalues and first eigenvector components of the symmetric tridiagonal
/// matrix with diagonal `d` and off-diagonal `e` (`e.len() == d.len() - 1`).
///
/// Implicit QL with Wilkinson shifts. Only the first row of the eigenvector
/// matrix is accumulated. Output is sorted by eigenvalue.
pub fn tridiag_eigen(d: &[f64], e: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = d.len();
    if n == 0 {
        return Ok((vec![], vec![]));
    }
    if e.len() + 1 != n {
        return Err(Error::Dimension(format!(
            "off-diagonal length {} for dimension {n}",
            e.len()
        )));
    }
    let mut d = d.to_vec();
    let mut e: Vec<f64> = e.iter().copied().chain(std::iter::once(0.0)).collect();
    let mut z = vec![0.0; n];
    z[0] = 1.0;
    for l in 0..n {
        let mut iter = 0;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= f64::EPSILON * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iter += 1;
            if iter > 60 {
                return Err(Error::NoConvergence { iterations: iter, residual: e[l].abs() });
            }
            let mut gg = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = gg.hypot(1.0);
            gg = d[m] - d[l] + e[l] / (gg + r.copysign(gg));
            let mut s = 1.0;
            let mut c = 1.0;
            let mut p = 0.0;
            let mut i = m;
            let mut deflated = false;
            while i > l {
                i -= 1;
                let f = s * e[i];
                let b = c * e[i];
                r = f.hypot(gg);
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    deflated = true;
                    break;
                }
                s = f / r;
                c = gg / r;
                gg = d[i + 1] - p;
                r = (d[i] - gg) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = gg + p;
                gg = c * r - b;
                let fz = z[i + 1];
                z[i + 1] = s * z[i] + c * fz;
                z[i] = c * z[i] - s * fz;
            }
            if deflated {
                continue;
            }
            d[l] -= p;
            e[l] = gg;
            e[m] = 0.0;
        }
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| d[a].total_cmp(&d[b]));
    Ok((idx.iter().map(|&i| d[i]).collect(), idx.iter().map(|&i| z[i]).collect()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tridiag_matches_dense() {
        let d = [0.3, -1.0, 2.0, 0.5, 0.0];
        let e = [1.0, 0.4, -0.7, 0.2];
        let (vals, first) = tridiag_eigen(&d, &e).unwrap();
        let mut m = DMatrix::zeros(5, 5);
        for i in 0..5 {
            m[(i, i)] = d[i];
        }
        for i in 0..4 {
            m[(i, i + 1)] = e[i];
            m[(i + 1, i)] = e[i];
        }
        let eig = m.symmetric_eigen();
        let mut pairs: Vec<(f64, f64)> = (0..5)
            .map(|k| (eig.eigenvalues[k], eig.eigenvectors[(0, k)].powi(2)))
            .collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        for k in 0..5 {
            assert!((pairs[k].0 - vals[k]).abs() < 1e-13);
            assert!((pairs[k].1 - first[k] * first[k]).abs() < 1e-13);
        }
    }

    #[test]
    fn band_roundtrip() {
        let mut b = BandSym::zeros(4, 1, 10);
        b.set(1, 0, 2.0);
        b.set(2, 2, 3.0);
        assert_eq!(b.get(0, 1), 2.0);
        assert_eq!(b.get(3, 0), 0.0);
        let mut y = [0.0; 4];
        b.matvec(&[1.0, 1.0, 1.0, 1.0], &mut y);
        assert_eq!(y, [2.0, 2.0, 3.0, 0.0]);
        let mut s = Vec::new();
        b.write_coo(&mut s).unwrap();
        assert!(String::from_utf8(s).unwrap().starts_with("10 11 "));
    }
}
