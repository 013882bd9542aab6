use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::blocks::GsmpWindow;
use super::resolvent::{resolvent_apply_local, SparseColumn};
use crate::error::{Error, Result};
use crate::spectral_sets::PotentialV;

/// Columns of `V(A) = lambda0 A + c0 + sum_k lambda_k (c_k - A)^{-1}` for the
/// scalar indices of blocks `[j0, j1)`.
#[derive(Debug, Clone)]
pub struct VOfA {
    genus: usize,
    j0: i64,
    j1: i64,
    cols: Vec<SparseColumn>,
    /// Largest `|V[r, c] - V[c, r]|` over pairs with both columns present.
    pub asymmetry: f64,
    /// Largest entry outside the band `|r - c| <= g + 1`.
    pub band_defect: f64,
    /// Largest local-solve residual.
    pub max_residual: f64,
}

/// Assembles `V(A)` column by column from local resolvent solves.
///
/// Column blocks `[j0, j1)` need blocks `j0 - 1 .. j1 + 2` in the window. The
/// poles of `v` must coincide with the window poles.
pub fn assemble_v_of_a(w: &GsmpWindow, v: &PotentialV, j0: i64, j1: i64) -> Result<VOfA> {
    let g = w.genus();
    if v.genus() != g {
        return Err(Error::Dimension(format!("potential genus {} vs window genus {g}", v.genus())));
    }
    let mut wp: Vec<f64> = w.poles().to_vec();
    wp.sort_by(f64::total_cmp);
    if wp.iter().zip(v.pole_positions()).any(|(a, b)| (a - b).abs() > 1e-12 * (1.0 + b.abs())) {
        return Err(Error::InvalidArgument("potential poles differ from window poles".into()));
    }
    if j0 >= j1 || !w.contains(j0 - 1) || !w.contains(j1 + 1) {
        return Err(Error::InvalidArgument(format!(
            "column blocks [{j0}, {j1}) need stored blocks [{}, {}); window has [{}, {})",
            j0 - 1,
            j1 + 2,
            w.lo(),
            w.hi()
        )));
    }
    let bs = w.block_size() as i64;
    // lambda_k for the window's pole order.
    let lam: Vec<f64> = w
        .poles()
        .iter()
        .map(|&c| {
            v.poles
                .iter()
                .min_by(|a, b| (a.1 - c).abs().total_cmp(&(b.1 - c).abs()))
                .map(|x| x.0)
                .unwrap_or(0.0)
        })
        .collect();
    let mut cols = Vec::with_capacity(((j1 - j0) * bs) as usize);
    let mut max_residual: f64 = 0.0;
    for n in j0 * bs..j1 * bs {
        let b = n.div_euclid(bs);
        let start = (b - 1) * bs;
        let mut vals = vec![0.0; 3 * bs as usize];
        for (i, val) in vals.iter_mut().enumerate() {
            let r = start + i as i64;
            let a = w.entry(r, n).ok_or(Error::OutOfWindow(b))?;
            *val = v.lambda0 * a + if r == n { v.c0 } else { 0.0 };
        }
        for k in 1..=g {
            let f = resolvent_apply_local(w, k, n)?;
            max_residual = max_residual.max(f.residual);
            for (i, val) in vals.iter_mut().enumerate() {
                *val += lam[k - 1] * f.get(start + i as i64);
            }
        }
        cols.push(SparseColumn { start, values: vals, residual: 0.0 });
    }
    let mut out = VOfA {
        genus: g,
        j0,
        j1,
        cols,
        asymmetry: 0.0,
        band_defect: 0.0,
        max_residual,
    };
    let mut asym: f64 = 0.0;
    let mut defect: f64 = 0.0;
    for c in j0 * bs..j1 * bs {
        let col = out.raw_col(c);
        for r in col.start..col.end() {
            let x = col.get(r);
            if (r - c).abs() > bs {
                defect = defect.max(x.abs());
            } else if r >= j0 * bs && r < j1 * bs {
                asym = asym.max((x - out.raw_col(r).get(c)).abs());
            }
        }
    }
    out.asymmetry = asym;
    out.band_defect = defect;
    Ok(out)
}

impl VOfA {
    pub fn genus(&self) -> usize {
        self.genus
    }

    /// Column block range `[j0, j1)`.
    pub fn range(&self) -> (i64, i64) {
        (self.j0, self.j1)
    }

    fn bs(&self) -> i64 {
        self.genus as i64 + 1
    }

    fn raw_col(&self, c: i64) -> &SparseColumn {
        &self.cols[(c - self.j0 * self.bs()) as usize]
    }

    pub fn has_col(&self, c: i64) -> bool {
        c >= self.j0 * self.bs() && c < self.j1 * self.bs()
    }

    /// Entry `V[r, c]`, averaged with `V[c, r]` when both columns are present.
    pub fn entry(&self, r: i64, c: i64) -> Result<f64> {
        if (r - c).abs() > self.bs() {
            return Ok(0.0);
        }
        let a = if self.has_col(c) { Some(self.raw_col(c).get(r)) } else { None };
        let b = if self.has_col(r) { Some(self.raw_col(r).get(c)) } else { None };
        match (a, b) {
            (Some(x), Some(y)) => Ok(0.5 * (x + y)),
            (Some(x), None) | (None, Some(x)) => Ok(x),
            (None, None) => Err(Error::OutOfWindow(c.div_euclid(self.bs()))),
        }
    }

    /// Column `V e_c` restricted to the band, as `(row, value)` pairs.
    pub fn band_column(&self, c: i64) -> Result<Vec<(i64, f64)>> {
        let b = self.bs();
        (c - b..=c + b).map(|r| self.entry(r, c).map(|x| (r, x))).collect()
    }

    /// Diagonal block `w_j`.
    pub fn w(&self, j: i64) -> Result<DMatrix<f64>> {
        let b = self.bs();
        let mut m = DMatrix::zeros(b as usize, b as usize);
        for r in 0..b {
            for c in 0..b {
                m[(r as usize, c as usize)] = self.entry(j * b + r, j * b + c)?;
            }
        }
        Ok(m)
    }

    /// Off-diagonal block `v_j = V[block j-1, block j]` (lower triangular).
    pub fn v(&self, j: i64) -> Result<DMatrix<f64>> {
        let b = self.bs();
        let mut m = DMatrix::zeros(b as usize, b as usize);
        for r in 0..b {
            for c in 0..b {
                m[(r as usize, c as usize)] = self.entry((j - 1) * b + r, j * b + c)?;
            }
        }
        Ok(m)
    }

    /// Largest entry of any `v_j - I` or `w_j` over `j` in `[a, b)`.
    pub fn max_magic_deviation(&self, a: i64, b: i64) -> Result<f64> {
        let mut d: f64 = 0.0;
        for j in a..b {
            let v = self.v(j)? - DMatrix::identity(self.genus + 1, self.genus + 1);
            d = d.max(v.amax()).max(self.w(j)?.amax());
        }
        Ok(d)
    }
}

/// Per-block `||v_j - I||^2 + ||w_j||^2` over `[a, b)`, and the square root of
/// their sum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MagicResidual {
    pub per_block: Vec<f64>,
    pub total: f64,
}

/// Hilbert-Schmidt size of `V(A) - S^{g+1} - S^{-(g+1)}` on blocks `[a, b)`.
pub fn magic_residual(va: &VOfA, a: i64, b: i64) -> Result<MagicResidual> {
    let id = DMatrix::identity(va.genus + 1, va.genus + 1);
    let mut per_block = Vec::with_capacity((b - a).max(0) as usize);
    for j in a..b {
        let v = va.v(j)? - &id;
        let w = va.w(j)?;
        per_block.push(v.norm_squared() + w.norm_squared());
    }
    let total = per_block.iter().sum::<f64>().sqrt();
    Ok(MagicResidual { per_block, total })
}

/// Block decomposition of `V(A)`: `v_j`, `w_j` for `j` in `[a, b)` and the
/// largest entry found above the diagonal of any `v_j` or outside the band.
#[derive(Debug, Clone)]
pub struct BlockDecomposition {
    pub j0: i64,
    pub v: Vec<DMatrix<f64>>,
    pub w: Vec<DMatrix<f64>>,
    pub triangularity_defect: f64,
}

pub fn block_decompose_v(va: &VOfA, a: i64, b: i64) -> Result<BlockDecomposition> {
    let mut vs = Vec::new();
    let mut ws = Vec::new();
    let mut defect = va.band_defect;
    for j in a..b {
        let v = va.v(j)?;
        for r in 0..v.nrows() {
            for c in r + 1..v.ncols() {
                defect = defect.max(v[(r, c)].abs());
            }
        }
        vs.push(v);
        ws.push(va.w(j)?);
    }
    Ok(BlockDecomposition { j0: a, v: vs, w: ws, triangularity_defect: defect })
}
