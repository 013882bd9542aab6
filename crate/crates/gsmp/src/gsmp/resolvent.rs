use nalgebra::{DMatrix, DVector, Matrix2, RowVector2, Vector2};
use serde::{Deserialize, Serialize};

use super::blocks::GsmpWindow;
use super::lambda::{factor_fin, lambda_sharp};
use crate::error::{Error, Result};
use crate::linalg::lstsq;

/// Default positivity margin for `Lambda#` and `p_g`.
pub const CLASS_MARGIN: f64 = 1e-8;

const RCOND: f64 = 1e-13;

/// A column vector with contiguous support starting at scalar index `start`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparseColumn {
    pub start: i64,
    pub values: Vec<f64>,
    /// Max-norm residual of the defining equations on the local rows.
    pub residual: f64,
}

impl SparseColumn {
    /// Entry at scalar index `n` (zero outside the support).
    pub fn get(&self, n: i64) -> f64 {
        let i = n - self.start;
        if i < 0 || i as usize >= self.values.len() {
            0.0
        } else {
            self.values[i as usize]
        }
    }

    pub fn end(&self) -> i64 {
        self.start + self.values.len() as i64
    }
}

fn check_k(w: &GsmpWindow, k: usize) -> Result<()> {
    if k == 0 || k > w.genus() {
        return Err(Error::InvalidArgument(format!("k = {k} outside 1..={}", w.genus())));
    }
    Ok(())
}

/// Dense `c - A` restricted to scalar rows `[r0, r1)` and columns `[c0, c1)`.
fn shifted_dense(w: &GsmpWindow, c: f64, r0: i64, r1: i64, c0: i64, c1: i64) -> Result<DMatrix<f64>> {
    let mut m = DMatrix::zeros((r1 - r0) as usize, (c1 - c0) as usize);
    for r in r0..r1 {
        for cc in c0..c1 {
            let a = w
                .entry(r, cc)
                .ok_or_else(|| Error::OutOfWindow(w.split_scalar(r.max(cc)).0))?;
            let d = if r == cc { c } else { 0.0 };
            m[((r - r0) as usize, (cc - c0) as usize)] = d - a;
        }
    }
    Ok(m)
}

fn require_blocks(w: &GsmpWindow, a: i64, b: i64) -> Result<()> {
    for j in [a, b] {
        if !w.contains(j) {
            return Err(Error::OutOfWindow(j));
        }
    }
    Ok(())
}

/// Solves `(c_k - A) f = e_n` under the ansatz that `f` is supported on the
/// block of `n` and its two neighbours, by least squares over the five
/// surrounding block rows. Needs blocks `b - 1 ..= b + 2` in the window,
/// where `b` is the block of `n`.
pub fn resolvent_apply_local(w: &GsmpWindow, k: usize, n: i64) -> Result<SparseColumn> {
    check_k(w, k)?;
    let (b, _) = w.split_scalar(n);
    require_blocks(w, b - 1, b + 2)?;
    let bs = w.block_size() as i64;
    let c = w.poles()[k - 1];
    let (c0, c1) = ((b - 1) * bs, (b + 2) * bs);
    let (r0, r1) = ((b - 2) * bs, (b + 3) * bs);
    let m = shifted_dense(w, c, r0, r1, c0, c1)?;
    let mut rhs = DVector::zeros((r1 - r0) as usize);
    rhs[(n - r0) as usize] = 1.0;
    let f = lstsq(&m, &rhs, RCOND)?;
    let residual = (&m * &f - &rhs).amax();
    Ok(SparseColumn { start: c0, values: f.iter().copied().collect(), residual })
}

/// Closed-form column `(c_k - A)^{-1} e_{k-1}` anchored at block `j`.
///
/// The entries `(f_{-1})_{0..k-1}`, `(f_{-1})_{k-1..g-1}`, `(f_1)_{0..k}` and
/// `(f_1)_{k..=g}` come from the product formulas; the remaining `g + 2`
/// entries (`(f_{-1})_g` and block `j`) are recovered from the defining
/// equations with the closed-form entries held fixed.
pub fn resolvent_column_closed_form(w: &GsmpWindow, k: usize, j: i64) -> Result<SparseColumn> {
    check_k(w, k)?;
    require_blocks(w, j - 1, j + 1)?;
    let g = w.genus();
    let poles = w.poles();
    let ck = poles[k - 1];
    let bm = w.block(j - 1)?;
    let b0 = w.block(j)?;
    let bp = w.block(j + 1)?;

    let ls_minus = lambda_sharp(b0, bm, poles, k)?;
    let ls_plus = lambda_sharp(bp, b0, poles, k)?;
    for (v, blk) in [(ls_minus, j - 1), (ls_plus, j)] {
        if !(v > CLASS_MARGIN) {
            return Err(Error::Margin { quantity: format!("Lambda#_{{k={k}}}"), value: v, block: blk });
        }
    }

    let bs = g + 1;
    let mut fm = vec![0.0; bs];
    let mut fp = vec![0.0; bs];
    fm[k - 1] = 1.0 / ls_minus;
    fp[k - 1] = 1.0 / ls_plus;

    // Block j - 1, entries l = k..g-1.
    let row_m = RowVector2::new(bm.q[k - 1], -bm.p[k - 1]);
    let mut prod = Matrix2::<f64>::identity();
    for l in k..g {
        if l > k {
            prod *= factor_fin(ck, poles[l - 1], bm.p[l - 1], bm.q[l - 1]);
        }
        let val = (row_m * prod * Vector2::new(bm.p[l], bm.q[l]))[0];
        fm[l] = -val / ((poles[l] - ck) * ls_minus);
    }

    // Block j + 1, entries m = 0..k-2.
    let col_p = Vector2::new(bp.p[k - 1], bp.q[k - 1]);
    for m in 0..k.saturating_sub(1) {
        let mut prod = Matrix2::<f64>::identity();
        for i in m + 1..k - 1 {
            prod *= factor_fin(ck, poles[i], bp.p[i], bp.q[i]);
        }
        let val = (RowVector2::new(bp.q[m], -bp.p[m]) * prod * col_p)[0];
        fp[m] = -val / ((poles[m] - ck) * ls_plus);
    }

    // Remaining unknowns: (f_{-1})_g and all of f_0.
    let sbs = bs as i64;
    let (c0, c1) = ((j - 1) * sbs, (j + 2) * sbs);
    let r0 = (j - 2) * sbs;
    let r1 = if w.contains(j + 2) { (j + 3) * sbs } else { (j + 2) * sbs };
    let full = shifted_dense(w, ck, r0, r1, c0, c1)?;
    let mut rhs = DVector::zeros((r1 - r0) as usize);
    rhs[(j * sbs + k as i64 - 1 - r0) as usize] = 1.0;
    let mut fixed = DVector::zeros(3 * bs);
    for i in 0..bs {
        if i != g {
            fixed[i] = fm[i];
        }
        fixed[2 * bs + i] = fp[i];
    }
    let free: Vec<usize> = std::iter::once(g).chain(bs..2 * bs).collect();
    let sub = DMatrix::from_fn(full.nrows(), free.len(), |r, c| full[(r, free[c])]);
    let x = lstsq(&sub, &(&rhs - &full * &fixed), RCOND)?;
    let mut f = fixed;
    for (c, &col) in free.iter().enumerate() {
        f[col] = x[c];
    }
    let residual = (&full * &f - &rhs).amax();
    Ok(SparseColumn { start: c0, values: f.iter().copied().collect(), residual })
}

/// Closed-form entries of `h = (c_k - A)^{-1} e_{-1}` (last index of block
/// `j - 1`): returns `((h_{-1})_g, (h_{-1})_{k-1}, (h_0)_{k-1})`.
pub fn last_index_closed_form(w: &GsmpWindow, k: usize, j: i64) -> Result<(f64, f64, f64)> {
    check_k(w, k)?;
    require_blocks(w, j - 1, j)?;
    let g = w.genus();
    let poles = w.poles();
    let ck = poles[k - 1];
    let bm = w.block(j - 1)?;
    let b0 = w.block(j)?;
    let ls = lambda_sharp(b0, bm, poles, k)?;
    let mut prod = Matrix2::<f64>::identity();
    for i in 0..k - 1 {
        prod *= factor_fin(ck, poles[i], b0.p[i], b0.q[i]);
    }
    let rho_t = (prod * Vector2::new(b0.p[k - 1], b0.q[k - 1]))[1];
    let mut row = RowVector2::new(bm.q[k - 1], -bm.p[k - 1]);
    for i in k..g {
        row *= factor_fin(ck, poles[i], bm.p[i], bm.q[i]);
    }
    let jmat = Matrix2::new(0.0, -1.0, 1.0, 0.0);
    let pi = (row * jmat)[0];
    let pg = bm.pg();
    Ok((-pi * rho_t / (pg * ls), -rho_t / ls, pi / (pg * ls)))
}
