use num_complex::Complex64;
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flow::JacobiWindow;
use crate::gsmp::{assemble_window, build_blocks, GsmpWindow};
use crate::linalg::BandSym;

const BREAKDOWN: f64 = 1e-13;

/// Lanczos recurrence on `m` from `start` with full reorthogonalization.
///
/// Returns the diagonal `alpha_0..alpha_{steps-1}` and off-diagonal
/// `beta_1..beta_{steps-1}` of the tridiagonal matrix.
pub fn lanczos(m: &BandSym, start: &[f64], steps: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = m.dim();
    if start.len() != n {
        return Err(Error::Dimension(format!("start vector of length {} for dimension {n}", start.len())));
    }
    if steps > n {
        return Err(Error::InvalidArgument(format!("{steps} steps exceed dimension {n}")));
    }
    let norm = start.iter().map(|x| x * x).sum::<f64>().sqrt();
    if !(norm > 0.0) {
        return Err(Error::InvalidArgument("zero start vector".into()));
    }
    let mut basis: Vec<Vec<f64>> = vec![start.iter().map(|x| x / norm).collect()];
    let mut alpha = Vec::with_capacity(steps);
    let mut beta = Vec::with_capacity(steps.saturating_sub(1));
    let mut w = vec![0.0; n];
    for k in 0..steps {
        m.matvec(&basis[k], &mut w);
        let a: f64 = w.iter().zip(&basis[k]).map(|(x, y)| x * y).sum();
        alpha.push(a);
        if k + 1 == steps {
            break;
        }
        for (i, wi) in w.iter_mut().enumerate() {
            *wi -= a * basis[k][i];
            if k > 0 {
                *wi -= beta[k - 1] * basis[k - 1][i];
            }
        }
        for _ in 0..2 {
            for q in &basis {
                let c: f64 = w.iter().zip(q).map(|(x, y)| x * y).sum();
                for (wi, qi) in w.iter_mut().zip(q) {
                    *wi -= c * qi;
                }
            }
        }
        let b = w.iter().map(|x| x * x).sum::<f64>().sqrt();
        if !(b > BREAKDOWN) {
            return Err(Error::Breakdown(k + 1));
        }
        beta.push(b);
        basis.push(w.iter().map(|x| x / b).collect());
    }
    Ok((alpha, beta))
}

/// The map `F`: Jacobi coefficients `a(n)`, `b(n)` for `|n| < depth` of the
/// Jacobi matrix with the same one-sided resolvent functions as `A`.
///
/// `A_+` (blocks `>= 0`) is tridiagonalized from `p_0 / ||p_0||` on block 0,
/// `A_-` (blocks `< 0`) from `e_{-1}`, and `a(0) = ||p_0||`. The truncations
/// use the trusted range, which must contain `depth` blocks on each side.
pub fn lanczos_f(w: &GsmpWindow, depth: usize) -> Result<JacobiWindow> {
    if depth == 0 {
        return Err(Error::InvalidArgument("depth must be positive".into()));
    }
    let (t0, t1) = w.trusted();
    let d = depth as i64;
    if t1 < d || t0 > -d {
        return Err(Error::InvalidArgument(format!(
            "depth {depth} needs trusted blocks [{}, {depth}); trusted range is [{t0}, {t1})",
            -d
        )));
    }
    let bs = w.block_size();
    let g = w.genus();
    let p0 = &w.block(0)?.p;
    let a0 = w.block(0)?.p_norm();

    let plus = assemble_window(w, 0, d)?;
    let mut start = vec![0.0; plus.dim()];
    start[..bs].copy_from_slice(p0);
    let (alpha_p, beta_p) = lanczos(&plus, &start, depth)?;

    let minus = assemble_window(w, -d, 0)?;
    let mut start = vec![0.0; minus.dim()];
    start[(d as usize - 1) * bs + g] = 1.0;
    let (alpha_m, beta_m) = lanczos(&minus, &start, depth)?;

    // n runs over [-depth + 1, depth)
    let len = 2 * depth - 1;
    let mut a = vec![0.0; len];
    let mut b = vec![0.0; len];
    let idx = |n: i64| (n + d - 1) as usize;
    for n in 0..d {
        b[idx(n)] = alpha_p[n as usize];
        if n >= 1 {
            a[idx(n)] = beta_p[n as usize - 1];
        }
    }
    a[idx(0)] = a0;
    for k in 0..d - 1 {
        b[idx(-1 - k)] = alpha_m[k as usize];
        a[idx(-1 - k)] = beta_m[k as usize];
    }
    JacobiWindow::new(-d + 1, a, b)
}

/// Which one-sided resolvent function to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Side {
    /// `<(J_+ - z)^{-1} e_0, e_0>`.
    Plus,
    /// `<(J_- - z)^{-1} e_{-1}, e_{-1}>`.
    Minus,
}

/// A truncated resolvent value with the difference to the half-length truncation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResolventValue {
    pub value: Complex64,
    pub error_estimate: f64,
}

fn cf_eval(b: &[f64], a: &[f64], z: Complex64) -> Result<Complex64> {
    // 1 / (b_0 - z - a_1^2 / (b_1 - z - ...))
    let mut m = Complex64::new(0.0, 0.0);
    for i in (0..b.len()).rev() {
        let tail = if i + 1 < b.len() { a[i] * a[i] * m } else { Complex64::new(0.0, 0.0) };
        let den = b[i] - z - tail;
        if den.norm() == 0.0 || !den.is_finite() {
            return Err(Error::Singular(format!("resolvent denominator vanishes at z = {z}")));
        }
        m = 1.0 / den;
    }
    Ok(m)
}

/// `r_+(z)` or `r_-(z)` of a Jacobi window by its continued fraction over the
/// stored coefficients.
pub fn resolvent_r_jacobi(j: &JacobiWindow, z: Complex64, side: Side) -> Result<ResolventValue> {
    // diagonal b_i and couplings a[i] between entries i and i + 1 along the chain
    let (diag, off): (Vec<f64>, Vec<f64>) = match side {
        Side::Plus => {
            if j.start > 0 || j.end() <= 0 {
                return Err(Error::InvalidArgument("window does not contain n = 0".into()));
            }
            let ns = 0..j.end();
            let d = ns.clone().map(|n| j.b_at(n).expect("in range")).collect();
            let o = ns.map(|n| j.a_at(n + 1).unwrap_or(0.0)).collect();
            (d, o)
        }
        Side::Minus => {
            if j.start > -1 || j.end() <= -1 {
                return Err(Error::InvalidArgument("window does not contain n = -1".into()));
            }
            let ns = (j.start..0).rev();
            let d = ns.clone().map(|n| j.b_at(n).expect("in range")).collect();
            let o = ns.map(|n| j.a_at(n).expect("in range")).collect();
            (d, o)
        }
    };
    let full = cf_eval(&diag, &off, z)?;
    let half_len = (diag.len() / 2).max(1);
    let half = cf_eval(&diag[..half_len], &off[..half_len], z)?;
    Ok(ResolventValue { value: full, error_estimate: (full - half).norm() })
}

fn block_cf(w: &GsmpWindow, z: Complex64, side: Side, blocks: &[i64]) -> Result<Complex64> {
    let bs = w.block_size();
    let g = w.genus();
    let poles = w.poles();
    // Schur complement recursion from the far end towards the anchor block.
    let mut coupling = Complex64::new(0.0, 0.0);
    let mut last: Option<DMatrix<Complex64>> = None;
    for (i, &j) in blocks.iter().enumerate() {
        let pair = w.block(j)?;
        let (_, b) = build_blocks(pair, poles)?;
        let mut m = DMatrix::from_fn(bs, bs, |r, c| Complex64::new(b[(r, c)], 0.0));
        for d in 0..bs {
            m[(d, d)] -= z;
        }
        if i > 0 {
            match side {
                // rank one e_g e_g^T (p_{j+1}^T G_{j+1} p_{j+1})
                Side::Plus => m[(g, g)] -= coupling,
                // p_j (e_g^T G_{j-1} e_g) p_j^T
                Side::Minus => {
                    for r in 0..bs {
                        for c in 0..bs {
                            m[(r, c)] -= pair.p[r] * coupling * pair.p[c];
                        }
                    }
                }
            }
        }
        let inv = m
            .try_inverse()
            .filter(|x| x.iter().all(|v| v.is_finite()))
            .ok_or_else(|| Error::Singular(format!("block {j} at z = {z}")))?;
        coupling = match side {
            Side::Plus => {
                let p = &pair.p;
                let mut s = Complex64::new(0.0, 0.0);
                for r in 0..bs {
                    for c in 0..bs {
                        s += p[r] * inv[(r, c)] * p[c];
                    }
                }
                s
            }
            Side::Minus => inv[(g, g)],
        };
        last = Some(inv);
    }
    let g0 = last.ok_or_else(|| Error::InvalidArgument("no blocks".into()))?;
    match side {
        Side::Plus => {
            let p = &w.block(0)?.p;
            let n2: f64 = p.iter().map(|x| x * x).sum();
            let mut s = Complex64::new(0.0, 0.0);
            for r in 0..bs {
                for c in 0..bs {
                    s += p[r] * g0[(r, c)] * p[c];
                }
            }
            Ok(s / n2)
        }
        Side::Minus => Ok(g0[(g, g)]),
    }
}

/// `<(A_+ - z)^{-1} e~_0, e~_0>` with `e~_0 = p_0 / ||p_0||`, or
/// `<(A_- - z)^{-1} e_{-1}, e_{-1}>`, by the block continued fraction over
/// the trusted range.
pub fn resolvent_r_gsmp(w: &GsmpWindow, z: Complex64, side: Side) -> Result<ResolventValue> {
    let (t0, t1) = w.trusted();
    let chain: Vec<i64> = match side {
        Side::Plus => (0..t1).rev().collect(),
        Side::Minus => (t0..0).collect(),
    };
    if chain.is_empty() {
        return Err(Error::OutOfWindow(if side == Side::Plus { 0 } else { -1 }));
    }
    let full = block_cf(w, z, side, &chain)?;
    let k = chain.len().div_ceil(2);
    let half = block_cf(w, z, side, &chain[chain.len() - k..])?;
    Ok(ResolventValue { value: full, error_estimate: (full - half).norm() })
}
