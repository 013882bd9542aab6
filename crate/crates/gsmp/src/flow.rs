//! The Jacobi flow: the single-rotation map `O`, the transform
//! `J = S^{-(g+1)} O^g S^{g+1}`, iteration with per-step certification and
//! extraction of Jacobi coefficients along the flow.

use std::io::Write;

use nalgebra::{DMatrix, Matrix2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gsmp::{assemble_window, b_entry, check_gsmp_class, GsmpBlockPair, GsmpWindow, CLASS_MARGIN};

/// A plane rotation `[[sin, cos], [cos, -sin]]` stored by its sine and cosine.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rotation {
    pub sin: f64,
    pub cos: f64,
}

impl Rotation {
    fn from_pair(x: f64, y: f64) -> Option<Rotation> {
        let r = x.hypot(y);
        if !(r > 0.0) || !r.is_finite() {
            return None;
        }
        Some(Rotation { sin: x / r, cos: y / r })
    }

    fn matrix(&self) -> Matrix2<f64> {
        Matrix2::new(self.sin, self.cos, self.cos, -self.sin)
    }
}

/// The cascade `U(p) = G_g ... G_1`; `angles[k - 1]` acts on coordinates
/// `(k - 1, k)` with `(sin, cos) = (p_{k-1}, ||p_{k..g}||) / ||p_{k-1..g}||`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RotationPlan {
    pub angles: Vec<Rotation>,
}

impl RotationPlan {
    /// Largest `|sin^2 + cos^2 - 1|` over all angles.
    pub fn max_unit_defect(&self) -> f64 {
        self.angles
            .iter()
            .map(|r| (r.sin * r.sin + r.cos * r.cos - 1.0).abs())
            .fold(0.0, f64::max)
    }
}

pub fn rotation_plan(p: &[f64]) -> Result<RotationPlan> {
    let g = p.len().saturating_sub(1);
    if p.is_empty() || p.iter().all(|&x| x == 0.0) {
        return Err(Error::InvalidArgument("zero vector".into()));
    }
    let mut tails = vec![0.0; g + 2];
    for k in (0..=g).rev() {
        tails[k] = p[k].hypot(tails[k + 1]);
    }
    let mut angles = Vec::with_capacity(g);
    for k in 1..=g {
        let r = Rotation::from_pair(p[k - 1], tails[k])
            .ok_or_else(|| Error::InvalidArgument(format!("zero tail at coordinate {}", k - 1)))?;
        angles.push(r);
    }
    Ok(RotationPlan { angles })
}

/// The orthogonal matrix `U(p)` with `p^T U = ||p|| e_0^T`.
pub fn rotation_u(p: &[f64]) -> Result<DMatrix<f64>> {
    let plan = rotation_plan(p)?;
    let n = p.len();
    let mut u = DMatrix::identity(n, n);
    for k in (1..n).rev() {
        let m = plan.angles[k - 1].matrix();
        // u <- u G_k, acting on columns k-1, k
        for r in 0..n {
            let (a, b) = (u[(r, k - 1)], u[(r, k)]);
            u[(r, k - 1)] = a * m[(0, 0)] + b * m[(1, 0)];
            u[(r, k)] = a * m[(0, 1)] + b * m[(1, 1)];
        }
    }
    Ok(u)
}

fn require_genus(w: &GsmpWindow) -> Result<usize> {
    let g = w.genus();
    if g == 0 {
        return Err(Error::InvalidArgument("the map O needs genus >= 1".into()));
    }
    Ok(g)
}

fn last_rotation(p: &[f64], j: i64) -> Result<(Rotation, f64)> {
    let g = p.len() - 1;
    let r = p[g - 1].hypot(p[g]);
    if !(r > CLASS_MARGIN) {
        return Err(Error::Margin { quantity: "hypot(p_{g-1}, p_g)".into(), value: r, block: j });
    }
    Ok((Rotation { sin: p[g - 1] / r, cos: p[g] / r }, r))
}

/// `R M R` with `M` the trailing 2x2 corner of `B(p, q)` and `R` the last rotation.
fn rotated_corner(pair: &GsmpBlockPair, cg: f64, rot: Rotation) -> Matrix2<f64> {
    let g = pair.genus();
    let (p, q) = (&pair.p, &pair.q);
    let m = Matrix2::new(
        cg + q[g - 1] * p[g - 1],
        q[g - 1] * p[g],
        q[g - 1] * p[g],
        q[g] * p[g],
    );
    let r = rot.matrix();
    r * m * r
}

fn rotated_poles(poles: &[f64]) -> Vec<f64> {
    let g = poles.len();
    std::iter::once(poles[g - 1]).chain(poles[..g - 1].iter().copied()).collect()
}

/// The map `O A = S O_A^* A O_A S^{-1}` by explicit coefficient updates.
///
/// Output block `J` is computed from input blocks `J - 1` and `J`, so the
/// output covers `[lo + 1, hi)`; poles become `(c_g, c_1, ..., c_{g-1})`.
pub fn flow_o(w: &GsmpWindow) -> Result<GsmpWindow> {
    let g = require_genus(w)?;
    if w.len() < 2 {
        return Err(Error::InvalidArgument("the map O needs at least two blocks".into()));
    }
    let cg = w.poles()[g - 1];
    let mut out = Vec::with_capacity(w.len() - 1);
    for jb in w.lo() + 1..w.hi() {
        let pm = w.block(jb - 1)?;
        let p0 = w.block(jb)?;
        let (rm, _) = last_rotation(&pm.p, jb - 1)?;
        let (r0, n0) = last_rotation(&p0.p, jb)?;
        let (s, c) = (rm.sin, rm.cos);
        let mut pt = vec![0.0; g + 1];
        let mut qt = vec![0.0; g + 1];
        pt[0] = rotated_corner(pm, cg, rm)[(0, 1)];
        for i in 1..g {
            pt[i] = p0.p[i - 1] * c;
            qt[i] = p0.q[i - 1] / c;
        }
        pt[g] = n0 * c;
        qt[0] = -s / c;
        qt[g] = rotated_corner(p0, cg, r0)[(0, 0)] / pt[g];
        out.push(GsmpBlockPair { p: pt, q: qt });
    }
    let (t0, t1) = w.trusted();
    let lo = w.lo() + 1;
    let res = GsmpWindow::new(rotated_poles(w.poles()), lo, out)?;
    let a = (t0 + 1).max(lo);
    let b = t1.min(res.hi()).max(a);
    res.with_trusted(a, b)
}

/// Largest `|p~_0 q~_0 - (R M R)_{11} + c_g|` over output blocks of `O`: the
/// compatibility condition that fixes `q~_0`.
pub fn flow_o_compatibility(w: &GsmpWindow) -> Result<f64> {
    let g = require_genus(w)?;
    let out = flow_o(w)?;
    let cg = w.poles()[g - 1];
    let mut worst: f64 = 0.0;
    for jb in out.lo()..out.hi() {
        let pm = w.block(jb - 1)?;
        let (rm, _) = last_rotation(&pm.p, jb - 1)?;
        let corner = rotated_corner(pm, cg, rm);
        let b = out.block(jb)?;
        let det = b.p[0] * b.q[0] * b.pg() - b.pg() * (corner[(1, 1)] - cg);
        worst = worst.max(det.abs());
    }
    Ok(worst)
}

/// Reads the generating coefficients of block `jb` out of a dense matrix
/// whose row/column `0` carries scalar index `base`.
fn read_block(x: &DMatrix<f64>, base: i64, bs: usize, jb: i64) -> Result<GsmpBlockPair> {
    let g = bs - 1;
    let at = |r: i64, c: i64| -> Result<f64> {
        let (r, c) = (r - base, c - base);
        if r < 0 || c < 0 || r as usize >= x.nrows() || c as usize >= x.ncols() {
            return Err(Error::OutOfWindow(jb));
        }
        Ok(x[(r as usize, c as usize)])
    };
    let s = jb * bs as i64;
    let p = (0..bs).map(|i| at(s - 1, s + i as i64)).collect::<Result<Vec<_>>>()?;
    if !(p[g] > 0.0) {
        return Err(Error::Margin { quantity: "p_g".into(), value: p[g], block: jb });
    }
    let q = (0..bs)
        .map(|i| at(s + i as i64, s + g as i64).map(|v| v / p[g]))
        .collect::<Result<Vec<_>>>()?;
    Ok(GsmpBlockPair { p, q })
}

/// Block-diagonal orthogonal matrix with the given per-block factors.
fn block_diag(factors: &[DMatrix<f64>], bs: usize) -> DMatrix<f64> {
    let n = factors.len() * bs;
    let mut d = DMatrix::zeros(n, n);
    for (i, f) in factors.iter().enumerate() {
        d.view_mut((i * bs, i * bs), (bs, bs)).copy_from(f);
    }
    d
}

/// Oracle for [`flow_o`]: dense conjugation `O^T A O` of the assembled window
/// followed by the one-step scalar shift.
pub fn flow_o_conjugation(w: &GsmpWindow) -> Result<GsmpWindow> {
    let g = require_genus(w)?;
    let bs = g + 1;
    let a = assemble_window(w, w.lo(), w.hi())?.to_dense();
    let mut factors = Vec::with_capacity(w.len());
    for (j, b) in w.iter() {
        let (r, _) = last_rotation(&b.p, j)?;
        let mut f = DMatrix::identity(bs, bs);
        f.view_mut((g - 1, g - 1), (2, 2)).copy_from(&r.matrix());
        factors.push(f);
    }
    let o = block_diag(&factors, bs);
    let x = o.transpose() * a * o;
    // new(m, n) = X(m - 1, n - 1)
    let base = w.scalar(w.lo(), 0) + 1;
    let blocks = (w.lo() + 1..w.hi())
        .map(|jb| read_block(&x, base, bs, jb))
        .collect::<Result<Vec<_>>>()?;
    GsmpWindow::new(rotated_poles(w.poles()), w.lo() + 1, blocks)
}

/// How `flow_j` computes its output.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FlowMode {
    /// Closed-form block updates.
    Fast,
    /// `g`-fold application of [`flow_o`] followed by the block relabeling.
    Reference,
    /// Both paths; fails if they differ by more than `tol` on common blocks.
    Dual { tol: f64 },
}

/// The transform `J A = S^{-1} U_A^* A U_A S` by the closed-form updates.
///
/// Output block `j` needs input blocks `j` and `j + 1`; output covers
/// `[lo, hi - 1)` and keeps the pole order.
pub fn flow_j_fast(w: &GsmpWindow) -> Result<GsmpWindow> {
    if w.len() < 2 {
        return Err(Error::InvalidArgument("the flow needs at least two blocks".into()));
    }
    let g = w.genus();
    let poles = w.poles();
    let mut out = Vec::with_capacity(w.len() - 1);
    for j in w.lo()..w.hi() - 1 {
        let b = w.block(j)?;
        let bn = w.block(j + 1)?;
        let p = &b.p;
        let mut tails = vec![0.0; g + 2];
        for k in (0..=g).rev() {
            tails[k] = p[k].hypot(tails[k + 1]);
        }
        let norm = tails[0];
        let norm_next = bn.p_norm();
        if !(p[g] > CLASS_MARGIN) || !(norm_next > 0.0) {
            return Err(Error::Margin { quantity: "p_g".into(), value: p[g], block: j });
        }
        let mut pt = vec![0.0; g + 1];
        let mut qt = vec![0.0; g + 1];
        if g > 0 {
            let u = rotation_u(p)?;
            let bm = DMatrix::from_fn(g + 1, g + 1, |r, c| b_entry(b, poles, r, c));
            let ubu = u.transpose() * bm * &u;
            for i in 0..g {
                pt[i] = ubu[(i + 1, 0)];
                qt[i] = -norm * p[i] / (tails[i] * tails[i + 1]);
            }
        }
        pt[g] = p[g] * norm_next / norm;
        let bpp: f64 = (0..=g)
            .map(|r| (0..=g).map(|c| b_entry(bn, poles, r, c) * bn.p[c]).sum::<f64>() * bn.p[r])
            .sum();
        qt[g] = bpp * norm / (p[g] * norm_next.powi(3));
        out.push(GsmpBlockPair { p: pt, q: qt });
    }
    let res = GsmpWindow::new(poles.to_vec(), w.lo(), out)?;
    let (t0, t1) = w.trusted();
    let a = t0.max(res.lo());
    let b = (t1 - 1).min(res.hi()).max(a);
    res.with_trusted(a, b)
}

/// `g`-fold [`flow_o`] followed by the relabeling `J -> J - 1`; output covers
/// `[lo + g - 1, hi - 1)`.
pub fn flow_j_reference(w: &GsmpWindow) -> Result<GsmpWindow> {
    let g = w.genus();
    let mut cur = w.clone();
    for _ in 0..g {
        cur = flow_o(&cur)?;
    }
    let (t0, t1) = cur.trusted();
    let blocks = cur.blocks().to_vec();
    GsmpWindow::new(cur.poles().to_vec(), cur.lo() - 1, blocks)?.with_trusted(t0 - 1, t1 - 1)
}

/// Oracle for [`flow_j_fast`]: dense conjugation by the block-diagonal
/// `diag(U(p_j))` followed by the one-step scalar shift.
pub fn flow_j_conjugation(w: &GsmpWindow) -> Result<GsmpWindow> {
    let bs = w.block_size();
    let a = assemble_window(w, w.lo(), w.hi())?.to_dense();
    let factors = w.iter().map(|(_, b)| rotation_u(&b.p)).collect::<Result<Vec<_>>>()?;
    let d = block_diag(&factors, bs);
    let x = d.transpose() * a * d;
    // new(m, n) = X(m + 1, n + 1)
    let base = w.scalar(w.lo(), 0) - 1;
    let blocks = (w.lo()..w.hi() - 1)
        .map(|jb| read_block(&x, base, bs, jb))
        .collect::<Result<Vec<_>>>()?;
    GsmpWindow::new(w.poles().to_vec(), w.lo(), blocks)
}

/// Largest entrywise difference between two windows on their common blocks.
pub fn window_discrepancy(a: &GsmpWindow, b: &GsmpWindow) -> f64 {
    let lo = a.lo().max(b.lo());
    let hi = a.hi().min(b.hi());
    let mut d: f64 = 0.0;
    for j in lo..hi {
        let (x, y) = (a.block(j).expect("stored"), b.block(j).expect("stored"));
        for (u, v) in x.p.iter().chain(&x.q).zip(y.p.iter().chain(&y.q)) {
            d = d.max((u - v).abs());
        }
    }
    d
}

/// Largest entrywise difference between two windows on the intersection of
/// their trusted ranges.
pub fn trusted_discrepancy(a: &GsmpWindow, b: &GsmpWindow) -> f64 {
    let (a0, a1) = a.trusted();
    let (b0, b1) = b.trusted();
    let (lo, hi) = (a0.max(b0), a1.min(b1));
    if lo >= hi {
        return 0.0;
    }
    match (a.slice(lo, hi), b.slice(lo, hi)) {
        (Ok(x), Ok(y)) => window_discrepancy(&x, &y),
        _ => f64::INFINITY,
    }
}

/// One step of the Jacobi flow.
pub fn flow_j(w: &GsmpWindow, mode: FlowMode) -> Result<GsmpWindow> {
    match mode {
        FlowMode::Fast => flow_j_fast(w),
        FlowMode::Reference => {
            if w.genus() == 0 {
                flow_j_fast(w)
            } else {
                flow_j_reference(w)
            }
        }
        FlowMode::Dual { tol } => {
            let (fast, reference) = rayon::join(
                || flow_j_fast(w),
                || if w.genus() == 0 { flow_j_fast(w) } else { flow_j_reference(w) },
            );
            let (fast, reference) = (fast?, reference?);
            let d = window_discrepancy(&fast, &reference);
            if !(d <= tol) {
                return Err(Error::Discrepancy { value: d, tol });
            }
            Ok(fast)
        }
    }
}

/// Why a flow run ended before the requested number of steps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowStop {
    /// Step whose output failed (iterate `step + 1` was not produced).
    pub step: usize,
    pub reason: String,
}

/// Iterates `A(n) = J^n A(0)` with their trusted ranges.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowTrace {
    pub iterates: Vec<GsmpWindow>,
    /// Dual-path discrepancy per step (empty unless run in dual mode).
    pub discrepancies: Vec<f64>,
    pub stopped: Option<FlowStop>,
}

#[derive(Serialize)]
struct TraceLine<'a> {
    n: usize,
    trusted: [i64; 2],
    #[serde(skip_serializing_if = "Option::is_none")]
    discrepancy: Option<f64>,
    window: &'a GsmpWindow,
}

impl FlowTrace {
    pub fn steps(&self) -> usize {
        self.iterates.len().saturating_sub(1)
    }

    /// Writes one JSON object per iterate.
    pub fn write_json_lines<W: Write>(&self, mut out: W) -> Result<()> {
        for (n, w) in self.iterates.iter().enumerate() {
            let (a, b) = w.trusted();
            let line = TraceLine {
                n,
                trusted: [a, b],
                discrepancy: n.checked_sub(1).and_then(|i| self.discrepancies.get(i).copied()),
                window: w,
            };
            writeln!(out, "{}", crate::io::to_json_line(&line)?)?;
        }
        Ok(())
    }
}

/// Runs `steps` flow steps; each output must certify (`Lambda#`, `p_g` above
/// `CLASS_MARGIN` on its trusted range) and keep blocks `-1` and `0` trusted,
/// otherwise the run stops early with the failing step recorded.
pub fn flow_run(w: &GsmpWindow, steps: usize, mode: FlowMode) -> Result<FlowTrace> {
    let mut iterates = vec![w.clone()];
    let mut discrepancies = Vec::new();
    let mut stopped = None;
    for step in 0..steps {
        let cur = iterates.last().expect("nonempty");
        let next = match mode {
            FlowMode::Dual { tol } => {
                let (fast, reference) = rayon::join(
                    || flow_j_fast(cur),
                    || if cur.genus() == 0 { flow_j_fast(cur) } else { flow_j_reference(cur) },
                );
                match (fast, reference) {
                    (Ok(f), Ok(r)) => {
                        let d = window_discrepancy(&f, &r);
                        discrepancies.push(d);
                        if d <= tol {
                            Ok(f)
                        } else {
                            Err(Error::Discrepancy { value: d, tol })
                        }
                    }
                    (Err(e), _) | (_, Err(e)) => Err(e),
                }
            }
            m => flow_j(cur, m),
        };
        let next = next.and_then(|n| {
            let (t0, t1) = n.trusted();
            if t0 > -1 || t1 < 1 || t1 - t0 < 2 {
                return Err(Error::OutOfWindow(if t0 > -1 { -1 } else { 0 }));
            }
            let r = check_gsmp_class(&n.slice(t0, t1)?, CLASS_MARGIN);
            if !r.certified {
                return Err(Error::Margin {
                    quantity: "Lambda#".into(),
                    value: r.min_lambda_sharp.min(r.min_pg),
                    block: r.argmin.map(|a| a.0).unwrap_or(r.argmin_pg),
                });
            }
            Ok(n)
        });
        match next {
            Ok(n) => iterates.push(n),
            Err(e) => {
                stopped = Some(FlowStop { step, reason: e.to_string() });
                break;
            }
        }
    }
    Ok(FlowTrace { iterates, discrepancies, stopped })
}

/// Jacobi coefficients `a(n)`, `b(n)` for `n` in `[start, start + len)`;
/// `a(n)` couples `e_{n-1}` and `e_n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JacobiWindow {
    pub start: i64,
    pub a: Vec<f64>,
    pub b: Vec<f64>,
}

impl JacobiWindow {
    pub fn new(start: i64, a: Vec<f64>, b: Vec<f64>) -> Result<Self> {
        if a.len() != b.len() {
            return Err(Error::Dimension(format!("{} a's and {} b's", a.len(), b.len())));
        }
        if let Some(i) = a.iter().position(|&x| !(x > 0.0)) {
            return Err(Error::InvalidArgument(format!("a({}) = {} is not positive", start + i as i64, a[i])));
        }
        if b.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidArgument("non-finite b".into()));
        }
        Ok(JacobiWindow { start, a, b })
    }

    /// Constant coefficients on `[start, start + len)`.
    pub fn constant(start: i64, len: usize, a: f64, b: f64) -> Result<Self> {
        JacobiWindow::new(start, vec![a; len], vec![b; len])
    }

    pub fn len(&self) -> usize {
        self.a.len()
    }

    pub fn is_empty(&self) -> bool {
        self.a.is_empty()
    }

    pub fn end(&self) -> i64 {
        self.start + self.a.len() as i64
    }

    pub fn a_at(&self, n: i64) -> Option<f64> {
        let i = n - self.start;
        (i >= 0).then(|| self.a.get(i as usize).copied()).flatten()
    }

    pub fn b_at(&self, n: i64) -> Option<f64> {
        let i = n - self.start;
        (i >= 0).then(|| self.b.get(i as usize).copied()).flatten()
    }

    /// The coefficients shifted by `k`: `a'(n) = a(n + k)`.
    pub fn shifted(&self, k: i64) -> JacobiWindow {
        JacobiWindow { start: self.start - k, a: self.a.clone(), b: self.b.clone() }
    }

    /// Diagonal `b(n0..n1)` and off-diagonal `a(n0+1..n1)` of the truncation to `[n0, n1)`.
    pub fn truncation(&self, n0: i64, n1: i64) -> Result<(Vec<f64>, Vec<f64>)> {
        if n0 < self.start || n1 > self.end() || n0 >= n1 {
            return Err(Error::InvalidArgument(format!(
                "truncation [{n0}, {n1}) outside [{}, {})",
                self.start,
                self.end()
            )));
        }
        let d = (n0..n1).map(|n| self.b_at(n).expect("in range")).collect();
        let e = (n0 + 1..n1).map(|n| self.a_at(n).expect("in range")).collect();
        Ok((d, e))
    }

    /// CSV with columns `n,a,b`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("n,a,b\n");
        for i in 0..self.len() {
            let (a, b) = (crate::io::fmt17(self.a[i]), crate::io::fmt17(self.b[i]));
            out.push_str(&format!("{},{a},{b}\n", self.start + i as i64));
        }
        out
    }
}

/// `a(n) = ||p_0(n)||` and `b(n) = q_g^{(-1)}(n + 1) p_g^{(-1)}(n + 1)` for
/// `n = 0 .. N - 1` where `N` is the number of flow steps.
pub fn extract_jacobi(trace: &FlowTrace) -> Result<JacobiWindow> {
    let n = trace.steps();
    if n == 0 {
        return Err(Error::InvalidArgument("extraction needs at least one flow step".into()));
    }
    let mut a = Vec::with_capacity(n);
    let mut b = Vec::with_capacity(n);
    for i in 0..n {
        a.push(trace.iterates[i].block(0)?.p_norm());
        let m = trace.iterates[i + 1].block(-1)?;
        b.push(m.qg() * m.pg());
    }
    JacobiWindow::new(0, a, b)
}
