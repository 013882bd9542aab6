use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::intervals::IntervalSystem;
use crate::error::{Error, Result};

/// Rational Herglotz potential `V(z) = lambda0 z + c0 + sum lambda_k / (c_k - z)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PotentialV {
    pub lambda0: f64,
    pub c0: f64,
    /// Pairs `(lambda_k, c_k)` ordered by increasing `c_k`.
    pub poles: Vec<(f64, f64)>,
}

impl PotentialV {
    pub fn new(lambda0: f64, c0: f64, poles: Vec<(f64, f64)>) -> Result<Self> {
        if !(lambda0 >= 0.0) || !c0.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "bad linear part lambda0 = {lambda0}, c0 = {c0}"
            )));
        }
        for w in poles.windows(2) {
            if !(w[0].1 < w[1].1) {
                return Err(Error::InvalidArgument("poles must be strictly increasing".into()));
            }
        }
        if poles.iter().any(|&(l, c)| !(l > 0.0) || !c.is_finite()) {
            return Err(Error::InvalidArgument("residues must be positive".into()));
        }
        Ok(PotentialV { lambda0, c0, poles })
    }

    /// The identity potential `V(z) = z`.
    pub fn identity() -> Self {
        PotentialV { lambda0: 1.0, c0: 0.0, poles: vec![] }
    }

    pub fn genus(&self) -> usize {
        self.poles.len()
    }

    /// Pole positions `c_1 < ... < c_g`.
    pub fn pole_positions(&self) -> Vec<f64> {
        self.poles.iter().map(|&(_, c)| c).collect()
    }

    /// Residues `lambda_1..lambda_g`.
    pub fn residues(&self) -> Vec<f64> {
        self.poles.iter().map(|&(l, _)| l).collect()
    }

    /// Pole part `sum lambda_k / (c_k - z)` without the linear terms.
    pub fn pole_part(&self) -> PotentialV {
        PotentialV { lambda0: 0.0, c0: 0.0, poles: self.poles.clone() }
    }

    /// The potential of the translated set `E + t`.
    pub fn translated(&self, t: f64) -> PotentialV {
        PotentialV {
            lambda0: self.lambda0,
            c0: self.c0 - self.lambda0 * t,
            poles: self.poles.iter().map(|&(l, c)| (l, c + t)).collect(),
        }
    }

    /// Value and derivative at a complex point.
    pub fn eval(&self, z: Complex64) -> Result<(Complex64, Complex64)> {
        let mut v = self.lambda0 * z + self.c0;
        let mut d = Complex64::new(self.lambda0, 0.0);
        for &(l, c) in &self.poles {
            let w = c - z;
            if w.norm() == 0.0 {
                return Err(Error::AtPole(c));
            }
            v += l / w;
            d += l / (w * w);
        }
        Ok((v, d))
    }

    /// Value and derivative at a real point.
    pub fn eval_real(&self, x: f64) -> Result<(f64, f64)> {
        let mut v = self.lambda0 * x + self.c0;
        let mut d = self.lambda0;
        for &(l, c) in &self.poles {
            let w = c - x;
            if w == 0.0 {
                return Err(Error::AtPole(c));
            }
            v += l / w;
            d += l / (w * w);
        }
        Ok((v, d))
    }

    fn value(&self, x: f64) -> f64 {
        let mut v = self.lambda0 * x + self.c0;
        for &(l, c) in &self.poles {
            v += l / (c - x);
        }
        v
    }
}

/// Evaluates `V` and `V'` at `z`.
pub fn eval_potential(v: &PotentialV, z: Complex64) -> Result<(Complex64, Complex64)> {
    v.eval(z)
}

const MAX_HALVINGS: usize = 60;

fn boundary_points(e: &IntervalSystem) -> Vec<(f64, f64)> {
    e.bands()
        .iter()
        .flat_map(|&(l, r)| [(l, -2.0), (r, 2.0)])
        .collect()
}

fn unpack(x: &DVector<f64>, g: usize) -> PotentialV {
    PotentialV {
        lambda0: x[0],
        c0: x[1],
        poles: (0..g).map(|k| (x[2 + k], x[2 + g + k])).collect(),
    }
}

fn residual(v: &PotentialV, pts: &[(f64, f64)]) -> DVector<f64> {
    DVector::from_iterator(pts.len(), pts.iter().map(|&(x, y)| v.value(x) - y))
}

fn feasible(v: &PotentialV, e: &IntervalSystem) -> bool {
    v.lambda0 > 0.0
        && v.poles
            .iter()
            .zip(e.gaps())
            .all(|(&(l, c), &(a, b))| l > 0.0 && a < c && c < b)
}

/// Solves the boundary system `V = -2` at the left and `V = +2` at the right
/// edge of every band by damped Newton iteration.
pub fn solve_potential(e: &IntervalSystem, tol: f64, max_iter: usize) -> Result<PotentialV> {
    if !(tol > 0.0 && tol <= 1e-6) {
        return Err(Error::InvalidArgument(format!("tol {tol} outside (0, 1e-6]")));
    }
    let g = e.genus();
    let n = 2 * g + 2;
    let pts = boundary_points(e);

    let lambda0 = 4.0 / (e.a0() - e.b0());
    let mut x = DVector::zeros(n);
    x[0] = lambda0;
    for (k, &(a, b)) in e.gaps().iter().enumerate() {
        x[2 + k] = (b - a) * (b - a) * lambda0 / 4.0;
        x[2 + g + k] = 0.5 * (a + b);
    }
    let v0 = unpack(&x, g);
    x[1] = -2.0 - v0.value(e.b0());

    let mut v = unpack(&x, g);
    let mut f = residual(&v, &pts);
    let mut fnorm = f.amax();
    for _ in 0..max_iter {
        if fnorm <= tol {
            return Ok(v);
        }
        let mut jac = DMatrix::zeros(n, n);
        for (row, &(xe, _)) in pts.iter().enumerate() {
            jac[(row, 0)] = xe;
            jac[(row, 1)] = 1.0;
            for (k, &(l, c)) in v.poles.iter().enumerate() {
                let w = c - xe;
                jac[(row, 2 + k)] = 1.0 / w;
                jac[(row, 2 + g + k)] = -l / (w * w);
            }
        }
        let dx = jac
            .lu()
            .solve(&(-&f))
            .ok_or_else(|| Error::Singular("potential Jacobian".into()))?;
        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..MAX_HALVINGS {
            let trial = &x + t * &dx;
            let tv = unpack(&trial, g);
            if feasible(&tv, e) {
                let tf = residual(&tv, &pts);
                let tn = tf.amax();
                if tn < fnorm || tn <= tol {
                    x = trial;
                    v = tv;
                    f = tf;
                    fnorm = tn;
                    accepted = true;
                    break;
                }
            }
            t *= 0.5;
        }
        if !accepted {
            return Err(Error::Infeasible(format!(
                "no feasible descent step (residual {fnorm:e})"
            )));
        }
    }
    if fnorm <= tol {
        Ok(v)
    } else {
        Err(Error::NoConvergence { iterations: max_iter, residual: fnorm })
    }
}

/// Finds the root of the increasing function `V - y` in `(lo, hi)`, where an
/// infinite endpoint is replaced by an expanding bracket.
fn root_in(v: &PotentialV, y: f64, lo: f64, hi: f64) -> Option<f64> {
    let h = |x: f64| v.value(x) - y;
    let scale = 1.0 + v.poles.iter().map(|p| p.1.abs()).fold(0.0, f64::max);
    let mut left;
    let mut right;
    if lo.is_finite() && hi.is_finite() {
        let w = hi - lo;
        let mut d = 0.25 * w;
        left = lo + d;
        right = hi - d;
        while h(left) > 0.0 {
            d *= 0.5;
            left = lo + d;
            if d < w * 1e-300 || left <= lo {
                return None;
            }
        }
        d = 0.25 * w;
        while h(right) < 0.0 {
            d *= 0.5;
            right = hi - d;
            if d < w * 1e-300 || right >= hi {
                return None;
            }
        }
    } else if hi.is_finite() {
        right = hi - 1e-3 * scale;
        let mut d = 1e-3 * scale;
        while h(right) < 0.0 {
            d *= 0.5;
            right = hi - d;
            if right >= hi {
                return None;
            }
        }
        let mut step = scale;
        left = right - step;
        while h(left) > 0.0 {
            step *= 2.0;
            left = right - step;
            if !left.is_finite() {
                return None;
            }
        }
    } else if lo.is_finite() {
        left = lo + 1e-3 * scale;
        let mut d = 1e-3 * scale;
        while h(left) > 0.0 {
            d *= 0.5;
            left = lo + d;
            if left <= lo {
                return None;
            }
        }
        let mut step = scale;
        right = left + step;
        while h(right) < 0.0 {
            step *= 2.0;
            right = left + step;
            if !right.is_finite() {
                return None;
            }
        }
    } else {
        left = -scale;
        right = scale;
        let mut step = scale;
        while h(left) > 0.0 {
            step *= 2.0;
            left = -step;
            if !left.is_finite() {
                return None;
            }
        }
        step = scale;
        while h(right) < 0.0 {
            step *= 2.0;
            right = step;
            if !right.is_finite() {
                return None;
            }
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (left + right);
        if mid <= left || mid >= right {
            break;
        }
        if h(mid) < 0.0 {
            left = mid;
        } else {
            right = mid;
        }
    }
    let mut x = 0.5 * (left + right);
    // Newton polish, kept inside the final bracket.
    for _ in 0..3 {
        let (val, der) = v.eval_real(x).ok()?;
        let nx = x - (val - y) / der;
        if nx >= left && nx <= right {
            x = nx;
        }
    }
    Some(x)
}

/// All real solutions of `V(x) = y`, sorted ascending.
///
/// For a full potential (`lambda0 > 0`) there is exactly one solution between
/// consecutive poles, `g + 1` in total. For a pole-part potential
/// (`lambda0 = 0`) there are `g` solutions when `y != c0`.
pub fn potential_preimage(v: &PotentialV, y: f64) -> Result<Vec<f64>> {
    if !y.is_finite() {
        return Err(Error::InvalidArgument("non-finite level".into()));
    }
    let cs = v.pole_positions();
    let g = cs.len();
    let mut cuts = Vec::with_capacity(g + 2);
    cuts.push(f64::NEG_INFINITY);
    cuts.extend_from_slice(&cs);
    cuts.push(f64::INFINITY);
    let mut roots = Vec::new();
    for (i, w) in cuts.windows(2).enumerate() {
        let (lo, hi) = (w[0], w[1]);
        if v.lambda0 == 0.0 {
            // On the outer pieces the pole part tends to c0 at infinity.
            if i == 0 && !(y > v.c0) {
                continue;
            }
            if i == g && !(y < v.c0) {
                continue;
            }
        }
        if let Some(r) = root_in(v, y, lo, hi) {
            roots.push(r);
        }
    }
    let expected = if v.lambda0 > 0.0 { g + 1 } else { g };
    if roots.len() != expected {
        return Err(Error::RootCount { expected, found: roots.len() });
    }
    Ok(roots)
}

/// Sampled check of `E = V^{-1}([-2, 2])`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PotentialReport {
    /// Largest amount by which `|V| <= 2` fails on `E` or `|V| > 2` fails off `E`.
    pub max_violation: f64,
    /// Location of the largest violation.
    pub worst_x: f64,
    /// Largest boundary-equation residual at the band edges.
    pub edge_residual: f64,
    pub samples: usize,
}

/// Samples `E`, its gaps and the two outer half-lines and reports the worst
/// violation of `E = V^{-1}([-2, 2])`.
pub fn verify_potential(v: &PotentialV, e: &IntervalSystem, samples: usize) -> PotentialReport {
    let samples = samples.max(2);
    let mut worst = f64::NEG_INFINITY;
    let mut worst_x = f64::NAN;
    let mut count = 0;
    let mut record = |x: f64, viol: f64| {
        if viol > worst {
            worst = viol;
            worst_x = x;
        }
    };
    for &(l, r) in &e.bands() {
        for i in 0..=samples {
            let x = l + (r - l) * i as f64 / samples as f64;
            let val = v.eval_real(x).map(|p| p.0).unwrap_or(f64::INFINITY);
            record(x, val.abs() - 2.0);
            count += 1;
        }
    }
    let span = e.a0() - e.b0();
    let mut off = Vec::new();
    for &(a, b) in e.gaps() {
        off.push((a, b));
    }
    off.push((e.b0() - span, e.b0()));
    off.push((e.a0(), e.a0() + span));
    for (a, b) in off {
        for i in 0..samples {
            let x = a + (b - a) * (i as f64 + 0.5) / samples as f64;
            if let Ok((val, _)) = v.eval_real(x) {
                record(x, 2.0 - val.abs());
            }
            count += 1;
        }
    }
    let edge_residual = boundary_points(e)
        .iter()
        .map(|&(x, y)| v.eval_real(x).map(|p| (p.0 - y).abs()).unwrap_or(f64::INFINITY))
        .fold(0.0, f64::max);
    PotentialReport { max_violation: worst.max(0.0), worst_x, edge_residual, samples: count }
}
