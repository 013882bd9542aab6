//! Periodic GSMP matrices with prescribed spectrum: points of the isospectral
//! surface `p_g = 1/lambda0`, `q_g = -c0 - lambda0 sum_{j<g} p_j q_j`,
//! `Lambda_k(p, q) = lambda_k`.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gsmp::{
    check_gsmp_class, fiber_magic_check, lambda_iso, lambda_iso_grad, theta_grid, GsmpBlockPair,
    GsmpWindow, CLASS_MARGIN,
};
use crate::spectral_sets::PotentialV;

/// A point of the isospectral surface with its largest equation residual.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IsoPoint {
    pub p: Vec<f64>,
    pub q: Vec<f64>,
    pub residual: f64,
}

impl IsoPoint {
    pub fn pair(&self) -> GsmpBlockPair {
        GsmpBlockPair { p: self.p.clone(), q: self.q.clone() }
    }

    pub fn genus(&self) -> usize {
        self.p.len() - 1
    }
}

fn check_genus(pair: &GsmpBlockPair, v: &PotentialV) -> Result<()> {
    if pair.genus() != v.genus() {
        return Err(Error::Dimension(format!(
            "pair of genus {} for a potential of genus {}",
            pair.genus(),
            v.genus()
        )));
    }
    if !(v.lambda0 > 0.0) {
        return Err(Error::InvalidArgument("lambda0 must be positive".into()));
    }
    Ok(())
}

/// `q_g` forced by the surface equations for given `p_0..p_{g-1}`, `q_0..q_{g-1}`.
fn forced_qg(pair: &GsmpBlockPair, v: &PotentialV) -> f64 {
    let g = pair.genus();
    let s: f64 = (0..g).map(|j| pair.p[j] * pair.q[j]).sum();
    -v.c0 - v.lambda0 * s
}

/// Residuals `(p_g - 1/lambda0, q_g + c0 + lambda0 sum p_j q_j, Lambda_1 - lambda_1, ...)`.
pub fn iso_residuals(pair: &GsmpBlockPair, v: &PotentialV) -> Result<Vec<f64>> {
    check_genus(pair, v)?;
    let poles = v.pole_positions();
    let mut r = Vec::with_capacity(v.genus() + 2);
    r.push(pair.pg() - 1.0 / v.lambda0);
    r.push(pair.qg() - forced_qg(pair, v));
    for (k, &(lk, _)) in v.poles.iter().enumerate() {
        r.push(lambda_iso(pair, &poles, k + 1)? - lk);
    }
    Ok(r)
}

fn max_abs(r: &[f64]) -> f64 {
    r.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum JacobianMode {
    Analytic,
    FiniteDifference,
}

/// Jacobian of `(Lambda_1..Lambda_g)` in the free coordinates
/// `(p_0..p_{g-1}, q_0..q_{g-1})` at fixed `p_g`, `q_g`.
#[derive(Debug, Clone, PartialEq)]
pub struct IsoJacobian {
    pub matrix: DMatrix<f64>,
}

impl IsoJacobian {
    /// Spectral norm.
    pub fn norm(&self) -> f64 {
        if self.matrix.is_empty() {
            return 0.0;
        }
        self.matrix.singular_values().max()
    }

    /// Columns `0..g` (derivatives in `p`).
    pub fn dp(&self) -> DMatrix<f64> {
        let g = self.matrix.nrows();
        self.matrix.columns(0, g).into_owned()
    }

    /// Columns `g..2g` (derivatives in `q`).
    pub fn dq(&self) -> DMatrix<f64> {
        let g = self.matrix.nrows();
        self.matrix.columns(g, g).into_owned()
    }
}

pub fn iso_jacobian(pair: &GsmpBlockPair, v: &PotentialV, mode: JacobianMode) -> Result<IsoJacobian> {
    check_genus(pair, v)?;
    let g = v.genus();
    let poles = v.pole_positions();
    let mut m = DMatrix::zeros(g, 2 * g);
    match mode {
        JacobianMode::Analytic => {
            for k in 1..=g {
                let (_, gp, gq) = lambda_iso_grad(pair, &poles, k)?;
                for j in 0..g {
                    m[(k - 1, j)] = gp[j];
                    m[(k - 1, g + j)] = gq[j];
                }
            }
        }
        JacobianMode::FiniteDifference => {
            for col in 0..2 * g {
                let (idx, is_q) = if col < g { (col, false) } else { (col - g, true) };
                let x = if is_q { pair.q[idx] } else { pair.p[idx] };
                let h = 1e-6 * (1.0 + x.abs());
                let mut plus = pair.clone();
                let mut minus = pair.clone();
                if is_q {
                    plus.q[idx] += h;
                    minus.q[idx] -= h;
                } else {
                    plus.p[idx] += h;
                    minus.p[idx] -= h;
                }
                for k in 1..=g {
                    let d = (lambda_iso(&plus, &poles, k)? - lambda_iso(&minus, &poles, k)?) / (2.0 * h);
                    m[(k - 1, col)] = d;
                }
            }
        }
    }
    if m.iter().any(|x| !x.is_finite()) {
        return Err(Error::AtPole(f64::NAN));
    }
    Ok(IsoJacobian { matrix: m })
}

/// Which coordinates select the point on the torus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Pin {
    /// Fix `q_0..q_{g-1}`; solve for `p_0..p_{g-1}`.
    Q(Vec<f64>),
    /// Fix `p_0..p_{g-1}`; solve for `q_0..q_{g-1}`.
    P(Vec<f64>),
}

/// Pinned coordinates plus a starting guess for the free ones.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IsoSeed {
    pub pin: Pin,
    pub guess: Vec<f64>,
}

impl IsoSeed {
    /// Pin `q_0..q_{g-1}` and start the `p`'s at `guess`.
    pub fn pin_q(q: Vec<f64>, guess: Vec<f64>) -> Self {
        IsoSeed { pin: Pin::Q(q), guess }
    }

    pub fn pin_p(p: Vec<f64>, guess: Vec<f64>) -> Self {
        IsoSeed { pin: Pin::P(p), guess }
    }
}

/// The surface point with `q_0 = ... = q_{g-1} = 0`:
/// `p_{k-1} = sqrt(lambda_k / lambda0)`, `p_g = 1/lambda0`, `q_g = -c0`.
pub fn base_point(v: &PotentialV) -> Result<IsoPoint> {
    if !(v.lambda0 > 0.0) {
        return Err(Error::InvalidArgument("lambda0 must be positive".into()));
    }
    let g = v.genus();
    let mut p: Vec<f64> = v.poles.iter().map(|&(l, _)| (l / v.lambda0).sqrt()).collect();
    p.push(1.0 / v.lambda0);
    let mut q = vec![0.0; g];
    q.push(-v.c0);
    let pair = GsmpBlockPair::new(p, q)?;
    let residual = max_abs(&iso_residuals(&pair, v)?);
    Ok(IsoPoint { p: pair.p, q: pair.q, residual })
}

/// Completes free coordinates into a pair: `p_g`, `q_g` from the surface equations.
fn complete(v: &PotentialV, pin: &Pin, free: &[f64]) -> GsmpBlockPair {
    let (mut p, mut q) = match pin {
        Pin::Q(q) => (free.to_vec(), q.clone()),
        Pin::P(p) => (p.clone(), free.to_vec()),
    };
    p.push(1.0 / v.lambda0);
    q.push(0.0);
    let mut pair = GsmpBlockPair { p, q };
    let qg = forced_qg(&pair, v);
    *pair.q.last_mut().expect("nonempty") = qg;
    pair
}

/// Jacobian of `Lambda_k - lambda_k` in the free coordinates, including the
/// dependence through the forced `q_g`.
fn reduced_jacobian(pair: &GsmpBlockPair, v: &PotentialV, pin: &Pin) -> Result<DMatrix<f64>> {
    let g = v.genus();
    let poles = v.pole_positions();
    let mut m = DMatrix::zeros(g, g);
    for k in 1..=g {
        let (_, gp, gq) = lambda_iso_grad(pair, &poles, k)?;
        for j in 0..g {
            // d q_g / d p_j = -lambda0 q_j, d q_g / d q_j = -lambda0 p_j
            m[(k - 1, j)] = match pin {
                Pin::Q(_) => gp[j] - v.lambda0 * pair.q[j] * gq[g],
                Pin::P(_) => gq[j] - v.lambda0 * pair.p[j] * gq[g],
            };
        }
    }
    Ok(m)
}

fn lambda_residual(pair: &GsmpBlockPair, v: &PotentialV) -> Result<DVector<f64>> {
    let poles = v.pole_positions();
    let mut r = DVector::zeros(v.genus());
    for (k, &(lk, _)) in v.poles.iter().enumerate() {
        r[k] = lambda_iso(pair, &poles, k + 1)? - lk;
    }
    Ok(r)
}

/// Flips `(p_j, q_j) -> (-p_j, -q_j)` for every `j < g` with `p_j < 0`.
fn normalize_signs(pair: &mut GsmpBlockPair) {
    let g = pair.genus();
    for j in 0..g {
        if pair.p[j] < 0.0 {
            pair.p[j] = -pair.p[j];
            pair.q[j] = -pair.q[j];
        }
    }
}

fn newton(v: &PotentialV, pin: &Pin, guess: &[f64], tol: f64, max_iter: usize) -> Result<GsmpBlockPair> {
    let g = v.genus();
    let pinned = match pin {
        Pin::Q(x) | Pin::P(x) => x,
    };
    if pinned.len() != g || guess.len() != g {
        return Err(Error::Dimension(format!(
            "pin of length {} and guess of length {} for genus {g}",
            pinned.len(),
            guess.len()
        )));
    }
    let mut x = DVector::from_column_slice(guess);
    let mut pair = complete(v, pin, x.as_slice());
    let mut r = lambda_residual(&pair, v)?;
    let mut rn = r.amax();
    for _ in 0..max_iter {
        if rn <= tol {
            return Ok(pair);
        }
        let jac = reduced_jacobian(&pair, v, pin)?;
        let step = jac
            .clone()
            .lu()
            .solve(&(-&r))
            .filter(|s| s.iter().all(|x| x.is_finite()))
            .ok_or_else(|| Error::Singular("surface Jacobian in the chosen chart".into()))?;
        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..40 {
            let xt = &x + &step * t;
            let pt = complete(v, pin, xt.as_slice());
            if let Ok(rt) = lambda_residual(&pt, v) {
                let rtn = rt.amax();
                if rtn.is_finite() && rtn < rn {
                    x = xt;
                    pair = pt;
                    r = rt;
                    rn = rtn;
                    accepted = true;
                    break;
                }
            }
            t *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    if rn <= tol {
        Ok(pair)
    } else {
        Err(Error::NoConvergence { iterations: max_iter, residual: rn })
    }
}

fn certify(v: &PotentialV, pair: GsmpBlockPair) -> Result<IsoPoint> {
    let poles = v.pole_positions();
    let lmin = (1..=v.genus())
        .map(|k| lambda_iso(&pair, &poles, k))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .fold(f64::INFINITY, f64::min);
    if v.genus() > 0 && !(lmin > CLASS_MARGIN) {
        return Err(Error::Margin { quantity: "Lambda_k".into(), value: lmin, block: 0 });
    }
    if !(pair.pg() > 0.0) {
        return Err(Error::Margin { quantity: "p_g".into(), value: pair.pg(), block: 0 });
    }
    let residual = max_abs(&iso_residuals(&pair, v)?);
    Ok(IsoPoint { p: pair.p, q: pair.q, residual })
}

/// Newton iteration on the surface equations with `g` coordinates pinned.
///
/// If the chosen chart is singular or fails to converge, the other chart is
/// tried with the roles of `p` and `q` exchanged, starting from the last
/// pinned values. The output is sign-normalized (`p_j >= 0` for `j < g`).
pub fn solve_iso_point(v: &PotentialV, seed: &IsoSeed, tol: f64, max_iter: usize) -> Result<IsoPoint> {
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument(format!("tol = {tol} must be positive")));
    }
    if !(v.lambda0 > 0.0) {
        return Err(Error::InvalidArgument("lambda0 must be positive".into()));
    }
    let first = newton(v, &seed.pin, &seed.guess, tol, max_iter);
    let pair = match first {
        Ok(p) => p,
        Err(Error::Dimension(e)) => return Err(Error::Dimension(e)),
        Err(e) => {
            let swapped = match &seed.pin {
                Pin::Q(q) => IsoSeed::pin_p(seed.guess.clone(), q.clone()),
                Pin::P(p) => IsoSeed::pin_q(seed.guess.clone(), p.clone()),
            };
            newton(v, &swapped.pin, &swapped.guess, tol, max_iter).map_err(|_| e)?
        }
    };
    let mut pair = pair;
    normalize_signs(&mut pair);
    certify(v, pair)
}

/// Result of a torus sweep: certified points and the failures that were skipped.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TorusSample {
    pub points: Vec<IsoPoint>,
    /// Largest fiber deviation from the magic formula per point.
    pub magic_deviation: Vec<f64>,
    /// Smallest `Lambda_k` per point.
    pub margin: Vec<f64>,
    pub failures: Vec<String>,
}

const SWEEP_STEP: f64 = 0.25;
const FIBER_TOL: f64 = 1e-9;

struct Chain {
    points: Vec<GsmpBlockPair>,
    failure: Option<String>,
}

/// Continues the `q`-chart along the ray `t d`, `t = SWEEP_STEP, 2 SWEEP_STEP, ...`,
/// halving the step on failure, until `len` points or failure.
fn run_chain(v: &PotentialV, start: &GsmpBlockPair, d: &[f64], len: usize, tol: f64) -> Chain {
    let g = v.genus();
    let mut points = Vec::new();
    let mut cur = start.clone();
    let mut t = 0.0;
    let mut target = SWEEP_STEP;
    while points.len() < len {
        let mut h = target - t;
        let mut reached = None;
        while h > SWEEP_STEP / 64.0 {
            let q: Vec<f64> = d.iter().map(|x| (t + h) * x).collect();
            match newton(v, &Pin::Q(q), &cur.p[..g], tol, 50) {
                Ok(pair) if pair.p[..g].iter().all(|x| x.abs() > 1e-3) => {
                    reached = Some(pair);
                    break;
                }
                _ => h *= 0.5,
            }
        }
        match reached {
            Some(pair) => {
                t += h;
                cur = pair;
                if (t - target).abs() < 1e-12 {
                    points.push(cur.clone());
                    target += SWEEP_STEP;
                }
            }
            None => {
                let q = d.iter().map(|x| x * t).collect::<Vec<_>>();
                return Chain {
                    points,
                    failure: Some(format!("chart continuation stopped at q = {q:?}")),
                };
            }
        }
    }
    Chain { points, failure: None }
}

/// Samples `count` certified points of the isospectral torus.
///
/// Starts at the `q = 0` point and continues the `q`-chart along `2g` rays
/// (`+-` each coordinate axis for `g = 1`, seeded random directions and their
/// negatives otherwise); chains run in parallel and their points are
/// interleaved round-robin. Each point is certified by the fiber form of the
/// magic formula on a 64-point phase grid.
pub fn sample_torus(v: &PotentialV, count: usize, seed: u64, tol: f64) -> Result<TorusSample> {
    if count == 0 {
        return Err(Error::InvalidArgument("sample count must be positive".into()));
    }
    let g = v.genus();
    let base = base_point(v)?;
    let base_pair = base.pair();
    let mut candidates = vec![base_pair.clone()];
    let mut failures = Vec::new();
    if g == 0 {
        candidates = vec![base_pair; count];
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut dirs: Vec<Vec<f64>> = Vec::new();
        for _ in 0..g {
            let d: Vec<f64> = if g == 1 {
                vec![1.0]
            } else {
                let raw: Vec<f64> = (0..g).map(|_| rng.random_range(-1.0..1.0)).collect();
                let n = raw.iter().map(|x| x * x).sum::<f64>().sqrt().max(1e-12);
                raw.iter().map(|x| x / n).collect()
            };
            dirs.push(d.iter().map(|x| -x).collect());
            dirs.push(d);
        }
        let chains: Vec<Chain> = dirs
            .par_iter()
            .map(|d| run_chain(v, &base_pair, d, count - 1, tol))
            .collect();
        let longest = chains.iter().map(|c| c.points.len()).max().unwrap_or(0);
        'outer: for i in 0..longest {
            for c in &chains {
                if candidates.len() >= count {
                    break 'outer;
                }
                if let Some(p) = c.points.get(i) {
                    candidates.push(p.clone());
                }
            }
        }
        failures.extend(chains.into_iter().filter_map(|c| c.failure));
    }
    let poles = v.pole_positions();
    let grid = theta_grid(64);
    let mut out = TorusSample { points: vec![], magic_deviation: vec![], margin: vec![], failures };
    for mut pair in candidates {
        normalize_signs(&mut pair);
        let point = match certify(v, pair.clone()) {
            Ok(p) => p,
            Err(e) => {
                out.failures.push(e.to_string());
                continue;
            }
        };
        let dev = fiber_magic_check(&pair, &poles, v, &grid)?;
        if !(dev < FIBER_TOL) {
            out.failures.push(format!("fiber deviation {dev:e} at p = {:?}", pair.p));
            continue;
        }
        let margin = (1..=g)
            .map(|k| lambda_iso(&pair, &poles, k))
            .collect::<Result<Vec<_>>>()?
            .into_iter()
            .fold(f64::INFINITY, f64::min);
        out.points.push(point);
        out.magic_deviation.push(dev);
        out.margin.push(margin);
    }
    Ok(out)
}

/// Constant-block window `p_j = p`, `q_j = q` for `j` in `[-half_width, half_width)`.
pub fn build_periodic(point: &IsoPoint, v: &PotentialV, half_width: usize) -> Result<GsmpWindow> {
    let w = GsmpWindow::constant(&point.pair(), &v.pole_positions(), half_width)?;
    let report = check_gsmp_class(&w, CLASS_MARGIN);
    if !report.certified {
        return Err(Error::Margin {
            quantity: "Lambda#".into(),
            value: report.min_lambda_sharp.min(report.min_pg),
            block: report.argmin.map(|a| a.0).unwrap_or(report.argmin_pg),
        });
    }
    Ok(w)
}
