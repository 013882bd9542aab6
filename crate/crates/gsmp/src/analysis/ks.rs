use std::collections::BTreeMap;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::spectral::SpectralSide;
use crate::error::{Error, Result};
use crate::flow::{flow_j_fast, FlowTrace};
use crate::gsmp::{assemble_v_of_a, lambda_iso, BlockDecomposition, GsmpWindow, VOfA};
use crate::spectral_sets::PotentialV;

/// One summand of `H_+`:
/// `1/2 {tr(v_j^T v_j + w_j^2 + v_{j+1} v_{j+1}^T) - 2(g+1) - log prod (v^{(j)}_{ll} v^{(j+1)}_{ll})^2}`.
pub fn ks_summand(v: &DMatrix<f64>, w: &DMatrix<f64>, v_next: &DMatrix<f64>, block: i64) -> Result<f64> {
    let n = v.nrows();
    let tr = v.norm_squared() + (w * w).trace() + v_next.norm_squared();
    let mut logs = 0.0;
    for (m, b) in [(v, block), (v_next, block + 1)] {
        for l in 0..n {
            let d = m[(l, l)];
            if !(d > 0.0) {
                return Err(Error::Margin { quantity: format!("v_{{{l},{l}}}"), value: d, block: b });
            }
            logs += 2.0 * d.ln();
        }
    }
    Ok(0.5 * (tr - 2.0 * n as f64 - logs))
}

/// Per-block values and running sums.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartialSums {
    pub j0: i64,
    pub values: Vec<f64>,
    pub partial: Vec<f64>,
}

impl PartialSums {
    pub fn new(j0: i64, values: Vec<f64>) -> Self {
        let partial = values
            .iter()
            .scan(0.0, |s, &x| {
                *s += x;
                Some(*s)
            })
            .collect();
        PartialSums { j0, values, partial }
    }

    pub fn total(&self) -> f64 {
        self.partial.last().copied().unwrap_or(0.0)
    }
}

/// `H_+` summands for `j` in `[a, b)` from a block decomposition that covers
/// `v_a .. v_b` and `w_a .. w_{b-1}`.
pub fn ks_functional_h_blocks(d: &BlockDecomposition, a: i64, b: i64) -> Result<PartialSums> {
    let at = |j: i64| -> Result<usize> {
        let i = j - d.j0;
        if i < 0 || i as usize >= d.v.len() {
            return Err(Error::OutOfWindow(j));
        }
        Ok(i as usize)
    };
    let vals = (a..b)
        .map(|j| ks_summand(&d.v[at(j)?], &d.w[at(j)?], &d.v[at(j + 1)?], j))
        .collect::<Result<Vec<_>>>()?;
    Ok(PartialSums::new(a, vals))
}

/// `H_+` summands for `j` in `[a, b)` read from assembled `V(A)` columns.
pub fn ks_functional_h(va: &VOfA, a: i64, b: i64) -> Result<PartialSums> {
    let vals = (a..b)
        .map(|j| ks_summand(&va.v(j)?, &va.w(j)?, &va.v(j + 1)?, j))
        .collect::<Result<Vec<_>>>()?;
    Ok(PartialSums::new(a, vals))
}

/// `delta_J H_+(A) = 1/2 ||V(JA) e_{-1}||^2 - 1 - log(V(JA)_{-g-2,-1} V(JA)_{-1,g})`
/// given the already computed `JA`.
pub fn ks_delta_from(next: &GsmpWindow, v: &PotentialV) -> Result<f64> {
    let g = next.genus() as i64;
    let va = assemble_v_of_a(next, v, -1, 0)?;
    let col = va.band_column(-1)?;
    let norm2: f64 = col.iter().map(|(_, x)| x * x).sum();
    let u1 = va.entry(-g - 2, -1)?;
    let u2 = va.entry(-1, g)?;
    for (val, blk) in [(u1, -2), (u2, 0)] {
        if !(val > 0.0) {
            return Err(Error::Margin { quantity: "v_{g,g}".into(), value: val, block: blk });
        }
    }
    Ok(0.5 * norm2 - 1.0 - (u1 * u2).ln())
}

/// `delta_J H_+(A)`, computing `JA` by the closed-form flow step.
pub fn ks_delta(w: &GsmpWindow, v: &PotentialV) -> Result<f64> {
    ks_delta_from(&flow_j_fast(w)?, v)
}

/// `||(V(A) - S^{g+1} - S^{-(g+1)}) e_n||^2`.
pub fn hs_column(va: &VOfA, n: i64) -> Result<f64> {
    let bs = va.genus() as i64 + 1;
    Ok(va
        .band_column(n)?
        .into_iter()
        .map(|(r, x)| {
            let d = if (r - n).abs() == bs { x - 1.0 } else { x };
            d * d
        })
        .sum())
}

/// Hilbert-Schmidt size of `V(A) - S^{g+1} - S^{-(g+1)}` per column block
/// `j` in `[a, b)`.
pub fn hs_residual_report(va: &VOfA, a: i64, b: i64) -> Result<PartialSums> {
    let bs = va.genus() as i64 + 1;
    let vals = (a..b)
        .map(|j| (j * bs..(j + 1) * bs).map(|n| hs_column(va, n)).sum::<Result<f64>>())
        .collect::<Result<Vec<_>>>()?;
    Ok(PartialSums::new(a, vals))
}

/// Names of the coefficient families whose square summability along the flow
/// characterizes the Killip-Simon class.
pub const FAMILY_NAMES: [&str; 5] = ["p_diff", "q_diff", "pg", "pq", "lambda"];

/// Squared family values at one iterate:
/// `sum_j (p_j^{(-1)} - p_j^{(0)})^2`, `sum_j (q_j^{(-1)} - q_j^{(0)})^2`
/// (`j < g`), `(lambda0 p_g^{(0)} - 1)^2`, `(lambda0 <p_0, q_0> + c0)^2`,
/// `sum_k (Lambda_k(p_0, q_0) - lambda_k)^2`.
pub fn coefficient_families(w: &GsmpWindow, v: &PotentialV) -> Result<[f64; 5]> {
    let g = w.genus();
    let m = w.block(-1)?;
    let z = w.block(0)?;
    let sq = |x: f64| x * x;
    let pd = (0..g).map(|j| sq(m.p[j] - z.p[j])).sum();
    let qd = (0..g).map(|j| sq(m.q[j] - z.q[j])).sum();
    let pg = sq(v.lambda0 * z.pg() - 1.0);
    let pq = sq(v.lambda0 * z.p.iter().zip(&z.q).map(|(a, b)| a * b).sum::<f64>() + v.c0);
    let poles = w.poles();
    let mut lam = 0.0;
    for k in 1..=g {
        let c = poles[k - 1];
        let lk = v
            .poles
            .iter()
            .find(|&&(_, ck)| (ck - c).abs() <= 1e-12 * (1.0 + c.abs()))
            .map(|&(l, _)| l)
            .ok_or_else(|| Error::InvalidArgument("potential poles differ from window poles".into()))?;
        lam += sq(lambda_iso(z, poles, k)? - lk);
    }
    Ok([pd, qd, pg, pq, lam])
}

/// Summary of how a partial-sum sequence grows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrowthFit {
    pub total: f64,
    /// `(S_N - S_{N-50}) / S_N` (fewer terms if the run is shorter).
    pub relative_growth_tail: f64,
    /// Every partial sum is at least its predecessor (up to `1e-15` relative).
    pub monotone: bool,
    /// Least-squares slope of `S_n` against `log n` over the second half.
    pub log_slope: f64,
}

/// Tail window for [`GrowthFit::relative_growth_tail`].
pub const GROWTH_TAIL: usize = 50;
/// Totals below this are round-off and count as zero growth.
pub const NEGLIGIBLE_TOTAL: f64 = 1e-12;
/// Relative tail growth below which a partial-sum sequence counts as bounded.
pub const BOUNDED_GROWTH: f64 = 0.01;

impl GrowthFit {
    pub fn of(partial: &[f64]) -> GrowthFit {
        let n = partial.len();
        if n == 0 {
            return GrowthFit { total: 0.0, relative_growth_tail: 0.0, monotone: true, log_slope: 0.0 };
        }
        let total = partial[n - 1];
        let k = GROWTH_TAIL.min(n - 1);
        let rel = if total.abs() > NEGLIGIBLE_TOTAL { (total - partial[n - 1 - k]) / total.abs() } else { 0.0 };
        let monotone = partial.windows(2).all(|w| w[1] >= w[0] - 1e-15 * w[0].abs().max(1e-300));
        let lo = n / 2;
        let xs: Vec<f64> = (lo..n).map(|i| ((i + 1) as f64).ln()).collect();
        let ys = &partial[lo..];
        let m = xs.len() as f64;
        let (mx, my) = (xs.iter().sum::<f64>() / m, ys.iter().sum::<f64>() / m);
        let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
        let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
        let log_slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
        GrowthFit { total, relative_growth_tail: rel, monotone, log_slope }
    }

    pub fn bounded(&self) -> bool {
        self.relative_growth_tail < BOUNDED_GROWTH
    }

    /// Monotone growth that has not flattened over the tail.
    pub fn divergent(&self) -> bool {
        self.monotone && self.relative_growth_tail >= BOUNDED_GROWTH
    }
}

/// Series along a flow run, indexed by step `n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowKsSeries {
    /// `delta_J H_+(A(n))`; its partial sums equal `H_+(A(0)) - H_+(A(n+1))`.
    pub delta: PartialSums,
    /// `||(V(A(n)) - S^{g+1} - S^{-(g+1)}) e_0||^2`.
    pub hs: PartialSums,
    /// The coefficient families, keyed by [`FAMILY_NAMES`].
    pub families: BTreeMap<String, PartialSums>,
}

impl FlowKsSeries {
    /// Growth fits of every series, keyed by name.
    pub fn growth(&self) -> BTreeMap<String, GrowthFit> {
        let mut m = BTreeMap::new();
        m.insert("delta_h_plus".to_string(), GrowthFit::of(&self.delta.partial));
        m.insert("hs_residual".to_string(), GrowthFit::of(&self.hs.partial));
        for (k, v) in &self.families {
            m.insert(k.clone(), GrowthFit::of(&v.partial));
        }
        m
    }
}

/// Computes the Killip-Simon series for steps `0 .. N - 1` of a flow trace.
pub fn ks_flow_series(trace: &FlowTrace, v: &PotentialV) -> Result<FlowKsSeries> {
    let n = trace.steps();
    let rows: Vec<Result<(f64, f64, [f64; 5])>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let a = &trace.iterates[i];
            let delta = ks_delta_from(&trace.iterates[i + 1], v)?;
            let va = assemble_v_of_a(a, v, 0, 1)?;
            let hs = hs_column(&va, 0)?;
            Ok((delta, hs, coefficient_families(a, v)?))
        })
        .collect();
    let rows = rows.into_iter().collect::<Result<Vec<_>>>()?;
    let delta = PartialSums::new(0, rows.iter().map(|r| r.0).collect());
    let hs = PartialSums::new(0, rows.iter().map(|r| r.1).collect());
    let mut families = BTreeMap::new();
    for (f, name) in FAMILY_NAMES.iter().enumerate() {
        families.insert(name.to_string(), PartialSums::new(0, rows.iter().map(|r| r.2[f]).collect()));
    }
    Ok(FlowKsSeries { delta, hs, families })
}

/// Everything the `ks-report` pipeline measures.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KsReport {
    pub genus: usize,
    pub steps: usize,
    /// `H_+` summands of the initial window over the reported block range.
    pub h_plus: PartialSums,
    /// HS residual per column block of the initial window.
    pub hs_blocks: PartialSums,
    /// Series along the flow.
    pub flow: FlowKsSeries,
    pub growth: BTreeMap<String, GrowthFit>,
    /// `|H_+(A) - H_+(JA) - delta_J H_+(A)|` on the reported range, if measured.
    pub telescoping: Option<f64>,
    pub spectral_side: Vec<SpectralSide>,
}
