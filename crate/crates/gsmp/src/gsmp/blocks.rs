use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::BandSym;

/// Generating coefficients `(p, q)` of one block, each of length `g + 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GsmpBlockPair {
    pub p: Vec<f64>,
    pub q: Vec<f64>,
}

impl GsmpBlockPair {
    pub fn new(p: Vec<f64>, q: Vec<f64>) -> Result<Self> {
        if p.is_empty() || p.len() != q.len() {
            return Err(Error::Dimension(format!(
                "p has length {}, q has length {}",
                p.len(),
                q.len()
            )));
        }
        if p.iter().chain(&q).any(|x| !x.is_finite()) {
            return Err(Error::InvalidArgument("non-finite coefficient".into()));
        }
        Ok(GsmpBlockPair { p, q })
    }

    pub fn genus(&self) -> usize {
        self.p.len() - 1
    }

    /// Last entry `p_g`, which must be positive.
    pub fn pg(&self) -> f64 {
        self.p[self.p.len() - 1]
    }

    pub fn qg(&self) -> f64 {
        self.q[self.q.len() - 1]
    }

    pub fn p_norm(&self) -> f64 {
        self.p.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    pub(crate) fn check_poles(&self, poles: &[f64]) -> Result<()> {
        if poles.len() != self.genus() {
            return Err(Error::Dimension(format!(
                "{} poles for a genus {} block",
                poles.len(),
                self.genus()
            )));
        }
        Ok(())
    }
}

/// Entry `(i, j)` of `B(p, q)`: `q_i p_j` on and above the diagonal,
/// `p_i q_j` below it, plus `c_{i+1}` on the diagonal for `i < g`.
#[inline]
pub(crate) fn b_entry(pair: &GsmpBlockPair, poles: &[f64], i: usize, j: usize) -> f64 {
    let base = if i <= j { pair.q[i] * pair.p[j] } else { pair.p[i] * pair.q[j] };
    if i == j && i < poles.len() {
        base + poles[i]
    } else {
        base
    }
}

/// The blocks `A(p) = e_g p^T` and `B(p, q)`.
pub fn build_blocks(pair: &GsmpBlockPair, poles: &[f64]) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    pair.check_poles(poles)?;
    let n = pair.p.len();
    let mut a = DMatrix::zeros(n, n);
    for j in 0..n {
        a[(n - 1, j)] = pair.p[j];
    }
    let b = DMatrix::from_fn(n, n, |i, j| b_entry(pair, poles, i, j));
    Ok((a, b))
}

/// A finite two-sided window of generating coefficients.
///
/// Blocks are stored for indices `lo .. lo + blocks.len()`. The trusted range
/// is the sub-range whose blocks are exact for the infinite matrix the window
/// represents; operations that read neighbours shrink it.
#[derive(Debug, Clone, PartialEq)]
pub struct GsmpWindow {
    poles: Vec<f64>,
    lo: i64,
    blocks: Vec<GsmpBlockPair>,
    trusted: (i64, i64),
}

#[derive(Serialize, Deserialize)]
struct RawBlock {
    j: i64,
    p: Vec<f64>,
    q: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct RawWindow {
    poles: Vec<f64>,
    blocks: Vec<RawBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    trusted: Option<[i64; 2]>,
}

impl Serialize for GsmpWindow {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        RawWindow {
            poles: self.poles.clone(),
            blocks: self
                .iter()
                .map(|(j, b)| RawBlock { j, p: b.p.clone(), q: b.q.clone() })
                .collect(),
            trusted: Some([self.trusted.0, self.trusted.1]),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for GsmpWindow {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let mut raw = RawWindow::deserialize(d)?;
        raw.blocks.sort_by_key(|b| b.j);
        let lo = raw.blocks.first().map(|b| b.j).unwrap_or(0);
        for (i, b) in raw.blocks.iter().enumerate() {
            if b.j != lo + i as i64 {
                return Err(serde::de::Error::custom("block indices must be contiguous"));
            }
        }
        let blocks = raw
            .blocks
            .into_iter()
            .map(|b| GsmpBlockPair::new(b.p, b.q))
            .collect::<Result<Vec<_>>>()
            .map_err(serde::de::Error::custom)?;
        let mut w = GsmpWindow::new(raw.poles, lo, blocks).map_err(serde::de::Error::custom)?;
        if let Some([a, b]) = raw.trusted {
            w = w.with_trusted(a, b).map_err(serde::de::Error::custom)?;
        }
        Ok(w)
    }
}

impl GsmpWindow {
    /// A window whose blocks are stored for `lo .. lo + blocks.len()`, all trusted.
    pub fn new(poles: Vec<f64>, lo: i64, blocks: Vec<GsmpBlockPair>) -> Result<Self> {
        if blocks.is_empty() {
            return Err(Error::InvalidArgument("empty window".into()));
        }
        for b in &blocks {
            b.check_poles(&poles)?;
        }
        let mut sorted = poles.clone();
        sorted.sort_by(f64::total_cmp);
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidArgument("poles must be distinct".into()));
        }
        let hi = lo + blocks.len() as i64;
        Ok(GsmpWindow { poles, lo, blocks, trusted: (lo, hi) })
    }

    /// Constant-block window on `[-half_width, half_width)`.
    pub fn constant(pair: &GsmpBlockPair, poles: &[f64], half_width: usize) -> Result<Self> {
        let n = 2 * half_width.max(1);
        GsmpWindow::new(poles.to_vec(), -(half_width.max(1) as i64), vec![pair.clone(); n])
    }

    /// Restricts the trusted range to `[a, b)`, which must lie inside the stored range.
    pub fn with_trusted(mut self, a: i64, b: i64) -> Result<Self> {
        if a < self.lo || b > self.hi() || a > b {
            return Err(Error::InvalidArgument(format!(
                "trusted range [{a}, {b}) outside stored [{}, {})",
                self.lo,
                self.hi()
            )));
        }
        self.trusted = (a, b);
        Ok(self)
    }

    pub fn genus(&self) -> usize {
        self.poles.len()
    }

    pub fn block_size(&self) -> usize {
        self.poles.len() + 1
    }

    pub fn poles(&self) -> &[f64] {
        &self.poles
    }

    /// First stored block index.
    pub fn lo(&self) -> i64 {
        self.lo
    }

    /// One past the last stored block index.
    pub fn hi(&self) -> i64 {
        self.lo + self.blocks.len() as i64
    }

    pub fn trusted(&self) -> (i64, i64) {
        self.trusted
    }

    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    pub fn contains(&self, j: i64) -> bool {
        j >= self.lo && j < self.hi()
    }

    pub fn block(&self, j: i64) -> Result<&GsmpBlockPair> {
        if !self.contains(j) {
            return Err(Error::OutOfWindow(j));
        }
        Ok(&self.blocks[(j - self.lo) as usize])
    }

    pub fn block_mut(&mut self, j: i64) -> Result<&mut GsmpBlockPair> {
        if !self.contains(j) {
            return Err(Error::OutOfWindow(j));
        }
        Ok(&mut self.blocks[(j - self.lo) as usize])
    }

    pub fn blocks(&self) -> &[GsmpBlockPair] {
        &self.blocks
    }

    /// Iterates over `(j, block)` pairs in increasing `j`.
    pub fn iter(&self) -> impl Iterator<Item = (i64, &GsmpBlockPair)> {
        self.blocks.iter().enumerate().map(move |(i, b)| (self.lo + i as i64, b))
    }

    /// Scalar index of entry `i` of block `j`.
    pub fn scalar(&self, j: i64, i: usize) -> i64 {
        j * self.block_size() as i64 + i as i64
    }

    /// Block index and position of a scalar index.
    pub fn split_scalar(&self, n: i64) -> (i64, usize) {
        let b = self.block_size() as i64;
        (n.div_euclid(b), n.rem_euclid(b) as usize)
    }

    /// Scalar matrix entry `A[m, n]`, or `None` if it needs a block outside the window.
    pub fn entry(&self, m: i64, n: i64) -> Option<f64> {
        let (jm, im) = self.split_scalar(m);
        let (jn, in_) = self.split_scalar(n);
        let g = self.genus();
        if jm == jn {
            Some(b_entry(self.block(jm).ok()?, &self.poles, im, in_))
        } else if jn == jm + 1 {
            if im == g {
                Some(self.block(jn).ok()?.p[in_])
            } else {
                Some(0.0)
            }
        } else if jm == jn + 1 {
            if in_ == g {
                Some(self.block(jm).ok()?.p[im])
            } else {
                Some(0.0)
            }
        } else {
            Some(0.0)
        }
    }

    /// Sub-window on `[a, b)` with the trusted range intersected.
    pub fn slice(&self, a: i64, b: i64) -> Result<GsmpWindow> {
        if a < self.lo || b > self.hi() || a >= b {
            return Err(Error::InvalidArgument(format!(
                "slice [{a}, {b}) outside stored [{}, {})",
                self.lo,
                self.hi()
            )));
        }
        let blocks = self.blocks[(a - self.lo) as usize..(b - self.lo) as usize].to_vec();
        let mut w = GsmpWindow::new(self.poles.clone(), a, blocks)?;
        let t0 = self.trusted.0.max(a);
        let t1 = self.trusted.1.min(b).max(t0);
        w.trusted = (t0, t1);
        Ok(w)
    }
}

/// Assembles the banded symmetric matrix on blocks `[j0, j1)`.
///
/// Diagonal blocks are `B(p_j, q_j)`, the block `(j, j+1)` is `A(p_{j+1})`.
/// The coupling of block `j0` to block `j0 - 1` is dropped.
pub fn assemble_window(w: &GsmpWindow, j0: i64, j1: i64) -> Result<BandSym> {
    if j0 >= j1 {
        return Err(Error::InvalidArgument(format!("empty block range [{j0}, {j1})")));
    }
    if !w.contains(j0) {
        return Err(Error::OutOfWindow(j0));
    }
    if !w.contains(j1 - 1) {
        return Err(Error::OutOfWindow(j1 - 1));
    }
    let b = w.block_size();
    let g = w.genus();
    let n = (j1 - j0) as usize * b;
    let mut m = BandSym::zeros(n, b, w.scalar(j0, 0));
    for j in j0..j1 {
        let pair = w.block(j)?;
        let base = (j - j0) as usize * b;
        for i in 0..b {
            for k in 0..=i {
                m.set(base + i, base + k, b_entry(pair, w.poles(), i, k));
            }
        }
        if j > j0 {
            for k in 0..b {
                m.set(base + k, base - b + g, pair.p[k]);
            }
        }
    }
    Ok(m)
}
