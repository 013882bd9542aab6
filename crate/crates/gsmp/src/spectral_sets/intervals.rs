use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A finite system of intervals `E = [b0, a0] \ U (a_j, b_j)`.
///
/// The gaps are open, sorted and pairwise disjoint. The genus is the
/// number of gaps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawIntervals", into = "RawIntervals")]
pub struct IntervalSystem {
    b0: f64,
    a0: f64,
    gaps: Vec<(f64, f64)>,
}

#[derive(Serialize, Deserialize)]
struct RawIntervals {
    outer: [f64; 2],
    #[serde(default)]
    gaps: Vec<[f64; 2]>,
}

impl TryFrom<RawIntervals> for IntervalSystem {
    type Error = Error;
    fn try_from(raw: RawIntervals) -> Result<Self> {
        let gaps: Vec<(f64, f64)> = raw.gaps.iter().map(|g| (g[0], g[1])).collect();
        IntervalSystem::new(raw.outer[0], raw.outer[1], &gaps)
    }
}

impl From<IntervalSystem> for RawIntervals {
    fn from(e: IntervalSystem) -> Self {
        RawIntervals {
            outer: [e.b0, e.a0],
            gaps: e.gaps.iter().map(|&(a, b)| [a, b]).collect(),
        }
    }
}

impl IntervalSystem {
    /// Builds a system from its outer interval and a list of gaps in any order.
    pub fn new(b0: f64, a0: f64, gaps: &[(f64, f64)]) -> Result<Self> {
        if !b0.is_finite() || !a0.is_finite() {
            return Err(Error::InvalidIntervals("non-finite outer edge".into()));
        }
        if b0 >= a0 {
            return Err(Error::InvalidIntervals(format!(
                "empty outer interval [{b0}, {a0}]"
            )));
        }
        let mut gaps = gaps.to_vec();
        for &(a, b) in &gaps {
            if !a.is_finite() || !b.is_finite() {
                return Err(Error::InvalidIntervals("non-finite gap edge".into()));
            }
            if a >= b {
                return Err(Error::InvalidIntervals(format!("unordered gap ({a}, {b})")));
            }
            if a <= b0 || b >= a0 {
                return Err(Error::InvalidIntervals(format!(
                    "gap ({a}, {b}) not inside ({b0}, {a0})"
                )));
            }
        }
        gaps.sort_by(|x, y| x.0.total_cmp(&y.0));
        for w in gaps.windows(2) {
            if w[0].1 >= w[1].0 {
                return Err(Error::InvalidIntervals(format!(
                    "overlapping gaps ({}, {}) and ({}, {})",
                    w[0].0, w[0].1, w[1].0, w[1].1
                )));
            }
        }
        Ok(IntervalSystem { b0, a0, gaps })
    }

    /// Builds a system from the bands (closed components) of `E`.
    pub fn from_bands(bands: &[(f64, f64)]) -> Result<Self> {
        if bands.is_empty() {
            return Err(Error::InvalidIntervals("no bands".into()));
        }
        let mut bands = bands.to_vec();
        bands.sort_by(|x, y| x.0.total_cmp(&y.0));
        let gaps: Vec<(f64, f64)> = bands.windows(2).map(|w| (w[0].1, w[1].0)).collect();
        for &(l, r) in &bands {
            if !(l < r) {
                return Err(Error::InvalidIntervals(format!("empty band [{l}, {r}]")));
            }
        }
        IntervalSystem::new(bands[0].0, bands[bands.len() - 1].1, &gaps)
    }

    pub fn b0(&self) -> f64 {
        self.b0
    }

    pub fn a0(&self) -> f64 {
        self.a0
    }

    pub fn gaps(&self) -> &[(f64, f64)] {
        &self.gaps
    }

    pub fn genus(&self) -> usize {
        self.gaps.len()
    }

    /// Bands `[b0, a1], [b1, a2], ..., [b_g, a0]`, left to right.
    pub fn bands(&self) -> Vec<(f64, f64)> {
        let mut out = Vec::with_capacity(self.genus() + 1);
        let mut left = self.b0;
        for &(a, b) in &self.gaps {
            out.push((left, a));
            left = b;
        }
        out.push((left, self.a0));
        out
    }

    /// All band edges in increasing order.
    pub fn edges(&self) -> Vec<f64> {
        self.bands().iter().flat_map(|&(l, r)| [l, r]).collect()
    }

    /// Total length of `E`.
    pub fn measure(&self) -> f64 {
        self.bands().iter().map(|&(l, r)| r - l).sum()
    }

    pub fn contains(&self, x: f64) -> bool {
        self.bands().iter().any(|&(l, r)| l <= x && x <= r)
    }

    /// Distance from `x` to `E` (zero on `E`).
    pub fn dist(&self, x: f64) -> f64 {
        self.bands()
            .iter()
            .map(|&(l, r)| {
                if x < l {
                    l - x
                } else if x > r {
                    x - r
                } else {
                    0.0
                }
            })
            .fold(f64::INFINITY, f64::min)
    }

    /// Distance from `x` to the complement of `E` (zero off `E`).
    pub fn dist_to_complement(&self, x: f64) -> f64 {
        self.bands()
            .iter()
            .filter(|&&(l, r)| l <= x && x <= r)
            .map(|&(l, r)| (x - l).min(r - x))
            .fold(0.0, f64::max)
    }

    /// The same system translated by `t`.
    pub fn translated(&self, t: f64) -> IntervalSystem {
        IntervalSystem {
            b0: self.b0 + t,
            a0: self.a0 + t,
            gaps: self.gaps.iter().map(|&(a, b)| (a + t, b + t)).collect(),
        }
    }
}

/// Validates raw input where the first pair is the outer interval and the
/// remaining pairs are gaps.
pub fn validate_interval_system(raw: &[(f64, f64)]) -> Result<IntervalSystem> {
    match raw.split_first() {
        None => Err(Error::InvalidIntervals("empty input".into())),
        Some((&(b0, a0), gaps)) => IntervalSystem::new(b0, a0, gaps),
    }
}
