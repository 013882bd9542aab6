use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gsmp::{check_gsmp_class, GsmpWindow, CLASS_MARGIN};

/// An additive change to the generating coefficients of one block.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockDelta {
    pub j: i64,
    pub dp: Vec<f64>,
    pub dq: Vec<f64>,
}

/// Perturbations of the generating sequences of a window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum Perturbation {
    #[default]
    None,
    /// Every coefficient of block `j >= 1` moves by `amplitude * j^{-exponent} * xi`
    /// with `xi` uniform in `[-1, 1]` from a seeded generator.
    PowerDecay { exponent: f64, amplitude: f64, seed: u64 },
    Custom { deltas: Vec<BlockDelta> },
}

impl Perturbation {
    /// Applies the perturbation to the stored blocks. Blocks are visited in
    /// increasing order and, within a block, `p` before `q`, so the result
    /// depends only on the seed.
    pub fn apply(&self, w: &GsmpWindow) -> Result<GsmpWindow> {
        let mut out = w.clone();
        match self {
            Perturbation::None => {}
            Perturbation::PowerDecay { exponent, amplitude, seed } => {
                if !exponent.is_finite() || !amplitude.is_finite() {
                    return Err(Error::InvalidArgument("non-finite perturbation parameters".into()));
                }
                let mut rng = ChaCha8Rng::seed_from_u64(*seed);
                for j in 1.max(w.lo())..w.hi() {
                    let s = amplitude * (j as f64).powf(-exponent);
                    let b = out.block_mut(j)?;
                    for x in b.p.iter_mut().chain(b.q.iter_mut()) {
                        *x += s * rng.random_range(-1.0..=1.0);
                    }
                }
            }
            Perturbation::Custom { deltas } => {
                for d in deltas {
                    let b = out.block_mut(d.j)?;
                    if d.dp.len() != b.p.len() || d.dq.len() != b.q.len() {
                        return Err(Error::Dimension(format!("delta for block {} has wrong length", d.j)));
                    }
                    b.p.iter_mut().zip(&d.dp).for_each(|(x, y)| *x += y);
                    b.q.iter_mut().zip(&d.dq).for_each(|(x, y)| *x += y);
                }
            }
        }
        Ok(out)
    }

    /// Applies the perturbation and requires the result to stay in the class.
    pub fn apply_certified(&self, w: &GsmpWindow) -> Result<GsmpWindow> {
        let out = self.apply(w)?;
        let r = check_gsmp_class(&out, CLASS_MARGIN);
        if !r.certified {
            return Err(Error::Margin {
                quantity: "Lambda#".into(),
                value: r.min_lambda_sharp.min(r.min_pg),
                block: r.argmin.map(|a| a.0).unwrap_or(r.argmin_pg),
            });
        }
        Ok(out)
    }
}
