//! Multinomial logistic regression standing in for the detector.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::acquisition::ProposalScores;
use crate::error::{Error, Result};
use crate::similarity::{DenseMatrix, EmbeddingBag};

// Gradient partial sums are formed per fixed-size chunk and added in chunk
// order, so training is bit-identical for any thread count.
const GRAD_CHUNK: usize = 256;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SurrogateConfig {
    pub epochs: usize,
    pub step_size: f64,
    /// L2 penalty on the weights (not the bias).
    pub weight_decay: f64,
    /// Std of the Gaussian weight initialization.
    pub init_scale: f64,
    pub seed: u64,
}

impl Default for SurrogateConfig {
    fn default() -> Self {
        Self {
            epochs: 100,
            step_size: 0.05,
            weight_decay: 0.05,
            init_scale: 0.01,
            seed: 0,
        }
    }
}

impl SurrogateConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.step_size > 0.0 && self.step_size.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "step_size must be positive, got {}",
                self.step_size
            )));
        }
        if !(self.weight_decay >= 0.0 && self.init_scale >= 0.0) {
            return Err(Error::InvalidConfig(
                "weight_decay and init_scale must be nonnegative".into(),
            ));
        }
        Ok(())
    }
}

/// Which vectors feed the similarity kernels during the loop.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EmbeddingSource {
    /// Region feature vectors as generated.
    #[default]
    Raw,
    /// The surrogate's class logits per region; drifts as the model retrains.
    Logits,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurrogateModel {
    classes: usize,
    dim: usize,
    /// `classes x dim`, row-major.
    weights: Vec<f64>,
    bias: Vec<f64>,
}

fn softmax_in_place(z: &mut [f64]) {
    let m = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut s = 0.0;
    for v in z.iter_mut() {
        *v = (*v - m).exp();
        s += *v;
    }
    z.iter_mut().for_each(|v| *v /= s);
}

impl SurrogateModel {
    pub fn zeros(classes: usize, dim: usize) -> Self {
        Self {
            classes,
            dim,
            weights: vec![0.0; classes * dim],
            bias: vec![0.0; classes],
        }
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn bias(&self) -> &[f64] {
        &self.bias
    }

    pub fn logits(&self, x: &[f32]) -> Vec<f64> {
        self.weights
            .chunks_exact(self.dim)
            .zip(&self.bias)
            .map(|(w, b)| b + w.iter().zip(x).map(|(w, &x)| w * x as f64).sum::<f64>())
            .collect()
    }

    pub fn probs(&self, x: &[f32]) -> Vec<f64> {
        let mut z = self.logits(x);
        softmax_in_place(&mut z);
        z
    }

    /// Arg-max class; ties go to the lower class.
    pub fn predict(&self, x: &[f32]) -> usize {
        let z = self.logits(x);
        (0..z.len()).fold(0, |b, c| if z[c] > z[b] { c } else { b })
    }
}

/// Fits the classifier by full-batch gradient descent from a fresh,
/// seeded initialization. The bias starts at the smoothed log class priors.
pub fn train_surrogate(
    features: &DenseMatrix,
    labels: &[usize],
    n_classes: usize,
    cfg: &SurrogateConfig,
) -> Result<SurrogateModel> {
    cfg.validate()?;
    let n = features.rows();
    if n == 0 {
        return Err(Error::EmptyLabeledSet);
    }
    if labels.len() != n {
        return Err(Error::DimMismatch {
            expected: n,
            found: labels.len(),
        });
    }
    if let Some(&bad) = labels.iter().find(|&&y| y >= n_classes) {
        return Err(Error::IndexOutOfRange {
            index: bad,
            size: n_classes,
        });
    }
    let (c, d) = (n_classes, features.cols());

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let init = Normal::new(0.0, cfg.init_scale)
        .map_err(|e| Error::InvalidConfig(format!("init_scale: {e}")))?;
    let mut model = SurrogateModel {
        classes: c,
        dim: d,
        weights: (0..c * d).map(|_| init.sample(&mut rng)).collect(),
        bias: vec![0.0; c],
    };
    let mut counts = vec![0usize; c];
    labels.iter().for_each(|&y| counts[y] += 1);
    for (b, &k) in model.bias.iter_mut().zip(&counts) {
        *b = ((k as f64 + 0.01) / (n as f64 + 0.01 * c as f64)).ln();
    }

    let inv_n = 1.0 / n as f64;
    for _ in 0..cfg.epochs {
        let partials: Vec<(Vec<f64>, Vec<f64>)> = (0..n)
            .collect::<Vec<_>>()
            .par_chunks(GRAD_CHUNK)
            .map(|chunk| {
                let mut gw = vec![0.0; c * d];
                let mut gb = vec![0.0; c];
                for &i in chunk {
                    let x = features.row(i);
                    let mut p = model.logits(x);
                    softmax_in_place(&mut p);
                    p[labels[i]] -= 1.0;
                    for (k, &e) in p.iter().enumerate() {
                        gb[k] += e;
                        let row = &mut gw[k * d..(k + 1) * d];
                        for (g, &xv) in row.iter_mut().zip(x) {
                            *g += e * xv as f64;
                        }
                    }
                }
                (gw, gb)
            })
            .collect();
        let mut gw = vec![0.0; c * d];
        let mut gb = vec![0.0; c];
        for (pw, pb) in &partials {
            gw.iter_mut().zip(pw).for_each(|(a, b)| *a += b);
            gb.iter_mut().zip(pb).for_each(|(a, b)| *a += b);
        }
        for (w, g) in model.weights.iter_mut().zip(&gw) {
            *w -= cfg.step_size * (g * inv_n + cfg.weight_decay * *w);
        }
        for (b, g) in model.bias.iter_mut().zip(&gb) {
            *b -= cfg.step_size * g * inv_n;
        }
    }
    Ok(model)
}

/// Per-region class probabilities for one image.
pub fn predict_proposal_probs(model: &SurrogateModel, bag: &EmbeddingBag) -> Result<ProposalScores> {
    if bag.dim() != model.dim {
        return Err(Error::DimMismatch {
            expected: model.dim,
            found: bag.dim(),
        });
    }
    let probs: Vec<f64> = bag.iter_rows().flat_map(|x| model.probs(x)).collect();
    ProposalScores::new(bag.rows(), model.classes, probs)
}

/// Replaces each region vector by its logits.
pub fn logit_bag(model: &SurrogateModel, bag: &EmbeddingBag) -> Result<EmbeddingBag> {
    if bag.dim() != model.dim {
        return Err(Error::DimMismatch {
            expected: model.dim,
            found: bag.dim(),
        });
    }
    let data: Vec<f32> = bag
        .iter_rows()
        .flat_map(|x| model.logits(x).into_iter().map(|v| v as f32))
        .collect();
    EmbeddingBag::new(bag.rows(), model.classes, data)
}
