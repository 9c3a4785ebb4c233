//! Text-prototype ensembling and temperature-scaled softmax over prototype similarities.

use ndarray::{Array2, ArrayView2, ArrayView3, Axis};
use serde::{Deserialize, Serialize};

use crate::data::{EmbeddingMatrix, PrototypeMatrix, MIN_ROW_NORM};
use crate::error::{Error, Result};

/// Softmax temperature τ.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct Temperature(f64);

impl Temperature {
    /// Typical pre-trained contrastive temperature (logit scale 100).
    pub const DEFAULT: Temperature = Temperature(0.01);

    pub fn new(tau: f64) -> Result<Self> {
        if tau.is_finite() && tau > 0.0 {
            Ok(Self(tau))
        } else {
            Err(Error::Config(format!("temperature must be positive and finite, got {tau}")))
        }
    }

    pub fn get(self) -> f64 {
        self.0
    }
}

impl Default for Temperature {
    fn default() -> Self {
        Self::DEFAULT
    }
}

impl TryFrom<f64> for Temperature {
    type Error = Error;

    fn try_from(value: f64) -> Result<Self> {
        Self::new(value)
    }
}

impl From<Temperature> for f64 {
    fn from(t: Temperature) -> f64 {
        t.0
    }
}

/// N×C matrix whose rows lie on the probability simplex.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbabilityMatrix(Array2<f64>);

impl ProbabilityMatrix {
    pub fn view(&self) -> ArrayView2<'_, f64> {
        self.0.view()
    }

    pub fn into_inner(self) -> Array2<f64> {
        self.0
    }
}

/// Averages the J template embeddings of every class and re-normalizes the mean.
pub fn ensemble_text_prototypes(templates: ArrayView3<'_, f64>) -> Result<PrototypeMatrix> {
    let (classes, j, dim) = templates.dim();
    if j == 0 {
        return Err(Error::Empty("no templates per class".into()));
    }
    if templates.iter().any(|x| !x.is_finite()) {
        return Err(Error::Data("non-finite template embedding".into()));
    }
    let mut out = Array2::zeros((classes, dim));
    for (c, block) in templates.axis_iter(Axis(0)).enumerate() {
        let mean = block.mean_axis(Axis(0)).expect("j >= 1");
        let norm = mean.dot(&mean).sqrt();
        if norm < MIN_ROW_NORM {
            return Err(Error::Data(format!(
                "class {c}: template mean has norm {norm:e}; degenerate prototype"
            )));
        }
        out.row_mut(c).assign(&(mean / norm));
    }
    PrototypeMatrix::new(out)
}

/// Logits v_i·w_c/τ as an N×C matrix.
pub fn logits(v: ArrayView2<'_, f64>, w: ArrayView2<'_, f64>, tau: Temperature) -> Result<Array2<f64>> {
    if v.ncols() != w.ncols() {
        return Err(Error::Shape(format!(
            "embedding dim {} != prototype dim {}",
            v.ncols(),
            w.ncols()
        )));
    }
    Ok(v.dot(&w.t()) / tau.get())
}

/// Row-wise softmax with max subtraction, in place.
pub(crate) fn softmax_rows(logits: &mut Array2<f64>) -> Result<()> {
    for mut row in logits.axis_iter_mut(Axis(0)) {
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if !max.is_finite() {
            return Err(Error::Numeric("non-finite logit".into()));
        }
        row.mapv_inplace(|x| (x - max).exp());
        let sum = row.sum();
        row.mapv_inplace(|x| x / sum);
    }
    Ok(())
}

/// p_{i,c} = exp(v_i·w_c/τ) / Σ_j exp(v_i·w_j/τ).
pub fn predict_probs(v: &EmbeddingMatrix, w: &PrototypeMatrix, tau: Temperature) -> Result<ProbabilityMatrix> {
    let mut z = logits(v.view(), w.view(), tau)?;
    if z.iter().any(|x| !x.is_finite()) {
        return Err(Error::Numeric("non-finite logit".into()));
    }
    softmax_rows(&mut z)?;
    Ok(ProbabilityMatrix(z))
}

/// Row-wise argmax; ties go to the lowest class index.
pub fn predict_labels(probs: &ProbabilityMatrix) -> Vec<usize> {
    argmax_rows(probs.view())
}

pub(crate) fn argmax_rows(scores: ArrayView2<'_, f64>) -> Vec<usize> {
    scores
        .axis_iter(Axis(0))
        .map(|row| {
            let mut best = 0;
            for (c, &x) in row.iter().enumerate() {
                if x > row[best] {
                    best = c;
                }
            }
            best
        })
        .collect()
}

/// Labels from prototypes directly, skipping the softmax (same argmax).
pub fn classify(v: &EmbeddingMatrix, w: &PrototypeMatrix) -> Result<Vec<usize>> {
    if v.dim() != w.dim() {
        return Err(Error::Shape(format!("embedding dim {} != prototype dim {}", v.dim(), w.dim())));
    }
    Ok(argmax_rows(v.view().dot(&w.view().t()).view()))
}
