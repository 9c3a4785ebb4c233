//! Loss evaluators: softmax cross-entropy, its tightness/contrast split, the
//! text-regularized few-shot objective, the unlabeled pseudo-label term and
//! their combination.
//!
//! All sample sums are means over the set they run over. Codes and labels are
//! row-simplex matrices (one row per sample, one column per class).

use ndarray::{Array2, ArrayView2, Axis, Zip};
use serde::{Deserialize, Serialize};

use crate::data::{EmbeddingMatrix, PrototypeMatrix, SupportSet, UnlabeledSet};
use crate::error::{Error, Result};
use crate::zeroshot::{logits, Temperature};

/// How the per-class weights λ^T_c (text penalty) and λ^U_c (unlabeled term) are chosen.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum LambdaPolicy {
    /// λ^T_c = 1/K_c and λ^U_c = 2λ^T_c.
    ///
    /// A class with K_c = 0 has both weights infinite; it is represented by the
    /// limit objective divided by λ^T_c, i.e. weights (1, 2). Its supervised term
    /// vanishes, so the text anchor and the unlabeled term remain.
    #[default]
    Adaptive,
    Fixed { text: Vec<f64>, unlabeled: Vec<f64> },
}

/// Resolved per-class weights.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassWeights {
    pub text: Vec<f64>,
    pub unlabeled: Vec<f64>,
    /// True when the unlabeled coefficient of the prototype update is exactly 1/(|U|τ).
    pub adaptive: bool,
}

impl LambdaPolicy {
    /// Uniform fixed weights for every class.
    pub fn fixed_uniform(classes: usize, text: f64, unlabeled: f64) -> Self {
        LambdaPolicy::Fixed {
            text: vec![text; classes],
            unlabeled: vec![unlabeled; classes],
        }
    }

    pub fn validate(&self, classes: usize) -> Result<()> {
        match self {
            LambdaPolicy::Adaptive => Ok(()),
            LambdaPolicy::Fixed { text, unlabeled } => {
                if text.len() != classes || unlabeled.len() != classes {
                    return Err(Error::Config(format!(
                        "fixed lambdas need {classes} entries, got {} and {}",
                        text.len(),
                        unlabeled.len()
                    )));
                }
                if text.iter().any(|x| !x.is_finite() || *x <= 0.0) {
                    return Err(Error::Config("fixed text lambdas must be positive and finite".into()));
                }
                if unlabeled.iter().any(|x| !x.is_finite() || *x < 0.0) {
                    return Err(Error::Config(
                        "fixed unlabeled lambdas must be nonnegative and finite".into(),
                    ));
                }
                Ok(())
            }
        }
    }

    pub fn resolve(&self, class_counts: &[usize]) -> Result<ClassWeights> {
        self.validate(class_counts.len())?;
        Ok(match self {
            LambdaPolicy::Adaptive => {
                let text: Vec<f64> = class_counts
                    .iter()
                    .map(|&k| if k == 0 { 1.0 } else { 1.0 / k as f64 })
                    .collect();
                let unlabeled = text.iter().map(|l| 2.0 * l).collect();
                ClassWeights {
                    text,
                    unlabeled,
                    adaptive: true,
                }
            }
            LambdaPolicy::Fixed { text, unlabeled } => ClassWeights {
                text: text.clone(),
                unlabeled: unlabeled.clone(),
                adaptive: false,
            },
        })
    }
}

/// Decomposed value of the combined objective.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ObjectiveValue {
    pub total: f64,
    /// Mean supervised tightness.
    pub fewshot_term: f64,
    pub text_penalty_term: f64,
    /// λ^U-weighted unlabeled tightness.
    pub unlabeled_term: f64,
}

fn check_codes(codes: ArrayView2<'_, f64>, rows: usize, classes: usize) -> Result<()> {
    if codes.dim() != (rows, classes) {
        return Err(Error::Shape(format!(
            "codes are {:?}, expected ({rows}, {classes})",
            codes.dim()
        )));
    }
    Ok(())
}

fn check_prototypes(w: &PrototypeMatrix, t: &PrototypeMatrix) -> Result<()> {
    if w.view().dim() != t.view().dim() {
        return Err(Error::Shape(format!(
            "prototypes {:?} vs text prototypes {:?}",
            w.view().dim(),
            t.view().dim()
        )));
    }
    Ok(())
}

/// Per-class sums Σ_i −codes_{i,c}·logit_{i,c}, not yet averaged.
fn tightness_per_class(codes: ArrayView2<'_, f64>, logits: ArrayView2<'_, f64>) -> Vec<f64> {
    let mut out = vec![0.0; codes.ncols()];
    Zip::from(codes.rows()).and(logits.rows()).for_each(|z, s| {
        for c in 0..z.len() {
            out[c] -= z[c] * s[c];
        }
    });
    out
}

/// Mean over rows of H^t(y_i, W) = −Σ_c y_{i,c} v_i·w_c/τ.
pub fn eval_tightness(
    codes: ArrayView2<'_, f64>,
    v: &EmbeddingMatrix,
    w: &PrototypeMatrix,
    tau: Temperature,
) -> Result<f64> {
    check_codes(codes, v.rows(), w.class_count())?;
    if v.rows() == 0 {
        return Ok(0.0);
    }
    let s = logits(v.view(), w.view(), tau)?;
    Ok(tightness_per_class(codes, s.view()).iter().sum::<f64>() / v.rows() as f64)
}

fn log_sum_exp(row: impl Iterator<Item = f64> + Clone) -> f64 {
    let max = row.clone().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    max + row.map(|x| (x - max).exp()).sum::<f64>().ln()
}

/// Mean over samples of ln Σ_j exp(v_i·w_j/τ).
pub fn eval_contrast(v: &EmbeddingMatrix, w: &PrototypeMatrix, tau: Temperature) -> Result<f64> {
    if v.rows() == 0 {
        return Ok(0.0);
    }
    let s = logits(v.view(), w.view(), tau)?;
    let total: f64 = s.axis_iter(Axis(0)).map(|row| log_sum_exp(row.iter().copied())).sum();
    Ok(total / v.rows() as f64)
}

/// Mean softmax cross-entropy −Σ_c y_{i,c} ln p_{i,c}, using log-softmax directly.
pub fn eval_ce(
    labels: ArrayView2<'_, f64>,
    v: &EmbeddingMatrix,
    w: &PrototypeMatrix,
    tau: Temperature,
) -> Result<f64> {
    check_codes(labels, v.rows(), w.class_count())?;
    if v.rows() == 0 {
        return Ok(0.0);
    }
    let s = logits(v.view(), w.view(), tau)?;
    let mut total = 0.0;
    for (y, row) in labels.rows().into_iter().zip(s.rows()) {
        let lse = log_sum_exp(row.iter().copied());
        for (yc, sc) in y.iter().zip(row.iter()) {
            if *yc != 0.0 {
                total -= yc * (sc - lse);
            }
        }
    }
    Ok(total / v.rows() as f64)
}

fn text_penalty(w: &PrototypeMatrix, t: &PrototypeMatrix, weights: &[f64]) -> f64 {
    w.view()
        .rows()
        .into_iter()
        .zip(t.view().rows())
        .zip(weights)
        .map(|((wc, tc), l)| {
            let d = &wc - &tc;
            l * d.dot(&d)
        })
        .sum()
}

/// (1/|S|)Σ_i H^t(y_i, W) + Σ_c λ^T_c‖w_c − t_c‖².
pub fn eval_fewshot_objective(
    support: &SupportSet,
    w: &PrototypeMatrix,
    t: &PrototypeMatrix,
    tau: Temperature,
    lambdas: &LambdaPolicy,
) -> Result<f64> {
    check_prototypes(w, t)?;
    let weights = lambdas.resolve(&support.class_counts())?;
    let tight = eval_tightness(support.one_hot().view(), support.embeddings(), w, tau)?;
    Ok(tight + text_penalty(w, t, &weights.text))
}

/// (1/|U|)Σ_i H^t(z_i, W), unweighted. Zero for an empty set.
pub fn eval_unlabeled_objective(
    unlabeled: &UnlabeledSet,
    codes: ArrayView2<'_, f64>,
    w: &PrototypeMatrix,
    tau: Temperature,
) -> Result<f64> {
    eval_tightness(codes, unlabeled.embeddings(), w, tau)
}

/// L_FEW-SHOT(W) + Σ_c λ^U_c (1/|U|)Σ_i −z_{i,c} v_i·w_c/τ.
pub fn eval_semi_objective(
    support: &SupportSet,
    unlabeled: &UnlabeledSet,
    codes: ArrayView2<'_, f64>,
    w: &PrototypeMatrix,
    t: &PrototypeMatrix,
    tau: Temperature,
    lambdas: &LambdaPolicy,
) -> Result<ObjectiveValue> {
    check_prototypes(w, t)?;
    check_codes(codes, unlabeled.len(), w.class_count())?;
    let weights = lambdas.resolve(&support.class_counts())?;
    let support_logits = logits(support.embeddings().view(), w.view(), tau)?;
    let unlabeled_logits = logits(unlabeled.embeddings().view(), w.view(), tau)?;
    Ok(semi_value(
        support.one_hot().view(),
        support_logits.view(),
        codes,
        unlabeled_logits.view(),
        w,
        t,
        &weights,
    ))
}

/// Combined objective from precomputed logits (support N×C, unlabeled M×C).
pub(crate) fn semi_value(
    labels: ArrayView2<'_, f64>,
    support_logits: ArrayView2<'_, f64>,
    codes: ArrayView2<'_, f64>,
    unlabeled_logits: ArrayView2<'_, f64>,
    w: &PrototypeMatrix,
    t: &PrototypeMatrix,
    weights: &ClassWeights,
) -> ObjectiveValue {
    let n = labels.nrows() as f64;
    let fewshot_term = tightness_per_class(labels, support_logits).iter().sum::<f64>() / n;
    let text_penalty_term = text_penalty(w, t, &weights.text);
    let unlabeled_term = if codes.nrows() == 0 {
        0.0
    } else {
        let m = codes.nrows() as f64;
        tightness_per_class(codes, unlabeled_logits)
            .iter()
            .zip(&weights.unlabeled)
            .map(|(sum, l)| l * sum / m)
            .sum()
    };
    ObjectiveValue {
        total: fewshot_term + text_penalty_term + unlabeled_term,
        fewshot_term,
        text_penalty_term,
        unlabeled_term,
    }
}

/// Analytic gradient of the combined objective w.r.t. W (C×D).
pub fn semi_gradient(
    support: &SupportSet,
    unlabeled: &UnlabeledSet,
    codes: ArrayView2<'_, f64>,
    w: &PrototypeMatrix,
    t: &PrototypeMatrix,
    tau: Temperature,
    lambdas: &LambdaPolicy,
) -> Result<Array2<f64>> {
    check_prototypes(w, t)?;
    check_codes(codes, unlabeled.len(), w.class_count())?;
    let weights = lambdas.resolve(&support.class_counts())?;
    let tau = tau.get();
    let n = support.len() as f64;
    // −(1/(Nτ)) Yᵀ V
    let mut grad = support.one_hot().t().dot(&support.embeddings().view()) * (-1.0 / (n * tau));
    if !unlabeled.is_empty() {
        let m = unlabeled.len() as f64;
        let zv = codes.t().dot(&unlabeled.embeddings().view());
        for (c, mut g) in grad.axis_iter_mut(Axis(0)).enumerate() {
            g.scaled_add(-weights.unlabeled[c] / (m * tau), &zv.row(c));
        }
    }
    for (c, mut g) in grad.axis_iter_mut(Axis(0)).enumerate() {
        let d = &w.row(c) - &t.row(c);
        g.scaled_add(2.0 * weights.text[c], &d);
    }
    Ok(grad)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::array;

    fn unit(values: Array2<f64>) -> EmbeddingMatrix {
        EmbeddingMatrix::new(values).unwrap()
    }

    #[test]
    fn tightness_identity() {
        let tau = Temperature::new(0.5).unwrap();
        let v = unit(array![[1.0, 0.0]]);
        // v·w_0 = τ
        let w = PrototypeMatrix::new(array![[0.5, 0.0], [0.0, 3.0]]).unwrap();
        let y = array![[1.0, 0.0]];
        assert_abs_diff_eq!(eval_tightness(y.view(), &v, &w, tau).unwrap(), -1.0, epsilon = 1e-15);
        let zero = PrototypeMatrix::new(Array2::zeros((2, 2))).unwrap();
        assert_eq!(eval_tightness(y.view(), &v, &zero, tau).unwrap(), 0.0);
    }

    #[test]
    fn contrast_edge_cases() {
        let tau = Temperature::new(1.0).unwrap();
        let v = unit(array![[1.0, 0.0], [0.0, 1.0]]);
        let w1 = PrototypeMatrix::new(array![[2.0, 3.0]]).unwrap();
        assert_abs_diff_eq!(eval_contrast(&v, &w1, tau).unwrap(), 2.5, epsilon = 1e-15);
        let w0 = PrototypeMatrix::new(Array2::zeros((4, 2))).unwrap();
        assert_abs_diff_eq!(eval_contrast(&v, &w0, tau).unwrap(), 4f64.ln(), epsilon = 1e-15);
    }

    #[test]
    fn ce_closed_form() {
        let tau = Temperature::new(1.0).unwrap();
        let v = unit(array![[1.0, 0.0]]);
        let w = PrototypeMatrix::new(array![[1.0, 0.0], [0.0, 1.0]]).unwrap();
        let ce = eval_ce(array![[1.0, 0.0]].view(), &v, &w, tau).unwrap();
        assert_abs_diff_eq!(ce, (1.0 + (-1f64).exp()).ln(), epsilon = 1e-15);
        assert_abs_diff_eq!(ce, 0.31326, epsilon = 1e-5);
        let uniform = PrototypeMatrix::new(Array2::zeros((3, 2))).unwrap();
        let ce = eval_ce(array![[0.0, 1.0, 0.0]].view(), &v, &uniform, tau).unwrap();
        assert_abs_diff_eq!(ce, 3f64.ln(), epsilon = 1e-15);
    }

    #[test]
    fn fewshot_single_sample() {
        let tau = Temperature::new(0.1).unwrap();
        let v = unit(array![[0.6, 0.8]]);
        let s = SupportSet::new(v, vec![0], 1).unwrap();
        let w = PrototypeMatrix::new(array![[1.0, 2.0]]).unwrap();
        let t = PrototypeMatrix::new(array![[0.0, 1.0]]).unwrap();
        let policy = LambdaPolicy::fixed_uniform(1, 1.0, 0.0);
        let got = eval_fewshot_objective(&s, &w, &t, tau, &policy).unwrap();
        let expected = -(0.6 * 1.0 + 0.8 * 2.0) / 0.1 + (1.0 + 1.0);
        assert_abs_diff_eq!(got, expected, epsilon = 1e-12);
        // W = T: no penalty
        let got = eval_fewshot_objective(&s, &t, &t, tau, &policy).unwrap();
        assert_abs_diff_eq!(got, -0.8 / 0.1, epsilon = 1e-12);
    }

    #[test]
    fn negative_fixed_lambda_is_config_error() {
        let s = SupportSet::new(unit(array![[1.0, 0.0]]), vec![0], 1).unwrap();
        let w = PrototypeMatrix::new(array![[1.0, 0.0]]).unwrap();
        let policy = LambdaPolicy::fixed_uniform(1, -1.0, 0.0);
        assert!(matches!(
            eval_fewshot_objective(&s, &w, &w, Temperature::DEFAULT, &policy),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn unlabeled_edge_cases() {
        let tau = Temperature::new(1.0).unwrap();
        let w = PrototypeMatrix::new(Array2::zeros((2, 2))).unwrap();
        let u = UnlabeledSet::new(unit(array![[1.0, 0.0], [0.0, 1.0]]));
        let z = Array2::from_elem((2, 2), 0.5);
        assert_eq!(eval_unlabeled_objective(&u, z.view(), &w, tau).unwrap(), 0.0);
        let empty = UnlabeledSet::empty(2);
        assert_eq!(
            eval_unlabeled_objective(&empty, Array2::zeros((0, 2)).view(), &w, tau).unwrap(),
            0.0
        );
    }

    #[test]
    fn adaptive_weights() {
        let w = LambdaPolicy::Adaptive.resolve(&[1, 4, 0]).unwrap();
        assert_eq!(w.text, vec![1.0, 0.25, 1.0]);
        assert_eq!(w.unlabeled, vec![2.0, 0.5, 2.0]);
        assert!(w.adaptive);
    }

    #[test]
    fn semi_reduces_without_unlabeled_weight() {
        let tau = Temperature::new(0.2).unwrap();
        let s = SupportSet::new(unit(array![[1.0, 0.0], [0.0, 1.0]]), vec![0, 1], 2).unwrap();
        let u = UnlabeledSet::new(unit(array![[1.0, 1.0]]));
        let w = PrototypeMatrix::new(array![[1.0, 0.5], [0.2, 1.0]]).unwrap();
        let t = PrototypeMatrix::new(array![[1.0, 0.0], [0.0, 1.0]]).unwrap();
        let policy = LambdaPolicy::fixed_uniform(2, 0.7, 0.0);
        let z = array![[0.3, 0.7]];
        let semi = eval_semi_objective(&s, &u, z.view(), &w, &t, tau, &policy).unwrap();
        let few = eval_fewshot_objective(&s, &w, &t, tau, &policy).unwrap();
        assert_abs_diff_eq!(semi.total, few, epsilon = 1e-12);
        assert_eq!(semi.unlabeled_term, 0.0);
    }
}
