//! Pseudo-label assignment as entropy-regularized optimal transport.
//!
//! The kernel is Q⁽⁰⁾ = exp(S)/Σexp(S) over the C×M similarity matrix S. Sinkhorn-Knopp
//! alternates
//!
//! ```text
//! r ← m ⊘ (Q⁽⁰⁾ c)        c ← u ⊘ (Q⁽⁰⁾ᵀ r)        c⁽⁰⁾ = 1, u = 1/M
//! ```
//!
//! and returns Q* = Diag(r) Q⁽⁰⁾ Diag(c). The scaling vectors are carried as
//! logarithms: with logits v·w/τ in the thousands a column of Q⁽⁰⁾ can underflow
//! entirely even after max subtraction, while its log stays exact.

use ndarray::{Array1, Array2, ArrayView2, Axis};

use crate::data::{EmbeddingMatrix, LabelMarginal, PrototypeMatrix};
use crate::error::{Error, Result};
use crate::zeroshot::Temperature;

/// C×M matrix of v_i·w_c/τ over the unlabeled set.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityMatrix(Array2<f64>);

impl SimilarityMatrix {
    pub fn new(values: Array2<f64>) -> Result<Self> {
        if values.iter().any(|x| !x.is_finite()) {
            return Err(Error::Numeric("non-finite similarity".into()));
        }
        Ok(Self(values))
    }

    pub fn from_prototypes(unlabeled: &EmbeddingMatrix, w: &PrototypeMatrix, tau: Temperature) -> Result<Self> {
        if unlabeled.dim() != w.dim() {
            return Err(Error::Shape(format!(
                "unlabeled dim {} != prototype dim {}",
                unlabeled.dim(),
                w.dim()
            )));
        }
        Self::new(w.view().dot(&unlabeled.view().t()) / tau.get())
    }

    pub fn view(&self) -> ArrayView2<'_, f64> {
        self.0.view()
    }

    pub fn classes(&self) -> usize {
        self.0.nrows()
    }

    pub fn samples(&self) -> usize {
        self.0.ncols()
    }
}

/// The initial plan Q⁽⁰⁾, stored as log Q⁽⁰⁾ = S − logsumexp(S).
#[derive(Debug, Clone, PartialEq)]
pub struct InitialPlan {
    log_values: Array2<f64>,
}

impl InitialPlan {
    pub fn log_values(&self) -> ArrayView2<'_, f64> {
        self.log_values.view()
    }

    /// Dense Q⁽⁰⁾; entries far below the maximum may underflow to zero.
    pub fn values(&self) -> Array2<f64> {
        self.log_values.mapv(f64::exp)
    }

    pub fn classes(&self) -> usize {
        self.log_values.nrows()
    }

    pub fn samples(&self) -> usize {
        self.log_values.ncols()
    }
}

/// Q⁽⁰⁾ = exp(S − max S) / Σ exp(S − max S).
pub fn init_plan(s: &SimilarityMatrix) -> InitialPlan {
    let max = s.0.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        // empty similarity matrix
        return InitialPlan {
            log_values: s.0.clone(),
        };
    }
    let log_total = max + s.0.iter().map(|x| (x - max).exp()).sum::<f64>().ln();
    InitialPlan {
        log_values: s.0.mapv(|x| x - log_total),
    }
}

/// Scaling vectors r (length C) and c (length M), stored as logarithms.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalingVectors {
    pub log_r: Array1<f64>,
    pub log_c: Array1<f64>,
}

impl ScalingVectors {
    pub fn r(&self) -> Array1<f64> {
        self.log_r.mapv(f64::exp)
    }

    pub fn c(&self) -> Array1<f64> {
        self.log_c.mapv(f64::exp)
    }
}

/// A C×M plan with column sums 1/M.
#[derive(Debug, Clone, PartialEq)]
pub struct TransportPlan {
    values: Array2<f64>,
    row_marginal: LabelMarginal,
    scaling: ScalingVectors,
    iterations: usize,
    residual: f64,
}

impl TransportPlan {
    pub fn values(&self) -> ArrayView2<'_, f64> {
        self.values.view()
    }

    pub fn row_marginal(&self) -> &LabelMarginal {
        &self.row_marginal
    }

    pub fn scaling(&self) -> &ScalingVectors {
        &self.scaling
    }

    pub fn iterations(&self) -> usize {
        self.iterations
    }

    /// L1 distance between the row sums and the target marginal.
    pub fn residual(&self) -> f64 {
        self.residual
    }

    /// Total column mass (1 for a non-empty plan).
    pub fn col_total(&self) -> f64 {
        self.values.sum()
    }

    /// tr(Qᵀ S).
    pub fn linear_objective(&self, s: &SimilarityMatrix) -> f64 {
        (&self.values * &s.0).sum()
    }
}

/// Runs `iters` Sinkhorn-Knopp iterations from `q0` towards row marginal `m`.
///
/// With `iters == 0` only the column scaling is applied: each column becomes the
/// softmax of the corresponding column of S, scaled to mass 1/M, and the row
/// constraint is not enforced. Entries of `m` may be zero, which empties the
/// corresponding row.
pub fn sinkhorn(q0: &InitialPlan, m: &LabelMarginal, iters: usize) -> Result<TransportPlan> {
    let mut state = SinkhornState::new(q0, m)?;
    for _ in 0..iters {
        state.step()?;
    }
    if iters == 0 {
        state.column_step()?;
    }
    Ok(state.plan())
}

/// Scaling iterations in the log domain, one r-update and one c-update per step.
#[derive(Debug, Clone)]
pub struct SinkhornState<'a> {
    kernel: &'a Array2<f64>,
    marginal: LabelMarginal,
    log_m: Array1<f64>,
    log_u: f64,
    log_r: Array1<f64>,
    log_c: Array1<f64>,
    iterations: usize,
}

impl<'a> SinkhornState<'a> {
    /// Starts from r = 1, c = 1.
    pub fn new(q0: &'a InitialPlan, m: &LabelMarginal) -> Result<Self> {
        let (classes, samples) = q0.log_values.dim();
        if m.len() != classes {
            return Err(Error::Shape(format!(
                "marginal has {} classes, plan has {classes}",
                m.len()
            )));
        }
        if samples == 0 {
            return Err(Error::Empty("transport plan has no columns".into()));
        }
        Ok(Self {
            kernel: &q0.log_values,
            marginal: m.clone(),
            log_m: m.as_array().mapv(f64::ln),
            log_u: -(samples as f64).ln(),
            log_r: Array1::zeros(classes),
            log_c: Array1::zeros(samples),
            iterations: 0,
        })
    }

    /// r ← m ⊘ (Q⁽⁰⁾c), then c ← u ⊘ (Q⁽⁰⁾ᵀr).
    pub fn step(&mut self) -> Result<()> {
        row_lse(self.kernel, &self.log_c, &mut self.log_r);
        for (lr, lm) in self.log_r.iter_mut().zip(self.log_m.iter()) {
            *lr = if *lm == f64::NEG_INFINITY { f64::NEG_INFINITY } else { lm - *lr };
        }
        if let Some(c) = self
            .log_r
            .iter()
            .zip(self.log_m.iter())
            .position(|(r, lm)| lm.is_finite() && !r.is_finite())
        {
            return Err(Error::DegeneratePlan(format!("row {c} of the kernel is numerically zero")));
        }
        self.column_step()?;
        self.iterations += 1;
        Ok(())
    }

    /// c ← u ⊘ (Q⁽⁰⁾ᵀr) alone.
    pub fn column_step(&mut self) -> Result<()> {
        col_update(self.kernel, &self.log_r, self.log_u, &mut self.log_c)
    }

    pub fn iterations(&self) -> usize {
        self.iterations
    }

    /// The current plan Diag(r) Q⁽⁰⁾ Diag(c).
    pub fn plan(&self) -> TransportPlan {
        let mut values = self.kernel.clone();
        for (mut row, lr) in values.axis_iter_mut(Axis(0)).zip(self.log_r.iter()) {
            for (q, lc) in row.iter_mut().zip(self.log_c.iter()) {
                *q = (*q + lr + lc).exp();
            }
        }
        let residual = l1_row_residual(values.view(), &self.marginal);
        TransportPlan {
            values,
            row_marginal: self.marginal.clone(),
            scaling: ScalingVectors {
                log_r: self.log_r.clone(),
                log_c: self.log_c.clone(),
            },
            iterations: self.iterations,
            residual,
        }
    }
}

/// out_c = log Σ_i exp(K_ci + log_c_i)
fn row_lse(kernel: &Array2<f64>, log_c: &Array1<f64>, out: &mut Array1<f64>) {
    for (row, o) in kernel.axis_iter(Axis(0)).zip(out.iter_mut()) {
        let max = row
            .iter()
            .zip(log_c.iter())
            .map(|(k, c)| k + c)
            .fold(f64::NEG_INFINITY, f64::max);
        *o = if max.is_finite() {
            max + row
                .iter()
                .zip(log_c.iter())
                .map(|(k, c)| (k + c - max).exp())
                .sum::<f64>()
                .ln()
        } else {
            max
        };
    }
}

/// log_c_i = log u − log Σ_c exp(K_ci + log_r_c)
fn col_update(kernel: &Array2<f64>, log_r: &Array1<f64>, log_u: f64, log_c: &mut Array1<f64>) -> Result<()> {
    let samples = kernel.ncols();
    let mut max = vec![f64::NEG_INFINITY; samples];
    for (row, lr) in kernel.axis_iter(Axis(0)).zip(log_r.iter()) {
        if *lr == f64::NEG_INFINITY {
            continue;
        }
        for (mx, k) in max.iter_mut().zip(row.iter()) {
            *mx = mx.max(k + lr);
        }
    }
    if let Some(i) = max.iter().position(|x| !x.is_finite()) {
        return Err(Error::DegeneratePlan(format!("column {i} of the kernel is numerically zero")));
    }
    let mut acc = vec![0.0; samples];
    for (row, lr) in kernel.axis_iter(Axis(0)).zip(log_r.iter()) {
        if *lr == f64::NEG_INFINITY {
            continue;
        }
        for ((a, k), mx) in acc.iter_mut().zip(row.iter()).zip(max.iter()) {
            *a += (k + lr - mx).exp();
        }
    }
    for ((lc, a), mx) in log_c.iter_mut().zip(acc).zip(max) {
        *lc = log_u - (mx + a.ln());
    }
    Ok(())
}

fn l1_row_residual(values: ArrayView2<'_, f64>, m: &LabelMarginal) -> f64 {
    values
        .sum_axis(Axis(1))
        .iter()
        .zip(m.as_array().iter())
        .map(|(a, b)| (a - b).abs())
        .sum()
}

/// L1 distance between the row sums of `plan` and `m`.
pub fn marginal_residual(plan: &TransportPlan, m: &LabelMarginal) -> f64 {
    l1_row_residual(plan.values(), m)
}

/// Soft codes z_i: column i of the plan renormalized to sum 1. Returns an M×C matrix.
pub fn extract_pseudolabels(plan: &TransportPlan) -> Result<Array2<f64>> {
    let mut z = plan.values.t().to_owned();
    for (i, mut row) in z.axis_iter_mut(Axis(0)).enumerate() {
        let sum = row.sum();
        if !sum.is_finite() || sum <= 0.0 {
            return Err(Error::DegeneratePlan(format!("column {i} has mass {sum}")));
        }
        row.mapv_inplace(|x| x / sum);
    }
    Ok(z)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::array;

    fn plan_for(s: Array2<f64>, m: &[f64], iters: usize) -> TransportPlan {
        let s = SimilarityMatrix::new(s).unwrap();
        sinkhorn(&init_plan(&s), &LabelMarginal::from_weights(m).unwrap(), iters).unwrap()
    }

    #[test]
    fn zero_similarity_gives_uniform_kernel() {
        let q0 = init_plan(&SimilarityMatrix::new(Array2::zeros((2, 2))).unwrap());
        for q in q0.values().iter() {
            assert_abs_diff_eq!(*q, 0.25, epsilon = 1e-15);
        }
    }

    #[test]
    fn global_shift_leaves_kernel_unchanged() {
        let s = array![[1.0, -2.0, 0.5], [3.0, 0.0, -1.0]];
        let a = init_plan(&SimilarityMatrix::new(s.clone()).unwrap()).values();
        let b = init_plan(&SimilarityMatrix::new(s + 37.5).unwrap()).values();
        assert_abs_diff_eq!(a, b, epsilon = 1e-12);
    }

    #[test]
    fn balanced_problem_converges_immediately() {
        let plan = plan_for(Array2::zeros((2, 3)), &[0.5, 0.5], 1);
        for q in plan.values().iter() {
            assert_abs_diff_eq!(*q, 1.0 / 6.0, epsilon = 1e-15);
        }
        assert!(plan.residual() < 1e-15);
    }

    #[test]
    fn zero_iterations_is_column_softmax() {
        let s = array![[2.0, 0.0, -1.0, 0.3], [0.0, 1.0, 1.0, 0.1]];
        let plan = plan_for(s.clone(), &[0.9, 0.1], 0);
        for i in 0..4 {
            let e0 = s[[0, i]].exp();
            let e1 = s[[1, i]].exp();
            assert_abs_diff_eq!(plan.values()[[0, i]], 0.25 * e0 / (e0 + e1), epsilon = 1e-15);
            assert_abs_diff_eq!(plan.values()[[1, i]], 0.25 * e1 / (e0 + e1), epsilon = 1e-15);
        }
        assert!(plan.residual() > 0.0);
    }

    #[test]
    fn codes_are_normalized_columns() {
        let plan = plan_for(Array2::zeros((2, 2)), &[0.5, 0.5], 3);
        let z = extract_pseudolabels(&plan).unwrap();
        assert_abs_diff_eq!(z, Array2::from_elem((2, 2), 0.5), epsilon = 1e-15);

        let mut manual = plan.clone();
        manual.values = array![[0.1 / 2.5, 0.2], [0.15 / 2.5, 0.3]];
        let z = extract_pseudolabels(&manual).unwrap();
        assert_abs_diff_eq!(z.row(0), array![0.4, 0.6], epsilon = 1e-15);
    }

    #[test]
    fn zero_column_is_degenerate() {
        let mut plan = plan_for(Array2::zeros((2, 2)), &[0.5, 0.5], 1);
        plan.values.column_mut(1).fill(0.0);
        assert!(matches!(extract_pseudolabels(&plan), Err(Error::DegeneratePlan(_))));
    }

    #[test]
    fn extreme_logits_do_not_underflow_columns() {
        // column 1 sits 4000 below the global maximum
        let s = array![[4000.0, -10.0, 0.0], [0.0, -20.0, 3000.0]];
        let plan = plan_for(s, &[0.5, 0.5], 10);
        for col in plan.values().axis_iter(Axis(1)) {
            assert_abs_diff_eq!(col.sum(), 1.0 / 3.0, epsilon = 1e-12);
        }
        extract_pseudolabels(&plan).unwrap();
    }

    #[test]
    fn zero_marginal_entry_empties_row() {
        let s = array![[0.5, 0.1, 0.0], [0.0, 0.2, 0.4], [1.0, 0.0, 0.3]];
        let plan = plan_for(s, &[0.5, 0.0, 0.5], 20);
        assert!(plan.values().row(1).iter().all(|&q| q == 0.0));
        assert!(plan.residual() < 1e-6);
    }
}
