//! Adaptation methods over frozen embeddings.
//!
//! * zero-shot: the text prototypes as-is
//! * SimpleShot: per-class support means
//! * SS-Text: closed-form minimizer of support tightness plus a text-anchored ℓ2 penalty
//! * SS-Text-U: block coordinate minimization that alternates optimal-transport
//!   pseudo-labels on the unlabeled set with the closed-form prototype update
//!
//! The prototype update for class c is
//!
//! ```text
//! w_c = Σ_S y_ic v_i / (2 λ^T_c |S| τ) + λ^U_c Σ_U z_ic v_i / (2 λ^T_c |U| τ) + t_c
//! ```

use std::fmt;
use std::str::FromStr;

use ndarray::{Array1, Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::data::{LabelMarginal, PrototypeMatrix, SupportSet, UnlabeledSet};
use crate::error::{Error, Result};
use crate::objectives::{semi_value, ClassWeights, LambdaPolicy};
use crate::ot::{extract_pseudolabels, init_plan, sinkhorn, SimilarityMatrix};
use crate::zeroshot::{logits, Temperature};

/// Where the row marginal of the transport problem comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MarginalSource {
    /// Support-set class frequencies, floored when a class is missing.
    #[default]
    SupportEstimate,
    /// Support-set frequencies without the floor (ablation arm).
    Uncorrected,
    /// The true marginal, supplied by the benchmark harness.
    Oracle,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub tau: Temperature,
    /// BCM iterations T.
    pub bcm_iters: usize,
    /// Sinkhorn iterations per z-step.
    pub ot_iters: usize,
    /// Floor ratio r for missing classes, in (0, 1).
    pub marginal_ratio: f64,
    pub lambdas: LambdaPolicy,
    pub marginal_source: MarginalSource,
    /// Keep the codes of every BCM iteration in the result.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub record_codes: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            tau: Temperature::DEFAULT,
            bcm_iters: 3,
            ot_iters: 10,
            marginal_ratio: 0.25,
            lambdas: LambdaPolicy::Adaptive,
            marginal_source: MarginalSource::SupportEstimate,
            record_codes: false,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self, classes: usize) -> Result<()> {
        if !(self.marginal_ratio > 0.0 && self.marginal_ratio < 1.0) {
            return Err(Error::Config(format!(
                "marginal ratio r must lie in (0, 1), got {}",
                self.marginal_ratio
            )));
        }
        self.lambdas.validate(classes)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub prototypes: PrototypeMatrix,
    /// Entry 0 is the objective at the initialization W⁰ with the first codes;
    /// entry t is L_SEMI(Wᵗ, zᵗ).
    pub objective_trace: Vec<f64>,
    /// L_SEMI(Wᵗ⁻¹, zᵗ), the value just before each W-step.
    pub pre_update_objectives: Vec<f64>,
    /// Row-marginal residual of the transport plan at each z-step.
    pub ot_residuals: Vec<f64>,
    /// Codes zᵗ (M×C) per iteration, when requested.
    pub pseudolabel_trace: Option<Vec<Array2<f64>>>,
    /// Target marginal used by the z-steps.
    pub target_marginal: Option<LabelMarginal>,
    /// Classes without support samples.
    pub empty_classes: Vec<usize>,
    pub runtime_ms: f64,
}

/// Empirical class frequencies m = Σ_i y_i / N.
pub fn estimate_marginal(support: &SupportSet) -> Result<LabelMarginal> {
    if support.is_empty() {
        return Err(Error::Empty("support set".into()));
    }
    let counts: Vec<f64> = support.class_counts().into_iter().map(|k| k as f64).collect();
    LabelMarginal::from_weights(&counts)
}

/// m̄_c = max(m_c, b) with b = r·min_{m_c > 0} m_c, renormalized to sum 1.
pub fn correct_marginal(m: &LabelMarginal, r: f64) -> Result<LabelMarginal> {
    if !(r > 0.0 && r < 1.0) {
        return Err(Error::Config(format!("marginal ratio r must lie in (0, 1), got {r}")));
    }
    let min_observed = m
        .as_array()
        .iter()
        .copied()
        .filter(|&p| p > 0.0)
        .fold(f64::INFINITY, f64::min);
    if !min_observed.is_finite() {
        return Err(Error::Data("marginal has no observed class".into()));
    }
    let floor = r * min_observed;
    let floored: Vec<f64> = m.as_array().iter().map(|&p| p.max(floor)).collect();
    LabelMarginal::from_weights(&floored)
}

/// Target marginal for the z-step. The floor is only applied when a class is missing.
pub fn target_marginal(
    support: &SupportSet,
    cfg: &SolverConfig,
    oracle: Option<&LabelMarginal>,
) -> Result<LabelMarginal> {
    match cfg.marginal_source {
        MarginalSource::Oracle => oracle
            .cloned()
            .ok_or_else(|| Error::Config("oracle marginal requested but none supplied".into())),
        MarginalSource::Uncorrected => estimate_marginal(support),
        MarginalSource::SupportEstimate => {
            let m = estimate_marginal(support)?;
            if m.as_array().iter().any(|&p| p == 0.0) {
                correct_marginal(&m, cfg.marginal_ratio)
            } else {
                Ok(m)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimpleShotFit {
    pub prototypes: PrototypeMatrix,
    /// Classes with no support sample; their prototype is the zero vector.
    pub empty_classes: Vec<usize>,
}

/// Per-class mean of the support embeddings.
pub fn fit_simpleshot(support: &SupportSet) -> Result<SimpleShotFit> {
    let counts = support.class_counts();
    let mut w = support.one_hot().t().dot(&support.embeddings().view());
    for (mut row, &k) in w.axis_iter_mut(Axis(0)).zip(&counts) {
        if k > 0 {
            row.mapv_inplace(|x| x / k as f64);
        }
    }
    Ok(SimpleShotFit {
        prototypes: PrototypeMatrix::new(w)?,
        empty_classes: empty_classes(&counts),
    })
}

fn empty_classes(counts: &[usize]) -> Vec<usize> {
    counts
        .iter()
        .enumerate()
        .filter(|(_, &k)| k == 0)
        .map(|(c, _)| c)
        .collect()
}

fn check_inputs(support: &SupportSet, unlabeled: &UnlabeledSet, t: &PrototypeMatrix, cfg: &SolverConfig) -> Result<()> {
    if t.class_count() != support.class_count() || t.dim() != support.dim() {
        return Err(Error::Shape(format!(
            "support has C={} D={}, text prototypes are {}x{}",
            support.class_count(),
            support.dim(),
            t.class_count(),
            t.dim()
        )));
    }
    if !unlabeled.is_empty() && unlabeled.embeddings().dim() != t.dim() {
        return Err(Error::Shape(format!(
            "unlabeled dim {} != prototype dim {}",
            unlabeled.embeddings().dim(),
            t.dim()
        )));
    }
    cfg.validate(support.class_count())
}

/// Supervised and unlabeled coefficients of the prototype update.
fn update_coefficients(weights: &ClassWeights, n: usize, m: usize, tau: f64) -> (Array1<f64>, Array1<f64>) {
    let n = n as f64;
    let supervised = weights.text.iter().map(|l| 1.0 / (2.0 * l * n * tau)).collect();
    let unlabeled = if m == 0 {
        Array1::zeros(weights.text.len())
    } else if weights.adaptive {
        // λ^U_c / (2λ^T_c) = 1 for every class, including K_c = 0
        Array1::from_elem(weights.text.len(), 1.0 / (m as f64 * tau))
    } else {
        weights
            .text
            .iter()
            .zip(&weights.unlabeled)
            .map(|(lt, lu)| lu / (2.0 * lt * m as f64 * tau))
            .collect()
    };
    (supervised, unlabeled)
}

/// Shared state of a fit: resolved weights and the support-side sum Yᵀ V.
struct Prepared {
    weights: ClassWeights,
    labels: Array2<f64>,
    support_sum: Array2<f64>,
    supervised: Array1<f64>,
    unlabeled: Array1<f64>,
}

impl Prepared {
    fn new(support: &SupportSet, unlabeled_len: usize, cfg: &SolverConfig) -> Result<Self> {
        let weights = cfg.lambdas.resolve(&support.class_counts())?;
        let labels = support.one_hot();
        let support_sum = labels.t().dot(&support.embeddings().view());
        let (supervised, unlabeled) = update_coefficients(&weights, support.len(), unlabeled_len, cfg.tau.get());
        Ok(Self {
            weights,
            labels,
            support_sum,
            supervised,
            unlabeled,
        })
    }

    fn update(&self, unlabeled: &UnlabeledSet, codes: ArrayView2<'_, f64>, t: &PrototypeMatrix) -> Result<PrototypeMatrix> {
        let mut w = t.view().to_owned();
        for (c, mut row) in w.axis_iter_mut(Axis(0)).enumerate() {
            row.scaled_add(self.supervised[c], &self.support_sum.row(c));
        }
        if !unlabeled.is_empty() {
            let code_sum = codes.t().dot(&unlabeled.embeddings().view());
            for (c, mut row) in w.axis_iter_mut(Axis(0)).enumerate() {
                row.scaled_add(self.unlabeled[c], &code_sum.row(c));
            }
        }
        PrototypeMatrix::new(w)
    }

    fn objective(
        &self,
        support: &SupportSet,
        codes: ArrayView2<'_, f64>,
        unlabeled_logits: ArrayView2<'_, f64>,
        w: &PrototypeMatrix,
        t: &PrototypeMatrix,
        tau: Temperature,
    ) -> Result<f64> {
        let support_logits = logits(support.embeddings().view(), w.view(), tau)?;
        let value = semi_value(
            self.labels.view(),
            support_logits.view(),
            codes,
            unlabeled_logits,
            w,
            t,
            &self.weights,
        );
        if value.total.is_finite() {
            Ok(value.total)
        } else {
            Err(Error::Numeric("objective is not finite".into()))
        }
    }
}

/// Closed-form prototype update for fixed codes (M×C). With an empty unlabeled set this
/// is exactly the SS-Text solution.
pub fn update_prototypes(
    support: &SupportSet,
    unlabeled: &UnlabeledSet,
    codes: ArrayView2<'_, f64>,
    t: &PrototypeMatrix,
    cfg: &SolverConfig,
) -> Result<PrototypeMatrix> {
    check_inputs(support, unlabeled, t, cfg)?;
    if codes.dim() != (unlabeled.len(), t.class_count()) {
        return Err(Error::Shape(format!(
            "codes are {:?}, expected ({}, {})",
            codes.dim(),
            unlabeled.len(),
            t.class_count()
        )));
    }
    Prepared::new(support, unlabeled.len(), cfg)?.update(unlabeled, codes, t)
}

/// SS-Text: w_c = Σ_i y_ic v_i / (2λ^T_c|S|τ) + t_c.
pub fn fit_sstext(support: &SupportSet, t: &PrototypeMatrix, cfg: &SolverConfig) -> Result<FitResult> {
    let timer = Stopwatch::start();
    let unlabeled = UnlabeledSet::empty(t.dim());
    check_inputs(support, &unlabeled, t, cfg)?;
    let prep = Prepared::new(support, 0, cfg)?;
    let no_codes = Array2::zeros((0, t.class_count()));
    let no_logits = Array2::zeros((0, t.class_count()));
    let initial = prep.objective(support, no_codes.view(), no_logits.view(), t, t, cfg.tau)?;
    let w = prep.update(&unlabeled, no_codes.view(), t)?;
    let fitted = prep.objective(support, no_codes.view(), no_logits.view(), &w, t, cfg.tau)?;
    Ok(FitResult {
        prototypes: w,
        objective_trace: vec![initial, fitted],
        pre_update_objectives: vec![initial],
        ot_residuals: Vec::new(),
        pseudolabel_trace: None,
        target_marginal: None,
        empty_classes: empty_classes(&support.class_counts()),
        runtime_ms: timer.elapsed_ms(),
    })
}

/// SS-Text-U with the marginal chosen by `cfg.marginal_source`.
pub fn fit_sstextu(
    support: &SupportSet,
    unlabeled: &UnlabeledSet,
    t: &PrototypeMatrix,
    cfg: &SolverConfig,
) -> Result<FitResult> {
    fit_sstextu_with_oracle(support, unlabeled, t, cfg, None)
}

/// SS-Text-U; `oracle` supplies the marginal when `cfg.marginal_source` is `Oracle`.
pub fn fit_sstextu_with_oracle(
    support: &SupportSet,
    unlabeled: &UnlabeledSet,
    t: &PrototypeMatrix,
    cfg: &SolverConfig,
    oracle: Option<&LabelMarginal>,
) -> Result<FitResult> {
    let timer = Stopwatch::start();
    check_inputs(support, unlabeled, t, cfg)?;
    let classes = t.class_count();
    let prep = Prepared::new(support, unlabeled.len(), cfg)?;
    let marginal = if unlabeled.is_empty() {
        None
    } else {
        Some(target_marginal(support, cfg, oracle)?)
    };

    let mut w = t.clone();
    let mut objective_trace = Vec::with_capacity(cfg.bcm_iters + 1);
    let mut pre_update = Vec::with_capacity(cfg.bcm_iters);
    let mut residuals = Vec::with_capacity(cfg.bcm_iters);
    let mut codes_trace = cfg.record_codes.then(Vec::new);

    let Some(marginal) = marginal else {
        let no_codes = Array2::zeros((0, classes));
        let no_logits = Array2::zeros((0, classes));
        objective_trace.push(prep.objective(support, no_codes.view(), no_logits.view(), &w, t, cfg.tau)?);
        for iteration in 1..=cfg.bcm_iters {
            let wrap = |e| Error::Solver {
                iteration,
                source: Box::new(e),
            };
            pre_update.push(
                prep.objective(support, no_codes.view(), no_logits.view(), &w, t, cfg.tau)
                    .map_err(wrap)?,
            );
            w = prep.update(unlabeled, no_codes.view(), t).map_err(wrap)?;
            objective_trace.push(
                prep.objective(support, no_codes.view(), no_logits.view(), &w, t, cfg.tau)
                    .map_err(wrap)?,
            );
        }
        return Ok(FitResult {
            prototypes: w,
            objective_trace,
            pre_update_objectives: pre_update,
            ot_residuals: residuals,
            pseudolabel_trace: codes_trace,
            target_marginal: None,
            empty_classes: empty_classes(&support.class_counts()),
            runtime_ms: timer.elapsed_ms(),
        });
    };

    let z_step = |s: &SimilarityMatrix| -> Result<(Array2<f64>, f64)> {
        let plan = sinkhorn(&init_plan(s), &marginal, cfg.ot_iters)?;
        Ok((extract_pseudolabels(&plan)?, plan.residual()))
    };

    // similarity of the current prototypes; reused for the objective and the next z-step
    let mut s = SimilarityMatrix::from_prototypes(unlabeled.embeddings(), &w, cfg.tau)
        .map_err(|e| Error::Solver {
            iteration: 1,
            source: Box::new(e),
        })?;
    for iteration in 1..=cfg.bcm_iters.max(1) {
        let wrap = |e| Error::Solver {
            iteration,
            source: Box::new(e),
        };
        let (codes, residual) = z_step(&s).map_err(wrap)?;
        let before = prep
            .objective(support, codes.view(), s.view().t(), &w, t, cfg.tau)
            .map_err(wrap)?;
        if iteration == 1 {
            objective_trace.push(before);
        }
        if cfg.bcm_iters == 0 {
            break;
        }
        pre_update.push(before);
        residuals.push(residual);
        w = prep.update(unlabeled, codes.view(), t).map_err(wrap)?;
        s = SimilarityMatrix::from_prototypes(unlabeled.embeddings(), &w, cfg.tau).map_err(wrap)?;
        objective_trace.push(
            prep.objective(support, codes.view(), s.view().t(), &w, t, cfg.tau)
                .map_err(wrap)?,
        );
        if let Some(trace) = codes_trace.as_mut() {
            trace.push(codes);
        }
    }

    Ok(FitResult {
        prototypes: w,
        objective_trace,
        pre_update_objectives: pre_update,
        ot_residuals: residuals,
        pseudolabel_trace: codes_trace,
        target_marginal: Some(marginal),
        empty_classes: empty_classes(&support.class_counts()),
        runtime_ms: timer.elapsed_ms(),
    })
}

/// The adaptation methods exposed to the CLI and benchmark.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Solver {
    ZeroShot,
    SimpleShot,
    SsText,
    SsTextU,
}

impl Solver {
    pub const ALL: [Solver; 4] = [Solver::ZeroShot, Solver::SimpleShot, Solver::SsText, Solver::SsTextU];

    pub fn name(self) -> &'static str {
        match self {
            Solver::ZeroShot => "zeroshot",
            Solver::SimpleShot => "simpleshot",
            Solver::SsText => "sstext",
            Solver::SsTextU => "sstextu",
        }
    }

    /// Fits prototypes. Only SS-Text-U reads the unlabeled set and `oracle`.
    pub fn fit(
        self,
        support: &SupportSet,
        unlabeled: &UnlabeledSet,
        t: &PrototypeMatrix,
        cfg: &SolverConfig,
        oracle: Option<&LabelMarginal>,
    ) -> Result<FitResult> {
        match self {
            Solver::ZeroShot => Ok(FitResult {
                prototypes: t.clone(),
                objective_trace: Vec::new(),
                pre_update_objectives: Vec::new(),
                ot_residuals: Vec::new(),
                pseudolabel_trace: None,
                target_marginal: None,
                empty_classes: Vec::new(),
                runtime_ms: 0.0,
            }),
            Solver::SimpleShot => {
                let timer = Stopwatch::start();
                let fit = fit_simpleshot(support)?;
                Ok(FitResult {
                    prototypes: fit.prototypes,
                    objective_trace: Vec::new(),
                    pre_update_objectives: Vec::new(),
                    ot_residuals: Vec::new(),
                    pseudolabel_trace: None,
                    target_marginal: None,
                    empty_classes: fit.empty_classes,
                    runtime_ms: timer.elapsed_ms(),
                })
            }
            Solver::SsText => fit_sstext(support, t, cfg),
            Solver::SsTextU => fit_sstextu_with_oracle(support, unlabeled, t, cfg, oracle),
        }
    }
}

impl fmt::Display for Solver {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Solver {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Solver::ALL
            .into_iter()
            .find(|solver| solver.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown solver {s:?}")))
    }
}

/// Wall-clock timer; reads zero on targets without a clock.
struct Stopwatch {
    #[cfg(not(target_arch = "wasm32"))]
    start: std::time::Instant,
}

impl Stopwatch {
    fn start() -> Self {
        Self {
            #[cfg(not(target_arch = "wasm32"))]
            start: std::time::Instant::now(),
        }
    }

    fn elapsed_ms(&self) -> f64 {
        #[cfg(not(target_arch = "wasm32"))]
        {
            self.start.elapsed().as_secs_f64() * 1e3
        }
        #[cfg(target_arch = "wasm32")]
        {
            0.0
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::EmbeddingMatrix;
    use approx::assert_abs_diff_eq;
    use ndarray::array;

    fn support(rows: Array2<f64>, labels: Vec<usize>, classes: usize) -> SupportSet {
        SupportSet::new(EmbeddingMatrix::new(rows).unwrap(), labels, classes).unwrap()
    }

    #[test]
    fn marginal_counts() {
        let s = support(array![[1.0, 0.0], [0.0, 1.0], [1.0, 1.0]], vec![0, 0, 1], 2);
        assert_abs_diff_eq!(
            estimate_marginal(&s).unwrap().as_array(),
            &array![2.0 / 3.0, 1.0 / 3.0],
            epsilon = 1e-15
        );
        let s = support(array![[1.0, 0.0], [0.0, 1.0]], vec![0, 1], 3);
        assert_eq!(estimate_marginal(&s).unwrap().as_array()[2], 0.0);
        let s = support(
            array![[1.0, 0.0], [0.0, 1.0], [1.0, 1.0], [1.0, 2.0], [2.0, 1.0], [3.0, 1.0]],
            vec![0, 1, 2, 0, 1, 2],
            3,
        );
        for p in estimate_marginal(&s).unwrap().as_array() {
            assert_abs_diff_eq!(*p, 1.0 / 3.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn marginal_correction_examples() {
        let m = LabelMarginal::new(array![0.5, 0.5, 0.0]).unwrap();
        let got = correct_marginal(&m, 0.25).unwrap();
        assert_abs_diff_eq!(got.as_array(), &array![4.0 / 9.0, 4.0 / 9.0, 1.0 / 9.0], epsilon = 1e-15);

        let m = LabelMarginal::new(array![1.0, 0.0]).unwrap();
        let got = correct_marginal(&m, 0.25).unwrap();
        assert_abs_diff_eq!(got.as_array(), &array![0.8, 0.2], epsilon = 1e-15);

        let m = LabelMarginal::new(array![0.3, 0.3, 0.4]).unwrap();
        assert_abs_diff_eq!(correct_marginal(&m, 0.25).unwrap().as_array(), m.as_array(), epsilon = 1e-15);

        assert!(correct_marginal(&m, 1.0).is_err());
    }

    #[test]
    fn simpleshot_means() {
        let s = support(array![[1.0, 0.0], [0.0, 1.0], [0.0, 1.0]], vec![0, 1, 1], 3);
        let fit = fit_simpleshot(&s).unwrap();
        assert_abs_diff_eq!(
            fit.prototypes.view(),
            array![[1.0, 0.0], [0.0, 1.0], [0.0, 0.0]],
            epsilon = 1e-15
        );
        assert_eq!(fit.empty_classes, vec![2]);
    }

    #[test]
    fn sstext_formula_instance() {
        // K_c = 1, |S| = 1, τ = 0.5, λ^T = 1: coefficient 1
        let s = support(array![[0.6, 0.8]], vec![0], 2);
        let t = PrototypeMatrix::new(array![[1.0, 0.0], [0.0, 1.0]]).unwrap();
        let cfg = SolverConfig {
            tau: Temperature::new(0.5).unwrap(),
            ..SolverConfig::default()
        };
        let fit = fit_sstext(&s, &t, &cfg).unwrap();
        assert_abs_diff_eq!(fit.prototypes.row(0), array![1.6, 0.8], epsilon = 1e-15);
        // K_1 = 0 keeps the text prototype
        assert_eq!(fit.prototypes.row(1), t.row(1));
    }

    #[test]
    fn zero_bcm_iterations_returns_text() {
        let s = support(array![[0.6, 0.8], [0.8, 0.6]], vec![0, 1], 2);
        let u = UnlabeledSet::new(EmbeddingMatrix::new(array![[1.0, 0.0], [0.0, 1.0]]).unwrap());
        let t = PrototypeMatrix::new(array![[1.0, 0.0], [0.0, 1.0]]).unwrap();
        let cfg = SolverConfig {
            bcm_iters: 0,
            ..SolverConfig::default()
        };
        let fit = fit_sstextu(&s, &u, &t, &cfg).unwrap();
        assert_eq!(fit.prototypes, t);
        assert_eq!(fit.objective_trace.len(), 1);
    }

    #[test]
    fn default_trace_length() {
        let s = support(array![[0.6, 0.8], [0.8, 0.6]], vec![0, 1], 2);
        let u = UnlabeledSet::new(EmbeddingMatrix::new(array![[1.0, 0.0], [0.0, 1.0], [1.0, 1.0]]).unwrap());
        let t = PrototypeMatrix::new(array![[1.0, 0.0], [0.0, 1.0]]).unwrap();
        let fit = fit_sstextu(&s, &u, &t, &SolverConfig::default()).unwrap();
        assert_eq!(fit.objective_trace.len(), 4);
        assert_eq!(fit.pre_update_objectives.len(), 3);
    }

    #[test]
    fn oracle_requires_marginal() {
        let s = support(array![[0.6, 0.8]], vec![0], 2);
        let u = UnlabeledSet::new(EmbeddingMatrix::new(array![[1.0, 0.0]]).unwrap());
        let t = PrototypeMatrix::new(array![[1.0, 0.0], [0.0, 1.0]]).unwrap();
        let cfg = SolverConfig {
            marginal_source: MarginalSource::Oracle,
            ..SolverConfig::default()
        };
        assert!(matches!(fit_sstextu(&s, &u, &t, &cfg), Err(Error::Config(_))));
    }

    #[test]
    fn solver_names_round_trip() {
        for s in Solver::ALL {
            assert_eq!(s.name().parse::<Solver>().unwrap(), s);
        }
        assert!("lp++".parse::<Solver>().is_err());
    }
}
