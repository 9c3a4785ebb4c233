//! Browser bindings for the sstextu solvers. Every export takes plain numbers and
//! returns a JSON string; errors are raised as JS exceptions carrying the message.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use wasm_bindgen::prelude::*;

use sstextu::experiment::{
    balanced_accuracy, generate_synthetic, run_benchmark, sample_support, silhouette_score, summarize,
    BenchmarkConfig, BenchmarkData, SamplingSpec, SyntheticSpec,
};
use sstextu::ot::{init_plan, SimilarityMatrix, SinkhornState};
use sstextu::solvers::{fit_sstextu, Solver, SolverConfig};
use sstextu::zeroshot::classify;
use sstextu::LabelMarginal;

#[derive(Serialize)]
pub struct SinkhornTrace {
    pub target: Vec<f64>,
    /// Row sums of the plan after 0, 1, ... iterations, scaled so they sum to 1.
    pub row_sums: Vec<Vec<f64>>,
    pub residuals: Vec<f64>,
}

/// Runs Sinkhorn on random similarities and records the row marginal after each iteration.
pub fn sinkhorn_trace(classes: usize, samples: usize, scale: f64, skew: f64, iters: usize, seed: u64) -> sstextu::Result<SinkhornTrace> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // geometric class weights; skew 1 is uniform
    let weights: Vec<f64> = (0..classes).map(|c| skew.powi(c as i32)).collect();
    let target = LabelMarginal::from_weights(&weights)?;
    let s = ndarray::Array2::from_shape_fn((classes, samples), |_| scale * rng.random_range(-1.0..1.0));
    let q0 = init_plan(&SimilarityMatrix::new(s)?);
    let mut state = SinkhornState::new(&q0, &target)?;
    state.column_step()?;
    let mut row_sums = Vec::with_capacity(iters + 1);
    let mut residuals = Vec::with_capacity(iters + 1);
    for i in 0..=iters {
        if i > 0 {
            state.step()?;
        }
        let plan = state.plan();
        row_sums.push(plan.values().sum_axis(ndarray::Axis(1)).to_vec());
        residuals.push(plan.residual());
    }
    Ok(SinkhornTrace {
        target: target.to_vec(),
        row_sums,
        residuals,
    })
}

#[derive(Serialize)]
pub struct SolverScore {
    pub solver: &'static str,
    pub aca_mean: f64,
    pub aca_std: f64,
}

fn spec(noise: f64, seed: u64) -> SyntheticSpec {
    SyntheticSpec {
        noise,
        pool_size: 1000,
        seed,
        ..SyntheticSpec::default()
    }
}

/// Mean balanced accuracy of every solver on the default synthetic task.
pub fn solver_scores(shots: usize, seeds: usize, noise: f64, data_seed: u64) -> sstextu::Result<Vec<SolverScore>> {
    let data = BenchmarkData::from_synthetic(&spec(noise, data_seed))?;
    let cfg = BenchmarkConfig {
        shots: vec![shots],
        seeds,
        ..BenchmarkConfig::default()
    };
    let rows = run_benchmark(&data, &cfg)?;
    Ok(summarize(&rows)
        .into_iter()
        .map(|s| SolverScore {
            solver: s.solver.name(),
            aca_mean: s.aca_mean,
            aca_std: s.aca_std,
        })
        .collect())
}

#[derive(Serialize)]
pub struct SweepPoint {
    pub noise: f64,
    pub silhouette: f64,
    pub aca: f64,
}

/// Silhouette of the pool and SS-Text-U accuracy at K=4 for each noise level.
pub fn noise_sweep(levels: &[f64], seeds: usize) -> sstextu::Result<Vec<SweepPoint>> {
    let seeds = seeds.max(1);
    levels
        .iter()
        .map(|&noise| {
            let (mut sil, mut aca) = (0.0, 0.0);
            for seed in 0..seeds as u64 {
                let data = generate_synthetic(&SyntheticSpec {
                    pool_size: 500,
                    ..spec(noise, 100 + seed)
                })?;
                sil += silhouette_score(data.pool.embeddings(), data.pool.labels())?;
                let split = sample_support(&data.pool, &SamplingSpec::new(4, seed))?;
                let fit = fit_sstextu(&split.support, &split.unlabeled, &data.prototypes, &SolverConfig::default())?;
                let pred = classify(split.eval.embeddings(), &fit.prototypes)?;
                aca += balanced_accuracy(&pred, split.eval.labels(), data.pool.class_count())?;
            }
            Ok(SweepPoint {
                noise,
                silhouette: sil / seeds as f64,
                aca: aca / seeds as f64,
            })
        })
        .collect()
}

fn to_js<T: Serialize>(result: sstextu::Result<T>) -> Result<String, JsValue> {
    result
        .map_err(|e| JsValue::from_str(&e.to_string()))
        .and_then(|v| serde_json::to_string(&v).map_err(|e| JsValue::from_str(&e.to_string())))
}

#[wasm_bindgen(js_name = sinkhornTrace)]
pub fn sinkhorn_trace_js(classes: usize, samples: usize, scale: f64, skew: f64, iters: usize, seed: u32) -> Result<String, JsValue> {
    to_js(sinkhorn_trace(classes, samples, scale, skew, iters, seed.into()))
}

#[wasm_bindgen(js_name = compareSolvers)]
pub fn compare_solvers_js(shots: usize, seeds: usize, noise: f64, data_seed: u32) -> Result<String, JsValue> {
    to_js(solver_scores(shots, seeds, noise, data_seed.into()))
}

#[wasm_bindgen(js_name = noiseSweep)]
pub fn noise_sweep_js(levels: Vec<f64>, seeds: usize) -> Result<String, JsValue> {
    to_js(noise_sweep(&levels, seeds))
}

#[wasm_bindgen(js_name = solverNames)]
pub fn solver_names() -> String {
    serde_json::to_string(&Solver::ALL.iter().map(|s| s.name()).collect::<Vec<_>>()).unwrap_or_default()
}
