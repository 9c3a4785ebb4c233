//! Solver × shots × seed sweeps.
//!
//! Every (K, seed) cell draws one split and fits every solver on it, so solvers are
//! compared on identical supports. Cells only share read-only data and are seeded
//! independently; rows come out in the same order whatever the thread count.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::data::{EvalSet, LabelMarginal, PrototypeMatrix, UnlabeledSet};
use crate::error::{Error, Result};
use crate::experiment::metrics::MetricReport;
use crate::experiment::sampling::{sample_support, SamplingSpec};
use crate::experiment::synthetic::{generate_synthetic, SyntheticSpec};
use crate::solvers::{Solver, SolverConfig};
use crate::zeroshot::classify;

pub const CSV_HEADER: &str = "solver,dataset,K,M,seed,aca,acc,runtime_ms,error";

/// Labeled pool and text prototypes the benchmark samples from.
#[derive(Debug, Clone)]
pub struct BenchmarkData {
    pub name: String,
    pub pool: EvalSet,
    pub prototypes: PrototypeMatrix,
    /// Fixed held-out eval set. When absent, every seed evaluates on the pool remainder.
    pub fixed_eval: Option<EvalSet>,
    /// True label marginal, used by oracle-marginal runs.
    pub oracle_marginal: LabelMarginal,
}

impl BenchmarkData {
    pub fn from_synthetic(spec: &SyntheticSpec) -> Result<Self> {
        let data = generate_synthetic(spec)?;
        Ok(Self {
            name: "synthetic".into(),
            oracle_marginal: data.pool.marginal()?,
            pool: data.pool,
            prototypes: data.prototypes,
            fixed_eval: None,
        })
    }

    pub fn new(name: impl Into<String>, pool: EvalSet, prototypes: PrototypeMatrix, fixed_eval: Option<EvalSet>) -> Result<Self> {
        if pool.class_count() != prototypes.class_count() || pool.embeddings().dim() != prototypes.dim() {
            return Err(Error::Shape("pool and prototypes disagree on C or D".into()));
        }
        if let Some(eval) = &fixed_eval {
            if eval.class_count() != pool.class_count() || eval.embeddings().dim() != pool.embeddings().dim() {
                return Err(Error::Shape("eval set and pool disagree on C or D".into()));
            }
        }
        Ok(Self {
            name: name.into(),
            oracle_marginal: pool.marginal()?,
            pool,
            prototypes,
            fixed_eval,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkConfig {
    pub solvers: Vec<Solver>,
    pub shots: Vec<usize>,
    pub seeds: usize,
    /// Cell seed = `base_seed + seed index`.
    pub base_seed: u64,
    pub unlabeled_multiplier: usize,
    pub stratified: bool,
    pub solver: SolverConfig,
    /// Measure wall-clock time per fit. Off by default so outputs are reproducible.
    pub record_runtime: bool,
}

impl Default for BenchmarkConfig {
    fn default() -> Self {
        Self {
            solvers: Solver::ALL.to_vec(),
            shots: vec![1, 2, 4, 8, 16],
            seeds: 50,
            base_seed: 0,
            unlabeled_multiplier: 24,
            stratified: false,
            solver: SolverConfig::default(),
            record_runtime: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResultRow {
    pub solver: Solver,
    pub dataset: String,
    #[serde(rename = "K")]
    pub k: usize,
    #[serde(rename = "M")]
    pub m: usize,
    pub seed: u64,
    pub aca: Option<f64>,
    pub acc: Option<f64>,
    pub runtime_ms: Option<f64>,
    pub error: Option<String>,
}

impl ResultRow {
    pub fn is_ok(&self) -> bool {
        self.error.is_none()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub solver: Solver,
    #[serde(rename = "K")]
    pub k: usize,
    pub runs: usize,
    pub failures: usize,
    pub aca_mean: f64,
    pub aca_std: f64,
    pub acc_mean: f64,
    pub acc_std: f64,
}

fn run_cell(data: &BenchmarkData, cfg: &BenchmarkConfig, k: usize, seed: u64) -> Vec<ResultRow> {
    let classes = data.pool.class_count();
    let spec = SamplingSpec {
        shots: k,
        unlabeled_multiplier: cfg.unlabeled_multiplier,
        seed,
        stratified: cfg.stratified,
    };
    let m = cfg.unlabeled_multiplier * classes;
    let row = |solver: Solver, result: Result<(MetricReport, f64)>| match result {
        Ok((report, runtime)) => ResultRow {
            solver,
            dataset: data.name.clone(),
            k,
            m,
            seed,
            aca: Some(report.aca),
            acc: Some(report.acc),
            runtime_ms: cfg.record_runtime.then_some(runtime),
            error: None,
        },
        Err(e) => ResultRow {
            solver,
            dataset: data.name.clone(),
            k,
            m,
            seed,
            aca: None,
            acc: None,
            runtime_ms: None,
            error: Some(e.to_string()),
        },
    };
    let split = match sample_support(&data.pool, &spec) {
        Ok(split) => split,
        Err(e) => {
            let msg = e.to_string();
            return cfg
                .solvers
                .iter()
                .map(|&s| row(s, Err(Error::Sampling(msg.clone()))))
                .collect();
        }
    };
    let eval = data.fixed_eval.as_ref().unwrap_or(&split.eval);
    let empty = UnlabeledSet::empty(data.prototypes.dim());
    cfg.solvers
        .iter()
        .map(|&solver| {
            let unlabeled = if solver == Solver::SsTextU { &split.unlabeled } else { &empty };
            let result = solver
                .fit(&split.support, unlabeled, &data.prototypes, &cfg.solver, Some(&data.oracle_marginal))
                .and_then(|fit| {
                    let pred = classify(eval.embeddings(), &fit.prototypes)?;
                    Ok((MetricReport::new(&pred, eval.labels(), classes)?, fit.runtime_ms))
                });
            row(solver, result)
        })
        .collect()
}

/// Runs the full grid. Rows are ordered by solver, then K, then seed.
pub fn run_benchmark(data: &BenchmarkData, cfg: &BenchmarkConfig) -> Result<Vec<ResultRow>> {
    cfg.solver.validate(data.pool.class_count())?;
    if cfg.solvers.is_empty() || cfg.shots.is_empty() {
        return Err(Error::Config("benchmark needs at least one solver and one shot value".into()));
    }
    let cells: Vec<(usize, u64)> = cfg
        .shots
        .iter()
        .flat_map(|&k| (0..cfg.seeds as u64).map(move |s| (k, cfg.base_seed + s)))
        .collect();

    #[cfg(feature = "parallel")]
    let per_cell: Vec<Vec<ResultRow>> = {
        use rayon::prelude::*;
        cells.par_iter().map(|&(k, seed)| run_cell(data, cfg, k, seed)).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let per_cell: Vec<Vec<ResultRow>> = cells.iter().map(|&(k, seed)| run_cell(data, cfg, k, seed)).collect();

    let mut rows = Vec::with_capacity(cells.len() * cfg.solvers.len());
    for solver_idx in 0..cfg.solvers.len() {
        rows.extend(per_cell.iter().map(|cell| cell[solver_idx].clone()));
    }
    Ok(rows)
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Mean and population standard deviation over seeds per (solver, K).
pub fn summarize(rows: &[ResultRow]) -> Vec<Summary> {
    let mut keys: Vec<(Solver, usize)> = Vec::new();
    for r in rows {
        if !keys.contains(&(r.solver, r.k)) {
            keys.push((r.solver, r.k));
        }
    }
    keys.into_iter()
        .map(|(solver, k)| {
            let cell: Vec<&ResultRow> = rows.iter().filter(|r| r.solver == solver && r.k == k).collect();
            let aca: Vec<f64> = cell.iter().filter_map(|r| r.aca).collect();
            let acc: Vec<f64> = cell.iter().filter_map(|r| r.acc).collect();
            let (aca_mean, aca_std) = mean_std(&aca);
            let (acc_mean, acc_std) = mean_std(&acc);
            Summary {
                solver,
                k,
                runs: cell.len(),
                failures: cell.iter().filter(|r| !r.is_ok()).count(),
                aca_mean,
                aca_std,
                acc_mean,
                acc_std,
            }
        })
        .collect()
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// CSV with header [`CSV_HEADER`]. Floats use the shortest round-trip representation.
pub fn to_csv(rows: &[ResultRow]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            r.solver,
            csv_field(&r.dataset),
            r.k,
            r.m,
            r.seed,
            opt(r.aca),
            opt(r.acc),
            opt(r.runtime_ms),
            csv_field(r.error.as_deref().unwrap_or("")),
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> (BenchmarkData, BenchmarkConfig) {
        let spec = SyntheticSpec {
            pool_size: 300,
            ..SyntheticSpec::default()
        };
        let cfg = BenchmarkConfig {
            solvers: vec![Solver::ZeroShot, Solver::SsTextU],
            shots: vec![1, 2],
            seeds: 3,
            unlabeled_multiplier: 4,
            ..BenchmarkConfig::default()
        };
        (BenchmarkData::from_synthetic(&spec).unwrap(), cfg)
    }

    #[test]
    fn row_count_and_order() {
        let (data, cfg) = small();
        let rows = run_benchmark(&data, &cfg).unwrap();
        assert_eq!(rows.len(), 2 * 2 * 3);
        assert!(rows.iter().all(ResultRow::is_ok));
        assert_eq!(rows[0].solver, Solver::ZeroShot);
        assert_eq!((rows[0].k, rows[0].seed), (1, 0));
        assert_eq!((rows[5].k, rows[5].seed), (2, 2));
        assert_eq!(rows[6].solver, Solver::SsTextU);
        assert_eq!(rows[6].m, 20);
    }

    #[test]
    fn zero_shot_constant_on_fixed_eval() {
        let (mut data, cfg) = small();
        let fixed = generate_synthetic(&SyntheticSpec {
            pool_size: 200,
            seed: 0,
            ..SyntheticSpec::default()
        })
        .unwrap();
        data.fixed_eval = Some(fixed.pool);
        let rows = run_benchmark(&data, &cfg).unwrap();
        let zs: Vec<f64> = rows
            .iter()
            .filter(|r| r.solver == Solver::ZeroShot)
            .map(|r| r.aca.unwrap())
            .collect();
        assert!(zs.windows(2).all(|w| w[0] == w[1]));
    }

    #[test]
    fn failures_are_tagged() {
        let (data, mut cfg) = small();
        cfg.shots = vec![1, 100];
        let rows = run_benchmark(&data, &cfg).unwrap();
        assert!(rows.iter().filter(|r| r.k == 100).all(|r| r.error.is_some()));
        assert!(rows.iter().filter(|r| r.k == 1).all(ResultRow::is_ok));
        let csv = to_csv(&rows);
        assert!(csv.starts_with(CSV_HEADER));
        assert_eq!(csv.lines().count(), rows.len() + 1);
    }

    #[test]
    fn summary_stats() {
        let (data, cfg) = small();
        let rows = run_benchmark(&data, &cfg).unwrap();
        let summary = summarize(&rows);
        assert_eq!(summary.len(), 4);
        assert!(summary.iter().all(|s| s.runs == 3 && s.failures == 0));
    }
}
