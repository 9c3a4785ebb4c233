//! Support / unlabeled / eval splits drawn from a labeled pool.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::{EvalSet, SupportSet, UnlabeledSet};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplingSpec {
    /// Shots K; the support holds K·C samples.
    pub shots: usize,
    /// K_u; the unlabeled set holds K_u·C samples.
    pub unlabeled_multiplier: usize,
    pub seed: u64,
    /// Draw exactly K samples per class instead of uniformly from the pool.
    #[serde(default)]
    pub stratified: bool,
}

impl SamplingSpec {
    pub fn new(shots: usize, seed: u64) -> Self {
        Self {
            shots,
            unlabeled_multiplier: 24,
            seed,
            stratified: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Split {
    pub support: SupportSet,
    pub unlabeled: UnlabeledSet,
    pub eval: EvalSet,
    pub support_indices: Vec<usize>,
    pub unlabeled_indices: Vec<usize>,
    pub eval_indices: Vec<usize>,
}

/// Draws a support set of K·C items and a disjoint unlabeled set of K_u·C items; the
/// remainder of the pool is the eval split. By default the support is drawn uniformly
/// without class stratification, so it follows the pool's label marginal and may miss
/// classes entirely.
pub fn sample_support(pool: &EvalSet, spec: &SamplingSpec) -> Result<Split> {
    let classes = pool.class_count();
    if spec.shots == 0 {
        return Err(Error::Config("shots must be at least 1".into()));
    }
    let n = spec.shots * classes;
    let m = spec.unlabeled_multiplier * classes;
    if n + m > pool.len() {
        return Err(Error::Sampling(format!(
            "pool of {} items cannot supply {n} support and {m} unlabeled samples",
            pool.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut order: Vec<usize> = (0..pool.len()).collect();
    order.shuffle(&mut rng);

    let (support_indices, rest) = if spec.stratified {
        let mut taken = vec![0usize; classes];
        let mut support = Vec::with_capacity(n);
        let mut rest = Vec::with_capacity(order.len() - n);
        for i in order {
            let y = pool.labels()[i];
            if taken[y] < spec.shots {
                taken[y] += 1;
                support.push(i);
            } else {
                rest.push(i);
            }
        }
        if let Some(c) = taken.iter().position(|&k| k < spec.shots) {
            return Err(Error::Sampling(format!(
                "class {c} has only {} samples, {} shots requested",
                taken[c], spec.shots
            )));
        }
        (support, rest)
    } else {
        let rest = order.split_off(n);
        (order, rest)
    };
    let unlabeled_indices = rest[..m].to_vec();
    let eval_indices = rest[m..].to_vec();

    let support_pool = pool.select(&support_indices);
    let support = SupportSet::new(
        support_pool.embeddings().clone(),
        support_pool.labels().to_vec(),
        classes,
    )?;
    let unlabeled = UnlabeledSet::new(pool.embeddings().select(&unlabeled_indices));
    let eval = pool.select(&eval_indices);
    Ok(Split {
        support,
        unlabeled,
        eval,
        support_indices,
        unlabeled_indices,
        eval_indices,
    })
}
