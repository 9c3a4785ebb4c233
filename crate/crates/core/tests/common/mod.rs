#![allow(dead_code)]

use ndarray::{Array1, Array2};
use rand::distr::{Distribution, Uniform};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use sstextu::data::{EmbeddingMatrix, LabelMarginal, PrototypeMatrix, SupportSet, UnlabeledSet};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Array2<f64> {
    Array2::from_shape_fn((rows, cols), |_| StandardNormal.sample(rng))
}

pub fn unit_rows(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> EmbeddingMatrix {
    EmbeddingMatrix::new(gaussian(rng, rows, cols)).unwrap()
}

pub fn text_prototypes(rng: &mut ChaCha8Rng, classes: usize, dim: usize) -> PrototypeMatrix {
    PrototypeMatrix::new(unit_rows(rng, classes, dim).into_inner()).unwrap()
}

/// Support set of `n` samples with labels uniform over `classes`.
pub fn support(rng: &mut ChaCha8Rng, n: usize, classes: usize, dim: usize) -> SupportSet {
    let labels: Vec<usize> = (0..n).map(|_| rng.random_range(0..classes)).collect();
    SupportSet::new(unit_rows(rng, n, dim), labels, classes).unwrap()
}

/// Support set where every class appears at least once.
pub fn covering_support(rng: &mut ChaCha8Rng, n: usize, classes: usize, dim: usize) -> SupportSet {
    assert!(n >= classes);
    let mut labels: Vec<usize> = (0..classes).collect();
    labels.extend((classes..n).map(|_| rng.random_range(0..classes)));
    SupportSet::new(unit_rows(rng, n, dim), labels, classes).unwrap()
}

pub fn unlabeled(rng: &mut ChaCha8Rng, m: usize, dim: usize) -> UnlabeledSet {
    UnlabeledSet::new(unit_rows(rng, m, dim))
}

/// Random M×C simplex rows.
pub fn codes(rng: &mut ChaCha8Rng, m: usize, classes: usize) -> Array2<f64> {
    let u = Uniform::new(0.01, 1.0).unwrap();
    let mut z = Array2::from_shape_fn((m, classes), |_| u.sample(rng));
    for mut row in z.rows_mut() {
        let s = row.sum();
        row /= s;
    }
    z
}

pub fn positive_marginal(rng: &mut ChaCha8Rng, classes: usize) -> LabelMarginal {
    let u = Uniform::new(0.05, 1.0).unwrap();
    let w: Vec<f64> = (0..classes).map(|_| u.sample(rng)).collect();
    LabelMarginal::from_weights(&w).unwrap()
}

pub fn max_abs_diff(a: &Array2<f64>, b: &Array2<f64>) -> f64 {
    assert_eq!(a.dim(), b.dim());
    a.iter().zip(b.iter()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

pub fn norm(a: &Array1<f64>) -> f64 {
    a.dot(a).sqrt()
}

pub fn frobenius(a: &Array2<f64>) -> f64 {
    a.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Minimizes the combined objective with fixed codes by plain gradient descent.
/// Classes with no support under the adaptive policy stay at their text prototype.
#[allow(clippy::too_many_arguments)]
pub fn descent_oracle(
    support: &SupportSet,
    unlabeled: &UnlabeledSet,
    codes: &Array2<f64>,
    t: &PrototypeMatrix,
    tau: f64,
    lambda_text: &[f64],
    lambda_unlabeled: &[f64],
    pinned: &[bool],
) -> Array2<f64> {
    let (c, d) = (t.class_count(), t.dim());
    let n = support.len() as f64;
    let m = unlabeled.len().max(1) as f64;
    // data part of the gradient is constant in W
    let mut data = Array2::<f64>::zeros((c, d));
    for (i, &y) in support.labels().iter().enumerate() {
        for j in 0..d {
            data[[y, j]] -= support.embeddings().row(i)[j] / (n * tau);
        }
    }
    for i in 0..unlabeled.len() {
        for k in 0..c {
            for j in 0..d {
                data[[k, j]] -= lambda_unlabeled[k] * codes[[i, k]] * unlabeled.embeddings().row(i)[j] / (m * tau);
            }
        }
    }
    let mut w = t.view().to_owned();
    let step = 0.3 / lambda_text.iter().copied().fold(0.0, f64::max);
    for _ in 0..100_000 {
        let mut grad = data.clone();
        for k in 0..c {
            for j in 0..d {
                grad[[k, j]] += 2.0 * lambda_text[k] * (w[[k, j]] - t.view()[[k, j]]);
            }
            if pinned[k] {
                grad.row_mut(k).fill(0.0);
            }
        }
        if frobenius(&grad) < 1e-8 {
            return w;
        }
        w.scaled_add(-step, &grad);
    }
    panic!("gradient descent did not converge");
}
