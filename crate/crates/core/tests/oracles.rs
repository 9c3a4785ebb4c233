//! Library results checked against independent reference computations.

mod common;

use approx::assert_abs_diff_eq;
use ndarray::{array, Array2, Axis};
use rand::Rng;
use twofloat::TwoFloat;

use common::*;
use sstextu::data::{EmbeddingMatrix, EvalSet, LabelMarginal, UnlabeledSet};
use sstextu::experiment::{
    balanced_accuracy, generate_synthetic, per_class_recall, sample_support, silhouette_score, SamplingSpec,
    SyntheticSpec,
};
use sstextu::objectives::{eval_ce, LambdaPolicy};
use sstextu::ot::{init_plan, sinkhorn, SimilarityMatrix};
use sstextu::solvers::{fit_simpleshot, fit_sstext, update_prototypes, SolverConfig};
use sstextu::zeroshot::{classify, predict_probs, Temperature};

fn tf(x: f64) -> TwoFloat {
    TwoFloat::from(x)
}

/// log Σ exp(x) in double-double arithmetic.
fn lse_dd(xs: &[f64]) -> TwoFloat {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut acc = tf(0.0);
    for &x in xs {
        acc += (tf(x) - tf(max)).exp();
    }
    tf(max) + acc.ln()
}

/// Dot product accumulated in double-double.
fn dot_dd(a: ndarray::ArrayView1<f64>, b: ndarray::ArrayView1<f64>) -> TwoFloat {
    a.iter().zip(b.iter()).fold(tf(0.0), |acc, (x, y)| acc + tf(*x) * tf(*y))
}

#[test]
fn softmax_matches_double_double() {
    let mut r = rng(1);
    for _ in 0..20 {
        let (n, c, d) = (r.random_range(1..30), r.random_range(2..12), r.random_range(2..40));
        let v = unit_rows(&mut r, n, d);
        let w = text_prototypes(&mut r, c, d);
        let tau = Temperature::new(0.01).unwrap();
        let p = predict_probs(&v, &w, tau).unwrap();
        for i in 0..n {
            let s: Vec<f64> = (0..c).map(|k| (dot_dd(v.row(i), w.row(k)) / tf(0.01)).hi()).collect();
            let z = lse_dd(&s);
            for (k, &logit) in s.iter().enumerate() {
                let expected = (tf(logit) - z).exp();
                let err = (p.view()[[i, k]] - expected.hi()).abs();
                assert!(err < 1e-9, "err {err}");
            }
        }
    }
}

#[test]
fn init_plan_matches_double_double() {
    let mut r = rng(2);
    for _ in 0..20 {
        let (c, m) = (r.random_range(1..10), r.random_range(1..60));
        let s = Array2::from_shape_fn((c, m), |_| r.random_range(-100.0..100.0));
        let q0 = init_plan(&SimilarityMatrix::new(s.clone()).unwrap()).values();
        let flat: Vec<f64> = s.iter().copied().collect();
        let z = lse_dd(&flat);
        for (q, x) in q0.iter().zip(s.iter()) {
            let expected = (tf(*x) - z).exp().hi();
            assert!((q - expected).abs() <= 1e-9 * expected.max(1e-300) + 1e-300);
        }
        assert_abs_diff_eq!(q0.sum(), 1.0, epsilon = 1e-12);
    }
}

#[test]
fn cross_entropy_matches_double_double() {
    let mut r = rng(3);
    for _ in 0..20 {
        let (n, c, d) = (r.random_range(1..40), r.random_range(2..10), r.random_range(2..32));
        let s = support(&mut r, n, c, d);
        let w = text_prototypes(&mut r, c, d);
        let tau = Temperature::new(0.01).unwrap();
        let ce = eval_ce(s.one_hot().view(), s.embeddings(), &w, tau).unwrap();
        let mut total = tf(0.0);
        for (i, &y) in s.labels().iter().enumerate() {
            let logits: Vec<f64> = (0..c)
                .map(|k| (dot_dd(s.embeddings().row(i), w.row(k)) / tf(0.01)).hi())
                .collect();
            total += lse_dd(&logits) - tf(logits[y]);
        }
        let expected = (total / tf(n as f64)).hi();
        assert!((ce - expected).abs() < 1e-10 * expected.abs().max(1.0));
    }
}

#[test]
fn balanced_accuracy_matches_confusion_matrix() {
    let mut r = rng(4);
    for _ in 0..50 {
        let c = r.random_range(2..8);
        let n = r.random_range(1..200);
        let truth: Vec<usize> = (0..n).map(|_| r.random_range(0..c)).collect();
        let pred: Vec<usize> = (0..n).map(|_| r.random_range(0..c)).collect();
        let mut confusion = vec![vec![0usize; c]; c];
        for (&t, &p) in truth.iter().zip(&pred) {
            confusion[t][p] += 1;
        }
        let present: Vec<usize> = (0..c).filter(|&k| confusion[k].iter().sum::<usize>() > 0).collect();
        let expected = present
            .iter()
            .map(|&k| confusion[k][k] as f64 / confusion[k].iter().sum::<usize>() as f64)
            .sum::<f64>()
            / present.len() as f64;
        assert_abs_diff_eq!(balanced_accuracy(&pred, &truth, c).unwrap(), expected, epsilon = 1e-12);
        let recall = per_class_recall(&pred, &truth, c).unwrap();
        for (k, r) in recall.iter().enumerate() {
            assert_eq!(r.is_some(), present.contains(&k));
        }
    }
}

/// Textbook silhouette with the intra-cluster mean over the other members.
fn naive_silhouette(x: &Array2<f64>, labels: &[usize]) -> f64 {
    let n = x.nrows();
    let dist = |i: usize, j: usize| -> f64 {
        let mut s = 0.0;
        for k in 0..x.ncols() {
            let d = x[[i, k]] - x[[j, k]];
            s += d * d;
        }
        s.sqrt()
    };
    let classes: Vec<usize> = {
        let mut c = labels.to_vec();
        c.sort_unstable();
        c.dedup();
        c
    };
    let mut total = 0.0;
    for i in 0..n {
        let own: Vec<usize> = (0..n).filter(|&j| j != i && labels[j] == labels[i]).collect();
        if own.is_empty() {
            continue;
        }
        let a = own.iter().map(|&j| dist(i, j)).sum::<f64>() / own.len() as f64;
        let b = classes
            .iter()
            .filter(|&&k| k != labels[i])
            .map(|&k| {
                let members: Vec<usize> = (0..n).filter(|&j| labels[j] == k).collect();
                members.iter().map(|&j| dist(i, j)).sum::<f64>() / members.len() as f64
            })
            .fold(f64::INFINITY, f64::min);
        total += (b - a) / a.max(b);
    }
    total / n as f64
}

#[test]
fn silhouette_matches_naive() {
    let mut r = rng(5);
    for _ in 0..10 {
        let (n, c, d) = (r.random_range(4..80), r.random_range(2..5), r.random_range(2..16));
        let x = unit_rows(&mut r, n, d);
        let mut labels: Vec<usize> = (0..n).map(|_| r.random_range(0..c)).collect();
        labels[0] = 0;
        labels[1] = 1;
        let got = silhouette_score(&x, &labels).unwrap();
        assert_abs_diff_eq!(got, naive_silhouette(&x.view().to_owned(), &labels), epsilon = 1e-10);
    }
}

#[test]
fn simpleshot_matches_class_means() {
    let mut r = rng(6);
    let s = support(&mut r, 30, 4, 10);
    let fit = fit_simpleshot(&s).unwrap();
    for k in 0..4 {
        let members: Vec<usize> = (0..30).filter(|&i| s.labels()[i] == k).collect();
        for j in 0..10 {
            let expected = if members.is_empty() {
                0.0
            } else {
                members.iter().map(|&i| s.embeddings().row(i)[j]).sum::<f64>() / members.len() as f64
            };
            assert_abs_diff_eq!(fit.prototypes.row(k)[j], expected, epsilon = 1e-12);
        }
    }
}

#[test]
fn sstext_matches_descent_oracle() {
    let mut r = rng(7);
    for instance in 0..10 {
        let (c, d) = (3, 8);
        let s = if instance % 2 == 0 { covering_support(&mut r, 7, c, d) } else { support(&mut r, 4, c, d) };
        let t = text_prototypes(&mut r, c, d);
        let counts = s.class_counts();
        let lt: Vec<f64> = counts.iter().map(|&k| if k == 0 { 1.0 } else { 1.0 / k as f64 }).collect();
        let pinned: Vec<bool> = counts.iter().map(|&k| k == 0).collect();
        let cfg = SolverConfig {
            tau: Temperature::new(0.5).unwrap(),
            ..SolverConfig::default()
        };
        let fit = fit_sstext(&s, &t, &cfg).unwrap();
        let empty = UnlabeledSet::empty(d);
        let oracle = descent_oracle(&s, &empty, &Array2::zeros((0, c)), &t, 0.5, &lt, &[0.0; 3], &pinned);
        assert!(max_abs_diff(&fit.prototypes.view().to_owned(), &oracle) < 1e-4);
    }
}

#[test]
fn update_matches_descent_oracle() {
    let mut r = rng(8);
    for instance in 0..10 {
        let (c, d) = (3, 8);
        let s = covering_support(&mut r, 6, c, d);
        let u = unlabeled(&mut r, 12, d);
        let z = codes(&mut r, 12, c);
        let t = text_prototypes(&mut r, c, d);
        let (lambdas, lt, lu) = if instance % 2 == 0 {
            let counts = s.class_counts();
            let lt: Vec<f64> = counts.iter().map(|&k| 1.0 / k as f64).collect();
            let lu: Vec<f64> = lt.iter().map(|l| 2.0 * l).collect();
            (LambdaPolicy::Adaptive, lt, lu)
        } else {
            (LambdaPolicy::fixed_uniform(c, 0.7, 0.3), vec![0.7; 3], vec![0.3; 3])
        };
        let cfg = SolverConfig {
            tau: Temperature::new(0.5).unwrap(),
            lambdas,
            ..SolverConfig::default()
        };
        let w = update_prototypes(&s, &u, z.view(), &t, &cfg).unwrap();
        let oracle = descent_oracle(&s, &u, &z, &t, 0.5, &lt, &lu, &[false; 3]);
        assert!(max_abs_diff(&w.view().to_owned(), &oracle) < 1e-4);
    }
}

#[test]
fn sinkhorn_reaches_two_class_marginal() {
    let s = array![[0.3, -0.2, 1.0, 0.1], [0.0, 0.4, -0.5, 0.2]];
    let m = LabelMarginal::new(array![0.75, 0.25]).unwrap();
    let plan = sinkhorn(&init_plan(&SimilarityMatrix::new(s).unwrap()), &m, 200).unwrap();
    let rows = plan.values().sum_axis(Axis(1));
    assert!((rows[0] - 0.75).abs() < 1e-6 && (rows[1] - 0.25).abs() < 1e-6);
    for col in plan.values().axis_iter(Axis(1)) {
        assert_abs_diff_eq!(col.sum(), 0.25, epsilon = 1e-12);
    }
}

#[test]
fn missing_class_frequency_matches_binomial() {
    // pool marginal (0.9, 0.1), K = 1, C = 2
    let labels: Vec<usize> = (0..1000).map(|i| usize::from(i >= 900)).collect();
    let mut r = rng(9);
    let pool = EvalSet::new(unit_rows(&mut r, 1000, 4), labels, 2).unwrap();
    let trials = 10_000;
    let mut missing = 0;
    for seed in 0..trials {
        let split = sample_support(&pool, &SamplingSpec { unlabeled_multiplier: 0, ..SamplingSpec::new(1, seed) }).unwrap();
        if split.support.class_counts()[1] == 0 {
            missing += 1;
        }
    }
    let frac = missing as f64 / trials as f64;
    assert!((frac - 0.81).abs() < 0.02, "fraction {frac}");
}

#[test]
fn clean_text_zero_shot_equals_nearest_center_rate() {
    use rand_distr::{Distribution, StandardNormal};
    let spec = SyntheticSpec {
        class_count: 4,
        dim: 16,
        separation: 1.2,
        noise: 1.6,
        marginal: vec![1.0; 4],
        text_noise: 0.0,
        shared: 0.0,
        text_bias: 0.0,
        pool_size: 4000,
        seed: 10,
    };
    let data = generate_synthetic(&spec).unwrap();
    let pred = classify(data.pool.embeddings(), &data.prototypes).unwrap();
    let zero_shot = balanced_accuracy(&pred, data.pool.labels(), 4).unwrap();

    // Monte Carlo estimate of nearest-center accuracy from the centers alone
    let mut r = rng(11);
    let scale = spec.noise / (spec.dim as f64).sqrt();
    let trials = 100_000;
    let mut hits = 0;
    for i in 0..trials {
        let y = i % 4;
        let x: Vec<f64> = (0..spec.dim)
            .map(|j| {
                let e: f64 = StandardNormal.sample(&mut r);
                data.centers[[y, j]] + scale * e
            })
            .collect();
        let best = (0..4)
            .max_by(|&a, &b| {
                let da: f64 = (0..spec.dim).map(|j| x[j] * data.centers[[a, j]]).sum();
                let db: f64 = (0..spec.dim).map(|j| x[j] * data.centers[[b, j]]).sum();
                da.partial_cmp(&db).unwrap()
            })
            .unwrap();
        hits += usize::from(best == y);
    }
    let expected = hits as f64 / trials as f64;
    assert!((zero_shot - expected).abs() < 0.03, "zero-shot {zero_shot} vs oracle {expected}");
}

#[test]
fn noiseless_clusters_are_perfect() {
    let spec = SyntheticSpec {
        noise: 0.0,
        pool_size: 300,
        ..SyntheticSpec::default()
    };
    let data = generate_synthetic(&spec).unwrap();
    // every sample equals its offset center, so silhouette is 1
    let s = silhouette_score(data.pool.embeddings(), data.pool.labels()).unwrap();
    assert_abs_diff_eq!(s, 1.0, epsilon = 1e-9);
    let split = sample_support(&data.pool, &SamplingSpec::new(1, 0)).unwrap();
    let fit = fit_simpleshot(&split.support).unwrap();
    let pred = classify(split.eval.embeddings(), &fit.prototypes).unwrap();
    let present: Vec<usize> = split.support.class_counts().iter().enumerate().filter(|(_, &k)| k > 0).map(|(c, _)| c).collect();
    for (p, y) in pred.iter().zip(split.eval.labels()) {
        if present.contains(y) {
            assert_eq!(p, y);
        }
    }
    let _ = EmbeddingMatrix::empty(1);
}
