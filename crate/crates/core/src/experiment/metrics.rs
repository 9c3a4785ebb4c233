//! Classification and cluster-separability metrics.

use ndarray::{ArrayView1, Axis};
use serde::Serialize;

use crate::data::EmbeddingMatrix;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricReport {
    /// Mean recall over classes present in the truth.
    pub aca: f64,
    pub acc: f64,
    /// Recall per class; `None` for classes absent from the truth.
    pub per_class_recall: Vec<Option<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub silhouette: Option<f64>,
}

impl MetricReport {
    pub fn new(pred: &[usize], truth: &[usize], class_count: usize) -> Result<Self> {
        let per_class_recall = per_class_recall(pred, truth, class_count)?;
        Ok(Self {
            aca: mean_present(&per_class_recall),
            acc: accuracy(pred, truth)?,
            per_class_recall,
            silhouette: None,
        })
    }
}

fn check_lengths(pred: &[usize], truth: &[usize]) -> Result<()> {
    if pred.is_empty() {
        return Err(Error::Empty("no predictions".into()));
    }
    if pred.len() != truth.len() {
        return Err(Error::Shape(format!(
            "{} predictions for {} labels",
            pred.len(),
            truth.len()
        )));
    }
    Ok(())
}

pub fn per_class_recall(pred: &[usize], truth: &[usize], class_count: usize) -> Result<Vec<Option<f64>>> {
    check_lengths(pred, truth)?;
    let mut hits = vec![0usize; class_count];
    let mut totals = vec![0usize; class_count];
    for (&p, &y) in pred.iter().zip(truth) {
        if y >= class_count {
            return Err(Error::Data(format!("label {y} out of range for {class_count} classes")));
        }
        totals[y] += 1;
        if p == y {
            hits[y] += 1;
        }
    }
    Ok(hits
        .iter()
        .zip(&totals)
        .map(|(&h, &n)| (n > 0).then(|| h as f64 / n as f64))
        .collect())
}

fn mean_present(recalls: &[Option<f64>]) -> f64 {
    let present: Vec<f64> = recalls.iter().flatten().copied().collect();
    present.iter().sum::<f64>() / present.len() as f64
}

/// Balanced accuracy: mean per-class recall over the classes present in `truth`.
pub fn balanced_accuracy(pred: &[usize], truth: &[usize], class_count: usize) -> Result<f64> {
    Ok(mean_present(&per_class_recall(pred, truth, class_count)?))
}

pub fn accuracy(pred: &[usize], truth: &[usize]) -> Result<f64> {
    check_lengths(pred, truth)?;
    let hits = pred.iter().zip(truth).filter(|(p, y)| p == y).count();
    Ok(hits as f64 / pred.len() as f64)
}

fn euclidean(a: ArrayView1<'_, f64>, b: ArrayView1<'_, f64>) -> f64 {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Mean silhouette coefficient with Euclidean distance. Samples in singleton
/// clusters contribute 0.
pub fn silhouette_score(embeddings: &EmbeddingMatrix, labels: &[usize]) -> Result<f64> {
    let n = embeddings.rows();
    if labels.len() != n {
        return Err(Error::Shape(format!("{} labels for {n} embeddings", labels.len())));
    }
    if n == 0 {
        return Err(Error::Empty("no samples".into()));
    }
    let classes = labels.iter().max().map_or(0, |m| m + 1);
    let mut sizes = vec![0usize; classes];
    for &y in labels {
        sizes[y] += 1;
    }
    if sizes.iter().filter(|&&s| s > 0).count() < 2 {
        return Err(Error::Data("silhouette needs at least two populated classes".into()));
    }

    let x = embeddings.view();
    // per-sample sums of distances to each class
    let mut sums = ndarray::Array2::<f64>::zeros((n, classes));
    for i in 0..n {
        let xi = x.row(i);
        for j in (i + 1)..n {
            let d = euclidean(xi, x.row(j));
            sums[[i, labels[j]]] += d;
            sums[[j, labels[i]]] += d;
        }
    }
    let total: f64 = sums
        .axis_iter(Axis(0))
        .zip(labels)
        .map(|(row, &own)| {
            if sizes[own] <= 1 {
                return 0.0;
            }
            let a = row[own] / (sizes[own] - 1) as f64;
            let b = row
                .iter()
                .zip(&sizes)
                .enumerate()
                .filter(|&(c, (_, &size))| c != own && size > 0)
                .map(|(_, (s, &size))| s / size as f64)
                .fold(f64::INFINITY, f64::min);
            let denom = a.max(b);
            if denom > 0.0 {
                (b - a) / denom
            } else {
                0.0
            }
        })
        .sum();
    Ok(total / n as f64)
}

/// Pearson correlation coefficient.
pub fn correlate(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::Shape(format!("{} vs {} values", x.len(), y.len())));
    }
    if x.len() < 3 {
        return Err(Error::Data("correlation needs at least 3 points".into()));
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::Data("zero variance".into()));
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}
