//! Ground-truth evaluation of an embedding: mean Kendall's tau over heads,
//! kNN precision and scale-fitted distance RMSE.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{diameter, largest_empty_ball, Hull};
use crate::oracle::ceil_log2;
use crate::points::PointSet;

fn check_sizes(truth: &PointSet, emb: &PointSet) -> Result<()> {
    if truth.len() != emb.len() {
        return Err(Error::SizeMismatch {
            what: "embedding".into(),
            expected: truth.len(),
            got: emb.len(),
        });
    }
    Ok(())
}

/// Objects other than `head`, nearest first, ties by index.
fn ranking_from(points: &PointSet, head: usize) -> Vec<usize> {
    let mut keyed: Vec<(f64, usize)> = (0..points.len())
        .filter(|&x| x != head)
        .map(|x| (points.dist2(head, x), x))
        .collect();
    keyed.sort_unstable_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    keyed.into_iter().map(|(_, x)| x).collect()
}

/// Number of pairs out of order in `v`, which ends up sorted.
fn merge_count(v: &mut [usize]) -> u64 {
    let n = v.len();
    if n < 2 {
        return 0;
    }
    let mid = n / 2;
    let mut c = merge_count(&mut v[..mid]) + merge_count(&mut v[mid..]);
    let mut merged = Vec::with_capacity(n);
    let (mut i, mut j) = (0, mid);
    while i < mid && j < n {
        if v[j] < v[i] {
            c += (mid - i) as u64;
            merged.push(v[j]);
            j += 1;
        } else {
            merged.push(v[i]);
            i += 1;
        }
    }
    merged.extend_from_slice(&v[i..mid]);
    merged.extend_from_slice(&v[j..n]);
    v.copy_from_slice(&merged);
    c
}

/// Kendall's tau between the true and embedded orderings of the other
/// `n - 1` objects, averaged over every head.
pub fn kendall_tau_mean(truth: &PointSet, emb: &PointSet) -> Result<f64> {
    check_sizes(truth, emb)?;
    let n = truth.len();
    if n < 3 {
        return Err(Error::UndefinedMetric(format!("kendall tau needs n >= 3, got {n}")));
    }
    let pairs = ((n - 1) * (n - 2) / 2) as f64;
    let per_head: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|h| {
            let mut emb_rank = vec![0usize; n];
            for (r, x) in ranking_from(emb, h).into_iter().enumerate() {
                emb_rank[x] = r;
            }
            let mut seq: Vec<usize> = ranking_from(truth, h).into_iter().map(|x| emb_rank[x]).collect();
            1.0 - 2.0 * merge_count(&mut seq) as f64 / pairs
        })
        .collect();
    Ok(per_head.iter().sum::<f64>() / n as f64)
}

/// Mean fraction of each object's true `k` nearest that are also among its
/// embedded `k` nearest.
pub fn knn_precision(truth: &PointSet, emb: &PointSet, k: usize) -> Result<f64> {
    check_sizes(truth, emb)?;
    let n = truth.len();
    if k < 1 || k >= n {
        return Err(Error::InvalidArgument(format!("knn needs 1 <= k < n (k = {k}, n = {n})")));
    }
    let per_object: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|x| {
            let mut a = ranking_from(truth, x);
            let mut b = ranking_from(emb, x);
            a.truncate(k);
            b.truncate(k);
            a.sort_unstable();
            b.sort_unstable();
            let hits = a.iter().filter(|y| b.binary_search(y).is_ok()).count();
            hits as f64 / k as f64
        })
        .collect();
    Ok(per_object.iter().sum::<f64>() / n as f64)
}

/// `(rmse, s)` with `s = sum d*dh / sum dh^2` over pairs and
/// `rmse = sqrt(1/n * sum (d - s*dh)^2)`.
pub fn distance_rmse(truth: &PointSet, emb: &PointSet) -> Result<(f64, f64)> {
    check_sizes(truth, emb)?;
    let n = truth.len();
    if n < 2 {
        return Err(Error::UndefinedMetric(format!("rmse needs n >= 2, got {n}")));
    }
    let (mut dd, mut hh) = (0.0, 0.0);
    for i in 0..n {
        for j in i + 1..n {
            let d = truth.dist(i, j);
            let h = emb.dist(i, j);
            dd += d * h;
            hh += h * h;
        }
    }
    if hh == 0.0 {
        return Err(Error::DegenerateEmbedding);
    }
    let s = dd / hh;
    let mut sse = 0.0;
    for i in 0..n {
        for j in i + 1..n {
            let r = truth.dist(i, j) - s * emb.dist(i, j);
            sse += r * r;
        }
    }
    Ok(((sse / n as f64).sqrt(), s))
}

/// Largest empty ball radius inside the hull, on a grid of step
/// `diameter / 200`. Only for `d <= 3`.
pub fn epsilon_estimate(points: &PointSet) -> Result<f64> {
    if points.dim() > 3 {
        return Err(Error::UnsupportedDiagnostic(points.dim()));
    }
    let hull = Hull::new(points)?;
    let step = diameter(points) / 200.0;
    Ok(largest_empty_ball(points, &hull, step).0)
}

pub fn default_knn_k(n: usize) -> usize {
    (ceil_log2(n) as usize).max(1)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub mean_tau: f64,
    pub knn_precision: f64,
    pub k_used: usize,
    pub rmse: f64,
    pub fitted_scale: f64,
    pub comparisons_unique: u64,
    pub comparisons_total: u64,
    pub dimension_estimate: usize,
    /// Tau ranks only the `n - 1` objects other than the head.
    pub tau_excludes_head: bool,
}

/// All three metrics; the comparison and dimension fields start at zero
/// for the caller to fill in.
pub fn evaluate(truth: &PointSet, emb: &PointSet, k: Option<usize>) -> Result<EvalReport> {
    let k_used = k.unwrap_or_else(|| default_knn_k(truth.len()));
    let mean_tau = kendall_tau_mean(truth, emb)?;
    let knn_precision = knn_precision(truth, emb, k_used)?;
    let (rmse, fitted_scale) = distance_rmse(truth, emb)?;
    Ok(EvalReport {
        mean_tau,
        knn_precision,
        k_used,
        rmse,
        fitted_scale,
        comparisons_unique: 0,
        comparisons_total: 0,
        dimension_estimate: emb.dim(),
        tau_excludes_head: true,
    })
}

/// One results-table row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableRow {
    pub method: String,
    pub dataset: String,
    pub d: usize,
    pub d_hat: usize,
    pub comparisons: u64,
    pub tau: f64,
    pub knn: f64,
    pub rmse: f64,
}

impl TableRow {
    pub fn from_report(method: &str, dataset: &str, d: usize, report: &EvalReport) -> Self {
        TableRow {
            method: method.into(),
            dataset: dataset.into(),
            d,
            d_hat: report.dimension_estimate,
            comparisons: report.comparisons_unique,
            tau: report.mean_tau,
            knn: report.knn_precision,
            rmse: report.rmse,
        }
    }
}
