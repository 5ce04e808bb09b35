//! Slow reference implementations the library is checked against.
#![allow(dead_code)]

use std::cmp::Ordering;

use ordbasis::geometry::Hull;
use ordbasis::points::PointSet;

fn key_cmp(p: &PointSet, h: usize, a: usize, b: usize) -> Ordering {
    p.dist2(h, a).total_cmp(&p.dist2(h, b)).then(a.cmp(&b))
}

/// Mean over heads of (concordant - discordant) / pairs, by direct pair counting.
pub fn brute_tau(truth: &PointSet, emb: &PointSet) -> f64 {
    let n = truth.len();
    let pairs = ((n - 1) * (n - 2) / 2) as f64;
    let mut total = 0.0;
    for h in 0..n {
        let mut score = 0i64;
        for i in 0..n {
            for j in i + 1..n {
                if i == h || j == h {
                    continue;
                }
                if key_cmp(truth, h, i, j) == key_cmp(emb, h, i, j) {
                    score += 1;
                } else {
                    score -= 1;
                }
            }
        }
        total += score as f64 / pairs;
    }
    total / n as f64
}

fn k_nearest(p: &PointSet, x: usize, k: usize) -> Vec<usize> {
    let mut others: Vec<usize> = (0..p.len()).filter(|&y| y != x).collect();
    others.sort_by(|&a, &b| key_cmp(p, x, a, b));
    others.truncate(k);
    others
}

pub fn brute_knn(truth: &PointSet, emb: &PointSet, k: usize) -> f64 {
    let n = truth.len();
    let mut total = 0.0;
    for x in 0..n {
        let a = k_nearest(truth, x, k);
        let b = k_nearest(emb, x, k);
        total += a.iter().filter(|y| b.contains(y)).count() as f64 / k as f64;
    }
    total / n as f64
}

/// `sqrt(1/n * sum over pairs (d - s*dh)^2)` at a given scale.
pub fn rmse_at(truth: &PointSet, emb: &PointSet, s: f64) -> f64 {
    let n = truth.len();
    let mut sse = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i < j {
                let r = truth.dist(i, j) - s * emb.dist(i, j);
                sse += r * r;
            }
        }
    }
    (sse / n as f64).sqrt()
}

/// Closed-form least-squares scale, summed over ordered pairs.
pub fn brute_rmse(truth: &PointSet, emb: &PointSet) -> (f64, f64) {
    let n = truth.len();
    let (mut num, mut den) = (0.0, 0.0);
    for i in 0..n {
        for j in 0..n {
            if i != j {
                num += truth.dist(i, j) * emb.dist(i, j);
                den += emb.dist(i, j).powi(2);
            }
        }
    }
    let s = num / den;
    (rmse_at(truth, emb, s), s)
}

/// Minimizes `rmse_at` over `s` by golden-section search on `[0, hi]`.
pub fn golden_rmse(truth: &PointSet, emb: &PointSet, hi: f64) -> f64 {
    let phi = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (0.0, hi);
    for _ in 0..200 {
        let c = b - phi * (b - a);
        let d = a + phi * (b - a);
        if rmse_at(truth, emb, c) < rmse_at(truth, emb, d) {
            b = d;
        } else {
            a = c;
        }
    }
    rmse_at(truth, emb, (a + b) / 2.0)
}

fn solve(mut m: Vec<Vec<f64>>, mut rhs: Vec<f64>) -> Option<Vec<f64>> {
    let k = rhs.len();
    for col in 0..k {
        let piv = (col..k).max_by(|&a, &b| m[a][col].abs().total_cmp(&m[b][col].abs()))?;
        if m[piv][col].abs() < 1e-12 {
            return None;
        }
        m.swap(col, piv);
        rhs.swap(col, piv);
        for r in 0..k {
            if r != col {
                let f = m[r][col] / m[col][col];
                let pivot_row = m[col].clone();
                for (v, p) in m[r].iter_mut().zip(&pivot_row).skip(col) {
                    *v -= f * p;
                }
                rhs[r] -= f * rhs[col];
            }
        }
    }
    Some((0..k).map(|i| rhs[i] / m[i][i]).collect())
}

/// Euclidean distance from `x` to the convex hull of `verts`, by projecting
/// onto the affine hull of every subset and keeping feasible projections.
pub fn dist_to_hull(x: &[f64], verts: &[Vec<f64>]) -> f64 {
    let m = verts.len();
    let mut best = f64::INFINITY;
    for mask in 1u32..(1 << m) {
        let idx: Vec<usize> = (0..m).filter(|i| mask >> i & 1 == 1).collect();
        let base = &verts[idx[0]];
        let dirs: Vec<Vec<f64>> = idx[1..]
            .iter()
            .map(|&i| verts[i].iter().zip(base).map(|(a, b)| a - b).collect())
            .collect();
        let rel: Vec<f64> = x.iter().zip(base).map(|(a, b)| a - b).collect();
        let dot = |u: &[f64], v: &[f64]| u.iter().zip(v).map(|(a, b)| a * b).sum::<f64>();
        let lambdas = if dirs.is_empty() {
            Some(Vec::new())
        } else {
            let gram = dirs.iter().map(|u| dirs.iter().map(|v| dot(u, v)).collect()).collect();
            let rhs = dirs.iter().map(|u| dot(u, &rel)).collect();
            solve(gram, rhs)
        };
        let Some(l) = lambdas else { continue };
        if l.iter().any(|&v| v < -1e-12) || l.iter().sum::<f64>() > 1.0 + 1e-12 {
            continue;
        }
        let mut proj = base.clone();
        for (li, u) in l.iter().zip(&dirs) {
            for (p, ui) in proj.iter_mut().zip(u) {
                *p += li * ui;
            }
        }
        let d = proj.iter().zip(x).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        best = best.min(d);
    }
    best
}

pub fn max_pairwise(rows: &[Vec<f64>]) -> f64 {
    let mut m = 0.0f64;
    for a in rows {
        for b in rows {
            m = m.max(a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt());
        }
    }
    m
}

fn nearest(points: &PointSet, x: &[f64]) -> f64 {
    points
        .rows()
        .map(|r| r.iter().zip(x).map(|(a, b)| (a - b).powi(2)).sum::<f64>())
        .fold(f64::INFINITY, f64::min)
        .sqrt()
}

fn bounds(points: &PointSet) -> (Vec<f64>, Vec<f64>) {
    let d = points.dim();
    let mut lo = vec![f64::INFINITY; d];
    let mut hi = vec![f64::NEG_INFINITY; d];
    for r in points.rows() {
        for k in 0..d {
            lo[k] = lo[k].min(r[k]);
            hi[k] = hi[k].max(r[k]);
        }
    }
    (lo, hi)
}

/// Centers of a uniform grid with `cells` cells per side over the bounding
/// box of `frame`, keeping those inside `hull`. Returns the centers and the
/// cell half-diagonal.
pub fn grid_centers(frame: &PointSet, hull: &Hull, cells: usize) -> (Vec<Vec<f64>>, f64) {
    let d = frame.dim();
    let (lo, hi) = bounds(frame);
    let widths: Vec<f64> = lo.iter().zip(&hi).map(|(a, b)| (b - a) / cells as f64).collect();
    let half_diag = widths.iter().map(|w| (w / 2.0).powi(2)).sum::<f64>().sqrt();
    let mut out = Vec::new();
    let mut idx = vec![0usize; d];
    loop {
        let c: Vec<f64> = (0..d).map(|k| lo[k] + (idx[k] as f64 + 0.5) * widths[k]).collect();
        if hull.contains(&c) {
            out.push(c);
        }
        let mut k = 0;
        loop {
            if k == d {
                return (out, half_diag);
            }
            idx[k] += 1;
            if idx[k] < cells {
                break;
            }
            idx[k] = 0;
            k += 1;
        }
    }
}

/// Largest distance from a grid center inside `hull` to its nearest point,
/// polished by a shrinking coordinate search that stays inside the hull.
pub fn grid_empty_ball(points: &PointSet, hull: &Hull, frame: &PointSet, cells: usize) -> (f64, f64) {
    let (centers, half_diag) = grid_centers(frame, hull, cells);
    let mut best = (0.0f64, Vec::new());
    for c in centers {
        let r = nearest(points, &c);
        if r > best.0 {
            best = (r, c);
        }
    }
    let (mut r, mut c) = best;
    let mut step = half_diag;
    while step > half_diag * 1e-4 && !c.is_empty() {
        let mut moved = false;
        for k in 0..c.len() {
            for sign in [-1.0, 1.0] {
                let mut t = c.clone();
                t[k] += sign * step;
                if hull.contains(&t) {
                    let rt = nearest(points, &t);
                    if rt > r {
                        (r, c, moved) = (rt, t, true);
                    }
                }
            }
        }
        if !moved {
            step /= 2.0;
        }
    }
    (r, half_diag)
}

/// Upper bound on how many points a radius-`r` ball centered in `hull` holds:
/// every such center lies within `half_diag` of a grid center.
pub fn grid_max_count(points: &PointSet, hull: &Hull, frame: &PointSet, cells: usize, r: f64) -> usize {
    let (centers, half_diag) = grid_centers(frame, hull, cells);
    centers
        .iter()
        .map(|c| {
            points
                .rows()
                .filter(|p| {
                    p.iter().zip(c).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt()
                        <= r + half_diag
                })
                .count()
        })
        .max()
        .unwrap_or(0)
}
