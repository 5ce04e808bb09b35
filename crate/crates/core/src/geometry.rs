//! Low-dimensional Euclidean helpers for diagnostics: convex hull
//! halfspaces (d <= 3), largest empty ball and densest ball searches.

use std::collections::{BinaryHeap, HashSet};

use crate::error::{Error, Result};
use crate::points::{sq_dist, PointSet};

/// `normal . x <= offset`, with a unit normal.
#[derive(Debug, Clone, PartialEq)]
pub struct Halfspace {
    pub normal: Vec<f64>,
    pub offset: f64,
}

impl Halfspace {
    pub fn excess(&self, x: &[f64]) -> f64 {
        self.normal.iter().zip(x).map(|(a, b)| a * b).sum::<f64>() - self.offset
    }
}

/// Convex hull of a full-dimensional point set in 1, 2 or 3 dimensions.
#[derive(Debug, Clone)]
pub struct Hull {
    pub dim: usize,
    pub halfspaces: Vec<Halfspace>,
    scale: f64,
}

impl Hull {
    pub fn new(points: &PointSet) -> Result<Hull> {
        let dim = points.dim();
        let scale = diameter(points).max(f64::MIN_POSITIVE);
        let halfspaces = match dim {
            1 => hull_1d(points),
            2 => hull_2d(points),
            3 => hull_3d(points, scale),
            d => return Err(Error::UnsupportedDiagnostic(d)),
        };
        if halfspaces.len() <= dim {
            return Err(Error::InvalidArgument(format!(
                "points do not span {dim} dimensions"
            )));
        }
        Ok(Hull {
            dim,
            halfspaces,
            scale,
        })
    }

    /// Membership with a tolerance relative to the hull's diameter.
    pub fn contains(&self, x: &[f64]) -> bool {
        let tol = 1e-9 * self.scale;
        self.halfspaces.iter().all(|h| h.excess(x) <= tol)
    }

    /// True when no point of the axis-aligned box can lie in the hull.
    fn box_outside(&self, center: &[f64], half: &[f64]) -> bool {
        self.halfspaces.iter().any(|h| {
            let reach: f64 = h.normal.iter().zip(half).map(|(n, w)| n.abs() * w).sum();
            h.excess(center) > reach
        })
    }
}

pub fn diameter(points: &PointSet) -> f64 {
    let n = points.len();
    let mut best = 0.0f64;
    for i in 0..n {
        for j in i + 1..n {
            best = best.max(points.dist2(i, j));
        }
    }
    best.sqrt()
}

fn hull_1d(points: &PointSet) -> Vec<Halfspace> {
    let lo = points.rows().map(|r| r[0]).fold(f64::INFINITY, f64::min);
    let hi = points.rows().map(|r| r[0]).fold(f64::NEG_INFINITY, f64::max);
    if hi.is_nan() || lo.is_nan() || hi <= lo {
        return Vec::new();
    }
    vec![
        Halfspace { normal: vec![1.0], offset: hi },
        Halfspace { normal: vec![-1.0], offset: -lo },
    ]
}

fn cross2(o: &[f64], a: &[f64], b: &[f64]) -> f64 {
    (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
}

fn hull_2d(points: &PointSet) -> Vec<Halfspace> {
    let mut pts: Vec<&[f64]> = points.rows().collect();
    pts.sort_by(|a, b| a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])));
    pts.dedup();
    if pts.len() < 3 {
        return Vec::new();
    }
    // Andrew's monotone chain, counter-clockwise, collinear points dropped.
    let mut hull: Vec<&[f64]> = Vec::with_capacity(2 * pts.len());
    for pass in 0..2 {
        let start = hull.len();
        let iter: Box<dyn Iterator<Item = &&[f64]>> = if pass == 0 {
            Box::new(pts.iter())
        } else {
            Box::new(pts.iter().rev())
        };
        for &p in iter {
            while hull.len() >= start + 2 && cross2(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0.0 {
                hull.pop();
            }
            hull.push(p);
        }
        hull.pop();
    }
    if hull.len() < 3 {
        return Vec::new();
    }
    (0..hull.len())
        .map(|i| {
            let (a, b) = (hull[i], hull[(i + 1) % hull.len()]);
            let (dx, dy) = (b[0] - a[0], b[1] - a[1]);
            let len = dx.hypot(dy);
            let normal = vec![dy / len, -dx / len];
            let offset = normal[0] * a[0] + normal[1] * a[1];
            Halfspace { normal, offset }
        })
        .collect()
}

/// Every supporting plane through three input points. Cubic in the number
/// of points; meant for the few hundred points of a diagnostic.
fn hull_3d(points: &PointSet, scale: f64) -> Vec<Halfspace> {
    let n = points.len();
    let tol = 1e-9 * scale;
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for i in 0..n {
        let a = points.row(i);
        for j in i + 1..n {
            let b = points.row(j);
            let u = [b[0] - a[0], b[1] - a[1], b[2] - a[2]];
            for k in j + 1..n {
                let c = points.row(k);
                let v = [c[0] - a[0], c[1] - a[1], c[2] - a[2]];
                let mut nrm = [
                    u[1] * v[2] - u[2] * v[1],
                    u[2] * v[0] - u[0] * v[2],
                    u[0] * v[1] - u[1] * v[0],
                ];
                let len = (nrm[0] * nrm[0] + nrm[1] * nrm[1] + nrm[2] * nrm[2]).sqrt();
                if len <= 1e-12 * scale * scale {
                    continue;
                }
                nrm.iter_mut().for_each(|x| *x /= len);
                let off = nrm[0] * a[0] + nrm[1] * a[1] + nrm[2] * a[2];
                let (mut above, mut below) = (false, false);
                for p in points.rows() {
                    let e = nrm[0] * p[0] + nrm[1] * p[1] + nrm[2] * p[2] - off;
                    above |= e > tol;
                    below |= e < -tol;
                    if above && below {
                        break;
                    }
                }
                let sign = match (above, below) {
                    (false, true) => 1.0,
                    (true, false) => -1.0,
                    _ => continue,
                };
                let normal: Vec<f64> = nrm.iter().map(|x| sign * x).collect();
                let offset = sign * off;
                let key: Vec<i64> = normal
                    .iter()
                    .chain(std::iter::once(&(offset / scale)))
                    .map(|x| (x * 1e8).round() as i64)
                    .collect();
                if seen.insert(key) {
                    out.push(Halfspace { normal, offset });
                }
            }
        }
    }
    out
}

fn nearest_dist(points: &PointSet, x: &[f64]) -> f64 {
    points
        .rows()
        .map(|p| sq_dist(p, x))
        .fold(f64::INFINITY, f64::min)
        .sqrt()
}

fn count_within(points: &PointSet, x: &[f64], r: f64) -> usize {
    let r2 = r * r;
    points.rows().filter(|p| sq_dist(p, x) <= r2).count()
}

struct Cell {
    bound: f64,
    center: Vec<f64>,
    half: Vec<f64>,
}

impl PartialEq for Cell {
    fn eq(&self, other: &Self) -> bool {
        self.bound == other.bound
    }
}
impl Eq for Cell {}
impl PartialOrd for Cell {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Cell {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.bound.total_cmp(&other.bound)
    }
}

fn bounding_box(points: &PointSet) -> (Vec<f64>, Vec<f64>) {
    let d = points.dim();
    let mut lo = vec![f64::INFINITY; d];
    let mut hi = vec![f64::NEG_INFINITY; d];
    for p in points.rows() {
        for k in 0..d {
            lo[k] = lo[k].min(p[k]);
            hi[k] = hi[k].max(p[k]);
        }
    }
    let center = lo.iter().zip(&hi).map(|(a, b)| (a + b) / 2.0).collect();
    let half = lo.iter().zip(&hi).map(|(a, b)| (b - a) / 2.0).collect();
    (center, half)
}

fn children(c: &Cell) -> Vec<(Vec<f64>, Vec<f64>)> {
    let d = c.center.len();
    let half: Vec<f64> = c.half.iter().map(|h| h / 2.0).collect();
    (0..1usize << d)
        .map(|mask| {
            let center = (0..d)
                .map(|k| {
                    let s = if mask >> k & 1 == 1 { 1.0 } else { -1.0 };
                    c.center[k] + s * half[k]
                })
                .collect();
            (center, half.clone())
        })
        .collect()
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Best-first branch and bound over a dyadic grid of the bounding box.
/// `value` scores a cell center; `bound(center, half_diagonal)` must bound
/// `value` from above over the whole cell. Cells are split until their
/// widest side is at most `step`. Returns the best score and its center.
fn grid_search<V, B>(points: &PointSet, hull: &Hull, step: f64, value: V, bound: B) -> (f64, Vec<f64>)
where
    V: Fn(&[f64]) -> f64,
    B: Fn(&[f64], f64) -> f64,
{
    let (center, half) = bounding_box(points);
    let mut best = (f64::NEG_INFINITY, center.clone());
    let mut heap = BinaryHeap::new();
    let root_bound = bound(&center, norm(&half));
    heap.push(Cell {
        bound: root_bound,
        center,
        half,
    });
    while let Some(cell) = heap.pop() {
        if cell.bound <= best.0 {
            break;
        }
        if hull.contains(&cell.center) {
            let v = value(&cell.center);
            if v > best.0 {
                best = (v, cell.center.clone());
            }
        }
        let widest = cell.half.iter().fold(0.0f64, |a, &b| a.max(b)) * 2.0;
        if widest <= step {
            continue;
        }
        for (center, half) in children(&cell) {
            if hull.box_outside(&center, &half) {
                continue;
            }
            let b = bound(&center, norm(&half));
            if b > best.0 {
                heap.push(Cell { bound: b, center, half });
            }
        }
    }
    best
}

/// Radius and center of the largest ball centered in the hull that holds no
/// point, maximized over grid cell centers no wider than `step`.
pub fn largest_empty_ball(points: &PointSet, hull: &Hull, step: f64) -> (f64, Vec<f64>) {
    grid_search(
        points,
        hull,
        step,
        |x| nearest_dist(points, x),
        |c, r| nearest_dist(points, c) + r,
    )
}

/// Upper bound on the number of points any radius-`r` ball centered in the
/// hull can hold: counts within `r` plus the leaf half-diagonal.
pub fn max_points_in_ball(points: &PointSet, hull: &Hull, r: f64, step: f64) -> usize {
    let leaf_reach = step * (points.dim() as f64).sqrt() / 2.0;
    let (best, _) = grid_search(
        points,
        hull,
        step,
        |x| count_within(points, x, r + leaf_reach) as f64,
        |c, reach| count_within(points, c, r + reach.max(leaf_reach)) as f64,
    );
    best.max(0.0) as usize
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn square_hull() {
        let pts = PointSet::from_rows(&[[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0], [0.5, 0.5], [0.5, 0.0]]).unwrap();
        let h = Hull::new(&pts).unwrap();
        assert_eq!(h.halfspaces.len(), 4);
        assert!(h.contains(&[0.2, 0.9]));
        assert!(!h.contains(&[1.1, 0.5]));
    }

    #[test]
    fn cube_hull_has_six_faces() {
        let mut rows = Vec::new();
        for m in 0..8 {
            rows.push([(m & 1) as f64, (m >> 1 & 1) as f64, (m >> 2 & 1) as f64]);
        }
        rows.push([0.5, 0.5, 0.5]);
        let h = Hull::new(&PointSet::from_rows(&rows).unwrap()).unwrap();
        assert_eq!(h.halfspaces.len(), 6);
        assert!(h.contains(&[0.9, 0.1, 0.5]));
        assert!(!h.contains(&[0.5, 0.5, 1.01]));
    }

    #[test]
    fn degenerate_sets_are_rejected() {
        let pts = PointSet::from_rows(&[[0.0, 0.0], [1.0, 1.0], [2.0, 2.0]]).unwrap();
        assert!(Hull::new(&pts).is_err());
        let pts = PointSet::new(4, vec![0.0; 8]).unwrap();
        assert!(matches!(Hull::new(&pts), Err(Error::UnsupportedDiagnostic(4))));
    }

    #[test]
    fn empty_ball_on_a_line() {
        let pts = PointSet::from_line(&[0.0, 1.0, 3.0, 4.0]);
        let h = Hull::new(&pts).unwrap();
        let (r, c) = largest_empty_ball(&pts, &h, 0.01);
        assert!((r - 1.0).abs() < 0.01, "{r}");
        assert!((c[0] - 2.0).abs() < 0.01);
    }

    #[test]
    fn densest_ball_is_an_upper_bound() {
        let pts = PointSet::from_line(&[0.0, 0.1, 0.2, 2.0, 3.0]);
        let h = Hull::new(&pts).unwrap();
        let k = max_points_in_ball(&pts, &h, 0.15, 0.01);
        assert!(k >= 3);
        assert!(k <= 3, "{k}");
    }
}
