//! Ordinal coordinates from a basis.
//!
//! The coordinate of `x` on an axis is the median axis position among the
//! axis members inside the lens that the two endpoints form with `x` as apex.
//! This reads the rank table only, so embedding costs no comparisons.

use serde::{Deserialize, Serialize};

use crate::basis::{Axis, BasisRun};
use crate::error::{Error, Result};
use crate::oracle::{CountingOracle, TripletSource};
use crate::points::PointSet;
use crate::ranks::RankTable;

/// `n x d_hat` integer coordinates (axis positions).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OrdinalEmbedding {
    dim: usize,
    coords: Vec<usize>,
    /// Endpoint pairs of the producing basis, e.g. `"12-40,7-3"`.
    pub basis_ref: String,
}

impl OrdinalEmbedding {
    pub fn len(&self) -> usize {
        self.coords.len().checked_div(self.dim).unwrap_or(0)
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row(&self, x: usize) -> &[usize] {
        &self.coords[x * self.dim..(x + 1) * self.dim]
    }

    pub fn coord(&self, x: usize, axis: usize) -> usize {
        self.coords[x * self.dim + axis]
    }

    pub fn to_positions(&self) -> PointSet {
        PointSet::new(self.dim, self.coords.iter().map(|&c| c as f64).collect())
            .expect("embedding has at least one axis")
    }

    pub fn distance(&self, x: usize, y: usize) -> f64 {
        embedded_distance(self, x, y)
    }
}

fn basis_ref(axes: &[Axis]) -> String {
    axes.iter()
        .map(|a| format!("{}-{}", a.first_endpoint, a.second_endpoint))
        .collect::<Vec<_>>()
        .join(",")
}

/// Axis members inside the lens with apex `x`, in axis order, as positions.
fn lens_positions(table: &RankTable, x: usize, axis: &Axis) -> Result<Vec<usize>> {
    let r1 = table.column(axis.first_endpoint)?;
    let r2 = table.column(axis.second_endpoint)?;
    Ok(axis
        .members
        .iter()
        .enumerate()
        .filter(|&(_, &m)| r1[m] <= r1[x] && r2[m] <= r2[x])
        .map(|(i, _)| i)
        .collect())
}

/// Lower median of the lens positions on `axis`.
pub fn coordinate(table: &RankTable, x: usize, axis: &Axis) -> Result<usize> {
    let positions = lens_positions(table, x, axis)?;
    if positions.is_empty() {
        return Err(Error::InternalInvariant(format!(
            "object {x} has no member of axis {}-{} in its lens ({} members)",
            axis.first_endpoint,
            axis.second_endpoint,
            axis.len()
        )));
    }
    Ok(positions[(positions.len() - 1) / 2])
}

/// The lens member truly closest to `x`, found by a linear tournament.
pub fn linear_search_coordinate<S: TripletSource>(
    table: &RankTable,
    x: usize,
    axis: &Axis,
    oracle: &mut CountingOracle<S>,
) -> Result<usize> {
    let positions = lens_positions(table, x, axis)?;
    match positions.as_slice() {
        [] => Err(Error::InternalInvariant(format!(
            "object {x} has no member of axis {}-{} in its lens",
            axis.first_endpoint, axis.second_endpoint
        ))),
        [only] => Ok(*only),
        _ => {
            let members: Vec<usize> = positions.iter().map(|&i| axis.members[i]).collect();
            let best = oracle
                .nearest_among(x, &members)?
                .expect("at least two lens members");
            Ok(axis.position(best).expect("lens member lies on the axis"))
        }
    }
}

fn embed_with<F>(n: usize, axes: &[Axis], mut coord: F) -> Result<OrdinalEmbedding>
where
    F: FnMut(usize, &Axis) -> Result<usize>,
{
    if axes.is_empty() {
        return Err(Error::InvalidArgument("basis has no axes".into()));
    }
    let mut coords = Vec::with_capacity(n * axes.len());
    for x in 0..n {
        for axis in axes {
            coords.push(coord(x, axis)?);
        }
    }
    Ok(OrdinalEmbedding {
        dim: axes.len(),
        coords,
        basis_ref: basis_ref(axes),
    })
}

/// Median-in-lens coordinates for every object on every axis.
pub fn embed_all(run: &BasisRun) -> Result<OrdinalEmbedding> {
    embed_axes(&run.ranks, &run.basis.axes)
}

pub fn embed_axes(table: &RankTable, axes: &[Axis]) -> Result<OrdinalEmbedding> {
    embed_with(table.n(), axes, |x, axis| coordinate(table, x, axis))
}

/// Linear-search coordinates; spends comparisons.
pub fn embed_all_linear<S: TripletSource>(
    table: &RankTable,
    axes: &[Axis],
    oracle: &mut CountingOracle<S>,
) -> Result<OrdinalEmbedding> {
    embed_with(table.n(), axes, |x, axis| {
        linear_search_coordinate(table, x, axis, oracle)
    })
}

pub fn embedded_distance(e: &OrdinalEmbedding, x: usize, y: usize) -> f64 {
    e.row(x)
        .iter()
        .zip(e.row(y))
        .map(|(&a, &b)| {
            let d = a as f64 - b as f64;
            d * d
        })
        .sum::<f64>()
        .sqrt()
}

/// Density constants for the scaled-recovery bounds on ideal axes: every
/// `epsilon`-ball in the hull holds between 1 and `k` points, `s` maps axis
/// positions to lengths and `d` is the true dimension.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DensityBounds {
    pub epsilon: f64,
    pub k: usize,
    pub s: f64,
    pub d: usize,
}

impl DensityBounds {
    /// Uses `s = 2 * epsilon`.
    pub fn new(epsilon: f64, k: usize, d: usize) -> Result<Self> {
        if epsilon.is_nan() || epsilon <= 0.0 || k < 1 || d < 1 {
            return Err(Error::InvalidArgument(format!(
                "bound parameters need epsilon > 0, k >= 1, d >= 1 (got {epsilon}, {k}, {d})"
            )));
        }
        Ok(DensityBounds {
            epsilon,
            k,
            s: 2.0 * epsilon,
            d,
        })
    }

    /// `(s/k) * coord - eps <= projection <= s * coord + eps`
    pub fn coordinate_bound_holds(&self, coord: usize, projection: f64) -> bool {
        let c = coord as f64;
        let lo = self.s / self.k as f64 * c - self.epsilon;
        let hi = self.s * c + self.epsilon;
        lo <= projection && projection <= hi
    }

    /// `dist - 2 eps sqrt(d) <= s * emb <= k (dist + 2 eps sqrt(d))`
    pub fn distance_bound_holds(&self, true_dist: f64, embedded: f64) -> bool {
        let slack = 2.0 * self.epsilon * (self.d as f64).sqrt();
        let scaled = self.s * embedded;
        true_dist - slack <= scaled && scaled <= self.k as f64 * (true_dist + slack)
    }
}
