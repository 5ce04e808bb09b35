//! Basis discovery: axis endpoints chosen by above-ness, completed at the
//! opposite lens apex, with a Carathéodory-style affine independence test
//! deciding when to stop. The number of axes found is the dimensionality
//! estimate.

use log::warn;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::oracle::{CountingOracle, TripletSource};
use crate::ranks::{RankTable, Ranking};
use crate::seeds::{stream_rng, Stream};

/// Two endpoints and the objects near the segment between them, ordered by
/// rank from the first endpoint.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Axis {
    pub first_endpoint: usize,
    pub second_endpoint: usize,
    pub members: Vec<usize>,
}

impl Axis {
    /// Builds the axis as `conv_hat({first, second})`. Both endpoints must be
    /// ranked.
    pub fn from_endpoints(table: &RankTable, first: usize, second: usize) -> Result<Axis> {
        if first == second {
            return Err(Error::InvalidArgument(format!(
                "axis endpoints must differ (got {first} twice)"
            )));
        }
        let mut members = table.conv_hat(&[first, second])?;
        let col = table.column(first)?;
        members.sort_by_key(|&x| col[x]);
        Ok(Axis {
            first_endpoint: first,
            second_endpoint: second,
            members,
        })
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    /// Position of `x` along the axis, if it is a member.
    pub fn position(&self, x: usize) -> Option<usize> {
        self.members.iter().position(|&m| m == x)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Basis {
    pub n: usize,
    pub axes: Vec<Axis>,
    /// Both endpoints of the first axis, the first endpoint of every later
    /// axis, and possibly the candidate that ended the search.
    pub affine_set: Vec<usize>,
    pub dimension_estimate: usize,
    /// Sorted candidate that joined no axis, if any.
    pub rejected_candidate: Option<usize>,
    pub comparisons_used: u64,
    pub comparisons_total: u64,
}

impl Basis {
    pub fn endpoints(&self) -> Vec<usize> {
        self.axes
            .iter()
            .flat_map(|a| [a.first_endpoint, a.second_endpoint])
            .collect()
    }
}

/// How the next axis' first endpoint is proposed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Strategy {
    /// The point above the most members of the current hull estimate.
    #[default]
    ChooseBasis,
    /// Farthest-rank-first traversal: maximize the minimum rank from all
    /// endpoints found so far.
    Frft,
}

/// Which centers define above-ness when proposing a candidate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CandidateRule {
    /// All sorted axis endpoints; the first axis' far endpoint joins the
    /// affine set before the first candidate is chosen.
    #[default]
    TwoCenter,
    /// Only the affine set as built so far, so the first candidate is chosen
    /// against the single first endpoint.
    Literal,
}

/// Which set's hull estimate supplies the above-ness targets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum HullRule {
    #[default]
    AffineSet,
    AllEndpoints,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct BasisConfig {
    pub strategy: Strategy,
    pub candidate_rule: CandidateRule,
    pub hull_rule: HullRule,
    /// Seeds the choice of the random starting object.
    pub seed: u64,
}

/// A finished basis together with the rankings it was built from.
#[derive(Debug, Clone)]
pub struct BasisRun {
    pub basis: Basis,
    pub ranks: RankTable,
}

/// Serialized form of a [`BasisRun`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BasisDocument {
    #[serde(flatten)]
    pub basis: Basis,
    pub rankings: Vec<Ranking>,
}

impl BasisRun {
    pub fn to_document(&self) -> BasisDocument {
        BasisDocument {
            basis: self.basis.clone(),
            rankings: self.ranks.rankings(),
        }
    }

    pub fn from_document(doc: BasisDocument) -> Result<Self> {
        let ranks = RankTable::from_rankings(doc.basis.n, &doc.rankings)?;
        for axis in &doc.basis.axes {
            ranks.column(axis.first_endpoint)?;
            ranks.column(axis.second_endpoint)?;
        }
        Ok(BasisRun {
            basis: doc.basis,
            ranks,
        })
    }
}

/// Runs the full basis search. The starting object is drawn from the
/// `Basis` stream of `config.seed`.
pub fn choose_basis<S: TripletSource>(
    oracle: &mut CountingOracle<S>,
    config: &BasisConfig,
) -> Result<BasisRun> {
    let n = oracle.len();
    if n < 3 {
        return Err(Error::InsufficientData { needed: 3, got: n });
    }
    let start = stream_rng(config.seed, Stream::Basis, 0).random_range(0..n);
    choose_basis_from(oracle, config, start)
}

/// [`choose_basis`] with an explicit starting object.
pub fn choose_basis_from<S: TripletSource>(
    oracle: &mut CountingOracle<S>,
    config: &BasisConfig,
    start: usize,
) -> Result<BasisRun> {
    let n = oracle.len();
    if n < 3 {
        return Err(Error::InsufficientData { needed: 3, got: n });
    }
    let before = oracle.ledger().snapshot();
    let mut table = RankTable::new(n);

    let first = oracle.farthest_from(start)?;
    table.sort_head(oracle, first)?;

    let mut affine = vec![first];
    let mut endpoints: Vec<usize> = Vec::new();
    let mut axes: Vec<Axis> = Vec::new();
    let mut rejected = None;
    let mut next = first;

    loop {
        let axis = match complete_axis(&mut table, oracle, next, &endpoints) {
            Ok(axis) => axis,
            Err(Error::DegenerateAxis(p)) => {
                warn!("lens opposite endpoint {p} is empty; stopping with {} axes", axes.len());
                rejected = Some(p);
                break;
            }
            Err(e) => return Err(e),
        };
        let far = axis.second_endpoint;
        endpoints.extend([axis.first_endpoint, far]);
        axes.push(axis);
        let first_axis = axes.len() == 1;

        if first_axis && config.candidate_rule == CandidateRule::TwoCenter {
            affine.push(far);
        }

        let mut excluded = endpoints.clone();
        excluded.extend(&affine);
        let candidate = match config.strategy {
            Strategy::ChooseBasis => {
                let centers = match config.candidate_rule {
                    CandidateRule::TwoCenter => &endpoints,
                    CandidateRule::Literal => &affine,
                };
                let hull = match config.hull_rule {
                    HullRule::AffineSet => table.conv_hat(&affine)?,
                    HullRule::AllEndpoints => table.conv_hat(&endpoints)?,
                };
                pick_candidate(&table, centers, &hull, &excluded)?
            }
            Strategy::Frft => frft_candidate(&table, &endpoints, &excluded)?,
        };
        let Some(candidate) = candidate else {
            break;
        };

        table.sort_head(oracle, candidate)?;
        affine.push(candidate);
        if first_axis && config.candidate_rule == CandidateRule::Literal {
            affine.push(far);
        }
        if !affine_independent(&table, &affine)? {
            rejected = Some(candidate);
            break;
        }
        next = candidate;
    }

    let used = oracle.ledger().snapshot().since(before);
    Ok(BasisRun {
        basis: Basis {
            n,
            dimension_estimate: axes.len(),
            axes,
            affine_set: affine,
            rejected_candidate: rejected,
            comparisons_used: used.unique,
            comparisons_total: used.total,
        },
        ranks: table,
    })
}

/// Completes the axis starting at `start`: the far endpoint is the object
/// ranked farthest from `start` inside the lens that `prior` endpoints form
/// with `start` as apex. The far endpoint is sorted as a side effect.
pub fn complete_axis<S: TripletSource>(
    table: &mut RankTable,
    oracle: &mut CountingOracle<S>,
    start: usize,
    prior: &[usize],
) -> Result<Axis> {
    let far = apex_opposite(table, start, prior)?.ok_or(Error::DegenerateAxis(start))?;
    table.sort_head(oracle, far)?;
    Axis::from_endpoints(table, start, far)
}

/// The lens-apex opposite `start`, or `None` when the lens holds nothing
/// but `start` and earlier endpoints.
pub fn apex_opposite(table: &RankTable, start: usize, prior: &[usize]) -> Result<Option<usize>> {
    let from_start = table.column(start)?;
    let lens: Vec<usize> = if prior.is_empty() {
        (0..table.n()).collect()
    } else {
        table.lens_members(prior, start)?.members
    };
    Ok(lens
        .into_iter()
        .filter(|&x| x != start && !prior.contains(&x))
        .max_by_key(|&x| from_start[x]))
}

/// The object above the most `hull` members w.r.t. `centers`, smallest index
/// on ties; `None` when no object is above anything.
pub fn pick_candidate(
    table: &RankTable,
    centers: &[usize],
    hull: &[usize],
    excluded: &[usize],
) -> Result<Option<usize>> {
    let mut best: Option<(usize, usize)> = None;
    for x in 0..table.n() {
        if excluded.contains(&x) {
            continue;
        }
        let count = table.above_count(x, centers, hull)?;
        if count > 0 && best.is_none_or(|(_, c)| count > c) {
            best = Some((x, count));
        }
    }
    Ok(best.map(|(x, _)| x))
}

fn frft_candidate(table: &RankTable, heads: &[usize], excluded: &[usize]) -> Result<Option<usize>> {
    let cols = heads
        .iter()
        .map(|&h| table.column(h))
        .collect::<Result<Vec<_>>>()?;
    let mut best: Option<(usize, u32)> = None;
    for x in 0..table.n() {
        if excluded.contains(&x) {
            continue;
        }
        let depth = cols.iter().map(|c| c[x]).min().unwrap_or(0);
        if depth > 0 && best.is_none_or(|(_, d)| depth > d) {
            best = Some((x, depth));
        }
    }
    Ok(best.map(|(x, _)| x))
}

/// False iff the hull estimate of `set` is covered by the hull estimates of
/// its leave-one-out subsets.
pub fn affine_independent(table: &RankTable, set: &[usize]) -> Result<bool> {
    if set.len() < 3 {
        return Err(Error::InvalidArgument(format!(
            "affine test needs at least 3 points, got {}",
            set.len()
        )));
    }
    let full = table.conv_hat(set)?;
    let mut covered = vec![false; table.n()];
    for skip in 0..set.len() {
        let sub: Vec<usize> = set
            .iter()
            .enumerate()
            .filter(|&(i, _)| i != skip)
            .map(|(_, &p)| p)
            .collect();
        for x in table.conv_hat(&sub)? {
            covered[x] = true;
        }
    }
    Ok(full.iter().any(|&x| !covered[x]))
}

/// Farthest-rank-first traversal: `count` objects, each sorted, starting with
/// the object farthest from `start`.
pub fn frft_endpoints<S: TripletSource>(
    oracle: &mut CountingOracle<S>,
    count: usize,
    start: usize,
) -> Result<(Vec<usize>, RankTable)> {
    let n = oracle.len();
    if count < 2 || count > n {
        return Err(Error::InvalidArgument(format!(
            "frft needs 2 <= count <= n ({n}), got {count}"
        )));
    }
    let mut table = RankTable::new(n);
    let first = oracle.farthest_from(start)?;
    table.sort_head(oracle, first)?;
    let mut chosen = vec![first];
    while chosen.len() < count {
        let next = frft_candidate(&table, &chosen, &chosen)?
            .ok_or_else(|| Error::InternalInvariant("frft ran out of objects".into()))?;
        table.sort_head(oracle, next)?;
        chosen.push(next);
    }
    Ok((chosen, table))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::GroundTruthOracle;
    use crate::points::PointSet;

    fn oracle(points: PointSet) -> GroundTruthOracle {
        GroundTruthOracle::from_points(points)
    }

    fn ranked(points: PointSet, heads: &[usize]) -> RankTable {
        let mut o = oracle(points);
        let mut t = RankTable::new(o.len());
        for &h in heads {
            t.sort_head(&mut o, h).unwrap();
        }
        t
    }

    #[test]
    fn colinear_gives_one_axis() {
        let pts = PointSet::from_line(&(0..40).map(|i| (i as f64).powf(1.3)).collect::<Vec<_>>());
        for seed in 0..5 {
            let mut o = oracle(pts.clone());
            let run = choose_basis(&mut o, &BasisConfig { seed, ..Default::default() }).unwrap();
            assert_eq!(run.basis.dimension_estimate, 1);
            let axis = &run.basis.axes[0];
            let mut ends = [axis.first_endpoint, axis.second_endpoint];
            ends.sort();
            assert_eq!(ends, [0, 39]);
            assert_eq!(axis.len(), 40);
        }
    }

    #[test]
    fn too_few_objects() {
        let mut o = oracle(PointSet::from_line(&[0.0, 1.0]));
        assert!(matches!(
            choose_basis(&mut o, &BasisConfig::default()),
            Err(Error::InsufficientData { .. })
        ));
    }

    #[test]
    fn first_axis_ends_at_farthest_point() {
        let pts = PointSet::from_rows(&[[0.0, 0.0], [3.0, 0.2], [1.0, 1.0], [0.5, -0.4], [2.5, 2.5]])
            .unwrap();
        let mut o = oracle(pts.clone());
        let mut t = RankTable::new(5);
        t.sort_head(&mut o, 0).unwrap();
        let axis = complete_axis(&mut t, &mut o, 0, &[]).unwrap();
        assert_eq!(axis.second_endpoint, 4);
        assert!(t.is_order_consistent(&axis.members, 4).unwrap());
    }

    #[test]
    fn square_lens_picks_remaining_corner() {
        // corners 0..4 and the center 4; prior diagonal (1, 3), start at corner 0
        let pts = PointSet::from_rows(&[
            [0.0, 0.0],
            [1.0, 0.0],
            [0.98, 0.98],
            [0.0, 1.0],
            [0.5, 0.5],
        ])
        .unwrap();
        let t = ranked(pts, &[0, 1, 3]);
        assert_eq!(apex_opposite(&t, 0, &[1, 3]).unwrap(), Some(2));
    }

    #[test]
    fn degenerate_axis_reported() {
        let pts = PointSet::from_line(&[0.0, 1.0, 2.0]);
        let mut o = oracle(pts);
        let mut t = RankTable::new(3);
        for h in 0..3 {
            t.sort_head(&mut o, h).unwrap();
        }
        // lens of {0, 2} with apex 1 holds only 1
        assert!(matches!(
            complete_axis(&mut t, &mut o, 1, &[0, 2]),
            Err(Error::DegenerateAxis(1))
        ));
    }

    #[test]
    fn no_candidate_on_a_line() {
        let pts = PointSet::from_line(&(0..25).map(|i| i as f64 * 0.7).collect::<Vec<_>>());
        let t = ranked(pts, &[0, 24]);
        let hull = t.conv_hat(&[0, 24]).unwrap();
        assert_eq!(pick_candidate(&t, &[0, 24], &hull, &[0, 24]).unwrap(), None);
    }

    #[test]
    fn affine_test_on_a_line() {
        let pts = PointSet::from_line(&(0..15).map(|i| i as f64).collect::<Vec<_>>());
        let t = ranked(pts, &[0, 14, 6]);
        assert!(!affine_independent(&t, &[0, 14, 6]).unwrap());
        assert!(affine_independent(&t, &[0, 14]).is_err());
    }

    #[test]
    fn frft_two_is_farthest_pair() {
        let pts = PointSet::from_rows(&[[0.0, 0.0], [1.0, 0.1], [4.0, 1.0], [2.0, -3.0], [0.5, 0.5]])
            .unwrap();
        let mut o = oracle(pts.clone());
        let (chosen, _) = frft_endpoints(&mut o, 2, 4).unwrap();
        let p = o.farthest_from(4).unwrap();
        assert_eq!(chosen, vec![p, o.farthest_from(p).unwrap()]);
        assert!(frft_endpoints(&mut o, 6, 0).is_err());
    }

    #[test]
    fn frft_on_segment_takes_extremes() {
        let pts = PointSet::from_line(&[3.0, 0.0, 7.0, 1.0, 10.0, 5.5]);
        let mut o = oracle(pts);
        let (chosen, _) = frft_endpoints(&mut o, 3, 0).unwrap();
        let mut ends = chosen[..2].to_vec();
        ends.sort();
        assert_eq!(ends, vec![1, 4]);
        // 3.0 and 5.5 tie at min-rank 2; the smaller index wins
        assert_eq!(chosen[2], 0);
    }

    #[test]
    fn document_round_trip() {
        let pts = PointSet::from_rows(&(0..30).map(|i| {
            let t = i as f64 * 0.37;
            [t.cos() * (1.0 + 0.1 * i as f64), t.sin()]
        }).collect::<Vec<_>>())
        .unwrap();
        let mut o = oracle(pts);
        let run = choose_basis(&mut o, &BasisConfig::default()).unwrap();
        let json = serde_json::to_string(&run.to_document()).unwrap();
        let back = BasisRun::from_document(serde_json::from_str(&json).unwrap()).unwrap();
        assert_eq!(back.basis, run.basis);
        assert_eq!(back.ranks, run.ranks);
    }
}
