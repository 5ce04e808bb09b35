//! Triplet comparison sources and the counting, memoizing oracle.
//!
//! Every comparison the embedding pipeline consumes goes through
//! [`CountingOracle`], which canonicalizes a query `(head, left, right)` and
//! its mirror `(head, right, left)` onto one cache entry. `unique_count` is
//! the number of distinct questions actually put to the source; `total_calls`
//! counts every request, cached or not.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::points::PointSet;

/// "Is `left` closer to `head` than `right` is?"
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct TripletQuery {
    pub head: usize,
    pub left: usize,
    pub right: usize,
}

impl TripletQuery {
    pub fn new(head: usize, left: usize, right: usize) -> Self {
        TripletQuery { head, left, right }
    }

    pub fn mirror(self) -> Self {
        TripletQuery {
            head: self.head,
            left: self.right,
            right: self.left,
        }
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        let TripletQuery { head, left, right } = *self;
        if head >= n || left >= n || right >= n || head == left || head == right || left == right
        {
            return Err(Error::InvalidQuery { head, left, right, n });
        }
        Ok(())
    }
}

/// A source of raw triplet answers. Implementations must induce a strict
/// total order over tails for every fixed head.
pub trait TripletSource {
    fn len(&self) -> usize;

    fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// True iff `q.left` is strictly closer to `q.head` than `q.right`.
    /// Called only with validated queries.
    fn compare(&self, q: TripletQuery) -> Result<bool>;
}

/// Answers from Euclidean distances between known points. Equal distances
/// are broken by object index, the smaller index being "closer".
#[derive(Debug, Clone)]
pub struct EuclideanSource {
    points: PointSet,
}

impl EuclideanSource {
    pub fn new(points: PointSet) -> Self {
        EuclideanSource { points }
    }

    pub fn points(&self) -> &PointSet {
        &self.points
    }
}

impl TripletSource for EuclideanSource {
    fn len(&self) -> usize {
        self.points.len()
    }

    fn compare(&self, q: TripletQuery) -> Result<bool> {
        let dl = self.points.dist2(q.head, q.left);
        let dr = self.points.dist2(q.head, q.right);
        Ok(dl < dr || (dl == dr && q.left < q.right))
    }
}

/// Exact comparison accounting with a mirror-collapsing memo.
#[derive(Debug, Clone, Default)]
pub struct ComparisonLedger {
    unique_count: u64,
    total_calls: u64,
    // (head, lo, hi) -> "lo is closer than hi"
    cache: HashMap<(usize, usize, usize), bool>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct LedgerSnapshot {
    pub unique: u64,
    pub total: u64,
}

impl LedgerSnapshot {
    pub fn since(self, earlier: LedgerSnapshot) -> LedgerSnapshot {
        LedgerSnapshot {
            unique: self.unique - earlier.unique,
            total: self.total - earlier.total,
        }
    }
}

impl ComparisonLedger {
    pub fn unique_count(&self) -> u64 {
        self.unique_count
    }

    pub fn total_calls(&self) -> u64 {
        self.total_calls
    }

    pub fn snapshot(&self) -> LedgerSnapshot {
        LedgerSnapshot {
            unique: self.unique_count,
            total: self.total_calls,
        }
    }

    fn key(q: TripletQuery) -> ((usize, usize, usize), bool) {
        if q.left < q.right {
            ((q.head, q.left, q.right), false)
        } else {
            ((q.head, q.right, q.left), true)
        }
    }

    fn lookup(&self, q: TripletQuery) -> Option<bool> {
        let (key, flipped) = Self::key(q);
        self.cache.get(&key).map(|&a| a != flipped)
    }

    fn record(&mut self, q: TripletQuery, answer: bool) {
        let (key, flipped) = Self::key(q);
        self.cache.insert(key, answer != flipped);
        self.unique_count += 1;
    }
}

/// Memoizing, counting front end over a [`TripletSource`].
///
/// Mutation goes through `&mut self`, so a single oracle is driven by one
/// worker at a time; wrap it in a lock to share it.
#[derive(Debug, Clone)]
pub struct CountingOracle<S> {
    source: S,
    ledger: ComparisonLedger,
}

pub type GroundTruthOracle = CountingOracle<EuclideanSource>;

impl GroundTruthOracle {
    pub fn from_points(points: PointSet) -> Self {
        CountingOracle::new(EuclideanSource::new(points))
    }

    pub fn points(&self) -> &PointSet {
        self.source.points()
    }
}

impl<S: TripletSource> CountingOracle<S> {
    pub fn new(source: S) -> Self {
        CountingOracle {
            source,
            ledger: ComparisonLedger::default(),
        }
    }

    pub fn len(&self) -> usize {
        self.source.len()
    }

    pub fn is_empty(&self) -> bool {
        self.source.is_empty()
    }

    pub fn source(&self) -> &S {
        &self.source
    }

    pub fn ledger(&self) -> &ComparisonLedger {
        &self.ledger
    }

    pub fn answer(&mut self, q: TripletQuery) -> Result<bool> {
        q.validate(self.len())?;
        self.ledger.total_calls += 1;
        if let Some(a) = self.ledger.lookup(q) {
            return Ok(a);
        }
        let a = self.source.compare(q)?;
        self.ledger.record(q, a);
        Ok(a)
    }

    /// True iff `left` is closer to `head` than `right`.
    pub fn closer(&mut self, head: usize, left: usize, right: usize) -> Result<bool> {
        self.answer(TripletQuery::new(head, left, right))
    }

    fn check_index(&self, x: usize) -> Result<()> {
        let n = self.len();
        if x >= n {
            return Err(Error::InvalidArgument(format!(
                "object {x} out of range for {n} objects"
            )));
        }
        Ok(())
    }

    /// All objects ordered by increasing distance from `head`, `head` first.
    ///
    /// Uses top-down merge sort, which never needs more than
    /// `m*ceil(log2 m) - 2^ceil(log2 m) + 1` comparisons for `m = n - 1` tails.
    pub fn sort_for_head(&mut self, head: usize) -> Result<Vec<usize>> {
        self.check_index(head)?;
        let mut tails: Vec<usize> = (0..self.len()).filter(|&x| x != head).collect();
        try_merge_sort_by(&mut tails, |a, b| self.closer(head, a, b))?;
        let mut order = Vec::with_capacity(self.len());
        order.push(head);
        order.extend(tails);
        Ok(order)
    }

    /// Sorts an arbitrary subset of objects by distance from `head`.
    pub fn sort_subset(&mut self, head: usize, items: &mut [usize]) -> Result<()> {
        self.check_index(head)?;
        try_merge_sort_by(items, |a, b| self.closer(head, a, b))
    }

    /// The object farthest from `z`, found with one linear tournament of
    /// `n - 2` comparisons.
    pub fn farthest_from(&mut self, z: usize) -> Result<usize> {
        let n = self.len();
        if n < 2 {
            return Err(Error::InsufficientData { needed: 2, got: n });
        }
        self.check_index(z)?;
        let mut rest = (0..n).filter(|&x| x != z);
        let mut best = rest.next().expect("n >= 2");
        for x in rest {
            if self.closer(z, best, x)? {
                best = x;
            }
        }
        Ok(best)
    }

    /// The member of `items` closest to `head`, by `items.len() - 1` comparisons.
    pub fn nearest_among(&mut self, head: usize, items: &[usize]) -> Result<Option<usize>> {
        let mut it = items.iter().copied();
        let Some(mut best) = it.next() else {
            return Ok(None);
        };
        for x in it {
            if self.closer(head, x, best)? {
                best = x;
            }
        }
        Ok(Some(best))
    }
}

/// Stable top-down merge sort with a fallible "a goes before b" predicate.
pub fn try_merge_sort_by<T, E, F>(items: &mut [T], mut before: F) -> Result<(), E>
where
    T: Copy,
    F: FnMut(T, T) -> Result<bool, E>,
{
    if items.len() < 2 {
        return Ok(());
    }
    let mut scratch = items.to_vec();
    merge_sort_into(&mut scratch, items, &mut before)
}

// Sorts `src` into `dst`; both hold the same elements on entry.
fn merge_sort_into<T, E, F>(src: &mut [T], dst: &mut [T], before: &mut F) -> Result<(), E>
where
    T: Copy,
    F: FnMut(T, T) -> Result<bool, E>,
{
    let n = src.len();
    if n < 2 {
        return Ok(());
    }
    let mid = n / 2;
    {
        let (dl, dr) = dst.split_at_mut(mid);
        let (sl, sr) = src.split_at_mut(mid);
        merge_sort_into(dl, sl, before)?;
        merge_sort_into(dr, sr, before)?;
    }
    let (left, right) = src.split_at(mid);
    let (mut i, mut j, mut k) = (0, 0, 0);
    while i < left.len() && j < right.len() {
        if before(right[j], left[i])? {
            dst[k] = right[j];
            j += 1;
        } else {
            dst[k] = left[i];
            i += 1;
        }
        k += 1;
    }
    dst[k..k + left.len() - i].copy_from_slice(&left[i..]);
    k += left.len() - i;
    dst[k..].copy_from_slice(&right[j..]);
    Ok(())
}

/// `ceil(log2(n))` for `n >= 1`.
pub fn ceil_log2(n: usize) -> u32 {
    if n <= 1 {
        0
    } else {
        usize::BITS - (n - 1).leading_zeros()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn line(values: &[f64]) -> GroundTruthOracle {
        GroundTruthOracle::from_points(PointSet::from_line(values))
    }

    fn random_points(n: usize, d: usize, seed: u64) -> PointSet {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        PointSet::new(d, (0..n * d).map(|_| rng.random::<f64>()).collect()).unwrap()
    }

    #[test]
    fn answer_on_a_line() {
        let mut o = line(&[0.0, 1.0, 2.0, 3.0]);
        assert!(o.closer(0, 1, 3).unwrap());
        assert!(!o.closer(0, 3, 1).unwrap());
    }

    #[test]
    fn mirror_is_cached() {
        let mut o = line(&[0.0, 1.0, 2.0, 3.0]);
        let q = TripletQuery::new(0, 1, 3);
        let a = o.answer(q).unwrap();
        assert_eq!(o.ledger().unique_count(), 1);
        assert_eq!(o.answer(q.mirror()).unwrap(), !a);
        assert_eq!(o.ledger().unique_count(), 1);
        assert_eq!(o.ledger().total_calls(), 2);
    }

    #[test]
    fn invalid_queries() {
        let mut o = line(&[0.0, 1.0, 2.0]);
        assert!(matches!(o.closer(0, 0, 1), Err(Error::InvalidQuery { .. })));
        assert!(matches!(o.closer(0, 1, 1), Err(Error::InvalidQuery { .. })));
        assert!(matches!(o.closer(0, 1, 7), Err(Error::InvalidQuery { .. })));
        assert_eq!(o.ledger().total_calls(), 0);
    }

    #[test]
    fn ties_break_by_index() {
        let mut o = line(&[0.0, -1.0, 1.0]);
        assert!(o.closer(0, 1, 2).unwrap());
        assert!(!o.closer(0, 2, 1).unwrap());
    }

    #[test]
    fn exhaustive_agreement_with_distances() {
        let pts = random_points(20, 2, 11);
        let mut o = GroundTruthOracle::from_points(pts.clone());
        let n = pts.len();
        for h in 0..n {
            for l in 0..n {
                for r in 0..n {
                    if h == l || h == r || l == r {
                        continue;
                    }
                    let expect = pts.dist(h, l) < pts.dist(h, r);
                    assert_eq!(o.closer(h, l, r).unwrap(), expect);
                }
            }
        }
        // n(n-1)(n-2)/2 distinct canonical questions
        assert_eq!(o.ledger().unique_count(), 20 * 19 * 18 / 2);
    }

    #[test]
    fn sort_small_line() {
        let mut o = line(&[0.0, 5.0, 1.0, 3.0]);
        assert_eq!(o.sort_for_head(0).unwrap(), vec![0, 2, 3, 1]);
    }

    #[test]
    fn sort_matches_argsort() {
        let pts = random_points(30, 3, 5);
        let mut o = GroundTruthOracle::from_points(pts.clone());
        for head in [0, 7, 29] {
            let mut expect: Vec<usize> = (0..30).collect();
            expect.sort_by(|&a, &b| pts.dist2(head, a).total_cmp(&pts.dist2(head, b)));
            assert_eq!(o.sort_for_head(head).unwrap(), expect);
        }
    }

    #[test]
    fn sort_budget() {
        let mut o = GroundTruthOracle::from_points(random_points(500, 2, 3));
        o.sort_for_head(17).unwrap();
        assert!(o.ledger().unique_count() <= 500 * 9);
        // merge-sort worst case on 499 items
        assert!(o.ledger().unique_count() <= 499 * 9 - 512 + 1);
    }

    #[test]
    fn farthest_on_line() {
        let mut o = line(&[0.0, 1.0, 2.0, 9.0]);
        assert_eq!(o.farthest_from(0).unwrap(), 3);
        assert!(matches!(
            line(&[1.0]).farthest_from(0),
            Err(Error::InsufficientData { .. })
        ));
    }

    #[test]
    fn farthest_cost_is_n_minus_2() {
        let mut o = GroundTruthOracle::from_points(random_points(500, 3, 8));
        o.farthest_from(42).unwrap();
        assert_eq!(o.ledger().unique_count(), 498);
    }

    #[test]
    fn farthest_matches_argmax() {
        let pts = random_points(50, 5, 21);
        let mut o = GroundTruthOracle::from_points(pts.clone());
        for z in 0..50 {
            let expect = (0..50)
                .filter(|&x| x != z)
                .max_by(|&a, &b| pts.dist2(z, a).total_cmp(&pts.dist2(z, b)))
                .unwrap();
            assert_eq!(o.farthest_from(z).unwrap(), expect);
        }
    }

    #[test]
    fn strict_total_order_per_head() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        // duplicated coordinates force distance ties
        let vals: Vec<f64> = (0..12).map(|_| rng.random_range(0..4) as f64).collect();
        let mut o = line(&vals);
        let n = vals.len();
        for h in 0..n {
            let tails: Vec<usize> = (0..n).filter(|&x| x != h).collect();
            for &a in &tails {
                for &b in &tails {
                    if a == b {
                        continue;
                    }
                    assert_ne!(o.closer(h, a, b).unwrap(), o.closer(h, b, a).unwrap());
                    for &c in &tails {
                        if c == a || c == b {
                            continue;
                        }
                        if o.closer(h, a, b).unwrap() && o.closer(h, b, c).unwrap() {
                            assert!(o.closer(h, a, c).unwrap());
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn warm_cache_adds_nothing() {
        let mut o = GroundTruthOracle::from_points(random_points(60, 2, 4));
        o.sort_for_head(3).unwrap();
        o.farthest_from(9).unwrap();
        let before = o.ledger().unique_count();
        o.sort_for_head(3).unwrap();
        o.farthest_from(9).unwrap();
        assert_eq!(o.ledger().unique_count(), before);
    }

    #[test]
    fn merge_sort_sorts() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for len in 0..40 {
            let mut v: Vec<u32> = (0..len).map(|_| rng.random_range(0..20)).collect();
            let mut expect = v.clone();
            expect.sort();
            try_merge_sort_by(&mut v, |a, b| Ok::<_, ()>(a < b)).unwrap();
            assert_eq!(v, expect);
        }
    }

    #[test]
    fn ceil_log2_values() {
        assert_eq!(ceil_log2(1), 0);
        assert_eq!(ceil_log2(2), 1);
        assert_eq!(ceil_log2(500), 9);
        assert_eq!(ceil_log2(512), 9);
        assert_eq!(ceil_log2(513), 10);
    }
}
