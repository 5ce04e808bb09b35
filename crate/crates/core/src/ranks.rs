//! Rank-space geometry over completed head sorts.
//!
//! Everything here reads a [`RankTable`]; no comparisons are consumed. For a
//! set of centers `P`, object `x` is *above* `q` when every center ranks `q`
//! strictly closer than `x`. The hull estimate `conv_hat(P)` keeps exactly the
//! objects that no other object is below, i.e. the skyline of the rank
//! vectors `(r_p[x])_{p in P}`.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::oracle::{CountingOracle, TripletSource};

/// Full rankings of all `n` objects from a growing set of heads.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RankTable {
    n: usize,
    heads: Vec<usize>,
    orders: Vec<Vec<usize>>,
    ranks: Vec<Vec<u32>>,
    index: HashMap<usize, usize>,
}

/// One head's sorted order, as stored in basis documents.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Ranking {
    pub head: usize,
    pub order: Vec<usize>,
}

impl RankTable {
    pub fn new(n: usize) -> Self {
        RankTable {
            n,
            heads: Vec::new(),
            orders: Vec::new(),
            ranks: Vec::new(),
            index: HashMap::new(),
        }
    }

    pub fn from_rankings(n: usize, rankings: &[Ranking]) -> Result<Self> {
        let mut t = RankTable::new(n);
        for r in rankings {
            t.insert(r.head, r.order.clone())?;
        }
        Ok(t)
    }

    pub fn rankings(&self) -> Vec<Ranking> {
        self.heads
            .iter()
            .zip(&self.orders)
            .map(|(&head, order)| Ranking {
                head,
                order: order.clone(),
            })
            .collect()
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Heads in insertion order.
    pub fn heads(&self) -> &[usize] {
        &self.heads
    }

    pub fn contains(&self, head: usize) -> bool {
        self.index.contains_key(&head)
    }

    /// Adds a head's order (nearest first, head at position 0). Columns are
    /// immutable: inserting an existing head is an error.
    pub fn insert(&mut self, head: usize, order: Vec<usize>) -> Result<()> {
        if self.contains(head) {
            return Err(Error::InvalidArgument(format!(
                "head {head} already has a ranking"
            )));
        }
        if order.len() != self.n || order.first() != Some(&head) {
            return Err(Error::InvalidArgument(format!(
                "ranking for head {head} must list all {} objects starting with the head",
                self.n
            )));
        }
        let mut ranks = vec![u32::MAX; self.n];
        for (r, &x) in order.iter().enumerate() {
            if x >= self.n || ranks[x] != u32::MAX {
                return Err(Error::InvalidArgument(format!(
                    "ranking for head {head} is not a permutation"
                )));
            }
            ranks[x] = r as u32;
        }
        self.index.insert(head, self.heads.len());
        self.heads.push(head);
        self.orders.push(order);
        self.ranks.push(ranks);
        Ok(())
    }

    /// Sorts `head` with the oracle unless its column already exists.
    pub fn sort_head<S: TripletSource>(
        &mut self,
        oracle: &mut CountingOracle<S>,
        head: usize,
    ) -> Result<()> {
        if self.contains(head) {
            return Ok(());
        }
        let order = oracle.sort_for_head(head)?;
        self.insert(head, order)
    }

    pub fn column(&self, head: usize) -> Result<&[u32]> {
        self.index
            .get(&head)
            .map(|&i| self.ranks[i].as_slice())
            .ok_or(Error::MissingRanking(head))
    }

    pub fn order(&self, head: usize) -> Result<&[usize]> {
        self.index
            .get(&head)
            .map(|&i| self.orders[i].as_slice())
            .ok_or(Error::MissingRanking(head))
    }

    pub fn rank(&self, head: usize, x: usize) -> Result<u32> {
        Ok(self.column(head)?[x])
    }

    fn columns(&self, centers: &[usize]) -> Result<Vec<&[u32]>> {
        centers.iter().map(|&c| self.column(c)).collect()
    }

    /// True iff every center ranks `q` strictly before `x` ("x is above q").
    pub fn dominates(&self, q: usize, x: usize, centers: &[usize]) -> Result<bool> {
        let cols = self.columns(centers)?;
        Ok(strictly_below(&cols, q, x))
    }

    /// Number of `targets` that `x` is above.
    pub fn above_count(&self, x: usize, centers: &[usize], targets: &[usize]) -> Result<usize> {
        let cols = self.columns(centers)?;
        Ok(targets
            .iter()
            .filter(|&&t| t != x && strictly_below(&cols, t, x))
            .count())
    }

    /// Rank-based convex hull estimate: objects not strictly dominated in
    /// every center's ranking by some other object. Returned ascending.
    pub fn conv_hat(&self, centers: &[usize]) -> Result<Vec<usize>> {
        if centers.is_empty() {
            return Err(Error::InvalidArgument("conv_hat needs at least one center".into()));
        }
        let cols = self.columns(centers)?;
        // A dominator has a strictly smaller rank sum, so after sorting by sum
        // every dominated object is dominated by an earlier skyline member.
        let mut by_sum: Vec<(u64, usize)> = (0..self.n)
            .map(|x| (cols.iter().map(|c| c[x] as u64).sum(), x))
            .collect();
        by_sum.sort_unstable();
        let mut skyline: Vec<usize> = Vec::new();
        for &(_, x) in &by_sum {
            if !skyline.iter().any(|&s| strictly_below(&cols, s, x)) {
                skyline.push(x);
            }
        }
        skyline.sort_unstable();
        Ok(skyline)
    }

    /// Objects ranked no farther than `apex` by every center.
    pub fn lens_members(&self, centers: &[usize], apex: usize) -> Result<LensSet> {
        if centers.is_empty() {
            return Err(Error::InvalidArgument("a lens needs at least one center".into()));
        }
        let cols = self.columns(centers)?;
        let members = (0..self.n)
            .filter(|&x| cols.iter().all(|c| c[x] <= c[apex]))
            .collect();
        Ok(LensSet {
            centers: centers.to_vec(),
            apex,
            members,
        })
    }

    /// True iff `e2`'s ranks strictly decrease along `members`.
    pub fn is_order_consistent(&self, members: &[usize], e2: usize) -> Result<bool> {
        let c = self.column(e2)?;
        Ok(members.windows(2).all(|w| c[w[0]] > c[w[1]]))
    }
}

#[inline]
fn strictly_below(cols: &[&[u32]], q: usize, x: usize) -> bool {
    cols.iter().all(|c| c[q] < c[x])
}

/// Intersection of the balls centered on `centers` reaching out to `apex`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LensSet {
    pub centers: Vec<usize>,
    pub apex: usize,
    /// Ascending object indices.
    pub members: Vec<usize>,
}

impl LensSet {
    pub fn contains(&self, x: usize) -> bool {
        self.members.binary_search(&x).is_ok()
    }
}
