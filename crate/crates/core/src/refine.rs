//! Triple harvesting: the knowledge gathered by the basis sorts, plus extra
//! comparisons spent sorting each object's nearest neighbours in the
//! embedding.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use log::warn;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::oracle::{CountingOracle, TripletSource};
use crate::points::{sq_dist, PointSet};
use crate::ranks::RankTable;

/// `closer` is nearer to `head` than `farther` is.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Triple {
    pub head: usize,
    pub closer: usize,
    pub farther: usize,
}

impl Triple {
    pub fn new(head: usize, closer: usize, farther: usize) -> Self {
        Triple {
            head,
            closer,
            farther,
        }
    }

    fn is_proper(&self) -> bool {
        self.head != self.closer && self.head != self.farther && self.closer != self.farther
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TripleOrigin {
    BasisSort,
    KnnRefine,
    /// Read from a triples file.
    External,
}

/// Deduplicated triples with per-triple provenance.
#[derive(Debug, Clone, Default)]
pub struct TripleSet {
    triples: Vec<Triple>,
    origins: Vec<TripleOrigin>,
    seen: HashSet<Triple>,
}

impl TripleSet {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds a triple unless it is already present. Returns whether it was new.
    pub fn insert(&mut self, t: Triple, origin: TripleOrigin) -> Result<bool> {
        if !t.is_proper() {
            return Err(Error::InvalidArgument(format!(
                "triple ({}, {}, {}) repeats an object",
                t.head, t.closer, t.farther
            )));
        }
        if !self.seen.insert(t) {
            return Ok(false);
        }
        self.triples.push(t);
        self.origins.push(origin);
        Ok(true)
    }

    pub fn extend(&mut self, other: &TripleSet) {
        for (&t, &o) in other.triples.iter().zip(&other.origins) {
            if self.seen.insert(t) {
                self.triples.push(t);
                self.origins.push(o);
            }
        }
    }

    pub fn len(&self) -> usize {
        self.triples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triples.is_empty()
    }

    pub fn triples(&self) -> &[Triple] {
        &self.triples
    }

    pub fn origins(&self) -> &[TripleOrigin] {
        &self.origins
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Triple, &TripleOrigin)> {
        self.triples.iter().zip(&self.origins)
    }

    /// One more than the largest object index mentioned.
    pub fn object_count(&self) -> usize {
        self.triples
            .iter()
            .map(|t| t.head.max(t.closer).max(t.farther) + 1)
            .max()
            .unwrap_or(0)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::from("# head closer farther\n");
        for t in &self.triples {
            let _ = writeln!(out, "{} {} {}", t.head, t.closer, t.farther);
        }
        out
    }

    pub fn parse(text: &str, path: &Path) -> Result<TripleSet> {
        let mut set = TripleSet::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let err = |msg: String| Error::Parse {
                path: path.to_path_buf(),
                line: i + 1,
                msg,
            };
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.len() != 3 {
                return Err(err(format!("expected 3 indices, found {}", fields.len())));
            }
            let mut idx = [0usize; 3];
            for (slot, f) in idx.iter_mut().zip(&fields) {
                *slot = f
                    .parse()
                    .map_err(|_| err(format!("`{f}` is not an object index")))?;
            }
            set.insert(Triple::new(idx[0], idx[1], idx[2]), TripleOrigin::External)
                .map_err(|e| err(e.to_string()))?;
        }
        Ok(set)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn read(path: &Path) -> Result<TripleSet> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        TripleSet::parse(&text, path)
    }
}

/// Objects ranked by true distance from `head`, nearest first, head
/// excluded. Chains are how sorted knowledge leaves the oracle.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Chain {
    pub head: usize,
    pub order: Vec<usize>,
    pub origin: TripleOrigin,
}

/// How a chain is written out as triples.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Encoding {
    /// `(head, c[j], c[j+1])`: the minimal lossless encoding.
    Consecutive,
    /// `(head, c[j], c[j+2^s])` for every `s` that stays in the chain. Implied
    /// by transitivity, so it costs no comparisons, and it gives a hinge loss
    /// graded pressure along the chain.
    #[default]
    Dyadic,
}

/// One chain per sorted head of the table, in head order.
pub fn basis_chains(table: &RankTable) -> Result<Vec<Chain>> {
    table
        .heads()
        .iter()
        .map(|&head| {
            Ok(Chain {
                head,
                order: table.order(head)?[1..].to_vec(),
                origin: TripleOrigin::BasisSort,
            })
        })
        .collect()
}

pub fn chain_triples(chains: &[Chain], encoding: Encoding) -> Result<TripleSet> {
    let mut set = TripleSet::new();
    for c in chains {
        let m = c.order.len();
        for j in 0..m {
            let mut skip = 1;
            while j + skip < m {
                set.insert(Triple::new(c.head, c.order[j], c.order[j + skip]), c.origin)?;
                if encoding == Encoding::Consecutive {
                    break;
                }
                skip *= 2;
            }
        }
    }
    Ok(set)
}

/// Every head sort as consecutive-pair triples: `heads * (n - 2)` records.
pub fn basis_triples(table: &RankTable) -> Result<TripleSet> {
    chain_triples(&basis_chains(table)?, Encoding::Consecutive)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum HarvestMode {
    /// Fully sort the `2k` embedded neighbours by true distance.
    #[default]
    Sort,
    /// Only separate the true `k` nearest from the other `k` candidates.
    Select,
}

/// Default neighbourhood size, `ceil(log2 n)`.
pub fn default_k(n: usize) -> usize {
    (crate::oracle::ceil_log2(n) as usize).max(1)
}

fn neighbourhood_width(n: usize, oracle_len: usize, k: usize) -> Result<usize> {
    if n != oracle_len {
        return Err(Error::SizeMismatch {
            what: "embedding".into(),
            expected: oracle_len,
            got: n,
        });
    }
    if k == 0 {
        return Err(Error::InvalidArgument("k must be at least 1".into()));
    }
    if n < 3 {
        return Err(Error::InsufficientData { needed: 3, got: n });
    }
    if 2 * k >= n {
        warn!("2k = {} >= n = {n}; using all {} other objects", 2 * k, n - 1);
        return Ok(n - 1);
    }
    Ok(2 * k)
}

/// Each object's `2k` nearest embedded neighbours, sorted by true distance.
pub fn harvest_knn_chains<S: TripletSource>(
    positions: &PointSet,
    oracle: &mut CountingOracle<S>,
    k: usize,
) -> Result<Vec<Chain>> {
    let width = neighbourhood_width(positions.len(), oracle.len(), k)?;
    (0..positions.len())
        .map(|x| {
            let mut order = nearest_in_embedding(positions, x, width);
            oracle.sort_subset(x, &mut order)?;
            Ok(Chain {
                head: x,
                order,
                origin: TripleOrigin::KnnRefine,
            })
        })
        .collect()
}

/// Sorts (or selects within) each object's `2k` nearest embedded
/// neighbours with the oracle and returns the resulting triples.
pub fn harvest_knn_triples<S: TripletSource>(
    positions: &PointSet,
    oracle: &mut CountingOracle<S>,
    k: usize,
    mode: HarvestMode,
) -> Result<TripleSet> {
    if mode == HarvestMode::Sort {
        let chains = harvest_knn_chains(positions, oracle, k)?;
        return chain_triples(&chains, Encoding::Consecutive);
    }
    let n = positions.len();
    let width = neighbourhood_width(n, oracle.len(), k)?;
    let keep = k.min(width - 1).max(1);
    let mut set = TripleSet::new();
    for x in 0..n {
        let mut cands = nearest_in_embedding(positions, x, width);
        select_nearest(oracle, x, &mut cands, keep)?;
        let (near, rest) = cands.split_at(keep);
        if let Some(boundary) = oracle.nearest_among(x, rest)? {
            for &a in near {
                set.insert(Triple::new(x, a, boundary), TripleOrigin::KnnRefine)?;
            }
        }
    }
    Ok(set)
}

/// The `m` nearest objects to `x` by embedded distance, index-tie-broken.
fn nearest_in_embedding(positions: &PointSet, x: usize, m: usize) -> Vec<usize> {
    let px = positions.row(x);
    let mut others: Vec<(f64, usize)> = (0..positions.len())
        .filter(|&y| y != x)
        .map(|y| (sq_dist(px, positions.row(y)), y))
        .collect();
    let by_key = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
    if m < others.len() {
        others.select_nth_unstable_by(m, by_key);
        others.truncate(m);
    }
    others.sort_unstable_by(by_key);
    others.into_iter().map(|(_, y)| y).collect()
}

/// Quickselect by true distance from `head`: afterwards `items[..keep]` are
/// the `keep` nearest, in no particular order.
fn select_nearest<S: TripletSource>(
    oracle: &mut CountingOracle<S>,
    head: usize,
    items: &mut [usize],
    keep: usize,
) -> Result<()> {
    let (mut lo, mut hi) = (0, items.len());
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        items.swap(mid, hi - 1);
        let pivot = items[hi - 1];
        let mut store = lo;
        for i in lo..hi - 1 {
            if oracle.closer(head, items[i], pivot)? {
                items.swap(i, store);
                store += 1;
            }
        }
        items.swap(store, hi - 1);
        if store == keep || store + 1 == keep {
            return Ok(());
        }
        if keep < store {
            hi = store;
        } else {
            lo = store + 1;
        }
    }
    Ok(())
}
