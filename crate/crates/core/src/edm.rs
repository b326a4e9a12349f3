//! Ground-truth string distances.
//!
//! [`edm_exact`] computes the edit distance with moves: the fewest unit-cost
//! operations turning one string into another, where an operation is a
//! single-base substitution, insertion or deletion, or moving one contiguous
//! block to another position in the same string (no reversal). The problem
//! is NP-complete in general; here strings are capped at
//! [`MAX_EXACT_LENGTH`] bases and solved by bidirectional breadth-first
//! search.
//!
//! The search uses two prunings, both admissible:
//!
//! * Levenshtein distance is an upper bound, so the search only looks for
//!   strictly shorter paths and stops once the depth lower bound reaches it.
//! * A node `v` reached at depth `k` is dropped when `k + h(v, target)` can
//!   no longer beat the bound. `h` is the base-count imbalance
//!   `max(Σ surplus, Σ deficit)`, which changes by at most one per
//!   operation and is never below the length difference, so it also
//!   enforces the length band around the endpoints.

use std::collections::{BTreeSet, HashMap};
use std::sync::Mutex;

use rustc_hash::FxHashMap;

use crate::error::{Error, Result};
use crate::sequence::Nucleotide;

/// Longest input accepted by [`edm_exact`].
pub const MAX_EXACT_LENGTH: usize = 10;

/// Room for any intermediate string: `MAX_EXACT_LENGTH` plus the largest
/// possible Levenshtein bound, plus one insertion.
const BUF: usize = 2 * MAX_EXACT_LENGTH + 1;

/// Unit-cost insert/delete/substitute distance.
pub fn levenshtein(x: &[Nucleotide], y: &[Nucleotide]) -> usize {
    let mut prev: Vec<usize> = (0..=y.len()).collect();
    let mut row = vec![0; y.len() + 1];
    for (i, a) in x.iter().enumerate() {
        row[0] = i + 1;
        for (j, b) in y.iter().enumerate() {
            let substitute = prev[j] + usize::from(a != b);
            row[j + 1] = substitute.min(prev[j + 1] + 1).min(row[j] + 1);
        }
        std::mem::swap(&mut prev, &mut row);
    }
    prev[y.len()]
}

/// Every distinct string one operation away from `s`, excluding `s`.
pub fn edm_neighbors(s: &[Nucleotide]) -> BTreeSet<Vec<Nucleotide>> {
    let codes: Vec<u8> = s.iter().map(|b| b.index() as u8).collect();
    let mut out = BTreeSet::new();
    for_each_neighbor(&codes, |n| {
        if n != codes.as_slice() {
            out.insert(n.iter().map(|&c| Nucleotide::from_index(c.into())).collect());
        }
    });
    out
}

/// Calls `f` on every string one operation away from `s`. Duplicates and
/// `s` itself may be reported.
fn for_each_neighbor(s: &[u8], mut f: impl FnMut(&[u8])) {
    let n = s.len();
    let mut buf = [0u8; BUF + 1];

    // substitutions
    buf[..n].copy_from_slice(s);
    for i in 0..n {
        for c in 0..4 {
            if c != s[i] {
                buf[i] = c;
                f(&buf[..n]);
            }
        }
        buf[i] = s[i];
    }

    // deletions
    for i in 0..n {
        if i > 0 && s[i] == s[i - 1] {
            continue;
        }
        buf[..i].copy_from_slice(&s[..i]);
        buf[i..n - 1].copy_from_slice(&s[i + 1..]);
        f(&buf[..n - 1]);
    }

    // insertions
    if n < BUF {
        for p in 0..=n {
            buf[..p].copy_from_slice(&s[..p]);
            buf[p + 1..=n].copy_from_slice(&s[p..]);
            for c in 0..4 {
                buf[p] = c;
                f(&buf[..=n]);
            }
        }
    }

    // block moves. Moving a block right past a neighbouring block is the
    // same as moving that neighbour left, so every move is some block
    // s[i..j] reinserted at p < i: s[..p] ++ s[i..j] ++ s[p..i] ++ s[j..].
    for i in 1..n {
        for j in i + 1..=n {
            let len = j - i;
            for p in 0..i {
                buf[..p].copy_from_slice(&s[..p]);
                buf[p..p + len].copy_from_slice(&s[i..j]);
                buf[p + len..j].copy_from_slice(&s[p..i]);
                buf[j..n].copy_from_slice(&s[j..]);
                f(&buf[..n]);
            }
        }
    }
}

/// Packs a string of codes into a hash key: two bits per base, length in the
/// top byte.
fn pack(s: &[u8]) -> u64 {
    let bits = s.iter().rev().fold(0u64, |acc, &c| (acc << 2) | u64::from(c));
    bits | ((s.len() as u64) << 56)
}

fn unpack(key: u64, buf: &mut [u8; BUF + 1]) -> usize {
    let len = (key >> 56) as usize;
    let mut bits = key & ((1 << 56) - 1);
    for slot in buf.iter_mut().take(len) {
        *slot = (bits & 3) as u8;
        bits >>= 2;
    }
    len
}

#[derive(Clone, Copy)]
struct Counts([i8; 4]);

impl Counts {
    fn of(s: &[u8]) -> Self {
        let mut c = [0i8; 4];
        for &b in s {
            c[b as usize] += 1;
        }
        Counts(c)
    }

    /// Lower bound on the operations needed to match `target`'s base counts.
    fn imbalance(&self, target: &Counts) -> usize {
        let (mut surplus, mut deficit) = (0usize, 0usize);
        for k in 0..4 {
            let d = i32::from(self.0[k]) - i32::from(target.0[k]);
            if d > 0 {
                surplus += d as usize;
            } else {
                deficit += (-d) as usize;
            }
        }
        surplus.max(deficit)
    }
}

struct Side {
    visited: FxHashMap<u64, u8>,
    frontier: Vec<u64>,
    depth: usize,
    target: Counts,
}

impl Side {
    fn new(start: &[u8], target: &[u8]) -> Self {
        let key = pack(start);
        let mut visited = FxHashMap::default();
        visited.insert(key, 0);
        Self {
            visited,
            frontier: vec![key],
            depth: 0,
            target: Counts::of(target),
        }
    }
}

/// Exact edit distance with moves.
///
/// `budget` caps the number of distinct strings the search may store;
/// exceeding it returns [`Error::BudgetExceeded`] rather than a guess.
pub fn edm_exact(x: &[Nucleotide], y: &[Nucleotide], budget: Option<usize>) -> Result<usize> {
    for s in [x, y] {
        if s.len() > MAX_EXACT_LENGTH {
            return Err(Error::SequenceTooLong {
                length: s.len(),
                max: MAX_EXACT_LENGTH,
            });
        }
    }
    if x == y {
        return Ok(0);
    }
    let upper = levenshtein(x, y);
    if upper <= 1 {
        return Ok(upper);
    }

    let xs: Vec<u8> = x.iter().map(|b| b.index() as u8).collect();
    let ys: Vec<u8> = y.iter().map(|b| b.index() as u8).collect();
    let mut sides = [Side::new(&xs, &ys), Side::new(&ys, &xs)];
    let budget = budget.unwrap_or(usize::MAX);
    let mut buf = [0u8; BUF + 1];
    let mut next = Vec::new();

    // Invariant: the two visited sets are disjoint, so the distance is at
    // least depth_x + depth_y + 1. Only paths shorter than `upper` matter.
    while sides[0].depth + sides[1].depth + 1 < upper {
        let grow = usize::from(sides[1].frontier.len() < sides[0].frontier.len());
        let (this, other) = if grow == 0 {
            let (a, b) = sides.split_at_mut(1);
            (&mut a[0], &b[0])
        } else {
            let (a, b) = sides.split_at_mut(1);
            (&mut b[0], &a[0])
        };
        let depth = this.depth + 1;
        let mut best = usize::MAX;

        next.clear();
        for &key in &this.frontier {
            let len = unpack(key, &mut buf);
            let mut overflow = false;
            for_each_neighbor(&buf[..len], |nb| {
                let k = pack(nb);
                if this.visited.contains_key(&k) {
                    return;
                }
                if let Some(&d) = other.visited.get(&k) {
                    best = best.min(depth + usize::from(d));
                }
                if depth + Counts::of(nb).imbalance(&this.target) >= upper {
                    return;
                }
                this.visited.insert(k, depth as u8);
                next.push(k);
                overflow |= this.visited.len() + other.visited.len() > budget;
            });
            if overflow {
                return Err(Error::BudgetExceeded { budget });
            }
        }
        if best != usize::MAX {
            return Ok(best.min(upper));
        }
        std::mem::swap(&mut this.frontier, &mut next);
        this.depth = depth;
        if this.frontier.is_empty() {
            break;
        }
    }
    Ok(upper)
}

/// `(N − D)/N` for two strings of equal length `N`.
pub fn similarity(x: &[Nucleotide], y: &[Nucleotide]) -> Result<f64> {
    let distance = edm_exact(x, y, None)?;
    similarity_from_distance(x.len(), y.len(), distance)
}

pub fn similarity_from_distance(len_x: usize, len_y: usize, distance: usize) -> Result<f64> {
    if len_x != len_y {
        return Err(Error::LengthMismatch {
            expected: len_x,
            found: len_y,
        });
    }
    if len_x == 0 {
        return Err(Error::EmptySequence);
    }
    Ok((len_x as f64 - distance as f64) / len_x as f64)
}

type PairKey = (Vec<Nucleotide>, Vec<Nucleotide>);

/// Memoized [`edm_exact`] keyed by the unordered pair, safe to share across
/// threads.
#[derive(Debug, Default)]
pub struct EdmCache {
    budget: Option<usize>,
    map: Mutex<HashMap<PairKey, usize>>,
}

impl EdmCache {
    pub fn new(budget: Option<usize>) -> Self {
        Self {
            budget,
            map: Mutex::default(),
        }
    }

    pub fn distance(&self, x: &[Nucleotide], y: &[Nucleotide]) -> Result<usize> {
        let key = if x <= y {
            (x.to_vec(), y.to_vec())
        } else {
            (y.to_vec(), x.to_vec())
        };
        if let Some(&d) = self.map.lock().expect("cache lock").get(&key) {
            return Ok(d);
        }
        let d = edm_exact(x, y, self.budget)?;
        Ok(*self.map.lock().expect("cache lock").entry(key).or_insert(d))
    }

    pub fn len(&self) -> usize {
        self.map.lock().expect("cache lock").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}
