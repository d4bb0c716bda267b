//! Online bipartite (b-)matching that keeps every left vertex matched, using
//! BFS shortest augmenting paths. Right vertices carry `b(v)` copies.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt::Debug;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum MatchingError {
    #[error("no augmenting path for left vertex {0}")]
    NoAugmentingPath(String),
    #[error("vertex {0} already exists")]
    DuplicateVertex(String),
    #[error("vertex {0} does not exist")]
    UnknownVertex(String),
}

/// Longest augmenting path (in edges) allowed when `|N(A)| ≥ α|A|` holds:
/// `2(⌊log_α |L|⌋ + 1) + 1`.
pub fn path_bound(alpha: f64, num_left: usize) -> usize {
    let d = if num_left <= 1 { 1 } else { ((num_left as f64).ln() / alpha.ln() + 1e-9).floor() as usize + 1 };
    2 * d + 1
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PathRecord {
    pub edges: usize,
    pub num_left: usize,
}

#[derive(Clone, Debug)]
struct RightNode<L> {
    nbrs: BTreeSet<L>,
    /// Copy id to its holder and the time the holder was matched there.
    copies: BTreeMap<u32, Option<(L, u64)>>,
    next_copy: u32,
}

impl<L: Ord + Copy> RightNode<L> {
    fn free_copy(&self) -> Option<u32> {
        self.copies.iter().find(|(_, h)| h.is_none()).map(|(&c, _)| c)
    }

    fn holders(&self) -> BTreeSet<L> {
        self.copies.values().flatten().map(|&(l, _)| l).collect()
    }
}

/// Matching state. Left vertices are never deleted.
#[derive(Clone, Debug)]
pub struct OnlineMatching<L, R> {
    alpha: f64,
    left: BTreeMap<L, BTreeSet<R>>,
    right: BTreeMap<R, RightNode<L>>,
    mate: BTreeMap<L, (R, u32)>,
    clock: u64,
    reassignments: u64,
    paths: Vec<PathRecord>,
}

impl<L: Ord + Copy + Debug, R: Ord + Copy + Debug> OnlineMatching<L, R> {
    pub fn new(alpha: f64) -> Self {
        OnlineMatching {
            alpha,
            left: BTreeMap::new(),
            right: BTreeMap::new(),
            mate: BTreeMap::new(),
            clock: 0,
            reassignments: 0,
            paths: Vec::new(),
        }
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn num_left(&self) -> usize {
        self.left.len()
    }

    pub fn num_right(&self) -> usize {
        self.right.len()
    }

    pub fn contains_right(&self, r: R) -> bool {
        self.right.contains_key(&r)
    }

    pub fn capacity(&self, r: R) -> Option<usize> {
        self.right.get(&r).map(|n| n.copies.len())
    }

    /// Right vertex (and copy) currently matched to `u`.
    pub fn partner(&self, u: L) -> Option<R> {
        self.mate.get(&u).map(|&(r, _)| r)
    }

    pub fn partner_copy(&self, u: L) -> Option<(R, u32)> {
        self.mate.get(&u).copied()
    }

    pub fn matching(&self) -> impl Iterator<Item = (L, R)> + '_ {
        self.mate.iter().map(|(&l, &(r, _))| (l, r))
    }

    pub fn left_neighbors(&self, u: L) -> Option<&BTreeSet<R>> {
        self.left.get(&u)
    }

    pub fn right_neighbors(&self, r: R) -> Option<&BTreeSet<L>> {
        self.right.get(&r).map(|n| &n.nbrs)
    }

    /// Total reassignments of previously matched left vertices.
    pub fn reassignments(&self) -> u64 {
        self.reassignments
    }

    pub fn paths(&self) -> &[PathRecord] {
        &self.paths
    }

    /// Recorded paths longer than [`path_bound`] at the time they were found.
    pub fn path_bound_violations(&self) -> Vec<PathRecord> {
        self.paths.iter().copied().filter(|p| p.edges > path_bound(self.alpha, p.num_left)).collect()
    }

    pub fn add_right(&mut self, r: R, nbrs: &[L]) -> Result<(), MatchingError> {
        self.add_right_capacitated(r, 1, nbrs)
    }

    /// Inserts a right vertex with `capacity` copies; the matching is unchanged.
    pub fn add_right_capacitated(&mut self, r: R, capacity: usize, nbrs: &[L]) -> Result<(), MatchingError> {
        if self.right.contains_key(&r) {
            return Err(MatchingError::DuplicateVertex(format!("{r:?}")));
        }
        for u in nbrs {
            if !self.left.contains_key(u) {
                return Err(MatchingError::UnknownVertex(format!("{u:?}")));
            }
        }
        for u in nbrs {
            self.left.get_mut(u).unwrap().insert(r);
        }
        let copies = (0..capacity as u32).map(|c| (c, None)).collect();
        self.right.insert(r, RightNode { nbrs: nbrs.iter().copied().collect(), copies, next_copy: capacity as u32 });
        Ok(())
    }

    /// Inserts and matches a left vertex; returns how many earlier left
    /// vertices changed partner. On error `u` stays in the graph unmatched.
    pub fn add_left(&mut self, u: L, nbrs: &[R]) -> Result<usize, MatchingError> {
        if self.left.contains_key(&u) {
            return Err(MatchingError::DuplicateVertex(format!("{u:?}")));
        }
        for r in nbrs {
            if !self.right.contains_key(r) {
                return Err(MatchingError::UnknownVertex(format!("{r:?}")));
            }
        }
        for r in nbrs {
            self.right.get_mut(r).unwrap().nbrs.insert(u);
        }
        self.left.insert(u, nbrs.iter().copied().collect());
        let moved = self.augment_from(u)?;
        self.reassignments += moved as u64;
        Ok(moved)
    }

    /// Deletes a right vertex and rematches the left vertices it held.
    pub fn remove_right(&mut self, r: R) -> Result<usize, MatchingError> {
        let node = self.right.remove(&r).ok_or_else(|| MatchingError::UnknownVertex(format!("{r:?}")))?;
        for u in &node.nbrs {
            self.left.get_mut(u).unwrap().remove(&r);
        }
        let orphans: Vec<L> = node.copies.values().flatten().map(|&(l, _)| l).collect();
        self.rematch(orphans)
    }

    /// Changes the number of copies of `r`; removal takes free copies first,
    /// then the most recently matched ones.
    pub fn set_capacity(&mut self, r: R, capacity: usize) -> Result<usize, MatchingError> {
        let node = self.right.get_mut(&r).ok_or_else(|| MatchingError::UnknownVertex(format!("{r:?}")))?;
        let cur = node.copies.len();
        if capacity >= cur {
            for _ in cur..capacity {
                node.copies.insert(node.next_copy, None);
                node.next_copy += 1;
            }
            return Ok(0);
        }
        let mut excess = cur - capacity;
        let free: Vec<u32> = node.copies.iter().filter(|(_, h)| h.is_none()).map(|(&c, _)| c).rev().collect();
        for c in free.into_iter().take(excess) {
            node.copies.remove(&c);
            excess -= 1;
        }
        let mut held: Vec<(u64, u32, L)> = node.copies.iter().filter_map(|(&c, h)| h.map(|(l, t)| (t, c, l))).collect();
        held.sort_by(|a, b| b.cmp(a));
        let mut orphans = Vec::new();
        for &(_, c, l) in held.iter().take(excess) {
            node.copies.remove(&c);
            orphans.push(l);
        }
        self.rematch(orphans)
    }

    fn rematch(&mut self, mut orphans: Vec<L>) -> Result<usize, MatchingError> {
        orphans.sort();
        for l in &orphans {
            self.mate.remove(l);
        }
        let mut total = 0;
        for l in orphans {
            let moved = 1 + self.augment_from(l)?;
            self.reassignments += moved as u64;
            total += moved;
        }
        Ok(total)
    }

    /// BFS for the shortest augmenting path from the free left vertex `u`;
    /// returns the number of other left vertices moved.
    fn augment_from(&mut self, u: L) -> Result<usize, MatchingError> {
        let mut via_right: BTreeMap<R, L> = BTreeMap::new();
        let mut seen_left: BTreeSet<L> = BTreeSet::from([u]);
        let mut queue = VecDeque::from([u]);
        let mut target = None;
        'bfs: while let Some(x) = queue.pop_front() {
            for &r in &self.left[&x] {
                if via_right.contains_key(&r) {
                    continue;
                }
                via_right.insert(r, x);
                let node = &self.right[&r];
                if let Some(c) = node.free_copy() {
                    target = Some((r, c));
                    break 'bfs;
                }
                for l in node.holders() {
                    if seen_left.insert(l) {
                        queue.push_back(l);
                    }
                }
            }
        }
        let Some((mut r, mut c)) = target else {
            return Err(MatchingError::NoAugmentingPath(format!("{u:?}")));
        };
        let mut lefts = 0;
        loop {
            let l = via_right[&r];
            lefts += 1;
            self.clock += 1;
            let old = self.mate.insert(l, (r, c));
            self.right.get_mut(&r).unwrap().copies.insert(c, Some((l, self.clock)));
            if l == u {
                break;
            }
            let (pr, pc) = old.expect("intermediate left vertices are matched");
            // The copy `l` left is handed to the previous vertex on the path.
            self.right.get_mut(&pr).unwrap().copies.insert(pc, None);
            r = pr;
            c = pc;
        }
        self.paths.push(PathRecord { edges: 2 * lefts - 1, num_left: self.left.len() });
        let moved = lefts - 1;
        Ok(moved)
    }

    /// Checks that the matching is valid and covers every left vertex.
    pub fn validate(&self) -> Result<(), String> {
        for (&l, &(r, c)) in &self.mate {
            let node = self.right.get(&r).ok_or_else(|| format!("{l:?} matched to missing {r:?}"))?;
            if !node.nbrs.contains(&l) {
                return Err(format!("{l:?} matched to non-neighbor {r:?}"));
            }
            match node.copies.get(&c) {
                Some(Some((h, _))) if *h == l => {}
                other => return Err(format!("copy {c} of {r:?} holds {other:?}, expected {l:?}")),
            }
        }
        for (r, node) in &self.right {
            for (c, h) in &node.copies {
                if let Some((l, _)) = h {
                    if self.mate.get(l) != Some(&(*r, *c)) {
                        return Err(format!("copy {c} of {r:?} claims {l:?}"));
                    }
                }
            }
        }
        for l in self.left.keys() {
            if !self.mate.contains_key(l) {
                return Err(format!("{l:?} is unmatched"));
            }
        }
        Ok(())
    }

    /// Exhaustive check of `Σ_{r∈N(A)} b(r) ≥ α|A|` over all nonempty left
    /// subsets; `None` when there are more than 16 left vertices.
    pub fn expansion_holds(&self) -> Option<bool> {
        let lefts: Vec<&BTreeSet<R>> = self.left.values().collect();
        if lefts.len() > 16 {
            return None;
        }
        for mask in 1u32..(1 << lefts.len()) {
            let mut nbrs = BTreeSet::new();
            for (k, set) in lefts.iter().enumerate() {
                if mask >> k & 1 == 1 {
                    nbrs.extend(set.iter().copied());
                }
            }
            let b: usize = nbrs.iter().map(|r| self.right[r].copies.len()).sum();
            if (b as f64) < self.alpha * mask.count_ones() as f64 - 1e-9 {
                return Some(false);
            }
        }
        Some(true)
    }
}
