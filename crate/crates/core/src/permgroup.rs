//! Finite permutation groups acting on a level of the tree, and the
//! breadth-first closure engine shared by every finite group computation in
//! the crate.
//!
//! Points of level `n` are the words of length `n` in lexicographic order;
//! a permutation is the array of images of those points. All groups here are
//! images of tree automorphisms, so every permutation must preserve the
//! prefix partition of each level below `n`.

use std::collections::{BTreeMap, HashSet};
use std::hash::Hash;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;

use indexmap::IndexSet;

use crate::error::{Error, Result};
use crate::pattern::Pattern;
use crate::tree::Alphabet;

/// Default cap on the number of elements materialized by a closure.
pub const DEFAULT_CAP_ELEMENTS: usize = 1 << 21;

/// Elements of a finite group under the crate-wide convention that
/// `a.compose(b)` applies `b` first.
pub trait GroupElement: Clone + Eq + Hash {
    fn compose(&self, other: &Self) -> Self;
    fn inverse(&self) -> Self;
    fn is_identity(&self) -> bool;
}

/// Size cap plus an optional cancellation flag for long closures.
#[derive(Clone, Debug)]
pub struct Budget {
    pub cap: usize,
    cancel: Option<Arc<AtomicBool>>,
}

impl Budget {
    pub fn new(cap: usize) -> Budget {
        Budget { cap, cancel: None }
    }

    pub fn with_cancel(mut self, flag: Arc<AtomicBool>) -> Budget {
        self.cancel = Some(flag);
        self
    }

    pub(crate) fn check(&self, count: usize, what: &'static str) -> Result<()> {
        if count > self.cap {
            return Err(Error::Resource { what, limit: self.cap });
        }
        if count.is_multiple_of(4096) {
            if let Some(flag) = &self.cancel {
                if flag.load(Ordering::Relaxed) {
                    return Err(Error::Cancelled);
                }
            }
        }
        Ok(())
    }
}

impl Default for Budget {
    fn default() -> Budget {
        Budget::new(DEFAULT_CAP_ELEMENTS)
    }
}

/// Result of a breadth-first closure: the elements in discovery order and,
/// for each, the generator that reached it.
#[derive(Debug)]
pub struct Closure<T> {
    elements: IndexSet<T>,
    parent: Vec<(u32, u32)>,
}

impl<T: GroupElement> Closure<T> {
    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn contains(&self, x: &T) -> bool {
        self.elements.contains(x)
    }

    pub fn index_of(&self, x: &T) -> Option<usize> {
        self.elements.get_index_of(x)
    }

    pub fn get(&self, i: usize) -> &T {
        &self.elements[i]
    }

    pub fn iter(&self) -> impl Iterator<Item = &T> {
        self.elements.iter()
    }

    pub fn into_set(self) -> IndexSet<T> {
        self.elements
    }

    /// Generator indices `w` with `element(i) = gens[w[0]] * gens[w[1]] * ..`.
    pub fn word(&self, mut i: usize) -> Vec<usize> {
        let mut w = Vec::new();
        while i != 0 {
            let (p, g) = self.parent[i];
            w.push(g as usize);
            i = p as usize;
        }
        w.reverse();
        w
    }
}

/// Breadth-first closure of `gens` under right multiplication, starting from
/// `identity`. In a finite group this is the generated subgroup.
pub fn closure<T: GroupElement>(identity: T, gens: &[T], budget: &Budget) -> Result<Closure<T>> {
    let mut elements = IndexSet::new();
    elements.insert(identity);
    let mut parent = vec![(u32::MAX, u32::MAX)];
    let mut i = 0;
    while i < elements.len() {
        for (j, g) in gens.iter().enumerate() {
            let y = elements[i].compose(g);
            if !elements.contains(&y) {
                elements.insert(y);
                parent.push((i as u32, j as u32));
                budget.check(elements.len(), "group closure")?;
            }
        }
        i += 1;
    }
    Ok(Closure { elements, parent })
}

/// A permutation of level `n`, as an image array.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct LeafPerm(Box<[u16]>);

impl LeafPerm {
    pub fn from_images(images: &[usize]) -> Result<LeafPerm> {
        let n = images.len();
        let mut seen = vec![false; n];
        for &y in images {
            if y >= n || n > u16::MAX as usize + 1 || std::mem::replace(&mut seen[y], true) {
                return Err(Error::InvalidPerm(images.to_vec()));
            }
        }
        Ok(LeafPerm(images.iter().map(|&y| y as u16).collect()))
    }

    pub(crate) fn from_raw(images: Vec<u16>) -> LeafPerm {
        LeafPerm(images.into_boxed_slice())
    }

    pub fn identity(degree: usize) -> LeafPerm {
        LeafPerm((0..degree).map(|x| x as u16).collect())
    }

    pub fn degree(&self) -> usize {
        self.0.len()
    }

    #[inline]
    pub fn apply(&self, x: usize) -> usize {
        self.0[x] as usize
    }

    pub fn images(&self) -> Vec<usize> {
        self.0.iter().map(|&y| y as usize).collect()
    }

    pub fn pow(&self, e: u64) -> LeafPerm {
        let mut acc = LeafPerm::identity(self.degree());
        for _ in 0..e {
            acc = acc.compose(self);
        }
        acc
    }

    /// True iff the permutation maps blocks of common prefixes of every
    /// length to blocks.
    pub fn is_prefix_preserving(&self, k: Alphabet, depth: usize) -> bool {
        if self.degree() != k.level_size(depth) {
            return false;
        }
        for j in 1..depth {
            let block = k.level_size(depth - j);
            for start in (0..self.degree()).step_by(block) {
                let target = self.apply(start) / block;
                if (start..start + block).any(|x| self.apply(x) / block != target) {
                    return false;
                }
            }
        }
        true
    }
}

impl GroupElement for LeafPerm {
    fn compose(&self, other: &LeafPerm) -> LeafPerm {
        LeafPerm(other.0.iter().map(|&y| self.0[y as usize]).collect())
    }

    fn inverse(&self) -> LeafPerm {
        let mut inv = vec![0u16; self.0.len()];
        for (x, &y) in self.0.iter().enumerate() {
            inv[y as usize] = x as u16;
        }
        LeafPerm(inv.into_boxed_slice())
    }

    fn is_identity(&self) -> bool {
        self.0.iter().enumerate().all(|(i, &y)| i == y as usize)
    }
}

/// A group of prefix-preserving permutations of level `depth`.
#[derive(Clone, Debug)]
pub struct PermGroup {
    k: Alphabet,
    depth: usize,
    generators: Vec<LeafPerm>,
}

impl PermGroup {
    pub fn new(k: Alphabet, depth: usize, generators: Vec<LeafPerm>) -> Result<PermGroup> {
        for g in &generators {
            if !g.is_prefix_preserving(k, depth) {
                return Err(Error::Invalid(format!(
                    "generator is not a prefix-preserving permutation of level {depth}"
                )));
            }
        }
        Ok(PermGroup { k, depth, generators })
    }

    /// The group generated by the leaf actions of patterns of one size.
    pub fn from_patterns(k: Alphabet, depth: usize, patterns: &[Pattern]) -> Result<PermGroup> {
        let gens = patterns
            .iter()
            .map(|p| {
                if p.alphabet() != k || p.size() != depth {
                    Err(Error::SizeMismatch { left: depth, right: p.size() })
                } else {
                    Ok(p.leaf_permutation())
                }
            })
            .collect::<Result<_>>()?;
        PermGroup::new(k, depth, gens)
    }

    pub fn alphabet(&self) -> Alphabet {
        self.k
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn degree(&self) -> usize {
        self.k.level_size(self.depth)
    }

    pub fn generators(&self) -> &[LeafPerm] {
        &self.generators
    }

    pub fn identity(&self) -> LeafPerm {
        LeafPerm::identity(self.degree())
    }

    pub fn elements(&self, budget: &Budget) -> Result<Closure<LeafPerm>> {
        closure(self.identity(), &self.generators, budget)
    }

    pub fn order(&self, budget: &Budget) -> Result<usize> {
        Ok(self.elements(budget)?.len())
    }

    pub fn member(&self, p: &LeafPerm, budget: &Budget) -> Result<bool> {
        if !p.is_prefix_preserving(self.k, self.depth) {
            return Ok(false);
        }
        let mut elements = IndexSet::new();
        elements.insert(self.identity());
        if p.is_identity() {
            return Ok(true);
        }
        let mut i = 0;
        while i < elements.len() {
            for g in &self.generators {
                let y = elements[i].compose(g);
                if &y == p {
                    return Ok(true);
                }
                if elements.insert(y) {
                    budget.check(elements.len(), "group closure")?;
                }
            }
            i += 1;
        }
        Ok(false)
    }

    /// Normal closure of the commutators of the generators.
    pub fn commutator_subgroup(&self, budget: &Budget) -> Result<PermGroup> {
        let gens: Vec<&LeafPerm> = self.generators.iter().filter(|g| !g.is_identity()).collect();
        let mut normal: Vec<LeafPerm> = Vec::new();
        let mut seen: HashSet<LeafPerm> = HashSet::new();
        for (i, a) in gens.iter().enumerate() {
            for b in &gens[i + 1..] {
                let c = a.inverse().compose(&b.inverse()).compose(a).compose(b);
                if !c.is_identity() && seen.insert(c.clone()) {
                    normal.push(c);
                }
            }
        }
        loop {
            let sub = closure(self.identity(), &normal, budget)?;
            let mut missing = Vec::new();
            for c in &normal {
                for g in &gens {
                    let conj = g.inverse().compose(c).compose(g);
                    if !sub.contains(&conj) && seen.insert(conj.clone()) {
                        missing.push(conj);
                    }
                }
            }
            if missing.is_empty() {
                break;
            }
            normal.extend(missing);
        }
        PermGroup::new(self.k, self.depth, normal)
    }

    /// Structure of `G / [G, G]`.
    pub fn abelianization(&self, budget: &Budget) -> Result<Abelianization> {
        let all = self.elements(budget)?;
        let derived = self.commutator_subgroup(budget)?.elements(budget)?;
        let mut label = vec![u32::MAX; all.len()];
        let mut reps: Vec<usize> = Vec::new();
        for i in 0..all.len() {
            if label[i] != u32::MAX {
                continue;
            }
            let c = reps.len() as u32;
            reps.push(i);
            for d in derived.iter() {
                let y = all.get(i).compose(d);
                let j = all.index_of(&y).expect("coset element lies in the group");
                label[j] = c;
            }
        }
        let order = reps.len() as u64;
        let mut divisors = Vec::new();
        for (p, e) in factorize(order) {
            // a_j = log_p |A[p^j]|, the p^j-torsion
            let mut powers: Vec<LeafPerm> = reps.iter().map(|&i| all.get(i).clone()).collect();
            let mut a = vec![0u32];
            while *a.last().unwrap() < e {
                for x in powers.iter_mut() {
                    *x = x.pow(p);
                }
                let torsion = powers
                    .iter()
                    .filter(|x| label[all.index_of(x).expect("power lies in the group")] == 0)
                    .count() as u64;
                a.push(log_exact(torsion, p));
            }
            let d: Vec<u32> = a.windows(2).map(|w| w[1] - w[0]).collect();
            for j in 0..d.len() {
                let exactly = d[j] - d.get(j + 1).copied().unwrap_or(0);
                for _ in 0..exactly {
                    divisors.push(p.pow(j as u32 + 1));
                }
            }
        }
        divisors.sort_unstable();
        Ok(Abelianization { order, elementary_divisors: divisors })
    }

    /// Bounds on the minimal number of generators: the largest p-rank of the
    /// abelianization below, and a verified generating set above.
    pub fn min_generators_bounds(
        &self,
        candidates: Option<&[LeafPerm]>,
        budget: &Budget,
    ) -> Result<(usize, usize)> {
        let lower = self.abelianization(budget)?.max_rank();
        let distinct = |gs: &[LeafPerm]| {
            gs.iter().filter(|g| !g.is_identity()).collect::<HashSet<_>>().len()
        };
        let mut upper = distinct(&self.generators);
        if let Some(c) = candidates {
            let order = self.order(budget)?;
            if closure(self.identity(), c, budget)?.len() == order
                && c.iter().all(|g| g.degree() == self.degree())
            {
                upper = upper.min(distinct(c));
            }
        }
        debug_assert!(lower <= upper);
        Ok((lower, upper))
    }
}

/// A finite abelian group recorded by its elementary divisors.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Abelianization {
    pub order: u64,
    /// Prime-power orders of the cyclic factors, ascending.
    pub elementary_divisors: Vec<u64>,
}

impl Abelianization {
    pub fn p_rank(&self, p: u64) -> usize {
        self.elementary_divisors.iter().filter(|&&q| q % p == 0).count()
    }

    /// Largest p-rank over all primes (0 for the trivial group).
    pub fn max_rank(&self) -> usize {
        factorize(self.order).keys().map(|&p| self.p_rank(p)).max().unwrap_or(0)
    }

    pub fn invariant_factors(&self) -> Vec<u64> {
        let mut by_prime: BTreeMap<u64, Vec<u64>> = BTreeMap::new();
        for &q in &self.elementary_divisors {
            let p = *factorize(q).keys().next().expect("prime power");
            by_prime.entry(p).or_default().push(q);
        }
        let len = by_prime.values().map(Vec::len).max().unwrap_or(0);
        let mut out = vec![1u64; len];
        for qs in by_prime.values() {
            // qs ascending; align largest powers with the last factor
            for (slot, &q) in out.iter_mut().rev().zip(qs.iter().rev()) {
                *slot *= q;
            }
        }
        out
    }

    /// True iff this group maps onto the abelian group with the given
    /// elementary divisors.
    pub fn surjects_onto(&self, target: &[u64]) -> bool {
        let count = |divs: &[u64], p: u64, j: u32| {
            divs.iter().filter(|&&q| q % p.pow(j) == 0 && q % p == 0).count()
        };
        let mut primes: Vec<u64> = Vec::new();
        for &q in target {
            primes.extend(factorize(q).keys());
        }
        primes.into_iter().all(|p| {
            (1..=40u32)
                .take_while(|&j| p.checked_pow(j).is_some())
                .all(|j| count(&self.elementary_divisors, p, j) >= count(target, p, j))
        })
    }
}

pub(crate) fn factorize(mut n: u64) -> BTreeMap<u64, u32> {
    let mut out = BTreeMap::new();
    let mut p = 2u64;
    while p * p <= n {
        while n.is_multiple_of(p) {
            *out.entry(p).or_insert(0) += 1;
            n /= p;
        }
        p += 1;
    }
    if n > 1 {
        *out.entry(n).or_insert(0) += 1;
    }
    out
}

fn log_exact(mut n: u64, p: u64) -> u32 {
    let mut e = 0;
    while n > 1 {
        debug_assert_eq!(n % p, 0, "torsion subgroup order must be a power of p");
        n /= p;
        e += 1;
    }
    e
}
