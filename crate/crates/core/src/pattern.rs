//! Patterns: decorations of the finite tree `X^[s]` (levels `0..s`).
//!
//! A pattern of size `s` is the same thing as an automorphism of the depth-`s`
//! tree. Decorations are stored flat in breadth-first vertex order: the
//! vertex `v` of length `i` sits at index `(k^i - 1)/(k - 1) + rank(v)`.

use std::collections::{BTreeSet, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::automorphism::{section_closure, unify_all, Element};
use crate::error::{Error, Result};
use crate::permgroup::{closure, Budget, GroupElement, LeafPerm};
use crate::tree::{Alphabet, Perm, Vertex};

#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Pattern {
    k: Alphabet,
    size: usize,
    // decoration of vertex number i occupies [i*k, (i+1)*k)
    dec: Box<[u8]>,
}

/// Index of the first vertex of level `i` in breadth-first order.
#[inline]
fn offset(k: usize, i: usize) -> usize {
    (k.pow(i as u32) - 1) / (k - 1)
}

impl Pattern {
    pub fn identity(k: Alphabet, size: usize) -> Pattern {
        let n = k.tree_size(size);
        let dec = (0..n).flat_map(|_| k.letters()).collect();
        Pattern { k, size, dec }
    }

    /// Builds a pattern from its decorations in breadth-first order.
    pub fn from_decorations(k: Alphabet, size: usize, decorations: &[Perm]) -> Result<Pattern> {
        let n = k.tree_size(size);
        if decorations.len() != n {
            return Err(Error::InvalidPattern(format!(
                "size {size} needs {n} decorations, got {}",
                decorations.len()
            )));
        }
        let mut dec = Vec::with_capacity(n * k.size());
        for p in decorations {
            if p.alphabet() != k {
                return Err(Error::AlphabetMismatch { left: k.size(), right: p.alphabet().size() });
            }
            dec.extend_from_slice(p.images());
        }
        Ok(Pattern { k, size, dec: dec.into_boxed_slice() })
    }

    pub fn alphabet(&self) -> Alphabet {
        self.k
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn vertex_count(&self) -> usize {
        self.dec.len() / self.k.size()
    }

    #[inline]
    fn slot(&self, index: usize) -> &[u8] {
        let k = self.k.size();
        &self.dec[index * k..(index + 1) * k]
    }

    /// Decoration at `v`. Panics unless `|v| < size`.
    pub fn decoration(&self, v: &Vertex) -> Perm {
        assert!(v.len() < self.size, "vertex {v} outside a pattern of size {}", self.size);
        let k = self.k.size();
        Perm::from_raw(self.slot(offset(k, v.len()) + v.rank(self.k)).to_vec())
    }

    pub fn decorations(&self) -> Vec<Perm> {
        self.dec.chunks(self.k.size()).map(|c| Perm::from_raw(c.to_vec())).collect()
    }

    pub fn is_identity(&self) -> bool {
        self.dec.chunks(self.k.size()).all(|c| c.iter().enumerate().all(|(i, &y)| i == y as usize))
    }

    fn check_same(&self, q: &Pattern) -> Result<()> {
        if self.k != q.k {
            return Err(Error::AlphabetMismatch { left: self.k.size(), right: q.k.size() });
        }
        if self.size != q.size {
            return Err(Error::SizeMismatch { left: self.size, right: q.size });
        }
        Ok(())
    }

    /// `self * q` with `q` applied first: `(pq)_v = p_{q(v)} q_v`.
    pub fn compose(&self, q: &Pattern) -> Result<Pattern> {
        self.check_same(q)?;
        Ok(self.compose_unchecked(q))
    }

    fn compose_unchecked(&self, q: &Pattern) -> Pattern {
        let k = self.k.size();
        let mut out = vec![0u8; self.dec.len()];
        // qimg[r] = rank of q(v) for the vertex v of rank r on the current level
        let mut qimg = vec![0usize];
        for level in 0..self.size {
            let off = offset(k, level);
            let mut next = Vec::with_capacity(qimg.len() * k);
            for (r, &w) in qimg.iter().enumerate() {
                let qd = q.slot(off + r);
                let pd = self.slot(off + w);
                for x in 0..k {
                    out[(off + r) * k + x] = pd[qd[x] as usize];
                }
                if level + 1 < self.size {
                    next.extend(qd.iter().map(|&y| w * k + y as usize));
                }
            }
            qimg = next;
        }
        Pattern { k: self.k, size: self.size, dec: out.into_boxed_slice() }
    }

    /// `(p^-1)_{p(v)} = (p_v)^-1`.
    pub fn inverse(&self) -> Pattern {
        let k = self.k.size();
        let mut out = vec![0u8; self.dec.len()];
        let mut img = vec![0usize];
        for level in 0..self.size {
            let off = offset(k, level);
            let mut next = Vec::with_capacity(img.len() * k);
            for (r, &w) in img.iter().enumerate() {
                let pd = self.slot(off + r);
                for x in 0..k {
                    out[(off + w) * k + pd[x] as usize] = x as u8;
                }
                if level + 1 < self.size {
                    next.extend(pd.iter().map(|&y| w * k + y as usize));
                }
            }
            img = next;
        }
        Pattern { k: self.k, size: self.size, dec: out.into_boxed_slice() }
    }

    /// Image of a vertex of length at most `size`.
    pub fn apply(&self, v: &Vertex) -> Result<Vertex> {
        v.check(self.k)?;
        if v.len() > self.size {
            return Err(Error::WindowOutOfRange { depth: 0, size: v.len(), pattern: self.size });
        }
        let k = self.k.size();
        let mut r = 0usize;
        let mut out = Vec::with_capacity(v.len());
        for (level, &x) in v.letters().iter().enumerate() {
            out.push(self.slot(offset(k, level) + r)[x as usize]);
            r = r * k + x as usize;
        }
        Ok(Vertex::from_raw(out))
    }

    /// The induced permutation of `X^size`, over lexicographically ordered words.
    pub fn leaf_permutation(&self) -> LeafPerm {
        let k = self.k.size();
        let mut img: Vec<u16> = vec![0];
        for level in 0..self.size {
            let off = offset(k, level);
            let mut next = Vec::with_capacity(img.len() * k);
            for (r, &w) in img.iter().enumerate() {
                let pd = self.slot(off + r);
                next.extend(pd.iter().map(|&y| w * k as u16 + y as u16));
            }
            img = next;
        }
        LeafPerm::from_raw(img)
    }

    /// Inverse of [`Pattern::leaf_permutation`]; fails unless `leaves` is a
    /// prefix-preserving permutation of `X^size`.
    pub fn from_leaf_permutation(k: Alphabet, size: usize, leaves: &LeafPerm) -> Result<Pattern> {
        if !leaves.is_prefix_preserving(k, size) {
            return Err(Error::InvalidPattern(
                "leaf permutation does not preserve prefixes".to_string(),
            ));
        }
        let kk = k.size();
        let mut dec = vec![0u8; k.tree_size(size) * kk];
        for level in 0..size {
            let off = offset(kk, level);
            let block = k.level_size(size - level - 1);
            for r in 0..k.level_size(level) {
                for x in 0..kk {
                    let leaf = (r * kk + x) * block;
                    dec[(off + r) * kk + x] = ((leaves.apply(leaf) / block) % kk) as u8;
                }
            }
        }
        Ok(Pattern { k, size, dec: dec.into_boxed_slice() })
    }

    /// The pattern of size `s + 1` with `root` at the root and `children[x]`
    /// below the letter `x`.
    pub fn glue(root: &Perm, children: &[Pattern]) -> Result<Pattern> {
        let k = root.alphabet();
        if children.len() != k.size() {
            return Err(Error::InvalidPattern(format!(
                "glue needs {} children, got {}",
                k.size(),
                children.len()
            )));
        }
        let s = children[0].size;
        for c in children {
            if c.k != k {
                return Err(Error::AlphabetMismatch { left: k.size(), right: c.k.size() });
            }
            if c.size != s {
                return Err(Error::SizeMismatch { left: s, right: c.size });
            }
        }
        let kk = k.size();
        let mut dec = Vec::with_capacity(k.tree_size(s + 1) * kk);
        dec.extend_from_slice(root.images());
        for level in 0..s {
            let off = offset(kk, level);
            let width = k.level_size(level);
            for c in children {
                dec.extend_from_slice(&c.dec[off * kk..(off + width) * kk]);
            }
        }
        Ok(Pattern { k, size: s + 1, dec: dec.into_boxed_slice() })
    }

    /// The size-`r` window of the pattern at `u`.
    pub fn subpattern_at(&self, u: &Vertex, r: usize) -> Result<Pattern> {
        u.check(self.k)?;
        if u.len() + r > self.size {
            return Err(Error::WindowOutOfRange { depth: u.len(), size: r, pattern: self.size });
        }
        Ok(self.window(u.len(), u.rank(self.k), r))
    }

    /// Window of size `r` at the vertex of the given level and rank.
    pub(crate) fn window(&self, level: usize, rank: usize, r: usize) -> Pattern {
        let k = self.k.size();
        let mut dec = Vec::with_capacity(self.k.tree_size(r) * k);
        for j in 0..r {
            let off = offset(k, level + j);
            let width = self.k.level_size(j);
            let start = off + rank * width;
            dec.extend_from_slice(&self.dec[start * k..(start + width) * k]);
        }
        Pattern { k: self.k, size: r, dec: dec.into_boxed_slice() }
    }

    /// The pattern restricted to its first `r` levels.
    pub fn truncate(&self, r: usize) -> Pattern {
        assert!(r <= self.size, "cannot truncate size {} to {r}", self.size);
        self.window(0, 0, r)
    }

    /// Every complete size-`r` window, with its vertex, in breadth-first order.
    pub fn windows(&self, r: usize) -> Vec<(Vertex, Pattern)> {
        if r > self.size {
            return Vec::new();
        }
        (0..=self.size - r)
            .flat_map(|level| {
                (0..self.k.level_size(level)).map(move |rank| {
                    (Vertex::from_rank(self.k, level, rank), self.window(level, rank, r))
                })
            })
            .collect()
    }

    /// Name of a binary size-2 pattern as an element of the dihedral group
    /// generated by `t` and `a`.
    pub fn d4_label(&self) -> Option<&'static str> {
        if self.k.size() != 2 || self.size != 2 {
            return None;
        }
        let bits: Vec<bool> = self.dec.chunks(2).map(|c| c[0] == 1).collect();
        D4_LABELS.iter().find(|(_, b)| b[..] == bits[..]).map(|(name, _)| *name)
    }

    /// The binary size-2 pattern with the given label (`1`, `t`, `t^2`,
    /// `t^3`, `a`, `at`, `at^2`, `at^3`).
    pub fn from_d4_label(label: &str) -> Option<Pattern> {
        let (_, bits) = D4_LABELS.iter().find(|(name, _)| *name == label)?;
        let k = Alphabet::binary();
        let decs: Vec<Perm> = bits
            .iter()
            .map(|&b| if b { Perm::transposition(k, 0, 1) } else { Perm::identity(k) })
            .collect();
        Pattern::from_decorations(k, 2, &decs).ok()
    }
}

// root, child 0, child 1; true marks the transposition
const D4_LABELS: [(&str, [bool; 3]); 8] = [
    ("1", [false, false, false]),
    ("t^2", [false, true, true]),
    ("a", [true, false, false]),
    ("at^2", [true, true, true]),
    ("t", [true, false, true]),
    ("t^3", [true, true, false]),
    ("at", [false, false, true]),
    ("at^3", [false, true, false]),
];

impl GroupElement for Pattern {
    fn compose(&self, other: &Pattern) -> Pattern {
        debug_assert!(self.check_same(other).is_ok());
        self.compose_unchecked(other)
    }

    fn inverse(&self) -> Pattern {
        Pattern::inverse(self)
    }

    fn is_identity(&self) -> bool {
        Pattern::is_identity(self)
    }
}

/// `p * q`, applying `q` first.
pub fn compose_pattern(p: &Pattern, q: &Pattern) -> Result<Pattern> {
    p.compose(q)
}

pub fn invert_pattern(p: &Pattern) -> Pattern {
    p.inverse()
}

/// Breadth-first decorations, levels separated by `|`.
impl fmt::Display for Pattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let k = self.k.size();
        for level in 0..self.size {
            if level > 0 {
                f.write_str(" | ")?;
            }
            let off = offset(k, level);
            for r in 0..self.k.level_size(level) {
                if r > 0 {
                    f.write_str(" ")?;
                }
                write!(f, "{}", Perm::from_raw(self.slot(off + r).to_vec()))?;
            }
        }
        Ok(())
    }
}

impl fmt::Debug for Pattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.d4_label() {
            Some(l) => write!(f, "Pattern[{l}]"),
            None => write!(f, "Pattern[{self}]"),
        }
    }
}

#[derive(Serialize, Deserialize)]
struct PatternJson {
    k: usize,
    size: usize,
    decorations: Vec<Perm>,
}

impl Serialize for Pattern {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        PatternJson { k: self.k.size(), size: self.size, decorations: self.decorations() }
            .serialize(s)
    }
}

impl<'de> Deserialize<'de> for Pattern {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let j = PatternJson::deserialize(d)?;
        let k = Alphabet::new(j.k).map_err(serde::de::Error::custom)?;
        Pattern::from_decorations(k, j.size, &j.decorations).map_err(serde::de::Error::custom)
    }
}

/// The size-`s` pattern of `g` at `u`, i.e. the root pattern of `g|_u`.
pub fn pattern_at(g: &Element, u: &Vertex, s: usize) -> Pattern {
    let m = g.machine();
    let k = m.alphabet();
    let mut dec = Vec::with_capacity(k.tree_size(s) * k.size());
    let mut cur = vec![g.section(u).word().to_vec()];
    let mut cache: HashMap<Vec<_>, Vec<_>> = HashMap::new();
    for level in 0..s {
        for w in &cur {
            dec.extend_from_slice(m.word_root_perm(w).images());
        }
        if level + 1 < s {
            let mut next = Vec::with_capacity(cur.len() * k.size());
            for w in &cur {
                let secs = cache
                    .entry(w.clone())
                    .or_insert_with(|| k.letters().map(|x| m.word_section(w, x)).collect());
                next.extend(secs.iter().cloned());
            }
            cur = next;
        }
    }
    Pattern { k, size: s, dec: dec.into_boxed_slice() }
}

/// Every pattern of size `s`, in breadth-first lexicographic order.
pub fn all_patterns(k: Alphabet, s: usize, cap: usize) -> Result<Vec<Pattern>> {
    let perms = Perm::all(k);
    let n = k.tree_size(s);
    let count = (perms.len() as f64).powi(n as i32);
    if count > cap as f64 {
        return Err(Error::Resource { what: "pattern enumeration", limit: cap });
    }
    let mut out = Vec::with_capacity(count as usize);
    let mut digits = vec![0usize; n];
    loop {
        let decs: Vec<Perm> = digits.iter().map(|&d| perms[d].clone()).collect();
        out.push(Pattern::from_decorations(k, s, &decs)?);
        let mut i = n;
        loop {
            if i == 0 {
                return Ok(out);
            }
            i -= 1;
            digits[i] += 1;
            if digits[i] < perms.len() {
                break;
            }
            digits[i] = 0;
        }
    }
}

/// A finite set of patterns sharing alphabet and size.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PatternSet {
    k: Alphabet,
    size: usize,
    members: BTreeSet<Pattern>,
}

impl PatternSet {
    pub fn new(k: Alphabet, size: usize) -> PatternSet {
        PatternSet { k, size, members: BTreeSet::new() }
    }

    pub fn from_patterns(
        k: Alphabet,
        size: usize,
        patterns: impl IntoIterator<Item = Pattern>,
    ) -> Result<PatternSet> {
        let mut set = PatternSet::new(k, size);
        for p in patterns {
            set.insert(p)?;
        }
        Ok(set)
    }

    pub fn alphabet(&self) -> Alphabet {
        self.k
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn insert(&mut self, p: Pattern) -> Result<bool> {
        if p.k != self.k {
            return Err(Error::AlphabetMismatch { left: self.k.size(), right: p.k.size() });
        }
        if p.size != self.size {
            return Err(Error::SizeMismatch { left: self.size, right: p.size });
        }
        Ok(self.members.insert(p))
    }

    pub fn contains(&self, p: &Pattern) -> bool {
        self.members.contains(p)
    }

    pub fn iter(&self) -> impl Iterator<Item = &Pattern> {
        self.members.iter()
    }

    pub fn members(&self) -> &BTreeSet<Pattern> {
        &self.members
    }

    /// All size-`s` patterns not in the set.
    pub fn complement(&self, cap: usize) -> Result<PatternSet> {
        let all = all_patterns(self.k, self.size, cap)?;
        Ok(PatternSet {
            k: self.k,
            size: self.size,
            members: all.into_iter().filter(|p| !self.members.contains(p)).collect(),
        })
    }

    /// Subgroup test in `Aut(X^[s])`.
    pub fn is_group(&self) -> bool {
        is_pattern_group(self)
    }

    /// Transitivity of the leaf action on `X^s`.
    pub fn is_transitive(&self) -> bool {
        is_transitive(self)
    }
}

impl Serialize for PatternSet {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_seq(self.members.iter())
    }
}

impl<'a> IntoIterator for &'a PatternSet {
    type Item = &'a Pattern;
    type IntoIter = std::collections::btree_set::Iter<'a, Pattern>;
    fn into_iter(self) -> Self::IntoIter {
        self.members.iter()
    }
}

pub fn is_pattern_group(ps: &PatternSet) -> bool {
    if !ps.contains(&Pattern::identity(ps.k, ps.size)) {
        return false;
    }
    let identity = Pattern::identity(ps.k, ps.size);
    let budget = Budget::new(ps.len());
    let mut gens: Vec<Pattern> = Vec::new();
    let mut generated: BTreeSet<Pattern> = BTreeSet::from([identity.clone()]);
    for p in ps.iter() {
        if generated.contains(p) {
            continue;
        }
        gens.push(p.clone());
        match closure(identity.clone(), &gens, &budget) {
            Ok(c) => {
                if c.iter().any(|q| !ps.contains(q)) {
                    return false;
                }
                generated = c.into_set().into_iter().collect();
            }
            Err(_) => return false,
        }
    }
    true
}

pub fn is_transitive(ps: &PatternSet) -> bool {
    let n = ps.k.level_size(ps.size);
    let perms: Vec<LeafPerm> = ps.iter().map(Pattern::leaf_permutation).collect();
    let mut seen = vec![false; n];
    seen[0] = true;
    let mut stack = vec![0usize];
    let mut reached = 1;
    while let Some(x) = stack.pop() {
        for p in &perms {
            let y = p.apply(x);
            if !seen[y] {
                seen[y] = true;
                reached += 1;
                stack.push(y);
            }
        }
    }
    reached == n
}

/// Essential patterns of a self-similar group together with one witness
/// element per pattern.
#[derive(Clone, Debug)]
pub struct EssentialPatterns {
    pub set: PatternSet,
    /// Patterns in breadth-first discovery order, each with a witness whose
    /// root pattern it is. The first entry is the identity.
    pub witnesses: Vec<(Pattern, Element)>,
}

impl EssentialPatterns {
    pub fn witness(&self, p: &Pattern) -> Option<&Element> {
        self.witnesses.iter().find(|(q, _)| q == p).map(|(_, e)| e)
    }
}

/// The image of the group generated by the section closure of `generators`
/// in `Aut(X^[s])`.
pub fn essential_patterns(generators: &[Element], s: usize, cap: usize) -> Result<EssentialPatterns> {
    let Some((machine, gens)) = unify_all(generators) else {
        return Err(Error::Invalid("essential patterns need at least one generator".into()));
    };
    let k = machine.alphabet();
    let closed = section_closure(&gens, cap)?;
    let mut gen_patterns: Vec<Pattern> = Vec::new();
    let mut gen_elems: Vec<Element> = Vec::new();
    for e in closed {
        let p = pattern_at(&e, &Vertex::root(), s);
        if !p.is_identity() && !gen_patterns.contains(&p) {
            gen_patterns.push(p);
            gen_elems.push(e);
        }
    }
    let identity = Pattern::identity(k, s);
    let c = closure(identity, &gen_patterns, &Budget::new(cap))?;
    let mut witnesses = Vec::with_capacity(c.len());
    for (i, p) in c.iter().enumerate() {
        let mut w = Element::identity(&machine);
        for j in c.word(i) {
            w = w.multiply(&gen_elems[j]);
        }
        witnesses.push((p.clone(), w));
    }
    let set = PatternSet::from_patterns(k, s, c.into_set())?;
    Ok(EssentialPatterns { set, witnesses })
}
