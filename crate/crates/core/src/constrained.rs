//! Finitely constrained groups: all portraits avoiding a finite set of
//! forbidden patterns of one size at every vertex.

use std::collections::{BTreeMap, BTreeSet, HashSet, VecDeque};

use serde::{Deserialize, Serialize};

use crate::automorphism::{Element, Word};
use crate::error::{Error, Result};
use crate::pattern::{all_patterns, is_pattern_group, pattern_at, Pattern, PatternSet};
use crate::permgroup::DEFAULT_CAP_ELEMENTS;
use crate::tree::{Alphabet, Perm, Vertex};

/// Which of the two equivalent descriptions a system was given by.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Declared {
    Forbidden,
    Allowed,
}

/// A forbidden-pattern system of uniform size `s`.
#[derive(Clone, Debug)]
pub struct ConstraintSystem {
    allowed: PatternSet,
    forbidden: Option<PatternSet>,
    declared: Declared,
}

impl ConstraintSystem {
    pub fn from_allowed(allowed: PatternSet) -> Result<ConstraintSystem> {
        check_size(allowed.size())?;
        Ok(ConstraintSystem { allowed, forbidden: None, declared: Declared::Allowed })
    }

    /// Builds the system from its forbidden set; the complement is
    /// materialized, so it must not exceed `cap` patterns.
    pub fn from_forbidden(forbidden: PatternSet, cap: usize) -> Result<ConstraintSystem> {
        check_size(forbidden.size())?;
        let allowed = forbidden.complement(cap)?;
        Ok(ConstraintSystem { allowed, forbidden: Some(forbidden), declared: Declared::Forbidden })
    }

    pub fn alphabet(&self) -> Alphabet {
        self.allowed.alphabet()
    }

    pub fn size(&self) -> usize {
        self.allowed.size()
    }

    pub fn declared(&self) -> Declared {
        self.declared
    }

    pub fn allowed(&self) -> &PatternSet {
        &self.allowed
    }

    pub fn is_allowed(&self, p: &Pattern) -> bool {
        self.allowed.contains(p)
    }

    pub fn forbidden(&self, cap: usize) -> Result<PatternSet> {
        match &self.forbidden {
            Some(f) => Ok(f.clone()),
            None => self.allowed.complement(cap),
        }
    }

    pub fn from_json(text: &str) -> Result<ConstraintSystem> {
        let j: SystemJson = serde_json::from_str(text).map_err(|e| Error::Invalid(e.to_string()))?;
        let k = Alphabet::new(j.k)?;
        match (j.forbidden, j.allowed) {
            (Some(f), None) => {
                ConstraintSystem::from_forbidden(PatternSet::from_patterns(k, j.size, f)?, DEFAULT_CAP_ELEMENTS)
            }
            (None, Some(a)) => ConstraintSystem::from_allowed(PatternSet::from_patterns(k, j.size, a)?),
            _ => Err(Error::Invalid(
                "constraint system needs exactly one of `forbidden` and `allowed`".into(),
            )),
        }
    }

    pub fn to_json(&self) -> String {
        let members = |ps: &PatternSet| ps.iter().cloned().collect::<Vec<_>>();
        let j = match (&self.declared, &self.forbidden) {
            (Declared::Forbidden, Some(f)) => SystemJson {
                k: self.alphabet().size(),
                size: self.size(),
                forbidden: Some(members(f)),
                allowed: None,
            },
            _ => SystemJson {
                k: self.alphabet().size(),
                size: self.size(),
                forbidden: None,
                allowed: Some(members(&self.allowed)),
            },
        };
        serde_json::to_string(&j).expect("constraint systems serialize")
    }
}

fn check_size(s: usize) -> Result<()> {
    if s == 0 {
        return Err(Error::InvalidPattern("constraint patterns need size at least 1".into()));
    }
    Ok(())
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SystemJson {
    k: usize,
    size: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    forbidden: Option<Vec<Pattern>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    allowed: Option<Vec<Pattern>>,
}

/// Every size-`s` pattern whose root window of size `p.size()` is `p`.
pub fn pad_to_size(p: &Pattern, s: usize, cap: usize) -> Result<Vec<Pattern>> {
    if s < p.size() {
        return Err(Error::SizeMismatch { left: p.size(), right: s });
    }
    Ok(all_patterns(p.alphabet(), s, cap)?
        .into_iter()
        .filter(|q| q.truncate(p.size()) == *p)
        .collect())
}

/// First vertex whose size-`s` window of `g` is forbidden, found by
/// exploring the reachable section-words of `g`.
pub fn find_violation(g: &Element, c: &ConstraintSystem, max_states: usize) -> Result<Option<Vertex>> {
    let m = g.machine();
    let k = m.alphabet();
    let s = c.size();
    let start: Word = g.normalized().word().to_vec();
    let mut seen: HashSet<Word> = HashSet::from([start.clone()]);
    let mut queue: VecDeque<(Word, Vec<u8>)> = VecDeque::from([(start, Vec::new())]);
    while let Some((w, path)) = queue.pop_front() {
        let e = Element::from_word(m, w.clone())?;
        if !c.is_allowed(&pattern_at(&e, &Vertex::root(), s)) {
            return Ok(Some(Vertex::new(k, &path.iter().map(|&x| x as usize).collect::<Vec<_>>())?));
        }
        for x in 0..k.size() {
            let sec = e.section(&Vertex::new(k, &[x])?).word().to_vec();
            if seen.insert(sec.clone()) {
                if seen.len() > max_states {
                    return Err(Error::Resource { what: "section-words", limit: max_states });
                }
                let mut p = path.clone();
                p.push(x as u8);
                queue.push_back((sec, p));
            }
        }
    }
    Ok(None)
}

/// True iff no forbidden window occurs anywhere in `g`.
pub fn membership(g: &Element, c: &ConstraintSystem, max_states: usize) -> Result<bool> {
    Ok(find_violation(g, c, max_states)?.is_none())
}

/// Root windows of size `s - 1` of the children of a size-`s` pattern.
fn child_keys(p: &Pattern) -> Vec<Pattern> {
    let s = p.size();
    (0..p.alphabet().size()).map(|x| p.window(1, x, s - 1)).collect()
}

/// Size-`s` patterns that occur in some full portrait avoiding the forbidden
/// set, by pruning to a fixed point.
pub fn viable_patterns(c: &ConstraintSystem) -> PatternSet {
    let mut current: BTreeSet<Pattern> = c.allowed().iter().cloned().collect();
    loop {
        let tops: HashSet<Pattern> = current.iter().map(|p| p.truncate(c.size() - 1)).collect();
        let next: BTreeSet<Pattern> = current
            .iter()
            .filter(|p| child_keys(p).iter().all(|q| tops.contains(q)))
            .cloned()
            .collect();
        if next.len() == current.len() {
            break;
        }
        current = next;
    }
    PatternSet::from_patterns(c.alphabet(), c.size(), current).expect("sizes agree")
}

/// A pattern of size `s + m` with root window `p` and every size-`s` window
/// allowed, assembled from viable patterns.
pub fn witness_extension(c: &ConstraintSystem, viable: &PatternSet, p: &Pattern, m: usize) -> Option<Pattern> {
    if m == 0 {
        return viable.contains(p).then(|| p.clone());
    }
    let s = c.size();
    let by_top = group_by_top(viable.iter(), s);
    extend(p, m, &by_top)
}

fn extend(p: &Pattern, m: usize, by_top: &BTreeMap<Pattern, Vec<Pattern>>) -> Option<Pattern> {
    if m == 0 {
        return Some(p.clone());
    }
    let children = child_keys(p)
        .iter()
        .map(|key| by_top.get(key).and_then(|qs| qs.first()).and_then(|q| extend(q, m - 1, by_top)))
        .collect::<Option<Vec<_>>>()?;
    Pattern::glue(&p.decoration(&Vertex::root()), &children).ok()
}

fn group_by_top<'a>(ps: impl Iterator<Item = &'a Pattern>, s: usize) -> BTreeMap<Pattern, Vec<Pattern>> {
    let mut out: BTreeMap<Pattern, Vec<Pattern>> = BTreeMap::new();
    for p in ps {
        out.entry(p.truncate(s - 1)).or_default().push(p.clone());
    }
    out
}

/// The set `T_n` of size-`n` truncations of the portraits in `G(F)`.
#[derive(Clone, Debug)]
pub struct TruncationGroup {
    pub n: usize,
    pub members: BTreeSet<Pattern>,
    /// Whether the members are closed under composition.
    pub group_flag: bool,
}

/// `T_n`, built level by level: `T_{m+1}` consists of the gluings of
/// members of `T_m` whose root window is allowed.
pub fn truncation_group(c: &ConstraintSystem, n: usize, cap: usize) -> Result<TruncationGroup> {
    let members = truncation_set(c, n, cap)?;
    let set = PatternSet::from_patterns(c.alphabet(), n, members.iter().cloned())?;
    let group_flag = is_pattern_group(&set);
    Ok(TruncationGroup { n, members, group_flag })
}

/// The members of `T_n` without the group test.
pub fn truncation_set(c: &ConstraintSystem, n: usize, cap: usize) -> Result<BTreeSet<Pattern>> {
    let s = c.size();
    let viable = viable_patterns(c);
    let mut layer: BTreeSet<Pattern> = viable.iter().cloned().collect();
    if n <= s {
        return Ok(layer.iter().map(|p| p.truncate(n)).collect());
    }
    let k = c.alphabet();
    let perms = Perm::all(k);
    for _ in s..n {
        let classes: Vec<(Pattern, Vec<Pattern>)> = group_by_top(layer.iter(), s).into_iter().collect();
        let keys: Vec<Pattern> = classes.iter().map(|(key, _)| key.clone()).collect();
        // admissible (root, class tuple) combinations
        let mut combos: Vec<(usize, Vec<usize>)> = Vec::new();
        let mut total: u128 = 0;
        for (pi, perm) in perms.iter().enumerate() {
            for_each_tuple(classes.len(), k.size(), |tuple| {
                let top: Vec<Pattern> = tuple.iter().map(|&i| keys[i].clone()).collect();
                let root = Pattern::glue(perm, &top).expect("uniform sizes");
                if c.is_allowed(&root) {
                    total += tuple.iter().map(|&i| classes[i].1.len() as u128).product::<u128>();
                    combos.push((pi, tuple.to_vec()));
                }
            });
        }
        if total > cap as u128 {
            return Err(Error::Resource { what: "truncation group", limit: cap });
        }
        let mut next = BTreeSet::new();
        for (pi, tuple) in combos {
            let lists: Vec<&Vec<Pattern>> = tuple.iter().map(|&i| &classes[i].1).collect();
            let lens: Vec<usize> = lists.iter().map(|l| l.len()).collect();
            let mut idx = vec![0usize; lists.len()];
            loop {
                let children: Vec<Pattern> = idx.iter().zip(&lists).map(|(&i, l)| l[i].clone()).collect();
                next.insert(Pattern::glue(&perms[pi], &children).expect("uniform sizes"));
                if !advance(&mut idx, &lens) {
                    break;
                }
            }
        }
        layer = next;
    }
    Ok(layer)
}

fn for_each_tuple(base: usize, len: usize, mut f: impl FnMut(&[usize])) {
    if base == 0 {
        return;
    }
    let mut idx = vec![0usize; len];
    let lens = vec![base; len];
    loop {
        f(&idx);
        if !advance(&mut idx, &lens) {
            return;
        }
    }
}

/// Mixed-radix increment, last digit fastest; false after the last tuple.
fn advance(idx: &mut [usize], lens: &[usize]) -> bool {
    for i in (0..idx.len()).rev() {
        idx[i] += 1;
        if idx[i] < lens[i] {
            return true;
        }
        idx[i] = 0;
    }
    false
}

/// `G(F)` is a group iff its viable patterns form a group.
pub fn is_group(c: &ConstraintSystem) -> bool {
    is_pattern_group(&viable_patterns(c))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::automorphism::{MachineSpec, State};
    use std::sync::Arc;

    fn fig(l: &str) -> Pattern {
        Pattern::from_d4_label(l).unwrap()
    }

    fn labels(ls: &[&str]) -> PatternSet {
        PatternSet::from_patterns(Alphabet::binary(), 2, ls.iter().map(|l| fig(l))).unwrap()
    }

    fn r_system() -> ConstraintSystem {
        ConstraintSystem::from_forbidden(labels(&["a", "at^2", "at", "at^3"]), 1 << 10).unwrap()
    }

    fn b_system() -> ConstraintSystem {
        ConstraintSystem::from_forbidden(labels(&["t", "t^3", "at", "at^3"]), 1 << 10).unwrap()
    }

    fn machine() -> Arc<MachineSpec> {
        let k = Alphabet::binary();
        let states = vec![
            State::new(None, Perm::identity(k), vec![0, 0]),
            State::new(Some("t".into()), Perm::cycle(k), vec![0, 1]),
            State::new(Some("a".into()), Perm::cycle(k), vec![0, 0]),
        ];
        Arc::new(MachineSpec::new(k, states, Default::default()).unwrap())
    }

    #[test]
    fn membership_in_r_and_b() {
        let m = machine();
        let t = Element::parse(&m, "t").unwrap();
        let a = Element::parse(&m, "a").unwrap();
        assert!(membership(&t, &r_system(), 1 << 10).unwrap());
        assert!(!membership(&t, &b_system(), 1 << 10).unwrap());
        assert_eq!(find_violation(&t, &b_system(), 1 << 10).unwrap(), Some(Vertex::root()));
        assert!(membership(&a, &b_system(), 1 << 10).unwrap());
        assert!(!membership(&a, &r_system(), 1 << 10).unwrap());
        let id = Element::identity(&m);
        assert!(membership(&id, &r_system(), 1 << 10).unwrap());
        // t*a has the pattern at^3 at the root, allowed in neither
        let ta = Element::parse(&m, "a*t^2").unwrap();
        assert!(!membership(&ta, &b_system(), 16).unwrap());
    }

    #[test]
    fn viable_sets() {
        assert_eq!(viable_patterns(&r_system()), labels(&["1", "t", "t^2", "t^3"]));
        assert_eq!(viable_patterns(&b_system()), labels(&["1", "a", "t^2", "at^2"]));
        let free = ConstraintSystem::from_forbidden(PatternSet::new(Alphabet::binary(), 2), 64).unwrap();
        assert_eq!(viable_patterns(&free).len(), 8);
    }

    #[test]
    fn truncations_of_r() {
        let r = r_system();
        let t2 = truncation_group(&r, 2, 1 << 20).unwrap();
        assert_eq!(t2.members.len(), 4);
        assert!(t2.group_flag);
        for (n, expected) in [(1, 2usize), (2, 4), (3, 16), (4, 256), (5, 65536)] {
            assert_eq!(truncation_set(&r, n, 1 << 20).unwrap().len(), expected, "n = {n}");
        }
        let b2 = truncation_group(&b_system(), 2, 1 << 20).unwrap();
        assert_eq!(b2.members, labels(&["1", "a", "t^2", "at^2"]).members().clone());
        assert!(truncation_set(&r, 5, 1000).unwrap_err().is_resource());
    }

    #[test]
    fn truncation_is_consistent() {
        let b = b_system();
        let t4 = truncation_set(&b, 4, 1 << 20).unwrap();
        let t3 = truncation_set(&b, 3, 1 << 20).unwrap();
        let down: BTreeSet<Pattern> = t4.iter().map(|p| p.truncate(3)).collect();
        assert_eq!(down, t3);
        let viable = viable_patterns(&b);
        for p in &t4 {
            for (_, w) in p.windows(2) {
                assert!(viable.contains(&w));
            }
        }
    }

    #[test]
    fn group_criterion() {
        assert!(is_group(&r_system()));
        let k = Alphabet::binary();
        let no_id = PatternSet::from_patterns(k, 1, [Pattern::identity(k, 1)]).unwrap();
        assert!(!is_group(&ConstraintSystem::from_forbidden(no_id, 8).unwrap()));
    }

    #[test]
    fn soundness_of_viable_patterns() {
        for c in [r_system(), b_system()] {
            let viable = viable_patterns(&c);
            for p in viable.iter() {
                for m in 0..=4 {
                    let w = witness_extension(&c, &viable, p, m).expect("viable patterns extend");
                    assert_eq!(w.size(), 2 + m);
                    assert_eq!(&w.truncate(2), p);
                    assert!(w.windows(2).iter().all(|(_, q)| c.is_allowed(q)));
                }
            }
        }
    }

    #[test]
    fn trivial_pattern_survives_when_allowed() {
        let k = Alphabet::binary();
        let only_id = PatternSet::from_patterns(k, 3, [Pattern::identity(k, 3)]).unwrap();
        let c = ConstraintSystem::from_allowed(only_id.clone()).unwrap();
        assert_eq!(viable_patterns(&c), only_id);
    }

    #[test]
    fn json_forms() {
        let r = r_system();
        let text = r.to_json();
        assert!(text.contains("\"forbidden\"") && !text.contains("\"allowed\""));
        let back = ConstraintSystem::from_json(&text).unwrap();
        assert_eq!(back.allowed(), r.allowed());
        let allowed = ConstraintSystem::from_allowed(r.allowed().clone()).unwrap();
        assert!(allowed.to_json().contains("\"allowed\""));
        assert!(ConstraintSystem::from_json(r#"{"k":2,"size":1}"#).is_err());
        assert!(ConstraintSystem::from_json(r#"{"k":2,"size":1,"forbidden":[],"allowed":[]}"#).is_err());
    }

    #[test]
    fn padding() {
        let padded = pad_to_size(&fig("t"), 3, 1 << 10).unwrap();
        assert_eq!(padded.len(), 16);
        assert!(padded.iter().all(|p| p.truncate(2) == fig("t")));
    }
}
