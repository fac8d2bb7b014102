use std::collections::{HashMap, HashSet, VecDeque};
use std::fmt;
use std::ops::Mul;
use std::sync::Arc;

use super::machine::{Letter, MachineSpec, State, Word};
use crate::error::{Error, Result};
use crate::tree::{Alphabet, Perm, Vertex};

/// Default bound on the number of distinct section-words explored by
/// identity and membership tests.
pub const DEFAULT_MAX_STATES: usize = 1 << 20;

/// A tree automorphism given as a group word over the states of a machine.
///
/// Two elements are equal as automorphisms iff [`Element::equals`] holds; the
/// word itself is not canonical.
#[derive(Clone)]
pub struct Element {
    machine: Arc<MachineSpec>,
    word: Word,
}

impl Element {
    pub fn identity(machine: &Arc<MachineSpec>) -> Element {
        Element { machine: machine.clone(), word: Vec::new() }
    }

    pub fn state(machine: &Arc<MachineSpec>, state: usize) -> Element {
        assert!(state < machine.len(), "state {state} out of range");
        Element { machine: machine.clone(), word: vec![Letter::pos(state)] }
    }

    pub fn generator(machine: &Arc<MachineSpec>, name: &str) -> Result<Element> {
        machine
            .lookup(name)
            .map(|i| Element::state(machine, i))
            .ok_or_else(|| Error::UnknownSymbol(name.to_string()))
    }

    pub fn from_word(machine: &Arc<MachineSpec>, word: Word) -> Result<Element> {
        machine.check_word(&word)?;
        Ok(Element { machine: machine.clone(), word })
    }

    /// Parses `t*a^-1*b^3` (factors separated by `*` or whitespace; `1` is the identity).
    pub fn parse(machine: &Arc<MachineSpec>, text: &str) -> Result<Element> {
        let mut word = Vec::new();
        for token in text.split(|c: char| c == '*' || c.is_whitespace()).filter(|t| !t.is_empty()) {
            let (name, exp) = match token.split_once('^') {
                Some((n, e)) => {
                    let e: i64 = e.parse().map_err(|_| Error::UnknownSymbol(token.to_string()))?;
                    (n, e)
                }
                None => (token, 1),
            };
            if name == "1" {
                continue;
            }
            let state = machine.lookup(name).ok_or_else(|| Error::UnknownSymbol(name.to_string()))?;
            let letter = if exp < 0 { Letter::neg(state) } else { Letter::pos(state) };
            word.extend(std::iter::repeat_n(letter, exp.unsigned_abs() as usize));
        }
        Ok(Element { machine: machine.clone(), word })
    }

    pub fn machine(&self) -> &Arc<MachineSpec> {
        &self.machine
    }

    pub fn alphabet(&self) -> Alphabet {
        self.machine.alphabet()
    }

    pub fn word(&self) -> &[Letter] {
        &self.word
    }

    pub fn len(&self) -> usize {
        self.word.len()
    }

    pub fn is_empty(&self) -> bool {
        self.word.is_empty()
    }

    /// The same automorphism with a reduced word.
    pub fn normalized(&self) -> Element {
        Element { machine: self.machine.clone(), word: self.machine.normalize(&self.word) }
    }

    /// Re-expresses the element over a machine that extends (or is a disjoint
    /// union containing) its own, with letters shifted by `offset`.
    pub(crate) fn rebased(&self, machine: &Arc<MachineSpec>, offset: usize) -> Element {
        Element {
            machine: machine.clone(),
            word: self.word.iter().map(|l| l.shifted(offset)).collect(),
        }
    }

    pub fn apply(&self, v: &Vertex) -> Result<Vertex> {
        v.check(self.alphabet())?;
        Ok(Vertex::from_raw(self.machine.apply_word(&self.word, v.letters())))
    }

    /// The section `g|_u`.
    ///
    /// Panics if `u` has letters outside the alphabet.
    pub fn section(&self, u: &Vertex) -> Element {
        v_check(u, self.alphabet());
        let mut w = self.machine.normalize(&self.word);
        for &x in u.letters() {
            if w.is_empty() {
                break;
            }
            w = self.machine.word_section(&w, x);
        }
        Element { machine: self.machine.clone(), word: w }
    }

    /// The permutation `g_(u)` of the alphabet at vertex `u`.
    pub fn decoration(&self, u: &Vertex) -> Perm {
        self.section(u).root_perm()
    }

    pub fn root_perm(&self) -> Perm {
        self.machine.word_root_perm(&self.word)
    }

    pub fn multiply(&self, other: &Element) -> Element {
        let (m, oa, ob) = MachineSpec::unify(&self.machine, &other.machine);
        let mut word: Word = self.word.iter().map(|l| l.shifted(oa)).collect();
        word.extend(other.word.iter().map(|l| l.shifted(ob)));
        Element { machine: m, word }
    }

    pub fn inverse(&self) -> Element {
        Element {
            machine: self.machine.clone(),
            word: self.word.iter().rev().map(|l| l.inv()).collect(),
        }
    }

    /// `h^g = g^-1 h g`.
    pub fn conjugate(h: &Element, g: &Element) -> Element {
        g.inverse().multiply(h).multiply(g)
    }

    pub fn pow(&self, e: i64) -> Element {
        let base = if e < 0 { self.inverse() } else { self.clone() };
        let mut word = Vec::with_capacity(base.word.len() * e.unsigned_abs() as usize);
        for _ in 0..e.unsigned_abs() {
            word.extend_from_slice(&base.word);
        }
        Element { machine: self.machine.clone(), word }
    }

    /// A vertex moved by the element, found by breadth-first exploration of
    /// its section-words; `None` iff the element is the identity.
    pub fn moved_vertex(&self, max_states: usize) -> Result<Option<Vertex>> {
        let m = &*self.machine;
        let start = m.normalize(&self.word);
        let mut seen: HashSet<Word> = HashSet::new();
        let mut queue: VecDeque<(Word, Vec<u8>)> = VecDeque::new();
        seen.insert(start.clone());
        queue.push_back((start, Vec::new()));
        while let Some((w, path)) = queue.pop_front() {
            if w.is_empty() {
                continue;
            }
            if let Some(x) = m.first_moved(&w) {
                let mut v = path;
                v.push(x);
                return Ok(Some(Vertex::from_raw(v)));
            }
            for x in m.alphabet().letters() {
                let s = m.word_section(&w, x);
                if !seen.contains(&s) {
                    if seen.len() >= max_states {
                        return Err(Error::Resource { what: "section-words", limit: max_states });
                    }
                    seen.insert(s.clone());
                    let mut p = path.clone();
                    p.push(x);
                    queue.push_back((s, p));
                }
            }
        }
        Ok(None)
    }

    pub fn is_identity(&self, max_states: usize) -> Result<bool> {
        Ok(self.moved_vertex(max_states)?.is_none())
    }

    pub fn equals(&self, other: &Element, max_states: usize) -> Result<bool> {
        self.multiply(&other.inverse()).is_identity(max_states)
    }

    /// True iff every vertex of level `n` is fixed.
    pub fn stabilizes_level(&self, n: usize) -> bool {
        let m = &*self.machine;
        let mut current: HashSet<Word> = HashSet::from([m.normalize(&self.word)]);
        for _ in 0..n {
            current.remove(&Vec::new());
            if current.is_empty() {
                return true;
            }
            if current.iter().any(|w| m.first_moved(w).is_some()) {
                return false;
            }
            current = current
                .iter()
                .flat_map(|w| m.alphabet().letters().map(move |x| m.word_section(w, x)))
                .collect();
        }
        true
    }

    /// Distinct (normalized) sections at the vertices of level `n`.
    pub fn sections_at_level(&self, n: usize) -> Vec<Element> {
        let m = &*self.machine;
        let mut current = vec![m.normalize(&self.word)];
        for _ in 0..n {
            let mut seen = HashSet::new();
            current = current
                .iter()
                .flat_map(|w| m.alphabet().letters().map(move |x| m.word_section(w, x)))
                .filter(|w| seen.insert(w.clone()))
                .collect();
        }
        current
            .into_iter()
            .map(|word| Element { machine: self.machine.clone(), word })
            .collect()
    }

    /// Root permutations on the first `depth` levels in breadth-first order;
    /// equal elements have equal fingerprints.
    pub(crate) fn fingerprint(&self, depth: usize) -> Vec<u8> {
        let m = &*self.machine;
        let mut out = Vec::new();
        let mut current = vec![m.normalize(&self.word)];
        for level in 0..depth {
            let mut next = Vec::new();
            for w in &current {
                out.extend(m.alphabet().letters().map(|x| m.word_image(w, x)));
                if level + 1 < depth {
                    next.extend(m.alphabet().letters().map(|x| m.word_section(w, x)));
                }
            }
            current = next;
        }
        out
    }
}

fn v_check(u: &Vertex, k: Alphabet) {
    if let Err(e) = u.check(k) {
        panic!("{e}");
    }
}

impl Mul for &Element {
    type Output = Element;
    fn mul(self, rhs: &Element) -> Element {
        self.multiply(rhs)
    }
}

impl fmt::Display for Element {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.word.is_empty() {
            return f.write_str("1");
        }
        let mut i = 0;
        let mut first = true;
        while i < self.word.len() {
            let l = self.word[i];
            let mut run = 1;
            while i + run < self.word.len() && self.word[i + run] == l {
                run += 1;
            }
            if !first {
                f.write_str("*")?;
            }
            first = false;
            f.write_str(&self.machine.state_label(l.state as usize))?;
            match (l.inverse, run) {
                (false, 1) => {}
                (false, r) => write!(f, "^{r}")?,
                (true, r) => write!(f, "^-{r}")?,
            }
            i += run;
        }
        Ok(())
    }
}

impl fmt::Debug for Element {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Element({self})")
    }
}

/// `h^g = g^-1 h g`.
pub fn conjugate(h: &Element, g: &Element) -> Element {
    Element::conjugate(h, g)
}

/// The automorphism fixing level `|u|` whose section at `u` is `h` and whose
/// other sections on that level are trivial.
///
/// Realized by extending `h`'s machine with a path of fresh states from the
/// root to `u` for each state occurring in `h`.
pub fn delta(u: &Vertex, h: &Element) -> Element {
    if u.is_root() || h.word.is_empty() {
        return h.clone();
    }
    let m = &*h.machine;
    let k = m.alphabet();
    v_check(u, k);
    let mut states = m.states().to_vec();
    let id = match m.trivial_state() {
        Some(i) => i,
        None => {
            states.push(State::new(Some("1".to_string()), Perm::identity(k), vec![states.len(); k.size()]));
            states.len() - 1
        }
    };
    let mut top: HashMap<u32, usize> = HashMap::new();
    for l in &h.word {
        if top.contains_key(&l.state) {
            continue;
        }
        let base = states.len();
        let n = u.len();
        let label = m.state_label(l.state as usize);
        for (j, &x) in u.letters().iter().enumerate() {
            let next = if j + 1 < n { base + j + 1 } else { l.state as usize };
            let mut sections = vec![id; k.size()];
            sections[x as usize] = next;
            let suffix = Vertex::from_raw(u.letters()[j..].to_vec());
            states.push(State::new(Some(format!("delta[{suffix}]({label})")), Perm::identity(k), sections));
        }
        top.insert(l.state, base);
    }
    let machine = Arc::new(
        MachineSpec::new(k, states, m.generators().clone()).expect("delta extension is valid"),
    );
    let word = h
        .word
        .iter()
        .map(|l| Letter { state: top[&l.state] as u32, inverse: l.inverse })
        .collect();
    Element { machine, word }
}

/// Brings elements onto one machine.
pub fn unify_all(elems: &[Element]) -> Option<(Arc<MachineSpec>, Vec<Element>)> {
    let first = elems.first()?;
    let mut machine = first.machine.clone();
    let mut offsets = vec![0usize];
    for e in &elems[1..] {
        // the left operand always keeps offset 0, so earlier offsets stay valid
        let (u, _, off) = MachineSpec::unify(&machine, &e.machine);
        machine = u;
        offsets.push(off);
    }
    let out = elems
        .iter()
        .zip(offsets)
        .map(|(e, off)| e.rebased(&machine, off))
        .collect();
    Some((machine, out))
}

/// All sections of all elements (the self-similar closure), as distinct
/// reduced words, excluding the identity.
pub fn section_closure(gens: &[Element], cap: usize) -> Result<Vec<Element>> {
    let Some((machine, gens)) = unify_all(gens) else {
        return Ok(Vec::new());
    };
    let m = &*machine;
    let mut seen: HashSet<Word> = HashSet::new();
    let mut order: Vec<Word> = Vec::new();
    let mut queue: VecDeque<Word> = VecDeque::new();
    for g in gens {
        let w = m.normalize(&g.word);
        if seen.insert(w.clone()) {
            queue.push_back(w.clone());
            order.push(w);
        }
    }
    while let Some(w) = queue.pop_front() {
        for x in m.alphabet().letters() {
            let s = m.word_section(&w, x);
            if seen.insert(s.clone()) {
                if seen.len() > cap {
                    return Err(Error::Resource { what: "section closure", limit: cap });
                }
                queue.push_back(s.clone());
                order.push(s);
            }
        }
    }
    Ok(order
        .into_iter()
        .filter(|w| !w.is_empty())
        .map(|word| Element { machine: machine.clone(), word })
        .collect())
}

/// Elements kept up to equality as automorphisms, in insertion order.
#[derive(Clone, Debug)]
pub struct ElementSet {
    elems: Vec<Element>,
    buckets: HashMap<Vec<u8>, Vec<usize>>,
    max_states: usize,
}

impl ElementSet {
    pub fn new(max_states: usize) -> ElementSet {
        ElementSet { elems: Vec::new(), buckets: HashMap::new(), max_states }
    }

    /// Index of an element equal to `e`, if any.
    pub fn find(&self, e: &Element) -> Result<Option<usize>> {
        if let Some(bucket) = self.buckets.get(&e.fingerprint(4)) {
            for &i in bucket {
                if self.elems[i].equals(e, self.max_states)? {
                    return Ok(Some(i));
                }
            }
        }
        Ok(None)
    }

    /// Index of `e`'s class and whether it was new.
    pub fn insert(&mut self, e: Element) -> Result<(usize, bool)> {
        if let Some(i) = self.find(&e)? {
            return Ok((i, false));
        }
        let i = self.elems.len();
        self.buckets.entry(e.fingerprint(4)).or_default().push(i);
        self.elems.push(e);
        Ok((i, true))
    }

    pub fn len(&self) -> usize {
        self.elems.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elems.is_empty()
    }

    pub fn get(&self, i: usize) -> &Element {
        &self.elems[i]
    }

    pub fn elements(&self) -> &[Element] {
        &self.elems
    }

    pub fn into_elements(self) -> Vec<Element> {
        self.elems
    }
}

/// Keeps the first of each group of equal elements (and drops identities).
pub fn dedupe_by_equality(elems: &[Element], max_states: usize) -> Result<Vec<Element>> {
    let mut set = ElementSet::new(max_states);
    for e in elems {
        if !e.is_identity(max_states)? {
            set.insert(e.clone())?;
        }
    }
    Ok(set.into_elements())
}
