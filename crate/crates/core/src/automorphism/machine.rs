use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tree::{Alphabet, Perm};

/// One state of a machine: its root permutation and its sections, one per letter.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct State {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub perm: Perm,
    pub sections: Vec<usize>,
}

impl State {
    pub fn new(name: impl Into<Option<String>>, perm: Perm, sections: Vec<usize>) -> State {
        State { name: name.into(), perm, sections }
    }

    fn same_transitions(&self, other: &State) -> bool {
        self.perm == other.perm && self.sections == other.sections
    }
}

/// A state letter of a group word, possibly the formal inverse of the state.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Letter {
    pub state: u32,
    pub inverse: bool,
}

impl Letter {
    pub fn pos(state: usize) -> Letter {
        Letter { state: state as u32, inverse: false }
    }

    pub fn neg(state: usize) -> Letter {
        Letter { state: state as u32, inverse: true }
    }

    #[inline]
    pub fn inv(self) -> Letter {
        Letter { state: self.state, inverse: !self.inverse }
    }

    pub(crate) fn shifted(self, offset: usize) -> Letter {
        Letter { state: self.state + offset as u32, inverse: self.inverse }
    }
}

/// Words serialize as `[state, ±1]` pairs.
impl Serialize for Letter {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        (self.state, if self.inverse { -1i8 } else { 1i8 }).serialize(s)
    }
}

impl<'de> Deserialize<'de> for Letter {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let (state, sign) = <(u32, i8)>::deserialize(d)?;
        match sign {
            1 => Ok(Letter { state, inverse: false }),
            -1 => Ok(Letter { state, inverse: true }),
            _ => Err(serde::de::Error::custom("letter exponent must be 1 or -1")),
        }
    }
}

pub type Word = Vec<Letter>;

/// A finite Mealy-style automaton whose states are tree automorphisms given by
/// wreath recursion `state = perm (section_0, .., section_{k-1})`.
#[derive(Clone, Debug)]
pub struct MachineSpec {
    k: Alphabet,
    states: Vec<State>,
    generators: BTreeMap<String, usize>,
    inv_perms: Vec<Perm>,
    // smallest state index bisimilar to each state
    rep: Vec<u32>,
    trivial: Vec<bool>,
}

#[derive(Serialize, Deserialize)]
struct MachineJson {
    k: Alphabet,
    states: Vec<State>,
    #[serde(default)]
    generators: BTreeMap<String, usize>,
}

impl MachineSpec {
    pub fn new(
        k: Alphabet,
        states: Vec<State>,
        generators: BTreeMap<String, usize>,
    ) -> Result<MachineSpec> {
        let n = states.len();
        for (i, st) in states.iter().enumerate() {
            if st.perm.images().len() != k.size() {
                return Err(Error::InvalidMachine(format!(
                    "state {i}: permutation has {} images, alphabet has {}",
                    st.perm.images().len(),
                    k.size()
                )));
            }
            if st.sections.len() != k.size() {
                return Err(Error::InvalidMachine(format!(
                    "state {i}: {} sections, alphabet has {}",
                    st.sections.len(),
                    k.size()
                )));
            }
            if let Some(&bad) = st.sections.iter().find(|&&j| j >= n) {
                return Err(Error::InvalidMachine(format!(
                    "state {i}: section index {bad} out of range"
                )));
            }
        }
        if let Some((name, &idx)) = generators.iter().find(|(_, &idx)| idx >= n) {
            return Err(Error::InvalidMachine(format!(
                "generator `{name}` refers to missing state {idx}"
            )));
        }
        let inv_perms = states.iter().map(|s| s.perm.inverse()).collect();
        let rep = bisimulation_classes(&states);
        let trivial = trivial_states(&states);
        Ok(MachineSpec { k, states, generators, inv_perms, rep, trivial })
    }

    pub fn from_json(text: &str) -> Result<MachineSpec> {
        let raw: MachineJson =
            serde_json::from_str(text).map_err(|e| Error::Invalid(format!("machine JSON: {e}")))?;
        MachineSpec::new(raw.k, raw.states, raw.generators)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("machine serializes")
    }

    pub fn alphabet(&self) -> Alphabet {
        self.k
    }

    pub fn states(&self) -> &[State] {
        &self.states
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn generators(&self) -> &BTreeMap<String, usize> {
        &self.generators
    }

    /// Resolves a generator name, falling back to state names.
    pub fn lookup(&self, name: &str) -> Option<usize> {
        self.generators
            .get(name)
            .copied()
            .or_else(|| self.states.iter().position(|s| s.name.as_deref() == Some(name)))
    }

    pub fn state_label(&self, i: usize) -> String {
        if let Some(name) = &self.states[i].name {
            return name.clone();
        }
        self.generators
            .iter()
            .find(|(_, &j)| j == i)
            .map(|(n, _)| n.clone())
            .unwrap_or_else(|| format!("s{i}"))
    }

    pub fn is_trivial_state(&self, i: usize) -> bool {
        self.trivial[i]
    }

    pub fn trivial_state(&self) -> Option<usize> {
        self.trivial.iter().position(|&t| t)
    }

    /// Canonical representative of the bisimulation class of state `i`.
    pub fn representative(&self, i: usize) -> usize {
        self.rep[i] as usize
    }

    pub(crate) fn check_word(&self, word: &[Letter]) -> Result<()> {
        match word.iter().find(|l| l.state as usize >= self.states.len()) {
            Some(l) => Err(Error::InvalidMachine(format!("state index {} out of range", l.state))),
            None => Ok(()),
        }
    }

    #[inline]
    pub(crate) fn letter_image(&self, l: Letter, x: u8) -> u8 {
        if l.inverse {
            self.inv_perms[l.state as usize].apply(x)
        } else {
            self.states[l.state as usize].perm.apply(x)
        }
    }

    /// Section of a letter at `x` and the image of `x`.
    #[inline]
    pub(crate) fn letter_section(&self, l: Letter, x: u8) -> (Letter, u8) {
        let st = l.state as usize;
        if l.inverse {
            // (s^-1)|_x = (s|_{s^-1(x)})^-1
            let y = self.inv_perms[st].apply(x);
            (Letter::neg(self.states[st].sections[y as usize]), y)
        } else {
            (Letter::pos(self.states[st].sections[x as usize]), self.states[st].perm.apply(x))
        }
    }

    /// Removes trivial states, replaces states by class representatives and
    /// freely reduces.
    pub(crate) fn normalize(&self, word: &[Letter]) -> Word {
        let mut out: Word = Vec::with_capacity(word.len());
        for &l in word {
            if self.trivial[l.state as usize] {
                continue;
            }
            let l = Letter { state: self.rep[l.state as usize], inverse: l.inverse };
            if out.last() == Some(&l.inv()) {
                out.pop();
            } else {
                out.push(l);
            }
        }
        out
    }

    /// Image of letter `x` under the product of the word (rightmost letter first).
    #[inline]
    pub(crate) fn word_image(&self, word: &[Letter], x: u8) -> u8 {
        word.iter().rev().fold(x, |y, &l| self.letter_image(l, y))
    }

    pub(crate) fn word_root_perm(&self, word: &[Letter]) -> Perm {
        Perm::from_raw(self.k.letters().map(|x| self.word_image(word, x)).collect())
    }

    pub(crate) fn first_moved(&self, word: &[Letter]) -> Option<u8> {
        self.k.letters().find(|&x| self.word_image(word, x) != x)
    }

    /// Normalized section of the word at letter `x`, via `(fg)|_x = f|_{g(x)} g|_x`.
    pub(crate) fn word_section(&self, word: &[Letter], x: u8) -> Word {
        let mut out = vec![Letter::pos(0); word.len()];
        let mut cur = x;
        for (slot, &l) in out.iter_mut().zip(word).rev() {
            let (s, y) = self.letter_section(l, cur);
            *slot = s;
            cur = y;
        }
        self.normalize(&out)
    }

    pub(crate) fn apply_word(&self, word: &[Letter], v: &[u8]) -> Vec<u8> {
        let mut cur = v.to_vec();
        for &l in word.iter().rev() {
            let mut st = l;
            for slot in cur.iter_mut() {
                let (next, y) = self.letter_section(st, *slot);
                *slot = y;
                st = next;
            }
        }
        cur
    }

    /// Disjoint union or, when one machine extends the other, the larger one.
    /// Returns the combined machine and the offsets to add to the letters of
    /// `a` and `b` respectively.
    pub fn unify(a: &Arc<MachineSpec>, b: &Arc<MachineSpec>) -> (Arc<MachineSpec>, usize, usize) {
        assert_eq!(a.k, b.k, "cannot combine automorphisms over different alphabets");
        if Arc::ptr_eq(a, b) {
            return (a.clone(), 0, 0);
        }
        let extends = |small: &MachineSpec, big: &MachineSpec| {
            small.states.len() <= big.states.len()
                && small.states.iter().zip(&big.states).all(|(x, y)| x.same_transitions(y))
        };
        if extends(a, b) {
            return (b.clone(), 0, 0);
        }
        if extends(b, a) {
            return (a.clone(), 0, 0);
        }
        let offset = a.states.len();
        let mut states = a.states.clone();
        states.extend(b.states.iter().map(|s| State {
            name: s.name.clone(),
            perm: s.perm.clone(),
            sections: s.sections.iter().map(|&j| j + offset).collect(),
        }));
        let mut generators = a.generators.clone();
        for (name, &idx) in &b.generators {
            generators.entry(name.clone()).or_insert(idx + offset);
        }
        let m = MachineSpec::new(a.k, states, generators).expect("union of valid machines");
        (Arc::new(m), 0, offset)
    }

    /// A copy of the machine with an explicit inverse state appended for every
    /// state; state `i + len()` is the inverse of state `i`.
    pub fn with_inverses(&self) -> MachineSpec {
        let n = self.states.len();
        let mut states = self.states.clone();
        for (i, st) in self.states.iter().enumerate() {
            let sections = self
                .k
                .letters()
                .map(|x| st.sections[self.inv_perms[i].apply(x) as usize] + n)
                .collect();
            let name = st.name.as_ref().map(|s| format!("{s}^-1"));
            states.push(State { name, perm: self.inv_perms[i].clone(), sections });
        }
        let mut generators = self.generators.clone();
        for (name, &idx) in &self.generators {
            generators.insert(format!("{name}^-1"), idx + n);
        }
        MachineSpec::new(self.k, states, generators).expect("inverse machine is valid")
    }

    /// Graphviz rendering: one node per state labelled by its root permutation.
    pub fn to_dot(&self) -> String {
        let mut out = String::from("digraph machine {\n");
        for i in 0..self.states.len() {
            let _ = writeln!(
                out,
                "  s{i} [label=\"{}\\n{}\"];",
                self.state_label(i),
                self.states[i].perm
            );
        }
        for (i, st) in self.states.iter().enumerate() {
            for (x, &j) in st.sections.iter().enumerate() {
                let _ = writeln!(out, "  s{i} -> s{j} [label=\"{x}\"];");
            }
        }
        out.push_str("}\n");
        out
    }
}

impl Serialize for MachineSpec {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        MachineJson {
            k: self.k,
            states: self.states.clone(),
            generators: self.generators.clone(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for MachineSpec {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let raw = MachineJson::deserialize(d)?;
        MachineSpec::new(raw.k, raw.states, raw.generators).map_err(serde::de::Error::custom)
    }
}

/// Moore-style partition refinement; returns the smallest index of each class.
fn bisimulation_classes(states: &[State]) -> Vec<u32> {
    let n = states.len();
    let mut ids: HashMap<&Perm, u32> = HashMap::new();
    let mut class: Vec<u32> = states
        .iter()
        .map(|s| {
            let next = ids.len() as u32;
            *ids.entry(&s.perm).or_insert(next)
        })
        .collect();
    let mut count = ids.len();
    loop {
        let mut sigs: HashMap<(u32, Vec<u32>), u32> = HashMap::new();
        let refined: Vec<u32> = (0..n)
            .map(|i| {
                let sig = (class[i], states[i].sections.iter().map(|&j| class[j]).collect());
                let next = sigs.len() as u32;
                *sigs.entry(sig).or_insert(next)
            })
            .collect();
        let stable = sigs.len() == count;
        count = sigs.len();
        class = refined;
        if stable {
            break;
        }
    }
    let mut first: HashMap<u32, u32> = HashMap::new();
    (0..n)
        .map(|i| *first.entry(class[i]).or_insert(i as u32))
        .collect()
}

/// Greatest fixed point of "identity root permutation and all sections trivial".
fn trivial_states(states: &[State]) -> Vec<bool> {
    let mut trivial: Vec<bool> = states.iter().map(|s| s.perm.is_identity()).collect();
    loop {
        let mut changed = false;
        for i in 0..states.len() {
            if trivial[i] && states[i].sections.iter().any(|&j| !trivial[j]) {
                trivial[i] = false;
                changed = true;
            }
        }
        if !changed {
            return trivial;
        }
    }
}
