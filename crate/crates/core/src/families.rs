//! Built-in machines and constraint systems: odometer towers, the groups
//! `G(B)` and `G(R)`, a size-3 system defining the trivial group, and the
//! first Grigorchuk group. Also the word-level decomposition and exponent
//! vectors used for the quotient computations.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use serde::Serialize;

use crate::automorphism::{Element, Letter, MachineSpec, State};
use crate::constrained::ConstraintSystem;
use crate::error::{Error, Result};
use crate::pattern::{all_patterns, essential_patterns, Pattern, PatternSet};
use crate::permgroup::DEFAULT_CAP_ELEMENTS;
use crate::tree::{Alphabet, Perm, Vertex};

/// A named group `K` with its pattern size and the constraint system of the
/// closure of its pattern-closure group.
#[derive(Clone, Debug)]
pub struct Family {
    pub name: String,
    pub machine: Arc<MachineSpec>,
    /// Generators of `K`.
    pub generators: Vec<Element>,
    /// Pattern size `s + 1`.
    pub size: usize,
    pub constraints: ConstraintSystem,
    /// Largest depth `n` with `|T_n|` at most the default closure cap.
    pub depth_cap: usize,
}

impl Family {
    pub fn alphabet(&self) -> Alphabet {
        self.machine.alphabet()
    }

    pub fn element(&self, text: &str) -> Result<Element> {
        Element::parse(&self.machine, text)
    }
}

fn state(name: &str, perm: Perm, sections: Vec<usize>) -> State {
    State::new(Some(name.to_string()), perm, sections)
}

fn build(k: Alphabet, states: Vec<State>) -> Arc<MachineSpec> {
    let gens = states
        .iter()
        .enumerate()
        .filter_map(|(i, s)| s.name.clone().filter(|n| n != "1").map(|n| (n, i)))
        .collect::<BTreeMap<_, _>>();
    Arc::new(MachineSpec::new(k, states, gens).expect("built-in machines are valid"))
}

fn last_only(k: Alphabet, target: usize) -> Vec<usize> {
    let mut s = vec![0; k.size()];
    s[k.size() - 1] = target;
    s
}

/// The machine of the odometer `t = ρ(1, .., 1, t)`.
pub fn odometer(k: Alphabet) -> Arc<MachineSpec> {
    build(
        k,
        vec![state("1", Perm::identity(k), vec![0; k.size()]), state("t", Perm::cycle(k), last_only(k, 1))],
    )
}

fn odometer_tower_machine(k: Alphabet, s: usize, n: usize) -> Arc<MachineSpec> {
    let mut states = vec![state("1", Perm::identity(k), vec![0; k.size()]), state("t", Perm::cycle(k), last_only(k, 1))];
    // t^(k^j) = (t^(k^(j-1)), .., t^(k^(j-1))), with t_s = t^(k^s)
    for j in 1..=s {
        let prev = states.len() - 1;
        let name = if j == s { format!("t_{s}") } else { format!("t_pow{j}") };
        states.push(state(&name, Perm::identity(k), vec![prev; k.size()]));
    }
    // t_(m+1) = (1, .., 1, t_m)
    for m in s + 1..n {
        let prev = states.len() - 1;
        states.push(state(&format!("t_{m}"), Perm::identity(k), last_only(k, prev)));
    }
    build(k, states)
}

/// The odometer tower `t, t_{s+1}, .., t_{n-1}`, with `t_s = t^(k^s)`
/// available as a state as well.
pub fn odometer_tower(k: Alphabet, s: usize, n: usize) -> Vec<Element> {
    let m = odometer_tower_machine(k, s, n);
    std::iter::once("t".to_string())
        .chain((s + 1..n).map(|j| format!("t_{j}")))
        .map(|name| Element::generator(&m, &name).expect("tower state"))
        .collect()
}

/// Machine with `a = (01)(1,1)`, `a_1 = (a,a)` and `a_(m+1) = (1, a_m)` up
/// to `a_(n-1)`.
pub fn gb_machine(n: usize) -> Arc<MachineSpec> {
    let k = Alphabet::binary();
    let mut states = vec![
        state("1", Perm::identity(k), vec![0, 0]),
        state("a", Perm::cycle(k), vec![0, 0]),
    ];
    if n >= 2 {
        states.push(state("a_1", Perm::identity(k), vec![1, 1]));
    }
    for m in 2..n {
        let prev = states.len() - 1;
        states.push(state(&format!("a_{m}"), Perm::identity(k), vec![0, prev]));
    }
    build(k, states)
}

/// The Grigorchuk group: `a = (01)(1,1)`, `b = (a,c)`, `c = (a,d)`, `d = (1,b)`.
pub fn grigorchuk_machine() -> Arc<MachineSpec> {
    let k = Alphabet::binary();
    let id = Perm::identity(k);
    build(
        k,
        vec![
            state("1", id.clone(), vec![0, 0]),
            state("a", Perm::cycle(k), vec![0, 0]),
            state("b", id.clone(), vec![1, 3]),
            state("c", id.clone(), vec![1, 4]),
            state("d", id, vec![0, 2]),
        ],
    )
}

fn labeled_set(labels: &[&str]) -> PatternSet {
    PatternSet::from_patterns(
        Alphabet::binary(),
        2,
        labels.iter().map(|l| Pattern::from_d4_label(l).expect("D4 label")),
    )
    .expect("uniform size")
}

/// `R = {a, at^2, at, at^3}`.
pub fn r_patterns() -> PatternSet {
    labeled_set(&["a", "at^2", "at", "at^3"])
}

/// `B = {t, t^3, at, at^3}`.
pub fn b_patterns() -> PatternSet {
    labeled_set(&["t", "t^3", "at", "at^3"])
}

/// Size-3 system forbidding every pattern with an `R` pattern at the root
/// or a `B` pattern below either child of the root.
pub fn trivial3() -> ConstraintSystem {
    let k = Alphabet::binary();
    let (r, b) = (r_patterns(), b_patterns());
    let forbidden = all_patterns(k, 3, 1 << 10)
        .expect("small enumeration")
        .into_iter()
        .filter(|p| {
            r.contains(&p.truncate(2))
                || (0..2).any(|x| b.contains(&p.subpattern_at(&Vertex::from_raw(vec![x]), 2).unwrap()))
        });
    let forbidden = PatternSet::from_patterns(k, 3, forbidden).expect("uniform size");
    ConstraintSystem::from_forbidden(forbidden, 1 << 10).expect("small complement")
}

/// `log_k |T_n|` for the closure of the odometer at pattern size `s + 1`.
pub fn odometer_log_order(s: usize, k: usize, n: usize) -> u128 {
    if n <= s + 1 {
        return n as u128;
    }
    let mut l = (s + 1) as u128;
    for _ in s + 1..n {
        l = (s + 1) as u128 + k as u128 * (l - s as u128);
    }
    l
}

fn odometer_depth_cap(k: usize, s: usize) -> usize {
    let limit = (DEFAULT_CAP_ELEMENTS as f64).log(k as f64) + 1e-9;
    let mut n = 1;
    while n < 64 && (odometer_log_order(s, k, n + 1) as f64) <= limit {
        n += 1;
    }
    n
}

fn ess_system(gens: &[Element], size: usize) -> ConstraintSystem {
    let ess = essential_patterns(gens, size, DEFAULT_CAP_ELEMENTS).expect("built-in image fits the cap");
    ConstraintSystem::from_allowed(ess.set).expect("size at least 1")
}

/// `G(k, s+1)`: the closure of the odometer at pattern size `s + 1`.
pub fn odometer_family(k: Alphabet, s: usize) -> Family {
    let depth_cap = odometer_depth_cap(k.size(), s);
    let machine = odometer_tower_machine(k, s, depth_cap.max(s + 1));
    let t = Element::generator(&machine, "t").expect("t");
    let constraints = ess_system(std::slice::from_ref(&t), s + 1);
    Family {
        name: format!("odometer:k={},s={s}", k.size()),
        machine,
        generators: vec![t],
        size: s + 1,
        constraints,
        depth_cap,
    }
}

pub fn gb() -> Family {
    let machine = gb_machine(5);
    let gens = vec![Element::generator(&machine, "a").unwrap(), Element::generator(&machine, "a_1").unwrap()];
    Family {
        name: "gB".into(),
        machine,
        generators: gens,
        size: 2,
        constraints: ConstraintSystem::from_forbidden(b_patterns(), 64).expect("small"),
        depth_cap: 5,
    }
}

pub fn gr() -> Family {
    let machine = odometer_tower_machine(Alphabet::binary(), 1, 5);
    let t = Element::generator(&machine, "t").unwrap();
    Family {
        name: "gR".into(),
        machine,
        generators: vec![t],
        size: 2,
        constraints: ConstraintSystem::from_forbidden(r_patterns(), 64).expect("small"),
        depth_cap: 5,
    }
}

pub fn trivial3_family() -> Family {
    let k = Alphabet::binary();
    let machine = build(k, vec![state("1", Perm::identity(k), vec![0, 0])]);
    Family {
        name: "trivial3".into(),
        generators: vec![Element::identity(&machine)],
        machine,
        size: 3,
        constraints: trivial3(),
        depth_cap: 6,
    }
}

pub fn grigorchuk() -> Family {
    let machine = grigorchuk_machine();
    let gens: Vec<Element> = ["a", "b", "c", "d"].iter().map(|n| Element::generator(&machine, n).unwrap()).collect();
    let constraints = ess_system(&gens, 4);
    Family { name: "grigorchuk".into(), machine, generators: gens, size: 4, constraints, depth_cap: 4 }
}

/// Resolves `odometer:k=K,s=S`, `gB`, `gR`, `trivial3` or `grigorchuk`.
pub fn family(name: &str) -> Result<Family> {
    match name {
        "gB" => Ok(gb()),
        "gR" => Ok(gr()),
        "trivial3" => Ok(trivial3_family()),
        "grigorchuk" => Ok(grigorchuk()),
        _ => {
            let params = name
                .strip_prefix("odometer:")
                .ok_or_else(|| Error::UnknownSymbol(name.to_string()))?;
            let mut k = None;
            let mut s = None;
            for kv in params.split(',') {
                let (key, value) = kv.split_once('=').ok_or_else(|| Error::UnknownSymbol(name.to_string()))?;
                let value: usize = value.trim().parse().map_err(|_| Error::UnknownSymbol(name.to_string()))?;
                match key.trim() {
                    "k" => k = Some(value),
                    "s" => s = Some(value),
                    _ => return Err(Error::UnknownSymbol(name.to_string())),
                }
            }
            let k = Alphabet::new(k.ok_or_else(|| Error::Invalid(format!("{name}: missing k")))?)?;
            let s = s.ok_or_else(|| Error::Invalid(format!("{name}: missing s")))?;
            if (k.size() as f64).powi(s as i32 + 1) > DEFAULT_CAP_ELEMENTS as f64 {
                return Err(Error::Resource { what: "odometer pattern group", limit: DEFAULT_CAP_ELEMENTS });
            }
            Ok(odometer_family(k, s))
        }
    }
}

pub const FAMILY_NAMES: [&str; 9] = [
    "odometer:k=2,s=0",
    "odometer:k=2,s=1",
    "odometer:k=2,s=2",
    "odometer:k=3,s=0",
    "odometer:k=3,s=1",
    "gB",
    "gR",
    "trivial3",
    "grigorchuk",
];

/// Word-level generators of a level-`n` quotient together with their
/// section rules, for the exponent arguments.
#[derive(Clone, Debug)]
pub struct WordFamily {
    kind: Kind,
    n: usize,
    names: Vec<String>,
    perms: Vec<Perm>,
    /// sections[g][x] for the generator g, as a word over the generators.
    sections: Vec<Vec<Vec<Letter>>>,
    moduli: Vec<u64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Kind {
    Odometer { k: usize, s: usize },
    Gb,
}

/// Signed letter counts reduced by the family's moduli.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize)]
pub struct ExponentVector {
    pub components: Vec<u64>,
    pub moduli: Vec<u64>,
}

impl ExponentVector {
    pub fn is_zero(&self) -> bool {
        self.components.iter().all(|&c| c == 0)
    }
}

impl fmt::Display for ExponentVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.components.iter().map(u64::to_string).collect();
        write!(f, "({})", parts.join(", "))
    }
}

fn pos(g: usize) -> Letter {
    Letter::pos(g)
}

impl WordFamily {
    /// Generators `t, t_{s+1}, .., t_{n-1}`.
    pub fn odometer(k: Alphabet, s: usize, n: usize) -> Result<WordFamily> {
        if n < s + 1 {
            return Err(Error::Invalid(format!("depth {n} below s + 1 = {}", s + 1)));
        }
        let kk = k.size();
        let mut names = vec!["t".to_string()];
        let mut perms = vec![Perm::cycle(k)];
        let mut sections = vec![(0..kk).map(|x| if x + 1 == kk { vec![pos(0)] } else { vec![] }).collect::<Vec<_>>()];
        for m in s + 1..n {
            names.push(format!("t_{m}"));
            perms.push(Perm::identity(k));
            // t_(s+1) has last section t^(k^s); later ones the previous tower letter
            let last = if m == s + 1 { vec![pos(0); kk.pow(s as u32)] } else { vec![pos(m - s - 1)] };
            sections.push((0..kk).map(|x| if x + 1 == kk { last.clone() } else { vec![] }).collect());
        }
        let mut moduli = vec![(kk as u64).pow(s as u32 + 1)];
        moduli.extend(std::iter::repeat_n(kk as u64, n - s - 1));
        Ok(WordFamily { kind: Kind::Odometer { k: kk, s }, n, names, perms, sections, moduli })
    }

    /// Generators `a, a_1, .., a_{n-1}`.
    pub fn gb(n: usize) -> Result<WordFamily> {
        if n == 0 {
            return Err(Error::Invalid("depth must be at least 1".into()));
        }
        let k = Alphabet::binary();
        let mut names = vec!["a".to_string()];
        let mut perms = vec![Perm::cycle(k)];
        let mut sections = vec![vec![vec![], vec![]]];
        for m in 1..n {
            names.push(format!("a_{m}"));
            perms.push(Perm::identity(k));
            if m == 1 {
                sections.push(vec![vec![pos(0)], vec![pos(0)]]);
            } else {
                sections.push(vec![vec![], vec![pos(m - 1)]]);
            }
        }
        Ok(WordFamily { kind: Kind::Gb, n, names, perms, sections, moduli: vec![2; n] })
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn depth(&self) -> usize {
        self.n
    }

    pub fn alphabet(&self) -> Alphabet {
        self.perms[0].alphabet()
    }

    /// Parses `t*t_2^-1`. Letters refer to generator indices.
    pub fn parse(&self, text: &str) -> Result<Vec<Letter>> {
        let mut out = Vec::new();
        for token in text.split(|c: char| c == '*' || c.is_whitespace()).filter(|t| !t.is_empty()) {
            let (name, exp) = match token.split_once('^') {
                Some((n, e)) => (n, e.parse::<i64>().map_err(|_| Error::UnknownSymbol(token.into()))?),
                None => (token, 1),
            };
            if name == "1" {
                continue;
            }
            let g = self
                .names
                .iter()
                .position(|n| n == name)
                .ok_or_else(|| Error::UnknownSymbol(name.to_string()))?;
            let l = if exp < 0 { Letter::neg(g) } else { Letter::pos(g) };
            out.extend(std::iter::repeat_n(l, exp.unsigned_abs() as usize));
        }
        Ok(out)
    }

    pub fn format(&self, w: &[Letter]) -> String {
        if w.is_empty() {
            return "1".into();
        }
        w.iter()
            .map(|l| {
                let n = &self.names[l.state as usize];
                if l.inverse { format!("{n}^-1") } else { n.clone() }
            })
            .collect::<Vec<_>>()
            .join("*")
    }

    fn check(&self, w: &[Letter]) -> Result<()> {
        match w.iter().find(|l| l.state as usize >= self.names.len()) {
            Some(l) => Err(Error::UnknownSymbol(format!("generator {}", l.state))),
            None => Ok(()),
        }
    }

    fn root_perm(&self, w: &[Letter]) -> Perm {
        let k = self.alphabet();
        w.iter().fold(Perm::identity(k), |acc, l| {
            let p = if l.inverse { self.perms[l.state as usize].inverse() } else { self.perms[l.state as usize].clone() };
            &acc * &p
        })
    }

    /// The word `W_x` for the section of `W` at the letter `x`.
    pub fn decompose_word(&self, w: &[Letter], x: u8) -> Result<Vec<Letter>> {
        self.check(w)?;
        self.alphabet().check_letter(x as usize)?;
        if !self.root_perm(w).is_identity() {
            return Err(Error::NotStabilizing(1));
        }
        let mut parts: Vec<Vec<Letter>> = Vec::with_capacity(w.len());
        let mut cur = x;
        for l in w.iter().rev() {
            let g = l.state as usize;
            if l.inverse {
                // (g^-1)|_x = (g|_{g^-1(x)})^-1
                let y = self.perms[g].inverse().apply(cur);
                parts.push(self.sections[g][y as usize].iter().rev().map(|l| l.inv()).collect());
                cur = y;
            } else {
                parts.push(self.sections[g][cur as usize].clone());
                cur = self.perms[g].apply(cur);
            }
        }
        let mut out: Vec<Letter> = Vec::new();
        for l in parts.into_iter().rev().flatten() {
            if out.last() == Some(&l.inv()) {
                out.pop();
            } else {
                out.push(l);
            }
        }
        Ok(out)
    }

    /// `beta_n(W)`: total exponents of each generator modulo the family's moduli.
    pub fn beta(&self, w: &[Letter]) -> Result<ExponentVector> {
        self.check(w)?;
        let mut counts = vec![0i64; self.names.len()];
        for l in w {
            counts[l.state as usize] += if l.inverse { -1 } else { 1 };
        }
        let components = counts
            .iter()
            .zip(&self.moduli)
            .map(|(&c, &m)| c.rem_euclid(m as i64) as u64)
            .collect();
        Ok(ExponentVector { components, moduli: self.moduli.clone() })
    }

    /// Signed exponent of generator `g` in `w`.
    pub fn exponent(w: &[Letter], g: usize) -> i64 {
        w.iter().filter(|l| l.state as usize == g).map(|l| if l.inverse { -1 } else { 1 }).sum()
    }

    /// The machine realizing the generators, and the element of a word.
    pub fn machine(&self) -> Arc<MachineSpec> {
        match self.kind {
            Kind::Odometer { k, s } => odometer_tower_machine(Alphabet::new(k).unwrap(), s, self.n),
            Kind::Gb => gb_machine(self.n),
        }
    }

    pub fn element(&self, machine: &Arc<MachineSpec>, w: &[Letter]) -> Result<Element> {
        self.check(w)?;
        let word = w
            .iter()
            .map(|l| {
                let state = machine.lookup(&self.names[l.state as usize]).expect("generator state");
                Letter { state: state as u32, inverse: l.inverse }
            })
            .collect();
        Element::from_word(machine, word)
    }

    pub fn generator_elements(&self) -> Vec<Element> {
        let m = self.machine();
        (0..self.names.len()).map(|g| self.element(&m, &[Letter::pos(g)]).unwrap()).collect()
    }
}
