//! The pattern-closure construction: from a self-similar generating set `K`
//! and a pattern size `s + 1`, a countable self-similar regular branch group
//! `H` whose closure is `G(F_{s+1}(K))`, together with finite-depth checks
//! of that claim.

use std::collections::HashSet;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::automorphism::{
    delta, section_closure, unify_all, Element, ElementSet, Letter, MachineSpec, DEFAULT_MAX_STATES,
};
use crate::constrained::{truncation_set, ConstraintSystem};
use crate::error::{Error, Result};
use crate::pattern::{essential_patterns, pattern_at, Pattern, PatternSet};
use crate::permgroup::{closure, Budget, LeafPerm, DEFAULT_CAP_ELEMENTS};
use crate::tree::{level, Perm, Vertex};

/// How witnesses of essential patterns are turned into the generating set `S`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WitnessSelection {
    /// Take a witness only for patterns not yet generated by the section
    /// closure of the witnesses taken so far.
    Covering,
    /// Take the first witness of every non-trivial pattern.
    Greedy,
}

#[derive(Clone, Debug)]
pub struct ClosureOptions {
    pub contracting: bool,
    pub witness: WitnessSelection,
    /// Restrict the delta family to vertices `0^j`.
    pub spine: bool,
    pub cap_elements: usize,
    pub max_states: usize,
    pub nucleus_max_iter: usize,
    pub nucleus_cap: usize,
}

impl Default for ClosureOptions {
    fn default() -> ClosureOptions {
        ClosureOptions {
            contracting: false,
            witness: WitnessSelection::Covering,
            spine: false,
            cap_elements: DEFAULT_CAP_ELEMENTS,
            max_states: DEFAULT_MAX_STATES,
            nucleus_max_iter: 64,
            nucleus_cap: 4096,
        }
    }
}

/// `H = <D ∪ S̃>` with `D = { delta(u, h) : h ∈ S', u ∈ X^* }`.
#[derive(Clone, Debug)]
pub struct BranchPresentation {
    /// Level `s` of the stabilizer `H_s` the group branches over.
    pub level: usize,
    /// The witness set `S`.
    pub generators: Vec<Element>,
    /// `S̃`, the section closure of `S`.
    pub base: Vec<Element>,
    /// `S'`, generators of the level-`s` stabilizer of `<S̃>`.
    pub stab_gens: Vec<Element>,
    pub nucleus: Option<Vec<Element>>,
    /// Essential patterns of size `s + 1`.
    pub essential: PatternSet,
    pub spine: bool,
}

impl BranchPresentation {
    pub fn alphabet(&self) -> crate::tree::Alphabet {
        self.essential.alphabet()
    }

    /// Vertices `u` whose deltas can be non-trivial at depth `n`.
    pub fn delta_vertices(&self, n: usize) -> Vec<Vertex> {
        let k = self.alphabet();
        let Some(top) = n.checked_sub(self.level + 1) else {
            return Vec::new();
        };
        (0..=top)
            .flat_map(|j| {
                if self.spine {
                    vec![Vertex::from_raw(vec![0; j])]
                } else {
                    level(k, j)
                }
            })
            .collect()
    }

    /// The elements `delta(u, h)` needed at depth `n`.
    pub fn deltas(&self, n: usize) -> Vec<Element> {
        let mut out = Vec::new();
        for u in self.delta_vertices(n) {
            for h in &self.stab_gens {
                out.push(delta(&u, h));
            }
        }
        out
    }

    pub fn to_json(&self) -> String {
        let all: Vec<Element> = [&self.generators, &self.base, &self.stab_gens]
            .into_iter()
            .flatten()
            .chain(self.nucleus.iter().flatten())
            .cloned()
            .collect();
        let (machine, unified) = match unify_all(&all) {
            Some(u) => u,
            None => (Arc::new(MachineSpec::new(self.alphabet(), Vec::new(), Default::default()).unwrap()), vec![]),
        };
        let mut it = unified.into_iter();
        let mut take = |n: usize| -> Vec<ElementJson> {
            it.by_ref().take(n).map(|e| ElementJson { text: e.to_string(), word: e.word().to_vec() }).collect()
        };
        let generators = take(self.generators.len());
        let base = take(self.base.len());
        let stab_gens = take(self.stab_gens.len());
        let nucleus = self.nucleus.as_ref().map(|n| take(n.len()));
        let j = PresentationJson {
            level: self.level,
            machine: (*machine).clone(),
            generators,
            base,
            stab_gens,
            nucleus,
            essential_count: self.essential.len(),
            spine: self.spine,
        };
        serde_json::to_string_pretty(&j).expect("presentations serialize")
    }

    /// Reads a dump produced by [`BranchPresentation::to_json`]; the
    /// essential patterns are recomputed from the generators.
    pub fn from_json(text: &str) -> Result<BranchPresentation> {
        let j: PresentationJson = serde_json::from_str(text).map_err(|e| Error::Invalid(e.to_string()))?;
        let machine = Arc::new(j.machine);
        let load = |es: Vec<ElementJson>| -> Result<Vec<Element>> {
            es.into_iter().map(|e| Element::from_word(&machine, e.word)).collect()
        };
        let generators = load(j.generators)?;
        let base = load(j.base)?;
        let stab_gens = load(j.stab_gens)?;
        let nucleus = j.nucleus.map(load).transpose()?;
        let seed = if generators.is_empty() { vec![Element::identity(&machine)] } else { generators.clone() };
        let essential = essential_patterns(&seed, j.level + 1, DEFAULT_CAP_ELEMENTS)?.set;
        Ok(BranchPresentation { level: j.level, generators, base, stab_gens, nucleus, essential, spine: j.spine })
    }
}

#[derive(Serialize, Deserialize)]
struct ElementJson {
    text: String,
    word: Vec<Letter>,
}

#[derive(Serialize, Deserialize)]
struct PresentationJson {
    level: usize,
    machine: MachineSpec,
    generators: Vec<ElementJson>,
    base: Vec<ElementJson>,
    stab_gens: Vec<ElementJson>,
    nucleus: Option<Vec<ElementJson>>,
    essential_count: usize,
    #[serde(default)]
    spine: bool,
}

/// Builds the branch presentation of the pattern closure of `<generators>`
/// at pattern size `s_plus_1`.
pub fn pattern_closure(generators: &[Element], s_plus_1: usize, opts: &ClosureOptions) -> Result<BranchPresentation> {
    if s_plus_1 == 0 {
        return Err(Error::InvalidPattern("pattern size must be at least 1".into()));
    }
    let s = s_plus_1 - 1;
    let ess = essential_patterns(generators, s_plus_1, opts.cap_elements)?;
    let mut chosen: Vec<Element> = Vec::new();
    match opts.witness {
        WitnessSelection::Greedy => {
            chosen.extend(ess.witnesses.iter().filter(|(p, _)| !p.is_identity()).map(|(_, w)| w.clone()));
        }
        WitnessSelection::Covering => {
            let mut covered: Option<PatternSet> = None;
            for (p, w) in &ess.witnesses {
                if p.is_identity() || covered.as_ref().is_some_and(|c| c.contains(p)) {
                    continue;
                }
                chosen.push(w.clone());
                covered = Some(essential_patterns(&chosen, s_plus_1, opts.cap_elements)?.set);
            }
        }
    }
    let mut chosen = crate::automorphism::dedupe_by_equality(&chosen, opts.max_states)?;
    let nucleus = if opts.contracting {
        let seed = if chosen.is_empty() { generators.to_vec() } else { chosen.clone() };
        let n = nucleus(&seed, opts.nucleus_max_iter, opts.nucleus_cap, opts.max_states)?;
        chosen.extend(n.iter().cloned());
        chosen = crate::automorphism::dedupe_by_equality(&chosen, opts.max_states)?;
        Some(n)
    } else {
        None
    };
    let base = crate::automorphism::dedupe_by_equality(&section_closure(&chosen, opts.cap_elements)?, opts.max_states)?;
    let stab_gens = stabilizer_generators(&base, s, opts.cap_elements, opts.max_states)?;
    Ok(BranchPresentation {
        level: s,
        generators: chosen,
        base,
        stab_gens,
        nucleus,
        essential: ess.set,
        spine: opts.spine,
    })
}

/// Schreier generators of the level-`s` stabilizer of `<gens>`, deduplicated
/// by equality and without identities.
pub fn stabilizer_generators(gens: &[Element], s: usize, cap: usize, max_states: usize) -> Result<Vec<Element>> {
    let Some((machine, gens)) = unify_all(gens) else {
        return Ok(Vec::new());
    };
    if s == 0 {
        return crate::automorphism::dedupe_by_equality(&gens, max_states);
    }
    let k = machine.alphabet();
    let patterns: Vec<Pattern> = gens.iter().map(|g| pattern_at(g, &Vertex::root(), s)).collect();
    let image = closure(Pattern::identity(k, s), &patterns, &Budget::new(cap))?;
    let reps: Vec<Element> = (0..image.len())
        .map(|i| {
            image.word(i).into_iter().fold(Element::identity(&machine), |acc, j| acc.multiply(&gens[j]))
        })
        .collect();
    let mut out = ElementSet::new(max_states);
    for (i, rep) in reps.iter().enumerate() {
        for (j, g) in gens.iter().enumerate() {
            let target = image.index_of(&image.get(i).compose(&patterns[j])?).expect("image is closed");
            let sg = rep.multiply(g).multiply(&reps[target].inverse()).normalized();
            if sg.is_empty() || sg.is_identity(max_states)? {
                continue;
            }
            debug_assert!(sg.stabilizes_level(s));
            out.insert(sg)?;
        }
    }
    Ok(out.into_elements())
}

/// Size-`n` patterns generating the image of `H` in `Aut(X^[n])`.
pub fn quotient_generators(pres: &BranchPresentation, n: usize) -> Vec<Pattern> {
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    let deltas = pres.deltas(n);
    for g in pres.base.iter().chain(&deltas) {
        let p = pattern_at(g, &Vertex::root(), n);
        if !p.is_identity() && seen.insert(p.clone()) {
            out.push(p);
        }
    }
    out
}

/// The image of `H` at depth `n`, as leaf permutations.
pub fn quotient_image(pres: &BranchPresentation, n: usize, budget: &Budget) -> Result<HashSet<LeafPerm>> {
    let gens: Vec<LeafPerm> = quotient_generators(pres, n).iter().map(Pattern::leaf_permutation).collect();
    let id = LeafPerm::identity(pres.alphabet().level_size(n));
    Ok(closure(id, &gens, budget)?.into_set().into_iter().collect())
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ClosureReport {
    pub depth: usize,
    pub image_order: usize,
    pub truncation_order: usize,
    pub equal: bool,
}

/// Compares the image of `H` at depth `n` with the truncation `T_n` of the
/// constrained group.
pub fn verify_closure(pres: &BranchPresentation, c: &ConstraintSystem, n: usize, cap: usize) -> Result<ClosureReport> {
    let truncations = truncation_set(c, n, cap)?;
    let image = quotient_image(pres, n, &Budget::new(cap))?;
    let equal = image.len() == truncations.len()
        && truncations.iter().all(|p| image.contains(&p.leaf_permutation()));
    Ok(ClosureReport { depth: n, image_order: image.len(), truncation_order: truncations.len(), equal })
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct BranchingReport {
    pub depth: usize,
    pub samples: usize,
    pub failures: usize,
    pub stabilizer_order: usize,
}

/// Samples tuples `(h_0, .., h_{k-1})` of `<S'>`-words and checks that the
/// element with trivial root action and these sections lies in the image of
/// `H_s` at depth `n`.
pub fn verify_branching(pres: &BranchPresentation, n: usize, samples: usize, seed: u64, cap: usize) -> Result<BranchingReport> {
    let k = pres.alphabet();
    let s = pres.level;
    let image = quotient_image(pres, n, &Budget::new(cap))?;
    let stabilizer: HashSet<&LeafPerm> = image
        .iter()
        .filter(|p| {
            let pat = Pattern::from_leaf_permutation(k, n, p).expect("images are prefix-preserving");
            pat.truncate(s.min(n)).is_identity()
        })
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut failures = 0;
    for i in 0..samples {
        let children: Vec<Pattern> = (0..k.size())
            .map(|_| {
                if i == 0 || pres.stab_gens.is_empty() || n == 0 {
                    return Pattern::identity(k, n.saturating_sub(1));
                }
                let len = rng.gen_range(0..=4);
                let mut h: Option<Element> = None;
                for _ in 0..len {
                    let g = &pres.stab_gens[rng.gen_range(0..pres.stab_gens.len())];
                    let g = if rng.gen_bool(0.5) { g.inverse() } else { g.clone() };
                    h = Some(match h {
                        None => g,
                        Some(acc) => acc.multiply(&g),
                    });
                }
                match h {
                    Some(h) => pattern_at(&h, &Vertex::root(), n - 1),
                    None => Pattern::identity(k, n - 1),
                }
            })
            .collect();
        if n == 0 {
            continue;
        }
        let assembled = Pattern::glue(&Perm::identity(k), &children)?;
        if !stabilizer.contains(&assembled.leaf_permutation()) {
            failures += 1;
        }
    }
    Ok(BranchingReport { depth: n, samples, failures, stabilizer_order: stabilizer.len() })
}

/// Elements of `candidates` lying on a cycle of the section graph, together
/// with everything reachable from them, deduplicated by equality. The
/// identity comes first.
fn cycle_part(candidates: &[Element], cap: usize, max_states: usize) -> Result<Vec<Element>> {
    let (machine, _) = unify_all(candidates).expect("non-empty");
    let words = section_closure(candidates, cap).map_err(|_| {
        Error::PossiblyNonContracting(format!("section closure exceeded {cap} elements"))
    })?;
    let mut set = ElementSet::new(max_states);
    set.insert(Element::identity(&machine))?;
    for w in words {
        set.insert(w)?;
    }
    let k = machine.alphabet();
    let n = set.len();
    let mut edges: Vec<Vec<usize>> = Vec::with_capacity(n);
    for i in 0..n {
        let mut out = Vec::new();
        for x in 0..k.size() {
            let sec = set.get(i).section(&Vertex::new(k, &[x])?);
            let j = set.find(&sec)?.expect("section closure is closed under sections");
            out.push(j);
        }
        edges.push(out);
    }
    let reach = |from: usize| -> Vec<bool> {
        let mut seen = vec![false; n];
        let mut stack: Vec<usize> = edges[from].clone();
        while let Some(v) = stack.pop() {
            if !seen[v] {
                seen[v] = true;
                stack.extend(&edges[v]);
            }
        }
        seen
    };
    let mut keep = vec![false; n];
    keep[0] = true;
    for i in 0..n {
        let r = reach(i);
        if r[i] {
            keep[i] = true;
            for (j, &b) in r.iter().enumerate() {
                keep[j] |= b;
            }
        }
    }
    Ok((0..n).filter(|&i| keep[i]).map(|i| set.get(i).clone()).collect())
}

/// The nucleus of the group generated by `gens`: the smallest section-closed
/// set containing all sufficiently deep sections of every element.
pub fn nucleus(gens: &[Element], max_iter: usize, cap: usize, max_states: usize) -> Result<Vec<Element>> {
    if gens.is_empty() {
        return Err(Error::Invalid("nucleus needs at least one generator".into()));
    }
    let mut start: Vec<Element> = gens.to_vec();
    start.extend(gens.iter().map(Element::inverse));
    let mut current = cycle_part(&start, cap, max_states)?;
    for _ in 0..max_iter {
        let mut cands = current.clone();
        for f in &current {
            for g in &current {
                cands.push(f.multiply(g).normalized());
            }
        }
        let next = cycle_part(&cands, cap, max_states)?;
        if next.len() == current.len() {
            let mut index = ElementSet::new(max_states);
            for e in &current {
                index.insert(e.clone())?;
            }
            let mut same = true;
            for e in &next {
                if index.find(e)?.is_none() {
                    same = false;
                    break;
                }
            }
            if same {
                return Ok(current);
            }
        }
        if next.len() > cap {
            return Err(Error::PossiblyNonContracting(format!("more than {cap} candidates")));
        }
        current = next;
    }
    Err(Error::PossiblyNonContracting(format!("no fixed point after {max_iter} iterations")))
}

/// Smallest level `m <= max_depth` at which every section of `g` lies in the
/// nucleus.
pub fn contraction_depth(g: &Element, nucleus: &[Element], max_depth: usize, max_states: usize) -> Result<Option<usize>> {
    let mut index = ElementSet::new(max_states);
    for e in nucleus {
        index.insert(e.clone())?;
    }
    for m in 0..=max_depth {
        let mut inside = true;
        for sec in g.sections_at_level(m) {
            if index.find(&sec)?.is_none() {
                inside = false;
                break;
            }
        }
        if inside {
            return Ok(Some(m));
        }
    }
    Ok(None)
}
