//! Word-level exponent arguments checked against the tree action.

use proptest::prelude::*;

use treegrp::automorphism::Letter;
use treegrp::families::WordFamily;
use treegrp::pattern::{pattern_at, Pattern};
use treegrp::permgroup::{closure, Budget};
use treegrp::tree::{Alphabet, Vertex};

const CAP: usize = 1 << 16;

fn word_from(raw: &[(usize, bool)], gens: usize) -> Vec<Letter> {
    raw.iter()
        .map(|&(g, inv)| if inv { Letter::neg(g % gens) } else { Letter::pos(g % gens) })
        .collect()
}

/// Appends powers of the rooted generator (index 0) until `w` fixes level 1.
fn stabilize(f: &WordFamily, mut w: Vec<Letter>) -> Vec<Letter> {
    let m = f.machine();
    for _ in 0..f.alphabet().size() {
        if f.element(&m, &w).unwrap().root_perm().is_identity() {
            return w;
        }
        w.push(Letter::pos(0));
    }
    panic!("rooted generator does not act as a full cycle");
}

fn sum_over_letters(f: &WordFamily, w: &[Letter], g: usize) -> i64 {
    f.alphabet().letters().map(|x| WordFamily::exponent(&f.decompose_word(w, x).unwrap(), g)).sum()
}

fn families() -> Vec<WordFamily> {
    vec![
        WordFamily::odometer(Alphabet::binary(), 0, 4).unwrap(),
        WordFamily::odometer(Alphabet::binary(), 1, 5).unwrap(),
        WordFamily::odometer(Alphabet::new(3).unwrap(), 1, 3).unwrap(),
        WordFamily::gb(5).unwrap(),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(96))]

    #[test]
    fn decomposition_represents_sections(
        which in 0usize..4,
        raw in prop::collection::vec((0usize..8, any::<bool>()), 0..10),
    ) {
        let f = &families()[which];
        let w = stabilize(f, word_from(&raw, f.names().len()));
        let m = f.machine();
        let g = f.element(&m, &w).unwrap();
        for x in f.alphabet().letters() {
            let wx = f.element(&m, &f.decompose_word(&w, x).unwrap()).unwrap();
            prop_assert!(wx.equals(&g.section(&Vertex::root().child(x)), CAP).unwrap());
        }
    }

    #[test]
    fn odometer_exponent_recursion(
        which in 0usize..3,
        raw in prop::collection::vec((0usize..8, any::<bool>()), 0..12),
    ) {
        let f = &families()[which];
        let (k, s) = match which {
            0 => (2i64, 0u32),
            1 => (2, 1),
            _ => (3, 1),
        };
        let w = stabilize(f, word_from(&raw, f.names().len()));
        let tower = f.names().len();
        let next = if tower > 1 { WordFamily::exponent(&w, 1) } else { 0 };
        prop_assert_eq!(sum_over_letters(f, &w, 0), WordFamily::exponent(&w, 0) + k.pow(s) * next);
        for g in 1..tower.saturating_sub(1) {
            prop_assert_eq!(sum_over_letters(f, &w, g), WordFamily::exponent(&w, g + 1));
        }
    }

    #[test]
    fn gb_exponent_recursion(raw in prop::collection::vec((0usize..8, any::<bool>()), 0..12)) {
        let f = WordFamily::gb(5).unwrap();
        let w = stabilize(&f, word_from(&raw, 5));
        let w0 = f.decompose_word(&w, 0).unwrap();
        let w1 = f.decompose_word(&w, 1).unwrap();
        prop_assert_eq!(WordFamily::exponent(&w0, 0), WordFamily::exponent(&w, 1));
        for g in 1..4 {
            prop_assert_eq!(
                WordFamily::exponent(&w0, g) + WordFamily::exponent(&w1, g),
                WordFamily::exponent(&w, g + 1)
            );
        }
    }
}

/// Relators `w_i g w_j^-1` from collisions in the BFS of the level-`n`
/// quotient all have zero exponent vector.
fn relators_have_zero_beta(f: &WordFamily) {
    let n = f.depth();
    let k = f.alphabet();
    let gens: Vec<Pattern> = f
        .generator_elements()
        .iter()
        .map(|e| pattern_at(e, &Vertex::root(), n))
        .collect();
    let group = closure(Pattern::identity(k, n), &gens, &Budget::new(1 << 21)).unwrap();
    let m = f.machine();
    let to_word = |idx: &[usize]| idx.iter().map(|&g| Letter::pos(g)).collect::<Vec<_>>();
    let mut checked = 0;
    for i in 0..group.len() {
        for (j, g) in gens.iter().enumerate() {
            let target = group.index_of(&group.get(i).compose(g).unwrap()).unwrap();
            let mut w = to_word(&group.word(i));
            w.push(Letter::pos(j));
            w.extend(to_word(&group.word(target)).iter().rev().map(|l| l.inv()));
            let relator = f.element(&m, &w).unwrap();
            assert!(pattern_at(&relator, &Vertex::root(), n).is_identity(), "not a relator: {}", f.format(&w));
            assert!(f.beta(&w).unwrap().is_zero(), "beta of {} is nonzero", f.format(&w));
            checked += 1;
        }
    }
    assert_eq!(checked, group.len() * gens.len());
}

#[test]
fn beta_vanishes_on_odometer_relators() {
    for (k, s, top) in [(2usize, 0usize, 4usize), (2, 1, 5), (3, 1, 3)] {
        for n in s + 1..=top {
            relators_have_zero_beta(&WordFamily::odometer(Alphabet::new(k).unwrap(), s, n).unwrap());
        }
    }
}

#[test]
fn beta_vanishes_on_gb_relators() {
    for n in 1..=4 {
        relators_have_zero_beta(&WordFamily::gb(n).unwrap());
    }
}

#[test]
fn beta_detects_non_relators() {
    let f = WordFamily::odometer(Alphabet::binary(), 1, 3).unwrap();
    assert!(!f.beta(&f.parse("t").unwrap()).unwrap().is_zero());
    assert!(!f.beta(&f.parse("t_2").unwrap()).unwrap().is_zero());
    assert!(f.beta(&f.parse("t^4").unwrap()).unwrap().is_zero());
}

#[test]
fn odometer_has_infinite_order() {
    let f = WordFamily::odometer(Alphabet::binary(), 0, 1).unwrap();
    let t = f.generator_elements().remove(0);
    for e in 1..=64 {
        assert!(!pattern_at(&t.pow(e), &Vertex::root(), 7).is_identity(), "t^{e} trivial at depth 7");
    }
}
