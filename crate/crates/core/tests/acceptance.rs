//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Run with `cargo test --test acceptance`.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use treegrp::automorphism::{conjugate, delta, Element, Letter};
use treegrp::closure::{
    contraction_depth, nucleus, pattern_closure, quotient_generators, quotient_image, verify_closure,
    ClosureOptions,
};
use treegrp::constrained::{truncation_set, viable_patterns};
use treegrp::families::{self, Family, FAMILY_NAMES};
use treegrp::pattern::{all_patterns, is_pattern_group, is_transitive, pattern_at, Pattern, PatternSet};
use treegrp::permgroup::{closure, Budget, LeafPerm, PermGroup, DEFAULT_CAP_ELEMENTS};
use treegrp::tree::{Alphabet, Vertex};

type Outcome = Result<String, String>;
type Criterion = (&'static str, Duration, fn() -> Outcome);

fn ensure(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn err<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

fn fig(label: &str) -> Pattern {
    Pattern::from_d4_label(label).unwrap()
}

fn order_of(p: &Pattern) -> usize {
    let mut x = p.clone();
    let mut n = 1;
    while !x.is_identity() {
        x = x.compose(p).unwrap();
        n += 1;
    }
    n
}

fn size_two_patterns() -> Outcome {
    let k = Alphabet::binary();
    let all = all_patterns(k, 2, 1 << 10).map_err(err)?;
    ensure(all.len() == 8, format!("{} patterns", all.len()))?;
    let group = closure(Pattern::identity(k, 2), &all, &Budget::new(64)).map_err(err)?;
    ensure(group.len() == 8, "pattern group order")?;
    ensure(order_of(&fig("t")) == 4, "order of t")?;
    ensure(order_of(&fig("a")) == 2, "order of a")?;
    let ata = fig("a").compose(&fig("t")).map_err(err)?.compose(&fig("a")).map_err(err)?;
    ensure(ata == fig("t^3"), "a t a = t^3")?;
    Ok("8 patterns, D4 relations hold".into())
}

fn transitive_census() -> Outcome {
    let k = Alphabet::binary();
    let all = all_patterns(k, 2, 1 << 10).map_err(err)?;
    let id = Pattern::identity(k, 2);
    let others: Vec<&Pattern> = all.iter().filter(|p| **p != id).collect();
    let mut found: Vec<PatternSet> = Vec::new();
    for mask in 0u32..(1 << others.len()) {
        let members = std::iter::once(id.clone())
            .chain(others.iter().enumerate().filter(|(i, _)| mask >> i & 1 == 1).map(|(_, p)| (*p).clone()));
        let set = PatternSet::from_patterns(k, 2, members).map_err(err)?;
        if set.len() < 8 && is_pattern_group(&set) && is_transitive(&set) {
            found.push(set);
        }
    }
    let named = |ls: &[&str]| PatternSet::from_patterns(k, 2, ls.iter().map(|l| fig(l))).unwrap();
    let c4 = named(&["1", "t", "t^2", "t^3"]);
    let v4 = named(&["1", "a", "t^2", "at^2"]);
    ensure(found.len() == 2, format!("{} proper transitive subgroups", found.len()))?;
    ensure(found.contains(&c4) && found.contains(&v4), "unexpected subgroups")?;
    ensure(c4.complement(64).map_err(err)? == families::r_patterns(), "complement of C4 is R")?;
    ensure(v4.complement(64).map_err(err)? == families::b_patterns(), "complement of V4 is B")?;
    Ok("exactly {1,t,t^2,t^3} and {1,a,t^2,at^2}".into())
}

fn triviality() -> Outcome {
    let c = families::trivial3();
    ensure(c.allowed().len() == 16, "16 allowed patterns")?;
    let viable = viable_patterns(&c);
    ensure(viable.len() == 1 && viable.iter().all(Pattern::is_identity), "viable set")?;
    for n in 1..=6 {
        let t = truncation_set(&c, n, DEFAULT_CAP_ELEMENTS).map_err(err)?;
        ensure(t.len() == 1 && t.iter().all(Pattern::is_identity), format!("T_{n}"))?;
    }
    Ok("G(F) = 1 through depth 6".into())
}

fn presentation(f: &Family, opts: &ClosureOptions) -> Result<treegrp::closure::BranchPresentation, String> {
    pattern_closure(&f.generators, f.size, opts).map_err(err)
}

fn closure_at_depth() -> Outcome {
    let mut summary = Vec::new();
    for name in ["odometer:k=2,s=0", "odometer:k=2,s=1", "odometer:k=2,s=2", "odometer:k=3,s=0", "odometer:k=3,s=1", "gB", "gR"] {
        let f = families::family(name).map_err(err)?;
        let pres = presentation(&f, &ClosureOptions::default())?;
        let mut sizes = Vec::new();
        for n in 1..=f.depth_cap {
            let rep = verify_closure(&pres, &f.constraints, n, DEFAULT_CAP_ELEMENTS).map_err(err)?;
            ensure(rep.equal, format!("{name} at depth {n}: {rep:?}"))?;
            if name == "gB" || name == "gR" {
                let closed = 1usize << (1usize << (n - 1));
                ensure(rep.truncation_order == closed && rep.image_order == closed, format!("{name} |T_{n}|"))?;
            }
            sizes.push(rep.image_order);
        }
        summary.push(format!("{name} n<={}", f.depth_cap));
    }
    Ok(summary.join("; "))
}

fn leaf_images(elems: &[Element], n: usize) -> Vec<LeafPerm> {
    elems.iter().map(|e| pattern_at(e, &Vertex::root(), n).leaf_permutation()).collect()
}

fn quotient(f: &Family, n: usize) -> Result<PermGroup, String> {
    let pres = presentation(f, &ClosureOptions::default())?;
    PermGroup::from_patterns(f.alphabet(), n, &quotient_generators(&pres, n)).map_err(err)
}

fn odometer_generators() -> Outcome {
    let budget = Budget::default();
    let mut lines = Vec::new();
    for (k, s, depths) in [(2usize, 0usize, 1..=4usize), (2, 1, 2..=5), (3, 1, 2..=3)] {
        let kk = Alphabet::new(k).unwrap();
        let f = families::odometer_family(kk, s);
        for n in depths {
            let g = quotient(&f, n)?;
            let cands = leaf_images(&families::odometer_tower(kk, s, n), n);
            let bounds = g.min_generators_bounds(Some(&cands), &budget).map_err(err)?;
            ensure(bounds == (n - s, n - s), format!("k={k} s={s} n={n}: bounds {bounds:?}"))?;
            let ab = g.abelianization(&budget).map_err(err)?;
            let mut target = vec![(k as u64).pow(s as u32 + 1)];
            target.extend(std::iter::repeat_n(k as u64, n - s - 1));
            ensure(ab.surjects_onto(&target), format!("k={k} s={s} n={n}: abelianization {:?}", ab.elementary_divisors))?;
            if k == 3 {
                let order = g.order(&budget).map_err(err)?;
                ensure(order == 3usize.pow(if n == 2 { 2 } else { 5 }), format!("order {order}"))?;
            }
        }
        lines.push(format!("k={k} s={s}"));
    }
    Ok(format!("d = n - s for {}", lines.join(", ")))
}

fn gb_generators() -> Outcome {
    let budget = Budget::default();
    let f = families::gb();
    for n in 1..=5 {
        let g = quotient(&f, n)?;
        let m = families::gb_machine(n);
        let names: Vec<String> = std::iter::once("a".to_string()).chain((1..n).map(|i| format!("a_{i}"))).collect();
        let cands: Vec<Element> = names.iter().map(|nm| Element::generator(&m, nm).unwrap()).collect();
        let bounds = g.min_generators_bounds(Some(&leaf_images(&cands, n)), &budget).map_err(err)?;
        ensure(bounds == (n, n), format!("n={n}: bounds {bounds:?}"))?;
        let ab = g.abelianization(&budget).map_err(err)?;
        ensure(ab.p_rank(2) >= n, format!("n={n}: 2-rank {}", ab.p_rank(2)))?;
    }
    Ok("d = n for n <= 5".into())
}

fn no_finite_generation() -> Outcome {
    let budget = Budget::default();
    let mut lines = Vec::new();
    for (name, depths) in [("odometer:k=2,s=0", 1..=4usize), ("gB", 1..=5), ("gR", 2..=5)] {
        let f = families::family(name).map_err(err)?;
        let mut lows = Vec::new();
        for n in depths {
            let g = quotient(&f, n)?;
            lows.push(g.min_generators_bounds(None, &budget).map_err(err)?.0);
        }
        ensure(lows.windows(2).all(|w| w[0] < w[1]), format!("{name}: lower bounds {lows:?}"))?;
        lines.push(format!("{name} {lows:?}"));
    }
    Ok(lines.join("; "))
}

fn random_word(rng: &mut ChaCha8Rng, states: &[usize], max_len: usize) -> Vec<Letter> {
    let len = rng.gen_range(0..=max_len);
    (0..len)
        .map(|_| {
            let s = states[rng.gen_range(0..states.len())];
            if rng.gen_bool(0.5) { Letter::neg(s) } else { Letter::pos(s) }
        })
        .collect()
}

fn random_vertex(rng: &mut ChaCha8Rng, k: Alphabet, max_len: usize) -> Vertex {
    let len = rng.gen_range(0..=max_len);
    Vertex::new(k, &(0..len).map(|_| rng.gen_range(0..k.size())).collect::<Vec<_>>()).unwrap()
}

fn test_machines() -> Vec<std::sync::Arc<treegrp::automorphism::MachineSpec>> {
    vec![families::odometer_family(Alphabet::binary(), 2).machine, families::gb_machine(5)]
}

fn delta_conjugation_suite() -> Outcome {
    let cap = 1 << 16;
    let mut rng = ChaCha8Rng::seed_from_u64(0x1e44a);
    let machines = test_machines();
    for i in 0..200 {
        let m = &machines[i % machines.len()];
        let states: Vec<usize> = (1..m.len()).collect();
        let g = Element::from_word(m, random_word(&mut rng, &states, 5)).unwrap();
        let h = Element::from_word(m, random_word(&mut rng, &states, 5)).unwrap();
        let u = random_vertex(&mut rng, m.alphabet(), 4);
        let v = g.inverse().apply(&u).unwrap();
        let lhs = conjugate(&delta(&u, &h), &g);
        let rhs = delta(&v, &conjugate(&h, &g.section(&v)));
        ensure(lhs.equals(&rhs, cap).map_err(err)?, format!("sample {i}: g={g} h={h} u={u}"))?;
    }
    Ok("200 samples".into())
}

fn section_suite() -> Outcome {
    let cap = 1 << 16;
    let mut rng = ChaCha8Rng::seed_from_u64(0x5ec7);
    let machines = test_machines();
    for i in 0..500 {
        let m = &machines[i % machines.len()];
        let states: Vec<usize> = (1..m.len()).collect();
        let f = Element::from_word(m, random_word(&mut rng, &states, 6)).unwrap();
        let g = Element::from_word(m, random_word(&mut rng, &states, 6)).unwrap();
        let u = random_vertex(&mut rng, m.alphabet(), 6);
        let lhs = f.multiply(&g).section(&u);
        let rhs = f.section(&g.apply(&u).unwrap()).multiply(&g.section(&u));
        ensure(lhs.equals(&rhs, cap).map_err(err)?, format!("product sample {i}"))?;
        let gi = g.inverse();
        let inv_rhs = g.section(&gi.apply(&u).unwrap()).inverse();
        ensure(gi.section(&u).equals(&inv_rhs, cap).map_err(err)?, format!("inverse sample {i}"))?;
    }
    Ok("500 samples".into())
}

fn contraction() -> Outcome {
    let cap = treegrp::automorphism::DEFAULT_MAX_STATES;
    let odo = families::odometer_family(Alphabet::binary(), 1);
    let n_odo = nucleus(&odo.generators, 64, 4096, cap).map_err(err)?;
    ensure(n_odo.len() == 3, format!("odometer nucleus has {} elements", n_odo.len()))?;
    let gr = families::grigorchuk();
    let n_gr = nucleus(&gr.generators, 64, 4096, cap).map_err(err)?;
    ensure(n_gr.len() == 5, format!("grigorchuk nucleus has {} elements", n_gr.len()))?;
    for f in [&odo, &gr] {
        let opts = ClosureOptions { contracting: true, ..Default::default() };
        let pres = presentation(f, &opts)?;
        let nuc = pres.nucleus.as_ref().ok_or("no nucleus")?;
        for g in &pres.base {
            let d = contraction_depth(g, nuc, 6, cap).map_err(err)?;
            ensure(d.is_some(), format!("{}: {g} not contracted by depth 6", f.name))?;
        }
    }
    Ok("nucleus sizes 3 and 5; base contracts by depth 6".into())
}

fn dp_vs_bfs() -> Outcome {
    let mut lines = Vec::new();
    for name in FAMILY_NAMES {
        let f = families::family(name).map_err(err)?;
        let pres = presentation(&f, &ClosureOptions::default())?;
        let top = f.depth_cap.min(4);
        for n in 1..=top {
            let dp = truncation_set(&f.constraints, n, DEFAULT_CAP_ELEMENTS).map_err(err)?.len();
            let bfs = quotient_image(&pres, n, &Budget::default()).map_err(err)?.len();
            ensure(dp == bfs, format!("{name} n={n}: DP {dp} vs BFS {bfs}"))?;
        }
        lines.push(format!("{name} n<={top}"));
    }
    Ok(lines.join("; "))
}

/// Independent oracle for the closed form of `|T_n|` of G(R): count portraits
/// of depth n with root-window parity zero everywhere, by brute force.
fn parity_count(n: usize) -> usize {
    // the decorations are bits; a portrait is valid iff for every vertex u of
    // length < n - 1 the three bits at u, u0, u1 sum to zero
    let verts = (1usize << n) - 1;
    let mut count = 0;
    for bits in 0u64..(1u64 << verts) {
        let ok = (0..verts).filter(|&i| 2 * i + 2 < verts).all(|i| {
            let b = |j: usize| (bits >> j) & 1;
            (b(i) + b(2 * i + 1) + b(2 * i + 2)) % 2 == 0
        });
        if ok {
            count += 1;
        }
    }
    count
}

fn closed_form_oracle() -> Result<(), String> {
    let r = families::gr();
    for n in 1..=4 {
        let dp = truncation_set(&r.constraints, n, DEFAULT_CAP_ELEMENTS).map_err(err)?.len();
        ensure(dp == parity_count(n), format!("G(R) n={n}: DP {dp} vs brute force {}", parity_count(n)))?;
    }
    Ok(())
}

fn main() {
    let criteria: Vec<Criterion> = vec![
        ("1 size-2 pattern group", Duration::from_secs(1), size_two_patterns),
        ("2 transitive-subgroup census", Duration::from_secs(1), transitive_census),
        ("3 size-3 triviality", Duration::from_secs(5), triviality),
        ("4 pattern closure at finite depth", Duration::from_secs(120), || {
            closed_form_oracle()?;
            closure_at_depth()
        }),
        ("5 odometer generator counts", Duration::from_secs(120), odometer_generators),
        ("6 G(B) generator counts", Duration::from_secs(120), gb_generators),
        ("7 growing lower bounds", Duration::from_secs(120), no_finite_generation),
        ("8 delta conjugation identity", Duration::from_secs(30), delta_conjugation_suite),
        ("9 section identities", Duration::from_secs(30), section_suite),
        ("10 contraction", Duration::from_secs(30), contraction),
        ("11 DP versus BFS", Duration::from_secs(60), dp_vs_bfs),
    ];
    let mut failed = 0;
    for (name, limit, run) in criteria {
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|p| {
            Err(p.downcast_ref::<String>().cloned().or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string())).unwrap_or_default())
        });
        let elapsed = start.elapsed();
        let outcome = match outcome {
            Ok(msg) if elapsed > limit => Err(format!("{msg}; took {elapsed:.2?}, limit {limit:?}")),
            other => other,
        };
        match outcome {
            Ok(msg) => println!("PASS  criterion {name} ({elapsed:.2?}): {msg}"),
            Err(msg) => {
                failed += 1;
                println!("FAIL  criterion {name} ({elapsed:.2?}): {msg}");
            }
        }
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
    println!("all criteria passed");
}
