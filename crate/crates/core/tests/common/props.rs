//! Seeded property checks. Each returns the first counterexample as an error.

use grigorchuk_cw::constraints::{act, pack, un_generators, OrbitTable};
use grigorchuk_cw::equations::{
    evaluate, normal_form, r_n, x_vars, Equation, Letter, NormalKind, Var,
};
use grigorchuk_cw::quotients::{k1, k2, k3, triple, BranchStructure, QuotientStructure};
use grigorchuk_cw::tree::{
    contraction_check, decompose, default_s, generator_perms, is_trivial, p_map, perm_at_level, suc_closure,
    words_equal, DEFAULT_CLOSURE_CAP,
};
use grigorchuk_cw::words::{
    minimal_polynomial_at_eta, verify_weight_identities, weighted_length, EtaNumber, Gen, GenWord,
};
use rand::rngs::StdRng;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};

pub type Check = fn(&mut StdRng) -> Result<(), String>;

pub const SEED: u64 = 0x5eed_2024;

pub fn rng() -> StdRng {
    StdRng::seed_from_u64(SEED)
}

pub fn all() -> Vec<(&'static str, Check)> {
    vec![
        ("word reduction oracle", word_reduction_oracle as Check),
        ("word algebra", word_algebra),
        ("triviality oracle", triviality_oracle),
        ("wreath homomorphism", wreath_homomorphism),
        ("normal form round trip", normal_form_round_trip),
        ("genus invariance", genus_invariance),
        ("eta identities", eta_identities),
        ("contraction", contraction),
        ("closure bound", closure_bound),
        ("derived states", derived_states),
        ("K inactivity", k_inactivity),
        ("omega on triples", omega_on_triples),
        ("pbar lift independence", pbar_lift_independence),
        ("generators fix R_n", generators_fix_r_n),
        ("orbit table soundness", orbit_table_soundness),
        ("orbit counts without swaps", orbit_counts_without_swaps),
    ]
}

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn raw_action(raw: &[Gen], m: u32) -> Vec<u32> {
    let gp = generator_perms(m);
    (0..1u32 << m).map(|v| raw.iter().fold(v, |x, g| gp[g.index()][x as usize])).collect()
}

fn random_word(rng: &mut StdRng, max_len: usize) -> GenWord {
    let len = rng.gen_range(0..=max_len);
    GenWord::reduce(GenWord::random_raw(rng, len))
}

fn relator(rng: &mut StdRng) -> GenWord {
    let r = ["adadadad", "acacacacacacacac", "abababababababababababababababab"];
    r.choose(rng).unwrap().parse().unwrap()
}

pub fn word_reduction_oracle(rng: &mut StdRng) -> Result<(), String> {
    for _ in 0..10_000 {
        let len = rng.gen_range(0..=64);
        let raw = GenWord::random_raw(rng, len);
        let w = GenWord::reduce(raw.clone());
        ensure(w.is_canonical(), || format!("{w} not canonical"))?;
        for m in 1..=8 {
            let p = perm_at_level(&w, m).map_err(|e| e.to_string())?;
            ensure(p == raw_action(&raw, m), || format!("{w} differs from its raw sequence at level {m}"))?;
        }
    }
    Ok(())
}

pub fn word_algebra(rng: &mut StdRng) -> Result<(), String> {
    for _ in 0..10_000 {
        let (lu, lv) = (rng.gen_range(0..=100), rng.gen_range(0..=100));
        let u = GenWord::random_raw(rng, lu);
        let v = GenWord::random_raw(rng, lv);
        let (ru, rv) = (GenWord::reduce(u.clone()), GenWord::reduce(v.clone()));
        ensure(GenWord::reduce(ru.letters().to_vec()) == ru, || format!("reduce not idempotent on {ru}"))?;
        let uv = GenWord::reduce(u.iter().chain(v.iter()).copied());
        ensure(uv == ru.multiply(&rv), || format!("reduce(uv) != reduce(u)reduce(v) for {ru}, {rv}"))?;
        ensure(ru.invert().invert() == ru, || format!("double inverse of {ru}"))?;
        ensure(ru.multiply(&ru.invert()).is_empty(), || format!("{ru} times its inverse"))?;
    }
    Ok(())
}

pub fn triviality_oracle(rng: &mut StdRng) -> Result<(), String> {
    for i in 0..10_000 {
        let w = if i % 2 == 0 {
            random_word(rng, 64)
        } else {
            let x = random_word(rng, 12);
            let y = random_word(rng, 12);
            relator(rng).conjugate(&x).multiply(&y).multiply(&y.invert())
        };
        let oracle = (1..=8).all(|m| perm_at_level(&w, m).map(|p| p.iter().enumerate().all(|(v, &x)| v as u32 == x)).unwrap_or(false));
        ensure(is_trivial(&w) == oracle, || format!("triviality of {w}"))?;
    }
    Ok(())
}

pub fn wreath_homomorphism(rng: &mut StdRng) -> Result<(), String> {
    for _ in 0..10_000 {
        let u = random_word(rng, 40);
        let v = random_word(rng, 40);
        let (du, dv, duv) = (decompose(&u), decompose(&v), decompose(&u.multiply(&v)));
        ensure(duv.active == (du.active ^ dv.active), || format!("activity of {u}·{v}"))?;
        for i in 0..2 {
            let expected = du.state(i).multiply(dv.state(i ^ du.active as usize));
            ensure(words_equal(duv.state(i), &expected), || format!("state {i} of {u}·{v}"))?;
        }
    }
    Ok(())
}

fn random_quadratic(rng: &mut StdRng) -> Equation<GenWord> {
    let nv = rng.gen_range(1..=8u32);
    let mut letters = Vec::new();
    for name in 1..=nv {
        let v = Var::x(name);
        if rng.gen_bool(0.5) {
            letters.push(Letter::Var(v, false));
            letters.push(Letter::Var(v, true));
        } else {
            letters.push(Letter::Var(v, rng.gen_bool(0.5)));
            letters.push(Letter::Var(v, rng.gen_bool(0.5)));
        }
    }
    for _ in 0..rng.gen_range(0..=4) {
        let len = rng.gen_range(1..=10);
        letters.push(Letter::Const(GenWord::random(rng, len)));
    }
    letters.shuffle(rng);
    Equation::from_letters(letters)
}

fn eval_tau(qs: &QuotientStructure, e: &Equation<GenWord>, assign: &dyn Fn(Var) -> usize) -> usize {
    evaluate(e, qs, assign, |c| qs.tau(c))
}

fn check_round_trip(qs: &QuotientStructure, e: &Equation<GenWord>, rng: &mut StdRng) -> Result<(), String> {
    let r = normal_form(e).map_err(|err| format!("{e}: {err}"))?;
    ensure(r.subst.forward.apply(e) == r.word, || format!("forward image of {e}"))?;
    ensure(r.subst.inverse.apply(&r.word) == *e, || format!("inverse image of {e}"))?;
    ensure(r.subst.is_consistent_on(&e.variables()), || format!("inverse substitution of {e}"))?;
    let expect_kind = if e.is_oriented() { NormalKind::Oriented } else { NormalKind::Unoriented };
    ensure(r.kind == expect_kind, || format!("orientation of {e}"))?;
    let vars: Vec<Var> = e.variables().into_iter().chain(r.word.variables()).collect();
    for _ in 0..4 {
        let vals: Vec<(Var, usize)> = vars.iter().map(|&v| (v, rng.gen_range(0..qs.order()))).collect();
        let s = |v: Var| vals.iter().find(|p| p.0 == v).map(|p| p.1).unwrap_or(0);
        let forward = |v: Var| eval_tau(qs, &r.subst.forward.image(v), &s);
        let inverse = |v: Var| eval_tau(qs, &r.subst.inverse.image(v), &s);
        ensure(eval_tau(qs, &r.word, &s) == eval_tau(qs, e, &forward), || {
            format!("evaluation through forward map of {e}")
        })?;
        ensure(eval_tau(qs, e, &s) == eval_tau(qs, &r.word, &inverse), || {
            format!("evaluation through inverse map of {e}")
        })?;
    }
    Ok(())
}

pub fn normal_form_round_trip(rng: &mut StdRng) -> Result<(), String> {
    let qs = QuotientStructure::get();
    let mut unoriented = 0;
    for _ in 0..1_000 {
        let e = random_quadratic(rng);
        if !e.is_oriented() {
            unoriented += 1;
        }
        check_round_trip(qs, &e, rng)?;
    }
    ensure(unoriented > 100, || format!("only {unoriented} unoriented samples"))
}

pub fn genus_invariance(rng: &mut StdRng) -> Result<(), String> {
    for n in 2..=4usize {
        let gens = un_generators(n, true);
        let g = Equation::constant(GenWord::random(rng, 7));
        let start = r_n::<GenWord>(&x_vars(2 * n)).mul(&g);
        let mut e = start.clone();
        for _ in 0..50 {
            let u = gens.choose(rng).unwrap().tracked();
            e = u.forward.apply(&e);
        }
        let r = normal_form(&e).map_err(|err| err.to_string())?;
        ensure(r.kind == NormalKind::Oriented && r.genus == n, || format!("{e} has genus {}", r.genus))?;
    }
    Ok(())
}

pub fn eta_identities(rng: &mut StdRng) -> Result<(), String> {
    ensure(minimal_polynomial_at_eta().is_zero(), || "eta is not a root".into())?;
    ensure(verify_weight_identities(), || "weight identities".into())?;
    ensure((EtaNumber::eta().to_f64() - 0.8105).abs() < 1e-3, || "real embedding of eta".into())?;
    for _ in 0..1_000 {
        let w = random_word(rng, 60);
        let l = weighted_length(&w);
        let zero = EtaNumber::zero();
        ensure(l >= zero && (l == zero) == w.is_empty(), || format!("weighted length of {w}"))?;
    }
    Ok(())
}

pub fn contraction(rng: &mut StdRng) -> Result<(), String> {
    let s = default_s();
    for _ in 0..1_000 {
        let g = random_word(rng, 200);
        for x in &s {
            ensure(contraction_check(&g, x), || format!("contraction fails for {g} and {x}"))?;
        }
    }
    Ok(())
}

pub fn closure_bound(rng: &mut StdRng) -> Result<(), String> {
    let s = default_s();
    let bound = EtaNumber::from_ints(50, 0, 0);
    for _ in 0..20 {
        let len = rng.gen_range(1..=14);
        let g = GenWord::random(rng, len);
        let members = suc_closure(&g, &s, DEFAULT_CLOSURE_CAP).map_err(|e| format!("{g}: {e}"))?;
        for h in &members {
            ensure(weighted_length(h) <= bound, || format!("{h} in the closure of {g} exceeds the bound"))?;
        }
    }
    Ok(())
}

pub fn derived_states(rng: &mut StdRng) -> Result<(), String> {
    let qs = QuotientStructure::get();
    let id = GenWord::identity();
    for _ in 0..1_000 {
        let g = GenWord::commutator(&random_word(rng, 30), &random_word(rng, 30));
        ensure(qs.derived.contains(qs.tau(&p_map(&g, &id))), || format!("states of {g}"))?;
    }
    Ok(())
}

fn random_k_word(rng: &mut StdRng) -> GenWord {
    let ks = [k1(), k2(), k3()];
    let mut w = GenWord::identity();
    for _ in 0..rng.gen_range(1..=4) {
        let x = random_word(rng, 10);
        let k = ks.choose(rng).unwrap();
        let k = if rng.gen_bool(0.5) { k.invert() } else { k.clone() };
        w = w.multiply(&k.conjugate(&x));
    }
    w
}

pub fn k_inactivity(rng: &mut StdRng) -> Result<(), String> {
    let qs = QuotientStructure::get();
    for k in [k1(), k2(), k3()] {
        ensure(!k.activity(), || format!("{k} is active"))?;
    }
    for _ in 0..1_000 {
        let k = random_k_word(rng);
        ensure(!k.activity() && qs.k.contains(qs.tau(&k)), || format!("{k} is not in K"))?;
    }
    Ok(())
}

pub fn omega_on_triples(rng: &mut StdRng) -> Result<(), String> {
    let qs = QuotientStructure::get();
    let b = BranchStructure::get();
    for _ in 0..1_000 {
        let g = random_word(rng, 60);
        ensure(b.omega(triple(qs, &g)) == Some(qs.pi(&g)), || format!("omega on the triple of {g}"))?;
    }
    Ok(())
}

pub fn pbar_lift_independence(rng: &mut StdRng) -> Result<(), String> {
    let qs = QuotientStructure::get();
    let s = default_s();
    for _ in 0..1_000 {
        let g = GenWord::commutator(&random_word(rng, 20), &random_word(rng, 20));
        let kp = GenWord::commutator(&random_k_word(rng), &random_k_word(rng));
        ensure(qs.tau(&kp) == 0, || format!("{kp} is not in K′"))?;
        let q = qs.tau(&g);
        let lifted = g.multiply(&kp);
        for h in &s {
            let direct = qs.rho_prime[qs.tau(&p_map(&lifted, h))];
            let stored = qs.pbar(q, h).map_err(|e| e.to_string())?;
            ensure(direct == stored, || format!("pbar depends on the lift {lifted} at {h}"))?;
        }
    }
    Ok(())
}

pub fn generators_fix_r_n(_: &mut StdRng) -> Result<(), String> {
    for n in 1..=4 {
        let vars = x_vars(2 * n);
        let r = r_n::<GenWord>(&vars);
        for g in un_generators(n, true) {
            let t = g.tracked();
            ensure(t.forward.apply(&r) == r && t.inverse.apply(&r) == r, || format!("{} moves R_{n}", g.name()))?;
            ensure(t.is_consistent_on(&vars), || format!("{} has a wrong inverse", g.name()))?;
        }
    }
    Ok(())
}

pub fn orbit_table_soundness(rng: &mut StdRng) -> Result<(), String> {
    let q = &QuotientStructure::get().q;
    for n in [2usize, 3] {
        let table = OrbitTable::get(n).map_err(|e| e.to_string())?;
        let subs: Vec<_> = table.gens.iter().map(|g| g.tracked().forward).collect();
        for _ in 0..100_000 {
            let t: Vec<u8> = (0..2 * n).map(|_| rng.gen_range(0..16)).collect();
            let phi = subs.choose(rng).unwrap();
            let moved = act(q, &t, phi);
            ensure(table.ids[pack(&t) as usize] == table.ids[pack(&moved) as usize], || {
                format!("orbit id changes on {t:?}")
            })?;
        }
    }
    Ok(())
}

pub fn orbit_counts_without_swaps(_: &mut StdRng) -> Result<(), String> {
    let q = &QuotientStructure::get().q;
    for (n, expected) in [(2usize, 86usize), (3, 90)] {
        let with = OrbitTable::get(n).map_err(|e| e.to_string())?.orbit_count();
        let without = OrbitTable::compute(n, false, q).orbit_count();
        ensure(with == expected && without == expected, || format!("rank {n}: {with} with swaps, {without} without"))?;
    }
    Ok(())
}
