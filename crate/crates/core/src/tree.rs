//! Wreath recursion on the binary tree.
//!
//! Conventions: the group acts on the right, `v^(gh) = (v^g)^h`, so the
//! states multiply as `(g·h)@i = g@i · h@(i^act(g))`. Children are indexed
//! 0 and 1 internally; `g@1`/`g@2` in the usual notation are `state(0)`/`state(1)`.

use std::collections::{HashMap, HashSet, VecDeque};
use std::sync::{OnceLock, RwLock};

use rand::Rng;
use thiserror::Error;

use crate::words::{weighted_length, EtaNumber, Gen, GenWord, Weighting};

/// Largest level accepted by [`perm_at_level`] unless a caller raises it.
pub const DEFAULT_LEVEL_CAP: u32 = 12;

#[derive(Clone, Debug, Error, PartialEq, Eq)]
pub enum TreeError {
    #[error("level {level} exceeds the cap {cap}")]
    LevelCap { level: u32, cap: u32 },
    #[error("closure exceeded {0} elements")]
    ClosureCap(usize),
}

/// Image of a word under the wreath recursion.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct WreathDec {
    pub first: GenWord,
    pub second: GenWord,
    pub active: bool,
}

impl WreathDec {
    pub fn state(&self, i: usize) -> &GenWord {
        if i == 0 {
            &self.first
        } else {
            &self.second
        }
    }
}

fn generator_states(g: Gen) -> [&'static [Gen]; 2] {
    match g {
        Gen::A => [&[], &[]],
        Gen::B => [&[Gen::A], &[Gen::C]],
        Gen::C => [&[Gen::A], &[Gen::D]],
        Gen::D => [&[], &[Gen::B]],
    }
}

pub fn decompose(g: &GenWord) -> WreathDec {
    let mut states: [Vec<Gen>; 2] = [Vec::new(), Vec::new()];
    let mut active = false;
    for &x in g.letters() {
        let xs = generator_states(x);
        for (i, st) in states.iter_mut().enumerate() {
            st.extend_from_slice(xs[i ^ active as usize]);
        }
        if x == Gen::A {
            active = !active;
        }
    }
    let [s0, s1] = states;
    WreathDec { first: GenWord::reduce(s0), second: GenWord::reduce(s1), active }
}

/// Permutation of the `2^m` vertices of level `m`; vertex bits are read with
/// the first-level letter most significant. `p[v] = v^g`.
pub fn perm_at_level(g: &GenWord, m: u32) -> Result<Vec<u32>, TreeError> {
    perm_at_level_capped(g, m, DEFAULT_LEVEL_CAP)
}

pub fn perm_at_level_capped(g: &GenWord, m: u32, cap: u32) -> Result<Vec<u32>, TreeError> {
    if m > cap {
        return Err(TreeError::LevelCap { level: m, cap });
    }
    let gens = generator_perms(m);
    let mut p: Vec<u32> = (0..1u32 << m).collect();
    for &x in g.letters() {
        let gp = &gens[x.index()];
        for v in p.iter_mut() {
            *v = gp[*v as usize];
        }
    }
    Ok(p)
}

/// Permutations of the four generators on level `m` (cached up to level 24).
pub fn generator_perms(m: u32) -> &'static [Vec<u32>; 4] {
    static CACHE: OnceLock<RwLock<HashMap<u32, &'static [Vec<u32>; 4]>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| RwLock::new(HashMap::new()));
    if let Some(p) = cache.read().unwrap().get(&m) {
        return p;
    }
    let built: [Vec<u32>; 4] = [0, 1, 2, 3].map(|i| build_gen_perm(Gen::from_index(i), m));
    let leaked: &'static [Vec<u32>; 4] = Box::leak(Box::new(built));
    cache.write().unwrap().entry(m).or_insert(leaked)
}

fn build_gen_perm(g: Gen, m: u32) -> Vec<u32> {
    let n = 1usize << m;
    (0..n as u32).map(|v| gen_image(Some(g), v, m)).collect()
}

fn gen_image(g: Option<Gen>, v: u32, m: u32) -> u32 {
    let Some(g) = g else { return v };
    if m == 0 {
        return v;
    }
    let top = v >> (m - 1);
    let rest = v & ((1 << (m - 1)) - 1);
    let new_top = if g == Gen::A { top ^ 1 } else { top };
    let state = generator_states(g)[top as usize].first().copied();
    (new_top << (m - 1)) | gen_image(state, rest, m - 1)
}

fn trivial_memo() -> &'static RwLock<HashMap<GenWord, bool>> {
    static MEMO: OnceLock<RwLock<HashMap<GenWord, bool>>> = OnceLock::new();
    MEMO.get_or_init(|| RwLock::new(HashMap::new()))
}

const MEMO_LIMIT: usize = 1 << 20;

/// Word problem: `g` is trivial iff it is inactive and both states are trivial.
/// Inactive canonical words of length `n >= 2` have states of length at most
/// `(n + 1) / 2`, so the recursion terminates.
pub fn is_trivial(g: &GenWord) -> bool {
    match g.len() {
        0 => return true,
        1 => return false,
        _ => {}
    }
    if g.activity() {
        return false;
    }
    if let Some(&r) = trivial_memo().read().unwrap().get(g) {
        return r;
    }
    let dec = decompose(g);
    debug_assert!(dec.first.len() < g.len() && dec.second.len() < g.len());
    let r = is_trivial(&dec.first) && is_trivial(&dec.second);
    let mut memo = trivial_memo().write().unwrap();
    if memo.len() >= MEMO_LIMIT {
        memo.clear();
    }
    memo.insert(g.clone(), r);
    r
}

pub fn words_equal(u: &GenWord, v: &GenWord) -> bool {
    is_trivial(&u.multiply(&v.invert()))
}

/// `p_x(g) = (g@2)^x · g@1`.
pub fn p_map(g: &GenWord, x: &GenWord) -> GenWord {
    let dec = decompose(g);
    dec.second.conjugate(x).multiply(&dec.first)
}

/// The set `{ε, a, b, c, d, ab, ad, ba}`.
pub fn default_s() -> Vec<GenWord> {
    ["", "a", "b", "c", "d", "ab", "ad", "ba"].iter().map(|s| s.parse().unwrap()).collect()
}

pub const DEFAULT_CLOSURE_CAP: usize = 1_000_000;

/// Least set containing `g` and closed under `h -> p_x(h)` for `x` in `s`.
/// Returned sorted in shortlex order.
pub fn suc_closure(g: &GenWord, s: &[GenWord], cap: usize) -> Result<Vec<GenWord>, TreeError> {
    let mut seen: HashSet<GenWord> = HashSet::new();
    let mut queue = VecDeque::new();
    seen.insert(g.clone());
    queue.push_back(g.clone());
    while let Some(h) = queue.pop_front() {
        let dec = decompose(&h);
        for x in s {
            let next = dec.second.conjugate(x).multiply(&dec.first);
            if seen.insert(next.clone()) {
                if seen.len() > cap {
                    return Err(TreeError::ClosureCap(cap));
                }
                queue.push_back(next);
            }
        }
    }
    let mut out: Vec<GenWord> = seen.into_iter().collect();
    out.sort();
    Ok(out)
}

/// `∂(p_x(g)) <= η(∂(g) + ω(a)) + 2` in exact arithmetic.
pub fn contraction_check(g: &GenWord, x: &GenWord) -> bool {
    let w = Weighting::standard();
    let lhs = weighted_length(&p_map(g, x));
    let rhs = EtaNumber::eta() * (w.length(g) + w.weight(Gen::A)) + EtaNumber::from_ints(2, 0, 0);
    lhs <= rhs
}

/// An automorphism of the binary tree truncated at `depth`, stored as its
/// action on the `2^depth` leaves.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct FiniteAut {
    depth: u32,
    perm: Vec<u32>,
}

impl FiniteAut {
    pub fn identity(depth: u32) -> Self {
        FiniteAut { depth, perm: (0..1u32 << depth).collect() }
    }

    pub fn depth(&self) -> u32 {
        self.depth
    }

    pub fn from_word(g: &GenWord, depth: u32) -> Result<Self, TreeError> {
        Ok(FiniteAut { depth, perm: perm_at_level_capped(g, depth, 24)? })
    }

    /// Uniformly random element: independent random activity at every vertex.
    pub fn random<R: Rng + ?Sized>(rng: &mut R, depth: u32) -> Self {
        if depth == 0 {
            return Self::identity(0);
        }
        let s0 = Self::random(rng, depth - 1);
        let s1 = Self::random(rng, depth - 1);
        Self::from_states(&s0, &s1, rng.gen_bool(0.5))
    }

    /// `self` followed by `other`.
    pub fn mul(&self, other: &FiniteAut) -> FiniteAut {
        assert_eq!(self.depth, other.depth);
        FiniteAut { depth: self.depth, perm: self.perm.iter().map(|&v| other.perm[v as usize]).collect() }
    }

    pub fn inverse(&self) -> FiniteAut {
        let mut inv = vec![0u32; self.perm.len()];
        for (v, &w) in self.perm.iter().enumerate() {
            inv[w as usize] = v as u32;
        }
        FiniteAut { depth: self.depth, perm: inv }
    }

    pub fn commutator(&self, other: &FiniteAut) -> FiniteAut {
        self.inverse().mul(&other.inverse()).mul(self).mul(other)
    }

    pub fn activity(&self) -> bool {
        self.depth > 0 && (self.perm[0] >> (self.depth - 1)) & 1 == 1
    }

    pub fn state(&self, i: usize) -> FiniteAut {
        assert!(self.depth > 0);
        let half = 1u32 << (self.depth - 1);
        let base = i as u32 * half;
        let perm = (0..half).map(|u| self.perm[(base + u) as usize] & (half - 1)).collect();
        FiniteAut { depth: self.depth - 1, perm }
    }

    pub fn from_states(s0: &FiniteAut, s1: &FiniteAut, active: bool) -> FiniteAut {
        assert_eq!(s0.depth, s1.depth);
        let half = 1u32 << s0.depth;
        let mut perm = Vec::with_capacity(2 * half as usize);
        for (i, s) in [s0, s1].into_iter().enumerate() {
            let target = (i as u32 ^ active as u32) * half;
            perm.extend(s.perm.iter().map(|&u| target + u));
        }
        FiniteAut { depth: s0.depth + 1, perm }
    }

    pub fn is_trivial_on_level(&self, level: u32) -> bool {
        let level = level.min(self.depth);
        let shift = self.depth - level;
        self.perm.iter().enumerate().all(|(v, &w)| (v as u32 >> shift) == (w >> shift))
    }

    /// Deepest level on which the action is trivial.
    pub fn trivial_depth(&self) -> u32 {
        (0..=self.depth).take_while(|&l| self.is_trivial_on_level(l)).last().unwrap_or(0)
    }
}

/// Approximate solution `(X, Y)` of `[X, Y] g = 1` in Aut(T2) for `g` in the
/// derived subgroup, from the recursion truncated after `n` steps.
pub fn aut_t2_solution(g: &FiniteAut, n: u32) -> (FiniteAut, FiniteAut) {
    solve_step(g, 0, n)
}

fn solve_step(c: &FiniteAut, i: u32, n: u32) -> (FiniteAut, FiniteAut) {
    let depth = c.depth();
    if i > n || depth == 0 {
        return (FiniteAut::identity(depth), FiniteAut::identity(depth));
    }
    let c1 = c.state(0);
    let c2 = c.state(1);
    let next = c2.mul(&c1);
    let (a_next, b_next) = solve_step(&next, i + 1, n);
    let conj = b_next.inverse().mul(&a_next).mul(&b_next).mul(&c2);
    let a = FiniteAut::from_states(&a_next, &conj, false);
    let b = FiniteAut::from_states(&b_next, &FiniteAut::identity(depth - 1), true);
    (a, b)
}

/// Depth on which `[X, Y] g` acts trivially for the truncated solution.
pub fn aut_t2_residual_depth(g: &FiniteAut, n: u32) -> u32 {
    let (x, y) = aut_t2_solution(g, n);
    x.commutator(&y).mul(g).trivial_depth()
}

/// Activities of `g` at every vertex of depth below `depth`, in BFS order.
/// Vertices are labelled by their paths over `{1, 2}`.
pub fn portrait(g: &GenWord, depth: u32) -> Vec<(String, bool)> {
    let mut out = Vec::new();
    let mut level = vec![(String::new(), g.clone())];
    for _ in 0..depth {
        let mut next = Vec::new();
        for (path, h) in level {
            let d = decompose(&h);
            out.push((path.clone(), d.active));
            next.push((format!("{path}1"), d.first));
            next.push((format!("{path}2"), d.second));
        }
        level = next;
    }
    out
}
