//! Constraints `γ: F_{2n} → Q` as tuples of Q-labels, the action of the
//! generators of Uₙ ≤ Stab(Rₙ), orbit tables and reduction.

use std::collections::{HashMap, VecDeque};
use std::sync::{Mutex, OnceLock};

use thiserror::Error;

use crate::equations::{evaluate, Equation, Letter, Substitution, Tracked, Var};
use crate::quotients::{QGroup, QuotientStructure, Q_ORDER};
use crate::words::GenWord;

pub type Constraint = Vec<u8>;

#[derive(Clone, Debug, Error, PartialEq, Eq)]
pub enum ConstraintError {
    #[error("orbit tables exist only for n = 2 and n = 3, got {0}")]
    UnsupportedRank(usize),
    #[error("constraint has odd length {0}")]
    OddLength(usize),
    #[error("label {0} is not in Q")]
    BadLabel(u8),
    #[error("window search exceeded {0} states")]
    Budget(usize),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum GenKind {
    Phi,
    Psi,
    Swap,
}

/// One generator of Uₙ, `kind` with 1-based index `i`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct UGen {
    pub kind: GenKind,
    pub i: usize,
}

impl UGen {
    pub fn name(&self) -> String {
        let k = match self.kind {
            GenKind::Phi => "phi",
            GenKind::Psi => "psi",
            GenKind::Swap => "s",
        };
        format!("{k}{}", self.i)
    }

    pub fn shifted(&self, pairs: usize) -> UGen {
        UGen { kind: self.kind, i: self.i + 2 * pairs }
    }

    /// Largest variable index touched.
    pub fn reach(&self) -> usize {
        match self.kind {
            GenKind::Phi if self.i % 2 == 0 => self.i,
            GenKind::Phi => self.i + 1,
            _ => self.i + 3,
        }
    }

    pub fn tracked(&self) -> Tracked<GenWord> {
        let v = |j: usize| Equation::<GenWord>::var(Var::x(j as u32));
        let x = |j: usize| Var::x(j as u32);
        let p = |xs: &[&Equation<GenWord>]| Equation::product(xs.iter().copied());
        let i = self.i;
        match self.kind {
            GenKind::Phi => {
                let other = if i % 2 == 0 { i - 1 } else { i + 1 };
                Tracked::new(
                    Substitution::from_pairs([(x(i), v(other).mul(&v(i)))]),
                    Substitution::from_pairs([(x(i), v(other).inv().mul(&v(i)))]),
                )
            }
            GenKind::Psi => {
                let (a, b, c, d) = (v(i), v(i + 1), v(i + 2), v(i + 3));
                let (bi, ci) = (b.inv(), c.inv());
                Tracked::new(
                    Substitution::from_pairs([
                        (x(i), p(&[&b, &ci, &a])),
                        (x(i + 1), p(&[&b, &ci, &b, &c, &bi])),
                        (x(i + 2), p(&[&b, &c, &bi])),
                        (x(i + 3), p(&[&b, &ci, &d])),
                    ]),
                    Substitution::from_pairs([
                        (x(i), p(&[&c, &bi, &a])),
                        (x(i + 1), p(&[&c, &b, &ci])),
                        (x(i + 2), p(&[&c, &bi, &c, &b, &ci])),
                        (x(i + 3), p(&[&c, &bi, &d])),
                    ]),
                )
            }
            GenKind::Swap => {
                let (a, b, c, d) = (v(i), v(i + 1), v(i + 2), v(i + 3));
                let cd = Equation::commutator(&c, &d);
                let ab_inv = Equation::commutator(&a, &b).inv();
                Tracked::new(
                    Substitution::from_pairs([(x(i), c.clone()), (x(i + 1), d.clone()), (x(i + 2), a.conj(&cd)), (x(i + 3), b.conj(&cd))]),
                    Substitution::from_pairs([(x(i), c.conj(&ab_inv)), (x(i + 1), d.conj(&ab_inv)), (x(i + 2), a), (x(i + 3), b)]),
                )
            }
        }
    }
}

/// Generators of Uₙ: φ₁…φ_{2n}, ψ_i and s_i for odd `i ≤ 2n−3`.
pub fn un_generators(n: usize, with_swaps: bool) -> Vec<UGen> {
    let mut g: Vec<UGen> = (1..=2 * n).map(|i| UGen { kind: GenKind::Phi, i }).collect();
    for i in (1..2 * n.saturating_sub(1)).step_by(2) {
        g.push(UGen { kind: GenKind::Psi, i });
    }
    if with_swaps {
        for i in (1..2 * n.saturating_sub(1)).step_by(2) {
            g.push(UGen { kind: GenKind::Swap, i });
        }
    }
    g
}

/// `γ ∘ φ`: coordinate `i` becomes `γ(φ(X_i))`.
pub fn act(q: &QGroup, gamma: &[u8], phi: &Substitution<GenWord>) -> Constraint {
    (1..=gamma.len())
        .map(|i| {
            evaluate(
                &phi.image(Var::x(i as u32)),
                q,
                |v| gamma.get(v.name as usize - 1).copied().unwrap_or(0),
                |c| q.image(c),
            )
        })
        .collect()
}

/// A substitution compiled to its effect on Q-tuples.
#[derive(Clone, Debug)]
struct Compiled {
    /// `(coordinate, letters as (0-based variable, inverted))`.
    images: Vec<(usize, Vec<(usize, bool)>)>,
}

impl Compiled {
    fn new(s: &Substitution<GenWord>) -> Self {
        let images = s
            .support()
            .map(|v| {
                let letters = s
                    .image(*v)
                    .letters()
                    .iter()
                    .map(|l| match l {
                        Letter::Var(w, e) => (w.name as usize - 1, *e),
                        Letter::Const(_) => panic!("generator with constants"),
                    })
                    .collect();
                (v.name as usize - 1, letters)
            })
            .collect();
        Compiled { images }
    }

    /// Action on a packed tuple of length `len`.
    fn apply_packed(&self, q: &QGroup, x: u32, len: usize) -> u32 {
        let mut t = [0u8; 8];
        for (i, slot) in t.iter_mut().enumerate().take(len) {
            *slot = ((x >> (4 * (len - 1 - i))) & 0xF) as u8;
        }
        let mut out = x;
        for (c, letters) in &self.images {
            let mut acc = 0u8;
            for &(j, e) in letters {
                let y = if e { q.inv[t[j] as usize] } else { t[j] };
                acc = q.mult[acc as usize][y as usize];
            }
            let shift = 4 * (len - 1 - c);
            out = (out & !(0xF << shift)) | ((acc as u32) << shift);
        }
        out
    }

    fn apply(&self, q: &QGroup, t: &[u8], out: &mut [u8]) {
        out.copy_from_slice(t);
        for (c, letters) in &self.images {
            let mut acc = 0u8;
            for &(j, e) in letters {
                let x = if e { q.inverse(t[j]) } else { t[j] };
                acc = q.mul(acc, x);
            }
            out[*c] = acc;
        }
    }
}

/// A generator with forward and inverse actions on tuples.
#[derive(Clone, Debug)]
struct Action {
    gen: UGen,
    fwd: Compiled,
    inv: Compiled,
}

fn actions(gens: &[UGen]) -> Vec<Action> {
    gens.iter()
        .map(|g| {
            let t = g.tracked();
            Action { gen: *g, fwd: Compiled::new(&t.forward), inv: Compiled::new(&t.inverse) }
        })
        .collect()
}

pub fn pack(t: &[u8]) -> u32 {
    t.iter().fold(0, |acc, &x| (acc << 4) | x as u32)
}

pub fn unpack(x: u32, len: usize) -> Constraint {
    (0..len).map(|i| ((x >> (4 * (len - 1 - i))) & 0xF) as u8).collect()
}

const UNSET: u8 = u8::MAX;

/// A generator of Uₙ or its inverse.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Move {
    pub gen: UGen,
    pub inverse: bool,
}

impl Move {
    pub fn tracked(&self) -> Tracked<GenWord> {
        let t = self.gen.tracked();
        if self.inverse {
            t.invert()
        } else {
            t
        }
    }

    pub fn shifted(&self, pairs: usize) -> Move {
        Move { gen: self.gen.shifted(pairs), inverse: self.inverse }
    }

    pub fn name(&self) -> String {
        if self.inverse {
            format!("{}^-1", self.gen.name())
        } else {
            self.gen.name()
        }
    }
}

/// Orbits of Uₙ on Q^{2n} for n ∈ {2, 3}.
pub struct OrbitTable {
    pub n: usize,
    pub with_swaps: bool,
    /// Orbit id per packed tuple.
    pub ids: Vec<u8>,
    /// Packed least member per orbit id.
    pub starts: Vec<u32>,
    /// Packed representative per orbit id.
    pub reps: Vec<u32>,
    /// `moves[t] = g` if `t = s ∘ g` for the BFS parent `s`; `UNSET` at starts.
    pub moves: Vec<u8>,
    /// Generator indices leading from the start of each orbit to its representative.
    pub rep_paths: Vec<Vec<u8>>,
    pub gens: Vec<UGen>,
}

impl OrbitTable {
    pub fn get(n: usize) -> Result<&'static OrbitTable, ConstraintError> {
        static T2: OnceLock<OrbitTable> = OnceLock::new();
        static T3: OnceLock<OrbitTable> = OnceLock::new();
        match n {
            2 => Ok(T2.get_or_init(|| OrbitTable::compute(2, true, &QuotientStructure::get().q))),
            3 => Ok(T3.get_or_init(|| OrbitTable::compute(3, true, &QuotientStructure::get().q))),
            _ => Err(ConstraintError::UnsupportedRank(n)),
        }
    }

    /// Orbits by BFS from each least unvisited tuple in packed order. The
    /// representative is the lexicographically least member, restricted for
    /// n = 3 to members with trivial last coordinate.
    pub fn compute(n: usize, with_swaps: bool, q: &QGroup) -> OrbitTable {
        let len = 2 * n;
        let size = 1usize << (4 * len);
        let gens = un_generators(n, with_swaps);
        let acts = actions(&gens);
        let mut ids = vec![UNSET; size];
        let mut moves = vec![UNSET; size];
        let mut starts = Vec::new();
        let mut queue: VecDeque<u32> = VecDeque::new();
        for start in 0..size {
            if ids[start] != UNSET {
                continue;
            }
            let id = u8::try_from(starts.len()).ok().filter(|&i| i != UNSET).expect("fewer than 255 orbits");
            starts.push(start as u32);
            ids[start] = id;
            queue.push_back(start as u32);
            while let Some(x) = queue.pop_front() {
                for (gi, a) in acts.iter().enumerate() {
                    let y = a.fwd.apply_packed(q, x, len) as usize;
                    if ids[y] == UNSET {
                        ids[y] = id;
                        moves[y] = gi as u8;
                        queue.push_back(y as u32);
                    }
                }
            }
        }
        let mut reps = vec![u32::MAX; starts.len()];
        for (x, &id) in ids.iter().enumerate() {
            if reps[id as usize] == u32::MAX && (n == 2 || x & 0xF == 0) {
                reps[id as usize] = x as u32;
            }
        }
        assert!(reps.iter().all(|&r| r != u32::MAX), "orbit without trivial-tail member");
        let rep_paths = reps
            .iter()
            .map(|&r| {
                let mut x = r;
                let mut path = Vec::new();
                while moves[x as usize] != UNSET {
                    let g = moves[x as usize];
                    path.push(g);
                    x = acts[g as usize].inv.apply_packed(q, x, len);
                }
                path.reverse();
                path
            })
            .collect();
        OrbitTable { n, with_swaps, ids, starts, reps, moves, rep_paths, gens }
    }

    pub fn orbit_count(&self) -> usize {
        self.reps.len()
    }

    pub fn orbit_id(&self, t: &[u8]) -> u8 {
        self.ids[pack(t) as usize]
    }

    pub fn representative(&self, id: u8) -> Constraint {
        unpack(self.reps[id as usize], 2 * self.n)
    }

    pub fn representatives(&self) -> Vec<Constraint> {
        (0..self.orbit_count()).map(|i| self.representative(i as u8)).collect()
    }

    /// Moves leading from `t` to its representative.
    pub fn path(&self, q: &QGroup, t: &[u8]) -> Vec<Move> {
        let len = 2 * self.n;
        let mut x = pack(t);
        let mut path = Vec::new();
        while self.moves[x as usize] != UNSET {
            let g = self.moves[x as usize] as usize;
            path.push(Move { gen: self.gens[g], inverse: true });
            let t = self.gens[g].tracked();
            x = Compiled::new(&t.inverse).apply_packed(q, x, len);
        }
        let id = self.ids[x as usize];
        path.extend(self.rep_paths[id as usize].iter().map(|&g| Move { gen: self.gens[g as usize], inverse: false }));
        path
    }
}

/// The moves `g₁, …, g_k` with `γ_red = γ ∘ g₁ ∘ ⋯ ∘ g_k`.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct Certificate {
    pub moves: Vec<Move>,
}

impl Certificate {
    /// The element `g₁ ∘ ⋯ ∘ g_k` of Uₙ with its inverse.
    pub fn substitution(&self) -> Tracked<GenWord> {
        let mut acc = Tracked::identity();
        for g in &self.moves {
            acc = g.tracked().then(&acc);
        }
        acc
    }

    /// Applies the moves one at a time by direct evaluation.
    pub fn replay(&self, q: &QGroup, gamma: &[u8]) -> Constraint {
        let mut cur = gamma.to_vec();
        for g in &self.moves {
            let need = g.gen.reach();
            if cur.len() < need {
                cur.resize(need, 0);
            }
            cur = act(q, &cur, &g.tracked().forward);
        }
        cur
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Reduction {
    pub reduced: Constraint,
    pub orbit: u8,
    pub certificate: Certificate,
}

pub const WINDOW_BUDGET: usize = 4_000_000;

fn window_cache() -> &'static Mutex<HashMap<u32, Vec<u8>>> {
    static C: OnceLock<Mutex<HashMap<u32, Vec<u8>>>> = OnceLock::new();
    C.get_or_init(|| Mutex::new(HashMap::new()))
}

fn window_actions() -> &'static [Action] {
    static A: OnceLock<Vec<Action>> = OnceLock::new();
    A.get_or_init(|| actions(&un_generators(4, true)))
}

/// BFS under U₄ from an 8-tuple to one whose last pair is trivial. Returns
/// indices into the U₄ generator list.
fn clear_last_pair(q: &QGroup, key: u32) -> Result<Vec<u8>, ConstraintError> {
    if let Some(p) = window_cache().lock().unwrap().get(&key) {
        return Ok(p.clone());
    }
    let acts = window_actions();
    let mut parent: HashMap<u32, (u32, u8)> = HashMap::new();
    parent.insert(key, (key, UNSET));
    let mut queue = VecDeque::from([key]);
    let mut found = None;
    'bfs: while let Some(x) = queue.pop_front() {
        if x & 0xFF == 0 {
            found = Some(x);
            break;
        }
        for (gi, a) in acts.iter().enumerate() {
            let y = a.fwd.apply_packed(q, x, 8);
            if let std::collections::hash_map::Entry::Vacant(e) = parent.entry(y) {
                e.insert((x, gi as u8));
                if y & 0xFF == 0 {
                    found = Some(y);
                    break 'bfs;
                }
                queue.push_back(y);
            }
        }
        if parent.len() > WINDOW_BUDGET {
            return Err(ConstraintError::Budget(WINDOW_BUDGET));
        }
    }
    let mut y = found.ok_or(ConstraintError::Budget(parent.len()))?;
    let mut path = Vec::new();
    while y != key {
        let (px, g) = parent[&y];
        path.push(g);
        y = px;
    }
    path.reverse();
    window_cache().lock().unwrap().insert(key, path.clone());
    Ok(path)
}

/// Clears trailing pairs until at most three pairs remain, calling `step`
/// with each window offset and path.
fn strip_windows(
    q: &QGroup,
    cur: &mut Constraint,
    mut step: impl FnMut(usize, &[u8]),
) -> Result<(), ConstraintError> {
    let acts = window_actions();
    loop {
        while cur.len() > 6 && cur[cur.len() - 2..] == [0, 0] {
            cur.truncate(cur.len() - 2);
        }
        if cur.len() <= 6 {
            break;
        }
        let off = cur.len() - 8;
        let mut x = pack(&cur[off..]);
        let path = clear_last_pair(q, x)?;
        for &g in &path {
            x = acts[g as usize].fwd.apply_packed(q, x, 8);
        }
        cur[off..].copy_from_slice(&unpack(x, 8));
        step(off, &path);
    }
    cur.resize(6, 0);
    Ok(())
}

/// The Red orbit id of a constraint, without a certificate.
pub fn reduced_orbit(q: &QGroup, gamma: &[u8]) -> Result<u8, ConstraintError> {
    validate(gamma)?;
    let table = OrbitTable::get(3)?;
    let mut cur = gamma.to_vec();
    strip_windows(q, &mut cur, |_, _| {})?;
    Ok(table.orbit_id(&cur))
}

fn validate(gamma: &[u8]) -> Result<(), ConstraintError> {
    if gamma.len() % 2 == 1 {
        return Err(ConstraintError::OddLength(gamma.len()));
    }
    match gamma.iter().find(|&&x| x as usize >= Q_ORDER) {
        Some(&x) => Err(ConstraintError::BadLabel(x)),
        None => Ok(()),
    }
}

fn apply_moves(q: &QGroup, cur: &mut Constraint, moves: &[Move], offset_pairs: usize, cert: &mut Certificate) {
    for g in moves {
        let g = g.shifted(offset_pairs);
        let a = &actions(&[g.gen])[0];
        let c = if g.inverse { &a.inv } else { &a.fwd };
        let mut buf = cur.clone();
        c.apply(q, cur, &mut buf);
        *cur = buf;
        cert.moves.push(g);
    }
}

/// Reduces a constraint of any even length to its representative in Red
/// (length 6, support in the first five coordinates).
pub fn reduce_constraint(q: &QGroup, gamma: &[u8]) -> Result<Reduction, ConstraintError> {
    validate(gamma)?;
    let table = OrbitTable::get(3)?;
    let mut cur = gamma.to_vec();
    let mut cert = Certificate::default();
    let acts = window_actions();
    strip_windows(q, &mut cur, |off, path| {
        cert.moves.extend(path.iter().map(|&g| Move { gen: acts[g as usize].gen.shifted(off / 2), inverse: false }));
    })?;
    let path = table.path(q, &cur);
    apply_moves(q, &mut cur, &path, 0, &mut cert);
    let orbit = table.orbit_id(&cur);
    debug_assert_eq!(pack(&cur), table.reps[orbit as usize]);
    Ok(Reduction { reduced: cur, orbit, certificate: cert })
}

/// Reduces a 4-tuple to its representative in Red⁴.
pub fn reduce_constraint4(q: &QGroup, gamma: &[u8]) -> Result<Reduction, ConstraintError> {
    validate(gamma)?;
    if gamma.len() != 4 {
        return Err(ConstraintError::UnsupportedRank(gamma.len() / 2));
    }
    let table = OrbitTable::get(2)?;
    let path = table.path(q, gamma);
    let mut cur = gamma.to_vec();
    let mut cert = Certificate::default();
    apply_moves(q, &mut cur, &path, 0, &mut cert);
    let orbit = table.orbit_id(&cur);
    Ok(Reduction { reduced: cur, orbit, certificate: cert })
}

/// Activity of each coordinate.
pub fn activity(q: &QGroup, gamma: &[u8]) -> Vec<bool> {
    gamma.iter().map(|&x| q.reps[x as usize].activity()).collect()
}

pub fn is_active(q: &QGroup, gamma: &[u8]) -> bool {
    activity(q, gamma).into_iter().any(|a| a)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::equations::r_n;
    use crate::equations::x_vars;

    #[test]
    fn generators_fix_r_n() {
        for n in 2..=4 {
            let r = r_n::<GenWord>(&x_vars(2 * n));
            for g in un_generators(n, true) {
                let t = g.tracked();
                assert_eq!(t.forward.apply(&r), r, "{}", g.name());
                assert!(t.is_consistent_on(&x_vars(2 * n)), "{}", g.name());
            }
        }
    }

    #[test]
    fn action_basics() {
        let q = &QuotientStructure::get().q;
        let phi2 = UGen { kind: GenKind::Phi, i: 2 }.tracked().forward;
        let gamma = vec![3, 5, 0, 0, 0, 0];
        let out = act(q, &gamma, &phi2);
        assert_eq!(out[1], q.mul(3, 5));
        assert_eq!(act(q, &gamma, &Substitution::identity()), gamma);
        assert_eq!(act(q, &[0; 6], &phi2), vec![0; 6]);
        let s1 = UGen { kind: GenKind::Swap, i: 1 }.tracked().forward;
        let composed = phi2.then(&s1);
        assert_eq!(act(q, &act(q, &gamma, &s1), &phi2), act(q, &gamma, &composed));
    }

    #[test]
    fn packing() {
        let t = vec![1, 2, 3, 4, 5, 15];
        assert_eq!(unpack(pack(&t), 6), t);
        assert_eq!(pack(&[1, 0]), 0x10);
    }

    #[test]
    fn rank_two_orbits() {
        let q = &QuotientStructure::get().q;
        let t = OrbitTable::get(2).unwrap();
        assert_eq!(t.orbit_count(), 86);
        assert_eq!(t.representative(t.orbit_id(&[0; 4])), vec![0; 4]);
        let without = OrbitTable::compute(2, false, q);
        assert_eq!(without.orbit_count(), 86);
    }

    #[test]
    fn activities() {
        let qs = QuotientStructure::get();
        let q = &qs.q;
        assert!(!is_active(q, &[0; 6]));
        assert!(is_active(q, &[0, 0, qs.pi(&"a".parse().unwrap()), 0]));
        let k = qs.pi(&crate::quotients::k1());
        assert!(!is_active(q, &[k; 4]));
    }

    #[test]
    fn rank_three_orbits_and_reduction() {
        let qs = QuotientStructure::get();
        let q = &qs.q;
        let t = OrbitTable::get(3).unwrap();
        assert_eq!(t.orbit_count(), 90);
        assert!(t.representatives().iter().all(|r| r[5] == 0));
        assert_eq!(t.representative(t.orbit_id(&[0; 6])), vec![0; 6]);

        let a = qs.pi(&"a".parse().unwrap());
        let r = reduce_constraint(q, &[a; 6]).unwrap();
        assert_eq!(r.reduced.iter().filter(|&&x| x != 0).count(), 1);
        assert_ne!(r.reduced[4], 0);
        assert_eq!(r.certificate.replay(q, &[a; 6]), r.reduced);
        assert_eq!(act(q, &[a; 6], &r.certificate.substitution().forward), r.reduced);

        let r = reduce_constraint(q, &[0; 6]).unwrap();
        assert_eq!((r.reduced, r.certificate.moves.len()), (vec![0; 6], 0));

        let g8 = vec![3, 7, 2, 9, 11, 0, 0, 0];
        let r8 = reduce_constraint(q, &g8).unwrap();
        assert_eq!(r8.orbit, t.orbit_id(&g8[..6]));

        let g10: Vec<u8> = (1..=10).collect();
        let r10 = reduce_constraint(q, &g10).unwrap();
        let mut replayed = r10.certificate.replay(q, &g10);
        assert!(replayed[6..].iter().all(|&x| x == 0));
        replayed.truncate(6);
        assert_eq!(replayed, r10.reduced);
    }
}
