//! Finite quotients of G realized through the action on a fixed tree level.

use std::collections::{HashMap, VecDeque};
use std::sync::OnceLock;

use num_bigint::BigUint;
use thiserror::Error;

use crate::perm::{self, Perm, PermGroup};
use crate::tree::{self, decompose, TreeError, DEFAULT_LEVEL_CAP};
use crate::words::{Gen, GenWord};

#[derive(Clone, Debug, Error, PartialEq, Eq)]
pub enum QuotientError {
    #[error(transparent)]
    Tree(#[from] TreeError),
    #[error("tower indices not stable at level {0}")]
    Unstable(u32),
    #[error("no stable level up to {0}")]
    NoStableLevel(u32),
    #[error("conflicting branch-structure entry for {0}")]
    Conflict(String),
    #[error("element {0} is not in the derived subgroup")]
    NotInDerived(usize),
    #[error("germ level {0} exceeds 4")]
    GermCap(u32),
}

pub const QUOTIENT_ORDER: usize = 1024;
pub const DERIVED_ORDER: usize = 128;
pub const Q_ORDER: usize = 16;

fn w(s: &str) -> GenWord {
    GenWord::parse_expr(s).expect("built-in word")
}

pub fn k1() -> GenWord {
    w("(ab)^2")
}

pub fn k2() -> GenWord {
    w("(abad)^2")
}

pub fn k3() -> GenWord {
    w("(bada)^2")
}

/// Image of G acting on level `m`, together with the generator images.
pub struct LevelQuotient {
    pub level: u32,
    pub group: PermGroup,
    pub gens: [Perm; 4],
}

impl LevelQuotient {
    pub fn image(&self, g: &GenWord) -> Perm {
        let mut p = perm::identity(self.group.degree());
        for &x in g.letters() {
            p = perm::compose(&p, &self.gens[x.index()]);
        }
        p
    }
}

pub fn level_quotient(m: u32) -> Result<LevelQuotient, QuotientError> {
    if m == 0 || m > DEFAULT_LEVEL_CAP {
        return Err(TreeError::LevelCap { level: m, cap: DEFAULT_LEVEL_CAP }.into());
    }
    let gens = tree::generator_perms(m).clone();
    let group = PermGroup::new(1 << m, &gens);
    Ok(LevelQuotient { level: m, group, gens })
}

/// Images of the subgroups G′ ⊳ K ⊳ K×K ⊳ K′ on one level.
pub struct Tower {
    pub level: LevelQuotient,
    pub derived: PermGroup,
    pub k: PermGroup,
    pub kxk: PermGroup,
    pub kprime: PermGroup,
}

impl Tower {
    /// `[G:G′], [G′:K], [K:K×K], [K×K:K′]`.
    pub fn indices(&self) -> [BigUint; 4] {
        let o = [&self.level.group, &self.derived, &self.k, &self.kxk, &self.kprime].map(|g| g.order());
        [&o[0] / &o[1], &o[1] / &o[2], &o[2] / &o[3], &o[3] / &o[4]]
    }

    pub fn kprime_index(&self) -> BigUint {
        self.level.group.order() / self.kprime.order()
    }
}

pub fn kxk_generators() -> Vec<GenWord> {
    let (a, b, c) = (k1(), k2(), k3());
    let ai = a.invert();
    vec![
        b.clone(),
        c.clone(),
        GenWord::commutator(&a, &b),
        GenWord::commutator(&a, &c),
        GenWord::commutator(&ai, &b),
        GenWord::commutator(&ai, &c),
    ]
}

pub fn build_tower(m: u32) -> Result<Tower, QuotientError> {
    let level = level_quotient(m)?;
    let n = level.group.degree();
    let gens = level.gens.to_vec();
    let mut comms = Vec::new();
    for i in 0..4 {
        for j in 0..4 {
            comms.push(perm::commutator(&gens[i], &gens[j]));
        }
    }
    let derived = PermGroup::normal_closure(n, &comms, &gens);
    let k = PermGroup::normal_closure(n, &[level.image(&k1())], &gens);
    let kxk_gens: Vec<Perm> = kxk_generators().iter().map(|g| level.image(g)).collect();
    let kxk = PermGroup::new(n, &kxk_gens);
    let kprime = PermGroup::normal_closure(n, &[level.image(&GenWord::commutator(&k1(), &k2()))], &gens);
    Ok(Tower { level, derived, k, kxk, kprime })
}

pub fn expected_indices() -> [BigUint; 4] {
    [8u32, 2, 4, 16].map(BigUint::from)
}

/// Minimal level at which `[G_m : K′_m] = 1024`, confirmed at `m + 1`.
pub fn stable_level() -> Result<u32, QuotientError> {
    static CACHE: OnceLock<u32> = OnceLock::new();
    if let Some(&m) = CACHE.get() {
        return Ok(m);
    }
    let target = BigUint::from(QUOTIENT_ORDER);
    let mut prev = build_tower(1)?.kprime_index();
    for m in 2..DEFAULT_LEVEL_CAP {
        let idx = build_tower(m)?.kprime_index();
        if prev == target && idx == target {
            return Ok(*CACHE.get_or_init(|| m - 1));
        }
        prev = idx;
    }
    Err(QuotientError::NoStableLevel(DEFAULT_LEVEL_CAP))
}

/// A subset of G/K′ as a 1024-bit mask.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Default)]
pub struct ElemSet(pub [u64; QUOTIENT_ORDER / 64]);

impl ElemSet {
    pub fn contains(&self, i: usize) -> bool {
        self.0[i / 64] >> (i % 64) & 1 == 1
    }

    pub fn insert(&mut self, i: usize) {
        self.0[i / 64] |= 1 << (i % 64);
    }

    pub fn len(&self) -> usize {
        self.0.iter().map(|x| x.count_ones() as usize).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn is_subset(&self, other: &ElemSet) -> bool {
        self.0.iter().zip(other.0.iter()).all(|(a, b)| a & !b == 0)
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        (0..QUOTIENT_ORDER).filter(move |&i| self.contains(i))
    }
}

/// G/K′ with its distinguished subgroups, G/K = Q, and G′/(K×K).
pub struct QuotientStructure {
    pub level: u32,
    /// Shortlex-minimal representative word of each element.
    pub reps: Vec<GenWord>,
    /// `right[i][x]` is the index of `reps[i]·x`.
    pub right: Vec<[u16; 4]>,
    mult: Vec<u16>,
    inv: Vec<u16>,
    pub derived: ElemSet,
    pub k: ElemSet,
    pub kxk: ElemSet,
    /// `rho[i]`: label in Q = G/K.
    pub rho: Vec<u8>,
    /// `rho_prime[i]`: label in G′/(K×K), meaningful on the derived image.
    pub rho_prime: Vec<u8>,
    pub q: QGroup,
}

/// Q = G/K labeled by shortlex BFS over (π(a), π(b), π(d)).
#[derive(Clone, Debug)]
pub struct QGroup {
    pub reps: Vec<GenWord>,
    pub mult: [[u8; Q_ORDER]; Q_ORDER],
    pub inv: [u8; Q_ORDER],
    /// π of a, b, c, d.
    pub gens: [u8; 4],
}

impl QGroup {
    pub fn mul(&self, x: u8, y: u8) -> u8 {
        self.mult[x as usize][y as usize]
    }

    pub fn inverse(&self, x: u8) -> u8 {
        self.inv[x as usize]
    }

    pub fn conj(&self, x: u8, y: u8) -> u8 {
        self.mul(self.mul(self.inverse(y), x), y)
    }

    pub fn comm(&self, x: u8, y: u8) -> u8 {
        self.mul(self.mul(self.inverse(x), self.inverse(y)), self.mul(x, y))
    }

    pub fn image(&self, g: &GenWord) -> u8 {
        g.letters().iter().fold(0, |acc, x| self.mul(acc, self.gens[x.index()]))
    }
}

impl QuotientStructure {
    pub fn get() -> &'static QuotientStructure {
        static Q: OnceLock<QuotientStructure> = OnceLock::new();
        Q.get_or_init(|| Self::build().expect("quotient construction"))
    }

    pub fn build() -> Result<QuotientStructure, QuotientError> {
        let m = stable_level()?;
        Self::build_at(m)
    }

    pub fn build_at(m: u32) -> Result<QuotientStructure, QuotientError> {
        let tower = build_tower(m)?;
        if tower.indices() != expected_indices() {
            return Err(QuotientError::Unstable(m));
        }
        let gens = &tower.level.gens;
        let labeled: Vec<(Gen, Perm)> = Gen::ALL.iter().map(|&x| (x, gens[x.index()].clone())).collect();
        let (perms, reps, right) = bfs_cosets(&tower.kprime, &labeled);
        assert_eq!(reps.len(), QUOTIENT_ORDER);
        let n = reps.len();
        let mut mult = vec![0u16; n * n];
        for i in 0..n {
            for j in 0..n {
                let mut x = i;
                for &g in reps[j].letters() {
                    x = right[x][g.index()] as usize;
                }
                mult[i * n + j] = x as u16;
            }
        }
        let mut inv = vec![0u16; n];
        for i in 0..n {
            inv[i] = (0..n).find(|&j| mult[i * n + j] == 0).unwrap() as u16;
        }
        let mask = |grp: &PermGroup| {
            let mut s = ElemSet::default();
            for (i, p) in perms.iter().enumerate() {
                if grp.contains(p) {
                    s.insert(i);
                }
            }
            s
        };
        let derived = mask(&tower.derived);
        let k = mask(&tower.k);
        let kxk = mask(&tower.kxk);

        let q_gens: Vec<(Gen, Perm)> = [Gen::A, Gen::B, Gen::D].iter().map(|&x| (x, gens[x.index()].clone())).collect();
        let (q_perms, q_reps, _) = bfs_cosets(&tower.k, &q_gens);
        assert_eq!(q_reps.len(), Q_ORDER);
        let q_index: HashMap<Perm, u8> = q_perms.iter().enumerate().map(|(i, p)| (p.clone(), i as u8)).collect();
        let q_of = |p: &Perm| q_index[&tower.k.canonical_coset_rep(p)];
        let mut qmult = [[0u8; Q_ORDER]; Q_ORDER];
        for i in 0..Q_ORDER {
            for j in 0..Q_ORDER {
                qmult[i][j] = q_of(&perm::compose(&q_perms[i], &q_perms[j]));
            }
        }
        let mut qinv = [0u8; Q_ORDER];
        for i in 0..Q_ORDER {
            qinv[i] = (0..Q_ORDER).find(|&j| qmult[i][j] == 0).unwrap() as u8;
        }
        let qgens = [0, 1, 2, 3].map(|i| q_of(&gens[i]));
        let q = QGroup { reps: q_reps, mult: qmult, inv: qinv, gens: qgens };
        let rho: Vec<u8> = perms.iter().map(q_of).collect();

        let mut rho_prime = vec![u8::MAX; n];
        let mut class_reps: Vec<Perm> = Vec::new();
        for (i, p) in perms.iter().enumerate() {
            if !derived.contains(i) {
                continue;
            }
            let c = tower.kxk.canonical_coset_rep(p);
            let label = match class_reps.iter().position(|r| *r == c) {
                Some(l) => l,
                None => {
                    class_reps.push(c);
                    class_reps.len() - 1
                }
            };
            rho_prime[i] = label as u8;
        }
        Ok(QuotientStructure { level: m, reps, right, mult, inv, derived, k, kxk, rho, rho_prime, q })
    }

    pub fn order(&self) -> usize {
        self.reps.len()
    }

    pub fn mul(&self, i: usize, j: usize) -> usize {
        self.mult[i * self.order() + j] as usize
    }

    pub fn inverse(&self, i: usize) -> usize {
        self.inv[i] as usize
    }

    pub fn conj(&self, i: usize, j: usize) -> usize {
        self.mul(self.mul(self.inverse(j), i), j)
    }

    pub fn comm(&self, i: usize, j: usize) -> usize {
        self.mul(self.mul(self.inverse(i), self.inverse(j)), self.mul(i, j))
    }

    /// τ: G → G/K′.
    pub fn tau(&self, g: &GenWord) -> usize {
        self.tau_letters(g.letters())
    }

    pub fn tau_letters(&self, letters: &[Gen]) -> usize {
        letters.iter().fold(0, |acc, x| self.right[acc][x.index()] as usize)
    }

    /// π: G → Q.
    pub fn pi(&self, g: &GenWord) -> u8 {
        self.rho[self.tau(g)]
    }

    pub fn derived_elements(&self) -> Vec<usize> {
        self.derived.iter().collect()
    }

    /// `p̄_h(q)`: ρ′-class of `(g@2)^h · g@1` for the stored lift `g` of `q`.
    pub fn pbar(&self, q: usize, h: &GenWord) -> Result<u8, QuotientError> {
        if !self.derived.contains(q) {
            return Err(QuotientError::NotInDerived(q));
        }
        let img = self.tau(&tree::p_map(&self.reps[q], h));
        Ok(self.rho_prime[img])
    }
}

/// Shortlex BFS over right cosets `N·g`, returning canonical permutations,
/// representative words and the right-multiplication table by `gens`.
fn bfs_cosets(n: &PermGroup, gens: &[(Gen, Perm)]) -> (Vec<Perm>, Vec<GenWord>, Vec<[u16; 4]>) {
    let id = n.canonical_coset_rep(&perm::identity(n.degree()));
    let mut index: HashMap<Perm, usize> = HashMap::new();
    index.insert(id.clone(), 0);
    let mut perms = vec![id];
    let mut reps = vec![GenWord::identity()];
    let mut right: Vec<[u16; 4]> = vec![[0; 4]];
    let mut queue = VecDeque::from([0usize]);
    while let Some(i) = queue.pop_front() {
        for (gi, (x, g)) in gens.iter().enumerate() {
            let c = n.canonical_coset_rep(&perm::compose(&perms[i], g));
            let j = match index.get(&c) {
                Some(&j) => j,
                None => {
                    let j = perms.len();
                    index.insert(c.clone(), j);
                    perms.push(c);
                    reps.push(reps[i].multiply(&GenWord::gen(*x)));
                    right.push([0; 4]);
                    queue.push_back(j);
                    j
                }
            };
            right[i][gi] = j as u16;
        }
    }
    (perms, reps, right)
}

/// Q₁ ⊆ Q ≀ C₂ with ω: Q₁ → Q, and the transversal `rep: Q → S′`.
#[derive(Clone, Debug)]
pub struct BranchStructure {
    /// Sorted triples `(π(g@1), π(g@2), act(g))`.
    pub q1: Vec<(u8, u8, bool)>,
    omega: HashMap<(u8, u8, bool), u8>,
    pub rep: Vec<GenWord>,
}

impl BranchStructure {
    pub fn get() -> &'static BranchStructure {
        static B: OnceLock<BranchStructure> = OnceLock::new();
        B.get_or_init(|| Self::build(QuotientStructure::get()).expect("branch structure"))
    }

    /// Every element of G is `reps[i]·k′` with `k′ ∈ K′ ⊆ K×K`, and the triple
    /// only depends on the class mod K×K, so the 1024 representatives cover Q₁.
    pub fn build(qs: &QuotientStructure) -> Result<BranchStructure, QuotientError> {
        let mut omega: HashMap<(u8, u8, bool), u8> = HashMap::new();
        for g in &qs.reps {
            let t = triple(qs, g);
            let v = qs.pi(g);
            if let Some(&old) = omega.get(&t) {
                if old != v {
                    return Err(QuotientError::Conflict(g.to_string()));
                }
            }
            omega.insert(t, v);
        }
        let mut q1: Vec<_> = omega.keys().copied().collect();
        q1.sort();
        let s = tree::default_s();
        let rep = (0..Q_ORDER as u8)
            .map(|q| s.iter().find(|x| qs.pi(x) == q).cloned().unwrap_or_else(|| qs.q.reps[q as usize].clone()))
            .collect();
        Ok(BranchStructure { q1, omega, rep })
    }

    pub fn omega(&self, t: (u8, u8, bool)) -> Option<u8> {
        self.omega.get(&t).copied()
    }

    /// All triples in Q₁ with `ω = q`.
    pub fn fiber(&self, q: u8) -> Vec<(u8, u8, bool)> {
        self.q1.iter().copied().filter(|t| self.omega[t] == q).collect()
    }
}

pub fn triple(qs: &QuotientStructure, g: &GenWord) -> (u8, u8, bool) {
    let d = decompose(g);
    (qs.pi(&d.first), qs.pi(&d.second), d.active)
}

fn germ_value(g: Gen) -> u32 {
    match g {
        Gen::A => 0,
        Gen::B => 1,
        Gen::C => 2,
        Gen::D => 3,
    }
}

fn state_at(g: Option<Gen>, v: u32, n: u32) -> Option<Gen> {
    let mut cur = g;
    for i in (0..n).rev() {
        let Some(x) = cur else { return None };
        let bit = (v >> i) & 1;
        cur = match (x, bit) {
            (Gen::A, _) | (Gen::D, 0) => None,
            (Gen::B, 0) | (Gen::C, 0) => Some(Gen::A),
            (Gen::B, _) => Some(Gen::C),
            (Gen::C, _) => Some(Gen::D),
            (Gen::D, _) => Some(Gen::B),
        };
    }
    cur
}

/// Permutation of generator `x` on the `2^n · 4` points `(v, k)`, where `v`
/// is a level-`n` vertex and `k ∈ C₂×C₂` the accumulated germ.
pub fn germ_generator(x: Gen, n: u32) -> Perm {
    let lp = &tree::generator_perms(n)[x.index()];
    let mut p = Vec::with_capacity(4 << n);
    for v in 0..1u32 << n {
        let add = state_at(Some(x), v, n).map(germ_value).unwrap_or(0);
        for k in 0..4 {
            p.push(lp[v as usize] * 4 + (k ^ add));
        }
    }
    p
}

pub fn germ_group(n: u32) -> Result<PermGroup, QuotientError> {
    if n > 4 {
        return Err(QuotientError::GermCap(n));
    }
    let gens: Vec<Perm> = Gen::ALL.iter().map(|&x| germ_generator(x, n)).collect();
    Ok(PermGroup::new(4 << n, &gens))
}

/// The transversal of G′ in G used for conjugacy width.
pub fn standard_transversal() -> Vec<GenWord> {
    let (a, b, c, d) = (w("a"), w("b"), w("c"), w("d"));
    vec![
        GenWord::identity(),
        a.clone(),
        d.conjugate(&a).multiply(&a),
        d.conjugate(&a),
        b.clone(),
        a.multiply(&b.conjugate(&a)),
        c.multiply(&a.conjugate(&d)),
        b.multiply(&d.conjugate(&a)),
    ]
}

/// True iff `t` has `[G:G′]` elements lying in pairwise distinct G′-cosets.
pub fn transversal_check(qs: &QuotientStructure, t: &[GenWord]) -> bool {
    if t.len() != 8 {
        return false;
    }
    let imgs: Vec<usize> = t.iter().map(|g| qs.tau(g)).collect();
    for i in 0..imgs.len() {
        for j in 0..i {
            if qs.derived.contains(qs.mul(imgs[i], qs.inverse(imgs[j]))) {
                return false;
            }
        }
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn level_orders() {
        let orders: Vec<BigUint> = (1..=3).map(|m| level_quotient(m).unwrap().group.order()).collect();
        assert_eq!(orders, [2u32, 8, 128].map(BigUint::from));
        assert!(level_quotient(13).is_err());
    }

    #[test]
    fn tower_and_stable_level() {
        let m = stable_level().unwrap();
        assert!(build_tower(1).unwrap().kprime_index() < BigUint::from(QUOTIENT_ORDER));
        for l in [m, m + 1] {
            let t = build_tower(l).unwrap();
            assert_eq!(t.indices(), expected_indices());
            assert_eq!(t.kprime_index(), BigUint::from(QUOTIENT_ORDER));
        }
        let prev = build_tower(m - 1).unwrap();
        assert_ne!(prev.kprime_index(), BigUint::from(QUOTIENT_ORDER));
    }

    #[test]
    fn quotient_masks() {
        let qs = QuotientStructure::get();
        assert_eq!(qs.tau(&GenWord::identity()), 0);
        assert_eq!(qs.derived.len(), DERIVED_ORDER);
        assert_eq!(qs.k.len(), 64);
        assert_eq!(qs.kxk.len(), 16);
        assert!(qs.kxk.is_subset(&qs.k) && qs.k.is_subset(&qs.derived));
        let t1 = qs.tau(&k1());
        assert!(qs.k.contains(t1) && t1 != 0);
        for g in ["(ad)^4", "(ac)^8", "(ab)^16"] {
            assert_eq!(qs.tau(&w(g)), 0);
        }
        let mut alt = ElemSet::default();
        let gens: Vec<usize> = [k1(), k2(), k3(), w("(ad)^2")].iter().map(|g| qs.tau(g)).collect();
        let mut frontier = vec![0usize];
        alt.insert(0);
        while let Some(x) = frontier.pop() {
            for &g in &gens {
                let y = qs.mul(x, g);
                if !alt.contains(y) {
                    alt.insert(y);
                    frontier.push(y);
                }
            }
        }
        assert_eq!(alt, qs.derived);
        for i in 0..QUOTIENT_ORDER {
            let t = triple(qs, &qs.reps[i]);
            assert_eq!(qs.kxk.contains(i), t == (0, 0, false));
        }
    }

    #[test]
    fn q_group() {
        let qs = QuotientStructure::get();
        for g in ["ab", "abd", "dacab", "cadabacad"] {
            let g = w(g);
            assert_eq!(qs.q.image(&g), qs.pi(&g));
        }
        assert_eq!(qs.rho_prime.iter().filter(|&&x| x != u8::MAX).max(), Some(&7));
    }

    #[test]
    fn branch_structure() {
        let qs = QuotientStructure::get();
        let b = BranchStructure::get();
        assert_eq!(b.q1.len(), 64);
        let (e, pb, pa, pd) = (0u8, qs.pi(&w("b")), qs.pi(&w("a")), qs.pi(&w("d")));
        assert_eq!(b.omega((e, pb, false)), Some(pd));
        assert_eq!(b.omega((e, e, true)), Some(pa));
        for q in 0..Q_ORDER as u8 {
            assert_eq!(qs.pi(&b.rep[q as usize]), q);
            assert_eq!(b.fiber(q).len(), 4);
        }
    }

    #[test]
    fn pbar_examples() {
        let qs = QuotientStructure::get();
        assert_eq!(qs.pbar(0, &GenWord::identity()).unwrap(), qs.rho_prime[0]);
        let v = qs.pbar(qs.tau(&k3()), &GenWord::identity()).unwrap();
        assert_eq!(v, qs.rho_prime[qs.tau(&k1())]);
        assert_ne!(v, qs.rho_prime[0]);
        assert!(qs.pbar(qs.tau(&w("a")), &GenWord::identity()).is_err());
    }

    #[test]
    fn germ_groups() {
        assert_eq!(germ_group(0).unwrap().order(), BigUint::from(4u32));
        assert_eq!(germ_group(4).unwrap().order(), BigUint::from(1u64 << 26));
        assert!(perm::is_identity(&germ_generator(Gen::A, 0)));
        assert!(germ_group(5).is_err());
    }

    #[test]
    fn transversals() {
        let qs = QuotientStructure::get();
        let mut t = standard_transversal();
        assert!(transversal_check(qs, &t));
        assert!(!transversal_check(qs, &[GenWord::identity()]));
        t[4] = k1();
        assert!(!transversal_check(qs, &t));
    }
}
