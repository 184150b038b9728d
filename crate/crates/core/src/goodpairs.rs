//! Good pairs `(q, γ)` with `q ∈ G′/K′`, the successor construction and the
//! finite verification formulas built on it.

use std::collections::HashMap;
use std::ops::ControlFlow;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Mutex, OnceLock};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::constraints::{
    is_active, reduce_constraint, reduce_constraint4, reduced_orbit, Certificate, Constraint, ConstraintError, OrbitTable,
};
use crate::equations::{
    normal_form, phi_gamma, r_n, x_vars, Atom, Equation, EquationError, Letter, MixedConst, NormalKind,
    Substitution, Tracked, Var, WreathPair, SYM_G, SYM_G1, SYM_G2,
};
use crate::quotients::{BranchStructure, QGroup, QuotientError, QuotientStructure, DERIVED_ORDER, Q_ORDER};
use crate::tree;
use crate::words::GenWord;

#[derive(Clone, Debug, Error, PartialEq, Eq)]
pub enum GoodPairError {
    #[error("{0} is not in the derived subgroup")]
    NotInDerived(String),
    #[error("empty fiber of ω over {0}")]
    EmptyFiber(u8),
    #[error("Φ_γ coordinates share no variable for γ = {0:?}")]
    NoSharedVariable(Constraint),
    #[error("unexpected normal form {0}")]
    Form(String),
    #[error("no active good constraint for class {0}")]
    NoGoodConstraint(usize),
    #[error("no successor for class {q} and {rank:?} constraint {gamma}")]
    MissingSuccessor { rank: Rank, q: usize, gamma: u8 },
    #[error(transparent)]
    Constraint(#[from] ConstraintError),
    #[error(transparent)]
    Equation(#[from] EquationError),
    #[error(transparent)]
    Quotient(#[from] QuotientError),
}

/// A subset of G′/K′, bit `i` standing for the `i`-th derived class.
pub type ClassSet = u128;

pub const FULL: ClassSet = u128::MAX;

pub fn bits(s: ClassSet) -> impl Iterator<Item = usize> {
    (0..DERIVED_ORDER).filter(move |&i| s >> i & 1 == 1)
}

/// The 128 classes of G′/K′ with their multiplication.
pub struct Classes {
    /// Index in G/K′ of each class.
    pub elems: Vec<usize>,
    index: Vec<u8>,
    mult: Vec<[u8; DERIVED_ORDER]>,
    inv: Vec<u8>,
    comm: Vec<ClassSet>,
    /// `(q@1, q@2)` as Q-labels.
    pub states: Vec<(u8, u8)>,
    /// ρ′-label of each class.
    pub rho_prime: Vec<u8>,
    /// Classes with a given ρ′-label.
    pub fibers: Vec<ClassSet>,
}

impl Classes {
    pub fn get() -> &'static Classes {
        static C: OnceLock<Classes> = OnceLock::new();
        C.get_or_init(|| Classes::build(QuotientStructure::get()))
    }

    pub fn build(qs: &QuotientStructure) -> Classes {
        let elems = qs.derived_elements();
        let mut index = vec![u8::MAX; qs.order()];
        for (i, &e) in elems.iter().enumerate() {
            index[e] = i as u8;
        }
        let mult = elems
            .iter()
            .map(|&x| {
                let mut row = [0u8; DERIVED_ORDER];
                for (j, &y) in elems.iter().enumerate() {
                    row[j] = index[qs.mul(x, y)];
                }
                row
            })
            .collect();
        let inv = elems.iter().map(|&x| index[qs.inverse(x)]).collect();
        let mut comm = vec![0u128; Q_ORDER * Q_ORDER];
        for r in 0..qs.order() {
            for s in 0..qs.order() {
                let c = index[qs.comm(r, s)];
                debug_assert_ne!(c, u8::MAX);
                comm[qs.rho[r] as usize * Q_ORDER + qs.rho[s] as usize] |= 1u128 << c;
            }
        }
        let states = elems
            .iter()
            .map(|&e| {
                let d = tree::decompose(&qs.reps[e]);
                (qs.pi(&d.first), qs.pi(&d.second))
            })
            .collect();
        let rho_prime: Vec<u8> = elems.iter().map(|&e| qs.rho_prime[e]).collect();
        let mut fibers = vec![0u128; 1 + *rho_prime.iter().max().unwrap() as usize];
        for (i, &r) in rho_prime.iter().enumerate() {
            fibers[r as usize] |= 1u128 << i;
        }
        Classes { elems, index, mult, inv, comm, states, rho_prime, fibers }
    }

    /// Class index of a G/K′ element, if it lies in G′.
    pub fn class_of(&self, e: usize) -> Option<usize> {
        self.index.get(e).copied().filter(|&i| i != u8::MAX).map(usize::from)
    }

    pub fn class_of_word(&self, g: &GenWord) -> Option<usize> {
        self.class_of(QuotientStructure::get().tau(g))
    }

    pub fn mul(&self, i: usize, j: usize) -> usize {
        self.mult[i][j] as usize
    }

    pub fn inverse(&self, i: usize) -> usize {
        self.inv[i] as usize
    }

    /// `{[r,s] : ρ(r) = a, ρ(s) = b}` over all lifts in G/K′.
    pub fn commutator_value_set(&self, a: u8, b: u8) -> ClassSet {
        self.comm[a as usize * Q_ORDER + b as usize]
    }

    pub fn product(&self, s: ClassSet, t: ClassSet) -> ClassSet {
        let mut out = 0u128;
        for x in bits(s) {
            for y in bits(t) {
                out |= 1u128 << self.mult[x][y];
            }
            if out == FULL {
                break;
            }
        }
        out
    }

    pub fn inverse_set(&self, s: ClassSet) -> ClassSet {
        bits(s).fold(0, |acc, x| acc | 1u128 << self.inv[x])
    }

    /// Classes `q` such that `R_n·q` has a solution in G/K′ with
    /// `ρ(X_i) = γ_i`, i.e. `q⁻¹ ∈ S₁⋯S_n`.
    pub fn good_set(&self, gamma: &[u8]) -> ClassSet {
        let key = (gamma.len() as u64) << 56 | u64::from(pack_long(gamma));
        if let Some(&s) = good_cache().lock().unwrap().get(&key) {
            return s;
        }
        let mut acc = 1u128;
        for p in gamma.chunks(2) {
            acc = self.product(acc, self.commutator_value_set(p[0], p[1]));
        }
        let s = self.inverse_set(acc);
        good_cache().lock().unwrap().insert(key, s);
        s
    }

    pub fn is_good(&self, q: usize, gamma: &[u8]) -> bool {
        self.good_set(gamma) >> q & 1 == 1
    }

    /// `p̄_x(q)` as a ρ′-label.
    pub fn pbar(&self, q: usize, x: &GenWord) -> u8 {
        QuotientStructure::get().pbar(self.elems[q], x).expect("derived class")
    }
}

fn pack_long(t: &[u8]) -> u64 {
    t.iter().fold(0u64, |acc, &x| acc << 4 | u64::from(x))
}

fn good_cache() -> &'static Mutex<HashMap<u64, ClassSet>> {
    static C: OnceLock<Mutex<HashMap<u64, ClassSet>>> = OnceLock::new();
    C.get_or_init(|| Mutex::new(HashMap::new()))
}

/// Genus of the orbit table: Red⁴ (`n = 2`) or Red (`n = 3`).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Rank {
    Two,
    Three,
}

impl Rank {
    pub fn n(self) -> usize {
        match self {
            Rank::Two => 2,
            Rank::Three => 3,
        }
    }

    pub fn table(self) -> &'static OrbitTable {
        OrbitTable::get(self.n()).expect("orbit table")
    }
}

/// Good-pair bitmaps for every representative in Red⁴ and Red.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GoodPairTable {
    pub red4: Vec<ClassSet>,
    pub red: Vec<ClassSet>,
}

impl GoodPairTable {
    pub fn get() -> &'static GoodPairTable {
        static T: OnceLock<GoodPairTable> = OnceLock::new();
        T.get_or_init(|| GoodPairTable::build(Classes::get()))
    }

    pub fn build(c: &Classes) -> GoodPairTable {
        let col = |r: Rank| r.table().representatives().par_iter().map(|g| c.good_set(g)).collect();
        GoodPairTable { red4: col(Rank::Two), red: col(Rank::Three) }
    }

    pub fn column(&self, rank: Rank) -> &[ClassSet] {
        match rank {
            Rank::Two => &self.red4,
            Rank::Three => &self.red,
        }
    }

    pub fn column_mut(&mut self, rank: Rank) -> &mut Vec<ClassSet> {
        match rank {
            Rank::Two => &mut self.red4,
            Rank::Three => &mut self.red,
        }
    }

    pub fn is_good(&self, rank: Rank, gamma: u8, q: usize) -> bool {
        self.column(rank)[gamma as usize] >> q & 1 == 1
    }

    /// Ids of active representatives.
    pub fn active_ids(rank: Rank) -> Vec<u8> {
        let q = &QuotientStructure::get().q;
        let t = rank.table();
        (0..t.orbit_count() as u8).filter(|&i| is_active(q, &t.representative(i))).collect()
    }

    /// Union of the good sets over the active representatives.
    pub fn active_coverage(&self, rank: Rank) -> ClassSet {
        Self::active_ids(rank).iter().fold(0, |acc, &i| acc | self.column(rank)[i as usize])
    }

    /// Least active representative good for `q`.
    pub fn first_active_good(&self, rank: Rank, q: usize) -> Option<u8> {
        Self::active_ids(rank).into_iter().find(|&i| self.is_good(rank, i, q))
    }
}

/// Index of `Y_{ℓ,s}` in a constraint on the state variables.
fn y_index(v: Var) -> usize {
    2 * (v.name as usize - 1) + (v.sub as usize - 1)
}

fn y_var(i: usize) -> Var {
    Var::y(i as u32 / 2 + 1, (i % 2) as u8 + 1)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Op {
    Var(usize, bool),
    State(usize, bool),
    Fixed(u8),
}

/// A word over the state variables and `𝔤₁, 𝔤₂`, compiled for evaluation in Q.
#[derive(Clone, Debug, PartialEq, Eq)]
struct Prog(Vec<Op>);

impl Prog {
    fn compile(e: &Equation<MixedConst>, var_index: impl Fn(Var) -> usize) -> Prog {
        let qs = QuotientStructure::get();
        let mut ops = Vec::new();
        for l in e.letters() {
            match l {
                Letter::Var(v, inv) => ops.push(Op::Var(var_index(*v), *inv)),
                Letter::Const(c) => {
                    for a in c.atoms() {
                        ops.push(match a {
                            Atom::G(g) => Op::Fixed(qs.pi(g)),
                            Atom::Sym(s, inv) if *s == SYM_G1 => Op::State(0, *inv),
                            Atom::Sym(s, inv) if *s == SYM_G2 => Op::State(1, *inv),
                            Atom::Sym(..) => panic!("unsplit constant in {e}"),
                        });
                    }
                }
            }
        }
        Prog(ops)
    }

    fn eval(&self, q: &QGroup, assign: &[u8], states: [u8; 2]) -> u8 {
        self.0.iter().fold(0u8, |acc, op| {
            let x = match *op {
                Op::Var(i, inv) => (assign[i], inv),
                Op::State(i, inv) => (states[i], inv),
                Op::Fixed(x) => (x, false),
            };
            q.mul(acc, if x.1 { q.inverse(x.0) } else { x.0 })
        })
    }
}

/// `Φ_γ(R_n·𝔤)` for the activity pattern of `γ`.
pub fn phi_r(gamma: &[u8]) -> Result<WreathPair<MixedConst>, GoodPairError> {
    let q = &QuotientStructure::get().q;
    let e = r_n::<MixedConst>(&x_vars(gamma.len())).mul(&Equation::constant(MixedConst::sym(SYM_G)));
    Ok(phi_gamma(&e, |v| q.reps[gamma[v.name as usize - 1] as usize].activity())?)
}

/// The elimination of one shared variable `Y₀` followed by the normal form,
/// renamed to `R_g(Y_{1,1},…,Y_{g,2})·𝔤₂^{Y_{g+1,1}}·𝔤₁`, or to
/// `R_g(Y_{1,1},…,Y_{g,2})·𝔤₂𝔤₁` for forms without conjugator.
#[derive(Clone, Debug)]
pub struct PipelineForm {
    pub genus: usize,
    pub conjugator: bool,
    /// Which relabelling of `ℰ` was fed to the normal form.
    pub variant: usize,
    pub pair: WreathPair<MixedConst>,
    /// The eliminated letter: `Y₀` or `Y₀⁻¹` as it occurs in the first coordinate.
    pub y0: Var,
    pub y0_inverted: bool,
    /// `ℓ`: the letter `Y₀^{±1}` of the first coordinate goes to `w₂𝔤₂w₁`.
    pub elimination: Substitution<MixedConst>,
    /// `ℰ = v₁w₂𝔤₂w₁v₂𝔤₁`.
    pub reduced: Equation<MixedConst>,
    /// Normal form followed by a renaming permuting the state variables.
    pub chain: Tracked<MixedConst>,
    pub normal: Equation<MixedConst>,
    coords: [Prog; 2],
    /// `chain⁻¹` of `Y_{1,1}, …, Y_{g,2}` and of the conjugator, if any.
    pullback: Vec<Prog>,
}

/// Number of relabellings tried per eliminated variable. The normal form of a
/// quadratic equation is unique only up to automorphisms fixing it, and the
/// conjugator value depends on that choice.
pub const NF_VARIANTS: usize = 3;

/// Relabelling of the variables of `e`: variant `k` rotates the sorted list
/// by `k mod m` and reverses it when `(k / m)` is odd.
fn variant_order(e: &Equation<MixedConst>, k: usize) -> Tracked<MixedConst> {
    let vars: Vec<Var> = e.variables().into_iter().collect();
    let m = vars.len().max(1);
    let mut perm: Vec<Var> = vars.iter().cycle().skip(k % m).take(vars.len()).copied().collect();
    if (k / m) % 2 == 1 {
        perm.reverse();
    }
    let map: Vec<(Var, Var)> = vars.iter().copied().zip(perm).collect();
    let back: Vec<(Var, Var)> = map.iter().map(|&(a, b)| (b, a)).collect();
    Tracked::new(Substitution::rename(&map), Substitution::rename(&back))
}

/// `R_g(Y…)·𝔤₂^{Y_{g+1,1}}·𝔤₁`, or `R_g(Y…)·𝔤₂𝔤₁` without conjugator.
pub fn target_form(genus: usize, conjugator: bool) -> Equation<MixedConst> {
    let vars: Vec<Var> = (0..2 * genus).map(y_var).collect();
    let g2 = Equation::constant(MixedConst::sym(SYM_G2));
    let g1 = Equation::constant(MixedConst::sym(SYM_G1));
    if conjugator {
        let z = Var::y(genus as u32 + 1, 1);
        Equation::product([&r_n(&vars), &g2.conj(&Equation::var(z)), &g1])
    } else {
        Equation::product([&r_n(&vars), &g2, &g1])
    }
}

impl PipelineForm {
    pub fn build(
        pair: &WreathPair<MixedConst>,
        y0: Var,
        genus: usize,
        conjugator: bool,
        variant: usize,
    ) -> Result<PipelineForm, GoodPairError> {
        let (v, w) = (&pair.first, &pair.second);
        let (i, inv) = v.occurrences(y0)[0];
        let (j, inv_w) = w.occurrences(y0)[0];
        if inv == inv_w {
            return Err(GoodPairError::Form(format!("{y0} occurs with equal signs in {v} and {w}")));
        }
        let (v1, v2) = (v.slice(0, i), v.slice(i + 1, v.len()));
        let (w1, w2) = (w.slice(0, j), w.slice(j + 1, w.len()));
        // w₂ already ends in 𝔤₂.
        let img = w2.mul(&w1);
        let elimination = Substitution::from_pairs([(y0, if inv { img.inv() } else { img.clone() })]);
        let reduced = Equation::product([&v1, &img, &v2]);
        debug_assert_eq!(elimination.apply(v), reduced);
        let order = variant_order(&reduced, variant);
        let nf = normal_form(&order.forward.apply(&reduced))?;
        let bad = || GoodPairError::Form(nf.word.to_string());
        if nf.kind != NormalKind::Oriented || nf.genus != genus {
            return Err(bad());
        }
        let letters = nf.word.letters();
        let mut map = Vec::new();
        for k in 0..genus {
            for (s, l) in letters[4 * k..4 * k + 2].iter().enumerate() {
                let Letter::Var(a, _) = l else { return Err(bad()) };
                map.push((*a, y_var(2 * k + s)));
            }
        }
        if conjugator {
            let Some(Letter::Var(z, _)) = letters.get(4 * genus) else { return Err(bad()) };
            map.push((*z, Var::y(genus as u32 + 1, 1)));
        }
        // Complete to a permutation of all state variables.
        let mut all: Vec<Var> = v.variables().union(&w.variables()).copied().collect();
        all.sort();
        let rest_src: Vec<Var> = all.iter().copied().filter(|x| !map.iter().any(|m| m.0 == *x)).collect();
        let rest_dst: Vec<Var> = all.iter().copied().filter(|x| !map.iter().any(|m| m.1 == *x)).collect();
        map.extend(rest_src.into_iter().zip(rest_dst));
        let back: Vec<(Var, Var)> = map.iter().map(|&(a, b)| (b, a)).collect();
        let rename = Tracked::new(Substitution::rename(&map), Substitution::rename(&back));
        let chain = order.then(&nf.subst).then(&rename);
        let normal = rename.forward.apply(&nf.word);
        if normal != target_form(genus, conjugator) {
            return Err(GoodPairError::Form(normal.to_string()));
        }
        let coords = [Prog::compile(&pair.first, y_index), Prog::compile(&pair.second, y_index)];
        let conj = conjugator.then(|| Var::y(genus as u32 + 1, 1));
        let pullback = (0..2 * genus)
            .map(y_var)
            .chain(conj)
            .map(|t| Prog::compile(&chain.inverse.image(t), y_index))
            .collect();
        Ok(PipelineForm {
            genus,
            conjugator,
            variant,
            pair: pair.clone(),
            y0,
            y0_inverted: inv,
            elimination,
            reduced,
            chain,
            normal,
            coords,
            pullback,
        })
    }

    /// One form per variable shared by both coordinates of `Φ_γ(R_n𝔤)`.
    pub fn all(gamma: &[u8]) -> Result<Vec<PipelineForm>, GoodPairError> {
        let pair = phi_r(gamma)?;
        Self::for_pair(&pair, gamma, gamma.len() - 1, true)
    }

    fn for_pair(
        pair: &WreathPair<MixedConst>,
        gamma: &[u8],
        genus: usize,
        conjugator: bool,
    ) -> Result<Vec<PipelineForm>, GoodPairError> {
        let shared: Vec<Var> = pair.first.variables().intersection(&pair.second.variables()).copied().collect();
        if shared.is_empty() {
            return Err(GoodPairError::NoSharedVariable(gamma.to_vec()));
        }
        let mut out = Vec::new();
        for y in shared {
            for k in 0..NF_VARIANTS {
                out.push(PipelineForm::build(pair, y, genus, conjugator, k)?);
            }
        }
        Ok(out)
    }

    /// Both coordinates of `Φ_γ(R_n𝔤)` vanish in Q (the Γ₂ condition).
    pub fn coordinates_vanish(&self, q: &QGroup, gamma1: &[u8], states: [u8; 2]) -> bool {
        self.coords.iter().all(|p| p.eval(q, gamma1, states) == 0)
    }

    /// `γ′ ∘ chain⁻¹` on the normal-form variables; the conjugator comes last.
    pub fn transport(&self, q: &QGroup, gamma1: &[u8], states: [u8; 2]) -> Constraint {
        self.pullback.iter().map(|p| p.eval(q, gamma1, states)).collect()
    }

    /// The chain applied to both coordinates: `(R_{2n−1}·𝔤₂^{Y_{2n,1}}·𝔤₁, ε)`.
    pub fn symbolic_images(&self) -> (Equation<MixedConst>, Equation<MixedConst>) {
        let f = self.elimination.then(&self.chain.forward);
        (f.apply(&self.pair.first), f.apply(&self.pair.second))
    }

    pub fn describe(&self) -> String {
        let render = |s: &Substitution<MixedConst>| {
            s.support().map(|v| format!("{v}->{}", s.image(*v))).collect::<Vec<_>>().join(";")
        };
        format!("{}|{}|{}", render(&self.elimination), render(&self.chain.forward), render(&self.chain.inverse))
    }
}

/// The conjugator set `S` used by the successor construction.
pub fn conjugators() -> &'static [GenWord] {
    static S: OnceLock<Vec<GenWord>> = OnceLock::new();
    S.get_or_init(tree::default_s)
}

/// A constraint surviving the filters of the successor construction.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Candidate {
    /// Index of the [`PipelineForm`] (choice of `Y₀`).
    pub form: usize,
    /// `γ′` on `Y_{1,1}, …, Y_{2n,2}`.
    pub state_constraint: Constraint,
    /// `γ″` on `Y_{1,1}, …, Y_{2n−1,2}`.
    pub successor: Constraint,
    /// `k` in the extra substitution `Y_{2n,1} ↦ 𝔤₂^k·Y_{2n,1}`, which fixes
    /// `𝔤₂^{Y_{2n,1}}`.
    pub shift: u8,
    /// Index of `rep(γ″(Y_{2n,1}))` in [`conjugators`].
    pub x: usize,
}

/// Γ₁ fibers of the coordinates of `γ`.
pub fn gamma1_fibers(gamma: &[u8]) -> Result<Vec<Vec<(u8, u8, bool)>>, GoodPairError> {
    let b = BranchStructure::get();
    gamma
        .iter()
        .map(|&g| {
            let f = b.fiber(g);
            if f.is_empty() {
                Err(GoodPairError::EmptyFiber(g))
            } else {
                Ok(f)
            }
        })
        .collect()
}

/// Every state constraint in Γ₁(γ).
pub fn gamma1(gamma: &[u8]) -> Result<Vec<Constraint>, GoodPairError> {
    let fibers = gamma1_fibers(gamma)?;
    let mut out = vec![Vec::new()];
    for f in &fibers {
        out = out
            .into_iter()
            .flat_map(|prefix: Constraint| {
                f.iter().map(move |t| {
                    let mut p = prefix.clone();
                    p.extend([t.0, t.1]);
                    p
                })
            })
            .collect();
    }
    Ok(out)
}

/// The candidates `(γ″, x)` for the class `q` and the forms of `γ`.
pub fn candidates(forms: &[PipelineForm], gamma: &[u8], q: usize) -> Result<Vec<Candidate>, GoodPairError> {
    let mut out = Vec::new();
    scan_candidates(forms, gamma, q, |c| {
        out.push(c);
        ControlFlow::<()>::Continue(())
    })?;
    Ok(out)
}

/// Visits candidates in a fixed order until `f` breaks.
fn scan_candidates<B>(
    forms: &[PipelineForm],
    gamma: &[u8],
    q: usize,
    mut f: impl FnMut(Candidate) -> ControlFlow<B>,
) -> Result<Option<B>, GoodPairError> {
    let qg = &QuotientStructure::get().q;
    let (s1, s2) = Classes::get().states[q];
    let rep = &BranchStructure::get().rep;
    let s = conjugators();
    let Some(first) = forms.first() else { return Ok(None) };
    for g1 in gamma1(gamma)? {
        if !first.coordinates_vanish(qg, &g1, [s1, s2]) {
            continue;
        }
        for (fi, form) in forms.iter().enumerate() {
            let mut t = form.transport(qg, &g1, [s1, s2]);
            let z = t.pop().unwrap();
            if !is_active(qg, &t) {
                continue;
            }
            // γ″ ∘ (Z ↦ 𝔤₂^{−k}Z) on the conjugator.
            let mut zk = z;
            for k in 0..element_order(qg, s2) {
                if let Some(x) = s.iter().position(|w| *w == rep[zk as usize]) {
                    let c = Candidate { form: fi, state_constraint: g1.clone(), successor: t.clone(), shift: k, x };
                    if let ControlFlow::Break(b) = f(c) {
                        return Ok(Some(b));
                    }
                }
                zk = qg.mul(qg.inverse(s2), zk);
            }
        }
    }
    Ok(None)
}

fn element_order(q: &QGroup, x: u8) -> u8 {
    let mut k = 1;
    let mut y = x;
    while y != 0 {
        y = q.mul(y, x);
        k += 1;
    }
    k
}

/// The substitution `Y ↦ 𝔤₂^k·Y` fixing `𝔤₂^Y`.
pub fn shift_substitution(y: Var, k: u8) -> Tracked<MixedConst> {
    let g2 = Equation::constant(MixedConst::sym(SYM_G2));
    let p = Equation::product(std::iter::repeat(&g2).take(k as usize));
    Tracked::elementary(&[(y, p, false, Equation::identity())])
}

/// All candidates for `(q, γ)` together with the forms they refer to.
pub fn gamma_pipeline(q: usize, gamma: &[u8]) -> Result<(Vec<PipelineForm>, Vec<Candidate>), GoodPairError> {
    let forms = PipelineForm::all(gamma)?;
    let c = candidates(&forms, gamma, q)?;
    Ok((forms, c))
}

/// The chosen successor of a good pair `(q, γ)`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SuccessorEntry {
    pub rank: Rank,
    /// Red⁴ or Red id of the source constraint.
    pub gamma: u8,
    pub q: u8,
    /// Red id of the reduced successor constraint.
    pub target: u8,
    /// Index of the conjugator in [`conjugators`].
    pub x: u8,
    pub y0: String,
    /// Relabelling variant of the normal form.
    pub variant: u8,
    /// Power of `𝔤₂` premultiplied to the conjugator.
    pub shift: u8,
    pub state_constraint: Constraint,
    /// The successor constraint before reduction.
    pub successor: Constraint,
    /// SHA-256 of the elimination, normal form and reduction moves.
    pub chain_hash: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct SuccessorTable {
    pub entries: Vec<SuccessorEntry>,
}

impl SuccessorTable {
    pub fn lookup(&self, rank: Rank, gamma: u8, q: usize) -> Option<&SuccessorEntry> {
        self.entries
            .binary_search_by(|e| (e.rank, e.gamma, e.q as usize).cmp(&(rank, gamma, q)))
            .ok()
            .map(|i| &self.entries[i])
    }
}

/// Outcome of the successor verification; `failure` is `(rank, q, γ)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SuccessorReport {
    pub ok: bool,
    pub table: SuccessorTable,
    pub failure: Option<(Rank, usize, u8)>,
}

pub fn chain_hash(form: &PipelineForm, shift: u8, cert: &Certificate) -> String {
    let mut h = Sha256::new();
    h.update(form.describe().as_bytes());
    h.update(format!("|shift{shift}").as_bytes());
    for m in &cert.moves {
        h.update(b"|");
        h.update(m.name().as_bytes());
    }
    hex::encode(h.finalize())
}

/// The chosen successor of a good pair, or `None` if no candidate qualifies.
pub fn successor_for(
    table: &GoodPairTable,
    rank: Rank,
    gid: u8,
    q: usize,
    forms: &[PipelineForm],
) -> Result<Option<SuccessorEntry>, GoodPairError> {
    let classes = Classes::get();
    let qg = &QuotientStructure::get().q;
    let s = conjugators();
    let gamma = rank.table().representative(gid);
    let found = scan_candidates(forms, &gamma, q, |c| {
        let need = classes.fibers[classes.pbar(q, &s[c.x]) as usize];
        match reduced_orbit(qg, &c.successor) {
            Ok(id) if table.red[id as usize] & need == need => ControlFlow::Break(Ok((id, c))),
            Ok(_) => ControlFlow::Continue(()),
            Err(e) => ControlFlow::Break(Err(e)),
        }
    })?;
    let Some(found) = found else { return Ok(None) };
    let (target, c) = found?;
    let form = &forms[c.form];
    let red = reduce_constraint(qg, &c.successor)?;
    Ok(Some(SuccessorEntry {
        rank,
        gamma: gid,
        q: q as u8,
        target,
        x: c.x as u8,
        y0: form.y0.to_string(),
        variant: form.variant as u8,
        shift: c.shift,
        state_constraint: c.state_constraint,
        successor: c.successor,
        chain_hash: chain_hash(form, c.shift, &red.certificate),
    }))
}

/// Finds a successor for every good pair with an active source constraint.
pub fn verify_successors_with(table: &GoodPairTable, rank: Rank) -> Result<SuccessorReport, GoodPairError> {
    verify_successors_progress(table, rank, &|_, _| {})
}

/// As [`verify_successors_with`], reporting `(done, total)` source constraints.
pub fn verify_successors_progress(
    table: &GoodPairTable,
    rank: Rank,
    progress: &(dyn Fn(usize, usize) + Sync),
) -> Result<SuccessorReport, GoodPairError> {
    let ids = GoodPairTable::active_ids(rank);
    let done = AtomicUsize::new(0);
    let per_source: Vec<Result<(Vec<SuccessorEntry>, Option<usize>), GoodPairError>> = ids
        .par_iter()
        .map(|&gid| {
            let forms = PipelineForm::all(&rank.table().representative(gid))?;
            let mut out = Vec::new();
            for q in (0..DERIVED_ORDER).filter(|&q| table.is_good(rank, gid, q)) {
                match successor_for(table, rank, gid, q, &forms)? {
                    Some(e) => out.push(e),
                    None => return Ok((out, Some(q))),
                }
            }
            progress(done.fetch_add(1, Ordering::SeqCst) + 1, ids.len());
            Ok((out, None))
        })
        .collect();
    let mut entries = Vec::new();
    for (gid, r) in ids.iter().zip(per_source) {
        let (found, failure) = r?;
        entries.extend(found);
        if let Some(q) = failure {
            return Ok(SuccessorReport { ok: false, table: SuccessorTable { entries }, failure: Some((rank, q, *gid)) });
        }
    }
    Ok(SuccessorReport { ok: true, table: SuccessorTable { entries }, failure: None })
}

/// Successor entries for Red⁴ and Red, computed once.
pub fn successor_table() -> &'static Result<SuccessorTable, GoodPairError> {
    static T: OnceLock<Result<SuccessorTable, GoodPairError>> = OnceLock::new();
    T.get_or_init(|| {
        let mut entries = Vec::new();
        for rank in [Rank::Two, Rank::Three] {
            let r = verify_successors_with(GoodPairTable::get(), rank)?;
            if let Some((rank, q, gamma)) = r.failure {
                return Err(GoodPairError::MissingSuccessor { rank, q, gamma });
            }
            entries.extend(r.table.entries);
        }
        Ok(SuccessorTable { entries })
    })
}

pub fn verify_successors() -> bool {
    successor_table().is_ok()
}

/// `(τ(h), τ(f))` for all `⟨h, f⟩ ∈ K′`: the image of K′ under the state map,
/// generated by the states of `[k_i, k_j]` and closed under conjugation by
/// the generators and under products.
pub fn kprime_state_pairs() -> Vec<(usize, usize)> {
    use crate::quotients::{k1, k2, k3};
    use crate::words::Gen;
    let qs = QuotientStructure::get();
    let ks = [k1(), k2(), k3()];
    let mut gens = Vec::new();
    for i in 0..3 {
        for j in i + 1..3 {
            let d = tree::decompose(&GenWord::commutator(&ks[i], &ks[j]));
            debug_assert!(!d.active);
            gens.push((qs.tau(&d.first), qs.tau(&d.second)));
        }
    }
    let t = |g: Gen| qs.tau(&GenWord::gen(g));
    let (a, b, c, d) = (t(Gen::A), t(Gen::B), t(Gen::C), t(Gen::D));
    let conjugates = |(h, f): (usize, usize)| {
        [(f, h), (qs.conj(h, a), qs.conj(f, c)), (qs.conj(h, a), qs.conj(f, d)), (h, qs.conj(f, b))]
    };
    // Conjugation closure of the generators, then the generated subgroup.
    let mut normal: Vec<(usize, usize)> = Vec::new();
    let mut seen = std::collections::HashSet::new();
    let mut stack = gens;
    while let Some(p) = stack.pop() {
        if seen.insert(p) {
            normal.push(p);
            stack.extend(conjugates(p));
        }
    }
    let mut elems = vec![(0usize, 0usize)];
    let mut member: std::collections::HashSet<(usize, usize)> = elems.iter().copied().collect();
    let mut i = 0;
    while i < elems.len() {
        let (h, f) = elems[i];
        for &(x, y) in &normal {
            let p = (qs.mul(h, x), qs.mul(f, y));
            if member.insert(p) {
                elems.push(p);
            }
        }
        i += 1;
    }
    elems.sort();
    elems
}

/// Outcome of the K′ check; `failure` is the first offending state pair.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CwKReport {
    pub ok: bool,
    pub pairs: usize,
    pub failure: Option<(usize, usize)>,
}

pub fn cw_k_constraints() -> (Constraint, Constraint) {
    let qs = QuotientStructure::get();
    let p = |s: &str| qs.pi(&s.parse::<GenWord>().unwrap());
    (vec![0, 0, p("bad"), 0], vec![0, 0, 0, p("ca")])
}

/// Both `(τ(h), γ₁)` and `(τ(f), γ₂)` are good, via the Red⁴ ids in `table`,
/// for every `⟨h, f⟩ ∈ K′`, and both constraints are active.
pub fn verify_cw_k_with(table: &GoodPairTable, g1: &[u8], g2: &[u8]) -> Result<CwKReport, GoodPairError> {
    let classes = Classes::get();
    let qg = &QuotientStructure::get().q;
    let pairs = kprime_state_pairs();
    let id1 = reduce_constraint4(qg, g1)?.orbit;
    let id2 = reduce_constraint4(qg, g2)?.orbit;
    let active = is_active(qg, g1) && is_active(qg, g2);
    for &(h, f) in &pairs {
        let good = |x: usize, id: u8| classes.class_of(x).is_some_and(|c| table.is_good(Rank::Two, id, c));
        if !active || !good(h, id1) || !good(f, id2) {
            return Ok(CwKReport { ok: false, pairs: pairs.len(), failure: Some((h, f)) });
        }
    }
    Ok(CwKReport { ok: true, pairs: pairs.len(), failure: None })
}

pub fn verify_cw_k() -> bool {
    let (g1, g2) = cw_k_constraints();
    verify_cw_k_with(GoodPairTable::get(), &g1, &g2).is_ok_and(|r| r.ok)
}

/// `a^{X₁}⋯a^{X_k}·a·𝔤`.
pub fn conjugacy_equation(k: usize) -> Equation<MixedConst> {
    let a = Equation::constant(MixedConst::from_word(GenWord::gen(crate::words::Gen::A)));
    let mut e = Equation::identity();
    for i in 1..=k as u32 {
        e = e.mul(&a.conj(&Equation::var(Var::x(i))));
    }
    e.mul(&a).mul(&Equation::constant(MixedConst::sym(SYM_G)))
}

/// Forms of `Φ_γ(a^{X₁}⋯a^{X_k}a𝔤)` for an activity pattern (bit `i` for `X_{i+1}`).
pub fn conjugacy_forms(k: usize, pattern: u32) -> Result<Vec<PipelineForm>, GoodPairError> {
    let pair = phi_gamma(&conjugacy_equation(k), |v| pattern >> (v.name - 1) & 1 == 1)?;
    let genus = (k - 1) / 2;
    PipelineForm::for_pair(&pair, &[], genus, false)
}

/// A certified constraint for `a^{X₁}⋯a^{X₅}·a·g` with `τ(g)` in class `q`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConjugacyEntry {
    pub q: u8,
    pub gamma: Constraint,
    pub state_constraint: Constraint,
    pub y0: String,
    pub variant: u8,
    /// `γ′` on the variables of `R₂·(g@2)(g@1)` and its Red⁴ id.
    pub reduced_from: Constraint,
    pub target: u8,
    pub chain_hash: String,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConjugacyReport {
    pub ok: bool,
    pub entries: Vec<ConjugacyEntry>,
    pub failure: Option<usize>,
}

fn conjugacy_entry(
    table: &GoodPairTable,
    forms: &mut HashMap<u32, Vec<PipelineForm>>,
    q: usize,
) -> Result<Option<ConjugacyEntry>, GoodPairError> {
    let classes = Classes::get();
    let qs = QuotientStructure::get();
    let qg = &qs.q;
    let pa = qs.pi(&GenWord::gen(crate::words::Gen::A));
    let rho_q = qs.rho[classes.elems[q]];
    let (s1, s2) = classes.states[q];
    let need = classes.fibers[classes.pbar(q, &GenWord::identity()) as usize];
    let orbits4 = OrbitTable::get(2)?;
    for code in 0..(Q_ORDER as u32).pow(5) {
        let gamma: Constraint = (0..5).map(|i| (code >> (4 * (4 - i)) & 0xF) as u8).collect();
        let value = gamma.iter().fold(0u8, |acc, &x| qg.mul(acc, qg.conj(pa, x)));
        if qg.mul(qg.mul(value, pa), rho_q) != 0 {
            continue;
        }
        let pattern = gamma.iter().enumerate().fold(0u32, |acc, (i, &x)| acc | (qg.reps[x as usize].activity() as u32) << i);
        if !forms.contains_key(&pattern) {
            forms.insert(pattern, conjugacy_forms(5, pattern)?);
        }
        let fs = &forms[&pattern];
        for g1 in gamma1(&gamma)? {
            if !fs[0].coordinates_vanish(qg, &g1, [s1, s2]) {
                continue;
            }
            for form in fs {
                let t = form.transport(qg, &g1, [s1, s2]);
                if !is_active(qg, &t) {
                    continue;
                }
                if table.red4[orbits4.orbit_id(&t) as usize] & need == need {
                    let red = reduce_constraint4(qg, &t)?;
                    return Ok(Some(ConjugacyEntry {
                        q: q as u8,
                        gamma,
                        state_constraint: g1,
                        y0: form.y0.to_string(),
                        variant: form.variant as u8,
                        reduced_from: t,
                        target: red.orbit,
                        chain_hash: chain_hash(form, 0, &red.certificate),
                    }));
                }
            }
        }
    }
    Ok(None)
}

/// For every class `q` finds `γ` with `(γ*π)(E_g) = id` and an active
/// state constraint making `(class of (g@2)(g@1), γ′)` good for all lifts.
pub fn verify_conjugacy_with(table: &GoodPairTable) -> Result<ConjugacyReport, GoodPairError> {
    verify_conjugacy_progress(table, &|_, _| {})
}

pub fn verify_conjugacy_progress(
    table: &GoodPairTable,
    progress: &(dyn Fn(usize, usize) + Sync),
) -> Result<ConjugacyReport, GoodPairError> {
    let done = AtomicUsize::new(0);
    let found: Vec<Result<Option<ConjugacyEntry>, GoodPairError>> = (0..DERIVED_ORDER)
        .into_par_iter()
        .map_init(HashMap::new, |forms, q| {
            let e = conjugacy_entry(table, forms, q);
            progress(done.fetch_add(1, Ordering::SeqCst) + 1, DERIVED_ORDER);
            e
        })
        .collect();
    let mut entries = Vec::new();
    for (q, e) in found.into_iter().enumerate() {
        match e? {
            Some(e) => entries.push(e),
            None => return Ok(ConjugacyReport { ok: false, entries, failure: Some(q) }),
        }
    }
    Ok(ConjugacyReport { ok: true, entries, failure: None })
}

pub fn verify_conjugacy() -> bool {
    verify_conjugacy_with(GoodPairTable::get()).is_ok_and(|r| r.ok)
}

/// One pair `(g_i, γ_i)` of a succeeding sequence.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SequenceStep {
    pub word: String,
    pub class: u8,
    pub rank: Rank,
    pub constraint: u8,
    /// Conjugator from S and successor id; absent on the repeating step.
    pub x: Option<String>,
    pub chain_hash: Option<String>,
}

/// Solvability certificate of `(R₂g, γ)` for `g ∈ G′`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TwoCommutatorCertificate {
    pub word: String,
    pub class: u8,
    pub constraint: Constraint,
    pub constraint_id: u8,
    pub steps: Vec<SequenceStep>,
    /// Index of the earlier step equal to the last one.
    pub repeats: usize,
}

pub const SEQUENCE_CAP: usize = 100_000;

pub fn certify_two_commutators(g: &GenWord) -> Result<TwoCommutatorCertificate, GoodPairError> {
    let succ = successor_table().as_ref().map_err(Clone::clone)?;
    certify_with(g, GoodPairTable::get(), succ)
}

/// Follows the succeeding sequence of `(g, γ)` through `succ` until a pair repeats.
pub fn certify_with(
    g: &GenWord,
    table: &GoodPairTable,
    succ: &SuccessorTable,
) -> Result<TwoCommutatorCertificate, GoodPairError> {
    let classes = Classes::get();
    let class_of = |w: &GenWord| classes.class_of_word(w).ok_or_else(|| GoodPairError::NotInDerived(w.to_string()));
    let q = class_of(g)?;
    let gid = table.first_active_good(Rank::Two, q).ok_or(GoodPairError::NoGoodConstraint(q))?;
    let s = conjugators();
    let mut seen: HashMap<(GenWord, Rank, u8), usize> = HashMap::new();
    let mut steps = Vec::new();
    let (mut word, mut rank, mut id) = (g.clone(), Rank::Two, gid);
    loop {
        let q = class_of(&word)?;
        if let Some(&i) = seen.get(&(word.clone(), rank, id)) {
            steps.push(SequenceStep { word: word.to_string(), class: q as u8, rank, constraint: id, x: None, chain_hash: None });
            return Ok(TwoCommutatorCertificate {
                word: g.to_string(),
                class: classes.class_of_word(g).unwrap() as u8,
                constraint: Rank::Two.table().representative(gid),
                constraint_id: gid,
                steps,
                repeats: i,
            });
        }
        if steps.len() >= SEQUENCE_CAP {
            return Err(GoodPairError::Form(format!("no repetition within {SEQUENCE_CAP} steps")));
        }
        let e = succ.lookup(rank, id, q).ok_or(GoodPairError::MissingSuccessor { rank, q, gamma: id })?;
        let x = &s[e.x as usize];
        seen.insert((word.clone(), rank, id), steps.len());
        steps.push(SequenceStep {
            word: word.to_string(),
            class: q as u8,
            rank,
            constraint: id,
            x: Some(x.to_string()),
            chain_hash: Some(e.chain_hash.clone()),
        });
        word = tree::p_map(&word, x);
        rank = Rank::Three;
        id = e.target;
    }
}

/// Re-checks a certificate: every step is good and follows from the previous one by `p_x`.
pub fn check_certificate(cert: &TwoCommutatorCertificate) -> bool {
    match successor_table() {
        Ok(succ) => check_certificate_with(cert, GoodPairTable::get(), succ),
        Err(_) => false,
    }
}

pub fn check_certificate_with(cert: &TwoCommutatorCertificate, table: &GoodPairTable, succ: &SuccessorTable) -> bool {
    let classes = Classes::get();
    let parse = |s: &str| s.parse::<GenWord>().ok();
    let Some(first) = cert.steps.first() else { return false };
    if first.word != cert.word || first.rank != Rank::Two || first.constraint != cert.constraint_id {
        return false;
    }
    for (i, st) in cert.steps.iter().enumerate() {
        let Some(w) = parse(&st.word) else { return false };
        if classes.class_of_word(&w) != Some(st.class as usize) || !table.is_good(st.rank, st.constraint, st.class as usize) {
            return false;
        }
        let Some(next) = cert.steps.get(i + 1) else { break };
        let (Some(x), Some(e)) = (st.x.as_deref().and_then(parse), succ.lookup(st.rank, st.constraint, st.class as usize)) else {
            return false;
        };
        if tree::p_map(&w, &x).to_string() != next.word || next.constraint != e.target || next.rank != Rank::Three {
            return false;
        }
    }
    let last = cert.steps.last().unwrap();
    cert.steps.get(cert.repeats).is_some_and(|r| {
        cert.repeats + 1 < cert.steps.len() && (&r.word, r.rank, r.constraint) == (&last.word, last.rank, last.constraint)
    })
}

/// The element of G′ whose states' product is not a commutator, in standard generators.
pub const WITNESS_WORD: &str = "(acabacad)^3acab(ac)^2(acabacad)^2(acab)^3acadacab(ac)^2(acabacad)^2(acabacadacab(ac)^3abacad(acab)^2)^5acabacadacab(ac)^2(acabacad)^2(acabacadac)^2(abac)^3adacab(ac)^2(acabacad)^3acab(ac)^2(acab(ac)^3abacad)^2acabacad((acabacadacab(ac)^2)^2acabacad(acab)^3acadacab(ac)^2)^2((acabacad)^3acab)^2acab(acabacad)^2acab(ac)^2(acabacad)^3acab(ac)^3aba";

pub fn witness_word() -> GenWord {
    GenWord::parse_expr(WITNESS_WORD).expect("witness word parses")
}

/// `π(g) = id` and `(π(cag), π(ac), inactive) ∈ Q₁` with `ω = id`.
pub fn noncommutator_fixture_checks() -> bool {
    let qs = QuotientStructure::get();
    let bs = BranchStructure::get();
    let g = witness_word();
    let ca: GenWord = "ca".parse().unwrap();
    let ac: GenWord = "ac".parse().unwrap();
    let t = (qs.pi(&ca.multiply(&g)), qs.pi(&ac), false);
    qs.pi(&g) == 0 && !g.activity() && bs.q1.contains(&t) && bs.omega(t) == Some(0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn w(s: &str) -> GenWord {
        s.parse().unwrap()
    }

    fn class(s: &str) -> usize {
        Classes::get().class_of_word(&GenWord::parse_expr(s).unwrap()).unwrap()
    }

    #[test]
    fn trivial_constraint_goodness() {
        let c = Classes::get();
        for n in [4, 6] {
            assert!(c.is_good(class(""), &vec![0; n]));
            assert!(!c.is_good(class("(ab)^2"), &vec![0; n]));
        }
    }

    #[test]
    fn commutator_value_sets() {
        let c = Classes::get();
        let qs = QuotientStructure::get();
        assert!(c.commutator_value_set(0, 0) >> class("") & 1 == 1);
        let a = qs.pi(&w("a"));
        let s = c.commutator_value_set(a, a);
        assert_eq!(c.inverse_set(s), s);
    }

    #[test]
    fn active_constraints_cover_all_classes() {
        let t = GoodPairTable::get();
        assert_eq!(t.active_coverage(Rank::Two), FULL);
        assert_eq!(t.active_coverage(Rank::Three), FULL);
    }

    #[test]
    fn gamma1_fibers_have_equal_size() {
        let b = BranchStructure::get();
        let gamma = Rank::Three.table().representative(5);
        for f in gamma1_fibers(&gamma).unwrap() {
            assert_eq!(f.len(), b.q1.len() / Q_ORDER);
        }
    }

    #[test]
    fn chain_maps_coordinates_to_target() {
        for rank in [Rank::Two, Rank::Three] {
            for gid in GoodPairTable::active_ids(rank).into_iter().take(6) {
                let gamma = rank.table().representative(gid);
                for form in PipelineForm::all(&gamma).unwrap() {
                    let (first, second) = form.symbolic_images();
                    assert_eq!(first, target_form(gamma.len() - 1, true));
                    assert!(second.is_empty(), "{second}");
                }
            }
        }
    }

    #[test]
    fn corrupted_bit_is_detected() {
        let mut t = GoodPairTable::get().clone();
        let rank = Rank::Two;
        let (gid, q) = GoodPairTable::active_ids(rank)
            .into_iter()
            .flat_map(|g| (0..DERIVED_ORDER).map(move |q| (g, q)))
            .find(|&(g, q)| {
                !t.is_good(rank, g, q) && {
                    let forms = PipelineForm::all(&rank.table().representative(g)).unwrap();
                    successor_for(&t, rank, g, q, &forms).unwrap().is_none()
                }
            })
            .unwrap();
        t.column_mut(rank)[gid as usize] |= 1 << q;
        let r = verify_successors_with(&t, rank).unwrap();
        assert!(!r.ok);
        assert_eq!(r.failure, Some((rank, q, gid)));
    }

    #[test]
    fn cw_k_needs_active_constraints() {
        let t = GoodPairTable::get();
        let (g1, g2) = cw_k_constraints();
        assert!(!verify_cw_k_with(t, &g1, &[0; 4]).unwrap().ok);
        let id = class("");
        assert!(Classes::get().is_good(id, &g1) && Classes::get().is_good(id, &g2));
        assert!(kprime_state_pairs().contains(&(0, 0)));
    }

    #[test]
    fn three_conjugates_reduce_to_genus_one() {
        for pattern in 0..8 {
            for f in conjugacy_forms(3, pattern).unwrap() {
                assert_eq!(f.genus, 1);
                assert_eq!(f.normal, target_form(1, false));
            }
        }
    }

    #[test]
    fn witness_word_fixture() {
        assert!(noncommutator_fixture_checks());
        assert!(!witness_word().activity());
    }

    #[test]
    fn certificates() {
        let c = certify_two_commutators(&GenWord::identity()).unwrap();
        assert!(check_certificate(&c));
        let c = certify_two_commutators(&w("abab")).unwrap();
        assert!(check_certificate(&c));
        let mut bad = c.clone();
        bad.steps[1].constraint ^= 1;
        assert!(!check_certificate(&bad));
        assert!(matches!(certify_two_commutators(&w("a")), Err(GoodPairError::NotInDerived(_))));
    }
}
