//! Quadratic equations over an opaque constant group and their normal forms.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::hash::Hash;

use thiserror::Error;

use crate::quotients::{QGroup, QuotientStructure};
use crate::tree::decompose;
use crate::words::GenWord;

#[derive(Clone, Debug, Error, PartialEq, Eq)]
pub enum EquationError {
    #[error("equation is not quadratic")]
    NotQuadratic,
    #[error("parse error at {pos}: {msg}")]
    Parse { pos: usize, msg: String },
    #[error("constant cannot be split: {0}")]
    Unsplittable(String),
}

/// The constant group of an equation. Only multiplication, inversion and
/// equality are used.
pub trait Constant: Clone + PartialEq + Eq + Hash + fmt::Debug {
    fn identity() -> Self;
    fn is_identity(&self) -> bool;
    fn mul(&self, other: &Self) -> Self;
    fn inv(&self) -> Self;
    /// Text form accepted by [`parse_equation`].
    fn render(&self) -> String;
}

/// Constants that can be pushed through the wreath recursion.
pub trait Splittable: Constant {
    fn split(&self) -> Result<(Self, Self, bool), EquationError>;
}

impl Constant for GenWord {
    fn identity() -> Self {
        GenWord::identity()
    }
    fn is_identity(&self) -> bool {
        self.is_empty()
    }
    fn mul(&self, other: &Self) -> Self {
        self.multiply(other)
    }
    fn inv(&self) -> Self {
        self.invert()
    }
    fn render(&self) -> String {
        format!("\"{self}\"")
    }
}

impl Splittable for GenWord {
    fn split(&self) -> Result<(Self, Self, bool), EquationError> {
        let d = decompose(self);
        Ok((d.first, d.second, d.active))
    }
}

/// Formal constant symbols: 𝔤 and its two states 𝔤₁, 𝔤₂.
pub const SYM_G: u8 = 0;
pub const SYM_G1: u8 = 1;
pub const SYM_G2: u8 = 2;

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Atom {
    G(GenWord),
    /// Symbol and whether it is inverted.
    Sym(u8, bool),
}

/// Free product of G with the formal symbols, kept reduced.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Default)]
pub struct MixedConst(Vec<Atom>);

impl MixedConst {
    pub fn from_word(g: GenWord) -> Self {
        Self::from_atoms(vec![Atom::G(g)])
    }

    pub fn sym(s: u8) -> Self {
        MixedConst(vec![Atom::Sym(s, false)])
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.0
    }

    pub fn from_atoms(atoms: Vec<Atom>) -> Self {
        let mut out: Vec<Atom> = Vec::with_capacity(atoms.len());
        for a in atoms {
            match (out.last_mut(), a) {
                (_, Atom::G(g)) if g.is_empty() => {}
                (Some(Atom::G(prev)), Atom::G(g)) => {
                    let m = prev.multiply(&g);
                    if m.is_empty() {
                        out.pop();
                    } else {
                        *prev = m;
                    }
                }
                (Some(Atom::Sym(s, e)), Atom::Sym(t, f)) if *s == t && *e != f => {
                    out.pop();
                }
                (_, a) => out.push(a),
            }
        }
        MixedConst(out)
    }

    /// The G-part if no formal symbol occurs.
    pub fn as_word(&self) -> Option<GenWord> {
        match self.0.as_slice() {
            [] => Some(GenWord::identity()),
            [Atom::G(g)] => Some(g.clone()),
            _ => None,
        }
    }
}

impl Constant for MixedConst {
    fn identity() -> Self {
        MixedConst(Vec::new())
    }
    fn is_identity(&self) -> bool {
        self.0.is_empty()
    }
    fn mul(&self, other: &Self) -> Self {
        Self::from_atoms(self.0.iter().chain(other.0.iter()).cloned().collect())
    }
    fn inv(&self) -> Self {
        MixedConst::from_atoms(
            self.0
                .iter()
                .rev()
                .map(|a| match a {
                    Atom::G(g) => Atom::G(g.invert()),
                    Atom::Sym(s, e) => Atom::Sym(*s, !e),
                })
                .collect(),
        )
    }
    fn render(&self) -> String {
        let parts: Vec<String> = self
            .0
            .iter()
            .map(|a| match a {
                Atom::G(g) => format!("\"{g}\""),
                Atom::Sym(s, e) => {
                    let name = ["g", "g1", "g2"][*s as usize];
                    if *e {
                        format!("{name}^-1")
                    } else {
                        name.to_string()
                    }
                }
            })
            .collect();
        parts.join("*")
    }
}

impl Splittable for MixedConst {
    fn split(&self) -> Result<(Self, Self, bool), EquationError> {
        let mut p = WreathPair::<MixedConst>::identity();
        for a in &self.0 {
            let q = match a {
                Atom::G(g) => {
                    let d = decompose(g);
                    WreathPair {
                        first: Equation::constant(MixedConst::from_word(d.first)),
                        second: Equation::constant(MixedConst::from_word(d.second)),
                        active: d.active,
                    }
                }
                Atom::Sym(SYM_G, e) => {
                    let c1 = MixedConst(vec![Atom::Sym(SYM_G1, *e)]);
                    let c2 = MixedConst(vec![Atom::Sym(SYM_G2, *e)]);
                    WreathPair { first: Equation::constant(c1), second: Equation::constant(c2), active: false }
                }
                Atom::Sym(..) => return Err(EquationError::Unsplittable(self.render())),
            };
            p = p.mul(&q);
        }
        let c = |e: &Equation<MixedConst>| e.as_constant().expect("constant pair");
        Ok((c(&p.first), c(&p.second), p.active))
    }
}

/// A variable `X{name}` (`sub == 0`) or a state variable `Y{name}_{sub}`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Var {
    pub name: u32,
    pub sub: u8,
}

impl Var {
    pub fn x(name: u32) -> Var {
        Var { name, sub: 0 }
    }

    pub fn y(name: u32, sub: u8) -> Var {
        Var { name, sub }
    }
}

impl fmt::Display for Var {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.sub == 0 {
            write!(f, "X{}", self.name)
        } else {
            write!(f, "Y{}_{}", self.name, self.sub)
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Letter<C> {
    /// Variable and whether it is inverted.
    Var(Var, bool),
    Const(C),
}

/// A reduced word in the free product of the free group on the variables
/// with the constant group `C`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Equation<C> {
    letters: Vec<Letter<C>>,
}

impl<C: Constant> Equation<C> {
    pub fn identity() -> Self {
        Equation { letters: Vec::new() }
    }

    pub fn var(v: Var) -> Self {
        Equation { letters: vec![Letter::Var(v, false)] }
    }

    pub fn var_inv(v: Var) -> Self {
        Equation { letters: vec![Letter::Var(v, true)] }
    }

    pub fn constant(c: C) -> Self {
        Self::from_letters(vec![Letter::Const(c)])
    }

    pub fn from_letters(letters: Vec<Letter<C>>) -> Self {
        let mut e = Equation { letters: Vec::with_capacity(letters.len()) };
        for l in letters {
            e.push(l);
        }
        e
    }

    fn push(&mut self, l: Letter<C>) {
        match l {
            Letter::Const(c) => {
                if c.is_identity() {
                    return;
                }
                if let Some(Letter::Const(prev)) = self.letters.last_mut() {
                    let m = prev.mul(&c);
                    if m.is_identity() {
                        self.letters.pop();
                    } else {
                        *prev = m;
                    }
                } else {
                    self.letters.push(Letter::Const(c));
                }
            }
            Letter::Var(v, e) => {
                if let Some(Letter::Var(w, f)) = self.letters.last() {
                    if *w == v && *f != e {
                        self.letters.pop();
                        return;
                    }
                }
                self.letters.push(Letter::Var(v, e));
            }
        }
    }

    pub fn letters(&self) -> &[Letter<C>] {
        &self.letters
    }

    pub fn len(&self) -> usize {
        self.letters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.letters.is_empty()
    }

    pub fn slice(&self, from: usize, to: usize) -> Self {
        Self::from_letters(self.letters[from..to].to_vec())
    }

    pub fn mul(&self, other: &Self) -> Self {
        let mut e = self.clone();
        for l in &other.letters {
            e.push(l.clone());
        }
        e
    }

    pub fn product<'a, I: IntoIterator<Item = &'a Self>>(items: I) -> Self
    where
        C: 'a,
    {
        items.into_iter().fold(Self::identity(), |acc, x| acc.mul(x))
    }

    pub fn inv(&self) -> Self {
        Self::from_letters(
            self.letters
                .iter()
                .rev()
                .map(|l| match l {
                    Letter::Var(v, e) => Letter::Var(*v, !e),
                    Letter::Const(c) => Letter::Const(c.inv()),
                })
                .collect(),
        )
    }

    /// `y⁻¹ · self · y`.
    pub fn conj(&self, y: &Self) -> Self {
        y.inv().mul(self).mul(y)
    }

    pub fn commutator(x: &Self, y: &Self) -> Self {
        Self::product([&x.inv(), &y.inv(), x, y])
    }

    pub fn as_constant(&self) -> Option<C> {
        match self.letters.as_slice() {
            [] => Some(C::identity()),
            [Letter::Const(c)] => Some(c.clone()),
            _ => None,
        }
    }

    pub fn variables(&self) -> BTreeSet<Var> {
        self.letters
            .iter()
            .filter_map(|l| match l {
                Letter::Var(v, _) => Some(*v),
                _ => None,
            })
            .collect()
    }

    /// Positions and signs of the occurrences of `v`.
    pub fn occurrences(&self, v: Var) -> Vec<(usize, bool)> {
        self.letters
            .iter()
            .enumerate()
            .filter_map(|(i, l)| match l {
                Letter::Var(w, e) if *w == v => Some((i, *e)),
                _ => None,
            })
            .collect()
    }

    pub fn is_quadratic(&self) -> bool {
        self.variables().into_iter().all(|v| self.occurrences(v).len() == 2)
    }

    pub fn is_oriented(&self) -> bool {
        self.variables().into_iter().all(|v| {
            let occ = self.occurrences(v);
            occ.len() == 2 && occ[0].1 != occ[1].1
        })
    }

    pub fn map_constants<D: Constant>(&self, f: impl Fn(&C) -> D) -> Equation<D> {
        Equation::from_letters(
            self.letters
                .iter()
                .map(|l| match l {
                    Letter::Var(v, e) => Letter::Var(*v, *e),
                    Letter::Const(c) => Letter::Const(f(c)),
                })
                .collect(),
        )
    }
}

impl<C: Constant> fmt::Display for Equation<C> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.letters.is_empty() {
            return write!(f, "1");
        }
        let parts: Vec<String> = self
            .letters
            .iter()
            .map(|l| match l {
                Letter::Var(v, false) => v.to_string(),
                Letter::Var(v, true) => format!("{v}^-1"),
                Letter::Const(c) => c.render(),
            })
            .collect();
        write!(f, "{}", parts.join("*"))
    }
}

/// `R_n = [v₁,v₂]···[v_{2n−1},v_{2n}]`.
pub fn r_n<C: Constant>(vars: &[Var]) -> Equation<C> {
    assert!(vars.len() % 2 == 0);
    let mut e = Equation::identity();
    for pair in vars.chunks(2) {
        e = e.mul(&Equation::commutator(&Equation::var(pair[0]), &Equation::var(pair[1])));
    }
    e
}

pub fn x_vars(n: usize) -> Vec<Var> {
    (1..=n as u32).map(Var::x).collect()
}

/// An endomorphism of the free product fixing the constants, given by the
/// images of finitely many variables.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Substitution<C> {
    images: BTreeMap<Var, Equation<C>>,
}

impl<C: Constant> Default for Substitution<C> {
    fn default() -> Self {
        Self::identity()
    }
}

impl<C: Constant> Substitution<C> {
    pub fn identity() -> Self {
        Substitution { images: BTreeMap::new() }
    }

    pub fn from_pairs<I: IntoIterator<Item = (Var, Equation<C>)>>(pairs: I) -> Self {
        let mut s = Self::identity();
        for (v, e) in pairs {
            s.set(v, e);
        }
        s
    }

    pub fn set(&mut self, v: Var, e: Equation<C>) {
        if e == Equation::var(v) {
            self.images.remove(&v);
        } else {
            self.images.insert(v, e);
        }
    }

    pub fn image(&self, v: Var) -> Equation<C> {
        self.images.get(&v).cloned().unwrap_or_else(|| Equation::var(v))
    }

    pub fn support(&self) -> impl Iterator<Item = &Var> {
        self.images.keys()
    }

    pub fn apply(&self, e: &Equation<C>) -> Equation<C> {
        let mut out = Equation::identity();
        for l in &e.letters {
            match l {
                Letter::Var(v, inv) => match self.images.get(v) {
                    Some(img) if *inv => out = out.mul(&img.inv()),
                    Some(img) => out = out.mul(img),
                    None => out.push(l.clone()),
                },
                Letter::Const(_) => out.push(l.clone()),
            }
        }
        out
    }

    /// `self` followed by `next`: `v ↦ next(self(v))`.
    pub fn then(&self, next: &Substitution<C>) -> Substitution<C> {
        let mut s = Substitution::identity();
        for v in self.images.keys().chain(next.images.keys()) {
            s.set(*v, next.apply(&self.image(*v)));
        }
        s
    }

    /// Replaces variables by variables.
    pub fn rename(map: &[(Var, Var)]) -> Self {
        Self::from_pairs(map.iter().map(|&(a, b)| (a, Equation::var(b))))
    }
}

/// A substitution together with its inverse.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Tracked<C> {
    pub forward: Substitution<C>,
    pub inverse: Substitution<C>,
}

impl<C: Constant> Default for Tracked<C> {
    fn default() -> Self {
        Self::identity()
    }
}

impl<C: Constant> Tracked<C> {
    pub fn identity() -> Self {
        Tracked { forward: Substitution::identity(), inverse: Substitution::identity() }
    }

    pub fn new(forward: Substitution<C>, inverse: Substitution<C>) -> Self {
        Tracked { forward, inverse }
    }

    /// `v ↦ A·v^{±1}·B` with `A`, `B` free of the substituted variables.
    pub fn elementary(items: &[(Var, Equation<C>, bool, Equation<C>)]) -> Self {
        let mut fwd = Substitution::identity();
        let mut inv = Substitution::identity();
        for (v, a, inverted, b) in items {
            if *inverted {
                fwd.set(*v, Equation::product([a, &Equation::var_inv(*v), b]));
                inv.set(*v, Equation::product([b, &Equation::var_inv(*v), a]));
            } else {
                fwd.set(*v, Equation::product([a, &Equation::var(*v), b]));
                inv.set(*v, Equation::product([&a.inv(), &Equation::var(*v), &b.inv()]));
            }
        }
        Tracked { forward: fwd, inverse: inv }
    }

    pub fn then(&self, next: &Tracked<C>) -> Tracked<C> {
        Tracked { forward: self.forward.then(&next.forward), inverse: next.inverse.then(&self.inverse) }
    }

    pub fn invert(&self) -> Tracked<C> {
        Tracked { forward: self.inverse.clone(), inverse: self.forward.clone() }
    }

    /// `inverse(forward(v)) = v` for every `v` in `vars`.
    pub fn is_consistent_on<'a, I: IntoIterator<Item = &'a Var>>(&self, vars: I) -> bool {
        vars.into_iter().all(|&v| {
            self.inverse.apply(&self.forward.image(v)) == Equation::var(v)
                && self.forward.apply(&self.inverse.image(v)) == Equation::var(v)
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum NormalKind {
    Oriented,
    Unoriented,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NormalFormResult<C> {
    pub kind: NormalKind,
    pub genus: usize,
    /// Number of constants `c₁, …, c_m`, the last one possibly trivial.
    pub constants: usize,
    pub word: Equation<C>,
    pub subst: Tracked<C>,
}

/// Parses `[v₁,v₂]···` or `v₁²···`, then `c^Z···`, then an optional constant.
pub fn classify<C: Constant>(e: &Equation<C>) -> Option<(NormalKind, usize, usize)> {
    let l = e.letters();
    let mut i = 0;
    let mut genus = 0;
    let mut kind = NormalKind::Oriented;
    let is_var = |x: &Letter<C>, inv: bool| matches!(x, Letter::Var(_, e) if *e == inv);
    let var_of = |x: &Letter<C>| match x {
        Letter::Var(v, _) => Some(*v),
        _ => None,
    };
    if l.len() >= 2 && is_var(&l[0], false) && is_var(&l[1], false) && var_of(&l[0]) == var_of(&l[1]) {
        kind = NormalKind::Unoriented;
        while i + 1 < l.len() && is_var(&l[i], false) && is_var(&l[i + 1], false) && var_of(&l[i]) == var_of(&l[i + 1]) {
            genus += 1;
            i += 2;
        }
    } else {
        while i + 3 < l.len()
            && is_var(&l[i], true)
            && is_var(&l[i + 1], true)
            && is_var(&l[i + 2], false)
            && is_var(&l[i + 3], false)
            && var_of(&l[i]) == var_of(&l[i + 2])
            && var_of(&l[i + 1]) == var_of(&l[i + 3])
            && var_of(&l[i]) != var_of(&l[i + 1])
        {
            genus += 1;
            i += 4;
        }
    }
    let mut m = 1;
    while i + 2 < l.len() && is_var(&l[i], true) && matches!(l[i + 1], Letter::Const(_)) && is_var(&l[i + 2], false) && var_of(&l[i]) == var_of(&l[i + 2]) {
        m += 1;
        i += 3;
    }
    if i < l.len() && matches!(l[i], Letter::Const(_)) {
        i += 1;
    }
    (i == l.len()).then_some((kind, genus, m))
}

fn var_count<C: Constant>(e: &Equation<C>, from: usize, to: usize) -> usize {
    e.letters[from..to].iter().filter(|l| matches!(l, Letter::Var(..))).count()
}

/// The variable whose two occurrences enclose the fewest variables, ties by
/// variable order. Restricted to same-sign pairs when `same_sign`.
fn choose_var<C: Constant>(e: &Equation<C>, same_sign: bool) -> Option<(Var, usize, usize)> {
    let mut best: Option<(usize, Var, usize, usize)> = None;
    for v in e.variables() {
        let occ = e.occurrences(v);
        if (occ[0].1 == occ[1].1) != same_sign {
            continue;
        }
        let (p, q) = (occ[0].0, occ[1].0);
        let k = var_count(e, p + 1, q);
        if best.map_or(true, |(bk, ..)| k < bk) {
            best = Some((k, v, p, q));
        }
    }
    best.map(|(_, v, p, q)| (v, p, q))
}

fn flip<C: Constant>(v: Var) -> Tracked<C> {
    let s = Substitution::from_pairs([(v, Equation::var_inv(v))]);
    Tracked::new(s.clone(), s)
}

fn apply_step<C: Constant>(e: &mut Equation<C>, acc: &mut Tracked<C>, step: Tracked<C>) {
    *e = step.forward.apply(e);
    *acc = acc.then(&step);
}

/// Brings a quadratic equation into normal form with a tracked substitution.
pub fn normal_form<C: Constant>(e: &Equation<C>) -> Result<NormalFormResult<C>, EquationError> {
    if !e.is_quadratic() {
        return Err(EquationError::NotQuadratic);
    }
    let (word, subst) = nf_rec(e);
    let (kind, genus, constants) = classify(&word).expect("normal form pattern");
    debug_assert_eq!(subst.forward.apply(e), word);
    Ok(NormalFormResult { kind, genus, constants, word, subst })
}

fn nf_rec<C: Constant>(e: &Equation<C>) -> (Equation<C>, Tracked<C>) {
    if e.variables().is_empty() {
        return (e.clone(), Tracked::identity());
    }
    if choose_var(e, true).is_some() {
        nf_unoriented(e)
    } else {
        nf_oriented(e)
    }
}

fn nf_unoriented<C: Constant>(e0: &Equation<C>) -> (Equation<C>, Tracked<C>) {
    let mut e = e0.clone();
    let mut acc = Tracked::identity();
    let (x, p, _) = choose_var(&e, true).unwrap();
    if e.occurrences(x)[0].1 {
        apply_step(&mut e, &mut acc, flip(x));
    }
    let occ = e.occurrences(x);
    let (p2, q) = (occ[0].0, occ[1].0);
    debug_assert_eq!(p, p2);
    let u = e.slice(0, p);
    let v = e.slice(p + 1, q);
    let w = e.slice(q + 1, e.len());
    // X ↦ X^u v⁻¹ turns uXvXw into X²·uv⁻¹w.
    apply_step(&mut e, &mut acc, Tracked::elementary(&[(x, u.inv(), false, u.mul(&v.inv()))]));
    let rest = Equation::product([&u, &v.inv(), &w]);
    debug_assert_eq!(e, Equation::var(x).mul(&Equation::var(x)).mul(&rest));
    let (r, sub) = nf_rec(&rest);
    acc = acc.then(&sub);
    let mut squares = vec![x];
    let mut r = r;
    let mut last = x;
    while let Some((y, z, s)) = leading_commutator(&r) {
        acc = acc.then(&square_step(last, y, z));
        squares.push(y);
        squares.push(z);
        last = z;
        r = s;
    }
    let mut word = Equation::identity();
    for v in squares {
        word = word.mul(&Equation::var(v)).mul(&Equation::var(v));
    }
    (word.mul(&r), acc)
}

fn leading_commutator<C: Constant>(r: &Equation<C>) -> Option<(Var, Var, Equation<C>)> {
    match r.letters() {
        [Letter::Var(y, true), Letter::Var(z, true), Letter::Var(y2, false), Letter::Var(z2, false), ..] if y == y2 && z == z2 && y != z => {
            Some((*y, *z, r.slice(4, r.len())))
        }
        _ => None,
    }
}

/// `X ↦ XYZ, Y ↦ Z⁻¹Y⁻¹X⁻¹YZXYZ, Z ↦ Z⁻¹Y⁻¹X⁻¹Z` maps `X²[Y,Z]` to `X²Y²Z²`.
pub fn square_step<C: Constant>(x: Var, y: Var, z: Var) -> Tracked<C> {
    let (vx, vy, vz) = (Equation::var(x), Equation::var(y), Equation::var(z));
    let (ix, iy, iz) = (vx.inv(), vy.inv(), vz.inv());
    let fwd = Substitution::from_pairs([
        (x, Equation::product([&vx, &vy, &vz])),
        (y, Equation::product([&iz, &iy, &ix, &vy, &vz, &vx, &vy, &vz])),
        (z, Equation::product([&iz, &iy, &ix, &vz])),
    ]);
    let inv = Substitution::from_pairs([
        (x, Equation::product([&vx, &vx, &iy, &ix])),
        (y, Equation::product([&vx, &vy, &ix, &iz, &ix])),
        (z, Equation::product([&vx, &vz])),
    ]);
    Tracked::new(fwd, inv)
}

fn nf_oriented<C: Constant>(e0: &Equation<C>) -> (Equation<C>, Tracked<C>) {
    let mut e = e0.clone();
    let mut acc = Tracked::identity();
    let (x, _, _) = choose_var(&e, false).unwrap();
    if !e.occurrences(x)[0].1 {
        apply_step(&mut e, &mut acc, flip(x));
    }
    let occ = e.occurrences(x);
    let (p, q) = (occ[0].0, occ[1].0);
    if var_count(&e, p + 1, q) == 0 {
        let u = e.slice(0, p);
        let v = e.slice(p + 1, q);
        let w = e.slice(q + 1, e.len());
        apply_step(&mut e, &mut acc, Tracked::elementary(&[(x, Equation::identity(), false, w.inv())]));
        let (r, sub) = nf_rec(&u.mul(&w));
        acc = acc.then(&sub);
        let conj = Equation::var(x).inv().mul(&v).mul(&Equation::var(x));
        return match r.letters().last() {
            Some(Letter::Const(b)) => {
                let b = Equation::constant(b.clone());
                acc = acc.then(&Tracked::elementary(&[(x, Equation::identity(), false, b.clone())]));
                let s = r.slice(0, r.len() - 1);
                (Equation::product([&s, &conj, &b]), acc)
            }
            _ => (r.mul(&conj), acc),
        };
    }
    if let Letter::Const(b) = &e.letters()[p + 1] {
        let b = Equation::constant(b.clone());
        apply_step(&mut e, &mut acc, Tracked::elementary(&[(x, b, false, Equation::identity())]));
    }
    let occ = e.occurrences(x);
    let (p, q) = (occ[0].0, occ[1].0);
    let Letter::Var(y, y_inv) = e.letters()[p + 1] else { unreachable!("variable after premultiplication") };
    if y_inv {
        apply_step(&mut e, &mut acc, flip(y));
    }
    let v1 = e.slice(p + 2, q);
    let other = e.occurrences(y).into_iter().find(|&(i, _)| i != p + 1).unwrap().0;
    let (prefix, rest, step) = if other < p {
        let u1 = e.slice(0, other);
        let u2 = e.slice(other + 1, p);
        let w = e.slice(q + 1, e.len());
        let step = Tracked::elementary(&[
            (x, v1.inv().mul(&u1.inv()), false, Equation::product([&u1, &v1, &u2])),
            (y, v1.inv().mul(&u1.inv()), false, u1.clone()),
        ]);
        let prefix = Equation::commutator(&Equation::var(y), &Equation::var(x));
        (prefix, Equation::product([&u1, &v1, &u2, &w]), step)
    } else {
        let u = e.slice(0, p);
        let w1 = e.slice(q + 1, other);
        let w2 = e.slice(other + 1, e.len());
        let a = Equation::product([&v1.inv(), &w1.inv(), &u.inv()]);
        let step = Tracked::elementary(&[(x, a.clone(), false, u.clone()), (y, a, true, u.mul(&w1))]);
        let prefix = Equation::commutator(&Equation::var(x), &Equation::var(y));
        (prefix, Equation::product([&u, &w1, &v1, &w2]), step)
    };
    apply_step(&mut e, &mut acc, step);
    debug_assert_eq!(e, prefix.mul(&rest));
    let (r, sub) = nf_rec(&rest);
    (prefix.mul(&r), acc.then(&sub))
}

/// An element of the permutational wreath product over two coordinates.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct WreathPair<C> {
    pub first: Equation<C>,
    pub second: Equation<C>,
    pub active: bool,
}

impl<C: Constant> WreathPair<C> {
    pub fn identity() -> Self {
        WreathPair { first: Equation::identity(), second: Equation::identity(), active: false }
    }

    pub fn coord(&self, i: usize) -> &Equation<C> {
        if i == 0 {
            &self.first
        } else {
            &self.second
        }
    }

    /// `(u₁,u₂,σ)(v₁,v₂,τ) = (u₁·v_{1^σ}, u₂·v_{2^σ}, στ)`.
    pub fn mul(&self, o: &Self) -> Self {
        let s = self.active as usize;
        WreathPair { first: self.first.mul(o.coord(s)), second: self.second.mul(o.coord(1 - s)), active: self.active != o.active }
    }

    pub fn inv(&self) -> Self {
        if self.active {
            WreathPair { first: self.second.inv(), second: self.first.inv(), active: true }
        } else {
            WreathPair { first: self.first.inv(), second: self.second.inv(), active: false }
        }
    }
}

/// `Φ_γ`: every `X_i` becomes `⟨Y_{i,1}, Y_{i,2}⟩·act(γ(X_i))` and every
/// constant is split by the wreath recursion.
pub fn phi_gamma<C: Splittable>(e: &Equation<C>, activity: impl Fn(Var) -> bool) -> Result<WreathPair<C>, EquationError> {
    let mut out = WreathPair::identity();
    for l in e.letters() {
        let p = match l {
            Letter::Var(v, inv) => {
                let p = WreathPair {
                    first: Equation::var(Var::y(v.name, 1)),
                    second: Equation::var(Var::y(v.name, 2)),
                    active: activity(*v),
                };
                if *inv {
                    p.inv()
                } else {
                    p
                }
            }
            Letter::Const(c) => {
                let (c1, c2, act) = c.split()?;
                WreathPair { first: Equation::constant(c1), second: Equation::constant(c2), active: act }
            }
        };
        out = out.mul(&p);
    }
    Ok(out)
}

/// A finite group given by its multiplication.
pub trait GroupOps {
    type Elem: Clone + PartialEq;
    fn one(&self) -> Self::Elem;
    fn op(&self, a: &Self::Elem, b: &Self::Elem) -> Self::Elem;
    fn invert(&self, a: &Self::Elem) -> Self::Elem;
}

impl GroupOps for QuotientStructure {
    type Elem = usize;
    fn one(&self) -> usize {
        0
    }
    fn op(&self, a: &usize, b: &usize) -> usize {
        self.mul(*a, *b)
    }
    fn invert(&self, a: &usize) -> usize {
        self.inverse(*a)
    }
}

impl GroupOps for QGroup {
    type Elem = u8;
    fn one(&self) -> u8 {
        0
    }
    fn op(&self, a: &u8, b: &u8) -> u8 {
        self.mul(*a, *b)
    }
    fn invert(&self, a: &u8) -> u8 {
        self.inverse(*a)
    }
}

/// Image of `e` under the homomorphism given on variables and constants.
pub fn evaluate<C: Constant, G: GroupOps>(
    e: &Equation<C>,
    group: &G,
    assign: impl Fn(Var) -> G::Elem,
    konst: impl Fn(&C) -> G::Elem,
) -> G::Elem {
    let mut acc = group.one();
    for l in e.letters() {
        let x = match l {
            Letter::Var(v, false) => assign(*v),
            Letter::Var(v, true) => group.invert(&assign(*v)),
            Letter::Const(c) => konst(c),
        };
        acc = group.op(&acc, &x);
    }
    acc
}

/// Parses e.g. `[X1,X2]*[X3,X4]*"abab"`, `Y3_1^-1`, `"a"^X1`, `g1*g2`.
pub fn parse_equation(s: &str) -> Result<Equation<MixedConst>, EquationError> {
    let mut p = Parser { s: s.as_bytes(), pos: 0 };
    let e = p.expr()?;
    p.skip_ws();
    if p.pos != p.s.len() {
        return Err(p.err("trailing input"));
    }
    Ok(e)
}

/// Like [`parse_equation`] but with constants in G only.
pub fn parse_g_equation(s: &str) -> Result<Equation<GenWord>, EquationError> {
    let e = parse_equation(s)?;
    for l in e.letters() {
        if let Letter::Const(c) = l {
            if c.as_word().is_none() {
                return Err(EquationError::Parse { pos: 0, msg: "formal constant in G-equation".into() });
            }
        }
    }
    Ok(e.map_constants(|c| c.as_word().unwrap()))
}

struct Parser<'a> {
    s: &'a [u8],
    pos: usize,
}

impl Parser<'_> {
    fn err(&self, msg: &str) -> EquationError {
        EquationError::Parse { pos: self.pos, msg: msg.to_string() }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.s.len() && self.s[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.s.get(self.pos).copied()
    }

    fn expect(&mut self, c: u8) -> Result<(), EquationError> {
        if self.peek() == Some(c) {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.err(&format!("expected '{}'", c as char)))
        }
    }

    fn number(&mut self) -> Result<u32, EquationError> {
        self.skip_ws();
        let start = self.pos;
        while self.pos < self.s.len() && self.s[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        std::str::from_utf8(&self.s[start..self.pos]).unwrap().parse().map_err(|_| self.err("expected number"))
    }

    fn expr(&mut self) -> Result<Equation<MixedConst>, EquationError> {
        let mut e = self.term()?;
        loop {
            match self.peek() {
                Some(b'*') => {
                    self.pos += 1;
                    e = e.mul(&self.term()?);
                }
                Some(b'X' | b'Y' | b'g' | b'"' | b'[' | b'(' | b'1') => e = e.mul(&self.term()?),
                _ => return Ok(e),
            }
        }
    }

    fn term(&mut self) -> Result<Equation<MixedConst>, EquationError> {
        let mut e = self.atom()?;
        while self.peek() == Some(b'^') {
            self.pos += 1;
            match self.peek() {
                Some(b'-') => {
                    self.pos += 1;
                    let n = self.number()?;
                    e = pow(&e.inv(), n);
                }
                Some(c) if c.is_ascii_digit() => {
                    let n = self.number()?;
                    e = pow(&e, n);
                }
                _ => {
                    let y = self.atom()?;
                    e = e.conj(&y);
                }
            }
        }
        Ok(e)
    }

    fn atom(&mut self) -> Result<Equation<MixedConst>, EquationError> {
        match self.peek() {
            Some(b'X') => {
                self.pos += 1;
                Ok(Equation::var(Var::x(self.number()?)))
            }
            Some(b'Y') => {
                self.pos += 1;
                let n = self.number()?;
                self.expect(b'_')?;
                let sub = self.number()?;
                if !(1..=2).contains(&sub) {
                    return Err(self.err("state index must be 1 or 2"));
                }
                Ok(Equation::var(Var::y(n, sub as u8)))
            }
            Some(b'g') => {
                self.pos += 1;
                let sym = match self.s.get(self.pos) {
                    Some(b'1') => SYM_G1,
                    Some(b'2') => SYM_G2,
                    _ => SYM_G,
                };
                if sym != SYM_G {
                    self.pos += 1;
                }
                Ok(Equation::constant(MixedConst::sym(sym)))
            }
            Some(b'1') => {
                self.pos += 1;
                Ok(Equation::identity())
            }
            Some(b'"') => {
                self.pos += 1;
                let start = self.pos;
                while self.pos < self.s.len() && self.s[self.pos] != b'"' {
                    self.pos += 1;
                }
                let body = std::str::from_utf8(&self.s[start..self.pos]).unwrap();
                self.expect(b'"')?;
                let g = GenWord::parse_expr(body).map_err(|e| self.err(&e.to_string()))?;
                Ok(Equation::constant(MixedConst::from_word(g)))
            }
            Some(b'[') => {
                self.pos += 1;
                let a = self.expr()?;
                self.expect(b',')?;
                let b = self.expr()?;
                self.expect(b']')?;
                Ok(Equation::commutator(&a, &b))
            }
            Some(b'(') => {
                self.pos += 1;
                let a = self.expr()?;
                self.expect(b')')?;
                Ok(a)
            }
            _ => Err(self.err("unexpected token")),
        }
    }
}

fn pow<C: Constant>(e: &Equation<C>, n: u32) -> Equation<C> {
    (0..n).fold(Equation::identity(), |acc, _| acc.mul(e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pe(s: &str) -> Equation<GenWord> {
        parse_g_equation(s).unwrap()
    }

    fn check_nf(e: &Equation<GenWord>) -> NormalFormResult<GenWord> {
        let r = normal_form(e).unwrap();
        assert_eq!(r.subst.forward.apply(e), r.word, "forward image of {e}");
        assert!(r.subst.is_consistent_on(&e.variables()), "inverse of {e}");
        r
    }

    #[test]
    fn quadratic_and_oriented() {
        assert!(pe("[X1,X2]*\"abab\"").is_quadratic());
        assert!(!pe("X1*\"a\"*X1*X1").is_quadratic());
        assert!(r_n::<GenWord>(&x_vars(6)).mul(&pe("\"ab\"")).is_quadratic());
        assert!(pe("[X1,X2]").is_oriented());
        assert!(!pe("X1^2").is_oriented());
        assert!(pe("X1^-1*\"c\"*X1").is_oriented());
    }

    #[test]
    fn parse_roundtrip() {
        for s in ["[X1,X2]*[X3,X4]*\"abab\"", "X1^-1*Y3_2*\"c\"^X2", "g*[X1,X2]", "(X1*X2)^2*g1^-1"] {
            let e = parse_equation(s).unwrap();
            assert_eq!(parse_equation(&e.to_string()).unwrap(), e, "{s}");
        }
        assert!(parse_equation("[X1,").is_err());
        assert!(parse_equation("Y1_3").is_err());
    }

    #[test]
    fn constant_only() {
        let r = check_nf(&pe("\"abc\""));
        assert_eq!((r.kind, r.genus, r.constants), (NormalKind::Oriented, 0, 1));
        assert_eq!(r.subst, Tracked::identity());
    }

    #[test]
    fn oriented_cases() {
        for s in [
            "\"ab\"*X1^-1*\"c\"*X1*\"ad\"",
            "X1^-1*X2^-1*X1*X2",
            "X1^-1*X2*X1*X2^-1*\"b\"",
            "X2^-1*\"a\"*X1^-1*X2*\"b\"*X3*X1*X3^-1*\"d\"",
            "X1*\"a\"*X2*X3^-1*X1^-1*X2^-1*\"c\"*X3*\"d\"",
            "[X1,X2]*[X3,X4]*\"abab\"*X5^-1*\"a\"*X5",
        ] {
            let e = pe(s);
            let r = check_nf(&e);
            assert_eq!(r.kind, NormalKind::Oriented, "{s}");
        }
        let r = check_nf(&pe("[X1,X2]*[X3,X4]*[X5,X6]*\"abab\""));
        assert_eq!((r.genus, r.constants), (3, 1));
    }

    #[test]
    fn case_one_zero_trace() {
        let e = pe("\"ab\"*X1^-1*\"c\"*X1*\"ad\"");
        let r = check_nf(&e);
        assert_eq!(r.word, pe("X1^-1*\"c\"*X1*\"abad\""));
        assert_eq!((r.genus, r.constants), (0, 2));
    }

    #[test]
    fn unoriented() {
        let r = check_nf(&pe("X1^2*[X2,X3]*\"ab\""));
        assert_eq!((r.kind, r.genus), (NormalKind::Unoriented, 3));
        assert_eq!(r.word, pe("X1^2*X2^2*X3^2*\"ab\""));
        let r = check_nf(&pe("X1*\"a\"*X2*X1*X3^-1*X2*X3*\"d\""));
        assert_eq!(r.kind, NormalKind::Unoriented);
        let sq = square_step::<GenWord>(Var::x(1), Var::x(2), Var::x(3));
        assert!(sq.is_consistent_on(&[Var::x(1), Var::x(2), Var::x(3)]));
    }

    #[test]
    fn phi_commutator_factor() {
        let e = r_n::<MixedConst>(&[Var::x(1), Var::x(2)]);
        let p = phi_gamma(&e, |v| v.name == 1).unwrap();
        let y = |n, s| Equation::<MixedConst>::var(Var::y(n, s));
        let first = Equation::product([&y(1, 2).inv(), &y(2, 2).inv(), &y(1, 2), &y(2, 1)]);
        let second = Equation::product([&y(1, 1).inv(), &y(2, 1).inv(), &y(1, 1), &y(2, 2)]);
        assert_eq!(p, WreathPair { first, second, active: false });
        let p = phi_gamma(&Equation::<MixedConst>::var(Var::x(3)), |_| false).unwrap();
        assert_eq!(p, WreathPair { first: y(3, 1), second: y(3, 2), active: false });
    }

    #[test]
    fn evaluation() {
        let qs = QuotientStructure::get();
        let e = pe("[X1,X2]");
        let g = qs.tau(&GenWord::parse_expr("abd").unwrap());
        assert_eq!(evaluate(&e, qs, |v| if v.name == 1 { g } else { 0 }, |c| qs.tau(c)), 0);
        let e = pe("X1^2*\"c\"");
        let q = &qs.q;
        let c = q.image(&"c".parse().unwrap());
        assert_eq!(evaluate(&e, q, |_| q.inverse(c), |w| q.image(w)), q.inverse(c));
    }
}
