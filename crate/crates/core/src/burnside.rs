//! The Burnside criterion for products of commutators over a supplied
//! character table, with brute-force oracles on small permutation groups.
//!
//! For `g` in a finite group `G` the number of solutions of
//! `[x₁,y₁]⋯[x_r,y_r] = g` is `|G|^{2r−1} Σ_χ χ(g)/χ(1)^{2r−1}`.

use std::collections::{HashMap, HashSet, VecDeque};
use std::str::FromStr;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::perm::{self, Perm, PermGroup};

pub const TOLERANCE: f64 = 1e-6;
pub const ORDER_CAP: usize = 1_000_000;

#[derive(Clone, Debug, Error, PartialEq)]
pub enum BurnsideError {
    #[error("malformed table: {0}")]
    Malformed(String),
    #[error("orthogonality fails for characters {0} and {1}")]
    Orthogonality(usize, usize),
    #[error("class {0} out of range")]
    BadClass(usize),
    #[error("group order {0} exceeds {ORDER_CAP}")]
    TooLarge(usize),
    #[error("bad value {0:?}")]
    BadValue(String),
}

/// A character value: exact when given as an integer or `p/q` string,
/// otherwise a complex float.
#[derive(Clone, Debug, PartialEq)]
pub struct CharValue {
    pub re: f64,
    pub im: f64,
    pub exact: Option<(BigRational, BigRational)>,
}

impl CharValue {
    pub fn exact(re: BigRational, im: BigRational) -> Self {
        CharValue { re: re.to_f64().unwrap_or(f64::NAN), im: im.to_f64().unwrap_or(f64::NAN), exact: Some((re, im)) }
    }

    pub fn int(n: i64) -> Self {
        Self::exact(BigRational::from_integer(n.into()), BigRational::zero())
    }

    pub fn float(re: f64, im: f64) -> Self {
        CharValue { re, im, exact: None }
    }
}

/// One real coordinate: exact rational or float.
enum Part {
    Exact(BigRational),
    Float(f64),
}

fn parse_part(v: &serde_json::Value) -> Result<Part, BurnsideError> {
    let bad = || BurnsideError::BadValue(v.to_string());
    match v {
        serde_json::Value::Number(n) => match n.as_i64() {
            Some(i) => Ok(Part::Exact(BigRational::from_integer(i.into()))),
            None => n.as_f64().map(Part::Float).ok_or_else(bad),
        },
        serde_json::Value::String(s) => {
            let s = s.trim();
            if let Some((p, q)) = s.split_once('/') {
                let p = BigInt::from_str(p.trim()).map_err(|_| bad())?;
                let q = BigInt::from_str(q.trim()).map_err(|_| bad())?;
                if q.is_zero() {
                    return Err(bad());
                }
                Ok(Part::Exact(BigRational::new(p, q)))
            } else if let Ok(i) = BigInt::from_str(s) {
                Ok(Part::Exact(BigRational::from_integer(i)))
            } else {
                s.parse::<f64>().map(Part::Float).map_err(|_| bad())
            }
        }
        _ => Err(bad()),
    }
}

impl<'de> Deserialize<'de> for CharValue {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        use serde::de::Error;
        let v = serde_json::Value::deserialize(d)?;
        let (re, im) = match &v {
            serde_json::Value::Array(a) if a.len() == 2 => {
                (parse_part(&a[0]).map_err(D::Error::custom)?, parse_part(&a[1]).map_err(D::Error::custom)?)
            }
            _ => (parse_part(&v).map_err(D::Error::custom)?, Part::Exact(BigRational::zero())),
        };
        Ok(match (re, im) {
            (Part::Exact(r), Part::Exact(i)) => CharValue::exact(r, i),
            (r, i) => {
                let f = |p: Part| match p {
                    Part::Exact(x) => x.to_f64().unwrap_or(f64::NAN),
                    Part::Float(x) => x,
                };
                CharValue::float(f(r), f(i))
            }
        })
    }
}

impl Serialize for CharValue {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match &self.exact {
            Some((r, i)) if i.is_zero() => s.serialize_str(&r.to_string()),
            Some((r, i)) => [r.to_string(), i.to_string()].serialize(s),
            None => [self.re, self.im].serialize(s),
        }
    }
}

/// Characters as rows, classes as columns.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CharacterTable {
    pub order: u64,
    pub sizes: Vec<u64>,
    pub identity: usize,
    pub characters: Vec<Vec<CharValue>>,
}

type Gauss = (BigRational, BigRational);

fn gmul(a: &Gauss, b: &Gauss) -> Gauss {
    (&a.0 * &b.0 - &a.1 * &b.1, &a.0 * &b.1 + &a.1 * &b.0)
}

impl CharacterTable {
    pub fn class_count(&self) -> usize {
        self.sizes.len()
    }

    pub fn is_exact(&self) -> bool {
        self.characters.iter().flatten().all(|v| v.exact.is_some())
    }

    /// Shape, class sizes, degrees and row orthogonality.
    pub fn validate(&self) -> Result<(), BurnsideError> {
        let k = self.class_count();
        let bad = |s: &str| Err(BurnsideError::Malformed(s.to_string()));
        if k == 0 || self.characters.len() != k || self.characters.iter().any(|r| r.len() != k) {
            return bad("table is not square");
        }
        if self.identity >= k || self.sizes[self.identity] != 1 {
            return bad("identity class");
        }
        if self.sizes.iter().sum::<u64>() != self.order {
            return bad("class sizes do not sum to the order");
        }
        let mut degrees = 0f64;
        for row in &self.characters {
            let d = &row[self.identity];
            if d.re < 0.5 || d.im.abs() > TOLERANCE || (d.re - d.re.round()).abs() > TOLERANCE {
                return bad("degree is not a positive integer");
            }
            degrees += d.re.round() * d.re.round();
        }
        if (degrees - self.order as f64).abs() > 0.5 {
            return bad("degrees squared do not sum to the order");
        }
        for i in 0..k {
            for j in i..k {
                if !self.orthogonal(i, j) {
                    return Err(BurnsideError::Orthogonality(i, j));
                }
            }
        }
        Ok(())
    }

    fn orthogonal(&self, i: usize, j: usize) -> bool {
        let (a, b) = (&self.characters[i], &self.characters[j]);
        let target = if i == j { self.order as f64 } else { 0.0 };
        if a.iter().chain(b).all(|v| v.exact.is_some()) {
            let mut acc: Gauss = (BigRational::zero(), BigRational::zero());
            for c in 0..self.class_count() {
                let (x, y) = (a[c].exact.clone().unwrap(), b[c].exact.clone().unwrap());
                let p = gmul(&x, &(y.0, -y.1));
                let n = BigRational::from_integer(self.sizes[c].into());
                acc = (acc.0 + &n * p.0, acc.1 + n * p.1);
            }
            let t = BigRational::from_integer(BigInt::from(target as u64));
            return acc.0 == t && acc.1.is_zero();
        }
        let (mut re, mut im) = (0.0, 0.0);
        for c in 0..self.class_count() {
            let n = self.sizes[c] as f64;
            re += n * (a[c].re * b[c].re + a[c].im * b[c].im);
            im += n * (a[c].im * b[c].re - a[c].re * b[c].im);
        }
        (re - target).abs() <= TOLERANCE * self.order as f64 && im.abs() <= TOLERANCE * self.order as f64
    }
}

/// `Σ_χ χ(g)/χ(1)^{2r−1}`; exact when the class column and degrees are.
#[derive(Clone, Debug, PartialEq)]
pub enum BurnsideSum {
    Exact(BigRational),
    Float { value: f64, scale: f64 },
}

impl BurnsideSum {
    pub fn is_positive(&self) -> bool {
        match self {
            BurnsideSum::Exact(x) => x.is_positive(),
            BurnsideSum::Float { value, scale } => *value > TOLERANCE * scale,
        }
    }
}

pub fn burnside_sum(table: &CharacterTable, class: usize, r: u32) -> Result<BurnsideSum, BurnsideError> {
    if class >= table.class_count() {
        return Err(BurnsideError::BadClass(class));
    }
    let e = 2 * r.max(1) as i32 - 1;
    let id = table.identity;
    if table.characters.iter().all(|row| row[class].exact.is_some() && row[id].exact.is_some()) {
        let mut acc = BigRational::zero();
        for row in &table.characters {
            let d = &row[id].exact.as_ref().unwrap().0;
            acc += &row[class].exact.as_ref().unwrap().0 / d.pow(e);
        }
        return Ok(BurnsideSum::Exact(acc));
    }
    let (mut value, mut scale) = (0.0, 0.0);
    for row in &table.characters {
        let t = row[class].re / row[id].re.powi(e);
        value += t;
        scale += t.abs();
    }
    Ok(BurnsideSum::Float { value, scale })
}

/// Whether every element of the class is a product of `r` commutators.
/// A vanishing sum counts as "not a product".
pub fn burnside_is_product(table: &CharacterTable, class: usize, r: u32) -> Result<bool, BurnsideError> {
    table.validate()?;
    Ok(burnside_sum(table, class, r)?.is_positive())
}

/// Elements of a permutation group with index lookup.
pub struct Elements {
    pub elems: Vec<Perm>,
    pub index: HashMap<Perm, usize>,
}

impl Elements {
    pub fn enumerate(g: &PermGroup) -> Result<Elements, BurnsideError> {
        let id = perm::identity(g.degree());
        let mut elems = vec![id.clone()];
        let mut index = HashMap::from([(id, 0)]);
        let mut i = 0;
        while i < elems.len() {
            for s in g.generators() {
                let y = perm::compose(&elems[i], s);
                if !index.contains_key(&y) {
                    if elems.len() >= ORDER_CAP {
                        return Err(BurnsideError::TooLarge(elems.len() + 1));
                    }
                    index.insert(y.clone(), elems.len());
                    elems.push(y);
                }
            }
            i += 1;
        }
        Ok(Elements { elems, index })
    }

    pub fn len(&self) -> usize {
        self.elems.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elems.is_empty()
    }

    pub fn id_of(&self, p: &[u32]) -> usize {
        self.index[p]
    }

    pub fn mul(&self, x: usize, y: usize) -> usize {
        self.index[&perm::compose(&self.elems[x], &self.elems[y])]
    }

    /// Conjugacy classes as sorted index lists, ordered by least member.
    pub fn classes(&self, gens: &[Perm]) -> Vec<Vec<usize>> {
        let mut seen = vec![false; self.len()];
        let mut out = Vec::new();
        for start in 0..self.len() {
            if seen[start] {
                continue;
            }
            seen[start] = true;
            let mut class = vec![start];
            let mut queue = VecDeque::from([start]);
            while let Some(x) = queue.pop_front() {
                for s in gens {
                    let y = self.id_of(&perm::conjugate(&self.elems[x], s));
                    if !seen[y] {
                        seen[y] = true;
                        class.push(y);
                        queue.push_back(y);
                    }
                }
            }
            class.sort();
            out.push(class);
        }
        out
    }

    /// The set of commutators, using `[x,y]^g = [x^g,y^g]`.
    pub fn commutators(&self, gens: &[Perm]) -> Vec<bool> {
        let mut set = vec![false; self.len()];
        for class in self.classes(gens) {
            let x = &self.elems[class[0]];
            for y in &self.elems {
                set[self.id_of(&perm::commutator(x, y))] = true;
            }
        }
        set
    }

    /// `products[r][g]`: `g` is a product of `r` commutators, for `r ≤ max_r`.
    pub fn commutator_products(&self, gens: &[Perm], max_r: usize) -> Vec<Vec<bool>> {
        let comm: Vec<usize> = self.commutators(gens).iter().enumerate().filter(|p| *p.1).map(|p| p.0).collect();
        let mut out = vec![vec![false; self.len()]];
        out[0][0] = true;
        for r in 1..=max_r {
            let mut next = vec![false; self.len()];
            for x in (0..self.len()).filter(|&x| out[r - 1][x]) {
                for &c in &comm {
                    next[self.mul(x, c)] = true;
                }
            }
            out.push(next);
        }
        out
    }
}

/// Outcome of the brute-force width computation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Width {
    Exact(usize),
    AboveCap(usize),
}

/// The least `n` with `(commutator set)ⁿ ⊇ G′`.
pub fn commutator_width_bruteforce(g: &PermGroup, cap: usize) -> Result<Width, BurnsideError> {
    let el = Elements::enumerate(g)?;
    let gens = g.generators();
    let comm: Vec<usize> = el.commutators(gens).iter().enumerate().filter(|p| *p.1).map(|p| p.0).collect();
    // Derived subgroup: closure of the commutator set under products.
    let mut derived: HashSet<usize> = HashSet::from([0]);
    let mut queue = VecDeque::from([0]);
    while let Some(x) = queue.pop_front() {
        for &c in &comm {
            let y = el.mul(x, c);
            if derived.insert(y) {
                queue.push_back(y);
            }
        }
    }
    // id is a commutator, so the sets of products of n commutators increase.
    let mut reached = vec![false; el.len()];
    reached[0] = true;
    for n in 0..=cap {
        if derived.iter().all(|&x| reached[x]) {
            return Ok(Width::Exact(n));
        }
        let mut next = vec![false; el.len()];
        for x in (0..el.len()).filter(|&x| reached[x]) {
            for &c in &comm {
                next[el.mul(x, c)] = true;
            }
        }
        reached = next;
    }
    Ok(Width::AboveCap(cap))
}

/// `Γ_n = F_n/⟨γ₃(F_n), x₁², …, x_n²⟩`, acting on one 2-point block per
/// generator and one square per pair of generators.
pub fn gamma_n_group(n: usize) -> PermGroup {
    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect();
    let degree = 2 * n + 4 * pairs.len();
    let gens: Vec<Perm> = (0..n)
        .map(|k| {
            let mut p = perm::identity(degree);
            p.swap(2 * k, 2 * k + 1);
            for (b, &(i, j)) in pairs.iter().enumerate() {
                let o = 2 * n + 4 * b;
                // Reflections of a square: a diagonal and an edge reflection.
                if k == i {
                    p.swap(o + 1, o + 3);
                } else if k == j {
                    p.swap(o, o + 1);
                    p.swap(o + 2, o + 3);
                }
            }
            p
        })
        .collect();
    PermGroup::new(degree.max(1), &gens)
}
