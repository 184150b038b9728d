#![allow(dead_code)]

pub mod props;

use std::collections::HashMap;
use std::path::PathBuf;

use grigorchuk_cw::burnside::{gamma_n_group, CharValue, CharacterTable, Elements};
use grigorchuk_cw::perm::{self, Perm, PermGroup};
use num_rational::BigRational;
use serde::Deserialize;

/// A small group with a character table and a representative per class.
pub struct TableFixture {
    pub name: String,
    pub group: PermGroup,
    pub class_reps: Vec<Perm>,
    pub table: CharacterTable,
}

#[derive(Deserialize)]
struct RawFixture {
    name: String,
    degree: usize,
    generators: Vec<Perm>,
    class_reps: Vec<Perm>,
    #[serde(flatten)]
    table: CharacterTable,
}

pub fn tables_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/data/tables")
}

pub fn load_fixture(name: &str) -> TableFixture {
    let path = tables_dir().join(format!("{name}.json"));
    let text = std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    let raw: RawFixture = serde_json::from_str(&text).unwrap();
    TableFixture {
        name: raw.name,
        group: PermGroup::new(raw.degree, &raw.generators),
        class_reps: raw.class_reps,
        table: raw.table,
    }
}

pub fn stored_fixtures() -> Vec<TableFixture> {
    ["s3", "d4", "q8", "s4", "a4", "d5"].iter().map(|n| load_fixture(n)).collect()
}

fn bit(x: usize, i: usize) -> bool {
    (x >> i) & 1 == 1
}

fn parity(x: usize) -> bool {
    x.count_ones() % 2 == 1
}

/// Character table of the class-two group `Γ_n`.
///
/// Elements are written `x^a z^c` with `x^a = x₁^{a₁}⋯x_n^{a_n}` and `z` running
/// over the basic commutators. For a character `λ` of the centre, the
/// irreducibles over `λ` vanish off the radical `R` of the commutator pairing
/// and equal `d·ν(a)·λ(c)` on it, where `d² = 2ⁿ/|R|` and `ν` runs over the
/// `|R|` solutions of `ν(a+b) = ν(a)ν(b)λ(c(a,b))`.
pub fn gamma_n_fixture(n: usize) -> TableFixture {
    let group = gamma_n_group(n);
    let gens = group.generators().to_vec();
    let deg = group.degree();
    let el = Elements::enumerate(&group).unwrap();

    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect();
    let m = pairs.len();
    let zs: Vec<Perm> = pairs.iter().map(|&(i, j)| perm::commutator(&gens[i], &gens[j])).collect();

    let x_pow = |a: usize| -> Perm {
        (0..n).filter(|&i| bit(a, i)).fold(perm::identity(deg), |acc, i| perm::compose(&acc, &gens[i]))
    };
    let z_pow = |c: usize| -> Perm {
        (0..m).filter(|&k| bit(c, k)).fold(perm::identity(deg), |acc, k| perm::compose(&acc, &zs[k]))
    };
    let mut coords: HashMap<Perm, (usize, usize)> = HashMap::new();
    for a in 0..1usize << n {
        for c in 0..1usize << m {
            coords.insert(perm::compose(&x_pow(a), &z_pow(c)), (a, c));
        }
    }
    assert_eq!(coords.len(), el.len(), "coordinates cover the group");
    // x^a x^b = x^{a+b} z^{cocycle(a,b)}
    let cocycle = |a: usize, b: usize| -> usize {
        let (s, c) = coords[&perm::compose(&x_pow(a), &x_pow(b))];
        assert_eq!(s, a ^ b);
        c
    };

    let classes = el.classes(&gens);
    let class_coords: Vec<(usize, usize)> = classes.iter().map(|cl| coords[&el.elems[cl[0]]]).collect();

    let mut characters = Vec::new();
    for lambda in 0..1usize << m {
        let lam = |c: usize| parity(c & lambda);
        let pairing = |a: usize, b: usize| lam(cocycle(a, b)) != lam(cocycle(b, a));
        let radical: Vec<usize> = (0..1usize << n).filter(|&a| (0..n).all(|i| !pairing(a, 1 << i))).collect();
        let r = radical.len();
        let d2 = (1usize << n) / r;
        let d = (d2 as f64).sqrt().round() as i64;
        assert_eq!((d * d) as usize, d2);
        // Basis of R by elimination.
        let mut basis: Vec<usize> = Vec::new();
        let mut span: Vec<usize> = vec![0];
        for &a in &radical {
            if !span.contains(&a) {
                basis.push(a);
                span = span.iter().flat_map(|&s| [s, s ^ a]).collect();
            }
        }
        for choice in 0..1usize << basis.len() {
            // ν as powers of i, modulo 4.
            let mut nu: HashMap<usize, u8> = HashMap::from([(0, 0)]);
            let mut order = vec![0usize];
            for (j, &b) in basis.iter().enumerate() {
                let sq = if lam(cocycle(b, b)) { 1u8 } else { 0 };
                let vb = sq + if bit(choice, j) { 2 } else { 0 };
                let mut added = Vec::new();
                for &a in &order {
                    let sign = if lam(cocycle(a, b)) { 2 } else { 0 };
                    added.push((a ^ b, (nu[&a] + vb + sign) % 4));
                }
                for (k, v) in added {
                    nu.insert(k, v);
                    order.push(k);
                }
            }
            let row = class_coords
                .iter()
                .map(|&(a, c)| match nu.get(&a) {
                    None => CharValue::int(0),
                    Some(&p) => {
                        let p = (p + if lam(c) { 2 } else { 0 }) % 4;
                        let (re, im) = [(d, 0), (0, d), (-d, 0), (0, -d)][p as usize];
                        CharValue::exact(BigRational::from_integer(re.into()), BigRational::from_integer(im.into()))
                    }
                })
                .collect();
            characters.push(row);
        }
    }
    let table = CharacterTable {
        order: el.len() as u64,
        sizes: classes.iter().map(|c| c.len() as u64).collect(),
        identity: 0,
        characters,
    };
    let class_reps = classes.iter().map(|cl| el.elems[cl[0]].clone()).collect();
    TableFixture { name: format!("gamma{n}"), group, class_reps, table }
}

/// Compares the character criterion with exhaustive products of commutators
/// for every class and `1 ≤ r ≤ max_r`, after validating the table once.
/// Returns the disagreements.
pub fn burnside_disagreements(f: &TableFixture, max_r: usize) -> Vec<(usize, usize)> {
    use grigorchuk_cw::burnside::burnside_sum;
    f.table.validate().unwrap_or_else(|e| panic!("{}: {e}", f.name));
    let el = Elements::enumerate(&f.group).unwrap();
    let products = el.commutator_products(f.group.generators(), max_r);
    let mut bad = Vec::new();
    for (class, rep) in f.class_reps.iter().enumerate() {
        let id = el.id_of(rep);
        for r in 1..=max_r {
            if burnside_sum(&f.table, class, r as u32).unwrap().is_positive() != products[r][id] {
                bad.push((class, r));
            }
        }
    }
    bad
}
