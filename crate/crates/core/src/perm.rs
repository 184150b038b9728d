//! Permutation groups on small domains with a deterministic Schreier–Sims
//! stabilizer chain.
//!
//! Permutations act on the right: `p[x]` is the image of `x`, and the product
//! `p * q` applies `p` first.

use num_bigint::BigUint;
use num_traits::One;

pub type Perm = Vec<u32>;

pub fn identity(degree: usize) -> Perm {
    (0..degree as u32).collect()
}

pub fn is_identity(p: &[u32]) -> bool {
    p.iter().enumerate().all(|(i, &x)| i as u32 == x)
}

/// `p` followed by `q`.
pub fn compose(p: &[u32], q: &[u32]) -> Perm {
    p.iter().map(|&x| q[x as usize]).collect()
}

pub fn inverse(p: &[u32]) -> Perm {
    let mut inv = vec![0u32; p.len()];
    for (i, &x) in p.iter().enumerate() {
        inv[x as usize] = i as u32;
    }
    inv
}

/// `q⁻¹ p q`.
pub fn conjugate(p: &[u32], q: &[u32]) -> Perm {
    compose(&compose(&inverse(q), p), q)
}

pub fn commutator(p: &[u32], q: &[u32]) -> Perm {
    compose(&compose(&inverse(p), &inverse(q)), &compose(p, q))
}

#[derive(Clone, Debug)]
struct Level {
    base: u32,
    gens: Vec<Perm>,
    /// `transversal[x]` maps the base point to `x`.
    transversal: Vec<Option<Perm>>,
    orbit: Vec<u32>,
}

impl Level {
    fn new(base: u32, degree: usize) -> Self {
        let mut transversal = vec![None; degree];
        transversal[base as usize] = Some(identity(degree));
        Level { base, gens: Vec::new(), transversal, orbit: vec![base] }
    }

    fn extend_orbit(&mut self) {
        let mut i = 0;
        // Rescan the full orbit because a new generator can reach new points from old ones.
        while i < self.orbit.len() {
            let x = self.orbit[i];
            for s in &self.gens {
                let y = s[x as usize];
                if self.transversal[y as usize].is_none() {
                    let u = compose(self.transversal[x as usize].as_ref().unwrap(), s);
                    self.transversal[y as usize] = Some(u);
                    self.orbit.push(y);
                }
            }
            i += 1;
        }
    }
}

/// A permutation group given by a base and strong generating set.
#[derive(Clone, Debug)]
pub struct PermGroup {
    degree: usize,
    generators: Vec<Perm>,
    levels: Vec<Level>,
}

impl PermGroup {
    pub fn trivial(degree: usize) -> Self {
        PermGroup { degree, generators: Vec::new(), levels: Vec::new() }
    }

    pub fn new(degree: usize, gens: &[Perm]) -> Self {
        let mut g = Self::trivial(degree);
        for p in gens {
            g.add_generator(p.clone());
        }
        g
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn generators(&self) -> &[Perm] {
        &self.generators
    }

    pub fn base(&self) -> Vec<u32> {
        self.levels.iter().map(|l| l.base).collect()
    }

    pub fn orbit_lengths(&self) -> Vec<usize> {
        self.levels.iter().map(|l| l.orbit.len()).collect()
    }

    pub fn order(&self) -> BigUint {
        self.levels.iter().fold(BigUint::one(), |acc, l| acc * BigUint::from(l.orbit.len()))
    }

    /// Adds `p` to the generators; returns false if it was already a member.
    pub fn add_generator(&mut self, p: Perm) -> bool {
        assert_eq!(p.len(), self.degree);
        if self.contains(&p) {
            return false;
        }
        self.generators.push(p.clone());
        self.extend(0, p);
        true
    }

    fn extend(&mut self, i: usize, g: Perm) {
        if i == self.levels.len() {
            let moved = g.iter().enumerate().find(|(x, &y)| *x as u32 != y).map(|(x, _)| x as u32);
            let base = moved.expect("extend called with identity");
            self.levels.push(Level::new(base, self.degree));
        }
        self.levels[i].gens.push(g);
        self.levels[i].extend_orbit();
        loop {
            let mut residue = None;
            'search: for &x in &self.levels[i].orbit {
                let ux = self.levels[i].transversal[x as usize].as_ref().unwrap();
                for s in &self.levels[i].gens {
                    let y = s[x as usize];
                    let uy = self.levels[i].transversal[y as usize].as_ref().unwrap();
                    let schreier = compose(&compose(ux, s), &inverse(uy));
                    let (r, _) = self.sift_from(i + 1, schreier);
                    if !is_identity(&r) {
                        residue = Some(r);
                        break 'search;
                    }
                }
            }
            match residue {
                Some(r) => self.extend(i + 1, r),
                None => break,
            }
        }
    }

    fn sift_from(&self, start: usize, mut g: Perm) -> (Perm, usize) {
        for (i, l) in self.levels.iter().enumerate().skip(start) {
            let x = g[l.base as usize];
            match &l.transversal[x as usize] {
                Some(u) => g = compose(&g, &inverse(u)),
                None => return (g, i),
            }
        }
        let n = self.levels.len();
        (g, n)
    }

    pub fn contains(&self, p: &[u32]) -> bool {
        p.len() == self.degree && is_identity(&self.sift_from(0, p.to_vec()).0)
    }

    /// Normal closure of `elements` under conjugation by `ambient`.
    pub fn normal_closure(degree: usize, elements: &[Perm], ambient: &[Perm]) -> PermGroup {
        let mut n = PermGroup::trivial(degree);
        let mut queue: Vec<Perm> = elements.to_vec();
        while let Some(p) = queue.pop() {
            if n.add_generator(p.clone()) {
                for g in ambient {
                    queue.push(conjugate(&p, g));
                }
            }
        }
        n
    }

    /// The element of the coset `self · g` with lexicographically least image
    /// of the base. Requires `self` to be normalized by `g`, or at least the
    /// coset to be a right coset of `self`.
    pub fn canonical_coset_rep(&self, g: &[u32]) -> Perm {
        let mut h = g.to_vec();
        for l in &self.levels {
            let best = l.orbit.iter().copied().min_by_key(|&x| h[x as usize]).unwrap();
            let u = l.transversal[best as usize].as_ref().unwrap();
            h = compose(u, &h);
        }
        h
    }

    pub fn is_subgroup_of(&self, other: &PermGroup) -> bool {
        self.generators.iter().all(|g| other.contains(g))
    }
}
