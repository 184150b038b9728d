//! Versioned binary files for precomputed tables, with a JSON manifest of
//! content hashes and an upstream hash chain.
//!
//! Every file is `GRGW | version u16 | kind u8 | upstream hash [32] |
//! payload length u64 | payload`, little-endian throughout.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::constraints::{Constraint, OrbitTable};
use crate::goodpairs::{ConjugacyEntry, GoodPairTable, Rank, SuccessorEntry, SuccessorTable};
use crate::quotients::QuotientStructure;

pub const MAGIC: &[u8; 4] = b"GRGW";
pub const FORMAT_VERSION: u16 = 1;
pub const MANIFEST: &str = "manifest.json";

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("{0} is missing")]
    Missing(&'static str),
    #[error("hash mismatch for {0}")]
    HashMismatch(&'static str),
    #[error("{0}: {1}")]
    Corrupt(&'static str, String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Artifact {
    Quotients,
    Orbits3,
    Orbits2,
    GoodPairs,
    Successors,
    Conjugacy,
}

impl Artifact {
    pub const ALL: [Artifact; 6] = [
        Artifact::Quotients,
        Artifact::Orbits3,
        Artifact::Orbits2,
        Artifact::GoodPairs,
        Artifact::Successors,
        Artifact::Conjugacy,
    ];

    pub fn file_name(self) -> &'static str {
        match self {
            Artifact::Quotients => "quotients.dat",
            Artifact::Orbits3 => "orbits3.dat",
            Artifact::Orbits2 => "orbits2.dat",
            Artifact::GoodPairs => "goodpairs.dat",
            Artifact::Successors => "successors.dat",
            Artifact::Conjugacy => "conjugacy.dat",
        }
    }

    pub fn upstream(self) -> &'static [Artifact] {
        match self {
            Artifact::Quotients => &[],
            Artifact::Orbits3 | Artifact::Orbits2 => &[Artifact::Quotients],
            Artifact::GoodPairs => &[Artifact::Quotients, Artifact::Orbits3, Artifact::Orbits2],
            Artifact::Successors | Artifact::Conjugacy => &[Artifact::GoodPairs],
        }
    }

    fn kind(self) -> u8 {
        self as u8 + 1
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileRecord {
    pub sha256: String,
    pub upstream: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub format_version: u16,
    pub files: BTreeMap<String, FileRecord>,
}

impl Default for Manifest {
    fn default() -> Self {
        Manifest { format_version: FORMAT_VERSION, files: BTreeMap::new() }
    }
}

fn sha_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// A directory of certificate files.
pub struct Store {
    pub dir: PathBuf,
}

impl Store {
    pub fn new(dir: impl Into<PathBuf>) -> Store {
        Store { dir: dir.into() }
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    pub fn manifest(&self) -> Result<Manifest, StoreError> {
        match fs::read(self.path(MANIFEST)) {
            Ok(b) => Ok(serde_json::from_slice(&b)?),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(Manifest::default()),
            Err(e) => Err(e.into()),
        }
    }

    pub fn contains(&self, a: Artifact) -> bool {
        self.manifest().is_ok_and(|m| m.files.contains_key(a.file_name())) && self.path(a.file_name()).exists()
    }

    fn upstream_hash(m: &Manifest, a: Artifact) -> Result<[u8; 32], StoreError> {
        let mut h = Sha256::new();
        for u in a.upstream() {
            let rec = m.files.get(u.file_name()).ok_or(StoreError::Missing(u.file_name()))?;
            h.update(u.file_name().as_bytes());
            h.update(rec.sha256.as_bytes());
        }
        Ok(h.finalize().into())
    }

    fn write_atomic(&self, name: &str, bytes: &[u8]) -> Result<(), StoreError> {
        fs::create_dir_all(&self.dir)?;
        let tmp = self.path(&format!(".{name}.tmp"));
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        fs::rename(&tmp, self.path(name))?;
        Ok(())
    }

    /// Writes a file and its manifest record. Upstream files must be present.
    pub fn write(&self, a: Artifact, payload: &[u8]) -> Result<(), StoreError> {
        let mut m = self.manifest()?;
        for u in a.upstream() {
            if !self.contains(*u) {
                return Err(StoreError::Missing(u.file_name()));
            }
        }
        let mut bytes = Vec::with_capacity(payload.len() + 47);
        bytes.extend_from_slice(MAGIC);
        bytes.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        bytes.push(a.kind());
        bytes.extend_from_slice(&Self::upstream_hash(&m, a)?);
        bytes.extend_from_slice(&(payload.len() as u64).to_le_bytes());
        bytes.extend_from_slice(payload);
        self.write_atomic(a.file_name(), &bytes)?;
        m.files.insert(
            a.file_name().to_string(),
            FileRecord { sha256: sha_hex(&bytes), upstream: a.upstream().iter().map(|u| u.file_name().to_string()).collect() },
        );
        self.write_atomic(MANIFEST, (serde_json::to_string_pretty(&m)? + "\n").as_bytes())
    }

    /// Reads a payload after checking its hash, header and upstream chain.
    pub fn read(&self, a: Artifact) -> Result<Vec<u8>, StoreError> {
        let name = a.file_name();
        let m = self.manifest()?;
        let rec = m.files.get(name).ok_or(StoreError::Missing(name))?;
        let bytes = match fs::read(self.path(name)) {
            Ok(b) => b,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Err(StoreError::Missing(name)),
            Err(e) => return Err(e.into()),
        };
        if sha_hex(&bytes) != rec.sha256 {
            return Err(StoreError::HashMismatch(name));
        }
        let corrupt = |s: &str| StoreError::Corrupt(name, s.to_string());
        if bytes.len() < 47 || &bytes[..4] != MAGIC {
            return Err(corrupt("bad magic"));
        }
        if u16::from_le_bytes([bytes[4], bytes[5]]) != FORMAT_VERSION || bytes[6] != a.kind() {
            return Err(corrupt("unsupported version or kind"));
        }
        if bytes[7..39] != Self::upstream_hash(&m, a)? {
            return Err(StoreError::HashMismatch(name));
        }
        let len = u64::from_le_bytes(bytes[39..47].try_into().unwrap()) as usize;
        if bytes.len() != 47 + len {
            return Err(corrupt("length"));
        }
        Ok(bytes[47..].to_vec())
    }
}

/// Little-endian payload writer.
#[derive(Default)]
pub struct Enc(pub Vec<u8>);

impl Enc {
    pub fn u8(&mut self, x: u8) {
        self.0.push(x);
    }
    pub fn u16(&mut self, x: u16) {
        self.0.extend_from_slice(&x.to_le_bytes());
    }
    pub fn u32(&mut self, x: u32) {
        self.0.extend_from_slice(&x.to_le_bytes());
    }
    pub fn u128(&mut self, x: u128) {
        self.0.extend_from_slice(&x.to_le_bytes());
    }
    pub fn bytes(&mut self, b: &[u8]) {
        self.u32(b.len() as u32);
        self.0.extend_from_slice(b);
    }
    pub fn str(&mut self, s: &str) {
        self.bytes(s.as_bytes());
    }
}

/// Payload reader; every method fails on truncation.
pub struct Dec<'a> {
    buf: &'a [u8],
    pos: usize,
    name: &'static str,
}

impl<'a> Dec<'a> {
    pub fn new(buf: &'a [u8], name: &'static str) -> Self {
        Dec { buf, pos: 0, name }
    }
    fn take(&mut self, n: usize) -> Result<&'a [u8], StoreError> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.buf.len());
        let end = end.ok_or_else(|| StoreError::Corrupt(self.name, "truncated payload".into()))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }
    pub fn u8(&mut self) -> Result<u8, StoreError> {
        Ok(self.take(1)?[0])
    }
    pub fn u16(&mut self) -> Result<u16, StoreError> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }
    pub fn u32(&mut self) -> Result<u32, StoreError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
    pub fn u128(&mut self) -> Result<u128, StoreError> {
        Ok(u128::from_le_bytes(self.take(16)?.try_into().unwrap()))
    }
    pub fn bytes(&mut self) -> Result<Vec<u8>, StoreError> {
        let n = self.u32()? as usize;
        Ok(self.take(n)?.to_vec())
    }
    pub fn str(&mut self) -> Result<String, StoreError> {
        String::from_utf8(self.bytes()?).map_err(|_| StoreError::Corrupt(self.name, "utf-8".into()))
    }
    pub fn finish(self) -> Result<(), StoreError> {
        if self.pos == self.buf.len() {
            Ok(())
        } else {
            Err(StoreError::Corrupt(self.name, "trailing bytes".into()))
        }
    }
}

pub fn encode_quotients(qs: &QuotientStructure) -> Vec<u8> {
    let mut e = Enc::default();
    e.u32(qs.level);
    e.u32(qs.order() as u32);
    for row in &qs.right {
        row.iter().for_each(|&x| e.u16(x));
    }
    e.bytes(&qs.rho);
    e.bytes(&qs.rho_prime);
    for set in [&qs.derived, &qs.k, &qs.kxk] {
        e.bytes(&(0..qs.order()).map(|i| set.contains(i) as u8).collect::<Vec<_>>());
    }
    for row in &qs.q.mult {
        e.0.extend_from_slice(row);
    }
    e.0.extend_from_slice(&qs.q.inv);
    e.0.extend_from_slice(&qs.q.gens);
    for r in &qs.reps {
        e.str(&r.to_string());
    }
    e.0
}

/// Orbit count, representatives and the orbit id of every packed tuple.
pub fn encode_orbits(t: &OrbitTable) -> Vec<u8> {
    let mut e = Enc::default();
    e.u8(t.n as u8);
    e.u16(t.orbit_count() as u16);
    t.reps.iter().for_each(|&r| e.u32(r));
    e.bytes(&t.ids);
    e.0
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StoredOrbits {
    pub n: usize,
    pub reps: Vec<u32>,
    pub ids: Vec<u8>,
}

pub fn decode_orbits(b: &[u8], name: &'static str) -> Result<StoredOrbits, StoreError> {
    let mut d = Dec::new(b, name);
    let n = d.u8()? as usize;
    let count = d.u16()? as usize;
    let reps = (0..count).map(|_| d.u32()).collect::<Result<_, _>>()?;
    let ids = d.bytes()?;
    d.finish()?;
    Ok(StoredOrbits { n, reps, ids })
}

pub fn encode_goodpairs(t: &GoodPairTable) -> Vec<u8> {
    let mut e = Enc::default();
    for col in [&t.red4, &t.red] {
        e.u16(col.len() as u16);
        col.iter().for_each(|&x| e.u128(x));
    }
    e.0
}

pub fn decode_goodpairs(b: &[u8]) -> Result<GoodPairTable, StoreError> {
    let mut d = Dec::new(b, Artifact::GoodPairs.file_name());
    let mut col = || -> Result<Vec<u128>, StoreError> {
        let n = d.u16()?;
        (0..n).map(|_| d.u128()).collect()
    };
    let red4 = col()?;
    let red = col()?;
    d.finish()?;
    Ok(GoodPairTable { red4, red })
}

fn rank_code(r: Rank) -> u8 {
    r.n() as u8
}

pub fn encode_successors(t: &SuccessorTable) -> Vec<u8> {
    let mut e = Enc::default();
    e.u32(t.entries.len() as u32);
    for s in &t.entries {
        e.u8(rank_code(s.rank));
        for x in [s.gamma, s.q, s.target, s.x, s.variant, s.shift] {
            e.u8(x);
        }
        e.str(&s.y0);
        e.bytes(&s.state_constraint);
        e.bytes(&s.successor);
        e.str(&s.chain_hash);
    }
    e.0
}

pub fn decode_successors(b: &[u8]) -> Result<SuccessorTable, StoreError> {
    let name = Artifact::Successors.file_name();
    let mut d = Dec::new(b, name);
    let n = d.u32()?;
    let mut entries = Vec::with_capacity(n as usize);
    for _ in 0..n {
        let rank = match d.u8()? {
            2 => Rank::Two,
            3 => Rank::Three,
            _ => return Err(StoreError::Corrupt(name, "rank".into())),
        };
        let mut f = [0u8; 6];
        for x in f.iter_mut() {
            *x = d.u8()?;
        }
        let [gamma, q, target, x, variant, shift] = f;
        entries.push(SuccessorEntry {
            rank,
            gamma,
            q,
            target,
            x,
            y0: d.str()?,
            variant,
            shift,
            state_constraint: d.bytes()?,
            successor: d.bytes()?,
            chain_hash: d.str()?,
        });
    }
    d.finish()?;
    Ok(SuccessorTable { entries })
}

pub fn encode_conjugacy(entries: &[ConjugacyEntry]) -> Vec<u8> {
    let mut e = Enc::default();
    e.u32(entries.len() as u32);
    for c in entries {
        e.u8(c.q);
        e.bytes(&c.gamma);
        e.bytes(&c.state_constraint);
        e.str(&c.y0);
        e.u8(c.variant);
        e.bytes(&c.reduced_from);
        e.u8(c.target);
        e.str(&c.chain_hash);
    }
    e.0
}

pub fn decode_conjugacy(b: &[u8]) -> Result<Vec<ConjugacyEntry>, StoreError> {
    let mut d = Dec::new(b, Artifact::Conjugacy.file_name());
    let n = d.u32()?;
    let mut out = Vec::with_capacity(n as usize);
    for _ in 0..n {
        let q = d.u8()?;
        let gamma: Constraint = d.bytes()?;
        let state_constraint = d.bytes()?;
        let y0 = d.str()?;
        let variant = d.u8()?;
        let reduced_from = d.bytes()?;
        let target = d.u8()?;
        let chain_hash = d.str()?;
        out.push(ConjugacyEntry { q, gamma, state_constraint, y0, variant, reduced_from, target, chain_hash });
    }
    d.finish()?;
    Ok(out)
}

/// Hashes of every file in the directory, for read-only checks.
pub fn snapshot(dir: &Path) -> Result<BTreeMap<String, String>, StoreError> {
    let mut out = BTreeMap::new();
    for e in fs::read_dir(dir)? {
        let p = e?.path();
        if p.is_file() {
            out.insert(p.file_name().unwrap().to_string_lossy().into_owned(), sha_hex(&fs::read(&p)?));
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_and_tamper() {
        let dir = tempfile::tempdir().unwrap();
        let s = Store::new(dir.path());
        assert!(matches!(s.write(Artifact::GoodPairs, b"x"), Err(StoreError::Missing(_))));
        s.write(Artifact::Quotients, b"payload").unwrap();
        assert_eq!(s.read(Artifact::Quotients).unwrap(), b"payload");
        s.write(Artifact::Orbits3, b"three").unwrap();
        // Rewriting upstream invalidates the chain.
        s.write(Artifact::Quotients, b"other").unwrap();
        assert!(matches!(s.read(Artifact::Orbits3), Err(StoreError::HashMismatch(_))));
        let p = dir.path().join("quotients.dat");
        let mut b = fs::read(&p).unwrap();
        *b.last_mut().unwrap() ^= 1;
        fs::write(&p, b).unwrap();
        assert!(matches!(s.read(Artifact::Quotients), Err(StoreError::HashMismatch(_))));
    }

    #[test]
    fn goodpairs_codec() {
        let t = GoodPairTable { red4: vec![1, u128::MAX], red: vec![7] };
        assert_eq!(decode_goodpairs(&encode_goodpairs(&t)).unwrap(), t);
        assert!(decode_goodpairs(&encode_goodpairs(&t)[..5]).is_err());
    }
}
