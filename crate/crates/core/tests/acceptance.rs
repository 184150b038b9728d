//! End-to-end acceptance run. Prints one PASS/FAIL line per criterion and
//! exits non-zero if any criterion fails.

mod common;

use std::collections::BTreeMap;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use grigorchuk_cw::constraints::OrbitTable;
use grigorchuk_cw::goodpairs::{
    noncommutator_fixture_checks, verify_conjugacy_with, verify_cw_k, verify_successors_with, GoodPairTable, Rank,
    FULL,
};
use grigorchuk_cw::quotients::{
    build_tower, germ_group, stable_level, standard_transversal, transversal_check, QuotientStructure, Q_ORDER,
};
use num_bigint::BigUint;

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn orbit_counts() -> Outcome {
    let t = Instant::now();
    let n3 = OrbitTable::get(3).map_err(|e| e.to_string())?.orbit_count();
    let elapsed = t.elapsed();
    let n2 = OrbitTable::get(2).map_err(|e| e.to_string())?.orbit_count();
    let detail = format!("{n3} orbits under U3 in {elapsed:.1?}, {n2} under U2");
    check(n3 == 90 && n2 == 86 && elapsed <= Duration::from_secs(600), detail)
}

fn structure_constants() -> Outcome {
    let qs = QuotientStructure::get();
    let m = stable_level().map_err(|e| e.to_string())?;
    let tower = build_tower(m).map_err(|e| e.to_string())?;
    let indices = tower.indices();
    let expected = [8u32, 2, 4, 16].map(BigUint::from);
    let mut labels = qs.rho.clone();
    labels.sort();
    labels.dedup();
    let q = labels.len();
    let detail = format!(
        "level {m}, |Q| = {q}, indices {}, |G/K'| = {}, |G'/K'| = {}",
        indices.iter().map(|i| i.to_string()).collect::<Vec<_>>().join(", "),
        qs.reps.len(),
        qs.derived.len()
    );
    let ok = q == 16
        && qs.q.reps.len() == Q_ORDER
        && indices == expected
        && tower.kprime_index() == BigUint::from(1024u32)
        && qs.reps.len() == 1024
        && qs.derived.len() == 128;
    check(ok, detail)
}

fn good_constraints() -> Outcome {
    let t = GoodPairTable::get();
    let (red, red4) = (t.active_coverage(Rank::Three), t.active_coverage(Rank::Two));
    let detail = format!("Red_act covers {}, Red4_act covers {} of 128 classes", red.count_ones(), red4.count_ones());
    check(red == FULL && red4 == FULL, detail)
}

fn successors() -> Outcome {
    let t0 = Instant::now();
    let table = GoodPairTable::get();
    let mut total = 0;
    for rank in [Rank::Two, Rank::Three] {
        let r = verify_successors_with(table, rank).map_err(|e| e.to_string())?;
        if !r.ok || r.failure.is_some() {
            return Err(format!("no successor for {:?}", r.failure));
        }
        total += r.table.entries.len();
    }
    let elapsed = t0.elapsed();
    check(elapsed <= Duration::from_secs(1800), format!("{total} good pairs in {elapsed:.1?}"))
}

fn cw_k() -> Outcome {
    check(verify_cw_k(), "every state pair of K' is good for both constraints".into())
}

fn conjugacy() -> Outcome {
    let r = verify_conjugacy_with(GoodPairTable::get()).map_err(|e| e.to_string())?;
    let t = standard_transversal();
    let tv = transversal_check(QuotientStructure::get(), &t);
    let detail = format!("{} classes, failure {:?}, transversal of size {} valid: {tv}", r.entries.len(), r.failure, t.len());
    check(r.ok && r.entries.len() == 128 && tv, detail)
}

fn fixtures() -> Outcome {
    check(noncommutator_fixture_checks(), "witness word lies in K and passes the omega check".into())
}

fn germs_and_burnside() -> Outcome {
    let t = Instant::now();
    let g0 = germ_group(0).map_err(|e| e.to_string())?.order();
    let g4 = germ_group(4).map_err(|e| e.to_string())?.order();
    let elapsed = t.elapsed();
    let mut groups = common::stored_fixtures();
    groups.push(common::gamma_n_fixture(3));
    groups.push(common::gamma_n_fixture(4));
    let mut agree = 0;
    let mut bad = Vec::new();
    for f in &groups {
        let d = common::burnside_disagreements(f, 4);
        if d.is_empty() && f.table.order <= 2000 {
            agree += 1;
        } else {
            bad.push(f.name.clone());
        }
    }
    let detail = format!(
        "|G0| = {g0}, |G4| = {g4} in {elapsed:.1?}; Burnside agrees on {agree} of {} groups {bad:?}",
        groups.len()
    );
    let ok = g0 == BigUint::from(4u32)
        && g4 == BigUint::from(1u64 << 26)
        && elapsed <= Duration::from_secs(60)
        && bad.is_empty()
        && agree >= 5;
    check(ok, detail)
}

fn property_suites() -> Outcome {
    let mut failed = Vec::new();
    let all = common::props::all();
    for (name, f) in &all {
        if let Err(e) = f(&mut common::props::rng()) {
            failed.push(format!("{name}: {e}"));
        }
    }
    check(failed.is_empty(), if failed.is_empty() { format!("{} suites", all.len()) } else { failed.join("; ") })
}

fn run_cli(store: &Path, args: &[&str]) -> Result<i32, String> {
    let out = Command::new(env!("CARGO_BIN_EXE_grigcw"))
        .arg("--store")
        .arg(store)
        .args(args)
        .output()
        .map_err(|e| e.to_string())?;
    Ok(out.status.code().unwrap_or(-1))
}

fn store_bytes(dir: &Path) -> Result<BTreeMap<String, Vec<u8>>, String> {
    let mut files = BTreeMap::new();
    for entry in std::fs::read_dir(dir).map_err(|e| e.to_string())? {
        let entry = entry.map_err(|e| e.to_string())?;
        let bytes = std::fs::read(entry.path()).map_err(|e| e.to_string())?;
        files.insert(entry.file_name().to_string_lossy().into_owned(), bytes);
    }
    Ok(files)
}

fn end_to_end() -> Outcome {
    let (a, b) = (tempfile::tempdir().map_err(|e| e.to_string())?, tempfile::tempdir().map_err(|e| e.to_string())?);
    let first = run_cli(a.path(), &["precompute", "all"])?;
    let before = store_bytes(a.path())?;
    let verify = run_cli(a.path(), &["verify", "all"])?;
    let untouched = store_bytes(a.path())? == before;
    let second = run_cli(b.path(), &["precompute", "all"])?;
    let identical = store_bytes(b.path())? == before;
    let detail = format!(
        "precompute exits {first} and {second}, verify exits {verify}, {} files, identical: {identical}, verify read-only: {untouched}",
        before.len()
    );
    check(first == 0 && second == 0 && verify == 0 && identical && untouched, detail)
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("orbit counts", orbit_counts),
        ("structure constants", structure_constants),
        ("good-constraint coverage", good_constraints),
        ("successor existence", successors),
        ("commutator width of K", cw_k),
        ("conjugacy", conjugacy),
        ("fixtures", fixtures),
        ("germ groups and Burnside oracle", germs_and_burnside),
        ("property suites", property_suites),
        ("end-to-end store", end_to_end),
    ];
    let mut failures = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let t = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|_| Err("panicked".into()));
        let (status, detail) = match outcome {
            Ok(d) => ("PASS", d),
            Err(d) => {
                failures += 1;
                ("FAIL", d)
            }
        };
        println!("criterion {}: {name}: {status} ({detail}; {:.1?})", i + 1, t.elapsed());
    }
    println!("{} of {} criteria passed", criteria.len() - failures, criteria.len());
    if failures > 0 {
        std::process::exit(1);
    }
}
