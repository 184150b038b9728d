use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use num_bigint::BigUint;
use serde_json::json;

use grigorchuk_cw::burnside::{burnside_is_product, CharacterTable};
use grigorchuk_cw::constraints::{reduce_constraint, reduce_constraint4, OrbitTable};
use grigorchuk_cw::equations::{normal_form, parse_equation, NormalKind};
use grigorchuk_cw::goodpairs::{
    certify_with, cw_k_constraints, noncommutator_fixture_checks, verify_conjugacy_progress, verify_cw_k_with,
    verify_successors_progress, Classes, GoodPairTable, Rank, SuccessorTable, FULL,
};
use grigorchuk_cw::quotients::{germ_group, standard_transversal, transversal_check, QuotientStructure};
use grigorchuk_cw::store::{self, Artifact, Store, StoreError};
use grigorchuk_cw::tree;
use grigorchuk_cw::words::{verify_weight_identities, weighted_length, GenWord};

const EXIT_FAIL: u8 = 1;
const EXIT_USAGE: u8 = 2;
const EXIT_MISSING: u8 = 3;

// println! that tolerates a closed stdout (e.g. piping into `head`).
macro_rules! out {
    ($($t:tt)*) => {{
        use std::io::Write;
        let _ = writeln!(std::io::stdout(), $($t)*);
    }};
}

/// Precompute, verify and inspect the finite data behind the commutator
/// width bounds for the first Grigorchuk group.
#[derive(Parser)]
#[command(name = "grigcw", version)]
struct Cli {
    /// Directory holding the certificate files.
    #[arg(long, default_value = "grgw-store", global = true)]
    store: PathBuf,
    /// Worker threads; defaults to the available parallelism.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Compute a target and write it to the store.
    Precompute { target: Target },
    /// Run named checks (default: all) and print PASS/FAIL for each.
    Verify {
        #[arg(value_enum)]
        checks: Vec<Check>,
    },
    /// Query single objects.
    Inspect {
        /// Print JSON instead of text.
        #[arg(long)]
        json: bool,
        #[command(subcommand)]
        what: Inspect,
    },
    /// Burnside's criterion on a character table given as JSON.
    Burnside {
        #[arg(long)]
        table: PathBuf,
        #[arg(long)]
        class: usize,
        #[arg(long, default_value_t = 1)]
        r: u32,
    },
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Target {
    Orbits,
    Quotients,
    Goodpairs,
    Successors,
    Conjugacy,
    All,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Check {
    All,
    Orbits90,
    Orbits86,
    GoodConstraints,
    GoodConstraints4,
    Successors,
    CwK,
    Conjugacy,
    Transversal,
    GermOrders,
    Weights,
    Fixtures,
}

const ALL_CHECKS: [Check; 11] = [
    Check::Orbits90,
    Check::Orbits86,
    Check::GoodConstraints,
    Check::GoodConstraints4,
    Check::Successors,
    Check::CwK,
    Check::Conjugacy,
    Check::Transversal,
    Check::GermOrders,
    Check::Weights,
    Check::Fixtures,
];

#[derive(Subcommand)]
enum Inspect {
    /// Reduce a constraint such as `0,3,1,0` to its orbit representative.
    ReduceConstraint { tuple: String },
    /// Whether `(τ(word), tuple)` is a good pair.
    GoodPair { word: String, tuple: String },
    /// The stored successor of `(τ(word), tuple)`.
    Successor { word: String, tuple: String },
    /// Weighted length in `Z[η]`.
    Length { word: String },
    /// Activities down to the given depth.
    Portrait { word: String, depth: u32 },
    /// Normal form of a quadratic equation.
    Nf { equation: String },
    /// Succeeding-sequence certificate for `R₂·word`.
    Certify { word: String },
}

struct Failure {
    code: u8,
    msg: String,
}

impl Failure {
    fn new(code: u8, msg: impl Into<String>) -> Self {
        Failure { code, msg: msg.into() }
    }
}

impl From<StoreError> for Failure {
    fn from(e: StoreError) -> Self {
        let code = if matches!(e, StoreError::Missing(_)) { EXIT_MISSING } else { EXIT_FAIL };
        Failure::new(code, e.to_string())
    }
}

type Res<T> = Result<T, Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let threads = cli.jobs.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    if threads == 0 {
        eprintln!("--jobs must be positive");
        return ExitCode::from(EXIT_USAGE);
    }
    rayon::ThreadPoolBuilder::new().num_threads(threads).build_global().ok();
    let store = Store::new(&cli.store);
    let out = match cli.cmd {
        Cmd::Precompute { target } => precompute(&store, target),
        Cmd::Verify { checks } => verify(&store, &checks),
        Cmd::Inspect { json, what } => inspect(&store, json, what),
        Cmd::Burnside { table, class, r } => burnside(&table, class, r),
    };
    match out {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {}", f.msg);
            ExitCode::from(f.code)
        }
    }
}

fn progress(label: &'static str) -> impl Fn(usize, usize) + Sync {
    move |done, total| eprintln!("{label}: {done}/{total}")
}

fn require(store: &Store, targets: &[Artifact]) -> Res<()> {
    match targets.iter().find(|a| !store.contains(**a)) {
        Some(a) => Err(Failure::new(EXIT_MISSING, format!("{} is missing; precompute it first", a.file_name()))),
        None => Ok(()),
    }
}

fn stored_goodpairs(store: &Store) -> Res<GoodPairTable> {
    Ok(store::decode_goodpairs(&store.read(Artifact::GoodPairs)?)?)
}

fn precompute(store: &Store, target: Target) -> Res<u8> {
    let steps: &[Target] = match target {
        Target::All => &[Target::Quotients, Target::Orbits, Target::Goodpairs, Target::Successors, Target::Conjugacy],
        _ => std::slice::from_ref(&target),
    };
    for &t in steps {
        match t {
            Target::Quotients => {
                let qs = QuotientStructure::get();
                store.write(Artifact::Quotients, &store::encode_quotients(qs))?;
                out!("quotients: |G/K'| = {}, level {}", qs.order(), qs.level);
            }
            Target::Orbits => {
                require(store, &[Artifact::Quotients])?;
                for (n, a) in [(3, Artifact::Orbits3), (2, Artifact::Orbits2)] {
                    let t = OrbitTable::get(n).map_err(|e| Failure::new(EXIT_FAIL, e.to_string()))?;
                    store.write(a, &store::encode_orbits(t))?;
                    out!("{}: {} orbits", a.file_name(), t.orbit_count());
                }
            }
            Target::Goodpairs => {
                require(store, &[Artifact::Quotients, Artifact::Orbits3, Artifact::Orbits2])?;
                let t = GoodPairTable::get();
                store.write(Artifact::GoodPairs, &store::encode_goodpairs(t))?;
                out!("goodpairs: {} Red4 and {} Red columns", t.red4.len(), t.red.len());
            }
            Target::Successors => {
                require(store, &[Artifact::GoodPairs])?;
                let table = stored_goodpairs(store)?;
                let mut entries = Vec::new();
                for rank in [Rank::Two, Rank::Three] {
                    let r = verify_successors_progress(&table, rank, &progress("successors"))
                        .map_err(|e| Failure::new(EXIT_FAIL, e.to_string()))?;
                    if let Some((rank, q, g)) = r.failure {
                        return Err(Failure::new(EXIT_FAIL, format!("no successor for {rank:?} constraint {g}, class {q}")));
                    }
                    entries.extend(r.table.entries);
                }
                store.write(Artifact::Successors, &store::encode_successors(&SuccessorTable { entries: entries.clone() }))?;
                out!("successors: {} entries", entries.len());
            }
            Target::Conjugacy => {
                require(store, &[Artifact::GoodPairs])?;
                let table = stored_goodpairs(store)?;
                let r = verify_conjugacy_progress(&table, &progress("conjugacy"))
                    .map_err(|e| Failure::new(EXIT_FAIL, e.to_string()))?;
                if let Some(q) = r.failure {
                    return Err(Failure::new(EXIT_FAIL, format!("no conjugacy constraint for class {q}")));
                }
                store.write(Artifact::Conjugacy, &store::encode_conjugacy(&r.entries))?;
                out!("conjugacy: {} entries", r.entries.len());
            }
            Target::All => unreachable!(),
        }
    }
    Ok(0)
}

fn orbit_check(store: &Store, n: usize, expected: usize) -> Res<(bool, String)> {
    let a = if n == 3 { Artifact::Orbits3 } else { Artifact::Orbits2 };
    let qs = store.read(Artifact::Quotients)?;
    let stored = store::decode_orbits(&store.read(a)?, a.file_name())?;
    let fresh = OrbitTable::get(n).map_err(|e| Failure::new(EXIT_FAIL, e.to_string()))?;
    let same = qs == store::encode_quotients(QuotientStructure::get()) && stored.ids == fresh.ids && stored.reps == fresh.reps;
    let count = stored.reps.len();
    Ok((count == expected && same, format!("{count} orbits")))
}

fn run_check(store: &Store, c: Check) -> Res<(bool, String)> {
    let goodpairs = || -> Res<GoodPairTable> {
        let t = stored_goodpairs(store)?;
        if &t != GoodPairTable::get() {
            return Err(Failure::new(EXIT_FAIL, "stored good-pair table differs from recomputation"));
        }
        Ok(t)
    };
    let err = |e: grigorchuk_cw::goodpairs::GoodPairError| Failure::new(EXIT_FAIL, e.to_string());
    match c {
        Check::Orbits90 => orbit_check(store, 3, 90),
        Check::Orbits86 => orbit_check(store, 2, 86),
        Check::GoodConstraints | Check::GoodConstraints4 => {
            let rank = if c == Check::GoodConstraints { Rank::Three } else { Rank::Two };
            let cover = goodpairs()?.active_coverage(rank);
            Ok((cover == FULL, format!("{} of 128 classes covered", cover.count_ones())))
        }
        Check::Successors => {
            let t = goodpairs()?;
            let stored = store::decode_successors(&store.read(Artifact::Successors)?)?;
            let mut entries = Vec::new();
            for rank in [Rank::Two, Rank::Three] {
                let r = verify_successors_progress(&t, rank, &progress("successors")).map_err(err)?;
                if let Some(f) = r.failure {
                    return Ok((false, format!("no successor for {f:?}")));
                }
                entries.extend(r.table.entries);
            }
            Ok((entries == stored.entries, format!("{} good pairs", entries.len())))
        }
        Check::CwK => {
            let (g1, g2) = cw_k_constraints();
            let r = verify_cw_k_with(&goodpairs()?, &g1, &g2).map_err(err)?;
            Ok((r.ok, format!("{} state pairs", r.pairs)))
        }
        Check::Conjugacy => {
            let t = goodpairs()?;
            let stored = store::decode_conjugacy(&store.read(Artifact::Conjugacy)?)?;
            let r = verify_conjugacy_progress(&t, &progress("conjugacy")).map_err(err)?;
            Ok((r.ok && r.entries == stored, format!("{} classes", r.entries.len())))
        }
        Check::Transversal => {
            let t = standard_transversal();
            // Each element of T is a product of at most two conjugates of generators.
            Ok((transversal_check(QuotientStructure::get(), &t), format!("|T| = {}, conjugacy width <= 2 + 6", t.len())))
        }
        Check::GermOrders => {
            let order = |n| germ_group(n).map(|g| g.order()).map_err(|e| Failure::new(EXIT_FAIL, e.to_string()));
            let (g0, g4) = (order(0)?, order(4)?);
            Ok((g0 == BigUint::from(4u32) && g4 == BigUint::from(1u64 << 26), format!("|G0| = {g0}, |G4| = {g4}")))
        }
        Check::Weights => Ok((verify_weight_identities(), "eta weight identities".into())),
        Check::Fixtures => Ok((noncommutator_fixture_checks(), "witness word".into())),
        Check::All => unreachable!(),
    }
}

fn check_name(c: Check) -> String {
    c.to_possible_value().unwrap().get_name().to_string()
}

fn verify(store: &Store, checks: &[Check]) -> Res<u8> {
    if !store.dir.join(store::MANIFEST).exists() {
        return Err(Failure::new(EXIT_MISSING, format!("no store at {}", store.dir.display())));
    }
    let list: Vec<Check> =
        if checks.is_empty() || checks.contains(&Check::All) { ALL_CHECKS.to_vec() } else { checks.to_vec() };
    let mut all = true;
    for c in list {
        let (ok, detail) = match run_check(store, c) {
            Ok(r) => r,
            Err(f) if f.code == EXIT_MISSING => return Err(f),
            Err(f) => (false, f.msg),
        };
        all &= ok;
        out!("{}: {detail}: {}", check_name(c), if ok { "PASS" } else { "FAIL" });
    }
    Ok(if all { 0 } else { EXIT_FAIL })
}

fn parse_word(s: &str) -> Res<GenWord> {
    GenWord::parse_expr(s).map_err(|e| Failure::new(EXIT_USAGE, format!("bad word {s:?}: {e}")))
}

fn parse_tuple(s: &str) -> Res<Vec<u8>> {
    s.split(|c: char| c == ',' || c.is_whitespace())
        .filter(|t| !t.is_empty())
        .map(|t| t.parse::<u8>().map_err(|_| Failure::new(EXIT_USAGE, format!("bad tuple entry {t:?}"))))
        .collect()
}

fn class_of(g: &GenWord) -> Res<usize> {
    Classes::get().class_of_word(g).ok_or_else(|| Failure::new(EXIT_FAIL, format!("{g} is not in the derived subgroup")))
}

fn reduce(t: &[u8]) -> Res<(Rank, grigorchuk_cw::constraints::Reduction)> {
    let q = &QuotientStructure::get().q;
    let r = if t.len() == 4 { reduce_constraint4(q, t).map(|r| (Rank::Two, r)) } else { reduce_constraint(q, t).map(|r| (Rank::Three, r)) };
    r.map_err(|e| Failure::new(EXIT_USAGE, e.to_string()))
}

fn emit(json: bool, value: serde_json::Value, text: String) {
    if json {
        out!("{}", serde_json::to_string_pretty(&value).unwrap());
    } else {
        out!("{text}");
    }
}

fn inspect(store: &Store, json: bool, what: Inspect) -> Res<u8> {
    match what {
        Inspect::ReduceConstraint { tuple } => {
            let t = parse_tuple(&tuple)?;
            let (rank, r) = reduce(&t)?;
            let moves: Vec<String> = r.certificate.moves.iter().map(|m| m.name()).collect();
            emit(
                json,
                json!({"input": t, "rank": rank, "reduced": r.reduced, "orbit": r.orbit, "moves": moves}),
                format!("{:?} -> {:?} (orbit {}) via {}", t, r.reduced, r.orbit, moves.join(" ")),
            );
        }
        Inspect::GoodPair { word, tuple } => {
            let g = parse_word(&word)?;
            let t = parse_tuple(&tuple)?;
            if t.len() % 2 == 1 || t.iter().any(|&x| x >= 16) {
                return Err(Failure::new(EXIT_USAGE, "tuple must have even length with entries below 16"));
            }
            let q = class_of(&g)?;
            let good = Classes::get().is_good(q, &t);
            emit(json, json!({"word": word, "class": q, "tuple": t, "good": good}), good.to_string());
        }
        Inspect::Successor { word, tuple } => {
            let g = parse_word(&word)?;
            let q = class_of(&g)?;
            let (rank, r) = reduce(&parse_tuple(&tuple)?)?;
            let succ = store::decode_successors(&store.read(Artifact::Successors)?)?;
            let Some(e) = succ.lookup(rank, r.orbit, q) else {
                return Err(Failure::new(EXIT_FAIL, "not a good pair with an active constraint"));
            };
            let x = &grigorchuk_cw::goodpairs::conjugators()[e.x as usize];
            let next = tree::p_map(&g, x);
            emit(
                json,
                json!({"entry": e, "x": x.to_string(), "next_word": next.to_string()}),
                format!("x = {x}, next word {next}, target Red id {}, chain {}", e.target, e.chain_hash),
            );
        }
        Inspect::Length { word } => {
            let l = weighted_length(&parse_word(&word)?);
            emit(json, json!({"word": word, "length": l.to_string(), "approx": l.to_f64()}), l.to_string());
        }
        Inspect::Portrait { word, depth } => {
            let p = tree::portrait(&parse_word(&word)?, depth);
            let text = p.iter().map(|(v, a)| format!("{}: {}", if v.is_empty() { "root" } else { v }, *a as u8)).collect::<Vec<_>>();
            emit(json, json!(p.iter().map(|(v, a)| json!({"vertex": v, "active": a})).collect::<Vec<_>>()), text.join("\n"));
        }
        Inspect::Nf { equation } => {
            let e = parse_equation(&equation).map_err(|e| Failure::new(EXIT_USAGE, e.to_string()))?;
            let nf = normal_form(&e).map_err(|e| Failure::new(EXIT_FAIL, e.to_string()))?;
            let kind = if nf.kind == NormalKind::Oriented { "oriented" } else { "unoriented" };
            emit(
                json,
                json!({"normal_form": nf.word.to_string(), "kind": kind, "genus": nf.genus, "constants": nf.constants}),
                format!("{} ({kind}, genus {})", nf.word, nf.genus),
            );
        }
        Inspect::Certify { word } => {
            let g = parse_word(&word)?;
            class_of(&g)?;
            let table = stored_goodpairs(store)?;
            let succ = store::decode_successors(&store.read(Artifact::Successors)?)?;
            let c = certify_with(&g, &table, &succ).map_err(|e| Failure::new(EXIT_FAIL, e.to_string()))?;
            out!("{}", serde_json::to_string_pretty(&c).unwrap());
        }
    }
    Ok(0)
}

fn burnside(path: &PathBuf, class: usize, r: u32) -> Res<u8> {
    let bytes = std::fs::read(path).map_err(|e| Failure::new(EXIT_MISSING, format!("{}: {e}", path.display())))?;
    let table: CharacterTable =
        serde_json::from_slice(&bytes).map_err(|e| Failure::new(EXIT_USAGE, format!("bad table: {e}")))?;
    let ok = burnside_is_product(&table, class, r).map_err(|e| Failure::new(EXIT_FAIL, e.to_string()))?;
    out!("{ok}");
    Ok(0)
}
