//! Batch front end: descriptor generation, pipeline runs and verification
//! suites. Every run is a pure function of its arguments, so reruns produce
//! identical bytes.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use crate::entourage::{
    check_neighbourhood, strip_diagonal, StripDiagonal, SymmetricDouble, TreeEntourage,
};
use crate::forest::{
    sample_connected_sets, sample_expansion, verify_forest, verify_same_tree, EntourageForest,
    ForestError, ForestExport,
};
use crate::graph::{FiniteInducedSubgraph, VertexId};
use crate::hall::{brute_force_matching, check_harem_condition, HallError, HallWitness};
use crate::matcher::{
    verify_cycle_control, verify_matching_contract, Checkpoint, HaremMatcher, MatchFunction,
    MatcherConfig, MatcherError,
};
use crate::wobble::{verify_free_semiregular, PermutationTable, WobbleError, Wobbling};

const SAMPLE_SETS: usize = 200;
const SAMPLE_SIZE: usize = 8;
const HALL_GRAPHS: usize = 100;
const SAME_TREE_RANGE: u64 = 100;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("bad space descriptor: {0}")]
    Descriptor(String),
    #[error("regular tree needs r >= 3, got {0}")]
    TreeDegree(u64),
    #[error("{0}")]
    Parameter(String),
    #[error("expansion bound {d}|F| fails on the sampled set {set:?}")]
    Hypothesis { d: u64, set: Vec<VertexId> },
    #[error(transparent)]
    Hall(#[from] HallError),
    #[error(transparent)]
    Matcher(#[from] MatcherError),
    #[error(transparent)]
    Forest(#[from] ForestError),
    #[error(transparent)]
    Wobble(#[from] WobbleError),
}

#[derive(Parser, Debug)]
#[command(
    name = "harem",
    version,
    about = "Computable harem matchings, regular forests and wobbling permutations"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Write a regular tree descriptor.
    GenTree {
        /// Vertex degree, at least 3.
        #[arg(long)]
        r: u64,
        /// Output path; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the matcher to N; export the checkpoint.
    Match(RunArgs),
    /// Build the d-regular forest to N; export its edges.
    Forest(RunArgs),
    /// Build sigma and pi on the 4-regular forest; export the table.
    Wobble(RunArgs),
    /// Run every suite; write a report and all exports into --out.
    Verify(RunArgs),
}

#[derive(Args, Debug, Clone)]
pub struct RunArgs {
    /// Space descriptor written by gen-tree.
    #[arg(long)]
    pub space: PathBuf,
    #[arg(long, default_value_t = 4)]
    pub d: u64,
    #[arg(long, default_value_t = 100, value_parser = clap::value_parser!(u64).range(1..))]
    pub n: u64,
    #[arg(long = "word-len", default_value_t = 4, value_parser = clap::value_parser!(u64).range(1..))]
    pub word_len: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Dot,
}

impl Format {
    fn extension(self) -> &'static str {
        match self {
            Format::Json => "json",
            Format::Dot => "dot",
        }
    }
}

/// Machine-readable space description.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SpaceDescriptor {
    RegularTree { r: u64 },
}

impl SpaceDescriptor {
    pub fn regular_tree(r: u64) -> Result<Self, CliError> {
        TreeEntourage::new(r).ok_or(CliError::TreeDegree(r))?;
        Ok(SpaceDescriptor::RegularTree { r })
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path).map_err(|source| CliError::Io {
            path: path.to_owned(),
            source,
        })?;
        let desc: Self =
            serde_json::from_str(&text).map_err(|e| CliError::Descriptor(e.to_string()))?;
        desc.entourage()?;
        Ok(desc)
    }

    pub fn entourage(&self) -> Result<TreeEntourage, CliError> {
        match *self {
            SpaceDescriptor::RegularTree { r } => {
                TreeEntourage::new(r).ok_or(CliError::TreeDegree(r))
            }
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("descriptor serializes")
    }
}

/// Outcome of one suite.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuiteResult {
    pub name: String,
    pub passed: bool,
    pub summary: String,
    pub details: Value,
}

impl SuiteResult {
    fn new(name: &str, passed: bool, summary: String, details: impl Serialize) -> Self {
        Self {
            name: name.to_owned(),
            passed,
            summary,
            details: serde_json::to_value(details).expect("suite details serialize"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub command: String,
    pub space: SpaceDescriptor,
    pub d: u64,
    pub n: u64,
    pub word_len: u64,
    pub seed: u64,
    pub passed: bool,
    pub suites: Vec<SuiteResult>,
}

impl RunReport {
    fn new(
        command: &str,
        space: SpaceDescriptor,
        args: &RunArgs,
        suites: Vec<SuiteResult>,
    ) -> Self {
        Self {
            command: command.to_owned(),
            space,
            d: args.d,
            n: args.n,
            word_len: args.word_len,
            seed: args.seed,
            passed: suites.iter().all(|s| s.passed),
            suites,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

type TreeHost = SymmetricDouble<StripDiagonal<TreeEntourage>>;

fn write_text(path: Option<&Path>, text: &str) -> Result<(), CliError> {
    match path {
        Some(p) => fs::write(p, text).map_err(|source| CliError::Io {
            path: p.to_owned(),
            source,
        }),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn with_newline(mut s: String) -> String {
    if !s.ends_with('\n') {
        s.push('\n');
    }
    s
}

fn log(suite: &SuiteResult) {
    let verdict = if suite.passed { "ok" } else { "FAIL" };
    eprintln!("[{verdict}] {}: {}", suite.name, suite.summary);
}

fn matcher_for(e: TreeEntourage, d: u64) -> Result<MatchFunction<TreeHost>, CliError> {
    if d < 2 {
        return Err(CliError::Parameter(format!(
            "d must be at least 2, got {d}"
        )));
    }
    let host = SymmetricDouble(strip_diagonal(e));
    Ok(MatchFunction::new(HaremMatcher::new(
        host,
        d,
        HallWitness::identity(),
        MatcherConfig::default(),
    )?))
}

fn forest_for(
    e: TreeEntourage,
    d: u64,
    seed: u64,
) -> Result<EntourageForest<TreeEntourage>, CliError> {
    if d < 3 {
        return Err(CliError::Parameter(format!("forests need d >= 3, got {d}")));
    }
    sample_expansion(&e, d, SAMPLE_SETS, SAMPLE_SIZE, seed).map_err(|set| {
        CliError::Hypothesis {
            d: d + 2,
            set: set.into_iter().collect(),
        }
    })?;
    Ok(EntourageForest::for_entourage(
        e,
        d,
        MatcherConfig::default(),
    )?)
}

fn check_harem_hypothesis(e: &TreeEntourage, d: u64, seed: u64) -> Result<(), CliError> {
    match sample_connected_sets(e, SAMPLE_SETS, SAMPLE_SIZE, seed)
        .into_iter()
        .find(|set| !check_neighbourhood(e, d, set))
    {
        Some(set) => Err(CliError::Hypothesis {
            d,
            set: set.into_iter().collect(),
        }),
        None => Ok(()),
    }
}

fn matching_suites(f: &mut MatchFunction<TreeHost>, n: u64) -> Result<Vec<SuiteResult>, CliError> {
    let contract = verify_matching_contract(f, n)?;
    let invariants = f.matcher().check_invariants(n);
    let contract_suite = SuiteResult::new(
        "matching-contract",
        contract.passed() && invariants.is_ok(),
        format!(
            "{} vertices, {} count failures, {} non-edges, invariants {}",
            contract.checked,
            contract.a_failures.len() + contract.b_failures.len(),
            contract.non_edges.len(),
            invariants
                .as_ref()
                .map_or_else(|e| e.to_string(), |_| "hold".into())
        ),
        &contract,
    );
    let cycles = verify_cycle_control(f, n)?;
    let cycle_suite = SuiteResult::new(
        "cycle-control",
        cycles.passed(),
        format!(
            "f(f(1)) = 1: {}, {} certificates, {} violations, k <= 2n - 1 throughout: {}",
            cycles.f2_of_1,
            cycles.certificates.len(),
            cycles.violations.len(),
            cycles.sharper_tail_bound
        ),
        &cycles,
    );
    Ok(vec![contract_suite, cycle_suite])
}

fn forest_suites(
    forest: &mut EntourageForest<TreeEntourage>,
    n: u64,
) -> Result<Vec<SuiteResult>, CliError> {
    let report = verify_forest(forest, n)?;
    let forest_suite = SuiteResult::new(
        "forest",
        report.passed(),
        format!(
            "{} vertices, {} fixed points, {} cycles, {} outside E∘E ({} outside E), {} degree failures",
            report.checked,
            report.fixed_points.len(),
            report.cycles.len(),
            report.outside_entourage.len(),
            report.outside_e.len(),
            report.degree_failures.len()
        ),
        &report,
    );
    let range = n.min(SAME_TREE_RANGE);
    let same = verify_same_tree(forest, range, 5 * n.max(range))?;
    let same_suite = SuiteResult::new(
        "same-tree",
        same.passed(),
        format!(
            "{} trees meet 1..={range}, {} mismatches",
            same.trees,
            same.mismatches.len()
        ),
        &same,
    );
    Ok(vec![forest_suite, same_suite])
}

fn wobble_suite(
    w: &mut Wobbling<TreeHost>,
    n: u64,
    word_len: u64,
) -> Result<SuiteResult, CliError> {
    let report = verify_free_semiregular(w, word_len as usize, n)?;
    let moved = w.displacement_failures(n)?;
    Ok(SuiteResult::new(
        "wobbling",
        report.passed() && moved.is_empty(),
        format!(
            "{} words on {} vertices, {} fixed points, {} displacement failures",
            report.words_per_vertex,
            report.range,
            report.fixed_points.len(),
            moved.len()
        ),
        json!({ "freeness": report, "displacement_failures": moved }),
    ))
}

fn hall_suite(seed: u64) -> Result<SuiteResult, CliError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut disagreements = Vec::new();
    let mut feasible = 0usize;
    for i in 0..HALL_GRAPHS {
        let na = rng.gen_range(1..=3u64);
        let nb = rng.gen_range(na..=6);
        let edges: Vec<(u64, u64)> = (1..=na)
            .flat_map(|x| (1..=nb).map(move |y| (x, y)))
            .filter(|_| rng.gen_bool(0.6))
            .collect();
        let g = FiniteInducedSubgraph::new(1..=na, 1..=nb, edges, std::iter::empty());
        for k in 1..=3 {
            let holds = check_harem_condition(&g, k)?.holds();
            let found = brute_force_matching(&g, k)?.is_some();
            feasible += usize::from(found);
            if holds != found {
                disagreements.push((i, k));
            }
        }
    }
    Ok(SuiteResult::new(
        "finite-hall",
        disagreements.is_empty(),
        format!(
            "{} graph/k pairs, {feasible} with a matching, {} disagreements",
            3 * HALL_GRAPHS,
            disagreements.len()
        ),
        json!({ "graphs": HALL_GRAPHS, "feasible": feasible, "disagreements": disagreements }),
    ))
}

fn matching_dot(cp: &Checkpoint) -> String {
    let mut out = String::from("graph matching {\n");
    for (a, b) in &cp.committed {
        out.push_str(&format!("  a{a} -- b{b};\n"));
    }
    out.push_str("}\n");
    out
}

fn export_checkpoint(cp: &Checkpoint, format: Format) -> String {
    match format {
        Format::Json => with_newline(cp.to_json()),
        Format::Dot => matching_dot(cp),
    }
}

fn cmd_match(args: &RunArgs) -> Result<bool, CliError> {
    let space = SpaceDescriptor::load(&args.space)?;
    let e = space.entourage()?;
    check_harem_hypothesis(&e, args.d, args.seed)?;
    let mut f = matcher_for(e, args.d)?;
    let suites = matching_suites(&mut f, args.n)?;
    suites.iter().for_each(log);
    write_text(
        args.out.as_deref(),
        &export_checkpoint(&f.matcher().checkpoint(), args.format),
    )?;
    Ok(RunReport::new("match", space, args, suites).passed)
}

fn cmd_forest(args: &RunArgs) -> Result<bool, CliError> {
    let space = SpaceDescriptor::load(&args.space)?;
    let mut forest = forest_for(space.entourage()?, args.d, args.seed)?;
    let suites = forest_suites(&mut forest, args.n)?;
    suites.iter().for_each(log);
    let export = ForestExport::build(&mut forest, args.n)?;
    let text = match args.format {
        Format::Json => with_newline(export.to_json()),
        Format::Dot => export.to_dot(),
    };
    write_text(args.out.as_deref(), &text)?;
    Ok(RunReport::new("forest", space, args, suites).passed)
}

fn wobbling_for(e: TreeEntourage, d: u64, seed: u64) -> Result<Wobbling<TreeHost>, CliError> {
    if d != 4 {
        return Err(CliError::Parameter(format!(
            "wobbling runs on the 4-regular forest, got d = {d}"
        )));
    }
    Ok(Wobbling::new(forest_for(e, 4, seed)?))
}

fn table_text(w: &mut Wobbling<TreeHost>, n: u64, format: Format) -> Result<String, CliError> {
    let table = PermutationTable::build(w, n)?;
    Ok(match format {
        Format::Json => with_newline(table.to_json()),
        Format::Dot => table.to_dot(),
    })
}

fn cmd_wobble(args: &RunArgs) -> Result<bool, CliError> {
    let space = SpaceDescriptor::load(&args.space)?;
    let mut w = wobbling_for(space.entourage()?, args.d, args.seed)?;
    let suite = wobble_suite(&mut w, args.n, args.word_len)?;
    log(&suite);
    write_text(
        args.out.as_deref(),
        &table_text(&mut w, args.n, args.format)?,
    )?;
    Ok(suite.passed)
}

fn cmd_verify(args: &RunArgs) -> Result<bool, CliError> {
    let space = SpaceDescriptor::load(&args.space)?;
    let e = space.entourage()?;
    check_harem_hypothesis(&e, args.d, args.seed)?;
    let mut suites = vec![hall_suite(args.seed)?];

    let mut forest = forest_for(e, args.d, args.seed)?;
    suites.extend(matching_suites(forest.match_function_mut(), args.n)?);
    let checkpoint = forest.match_function().matcher().checkpoint();
    suites.extend(forest_suites(&mut forest, args.n)?);
    let forest_export = ForestExport::build(&mut forest, args.n)?;

    let mut w = if args.d == 4 {
        Wobbling::new(forest)
    } else {
        wobbling_for(e, 4, args.seed)?
    };
    suites.push(wobble_suite(&mut w, args.n, args.word_len)?);
    let table = table_text(&mut w, args.n, args.format)?;
    suites.iter().for_each(log);

    let report = RunReport::new("verify", space, args, suites);
    match &args.out {
        Some(dir) => {
            fs::create_dir_all(dir).map_err(|source| CliError::Io {
                path: dir.clone(),
                source,
            })?;
            let ext = args.format.extension();
            write_text(
                Some(&dir.join("report.json")),
                &with_newline(report.to_json()),
            )?;
            write_text(
                Some(&dir.join(format!("checkpoint.{ext}"))),
                &export_checkpoint(&checkpoint, args.format),
            )?;
            let forest_text = match args.format {
                Format::Json => with_newline(forest_export.to_json()),
                Format::Dot => forest_export.to_dot(),
            };
            write_text(Some(&dir.join(format!("forest.{ext}"))), &forest_text)?;
            write_text(Some(&dir.join(format!("wobble.{ext}"))), &table)?;
        }
        None => write_text(None, &with_newline(report.to_json()))?,
    }
    Ok(report.passed)
}

/// Runs one parsed command. `Ok(false)` means some check failed.
pub fn run(cli: &Cli) -> Result<bool, CliError> {
    match &cli.command {
        Command::GenTree { r, out } => {
            let desc = SpaceDescriptor::regular_tree(*r)?;
            write_text(out.as_deref(), &with_newline(desc.to_json()))?;
            Ok(true)
        }
        Command::Match(args) => cmd_match(args),
        Command::Forest(args) => cmd_forest(args),
        Command::Wobble(args) => cmd_wobble(args),
        Command::Verify(args) => cmd_verify(args),
    }
}

/// Exit code 0 when every check passed, 1 on a failed check and 2 on an
/// error.
pub fn main_with(args: impl IntoIterator<Item = impl Into<OsString> + Clone>) -> ExitCode {
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn descriptor_round_trip() {
        let d = SpaceDescriptor::regular_tree(6).unwrap();
        assert_eq!(d.to_json(), r#"{"kind":"regular_tree","r":6}"#);
        let back: SpaceDescriptor = serde_json::from_str(&d.to_json()).unwrap();
        assert_eq!(back, d);
        assert!(matches!(
            SpaceDescriptor::regular_tree(2),
            Err(CliError::TreeDegree(2))
        ));
    }

    #[test]
    fn argument_validation() {
        assert!(Cli::try_parse_from(["harem", "match", "--space", "x", "--n", "0"]).is_err());
        assert!(
            Cli::try_parse_from(["harem", "wobble", "--space", "x", "--format", "svg"]).is_err()
        );
        let cli = Cli::try_parse_from([
            "harem", "forest", "--space", "x", "--d", "3", "--format", "dot",
        ])
        .unwrap();
        match cli.command {
            Command::Forest(args) => {
                assert_eq!((args.d, args.n, args.format), (3, 100, Format::Dot));
            }
            other => panic!("parsed {other:?}"),
        }
    }

    #[test]
    fn small_d_rejected() {
        let e = TreeEntourage::new(6).unwrap();
        assert!(matches!(forest_for(e, 2, 0), Err(CliError::Parameter(_))));
        assert!(matches!(wobbling_for(e, 3, 0), Err(CliError::Parameter(_))));
    }

    #[test]
    fn harem_hypothesis_on_trees() {
        let e = TreeEntourage::new(6).unwrap();
        assert!(check_harem_hypothesis(&e, 4, 0).is_ok());
        assert!(check_harem_hypothesis(&e, 7, 0).is_err());
    }

    #[test]
    fn hall_suite_agrees() {
        let s = hall_suite(3).unwrap();
        assert!(s.passed, "{}", s.summary);
    }
}
