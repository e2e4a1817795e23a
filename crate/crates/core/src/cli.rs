//! Command-line front end. Every command writes one JSON report; `--pretty`
//! adds a short human summary on the terminal without touching the report.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{ArgGroup, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use crate::cellulation::Cellulation;
use crate::error::{Error, Result};
use crate::groups::catalog::{self, CatalogEntry};
use crate::groups::{
    center, derived_series, factor_system_of, is_nil2_extension, normal_subgroups, FactorSystem, FiniteGroup,
};
use crate::kwmaps::KwMode;
use crate::protocols::{
    derived_chain, prepare_abelian_double, prepare_metabelian_double, prepare_nil2_double, prepare_solvable_double,
    ProtocolTranscript,
};
use crate::register::{QuditRegister, SiteKey};

use crate::verify::{
    commuting_pair_orbits, ground_state_degeneracy, nil2_syndrome_deviation, oracle_double_state, run_identity_suite,
    stabilizer_report, IdentityRow, StabilizerReport, IDENTITY_TOL,
};

pub const SCHEMA_VERSION: u32 = 1;

/// Environment variable naming a JSON group catalog merged into the built-ins.
pub const CATALOG_ENV: &str = "KWPREP_GROUP_CATALOG";

pub const EXIT_OK: i32 = 0;
pub const EXIT_PRECONDITION: i32 = 1;
pub const EXIT_TOLERANCE: i32 = 2;

#[derive(Parser, Debug)]
#[command(name = "kwprep", version, about = "Measurement-based quantum double preparation")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Run a preparation protocol and score the output.
    Prepare(PrepareArgs),
    /// Run a verification suite.
    Verify(VerifyArgs),
    /// Group-theory queries.
    #[command(group(ArgGroup::new("query").required(true).multiple(true).args(["derived_series", "center", "factor_system"])))]
    Groups(GroupsArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Protocol {
    Abelian,
    Nil2,
    Metabelian,
    Solvable,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Suite {
    Identities,
    Gsd,
    Stabilizers,
}

#[derive(clap::Args, Debug)]
pub struct PrepareArgs {
    /// Catalog name (`D4`, `Z6`, `Z2xZ3`, ...) or a path to a catalog document.
    #[arg(long)]
    pub group: String,
    /// `square:LxM`, `hexagon`, `polygon:N`, `edge`, or a path.
    #[arg(long, default_value = "hexagon")]
    pub cell: String,
    #[arg(long, value_enum, default_value = "solvable")]
    pub protocol: Protocol,
    /// `postselect`, `sample:SEED`, or `forced:PATH` with a JSON map from site keys to outcomes.
    #[arg(long, default_value = "postselect")]
    pub mode: String,
    /// Number of consecutive seeds to run in sampled mode.
    #[arg(long, default_value_t = 1)]
    pub runs: u64,
    /// Worker threads; reports do not depend on this
    #[arg(long)]
    pub workers: Option<usize>,
    /// Skip stabilizer expectations.
    #[arg(long)]
    pub no_stabilizers: bool,
    /// Score each run against the oracle state.
    #[arg(long)]
    pub oracle: bool,
    /// Also compute the ground-state degeneracy of the cellulation.
    #[arg(long)]
    pub gsd: bool,
    /// Tolerance on stabilizers, fidelity and syndromes
    #[arg(long, default_value_t = 1e-9)]
    pub tol: f64,
    /// Write the JSON report here instead of stdout
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Print a short human summary as well
    #[arg(long)]
    pub pretty: bool,
}

#[derive(clap::Args, Debug)]
pub struct VerifyArgs {
    #[arg(long, value_enum)]
    pub suite: Suite,
    /// Restrict to these groups; repeatable.
    #[arg(long)]
    pub group: Vec<String>,
    /// Cellulations to use; repeatable.
    #[arg(long)]
    pub cell: Vec<String>,
    /// Worker threads; reports do not depend on this
    #[arg(long)]
    pub workers: Option<usize>,
    /// Write the JSON report here instead of stdout
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Print a short human summary as well
    #[arg(long)]
    pub pretty: bool,
}

#[derive(clap::Args, Debug)]
pub struct GroupsArgs {
    /// Derived series and derived length
    #[arg(long, value_name = "GROUP")]
    pub derived_series: Option<String>,
    /// Center and its members
    #[arg(long, value_name = "GROUP")]
    pub center: Option<String>,
    /// Factor systems of every proper nontrivial normal subgroup.
    #[arg(long, value_name = "GROUP")]
    pub factor_system: Option<String>,
    /// Write the JSON report here instead of stdout
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Print a short human summary as well
    #[arg(long)]
    pub pretty: bool,
}

/// Parses arguments and runs; returns the process exit status.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_PRECONDITION } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli.command) {
        Ok(true) => EXIT_OK,
        Ok(false) => EXIT_TOLERANCE,
        Err(e) => {
            let doc = json!({ "schema_version": SCHEMA_VERSION, "error": e, "message": e.to_string() });
            eprintln!("{doc}");
            EXIT_PRECONDITION
        }
    }
}

fn dispatch(cmd: Command) -> Result<bool> {
    match cmd {
        Command::Prepare(a) => with_workers(a.workers, || cmd_prepare(&a)),
        Command::Verify(a) => with_workers(a.workers, || cmd_verify(&a)),
        Command::Groups(a) => cmd_groups(&a),
    }
}

fn with_workers<T: Send>(workers: Option<usize>, f: impl FnOnce() -> Result<T> + Send) -> Result<T> {
    match workers {
        None => f(),
        Some(0) => Err(Error::Parse("--workers must be positive".into())),
        Some(n) => {
            rayon::ThreadPoolBuilder::new().num_threads(n).build().map_err(|e| Error::Io(e.to_string()))?.install(f)
        }
    }
}

/// Writes `doc` to `path` through a temporary file in the same directory.
pub fn write_atomic(path: &Path, doc: &Value) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    serde_json::to_writer_pretty(&mut tmp, doc)?;
    tmp.write_all(b"\n")?;
    tmp.persist(path).map_err(|e| Error::Io(e.error.to_string()))?;
    Ok(())
}

fn emit(doc: &Value, out: Option<&Path>, summary: Option<String>) -> Result<()> {
    match out {
        Some(p) => {
            write_atomic(p, doc)?;
            if let Some(s) = summary {
                print!("{s}");
            }
        }
        None => {
            println!("{}", serde_json::to_string_pretty(doc)?);
            if let Some(s) = summary {
                eprint!("{s}");
            }
        }
    }
    Ok(())
}

fn extra_catalog() -> Result<Vec<CatalogEntry>> {
    match std::env::var_os(CATALOG_ENV) {
        Some(p) => catalog::load_catalog(&std::fs::read_to_string(p)?),
        None => Ok(Vec::new()),
    }
}

/// Resolves a group spec: a catalog document path (last entry wins) or a
/// name, with names from the environment catalog taking precedence.
pub fn resolve_group(spec: &str) -> Result<CatalogEntry> {
    let path = Path::new(spec);
    if spec.ends_with(".json") || path.is_file() {
        let entries = catalog::load_catalog(&std::fs::read_to_string(path)?)?;
        return entries.into_iter().last().ok_or_else(|| Error::Parse(format!("{spec}: empty catalog")));
    }
    catalog::lookup(spec, &extra_catalog()?)
}

pub fn parse_mode(spec: &str) -> Result<KwMode> {
    if spec == "postselect" {
        return Ok(KwMode::PostselectPlus);
    }
    if let Some(s) = spec.strip_prefix("sample:") {
        return s.parse().map(KwMode::Sample).map_err(|_| Error::Parse(format!("bad seed '{s}'")));
    }
    if let Some(p) = spec.strip_prefix("forced:") {
        let table: BTreeMap<SiteKey, usize> = serde_json::from_str(&std::fs::read_to_string(p)?)?;
        return Ok(KwMode::Forced(table));
    }
    Err(Error::Parse(format!("unknown mode '{spec}'")))
}

/// The factor system used by the one-shot nil-2 route: the document's own
/// extension when it qualifies, otherwise `Z(G) ◁ G`.
fn nil2_factor_system(entry: &CatalogEntry) -> Result<FactorSystem> {
    if let Some(fs) = &entry.factor_system {
        if is_nil2_extension(fs) {
            return Ok(fs.clone());
        }
    }
    factor_system_of(&entry.group, &center(&entry.group))
}

fn metabelian_factor_system(entry: &CatalogEntry) -> Result<FactorSystem> {
    if let Some(fs) = &entry.factor_system {
        if fs.n_group().is_abelian() && fs.q_group().is_abelian() {
            return Ok(fs.clone());
        }
    }
    let chain = derived_chain(&entry.group)?;
    match chain.len() {
        1 => Ok(chain.into_iter().next().unwrap()),
        0 => Err(Error::Unsupported(format!("{} is abelian; use --protocol abelian", entry.group.name()))),
        l => Err(Error::Unsupported(format!(
            "{} has derived length {}; use --protocol solvable",
            entry.group.name(),
            l + 1
        ))),
    }
}

#[derive(Serialize)]
struct RunReport {
    transcript: ProtocolTranscript,
    stabilizers: Option<StabilizerReport>,
    /// Largest defect of the syndrome implied by the outcomes, before correction.
    syndrome_deviation: Option<f64>,
    passed: bool,
}

fn run_once(
    protocol: Protocol,
    entry: &CatalogEntry,
    cell: &Cellulation,
    mode: &KwMode,
    oracle: Option<&QuditRegister>,
    a: &PrepareArgs,
) -> Result<RunReport> {
    let g = &entry.group;
    let (mut t, fs) = match protocol {
        Protocol::Abelian => (prepare_abelian_double(g, cell, mode)?, None),
        Protocol::Nil2 => {
            let fs = nil2_factor_system(entry)?;
            (prepare_nil2_double(&fs, cell, mode)?, Some(fs))
        }
        Protocol::Metabelian => (prepare_metabelian_double(&metabelian_factor_system(entry)?, cell, mode)?, None),
        Protocol::Solvable => (prepare_solvable_double(g, cell, mode)?, None),
    };
    let mut passed = true;
    if let Some(o) = oracle {
        passed &= t.score(o)? >= 1.0 - a.tol;
    }
    let stabilizers = if a.no_stabilizers {
        None
    } else {
        let r = stabilizer_report(&t.register, g, cell, false, false)?;
        passed &= r.min_stabilizer() >= 1.0 - a.tol && r.loop_defect() <= a.tol;
        Some(r)
    };
    let syndrome_deviation = match (&fs, &t.pre_correction) {
        (Some(fs), Some(pre)) => {
            let d = nil2_syndrome_deviation(pre, fs, cell, &t.rounds[0].outcomes)?;
            passed &= d <= a.tol;
            Some(d)
        }
        _ => None,
    };
    Ok(RunReport { transcript: t, stabilizers, syndrome_deviation, passed })
}

fn cmd_prepare(a: &PrepareArgs) -> Result<bool> {
    let entry = resolve_group(&a.group)?;
    let cell = Cellulation::from_spec(&a.cell)?;
    let base = parse_mode(&a.mode)?;
    if a.protocol == Protocol::Solvable || a.protocol == Protocol::Metabelian {
        derived_chain(&entry.group)?;
    }
    let modes: Vec<KwMode> = match &base {
        KwMode::Sample(s) => (0..a.runs.max(1)).map(|k| KwMode::Sample(s.wrapping_add(k))).collect(),
        other => vec![other.clone()],
    };
    let oracle = if a.oracle { Some(oracle_double_state(&entry.group, &cell)?) } else { None };
    let runs: Vec<RunReport> =
        modes.par_iter().map(|m| run_once(a.protocol, &entry, &cell, m, oracle.as_ref(), a)).collect::<Result<_>>()?;
    let gsd = if a.gsd { Some(ground_state_degeneracy(&entry.group, &cell)?) } else { None };
    let passed = runs.iter().all(|r| r.passed);
    let doc = json!({
        "schema_version": SCHEMA_VERSION,
        "command": "prepare",
        "config": {
            "group": a.group,
            "cell": a.cell,
            "protocol": a.protocol,
            "mode": a.mode,
            "runs": modes.len(),
            "stabilizers": !a.no_stabilizers,
            "oracle": a.oracle,
            "gsd": a.gsd,
            "tol": a.tol,
        },
        "group_order": entry.group.order(),
        "cell_name": cell.name(),
        "gsd": gsd,
        "runs": runs,
        "passed": passed,
    });
    let summary = a.pretty.then(|| {
        let protocol = a.protocol.to_possible_value().map(|v| v.get_name().to_owned()).unwrap_or_default();
        let mut s = format!("{} on {} via {protocol}\n", entry.group.name(), cell.name());
        for r in &runs {
            let min = r.stabilizers.as_ref().map(|s| s.min_stabilizer());
            s += &format!(
                "  {:<14} shots {}  min stabilizer {}  fidelity {}  {}\n",
                r.transcript.mode,
                r.transcript.shots,
                fmt_opt(min),
                fmt_opt(r.transcript.fidelity_vs_oracle),
                if r.passed { "ok" } else { "FAIL" }
            );
        }
        s
    });
    emit(&doc, a.out.as_deref(), summary)?;
    Ok(passed)
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map_or("-".into(), |v| format!("{v:.12}"))
}

fn groups_or(names: &[String], default: &[&str]) -> Result<Vec<Arc<FiniteGroup>>> {
    if names.is_empty() {
        default.iter().map(|n| Ok(catalog::by_name(n)?.group)).collect()
    } else {
        names.iter().map(|n| Ok(resolve_group(n)?.group)).collect()
    }
}

fn cells_or(specs: &[String], default: Vec<Cellulation>) -> Result<Vec<Cellulation>> {
    if specs.is_empty() {
        Ok(default)
    } else {
        specs.iter().map(|s| Cellulation::from_spec(s)).collect()
    }
}

fn cmd_verify(a: &VerifyArgs) -> Result<bool> {
    let (rows, passed, summary): (Value, bool, String) = match a.suite {
        Suite::Identities => {
            let groups = if a.group.is_empty() { catalog::identity_suite_groups() } else { groups_or(&a.group, &[])? };
            let cells = cells_or(&a.cell, vec![Cellulation::single_edge(), Cellulation::hexagon_torus()])?;
            let rows: Vec<IdentityRow> = run_identity_suite(&groups, &cells)?;
            let passed = rows.iter().all(IdentityRow::passed);
            let mut s = String::new();
            for r in &rows {
                s += &format!(
                    "{:<22} {:<10} {:<10} {:.3e} {}\n",
                    r.id,
                    r.group,
                    r.graph,
                    r.deviation,
                    if r.passed() { "ok" } else { "FAIL" }
                );
            }
            (serde_json::to_value(&rows)?, passed, s)
        }
        Suite::Gsd => {
            let groups = groups_or(&a.group, &["Z2", "Z3", "S3", "D4"])?;
            let cells = cells_or(&a.cell, vec![Cellulation::hexagon_torus()])?;
            let mut rows = Vec::new();
            let mut s = String::new();
            let mut passed = true;
            for g in &groups {
                for c in &cells {
                    let projector = ground_state_degeneracy(g, c)?;
                    let orbits = (c.genus() == Some(1)).then(|| commuting_pair_orbits(g));
                    let ok = orbits.map_or(true, |o| o == projector);
                    passed &= ok;
                    s += &format!(
                        "{:<8} {:<10} projector {projector:>4}  pair orbits {}\n",
                        g.name(),
                        c.name(),
                        orbits.map_or("-".into(), |o| o.to_string())
                    );
                    rows.push(json!({ "group": g.name(), "cell": c.name(), "projector_rank": projector, "pair_orbits": orbits, "passed": ok }));
                }
            }
            (Value::Array(rows), passed, s)
        }
        Suite::Stabilizers => {
            let groups = groups_or(&a.group, &["Z2", "Z3", "S3", "D4", "Q8"])?;
            let cells = cells_or(&a.cell, vec![Cellulation::hexagon_torus()])?;
            let mut rows = Vec::new();
            let mut s = String::new();
            let mut passed = true;
            for g in &groups {
                for c in &cells {
                    let st = oracle_double_state(g, c)?;
                    let r = stabilizer_report(&st, g, c, false, false)?;
                    let ok = r.min_stabilizer() >= 1.0 - IDENTITY_TOL && r.loop_defect() <= IDENTITY_TOL;
                    passed &= ok;
                    s += &format!(
                        "{:<8} {:<10} min stabilizer {:.12}  {}\n",
                        g.name(),
                        c.name(),
                        r.min_stabilizer(),
                        if ok { "ok" } else { "FAIL" }
                    );
                    rows.push(json!({ "group": g.name(), "cell": c.name(), "report": r, "passed": ok }));
                }
            }
            (Value::Array(rows), passed, s)
        }
    };
    let doc = json!({
        "schema_version": SCHEMA_VERSION,
        "command": "verify",
        "suite": a.suite,
        "rows": rows,
        "passed": passed,
    });
    emit(&doc, a.out.as_deref(), a.pretty.then_some(summary))?;
    Ok(passed)
}

fn factor_system_doc(fs: &FactorSystem) -> Value {
    json!({
        "n_order": fs.n_group().order(),
        "q_order": fs.q_group().order(),
        "sigma": fs.sigma_table(),
        "omega": fs.omega_table(),
        "sigma_trivial": fs.is_sigma_trivial(),
        "omega_trivial": fs.is_omega_trivial(),
        "nil2": is_nil2_extension(fs),
    })
}

fn cmd_groups(a: &GroupsArgs) -> Result<bool> {
    let mut doc = serde_json::Map::new();
    doc.insert("schema_version".into(), json!(SCHEMA_VERSION));
    doc.insert("command".into(), json!("groups"));
    let mut summary = String::new();
    if let Some(name) = &a.derived_series {
        let g = resolve_group(name)?.group;
        let ds = derived_series(&g);
        let core = ds.perfect_core();
        let core_name = if ds.is_solvable() {
            None
        } else if core.is_whole() {
            Some(g.name().to_string())
        } else {
            Some(format!("order-{} core of {}", core.order(), g.name()))
        };
        summary += &format!("{}: orders {:?}, derived length {}\n", g.name(), ds.orders(), fmt_len(ds.derived_length));
        doc.insert(
            "derived_series".into(),
            json!({
                "group": g.name(),
                "orders": ds.orders(),
                "derived_length": ds.derived_length,
                "solvable": ds.is_solvable(),
                "perfect_core": core_name.map(|n| json!({ "name": n, "order": core.order() })),
            }),
        );
    }
    if let Some(name) = &a.center {
        let g = resolve_group(name)?.group;
        let z = center(&g);
        summary += &format!("{}: center of order {}\n", g.name(), z.order());
        doc.insert("center".into(), json!({ "group": g.name(), "order": z.order(), "members": z.members() }));
    }
    if let Some(name) = &a.factor_system {
        let entry = resolve_group(name)?;
        let g = &entry.group;
        let mut systems = Vec::new();
        if let Some(fs) = &entry.factor_system {
            systems.push(json!({ "source": "definition", "factor_system": factor_system_doc(fs) }));
        }
        for n in normal_subgroups(g).iter().filter(|n| !n.is_trivial() && !n.is_whole()) {
            let fs = factor_system_of(g, n)?;
            systems.push(
                json!({ "source": "normal_subgroup", "members": n.members(), "factor_system": factor_system_doc(&fs) }),
            );
        }
        summary += &format!("{}: {} factor systems\n", g.name(), systems.len());
        doc.insert("factor_systems".into(), json!({ "group": g.name(), "systems": systems }));
    }
    emit(&Value::Object(doc), a.out.as_deref(), a.pretty.then_some(summary))?;
    Ok(true)
}

fn fmt_len(l: Option<usize>) -> String {
    l.map_or("none (not solvable)".into(), |l| l.to_string())
}
