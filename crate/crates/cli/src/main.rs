use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use pinwheel::bgt::{self, BgtInstance, TableConfig, Tables};
use pinwheel::certify::{certify_unschedulable, min_leftpush_per_window};
use pinwheel::enumerate::{builtin_spec, builtin_specs, run_campaign, summarize_store, CampaignOptions, CampaignReport, FamilySpec};
use pinwheel::folds::{run_fold, FoldOp};
use pinwheel::instances::density;
use pinwheel::ratio;
use pinwheel::schedule::{verify_covering, verify_packing};
use pinwheel::solvers::{solve, SolverConfig, SolverError, STATE_BUDGET_ENV};
use pinwheel::{selftest, CyclicSchedule, Kind, TaskPeriods};

/// Version tag carried by every JSON document this binary prints.
const SCHEMA_VERSION: u32 = 1;

#[derive(Parser)]
#[command(name = "pinwheel", version, about = "Pinwheel packing/covering deciders, folds, campaigns and bamboo garden trimming")]
struct Cli {
    /// Output format for results on stdout.
    #[arg(long, global = true, value_enum, default_value_t = Format::Text)]
    format: Format,
    /// Visited-state budget for the exact deciders.
    #[arg(long, global = true, env = STATE_BUDGET_ENV)]
    state_budget: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Json,
}

#[derive(Subcommand)]
enum Command {
    /// Decide schedulability and print a verdict (and a schedule when one exists).
    Decide {
        #[arg(long, value_enum)]
        mode: Mode,
        #[arg(long)]
        periods: String,
        /// Write the schedule as JSON to this file.
        #[arg(long)]
        emit_schedule: Option<PathBuf>,
    },
    /// Check a schedule file against an instance.
    Verify {
        #[arg(long, value_enum)]
        mode: Mode,
        #[arg(long)]
        periods: String,
        #[arg(long)]
        schedule: PathBuf,
    },
    /// Run a fold and print its output instance.
    Fold {
        #[arg(long)]
        op: FoldOp,
        #[arg(long)]
        theta: String,
        #[arg(long)]
        periods: String,
        /// Also print the rewrite trace.
        #[arg(long)]
        trace: bool,
    },
    /// Density barrier check for a packing instance.
    Certify {
        #[arg(long)]
        periods: String,
    },
    /// Minimum left-pushes per window for a set of fixed packing jobs.
    Window {
        #[arg(long)]
        fixed: String,
        #[arg(long)]
        len: u64,
    },
    /// Solve every member of a family and store certificates.
    Enumerate {
        /// Builtin family name, or a path to a JSON family spec.
        #[arg(long, required_unless_present = "list")]
        spec: Option<String>,
        #[arg(long, required_unless_present = "list")]
        out: Option<PathBuf>,
        #[command(flatten)]
        pool: Pool,
        /// Stop after this many members in canonical order.
        #[arg(long)]
        limit: Option<u64>,
        /// Cap every period outside the top triple.
        #[arg(long)]
        max_element: Option<u64>,
        /// List the builtin families and exit.
        #[arg(long)]
        list: bool,
    },
    /// Summarize a certificate store.
    Report {
        #[arg(long = "in")]
        input: PathBuf,
        /// Re-check every certificate.
        #[arg(long)]
        verify: bool,
    },
    /// Bamboo garden trimming.
    Bgt {
        #[command(subcommand)]
        command: BgtCommand,
    },
    /// Run the embedded invariant suite.
    Selftest,
}

#[derive(Subcommand)]
enum BgtCommand {
    /// Schedule a grove within 9/7 of the optimal maximum height.
    Approx {
        #[arg(long)]
        rates: String,
        /// Directory (or file) holding prebuilt tables; built in memory when absent.
        #[arg(long)]
        tables: Option<PathBuf>,
        #[command(flatten)]
        pool: Pool,
    },
    /// Table maintenance.
    Tables {
        #[command(subcommand)]
        command: TablesCommand,
    },
}

#[derive(Subcommand)]
enum TablesCommand {
    /// Build and save the lookup tables.
    Build {
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        pool: Pool,
    },
    /// Load tables and re-verify every entry.
    Check {
        #[arg(long = "in")]
        input: PathBuf,
    },
}

#[derive(Args, Clone, Copy)]
struct Pool {
    /// Worker threads; defaults to every core.
    #[arg(long)]
    workers: Option<usize>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Mode {
    Packing,
    Covering,
}

impl From<Mode> for Kind {
    fn from(m: Mode) -> Kind {
        match m {
            Mode::Packing => Kind::Packing,
            Mode::Covering => Kind::Covering,
        }
    }
}

/// What a subcommand printed, and whether it found a verdict-level problem.
struct Outcome {
    text: String,
    json: Value,
    finding: bool,
}

impl Outcome {
    fn ok(text: String, json: Value) -> Self {
        Outcome { text, json, finding: false }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => e.exit(),
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let solver = match cli.state_budget {
        Some(b) => SolverConfig { state_budget: b },
        None => SolverConfig::from_env(),
    };
    log::info!("config: format={:?} state_budget={}", cli.format, solver.state_budget);
    match run(cli.command, &solver) {
        Ok(out) => {
            match cli.format {
                Format::Text => print!("{}", out.text),
                Format::Json => println!("{}", serde_json::to_string_pretty(&out.json).expect("json")),
            }
            if out.finding {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            }
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<SolverError>().is_some_and(|s| matches!(s, SolverError::Indeterminate { .. })) {
                ExitCode::from(1)
            } else {
                ExitCode::from(2)
            }
        }
    }
}

fn doc(command: &str, body: Value) -> Value {
    let mut v = json!({ "schema": format!("pinwheel.{command}"), "version": SCHEMA_VERSION });
    if let (Value::Object(head), Value::Object(rest)) = (&mut v, body) {
        head.extend(rest);
    }
    v
}

fn one_based(s: &CyclicSchedule) -> String {
    let (prefix, cycle) = s.to_one_based();
    let join = |v: &[usize]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(" ");
    if prefix.is_empty() {
        format!("cycle: {}\n", join(&cycle))
    } else {
        format!("prefix: {}\ncycle: {}\n", join(&prefix), join(&cycle))
    }
}

fn parse_ints(list: &str) -> Result<Vec<u64>> {
    list.split(',')
        .map(|t| t.trim().parse::<u64>().with_context(|| format!("bad integer {t:?} in {list:?}")))
        .collect()
}

fn run(command: Command, solver: &SolverConfig) -> Result<Outcome> {
    match command {
        Command::Decide { mode, periods, emit_schedule } => decide(mode.into(), &periods, emit_schedule.as_deref(), solver),
        Command::Verify { mode, periods, schedule } => verify(mode.into(), &periods, &schedule),
        Command::Fold { op, theta, periods, trace } => fold(op, &theta, &periods, trace),
        Command::Certify { periods } => {
            let a = TaskPeriods::parse(Kind::Packing, &periods)?;
            let r = certify_unschedulable(&a)?;
            let text = format!(
                "barrier: {}\ndensity: {}\nverdict: {}\n",
                r.barrier.value,
                r.density,
                serde_json::to_value(&r.verdict)?.as_str().unwrap_or_default().to_uppercase()
            );
            Ok(Outcome::ok(text, doc("certify", serde_json::to_value(&r)?)))
        }
        Command::Window { fixed, len } => {
            let a = TaskPeriods::parse(Kind::Packing, &fixed)?;
            let r = min_leftpush_per_window(&a, len)?;
            let text = format!("jobs: {}\nwindow: {}\nmin left-pushes: {}\nlive states: {}\n", r.jobs, r.window, r.min_leftpushes, r.live_states);
            Ok(Outcome::ok(text, doc("window", serde_json::to_value(&r)?)))
        }
        Command::Enumerate { spec, out, pool, limit, max_element, list } => {
            if list {
                let specs = builtin_specs();
                let text = specs.iter().map(|s| format!("{}\n", s.name)).collect();
                let names: Vec<&str> = specs.iter().map(|s| s.name.as_str()).collect();
                return Ok(Outcome::ok(text, doc("specs", json!({ "specs": names }))));
            }
            let (spec, out) = (spec.expect("required by clap"), out.expect("required by clap"));
            let mut spec = load_spec(&spec)?;
            if let Some(cap) = max_element {
                spec = spec.truncated(cap);
            }
            let opts = CampaignOptions { workers: pool.workers, limit, solver: *solver, ..Default::default() };
            log::info!("campaign {} -> {}: workers={:?} limit={:?}", spec.name, out.display(), opts.workers, limit);
            report_outcome(run_campaign(&spec, &out, &opts)?)
        }
        Command::Report { input, verify } => report_outcome(summarize_store(&input, verify.then_some(solver))?),
        Command::Bgt { command: BgtCommand::Approx { rates, tables, pool } } => approx(&rates, tables.as_deref(), pool, solver),
        Command::Bgt { command: BgtCommand::Tables { command: TablesCommand::Build { out, pool } } } => {
            let cfg = TableConfig { state_budget: solver.state_budget, workers: pool.workers };
            log::info!("building tables: workers={:?} fingerprint={}", cfg.workers, cfg.fingerprint());
            let t = bgt::build_tables(&cfg)?;
            let path = t.save(&out)?;
            Ok(tables_outcome(&t, Some(&path)))
        }
        Command::Bgt { command: BgtCommand::Tables { command: TablesCommand::Check { input } } } => {
            let t = Tables::load(&input)?;
            Ok(tables_outcome(&t, None))
        }
        Command::Selftest => {
            let checks = selftest::run(solver);
            let text = checks.iter().map(|c| format!("{} {}: {}\n", if c.ok { "PASS" } else { "FAIL" }, c.name, c.detail)).collect();
            let finding = checks.iter().any(|c| !c.ok);
            Ok(Outcome { text, json: doc("selftest", json!({ "checks": checks, "pass": !finding })), finding })
        }
    }
}

fn decide(kind: Kind, periods: &str, emit: Option<&Path>, solver: &SolverConfig) -> Result<Outcome> {
    let a = TaskPeriods::parse(kind, periods)?;
    let (v, how) = solve(&a, solver)?;
    log::info!("{a}: {how} after {} states in {:?}", v.stats.states, v.stats.elapsed);
    let mut text = String::new();
    let mut body = json!({ "instance": a, "solver": how, "states": v.stats.states });
    match v.outcome.schedule() {
        Some(s) => {
            text.push_str("SCHEDULABLE\n");
            text.push_str(&one_based(s));
            body["verdict"] = json!("schedulable");
            body["schedule"] = serde_json::to_value(s)?;
            if let Some(path) = emit {
                std::fs::write(path, serde_json::to_string(s)?).with_context(|| format!("writing {}", path.display()))?;
            }
        }
        None => {
            text.push_str("UNSCHEDULABLE\n");
            body["verdict"] = json!("unschedulable");
        }
    }
    Ok(Outcome::ok(text, doc("decide", body)))
}

fn verify(kind: Kind, periods: &str, schedule: &Path) -> Result<Outcome> {
    let a = TaskPeriods::parse(kind, periods)?;
    let raw = std::fs::read_to_string(schedule).with_context(|| format!("reading {}", schedule.display()))?;
    let s: CyclicSchedule = serde_json::from_str(&raw).with_context(|| format!("parsing {}", schedule.display()))?;
    let valid = match kind {
        Kind::Packing => verify_packing(&a, &s)?,
        Kind::Covering => verify_covering(&a, &s)?,
    };
    let text = if valid { "VALID\n" } else { "INVALID\n" }.to_string();
    Ok(Outcome { text, json: doc("verify", json!({ "instance": a, "valid": valid })), finding: !valid })
}

fn fold(op: FoldOp, theta: &str, periods: &str, with_trace: bool) -> Result<Outcome> {
    let kind = match op {
        FoldOp::Pfold | FoldOp::Pfold1 => Kind::Packing,
        FoldOp::Cfold | FoldOp::Cfoldimp => Kind::Covering,
    };
    let a = TaskPeriods::parse(kind, periods)?;
    let theta = ratio::parse(theta).with_context(|| format!("bad theta {theta:?}"))?;
    let t = run_fold(op, &a, &theta)?;
    let loss = density(&a) - density(&t.output);
    let mut text = format!("{}\ndensity loss: {loss}\n", t.output);
    let mut body = json!({ "op": op, "theta": t.theta.to_string(), "input": a, "output": t.output, "density_loss": loss.to_string() });
    if with_trace {
        text.push_str(&serde_json::to_string_pretty(&t)?);
        text.push('\n');
        body["trace"] = serde_json::to_value(&t)?;
    }
    Ok(Outcome::ok(text, doc("fold", body)))
}

fn load_spec(name: &str) -> Result<FamilySpec> {
    if let Some(s) = builtin_spec(name) {
        return Ok(s);
    }
    let path = Path::new(name);
    if !path.is_file() {
        let known: Vec<String> = builtin_specs().into_iter().map(|s| s.name).collect();
        bail!("unknown spec {name:?}; builtin specs are {}", known.join(", "));
    }
    let raw = std::fs::read_to_string(path).with_context(|| format!("reading {name}"))?;
    let spec: FamilySpec = serde_json::from_str(&raw).with_context(|| format!("parsing {name}"))?;
    spec.validate()?;
    Ok(spec)
}

fn report_outcome(r: CampaignReport) -> Result<Outcome> {
    let list = |v: &[TaskPeriods]| v.iter().map(|a| format!(" {a}")).collect::<String>();
    let text = format!(
        "spec: {}\nmembers: {}\nschedulable: {}\nunschedulable: {}{}\nindeterminate: {}{}\nnew solves: {}\n{}\n",
        r.spec,
        r.members,
        r.schedulable,
        r.unschedulable.len(),
        list(&r.unschedulable),
        r.indeterminate.len(),
        list(&r.indeterminate),
        r.new_solves,
        if r.pass { "PASS" } else { "FAIL" },
    );
    let finding = !r.pass;
    Ok(Outcome { text, json: doc("report", serde_json::to_value(&r)?), finding })
}

fn approx(rates: &str, tables: Option<&Path>, pool: Pool, solver: &SolverConfig) -> Result<Outcome> {
    let g = BgtInstance::new(&parse_ints(rates)?)?;
    let tables = match tables {
        Some(p) => Tables::load(p)?,
        None => {
            log::warn!("no --tables given; building them in memory (this takes a while)");
            bgt::build_tables(&TableConfig { state_budget: solver.state_budget, workers: pool.workers })?
        }
    };
    let (h, s) = bgt::bgt_approximate(&g, &tables)?;
    let height = bgt::simulate_bgt(&g, &s, bgt::steady_horizon(&s))?;
    let text = format!("H: {h}\n{}max height: {height}\n", one_based(&s));
    let body = json!({ "rates": g, "boundary_height": h, "schedule": s, "max_height": height });
    Ok(Outcome::ok(text, doc("bgt", body)))
}

fn tables_outcome(t: &Tables, path: Option<&Path>) -> Outcome {
    let mut text = String::new();
    if let Some(p) = path {
        text.push_str(&format!("wrote {}\n", p.display()));
    }
    text.push_str(&format!("fingerprint: {}\n", t.fingerprint));
    let mut stats = Vec::new();
    for table in [&t.t1, &t.t2, &t.t3] {
        text.push_str(&format!(
            "{}: {} reachable, {} stored, {} unschedulable\n",
            table.id,
            table.reachable,
            table.entries.len(),
            table.unschedulable.len()
        ));
        stats.push(json!({
            "id": table.id.to_string(),
            "reachable": table.reachable,
            "stored": table.entries.len(),
            "unschedulable": table.unschedulable.len(),
        }));
    }
    let body = json!({ "path": path.map(|p| p.display().to_string()), "fingerprint": t.fingerprint, "tables": stats });
    Outcome::ok(text, doc("tables", body))
}
