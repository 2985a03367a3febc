//! Command-line front end: model checking, run validation, projections, and
//! cause computation over `*.rtn` models and `*.run` runs.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::mpsc;
use std::time::Duration;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use rtcause::causes::CauseError;
use rtcause::checker::{model_check_all, CheckError, CheckOptions};
use rtcause::contingency::build_location_contingency;
use rtcause::counterfactual::build_but_for_network;
use rtcause::dsl::{
    emit_automaton, emit_model, emit_parsed_run, parse_formula, parse_model, parse_run,
    Diagnostics,
};
use rtcause::mitl::MitlFormula;
use rtcause::model::ActionLabel;
use rtcause::rational::{format_rational, parse_rational};
use rtcause::runs::{
    events_of_run, format_event, local_projection, validate_run, RunError, RunShape,
};
use rtcause::{check_cause, compute_causes, CauseQuery, CauseReport, Event, EventSet, Network};

#[derive(Parser)]
#[command(
    name = "rtcause",
    version,
    about = "But-for and actual causes of MITL effects on runs of timed-automata networks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check an MITL formula over all maximal runs of a model.
    ///
    /// Exits 0 when the formula holds, 1 with a counterexample run on
    /// standard output when it is violated, and 2 on errors.
    Mc {
        model: PathBuf,
        formula: String,
        #[command(flatten)]
        budget: Budget,
    },
    /// Validate a run file against a model and print its shape.
    ValidateRun { model: PathBuf, run: PathBuf },
    /// Print the local projection of a run onto one component.
    Project {
        model: PathBuf,
        run: PathBuf,
        /// Component name (e.g. A1).
        #[arg(long)]
        component: String,
    },
    /// List the events of a run, one cause literal per line.
    Events { model: PathBuf, run: PathBuf },
    /// Decide whether the given event set is a cause of the effect.
    CheckCause {
        model: PathBuf,
        run: PathBuf,
        /// MITL effect observed on the run.
        effect: String,
        /// Events `label@index:comp` or `delay@index:comp=value`.
        #[arg(required = false)]
        events: Vec<String>,
        #[arg(long, value_enum, default_value_t = Mode::Actual)]
        mode: Mode,
        #[command(flatten)]
        budget: Budget,
    },
    /// Compute all causes of the effect on the run.
    ComputeCauses {
        model: PathBuf,
        run: PathBuf,
        /// MITL effect observed on the run.
        effect: String,
        #[arg(long, value_enum, default_value_t = Mode::Actual)]
        mode: Mode,
        #[arg(long, value_enum, default_value_t = Emit::Table)]
        emit: Emit,
        #[command(flatten)]
        budget: Budget,
    },
    /// Emit the intervened (but-for) network for an event set.
    DumpCf {
        model: PathBuf,
        run: PathBuf,
        /// Events `label@index:comp` or `delay@index:comp=value`.
        #[arg(required = false)]
        events: Vec<String>,
    },
    /// Emit the location-contingency automaton of one component.
    DumpContingency {
        model: PathBuf,
        run: PathBuf,
        /// Component name (e.g. A1).
        #[arg(long)]
        component: String,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Mode {
    #[value(name = "butfor")]
    ButFor,
    Actual,
}

impl From<Mode> for rtcause::Mode {
    fn from(m: Mode) -> Self {
        match m {
            Mode::ButFor => rtcause::Mode::ButFor,
            Mode::Actual => rtcause::Mode::Actual,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Emit {
    Table,
    Json,
}

#[derive(Args)]
struct Budget {
    /// Zone node budget per model-checking query.
    #[arg(long, default_value_t = 200_000)]
    node_limit: usize,
    /// Wall-clock limit in seconds for the whole invocation.
    #[arg(long)]
    time_limit: Option<u64>,
    /// Accept counterfactual lassos whose loop takes no time.
    #[arg(long)]
    allow_zeno: bool,
    /// Number of parallel checker queries (0 = one per core).
    #[arg(long, default_value_t = 0)]
    jobs: usize,
}

impl Budget {
    fn options(&self) -> CheckOptions {
        CheckOptions {
            node_limit: self.node_limit,
            allow_zeno: self.allow_zeno,
            ..CheckOptions::default()
        }
    }
}

/// A failed invocation: diagnostics exit with 1, exhausted budgets with 2.
enum Failure {
    Diagnostics(String),
    Budget(String),
}

impl Failure {
    fn report(self) -> ExitCode {
        match self {
            Failure::Diagnostics(msg) => {
                eprintln!("error: {msg}");
                ExitCode::from(1)
            }
            Failure::Budget(msg) => {
                eprintln!("error: {msg}");
                ExitCode::from(2)
            }
        }
    }
}

impl From<Diagnostics> for Failure {
    fn from(diags: Diagnostics) -> Self {
        let text = diags.iter().map(|d| d.to_string()).collect::<Vec<_>>().join("\n");
        Failure::Diagnostics(text)
    }
}

impl From<RunError> for Failure {
    fn from(e: RunError) -> Self {
        Failure::Diagnostics(e.to_string())
    }
}

impl From<CheckError> for Failure {
    fn from(e: CheckError) -> Self {
        match e {
            CheckError::BudgetExceeded(_) => Failure::Budget(e.to_string()),
            _ => Failure::Diagnostics(e.to_string()),
        }
    }
}

impl From<CauseError> for Failure {
    fn from(e: CauseError) -> Self {
        match e {
            CauseError::Check(CheckError::BudgetExceeded(_)) => Failure::Budget(e.to_string()),
            _ => Failure::Diagnostics(e.to_string()),
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command.time_limit() {
        None => run(cli),
        Some(secs) => {
            let (tx, rx) = mpsc::channel();
            std::thread::spawn(move || {
                let _ = tx.send(run(cli));
            });
            match rx.recv_timeout(Duration::from_secs(secs)) {
                Ok(code) => code,
                Err(_) => Failure::Budget(format!("time limit of {secs}s exceeded")).report(),
            }
        }
    }
}

impl Command {
    fn time_limit(&self) -> Option<u64> {
        match self {
            Command::Mc { budget, .. }
            | Command::CheckCause { budget, .. }
            | Command::ComputeCauses { budget, .. } => budget.time_limit,
            _ => None,
        }
    }

    fn jobs(&self) -> usize {
        match self {
            Command::Mc { budget, .. }
            | Command::CheckCause { budget, .. }
            | Command::ComputeCauses { budget, .. } => budget.jobs,
            _ => 0,
        }
    }
}

fn run(cli: Cli) -> ExitCode {
    let jobs = cli.command.jobs();
    if jobs > 0 {
        // Ignore failure: the global pool may already be initialized.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(jobs).build_global();
    }
    match dispatch(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(f) => f.report(),
    }
}

fn dispatch(command: Command) -> Result<u8, Failure> {
    match command {
        Command::Mc { model, formula, budget } => cmd_mc(&model, &formula, &budget),
        Command::ValidateRun { model, run } => cmd_validate_run(&model, &run),
        Command::Project { model, run, component } => cmd_project(&model, &run, &component),
        Command::Events { model, run } => cmd_events(&model, &run),
        Command::CheckCause { model, run, effect, events, mode, budget } => {
            cmd_check_cause(&model, &run, &effect, &events, mode, &budget)
        }
        Command::ComputeCauses { model, run, effect, mode, emit, budget } => {
            cmd_compute_causes(&model, &run, &effect, mode, emit, &budget)
        }
        Command::DumpCf { model, run, events } => cmd_dump_cf(&model, &run, &events),
        Command::DumpContingency { model, run, component } => {
            cmd_dump_contingency(&model, &run, &component)
        }
    }
}

fn read(path: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(path)
        .map_err(|e| Failure::Diagnostics(format!("{}: {e}", path.display())))
}

fn load_model(path: &Path) -> Result<Network, Failure> {
    Ok(parse_model(&read(path)?)?)
}

fn load_run(path: &Path, net: &Network) -> Result<rtcause::runs::LassoRun, Failure> {
    let parsed = parse_run(&read(path)?, net)?;
    Ok(validate_run(net, &parsed)?)
}

fn load_formula(src: &str, net: &Network) -> Result<MitlFormula, Failure> {
    Ok(parse_formula(src, Some(net))?)
}

fn component_index(net: &Network, name: &str) -> Result<usize, Failure> {
    net.component_index(name).map_err(|e| Failure::Diagnostics(e.to_string()))
}

/// Parses a cause literal: `label@index:comp` or `delay@index:comp=value`.
fn parse_event_literal(s: &str, net: &Network) -> Result<Event, Failure> {
    let bad = |why: &str| Failure::Diagnostics(format!("event literal `{s}`: {why}"));
    let (head, value) = match s.split_once('=') {
        Some((h, v)) => (h, Some(v)),
        None => (s, None),
    };
    let (label, position) =
        head.split_once('@').ok_or_else(|| bad("expected `label@index:component`"))?;
    let (index, comp) =
        position.split_once(':').ok_or_else(|| bad("expected `index:component`"))?;
    let index: usize = index.parse().map_err(|_| bad("index must be a positive integer"))?;
    if index == 0 {
        return Err(bad("indices are 1-based"));
    }
    let component = component_index(net, comp)?;
    if label == "delay" {
        let value = value.ok_or_else(|| bad("delay events need `=value`"))?;
        let value = parse_rational(value).map_err(|e| bad(&e.to_string()))?;
        return Ok(Event::delay(component, index, value));
    }
    if value.is_some() {
        return Err(bad("only delay events carry `=value`"));
    }
    let action = if let Some(name) = label.strip_suffix('!') {
        ActionLabel::send(name)
    } else if let Some(name) = label.strip_suffix('?') {
        ActionLabel::receive(name)
    } else {
        ActionLabel::internal(label)
    };
    Ok(Event::action(component, index, action))
}

fn parse_event_set(literals: &[String], net: &Network) -> Result<EventSet, Failure> {
    literals.iter().map(|s| parse_event_literal(s, net)).collect()
}

fn cmd_mc(model: &Path, formula: &str, budget: &Budget) -> Result<u8, Failure> {
    let net = load_model(model)?;
    let phi = load_formula(formula, &net)?;
    let out = model_check_all(&net, &phi, &budget.options())?;
    eprintln!("explored {} zone nodes", out.stats.nodes);
    match out.counterexample {
        None => {
            println!("holds");
            Ok(0)
        }
        Some(w) => {
            println!("violated by:");
            print!("{}", emit_parsed_run(&w.to_parsed_run(), &net));
            Ok(1)
        }
    }
}

fn cmd_validate_run(model: &Path, run: &Path) -> Result<u8, Failure> {
    let net = load_model(model)?;
    let run = load_run(run, &net)?;
    let shape = match run.shape {
        RunShape::Lasso { loop_start } => format!("lasso (loop from step {})", loop_start + 1),
        RunShape::Idle => "finite, idling forever".to_string(),
        RunShape::Stuck => "finite, stuck".to_string(),
    };
    println!("ok: {} steps, {shape}", run.len());
    Ok(0)
}

fn cmd_project(model: &Path, run: &Path, component: &str) -> Result<u8, Failure> {
    let net = load_model(model)?;
    let run = load_run(run, &net)?;
    let k = component_index(&net, component)?;
    println!("{}", local_projection(&run, k));
    Ok(0)
}

fn cmd_events(model: &Path, run: &Path) -> Result<u8, Failure> {
    let net = load_model(model)?;
    let run = load_run(run, &net)?;
    for event in &events_of_run(&run, &net) {
        println!("{}", format_event(event, &net));
    }
    Ok(0)
}

fn cmd_check_cause(
    model: &Path,
    run: &Path,
    effect: &str,
    events: &[String],
    mode: Mode,
    budget: &Budget,
) -> Result<u8, Failure> {
    let net = load_model(model)?;
    let run = load_run(run, &net)?;
    let effect = load_formula(effect, &net)?;
    let cause = parse_event_set(events, &net)?;
    let query = CauseQuery { network: &net, run: &run, effect: &effect, mode: mode.into() };
    let verdict = check_cause(&query, &cause, &budget.options())?;
    println!("{verdict}");
    Ok(0)
}

fn cmd_compute_causes(
    model: &Path,
    run: &Path,
    effect: &str,
    mode: Mode,
    emit: Emit,
    budget: &Budget,
) -> Result<u8, Failure> {
    let net = load_model(model)?;
    let lasso = load_run(run, &net)?;
    let phi = load_formula(effect, &net)?;
    let query = CauseQuery { network: &net, run: &lasso, effect: &phi, mode: mode.into() };
    let report = compute_causes(&query, &budget.options())?;
    match emit {
        Emit::Table => print!("{}", render_table(&report, &net, effect, mode)),
        Emit::Json => println!("{}", render_json(&report, &net, model, run, effect, mode)),
    }
    Ok(0)
}

fn mode_name(mode: Mode) -> &'static str {
    match mode {
        Mode::ButFor => "butfor",
        Mode::Actual => "actual",
    }
}

fn render_table(report: &CauseReport, net: &Network, effect: &str, mode: Mode) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "effect: {effect}");
    let _ = writeln!(out, "mode:   {}", mode_name(mode));
    let n = report.causes.len();
    let _ = writeln!(out, "{n} cause{}:", if n == 1 { "" } else { "s" });
    for (i, cause) in report.causes.iter().enumerate() {
        let body = cause
            .iter()
            .map(|e| format_event(e, net))
            .collect::<Vec<_>>()
            .join(", ");
        let _ = writeln!(out, "  {}. {{ {body} }}", i + 1);
    }
    let s = &report.stats;
    let _ = writeln!(
        out,
        "events: {}, checked: {}, pruned: {}, elapsed: {:.3}s",
        s.events,
        s.checked,
        s.pruned,
        s.elapsed.as_secs_f64()
    );
    out
}

fn event_json(event: &Event, net: &Network) -> Value {
    let component = net
        .components
        .get(event.component)
        .map(|c| c.name.clone())
        .unwrap_or_else(|| format!("#{}", event.component));
    match &event.kind {
        rtcause::EventKind::Action(label) => json!({
            "kind": "action",
            "label": label.to_string(),
            "index": event.index,
            "component": component,
        }),
        rtcause::EventKind::Delay(value) => {
            let decimal = format_rational(value);
            json!({
                "kind": "delay",
                "value": format!("{}/{}", value.numer(), value.denom()),
                "decimal": if decimal.contains('/') { Value::Null } else { decimal.into() },
                "index": event.index,
                "component": component,
            })
        }
    }
}

fn render_json(
    report: &CauseReport,
    net: &Network,
    model: &Path,
    run: &Path,
    effect: &str,
    mode: Mode,
) -> String {
    let causes: Vec<Value> = report
        .causes
        .iter()
        .map(|c| c.iter().map(|e| event_json(e, net)).collect())
        .collect();
    let s = &report.stats;
    let doc = json!({
        "schema": 1,
        "query": {
            "model": model.display().to_string(),
            "run": run.display().to_string(),
            "effect": effect,
            "mode": mode_name(mode),
        },
        "causes": causes,
        "stats": {
            "events": s.events,
            "checked": s.checked,
            "pruned": s.pruned,
            "elapsed_ms": s.elapsed.as_millis() as u64,
        },
    });
    serde_json::to_string_pretty(&doc).expect("serializable report")
}

fn cmd_dump_cf(model: &Path, run: &Path, events: &[String]) -> Result<u8, Failure> {
    let net = load_model(model)?;
    let run = load_run(run, &net)?;
    let cause = parse_event_set(events, &net)?;
    let intervened = build_but_for_network(&net, &run, &cause)
        .map_err(|e| Failure::Diagnostics(e.to_string()))?;
    print!("{}", emit_model(&intervened));
    Ok(0)
}

fn cmd_dump_contingency(model: &Path, run: &Path, component: &str) -> Result<u8, Failure> {
    let net = load_model(model)?;
    let run = load_run(run, &net)?;
    let k = component_index(&net, component)?;
    let automaton = build_location_contingency(&net.components[k], &run, k);
    print!("{}", emit_automaton(&automaton));
    Ok(0)
}
