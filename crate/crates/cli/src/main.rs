//! `co2`: run, inspect and check contract-oriented systems.

use std::io::{self, BufRead, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use co2::ccs::{self, CcsModel, TraceSemantics};
use co2::encoding::{self, PclMinus};
use co2::pcl::{pcl_entails, PclModel, Theory};
use co2::runtime::{
    broker_agreements, enumerate_steps, normalize, run_trace, run_trace_with, AgreementView,
    HonestyConfig, StateGraph, StepView, Strategy, System, TraceRecord, TraceView, Verdict, VerdictView, DEFAULT_MAX_DEPTH,
    DEFAULT_MAX_STATES,
};
use co2::syntax::{self, ParseError, Program, Source};
use co2::{ContractModel, Exec, Ident};
use serde::Serialize;

/// `println!` that tolerates a closed stdout, e.g. when piped into `head`.
macro_rules! out {
    ($($t:tt)*) => {{
        let _ = writeln!(io::stdout(), $($t)*);
    }};
}

const EXIT_FALSE: u8 = 1;
const EXIT_INCONCLUSIVE: u8 = 2;
const EXIT_ERROR: u8 = 3;

#[derive(Parser)]
#[command(name = "co2", version, about = "Contract-oriented calculus toolkit")]
struct Cli {
    /// Print machine-readable JSON on stdout.
    #[arg(long, global = true)]
    json: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a system and print its trace.
    Run {
        file: PathBuf,
        /// first, random:SEED or interactive
        #[arg(long, default_value = "first")]
        strategy: String,
        #[arg(long, default_value_t = 1000)]
        max_steps: usize,
    },
    /// List the steps enabled in the initial system.
    Steps { file: PathBuf },
    /// Check whether principals are honest.
    Honesty {
        file: PathBuf,
        /// Principal to check; every agent when omitted.
        #[arg(long)]
        principal: Vec<String>,
        #[arg(long, default_value_t = DEFAULT_MAX_DEPTH)]
        max_depth: usize,
        #[arg(long)]
        max_states: Option<usize>,
        /// Explore on a single thread.
        #[arg(long)]
        sequential: bool,
    },
    /// Decide entailment between contract formulas.
    Prove {
        #[arg(long)]
        contract: Vec<String>,
        #[arg(long)]
        goal: String,
    },
    /// Decide whether a process contract satisfies an LTL formula.
    Ltl {
        #[arg(long)]
        contract: String,
        #[arg(long)]
        formula: String,
        /// Ignore finite maximal traces.
        #[arg(long)]
        infinite_only: bool,
    },
    /// Translate a clausal contract formula into a process contract.
    Encode {
        #[arg(long)]
        formula: String,
    },
    /// List the agreements a broker could fuse.
    Agree {
        file: PathBuf,
        #[arg(long)]
        broker: String,
        #[arg(long)]
        phi: String,
    },
    /// Check the formula/process correspondence on a random corpus.
    Theorems {
        #[arg(long, default_value_t = 500)]
        corpus: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Debug)]
enum Failure {
    Parse(String, ParseError),
    Other(String),
}

impl<E: std::error::Error> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure::Other(e.to_string())
    }
}

type Outcome = Result<u8, Failure>;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            // 2 means inconclusive here, so usage errors share the error code
            return ExitCode::from(if e.use_stderr() { EXIT_ERROR } else { 0 });
        }
    };
    match dispatch(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(Failure::Parse(origin, e)) => {
            for d in &e.diagnostics {
                eprintln!("{origin}:{d}");
            }
            ExitCode::from(EXIT_ERROR)
        }
        Err(Failure::Other(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_ERROR)
        }
    }
}

/// `CO2_STATE_CAP` overrides the default state caps.
fn state_cap(default: usize) -> Result<usize, Failure> {
    match std::env::var("CO2_STATE_CAP") {
        Ok(v) => v
            .trim()
            .parse()
            .map_err(|_| Failure::Other(format!("CO2_STATE_CAP must be a number, got `{v}`"))),
        Err(_) => Ok(default),
    }
}

fn emit<T: Serialize>(value: &T) -> Result<(), Failure> {
    out!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

fn parse_with<T>(origin: &str, text: &str, f: impl FnOnce(&str) -> Result<T, ParseError>) -> Result<T, Failure> {
    f(text).map_err(|e| Failure::Parse(origin.to_string(), e))
}

fn load(path: &Path) -> Result<Program, Failure> {
    let text = std::fs::read_to_string(path).map_err(|e| Failure::Other(format!("{}: {e}", path.display())))?;
    let mut program = parse_with(&path.display().to_string(), &text, syntax::parse_program)?;
    if let Program::Ccs(src) = &mut program {
        let cap = state_cap(src.model.cap())?;
        src.model = src.model.clone().with_cap(cap);
    }
    Ok(program)
}

/// Observables are written in the surface syntax of the file's model.
trait Observables: ContractModel {
    fn parse_observable(text: &str) -> Result<Self::Observable, ParseError>;
}

impl Observables for PclModel {
    fn parse_observable(text: &str) -> Result<Self::Observable, ParseError> {
        syntax::parse_pcl(text)
    }
}

impl Observables for CcsModel {
    fn parse_observable(text: &str) -> Result<Self::Observable, ParseError> {
        syntax::parse_ltl(text)
    }
}

fn dispatch(cli: &Cli) -> Outcome {
    let json = cli.json;
    match &cli.command {
        Command::Run { file, strategy, max_steps } => {
            let strategy = parse_strategy(strategy)?;
            match load(file)? {
                Program::Pcl(src) => run(&src, strategy, *max_steps, json),
                Program::Ccs(src) => run(&src, strategy, *max_steps, json),
            }
        }
        Command::Steps { file } => match load(file)? {
            Program::Pcl(src) => steps(&src, json),
            Program::Ccs(src) => steps(&src, json),
        },
        Command::Honesty {
            file,
            principal,
            max_depth,
            max_states,
            sequential,
        } => {
            let cfg = HonestyConfig {
                max_depth: *max_depth,
                max_states: match max_states {
                    Some(m) => *m,
                    None => state_cap(DEFAULT_MAX_STATES)?,
                },
                exec: if *sequential { Exec::Sequential } else { Exec::Parallel },
            };
            match load(file)? {
                Program::Pcl(src) => honesty(&src, principal, &cfg, json),
                Program::Ccs(src) => honesty(&src, principal, &cfg, json),
            }
        }
        Command::Prove { contract, goal } => prove(contract, goal, json),
        Command::Ltl {
            contract,
            formula,
            infinite_only,
        } => ltl(contract, formula, *infinite_only, json),
        Command::Encode { formula } => encode(formula, json),
        Command::Agree { file, broker, phi } => match load(file)? {
            Program::Pcl(src) => agree(&src, broker, phi, json),
            Program::Ccs(src) => agree(&src, broker, phi, json),
        },
        Command::Theorems { corpus, seed } => theorems(*corpus, *seed, json),
    }
}

enum Mode {
    Auto(Strategy),
    Interactive,
}

fn parse_strategy(s: &str) -> Result<Mode, Failure> {
    match s {
        "first" => Ok(Mode::Auto(Strategy::First)),
        "interactive" => Ok(Mode::Interactive),
        _ => match s.strip_prefix("random:").map(str::parse) {
            Some(Ok(seed)) => Ok(Mode::Auto(Strategy::Random(seed))),
            _ => Err(Failure::Other(format!(
                "unknown strategy `{s}` (expected first, random:SEED or interactive)"
            ))),
        },
    }
}

fn initial<M: ContractModel>(src: &Source<M>) -> Result<System<M>, Failure> {
    Ok(normalize(&src.model, &src.defs, &src.system)?)
}

/// Reads step indices from stdin, one per line. End of input or an empty
/// line ends the run; the menu goes to stderr so stdout stays replayable.
fn interactive<M: ContractModel>(src: &Source<M>, sys: &System<M>, max_steps: usize) -> Result<TraceRecord<M>, Failure> {
    let stdin = io::stdin();
    let mut lines = stdin.lock().lines();
    let mut bad_input = None;
    let record = run_trace_with(&src.model, &src.defs, sys, max_steps, |state, steps| {
        let mut err = io::stderr().lock();
        let _ = writeln!(err, "state: {}", state.freeze_names());
        for (i, s) in steps.iter().enumerate() {
            let _ = writeln!(err, "  [{i}] {}", s.describe());
        }
        let _ = write!(err, "> ");
        let _ = err.flush();
        let line = lines.next()?.ok()?;
        let line = line.trim();
        if line.is_empty() {
            return None;
        }
        match line.parse() {
            Ok(i) => Some(i),
            Err(_) => {
                bad_input = Some(line.to_string());
                None
            }
        }
    })?;
    if let Some(l) = bad_input {
        return Err(Failure::Other(format!("expected a step index, got `{l}`")));
    }
    Ok(record)
}

fn run<M: ContractModel>(src: &Source<M>, mode: Mode, max_steps: usize, json: bool) -> Outcome {
    let sys = initial(src)?;
    let record = match mode {
        Mode::Auto(strategy) => run_trace(&src.model, &src.defs, &sys, &strategy, max_steps)?,
        Mode::Interactive => interactive(src, &sys, max_steps)?,
    };
    if json {
        emit(&TraceView::from(&record))?;
    } else {
        out!("initial: {}", record.initial);
        for s in &record.steps {
            let v = StepView::from(s);
            let mut head = format!("{}. {} {}", v.step, v.rule, v.agents.join(","));
            if let Some(x) = &v.session {
                head.push_str(&format!(" {x}"));
            }
            if let Some(l) = &v.label {
                head.push_str(&format!(" <{}>", l.join(", ")));
            }
            out!("{head}\n   {}", v.state);
        }
        let end = if record.stuck {
            "stuck"
        } else if record.max_steps_reached {
            "step limit reached"
        } else {
            "stopped"
        };
        out!("{end} after {} steps", record.steps.len());
    }
    Ok(0)
}

#[derive(Serialize)]
struct EnabledStep {
    index: usize,
    rule: String,
    agents: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    session: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    label: Option<Vec<String>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    sigma: Option<Vec<(String, String)>>,
    state: String,
}

fn steps<M: ContractModel>(src: &Source<M>, json: bool) -> Outcome {
    let sys = initial(src)?;
    let steps = enumerate_steps(&src.model, &src.defs, &sys)?;
    if json {
        let out: Vec<EnabledStep> = steps
            .iter()
            .enumerate()
            .map(|(index, s)| EnabledStep {
                index,
                rule: s.rule.to_string(),
                agents: s.agents.iter().map(ToString::to_string).collect(),
                session: s.session.as_ref().map(ToString::to_string),
                label: s.label.as_ref().map(|l| l.entry_strings()),
                sigma: s
                    .sigma
                    .as_ref()
                    .map(|sg| sg.iter().map(|(v, n)| (v.to_string(), n.to_string())).collect()),
                state: s.next.freeze_names().to_string(),
            })
            .collect();
        emit(&out)?;
    } else {
        out!("{}", sys.freeze_names());
        if steps.is_empty() {
            out!("no steps enabled");
        }
        for (i, s) in steps.iter().enumerate() {
            out!("[{i}] {}\n    {}", s.describe(), s.next.freeze_names());
        }
    }
    Ok(0)
}

fn honesty<M: ContractModel>(src: &Source<M>, principals: &[String], cfg: &HonestyConfig, json: bool) -> Outcome {
    let sys = initial(src)?;
    let names: Vec<Ident> = if principals.is_empty() {
        sys.agents.iter().map(|a| a.name.clone()).collect()
    } else {
        principals.iter().map(|p| Ident::principal(p)).collect()
    };
    let graph = StateGraph::explore(&src.model, &src.defs, &sys, cfg)?;
    let mut reports = Vec::new();
    for p in &names {
        if sys.agent(p).is_none() && !sys.principal_names().contains(p) {
            return Err(Failure::Other(format!("principal `{p}` does not occur in the system")));
        }
        reports.push(graph.verdict(&src.model, p)?);
    }
    let code = if reports.iter().any(|r| matches!(r.verdict, Verdict::Dishonest(_))) {
        EXIT_FALSE
    } else if reports.iter().any(|r| r.verdict == Verdict::Inconclusive) {
        EXIT_INCONCLUSIVE
    } else {
        0
    };
    if json {
        emit(&reports.iter().map(VerdictView::from).collect::<Vec<_>>())?;
        return Ok(code);
    }
    for r in &reports {
        let v = VerdictView::from(r);
        out!("{}: {} ({} states{})", v.principal, v.verdict, v.states, if v.exhausted { "" } else { ", bounds hit" });
        if let (Some(w), Some(s), Some(o)) = (&v.witness, &v.session, &v.obligations) {
            out!("  session {s}, outstanding: {}", o.join(", "));
            for st in &w.path {
                out!("  {}. {} {}: {}", st.step, st.rule, st.agents.join(","), st.state);
            }
            if !w.cycle.is_empty() {
                out!("  then forever:");
                for st in &w.cycle {
                    out!("  {}. {} {}: {}", st.step, st.rule, st.agents.join(","), st.state);
                }
            }
        }
    }
    Ok(code)
}

#[derive(Serialize)]
struct ProofView {
    result: bool,
    /// Atoms derived from the contracts.
    derived: Vec<String>,
    /// Contractual implications whose premises are justified.
    supported: Vec<String>,
}

fn prove(contracts: &[String], goal: &str, json: bool) -> Outcome {
    let cs = contracts
        .iter()
        .map(|c| parse_with("--contract", c, syntax::parse_pcl))
        .collect::<Result<Vec<_>, _>>()?;
    let goal = parse_with("--goal", goal, syntax::parse_pcl)?;
    let result = pcl_entails(&cs, &goal)?;
    let theory = Theory::from_contracts(&cs)?;
    let d = theory.derive();
    let view = ProofView {
        result,
        derived: d.atoms.iter().map(ToString::to_string).collect(),
        supported: d.supported.iter().map(|&i| theory.clauses()[i].to_string()).collect(),
    };
    if json {
        emit(&view)?;
    } else {
        out!("{result}");
        out!("derived: {}", view.derived.join(", "));
        if !view.supported.is_empty() {
            out!("supported: {}", view.supported.join("; "));
        }
    }
    Ok(if result { 0 } else { EXIT_FALSE })
}

#[derive(Serialize)]
struct LtlView {
    result: bool,
    states: usize,
    deadlocks: usize,
}

fn ltl(contract: &str, formula: &str, infinite_only: bool, json: bool) -> Outcome {
    let (defs, c) = parse_with("--contract", contract, syntax::parse_ccs)?;
    let phi = parse_with("--formula", formula, syntax::parse_ltl)?;
    let g = ccs::reachable(&defs, &c, state_cap(ccs::DEFAULT_STATE_CAP)?)?;
    let sem = if infinite_only {
        TraceSemantics::InfiniteOnly
    } else {
        TraceSemantics::Maximal
    };
    let view = LtlView {
        result: ccs::ltl::entails(&g, &phi, sem),
        states: g.len(),
        deadlocks: (0..g.len()).filter(|&s| g.is_deadlock(s)).count(),
    };
    if json {
        emit(&view)?;
    } else {
        out!("{} ({} states, {} deadlocked)", view.result, view.states, view.deadlocks);
    }
    Ok(if view.result { 0 } else { EXIT_FALSE })
}

#[derive(Serialize)]
struct EncodingView {
    definitions: Vec<String>,
    contract: String,
}

fn encode(formula: &str, json: bool) -> Outcome {
    let f = parse_with("--formula", formula, syntax::parse_pcl)?;
    let enc = encoding::encode(&PclMinus::from_formula(&f)?);
    let view = EncodingView {
        definitions: enc.defs.iter().map(|(x, c)| format!("rec {x} = {c};")).collect(),
        contract: enc.contract.to_string(),
    };
    if json {
        emit(&view)?;
    } else {
        for d in &view.definitions {
            out!("{d}");
        }
        out!("{}", view.contract);
    }
    Ok(0)
}

fn agree<M: Observables>(src: &Source<M>, broker: &str, phi: &str, json: bool) -> Outcome {
    let sys = initial(src)?;
    let phi = parse_with("--phi", phi, M::parse_observable)?;
    let (latents, found) = broker_agreements(&src.model, &sys, &Ident::principal(broker), &phi)?;
    let views: Vec<AgreementView> = found.iter().map(|a| AgreementView::new(a, &latents)).collect();
    if json {
        emit(&views)?;
    } else {
        if views.is_empty() {
            out!("no agreement");
        }
        for (i, v) in views.iter().enumerate() {
            let sigma: Vec<String> = v.sigma.iter().map(|(x, n)| format!("{x} -> {n}")).collect();
            out!("[{i}] session {}: {{{}}}", v.session, sigma.join(", "));
            for c in &v.fused {
                out!("    {c}");
            }
        }
    }
    Ok(if views.is_empty() { EXIT_FALSE } else { 0 })
}

#[derive(Serialize)]
struct TheoremFailure {
    formula: String,
    detail: String,
}

#[derive(Serialize)]
struct TheoremSummary {
    instances: usize,
    seed: u64,
    agreeing: usize,
    entailed: usize,
    failures: Vec<TheoremFailure>,
}

fn theorems(n: usize, seed: u64, json: bool) -> Outcome {
    let cap = state_cap(encoding::CORPUS_STATE_CAP)?;
    let reports = encoding::run_corpus(n, seed, cap, Exec::Parallel);
    let mut summary = TheoremSummary {
        instances: n,
        seed,
        agreeing: 0,
        entailed: 0,
        failures: Vec::new(),
    };
    for r in &reports {
        if matches!(&r.theorem2, Ok(c) if c.lhs) {
            summary.entailed += 1;
        }
        if r.agrees() {
            summary.agreeing += 1;
            continue;
        }
        let side = |name: &str, c: &Result<encoding::TheoremCheck, encoding::EncodingError>| match c {
            Ok(c) if c.agrees() => None,
            Ok(c) => Some(format!("{name}: logic {} vs processes {}", c.lhs, c.rhs)),
            Err(e) => Some(format!("{name}: {e}")),
        };
        let detail: Vec<String> = [side("run equivalence", &r.theorem1), side("reachability", &r.theorem2)]
            .into_iter()
            .flatten()
            .collect();
        summary.failures.push(TheoremFailure {
            formula: r.formula.to_string(),
            detail: detail.join("; "),
        });
    }
    if json {
        emit(&summary)?;
    } else {
        out!(
            "{} of {} instances agree ({} entail their latent formula)",
            summary.agreeing, summary.instances, summary.entailed
        );
        for f in &summary.failures {
            out!("  {}: {}", f.formula, f.detail);
        }
    }
    Ok(if summary.failures.is_empty() { 0 } else { EXIT_FALSE })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn strategies() {
        assert!(matches!(parse_strategy("first"), Ok(Mode::Auto(Strategy::First))));
        assert!(matches!(parse_strategy("random:42"), Ok(Mode::Auto(Strategy::Random(42)))));
        assert!(matches!(parse_strategy("interactive"), Ok(Mode::Interactive)));
        assert!(parse_strategy("random:x").is_err());
        assert!(parse_strategy("last").is_err());
    }

    #[test]
    fn command_line_shape() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
        let cli = Cli::try_parse_from(["co2", "honesty", "f.co2", "--principal", "A", "--principal", "B"]).unwrap();
        let Command::Honesty { principal, .. } = cli.command else { panic!() };
        assert_eq!(principal, vec!["A", "B"]);
    }
}
