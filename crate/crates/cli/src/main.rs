use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use rotor_explore::adversary::{self, AdversarialInstance};
use rotor_explore::agent::{battery, BuiltinAgent, PortFunction, ScriptedAgent};
use rotor_explore::experiments::{self, EdgeRule, ExperimentReport, DEFAULT_UPPER_FACTOR};
use rotor_explore::graph::PortLabeledGraph;
use rotor_explore::sim::{self, StopCondition};

const EXIT_FAIL: u8 = 1;
const EXIT_USAGE: u8 = 2;
const EXIT_ERROR: u8 = 3;

#[derive(Parser)]
#[command(name = "rotor-explore", version, about = "Oblivious-agent graph exploration: simulation and lower-bound adversaries")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one agent on a graph file and export the trace.
    Simulate(SimulateArgs),
    /// Build the worst-case path labeling for an agent and check (n-1)^2.
    AdversaryPath(AdversaryArgs),
    /// Build the clique-with-path instance for an agent and check d^2(d-1).
    AdversaryCubic(CubicArgs),
    /// Enumerate every labeling of an n-node path.
    BruteforcePath(AdversaryArgs),
    /// Check rotor-router cover time against factor * m * D on random graphs.
    RotorUpper(UpperArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Args)]
struct Output {
    /// Write the report here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "csv")]
    format: Format,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long)]
    graph: PathBuf,
    /// Builtin agent name or agent script file.
    #[arg(long, default_value = "rotor-router")]
    agent: String,
    #[arg(long, default_value_t = 0)]
    start: usize,
    /// `covered`, `target:<node>` or `steps:<k>`.
    #[arg(long, default_value = "covered", value_parser = parse_stop)]
    stop: StopCondition,
    /// Step cap; defaults to 4 n^3.
    #[arg(long)]
    cap: Option<u64>,
    #[command(flatten)]
    output: Output,
}

#[derive(Args)]
struct AdversaryArgs {
    /// Builtin agent name, `battery`, or agent script file.
    #[arg(long, default_value = "rotor-router")]
    agent: String,
    /// `10`, `2,5,9`, `2..=12` or `2..13`.
    #[arg(long, value_parser = parse_list)]
    n: NList,
    #[arg(long)]
    cap: Option<u64>,
    /// Write the instance graph here and its sidecar next to it (single n only).
    #[arg(long)]
    instance_out: Option<PathBuf>,
    #[command(flatten)]
    output: Output,
}

#[derive(Args)]
struct CubicArgs {
    #[command(flatten)]
    common: AdversaryArgs,
    /// Start clique node.
    #[arg(long, default_value_t = 0)]
    start: usize,
}

#[derive(Args)]
struct UpperArgs {
    #[arg(long, value_parser = parse_list)]
    n: NList,
    /// `<m>`, `<k>n` (m = k n) or `<f>d` (fraction of all pairs).
    #[arg(long, default_value = "2n", value_parser = parse_edge_rule)]
    m: EdgeRule,
    #[arg(long, default_value = "1", value_parser = parse_list)]
    seed: NList,
    #[arg(long, default_value_t = DEFAULT_UPPER_FACTOR)]
    factor: f64,
    #[arg(long)]
    cap: Option<u64>,
    #[command(flatten)]
    output: Output,
}

#[derive(Clone, Debug)]
struct NList(Vec<u64>);

impl NList {
    fn sizes(&self) -> Vec<usize> {
        self.0.iter().map(|&v| v as usize).collect()
    }
}

fn parse_list(s: &str) -> Result<NList, String> {
    let num = |t: &str| t.trim().parse::<u64>().map_err(|_| format!("{t:?} is not a non-negative integer"));
    let mut out = Vec::new();
    for part in s.split(',') {
        if let Some((a, b)) = part.split_once("..=") {
            out.extend(num(a)?..=num(b)?);
        } else if let Some((a, b)) = part.split_once("..") {
            out.extend(num(a)?..num(b)?);
        } else {
            out.push(num(part)?);
        }
    }
    if out.is_empty() {
        return Err(format!("{s:?} is an empty range"));
    }
    Ok(NList(out))
}

fn parse_stop(s: &str) -> Result<StopCondition, String> {
    match s.split_once(':') {
        None if s == "covered" => Ok(StopCondition::Covered),
        Some(("target", v)) => v.parse().map(StopCondition::TargetVisited).map_err(|e| e.to_string()),
        Some(("steps", k)) => k.parse().map(StopCondition::Steps).map_err(|e| e.to_string()),
        _ => Err(format!("{s:?}: expected covered, target:<node> or steps:<k>")),
    }
}

fn parse_edge_rule(s: &str) -> Result<EdgeRule, String> {
    EdgeRule::parse(s).map_err(|e| e.to_string())
}

#[derive(Debug)]
struct UsageError(String);

fn load_agents(spec: &str) -> Result<Vec<Box<dyn PortFunction>>> {
    if spec == "battery" {
        return Ok(battery().into_iter().map(|a| Box::new(a) as Box<dyn PortFunction>).collect());
    }
    if let Some(a) = BuiltinAgent::from_name(spec) {
        return Ok(vec![Box::new(a)]);
    }
    let path = Path::new(spec);
    if !path.exists() {
        return Err(anyhow::Error::new(UsageError(format!(
            "unknown agent {spec:?}: expected one of {}, battery, or a script file",
            BuiltinAgent::ALL.map(|a| a.as_str()).join(", ")
        ))));
    }
    let text = fs::read_to_string(path).with_context(|| format!("reading agent script {}", path.display()))?;
    let name = path.file_stem().map_or("scripted".into(), |s| s.to_string_lossy().into_owned());
    Ok(vec![Box::new(ScriptedAgent::from_json(&text)?.with_name(name))])
}

fn emit(output: &Output, report: &ExperimentReport) -> Result<()> {
    let text = match output.format {
        Format::Csv => report.to_csv()?,
        Format::Json => report.to_json() + "\n",
    };
    write_out(output.out.as_deref(), &text)?;
    eprintln!("{}: {}", report.experiment, report.verdict);
    for a in &report.assumptions {
        eprintln!("assumption: {a}");
    }
    Ok(())
}

fn write_out(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn write_instance(path: &Path, inst: &AdversarialInstance) -> Result<()> {
    fs::write(path, inst.graph.to_json() + "\n").with_context(|| format!("writing {}", path.display()))?;
    let sidecar = path.with_extension("sidecar.json");
    fs::write(&sidecar, inst.sidecar_json() + "\n").with_context(|| format!("writing {}", sidecar.display()))?;
    Ok(())
}

fn single_instance_target(args: &AdversaryArgs) -> Result<Option<&Path>> {
    match &args.instance_out {
        Some(p) if args.n.0.len() != 1 || args.agent == "battery" => Err(anyhow::Error::new(UsageError(format!(
            "--instance-out {} needs a single agent and a single --n",
            p.display()
        )))),
        other => Ok(other.as_deref()),
    }
}

fn merge(experiment: &str, agent: &str, reports: Vec<ExperimentReport>) -> ExperimentReport {
    let mut parameters = reports.first().map(|r| r.parameters.clone()).unwrap_or_default();
    parameters.insert("agent".into(), agent.into());
    let rows = reports.into_iter().flat_map(|r| r.rows).collect();
    ExperimentReport::new(experiment, parameters, rows)
}

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Simulate(args) => {
            let text = fs::read_to_string(&args.graph).with_context(|| format!("reading {}", args.graph.display()))?;
            let g = PortLabeledGraph::from_json(&text).with_context(|| format!("loading {}", args.graph.display()))?;
            let agents = load_agents(&args.agent)?;
            let [agent] = agents.as_slice() else {
                return Err(UsageError("simulate takes a single agent".into()).into());
            };
            let cap = args.cap.unwrap_or_else(|| sim::default_cap(g.node_count()));
            let trace = sim::run(&g, agent.as_ref(), args.start, args.stop, cap)?;
            let text = match args.output.format {
                Format::Csv => trace.to_csv()?,
                Format::Json => serde_json::to_string(&trace)? + "\n",
            };
            write_out(args.output.out.as_deref(), &text)?;
            eprintln!(
                "simulate: {} after {} steps (covered_at {})",
                if trace.stopped { "stopped" } else { "not-stopped" },
                trace.steps,
                trace.covered_at.map_or("none".into(), |c| c.to_string())
            );
            Ok(trace.stopped)
        }
        Command::AdversaryPath(args) => {
            let target = single_instance_target(&args)?;
            let agents = load_agents(&args.agent)?;
            let ns = args.n.sizes();
            if let Some(path) = target {
                write_instance(path, &adversary::path_instance(agents[0].as_ref(), ns[0])?)?;
            }
            let reports = agents
                .iter()
                .map(|a| experiments::path_bound_report(a.as_ref(), &ns, args.cap))
                .collect::<Result<Vec<_>, _>>()?;
            let report = merge("adversary-path", &args.agent, reports);
            emit(&args.output, &report)?;
            Ok(report.passed())
        }
        Command::AdversaryCubic(CubicArgs { common: args, start }) => {
            let target = single_instance_target(&args)?;
            let agents = load_agents(&args.agent)?;
            let ns = args.n.sizes();
            if let Some(path) = target {
                let c = adversary::build_cubic_construction(agents[0].as_ref(), ns[0], start)?;
                write_instance(path, &c.instance)?;
            }
            let reports = agents
                .iter()
                .map(|a| experiments::cubic_bound_report(a.as_ref(), &ns, start, args.cap))
                .collect::<Result<Vec<_>, _>>()?;
            let report = merge("adversary-cubic", &args.agent, reports);
            emit(&args.output, &report)?;
            Ok(report.passed())
        }
        Command::BruteforcePath(args) => {
            if args.instance_out.is_some() {
                return Err(UsageError("bruteforce-path does not export instances".into()).into());
            }
            let agents = load_agents(&args.agent)?;
            let ns = args.n.sizes();
            let reports = agents
                .iter()
                .map(|a| experiments::bruteforce_report(a.as_ref(), &ns, args.cap))
                .collect::<Result<Vec<_>, _>>()?;
            let report = merge("bruteforce-path", &args.agent, reports);
            emit(&args.output, &report)?;
            Ok(report.passed())
        }
        Command::RotorUpper(args) => {
            let report =
                experiments::rotor_upper_bound_sweep(&args.n.sizes(), args.m, &args.seed.0, args.factor, args.cap)?;
            emit(&args.output, &report)?;
            Ok(report.passed())
        }
    }
}

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn main() -> ExitCode {
    let cli = Cli::try_parse().unwrap_or_else(|e| e.exit());
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(EXIT_FAIL),
        Err(e) if e.is::<UsageError>() => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_USAGE)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_ERROR)
        }
    }
}
