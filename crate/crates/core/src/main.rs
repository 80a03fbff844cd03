use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use freight_routing::model::{audit_solution, build_smifr, BuildError, Layout, ModelParams};
use freight_routing::network::{enumerate_paths, validate_network, Network, NetworkError, PathSets, DEFAULT_FILTER_FACTOR};
use freight_routing::oracle::{oracle_route, OracleConfig};
use freight_routing::report::{extract_routes, render, sha256_hex, Format, RunManifest};
use freight_routing::saa::{run_saa, SaaConfig, SaaError, SaaResult};
use freight_routing::scenario::{sample_scenarios, DisruptionSpec, Scenario, ScenarioError};
use freight_routing::solver::{solve_milp, write_mps, MilpStatus, MpsError, SolveOptions};

/// `println!` that exits quietly when stdout is closed, e.g. piped into `head`.
macro_rules! out {
    ($($t:tt)*) => {
        if writeln!(std::io::stdout(), $($t)*).is_err() {
            std::process::exit(0);
        }
    };
}

const THREADS_ENV: &str = "INTERMODAL_THREADS";

#[derive(Parser)]
#[command(name = "intermodal", version, about = "Stochastic road-rail freight routing")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check a network file.
    Validate { network: PathBuf },
    /// List the filtered paths of one OD pair.
    Paths {
        network: PathBuf,
        /// Origin and destination ids as `A:B`.
        #[arg(long)]
        od: String,
        #[arg(long, default_value_t = DEFAULT_FILTER_FACTOR)]
        factor: f64,
    },
    /// Draw disruption scenarios.
    Sample {
        network: PathBuf,
        #[arg(long)]
        disruption: PathBuf,
        #[arg(long, default_value_t = 1)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Solve the single-scenario routing problem.
    Solve {
        network: PathBuf,
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        penalty: Option<f64>,
        /// Also run the exhaustive oracle (small instances only).
        #[arg(long)]
        oracle: bool,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Run sample average approximation.
    Saa {
        network: PathBuf,
        #[arg(long)]
        disruption: PathBuf,
        #[arg(long = "M", default_value_t = 100)]
        m: usize,
        #[arg(long = "N", default_value_t = 1)]
        n: usize,
        #[arg(long = "Nprime", default_value_t = 1000)]
        n_prime: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        penalty: Option<f64>,
        /// Worker threads; overrides the INTERMODAL_THREADS variable.
        #[arg(long)]
        threads: Option<usize>,
        /// Evaluate candidates with fixed flow fractions.
        #[arg(long)]
        replay: bool,
        #[arg(short, long, default_value = "saa_result.json")]
        output: PathBuf,
    },
    /// Write the single-scenario model in MPS format.
    ExportMps {
        network: PathBuf,
        #[arg(long)]
        scenario: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Render an SAA result file.
    Report {
        result: PathBuf,
        #[arg(long, default_value = "text")]
        format: Format,
    },
}

enum CliError {
    Invalid(String),
    Solver(String),
    Io(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Invalid(_) => 1,
            CliError::Solver(_) => 2,
            CliError::Io(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Invalid(m) | CliError::Solver(m) | CliError::Io(m) => m,
        }
    }
}

impl From<NetworkError> for CliError {
    fn from(e: NetworkError) -> Self {
        match e {
            NetworkError::Io(_) => CliError::Io(e.to_string()),
            _ => CliError::Invalid(e.to_string()),
        }
    }
}

impl From<ScenarioError> for CliError {
    fn from(e: ScenarioError) -> Self {
        match e {
            ScenarioError::Io(_) => CliError::Io(e.to_string()),
            _ => CliError::Invalid(e.to_string()),
        }
    }
}

impl From<BuildError> for CliError {
    fn from(e: BuildError) -> Self {
        CliError::Invalid(e.to_string())
    }
}

impl From<MpsError> for CliError {
    fn from(e: MpsError) -> Self {
        match e {
            MpsError::Io(_) => CliError::Io(e.to_string()),
            _ => CliError::Invalid(e.to_string()),
        }
    }
}

impl From<SaaError> for CliError {
    fn from(e: SaaError) -> Self {
        match e {
            SaaError::Solver { .. } | SaaError::Model(_) => CliError::Solver(e.to_string()),
            SaaError::Network(e) => e.into(),
            SaaError::Scenario(e) => e.into(),
            _ => CliError::Invalid(e.to_string()),
        }
    }
}

fn io_err(path: &Path, e: std::io::Error) -> CliError {
    CliError::Io(format!("{}: {e}", path.display()))
}

fn read(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| io_err(path, e))
}

fn write(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text).map_err(|e| io_err(path, e))
}

/// Load a network and refuse it when validation finds errors.
fn load_network(path: &Path) -> Result<Network, CliError> {
    let net = Network::from_json(&read(path)?)?;
    let report = validate_network(&net);
    for w in &report.warnings {
        eprintln!("warning: {w}");
    }
    if !report.is_valid() {
        let msgs: Vec<String> = report.errors.iter().map(|e| e.to_string()).collect();
        return Err(CliError::Invalid(format!("invalid network:\n  {}", msgs.join("\n  "))));
    }
    Ok(net)
}

fn load_scenario(path: &Path) -> Result<Scenario, CliError> {
    let mut all = Scenario::load_many(path)?;
    if all.len() != 1 {
        return Err(CliError::Invalid(format!("{}: expected one scenario, found {}", path.display(), all.len())));
    }
    Ok(all.remove(0))
}

fn params_with(penalty: Option<f64>) -> ModelParams {
    let mut p = ModelParams::default();
    if let Some(v) = penalty {
        p.penalty = v;
    }
    p
}

fn thread_count(flag: Option<usize>) -> Result<usize, CliError> {
    if let Some(t) = flag {
        return Ok(t.max(1));
    }
    match std::env::var(THREADS_ENV) {
        Ok(v) => v
            .parse::<usize>()
            .map(|t| t.max(1))
            .map_err(|_| CliError::Invalid(format!("{THREADS_ENV}={v} is not a thread count"))),
        Err(_) => Ok(std::thread::available_parallelism().map_or(1, |n| n.get())),
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Validate { network } => {
            let net = Network::from_json(&read(&network)?)?;
            let report = validate_network(&net);
            for e in &report.errors {
                out!("error: {e}");
            }
            for w in &report.warnings {
                out!("warning: {w}");
            }
            if !report.is_valid() {
                return Err(CliError::Invalid(format!("{} errors", report.errors.len())));
            }
            out!(
                "ok: {} nodes, {} links, {} demand records, {} shipments",
                net.nodes().len(),
                net.links().len(),
                net.demands().len(),
                net.total_shipments()
            );
        }
        Command::Paths { network, od, factor } => {
            let net = load_network(&network)?;
            let (a, b) = od
                .split_once(':')
                .ok_or_else(|| CliError::Invalid(format!("--od expects A:B, got `{od}`")))?;
            let set = enumerate_paths(&net, a, b, factor)?;
            out!("{} paths, shortest {:.2} miles", set.len(), set.min_length);
            for p in &set.paths {
                let transfers: Vec<&str> = p.terminals_visited.iter().map(|&s| net.node(s).id.as_str()).collect();
                out!("{:>10.2}  {}  transfers [{}]", p.total_length, p.label(&net), transfers.join(","));
            }
        }
        Command::Sample {
            network,
            disruption,
            n,
            seed,
            output,
        } => {
            let net = load_network(&network)?;
            let spec = DisruptionSpec::load(&disruption)?;
            let scenarios = sample_scenarios(&net, &spec, n, seed)?;
            let text = serde_json::to_string_pretty(&scenarios).expect("scenarios serialize") + "\n";
            match output {
                Some(p) => write(&p, &text)?,
                None => out!("{}", text.trim_end()),
            }
        }
        Command::Solve {
            network,
            scenario,
            penalty,
            oracle,
            output,
        } => {
            let net = load_network(&network)?;
            let sc = load_scenario(&scenario)?;
            let params = params_with(penalty);
            let paths = PathSets::for_demands(&net, DEFAULT_FILTER_FACTOR)?;
            let (model, map) = build_smifr(&net, &paths, std::slice::from_ref(&sc), &params)?;
            let sol = solve_milp(&model, &SolveOptions::default()).map_err(|e| CliError::Solver(e.to_string()))?;
            if !sol.has_incumbent() {
                return Err(CliError::Solver(format!("no solution: {:?}", sol.status)));
            }
            let blocks = map.scenario_values(&sol.values, 0);
            let violations = audit_solution(&net, &paths, &sc, &params, &blocks)?;
            let routes = extract_routes(&net, &Layout::new(&net), &blocks);
            let unmet: f64 = blocks.iter().map(|b| b.shortfall).sum::<f64>() + 0.0;
            out!(
                "status {:?}  objective {:.4}  bound {:.4}  nodes {}  unmet {}  audit violations {}",
                sol.status,
                sol.objective,
                sol.best_bound,
                sol.explored_nodes,
                unmet,
                violations.len()
            );
            for d in &routes.demands {
                let parts: Vec<String> = d
                    .routes
                    .iter()
                    .map(|r| format!("{} ({:.0}%)", r.label(), r.fraction * 100.0))
                    .collect();
                out!("{}-{} [{}]: {}", d.origin, d.destination, d.commodity, parts.join(", "));
            }
            if oracle {
                let r = oracle_route(&net, &sc, &params, &OracleConfig::default())
                    .map_err(|e| CliError::Invalid(format!("oracle: {e}")))?;
                out!(
                    "oracle objective {:.4} ({} splits priced), difference {:.3e}",
                    r.best_cost,
                    r.explored,
                    sol.objective - r.best_cost
                );
            }
            if let Some(p) = output {
                let doc = serde_json::json!({
                    "status": sol.status,
                    "objective": sol.objective,
                    "best_bound": sol.best_bound,
                    "unmet": unmet,
                    "routes": routes,
                });
                write(&p, &(serde_json::to_string_pretty(&doc).expect("serializes") + "\n"))?;
            }
            if sol.status != MilpStatus::Optimal {
                return Err(CliError::Solver(format!("stopped on {:?}", sol.status)));
            }
        }
        Command::Saa {
            network,
            disruption,
            m,
            n,
            n_prime,
            seed,
            penalty,
            threads,
            replay,
            output,
        } => {
            let net_text = read(&network)?;
            let spec_text = read(&disruption)?;
            let net = load_network(&network)?;
            let spec = DisruptionSpec::load(&disruption)?;
            let mut config = SaaConfig::new(spec, seed).with_sizes(m, n, n_prime);
            config.params = params_with(penalty);
            config.replay_fixed_fractions = replay;
            let threads = thread_count(threads)?;
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .map_err(|e| CliError::Solver(e.to_string()))?;
            let run = pool.install(|| run_saa(&net, &config))?;
            for w in &run.result.warnings {
                eprintln!("warning: {w}");
            }
            write(&output, &run.result.to_json())?;
            let manifest = RunManifest {
                tool_version: env!("CARGO_PKG_VERSION").to_string(),
                command: std::env::args().collect(),
                seed,
                input_digests: vec![
                    (network.display().to_string(), sha256_hex(net_text.as_bytes())),
                    (disruption.display().to_string(), sha256_hex(spec_text.as_bytes())),
                ],
                config: serde_json::to_value(&config).expect("config serializes"),
                threads,
                wall_times: run.times,
            };
            let sidecar = RunManifest::sidecar_path(&output);
            write(&sidecar, &(serde_json::to_string_pretty(&manifest).expect("serializes") + "\n"))?;
            out!("{}", render(&run.result, Some(&manifest), Format::Text).trim_end());
        }
        Command::ExportMps {
            network,
            scenario,
            output,
        } => {
            let net = load_network(&network)?;
            let sc = load_scenario(&scenario)?;
            let paths = PathSets::for_demands(&net, DEFAULT_FILTER_FACTOR)?;
            let (model, _) = build_smifr(&net, &paths, &[sc], &ModelParams::default())?;
            write_mps(&model, &output)?;
            out!("wrote {} ({} columns, {} rows)", output.display(), model.num_cols(), model.num_rows());
        }
        Command::Report { result, format } => {
            let res = SaaResult::from_json(&read(&result)?)
                .map_err(|e| CliError::Invalid(format!("{}: {e}", result.display())))?;
            let sidecar = RunManifest::sidecar_path(&result);
            let manifest = if sidecar.exists() {
                Some(
                    serde_json::from_str::<RunManifest>(&read(&sidecar)?)
                        .map_err(|e| CliError::Invalid(format!("{}: {e}", sidecar.display())))?,
                )
            } else {
                None
            };
            out!("{}", render(&res, manifest.as_ref(), format).trim_end());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.code())
        }
    }
}
