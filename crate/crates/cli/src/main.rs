use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use spurious_core::bench::{run_bench, to_json_lines, BenchConfig};
use spurious_core::data::{read_csv, Dataset};
use spurious_core::eval::compare_cpdags;
use spurious_core::graph::{dag_to_cpdag, find_3_cliques, read_graph, write_graph, MixedGraph};
use spurious_core::learn::{hill_climb, HcConfig};
use spurious_core::model::{corrupt, draw_noise_channel, forward_sample, read_network, BayesNet};
use spurious_core::sed::{run_sed, BasePolicy, SedConfig};
use spurious_core::Error;

#[derive(Parser)]
#[command(name = "spurious", version, about = "Detect and remove spurious edges caused by measurement error")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Forward-sample a network to CSV.
    Sample {
        #[arg(long)]
        net: PathBuf,
        #[arg(long)]
        n: usize,
        #[command(flatten)]
        common: Common,
    },
    /// Corrupt a dataset with a randomly drawn noise channel.
    Corrupt {
        #[arg(long)]
        net: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value_t = 0.1)]
        alpha_max: f64,
        /// Channel sidecar path; defaults to `<out>.channel.json`.
        #[arg(long)]
        channel: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Learn a DAG by BIC hill climbing.
    Learn {
        #[arg(long)]
        data: PathBuf,
        /// Network whose variables fix the data schema.
        #[arg(long)]
        net: Option<PathBuf>,
        #[arg(long, default_value_t = 4)]
        max_parents: usize,
        /// Write the CPDAG of the learned DAG instead.
        #[arg(long)]
        cpdag: bool,
        #[command(flatten)]
        common: Common,
    },
    /// Remove spurious edges from a learned graph.
    Sed {
        #[arg(long)]
        graph: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        net: Option<PathBuf>,
        #[arg(long, default_value_t = 1e-3)]
        epsilon: f64,
        #[arg(long, default_value_t = 200)]
        max_iter: usize,
        #[arg(long, default_value_t = 3)]
        restarts: usize,
        #[arg(long, default_value = "gmod")]
        base: BasePolicy,
        /// Removal log (JSON); defaults to `<out>.log.json`, or stderr without `--out`.
        #[arg(long)]
        log: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Compare a graph with the truth as CPDAGs.
    Eval {
        #[arg(long)]
        graph: PathBuf,
        /// True network.
        #[arg(long, conflicts_with = "truth", required_unless_present = "truth")]
        net: Option<PathBuf>,
        /// True graph file.
        #[arg(long)]
        truth: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// List the 3-vertex cliques of a graph.
    Cliques {
        #[arg(long)]
        graph: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Run a benchmark sweep from a JSON config.
    Bench {
        config: PathBuf,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Args)]
struct Common {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output file; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug)]
enum Failure {
    Usage(String),
    Parse(String),
    Internal(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let msg = e.to_string();
        match e {
            Error::InvalidArgument(_) => Failure::Usage(msg),
            Error::ParseError { .. }
            | Error::UnknownState { .. }
            | Error::InvalidLabel(_)
            | Error::DuplicateNode(_)
            | Error::InvalidEdge(..)
            | Error::NodeNotFound(_)
            | Error::SchemaMismatch(_)
            | Error::NotADag
            | Error::Io(_) => Failure::Parse(msg),
            _ => Failure::Internal(msg),
        }
    }
}

type CmdResult = std::result::Result<(), Failure>;

fn emit(out: Option<&Path>, text: &str) -> CmdResult {
    match out {
        Some(p) => std::fs::write(p, text).map_err(|e| Failure::Parse(format!("{}: {e}", p.display()))),
        None => std::io::stdout().write_all(text.as_bytes()).map_err(|e| Failure::Internal(e.to_string())),
    }
}

fn sidecar(out: Option<&Path>, given: Option<PathBuf>, suffix: &str) -> Option<PathBuf> {
    given.or_else(|| out.map(|p| PathBuf::from(format!("{}{suffix}", p.display()))))
}

fn load_data(path: &Path, net: Option<&Path>) -> Result<Dataset, Failure> {
    let schema = net.map(read_network).transpose()?;
    Ok(read_csv(path, schema.as_ref().map(BayesNet::variables))?)
}

fn as_cpdag(g: MixedGraph) -> Result<MixedGraph, Failure> {
    Ok(if g.is_dag() { dag_to_cpdag(&g)? } else { g })
}

fn to_json<T: serde::Serialize>(v: &T) -> String {
    serde_json::to_string_pretty(v).expect("serializable") + "\n"
}

fn run(cmd: Command) -> CmdResult {
    match cmd {
        Command::Sample { net, n, common } => {
            let data = forward_sample(&read_network(net)?, n, common.seed)?;
            emit(common.out.as_deref(), &data.to_csv())
        }
        Command::Corrupt { net, data, alpha_max, channel, common } => {
            let bn = read_network(net)?;
            let clean = read_csv(data, Some(bn.variables()))?;
            let ch = draw_noise_channel(bn.variables(), alpha_max, common.seed)?;
            let noisy = corrupt(&clean, &ch, common.seed)?;
            emit(common.out.as_deref(), &noisy.to_csv())?;
            if let Some(p) = sidecar(common.out.as_deref(), channel, ".channel.json") {
                emit(Some(&p), &to_json(&ch))?;
            }
            Ok(())
        }
        Command::Learn { data, net, max_parents, cpdag, common } => {
            let data = load_data(&data, net.as_deref())?;
            let g = hill_climb(&data, &HcConfig { max_parents, seed: common.seed, ..HcConfig::default() })?;
            let g = if cpdag { dag_to_cpdag(&g)? } else { g };
            emit(common.out.as_deref(), &write_graph(&g))
        }
        Command::Sed { graph, data, net, epsilon, max_iter, restarts, base, log, common } => {
            let data = load_data(&data, net.as_deref())?;
            let g = as_cpdag(read_graph(graph)?)?;
            let cfg = SedConfig { epsilon, max_iter, restarts, base, seed: common.seed, ..SedConfig::default() };
            let outcome = run_sed(&g, &data, &cfg)?;
            emit(common.out.as_deref(), &write_graph(&outcome.graph))?;
            let log_text = to_json(&outcome.log);
            match sidecar(common.out.as_deref(), log, ".log.json") {
                Some(p) => emit(Some(&p), &log_text),
                None => {
                    eprint!("{log_text}");
                    Ok(())
                }
            }
        }
        Command::Eval { graph, net, truth, common } => {
            let learned = as_cpdag(read_graph(graph)?)?;
            let truth = match (net, truth) {
                (Some(net), _) => dag_to_cpdag(read_network(net)?.graph())?,
                (None, Some(t)) => as_cpdag(read_graph(t)?)?,
                (None, None) => return Err(Failure::Usage("eval needs --net or --truth".into())),
            };
            emit(common.out.as_deref(), &to_json(&compare_cpdags(&learned, &truth)?))
        }
        Command::Cliques { graph, common } => {
            let cliques = find_3_cliques(&read_graph(graph)?);
            let mut text = format!("{}\n", cliques.len());
            for [a, b, c] in &cliques {
                text += &format!("{a} {b} {c}\n");
            }
            emit(common.out.as_deref(), &text)
        }
        Command::Bench { config, jobs, common } => {
            let text =
                std::fs::read_to_string(&config).map_err(|e| Failure::Parse(format!("{}: {e}", config.display())))?;
            let mut cfg: BenchConfig = serde_json::from_str(&text).map_err(|e| Failure::Parse(e.to_string()))?;
            if common.seed != 0 {
                cfg.run_seed = common.seed;
            }
            let results = run_bench(&cfg, jobs)?;
            emit(common.out.as_deref().or(cfg.output.as_deref()), &to_json_lines(&results))
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            let (code, kind, msg) = match f {
                Failure::Usage(m) => (2, "usage", m),
                Failure::Parse(m) => (3, "input", m),
                Failure::Internal(m) => (4, "internal", m),
            };
            eprintln!("error ({kind}): {msg}");
            ExitCode::from(code)
        }
    }
}
