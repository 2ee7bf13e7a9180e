use clap::Parser;
use std::path::PathBuf;
use std::process::ExitCode;
use torsionlab::cli::{run, CommandRegistry, JobSpec};
use torsionlab::numlin::DEFAULT_RANK_TOL;

#[derive(Parser, Debug)]
#[command(name = "torsionlab", version, about = "Twisted torsion of split complexes and checks of its gluing identities")]
struct Args {
    /// One of the commands listed below.
    command: String,
    /// Input JSON document; may be repeated.
    #[arg(long = "input", short = 'i')]
    inputs: Vec<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Identity tolerance; each command has its own default.
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long = "rank-tol", default_value_t = DEFAULT_RANK_TOL)]
    rank_tol: f64,
    #[arg(long, short = 'o', default_value = "torsionlab-report.json")]
    out: PathBuf,
}

fn command_list(registry: &CommandRegistry) -> String {
    let mut s = String::from("Commands:\n");
    for c in registry.iter() {
        s.push_str(&format!("  {:<14} {}\n", c.name(), c.about()));
    }
    s.push_str("\nTORSIONLAB_THREADS caps the worker pool.");
    s
}

fn main() -> ExitCode {
    let registry = CommandRegistry::builtin();
    let cmd = <Args as clap::CommandFactory>::command().after_help(command_list(&registry));
    let args = match cmd.try_get_matches().and_then(|m| <Args as clap::FromArgMatches>::from_arg_matches(&m)) {
        Ok(a) => a,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    if let Ok(v) = std::env::var("TORSIONLAB_THREADS") {
        match v.parse::<usize>() {
            Ok(n) if n > 0 => {
                let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
            }
            _ => {
                eprintln!("torsionlab: TORSIONLAB_THREADS must be a positive integer, got {v:?}");
                return ExitCode::from(2);
            }
        }
    }
    let job = JobSpec { command: args.command, inputs: args.inputs, seed: args.seed, tol: args.tol, rank_tol: args.rank_tol, out: args.out };
    ExitCode::from(run(&job, &registry) as u8)
}
