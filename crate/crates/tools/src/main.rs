use std::io;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use mpcc_tools::bench::{self, BenchArgs};
use mpcc_tools::check::{run_checks, standard_checks};
use mpcc_tools::classify::{self, ClassifyArgs};
use mpcc_tools::config::{parse_scheme, RunConfig};
use mpcc_tools::format::{parse_indices, parse_list};
use mpcc_tools::{solve, CliError, CliResult};

#[derive(Parser)]
#[command(name = "mpcc", version, about = "Solve and audit programs with complementarity constraints")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the homotopy for one problem and scheme.
    Solve {
        /// key = value file; flags override its entries.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        problem: Option<String>,
        /// ba, mlf or reg
        #[arg(long)]
        scheme: Option<String>,
        #[arg(long)]
        eps0: Option<f64>,
        #[arg(long)]
        kappa: Option<f64>,
        #[arg(long)]
        eps_tol: Option<f64>,
        /// Inner KKT tolerance.
        #[arg(long)]
        tol: Option<f64>,
        #[arg(long)]
        max_iter: Option<usize>,
        /// Comma-separated starting point.
        #[arg(long, allow_hyphen_values = true)]
        z0: Option<String>,
        #[arg(long)]
        activity_tol: Option<f64>,
        /// Trace CSV output.
        #[arg(long)]
        trace: Option<PathBuf>,
        /// Summary copy written next to stdout.
        #[arg(long)]
        summary: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Audit the stationarity of a point.
    Classify {
        #[arg(long)]
        problem: String,
        /// Comma-separated point.
        #[arg(long, allow_hyphen_values = true)]
        point: String,
        #[arg(long, default_value_t = 1e-9)]
        tol: f64,
        /// Comma-separated 1-based pairs for the reduced B-check.
        #[arg(long)]
        omega: Option<String>,
        /// Random tangent directions to sample (0 disables).
        #[arg(long, default_value_t = 2000)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// property,value CSV of the verdicts.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Replicate a result table.
    Bench {
        #[arg(long)]
        table: u8,
        /// Run the table on another problem, e.g. a variant.
        #[arg(long)]
        problem: Option<String>,
        /// Restrict to schemes; repeatable.
        #[arg(long)]
        scheme: Vec<String>,
        #[arg(long)]
        csv: Option<PathBuf>,
        #[arg(long)]
        markdown: Option<PathBuf>,
    },
    /// Run derivative checks, oracle cross-checks and golden reports.
    Check {
        /// Only checks whose name contains this string.
        #[arg(long)]
        filter: Option<String>,
        #[arg(long, default_value_t = 3)]
        seed: u64,
    },
    /// List the registered problems.
    List,
}

fn usage(e: String) -> CliError {
    CliError::Usage(e)
}

fn run(cli: Cli) -> CliResult<()> {
    let mut stdout = io::stdout().lock();
    match cli.command {
        Command::Solve {
            config,
            problem,
            scheme,
            eps0,
            kappa,
            eps_tol,
            tol,
            max_iter,
            z0,
            activity_tol,
            trace,
            summary,
            seed,
        } => {
            let mut cfg = RunConfig::default();
            if let Some(path) = config {
                let text = std::fs::read_to_string(&path)
                    .map_err(|e| usage(format!("cannot read {}: {e}", path.display())))?;
                cfg.merge_text(&text)?;
            }
            if let Some(p) = problem {
                cfg.problem = p;
            }
            if let Some(s) = scheme {
                cfg.scheme = parse_scheme(&s)?;
            }
            cfg.eps0 = eps0.unwrap_or(cfg.eps0);
            cfg.kappa = kappa.unwrap_or(cfg.kappa);
            cfg.eps_tol = eps_tol.unwrap_or(cfg.eps_tol);
            cfg.tol = tol.unwrap_or(cfg.tol);
            cfg.max_iter = max_iter.unwrap_or(cfg.max_iter);
            if let Some(z) = z0 {
                cfg.z0 = Some(parse_list(&z).map_err(|e| usage(format!("--z0: {e}")))?);
            }
            cfg.activity_tol = activity_tol.or(cfg.activity_tol);
            cfg.trace = trace.or(cfg.trace);
            cfg.summary = summary.or(cfg.summary);
            cfg.seed = seed.unwrap_or(cfg.seed);
            solve::run(&cfg, &mut stdout)
        }
        Command::Classify { problem, point, tol, omega, samples, seed, out } => {
            let args = ClassifyArgs {
                problem,
                point: parse_list(&point).map_err(|e| usage(format!("--point: {e}")))?,
                tol,
                omega: omega
                    .map(|s| parse_indices(&s))
                    .transpose()
                    .map_err(|e| usage(format!("--omega: {e}")))?,
                samples,
                seed,
                out,
            };
            classify::run(&args, &mut stdout)
        }
        Command::Bench { table, problem, scheme, csv, markdown } => {
            let schemes = scheme.iter().map(|s| parse_scheme(s)).collect::<CliResult<Vec<_>>>()?;
            bench::run(&BenchArgs { table, problem, schemes, csv, markdown }, &mut stdout)
        }
        Command::Check { filter, seed } => {
            let results = run_checks(standard_checks(seed), filter.as_deref(), &mut stdout)?;
            match results.iter().filter(|r| !r.passed).count() {
                0 => Ok(()),
                n => Err(CliError::Failure(format!("{n} checks failed"))),
            }
        }
        Command::List => {
            use std::io::Write;
            for e in mpcc_core::problems::registry() {
                writeln!(stdout, "{}", mpcc_core::problems::describe(&e))?;
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
