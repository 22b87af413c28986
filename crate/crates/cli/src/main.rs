//! `densilab`: run density classification experiments from JSON configs.

mod commands;
mod config;

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use densilab::engine::Kernel;

use commands::{CliError, DiagramArgs, RunArgs, SuiteArgs};

#[derive(Debug, Parser)]
#[command(name = "densilab", version, about = "Density classification experiments on rings, tori and trees")]
struct Cli {
    /// Worker threads for replicas (all cores by default).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run the experiment described by a JSON config.
    Run {
        config: PathBuf,
        /// Master seed; beats DENSILAB_SEED, which beats the config.
        #[arg(long, env = "DENSILAB_SEED")]
        seed: Option<u64>,
        /// Samples per point, overriding the config.
        #[arg(long)]
        samples: Option<u64>,
        /// Output directory, overriding the config.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write a ring space-time diagram as plain PBM.
    Diagram {
        #[arg(long)]
        rule: String,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 0.5)]
        p: f64,
        #[arg(long, default_value_t = 100)]
        steps: usize,
        #[arg(long, env = "DENSILAB_SEED", default_value_t = 0)]
        seed: u64,
        /// Rule parameter as key=value, repeatable.
        #[arg(long = "param", value_parser = parse_param)]
        params: Vec<(String, f64)>,
        #[arg(long, value_enum, default_value_t = KernelArg::Auto)]
        kernel: KernelArg,
        /// PBM file; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the invariance checks and print one ledger line per check.
    Suite {
        /// Rule table used wherever the checks need traffic.
        #[arg(long, default_value_t = 184)]
        traf_code: u8,
        /// Only the checks attached to this rule.
        #[arg(long)]
        rule: Option<String>,
        #[arg(long, env = "DENSILAB_SEED", default_value_t = 0)]
        seed: u64,
        /// Also write the ledger here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Copy, clap::ValueEnum)]
enum KernelArg {
    Auto,
    Dense,
    Packed,
    Sparse,
}

impl From<KernelArg> for Kernel {
    fn from(k: KernelArg) -> Self {
        match k {
            KernelArg::Auto => Kernel::Auto,
            KernelArg::Dense => Kernel::Dense,
            KernelArg::Packed => Kernel::Packed,
            KernelArg::Sparse => Kernel::Sparse,
        }
    }
}

fn parse_param(s: &str) -> Result<(String, f64), String> {
    let (k, v) = s.split_once('=').ok_or_else(|| format!("expected key=value, got {s:?}"))?;
    let v = v.trim().parse().map_err(|e| format!("{k}: {e}"))?;
    Ok((k.trim().to_string(), v))
}

fn execute(cli: Cli) -> Result<(), CliError> {
    if let Some(jobs) = cli.jobs {
        if jobs == 0 {
            return Err(CliError::Validation("--jobs: must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .map_err(|e| CliError::Invariant(e.to_string()))?;
    }
    match cli.command {
        Command::Run {
            config,
            seed,
            samples,
            out,
        } => {
            for path in commands::run(&RunArgs {
                config,
                seed,
                samples,
                out,
            })? {
                println!("wrote {}", path.display());
            }
        }
        Command::Diagram {
            rule,
            n,
            p,
            steps,
            seed,
            params,
            kernel,
            out,
        } => {
            let args = DiagramArgs {
                rule,
                params: params.into_iter().collect::<BTreeMap<_, _>>(),
                n,
                p,
                steps,
                seed,
                kernel: kernel.into(),
                out,
            };
            if let Some(pbm) = commands::diagram(&args)? {
                print!("{pbm}");
            }
        }
        Command::Suite {
            traf_code,
            rule,
            seed,
            out,
        } => {
            let report = commands::suite(&SuiteArgs {
                traf_code,
                rule,
                seed,
                out,
            })?;
            print!("{}", report.ledger());
            if !report.passed() {
                let failed: Vec<&str> = report.failures().map(|c| c.name).collect();
                return Err(CliError::Invariant(format!("failed checks: {}", failed.join(", "))));
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("densilab: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn cli_definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn params_parse() {
        assert_eq!(parse_param("alpha=0.25"), Ok(("alpha".into(), 0.25)));
        assert!(parse_param("alpha").is_err());
        assert!(parse_param("alpha=x").is_err());
    }
}
