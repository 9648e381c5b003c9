use std::collections::HashMap;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use duality_lab::error::{EXIT_CONFIG, EXIT_PASS};
use duality_lab::{registry, run_all, validate_config, RunRequest};

#[derive(Parser)]
#[command(name = "duality-lab", version, about = "Runs robust duality experiments and writes CSV reports")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run experiments; the i-th id is paired with the i-th config.
    Run {
        #[arg(required = true)]
        ids: Vec<String>,
        #[arg(long = "config", required = true)]
        configs: Vec<PathBuf>,
        /// Overrides the seed in every config.
        #[arg(long)]
        seed: Option<u64>,
        /// Output root; each experiment writes to a subdirectory.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Run the experiments concurrently.
        #[arg(long)]
        parallel: bool,
    },
    /// List registered experiments.
    List,
    /// Parse a config and load its inputs without running it.
    ValidateConfig { path: PathBuf },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    ExitCode::from(match cli.command {
        Command::List => {
            for e in registry::registry() {
                println!("{}\t{}", e.id, e.description);
                println!("\tfields: {}", e.fields.join(", "));
            }
            EXIT_PASS
        }
        Command::ValidateConfig { path } => match validate_config(&path) {
            Ok(cfg) => {
                println!("{}: ok ({}, hash {})", path.display(), cfg.config.experiment, cfg.hash);
                EXIT_PASS
            }
            Err(e) => {
                eprintln!("error: {e}");
                e.exit_code()
            }
        },
        Command::Run {
            ids,
            configs,
            seed,
            out,
            parallel,
        } => {
            if ids.len() != configs.len() {
                eprintln!("error: {} experiment ids but {} configs", ids.len(), configs.len());
                return ExitCode::from(EXIT_CONFIG);
            }
            let mut seen: HashMap<&str, usize> = HashMap::new();
            let requests: Vec<RunRequest> = ids
                .iter()
                .zip(&configs)
                .map(|(id, config)| {
                    let n = seen.entry(id).or_default();
                    let subdir = (*n > 0).then(|| format!("{id}-{n}"));
                    *n += 1;
                    RunRequest {
                        id: id.clone(),
                        config: config.clone(),
                        seed,
                        out: out.clone(),
                        subdir,
                    }
                })
                .collect();
            let mut code = EXIT_PASS;
            for (req, result) in requests.iter().zip(run_all(&requests, parallel)) {
                let c = match result {
                    Ok(o) => {
                        let failed = o.rows.iter().filter(|r| !r.passed).count();
                        println!(
                            "{}: {} ({} rows, {failed} failed) -> {}",
                            o.id,
                            if failed == 0 { "PASS" } else { "FAIL" },
                            o.rows.len(),
                            o.csv.display()
                        );
                        for r in o.rows.iter().filter(|r| !r.passed) {
                            println!("  failed {} [{}]: residual {:e}, tolerance {:e}", r.check, r.case, r.residual, r.tolerance);
                        }
                        o.exit_code()
                    }
                    Err(e) => {
                        eprintln!("{}: error: {e}", req.id);
                        e.exit_code()
                    }
                };
                code = code.max(c);
            }
            code
        }
    })
}
