//! Command-line front end for the GRAD / LL / LLES experiment runner.

pub mod config;
pub mod error;
pub mod runner;
pub mod summary;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use config::{parse_angle, parse_config_file, ConfigDraft, Experiment, MnistFiles, RunConfig};
use error::{CliError, Result};
use lles_core::tasks::Method;

#[derive(Debug, Parser)]
#[command(
    name = "lles",
    about = "Compare GRAD, LL, and LLES optimizers on simulated variational quantum circuits",
    args_conflicts_with_subcommands = true
)]
pub struct Cli {
    #[command(subcommand)]
    command: Option<Command>,
    #[command(flatten)]
    run: RunArgs,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Recompute the JSON summary for an existing result CSV.
    Summarize {
        /// Path to a CSV written by a previous run.
        csv: PathBuf,
    },
}

#[derive(Debug, Args, Default)]
struct RunArgs {
    /// JSON run configuration; grid fields may hold lists.
    #[arg(long)]
    config: Option<PathBuf>,
    /// ground_state, binary, mnist, or bell_noise.
    #[arg(long)]
    experiment: Option<String>,
    /// GRAD, LL, or LLES.
    #[arg(long)]
    method: Option<String>,
    #[arg(long)]
    n_qubits: Option<usize>,
    /// Ansatz depth L.
    #[arg(long)]
    layers: Option<usize>,
    /// Meta-optimizer interaction count T.
    #[arg(long, short = 'T')]
    t_steps: Option<usize>,
    #[arg(long)]
    epochs: Option<usize>,
    /// Learning rate(s), comma separated for a grid.
    #[arg(long)]
    lr: Option<String>,
    /// ES smoothing width(s); accepts "pi/N" literals, comma separated.
    #[arg(long)]
    sigma: Option<String>,
    /// Channel strength(s) for noisy runs, comma separated.
    #[arg(long)]
    noise_lambda: Option<String>,
    /// Seeds, comma separated. Defaults to 0,1,2,3,4.
    #[arg(long)]
    seeds: Option<String>,
    /// Output directory; defaults to $LLES_OUTPUT_DIR or ./results.
    #[arg(long)]
    output_dir: Option<PathBuf>,
    /// Lambda sweep for bell_noise, comma separated.
    #[arg(long)]
    lambdas: Option<String>,
    #[arg(long)]
    train_images: Option<PathBuf>,
    #[arg(long)]
    train_labels: Option<PathBuf>,
    #[arg(long)]
    test_images: Option<PathBuf>,
    #[arg(long)]
    test_labels: Option<PathBuf>,
    #[arg(long)]
    per_class_train: Option<usize>,
    #[arg(long)]
    per_class_test: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    /// Synthetic binary dataset sizes.
    #[arg(long)]
    n_train: Option<usize>,
    #[arg(long)]
    n_test: Option<usize>,
}

fn split_list<T, F: Fn(&str) -> Result<T>>(s: &str, parse: F) -> Result<Vec<T>> {
    s.split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(parse)
        .collect()
}

impl RunArgs {
    fn into_configs(self) -> Result<Vec<RunConfig>> {
        if let Some(path) = &self.config {
            return parse_config_file(path);
        }
        let mnist = match (
            self.train_images,
            self.train_labels,
            self.test_images,
            self.test_labels,
        ) {
            (Some(a), Some(b), Some(c), Some(d)) => Some(MnistFiles {
                train_images: a,
                train_labels: b,
                test_images: c,
                test_labels: d,
            }),
            (None, None, None, None) => None,
            _ => {
                return Err(CliError::Config(
                    "all four MNIST file flags must be given together".into(),
                ))
            }
        };
        let draft = ConfigDraft {
            experiment: self
                .experiment
                .as_deref()
                .map(str::parse::<Experiment>)
                .transpose()?,
            method: self
                .method
                .as_deref()
                .map(|m| {
                    m.parse::<Method>()
                        .map_err(|e| CliError::Config(e.to_string()))
                })
                .transpose()?,
            n_qubits: self.n_qubits,
            layers: self.layers,
            t_steps: self.t_steps,
            epochs: self.epochs,
            lrs: self
                .lr
                .as_deref()
                .map(|s| split_list(s, parse_angle))
                .transpose()?
                .unwrap_or_default(),
            sigmas: self
                .sigma
                .as_deref()
                .map(|s| split_list(s, parse_angle))
                .transpose()?
                .unwrap_or_default(),
            noise_lambdas: self
                .noise_lambda
                .as_deref()
                .map(|s| split_list(s, parse_angle))
                .transpose()?
                .unwrap_or_default(),
            seeds: self
                .seeds
                .as_deref()
                .map(|s| {
                    split_list(s, |t| {
                        t.parse::<u64>()
                            .map_err(|_| CliError::Config(format!("bad seed '{t}'")))
                    })
                })
                .transpose()?,
            output_dir: self.output_dir,
            lambdas: self
                .lambdas
                .as_deref()
                .map(|s| split_list(s, parse_angle))
                .transpose()?
                .unwrap_or_default(),
            mnist,
            per_class_train: self.per_class_train,
            per_class_test: self.per_class_test,
            batch_size: self.batch_size,
            n_train: self.n_train,
            n_test: self.n_test,
        };
        draft.expand()
    }
}

/// Parse argv into the concrete run list (grids expanded).
pub fn parse_config_from_args<I, S>(args: I) -> Result<Vec<RunConfig>>
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = Cli::try_parse_from(args).map_err(|e| CliError::Config(e.to_string()))?;
    if cli.command.is_some() {
        return Err(CliError::Config("not a run invocation".into()));
    }
    cli.run.into_configs()
}

/// Full CLI entry point; returns the process exit code.
pub fn run_main<I, S>(args: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            // Help/version requests print and exit cleanly.
            if e.use_stderr() {
                eprint!("{e}");
                return 2;
            }
            print!("{e}");
            return 0;
        }
    };
    let outcome: Result<()> = (|| {
        match cli.command {
            Some(Command::Summarize { csv }) => {
                let summary = summary::summarize(&csv)?;
                println!(
                    "{}",
                    serde_json::to_string_pretty(&summary)
                        .map_err(|e| CliError::Run(e.to_string()))?
                );
            }
            None => {
                let configs = cli.run.into_configs()?;
                let written = runner::execute(&configs)?;
                for path in written {
                    println!("wrote {}", path.display());
                }
            }
        }
        Ok(())
    })();
    match outcome {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flag_invocation_maps_to_one_config() {
        let configs = parse_config_from_args([
            "lles",
            "--experiment",
            "ground_state",
            "--method",
            "LLES",
            "--n-qubits",
            "4",
            "--layers",
            "4",
            "--sigma",
            "pi/24",
            "--lr",
            "0.1",
        ])
        .unwrap();
        assert_eq!(configs.len(), 1);
        let c = &configs[0];
        assert_eq!(c.experiment, Experiment::GroundState);
        assert_eq!(c.method, Method::Lles);
        assert_eq!(c.n_qubits, 4);
        assert_eq!(c.layers, 4);
        assert_eq!(c.t_steps, 2);
        assert_eq!(c.seeds, vec![0, 1, 2, 3, 4]);
        assert!((c.sigma.unwrap() - std::f64::consts::PI / 24.0).abs() < 1e-15);
    }

    #[test]
    fn comma_lists_expand_grids() {
        let configs = parse_config_from_args([
            "lles",
            "--experiment",
            "ground_state",
            "--method",
            "LLES",
            "--lr",
            "0.1,0.01,0.001",
            "--sigma",
            "pi/6,pi/12,pi/24",
        ])
        .unwrap();
        assert_eq!(configs.len(), 9);
    }

    #[test]
    fn config_errors_exit_with_two() {
        let code = run_main([
            "lles",
            "--experiment",
            "ground_state",
            "--method",
            "LLES",
            "--lr",
            "0.1",
        ]);
        assert_eq!(code, 2, "LLES without sigma is a config error");

        let code = run_main(["lles", "--experiment", "warp_drive"]);
        assert_eq!(code, 2);
    }

    #[test]
    fn unknown_flags_are_config_errors() {
        assert!(parse_config_from_args(["lles", "--learning-rate", "1"]).is_err());
    }
}
