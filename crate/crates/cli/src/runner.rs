//! Experiment execution: fan runs out across seeds, then write
//! deterministic CSV result tables and JSON summaries.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use lles_core::tasks::{
    run_binary_classification, run_ground_state, run_multiclass, run_noise_bell, BinaryTask,
    GroundStateTask, Method, MulticlassTask, TrialRecord,
};

use crate::config::{Experiment, RunConfig};
use crate::error::{CliError, Result};
use crate::summary::summarize;

/// Fixed CSV column order for every trial experiment.
pub const CSV_COLUMNS: [&str; 13] = [
    "experiment",
    "method",
    "n_qubits",
    "L",
    "T",
    "lr",
    "sigma",
    "noise_lambda",
    "seed",
    "epoch",
    "cost",
    "accuracy",
    "circuit_executions",
];

/// One CSV row: the trial record flattened together with the
/// identifiers of the configuration that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub experiment: Experiment,
    pub method: Method,
    pub n_qubits: usize,
    pub layers: usize,
    pub t_steps: usize,
    pub lr: f64,
    pub sigma: Option<f64>,
    pub noise_lambda: f64,
    pub seed: u64,
    pub epoch: usize,
    pub cost: f64,
    pub accuracy: Option<f64>,
    pub circuit_executions: u64,
}

impl ResultRow {
    fn from_record(cfg: &RunConfig, rec: &TrialRecord) -> Self {
        ResultRow {
            experiment: cfg.experiment,
            method: cfg.method,
            n_qubits: cfg.n_qubits,
            layers: cfg.layers,
            t_steps: cfg.t_steps,
            lr: cfg.lr,
            sigma: cfg.sigma,
            noise_lambda: cfg.noise_lambda,
            seed: rec.seed,
            epoch: rec.epoch,
            cost: rec.cost,
            accuracy: rec.accuracy,
            circuit_executions: rec.circuit_executions,
        }
    }

    /// Marker row recorded when a run fails after partial progress.
    fn failure_marker(cfg: &RunConfig, seed: u64) -> Self {
        ResultRow {
            experiment: cfg.experiment,
            method: cfg.method,
            n_qubits: cfg.n_qubits,
            layers: cfg.layers,
            t_steps: cfg.t_steps,
            lr: cfg.lr,
            sigma: cfg.sigma,
            noise_lambda: cfg.noise_lambda,
            seed,
            epoch: 0,
            cost: f64::NAN,
            accuracy: None,
            circuit_executions: 0,
        }
    }

    fn csv_record(&self) -> Vec<String> {
        vec![
            self.experiment.as_str().to_string(),
            self.method.as_str().to_string(),
            self.n_qubits.to_string(),
            self.layers.to_string(),
            self.t_steps.to_string(),
            self.lr.to_string(),
            self.sigma.map(|s| s.to_string()).unwrap_or_default(),
            self.noise_lambda.to_string(),
            self.seed.to_string(),
            self.epoch.to_string(),
            self.cost.to_string(),
            self.accuracy.map(|a| a.to_string()).unwrap_or_default(),
            self.circuit_executions.to_string(),
        ]
    }
}

fn run_one(cfg: &RunConfig, seed: u64) -> Result<Vec<TrialRecord>> {
    match cfg.experiment {
        Experiment::GroundState => Ok(run_ground_state(&GroundStateTask {
            n_qubits: cfg.n_qubits,
            layers: cfg.layers,
            noise_lambda: cfg.noise_lambda,
            method: cfg.method,
            lr: cfg.lr,
            sigma: cfg.sigma,
            t_steps: cfg.t_steps,
            epochs: cfg.epochs,
            seed,
        })?),
        Experiment::Binary => Ok(run_binary_classification(&BinaryTask {
            n_qubits: cfg.n_qubits,
            method: cfg.method,
            lr: cfg.lr,
            sigma: cfg.sigma,
            t_steps: cfg.t_steps,
            epochs: cfg.epochs,
            seed,
            n_train: cfg.n_train,
            n_test: cfg.n_test,
            batch_size: cfg.batch_size,
        })?),
        Experiment::Mnist => {
            let files = cfg
                .mnist
                .as_ref()
                .ok_or_else(|| CliError::Config("mnist data files missing".into()))?;
            Ok(run_multiclass(&MulticlassTask {
                train_images: files.train_images.clone(),
                train_labels: files.train_labels.clone(),
                test_images: files.test_images.clone(),
                test_labels: files.test_labels.clone(),
                per_class_train: cfg.per_class_train,
                per_class_test: cfg.per_class_test,
                method: cfg.method,
                lr: cfg.lr,
                sigma: cfg.sigma,
                t_steps: cfg.t_steps,
                epochs: cfg.epochs,
                seed,
                batch_size: cfg.batch_size,
            })?)
        }
        Experiment::BellNoise => Err(CliError::Config(
            "bell_noise has no per-seed trials".into(),
        )),
    }
}

fn write_csv(path: &Path, rows: &[ResultRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(CSV_COLUMNS)?;
    for row in rows {
        w.write_record(row.csv_record())?;
    }
    w.flush()?;
    Ok(())
}

fn write_bell_csv(path: &Path, lambdas: &[f64]) -> Result<()> {
    let rows = run_noise_bell(lambdas, None)?;
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["lambda", "p00", "p01", "p10", "p11"])?;
    for r in rows {
        w.write_record([
            r.lambda.to_string(),
            r.probs[0].to_string(),
            r.probs[1].to_string(),
            r.probs[2].to_string(),
            r.probs[3].to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Run every config, writing one CSV per experiment plus a JSON
/// summary. Returns the written paths. On a run failure the successful
/// rows and a failure marker are still flushed before the error.
pub fn execute(configs: &[RunConfig]) -> Result<Vec<PathBuf>> {
    if configs.is_empty() {
        return Err(CliError::Config("no runs configured".into()));
    }
    for cfg in configs {
        cfg.validate()?;
    }

    // Group configs per (output_dir, experiment) file target.
    let mut groups: BTreeMap<(PathBuf, &'static str), Vec<&RunConfig>> = BTreeMap::new();
    for cfg in configs {
        groups
            .entry((cfg.output_dir.clone(), cfg.experiment.as_str()))
            .or_default()
            .push(cfg);
    }

    let mut written = Vec::new();
    let mut failure: Option<CliError> = None;
    for ((dir, experiment), group) in groups {
        std::fs::create_dir_all(&dir)?;
        let csv_path = dir.join(format!("{experiment}.csv"));

        if group[0].experiment == Experiment::BellNoise {
            let mut lambdas: Vec<f64> = group.iter().flat_map(|c| c.lambdas.clone()).collect();
            lambdas.sort_by(f64::total_cmp);
            lambdas.dedup();
            write_bell_csv(&csv_path, &lambdas)?;
            written.push(csv_path);
            continue;
        }

        let jobs: Vec<(&RunConfig, u64)> = group
            .iter()
            .flat_map(|cfg| cfg.seeds.iter().map(move |&s| (*cfg, s)))
            .collect();
        let outcomes: Vec<(usize, Result<Vec<TrialRecord>>)> = jobs
            .par_iter()
            .enumerate()
            .map(|(i, (cfg, seed))| (i, run_one(cfg, *seed)))
            .collect();

        let mut rows = Vec::new();
        for (i, outcome) in outcomes {
            let (cfg, seed) = jobs[i];
            match outcome {
                Ok(records) => {
                    rows.extend(records.iter().map(|r| ResultRow::from_record(cfg, r)))
                }
                Err(e) => {
                    rows.push(ResultRow::failure_marker(cfg, seed));
                    failure.get_or_insert(e);
                }
            }
        }
        rows.sort_by(|a, b| {
            (a.method.as_str(), a.n_qubits, a.layers, a.t_steps)
                .cmp(&(b.method.as_str(), b.n_qubits, b.layers, b.t_steps))
                .then(a.lr.total_cmp(&b.lr))
                .then(
                    a.sigma
                        .unwrap_or(f64::NEG_INFINITY)
                        .total_cmp(&b.sigma.unwrap_or(f64::NEG_INFINITY)),
                )
                .then(a.noise_lambda.total_cmp(&b.noise_lambda))
                .then(a.seed.cmp(&b.seed))
                .then(a.epoch.cmp(&b.epoch))
        });
        write_csv(&csv_path, &rows)?;
        written.push(csv_path.clone());

        let summary = summarize(&csv_path)?;
        let summary_path = dir.join(format!("{experiment}_summary.json"));
        std::fs::write(&summary_path, serde_json::to_string_pretty(&summary)? )?;
        written.push(summary_path);
    }

    match failure {
        Some(e) => Err(e),
        None => Ok(written),
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Run(e.to_string())
    }
}
