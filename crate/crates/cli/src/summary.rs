//! Per-epoch statistics across seeds, matching the mean line and
//! min/max band of the result plots, plus per-method execution totals.

use std::collections::BTreeMap;
use std::path::Path;

use serde::Serialize;

use crate::error::{CliError, Result};
use crate::runner::CSV_COLUMNS;

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct EpochStats {
    pub epoch: usize,
    pub cost_mean: f64,
    pub cost_min: f64,
    pub cost_max: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub accuracy_mean: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub accuracy_min: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub accuracy_max: Option<f64>,
    pub n_seeds: usize,
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct GroupSummary {
    pub experiment: String,
    pub method: String,
    pub n_qubits: u64,
    #[serde(rename = "L")]
    pub layers: u64,
    #[serde(rename = "T")]
    pub t_steps: u64,
    pub lr: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sigma: Option<f64>,
    pub noise_lambda: f64,
    /// Sum over seeds of each trial's final execution count.
    pub total_circuit_executions: u64,
    pub epochs: Vec<EpochStats>,
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct Summary {
    pub groups: Vec<GroupSummary>,
    /// Execution totals keyed by method, for cost-accounting tables.
    pub method_totals: BTreeMap<String, u64>,
}

struct ParsedRow {
    key: GroupKey,
    seed: u64,
    epoch: usize,
    cost: f64,
    accuracy: Option<f64>,
    circuit_executions: u64,
}

#[derive(Clone, PartialEq)]
struct GroupKey {
    experiment: String,
    method: String,
    n_qubits: u64,
    layers: u64,
    t_steps: u64,
    lr: f64,
    sigma: Option<f64>,
    noise_lambda: f64,
}

impl GroupKey {
    fn ord_key(&self) -> (String, String, u64, u64, u64, u64, u64, u64) {
        (
            self.experiment.clone(),
            self.method.clone(),
            self.n_qubits,
            self.layers,
            self.t_steps,
            self.lr.to_bits(),
            self.sigma.unwrap_or(f64::NEG_INFINITY).to_bits(),
            self.noise_lambda.to_bits(),
        )
    }
}

fn field<'a>(record: &'a csv::StringRecord, idx: usize) -> Result<&'a str> {
    record
        .get(idx)
        .ok_or_else(|| CliError::Run(format!("CSV row missing column {}", CSV_COLUMNS[idx])))
}

fn parse_row(record: &csv::StringRecord) -> Result<ParsedRow> {
    let num = |idx: usize| -> Result<f64> {
        field(record, idx)?
            .parse()
            .map_err(|_| CliError::Run(format!("bad {} value", CSV_COLUMNS[idx])))
    };
    let int = |idx: usize| -> Result<u64> {
        field(record, idx)?
            .parse()
            .map_err(|_| CliError::Run(format!("bad {} value", CSV_COLUMNS[idx])))
    };
    let sigma_raw = field(record, 6)?;
    let accuracy_raw = field(record, 11)?;
    Ok(ParsedRow {
        key: GroupKey {
            experiment: field(record, 0)?.to_string(),
            method: field(record, 1)?.to_string(),
            n_qubits: int(2)?,
            layers: int(3)?,
            t_steps: int(4)?,
            lr: num(5)?,
            sigma: if sigma_raw.is_empty() {
                None
            } else {
                Some(num(6)?)
            },
            noise_lambda: num(7)?,
        },
        seed: int(8)?,
        epoch: int(9)? as usize,
        cost: num(10)?,
        accuracy: if accuracy_raw.is_empty() {
            None
        } else {
            Some(num(11)?)
        },
        circuit_executions: int(12)?,
    })
}

/// Summarize an execute()-written CSV. Failure marker rows (NaN cost)
/// are excluded from the statistics.
pub fn summarize(csv_path: &Path) -> Result<Summary> {
    let mut reader = csv::Reader::from_path(csv_path).map_err(|e| {
        CliError::Run(format!("cannot read {}: {e}", csv_path.display()))
    })?;
    let headers = reader.headers()?.clone();
    if headers.iter().ne(CSV_COLUMNS) {
        return Err(CliError::Run(format!(
            "{} does not have the expected result columns",
            csv_path.display()
        )));
    }

    let mut rows = Vec::new();
    for record in reader.records() {
        let row = parse_row(&record?)?;
        if row.cost.is_nan() {
            continue;
        }
        rows.push(row);
    }

    let mut grouped: BTreeMap<
        (String, String, u64, u64, u64, u64, u64, u64),
        (GroupKey, Vec<ParsedRow>),
    > = BTreeMap::new();
    for row in rows {
        grouped
            .entry(row.key.ord_key())
            .or_insert_with(|| (row.key.clone(), Vec::new()))
            .1
            .push(row);
    }

    let mut groups = Vec::new();
    let mut method_totals: BTreeMap<String, u64> = BTreeMap::new();
    for (_, (key, rows)) in grouped {
        let mut by_epoch: BTreeMap<usize, Vec<&ParsedRow>> = BTreeMap::new();
        let mut final_by_seed: BTreeMap<u64, u64> = BTreeMap::new();
        for row in &rows {
            by_epoch.entry(row.epoch).or_default().push(row);
            let e = final_by_seed.entry(row.seed).or_insert(0);
            *e = (*e).max(row.circuit_executions);
        }
        let total: u64 = final_by_seed.values().sum();
        *method_totals.entry(key.method.clone()).or_insert(0) += total;

        let epochs = by_epoch
            .into_iter()
            .map(|(epoch, rows)| {
                let costs: Vec<f64> = rows.iter().map(|r| r.cost).collect();
                let accs: Vec<f64> = rows.iter().filter_map(|r| r.accuracy).collect();
                let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
                let min = |v: &[f64]| v.iter().copied().fold(f64::INFINITY, f64::min);
                let max = |v: &[f64]| v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                EpochStats {
                    epoch,
                    cost_mean: mean(&costs),
                    cost_min: min(&costs),
                    cost_max: max(&costs),
                    accuracy_mean: (!accs.is_empty()).then(|| mean(&accs)),
                    accuracy_min: (!accs.is_empty()).then(|| min(&accs)),
                    accuracy_max: (!accs.is_empty()).then(|| max(&accs)),
                    n_seeds: rows.len(),
                }
            })
            .collect();

        groups.push(GroupSummary {
            experiment: key.experiment,
            method: key.method,
            n_qubits: key.n_qubits,
            layers: key.layers,
            t_steps: key.t_steps,
            lr: key.lr,
            sigma: key.sigma,
            noise_lambda: key.noise_lambda,
            total_circuit_executions: total,
            epochs,
        });
    }

    Ok(Summary {
        groups,
        method_totals,
    })
}
