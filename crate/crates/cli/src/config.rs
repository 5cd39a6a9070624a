//! Run configuration: flag/file parsing, "pi/N" angle literals, grid
//! expansion, and validation.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use lles_core::tasks::Method;

use crate::error::{CliError, Result};

/// Environment variable naming the default output directory.
pub const OUTPUT_DIR_ENV: &str = "LLES_OUTPUT_DIR";

pub const DEFAULT_SEEDS: [u64; 5] = [0, 1, 2, 3, 4];
pub const DEFAULT_T_STEPS: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Experiment {
    GroundState,
    Binary,
    Mnist,
    BellNoise,
}

impl Experiment {
    pub fn as_str(&self) -> &'static str {
        match self {
            Experiment::GroundState => "ground_state",
            Experiment::Binary => "binary",
            Experiment::Mnist => "mnist",
            Experiment::BellNoise => "bell_noise",
        }
    }

    pub fn default_epochs(&self) -> usize {
        match self {
            Experiment::GroundState => 200,
            Experiment::Binary | Experiment::Mnist => 50,
            Experiment::BellNoise => 1,
        }
    }
}

impl std::str::FromStr for Experiment {
    type Err = CliError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ground_state" => Ok(Experiment::GroundState),
            "binary" => Ok(Experiment::Binary),
            "mnist" => Ok(Experiment::Mnist),
            "bell_noise" => Ok(Experiment::BellNoise),
            other => Err(CliError::Config(format!(
                "unknown experiment '{other}' (expected ground_state, binary, mnist, or bell_noise)"
            ))),
        }
    }
}

/// Parse an angle literal: a plain float, `pi`, or `pi/N`.
pub fn parse_angle(s: &str) -> Result<f64> {
    let t = s.trim().to_ascii_lowercase();
    if let Ok(v) = t.parse::<f64>() {
        return Ok(v);
    }
    if t == "pi" {
        return Ok(std::f64::consts::PI);
    }
    if let Some(rest) = t.strip_prefix("pi/") {
        let d: f64 = rest
            .parse()
            .map_err(|_| CliError::Config(format!("bad angle literal '{s}'")))?;
        if d == 0.0 {
            return Err(CliError::Config("angle denominator must be nonzero".into()));
        }
        return Ok(std::f64::consts::PI / d);
    }
    Err(CliError::Config(format!(
        "bad angle literal '{s}' (expected a number, 'pi', or 'pi/N')"
    )))
}

/// MNIST data-file locations; only the mnist experiment uses them.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MnistFiles {
    pub train_images: PathBuf,
    pub train_labels: PathBuf,
    pub test_images: PathBuf,
    pub test_labels: PathBuf,
}

/// One fully resolved run: every grid field holds a single value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub experiment: Experiment,
    #[serde(with = "method_serde")]
    pub method: Method,
    pub n_qubits: usize,
    /// Ansatz depth L; fixed by the model for binary (8) and mnist (15).
    pub layers: usize,
    pub t_steps: usize,
    pub epochs: usize,
    pub lr: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma: Option<f64>,
    pub noise_lambda: f64,
    pub seeds: Vec<u64>,
    pub output_dir: PathBuf,
    /// Lambda sweep for the bell_noise experiment.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub lambdas: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mnist: Option<MnistFiles>,
    #[serde(default = "default_per_class_train")]
    pub per_class_train: usize,
    #[serde(default = "default_per_class_test")]
    pub per_class_test: usize,
    #[serde(default = "default_batch_size")]
    pub batch_size: usize,
    #[serde(default = "default_dataset_size")]
    pub n_train: usize,
    #[serde(default = "default_test_size")]
    pub n_test: usize,
}

fn default_per_class_train() -> usize {
    1000
}
fn default_per_class_test() -> usize {
    100
}
fn default_batch_size() -> usize {
    32
}
fn default_dataset_size() -> usize {
    100
}
fn default_test_size() -> usize {
    40
}

mod method_serde {
    use super::*;
    use serde::{Deserializer, Serializer};

    pub fn serialize<S: Serializer>(m: &Method, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(m.as_str())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(
        d: D,
    ) -> std::result::Result<Method, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

impl RunConfig {
    /// Serialize to the same JSON shape `parse_config_file` accepts, so
    /// that parsing the emitted form returns the identical config.
    pub fn emit(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        if self.lr <= 0.0 || !self.lr.is_finite() {
            return Err(CliError::Config(format!("lr must be positive, got {}", self.lr)));
        }
        match self.method {
            Method::Lles => match self.sigma {
                Some(s) if s > 0.0 && s.is_finite() => {}
                _ => return Err(CliError::Config("LLES requires a positive sigma".into())),
            },
            _ => {
                if self.sigma.is_some() {
                    return Err(CliError::Config(format!(
                        "sigma is only meaningful for LLES, not {}",
                        self.method.as_str()
                    )));
                }
            }
        }
        if self.method != Method::Grad && self.t_steps == 0 {
            return Err(CliError::Config("T must be >= 1".into()));
        }
        if !(0.0..=1.0).contains(&self.noise_lambda) {
            return Err(CliError::Config(format!(
                "noise_lambda must lie in [0, 1], got {}",
                self.noise_lambda
            )));
        }
        if self.seeds.is_empty() {
            return Err(CliError::Config("at least one seed is required".into()));
        }
        match self.experiment {
            Experiment::GroundState | Experiment::Binary => {
                if self.n_qubits == 0 || self.layers == 0 {
                    return Err(CliError::Config("n_qubits and layers must be >= 1".into()));
                }
            }
            Experiment::Mnist => {
                if self.mnist.is_none() {
                    return Err(CliError::Config(
                        "mnist requires --train-images/--train-labels/--test-images/--test-labels"
                            .into(),
                    ));
                }
            }
            Experiment::BellNoise => {
                if self.lambdas.is_empty() {
                    return Err(CliError::Config(
                        "bell_noise requires at least one lambda".into(),
                    ));
                }
                if self.lambdas.iter().any(|l| !(0.0..=1.0).contains(l)) {
                    return Err(CliError::Config("lambdas must lie in [0, 1]".into()));
                }
            }
        }
        Ok(())
    }
}

/// File form of a configuration: `lr`, `sigma`, and `noise_lambda` may
/// hold lists, expanded to a cross product of runs. Angles may be
/// written as "pi/N" strings.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    experiment: String,
    #[serde(default)]
    method: Option<String>,
    #[serde(default)]
    n_qubits: Option<usize>,
    #[serde(default)]
    layers: Option<usize>,
    #[serde(default)]
    t_steps: Option<usize>,
    #[serde(default)]
    epochs: Option<usize>,
    #[serde(default)]
    lr: Option<OneOrMany<serde_json::Value>>,
    #[serde(default)]
    sigma: Option<OneOrMany<serde_json::Value>>,
    #[serde(default)]
    noise_lambda: Option<OneOrMany<serde_json::Value>>,
    #[serde(default)]
    seeds: Option<Vec<u64>>,
    #[serde(default)]
    output_dir: Option<PathBuf>,
    #[serde(default)]
    lambdas: Option<Vec<f64>>,
    #[serde(default)]
    mnist: Option<MnistFiles>,
    #[serde(default)]
    per_class_train: Option<usize>,
    #[serde(default)]
    per_class_test: Option<usize>,
    #[serde(default)]
    batch_size: Option<usize>,
    #[serde(default)]
    n_train: Option<usize>,
    #[serde(default)]
    n_test: Option<usize>,
}

// Untagged variants are tried in order; `Many` must come first because
// a bare `serde_json::Value` also matches arrays.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
enum OneOrMany<T> {
    Many(Vec<T>),
    One(T),
}

impl<T: Clone> OneOrMany<T> {
    fn into_vec(self) -> Vec<T> {
        match self {
            OneOrMany::One(v) => vec![v],
            OneOrMany::Many(v) => v,
        }
    }
}

fn value_to_angle(v: &serde_json::Value, key: &str) -> Result<f64> {
    match v {
        serde_json::Value::Number(n) => n
            .as_f64()
            .ok_or_else(|| CliError::Config(format!("{key}: bad number {n}"))),
        serde_json::Value::String(s) => parse_angle(s),
        other => Err(CliError::Config(format!("{key}: expected number or string, got {other}"))),
    }
}

/// Values shared by the flag and file paths before grid expansion.
#[derive(Debug, Clone, Default)]
pub struct ConfigDraft {
    pub experiment: Option<Experiment>,
    pub method: Option<Method>,
    pub n_qubits: Option<usize>,
    pub layers: Option<usize>,
    pub t_steps: Option<usize>,
    pub epochs: Option<usize>,
    pub lrs: Vec<f64>,
    pub sigmas: Vec<f64>,
    pub noise_lambdas: Vec<f64>,
    pub seeds: Option<Vec<u64>>,
    pub output_dir: Option<PathBuf>,
    pub lambdas: Vec<f64>,
    pub mnist: Option<MnistFiles>,
    pub per_class_train: Option<usize>,
    pub per_class_test: Option<usize>,
    pub batch_size: Option<usize>,
    pub n_train: Option<usize>,
    pub n_test: Option<usize>,
}

pub fn default_output_dir() -> PathBuf {
    std::env::var_os(OUTPUT_DIR_ENV)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from("results"))
}

impl ConfigDraft {
    /// Expand grid fields into the cross product of concrete runs.
    pub fn expand(self) -> Result<Vec<RunConfig>> {
        let experiment = self
            .experiment
            .ok_or_else(|| CliError::Config("an experiment is required".into()))?;
        let method = self.method.unwrap_or(Method::Grad);
        let n_qubits = self.n_qubits.unwrap_or(match experiment {
            Experiment::Mnist => 10,
            Experiment::BellNoise => 2,
            _ => 4,
        });
        let layers = self.layers.unwrap_or(match experiment {
            Experiment::GroundState => 4,
            Experiment::Binary => 8,
            Experiment::Mnist => 15,
            Experiment::BellNoise => 1,
        });
        let layers = match experiment {
            // Fixed by the model regardless of the flag.
            Experiment::Binary => 8,
            Experiment::Mnist => 15,
            _ => layers,
        };
        let n_qubits = match experiment {
            Experiment::Mnist => 10,
            Experiment::BellNoise => 2,
            _ => n_qubits,
        };
        let lrs = if self.lrs.is_empty() { vec![0.1] } else { self.lrs };
        let sigmas: Vec<Option<f64>> = if method == Method::Lles {
            if self.sigmas.is_empty() {
                return Err(CliError::Config("LLES requires at least one sigma".into()));
            }
            self.sigmas.into_iter().map(Some).collect()
        } else {
            if !self.sigmas.is_empty() {
                return Err(CliError::Config(format!(
                    "sigma is only meaningful for LLES, not {}",
                    method.as_str()
                )));
            }
            vec![None]
        };
        let noise_lambdas = if self.noise_lambdas.is_empty() {
            vec![0.0]
        } else {
            self.noise_lambdas
        };
        let seeds = self.seeds.unwrap_or_else(|| DEFAULT_SEEDS.to_vec());
        let output_dir = self.output_dir.unwrap_or_else(default_output_dir);

        let mut configs = Vec::new();
        for &lr in &lrs {
            for &sigma in &sigmas {
                for &noise_lambda in &noise_lambdas {
                    let cfg = RunConfig {
                        experiment,
                        method,
                        n_qubits,
                        layers,
                        t_steps: self.t_steps.unwrap_or(DEFAULT_T_STEPS),
                        epochs: self.epochs.unwrap_or_else(|| experiment.default_epochs()),
                        lr,
                        sigma,
                        noise_lambda,
                        seeds: seeds.clone(),
                        output_dir: output_dir.clone(),
                        lambdas: self.lambdas.clone(),
                        mnist: self.mnist.clone(),
                        per_class_train: self.per_class_train.unwrap_or_else(default_per_class_train),
                        per_class_test: self.per_class_test.unwrap_or_else(default_per_class_test),
                        batch_size: self.batch_size.unwrap_or(match experiment {
                            Experiment::Binary => 10,
                            _ => default_batch_size(),
                        }),
                        n_train: self.n_train.unwrap_or_else(default_dataset_size),
                        n_test: self.n_test.unwrap_or_else(default_test_size),
                    };
                    cfg.validate()?;
                    configs.push(cfg);
                }
            }
        }
        Ok(configs)
    }
}

/// Parse a JSON config file into concrete runs (grids expanded).
pub fn parse_config_file(path: &Path) -> Result<Vec<RunConfig>> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    let raw: RawConfig = serde_json::from_str(&text)
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    let mut draft = ConfigDraft {
        experiment: Some(raw.experiment.parse()?),
        method: raw
            .method
            .map(|m| m.parse::<Method>().map_err(|e| CliError::Config(e.to_string())))
            .transpose()?,
        n_qubits: raw.n_qubits,
        layers: raw.layers,
        t_steps: raw.t_steps,
        epochs: raw.epochs,
        seeds: raw.seeds,
        output_dir: raw.output_dir,
        lambdas: raw.lambdas.unwrap_or_default(),
        mnist: raw.mnist,
        per_class_train: raw.per_class_train,
        per_class_test: raw.per_class_test,
        batch_size: raw.batch_size,
        n_train: raw.n_train,
        n_test: raw.n_test,
        ..Default::default()
    };
    if let Some(lr) = raw.lr {
        draft.lrs = lr
            .into_vec()
            .iter()
            .map(|v| value_to_angle(v, "lr"))
            .collect::<Result<_>>()?;
    }
    if let Some(sigma) = raw.sigma {
        draft.sigmas = sigma
            .into_vec()
            .iter()
            .map(|v| value_to_angle(v, "sigma"))
            .collect::<Result<_>>()?;
    }
    if let Some(nl) = raw.noise_lambda {
        draft.noise_lambdas = nl
            .into_vec()
            .iter()
            .map(|v| value_to_angle(v, "noise_lambda"))
            .collect::<Result<_>>()?;
    }
    draft.expand()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::io::Write;

    #[test]
    fn parses_pi_literals() {
        assert_abs_diff_eq!(parse_angle("pi").unwrap(), std::f64::consts::PI);
        assert_abs_diff_eq!(
            parse_angle("pi/24").unwrap(),
            std::f64::consts::PI / 24.0
        );
        assert_abs_diff_eq!(parse_angle("0.5").unwrap(), 0.5);
        assert!(parse_angle("pi/0").is_err());
        assert!(parse_angle("tau/2").is_err());
    }

    #[test]
    fn grid_expands_to_cross_product() {
        let draft = ConfigDraft {
            experiment: Some(Experiment::GroundState),
            method: Some(Method::Lles),
            lrs: vec![0.1, 0.01, 0.001],
            sigmas: vec![
                std::f64::consts::PI / 6.0,
                std::f64::consts::PI / 12.0,
                std::f64::consts::PI / 24.0,
            ],
            ..Default::default()
        };
        let configs = draft.expand().unwrap();
        assert_eq!(configs.len(), 9);
        assert!(configs.iter().all(|c| c.seeds == DEFAULT_SEEDS));
        assert!(configs.iter().all(|c| c.t_steps == 2));
        assert!(configs.iter().all(|c| c.epochs == 200));
    }

    #[test]
    fn flags_map_directly() {
        let draft = ConfigDraft {
            experiment: Some(Experiment::GroundState),
            method: Some(Method::Lles),
            n_qubits: Some(4),
            layers: Some(4),
            lrs: vec![0.1],
            sigmas: vec![parse_angle("pi/24").unwrap()],
            ..Default::default()
        };
        let configs = draft.expand().unwrap();
        assert_eq!(configs.len(), 1);
        assert_abs_diff_eq!(
            configs[0].sigma.unwrap(),
            std::f64::consts::PI / 24.0
        );
    }

    #[test]
    fn sigma_rules_are_enforced() {
        let missing = ConfigDraft {
            experiment: Some(Experiment::GroundState),
            method: Some(Method::Lles),
            ..Default::default()
        };
        assert!(missing.expand().is_err());

        let spurious = ConfigDraft {
            experiment: Some(Experiment::GroundState),
            method: Some(Method::Grad),
            sigmas: vec![0.1],
            ..Default::default()
        };
        assert!(spurious.expand().is_err());
    }

    #[test]
    fn emitted_config_round_trips() {
        let draft = ConfigDraft {
            experiment: Some(Experiment::GroundState),
            method: Some(Method::Lles),
            lrs: vec![0.1],
            sigmas: vec![std::f64::consts::PI / 24.0],
            noise_lambdas: vec![0.2],
            ..Default::default()
        };
        let config = draft.expand().unwrap().remove(0);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.json");
        std::fs::File::create(&path)
            .unwrap()
            .write_all(config.emit().as_bytes())
            .unwrap();
        let parsed = parse_config_file(&path).unwrap();
        assert_eq!(parsed, vec![config]);
    }

    #[test]
    fn file_grids_accept_pi_strings() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("grid.json");
        std::fs::write(
            &path,
            r#"{
                "experiment": "ground_state",
                "method": "LLES",
                "lr": [0.1, 0.01, 0.001],
                "sigma": ["pi/6", "pi/12", "pi/24"]
            }"#,
        )
        .unwrap();
        let configs = parse_config_file(&path).unwrap();
        assert_eq!(configs.len(), 9);
        let sigmas: Vec<f64> = configs.iter().filter_map(|c| c.sigma).collect();
        assert!(sigmas.contains(&(std::f64::consts::PI / 6.0)));
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.json");
        std::fs::write(
            &path,
            r#"{"experiment": "ground_state", "learning_rate": 0.1}"#,
        )
        .unwrap();
        let err = parse_config_file(&path).unwrap_err();
        assert!(err.to_string().contains("learning_rate"), "{err}");
    }
}
