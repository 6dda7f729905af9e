//! Flat `[section]` / `key = value` experiment configuration.
//!
//! Grammar, one directive per line:
//!
//! ```text
//! # comment
//! [section]
//! key = value
//! ```
//!
//! Sections: `dataset`, `mixture`, `train`, `run`. See the repository README
//! for the full key list and defaults.

use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;

use graylearn::{ConfidenceGradient, LossMethod, OodLabeling, OodSubset, OptimizerSpec};

#[derive(Debug)]
pub struct ConfigError {
    pub line: Option<usize>,
    pub field: Option<String>,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "config error")?;
        if let Some(line) = self.line {
            write!(f, " at line {line}")?;
        }
        if let Some(field) = &self.field {
            write!(f, " in field '{field}'")?;
        }
        write!(f, ": {}", self.message)
    }
}

impl std::error::Error for ConfigError {}

fn field_err(field: &str, message: impl Into<String>) -> ConfigError {
    ConfigError {
        line: None,
        field: Some(field.to_string()),
        message: message.into(),
    }
}

/// Raw parsed sections, before typing.
#[derive(Debug, Default)]
struct RawConfig {
    values: BTreeMap<String, (String, usize)>,
}

impl RawConfig {
    fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut section = String::new();
        let mut values = BTreeMap::new();
        for (i, line) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = match line.find('#') {
                Some(p) => &line[..p],
                None => line,
            }
            .trim();
            if line.is_empty() {
                continue;
            }
            if let Some(name) = line.strip_prefix('[') {
                let name = name.strip_suffix(']').ok_or(ConfigError {
                    line: Some(line_no),
                    field: None,
                    message: "unterminated section header".into(),
                })?;
                section = name.trim().to_string();
                continue;
            }
            let (key, value) = line.split_once('=').ok_or(ConfigError {
                line: Some(line_no),
                field: None,
                message: "expected 'key = value'".into(),
            })?;
            let full = if section.is_empty() {
                key.trim().to_string()
            } else {
                format!("{section}.{}", key.trim())
            };
            values.insert(full, (value.trim().to_string(), line_no));
        }
        Ok(RawConfig { values })
    }

    fn get(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(|(v, _)| v.as_str())
    }

    fn parse_typed<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>, ConfigError> {
        match self.values.get(key) {
            None => Ok(None),
            Some((v, line)) => v.parse::<T>().map(Some).map_err(|_| ConfigError {
                line: Some(*line),
                field: Some(key.to_string()),
                message: format!("cannot parse '{v}'"),
            }),
        }
    }

    fn required<T: std::str::FromStr>(&self, key: &str) -> Result<T, ConfigError> {
        self.parse_typed(key)?
            .ok_or_else(|| field_err(key, "missing required key"))
    }
}

#[derive(Debug, Clone)]
pub enum DatasetSource {
    Blobs {
        n_per_class: usize,
        classes: usize,
        features: usize,
        centers_scale: f64,
        noise_sd: f64,
    },
    Csv {
        path: PathBuf,
        label_column: String,
        has_header: bool,
    },
}

#[derive(Debug, Clone)]
pub struct MixtureConfig {
    pub alpha: f64,
    pub labeling: OodLabeling,
    pub ood_subset: Option<OodSubset>,
}

#[derive(Debug, Clone)]
pub struct TrainSection {
    pub method: LossMethod,
    pub epochs: usize,
    pub batch_size: usize,
    pub optimizer: OptimizerSpec,
    pub lr_schedule: Vec<(usize, f64)>,
    pub confidence_gradient: ConfidenceGradient,
    pub hidden: Vec<usize>,
}

/// Fully typed experiment configuration.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub dataset: DatasetSource,
    /// Separate CSV pool of contamination inputs, if any.
    pub ood_csv: Option<PathBuf>,
    /// Designate the smallest class of the base dataset as contamination.
    pub smallest_class_ood: bool,
    pub test_fraction: f64,
    pub mixture: MixtureConfig,
    pub train: TrainSection,
    pub seeds: Vec<u64>,
}

fn parse_method(raw: &RawConfig) -> Result<LossMethod, ConfigError> {
    let name = raw.get("train.method").unwrap_or("gl");
    Ok(match name {
        "gl" => LossMethod::Gl,
        "standard" => LossMethod::Standard,
        "nl" => LossMethod::Nl,
        "standard_plus_nl" => LossMethod::StandardPlusNl,
        "mae" => LossMethod::Mae,
        "bootstrap" => {
            let beta = raw.parse_typed::<f64>("train.bootstrap_beta")?.unwrap_or(0.95);
            if !(0.0 < beta && beta < 1.0) {
                return Err(field_err("train.bootstrap_beta", "must be in (0,1)"));
            }
            LossMethod::Bootstrap(beta)
        }
        other => return Err(field_err("train.method", format!("unknown method '{other}'"))),
    })
}

fn parse_list<T: std::str::FromStr>(field: &str, value: &str) -> Result<Vec<T>, ConfigError> {
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse::<T>()
                .map_err(|_| field_err(field, format!("cannot parse element '{s}'")))
        })
        .collect()
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let raw = RawConfig::parse(text)?;

        let dataset = match raw.get("dataset.kind").unwrap_or("blobs") {
            "blobs" => DatasetSource::Blobs {
                n_per_class: raw.parse_typed("dataset.n_per_class")?.unwrap_or(50),
                classes: raw.parse_typed("dataset.classes")?.unwrap_or(3),
                features: raw.parse_typed("dataset.features")?.unwrap_or(2),
                centers_scale: raw.parse_typed("dataset.centers_scale")?.unwrap_or(3.0),
                noise_sd: raw.parse_typed("dataset.noise_sd")?.unwrap_or(1.0),
            },
            "csv" => DatasetSource::Csv {
                path: PathBuf::from(raw.required::<String>("dataset.path")?),
                label_column: raw
                    .get("dataset.label_column")
                    .unwrap_or("label")
                    .to_string(),
                has_header: raw.parse_typed("dataset.has_header")?.unwrap_or(true),
            },
            other => {
                return Err(field_err(
                    "dataset.kind",
                    format!("unknown dataset kind '{other}'"),
                ))
            }
        };

        let alpha = raw.parse_typed::<f64>("mixture.alpha")?.unwrap_or(0.1);
        if !(0.0..=1.0).contains(&alpha) {
            return Err(field_err("mixture.alpha", "must be in [0,1]"));
        }
        let labeling = match raw.get("mixture.labeling").unwrap_or("specific") {
            "specific" => OodLabeling::Specific,
            "random" => OodLabeling::Random,
            other => {
                return Err(field_err(
                    "mixture.labeling",
                    format!("unknown labeling '{other}'"),
                ))
            }
        };
        let ood_subset = match raw.parse_typed::<usize>("mixture.ood_subset_index")? {
            Some(index) => Some(OodSubset {
                index,
                n_subsets: raw.parse_typed("mixture.ood_subsets")?.unwrap_or(10),
            }),
            None => None,
        };

        let optimizer = match raw.get("train.optimizer").unwrap_or("adam") {
            "adam" => OptimizerSpec::adam(raw.parse_typed("train.learning_rate")?.unwrap_or(0.001)),
            "sgd" => OptimizerSpec::Sgd {
                learning_rate: raw.parse_typed("train.learning_rate")?.unwrap_or(0.1),
                momentum: raw.parse_typed("train.momentum")?.unwrap_or(0.9),
            },
            other => {
                return Err(field_err(
                    "train.optimizer",
                    format!("unknown optimizer '{other}'"),
                ))
            }
        };
        let lr_schedule = match raw.get("train.lr_schedule") {
            None => Vec::new(),
            Some(v) => v
                .split(',')
                .map(str::trim)
                .filter(|s| !s.is_empty())
                .map(|pair| {
                    let (e, m) = pair.split_once(':').ok_or_else(|| {
                        field_err("train.lr_schedule", "expected 'epoch:multiplier' pairs")
                    })?;
                    Ok((
                        e.parse::<usize>()
                            .map_err(|_| field_err("train.lr_schedule", "bad epoch"))?,
                        m.parse::<f64>()
                            .map_err(|_| field_err("train.lr_schedule", "bad multiplier"))?,
                    ))
                })
                .collect::<Result<Vec<_>, ConfigError>>()?,
        };
        let confidence_gradient = match raw.get("train.confidence_gradient").unwrap_or("full") {
            "full" => ConfidenceGradient::Full,
            "detached" => ConfidenceGradient::Detached,
            other => {
                return Err(field_err(
                    "train.confidence_gradient",
                    format!("unknown mode '{other}'"),
                ))
            }
        };
        let hidden = match raw.get("train.hidden") {
            None => vec![128, 128],
            Some(v) => parse_list("train.hidden", v)?,
        };

        let train = TrainSection {
            method: parse_method(&raw)?,
            epochs: raw.parse_typed("train.epochs")?.unwrap_or(10),
            batch_size: raw.parse_typed("train.batch_size")?.unwrap_or(16),
            optimizer,
            lr_schedule,
            confidence_gradient,
            hidden,
        };
        if train.epochs == 0 {
            return Err(field_err("train.epochs", "must be >= 1"));
        }
        if train.batch_size == 0 {
            return Err(field_err("train.batch_size", "must be >= 1"));
        }

        let seeds = match raw.get("run.seeds") {
            None => vec![1, 2, 3, 4, 5],
            Some(v) => parse_list("run.seeds", v)?,
        };
        if seeds.is_empty() {
            return Err(field_err("run.seeds", "seed list must be nonempty"));
        }
        let test_fraction = raw.parse_typed::<f64>("dataset.test_fraction")?.unwrap_or(0.3);
        if !(0.0 < test_fraction && test_fraction < 1.0) {
            return Err(field_err("dataset.test_fraction", "must be in (0,1)"));
        }

        Ok(ExperimentConfig {
            dataset,
            ood_csv: raw.get("dataset.ood_path").map(PathBuf::from),
            smallest_class_ood: raw
                .parse_typed("dataset.smallest_class_ood")?
                .unwrap_or(true),
            test_fraction,
            mixture: MixtureConfig {
                alpha,
                labeling,
                ood_subset,
            },
            train,
            seeds,
        })
    }
}
