//! Flat `key: value` experiment files.
//!
//! ```text
//! # GeoStyle, full model
//! dataset_profile: geostyle
//! dataset_path: data/geostyle.csv
//! taxonomy_path: data/geostyle.taxonomy
//! sample_range: 50
//! ```

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::dataio::DatasetFormat;
use crate::error::{Error, Result};
use crate::model::KernConfig;
use crate::pipeline::{DatasetId, TrainSettings};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DatasetProfile {
    GeoStyle,
    FitHalf,
    FitOne,
    Synthetic,
}

impl DatasetProfile {
    pub const ALL: [DatasetProfile; 4] = [
        DatasetProfile::GeoStyle,
        DatasetProfile::FitHalf,
        DatasetProfile::FitOne,
        DatasetProfile::Synthetic,
    ];

    pub fn name(self) -> &'static str {
        match self {
            DatasetProfile::GeoStyle => "geostyle",
            DatasetProfile::FitHalf => "fit-half",
            DatasetProfile::FitOne => "fit-one",
            DatasetProfile::Synthetic => "synthetic",
        }
    }

    /// Benchmark this profile belongs to, if any.
    pub fn dataset_id(self) -> Option<DatasetId> {
        match self {
            DatasetProfile::GeoStyle => Some(DatasetId::GeoStyle),
            DatasetProfile::FitHalf => Some(DatasetId::FitHalf),
            DatasetProfile::FitOne => Some(DatasetId::FitOne),
            DatasetProfile::Synthetic => None,
        }
    }
}

impl fmt::Display for DatasetProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for DatasetProfile {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        DatasetProfile::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| {
                Error::Config(format!(
                    "unknown dataset_profile {s:?} (expected geostyle, fit-half, fit-one or synthetic)"
                ))
            })
    }
}

/// Everything one `train` or `test` run needs.
#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub dataset_profile: DatasetProfile,
    pub model: KernConfig,
    pub train: TrainSettings,
    pub dataset_path: Option<PathBuf>,
    pub dataset_format: DatasetFormat,
    pub taxonomy_path: Option<PathBuf>,
    pub out_dir: PathBuf,
}

pub const KEYS: [&str; 21] = [
    "dataset_profile",
    "input_len",
    "output_len",
    "ext_kg",
    "int_kg",
    "triplet_lambda",
    "sample_range",
    "feat_size",
    "rnn_hidden_size",
    "lr",
    "lr_decay",
    "lr_decay_interval",
    "lr_decay_gamma",
    "epoch",
    "batch_size",
    "dataset_path",
    "dataset_format",
    "taxonomy_path",
    "seed",
    "margin",
    "out_dir",
];

impl ExperimentConfig {
    pub fn for_profile(profile: DatasetProfile) -> Self {
        let mut model = KernConfig::default();
        let mut train = TrainSettings::default();
        let mut format = DatasetFormat::TrendKernJson;
        match profile {
            DatasetProfile::GeoStyle => {
                (model.input_len, model.output_len) = (52, 26);
                (train.lr_decay_interval, train.epochs) = (15, 20);
                format = DatasetFormat::GeoStyleRaw;
            }
            DatasetProfile::FitHalf => {
                (model.input_len, model.output_len) = (48, 12);
                (train.lr_decay_interval, train.epochs) = (10, 15);
            }
            DatasetProfile::FitOne => {
                (model.input_len, model.output_len) = (48, 24);
                (train.lr_decay_interval, train.epochs) = (10, 15);
            }
            DatasetProfile::Synthetic => {
                (model.input_len, model.output_len) = (26, 13);
                (train.lr_decay_interval, train.epochs) = (10, 15);
                model.sample_range = 50;
            }
        }
        Self {
            dataset_profile: profile,
            model,
            train,
            dataset_path: None,
            dataset_format: format,
            taxonomy_path: None,
            out_dir: PathBuf::from("runs").join(profile.name()),
        }
    }

    /// Parses a config file's text. Returns the config and any non-fatal warnings.
    pub fn parse(text: &str, context: &str) -> Result<(Self, Vec<String>)> {
        let err = |line: usize, message: String| Error::Parse {
            context: context.to_string(),
            location: format!("line {line}"),
            message,
        };
        let mut pairs: BTreeMap<&str, (usize, String)> = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let n = i + 1;
            let line = strip_comment(raw).trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once(':')
                .ok_or_else(|| err(n, format!("expected `key: value`, got {line:?}")))?;
            let key = key.trim();
            if !KEYS.contains(&key) {
                return Err(err(n, format!("unknown key {key:?}")));
            }
            let value = unquote(value.trim());
            if value.is_empty() {
                return Err(err(n, format!("key {key:?} has no value")));
            }
            if pairs.insert(key, (n, value.to_string())).is_some() {
                return Err(err(n, format!("duplicate key {key:?}")));
            }
        }

        let (_, profile) = pairs
            .remove("dataset_profile")
            .ok_or_else(|| Error::Config(format!("{context}: missing required key dataset_profile")))?;
        let mut cfg = Self::for_profile(profile.parse()?);

        for (key, (n, value)) in pairs {
            let v = value.as_str();
            let bad = |what: &str| err(n, format!("{key}: expected {what}, got {v:?}"));
            let int = || v.parse::<usize>().map_err(|_| bad("a non-negative integer"));
            let float = || match v.parse::<f64>() {
                Ok(x) if x.is_finite() => Ok(x),
                _ => Err(bad("a decimal number")),
            };
            let boolean = || match v {
                "true" => Ok(true),
                "false" => Ok(false),
                _ => Err(bad("true or false")),
            };
            match key {
                "input_len" => cfg.model.input_len = int()?,
                "output_len" => cfg.model.output_len = int()?,
                "ext_kg" => cfg.model.ext_kg = boolean()?,
                "int_kg" => cfg.model.int_kg = boolean()?,
                "triplet_lambda" => cfg.model.triplet_lambda = float()?,
                "sample_range" => cfg.model.sample_range = int()?,
                "feat_size" => cfg.model.feat_size = int()?,
                "rnn_hidden_size" => cfg.model.rnn_hidden_size = int()?,
                "margin" => cfg.model.margin = float()?,
                "seed" => cfg.model.seed = v.parse().map_err(|_| bad("a non-negative integer"))?,
                "lr" => cfg.train.lr = float()?,
                "lr_decay" => cfg.train.lr_decay = boolean()?,
                "lr_decay_interval" => cfg.train.lr_decay_interval = int()?,
                "lr_decay_gamma" => cfg.train.lr_decay_gamma = float()?,
                "epoch" => cfg.train.epochs = int()?,
                "batch_size" => cfg.train.batch_size = int()?,
                "dataset_path" => cfg.dataset_path = Some(PathBuf::from(v)),
                "dataset_format" => cfg.dataset_format = v.parse()?,
                "taxonomy_path" => cfg.taxonomy_path = Some(PathBuf::from(v)),
                "out_dir" => cfg.out_dir = PathBuf::from(v),
                _ => unreachable!("key list checked above"),
            }
        }
        cfg.validate()?;
        let warnings = cfg.model.grid_warnings();
        Ok((cfg, warnings))
    }

    /// Reads `path`; relative paths inside it are taken relative to its directory.
    pub fn load(path: impl AsRef<Path>) -> Result<(Self, Vec<String>)> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let (mut cfg, warnings) = Self::parse(&text, &path.display().to_string())?;
        let base = path.parent().unwrap_or(Path::new(""));
        let resolve = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        cfg.dataset_path.as_mut().map(resolve);
        cfg.taxonomy_path.as_mut().map(resolve);
        resolve(&mut cfg.out_dir);
        Ok((cfg, warnings))
    }

    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        self.train.validate()
    }

    /// Every key, in the order of [`KEYS`].
    pub fn to_text(&self) -> String {
        let m = &self.model;
        let t = &self.train;
        let mut lines = vec![
            format!("dataset_profile: {}", self.dataset_profile),
            format!("input_len: {}", m.input_len),
            format!("output_len: {}", m.output_len),
            format!("ext_kg: {}", m.ext_kg),
            format!("int_kg: {}", m.int_kg),
            format!("triplet_lambda: {}", m.triplet_lambda),
            format!("sample_range: {}", m.sample_range),
            format!("feat_size: {}", m.feat_size),
            format!("rnn_hidden_size: {}", m.rnn_hidden_size),
            format!("lr: {}", t.lr),
            format!("lr_decay: {}", t.lr_decay),
            format!("lr_decay_interval: {}", t.lr_decay_interval),
            format!("lr_decay_gamma: {}", t.lr_decay_gamma),
            format!("epoch: {}", t.epochs),
            format!("batch_size: {}", t.batch_size),
        ];
        if let Some(p) = &self.dataset_path {
            lines.push(format!("dataset_path: {}", p.display()));
        }
        lines.push(format!("dataset_format: {}", self.dataset_format));
        if let Some(p) = &self.taxonomy_path {
            lines.push(format!("taxonomy_path: {}", p.display()));
        }
        lines.push(format!("seed: {}", m.seed));
        lines.push(format!("margin: {}", m.margin));
        lines.push(format!("out_dir: {}", self.out_dir.display()));
        let mut out = lines.join("\n");
        out.push('\n');
        out
    }
}

fn strip_comment(line: &str) -> &str {
    if line.trim_start().starts_with('#') {
        return "";
    }
    match line.find(" #") {
        Some(i) => &line[..i],
        None => line,
    }
}

fn unquote(v: &str) -> &str {
    for q in ['"', '\''] {
        if v.len() >= 2 && v.starts_with(q) && v.ends_with(q) {
            return &v[1..v.len() - 1];
        }
    }
    v
}
