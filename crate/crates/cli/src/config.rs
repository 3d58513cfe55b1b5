//! Experiment config: one `key value` pair per line, `#` starts a comment.
//! Relative paths are resolved against the config file's directory.

use std::collections::HashSet;
use std::fmt;
use std::path::{Path, PathBuf};

use birthmark_core::eval::ModelKind;

pub const DEFAULT_MAX_SYMBOLS: usize = 36;
pub const DEFAULT_GROUP_SIZE: usize = 10;

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub family_dir: PathBuf,
    pub benign_dir: PathBuf,
    pub family_name: Option<String>,
    pub model: ModelKind,
    pub states: usize,
    pub iterations: usize,
    pub folds: usize,
    pub max_symbols: usize,
    pub group_size: usize,
    pub seed: u64,
    pub gap_open: i64,
    pub gap_extend: i64,
    pub subst: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigError {
    /// 1-based; 0 when the problem is not tied to a line.
    pub line: usize,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.line == 0 {
            write!(f, "config: {}", self.message)
        } else {
            write!(f, "config line {}: {}", self.line, self.message)
        }
    }
}

impl std::error::Error for ConfigError {}

fn err(line: usize, message: impl Into<String>) -> ConfigError {
    ConfigError {
        line,
        message: message.into(),
    }
}

fn positive<T: std::str::FromStr + PartialOrd + Default>(line: usize, key: &str, value: &str) -> Result<T, ConfigError> {
    match value.parse::<T>() {
        Ok(v) if v > T::default() => Ok(v),
        _ => Err(err(line, format!("{key} must be a positive integer, got {value:?}"))),
    }
}

fn non_negative(line: usize, key: &str, value: &str) -> Result<i64, ConfigError> {
    match value.parse::<i64>() {
        Ok(v) if v >= 0 => Ok(v),
        _ => Err(err(line, format!("{key} must be a non-negative integer, got {value:?}"))),
    }
}

impl ExperimentConfig {
    pub fn parse(text: &str, base_dir: &Path) -> Result<Self, ConfigError> {
        let mut family_dir = None;
        let mut benign_dir = None;
        let mut model = None;
        let mut cfg = ExperimentConfig {
            family_dir: PathBuf::new(),
            benign_dir: PathBuf::new(),
            family_name: None,
            model: ModelKind::HmmDynamic,
            states: birthmark_core::hmm::DEFAULT_STATES,
            iterations: birthmark_core::hmm::DEFAULT_ITERATIONS,
            folds: birthmark_core::eval::DEFAULT_FOLDS,
            max_symbols: DEFAULT_MAX_SYMBOLS,
            group_size: DEFAULT_GROUP_SIZE,
            seed: 0,
            gap_open: birthmark_core::align::DEFAULT_GAP_OPEN,
            gap_extend: birthmark_core::align::DEFAULT_GAP_EXTEND,
            subst: None,
        };
        let mut seen = HashSet::new();
        let mut gap_line = 0;

        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) = match content.split_once(char::is_whitespace) {
                Some((k, v)) => (k, v.trim()),
                None => return Err(err(line, format!("expected \"key value\", got {content:?}"))),
            };
            if !seen.insert(key.to_owned()) {
                return Err(err(line, format!("duplicate key {key}")));
            }
            let path = || base_dir.join(value);
            match key {
                "family_dir" => family_dir = Some(path()),
                "benign_dir" => benign_dir = Some(path()),
                "family_name" => cfg.family_name = Some(value.to_owned()),
                "model" => model = Some(value.parse::<ModelKind>().map_err(|e| err(line, e.to_string()))?),
                "states" => cfg.states = positive(line, key, value)?,
                "iterations" => cfg.iterations = positive(line, key, value)?,
                "folds" => cfg.folds = positive(line, key, value)?,
                "max_symbols" => cfg.max_symbols = positive(line, key, value)?,
                "group_size" => cfg.group_size = positive(line, key, value)?,
                "seed" => {
                    cfg.seed = value
                        .parse()
                        .map_err(|_| err(line, format!("seed must be an unsigned integer, got {value:?}")))?
                }
                "gap_open" => {
                    cfg.gap_open = non_negative(line, key, value)?;
                    gap_line = line;
                }
                "gap_extend" => {
                    cfg.gap_extend = non_negative(line, key, value)?;
                    gap_line = gap_line.max(line);
                }
                "subst" => cfg.subst = Some(path()),
                other => return Err(err(line, format!("unknown key {other}"))),
            }
        }

        cfg.family_dir = family_dir.ok_or_else(|| err(0, "missing required key family_dir"))?;
        cfg.benign_dir = benign_dir.ok_or_else(|| err(0, "missing required key benign_dir"))?;
        cfg.model = model.ok_or_else(|| err(0, "missing required key model"))?;
        if cfg.folds < 2 {
            return Err(err(0, "folds must be at least 2"));
        }
        if cfg.gap_extend > cfg.gap_open {
            return Err(err(gap_line, "gap_extend must not exceed gap_open"));
        }
        Ok(cfg)
    }

    /// The configured family name, or the family directory's last component.
    pub fn family_name(&self) -> String {
        self.family_name.clone().unwrap_or_else(|| {
            self.family_dir
                .file_name()
                .map(|n| n.to_string_lossy().into_owned())
                .unwrap_or_else(|| "family".to_owned())
        })
    }
}
