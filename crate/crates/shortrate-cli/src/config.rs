//! Layered run configuration.
//!
//! A value is taken from the command-line flag if given, else from the
//! preset, else from the config file (`--config` or `$HFL_CONFIG`), else
//! from the command's default. The file holds one `key = value` pair per
//! line; `#` starts a comment.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::ValueEnum;

use crate::error::{CliError, Result};

pub const CONFIG_ENV: &str = "HFL_CONFIG";

/// Every key a config file or preset may set.
pub const KEYS: &[&str] = &[
    "k",
    "a",
    "L",
    "x",
    "x0",
    "t",
    "T",
    "n",
    "grid",
    "maturities",
    "eps",
    "engine",
    "payoff",
    "strike",
    "dt",
    "horizon",
    "paths",
    "seed",
    "measure",
    "bridge",
    "bins",
    "threads",
    "dump",
    "histogram",
    "output",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
#[allow(clippy::enum_variant_names)]
pub enum Preset {
    /// k = 1/2, a = L = 1, first four eigenvalues
    FigEigen,
    /// k = 1/2, a = L = 1, x = 0.5, T = 0.05..0.3 in steps of 0.05
    FigDensityKhalf,
    /// k = -1/2, a = L = 1, x in {1/3, 1/2, 2/3}, T = 0.1..2
    FigYieldKneghalf,
}

impl Preset {
    fn entries(self) -> Vec<(&'static str, String)> {
        let unit = [("a", "1".to_string()), ("L", "1".to_string())];
        let mut v: Vec<(&'static str, String)> = unit.into();
        match self {
            Self::FigEigen => {
                v.push(("k", "0.5".into()));
                v.push(("n", "4".into()));
            }
            Self::FigDensityKhalf => {
                v.push(("k", "0.5".into()));
                v.push(("x", "0.5".into()));
                v.push(("t", "0".into()));
                v.push(("T", join((1..=6).map(|i| 0.05 * i as f64))));
                v.push(("grid", "200".into()));
            }
            Self::FigYieldKneghalf => {
                v.push(("k", "-0.5".into()));
                v.push(("x", join([1.0 / 3.0, 0.5, 2.0 / 3.0])));
                v.push(("maturities", join((1..=20).map(|i| 0.1 * i as f64))));
            }
        }
        v
    }
}

fn join<I: IntoIterator<Item = f64>>(values: I) -> String {
    values
        .into_iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join(",")
}

/// Comma-separated list of numbers.
#[derive(Debug, Clone, PartialEq)]
pub struct FloatList(pub Vec<f64>);

impl FromStr for FloatList {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let values = s
            .split(',')
            .map(|item| {
                item.trim()
                    .parse::<f64>()
                    .map_err(|_| format!("`{}` is not a number", item.trim()))
            })
            .collect::<std::result::Result<Vec<_>, _>>()?;
        Ok(Self(values))
    }
}

/// Parses the `key = value` format; `origin` names the source in errors.
pub fn parse_config(text: &str, origin: &str) -> Result<BTreeMap<String, String>> {
    let mut map = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let err = |m: String| CliError::Config(format!("{origin}:{}: {m}", i + 1));
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| err("expected `key = value`".into()))?;
        let (key, value) = (key.trim(), value.trim());
        if !KEYS.contains(&key) {
            return Err(err(format!("unknown key `{key}`")));
        }
        if value.is_empty() {
            return Err(err(format!("empty value for `{key}`")));
        }
        if map.insert(key.to_string(), value.to_string()).is_some() {
            return Err(err(format!("duplicate key `{key}`")));
        }
    }
    Ok(map)
}

#[derive(Debug, Default)]
pub struct Layers {
    preset: BTreeMap<String, String>,
    file: BTreeMap<String, String>,
}

impl Layers {
    /// Reads `path`, or `$HFL_CONFIG` when no path is given.
    pub fn load(path: Option<&Path>, preset: Option<Preset>) -> Result<Self> {
        let path: Option<PathBuf> = match path {
            Some(p) => Some(p.to_path_buf()),
            None => std::env::var_os(CONFIG_ENV)
                .filter(|v| !v.is_empty())
                .map(PathBuf::from),
        };
        let file = match path {
            Some(p) => {
                let text = std::fs::read_to_string(&p)
                    .map_err(|e| CliError::Config(format!("cannot read {}: {e}", p.display())))?;
                parse_config(&text, &p.display().to_string())?
            }
            None => BTreeMap::new(),
        };
        let preset = preset
            .map(|p| {
                p.entries()
                    .into_iter()
                    .map(|(k, v)| (k.to_string(), v))
                    .collect()
            })
            .unwrap_or_default();
        Ok(Self { preset, file })
    }

    #[cfg(test)]
    pub fn from_maps(preset: BTreeMap<String, String>, file: BTreeMap<String, String>) -> Self {
        Self { preset, file }
    }

    /// The flag if present, else the layered value for `key`.
    pub fn get<T>(&self, flag: Option<T>, key: &str) -> Result<Option<T>>
    where
        T: FromStr,
        T::Err: Display,
    {
        if flag.is_some() {
            return Ok(flag);
        }
        let (source, raw) = match (self.preset.get(key), self.file.get(key)) {
            (Some(v), _) => ("preset", v),
            (None, Some(v)) => ("config file", v),
            (None, None) => return Ok(None),
        };
        raw.parse::<T>()
            .map(Some)
            .map_err(|e| CliError::Config(format!("{source} value for `{key}`: {e}")))
    }

    pub fn require<T>(&self, flag: Option<T>, key: &str) -> Result<T>
    where
        T: FromStr,
        T::Err: Display,
    {
        self.get(flag, key)?
            .ok_or_else(|| CliError::Usage(format!("missing `{key}` (flag --{key} or config key)")))
    }

    pub fn or<T>(&self, flag: Option<T>, key: &str, default: T) -> Result<T>
    where
        T: FromStr,
        T::Err: Display,
    {
        Ok(self.get(flag, key)?.unwrap_or(default))
    }
}
