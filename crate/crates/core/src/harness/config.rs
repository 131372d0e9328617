//! Flat `key = value` configuration files.
//!
//! Lines are `key = value`; `#` starts a comment. Settings are applied in
//! this order, later ones winning: built-in defaults, the `preset` named in
//! the file or on the command line, the remaining file entries, then
//! command-line overrides.

use std::path::{Path, PathBuf};

use super::{parse_methods, preset, ExperimentConfig};
use crate::{Error, Result};

/// One `key = value` entry and where it came from.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Setting {
    pub key: String,
    pub value: String,
    pub origin: String,
}

impl Setting {
    pub fn new(key: &str, value: &str, origin: &str) -> Self {
        Setting { key: key.trim().to_string(), value: value.trim().to_string(), origin: origin.to_string() }
    }

    /// Parses `key=value` as given on a command line.
    pub fn from_assignment(text: &str) -> Result<Self> {
        let (k, v) = text
            .split_once('=')
            .ok_or_else(|| Error::config(format!("expected key=value, got {text:?}")))?;
        Ok(Setting::new(k, v, "command line"))
    }
}

pub fn parse_settings(text: &str, source: &str) -> Result<Vec<Setting>> {
    let mut out = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::config(format!("{source}:{}: expected `key = value`", n + 1)))?;
        if k.trim().is_empty() {
            return Err(Error::config(format!("{source}:{}: empty key", n + 1)));
        }
        out.push(Setting::new(k, v, &format!("{source}:{}", n + 1)));
    }
    Ok(out)
}

fn parse<T: std::str::FromStr>(s: &Setting) -> Result<T> {
    s.value
        .parse()
        .map_err(|_| Error::config(format!("{}: invalid value {:?} for {}", s.origin, s.value, s.key)))
}

pub fn apply_setting(config: &mut ExperimentConfig, s: &Setting) -> Result<()> {
    match s.key.as_str() {
        "preset" => *config = preset(&s.value)?,
        "n1" => config.params.n1 = parse(s)?,
        "n2" => config.params.n2 = parse(s)?,
        "band_width" | "de" => config.params.band_width = parse(s)?,
        "coupling" | "lambda" => config.params.coupling = parse(s)?,
        "t_max" => config.t_max = Some(parse(s)?),
        "samples" => config.sample_count = parse(s)?,
        "realizations" => config.realizations = parse(s)?,
        "seed" => config.master_seed = parse(s)?,
        "methods" => config.methods = parse_methods(&s.value)?,
        "kernel" => config.kernel = s.value.parse()?,
        "rho11" => config.rho11 = parse(s)?,
        "rho01_re" => config.rho01.re = parse(s)?,
        "rho01_im" => config.rho01.im = parse(s)?,
        "step" => config.integrator_step = Some(parse(s)?),
        "csv" => config.output.csv = Some(PathBuf::from(&s.value)),
        "json" => config.output.json = Some(PathBuf::from(&s.value)),
        other => return Err(Error::config(format!("{}: unknown key {other:?}", s.origin))),
    }
    Ok(())
}

/// Builds a configuration from an optional base preset, file settings and
/// command-line settings, honoring the documented precedence.
pub fn resolve(base_preset: Option<&str>, file: &[Setting], cli: &[Setting]) -> Result<ExperimentConfig> {
    let chosen = file
        .iter()
        .chain(cli)
        .rev()
        .find(|s| s.key == "preset")
        .map(|s| s.value.as_str())
        .or(base_preset);
    let mut config = match chosen {
        Some(id) => preset(id)?,
        None => ExperimentConfig::default(),
    };
    for s in file.iter().chain(cli).filter(|s| s.key != "preset") {
        apply_setting(&mut config, s)?;
    }
    config.validate()?;
    Ok(config)
}

/// Reads a configuration file and applies command-line overrides.
pub fn load_config(path: &Path, cli: &[Setting]) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let file = parse_settings(&text, &path.display().to_string())?;
    resolve(None, &file, cli)
}
