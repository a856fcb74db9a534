//! Flat `key = value` experiment configuration.
//!
//! Blank lines and lines starting with `#` are ignored. Relative paths in a
//! config file resolve against the file's directory; paths given with
//! `--set` resolve against the working directory.

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use r2dpca::dataset::SynthSpec;
use r2dpca::hypersearch::parse_axis;
use r2dpca::projector::Init;
use r2dpca::relaxation::RelaxFn;
use r2dpca::PNorm;

use crate::error::{CliError, Result};
use crate::experiment::Method;

/// One `compare` entry: a method plus its own overrides.
#[derive(Debug, Clone, PartialEq)]
pub struct MethodSpec {
    pub method: Method,
    pub overrides: Vec<(String, String)>,
}

impl FromStr for MethodSpec {
    type Err = CliError;

    /// `<method> [key=value ...]`
    fn from_str(text: &str) -> Result<Self> {
        let mut words = text.split_whitespace();
        let method = words
            .next()
            .ok_or_else(|| CliError::config("empty method entry"))?
            .parse()?;
        let overrides = words.map(split_pair).collect::<Result<Vec<_>>>()?;
        Ok(MethodSpec { method, overrides })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Config {
    pub manifest: Option<PathBuf>,
    pub synth: SynthSpec,
    pub method: Method,
    pub s: f64,
    pub p: PNorm,
    pub gamma: f64,
    pub r: usize,
    pub eval_r: Option<Vec<usize>>,
    pub train_per_class: usize,
    pub repeats: usize,
    pub seed: u64,
    pub tol: f64,
    pub step_tol: f64,
    pub max_iter: usize,
    pub lambda: f64,
    pub relax_fn: RelaxFn,
    pub init: Init,
    pub s_grid: Vec<f64>,
    pub p_grid: Vec<f64>,
    pub delta: f64,
    pub start: Option<(f64, f64)>,
    pub methods: Vec<MethodSpec>,
    pub out: PathBuf,
    pub(crate) set_keys: BTreeSet<String>,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            manifest: None,
            synth: SynthSpec {
                classes: 5,
                per_class: 20,
                height: 16,
                width: 16,
                noise_sigma: 0.25,
            },
            method: Method::R2dpca,
            s: 2.0,
            p: PNorm::Finite(2.0),
            gamma: 0.0,
            r: 3,
            eval_r: None,
            train_per_class: 10,
            repeats: 1,
            seed: 0,
            tol: 1e-10,
            step_tol: f64::INFINITY,
            max_iter: 1000,
            lambda: 0.0,
            relax_fn: RelaxFn::default(),
            init: Init::Ones,
            s_grid: parse_axis("1.0:0.1:3.0").expect("default grid"),
            p_grid: parse_axis("0.9:0.1:3.0").expect("default grid"),
            delta: 0.3,
            start: None,
            methods: Vec::new(),
            out: PathBuf::from("out"),
            set_keys: BTreeSet::new(),
        }
    }
}

fn split_pair(text: &str) -> Result<(String, String)> {
    let (k, v) = text
        .split_once('=')
        .ok_or_else(|| CliError::config(format!("expected key=value, got {text:?}")))?;
    Ok((k.trim().to_string(), v.trim().to_string()))
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| CliError::config(format!("{key}: cannot parse {value:?}")))
}

fn parse_list<T: FromStr>(key: &str, value: &str) -> Result<Vec<T>> {
    value.split(',').map(|v| parse(key, v.trim())).collect()
}

impl Config {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|source| CliError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let base = path.parent().unwrap_or(Path::new(""));
        let mut cfg = Config::default();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = split_pair(line)
                .map_err(|e| CliError::config(format!("{}:{}: {e}", path.display(), lineno + 1)))?;
            if cfg.set_keys.contains(&key) {
                return Err(CliError::config(format!(
                    "{}:{}: duplicate key {key:?}",
                    path.display(),
                    lineno + 1
                )));
            }
            cfg.set(&key, &value, base)
                .map_err(|e| CliError::config(format!("{}:{}: {e}", path.display(), lineno + 1)))?;
        }
        Ok(cfg)
    }

    /// Applies a `key=value` override given on the command line.
    pub fn apply_override(&mut self, pair: &str) -> Result<()> {
        let (key, value) = split_pair(pair)?;
        self.set(&key, &value, Path::new(""))
    }

    #[cfg(test)]
    pub fn is_set(&self, key: &str) -> bool {
        self.set_keys.contains(key)
    }

    pub fn set(&mut self, key: &str, value: &str, base: &Path) -> Result<()> {
        match key {
            "manifest" => self.manifest = Some(base.join(value)),
            "synth_classes" => self.synth.classes = parse(key, value)?,
            "synth_per_class" => self.synth.per_class = parse(key, value)?,
            "synth_height" => self.synth.height = parse(key, value)?,
            "synth_width" => self.synth.width = parse(key, value)?,
            "synth_sigma" => self.synth.noise_sigma = parse(key, value)?,
            "method" => self.method = value.parse()?,
            "s" => self.s = parse(key, value)?,
            "p" => self.p = parse(key, value)?,
            "gamma" => self.gamma = parse(key, value)?,
            "r" => self.r = parse(key, value)?,
            "eval_r" => self.eval_r = Some(parse_list(key, value)?),
            "train_per_class" => self.train_per_class = parse(key, value)?,
            "repeats" => self.repeats = parse(key, value)?,
            "seed" => self.seed = parse(key, value)?,
            "tol" => self.tol = parse(key, value)?,
            "step_tol" => self.step_tol = parse(key, value)?,
            "max_iter" => self.max_iter = parse(key, value)?,
            "lambda" | "lambda_sparsity" => self.lambda = parse(key, value)?,
            "relax_fn" => self.relax_fn = value.parse()?,
            "init" => self.init = value.parse()?,
            "s_grid" => self.s_grid = parse_axis(value)?,
            "p_grid" => self.p_grid = parse_axis(value)?,
            "delta" => self.delta = parse(key, value)?,
            "start" => {
                let pair: Vec<f64> = parse_list(key, value)?;
                match pair.as_slice() {
                    [s, p] => self.start = Some((*s, *p)),
                    _ => return Err(CliError::config("start: expected `s, p`")),
                }
            }
            "methods" => {
                self.methods = value
                    .split(';')
                    .filter(|e| !e.trim().is_empty())
                    .map(str::parse)
                    .collect::<Result<_>>()?
            }
            "out" => self.out = base.join(value),
            other => return Err(CliError::config(format!("unknown key {other:?}"))),
        }
        self.set_keys.insert(if key == "lambda_sparsity" { "lambda".into() } else { key.into() });
        Ok(())
    }

    /// Checks that do not need the dataset.
    pub fn validate(&self) -> Result<()> {
        if self.repeats == 0 {
            return Err(CliError::config("repeats must be >= 1"));
        }
        if self.train_per_class == 0 {
            return Err(CliError::config("train_per_class must be >= 1"));
        }
        if self.lambda != 0.0 && self.method != Method::TwoDpcaL1s {
            return Err(CliError::config(format!(
                "lambda applies only to 2dpca-l1s, not {}",
                self.method
            )));
        }
        if let Some(list) = &self.eval_r {
            if list.is_empty() {
                return Err(CliError::config("eval_r is empty"));
            }
        }
        Ok(())
    }

    /// This config with a `compare` entry's method and overrides applied.
    pub fn for_entry(&self, entry: &MethodSpec) -> Result<Config> {
        let mut cfg = self.clone();
        cfg.method = entry.method;
        if entry.method != Method::TwoDpcaL1s && !entry.overrides.iter().any(|(k, _)| k == "lambda") {
            cfg.lambda = 0.0;
        }
        for (k, v) in &entry.overrides {
            cfg.set(k, v, Path::new(""))?;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}
