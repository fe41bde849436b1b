//! Run configuration: a flat `key = value` file with dotted sections,
//! overridden by command-line flags.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use anyhow::{anyhow, bail, Context, Result};
use thermoqsl::{ModelKind, SpinChainModel};

/// A grid of sample points: an explicit list, `start:stop:count`, or
/// `start:stop:count:log`.
#[derive(Clone, Debug, PartialEq)]
pub struct Grid {
    source: String,
    points: Vec<f64>,
}

impl Grid {
    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn single(x: f64) -> Self {
        Self {
            source: format!("{x}"),
            points: vec![x],
        }
    }
}

impl fmt::Display for Grid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.source)
    }
}

fn parse_f64(s: &str) -> Result<f64> {
    let x: f64 = s.trim().parse().with_context(|| format!("invalid number {s:?}"))?;
    if !x.is_finite() {
        bail!("non-finite value {s:?}");
    }
    Ok(x)
}

impl FromStr for Grid {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        let source = s.trim().to_string();
        if source.is_empty() {
            return Ok(Self {
                source,
                points: Vec::new(),
            });
        }
        let points = if source.contains(':') {
            let parts: Vec<&str> = source.split(':').map(str::trim).collect();
            let log = match parts.len() {
                3 => false,
                4 if parts[3] == "log" => true,
                _ => bail!("range must be start:stop:count or start:stop:count:log, got {source:?}"),
            };
            let start = parse_f64(parts[0])?;
            let stop = parse_f64(parts[1])?;
            let count: usize = parts[2]
                .parse()
                .with_context(|| format!("invalid count in {source:?}"))?;
            if count == 0 {
                bail!("range count must be positive in {source:?}");
            }
            if log && !(start > 0.0 && stop > 0.0) {
                bail!("log range needs positive endpoints, got {source:?}");
            }
            (0..count)
                .map(|k| {
                    if count == 1 {
                        return start;
                    }
                    if k + 1 == count {
                        return stop;
                    }
                    let t = k as f64 / (count - 1) as f64;
                    if log {
                        (start.ln() + t * (stop.ln() - start.ln())).exp()
                    } else {
                        start + t * (stop - start)
                    }
                })
                .collect()
        } else {
            source.split(',').map(parse_f64).collect::<Result<Vec<_>>>()?
        };
        Ok(Self { source, points })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

impl FromStr for Format {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            other => bail!("unknown output format {other:?} (expected csv or json)"),
        }
    }
}

impl fmt::Display for Format {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Format::Csv => "csv",
            Format::Json => "json",
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub kind: ModelKind,
    pub n_sites: usize,
    pub coupling: f64,
    pub field: Option<f64>,
    pub beta: Grid,
    pub gamma: Grid,
    pub lambda: Grid,
    pub lambda_max: f64,
    pub n_records: usize,
    pub alpha: f64,
    pub out: Option<PathBuf>,
    pub format: Format,
    pub verify_only: Vec<String>,
    pub verify_dynamics_n_sites: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            kind: ModelKind::Tfic,
            n_sites: 6,
            coupling: 1.0,
            field: None,
            beta: Grid::single(1.0),
            gamma: Grid::single(1.0),
            lambda: Grid {
                source: String::new(),
                points: Vec::new(),
            },
            lambda_max: 0.2,
            n_records: 101,
            alpha: 1.0,
            out: None,
            format: Format::Csv,
            verify_only: Vec::new(),
            verify_dynamics_n_sites: 8,
        }
    }
}

impl RunConfig {
    /// Applies one dotted key. Unknown keys are errors.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value.trim();
        match key.trim() {
            "model.kind" => self.kind = v.parse()?,
            "model.n_sites" => {
                self.n_sites = v.parse().with_context(|| format!("invalid n_sites {v:?}"))?
            }
            "model.J" => self.coupling = parse_f64(v)?,
            "model.B" => self.field = if v.is_empty() { None } else { Some(parse_f64(v)?) },
            "sweep.beta" => self.beta = v.parse()?,
            "sweep.gamma" => self.gamma = v.parse()?,
            "sweep.lambda" => self.lambda = v.parse()?,
            "sweep.lambda_max" => self.lambda_max = parse_f64(v)?,
            "sweep.n_records" => {
                self.n_records = v.parse().with_context(|| format!("invalid n_records {v:?}"))?
            }
            "alpha" => self.alpha = parse_f64(v)?,
            "output.path" => self.out = if v.is_empty() { None } else { Some(PathBuf::from(v)) },
            "output.format" => self.format = v.parse()?,
            "verify.only" => {
                self.verify_only = v
                    .split(',')
                    .map(|s| s.trim().to_string())
                    .filter(|s| !s.is_empty())
                    .collect()
            }
            "verify.dynamics_n_sites" => {
                self.verify_dynamics_n_sites =
                    v.parse().with_context(|| format!("invalid n_sites {v:?}"))?
            }
            other => bail!("unknown config key {other:?}"),
        }
        Ok(())
    }

    /// Parses `key = value` lines; `#` starts a comment, `[section]`
    /// headers prefix the following keys.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        let mut section = String::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
                section = name.trim().to_string();
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| anyhow!("line {}: expected key = value", lineno + 1))?;
            let key = key.trim();
            let full = if section.is_empty() || key.contains('.') {
                key.to_string()
            } else {
                format!("{section}.{key}")
            };
            self.set(&full, value)
                .with_context(|| format!("line {}", lineno + 1))?;
        }
        Ok(())
    }

    pub fn model(&self) -> Result<SpinChainModel> {
        let field = if self.kind == ModelKind::Mfic { self.field } else { None };
        Ok(SpinChainModel::new(self.kind, self.n_sites, self.coupling, field)?)
    }

    pub fn validate_grids(&self) -> Result<()> {
        if self.beta.points().is_empty() {
            bail!("beta grid is empty");
        }
        if self.gamma.points().is_empty() {
            bail!("gamma grid is empty");
        }
        if let Some(b) = self.beta.points().iter().find(|b| **b < 0.0) {
            bail!("beta must be non-negative, got {b}");
        }
        if let Some(g) = self.gamma.points().iter().find(|g| **g <= 0.0) {
            bail!("gamma must be positive, got {g}");
        }
        if !(self.alpha > 0.0) {
            bail!("alpha must be positive, got {}", self.alpha);
        }
        Ok(())
    }

    /// Resolved settings as `key = value` lines for file headers.
    pub fn echo(&self) -> Vec<String> {
        let mut lines = vec![
            format!("model.kind = {}", self.kind),
            format!("model.n_sites = {}", self.n_sites),
            format!("model.J = {}", self.coupling),
        ];
        if self.kind == ModelKind::Mfic {
            lines.push(format!(
                "model.B = {}",
                self.field.map(|b| b.to_string()).unwrap_or_default()
            ));
        }
        lines.extend([
            format!("sweep.beta = {}", self.beta),
            format!("sweep.gamma = {}", self.gamma),
            format!("sweep.lambda = {}", self.lambda),
            format!("sweep.lambda_max = {}", self.lambda_max),
            format!("sweep.n_records = {}", self.n_records),
            format!("alpha = {}", self.alpha),
        ]);
        lines
    }
}
