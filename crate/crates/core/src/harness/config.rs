use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::optim::{AdamWHyper, MuonLiteHyper, PionConfig, SgdHyper};
use crate::problems::{self, Problem};

fn default_ls_samples() -> usize {
    64
}

fn default_mlp_samples() -> usize {
    128
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LeastSquaresSpec {
    pub d_out: usize,
    pub d_in: usize,
    #[serde(default = "default_ls_samples")]
    pub n_samples: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProcrustesSpec {
    pub d: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MlpSpec {
    pub widths: Vec<usize>,
    pub depth: usize,
    #[serde(default = "default_mlp_samples")]
    pub n_samples: usize,
}

/// Problem family and size; the data and initial weights come from the
/// run seed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProblemSpec {
    LeastSquares(LeastSquaresSpec),
    Procrustes(ProcrustesSpec),
    Mlp(MlpSpec),
}

impl ProblemSpec {
    pub fn build(&self, seed: u64) -> Result<Box<dyn Problem>> {
        match self {
            ProblemSpec::LeastSquares(s) => {
                if s.d_out == 0 || s.d_in == 0 || s.n_samples == 0 {
                    return Err(Error::Config("least_squares dimensions must be positive".into()));
                }
                Ok(Box::new(problems::least_squares(s.d_out, s.d_in, s.n_samples, seed)))
            }
            ProblemSpec::Procrustes(s) => {
                if s.d < 2 {
                    return Err(Error::Config(format!("procrustes needs d >= 2, got {}", s.d)));
                }
                Ok(Box::new(problems::procrustes(s.d, seed)))
            }
            ProblemSpec::Mlp(s) => problems::mlp(&s.widths, s.depth, s.n_samples, seed)
                .map(|p| Box::new(p) as Box<dyn Problem>)
                .map_err(|e| Error::Config(e.to_string())),
        }
    }

    /// The same family resized to a square `width`.
    pub fn with_width(&self, width: usize) -> ProblemSpec {
        match self {
            ProblemSpec::LeastSquares(s) => ProblemSpec::LeastSquares(LeastSquaresSpec {
                d_out: width,
                d_in: width,
                n_samples: s.n_samples,
            }),
            ProblemSpec::Procrustes(_) => ProblemSpec::Procrustes(ProcrustesSpec { d: width }),
            ProblemSpec::Mlp(s) => ProblemSpec::Mlp(MlpSpec {
                widths: vec![width],
                depth: s.depth,
                n_samples: s.n_samples,
            }),
        }
    }

    /// Representative width for summaries: the largest layer dimension.
    pub fn width(&self) -> usize {
        match self {
            ProblemSpec::LeastSquares(s) => s.d_out.max(s.d_in),
            ProblemSpec::Procrustes(s) => s.d,
            ProblemSpec::Mlp(s) => s.widths.iter().copied().max().unwrap_or(0),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptimizerSpec {
    Pion(PionConfig),
    Sgd(SgdHyper),
    Adamw(AdamWHyper),
    MuonLite(MuonLiteHyper),
}

impl OptimizerSpec {
    pub fn lr(&self) -> f64 {
        match self {
            OptimizerSpec::Pion(c) => c.lr,
            OptimizerSpec::Sgd(h) => h.lr,
            OptimizerSpec::Adamw(h) => h.lr,
            OptimizerSpec::MuonLite(h) => h.lr,
        }
    }

    pub fn with_lr(&self, lr: f64) -> OptimizerSpec {
        let mut out = self.clone();
        match &mut out {
            OptimizerSpec::Pion(c) => c.lr = lr,
            OptimizerSpec::Sgd(h) => h.lr = lr,
            OptimizerSpec::Adamw(h) => h.lr = lr,
            OptimizerSpec::MuonLite(h) => h.lr = lr,
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        let positive_lr = |lr: f64| {
            if lr > 0.0 && lr.is_finite() {
                Ok(())
            } else {
                Err(Error::Config(format!("lr must be positive and finite, got {lr}")))
            }
        };
        match self {
            OptimizerSpec::Pion(c) => c.validate(),
            OptimizerSpec::Sgd(h) => positive_lr(h.lr),
            OptimizerSpec::Adamw(h) => positive_lr(h.lr),
            OptimizerSpec::MuonLite(h) => positive_lr(h.lr),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LrSchedule {
    Constant,
    /// Half-cosine from the base rate down to `floor_fraction` of it.
    Cosine { floor_fraction: f64 },
}

impl LrSchedule {
    pub const DEFAULT_FLOOR: f64 = 0.01;

    /// Learning rate at step `t` (1-based) of `steps`.
    pub fn lr_at(&self, base: f64, t: usize, steps: usize) -> f64 {
        match *self {
            LrSchedule::Constant => base,
            LrSchedule::Cosine { floor_fraction } => {
                let progress = if steps <= 1 {
                    0.0
                } else {
                    (t.saturating_sub(1)) as f64 / (steps - 1) as f64
                };
                let cos = 0.5 * (1.0 + (std::f64::consts::PI * progress).cos());
                base * (floor_fraction + (1.0 - floor_fraction) * cos)
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub problem: ProblemSpec,
    pub optimizer: OptimizerSpec,
    pub steps: usize,
    #[serde(default = "one")]
    pub record_every: usize,
    #[serde(default = "constant")]
    pub lr_schedule: LrSchedule,
    #[serde(default)]
    pub seed: u64,
}

fn one() -> usize {
    1
}

fn constant() -> LrSchedule {
    LrSchedule::Constant
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if self.steps == 0 {
            return Err(Error::Config("steps must be at least 1".into()));
        }
        if self.record_every == 0 {
            return Err(Error::Config("record_every must be at least 1".into()));
        }
        if let LrSchedule::Cosine { floor_fraction } = self.lr_schedule {
            if !(floor_fraction > 0.0 && floor_fraction <= 1.0) {
                return Err(Error::Config(format!("floor_fraction must lie in (0, 1], got {floor_fraction}")));
            }
        }
        self.optimizer.validate()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config is always serializable")
    }
}

fn parse_error(e: serde_json::Error) -> Error {
    Error::Parse {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    }
}

/// Parses a JSON run configuration; unknown fields are rejected.
pub fn config_parse(text: &str) -> Result<RunConfig> {
    let cfg: RunConfig = serde_json::from_str(text).map_err(parse_error)?;
    cfg.validate()?;
    Ok(cfg)
}

/// Parses `text`, then applies `key=value` overrides on top.
///
/// A key is either a dotted path from the root (`optimizer.pion.lr`) or a
/// bare field name that must occur exactly once anywhere in the fully
/// populated config (`lr`, `steps`). Values are read as JSON when they parse
/// as JSON, otherwise as strings.
pub fn config_parse_with_overrides(text: &str, overrides: &[(String, String)]) -> Result<RunConfig> {
    let cfg: RunConfig = serde_json::from_str(text).map_err(parse_error)?;
    if overrides.is_empty() {
        cfg.validate()?;
        return Ok(cfg);
    }
    let mut tree = serde_json::to_value(&cfg).expect("config is always serializable");
    for (key, raw) in overrides {
        let value: Value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.clone()));
        let path = resolve_key(&tree, key)?;
        let slot = path
            .iter()
            .try_fold(&mut tree, |node, seg| node.get_mut(seg.as_str()))
            .ok_or_else(|| Error::Config(format!("override key `{key}` does not name a config field")))?;
        *slot = value;
    }
    let cfg: RunConfig = serde_json::from_value(tree)
        .map_err(|e| Error::Config(format!("override produced an invalid config: {e}")))?;
    cfg.validate()?;
    Ok(cfg)
}

fn resolve_key(tree: &Value, key: &str) -> Result<Vec<String>> {
    if key.contains('.') {
        let path: Vec<String> = key.split('.').map(str::to_owned).collect();
        let exists = path.iter().try_fold(tree, |node, seg| node.get(seg.as_str())).is_some();
        return if exists {
            Ok(path)
        } else {
            Err(Error::Config(format!("override key `{key}` does not name a config field")))
        };
    }
    let mut hits = Vec::new();
    find_key(tree, key, &mut Vec::new(), &mut hits);
    match hits.len() {
        1 => Ok(hits.pop().expect("one hit")),
        0 => Err(Error::Config(format!("override key `{key}` does not name a config field"))),
        _ => Err(Error::Config(format!(
            "override key `{key}` is ambiguous; use a dotted path such as {}",
            hits.iter().map(|p| p.join(".")).collect::<Vec<_>>().join(" or ")
        ))),
    }
}

fn find_key(node: &Value, key: &str, prefix: &mut Vec<String>, hits: &mut Vec<Vec<String>>) {
    if let Value::Object(map) = node {
        for (k, v) in map {
            prefix.push(k.clone());
            if k == key {
                hits.push(prefix.clone());
            }
            find_key(v, key, prefix, hits);
            prefix.pop();
        }
    }
}
