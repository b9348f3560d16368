//! Experiment specifications: a flat, auditable key-value text format
//! naming the environment, seeding, and every training hyperparameter.
//!
//! The format is line-based: `key = value` pairs, `#` comment lines, and
//! two optional sections `[train]` and `[value]`. Serialization writes
//! every field in a fixed order, and parsing a serialized spec returns an
//! identical structure, so run directories always carry an exact,
//! re-runnable record of their configuration.

use crate::envs::{DstEnv, FtnEnv, LqgEnv, MinecartEnv, MoEnv};
use crate::error::{Error, Result};
use crate::scoring::{AvgMode, Normalization};
use crate::trainer::{TrainConfig, ValueConfig, Variant};
use std::collections::BTreeMap;
use std::fmt;

/// Leaf-table seed used when an FTN spec does not name one.
pub const DEFAULT_LEAF_SEED: u64 = 7;

/// The benchmark environments addressable from a spec.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EnvKind {
    DstConvex,
    DstOriginal,
    Ftn5,
    Ftn6,
    Ftn7,
    Lqg2,
    Lqg3,
    Minecart,
}

impl EnvKind {
    pub const ALL: [EnvKind; 8] = [
        EnvKind::DstConvex,
        EnvKind::DstOriginal,
        EnvKind::Ftn5,
        EnvKind::Ftn6,
        EnvKind::Ftn7,
        EnvKind::Lqg2,
        EnvKind::Lqg3,
        EnvKind::Minecart,
    ];

    pub fn id(self) -> &'static str {
        match self {
            EnvKind::DstConvex => "dst-convex",
            EnvKind::DstOriginal => "dst-original",
            EnvKind::Ftn5 => "ftn5",
            EnvKind::Ftn6 => "ftn6",
            EnvKind::Ftn7 => "ftn7",
            EnvKind::Lqg2 => "lqg2d",
            EnvKind::Lqg3 => "lqg3d",
            EnvKind::Minecart => "minecart",
        }
    }

    pub fn parse(id: &str) -> Result<EnvKind> {
        EnvKind::ALL
            .into_iter()
            .find(|k| k.id() == id)
            .ok_or_else(|| {
                let known: Vec<&str> = EnvKind::ALL.iter().map(|k| k.id()).collect();
                Error::Parse(format!(
                    "unknown environment {id:?} (known: {})",
                    known.join(", ")
                ))
            })
    }

    fn ftn_depth(self) -> Option<usize> {
        match self {
            EnvKind::Ftn5 => Some(5),
            EnvKind::Ftn6 => Some(6),
            EnvKind::Ftn7 => Some(7),
            _ => None,
        }
    }
}

impl fmt::Display for EnvKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

/// A complete, serializable experiment description.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub env: EnvKind,
    /// Master seed of the first run.
    pub seed: u64,
    /// Number of independent runs (seeds `seed .. seed + runs`).
    pub runs: usize,
    /// LQG process-noise level (ignored by other environments).
    pub lqg_sigma: f64,
    /// Seed of the generated FTN leaf table (ignored elsewhere).
    pub ftn_leaf_seed: u64,
    /// Optional path to an external FTN leaf-table CSV; overrides the
    /// generated table.
    pub ftn_leaf_csv: Option<String>,
    pub train: TrainConfig,
}

impl ExperimentSpec {
    /// Instantiate the environment this spec names.
    pub fn make_env(&self) -> Result<Box<dyn MoEnv>> {
        Ok(match self.env {
            EnvKind::DstConvex => Box::new(DstEnv::convex()),
            EnvKind::DstOriginal => Box::new(DstEnv::original()),
            EnvKind::Ftn5 | EnvKind::Ftn6 | EnvKind::Ftn7 => {
                let depth = self.env.ftn_depth().expect("ftn variant");
                match &self.ftn_leaf_csv {
                    Some(path) => {
                        let text = std::fs::read_to_string(path)?;
                        Box::new(FtnEnv::from_csv(depth, &text)?)
                    }
                    None => Box::new(FtnEnv::generated(depth, self.ftn_leaf_seed)),
                }
            }
            EnvKind::Lqg2 => Box::new(LqgEnv::new(2, self.lqg_sigma)?),
            EnvKind::Lqg3 => Box::new(LqgEnv::new(3, self.lqg_sigma)?),
            EnvKind::Minecart => Box::new(MinecartEnv::bundled()),
        })
    }

    /// Serialize to the canonical key-value text.
    pub fn to_text(&self) -> String {
        let t = &self.train;
        let mut out = String::new();
        out.push_str("# experiment specification\n");
        kv(&mut out, "env", self.env.id());
        kv(&mut out, "seed", self.seed);
        kv(&mut out, "runs", self.runs);
        kv(&mut out, "lqg_sigma", self.lqg_sigma);
        kv(&mut out, "ftn_leaf_seed", self.ftn_leaf_seed);
        if let Some(path) = &self.ftn_leaf_csv {
            kv(&mut out, "ftn_leaf_csv", path);
        }
        out.push_str("\n[train]\n");
        kv(
            &mut out,
            "variant",
            match t.variant {
                Variant::Pg => "pg",
                Variant::PgV => "pg-v",
            },
        );
        kv(&mut out, "d_lat", t.d_lat);
        kv(&mut out, "n_lat", t.n_lat);
        kv(&mut out, "n_lat_test", t.n_lat_test);
        kv(&mut out, "latent_k", t.latent_k);
        kv(
            &mut out,
            "state_embed",
            match &t.state_embed {
                None => "none".to_string(),
                Some(widths) => join_usizes(widths),
            },
        );
        kv(&mut out, "k", t.k);
        kv(&mut out, "beta", t.beta);
        kv(&mut out, "gamma", t.gamma);
        kv(
            &mut out,
            "normalization",
            match t.normalization {
                Normalization::Standard => "standard",
                Normalization::Robust => "robust",
                Normalization::MaxMin => "maxmin",
            },
        );
        kv(
            &mut out,
            "avg",
            match t.avg {
                None => "default",
                Some(AvgMode::Mean) => "mean",
                Some(AvgMode::Median) => "median",
            },
        );
        kv(&mut out, "iterations", t.iterations);
        kv(&mut out, "width", t.width);
        kv(&mut out, "depth", t.depth);
        kv(&mut out, "max_steps_train", t.max_steps_train);
        kv(&mut out, "max_steps_test", t.max_steps_test);
        kv(&mut out, "eval_episodes", t.eval_episodes);
        kv(&mut out, "eval_every", t.eval_every);
        kv(&mut out, "ref_point", join_f64s(&t.ref_point));
        kv(&mut out, "clip_weights", t.clip_weights);
        kv(&mut out, "lr", t.lr);
        if let Some(v) = &t.value {
            out.push_str("\n[value]\n");
            kv(&mut out, "epochs", v.epochs);
            kv(&mut out, "batch", v.batch);
            kv(&mut out, "width", v.width);
            kv(&mut out, "depth", v.depth);
        }
        out
    }

    /// Parse the key-value text format.
    pub fn parse(text: &str) -> Result<ExperimentSpec> {
        let mut sections: BTreeMap<String, BTreeMap<String, String>> = BTreeMap::new();
        let mut current = String::new();
        sections.insert(String::new(), BTreeMap::new());
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if let Some(name) = line.strip_prefix('[').and_then(|s| s.strip_suffix(']')) {
                let name = name.trim().to_string();
                if name != "train" && name != "value" {
                    return Err(Error::Parse(format!(
                        "line {}: unknown section [{name}]",
                        lineno + 1
                    )));
                }
                if sections.contains_key(&name) {
                    return Err(Error::Parse(format!(
                        "line {}: duplicate section [{name}]",
                        lineno + 1
                    )));
                }
                sections.insert(name.clone(), BTreeMap::new());
                current = name;
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Parse(format!("line {}: expected `key = value`", lineno + 1))
            })?;
            let key = key.trim().to_string();
            let value = value.trim().to_string();
            let section = sections.get_mut(&current).expect("current section exists");
            if section.insert(key.clone(), value).is_some() {
                return Err(Error::Parse(format!(
                    "line {}: duplicate key {key:?}",
                    lineno + 1
                )));
            }
        }

        let mut top = sections.remove("").expect("top section");
        let mut train = sections
            .remove("train")
            .ok_or_else(|| Error::Parse("missing [train] section".into()))?;
        let value_section = sections.remove("value");

        let env = EnvKind::parse(&take(&mut top, "env")?)?;
        let seed = parse_num::<u64>(&take(&mut top, "seed")?, "seed")?;
        let runs = parse_num::<usize>(&take(&mut top, "runs")?, "runs")?;
        let lqg_sigma = parse_num::<f64>(&take(&mut top, "lqg_sigma")?, "lqg_sigma")?;
        let ftn_leaf_seed =
            parse_num::<u64>(&take(&mut top, "ftn_leaf_seed")?, "ftn_leaf_seed")?;
        let ftn_leaf_csv = top.remove("ftn_leaf_csv");
        reject_unknown(&top, "top level")?;

        let variant = match take(&mut train, "variant")?.as_str() {
            "pg" => Variant::Pg,
            "pg-v" => Variant::PgV,
            other => {
                return Err(Error::Parse(format!(
                    "variant must be `pg` or `pg-v`, got {other:?}"
                )))
            }
        };
        let state_embed = match take(&mut train, "state_embed")?.as_str() {
            "none" => None,
            list => Some(parse_usizes(list, "state_embed")?),
        };
        let normalization = match take(&mut train, "normalization")?.as_str() {
            "standard" => Normalization::Standard,
            "robust" => Normalization::Robust,
            "maxmin" => Normalization::MaxMin,
            other => {
                return Err(Error::Parse(format!(
                    "normalization must be standard|robust|maxmin, got {other:?}"
                )))
            }
        };
        let avg = match take(&mut train, "avg")?.as_str() {
            "default" => None,
            "mean" => Some(AvgMode::Mean),
            "median" => Some(AvgMode::Median),
            other => {
                return Err(Error::Parse(format!(
                    "avg must be default|mean|median, got {other:?}"
                )))
            }
        };
        let clip_weights = parse_bool(&take(&mut train, "clip_weights")?, "clip_weights")?;
        let cfg = TrainConfig {
            d_lat: parse_num(&take(&mut train, "d_lat")?, "d_lat")?,
            n_lat: parse_num(&take(&mut train, "n_lat")?, "n_lat")?,
            n_lat_test: parse_num(&take(&mut train, "n_lat_test")?, "n_lat_test")?,
            latent_k: parse_num(&take(&mut train, "latent_k")?, "latent_k")?,
            state_embed,
            k: parse_num(&take(&mut train, "k")?, "k")?,
            beta: parse_num(&take(&mut train, "beta")?, "beta")?,
            gamma: parse_num(&take(&mut train, "gamma")?, "gamma")?,
            normalization,
            avg,
            iterations: parse_num(&take(&mut train, "iterations")?, "iterations")?,
            width: parse_num(&take(&mut train, "width")?, "width")?,
            depth: parse_num(&take(&mut train, "depth")?, "depth")?,
            max_steps_train: parse_num(&take(&mut train, "max_steps_train")?, "max_steps_train")?,
            max_steps_test: parse_num(&take(&mut train, "max_steps_test")?, "max_steps_test")?,
            eval_episodes: parse_num(&take(&mut train, "eval_episodes")?, "eval_episodes")?,
            eval_every: parse_num(&take(&mut train, "eval_every")?, "eval_every")?,
            ref_point: parse_f64s(&take(&mut train, "ref_point")?, "ref_point")?,
            variant,
            value: match value_section {
                None => None,
                Some(mut v) => {
                    let vc = ValueConfig {
                        epochs: parse_num(&take(&mut v, "epochs")?, "value.epochs")?,
                        batch: parse_num(&take(&mut v, "batch")?, "value.batch")?,
                        width: parse_num(&take(&mut v, "width")?, "value.width")?,
                        depth: parse_num(&take(&mut v, "depth")?, "value.depth")?,
                    };
                    reject_unknown(&v, "[value]")?;
                    Some(vc)
                }
            },
            clip_weights,
            lr: parse_num(&take(&mut train, "lr")?, "lr")?,
        };
        reject_unknown(&train, "[train]")?;
        Ok(ExperimentSpec {
            env,
            seed,
            runs,
            lqg_sigma,
            ftn_leaf_seed,
            ftn_leaf_csv,
            train: cfg,
        })
    }

    /// Apply one `key=value` override. Top-level and `[train]` keys go by
    /// their plain names; value-network keys use a `value.` prefix.
    pub fn apply_override(&mut self, key: &str, value: &str) -> Result<()> {
        let t = &mut self.train;
        match key {
            "env" => self.env = EnvKind::parse(value)?,
            "seed" => self.seed = parse_num(value, key)?,
            "runs" => self.runs = parse_num(value, key)?,
            "lqg_sigma" => self.lqg_sigma = parse_num(value, key)?,
            "ftn_leaf_seed" => self.ftn_leaf_seed = parse_num(value, key)?,
            "ftn_leaf_csv" => {
                self.ftn_leaf_csv = if value.is_empty() {
                    None
                } else {
                    Some(value.to_string())
                }
            }
            "variant" => {
                t.variant = match value {
                    "pg" => Variant::Pg,
                    "pg-v" => Variant::PgV,
                    _ => return Err(Error::Parse("variant must be pg|pg-v".into())),
                }
            }
            "d_lat" => t.d_lat = parse_num(value, key)?,
            "n_lat" => t.n_lat = parse_num(value, key)?,
            "n_lat_test" => t.n_lat_test = parse_num(value, key)?,
            "latent_k" => t.latent_k = parse_num(value, key)?,
            "state_embed" => {
                t.state_embed = if value == "none" {
                    None
                } else {
                    Some(parse_usizes(value, key)?)
                }
            }
            "k" => t.k = parse_num(value, key)?,
            "beta" => t.beta = parse_num(value, key)?,
            "gamma" => t.gamma = parse_num(value, key)?,
            "normalization" => {
                t.normalization = match value {
                    "standard" => Normalization::Standard,
                    "robust" => Normalization::Robust,
                    "maxmin" => Normalization::MaxMin,
                    _ => {
                        return Err(Error::Parse(
                            "normalization must be standard|robust|maxmin".into(),
                        ))
                    }
                }
            }
            "avg" => {
                t.avg = match value {
                    "default" => None,
                    "mean" => Some(AvgMode::Mean),
                    "median" => Some(AvgMode::Median),
                    _ => return Err(Error::Parse("avg must be default|mean|median".into())),
                }
            }
            "iterations" => t.iterations = parse_num(value, key)?,
            "width" => t.width = parse_num(value, key)?,
            "depth" => t.depth = parse_num(value, key)?,
            "max_steps_train" => t.max_steps_train = parse_num(value, key)?,
            "max_steps_test" => t.max_steps_test = parse_num(value, key)?,
            "eval_episodes" => t.eval_episodes = parse_num(value, key)?,
            "eval_every" => t.eval_every = parse_num(value, key)?,
            "ref_point" => t.ref_point = parse_f64s(value, key)?,
            "clip_weights" => t.clip_weights = parse_bool(value, key)?,
            "lr" => t.lr = parse_num(value, key)?,
            "value.epochs" | "value.batch" | "value.width" | "value.depth" => {
                let v = t.value.get_or_insert(ValueConfig {
                    epochs: 1,
                    batch: 64,
                    width: 24,
                    depth: 3,
                });
                match key {
                    "value.epochs" => v.epochs = parse_num(value, key)?,
                    "value.batch" => v.batch = parse_num(value, key)?,
                    "value.width" => v.width = parse_num(value, key)?,
                    _ => v.depth = parse_num(value, key)?,
                }
            }
            _ => {
                return Err(Error::Parse(format!(
                    "unknown override key {key:?}"
                )))
            }
        }
        Ok(())
    }
}

fn kv(out: &mut String, key: &str, value: impl fmt::Display) {
    out.push_str(key);
    out.push_str(" = ");
    out.push_str(&value.to_string());
    out.push('\n');
}

fn take(section: &mut BTreeMap<String, String>, key: &str) -> Result<String> {
    section
        .remove(key)
        .ok_or_else(|| Error::Parse(format!("missing required key {key:?}")))
}

fn reject_unknown(section: &BTreeMap<String, String>, where_: &str) -> Result<()> {
    if let Some(key) = section.keys().next() {
        return Err(Error::Parse(format!("unknown key {key:?} in {where_}")));
    }
    Ok(())
}

fn parse_num<T: std::str::FromStr>(value: &str, key: &str) -> Result<T> {
    value
        .parse::<T>()
        .map_err(|_| Error::Parse(format!("{key}: {value:?} is not a valid number")))
}

fn parse_bool(value: &str, key: &str) -> Result<bool> {
    match value {
        "true" => Ok(true),
        "false" => Ok(false),
        _ => Err(Error::Parse(format!("{key}: expected true|false, got {value:?}"))),
    }
}

fn parse_usizes(value: &str, key: &str) -> Result<Vec<usize>> {
    value
        .split(',')
        .map(|s| parse_num::<usize>(s.trim(), key))
        .collect()
}

fn parse_f64s(value: &str, key: &str) -> Result<Vec<f64>> {
    value
        .split(',')
        .map(|s| parse_num::<f64>(s.trim(), key))
        .collect()
}

fn join_usizes(values: &[usize]) -> String {
    values
        .iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join(",")
}

fn join_f64s(values: &[f64]) -> String {
    values
        .iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join(",")
}
