//! Experiment specs and their TOML/JSON config documents.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::catalog::{find, ExperimentInfo, ParamKind};
use crate::{Error, Result};

/// Sweep over a cartesian parameter grid.
#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentSpec {
    /// Canonical experiment name (aliases resolved).
    pub experiment: String,
    /// Value lists in catalog order; every catalog parameter is present.
    pub grid: Vec<(String, Vec<String>)>,
    pub seed: u64,
    /// 0 enumerates all branches; otherwise the number of sampled runs per point.
    pub trials: u64,
    pub out: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Scalar {
    Int(i64),
    Float(f64),
    Bool(bool),
    Text(String),
}

impl Scalar {
    fn render(&self) -> String {
        match self {
            Scalar::Int(i) => i.to_string(),
            Scalar::Float(f) => format!("{f:?}"),
            Scalar::Bool(b) => u8::from(*b).to_string(),
            Scalar::Text(s) => s.clone(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ParamValue {
    One(Scalar),
    Many(Vec<Scalar>),
}

/// On-disk form shared by both config formats.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigDoc {
    pub experiment: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trials: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<String>,
    #[serde(default)]
    pub params: BTreeMap<String, ParamValue>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ConfigFormat {
    Toml,
    Json,
}

impl ConfigFormat {
    pub fn detect(path: &Path, text: &str) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some("json") => ConfigFormat::Json,
            Some("toml") => ConfigFormat::Toml,
            _ if text.trim_start().starts_with('{') => ConfigFormat::Json,
            _ => ConfigFormat::Toml,
        }
    }
}

pub fn parse_config(text: &str, format: ConfigFormat) -> Result<ExperimentSpec> {
    let doc: ConfigDoc = match format {
        ConfigFormat::Toml => toml::from_str(text).map_err(|e| Error::InvalidConfig(e.to_string()))?,
        ConfigFormat::Json => serde_json::from_str(text).map_err(|e| Error::InvalidConfig(e.to_string()))?,
    };
    spec_from_doc(doc)
}

pub fn load_config(path: &Path) -> Result<ExperimentSpec> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    parse_config(&text, ConfigFormat::detect(path, &text))
}

pub fn spec_from_doc(doc: ConfigDoc) -> Result<ExperimentSpec> {
    let raw = doc
        .params
        .into_iter()
        .map(|(k, v)| {
            let vals = match v {
                ParamValue::One(s) => vec![s.render()],
                ParamValue::Many(list) => list.iter().map(Scalar::render).collect(),
            };
            (k, vals)
        })
        .collect();
    build_spec(&doc.experiment, raw, doc.seed.unwrap_or(0), doc.trials.unwrap_or(0), doc.out.map(PathBuf::from))
}

/// Validates names and value syntax, fills defaults and orders the grid.
pub fn build_spec(name: &str, raw: BTreeMap<String, Vec<String>>, seed: u64, trials: u64, out: Option<PathBuf>) -> Result<ExperimentSpec> {
    let info = find(name)?;
    if let Some(unknown) = raw.keys().find(|k| !info.params.iter().any(|p| p.name == k.as_str())) {
        return Err(Error::InvalidParameter(format!("'{unknown}' is not a parameter of {}", info.name)));
    }
    let mut grid = Vec::new();
    for p in info.params {
        let values = match raw.get(p.name) {
            Some(v) if v.is_empty() => return Err(Error::InvalidParameter(format!("{} has an empty value list", p.name))),
            Some(v) => v.clone(),
            None => match p.default {
                Some(d) => vec![d.to_string()],
                None => return Err(Error::InvalidParameter(format!("{} requires --{}", info.name, p.name))),
            },
        };
        for v in &values {
            p.kind.check(p.name, v)?;
        }
        grid.push((p.name.to_string(), values));
    }
    Ok(ExperimentSpec { experiment: info.name.to_string(), grid, seed, trials, out })
}

/// Config document for `spec`; parsing it gives the spec back.
pub fn spec_to_doc(spec: &ExperimentSpec) -> Result<ConfigDoc> {
    let info: &ExperimentInfo = find(&spec.experiment)?;
    let mut params = BTreeMap::new();
    for (name, values) in &spec.grid {
        let kind = info.params.iter().find(|p| p.name == name).map(|p| p.kind).unwrap_or(ParamKind::Real);
        let scalars: Vec<Scalar> = values
            .iter()
            .map(|v| match kind {
                ParamKind::Int => match v.parse::<i64>() {
                    Ok(i) if i.to_string() == *v => Scalar::Int(i),
                    _ => Scalar::Text(v.clone()),
                },
                _ => Scalar::Text(v.clone()),
            })
            .collect();
        let value = if scalars.len() == 1 { ParamValue::One(scalars[0].clone()) } else { ParamValue::Many(scalars) };
        params.insert(name.clone(), value);
    }
    Ok(ConfigDoc {
        experiment: spec.experiment.clone(),
        seed: Some(spec.seed),
        trials: Some(spec.trials),
        out: spec.out.as_ref().map(|p| p.display().to_string()),
        params,
    })
}

pub fn render_config(spec: &ExperimentSpec, format: ConfigFormat) -> Result<String> {
    let doc = spec_to_doc(spec)?;
    match format {
        ConfigFormat::Toml => toml::to_string(&doc).map_err(|e| Error::InvalidConfig(e.to_string())),
        ConfigFormat::Json => serde_json::to_string_pretty(&doc).map_err(|e| Error::InvalidConfig(e.to_string())),
    }
}

/// Parses a real number, also accepting multiples and fractions of pi:
/// "pi", "pi/3", "2pi/3", "2*pi/3", "-pi/4".
pub fn parse_real(s: &str) -> Option<f64> {
    let t = s.trim().to_ascii_lowercase();
    if let Ok(x) = t.parse::<f64>() {
        return x.is_finite().then_some(x);
    }
    let (num, den) = match t.split_once('/') {
        Some((a, b)) => (a.trim().to_string(), b.trim().parse::<f64>().ok()?),
        None => (t.clone(), 1.0),
    };
    let coef = num.strip_suffix("pi")?.trim_end_matches('*').trim();
    let k = match coef {
        "" => 1.0,
        "-" => -1.0,
        c => c.parse::<f64>().ok()?,
    };
    let x = k * std::f64::consts::PI / den;
    x.is_finite().then_some(x)
}
