//! Sweep specifications.
//!
//! Two surface syntaxes feed one validator. The line format is
//!
//! ```text
//! # comment
//! M = 30
//! N = 15
//! p = 0.15
//! mu = 1
//! axis = p
//! values = 0.05, 0.1, 0.15
//! policies = mwcs:n=3, mc, rnd
//! trials = 2000
//! seed = 7
//! ```
//!
//! and a JSON object with the same keys (`values` and `policies` as arrays)
//! is accepted when the file starts with `{`. Unknown or repeated keys are
//! errors. Recognised keys:
//!
//! | key | meaning | default |
//! |---|---|---|
//! | `M`, `N` | receivers, frame size | required |
//! | `p` | mean erasure probability | 0.15 |
//! | `mu` | mean demand ratio | 1 |
//! | `axis` | one of `mu`, `M`, `N`, `p` | `p` |
//! | `values` | axis values | the base value of `axis` |
//! | `policies` | `rnd`, `mc`, `mc-heur`, `mwcs:n=k`, `mwvs:n=k`, `rnc` | `mwcs:n=3, mc, rnd` |
//! | `trials` | trials per cell | 1000 |
//! | `seed` | master seed shared by every cell | 0 |
//! | `out` | CSV path | stdout |
//! | `include_initial` | add the N initial slots to each delay | false |
//! | `secondary_weight` | `psi-tilde` or `q-psi` | `psi-tilde` |
//! | `erasure_spread`, `demand_spread` | relative half-width of the per-receiver draws | 0.5 |
//! | `max_slots` | per-trial slot cap | derived from M, N and p |
//! | `search_vertices` | largest candidate set an exact clique search accepts | 200 |
//! | `search_nodes` | expanded nodes before an exact search gives up | 10000000 |
//! | `fallback` | use the greedy search when an exact one exceeds its limits | false |

use std::path::PathBuf;

use idnc_core::policies::SecondaryWeight;
use idnc_core::sim::{Heterogeneity, SimConfig};
use idnc_core::{Axis, PolicyKind};
use serde::{Deserialize, Deserializer};
use serde_json::{Map, Value};

use crate::CliError;

const LIST_KEYS: [&str; 2] = ["values", "policies"];
const DEFAULT_POLICIES: [&str; 3] = ["mwcs:n=3", "mc", "rnd"];

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSpec {
    #[serde(rename = "M", default, deserialize_with = "count")]
    receivers: Option<u64>,
    #[serde(rename = "N", default, deserialize_with = "count")]
    frame_size: Option<u64>,
    p: Option<f64>,
    mu: Option<f64>,
    axis: Option<String>,
    values: Option<Vec<f64>>,
    policies: Option<Vec<String>>,
    #[serde(default, deserialize_with = "count")]
    trials: Option<u64>,
    seed: Option<u64>,
    out: Option<PathBuf>,
    include_initial: Option<bool>,
    secondary_weight: Option<String>,
    erasure_spread: Option<f64>,
    demand_spread: Option<f64>,
    #[serde(default, deserialize_with = "count")]
    max_slots: Option<u64>,
    #[serde(default, deserialize_with = "count")]
    search_vertices: Option<u64>,
    #[serde(default, deserialize_with = "count")]
    search_nodes: Option<u64>,
    fallback: Option<bool>,
}

/// Accepts integers and integral floats such as `1e5`.
fn count<'de, D: Deserializer<'de>>(d: D) -> Result<Option<u64>, D::Error> {
    let v = Value::deserialize(d)?;
    let n = v.as_u64().or_else(|| v.as_f64().filter(|x| *x >= 0.0 && x.fract() == 0.0 && *x < 9e15).map(|x| x as u64));
    n.map(Some).ok_or_else(|| serde::de::Error::custom(format!("expected a non-negative integer, got {v}")))
}

/// Command-line values that take precedence over the file.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub trials: Option<u64>,
    pub out: Option<PathBuf>,
    pub include_initial: bool,
    pub secondary_weight: Option<SecondaryWeight>,
}

/// A validated sweep: every `(value, policy)` cell is a valid `SimConfig`.
#[derive(Clone, Debug)]
pub struct ExperimentSpec {
    pub base: SimConfig,
    pub axis: Axis,
    pub values: Vec<f64>,
    pub policies: Vec<PolicyKind>,
    pub out: Option<PathBuf>,
}

impl ExperimentSpec {
    pub fn parse(text: &str, overrides: &Overrides) -> Result<Self, CliError> {
        let object = if text.trim_start().starts_with('{') {
            serde_json::from_str::<Value>(text).map_err(|e| CliError::Config(format!("invalid JSON: {e}")))?
        } else {
            Value::Object(key_value_object(text)?)
        };
        let raw: RawSpec = serde_json::from_value(object).map_err(CliError::config)?;
        Self::validate(raw, overrides)
    }

    fn validate(raw: RawSpec, o: &Overrides) -> Result<Self, CliError> {
        let require = |v: Option<u64>, key: &str| {
            v.filter(|&n| n > 0)
                .map(|n| n as usize)
                .ok_or_else(|| CliError::Config(format!("{key} must be given as a positive integer")))
        };
        let receivers = require(raw.receivers, "M")?;
        let frame_size = require(raw.frame_size, "N")?;
        let policies = raw
            .policies
            .unwrap_or_else(|| DEFAULT_POLICIES.iter().map(|s| s.to_string()).collect())
            .iter()
            .map(|s| s.parse::<PolicyKind>().map_err(CliError::config))
            .collect::<Result<Vec<_>, _>>()?;
        if policies.is_empty() {
            return Err(CliError::Config("policies must not be empty".into()));
        }

        let mut base = SimConfig::new(receivers, frame_size, raw.p.unwrap_or(0.15), raw.mu.unwrap_or(1.0), policies[0]);
        base.trials = o.trials.or(raw.trials).unwrap_or(1000);
        base.master_seed = o.seed.or(raw.seed).unwrap_or(0);
        base.include_initial = o.include_initial || raw.include_initial.unwrap_or(false);
        base.max_slots = raw.max_slots.map(|n| n as usize);
        let defaults = Heterogeneity::default();
        base.heterogeneity = Heterogeneity {
            erasure_spread: raw.erasure_spread.unwrap_or(defaults.erasure_spread),
            demand_spread: raw.demand_spread.unwrap_or(defaults.demand_spread),
        };
        for (key, s) in
            [("erasure_spread", base.heterogeneity.erasure_spread), ("demand_spread", base.heterogeneity.demand_spread)]
        {
            if !(0.0..=1.0).contains(&s) {
                return Err(CliError::Config(format!("{key} must lie in [0, 1], got {s}")));
            }
        }
        let limits = &mut base.options.limits;
        limits.max_vertices = raw.search_vertices.map_or(limits.max_vertices, |n| n as usize);
        limits.max_nodes = raw.search_nodes.unwrap_or(limits.max_nodes);
        base.options.fallback_to_heuristic = raw.fallback.unwrap_or(false);
        base.options.secondary_weight = match (o.secondary_weight, raw.secondary_weight) {
            (Some(w), _) => w,
            (None, Some(s)) => s.parse().map_err(CliError::config)?,
            (None, None) => SecondaryWeight::default(),
        };

        let (axis, values) = match (raw.axis, raw.values) {
            (Some(a), Some(v)) => (a.parse::<Axis>().map_err(CliError::config)?, v),
            (None, None) => (Axis::Erasure, vec![base.mean_erasure]),
            (Some(_), None) => return Err(CliError::Config("axis given without values".into())),
            (None, Some(_)) => return Err(CliError::Config("values given without axis".into())),
        };
        if values.is_empty() {
            return Err(CliError::Config("values must not be empty".into()));
        }
        for &v in &values {
            let at = axis.apply(&base, v).map_err(CliError::config)?;
            for &policy in &policies {
                SimConfig { policy, ..at.clone() }
                    .validate()
                    .map_err(|e| CliError::Config(format!("{axis} = {v}, policy {policy}: {e}")))?;
            }
        }
        Ok(Self { base, axis, values, policies, out: o.out.clone().or(raw.out) })
    }
}

/// Lines of `key = value` as a JSON object, typing scalars the way JSON
/// would (numbers, booleans) and leaving everything else a string.
fn key_value_object(text: &str) -> Result<Map<String, Value>, CliError> {
    let mut map = Map::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| CliError::Config(format!("line {}: expected `key = value`, got {line:?}", n + 1)))?;
        let key = key.trim();
        let value = value.trim();
        let parsed = if LIST_KEYS.contains(&key) {
            Value::Array(value.split(',').map(str::trim).filter(|s| !s.is_empty()).map(scalar).collect())
        } else {
            scalar(value)
        };
        if map.insert(key.to_string(), parsed).is_some() {
            return Err(CliError::Config(format!("line {}: key {key:?} repeated", n + 1)));
        }
    }
    Ok(map)
}

fn scalar(s: &str) -> Value {
    match serde_json::from_str::<Value>(s) {
        Ok(v @ (Value::Number(_) | Value::Bool(_))) => v,
        _ => Value::String(s.to_string()),
    }
}
