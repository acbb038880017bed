//! Flat key=value experiment configuration: file parsing, typed resolution
//! with defaults, and emission of the fully-resolved form.

use crate::error::{Error, Result};
use crate::federation::{FederationConfig, Mode, TopologyKind};
use crate::optim::OptimKind;
use std::collections::BTreeMap;
use std::path::Path;
use std::str::FromStr;

pub const KNOWN_KEYS: &[&str] = &[
    "dataset",
    "mode",
    "servers",
    "clients",
    "rounds",
    "local_steps",
    "ae_iters",
    "as_iters",
    "kappa",
    "alpha",
    "beta",
    "k",
    "theta",
    "labeled_ratio",
    "hidden",
    "trace_lambda",
    "optimizer",
    "topology",
    "self_inclusive",
    "eval_on_patched",
    "seed",
    "ae_tol",
    "ae_window",
    "ae_max_outer",
];

/// A dataset reference plus every federation knob.
#[derive(Debug, Clone)]
pub struct RunSpec {
    /// Dataset name (resolved against SPREADFGL_DATA / ./data) or a
    /// directory path.
    pub dataset: String,
    pub cfg: FederationConfig,
}

/// Parses `key=value` lines; `#` starts a comment, blank lines are skipped.
pub fn parse_config_str(text: &str, origin: &str) -> Result<BTreeMap<String, String>> {
    let mut map = BTreeMap::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = match raw.find('#') {
            Some(pos) => &raw[..pos],
            None => raw,
        }
        .trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| Error::Parse {
            path: origin.to_string(),
            line: idx + 1,
            msg: format!("expected key=value, got {line:?}"),
        })?;
        map.insert(key.trim().to_string(), value.trim().to_string());
    }
    Ok(map)
}

pub fn parse_config_file(path: &Path) -> Result<BTreeMap<String, String>> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    parse_config_str(&text, &path.display().to_string())
}

fn want<T: FromStr>(map: &BTreeMap<String, String>, key: &str, default: T) -> Result<T> {
    match map.get(key) {
        None => Ok(default),
        Some(raw) => raw
            .parse()
            .map_err(|_| Error::Config(format!("key {key}: cannot parse value {raw:?}"))),
    }
}

fn want_bool(map: &BTreeMap<String, String>, key: &str, default: bool) -> Result<bool> {
    match map.get(key).map(String::as_str) {
        None => Ok(default),
        Some("true") | Some("1") => Ok(true),
        Some("false") | Some("0") => Ok(false),
        Some(other) => Err(Error::Config(format!(
            "key {key}: expected true|false, got {other:?}"
        ))),
    }
}

/// Typed resolution. `dataset` is the only required key; unknown keys are
/// rejected so typos cannot silently fall back to defaults.
pub fn build_run_spec(map: &BTreeMap<String, String>) -> Result<RunSpec> {
    for key in map.keys() {
        if !KNOWN_KEYS.contains(&key.as_str()) {
            return Err(Error::Config(format!("unknown config key: {key}")));
        }
    }
    let dataset = map
        .get("dataset")
        .cloned()
        .ok_or_else(|| Error::Config("missing required key: dataset".into()))?;

    let mode = match map.get("mode") {
        Some(m) => Mode::parse(m)?,
        None => Mode::SpreadFgl,
    };
    let default_servers = if mode == Mode::SpreadFgl { 3 } else { 1 };

    let optimizer = match map.get("optimizer").map(String::as_str) {
        None | Some("adam") => OptimKind::Adam,
        Some("sgd") => OptimKind::Sgd,
        Some(other) => {
            return Err(Error::Config(format!(
                "key optimizer: expected adam|sgd, got {other:?}"
            )))
        }
    };
    let topology = match map.get("topology") {
        Some(t) => TopologyKind::parse(t)?,
        None => TopologyKind::Ring,
    };
    let theta = match map.get("theta").map(String::as_str) {
        None | Some("auto") => None,
        Some(raw) => Some(raw.parse().map_err(|_| {
            Error::Config(format!("key theta: cannot parse value {raw:?}"))
        })?),
    };

    let defaults = FederationConfig::default();
    let cfg = FederationConfig {
        mode,
        servers: want(map, "servers", default_servers)?,
        clients: want(map, "clients", defaults.clients)?,
        rounds: want(map, "rounds", defaults.rounds)?,
        local_steps: want(map, "local_steps", defaults.local_steps)?,
        ae_iters: want(map, "ae_iters", defaults.ae_iters)?,
        as_iters: want(map, "as_iters", defaults.as_iters)?,
        kappa: want(map, "kappa", defaults.kappa)?,
        alpha: want(map, "alpha", defaults.alpha)?,
        beta: want(map, "beta", defaults.beta)?,
        top_k: want(map, "k", defaults.top_k)?,
        theta,
        labeled_ratio: want(map, "labeled_ratio", defaults.labeled_ratio)?,
        hidden: want(map, "hidden", defaults.hidden)?,
        trace_lambda: want(map, "trace_lambda", defaults.trace_lambda)?,
        optimizer,
        topology,
        self_inclusive: want_bool(map, "self_inclusive", defaults.self_inclusive)?,
        eval_on_patched: want_bool(map, "eval_on_patched", defaults.eval_on_patched)?,
        seed: want(map, "seed", defaults.seed)?,
        ae_tol: want(map, "ae_tol", defaults.ae_tol)?,
        ae_window: want(map, "ae_window", defaults.ae_window)?,
        ae_max_outer: want(map, "ae_max_outer", defaults.ae_max_outer)?,
    };
    cfg.validate()?;
    Ok(RunSpec { dataset, cfg })
}

/// The full effective configuration, re-parseable by `build_run_spec` and
/// bit-stable for reruns. `resolved_theta` pins the 1/c default.
pub fn resolved_string(spec: &RunSpec, resolved_theta: f64) -> String {
    let c = &spec.cfg;
    let mut out = String::new();
    out.push_str("# resolved experiment configuration\n");
    let mut push = |k: &str, v: String| {
        out.push_str(k);
        out.push('=');
        out.push_str(&v);
        out.push('\n');
    };
    push("dataset", spec.dataset.clone());
    push("mode", c.mode.as_str().to_string());
    push("servers", c.servers.to_string());
    push("clients", c.clients.to_string());
    push("rounds", c.rounds.to_string());
    push("local_steps", c.local_steps.to_string());
    push("ae_iters", c.ae_iters.to_string());
    push("as_iters", c.as_iters.to_string());
    push("kappa", c.kappa.to_string());
    push("alpha", format!("{}", c.alpha));
    push("beta", format!("{}", c.beta));
    push("k", c.top_k.to_string());
    push("theta", format!("{resolved_theta}"));
    push("labeled_ratio", format!("{}", c.labeled_ratio));
    push("hidden", c.hidden.to_string());
    push("trace_lambda", format!("{}", c.trace_lambda));
    push(
        "optimizer",
        match c.optimizer {
            OptimKind::Adam => "adam".to_string(),
            OptimKind::Sgd => "sgd".to_string(),
        },
    );
    push("topology", c.topology.as_str().to_string());
    push("self_inclusive", c.self_inclusive.to_string());
    push("eval_on_patched", c.eval_on_patched.to_string());
    push("seed", c.seed.to_string());
    push("ae_tol", format!("{}", c.ae_tol));
    push("ae_window", c.ae_window.to_string());
    push("ae_max_outer", c.ae_max_outer.to_string());
    out
}
