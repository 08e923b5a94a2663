//! Benchmark settings from four sources. Later layers win:
//! built-in defaults, `USC_*` environment, scenario file, command-line flags.

use std::path::Path;

use anyhow::{bail, Context, Result};
use toml::{Table, Value};
use usc_core::bench::Scenario;

/// Environment variables read for `bench`, with the scenario key they set.
pub const BENCH_ENV: [(&str, &str); 9] = [
    ("USC_FLEET_SIZES", "fleet_sizes"),
    ("USC_CONFIGS", "configs"),
    ("USC_ITERATIONS", "iterations"),
    ("USC_CLIP_SECONDS", "clip_seconds"),
    ("USC_COMPUTE_SCALE", "device_compute_scale"),
    ("USC_PACING", "pacing"),
    ("USC_SEED", "seed"),
    ("USC_MODEL", "model"),
    ("USC_LATENCY_CRITERION", "latency_criterion"),
];

fn list(text: &str) -> Vec<&str> {
    text.split(',').map(str::trim).filter(|s| !s.is_empty()).collect()
}

/// Converts one textual setting into the TOML value the scenario expects.
pub fn parse_setting(key: &str, text: &str) -> Result<Value> {
    let bad = || format!("invalid value `{text}` for {key}");
    Ok(match key {
        "fleet_sizes" => Value::Array(
            list(text)
                .into_iter()
                .map(|s| s.parse::<i64>().map(Value::Integer).with_context(bad))
                .collect::<Result<_>>()?,
        ),
        "configs" => Value::Array(list(text).into_iter().map(|s| Value::String(s.to_uppercase())).collect()),
        "iterations" | "seed" => Value::Integer(text.trim().parse().with_context(bad)?),
        "clip_seconds" | "device_compute_scale" => Value::Float(text.trim().parse().with_context(bad)?),
        "pacing" => Value::Boolean(match text.trim().to_ascii_lowercase().as_str() {
            "1" | "true" | "yes" | "on" => true,
            "0" | "false" | "no" | "off" => false,
            _ => bail!(bad()),
        }),
        "model" | "latency_criterion" => Value::String(text.trim().to_string()),
        other => bail!("unknown setting {other}"),
    })
}

/// Settings taken from `USC_*` variables, looked up through `get`.
pub fn env_layer(get: impl Fn(&str) -> Option<String>) -> Result<Table> {
    let mut t = Table::new();
    for (var, key) in BENCH_ENV {
        if let Some(v) = get(var) {
            t.insert(key.to_string(), parse_setting(key, &v).with_context(|| format!("from {var}"))?);
        }
    }
    Ok(t)
}

/// A scenario file as a table, with relative clip and model paths made
/// relative to the file's directory.
pub fn file_layer(path: &Path) -> Result<Table> {
    let text = std::fs::read_to_string(path).with_context(|| format!("cannot read scenario {}", path.display()))?;
    let mut t: Table = toml::from_str(&text).with_context(|| format!("malformed scenario {}", path.display()))?;
    let base = path.parent().unwrap_or(Path::new("."));
    let resolve = |v: &mut Value| {
        if let Value::String(s) = v {
            if Path::new(s.as_str()).is_relative() {
                *s = base.join(s.as_str()).to_string_lossy().into_owned();
            }
        }
    };
    if let Some(m) = t.get_mut("model") {
        resolve(m);
    }
    if let Some(Value::Array(clips)) = t.get_mut("clips") {
        clips.iter_mut().for_each(resolve);
    }
    Ok(t)
}

/// Recursively overlays `top` onto `base`.
pub fn merge(base: &mut Table, top: Table) {
    for (k, v) in top {
        match (base.get_mut(&k), v) {
            (Some(Value::Table(b)), Value::Table(t)) => merge(b, t),
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}

/// Resolves the scenario from all layers.
pub fn resolve(env: Table, file: Option<Table>, flags: Table) -> Result<Scenario> {
    let mut merged = env;
    if let Some(f) = file {
        merge(&mut merged, f);
    }
    merge(&mut merged, flags);
    let text = toml::to_string(&merged).context("scenario settings do not serialize")?;
    Ok(Scenario::from_toml_str(&text)?)
}
