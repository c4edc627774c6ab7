//! Configuration resolution: a TOML file (or a run manifest standing in
//! for one), dotted-path command-line overrides, and full default
//! expansion into one [`ExperimentConfig`].

use std::fs;
use std::path::Path;

use neuropong_core::config::ExperimentConfig;
use toml::{Table, Value};

use crate::{CliError, CliResult};

/// Splits dotted-path overrides (`--section.key=value`) out of the raw
/// argument list, leaving everything else for the regular parser. A
/// literal `--` stops the scan.
pub fn split_dotted_overrides(
    argv: impl Iterator<Item = String>,
) -> (Vec<String>, Vec<(String, String)>) {
    let mut args = Vec::new();
    let mut overrides = Vec::new();
    let mut passthrough = false;
    for arg in argv {
        if passthrough {
            args.push(arg);
            continue;
        }
        if arg == "--" {
            passthrough = true;
            args.push(arg);
            continue;
        }
        match parse_dotted(&arg) {
            Some(pair) => overrides.push(pair),
            None => args.push(arg),
        }
    }
    (args, overrides)
}

fn parse_dotted(arg: &str) -> Option<(String, String)> {
    let body = arg.strip_prefix("--")?;
    let (name, value) = body.split_once('=')?;
    if !name.contains('.') {
        return None;
    }
    Some((name.to_string(), value.to_string()))
}

/// Loads and fully resolves a configuration: the file's values (or the
/// built-in defaults) with dotted-path overrides and the seed/iteration
/// shorthands applied on top, then validated.
pub fn resolve(
    path: Option<&Path>,
    overrides: &[(String, String)],
    seed: Option<u64>,
    iterations: Option<usize>,
) -> CliResult<ExperimentConfig> {
    let base = match path {
        Some(p) => from_file(p)?,
        None => ExperimentConfig::default(),
    };
    // Round-trip through a table so each override can be typed against
    // the resolved value it replaces.
    let mut table = Table::try_from(&base)
        .map_err(|e| CliError::runtime(format!("configuration serialization: {e}")))?;
    for (path, raw) in overrides {
        apply_override(&mut table, path, raw)?;
    }
    if let Some(seed) = seed {
        apply_override(&mut table, "experiment.seed", &seed.to_string())?;
    }
    if let Some(n) = iterations {
        apply_override(&mut table, "experiment.n_iterations", &n.to_string())?;
    }
    let cfg: ExperimentConfig = Value::Table(table)
        .try_into()
        .map_err(|e| CliError::usage(format!("configuration: {e}")))?;
    cfg.validate().map_err(|e| CliError::usage(e.to_string()))?;
    Ok(cfg)
}

fn from_file(path: &Path) -> CliResult<ExperimentConfig> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::usage(format!("cannot read config {}: {e}", path.display())))?;
    let table: Table = toml::from_str(&text)
        .map_err(|e| CliError::usage(format!("{}: {e}", path.display())))?;
    let table = if table.contains_key("manifest_version") {
        match table.get("config") {
            Some(Value::Table(embedded)) => embedded.clone(),
            _ => {
                return Err(CliError::usage(format!(
                    "{}: manifest carries no [config] section",
                    path.display()
                )));
            }
        }
    } else {
        table
    };
    Value::Table(table)
        .try_into()
        .map_err(|e| CliError::usage(format!("{}: {e}", path.display())))
}

/// Sets one dotted-path override. Intermediate segments must name
/// existing sections; the final key is typed against the value it
/// replaces, so `--snn.tau_m=10` yields a float where one is expected.
fn apply_override(table: &mut Table, path: &str, raw: &str) -> CliResult<()> {
    let segments: Vec<&str> = path.split('.').collect();
    let mut current = table;
    for segment in &segments[..segments.len() - 1] {
        let entry = current.get_mut(*segment).ok_or_else(|| {
            CliError::usage(format!("--{path}: unknown configuration section `{segment}`"))
        })?;
        current = entry.as_table_mut().ok_or_else(|| {
            CliError::usage(format!("--{path}: `{segment}` is not a configuration section"))
        })?;
    }
    let key = segments[segments.len() - 1];
    let value = match current.get(key) {
        Some(existing) => typed_value(raw, existing, path)?,
        // Keys absent from the resolved table (an unset optional, or a
        // typo the deserializer will reject) get the closest-fitting type.
        None => guessed_value(raw),
    };
    current.insert(key.to_string(), value);
    Ok(())
}

fn typed_value(raw: &str, existing: &Value, path: &str) -> CliResult<Value> {
    let expect = |kind: &str| CliError::usage(format!("--{path}: `{raw}` is not {kind}"));
    match existing {
        Value::Boolean(_) => raw
            .parse()
            .map(Value::Boolean)
            .map_err(|_| expect("a boolean")),
        Value::Integer(_) => raw
            .parse()
            .map(Value::Integer)
            .map_err(|_| expect("an integer")),
        Value::Float(_) => raw
            .parse()
            .map(Value::Float)
            .map_err(|_| expect("a number")),
        Value::String(_) => Ok(Value::String(raw.to_string())),
        Value::Array(_) => toml_fragment(raw).ok_or_else(|| expect("a TOML array")),
        _ => Err(CliError::usage(format!(
            "--{path}: this key cannot be set from the command line"
        ))),
    }
}

fn guessed_value(raw: &str) -> Value {
    if let Ok(b) = raw.parse::<bool>() {
        return Value::Boolean(b);
    }
    if let Ok(i) = raw.parse::<i64>() {
        return Value::Integer(i);
    }
    if let Ok(f) = raw.parse::<f64>() {
        return Value::Float(f);
    }
    Value::String(raw.to_string())
}

fn toml_fragment(raw: &str) -> Option<Value> {
    let table: Table = toml::from_str(&format!("value = {raw}")).ok()?;
    table.get("value").cloned()
}
