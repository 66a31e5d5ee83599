//! `--config` files: each entry becomes a flag placed right after the
//! subcommand, so flags given on the command line (which come later) win.
//!
//! Two layouts are accepted. A TOML file of `key = value` pairs, where top-level
//! keys apply to every subcommand and a `[gen]`-style table adds keys for one
//! subcommand. Or a `.config.json` sidecar written by an earlier run, whose
//! `args` object is replayed as is.

use std::path::Path;

use crate::error::CliError;

pub const SUBCOMMANDS: [&str; 5] = ["solve", "gen", "train", "eval", "sweep"];

/// Splices the entries of any `--config FILE` into `args` (which include the
/// program name).
pub fn expand(args: Vec<String>) -> Result<Vec<String>, CliError> {
    let mut config = None;
    let mut sub = None;
    let mut i = 1;
    while i < args.len() {
        let a = &args[i];
        if a == "--config" {
            config = args.get(i + 1).cloned();
            i += 2;
            continue;
        }
        if let Some(path) = a.strip_prefix("--config=") {
            config = Some(path.to_string());
        } else if sub.is_none() && !a.starts_with('-') {
            sub = Some(i);
        }
        i += 1;
    }
    let (Some(path), Some(at)) = (config, sub) else {
        return Ok(args);
    };
    let text = std::fs::read_to_string(&path).map_err(|e| CliError::Io(format!("{path}: {e}")))?;
    let flags = flags_from_text(&text, Path::new(&path), &args[at])?;
    let mut out = args[..=at].to_vec();
    out.extend(flags);
    out.extend_from_slice(&args[at + 1..]);
    Ok(out)
}

/// Flags described by a config file for subcommand `sub`.
pub fn flags_from_text(text: &str, path: &Path, sub: &str) -> Result<Vec<String>, CliError> {
    let is_json = path.extension().is_some_and(|e| e == "json");
    let mut flags = Vec::new();
    if is_json {
        let doc: serde_json::Value =
            serde_json::from_str(text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
        let args = doc.get("args").and_then(|a| a.as_object()).ok_or_else(|| {
            CliError::Usage(format!("{}: expected an `args` object", path.display()))
        })?;
        for (key, value) in args {
            push_json(&mut flags, key, value)?;
        }
        return Ok(flags);
    }
    let table: toml::Table = text
        .parse()
        .map_err(|e: toml::de::Error| CliError::Usage(format!("{}: {e}", path.display())))?;
    for (key, value) in &table {
        if SUBCOMMANDS.contains(&key.as_str()) {
            continue;
        }
        push_toml(&mut flags, key, value)?;
    }
    if let Some(section) = table.get(sub) {
        let section = section
            .as_table()
            .ok_or_else(|| CliError::Usage(format!("`{sub}` in {} must be a table", path.display())))?;
        for (key, value) in section {
            push_toml(&mut flags, key, value)?;
        }
    }
    Ok(flags)
}

fn flag_name(key: &str) -> String {
    format!("--{}", key.replace('_', "-"))
}

fn push_toml(flags: &mut Vec<String>, key: &str, value: &toml::Value) -> Result<(), CliError> {
    use toml::Value;
    let scalar = |v: &Value| -> Result<String, CliError> {
        match v {
            Value::String(s) => Ok(s.clone()),
            Value::Integer(i) => Ok(i.to_string()),
            Value::Float(f) => Ok(format!("{f:e}")),
            _ => Err(CliError::Usage(format!("unsupported value for `{key}`: {v}"))),
        }
    };
    match value {
        Value::Boolean(true) => flags.push(flag_name(key)),
        Value::Boolean(false) => {}
        Value::Array(items) => {
            let parts: Result<Vec<String>, CliError> = items.iter().map(scalar).collect();
            flags.push(flag_name(key));
            flags.push(parts?.join(","));
        }
        v => {
            flags.push(flag_name(key));
            flags.push(scalar(v)?);
        }
    }
    Ok(())
}

fn push_json(flags: &mut Vec<String>, key: &str, value: &serde_json::Value) -> Result<(), CliError> {
    use serde_json::Value;
    let scalar = |v: &Value| -> Result<String, CliError> {
        match v {
            Value::String(s) => Ok(s.clone()),
            Value::Number(n) => Ok(n.to_string()),
            _ => Err(CliError::Usage(format!("unsupported value for `{key}`: {v}"))),
        }
    };
    match value {
        Value::Null | Value::Bool(false) => {}
        Value::Bool(true) => flags.push(flag_name(key)),
        Value::Array(items) => {
            let parts: Result<Vec<String>, CliError> = items.iter().map(scalar).collect();
            flags.push(flag_name(key));
            flags.push(parts?.join(","));
        }
        v => {
            flags.push(flag_name(key));
            flags.push(scalar(v)?);
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn strings(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn toml_keys_land_after_the_subcommand() {
        let text = "seed = 7\nhidden = [8, 4]\nraw_rates = true\nquiet = false\n[gen]\nbatches = 3\n[train]\nepochs = 2\n";
        let flags = flags_from_text(text, Path::new("run.toml"), "gen").unwrap();
        assert_eq!(flags, strings(&["--hidden", "8,4", "--raw-rates", "--seed", "7", "--batches", "3"]));
    }

    #[test]
    fn json_sidecar_args_are_replayed() {
        let text = r#"{"command":"gen","args":{"batches":2,"ranges":"desk","out":"d","jobs":null}}"#;
        let flags = flags_from_text(text, Path::new("d/dataset.config.json"), "gen").unwrap();
        assert_eq!(flags, strings(&["--batches", "2", "--out", "d", "--ranges", "desk"]));
    }

    #[test]
    fn floats_keep_full_precision() {
        let flags = flags_from_text("de = 2.6e-9\nx = 0.1\n", Path::new("a.toml"), "solve").unwrap();
        assert_eq!(flags[1].parse::<f64>().unwrap(), 2.6e-9);
        assert_eq!(flags[3].parse::<f64>().unwrap(), 0.1);
    }
}
