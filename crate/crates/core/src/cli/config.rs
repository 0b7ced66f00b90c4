//! `key = value` option files.
//!
//! Keys are long flag names without the leading dashes (`_` and `-` are
//! interchangeable). `true` turns a switch on and `false` leaves it off.
//! Whitespace-separated values become separate arguments.

use std::ffi::OsString;
use std::path::Path;

use serde_json::Value;

use crate::error::{Error, Result};

/// Parses option lines, skipping blanks and `#` comments.
pub fn parse_config(text: &str, origin: &Path) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (k, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| Error::parse(origin, k + 1, "expected key = value"))?;
        let key = key.trim().replace('_', "-");
        if key.is_empty() {
            return Err(Error::parse(origin, k + 1, "empty key"));
        }
        out.push((key, value.trim().to_string()));
    }
    Ok(out)
}

fn config_path(argv: &[String]) -> Option<String> {
    let mut it = argv.iter();
    while let Some(a) = it.next() {
        if a == "--config" {
            return it.next().cloned();
        }
        if let Some(v) = a.strip_prefix("--config=") {
            return Some(v.to_string());
        }
    }
    None
}

/// Inserts the options of the `--config` file (if any) into `argv`, right
/// after the subcommand, skipping every key already given as a flag.
pub fn expand_config(argv: Vec<OsString>, subcommands: &[String]) -> Result<Vec<OsString>> {
    let argv: Vec<String> = argv
        .into_iter()
        .map(|a| a.into_string().map_err(|a| Error::Format(format!("argument {a:?} is not UTF-8"))))
        .collect::<Result<_>>()?;
    let Some(path) = config_path(&argv) else {
        return Ok(argv.into_iter().map(OsString::from).collect());
    };
    let path = Path::new(&path);
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let given: Vec<&str> = argv
        .iter()
        .filter_map(|a| a.strip_prefix("--"))
        .map(|a| a.split_once('=').map_or(a, |(k, _)| k))
        .collect();
    let mut extra = Vec::new();
    for (key, value) in parse_config(&text, path)? {
        if key == "config" || given.contains(&key.as_str()) {
            continue;
        }
        match value.as_str() {
            "true" => extra.push(format!("--{key}")),
            "false" => {}
            _ => {
                extra.push(format!("--{key}"));
                extra.extend(value.split_whitespace().map(str::to_string));
            }
        }
    }
    let at = argv
        .iter()
        .skip(1)
        .position(|a| subcommands.contains(a))
        .map_or(argv.len(), |p| p + 2);
    let mut out = argv;
    out.splice(at..at, extra);
    Ok(out.into_iter().map(OsString::from).collect())
}

fn scalar(v: &Value) -> Option<String> {
    match v {
        Value::Null => None,
        Value::String(s) => Some(s.clone()),
        Value::Array(items) => Some(items.iter().filter_map(scalar).collect::<Vec<_>>().join(" ")),
        other => Some(other.to_string()),
    }
}

/// Renders serialized option structs as sorted `key = value` lines that
/// [`expand_config`] reads back.
pub fn render_config(header: &str, parts: &[Value]) -> String {
    let mut entries = std::collections::BTreeMap::new();
    for part in parts {
        if let Value::Object(map) = part {
            for (k, v) in map {
                if let Some(s) = scalar(v) {
                    entries.insert(k.clone(), s);
                }
            }
        }
    }
    let mut text = format!("# {header}\n");
    for (k, v) in entries {
        text.push_str(&format!("{k} = {v}\n"));
    }
    text
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde::Serialize;

    fn os(v: &[&str]) -> Vec<OsString> {
        v.iter().map(OsString::from).collect()
    }

    fn strings(v: Vec<OsString>) -> Vec<String> {
        v.into_iter().map(|a| a.into_string().unwrap()).collect()
    }

    #[test]
    fn parses_lines() {
        let c = parse_config("# x\n\nmin_count = 3\n dim=10 \n", Path::new("c")).unwrap();
        assert_eq!(c, [("min-count".into(), "3".into()), ("dim".into(), "10".into())]);
        assert!(parse_config("oops\n", Path::new("c")).is_err());
    }

    #[test]
    fn flags_override_file_values() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = dir.path().join("run.txt");
        std::fs::write(&cfg, "dim = 10\nepochs = 3\nlowercase = true\nverbose = false\nsteps = 2 4\n").unwrap();
        let argv = os(&["bin", "--config", cfg.to_str().unwrap(), "embed", "--dim=50", "--counts", "c"]);
        let out = strings(expand_config(argv, &["embed".into()]).unwrap());
        assert_eq!(
            out[4..],
            ["--epochs", "3", "--lowercase", "--steps", "2", "4", "--dim=50", "--counts", "c"]
        );
    }

    #[test]
    fn no_config_is_identity() {
        let argv = os(&["bin", "vocab", "--corpus", "x"]);
        assert_eq!(expand_config(argv.clone(), &["vocab".into()]).unwrap(), argv);
    }

    #[test]
    fn render_round_trips_scalars() {
        #[derive(Serialize)]
        #[serde(rename_all = "kebab-case")]
        struct A {
            min_count: u64,
            steps: Vec<u32>,
            top_k: Option<usize>,
            lowercase: bool,
        }
        let a = A { min_count: 2, steps: vec![2, 4], top_k: None, lowercase: true };
        let text = render_config("vocab", &[serde_json::to_value(&a).unwrap()]);
        assert_eq!(text, "# vocab\nlowercase = true\nmin-count = 2\nsteps = 2 4\n");
    }
}
