//! Config files for the command line.
//!
//! Grammar, one entry per line:
//!
//! ```text
//! # comment          blank lines and lines starting with '#' are skipped
//! key = value        key is a long flag name without the leading dashes
//! key = "value"      surrounding double quotes are stripped
//! flag = true        boolean flags are given as true/false
//! ```
//!
//! Keys may use `_` or `-`. Each entry becomes `--key value` and is placed
//! before the flags typed on the command line, so a flag given in both
//! places takes its command-line value.

use std::fs;
use std::path::Path;

use crate::{Error, Result};

/// Parses config text into `(key, value)` pairs in file order.
pub fn parse_config(text: &str) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            return Err(Error::Format(format!(
                "config line {}: expected key = value",
                lineno + 1
            )));
        };
        let key = k.trim().replace('_', "-");
        if key.is_empty() || !key.chars().all(|c| c.is_ascii_alphanumeric() || c == '-') {
            return Err(Error::Format(format!(
                "config line {}: bad key {:?}",
                lineno + 1,
                k.trim()
            )));
        }
        let mut value = v.trim();
        if value.len() >= 2 && value.starts_with('"') && value.ends_with('"') {
            value = &value[1..value.len() - 1];
        }
        out.push((key, value.to_string()));
    }
    Ok(out)
}

/// Converts parsed entries to long flags. `false` entries are dropped.
pub fn config_args(entries: &[(String, String)]) -> Vec<String> {
    let mut args = Vec::new();
    for (k, v) in entries {
        match v.as_str() {
            "true" => args.push(format!("--{k}")),
            "false" => {}
            _ => {
                args.push(format!("--{k}"));
                args.push(v.clone());
            }
        }
    }
    args
}

/// Splices `--config FILE` (or `--config=FILE`) out of `args` and inserts
/// the file's flags right after the subcommand.
pub fn expand_config_args(args: Vec<String>) -> Result<Vec<String>> {
    let mut rest = Vec::with_capacity(args.len());
    let mut path = None;
    let mut it = args.into_iter();
    while let Some(a) = it.next() {
        if a == "--config" {
            path = Some(
                it.next()
                    .ok_or_else(|| Error::Usage("--config needs a file".into()))?,
            );
        } else if let Some(p) = a.strip_prefix("--config=") {
            path = Some(p.to_string());
        } else {
            rest.push(a);
        }
    }
    let Some(path) = path else { return Ok(rest) };
    let text = fs::read_to_string(Path::new(&path)).map_err(|source| Error::Io {
        path: path.clone().into(),
        source,
    })?;
    let extra = config_args(&parse_config(&text)?);
    // program name, then subcommand
    let at = rest.len().min(2);
    rest.splice(at..at, extra);
    Ok(rest)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grammar() {
        let text =
            "# sweep\n\nn_train = 50\nsw2-grid = \"1.0:2.0:0.5\"\nplot-all = true\nquiet = false\n";
        let e = parse_config(text).unwrap();
        assert_eq!(e[0], ("n-train".into(), "50".into()));
        assert_eq!(e[1].1, "1.0:2.0:0.5");
        assert_eq!(
            config_args(&e),
            ["--n-train", "50", "--sw2-grid", "1.0:2.0:0.5", "--plot-all"]
        );
        assert!(parse_config("novalue\n").is_err());
        assert!(parse_config("bad key = 1\n").is_err());
    }

    #[test]
    fn file_flags_go_before_command_line() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.conf");
        fs::write(&p, "n-train = 50\n").unwrap();
        let args: Vec<String> = [
            "nngp",
            "sweep",
            "--config",
            p.to_str().unwrap(),
            "--n-train",
            "60",
        ]
        .map(String::from)
        .to_vec();
        let out = expand_config_args(args).unwrap();
        assert_eq!(out, ["nngp", "sweep", "--n-train", "50", "--n-train", "60"]);
    }
}
