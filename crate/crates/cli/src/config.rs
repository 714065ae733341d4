//! `key = value` settings files, spliced into the argument list ahead of
//! the command-line flags so that explicit flags win.

use std::ffi::OsString;
use std::path::Path;

use clap::CommandFactory;

use crate::args::Cli;

/// Path given by `--config PATH` or `--config=PATH`, if any.
fn config_path(args: &[OsString]) -> Option<OsString> {
    let mut it = args.iter();
    while let Some(a) = it.next() {
        if a == "--config" {
            return it.next().cloned();
        }
        if let Some(v) = a.to_str().and_then(|s| s.strip_prefix("--config=")) {
            return Some(v.into());
        }
    }
    None
}

/// Long flag names accepted by `subcommand`, excluding `config`.
fn known_keys(subcommand: &str) -> Option<Vec<String>> {
    let cmd = Cli::command();
    let sub = cmd.find_subcommand(subcommand)?;
    Some(
        sub.get_arguments()
            .filter_map(|a| a.get_long())
            .filter(|l| *l != "config" && *l != "help")
            .map(str::to_string)
            .collect(),
    )
}

/// Flag/value pairs from the text of a settings file.
pub fn parse_config(text: &str, subcommand: &str) -> Result<Vec<(String, String)>, String> {
    let keys = known_keys(subcommand).ok_or_else(|| format!("unknown subcommand {subcommand:?}"))?;
    let mut out: Vec<(String, String)> = Vec::new();
    for (k, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let lineno = k + 1;
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| format!("line {lineno}: expected `key = value`, found {line:?}"))?;
        let key = key.trim().replace('_', "-");
        let value = value.split(',').map(str::trim).collect::<Vec<_>>().join(",");
        if !keys.contains(&key) {
            return Err(format!("line {lineno}: unknown key {key:?} for `{subcommand}`"));
        }
        if value.is_empty() {
            return Err(format!("line {lineno}: key {key:?} has no value"));
        }
        if out.iter().any(|(k, _)| *k == key) {
            return Err(format!("line {lineno}: key {key:?} given twice"));
        }
        out.push((key, value));
    }
    Ok(out)
}

/// The argument list with any `--config` file expanded in place.
pub fn expand(args: Vec<OsString>) -> Result<Vec<OsString>, String> {
    let Some(path) = config_path(&args) else {
        return Ok(args);
    };
    let Some(sub) = args.get(1).and_then(|s| s.to_str()).map(str::to_string) else {
        return Ok(args);
    };
    let path = Path::new(&path);
    let text = std::fs::read_to_string(path).map_err(|e| format!("cannot read config {}: {e}", path.display()))?;
    let pairs = parse_config(&text, &sub).map_err(|e| format!("config {}: {e}", path.display()))?;
    let mut out = args[..2].to_vec();
    for (k, v) in pairs {
        // `--key=value` keeps values that start with '-' attached to their key.
        out.push(format!("--{k}={v}").into());
    }
    out.extend_from_slice(&args[2..]);
    Ok(out)
}
