//! `--config FILE` support: `key = value` lines whose keys are long flag
//! names of the chosen subcommand. Values from the file are inserted ahead of
//! the command-line flags, so flags given explicitly win.

use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};
use clap::{ArgAction, Command};

pub fn parse_file(path: &Path) -> Result<Vec<(usize, String, String)>> {
    let text = fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            bail!("{}:{}: expected key = value", path.display(), i + 1);
        };
        let key = k.trim().replace('_', "-");
        if key.is_empty() {
            bail!("{}:{}: empty key", path.display(), i + 1);
        }
        out.push((i + 1, key, v.trim().to_owned()));
    }
    Ok(out)
}

/// Rewrites `argv` so the config file's settings precede the subcommand's own
/// flags. Unknown keys are an error naming the file and line.
pub fn expand(cmd: &Command, argv: Vec<String>) -> Result<Vec<String>> {
    let Some(pos) = argv.iter().position(|a| a == "--config" || a.starts_with("--config=")) else {
        return Ok(argv);
    };
    let (path, consumed) = match argv[pos].strip_prefix("--config=") {
        Some(p) => (p.to_owned(), 1),
        None => match argv.get(pos + 1) {
            Some(p) => (p.clone(), 2),
            None => bail!("--config needs a file"),
        },
    };
    let mut rest: Vec<String> = argv.clone();
    rest.drain(pos..pos + consumed);
    let sub_pos = rest
        .iter()
        .skip(1)
        .position(|a| cmd.find_subcommand(a).is_some())
        .map(|p| p + 1)
        .context("--config needs a subcommand")?;
    let sub = cmd.find_subcommand(&rest[sub_pos]).expect("found above");
    let path = Path::new(&path);
    let mut inserted = Vec::new();
    for (line, key, value) in parse_file(path)? {
        let Some(arg) = sub.get_arguments().find(|a| a.get_long() == Some(key.as_str())) else {
            bail!("{}:{line}: unknown key {key:?} for {}", path.display(), sub.get_name());
        };
        match arg.get_action() {
            ArgAction::SetTrue => match value.as_str() {
                "true" | "yes" | "1" => inserted.push(format!("--{key}")),
                "false" | "no" | "0" => {}
                _ => bail!("{}:{line}: {key} expects true or false", path.display()),
            },
            _ => {
                inserted.push(format!("--{key}"));
                inserted.push(value);
            }
        }
    }
    let mut out = rest[..=sub_pos].to_vec();
    out.extend(inserted);
    out.extend_from_slice(&rest[sub_pos + 1..]);
    Ok(out)
}
