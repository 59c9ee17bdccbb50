//! `key=value` config files. Each key names a subcommand flag; values are
//! spliced in before the real arguments so the command line wins.

use anyhow::{bail, Context, Result};
use std::ffi::OsString;
use std::path::Path;

pub fn parse(text: &str) -> Result<Vec<OsString>> {
    let mut args = Vec::new();
    for (no, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            bail!("config line {}: expected key=value, got {raw:?}", no + 1);
        };
        let key = key.trim().replace('_', "-");
        let value = value.trim();
        if key.is_empty() || key == "config" {
            bail!("config line {}: bad key {key:?}", no + 1);
        }
        match value {
            "true" => args.push(format!("--{key}").into()),
            "false" => {}
            _ => {
                args.push(format!("--{key}").into());
                args.push(value.into());
            }
        }
    }
    Ok(args)
}

/// Removes `--config FILE` from `argv` and splices the file's flags in right
/// after the subcommand name.
pub fn expand(argv: Vec<OsString>) -> Result<Vec<OsString>> {
    let mut rest = Vec::with_capacity(argv.len());
    let mut config = None;
    let mut it = argv.into_iter();
    while let Some(arg) = it.next() {
        let s = arg.to_string_lossy();
        if s == "--config" {
            config = Some(it.next().context("--config needs a file")?);
        } else if let Some(path) = s.strip_prefix("--config=") {
            config = Some(path.into());
        } else {
            rest.push(arg);
        }
    }
    let Some(path) = config else { return Ok(rest) };
    let text = std::fs::read_to_string(Path::new(&path))
        .with_context(|| format!("reading config {}", Path::new(&path).display()))?;
    let extra = parse(&text)?;
    // argv[0] is the program, argv[1] the subcommand
    let split = rest.len().min(2);
    let tail = rest.split_off(split);
    rest.extend(extra);
    rest.extend(tail);
    Ok(rest)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn strs(v: &[OsString]) -> Vec<String> {
        v.iter().map(|s| s.to_string_lossy().into_owned()).collect()
    }

    #[test]
    fn parses_flags_and_booleans() {
        let args = parse("# comment\nebno_list = 1,2\ncheck=true\nverbose=false\n\nseed=7 # trailing\n").unwrap();
        assert_eq!(strs(&args), ["--ebno-list", "1,2", "--check", "--seed", "7"]);
    }

    #[test]
    fn rejects_bare_words() {
        assert!(parse("seed 7").is_err());
        assert!(parse("config=x").is_err());
    }

    #[test]
    fn no_config_is_identity() {
        let argv: Vec<OsString> = ["p", "ber", "--seed", "1"].iter().map(OsString::from).collect();
        assert_eq!(expand(argv.clone()).unwrap(), argv);
    }
}
