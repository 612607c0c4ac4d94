//! `--config FILE` support: each `key = value` line becomes `--key value`
//! right after the subcommand, so later command-line flags override it.

use std::ffi::OsString;
use std::fs;
use std::path::PathBuf;

use clap::Command;

use crate::UsageError;

/// Removes `--config FILE` from `argv` and splices the file's entries in
/// after the subcommand token.
pub fn expand(argv: Vec<OsString>, cmd: &Command) -> anyhow::Result<Vec<OsString>> {
    let mut rest = Vec::with_capacity(argv.len());
    let mut path: Option<PathBuf> = None;
    let mut it = argv.into_iter();
    while let Some(arg) = it.next() {
        let s = arg.to_string_lossy();
        if s == "--config" {
            let v = it
                .next()
                .ok_or_else(|| UsageError("--config needs a file".into()))?;
            path = Some(v.into());
        } else if let Some(v) = s.strip_prefix("--config=") {
            path = Some(v.into());
        } else {
            rest.push(arg);
        }
    }
    let Some(path) = path else {
        return Ok(rest);
    };
    let text = fs::read_to_string(&path)
        .map_err(|e| anyhow::Error::new(e).context(format!("reading config {}", path.display())))?;
    let entries = parse(&text)?;

    let Some(pos) = rest
        .iter()
        .skip(1)
        .position(|a| !a.to_string_lossy().starts_with('-'))
        .map(|p| p + 1)
    else {
        return Ok(rest);
    };
    let name = rest[pos].to_string_lossy().into_owned();
    let Some(sub) = cmd.find_subcommand(&name) else {
        return Ok(rest);
    };
    let mut injected = Vec::new();
    for (line, key, value) in entries {
        let arg = sub
            .get_arguments()
            .find(|a| {
                a.get_long() == Some(key.as_str()) && !matches!(key.as_str(), "help" | "config")
            })
            .ok_or_else(|| {
                UsageError(format!(
                    "{}:{line}: unknown key `{key}` for `{name}`",
                    path.display()
                ))
            })?;
        if arg.get_action().takes_values() {
            injected.push(OsString::from(format!("--{key}")));
            injected.push(OsString::from(value));
        } else {
            match value.as_str() {
                "true" => injected.push(OsString::from(format!("--{key}"))),
                "false" => {}
                _ => {
                    return Err(UsageError(format!(
                        "{}:{line}: `{key}` takes true or false, not `{value}`",
                        path.display()
                    ))
                    .into())
                }
            }
        }
    }
    rest.splice(pos + 1..pos + 1, injected);
    Ok(rest)
}

/// `(line number, key, value)` per entry. Blank lines and `#` comments are
/// skipped; underscores in keys read as dashes; one layer of double quotes
/// around a value is removed.
pub fn parse(text: &str) -> Result<Vec<(usize, String, String)>, UsageError> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| UsageError(format!("config line {}: expected `key = value`", i + 1)))?;
        let key = key.trim().replace('_', "-");
        let value = value.trim();
        let value = value
            .strip_prefix('"')
            .and_then(|v| v.strip_suffix('"'))
            .unwrap_or(value);
        if key.is_empty() {
            return Err(UsageError(format!("config line {}: empty key", i + 1)));
        }
        out.push((i + 1, key, value.to_string()));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_lines() {
        let e = parse("# c\n\nsigma = 0.5\nper_class=\"20\"\n").unwrap();
        assert_eq!(
            e,
            vec![
                (3, "sigma".into(), "0.5".into()),
                (4, "per-class".into(), "20".into())
            ]
        );
        assert!(parse("sigma\n").is_err());
        assert!(parse("= 3\n").is_err());
    }
}
