//! Flat `key = value` config files layered under command-line flags.

use std::fs;
use std::path::Path;

/// Parses `key = value` lines. Blank lines and `#` comments are skipped.
pub fn parse(text: &str) -> Result<Vec<(String, String)>, String> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| format!("config line {}: expected key = value, got {line:?}", i + 1))?;
        let key = k.trim().replace('_', "-");
        if key.is_empty() {
            return Err(format!("config line {}: empty key", i + 1));
        }
        out.push((key, v.trim().to_string()));
    }
    Ok(out)
}

fn given_on_command_line(args: &[String], key: &str) -> bool {
    let flag = format!("--{key}");
    args.iter().any(|a| *a == flag || a.starts_with(&format!("{flag}=")))
}

fn config_path(args: &[String]) -> Option<String> {
    let pos = args.iter().position(|a| a == "--config" || a.starts_with("--config="))?;
    match args[pos].split_once('=') {
        Some((_, v)) => Some(v.to_string()),
        None => args.get(pos + 1).cloned(),
    }
}

/// Appends config-file entries for every key not already given as a flag.
/// Boolean keys take `true`/`false`.
pub fn layer(args: Vec<String>) -> Result<Vec<String>, String> {
    let Some(path) = config_path(&args) else { return Ok(args) };
    let text = fs::read_to_string(Path::new(&path)).map_err(|e| format!("cannot read config {path}: {e}"))?;
    let mut extra = Vec::new();
    for (key, value) in parse(&text)? {
        if key == "config" || given_on_command_line(&args, &key) {
            continue;
        }
        match value.as_str() {
            "true" => extra.push(format!("--{key}")),
            "false" => {}
            _ => extra.push(format!("--{key}={value}")),
        }
    }
    let mut args = args;
    args.extend(extra);
    Ok(args)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn strings(xs: &[&str]) -> Vec<String> {
        xs.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn parses_comments_and_underscores() {
        let kv = parse("# c\nbatch_size = 64\n\nk=5\n").unwrap();
        assert_eq!(kv, vec![("batch-size".into(), "64".into()), ("k".into(), "5".into())]);
        assert!(parse("nonsense").is_err());
        assert!(parse("= 3").is_err());
    }

    #[test]
    fn flags_win_over_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.cfg");
        fs::write(&path, "k = 7\nseed = 3\nverbose = true\nall-to-all = false\n").unwrap();
        let args = strings(&["miscale", "estimate", "--k", "4", "--config", path.to_str().unwrap()]);
        let out = layer(args).unwrap();
        assert!(out.contains(&"--seed=3".to_string()));
        assert!(out.contains(&"--verbose".to_string()));
        assert!(!out.iter().any(|a| a.starts_with("--k=")));
        assert!(!out.iter().any(|a| a.contains("all-to-all")));
    }

    #[test]
    fn no_config_is_identity() {
        let args = strings(&["miscale", "fit", "--curve", "c.csv"]);
        assert_eq!(layer(args.clone()).unwrap(), args);
    }
}
