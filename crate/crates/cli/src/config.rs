//! Plain-text `key = value` config files, merged under the command-line flags.

use std::ffi::OsString;
use std::path::Path;

use anyhow::{bail, Context, Result};

/// Parses a config file into `(key, value)` pairs. Blank lines and lines
/// starting with `#` are ignored.
pub fn parse(text: &str) -> Result<Vec<(String, String)>> {
    let mut pairs = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            bail!("config line {}: expected `key = value`, got {raw:?}", i + 1);
        };
        let (k, v) = (k.trim(), v.trim());
        if k.is_empty() || k.starts_with('-') || k.contains(char::is_whitespace) {
            bail!("config line {}: invalid key {k:?}", i + 1);
        }
        if k == "config" {
            bail!("config line {}: nested config files are not supported", i + 1);
        }
        pairs.push((k.to_string(), v.to_string()));
    }
    Ok(pairs)
}

pub fn read(path: &Path) -> Result<Vec<(String, String)>> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
    parse(&text)
}

/// Inserts the flags of any `--config FILE` directly after the subcommand,
/// so that flags given on the command line take precedence. Unknown keys
/// surface as ordinary usage errors from the argument parser.
pub fn expand(argv: Vec<OsString>, subcommands: &[&str]) -> Result<Vec<OsString>> {
    let mut config = None;
    for (i, a) in argv.iter().enumerate() {
        let s = a.to_string_lossy();
        if s == "--config" {
            let p = argv.get(i + 1).context("--config needs a file")?;
            config = Some(p.clone());
        } else if let Some(p) = s.strip_prefix("--config=") {
            config = Some(OsString::from(p));
        }
    }
    let Some(path) = config else {
        return Ok(argv);
    };
    let pairs = read(Path::new(&path))?;
    let Some(pos) = argv.iter().position(|a| subcommands.contains(&a.to_string_lossy().as_ref())) else {
        bail!("--config needs a subcommand on the command line");
    };
    let mut out: Vec<OsString> = argv[..=pos].to_vec();
    for (k, v) in pairs {
        out.push(format!("--{k}={v}").into());
    }
    out.extend_from_slice(&argv[pos + 1..]);
    Ok(out)
}

/// Renders resolved settings back into the config format.
pub fn render(pairs: &[(String, String)]) -> String {
    pairs.iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_skips_comments_and_rejects_garbage() {
        let p = parse("# c\n\nalpha = 1.5\n window=-1:1.5 \n").unwrap();
        assert_eq!(p, vec![("alpha".into(), "1.5".into()), ("window".into(), "-1:1.5".into())]);
        assert!(parse("alpha 1.5").is_err());
        assert!(parse("--alpha = 1").is_err());
    }

    #[test]
    fn render_round_trips() {
        let p = vec![("seed".to_string(), "7".to_string()), ("grid".to_string(), "-1:1:0.5".to_string())];
        assert_eq!(parse(&render(&p)).unwrap(), p);
    }

    #[test]
    fn file_flags_go_before_command_line_flags() {
        let dir = std::env::temp_dir().join(format!("sbmlab-config-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let f = dir.join("run.conf");
        std::fs::write(&f, "seed = 3\n").unwrap();
        let argv: Vec<OsString> = ["sbmlab", "--config", f.to_str().unwrap(), "sde", "--seed", "9"]
            .iter()
            .map(OsString::from)
            .collect();
        let out = expand(argv, &["sde"]).unwrap();
        let s: Vec<String> = out.iter().map(|a| a.to_string_lossy().into_owned()).collect();
        assert_eq!(&s[4..], ["--seed=3", "--seed", "9"]);
        std::fs::remove_dir_all(dir).unwrap();
    }
}
