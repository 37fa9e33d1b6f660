//! Configuration files: flat `key = value` lines grouped by `[section]`
//! headers. Keys before any header, or under `[global]`, are global flags;
//! keys under `[<command>]` are flags of that command. Keys are long flag
//! names without the leading dashes; `true`/`false` switch boolean flags.
//! Blank lines and lines starting with `#` or `;` are ignored. Flags given on
//! the command line override the file.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::path::Path;

use crate::error::{CliError, CliResult};

/// Parsed configuration: section name to ordered `(key, value)` pairs.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ConfigFile {
    /// Entries per section; the global section is `"global"`.
    pub sections: BTreeMap<String, Vec<(String, String)>>,
}

impl ConfigFile {
    /// Parses configuration text.
    pub fn parse(text: &str) -> CliResult<Self> {
        let mut sections: BTreeMap<String, Vec<(String, String)>> = BTreeMap::new();
        let mut current = "global".to_string();
        for (no, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') || line.starts_with(';') {
                continue;
            }
            if let Some(rest) = line.strip_prefix('[') {
                let name = rest
                    .strip_suffix(']')
                    .map(str::trim)
                    .filter(|n| !n.is_empty())
                    .ok_or_else(|| CliError::Usage(format!("config line {}: bad section header", no + 1)))?;
                current = name.to_string();
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| CliError::Usage(format!("config line {}: expected key = value", no + 1)))?;
            let k = k.trim();
            if k.is_empty() || k.starts_with('-') {
                return Err(CliError::Usage(format!("config line {}: bad key", no + 1)));
            }
            sections.entry(current.clone()).or_default().push((k.to_string(), v.trim().to_string()));
        }
        Ok(Self { sections })
    }

    /// Reads and parses a file.
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// Flags for `section`, in file order.
    pub fn flags(&self, section: &str) -> Vec<OsString> {
        let mut out = Vec::new();
        for (k, v) in self.sections.get(section).into_iter().flatten() {
            match v.as_str() {
                "true" => out.push(format!("--{k}").into()),
                "false" => {}
                _ => out.push(format!("--{k}={v}").into()),
            }
        }
        out
    }
}

const GLOBAL_VALUE_FLAGS: [&str; 5] = ["--format", "--output", "--seed", "--threads", "--config"];

/// Position of the subcommand token and the `--config` path, if any.
pub fn scan_args(args: &[OsString]) -> (Option<usize>, Option<OsString>) {
    let mut config = None;
    let mut sub = None;
    let mut i = 1;
    while i < args.len() {
        let a = args[i].to_string_lossy();
        if let Some(p) = a.strip_prefix("--config=") {
            config = Some(OsString::from(p));
        } else if a == "--config" {
            config = args.get(i + 1).cloned();
            i += 1;
        } else if sub.is_none() && GLOBAL_VALUE_FLAGS.contains(&a.as_ref()) {
            i += 1;
        } else if sub.is_none() && !a.starts_with('-') {
            sub = Some(i);
        }
        i += 1;
    }
    (sub, config)
}

/// Inserts the configuration's global flags after the program name and its
/// command flags after the subcommand token, so that later command-line
/// occurrences override them.
pub fn merge_args(args: Vec<OsString>) -> CliResult<Vec<OsString>> {
    let (sub, config) = scan_args(&args);
    let Some(path) = config else { return Ok(args) };
    let cfg = ConfigFile::load(Path::new(&path))?;
    let mut out: Vec<OsString> = args.first().cloned().into_iter().collect();
    out.extend(cfg.flags("global"));
    match sub {
        Some(s) => {
            out.extend(args[1..=s].iter().cloned());
            out.extend(cfg.flags(&args[s].to_string_lossy()));
            out.extend(args[s + 1..].iter().cloned());
        }
        None => out.extend(args[1..].iter().cloned()),
    }
    Ok(out)
}
