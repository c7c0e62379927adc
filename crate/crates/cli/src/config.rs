//! `--config FILE` support: a flat JSON object whose keys are flag names
//! (`t_max` and `t-max` both work). Its entries are spliced in right after
//! the subcommand, so flags given on the command line win.

use std::ffi::OsString;

use anyhow::{bail, Context, Result};
use serde_json::Value;

pub fn expand_args(mut argv: Vec<OsString>) -> Result<Vec<OsString>> {
    let Some(pos) = argv.iter().position(|a| a == "--config" || a.to_string_lossy().starts_with("--config=")) else {
        return Ok(argv);
    };
    let flag = argv.remove(pos).to_string_lossy().into_owned();
    let path = match flag.strip_prefix("--config=") {
        Some(p) => p.to_string(),
        None => {
            if pos >= argv.len() {
                bail!("--config needs a file path");
            }
            argv.remove(pos).to_string_lossy().into_owned()
        }
    };
    let text = std::fs::read_to_string(&path).with_context(|| format!("reading config {path}"))?;
    let injected = config_args(&text).with_context(|| format!("config {path}"))?;
    // argv[0] is the program, argv[1] the subcommand.
    if argv.len() < 2 || pos < 2 {
        bail!("--config must follow the subcommand");
    }
    argv.splice(2..2, injected);
    Ok(argv)
}

fn config_args(text: &str) -> Result<Vec<OsString>> {
    let Value::Object(map) = serde_json::from_str::<Value>(text)? else {
        bail!("expected a JSON object");
    };
    let mut out = Vec::new();
    for (key, value) in map {
        let flag = format!("--{}", key.replace('_', "-"));
        match value {
            Value::Bool(true) => out.push(flag.into()),
            Value::Bool(false) | Value::Null => {}
            Value::String(s) => out.extend([flag.into(), s.into()]),
            Value::Number(n) => out.extend([flag.into(), n.to_string().into()]),
            Value::Array(_) | Value::Object(_) => bail!("{key}: expected a scalar"),
        }
    }
    Ok(out)
}
