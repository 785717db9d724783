//! State files for `form-eval`.
//!
//! ```text
//! # alpha = 0.5
//! # q = 1, lambda = 1
//! r,psi0
//! 0.001,0.0316
//! ```
//!
//! Comment lines carry `key = value` pairs; `psi0` is the plane radial
//! profile of the s-wave state, including the charge part `q G_lambda`.

use std::path::Path;

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, PartialEq)]
pub struct StateFile {
    pub alpha: Option<f64>,
    pub charge: f64,
    pub lambda: Option<f64>,
    pub nodes: Vec<f64>,
    pub values: Vec<f64>,
}

pub fn read(path: &Path) -> CliResult<StateFile> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read state file {}: {e}", path.display())))?;
    parse(&text)
}

pub fn parse(text: &str) -> CliResult<StateFile> {
    let err = |n: usize, m: &str| CliError::Config(format!("state file line {}: {m}", n + 1));
    let mut state = StateFile {
        alpha: None,
        charge: 0.0,
        lambda: None,
        nodes: Vec::new(),
        values: Vec::new(),
    };
    let mut header_seen = false;
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(meta) = line.strip_prefix('#') {
            for pair in meta.split(',').filter(|p| p.contains('=')) {
                let (k, v) = pair.split_once('=').unwrap();
                let v: f64 = v
                    .trim()
                    .parse()
                    .map_err(|_| err(n, &format!("bad value for {}", k.trim())))?;
                match k.trim() {
                    "alpha" => state.alpha = Some(v),
                    "q" => state.charge = v,
                    "lambda" => state.lambda = Some(v),
                    other => return Err(err(n, &format!("unknown header key '{other}'"))),
                }
            }
            continue;
        }
        if !header_seen {
            let cols: Vec<&str> = line.split(',').map(str::trim).collect();
            if cols != ["r", "psi0"] {
                return Err(err(n, "expected the column header 'r,psi0'"));
            }
            header_seen = true;
            continue;
        }
        let (r, v) = line
            .split_once(',')
            .ok_or_else(|| err(n, "expected 'r,psi0'"))?;
        let r: f64 = r.trim().parse().map_err(|_| err(n, "bad r"))?;
        let v: f64 = v.trim().parse().map_err(|_| err(n, "bad psi0"))?;
        state.nodes.push(r);
        state.values.push(v);
    }
    if state.nodes.is_empty() {
        return Err(CliError::Config("state file has no samples".into()));
    }
    Ok(state)
}
