//! Run configuration: a key=value config file overridden by command line
//! flags. Validation failures map to exit code 2 in the CLI.

use crate::error::{Error, Result};
use crate::schemes::SchemeId;
use std::collections::BTreeMap;
use std::path::PathBuf;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Command {
    Converge,
    Bubble,
    Custom,
}

#[derive(Clone, Debug)]
pub struct RunConfig {
    pub command: Command,
    pub scheme: SchemeId,
    /// Exact solution id for convergence runs ("sol1" or "sol2").
    pub case: String,
    /// Benchmark id (1 or 2) for bubble runs.
    pub bench: usize,
    /// Refinement level: J_Gamma = 32 * 2^level.
    pub level: usize,
    pub j_gamma: Option<usize>,
    pub h_char: Option<f64>,
    pub tau: Option<f64>,
    pub t_end: Option<f64>,
    pub eps_f: f64,
    pub rtol: f64,
    pub restart: usize,
    pub maxit: usize,
    pub c_a: f64,
    pub outdir: PathBuf,
    /// Emit a VTK snapshot every this many steps (0 disables output).
    pub vtk_every: usize,
}

impl RunConfig {
    fn defaults(command: Command) -> RunConfig {
        RunConfig {
            command,
            scheme: SchemeId::AEx,
            case: "sol1".into(),
            bench: 1,
            level: 0,
            j_gamma: None,
            h_char: None,
            tau: None,
            t_end: None,
            eps_f: 1e-8,
            rtol: 1e-9,
            restart: 50,
            maxit: 400,
            c_a: 20.0,
            outdir: PathBuf::from("out"),
            vtk_every: 0,
        }
    }

    /// The paper's time steps per refinement level.
    pub fn tau_for_level(level: usize) -> f64 {
        [6.4e-2, 1.6e-2, 4e-3, 1e-3][level.min(3)]
    }

    pub fn j_gamma_for_level(level: usize) -> usize {
        32 << level.min(3)
    }
}

/// Parse a config file (key=value lines, `#` comments) plus flag overrides.
/// The first positional argument is the subcommand.
pub fn parse_config(args: &[String]) -> Result<RunConfig> {
    let mut it = args.iter();
    let command = match it.next().map(String::as_str) {
        Some("converge") => Command::Converge,
        Some("bubble") => Command::Bubble,
        Some("custom") => Command::Custom,
        Some(other) => {
            return Err(Error::Config(format!(
                "unknown subcommand '{other}' (expected converge|bubble|custom)"
            )))
        }
        None => return Err(Error::Config("missing subcommand".into())),
    };
    let mut pairs: BTreeMap<String, String> = BTreeMap::new();
    let rest: Vec<&String> = it.collect();
    // config file first so flags override it
    let mut i = 0;
    while i < rest.len() {
        if rest[i] == "--config" {
            let path = rest
                .get(i + 1)
                .ok_or_else(|| Error::Config("--config needs a path".into()))?;
            let text = std::fs::read_to_string(path)
                .map_err(|e| Error::Config(format!("cannot read config file: {e}")))?;
            for line in text.lines() {
                let line = line.trim();
                if line.is_empty() || line.starts_with('#') {
                    continue;
                }
                let (k, v) = line
                    .split_once('=')
                    .ok_or_else(|| Error::Config(format!("bad config line '{line}'")))?;
                pairs.insert(k.trim().to_string(), v.trim().to_string());
            }
            i += 2;
        } else {
            i += 1;
        }
    }
    let mut i = 0;
    while i < rest.len() {
        let flag = rest[i].as_str();
        if flag == "--config" {
            i += 2;
            continue;
        }
        let key = flag
            .strip_prefix("--")
            .ok_or_else(|| Error::Config(format!("expected a --flag, got '{flag}'")))?;
        let value = rest
            .get(i + 1)
            .ok_or_else(|| Error::Config(format!("flag --{key} needs a value")))?;
        pairs.insert(key.replace('-', "_"), value.to_string());
        i += 2;
    }

    let mut cfg = RunConfig::defaults(command);
    for (key, value) in &pairs {
        match key.as_str() {
            "scheme" => {
                cfg.scheme = SchemeId::parse(value)
                    .ok_or_else(|| Error::Config(format!("unknown scheme '{value}'")))?;
            }
            "case" => {
                if value != "sol1" && value != "sol2" {
                    return Err(Error::Config(format!("unknown case '{value}'")));
                }
                cfg.case = value.clone();
            }
            "bench" => cfg.bench = parse_num(key, value)?,
            "level" => cfg.level = parse_num(key, value)?,
            "j_gamma" => cfg.j_gamma = Some(parse_num(key, value)?),
            "h_char" => cfg.h_char = Some(parse_pos(key, value)?),
            "tau" => cfg.tau = Some(parse_pos(key, value)?),
            "t_end" | "T" => cfg.t_end = Some(parse_pos_or_zero(key, value)?),
            "eps_f" => cfg.eps_f = parse_pos(key, value)?,
            "rtol" => cfg.rtol = parse_pos(key, value)?,
            "restart" => cfg.restart = parse_num(key, value)?,
            "maxit" => cfg.maxit = parse_num(key, value)?,
            "c_a" => cfg.c_a = parse_pos(key, value)?,
            "outdir" => cfg.outdir = PathBuf::from(value),
            "vtk_every" => cfg.vtk_every = parse_num(key, value)?,
            other => return Err(Error::Config(format!("unknown key '{other}'"))),
        }
    }
    if cfg.command == Command::Bubble && !(cfg.bench == 1 || cfg.bench == 2) {
        return Err(Error::Config(format!("bench must be 1 or 2, got {}", cfg.bench)));
    }
    if cfg.level > 3 {
        return Err(Error::Config(format!("level must be 0..=3, got {}", cfg.level)));
    }
    Ok(cfg)
}

fn parse_num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("invalid value for {key}: '{value}'")))
}

fn parse_pos(key: &str, value: &str) -> Result<f64> {
    let v: f64 = parse_num(key, value)?;
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(Error::Config(format!("{key} must be positive, got {value}")))
    }
}

fn parse_pos_or_zero(key: &str, value: &str) -> Result<f64> {
    let v: f64 = parse_num(key, value)?;
    if v >= 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(Error::Config(format!("{key} must be nonnegative, got {value}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn args(list: &[&str]) -> Vec<String> {
        list.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn defaults_applied() {
        let cfg = parse_config(&args(&["converge", "--case", "sol1", "--scheme", "aex", "--level", "0"]))
            .unwrap();
        assert_eq!(cfg.eps_f, 1e-8);
        assert_eq!(cfg.c_a, 20.0);
        assert_eq!(cfg.restart, 50);
        assert_eq!(cfg.rtol, 1e-9);
        assert_eq!(cfg.scheme, SchemeId::AEx);
    }

    #[test]
    fn negative_tau_rejected() {
        assert!(matches!(
            parse_config(&args(&["converge", "--tau", "-1"])),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn flag_overrides_file() {
        let dir = std::env::temp_dir().join("tideflow_cfg_test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("run.cfg");
        std::fs::write(&path, "tau=4e-3\nscheme=b\n").unwrap();
        let cfg = parse_config(&args(&[
            "converge",
            "--config",
            path.to_str().unwrap(),
            "--tau",
            "1e-3",
        ]))
        .unwrap();
        assert_eq!(cfg.tau, Some(1e-3));
        assert_eq!(cfg.scheme, SchemeId::B);
    }

    #[test]
    fn unknown_key_rejected() {
        assert!(matches!(
            parse_config(&args(&["bubble", "--wibble", "3"])),
            Err(Error::Config(_))
        ));
    }
}
