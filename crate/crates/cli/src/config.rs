//! Run configuration: flat `key=value` files, flag overrides and the
//! manifest that echoes the resolved values.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::PathBuf;

use sinhpoisson::pipeline::{format_signs, parse_signs};

use crate::CliError;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
pub const MANIFEST_NAME: &str = "manifest.txt";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Optimize,
    Solve,
    Sweep,
    Verify,
    Probe,
}

impl Command {
    pub fn parse(s: &str) -> Result<Self, CliError> {
        match s.trim() {
            "optimize" => Ok(Command::Optimize),
            "solve" => Ok(Command::Solve),
            "sweep" => Ok(Command::Sweep),
            "verify" => Ok(Command::Verify),
            "probe" => Ok(Command::Probe),
            other => Err(CliError::Config(format!("unknown command {other:?}"))),
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Command::Optimize => "optimize",
            Command::Solve => "solve",
            Command::Sweep => "sweep",
            Command::Verify => "verify",
            Command::Probe => "probe",
        }
    }
}

/// Keys accepted in config files and as flags (with `-` for `_`).
pub const KEYS: &[&str] = &[
    "command",
    "k",
    "signs",
    "xi",
    "lambda",
    "lambda_range",
    "factor",
    "base_n",
    "tol",
    "seed",
    "out",
    "profile",
    "report",
    "starts",
    "sigma",
];

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub command: Command,
    pub k: usize,
    pub signs: Vec<i8>,
    /// Explicit points; otherwise the reduced-energy maximizer is used.
    pub xi: Option<Vec<f64>>,
    pub lambda: Option<f64>,
    pub lambda_range: Option<(f64, f64)>,
    pub factor: f64,
    pub base_n: usize,
    pub tol: f64,
    pub seed: u64,
    pub out: PathBuf,
    pub profile: Option<PathBuf>,
    pub report: Option<PathBuf>,
    /// Number of random starts for `probe`.
    pub starts: usize,
    /// Whether to compute the linearized smallest singular values.
    pub sigma: bool,
}

/// Parses `key=value` lines; blank lines and `#` comments are skipped.
pub fn parse_config_text(text: &str) -> Result<BTreeMap<String, String>, CliError> {
    let mut map = BTreeMap::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| CliError::Config(format!("line {}: expected key=value, got {line:?}", n + 1)))?;
        let key = key.trim().replace('-', "_");
        if key == "version" {
            continue;
        }
        if !KEYS.contains(&key.as_str()) {
            return Err(CliError::Config(format!("line {}: unknown key {key:?}", n + 1)));
        }
        map.insert(key, value.trim().to_string());
    }
    Ok(map)
}

fn num<T: std::str::FromStr>(map: &BTreeMap<String, String>, key: &str) -> Result<Option<T>, CliError>
where
    T::Err: std::fmt::Display,
{
    map.get(key)
        .map(|v| v.parse::<T>().map_err(|e| CliError::Config(format!("{key}={v:?}: {e}"))))
        .transpose()
}

fn parse_list(key: &str, v: &str) -> Result<Vec<f64>, CliError> {
    v.split(',')
        .map(|s| s.trim().parse::<f64>().map_err(|e| CliError::Config(format!("{key}={v:?}: {e}"))))
        .collect()
}

fn parse_range(v: &str) -> Result<(f64, f64), CliError> {
    let (a, b) = v
        .split_once(':')
        .ok_or_else(|| CliError::Config(format!("lambda_range={v:?}: expected start:end")))?;
    let p = |s: &str| {
        s.trim()
            .parse::<f64>()
            .map_err(|e| CliError::Config(format!("lambda_range={v:?}: {e}")))
    };
    Ok((p(a)?, p(b)?))
}

fn parse_bool(key: &str, v: &str) -> Result<bool, CliError> {
    match v {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        _ => Err(CliError::Config(format!("{key}={v:?}: expected true or false"))),
    }
}

impl RunConfig {
    /// Builds a configuration from merged key-value pairs.
    pub fn from_map(map: &BTreeMap<String, String>) -> Result<Self, CliError> {
        let command = Command::parse(
            map.get("command")
                .ok_or_else(|| CliError::Config("no command given".into()))?,
        )?;
        let xi = map.get("xi").map(|v| parse_list("xi", v)).transpose()?;
        let k = match (num::<usize>(map, "k")?, &xi) {
            (Some(k), Some(x)) if k != x.len() => {
                return Err(CliError::Config(format!("k = {k} but {} points given", x.len())))
            }
            (Some(k), _) => k,
            (None, Some(x)) => x.len(),
            (None, None) => 1,
        };
        let signs = parse_signs(map.get("signs").map(String::as_str).unwrap_or("alternating"), k)?;
        let cfg = Self {
            command,
            k,
            signs,
            xi,
            lambda: num(map, "lambda")?,
            lambda_range: map.get("lambda_range").map(|v| parse_range(v)).transpose()?,
            factor: num(map, "factor")?.unwrap_or(0.5),
            base_n: num(map, "base_n")?.unwrap_or(sinhpoisson::solver::DEFAULT_BASE_N),
            tol: num(map, "tol")?.unwrap_or(1e-10),
            seed: num(map, "seed")?.unwrap_or(0),
            out: map.get("out").map(PathBuf::from).unwrap_or_else(|| PathBuf::from("out")),
            profile: map.get("profile").map(PathBuf::from),
            report: map.get("report").map(PathBuf::from),
            starts: num(map, "starts")?.unwrap_or(200),
            sigma: map.get("sigma").map(|v| parse_bool("sigma", v)).transpose()?.unwrap_or(true),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<(), CliError> {
        let bad = |m: String| Err(CliError::Config(m));
        if let Some(l) = self.lambda {
            if !(l > 0.0 && l.is_finite()) {
                return bad(format!("lambda must be positive, got {l}"));
            }
        }
        if let Some((a, b)) = self.lambda_range {
            if !(b > 0.0 && a >= b && a.is_finite()) {
                return bad(format!("lambda_range needs start >= end > 0, got {a}:{b}"));
            }
        }
        if !(self.factor > 0.0 && self.factor < 1.0) {
            return bad(format!("factor must lie in (0, 1), got {}", self.factor));
        }
        if self.base_n < 64 {
            return bad(format!("base_n must be at least 64, got {}", self.base_n));
        }
        if self.tol.is_nan() || self.tol <= 0.0 {
            return bad(format!("tol must be positive, got {}", self.tol));
        }
        if self.starts == 0 {
            return bad("starts must be positive".into());
        }
        if self.k == 0 && self.command != Command::Verify {
            return bad("k must be at least 1".into());
        }
        Ok(())
    }

    /// Resolved configuration in config-file syntax. Floats use the
    /// round-trip formatting, so parsing the manifest gives back `self`.
    pub fn manifest(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "# sinhpoisson run manifest");
        let _ = writeln!(s, "version={VERSION}");
        let _ = writeln!(s, "command={}", self.command.as_str());
        let _ = writeln!(s, "k={}", self.k);
        let _ = writeln!(s, "signs={}", format_signs(&self.signs));
        if let Some(xi) = &self.xi {
            let list: Vec<String> = xi.iter().map(|v| format!("{v:?}")).collect();
            let _ = writeln!(s, "xi={}", list.join(","));
        }
        if let Some(l) = self.lambda {
            let _ = writeln!(s, "lambda={l:?}");
        }
        if let Some((a, b)) = self.lambda_range {
            let _ = writeln!(s, "lambda_range={a:?}:{b:?}");
        }
        let _ = writeln!(s, "factor={:?}", self.factor);
        let _ = writeln!(s, "base_n={}", self.base_n);
        let _ = writeln!(s, "tol={:?}", self.tol);
        let _ = writeln!(s, "seed={}", self.seed);
        let _ = writeln!(s, "out={}", self.out.display());
        if let Some(p) = &self.profile {
            let _ = writeln!(s, "profile={}", p.display());
        }
        if let Some(p) = &self.report {
            let _ = writeln!(s, "report={}", p.display());
        }
        let _ = writeln!(s, "starts={}", self.starts);
        let _ = writeln!(s, "sigma={}", self.sigma);
        s
    }
}

/// File values overridden by flag values.
pub fn merge(file: BTreeMap<String, String>, flags: BTreeMap<String, String>) -> BTreeMap<String, String> {
    let mut out = file;
    out.extend(flags);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn map(pairs: &[(&str, &str)]) -> BTreeMap<String, String> {
        pairs.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect()
    }

    #[test]
    fn defaults_and_overrides() {
        let file = parse_config_text("# comment\ncommand=sweep\nk=2\nlambda-range=0.2:0.05\n\nbase_n=128\n").unwrap();
        let cfg = RunConfig::from_map(&merge(file, map(&[("base_n", "96")]))).unwrap();
        assert_eq!(cfg.command, Command::Sweep);
        assert_eq!(cfg.k, 2);
        assert_eq!(cfg.signs, vec![1, -1]);
        assert_eq!(cfg.lambda_range, Some((0.2, 0.05)));
        assert_eq!(cfg.base_n, 96);
        assert_eq!(cfg.factor, 0.5);
    }

    #[test]
    fn manifest_round_trip() {
        let cfg = RunConfig::from_map(&map(&[
            ("command", "solve"),
            ("xi", "-0.3,0.7"),
            ("signs", "+-"),
            ("lambda", "0.1"),
            ("tol", "1e-11"),
            ("sigma", "false"),
        ]))
        .unwrap();
        let back = RunConfig::from_map(&parse_config_text(&cfg.manifest()).unwrap()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn config_errors() {
        assert!(parse_config_text("nonsense").is_err());
        assert!(parse_config_text("colour=blue").is_err());
        for bad in [
            map(&[("k", "1")]),
            map(&[("command", "dance")]),
            map(&[("command", "solve"), ("k", "x")]),
            map(&[("command", "solve"), ("k", "2"), ("signs", "+")]),
            map(&[("command", "solve"), ("k", "3"), ("xi", "0.1,0.2")]),
            map(&[("command", "sweep"), ("lambda_range", "0.1:0.2")]),
            map(&[("command", "sweep"), ("factor", "1.5")]),
            map(&[("command", "solve"), ("base_n", "8")]),
        ] {
            assert!(matches!(RunConfig::from_map(&bad), Err(CliError::Config(_))), "{bad:?}");
        }
    }
}
