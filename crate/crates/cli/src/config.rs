//! Flat `key=value` configuration merged with command-line flags.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use crate::failure::Failure;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kind {
    Value,
    Flag,
}

/// One configurable setting of a subcommand.
#[derive(Debug, Clone, Copy)]
pub struct Key {
    pub name: &'static str,
    pub help: &'static str,
    pub kind: Kind,
    pub default: Option<&'static str>,
    pub required: bool,
}

/// A setting that is required unless it has a default.
const fn value(name: &'static str, help: &'static str, default: Option<&'static str>) -> Key {
    Key {
        name,
        help,
        kind: Kind::Value,
        default,
        required: default.is_none(),
    }
}

const fn optional(name: &'static str, help: &'static str) -> Key {
    Key {
        name,
        help,
        kind: Kind::Value,
        default: None,
        required: false,
    }
}

const fn flag(name: &'static str, help: &'static str) -> Key {
    Key {
        name,
        help,
        kind: Kind::Flag,
        default: Some("false"),
        required: false,
    }
}

const N_SITES: Key = value("n-sites", "number of sites N", None);
const W: Key = value("w", "half-bandwidth W", None);
const BETA: Key = value("beta", "symmetry class: 1 (signs) or 2 (phases)", Some("1"));
const SEED: Key = value("seed", "master seed", Some("0"));
const REPLICATES: Key = value("replicates", "number of independent matrices", None);
const EIGEN_BUDGET: Key = value("eigen-budget", "largest N the eigensolvers accept", Some("4096"));
const ROUTE: Key = value("route", "eigensolver: auto, banded or dense", Some("auto"));

/// Every subcommand with its settings, in help order.
pub const COMMANDS: &[(&str, &str, &[Key])] = &[
    (
        "walk",
        "walk counts on the circulant graph against the Fourier sum and asymptotics",
        &[
            N_SITES,
            W,
            value("lengths", "walk lengths, e.g. 8,16 or 1..64", None),
            optional("r", "displacements to report (default: all)"),
            flag(
                "skip-exact",
                "leave count_exact empty instead of running the exact count",
            ),
            value(
                "dp-budget",
                "cap on N times the longest length for the exact count",
                Some("10000000"),
            ),
        ],
    ),
    (
        "moments",
        "traces of the non-backtracking powers H^(n)",
        &[
            N_SITES,
            W,
            BETA,
            value("max-length", "largest n", None),
            value("replicates", "number of independent matrices", Some("1")),
            SEED,
            value("method", "auto, exact or hutchinson", Some("auto")),
            value("probes", "Hutchinson probe vectors per matrix", Some("64")),
            value("trace-budget", "largest N for exact traces", Some("4096")),
        ],
    ),
    (
        "oracle",
        "path-counting joint moments, cumulant and diagram census",
        &[
            N_SITES,
            W,
            BETA,
            value("lengths", "path lengths n(1),...,n(k)", None),
            flag("check-exhaustive", "also average over every sign matrix and compare"),
            value("max-total-length", "budget on the summed length", Some("10")),
            value("max-sites", "budget on N", Some("12")),
            value("max-paths", "budget on enumerated k-paths", Some("50000000")),
        ],
    ),
    (
        "edge",
        "extreme eigenvalues and edge counting curves over an ensemble",
        &[
            N_SITES,
            W,
            BETA,
            REPLICATES,
            SEED,
            value("regime", "edge scaling: rmt or poisson", Some("rmt")),
            value("lambda-start", "first grid point", Some("-4")),
            value("lambda-stop", "last grid point", Some("8")),
            value("lambda-count", "number of grid points", Some("121")),
            EIGEN_BUDGET,
            ROUTE,
        ],
    ),
    (
        "norm",
        "normalized operator norm across half-bandwidths",
        &[
            N_SITES,
            value("ws", "half-bandwidths, e.g. 1,2,36", None),
            BETA,
            REPLICATES,
            SEED,
            EIGEN_BUDGET,
            ROUTE,
        ],
    ),
    (
        "validate",
        "check a band matrix (read from --matrix, or sampled from --seed)",
        &[
            N_SITES,
            W,
            BETA,
            optional("matrix", "CSV file with columns u,v,re,im"),
            SEED,
        ],
    ),
];

pub fn keys_for(command: &str) -> &'static [Key] {
    COMMANDS
        .iter()
        .find(|(name, _, _)| *name == command)
        .map(|(_, _, keys)| *keys)
        .unwrap_or(&[])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Origin {
    Default,
    File { line: usize },
    Flag,
}

impl fmt::Display for Origin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Origin::Default => f.write_str("default"),
            Origin::File { line } => write!(f, "config line {line}"),
            Origin::Flag => f.write_str("command line"),
        }
    }
}

/// Reads a flat config file: one `key = value` per line, `#` comments.
/// Keys may use `_` or `-`.
pub fn parse_config(text: &str, keys: &[Key]) -> Result<BTreeMap<&'static str, (String, usize)>, Failure> {
    let mut out = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let body = raw.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let Some((k, v)) = body.split_once('=') else {
            return Err(Failure::config(format!("expected key=value, got {body:?}")).at_line(line));
        };
        let k = k.trim().replace('_', "-");
        let Some(key) = keys.iter().find(|key| key.name == k) else {
            return Err(Failure::config(format!("unknown key {k:?}")).at_line(line).on_field(&k));
        };
        if out.insert(key.name, (v.trim().to_string(), line)).is_some() {
            return Err(Failure::config(format!("key {k:?} given twice"))
                .at_line(line)
                .on_field(&k));
        }
    }
    Ok(out)
}

/// Resolved settings of one run.
#[derive(Debug, Clone)]
pub struct Settings {
    pub command: &'static str,
    values: BTreeMap<&'static str, (String, Origin)>,
}

impl Settings {
    /// Defaults, then file entries, then flags.
    pub fn resolve(
        command: &'static str,
        file: BTreeMap<&'static str, (String, usize)>,
        flags: BTreeMap<&'static str, String>,
    ) -> Self {
        let mut values = BTreeMap::new();
        for key in keys_for(command) {
            if let Some(d) = key.default {
                values.insert(key.name, (d.to_string(), Origin::Default));
            }
        }
        for (k, (v, line)) in file {
            values.insert(k, (v, Origin::File { line }));
        }
        for (k, v) in flags {
            values.insert(k, (v, Origin::Flag));
        }
        Self { command, values }
    }

    /// Fails on the first required setting that is absent.
    pub fn check_required(&self) -> Result<(), Failure> {
        for key in keys_for(self.command) {
            if key.required && !self.values.contains_key(key.name) {
                return Err(self.fail(key.name, format!("missing required setting --{}", key.name)));
            }
        }
        Ok(())
    }

    pub fn entries(&self) -> impl Iterator<Item = (&'static str, &str)> {
        self.values.iter().map(|(k, (v, _))| (*k, v.as_str()))
    }

    pub fn raw(&self, name: &str) -> Option<&str> {
        self.values.get(name).map(|(v, _)| v.as_str())
    }

    fn fail(&self, name: &str, message: String) -> Failure {
        let mut f = Failure::config(message).on_field(name);
        if let Some((_, Origin::File { line })) = self.values.get(name) {
            f = f.at_line(*line);
        }
        f
    }

    pub fn get<T: FromStr>(&self, name: &str) -> Result<T, Failure>
    where
        T::Err: fmt::Display,
    {
        let Some((v, origin)) = self.values.get(name) else {
            return Err(self.fail(name, format!("missing required setting --{name}")));
        };
        v.parse()
            .map_err(|e| self.fail(name, format!("--{name} ({origin}): cannot parse {v:?}: {e}")))
    }

    pub fn get_opt<T: FromStr>(&self, name: &str) -> Result<Option<T>, Failure>
    where
        T::Err: fmt::Display,
    {
        if self.values.contains_key(name) {
            self.get(name).map(Some)
        } else {
            Ok(None)
        }
    }

    pub fn flag(&self, name: &str) -> Result<bool, Failure> {
        self.get(name)
    }

    /// A comma-separated list whose items are integers or inclusive ranges `a..b`.
    pub fn list(&self, name: &str) -> Result<Vec<u64>, Failure> {
        let raw = self
            .raw(name)
            .ok_or_else(|| self.fail(name, format!("missing required setting --{name}")))?;
        parse_list(raw).map_err(|e| self.fail(name, format!("--{name}: {e}")))
    }

    pub fn list_opt(&self, name: &str) -> Result<Option<Vec<u64>>, Failure> {
        if self.values.contains_key(name) {
            self.list(name).map(Some)
        } else {
            Ok(None)
        }
    }

    pub fn path_opt(&self, name: &str) -> Option<&Path> {
        self.raw(name).map(Path::new)
    }

    /// A config failure attributed to `name`.
    pub fn invalid(&self, name: &str, message: impl Into<String>) -> Failure {
        self.fail(name, message.into())
    }
}

fn parse_list(raw: &str) -> Result<Vec<u64>, String> {
    let mut out = Vec::new();
    for item in raw.split(',').map(str::trim) {
        if let Some((a, b)) = item.split_once("..") {
            let a: u64 = a.trim().parse().map_err(|e| format!("bad range start {a:?}: {e}"))?;
            let b: u64 = b.trim().parse().map_err(|e| format!("bad range end {b:?}: {e}"))?;
            if a > b {
                return Err(format!("empty range {item:?}"));
            }
            out.extend(a..=b);
        } else {
            out.push(item.parse().map_err(|e| format!("bad item {item:?}: {e}"))?);
        }
    }
    if out.is_empty() {
        return Err("empty list".into());
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lists_and_ranges() {
        assert_eq!(parse_list("3, 5..7,2").unwrap(), vec![3, 5, 6, 7, 2]);
        assert!(parse_list("7..5").is_err());
        assert!(parse_list("x").is_err());
    }

    #[test]
    fn file_then_flags() {
        let keys = keys_for("edge");
        let file = parse_config("# run\nn_sites = 64\nw=4\nseed = 9 # inline\n", keys).unwrap();
        let mut flags = BTreeMap::new();
        flags.insert("seed", "11".to_string());
        let s = Settings::resolve("edge", file, flags);
        assert_eq!(s.get::<usize>("n-sites").unwrap(), 64);
        assert_eq!(s.get::<u64>("seed").unwrap(), 11);
        assert_eq!(s.raw("regime"), Some("rmt"));
    }

    #[test]
    fn diagnostics_carry_line_and_field() {
        let keys = keys_for("walk");
        let err = parse_config("w = 2\nbogus = 1\n", keys).unwrap_err();
        assert_eq!(err.line, Some(2));
        assert_eq!(err.field.as_deref(), Some("bogus"));

        let file = parse_config("n-sites = many\n", keys).unwrap();
        let s = Settings::resolve("walk", file, BTreeMap::new());
        let err = s.get::<usize>("n-sites").unwrap_err();
        assert_eq!(err.line, Some(1));
        assert!(s.get::<usize>("w").is_err());
        assert_eq!(s.check_required().unwrap_err().field.as_deref(), Some("w"));
    }
}
