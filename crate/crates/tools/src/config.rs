//! Run configuration and its flat `key = value` file format.
//!
//! ```text
//! # lines starting with '#' are ignored
//! problem = scholtes4
//! scheme = ba
//! eps_tol = 1e-12
//! z0 = 1, 1, 1
//! ```

use std::path::PathBuf;

use mpcc_core::bounding::HomotopyOptions;
use mpcc_core::nlp::SolverOptions;
use mpcc_core::problems::{describe, lookup, registry, RegistryEntry};
use mpcc_core::Scheme;

use crate::format::{full, parse_list};
use crate::{CliError, CliResult};

pub const KEYS: [&str; 12] = [
    "problem",
    "scheme",
    "eps0",
    "kappa",
    "eps_tol",
    "tol",
    "max_iter",
    "z0",
    "activity_tol",
    "trace",
    "summary",
    "seed",
];

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub problem: String,
    pub scheme: Scheme,
    pub eps0: f64,
    pub kappa: f64,
    pub eps_tol: f64,
    /// Inner KKT tolerance.
    pub tol: f64,
    pub max_iter: usize,
    /// Starting point; the registry default when absent.
    pub z0: Option<Vec<f64>>,
    pub activity_tol: Option<f64>,
    /// Trace CSV destination.
    pub trace: Option<PathBuf>,
    /// Summary destination, in addition to stdout.
    pub summary: Option<PathBuf>,
    /// Seed of the tangent sampling run on the limit point.
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        let h = HomotopyOptions::default();
        Self {
            problem: "scholtes4".into(),
            scheme: Scheme::Ba,
            eps0: h.eps0,
            kappa: h.kappa,
            eps_tol: h.eps_tol,
            tol: h.inner.tol,
            max_iter: h.inner.max_iter,
            z0: None,
            activity_tol: None,
            trace: None,
            summary: None,
            seed: 0,
        }
    }
}

fn number<T: std::str::FromStr>(key: &str, value: &str) -> CliResult<T> {
    value
        .parse()
        .map_err(|_| CliError::Usage(format!("{key}: cannot parse `{value}`")))
}

pub fn parse_scheme(s: &str) -> CliResult<Scheme> {
    Scheme::parse(s).ok_or_else(|| CliError::Usage(format!("unknown scheme `{s}`; expected ba, mlf or reg")))
}

/// Registry lookup with the listing attached to the error.
pub fn entry(name: &str) -> CliResult<RegistryEntry> {
    lookup(name).map_err(|e| {
        let mut msg = format!("unknown problem `{}`\navailable problems:", e.name);
        for r in registry() {
            msg.push_str("\n  ");
            msg.push_str(&describe(&r));
        }
        CliError::Usage(msg)
    })
}

impl RunConfig {
    pub fn set(&mut self, key: &str, value: &str) -> CliResult<()> {
        let value = value.trim();
        match key {
            "problem" => self.problem = value.to_string(),
            "scheme" => self.scheme = parse_scheme(value)?,
            "eps0" => self.eps0 = number(key, value)?,
            "kappa" => self.kappa = number(key, value)?,
            "eps_tol" => self.eps_tol = number(key, value)?,
            "tol" => self.tol = number(key, value)?,
            "max_iter" => self.max_iter = number(key, value)?,
            "z0" => self.z0 = Some(parse_list(value).map_err(|e| CliError::Usage(format!("z0: {e}")))?),
            "activity_tol" => self.activity_tol = Some(number(key, value)?),
            "trace" => self.trace = Some(value.into()),
            "summary" => self.summary = Some(value.into()),
            "seed" => self.seed = number(key, value)?,
            _ => {
                return Err(CliError::Usage(format!(
                    "unknown config key `{key}`; expected one of {}",
                    KEYS.join(", ")
                )))
            }
        }
        Ok(())
    }

    /// Applies a config file on top of `self`.
    pub fn merge_text(&mut self, text: &str) -> CliResult<()> {
        for (no, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| CliError::Usage(format!("line {}: expected key = value", no + 1)))?;
            self.set(k.trim(), v)
                .map_err(|e| CliError::Usage(format!("line {}: {e}", no + 1)))?;
        }
        Ok(())
    }

    pub fn from_text(text: &str) -> CliResult<Self> {
        let mut c = Self::default();
        c.merge_text(text)?;
        Ok(c)
    }

    /// The file form; `from_text(to_text())` reproduces the config.
    pub fn to_text(&self) -> String {
        let mut out = format!(
            "problem = {}\nscheme = {}\neps0 = {}\nkappa = {}\neps_tol = {}\ntol = {}\nmax_iter = {}\n",
            self.problem,
            self.scheme.to_string().to_lowercase(),
            full(self.eps0),
            full(self.kappa),
            full(self.eps_tol),
            full(self.tol),
            self.max_iter
        );
        if let Some(z) = &self.z0 {
            let parts: Vec<String> = z.iter().map(|&x| full(x)).collect();
            out.push_str(&format!("z0 = {}\n", parts.join(", ")));
        }
        if let Some(t) = self.activity_tol {
            out.push_str(&format!("activity_tol = {}\n", full(t)));
        }
        if let Some(p) = &self.trace {
            out.push_str(&format!("trace = {}\n", p.display()));
        }
        if let Some(p) = &self.summary {
            out.push_str(&format!("summary = {}\n", p.display()));
        }
        out.push_str(&format!("seed = {}\n", self.seed));
        out
    }

    /// Checks the driver preconditions and resolves the problem.
    pub fn validate(&self) -> CliResult<RegistryEntry> {
        let e = entry(&self.problem)?;
        let bad = |m: String| Err(CliError::Usage(m));
        if !(self.eps0 > 0.0 && self.eps0.is_finite()) {
            return bad(format!("eps0 must be positive, got {}", self.eps0));
        }
        if !(self.kappa > 0.0 && self.kappa < 1.0) {
            return bad(format!("kappa must lie in (0, 1), got {}", self.kappa));
        }
        if !(self.eps_tol > 0.0 && self.eps_tol <= self.eps0) {
            return bad(format!("eps_tol must lie in (0, eps0], got {}", self.eps_tol));
        }
        if !(self.tol > 0.0) {
            return bad(format!("tol must be positive, got {}", self.tol));
        }
        if self.max_iter == 0 {
            return bad("max_iter must be positive".into());
        }
        if let Some(t) = self.activity_tol {
            if !(t > 0.0) {
                return bad(format!("activity_tol must be positive, got {t}"));
            }
        }
        if let Some(z) = &self.z0 {
            if z.len() != e.problem.n || z.iter().any(|v| !v.is_finite()) {
                return bad(format!("z0 needs {} finite entries for {}, got {}", e.problem.n, e.problem.name, z.len()));
            }
        }
        Ok(e)
    }

    pub fn homotopy_options(&self, entry: &RegistryEntry) -> HomotopyOptions {
        HomotopyOptions {
            eps0: self.eps0,
            kappa: self.kappa,
            eps_tol: self.eps_tol,
            z0: Some(self.z0.clone().unwrap_or_else(|| entry.default_z0.clone())),
            inner: SolverOptions {
                tol: self.tol,
                max_iter: self.max_iter,
                ..SolverOptions::default()
            },
            activity_tol: self.activity_tol,
            ..HomotopyOptions::default()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn text_round_trip() {
        let c = RunConfig {
            problem: "ex9_2_2".into(),
            scheme: Scheme::Mlf,
            eps0: 3e-3,
            z0: Some(vec![1.0; 8]),
            activity_tol: Some(1e-7),
            trace: Some("out/trace.csv".into()),
            seed: 9,
            ..RunConfig::default()
        };
        assert_eq!(RunConfig::from_text(&c.to_text()).unwrap(), c);
    }

    #[test]
    fn comments_and_errors() {
        let c = RunConfig::from_text("# x\n\nscheme = REG\n kappa=0.2 \n").unwrap();
        assert_eq!((c.scheme, c.kappa), (Scheme::Reg, 0.2));
        for bad in ["kappa", "nosuch = 1", "kappa = fast", "scheme = sqp"] {
            assert!(matches!(RunConfig::from_text(bad), Err(CliError::Usage(_))), "{bad}");
        }
    }

    #[test]
    fn validation() {
        assert!(RunConfig::default().validate().is_ok());
        let cases = [
            RunConfig { kappa: 1.0, ..RunConfig::default() },
            RunConfig { eps_tol: 1.0, ..RunConfig::default() },
            RunConfig { z0: Some(vec![1.0]), ..RunConfig::default() },
            RunConfig { problem: "nosuch".into(), ..RunConfig::default() },
        ];
        for c in cases {
            assert_eq!(c.validate().unwrap_err().exit_code(), 2, "{c:?}");
        }
    }
}
