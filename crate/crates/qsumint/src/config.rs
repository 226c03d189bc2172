//! Run configuration: the identity selector, trial counts, policy
//! overrides, and the plain-text config file (key = value in sections).
//!
//! Resolution order: built-in defaults, then the config file, then CLI
//! flags. A file looks like:
//!
//! ```text
//! [run]
//! identity = qbeta
//! trials = 20
//! seed = 3
//! q = 0.3
//! tol = 1e-6
//!
//! [policy]
//! quad_nodes_min = 128
//! sum_window_max = 64
//!
//! [output]
//! json = out.json
//! ```

use crate::error::{Error, Result};
use crate::qkernel::TruncationPolicy;
use crate::report::EmitFormat;

/// Which identity a run checks.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Identity {
    QBeta,
    StarTriangle,
    Reflection,
    DProps,
    Bailey,
}

impl Identity {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "qbeta" => Ok(Identity::QBeta),
            "star-triangle" => Ok(Identity::StarTriangle),
            "reflection" => Ok(Identity::Reflection),
            "d-props" => Ok(Identity::DProps),
            "bailey" => Ok(Identity::Bailey),
            other => Err(Error::Config(format!(
                "unknown identity {other:?}; expected qbeta | star-triangle | reflection | d-props | bailey"
            ))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Identity::QBeta => "qbeta",
            Identity::StarTriangle => "star-triangle",
            Identity::Reflection => "reflection",
            Identity::DProps => "d-props",
            Identity::Bailey => "bailey",
        }
    }

    /// Default identity tolerance: 1e-6 for the q-beta sum-integral, 1e-5
    /// for the star-triangle kernel and Bailey comparisons (one extra
    /// quadrature layer), tighter closed-form tolerances otherwise.
    pub fn default_tol(&self) -> f64 {
        match self {
            Identity::QBeta => 1e-6,
            Identity::StarTriangle => 1e-5,
            Identity::Bailey => 1e-5,
            Identity::DProps => 1e-10,
            Identity::Reflection => 1e-12,
        }
    }
}

/// A fully-resolved run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub identity: Identity,
    pub trials: u32,
    pub seed: u64,
    pub q_override: Option<f64>,
    pub policy: TruncationPolicy,
    pub identity_tol: f64,
    pub output: Option<(EmitFormat, String)>,
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if self.trials < 1 {
            return Err(Error::Config("trials must be >= 1".into()));
        }
        if !(self.identity_tol > 0.0) {
            return Err(Error::Config(format!(
                "tolerance must be positive, got {}",
                self.identity_tol
            )));
        }
        if let Some(q) = self.q_override {
            if !(q > 0.0 && q < 1.0) {
                return Err(Error::Config(format!("q must satisfy 0 < q < 1, got {q}")));
            }
        }
        self.policy.validate()
    }
}

/// Settings gathered from one source (file or flags); `None` means "not
/// specified here".
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PartialConfig {
    pub identity: Option<Identity>,
    pub trials: Option<u32>,
    pub seed: Option<u64>,
    pub q: Option<f64>,
    pub tol: Option<f64>,
    pub product_eps: Option<f64>,
    pub product_max_terms: Option<u32>,
    pub sum_tail_eps: Option<f64>,
    pub sum_window_max: Option<i64>,
    pub quad_nodes_min: Option<u32>,
    pub quad_nodes_max: Option<u32>,
    pub quad_eps: Option<f64>,
    pub pole_guard_delta: Option<f64>,
    pub json: Option<String>,
    pub csv: Option<String>,
}

impl PartialConfig {
    /// Overlay `other` on top of `self` (fields set in `other` win).
    pub fn overlaid(mut self, other: PartialConfig) -> PartialConfig {
        macro_rules! take {
            ($($field:ident),*) => {
                $(if other.$field.is_some() { self.$field = other.$field; })*
            };
        }
        take!(
            identity,
            trials,
            seed,
            q,
            tol,
            product_eps,
            product_max_terms,
            sum_tail_eps,
            sum_window_max,
            quad_nodes_min,
            quad_nodes_max,
            quad_eps,
            pole_guard_delta,
            json,
            csv
        );
        self
    }

    /// Resolve against built-in defaults into a validated RunConfig.
    pub fn resolve(self) -> Result<RunConfig> {
        let identity = self
            .identity
            .ok_or_else(|| Error::Config("no identity specified".into()))?;
        let defaults = TruncationPolicy::default();
        let mut policy = TruncationPolicy {
            product_eps: self.product_eps.unwrap_or(defaults.product_eps),
            product_max_terms: self.product_max_terms.unwrap_or(defaults.product_max_terms),
            sum_tail_eps: self.sum_tail_eps.unwrap_or(defaults.sum_tail_eps),
            sum_window_max: self.sum_window_max.unwrap_or(defaults.sum_window_max),
            quad_nodes_min: self.quad_nodes_min.unwrap_or(defaults.quad_nodes_min),
            quad_nodes_max: self.quad_nodes_max.unwrap_or(defaults.quad_nodes_max),
            quad_eps: self.quad_eps.unwrap_or(defaults.quad_eps),
            pole_guard_delta: self.pole_guard_delta.unwrap_or(defaults.pole_guard_delta),
        };
        // A raised floor lifts the ceiling with it.
        if policy.quad_nodes_min > policy.quad_nodes_max && self.quad_nodes_max.is_none() {
            policy.quad_nodes_max = policy.quad_nodes_min;
        }
        let output = match (self.json, self.csv) {
            (Some(_), Some(_)) => {
                return Err(Error::Config("json and csv outputs are mutually exclusive".into()))
            }
            (Some(p), None) => Some((EmitFormat::Json, p)),
            (None, Some(p)) => Some((EmitFormat::Csv, p)),
            (None, None) => None,
        };
        let config = RunConfig {
            identity,
            trials: self.trials.unwrap_or(10),
            seed: self.seed.unwrap_or(0),
            q_override: self.q,
            identity_tol: self.tol.unwrap_or_else(|| identity.default_tol()),
            policy,
            output,
        };
        config.validate()?;
        Ok(config)
    }
}

fn parse_field<T: std::str::FromStr>(value: &str, line_no: usize, key: &str) -> Result<T> {
    value.trim().parse::<T>().map_err(|_| {
        Error::Config(format!(
            "line {line_no}: field {key:?} has invalid value {value:?}"
        ))
    })
}

/// Parse the key = value config file format. Errors carry the line number
/// and field name.
pub fn parse_config_file(text: &str) -> Result<PartialConfig> {
    let mut out = PartialConfig::default();
    let mut section = String::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') || line.starts_with(';') {
            continue;
        }
        if let Some(rest) = line.strip_prefix('[') {
            let name = rest.strip_suffix(']').ok_or_else(|| {
                Error::Config(format!("line {line_no}: unterminated section header {line:?}"))
            })?;
            let name = name.trim();
            if !matches!(name, "run" | "policy" | "output") {
                return Err(Error::Config(format!(
                    "line {line_no}: unknown section [{name}] (expected [run], [policy], or [output])"
                )));
            }
            section = name.to_string();
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            Error::Config(format!("line {line_no}: expected `key = value`, got {line:?}"))
        })?;
        let key = key.trim();
        let value = value.trim();
        // Strip a trailing comment.
        let value = value
            .split_once(" #")
            .map(|(v, _)| v)
            .unwrap_or(value)
            .trim();
        match (section.as_str(), key) {
            ("run", "identity") => out.identity = Some(Identity::parse(value).map_err(|e| {
                Error::Config(format!("line {line_no}: {e}"))
            })?),
            ("run", "trials") => out.trials = Some(parse_field(value, line_no, key)?),
            ("run", "seed") => out.seed = Some(parse_field(value, line_no, key)?),
            ("run", "q") => out.q = Some(parse_field(value, line_no, key)?),
            ("run", "tol") => out.tol = Some(parse_field(value, line_no, key)?),
            ("policy", "product_eps") => out.product_eps = Some(parse_field(value, line_no, key)?),
            ("policy", "product_max_terms") => {
                out.product_max_terms = Some(parse_field(value, line_no, key)?)
            }
            ("policy", "sum_tail_eps") => out.sum_tail_eps = Some(parse_field(value, line_no, key)?),
            ("policy", "sum_window_max") => {
                out.sum_window_max = Some(parse_field(value, line_no, key)?)
            }
            ("policy", "quad_nodes_min") => {
                out.quad_nodes_min = Some(parse_field(value, line_no, key)?)
            }
            ("policy", "quad_nodes_max") => {
                out.quad_nodes_max = Some(parse_field(value, line_no, key)?)
            }
            ("policy", "quad_eps") => out.quad_eps = Some(parse_field(value, line_no, key)?),
            ("policy", "pole_guard_delta") => {
                out.pole_guard_delta = Some(parse_field(value, line_no, key)?)
            }
            ("output", "json") => out.json = Some(value.to_string()),
            ("output", "csv") => out.csv = Some(value.to_string()),
            ("", _) => {
                return Err(Error::Config(format!(
                    "line {line_no}: key {key:?} appears before any section header"
                )))
            }
            (sec, _) => {
                return Err(Error::Config(format!(
                    "line {line_no}: unknown key {key:?} in section [{sec}]"
                )))
            }
        }
    }
    Ok(out)
}

/// Environment variable naming a default config file, read when no
/// `--config` flag is given.
pub const CONFIG_ENV_VAR: &str = "QSUMINT_CONFIG";
