//! Verification reports: one record per identity check, plus run summaries
//! and JSON/CSV emission.
//!
//! Schema notes (frozen by the golden-file test in `tests/cli.rs`):
//! - complex values are always explicit re/im pairs, never polar;
//! - `params` is an ordered map; its key order is part of the CSV header;
//! - CSV rows split every complex value into `_re`/`_im` columns;
//! - all numeric fields round-trip losslessly for finite values.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::io::Write;
use std::path::Path;

use num_complex::Complex64;
use serde::de::{MapAccess, Visitor};
use serde::ser::SerializeMap;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::qkernel::TruncationPolicy;

/// Outcome classification for a single check.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Status {
    Pass,
    Fail,
    DegeneratePass,
    Rejected,
    NonConvergent,
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Status::Pass => "pass",
            Status::Fail => "fail",
            Status::DegeneratePass => "degenerate-pass",
            Status::Rejected => "rejected",
            Status::NonConvergent => "non-convergent",
        };
        f.write_str(s)
    }
}

/// A parameter value: discrete indices stay integers, fugacity components
/// are reals. The distinction survives JSON and CSV round trips.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ParamValue {
    Int(i64),
    Real(f64),
}

impl ParamValue {
    fn to_field(self) -> String {
        match self {
            ParamValue::Int(v) => format!("{v}"),
            // {:?} keeps a trailing ".0" and is shortest-roundtrip.
            ParamValue::Real(v) => format!("{v:?}"),
        }
    }

    fn from_field(s: &str) -> Result<Self> {
        if let Ok(v) = s.parse::<i64>() {
            return Ok(ParamValue::Int(v));
        }
        s.parse::<f64>()
            .map(ParamValue::Real)
            .map_err(|_| Error::Format(format!("bad numeric field {s:?}")))
    }
}

/// Ordered name -> value map; order is fixed at construction and preserved
/// through serialization (it defines the CSV column order).
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Params(pub Vec<(String, ParamValue)>);

impl Params {
    pub fn new() -> Self {
        Params(Vec::new())
    }

    pub fn push_int(&mut self, key: &str, v: i64) {
        self.0.push((key.to_string(), ParamValue::Int(v)));
    }

    pub fn push_real(&mut self, key: &str, v: f64) {
        self.0.push((key.to_string(), ParamValue::Real(v)));
    }

    /// Push `<key>_re` / `<key>_im` for a complex value.
    pub fn push_complex(&mut self, key: &str, v: Complex64) {
        self.push_real(&format!("{key}_re"), v.re);
        self.push_real(&format!("{key}_im"), v.im);
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.0.iter().map(|(k, _)| k.as_str())
    }

    pub fn get(&self, key: &str) -> Option<ParamValue> {
        self.0.iter().find(|(k, _)| k == key).map(|(_, v)| *v)
    }
}

impl Serialize for Params {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let mut map = serializer.serialize_map(Some(self.0.len()))?;
        for (k, v) in &self.0 {
            map.serialize_entry(k, v)?;
        }
        map.end()
    }
}

impl<'de> Deserialize<'de> for Params {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        struct ParamsVisitor;
        impl<'de> Visitor<'de> for ParamsVisitor {
            type Value = Params;
            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str("a map of parameter names to numbers")
            }
            fn visit_map<A: MapAccess<'de>>(
                self,
                mut access: A,
            ) -> std::result::Result<Params, A::Error> {
                let mut out = Vec::new();
                while let Some((k, v)) = access.next_entry::<String, ParamValue>()? {
                    out.push((k, v));
                }
                Ok(Params(out))
            }
        }
        deserializer.deserialize_map(ParamsVisitor)
    }
}

/// Complex value as an explicit re/im pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComplexPair {
    pub re: f64,
    pub im: f64,
}

impl From<Complex64> for ComplexPair {
    fn from(z: Complex64) -> Self {
        ComplexPair { re: z.re, im: z.im }
    }
}

impl From<ComplexPair> for Complex64 {
    fn from(p: ComplexPair) -> Self {
        Complex64::new(p.re, p.im)
    }
}

/// Effective truncation settings for one check, plus the resolution the
/// refinement actually settled on.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Settings {
    pub product_eps: f64,
    pub product_max_terms: u32,
    pub sum_tail_eps: f64,
    pub sum_window_max: i64,
    pub quad_nodes_min: u32,
    pub quad_nodes_max: u32,
    pub quad_eps: f64,
    pub pole_guard_delta: f64,
    pub identity_tol: f64,
    /// Node count the accepted refinement level used (0 when no quadrature ran).
    pub nodes_used: u32,
    /// Widest |m| shell actually summed (0 when no Z-sum ran).
    pub window_used: i64,
}

impl Settings {
    pub fn from_policy(policy: &TruncationPolicy, identity_tol: f64) -> Self {
        Settings {
            product_eps: policy.product_eps,
            product_max_terms: policy.product_max_terms,
            sum_tail_eps: policy.sum_tail_eps,
            sum_window_max: policy.sum_window_max,
            quad_nodes_min: policy.quad_nodes_min,
            quad_nodes_max: policy.quad_nodes_max,
            quad_eps: policy.quad_eps,
            pole_guard_delta: policy.pole_guard_delta,
            identity_tol,
            nodes_used: 0,
            window_used: 0,
        }
    }
}

/// One identity check: parameters, both sides, residuals, settings, outcome.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub identity: String,
    pub trial: u32,
    pub params: Params,
    pub lhs: ComplexPair,
    pub rhs: ComplexPair,
    pub abs_err: f64,
    pub rel_err: f64,
    pub settings: Settings,
    pub status: Status,
    /// Diagnostic text for rejected / non-convergent / degenerate outcomes.
    pub note: String,
    pub wall_time_ms: f64,
}

impl Report {
    /// Build a report from both sides of an identity. `rel_err` is
    /// `abs_err / max(|lhs|, |rhs|)` when that max is positive, and the
    /// status is `pass` iff `rel_err < identity_tol`.
    pub fn from_sides(
        identity: &str,
        params: Params,
        lhs: Complex64,
        rhs: Complex64,
        settings: Settings,
    ) -> Self {
        let abs_err = (lhs - rhs).norm();
        let scale = lhs.norm().max(rhs.norm());
        let rel_err = if scale > 0.0 { abs_err / scale } else { 0.0 };
        let status = if rel_err < settings.identity_tol {
            Status::Pass
        } else {
            Status::Fail
        };
        Report {
            identity: identity.to_string(),
            trial: 0,
            params,
            lhs: lhs.into(),
            rhs: rhs.into(),
            abs_err,
            rel_err,
            settings,
            status,
            note: String::new(),
            wall_time_ms: 0.0,
        }
    }

    /// Build a report for a check that could not produce both sides.
    pub fn from_error(identity: &str, params: Params, settings: Settings, err: &Error) -> Self {
        let status = if err.is_rejection() {
            Status::Rejected
        } else if err.is_non_convergence() {
            Status::NonConvergent
        } else {
            Status::Fail
        };
        Report {
            identity: identity.to_string(),
            trial: 0,
            params,
            lhs: ComplexPair { re: 0.0, im: 0.0 },
            rhs: ComplexPair { re: 0.0, im: 0.0 },
            abs_err: 0.0,
            rel_err: 0.0,
            settings,
            status,
            note: err.to_string(),
            wall_time_ms: 0.0,
        }
    }

    /// Mark a vanishing-identity outcome (0 = 0) as degenerate-pass.
    pub fn mark_degenerate(&mut self, note: &str) {
        self.status = Status::DegeneratePass;
        self.note = note.to_string();
    }

    pub fn lhs_c(&self) -> Complex64 {
        self.lhs.into()
    }

    pub fn rhs_c(&self) -> Complex64 {
        self.rhs.into()
    }

    pub fn counts_as_failure(&self) -> bool {
        matches!(self.status, Status::Fail | Status::NonConvergent)
    }
}

/// Aggregate of one run: counts by status and the worst passing residual.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub identity: String,
    pub trials: u32,
    pub pass: u32,
    pub fail: u32,
    pub degenerate_pass: u32,
    pub rejected: u32,
    pub non_convergent: u32,
    pub max_rel_err_pass: f64,
}

impl Summary {
    pub fn from_reports(identity: &str, reports: &[Report]) -> Self {
        let mut s = Summary {
            identity: identity.to_string(),
            trials: reports.len() as u32,
            pass: 0,
            fail: 0,
            degenerate_pass: 0,
            rejected: 0,
            non_convergent: 0,
            max_rel_err_pass: 0.0,
        };
        for r in reports {
            match r.status {
                Status::Pass => {
                    s.pass += 1;
                    if r.rel_err > s.max_rel_err_pass {
                        s.max_rel_err_pass = r.rel_err;
                    }
                }
                Status::Fail => s.fail += 1,
                Status::DegeneratePass => s.degenerate_pass += 1,
                Status::Rejected => s.rejected += 1,
                Status::NonConvergent => s.non_convergent += 1,
            }
        }
        s
    }

    pub fn has_failures(&self) -> bool {
        self.fail > 0 || self.non_convergent > 0
    }
}

impl fmt::Display for Summary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "identity         : {}", self.identity)?;
        writeln!(f, "trials           : {}", self.trials)?;
        writeln!(f, "pass             : {}", self.pass)?;
        writeln!(f, "fail             : {}", self.fail)?;
        writeln!(f, "degenerate-pass  : {}", self.degenerate_pass)?;
        writeln!(f, "rejected         : {}", self.rejected)?;
        writeln!(f, "non-convergent   : {}", self.non_convergent)?;
        write!(f, "max rel_err (pass): {:.3e}", self.max_rel_err_pass)
    }
}

/// Output format for report emission.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EmitFormat {
    Json,
    Csv,
}

// ---------------------------------------------------------------------------
// JSON emission / parsing
// ---------------------------------------------------------------------------

pub fn reports_to_json(reports: &[Report]) -> Result<String> {
    serde_json::to_string_pretty(reports).map_err(|e| Error::Format(e.to_string()))
}

pub fn reports_from_json(text: &str) -> Result<Vec<Report>> {
    serde_json::from_str(text).map_err(|e| Error::Format(e.to_string()))
}

// ---------------------------------------------------------------------------
// CSV emission / parsing
// ---------------------------------------------------------------------------

/// Fixed non-parameter columns, in order: head columns, then the per-identity
/// parameter columns, then these tail columns.
const CSV_HEAD: [&str; 4] = ["identity", "trial", "status", "note"];
const CSV_TAIL: [&str; 18] = [
    "lhs_re",
    "lhs_im",
    "rhs_re",
    "rhs_im",
    "abs_err",
    "rel_err",
    "product_eps",
    "product_max_terms",
    "sum_tail_eps",
    "sum_window_max",
    "quad_nodes_min",
    "quad_nodes_max",
    "quad_eps",
    "pole_guard_delta",
    "identity_tol",
    "nodes_used",
    "window_used",
    "wall_time_ms",
];

/// The CSV header row for a report list (param columns come from the first
/// report; every report in one emission must share the same param keys).
pub fn csv_header(reports: &[Report]) -> Result<String> {
    let param_keys: Vec<&str> = match reports.first() {
        Some(r) => r.params.keys().collect(),
        None => Vec::new(),
    };
    for r in reports {
        let keys: Vec<&str> = r.params.keys().collect();
        if keys != param_keys {
            return Err(Error::Format(
                "reports with mixed parameter schemas cannot share one CSV file".into(),
            ));
        }
    }
    let mut cols: Vec<&str> = CSV_HEAD.to_vec();
    cols.extend(param_keys);
    cols.extend(CSV_TAIL);
    Ok(cols.join(","))
}

fn csv_quote(field: &str) -> String {
    if field.contains(',') || field.contains('"') || field.contains('\n') {
        format!("\"{}\"", field.replace('"', "\"\""))
    } else {
        field.to_string()
    }
}

fn f(v: f64) -> String {
    format!("{v:?}")
}

pub fn reports_to_csv(reports: &[Report]) -> Result<String> {
    let mut out = csv_header(reports)?;
    out.push('\n');
    for r in reports {
        let mut fields: Vec<String> = vec![
            csv_quote(&r.identity),
            r.trial.to_string(),
            r.status.to_string(),
            csv_quote(&r.note),
        ];
        for (_, v) in &r.params.0 {
            fields.push(v.to_field());
        }
        let s = &r.settings;
        fields.extend([
            f(r.lhs.re),
            f(r.lhs.im),
            f(r.rhs.re),
            f(r.rhs.im),
            f(r.abs_err),
            f(r.rel_err),
            f(s.product_eps),
            s.product_max_terms.to_string(),
            f(s.sum_tail_eps),
            s.sum_window_max.to_string(),
            s.quad_nodes_min.to_string(),
            s.quad_nodes_max.to_string(),
            f(s.quad_eps),
            f(s.pole_guard_delta),
            f(s.identity_tol),
            s.nodes_used.to_string(),
            s.window_used.to_string(),
            f(r.wall_time_ms),
        ]);
        out.push_str(&fields.join(","));
        out.push('\n');
    }
    Ok(out)
}

/// Split one CSV record, honoring double-quote escaping.
fn split_csv_line(line: &str) -> Result<Vec<String>> {
    let mut fields = Vec::new();
    let mut cur = String::new();
    let mut chars = line.chars().peekable();
    let mut in_quotes = false;
    while let Some(c) = chars.next() {
        if in_quotes {
            if c == '"' {
                if chars.peek() == Some(&'"') {
                    chars.next();
                    cur.push('"');
                } else {
                    in_quotes = false;
                }
            } else {
                cur.push(c);
            }
        } else {
            match c {
                '"' if cur.is_empty() => in_quotes = true,
                ',' => fields.push(std::mem::take(&mut cur)),
                _ => cur.push(c),
            }
        }
    }
    if in_quotes {
        return Err(Error::Format("unterminated quoted CSV field".into()));
    }
    fields.push(cur);
    Ok(fields)
}

fn parse_f64(s: &str, col: &str) -> Result<f64> {
    s.parse::<f64>()
        .map_err(|_| Error::Format(format!("column {col}: bad float {s:?}")))
}

fn parse_int<T: std::str::FromStr>(s: &str, col: &str) -> Result<T> {
    s.parse::<T>()
        .map_err(|_| Error::Format(format!("column {col}: bad integer {s:?}")))
}

fn parse_status(s: &str) -> Result<Status> {
    match s {
        "pass" => Ok(Status::Pass),
        "fail" => Ok(Status::Fail),
        "degenerate-pass" => Ok(Status::DegeneratePass),
        "rejected" => Ok(Status::Rejected),
        "non-convergent" => Ok(Status::NonConvergent),
        other => Err(Error::Format(format!("unknown status {other:?}"))),
    }
}

pub fn reports_from_csv(text: &str) -> Result<Vec<Report>> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header = match lines.next() {
        Some(h) => split_csv_line(h)?,
        None => return Ok(Vec::new()),
    };
    let ncols = header.len();
    if ncols < CSV_HEAD.len() + CSV_TAIL.len() {
        return Err(Error::Format("CSV header too short".into()));
    }
    for (i, want) in CSV_HEAD.iter().enumerate() {
        if header[i] != *want {
            return Err(Error::Format(format!(
                "CSV header column {i} is {:?}, expected {want:?}",
                header[i]
            )));
        }
    }
    let tail_start = ncols - CSV_TAIL.len();
    for (i, want) in CSV_TAIL.iter().enumerate() {
        if header[tail_start + i] != *want {
            return Err(Error::Format(format!(
                "CSV header column {} is {:?}, expected {want:?}",
                tail_start + i,
                header[tail_start + i]
            )));
        }
    }
    let param_keys = &header[CSV_HEAD.len()..tail_start];

    let mut out = Vec::new();
    for line in lines {
        let fields = split_csv_line(line)?;
        if fields.len() != ncols {
            return Err(Error::Format(format!(
                "CSV row has {} fields, header has {ncols}",
                fields.len()
            )));
        }
        let mut params = Params::new();
        for (k, v) in param_keys.iter().zip(&fields[CSV_HEAD.len()..tail_start]) {
            params.0.push((k.clone(), ParamValue::from_field(v)?));
        }
        let t = &fields[tail_start..];
        let settings = Settings {
            product_eps: parse_f64(&t[6], "product_eps")?,
            product_max_terms: parse_int(&t[7], "product_max_terms")?,
            sum_tail_eps: parse_f64(&t[8], "sum_tail_eps")?,
            sum_window_max: parse_int(&t[9], "sum_window_max")?,
            quad_nodes_min: parse_int(&t[10], "quad_nodes_min")?,
            quad_nodes_max: parse_int(&t[11], "quad_nodes_max")?,
            quad_eps: parse_f64(&t[12], "quad_eps")?,
            pole_guard_delta: parse_f64(&t[13], "pole_guard_delta")?,
            identity_tol: parse_f64(&t[14], "identity_tol")?,
            nodes_used: parse_int(&t[15], "nodes_used")?,
            window_used: parse_int(&t[16], "window_used")?,
        };
        out.push(Report {
            identity: fields[0].clone(),
            trial: parse_int(&fields[1], "trial")?,
            status: parse_status(&fields[2])?,
            note: fields[3].clone(),
            params,
            lhs: ComplexPair {
                re: parse_f64(&t[0], "lhs_re")?,
                im: parse_f64(&t[1], "lhs_im")?,
            },
            rhs: ComplexPair {
                re: parse_f64(&t[2], "rhs_re")?,
                im: parse_f64(&t[3], "rhs_im")?,
            },
            abs_err: parse_f64(&t[4], "abs_err")?,
            rel_err: parse_f64(&t[5], "rel_err")?,
            settings,
            wall_time_ms: parse_f64(&t[17], "wall_time_ms")?,
        });
    }
    Ok(out)
}

/// Write reports to `path` ("-" means stdout) in the requested format.
pub fn emit_report(reports: &[Report], format: EmitFormat, path: &str) -> Result<()> {
    let body = match format {
        EmitFormat::Json => reports_to_json(reports)?,
        EmitFormat::Csv => reports_to_csv(reports)?,
    };
    if path == "-" {
        let mut stdout = std::io::stdout().lock();
        stdout
            .write_all(body.as_bytes())
            .and_then(|_| stdout.write_all(b"\n"))
            .map_err(|e| Error::Io {
                path: "<stdout>".into(),
                message: e.to_string(),
            })
    } else {
        fs::write(Path::new(path), body + "\n").map_err(|e| Error::Io {
            path: path.to_string(),
            message: e.to_string(),
        })
    }
}

/// Map of status name -> count, used by the CLI for stable summary output.
pub fn status_counts(reports: &[Report]) -> BTreeMap<String, u32> {
    let mut counts = BTreeMap::new();
    for r in reports {
        *counts.entry(r.status.to_string()).or_insert(0) += 1;
    }
    counts
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_report() -> Report {
        let mut params = Params::new();
        params.push_complex("q", Complex64::new(0.3, 0.0));
        params.push_complex("w", Complex64::new(0.25, -0.125));
        params.push_int("n", -2);
        let mut settings = Settings::from_policy(&TruncationPolicy::default(), 1e-12);
        settings.nodes_used = 256;
        settings.window_used = 17;
        let mut r = Report::from_sides(
            "reflection",
            params,
            Complex64::new(1.25, -0.5),
            Complex64::new(1.25, -0.5000000000001),
            settings,
        );
        r.trial = 3;
        r.wall_time_ms = 0.125;
        r
    }

    #[test]
    fn json_round_trip_is_lossless() {
        let reports = vec![sample_report()];
        let text = reports_to_json(&reports).unwrap();
        let back = reports_from_json(&text).unwrap();
        assert_eq!(reports, back);
    }

    #[test]
    fn csv_round_trip_is_lossless() {
        let mut r = sample_report();
        r.note = "has, comma and \"quotes\"".into();
        let reports = vec![r];
        let text = reports_to_csv(&reports).unwrap();
        let back = reports_from_csv(&text).unwrap();
        assert_eq!(reports, back);
    }

    #[test]
    fn json_csv_json_chain_preserves_values() {
        let reports = vec![sample_report()];
        let json = reports_to_json(&reports).unwrap();
        let from_json = reports_from_json(&json).unwrap();
        let csv = reports_to_csv(&from_json).unwrap();
        let from_csv = reports_from_csv(&csv).unwrap();
        assert_eq!(reports, from_csv);
    }

    #[test]
    fn empty_report_list_is_json_empty_array() {
        assert_eq!(reports_to_json(&[]).unwrap(), "[]");
        assert!(reports_from_json("[]").unwrap().is_empty());
    }

    #[test]
    fn mixed_param_schemas_are_refused_in_csv() {
        let a = sample_report();
        let mut b = sample_report();
        b.params = Params::new();
        b.params.push_int("n", 1);
        assert!(reports_to_csv(&[a, b]).is_err());
    }

    #[test]
    fn pass_status_follows_tolerance() {
        let r = sample_report();
        assert_eq!(r.status, Status::Pass);
        assert!(r.rel_err < 1e-12);

        let mut settings = Settings::from_policy(&TruncationPolicy::default(), 1e-12);
        settings.identity_tol = 1e-16;
        let r2 = Report::from_sides(
            "reflection",
            Params::new(),
            Complex64::new(1.0, 0.0),
            Complex64::new(1.0 + 1e-13, 0.0),
            settings,
        );
        assert_eq!(r2.status, Status::Fail);
    }

    #[test]
    fn summary_counts_statuses() {
        let mut a = sample_report();
        let mut b = sample_report();
        b.status = Status::Rejected;
        a.status = Status::Pass;
        let s = Summary::from_reports("reflection", &[a, b]);
        assert_eq!((s.pass, s.rejected, s.trials), (1, 1, 2));
        assert!(!s.has_failures());
    }

    #[test]
    fn malformed_csv_is_an_error_not_a_panic() {
        for bad in [
            "identity,trial\nx,0",
            "not,a,real,header\n1,2,3,4",
            "\"unterminated",
        ] {
            assert!(reports_from_csv(bad).is_err());
        }
        assert!(reports_from_csv("").unwrap().is_empty());
    }
}
