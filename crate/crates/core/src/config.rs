//! Experiment configuration files.
//!
//! The format is line based:
//!
//! ```text
//! # comment
//! [model]              # section header; prefixes the keys below it
//! q1 = 0.75            # becomes `model.q1`
//! law.kind = fixed     # dotted keys work with or without sections
//! run.checkpoints = [1000, 10000, 100000]
//! output.dir = "out/run 1"
//! ```
//!
//! Values are numbers, booleans (`true`/`false`), bare or double-quoted
//! strings, or bracketed comma-separated number lists. Keys may appear
//! only once. Unknown keys are rejected with their position.
//!
//! Recognised keys (defaults in parentheses):
//!
//! * `model.p`, `model.q`, `model.q1`, `model.q2`, `model.init_len`
//! * `reinforcement.kind` (`constant`, `affine`, `quadratic`, `logistic`)
//!   and that kind's arguments, e.g. `reinforcement.a`
//! * `law.kind` (`fixed`, `custom`, `uniform`, `geometric`, `binomial`,
//!   `poisson`) with `law.k`, `law.pmf`, `law.c` (1), `law.alpha`
//! * `run.scheme` (`with_replacement` | `without_replacement`),
//!   `run.mode` (`fast` | `naive`), `run.n_max`, `run.checkpoints`,
//!   `run.seed` (0), `run.replications`
//! * `analysis.check_strong_law`, `analysis.check_clt`,
//!   `analysis.check_bounds` (all false; at least one must be set),
//!   `analysis.series_horizon` (0 = skip), `analysis.strong_law_tol` (0.01),
//!   `analysis.clt_tol` (0.20 at κ = 1/2, else 0.15), `analysis.clt_floor`
//!   (0.01), `analysis.hypotheses_fatal` (false)
//! * `output.dir` (`urnwalk-out`)

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::laws::SampleSizeLaw;
use crate::model::{ModelParams, SampleMode, SamplingScheme};
use crate::reinforcement::ReinforcementSpec;
use crate::simulator::RunConfig;

#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Number(f64),
    Bool(bool),
    Str(String),
    List(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Entry {
    pub value: Value,
    pub raw: String,
    pub line: usize,
    pub column: usize,
}

/// Parsed key/value pairs with their source positions.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Document {
    pub entries: BTreeMap<String, Entry>,
}

fn err(line: usize, column: usize, message: impl Into<String>) -> Error {
    Error::Config { line, column, message: message.into() }
}

fn valid_key(k: &str) -> bool {
    !k.is_empty()
        && k.split('.').all(|part| !part.is_empty() && part.chars().all(|c| c.is_ascii_alphanumeric() || c == '_'))
}

fn parse_number(s: &str) -> Option<f64> {
    let v: f64 = s.replace('_', "").parse().ok()?;
    v.is_finite().then_some(v)
}

fn parse_value(raw: &str, line: usize, column: usize) -> Result<Value> {
    if let Some(inner) = raw.strip_prefix('"') {
        let body = inner.strip_suffix('"').ok_or_else(|| err(line, column, "unterminated string"))?;
        if body.contains('"') {
            return Err(err(line, column, "stray quote inside string"));
        }
        return Ok(Value::Str(body.to_string()));
    }
    if let Some(inner) = raw.strip_prefix('[') {
        let body = inner.strip_suffix(']').ok_or_else(|| err(line, column, "list is missing `]`"))?;
        if body.trim().is_empty() {
            return Ok(Value::List(vec![]));
        }
        let mut out = Vec::new();
        let mut offset = 1;
        for item in body.split(',') {
            let t = item.trim();
            let col = column + offset + (item.len() - item.trim_start().len());
            out.push(parse_number(t).ok_or_else(|| err(line, col, format!("`{t}` is not a number")))?);
            offset += item.len() + 1;
        }
        return Ok(Value::List(out));
    }
    match raw {
        "true" => return Ok(Value::Bool(true)),
        "false" => return Ok(Value::Bool(false)),
        _ => {}
    }
    if let Some(v) = parse_number(raw) {
        return Ok(Value::Number(v));
    }
    if raw.chars().any(|c| c.is_whitespace() || c == '=' || c == '[' || c == ']') {
        return Err(err(line, column, format!("`{raw}` needs quotes")));
    }
    Ok(Value::Str(raw.to_string()))
}

/// Strips a trailing `#` comment that is not inside a string.
fn strip_comment(line: &str) -> &str {
    let mut in_str = false;
    for (i, c) in line.char_indices() {
        match c {
            '"' => in_str = !in_str,
            '#' if !in_str => return &line[..i],
            _ => {}
        }
    }
    line
}

impl Document {
    pub fn parse(text: &str) -> Result<Self> {
        let mut doc = Document::default();
        let mut section = String::new();
        for (idx, full) in text.lines().enumerate() {
            let line = idx + 1;
            let body = strip_comment(full);
            let trimmed = body.trim();
            if trimmed.is_empty() {
                continue;
            }
            let indent = body.len() - body.trim_start().len();
            if let Some(rest) = trimmed.strip_prefix('[') {
                let name = rest
                    .strip_suffix(']')
                    .ok_or_else(|| err(line, indent + 1, "section header is missing `]`"))?
                    .trim();
                if !valid_key(name) {
                    return Err(err(line, indent + 2, format!("invalid section name `{name}`")));
                }
                section = name.to_string();
                continue;
            }
            let eq = body.find('=').ok_or_else(|| err(line, indent + 1, "expected `key = value`"))?;
            let key = body[..eq].trim();
            if !valid_key(key) {
                return Err(err(line, indent + 1, format!("invalid key `{key}`")));
            }
            let after = &body[eq + 1..];
            let raw = after.trim();
            let vcol = eq + 2 + (after.len() - after.trim_start().len());
            if raw.is_empty() {
                return Err(err(line, vcol, format!("missing value for `{key}`")));
            }
            let value = parse_value(raw, line, vcol)?;
            let full_key = if section.is_empty() { key.to_string() } else { format!("{section}.{key}") };
            if let Some(prev) = doc.entries.get(&full_key) {
                return Err(err(
                    line,
                    indent + 1,
                    format!("duplicate key `{full_key}` (first set on line {})", prev.line),
                ));
            }
            doc.entries.insert(full_key, Entry { value, raw: raw.to_string(), line, column: vcol });
        }
        Ok(doc)
    }
}

/// Typed access that records which keys were consumed.
struct Reader<'a> {
    doc: &'a Document,
    used: std::cell::RefCell<Vec<String>>,
}

impl<'a> Reader<'a> {
    fn new(doc: &'a Document) -> Self {
        Reader { doc, used: Default::default() }
    }

    fn entry(&self, key: &str) -> Option<&'a Entry> {
        let e = self.doc.entries.get(key)?;
        self.used.borrow_mut().push(key.to_string());
        Some(e)
    }

    fn missing(key: &str) -> Error {
        err(0, 0, format!("missing required key `{key}`"))
    }

    fn bad(e: &Entry, key: &str, want: &str) -> Error {
        err(e.line, e.column, format!("`{key}` must be {want}, got `{}`", e.raw))
    }

    fn f64_opt(&self, key: &str) -> Result<Option<f64>> {
        match self.entry(key) {
            None => Ok(None),
            Some(e) => match e.value {
                Value::Number(v) => Ok(Some(v)),
                _ => Err(Self::bad(e, key, "a number")),
            },
        }
    }

    fn f64(&self, key: &str) -> Result<f64> {
        self.f64_opt(key)?.ok_or_else(|| Self::missing(key))
    }

    fn u64_opt(&self, key: &str) -> Result<Option<u64>> {
        match self.entry(key) {
            None => Ok(None),
            Some(e) => match e.value {
                Value::Number(v) if v >= 0.0 && v.fract() == 0.0 && v < 2f64.powi(63) => Ok(Some(v as u64)),
                _ => Err(Self::bad(e, key, "a non-negative integer")),
            },
        }
    }

    fn u64(&self, key: &str) -> Result<u64> {
        self.u64_opt(key)?.ok_or_else(|| Self::missing(key))
    }

    fn bool_or(&self, key: &str, default: bool) -> Result<bool> {
        match self.entry(key) {
            None => Ok(default),
            Some(e) => match e.value {
                Value::Bool(b) => Ok(b),
                _ => Err(Self::bad(e, key, "true or false")),
            },
        }
    }

    fn str_opt(&self, key: &str) -> Result<Option<&'a str>> {
        match self.entry(key) {
            None => Ok(None),
            Some(e) => match &e.value {
                Value::Str(s) => Ok(Some(s.as_str())),
                _ => Err(Self::bad(e, key, "a string")),
            },
        }
    }

    fn str(&self, key: &str) -> Result<&'a str> {
        self.str_opt(key)?.ok_or_else(|| Self::missing(key))
    }

    fn list_opt(&self, key: &str) -> Result<Option<Vec<f64>>> {
        match self.entry(key) {
            None => Ok(None),
            Some(e) => match &e.value {
                Value::List(v) => Ok(Some(v.clone())),
                Value::Number(v) => Ok(Some(vec![*v])),
                _ => Err(Self::bad(e, key, "a list of numbers")),
            },
        }
    }

    /// Runs `f`, attaching the position of `key` to parameter errors.
    fn at<T>(&self, key: &str, r: Result<T>) -> Result<T> {
        r.map_err(|e| match (e, self.doc.entries.get(key)) {
            (e @ Error::Config { .. }, _) => e,
            (e, Some(entry)) => err(entry.line, entry.column, format!("`{key}`: {e}")),
            (e, None) => err(0, 0, format!("`{key}`: {e}")),
        })
    }

    fn unused(&self) -> Option<&'a Entry> {
        let used = self.used.borrow();
        self.doc
            .entries
            .iter()
            .filter(|(k, _)| !used.contains(k))
            .map(|(_, e)| e)
            .min_by_key(|e| (e.line, e.column))
    }

    fn key_of(&self, entry: &Entry) -> &'a str {
        self.doc.entries.iter().find(|(_, e)| *e == entry).map(|(k, _)| k.as_str()).unwrap_or("?")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnalysisFlags {
    pub check_strong_law: bool,
    pub check_clt: bool,
    pub check_bounds: bool,
    /// Horizon for the inverse-moment series diagnostics; 0 skips them.
    pub series_horizon: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    pub strong_law: f64,
    /// Relative tolerance for covariance entries; `None` picks the default
    /// for the regime.
    pub clt_rel: Option<f64>,
    pub clt_floor: f64,
    pub d2_ratio: (f64, f64),
    pub d2_direction: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances { strong_law: 0.01, clt_rel: None, clt_floor: 0.01, d2_ratio: (0.5, 2.0), d2_direction: 0.95 }
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub run: RunConfig,
    pub spec_kind: String,
    pub spec_args: BTreeMap<String, f64>,
    pub analysis: AnalysisFlags,
    pub tolerances: Tolerances,
    pub hypotheses_fatal: bool,
    pub output: PathBuf,
    /// The configuration text, kept for the report.
    pub source: String,
}

const SPEC_ARGS: &[&str] = &["c", "c0", "a", "b", "cxx", "cxy", "cyy", "s"];

fn parse_law(r: &Reader) -> Result<SampleSizeLaw> {
    let kind = r.str("law.kind")?;
    let law = match kind {
        "fixed" => SampleSizeLaw::FixedSize(r.u64("law.k")?),
        "custom" => SampleSizeLaw::Custom(r.list_opt("law.pmf")?.ok_or_else(|| Reader::missing("law.pmf"))?),
        "uniform" => SampleSizeLaw::UniformOn1toN,
        "geometric" | "binomial" | "poisson" => {
            let c = r.f64_opt("law.c")?.unwrap_or(1.0);
            let alpha = r.f64("law.alpha")?;
            match kind {
                "geometric" => SampleSizeLaw::TruncatedGeometric { c, alpha },
                "binomial" => SampleSizeLaw::ShiftedBinomial { c, alpha },
                _ => SampleSizeLaw::TruncatedPoissonShift { c, alpha },
            }
        }
        other => {
            let e = r.doc.entries.get("law.kind").expect("read above");
            return Err(err(e.line, e.column, format!("unknown law `{other}`")));
        }
    };
    r.at("law.kind", law.validate())?;
    Ok(law)
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let doc = Document::parse(text)?;
        let r = Reader::new(&doc);

        let p = r.f64("model.p")?;
        let q = r.f64("model.q")?;
        let q1 = r.f64("model.q1")?;
        let q2 = r.f64("model.q2")?;
        let init_len = r.u64("model.init_len")?;
        let params = ModelParams { p, q, q1, q2, init_len };
        if let Err(Error::InvalidParameter { name, reason }) = params.validate() {
            let key = format!("model.{name}");
            let e = &doc.entries[&key];
            return Err(err(e.line, e.column, format!("`{key}`: {reason}")));
        }

        let spec_kind = r.str("reinforcement.kind")?.to_string();
        let mut spec_args = BTreeMap::new();
        for name in SPEC_ARGS {
            if let Some(v) = r.f64_opt(&format!("reinforcement.{name}"))? {
                spec_args.insert(name.to_string(), v);
            }
        }
        let spec = r.at("reinforcement.kind", ReinforcementSpec::builtin(&spec_kind, &spec_args))?;

        let law = parse_law(&r)?;

        let scheme = match r.str_opt("run.scheme")?.unwrap_or("with_replacement") {
            "with_replacement" => SamplingScheme::WithReplacement,
            "without_replacement" => SamplingScheme::WithoutReplacement,
            other => {
                let e = &doc.entries["run.scheme"];
                return Err(err(e.line, e.column, format!("unknown scheme `{other}`")));
            }
        };
        let mode = match r.str_opt("run.mode")?.unwrap_or("fast") {
            "fast" => SampleMode::Fast,
            "naive" => SampleMode::NaiveIndices,
            other => {
                let e = &doc.entries["run.mode"];
                return Err(err(e.line, e.column, format!("unknown mode `{other}`")));
            }
        };
        let n_max = r.u64("run.n_max")?;
        let seed = r.u64_opt("run.seed")?.unwrap_or(0);
        let replications = r.u64("run.replications")?;
        let mut run = r.at("run.n_max", RunConfig::new(params, spec, scheme, law, n_max, seed, replications))?;
        run.mode = mode;
        if let Some(cps) = r.list_opt("run.checkpoints")? {
            let e = &doc.entries["run.checkpoints"];
            if cps.iter().any(|c| c.fract() != 0.0 || *c < 0.0) {
                return Err(err(e.line, e.column, "checkpoints must be non-negative integers"));
            }
            run = r.at("run.checkpoints", run.with_checkpoints(cps.iter().map(|&c| c as u64).collect()))?;
        }

        let analysis = AnalysisFlags {
            check_strong_law: r.bool_or("analysis.check_strong_law", false)?,
            check_clt: r.bool_or("analysis.check_clt", false)?,
            check_bounds: r.bool_or("analysis.check_bounds", false)?,
            series_horizon: r.u64_opt("analysis.series_horizon")?.unwrap_or(0),
        };
        if !(analysis.check_strong_law || analysis.check_clt || analysis.check_bounds) {
            return Err(err(0, 0, "set at least one of analysis.check_strong_law, check_clt, check_bounds"));
        }
        let d = Tolerances::default();
        let tolerances = Tolerances {
            strong_law: r.f64_opt("analysis.strong_law_tol")?.unwrap_or(d.strong_law),
            clt_rel: r.f64_opt("analysis.clt_tol")?,
            clt_floor: r.f64_opt("analysis.clt_floor")?.unwrap_or(d.clt_floor),
            ..d
        };
        let hypotheses_fatal = r.bool_or("analysis.hypotheses_fatal", false)?;
        let output = PathBuf::from(r.str_opt("output.dir")?.unwrap_or("urnwalk-out"));

        if let Some(e) = r.unused() {
            return Err(err(e.line, 1, format!("unknown key `{}`", r.key_of(e))));
        }
        Ok(ExperimentConfig {
            run,
            spec_kind,
            spec_args,
            analysis,
            tolerances,
            hypotheses_fatal,
            output,
            source: text.to_string(),
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = "\
# strong law, constant g
[model]
p = 0.3
q = 0.5
q1 = 0.5
q2 = 0.5
init_len = 10

[reinforcement]
kind = constant
c = 0.5

[law]
kind = fixed
k = 5

[run]
scheme = without_replacement
n_max = 2000
seed = 11
replications = 4
checkpoints = [1000, 2000]

[analysis]
check_strong_law = true
output.dir = \"out dir\"   # dotted key inside a section
";

    #[test]
    fn parses_sections_and_values() {
        let doc = Document::parse(BASE).unwrap();
        assert_eq!(doc.entries["model.q1"].value, Value::Number(0.5));
        assert_eq!(doc.entries["run.checkpoints"].value, Value::List(vec![1000.0, 2000.0]));
        assert_eq!(doc.entries["analysis.output.dir"].value, Value::Str("out dir".into()));
        assert_eq!(doc.entries["model.q1"].line, 5);
        assert_eq!(doc.entries["model.q1"].column, 6);
    }

    #[test]
    fn builds_experiment() {
        let text = BASE.replace("output.dir = \"out dir\"   # dotted key inside a section\n", "")
            + "[output]\ndir = \"out dir\"\n";
        let cfg = ExperimentConfig::parse(&text).unwrap();
        assert_eq!(cfg.run.scheme, SamplingScheme::WithoutReplacement);
        assert_eq!(cfg.run.checkpoints, vec![1000, 2000]);
        assert_eq!(cfg.output, PathBuf::from("out dir"));
        assert!(cfg.analysis.check_strong_law && !cfg.analysis.check_clt);
        assert_eq!(cfg.spec_args["c"], 0.5);
    }

    fn config_error(text: &str) -> (usize, usize, String) {
        match ExperimentConfig::parse(text) {
            Err(Error::Config { line, column, message }) => (line, column, message),
            other => panic!("expected a config error, got {other:?}"),
        }
    }

    #[test]
    fn errors_carry_positions() {
        let (_, _, m) = config_error(&BASE.replace("q1 = 0.5\n", ""));
        assert!(m.contains("model.q1"), "{m}");
        let (l, c, m) = config_error(&BASE.replace("q1 = 0.5", "q1 = 1.5"));
        assert_eq!((l, c), (5, 6));
        assert!(m.contains("q1"));
        let (l, _, m) = config_error(&BASE.replace("k = 5", "k = 5\nkk = 2"));
        assert_eq!(l, 16);
        assert!(m.contains("law.kk"));
        let (l, c, _) = config_error(&BASE.replace("n_max = 2000", "n_max 2000"));
        assert_eq!((l, c), (19, 1));
        let (l, c, _) = config_error(&BASE.replace("[1000, 2000]", "[1000, x]"));
        assert_eq!((l, c), (22, 22));
        let (l, _, m) = config_error(&BASE.replace("seed = 11", "seed = 11\nseed = 12"));
        assert_eq!(l, 21);
        assert!(m.contains("duplicate"));
        let (l, _, _) = config_error(&BASE.replace("kind = constant", "kind = wobbly"));
        assert_eq!(l, 10);
        let (l, _, _) = config_error(&BASE.replace("[law]", "[law"));
        assert_eq!(l, 13);
    }

    #[test]
    fn without_replacement_needs_room() {
        let (l, _, m) = config_error(&BASE.replace("init_len = 10", "init_len = 3"));
        assert!(l > 0 && m.contains("exceeds"), "{m}");
    }

    #[test]
    fn needs_an_analysis() {
        let (_, _, m) = config_error(&BASE.replace("check_strong_law = true", "check_clt = false"));
        assert!(m.contains("at least one"));
    }
}
