//! The verification pipeline and its reports.

use crate::encode::{self, EncoderOptions, Obligation, ObligationKind};
use crate::lang::ir::TypedProgram;
use crate::lang::{typecheck, Diagnostic, SourceFile};
use crate::solver::{self, SolverConfig, SolverResult, SolverStatus};
use crate::{corpus, flow, purity};
use serde::Serialize;
use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

#[derive(Debug, thiserror::Error)]
pub enum DriverError {
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{0}")]
    Frontend(String),
    #[error("{0}")]
    Config(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Verdict {
    Verified,
    NotVerified,
    Inconclusive,
}

impl Verdict {
    pub fn of(status: &SolverStatus) -> Verdict {
        match status {
            SolverStatus::Unsat => Verdict::Verified,
            SolverStatus::Sat => Verdict::NotVerified,
            _ => Verdict::Inconclusive,
        }
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Verified => "verified",
            Verdict::NotVerified => "not verified",
            Verdict::Inconclusive => "inconclusive",
        })
    }
}

#[derive(Debug, Clone)]
pub struct Outcome {
    pub file: String,
    pub function: String,
    pub line: u32,
    pub col: u32,
    pub kind: ObligationKind,
    pub verdict: Verdict,
    pub result: SolverResult,
}

/// A type-checked user file together with the prelude.
pub struct Checked {
    pub name: String,
    pub text: String,
    pub prog: TypedProgram,
}

fn render(files: &[SourceFile], d: &Diagnostic) -> String {
    let name = files.get(d.span.file as usize).map(|f| f.name.as_str()).unwrap_or("<input>");
    d.render(name)
}

/// Parses, type checks and purity checks one user file.
pub fn check_source(name: &str, text: &str) -> Result<Checked, DriverError> {
    let files = corpus::with_prelude(SourceFile::user(name, text));
    let prog = typecheck(&files).map_err(|d| DriverError::Frontend(render(&files, &d)))?;
    let violations = purity::check_program(&prog);
    if let Some(v) = violations.first() {
        let d: Diagnostic = v.clone().into();
        return Err(DriverError::Frontend(render(&files, &d)));
    }
    Ok(Checked { name: name.to_string(), text: text.to_string(), prog })
}

pub fn check_file(path: &Path) -> Result<Checked, DriverError> {
    let text = std::fs::read_to_string(path).map_err(|source| DriverError::Io { path: path.display().to_string(), source })?;
    check_source(&path.display().to_string(), &text)
}

/// Obligations of every verification target, in source order.
pub fn obligations(c: &Checked, opts: &EncoderOptions) -> Result<Vec<Obligation>, DriverError> {
    let mut out = Vec::new();
    for f in c.prog.targets() {
        let obs = encode::encode_function(&c.prog, f, opts).map_err(|d| DriverError::Frontend(d.render(&c.name)))?;
        out.extend(obs);
    }
    out.sort_by_key(|o| (o.span, o.kind, o.idx));
    Ok(out)
}

/// Writes `<dir>/<fn>/<idx>.smt2` for every obligation.
pub fn emit_smt(obs: &[Obligation], dir: &Path) -> Result<Vec<std::path::PathBuf>, DriverError> {
    let mut paths = Vec::new();
    for o in obs {
        let sub = dir.join(o.fn_name.replace(['<', '>', ':', ' ', ',', '&', '*'], "_"));
        std::fs::create_dir_all(&sub).map_err(|source| DriverError::Io { path: sub.display().to_string(), source })?;
        let p = sub.join(format!("{}.smt2", o.idx));
        std::fs::write(&p, &o.script).map_err(|source| DriverError::Io { path: p.display().to_string(), source })?;
        paths.push(p);
    }
    Ok(paths)
}

/// Solves every obligation; results are in source order.
pub fn verify(c: &Checked, cfg: &SolverConfig, opts: &EncoderOptions) -> Result<Vec<Outcome>, DriverError> {
    let obs = obligations(c, opts)?;
    let scripts: Vec<String> = obs.iter().map(|o| o.script.clone()).collect();
    let results = solver::run_all(&scripts, cfg);
    Ok(obs
        .into_iter()
        .zip(results)
        .map(|(o, r)| Outcome {
            file: c.name.clone(),
            function: o.fn_name,
            line: o.span.line,
            col: o.span.col,
            kind: o.kind,
            verdict: Verdict::of(&r.status),
            result: r,
        })
        .collect())
}

/// Expected outcome of the obligations on one line.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Expect {
    Verify,
    Fail,
    /// A known incompleteness; reported like `Fail`.
    Incomplete,
}

/// `//~ VERIFY`, `//~ FAIL` and `//~ INCOMPLETE` comments by line.
pub fn parse_expectations(text: &str) -> Result<BTreeMap<u32, Expect>, DriverError> {
    let mut out = BTreeMap::new();
    for (i, l) in text.lines().enumerate() {
        let Some(pos) = l.find("//~") else { continue };
        let tag = l[pos + 3..].split_whitespace().next().unwrap_or("");
        let e = match tag {
            "VERIFY" => Expect::Verify,
            "FAIL" => Expect::Fail,
            "INCOMPLETE" => Expect::Incomplete,
            _ => return Err(DriverError::Config(format!("line {}: unknown expectation `{tag}`", i + 1))),
        };
        out.insert(i as u32 + 1, e);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mismatch {
    pub line: u32,
    pub expected: Expect,
    pub got: Vec<Verdict>,
}

/// Compares outcomes with the expectation comments. Lines without a
/// comment expect every obligation to verify. A `FAIL` line is met when
/// some obligation on it is not verified and the rest are verified.
pub fn check_expectations(outcomes: &[Outcome], text: &str) -> Result<Vec<Mismatch>, DriverError> {
    let exp = parse_expectations(text)?;
    let mut by_line: BTreeMap<u32, Vec<Verdict>> = BTreeMap::new();
    for o in outcomes {
        by_line.entry(o.line).or_default().push(o.verdict);
    }
    if let Some(line) = exp.keys().find(|l| !by_line.contains_key(l)) {
        return Err(DriverError::Config(format!("line {line}: expectation on a line without an obligation")));
    }
    let mut out = Vec::new();
    for (line, got) in by_line {
        let expected = exp.get(&line).copied().unwrap_or(Expect::Verify);
        let ok = match expected {
            Expect::Verify => got.iter().all(|v| *v == Verdict::Verified),
            Expect::Fail | Expect::Incomplete => {
                got.contains(&Verdict::NotVerified) && got.iter().all(|v| *v != Verdict::Inconclusive)
            }
        };
        if !ok {
            out.push(Mismatch { line, expected, got });
        }
    }
    Ok(out)
}

/// Process exit code for a run.
pub fn exit_code(outcomes: &[Outcome], mismatches: Option<&[Mismatch]>) -> i32 {
    let failed = match mismatches {
        Some(m) => !m.is_empty(),
        None => outcomes.iter().any(|o| o.verdict == Verdict::NotVerified),
    };
    if failed {
        1
    } else if outcomes.iter().any(|o| o.verdict == Verdict::Inconclusive) {
        2
    } else {
        0
    }
}

#[derive(Serialize)]
struct JsonResult<'a> {
    file: &'a str,
    function: &'a str,
    line: u32,
    col: u32,
    kind: String,
    verdict: Verdict,
    millis: u64,
}

#[derive(Serialize)]
struct JsonReport<'a> {
    schema: u32,
    results: Vec<JsonResult<'a>>,
}

pub fn json_report(outcomes: &[Outcome]) -> String {
    let results = outcomes
        .iter()
        .map(|o| JsonResult {
            file: &o.file,
            function: &o.function,
            line: o.line,
            col: o.col,
            kind: o.kind.to_string(),
            verdict: o.verdict,
            millis: o.result.millis,
        })
        .collect();
    serde_json::to_string_pretty(&JsonReport { schema: 1, results }).expect("serializable report")
}

pub fn text_report(outcomes: &[Outcome]) -> String {
    let mut s = String::new();
    for o in outcomes {
        s.push_str(&format!("{}:{}:{}: {} in `{}`: {} ({} ms)", o.file, o.line, o.col, o.kind, o.function, o.verdict, o.result.millis));
        if let SolverStatus::ProcessError(m) = &o.result.status {
            s.push_str(&format!(" [{m}]"));
        }
        if o.result.status == SolverStatus::Timeout {
            s.push_str(" [timeout]");
        }
        s.push('\n');
    }
    s
}

/// Root tables of every verification target.
pub fn dump_roots(c: &Checked) -> String {
    let mut s = String::from("fn\tpoint\tversion\troot\tplace\tkind\ttype\n");
    for f in c.prog.targets() {
        let f = &c.prog.fns[f];
        let g = flow::build_cfg(&c.prog, f);
        let info = flow::analyze(&c.prog, f, &g);
        s.push_str(&flow::dump_roots(f, &g, &info));
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    fn outcome(line: u32, verdict: Verdict) -> Outcome {
        Outcome {
            file: "f".into(),
            function: "g".into(),
            line,
            col: 1,
            kind: ObligationKind::Assert,
            verdict,
            result: SolverResult { status: SolverStatus::Unknown, millis: 0, output: String::new() },
        }
    }

    #[test]
    fn expectations_match_by_line() {
        let text = "a\nb //~ FAIL\nc //~ VERIFY\n";
        let os = [outcome(1, Verdict::Verified), outcome(2, Verdict::NotVerified), outcome(3, Verdict::Verified)];
        assert!(check_expectations(&os, text).unwrap().is_empty());
        let os = [outcome(2, Verdict::Verified), outcome(3, Verdict::Verified)];
        let m = check_expectations(&os, text).unwrap();
        assert_eq!(m.len(), 1);
        assert_eq!(m[0].line, 2);
    }

    #[test]
    fn unannotated_obligations_expect_verify() {
        let m = check_expectations(&[outcome(1, Verdict::NotVerified)], "x\n").unwrap();
        assert_eq!(m[0].expected, Expect::Verify);
    }

    #[test]
    fn dangling_expectation_is_a_config_error() {
        assert!(matches!(check_expectations(&[], "x //~ VERIFY\n"), Err(DriverError::Config(_))));
        assert!(matches!(parse_expectations("//~ MAYBE"), Err(DriverError::Config(_))));
    }

    #[test]
    fn incomplete_matches_not_verified() {
        let m = check_expectations(&[outcome(1, Verdict::NotVerified)], "x //~ INCOMPLETE\n").unwrap();
        assert!(m.is_empty());
    }

    #[test]
    fn exit_codes() {
        assert_eq!(exit_code(&[outcome(1, Verdict::Verified)], None), 0);
        assert_eq!(exit_code(&[outcome(1, Verdict::NotVerified)], None), 1);
        assert_eq!(exit_code(&[outcome(1, Verdict::Inconclusive)], None), 2);
        assert_eq!(exit_code(&[outcome(1, Verdict::NotVerified)], Some(&[])), 0);
    }

    #[test]
    fn json_is_schema_versioned() {
        let j: serde_json::Value = serde_json::from_str(&json_report(&[outcome(4, Verdict::Verified)])).unwrap();
        assert_eq!(j["schema"], 1);
        assert_eq!(j["results"][0]["line"], 4);
        assert_eq!(j["results"][0]["verdict"], "Verified");
    }
}
