//! Running SMT scripts through an external solver process.

use std::io::Read;
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};
use std::sync::mpsc;
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SolverStatus {
    Unsat,
    Sat,
    Unknown,
    Timeout,
    ProcessError(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SolverResult {
    pub status: SolverStatus,
    pub millis: u64,
    /// Full solver output, kept for failed obligations.
    pub output: String,
}

#[derive(Debug, Clone)]
pub struct SolverConfig {
    pub path: PathBuf,
    pub args: Vec<String>,
    pub timeout: Duration,
    pub jobs: usize,
}

pub const DEFAULT_TIMEOUT_MS: u64 = 30_000;

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            path: std::env::var_os("CAPLET_SOLVER").map(PathBuf::from).unwrap_or_else(|| PathBuf::from("z3")),
            args: vec![],
            timeout: Duration::from_millis(DEFAULT_TIMEOUT_MS),
            jobs: std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1),
        }
    }
}

/// Last `sat`/`unsat`/`unknown` line of the output.
pub fn parse_status(output: &str) -> Option<SolverStatus> {
    output.lines().rev().map(str::trim).find_map(|l| match l {
        "unsat" => Some(SolverStatus::Unsat),
        "sat" => Some(SolverStatus::Sat),
        "unknown" | "timeout" => Some(SolverStatus::Unknown),
        _ => None,
    })
}

/// Runs the solver on a script file, killing it at the timeout.
pub fn run_script(path: &Path, cfg: &SolverConfig) -> SolverResult {
    let start = Instant::now();
    let elapsed = |s: Instant| s.elapsed().as_millis() as u64;
    let child = Command::new(&cfg.path).args(&cfg.args).arg(path).stdin(Stdio::null()).stdout(Stdio::piped()).stderr(Stdio::piped()).spawn();
    let mut child = match child {
        Ok(c) => c,
        Err(e) => {
            return SolverResult {
                status: SolverStatus::ProcessError(format!("cannot run {}: {e}", cfg.path.display())),
                millis: elapsed(start),
                output: String::new(),
            }
        }
    };
    // drain stdout on a thread so a chatty solver cannot block on a full pipe
    let mut stdout = child.stdout.take().expect("piped stdout");
    let reader = std::thread::spawn(move || {
        let mut s = String::new();
        let _ = stdout.read_to_string(&mut s);
        s
    });
    let status = loop {
        match child.try_wait() {
            Ok(Some(st)) => break Some(st),
            Ok(None) if start.elapsed() >= cfg.timeout => {
                let _ = child.kill();
                let _ = child.wait();
                break None;
            }
            Ok(None) => std::thread::sleep(Duration::from_millis(2)),
            Err(e) => {
                let _ = child.kill();
                let _ = child.wait();
                return SolverResult { status: SolverStatus::ProcessError(e.to_string()), millis: elapsed(start), output: String::new() };
            }
        }
    };
    let output = reader.join().unwrap_or_default();
    let millis = elapsed(start);
    let Some(exit) = status else {
        return SolverResult { status: SolverStatus::Timeout, millis, output };
    };
    let status = match parse_status(&output) {
        Some(s) => s,
        None => {
            let mut err = String::new();
            if let Some(mut e) = child.stderr.take() {
                let _ = e.read_to_string(&mut err);
            }
            SolverStatus::ProcessError(format!("no verdict (exit {exit}): {}{}", output.trim(), err.trim()))
        }
    };
    SolverResult { status, millis, output }
}

/// Writes the script to a temporary file and runs it.
pub fn run_text(script: &str, cfg: &SolverConfig) -> SolverResult {
    let file = match tempfile::Builder::new().suffix(".smt2").tempfile() {
        Ok(f) => f,
        Err(e) => return SolverResult { status: SolverStatus::ProcessError(e.to_string()), millis: 0, output: String::new() },
    };
    if let Err(e) = std::fs::write(file.path(), script) {
        return SolverResult { status: SolverStatus::ProcessError(e.to_string()), millis: 0, output: String::new() };
    }
    run_script(file.path(), cfg)
}

/// Solves all scripts with at most `cfg.jobs` solver processes at a time.
/// Results come back in input order.
pub fn run_all(scripts: &[String], cfg: &SolverConfig) -> Vec<SolverResult> {
    let jobs = cfg.jobs.max(1).min(scripts.len().max(1));
    let next = Arc::new(Mutex::new(0usize));
    let (tx, rx) = mpsc::channel();
    std::thread::scope(|s| {
        for _ in 0..jobs {
            let next = Arc::clone(&next);
            let tx = tx.clone();
            s.spawn(move || loop {
                let i = {
                    let mut n = next.lock().expect("work counter");
                    let i = *n;
                    *n += 1;
                    i
                };
                if i >= scripts.len() {
                    break;
                }
                let _ = tx.send((i, run_text(&scripts[i], cfg)));
            });
        }
    });
    drop(tx);
    let mut out: Vec<Option<SolverResult>> = vec![None; scripts.len()];
    for (i, r) in rx {
        out[i] = Some(r);
    }
    out.into_iter().map(|r| r.expect("every script solved")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn z3() -> SolverConfig {
        SolverConfig { timeout: Duration::from_secs(10), ..SolverConfig::default() }
    }

    #[test]
    fn status_is_the_last_verdict_line() {
        assert_eq!(parse_status("sat\nunsat\n"), Some(SolverStatus::Unsat));
        assert_eq!(parse_status("(error \"x\")\nsat\n"), Some(SolverStatus::Sat));
        assert_eq!(parse_status("garbage"), None);
    }

    #[test]
    fn contradiction_is_unsat() {
        assert_eq!(run_text("(assert false)(check-sat)", &z3()).status, SolverStatus::Unsat);
    }

    #[test]
    fn trivial_script_is_sat() {
        assert_eq!(run_text("(assert true)(check-sat)", &z3()).status, SolverStatus::Sat);
    }

    #[test]
    fn missing_solver_is_a_process_error() {
        let cfg = SolverConfig { path: "/nonexistent/solver".into(), ..z3() };
        assert!(matches!(run_text("(check-sat)", &cfg).status, SolverStatus::ProcessError(_)));
    }

    /// Pigeonhole: 9 pigeons into 8 holes, far beyond a 1 ms budget.
    fn pigeonhole(n: usize) -> String {
        let mut s = String::new();
        for p in 0..=n {
            for h in 0..n {
                s.push_str(&format!("(declare-const p{p}h{h} Bool)\n"));
            }
        }
        for p in 0..=n {
            let hs: Vec<String> = (0..n).map(|h| format!("p{p}h{h}")).collect();
            s.push_str(&format!("(assert (or {}))\n", hs.join(" ")));
        }
        for h in 0..n {
            for a in 0..=n {
                for b in a + 1..=n {
                    s.push_str(&format!("(assert (not (and p{a}h{h} p{b}h{h})))\n"));
                }
            }
        }
        s.push_str("(check-sat)\n");
        s
    }

    #[test]
    fn timeout_kills_the_solver() {
        let cfg = SolverConfig { timeout: Duration::from_millis(1), ..z3() };
        let r = run_text(&pigeonhole(9), &cfg);
        assert_eq!(r.status, SolverStatus::Timeout);
        assert!(r.millis < 5_000);
    }

    #[test]
    fn parallel_results_keep_input_order() {
        let scripts: Vec<String> = (0..6).map(|i| if i % 2 == 0 { "(assert false)(check-sat)".into() } else { "(check-sat)".into() }).collect();
        let cfg = SolverConfig { jobs: 3, ..z3() };
        let st: Vec<SolverStatus> = run_all(&scripts, &cfg).into_iter().map(|r| r.status).collect();
        for (i, s) in st.iter().enumerate() {
            assert_eq!(*s, if i % 2 == 0 { SolverStatus::Unsat } else { SolverStatus::Sat });
        }
    }
}
