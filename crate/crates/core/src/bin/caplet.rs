use caplet::driver::{self, DriverError};
use caplet::encode::EncoderOptions;
use caplet::solver::{SolverConfig, DEFAULT_TIMEOUT_MS};
use clap::{Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Duration;

#[derive(Parser)]
#[command(name = "caplet", version, about = "Verify clients of capability-annotated libraries")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Verify every function with a body in the given files.
    Verify(VerifyArgs),
}

#[derive(clap::Args)]
struct VerifyArgs {
    files: Vec<PathBuf>,
    /// Machine-readable report.
    #[arg(long)]
    json: bool,
    /// Write one script per obligation under DIR instead of solving.
    #[arg(long, value_name = "DIR")]
    emit_smt: Option<PathBuf>,
    /// Compare verdicts with `//~` comments in the sources.
    #[arg(long)]
    expect: bool,
    /// Solver executable (default: $CAPLET_SOLVER, then `z3`).
    #[arg(long)]
    solver: Option<PathBuf>,
    /// Extra solver argument; repeatable.
    #[arg(long = "solver-arg", allow_hyphen_values = true)]
    solver_args: Vec<String>,
    /// Per-obligation timeout in milliseconds.
    #[arg(long, default_value_t = DEFAULT_TIMEOUT_MS)]
    timeout: u64,
    /// Concurrent solver processes.
    #[arg(long)]
    jobs: Option<usize>,
    /// Print the capability lattice as Graphviz and exit.
    #[arg(long)]
    dump_lattice: bool,
    /// Print the root places at every program point.
    #[arg(long)]
    dump_roots: bool,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 3 } else { 0 });
        }
    };
    let Cmd::Verify(args) = cli.cmd;
    match run(args) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(3)
        }
    }
}

fn run(args: VerifyArgs) -> Result<u8, DriverError> {
    if args.dump_lattice {
        print!("{}", caplet::capability::base_edges().to_dot());
        return Ok(0);
    }
    if args.files.is_empty() {
        return Err(DriverError::Config("no input files".into()));
    }
    let mut cfg = SolverConfig { args: args.solver_args.clone(), timeout: Duration::from_millis(args.timeout), ..SolverConfig::default() };
    if let Some(s) = &args.solver {
        cfg.path = s.clone();
    }
    if let Some(j) = args.jobs {
        cfg.jobs = j.max(1);
    }
    let opts = EncoderOptions::default();
    let checked = args.files.iter().map(|f| driver::check_file(f)).collect::<Result<Vec<_>, _>>()?;

    if args.dump_roots {
        for c in &checked {
            print!("{}", driver::dump_roots(c));
        }
        return Ok(0);
    }
    if let Some(dir) = &args.emit_smt {
        for c in &checked {
            let obs = driver::obligations(c, &opts)?;
            for p in driver::emit_smt(&obs, dir)? {
                println!("{}", p.display());
            }
        }
        return Ok(0);
    }

    let mut all = Vec::new();
    let mut code = 0;
    for c in &checked {
        let outcomes = driver::verify(c, &cfg, &opts)?;
        let mismatches = if args.expect { Some(driver::check_expectations(&outcomes, &c.text)?) } else { None };
        if let Some(ms) = &mismatches {
            for m in ms {
                eprintln!("{}:{}: expected {:?}, got {:?}", c.name, m.line, m.expected, m.got);
            }
        }
        code = code.max(match driver::exit_code(&outcomes, mismatches.as_deref()) {
            1 => 2,
            2 => 1,
            _ => 0,
        });
        all.extend(outcomes);
    }
    if args.json {
        println!("{}", driver::json_report(&all));
    } else {
        print!("{}", driver::text_report(&all));
    }
    // severity ranks: mismatch/failure above inconclusive
    Ok(match code {
        2 => 1,
        1 => 2,
        _ => 0,
    })
}
