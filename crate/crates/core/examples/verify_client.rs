//! Verifies one corpus client and prints the report.
//!
//! cargo run --example verify_client -- refcell_client

use caplet::driver;
use caplet::encode::EncoderOptions;
use caplet::solver::SolverConfig;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let name = std::env::args().nth(1).unwrap_or_else(|| "cell_client".into());
    let path = caplet::corpus::corpus_dir().join("clients").join(format!("{name}.cap"));
    let c = driver::check_file(&path)?;
    let out = driver::verify(&c, &SolverConfig::default(), &EncoderOptions::default())?;
    print!("{}", driver::text_report(&out));
    let ms = driver::check_expectations(&out, &c.text)?;
    println!("{} expectation mismatch(es)", ms.len());
    Ok(())
}
