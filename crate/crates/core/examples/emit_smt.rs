//! Prints the solver script of the first obligation of a client.

use caplet::driver;
use caplet::encode::EncoderOptions;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let path = caplet::corpus::corpus_dir().join("clients/cell_client.cap");
    let c = driver::check_file(&path)?;
    let obs = driver::obligations(&c, &EncoderOptions::default())?;
    let o = obs.first().ok_or("no obligations")?;
    println!("; {} at {}:{} in {}", o.kind, o.span.line, o.span.col, o.fn_name);
    print!("{}", o.script);
    Ok(())
}
