//! Drops one framing rule at a time and shows which verdicts change.

use caplet::driver::{self, Verdict};
use caplet::encode::{EncoderOptions, FrameRule};
use caplet::solver::SolverConfig;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let cfg = SolverConfig::default();
    for name in ["cell_client", "refcell_client", "refcell_owned"] {
        let c = driver::check_file(&caplet::corpus::corpus_dir().join(format!("clients/{name}.cap")))?;
        let base = driver::verify(&c, &cfg, &EncoderOptions::default())?;
        for rule in FrameRule::ALL {
            let opts = EncoderOptions { disabled: [rule].into_iter().collect() };
            let lost: Vec<String> = base
                .iter()
                .zip(driver::verify(&c, &cfg, &opts)?)
                .filter(|(a, b)| a.verdict == Verdict::Verified && b.verdict != Verdict::Verified)
                .map(|(a, _)| format!("line {}", a.line))
                .collect();
            println!("{name:>15} without {rule:<18} loses {}", if lost.is_empty() { "nothing".into() } else { lost.join(", ") });
        }
    }
    Ok(())
}
