use caplet::driver::{self, Verdict};
use caplet::encode::{self, EncoderOptions};
use caplet::solver::{self, SolverConfig, SolverStatus};

fn verdicts(src: &str) -> Vec<Verdict> {
    let c = driver::check_source("t.cap", src).unwrap();
    driver::verify(&c, &SolverConfig::default(), &EncoderOptions::default()).unwrap().into_iter().map(|o| o.verdict).collect()
}

/// Facts reaching each obligation are satisfiable, so no verdict is
/// vacuous.
#[test]
fn obligation_points_are_reachable() {
    let cfg = SolverConfig::default();
    for (file, _) in caplet::corpus::corpus_manifest() {
        let c = driver::check_file(&caplet::corpus::corpus_dir().join(&file)).unwrap();
        for f in c.prog.targets() {
            let enc = encode::encode(&c.prog, f, &EncoderOptions::default()).unwrap();
            let points: std::collections::BTreeSet<_> = enc.obligations().iter().map(|o| o.point).collect();
            for (p, script) in enc.reachability_scripts() {
                if !points.contains(&p) {
                    continue;
                }
                let r = solver::run_text(&script, &cfg);
                assert_eq!(r.status, SolverStatus::Sat, "{file}: {} point {p} is vacuous", enc.fn_name);
            }
        }
    }
}

#[test]
fn every_point_gets_a_fresh_version() {
    let c = driver::check_file(&caplet::corpus::corpus_dir().join("clients/arc_client.cap")).unwrap();
    let f = c.prog.targets().next().unwrap();
    let enc = encode::encode(&c.prog, f, &EncoderOptions::default()).unwrap();
    let mut seen = std::collections::BTreeSet::new();
    for p in &enc.graph.points {
        assert!(seen.insert(p.version.clone()), "{} reused", p.version);
        assert!(enc.prelude.contains(&format!("(declare-const {} Version)", p.version)));
    }
}

#[test]
fn unstable_reads_agree_within_one_version() {
    assert_eq!(verdicts("fn f(c: &Cell<i32>) { assert!(c.get() == c.get()); }"), [Verdict::Verified]);
}

#[test]
fn unstable_reads_differ_across_a_call() {
    let src = "fn g(c: &Cell<i32>);\nfn f(c: &Cell<i32>) { let a = c.get(); g(c); assert!(a == c.get()); }";
    assert_eq!(verdicts(src), [Verdict::NotVerified]);
}

#[test]
fn integer_division_truncates() {
    let src = "fn f() { let a = -7; assert!(a / 2 == -3); assert!(a % 2 == -1); }";
    assert_eq!(verdicts(src), [Verdict::Verified, Verdict::Verified]);
}

#[test]
fn panic_is_an_obligation() {
    assert_eq!(verdicts("fn f(x: i32) { if x > 0 { panic!(); } }"), [Verdict::NotVerified]);
    assert_eq!(verdicts("fn f(x: i32) { if x > x { panic!(); } }"), [Verdict::Verified]);
}

#[test]
fn postconditions_are_checked() {
    assert_eq!(verdicts("#[ensures(result == x + 1)]\nfn f(x: i32) -> i32 { x + 1 }"), [Verdict::Verified]);
    assert_eq!(verdicts("#[ensures(result == x)]\nfn f(x: i32) -> i32 { x + 1 }"), [Verdict::NotVerified]);
}
