use std::path::PathBuf;
use std::process::{Command, Output};

fn caplet(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_caplet")).args(args).output().expect("runs caplet")
}

fn client(name: &str) -> String {
    caplet::corpus::corpus_dir().join("clients").join(name).display().to_string()
}

#[test]
fn missing_file_exits_3() {
    let o = caplet(&["verify", "/nonexistent/x.cap"]);
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("/nonexistent/x.cap"));
}

#[test]
fn unknown_flag_exits_3() {
    assert_eq!(caplet(&["verify", "--frobnicate"]).status.code(), Some(3));
}

#[test]
fn help_exits_0() {
    assert_eq!(caplet(&["--help"]).status.code(), Some(0));
}

#[test]
fn type_error_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("bad.cap");
    std::fs::write(&p, "fn f() { let x: i32 = true; }\n").unwrap();
    let o = caplet(&["verify", p.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("bad.cap:1:"));
}

#[test]
fn failing_assert_exits_1_without_expect() {
    let o = caplet(&["verify", &client("cell_two_calls.cap")]);
    assert_eq!(o.status.code(), Some(1));
    let out = String::from_utf8_lossy(&o.stdout);
    assert!(out.contains("not verified"));
}

#[test]
fn json_report_lists_every_obligation() {
    let o = caplet(&["verify", "--json", &client("cell_two_calls.cap")]);
    let j: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(j["schema"], 1);
    let rs = j["results"].as_array().unwrap();
    assert_eq!(rs.len(), 2);
    assert_eq!(rs[0]["verdict"], "NotVerified");
    assert_eq!(rs[1]["verdict"], "Verified");
    assert_eq!(rs[0]["function"], "cell_two_calls");
}

#[test]
fn emit_smt_matches_in_process_scripts() {
    let dir = tempfile::tempdir().unwrap();
    let o = caplet(&["verify", "--emit-smt", dir.path().to_str().unwrap(), &client("cell_client.cap")]);
    assert_eq!(o.status.code(), Some(0));
    let c = caplet::driver::check_file(&PathBuf::from(client("cell_client.cap"))).unwrap();
    let obs = caplet::driver::obligations(&c, &Default::default()).unwrap();
    for ob in &obs {
        let p = dir.path().join(&ob.fn_name).join(format!("{}.smt2", ob.idx));
        assert_eq!(std::fs::read_to_string(p).unwrap(), ob.script);
    }
}

#[test]
fn missing_solver_is_inconclusive() {
    let o = caplet(&["verify", "--solver", "/nonexistent/solver", &client("cell_client.cap")]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn dump_roots_prints_a_table() {
    let o = caplet(&["verify", "--dump-roots", &client("cell_client.cap")]);
    assert_eq!(o.status.code(), Some(0));
    let s = String::from_utf8_lossy(&o.stdout);
    assert!(s.starts_with("fn\tpoint\tversion\troot\tplace\tkind\ttype\n"));
    assert!(s.contains("cell_client\t0\tw0\t0\tc\treadRef\t&Cell<i32>"));
}

#[test]
fn dump_lattice_is_graphviz() {
    let o = caplet(&["verify", "--dump-lattice"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&o.stdout).starts_with("digraph"));
}
