use std::process::Command;

/// Every manifest entry exits with its recorded code under `--expect`.
#[test]
fn manifest_exit_codes() {
    let dir = caplet::corpus::corpus_dir();
    let m = caplet::corpus::corpus_manifest();
    assert!(!m.is_empty());
    for (file, code) in m {
        let o = Command::new(env!("CARGO_BIN_EXE_caplet")).args(["verify", "--expect"]).arg(dir.join(&file)).output().unwrap();
        assert_eq!(o.status.code(), Some(code), "{file}: {}{}", String::from_utf8_lossy(&o.stdout), String::from_utf8_lossy(&o.stderr));
    }
}

/// Every client appears in the manifest.
#[test]
fn manifest_covers_the_clients_directory() {
    let dir = caplet::corpus::corpus_dir().join("clients");
    let listed: Vec<String> = caplet::corpus::corpus_manifest().into_iter().map(|(f, _)| f).collect();
    for e in std::fs::read_dir(dir).unwrap() {
        let name = format!("clients/{}", e.unwrap().file_name().to_string_lossy());
        assert!(listed.contains(&name), "{name} missing from manifest");
    }
}
