//! Bundled library specifications and client programs.
//!
//! The library files form the prelude that every verified file is checked
//! against. The clients double as the acceptance suite; `manifest.tsv`
//! lists each client with its expected exit code under `--expect`.

use crate::lang::SourceFile;

macro_rules! corpus_files {
    ($($name:literal),* $(,)?) => {
        &[$(($name, include_str!(concat!("../corpus/", $name)))),*]
    };
}

pub const LIBRARY: &[(&str, &str)] = corpus_files![
    "lib/unsafe_cell.cap",
    "lib/option.cap",
    "lib/result.cap",
    "lib/cell.cap",
    "lib/refcell.cap",
    "lib/rc.cap",
    "lib/arc.cap",
    "lib/atomic.cap",
    "lib/mutex.cap",
    "lib/rwlock.cap",
    "lib/boxed.cap",
];

pub const CLIENTS: &[(&str, &str)] = corpus_files![
    "clients/arc_client.cap",
    "clients/atomic_client.cap",
    "clients/box_client.cap",
    "clients/cell_assign.cap",
    "clients/cell_client.cap",
    "clients/cell_two_calls.cap",
    "clients/mutex_client.cap",
    "clients/rc_client.cap",
    "clients/refcell_client.cap",
    "clients/refcell_owned.cap",
];

const MANIFEST: &str = include_str!("../corpus/manifest.tsv");

/// Prelude files, flagged so their functions are not verification targets.
pub fn prelude_files() -> Vec<SourceFile> {
    LIBRARY
        .iter()
        .map(|(name, text)| SourceFile { name: format!("<prelude>/{name}"), text: text.to_string(), prelude: true })
        .collect()
}

/// The prelude followed by one user file.
pub fn with_prelude(user: SourceFile) -> Vec<SourceFile> {
    let mut files = prelude_files();
    files.push(user);
    files
}

pub fn all_sources() -> impl Iterator<Item = (&'static str, &'static str)> {
    LIBRARY.iter().chain(CLIENTS).copied()
}

/// Looks up a bundled file by its corpus-relative path.
pub fn client_source(name: &str) -> Option<&'static str> {
    all_sources().find(|(n, _)| *n == name).map(|(_, t)| t)
}

/// `(client path, expected exit code)` pairs from `manifest.tsv`.
pub fn corpus_manifest() -> Vec<(String, i32)> {
    parse_manifest(MANIFEST)
}

pub fn parse_manifest(text: &str) -> Vec<(String, i32)> {
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .filter_map(|l| {
            let mut cols = l.split('\t');
            let file = cols.next()?.trim().to_string();
            let code = cols.next()?.trim().parse().ok()?;
            Some((file, code))
        })
        .collect()
}

/// On-disk location of the corpus inside the source tree.
pub fn corpus_dir() -> std::path::PathBuf {
    std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("corpus")
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeSet;

    #[test]
    fn manifest_lists_every_client_once() {
        let m = corpus_manifest();
        let listed: Vec<&str> = m.iter().map(|(f, _)| f.as_str()).collect();
        let unique: BTreeSet<&str> = listed.iter().copied().collect();
        assert_eq!(listed.len(), unique.len());
        let clients: BTreeSet<&str> = CLIENTS.iter().map(|(n, _)| *n).collect();
        assert_eq!(unique, clients);
        assert!(m.contains(&("clients/cell_client.cap".to_string(), 0)));
        assert!(m.contains(&("clients/arc_client.cap".to_string(), 0)));
    }

    #[test]
    fn bundled_files_match_disk() {
        for (name, text) in all_sources() {
            let on_disk = std::fs::read_to_string(corpus_dir().join(name)).unwrap();
            assert_eq!(on_disk, text, "{name}");
        }
        let on_disk = std::fs::read_dir(corpus_dir().join("clients")).unwrap().count();
        assert_eq!(on_disk, CLIENTS.len());
    }

    #[test]
    fn every_client_typechecks_against_the_prelude() {
        for (name, text) in CLIENTS {
            let files = with_prelude(SourceFile::user(*name, *text));
            if let Err(d) = crate::lang::typecheck(&files) {
                panic!("{name}: {d}");
            }
        }
    }

    #[test]
    fn empty_manifest_is_empty() {
        assert!(parse_manifest("# header only\n").is_empty());
    }

    #[test]
    fn extended_annotations_are_marked() {
        // every capable line in the RefCell spec touching the borrow flag is
        // an authored extension
        let (_, refcell) = LIBRARY.iter().find(|(n, _)| *n == "lib/refcell.cap").unwrap();
        let idx = refcell.find("// extended").unwrap();
        let flag_lines = refcell.lines().filter(|l| l.contains("capable") && l.contains("borrow_flag_ptr")).count();
        assert_eq!(flag_lines, 4);
        assert!(refcell[idx..].lines().take(5).skip(1).all(|l| l.contains("borrow_flag_ptr")));
    }
}
