//! Shared helpers for the criterion benchmarks.

use std::fs;
use std::path::{Path, PathBuf};

/// The bundled corpus directory.
pub fn corpus_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../corpus")
}

/// `(fixture name, input source)` for every corpus fixture, sorted by name.
pub fn corpus_sources() -> Vec<(String, String)> {
    let mut out: Vec<(String, String)> = fs::read_dir(corpus_dir())
        .map(|rd| {
            rd.filter_map(|e| {
                let path = e.ok()?.path();
                let text = fs::read_to_string(path.join("input.c")).ok()?;
                Some((path.file_name()?.to_string_lossy().into_owned(), text))
            })
            .collect()
        })
        .unwrap_or_default();
    out.sort();
    out
}

/// The largest fixture, by source length.
pub fn largest_source() -> (String, String) {
    corpus_sources()
        .into_iter()
        .max_by_key(|(_, s)| s.len())
        .expect("corpus is empty")
}

#[cfg(test)]
mod tests {
    #[test]
    fn corpus_is_found() {
        assert!(super::corpus_sources().len() >= 2);
    }
}
