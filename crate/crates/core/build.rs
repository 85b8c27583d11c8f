//! Records the resolved versions of the main dependencies for run manifests.

use std::path::Path;

const TRACKED: [&str; 8] = ["csv", "nalgebra", "rand", "rand_chacha", "rayon", "serde_json", "sha2", "toml"];

fn main() {
    let lock = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../Cargo.lock");
    println!("cargo:rerun-if-changed={}", lock.display());
    let text = std::fs::read_to_string(&lock).unwrap_or_default();
    let mut found = Vec::new();
    let mut name = None;
    for line in text.lines() {
        if let Some(v) = line.strip_prefix("name = ") {
            name = Some(v.trim_matches('"').to_string());
        } else if let Some(v) = line.strip_prefix("version = ") {
            if let Some(n) = name.take().filter(|n| TRACKED.contains(&n.as_str())) {
                found.push(format!("{n}={}", v.trim_matches('"')));
            }
        }
    }
    found.sort();
    found.dedup_by(|a, b| a.split('=').next() == b.split('=').next());
    println!("cargo:rustc-env=DEFAULTBENCH_LIBRARY_VERSIONS={}", found.join(","));
}
