//! Regenerates the synthetic fixture bundles and their frozen reports.
//!
//! cargo run --release -p semcurv-cli --example make_fixtures [-- <dir>]

use std::fs;
use std::path::{Path, PathBuf};

use clap::Parser;

use semcurv::synthetic::{lensing_bundles, paragraph_bundle, sentence_bundle};
use semcurv::{save_bundle, TrajectoryBundle};
use semcurv_cli::{run, Cli};

fn write_bundle(dir: &Path, name: &str, bundle: &TrajectoryBundle) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, save_bundle(bundle).expect("valid bundle")).expect("write bundle");
    path
}

fn cli(args: &[&str]) {
    let mut full = vec!["semcurv"];
    full.extend_from_slice(args);
    run(Cli::parse_from(full)).expect("fixture command succeeds");
}

fn main() {
    let dir = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures"));
    fs::create_dir_all(&dir).expect("create fixture dir");

    let sentences = write_bundle(
        &dir,
        "sentences.emtj",
        &sentence_bundle(2024, 100, 768, 13).expect("sentences"),
    );
    let paragraph = write_bundle(
        &dir,
        "paragraph.emtj",
        &paragraph_bundle(1967, 69, 64, 13).expect("paragraph"),
    );
    let [with, without, base] = lensing_bundles(50, 50, 128, 13).expect("lensing");
    let with = write_bundle(&dir, "lensing_with.emtj", &with);
    let without = write_bundle(&dir, "lensing_without.emtj", &without);
    let base = write_bundle(&dir, "lensing_base.emtj", &base);

    let s = |p: &Path| p.to_str().expect("utf-8 path").to_owned();
    let out = |name: &str| s(&dir.join(name));
    cli(&[
        "analyze",
        "--input",
        &s(&sentences),
        "--out",
        &out("sentences.analyze.json"),
    ]);
    cli(&[
        "nulltest",
        "--input",
        &s(&sentences),
        "--out",
        &out("sentences.nulltest.json"),
    ]);
    cli(&[
        "lensing",
        "--with",
        &s(&with),
        "--without",
        &s(&without),
        "--base",
        &s(&base),
        "--out",
        &out("lensing.json"),
    ]);

    let scratch = dir.join("landscape.tmp");
    cli(&["landscape", "--input", &s(&paragraph), "--out", &s(&scratch)]);
    fs::rename(scratch.join("frames.json"), dir.join("paragraph.frames.json")).expect("move frames");
    fs::remove_dir_all(&scratch).expect("clean scratch dir");
}
