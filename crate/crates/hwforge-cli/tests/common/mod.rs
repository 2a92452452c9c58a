//! Shared helpers for CLI and acceptance tests: seeded ink corpora,
//! reference images, and directory-tree comparison.
#![allow(dead_code)] // each test target uses a different subset

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_hwforge")
}

pub fn run(args: &[&str]) -> Output {
    Command::new(bin())
        .args(args)
        .env_remove("HWFORGE_SEED")
        .output()
        .expect("binary runs")
}

pub fn exit_code(output: &Output) -> i32 {
    output.status.code().expect("no signal")
}

pub fn stdout_str(output: &Output) -> String {
    String::from_utf8_lossy(&output.stdout).into_owned()
}

pub fn stderr_str(output: &Output) -> String {
    String::from_utf8_lossy(&output.stderr).into_owned()
}

/// A small color-model file with two subsets, written verbatim so the
/// wire format stays pinned.
pub const COLORS_JSON: &str = r#"{
  "subsets": ["forms-a", "forms-b"],
  "stroke": [[2.1, 6.0], [1.8, 7.5]],
  "background": [[8.0, 1.7], [9.2, 2.1]]
}
"#;

pub fn write_colors(dir: &Path) -> PathBuf {
    let path = dir.join("colors.json");
    fs::write(&path, COLORS_JSON).unwrap();
    path
}

/// One ink record in the native line format.
pub fn ink_record(id: &str, transcript: &str, strokes: &[Vec<(f64, f64)>]) -> String {
    let strokes_json: Vec<Vec<[f64; 2]>> = strokes
        .iter()
        .map(|s| s.iter().map(|&(x, y)| [x, y]).collect())
        .collect();
    serde_json::json!({
        "id": id,
        "transcript": transcript,
        "level": "word",
        "strokes": strokes_json,
    })
    .to_string()
}

/// A seeded corpus of `n` word-like samples whose geometry spans
/// roughly `box_w` x `box_h` source units.
pub fn make_corpus(n: usize, seed: u64, box_w: f64, box_h: f64) -> String {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let transcripts = ["xin", "chào", "việt", "nam", "số 12", "đường", "ước", "XIV"];
    let mut out = String::new();
    for i in 0..n {
        let strokes: Vec<Vec<(f64, f64)>> = (0..rng.random_range(1..4))
            .map(|_| {
                let len = rng.random_range(1..6);
                (0..len)
                    .map(|_| {
                        (
                            rng.random_range(0.0..box_w),
                            rng.random_range(0.0..box_h),
                        )
                    })
                    .collect()
            })
            .collect();
        let transcript = transcripts[rng.random_range(0..transcripts.len())];
        out.push_str(&ink_record(&format!("rec{i:04}"), transcript, &strokes));
        out.push('\n');
    }
    out
}

/// Write a two-cluster grayscale PGM (ink-ish lows, paper-ish highs).
pub fn write_reference_pgm(path: &Path, seed: u64, w: u32, h: u32) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut bytes = format!("P5\n{w} {h}\n255\n").into_bytes();
    for _ in 0..w * h {
        let v = if rng.random_bool(0.3) {
            rng.random_range(10..70u32)
        } else {
            rng.random_range(180..250u32)
        };
        bytes.push(v as u8);
    }
    fs::write(path, bytes).unwrap();
}

/// Recursively collect (relative path, content) of every file under a
/// directory, sorted by path.
pub fn snapshot_tree(root: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in fs::read_dir(&dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                let rel = path
                    .strip_prefix(root)
                    .unwrap()
                    .to_string_lossy()
                    .into_owned();
                files.push((rel, fs::read(&path).unwrap()));
            }
        }
    }
    files.sort_by(|a, b| a.0.cmp(&b.0));
    files
}
