//! CLI behavior: documented flags, the exit-code contract, and the
//! per-command wire formats.

mod common;

use std::fs;

use common::*;

#[test]
fn top_level_help_lists_subcommands() {
    let out = run(&["--help"]);
    assert_eq!(exit_code(&out), 0);
    let text = stdout_str(&out);
    for sub in ["fit-colors", "render", "generate", "score", "stats", "kappa"] {
        assert!(text.contains(sub), "--help missing {sub}");
    }
}

#[test]
fn subcommand_help_documents_every_flag() {
    let expectations: &[(&str, &[&str])] = &[
        ("fit-colors", &["--images", "--out", "--cap"]),
        (
            "render",
            &[
                "--ink", "--colors", "--out", "--id", "--seed", "--width-mode", "--m-min",
                "--m-max", "--pad", "--flat-color", "--config", "HWFORGE_SEED",
            ],
        ),
        (
            "generate",
            &[
                "--ink", "--colors", "--out-dir", "--jobs", "--split", "--png", "--seed",
                "--width-mode", "--m-min", "--m-max", "--pad", "--flat-color", "--config",
                "HWFORGE_SEED",
            ],
        ),
        ("score", &["--refs", "--hyps", "--pairs"]),
        ("stats", &["--manifest", "--class"]),
        ("kappa", &["--a", "--b"]),
    ];
    for (sub, flags) in expectations {
        let out = run(&[sub, "--help"]);
        assert_eq!(exit_code(&out), 0, "{sub} --help");
        let text = stdout_str(&out);
        for flag in *flags {
            assert!(text.contains(flag), "{sub} --help missing {flag}");
        }
    }
}

#[test]
fn unknown_flag_is_usage_error() {
    let out = run(&["generate", "--bogus"]);
    assert_eq!(exit_code(&out), 1);
}

#[test]
fn missing_required_flag_is_usage_error() {
    // Omits --colors entirely.
    let out = run(&["generate", "--ink", "x.jsonl", "--out-dir", "d"]);
    assert_eq!(exit_code(&out), 1);
}

#[test]
fn refs_without_hyps_is_usage_error() {
    let out = run(&["score", "--refs", "r.txt"]);
    assert_eq!(exit_code(&out), 1);
}

#[test]
fn refs_conflicts_with_pairs() {
    let out = run(&["score", "--refs", "r", "--hyps", "h", "--pairs", "p"]);
    assert_eq!(exit_code(&out), 1);
}

#[test]
fn score_without_inputs_is_usage_error() {
    let out = run(&["score"]);
    assert_eq!(exit_code(&out), 1);
}

#[test]
fn missing_data_file_is_data_error() {
    let dir = tempfile::tempdir().unwrap();
    let colors = write_colors(dir.path());
    let out = run(&[
        "generate",
        "--ink",
        dir.path().join("absent.jsonl").to_str().unwrap(),
        "--colors",
        colors.to_str().unwrap(),
        "--out-dir",
        dir.path().join("out").to_str().unwrap(),
    ]);
    assert_eq!(exit_code(&out), 2);
}

#[test]
fn generate_partial_failure_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let colors = write_colors(dir.path());
    // Second record cannot fit the 60x60 pad target.
    let ink = format!(
        "{}\n{}\n",
        ink_record("small", "a", &[vec![(0.0, 0.0), (5.0, 5.0)]]),
        ink_record("large", "b", &[vec![(0.0, 0.0), (150.0, 40.0)]]),
    );
    let ink_path = dir.path().join("ink.jsonl");
    fs::write(&ink_path, ink).unwrap();
    let out_dir = dir.path().join("out");
    let out = run(&[
        "generate",
        "--ink",
        ink_path.to_str().unwrap(),
        "--colors",
        colors.to_str().unwrap(),
        "--out-dir",
        out_dir.to_str().unwrap(),
        "--pad",
        "60x60",
        "--seed",
        "5",
    ]);
    assert_eq!(exit_code(&out), 3, "stderr: {}", stderr_str(&out));
    assert!(stderr_str(&out).contains("large"));
    // The good record still landed.
    assert!(out_dir.join("images/small.pgm").exists());
    assert!(!out_dir.join("images/large.pgm").exists());
}

#[test]
fn score_identical_files_is_zero() {
    let dir = tempfile::tempdir().unwrap();
    let refs = dir.path().join("refs.txt");
    let hyps = dir.path().join("hyps.txt");
    fs::write(&refs, "xin chào\nạ\n").unwrap();
    fs::write(&hyps, "xin chào\nạ\n").unwrap();
    let out = run(&["score", "--refs", refs.to_str().unwrap(), "--hyps", hyps.to_str().unwrap()]);
    assert_eq!(exit_code(&out), 0);
    let report: serde_json::Value = serde_json::from_str(&stdout_str(&out)).unwrap();
    assert_eq!(report["cer"], 0.0);
    assert_eq!(report["wer"], 0.0);
    assert_eq!(report["pair_count"], 2);
}

#[test]
fn score_matches_library_oracle() {
    let dir = tempfile::tempdir().unwrap();
    let refs = dir.path().join("refs.txt");
    let hyps = dir.path().join("hyps.txt");
    fs::write(&refs, "xin chào\nab\n").unwrap();
    fs::write(&hyps, "xin chao\nba\n").unwrap();
    let out = run(&["score", "--refs", refs.to_str().unwrap(), "--hyps", hyps.to_str().unwrap()]);
    assert_eq!(exit_code(&out), 0);
    let report: serde_json::Value = serde_json::from_str(&stdout_str(&out)).unwrap();

    let pairs = vec![
        hwforge::metrics::EvalPair::new("1", "xin chào", "xin chao"),
        hwforge::metrics::EvalPair::new("2", "ab", "ba"),
    ];
    let expected = hwforge::metrics::corpus_score(&pairs).unwrap();
    assert_eq!(report["cer"].as_f64().unwrap(), expected.cer);
    assert_eq!(report["wer"].as_f64().unwrap(), expected.wer);
    assert_eq!(report["char_edits"].as_u64().unwrap() as usize, expected.char_edits);
}

#[test]
fn score_line_count_mismatch_names_counts() {
    let dir = tempfile::tempdir().unwrap();
    let refs = dir.path().join("refs.txt");
    let hyps = dir.path().join("hyps.txt");
    fs::write(&refs, "a\nb\n").unwrap();
    fs::write(&hyps, "a\nb\nc\n").unwrap();
    let out = run(&["score", "--refs", refs.to_str().unwrap(), "--hyps", hyps.to_str().unwrap()]);
    assert_eq!(exit_code(&out), 2);
    let err = stderr_str(&out);
    assert!(err.contains('2') && err.contains('3'), "{err}");
}

#[test]
fn score_accepts_paired_file() {
    let dir = tempfile::tempdir().unwrap();
    let pairs = dir.path().join("pairs.jsonl");
    fs::write(
        &pairs,
        "{\"id\":\"p1\",\"reference\":\"ab\",\"hypothesis\":\"ba\"}\n",
    )
    .unwrap();
    let out = run(&["score", "--pairs", pairs.to_str().unwrap()]);
    assert_eq!(exit_code(&out), 0);
    let report: serde_json::Value = serde_json::from_str(&stdout_str(&out)).unwrap();
    assert_eq!(report["cer"], 0.5);
}

#[test]
fn stats_hand_count() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = dir.path().join("manifest.jsonl");
    let row = |id: &str, t: &str| {
        format!(
            "{{\"id\":\"{id}\",\"image_path\":\"x.pgm\",\"transcript\":\"{t}\",\"level\":\"word\",\"seed\":1,\"m_value\":2.0,\"dist_index\":0,\"width_mode\":\"constant\"}}"
        )
    };
    fs::write(&manifest, format!("{}\n{}\n", row("a", "ab12"), row("b", "cd"))).unwrap();
    let out = run(&["stats", "--manifest", manifest.to_str().unwrap()]);
    assert_eq!(exit_code(&out), 0);
    let freq: serde_json::Value = serde_json::from_str(&stdout_str(&out)).unwrap();
    let numeric = freq["numeric"].as_f64().unwrap();
    assert!((numeric - 1.0 / 3.0).abs() < 1e-9, "{numeric}");

    let out = run(&["stats", "--manifest", manifest.to_str().unwrap(), "--class", "all"]);
    let freq: serde_json::Value = serde_json::from_str(&stdout_str(&out)).unwrap();
    assert!((freq["a"].as_f64().unwrap() - 1.0 / 6.0).abs() < 1e-9);
}

#[test]
fn kappa_identical_and_hand_case() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.txt");
    let b = dir.path().join("b.txt");
    fs::write(&a, "1\n0\n1\n").unwrap();
    fs::write(&b, "1\n0\n1\n").unwrap();
    let out = run(&["kappa", "--a", a.to_str().unwrap(), "--b", b.to_str().unwrap()]);
    assert_eq!(exit_code(&out), 0);
    let v: serde_json::Value = serde_json::from_str(&stdout_str(&out)).unwrap();
    assert_eq!(v["kappa"], 1.0);

    fs::write(&a, "1\n1\n0\n0\n").unwrap();
    fs::write(&b, "1\n0\n1\n0\n").unwrap();
    let out = run(&["kappa", "--a", a.to_str().unwrap(), "--b", b.to_str().unwrap()]);
    let v: serde_json::Value = serde_json::from_str(&stdout_str(&out)).unwrap();
    assert_eq!(v["kappa"], 0.0);

    fs::write(&b, "1\n0\n").unwrap();
    let out = run(&["kappa", "--a", a.to_str().unwrap(), "--b", b.to_str().unwrap()]);
    assert_eq!(exit_code(&out), 2);
}

#[test]
fn fit_colors_two_subsets_and_rerun_identical() {
    let dir = tempfile::tempdir().unwrap();
    for (i, subset) in ["forms-a", "forms-b"].iter().enumerate() {
        let sub = dir.path().join("refs").join(subset);
        fs::create_dir_all(&sub).unwrap();
        for j in 0..2u64 {
            write_reference_pgm(&sub.join(format!("img{j}.pgm")), i as u64 * 10 + j, 24, 24);
        }
    }
    let model_path = dir.path().join("model.json");
    let refs = dir.path().join("refs");
    let out = run(&[
        "fit-colors",
        "--images",
        refs.to_str().unwrap(),
        "--out",
        model_path.to_str().unwrap(),
    ]);
    assert_eq!(exit_code(&out), 0, "stderr: {}", stderr_str(&out));
    let first = fs::read(&model_path).unwrap();
    let model: serde_json::Value = serde_json::from_slice(&first).unwrap();
    assert_eq!(model["subsets"], serde_json::json!(["forms-a", "forms-b"]));
    assert_eq!(model["stroke"].as_array().unwrap().len(), 2);
    assert_eq!(model["background"].as_array().unwrap().len(), 2);

    // Rerun: byte-identical output.
    let out = run(&[
        "fit-colors",
        "--images",
        refs.to_str().unwrap(),
        "--out",
        model_path.to_str().unwrap(),
    ]);
    assert_eq!(exit_code(&out), 0);
    assert_eq!(fs::read(&model_path).unwrap(), first);
}

#[test]
fn fit_colors_skips_flat_image_with_warning() {
    let dir = tempfile::tempdir().unwrap();
    let sub = dir.path().join("refs").join("only");
    fs::create_dir_all(&sub).unwrap();
    write_reference_pgm(&sub.join("good.pgm"), 3, 24, 24);
    // A flat image: every pixel identical.
    let mut flat = b"P5\n4 4\n255\n".to_vec();
    flat.extend([128u8; 16]);
    fs::write(sub.join("flat.pgm"), flat).unwrap();

    let model_path = dir.path().join("model.json");
    let out = run(&[
        "fit-colors",
        "--images",
        dir.path().join("refs").to_str().unwrap(),
        "--out",
        model_path.to_str().unwrap(),
    ]);
    assert_eq!(exit_code(&out), 0, "stderr: {}", stderr_str(&out));
    assert!(stderr_str(&out).contains("flat.pgm"));
    assert!(model_path.exists());
}

#[test]
fn fit_colors_all_subsets_failing_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let sub = dir.path().join("refs").join("only");
    fs::create_dir_all(&sub).unwrap();
    let mut flat = b"P5\n4 4\n255\n".to_vec();
    flat.extend([128u8; 16]);
    fs::write(sub.join("flat.pgm"), flat).unwrap();
    let out = run(&[
        "fit-colors",
        "--images",
        dir.path().join("refs").to_str().unwrap(),
        "--out",
        dir.path().join("model.json").to_str().unwrap(),
    ]);
    assert_eq!(exit_code(&out), 2);
}

#[test]
fn render_is_reproducible_and_reports_record() {
    let dir = tempfile::tempdir().unwrap();
    let colors = write_colors(dir.path());
    let ink_path = dir.path().join("ink.jsonl");
    fs::write(
        &ink_path,
        format!(
            "{}\n",
            ink_record("w9", "chào", &[vec![(0.0, 0.0), (20.0, 8.0), (33.0, 4.0)]])
        ),
    )
    .unwrap();

    let mut outputs = Vec::new();
    for name in ["a.pgm", "b.pgm"] {
        let out_path = dir.path().join(name);
        let out = run(&[
            "render",
            "--ink",
            ink_path.to_str().unwrap(),
            "--colors",
            colors.to_str().unwrap(),
            "--out",
            out_path.to_str().unwrap(),
            "--seed",
            "31",
        ]);
        assert_eq!(exit_code(&out), 0, "stderr: {}", stderr_str(&out));
        let record: serde_json::Value = serde_json::from_str(&stdout_str(&out)).unwrap();
        assert_eq!(record["id"], "w9");
        assert!(record["dist_index"].as_u64().unwrap() < 2);
        outputs.push(fs::read(&out_path).unwrap());
    }
    assert_eq!(outputs[0], outputs[1]);
    assert!(outputs[0].starts_with(b"P5\n"));
}

#[test]
fn render_png_output() {
    let dir = tempfile::tempdir().unwrap();
    let colors = write_colors(dir.path());
    let ink_path = dir.path().join("ink.jsonl");
    fs::write(
        &ink_path,
        format!("{}\n", ink_record("p", "a", &[vec![(0.0, 0.0), (9.0, 9.0)]])),
    )
    .unwrap();
    let out_path = dir.path().join("img.png");
    let out = run(&[
        "render",
        "--ink",
        ink_path.to_str().unwrap(),
        "--colors",
        colors.to_str().unwrap(),
        "--out",
        out_path.to_str().unwrap(),
    ]);
    assert_eq!(exit_code(&out), 0, "stderr: {}", stderr_str(&out));
    let bytes = fs::read(&out_path).unwrap();
    assert!(bytes.starts_with(&[0x89, b'P', b'N', b'G']));
}

#[test]
fn seed_env_fallback_matches_flag() {
    let dir = tempfile::tempdir().unwrap();
    let colors = write_colors(dir.path());
    let ink_path = dir.path().join("ink.jsonl");
    fs::write(&ink_path, make_corpus(3, 1, 40.0, 18.0)).unwrap();

    let flag_dir = dir.path().join("by-flag");
    let out = run(&[
        "generate",
        "--ink",
        ink_path.to_str().unwrap(),
        "--colors",
        colors.to_str().unwrap(),
        "--out-dir",
        flag_dir.to_str().unwrap(),
        "--seed",
        "77",
    ]);
    assert_eq!(exit_code(&out), 0, "stderr: {}", stderr_str(&out));

    let env_dir = dir.path().join("by-env");
    let out = std::process::Command::new(bin())
        .args([
            "generate",
            "--ink",
            ink_path.to_str().unwrap(),
            "--colors",
            colors.to_str().unwrap(),
            "--out-dir",
            env_dir.to_str().unwrap(),
        ])
        .env("HWFORGE_SEED", "77")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(snapshot_tree(&flag_dir), snapshot_tree(&env_dir));
}

#[test]
fn config_file_applies_and_flags_override() {
    let dir = tempfile::tempdir().unwrap();
    let colors = write_colors(dir.path());
    let ink_path = dir.path().join("ink.jsonl");
    fs::write(
        &ink_path,
        format!("{}\n", ink_record("c", "a", &[vec![(0.0, 0.0), (10.0, 5.0)]])),
    )
    .unwrap();
    let config_path = dir.path().join("config.json");
    fs::write(
        &config_path,
        r#"{"master_seed": 9, "pad_to": [50, 50], "width_model": {"mode": "variable"}}"#,
    )
    .unwrap();

    // Config alone: image padded to 50x50.
    let out_a = dir.path().join("a.pgm");
    let out = run(&[
        "render",
        "--ink",
        ink_path.to_str().unwrap(),
        "--colors",
        colors.to_str().unwrap(),
        "--out",
        out_a.to_str().unwrap(),
        "--config",
        config_path.to_str().unwrap(),
    ]);
    assert_eq!(exit_code(&out), 0, "stderr: {}", stderr_str(&out));
    assert!(fs::read(&out_a).unwrap().starts_with(b"P5\n50 50\n"));
    let record: serde_json::Value = serde_json::from_str(&stdout_str(&out)).unwrap();
    assert_eq!(record["width_mode"], "variable");

    // --pad flag overrides the config's pad_to.
    let out_b = dir.path().join("b.pgm");
    let out = run(&[
        "render",
        "--ink",
        ink_path.to_str().unwrap(),
        "--colors",
        colors.to_str().unwrap(),
        "--out",
        out_b.to_str().unwrap(),
        "--config",
        config_path.to_str().unwrap(),
        "--pad",
        "64x60",
    ]);
    assert_eq!(exit_code(&out), 0);
    assert!(fs::read(&out_b).unwrap().starts_with(b"P5\n64 60\n"));
}

#[test]
fn generate_split_tag_lands_in_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let colors = write_colors(dir.path());
    let ink_path = dir.path().join("ink.jsonl");
    fs::write(&ink_path, make_corpus(2, 2, 30.0, 15.0)).unwrap();
    let out_dir = dir.path().join("out");
    let out = run(&[
        "generate",
        "--ink",
        ink_path.to_str().unwrap(),
        "--colors",
        colors.to_str().unwrap(),
        "--out-dir",
        out_dir.to_str().unwrap(),
        "--split",
        "train",
    ]);
    assert_eq!(exit_code(&out), 0, "stderr: {}", stderr_str(&out));
    let manifest = fs::read_to_string(out_dir.join("manifest.jsonl")).unwrap();
    for line in manifest.lines() {
        let row: serde_json::Value = serde_json::from_str(line).unwrap();
        assert_eq!(row["split"], "train");
    }
}
