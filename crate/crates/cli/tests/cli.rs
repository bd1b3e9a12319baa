//! End-to-end runs of the `bimaug` binary: exit-code contract, determinism,
//! and the main pipeline wiring.

use std::path::Path;
use std::process::{Command, Output};

fn bimaug(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bimaug"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn assert_code(out: &Output, code: i32) {
    assert_eq!(
        out.status.code(),
        Some(code),
        "stdout: {}\nstderr: {}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
}

fn read_dir_bytes(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut entries: Vec<(String, Vec<u8>)> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (
                e.file_name().to_string_lossy().to_string(),
                std::fs::read(e.path()).unwrap(),
            )
        })
        .collect();
    entries.sort();
    entries
}

#[test]
fn pipeline_runs_and_is_reproducible() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    let labels = tmp.path().join("labels");

    let out = bimaug(&[
        "gen-demos",
        "--task",
        "lift-ball",
        "--n",
        "2",
        "--seed",
        "7",
        "--out",
        data.to_str().unwrap(),
    ]);
    assert_code(&out, 0);
    assert!(data.join("manifest.json").is_file());

    let out = bimaug(&[
        "label-contacts",
        "--dataset",
        data.to_str().unwrap(),
        "--out",
        labels.to_str().unwrap(),
    ]);
    assert_code(&out, 0);
    assert!(labels.join("ep_00000.labels").is_file());
    assert!(labels.join("summary.txt").is_file());

    // Same seed, different worker counts: byte-identical outputs.
    let aug_a = tmp.path().join("aug_a");
    let aug_b = tmp.path().join("aug_b");
    for (dir, workers) in [(&aug_a, "1"), (&aug_b, "4")] {
        let out = bimaug(&[
            "augment",
            "--dataset",
            data.to_str().unwrap(),
            "--labels",
            labels.to_str().unwrap(),
            "--out",
            dir.to_str().unwrap(),
            "--seed",
            "11",
            "--workers",
            workers,
        ]);
        assert_code(&out, 0);
    }
    for sub in ["augmented", "merged"] {
        assert_eq!(
            read_dir_bytes(&aug_a.join(sub)),
            read_dir_bytes(&aug_b.join(sub)),
            "{sub} differs across worker counts"
        );
    }
    assert_eq!(
        std::fs::read(aug_a.join("report.csv")).unwrap(),
        std::fs::read(aug_b.join("report.csv")).unwrap()
    );

    let out = bimaug(&[
        "validate",
        "--dataset",
        aug_a.join("merged").to_str().unwrap(),
    ]);
    assert_code(&out, 0);

    let stats_file = tmp.path().join("stats.csv");
    let out = bimaug(&[
        "stats",
        "--dataset",
        data.to_str().unwrap(),
        "--labels",
        labels.to_str().unwrap(),
        "--report",
        aug_a.join("report.csv").to_str().unwrap(),
        "--out",
        stats_file.to_str().unwrap(),
    ]);
    assert_code(&out, 0);
    let stats = std::fs::read_to_string(&stats_file).unwrap();
    assert!(stats.starts_with("metric,key,value"));
    assert!(stats.contains("replacement_rate"));
    assert!(stats.contains("perturb_magnitude_hist"));
}

#[test]
fn unknown_task_and_flags_exit_two() {
    let tmp = tempfile::tempdir().unwrap();
    let out = bimaug(&[
        "gen-demos",
        "--task",
        "unknown",
        "--n",
        "1",
        "--out",
        tmp.path().to_str().unwrap(),
    ]);
    assert_code(&out, 2);
    let out = bimaug(&["gen-demos", "--task", "lift-ball", "--bogus-flag"]);
    assert_code(&out, 2);
}

#[test]
fn zero_episodes_is_a_valid_empty_dataset() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("empty");
    let out = bimaug(&[
        "gen-demos",
        "--task",
        "lift-ball",
        "--n",
        "0",
        "--out",
        data.to_str().unwrap(),
    ]);
    assert_code(&out, 0);
    // Stats on the empty dataset succeed with a bare header.
    let out = bimaug(&["stats", "--dataset", data.to_str().unwrap()]);
    assert_code(&out, 0);
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("episodes,,0"));
    // Labeling an empty dataset succeeds with an empty summary.
    let labels = tmp.path().join("labels");
    let out = bimaug(&[
        "label-contacts",
        "--dataset",
        data.to_str().unwrap(),
        "--out",
        labels.to_str().unwrap(),
    ]);
    assert_code(&out, 0);
}

#[test]
fn missing_dataset_exits_three() {
    let tmp = tempfile::tempdir().unwrap();
    let out = bimaug(&[
        "validate",
        "--dataset",
        tmp.path().join("nope").to_str().unwrap(),
    ]);
    assert_code(&out, 3);
}

#[test]
fn corrupted_episode_fails_validation_naming_the_frame() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    let out = bimaug(&[
        "gen-demos",
        "--task",
        "push-block",
        "--n",
        "1",
        "--seed",
        "3",
        "--out",
        data.to_str().unwrap(),
    ]);
    assert_code(&out, 0);
    let ep = data.join("ep_00000.bmag");
    let mut bytes = std::fs::read(&ep).unwrap();
    let len = bytes.len();
    bytes.truncate(len - 100);
    std::fs::write(&ep, bytes).unwrap();
    let out = bimaug(&["validate", "--dataset", data.to_str().unwrap()]);
    assert_code(&out, 3);
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("corrupt frame"), "stderr: {err}");
    assert!(err.contains("ep_00000"), "stderr: {err}");
}

#[test]
fn depth_method_on_depthless_dataset_exits_two() {
    // Build a depthless dataset by stripping depth through the library, then
    // ask for the depth path explicitly.
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    let out = bimaug(&[
        "gen-demos",
        "--task",
        "lift-ball",
        "--n",
        "1",
        "--seed",
        "5",
        "--out",
        data.to_str().unwrap(),
    ]);
    assert_code(&out, 0);

    let (mut specs, mut trajs) = bimaug_core::dataset::read_dataset_full(&data).unwrap();
    specs.has_depth = false;
    for t in trajs.iter_mut() {
        for s in t.steps.iter_mut() {
            s.left.depth = None;
            s.right.depth = None;
        }
    }
    let depthless = tmp.path().join("depthless");
    bimaug_core::dataset::write_dataset_with_specs(&specs, &trajs, &depthless).unwrap();

    let labels = tmp.path().join("labels");
    let out = bimaug(&[
        "label-contacts",
        "--dataset",
        depthless.to_str().unwrap(),
        "--method",
        "depth",
        "--out",
        labels.to_str().unwrap(),
    ]);
    assert_code(&out, 2);

    // Auto falls back to the SSIM path and succeeds.
    let out = bimaug(&[
        "label-contacts",
        "--dataset",
        depthless.to_str().unwrap(),
        "--method",
        "auto",
        "--out",
        labels.to_str().unwrap(),
    ]);
    assert_code(&out, 0);
}

#[test]
fn train_denoiser_writes_model_and_loss_curve() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    let out = bimaug(&[
        "gen-demos",
        "--task",
        "lift-ball",
        "--n",
        "2",
        "--seed",
        "9",
        "--out",
        data.to_str().unwrap(),
    ]);
    assert_code(&out, 0);
    let model = tmp.path().join("model.bmdl");
    let curve = tmp.path().join("loss.csv");
    let out = bimaug(&[
        "train-denoiser",
        "--dataset",
        data.to_str().unwrap(),
        "--out",
        model.to_str().unwrap(),
        "--steps",
        "10",
        "--gap-min",
        "1",
        "--gap-max",
        "3",
        "--loss-out",
        curve.to_str().unwrap(),
        "--seed",
        "2",
    ]);
    assert_code(&out, 0);
    assert!(model.is_file());
    let text = std::fs::read_to_string(&curve).unwrap();
    assert!(text.starts_with("step,loss"));
    assert_eq!(text.lines().count(), 11);

    // The trained model drives the diffusion synthesis backend.
    let labels = tmp.path().join("labels");
    assert_code(
        &bimaug(&[
            "label-contacts",
            "--dataset",
            data.to_str().unwrap(),
            "--out",
            labels.to_str().unwrap(),
        ]),
        0,
    );
    let aug = tmp.path().join("aug");
    let out = bimaug(&[
        "augment",
        "--dataset",
        data.to_str().unwrap(),
        "--labels",
        labels.to_str().unwrap(),
        "--synth",
        "diffusion",
        "--model",
        model.to_str().unwrap(),
        "--out",
        aug.to_str().unwrap(),
        "--seed",
        "4",
    ]);
    assert_code(&out, 0);
    assert!(aug.join("merged/manifest.json").is_file());

    // Diffusion without a model is a config error.
    let out = bimaug(&[
        "augment",
        "--dataset",
        data.to_str().unwrap(),
        "--labels",
        labels.to_str().unwrap(),
        "--synth",
        "diffusion",
        "--out",
        tmp.path().join("aug2").to_str().unwrap(),
    ]);
    assert_code(&out, 2);
}

#[test]
fn augment_config_file_applies_and_flags_override() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    assert_code(
        &bimaug(&[
            "gen-demos",
            "--task",
            "lift-ball",
            "--n",
            "1",
            "--seed",
            "13",
            "--out",
            data.to_str().unwrap(),
        ]),
        0,
    );
    let labels = tmp.path().join("labels");
    assert_code(
        &bimaug(&[
            "label-contacts",
            "--dataset",
            data.to_str().unwrap(),
            "--out",
            labels.to_str().unwrap(),
        ]),
        0,
    );

    // An unsatisfiable clearance from the config file: everything kept.
    let cfg = tmp.path().join("augment.toml");
    std::fs::write(
        &cfg,
        "k = 6\nrun_seed = 3\n\n[constraints]\nd_eff = 10.0\n\n[anneal]\nmax_iter = 10\n",
    )
    .unwrap();
    let aug = tmp.path().join("aug");
    assert_code(
        &bimaug(&[
            "augment",
            "--dataset",
            data.to_str().unwrap(),
            "--labels",
            labels.to_str().unwrap(),
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            aug.to_str().unwrap(),
        ]),
        0,
    );
    let report = std::fs::read_to_string(aug.join("report.txt")).unwrap();
    // Contact-rich attempts are all sampler-infeasible under d_eff = 10 m.
    assert!(report.contains("kept_sampler_infeasible"), "{report}");
    let csv = std::fs::read_to_string(aug.join("report.csv")).unwrap();
    assert!(csv.contains("sampler-infeasible"), "{csv}");

    // --k overrides the config file.
    let aug2 = tmp.path().join("aug2");
    assert_code(
        &bimaug(&[
            "augment",
            "--dataset",
            data.to_str().unwrap(),
            "--labels",
            labels.to_str().unwrap(),
            "--config",
            cfg.to_str().unwrap(),
            "--k",
            "30",
            "--out",
            aug2.to_str().unwrap(),
        ]),
        0,
    );
    let report = std::fs::read_to_string(aug2.join("report.txt")).unwrap();
    assert!(report.contains("attempts = 2"), "{report}");

    // An invalid config file value is a config error.
    std::fs::write(&cfg, "k = 0\n").unwrap();
    assert_code(
        &bimaug(&[
            "augment",
            "--dataset",
            data.to_str().unwrap(),
            "--labels",
            labels.to_str().unwrap(),
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            tmp.path().join("aug3").to_str().unwrap(),
        ]),
        2,
    );
}
