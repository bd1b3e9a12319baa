//! Subcommand implementations.

use crate::{CliError, CliResult, MethodArg, SynthArg, TaskArg};
use bimaug_core::contact::{label_trajectory, ContactConfig, ContactLabel, ContactMethod};
use bimaug_core::dataset::{
    augment_trajectory, merge, read_dataset_full, write_dataset_with_specs, AugmentConfig,
    AugmentReport, AugmentedStep, Trajectory,
};
use bimaug_core::sampler::PerturbationKind;
use bimaug_core::sim::{generate_dataset, SimDatasetConfig, Task};
use bimaug_core::synth::{
    loss_curve_csv, train, DenoiserConfig, DenoiserModel, DiffusionSynthesizer, NoiseSchedule,
    ReprojectionSynthesizer, Synthesizer, TrainConfig,
};
use log::info;
use std::fs;
use std::io::Write;
use std::path::Path;

fn runtime<E: std::fmt::Display>(e: E) -> CliError {
    CliError::Runtime(e.to_string())
}

fn config<E: std::fmt::Display>(e: E) -> CliError {
    CliError::Config(e.to_string())
}

/// Write-temp-then-rename, so readers never observe partial files.
fn write_atomic(path: &Path, bytes: &[u8]) -> CliResult {
    let dir = path.parent().unwrap_or_else(|| Path::new("."));
    fs::create_dir_all(dir).map_err(runtime)?;
    let tmp = dir.join(format!(
        ".{}.tmp",
        path.file_name()
            .map(|n| n.to_string_lossy())
            .unwrap_or_default()
    ));
    {
        let mut f = fs::File::create(&tmp).map_err(runtime)?;
        f.write_all(bytes).map_err(runtime)?;
        f.sync_all().map_err(runtime)?;
    }
    fs::rename(&tmp, path).map_err(runtime)?;
    Ok(())
}

pub fn gen_demos(task: TaskArg, n: usize, seed: u64, out: &Path) -> CliResult {
    let cfg = SimDatasetConfig {
        task: match task {
            TaskArg::LiftBall => Task::LiftBall,
            TaskArg::PushBlock => Task::PushBlock,
        },
        n_demos: n,
        seed,
        ..SimDatasetConfig::default()
    };
    let (_, trajectories, _) = generate_dataset(&cfg, out).map_err(runtime)?;
    println!(
        "wrote {} episodes ({} steps) to {}",
        trajectories.len(),
        trajectories.iter().map(|t| t.len()).sum::<usize>(),
        out.display()
    );
    Ok(())
}

fn episode_label_file(index: usize) -> String {
    format!("ep_{index:05}.labels")
}

pub fn label_contacts(dataset: &Path, method: MethodArg, out: &Path) -> CliResult {
    let (_, trajectories) = read_dataset_full(dataset).map_err(runtime)?;
    let has_depth = trajectories.first().map(|t| t.has_depth()).unwrap_or(false);
    let method = match method {
        MethodArg::Auto => ContactMethod::Auto,
        MethodArg::Depth => {
            if !trajectories.is_empty() && !has_depth {
                return Err(config(
                    "--method depth requires a dataset with depth images",
                ));
            }
            ContactMethod::Depth
        }
        MethodArg::Ssim => ContactMethod::Ssim,
    };

    fs::create_dir_all(out).map_err(runtime)?;
    let cfg = ContactConfig::default();
    let mut summary = String::from("# contact labeling summary\n");
    let mut failures = Vec::new();
    for (i, traj) in trajectories.iter().enumerate() {
        match label_trajectory(traj, &cfg, method) {
            Ok(label) => {
                write_atomic(&out.join(episode_label_file(i)), &label.to_bytes())?;
                write_atomic(
                    &out.join(format!("{}.txt", episode_label_file(i))),
                    label.summary_text().as_bytes(),
                )?;
                summary.push_str(&format!(
                    "episode_{i} = {{ steps = {}, onset = {} }}\n",
                    label.len(),
                    label
                        .onset_index
                        .map(|v| v.to_string())
                        .unwrap_or_else(|| "\"none\"".to_string())
                ));
            }
            Err(e) => {
                summary.push_str(&format!("episode_{i} = {{ error = \"{e}\" }}\n"));
                failures.push((i, e.to_string()));
            }
        }
    }
    write_atomic(&out.join("summary.txt"), summary.as_bytes())?;
    println!(
        "labeled {}/{} episodes; summary at {}",
        trajectories.len() - failures.len(),
        trajectories.len(),
        out.join("summary.txt").display()
    );
    if failures.is_empty() {
        Ok(())
    } else {
        Err(runtime(format!(
            "{} episode(s) failed labeling; see summary",
            failures.len()
        )))
    }
}

fn read_labels(dir: &Path, episode: usize, steps: usize) -> Result<ContactLabel, CliError> {
    let path = dir.join(episode_label_file(episode));
    let bytes =
        fs::read(&path).map_err(|e| runtime(format!("reading labels {}: {e}", path.display())))?;
    let label = ContactLabel::from_bytes(&bytes);
    if label.len() != steps {
        return Err(runtime(format!(
            "labels {} cover {} steps, episode has {steps}",
            path.display(),
            label.len()
        )));
    }
    Ok(label)
}

fn report_csv(per_episode: &[(usize, Vec<AugmentedStep>)]) -> String {
    let mut out = String::from(
        "episode,step,phase,status,reason,left_tx,left_ty,left_tz,left_angle_deg,\
         right_tx,right_ty,right_tz,right_angle_deg,cost\n",
    );
    for (episode, steps) in per_episode {
        for s in steps {
            let phase = match s.phase {
                bimaug_core::contact::ContactPhase::Contactless => "contactless",
                bimaug_core::contact::ContactPhase::ContactRich => "contact-rich",
            };
            match &s.outcome {
                bimaug_core::dataset::AugmentOutcome::Replaced(r) => {
                    let p = &r.perturbation;
                    let kind = match p.kind {
                        PerturbationKind::ContactlessRandom => "replaced",
                        PerturbationKind::ContactOptimized => "replaced",
                    };
                    out.push_str(&format!(
                        "{episode},{},{phase},{kind},,{},{},{},{},{},{},{},{},{}\n",
                        s.original_index,
                        p.left.translation.x,
                        p.left.translation.y,
                        p.left.translation.z,
                        p.left.rotation_angle().to_degrees(),
                        p.right.translation.x,
                        p.right.translation.y,
                        p.right.translation.z,
                        p.right.rotation_angle().to_degrees(),
                        p.cost.map(|c| c.to_string()).unwrap_or_default(),
                    ));
                }
                bimaug_core::dataset::AugmentOutcome::KeptOriginal { reason } => {
                    let reason = match reason {
                        bimaug_core::dataset::KeepReason::IkInvalid => "ik-invalid",
                        bimaug_core::dataset::KeepReason::SamplerInfeasible => "sampler-infeasible",
                        bimaug_core::dataset::KeepReason::SynthError => "synth-error",
                    };
                    out.push_str(&format!(
                        "{episode},{},{phase},kept,{reason},,,,,,,,,\n",
                        s.original_index
                    ));
                }
            }
        }
    }
    out
}

fn report_text(report: &AugmentReport) -> String {
    let cs = &report.constraint_stats;
    format!(
        "# augmentation report\nattempts = {}\nreplaced = {}\nkept_ik_invalid = {}\n\
         kept_sampler_infeasible = {}\nkept_synth_error = {}\n\n[constraint_rejections]\n\
         checked = {}\nmagnitude = {}\ntable_proximity = {}\neef_proximity = {}\nik = {}\n",
        report.attempts,
        report.replaced,
        report.kept_ik_invalid,
        report.kept_sampler_infeasible,
        report.kept_synth_error,
        cs.checked,
        cs.rejected_magnitude,
        cs.rejected_table,
        cs.rejected_eef,
        cs.rejected_ik,
    )
}

#[allow(clippy::too_many_arguments)]
pub fn augment(
    dataset: &Path,
    labels: &Path,
    config_path: Option<&Path>,
    synth: SynthArg,
    model: Option<&Path>,
    k_override: Option<usize>,
    seed: u64,
    out: &Path,
) -> CliResult {
    let mut cfg: AugmentConfig = match config_path {
        Some(p) => {
            let text = fs::read_to_string(p)
                .map_err(|e| config(format!("reading {}: {e}", p.display())))?;
            toml::from_str(&text).map_err(|e| config(format!("parsing {}: {e}", p.display())))?
        }
        None => AugmentConfig::default(),
    };
    // Flags override config-file values.
    if let Some(k) = k_override {
        cfg.k = k;
    }
    if seed != 0 {
        cfg.run_seed = seed;
    }
    cfg.validate().map_err(config)?;

    let synthesizer: Box<dyn Synthesizer + Sync> = match synth {
        SynthArg::Reproject => Box::new(ReprojectionSynthesizer::default()),
        SynthArg::Diffusion => {
            let path = model.ok_or_else(|| config("--synth diffusion requires --model"))?;
            Box::new(DiffusionSynthesizer {
                model: DenoiserModel::load(path).map_err(runtime)?,
            })
        }
    };

    let (specs, originals) = read_dataset_full(dataset).map_err(runtime)?;
    let mut augmented: Vec<Trajectory> = Vec::with_capacity(originals.len());
    let mut per_episode = Vec::with_capacity(originals.len());
    let mut total = AugmentReport::default();
    for (i, traj) in originals.iter().enumerate() {
        let label = read_labels(labels, i, traj.len())?;
        let (aug, steps, report) =
            augment_trajectory(traj, &label, &cfg, synthesizer.as_ref(), i as u64)
                .map_err(runtime)?;
        info!(
            "episode {i}: replaced {}/{} attempts",
            report.replaced, report.attempts
        );
        total.merge(&report);
        per_episode.push((i, steps));
        augmented.push(aug);
    }

    let merged = merge(&originals, &augmented).map_err(runtime)?;
    write_dataset_with_specs(&specs, &augmented, &out.join("augmented")).map_err(runtime)?;
    write_dataset_with_specs(&specs, &merged, &out.join("merged")).map_err(runtime)?;
    write_atomic(&out.join("report.csv"), report_csv(&per_episode).as_bytes())?;
    write_atomic(&out.join("report.txt"), report_text(&total).as_bytes())?;
    println!(
        "augmented {} episodes: {} replaced, {} kept; outputs in {}",
        originals.len(),
        total.replaced,
        total.kept_total(),
        out.display()
    );
    Ok(())
}

#[allow(clippy::too_many_arguments)]
pub fn train_denoiser(
    dataset: &Path,
    out: &Path,
    steps: usize,
    learning_rate: f64,
    batch_size: usize,
    gap_min: usize,
    gap_max: usize,
    seed: u64,
    loss_out: Option<&Path>,
) -> CliResult {
    if gap_min == 0 || gap_min > gap_max {
        return Err(config(format!(
            "gap range [{gap_min}, {gap_max}] must satisfy 1 <= gap_min <= gap_max"
        )));
    }
    let (_, trajectories) = read_dataset_full(dataset).map_err(runtime)?;
    let mut model = DenoiserModel::new(
        DenoiserConfig {
            init_seed: seed,
            ..DenoiserConfig::default()
        },
        NoiseSchedule::default(),
    );
    let cfg = TrainConfig {
        steps,
        learning_rate,
        batch_size,
        gap_min,
        gap_max,
        seed,
        ..TrainConfig::default()
    };
    let curve = train(&mut model, &trajectories, &cfg).map_err(runtime)?;
    model.save(out).map_err(runtime)?;
    if let Some(p) = loss_out {
        write_atomic(p, loss_curve_csv(&curve).as_bytes())?;
    }
    let head: f64 = curve.iter().take(20).sum::<f64>() / 20.0f64.min(curve.len() as f64);
    let tail: f64 = curve.iter().rev().take(20).sum::<f64>() / 20.0f64.min(curve.len() as f64);
    println!(
        "trained {} steps: loss {head:.3} -> {tail:.3}; model at {}",
        curve.len(),
        out.display()
    );
    Ok(())
}

pub fn validate(dataset: &Path) -> CliResult {
    let (_, trajectories) = read_dataset_full(dataset).map_err(runtime)?;
    let mut violations = Vec::new();
    for (i, traj) in trajectories.iter().enumerate() {
        for v in traj.violations() {
            violations.push(format!("violation,episode_{i},{v}"));
        }
    }
    if violations.is_empty() {
        println!("ok: {} episodes pass all checks", trajectories.len());
        Ok(())
    } else {
        for v in &violations {
            println!("{v}");
        }
        Err(runtime(format!(
            "{} invariant violation(s)",
            violations.len()
        )))
    }
}

pub fn stats(
    dataset: &Path,
    labels: Option<&Path>,
    report: Option<&Path>,
    out: Option<&Path>,
) -> CliResult {
    let (_, trajectories) = read_dataset_full(dataset).map_err(runtime)?;
    let mut csv = String::from("metric,key,value\n");
    csv.push_str(&format!("episodes,,{}\n", trajectories.len()));
    csv.push_str(&format!(
        "steps,total,{}\n",
        trajectories.iter().map(|t| t.len()).sum::<usize>()
    ));

    if let Some(labels_dir) = labels {
        for (i, traj) in trajectories.iter().enumerate() {
            let label = read_labels(labels_dir, i, traj.len())?;
            for (phase, start, len) in label.runs() {
                let name = match phase {
                    bimaug_core::contact::ContactPhase::Contactless => "contactless",
                    bimaug_core::contact::ContactPhase::ContactRich => "contact-rich",
                };
                csv.push_str(&format!("phase_run,episode_{i}:{name}@{start},{len}\n"));
            }
            csv.push_str(&format!(
                "contact_onset,episode_{i},{}\n",
                label
                    .onset_index
                    .map(|v| v.to_string())
                    .unwrap_or_else(|| "none".to_string())
            ));
        }
    }

    if let Some(report_path) = report {
        let text = fs::read_to_string(report_path)
            .map_err(|e| runtime(format!("reading {}: {e}", report_path.display())))?;
        let mut attempts = 0usize;
        let mut replaced = 0usize;
        let mut magnitudes = Vec::new();
        for line in text.lines().skip(1) {
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() < 14 {
                continue;
            }
            attempts += 1;
            if fields[3] == "replaced" {
                replaced += 1;
                let (tx, ty, tz) = (
                    fields[5].parse::<f64>().unwrap_or(0.0),
                    fields[6].parse::<f64>().unwrap_or(0.0),
                    fields[7].parse::<f64>().unwrap_or(0.0),
                );
                magnitudes.push((tx * tx + ty * ty + tz * tz).sqrt());
            }
        }
        if attempts > 0 {
            csv.push_str(&format!("replacement_attempts,,{attempts}\n"));
            csv.push_str(&format!(
                "replacement_rate,,{}\n",
                replaced as f64 / attempts as f64
            ));
        }
        // 1 mm histogram bins over the perturbation magnitudes.
        let mut bins = std::collections::BTreeMap::new();
        for m in &magnitudes {
            *bins.entry((m * 1000.0).floor() as i64).or_insert(0usize) += 1;
        }
        for (bin, count) in bins {
            csv.push_str(&format!(
                "perturb_magnitude_hist,{:.3}-{:.3},{count}\n",
                bin as f64 / 1000.0,
                (bin + 1) as f64 / 1000.0
            ));
        }
    }

    match out {
        Some(p) => write_atomic(p, csv.as_bytes())?,
        None => print!("{csv}"),
    }
    Ok(())
}
