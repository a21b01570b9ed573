//! End-to-end acceptance checks for the desk-scale laboratory, one
//! criterion per numbered block. Each criterion prints a single PASS/FAIL
//! line on stderr (bypassing libtest capture) and the test fails at the end
//! if any criterion failed.
//!
//! Tolerances are pinned as constants next to the criteria that use them.

use std::io::Write as _;
use std::process::Command;
use std::time::Instant;

use ndarray::{Array1, Array4};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use pulselab::attack::{c_mi_fgsm, make_target, AttackConfig, Constraints};
use pulselab::estimators::{
    micro_backward, micro_forward, pearson_loss, MicroNetParams, PulseEstimator,
};
use pulselab::eval::{mae, mask_success_rate, rmse, success_rate, MetricReport};
use pulselab::harness::{run_full_evaluation, DeskConfig, EvaluationOutputs};
use pulselab::pipeline::{extract_heart_rate, sliding_predict, PipelineConfig};
use pulselab::signal::{HeartRateSeries, Perturbation, VideoClip, Waveform};

/// Criterion 1: gradient tolerances and runtime bound.
const GRAD_REL_TOL: f64 = 1e-3;
const GRAD_ABS_FLOOR: f64 = 1e-8;
const PEARSON_REL_TOL: f64 = 1e-4;
const GRAD_RUNTIME_S: f64 = 60.0;
/// Criterion 2: clean heart-rate error ceiling and runtime bound.
const BASELINE_MAE_BPM: f64 = 2.0;
const EVAL_RUNTIME_S: f64 = 600.0;
/// Criterion 3: unconstrained efficacy floors and constraint slack.
const UNCONSTRAINED_SUCCESS_PCT: f64 = 90.0;
const CONSTRAINED_SLACK_PP: f64 = 5.0;
const VS_TRUTH_MAE_RATIO: f64 = 10.0;
/// Criterion 4: floor for the fully constrained attack.
const GENERAL_SUCCESS_PCT: f64 = 70.0;
/// Criterion 6: stitching fidelity and spectral resolution.
const OLA_MIN_RHO: f64 = 0.999;
const HR_RESOLUTION_BPM: f64 = 0.25;
/// Criterion 7: physical-scenario floors.
const MASK_SUCCESS_PCT: f64 = 99.0;
const CHROM_OUT_OF_BAND_SLACK_BPM: f64 = 3.0;
const POS_IN_BAND_MAE_RATIO: f64 = 10.0;

fn random_clip(n: usize, h: usize, w: usize, seed: u64) -> VideoClip<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let data = Array4::from_shape_fn((n, h, w, 3), |_| rng.gen_range(0.0..255.0));
    VideoClip::new(data, 30.0).unwrap()
}

fn rel_err(got: f64, want: f64) -> f64 {
    (got - want).abs() / want.abs().max(1e-6)
}

fn loss_of(params: &MicroNetParams<f64>, clip: &VideoClip<f64>, target: &Array1<f64>) -> f64 {
    let (wave, _) = micro_forward(params, clip).unwrap();
    pearson_loss(wave.samples(), target).unwrap().value
}

fn criterion_gradients() -> Result<String, String> {
    let start = Instant::now();
    let h_step = 1e-4;
    let mut rng = ChaCha8Rng::seed_from_u64(7001);
    let mut worst: f64 = 0.0;

    for seed in 0..20u64 {
        let clip = random_clip(16, 4, 4, 7100 + seed);
        let params = MicroNetParams::<f64>::init(4, 4, 7200 + seed);
        let target = {
            let mut t_rng = ChaCha8Rng::seed_from_u64(7300 + seed);
            Array1::from_shape_fn(16, |_| t_rng.gen_range(-1.0..1.0))
        };
        let (wave, cache) = micro_forward(&params, &clip).unwrap();
        let loss = pearson_loss(wave.samples(), &target).unwrap();
        let grads = micro_backward(&params, &cache, &loss.grad).unwrap();

        let mut check = |got: f64, fd: f64, what: &str| -> Result<(), String> {
            let r = rel_err(got, fd);
            if r >= GRAD_REL_TOL && (got - fd).abs() >= GRAD_ABS_FLOOR {
                return Err(format!(
                    "clip seed {seed} {what}: analytic {got}, finite difference {fd}"
                ));
            }
            if (got - fd).abs() >= GRAD_ABS_FLOOR {
                worst = worst.max(r);
            }
            Ok(())
        };

        for _ in 0..6 {
            let idx = (
                rng.gen_range(0..16),
                rng.gen_range(0..4),
                rng.gen_range(0..4),
                rng.gen_range(0..3),
            );
            let mut plus = clip.data().clone();
            plus[idx] += h_step;
            let mut minus = clip.data().clone();
            minus[idx] -= h_step;
            let fd = (loss_of(&params, &VideoClip::new_unbounded(plus, 30.0).unwrap(), &target)
                - loss_of(
                    &params,
                    &VideoClip::new_unbounded(minus, 30.0).unwrap(),
                    &target,
                ))
                / (2.0 * h_step);
            check(grads.input[idx], fd, "input gradient")?;
        }

        for layer_i in 0..3 {
            for _ in 0..3 {
                let r = rng.gen_range(0..params.layers[layer_i].weight.dim().0);
                let c = rng.gen_range(0..params.layers[layer_i].weight.dim().1);
                let mut p_plus = params.clone();
                p_plus.layers[layer_i].weight[[r, c]] += h_step;
                let mut p_minus = params.clone();
                p_minus.layers[layer_i].weight[[r, c]] -= h_step;
                let fd = (loss_of(&p_plus, &clip, &target) - loss_of(&p_minus, &clip, &target))
                    / (2.0 * h_step);
                check(
                    grads.layers[layer_i].0[[r, c]],
                    fd,
                    &format!("layer {layer_i} weight"),
                )?;
            }
            let b = rng.gen_range(0..params.layers[layer_i].bias.len());
            let mut p_plus = params.clone();
            p_plus.layers[layer_i].bias[b] += h_step;
            let mut p_minus = params.clone();
            p_minus.layers[layer_i].bias[b] -= h_step;
            let fd = (loss_of(&p_plus, &clip, &target) - loss_of(&p_minus, &clip, &target))
                / (2.0 * h_step);
            check(
                grads.layers[layer_i].1[b],
                fd,
                &format!("layer {layer_i} bias"),
            )?;
        }

        for c in 0..8 {
            let mut p_plus = params.clone();
            p_plus.head_weight[c] += h_step;
            let mut p_minus = params.clone();
            p_minus.head_weight[c] -= h_step;
            let fd = (loss_of(&p_plus, &clip, &target) - loss_of(&p_minus, &clip, &target))
                / (2.0 * h_step);
            check(grads.head_weight[c], fd, "head weight")?;
        }
    }

    let mut pearson_worst: f64 = 0.0;
    let mut p_rng = ChaCha8Rng::seed_from_u64(7500);
    for _ in 0..20 {
        let n = p_rng.gen_range(8..40);
        let pred = Array1::from_shape_fn(n, |_| p_rng.gen_range(-2.0..2.0));
        let target = Array1::from_shape_fn(n, |_| p_rng.gen_range(-2.0..2.0));
        let loss = pearson_loss(&pred, &target).unwrap();
        let h = 1e-6;
        for i in 0..n {
            let mut plus = pred.clone();
            plus[i] += h;
            let mut minus = pred.clone();
            minus[i] -= h;
            let fd = (pearson_loss(&plus, &target).unwrap().value
                - pearson_loss(&minus, &target).unwrap().value)
                / (2.0 * h);
            let r = rel_err(loss.grad[i], fd);
            if r >= PEARSON_REL_TOL && (loss.grad[i] - fd).abs() >= 1e-9 {
                return Err(format!(
                    "pearson gradient coord {i}: analytic {}, finite difference {fd}",
                    loss.grad[i]
                ));
            }
            if (loss.grad[i] - fd).abs() >= 1e-9 {
                pearson_worst = pearson_worst.max(r);
            }
        }
    }

    let elapsed = start.elapsed().as_secs_f64();
    if elapsed >= GRAD_RUNTIME_S {
        return Err(format!("finite differences took {elapsed:.1} s (bound {GRAD_RUNTIME_S} s)"));
    }
    Ok(format!(
        "20 clips, worst rel err {worst:.2e} (net) / {pearson_worst:.2e} (loss), {elapsed:.1} s"
    ))
}

fn pooled_success(reports: &[MetricReport], constraints: &str) -> f64 {
    let mut hit_weight = 0.0;
    let mut total = 0.0;
    for r in reports {
        if r.scenario == "digital/vs-target" && r.constraints == constraints {
            let n = r.n_frames as f64;
            hit_weight += r.success_rate_pct.expect("ablation rows carry success") * n;
            total += n;
        }
    }
    hit_weight / total
}

fn pooled_vs_truth_mae(reports: &[MetricReport], constraints: &str) -> f64 {
    let mut weighted = 0.0;
    let mut total = 0.0;
    for r in reports {
        if r.scenario == "digital/vs-truth" && r.constraints == constraints {
            let n = r.n_frames as f64;
            weighted += r.mae_bpm * n;
            total += n;
        }
    }
    weighted / total
}

fn physical_mae(reports: &[MetricReport], estimator: &str, target: Option<f64>) -> f64 {
    reports
        .iter()
        .find(|r| {
            r.scenario == "physical/vs-truth" && r.estimator == estimator && r.target_bpm == target
        })
        .map(|r| r.mae_bpm)
        .expect("physical scenario emits every (estimator, target) row")
}

fn criterion_baselines(outputs: &EvaluationOutputs, eval_elapsed: f64) -> Result<String, String> {
    let mut maes = Vec::new();
    for est in ["micro", "chrom", "pos"] {
        let r = outputs
            .reports
            .iter()
            .find(|r| r.scenario == "baseline" && r.estimator == est)
            .ok_or_else(|| format!("missing baseline row for {est}"))?;
        if r.mae_bpm > BASELINE_MAE_BPM {
            return Err(format!(
                "{est} baseline MAE {:.3} bpm exceeds {BASELINE_MAE_BPM} bpm",
                r.mae_bpm
            ));
        }
        maes.push(format!("{est} {:.3}", r.mae_bpm));
    }
    if eval_elapsed >= EVAL_RUNTIME_S {
        return Err(format!(
            "evaluation took {eval_elapsed:.0} s (bound {EVAL_RUNTIME_S} s)"
        ));
    }
    Ok(format!("MAE bpm: {} ({eval_elapsed:.0} s)", maes.join(", ")))
}

fn criterion_digital_attack(outputs: &EvaluationOutputs) -> Result<String, String> {
    let none = pooled_success(&outputs.reports, "none");
    let t = pooled_success(&outputs.reports, "T");
    let t_nn = pooled_success(&outputs.reports, "T+NN");
    if none < UNCONSTRAINED_SUCCESS_PCT {
        return Err(format!(
            "unconstrained success {none:.2}% below {UNCONSTRAINED_SUCCESS_PCT}%"
        ));
    }
    if (none - t).abs() > CONSTRAINED_SLACK_PP {
        return Err(format!("T success {t:.2}% strays over {CONSTRAINED_SLACK_PP} pp from {none:.2}%"));
    }
    if (none - t_nn).abs() > CONSTRAINED_SLACK_PP {
        return Err(format!(
            "T+NN success {t_nn:.2}% strays over {CONSTRAINED_SLACK_PP} pp from {none:.2}%"
        ));
    }
    let clean = outputs
        .reports
        .iter()
        .find(|r| r.scenario == "digital/baseline")
        .map(|r| r.mae_bpm)
        .ok_or("missing digital baseline row")?;
    let attacked = pooled_vs_truth_mae(&outputs.reports, "none");
    if attacked < VS_TRUTH_MAE_RATIO * clean {
        return Err(format!(
            "vs-truth MAE {attacked:.2} bpm under {VS_TRUTH_MAE_RATIO}x clean baseline {clean:.2} bpm"
        ));
    }
    Ok(format!(
        "success none {none:.2}% / T {t:.2}% / T+NN {t_nn:.2}%, vs-truth {attacked:.1} bpm = {:.0}x clean",
        attacked / clean
    ))
}

fn criterion_general_attack(outputs: &EvaluationOutputs) -> Result<String, String> {
    let got = pooled_success(&outputs.reports, "T+G+NN");
    if got < GENERAL_SUCCESS_PCT {
        return Err(format!("T+G+NN success {got:.2}% below {GENERAL_SUCCESS_PCT}%"));
    }
    Ok(format!("T+G+NN success {got:.2}%"))
}

fn criterion_constraint_invariants() -> Result<String, String> {
    let model = MicroNetParams::<f64>::init(4, 4, 8001);
    let target = make_target::<f64>(130.0, 16, 30.0, 0.0).unwrap();

    for seed in 0..4u64 {
        let clip = random_clip(16, 4, 4, 8100 + seed);
        for temporal in [false, true] {
            for nonnegative in [false, true] {
                let cfg = AttackConfig {
                    iterations: 6,
                    constraints: Constraints {
                        temporal,
                        nonnegative,
                        general: false,
                    },
                    ..AttackConfig::default()
                };
                let res = c_mi_fgsm(&model, &clip, &target, &cfg)
                    .map_err(|e| format!("attack failed at T={temporal} NN={nonnegative}: {e}"))?;
                let eta = &res.perturbation;
                if eta.linf_norm() > cfg.epsilon {
                    return Err(format!(
                        "budget violated: {} > {} at T={temporal} NN={nonnegative}",
                        eta.linf_norm(),
                        cfg.epsilon
                    ));
                }
                if nonnegative && eta.min_value() < 0.0 {
                    return Err(format!("negative offset {} under NN", eta.min_value()));
                }
                if temporal && eta.max_spatial_variance() != 0.0 {
                    return Err("spatial variance under T".to_string());
                }
            }
        }

        // Zero decay must reproduce plain iterative FGSM bit-exactly.
        let cfg = AttackConfig {
            iterations: 6,
            decay: 0.0,
            ..AttackConfig::default()
        };
        let res = c_mi_fgsm(&model, &clip, &target, &cfg).unwrap();
        let alpha = cfg.alpha();
        let mut eta = Array4::<f64>::zeros(clip.data().raw_dim());
        let mut x = clip.clone();
        for _ in 0..cfg.iterations {
            let (wave, cache) = micro_forward(&model, &x).unwrap();
            let loss = pearson_loss(wave.samples(), target.samples()).unwrap();
            let grads = micro_backward(&model, &cache, &loss.grad).unwrap();
            let l1: f64 = grads.input.iter().map(|v| v.abs()).sum();
            if l1 < 1e-20 {
                return Err("oracle hit a vanished gradient".to_string());
            }
            eta.zip_mut_with(&grads.input, |e, &g| {
                let s = if g > 0.0 {
                    1.0
                } else if g < 0.0 {
                    -1.0
                } else {
                    0.0
                };
                *e = (*e - alpha * s).clamp(-cfg.epsilon, cfg.epsilon);
            });
            let mut data = clip.data().clone();
            data.zip_mut_with(&eta, |a, &b| *a += b);
            x = VideoClip::new_unbounded(data, clip.fps()).unwrap();
        }
        match &res.perturbation {
            Perturbation::Full(e) => {
                if e.iter().zip(eta.iter()).any(|(a, b)| a != b) {
                    return Err(format!("zero-decay attack diverges from the iterative-FGSM oracle (seed {seed})"));
                }
            }
            _ => return Err("unconstrained attack lost its full shape".to_string()),
        }
    }
    Ok("4 clips x 4 flag combinations, zero-decay path bit-equal to iterative FGSM".to_string())
}

struct GreenMean;

impl PulseEstimator<f64> for GreenMean {
    fn estimate(&self, clip: &VideoClip<f64>) -> pulselab::Result<Waveform<f64>> {
        Waveform::new(clip.mean_rgb().column(1).to_owned(), clip.fps())
    }
    fn name(&self) -> &'static str {
        "green-mean"
    }
}

fn criterion_pipeline() -> Result<String, String> {
    // Exact-bin recovery: 2 Hz at 30 fps lands on bin 480 of the default
    // 900-sample window padded 8x, which is exactly 120 bpm in f64.
    let fps = 30.0;
    let n = 1000;
    let wave = Waveform::new(
        Array1::from_shape_fn(n, |t| (std::f64::consts::TAU * 2.0 * t as f64 / fps).sin()),
        fps,
    )
    .unwrap();
    let cfg = PipelineConfig {
        smooth_s: 0.0,
        ..PipelineConfig::default()
    };
    let hr = extract_heart_rate(&wave, &cfg).map_err(|e| e.to_string())?;
    if hr.bpm().iter().any(|&b| b != 120.0) {
        return Err("exact-bin sinusoid did not recover bit-equal 120 bpm".to_string());
    }

    // Overlap-add fidelity on a tone whose period tiles the clip length.
    let ola_cfg = PipelineConfig {
        clip_len: 64,
        clip_stride: 32,
        ..PipelineConfig::default()
    };
    let f_hz = 1.875;
    let clip_data = Array4::from_shape_fn((288, 2, 2, 3), |(t, _, _, _)| {
        128.0 + 20.0 * (std::f64::consts::TAU * f_hz * t as f64 / fps).sin()
    });
    let clip = VideoClip::new(clip_data, fps).unwrap();
    let stitched = sliding_predict(&GreenMean, &clip, &ola_cfg).map_err(|e| e.to_string())?;
    let (mut dot, mut na, mut nb) = (0.0, 0.0, 0.0);
    for t in 32..256 {
        let a = stitched.samples()[t];
        let b = (std::f64::consts::TAU * f_hz * t as f64 / fps).sin();
        dot += a * b;
        na += a * a;
        nb += b * b;
    }
    let rho = dot / (na.sqrt() * nb.sqrt());
    if rho < OLA_MIN_RHO {
        return Err(format!("overlap-add correlation {rho:.6} below {OLA_MIN_RHO}"));
    }

    let default_cfg = PipelineConfig::default();
    let window = (default_cfg.hr_window_s * fps).round() as usize;
    let resolution = 60.0 * fps / (window * default_cfg.fft_pad_factor) as f64;
    if resolution > HR_RESOLUTION_BPM {
        return Err(format!(
            "default padding resolves {resolution} bpm, coarser than {HR_RESOLUTION_BPM} bpm"
        ));
    }
    Ok(format!(
        "bit-equal 120 bpm on {} windows, overlap-add rho {rho:.6}, resolution {resolution} bpm",
        hr.len()
    ))
}

fn criterion_physical(outputs: &EvaluationOutputs) -> Result<String, String> {
    if outputs.mask.success_pct < MASK_SUCCESS_PCT {
        return Err(format!(
            "mask attack pinned only {:.2}% of frames (floor {MASK_SUCCESS_PCT}%)",
            outputs.mask.success_pct
        ));
    }

    let chrom_control = physical_mae(&outputs.reports, "chrom", None);
    let chrom_300 = physical_mae(&outputs.reports, "chrom", Some(300.0));
    if (chrom_300 - chrom_control).abs() > CHROM_OUT_OF_BAND_SLACK_BPM {
        return Err(format!(
            "out-of-band attack moved CHROM from {chrom_control:.3} to {chrom_300:.3} bpm"
        ));
    }

    let pos_control = physical_mae(&outputs.reports, "pos", None);
    for target in [120.0, 200.0] {
        let attacked = physical_mae(&outputs.reports, "pos", Some(target));
        if attacked < POS_IN_BAND_MAE_RATIO * pos_control {
            return Err(format!(
                "in-band {target} bpm attack raised POS MAE only to {attacked:.3} bpm \
                 (control {pos_control:.3}, needs {POS_IN_BAND_MAE_RATIO}x)"
            ));
        }
    }

    let entries = &outputs.sweep.entries;
    if outputs.sweep.threshold_distance.is_none() {
        return Err("distance sweep never crossed 50% success".to_string());
    }
    for pair in entries.windows(2) {
        if pair[1].success_rate_pct < pair[0].success_rate_pct {
            return Err(format!(
                "success fell from {:.1}% to {:.1}% while the light moved closer",
                pair[0].success_rate_pct, pair[1].success_rate_pct
            ));
        }
    }
    Ok(format!(
        "mask {:.1}%, CHROM 300 bpm delta {:.3} bpm, POS in-band {:.0}x/{:.0}x, threshold {} m",
        outputs.mask.success_pct,
        (chrom_300 - chrom_control).abs(),
        physical_mae(&outputs.reports, "pos", Some(120.0)) / pos_control,
        physical_mae(&outputs.reports, "pos", Some(200.0)) / pos_control,
        outputs.sweep.threshold_distance.unwrap()
    ))
}

fn criterion_metric_oracles() -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(9001);
    let n = 10_000;
    let truth: Vec<f64> = (0..n).map(|_| 40.0 + rng.gen::<f64>() * 120.0).collect();
    let target: Vec<f64> = (0..n).map(|_| 100.0 + rng.gen::<f64>() * 140.0).collect();
    let pred: Vec<f64> = (0..n)
        .map(|i| match rng.gen_range(0..4) {
            0 => truth[i] + rng.gen::<f64>() * 4.0,
            1 => target[i] + rng.gen::<f64>() * 4.0,
            2 => (truth[i] + target[i]) / 2.0,
            _ => 30.0 + rng.gen::<f64>() * 250.0,
        })
        .collect();

    let mut abs_sum = 0.0;
    let mut sq_sum = 0.0;
    let mut closer = 0usize;
    let mut within = 0usize;
    for i in 0..n {
        abs_sum += (pred[i] - truth[i]).abs();
        sq_sum += (pred[i] - truth[i]) * (pred[i] - truth[i]);
        if (pred[i] - truth[i]).abs() > (pred[i] - target[i]).abs() {
            closer += 1;
        }
        if (pred[i] - 120.0).abs() <= 2.0 {
            within += 1;
        }
    }

    let series = |v: &[f64]| HeartRateSeries::new(Array1::from_vec(v.to_vec()), 1.0).unwrap();
    let (sp, st, sg) = (series(&pred), series(&truth), series(&target));
    if mae(&sp, &st).unwrap() != abs_sum / n as f64 {
        return Err("MAE diverged from the brute-force loop".to_string());
    }
    if rmse(&sp, &st).unwrap() != (sq_sum / n as f64).sqrt() {
        return Err("RMSE diverged from the brute-force loop".to_string());
    }
    if success_rate(&sp, &st, &sg).unwrap() != 100.0 * closer as f64 / n as f64 {
        return Err("success rate diverged from the brute-force loop".to_string());
    }
    if mask_success_rate(&sp, 120.0).unwrap() != 100.0 * within as f64 / n as f64 {
        return Err("mask success rate diverged from the brute-force loop".to_string());
    }
    Ok(format!("{n} randomized samples, all four metrics exactly equal"))
}

fn criterion_determinism() -> Result<String, String> {
    let bin = env!("CARGO_BIN_EXE_pulselab");
    let root = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut digests = Vec::new();
    for run in 0..2 {
        let out = root.path().join(format!("run{run}"));
        let status = Command::new(bin)
            .args(["--out", out.to_str().unwrap(), "evaluate"])
            .output()
            .map_err(|e| format!("spawning evaluate failed: {e}"))?;
        if !status.status.success() {
            return Err(format!(
                "evaluate run {run} exited with {:?}: {}",
                status.status.code(),
                String::from_utf8_lossy(&status.stderr)
            ));
        }
        let csv = std::fs::read(out.join("metrics.csv")).map_err(|e| e.to_string())?;
        let json = std::fs::read(out.join("metrics.json")).map_err(|e| e.to_string())?;
        digests.push((csv, json));
    }
    if digests[0].0 != digests[1].0 {
        return Err("metrics.csv differs between identically seeded runs".to_string());
    }
    if digests[0].1 != digests[1].1 {
        return Err("metrics.json differs between identically seeded runs".to_string());
    }
    Ok(format!(
        "two evaluate runs, metrics.csv ({} bytes) and metrics.json byte-identical",
        digests[0].0.len()
    ))
}

#[test]
fn acceptance_criteria() {
    let mut stderr = std::io::stderr();
    let mut failures = Vec::new();
    let mut report = |n: usize, name: &str, outcome: Result<String, String>| {
        let line = match &outcome {
            Ok(detail) => format!("criterion {n} ({name}): PASS - {detail}"),
            Err(detail) => format!("criterion {n} ({name}): FAIL - {detail}"),
        };
        let _ = writeln!(stderr, "{line}");
        if outcome.is_err() {
            failures.push(line);
        }
    };

    report(1, "gradient correctness", criterion_gradients());

    let eval_start = Instant::now();
    let eval_dir = tempfile::tempdir().expect("temp dir for the shared evaluation");
    let outputs = run_full_evaluation(&DeskConfig::default(), eval_dir.path())
        .expect("full evaluation must complete");
    let eval_elapsed = eval_start.elapsed().as_secs_f64();

    report(2, "clean-pipeline baselines", criterion_baselines(&outputs, eval_elapsed));
    report(3, "digital attack efficacy", criterion_digital_attack(&outputs));
    report(4, "most-constrained attack", criterion_general_attack(&outputs));
    report(5, "constraint invariants", criterion_constraint_invariants());
    report(6, "overlap-add and spectral pipeline", criterion_pipeline());
    report(7, "physical simulation", criterion_physical(&outputs));
    report(8, "metric oracles", criterion_metric_oracles());
    report(9, "determinism", criterion_determinism());

    assert!(
        failures.is_empty(),
        "{} acceptance criteria failed:\n{}",
        failures.len(),
        failures.join("\n")
    );
}
