//! Command-line frontend for the pulselab library.
//!
//! Every numeric choice comes from one JSON config file (`--config`, a
//! `DeskConfig`; omitted fields take desk-scale defaults) plus a master
//! `--seed`. Exit codes: 0 on success, 2 for validation errors, 3 for
//! I/O and malformed-file errors.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use ndarray::Array4;
use serde::Serialize;

use pulselab::attack::{c_mi_fgsm, general_attack, make_target, AttackLine};
use pulselab::estimators::MicroNetParams;
use pulselab::eval::emit_report;
use pulselab::harness::{
    ablation_scenes, evaluation_scenes, line_fit_scenes, mask_scene, physical_subjects,
    run_full_evaluation, train_desk_model, training_scenes, DeskConfig,
};
use pulselab::npy::{read_npy, write_npy};
use pulselab::physical::{simulate_led, LedModel};
use pulselab::signal::{Perturbation, VideoClip};
use pulselab::synth::{generate_clip, make_mask_medium, SceneConfig};
use pulselab::{Error, Result};

#[derive(Parser)]
#[command(name = "pulselab", version, about = "Synthetic remote-pulse lab: estimators, attacks, LED playback")]
struct Cli {
    /// Master random seed; overrides the config file's seed.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// JSON config file (desk-scale defaults when omitted).
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,

    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum SceneSet {
    Train,
    Eval,
    Ablation,
    LineFit,
    Physical,
    Mask,
}

#[derive(Subcommand)]
enum Command {
    /// Generate one of the desk-scale scene sets as NPY clips plus a
    /// truth manifest.
    Synth {
        #[arg(long, value_enum, default_value = "eval")]
        set: SceneSet,
    },
    /// Train the learned estimator and save its parameters.
    Train,
    /// Attack a single clip. Writes the adversarial clip, the
    /// perturbation, and the per-iteration loss trace.
    Attack {
        /// Input video, NPY float32 with shape (frames, height, width, 3).
        #[arg(long)]
        clip: PathBuf,
        /// Parameter directory produced by `train`.
        #[arg(long)]
        params: PathBuf,
        /// Attack-line JSON, required when the config enables the
        /// line-based attack.
        #[arg(long)]
        line: Option<PathBuf>,
        /// Frames per second of the input clip.
        #[arg(long, default_value_t = 30.0)]
        fps: f64,
    },
    /// Render the line-based attack through the LED model against the
    /// physical subject set, writing attacked clips and a manifest.
    SimulatePhysical {
        /// Attack-line JSON (from `evaluate`, or fitted elsewhere).
        #[arg(long)]
        line: PathBuf,
    },
    /// Run the full loop: train, fit the attack line, evaluate baselines,
    /// the constraint ablation, and the physical scenarios.
    Evaluate,
    /// Re-render CSV and a residual figure from a metrics JSON file.
    Report {
        #[arg(long)]
        metrics: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn load_config(cli: &Cli) -> Result<DeskConfig> {
    let mut cfg = match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)?;
            serde_json::from_str(&text)
                .map_err(|e| Error::Config(format!("config file {}: {e}", path.display())))?
        }
        None => DeskConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: &Cli) -> Result<()> {
    let cfg = load_config(cli)?;
    std::fs::create_dir_all(&cli.out)?;
    match &cli.command {
        Command::Synth { set } => synth(&cfg, *set, &cli.out),
        Command::Train => train(&cfg, &cli.out),
        Command::Attack {
            clip,
            params,
            line,
            fps,
        } => attack(&cfg, clip, params, line.as_deref(), *fps, &cli.out),
        Command::SimulatePhysical { line } => simulate_physical(&cfg, line, &cli.out),
        Command::Evaluate => evaluate(&cfg, &cli.out),
        Command::Report { metrics } => report(metrics, &cli.out),
    }
}

#[derive(Serialize)]
struct SynthEntry {
    clip: String,
    bvp: Option<String>,
    config: SceneConfig,
}

fn scene_set(cfg: &DeskConfig, set: SceneSet) -> Vec<SceneConfig> {
    match set {
        SceneSet::Train => training_scenes(cfg),
        SceneSet::Eval => evaluation_scenes(cfg),
        SceneSet::Ablation => ablation_scenes(cfg),
        SceneSet::LineFit => line_fit_scenes(cfg),
        SceneSet::Physical => physical_subjects(cfg),
        SceneSet::Mask => vec![mask_scene(cfg)],
    }
}

fn synth(cfg: &DeskConfig, set: SceneSet, out: &Path) -> Result<()> {
    let scenes = scene_set(cfg, set);
    let mut manifest = Vec::with_capacity(scenes.len());
    for (i, scene) in scenes.iter().enumerate() {
        let (clip, gt) = if scene.has_pulse {
            generate_clip::<f64>(scene)?
        } else {
            make_mask_medium::<f64>(scene)?
        };
        let clip_name = format!("clip_{i:02}.npy");
        write_npy(out.join(&clip_name), &clip.data().mapv(|v| v as f32))?;
        let bvp_name = match &gt.bvp {
            Some(bvp) => {
                let name = format!("bvp_{i:02}.npy");
                write_npy(out.join(&name), &bvp.samples().mapv(|v| v as f32))?;
                Some(name)
            }
            None => None,
        };
        manifest.push(SynthEntry {
            clip: clip_name,
            bvp: bvp_name,
            config: scene.clone(),
        });
    }
    std::fs::write(
        out.join("scenes.json"),
        serde_json::to_string_pretty(&manifest)?,
    )?;
    println!("wrote {} clips to {}", manifest.len(), out.display());
    Ok(())
}

fn train(cfg: &DeskConfig, out: &Path) -> Result<()> {
    let (params, log) = train_desk_model(cfg)?;
    params.save(out.join("params"))?;
    std::fs::write(
        out.join("train_log.json"),
        serde_json::to_string_pretty(&log)?,
    )?;
    println!(
        "trained on {} clips, holdout loss {:.4} ({})",
        log.n_train,
        log.final_holdout_loss,
        if log.converged { "converged" } else { "not converged" }
    );
    Ok(())
}

#[derive(Serialize)]
struct TraceOut<'a> {
    config: &'a pulselab::attack::AttackConfig,
    loss_trace: &'a [f64],
    vanished_iterations: &'a [usize],
}

fn read_clip(path: &Path, fps: f64) -> Result<VideoClip<f64>> {
    let arr = read_npy(path)?;
    let arr4: Array4<f32> = arr
        .into_dimensionality()
        .map_err(|_| Error::Format("clip NPY must be 4-dimensional".to_string()))?;
    VideoClip::new(arr4.mapv(f64::from), fps)
}

fn read_line(path: &Path) -> Result<AttackLine> {
    let text = std::fs::read_to_string(path)?;
    serde_json::from_str(&text)
        .map_err(|e| Error::Format(format!("attack-line file {}: {e}", path.display())))
}

fn write_perturbation(path: &Path, eta: &Perturbation<f64>) -> Result<()> {
    match eta {
        Perturbation::Full(a) => write_npy(path, &a.mapv(|v| v as f32)),
        Perturbation::PerFrame(a) => write_npy(path, &a.mapv(|v| v as f32)),
    }
}

fn attack(
    cfg: &DeskConfig,
    clip_path: &Path,
    params_dir: &Path,
    line_path: Option<&Path>,
    fps: f64,
    out: &Path,
) -> Result<()> {
    let video = read_clip(clip_path, fps)?;
    let acfg = &cfg.attack;

    let (adversarial, eta, trace, vanished) = if acfg.constraints.general {
        let line_path = line_path.ok_or_else(|| {
            Error::Config("the line-based attack needs --line <json>".to_string())
        })?;
        let line = read_line(line_path)?;
        let eta = general_attack::<f64>(
            &line,
            acfg.target_bpm,
            video.n_frames(),
            video.fps(),
            acfg.epsilon,
        )?;
        let adv = pulselab::attack::apply_perturbation(&video, &eta)?;
        (adv, eta, Vec::new(), Vec::new())
    } else {
        let model = MicroNetParams::<f64>::load(params_dir)?;
        let target = make_target::<f64>(acfg.target_bpm, video.n_frames(), video.fps(), 0.0)?;
        let result = c_mi_fgsm(&model, &video, &target, acfg)?;
        (
            result.video,
            result.perturbation,
            result.loss_trace,
            result.vanished_iterations,
        )
    };

    write_npy(
        out.join("adversarial.npy"),
        &adversarial.data().mapv(|v| v as f32),
    )?;
    write_perturbation(&out.join("perturbation.npy"), &eta)?;
    std::fs::write(
        out.join("attack_trace.json"),
        serde_json::to_string_pretty(&TraceOut {
            config: acfg,
            loss_trace: &trace,
            vanished_iterations: &vanished,
        })?,
    )?;
    println!(
        "attacked {} ({} frames, constraints {})",
        clip_path.display(),
        adversarial.n_frames(),
        acfg.constraints.label()
    );
    Ok(())
}

#[derive(Serialize)]
struct SimEntry {
    subject: usize,
    target_bpm: f64,
    clip: String,
    clamp_fraction: f64,
}

#[derive(Serialize)]
struct SimManifest {
    led: LedModelSummary,
    epsilon: f64,
    entries: Vec<SimEntry>,
}

#[derive(Serialize)]
struct LedModelSummary {
    reference_gain: f64,
    reference_distance: f64,
    distance: f64,
}

fn simulate_physical(cfg: &DeskConfig, line_path: &Path, out: &Path) -> Result<()> {
    let line = read_line(line_path)?;
    let targets = pulselab::physical::PHYSICAL_TARGETS;
    let mut entries = Vec::new();
    for (subject, scene) in physical_subjects(cfg).iter().enumerate() {
        let (clip, _) = generate_clip::<f64>(scene)?;
        for &target_bpm in &targets {
            let offsets = general_attack::<f64>(
                &line,
                target_bpm,
                clip.n_frames(),
                clip.fps(),
                cfg.attack.epsilon,
            )?;
            let led = LedModel::constant(
                cfg.led_gain,
                cfg.led_reference_distance,
                cfg.led_distance,
                clip.n_frames(),
            );
            let (attacked, clamps) = simulate_led(&clip, &offsets, &led)?;
            let name = format!("subject{subject}_target{target_bpm:.0}.npy");
            write_npy(out.join(&name), &attacked.data().mapv(|v| v as f32))?;
            entries.push(SimEntry {
                subject,
                target_bpm,
                clip: name,
                clamp_fraction: clamps.fraction(),
            });
        }
    }
    let manifest = SimManifest {
        led: LedModelSummary {
            reference_gain: cfg.led_gain,
            reference_distance: cfg.led_reference_distance,
            distance: cfg.led_distance,
        },
        epsilon: cfg.attack.epsilon,
        entries,
    };
    std::fs::write(
        out.join("physical_manifest.json"),
        serde_json::to_string_pretty(&manifest)?,
    )?;
    println!(
        "simulated {} attacked clips to {}",
        manifest.entries.len(),
        out.display()
    );
    Ok(())
}

fn evaluate(cfg: &DeskConfig, out: &Path) -> Result<()> {
    let outputs = run_full_evaluation(cfg, out)?;
    println!(
        "training holdout loss {:.4} ({})",
        outputs.train_log.final_holdout_loss,
        if outputs.train_log.converged {
            "converged"
        } else {
            "not converged"
        }
    );
    for r in outputs
        .reports
        .iter()
        .filter(|r| r.scenario == "baseline")
    {
        println!("baseline {}: mae {:.3} bpm", r.estimator, r.mae_bpm);
    }
    println!(
        "mask attack: {:.1}% of frames within 2 bpm of target",
        outputs.mask.success_pct
    );
    match outputs.sweep.threshold_distance {
        Some(d) => println!("distance sweep: attack holds out to {d} m"),
        None => println!("distance sweep: no distance reached 50% success"),
    }
    println!("reports written to {}", out.display());
    Ok(())
}

fn report(metrics_path: &Path, out: &Path) -> Result<()> {
    let text = std::fs::read_to_string(metrics_path)?;
    let reports: Vec<pulselab::eval::MetricReport> = serde_json::from_str(&text)
        .map_err(|e| Error::Format(format!("metrics file {}: {e}", metrics_path.display())))?;
    if reports.is_empty() {
        return Err(Error::EmptyInput);
    }
    emit_report(&reports, out)?;
    let series: Vec<(String, Vec<f64>)> = reports
        .iter()
        .take(4)
        .map(|r| {
            let label = format!("{}/{}/{}", r.scenario, r.estimator, r.constraints);
            (label, r.residuals.clone())
        })
        .collect();
    let series_refs: Vec<(&str, &[f64])> = series
        .iter()
        .map(|(l, s)| (l.as_str(), s.as_slice()))
        .collect();
    pulselab::eval::write_series_svg(
        out.join("residuals.svg"),
        "per-window residuals (bpm)",
        &series_refs,
    )?;
    println!("re-rendered {} rows to {}", reports.len(), out.display());
    Ok(())
}
