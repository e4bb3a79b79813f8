//! Experiment driver: train defended classifiers, run attack sweeps,
//! compute curve areas, and render plots, with every artifact recorded in
//! a manifest. Exit codes: 0 success, 2 usage or configuration error,
//! 3 numerical failure.

mod config;
mod plot;

use clap::{Parser, Subcommand, ValueEnum};
use config::{load_experiment, parse_grid, ExperimentManifest, PIXEL_SCALE};
use robustot::attack::{sweep_bounded, sweep_min_perturbation, AttackOutcome};
use robustot::defense::{self, TrainReport};
use robustot::eval::{auac, curve_from_bounded_sweep, curve_from_min_perturbations, AccuracyCurve, CurvePoint};
use robustot::measure::DiscreteMeasure;
use robustot::nn::Classifier;
use robustot::ot::{sinkhorn, sinkhorn_divergence, SinkhornSettings};
use robustot::{Error, Result};
use std::path::{Path, PathBuf};
use std::time::Instant;

const EVAL_ATTACK_STEPS: usize = 10;
const MIN_PERTURB_RESOLUTION: f64 = 0.5 / PIXEL_SCALE;

#[derive(Parser)]
#[command(name = "robustot", version, about = "adversarial robustness experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Mode {
    Bounded,
    Minperturb,
}

#[derive(Subcommand)]
enum Command {
    /// Train a classifier under a configured defense.
    Train {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
        /// Overrides the training seed from the config.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Attack a trained checkpoint over a budget grid.
    Sweep {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
        /// Budgets in /255 units.
        #[arg(long, default_value = "0,2,4,6,8,10,12,14,16,18,20,22,24,26,28,30")]
        grid: String,
        #[arg(long, value_enum, default_value = "bounded")]
        mode: Mode,
        /// Search cap for minperturb mode, in /255 units.
        #[arg(long, default_value_t = 30.0)]
        eps_max: f64,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Tabulate curve areas and render an overlay plot.
    Auac {
        /// Curve CSV files (epsilon,accuracy).
        curves: Vec<PathBuf>,
        /// Budget caps in /255 units.
        #[arg(long, default_value = "16,30")]
        eps_max: String,
        /// Extend a short curve by holding its last accuracy.
        #[arg(long)]
        hold_last: bool,
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Render curve CSVs to an SVG.
    Plot {
        curves: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Debug: entropic divergence between two CSV point clouds.
    Sinkhorn {
        a: PathBuf,
        b: PathBuf,
        #[arg(long)]
        sigma: f64,
        /// Also print the transport plan of the cross term.
        #[arg(long)]
        plan: bool,
    },
}

fn main() {
    let cli = Cli::parse();
    if let Err(e) = run(cli) {
        eprintln!("error: {e}");
        std::process::exit(match e {
            Error::NumericalFailure(_) => 3,
            _ => 2,
        });
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Train { config, out_dir, seed } => cmd_train(&config, &out_dir, seed),
        Command::Sweep { checkpoint, config, out_dir, grid, mode, eps_max, seed } => {
            cmd_sweep(&checkpoint, &config, &out_dir, &grid, mode, eps_max, seed)
        }
        Command::Auac { curves, eps_max, hold_last, out_dir } => {
            cmd_auac(&curves, &eps_max, hold_last, out_dir.as_deref())
        }
        Command::Plot { curves, out } => cmd_plot(&curves, &out),
        Command::Sinkhorn { a, b, sigma, plan } => cmd_sinkhorn(&a, &b, sigma, plan),
    }
}

fn cmd_train(config_path: &Path, out_dir: &Path, seed: Option<u64>) -> Result<()> {
    let started = Instant::now();
    let (config, digest) = load_experiment(config_path, seed)?;
    let data = config.dataset.load()?;
    for w in &data.warnings {
        eprintln!("warning: {w}");
    }
    let (model, report) = defense::train(&config.defense, &data)?;
    std::fs::create_dir_all(out_dir)?;

    let checkpoint = out_dir.join("checkpoint.json");
    let ckpt = serde_json::json!({
        "kind": config.defense.kind.as_str(),
        "config_digest": digest,
        "model": model.to_json(),
    });
    std::fs::write(&checkpoint, serde_json::to_string_pretty(&ckpt).unwrap())?;

    // Wall-clock time lives in the manifest so reports replay bit for bit.
    let report_path = out_dir.join("train_report.json");
    std::fs::write(&report_path, serde_json::to_string_pretty(&trim_report(&report)).unwrap())?;

    let mut manifest = ExperimentManifest::new("train", &digest, config_path);
    manifest.checkpoint_path = Some(checkpoint.display().to_string());
    manifest.report_paths.push(report_path.display().to_string());
    manifest.wall_clock_seconds = started.elapsed().as_secs_f64();
    manifest.write(out_dir)?;

    let train_acc = defense::accuracy(&model, &data.train_inputs, &data.train_labels)?;
    let test_acc = defense::accuracy(&model, &data.test_inputs, &data.test_labels)?;
    println!(
        "trained {} for {} epochs: train acc {train_acc:.3}, test acc {test_acc:.3}",
        config.defense.kind.as_str(),
        report.epoch_losses.len()
    );
    println!("checkpoint: {}", checkpoint.display());
    Ok(())
}

fn trim_report(report: &TrainReport) -> serde_json::Value {
    serde_json::json!({
        "kind": report.kind.as_str(),
        "seed": report.seed,
        "epoch_losses": report.epoch_losses,
    })
}

fn load_checkpoint(path: &Path) -> Result<Classifier> {
    let bytes = std::fs::read(path)?;
    let v: serde_json::Value = serde_json::from_slice(&bytes)
        .map_err(|e| Error::Format(format!("checkpoint {}: {e}", path.display())))?;
    Classifier::from_json(v.get("model").unwrap_or(&v))
}

fn cmd_sweep(
    checkpoint: &Path,
    config_path: &Path,
    out_dir: &Path,
    grid: &str,
    mode: Mode,
    eps_max_255: f64,
    seed: Option<u64>,
) -> Result<()> {
    let started = Instant::now();
    let model = load_checkpoint(checkpoint)?;
    let (config, digest) = load_experiment(config_path, None)?;
    let data = config.dataset.load()?;
    let grid_255 = parse_grid(grid)?;
    let grid_raw: Vec<f64> = grid_255.iter().map(|e| e / PIXEL_SCALE).collect();
    let seed = seed.unwrap_or(config.defense.seed);
    std::fs::create_dir_all(out_dir)?;

    let clean_correct: Vec<bool> = data
        .test_inputs
        .iter()
        .zip(&data.test_labels)
        .map(|(x, &y)| Ok(model.predict(x)? == y))
        .collect::<Result<_>>()?;

    let mut manifest = ExperimentManifest::new("sweep", &digest, config_path);
    manifest.checkpoint_path = Some(checkpoint.display().to_string());

    let (curve, attack_tag) = match mode {
        Mode::Bounded => {
            let sweeps = sweep_bounded(
                &model,
                &data.test_inputs,
                &data.test_labels,
                &grid_raw,
                EVAL_ATTACK_STEPS,
                seed,
            )?;
            for ((eps_255, _), (_, outcomes)) in grid_255.iter().zip(&grid_raw).zip(&sweeps) {
                let path = out_dir.join(format!("outcomes_eps_{eps_255:04.1}.csv"));
                write_outcomes(&path, &model, &data.test_labels, outcomes, *eps_255)?;
                manifest.report_paths.push(path.display().to_string());
            }
            let success: Vec<(f64, Vec<bool>)> = sweeps
                .iter()
                .map(|(e, outs)| (*e, outs.iter().map(|o| o.success).collect()))
                .collect();
            (
                curve_from_bounded_sweep(&clean_correct, &success)?,
                format!("pgd-bounded-{EVAL_ATTACK_STEPS}"),
            )
        }
        Mode::Minperturb => {
            if !(eps_max_255 > 0.0) {
                return Err(Error::InvalidInput("eps_max must be positive".into()));
            }
            let outcomes = sweep_min_perturbation(
                &model,
                &data.test_inputs,
                &data.test_labels,
                eps_max_255 / PIXEL_SCALE,
                MIN_PERTURB_RESOLUTION,
                EVAL_ATTACK_STEPS,
                seed,
            )?;
            let path = out_dir.join("min_perturbations.csv");
            write_outcomes(&path, &model, &data.test_labels, &outcomes, eps_max_255)?;
            manifest.report_paths.push(path.display().to_string());
            let sizes: Vec<f64> = outcomes.iter().map(|o| o.perturbation_size).collect();
            (
                curve_from_min_perturbations(&clean_correct, &sizes, &grid_raw)?,
                format!("pgd-minperturb-{EVAL_ATTACK_STEPS}"),
            )
        }
    };
    let curve = curve.with_tags(
        checkpoint.file_stem().and_then(|s| s.to_str()).unwrap_or("model"),
        &attack_tag,
    );

    let curve_path = out_dir.join("curve.csv");
    write_curve_csv(&curve_path, &curve)?;
    manifest.report_paths.push(curve_path.display().to_string());

    let sidecar = out_dir.join("curve.json");
    let a16 = auac(&curve, 16.0 / PIXEL_SCALE, true)?;
    let a30 = auac(&curve, 30.0 / PIXEL_SCALE, true)?;
    std::fs::write(
        &sidecar,
        serde_json::to_string_pretty(&serde_json::json!({
            "model_tag": curve.model_tag,
            "attack_tag": curve.attack_tag,
            "test_size": curve.test_size,
            "grid_255": grid_255,
            "clean_accuracy": curve.clean_accuracy(),
            "auac_16": a16.auac,
            "auac_30": a30.auac,
            "rule": a16.rule,
        }))
        .unwrap(),
    )?;
    manifest.report_paths.push(sidecar.display().to_string());
    manifest.wall_clock_seconds = started.elapsed().as_secs_f64();
    manifest.write(out_dir)?;

    println!(
        "swept {} samples: clean acc {:.3}, auac@16 {:.3}, auac@30 {:.3}",
        curve.test_size,
        curve.clean_accuracy(),
        a16.auac,
        a30.auac
    );
    println!("curve: {}", curve_path.display());
    Ok(())
}

fn write_outcomes(
    path: &Path,
    model: &Classifier,
    labels: &[usize],
    outcomes: &[AttackOutcome],
    eps_255: f64,
) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    w.write_record([
        "sample_id",
        "true_label",
        "predicted_label",
        "epsilon_budget",
        "perturbation_size",
        "success",
    ])
    .map_err(csv_err)?;
    for (i, (o, &y)) in outcomes.iter().zip(labels).enumerate() {
        let predicted = model.predict(&o.adversarial)?;
        let size = if o.perturbation_size.is_finite() {
            format!("{}", o.perturbation_size * PIXEL_SCALE)
        } else {
            "inf".to_string()
        };
        w.write_record([
            i.to_string(),
            y.to_string(),
            predicted.to_string(),
            format!("{eps_255}"),
            size,
            o.success.to_string(),
        ])
        .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

fn csv_err(e: csv::Error) -> Error {
    Error::Format(format!("csv: {e}"))
}

fn write_curve_csv(path: &Path, curve: &AccuracyCurve) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    w.write_record(["epsilon", "accuracy"]).map_err(csv_err)?;
    for p in &curve.points {
        w.write_record([format!("{}", p.epsilon * PIXEL_SCALE), format!("{}", p.accuracy)])
            .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

fn read_curve_csv(path: &Path) -> Result<AccuracyCurve> {
    let mut r = csv::ReaderBuilder::new().has_headers(true).from_path(path).map_err(csv_err)?;
    let mut points = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(csv_err)?;
        if rec.len() < 2 {
            return Err(Error::Format(format!("curve {}: short row", path.display())));
        }
        let eps: f64 = rec[0]
            .trim()
            .parse()
            .map_err(|_| Error::Format(format!("curve {}: bad epsilon {:?}", path.display(), &rec[0])))?;
        let acc: f64 = rec[1]
            .trim()
            .parse()
            .map_err(|_| Error::Format(format!("curve {}: bad accuracy {:?}", path.display(), &rec[1])))?;
        points.push(CurvePoint { epsilon: eps / PIXEL_SCALE, accuracy: acc });
    }
    let n = points.len();
    let curve = AccuracyCurve::new(points, n)?;
    Ok(curve.with_tags(
        path.file_stem().and_then(|s| s.to_str()).unwrap_or("curve"),
        "",
    ))
}

fn cmd_auac(
    curve_paths: &[PathBuf],
    eps_max_list: &str,
    hold_last: bool,
    out_dir: Option<&Path>,
) -> Result<()> {
    if curve_paths.is_empty() {
        return Err(Error::InvalidInput("no curve files given".into()));
    }
    let caps = parse_grid(eps_max_list)?;
    let curves: Vec<AccuracyCurve> =
        curve_paths.iter().map(|p| read_curve_csv(p)).collect::<Result<_>>()?;

    let mut header = format!("{:<24}", "curve");
    for c in &caps {
        header.push_str(&format!("  auac@{c:<6.0}"));
    }
    println!("{header}");
    let mut rows = Vec::new();
    for curve in &curves {
        let mut line = format!("{:<24}", curve.model_tag);
        let mut entries = Vec::new();
        for &cap in &caps {
            let r = auac(curve, cap / PIXEL_SCALE, hold_last)?;
            line.push_str(&format!("  {:<10.4}", r.auac));
            entries.push(serde_json::json!({ "eps_max_255": cap, "auac": r.auac, "rule": r.rule }));
        }
        println!("{line}");
        rows.push(serde_json::json!({ "curve": curve.model_tag, "areas": entries }));
    }

    if let Some(dir) = out_dir {
        std::fs::create_dir_all(dir)?;
        let table = dir.join("auac.json");
        std::fs::write(&table, serde_json::to_string_pretty(&rows).unwrap())?;
        let svg = dir.join("curves.svg");
        write_svg(&svg, &curves)?;
        println!("table: {}", table.display());
        println!("plot: {}", svg.display());
    }
    Ok(())
}

fn write_svg(path: &Path, curves: &[AccuracyCurve]) -> Result<()> {
    let series: Vec<(String, Vec<(f64, f64)>)> = curves
        .iter()
        .map(|c| {
            (
                c.model_tag.clone(),
                c.points.iter().map(|p| (p.epsilon * PIXEL_SCALE, p.accuracy)).collect(),
            )
        })
        .collect();
    std::fs::write(path, plot::render_curves(&series))?;
    Ok(())
}

fn cmd_plot(curve_paths: &[PathBuf], out: &Path) -> Result<()> {
    if curve_paths.is_empty() {
        return Err(Error::InvalidInput("no curve files given".into()));
    }
    let curves: Vec<AccuracyCurve> =
        curve_paths.iter().map(|p| read_curve_csv(p)).collect::<Result<_>>()?;
    write_svg(out, &curves)?;
    println!("plot: {}", out.display());
    Ok(())
}

fn read_cloud_csv(path: &Path) -> Result<DiscreteMeasure> {
    let mut r = csv::ReaderBuilder::new().has_headers(false).from_path(path).map_err(csv_err)?;
    let mut points = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(csv_err)?;
        let row: std::result::Result<Vec<f64>, _> =
            rec.iter().map(|f| f.trim().parse::<f64>()).collect();
        match row {
            Ok(row) if !row.is_empty() => points.push(row),
            // A non-numeric first row is treated as a header.
            _ if points.is_empty() => continue,
            _ => return Err(Error::Format(format!("cloud {}: non-numeric row", path.display()))),
        }
    }
    DiscreteMeasure::uniform(points)
}

fn cmd_sinkhorn(a: &Path, b: &Path, sigma: f64, plan: bool) -> Result<()> {
    let ma = read_cloud_csv(a)?;
    let mb = read_cloud_csv(b)?;
    let divergence = sinkhorn_divergence(&ma, &mb, sigma)?;
    let cross = sinkhorn(&ma, &mb, sigma, SinkhornSettings::default())?;
    let out = serde_json::json!({
        "sigma": sigma,
        "divergence": divergence,
        "cross": cross.to_debug_json(plan),
    });
    println!("{}", serde_json::to_string_pretty(&out).unwrap());
    Ok(())
}
