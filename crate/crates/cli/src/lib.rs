//! `orientkit` command-line front end.
//!
//! Exit codes: 0 on success, 2 on I/O failure, 3 on invalid input.

pub mod error;
pub mod evaluate;
pub mod svg;

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use orientkit::anchors::{generate_anchors, AnchorConfig};
use orientkit::augment::{self, DEFAULT_ANGLES, DEFAULT_FILL};
use orientkit::dataio::{self, Provenance, DEFAULT_FOLDS};
use orientkit::metrics::{self, Comparison, ScoreSet, NIST_TOLERANCE_PX};
use serde::Deserialize;

pub use error::{CliError, CliResult};

/// Histogram bin count for report plots.
const PLOT_BINS: usize = 20;

#[derive(Debug, Parser)]
#[command(name = "orientkit", version, about = "Oriented fingertip box toolkit")]
pub struct Cli {
    /// Worker threads (default: number of processors).
    #[arg(long, global = true, env = "ORIENTKIT_JOBS")]
    pub jobs: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Rotate bonafide fingerphotos and their annotations.
    Augment(AugmentArgs),
    /// Split records into train/validation/test by source image.
    Split(SplitArgs),
    /// Generate k cross-validation folds by source image.
    Kfold(KfoldArgs),
    /// Score predicted boxes against ground truth.
    Evaluate(EvaluateArgs),
    /// Build a ROC curve from comparison scores.
    Roc(RocArgs),
    /// Dump the oriented anchor grid.
    Anchors(AnchorsArgs),
}

#[derive(Debug, Args)]
pub struct AugmentArgs {
    #[arg(long)]
    pub annotations: PathBuf,
    #[arg(long)]
    pub images: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Comma-separated degrees, e.g. "-30,30".
    #[arg(long, allow_hyphen_values = true)]
    pub angles: Option<String>,
    #[arg(long, default_value_t = DEFAULT_FILL)]
    pub fill: u8,
}

#[derive(Debug, Args)]
pub struct SplitArgs {
    #[arg(long)]
    pub annotations: PathBuf,
    #[arg(long, default_value = "0.8,0.1,0.1")]
    pub ratios: String,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct KfoldArgs {
    #[arg(long)]
    pub annotations: PathBuf,
    #[arg(long, default_value_t = DEFAULT_FOLDS)]
    pub k: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub gt: PathBuf,
    #[arg(long)]
    pub pred: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = NIST_TOLERANCE_PX)]
    pub tolerance: f64,
    #[arg(long)]
    pub plots: bool,
}

#[derive(Debug, Args)]
pub struct RocArgs {
    #[arg(long)]
    pub scores: PathBuf,
    #[arg(long, default_value_t = 0.001)]
    pub target_far: f64,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub plots: bool,
}

#[derive(Debug, Args)]
pub struct AnchorsArgs {
    /// Feature-map size as ROWSxCOLS.
    #[arg(long)]
    pub grid: String,
    #[arg(long)]
    pub stride: Option<f64>,
    /// JSON anchor configuration; orientations in degrees.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// CSV destination; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn run(cli: Cli) -> CliResult<()> {
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(jobs) = cli.jobs {
        if jobs == 0 {
            return Err(CliError::input("--jobs must be at least 1"));
        }
        pool = pool.num_threads(jobs);
    }
    let pool = pool
        .build()
        .map_err(|e| CliError::Io(format!("cannot start worker pool: {e}")))?;
    pool.install(|| match cli.command {
        Command::Augment(a) => cmd_augment(&a),
        Command::Split(a) => cmd_split(&a),
        Command::Kfold(a) => cmd_kfold(&a),
        Command::Evaluate(a) => cmd_evaluate(&a),
        Command::Roc(a) => cmd_roc(&a),
        Command::Anchors(a) => cmd_anchors(&a),
    })
}

fn create_dir(dir: &Path) -> CliResult<()> {
    fs::create_dir_all(dir).map_err(|e| error::io_err(dir, e))
}

fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> CliResult<()> {
    fs::write(path, contents).map_err(|e| error::io_err(path, e))
}

fn parse_list(text: &str, what: &str) -> CliResult<Vec<f64>> {
    text.split(',')
        .map(|v| {
            v.trim()
                .parse::<f64>()
                .ok()
                .filter(|x| x.is_finite())
                .ok_or_else(|| CliError::input(format!("invalid {what} value `{v}`")))
        })
        .collect()
}

fn id_list(ids: &[String]) -> String {
    ids.iter().map(|id| format!("{id}\n")).collect()
}

pub fn cmd_augment(args: &AugmentArgs) -> CliResult<()> {
    let records = dataio::parse_annotations(&args.annotations)?;
    let angles = match &args.angles {
        Some(text) => parse_list(text, "angle")?,
        None => DEFAULT_ANGLES.to_vec(),
    };
    if let Some(r) = records
        .iter()
        .find(|r| r.provenance != Provenance::Bonafide)
    {
        return Err(CliError::input(format!(
            "record `{}` is already augmented; pass bonafide records only",
            r.image
        )));
    }
    create_dir(&args.out)?;
    let augmented =
        augment::augment_dataset(&records, &args.images, &angles, &args.out, args.fill)?;
    for r in &records {
        let (src, dst) = (args.images.join(&r.image), args.out.join(&r.image));
        if src != dst {
            if let Some(parent) = dst.parent() {
                create_dir(parent)?;
            }
            fs::copy(&src, &dst).map_err(|e| error::io_err(&src, e))?;
        }
    }
    let mut all = records.clone();
    all.extend(augmented.iter().cloned());
    dataio::write_annotations(&args.out.join("annotations.jsonl"), &all)?;
    println!(
        "bonafide={} augmented={} total={}",
        records.len(),
        augmented.len(),
        all.len()
    );
    Ok(())
}

pub fn cmd_split(args: &SplitArgs) -> CliResult<()> {
    let ratios = parse_list(&args.ratios, "ratio")?;
    let ratios: [f64; 3] = ratios
        .try_into()
        .map_err(|_| CliError::input("--ratios needs exactly three values"))?;
    let records = dataio::parse_annotations(&args.annotations)?;
    let split = dataio::split_dataset(&records, ratios, args.seed)?;
    create_dir(&args.out)?;
    write_file(&args.out.join("train.txt"), id_list(&split.train))?;
    write_file(&args.out.join("validation.txt"), id_list(&split.validation))?;
    write_file(&args.out.join("test.txt"), id_list(&split.test))?;
    println!(
        "train={} validation={} test={}",
        split.train.len(),
        split.validation.len(),
        split.test.len()
    );
    Ok(())
}

pub fn cmd_kfold(args: &KfoldArgs) -> CliResult<()> {
    let records = dataio::parse_annotations(&args.annotations)?;
    let folds = dataio::kfold(&records, args.k, args.seed)?;
    create_dir(&args.out)?;
    let ids =
        |idx: &[usize]| -> Vec<String> { idx.iter().map(|&i| records[i].image.clone()).collect() };
    for (i, fold) in folds.iter().enumerate() {
        let n = i + 1;
        write_file(
            &args.out.join(format!("fold_{n:02}_train.txt")),
            id_list(&ids(&fold.train)),
        )?;
        write_file(
            &args.out.join(format!("fold_{n:02}_test.txt")),
            id_list(&ids(&fold.test)),
        )?;
    }
    let sizes: Vec<String> = folds.iter().map(|f| f.test.len().to_string()).collect();
    println!("folds={} test_sizes={}", folds.len(), sizes.join(","));
    Ok(())
}

pub fn cmd_evaluate(args: &EvaluateArgs) -> CliResult<()> {
    if !(args.tolerance.is_finite() && args.tolerance >= 0.0) {
        return Err(CliError::input("--tolerance must be a non-negative number"));
    }
    let gt = dataio::parse_annotations(&args.gt)?;
    let pred = dataio::parse_annotations(&args.pred)?;
    let report = evaluate::evaluate(&gt, &pred, args.tolerance)?;
    create_dir(&args.out)?;

    let summary_json = serde_json::to_string_pretty(&report.summary).expect("summary serializes");
    write_file(&args.out.join("report.json"), summary_json + "\n")?;

    let details_path = args.out.join("details.csv");
    let mut w =
        csv::Writer::from_path(&details_path).map_err(|e| error::io_err(&details_path, e))?;
    for row in &report.rows {
        w.serialize(row)
            .map_err(|e| error::io_err(&details_path, e))?;
    }
    w.flush().map_err(|e| error::io_err(&details_path, e))?;

    if args.plots {
        let matched: Vec<&evaluate::DetailRow> = report
            .rows
            .iter()
            .filter(|r| r.pred_index.is_some())
            .collect();
        type Pick = fn(&evaluate::DetailRow) -> Option<f64>;
        let sides: [(&str, Pick); 4] = [
            ("left", |r| r.left),
            ("right", |r| r.right),
            ("top", |r| r.top),
            ("bottom", |r| r.bottom),
        ];
        for (name, pick) in sides {
            let values: Vec<f64> = matched.iter().filter_map(|r| pick(r)).collect();
            let summary = metrics::summarize_distribution(&values, PLOT_BINS)?;
            let svg = svg::histogram(&format!("{name} side error"), "signed error (px)", &summary);
            write_file(&args.out.join(format!("hist_{name}_error.svg")), svg)?;
        }
        let angles: Vec<f64> = matched.iter().filter_map(|r| r.angle_error_deg).collect();
        let summary = metrics::summarize_distribution(&angles, PLOT_BINS)?;
        write_file(
            &args.out.join("hist_angle_error.svg"),
            svg::histogram("angle error", "|error| (deg)", &summary),
        )?;
        write_file(
            &args.out.join("boxplot_eap.svg"),
            svg::boxplot("error in angle prediction", "deg", &summary.boxplot),
        )?;
    }

    let s = &report.summary;
    println!(
        "images={} fingerprints={} matched={} unmatched={}",
        s.images, s.gt_fingerprints, s.matched, s.unmatched
    );
    println!(
        "MAE left={:.4} right={:.4} top={:.4} bottom={:.4}",
        s.mae.left.mae, s.mae.right.mae, s.mae.top.mae, s.mae.bottom.mae
    );
    println!("EAP mean={:.4} std={:.4}", s.eap_mean_deg, s.eap_std_deg);
    println!(
        "label_accuracy={:.4} hamming_loss={:.4}",
        s.label_accuracy, s.hamming_loss
    );
    println!(
        "nist_pass_rate={:.4} tolerance={}",
        s.nist_pass_rate, s.tolerance_px
    );
    Ok(())
}

#[derive(Debug, Deserialize)]
struct ScoreRow {
    probe_id: String,
    gallery_id: String,
    score: f64,
    mated: u8,
}

/// Reads `probe_id,gallery_id,score,mated` rows.
pub fn read_scores(path: &Path) -> CliResult<ScoreSet> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| match e.kind() {
        csv::ErrorKind::Io(_) => error::io_err(path, e),
        _ => CliError::input(format!("{}: {e}", path.display())),
    })?;
    let headers = reader
        .headers()
        .map_err(|e| CliError::input(format!("{}: {e}", path.display())))?
        .clone();
    if headers.iter().collect::<Vec<_>>() != ["probe_id", "gallery_id", "score", "mated"] {
        return Err(CliError::input(format!(
            "{}: expected header probe_id,gallery_id,score,mated",
            path.display()
        )));
    }
    let mut set = ScoreSet::default();
    for (i, row) in reader.deserialize::<ScoreRow>().enumerate() {
        let line = i + 2;
        let row =
            row.map_err(|e| CliError::input(format!("{} line {line}: {e}", path.display())))?;
        if !row.score.is_finite() {
            return Err(CliError::input(format!(
                "{} line {line}: score is not finite",
                path.display()
            )));
        }
        let c = Comparison {
            probe_id: row.probe_id,
            gallery_id: row.gallery_id,
            score: row.score,
        };
        match row.mated {
            1 => set.genuine.push(c),
            0 => set.impostor.push(c),
            m => {
                return Err(CliError::input(format!(
                    "{} line {line}: mated must be 0 or 1, got {m}",
                    path.display()
                )))
            }
        }
    }
    Ok(set)
}

pub fn cmd_roc(args: &RocArgs) -> CliResult<()> {
    if !(0.0..=1.0).contains(&args.target_far) {
        return Err(CliError::input("--target-far must lie in [0, 1]"));
    }
    let scores = read_scores(&args.scores)?;
    let curve = metrics::roc(&scores)?;
    create_dir(&args.out)?;

    let path = args.out.join("roc.csv");
    let mut w = csv::Writer::from_path(&path).map_err(|e| error::io_err(&path, e))?;
    for p in &curve.points {
        w.serialize(p).map_err(|e| error::io_err(&path, e))?;
    }
    w.flush().map_err(|e| error::io_err(&path, e))?;
    if args.plots {
        write_file(
            &args.out.join("roc.svg"),
            svg::roc_curve("ROC", &curve.points),
        )?;
    }
    let tar = metrics::tar_at_far(&curve, args.target_far);
    println!(
        "genuine={} impostor={} points={}",
        scores.genuine.len(),
        scores.impostor.len(),
        curve.points.len()
    );
    println!("TAR@FAR{} = {tar:.4}", args.target_far);
    Ok(())
}

/// Anchor configuration file; every field falls back to the defaults.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct AnchorConfigFile {
    orientations_deg: Option<Vec<f64>>,
    aspect_ratios: Option<Vec<f64>>,
    scales: Option<Vec<f64>>,
    stride: Option<f64>,
    positive_iou: Option<f64>,
    negative_iou: Option<f64>,
}

fn load_anchor_config(path: Option<&Path>) -> CliResult<AnchorConfig> {
    let mut cfg = AnchorConfig::default();
    let Some(path) = path else {
        return Ok(cfg);
    };
    let text = fs::read_to_string(path).map_err(|e| error::io_err(path, e))?;
    let file: AnchorConfigFile = serde_json::from_str(&text)
        .map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
    if let Some(o) = file.orientations_deg {
        cfg.orientations = o.into_iter().map(f64::to_radians).collect();
    }
    if let Some(r) = file.aspect_ratios {
        cfg.aspect_ratios = r;
    }
    if let Some(s) = file.scales {
        cfg.scales = s;
    }
    if let Some(s) = file.stride {
        cfg.stride = s;
    }
    if let Some(p) = file.positive_iou {
        cfg.positive_iou = p;
    }
    if let Some(n) = file.negative_iou {
        cfg.negative_iou = n;
    }
    Ok(cfg)
}

/// Parses `RxC`.
pub fn parse_grid(text: &str) -> CliResult<(usize, usize)> {
    let bad = || CliError::input(format!("malformed grid `{text}`, expected ROWSxCOLS"));
    let (r, c) = text.split_once(['x', 'X']).ok_or_else(bad)?;
    let rows: usize = r.trim().parse().map_err(|_| bad())?;
    let cols: usize = c.trim().parse().map_err(|_| bad())?;
    if rows == 0 || cols == 0 {
        return Err(bad());
    }
    Ok((rows, cols))
}

pub fn cmd_anchors(args: &AnchorsArgs) -> CliResult<()> {
    let (rows, cols) = parse_grid(&args.grid)?;
    let mut cfg = load_anchor_config(args.config.as_deref())?;
    if let Some(stride) = args.stride {
        cfg.stride = stride;
    }
    let anchors = generate_anchors(rows, cols, &cfg)?;

    let mut csv_text = String::from("cx,cy,w,h,theta_deg\n");
    for a in &anchors {
        let b = a.bbox;
        csv_text.push_str(&format!(
            "{},{},{},{},{}\n",
            b.cx(),
            b.cy(),
            b.w(),
            b.h(),
            b.theta_deg()
        ));
    }
    println!("anchors={}", anchors.len());
    match &args.out {
        Some(path) => write_file(path, csv_text)?,
        None => print!("{csv_text}"),
    }
    Ok(())
}
