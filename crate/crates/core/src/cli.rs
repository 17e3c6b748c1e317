//! The `ptseg` command line.
//!
//! Exit codes: 0 on success, 1 for usage or validation errors, 2 for
//! runtime and data errors. Results go to files or stdout, diagnostics to
//! stderr.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

use crate::blocking::SamplerConfig;
use crate::checks::gradient_suite;
use crate::config::KeyValues;
use crate::error::{Error, Result};
use crate::eval::{parse_report_matrices, pool_rows, render_report, ConfusionMatrix, ReportRow};
use crate::models::{ModelConfig, ModelParams, Variant};
use crate::pointcloud::{
    depth_to_cloud, load_cloud, save_cloud, synth_scene, write_ascii, CameraIntrinsics, CloudFormat, DepthMap,
    LabeledPointCloud, SceneRecipe, DEFAULT_FOCAL, DEFAULT_MAX_DEPTH,
};
use crate::tensor::{Precision, Real};
use crate::training::{predict_scene, EpochReport, TrainConfig, Trainer};

/// Class colors for the 13 indoor classes, indexed by label.
pub const DEFAULT_PALETTE: [[u8; 3]; 13] = [
    [0, 255, 0],     // ceiling
    [0, 0, 255],     // floor
    [0, 255, 255],   // wall
    [255, 255, 0],   // beam
    [255, 0, 255],   // column
    [100, 100, 255], // window
    [200, 200, 100], // door
    [170, 120, 200], // table
    [255, 0, 0],     // chair
    [200, 100, 100], // sofa
    [10, 200, 100],  // bookcase
    [200, 200, 200], // board
    [50, 50, 50],    // clutter
];

const LABELS_HEADER: &str = "# pcsg-labels";

#[derive(Parser, Debug)]
#[command(name = "ptseg", version, about = "Point-cloud semantic segmentation with block context")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a synthetic labeled room.
    Synth(SynthArgs),
    /// Back-project a depth map with per-pixel labels into a cloud.
    Project(ProjectArgs),
    /// Train a model and write a checkpoint directory.
    Train(TrainArgs),
    /// Label every point of a cloud with a trained model.
    Predict(PredictArgs),
    /// Score predicted labels against ground truth.
    Eval(EvalArgs),
    /// Finite-difference check of every operator and architecture.
    Gradcheck(GradcheckArgs),
    /// Pool several eval outputs into one table.
    Report(ReportArgs),
    /// Write a cloud colored by predicted labels.
    Export(ExportArgs),
}

#[derive(Args, Debug)]
struct SynthArgs {
    /// Recipe file of `key = value` lines.
    #[arg(long)]
    recipe: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    /// `binary` or `ascii`; defaults from the file extension.
    #[arg(long)]
    format: Option<CloudFormat>,
    #[arg(long)]
    seed: Option<u64>,
    /// Recipe override, repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Args, Debug)]
struct ProjectArgs {
    /// Text grid of depths in meters, one image row per line.
    #[arg(long)]
    depth: PathBuf,
    /// Text grid of class labels with the same shape.
    #[arg(long)]
    semantic: PathBuf,
    /// Text grid of `r,g,b` pixels.
    #[arg(long)]
    color: Option<PathBuf>,
    /// Comma-separated class names.
    #[arg(long, conflicts_with = "num_classes")]
    classes: Option<String>,
    #[arg(long)]
    num_classes: Option<usize>,
    #[arg(long, default_value_t = DEFAULT_FOCAL)]
    focal: f64,
    #[arg(long)]
    cx: Option<f64>,
    #[arg(long)]
    cy: Option<f64>,
    #[arg(long, default_value_t = DEFAULT_MAX_DEPTH)]
    max_depth: f64,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    format: Option<CloudFormat>,
}

#[derive(Args, Debug, Default)]
struct SamplerFlags {
    #[arg(long)]
    block_size: Option<f64>,
    #[arg(long)]
    stride: Option<f64>,
    #[arg(long)]
    points_per_block: Option<usize>,
    /// Comma-separated window radii.
    #[arg(long)]
    radii: Option<String>,
    #[arg(long)]
    min_points: Option<usize>,
}

#[derive(Args, Debug)]
struct TrainArgs {
    /// baseline, ms_cu or g_rcu.
    #[arg(long)]
    variant: Option<Variant>,
    /// Training clouds, repeatable.
    #[arg(long, required = true)]
    data: Vec<PathBuf>,
    #[arg(long)]
    config: Option<PathBuf>,
    /// Checkpoint directory.
    #[arg(long)]
    out: PathBuf,
    /// Continue from the state saved in `--out`.
    #[arg(long)]
    resume: bool,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    batch_groups: Option<usize>,
    #[command(flatten)]
    sampler: SamplerFlags,
    /// Any config key, repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Number of folds; clouds are grouped by their parent directory name.
    #[arg(long, requires = "fold")]
    folds: Option<usize>,
    /// Held-out fold; training uses the others.
    #[arg(long, requires = "folds")]
    fold: Option<usize>,
}

#[derive(Args, Debug)]
struct PredictArgs {
    /// Checkpoint directory written by `train`.
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    data: PathBuf,
    /// Labels file.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    sampler: SamplerFlags,
}

#[derive(Args, Debug)]
struct EvalArgs {
    /// Labels files, paired in order with `--gt`.
    #[arg(long, required = true)]
    pred: Vec<PathBuf>,
    #[arg(long, required = true)]
    gt: Vec<PathBuf>,
    /// Model name in the report.
    #[arg(long, default_value = "model")]
    name: String,
    /// Report file; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct GradcheckArgs {
    /// Run the whole suite.
    #[arg(long, conflicts_with = "op")]
    all: bool,
    /// Run only the named check.
    #[arg(long)]
    op: Option<String>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args, Debug)]
struct ReportArgs {
    /// Eval outputs; sections with the same model name are pooled.
    #[arg(long = "input", required = true)]
    inputs: Vec<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct ExportArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    labels: PathBuf,
    /// One `r g b` triple per line, indexed by label.
    #[arg(long)]
    palette: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

/// Parses `argv` (program name first) and runs one subcommand.
pub fn run<I, S>(argv: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match dispatch(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("ptseg: {e}");
            if e.is_validation() {
                1
            } else {
                2
            }
        }
    }
}

fn dispatch(cmd: Command) -> Result<()> {
    match cmd {
        Command::Synth(a) => synth(a),
        Command::Project(a) => project(a),
        Command::Train(a) => match Precision::from_env()? {
            Precision::F32 => train::<f32>(a),
            Precision::F64 => train::<f64>(a),
        },
        Command::Predict(a) => match Precision::from_env()? {
            Precision::F32 => predict::<f32>(a),
            Precision::F64 => predict::<f64>(a),
        },
        Command::Eval(a) => eval(a),
        Command::Gradcheck(a) => gradcheck(a),
        Command::Report(a) => report(a),
        Command::Export(a) => export(a),
    }
}

fn apply_sets(kv: &mut KeyValues, sets: &[String]) -> Result<()> {
    for s in sets {
        let (k, v) = s
            .split_once('=')
            .ok_or_else(|| Error::Argument(format!("--set expects KEY=VALUE, got {s:?}")))?;
        kv.set(k.trim(), v.trim());
    }
    Ok(())
}

fn read_kv(path: Option<&Path>) -> Result<KeyValues> {
    match path {
        None => Ok(KeyValues::default()),
        // a missing config file is a usage problem, not a data problem
        Some(p) if !p.exists() => Err(Error::Argument(format!("config file {} does not exist", p.display()))),
        Some(p) => KeyValues::read(p),
    }
}

fn output_format(path: &Path, f: Option<CloudFormat>) -> CloudFormat {
    f.unwrap_or_else(|| CloudFormat::for_path(path))
}

fn synth(a: SynthArgs) -> Result<()> {
    let mut kv = read_kv(a.recipe.as_deref())?;
    apply_sets(&mut kv, &a.set)?;
    if let Some(s) = a.seed {
        kv.set("seed", s);
    }
    let recipe = SceneRecipe::from_key_values(kv)?;
    let cloud = synth_scene(&recipe)?;
    save_cloud(&a.out, &cloud, output_format(&a.out, a.format))?;
    println!("{} points, digest {}", cloud.len(), cloud.digest());
    Ok(())
}

/// Reads a whitespace-separated grid, one image row per line.
fn read_grid<T>(path: &Path, parse: impl Fn(&str) -> Option<T>) -> Result<(usize, usize, Vec<T>)> {
    let text = fs::read_to_string(path)?;
    let mut width = None;
    let mut values = Vec::new();
    let mut height = 0;
    for (n, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let row: Vec<T> = line
            .split_whitespace()
            .map(|t| parse(t).ok_or_else(|| Error::Data(format!("{}:{}: bad value {t:?}", path.display(), n + 1))))
            .collect::<Result<_>>()?;
        match width {
            None => width = Some(row.len()),
            Some(w) if w != row.len() => {
                return Err(Error::Dimension(format!(
                    "{}:{}: row has {} values, expected {w}",
                    path.display(),
                    n + 1,
                    row.len()
                )))
            }
            _ => {}
        }
        values.extend(row);
        height += 1;
    }
    Ok((width.unwrap_or(0), height, values))
}

fn parse_rgb(t: &str) -> Option<[u8; 3]> {
    let v: Vec<u8> = t.split(',').map(|c| c.parse().ok()).collect::<Option<_>>()?;
    v.try_into().ok()
}

fn project(a: ProjectArgs) -> Result<()> {
    let names = match (&a.classes, a.num_classes) {
        (Some(c), _) => c.split(',').map(|s| s.trim().to_string()).collect(),
        (None, Some(m)) => LabeledPointCloud::default_class_names(m),
        (None, None) => return Err(Error::Argument("give --classes or --num-classes".into())),
    };
    let (w, h, depth) = read_grid(&a.depth, |t| t.parse::<f32>().ok())?;
    let (sw, sh, semantic) = read_grid(&a.semantic, |t| t.parse::<usize>().ok())?;
    if (sw, sh) != (w, h) {
        return Err(Error::Dimension(format!("semantic grid is {sw}x{sh}, depth grid {w}x{h}")));
    }
    let colors = match &a.color {
        None => None,
        Some(p) => {
            let (cw, ch, c) = read_grid(p, parse_rgb)?;
            if (cw, ch) != (w, h) {
                return Err(Error::Dimension(format!("color grid is {cw}x{ch}, depth grid {w}x{h}")));
            }
            Some(c)
        }
    };
    let k = CameraIntrinsics::new(
        a.focal,
        a.focal,
        a.cx.unwrap_or(w as f64 / 2.0),
        a.cy.unwrap_or(h as f64 / 2.0),
        w,
        h,
    )?;
    let cloud = depth_to_cloud(&DepthMap::new(w, h, depth)?, &semantic, colors.as_deref(), names, &k, a.max_depth)?;
    save_cloud(&a.out, &cloud, output_format(&a.out, a.format))?;
    println!("{} points, digest {}", cloud.len(), cloud.digest());
    Ok(())
}

fn sampler_flags(kv: &mut KeyValues, f: &SamplerFlags, stride_key: &str) {
    if let Some(v) = f.block_size {
        kv.set("block_size", v);
    }
    if let Some(v) = f.stride {
        kv.set(stride_key, v);
    }
    if let Some(v) = f.points_per_block {
        kv.set("points_per_block", v);
    }
    if let Some(v) = &f.radii {
        kv.set("radii", v);
    }
    if let Some(v) = f.min_points {
        kv.set("min_points", v);
    }
}

/// Loads clouds tagged with their parent directory's name.
fn load_tagged(paths: &[PathBuf]) -> Result<Vec<LabeledPointCloud>> {
    paths
        .iter()
        .map(|p| {
            let c = load_cloud(p, None)?;
            let tag = p.parent().and_then(Path::file_name).and_then(|n| n.to_str());
            Ok(match tag {
                Some(t) if !t.is_empty() => c.with_tag(t),
                _ => c,
            })
        })
        .collect()
}

fn print_epoch(r: &EpochReport) {
    println!("epoch {} loss {:.6} accuracy {:.4} seconds {:.2}", r.epoch, r.loss, r.accuracy, r.seconds);
}

fn train<T: Real>(a: TrainArgs) -> Result<()> {
    if a.resume {
        let overridden = a.variant.is_some()
            || a.config.is_some()
            || a.epochs.is_some()
            || a.lr.is_some()
            || a.seed.is_some()
            || a.batch_groups.is_some()
            || !a.set.is_empty();
        if overridden {
            return Err(Error::Argument("--resume takes its configuration from the checkpoint".into()));
        }
    }
    let mut kv = read_kv(a.config.as_deref())?;
    for (key, v) in [
        ("epochs", a.epochs.map(|v| v.to_string())),
        ("lr", a.lr.map(|v| v.to_string())),
        ("seed", a.seed.map(|v| v.to_string())),
        ("batch_groups", a.batch_groups.map(|v| v.to_string())),
        ("variant", a.variant.map(|v| v.to_string())),
    ] {
        if let Some(v) = v {
            kv.set(key, v);
        }
    }
    sampler_flags(&mut kv, &a.sampler, "train_stride");
    apply_sets(&mut kv, &a.set)?;
    let cfg = TrainConfig::from_key_values(kv, Variant::Baseline)?;

    let mut clouds = load_tagged(&a.data)?;
    if let (Some(k), Some(fold)) = (a.folds, a.fold) {
        let (train_idx, test_idx) = crate::eval::kfold_split(&clouds, k, fold)?;
        let held: Vec<String> = test_idx.iter().map(|&i| a.data[i].display().to_string()).collect();
        eprintln!("fold {fold}/{k}: training on {} clouds, holding out {}", train_idx.len(), held.join(" "));
        let mut keep = vec![false; clouds.len()];
        train_idx.iter().for_each(|&i| keep[i] = true);
        let mut it = keep.into_iter();
        clouds.retain(|_| it.next().unwrap_or(false));
    }

    let mut trainer = if a.resume {
        Trainer::<T>::resume(clouds, &a.out)?
    } else {
        Trainer::<T>::new(clouds, cfg)?
    };
    for r in trainer.reports() {
        print_epoch(r);
    }
    trainer.run(Some(&a.out), print_epoch)?;
    trainer.save(&a.out)
}

fn load_model<T: Real>(dir: &Path) -> Result<(ModelParams<T>, SamplerConfig)> {
    let cfg = ModelConfig::from_manifest(&fs::read_to_string(dir.join("model.manifest"))?)?;
    let params = ModelParams::read(cfg, fs::File::open(dir.join("model.ckpt"))?)?;
    let train_cfg = TrainConfig::from_key_values(KeyValues::read(&dir.join("train.cfg"))?, Variant::Baseline)?;
    Ok((params, train_cfg.sampler))
}

fn predict<T: Real>(a: PredictArgs) -> Result<()> {
    let (params, mut sampler) = load_model::<T>(&a.model)?;
    let mut kv = KeyValues::default();
    sampler_flags(&mut kv, &a.sampler, "test_stride");
    sampler.take_from(&mut kv)?;
    kv.finish()?;
    sampler.validate()?;
    let cloud = load_cloud(&a.data, None)?;
    let labels = predict_scene(&cloud, &params, &sampler, a.seed)?;
    write_labels(&a.out, &cloud, &labels)?;
    let correct = labels.iter().zip(cloud.labels()).filter(|(p, g)| p == g).count();
    eprintln!("labeled {} points ({} agree with the stored labels)", labels.len(), correct);
    Ok(())
}

/// Writes the labels file: a header naming the cloud's digest, then one
/// label per line.
pub fn write_labels(path: &Path, cloud: &LabeledPointCloud, labels: &[usize]) -> Result<()> {
    if labels.len() != cloud.len() {
        return Err(Error::Dimension(format!("{} labels for {} points", labels.len(), cloud.len())));
    }
    let mut s = format!("{LABELS_HEADER} digest={} n={}\n", cloud.digest(), labels.len());
    for l in labels {
        let _ = writeln!(s, "{l}");
    }
    fs::write(path, s)?;
    Ok(())
}

/// Returns `(digest, labels)`.
pub fn read_labels(path: &Path) -> Result<(String, Vec<usize>)> {
    let text = fs::read_to_string(path)?;
    let bad = |offset: usize, message: String| Error::Format { offset: offset as u64, message };
    let mut lines = text.lines();
    let header = lines.next().unwrap_or("");
    let fields = header
        .strip_prefix(LABELS_HEADER)
        .ok_or_else(|| bad(0, format!("{} is not a labels file", path.display())))?;
    let (mut digest, mut n) = (None, None);
    for f in fields.split_whitespace() {
        if let Some(d) = f.strip_prefix("digest=") {
            digest = Some(d.to_string());
        } else if let Some(v) = f.strip_prefix("n=") {
            n = v.parse::<usize>().ok();
        }
    }
    let (digest, n) = digest.zip(n).ok_or_else(|| bad(0, "labels header lacks digest or n".into()))?;
    let mut offset = header.len() + 1;
    let mut labels = Vec::with_capacity(n);
    for line in lines {
        let l = line.trim();
        if !l.is_empty() {
            labels.push(l.parse().map_err(|_| bad(offset, format!("bad label {l:?}")))?);
        }
        offset += line.len() + 1;
    }
    if labels.len() != n {
        return Err(Error::Data(format!("labels file declares {n} labels but holds {}", labels.len())));
    }
    Ok((digest, labels))
}

fn eval(a: EvalArgs) -> Result<()> {
    if a.pred.len() != a.gt.len() {
        return Err(Error::Argument(format!("{} --pred files for {} --gt files", a.pred.len(), a.gt.len())));
    }
    let mut matrix: Option<ConfusionMatrix> = None;
    for (p, g) in a.pred.iter().zip(&a.gt) {
        let cloud = load_cloud(g, None)?;
        let (digest, labels) = read_labels(p)?;
        if digest != cloud.digest() {
            return Err(Error::Data(format!("{} was predicted for a different cloud than {}", p.display(), g.display())));
        }
        let m = matrix.get_or_insert_with(|| ConfusionMatrix::new(cloud.class_names().to_vec()));
        if m.class_names() != cloud.class_names() {
            return Err(Error::Data(format!("{} has a different class list", g.display())));
        }
        m.record(&labels, cloud.labels())?;
    }
    let row = ReportRow { model: a.name, matrix: matrix.expect("at least one pair") };
    emit(a.out.as_deref(), &render_report(&[row])?)
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => fs::write(p, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

fn report(a: ReportArgs) -> Result<()> {
    let mut rows = Vec::new();
    for p in &a.inputs {
        rows.extend(parse_report_matrices(&fs::read_to_string(p)?)?);
    }
    emit(a.out.as_deref(), &render_report(&pool_rows(rows)?)?)
}

fn gradcheck(a: GradcheckArgs) -> Result<()> {
    // the checks always run in f64; asking for anything else is refused
    if std::env::var_os("PTSEG_PRECISION").is_some() && Precision::from_env()? != Precision::F64 {
        return Err(Error::Argument("gradcheck requires PTSEG_PRECISION=f64".into()));
    }
    if !a.all && a.op.is_none() {
        return Err(Error::Argument("give --all or --op NAME".into()));
    }
    let start = Instant::now();
    let suite = gradient_suite(a.seed)?;
    let picked: Vec<_> = suite.iter().filter(|e| a.op.as_ref().map_or(true, |o| *o == e.name)).collect();
    if picked.is_empty() {
        let names: Vec<&str> = suite.iter().map(|e| e.name.as_str()).collect();
        return Err(Error::Argument(format!("unknown check; available: {}", names.join(", "))));
    }
    let mut failed = 0;
    for e in &picked {
        let r = &e.report;
        let status = if r.passed() { "ok" } else { "FAIL" };
        failed += usize::from(!r.passed());
        println!(
            "{:<24} max_rel_err {:.3e} compared {} kinks {} {status}",
            e.name,
            r.worst(),
            r.compared.iter().sum::<usize>(),
            r.kinks.iter().sum::<usize>()
        );
    }
    eprintln!("{} checks in {:.1}s", picked.len(), start.elapsed().as_secs_f64());
    if failed > 0 {
        return Err(Error::State(format!("{failed} gradient checks failed")));
    }
    Ok(())
}

fn read_palette(path: &Path) -> Result<Vec<[u8; 3]>> {
    let text = fs::read_to_string(path)?;
    text.lines()
        .map(|l| l.split('#').next().unwrap_or("").trim())
        .filter(|l| !l.is_empty())
        .map(|l| {
            let v: Vec<u8> = l
                .split(|c: char| c == ',' || c.is_whitespace())
                .filter(|t| !t.is_empty())
                .map(|t| t.parse().ok())
                .collect::<Option<_>>()
                .ok_or_else(|| Error::Argument(format!("bad palette line {l:?}")))?;
            v.try_into().map_err(|_| Error::Argument(format!("palette line {l:?} needs three values")))
        })
        .collect()
}

/// Writes `cloud` as ASCII with each point's color replaced by its label's
/// palette entry and its label replaced by `labels`.
pub fn export_colored(cloud: &LabeledPointCloud, labels: &[usize], palette: &[[u8; 3]], path: &Path) -> Result<()> {
    if palette.len() < cloud.num_classes() {
        return Err(Error::Argument(format!(
            "palette has {} colors for {} classes",
            palette.len(),
            cloud.num_classes()
        )));
    }
    let colored = cloud.relabeled(labels.to_vec())?;
    let colors = labels.iter().map(|&l| palette[l]).collect();
    let colored = colored.recolored(Some(colors))?;
    let mut buf = Vec::new();
    write_ascii(&mut buf, &colored)?;
    fs::write(path, buf)?;
    Ok(())
}

fn export(a: ExportArgs) -> Result<()> {
    let cloud = load_cloud(&a.data, None)?;
    let (digest, labels) = read_labels(&a.labels)?;
    if digest != cloud.digest() {
        return Err(Error::Data(format!("{} was predicted for a different cloud", a.labels.display())));
    }
    let palette = match &a.palette {
        Some(p) => read_palette(p)?,
        None => DEFAULT_PALETTE.to_vec(),
    };
    export_colored(&cloud, &labels, &palette, &a.out)
}
