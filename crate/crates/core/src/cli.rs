//! The `gfs3d` command line.
//!
//! Exit codes: 0 success, 2 usage or contract violation, 3 I/O failure.
//! Failures are reported on stderr as one JSON object. Every flag can be
//! set through a `GFS3D_*` environment variable.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bench::{build_split, summarize, ClassStats, CountMode, SplitSpec};
use crate::embed::{load_embeddings, save_embeddings, EmbeddingMatrix};
use crate::error::{Error, Result};
use crate::infill::{InfillConfig, PrototypeSource, DEFAULT_DELTA};
use crate::io::{
    create_dir, load_labels, save_labels, write_json, Manifest, Resolver, Role, SceneEntry,
    SCHEMA_VERSION,
};
use crate::metrics::{
    aggregate, mean_quality, pseudo_label_quality, summary, Aggregate, ConfusionMatrix,
    MetricSummary,
};
use crate::nbmix::{mix, BlockRecord, MixConfig, DEFAULT_BLOCKS, DEFAULT_MARGIN};
use crate::pipeline::{refine_scene, RefineConfig};
use crate::ply::{load_scene, save_scene, PlyFormat};
use crate::prototype::{
    load_prototypes, save_prototypes, support_prototypes_with, PrototypeSet, SupportSet,
    SupportShot,
};
use crate::scene::{voxelize, ClassSchema, PointCloudScene, VoxelConfig, DEFAULT_GRID_SIZE};
use crate::select::{SelectionConfig, DEFAULT_TAU};
use crate::sim::{simulate_corpus, CorpusConfig, NoiseSpec};

#[derive(Debug, Parser)]
#[command(
    name = "gfs3d",
    version,
    about = "Pseudo-label refinement and benchmark tooling for few-shot point cloud segmentation"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Filter raw predictions by prototype agreement, then infill unlabeled points.
    Refine(RefineArgs),
    /// Paste cropped support objects next to a base scene.
    Mix(MixArgs),
    /// Build a base/novel class split from occurrence statistics.
    Split(SplitArgs),
    /// Score predicted label files against ground truth.
    Eval(EvalArgs),
    /// Generate a synthetic corpus with noisy predictions and embeddings.
    Simulate(SimulateArgs),
    /// Count class occurrences and points over a manifest.
    Stats(StatsArgs),
    /// Grid-downsample a PLY scene.
    Voxelize(VoxelizeArgs),
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// Seed for every random choice; no other entropy is used.
    #[arg(long, env = "GFS3D_SEED", default_value_t = 0)]
    pub seed: u64,
    /// Worker threads for scene-level parallelism (0 = all cores). Output does not depend on it.
    #[arg(long, env = "GFS3D_JOBS", default_value_t = 0)]
    pub jobs: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PlyEncoding {
    Ascii,
    Binary,
}

impl From<PlyEncoding> for PlyFormat {
    fn from(e: PlyEncoding) -> Self {
        match e {
            PlyEncoding::Ascii => PlyFormat::Ascii,
            PlyEncoding::Binary => PlyFormat::BinaryLittleEndian,
        }
    }
}

#[derive(Debug, Args)]
pub struct RefineArgs {
    /// Manifest listing scenes, embeddings, raw predictions and support shots.
    #[arg(long, env = "GFS3D_MANIFEST")]
    pub manifest: PathBuf,
    /// Output directory for `<scene>.labels.txt`, `<scene>.selected.txt` and `report.json`.
    #[arg(long, env = "GFS3D_OUT")]
    pub out: PathBuf,
    /// Cosine threshold for keeping a predicted novel class [-1, 1]; default 0.6.
    #[arg(long, env = "GFS3D_TAU", default_value_t = DEFAULT_TAU)]
    pub tau: f64,
    /// Cosine threshold for infilling an unlabeled point [-1, 1]; default 0.9.
    #[arg(long, env = "GFS3D_DELTA", default_value_t = DEFAULT_DELTA)]
    pub delta: f64,
    /// Cached support prototypes; computed from the support shots when absent.
    #[arg(long, env = "GFS3D_PROTOTYPES")]
    pub prototypes: Option<PathBuf>,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct MixArgs {
    /// Manifest providing the base scene and the support shots.
    #[arg(long, env = "GFS3D_MANIFEST")]
    pub manifest: PathBuf,
    /// Name of the base scene in the manifest.
    #[arg(long)]
    pub scene: String,
    /// Label file replacing the base scene's PLY labels (for example refined labels).
    #[arg(long)]
    pub labels: Option<PathBuf>,
    /// Output PLY of the mixed scene.
    #[arg(long)]
    pub out: PathBuf,
    /// Optional JSON record of the inserted blocks.
    #[arg(long)]
    pub record: Option<PathBuf>,
    /// Number of support blocks inserted; default 3.
    #[arg(long, env = "GFS3D_BLOCKS", default_value_t = DEFAULT_BLOCKS)]
    pub blocks: usize,
    /// XY margin in meters around the support object when cropping; default 1.0.
    #[arg(long, env = "GFS3D_MARGIN", default_value_t = DEFAULT_MARGIN)]
    pub margin: f64,
    #[arg(long, value_enum, default_value_t = PlyEncoding::Binary)]
    pub format: PlyEncoding,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct SplitArgs {
    /// Statistics JSON from `stats`, or a plain object mapping class name to occurrence count.
    #[arg(long)]
    pub stats: PathBuf,
    /// Classes need strictly more occurrences than this to be kept; 100 for ScanNet200, 80 for ScanNet++.
    #[arg(long, env = "GFS3D_THRESHOLD")]
    pub threshold: u64,
    /// Number of most frequent retained classes that become base classes; 12 for both benchmarks.
    #[arg(long = "base", env = "GFS3D_BASE")]
    pub n_base: usize,
    /// Output schema JSON, usable as a manifest `schema`.
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Manifest with `ground_truth` label files for the evaluated scenes.
    #[arg(long, env = "GFS3D_MANIFEST")]
    pub manifest: PathBuf,
    /// Directory of `<scene>.labels.txt` files; repeat to average over runs.
    #[arg(long = "pred-dir")]
    pub pred_dirs: Vec<PathBuf>,
    /// Score the manifest's raw predictions instead.
    #[arg(long, conflicts_with = "pred_dirs")]
    pub raw: bool,
    /// Only scenes with this role; all train and test scenes by default.
    #[arg(long, value_enum)]
    pub role: Option<RoleArg>,
    /// Also write the report as JSON.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum RoleArg {
    Train,
    Test,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Output directory; receives `manifest.json`, `scenes/` and `support/`.
    #[arg(long)]
    pub out: PathBuf,
    /// Number of training rooms.
    #[arg(long, default_value_t = 4)]
    pub scenes: usize,
    /// Number of base classes (2..=12; the first two are floor and wall).
    #[arg(long = "base", default_value_t = 6)]
    pub n_base: usize,
    /// Number of novel classes (1..=24).
    #[arg(long = "novel", default_value_t = 6)]
    pub n_novel: usize,
    /// Support shots per novel class.
    #[arg(long, default_value_t = 1)]
    pub shots: usize,
    /// Embedding dimension.
    #[arg(long, default_value_t = 32)]
    pub dim: usize,
    /// Gaussian noise added to class directions before normalization.
    #[arg(long, default_value_t = 0.03)]
    pub sigma: f64,
    /// Probability that a point's feature comes from another class.
    #[arg(long, default_value_t = 0.0)]
    pub confusion: f64,
    /// Probability that a novel class is missing from the raw predictions.
    #[arg(long, default_value_t = 0.0)]
    pub p_miss: f64,
    /// Fraction of each predicted mask, closest to other classes, dropped to unlabeled.
    #[arg(long, default_value_t = 0.0)]
    pub erosion: f64,
    /// Per-point probability of a wrong predicted class.
    #[arg(long, default_value_t = 0.0)]
    pub flip: f64,
    /// Voxel size in meters; default 0.02, 0 disables.
    #[arg(long, env = "GFS3D_GRID_SIZE", default_value_t = DEFAULT_GRID_SIZE)]
    pub grid_size: f64,
    #[arg(long, value_enum, default_value_t = PlyEncoding::Binary)]
    pub format: PlyEncoding,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct StatsArgs {
    /// Manifest whose train and test scenes are counted, using `ground_truth` when present.
    #[arg(long, env = "GFS3D_MANIFEST")]
    pub manifest: PathBuf,
    /// `scenes` counts scenes containing a class, `instances` counts instance ids.
    #[arg(long, env = "GFS3D_COUNT_MODE", default_value = "scenes")]
    pub count_mode: CountMode,
    /// Output statistics JSON.
    #[arg(long)]
    pub out: PathBuf,
    /// Split schema to summarize the statistics against (prints the table).
    #[arg(long)]
    pub split: Option<PathBuf>,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct VoxelizeArgs {
    /// Input PLY scene.
    #[arg(long)]
    pub input: PathBuf,
    /// Output PLY scene.
    #[arg(long)]
    pub out: PathBuf,
    /// Voxel size in meters; default 0.02.
    #[arg(long, env = "GFS3D_GRID_SIZE", default_value_t = DEFAULT_GRID_SIZE)]
    pub grid_size: f64,
    #[arg(long, value_enum, default_value_t = PlyEncoding::Binary)]
    pub format: PlyEncoding,
    #[command(flatten)]
    pub common: Common,
}

/// Parses `args`, runs the command and returns the process exit code.
pub fn main_with<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            let report = serde_json::json!({
                "error": e.kind(),
                "message": e.to_string(),
                "path": e.path(),
            });
            eprintln!("{report}");
            if e.is_io() {
                3
            } else {
                2
            }
        }
    }
}

pub fn main() -> i32 {
    main_with(std::env::args_os())
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Refine(a) => with_jobs(a.common.jobs, || cmd_refine(&a)),
        Command::Mix(a) => cmd_mix(&a),
        Command::Split(a) => cmd_split(&a),
        Command::Eval(a) => with_jobs(a.common.jobs, || cmd_eval(&a)),
        Command::Simulate(a) => with_jobs(a.common.jobs, || cmd_simulate(&a)),
        Command::Stats(a) => with_jobs(a.common.jobs, || cmd_stats(&a)),
        Command::Voxelize(a) => with_jobs(a.common.jobs, || cmd_voxelize(&a)),
    }
}

fn with_jobs<T: Send>(jobs: usize, f: impl FnOnce() -> Result<T> + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::Config(format!("cannot start {jobs} worker threads: {e}")))?;
    pool.install(f)
}

fn labels_name(scene: &str) -> String {
    format!("{scene}.labels.txt")
}

/// Train and test entries, in manifest order.
fn scene_entries(m: &Manifest, role: Option<RoleArg>) -> Vec<&SceneEntry> {
    m.scenes
        .iter()
        .filter(|e| match role {
            None => e.role != Role::Support,
            Some(RoleArg::Train) => e.role == Role::Train,
            Some(RoleArg::Test) => e.role == Role::Test,
        })
        .collect()
}

fn check_rows(what: &str, expected: usize, found: usize) -> Result<()> {
    if expected != found {
        return Err(Error::Alignment {
            what: what.into(),
            expected,
            found,
        });
    }
    Ok(())
}

/// Support shots of the manifest and, if requested, their embeddings.
fn load_support(
    m: &Manifest,
    res: &Resolver,
    with_features: bool,
) -> Result<(SupportSet, BTreeMap<i32, Vec<EmbeddingMatrix>>)> {
    let schema = &m.schema;
    let mut shots: BTreeMap<i32, Vec<SupportShot>> = BTreeMap::new();
    let mut feats: BTreeMap<i32, Vec<EmbeddingMatrix>> = BTreeMap::new();
    for e in m.with_role(Role::Support) {
        let name = e
            .class
            .as_deref()
            .ok_or_else(|| Error::Contract(format!("support scene `{}` has no `class`", e.name)))?;
        let class = schema
            .index_of(name)
            .filter(|&c| schema.is_novel(c))
            .ok_or_else(|| {
                Error::Contract(format!(
                    "support scene `{}` names unknown novel class `{name}`",
                    e.name
                ))
            })?;
        let loaded = load_scene(res.existing(&e.scene)?)?;
        let scene = loaded.scene;
        let mask: Vec<bool> = scene.labels.iter().map(|&l| l == class).collect();
        if with_features {
            let f = load_embeddings(res.required(e, "embeddings", e.embeddings.as_ref())?)?;
            check_rows(
                &format!("embeddings of `{}`", e.name),
                scene.len(),
                f.rows(),
            )?;
            feats.entry(class).or_default().push(f);
        }
        shots
            .entry(class)
            .or_default()
            .push(SupportShot { scene, mask });
    }
    Ok((SupportSet::new(shots, schema)?, feats))
}

#[derive(Debug, Serialize)]
struct DecisionRow {
    class: String,
    cosine: f64,
    kept: bool,
    points: usize,
}

#[derive(Debug, Serialize)]
struct InfillRow {
    class: String,
    source: PrototypeSource,
    assigned: usize,
}

#[derive(Debug, Serialize)]
struct SceneReport {
    name: String,
    points: usize,
    kept: Vec<String>,
    decisions: Vec<DecisionRow>,
    infill: Vec<InfillRow>,
    selected_points: usize,
    labeled_points: usize,
}

#[derive(Debug, Serialize)]
struct RefineDoc {
    schema_version: u32,
    tau: f64,
    delta: f64,
    scenes: Vec<SceneReport>,
}

fn class_name(schema: &ClassSchema, c: i32) -> String {
    schema.name(c).unwrap_or("?").to_string()
}

fn cmd_refine(a: &RefineArgs) -> Result<()> {
    let cfg = RefineConfig {
        selection: SelectionConfig::new(a.tau)?,
        infill: InfillConfig::new(a.delta)?,
    };
    let m = Manifest::load(&a.manifest)?;
    let res = Resolver::for_manifest(&a.manifest);
    let schema = &m.schema;
    let support = match &a.prototypes {
        Some(p) => {
            if !p.is_file() {
                return Err(Error::MissingInput(p.clone()));
            }
            load_prototypes(p)?
        }
        None => {
            let (set, feats) = load_support(&m, &res, true)?;
            support_prototypes_with(&set, |c, s, _| Ok(feats[&c][s].clone()))?
        }
    };
    create_dir(&a.out)?;
    let entries = scene_entries(&m, None);
    let reports = entries
        .par_iter()
        .map(|e| refine_entry(e, &res, &support, &cfg, schema, &a.out))
        .collect::<Result<Vec<_>>>()?;
    if a.prototypes.is_none() {
        save_prototypes(&support, a.out.join("prototypes.gfvp"))?;
    }
    write_json(
        &RefineDoc {
            schema_version: SCHEMA_VERSION,
            tau: a.tau,
            delta: a.delta,
            scenes: reports,
        },
        a.out.join("report.json"),
    )
}

fn refine_entry(
    e: &SceneEntry,
    res: &Resolver,
    support: &PrototypeSet,
    cfg: &RefineConfig,
    schema: &ClassSchema,
    out: &Path,
) -> Result<SceneReport> {
    let scene = load_scene(res.existing(&e.scene)?)?.scene;
    let features = load_embeddings(res.required(e, "embeddings", e.embeddings.as_ref())?)?;
    let raw = load_labels(res.required(e, "predictions", e.predictions.as_ref())?)?;
    check_rows(
        &format!("embeddings of `{}`", e.name),
        scene.len(),
        features.rows(),
    )?;
    check_rows(
        &format!("predictions of `{}`", e.name),
        scene.len(),
        raw.len(),
    )?;
    let r = refine_scene(&features, &raw, &scene.labels, support, cfg, schema)?;
    save_labels(&r.selected, out.join(format!("{}.selected.txt", e.name)))?;
    save_labels(&r.labels, out.join(labels_name(&e.name)))?;
    let counts: BTreeMap<i32, usize> = r.report.assigned.iter().copied().collect();
    Ok(SceneReport {
        name: e.name.clone(),
        points: scene.len(),
        kept: r
            .report
            .kept
            .iter()
            .map(|&c| class_name(schema, c))
            .collect(),
        decisions: r
            .report
            .decisions
            .iter()
            .map(|d| DecisionRow {
                class: class_name(schema, d.class),
                cosine: d.cosine,
                kept: d.kept,
                points: d.points,
            })
            .collect(),
        infill: r
            .report
            .sources
            .iter()
            .map(|&(c, source)| InfillRow {
                class: class_name(schema, c),
                source,
                assigned: counts.get(&c).copied().unwrap_or(0),
            })
            .collect(),
        selected_points: r.selected.iter().filter(|&&l| l >= 0).count(),
        labeled_points: r.labels.iter().filter(|&&l| l >= 0).count(),
    })
}

#[derive(Debug, Serialize)]
struct MixDoc<'a> {
    schema_version: u32,
    seed: u64,
    base_points: usize,
    blocks: Vec<BlockRow<'a>>,
}

#[derive(Debug, Serialize)]
struct BlockRow<'a> {
    class_name: String,
    #[serde(flatten)]
    record: &'a BlockRecord,
}

fn cmd_mix(a: &MixArgs) -> Result<()> {
    let cfg = MixConfig {
        n_blocks: a.blocks,
        crop_margin_xy: a.margin,
        seed: a.common.seed,
    };
    cfg.check()?;
    let m = Manifest::load(&a.manifest)?;
    let res = Resolver::for_manifest(&a.manifest);
    let entry = m
        .find(&a.scene)
        .filter(|e| e.role != Role::Support)
        .ok_or_else(|| Error::Contract(format!("no train or test scene named `{}`", a.scene)))?;
    let mut base: PointCloudScene = load_scene(res.existing(&entry.scene)?)?.scene;
    if let Some(p) = &a.labels {
        if !p.is_file() {
            return Err(Error::MissingInput(p.clone()));
        }
        let labels = load_labels(p)?;
        check_rows("label override", base.len(), labels.len())?;
        base.labels = labels;
    }
    m.schema.check_labels(&base.labels)?;
    let (support, _) = load_support(&m, &res, false)?;
    let out = mix(&base, &support, &cfg, &mut cfg.rng())?;
    save_scene(&out.scene, &a.out, a.format.into())?;
    if let Some(p) = &a.record {
        let doc = MixDoc {
            schema_version: SCHEMA_VERSION,
            seed: cfg.seed,
            base_points: base.len(),
            blocks: out
                .blocks
                .iter()
                .map(|b| BlockRow {
                    class_name: class_name(&m.schema, b.class),
                    record: b,
                })
                .collect(),
        };
        write_json(&doc, p)?;
    }
    Ok(())
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum StatsInput {
    Full(ClassStats),
    Counts(BTreeMap<String, u64>),
}

#[derive(Debug, Serialize)]
struct SplitDoc<'a> {
    schema_version: u32,
    freq_threshold: u64,
    n_base: usize,
    n_novel: usize,
    #[serde(flatten)]
    schema: &'a ClassSchema,
}

fn cmd_split(a: &SplitArgs) -> Result<()> {
    if !a.stats.is_file() {
        return Err(Error::MissingInput(a.stats.clone()));
    }
    let stats = match crate::io::read_json::<StatsInput>(&a.stats)? {
        StatsInput::Full(s) => s,
        StatsInput::Counts(c) => ClassStats::from_counts(c.iter().map(|(k, v)| (k.as_str(), *v))),
    };
    let schema = build_split(
        &stats,
        &SplitSpec {
            freq_threshold: a.threshold,
            n_base: a.n_base,
        },
    )?;
    write_json(
        &SplitDoc {
            schema_version: SCHEMA_VERSION,
            freq_threshold: a.threshold,
            n_base: schema.n_base(),
            n_novel: schema.n_novel(),
            schema: &schema,
        },
        &a.out,
    )?;
    println!(
        "{} base / {} novel classes",
        schema.n_base(),
        schema.n_novel()
    );
    Ok(())
}

#[derive(Debug, Serialize)]
struct QualityRow {
    precision: Option<f64>,
    recall: Option<f64>,
}

#[derive(Debug, Serialize)]
struct RunReport {
    source: String,
    points: u64,
    metrics: MetricSummary,
    novel_pseudo_label_quality: QualityRow,
}

#[derive(Debug, Serialize)]
struct EvalDoc {
    schema_version: u32,
    runs: Vec<RunReport>,
    aggregate: Option<Aggregate>,
}

fn cmd_eval(a: &EvalArgs) -> Result<()> {
    let m = Manifest::load(&a.manifest)?;
    let res = Resolver::for_manifest(&a.manifest);
    let schema = &m.schema;
    let entries = scene_entries(&m, a.role);
    if entries.is_empty() {
        return Err(Error::Contract("manifest has no scenes to evaluate".into()));
    }
    if !a.raw && a.pred_dirs.is_empty() {
        return Err(Error::Config(
            "give at least one --pred-dir, or --raw".into(),
        ));
    }
    let gts = entries
        .par_iter()
        .map(|e| load_labels(res.required(e, "ground_truth", e.ground_truth.as_ref())?))
        .collect::<Result<Vec<_>>>()?;

    let sources: Vec<Option<&PathBuf>> = if a.raw {
        vec![None]
    } else {
        a.pred_dirs.iter().map(Some).collect()
    };
    let mut runs = Vec::new();
    for src in sources {
        let preds = entries
            .par_iter()
            .map(|e| match src {
                None => load_labels(res.required(e, "predictions", e.predictions.as_ref())?),
                Some(dir) => {
                    let p = dir.join(labels_name(&e.name));
                    if !p.is_file() {
                        return Err(Error::MissingInput(p));
                    }
                    load_labels(p)
                }
            })
            .collect::<Result<Vec<_>>>()?;
        let mut conf = ConfusionMatrix::new(schema.n_classes());
        let (mut all_pred, mut all_gt) = (Vec::new(), Vec::new());
        for ((e, p), g) in entries.iter().zip(&preds).zip(&gts) {
            check_rows(&format!("predictions of `{}`", e.name), g.len(), p.len())?;
            conf.accumulate(p, g)?;
            all_pred.extend_from_slice(p);
            all_gt.extend_from_slice(g);
        }
        let q = pseudo_label_quality(&all_pred, &all_gt, schema)?;
        let novel: Vec<_> = q.into_iter().filter(|c| schema.is_novel(c.class)).collect();
        let (precision, recall) = mean_quality(&novel);
        runs.push(RunReport {
            source: src.map_or_else(|| "raw".to_string(), |d| d.display().to_string()),
            points: conf.total(),
            metrics: summary(&conf, schema)?,
            novel_pseudo_label_quality: QualityRow { precision, recall },
        });
    }

    let agg = (runs.len() > 1)
        .then(|| aggregate(&runs.iter().map(|r| r.metrics.clone()).collect::<Vec<_>>()));
    match &agg {
        Some(g) => {
            println!(
                "{:>16} {:>16} {:>16} {:>16}",
                "mIoU-B", "mIoU-N", "mIoU-A", "HM"
            );
            let cells: Vec<String> = (0..4)
                .map(|i| {
                    format!(
                        "{:>16}",
                        format!("{:.2} ± {:.2}", 100.0 * g.mean[i], 100.0 * g.std[i])
                    )
                })
                .collect();
            println!("{}", cells.join(" "));
        }
        None => print!("{}", runs[0].metrics.to_table()),
    }
    if let Some(p) = &a.out {
        write_json(
            &EvalDoc {
                schema_version: SCHEMA_VERSION,
                runs,
                aggregate: agg,
            },
            p,
        )?;
    }
    Ok(())
}

fn cmd_simulate(a: &SimulateArgs) -> Result<()> {
    let seed = a.common.seed;
    let mut cfg = CorpusConfig::new(seed);
    cfg.n_scenes = a.scenes;
    cfg.n_base = a.n_base;
    cfg.n_novel = a.n_novel;
    cfg.shots = a.shots;
    cfg.provider.dim = a.dim;
    cfg.provider.noise_sigma = a.sigma;
    cfg.provider.confusion_prob = a.confusion;
    cfg.noise = NoiseSpec {
        p_miss: a.p_miss,
        erosion_frac: a.erosion,
        flip_prob: a.flip,
        seed: cfg.noise.seed,
    };
    cfg.grid_size = (a.grid_size > 0.0).then_some(a.grid_size);
    if a.grid_size < 0.0 {
        return Err(Error::Config(format!(
            "grid size must be non-negative, got {}",
            a.grid_size
        )));
    }
    let corpus = simulate_corpus(&cfg)?;
    let format: PlyFormat = a.format.into();

    create_dir(a.out.join("scenes"))?;
    create_dir(a.out.join("support"))?;
    let mut manifest = Manifest::new(corpus.schema.clone());
    let entries = corpus
        .scenes
        .par_iter()
        .enumerate()
        .map(|(i, s)| {
            let name = format!("scene_{i:04}");
            let rel = |ext: &str| PathBuf::from("scenes").join(format!("{name}.{ext}"));
            let ply_scene = PointCloudScene {
                labels: s.base_labels.clone(),
                ..s.ground_truth.clone()
            };
            save_scene(&ply_scene, a.out.join(rel("ply")), format)?;
            save_embeddings(&s.features, a.out.join(rel("gfve")))?;
            save_labels(&s.raw_predictions, a.out.join(rel("pred.txt")))?;
            save_labels(&s.ground_truth.labels, a.out.join(rel("gt.txt")))?;
            Ok(SceneEntry {
                name: name.clone(),
                role: Role::Train,
                scene: rel("ply"),
                embeddings: Some(rel("gfve")),
                predictions: Some(rel("pred.txt")),
                ground_truth: Some(rel("gt.txt")),
                instances: None,
                class: None,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    manifest.scenes.extend(entries);

    let mut per_class: BTreeMap<i32, usize> = BTreeMap::new();
    for shot in &corpus.shots {
        let k = per_class.entry(shot.class).or_default();
        let cname = class_name(&corpus.schema, shot.class).replace(' ', "_");
        let name = format!("support_{cname}_{k}");
        *k += 1;
        let rel = |ext: &str| PathBuf::from("support").join(format!("{name}.{ext}"));
        save_scene(&shot.shot.scene, a.out.join(rel("ply")), format)?;
        save_embeddings(&shot.features, a.out.join(rel("gfve")))?;
        manifest.scenes.push(SceneEntry {
            name: name.clone(),
            role: Role::Support,
            scene: rel("ply"),
            embeddings: Some(rel("gfve")),
            predictions: None,
            ground_truth: None,
            instances: None,
            class: Some(class_name(&corpus.schema, shot.class)),
        });
    }
    manifest.save(a.out.join("manifest.json"))
}

fn cmd_stats(a: &StatsArgs) -> Result<()> {
    let m = Manifest::load(&a.manifest)?;
    let res = Resolver::for_manifest(&a.manifest);
    let names: Vec<String> = m.schema.names().map(str::to_string).collect();
    let entries = scene_entries(&m, None);
    let partial = entries
        .par_iter()
        .map(|e| {
            let labels = match &e.ground_truth {
                Some(p) => load_labels(res.existing(p)?)?,
                None => load_scene(res.existing(&e.scene)?)?.scene.labels,
            };
            let instances = match (a.count_mode, &e.instances) {
                (CountMode::Instances, Some(p)) => Some(load_labels(res.existing(p)?)?),
                (CountMode::Instances, None) => {
                    return Err(Error::Contract(format!(
                        "scene `{}` has no `instances` entry",
                        e.name
                    )))
                }
                _ => None,
            };
            let mut s = ClassStats::new(a.count_mode);
            s.add_scene(&names, &labels, instances.as_deref())?;
            Ok(s)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut stats = ClassStats::new(a.count_mode);
    for names in &names {
        stats.classes.entry(names.clone()).or_default();
    }
    let stats = partial.iter().fold(stats, |acc, s| acc.merge(s));
    write_json(&stats, &a.out)?;
    if let Some(p) = &a.split {
        if !p.is_file() {
            return Err(Error::MissingInput(p.clone()));
        }
        let schema: ClassSchema = crate::io::read_json(p)?;
        schema.check()?;
        print!("{}", summarize(&stats, &schema)?.to_table());
    }
    Ok(())
}

fn cmd_voxelize(a: &VoxelizeArgs) -> Result<()> {
    if !a.input.is_file() {
        return Err(Error::MissingInput(a.input.clone()));
    }
    let cfg = VoxelConfig::new(a.grid_size)?;
    let loaded = load_scene(&a.input)?;
    let out = voxelize(&loaded.scene, &cfg)?;
    save_scene(&out, &a.out, a.format.into())?;
    println!("{} -> {} points", loaded.scene.len(), out.len());
    Ok(())
}
