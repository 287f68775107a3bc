//! Subcommand implementations. Every command is deterministic for a
//! fixed set of flags and seeds, and output files are written atomically
//! (temp file plus rename) so failures never leave partial artifacts.

use std::io::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;

use areamatch::bench::{
    evaluate_scene, gen_scene, render_scene_images, save_gray, GenParams, SeedOutcome,
};
use areamatch::geometry::AffineMap;
use areamatch::graph::{check_graph, GraphDump};
use areamatch::ingest::SegmentationInput;
use areamatch::mrf::{brute_force_min, graph_cut, random_instance, MAX_BRUTE_FORCE_NODES};
use areamatch::pipeline::{graph_from_segmentation, match_pair, MatchInputs, PipelineConfig};
use areamatch::similarity::{
    ConstantProvider, GroundTruthProvider, ImageSide, NccProvider, SimilarityProvider,
};

use crate::config::ConfigArgs;
use crate::CmdError;

/// Writes a file through a temp sibling plus rename, so readers never
/// observe partial contents and failed commands leave nothing behind.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CmdError> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let ctx = |e: std::io::Error| CmdError::input(format!("{}: {e}", path.display()));
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(ctx)?;
    tmp.write_all(bytes).map_err(ctx)?;
    tmp.persist(path)
        .map_err(|e| CmdError::input(format!("{}: {}", path.display(), e.error)))?;
    Ok(())
}

fn read_to_string(path: &Path) -> Result<String, CmdError> {
    std::fs::read_to_string(path).map_err(|e| CmdError::input(format!("{}: {e}", path.display())))
}

fn read_segmentation(path: &Path) -> Result<SegmentationInput, CmdError> {
    SegmentationInput::from_json(&read_to_string(path)?)
        .map_err(|e| CmdError::input(format!("{}: {e}", path.display())))
}

fn to_json_pretty<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serialization cannot fail");
    s.push('\n');
    s
}

/// Which scene family a seed expands into.
#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum SceneMode {
    /// Identical image pair; every area corresponds.
    Identity,
    /// Scale and translation perturbations plus unmatched clutter.
    Perturbed,
}

impl SceneMode {
    fn params(self) -> GenParams {
        match self {
            SceneMode::Identity => GenParams::identity(),
            SceneMode::Perturbed => GenParams::perturbed(),
        }
    }

    fn name(self) -> &'static str {
        match self {
            SceneMode::Identity => "identity",
            SceneMode::Perturbed => "perturbed",
        }
    }
}

// ── build-graph ──

#[derive(Debug, clap::Args)]
pub struct BuildGraphArgs {
    /// Segmentation JSON to build from.
    #[arg(long, value_name = "FILE")]
    pub input: PathBuf,

    /// Where to write the graph dump (JSON). Omitted: summary only.
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,

    #[command(flatten)]
    pub config: ConfigArgs,
}

pub fn build_graph(args: &BuildGraphArgs) -> Result<(), CmdError> {
    let cfg = args.config.resolve()?;
    let seg = read_segmentation(&args.input)?;
    let graph = graph_from_segmentation(&seg, &cfg.graph)
        .map_err(|e| CmdError::input(format!("{}: {e}", args.input.display())))?;

    println!("nodes: {}", graph.nodes.len());
    let levels = cfg.graph.thresholds.num_levels();
    for (level, count) in graph.level_histogram(levels).iter().enumerate() {
        println!("  level {level}: {count}");
    }
    println!("inclusion edges: {}", graph.inclusion_edges.len());
    println!("adjacency edges: {}", graph.adjacency_edges.len());

    if let Some(out) = &args.out {
        let dump = GraphDump { config: cfg.graph.clone(), graph };
        write_atomic(out, to_json_pretty(&dump).as_bytes())?;
        println!("wrote {}", out.display());
    }
    Ok(())
}

// ── check-graph ──

#[derive(Debug, clap::Args)]
pub struct CheckGraphArgs {
    /// Graph dump (JSON) produced by build-graph.
    #[arg(long, value_name = "FILE")]
    pub input: PathBuf,
}

pub fn check_graph_cmd(args: &CheckGraphArgs) -> Result<(), CmdError> {
    let dump: GraphDump = serde_json::from_str(&read_to_string(&args.input)?)
        .map_err(|e| CmdError::input(format!("{}: {e}", args.input.display())))?;
    let violations = check_graph(&dump.graph, &dump.config);
    if violations.is_empty() {
        println!(
            "ok: {} nodes, {} inclusion edges, {} adjacency edges",
            dump.graph.nodes.len(),
            dump.graph.inclusion_edges.len(),
            dump.graph.adjacency_edges.len()
        );
        return Ok(());
    }
    for v in &violations {
        eprintln!("violation: {v}");
    }
    Err(CmdError::invariant(format!(
        "{} violation(s) in {}",
        violations.len(),
        args.input.display()
    )))
}

// ── match ──

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum ProviderKind {
    /// Score by overlap under a known image-0 to image-1 transform.
    GroundTruth,
    /// Score by patchwise pixel correlation of the two crops.
    Ncc,
    /// Look scores up in a fixed table file.
    Constant,
}

#[derive(Debug, clap::Args)]
pub struct MatchArgs {
    /// Image-0 segmentation JSON.
    #[arg(long, value_name = "FILE")]
    pub seg0: PathBuf,

    /// Image-1 segmentation JSON.
    #[arg(long, value_name = "FILE")]
    pub seg1: PathBuf,

    #[arg(long, value_enum)]
    pub provider: ProviderKind,

    /// Ground truth: uniform scale of the image-0 to image-1 transform.
    #[arg(long, default_value_t = 1.0, value_name = "NUM")]
    pub scale: f64,

    /// Ground truth: translation, native image-0 pixels.
    #[arg(long, default_value_t = 0.0, value_name = "NUM", allow_negative_numbers = true)]
    pub tx: f64,

    /// Ground truth: translation, native image-0 pixels.
    #[arg(long, default_value_t = 0.0, value_name = "NUM", allow_negative_numbers = true)]
    pub ty: f64,

    /// Pixel correlation: image-0 raster file.
    #[arg(long, value_name = "FILE")]
    pub image0: Option<PathBuf>,

    /// Pixel correlation: image-1 raster file.
    #[arg(long, value_name = "FILE")]
    pub image1: Option<PathBuf>,

    /// Constant provider: similarity table JSON.
    #[arg(long, value_name = "FILE")]
    pub table: Option<PathBuf>,

    /// Where to write the match JSON. Omitted: stdout.
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,

    #[command(flatten)]
    pub config: ConfigArgs,
}

pub fn match_cmd(args: &MatchArgs) -> Result<(), CmdError> {
    let cfg = args.config.resolve()?;
    let seg0 = read_segmentation(&args.seg0)?;
    let seg1 = read_segmentation(&args.seg1)?;
    let g0 = graph_from_segmentation(&seg0, &cfg.graph)
        .map_err(|e| CmdError::input(format!("{}: {e}", args.seg0.display())))?;
    let g1 = graph_from_segmentation(&seg1, &cfg.graph)
        .map_err(|e| CmdError::input(format!("{}: {e}", args.seg1.display())))?;
    let inputs = MatchInputs { g0: &g0, g1: &g1, native0: seg0.image, native1: seg1.image };

    let work = cfg.graph.work_dims;
    let provider: Box<dyn SimilarityProvider> = match args.provider {
        ProviderKind::GroundTruth => {
            // The native-plane transform, expressed between work planes.
            let map = AffineMap::scale_between(work, seg0.image)
                .then(&AffineMap::uniform(args.scale, args.tx, args.ty))
                .then(&AffineMap::scale_between(seg1.image, work));
            Box::new(GroundTruthProvider::new(map))
        }
        ProviderKind::Ncc => {
            let (Some(i0), Some(i1)) = (&args.image0, &args.image1) else {
                return Err(CmdError::input(
                    "provider ncc requires --image0 and --image1".to_string(),
                ));
            };
            Box::new(NccProvider::from_files(i0, i1, work).map_err(|e| CmdError::input(e.to_string()))?)
        }
        ProviderKind::Constant => {
            let Some(table) = &args.table else {
                return Err(CmdError::input("provider constant requires --table".to_string()));
            };
            Box::new(
                ConstantProvider::from_json(&read_to_string(table)?)
                    .map_err(|e| CmdError::input(format!("{}: {e}", table.display())))?,
            )
        }
    };

    let output = match_pair(&inputs, provider.as_ref(), &cfg)
        .map_err(|e| CmdError::input(e.to_string()))?;
    let json = to_json_pretty(&output);
    match &args.out {
        Some(out) => {
            write_atomic(out, json.as_bytes())?;
            println!("{} pair(s), wrote {}", output.pairs.len(), out.display());
        }
        None => print!("{json}"),
    }
    Ok(())
}

// ── gen-scene ──

#[derive(Debug, clap::Args)]
pub struct GenSceneArgs {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,

    #[arg(long, value_enum, default_value_t = SceneMode::Perturbed)]
    pub mode: SceneMode,

    /// Directory receiving scene.json, seg0.json and seg1.json.
    #[arg(long, value_name = "DIR")]
    pub out_dir: PathBuf,

    /// Also render the scene texture as img0.pgm and img1.pgm.
    #[arg(long)]
    pub render: bool,
}

pub fn gen_scene_cmd(args: &GenSceneArgs) -> Result<(), CmdError> {
    std::fs::create_dir_all(&args.out_dir)
        .map_err(|e| CmdError::input(format!("{}: {e}", args.out_dir.display())))?;
    let scene = gen_scene(args.seed, &args.mode.params());

    let file = |name: &str| args.out_dir.join(name);
    write_atomic(&file("scene.json"), to_json_pretty(&scene).as_bytes())?;
    write_atomic(
        &file("seg0.json"),
        to_json_pretty(&scene.to_segmentation(ImageSide::First)).as_bytes(),
    )?;
    write_atomic(
        &file("seg1.json"),
        to_json_pretty(&scene.to_segmentation(ImageSide::Second)).as_bytes(),
    )?;
    if args.render {
        let (img0, img1) = render_scene_images(&scene);
        save_gray(&file("img0.pgm"), &img0).map_err(CmdError::input)?;
        save_gray(&file("img1.pgm"), &img1).map_err(CmdError::input)?;
    }

    let t = scene.transform;
    println!(
        "seed {} ({}): scale {:.6}, translation ({:.2}, {:.2})",
        scene.seed,
        args.mode.name(),
        t.scale,
        t.tx,
        t.ty
    );
    println!(
        "areas: {} + {}, ground-truth pairs: {}",
        scene.areas0.len(),
        scene.areas1.len(),
        scene.gt_pairs.len()
    );
    println!("wrote {}", args.out_dir.display());
    Ok(())
}

// ── bench ──

#[derive(Debug, clap::Args)]
pub struct BenchArgs {
    /// Number of consecutive seeds to evaluate.
    #[arg(long, default_value_t = 50)]
    pub seeds: u64,

    #[arg(long, default_value_t = 0)]
    pub start_seed: u64,

    #[arg(long, value_enum, default_value_t = SceneMode::Perturbed)]
    pub mode: SceneMode,

    /// Where to write the JSON report. Omitted: table only.
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,

    #[command(flatten)]
    pub config: ConfigArgs,
}

/// Mean and population standard deviation of a sample.
#[derive(Debug, Clone, Copy, Serialize)]
struct Stat {
    mean: f64,
    stddev: f64,
}

fn stat(xs: &[f64]) -> Stat {
    if xs.is_empty() {
        return Stat { mean: 0.0, stddev: 0.0 };
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    Stat { mean, stddev: var.sqrt() }
}

#[derive(Debug, Serialize)]
struct Aggregate {
    aor: Stat,
    amp_06: Stat,
    amp_07: Stat,
    amp_08: Stat,
    area_num: Stat,
    empty_scenes: usize,
    provider_calls_pruned: u64,
    provider_calls_full: u64,
    all_match_sets_equal: bool,
    all_pruning_sound: bool,
}

#[derive(Debug, Serialize)]
struct BenchReport {
    mode: String,
    start_seed: u64,
    seeds: u64,
    config: PipelineConfig,
    aggregate: Aggregate,
    outcomes: Vec<SeedOutcome>,
}

fn aggregate(outcomes: &[SeedOutcome]) -> Aggregate {
    let col = |f: &dyn Fn(&SeedOutcome) -> f64| -> Vec<f64> { outcomes.iter().map(f).collect() };
    Aggregate {
        aor: stat(&col(&|o| o.metrics.aor)),
        amp_06: stat(&col(&|o| o.metrics.amp_06)),
        amp_07: stat(&col(&|o| o.metrics.amp_07)),
        amp_08: stat(&col(&|o| o.metrics.amp_08)),
        area_num: stat(&col(&|o| o.metrics.area_num as f64)),
        empty_scenes: outcomes.iter().filter(|o| o.metrics.empty).count(),
        provider_calls_pruned: outcomes.iter().map(|o| o.provider_calls_pruned).sum(),
        provider_calls_full: outcomes.iter().map(|o| o.provider_calls_full).sum(),
        all_match_sets_equal: outcomes.iter().all(|o| o.match_sets_equal),
        all_pruning_sound: outcomes.iter().all(|o| o.pruning_sound),
    }
}

pub fn bench(args: &BenchArgs) -> Result<(), CmdError> {
    let cfg = args.config.resolve()?;
    let params = args.mode.params();

    // Seeds evaluate independently; collection preserves seed order, so
    // the report is identical whatever the thread count.
    let outcomes: Result<Vec<SeedOutcome>, CmdError> = (0..args.seeds)
        .into_par_iter()
        .map(|i| {
            let scene = gen_scene(args.start_seed + i, &params);
            evaluate_scene(&scene, &cfg).map_err(|e| CmdError::input(e.to_string()))
        })
        .collect();
    let outcomes = outcomes?;
    let agg = aggregate(&outcomes);

    println!("seed      aor   amp.6   amp.7   amp.8  areas    max_e_g  calls_on  calls_off");
    for o in &outcomes {
        println!(
            "{:<6} {:.4}  {:.4}  {:.4}  {:.4}  {:>5}  {:>9.3e}  {:>8}  {:>9}",
            o.seed,
            o.metrics.aor,
            o.metrics.amp_06,
            o.metrics.amp_07,
            o.metrics.amp_08,
            o.metrics.area_num,
            o.max_e_g,
            o.provider_calls_pruned,
            o.provider_calls_full,
        );
    }
    println!();
    println!(
        "{} {} scene(s) from seed {}:",
        args.seeds,
        args.mode.name(),
        args.start_seed
    );
    let line = |name: &str, s: Stat| println!("  {name:<9} {:.4} +- {:.4}", s.mean, s.stddev);
    line("aor", agg.aor);
    line("amp@0.6", agg.amp_06);
    line("amp@0.7", agg.amp_07);
    line("amp@0.8", agg.amp_08);
    line("areas", agg.area_num);
    println!(
        "  provider calls: {} pruned, {} full; match sets equal: {}; pruning sound: {}",
        agg.provider_calls_pruned,
        agg.provider_calls_full,
        agg.all_match_sets_equal,
        agg.all_pruning_sound
    );

    if let Some(out) = &args.out {
        let report = BenchReport {
            mode: args.mode.name().to_string(),
            start_seed: args.start_seed,
            seeds: args.seeds,
            config: cfg,
            aggregate: agg,
            outcomes,
        };
        write_atomic(out, to_json_pretty(&report).as_bytes())?;
        println!("wrote {}", out.display());
    }
    Ok(())
}

// ── fuzz-mrf ──

#[derive(Debug, clap::Args)]
pub struct FuzzMrfArgs {
    #[arg(long, default_value_t = 1000)]
    pub trials: u64,

    /// Largest instance size to draw (the brute-force oracle caps at 20).
    #[arg(long, default_value_t = 15)]
    pub max_nodes: usize,

    /// Base seed; trial t uses seed + t.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

pub fn fuzz_mrf(args: &FuzzMrfArgs) -> Result<(), CmdError> {
    if args.max_nodes > MAX_BRUTE_FORCE_NODES {
        return Err(CmdError::input(format!(
            "--max-nodes {} exceeds the brute-force oracle's limit of {MAX_BRUTE_FORCE_NODES}",
            args.max_nodes
        )));
    }
    let mut mismatches = 0u64;
    for t in 0..args.trials {
        let inst = random_instance(args.seed + t, args.max_nodes);
        let cut = inst.total_energy(&graph_cut(&inst));
        let oracle = brute_force_min(&inst).map(|l| inst.total_energy(&l)).expect("size capped");
        if (cut - oracle).abs() > 1e-9 {
            eprintln!(
                "mismatch at seed {}: graph cut {cut}, brute force {oracle}",
                args.seed + t
            );
            mismatches += 1;
        }
    }
    println!("{} trial(s), {} mismatch(es)", args.trials, mismatches);
    if mismatches > 0 {
        return Err(CmdError::invariant(format!(
            "{mismatches} energy mismatch(es) between graph cut and brute force"
        )));
    }
    Ok(())
}
