use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use scd_core::eval::{evaluate, Aggregation, EvalOptions};
use scd_core::external::{ExternalSegmenter, ExternalTracker};
use scd_core::io::pgm::{read_change_map, read_image, read_label_raster};
use scd_core::io::{load_sequence, read_manifest, write_change_map, write_image, write_label_raster, SequenceManifest};
use scd_core::mask::{from_label_raster, to_label_raster, Mask, MaskId};
use scd_core::pipeline::{detect_images, run_sequence, Models, SequenceConfig};
use scd_core::postproc::{postprocess, PostprocConfig, ProposalSet};
use scd_core::sbl::{affine_style, demo_image, style_gap_table, ToyEncoder};
use scd_core::sim::{generate, random_world, CcSegmenter, GreedyTracker, OracleTracker, RandomWorldParams, SyntheticWorld};
use scd_core::{Bitmap, ContentThreshold, Segmenter, Stream, Tracker};

mod config;

/// Training-free scene change detection.
#[derive(Parser, Debug)]
#[command(name = "scd", version, args_override_self = true)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Render a synthetic reference/query sequence with ground truth.
    Synth(SynthArgs),
    /// Change map for a single reference/query image pair.
    Detect(DetectArgs),
    /// Change maps for every frame of a manifest sequence.
    DetectSeq(DetectSeqArgs),
    /// Turn overlapping proposals into disjoint masks.
    Postproc(PostprocArgs),
    /// Score predicted change maps against ground truth.
    Eval(EvalArgs),
    /// Feature distance to a reference image as bridging layers are added.
    SblDemo(SblDemoArgs),
}

#[derive(Args, Debug)]
struct SynthArgs {
    /// World description (JSON). Without it a random world is drawn from --seed.
    #[arg(long)]
    world: Option<PathBuf>,
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..))]
    frames: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
enum TrackerKind {
    /// Exact identities decoded from a synthetic world.
    Oracle,
    /// Re-segmentation with IoU matching.
    Greedy,
    /// Label rasters written by an outside model run (see --tracks).
    ExternalFiles,
}

#[derive(Args, Debug, Clone)]
struct ModelArgs {
    #[arg(long, value_enum, default_value = "oracle")]
    tracker: TrackerKind,
    /// World file, required by the oracle tracker.
    #[arg(long)]
    world: Option<PathBuf>,
    /// Fraction of a vanished object the oracle still reports.
    #[arg(long, default_value_t = 0.0)]
    residual: f64,
    /// Root of the external-files layout.
    #[arg(long)]
    tracks: Option<PathBuf>,
    /// Probability of a corrupted proposal per region (synthetic segmenter).
    #[arg(long, default_value_t = 0.0)]
    seg_noise: f64,
    #[arg(long, default_value_t = 0)]
    seg_seed: u64,
    #[arg(long, default_value_t = 0.5)]
    merge_thresh: f64,
    #[arg(long, default_value_t = 100)]
    min_area: u64,
}

#[derive(Args, Debug)]
struct DetectArgs {
    #[arg(long = "ref")]
    reference: PathBuf,
    #[arg(long)]
    query: PathBuf,
    /// Number in [0, 1] or "adaptive".
    #[arg(long, default_value = "adaptive")]
    tau: ContentThreshold,
    #[command(flatten)]
    models: ModelArgs,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct DetectSeqArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long, default_value_t = 60)]
    t_max: usize,
    #[arg(long, default_value_t = 5)]
    detect_every: usize,
    #[arg(long, default_value = "adaptive")]
    tau: ContentThreshold,
    #[command(flatten)]
    models: ModelArgs,
    /// Output directory for change_NNNN.pgm.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct PostprocArgs {
    /// Directory of label rasters; every label of every file is one proposal.
    #[arg(long)]
    proposals: PathBuf,
    /// Binary raster; nonzero pixels are invalid.
    #[arg(long)]
    invalid_region: Option<PathBuf>,
    #[arg(long, default_value_t = 0.5)]
    merge_thresh: f64,
    #[arg(long, default_value_t = 100)]
    min_area: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct EvalArgs {
    #[arg(long)]
    pred: PathBuf,
    #[arg(long)]
    gt: PathBuf,
    /// Score static vs. changed only.
    #[arg(long)]
    binary: bool,
    /// Average per-frame scores instead of pooling pixels.
    #[arg(long)]
    per_frame: bool,
    /// Score classes absent from both prediction and ground truth as 0
    /// instead of leaving them out of the mean.
    #[arg(long)]
    undefined_as_zero: bool,
    /// Write the JSON report here instead of stdout.
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct SblDemoArgs {
    #[arg(long, default_value_t = 4)]
    layers: usize,
    #[arg(long, default_value_t = 64)]
    size: u32,
    #[arg(long, default_value_t = 0.6)]
    gain: f64,
    #[arg(long, default_value_t = 0.3)]
    bias: f64,
    /// CSV destination; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let result = config::expand_args(std::env::args_os().collect())
        .and_then(|argv| Cli::try_parse_from(argv).map_err(anyhow::Error::from))
        .and_then(run);
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            if let Some(clap_err) = e.downcast_ref::<clap::Error>() {
                if !clap_err.use_stderr() {
                    // --help / --version
                    let _ = clap_err.print();
                    return ExitCode::SUCCESS;
                }
                let rendered = clap_err.to_string();
                let line = rendered.lines().next().unwrap_or_default();
                eprintln!("error: {}", line.trim_start_matches("error: "));
                return ExitCode::from(2);
            }
            eprintln!("error: {}", format!("{e:#}").replace('\n', " "));
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Synth(a) => synth(a),
        Command::Detect(a) => detect(a),
        Command::DetectSeq(a) => detect_seq(a),
        Command::Postproc(a) => postproc(a),
        Command::Eval(a) => eval(a),
        Command::SblDemo(a) => sbl_demo(a),
    }
}

fn create_dir(p: &Path) -> Result<()> {
    std::fs::create_dir_all(p).with_context(|| format!("creating {}", p.display()))
}

fn load_world(path: &Path) -> Result<SyntheticWorld> {
    let json = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    SyntheticWorld::from_json(&json).with_context(|| format!("world {}", path.display()))
}

fn synth(a: SynthArgs) -> Result<()> {
    let world = match &a.world {
        Some(p) => load_world(p)?,
        None => random_world(a.seed, &RandomWorldParams::default()),
    };
    let seq = generate(&world, a.frames as usize, a.seed)?;
    for sub in ["ref", "query", "gt"] {
        create_dir(&a.out.join(sub))?;
    }
    let mut manifest = SequenceManifest::new(Vec::new(), Vec::new());
    let mut gt = Vec::new();
    for t in 0..seq.len() {
        let name = format!("frame_{:04}.pgm", t + 1);
        let (r, q) = (Path::new("ref").join(&name), Path::new("query").join(&name));
        let g = Path::new("gt").join(format!("change_{:04}.pgm", t + 1));
        write_image(&seq.reference[t], a.out.join(&r))?;
        write_image(&seq.query[t], a.out.join(&q))?;
        write_change_map(&seq.gt[t], a.out.join(&g))?;
        manifest.ref_frames.push(r);
        manifest.query_frames.push(q);
        gt.push(g);
    }
    manifest.gt_frames = Some(gt);
    manifest.width = Some(world.width);
    manifest.height = Some(world.height);
    scd_core::io::write_manifest(&manifest, a.out.join("manifest.json"))?;
    let world_json = serde_json::to_string_pretty(&world)? + "\n";
    std::fs::write(a.out.join("world.json"), world_json)?;
    Ok(())
}

type StreamModels = (Box<dyn Segmenter + Send>, Box<dyn Tracker + Send>);

fn build_models(m: &ModelArgs, stream: Stream) -> Result<StreamModels> {
    if !(0.0..=1.0).contains(&m.seg_noise) {
        bail!("--seg-noise must be in [0, 1], got {}", m.seg_noise);
    }
    let cc = || -> Box<dyn Segmenter + Send> {
        let seed = m.seg_seed ^ u64::from(stream == Stream::New);
        Box::new(CcSegmenter::with_noise(m.seg_noise, seed))
    };
    Ok(match m.tracker {
        TrackerKind::Oracle => {
            let path = m.world.as_deref().context("the oracle tracker needs --world")?;
            (cc(), Box::new(OracleTracker::new(&load_world(path)?, m.residual)?))
        }
        TrackerKind::Greedy => (cc(), Box::new(GreedyTracker::new())),
        TrackerKind::ExternalFiles => {
            let root = m.tracks.as_deref().context("the external-files tracker needs --tracks")?;
            (
                Box::new(ExternalSegmenter::new(root, stream)),
                Box::new(ExternalTracker::new(root, stream)),
            )
        }
    })
}

fn postproc_config(merge_thresh: f64, min_area: u64) -> Result<PostprocConfig> {
    let cfg = PostprocConfig { merge_thresh, min_area };
    cfg.validate()?;
    Ok(cfg)
}

fn detect(a: DetectArgs) -> Result<()> {
    let reference = read_image(&a.reference)?;
    let query = read_image(&a.query)?;
    let postproc = postproc_config(a.models.merge_thresh, a.models.min_area)?;
    let tau = a.tau.resolve(1)?;
    let (mut ms, mut mt) = build_models(&a.models, Stream::Missing)?;
    let (mut ns, mut nt) = build_models(&a.models, Stream::New)?;
    let map = detect_images(
        &reference,
        &query,
        &mut Models::new(&mut *ms, &mut *mt),
        &mut Models::new(&mut *ns, &mut *nt),
        tau,
        &postproc,
    )?;
    if let Some(dir) = a.out.parent().filter(|d| !d.as_os_str().is_empty()) {
        create_dir(dir)?;
    }
    write_change_map(&map.raster, &a.out)?;
    Ok(())
}

fn detect_seq(a: DetectSeqArgs) -> Result<()> {
    let manifest = read_manifest(&a.manifest)?;
    let pair = load_sequence(&manifest)?;
    let cfg = SequenceConfig {
        t_max: a.t_max,
        detect_every: a.detect_every,
        tau: a.tau,
        postproc: postproc_config(a.models.merge_thresh, a.models.min_area)?,
        ..SequenceConfig::default()
    };
    let (mut ms, mut mt) = build_models(&a.models, Stream::Missing)?;
    let (mut ns, mut nt) = build_models(&a.models, Stream::New)?;
    let maps = run_sequence(
        &pair,
        &mut Models::new(&mut *ms, &mut *mt),
        &mut Models::new(&mut *ns, &mut *nt),
        &cfg,
    )?;
    create_dir(&a.out)?;
    for (t, m) in maps.iter().enumerate() {
        write_change_map(&m.raster, a.out.join(format!("change_{:04}.pgm", t + 1)))?;
    }
    Ok(())
}

fn pgm_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)
        .with_context(|| format!("listing {}", dir.display()))?
        .map(|e| e.map(|e| e.path()))
        .collect::<std::io::Result<_>>()?;
    files.retain(|p| p.extension().is_some_and(|e| e == "pgm"));
    files.sort();
    Ok(files)
}

fn postproc(a: PostprocArgs) -> Result<()> {
    let files = pgm_files(&a.proposals)?;
    if files.is_empty() {
        bail!("no .pgm proposals in {}", a.proposals.display());
    }
    let mut dims = None;
    let mut proposals = Vec::new();
    for f in &files {
        let raster = read_label_raster(f)?;
        let d = (raster.width, raster.height);
        if *dims.get_or_insert(d) != d {
            bail!("{}: {}x{} does not match the first proposal file", f.display(), d.0, d.1);
        }
        for m in from_label_raster(&raster).iter() {
            let id = MaskId::new(proposals.len() as u32 + 1)?;
            proposals.push(Mask::new(id, m.pixels().clone())?);
        }
    }
    let (w, h) = dims.expect("at least one file");
    let mut set = ProposalSet::new(w, h, proposals, None)?;
    if let Some(p) = &a.invalid_region {
        let r = read_label_raster(p)?;
        if (r.width, r.height) != (w, h) {
            bail!("invalid region is {}x{}, proposals are {w}x{h}", r.width, r.height);
        }
        let region = Bitmap::from_fn(w, h, |x, y| r.labels[(y * w + x) as usize] != 0);
        set = set.with_invalid_region(region)?;
    }
    let masks = postprocess(&set, &postproc_config(a.merge_thresh, a.min_area)?)?;
    write_label_raster(&to_label_raster(&masks)?, &a.out)?;
    Ok(())
}

fn eval(a: EvalArgs) -> Result<()> {
    let gt_files = pgm_files(&a.gt)?;
    if gt_files.is_empty() {
        bail!("no ground-truth rasters in {}", a.gt.display());
    }
    let mut pred = Vec::with_capacity(gt_files.len());
    let mut gt = Vec::with_capacity(gt_files.len());
    for g in &gt_files {
        let name = g.file_name().expect("listed file");
        let p = a.pred.join(name);
        if !p.is_file() {
            bail!("no prediction {} for ground truth {}", p.display(), g.display());
        }
        pred.push(read_change_map(&p)?);
        gt.push(read_change_map(g)?);
    }
    let opts = EvalOptions {
        binary: a.binary,
        aggregation: if a.per_frame { Aggregation::PerFrame } else { Aggregation::Dataset },
        undefined_as_zero: a.undefined_as_zero,
    };
    let report = evaluate(&pred, &gt, opts)?;
    let json = serde_json::to_string_pretty(&report)? + "\n";
    match &a.report {
        Some(p) => std::fs::write(p, json).with_context(|| format!("writing {}", p.display()))?,
        None => print!("{json}"),
    }
    Ok(())
}

fn sbl_demo(a: SblDemoArgs) -> Result<()> {
    if a.size < 2 {
        bail!("--size must be at least 2");
    }
    let encoder = ToyEncoder::new(a.layers)?;
    let reference = demo_image(a.size, a.size);
    let query = affine_style(&reference, a.gain, a.bias);
    let mut csv = String::from("sbl_count,distance\n");
    for (k, d) in style_gap_table(&encoder, &reference, &query)? {
        csv.push_str(&format!("{k},{d:.9}\n"));
    }
    match &a.out {
        Some(p) => std::fs::write(p, csv).with_context(|| format!("writing {}", p.display()))?,
        None => print!("{csv}"),
    }
    Ok(())
}
