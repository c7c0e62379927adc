//! Acceptance checks. Runs as a plain binary and prints one PASS/FAIL line
//! per criterion; exits nonzero if any fail.

use std::collections::BTreeSet;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use scd_core::change::{adaptive_tau, tau_difference, ChangeMap, ContentThreshold};
use scd_core::eval::{confusion, evaluate, EvalOptions};
use scd_core::io::manifest::parse_manifest;
use scd_core::io::pgm::{decode_change_map, decode_label_raster, encode_change_map, encode_label_raster};
use scd_core::mask::{to_label_raster, LabelRaster, Mask, MaskId, MaskSet};
use scd_core::pipeline::{detect_images, run_direction, run_sequence, Models, SequenceConfig};
use scd_core::postproc::{postprocess, PostprocConfig, ProposalSet};
use scd_core::raster::{ChangeClass, ChangeRaster};
use scd_core::sbl::{affine_style, apply_stats, capture_stats, demo_image, style_gap_table, FeatureTensor, SblMode, ToyEncoder, DEFAULT_EPS};
use scd_core::sim::{generate, random_world, CcSegmenter, OracleTracker, Presence, RandomWorldParams, Shape, StyleTransform, SyntheticSequence, SyntheticWorld, WorldObject};
use scd_core::{Bitmap, Stream};

type Check = fn() -> Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        let ok: bool = $cond;
        if !ok {
            return Err(format!($($fmt)+));
        }
    };
}

fn id(i: u32) -> MaskId {
    MaskId::new(i).unwrap()
}

fn run(world: &SyntheticWorld, seq: &SyntheticSequence, residual: f64, cfg: &SequenceConfig) -> Vec<ChangeMap> {
    let (mut s1, mut s2) = (CcSegmenter::new(), CcSegmenter::new());
    let mut t1 = OracleTracker::new(world, residual).unwrap();
    let mut t2 = OracleTracker::new(world, residual).unwrap();
    run_sequence(
        &seq.pair(),
        &mut Models::new(&mut s1, &mut t1),
        &mut Models::new(&mut s2, &mut t2),
        cfg,
    )
    .unwrap()
}

fn single_object_world(query: Presence) -> SyntheticWorld {
    let obj = |id: u32, x: i32, in_query: Presence| WorldObject {
        id,
        color: 9000 * id as u16,
        shape: Shape::Rect { x, y: 5, w: 10, h: 10 },
        velocity: [0, 0],
        in_ref: Presence::ALL,
        in_query,
    };
    SyntheticWorld {
        width: 48,
        height: 20,
        background: 500,
        objects: vec![obj(1, 4, query), obj(2, 30, Presence::ALL)],
        pan: [0, 0],
        jitter: 0,
        style: StyleTransform { gain: 0.9, bias: 700.0 },
    }
}

fn c1_adaptive_tau() -> Result<String, String> {
    let t1 = adaptive_tau(1).unwrap();
    let t60 = adaptive_tau(60).unwrap();
    ensure!(t1 == 0.05, "adaptive_tau(1) = {t1:?}");
    ensure!((0.392..=0.402).contains(&t60), "adaptive_tau(60) = {t60}");
    let start = Instant::now();
    let mut acc = 0.0;
    for len in 1..=1000 {
        acc += adaptive_tau(std::hint::black_box(len)).unwrap();
    }
    let per_call = start.elapsed() / 1000;
    ensure!(acc > 0.0 && per_call < Duration::from_millis(1), "{per_call:?} per call");
    Ok(format!("tau(1)={t1}, tau(60)={t60:.4}, {per_call:?}/call"))
}

fn c2_residual_threshold() -> Result<String, String> {
    let world = single_object_world(Presence::NONE);
    let seq = generate(&world, 60, 3).unwrap();

    // The oracle leaves exactly 10 of the 100 pixels behind in the query.
    let mut seg = CcSegmenter::new();
    let mut tracker = OracleTracker::new(&world, 0.1).unwrap();
    let steps = run_direction(
        &seq.reference,
        &seq.query,
        1,
        &mut Models::new(&mut seg, &mut tracker),
        &SequenceConfig::default(),
        Stream::Missing,
    )
    .unwrap();
    for s in &steps {
        let (spine, branch) = (s.spine.area_of(id(1)), s.branch.area_of(id(1)));
        ensure!(spine == 100 && branch == 10, "spine {spine} px, branch {branch} px");
    }

    let fixed = SequenceConfig { tau: ContentThreshold::Fixed(0.05), ..SequenceConfig::default() };
    let adaptive = SequenceConfig { tau: ContentThreshold::Adaptive, ..SequenceConfig::default() };
    let footprint = Bitmap::rect(48, 20, 4, 5, 10, 10);
    for m in run(&world, &seq, 0.1, &fixed) {
        ensure!(m.raster.count(ChangeClass::Missing) == 0, "flagged at tau=0.05");
        ensure!(m.raster.codes.iter().all(|&c| c == 0), "non-static pixels at tau=0.05");
    }
    for (t, m) in run(&world, &seq, 0.1, &adaptive).iter().enumerate() {
        ensure!(m.raster.class_mask(ChangeClass::Missing) == footprint, "frame {}: wrong missing pixels", t + 1);
        ensure!(m.raster.count(ChangeClass::Missing) == 100, "frame {}", t + 1);
        ensure!(m.raster == seq.gt[t], "frame {} differs from ground truth", t + 1);
    }
    Ok("residual 10/100 px: kept at 0.05, flagged (100 px exact) at adaptive(60)".into())
}

fn c3_random_worlds() -> Result<String, String> {
    let start = Instant::now();
    let cases = [(1, 60), (5, 60), (60, 60), (150, 60)];
    let mut frames = 0;
    for seed in 0..20u64 {
        let world = random_world(seed, &RandomWorldParams::default());
        for &(len, t_max) in &cases {
            let seq = generate(&world, len, seed).unwrap();
            let cfg = SequenceConfig { t_max, ..SequenceConfig::default() };
            let pred: Vec<ChangeRaster> = run(&world, &seq, 0.0, &cfg).into_iter().map(|m| m.raster).collect();
            let report = evaluate(&pred, &seq.gt, EvalOptions::default()).unwrap();
            ensure!(report.miou == Some(1.0), "seed {seed}, T={len}: mIoU {:?}", report.miou);
            frames += len;
        }
    }
    let elapsed = start.elapsed();
    ensure!(elapsed < Duration::from_secs(30), "took {elapsed:?}");
    Ok(format!("20 worlds x T in {{1,5,60,150=[60,60,30]}}, {frames} frames, mIoU 1.0, {elapsed:.2?}"))
}

fn c4_single_frame_identity() -> Result<String, String> {
    for seed in 0..20u64 {
        let world = random_world(seed, &RandomWorldParams::default());
        let seq = generate(&world, 1, seed).unwrap();
        for residual in [0.0, 0.2] {
            let seq_out = run(&world, &seq, residual, &SequenceConfig::default());
            let (mut s1, mut s2) = (CcSegmenter::new(), CcSegmenter::new());
            let mut t1 = OracleTracker::new(&world, residual).unwrap();
            let mut t2 = OracleTracker::new(&world, residual).unwrap();
            let pair = detect_images(
                &seq.reference[0],
                &seq.query[0],
                &mut Models::new(&mut s1, &mut t1),
                &mut Models::new(&mut s2, &mut t2),
                ContentThreshold::Adaptive.resolve(1).unwrap(),
                &PostprocConfig::default(),
            )
            .unwrap();
            ensure!(
                encode_change_map(&seq_out[0].raster) == encode_change_map(&pair.raster),
                "seed {seed}, residual {residual}: bytes differ"
            );
        }
    }
    Ok("20 worlds x 2 residuals, byte-identical".into())
}

/// Disjoint random masks over a 12x12 grid; `ids` are used in order.
fn random_set(rng: &mut ChaCha8Rng, ids: &[u32], pool: &[usize]) -> MaskSet {
    let mut pixels = pool.to_vec();
    pixels.shuffle(rng);
    let mut masks = Vec::new();
    let mut rest = &pixels[..];
    for &i in ids {
        if rest.is_empty() {
            break;
        }
        let take = rng.gen_range(1..=rest.len().min(20));
        let mut b = Bitmap::new(12, 12);
        rest[..take].iter().for_each(|&p| b.insert_index(p));
        rest = &rest[take..];
        masks.push(Mask::new(id(i), b).unwrap());
    }
    MaskSet::new(12, 12, masks).unwrap()
}

fn c5_tau_laws() -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let all: Vec<usize> = (0..144).collect();
    let cases = 2000;
    for case in 0..cases {
        let a_ids: Vec<u32> = (1..=rng.gen_range(1..8)).collect();
        let b_ids: Vec<u32> = (1..=10).filter(|_| rng.gen_bool(0.5)).collect();
        let a = random_set(&mut rng, &a_ids, &all);
        let b = random_set(&mut rng, &b_ids, &all);
        let a_ids: BTreeSet<MaskId> = a.ids().collect();

        ensure!(tau_difference(&a, &b, 0.0).is_empty(), "case {case}: non-empty at tau=0");
        let (t1, t2) = {
            let (x, y) = (rng.gen_range(0.0..=1.0), rng.gen_range(0.0..=1.0));
            if x <= y { (x, y) } else { (y, x) }
        };
        let (d1, d2) = (tau_difference(&a, &b, t1), tau_difference(&a, &b, t2));
        ensure!(d2.is_subset(&a_ids), "case {case}: result not within A");
        ensure!(d1.is_subset(&d2), "case {case}: not monotone between {t1} and {t2}");

        // B keeps some of A's masks verbatim, drops the rest and adds masks
        // of its own elsewhere: every tau in (0, 1] gives A \ B.
        let kept: Vec<MaskId> = a.ids().filter(|_| rng.gen_bool(0.5)).collect();
        let mut b = a.select(kept.iter().copied());
        let free: Vec<usize> = (0..144).filter(|&p| !a.union().contains_index(p)).collect();
        for extra in random_set(&mut rng, &[50, 51], &free).iter() {
            b.insert(extra.clone()).unwrap();
        }
        let expected: BTreeSet<MaskId> = a_ids.iter().copied().filter(|i| !b.contains(*i)).collect();
        for tau in [f64::MIN_POSITIVE, rng.gen_range(1e-9..=1.0), 1.0] {
            ensure!(tau_difference(&a, &b, tau) == expected, "case {case}: recovery fails at tau={tau}");
        }
    }
    Ok(format!("{cases} random cases"))
}

fn c6_style_bridging() -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut worst: f64 = 0.0;
    for _ in 0..200 {
        let (c, h, w) = (rng.gen_range(1..6), rng.gen_range(2..9), rng.gen_range(2..9));
        let tensor = |rng: &mut ChaCha8Rng, scale: f64| {
            let shift = rng.gen_range(-5.0..5.0);
            FeatureTensor::new(c, h, w, (0..c * h * w).map(|_| shift + scale * rng.gen_range(-1.0..1.0)).collect()).unwrap()
        };
        let (sz, sr) = (rng.gen_range(0.5..4.0), rng.gen_range(0.5..4.0));
        let z = tensor(&mut rng, sz);
        let r = tensor(&mut rng, sr);
        let target = capture_stats(&r);
        let out = apply_stats(&z, &target, DEFAULT_EPS).unwrap();
        let got = capture_stats(&out);
        for k in 0..c {
            worst = worst.max((got.mean[k] - target.mean[k]).abs()).max((got.std[k] - target.std[k]).abs());
        }
        let twice = apply_stats(&out, &target, DEFAULT_EPS).unwrap();
        worst = worst.max(twice.rms_distance(&out).unwrap());
        let own = apply_stats(&z, &capture_stats(&z), DEFAULT_EPS).unwrap();
        worst = worst.max(own.data().iter().zip(z.data()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max));
    }
    ensure!(worst < 1e-6, "max deviation {worst:e}");

    let layers = 4;
    let enc = ToyEncoder::new(layers).unwrap();
    let reference = demo_image(64, 64);
    let own = enc.encode(&reference, 0, SblMode::Record).unwrap();
    let same = enc.encode(&reference, layers, SblMode::Apply(&own.stats)).unwrap();
    for (a, b) in own.features.iter().zip(&same.features) {
        ensure!(a.rms_distance(b).unwrap() < 1e-6, "self-style changes encoder features");
    }

    let query = affine_style(&reference, 0.6, 0.3);
    let table = style_gap_table(&enc, &reference, &query).unwrap();
    ensure!(
        table.windows(2).all(|p| p[1].1 < p[0].1),
        "distance not strictly decreasing: {table:?}"
    );
    let d: Vec<String> = table.iter().map(|(_, d)| format!("{d:.4}")).collect();
    Ok(format!("stats err {worst:.1e}; distance by SBL count 0..{layers}: {}", d.join(" > ")))
}

fn c7_postprocessing() -> Result<String, String> {
    let fixture = |overlap: u32| {
        let a = Mask::new(id(1), Bitmap::rect(20, 11, 0, 0, 10, 1)).unwrap();
        let b = Mask::new(id(2), Bitmap::rect(20, 11, 10 - overlap, 0, 10, 10)).unwrap();
        ProposalSet::new(20, 11, vec![a, b], None).unwrap()
    };
    // min_area 1 so the 7-pixel survivor of the second case is kept.
    let cfg = PostprocConfig { merge_thresh: 0.5, min_area: 1 };
    let merged = postprocess(&fixture(6), &cfg).unwrap();
    let areas: Vec<u64> = merged.iter().map(Mask::area).collect();
    ensure!(areas == vec![104], "60% overlap gave areas {areas:?}");
    let kept = postprocess(&fixture(3), &cfg).unwrap();
    let areas: Vec<u64> = kept.iter().map(Mask::area).collect();
    ensure!(areas == vec![7, 100], "30% overlap gave areas {areas:?}");

    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for soup in 0..1000 {
        let n = rng.gen_range(0..12);
        let proposals: Vec<Mask> = (1..=n)
            .map(|i| {
                let (w, h) = (rng.gen_range(1..15), rng.gen_range(1..15));
                let (x, y) = (rng.gen_range(0..=32 - w), rng.gen_range(0..=24 - h));
                Mask::new(id(i), Bitmap::rect(32, 24, x, y, w, h)).unwrap()
            })
            .collect();
        let mut set = ProposalSet::new(32, 24, proposals, None).unwrap();
        if rng.gen_bool(0.3) {
            set = set.with_invalid_region(Bitmap::rect(32, 24, 0, 0, 8, 24)).unwrap();
        }
        let cfg = PostprocConfig { merge_thresh: rng.gen_range(0.0..1.0), min_area: rng.gen_range(1..30) };
        let out = postprocess(&set, &cfg).map_err(|e| format!("soup {soup}: {e}"))?;
        // Rasterizing fails on any overlap.
        to_label_raster(&out).map_err(|e| format!("soup {soup}: {e}"))?;
        ensure!(out.iter().all(|m| m.area() >= cfg.min_area), "soup {soup}: mask below min_area");
    }
    Ok("60% -> [104], 30% -> [7, 100], 1000 soups disjoint".into())
}

fn c8_single_survival_veto() -> Result<String, String> {
    let len = 12;
    for k in 1..=len {
        let world = single_object_world(Presence::Frames([k].into()));
        let seq = generate(&world, len, 0).unwrap();
        for residual in [0.0, 0.1] {
            for (t, m) in run(&world, &seq, residual, &SequenceConfig::default()).iter().enumerate() {
                ensure!(
                    m.raster.count(ChangeClass::Missing) == 0 && m.raster.count(ChangeClass::Replaced) == 0,
                    "object seen only in query frame {k} coded missing at frame {}",
                    t + 1
                );
            }
        }
    }
    Ok(format!("survivor in any one of {len} query frames never missing"))
}

fn c9_swap_symmetry() -> Result<String, String> {
    let mut pixels = 0usize;
    for seed in 0..10u64 {
        let world = random_world(seed + 100, &RandomWorldParams::default());
        let seq = generate(&world, 12, seed).unwrap();
        let swapped = SyntheticSequence {
            reference: seq.query.clone(),
            query: seq.reference.clone(),
            ..seq.clone()
        };
        for residual in [0.0, 0.1] {
            let cfg = SequenceConfig { t_max: 5, ..SequenceConfig::default() };
            let fwd = run(&world, &seq, residual, &cfg);
            let back = run(&world, &swapped, residual, &cfg);
            for (t, (f, b)) in fwd.iter().zip(&back).enumerate() {
                for (i, (&x, &y)) in f.raster.codes.iter().zip(&b.raster.codes).enumerate() {
                    let mirrored = ChangeClass::from_code(x).unwrap().mirrored().code();
                    ensure!(y == mirrored, "seed {seed}, frame {}, pixel {i}: {x} vs {y}", t + 1);
                }
                pixels += f.raster.codes.iter().filter(|&&c| c != 0).count();
            }
        }
    }
    ensure!(pixels > 0, "no changed pixels exercised");
    Ok(format!("10 worlds x 12 frames x 2 residuals, {pixels} changed px mirrored"))
}

fn c10_metrics() -> Result<String, String> {
    let mut p = vec![0u8; 200];
    let mut g = vec![0u8; 200];
    p[..75].fill(1);
    g[..50].fill(1);
    g[75..100].fill(1);
    let (p, g) = (ChangeRaster::new(200, 1, p).unwrap(), ChangeRaster::new(200, 1, g).unwrap());
    let m = confusion(&p, &g, 2).unwrap();
    let counts = (m.true_positives(1), m.false_positives(1), m.false_negatives(1));
    ensure!(counts == (50, 25, 25), "TP/FP/FN {counts:?}");
    let iou = m.class_iou(1).unwrap();
    let f1 = m.f1_binary();
    ensure!(iou == 0.5, "IoU {iou}");
    ensure!((f1 - 0.6667).abs() < 1e-4, "F1 {f1}");
    let perfect = confusion(&g, &g, 2).unwrap();
    ensure!(perfect.class_iou(1) == Some(1.0) && perfect.miou() == Some(1.0), "perfect IoU");
    ensure!(perfect.f1_binary() == 1.0, "perfect F1");
    Ok(format!("IoU {iou}, F1 {f1:.4}; perfect 1.0/1.0"))
}

fn c11_golden_files() -> Result<String, String> {
    let dir = concat!(env!("CARGO_MANIFEST_DIR"), "/tests/golden");
    let read = |name: &str| std::fs::read(format!("{dir}/{name}")).map_err(|e| format!("{name}: {e}"));

    let bytes = read("labels_4x3.pgm")?;
    let expected = LabelRaster::new(4, 3, vec![0, 1, 1, 2, 0, 300, 300, 2, 65535, 65535, 0, 0]).unwrap();
    let decoded = decode_label_raster(&bytes).map_err(|e| e.to_string())?;
    ensure!(decoded == expected, "label raster decoded wrong");
    ensure!(encode_label_raster(&decoded).unwrap() == bytes, "label raster re-encodes differently");

    let bytes = read("change_5x2.pgm")?;
    let decoded = decode_change_map(&bytes).map_err(|e| e.to_string())?;
    ensure!(decoded.codes == vec![0, 1, 2, 3, 3, 2, 1, 0, 0, 0], "change map decoded wrong");
    ensure!(encode_change_map(&decoded) == bytes, "change map re-encodes differently");

    let bytes = read("manifest.json")?;
    let text = String::from_utf8(bytes).map_err(|e| e.to_string())?;
    let m = parse_manifest(&text, dir).map_err(|e| e.to_string())?;
    ensure!(m.len() == 2 && m.width == Some(4), "manifest fields");
    ensure!(m.to_json().unwrap() == text, "manifest re-serializes differently");
    Ok("labels, change map and manifest byte-identical".into())
}

fn main() {
    // Name, check, wall-clock budget.
    let checks: [(&str, Check, u64); 11] = [
        ("adaptive threshold", c1_adaptive_tau, 1_000),
        ("residual vs threshold", c2_residual_threshold, 1_000),
        ("oracle worlds mIoU", c3_random_worlds, 30_000),
        ("single-frame sequence == pair", c4_single_frame_identity, 1_000),
        ("tau-difference laws", c5_tau_laws, 10_000),
        ("style bridging", c6_style_bridging, 5_000),
        ("post-processing", c7_postprocessing, 10_000),
        ("single-survival veto", c8_single_survival_veto, 1_000),
        ("ref/query swap symmetry", c9_swap_symmetry, 5_000),
        ("IoU / F1 fixture", c10_metrics, 1_000),
        ("golden files", c11_golden_files, 1_000),
    ];
    // Assertion panics inside a check are reported as failures, quietly.
    std::panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for (n, (name, check, budget_ms)) in checks.iter().enumerate() {
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let elapsed = start.elapsed();
        let outcome = outcome.and_then(|detail| {
            if elapsed > Duration::from_millis(*budget_ms) {
                Err(format!("{detail}; over the {budget_ms} ms budget"))
            } else {
                Ok(detail)
            }
        });
        match outcome {
            Ok(detail) => println!("PASS criterion {:>2} ({name}) [{elapsed:.2?}]: {detail}", n + 1),
            Err(why) => {
                failed += 1;
                println!("FAIL criterion {:>2} ({name}) [{elapsed:.2?}]: {why}", n + 1);
            }
        }
    }
    println!("acceptance: {}/{} passed", checks.len() - failed, checks.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
