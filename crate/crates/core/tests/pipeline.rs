use scd_core::io::{load_sequence, write_change_map, write_image, SequenceManifest};
use scd_core::mask::MaskSet;
use scd_core::pipeline::{branch_step, initial_state, run_sequence, spine_step, Models, SequenceConfig};
use scd_core::raster::{ChangeClass, ChangeRaster};
use scd_core::sim::{generate, random_world, CcSegmenter, GreedyTracker, OracleTracker, RandomWorldParams};
use scd_core::{Frame, Tracker};

fn oracle_run(seed: u64, frames: usize, cfg: &SequenceConfig) -> (Vec<ChangeRaster>, Vec<ChangeRaster>) {
    let world = random_world(seed, &RandomWorldParams::default());
    let seq = generate(&world, frames, seed).unwrap();
    let (mut s1, mut s2) = (CcSegmenter::new(), CcSegmenter::new());
    let (mut t1, mut t2) = (OracleTracker::new(&world, 0.0).unwrap(), OracleTracker::new(&world, 0.0).unwrap());
    let maps = run_sequence(
        &seq.pair(),
        &mut Models::new(&mut s1, &mut t1),
        &mut Models::new(&mut s2, &mut t2),
        cfg,
    )
    .unwrap();
    (maps.into_iter().map(|m| m.raster).collect(), seq.gt)
}

fn f(imgs: &[scd_core::Image], k: usize) -> Frame<'_> {
    Frame::new(k + 1, &imgs[k])
}

/// Spine sets of a full run, with a branch step after every spine step.
fn spines<T: Tracker + Clone + Send>(
    seg: &mut CcSegmenter,
    tracker: &mut T,
    primary: &[scd_core::Image],
    branch: &[scd_core::Image],
    cfg: &SequenceConfig,
    interleave: bool,
) -> Vec<MaskSet> {
    let mut state = initial_state(seg, f(primary, 0), cfg).unwrap();
    let mut out = vec![state.spine.clone()];
    for k in 1..primary.len() {
        if interleave {
            let before = tracker.state_hash();
            branch_step(&state, tracker, f(primary, k - 1), f(branch, k - 1)).unwrap();
            assert_eq!(tracker.state_hash(), before, "frozen step changed tracker state");
        }
        state = spine_step(&state, &mut Models::new(seg, tracker), f(primary, k - 1), f(primary, k), cfg).unwrap();
        out.push(state.spine.clone());
    }
    out
}

#[test]
fn branch_steps_do_not_perturb_the_spine() {
    let cfg = SequenceConfig::default();
    for seed in 0..6 {
        let world = random_world(seed, &RandomWorldParams::default());
        let seq = generate(&world, 20, seed).unwrap();

        let mut t = OracleTracker::new(&world, 0.1).unwrap();
        let with = spines(&mut CcSegmenter::new(), &mut t, &seq.reference, &seq.query, &cfg, true);
        let mut t = OracleTracker::new(&world, 0.1).unwrap();
        let without = spines(&mut CcSegmenter::new(), &mut t, &seq.reference, &seq.query, &cfg, false);
        assert_eq!(with, without, "oracle, seed {seed}");

        let mut t = GreedyTracker::new();
        let with = spines(&mut CcSegmenter::new(), &mut t, &seq.query, &seq.reference, &cfg, true);
        let mut t = GreedyTracker::new();
        let without = spines(&mut CcSegmenter::new(), &mut t, &seq.query, &seq.reference, &cfg, false);
        assert_eq!(with, without, "greedy, seed {seed}");
    }
}

#[test]
fn resuming_from_a_checkpoint_matches_an_uninterrupted_run() {
    let cfg = SequenceConfig { detect_every: 3, ..SequenceConfig::default() };
    let world = random_world(11, &RandomWorldParams::default());
    let seq = generate(&world, 16, 11).unwrap();
    let imgs = &seq.reference;
    let f = |k: usize| f(imgs, k);

    let mut seg = CcSegmenter::with_noise(0.3, 4);
    let mut tracker = OracleTracker::new(&world, 0.0).unwrap();
    let mut state = initial_state(&mut seg, f(0), &cfg).unwrap();
    let mut straight = vec![state.clone()];
    let mut checkpoint = None;
    for k in 1..imgs.len() {
        if k == 7 {
            checkpoint = Some((state.clone(), seg.clone(), tracker.clone()));
        }
        state = spine_step(&state, &mut Models::new(&mut seg, &mut tracker), f(k - 1), f(k), &cfg).unwrap();
        straight.push(state.clone());
    }

    let (mut state, mut seg, mut tracker) = checkpoint.unwrap();
    for (k, expected) in straight.iter().enumerate().skip(7) {
        state = spine_step(&state, &mut Models::new(&mut seg, &mut tracker), f(k - 1), f(k), &cfg).unwrap();
        assert_eq!(&state, expected, "frame {}", k + 1);
    }
}

#[test]
fn chunks_are_independent() {
    let cfg = SequenceConfig { t_max: 7, ..SequenceConfig::default() };
    let world = random_world(3, &RandomWorldParams::default());
    let seq = generate(&world, 17, 3).unwrap();
    let run = |range: std::ops::Range<usize>| {
        let pair = scd_core::io::SequencePair::new(seq.reference[range.clone()].to_vec(), seq.query[range].to_vec()).unwrap();
        let (mut s1, mut s2) = (CcSegmenter::new(), CcSegmenter::new());
        let (mut t1, mut t2) = (OracleTracker::new(&world, 0.1).unwrap(), OracleTracker::new(&world, 0.1).unwrap());
        run_sequence(&pair, &mut Models::new(&mut s1, &mut t1), &mut Models::new(&mut s2, &mut t2), &cfg).unwrap()
    };
    let whole: Vec<_> = run(0..17).into_iter().map(|m| m.raster).collect();
    let parts: Vec<_> = [0..7, 7..14, 14..17]
        .into_iter()
        .flat_map(run)
        .map(|m| m.raster)
        .collect();
    assert_eq!(whole, parts);
}

#[test]
fn chunk_length_sets_the_threshold() {
    // Whatever the chunking, the oracle at zero residual is exact.
    for t_max in [1, 4, 9, 30] {
        let cfg = SequenceConfig { t_max, ..SequenceConfig::default() };
        let (pred, gt) = oracle_run(21, 30, &cfg);
        assert_eq!(pred, gt, "t_max {t_max}");
    }
}

#[test]
fn greedy_tracker_produces_valid_maps() {
    let world = random_world(8, &RandomWorldParams { styled: false, jitter: 0, ..RandomWorldParams::default() });
    let seq = generate(&world, 10, 8).unwrap();
    let (mut s1, mut s2) = (CcSegmenter::with_noise(0.2, 1), CcSegmenter::with_noise(0.2, 2));
    let (mut t1, mut t2) = (GreedyTracker::new(), GreedyTracker::new());
    let maps = run_sequence(
        &seq.pair(),
        &mut Models::new(&mut s1, &mut t1),
        &mut Models::new(&mut s2, &mut t2),
        &SequenceConfig::default(),
    )
    .unwrap();
    assert_eq!(maps.len(), 10);
    for m in &maps {
        assert!(m.raster.codes.iter().all(|&c| ChangeClass::from_code(c).is_some()));
    }

    // Identical sequences: nothing changes.
    let same = scd_core::io::SequencePair::new(seq.reference.clone(), seq.reference.clone()).unwrap();
    let (mut s1, mut s2) = (CcSegmenter::new(), CcSegmenter::new());
    let (mut t1, mut t2) = (GreedyTracker::new(), GreedyTracker::new());
    let maps = run_sequence(&same, &mut Models::new(&mut s1, &mut t1), &mut Models::new(&mut s2, &mut t2), &SequenceConfig::default()).unwrap();
    assert!(maps.iter().all(|m| m.raster.codes.iter().all(|&c| c == 0)));
}

#[test]
fn sequences_survive_a_disk_round_trip() {
    let world = random_world(2, &RandomWorldParams::default());
    let seq = generate(&world, 4, 2).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let mut m = SequenceManifest::new(vec![], vec![]);
    let mut gt = vec![];
    for t in 0..seq.len() {
        for (sub, img, list) in [("ref", &seq.reference[t], &mut m.ref_frames), ("query", &seq.query[t], &mut m.query_frames)] {
            let rel = std::path::PathBuf::from(format!("{sub}_{t}.pgm"));
            write_image(img, dir.path().join(&rel)).unwrap();
            list.push(rel);
        }
        let rel = std::path::PathBuf::from(format!("gt_{t}.pgm"));
        write_change_map(&seq.gt[t], dir.path().join(&rel)).unwrap();
        gt.push(rel);
    }
    m.gt_frames = Some(gt);
    let path = dir.path().join("m.json");
    scd_core::io::write_manifest(&m, &path).unwrap();
    let loaded = load_sequence(&scd_core::io::read_manifest(&path).unwrap()).unwrap();
    assert_eq!(loaded, seq.pair());
}
