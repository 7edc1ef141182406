//! Acceptance suite: one line per criterion, nonzero exit if any fails.
//!
//! Run with `cargo test -p pseudolabel --test acceptance`.

mod common;

use std::collections::BTreeSet;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use pseudolabel::io::{self, ReadOptions};
use pseudolabel::metrics::ConfusionMatrix;
use pseudolabel::refine::{constraint_mask, fuse_tta, harden, inverse_transform, refine_image, RefineConfig};
use pseudolabel::sim::{self, Confusion, SceneSpec, TeacherNoise, ToyDataset};
use pseudolabel::tensor::STANDARD_SCALES;
use pseudolabel::{
    AugDescriptor, ClassSet, ConstraintTable, Error, FormatError, LabelMap, OntologyRelation, ParseError, Taxonomy,
    VOID_LABEL,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures")
}

fn tax(name: &str) -> Taxonomy {
    Taxonomy::load(fixtures().join("taxonomies").join(format!("{name}.tax"))).unwrap()
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within(elapsed: Duration, limit: Duration) -> Result<(), String> {
    ensure(elapsed < limit, || format!("took {elapsed:.2?}, limit {limit:?}"))
}

fn names(tax: &Taxonomy, set: &ClassSet) -> BTreeSet<String> {
    set.iter().map(|id| tax.label_name(id).to_string()).collect()
}

fn c1_ontology_fixtures() -> Outcome {
    let start = Instant::now();
    let (cs, goose) = (tax("cityscapes"), tax("goose"));
    let rel = OntologyRelation::load(fixtures().join("ontologies/cityscapes_to_goose.ont"), &cs, &goose)
        .map_err(|e| e.to_string())?;
    let table = ConstraintTable::build(&rel).map_err(|e| e.to_string())?;
    let road = table.row(cs.find("road").unwrap().id).unwrap();
    let got = names(&goose, road);
    let want: BTreeSet<String> = ["asphalt", "marking", "cobble"].map(String::from).into();
    ensure(got == want, || format!("allowed(road) = {got:?}"))?;

    let (apollo, mv) = (tax("apolloscape"), tax("mapillary"));
    let rel = OntologyRelation::load(fixtures().join("ontologies/apolloscape_to_mapillary.ont"), &apollo, &mv)
        .map_err(|e| e.to_string())?;
    let table = ConstraintTable::build(&rel).map_err(|e| e.to_string())?;
    let void = names(&mv, table.void_row());
    ensure(void.contains("building"), || format!("void row {void:?} lacks building"))?;
    ensure(table.row(VOID_LABEL) == table.row(apollo.void_id().unwrap()), || {
        "sentinel and void class disagree".into()
    })?;
    let animal = mv.find("ground-animal").unwrap().id;
    ensure(
        apollo.classes().iter().all(|c| !table.row(c.id).unwrap().contains(animal)),
        || "ground-animal reachable from ApolloScape".into(),
    )?;
    within(start.elapsed(), Duration::from_secs(1))?;
    Ok(format!("road -> {want:?}; void row has {} classes incl. building", void.len()))
}

fn c2_oracle_equivalence() -> Outcome {
    let start = Instant::now();
    let mut fallbacks = 0;
    for seed in 0..200 {
        let inst = common::random_instance(seed);
        let fast = refine_image(&inst.augs, &inst.gt, &inst.table, &inst.cfg);
        let oracle = common::oracle_refine(&inst);
        match (fast, oracle) {
            (Ok((labels, report)), Ok(want)) => {
                ensure(labels.ids() == want.labels.as_slice(), || format!("seed {seed}: labels differ"))?;
                fallbacks += report.pixels_fallback;
                // the staged path must agree score for score as well
                let canonical: Vec<_> = inst.augs.iter().map(|(p, d)| inverse_transform(p, d).unwrap()).collect();
                let masked = constraint_mask(&fuse_tta(&canonical).unwrap(), &inst.gt, &inst.table, &inst.cfg)
                    .map_err(|e| format!("seed {seed}: {e}"))?;
                let got = common::to_grid(&masked.scores);
                let same = got.iter().flatten().flatten().zip(want.masked.iter().flatten().flatten()).all(|(a, b)| a.to_bits() == b.to_bits());
                ensure(same, || format!("seed {seed}: masked scores differ"))?;
                let staged = harden(&masked.scores, &masked.fallback, &inst.cfg).unwrap();
                ensure(staged == labels, || format!("seed {seed}: staged and fused differ"))?;
            }
            (Err(Error::Fallback { row, col, .. }), Err(at)) => {
                ensure((row, col) == at, || format!("seed {seed}: fallback at {:?} vs {at:?}", (row, col)))?;
            }
            (fast, oracle) => {
                return Err(format!(
                    "seed {seed}: pipeline {:?} vs oracle {:?}",
                    fast.map(|_| ()),
                    oracle.map(|_| ())
                ))
            }
        }
    }
    within(start.elapsed(), Duration::from_secs(10))?;
    Ok(format!("200 instances bit-exact ({fallbacks} fallback pixels exercised)"))
}

fn c3_membership() -> Outcome {
    let mut checked = 0u64;
    for seed in 1000..1100 {
        let mut inst = common::random_instance(seed);
        inst.cfg.fallback = pseudolabel::FallbackPolicy::Void;
        let (labels, _) = refine_image(&inst.augs, &inst.gt, &inst.table, &inst.cfg).map_err(|e| e.to_string())?;
        for (&out, &gt) in labels.ids().iter().zip(inst.gt.ids()) {
            if out == VOID_LABEL {
                continue;
            }
            checked += 1;
            ensure(inst.table.row(gt).unwrap().contains(out), || {
                format!("seed {seed}: class {out} outside row of {gt}")
            })?;
        }
    }
    Ok(format!("0 violations over {checked} non-void pixels"))
}

fn c4_dominance() -> Outcome {
    let start = Instant::now();
    let rel = sim::bundled_relation();
    let fine = rel.source().clone();
    let id = |n: &str| fine.find(n).unwrap().id;
    let spec = SceneSpec {
        height: 64,
        width: 64,
        num_cells: 12,
        fine: fine.clone(),
        seed: 1,
    };
    // asphalt (road) confused with high grass (terrain)
    let cross = Confusion {
        from: id("asphalt"),
        to: id("high-grass"),
        gamma: 3.0,
    };
    let noise = TeacherNoise {
        beta: 2.0,
        confusions: vec![cross],
        sigma: 1.0,
        seed: 1,
    };
    let report = sim::run_experiment(&spec, &noise, &rel, &RefineConfig::default(), 50).map_err(|e| e.to_string())?;
    let seeds: Vec<u64> = report.trials.iter().map(|t| t.scene_seed).collect();
    ensure(seeds == (1..=50).collect::<Vec<_>>(), || format!("scene seeds {seeds:?}"))?;
    ensure(report.dominance_violations().is_empty(), || {
        format!("violations in trials {:?}", report.dominance_violations())
    })?;
    ensure(report.introduced_total == 0, || format!("{} pixels broken", report.introduced_total))?;

    let exact = TeacherNoise { sigma: 0.0, ..noise };
    let r0 = sim::run_experiment(&spec, &exact, &rel, &RefineConfig::default(), 50).map_err(|e| e.to_string())?;
    ensure(r0.affected_accuracy_constrained == Some(1.0), || {
        format!("affected constrained accuracy {:?}", r0.affected_accuracy_constrained)
    })?;
    ensure(r0.affected_accuracy_unconstrained.is_some_and(|a| a < 1.0), || {
        format!("affected unconstrained accuracy {:?}", r0.affected_accuracy_unconstrained)
    })?;
    within(start.elapsed(), Duration::from_secs(30))?;
    Ok(format!(
        "50/50 trials dominate (mean {:.4} -> {:.4}), 0 broken; sigma=0 affected accuracy {:.3} -> 1.0",
        report.mean_accuracy_unconstrained,
        report.mean_accuracy_constrained,
        r0.affected_accuracy_unconstrained.unwrap()
    ))
}

fn c5_tta_algebra() -> Outcome {
    let worst_sum = std::cell::Cell::new(0f64);
    let mut worst_twin = 0f32;
    let track = |p: &pseudolabel::SoftPrediction, what: &str, seed: u64| -> Result<(), String> {
        for px in p.pixels() {
            let s: f64 = px.iter().map(|&v| v as f64).sum();
            worst_sum.set(worst_sum.get().max((s - 1.0).abs()));
        }
        p.check_simplex(1e-4).map_err(|e| format!("seed {seed} {what}: {e}"))
    };
    for seed in 0..100u64 {
        let mut rng = common::rng(seed + 5000);
        let (h, w, c) = (rng.random_range(1..=24), rng.random_range(1..=24), rng.random_range(2..=8));
        let x = common::random_prediction(&mut rng, h, w, c);
        track(&x, "input", seed)?;

        let id = inverse_transform(&x, &AugDescriptor::identity(h, w)).unwrap();
        ensure(id.scores().iter().zip(x.scores()).all(|(a, b)| a.to_bits() == b.to_bits()), || {
            format!("seed {seed}: identity not bit-exact")
        })?;

        let flip = AugDescriptor::new(true, 1.0, h, w);
        let twin = pseudolabel::refine::augment(&x, &flip).unwrap();
        let back = inverse_transform(&twin, &flip).unwrap();
        track(&back, "inverse", seed)?;
        let fused = fuse_tta(&[x.clone(), back]).unwrap();
        track(&fused, "fuse", seed)?;
        let dev = fused.scores().iter().zip(x.scores()).map(|(a, b)| (a - b).abs()).fold(0f32, f32::max);
        worst_twin = worst_twin.max(dev);
        ensure(dev <= 1e-6, || format!("seed {seed}: twin fusion deviates by {dev}"))?;

        // scaled members of the augmentation set
        let scale = STANDARD_SCALES[rng.random_range(0..STANDARD_SCALES.len())];
        let d = AugDescriptor::new(rng.random_bool(0.5), scale, h, w);
        let aug = pseudolabel::refine::augment(&x, &d).unwrap();
        track(&aug, "augment", seed)?;
        let inv = inverse_transform(&aug, &d).unwrap();
        track(&inv, "inverse", seed)?;
        let all = fuse_tta(&[x.clone(), inv]).unwrap();
        track(&all, "fuse", seed)?;

        let gt = LabelMap::filled(h, w, 0).unwrap();
        let mut rel = OntologyRelation::new(common::taxonomy("e", 1, false), common::taxonomy("s", c, false));
        rel.map(0, (0..c as u8).step_by(2).collect()).unwrap();
        let table = ConstraintTable::build_unchecked(&rel);
        let cfg = RefineConfig {
            renormalize_output: true,
            ..RefineConfig::default()
        };
        let masked = constraint_mask(&all, &gt, &table, &cfg).unwrap();
        for (i, px) in masked.scores.pixels().enumerate() {
            if !masked.fallback[i] {
                let s: f64 = px.iter().map(|&v| v as f64).sum();
                ensure((s - 1.0).abs() <= 1e-4, || format!("seed {seed}: masked pixel {i} sums to {s}"))?;
                worst_sum.set(worst_sum.get().max((s - 1.0).abs()));
            }
        }
    }
    Ok(format!("100 tensors; twin deviation {worst_twin:e}, worst sum drift {:e}", worst_sum.get()))
}

fn c6_metrics_oracle() -> Outcome {
    let mut pairs = Vec::new();
    for seed in 0..100u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut draw = || LabelMap::new(8, 8, (0..64).map(|_| rng.random_range(0..5u8)).collect()).unwrap();
        let (pred, gt) = (draw(), draw());
        let mut cm = ConfusionMatrix::new(5);
        cm.accumulate(&pred, &gt).map_err(|e| e.to_string())?;
        for c in 0..5u8 {
            let p: BTreeSet<usize> = (0..64).filter(|&i| pred.ids()[i] == c).collect();
            let g: BTreeSet<usize> = (0..64).filter(|&i| gt.ids()[i] == c).collect();
            let inter = p.intersection(&g).count();
            let union = p.union(&g).count();
            let want = (union > 0).then(|| inter as f64 / union as f64);
            let got = cm.iou(c).unwrap();
            ensure(got == want, || format!("seed {seed} class {c}: {got:?} vs {want:?}"))?;
        }
        pairs.push((pred, gt));
    }
    let mut single = ConfusionMatrix::new(5);
    for (p, g) in &pairs {
        single.accumulate(p, g).unwrap();
    }
    let mut merged = ConfusionMatrix::new(5);
    for shard in pairs.chunks(7) {
        let mut part = ConfusionMatrix::new(5);
        for (p, g) in shard {
            part.accumulate(p, g).unwrap();
        }
        merged.merge(&part).unwrap();
    }
    ensure(merged == single, || "shard merge differs from single pass".into())?;
    Ok("500 class IoUs equal the set computation; 15-shard merge equals single pass".into())
}

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_pseudolabel"))
}

fn c7_table_one() -> Outcome {
    let tables = fixtures().join("tables");
    let out = bin()
        .arg("stats")
        .arg(tables.join("urban.manifestset"))
        .arg(tables.join("off-road.manifestset"))
        .output()
        .map_err(|e| e.to_string())?;
    ensure(out.status.success(), || String::from_utf8_lossy(&out.stderr).into_owned())?;
    let golden = std::fs::read(tables.join("table1.golden")).map_err(|e| e.to_string())?;
    let text = String::from_utf8_lossy(&out.stdout);
    ensure(text.contains("Total urban  388,230"), || "urban total missing".into())?;
    ensure(text.contains("Total off-road  18,558"), || "off-road total missing".into())?;
    ensure(out.stdout == golden, || format!("output differs from golden:\n{text}"))?;
    Ok("388,230 urban / 18,558 off-road; 18 rows byte-identical to golden".into())
}

fn read_tree(dir: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let mut files = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        let mut entries: Vec<_> = std::fs::read_dir(&d).unwrap().map(|e| e.unwrap().path()).collect();
        entries.sort();
        for p in entries {
            if p.is_dir() {
                stack.push(p);
            } else {
                files.push((p.strip_prefix(dir).unwrap().to_path_buf(), std::fs::read(&p).unwrap()));
            }
        }
    }
    files.sort();
    files
}

fn c8_determinism() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let toy = ToyDataset {
        frames: 6,
        height: 40,
        width: 56,
        augs: STANDARD_SCALES.iter().flat_map(|&s| [(s, false), (s, true)]).collect(),
        ..ToyDataset::default()
    };
    let manifest = sim::write_toy_dataset(dir.path(), &toy).map_err(|e| e.to_string())?;
    let mut trees = Vec::new();
    for workers in ["1", "8"] {
        let out_dir = dir.path().join(format!("w{workers}"));
        let out = bin()
            .args(["--workers", workers, "--output"])
            .arg(&out_dir)
            .args(["refine", "--colorize", "--manifest"])
            .arg(&manifest)
            .arg("--predictions")
            .arg(dir.path().join("predictions"))
            .arg("--source-taxonomy")
            .arg(dir.path().join("sim-fine.tax"))
            .output()
            .map_err(|e| e.to_string())?;
        ensure(out.status.success(), || String::from_utf8_lossy(&out.stderr).into_owned())?;
        trees.push(read_tree(&out_dir.join("it1")));
    }
    let pngs = trees[0].iter().filter(|(p, _)| p.extension().is_some_and(|e| e == "png")).count();
    ensure(pngs == 12, || format!("expected 12 PNGs, found {pngs}"))?;
    ensure(trees[0] == trees[1], || "outputs differ between 1 and 8 workers".into())?;

    let mut reports = Vec::new();
    for run in 0..2 {
        let path = dir.path().join(format!("sim{run}.json"));
        let out = bin()
            .args(["simulate", "--seed", "7", "--trials", "5", "--confusion", "asphalt:high-grass:3", "--report"])
            .arg(&path)
            .output()
            .map_err(|e| e.to_string())?;
        ensure(out.status.success(), || String::from_utf8_lossy(&out.stderr).into_owned())?;
        reports.push(std::fs::read(&path).map_err(|e| e.to_string())?);
    }
    ensure(reports[0] == reports[1], || "simulation reports differ".into())?;
    Ok(format!("{} files identical across worker counts; simulate byte-identical", trees[0].len()))
}

fn mutate(rng: &mut ChaCha8Rng, input: &[u8]) -> Vec<u8> {
    let mut out = input.to_vec();
    for _ in 0..rng.random_range(1..=4) {
        let len = out.len();
        match rng.random_range(0..5) {
            0 if len > 0 => {
                let i = rng.random_range(0..len);
                out[i] = rng.random();
            }
            1 if len > 0 => {
                let i = rng.random_range(0..len);
                out[i] ^= 1 << rng.random_range(0..8);
            }
            2 => {
                let i = rng.random_range(0..=len);
                out.insert(i, rng.random());
            }
            3 if len > 0 => {
                out.remove(rng.random_range(0..len));
            }
            _ if len > 0 => out.truncate(rng.random_range(0..len)),
            _ => out.push(rng.random()),
        }
    }
    out
}

fn located_parse(e: &ParseError, input: &[u8]) -> bool {
    let lines = input.split(|&b| b == b'\n').count().max(1);
    e.line >= 1 && e.line <= lines && e.column >= 1 && !e.message.is_empty()
}

fn located_format(e: &FormatError) -> bool {
    !matches!(e, FormatError::UnsupportedPng(_) | FormatError::Png(_) | FormatError::Sidecar(_))
}

fn c9_fuzz() -> Outcome {
    let tax_text = std::fs::read(fixtures().join("taxonomies/cityscapes.tax")).unwrap();
    let ont_text = std::fs::read(fixtures().join("ontologies/cityscapes_to_goose.ont")).unwrap();
    let (cs, goose) = (tax("cityscapes"), tax("goose"));
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let soft = common::random_prediction(&mut rng, 3, 4, 5);
    let soft_bytes = io::encode_soft(&soft, &AugDescriptor::new(true, 1.0, 3, 4));

    let (mut accepted, mut rejected) = (0, 0);
    for i in 0..10_000u32 {
        let outcome = catch_unwind(AssertUnwindSafe(|| -> Result<bool, String> {
            match i % 3 {
                0 => {
                    let bytes = mutate(&mut rng, &tax_text);
                    match pseudolabel::decode_utf8(&bytes).and_then(Taxonomy::parse) {
                        Ok(t) => {
                            let again = Taxonomy::parse(&t.to_string()).map_err(|e| e.to_string())?;
                            ensure(again == t && t.len() <= 255, || "taxonomy does not round-trip".into())?;
                            Ok(true)
                        }
                        Err(e) => ensure(located_parse(&e, &bytes), || format!("unlocated: {e}")).map(|_| false),
                    }
                }
                1 => {
                    let bytes = mutate(&mut rng, &ont_text);
                    match pseudolabel::decode_utf8(&bytes).and_then(|t| OntologyRelation::parse(t, &cs, &goose)) {
                        Ok(rel) => {
                            let again = OntologyRelation::parse(&rel.to_string(), &cs, &goose).map_err(|e| e.to_string())?;
                            ensure(again == rel, || "ontology does not round-trip".into())?;
                            ensure(rel.entries().values().all(|s| s.bound() <= goose.len()), || "row out of range".into())?;
                            Ok(true)
                        }
                        Err(e) => ensure(located_parse(&e, &bytes), || format!("unlocated: {e}")).map(|_| false),
                    }
                }
                _ => {
                    let bytes = mutate(&mut rng, &soft_bytes);
                    match io::decode_soft(&bytes, ReadOptions::default()) {
                        Ok(f) => {
                            let p = &f.prediction;
                            ensure(p.scores().len() == p.height() * p.width() * p.channels(), || "size".into())?;
                            ensure(p.scores().iter().all(|v| (0.0..=1.0).contains(v)), || "range".into())?;
                            p.check_simplex(1e-4).map_err(|e| e.to_string())?;
                            ensure(f.descriptor.scaled_dims() == (p.height(), p.width()), || "geometry".into())?;
                            Ok(true)
                        }
                        Err(e) => ensure(located_format(&e), || format!("unlocated: {e}")).map(|_| false),
                    }
                }
            }
        }));
        match outcome {
            Ok(Ok(true)) => accepted += 1,
            Ok(Ok(false)) => rejected += 1,
            Ok(Err(msg)) => return Err(format!("mutation {i}: {msg}")),
            Err(_) => return Err(format!("mutation {i}: panicked")),
        }
    }
    Ok(format!("10000 mutations: {rejected} located errors, {accepted} valid values"))
}

fn c10_throughput() -> Outcome {
    let (h, w, c) = (1024usize, 2048usize, 19usize);
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let mut scores = Vec::with_capacity(h * w * c);
    let mut px = [0f32; 19];
    for _ in 0..h * w {
        let mut sum = 0f64;
        for v in px.iter_mut() {
            *v = rng.random::<f32>();
            sum += *v as f64;
        }
        scores.extend(px.iter().map(|&v| (v as f64 / sum) as f32));
    }
    let pred = pseudolabel::SoftPrediction::new(h, w, c, scores).unwrap();
    let (cs, goose) = (tax("cityscapes"), common::taxonomy("s", c, false));
    let mut rel = OntologyRelation::new(cs.clone(), goose);
    for class in cs.classes().iter().filter(|k| !k.is_void) {
        let mut set = common::random_set(&mut rng, c);
        set.insert(class.id % c as u8);
        rel.map(class.id, set).unwrap();
    }
    let table = ConstraintTable::build_unchecked(&rel);
    let gt = LabelMap::new(h, w, (0..h * w).map(|_| rng.random_range(0..19u8)).collect()).unwrap();
    let soft_path = dir.path().join("s100.sftp");
    let gt_path = dir.path().join("gt.png");
    io::write_soft(&pred, &AugDescriptor::identity(h, w), &soft_path).unwrap();
    io::write_labelmap(&gt, &gt_path).unwrap();
    drop(pred);

    let start = Instant::now();
    let file = io::read_soft(&soft_path).map_err(|e| e.to_string())?;
    let gt = io::read_labelmap(&gt_path, &cs).map_err(|e| e.to_string())?;
    let (labels, report) = refine_image(&[(file.prediction, file.descriptor)], &gt, &table, &RefineConfig::default())
        .map_err(|e| e.to_string())?;
    io::write_labelmap(&labels, dir.path().join("out.png")).map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    ensure(report.pixels_total == (h * w) as u64, || "pixel count".into())?;
    within(elapsed, Duration::from_secs(1))?;
    Ok(format!("1024x2048x19 read, refined and written in {elapsed:.2?} on one thread"))
}

fn main() {
    let criteria: [Criterion; 10] = [
        ("ontology fixtures", c1_ontology_fixtures),
        ("masking matches scalar oracle", c2_oracle_equivalence),
        ("membership invariant", c3_membership),
        ("dominance over 50 simulated trials", c4_dominance),
        ("test-time augmentation algebra", c5_tta_algebra),
        ("metrics match set oracle", c6_metrics_oracle),
        ("frame statistics table", c7_table_one),
        ("determinism across workers and runs", c8_determinism),
        ("loader fuzzing", c9_fuzz),
        ("single-thread throughput", c10_throughput),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let result = catch_unwind(check).unwrap_or_else(|_| Err("panicked".into()));
        let secs = start.elapsed().as_secs_f64();
        match result {
            Ok(detail) => println!("PASS {:>2} {name}: {detail} [{secs:.2}s]", i + 1),
            Err(why) => {
                failed += 1;
                println!("FAIL {:>2} {name}: {why} [{secs:.2}s]", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
