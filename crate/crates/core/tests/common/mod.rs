//! Random refinement instances and a scalar reference implementation of the
//! staged pipeline, shared by the integration and acceptance tests.
#![allow(dead_code)]

use std::collections::BTreeSet;

use pseudolabel::refine::RefineConfig;
use pseudolabel::tensor::STANDARD_SCALES;
use pseudolabel::{
    AugDescriptor, ClassDef, ClassSet, ConstraintTable, FallbackPolicy, LabelMap, OntologyRelation, SoftPrediction,
    Taxonomy, VOID_LABEL,
};
use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn taxonomy(name: &str, n: usize, with_void: bool) -> Taxonomy {
    let mut classes: Vec<ClassDef> = (0..n)
        .map(|i| ClassDef {
            id: i as u8,
            name: format!("{name}{i}"),
            color: [(i * 20 % 256) as u8, 255 - i as u8, 7],
            is_void: false,
        })
        .collect();
    if with_void {
        classes.push(ClassDef {
            id: n as u8,
            name: "unlabeled".into(),
            color: [0, 0, 0],
            is_void: true,
        });
    }
    Taxonomy::new(name, classes).unwrap()
}

/// Random per-pixel distributions with exact zeros and frequent ties.
pub fn random_prediction(rng: &mut ChaCha8Rng, h: usize, w: usize, c: usize) -> SoftPrediction {
    let mut scores = Vec::with_capacity(h * w * c);
    let mut px = vec![0f64; c];
    for _ in 0..h * w {
        loop {
            for v in px.iter_mut() {
                *v = match rng.random_range(0..10) {
                    0..=2 => 0.0,
                    3..=5 => rng.random_range(1..=4) as f64 / 8.0,
                    _ => rng.random::<f64>(),
                };
            }
            if px.iter().any(|&v| v > 0.0) {
                break;
            }
        }
        let sum: f64 = px.iter().sum();
        scores.extend(px.iter().map(|&v| (v / sum) as f32));
    }
    SoftPrediction::new(h, w, c, scores).unwrap()
}

pub fn random_set(rng: &mut ChaCha8Rng, c: usize) -> ClassSet {
    (0..c as u8).filter(|_| rng.random_bool(0.4)).collect()
}

pub struct Instance {
    pub rel: OntologyRelation,
    pub table: ConstraintTable,
    pub gt: LabelMap,
    pub augs: Vec<(SoftPrediction, AugDescriptor)>,
    pub cfg: RefineConfig,
}

pub fn random_instance(seed: u64) -> Instance {
    let mut rng = rng(seed);
    let c = rng.random_range(2..=8);
    let e = rng.random_range(1..=5);
    let extra = taxonomy("e", e, rng.random_bool(0.5));
    let source = taxonomy("s", c, false);
    let mut rel = OntologyRelation::new(extra.clone(), source);
    for id in 0..e as u8 {
        let set = if rng.random_bool(0.9) {
            let mut s = random_set(&mut rng, c);
            s.insert(rng.random_range(0..c as u8));
            s
        } else {
            ClassSet::empty()
        };
        rel.map(id, set).unwrap();
    }
    if rng.random_bool(0.3) {
        rel.map_void(random_set(&mut rng, c)).unwrap();
    }
    if rng.random_bool(0.3) {
        rel.exclude(rng.random_range(0..c as u8)).unwrap();
    }
    let table = ConstraintTable::build_unchecked(&rel);

    let (h, w) = (rng.random_range(1..=16), rng.random_range(1..=16));
    let mut labels: Vec<u8> = (0..extra.len() as u8).collect();
    labels.push(VOID_LABEL);
    let ids = (0..h * w).map(|_| *labels.choose(&mut rng).unwrap()).collect();
    let gt = LabelMap::new(h, w, ids).unwrap();

    let mut descs: Vec<(f32, bool)> = STANDARD_SCALES.iter().flat_map(|&s| [(s, false), (s, true)]).collect();
    descs.shuffle(&mut rng);
    let n = rng.random_range(1..=4);
    let augs = descs[..n]
        .iter()
        .map(|&(scale, flip)| {
            let d = AugDescriptor::new(flip, scale, h, w);
            let (sh, sw) = d.scaled_dims();
            (random_prediction(&mut rng, sh, sw, c), d)
        })
        .collect();
    let fallback = [FallbackPolicy::Void, FallbackPolicy::UnconstrainedArgmax, FallbackPolicy::Error]
        [rng.random_range(0..3)];
    let cfg = RefineConfig {
        fallback,
        renormalize_output: rng.random_bool(0.5),
        ..RefineConfig::default()
    };
    Instance {
        rel,
        table,
        gt,
        augs,
        cfg,
    }
}

// ---- scalar reference implementation ----

/// Scores as `[row][col][channel]`.
pub type Grid = Vec<Vec<Vec<f32>>>;

pub fn to_grid(p: &SoftPrediction) -> Grid {
    (0..p.height())
        .map(|r| (0..p.width()).map(|c| p.pixel(r, c).to_vec()).collect())
        .collect()
}

fn renorm(px: &mut [f32]) {
    let mut sum = 0f64;
    for &v in px.iter() {
        sum += v as f64;
    }
    if sum > 0.0 {
        for v in px.iter_mut() {
            *v = (*v as f64 / sum) as f32;
        }
    }
}

fn sample_axis(dst: usize, input: usize, output: usize) -> (usize, usize, f64) {
    let ratio = input as f64 / output as f64;
    let mut src = (dst as f64 + 0.5) * ratio - 0.5;
    if src < 0.0 {
        src = 0.0;
    }
    if src > (input - 1) as f64 {
        src = (input - 1) as f64;
    }
    let lo = src.floor() as usize;
    let hi = if lo + 1 < input { lo + 1 } else { input - 1 };
    (lo, hi, src - lo as f64)
}

/// Mirror, then half-pixel bilinear resize and renormalize when sizes differ.
pub fn oracle_inverse(grid: &Grid, d: &AugDescriptor) -> Grid {
    let mut g = grid.clone();
    if d.hflip {
        for row in g.iter_mut() {
            row.reverse();
        }
    }
    let (ih, iw) = (g.len(), g[0].len());
    let (oh, ow) = (d.base_height, d.base_width);
    if (ih, iw) == (oh, ow) {
        return g;
    }
    let c = g[0][0].len();
    let mut out = vec![vec![vec![0f32; c]; ow]; oh];
    for (y, out_row) in out.iter_mut().enumerate() {
        let (y0, y1, wy) = sample_axis(y, ih, oh);
        for (x, px) in out_row.iter_mut().enumerate() {
            let (x0, x1, wx) = sample_axis(x, iw, ow);
            for ch in 0..c {
                let (a, b) = (g[y0][x0][ch] as f64, g[y0][x1][ch] as f64);
                let (cc, dd) = (g[y1][x0][ch] as f64, g[y1][x1][ch] as f64);
                let top = (1.0 - wx) * a + wx * b;
                let bottom = (1.0 - wx) * cc + wx * dd;
                px[ch] = ((1.0 - wy) * top + wy * bottom) as f32;
            }
            renorm(px);
        }
    }
    out
}

/// Per-entry ascending sum in f64, divided by the count.
pub fn oracle_fuse(grids: &[Grid]) -> Grid {
    if grids.len() == 1 {
        return grids[0].clone();
    }
    let mut out = grids[0].clone();
    for (r, row) in out.iter_mut().enumerate() {
        for (c, px) in row.iter_mut().enumerate() {
            for (ch, v) in px.iter_mut().enumerate() {
                let mut vals: Vec<f32> = grids.iter().map(|g| g[r][c][ch]).collect();
                vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
                let mut sum = 0f64;
                for x in vals {
                    sum += x as f64;
                }
                *v = (sum / grids.len() as f64) as f32;
            }
        }
    }
    out
}

/// Allowed sets per label value, built straight from the relation.
pub fn oracle_rows(rel: &OntologyRelation) -> Vec<Option<BTreeSet<u8>>> {
    let excluded: BTreeSet<u8> = rel.excluded().iter().collect();
    let strip = |s: &ClassSet| s.iter().filter(|c| !excluded.contains(c)).collect::<BTreeSet<u8>>();
    let mut rows: Vec<Option<BTreeSet<u8>>> = vec![None; 256];
    let mut union = BTreeSet::new();
    for (&id, set) in rel.entries() {
        let row = strip(set);
        union.extend(row.iter().copied());
        rows[id as usize] = Some(row);
    }
    let void_row = rel.void_entry().map_or(union, strip);
    if let Some(v) = rel.extra().void_id() {
        rows[v as usize] = Some(void_row.clone());
    }
    rows[VOID_LABEL as usize] = Some(void_row);
    for class in rel.extra().classes() {
        if rows[class.id as usize].is_none() {
            rows[class.id as usize] = Some(BTreeSet::new());
        }
    }
    rows
}

fn first_max(px: &[f32]) -> u8 {
    let mut best = 0;
    for i in 1..px.len() {
        if px[i] > px[best] {
            best = i;
        }
    }
    best as u8
}

pub struct OracleOutput {
    pub masked: Grid,
    pub labels: Vec<u8>,
}

/// Staged composition with scalar loops. `Err` carries the first fallback
/// pixel under the error policy.
pub fn oracle_refine(inst: &Instance) -> Result<OracleOutput, (usize, usize)> {
    let canonical: Vec<Grid> = inst.augs.iter().map(|(p, d)| oracle_inverse(&to_grid(p), d)).collect();
    let fused = oracle_fuse(&canonical);
    let rows = oracle_rows(&inst.rel);
    let mut masked = fused.clone();
    let mut labels = Vec::new();
    for (r, row) in masked.iter_mut().enumerate() {
        for (c, px) in row.iter_mut().enumerate() {
            let allowed = rows[inst.gt.get(r, c) as usize].as_ref().unwrap();
            let original = fused[r][c].clone();
            let mut mass = 0f64;
            for (ch, v) in px.iter_mut().enumerate() {
                if !allowed.contains(&(ch as u8)) {
                    *v = 0.0;
                }
                mass += *v as f64;
            }
            if mass <= 0.0 {
                *px = original.clone();
                match inst.cfg.fallback {
                    FallbackPolicy::Error => return Err((r, c)),
                    FallbackPolicy::Void => labels.push(VOID_LABEL),
                    FallbackPolicy::UnconstrainedArgmax => labels.push(first_max(&original)),
                }
                continue;
            }
            if inst.cfg.renormalize_output {
                for v in px.iter_mut() {
                    *v = (*v as f64 / mass) as f32;
                }
            }
            labels.push(first_max(px));
        }
    }
    Ok(OracleOutput { masked, labels })
}
