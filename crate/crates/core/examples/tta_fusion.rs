//! Augment a random prediction with all 14 flip/scale combinations, map
//! each back to the base grid and fuse them.

use pseudolabel::refine::{augment, fuse_tta, inverse_transform};
use pseudolabel::tensor::STANDARD_SCALES;
use pseudolabel::{AugDescriptor, SoftPrediction};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> pseudolabel::Result<()> {
    let (h, w, c) = (48, 64, 6);
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut scores = Vec::with_capacity(h * w * c);
    for _ in 0..h * w {
        let px: Vec<f64> = (0..c).map(|_| rng.random::<f64>()).collect();
        let sum: f64 = px.iter().sum();
        scores.extend(px.iter().map(|v| (v / sum) as f32));
    }
    let base = SoftPrediction::new(h, w, c, scores)?;

    let mut canonical = Vec::new();
    for &scale in &STANDARD_SCALES {
        for hflip in [false, true] {
            let d = AugDescriptor::new(hflip, scale, h, w);
            let aug = augment(&base, &d)?;
            let back = inverse_transform(&aug, &d)?;
            let err = back
                .scores()
                .iter()
                .zip(base.scores())
                .map(|(a, b)| (a - b).abs())
                .fold(0f32, f32::max);
            println!("{:<9}  {:>3}x{:<3}  max |inverse - base| = {err:.4}", d.file_stem(), aug.height(), aug.width());
            canonical.push(back);
        }
    }
    let fused = fuse_tta(&canonical)?;
    let worst = fused
        .pixels()
        .map(|px| (px.iter().map(|&v| v as f64).sum::<f64>() - 1.0).abs())
        .fold(0f64, f64::max);
    println!("fused {} predictions, worst pixel mass drift {worst:e}", canonical.len());
    Ok(())
}
