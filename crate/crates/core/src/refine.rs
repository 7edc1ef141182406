//! Test-time-augmentation fusion, ontology constraint masking and hardening.
//!
//! The staged pipeline is
//!
//! ```text
//! harden(constraint_mask(fuse_tta(inverse_transform(p_a) for each a)))
//! ```
//!
//! and [`refine_image`] runs the same arithmetic in a single pass over the
//! fused tensor without materializing the masked scores.
//!
//! Numeric conventions, fixed so that results are reproducible bit for bit:
//!
//! * resizing is separable bilinear with half-pixel centers
//!   (`src = (dst + 0.5) * in / out - 0.5`, clamped to the edge); each output
//!   value is `(1-wy)*((1-wx)*a + wx*b) + wy*((1-wx)*c + wx*d)` evaluated in
//!   f64 and rounded to f32, after which the pixel is divided by its f64 sum;
//! * fusion sorts the values of each (pixel, channel) ascending, sums them in
//!   f64 and divides by the input count, so input order never matters;
//! * renormalization after masking divides each kept score by the f64 sum of
//!   the kept scores;
//! * argmax ties go to the lowest class id.

use std::borrow::Cow;

use serde::{Deserialize, Serialize};

use crate::classset::ClassSet;
use crate::constraint::ConstraintTable;
use crate::error::{Error, FormatError, Result};
use crate::ontology::FallbackPolicy;
use crate::taxonomy::VOID_LABEL;
use crate::tensor::{pixel_sum, renormalize_pixel, AugDescriptor, LabelMap, SoftPrediction, SIMPLEX_TOL};

/// How many fallback pixel coordinates a per-image report keeps.
pub const FALLBACK_SAMPLE_LIMIT: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RefineConfig {
    pub fallback: FallbackPolicy,
    /// Rescale masked pixels to unit mass (matters for soft export only).
    pub renormalize_output: bool,
    /// Per-pixel sum tolerance required of fusion inputs.
    pub simplex_tol: f64,
    /// Record the coordinates of the first fallback pixels in the report.
    pub report_fallback_pixels: bool,
}

impl Default for RefineConfig {
    fn default() -> Self {
        Self {
            fallback: FallbackPolicy::Void,
            renormalize_output: false,
            simplex_tol: SIMPLEX_TOL,
            report_fallback_pixels: true,
        }
    }
}

impl RefineConfig {
    pub fn with_fallback(fallback: FallbackPolicy) -> Self {
        Self {
            fallback,
            ..Self::default()
        }
    }
}

/// Pixel accounting for one image, or a sum over many.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RefineReport {
    pub pixels_total: u64,
    /// Pixels whose allowed set is a strict subset of the source classes.
    pub pixels_constrained: u64,
    /// Pixels whose allowed set kept no probability mass.
    pub pixels_fallback: u64,
    /// Pixels whose hardened label differs from the unconstrained argmax.
    pub pixels_changed_by_mask: u64,
    /// Output label counts, indexed by source class id.
    pub class_histogram: Vec<u64>,
    /// Output pixels set to the void sentinel.
    pub void_pixels: u64,
    /// `[row, col]` of the first fallback pixels, per image only.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub fallback_samples: Vec<[usize; 2]>,
}

impl RefineReport {
    pub fn new(channels: usize) -> Self {
        Self {
            class_histogram: vec![0; channels],
            ..Self::default()
        }
    }

    /// Adds another report's counts. Coordinate samples are per image and
    /// are not carried over.
    pub fn merge(&mut self, other: &RefineReport) {
        self.pixels_total += other.pixels_total;
        self.pixels_constrained += other.pixels_constrained;
        self.pixels_fallback += other.pixels_fallback;
        self.pixels_changed_by_mask += other.pixels_changed_by_mask;
        self.void_pixels += other.void_pixels;
        if self.class_histogram.len() < other.class_histogram.len() {
            self.class_histogram.resize(other.class_histogram.len(), 0);
        }
        for (a, b) in self.class_histogram.iter_mut().zip(&other.class_histogram) {
            *a += b;
        }
    }

    fn tally(&mut self, outcome: &PixelOutcome, index: usize, width: usize, cfg: &RefineConfig) {
        self.pixels_total += 1;
        self.pixels_constrained += outcome.constrained as u64;
        self.pixels_changed_by_mask += outcome.changed as u64;
        if outcome.fallback {
            self.pixels_fallback += 1;
            if cfg.report_fallback_pixels && self.fallback_samples.len() < FALLBACK_SAMPLE_LIMIT {
                self.fallback_samples.push([index / width, index % width]);
            }
        }
        if outcome.label == VOID_LABEL {
            self.void_pixels += 1;
        } else {
            self.class_histogram[outcome.label as usize] += 1;
        }
    }
}

/// Masked scores plus the per-pixel fallback flags hardening needs.
#[derive(Debug, Clone, PartialEq)]
pub struct MaskOutput {
    pub scores: SoftPrediction,
    pub fallback: Vec<bool>,
    pub report: RefineReport,
}

/// Index of the largest score; ties go to the lowest index.
#[inline]
pub fn argmax(scores: &[f32]) -> u8 {
    let mut best = 0usize;
    let mut best_v = scores[0];
    for (i, &v) in scores.iter().enumerate().skip(1) {
        if v > best_v {
            best = i;
            best_v = v;
        }
    }
    best as u8
}

struct Axis {
    lo: Vec<usize>,
    hi: Vec<usize>,
    w: Vec<f64>,
}

fn axis(input: usize, output: usize) -> Axis {
    let ratio = input as f64 / output as f64;
    let mut axis = Axis {
        lo: Vec::with_capacity(output),
        hi: Vec::with_capacity(output),
        w: Vec::with_capacity(output),
    };
    for dst in 0..output {
        let src = ((dst as f64 + 0.5) * ratio - 0.5).clamp(0.0, (input - 1) as f64);
        let lo = src.floor() as usize;
        axis.lo.push(lo);
        axis.hi.push((lo + 1).min(input - 1));
        axis.w.push(src - lo as f64);
    }
    axis
}

/// Bilinear resize of every channel followed by per-pixel renormalization.
fn resize(pred: &SoftPrediction, out_h: usize, out_w: usize) -> SoftPrediction {
    let (in_h, in_w, c) = pred.dims();
    if (in_h, in_w) == (out_h, out_w) {
        return pred.clone();
    }
    let ys = axis(in_h, out_h);
    let xs = axis(in_w, out_w);
    let src = pred.scores();
    let at = |r: usize, col: usize| (r * in_w + col) * c;
    let mut out = vec![0f32; out_h * out_w * c];
    for (y, row_out) in out.chunks_exact_mut(out_w * c).enumerate() {
        let (y0, y1, wy) = (ys.lo[y], ys.hi[y], ys.w[y]);
        for (x, px) in row_out.chunks_exact_mut(c).enumerate() {
            let (x0, x1, wx) = (xs.lo[x], xs.hi[x], xs.w[x]);
            let (a, b, cc, d) = (at(y0, x0), at(y0, x1), at(y1, x0), at(y1, x1));
            for (ch, o) in px.iter_mut().enumerate() {
                let top = (1.0 - wx) * src[a + ch] as f64 + wx * src[b + ch] as f64;
                let bottom = (1.0 - wx) * src[cc + ch] as f64 + wx * src[d + ch] as f64;
                *o = ((1.0 - wy) * top + wy * bottom) as f32;
            }
            renormalize_pixel(px);
        }
    }
    SoftPrediction::from_parts_unchecked(out_h, out_w, c, out)
}

/// Applies an augmentation to a canonical-geometry prediction: resize to the
/// scaled size, then mirror if flipped. The inverse of [`inverse_transform`]
/// up to interpolation error.
pub fn augment(pred: &SoftPrediction, desc: &AugDescriptor) -> Result<SoftPrediction> {
    desc.validate(true)?;
    if (pred.height(), pred.width()) != (desc.base_height, desc.base_width) {
        return Err(Error::Shape(format!(
            "prediction is {}x{}, descriptor base is {}x{}",
            pred.height(),
            pred.width(),
            desc.base_height,
            desc.base_width
        )));
    }
    let (h, w) = desc.scaled_dims();
    let resized = resize(pred, h, w);
    Ok(if desc.hflip { resized.flipped() } else { resized })
}

/// Maps an augmented prediction back to canonical geometry: undo the flip by
/// mirroring columns, undo the scale by bilinear resizing. Identity
/// descriptors return the input unchanged.
pub fn inverse_transform(pred: &SoftPrediction, desc: &AugDescriptor) -> Result<SoftPrediction> {
    inverse_transform_cow(pred, desc).map(Cow::into_owned)
}

fn inverse_transform_cow<'a>(
    pred: &'a SoftPrediction,
    desc: &AugDescriptor,
) -> Result<Cow<'a, SoftPrediction>> {
    desc.validate(true)?;
    let expected = desc.scaled_dims();
    if (pred.height(), pred.width()) != expected {
        return Err(Error::Shape(format!(
            "prediction is {}x{} but base {}x{} at scale {} gives {}x{}",
            pred.height(),
            pred.width(),
            desc.base_height,
            desc.base_width,
            desc.scale,
            expected.0,
            expected.1
        )));
    }
    let unflipped = if desc.hflip {
        Cow::Owned(pred.flipped())
    } else {
        Cow::Borrowed(pred)
    };
    if expected == (desc.base_height, desc.base_width) {
        return Ok(unflipped);
    }
    Ok(Cow::Owned(resize(&unflipped, desc.base_height, desc.base_width)))
}

/// Mean of canonical-geometry predictions. Bit-identical under any
/// permutation of `preds`.
pub fn fuse_tta(preds: &[SoftPrediction]) -> Result<SoftPrediction> {
    fuse_tta_with(preds, SIMPLEX_TOL)
}

fn check_fusion_inputs<P: AsRef<SoftPrediction>>(preds: &[P], tol: f64) -> Result<()> {
    let first = preds
        .first()
        .ok_or_else(|| Error::Invalid("cannot fuse an empty list of predictions".into()))?
        .as_ref();
    for (i, p) in preds.iter().enumerate() {
        let p = p.as_ref();
        if p.dims() != first.dims() {
            return Err(Error::Shape(format!(
                "prediction {i} is {:?}, prediction 0 is {:?}",
                p.dims(),
                first.dims()
            )));
        }
        if let Some((r, c, sum)) = p.simplex_violation(tol) {
            return Err(Error::Invalid(format!(
                "prediction {i} pixel ({r},{c}) sums to {sum}, outside 1 ± {tol}"
            )));
        }
    }
    Ok(())
}

fn fuse_tta_with(preds: &[SoftPrediction], tol: f64) -> Result<SoftPrediction> {
    check_fusion_inputs(preds, tol)?;
    Ok(fuse_unchecked(preds))
}

fn fuse_unchecked<P: AsRef<SoftPrediction>>(preds: &[P]) -> SoftPrediction {
    let first = preds[0].as_ref();
    if preds.len() == 1 {
        return first.clone();
    }
    let (h, w, c) = first.dims();
    let n = preds.len();
    let inputs: Vec<&[f32]> = preds.iter().map(|p| p.as_ref().scores()).collect();
    let mut vals = vec![0f32; n];
    let mut out = vec![0f32; h * w * c];
    for (i, o) in out.iter_mut().enumerate() {
        for (v, input) in vals.iter_mut().zip(&inputs) {
            *v = input[i];
        }
        // scores are finite, so total_cmp is the numeric order
        vals.sort_unstable_by(f32::total_cmp);
        let sum: f64 = vals.iter().map(|&v| v as f64).sum();
        *o = (sum / n as f64) as f32;
    }
    SoftPrediction::from_parts_unchecked(h, w, c, out)
}

impl AsRef<SoftPrediction> for SoftPrediction {
    fn as_ref(&self) -> &SoftPrediction {
        self
    }
}

struct PixelOutcome {
    label: u8,
    fallback: bool,
    constrained: bool,
    changed: bool,
}

/// Per-label 0/1 channel multipliers. Multiplying a finite non-negative
/// score by 1 or 0 is exact, so this matches a membership test bit for bit
/// while letting the inner loop vectorize.
struct RowMasks {
    channels: usize,
    weights: Vec<f32>,
    constrained: [bool; 256],
}

impl RowMasks {
    fn new(table: &ConstraintTable, channels: usize) -> Self {
        let full = ClassSet::full(channels);
        let mut weights = vec![0f32; 256 * channels];
        let mut constrained = [false; 256];
        for label in 0..=255u8 {
            if !table.is_known_label(label) {
                continue;
            }
            let row = table.row_unchecked(label);
            constrained[label as usize] = *row != full;
            for c in row.iter().filter(|&c| (c as usize) < channels) {
                weights[label as usize * channels + c as usize] = 1.0;
            }
        }
        Self {
            channels,
            weights,
            constrained,
        }
    }

    #[inline]
    fn row(&self, label: u8) -> &[f32] {
        let start = label as usize * self.channels;
        &self.weights[start..start + self.channels]
    }
}

/// Masks one pixel into `out` and decides its hardened label.
#[inline]
fn refine_pixel(src: &[f32], label: u8, masks: &RowMasks, cfg: &RefineConfig, out: &mut [f32]) -> PixelOutcome {
    let before = argmax(src);
    let constrained = masks.constrained[label as usize];
    let mut mass = 0f64;
    for ((&v, &m), o) in src.iter().zip(masks.row(label)).zip(out.iter_mut()) {
        *o = v * m;
        mass += *o as f64;
    }
    if mass <= 0.0 {
        out.copy_from_slice(src);
        let label = match cfg.fallback {
            FallbackPolicy::Void | FallbackPolicy::Error => VOID_LABEL,
            FallbackPolicy::UnconstrainedArgmax => before,
        };
        return PixelOutcome {
            label,
            fallback: true,
            constrained,
            changed: label != before,
        };
    }
    if cfg.renormalize_output {
        for o in out.iter_mut() {
            *o = (*o as f64 / mass) as f32;
        }
    }
    let label = argmax(out);
    PixelOutcome {
        label,
        fallback: false,
        constrained,
        changed: label != before,
    }
}

fn check_mask_inputs(pred: &SoftPrediction, gt: &LabelMap, table: &ConstraintTable) -> Result<()> {
    if (pred.height(), pred.width()) != gt.dims() {
        return Err(Error::Shape(format!(
            "prediction is {}x{}, ground truth is {}x{}",
            pred.height(),
            pred.width(),
            gt.height(),
            gt.width()
        )));
    }
    if pred.channels() != table.source_len() {
        return Err(Error::Shape(format!(
            "prediction has {} channels, source taxonomy has {} classes",
            pred.channels(),
            table.source_len()
        )));
    }
    if let Some(i) = gt.ids().iter().position(|&l| !table.is_known_label(l)) {
        return Err(FormatError::InvalidLabel {
            id: gt.ids()[i],
            row: i / gt.width(),
            col: i % gt.width(),
        }
        .into());
    }
    Ok(())
}

/// Zeroes every score whose class the pixel's ground-truth row does not
/// allow.
pub fn constraint_mask(
    pred: &SoftPrediction,
    gt: &LabelMap,
    table: &ConstraintTable,
    cfg: &RefineConfig,
) -> Result<MaskOutput> {
    check_mask_inputs(pred, gt, table)?;
    let (h, w, c) = pred.dims();
    let masks = RowMasks::new(table, c);
    let mut out = vec![0f32; h * w * c];
    let mut fallback = vec![false; h * w];
    let mut report = RefineReport::new(c);
    for (i, ((src, dst), &label)) in pred
        .pixels()
        .zip(out.chunks_exact_mut(c))
        .zip(gt.ids())
        .enumerate()
    {
        let outcome = refine_pixel(src, label, &masks, cfg, dst);
        if outcome.fallback && cfg.fallback == FallbackPolicy::Error {
            return Err(Error::Fallback {
                row: i / w,
                col: i % w,
                label,
            });
        }
        fallback[i] = outcome.fallback;
        report.tally(&outcome, i, w, cfg);
    }
    Ok(MaskOutput {
        scores: SoftPrediction::from_parts_unchecked(h, w, c, out),
        fallback,
        report,
    })
}

/// Argmax per pixel; fallback pixels become void under the void policy.
pub fn harden(pred: &SoftPrediction, fallback: &[bool], cfg: &RefineConfig) -> Result<LabelMap> {
    let (h, w, _) = pred.dims();
    if fallback.len() != h * w {
        return Err(Error::Shape(format!(
            "fallback mask has {} entries for {} pixels",
            fallback.len(),
            h * w
        )));
    }
    let ids = pred
        .pixels()
        .zip(fallback)
        .map(|(px, &fb)| {
            if fb && cfg.fallback == FallbackPolicy::Void {
                VOID_LABEL
            } else {
                argmax(px)
            }
        })
        .collect();
    LabelMap::new(h, w, ids)
}

/// Full refinement of one image from its augmented predictions.
///
/// Every descriptor's base geometry must equal the ground truth's size.
pub fn refine_image(
    aug_preds: &[(SoftPrediction, AugDescriptor)],
    gt: &LabelMap,
    table: &ConstraintTable,
    cfg: &RefineConfig,
) -> Result<(LabelMap, RefineReport)> {
    if aug_preds.is_empty() {
        return Err(Error::Invalid("no predictions to refine".into()));
    }
    for (_, desc) in aug_preds {
        if (desc.base_height, desc.base_width) != gt.dims() {
            return Err(Error::Shape(format!(
                "augmentation {} has base {}x{}, ground truth is {}x{}",
                desc.file_stem(),
                desc.base_height,
                desc.base_width,
                gt.height(),
                gt.width()
            )));
        }
    }
    let canonical = aug_preds
        .iter()
        .map(|(p, d)| inverse_transform_cow(p, d))
        .collect::<Result<Vec<_>>>()?;
    check_fusion_inputs(&canonical, cfg.simplex_tol)?;
    let fused = if canonical.len() == 1 {
        Cow::Borrowed(canonical[0].as_ref())
    } else {
        Cow::Owned(fuse_unchecked(&canonical))
    };
    let fused: &SoftPrediction = &fused;
    check_mask_inputs(fused, gt, table)?;

    let (h, w, c) = fused.dims();
    let masks = RowMasks::new(table, c);
    let mut buf = [0f32; 256];
    let buf = &mut buf[..c];
    let mut ids = vec![0u8; h * w];
    let mut report = RefineReport::new(c);
    for (i, ((src, &label), id)) in fused.pixels().zip(gt.ids()).zip(ids.iter_mut()).enumerate() {
        let outcome = refine_pixel(src, label, &masks, cfg, buf);
        if outcome.fallback && cfg.fallback == FallbackPolicy::Error {
            return Err(Error::Fallback {
                row: i / w,
                col: i % w,
                label,
            });
        }
        *id = outcome.label;
        report.tally(&outcome, i, w, cfg);
    }
    Ok((LabelMap::new(h, w, ids)?, report))
}

/// Scores normalized to unit mass per pixel, for soft export.
pub fn normalized_copy(pred: &SoftPrediction) -> SoftPrediction {
    let mut out = pred.clone();
    out.renormalize();
    out
}

/// Sum of one pixel's scores in f64.
pub fn pixel_mass(px: &[f32]) -> f64 {
    pixel_sum(px)
}
