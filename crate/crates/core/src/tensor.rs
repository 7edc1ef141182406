//! In-memory score tensors, label maps and augmentation descriptors.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::taxonomy::Taxonomy;

/// Per-pixel sum tolerance for a score vector to count as on the simplex.
pub const SIMPLEX_TOL: f64 = 1e-4;

/// `H x W x C` scores, row-major, channel-minor.
#[derive(Debug, Clone, PartialEq)]
pub struct SoftPrediction {
    height: usize,
    width: usize,
    channels: usize,
    scores: Vec<f32>,
}

impl SoftPrediction {
    /// Wraps a score buffer. Every score must be finite and in `[0, 1]`;
    /// per-pixel sums are not checked here (see [`Self::check_simplex`]).
    pub fn new(height: usize, width: usize, channels: usize, scores: Vec<f32>) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(Error::Shape(format!("empty tensor {height}x{width}")));
        }
        if !(2..=255).contains(&channels) {
            return Err(Error::Shape(format!("channel count {channels} outside 2..=255")));
        }
        let expected = height * width * channels;
        if scores.len() != expected {
            return Err(Error::Shape(format!(
                "{height}x{width}x{channels} needs {expected} scores, got {}",
                scores.len()
            )));
        }
        if let Some(i) = scores.iter().position(|s| !(0.0..=1.0).contains(s)) {
            let px = i / channels;
            return Err(Error::Invalid(format!(
                "score {} outside [0,1] at ({},{}) channel {}",
                scores[i],
                px / width,
                px % width,
                i % channels
            )));
        }
        Ok(Self {
            height,
            width,
            channels,
            scores,
        })
    }

    /// Uniform `1/C` scores.
    pub fn uniform(height: usize, width: usize, channels: usize) -> Result<Self> {
        let v = 1.0 / channels as f32;
        Self::new(height, width, channels, vec![v; height * width * channels])
    }

    pub(crate) fn from_parts_unchecked(
        height: usize,
        width: usize,
        channels: usize,
        scores: Vec<f32>,
    ) -> Self {
        debug_assert_eq!(scores.len(), height * width * channels);
        Self {
            height,
            width,
            channels,
            scores,
        }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        (self.height, self.width, self.channels)
    }

    pub fn scores(&self) -> &[f32] {
        &self.scores
    }

    pub fn into_scores(self) -> Vec<f32> {
        self.scores
    }

    #[inline]
    pub fn pixel(&self, row: usize, col: usize) -> &[f32] {
        let start = (row * self.width + col) * self.channels;
        &self.scores[start..start + self.channels]
    }

    /// Pixels in row-major order.
    pub fn pixels(&self) -> std::slice::ChunksExact<'_, f32> {
        self.scores.chunks_exact(self.channels)
    }

    /// First pixel whose scores sum outside `1 ± tol`, with its sum.
    pub fn simplex_violation(&self, tol: f64) -> Option<(usize, usize, f64)> {
        self.pixels().enumerate().find_map(|(i, px)| {
            let sum = pixel_sum(px);
            ((sum - 1.0).abs() > tol).then(|| (i / self.width, i % self.width, sum))
        })
    }

    pub fn check_simplex(&self, tol: f64) -> Result<()> {
        match self.simplex_violation(tol) {
            None => Ok(()),
            Some((r, c, sum)) => Err(Error::Invalid(format!(
                "pixel ({r},{c}) sums to {sum}, outside 1 ± {tol}"
            ))),
        }
    }

    /// Rescales every pixel to sum to one; zero-mass pixels are left as is.
    pub fn renormalize(&mut self) {
        for px in self.scores.chunks_exact_mut(self.channels) {
            renormalize_pixel(px);
        }
    }

    /// Column-mirrored copy.
    pub fn flipped(&self) -> Self {
        let c = self.channels;
        let mut out = Vec::with_capacity(self.scores.len());
        for row in self.scores.chunks_exact(self.width * c) {
            for px in row.chunks_exact(c).rev() {
                out.extend_from_slice(px);
            }
        }
        Self::from_parts_unchecked(self.height, self.width, c, out)
    }
}

#[inline]
pub(crate) fn pixel_sum(px: &[f32]) -> f64 {
    px.iter().map(|&v| v as f64).sum()
}

/// Divides a pixel by its f64 sum. Returns false for zero mass.
#[inline]
pub(crate) fn renormalize_pixel(px: &mut [f32]) -> bool {
    let sum = pixel_sum(px);
    if sum <= 0.0 {
        return false;
    }
    for v in px.iter_mut() {
        *v = (*v as f64 / sum) as f32;
    }
    true
}

/// `H x W` class ids with 255 as the void sentinel.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct LabelMap {
    height: usize,
    width: usize,
    ids: Vec<u8>,
}

impl LabelMap {
    pub fn new(height: usize, width: usize, ids: Vec<u8>) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(Error::Shape(format!("empty label map {height}x{width}")));
        }
        if ids.len() != height * width {
            return Err(Error::Shape(format!(
                "{height}x{width} label map needs {} ids, got {}",
                height * width,
                ids.len()
            )));
        }
        Ok(Self { height, width, ids })
    }

    pub fn filled(height: usize, width: usize, id: u8) -> Result<Self> {
        Self::new(height, width, vec![id; height * width])
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn ids(&self) -> &[u8] {
        &self.ids
    }

    pub fn ids_mut(&mut self) -> &mut [u8] {
        &mut self.ids
    }

    pub fn into_ids(self) -> Vec<u8> {
        self.ids
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> u8 {
        self.ids[row * self.width + col]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, id: u8) {
        self.ids[row * self.width + col] = id;
    }

    /// First pixel whose id the taxonomy does not define, as `(id, row, col)`.
    pub fn first_invalid(&self, tax: &Taxonomy) -> Option<(u8, usize, usize)> {
        self.ids
            .iter()
            .position(|&id| !tax.is_valid_label(id))
            .map(|i| (self.ids[i], i / self.width, i % self.width))
    }
}

/// Scales a teacher may be run at.
pub const STANDARD_SCALES: [f32; 7] = [0.5, 0.75, 1.0, 1.25, 1.5, 1.75, 2.0];

/// The geometric augmentation a prediction was made under.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AugDescriptor {
    pub hflip: bool,
    pub scale: f32,
    pub base_height: usize,
    pub base_width: usize,
}

impl AugDescriptor {
    pub fn identity(base_height: usize, base_width: usize) -> Self {
        Self {
            hflip: false,
            scale: 1.0,
            base_height,
            base_width,
        }
    }

    pub fn new(hflip: bool, scale: f32, base_height: usize, base_width: usize) -> Self {
        Self {
            hflip,
            scale,
            base_height,
            base_width,
        }
    }

    /// `(round(base_h * scale), round(base_w * scale))`
    pub fn scaled_dims(&self) -> (usize, usize) {
        (
            scaled(self.base_height, self.scale),
            scaled(self.base_width, self.scale),
        )
    }

    pub fn is_identity(&self) -> bool {
        !self.hflip && self.scale == 1.0
    }

    pub fn validate(&self, allow_any_scale: bool) -> Result<()> {
        if !(self.scale.is_finite() && self.scale > 0.0) {
            return Err(Error::Invalid(format!("scale {} is not positive", self.scale)));
        }
        if !allow_any_scale && !STANDARD_SCALES.contains(&self.scale) {
            return Err(Error::Invalid(format!(
                "scale {} not in {STANDARD_SCALES:?}",
                self.scale
            )));
        }
        let (h, w) = self.scaled_dims();
        if self.base_height == 0 || self.base_width == 0 || h == 0 || w == 0 {
            return Err(Error::Shape(format!(
                "base {}x{} at scale {} gives empty {h}x{w}",
                self.base_height, self.base_width, self.scale
            )));
        }
        Ok(())
    }

    /// File stem for this augmentation: `s<scale*100, 3 digits>[_flip]`.
    pub fn file_stem(&self) -> String {
        aug_stem(self.scale, self.hflip)
    }
}

pub(crate) fn scaled(base: usize, scale: f32) -> usize {
    (base as f64 * scale as f64).round() as usize
}

/// `s075_flip` style stem for a scale and flip.
pub fn aug_stem(scale: f32, hflip: bool) -> String {
    let pct = (scale as f64 * 100.0).round() as u64;
    if hflip {
        format!("s{pct:03}_flip")
    } else {
        format!("s{pct:03}")
    }
}

/// The full test-time augmentation set: every standard scale, with and
/// without a horizontal flip, as file stems.
pub fn standard_aug_stems() -> Vec<String> {
    STANDARD_SCALES
        .iter()
        .flat_map(|&s| [aug_stem(s, false), aug_stem(s, true)])
        .collect()
}
