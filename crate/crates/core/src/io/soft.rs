//! The `.sftp` soft-prediction format.
//!
//! ```text
//! offset  size  field
//!      0     6  magic "SFTP1\n"
//!      6     4  height   u32 LE
//!     10     4  width    u32 LE
//!     14     4  channels u32 LE
//!     18     1  flags    (bit 0 = hflip, other bits must be zero)
//!     19     4  scale    f32 LE
//!     23   4·N  scores   f32 LE, N = H·W·C, row-major, channel-minor
//! ```
//!
//! The canonical (base) geometry is not stored; it comes from an optional
//! `<stem>.aug.json` sidecar or is recovered as `round(H / scale)`.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, FormatError, Result};
use crate::tensor::{scaled, AugDescriptor, SoftPrediction, STANDARD_SCALES};

pub const MAGIC: &[u8; 6] = b"SFTP1\n";
pub const HEADER_LEN: usize = 23;

/// Largest per-pixel drift from unit mass that loading repairs by
/// renormalization; anything beyond is rejected.
pub const MAX_RENORMALIZE_DRIFT: f64 = 0.1;

#[derive(Debug, Clone, Copy, Default)]
pub struct ReadOptions {
    /// Accept scales outside [`STANDARD_SCALES`].
    pub allow_any_scale: bool,
}

/// A decoded tensor with its augmentation and a count of repaired pixels.
#[derive(Debug, Clone, PartialEq)]
pub struct SoftFile {
    pub prediction: SoftPrediction,
    pub descriptor: AugDescriptor,
    /// Pixels whose mass drifted more than `1e-4` from one and were rescaled.
    pub renormalized_pixels: usize,
}

/// JSON sidecar overriding the embedded descriptor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AugSidecar {
    pub hflip: bool,
    pub scale: f32,
    pub base_height: usize,
    pub base_width: usize,
}

impl From<AugSidecar> for AugDescriptor {
    fn from(s: AugSidecar) -> Self {
        AugDescriptor::new(s.hflip, s.scale, s.base_height, s.base_width)
    }
}

/// `dir/x.sftp` -> `dir/x.aug.json`
pub fn sidecar_path(path: &Path) -> PathBuf {
    let stem = path.file_stem().unwrap_or_default().to_string_lossy();
    path.with_file_name(format!("{stem}.aug.json"))
}

pub fn encode_soft(pred: &SoftPrediction, desc: &AugDescriptor) -> Vec<u8> {
    let (h, w, c) = pred.dims();
    let mut out = Vec::with_capacity(HEADER_LEN + pred.scores().len() * 4);
    out.extend_from_slice(MAGIC);
    for dim in [h, w, c] {
        out.extend_from_slice(&(dim as u32).to_le_bytes());
    }
    out.push(desc.hflip as u8);
    out.extend_from_slice(&desc.scale.to_le_bytes());
    for s in pred.scores() {
        out.extend_from_slice(&s.to_le_bytes());
    }
    out
}

pub fn write_soft(pred: &SoftPrediction, desc: &AugDescriptor, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, encode_soft(pred, desc)).map_err(|e| Error::io(path, e))
}

fn read_u32(bytes: &[u8], at: usize) -> u32 {
    u32::from_le_bytes(bytes[at..at + 4].try_into().unwrap())
}

/// Decodes an in-memory `.sftp` file.
pub fn decode_soft(bytes: &[u8], opts: ReadOptions) -> Result<SoftFile, FormatError> {
    if bytes.len() < MAGIC.len() || &bytes[..MAGIC.len()] != MAGIC {
        return Err(FormatError::BadMagic);
    }
    if bytes.len() < HEADER_LEN {
        return Err(FormatError::TruncatedHeader {
            expected: HEADER_LEN,
            actual: bytes.len(),
        });
    }
    let (h32, w32, c32) = (read_u32(bytes, 6), read_u32(bytes, 10), read_u32(bytes, 14));
    if h32 == 0 || w32 == 0 || !(2..=255).contains(&c32) {
        return Err(FormatError::BadDimensions {
            height: h32,
            width: w32,
            channels: c32,
        });
    }
    let flags = bytes[18];
    if flags & !1 != 0 {
        return Err(FormatError::BadFlags { flags });
    }
    let scale = f32::from_le_bytes(bytes[19..23].try_into().unwrap());
    if !(scale.is_finite() && scale > 0.0) || (!opts.allow_any_scale && !STANDARD_SCALES.contains(&scale)) {
        return Err(FormatError::BadScale { scale });
    }

    let (h, w, c) = (h32 as usize, w32 as usize, c32 as usize);
    let payload = &bytes[HEADER_LEN..];
    let expected = (h as u128) * (w as u128) * (c as u128) * 4;
    if (payload.len() as u128) < expected {
        return Err(FormatError::Truncated {
            expected: usize::try_from(expected).unwrap_or(usize::MAX),
            actual: payload.len(),
        });
    }
    let expected = expected as usize;
    if payload.len() > expected {
        return Err(FormatError::TrailingBytes {
            offset: HEADER_LEN + expected,
            expected,
            actual: payload.len(),
        });
    }

    let mut scores: Vec<f32> = payload
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
        .collect();
    let mut renormalized = 0usize;
    for (i, px) in scores.chunks_exact_mut(c).enumerate() {
        let mut sum = 0f64;
        let mut in_range = true;
        for &v in px.iter() {
            // false for NaN as well
            in_range &= (0.0..=1.0).contains(&v);
            sum += v as f64;
        }
        if !in_range {
            return Err(bad_score(px, i / w, i % w));
        }
        let drift = (sum - 1.0).abs();
        if drift > crate::tensor::SIMPLEX_TOL {
            if sum == 0.0 {
                return Err(FormatError::ZeroSum {
                    row: i / w,
                    col: i % w,
                });
            }
            if drift > MAX_RENORMALIZE_DRIFT {
                return Err(FormatError::ExcessDrift {
                    row: i / w,
                    col: i % w,
                    sum,
                });
            }
            for v in px.iter_mut() {
                *v = (*v as f64 / sum) as f32;
            }
            renormalized += 1;
        }
    }

    let (base_height, base_width) = recover_base(h, w, scale)?;
    Ok(SoftFile {
        prediction: SoftPrediction::from_parts_unchecked(h, w, c, scores),
        descriptor: AugDescriptor::new(flags & 1 == 1, scale, base_height, base_width),
        renormalized_pixels: renormalized,
    })
}

/// The first non-finite or out-of-range score of a pixel known to hold one.
fn bad_score(px: &[f32], row: usize, col: usize) -> FormatError {
    let (channel, &value) = px
        .iter()
        .enumerate()
        .find(|(_, v)| !(0.0..=1.0).contains(*v))
        .expect("caller saw a bad score");
    if value.is_finite() {
        FormatError::OutOfRange {
            row,
            col,
            channel,
            value,
        }
    } else {
        FormatError::NonFinite { row, col, channel }
    }
}

/// Smallest-error base geometry whose scaled size reproduces the stored one.
fn recover_base(h: usize, w: usize, scale: f32) -> Result<(usize, usize), FormatError> {
    let recover = |n: usize| {
        let guess = (n as f64 / scale as f64).round() as usize;
        [guess, guess.saturating_sub(1), guess + 1]
            .into_iter()
            .find(|&b| b > 0 && scaled(b, scale) == n)
            .ok_or_else(|| {
                FormatError::Geometry(format!("no base size maps to {n} at scale {scale}"))
            })
    };
    Ok((recover(h)?, recover(w)?))
}

/// Reads a `.sftp` file, applying its `.aug.json` sidecar when present.
pub fn read_soft(path: impl AsRef<Path>) -> Result<SoftFile> {
    read_soft_with(path, ReadOptions::default())
}

pub fn read_soft_with(path: impl AsRef<Path>, opts: ReadOptions) -> Result<SoftFile> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let mut file = decode_soft(&bytes, opts).map_err(|e| Error::Format(e).at_path(path))?;

    let side = sidecar_path(path);
    if side.exists() {
        let text = std::fs::read_to_string(&side).map_err(|e| Error::io(&side, e))?;
        let sidecar: AugSidecar = serde_json::from_str(&text)
            .map_err(|e| Error::Format(FormatError::Sidecar(e.to_string())).at_path(&side))?;
        let desc = AugDescriptor::from(sidecar);
        let bad = |msg: String| Error::Format(FormatError::Sidecar(msg)).at_path(&side);
        desc.validate(opts.allow_any_scale).map_err(|e| bad(e.to_string()))?;
        let stored = (file.prediction.height(), file.prediction.width());
        if desc.scaled_dims() != stored {
            return Err(bad(format!(
                "base {}x{} at scale {} gives {:?}, tensor is {:?}",
                desc.base_height,
                desc.base_width,
                desc.scale,
                desc.scaled_dims(),
                stored
            )));
        }
        file.descriptor = desc;
    }
    Ok(file)
}
