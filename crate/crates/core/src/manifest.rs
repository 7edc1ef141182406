//! Dataset manifests, frame pairing and frame-count statistics.
//!
//! ```text
//! dataset <name> taxonomy <tax-name> [ontology <path>] [contiguous] [step <k>] [frames <n>]
//! frame <id> gt <path> [image <path>] [pred <path>] [split train|val]
//! ```
//!
//! `frame` lines belong to the closest preceding `dataset` line. A dataset
//! may declare its size with `frames <n>` instead of listing every frame;
//! when it does both, the two counts must agree. Paths are relative to the
//! directory holding the manifest.

use std::collections::HashMap;
use std::fmt::{self, Write as _};
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::dsl::{self, Line};
use crate::error::{Error, ParseError, Result};
use crate::tensor::standard_aug_stems;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FrameEntry {
    pub id: String,
    pub gt: PathBuf,
    pub image: Option<PathBuf>,
    /// Prediction directory overriding `<prediction root>/<id>`.
    pub pred: Option<PathBuf>,
    pub split: Split,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DatasetManifest {
    pub name: String,
    pub taxonomy: String,
    /// Absent exactly for a source dataset.
    pub ontology: Option<PathBuf>,
    pub contiguous: bool,
    pub sampling_step: usize,
    /// Size declared with `frames <n>`, if any.
    pub declared_frames: Option<u64>,
    pub frames: Vec<FrameEntry>,
    /// Directory that relative paths resolve against.
    pub root: PathBuf,
}

impl DatasetManifest {
    pub fn parse(text: &str) -> Result<Self, ParseError> {
        parse_manifest(text)
    }

    /// Loads a single-dataset manifest; paths resolve against its directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = read_text(path)?;
        let mut m = parse_manifest(&text).map_err(|e| Error::Parse(e).at_path(path))?;
        m.root = parent_dir(path);
        Ok(m)
    }

    pub fn is_source(&self) -> bool {
        self.ontology.is_none()
    }

    /// Number of frames, declared or listed.
    pub fn frame_count(&self) -> u64 {
        self.declared_frames.unwrap_or(self.frames.len() as u64)
    }

    pub fn resolve(&self, rel: &Path) -> PathBuf {
        self.root.join(rel)
    }

    /// The manifest after applying its own declared `step`.
    pub fn sampled(&self) -> DatasetManifest {
        subsample(self, self.sampling_step).manifest
    }
}

fn read_text(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let text = dsl::decode_utf8(&bytes).map_err(|e| Error::Parse(e).at_path(path))?;
    Ok(text.to_string())
}

fn parent_dir(path: &Path) -> PathBuf {
    match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    }
}

/// Loads a file with any number of `dataset` blocks.
pub fn load_manifest_set(path: impl AsRef<Path>) -> Result<Vec<DatasetManifest>> {
    let path = path.as_ref();
    let text = read_text(path)?;
    let mut set = parse_manifest_set(&text).map_err(|e| Error::Parse(e).at_path(path))?;
    let root = parent_dir(path);
    for m in &mut set {
        m.root = root.clone();
    }
    Ok(set)
}

/// Parses a manifest holding exactly one dataset.
pub fn parse_manifest(text: &str) -> Result<DatasetManifest, ParseError> {
    let mut set = parse_manifest_set(text)?;
    match set.len() {
        1 => Ok(set.pop().expect("one dataset")),
        0 => Err(ParseError::new(1, 1, "no 'dataset' line")),
        _ => {
            let second = dsl::lex(text)
                .into_iter()
                .filter(|l| l.keyword() == "dataset")
                .nth(1)
                .map_or(1, |l| l.number);
            Err(ParseError::new(
                second,
                1,
                "a manifest holds one dataset; use a manifest set for several",
            ))
        }
    }
}

struct Block {
    manifest: DatasetManifest,
    line: usize,
    ids: HashMap<String, usize>,
}

/// Parses any number of `dataset` blocks, preserving declaration order.
pub fn parse_manifest_set(text: &str) -> Result<Vec<DatasetManifest>, ParseError> {
    let mut blocks: Vec<Block> = Vec::new();
    let mut names: HashMap<String, usize> = HashMap::new();
    for line in dsl::lex(text) {
        match line.keyword() {
            "dataset" => {
                if let Some(prev) = blocks.last() {
                    check_block(prev)?;
                }
                let manifest = parse_dataset_line(&line)?;
                if let Some(first) = names.insert(manifest.name.clone(), line.number) {
                    return Err(line.error(
                        1,
                        format!("duplicate dataset '{}' (first declared on line {first})", manifest.name),
                    ));
                }
                blocks.push(Block {
                    manifest,
                    line: line.number,
                    ids: HashMap::new(),
                });
            }
            "frame" => {
                let block = blocks
                    .last_mut()
                    .ok_or_else(|| line.error(0, "'frame' before any 'dataset' line"))?;
                let frame = parse_frame_line(&line)?;
                if let Some(first) = block.ids.insert(frame.id.clone(), line.number) {
                    return Err(line.error(
                        1,
                        format!("duplicate frame id '{}' (first declared on line {first})", frame.id),
                    ));
                }
                block.manifest.frames.push(frame);
            }
            other => return Err(line.error(0, format!("unknown directive '{other}'"))),
        }
    }
    if let Some(last) = blocks.last() {
        check_block(last)?;
    }
    Ok(blocks.into_iter().map(|b| b.manifest).collect())
}

fn check_block(block: &Block) -> Result<(), ParseError> {
    let m = &block.manifest;
    match m.declared_frames {
        Some(n) if !m.frames.is_empty() && n != m.frames.len() as u64 => Err(ParseError::new(
            block.line,
            1,
            format!(
                "dataset '{}' declares {n} frames but lists {}",
                m.name,
                m.frames.len()
            ),
        )),
        _ => Ok(()),
    }
}

fn value<'a>(line: &Line<'a>, idx: usize, key: &str) -> Result<&'a str, ParseError> {
    line.tokens
        .get(idx + 1)
        .map(|t| t.text)
        .ok_or_else(|| line.error(idx + 1, format!("missing value for '{key}'")))
}

fn parse_count<T: std::str::FromStr>(line: &Line<'_>, idx: usize, key: &str) -> Result<T, ParseError> {
    let raw = value(line, idx, key)?;
    raw.parse()
        .map_err(|_| line.error(idx + 1, format!("'{key}' expects a non-negative integer, found '{raw}'")))
}

fn parse_dataset_line(line: &Line<'_>) -> Result<DatasetManifest, ParseError> {
    let name = line
        .tokens
        .get(1)
        .ok_or_else(|| line.error(1, "missing dataset name"))?
        .text
        .to_string();
    let mut m = DatasetManifest {
        name,
        taxonomy: String::new(),
        ontology: None,
        contiguous: false,
        sampling_step: 1,
        declared_frames: None,
        frames: Vec::new(),
        root: PathBuf::from("."),
    };
    let mut seen: Vec<&str> = Vec::new();
    let mut idx = 2;
    while idx < line.tokens.len() {
        let key = line.tokens[idx].text;
        if seen.contains(&key) {
            return Err(line.error(idx, format!("'{key}' given twice")));
        }
        seen.push(key);
        match key {
            "taxonomy" => {
                let raw = value(line, idx, key)?;
                let norm = dsl::normalize_name(raw);
                if !dsl::is_name_token(&norm) {
                    return Err(line.error(idx + 1, format!("invalid taxonomy name '{raw}'")));
                }
                m.taxonomy = norm;
                idx += 2;
            }
            "ontology" => {
                m.ontology = Some(PathBuf::from(value(line, idx, key)?));
                idx += 2;
            }
            "step" => {
                let k: usize = parse_count(line, idx, key)?;
                if k == 0 {
                    return Err(line.error(idx + 1, "'step' must be at least 1"));
                }
                m.sampling_step = k;
                idx += 2;
            }
            "frames" => {
                m.declared_frames = Some(parse_count(line, idx, key)?);
                idx += 2;
            }
            "contiguous" => {
                m.contiguous = true;
                idx += 1;
            }
            other => return Err(line.error(idx, format!("unknown dataset option '{other}'"))),
        }
    }
    if m.taxonomy.is_empty() {
        return Err(line.error(line.tokens.len(), "missing required field 'taxonomy'"));
    }
    Ok(m)
}

fn is_frame_id(s: &str) -> bool {
    s != "."
        && s != ".."
        && s
            .bytes()
            .all(|b| b.is_ascii_alphanumeric() || matches!(b, b'_' | b'-' | b'.'))
}

fn parse_frame_line(line: &Line<'_>) -> Result<FrameEntry, ParseError> {
    let id = line.tokens.get(1).ok_or_else(|| line.error(1, "missing frame id"))?.text;
    if !is_frame_id(id) {
        return Err(line.error(1, format!("invalid frame id '{id}'")));
    }
    let mut gt = None;
    let mut frame = FrameEntry {
        id: id.to_string(),
        gt: PathBuf::new(),
        image: None,
        pred: None,
        split: Split::Train,
    };
    let mut seen: Vec<&str> = Vec::new();
    let mut idx = 2;
    while idx < line.tokens.len() {
        let key = line.tokens[idx].text;
        if seen.contains(&key) {
            return Err(line.error(idx, format!("'{key}' given twice")));
        }
        seen.push(key);
        let v = value(line, idx, key);
        match key {
            "gt" => gt = Some(PathBuf::from(v?)),
            "image" => frame.image = Some(PathBuf::from(v?)),
            "pred" => frame.pred = Some(PathBuf::from(v?)),
            "split" => {
                frame.split = match v? {
                    "train" => Split::Train,
                    "val" => Split::Val,
                    other => return Err(line.error(idx + 1, format!("unknown split tag '{other}'"))),
                }
            }
            other => return Err(line.error(idx, format!("unknown frame field '{other}'"))),
        }
        idx += 2;
    }
    frame.gt = gt.ok_or_else(|| {
        line.error(line.tokens.len(), format!("frame '{id}' is missing required field 'gt'"))
    })?;
    Ok(frame)
}

impl fmt::Display for DatasetManifest {
    /// Canonical manifest text.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "dataset {} taxonomy {}", self.name, self.taxonomy)?;
        if let Some(ont) = &self.ontology {
            write!(f, " ontology {}", ont.display())?;
        }
        if self.contiguous {
            f.write_str(" contiguous")?;
        }
        if self.sampling_step != 1 {
            write!(f, " step {}", self.sampling_step)?;
        }
        if let Some(n) = self.declared_frames {
            write!(f, " frames {n}")?;
        }
        writeln!(f)?;
        for fr in &self.frames {
            write!(f, "frame {} gt {}", fr.id, fr.gt.display())?;
            if let Some(p) = &fr.image {
                write!(f, " image {}", p.display())?;
            }
            if let Some(p) = &fr.pred {
                write!(f, " pred {}", p.display())?;
            }
            if fr.split == Split::Val {
                f.write_str(" split val")?;
            }
            writeln!(f)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Subsampled {
    pub manifest: DatasetManifest,
    /// Set when the dataset is not contiguous and was left unchanged.
    pub warning: Option<String>,
}

/// Keeps frames `0, k, 2k, …` of a contiguous dataset. Non-contiguous
/// datasets come back unchanged with a warning, since every frame there is
/// a distinct scene. `k = 0` is treated as 1.
pub fn subsample(manifest: &DatasetManifest, k: usize) -> Subsampled {
    let k = k.max(1);
    if k == 1 {
        return Subsampled {
            manifest: manifest.clone(),
            warning: None,
        };
    }
    if !manifest.contiguous {
        let warning = format!(
            "dataset '{}' is not contiguous; subsampling by {k} skipped",
            manifest.name
        );
        log::warn!("{warning}");
        return Subsampled {
            manifest: manifest.clone(),
            warning: Some(warning),
        };
    }
    let mut out = manifest.clone();
    out.frames = manifest.frames.iter().step_by(k).cloned().collect();
    out.declared_frames = manifest.declared_frames.map(|n| n.div_ceil(k as u64));
    Subsampled {
        manifest: out,
        warning: None,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct StatsRow {
    pub dataset: String,
    pub frames: u64,
    /// Share of the total as rendered: integer percent or `<1`.
    pub percent: String,
    pub contiguous: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct StatsTable {
    pub schema: u32,
    pub label: String,
    pub rows: Vec<StatsRow>,
    pub total: u64,
}

/// Integer percent rounded half up, `<1` for a nonzero share that rounds
/// to zero.
pub fn render_percent(part: u64, total: u64) -> String {
    if total == 0 {
        return "0".into();
    }
    let rounded = (200 * part as u128 + total as u128) / (2 * total as u128);
    if rounded == 0 && part > 0 {
        "<1".into()
    } else {
        rounded.to_string()
    }
}

/// `1234567` as `1,234,567`.
pub fn group_thousands(n: u64) -> String {
    let digits = n.to_string();
    let mut out = String::with_capacity(digits.len() + digits.len() / 3);
    for (i, ch) in digits.chars().enumerate() {
        if i > 0 && (digits.len() - i).is_multiple_of(3) {
            out.push(',');
        }
        out.push(ch);
    }
    out
}

/// Frame counts per dataset in declaration order, with shares and a total.
pub fn stats(manifests: &[DatasetManifest], label: &str) -> StatsTable {
    let total: u64 = manifests.iter().map(DatasetManifest::frame_count).sum();
    let rows = manifests
        .iter()
        .map(|m| StatsRow {
            dataset: m.name.clone(),
            frames: m.frame_count(),
            percent: render_percent(m.frame_count(), total),
            contiguous: m.contiguous,
        })
        .collect();
    StatsTable {
        schema: 1,
        label: label.to_string(),
        rows,
        total,
    }
}

impl fmt::Display for StatsTable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let total_name = format!("Total {}", self.label);
        let name_w = self
            .rows
            .iter()
            .map(|r| r.dataset.chars().count())
            .chain([total_name.chars().count(), "Dataset".len()])
            .max()
            .unwrap_or(0);
        let frames_w = self
            .rows
            .iter()
            .map(|r| group_thousands(r.frames).len())
            .chain([group_thousands(self.total).len(), "Frames".len()])
            .max()
            .unwrap_or(0);
        let mut lines = vec![format!(
            "{:<name_w$}  {:>frames_w$}  {:>8}  Contiguous",
            "Dataset", "Frames", "Rel. [%]"
        )];
        for r in &self.rows {
            let flag = if r.contiguous { "yes" } else { "" };
            lines.push(format!(
                "{:<name_w$}  {:>frames_w$}  {:>8}  {flag}",
                r.dataset,
                group_thousands(r.frames),
                r.percent
            ));
        }
        lines.push(format!(
            "{:<name_w$}  {:>frames_w$}",
            total_name,
            group_thousands(self.total)
        ));
        let mut out = String::new();
        for l in lines {
            let _ = writeln!(out, "{}", l.trim_end());
        }
        f.write_str(&out)
    }
}

/// One frame's ground truth and its full set of augmented predictions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PairedFrame {
    pub id: String,
    pub gt: PathBuf,
    /// Prediction files in the order of the expected augmentation list.
    pub predictions: Vec<PathBuf>,
}

/// A frame lacking some of the expected prediction files.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IncompleteFrame {
    pub id: String,
    /// File names (`s125.sftp`, …) that were not found.
    pub missing: Vec<String>,
}

impl fmt::Display for IncompleteFrame {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "frame '{}' is missing {}", self.id, self.missing.join(", "))
    }
}

/// Lazily pairs manifest frames with prediction files.
pub struct FramePairs<'a> {
    manifest: &'a DatasetManifest,
    root: PathBuf,
    augs: Vec<String>,
    next: usize,
}

impl Iterator for FramePairs<'_> {
    type Item = std::result::Result<PairedFrame, IncompleteFrame>;

    fn next(&mut self) -> Option<Self::Item> {
        let frame = self.manifest.frames.get(self.next)?;
        self.next += 1;
        let dir = match &frame.pred {
            Some(p) => self.manifest.resolve(p),
            None => self.root.join(&frame.id),
        };
        let mut predictions = Vec::with_capacity(self.augs.len());
        let mut missing = Vec::new();
        for aug in &self.augs {
            let name = format!("{aug}.sftp");
            let path = dir.join(&name);
            if path.is_file() {
                predictions.push(path);
            } else {
                missing.push(name);
            }
        }
        Some(if missing.is_empty() {
            Ok(PairedFrame {
                id: frame.id.clone(),
                gt: self.manifest.resolve(&frame.gt),
                predictions,
            })
        } else {
            Err(IncompleteFrame {
                id: frame.id.clone(),
                missing,
            })
        })
    }
}

/// Pairs each frame with `<root>/<id>/<aug>.sftp` for every expected
/// augmentation stem; `None` expects the 14 standard augmentations.
///
/// The root must be an existing directory. An empty directory is fine and
/// reports every frame as incomplete.
pub fn pair_frames<'a>(
    manifest: &'a DatasetManifest,
    prediction_root: impl AsRef<Path>,
    augs: Option<&[String]>,
) -> Result<FramePairs<'a>> {
    let root = prediction_root.as_ref();
    if root.as_os_str().is_empty() {
        return Err(Error::Invalid("empty prediction root".into()));
    }
    if !root.is_dir() {
        return Err(Error::Invalid(format!(
            "prediction root {} is not a directory",
            root.display()
        )));
    }
    let augs = augs.map_or_else(standard_aug_stems, <[String]>::to_vec);
    if augs.is_empty() {
        return Err(Error::Invalid("no augmentations expected".into()));
    }
    Ok(FramePairs {
        manifest,
        root: root.to_path_buf(),
        augs,
        next: 0,
    })
}
