//! Iteration workspaces and batch refinement of a whole manifest.
//!
//! An iteration directory holds what one teacher produced and what was made
//! of it:
//!
//! ```text
//! <root>/it<i>/predictions/<frame>/<aug>.sftp
//! <root>/it<i>/pseudo-labels/<frame>.png
//! <root>/it<i>/pseudo-labels-color/<frame>.png   (optional)
//! <root>/it<i>/soft/<frame>.sftp                 (optional)
//! <root>/it<i>/reports/<frame>.json
//! <root>/it<i>/reports/aggregate.json
//! ```
//!
//! Training the student is not done here; the workspace only keeps the
//! files of successive iterations apart.

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;

use crate::constraint::ConstraintTable;
use crate::error::{Error, Result};
use crate::io::{self, soft::sidecar_path, ReadOptions};
use crate::manifest::{pair_frames, DatasetManifest};
use crate::refine::{constraint_mask, fuse_tta, inverse_transform, refine_image, RefineConfig, RefineReport};
use crate::taxonomy::Taxonomy;
use crate::tensor::{AugDescriptor, SoftPrediction};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IterationWorkspace {
    root: PathBuf,
    iteration: u32,
}

impl IterationWorkspace {
    pub fn new(root: impl Into<PathBuf>, iteration: u32) -> Result<Self> {
        if iteration == 0 {
            return Err(Error::Invalid("iterations are numbered from 1".into()));
        }
        Ok(Self {
            root: root.into(),
            iteration,
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn iteration(&self) -> u32 {
        self.iteration
    }

    pub fn dir(&self) -> PathBuf {
        self.root.join(format!("it{}", self.iteration))
    }

    pub fn predictions_dir(&self) -> PathBuf {
        self.dir().join("predictions")
    }

    pub fn pseudo_labels_dir(&self) -> PathBuf {
        self.dir().join("pseudo-labels")
    }

    pub fn color_dir(&self) -> PathBuf {
        self.dir().join("pseudo-labels-color")
    }

    pub fn soft_dir(&self) -> PathBuf {
        self.dir().join("soft")
    }

    pub fn reports_dir(&self) -> PathBuf {
        self.dir().join("reports")
    }

    /// Creates the output directories. Iteration `i > 1` requires `it<i-1>`.
    pub fn create(&self) -> Result<()> {
        if self.iteration > 1 {
            let prev = self.root.join(format!("it{}", self.iteration - 1));
            if !prev.is_dir() {
                return Err(Error::Invalid(format!(
                    "iteration {} needs {} to exist first",
                    self.iteration,
                    prev.display()
                )));
            }
        }
        for d in [self.pseudo_labels_dir(), self.reports_dir()] {
            std::fs::create_dir_all(&d).map_err(|e| Error::io(&d, e))?;
        }
        Ok(())
    }

    /// One past the highest `it<n>` directory under `root` (1 if none).
    pub fn next_iteration(root: impl AsRef<Path>) -> u32 {
        let Ok(entries) = std::fs::read_dir(root) else {
            return 1;
        };
        entries
            .filter_map(|e| e.ok())
            .filter(|e| e.path().is_dir())
            .filter_map(|e| e.file_name().to_str()?.strip_prefix("it")?.parse::<u32>().ok())
            .max()
            .map_or(1, |n| n + 1)
    }
}

#[derive(Debug, Clone, Default)]
pub struct BatchOptions {
    pub refine: RefineConfig,
    /// Expected augmentation stems; `None` means the 14 standard ones.
    pub augs: Option<Vec<String>>,
    pub colorize: bool,
    /// Also write the masked, renormalized scores.
    pub export_soft: bool,
    pub read: ReadOptions,
}

/// Everything written to `reports/<frame>.json`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FrameReport {
    pub schema: u32,
    pub frame: String,
    pub augmentations: Vec<String>,
    /// Loaded pixels whose mass had drifted and was rescaled.
    pub renormalized_on_load: usize,
    #[serde(flatten)]
    pub report: RefineReport,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FrameFailure {
    pub frame: String,
    pub error: String,
}

/// `reports/aggregate.json`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AggregateReport {
    pub schema: u32,
    pub dataset: String,
    pub iteration: u32,
    pub fallback: String,
    pub frames_total: usize,
    pub frames_refined: usize,
    pub frames_failed: usize,
    pub fraction_constrained: f64,
    pub fraction_fallback: f64,
    pub fraction_changed: f64,
    #[serde(flatten)]
    pub report: RefineReport,
    pub failures: Vec<FrameFailure>,
}

impl AggregateReport {
    pub fn summary(&self) -> String {
        format!(
            "{}: {} of {} frames refined, {} failed; {} pixels, {:.2}% constrained, {:.2}% fallback, {:.2}% changed",
            self.dataset,
            self.frames_refined,
            self.frames_total,
            self.frames_failed,
            self.report.pixels_total,
            100.0 * self.fraction_constrained,
            100.0 * self.fraction_fallback,
            100.0 * self.fraction_changed
        )
    }
}

fn load_predictions(
    paths: &[PathBuf],
    base: (usize, usize),
    opts: &BatchOptions,
) -> Result<(Vec<(SoftPrediction, AugDescriptor)>, usize)> {
    let mut out = Vec::with_capacity(paths.len());
    let mut renormalized = 0;
    for path in paths {
        let file = io::read_soft_with(path, opts.read)?;
        let mut desc = file.descriptor;
        let stem = path.file_stem().unwrap_or_default().to_string_lossy();
        if desc.file_stem() != stem {
            return Err(Error::Invalid(format!(
                "{} holds augmentation {}, not {stem}",
                path.display(),
                desc.file_stem()
            )));
        }
        if sidecar_path(path).exists() && (desc.base_height, desc.base_width) != base {
            return Err(Error::Shape(format!(
                "{} declares base {}x{}, ground truth is {}x{}",
                path.display(),
                desc.base_height,
                desc.base_width,
                base.0,
                base.1
            )));
        }
        // the ground truth fixes the canonical geometry
        desc.base_height = base.0;
        desc.base_width = base.1;
        renormalized += file.renormalized_pixels;
        out.push((file.prediction, desc));
    }
    Ok((out, renormalized))
}

struct FrameJob<'a> {
    id: &'a str,
    gt: &'a Path,
    predictions: &'a [PathBuf],
}

fn refine_frame(
    job: &FrameJob<'_>,
    table: &ConstraintTable,
    extra: &Taxonomy,
    source: &Taxonomy,
    ws: &IterationWorkspace,
    opts: &BatchOptions,
) -> Result<FrameReport> {
    let gt = io::read_labelmap(job.gt, extra)?;
    let (preds, renormalized) = load_predictions(job.predictions, gt.dims(), opts)?;
    let (labels, report) = refine_image(&preds, &gt, table, &opts.refine)?;

    io::write_labelmap(&labels, ws.pseudo_labels_dir().join(format!("{}.png", job.id)))?;
    if opts.colorize {
        io::write_colorized(&labels, source, ws.color_dir().join(format!("{}.png", job.id)))?;
    }
    if opts.export_soft {
        let canonical = preds
            .iter()
            .map(|(p, d)| inverse_transform(p, d))
            .collect::<Result<Vec<_>>>()?;
        let cfg = RefineConfig {
            renormalize_output: true,
            ..opts.refine
        };
        let masked = constraint_mask(&fuse_tta(&canonical)?, &gt, table, &cfg)?;
        let desc = AugDescriptor::identity(gt.height(), gt.width());
        io::write_soft(&masked.scores, &desc, ws.soft_dir().join(format!("{}.sftp", job.id)))?;
    }
    let frame_report = FrameReport {
        schema: 1,
        frame: job.id.to_string(),
        augmentations: job
            .predictions
            .iter()
            .map(|p| p.file_stem().unwrap_or_default().to_string_lossy().into_owned())
            .collect(),
        renormalized_on_load: renormalized,
        report,
    };
    write_json(&ws.reports_dir().join(format!("{}.json", job.id)), &frame_report)?;
    Ok(frame_report)
}

pub(crate) fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::Invalid(e.to_string()))?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Refines every frame of `manifest` (after its declared step) in parallel
/// on the current rayon pool, writing labels and reports into `ws`.
///
/// Frame failures, including incomplete prediction sets, are recorded and
/// do not stop the batch. Results are merged in manifest order, so the
/// outputs do not depend on the number of workers.
pub fn refine_manifest(
    manifest: &DatasetManifest,
    prediction_root: &Path,
    table: &ConstraintTable,
    extra: &Taxonomy,
    source: &Taxonomy,
    ws: &IterationWorkspace,
    opts: &BatchOptions,
) -> Result<AggregateReport> {
    let sampled = manifest.sampled();
    let pairs: Vec<_> = pair_frames(&sampled, prediction_root, opts.augs.as_deref())?.collect();
    ws.create()?;
    for (on, dir) in [(opts.colorize, ws.color_dir()), (opts.export_soft, ws.soft_dir())] {
        if on {
            std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        }
    }

    let outcomes: Vec<std::result::Result<FrameReport, FrameFailure>> = pairs
        .par_iter()
        .map(|pair| match pair {
            Ok(p) => {
                let job = FrameJob {
                    id: &p.id,
                    gt: &p.gt,
                    predictions: &p.predictions,
                };
                refine_frame(&job, table, extra, source, ws, opts).map_err(|e| FrameFailure {
                    frame: p.id.clone(),
                    error: e.to_string(),
                })
            }
            Err(missing) => Err(FrameFailure {
                frame: missing.id.clone(),
                error: missing.to_string(),
            }),
        })
        .collect();

    let mut report = RefineReport::new(source.len());
    let mut failures = Vec::new();
    for outcome in outcomes {
        match outcome {
            Ok(fr) => report.merge(&fr.report),
            Err(f) => {
                log::error!("frame '{}': {}", f.frame, f.error);
                failures.push(f);
            }
        }
    }
    let frac = |n: u64| {
        if report.pixels_total == 0 {
            0.0
        } else {
            n as f64 / report.pixels_total as f64
        }
    };
    let aggregate = AggregateReport {
        schema: 1,
        dataset: manifest.name.clone(),
        iteration: ws.iteration(),
        fallback: opts.refine.fallback.to_string(),
        frames_total: pairs.len(),
        frames_refined: pairs.len() - failures.len(),
        frames_failed: failures.len(),
        fraction_constrained: frac(report.pixels_constrained),
        fraction_fallback: frac(report.pixels_fallback),
        fraction_changed: frac(report.pixels_changed_by_mask),
        report,
        failures,
    };
    write_json(&ws.reports_dir().join("aggregate.json"), &aggregate)?;
    Ok(aggregate)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::{bundled_relation, write_toy_dataset, ToyDataset};

    #[test]
    fn layout_and_numbering() {
        let dir = tempfile::tempdir().unwrap();
        assert!(IterationWorkspace::new(dir.path(), 0).is_err());
        assert_eq!(IterationWorkspace::next_iteration(dir.path()), 1);
        let ws2 = IterationWorkspace::new(dir.path(), 2).unwrap();
        assert!(ws2.create().is_err());
        let ws1 = IterationWorkspace::new(dir.path(), 1).unwrap();
        ws1.create().unwrap();
        assert!(ws1.pseudo_labels_dir().ends_with("it1/pseudo-labels"));
        assert_eq!(IterationWorkspace::next_iteration(dir.path()), 2);
        ws2.create().unwrap();
    }

    #[test]
    fn toy_batch_refines_every_frame() {
        let dir = tempfile::tempdir().unwrap();
        let toy = ToyDataset::default();
        let manifest_path = write_toy_dataset(dir.path(), &toy).unwrap();
        let manifest = DatasetManifest::load(&manifest_path).unwrap();
        let rel = bundled_relation();
        let table = ConstraintTable::build(&rel).unwrap();
        let ws = IterationWorkspace::new(dir.path().join("work"), 1).unwrap();
        let opts = BatchOptions {
            augs: Some(toy.augs.iter().map(|&(s, f)| crate::tensor::aug_stem(s, f)).collect()),
            colorize: true,
            export_soft: true,
            ..BatchOptions::default()
        };
        let agg = refine_manifest(&manifest, &dir.path().join("predictions"), &table, rel.extra(), rel.source(), &ws, &opts)
            .unwrap();
        assert_eq!(agg.frames_failed, 0, "{:?}", agg.failures);
        assert_eq!(agg.frames_refined, 3);
        assert_eq!(agg.report.pixels_total, 3 * 24 * 32);
        for f in 0..3 {
            assert!(ws.pseudo_labels_dir().join(format!("frame{f:03}.png")).is_file());
            assert!(ws.color_dir().join(format!("frame{f:03}.png")).is_file());
            let soft = io::read_soft(ws.soft_dir().join(format!("frame{f:03}.sftp"))).unwrap();
            assert!(soft.prediction.check_simplex(1e-4).is_ok());
        }
        assert!(ws.reports_dir().join("aggregate.json").is_file());
    }

    #[test]
    fn missing_augmentation_is_a_frame_failure() {
        let dir = tempfile::tempdir().unwrap();
        let toy = ToyDataset::default();
        let manifest = DatasetManifest::load(write_toy_dataset(dir.path(), &toy).unwrap()).unwrap();
        let rel = bundled_relation();
        let table = ConstraintTable::build(&rel).unwrap();
        let ws = IterationWorkspace::new(dir.path().join("work"), 1).unwrap();
        let agg = refine_manifest(
            &manifest,
            &dir.path().join("predictions"),
            &table,
            rel.extra(),
            rel.source(),
            &ws,
            &BatchOptions::default(),
        )
        .unwrap();
        assert_eq!(agg.frames_failed, 3);
        assert!(agg.failures[0].error.contains("s125.sftp"));
    }
}
