//! Confusion matrices and IoU evaluation.
//!
//! Ground-truth void pixels are ignored. A void prediction on a labeled
//! pixel lands in a dedicated "none" column, so it counts as a false
//! negative for the ground-truth class and never as a true positive.

use std::fmt::{self, Write as _};

use serde::{Deserialize, Serialize};

use crate::error::{Error, FormatError, Result};
use crate::taxonomy::{Taxonomy, VOID_LABEL};
use crate::tensor::LabelMap;

/// `classes × (classes + 1)` integer counts; the last column is "none".
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfusionMatrix {
    classes: usize,
    void_id: Option<u8>,
    counts: Vec<u64>,
    ignored: u64,
}

impl ConfusionMatrix {
    /// A matrix over `classes` ids where only 255 is void.
    pub fn new(classes: usize) -> Self {
        Self {
            classes,
            void_id: None,
            counts: vec![0; classes * (classes + 1)],
            ignored: 0,
        }
    }

    /// A matrix over a taxonomy; its void class is treated like 255.
    pub fn for_taxonomy(tax: &Taxonomy) -> Self {
        Self {
            void_id: tax.void_id(),
            ..Self::new(tax.len())
        }
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn ignored(&self) -> u64 {
        self.ignored
    }

    /// Pixels that entered the counts (ground truth not void).
    pub fn counted(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn total(&self) -> u64 {
        self.counted() + self.ignored
    }

    /// Count for ground truth `gt` and prediction `pred` (`None` = void).
    pub fn count(&self, gt: u8, pred: Option<u8>) -> u64 {
        let col = pred.map_or(self.classes, usize::from);
        self.counts[gt as usize * (self.classes + 1) + col]
    }

    fn is_void(&self, id: u8) -> bool {
        id == VOID_LABEL || Some(id) == self.void_id
    }

    pub fn accumulate(&mut self, pred: &LabelMap, gt: &LabelMap) -> Result<()> {
        if pred.dims() != gt.dims() {
            return Err(Error::Shape(format!(
                "prediction is {}x{}, ground truth is {}x{}",
                pred.height(),
                pred.width(),
                gt.height(),
                gt.width()
            )));
        }
        let width = gt.width();
        let stride = self.classes + 1;
        // validate first so a failed call leaves the matrix untouched
        for (i, (&p, &g)) in pred.ids().iter().zip(gt.ids()).enumerate() {
            for id in [p, g] {
                if !self.is_void(id) && id as usize >= self.classes {
                    return Err(FormatError::InvalidLabel {
                        id,
                        row: i / width,
                        col: i % width,
                    }
                    .into());
                }
            }
        }
        for (&p, &g) in pred.ids().iter().zip(gt.ids()) {
            if self.is_void(g) {
                self.ignored += 1;
                continue;
            }
            let col = if self.is_void(p) { self.classes } else { p as usize };
            self.counts[g as usize * stride + col] += 1;
        }
        Ok(())
    }

    pub fn merge(&mut self, other: &ConfusionMatrix) -> Result<()> {
        if other.classes != self.classes {
            return Err(Error::Shape(format!(
                "cannot merge a {}-class matrix into a {}-class one",
                other.classes, self.classes
            )));
        }
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
        self.ignored += other.ignored;
        Ok(())
    }

    fn check_class(&self, class: u8) -> Result<usize> {
        let c = class as usize;
        if c >= self.classes {
            return Err(Error::Invalid(format!(
                "class {class} is outside this {}-class matrix",
                self.classes
            )));
        }
        Ok(c)
    }

    /// `(tp, fp, fn)` for one class.
    pub fn class_counts(&self, class: u8) -> Result<(u64, u64, u64)> {
        let c = self.check_class(class)?;
        let stride = self.classes + 1;
        let tp = self.counts[c * stride + c];
        let col: u64 = (0..self.classes).map(|r| self.counts[r * stride + c]).sum();
        let row: u64 = self.counts[c * stride..(c + 1) * stride].iter().sum();
        Ok((tp, col - tp, row - tp))
    }

    /// `tp / (tp + fp + fn)`, or `None` when the class is absent from both
    /// ground truth and prediction.
    pub fn iou(&self, class: u8) -> Result<Option<f64>> {
        let (tp, fp, fne) = self.class_counts(class)?;
        let denom = tp + fp + fne;
        Ok((denom > 0).then(|| tp as f64 / denom as f64))
    }

    pub fn pixel_accuracy(&self) -> f64 {
        let counted = self.counted();
        if counted == 0 {
            return 0.0;
        }
        let stride = self.classes + 1;
        let trace: u64 = (0..self.classes).map(|c| self.counts[c * stride + c]).sum();
        trace as f64 / counted as f64
    }

    pub fn report(&self, tax: &Taxonomy) -> EvalReport {
        let mut per_class = Vec::new();
        for c in 0..self.classes {
            let id = c as u8;
            if Some(id) == self.void_id {
                continue;
            }
            per_class.push(ClassIou {
                id,
                name: tax.label_name(id).to_string(),
                // ids are in range by construction
                iou: self.iou(id).unwrap_or(None),
            });
        }
        let present: Vec<f64> = per_class.iter().filter_map(|c| c.iou).collect();
        let miou = if present.is_empty() {
            0.0
        } else {
            present.iter().sum::<f64>() / present.len() as f64
        };
        EvalReport {
            schema: 1,
            taxonomy: tax.name().to_string(),
            classes_included: present.len(),
            miou,
            pixel_accuracy: self.pixel_accuracy(),
            pixels_counted: self.counted(),
            pixels_ignored: self.ignored,
            per_class,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassIou {
    pub id: u8,
    pub name: String,
    pub iou: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub schema: u32,
    pub taxonomy: String,
    /// Number of classes present in ground truth or prediction; the mIoU
    /// averages over exactly these.
    pub classes_included: usize,
    pub miou: f64,
    pub pixel_accuracy: f64,
    pub pixels_counted: u64,
    pub pixels_ignored: u64,
    pub per_class: Vec<ClassIou>,
}

fn pct(v: f64) -> String {
    format!("{:.2}", v * 100.0)
}

impl fmt::Display for EvalReport {
    /// Per-class IoU in percent, absent classes as `-`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let width = self
            .per_class
            .iter()
            .map(|c| c.name.len())
            .chain([5])
            .max()
            .unwrap_or(5);
        writeln!(f, "{:<width$}  {:>7}", "class", "IoU")?;
        for c in &self.per_class {
            let v = c.iou.map_or_else(|| "-".to_string(), pct);
            writeln!(f, "{:<width$}  {:>7}", c.name, v)?;
        }
        writeln!(f, "{:<width$}  {:>7}", "mIoU", pct(self.miou))?;
        writeln!(f, "{:<width$}  {:>7}", "pixacc", pct(self.pixel_accuracy))?;
        write!(f, "classes included: {}", self.classes_included)
    }
}

/// Accumulates paired streams and reports IoU over a taxonomy.
pub fn evaluate<P, G>(preds: P, gts: G, tax: &Taxonomy) -> Result<EvalReport>
where
    P: IntoIterator<Item = LabelMap>,
    G: IntoIterator<Item = LabelMap>,
{
    let mut cm = ConfusionMatrix::for_taxonomy(tax);
    let mut preds = preds.into_iter();
    let mut gts = gts.into_iter();
    let mut n = 0usize;
    loop {
        match (preds.next(), gts.next()) {
            (Some(p), Some(g)) => {
                cm.accumulate(&p, &g)
                    .map_err(|e| Error::Invalid(format!("image {n}: {e}")))?;
                n += 1;
            }
            (None, None) => break,
            (p, _) => {
                let (short, long) = if p.is_none() { ("prediction", "ground truth") } else { ("ground truth", "prediction") };
                return Err(Error::Invalid(format!(
                    "{short} stream ended after {n} images but the {long} stream continues"
                )));
            }
        }
    }
    Ok(cm.report(tax))
}

/// One row of a before/after comparison. The difference is always computed
/// from `init` and `post`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub model: String,
    pub iteration: u32,
    pub init: f64,
    pub post: f64,
}

impl ComparisonRow {
    pub fn diff(&self) -> f64 {
        self.post - self.init
    }
}

/// Aligned `model iteration init post diff` table with mIoU in percent.
pub fn render_comparison(rows: &[ComparisonRow]) -> String {
    let mw = rows.iter().map(|r| r.model.len()).chain([5]).max().unwrap_or(5);
    let mut out = String::new();
    let _ = writeln!(out, "{:<mw$}  {:>9}  {:>6}  {:>6}  {:>6}", "model", "iteration", "init", "post", "diff");
    for r in rows {
        let _ = writeln!(
            out,
            "{:<mw$}  {:>9}  {:>6.1}  {:>6.1}  {:>+6.1}",
            r.model,
            r.iteration,
            r.init * 100.0,
            r.post * 100.0,
            r.diff() * 100.0
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::taxonomy::parse_taxonomy;

    fn tax3() -> Taxonomy {
        parse_taxonomy("taxonomy t\nclass 0 a 0 0 0\nclass 1 b 0 0 0\nclass 2 c 0 0 0\nclass 3 unlabeled 0 0 0 void\n")
            .unwrap()
    }

    fn map(h: usize, w: usize, ids: &[u8]) -> LabelMap {
        LabelMap::new(h, w, ids.to_vec()).unwrap()
    }

    #[test]
    fn perfect_prediction_is_diagonal() {
        let gt = map(2, 2, &[0, 1, 2, 1]);
        let mut cm = ConfusionMatrix::for_taxonomy(&tax3());
        cm.accumulate(&gt, &gt).unwrap();
        assert_eq!(cm.count(1, Some(1)), 2);
        assert_eq!(cm.pixel_accuracy(), 1.0);
        for c in 0..3 {
            assert_eq!(cm.iou(c).unwrap(), Some(1.0));
        }
    }

    #[test]
    fn void_ground_truth_is_ignored() {
        let mut cm = ConfusionMatrix::for_taxonomy(&tax3());
        cm.accumulate(&map(1, 3, &[0, 1, 2]), &map(1, 3, &[255, 3, 255])).unwrap();
        assert_eq!(cm.ignored(), 3);
        assert_eq!(cm.counted(), 0);
        assert_eq!(cm.iou(0).unwrap(), None);
    }

    #[test]
    fn one_mismatch_is_one_off_diagonal_count() {
        let mut cm = ConfusionMatrix::new(2);
        cm.accumulate(&map(2, 2, &[0, 0, 1, 0]), &map(2, 2, &[0, 0, 1, 1])).unwrap();
        assert_eq!(cm.count(1, Some(0)), 1);
        assert_eq!(cm.count(0, Some(1)), 0);
        assert_eq!(cm.counted(), 4);
    }

    #[test]
    fn iou_from_counts() {
        // class 0: tp 6, fp 2, fn 4
        let mut gt = vec![0u8; 10];
        gt.extend([1, 1]);
        let mut pred = vec![0u8; 6];
        pred.extend([1, 1, 1, 1, 0, 0]);
        let mut cm = ConfusionMatrix::new(2);
        cm.accumulate(&map(1, 12, &pred), &map(1, 12, &gt)).unwrap();
        assert_eq!(cm.class_counts(0).unwrap(), (6, 2, 4));
        assert_eq!(cm.iou(0).unwrap(), Some(0.5));
        assert!(cm.iou(5).is_err());
    }

    #[test]
    fn void_prediction_is_a_miss() {
        let tax = tax3();
        let gt = map(1, 2, &[0, 1]);
        let report = evaluate([map(1, 2, &[255, 3])], [gt], &tax).unwrap();
        assert_eq!(report.classes_included, 2);
        assert!(report.per_class.iter().filter_map(|c| c.iou).all(|v| v == 0.0));
    }

    #[test]
    fn stream_length_mismatch() {
        let m = map(1, 1, &[0]);
        assert!(evaluate([m.clone(), m.clone()], [m], &tax3()).is_err());
    }

    #[test]
    fn invalid_id_leaves_matrix_untouched() {
        let mut cm = ConfusionMatrix::new(2);
        let err = cm.accumulate(&map(1, 2, &[0, 7]), &map(1, 2, &[0, 0])).unwrap_err();
        assert!(err.to_string().contains("invalid id 7 at (0,1)"));
        assert_eq!(cm.total(), 0);
    }

    #[test]
    fn comparison_diff_is_computed() {
        let rows = [ComparisonRow {
            model: "M2F-L".into(),
            iteration: 1,
            init: 0.569,
            post: 0.502,
        }];
        let text = render_comparison(&rows);
        assert!(text.lines().nth(1).unwrap().trim_end().ends_with("-6.7"), "{text}");
    }
}
