//! Score a degraded label map against its ground truth and compare the
//! result with a baseline.

use pseudolabel::metrics::{render_comparison, ComparisonRow, ConfusionMatrix};
use pseudolabel::sim::{self, SceneSpec};

fn main() -> pseudolabel::Result<()> {
    let rel = sim::bundled_relation();
    let fine = rel.source().clone();
    let spec = SceneSpec {
        height: 96,
        width: 128,
        num_cells: 16,
        fine: fine.clone(),
        seed: 4,
    };
    let gt = sim::generate_scene(&spec)?;

    // every cobble pixel predicted as asphalt, the left third unlabeled
    let mut pred = gt.clone();
    let (asphalt, cobble) = (fine.find("asphalt").unwrap().id, fine.find("cobble").unwrap().id);
    for (i, id) in pred.ids_mut().iter_mut().enumerate() {
        if *id == cobble {
            *id = asphalt;
        }
        if i % spec.width < spec.width / 3 {
            *id = pseudolabel::VOID_LABEL;
        }
    }

    let mut cm = ConfusionMatrix::for_taxonomy(&fine);
    cm.accumulate(&pred, &gt)?;
    let report = cm.report(&fine);
    println!("{report}\n");

    let mut perfect = ConfusionMatrix::for_taxonomy(&fine);
    perfect.accumulate(&gt, &gt)?;
    let row = ComparisonRow {
        model: "degraded".into(),
        iteration: 1,
        init: perfect.report(&fine).miou,
        post: report.miou,
    };
    print!("{}", render_comparison(&[row]));
    Ok(())
}
