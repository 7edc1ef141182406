//! End to end on a generated dataset: write teacher predictions for four
//! augmentations, refine them into pseudo-labels inside an iteration
//! workspace and print the aggregate report.
//!
//! cargo run --example toy_pipeline [output-dir]

use std::path::PathBuf;

use pseudolabel::manifest::DatasetManifest;
use pseudolabel::sim::{self, ToyDataset};
use pseudolabel::tensor::aug_stem;
use pseudolabel::workspace::{refine_manifest, BatchOptions, IterationWorkspace};
use pseudolabel::ConstraintTable;

fn main() -> pseudolabel::Result<()> {
    let tmp;
    let dir = match std::env::args_os().nth(1) {
        Some(d) => PathBuf::from(d),
        None => {
            tmp = tempfile::tempdir().map_err(|e| pseudolabel::Error::Invalid(e.to_string()))?;
            tmp.path().to_path_buf()
        }
    };
    let toy = ToyDataset::default();
    let manifest = DatasetManifest::load(sim::write_toy_dataset(&dir, &toy)?)?;
    let rel = sim::bundled_relation();
    let table = ConstraintTable::build(&rel)?;

    let ws = IterationWorkspace::new(dir.join("work"), IterationWorkspace::next_iteration(dir.join("work")))?;
    let opts = BatchOptions {
        augs: Some(toy.augs.iter().map(|&(s, f)| aug_stem(s, f)).collect()),
        colorize: true,
        ..BatchOptions::default()
    };
    let agg = refine_manifest(&manifest, &dir.join("predictions"), &table, rel.extra(), rel.source(), &ws, &opts)?;
    println!("{}", agg.summary());
    println!("pseudo-labels in {}", ws.pseudo_labels_dir().display());
    Ok(())
}
