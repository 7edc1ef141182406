//! Frame-count tables for the bundled urban and off-road manifest sets,
//! then temporal subsampling of a contiguous dataset.

use std::path::PathBuf;

use pseudolabel::manifest::{load_manifest_set, stats, subsample};

fn main() -> pseudolabel::Result<()> {
    let tables = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures/tables");
    for name in ["urban", "off-road"] {
        let set = load_manifest_set(tables.join(format!("{name}.manifestset")))?;
        println!("{}", stats(&set, name));

        for m in set.iter().filter(|m| m.contiguous).take(2) {
            let every20 = subsample(m, 20).manifest;
            println!("{}: {} frames, every 20th keeps {}", m.name, m.frame_count(), every20.frame_count());
        }
        if let Some(m) = set.iter().find(|m| !m.contiguous) {
            println!("{}", subsample(m, 20).warning.unwrap_or_default());
        }
        println!();
    }
    Ok(())
}
