//! Synthetic Voronoi scenes with a teacher that mistakes asphalt for high
//! grass. Masking with the coarse ground truth repairs every such pixel
//! and never breaks a correct one.
//!
//! cargo run --example simulate_dominance [trials] [triptych-dir]

use pseudolabel::refine::RefineConfig;
use pseudolabel::sim::{self, Confusion, SceneSpec, TeacherNoise};
use pseudolabel::ConstraintTable;

fn main() -> pseudolabel::Result<()> {
    let mut args = std::env::args().skip(1);
    let trials: usize = args.next().and_then(|a| a.parse().ok()).unwrap_or(20);
    let rel = sim::bundled_relation();
    let fine = rel.source().clone();
    let spec = SceneSpec {
        height: 64,
        width: 64,
        num_cells: 12,
        fine: fine.clone(),
        seed: 1,
    };
    let noise = TeacherNoise {
        beta: 2.0,
        confusions: vec![Confusion {
            from: fine.find("asphalt").unwrap().id,
            to: fine.find("high-grass").unwrap().id,
            gamma: 3.0,
        }],
        sigma: 1.0,
        seed: 1,
    };
    let cfg = RefineConfig::default();
    let report = sim::run_experiment(&spec, &noise, &rel, &cfg, trials)?;
    println!("{}", report.summary());
    println!("dominance violations: {:?}", report.dominance_violations());

    if let Some(dir) = args.next() {
        std::fs::create_dir_all(&dir).map_err(|e| pseudolabel::Error::Invalid(e.to_string()))?;
        let table = ConstraintTable::build(&rel)?;
        let trial = sim::run_trial(&spec, &noise, &rel, &table, &cfg, 0)?;
        let (w, h, rgb) = sim::triptych(&trial, &fine);
        let path = std::path::Path::new(&dir).join("trial000.png");
        std::fs::write(&path, pseudolabel::io::encode_rgb(w, h, &rgb))
            .map_err(|e| pseudolabel::Error::Invalid(e.to_string()))?;
        println!("wrote {}", path.display());
    }
    Ok(())
}
