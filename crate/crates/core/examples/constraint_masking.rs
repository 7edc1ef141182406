//! Mask a hand-made 2x2 teacher prediction with a one-line ontology and
//! compare the hardened labels with and without the constraint.

use pseudolabel::refine::{argmax, constraint_mask, harden, RefineConfig};
use pseudolabel::{ClassDef, ConstraintTable, LabelMap, OntologyRelation, SoftPrediction, Taxonomy};

fn taxonomy(name: &str, classes: &[&str]) -> Taxonomy {
    let defs = classes
        .iter()
        .enumerate()
        .map(|(i, n)| ClassDef {
            id: i as u8,
            name: n.to_string(),
            color: [0, 0, 0],
            is_void: false,
        })
        .collect();
    Taxonomy::new(name, defs).unwrap()
}

fn main() -> pseudolabel::Result<()> {
    let extra = taxonomy("coarse", &["road", "nature"]);
    let source = taxonomy("fine", &["asphalt", "grass", "tree"]);
    let rel = OntologyRelation::parse(
        "ontology coarse -> fine\nmap road -> asphalt\nmap nature -> grass, tree\n",
        &extra,
        &source,
    )?;
    let table = ConstraintTable::build(&rel)?;

    // the teacher likes grass everywhere
    #[rustfmt::skip]
    let teacher = SoftPrediction::new(2, 2, 3, vec![
        0.3, 0.6, 0.1,   0.2, 0.7, 0.1,
        0.1, 0.5, 0.4,   0.0, 0.4, 0.6,
    ])?;
    let gt = LabelMap::new(2, 2, vec![0, 0, 1, 1])?;

    let cfg = RefineConfig {
        renormalize_output: true,
        ..RefineConfig::default()
    };
    let masked = constraint_mask(&teacher, &gt, &table, &cfg)?;
    let labels = harden(&masked.scores, &masked.fallback, &cfg)?;
    for (i, px) in teacher.pixels().enumerate() {
        println!(
            "pixel {i}: gt {:<6} teacher {:<7} masked {:?} -> {}",
            extra.label_name(gt.ids()[i]),
            source.label_name(argmax(px)),
            masked.scores.pixels().nth(i).unwrap(),
            source.label_name(labels.ids()[i]),
        );
    }
    println!("{} of 4 pixels changed by the mask", masked.report.pixels_changed_by_mask);
    Ok(())
}
