//! Load a taxonomy pair and its ontology, run the static checks and print
//! a few rows of the resulting constraint table.
//!
//! cargo run --example parse_ontology [extra.tax source.tax relation.ont]

use std::path::PathBuf;

use pseudolabel::{ConstraintTable, OntologyRelation, Taxonomy};

fn main() -> pseudolabel::Result<()> {
    let fixtures = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures");
    let args: Vec<PathBuf> = std::env::args_os().skip(1).map(PathBuf::from).collect();
    let [extra, source, ont] = match &args[..] {
        [a, b, c] => [a.clone(), b.clone(), c.clone()],
        _ => [
            fixtures.join("taxonomies/cityscapes.tax"),
            fixtures.join("taxonomies/goose.tax"),
            fixtures.join("ontologies/cityscapes_to_goose.ont"),
        ],
    };
    let extra = Taxonomy::load(extra)?;
    let source = Taxonomy::load(source)?;
    let rel = OntologyRelation::load(&ont, &extra, &source)?;

    let diags = rel.validate();
    for d in diags.iter() {
        println!("{d}");
    }
    println!(
        "{} -> {}: {} errors, {} warnings",
        extra.name(),
        source.name(),
        diags.errors().count(),
        diags.warnings().count()
    );

    let table = ConstraintTable::build(&rel)?;
    for class in extra.classes().iter().take(6) {
        let allowed: Vec<&str> = table
            .row(class.id)
            .into_iter()
            .flat_map(|s| s.iter())
            .map(|id| source.label_name(id))
            .collect();
        println!("{:>14} -> {}", class.name, allowed.join(", "));
    }
    println!("{:>14} -> {} classes", "void", table.void_row().len());
    Ok(())
}
