//! Ontology relations between an extra taxonomy and the source taxonomy, and
//! the `.ont` text format.
//!
//! ```text
//! ontology cityscapes -> goose
//! map road -> asphalt, marking, cobble
//! map void -> building, sky        # narrows what a void GT pixel may become
//! exclude military_vehicle
//! fallback void
//! ```
//!
//! The relation is stored in one direction only: extra class to the set of
//! source classes a pixel with that ground truth may be labeled as. Repeated
//! `map` lines for one extra class union their right-hand sides.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::classset::ClassSet;
use crate::dsl::{self, Line};
use crate::error::{Error, ParseError, Result};
use crate::taxonomy::{parse_name, Taxonomy};

/// What refinement does with a pixel whose allowed set leaves no probability mass.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FallbackPolicy {
    /// Abort, naming the first such pixel.
    Error,
    /// Emit the void sentinel.
    #[default]
    Void,
    /// Keep the unmasked scores and take their argmax.
    #[serde(rename = "unconstrained")]
    UnconstrainedArgmax,
}

impl FallbackPolicy {
    pub fn as_str(self) -> &'static str {
        match self {
            FallbackPolicy::Error => "error",
            FallbackPolicy::Void => "void",
            FallbackPolicy::UnconstrainedArgmax => "unconstrained",
        }
    }
}

impl fmt::Display for FallbackPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FallbackPolicy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "error" => Ok(FallbackPolicy::Error),
            "void" => Ok(FallbackPolicy::Void),
            "unconstrained" => Ok(FallbackPolicy::UnconstrainedArgmax),
            other => Err(format!(
                "unknown fallback '{other}': expected error, void or unconstrained"
            )),
        }
    }
}

/// Extra class -> allowed source classes, plus dataset-level exclusions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OntologyRelation {
    extra: Taxonomy,
    source: Taxonomy,
    entries: BTreeMap<u8, ClassSet>,
    void_entry: Option<ClassSet>,
    excluded: ClassSet,
    fallback: FallbackPolicy,
}

impl OntologyRelation {
    /// An empty relation between two taxonomies; populate it with [`Self::map`]
    /// and [`Self::exclude`].
    pub fn new(extra: Taxonomy, source: Taxonomy) -> Self {
        Self {
            extra,
            source,
            entries: BTreeMap::new(),
            void_entry: None,
            excluded: ClassSet::empty(),
            fallback: FallbackPolicy::default(),
        }
    }

    pub fn parse(text: &str, extra: &Taxonomy, source: &Taxonomy) -> Result<Self, ParseError> {
        parse_ontology(text, extra, source)
    }

    pub fn load(path: impl AsRef<Path>, extra: &Taxonomy, source: &Taxonomy) -> Result<Self> {
        let path = path.as_ref();
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        dsl::decode_utf8(&bytes)
            .and_then(|text| parse_ontology(text, extra, source))
            .map_err(|e| Error::Parse(e).at_path(path))
    }

    /// Adds source classes to an extra class's entry. Mapping the extra
    /// taxonomy's void class writes the explicit void row.
    pub fn map(&mut self, extra_id: u8, sources: ClassSet) -> Result<()> {
        if extra_id as usize >= self.extra.len() {
            return Err(Error::Invalid(format!(
                "extra class id {extra_id} not in taxonomy '{}'",
                self.extra.name()
            )));
        }
        self.check_source_ids(&sources)?;
        if Some(extra_id) == self.extra.void_id() {
            self.map_void(sources)
        } else {
            let entry = self.entries.entry(extra_id).or_default();
            *entry = entry.union(&sources);
            Ok(())
        }
    }

    /// Adds source classes to the explicit void row.
    pub fn map_void(&mut self, sources: ClassSet) -> Result<()> {
        self.check_source_ids(&sources)?;
        let entry = self.void_entry.get_or_insert_with(ClassSet::empty);
        *entry = entry.union(&sources);
        Ok(())
    }

    pub fn exclude(&mut self, source_id: u8) -> Result<()> {
        self.check_source_ids(&ClassSet::from_iter([source_id]))?;
        self.excluded.insert(source_id);
        Ok(())
    }

    pub fn set_fallback(&mut self, policy: FallbackPolicy) {
        self.fallback = policy;
    }

    fn check_source_ids(&self, sources: &ClassSet) -> Result<()> {
        if sources.bound() > self.source.len() {
            return Err(Error::Invalid(format!(
                "source class id {} not in taxonomy '{}'",
                sources.bound() - 1,
                self.source.name()
            )));
        }
        Ok(())
    }

    pub fn extra(&self) -> &Taxonomy {
        &self.extra
    }

    pub fn source(&self) -> &Taxonomy {
        &self.source
    }

    /// Mapped extra classes (excluding the void row), ascending by id.
    pub fn entries(&self) -> &BTreeMap<u8, ClassSet> {
        &self.entries
    }

    pub fn entry(&self, extra_id: u8) -> Option<&ClassSet> {
        self.entries.get(&extra_id)
    }

    /// The explicit `map void -> ...` entry, if the document declared one.
    pub fn void_entry(&self) -> Option<&ClassSet> {
        self.void_entry.as_ref()
    }

    pub fn excluded(&self) -> &ClassSet {
        &self.excluded
    }

    pub fn fallback(&self) -> FallbackPolicy {
        self.fallback
    }

    fn void_lhs_name(&self) -> &str {
        self.extra
            .void_id()
            .and_then(|id| self.extra.class(id))
            .map_or("void", |c| c.name.as_str())
    }
}

impl fmt::Display for OntologyRelation {
    /// Canonical `.ont` text: entries by extra id, sources by source id.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let source_names = |set: &ClassSet| {
            set.iter()
                .map(|id| self.source.label_name(id))
                .collect::<Vec<_>>()
                .join(", ")
        };
        writeln!(f, "ontology {} -> {}", self.extra.name(), self.source.name())?;
        for (&id, set) in &self.entries {
            if !set.is_empty() {
                writeln!(f, "map {} -> {}", self.extra.label_name(id), source_names(set))?;
            }
        }
        if let Some(set) = self.void_entry.as_ref().filter(|s| !s.is_empty()) {
            writeln!(f, "map {} -> {}", self.void_lhs_name(), source_names(set))?;
        }
        for id in self.excluded.iter() {
            writeln!(f, "exclude {}", self.source.label_name(id))?;
        }
        writeln!(f, "fallback {}", self.fallback)
    }
}

fn lookup(line: &Line<'_>, idx: usize, tax: &Taxonomy, role: &str) -> Result<u8, ParseError> {
    let name = parse_name(line, idx, &format!("{role} class name"))?;
    tax.find(&name).map(|c| c.id).ok_or_else(|| {
        line.error(
            idx,
            format!("unknown class name '{name}' in {role} taxonomy '{}'", tax.name()),
        )
    })
}

/// Parses a `.ont` document against its two taxonomies.
pub fn parse_ontology(
    text: &str,
    extra: &Taxonomy,
    source: &Taxonomy,
) -> Result<OntologyRelation, ParseError> {
    let lines = dsl::lex(text);
    let mut iter = lines.iter();
    let header = iter
        .next()
        .ok_or_else(|| ParseError::new(1, 1, "missing 'ontology' header"))?;
    if header.keyword() != "ontology" {
        return Err(header.error(0, format!("expected 'ontology', found '{}'", header.keyword())));
    }
    let extra_name = parse_name(header, 1, "extra taxonomy name")?;
    if header.tokens.get(2).map(|t| t.text) != Some("->") {
        return Err(header.error(2, "expected '->'"));
    }
    let source_name = parse_name(header, 3, "source taxonomy name")?;
    if header.tokens.len() > 4 {
        return Err(header.error(4, "unexpected token after source taxonomy name"));
    }
    if extra_name != extra.name() {
        return Err(header.error(
            1,
            format!("header names extra taxonomy '{extra_name}' but '{}' was given", extra.name()),
        ));
    }
    if source_name != source.name() {
        return Err(header.error(
            3,
            format!("header names source taxonomy '{source_name}' but '{}' was given", source.name()),
        ));
    }

    let mut rel = OntologyRelation::new(extra.clone(), source.clone());
    let mut fallback_line: Option<usize> = None;

    for line in iter {
        match line.keyword() {
            "map" => {
                let lhs = parse_name(line, 1, "extra class name")?;
                let extra_class = extra.find(&lhs).map(|c| c.id);
                if extra_class.is_none() && lhs != "void" {
                    return Err(line.error(
                        1,
                        format!("unknown class name '{lhs}' in extra taxonomy '{}'", extra.name()),
                    ));
                }
                if line.tokens.get(2).map(|t| t.text) != Some("->") {
                    return Err(line.error(2, "expected '->'"));
                }
                let mut sources = ClassSet::empty();
                let mut idx = 3;
                loop {
                    sources.insert(lookup(line, idx, source, "source")?);
                    match line.tokens.get(idx + 1).map(|t| t.text) {
                        None => break,
                        Some(",") => idx += 2,
                        Some(other) => {
                            return Err(line.error(idx + 1, format!("expected ',', found '{other}'")))
                        }
                    }
                }
                let result = match extra_class {
                    Some(id) => rel.map(id, sources),
                    None => rel.map_void(sources),
                };
                result.map_err(|e| line.error(1, e.to_string()))?;
            }
            "exclude" => {
                let id = lookup(line, 1, source, "source")?;
                if line.tokens.len() > 2 {
                    return Err(line.error(2, "unexpected token after excluded class"));
                }
                rel.excluded.insert(id);
            }
            "fallback" => {
                let tok = line
                    .tokens
                    .get(1)
                    .ok_or_else(|| line.error(1, "expected fallback policy"))?;
                let policy = tok.text.parse().map_err(|e: String| line.error(1, e))?;
                if let Some(prev) = fallback_line {
                    return Err(line.error(0, format!("duplicate 'fallback' (first on line {prev})")));
                }
                if line.tokens.len() > 2 {
                    return Err(line.error(2, "unexpected token after fallback policy"));
                }
                fallback_line = Some(line.number);
                rel.fallback = policy;
            }
            "ontology" => return Err(line.error(0, "duplicate 'ontology' header")),
            other => return Err(line.error(0, format!("unknown directive '{other}'"))),
        }
    }
    Ok(rel)
}
