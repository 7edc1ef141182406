//! Static checks over an [`OntologyRelation`].

use std::fmt;

use serde::Serialize;

use crate::classset::ClassSet;
use crate::ontology::OntologyRelation;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Error,
    Warning,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Code {
    /// A non-void extra class has no `map` line.
    UncoveredExtraClass,
    /// A row is empty once exclusions are subtracted.
    EmptyAllowedSet,
    /// A source class no row allows; it can never be a pseudo-label.
    UnreachableSourceClass,
    /// An extra class allows every non-excluded source class.
    VacuousConstraint,
    /// A source class is both mapped to and excluded; the exclusion wins.
    MappedAndExcluded,
}

impl Code {
    pub fn as_str(self) -> &'static str {
        match self {
            Code::UncoveredExtraClass => "uncovered-extra-class",
            Code::EmptyAllowedSet => "empty-allowed-set",
            Code::UnreachableSourceClass => "unreachable-source-class",
            Code::VacuousConstraint => "vacuous-constraint",
            Code::MappedAndExcluded => "mapped-and-excluded",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct Diagnostic {
    pub severity: Severity,
    pub code: Code,
    /// Name of the class the diagnostic is about.
    pub subject: String,
    pub message: String,
}

impl fmt::Display for Diagnostic {
    /// `SEVERITY CODE subject "message"`
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let severity = match self.severity {
            Severity::Error => "ERROR",
            Severity::Warning => "WARNING",
        };
        write!(
            f,
            "{severity} {} {} {:?}",
            self.code.as_str(),
            self.subject,
            self.message
        )
    }
}

/// Sorted diagnostics: errors first, then by code and subject.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct Diagnostics(Vec<Diagnostic>);

impl Diagnostics {
    pub fn iter(&self) -> impl Iterator<Item = &Diagnostic> {
        self.0.iter()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn errors(&self) -> impl Iterator<Item = &Diagnostic> {
        self.0.iter().filter(|d| d.severity == Severity::Error)
    }

    pub fn warnings(&self) -> impl Iterator<Item = &Diagnostic> {
        self.0.iter().filter(|d| d.severity == Severity::Warning)
    }

    pub fn has_errors(&self) -> bool {
        self.errors().next().is_some()
    }
}

impl fmt::Display for Diagnostics {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for d in &self.0 {
            writeln!(f, "{d}")?;
        }
        Ok(())
    }
}

impl IntoIterator for Diagnostics {
    type Item = Diagnostic;
    type IntoIter = std::vec::IntoIter<Diagnostic>;

    fn into_iter(self) -> Self::IntoIter {
        self.0.into_iter()
    }
}

/// Runs every check over a relation. Pure and independent of the order in
/// which the relation's lines were declared.
pub fn validate_ontology(rel: &OntologyRelation) -> Diagnostics {
    let extra = rel.extra();
    let source = rel.source();
    let excluded = rel.excluded();
    let mut out = Vec::new();
    let mut push = |severity, code, subject: &str, message: String| {
        out.push(Diagnostic {
            severity,
            code,
            subject: subject.to_string(),
            message,
        })
    };

    let mut reachable = ClassSet::empty();
    let mut mapped = ClassSet::empty();
    let available = ClassSet::full(source.len()).difference(excluded);

    for class in extra.classes().iter().filter(|c| !c.is_void) {
        let Some(entry) = rel.entry(class.id) else {
            push(
                Severity::Error,
                Code::UncoveredExtraClass,
                &class.name,
                format!("extra class '{}' has no mapping", class.name),
            );
            continue;
        };
        mapped = mapped.union(entry);
        let row = entry.difference(excluded);
        reachable = reachable.union(&row);
        if row.is_empty() {
            push(
                Severity::Error,
                Code::EmptyAllowedSet,
                &class.name,
                format!(
                    "every source class mapped from '{}' is excluded",
                    class.name
                ),
            );
        } else if available.is_subset(&row) && available.len() > 1 {
            push(
                Severity::Warning,
                Code::VacuousConstraint,
                &class.name,
                format!("'{}' allows every source class", class.name),
            );
        }
    }

    if let Some(entry) = rel.void_entry() {
        mapped = mapped.union(entry);
        let row = entry.difference(excluded);
        reachable = reachable.union(&row);
        if row.is_empty() {
            // subject must name a real class: the extra void class, or the
            // first source class the void line mentions
            let subject = extra
                .void_id()
                .map(|id| extra.label_name(id).to_string())
                .or_else(|| entry.iter().next().map(|id| source.label_name(id).to_string()))
                .unwrap_or_default();
            push(
                Severity::Error,
                Code::EmptyAllowedSet,
                &subject,
                "every source class mapped from void is excluded".to_string(),
            );
        }
    } else if extra.classes().iter().all(|c| c.is_void) {
        if let Some(id) = extra.void_id() {
            push(
                Severity::Error,
                Code::EmptyAllowedSet,
                extra.label_name(id),
                "void row is empty: the extra taxonomy has no mapped classes".to_string(),
            );
        }
    }

    for class in source.classes() {
        let id = class.id;
        if mapped.contains(id) && excluded.contains(id) {
            push(
                Severity::Warning,
                Code::MappedAndExcluded,
                &class.name,
                format!("source class '{}' is mapped and excluded; exclusion wins", class.name),
            );
        }
        if !reachable.contains(id) && !excluded.contains(id) && !class.is_void {
            push(
                Severity::Warning,
                Code::UnreachableSourceClass,
                &class.name,
                format!(
                    "source class '{}' is allowed by no extra class and can never be a pseudo-label",
                    class.name
                ),
            );
        }
    }

    out.sort();
    out.dedup();
    Diagnostics(out)
}

impl OntologyRelation {
    pub fn validate(&self) -> Diagnostics {
        validate_ontology(self)
    }
}
