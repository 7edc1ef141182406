//! Per-ground-truth-label allowed-set lookup.

use crate::classset::ClassSet;
use crate::error::{Error, Result};
use crate::ontology::OntologyRelation;
use crate::taxonomy::VOID_LABEL;

/// Materialized relation: one bitset row per extra label value.
///
/// Rows are indexed directly by the ground-truth byte, so a lookup is a
/// single array access. The 255 sentinel and the extra taxonomy's own void
/// class both resolve to the void row.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConstraintTable {
    rows: Box<[ClassSet; 256]>,
    extra_len: usize,
    extra_void: Option<u8>,
    source_len: usize,
    void_explicit: bool,
}

impl ConstraintTable {
    /// Builds the table, refusing relations that fail validation.
    pub fn build(rel: &OntologyRelation) -> Result<Self> {
        if let Some(first) = rel.validate().errors().next() {
            return Err(Error::Validation(first.to_string()));
        }
        Ok(Self::build_unchecked(rel))
    }

    /// Builds the table without running validation. Uncovered extra classes
    /// get empty rows.
    pub fn build_unchecked(rel: &OntologyRelation) -> Self {
        let excluded = rel.excluded();
        let mut rows = Box::new([ClassSet::empty(); 256]);
        let mut union = ClassSet::empty();
        for (&id, entry) in rel.entries() {
            let row = entry.difference(excluded);
            rows[id as usize] = row;
            union = union.union(&row);
        }
        let void_row = match rel.void_entry() {
            Some(entry) => entry.difference(excluded),
            None => union,
        };
        rows[VOID_LABEL as usize] = void_row;
        if let Some(id) = rel.extra().void_id() {
            rows[id as usize] = void_row;
        }
        Self {
            rows,
            extra_len: rel.extra().len(),
            extra_void: rel.extra().void_id(),
            source_len: rel.source().len(),
            void_explicit: rel.void_entry().is_some(),
        }
    }

    /// Allowed source classes for a ground-truth label, `None` for values
    /// the extra taxonomy does not define.
    #[inline]
    pub fn row(&self, label: u8) -> Option<&ClassSet> {
        self.is_known_label(label).then(|| &self.rows[label as usize])
    }

    /// Unchecked lookup for labels already validated with [`Self::is_known_label`].
    #[inline]
    pub(crate) fn row_unchecked(&self, label: u8) -> &ClassSet {
        &self.rows[label as usize]
    }

    #[inline]
    pub fn is_known_label(&self, label: u8) -> bool {
        label == VOID_LABEL || (label as usize) < self.extra_len
    }

    pub fn void_row(&self) -> &ClassSet {
        &self.rows[VOID_LABEL as usize]
    }

    /// Whether the void row came from an explicit `map void` line.
    pub fn void_is_explicit(&self) -> bool {
        self.void_explicit
    }

    pub fn extra_void(&self) -> Option<u8> {
        self.extra_void
    }

    /// Number of extra classes (rows, not counting the sentinel).
    pub fn extra_len(&self) -> usize {
        self.extra_len
    }

    /// Width of every row, `C_source`.
    pub fn source_len(&self) -> usize {
        self.source_len
    }

    /// A table whose every row allows every source class.
    pub fn vacuous(extra_len: usize, source_len: usize) -> Self {
        let full = ClassSet::full(source_len);
        Self {
            rows: Box::new([full; 256]),
            extra_len,
            extra_void: None,
            source_len,
            void_explicit: false,
        }
    }
}
