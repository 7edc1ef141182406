//! Label spaces and the `.tax` text format.
//!
//! ```text
//! taxonomy goose
//! class 0 undefined 0 0 0 void
//! class 1 asphalt 128 64 128
//! ```
//!
//! Classes may be declared in any order but their ids must be exactly
//! `0..C`. Names are matched case-insensitively after NFC normalization and
//! must be `[a-z0-9_-]+` once normalized.

use std::collections::HashMap;
use std::fmt;
use std::path::Path;

use crate::classset::MAX_CLASSES;
use crate::dsl::{self, Line};
use crate::error::{Error, ParseError, Result};

/// The label-map value that always means "void / ignore".
pub const VOID_LABEL: u8 = 255;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClassDef {
    pub id: u8,
    pub name: String,
    pub color: [u8; 3],
    pub is_void: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Taxonomy {
    name: String,
    classes: Vec<ClassDef>,
    void_id: Option<u8>,
    by_name: HashMap<String, u8>,
}

impl Taxonomy {
    /// Builds a taxonomy, checking every invariant the text format enforces.
    pub fn new(name: impl Into<String>, mut classes: Vec<ClassDef>) -> Result<Self> {
        let name = dsl::normalize_name(&name.into());
        if !dsl::is_name_token(&name) {
            return Err(Error::Invalid(format!("invalid taxonomy name '{name}'")));
        }
        if classes.is_empty() {
            return Err(Error::Invalid("taxonomy declares no classes".into()));
        }
        if classes.len() > MAX_CLASSES {
            return Err(Error::Invalid(format!(
                "taxonomy declares {} classes, at most {MAX_CLASSES} allowed",
                classes.len()
            )));
        }
        classes.sort_by_key(|c| c.id);
        let mut by_name = HashMap::with_capacity(classes.len());
        let mut void_id = None;
        for (expected, class) in classes.iter_mut().enumerate() {
            if class.id as usize != expected {
                return Err(Error::Invalid(format!(
                    "class ids must be dense: found {} where {expected} expected",
                    class.id
                )));
            }
            class.name = dsl::normalize_name(&class.name);
            if !dsl::is_name_token(&class.name) {
                return Err(Error::Invalid(format!("invalid class name '{}'", class.name)));
            }
            if by_name.insert(class.name.clone(), class.id).is_some() {
                return Err(Error::Invalid(format!(
                    "duplicate class name '{}'",
                    class.name
                )));
            }
            if class.is_void {
                if void_id.is_some() {
                    return Err(Error::Invalid("multiple void classes".into()));
                }
                void_id = Some(class.id);
            }
        }
        Ok(Self {
            name,
            classes,
            void_id,
            by_name,
        })
    }

    pub fn parse(text: &str) -> Result<Self, ParseError> {
        parse_taxonomy(text)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        dsl::decode_utf8(&bytes)
            .and_then(parse_taxonomy)
            .map_err(|e| Error::Parse(e).at_path(path))
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn classes(&self) -> &[ClassDef] {
        &self.classes
    }

    /// Number of classes `C`.
    pub fn len(&self) -> usize {
        self.classes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.classes.is_empty()
    }

    pub fn void_id(&self) -> Option<u8> {
        self.void_id
    }

    pub fn class(&self, id: u8) -> Option<&ClassDef> {
        self.classes.get(id as usize)
    }

    /// Looks a class up by name, case-insensitively.
    pub fn find(&self, name: &str) -> Option<&ClassDef> {
        self.by_name
            .get(&dsl::normalize_name(name))
            .map(|&id| &self.classes[id as usize])
    }

    /// Whether a label-map value means void under this taxonomy: the 255
    /// sentinel, or the id of the taxonomy's own void class.
    #[inline]
    pub fn is_void_label(&self, label: u8) -> bool {
        label == VOID_LABEL || Some(label) == self.void_id
    }

    /// Whether a label-map value is legal under this taxonomy.
    #[inline]
    pub fn is_valid_label(&self, label: u8) -> bool {
        label == VOID_LABEL || (label as usize) < self.classes.len()
    }

    /// Display name for a label-map value, `void` for the sentinel.
    pub fn label_name(&self, label: u8) -> &str {
        self.class(label).map_or("void", |c| c.name.as_str())
    }
}

impl fmt::Display for Taxonomy {
    /// Canonical `.tax` text, classes ordered by id.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "taxonomy {}", self.name)?;
        for c in &self.classes {
            write!(
                f,
                "class {} {} {} {} {}",
                c.id, c.name, c.color[0], c.color[1], c.color[2]
            )?;
            if c.is_void {
                f.write_str(" void")?;
            }
            writeln!(f)?;
        }
        Ok(())
    }
}

pub(crate) fn parse_name(line: &Line<'_>, idx: usize, what: &str) -> Result<String, ParseError> {
    let tok = line
        .tokens
        .get(idx)
        .ok_or_else(|| line.error(idx, format!("expected {what}")))?;
    let name = dsl::normalize_name(tok.text);
    if !dsl::is_name_token(&name) {
        return Err(line.error(
            idx,
            format!("invalid {what} '{}': expected [a-z0-9_-]+", tok.text),
        ));
    }
    Ok(name)
}

fn parse_u8(line: &Line<'_>, idx: usize, what: &str) -> Result<u8, ParseError> {
    let tok = line
        .tokens
        .get(idx)
        .ok_or_else(|| line.error(idx, format!("expected {what}")))?;
    tok.text
        .parse::<u8>()
        .map_err(|_| line.error(idx, format!("invalid {what} '{}': expected 0-255", tok.text)))
}

/// Parses a `.tax` document.
pub fn parse_taxonomy(text: &str) -> Result<Taxonomy, ParseError> {
    let lines = dsl::lex(text);
    let mut iter = lines.iter();
    let header = iter
        .next()
        .ok_or_else(|| ParseError::new(1, 1, "missing 'taxonomy' header"))?;
    if header.keyword() != "taxonomy" {
        return Err(header.error(0, format!("expected 'taxonomy', found '{}'", header.keyword())));
    }
    let name = parse_name(header, 1, "taxonomy name")?;
    if header.tokens.len() > 2 {
        return Err(header.error(2, "unexpected token after taxonomy name"));
    }

    // (line, class)
    let mut classes: Vec<(&Line<'_>, ClassDef)> = Vec::new();
    let mut names: HashMap<String, usize> = HashMap::new();
    let mut ids: HashMap<u8, usize> = HashMap::new();
    let mut void_line: Option<usize> = None;

    for line in iter {
        match line.keyword() {
            "class" => {}
            "taxonomy" => return Err(line.error(0, "duplicate 'taxonomy' header")),
            other => return Err(line.error(0, format!("unknown directive '{other}'"))),
        }
        let id = parse_u8(line, 1, "class id")?;
        if id as usize >= MAX_CLASSES {
            return Err(line.error(1, format!("class id {id} exceeds maximum {}", MAX_CLASSES - 1)));
        }
        let class_name = parse_name(line, 2, "class name")?;
        let color = [
            parse_u8(line, 3, "red channel")?,
            parse_u8(line, 4, "green channel")?,
            parse_u8(line, 5, "blue channel")?,
        ];
        let is_void = match line.tokens.get(6).map(|t| t.text) {
            None => false,
            Some("void") => true,
            Some(other) => return Err(line.error(6, format!("expected 'void', found '{other}'"))),
        };
        if line.tokens.len() > 7 {
            return Err(line.error(7, "unexpected token after class declaration"));
        }
        if let Some(prev) = names.insert(class_name.clone(), line.number) {
            return Err(line.error(
                2,
                format!("duplicate class name '{class_name}' (line {}; first declared on line {prev})", line.number),
            ));
        }
        if let Some(prev) = ids.insert(id, line.number) {
            return Err(line.error(1, format!("duplicate class id {id} (first declared on line {prev})")));
        }
        if is_void {
            if let Some(prev) = void_line {
                return Err(line.error(6, format!("multiple void classes (first on line {prev})")));
            }
            void_line = Some(line.number);
        }
        classes.push((
            line,
            ClassDef {
                id,
                name: class_name,
                color,
                is_void,
            },
        ));
    }

    if classes.is_empty() {
        return Err(header.error(2, "taxonomy declares no classes"));
    }
    let count = classes.len();
    if let Some((line, class)) = classes.iter().find(|(_, c)| c.id as usize >= count) {
        let missing = (0..count as u8).find(|i| !ids.contains_key(i)).unwrap_or(0);
        return Err(line.error(
            1,
            format!(
                "class ids must be dense 0..{}: id {} declared but id {missing} missing",
                count - 1,
                class.id
            ),
        ));
    }

    let defs = classes.into_iter().map(|(_, c)| c).collect();
    Taxonomy::new(name, defs).map_err(|e| ParseError::new(header.number, 1, e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn three_classes_with_void() {
        let tax = parse_taxonomy(
            "taxonomy tiny\nclass 0 asphalt 128 64 128\nclass 1 grass 0 200 0\nclass 2 void 0 0 0 void\n",
        )
        .unwrap();
        assert_eq!(tax.len(), 3);
        assert_eq!(tax.void_id(), Some(2));
        assert!(tax.is_void_label(2));
        assert!(tax.is_void_label(VOID_LABEL));
        assert!(!tax.is_void_label(0));
    }

    #[test]
    fn duplicate_name_is_located() {
        let err = parse_taxonomy("taxonomy t\nclass 0 road 1 2 3\n\nclass 1 road 4 5 6\n").unwrap_err();
        assert_eq!(err.line, 4);
        assert_eq!(err.column, 9);
        assert!(err.message.contains("duplicate class name 'road' (line 4"), "{}", err.message);
    }

    #[test]
    fn case_insensitive_duplicates() {
        let err = parse_taxonomy("taxonomy t\nclass 0 Road 1 2 3\nclass 1 ROAD 4 5 6\n").unwrap_err();
        assert!(err.message.contains("duplicate class name 'road'"));
    }

    #[test]
    fn non_dense_ids_rejected() {
        let err = parse_taxonomy("taxonomy t\nclass 0 a 1 2 3\nclass 2 b 4 5 6\n").unwrap_err();
        assert_eq!(err.line, 3);
        assert!(err.message.contains("dense"), "{}", err.message);
    }

    #[test]
    fn multiple_void_rejected() {
        let err =
            parse_taxonomy("taxonomy t\nclass 0 a 1 2 3 void\nclass 1 b 4 5 6 void\n").unwrap_err();
        assert_eq!(err.line, 3);
        assert!(err.message.contains("multiple void"));
    }

    #[test]
    fn syntax_errors_are_located() {
        let cases = [
            ("", 1),
            ("class 0 a 1 2 3\n", 1),
            ("taxonomy t\nclass 0 a 1 2\n", 2),
            ("taxonomy t\nclass 0 a 1 2 256\n", 2),
            ("taxonomy t\nclass x a 1 2 3\n", 2),
            ("taxonomy t\nclass 0 a 1 2 3 foo\n", 2),
            ("taxonomy t\nklass 0 a 1 2 3\n", 2),
            ("taxonomy t\nclass 0 Straße 1 2 3\n", 2),
            ("taxonomy t\n", 1),
        ];
        for (text, line) in cases {
            let err = parse_taxonomy(text).unwrap_err();
            assert_eq!(err.line, line, "{text:?}: {err}");
        }
    }

    #[test]
    fn out_of_order_declarations_are_canonicalized() {
        let tax = parse_taxonomy("taxonomy t\nclass 1 b 4 5 6\nclass 0 a 1 2 3\n").unwrap();
        assert_eq!(tax.to_string(), "taxonomy t\nclass 0 a 1 2 3\nclass 1 b 4 5 6\n");
    }

    #[test]
    fn bundled_goose_has_64_classes() {
        let text = include_str!("../fixtures/taxonomies/goose.tax");
        let declared = text.lines().filter(|l| l.trim_start().starts_with("class ")).count();
        let tax = parse_taxonomy(text).unwrap();
        assert_eq!(declared, 64);
        assert_eq!(tax.len(), declared);
    }
}
