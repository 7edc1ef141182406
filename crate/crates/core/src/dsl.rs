//! Line lexer shared by the taxonomy, ontology and manifest formats.
//!
//! Every format is line-oriented: `#` starts a comment that runs to the end of
//! the line, tokens are separated by whitespace, and `,` and `->` are always
//! tokens of their own.

use unicode_normalization::UnicodeNormalization;

use crate::error::ParseError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct Token<'a> {
    pub text: &'a str,
    /// 1-based character column.
    pub column: usize,
}

#[derive(Debug, Clone)]
pub(crate) struct Line<'a> {
    pub number: usize,
    pub tokens: Vec<Token<'a>>,
}

impl<'a> Line<'a> {
    pub fn error(&self, token: usize, message: impl Into<String>) -> ParseError {
        let column = self.tokens.get(token).map_or_else(
            || self.tokens.last().map_or(1, |t| t.column + t.text.chars().count()),
            |t| t.column,
        );
        ParseError::new(self.number, column, message)
    }

    pub fn keyword(&self) -> &'a str {
        self.tokens[0].text
    }
}

/// Splits a document into non-empty, comment-stripped token lines.
pub(crate) fn lex(text: &str) -> Vec<Line<'_>> {
    let mut out = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let tokens = tokenize(raw);
        if !tokens.is_empty() {
            out.push(Line {
                number: idx + 1,
                tokens,
            });
        }
    }
    out
}

fn tokenize(line: &str) -> Vec<Token<'_>> {
    let mut tokens = Vec::new();
    let mut start: Option<(usize, usize)> = None;
    let mut chars = line.char_indices().enumerate().peekable();

    while let Some((col, (byte, ch))) = chars.next() {
        if ch == '#' {
            break;
        }
        let arrow = ch == '-' && matches!(chars.peek(), Some((_, (_, '>'))));
        if ch.is_whitespace() || ch == ',' || arrow {
            if let Some((b, c)) = start.take() {
                tokens.push(Token {
                    text: &line[b..byte],
                    column: c + 1,
                });
            }
            if ch == ',' {
                tokens.push(Token {
                    text: &line[byte..byte + 1],
                    column: col + 1,
                });
            } else if arrow {
                chars.next();
                tokens.push(Token {
                    text: &line[byte..byte + 2],
                    column: col + 1,
                });
            }
        } else if start.is_none() {
            start = Some((byte, col));
        }
    }
    if let Some((b, c)) = start {
        // stop at a comment if one ended the loop early
        let end = line[b..].find('#').map_or(line.len(), |i| b + i);
        let text = line[b..end].trim_end();
        if !text.is_empty() {
            tokens.push(Token { text, column: c + 1 });
        }
    }
    tokens
}

/// NFC-normalizes and lowercases a class or taxonomy name.
pub(crate) fn normalize_name(raw: &str) -> String {
    raw.nfc().collect::<String>().to_lowercase()
}

/// `[a-z0-9_-]+`
pub(crate) fn is_name_token(s: &str) -> bool {
    !s.is_empty()
        && s
            .bytes()
            .all(|b| b.is_ascii_lowercase() || b.is_ascii_digit() || b == b'_' || b == b'-')
}

/// Decodes UTF-8, reporting the line and column of the first invalid byte.
pub fn decode_utf8(bytes: &[u8]) -> Result<&str, ParseError> {
    std::str::from_utf8(bytes).map_err(|e| {
        let valid = &bytes[..e.valid_up_to()];
        // the valid prefix is UTF-8 by construction
        let prefix = std::str::from_utf8(valid).unwrap_or_default();
        let line = prefix.matches('\n').count() + 1;
        let column = prefix.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
        ParseError::new(line, column, "invalid UTF-8")
    })
}
