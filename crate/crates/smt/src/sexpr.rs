//! Minimal s-expression reader for the SMT-LIB2 concrete syntax.
//!
//! Handles atoms, nested lists, line comments, and the two quoting forms
//! (`|symbol|` and `"string"`) that show up in solver scripts. Quoted forms
//! are kept verbatim, delimiters included, since nothing downstream needs
//! their unescaped spelling.

use std::fmt;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SExpr {
    Atom(String),
    List(Vec<SExpr>),
}

impl SExpr {
    pub fn atom(&self) -> Option<&str> {
        match self {
            SExpr::Atom(s) => Some(s),
            SExpr::List(_) => None,
        }
    }

    pub fn list(&self) -> Option<&[SExpr]> {
        match self {
            SExpr::Atom(_) => None,
            SExpr::List(items) => Some(items),
        }
    }
}

impl fmt::Display for SExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SExpr::Atom(s) => f.write_str(s),
            SExpr::List(items) => {
                f.write_str("(")?;
                for (i, item) in items.iter().enumerate() {
                    if i > 0 {
                        f.write_str(" ")?;
                    }
                    write!(f, "{item}")?;
                }
                f.write_str(")")
            }
        }
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SexprError {
    #[error("unexpected ')' at byte {0}")]
    UnexpectedClose(usize),
    #[error("unclosed '(' opened at byte {0}")]
    UnclosedList(usize),
    #[error("unterminated quoted token starting at byte {0}")]
    UnterminatedQuote(usize),
}

/// Parses a whole script into its top-level s-expressions.
pub fn parse_all(input: &str) -> Result<Vec<SExpr>, SexprError> {
    let bytes = input.as_bytes();
    let mut pos = 0usize;
    let mut top = Vec::new();
    // Stack of (open position, collected items) for unfinished lists.
    let mut stack: Vec<(usize, Vec<SExpr>)> = Vec::new();

    while pos < bytes.len() {
        let b = bytes[pos];
        match b {
            b' ' | b'\t' | b'\r' | b'\n' => pos += 1,
            b';' => {
                while pos < bytes.len() && bytes[pos] != b'\n' {
                    pos += 1;
                }
            }
            b'(' => {
                stack.push((pos, Vec::new()));
                pos += 1;
            }
            b')' => {
                let (_, items) = stack.pop().ok_or(SexprError::UnexpectedClose(pos))?;
                let expr = SExpr::List(items);
                match stack.last_mut() {
                    Some((_, parent)) => parent.push(expr),
                    None => top.push(expr),
                }
                pos += 1;
            }
            b'"' | b'|' => {
                let start = pos;
                let close = b;
                pos += 1;
                loop {
                    if pos >= bytes.len() {
                        return Err(SexprError::UnterminatedQuote(start));
                    }
                    if bytes[pos] == close {
                        // SMT-LIB strings escape '"' by doubling it.
                        if close == b'"' && bytes.get(pos + 1) == Some(&b'"') {
                            pos += 2;
                            continue;
                        }
                        pos += 1;
                        break;
                    }
                    pos += 1;
                }
                let atom = SExpr::Atom(input[start..pos].to_string());
                match stack.last_mut() {
                    Some((_, parent)) => parent.push(atom),
                    None => top.push(atom),
                }
            }
            _ => {
                let start = pos;
                while pos < bytes.len() && !is_delimiter(bytes[pos]) {
                    pos += 1;
                }
                let atom = SExpr::Atom(input[start..pos].to_string());
                match stack.last_mut() {
                    Some((_, parent)) => parent.push(atom),
                    None => top.push(atom),
                }
            }
        }
    }

    if let Some((open, _)) = stack.first() {
        return Err(SexprError::UnclosedList(*open));
    }
    Ok(top)
}

fn is_delimiter(b: u8) -> bool {
    matches!(b, b' ' | b'\t' | b'\r' | b'\n' | b'(' | b')' | b';' | b'"' | b'|')
}

#[cfg(test)]
mod tests {
    use super::*;

    fn atom(s: &str) -> SExpr {
        SExpr::Atom(s.to_string())
    }

    #[test]
    fn parses_nested_lists() {
        let got = parse_all("(assert (= x #x0f)) (check-sat)").unwrap();
        assert_eq!(
            got,
            vec![
                SExpr::List(vec![
                    atom("assert"),
                    SExpr::List(vec![atom("="), atom("x"), atom("#x0f")]),
                ]),
                SExpr::List(vec![atom("check-sat")]),
            ]
        );
    }

    #[test]
    fn skips_comments_and_whitespace() {
        let got = parse_all("; header\n  foo ; trailing\n\tbar\n").unwrap();
        assert_eq!(got, vec![atom("foo"), atom("bar")]);
    }

    #[test]
    fn keeps_quoted_tokens_verbatim() {
        let got = parse_all("|odd name| \"a\"\"b\"").unwrap();
        assert_eq!(got, vec![atom("|odd name|"), atom("\"a\"\"b\"")]);
    }

    #[test]
    fn reports_unbalanced_input() {
        assert_eq!(parse_all("(a (b)"), Err(SexprError::UnclosedList(0)));
        assert_eq!(parse_all("a)"), Err(SexprError::UnexpectedClose(1)));
        assert_eq!(parse_all("\"oops"), Err(SexprError::UnterminatedQuote(0)));
    }

    #[test]
    fn display_round_trips() {
        let src = "(assert (bvult x (_ bv7 8)))";
        let got = parse_all(src).unwrap();
        assert_eq!(got[0].to_string(), src);
    }
}
