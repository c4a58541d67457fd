//! Physical-line preprocessing: indentation levels, comment extraction and
//! token splitting.

use super::error::{ParseError, ParseErrorKind};

/// Columns per indentation level. A tab counts as one level.
pub const INDENT: usize = 2;

#[derive(Debug, Clone)]
pub struct Line {
    pub no: usize,
    pub level: usize,
    /// Content with comments removed, trimmed.
    pub text: String,
    pub comments: Vec<String>,
}

#[derive(Debug, Default)]
pub struct Preprocessed {
    pub lines: Vec<Line>,
    /// Comments appearing before the first content line.
    pub leading: Vec<String>,
}

pub fn preprocess(source: &str) -> Result<Preprocessed, ParseError> {
    let mut out = Preprocessed::default();
    for (i, raw) in source.lines().enumerate() {
        let no = i + 1;
        let (text, comments) = strip_comments(raw, no)?;
        if text.trim().is_empty() {
            // comment-only lines belong to the nearest preceding node
            match out.lines.last_mut() {
                Some(prev) => prev.comments.extend(comments),
                None => out.leading.extend(comments),
            }
            continue;
        }
        let mut col = 0;
        for c in raw.chars() {
            match c {
                ' ' => col += 1,
                '\t' => col += INDENT,
                _ => break,
            }
        }
        if col % INDENT != 0 {
            return Err(ParseError::new(
                ParseErrorKind::DanglingIndentation,
                no,
                col + 1,
                format!("indentation of {col} columns is not a multiple of {INDENT}"),
            ));
        }
        out.lines.push(Line { no, level: col / INDENT, text: text.trim().to_string(), comments });
    }
    Ok(out)
}

/// Splits a raw line into content and parenthesized comments. Parentheses
/// inside double-quoted strings are content.
fn strip_comments(raw: &str, no: usize) -> Result<(String, Vec<String>), ParseError> {
    let mut text = String::new();
    let mut comments = Vec::new();
    let mut current = String::new();
    let mut depth = 0usize;
    let mut open_col = 0;
    let mut in_str = false;
    let mut escaped = false;
    for (idx, c) in raw.chars().enumerate() {
        if depth > 0 {
            match c {
                '(' => {
                    depth += 1;
                    current.push(c);
                }
                ')' => {
                    depth -= 1;
                    if depth == 0 {
                        comments.push(current.trim().to_string());
                        current.clear();
                    } else {
                        current.push(c);
                    }
                }
                _ => current.push(c),
            }
            continue;
        }
        if in_str {
            text.push(c);
            if escaped {
                escaped = false;
            } else if c == '\\' {
                escaped = true;
            } else if c == '"' {
                in_str = false;
            }
            continue;
        }
        match c {
            '"' => {
                in_str = true;
                text.push(c);
            }
            '(' => {
                depth = 1;
                open_col = idx + 1;
            }
            ')' => {
                return Err(ParseError::new(ParseErrorKind::Malformed, no, idx + 1, "unbalanced `)`"));
            }
            _ => text.push(c),
        }
    }
    if depth > 0 {
        return Err(ParseError::new(ParseErrorKind::UnterminatedBlock, no, open_col, "unterminated comment"));
    }
    if in_str {
        return Err(ParseError::new(ParseErrorKind::Malformed, no, raw.len(), "unterminated string"));
    }
    Ok((text, comments))
}

#[derive(Debug, Clone, PartialEq)]
pub enum Tok {
    Word(String),
    Str(String),
    Comma,
    Eq,
}

impl Tok {
    pub fn word(&self) -> Option<&str> {
        match self {
            Tok::Word(w) => Some(w),
            _ => None,
        }
    }
}

/// Words, quoted strings (with `\"` and `\\` escapes), `,` and `=`.
pub fn tokenize(text: &str, no: usize) -> Result<Vec<Tok>, ParseError> {
    let mut toks = Vec::new();
    let mut chars = text.chars().peekable();
    let mut word = String::new();
    let flush = |word: &mut String, toks: &mut Vec<Tok>| {
        if !word.is_empty() {
            toks.push(Tok::Word(std::mem::take(word)));
        }
    };
    while let Some(c) = chars.next() {
        match c {
            '"' => {
                flush(&mut word, &mut toks);
                let mut s = String::new();
                let mut closed = false;
                while let Some(c) = chars.next() {
                    match c {
                        '\\' => match chars.next() {
                            Some(e) => s.push(e),
                            None => break,
                        },
                        '"' => {
                            closed = true;
                            break;
                        }
                        _ => s.push(c),
                    }
                }
                if !closed {
                    return Err(ParseError::new(ParseErrorKind::Malformed, no, 1, "unterminated string"));
                }
                toks.push(Tok::Str(s));
            }
            ',' => {
                flush(&mut word, &mut toks);
                toks.push(Tok::Comma);
            }
            '=' => {
                flush(&mut word, &mut toks);
                toks.push(Tok::Eq);
            }
            c if c.is_whitespace() => flush(&mut word, &mut toks),
            c => word.push(c),
        }
    }
    flush(&mut word, &mut toks);
    Ok(toks)
}

pub fn quote(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('"');
    for c in s.chars() {
        if c == '"' || c == '\\' {
            out.push('\\');
        }
        out.push(c);
    }
    out.push('"');
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn comments_are_extracted_outside_strings() {
        let (text, comments) = strip_comments(r#"DO x "a (b)" (note (nested)) tail"#, 1).unwrap();
        assert_eq!(text.trim(), r#"DO x "a (b)"  tail"#);
        assert_eq!(comments, vec!["note (nested)".to_string()]);
    }

    #[test]
    fn odd_indentation_is_rejected() {
        let err = preprocess("SCENE a\n   STEP b").unwrap_err();
        assert_eq!(err.kind, ParseErrorKind::DanglingIndentation);
        assert_eq!(err.line, 2);
    }

    #[test]
    fn tabs_count_as_one_level() {
        let p = preprocess("SCENE a\n\tSTEP b\n  \tDO x").unwrap();
        assert_eq!(p.lines.iter().map(|l| l.level).collect::<Vec<_>>(), vec![0, 1, 2]);
    }

    #[test]
    fn comment_only_lines_attach_backwards() {
        let p = preprocess("(head)\nTITLE \"t\"\n  (about title)\nWORLD").unwrap();
        assert_eq!(p.leading, vec!["head".to_string()]);
        assert_eq!(p.lines[0].comments, vec!["about title".to_string()]);
    }

    #[test]
    fn tokenizer_handles_escapes() {
        let t = tokenize(r#"a "say \"hi\"" b.c=true,"#, 1).unwrap();
        assert_eq!(
            t,
            vec![
                Tok::Word("a".into()),
                Tok::Str("say \"hi\"".into()),
                Tok::Word("b.c".into()),
                Tok::Eq,
                Tok::Word("true".into()),
                Tok::Comma
            ]
        );
        assert_eq!(tokenize(&quote("x\"y\\"), 1).unwrap(), vec![Tok::Str("x\"y\\".into())]);
    }
}
