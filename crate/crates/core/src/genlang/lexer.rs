use super::{ErrorKind, GenError};

#[derive(Clone, Debug, PartialEq)]
pub enum Tok {
    Name(String),
    Int(i64),
    Str(String),
    Op(&'static str),
    Newline,
    Indent,
    Dedent,
    Eof,
}

#[derive(Clone, Debug)]
pub struct Token {
    pub tok: Tok,
    pub line: usize,
}

// Longest first so that `//=` wins over `//` and `/`.
const OPS: &[&str] = &[
    "...", "//=", "**=", "->", "==", "!=", "<=", ">=", "+=", "-=", "*=", "%=", "//", "**", "(", ")", "[", "]", "{", "}",
    ",", ":", ".", "+", "-", "*", "/", "%", "<", ">", "=", ";", "&", "|", "^", "~", "@",
];

fn err(line: usize, msg: impl Into<String>) -> GenError {
    GenError::new(ErrorKind::Syntax, line, msg)
}

pub fn tokenize(src: &str) -> Result<Vec<Token>, GenError> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let mut indents = vec![0usize];
    let mut depth = 0usize; // bracket nesting
    let mut line = 1usize;
    let mut i = 0usize;
    let mut at_line_start = true;

    while i < chars.len() {
        if at_line_start && depth == 0 {
            // Measure indentation of a logical line; skip blank/comment lines.
            let mut width = 0;
            let mut j = i;
            while j < chars.len() && (chars[j] == ' ' || chars[j] == '\t' || chars[j] == '\x0c') {
                width = if chars[j] == '\t' { (width / 8 + 1) * 8 } else { width + 1 };
                j += 1;
            }
            if j >= chars.len() {
                break;
            }
            if chars[j] == '\n' || chars[j] == '\r' || chars[j] == '#' {
                while j < chars.len() && chars[j] != '\n' {
                    j += 1;
                }
                i = j + 1;
                line += 1;
                continue;
            }
            let top = *indents.last().unwrap();
            if width > top {
                indents.push(width);
                out.push(Token { tok: Tok::Indent, line });
            } else {
                while width < *indents.last().unwrap() {
                    indents.pop();
                    out.push(Token { tok: Tok::Dedent, line });
                }
                if width != *indents.last().unwrap() {
                    return Err(err(line, "unindent does not match any outer indentation level"));
                }
            }
            i = j;
            at_line_start = false;
            continue;
        }

        let c = chars[i];
        match c {
            '\n' => {
                if depth == 0 {
                    out.push(Token { tok: Tok::Newline, line });
                    at_line_start = true;
                }
                line += 1;
                i += 1;
            }
            ' ' | '\t' | '\r' | '\x0c' => i += 1,
            '#' => {
                while i < chars.len() && chars[i] != '\n' {
                    i += 1;
                }
            }
            '\\' if chars.get(i + 1) == Some(&'\n') => {
                i += 2;
                line += 1;
            }
            '"' | '\'' => {
                let (s, next, lines) = lex_string(&chars, i, line)?;
                out.push(Token { tok: Tok::Str(s), line });
                line += lines;
                i = next;
            }
            c if c.is_ascii_digit() => {
                let start = i;
                while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                    i += 1;
                }
                if i < chars.len() && chars[i] == '.' && chars.get(i + 1).is_some_and(|d| d.is_ascii_digit()) {
                    return Err(err(line, "float literals are not supported"));
                }
                let text: String = chars[start..i].iter().filter(|&&c| c != '_').collect();
                let value = if let Some(hex) = text.strip_prefix("0x").or_else(|| text.strip_prefix("0X")) {
                    i64::from_str_radix(hex, 16)
                } else if let Some(bin) = text.strip_prefix("0b").or_else(|| text.strip_prefix("0B")) {
                    i64::from_str_radix(bin, 2)
                } else {
                    text.parse::<i64>()
                }
                .map_err(|_| err(line, format!("invalid integer literal {text:?}")))?;
                out.push(Token { tok: Tok::Int(value), line });
            }
            c if c.is_alphabetic() || c == '_' => {
                let start = i;
                while i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '_') {
                    i += 1;
                }
                let word: String = chars[start..i].iter().collect();
                if i < chars.len() && (chars[i] == '"' || chars[i] == '\'') {
                    let lower = word.to_ascii_lowercase();
                    if lower == "r" {
                        let (s, next, lines) = lex_raw_string(&chars, i, line)?;
                        out.push(Token { tok: Tok::Str(s), line });
                        line += lines;
                        i = next;
                        continue;
                    }
                    return Err(err(line, format!("unsupported string prefix {word:?}")));
                }
                out.push(Token { tok: Tok::Name(word), line });
            }
            _ => {
                let rest: String = chars[i..chars.len().min(i + 3)].iter().collect();
                let op = OPS
                    .iter()
                    .find(|op| rest.starts_with(**op))
                    .ok_or_else(|| err(line, format!("unexpected character {c:?}")))?;
                match *op {
                    "(" | "[" | "{" => depth += 1,
                    ")" | "]" | "}" => {
                        if depth == 0 {
                            return Err(err(line, format!("unmatched {op:?}")));
                        }
                        depth -= 1;
                    }
                    _ => {}
                }
                out.push(Token { tok: Tok::Op(op), line });
                i += op.chars().count();
            }
        }
    }
    if depth != 0 {
        return Err(err(line, "unexpected end of input inside brackets"));
    }
    if !matches!(out.last(), None | Some(Token { tok: Tok::Newline, .. })) {
        out.push(Token { tok: Tok::Newline, line });
    }
    while indents.len() > 1 {
        indents.pop();
        out.push(Token { tok: Tok::Dedent, line });
    }
    out.push(Token { tok: Tok::Eof, line });
    Ok(out)
}

/// Lexes a quoted literal starting at `start`. Returns the value, the index
/// after the closing quote and the number of newlines consumed.
fn lex_string(chars: &[char], start: usize, line: usize) -> Result<(String, usize, usize), GenError> {
    let quote = chars[start];
    let triple = chars.get(start + 1) == Some(&quote) && chars.get(start + 2) == Some(&quote);
    let mut i = start + if triple { 3 } else { 1 };
    let mut out = String::new();
    let mut lines = 0;
    loop {
        let Some(&c) = chars.get(i) else {
            return Err(err(line, "unterminated string literal"));
        };
        if c == quote {
            if !triple {
                return Ok((out, i + 1, lines));
            }
            if chars.get(i + 1) == Some(&quote) && chars.get(i + 2) == Some(&quote) {
                return Ok((out, i + 3, lines));
            }
        }
        if c == '\n' {
            if !triple {
                return Err(err(line, "unterminated string literal"));
            }
            lines += 1;
        }
        if c == '\\' {
            let Some(&e) = chars.get(i + 1) else {
                return Err(err(line, "unterminated string literal"));
            };
            i += 2;
            match e {
                'n' => out.push('\n'),
                't' => out.push('\t'),
                'r' => out.push('\r'),
                '0' => out.push('\0'),
                '\\' => out.push('\\'),
                '\'' => out.push('\''),
                '"' => out.push('"'),
                '\n' => lines += 1,
                'x' => {
                    let hex: String = chars.get(i..i + 2).map(|s| s.iter().collect()).unwrap_or_default();
                    let v = u8::from_str_radix(&hex, 16).map_err(|_| err(line, "invalid \\x escape"))?;
                    out.push(v as char);
                    i += 2;
                }
                other => {
                    out.push('\\');
                    out.push(other);
                }
            }
            continue;
        }
        out.push(c);
        i += 1;
    }
}

fn lex_raw_string(chars: &[char], start: usize, line: usize) -> Result<(String, usize, usize), GenError> {
    let quote = chars[start];
    let mut i = start + 1;
    let mut out = String::new();
    loop {
        match chars.get(i) {
            None | Some('\n') => return Err(err(line, "unterminated string literal")),
            Some(&c) if c == quote => return Ok((out, i + 1, 0)),
            Some(&c) => out.push(c),
        }
        i += 1;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(src: &str) -> Vec<Tok> {
        tokenize(src).unwrap().into_iter().map(|t| t.tok).collect()
    }

    #[test]
    fn indentation_blocks() {
        let t = toks("if x:\n    y = 1\nz\n");
        assert_eq!(
            t,
            vec![
                Tok::Name("if".into()),
                Tok::Name("x".into()),
                Tok::Op(":"),
                Tok::Newline,
                Tok::Indent,
                Tok::Name("y".into()),
                Tok::Op("="),
                Tok::Int(1),
                Tok::Newline,
                Tok::Dedent,
                Tok::Name("z".into()),
                Tok::Newline,
                Tok::Eof,
            ]
        );
    }

    #[test]
    fn strings_and_escapes() {
        assert_eq!(toks("'a\\n'")[0], Tok::Str("a\n".into()));
        assert_eq!(toks("\"\"\"doc\nmore\"\"\"")[0], Tok::Str("doc\nmore".into()));
        assert_eq!(toks("r'\\d'")[0], Tok::Str("\\d".into()));
        assert!(tokenize("'open").is_err());
        assert!(tokenize("f'{x}'").is_err());
    }

    #[test]
    fn brackets_join_lines() {
        let t = toks("f(1,\n  2)\n");
        assert!(!t[..t.len() - 2].contains(&Tok::Newline));
        assert!(tokenize("f(1\n").is_err());
    }

    #[test]
    fn bad_dedent() {
        let e = tokenize("if x:\n        a\n    b\n").unwrap_err();
        assert_eq!(e.kind, ErrorKind::Syntax);
        assert_eq!(e.line, 3);
    }

    #[test]
    fn comments_and_blank_lines() {
        let t = toks("# c\n\nx = 1  # trailing\n");
        assert_eq!(t[0], Tok::Name("x".into()));
    }
}
