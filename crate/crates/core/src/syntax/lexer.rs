//! Tokeniser shared by every surface grammar.

use super::diag::{Diagnostic, Span};

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Tok {
    /// Identifier, possibly carrying a `#n` tag.
    Ident(String),
    Zero,
    LParen,
    RParen,
    LBracket,
    RBracket,
    /// `[]`, the LTL box (also accepted as an empty bracket pair).
    Box,
    LBrace,
    RBrace,
    Comma,
    Semi,
    Dot,
    Plus,
    Bar,
    Eq,
    Bang,
    Question,
    Caret,
    And,
    Or,
    Imp,
    CImp,
    Diamond,
    Eof,
}

impl Tok {
    pub fn describe(&self) -> String {
        match self {
            Tok::Ident(s) => format!("`{s}`"),
            Tok::Eof => "end of input".into(),
            t => format!("`{}`", t.text()),
        }
    }

    pub fn text(&self) -> &str {
        match self {
            Tok::Ident(s) => s,
            Tok::Zero => "0",
            Tok::LParen => "(",
            Tok::RParen => ")",
            Tok::LBracket => "[",
            Tok::RBracket => "]",
            Tok::Box => "[]",
            Tok::LBrace => "{",
            Tok::RBrace => "}",
            Tok::Comma => ",",
            Tok::Semi => ";",
            Tok::Dot => ".",
            Tok::Plus => "+",
            Tok::Bar => "|",
            Tok::Eq => "=",
            Tok::Bang => "!",
            Tok::Question => "?",
            Tok::Caret => "^",
            Tok::And => "/\\",
            Tok::Or => "\\/",
            Tok::Imp => "->",
            Tok::CImp => "-->>",
            Tok::Diamond => "<>",
            Tok::Eof => "",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Token {
    pub tok: Tok,
    pub span: Span,
    /// No whitespace separates this token from the previous one.
    pub joined: bool,
}

fn ident_start(c: char) -> bool {
    c.is_ascii_alphabetic() || c == '_'
}

fn ident_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || c == '_' || c == '\''
}

pub fn lex(src: &str) -> Result<Vec<Token>, Diagnostic> {
    let chars: Vec<(usize, char)> = src.char_indices().collect();
    let mut out = Vec::new();
    let (mut line, mut col) = (1usize, 1usize);
    let mut i = 0;
    let mut joined = false;
    let at = |k: usize| chars.get(k).map(|&(_, c)| c);
    while i < chars.len() {
        let (off, c) = chars[i];
        if c == '\n' {
            line += 1;
            col = 1;
            i += 1;
            joined = false;
            continue;
        }
        if c.is_whitespace() {
            col += 1;
            i += 1;
            joined = false;
            continue;
        }
        if c == '/' && at(i + 1) == Some('/') {
            while i < chars.len() && chars[i].1 != '\n' {
                i += 1;
            }
            joined = false;
            continue;
        }
        let start = i;
        let tok = if ident_start(c) {
            let mut j = i + 1;
            loop {
                match at(j) {
                    Some(d) if ident_char(d) => j += 1,
                    // `pay/B`: a slash continues an identifier only before a letter or digit
                    Some('/') if at(j + 1).is_some_and(|d| d.is_ascii_alphanumeric()) => j += 2,
                    _ => break,
                }
            }
            if at(j) == Some('#') && at(j + 1).is_some_and(|d| d.is_ascii_digit()) {
                j += 1;
                while at(j).is_some_and(|d| d.is_ascii_digit()) {
                    j += 1;
                }
            }
            let text: String = chars[i..j].iter().map(|&(_, c)| c).collect();
            i = j;
            Tok::Ident(text)
        } else {
            let two: String = chars[i..(i + 2).min(chars.len())].iter().map(|&(_, c)| c).collect();
            let four: String = chars[i..(i + 4).min(chars.len())].iter().map(|&(_, c)| c).collect();
            let (t, n) = if four == "-->>" {
                (Tok::CImp, 4)
            } else {
                match two.as_str() {
                    "->" => (Tok::Imp, 2),
                    "/\\" => (Tok::And, 2),
                    "\\/" => (Tok::Or, 2),
                    "<>" => (Tok::Diamond, 2),
                    "[]" => (Tok::Box, 2),
                    _ => {
                        let t = match c {
                            '0' => Tok::Zero,
                            '(' => Tok::LParen,
                            ')' => Tok::RParen,
                            '[' => Tok::LBracket,
                            ']' => Tok::RBracket,
                            '{' => Tok::LBrace,
                            '}' => Tok::RBrace,
                            ',' => Tok::Comma,
                            ';' => Tok::Semi,
                            '.' => Tok::Dot,
                            '+' => Tok::Plus,
                            '|' => Tok::Bar,
                            '=' => Tok::Eq,
                            '!' => Tok::Bang,
                            '?' => Tok::Question,
                            '^' => Tok::Caret,
                            _ => {
                                return Err(Diagnostic::error(
                                    Span::new(line, col, off, c.len_utf8()),
                                    format!("unexpected character `{c}`"),
                                ))
                            }
                        };
                        (t, 1)
                    }
                }
            };
            i += n;
            t
        };
        let end = chars.get(i).map_or(src.len(), |&(o, _)| o);
        out.push(Token {
            tok,
            span: Span::new(line, col, off, end - off),
            joined,
        });
        col += i - start;
        joined = true;
    }
    out.push(Token {
        tok: Tok::Eof,
        span: Span::new(line, col, src.len(), 0),
        joined: false,
    });
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(s: &str) -> Vec<Tok> {
        lex(s).unwrap().into_iter().map(|t| t.tok).collect()
    }

    #[test]
    fn operators() {
        assert_eq!(
            toks("a -->> b -> c /\\ d \\/ <>[]e"),
            vec![
                Tok::Ident("a".into()),
                Tok::CImp,
                Tok::Ident("b".into()),
                Tok::Imp,
                Tok::Ident("c".into()),
                Tok::And,
                Tok::Ident("d".into()),
                Tok::Or,
                Tok::Diamond,
                Tok::Box,
                Tok::Ident("e".into()),
                Tok::Eof
            ]
        );
    }

    #[test]
    fn mangled_names_and_tags() {
        assert_eq!(
            toks("OUT_pay/B x#2 a/\\b"),
            vec![
                Tok::Ident("OUT_pay/B".into()),
                Tok::Ident("x#2".into()),
                Tok::Ident("a".into()),
                Tok::And,
                Tok::Ident("b".into()),
                Tok::Eof
            ]
        );
    }

    #[test]
    fn spans_and_joins() {
        let ts = lex("pay!\n  // note\n x").unwrap();
        assert!(ts[1].joined);
        assert_eq!((ts[2].span.line, ts[2].span.col), (3, 2));
    }

    #[test]
    fn bad_character() {
        let e = lex("a @").unwrap_err();
        assert_eq!((e.span.line, e.span.col), (1, 3));
    }
}
