use crate::diagnostic::{Code, Diagnostic};
use crate::model::Loc;

#[derive(Clone, Debug, PartialEq)]
pub(crate) enum Tok {
    Ident(String),
    Str(String),
    /// Decimal literal kept verbatim; the parser decides how to read it.
    Number(String),
    LBrace,
    RBrace,
    LParen,
    RParen,
    LBracket,
    RBracket,
    Comma,
    Colon,
    Star,
    Percent,
    Arrow,
    Eof,
}

impl Tok {
    pub(crate) fn describe(&self) -> String {
        match self {
            Tok::Ident(s) => format!("`{s}`"),
            Tok::Str(_) => "string literal".into(),
            Tok::Number(n) => format!("number `{n}`"),
            Tok::LBrace => "`{`".into(),
            Tok::RBrace => "`}`".into(),
            Tok::LParen => "`(`".into(),
            Tok::RParen => "`)`".into(),
            Tok::LBracket => "`[`".into(),
            Tok::RBracket => "`]`".into(),
            Tok::Comma => "`,`".into(),
            Tok::Colon => "`:`".into(),
            Tok::Star => "`*`".into(),
            Tok::Percent => "`%`".into(),
            Tok::Arrow => "`->`".into(),
            Tok::Eof => "end of input".into(),
        }
    }
}

#[derive(Clone, Debug)]
pub(crate) struct Token {
    pub tok: Tok,
    pub loc: Loc,
}

struct Cursor<'a> {
    chars: std::iter::Peekable<std::str::Chars<'a>>,
    line: u32,
    column: u32,
}

impl Cursor<'_> {
    fn peek(&mut self) -> Option<char> {
        self.chars.peek().copied()
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.chars.next()?;
        if c == '\n' {
            self.line += 1;
            self.column = 1;
        } else {
            self.column += 1;
        }
        Some(c)
    }

    fn loc(&self) -> Loc {
        Loc::new(self.line, self.column)
    }
}

pub(crate) fn tokenize(src: &str) -> Result<Vec<Token>, Diagnostic> {
    let mut cur = Cursor {
        chars: src.chars().peekable(),
        line: 1,
        column: 1,
    };
    let mut out = Vec::new();
    loop {
        while let Some(c) = cur.peek() {
            if c == '#' {
                while cur.peek().is_some_and(|c| c != '\n') {
                    cur.bump();
                }
            } else if c.is_whitespace() {
                cur.bump();
            } else {
                break;
            }
        }
        let loc = cur.loc();
        let Some(c) = cur.bump() else {
            out.push(Token { tok: Tok::Eof, loc });
            return Ok(out);
        };
        let tok = match c {
            '{' => Tok::LBrace,
            '}' => Tok::RBrace,
            '(' => Tok::LParen,
            ')' => Tok::RParen,
            '[' => Tok::LBracket,
            ']' => Tok::RBracket,
            ',' => Tok::Comma,
            ':' => Tok::Colon,
            '*' => Tok::Star,
            '%' => Tok::Percent,
            '"' => Tok::Str(lex_string(&mut cur, loc)?),
            '-' if cur.peek() == Some('>') => {
                cur.bump();
                Tok::Arrow
            }
            '-' if cur.peek().is_some_and(|c| c.is_ascii_digit()) => {
                let mut s = String::from("-");
                lex_number(&mut cur, &mut s);
                Tok::Number(s)
            }
            c if c.is_ascii_digit() => {
                let mut s = String::from(c);
                lex_number(&mut cur, &mut s);
                Tok::Number(s)
            }
            c if c.is_ascii_alphabetic() || c == '_' => {
                let mut s = String::from(c);
                while let Some(c) = cur.peek().filter(|c| c.is_ascii_alphanumeric() || *c == '_') {
                    s.push(c);
                    cur.bump();
                }
                Tok::Ident(s)
            }
            other => {
                return Err(Diagnostic::error(
                    Code::Syntax,
                    loc,
                    format!("unexpected character {other:?}"),
                ))
            }
        };
        out.push(Token { tok, loc });
    }
}

fn lex_number(cur: &mut Cursor<'_>, s: &mut String) {
    while let Some(c) = cur.peek().filter(char::is_ascii_digit) {
        s.push(c);
        cur.bump();
    }
    // A fraction needs at least one digit after the dot.
    let mut look = cur.chars.clone();
    if look.next() == Some('.') && look.next().is_some_and(|c| c.is_ascii_digit()) {
        s.push('.');
        cur.bump();
        while let Some(c) = cur.peek().filter(char::is_ascii_digit) {
            s.push(c);
            cur.bump();
        }
    }
}

fn lex_string(cur: &mut Cursor<'_>, start: Loc) -> Result<String, Diagnostic> {
    let mut s = String::new();
    loop {
        let loc = cur.loc();
        match cur.bump() {
            None => {
                return Err(Diagnostic::error(
                    Code::Eof,
                    start,
                    "unterminated string literal",
                ))
            }
            Some('"') => return Ok(s),
            Some('\n') => {
                return Err(Diagnostic::error(
                    Code::Syntax,
                    start,
                    "string literal is not closed on its line",
                ))
            }
            Some('\\') => match cur.bump() {
                Some('"') => s.push('"'),
                Some('\\') => s.push('\\'),
                Some('n') => s.push('\n'),
                Some('t') => s.push('\t'),
                None => {
                    return Err(Diagnostic::error(
                        Code::Eof,
                        start,
                        "unterminated string literal",
                    ))
                }
                Some(other) => {
                    return Err(Diagnostic::error(
                        Code::Syntax,
                        loc,
                        format!("unknown escape `\\{other}`"),
                    ))
                }
            },
            Some(c) => s.push(c),
        }
    }
}
