use super::{ParseDiagnostic, Pos};

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum Tok {
    /// Identifiers and keywords alike; the parser decides.
    Word(String),
    Number(f64),
    /// A number with an `s` suffix, in seconds.
    Duration(f64),
    Str(String),
    Colon,
    Semi,
    Comma,
    Arrow,
    LBrace,
    RBrace,
    LParen,
    RParen,
    Bang,
    Amp,
    Pipe,
    Lt,
    Le,
    Gt,
    Ge,
    Minus,
    Eof,
}

impl Tok {
    pub(crate) fn describe(&self) -> String {
        match self {
            Tok::Word(w) => format!("`{w}`"),
            Tok::Number(n) => format!("number {n}"),
            Tok::Duration(d) => format!("duration {d}s"),
            Tok::Str(_) => "string".into(),
            Tok::Colon => "`:`".into(),
            Tok::Semi => "`;`".into(),
            Tok::Comma => "`,`".into(),
            Tok::Arrow => "`->`".into(),
            Tok::LBrace => "`{`".into(),
            Tok::RBrace => "`}`".into(),
            Tok::LParen => "`(`".into(),
            Tok::RParen => "`)`".into(),
            Tok::Bang => "`!`".into(),
            Tok::Amp => "`&`".into(),
            Tok::Pipe => "`|`".into(),
            Tok::Lt => "`<`".into(),
            Tok::Le => "`<=`".into(),
            Tok::Gt => "`>`".into(),
            Tok::Ge => "`>=`".into(),
            Tok::Minus => "`-`".into(),
            Tok::Eof => "end of input".into(),
        }
    }
}

#[derive(Debug, Clone)]
pub(crate) struct Token {
    pub tok: Tok,
    pub pos: Pos,
}

struct Cursor<'a> {
    chars: std::iter::Peekable<std::str::Chars<'a>>,
    line: usize,
    column: usize,
}

impl Cursor<'_> {
    fn peek(&mut self) -> Option<char> {
        self.chars.peek().copied()
    }

    fn peek2(&self) -> Option<char> {
        let mut it = self.chars.clone();
        it.next();
        it.next()
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

    fn pos(&self) -> Pos {
        Pos { line: self.line, column: self.column }
    }
}

fn is_word_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || c == '_'
}

pub(crate) fn tokenize(src: &str, diags: &mut Vec<ParseDiagnostic>) -> Vec<Token> {
    let mut cur = Cursor { chars: src.chars().peekable(), line: 1, column: 1 };
    let mut out = Vec::new();

    while let Some(c) = cur.peek() {
        let pos = cur.pos();
        if c.is_whitespace() {
            cur.bump();
            continue;
        }
        if c == '#' {
            while let Some(c) = cur.peek() {
                if c == '\n' {
                    break;
                }
                cur.bump();
            }
            continue;
        }
        if c.is_ascii_alphabetic() || c == '_' {
            let mut w = String::new();
            while let Some(c) = cur.peek().filter(|c| is_word_char(*c)) {
                w.push(c);
                cur.bump();
            }
            out.push(Token { tok: Tok::Word(w), pos });
            continue;
        }
        if c.is_ascii_digit() {
            out.extend(lex_number(&mut cur, pos, diags));
            continue;
        }
        if c == '"' {
            cur.bump();
            let mut s = String::new();
            let mut closed = false;
            while let Some(c) = cur.peek() {
                if c == '\n' {
                    break;
                }
                cur.bump();
                if c == '"' {
                    closed = true;
                    break;
                }
                s.push(c);
            }
            if closed {
                out.push(Token { tok: Tok::Str(s), pos });
            } else {
                diags.push(ParseDiagnostic::error(
                    pos,
                    "unterminated-string",
                    "string literal is not closed on this line",
                ));
            }
            continue;
        }

        cur.bump();
        let tok = match c {
            ':' => Tok::Colon,
            ';' => Tok::Semi,
            ',' => Tok::Comma,
            '{' => Tok::LBrace,
            '}' => Tok::RBrace,
            '(' => Tok::LParen,
            ')' => Tok::RParen,
            '!' => Tok::Bang,
            '&' => Tok::Amp,
            '|' => Tok::Pipe,
            '-' if cur.peek() == Some('>') => {
                cur.bump();
                Tok::Arrow
            }
            '-' => Tok::Minus,
            '<' if cur.peek() == Some('=') => {
                cur.bump();
                Tok::Le
            }
            '<' => Tok::Lt,
            '>' if cur.peek() == Some('=') => {
                cur.bump();
                Tok::Ge
            }
            '>' => Tok::Gt,
            other => {
                diags.push(ParseDiagnostic::error(
                    pos,
                    "unexpected-character",
                    format!("unexpected character {other:?}"),
                ));
                continue;
            }
        };
        out.push(Token { tok, pos });
    }

    out.push(Token { tok: Tok::Eof, pos: cur.pos() });
    out
}

fn lex_number(cur: &mut Cursor<'_>, pos: Pos, diags: &mut Vec<ParseDiagnostic>) -> Option<Token> {
    let mut text = String::new();
    let digits = |cur: &mut Cursor<'_>, text: &mut String| {
        while let Some(c) = cur.peek().filter(char::is_ascii_digit) {
            text.push(c);
            cur.bump();
        }
    };
    digits(cur, &mut text);
    if cur.peek() == Some('.') && cur.peek2().is_some_and(|c| c.is_ascii_digit()) {
        text.push('.');
        cur.bump();
        digits(cur, &mut text);
    }
    if matches!(cur.peek(), Some('e' | 'E')) {
        let after = cur.peek2();
        let signed = matches!(after, Some('+' | '-'));
        let mut probe = cur.chars.clone();
        probe.next();
        if signed {
            probe.next();
        }
        if probe.next().is_some_and(|c| c.is_ascii_digit()) {
            text.push('e');
            cur.bump();
            if signed {
                text.push(cur.bump().unwrap());
            }
            digits(cur, &mut text);
        }
    }

    let is_duration = cur.peek() == Some('s') && !cur.peek2().is_some_and(is_word_char);
    if is_duration {
        cur.bump();
    } else if cur.peek().is_some_and(is_word_char) {
        while cur.peek().is_some_and(is_word_char) {
            cur.bump();
        }
        diags.push(ParseDiagnostic::error(pos, "invalid-number", "malformed number literal"));
        return None;
    }

    match text.parse::<f64>() {
        Ok(v) if v.is_finite() => Some(Token { tok: if is_duration { Tok::Duration(v) } else { Tok::Number(v) }, pos }),
        _ => {
            diags.push(ParseDiagnostic::error(pos, "invalid-number", "number literal is out of range"));
            None
        }
    }
}
