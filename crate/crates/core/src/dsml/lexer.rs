use std::fmt;

use crate::diag::{Diagnostic, Location};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Comparator {
    Lt,
    Le,
    Gt,
    Ge,
    Eq,
    Ne,
}

impl Comparator {
    pub fn symbol(self) -> &'static str {
        match self {
            Comparator::Lt => "<",
            Comparator::Le => "<=",
            Comparator::Gt => ">",
            Comparator::Ge => ">=",
            Comparator::Eq => "==",
            Comparator::Ne => "!=",
        }
    }

    pub fn from_symbol(s: &str) -> Option<Self> {
        Some(match s {
            "<" => Comparator::Lt,
            "<=" => Comparator::Le,
            ">" => Comparator::Gt,
            ">=" => Comparator::Ge,
            "==" => Comparator::Eq,
            "!=" => Comparator::Ne,
            _ => return None,
        })
    }

    pub fn holds(self, value: f64, bound: f64) -> bool {
        match self {
            Comparator::Lt => value < bound,
            Comparator::Le => value <= bound,
            Comparator::Gt => value > bound,
            Comparator::Ge => value >= bound,
            Comparator::Eq => value == bound,
            Comparator::Ne => value != bound,
        }
    }
}

impl fmt::Display for Comparator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.symbol())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Unit {
    Seconds,
    Minutes,
    Hours,
    Events,
}

impl Unit {
    pub fn from_suffix(s: &str) -> Option<Self> {
        Some(match s {
            "s" => Unit::Seconds,
            "m" => Unit::Minutes,
            "h" => Unit::Hours,
            "ev" => Unit::Events,
            _ => return None,
        })
    }

    pub fn suffix(self) -> &'static str {
        match self {
            Unit::Seconds => "s",
            Unit::Minutes => "m",
            Unit::Hours => "h",
            Unit::Events => "ev",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Tok {
    Ident(String),
    Str(String),
    Num(f64),
    Quantity(f64, Unit),
    Cmp(Comparator),
    LBrace,
    RBrace,
    LParen,
    RParen,
    Colon,
    Semi,
    Comma,
    Eof,
}

impl Tok {
    pub fn describe(&self) -> String {
        match self {
            Tok::Ident(s) => format!("identifier `{s}`"),
            Tok::Str(_) => "string".to_string(),
            Tok::Num(n) => format!("number `{n}`"),
            Tok::Quantity(n, u) => format!("quantity `{n}{}`", u.suffix()),
            Tok::Cmp(c) => format!("`{c}`"),
            Tok::LBrace => "`{`".to_string(),
            Tok::RBrace => "`}`".to_string(),
            Tok::LParen => "`(`".to_string(),
            Tok::RParen => "`)`".to_string(),
            Tok::Colon => "`:`".to_string(),
            Tok::Semi => "`;`".to_string(),
            Tok::Comma => "`,`".to_string(),
            Tok::Eof => "end of file".to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Token {
    pub tok: Tok,
    pub loc: Location,
}

struct Cursor<'a> {
    chars: std::iter::Peekable<std::str::CharIndices<'a>>,
    src: &'a str,
    line: u32,
    column: u32,
}

impl<'a> Cursor<'a> {
    fn peek(&mut self) -> Option<char> {
        self.chars.peek().map(|&(_, c)| c)
    }

    fn peek_second(&self) -> Option<char> {
        let mut it = self.chars.clone();
        it.next();
        it.next().map(|(_, c)| c)
    }

    fn offset(&mut self) -> usize {
        self.chars.peek().map_or(self.src.len(), |&(i, _)| i)
    }

    fn bump(&mut self) -> Option<char> {
        let (_, c) = self.chars.next()?;
        if c == '\n' {
            self.line += 1;
            self.column = 1;
        } else {
            self.column += 1;
        }
        Some(c)
    }

    fn loc(&self) -> Location {
        Location::new(self.line, self.column)
    }
}

fn is_ident_start(c: char) -> bool {
    c.is_ascii_alphabetic() || c == '_'
}

fn is_ident_continue(c: char) -> bool {
    c.is_ascii_alphanumeric() || c == '_' || c == '.'
}

/// Tokenizes a model file. Stops at the first lexical error.
pub fn tokenize(src: &str) -> Result<Vec<Token>, Diagnostic> {
    let mut cur = Cursor {
        chars: src.char_indices().peekable(),
        src,
        line: 1,
        column: 1,
    };
    let mut out = Vec::new();

    while let Some(c) = cur.peek() {
        let loc = cur.loc();
        match c {
            c if c.is_whitespace() => {
                cur.bump();
            }
            '/' if cur.peek_second() == Some('/') => {
                while let Some(c) = cur.peek() {
                    if c == '\n' {
                        break;
                    }
                    cur.bump();
                }
            }
            '{' | '}' | '(' | ')' | ':' | ';' | ',' => {
                cur.bump();
                let tok = match c {
                    '{' => Tok::LBrace,
                    '}' => Tok::RBrace,
                    '(' => Tok::LParen,
                    ')' => Tok::RParen,
                    ':' => Tok::Colon,
                    ';' => Tok::Semi,
                    _ => Tok::Comma,
                };
                out.push(Token { tok, loc });
            }
            '<' | '>' | '=' | '!' => {
                cur.bump();
                let mut sym = c.to_string();
                if cur.peek() == Some('=') {
                    cur.bump();
                    sym.push('=');
                }
                let cmp = Comparator::from_symbol(&sym).ok_or_else(|| {
                    Diagnostic::error("syntax", format!("unexpected character `{sym}`"), loc)
                })?;
                out.push(Token {
                    tok: Tok::Cmp(cmp),
                    loc,
                });
            }
            '"' => {
                cur.bump();
                let mut s = String::new();
                loop {
                    match cur.bump() {
                        None | Some('\n') => {
                            return Err(Diagnostic::error("syntax", "unterminated string", loc))
                        }
                        Some('"') => break,
                        Some('\\') => {
                            let esc_loc = cur.loc();
                            match cur.bump() {
                                Some('"') => s.push('"'),
                                Some('\\') => s.push('\\'),
                                Some('n') => s.push('\n'),
                                Some('t') => s.push('\t'),
                                _ => {
                                    return Err(Diagnostic::error(
                                        "syntax",
                                        "invalid escape sequence",
                                        esc_loc,
                                    ))
                                }
                            }
                        }
                        Some(c) => s.push(c),
                    }
                }
                out.push(Token {
                    tok: Tok::Str(s),
                    loc,
                });
            }
            c if c.is_ascii_digit()
                || (c == '-' && cur.peek_second().is_some_and(|d| d.is_ascii_digit())) =>
            {
                out.push(Token {
                    tok: lex_number(&mut cur, loc)?,
                    loc,
                });
            }
            c if is_ident_start(c) => {
                let start = cur.offset();
                while cur.peek().is_some_and(is_ident_continue) {
                    cur.bump();
                }
                let end = cur.offset();
                out.push(Token {
                    tok: Tok::Ident(src[start..end].to_string()),
                    loc,
                });
            }
            other => {
                return Err(Diagnostic::error(
                    "syntax",
                    format!("unexpected character `{other}`"),
                    loc,
                ))
            }
        }
    }
    out.push(Token {
        tok: Tok::Eof,
        loc: cur.loc(),
    });
    Ok(out)
}

fn lex_number(cur: &mut Cursor<'_>, loc: Location) -> Result<Tok, Diagnostic> {
    let start = cur.offset();
    if cur.peek() == Some('-') {
        cur.bump();
    }
    while cur.peek().is_some_and(|c| c.is_ascii_digit()) {
        cur.bump();
    }
    if cur.peek() == Some('.') && cur.peek_second().is_some_and(|c| c.is_ascii_digit()) {
        cur.bump();
        while cur.peek().is_some_and(|c| c.is_ascii_digit()) {
            cur.bump();
        }
    }
    if matches!(cur.peek(), Some('e' | 'E')) {
        let mut look = cur.chars.clone();
        look.next();
        let next = look.next().map(|(_, c)| c);
        let after = look.next().map(|(_, c)| c);
        let is_exp = match next {
            Some(d) if d.is_ascii_digit() => true,
            Some('+' | '-') => after.is_some_and(|d| d.is_ascii_digit()),
            _ => false,
        };
        if is_exp {
            cur.bump();
            if matches!(cur.peek(), Some('+' | '-')) {
                cur.bump();
            }
            while cur.peek().is_some_and(|c| c.is_ascii_digit()) {
                cur.bump();
            }
        }
    }
    let end = cur.offset();
    let text = &cur.src[start..end];
    let value: f64 = text
        .parse()
        .map_err(|_| Diagnostic::error("syntax", format!("invalid number `{text}`"), loc))?;

    if cur.peek().is_some_and(is_ident_start) {
        let sstart = cur.offset();
        while cur.peek().is_some_and(|c| c.is_ascii_alphabetic()) {
            cur.bump();
        }
        let send = cur.offset();
        let suffix = &cur.src[sstart..send];
        return match Unit::from_suffix(suffix) {
            Some(unit) if !cur.peek().is_some_and(is_ident_continue) => {
                Ok(Tok::Quantity(value, unit))
            }
            _ => Err(Diagnostic::error(
                "syntax",
                format!("invalid unit suffix `{suffix}` (expected s, m, h or ev)"),
                loc,
            )),
        };
    }
    Ok(Tok::Num(value))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(src: &str) -> Vec<Tok> {
        tokenize(src).unwrap().into_iter().map(|t| t.tok).collect()
    }

    #[test]
    fn numbers_units_and_exponents() {
        assert_eq!(
            toks("2000ev 1.5e3 60 s -0.25 1m"),
            vec![
                Tok::Quantity(2000.0, Unit::Events),
                Tok::Num(1500.0),
                Tok::Num(60.0),
                Tok::Ident("s".into()),
                Tok::Num(-0.25),
                Tok::Quantity(1.0, Unit::Minutes),
                Tok::Eof,
            ]
        );
        assert!(tokenize("5e").is_err());
    }

    #[test]
    fn comparators_and_comments() {
        assert_eq!(
            toks("threshold: <= 0.1; // trailing\n!= >"),
            vec![
                Tok::Ident("threshold".into()),
                Tok::Colon,
                Tok::Cmp(Comparator::Le),
                Tok::Num(0.1),
                Tok::Semi,
                Tok::Cmp(Comparator::Ne),
                Tok::Cmp(Comparator::Gt),
                Tok::Eof
            ]
        );
    }

    #[test]
    fn locations_are_one_based() {
        let t = tokenize("model\n  hcr").unwrap();
        assert_eq!(t[0].loc, Location::new(1, 1));
        assert_eq!(t[1].loc, Location::new(2, 3));
    }

    #[test]
    fn string_escapes_and_errors() {
        assert_eq!(toks(r#""a\"b""#)[0], Tok::Str("a\"b".into()));
        let err = tokenize("x \"open\n").unwrap_err();
        assert_eq!(err.location, Location::new(1, 3));
        let err = tokenize("a = b").unwrap_err();
        assert_eq!(err.code, "syntax");
        assert!(tokenize("10kg").is_err());
    }
}
