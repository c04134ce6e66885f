//! Kind-agnostic parse tree for the block syntax shared by every `.hcm` file
//! (the five model kinds and the simulator's `scenario` files).

use std::fmt::{self, Write as _};

use super::lexer::{tokenize, Comparator, Tok, Token, Unit};
use crate::diag::{Diagnostic, Location};

#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Str(String),
    Num(f64),
    Ident(String),
    Cmp(Comparator, f64),
    Quantity(f64, Unit),
    Call(String, Vec<Value>),
}

impl Value {
    pub fn describe(&self) -> &'static str {
        match self {
            Value::Str(_) => "string",
            Value::Num(_) => "number",
            Value::Ident(_) => "identifier",
            Value::Cmp(..) => "comparison",
            Value::Quantity(..) => "quantity",
            Value::Call(..) => "call",
        }
    }
}

pub(crate) fn write_string_literal(out: &mut String, s: &str) {
    out.push('"');
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\t' => out.push_str("\\t"),
            c => out.push(c),
        }
    }
    out.push('"');
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Str(s) => {
                let mut out = String::new();
                write_string_literal(&mut out, s);
                f.write_str(&out)
            }
            Value::Num(n) => write!(f, "{n}"),
            Value::Ident(s) => f.write_str(s),
            Value::Cmp(c, n) => write!(f, "{c} {n}"),
            Value::Quantity(n, u) => write!(f, "{n}{}", u.suffix()),
            Value::Call(name, args) => {
                write!(f, "{name}(")?;
                for (i, a) in args.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{a}")?;
                }
                f.write_str(")")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Property {
    pub key: String,
    pub values: Vec<Value>,
    pub loc: Location,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Decl {
    pub keyword: String,
    pub id: String,
    pub entries: Vec<Entry>,
    pub loc: Location,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Entry {
    Decl(Decl),
    Property(Property),
}

impl Decl {
    pub fn properties(&self) -> impl Iterator<Item = &Property> {
        self.entries.iter().filter_map(|e| match e {
            Entry::Property(p) => Some(p),
            Entry::Decl(_) => None,
        })
    }

    pub fn children(&self) -> impl Iterator<Item = &Decl> {
        self.entries.iter().filter_map(|e| match e {
            Entry::Decl(d) => Some(d),
            Entry::Property(_) => None,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Document {
    pub kind: String,
    pub kind_loc: Location,
    pub name: String,
    pub decls: Vec<Decl>,
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> &Token {
        &self.tokens[self.pos]
    }

    fn peek_at(&self, n: usize) -> &Tok {
        let idx = (self.pos + n).min(self.tokens.len() - 1);
        &self.tokens[idx].tok
    }

    fn next(&mut self) -> Token {
        let t = self.tokens[self.pos].clone();
        if self.pos < self.tokens.len() - 1 {
            self.pos += 1;
        }
        t
    }

    fn unexpected(&self, expected: &str) -> Diagnostic {
        let t = self.peek();
        Diagnostic::error(
            "syntax",
            format!("expected {expected}, found {}", t.tok.describe()),
            t.loc,
        )
    }

    fn expect(&mut self, tok: Tok, expected: &str) -> Result<Location, Diagnostic> {
        if self.peek().tok == tok {
            Ok(self.next().loc)
        } else {
            Err(self.unexpected(expected))
        }
    }

    fn ident(&mut self, expected: &str) -> Result<(String, Location), Diagnostic> {
        match &self.peek().tok {
            Tok::Ident(s) => {
                let s = s.clone();
                let loc = self.next().loc;
                Ok((s, loc))
            }
            _ => Err(self.unexpected(expected)),
        }
    }

    fn document(&mut self) -> Result<Document, Diagnostic> {
        match &self.peek().tok {
            Tok::Ident(s) if s == "model" => {
                self.next();
            }
            _ => return Err(self.unexpected("`model` header")),
        }
        let (kind, kind_loc) = self.ident("model kind")?;
        let (name, _) = self.ident("model name")?;
        self.expect(Tok::Semi, "`;` after model header")?;
        let mut decls = Vec::new();
        while self.peek().tok != Tok::Eof {
            decls.push(self.decl()?);
        }
        Ok(Document {
            kind,
            kind_loc,
            name,
            decls,
        })
    }

    fn decl(&mut self) -> Result<Decl, Diagnostic> {
        let (keyword, loc) = self.ident("declaration keyword")?;
        let (id, _) = self.ident(&format!("identifier after `{keyword}`"))?;
        let mut entries = Vec::new();
        match self.peek().tok {
            Tok::Semi => {
                self.next();
            }
            Tok::LBrace => {
                self.next();
                loop {
                    match self.peek_at(0) {
                        Tok::RBrace => {
                            self.next();
                            break;
                        }
                        Tok::Ident(_) => match self.peek_at(1) {
                            Tok::Colon => entries.push(Entry::Property(self.property()?)),
                            Tok::Ident(_) => entries.push(Entry::Decl(self.decl()?)),
                            _ => {
                                self.next();
                                return Err(self.unexpected("`:` or identifier"));
                            }
                        },
                        _ => return Err(self.unexpected("property, declaration or `}`")),
                    }
                }
            }
            _ => return Err(self.unexpected("`{` or `;`")),
        }
        Ok(Decl {
            keyword,
            id,
            entries,
            loc,
        })
    }

    fn property(&mut self) -> Result<Property, Diagnostic> {
        let (key, loc) = self.ident("property key")?;
        self.expect(Tok::Colon, "`:`")?;
        let mut values = vec![self.value()?];
        while self.peek().tok == Tok::Comma {
            self.next();
            values.push(self.value()?);
        }
        self.expect(Tok::Semi, "`;` after property value")?;
        Ok(Property { key, values, loc })
    }

    fn value(&mut self) -> Result<Value, Diagnostic> {
        let t = self.peek().clone();
        match t.tok {
            Tok::Str(s) => {
                self.next();
                Ok(Value::Str(s))
            }
            Tok::Quantity(n, u) => {
                self.next();
                Ok(Value::Quantity(n, u))
            }
            Tok::Num(n) => {
                self.next();
                if let Tok::Ident(s) = self.peek_at(0) {
                    if let Some(u) = Unit::from_suffix(s) {
                        if matches!(self.peek_at(1), Tok::Comma | Tok::Semi | Tok::RParen) {
                            self.next();
                            return Ok(Value::Quantity(n, u));
                        }
                    }
                }
                Ok(Value::Num(n))
            }
            Tok::Cmp(c) => {
                self.next();
                match self.peek().tok {
                    Tok::Num(n) => {
                        self.next();
                        Ok(Value::Cmp(c, n))
                    }
                    _ => Err(Diagnostic::error(
                        "malformed-threshold",
                        format!("malformed threshold: expected a number after `{c}`"),
                        t.loc,
                    )),
                }
            }
            Tok::Ident(name) => {
                self.next();
                if self.peek().tok == Tok::LParen {
                    self.next();
                    let mut args = vec![self.value()?];
                    while self.peek().tok == Tok::Comma {
                        self.next();
                        args.push(self.value()?);
                    }
                    self.expect(Tok::RParen, "`)`")?;
                    Ok(Value::Call(name, args))
                } else {
                    Ok(Value::Ident(name))
                }
            }
            _ => Err(self.unexpected("value")),
        }
    }
}

/// Parses any `.hcm`-style document without interpreting keywords.
pub fn parse_document(src: &str) -> Result<Document, Diagnostic> {
    let tokens = tokenize(src)?;
    Parser { tokens, pos: 0 }.document()
}

/// Writes `key: v1, v2;` with the given indentation.
pub(crate) fn write_property(out: &mut String, indent: usize, key: &str, values: &[Value]) {
    let _ = write!(out, "{:indent$}{key}: ", "", indent = indent);
    for (i, v) in values.iter().enumerate() {
        if i > 0 {
            out.push_str(", ");
        }
        let _ = write!(out, "{v}");
    }
    out.push_str(";\n");
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nested_blocks_and_values() {
        let doc = parse_document(
            "model tech T;\n\
             techreq A {\n  metric: range_rate(speed, 0, 15);\n  threshold: <= 0.05;\n  window: 60 s;\n  techreq B;\n}\n",
        )
        .unwrap();
        assert_eq!(doc.kind, "tech");
        assert_eq!(doc.name, "T");
        let a = &doc.decls[0];
        let props: Vec<_> = a.properties().collect();
        assert_eq!(
            props[0].values[0],
            Value::Call(
                "range_rate".into(),
                vec![
                    Value::Ident("speed".into()),
                    Value::Num(0.0),
                    Value::Num(15.0)
                ]
            )
        );
        assert_eq!(props[1].values[0], Value::Cmp(Comparator::Le, 0.05));
        assert_eq!(props[2].values[0], Value::Quantity(60.0, Unit::Seconds));
        assert_eq!(a.children().next().unwrap().id, "B");
    }

    #[test]
    fn malformed_threshold_is_located() {
        let err = parse_document("model tech T;\ntechreq A {\n  threshold: <= ;\n}\n").unwrap_err();
        assert_eq!(err.code, "malformed-threshold");
        assert_eq!(err.location, Location::new(3, 14));
    }

    #[test]
    fn missing_semicolon_reports_position() {
        let err = parse_document("model hcr H;\nrequirement R {\n  severity: high\n}\n").unwrap_err();
        assert_eq!(err.code, "syntax");
        assert_eq!(err.location, Location::new(4, 1));
    }
}
