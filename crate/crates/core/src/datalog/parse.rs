//! Tokenizer and recursive-descent parser for the rule language.
//!
//! ```text
//! program   := { statement }
//! statement := atom [ (":-" | "←") body ] "."
//! body      := item { "," item }
//! item      := atom | term cmp term { cmp term }
//! atom      := ident "(" [ term { "," term } ] ")"
//! cmp       := "=" | "!=" | "≠" | "<" | "<=" | "≤" | ">" | ">=" | "≥"
//! term      := variable | symbol | "string" | number | HH:MM | Mon/D | d"date"
//! ```
//!
//! Identifiers starting with a lowercase letter or `_` are variables; other
//! bare identifiers in term position are text constants. `%` starts a
//! comment. A chained comparison `a <= t <= b` stands for `a <= t, t <= b`.

use std::str::FromStr;

use rust_decimal::Decimal;

use super::{Atom, CmpOp, Program, Query, RelAtom, Rule, Term};
use crate::error::{Error, Result};
use crate::relmodel::Value;

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum Tok {
    Ident(String),
    Str(String),
    Date(String),
    Num(Decimal),
    Time(u16),
    LParen,
    RParen,
    LBrace,
    RBrace,
    Comma,
    Dot,
    Colon,
    Arrow,
    Implies,
    Cmp(CmpOp),
    Eof,
}

impl std::fmt::Display for Tok {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Tok::Ident(s) => write!(f, "`{s}`"),
            Tok::Str(s) => write!(f, "string \"{s}\""),
            Tok::Date(s) => write!(f, "date {s}"),
            Tok::Num(n) => write!(f, "number {n}"),
            Tok::Time(t) => write!(f, "time {}", crate::relmodel::format_time(*t)),
            Tok::LParen => f.write_str("`(`"),
            Tok::RParen => f.write_str("`)`"),
            Tok::LBrace => f.write_str("`{`"),
            Tok::RBrace => f.write_str("`}`"),
            Tok::Comma => f.write_str("`,`"),
            Tok::Dot => f.write_str("`.`"),
            Tok::Colon => f.write_str("`:`"),
            Tok::Arrow => f.write_str("`:-`"),
            Tok::Implies => f.write_str("`->`"),
            Tok::Cmp(op) => write!(f, "`{op}`"),
            Tok::Eof => f.write_str("end of input"),
        }
    }
}

#[derive(Debug, Clone)]
pub(crate) struct Token {
    pub tok: Tok,
    pub line: usize,
    pub column: usize,
}

pub(crate) struct Lexer<'a> {
    chars: std::iter::Peekable<std::str::Chars<'a>>,
    line: usize,
    column: usize,
}

fn is_ident_continue(c: char) -> bool {
    c.is_alphanumeric() || c == '_' || c == '\'' || c == '@'
}

impl<'a> Lexer<'a> {
    pub fn tokenize(text: &'a str) -> Result<Vec<Token>> {
        let mut lexer = Lexer {
            chars: text.chars().peekable(),
            line: 1,
            column: 1,
        };
        let mut out = Vec::new();
        loop {
            let t = lexer.next_token()?;
            let eof = t.tok == Tok::Eof;
            out.push(t);
            if eof {
                return Ok(out);
            }
        }
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

    fn peek(&mut self) -> Option<char> {
        self.chars.peek().copied()
    }

    fn peek2(&self) -> Option<char> {
        let mut it = self.chars.clone();
        it.next();
        it.next()
    }

    fn error(&self, line: usize, column: usize, message: impl Into<String>) -> Error {
        Error::Syntax {
            line,
            column,
            message: message.into(),
        }
    }

    fn next_token(&mut self) -> Result<Token> {
        loop {
            match self.peek() {
                Some(c) if c.is_whitespace() => {
                    self.bump();
                }
                Some('%') => {
                    while let Some(c) = self.bump() {
                        if c == '\n' {
                            break;
                        }
                    }
                }
                _ => break,
            }
        }
        let (line, column) = (self.line, self.column);
        let tok = |tok| Ok(Token { tok, line, column });
        let Some(c) = self.peek() else {
            return tok(Tok::Eof);
        };
        match c {
            '(' | ')' | '{' | '}' | ',' | '.' => {
                self.bump();
                tok(match c {
                    '(' => Tok::LParen,
                    ')' => Tok::RParen,
                    '{' => Tok::LBrace,
                    '}' => Tok::RBrace,
                    ',' => Tok::Comma,
                    _ => Tok::Dot,
                })
            }
            ':' => {
                self.bump();
                if self.peek() == Some('-') {
                    self.bump();
                    tok(Tok::Arrow)
                } else {
                    tok(Tok::Colon)
                }
            }
            '←' => {
                self.bump();
                tok(Tok::Arrow)
            }
            '=' => {
                self.bump();
                tok(Tok::Cmp(CmpOp::Eq))
            }
            '≠' | '≤' | '≥' => {
                self.bump();
                tok(Tok::Cmp(match c {
                    '≠' => CmpOp::Ne,
                    '≤' => CmpOp::Le,
                    _ => CmpOp::Ge,
                }))
            }
            '!' => {
                self.bump();
                if self.peek() == Some('=') {
                    self.bump();
                    tok(Tok::Cmp(CmpOp::Ne))
                } else {
                    Err(self.error(line, column, "expected `!=`"))
                }
            }
            '<' | '>' => {
                self.bump();
                let eq = self.peek() == Some('=');
                if eq {
                    self.bump();
                }
                tok(Tok::Cmp(match (c, eq) {
                    ('<', false) => CmpOp::Lt,
                    ('<', true) => CmpOp::Le,
                    ('>', false) => CmpOp::Gt,
                    _ => CmpOp::Ge,
                }))
            }
            '-' => {
                self.bump();
                match self.peek() {
                    Some('>') => {
                        self.bump();
                        tok(Tok::Implies)
                    }
                    Some(d) if d.is_ascii_digit() => {
                        let t = self.number(line, column, true)?;
                        tok(t)
                    }
                    _ => Err(self.error(line, column, "unexpected `-`")),
                }
            }
            '"' => {
                self.bump();
                let s = self.string_body(line, column)?;
                tok(Tok::Str(s))
            }
            d if d.is_ascii_digit() => {
                let t = self.number(line, column, false)?;
                tok(t)
            }
            c if c.is_alphabetic() || c == '_' || c == '#' => {
                let mut s = String::new();
                s.push(c);
                self.bump();
                while let Some(c) = self.peek().filter(|c| is_ident_continue(*c)) {
                    s.push(c);
                    self.bump();
                }
                if s == "d" && self.peek() == Some('"') {
                    self.bump();
                    let body = self.string_body(line, column)?;
                    return tok(Tok::Date(body));
                }
                let tag_like = s.starts_with(|c: char| c.is_ascii_uppercase())
                    && self.peek() == Some('/')
                    && self.peek2().is_some_and(|c| c.is_ascii_alphanumeric());
                if tag_like {
                    s.push('/');
                    self.bump();
                    while let Some(c) = self.peek().filter(char::is_ascii_alphanumeric) {
                        s.push(c);
                        self.bump();
                    }
                    return tok(Tok::Date(s));
                }
                tok(Tok::Ident(s))
            }
            other => Err(self.error(line, column, format!("unexpected character `{other}`"))),
        }
    }

    fn string_body(&mut self, line: usize, column: usize) -> Result<String> {
        let mut s = String::new();
        loop {
            match self.bump() {
                None => return Err(self.error(line, column, "unterminated string")),
                Some('"') => return Ok(s),
                Some('\\') => match self.bump() {
                    Some(c @ ('"' | '\\')) => s.push(c),
                    _ => return Err(self.error(line, column, "bad escape in string")),
                },
                Some(c) => s.push(c),
            }
        }
    }

    fn digits(&mut self) -> String {
        let mut s = String::new();
        while let Some(c) = self.peek().filter(char::is_ascii_digit) {
            s.push(c);
            self.bump();
        }
        s
    }

    fn number(&mut self, line: usize, column: usize, negative: bool) -> Result<Tok> {
        let int = self.digits();
        if !negative && self.peek() == Some(':') && self.peek2().is_some_and(|c| c.is_ascii_digit()) {
            self.bump();
            let mins = self.digits();
            let text = format!("{int}:{mins}");
            return crate::relmodel::parse_time(&text)
                .map(Tok::Time)
                .ok_or_else(|| self.error(line, column, format!("invalid time `{text}`")));
        }
        let mut text = if negative { format!("-{int}") } else { int };
        if self.peek() == Some('.') && self.peek2().is_some_and(|c| c.is_ascii_digit()) {
            self.bump();
            text.push('.');
            text.push_str(&self.digits());
        }
        Decimal::from_str(&text)
            .map(Tok::Num)
            .map_err(|e| self.error(line, column, format!("invalid number `{text}`: {e}")))
    }
}

/// Cursor over a token vector.
pub(crate) struct TokenStream {
    tokens: Vec<Token>,
    pos: usize,
}

impl TokenStream {
    pub fn new(text: &str) -> Result<Self> {
        Ok(TokenStream {
            tokens: Lexer::tokenize(text)?,
            pos: 0,
        })
    }

    pub fn peek(&self) -> &Tok {
        &self.tokens[self.pos].tok
    }

    pub fn peek_at(&self, offset: usize) -> &Tok {
        let i = (self.pos + offset).min(self.tokens.len() - 1);
        &self.tokens[i].tok
    }

    pub fn next(&mut self) -> Token {
        let t = self.tokens[self.pos].clone();
        if self.pos + 1 < self.tokens.len() {
            self.pos += 1;
        }
        t
    }

    pub fn at_eof(&self) -> bool {
        *self.peek() == Tok::Eof
    }

    pub fn error(&self, message: impl Into<String>) -> Error {
        let t = &self.tokens[self.pos];
        Error::Syntax {
            line: t.line,
            column: t.column,
            message: message.into(),
        }
    }

    pub fn expect(&mut self, tok: Tok) -> Result<()> {
        if *self.peek() == tok {
            self.next();
            Ok(())
        } else {
            Err(self.error(format!("expected {tok}, found {}", self.peek())))
        }
    }

    pub fn eat(&mut self, tok: &Tok) -> bool {
        if self.peek() == tok {
            self.next();
            true
        } else {
            false
        }
    }

    pub fn ident(&mut self) -> Result<String> {
        match self.peek().clone() {
            Tok::Ident(s) => {
                self.next();
                Ok(s)
            }
            other => Err(self.error(format!("expected identifier, found {other}"))),
        }
    }

    pub fn string(&mut self) -> Result<String> {
        match self.peek().clone() {
            Tok::Str(s) => {
                self.next();
                Ok(s)
            }
            other => Err(self.error(format!("expected string, found {other}"))),
        }
    }

    pub fn term(&mut self) -> Result<Term> {
        let t = match self.peek().clone() {
            Tok::Ident(s) if s.starts_with('#') => {
                return Err(self.error(format!("external name `{s}` used as a term")))
            }
            Tok::Ident(s) if s.starts_with(|c: char| c.is_lowercase() || c == '_') => Term::Var(s),
            Tok::Ident(s) => Term::Const(Value::Str(s)),
            Tok::Str(s) => Term::Const(Value::Str(s)),
            Tok::Date(s) => Term::Const(Value::Date(s)),
            Tok::Num(n) => Term::Const(Value::Num(n)),
            Tok::Time(t) => Term::Const(Value::Time(t)),
            other => return Err(self.error(format!("expected a term, found {other}"))),
        };
        self.next();
        Ok(t)
    }

    pub fn rel_atom(&mut self) -> Result<RelAtom> {
        let predicate = self.ident()?;
        self.expect(Tok::LParen)?;
        let mut terms = Vec::new();
        if !self.eat(&Tok::RParen) {
            loop {
                terms.push(self.term()?);
                if self.eat(&Tok::RParen) {
                    break;
                }
                self.expect(Tok::Comma)?;
            }
        }
        Ok(RelAtom::new(predicate, terms))
    }

    /// One body item; a comparison chain yields several built-ins.
    fn body_item(&mut self, out: &mut Vec<Atom>) -> Result<()> {
        if matches!(self.peek(), Tok::Ident(_)) && *self.peek_at(1) == Tok::LParen {
            out.push(Atom::Rel(self.rel_atom()?));
            return Ok(());
        }
        let mut left = self.term()?;
        let mut any = false;
        while let Tok::Cmp(op) = *self.peek() {
            self.next();
            let right = self.term()?;
            out.push(Atom::builtin(op, left, right.clone()));
            left = right;
            any = true;
        }
        if any {
            Ok(())
        } else {
            Err(self.error(format!("expected a comparison, found {}", self.peek())))
        }
    }

    pub fn rule(&mut self) -> Result<Rule> {
        let head = self.rel_atom()?;
        let mut body = Vec::new();
        if self.eat(&Tok::Arrow) {
            loop {
                self.body_item(&mut body)?;
                if !self.eat(&Tok::Comma) {
                    break;
                }
            }
        }
        self.expect(Tok::Dot)?;
        Ok(Rule::new(head, body))
    }
}

/// Parses rules without program-level checks.
pub fn parse_rules(text: &str) -> Result<Vec<Rule>> {
    let mut ts = TokenStream::new(text)?;
    let mut rules = Vec::new();
    while !ts.at_eof() {
        rules.push(ts.rule()?);
    }
    Ok(rules)
}

/// Parses and checks a program.
pub fn parse_program(text: &str) -> Result<Program> {
    Program::new(parse_rules(text)?)
}

/// Parses a query; the answer predicate is the head of the first rule.
pub fn parse_query(text: &str) -> Result<Query> {
    let program = parse_program(text)?;
    let answer = program
        .rules
        .first()
        .map(|r| r.head.predicate.clone())
        .ok_or_else(|| Error::Syntax {
            line: 1,
            column: 1,
            message: "empty query".into(),
        })?;
    Query::new(answer, program)
}

/// Parses a single relational atom.
pub fn parse_atom(text: &str) -> Result<RelAtom> {
    let mut ts = TokenStream::new(text)?;
    let atom = ts.rel_atom()?;
    if !ts.at_eof() {
        return Err(ts.error(format!("trailing input {}", ts.peek())));
    }
    Ok(atom)
}

#[cfg(test)]
mod tests {
    use super::*;

    const FOOTPRINT: &str = "% temperatures taken between 11:30 and 12:30 with a thermometer
TempNoon'_tm_ins(p, v, t, d) ← M(p, v, t, d, i), 11:30 ≤ t ≤ 12:30, i = \"Therm.\".";

    #[test]
    fn parses_footprint_rule() {
        let p = parse_program(FOOTPRINT).unwrap();
        assert_eq!(p.rules.len(), 1);
        let r = &p.rules[0];
        assert_eq!(r.head.predicate, "TempNoon'_tm_ins");
        assert_eq!(r.rel_atoms().count(), 1);
        assert_eq!(r.body.iter().filter(|a| a.is_builtin()).count(), 3);
        assert_eq!(
            r.to_string(),
            "TempNoon'_tm_ins(p, v, t, d) :- M(p, v, t, d, i), 11:30 <= t, t <= 12:30, i = \"Therm.\"."
        );
    }

    #[test]
    fn two_cycle_is_recursion() {
        let err = parse_program("p(x) ← q(x, y).\nq(x, y) ← p(x), e(y).").unwrap_err();
        match err {
            Error::RecursionDetected { cycle } => {
                assert_eq!(cycle.first(), cycle.last());
                assert!(cycle.contains(&"p".to_string()) && cycle.contains(&"q".to_string()));
            }
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn self_recursion() {
        assert!(matches!(
            parse_program("p(x) :- p(x)."),
            Err(Error::RecursionDetected { .. })
        ));
    }

    #[test]
    fn unsafe_head_variable() {
        let err = parse_program("p(x) ← y = 3.").unwrap_err();
        assert!(matches!(err, Error::SafetyViolation { variable, .. } if variable == "x"));
    }

    #[test]
    fn syntax_error_position() {
        let err = parse_program("p(x) :- q(x)\nr(y) :- s(y).").unwrap_err();
        match err {
            Error::Syntax { line, column, .. } => assert_eq!((line, column), (2, 1)),
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn literals() {
        let r = &parse_rules("a(x) :- b(x, y, z, w, u), y = -3.25, z = 4:00, w = d\"2024-01-02\", u = Foo.").unwrap()[0];
        let consts: Vec<&Term> = r
            .body
            .iter()
            .filter_map(|a| match a {
                Atom::Builtin { right, .. } => Some(right),
                _ => None,
            })
            .collect();
        assert_eq!(consts[0], &Term::Const(Value::num("-3.25")));
        assert_eq!(consts[1], &Term::Const(Value::Time(240)));
        assert_eq!(consts[2], &Term::Const(Value::date("2024-01-02")));
        assert_eq!(consts[3], &Term::Const(Value::str("Foo")));
    }

    #[test]
    fn facts_and_nullary_atoms() {
        let p = parse_program("m().\nq(x) :- m(), e(x).\nf(\"a\", 1).").unwrap();
        assert!(p.rules[0].is_fact());
        assert_eq!(p.rules[0].head.arity(), 0);
        assert_eq!(p.rules[2].to_string(), "f(\"a\", 1).");
    }

    #[test]
    fn display_round_trips() {
        let text = "Q''(p, v) :- d = Sep/5, TempNoon''_P@fffb(p, v, t, d), #C(n, y), x != \"a \\\"b\\\"\", t >= 0:05.";
        let r = parse_rules(text).unwrap();
        let again = parse_rules(&r[0].to_string()).unwrap();
        assert_eq!(r, again);
    }

    #[test]
    fn time_in_head_before_arrow() {
        let r = &parse_rules("p(12:00):-q(x).").unwrap()[0];
        assert_eq!(r.head.terms[0], Term::Const(Value::Time(720)));
    }

    #[test]
    fn invalid_time_literal() {
        assert!(matches!(parse_rules("p(x) :- q(x), x < 25:00."), Err(Error::Syntax { .. })));
    }
}
