//! Hand-rolled lexer and recursive-descent parser for ProbLog source text:
//! probability-labeled facts, definite clauses with a fixed builtin goal
//! vocabulary, list syntax, and queries.

use std::collections::HashMap;
use std::fmt;

use thiserror::Error;

use crate::program::{Clause, Program};
use crate::term::{pretty, Term};

/// Byte-offset range with line/column of the start, attached to every
/// parse error.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SourceSpan {
    pub start: usize,
    pub end: usize,
    pub line: usize,
    pub column: usize,
}

impl fmt::Display for SourceSpan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}, column {}", self.line, self.column)
    }
}

#[derive(Debug, Error, PartialEq)]
#[error("{message} at {span}")]
pub struct ParseError {
    pub message: String,
    pub span: SourceSpan,
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Atom(String),
    Var(String),
    Int(i64),
    Float(f64),
    LParen,
    RParen,
    LBracket,
    RBracket,
    Bar,
    Comma,
    Dot,
    ColonColon,
    If, // :-
    NotIdentical,
    Identical,
    Gt,
    Ge,
    Plus,
    Minus,
    Star,
    Eof,
}

#[derive(Debug, Clone)]
struct Token {
    tok: Tok,
    span: SourceSpan,
}

struct Lexer<'a> {
    src: &'a str,
    bytes: &'a [u8],
    pos: usize,
    line: usize,
    col: usize,
}

impl<'a> Lexer<'a> {
    fn new(src: &'a str) -> Self {
        Lexer {
            src,
            bytes: src.as_bytes(),
            pos: 0,
            line: 1,
            col: 1,
        }
    }

    fn peek(&self) -> Option<u8> {
        self.bytes.get(self.pos).copied()
    }

    fn peek2(&self) -> Option<u8> {
        self.bytes.get(self.pos + 1).copied()
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.src[self.pos..].chars().next()?;
        self.pos += c.len_utf8();
        if c == '\n' {
            self.line += 1;
            self.col = 1;
        } else {
            self.col += 1;
        }
        Some(c)
    }

    fn here(&self) -> SourceSpan {
        SourceSpan {
            start: self.pos,
            end: self.pos,
            line: self.line,
            column: self.col,
        }
    }

    fn skip_ws(&mut self) {
        loop {
            match self.peek() {
                Some(b'%') => {
                    while let Some(c) = self.peek() {
                        if c == b'\n' {
                            break;
                        }
                        self.bump();
                    }
                }
                Some(c) if c.is_ascii_whitespace() => {
                    self.bump();
                }
                _ => break,
            }
        }
    }

    fn error(&self, span: SourceSpan, message: impl Into<String>) -> ParseError {
        ParseError {
            message: message.into(),
            span,
        }
    }

    fn next_token(&mut self) -> Result<Token, ParseError> {
        self.skip_ws();
        let mut span = self.here();
        let Some(c) = self.peek() else {
            return Ok(Token {
                tok: Tok::Eof,
                span,
            });
        };
        let tok = match c {
            b'(' => {
                self.bump();
                Tok::LParen
            }
            b')' => {
                self.bump();
                Tok::RParen
            }
            b'[' => {
                self.bump();
                Tok::LBracket
            }
            b']' => {
                self.bump();
                Tok::RBracket
            }
            b'|' => {
                self.bump();
                Tok::Bar
            }
            b',' => {
                self.bump();
                Tok::Comma
            }
            b'+' => {
                self.bump();
                Tok::Plus
            }
            b'*' => {
                self.bump();
                Tok::Star
            }
            b'-' => {
                self.bump();
                Tok::Minus
            }
            b'.' => {
                self.bump();
                Tok::Dot
            }
            b':' => {
                self.bump();
                match self.peek() {
                    Some(b':') => {
                        self.bump();
                        Tok::ColonColon
                    }
                    Some(b'-') => {
                        self.bump();
                        Tok::If
                    }
                    _ => return Err(self.error(span, "expected '::' or ':-'")),
                }
            }
            b'\\' => {
                self.bump();
                if self.peek() == Some(b'=') && self.peek2() == Some(b'=') {
                    self.bump();
                    self.bump();
                    Tok::NotIdentical
                } else {
                    return Err(self.error(span, "expected '\\=='"));
                }
            }
            b'=' => {
                self.bump();
                if self.peek() == Some(b'=') {
                    self.bump();
                    Tok::Identical
                } else {
                    return Err(self.error(span, "expected '=='"));
                }
            }
            b'>' => {
                self.bump();
                if self.peek() == Some(b'=') {
                    self.bump();
                    Tok::Ge
                } else {
                    Tok::Gt
                }
            }
            b'\'' => {
                self.bump();
                let mut name = String::new();
                loop {
                    match self.bump() {
                        Some('\\') => match self.bump() {
                            Some(e) => name.push(e),
                            None => return Err(self.error(span, "unterminated quoted atom")),
                        },
                        Some('\'') => break,
                        Some(ch) => name.push(ch),
                        None => return Err(self.error(span, "unterminated quoted atom")),
                    }
                }
                Tok::Atom(name)
            }
            b'0'..=b'9' => {
                let start = self.pos;
                while matches!(self.peek(), Some(b'0'..=b'9')) {
                    self.bump();
                }
                let mut is_float = false;
                if self.peek() == Some(b'.') && matches!(self.peek2(), Some(b'0'..=b'9')) {
                    is_float = true;
                    self.bump();
                    while matches!(self.peek(), Some(b'0'..=b'9')) {
                        self.bump();
                    }
                }
                let text = &self.src[start..self.pos];
                if is_float {
                    Tok::Float(text.parse().map_err(|_| self.error(span, "bad number"))?)
                } else {
                    Tok::Int(text.parse().map_err(|_| self.error(span, "bad number"))?)
                }
            }
            c if c.is_ascii_lowercase() => {
                let start = self.pos;
                while matches!(self.peek(), Some(ch) if ch.is_ascii_alphanumeric() || ch == b'_') {
                    self.bump();
                }
                Tok::Atom(self.src[start..self.pos].to_string())
            }
            c if c.is_ascii_uppercase() || c == b'_' => {
                let start = self.pos;
                while matches!(self.peek(), Some(ch) if ch.is_ascii_alphanumeric() || ch == b'_') {
                    self.bump();
                }
                Tok::Var(self.src[start..self.pos].to_string())
            }
            other => {
                return Err(self.error(span, format!("unexpected character '{}'", other as char)))
            }
        };
        span.end = self.pos;
        Ok(Token { tok, span })
    }
}

/// Variable scope of one clause or query.
#[derive(Default)]
struct VarScope {
    names: Vec<String>,
    index: HashMap<String, usize>,
}

impl VarScope {
    fn var(&mut self, name: &str) -> usize {
        // every `_` is a fresh anonymous variable
        if name == "_" {
            let i = self.names.len();
            self.names.push(format!("_G{i}"));
            return i;
        }
        if let Some(&i) = self.index.get(name) {
            return i;
        }
        let i = self.names.len();
        self.names.push(name.to_string());
        self.index.insert(name.to_string(), i);
        i
    }
}

struct Parser<'a> {
    lexer: Lexer<'a>,
    lookahead: Token,
    program: &'a mut Program,
}

impl<'a> Parser<'a> {
    fn new(src: &'a str, program: &'a mut Program) -> Result<Self, ParseError> {
        let mut lexer = Lexer::new(src);
        let lookahead = lexer.next_token()?;
        Ok(Parser {
            lexer,
            lookahead,
            program,
        })
    }

    fn advance(&mut self) -> Result<Token, ParseError> {
        let next = self.lexer.next_token()?;
        Ok(std::mem::replace(&mut self.lookahead, next))
    }

    fn expect(&mut self, tok: Tok, what: &str) -> Result<Token, ParseError> {
        if self.lookahead.tok == tok {
            self.advance()
        } else {
            Err(self.err_here(format!("expected {what}")))
        }
    }

    fn err_here(&self, message: impl Into<String>) -> ParseError {
        ParseError {
            message: message.into(),
            span: self.lookahead.span,
        }
    }

    /// primary := int | '-' int | var | atom | atom '(' term,* ')' | list | '(' expr ')'
    fn primary(&mut self, scope: &mut VarScope) -> Result<Term, ParseError> {
        let token = self.advance()?;
        match token.tok {
            Tok::Int(n) => Ok(Term::Int(n)),
            Tok::Minus => match self.advance()?.tok {
                Tok::Int(n) => Ok(Term::Int(-n)),
                _ => Err(ParseError {
                    message: "expected integer after '-'".into(),
                    span: token.span,
                }),
            },
            Tok::Var(name) => Ok(Term::Var(scope.var(&name))),
            Tok::Atom(name) => {
                let sym = self.program.symbols.intern(&name);
                if self.lookahead.tok == Tok::LParen {
                    self.advance()?;
                    let mut args = vec![self.expr(scope)?];
                    while self.lookahead.tok == Tok::Comma {
                        self.advance()?;
                        args.push(self.expr(scope)?);
                    }
                    self.expect(Tok::RParen, "')'")?;
                    Ok(Term::Compound(sym, args))
                } else {
                    Ok(Term::Atom(sym))
                }
            }
            Tok::LBracket => self.list_tail(scope),
            Tok::LParen => {
                let t = self.expr(scope)?;
                self.expect(Tok::RParen, "')'")?;
                Ok(t)
            }
            _ => Err(ParseError {
                message: "expected term".into(),
                span: token.span,
            }),
        }
    }

    /// Rest of a list after '['. Lists desugar to '.'/2 cons cells.
    fn list_tail(&mut self, scope: &mut VarScope) -> Result<Term, ParseError> {
        let nil = self.program.builtins().nil;
        let cons = self.program.builtins().cons;
        if self.lookahead.tok == Tok::RBracket {
            self.advance()?;
            return Ok(Term::Atom(nil));
        }
        let mut items = vec![self.expr(scope)?];
        while self.lookahead.tok == Tok::Comma {
            self.advance()?;
            items.push(self.expr(scope)?);
        }
        let tail = if self.lookahead.tok == Tok::Bar {
            self.advance()?;
            let t = self.expr(scope)?;
            self.expect(Tok::RBracket, "']'")?;
            t
        } else {
            self.expect(Tok::RBracket, "']'")?;
            Term::Atom(nil)
        };
        Ok(items
            .into_iter()
            .rev()
            .fold(tail, |acc, item| Term::Compound(cons, vec![item, acc])))
    }

    /// expr := mul (('+'|'-') mul)*
    fn expr(&mut self, scope: &mut VarScope) -> Result<Term, ParseError> {
        let mut lhs = self.mul(scope)?;
        loop {
            let op = match self.lookahead.tok {
                Tok::Plus => self.program.builtins().plus,
                Tok::Minus => self.program.builtins().minus,
                _ => break,
            };
            self.advance()?;
            let rhs = self.mul(scope)?;
            lhs = Term::Compound(op, vec![lhs, rhs]);
        }
        Ok(lhs)
    }

    /// mul := primary ('*' primary)*
    fn mul(&mut self, scope: &mut VarScope) -> Result<Term, ParseError> {
        let mut lhs = self.primary(scope)?;
        while self.lookahead.tok == Tok::Star {
            self.advance()?;
            let rhs = self.primary(scope)?;
            lhs = Term::Compound(self.program.builtins().times, vec![lhs, rhs]);
        }
        Ok(lhs)
    }

    /// goal := expr [ ('\==' | '==' | '>' | '>=' | 'is') expr ]
    fn goal(&mut self, scope: &mut VarScope) -> Result<Term, ParseError> {
        let lhs = self.expr(scope)?;
        let builtins = self.program.builtins().clone();
        let op = match &self.lookahead.tok {
            Tok::NotIdentical => builtins.not_identical,
            Tok::Identical => builtins.identical,
            Tok::Gt => builtins.gt,
            Tok::Ge => builtins.ge,
            Tok::Atom(a) if a == "is" => builtins.is,
            _ => {
                if !lhs.is_callable() {
                    return Err(self.err_here("goal must be callable"));
                }
                return Ok(lhs);
            }
        };
        self.advance()?;
        let rhs = self.expr(scope)?;
        Ok(Term::Compound(op, vec![lhs, rhs]))
    }

    fn statement(&mut self) -> Result<(), ParseError> {
        let mut scope = VarScope::default();
        // probabilistic fact: <float> :: <head> .
        if let Tok::Float(p) = self.lookahead.tok {
            let span = self.lookahead.span;
            self.advance()?;
            if self.lookahead.tok != Tok::ColonColon {
                return Err(self.err_here("expected '::' after probability label"));
            }
            self.advance()?;
            let head = self.primary(&mut scope)?;
            if self.lookahead.tok == Tok::If {
                return Err(self.err_here("'::' cannot label a rule"));
            }
            self.expect(Tok::Dot, "'.'")?;
            if !head.is_callable() {
                return Err(ParseError {
                    message: "fact head must be callable".into(),
                    span,
                });
            }
            self.program.add_fact(p, head).map_err(|e| ParseError {
                message: e.to_string(),
                span,
            })?;
            return Ok(());
        }
        // integer labels like `1::f.` are also out-of-range probabilities
        // only when followed by '::'; plain integers cannot start a clause.
        if let Tok::Int(n) = self.lookahead.tok {
            let span = self.lookahead.span;
            self.advance()?;
            if self.lookahead.tok == Tok::ColonColon {
                self.advance()?;
                let head = self.primary(&mut scope)?;
                if self.lookahead.tok == Tok::If {
                    return Err(self.err_here("'::' cannot label a rule"));
                }
                self.expect(Tok::Dot, "'.'")?;
                self.program
                    .add_fact(n as f64, head)
                    .map_err(|e| ParseError {
                        message: e.to_string(),
                        span,
                    })?;
                return Ok(());
            }
            return Err(ParseError {
                message: "clause head must be callable".into(),
                span,
            });
        }
        let span = self.lookahead.span;
        let head = self.primary(&mut scope)?;
        if !head.is_callable() {
            return Err(ParseError {
                message: "clause head must be callable".into(),
                span,
            });
        }
        let mut body = Vec::new();
        if self.lookahead.tok == Tok::If {
            self.advance()?;
            body.push(self.goal(&mut scope)?);
            while self.lookahead.tok == Tok::Comma {
                self.advance()?;
                body.push(self.goal(&mut scope)?);
            }
        }
        self.expect(Tok::Dot, "'.'")?;
        let n_vars = scope.names.len();
        self.program
            .add_clause(Clause {
                head,
                body,
                n_vars,
                var_names: scope.names,
            })
            .map_err(|e| ParseError {
                message: e.to_string(),
                span,
            })?;
        Ok(())
    }
}

/// Parses ProbLog source text into a fresh [`Program`].
pub fn parse_program(text: &str) -> Result<Program, ParseError> {
    let mut program = Program::new();
    parse_into(text, &mut program)?;
    Ok(program)
}

/// Parses ProbLog source text into an existing program (used to append the
/// prelude or graph fragments).
pub fn parse_into(text: &str, program: &mut Program) -> Result<(), ParseError> {
    let mut parser = Parser::new(text, program)?;
    while parser.lookahead.tok != Tok::Eof {
        parser.statement()?;
    }
    Ok(())
}

/// A parsed query: the goal plus its variable names for answer reporting.
#[derive(Debug, Clone)]
pub struct Query {
    pub goal: Term,
    pub n_vars: usize,
    pub var_names: Vec<String>,
}

/// Parses a single query goal. The trailing dot is optional.
pub fn parse_query(text: &str, program: &mut Program) -> Result<Query, ParseError> {
    let mut parser = Parser::new(text, program)?;
    let mut scope = VarScope::default();
    let goal = parser.goal(&mut scope)?;
    if parser.lookahead.tok == Tok::Dot {
        parser.advance()?;
    }
    if parser.lookahead.tok != Tok::Eof {
        return Err(parser.err_here("unexpected input after query"));
    }
    Ok(Query {
        goal,
        n_vars: scope.names.len(),
        var_names: scope.names,
    })
}

/// Renders a program back to ProbLog text: facts first, then clauses.
pub fn pretty_program(program: &Program) -> String {
    let mut out = String::new();
    for fact in program.facts() {
        out.push_str(&format!(
            "{}::{}.\n",
            fact.prob.value(),
            pretty(&fact.head, &program.symbols, &[])
        ));
    }
    for clause in program.clauses() {
        out.push_str(&pretty(&clause.head, &program.symbols, &clause.var_names));
        if !clause.body.is_empty() {
            out.push_str(" :- ");
            let goals: Vec<String> = clause
                .body
                .iter()
                .map(|g| pretty_goal(g, program, &clause.var_names))
                .collect();
            out.push_str(&goals.join(", "));
        }
        out.push_str(".\n");
    }
    out
}

fn pretty_goal(goal: &Term, program: &Program, var_names: &[String]) -> String {
    let b = program.builtins();
    if let Term::Compound(s, args) = goal {
        if args.len() == 2
            && [b.not_identical, b.identical, b.gt, b.ge, b.is, b.plus, b.minus, b.times]
                .contains(s)
        {
            return format!(
                "{} {} {}",
                pretty_goal(&args[0], program, var_names),
                program.symbols.name(*s),
                pretty_goal(&args[1], program, var_names)
            );
        }
    }
    pretty(goal, &program.symbols, var_names)
}
