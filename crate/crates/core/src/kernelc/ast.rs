use std::fmt;

use serde::{Deserialize, Serialize};

use super::{KernelError, Result};

/// 1-based source position.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Pos {
    pub line: usize,
    pub column: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BinOp {
    Add,
    Mul,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ExprKind {
    Var(String),
    Number(f64),
    Binary(BinOp, Box<Expr>, Box<Expr>),
    Transpose(Box<Expr>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Expr {
    pub kind: ExprKind,
    pub pos: Pos,
}

impl Expr {
    pub fn var(name: &str, pos: Pos) -> Self {
        Expr { kind: ExprKind::Var(name.to_string()), pos }
    }

    /// Variables read by the expression, left to right, with repeats.
    pub fn vars(&self) -> Vec<&str> {
        let mut out = Vec::new();
        self.walk(&mut |e| {
            if let ExprKind::Var(v) = &e.kind {
                out.push(v.as_str());
            }
        });
        out
    }

    /// Pre-order traversal.
    pub fn walk<'a>(&'a self, f: &mut impl FnMut(&'a Expr)) {
        f(self);
        match &self.kind {
            ExprKind::Binary(_, a, b) => {
                a.walk(f);
                b.walk(f);
            }
            ExprKind::Transpose(a) => a.walk(f),
            _ => {}
        }
    }

    /// Terms of a top-level sum.
    pub fn terms(&self) -> Vec<&Expr> {
        match &self.kind {
            ExprKind::Binary(BinOp::Add, a, b) => {
                let mut t = a.terms();
                t.extend(b.terms());
                t
            }
            _ => vec![self],
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fn prec(e: &Expr) -> u8 {
            match e.kind {
                ExprKind::Binary(BinOp::Add, ..) => 1,
                ExprKind::Binary(BinOp::Mul, ..) => 2,
                _ => 3,
            }
        }
        fn side(f: &mut fmt::Formatter<'_>, e: &Expr, min: u8) -> fmt::Result {
            if prec(e) < min {
                write!(f, "({e})")
            } else {
                write!(f, "{e}")
            }
        }
        match &self.kind {
            ExprKind::Var(v) => f.write_str(v),
            ExprKind::Number(x) => write!(f, "{x}"),
            ExprKind::Binary(BinOp::Add, a, b) => {
                side(f, a, 1)?;
                f.write_str(" + ")?;
                side(f, b, 2)
            }
            ExprKind::Binary(BinOp::Mul, a, b) => {
                side(f, a, 2)?;
                f.write_str(" * ")?;
                side(f, b, 3)
            }
            ExprKind::Transpose(a) => {
                side(f, a, 3)?;
                f.write_str("'")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Statement {
    pub target: String,
    pub target_pos: Pos,
    pub expr: Expr,
}

impl fmt::Display for Statement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} = {}", self.target, self.expr)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelProgram {
    pub name: String,
    pub statements: Vec<Statement>,
}

impl KernelProgram {
    /// Variables in order of first appearance, reads of a statement before
    /// its target.
    pub fn variables(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for s in &self.statements {
            for v in s.expr.vars().into_iter().chain([s.target.as_str()]) {
                if !out.iter().any(|o| o == v) {
                    out.push(v.to_string());
                }
            }
        }
        out
    }
}

impl fmt::Display for KernelProgram {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "kernel {}", self.name)?;
        for s in &self.statements {
            writeln!(f, "{s}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Number(f64),
    Sym(char),
}

fn syntax(line: usize, column: usize, message: impl Into<String>) -> KernelError {
    KernelError::Syntax { line, column, message: message.into() }
}

fn is_ident(s: &str) -> bool {
    let mut c = s.chars();
    c.next().is_some_and(|c| c.is_ascii_alphabetic() || c == '_') && c.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

fn lex(line: usize, text: &str) -> Result<Vec<(Tok, Pos)>> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        let pos = Pos { line, column: i + 1 };
        if c == '#' {
            break;
        }
        if c.is_whitespace() {
            i += 1;
        } else if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            out.push((Tok::Ident(chars[start..i].iter().collect()), pos));
        } else if c.is_ascii_digit() || (c == '.' && chars.get(i + 1).is_some_and(char::is_ascii_digit)) {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                i += 1;
            }
            if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                let mut j = i + 1;
                if j < chars.len() && (chars[j] == '+' || chars[j] == '-') {
                    j += 1;
                }
                if j < chars.len() && chars[j].is_ascii_digit() {
                    i = j;
                    while i < chars.len() && chars[i].is_ascii_digit() {
                        i += 1;
                    }
                }
            }
            let s: String = chars[start..i].iter().collect();
            let x = s.parse().map_err(|_| syntax(line, start + 1, format!("bad number `{s}`")))?;
            out.push((Tok::Number(x), pos));
        } else if "=+*'()".contains(c) {
            out.push((Tok::Sym(c), pos));
            i += 1;
        } else {
            return Err(syntax(line, i + 1, format!("unexpected character `{c}`")));
        }
    }
    Ok(out)
}

struct StmtParser<'a> {
    toks: &'a [(Tok, Pos)],
    i: usize,
    end: Pos,
}

impl StmtParser<'_> {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.i).map(|(t, _)| t)
    }

    fn pos(&self) -> Pos {
        self.toks.get(self.i).map_or(self.end, |(_, p)| *p)
    }

    fn fail(&self, message: &str) -> KernelError {
        let p = self.pos();
        let found = match self.peek() {
            Some(Tok::Ident(s)) => format!("`{s}`"),
            Some(Tok::Number(x)) => format!("`{x}`"),
            Some(Tok::Sym(c)) => format!("`{c}`"),
            None => "end of line".into(),
        };
        syntax(p.line, p.column, format!("{message}, found {found}"))
    }

    fn expr(&mut self) -> Result<Expr> {
        let mut lhs = self.term()?;
        while self.peek() == Some(&Tok::Sym('+')) {
            let pos = self.pos();
            self.i += 1;
            let rhs = self.term()?;
            lhs = Expr { kind: ExprKind::Binary(BinOp::Add, Box::new(lhs), Box::new(rhs)), pos };
        }
        Ok(lhs)
    }

    fn term(&mut self) -> Result<Expr> {
        let mut lhs = self.postfix()?;
        while self.peek() == Some(&Tok::Sym('*')) {
            let pos = self.pos();
            self.i += 1;
            let rhs = self.postfix()?;
            lhs = Expr { kind: ExprKind::Binary(BinOp::Mul, Box::new(lhs), Box::new(rhs)), pos };
        }
        Ok(lhs)
    }

    fn postfix(&mut self) -> Result<Expr> {
        let mut e = self.primary()?;
        while self.peek() == Some(&Tok::Sym('\'')) {
            let pos = self.pos();
            self.i += 1;
            e = Expr { kind: ExprKind::Transpose(Box::new(e)), pos };
        }
        Ok(e)
    }

    fn primary(&mut self) -> Result<Expr> {
        let pos = self.pos();
        match self.peek().cloned() {
            Some(Tok::Ident(name)) => {
                self.i += 1;
                Ok(Expr { kind: ExprKind::Var(name), pos })
            }
            Some(Tok::Number(x)) => {
                self.i += 1;
                Ok(Expr { kind: ExprKind::Number(x), pos })
            }
            Some(Tok::Sym('(')) => {
                self.i += 1;
                let e = self.expr()?;
                if self.peek() != Some(&Tok::Sym(')')) {
                    return Err(self.fail("expected `)`"));
                }
                self.i += 1;
                Ok(e)
            }
            _ => Err(self.fail("expected a variable, number or `(`")),
        }
    }
}

fn parse_statement(line: usize, toks: &[(Tok, Pos)], line_len: usize) -> Result<Statement> {
    let end = Pos { line, column: line_len + 1 };
    let mut p = StmtParser { toks, i: 0, end };
    let (target, target_pos) = match p.peek() {
        Some(Tok::Ident(name)) => (name.clone(), p.pos()),
        _ => return Err(p.fail("expected an assignment target")),
    };
    p.i += 1;
    if p.peek() != Some(&Tok::Sym('=')) {
        return Err(p.fail("expected `=`"));
    }
    p.i += 1;
    let expr = p.expr()?;
    if p.i < toks.len() {
        return Err(p.fail("expected `+`, `*`, `'` or end of line"));
    }
    Ok(Statement { target, target_pos, expr })
}

/// Parses a script: a `kernel <name>` line, then one assignment per line.
/// Blank lines and `#` comments are skipped.
pub fn parse_kernel(text: &str) -> Result<KernelProgram> {
    let mut name: Option<String> = None;
    let mut statements = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let toks = lex(line, raw)?;
        let Some((first, pos)) = toks.first() else {
            continue;
        };
        if *first == Tok::Ident("kernel".into()) && toks.get(1).map(|(t, _)| t) != Some(&Tok::Sym('=')) {
            if name.is_some() {
                return Err(syntax(line, pos.column, "duplicate `kernel` line"));
            }
            if !statements.is_empty() {
                return Err(syntax(line, pos.column, "`kernel` line must come before the statements"));
            }
            match &toks[1..] {
                [(Tok::Ident(n), _)] if is_ident(n) => name = Some(n.clone()),
                [] => return Err(syntax(line, raw.len() + 1, "expected a kernel name")),
                [_, (_, p), ..] => return Err(syntax(line, p.column, "expected end of line after the kernel name")),
                [(_, p)] => return Err(syntax(line, p.column, "expected a kernel name")),
            }
            continue;
        }
        if name.is_none() {
            return Err(syntax(line, pos.column, "expected `kernel <name>` first"));
        }
        statements.push(parse_statement(line, &toks, raw.chars().count())?);
    }
    let Some(name) = name else {
        return Err(syntax(1, 1, "expected `kernel <name>` first"));
    };
    if statements.is_empty() {
        return Err(syntax(text.lines().count().max(1), 1, "kernel has no statements"));
    }
    Ok(KernelProgram { name, statements })
}
