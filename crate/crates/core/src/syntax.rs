//! Text format for programs (`.mdl` files).
//!
//! ```text
//! program  := node+
//! node     := "node" IDENT "{" stmt* "}"
//! stmt     := "send" IDENT "to" IDENT
//!           | "recv" IDENT "from" IDENT
//!           | "for" ("inf" | INTEGER) "{" stmt* "}"
//! ```
//!
//! Statements are separated by newlines and/or commas, `#` starts a line
//! comment. Nodes are ranked in declaration order.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt::Write;

use thiserror::Error;

use crate::model::{LoopCount, MsgId, NodeId, Program, Statement, Symbol};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("{line}:{col}: unexpected character `{found}`")]
    Lex { line: usize, col: usize, found: char },
    #[error("{line}:{col}: {message}")]
    Syntax {
        line: usize,
        col: usize,
        message: String,
    },
}

impl ParseError {
    pub fn position(&self) -> (usize, usize) {
        match self {
            ParseError::Lex { line, col, .. } | ParseError::Syntax { line, col, .. } => (*line, *col),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Tok {
    Ident(String),
    Int(u64),
    LBrace,
    RBrace,
    Sep,
    Eof,
}

#[derive(Debug, Clone)]
struct Spanned {
    tok: Tok,
    line: usize,
    col: usize,
}

const KEYWORDS: [&str; 7] = ["node", "send", "recv", "to", "from", "for", "inf"];

fn lex(text: &str) -> Result<Vec<Spanned>, ParseError> {
    let mut out = Vec::new();
    let mut chars = text.chars().peekable();
    let (mut line, mut col) = (1usize, 1usize);
    while let Some(&c) = chars.peek() {
        let (l, cl) = (line, col);
        match c {
            '\n' | ',' => {
                chars.next();
                if c == '\n' {
                    line += 1;
                    col = 1;
                } else {
                    col += 1;
                }
                out.push(Spanned { tok: Tok::Sep, line: l, col: cl });
            }
            '#' => {
                while let Some(&c) = chars.peek() {
                    if c == '\n' {
                        break;
                    }
                    chars.next();
                    col += 1;
                }
            }
            '{' | '}' => {
                chars.next();
                col += 1;
                let tok = if c == '{' { Tok::LBrace } else { Tok::RBrace };
                out.push(Spanned { tok, line: l, col: cl });
            }
            c if c.is_whitespace() => {
                chars.next();
                col += 1;
            }
            c if c.is_ascii_digit() => {
                let mut n: u64 = 0;
                while let Some(&d) = chars.peek() {
                    let Some(v) = d.to_digit(10) else { break };
                    n = n
                        .checked_mul(10)
                        .and_then(|n| n.checked_add(v as u64))
                        .ok_or_else(|| ParseError::Syntax {
                            line: l,
                            col: cl,
                            message: "integer literal too large".into(),
                        })?;
                    chars.next();
                    col += 1;
                }
                out.push(Spanned { tok: Tok::Int(n), line: l, col: cl });
            }
            c if c.is_ascii_alphabetic() || c == '_' => {
                let mut s = String::new();
                while let Some(&d) = chars.peek() {
                    if !(d.is_ascii_alphanumeric() || d == '_') {
                        break;
                    }
                    s.push(d);
                    chars.next();
                    col += 1;
                }
                out.push(Spanned { tok: Tok::Ident(s), line: l, col: cl });
            }
            other => {
                return Err(ParseError::Lex {
                    line: l,
                    col: cl,
                    found: other,
                })
            }
        }
    }
    out.push(Spanned { tok: Tok::Eof, line, col });
    Ok(out)
}

enum RawStmt {
    Send { msg: String, peer: String },
    Recv { msg: String, peer: String },
    For(LoopCount, Vec<RawStmt>),
}

struct RawNode {
    name: String,
    body: Vec<RawStmt>,
}

struct Parser {
    toks: Vec<Spanned>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> &Spanned {
        &self.toks[self.pos]
    }

    fn bump(&mut self) -> Spanned {
        let t = self.toks[self.pos].clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn error<T>(&self, at: &Spanned, message: impl Into<String>) -> Result<T, ParseError> {
        Err(ParseError::Syntax {
            line: at.line,
            col: at.col,
            message: message.into(),
        })
    }

    /// Skips separators, reporting whether any were seen.
    fn skip_seps(&mut self) -> bool {
        let mut seen = false;
        while self.peek().tok == Tok::Sep {
            self.bump();
            seen = true;
        }
        seen
    }

    fn keyword(&mut self, kw: &str) -> Result<(), ParseError> {
        let t = self.bump();
        match &t.tok {
            Tok::Ident(s) if s == kw => Ok(()),
            _ => self.error(&t, format!("expected `{kw}`, found {}", describe(&t.tok))),
        }
    }

    fn ident(&mut self, what: &str) -> Result<String, ParseError> {
        let t = self.bump();
        match t.tok {
            Tok::Ident(s) if !KEYWORDS.contains(&s.as_str()) => Ok(s),
            ref tok => self.error(&t, format!("expected {what}, found {}", describe(tok))),
        }
    }

    fn expect(&mut self, tok: Tok) -> Result<(), ParseError> {
        let t = self.bump();
        if t.tok == tok {
            Ok(())
        } else {
            self.error(&t, format!("expected {}, found {}", describe(&tok), describe(&t.tok)))
        }
    }

    fn program(&mut self) -> Result<Vec<RawNode>, ParseError> {
        let mut nodes = Vec::new();
        self.skip_seps();
        loop {
            if self.peek().tok == Tok::Eof {
                if nodes.is_empty() {
                    let t = self.peek().clone();
                    return self.error(&t, "expected `node` (a program needs at least one node)");
                }
                return Ok(nodes);
            }
            nodes.push(self.node()?);
            self.skip_seps();
        }
    }

    fn node(&mut self) -> Result<RawNode, ParseError> {
        self.keyword("node")?;
        let name = self.ident("node name")?;
        self.skip_seps();
        self.expect(Tok::LBrace)?;
        let body = self.block()?;
        Ok(RawNode { name, body })
    }

    /// Statements up to and including the closing brace.
    fn block(&mut self) -> Result<Vec<RawStmt>, ParseError> {
        let mut out = Vec::new();
        let mut separated = true;
        loop {
            separated |= self.skip_seps();
            if self.peek().tok == Tok::RBrace {
                self.bump();
                return Ok(out);
            }
            if !separated {
                let t = self.peek().clone();
                return self.error(&t, "expected newline or `,` between statements");
            }
            out.push(self.stmt()?);
            separated = false;
        }
    }

    fn stmt(&mut self) -> Result<RawStmt, ParseError> {
        let t = self.bump();
        let kw = match &t.tok {
            Tok::Ident(s) => s.as_str(),
            _ => "",
        };
        match kw {
            "send" => {
                let msg = self.ident("message name")?;
                self.keyword("to")?;
                let peer = self.ident("node name")?;
                Ok(RawStmt::Send { msg, peer })
            }
            "recv" => {
                let msg = self.ident("message name")?;
                self.keyword("from")?;
                let peer = self.ident("node name")?;
                Ok(RawStmt::Recv { msg, peer })
            }
            "for" => {
                let c = self.bump();
                let count = match c.tok {
                    Tok::Int(n) => LoopCount::Finite(n),
                    Tok::Ident(ref s) if s == "inf" => LoopCount::Infinite,
                    ref tok => {
                        return self.error(&c, format!("expected loop count, found {}", describe(tok)))
                    }
                };
                self.skip_seps();
                self.expect(Tok::LBrace)?;
                Ok(RawStmt::For(count, self.block()?))
            }
            _ => self.error(
                &t,
                format!("expected `send`, `recv`, `for` or `}}`, found {}", describe(&t.tok)),
            ),
        }
    }
}

fn describe(tok: &Tok) -> String {
    match tok {
        Tok::Ident(s) => format!("`{s}`"),
        Tok::Int(n) => format!("`{n}`"),
        Tok::LBrace => "`{`".into(),
        Tok::RBrace => "`}`".into(),
        Tok::Sep => "separator".into(),
        Tok::Eof => "end of input".into(),
    }
}

struct Names {
    nodes: Vec<String>,
    msgs: Vec<String>,
}

impl Names {
    fn node(&mut self, name: &str) -> NodeId {
        let i = match self.nodes.iter().position(|n| n == name) {
            Some(i) => i,
            None => {
                self.nodes.push(name.to_string());
                self.nodes.len() - 1
            }
        };
        NodeId(i as u32)
    }

    fn msg(&mut self, name: &str) -> MsgId {
        let i = match self.msgs.iter().position(|n| n == name) {
            Some(i) => i,
            None => {
                self.msgs.push(name.to_string());
                self.msgs.len() - 1
            }
        };
        MsgId(i as u32)
    }
}

fn resolve(stmts: Vec<RawStmt>, me: NodeId, names: &mut Names) -> Vec<Statement> {
    stmts
        .into_iter()
        .map(|st| match st {
            RawStmt::Send { msg, peer } => {
                let m = names.msg(&msg);
                Statement::Send(Symbol::new(m, me, names.node(&peer)))
            }
            RawStmt::Recv { msg, peer } => {
                let m = names.msg(&msg);
                Statement::Recv(Symbol::new(m, names.node(&peer), me))
            }
            RawStmt::For(n, body) => Statement::For(n, resolve(body, me, names)),
        })
        .collect()
}

/// Parses program text. The result still has to go through
/// [`validate`](crate::model::validate).
pub fn parse(text: &str) -> Result<Program, ParseError> {
    let mut parser = Parser { toks: lex(text)?, pos: 0 };
    let raw = parser.program()?;
    // Declared nodes take the first ranks; a duplicate declaration gets its
    // own rank so validation can report it.
    let mut names = Names {
        nodes: raw.iter().map(|n| n.name.clone()).collect(),
        msgs: Vec::new(),
    };
    let mut bodies = Vec::with_capacity(raw.len());
    for (i, node) in raw.into_iter().enumerate() {
        bodies.push(resolve(node.body, NodeId(i as u32), &mut names));
    }
    Ok(Program::new(names.nodes, names.msgs, bodies))
}

/// Canonical text: two-space indentation, one statement per line, a blank
/// line between nodes.
pub fn render(program: &Program) -> String {
    let mut out = String::new();
    for node in program.nodes() {
        if node.index() > 0 {
            out.push('\n');
        }
        let _ = writeln!(out, "node {} {{", program.node_name(node));
        render_stmts(program, program.body(node), 1, &mut out);
        out.push_str("}\n");
    }
    out
}

fn render_stmts(program: &Program, stmts: &[Statement], depth: usize, out: &mut String) {
    for st in stmts {
        for _ in 0..depth {
            out.push_str("  ");
        }
        match st {
            Statement::Send(s) => {
                let _ = writeln!(
                    out,
                    "send {} to {}",
                    program.msg_name(s.msg),
                    program.node_name(s.dst)
                );
            }
            Statement::Recv(s) => {
                let _ = writeln!(
                    out,
                    "recv {} from {}",
                    program.msg_name(s.msg),
                    program.node_name(s.src)
                );
            }
            Statement::For(n, body) => {
                let _ = writeln!(out, "for {n} {{");
                render_stmts(program, body, depth + 1, out);
                for _ in 0..depth {
                    out.push_str("  ");
                }
                out.push_str("}\n");
            }
        }
    }
}
