//! Structured program representation.
//!
//! Programs are trees of instruction-class counts: straight-line blocks,
//! sequences, two-way branches (optionally marked secret-dependent), and
//! counted loops with statically known bounds. The on-disk form is an
//! s-expression (`.ir` files):
//!
//! ```text
//! (prog NAME node)
//! node := (ops CLASS COUNT ...)
//!       | (seq node ...)
//!       | (if [secret] (ops ...) node node)
//!       | (loop BOUND node)
//! ```
//!
//! `;` starts a line comment. Counts are nonnegative integers; loop bounds
//! are at least 1.

use crate::diag::Loc;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use thiserror::Error;

/// Instruction-class counts of a straight-line block.
pub type OpCounts = BTreeMap<String, u64>;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Node {
    Ops(OpCounts),
    Seq(Vec<Node>),
    If {
        secret: bool,
        cond: OpCounts,
        then_arm: Box<Node>,
        else_arm: Box<Node>,
    },
    Loop {
        bound: u64,
        body: Box<Node>,
    },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Program {
    pub name: String,
    pub body: Node,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum IrError {
    #[error("{loc}: syntax error: {message}")]
    Syntax { loc: Loc, message: String },
    #[error("{loc}: negative instruction count {value}")]
    NegativeCount { loc: Loc, value: i64 },
    #[error("{loc}: loop bound must be at least 1")]
    ZeroLoopBound { loc: Loc },
}

impl Program {
    /// All instruction classes mentioned anywhere in the program.
    pub fn classes(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        collect_classes(&self.body, &mut out);
        out
    }
}

fn collect_classes(node: &Node, out: &mut BTreeSet<String>) {
    match node {
        Node::Ops(counts) => out.extend(counts.keys().cloned()),
        Node::Seq(items) => items.iter().for_each(|n| collect_classes(n, out)),
        Node::If {
            cond,
            then_arm,
            else_arm,
            ..
        } => {
            out.extend(cond.keys().cloned());
            collect_classes(then_arm, out);
            collect_classes(else_arm, out);
        }
        Node::Loop { body, .. } => collect_classes(body, out),
    }
}

/// Remove every occurrence of `class` from the program's op counts.
///
/// Used to derive the "padding removed" variant of a task.
pub fn strip_class(program: &Program, class: &str) -> Program {
    Program {
        name: program.name.clone(),
        body: strip_node(&program.body, class),
    }
}

fn strip_node(node: &Node, class: &str) -> Node {
    let strip_counts = |counts: &OpCounts| -> OpCounts {
        counts
            .iter()
            .filter(|(c, _)| c.as_str() != class)
            .map(|(c, n)| (c.clone(), *n))
            .collect()
    };
    match node {
        Node::Ops(counts) => Node::Ops(strip_counts(counts)),
        Node::Seq(items) => Node::Seq(items.iter().map(|n| strip_node(n, class)).collect()),
        Node::If {
            secret,
            cond,
            then_arm,
            else_arm,
        } => Node::If {
            secret: *secret,
            cond: strip_counts(cond),
            then_arm: Box::new(strip_node(then_arm, class)),
            else_arm: Box::new(strip_node(else_arm, class)),
        },
        Node::Loop { bound, body } => Node::Loop {
            bound: *bound,
            body: Box::new(strip_node(body, class)),
        },
    }
}

// ---------------------------------------------------------------------------
// Parsing
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    LParen,
    RParen,
    Atom(String),
}

struct Lexer {
    toks: Vec<(Tok, Loc)>,
    pos: usize,
    end: Loc,
}

fn lex(text: &str) -> Lexer {
    let mut toks = Vec::new();
    let mut line = 1u32;
    let mut col = 1u32;
    let mut chars = text.chars().peekable();
    let mut end = Loc::new(1, 1);
    while let Some(c) = chars.next() {
        let loc = Loc::new(line, col);
        match c {
            '\n' => {
                line += 1;
                col = 1;
                continue;
            }
            ';' => {
                for c2 in chars.by_ref() {
                    if c2 == '\n' {
                        line += 1;
                        col = 1;
                        break;
                    }
                }
                continue;
            }
            '(' => toks.push((Tok::LParen, loc)),
            ')' => toks.push((Tok::RParen, loc)),
            c if c.is_whitespace() => {}
            _ => {
                let mut atom = String::new();
                atom.push(c);
                let mut width = 1;
                while let Some(&c2) = chars.peek() {
                    if c2.is_whitespace() || c2 == '(' || c2 == ')' || c2 == ';' {
                        break;
                    }
                    atom.push(c2);
                    chars.next();
                    width += 1;
                }
                toks.push((Tok::Atom(atom), loc));
                col += width;
                end = Loc::new(line, col);
                continue;
            }
        }
        col += 1;
        end = Loc::new(line, col);
    }
    Lexer { toks, pos: 0, end }
}

impl Lexer {
    fn peek(&self) -> Option<&(Tok, Loc)> {
        self.toks.get(self.pos)
    }

    fn next(&mut self) -> Option<(Tok, Loc)> {
        let t = self.toks.get(self.pos).cloned();
        if t.is_some() {
            self.pos += 1;
        }
        t
    }

    fn here(&self) -> Loc {
        self.peek().map(|(_, l)| *l).unwrap_or(self.end)
    }

    fn expect_lparen(&mut self, what: &str) -> Result<Loc, IrError> {
        match self.next() {
            Some((Tok::LParen, loc)) => Ok(loc),
            Some((t, loc)) => Err(syntax(loc, format!("expected '(' to open {what}, found {t:?}"))),
            None => Err(syntax(self.end, format!("expected '(' to open {what}, found end of input"))),
        }
    }

    fn expect_rparen(&mut self, what: &str) -> Result<(), IrError> {
        match self.next() {
            Some((Tok::RParen, _)) => Ok(()),
            Some((t, loc)) => Err(syntax(loc, format!("expected ')' to close {what}, found {t:?}"))),
            None => Err(syntax(self.end, format!("unclosed {what}"))),
        }
    }

    fn expect_atom(&mut self, what: &str) -> Result<(String, Loc), IrError> {
        match self.next() {
            Some((Tok::Atom(a), loc)) => Ok((a, loc)),
            Some((t, loc)) => Err(syntax(loc, format!("expected {what}, found {t:?}"))),
            None => Err(syntax(self.end, format!("expected {what}, found end of input"))),
        }
    }
}

fn syntax(loc: Loc, message: impl Into<String>) -> IrError {
    IrError::Syntax {
        loc,
        message: message.into(),
    }
}

/// Parse the `.ir` s-expression form of a program.
pub fn parse_program(text: &str) -> Result<Program, IrError> {
    let mut lx = lex(text);
    lx.expect_lparen("program")?;
    let (head, head_loc) = lx.expect_atom("'prog'")?;
    if head != "prog" {
        return Err(syntax(head_loc, format!("expected 'prog', found '{head}'")));
    }
    let (name, _) = lx.expect_atom("program name")?;
    let body = parse_node(&mut lx)?;
    lx.expect_rparen("program")?;
    if let Some((t, loc)) = lx.peek() {
        return Err(syntax(*loc, format!("trailing input after program: {t:?}")));
    }
    Ok(Program { name, body })
}

fn parse_node(lx: &mut Lexer) -> Result<Node, IrError> {
    lx.expect_lparen("node")?;
    let (head, head_loc) = lx.expect_atom("node kind")?;
    match head.as_str() {
        "ops" => {
            let counts = parse_ops_tail(lx)?;
            Ok(Node::Ops(counts))
        }
        "seq" => {
            let mut items = Vec::new();
            while let Some((Tok::LParen, _)) = lx.peek() {
                items.push(parse_node(lx)?);
            }
            lx.expect_rparen("seq")?;
            Ok(Node::Seq(items))
        }
        "if" => {
            let secret = matches!(lx.peek(), Some((Tok::Atom(a), _)) if a == "secret");
            if secret {
                lx.next();
            }
            let cond_open = lx.here();
            lx.expect_lparen("branch condition")?;
            let (kind, kind_loc) = lx.expect_atom("'ops'")?;
            if kind != "ops" {
                return Err(syntax(
                    kind_loc,
                    format!("branch condition must be an ops block, found '{kind}'"),
                ));
            }
            let cond = parse_ops_tail(lx).map_err(|e| match e {
                IrError::Syntax { .. } => syntax(cond_open, "malformed branch condition"),
                other => other,
            })?;
            let then_arm = parse_node(lx)?;
            let else_arm = parse_node(lx)?;
            lx.expect_rparen("if")?;
            Ok(Node::If {
                secret,
                cond,
                then_arm: Box::new(then_arm),
                else_arm: Box::new(else_arm),
            })
        }
        "loop" => {
            let (bound_txt, bound_loc) = lx.expect_atom("loop bound")?;
            let bound = parse_count(&bound_txt, bound_loc)?;
            if bound == 0 {
                return Err(IrError::ZeroLoopBound { loc: bound_loc });
            }
            let body = parse_node(lx)?;
            lx.expect_rparen("loop")?;
            Ok(Node::Loop {
                bound,
                body: Box::new(body),
            })
        }
        other => Err(syntax(head_loc, format!("unknown node kind '{other}'"))),
    }
}

fn parse_ops_tail(lx: &mut Lexer) -> Result<OpCounts, IrError> {
    let mut counts = OpCounts::new();
    loop {
        match lx.peek() {
            Some((Tok::RParen, _)) => {
                lx.next();
                return Ok(counts);
            }
            Some((Tok::Atom(_), _)) => {
                let (class, class_loc) = lx.expect_atom("instruction class")?;
                if class.chars().next().map(|c| c.is_ascii_digit() || c == '-') == Some(true) {
                    return Err(syntax(
                        class_loc,
                        format!("expected instruction class name, found '{class}'"),
                    ));
                }
                let (count_txt, count_loc) = lx.expect_atom("count")?;
                let count = parse_count(&count_txt, count_loc)?;
                *counts.entry(class).or_insert(0) += count;
            }
            Some((Tok::LParen, loc)) => {
                return Err(syntax(*loc, "ops block cannot contain nested nodes"));
            }
            None => return Err(syntax(lx.end, "unclosed ops block")),
        }
    }
}

fn parse_count(text: &str, loc: Loc) -> Result<u64, IrError> {
    if let Ok(v) = text.parse::<u64>() {
        return Ok(v);
    }
    if let Ok(v) = text.parse::<i64>() {
        if v < 0 {
            return Err(IrError::NegativeCount { loc, value: v });
        }
    }
    Err(syntax(loc, format!("expected nonnegative integer, found '{text}'")))
}

// ---------------------------------------------------------------------------
// Rendering
// ---------------------------------------------------------------------------

/// Canonical text form; `parse_program(render_program(p)) == p`.
pub fn render_program(program: &Program) -> String {
    let mut out = String::new();
    let _ = write!(out, "(prog {}", program.name);
    render_node(&program.body, 1, &mut out);
    out.push_str(")\n");
    out
}

fn render_node(node: &Node, depth: usize, out: &mut String) {
    let pad = "  ".repeat(depth);
    match node {
        Node::Ops(counts) => {
            let _ = write!(out, "\n{pad}{}", ops_inline(counts));
        }
        Node::Seq(items) => {
            let _ = write!(out, "\n{pad}(seq");
            for item in items {
                render_node(item, depth + 1, out);
            }
            out.push(')');
        }
        Node::If {
            secret,
            cond,
            then_arm,
            else_arm,
        } => {
            let tag = if *secret { "if secret " } else { "if " };
            let _ = write!(out, "\n{pad}({tag}{}", ops_inline(cond));
            render_node(then_arm, depth + 1, out);
            render_node(else_arm, depth + 1, out);
            out.push(')');
        }
        Node::Loop { bound, body } => {
            let _ = write!(out, "\n{pad}(loop {bound}");
            render_node(body, depth + 1, out);
            out.push(')');
        }
    }
}

fn ops_inline(counts: &OpCounts) -> String {
    let mut s = String::from("(ops");
    for (class, count) in counts {
        let _ = write!(s, " {class} {count}");
    }
    s.push(')');
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ops(pairs: &[(&str, u64)]) -> OpCounts {
        pairs.iter().map(|(c, n)| (c.to_string(), *n)).collect()
    }

    #[test]
    fn parses_empty_program() {
        let p = parse_program("(prog p (ops))").unwrap();
        assert_eq!(p.name, "p");
        assert_eq!(p.body, Node::Ops(OpCounts::new()));
    }

    #[test]
    fn parses_seq_with_loop() {
        let p = parse_program("(prog p (seq (ops alu 3) (loop 8 (ops mul 2))))").unwrap();
        assert_eq!(
            p.body,
            Node::Seq(vec![
                Node::Ops(ops(&[("alu", 3)])),
                Node::Loop {
                    bound: 8,
                    body: Box::new(Node::Ops(ops(&[("mul", 2)]))),
                },
            ])
        );
    }

    #[test]
    fn rejects_zero_loop_bound() {
        let err = parse_program("(prog p (loop 0 (ops)))").unwrap_err();
        assert!(matches!(err, IrError::ZeroLoopBound { .. }));
    }

    #[test]
    fn rejects_negative_count_with_location() {
        let err = parse_program("(prog p (ops alu -3))").unwrap_err();
        match err {
            IrError::NegativeCount { loc, value } => {
                assert_eq!(value, -3);
                assert_eq!(loc.line, 1);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn parses_secret_if() {
        let p = parse_program("(prog p (if secret (ops branch 1) (ops alu 3) (ops alu 1)))").unwrap();
        match p.body {
            Node::If { secret, cond, .. } => {
                assert!(secret);
                assert_eq!(cond, ops(&[("branch", 1)]));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn plain_if_is_not_secret() {
        let p = parse_program("(prog p (if (ops branch 1) (ops) (ops)))").unwrap();
        assert!(matches!(p.body, Node::If { secret: false, .. }));
    }

    #[test]
    fn duplicate_ops_classes_accumulate() {
        let p = parse_program("(prog p (ops alu 1 alu 2))").unwrap();
        assert_eq!(p.body, Node::Ops(ops(&[("alu", 3)])));
    }

    #[test]
    fn comments_are_skipped() {
        let p = parse_program("; header\n(prog p ; inline\n  (ops alu 1))").unwrap();
        assert_eq!(p.body, Node::Ops(ops(&[("alu", 1)])));
    }

    #[test]
    fn trailing_garbage_is_an_error() {
        assert!(matches!(
            parse_program("(prog p (ops)) x"),
            Err(IrError::Syntax { .. })
        ));
    }

    #[test]
    fn render_round_trips() {
        let text = "(prog demo (seq (ops alu 3 load 1) (if secret (ops branch 1) (seq (ops mul 2) (loop 3 (ops alu 1))) (ops nop 4)) (loop 8 (ops store 2))))";
        let p = parse_program(text).unwrap();
        let rendered = render_program(&p);
        let reparsed = parse_program(&rendered).unwrap();
        assert_eq!(p, reparsed);
    }

    #[test]
    fn strip_class_removes_only_that_class() {
        let p = parse_program("(prog p (seq (ops alu 2 nop 5) (loop 2 (ops nop 1))))").unwrap();
        let stripped = strip_class(&p, "nop");
        assert_eq!(
            stripped.body,
            Node::Seq(vec![
                Node::Ops(ops(&[("alu", 2)])),
                Node::Loop {
                    bound: 2,
                    body: Box::new(Node::Ops(OpCounts::new())),
                },
            ])
        );
    }
}
