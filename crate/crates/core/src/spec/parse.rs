//! Lexer and recursive-descent parser for `.ets` spec files.

use super::{
    collect_violations, ContractSet, SecurityLevel, Spanned, SpecError, TaskDecl, TaskGraphSpec,
};
use crate::diag::Loc;

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Number(f64),
    Str(String),
    LBrace,
    RBrace,
    Semi,
    Comma,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Ident(s) => format!("'{s}'"),
            Tok::Number(n) => format!("number {n}"),
            Tok::Str(s) => format!("\"{s}\""),
            Tok::LBrace => "'{'".into(),
            Tok::RBrace => "'}'".into(),
            Tok::Semi => "';'".into(),
            Tok::Comma => "','".into(),
        }
    }
}

fn syntax(loc: Loc, message: impl Into<String>) -> SpecError {
    SpecError::Syntax {
        loc,
        message: message.into(),
    }
}

fn lex(text: &str) -> Result<Vec<(Tok, Loc)>, SpecError> {
    let mut toks = Vec::new();
    let mut line = 1u32;
    let mut col = 1u32;
    let mut chars = text.chars().peekable();
    while let Some(c) = chars.next() {
        let loc = Loc::new(line, col);
        match c {
            '\n' => {
                line += 1;
                col = 1;
            }
            c if c.is_whitespace() => col += 1,
            '/' => {
                if chars.peek() == Some(&'/') {
                    for c2 in chars.by_ref() {
                        if c2 == '\n' {
                            break;
                        }
                    }
                    line += 1;
                    col = 1;
                } else {
                    return Err(syntax(loc, "unexpected character '/'"));
                }
            }
            '{' => {
                toks.push((Tok::LBrace, loc));
                col += 1;
            }
            '}' => {
                toks.push((Tok::RBrace, loc));
                col += 1;
            }
            ';' => {
                toks.push((Tok::Semi, loc));
                col += 1;
            }
            ',' => {
                toks.push((Tok::Comma, loc));
                col += 1;
            }
            '"' => {
                let mut s = String::new();
                let mut closed = false;
                let mut width = 1u32;
                for c2 in chars.by_ref() {
                    width += 1;
                    if c2 == '"' {
                        closed = true;
                        break;
                    }
                    if c2 == '\n' {
                        return Err(syntax(loc, "unterminated string literal"));
                    }
                    s.push(c2);
                }
                if !closed {
                    return Err(syntax(loc, "unterminated string literal"));
                }
                toks.push((Tok::Str(s), loc));
                col += width;
            }
            c if c.is_ascii_digit() => {
                let mut raw = String::new();
                raw.push(c);
                let mut seen_dot = false;
                while let Some(&c2) = chars.peek() {
                    if c2.is_ascii_digit() || (c2 == '.' && !seen_dot) {
                        seen_dot |= c2 == '.';
                        raw.push(c2);
                        chars.next();
                    } else {
                        break;
                    }
                }
                let value: f64 = raw
                    .parse()
                    .map_err(|_| syntax(loc, format!("malformed number '{raw}'")))?;
                col += raw.len() as u32;
                toks.push((Tok::Number(value), loc));
            }
            c if c.is_ascii_alphabetic() || c == '_' => {
                let mut s = String::new();
                s.push(c);
                while let Some(&c2) = chars.peek() {
                    if c2.is_ascii_alphanumeric() || c2 == '_' {
                        s.push(c2);
                        chars.next();
                    } else {
                        break;
                    }
                }
                col += s.len() as u32;
                toks.push((Tok::Ident(s), loc));
            }
            other => return Err(syntax(loc, format!("unexpected character '{other}'"))),
        }
    }
    Ok(toks)
}

struct Parser {
    toks: Vec<(Tok, Loc)>,
    pos: usize,
    end: Loc,
}

impl Parser {
    fn peek(&self) -> Option<&(Tok, Loc)> {
        self.toks.get(self.pos)
    }

    fn bump(&mut self) -> Option<(Tok, Loc)> {
        let t = self.toks.get(self.pos).cloned();
        if t.is_some() {
            self.pos += 1;
        }
        t
    }

    fn expect_ident(&mut self, what: &str) -> Result<(String, Loc), SpecError> {
        match self.bump() {
            Some((Tok::Ident(s), loc)) => Ok((s, loc)),
            Some((t, loc)) => Err(syntax(loc, format!("expected {what}, found {}", t.describe()))),
            None => Err(syntax(self.end, format!("expected {what}, found end of input"))),
        }
    }

    fn expect_keyword(&mut self, kw: &str) -> Result<Loc, SpecError> {
        let (ident, loc) = self.expect_ident(&format!("'{kw}'"))?;
        if ident == kw {
            Ok(loc)
        } else {
            Err(syntax(loc, format!("expected '{kw}', found '{ident}'")))
        }
    }

    fn expect_string(&mut self, what: &str) -> Result<(String, Loc), SpecError> {
        match self.bump() {
            Some((Tok::Str(s), loc)) => Ok((s, loc)),
            Some((t, loc)) => Err(syntax(loc, format!("expected {what}, found {}", t.describe()))),
            None => Err(syntax(self.end, format!("expected {what}, found end of input"))),
        }
    }

    fn expect_number(&mut self, what: &str) -> Result<(f64, Loc), SpecError> {
        match self.bump() {
            Some((Tok::Number(n), loc)) => Ok((n, loc)),
            Some((t, loc)) => Err(syntax(loc, format!("expected {what}, found {}", t.describe()))),
            None => Err(syntax(self.end, format!("expected {what}, found end of input"))),
        }
    }

    fn expect_tok(&mut self, tok: Tok, what: &str) -> Result<Loc, SpecError> {
        match self.bump() {
            Some((t, loc)) if t == tok => Ok(loc),
            Some((t, loc)) => Err(syntax(loc, format!("expected {what}, found {}", t.describe()))),
            None => Err(syntax(self.end, format!("expected {what}, found end of input"))),
        }
    }

    fn expect_unit(&mut self, unit: &str) -> Result<(), SpecError> {
        let (ident, loc) = self.expect_ident(&format!("unit '{unit}'"))?;
        if ident == unit {
            Ok(())
        } else {
            Err(syntax(loc, format!("expected unit '{unit}', found '{ident}'")))
        }
    }
}

/// Parse and fully validate a spec. The returned spec satisfies every
/// invariant; the first violation (in source order) is returned otherwise.
pub fn parse_spec(text: &str) -> Result<TaskGraphSpec, SpecError> {
    let spec = parse_spec_syntax_only(text)?;
    let mut violations = collect_violations(&spec);
    violations.sort_by_key(|e| e.loc());
    match violations.into_iter().next() {
        Some(err) => Err(err),
        None => Ok(spec),
    }
}

/// Parse without semantic validation; used to build specs whose invariant
/// violations are then reported by `validate_spec`.
pub(crate) fn parse_spec_syntax_only(text: &str) -> Result<TaskGraphSpec, SpecError> {
    let toks = lex(text)?;
    let end = toks
        .last()
        .map(|(_, l)| Loc::new(l.line, l.col + 1))
        .unwrap_or(Loc::new(1, 1));
    let mut p = Parser { toks, pos: 0, end };

    p.expect_keyword("platform")?;
    let (platform_name, _) = p.expect_string("platform name string")?;

    let mut tasks = Vec::new();
    let mut system_contract = None;
    while let Some((tok, loc)) = p.peek().cloned() {
        match tok {
            Tok::Ident(kw) if kw == "task" => {
                p.bump();
                tasks.push(parse_task(&mut p)?);
            }
            Tok::Ident(kw) if kw == "system" => {
                p.bump();
                system_contract = Some(parse_system(&mut p)?);
                if let Some((t, loc)) = p.peek() {
                    return Err(syntax(
                        *loc,
                        format!(
                            "the system block must be last; found {} after it",
                            t.describe()
                        ),
                    ));
                }
            }
            other => {
                return Err(syntax(
                    loc,
                    format!("expected 'task' or 'system', found {}", other.describe()),
                ))
            }
        }
    }

    Ok(TaskGraphSpec {
        platform_name,
        tasks,
        system_contract,
    })
}

struct ClauseSet {
    after: Vec<Spanned<String>>,
    contracts: ContractSet,
    period: Option<Spanned<f64>>,
    impl_ref: Option<Spanned<String>>,
}

fn parse_task(p: &mut Parser) -> Result<TaskDecl, SpecError> {
    let (name, name_loc) = p.expect_ident("task name")?;
    if name == super::SYSTEM_SUBJECT {
        return Err(syntax(name_loc, "task name 'system' is reserved"));
    }
    p.expect_tok(Tok::LBrace, "'{'")?;
    let clauses = parse_clauses(p, &name, false)?;
    let impl_ref = clauses
        .impl_ref
        .map(|s| s.value)
        .unwrap_or_else(|| format!("{name}.ir"));
    Ok(TaskDecl {
        name,
        name_loc,
        after: clauses.after,
        impl_ref,
        contracts: clauses.contracts,
        period_ms: clauses.period,
    })
}

fn parse_system(p: &mut Parser) -> Result<ContractSet, SpecError> {
    p.expect_tok(Tok::LBrace, "'{'")?;
    let clauses = parse_clauses(p, super::SYSTEM_SUBJECT, true)?;
    Ok(clauses.contracts)
}

fn parse_clauses(p: &mut Parser, owner: &str, system: bool) -> Result<ClauseSet, SpecError> {
    let mut set = ClauseSet {
        after: Vec::new(),
        contracts: ContractSet::default(),
        period: None,
        impl_ref: None,
    };
    loop {
        match p.peek().cloned() {
            Some((Tok::RBrace, _)) => {
                p.bump();
                return Ok(set);
            }
            Some((Tok::Ident(kw), loc)) => {
                p.bump();
                if system && matches!(kw.as_str(), "after" | "period" | "impl") {
                    return Err(syntax(
                        loc,
                        format!("clause '{kw}' is not allowed in the system block"),
                    ));
                }
                match kw.as_str() {
                    "after" => loop {
                        let (dep, dep_loc) = p.expect_ident("task name")?;
                        if !set.after.iter().any(|s| s.value == dep) {
                            set.after.push(Spanned::new(dep, dep_loc));
                        }
                        match p.bump() {
                            Some((Tok::Comma, _)) => continue,
                            Some((Tok::Semi, _)) => break,
                            Some((t, loc)) => {
                                return Err(syntax(
                                    loc,
                                    format!("expected ',' or ';', found {}", t.describe()),
                                ))
                            }
                            None => return Err(syntax(p.end, "expected ',' or ';', found end of input")),
                        }
                    },
                    "deadline" => {
                        no_dup(&kw, loc, set.contracts.deadline_ms.is_some())?;
                        let (v, _) = p.expect_number("deadline value")?;
                        p.expect_unit("ms")?;
                        p.expect_tok(Tok::Semi, "';'")?;
                        set.contracts.deadline_ms = Some(Spanned::new(v, loc));
                    }
                    "energy" => {
                        no_dup(&kw, loc, set.contracts.energy_budget_mj.is_some())?;
                        let (v, _) = p.expect_number("energy value")?;
                        p.expect_unit("mJ")?;
                        p.expect_tok(Tok::Semi, "';'")?;
                        set.contracts.energy_budget_mj = Some(Spanned::new(v, loc));
                    }
                    "period" => {
                        no_dup(&kw, loc, set.period.is_some())?;
                        let (v, _) = p.expect_number("period value")?;
                        p.expect_unit("ms")?;
                        p.expect_tok(Tok::Semi, "';'")?;
                        set.period = Some(Spanned::new(v, loc));
                    }
                    "security" => {
                        no_dup(&kw, loc, set.contracts.security.is_some())?;
                        let (level_txt, level_loc) = p.expect_ident("security level")?;
                        let level = match level_txt.as_str() {
                            "none" => SecurityLevel::None,
                            "constant_time" => SecurityLevel::ConstantTime,
                            "constant_energy" => SecurityLevel::ConstantEnergy,
                            "constant_both" => SecurityLevel::ConstantBoth,
                            other => {
                                return Err(syntax(
                                    level_loc,
                                    format!(
                                        "unknown security level '{other}' (expected none, \
                                         constant_time, constant_energy, or constant_both)"
                                    ),
                                ))
                            }
                        };
                        p.expect_tok(Tok::Semi, "';'")?;
                        set.contracts.security = Some(Spanned::new(level, loc));
                    }
                    "impl" => {
                        no_dup(&kw, loc, set.impl_ref.is_some())?;
                        let (path, path_loc) = p.expect_string("impl path string")?;
                        if path.is_empty() {
                            return Err(syntax(path_loc, "impl path must be nonempty"));
                        }
                        p.expect_tok(Tok::Semi, "';'")?;
                        set.impl_ref = Some(Spanned::new(path, loc));
                    }
                    other => {
                        return Err(syntax(
                            loc,
                            format!("unknown clause '{other}' in '{owner}'"),
                        ))
                    }
                }
            }
            Some((t, loc)) => {
                return Err(syntax(
                    loc,
                    format!("expected a clause or '}}', found {}", t.describe()),
                ))
            }
            None => return Err(syntax(p.end, format!("unclosed block for '{owner}'"))),
        }
    }
}

fn no_dup(kw: &str, loc: Loc, already: bool) -> Result<(), SpecError> {
    if already {
        Err(syntax(loc, format!("duplicate '{kw}' clause")))
    } else {
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reports_duplicate_task_with_location() {
        let err = parse_spec("platform \"p\" task a { } task a { }").unwrap_err();
        match err {
            SpecError::DuplicateTask { name, loc } => {
                assert_eq!(name, "a");
                assert_eq!(loc.line, 1);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn mixed_units_are_a_parse_error() {
        let err = parse_spec("platform \"p\" task a { deadline 5 mJ; }").unwrap_err();
        assert!(err.to_string().contains("expected unit 'ms'"));
    }

    #[test]
    fn zero_deadline_is_rejected() {
        let err = parse_spec("platform \"p\" task a { deadline 0 ms; }").unwrap_err();
        assert!(err.to_string().contains("strictly positive"));
    }

    #[test]
    fn duplicate_clause_is_rejected() {
        let err =
            parse_spec("platform \"p\" task a { deadline 1 ms; deadline 2 ms; }").unwrap_err();
        assert!(err.to_string().contains("duplicate 'deadline' clause"));
    }

    #[test]
    fn system_block_rejects_task_clauses() {
        let err = parse_spec("platform \"p\" system { after a; }").unwrap_err();
        assert!(err.to_string().contains("not allowed in the system block"));
    }

    #[test]
    fn system_must_be_last() {
        let err = parse_spec("platform \"p\" system { } task a { }").unwrap_err();
        assert!(err.to_string().contains("must be last"));
    }

    #[test]
    fn reserved_task_name() {
        let err = parse_spec("platform \"p\" task system { }").unwrap_err();
        assert!(err.to_string().contains("reserved"));
    }

    #[test]
    fn empty_impl_path_is_rejected() {
        let err = parse_spec("platform \"p\" task a { impl \"\"; }").unwrap_err();
        assert!(err.to_string().contains("nonempty"));
    }

    #[test]
    fn comments_are_skipped() {
        let spec = parse_spec("// header\nplatform \"p\" // trailing\ntask a { }").unwrap();
        assert_eq!(spec.tasks.len(), 1);
    }

    #[test]
    fn error_locations_are_one_based() {
        let err = parse_spec("platform \"p\"\ntask a {\n  bogus 1 ms;\n}").unwrap_err();
        assert_eq!(err.loc(), Loc::new(3, 3));
    }

    #[test]
    fn after_list_accepts_multiple_names() {
        let spec = parse_spec(
            "platform \"p\" task a { } task b { } task c { after a, b; }",
        )
        .unwrap();
        let names: Vec<&str> = spec.tasks[2].after.iter().map(|s| s.value.as_str()).collect();
        assert_eq!(names, vec!["a", "b"]);
    }

    #[test]
    fn duplicate_after_names_are_collapsed() {
        let spec = parse_spec("platform \"p\" task a { } task b { after a, a; }").unwrap();
        assert_eq!(spec.tasks[1].after.len(), 1);
    }
}
