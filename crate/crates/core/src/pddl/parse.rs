use std::collections::HashSet;

use thiserror::Error;

use super::{Effect, PddlAction, PddlDomain, PddlProblem, REQ_NON_DETERMINISTIC, REQ_STRIPS, REQ_TYPING};

const MAX_DEPTH: usize = 128;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PddlError {
    #[error("syntax error at {line}:{column}: {message}")]
    SyntaxError { line: usize, column: usize, message: String },
    #[error("unsupported PDDL feature: {0}")]
    UnsupportedFeature(String),
    #[error("predicate `{0}` is used but not declared")]
    UndeclaredPredicate(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PddlFile {
    Domain(PddlDomain),
    Problem(PddlProblem),
}

#[derive(Debug, Clone, Copy)]
struct Pos {
    line: usize,
    column: usize,
}

#[derive(Debug, Clone)]
enum Sexp {
    Atom(String, Pos),
    List(Vec<Sexp>, Pos),
}

impl Sexp {
    fn pos(&self) -> Pos {
        match self {
            Sexp::Atom(_, p) | Sexp::List(_, p) => *p,
        }
    }

    fn atom(&self) -> Option<&str> {
        match self {
            Sexp::Atom(a, _) => Some(a),
            Sexp::List(..) => None,
        }
    }

    fn keyword(&self) -> Option<String> {
        self.atom().map(str::to_ascii_lowercase)
    }
}

fn err<T>(pos: Pos, message: impl Into<String>) -> Result<T, PddlError> {
    Err(PddlError::SyntaxError {
        line: pos.line,
        column: pos.column,
        message: message.into(),
    })
}

fn read_sexp(text: &str) -> Result<Sexp, PddlError> {
    let mut stack: Vec<(Vec<Sexp>, Pos)> = Vec::new();
    let mut result: Option<Sexp> = None;
    let mut chars = text.char_indices().peekable();
    let (mut line, mut column) = (1usize, 1usize);

    while let Some((i, c)) = chars.next() {
        let pos = Pos { line, column };
        if c == '\n' {
            line += 1;
            column = 1;
        } else {
            column += 1;
        }
        match c {
            ';' => {
                while let Some(&(_, c)) = chars.peek() {
                    if c == '\n' {
                        break;
                    }
                    chars.next();
                }
            }
            '(' => {
                if result.is_some() {
                    return err(pos, "unexpected content after the top-level form");
                }
                if stack.len() >= MAX_DEPTH {
                    return err(pos, "nesting too deep");
                }
                stack.push((Vec::new(), pos));
            }
            ')' => {
                let Some((items, open)) = stack.pop() else {
                    return err(pos, "unbalanced `)`");
                };
                let list = Sexp::List(items, open);
                match stack.last_mut() {
                    Some((parent, _)) => parent.push(list),
                    None => result = Some(list),
                }
            }
            c if c.is_whitespace() => {}
            _ => {
                let mut end = i + c.len_utf8();
                while let Some(&(j, d)) = chars.peek() {
                    if d.is_whitespace() || d == '(' || d == ')' || d == ';' {
                        break;
                    }
                    end = j + d.len_utf8();
                    column += 1;
                    chars.next();
                }
                let atom = Sexp::Atom(text[i..end].to_owned(), pos);
                match stack.last_mut() {
                    Some((parent, _)) => parent.push(atom),
                    None => return err(pos, "expected `(`"),
                }
            }
        }
    }
    if let Some((_, open)) = stack.last() {
        return err(*open, "unclosed `(`");
    }
    result.ok_or(PddlError::SyntaxError {
        line,
        column,
        message: "empty input".into(),
    })
}

/// Parses a domain or a problem in the supported subset.
pub fn parse_pddl(text: &str) -> Result<PddlFile, PddlError> {
    let top = read_sexp(text)?;
    let Sexp::List(items, pos) = &top else {
        return err(top.pos(), "expected `(define ...)`");
    };
    if items.first().and_then(Sexp::keyword).as_deref() != Some("define") {
        return err(*pos, "expected `define`");
    }
    let Some(Sexp::List(header, hpos)) = items.get(1) else {
        return err(*pos, "expected `(domain NAME)` or `(problem NAME)`");
    };
    let (kind, name) = match header.as_slice() {
        [k, Sexp::Atom(n, _)] => (k.keyword(), n.clone()),
        _ => return err(*hpos, "malformed header"),
    };
    match kind.as_deref() {
        Some("domain") => domain(name, &items[2..]).map(PddlFile::Domain),
        Some("problem") => problem(name, &items[2..]).map(PddlFile::Problem),
        _ => err(*hpos, "expected `domain` or `problem`"),
    }
}

pub fn parse_domain(text: &str) -> Result<PddlDomain, PddlError> {
    match parse_pddl(text)? {
        PddlFile::Domain(d) => Ok(d),
        PddlFile::Problem(_) => err(Pos { line: 1, column: 1 }, "expected a domain, found a problem"),
    }
}

pub fn parse_problem(text: &str) -> Result<PddlProblem, PddlError> {
    match parse_pddl(text)? {
        PddlFile::Problem(p) => Ok(p),
        PddlFile::Domain(_) => err(Pos { line: 1, column: 1 }, "expected a problem, found a domain"),
    }
}

fn section(s: &Sexp) -> Result<(String, &[Sexp], Pos), PddlError> {
    match s {
        Sexp::List(items, pos) => match items.first().and_then(Sexp::keyword) {
            Some(k) if k.starts_with(':') => Ok((k, &items[1..], *pos)),
            _ => err(*pos, "expected a `(:section ...)`"),
        },
        Sexp::Atom(_, pos) => err(*pos, "expected a `(:section ...)`"),
    }
}

fn names(items: &[Sexp]) -> Result<Vec<String>, PddlError> {
    items
        .iter()
        .map(|s| match s {
            Sexp::Atom(a, _) => Ok(a.clone()),
            Sexp::List(_, pos) => err(*pos, "expected a name"),
        })
        .collect()
}

fn domain(name: String, sections: &[Sexp]) -> Result<PddlDomain, PddlError> {
    let mut d = PddlDomain {
        name,
        requirements: Vec::new(),
        types: Vec::new(),
        predicates: Vec::new(),
        actions: Vec::new(),
    };
    for s in sections {
        let (key, body, pos) = section(s)?;
        match key.as_str() {
            ":requirements" => {
                for r in names(body)? {
                    let lower = r.to_ascii_lowercase();
                    if ![REQ_STRIPS, REQ_TYPING, REQ_NON_DETERMINISTIC].contains(&lower.as_str()) {
                        return Err(PddlError::UnsupportedFeature(format!("requirement {r}")));
                    }
                    d.requirements.push(r);
                }
            }
            ":types" => d.types = names(body)?,
            ":constants" if body.is_empty() => {}
            ":predicates" => {
                for p in body {
                    match p {
                        Sexp::List(items, pos) => match items.as_slice() {
                            [Sexp::Atom(a, _)] => d.predicates.push(a.clone()),
                            [Sexp::Atom(..), ..] => {
                                return Err(PddlError::UnsupportedFeature("predicate parameters".into()))
                            }
                            _ => return err(*pos, "malformed predicate declaration"),
                        },
                        Sexp::Atom(_, pos) => return err(*pos, "expected `(predicate)`"),
                    }
                }
            }
            ":action" => d.actions.push(action(body, pos)?),
            other => return Err(PddlError::UnsupportedFeature(format!("domain section {other}"))),
        }
    }

    let declared: HashSet<&str> = d.predicates.iter().map(String::as_str).collect();
    for a in &d.actions {
        for p in a.precondition.iter().map(String::as_str).chain(a.effect.atoms()) {
            if !declared.contains(p) {
                return Err(PddlError::UndeclaredPredicate(p.to_owned()));
            }
        }
    }
    Ok(d)
}

fn action(body: &[Sexp], pos: Pos) -> Result<PddlAction, PddlError> {
    let Some(Sexp::Atom(name, _)) = body.first() else {
        return err(pos, "action needs a name");
    };
    let mut precondition = Vec::new();
    let mut effect_tree = Effect::And(Vec::new());
    let mut rest = body[1..].iter();
    while let Some(key) = rest.next() {
        let Some(value) = rest.next() else {
            return err(key.pos(), "keyword without a value");
        };
        match key.keyword().as_deref() {
            Some(":parameters") => match value {
                Sexp::List(items, _) if items.is_empty() => {}
                _ => return Err(PddlError::UnsupportedFeature("action parameters".into())),
            },
            Some(":precondition") => precondition = conjunction(value)?,
            Some(":effect") => effect_tree = effect(value, false)?,
            _ => return err(key.pos(), "expected :parameters, :precondition or :effect"),
        }
    }
    Ok(PddlAction {
        name: name.clone(),
        precondition,
        effect: effect_tree,
    })
}

/// `(and (p) (q))` or a single `(p)`.
fn conjunction(s: &Sexp) -> Result<Vec<String>, PddlError> {
    let Sexp::List(items, pos) = s else {
        return err(s.pos(), "expected a formula");
    };
    match items.first().and_then(Sexp::keyword).as_deref() {
        Some("and") => items[1..].iter().map(positive_atom).collect(),
        Some("not") => Err(PddlError::UnsupportedFeature("negative preconditions".into())),
        Some(k @ ("or" | "imply" | "forall" | "exists" | "when" | "oneof")) => {
            Err(PddlError::UnsupportedFeature(format!("`{k}` in a condition")))
        }
        Some(_) => Ok(vec![positive_atom(s)?]),
        None => err(*pos, "empty formula"),
    }
}

fn positive_atom(s: &Sexp) -> Result<String, PddlError> {
    match s {
        Sexp::List(items, pos) => match items.as_slice() {
            [Sexp::Atom(a, _)] if !is_keyword(a) => Ok(a.clone()),
            [Sexp::Atom(a, _), ..] if a.eq_ignore_ascii_case("not") => {
                Err(PddlError::UnsupportedFeature("negative preconditions".into()))
            }
            [Sexp::Atom(a, _), ..] if is_keyword(a) => {
                Err(PddlError::UnsupportedFeature(format!("`{a}` in a condition")))
            }
            [Sexp::Atom(..), _, ..] => Err(PddlError::UnsupportedFeature("lifted atoms".into())),
            _ => err(*pos, "expected `(predicate)`"),
        },
        Sexp::Atom(_, pos) => err(*pos, "expected `(predicate)`"),
    }
}

fn is_keyword(a: &str) -> bool {
    super::RESERVED_WORDS.contains(&a.to_ascii_lowercase().as_str())
}

fn effect(s: &Sexp, inside_oneof: bool) -> Result<Effect, PddlError> {
    let Sexp::List(items, pos) = s else {
        return err(s.pos(), "expected an effect");
    };
    match items.first().and_then(Sexp::keyword).as_deref() {
        Some("and") => Ok(Effect::And(
            items[1..]
                .iter()
                .map(|e| effect(e, inside_oneof))
                .collect::<Result<_, _>>()?,
        )),
        Some("not") => match items.as_slice() {
            [_, inner] => Ok(Effect::Not(positive_atom(inner)?)),
            _ => err(*pos, "`not` takes one atom"),
        },
        Some("oneof") => {
            if inside_oneof {
                return Err(PddlError::UnsupportedFeature("nested oneof".into()));
            }
            if items.len() < 2 {
                return err(*pos, "`oneof` needs at least one outcome");
            }
            Ok(Effect::OneOf(
                items[1..]
                    .iter()
                    .map(|e| effect(e, true))
                    .collect::<Result<_, _>>()?,
            ))
        }
        Some(k) if is_keyword(k) => Err(PddlError::UnsupportedFeature(format!("`{k}` effects"))),
        Some(_) => Ok(Effect::Add(positive_atom(s)?)),
        None => err(*pos, "empty effect"),
    }
}

fn problem(name: String, sections: &[Sexp]) -> Result<PddlProblem, PddlError> {
    let mut p = PddlProblem {
        name,
        domain_name: String::new(),
        init: Vec::new(),
        goal: Vec::new(),
    };
    let mut have_domain = false;
    for s in sections {
        let (key, body, pos) = section(s)?;
        match key.as_str() {
            ":domain" => match names(body)?.as_slice() {
                [d] => {
                    p.domain_name = d.clone();
                    have_domain = true;
                }
                _ => return err(pos, "expected `(:domain NAME)`"),
            },
            ":objects" if body.is_empty() => {}
            ":init" => p.init = body.iter().map(positive_atom).collect::<Result<_, _>>()?,
            ":goal" => match body {
                [g] => p.goal = conjunction(g)?,
                _ => return err(pos, "expected one goal formula"),
            },
            other => return Err(PddlError::UnsupportedFeature(format!("problem section {other}"))),
        }
    }
    if !have_domain {
        return err(Pos { line: 1, column: 1 }, "problem has no (:domain ...)");
    }
    Ok(p)
}
