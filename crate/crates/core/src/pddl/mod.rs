//! Abstract syntax for the propositional, non-deterministic PDDL subset the
//! encoder emits, plus a deterministic printer and a parser for it.

mod parse;
mod render;

pub use parse::{parse_domain, parse_pddl, parse_problem, PddlError, PddlFile};
pub use render::{render_domain, render_problem};

pub const REQ_STRIPS: &str = ":strips";
pub const REQ_TYPING: &str = ":typing";
pub const REQ_NON_DETERMINISTIC: &str = ":non-deterministic";

/// Words that cannot be used as predicate or action names.
pub const RESERVED_WORDS: &[&str] = &[
    "and", "not", "oneof", "or", "when", "forall", "exists", "imply", "define", "domain", "problem",
    "either", "object", "increase", "decrease", "assign",
];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PddlDomain {
    pub name: String,
    pub requirements: Vec<String>,
    pub types: Vec<String>,
    pub predicates: Vec<String>,
    pub actions: Vec<PddlAction>,
}

impl PddlDomain {
    pub fn action(&self, name: &str) -> Option<&PddlAction> {
        self.actions.iter().find(|a| a.name == name)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PddlAction {
    pub name: String,
    /// Conjunction of positive atoms.
    pub precondition: Vec<String>,
    pub effect: Effect,
}

/// Effect tree. `OneOf` children never contain another `OneOf`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Effect {
    And(Vec<Effect>),
    Add(String),
    Not(String),
    OneOf(Vec<Effect>),
}

impl Effect {
    /// Every predicate the effect mentions, in order of appearance.
    pub fn atoms(&self) -> Vec<&str> {
        let mut out = Vec::new();
        self.collect_atoms(&mut out);
        out
    }

    fn collect_atoms<'a>(&'a self, out: &mut Vec<&'a str>) {
        match self {
            Effect::Add(p) | Effect::Not(p) => out.push(p),
            Effect::And(es) | Effect::OneOf(es) => es.iter().for_each(|e| e.collect_atoms(out)),
        }
    }

    pub fn contains_oneof(&self) -> bool {
        match self {
            Effect::OneOf(_) => true,
            Effect::And(es) => es.iter().any(Effect::contains_oneof),
            _ => false,
        }
    }

    /// The `OneOf` nodes reachable without crossing another `OneOf`.
    pub fn oneofs(&self) -> Vec<&[Effect]> {
        match self {
            Effect::OneOf(es) => vec![es.as_slice()],
            Effect::And(es) => es.iter().flat_map(Effect::oneofs).collect(),
            _ => Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PddlProblem {
    pub name: String,
    pub domain_name: String,
    pub init: Vec<String>,
    pub goal: Vec<String>,
}
