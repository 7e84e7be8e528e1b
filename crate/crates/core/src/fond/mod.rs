//! Grounded interpreter and exhaustive solver for the propositional FOND
//! subset: state-space exploration, strong and strong-cyclic policies, trace
//! enumeration and DOT export.

mod dot;
mod explore;
mod solve;
mod traces;

use std::collections::HashMap;

use thiserror::Error;

use crate::pddl::{Effect, PddlDomain, PddlProblem};

pub use dot::export_policy_dot;
pub use explore::{explore, Limits, SafetyViolation, StateSpace, Transition, DEFAULT_MAX_STATES};
pub use solve::{solve, verify_policy, Policy, SolveMode};
pub use traces::{enumerate_traces, Terminal, Trace, TraceLimits, TraceSet, TraceStep};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FondError {
    #[error("{what} limit of {limit} exceeded")]
    LimitExceeded { what: &'static str, limit: usize },
    #[error("no {0} policy exists")]
    Unsolvable(SolveMode),
    #[error("action `{action}` has {count} outcomes; index {index} is out of range")]
    BadOutcomeIndex { action: String, index: usize, count: usize },
    #[error("predicate `{0}` is not declared in the domain")]
    UnknownPredicate(String),
    #[error("problem refers to domain `{found}`, expected `{expected}`")]
    DomainMismatch { expected: String, found: String },
}

/// A set of true predicates, kept as a sorted list of predicate indices.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct GroundState(Vec<u32>);

impl GroundState {
    pub fn new(mut preds: Vec<u32>) -> Self {
        preds.sort_unstable();
        preds.dedup();
        Self(preds)
    }

    pub fn contains(&self, p: u32) -> bool {
        self.0.binary_search(&p).is_ok()
    }

    pub fn preds(&self) -> &[u32] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// One resolved outcome. `adds` and `dels` are sorted and disjoint: a
/// predicate both deleted and added ends up true.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Outcome {
    pub adds: Vec<u32>,
    pub dels: Vec<u32>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroundAction {
    pub name: String,
    pub pre: Vec<u32>,
    pub outcomes: Vec<Outcome>,
}

impl GroundAction {
    pub fn applicable(&self, s: &GroundState) -> bool {
        self.pre.iter().all(|&p| s.contains(p))
    }

    pub fn apply(&self, s: &GroundState, outcome: usize) -> Result<GroundState, FondError> {
        let o = self.outcomes.get(outcome).ok_or_else(|| FondError::BadOutcomeIndex {
            action: self.name.clone(),
            index: outcome,
            count: self.outcomes.len(),
        })?;
        Ok(apply_outcome(s, o))
    }
}

pub(crate) fn apply_outcome(s: &GroundState, o: &Outcome) -> GroundState {
    let mut next: Vec<u32> = s.0.iter().copied().filter(|p| o.dels.binary_search(p).is_err()).collect();
    next.extend_from_slice(&o.adds);
    GroundState::new(next)
}

/// A domain and problem resolved to predicate indices. Actions are sorted by
/// name so that index order is also tie-breaking order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroundTask {
    pub predicates: Vec<String>,
    pub actions: Vec<GroundAction>,
    pub init: GroundState,
    pub goal: Vec<u32>,
}

impl GroundTask {
    pub fn is_goal(&self, s: &GroundState) -> bool {
        self.goal.iter().all(|&p| s.contains(p))
    }

    pub fn action(&self, name: &str) -> Option<&GroundAction> {
        self.actions.iter().find(|a| a.name == name)
    }

    pub fn predicate(&self, name: &str) -> Option<u32> {
        self.predicates.iter().position(|p| p == name).map(|i| i as u32)
    }

    pub fn state_names(&self, s: &GroundState) -> Vec<&str> {
        s.preds().iter().map(|&p| self.predicates[p as usize].as_str()).collect()
    }

    pub fn state_of(&self, names: &[&str]) -> Result<GroundState, FondError> {
        names
            .iter()
            .map(|n| self.predicate(n).ok_or_else(|| FondError::UnknownPredicate((*n).to_owned())))
            .collect::<Result<Vec<_>, _>>()
            .map(GroundState::new)
    }
}

pub fn ground(domain: &PddlDomain, problem: &PddlProblem) -> Result<GroundTask, FondError> {
    if problem.domain_name != domain.name {
        return Err(FondError::DomainMismatch {
            expected: domain.name.clone(),
            found: problem.domain_name.clone(),
        });
    }
    let index: HashMap<&str, u32> = domain
        .predicates
        .iter()
        .enumerate()
        .map(|(i, p)| (p.as_str(), i as u32))
        .collect();
    let lookup = |p: &str| index.get(p).copied().ok_or_else(|| FondError::UnknownPredicate(p.to_owned()));

    let mut actions = Vec::with_capacity(domain.actions.len());
    for a in &domain.actions {
        let pre = a.precondition.iter().map(|p| lookup(p)).collect::<Result<Vec<_>, _>>()?;
        let mut outcomes = Vec::new();
        for (adds, dels) in flatten(&a.effect) {
            let mut adds = adds.iter().map(|p| lookup(p)).collect::<Result<Vec<_>, _>>()?;
            let mut dels = dels.iter().map(|p| lookup(p)).collect::<Result<Vec<_>, _>>()?;
            adds.sort_unstable();
            adds.dedup();
            dels.sort_unstable();
            dels.dedup();
            dels.retain(|p| adds.binary_search(p).is_err());
            outcomes.push(Outcome { adds, dels });
        }
        actions.push(GroundAction {
            name: a.name.clone(),
            pre,
            outcomes,
        });
    }
    actions.sort_by(|a, b| a.name.cmp(&b.name));

    let init = problem.init.iter().map(|p| lookup(p)).collect::<Result<Vec<_>, _>>()?;
    let goal = problem.goal.iter().map(|p| lookup(p)).collect::<Result<Vec<_>, _>>()?;
    Ok(GroundTask {
        predicates: domain.predicates.clone(),
        actions,
        init: GroundState::new(init),
        goal,
    })
}

/// Expands an effect tree into its outcomes: the cartesian product of the
/// choices of every `oneof` in it, each merged with the deterministic part.
fn flatten(e: &Effect) -> Vec<(Vec<&str>, Vec<&str>)> {
    match e {
        Effect::Add(p) => vec![(vec![p.as_str()], Vec::new())],
        Effect::Not(p) => vec![(Vec::new(), vec![p.as_str()])],
        Effect::OneOf(es) => es.iter().flat_map(flatten).collect(),
        Effect::And(es) => {
            let mut acc: Vec<(Vec<&str>, Vec<&str>)> = vec![(Vec::new(), Vec::new())];
            for child in es {
                let parts = flatten(child);
                acc = acc
                    .iter()
                    .flat_map(|(a, d)| {
                        parts.iter().map(move |(pa, pd)| {
                            let mut a = a.clone();
                            a.extend(pa);
                            let mut d = d.clone();
                            d.extend(pd);
                            (a, d)
                        })
                    })
                    .collect();
            }
            acc
        }
    }
}
