use std::collections::{HashMap, VecDeque};

use super::{apply_outcome, FondError, GroundState, GroundTask};

pub const DEFAULT_MAX_STATES: usize = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Limits {
    pub max_states: usize,
}

impl Default for Limits {
    fn default() -> Self {
        Self {
            max_states: DEFAULT_MAX_STATES,
        }
    }
}

/// An applicable action and the state index reached by each outcome.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Transition {
    pub action: usize,
    pub successors: Vec<usize>,
}

/// An outcome that adds a predicate which is already true and not deleted by
/// the same outcome.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SafetyViolation {
    pub state: usize,
    pub action: usize,
    pub outcome: usize,
    pub predicate: u32,
}

#[derive(Debug, Clone, Default)]
pub struct StateSpace {
    /// States in BFS order; index 0 is the initial state.
    pub states: Vec<GroundState>,
    pub index: HashMap<GroundState, usize>,
    /// Per state, its applicable actions in name order. Goal states are not
    /// expanded and have none.
    pub transitions: Vec<Vec<Transition>>,
    pub goal: Vec<bool>,
    /// Non-goal states without applicable actions.
    pub deadlocks: Vec<usize>,
    pub violations: Vec<SafetyViolation>,
}

impl StateSpace {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn transition_count(&self) -> usize {
        self.transitions.iter().map(Vec::len).sum()
    }

    pub fn goal_states(&self) -> impl Iterator<Item = usize> + '_ {
        self.goal.iter().enumerate().filter(|(_, g)| **g).map(|(i, _)| i)
    }
}

/// Breadth-first search over every outcome of every applicable action.
pub fn explore(task: &GroundTask, limits: &Limits) -> Result<StateSpace, FondError> {
    let mut space = StateSpace::default();
    let mut queue = VecDeque::new();
    intern(&mut space, task, task.init.clone(), &mut queue, limits)?;

    while let Some(s) = queue.pop_front() {
        if space.goal[s] {
            continue;
        }
        let state = space.states[s].clone();
        let mut transitions = Vec::new();
        for (ai, action) in task.actions.iter().enumerate() {
            if !action.applicable(&state) {
                continue;
            }
            let mut successors = Vec::with_capacity(action.outcomes.len());
            for (oi, o) in action.outcomes.iter().enumerate() {
                for &p in &o.adds {
                    if state.contains(p) && o.dels.binary_search(&p).is_err() {
                        space.violations.push(SafetyViolation {
                            state: s,
                            action: ai,
                            outcome: oi,
                            predicate: p,
                        });
                    }
                }
                let next = apply_outcome(&state, o);
                successors.push(intern(&mut space, task, next, &mut queue, limits)?);
            }
            transitions.push(Transition { action: ai, successors });
        }
        if transitions.is_empty() {
            space.deadlocks.push(s);
        }
        space.transitions[s] = transitions;
    }
    Ok(space)
}

fn intern(
    space: &mut StateSpace,
    task: &GroundTask,
    state: GroundState,
    queue: &mut VecDeque<usize>,
    limits: &Limits,
) -> Result<usize, FondError> {
    if let Some(&i) = space.index.get(&state) {
        return Ok(i);
    }
    if space.states.len() >= limits.max_states {
        return Err(FondError::LimitExceeded {
            what: "state",
            limit: limits.max_states,
        });
    }
    let i = space.states.len();
    space.goal.push(task.is_goal(&state));
    space.transitions.push(Vec::new());
    space.index.insert(state.clone(), i);
    space.states.push(state);
    queue.push_back(i);
    Ok(i)
}
