use serde::Serialize;

use super::{FondError, GroundTask, Policy, StateSpace};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Terminal {
    Goal,
    Deadlock,
    /// The trace reached a state it had already visited.
    CycleCutoff,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TraceStep {
    pub state: usize,
    pub action: usize,
    pub outcome: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Trace {
    pub steps: Vec<TraceStep>,
    pub final_state: usize,
    pub terminal: Terminal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TraceLimits {
    pub max_len: usize,
    pub max_traces: usize,
}

impl Default for TraceLimits {
    fn default() -> Self {
        Self {
            max_len: 1_000,
            max_traces: 100_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct TraceSet {
    pub traces: Vec<Trace>,
}

#[derive(Serialize)]
struct StepReport<'a> {
    state: Vec<&'a str>,
    action: &'a str,
    outcome: usize,
}

#[derive(Serialize)]
struct TraceReport<'a> {
    terminal: Terminal,
    steps: Vec<StepReport<'a>>,
    final_state: Vec<&'a str>,
}

impl TraceSet {
    pub fn len(&self) -> usize {
        self.traces.len()
    }

    pub fn is_empty(&self) -> bool {
        self.traces.is_empty()
    }

    pub fn count(&self, terminal: Terminal) -> usize {
        self.traces.iter().filter(|t| t.terminal == terminal).count()
    }

    /// JSON array of traces with predicate and action names resolved.
    pub fn to_json(&self, task: &GroundTask, space: &StateSpace) -> String {
        let reports: Vec<TraceReport> = self
            .traces
            .iter()
            .map(|t| TraceReport {
                terminal: t.terminal,
                steps: t
                    .steps
                    .iter()
                    .map(|s| StepReport {
                        state: task.state_names(&space.states[s.state]),
                        action: &task.actions[s.action].name,
                        outcome: s.outcome,
                    })
                    .collect(),
                final_state: task.state_names(&space.states[t.final_state]),
            })
            .collect();
        serde_json::to_string_pretty(&reports).expect("trace report serializes")
    }
}

/// Depth-first enumeration of maximal traces from the initial state. With a
/// policy only outcomes branch; without one, every applicable action does too.
pub fn enumerate_traces(
    space: &StateSpace,
    policy: Option<&Policy>,
    limits: &TraceLimits,
) -> Result<TraceSet, FondError> {
    let mut set = TraceSet::default();
    if space.is_empty() {
        return Ok(set);
    }
    let mut path: Vec<TraceStep> = Vec::new();
    let mut on_path = vec![false; space.len()];
    walk(space, policy, limits, 0, &mut path, &mut on_path, &mut set)?;
    Ok(set)
}

fn walk(
    space: &StateSpace,
    policy: Option<&Policy>,
    limits: &TraceLimits,
    s: usize,
    path: &mut Vec<TraceStep>,
    on_path: &mut [bool],
    set: &mut TraceSet,
) -> Result<(), FondError> {
    let finish = |terminal: Terminal, path: &[TraceStep], set: &mut TraceSet| {
        if set.traces.len() >= limits.max_traces {
            return Err(FondError::LimitExceeded {
                what: "trace count",
                limit: limits.max_traces,
            });
        }
        set.traces.push(Trace {
            steps: path.to_vec(),
            final_state: s,
            terminal,
        });
        Ok(())
    };

    if space.goal[s] {
        return finish(Terminal::Goal, path, set);
    }
    if on_path[s] {
        return finish(Terminal::CycleCutoff, path, set);
    }
    let choices: Vec<usize> = match policy {
        Some(p) => p.choice.get(&s).copied().into_iter().collect(),
        None => (0..space.transitions[s].len()).collect(),
    };
    if choices.is_empty() {
        return finish(Terminal::Deadlock, path, set);
    }
    if path.len() >= limits.max_len {
        return Err(FondError::LimitExceeded {
            what: "trace length",
            limit: limits.max_len,
        });
    }
    on_path[s] = true;
    for ti in choices {
        let t = &space.transitions[s][ti];
        for (oi, &next) in t.successors.iter().enumerate() {
            path.push(TraceStep {
                state: s,
                action: t.action,
                outcome: oi,
            });
            walk(space, policy, limits, next, path, on_path, set)?;
            path.pop();
        }
    }
    on_path[s] = false;
    Ok(())
}
