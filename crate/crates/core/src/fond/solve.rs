use std::collections::{BTreeMap, VecDeque};
use std::fmt;

use super::{FondError, GroundTask, StateSpace};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SolveMode {
    /// Reaches the goal on every outcome without revisiting a state.
    Strong,
    /// Reaches the goal under fairness; cycles are allowed.
    StrongCyclic,
}

impl fmt::Display for SolveMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SolveMode::Strong => "strong",
            SolveMode::StrongCyclic => "strong-cyclic",
        })
    }
}

/// State index → index into that state's transitions. Only states reachable
/// from the initial state under the policy are mapped; goal states never are.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Policy {
    pub kind: SolveMode,
    pub choice: BTreeMap<usize, usize>,
}

impl Policy {
    pub fn len(&self) -> usize {
        self.choice.len()
    }

    pub fn is_empty(&self) -> bool {
        self.choice.is_empty()
    }

    pub fn action_name<'t>(&self, task: &'t GroundTask, space: &StateSpace, state: usize) -> Option<&'t str> {
        let t = *self.choice.get(&state)?;
        Some(task.actions[space.transitions[state][t].action].name.as_str())
    }

    /// The successors of a mapped state, one per outcome.
    pub fn successors<'s>(&self, space: &'s StateSpace, state: usize) -> Option<&'s [usize]> {
        let t = *self.choice.get(&state)?;
        Some(&space.transitions[state][t].successors)
    }
}

pub fn solve(task: &GroundTask, space: &StateSpace, mode: SolveMode) -> Result<Policy, FondError> {
    let raw = match mode {
        SolveMode::Strong => strong(task, space),
        SolveMode::StrongCyclic => strong_cyclic(task, space),
    };
    if space.is_empty() || (!space.goal[0] && !raw.contains_key(&0)) {
        return Err(FondError::Unsolvable(mode));
    }
    Ok(Policy {
        kind: mode,
        choice: restrict_to_reachable(space, raw),
    })
}

type Preds = Vec<Vec<(usize, usize)>>;

/// For each state, the (state, transition) pairs with an outcome leading to
/// it, once per such outcome.
fn predecessors(space: &StateSpace) -> Preds {
    let mut preds = vec![Vec::new(); space.len()];
    for (s, ts) in space.transitions.iter().enumerate() {
        for (ti, t) in ts.iter().enumerate() {
            for &succ in &t.successors {
                preds[succ].push((s, ti));
            }
        }
    }
    preds
}

/// Picks the lexicographically smallest action among `candidates`.
fn smallest(task: &GroundTask, space: &StateSpace, s: usize, candidates: impl Iterator<Item = usize>) -> Option<usize> {
    candidates.min_by(|&a, &b| {
        let na = &task.actions[space.transitions[s][a].action].name;
        let nb = &task.actions[space.transitions[s][b].action].name;
        na.cmp(nb)
    })
}

/// Backward fixpoint by layers: a state joins at layer k+1 if some action
/// has all its outcomes in layers ≤ k.
fn strong(task: &GroundTask, space: &StateSpace) -> BTreeMap<usize, usize> {
    let preds = predecessors(space);
    let mut missing: Vec<Vec<usize>> = space.transitions.iter().map(|ts| ts.iter().map(|t| t.successors.len()).collect()).collect();
    let mut winning: Vec<bool> = space.goal.clone();
    let mut choice = BTreeMap::new();
    let mut layer: Vec<usize> = space.goal_states().collect();
    while !layer.is_empty() {
        let mut candidates: Vec<usize> = Vec::new();
        for &w in &layer {
            for &(s, ti) in &preds[w] {
                missing[s][ti] -= 1;
                if missing[s][ti] == 0 && !winning[s] {
                    candidates.push(s);
                }
            }
        }
        candidates.sort_unstable();
        candidates.dedup();
        for &s in &candidates {
            let ready = (0..space.transitions[s].len()).filter(|&ti| missing[s][ti] == 0);
            let t = smallest(task, space, s, ready).expect("candidate has a completed transition");
            choice.insert(s, t);
            winning[s] = true;
        }
        layer = candidates;
    }
    choice
}

/// Iterative pruning: drop actions with an outcome outside the candidate
/// set, then keep states that can still reach the goal, until stable.
fn strong_cyclic(task: &GroundTask, space: &StateSpace) -> BTreeMap<usize, usize> {
    let n = space.len();
    let preds = predecessors(space);
    let mut alive = vec![true; n];
    loop {
        let allowed = |s: usize, ti: usize, alive: &[bool]| space.transitions[s][ti].successors.iter().all(|&t| alive[t]);
        let mut reach = vec![false; n];
        let mut queue: VecDeque<usize> = space.goal_states().filter(|&g| alive[g]).collect();
        for &g in &queue {
            reach[g] = true;
        }
        while let Some(t) = queue.pop_front() {
            for &(s, ti) in &preds[t] {
                if alive[s] && !reach[s] && allowed(s, ti, &alive) {
                    reach[s] = true;
                    queue.push_back(s);
                }
            }
        }
        if reach == alive {
            break;
        }
        alive = reach;
    }

    // Distance layers give each state an action that makes progress.
    let mut dist = vec![usize::MAX; n];
    let mut layer: Vec<usize> = space.goal_states().filter(|&g| alive[g]).collect();
    for &g in &layer {
        dist[g] = 0;
    }
    let mut choice = BTreeMap::new();
    let mut d = 0;
    while !layer.is_empty() {
        let mut next: Vec<usize> = layer
            .iter()
            .flat_map(|&t| preds[t].iter().map(|&(s, _)| s))
            .filter(|&s| alive[s] && dist[s] == usize::MAX)
            .collect();
        next.sort_unstable();
        next.dedup();
        let mut kept = Vec::new();
        for s in next {
            let progress = (0..space.transitions[s].len()).filter(|&ti| {
                let succ = &space.transitions[s][ti].successors;
                succ.iter().all(|&t| alive[t]) && succ.iter().any(|&t| dist[t] <= d)
            });
            if let Some(t) = smallest(task, space, s, progress) {
                choice.insert(s, t);
                kept.push(s);
            }
        }
        for &s in &kept {
            dist[s] = d + 1;
        }
        layer = kept;
        d += 1;
    }
    choice
}

fn restrict_to_reachable(space: &StateSpace, raw: BTreeMap<usize, usize>) -> BTreeMap<usize, usize> {
    let mut out = BTreeMap::new();
    let mut stack = vec![0usize];
    let mut seen = vec![false; space.len()];
    seen[0] = true;
    while let Some(s) = stack.pop() {
        let Some(&t) = raw.get(&s) else { continue };
        out.insert(s, t);
        for &succ in &space.transitions[s][t].successors {
            if !seen[succ] {
                seen[succ] = true;
                stack.push(succ);
            }
        }
    }
    out
}

/// Checks a policy structurally: closed over outcomes, every mapped state
/// can reach a goal under the policy, and strong policies are acyclic.
pub fn verify_policy(space: &StateSpace, policy: &Policy) -> Result<(), String> {
    let mapped_or_goal = |s: usize| space.goal[s] || policy.choice.contains_key(&s);
    if !mapped_or_goal(0) {
        return Err("initial state is neither mapped nor a goal".into());
    }
    for (&s, &t) in &policy.choice {
        if space.goal[s] {
            return Err(format!("goal state {s} is mapped"));
        }
        let Some(tr) = space.transitions[s].get(t) else {
            return Err(format!("state {s} maps to a missing transition"));
        };
        if let Some(&bad) = tr.successors.iter().find(|&&x| !mapped_or_goal(x)) {
            return Err(format!("state {s} leads to unmapped non-goal state {bad}"));
        }
    }

    // Backward reachability to goals inside the policy graph.
    let mut can_finish: BTreeMap<usize, bool> = policy.choice.keys().map(|&s| (s, false)).collect();
    let mut changed = true;
    while changed {
        changed = false;
        for (&s, &t) in &policy.choice {
            if can_finish[&s] {
                continue;
            }
            let ok = space.transitions[s][t]
                .successors
                .iter()
                .any(|&x| space.goal[x] || can_finish.get(&x).copied().unwrap_or(false));
            if ok {
                can_finish.insert(s, true);
                changed = true;
            }
        }
    }
    if let Some((s, _)) = can_finish.iter().find(|(_, ok)| !**ok) {
        return Err(format!("state {s} cannot reach a goal under the policy"));
    }

    if policy.kind == SolveMode::Strong {
        // 0 = unvisited, 1 = on stack, 2 = done
        let mut mark = vec![0u8; space.len()];
        for &root in policy.choice.keys() {
            if mark[root] != 0 {
                continue;
            }
            let mut stack = vec![(root, 0usize)];
            mark[root] = 1;
            while let Some((s, i)) = stack.pop() {
                let succ = policy.successors(space, s).unwrap_or(&[]);
                if i < succ.len() {
                    stack.push((s, i + 1));
                    let x = succ[i];
                    match mark[x] {
                        1 => return Err(format!("strong policy revisits state {x}")),
                        0 if policy.choice.contains_key(&x) => {
                            mark[x] = 1;
                            stack.push((x, 0));
                        }
                        _ => {}
                    }
                } else {
                    mark[s] = 2;
                }
            }
        }
    }
    Ok(())
}
