use std::collections::BTreeSet;
use std::fmt::Write as _;

use super::{GroundTask, Policy, StateSpace};
use crate::graph::dot_quote;

/// Graphviz rendering of a policy: one node per state (labelled by its true
/// predicates), one edge per outcome. Goal states are double circles.
pub fn export_policy_dot(task: &GroundTask, space: &StateSpace, policy: &Policy) -> String {
    let mut nodes: BTreeSet<usize> = BTreeSet::new();
    nodes.insert(0);
    for &s in policy.choice.keys() {
        nodes.insert(s);
        nodes.extend(policy.successors(space, s).unwrap_or(&[]));
    }

    let mut out = String::from("digraph policy {\n  node [shape=box];\n");
    for &s in &nodes {
        let label = task.state_names(&space.states[s]).join("\n");
        let shape = if space.goal[s] { ", shape=doublecircle" } else { "" };
        let _ = writeln!(out, "  s{s} [label={}{shape}];", dot_quote(&label));
    }
    for &s in policy.choice.keys() {
        let name = policy.action_name(task, space, s).unwrap_or_default();
        let succ = policy.successors(space, s).unwrap_or(&[]);
        for (i, t) in succ.iter().enumerate() {
            let label = if succ.len() == 1 { name.to_owned() } else { format!("{name}/{i}") };
            let _ = writeln!(out, "  s{s} -> s{t} [label={}];", dot_quote(&label));
        }
    }
    out.push_str("}\n");
    out
}
