use std::collections::BTreeSet;

use super::{message_triggered, EncodeOptions, PredicateNames};
use crate::graph::ProcessGraph;
use crate::naming::{sanitize_id, IdStyle, NameTable};
use crate::pddl::PddlProblem;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProblemVariant {
    /// `empty`, `all_starts` or `prestarted_<pool>`.
    pub variant: String,
    pub problem: PddlProblem,
}

/// Initial-state variants sharing the goal `(and (done))`. Variants whose
/// initial state equals an earlier one are dropped.
pub(super) fn variants(
    graph: &ProcessGraph,
    names: &PredicateNames,
    domain_name: &str,
    options: &EncodeOptions,
) -> Vec<ProblemVariant> {
    let counters: Vec<String> = names.counters.values().map(|c| c[0].clone()).collect();
    let start_preds = |ids: &mut dyn Iterator<Item = &crate::bpmn::NodeId>| -> Vec<String> {
        ids.map(|id| names.nodes[id].clone()).collect()
    };

    let mut candidates: Vec<(String, Vec<String>)> = Vec::new();
    if options.allow_spontaneous_start {
        candidates.push(("empty".into(), Vec::new()));
    }
    let spontaneous = start_preds(
        &mut graph
            .start_nodes
            .values()
            .flatten()
            .filter(|id| !message_triggered(graph, graph.node(id.as_str()))),
    );
    candidates.push(("all_starts".into(), spontaneous));
    let mut labels = NameTable::new();
    labels.reserve("empty");
    labels.reserve("all_starts");
    for pool in graph.active_pools() {
        let label = labels.unique(format!("prestarted_{}", sanitize_id(pool.label(), IdStyle::Label)));
        let starts = start_preds(&mut graph.start_nodes[&pool.id].iter());
        candidates.push((label, starts));
    }

    let mut seen: Vec<BTreeSet<String>> = Vec::new();
    let mut out = Vec::new();
    for (variant, mut init) in candidates {
        init.extend(counters.iter().cloned());
        let key: BTreeSet<String> = init.iter().cloned().collect();
        if seen.contains(&key) {
            continue;
        }
        seen.push(key);
        out.push(ProblemVariant {
            problem: PddlProblem {
                name: format!("{domain_name}_{variant}"),
                domain_name: domain_name.to_owned(),
                init,
                goal: vec![names.done.clone()],
            },
            variant,
        });
    }
    out
}
