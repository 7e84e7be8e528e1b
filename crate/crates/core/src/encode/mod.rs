//! Compilation of a [`ProcessGraph`] into a non-deterministic PDDL domain and
//! its problem variants.
//!
//! Every flow node owns one predicate named after its element id. A sequence
//! flow is represented by the predicate of its target, except for flows that
//! enter a merging gateway (those get a predicate named after the flow id, so
//! the join can tell its branches apart) and flows leaving a start event
//! (represented by the start event's own predicate, which is what the initial
//! state sets). Message flows into events get a predicate named after the
//! message flow id.

mod problems;

use std::collections::HashMap;

use indexmap::IndexMap;
use petgraph::algo::dominators;
use petgraph::graph::{DiGraph, NodeIndex};
use thiserror::Error;

use crate::bpmn::{FlowId, FlowNode, NodeId, NodeKind, PoolId, SequenceFlow};
use crate::graph::{MessageStrategy, ProcessGraph};
use crate::naming::{sanitize_id, IdStyle, NameTable};
use crate::pddl::{
    Effect, PddlAction, PddlDomain, PddlProblem, REQ_NON_DETERMINISTIC, REQ_STRIPS, REQ_TYPING, RESERVED_WORDS,
};

pub use problems::ProblemVariant;

pub const DONE: &str = "done";

/// When the goal predicate `done` becomes true.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DoneMode {
    /// Any end event sets `done`.
    #[default]
    AnyEnd,
    /// Each end event sets its pool's completion predicate; `done` needs all.
    AllPools,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EncodeOptions {
    pub done_mode: DoneMode,
    /// Omit `:non-deterministic` from the requirements line.
    pub fig4_compat: bool,
    /// Emit the `empty` problem plus one bootstrap action per start event.
    pub allow_spontaneous_start: bool,
    pub max_inclusive_branches: usize,
    /// Overrides the domain name derived from the diagram.
    pub domain_name: Option<String>,
}

impl Default for EncodeOptions {
    fn default() -> Self {
        Self {
            done_mode: DoneMode::AnyEnd,
            fig4_compat: false,
            allow_spontaneous_start: false,
            max_inclusive_branches: 6,
            domain_name: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EncodeError {
    #[error("gateway `{0}` both merges and splits; model it as a join followed by a split")]
    MixedGateway(NodeId),
    #[error("gateway `{0}` has no outgoing sequence flow")]
    GatewayWithoutOutgoing(NodeId),
    #[error("node `{0}` has no incoming flow")]
    NoIncomingFlow(NodeId),
    #[error("inclusive gateway `{gateway}` has {branches} branches (limit {max})")]
    TooManyInclusiveBranches { gateway: NodeId, branches: usize, max: usize },
    #[error("inclusive join `{0}` is not dominated by an inclusive split")]
    UnmatchedInclusiveJoin(NodeId),
}

/// The predicate names chosen for each graph element.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct PredicateNames {
    pub nodes: IndexMap<NodeId, String>,
    /// Marker of every sequence flow (parsed and synthetic) and, under
    /// [`MessageStrategy::ExclusiveEmulation`], of every task-to-task message.
    pub flows: IndexMap<FlowId, String>,
    /// `count_<g>_0 ..= count_<g>_n` for each splitting inclusive gateway.
    pub counters: IndexMap<NodeId, Vec<String>>,
    /// Inclusive join → the split whose counter it decrements.
    pub inclusive_pairs: IndexMap<NodeId, NodeId>,
    pub pool_done: IndexMap<PoolId, String>,
    pub done: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Translation {
    pub domain: PddlDomain,
    pub problems: Vec<ProblemVariant>,
    pub names: PredicateNames,
}

/// Builds the domain and every problem variant.
pub fn translate(graph: &ProcessGraph, options: &EncodeOptions) -> Result<Translation, EncodeError> {
    let mut enc = Encoder::new(graph, options)?;
    let actions = enc.actions()?;
    let domain_name = options
        .domain_name
        .clone()
        .unwrap_or_else(|| sanitize_id(&graph.source_name, IdStyle::Label));
    let mut requirements = vec![REQ_STRIPS.to_owned(), REQ_TYPING.to_owned()];
    if !options.fig4_compat {
        requirements.push(REQ_NON_DETERMINISTIC.to_owned());
    }
    let domain = PddlDomain {
        name: domain_name,
        requirements,
        types: ["task", "event", "gateway"].map(String::from).to_vec(),
        predicates: enc.declared,
        actions,
    };
    let problems = problems::variants(graph, &enc.names, &domain.name, options);
    Ok(Translation {
        domain,
        problems,
        names: enc.names,
    })
}

pub fn emit_domain(graph: &ProcessGraph, options: &EncodeOptions) -> Result<PddlDomain, EncodeError> {
    translate(graph, options).map(|t| t.domain)
}

pub fn emit_problems(graph: &ProcessGraph, options: &EncodeOptions) -> Result<Vec<PddlProblem>, EncodeError> {
    translate(graph, options).map(|t| t.problems.into_iter().map(|v| v.problem).collect())
}

/// A start event that some message flow triggers.
pub(crate) fn message_triggered(graph: &ProcessGraph, node: &FlowNode) -> bool {
    node.kind == NodeKind::StartEvent && graph.synthetic_in(node.id.as_str()).next().is_some()
}

struct Encoder<'a> {
    graph: &'a ProcessGraph,
    options: &'a EncodeOptions,
    names: PredicateNames,
    declared: Vec<String>,
    action_names: NameTable,
}

fn fresh_table() -> NameTable {
    let mut t = NameTable::new();
    for w in RESERVED_WORDS {
        t.reserve(w);
    }
    t
}

impl<'a> Encoder<'a> {
    fn new(graph: &'a ProcessGraph, options: &'a EncodeOptions) -> Result<Self, EncodeError> {
        let mut table = fresh_table();
        table.reserve(DONE);
        let mut names = PredicateNames {
            done: DONE.to_owned(),
            ..Default::default()
        };
        let mut declared = Vec::new();

        for node in graph.nodes.values() {
            let p = table.sanitize(node.id.as_str(), IdStyle::Element);
            declared.push(p.clone());
            names.nodes.insert(node.id.clone(), p);
        }

        for f in graph.flows.values() {
            let source_kind = graph.node(f.source.as_str()).kind;
            let target_kind = graph.node(f.target.as_str()).kind;
            let marker = if f.synthetic {
                if target_kind == NodeKind::StartEvent {
                    names.nodes[&f.target].clone()
                } else {
                    let p = table.sanitize(f.id.as_str(), IdStyle::Element);
                    declared.push(p.clone());
                    p
                }
            } else if source_kind == NodeKind::StartEvent {
                names.nodes[&f.source].clone()
            } else if graph.is_join(f.target.as_str()) {
                let p = table.sanitize(f.id.as_str(), IdStyle::Element);
                declared.push(p.clone());
                p
            } else {
                names.nodes[&f.target].clone()
            };
            names.flows.insert(f.id.clone(), marker);
        }

        if graph.msg_strategy == MessageStrategy::ExclusiveEmulation {
            for m in &graph.task_task_messages {
                let p = table.sanitize(m.id.as_str(), IdStyle::Element);
                declared.push(p.clone());
                names.flows.insert(m.id.clone(), p);
            }
        }

        for node in graph.nodes.values() {
            if node.kind != NodeKind::InclusiveGateway || graph.is_join(node.id.as_str()) {
                continue;
            }
            let width = graph.sequence_out(node.id.as_str()).count();
            if width > options.max_inclusive_branches {
                return Err(EncodeError::TooManyInclusiveBranches {
                    gateway: node.id.clone(),
                    branches: width,
                    max: options.max_inclusive_branches,
                });
            }
            let base = &names.nodes[&node.id];
            let counters: Vec<String> = (0..=width).map(|k| table.unique(format!("count_{base}_{k}"))).collect();
            declared.extend(counters.iter().cloned());
            names.counters.insert(node.id.clone(), counters);
        }

        if options.done_mode == DoneMode::AllPools {
            for pool in graph.active_pools() {
                let p = table.unique(format!("pool_done_{}", sanitize_id(pool.label(), IdStyle::Label)));
                declared.push(p.clone());
                names.pool_done.insert(pool.id.clone(), p);
            }
        }
        declared.push(DONE.to_owned());

        let mut enc = Self {
            graph,
            options,
            names,
            declared,
            action_names: fresh_table(),
        };
        enc.pair_inclusive_joins()?;
        Ok(enc)
    }

    /// Matches each inclusive join with the nearest inclusive split on its
    /// immediate-dominator chain.
    fn pair_inclusive_joins(&mut self) -> Result<(), EncodeError> {
        let graph = self.graph;
        let joins: Vec<&NodeId> = graph
            .nodes
            .values()
            .filter(|n| n.kind == NodeKind::InclusiveGateway && graph.is_join(n.id.as_str()))
            .map(|n| &n.id)
            .collect();
        if joins.is_empty() {
            return Ok(());
        }
        let mut g: DiGraph<Option<&NodeId>, ()> = DiGraph::new();
        let root = g.add_node(None);
        let index: HashMap<&NodeId, NodeIndex> = graph.nodes.keys().map(|id| (id, g.add_node(Some(id)))).collect();
        for f in graph.flows.values().filter(|f| !f.synthetic) {
            g.add_edge(index[&f.source], index[&f.target], ());
        }
        for n in graph.nodes.values().filter(|n| n.kind == NodeKind::StartEvent) {
            g.add_edge(root, index[&n.id], ());
        }
        let dom = dominators::simple_fast(&g, root);
        for join in joins {
            let mut cur = index[join];
            let split = loop {
                match dom.immediate_dominator(cur) {
                    Some(d) if d != root => {
                        let id = g[d].expect("only the root is unlabeled");
                        if self.names.counters.contains_key(id) {
                            break id.clone();
                        }
                        cur = d;
                    }
                    _ => return Err(EncodeError::UnmatchedInclusiveJoin(join.clone())),
                }
            };
            self.names.inclusive_pairs.insert(join.clone(), split);
        }
        Ok(())
    }

    fn marker(&self, flow: &FlowId) -> String {
        self.names.flows[flow].clone()
    }

    fn node_pred(&self, id: &NodeId) -> &str {
        &self.names.nodes[id]
    }

    /// Markers a flow's source must add besides the flow's own marker. Start
    /// events have no action, so their outgoing messages are sent by whatever
    /// consumes the start token.
    fn carried(&self, flow: &SequenceFlow) -> Vec<String> {
        if flow.synthetic || self.graph.node(flow.source.as_str()).kind != NodeKind::StartEvent {
            return Vec::new();
        }
        self.graph
            .synthetic_out(flow.source.as_str())
            .map(|m| self.marker(&m.id))
            .collect()
    }

    fn action(&mut self, base: String, precondition: Vec<String>, effect: Effect) -> PddlAction {
        PddlAction {
            name: self.action_names.unique(base),
            precondition,
            effect,
        }
    }

    fn actions(&mut self) -> Result<Vec<PddlAction>, EncodeError> {
        let graph = self.graph;
        let mut out = Vec::new();
        for node in graph.nodes.values() {
            match node.kind {
                NodeKind::StartEvent => {
                    if self.options.allow_spontaneous_start && !message_triggered(graph, node) {
                        let p = self.node_pred(&node.id).to_owned();
                        let a = self.action(format!("start_{p}"), Vec::new(), Effect::And(vec![Effect::Add(p)]));
                        out.push(a);
                    }
                }
                NodeKind::Task
                | NodeKind::EndEvent
                | NodeKind::IntermediateCatchEvent
                | NodeKind::IntermediateThrowEvent => out.extend(self.encode_activity(node)?),
                NodeKind::ExclusiveGateway | NodeKind::EventBasedGateway => out.extend(self.encode_exclusive(node)?),
                NodeKind::ParallelGateway => out.push(self.encode_parallel(node)?),
                NodeKind::InclusiveGateway => out.extend(self.encode_inclusive(node)?),
            }
        }
        if self.options.done_mode == DoneMode::AllPools {
            let pre: Vec<String> = self.names.pool_done.values().cloned().collect();
            let a = self.action("all_pools_done".into(), pre, Effect::And(vec![Effect::Add(DONE.into())]));
            out.push(a);
        }
        Ok(out)
    }

    /// Tasks and non-start events: one action per incoming message (or one
    /// action if there is none), moving the token to the successor.
    fn encode_activity(&mut self, node: &FlowNode) -> Result<Vec<PddlAction>, EncodeError> {
        let graph = self.graph;
        let id = node.id.as_str();
        let base = match node.kind {
            NodeKind::Task => sanitize_id(node.label(), IdStyle::Label),
            _ => format!("event_{}", self.node_pred(&node.id)),
        };

        let seq_in: Option<&SequenceFlow> = graph.sequence_in(id).next();
        let mut adds: Vec<String> = graph.sequence_out(id).map(|f| self.marker(&f.id)).collect();
        adds.extend(graph.synthetic_out(id).map(|f| self.marker(&f.id)));
        if let Some(f) = seq_in {
            adds.extend(self.carried(f));
        }
        if node.kind == NodeKind::EndEvent {
            adds.push(match self.names.pool_done.get(&node.pool) {
                Some(p) => p.clone(),
                None => DONE.to_owned(),
            });
        }

        let messages: Vec<Option<String>> = {
            let m: Vec<Option<String>> = graph.synthetic_in(id).map(|f| Some(self.marker(&f.id))).collect();
            if m.is_empty() {
                vec![None]
            } else {
                m
            }
        };
        let emulated: Vec<String> = if node.kind == NodeKind::Task && graph.msg_strategy == MessageStrategy::ExclusiveEmulation {
            graph
                .task_task_messages
                .iter()
                .filter(|m| m.source == node.id)
                .map(|m| self.marker(&m.id))
                .collect()
        } else {
            Vec::new()
        };

        let several = messages.len() > 1;
        let mut actions = Vec::new();
        for msg in messages {
            let mut pre: Vec<String> = seq_in.map(|f| self.marker(&f.id)).into_iter().collect();
            pre.extend(msg.clone());
            if pre.is_empty() {
                return Err(EncodeError::NoIncomingFlow(node.id.clone()));
            }
            let effect = if emulated.is_empty() {
                move_token(&adds, &pre)
            } else {
                let mut outcomes = vec![outcome(adds.clone())];
                for m in &emulated {
                    let mut with_message = vec![m.clone()];
                    with_message.extend(adds.iter().cloned());
                    outcomes.push(outcome(with_message));
                }
                let mut parts = vec![Effect::OneOf(outcomes)];
                parts.extend(pre.iter().cloned().map(Effect::Not));
                Effect::And(parts)
            };
            let name = match (&msg, several) {
                (Some(m), true) => format!("{base}_{}", m.to_ascii_lowercase()),
                _ => base.clone(),
            };
            actions.push(self.action(name, pre, effect));
        }
        Ok(actions)
    }

    fn shape(&self, node: &FlowNode) -> Result<(Vec<&'a SequenceFlow>, Vec<&'a SequenceFlow>), EncodeError> {
        let id = node.id.as_str();
        let ins: Vec<&SequenceFlow> = self.graph.sequence_in(id).collect();
        let outs: Vec<&SequenceFlow> = self.graph.sequence_out(id).collect();
        if ins.len() > 1 && outs.len() > 1 {
            return Err(EncodeError::MixedGateway(node.id.clone()));
        }
        if outs.is_empty() {
            return Err(EncodeError::GatewayWithoutOutgoing(node.id.clone()));
        }
        if ins.is_empty() {
            return Err(EncodeError::NoIncomingFlow(node.id.clone()));
        }
        Ok((ins, outs))
    }

    fn encode_exclusive(&mut self, node: &FlowNode) -> Result<Vec<PddlAction>, EncodeError> {
        let (ins, outs) = self.shape(node)?;
        let base = format!("event_{}", self.node_pred(&node.id));
        if ins.len() > 1 {
            let succ = self.marker(&outs[0].id);
            let mut actions = Vec::new();
            for f in ins {
                let mut adds = vec![succ.clone()];
                adds.extend(self.carried(f));
                let pre = vec![self.marker(&f.id)];
                let name = format!("{base}_from_{}", self.node_pred(&f.source).to_ascii_lowercase());
                actions.push(self.action(name, pre.clone(), move_token(&adds, &pre)));
            }
            return Ok(actions);
        }
        let pre = vec![self.marker(&ins[0].id)];
        let carried = self.carried(ins[0]);
        let effect = if outs.len() == 1 {
            let mut adds = vec![self.marker(&outs[0].id)];
            adds.extend(carried);
            move_token(&adds, &pre)
        } else {
            let choices = outs
                .iter()
                .map(|f| {
                    let mut adds = vec![self.marker(&f.id)];
                    adds.extend(carried.iter().cloned());
                    outcome(adds)
                })
                .collect();
            let mut parts = vec![Effect::OneOf(choices)];
            parts.extend(pre.iter().cloned().map(Effect::Not));
            Effect::And(parts)
        };
        Ok(vec![self.action(base, pre, effect)])
    }

    fn encode_parallel(&mut self, node: &FlowNode) -> Result<PddlAction, EncodeError> {
        let (ins, outs) = self.shape(node)?;
        let pre: Vec<String> = ins.iter().map(|f| self.marker(&f.id)).collect();
        let mut adds: Vec<String> = outs.iter().map(|f| self.marker(&f.id)).collect();
        for f in &ins {
            adds.extend(self.carried(f));
        }
        let base = format!("event_{}", self.node_pred(&node.id));
        Ok(self.action(base, pre.clone(), move_token(&adds, &pre)))
    }

    fn encode_inclusive(&mut self, node: &FlowNode) -> Result<Vec<PddlAction>, EncodeError> {
        let (ins, outs) = self.shape(node)?;
        let gp = self.node_pred(&node.id).to_owned();
        let base = format!("event_{gp}");

        if ins.len() == 1 {
            let counters = self.names.counters[&node.id].clone();
            let in_marker = self.marker(&ins[0].id);
            let carried = self.carried(ins[0]);
            let branches: Vec<String> = outs.iter().map(|f| self.marker(&f.id)).collect();
            let pre = vec![in_marker.clone(), counters[0].clone()];
            let subsets = nonempty_subsets(branches.len());
            let make = |subset: &[usize]| {
                let mut parts: Vec<Effect> = subset.iter().map(|&i| Effect::Add(branches[i].clone())).collect();
                parts.extend(carried.iter().cloned().map(Effect::Add));
                parts.push(Effect::Add(counters[subset.len()].clone()));
                parts.push(Effect::Not(counters[0].clone()));
                parts
            };
            let effect = if subsets.len() == 1 {
                let mut parts = make(&subsets[0]);
                parts.push(Effect::Not(in_marker));
                Effect::And(parts)
            } else {
                let choices = subsets.iter().map(|s| Effect::And(make(s))).collect();
                Effect::And(vec![Effect::OneOf(choices), Effect::Not(in_marker)])
            };
            return Ok(vec![self.action(base, pre, effect)]);
        }

        let split = self.names.inclusive_pairs[&node.id].clone();
        let counters = self.names.counters[&split].clone();
        let mut actions = Vec::new();
        for f in ins {
            let marker = self.marker(&f.id);
            let carried = self.carried(f);
            for k in 1..counters.len() {
                let pre = vec![marker.clone(), counters[k].clone()];
                let mut parts = vec![Effect::Add(counters[k - 1].clone())];
                if k == 1 {
                    parts.push(Effect::Add(gp.clone()));
                }
                parts.extend(carried.iter().cloned().map(Effect::Add));
                parts.push(Effect::Not(marker.clone()));
                parts.push(Effect::Not(counters[k].clone()));
                let name = format!("{base}_{}_{k}", marker.to_ascii_lowercase());
                actions.push(self.action(name, pre, Effect::And(parts)));
            }
        }
        let pre = vec![counters[0].clone(), gp.clone()];
        let adds = vec![self.marker(&outs[0].id)];
        let release = move_token(&adds, &[gp]);
        actions.push(self.action(base, pre, release));
        Ok(actions)
    }
}

/// `(and (a1) ... (not (d1)) ...)`
fn move_token(adds: &[String], dels: &[String]) -> Effect {
    Effect::And(
        adds.iter()
            .cloned()
            .map(Effect::Add)
            .chain(dels.iter().cloned().map(Effect::Not))
            .collect(),
    )
}

fn outcome(mut adds: Vec<String>) -> Effect {
    if adds.len() == 1 {
        Effect::Add(adds.remove(0))
    } else {
        Effect::And(adds.into_iter().map(Effect::Add).collect())
    }
}

/// Non-empty subsets of `0..n`, by size and then lexicographically.
fn nonempty_subsets(n: usize) -> Vec<Vec<usize>> {
    let mut all: Vec<Vec<usize>> = (1u32..(1 << n))
        .map(|mask| (0..n).filter(|i| mask & (1 << i) != 0).collect())
        .collect();
    all.sort_by(|a, b| a.len().cmp(&b.len()).then_with(|| a.cmp(b)));
    all
}
