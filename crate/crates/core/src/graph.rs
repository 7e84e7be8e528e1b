//! Validated control-flow graph with synthetic message flows.

use std::collections::{BTreeMap, BTreeSet, HashSet, VecDeque};
use std::fmt::{self, Write as _};

use indexmap::IndexMap;
use thiserror::Error;

use crate::bpmn::{BpmnModel, FlowId, FlowNode, MessageFlow, NodeId, NodeKind, Pool, PoolId, SequenceFlow};

/// How task-to-task message flows are encoded.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MessageStrategy {
    /// Treated as plain communication links with no control-flow effect.
    Ignore,
    /// The sending task non-deterministically delivers or does not deliver
    /// the message, which forces the branch to show up in policies.
    #[default]
    ExclusiveEmulation,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GraphError {
    #[error("pool `{0}` has no start event")]
    NoStartEvent(PoolId),
    #[error("pool `{0}` has no end event")]
    NoEndEvent(PoolId),
    #[error("node `{0}` has no incoming flow and is not a start event")]
    IsolatedNode(NodeId),
    #[error("node `{0}` has several incoming sequence flows; use an explicit merge gateway")]
    MultipleIncomingNonGateway(NodeId),
    #[error("node `{0}` has several outgoing sequence flows; use an explicit split gateway")]
    MultipleOutgoingNonGateway(NodeId),
    #[error("sequence flow `{flow}` {reason}")]
    InvalidFlow { flow: FlowId, reason: &'static str },
    #[error("message flow `{0}` must connect tasks or events")]
    InvalidMessageEndpoint(FlowId),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProcessGraph {
    pub nodes: IndexMap<NodeId, FlowNode>,
    pub pools: Vec<Pool>,
    /// Parsed flows in document order, followed by synthetic ones.
    pub flows: IndexMap<FlowId, SequenceFlow>,
    pub incoming: IndexMap<NodeId, Vec<FlowId>>,
    pub outgoing: IndexMap<NodeId, Vec<FlowId>>,
    pub task_task_messages: Vec<MessageFlow>,
    pub start_nodes: IndexMap<PoolId, Vec<NodeId>>,
    pub end_nodes: IndexMap<PoolId, Vec<NodeId>>,
    pub msg_strategy: MessageStrategy,
    pub source_name: String,
}

/// Builds and validates the control-flow graph.
///
/// Message flows touching an event become synthetic sequence flows; message
/// flows between two tasks are kept aside in `task_task_messages`.
pub fn build_graph(model: &BpmnModel, msg_strategy: MessageStrategy) -> Result<ProcessGraph, GraphError> {
    let mut flows: IndexMap<FlowId, SequenceFlow> = model
        .sequence_flows
        .iter()
        .map(|f| (f.id.clone(), f.clone()))
        .collect();

    let mut task_task_messages = Vec::new();
    for m in &model.message_flows {
        let source = &model.nodes[&m.source];
        let target = &model.nodes[&m.target];
        if source.kind.is_gateway() || target.kind.is_gateway() {
            return Err(GraphError::InvalidMessageEndpoint(m.id.clone()));
        }
        if source.kind == NodeKind::Task && target.kind == NodeKind::Task {
            task_task_messages.push(m.clone());
        } else {
            flows.insert(
                m.id.clone(),
                SequenceFlow {
                    id: m.id.clone(),
                    source: m.source.clone(),
                    target: m.target.clone(),
                    synthetic: true,
                    condition_label: None,
                },
            );
        }
    }

    let mut incoming: IndexMap<NodeId, Vec<FlowId>> =
        model.nodes.keys().map(|k| (k.clone(), Vec::new())).collect();
    let mut outgoing = incoming.clone();
    for f in flows.values() {
        outgoing[&f.source].push(f.id.clone());
        incoming[&f.target].push(f.id.clone());
    }

    let mut start_nodes = IndexMap::new();
    let mut end_nodes = IndexMap::new();
    for pool in model.pools.iter().filter(|p| !p.node_ids.is_empty()) {
        let of_kind = |k: NodeKind| -> Vec<NodeId> {
            pool.node_ids
                .iter()
                .filter(|id| model.nodes[*id].kind == k)
                .cloned()
                .collect()
        };
        let starts = of_kind(NodeKind::StartEvent);
        let ends = of_kind(NodeKind::EndEvent);
        if starts.is_empty() {
            return Err(GraphError::NoStartEvent(pool.id.clone()));
        }
        if ends.is_empty() {
            return Err(GraphError::NoEndEvent(pool.id.clone()));
        }
        start_nodes.insert(pool.id.clone(), starts);
        end_nodes.insert(pool.id.clone(), ends);
    }

    for node in model.nodes.values() {
        let normal_in = incoming[&node.id].iter().filter(|f| !flows[*f].synthetic).count();
        let normal_out: Vec<&FlowId> = outgoing[&node.id].iter().filter(|f| !flows[*f].synthetic).collect();
        match node.kind {
            NodeKind::StartEvent if normal_in > 0 => {
                let flow = incoming[&node.id].iter().find(|f| !flows[*f].synthetic).unwrap();
                return Err(GraphError::InvalidFlow {
                    flow: flow.clone(),
                    reason: "enters a start event",
                });
            }
            NodeKind::EndEvent if !normal_out.is_empty() => {
                return Err(GraphError::InvalidFlow {
                    flow: normal_out[0].clone(),
                    reason: "leaves an end event",
                });
            }
            _ => {}
        }
        if node.kind != NodeKind::StartEvent && incoming[&node.id].is_empty() {
            return Err(GraphError::IsolatedNode(node.id.clone()));
        }
        if !node.kind.is_gateway() {
            if normal_in > 1 {
                return Err(GraphError::MultipleIncomingNonGateway(node.id.clone()));
            }
            if normal_out.len() > 1 {
                return Err(GraphError::MultipleOutgoingNonGateway(node.id.clone()));
            }
        }
    }

    Ok(ProcessGraph {
        nodes: model.nodes.clone(),
        pools: model.pools.clone(),
        flows,
        incoming,
        outgoing,
        task_task_messages,
        start_nodes,
        end_nodes,
        msg_strategy,
        source_name: model.source_name.clone(),
    })
}

impl ProcessGraph {
    pub fn node(&self, id: &str) -> &FlowNode {
        &self.nodes[id]
    }

    pub fn flow(&self, id: &str) -> &SequenceFlow {
        &self.flows[id]
    }

    pub fn incoming(&self, id: &str) -> &[FlowId] {
        &self.incoming[id]
    }

    pub fn outgoing(&self, id: &str) -> &[FlowId] {
        &self.outgoing[id]
    }

    /// Incoming parsed (non-synthetic) flows.
    pub fn sequence_in(&self, id: &str) -> impl Iterator<Item = &SequenceFlow> {
        self.incoming[id].iter().map(|f| &self.flows[f]).filter(|f| !f.synthetic)
    }

    pub fn sequence_out(&self, id: &str) -> impl Iterator<Item = &SequenceFlow> {
        self.outgoing[id].iter().map(|f| &self.flows[f]).filter(|f| !f.synthetic)
    }

    pub fn synthetic_in(&self, id: &str) -> impl Iterator<Item = &SequenceFlow> {
        self.incoming[id].iter().map(|f| &self.flows[f]).filter(|f| f.synthetic)
    }

    pub fn synthetic_out(&self, id: &str) -> impl Iterator<Item = &SequenceFlow> {
        self.outgoing[id].iter().map(|f| &self.flows[f]).filter(|f| f.synthetic)
    }

    /// A gateway with more than one incoming sequence flow.
    pub fn is_join(&self, id: &str) -> bool {
        self.node(id).kind.is_gateway() && self.sequence_in(id).count() > 1
    }

    pub fn synthetic_count(&self) -> usize {
        self.flows.values().filter(|f| f.synthetic).count()
    }

    /// Pools that contain at least one node, in document order.
    pub fn active_pools(&self) -> impl Iterator<Item = &Pool> {
        self.pools.iter().filter(|p| !p.node_ids.is_empty())
    }

    /// Graphviz rendering for inspection: shapes by node kind, synthetic
    /// flows dashed, task-to-task messages dotted.
    pub fn to_dot(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "digraph {} {{", dot_quote(&self.source_name));
        let _ = writeln!(out, "  rankdir=LR;");
        for (i, pool) in self.active_pools().enumerate() {
            let _ = writeln!(out, "  subgraph cluster_{i} {{");
            let _ = writeln!(out, "    label={};", dot_quote(pool.label()));
            for id in &pool.node_ids {
                let node = self.node(id.as_str());
                let shape = match node.kind {
                    NodeKind::Task => "box",
                    NodeKind::EndEvent => "doublecircle",
                    k if k.is_event() => "circle",
                    _ => "diamond",
                };
                let _ = writeln!(
                    out,
                    "    {} [shape={shape}, label={}];",
                    dot_quote(id.as_str()),
                    dot_quote(node.label())
                );
            }
            let _ = writeln!(out, "  }}");
        }
        for f in self.flows.values() {
            let style = if f.synthetic { " [style=dashed]" } else { "" };
            let _ = writeln!(out, "  {} -> {}{style};", dot_quote(f.source.as_str()), dot_quote(f.target.as_str()));
        }
        for m in &self.task_task_messages {
            let _ = writeln!(
                out,
                "  {} -> {} [style=dotted];",
                dot_quote(m.source.as_str()),
                dot_quote(m.target.as_str())
            );
        }
        out.push_str("}\n");
        out
    }
}

pub(crate) fn dot_quote(s: &str) -> String {
    let mut q = String::with_capacity(s.len() + 2);
    q.push('"');
    for c in s.chars() {
        match c {
            '"' => q.push_str("\\\""),
            '\\' => q.push_str("\\\\"),
            '\n' => q.push_str("\\n"),
            c => q.push(c),
        }
    }
    q.push('"');
    q
}

/// Structural findings that do not block translation.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub enum Diagnostic {
    /// No directed path from any start event.
    Unreachable(NodeId),
    /// A gateway with one outgoing flow that is not merging anything.
    DegenerateGateway(NodeId),
    /// Two branches of an exclusive split meet at a parallel join, which can
    /// then never collect all its tokens.
    PotentialDeadlock { split: NodeId, join: NodeId },
    /// A message flow starts a process through its start event.
    MessageStartEvent { flow: FlowId, target: NodeId },
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Diagnostic::Unreachable(id) => write!(f, "node `{id}` is unreachable from every start event"),
            Diagnostic::DegenerateGateway(id) => write!(f, "gateway `{id}` has a single outgoing flow"),
            Diagnostic::PotentialDeadlock { split, join } => write!(
                f,
                "branches of exclusive split `{split}` meet at parallel join `{join}` (potential deadlock)"
            ),
            Diagnostic::MessageStartEvent { flow, target } => {
                write!(f, "message flow `{flow}` triggers start event `{target}`")
            }
        }
    }
}

pub fn validate_graph(graph: &ProcessGraph) -> Vec<Diagnostic> {
    let mut out = Vec::new();

    let mut seen: HashSet<&NodeId> = HashSet::new();
    let mut queue: VecDeque<&NodeId> = graph.start_nodes.values().flatten().collect();
    seen.extend(queue.iter().copied());
    while let Some(id) = queue.pop_front() {
        for f in graph.outgoing(id.as_str()) {
            let t = &graph.flows[f].target;
            if seen.insert(t) {
                queue.push_back(t);
            }
        }
    }
    out.extend(
        graph
            .nodes
            .keys()
            .filter(|id| !seen.contains(id))
            .map(|id| Diagnostic::Unreachable(id.clone())),
    );

    for node in graph.nodes.values().filter(|n| n.kind.is_gateway()) {
        if graph.sequence_out(node.id.as_str()).count() == 1 && graph.sequence_in(node.id.as_str()).count() <= 1 {
            out.push(Diagnostic::DegenerateGateway(node.id.clone()));
        }
    }

    for node in graph.nodes.values() {
        if !matches!(node.kind, NodeKind::ExclusiveGateway | NodeKind::EventBasedGateway) {
            continue;
        }
        let branches: Vec<&SequenceFlow> = graph.sequence_out(node.id.as_str()).collect();
        if branches.len() < 2 {
            continue;
        }
        // join -> (branch index, entering flow) pairs reached without merging first
        let mut hits: BTreeMap<&NodeId, BTreeSet<(usize, &FlowId)>> = BTreeMap::new();
        for (i, b) in branches.iter().enumerate() {
            let mut stack = vec![*b];
            let mut visited: HashSet<&FlowId> = HashSet::new();
            while let Some(f) = stack.pop() {
                if !visited.insert(&f.id) {
                    continue;
                }
                let t = graph.node(f.target.as_str());
                if t.id == node.id {
                    continue;
                }
                let merges = graph.is_join(t.id.as_str());
                if merges && t.kind == NodeKind::ParallelGateway {
                    hits.entry(&t.id).or_default().insert((i, &f.id));
                    continue;
                }
                if merges {
                    continue;
                }
                stack.extend(graph.sequence_out(t.id.as_str()));
            }
        }
        for (join, entries) in hits {
            let branch_count = entries.iter().map(|(i, _)| i).collect::<BTreeSet<_>>().len();
            let flow_count = entries.iter().map(|(_, f)| f).collect::<BTreeSet<_>>().len();
            if branch_count > 1 && flow_count > 1 {
                out.push(Diagnostic::PotentialDeadlock {
                    split: node.id.clone(),
                    join: join.clone(),
                });
            }
        }
    }

    for f in graph.flows.values().filter(|f| f.synthetic) {
        if graph.node(f.target.as_str()).kind == NodeKind::StartEvent {
            out.push(Diagnostic::MessageStartEvent {
                flow: f.id.clone(),
                target: f.target.clone(),
            });
        }
    }

    out
}
