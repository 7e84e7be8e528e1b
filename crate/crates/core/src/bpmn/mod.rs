//! Typed in-memory model of the control-flow subset of BPMN 2.0.

mod parse;
mod xml;

use std::fmt;

use indexmap::IndexMap;

pub use parse::{parse_bpmn, parse_bpmn_bytes, ParseError, BPMN_MODEL_NS};

macro_rules! string_id {
    ($(#[$meta:meta])* $name:ident) => {
        $(#[$meta])*
        #[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
        pub struct $name(pub String);

        impl $name {
            pub fn as_str(&self) -> &str {
                &self.0
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(&self.0)
            }
        }

        impl From<&str> for $name {
            fn from(s: &str) -> Self {
                Self(s.to_owned())
            }
        }

        impl From<String> for $name {
            fn from(s: String) -> Self {
                Self(s)
            }
        }

        impl std::borrow::Borrow<str> for $name {
            fn borrow(&self) -> &str {
                &self.0
            }
        }
    };
}

string_id!(
    /// The `id` attribute of a flow node.
    NodeId
);
string_id!(
    /// The `id` attribute of a sequence or message flow.
    FlowId
);
string_id!(
    /// A participant id, or the process id for an implicit pool.
    PoolId
);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum NodeKind {
    Task,
    StartEvent,
    EndEvent,
    IntermediateCatchEvent,
    IntermediateThrowEvent,
    ExclusiveGateway,
    InclusiveGateway,
    ParallelGateway,
    EventBasedGateway,
}

impl NodeKind {
    pub fn is_gateway(self) -> bool {
        matches!(
            self,
            NodeKind::ExclusiveGateway
                | NodeKind::InclusiveGateway
                | NodeKind::ParallelGateway
                | NodeKind::EventBasedGateway
        )
    }

    pub fn is_event(self) -> bool {
        matches!(
            self,
            NodeKind::StartEvent
                | NodeKind::EndEvent
                | NodeKind::IntermediateCatchEvent
                | NodeKind::IntermediateThrowEvent
        )
    }

    /// Maps a BPMN element local name onto a node kind. Task variants all
    /// collapse to [`NodeKind::Task`].
    pub fn from_tag(tag: &str) -> Option<Self> {
        Some(match tag {
            "task" | "sendTask" | "receiveTask" | "userTask" | "serviceTask" | "manualTask"
            | "scriptTask" | "businessRuleTask" => NodeKind::Task,
            "startEvent" => NodeKind::StartEvent,
            "endEvent" => NodeKind::EndEvent,
            "intermediateCatchEvent" => NodeKind::IntermediateCatchEvent,
            "intermediateThrowEvent" => NodeKind::IntermediateThrowEvent,
            "exclusiveGateway" => NodeKind::ExclusiveGateway,
            "inclusiveGateway" => NodeKind::InclusiveGateway,
            "parallelGateway" => NodeKind::ParallelGateway,
            "eventBasedGateway" => NodeKind::EventBasedGateway,
            _ => return None,
        })
    }

    /// PDDL type the node belongs to (`task`, `event` or `gateway`).
    pub fn pddl_type(self) -> &'static str {
        if self == NodeKind::Task {
            "task"
        } else if self.is_gateway() {
            "gateway"
        } else {
            "event"
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FlowNode {
    pub id: NodeId,
    pub name: Option<String>,
    pub kind: NodeKind,
    pub pool: PoolId,
}

impl FlowNode {
    /// The name if present and non-blank, else the id.
    pub fn label(&self) -> &str {
        match &self.name {
            Some(n) if !n.trim().is_empty() => n.trim(),
            _ => self.id.as_str(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SequenceFlow {
    pub id: FlowId,
    pub source: NodeId,
    pub target: NodeId,
    /// True for flows added by the translator from message flows.
    pub synthetic: bool,
    /// Branch condition text, kept for documentation only.
    pub condition_label: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MessageFlow {
    pub id: FlowId,
    pub source: NodeId,
    pub target: NodeId,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Pool {
    pub id: PoolId,
    pub name: Option<String>,
    /// Member nodes in document order.
    pub node_ids: Vec<NodeId>,
}

impl Pool {
    pub fn label(&self) -> &str {
        match &self.name {
            Some(n) if !n.trim().is_empty() => n.trim(),
            _ => self.id.as_str(),
        }
    }
}

/// A parsed diagram. `nodes` iterates in document order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BpmnModel {
    pub pools: Vec<Pool>,
    pub nodes: IndexMap<NodeId, FlowNode>,
    pub sequence_flows: Vec<SequenceFlow>,
    pub message_flows: Vec<MessageFlow>,
    pub source_name: String,
}

impl BpmnModel {
    pub fn node(&self, id: &str) -> Option<&FlowNode> {
        self.nodes.get(id)
    }

    pub fn pool(&self, id: &PoolId) -> Option<&Pool> {
        self.pools.iter().find(|p| &p.id == id)
    }
}
