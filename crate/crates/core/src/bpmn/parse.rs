use std::collections::{HashMap, HashSet};

use indexmap::IndexMap;
use thiserror::Error;

use super::xml::{parse_tree, Element};
use super::{BpmnModel, FlowId, FlowNode, MessageFlow, NodeId, NodeKind, Pool, PoolId, SequenceFlow};

pub const BPMN_MODEL_NS: &str = "http://www.omg.org/spec/BPMN/20100524/MODEL";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("malformed XML: {0}")]
    MalformedXml(String),
    #[error("not a BPMN 2.0 document: {0}")]
    NotBpmn(String),
    #[error("unsupported element <{0}>")]
    UnsupportedElement(String),
    #[error("<{element}> is missing the `{attribute}` attribute")]
    MissingAttribute { element: String, attribute: String },
    #[error("flow `{flow}` references unknown element `{missing}`")]
    DanglingReference { flow: String, missing: String },
    #[error("duplicate id `{0}`")]
    DuplicateId(String),
    #[error("message flow `{0}` connects two nodes of the same pool")]
    SamePoolMessageFlow(String),
}

/// Process-body elements that carry no control-flow meaning.
const IGNORED_IN_PROCESS: &[&str] = &[
    "laneSet",
    "documentation",
    "extensionElements",
    "textAnnotation",
    "association",
    "group",
    "category",
    "property",
    "ioSpecification",
];

/// Event definitions outside the supported subset.
const UNSUPPORTED_EVENT_DEFINITIONS: &[&str] = &[
    "signalEventDefinition",
    "compensateEventDefinition",
];

pub fn parse_bpmn_bytes(bytes: &[u8]) -> Result<BpmnModel, ParseError> {
    let text = std::str::from_utf8(bytes)
        .map_err(|e| ParseError::MalformedXml(format!("input is not UTF-8: {e}")))?;
    parse_bpmn(text)
}

/// Parses BPMN 2.0 XML text. Elements are matched by local name inside the
/// BPMN model namespace, so `bpmn:`-prefixed and default-namespace documents
/// are both accepted.
pub fn parse_bpmn(xml_text: &str) -> Result<BpmnModel, ParseError> {
    let root = parse_tree(xml_text).map_err(ParseError::MalformedXml)?;
    if !(root.in_ns(BPMN_MODEL_NS) && root.name == "definitions") {
        return Err(ParseError::NotBpmn(format!(
            "root element is <{}>, expected bpmn:definitions",
            root.name
        )));
    }

    let mut ids = HashSet::new();
    let mut processes = Vec::new();
    let mut collaboration_name = None;
    let mut participants = Vec::new();
    let mut raw_messages = Vec::new();

    for child in bpmn_children(&root) {
        match child.name.as_str() {
            "process" => processes.push(read_process(child, &mut ids)?),
            "collaboration" => {
                if collaboration_name.is_none() {
                    collaboration_name = child.attr("name").map(str::to_owned);
                }
                for c in bpmn_children(child) {
                    match c.name.as_str() {
                        "participant" => participants.push(Participant {
                            id: required(c, "id")?.to_owned(),
                            name: c.attr("name").map(str::to_owned),
                            process_ref: c.attr("processRef").map(str::to_owned),
                        }),
                        "messageFlow" => {
                            let id = required(c, "id")?;
                            claim(&mut ids, id)?;
                            raw_messages.push((
                                id.to_owned(),
                                required(c, "sourceRef")?.to_owned(),
                                required(c, "targetRef")?.to_owned(),
                            ));
                        }
                        _ => {}
                    }
                }
            }
            _ => {}
        }
    }

    if processes.is_empty() {
        return Err(ParseError::NotBpmn("document contains no process".into()));
    }

    let mut pools = Vec::new();
    let mut process_pool: HashMap<String, PoolId> = HashMap::new();
    let participant_ids: HashSet<&str> = participants.iter().map(|p| p.id.as_str()).collect();
    for p in &participants {
        let pool_id = PoolId(p.id.clone());
        if let Some(process_ref) = &p.process_ref {
            if !processes.iter().any(|pr| &pr.id == process_ref) {
                return Err(ParseError::DanglingReference {
                    flow: p.id.clone(),
                    missing: process_ref.clone(),
                });
            }
            process_pool.entry(process_ref.clone()).or_insert(pool_id.clone());
        }
        pools.push(Pool {
            id: pool_id,
            name: p.name.clone(),
            node_ids: Vec::new(),
        });
    }
    for pr in &processes {
        if !process_pool.contains_key(&pr.id) {
            let id = PoolId(pr.id.clone());
            process_pool.insert(pr.id.clone(), id.clone());
            pools.push(Pool {
                id,
                name: pr.name.clone().or_else(|| Some(pr.id.clone())),
                node_ids: Vec::new(),
            });
        }
    }

    let mut nodes = IndexMap::new();
    let mut sequence_flows = Vec::new();
    for pr in processes.iter() {
        let pool_id = &process_pool[&pr.id];
        let pool = pools
            .iter_mut()
            .find(|p| &p.id == pool_id)
            .expect("every process has a pool");
        for (id, name, kind) in &pr.nodes {
            pool.node_ids.push(NodeId(id.clone()));
            nodes.insert(
                NodeId(id.clone()),
                FlowNode {
                    id: NodeId(id.clone()),
                    name: name.clone(),
                    kind: *kind,
                    pool: pool_id.clone(),
                },
            );
        }
        let local: HashSet<&str> = pr.nodes.iter().map(|(id, _, _)| id.as_str()).collect();
        for f in &pr.flows {
            for end in [&f.source, &f.target] {
                if !local.contains(end.as_str()) {
                    return Err(ParseError::DanglingReference {
                        flow: f.id.to_string(),
                        missing: end.to_string(),
                    });
                }
            }
            sequence_flows.push(f.clone());
        }
    }

    let mut message_flows = Vec::new();
    for (id, source, target) in raw_messages {
        let (Some(s), Some(t)) = (nodes.get(source.as_str()), nodes.get(target.as_str())) else {
            // A flow touching a collapsed participant carries no control flow.
            let missing = [&source, &target]
                .into_iter()
                .find(|r| !nodes.contains_key(r.as_str()) && !participant_ids.contains(r.as_str()));
            if let Some(missing) = missing {
                return Err(ParseError::DanglingReference {
                    flow: id,
                    missing: missing.clone(),
                });
            }
            continue;
        };
        if s.pool == t.pool {
            return Err(ParseError::SamePoolMessageFlow(id));
        }
        message_flows.push(MessageFlow {
            id: FlowId(id),
            source: NodeId(source),
            target: NodeId(target),
        });
    }

    let source_name = collaboration_name
        .or_else(|| processes.iter().find_map(|p| p.name.clone()))
        .or_else(|| root.attr("name").map(str::to_owned))
        .unwrap_or_else(|| processes[0].id.clone());

    Ok(BpmnModel {
        pools,
        nodes,
        sequence_flows,
        message_flows,
        source_name,
    })
}

struct Participant {
    id: String,
    name: Option<String>,
    process_ref: Option<String>,
}

struct RawProcess {
    id: String,
    name: Option<String>,
    nodes: Vec<(String, Option<String>, NodeKind)>,
    flows: Vec<SequenceFlow>,
}

fn read_process(el: &Element, ids: &mut HashSet<String>) -> Result<RawProcess, ParseError> {
    let mut out = RawProcess {
        id: required(el, "id")?.to_owned(),
        name: el.attr("name").map(str::to_owned),
        nodes: Vec::new(),
        flows: Vec::new(),
    };
    for child in bpmn_children(el) {
        let tag = child.name.as_str();
        if let Some(kind) = NodeKind::from_tag(tag) {
            if let Some(def) = bpmn_children(child)
                .find(|c| UNSUPPORTED_EVENT_DEFINITIONS.contains(&c.name.as_str()))
            {
                return Err(ParseError::UnsupportedElement(def.name.clone()));
            }
            let id = required(child, "id")?;
            claim(ids, id)?;
            out.nodes
                .push((id.to_owned(), child.attr("name").map(str::to_owned), kind));
        } else if tag == "sequenceFlow" {
            let id = required(child, "id")?;
            claim(ids, id)?;
            let condition = bpmn_children(child)
                .find(|c| c.name == "conditionExpression")
                .map(|c| c.text.trim().to_owned())
                .filter(|t| !t.is_empty());
            out.flows.push(SequenceFlow {
                id: FlowId(id.to_owned()),
                source: NodeId(required(child, "sourceRef")?.to_owned()),
                target: NodeId(required(child, "targetRef")?.to_owned()),
                synthetic: false,
                condition_label: child.attr("name").map(str::to_owned).or(condition),
            });
        } else if !IGNORED_IN_PROCESS.contains(&tag) {
            return Err(ParseError::UnsupportedElement(tag.to_owned()));
        }
    }
    Ok(out)
}

fn bpmn_children(el: &Element) -> impl Iterator<Item = &Element> {
    el.children.iter().filter(|c| c.in_ns(BPMN_MODEL_NS))
}

fn required<'a>(el: &'a Element, attribute: &str) -> Result<&'a str, ParseError> {
    el.attr(attribute)
        .filter(|v| !v.is_empty())
        .ok_or_else(|| ParseError::MissingAttribute {
            element: el.name.clone(),
            attribute: attribute.to_owned(),
        })
}

fn claim(ids: &mut HashSet<String>, id: &str) -> Result<(), ParseError> {
    if ids.insert(id.to_owned()) {
        Ok(())
    } else {
        Err(ParseError::DuplicateId(id.to_owned()))
    }
}
