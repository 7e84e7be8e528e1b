#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::path::{Path, PathBuf};

use bpmn2pddl::bpmn::{NodeKind, NodeId};
use bpmn2pddl::encode::{translate, DoneMode, EncodeOptions, ProblemVariant, Translation};
use bpmn2pddl::fond::{self, GroundTask, Limits, StateSpace};
use bpmn2pddl::{build_graph, parse_bpmn, MessageStrategy, ProcessGraph};

pub mod checks;

pub fn tests_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests")
}

pub fn fixture(name: &str) -> PathBuf {
    tests_dir().join("fixtures").join(format!("{name}.bpmn"))
}

pub fn corpus_files() -> Vec<PathBuf> {
    let mut files: Vec<PathBuf> = std::fs::read_dir(tests_dir().join("corpus"))
        .expect("corpus directory")
        .map(|e| e.expect("dir entry").path())
        .filter(|p| p.extension().is_some_and(|e| e == "bpmn"))
        .collect();
    files.sort();
    files
}

pub fn stem(path: &Path) -> String {
    path.file_stem().unwrap().to_string_lossy().into_owned()
}

pub fn load(path: &Path, strategy: MessageStrategy) -> ProcessGraph {
    let text = std::fs::read_to_string(path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    let model = parse_bpmn(&text).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    build_graph(&model, strategy).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

pub fn translate_path(path: &Path, strategy: MessageStrategy, options: &EncodeOptions) -> (ProcessGraph, Translation) {
    let graph = load(path, strategy);
    let t = translate(&graph, options).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    (graph, t)
}

pub fn variant<'t>(t: &'t Translation, name: &str) -> &'t ProblemVariant {
    t.problems
        .iter()
        .find(|v| v.variant == name)
        .unwrap_or_else(|| panic!("no variant {name}"))
}

pub fn explore_variant(t: &Translation, v: &ProblemVariant) -> (GroundTask, StateSpace) {
    let task = fond::ground(&t.domain, &v.problem).expect("grounding");
    let space = fond::explore(&task, &Limits::default()).expect("exploration");
    (task, space)
}

/// Parenthesis and atom tokens, so layout differences disappear.
pub fn tokens(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut cur = String::new();
    for c in text.chars() {
        if c == '(' || c == ')' || c.is_whitespace() {
            if !cur.is_empty() {
                out.push(std::mem::take(&mut cur));
            }
            if !c.is_whitespace() {
                out.push(c.to_string());
            }
        } else {
            cur.push(c);
        }
    }
    if !cur.is_empty() {
        out.push(cur);
    }
    out
}

pub fn contains_run(haystack: &[String], needle: &[String]) -> bool {
    needle.is_empty() || haystack.windows(needle.len()).any(|w| w == needle)
}

pub fn is_counter(p: &str) -> bool {
    p.starts_with("count_")
}

pub type Marking = BTreeSet<String>;

/// Direct token-game reading of a process graph. Places are the marker names
/// the translation assigned to flows, plus one place per inclusive join that
/// holds the synchronised token, per-pool completion places and `done`.
pub struct TokenGame<'g> {
    graph: &'g ProcessGraph,
    t: &'g Translation,
    done_mode: DoneMode,
    spontaneous: bool,
    /// Inclusive join -> places inside the split/join block.
    regions: BTreeMap<NodeId, BTreeSet<String>>,
    /// Inclusive split -> its join.
    join_of: BTreeMap<NodeId, NodeId>,
}

pub struct Reachable {
    pub states: BTreeSet<Marking>,
    pub edges: BTreeSet<(Marking, Marking)>,
}

impl<'g> TokenGame<'g> {
    pub fn new(graph: &'g ProcessGraph, t: &'g Translation, options: &EncodeOptions) -> Self {
        let mut regions = BTreeMap::new();
        let mut join_of = BTreeMap::new();
        for (join, split) in &t.names.inclusive_pairs {
            regions.insert(join.clone(), region(graph, t, split, join));
            join_of.insert(split.clone(), join.clone());
        }
        Self {
            graph,
            t,
            done_mode: options.done_mode,
            spontaneous: options.allow_spontaneous_start,
            regions,
            join_of,
        }
    }

    fn place(&self, flow: &str) -> String {
        self.t.names.flows[flow].clone()
    }

    /// Tokens on every outgoing sequence flow of each start event.
    pub fn start_marking(&self, starts: &[&NodeId]) -> Marking {
        starts
            .iter()
            .flat_map(|s| self.graph.sequence_out(s.as_str()).map(|f| self.place(f.id.as_str())))
            .collect()
    }

    /// The markings the problem variants are expected to start from.
    pub fn expected_initial_markings(&self) -> Vec<Marking> {
        let mut out = Vec::new();
        let triggered = |id: &NodeId| self.graph.synthetic_in(id.as_str()).next().is_some();
        let all: Vec<&NodeId> = self.graph.start_nodes.values().flatten().filter(|id| !triggered(id)).collect();
        out.push(self.start_marking(&all));
        for pool in self.graph.active_pools() {
            let starts: Vec<&NodeId> = self.graph.start_nodes[&pool.id].iter().collect();
            out.push(self.start_marking(&starts));
        }
        if self.spontaneous {
            out.push(Marking::new());
        }
        out
    }

    fn done(&self) -> &str {
        &self.t.names.done
    }

    /// All successor markings, one entry per firing.
    pub fn successors(&self, m: &Marking) -> Vec<Marking> {
        if m.contains(self.done()) {
            return Vec::new();
        }
        let mut out = Vec::new();
        for node in self.graph.nodes.values() {
            let id = node.id.as_str();
            match node.kind {
                NodeKind::StartEvent => {
                    if self.spontaneous && self.graph.synthetic_in(id).next().is_none() {
                        let mut n = m.clone();
                        n.extend(self.graph.sequence_out(id).map(|f| self.place(f.id.as_str())));
                        out.push(n);
                    }
                }
                NodeKind::Task
                | NodeKind::EndEvent
                | NodeKind::IntermediateCatchEvent
                | NodeKind::IntermediateThrowEvent => self.fire_activity(node.id.as_str(), node.kind, m, &mut out),
                NodeKind::ExclusiveGateway | NodeKind::EventBasedGateway => {
                    for fin in self.graph.sequence_in(id) {
                        if !m.contains(&self.place(fin.id.as_str())) {
                            continue;
                        }
                        for fout in self.graph.sequence_out(id) {
                            let mut n = m.clone();
                            n.remove(&self.place(fin.id.as_str()));
                            n.insert(self.place(fout.id.as_str()));
                            out.push(n);
                        }
                    }
                }
                NodeKind::ParallelGateway => {
                    let ins: Vec<String> = self.graph.sequence_in(id).map(|f| self.place(f.id.as_str())).collect();
                    if !ins.is_empty() && ins.iter().all(|p| m.contains(p)) {
                        let mut n = m.clone();
                        for p in &ins {
                            n.remove(p);
                        }
                        n.extend(self.graph.sequence_out(id).map(|f| self.place(f.id.as_str())));
                        out.push(n);
                    }
                }
                NodeKind::InclusiveGateway => self.fire_inclusive(&node.id, m, &mut out),
            }
        }
        if self.done_mode == DoneMode::AllPools {
            let pools: Vec<&String> = self.t.names.pool_done.values().collect();
            if pools.iter().all(|p| m.contains(*p)) {
                let mut n = m.clone();
                n.insert(self.done().to_owned());
                out.push(n);
            }
        }
        out
    }

    fn fire_activity(&self, id: &str, kind: NodeKind, m: &Marking, out: &mut Vec<Marking>) {
        let ins: Vec<Option<String>> = {
            let v: Vec<Option<String>> = self.graph.sequence_in(id).map(|f| Some(self.place(f.id.as_str()))).collect();
            if v.is_empty() { vec![None] } else { v }
        };
        let msgs: Vec<Option<String>> = {
            let v: Vec<Option<String>> = self.graph.synthetic_in(id).map(|f| Some(self.place(f.id.as_str()))).collect();
            if v.is_empty() { vec![None] } else { v }
        };
        let mut produced: Vec<String> = self.graph.outgoing(id).iter().map(|f| self.place(f.as_str())).collect();
        if kind == NodeKind::EndEvent {
            let pool = &self.graph.node(id).pool;
            produced.push(self.t.names.pool_done.get(pool).cloned().unwrap_or_else(|| self.done().to_owned()));
        }
        let mut options: Vec<Vec<String>> = vec![Vec::new()];
        if kind == NodeKind::Task && self.graph.msg_strategy == MessageStrategy::ExclusiveEmulation {
            for msg in self.graph.task_task_messages.iter().filter(|msg| msg.source.as_str() == id) {
                options.push(vec![self.t.names.flows[msg.id.as_str()].clone()]);
            }
        }
        for fin in &ins {
            for msg in &msgs {
                let consumed: Vec<&String> = fin.iter().chain(msg.iter()).collect();
                if consumed.is_empty() || !consumed.iter().all(|p| m.contains(*p)) {
                    continue;
                }
                for extra in &options {
                    let mut n = m.clone();
                    for p in &consumed {
                        n.remove(*p);
                    }
                    n.extend(produced.iter().cloned());
                    n.extend(extra.iter().cloned());
                    out.push(n);
                }
            }
        }
    }

    fn fire_inclusive(&self, id: &NodeId, m: &Marking, out: &mut Vec<Marking>) {
        let ins: Vec<String> = self.graph.sequence_in(id.as_str()).map(|f| self.place(f.id.as_str())).collect();
        let outs: Vec<String> = self.graph.sequence_out(id.as_str()).map(|f| self.place(f.id.as_str())).collect();
        if let Some(join) = self.join_of.get(id) {
            let busy = self.regions[join].iter().any(|p| m.contains(p));
            if !busy && m.contains(&ins[0]) {
                for mask in 1u32..(1 << outs.len()) {
                    let mut n = m.clone();
                    n.remove(&ins[0]);
                    n.extend((0..outs.len()).filter(|i| mask & (1 << i) != 0).map(|i| outs[i].clone()));
                    out.push(n);
                }
            }
        }
        if let Some(region) = self.regions.get(id) {
            let hold = &self.t.names.nodes[id];
            for p in ins.iter().filter(|p| m.contains(*p)) {
                let mut n = m.clone();
                n.remove(p);
                if !region.iter().any(|q| n.contains(q)) {
                    n.insert(hold.clone());
                }
                out.push(n);
            }
            if m.contains(hold) {
                let mut n = m.clone();
                n.remove(hold);
                n.insert(outs[0].clone());
                out.push(n);
            }
        }
    }

    pub fn explore(&self, init: Marking) -> Reachable {
        let mut states = BTreeSet::from([init.clone()]);
        let mut edges = BTreeSet::new();
        let mut queue = VecDeque::from([init]);
        while let Some(m) = queue.pop_front() {
            for n in self.successors(&m) {
                edges.insert((m.clone(), n.clone()));
                if states.insert(n.clone()) {
                    queue.push_back(n);
                }
            }
        }
        Reachable { states, edges }
    }
}

/// Places on flows reachable from the split without passing through the join.
fn region(graph: &ProcessGraph, t: &Translation, split: &NodeId, join: &NodeId) -> BTreeSet<String> {
    let mut places = BTreeSet::new();
    let mut seen = BTreeSet::new();
    let mut stack = vec![split.clone()];
    while let Some(n) = stack.pop() {
        for f in graph.sequence_out(n.as_str()) {
            places.insert(t.names.flows[f.id.as_str()].clone());
            if &f.target != join && seen.insert(f.target.clone()) {
                stack.push(f.target.clone());
            }
        }
    }
    places
}

/// The planner-side state graph with counters erased.
pub fn pddl_reachable(task: &GroundTask, space: &StateSpace) -> Result<Reachable, String> {
    let erase = |i: usize| -> Marking {
        task.state_names(&space.states[i])
            .into_iter()
            .filter(|p| !is_counter(p))
            .map(str::to_owned)
            .collect()
    };
    let mut states = BTreeSet::new();
    for i in 0..space.len() {
        if !states.insert(erase(i)) {
            return Err(format!("two planner states collapse to {:?}", erase(i)));
        }
    }
    let mut edges = BTreeSet::new();
    for (i, ts) in space.transitions.iter().enumerate() {
        for t in ts {
            for &j in &t.successors {
                edges.insert((erase(i), erase(j)));
            }
        }
    }
    Ok(Reachable { states, edges })
}

/// Compares one problem variant against the token game. Returns the number
/// of states on success.
pub fn check_equivalence(graph: &ProcessGraph, t: &Translation, options: &EncodeOptions, v: &ProblemVariant) -> Result<usize, String> {
    let game = TokenGame::new(graph, t, options);
    let init: Marking = v.problem.init.iter().filter(|p| !is_counter(p)).cloned().collect();
    if !game.expected_initial_markings().contains(&init) {
        return Err(format!("{}: unexpected initial state {init:?}", v.variant));
    }
    let (task, space) = explore_variant(t, v);
    let planner = pddl_reachable(&task, &space)?;
    let oracle = game.explore(init);
    if planner.states != oracle.states {
        let only_p: Vec<_> = planner.states.difference(&oracle.states).take(3).collect();
        let only_o: Vec<_> = oracle.states.difference(&planner.states).take(3).collect();
        return Err(format!("{}: state sets differ; planner only {only_p:?}; oracle only {only_o:?}", v.variant));
    }
    if planner.edges != oracle.edges {
        let only_p: Vec<_> = planner.edges.difference(&oracle.edges).take(3).collect();
        let only_o: Vec<_> = oracle.edges.difference(&planner.edges).take(3).collect();
        return Err(format!("{}: transitions differ; planner only {only_p:?}; oracle only {only_o:?}", v.variant));
    }
    Ok(planner.states.len())
}

pub fn default_options() -> EncodeOptions {
    EncodeOptions::default()
}
