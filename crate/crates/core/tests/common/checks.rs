//! One function per acceptance property. Each returns a short summary on
//! success and a description of the first problem otherwise.

use std::collections::BTreeSet;
use std::panic::{self, AssertUnwindSafe};
use std::time::{Duration, Instant};

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

use bpmn2pddl::encode::{translate, EncodeOptions, Translation};
use bpmn2pddl::fond::{self, enumerate_traces, solve, verify_policy, SolveMode, StateSpace, Terminal, TraceLimits};
use bpmn2pddl::pddl::{parse_pddl, render_domain, render_problem, PddlFile};
use bpmn2pddl::{build_graph, parse_bpmn, MessageStrategy};

use super::*;

pub type Outcome = Result<String, String>;

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok { Ok(()) } else { Err(msg()) }
}

fn small(space: &StateSpace, elapsed: Duration, what: &str) -> Result<(), String> {
    ensure(space.len() < 100, || format!("{what}: {} states", space.len()))?;
    ensure(elapsed < Duration::from_secs(1), || format!("{what}: took {elapsed:?}"))
}

/// Parse, build, encode and render each corpus file, timing the whole chain.
pub fn translation_speed() -> Outcome {
    let files = corpus_files();
    ensure(files.len() >= 8, || format!("only {} corpus diagrams", files.len()))?;
    let mut slowest = Duration::ZERO;
    for path in &files {
        let text = std::fs::read_to_string(path).map_err(|e| e.to_string())?;
        let start = Instant::now();
        let model = parse_bpmn(&text).map_err(|e| format!("{}: {e}", stem(path)))?;
        let graph = build_graph(&model, MessageStrategy::ExclusiveEmulation).map_err(|e| e.to_string())?;
        let t = translate(&graph, &default_options()).map_err(|e| e.to_string())?;
        let mut bytes = render_domain(&t.domain).len();
        for v in &t.problems {
            bytes += render_problem(&v.problem).len();
        }
        let elapsed = start.elapsed();
        ensure(bytes > 0, || "empty output".into())?;
        ensure(elapsed < Duration::from_secs(1), || format!("{} took {elapsed:?}", stem(path)))?;
        slowest = slowest.max(elapsed);
    }
    Ok(format!("{} diagrams, slowest {:.2} ms", files.len(), slowest.as_secs_f64() * 1e3))
}

pub fn domain_lines(t: &Translation) -> usize {
    render_domain(&t.domain).lines().count()
}

/// The credit-scoring domain must fall in 50..=150 lines. Others are only
/// reported when they leave 20..=300.
pub fn domain_size() -> Outcome {
    let mut notes = Vec::new();
    let mut credit = None;
    for path in corpus_files() {
        let (_, t) = translate_path(&path, MessageStrategy::ExclusiveEmulation, &default_options());
        let lines = domain_lines(&t);
        if stem(&path) == "credit_scoring" {
            credit = Some(lines);
        } else if !(20..=300).contains(&lines) {
            notes.push(format!("{} has {lines} lines", stem(&path)));
        }
    }
    let lines = credit.ok_or("no credit_scoring diagram in the corpus")?;
    ensure((50..=150).contains(&lines), || format!("credit_scoring domain has {lines} lines"))?;
    let mut summary = format!("credit_scoring {lines} lines");
    if !notes.is_empty() {
        summary.push_str(&format!(" (outside 20..=300: {})", notes.join(", ")));
    }
    Ok(summary)
}

fn run(text: &str) -> Vec<String> {
    tokens(text)
}

pub fn reference_text() -> Outcome {
    let options = EncodeOptions {
        fig4_compat: true,
        ..default_options()
    };
    let (_, t) = translate_path(&fixture("credit_fragment"), MessageStrategy::ExclusiveEmulation, &options);
    let rendered = tokens(&render_domain(&t.domain));
    let expected = [
        "(define (domain credit_scoring)\n(:requirements :strips :typing)\n(:types task event gateway)",
        "(:action request_credit_score
         :precondition (and (StartEvent_1els7eb))
         :effect (and (EventBasedGateway_02s95tm)
                  (not (StartEvent_1els7eb))))",
        "(:action event_EventBasedGateway_02s95tm
         :precondition (and (EventBasedGateway_02s95tm))
         :effect (and (oneof (IntermediateCatchEvent_0ujob24)",
    ];
    ensure(rendered.starts_with(&run(expected[0])), || "domain header differs".into())?;
    for e in &expected[1..] {
        let want = run(e);
        ensure(contains_run(&rendered, &want), || format!("missing `{}`", want.join(" ")))?;
    }
    let gateway = t.domain.action("event_EventBasedGateway_02s95tm").ok_or("no gateway action")?;
    let oneofs = gateway.effect.oneofs();
    ensure(oneofs.len() == 1 && oneofs[0].len() == 2, || "gateway effect is not a two-way oneof".into())?;
    ensure(gateway.effect.atoms().contains(&"IntermediateCatchEvent_0yg7cuh"), || "second catch event missing".into())?;
    Ok("header, request_credit_score and gateway oneof match".into())
}

/// Every alternative of a split turns on exactly one of its branch markers,
/// and the number of complete runs is the product of the branch counts.
pub fn exclusive_split() -> Outcome {
    let start = Instant::now();
    let (graph, t) = translate_path(&fixture("exclusive_product"), MessageStrategy::Ignore, &default_options());
    let mut product = 1;
    for node in graph.nodes.values().filter(|n| n.kind.is_gateway() && graph.sequence_out(n.id.as_str()).count() > 1) {
        let branches: BTreeSet<&str> = graph
            .sequence_out(node.id.as_str())
            .map(|f| t.names.flows[f.id.as_str()].as_str())
            .collect();
        product *= branches.len();
        let action = t
            .domain
            .actions
            .iter()
            .find(|a| a.name == format!("event_{}", t.names.nodes[&node.id]))
            .ok_or_else(|| format!("no action for {}", node.id))?;
        let oneofs = action.effect.oneofs();
        ensure(oneofs.len() == 1 && oneofs[0].len() == branches.len(), || format!("{}: wrong outcome count", action.name))?;
        for alt in oneofs[0] {
            let on = alt.atoms().into_iter().filter(|p| branches.contains(p)).count();
            ensure(on == 1, || format!("{}: an outcome activates {on} successors", action.name))?;
        }
    }
    let (_, space) = explore_variant(&t, &t.problems[0]);
    let traces = enumerate_traces(&space, None, &TraceLimits::default()).map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    small(&space, elapsed, "exclusive")?;
    ensure(traces.count(Terminal::Goal) == product && traces.len() == product, || {
        format!("{} traces, expected {product}", traces.len())
    })?;
    Ok(format!("{product} traces over {} states", space.len()))
}

pub fn parallel_split() -> Outcome {
    let start = Instant::now();
    let (graph, t) = translate_path(&fixture("parallel"), MessageStrategy::Ignore, &default_options());
    let (task, space) = explore_variant(&t, &t.problems[0]);
    let join_inputs: Vec<u32> = graph
        .sequence_in("J")
        .map(|f| task.predicate(&t.names.flows[f.id.as_str()]).expect("declared"))
        .collect();
    let join = task.actions.iter().position(|a| a.name == "event_J").ok_or("no join action")?;
    let mut full_states = BTreeSet::new();
    for (s, ts) in space.transitions.iter().enumerate() {
        let present = join_inputs.iter().filter(|&&p| space.states[s].contains(p)).count();
        let fires = ts.iter().any(|tr| tr.action == join);
        ensure(!fires || present == join_inputs.len(), || format!("join fires in state {s} with {present} markers"))?;
        if present == join_inputs.len() {
            full_states.insert(s);
            ensure(fires, || format!("join blocked in state {s}"))?;
        }
    }
    // Both orders of the branch tasks end in the one state holding both markers.
    let split_out = (0..space.len())
        .find(|&s| space.transitions[s].len() == 2)
        .ok_or("no state with two interleavings")?;
    let after = |first: &str, second: &str| -> Option<usize> {
        let step = |s: usize, name: &str| {
            space.transitions[s]
                .iter()
                .find(|tr| task.actions[tr.action].name == name)
                .map(|tr| tr.successors[0])
        };
        step(step(split_out, first)?, second)
    };
    let (ab, ba) = (after("left", "right"), after("right", "left"));
    ensure(ab.is_some() && ab == ba, || format!("interleavings end in {ab:?} and {ba:?}"))?;
    ensure(full_states.len() == 1 && full_states.contains(&ab.unwrap()), || "join state is not unique".into())?;
    small(&space, start.elapsed(), "parallel")?;
    Ok(format!("{} states, join state unique", space.len()))
}

pub fn inclusive_split() -> Outcome {
    let start = Instant::now();
    let (graph, t) = translate_path(&fixture("inclusive"), MessageStrategy::Ignore, &default_options());
    let (task, space) = explore_variant(&t, &t.problems[0]);
    let split = task.actions.iter().position(|a| a.name == "event_G").ok_or("no split action")?;
    ensure(task.actions[split].outcomes.len() == 3, || {
        format!("split has {} outcomes", task.actions[split].outcomes.len())
    })?;

    let counters: Vec<u32> = t.names.counters["G"].iter().map(|c| task.predicate(c).unwrap()).collect();
    let mut branch: BTreeSet<u32> = BTreeSet::new();
    for f in graph.sequence_out("G").chain(graph.sequence_in("J")) {
        branch.insert(task.predicate(&t.names.flows[f.id.as_str()]).unwrap());
    }
    for (s, state) in space.states.iter().enumerate() {
        let on: Vec<usize> = (0..counters.len()).filter(|&k| state.contains(counters[k])).collect();
        let active = branch.iter().filter(|&&p| state.contains(p)).count();
        ensure(on.len() == 1, || format!("state {s} has {} counters set", on.len()))?;
        ensure(on[0] == active, || format!("state {s}: count {} with {active} active branches", on[0]))?;
    }

    let traces = enumerate_traces(&space, None, &TraceLimits::default()).map_err(|e| e.to_string())?;
    let release = task.actions.iter().position(|a| a.name == "event_J").ok_or("no release action")?;
    let mut families = BTreeSet::new();
    for trace in &traces.traces {
        ensure(trace.terminal == Terminal::Goal, || "a run does not reach the goal".into())?;
        for step in &trace.steps {
            if step.action == split {
                families.insert(step.outcome);
            }
            if step.action == release {
                ensure(space.states[step.state].contains(counters[0]), || "release without count 0".into())?;
            }
        }
        ensure(trace.steps.iter().any(|st| st.action == release), || "a run skips the release".into())?;
    }
    ensure(families.len() == 3, || format!("{} outcome families", families.len()))?;
    small(&space, start.elapsed(), "inclusive")?;
    Ok(format!("3 families, {} runs, {} states", traces.len(), space.len()))
}

pub fn gateway_semantics() -> Outcome {
    let parts = [exclusive_split()?, parallel_split()?, inclusive_split()?];
    Ok(parts.join("; "))
}

pub fn oracle_equivalence() -> Outcome {
    let mut variants = 0;
    let mut mismatches = Vec::new();
    for path in corpus_files() {
        let (graph, t) = translate_path(&path, MessageStrategy::ExclusiveEmulation, &default_options());
        for v in &t.problems {
            variants += 1;
            if let Err(e) = check_equivalence(&graph, &t, &default_options(), v) {
                mismatches.push(format!("{}: {e}", stem(&path)));
            }
        }
    }
    ensure(mismatches.is_empty(), || mismatches.join("; "))?;
    Ok(format!("{variants} problem variants, 0 mismatches"))
}

fn solvable(t: &Translation, v: &bpmn2pddl::encode::ProblemVariant, mode: SolveMode) -> Result<(StateSpace, bool), String> {
    let (task, space) = explore_variant(t, v);
    match solve(&task, &space, mode) {
        Ok(policy) => {
            verify_policy(&space, &policy)?;
            Ok((space, true))
        }
        Err(fond::FondError::Unsolvable(_)) => Ok((space, false)),
        Err(e) => Err(e.to_string()),
    }
}

pub fn solvability() -> Outcome {
    let mut count = 0;
    for path in corpus_files() {
        let (_, t) = translate_path(&path, MessageStrategy::ExclusiveEmulation, &default_options());
        for v in &t.problems {
            let (_, ok) = solvable(&t, v, SolveMode::StrongCyclic)?;
            ensure(ok, || format!("{} {} is not strong-cyclic solvable", stem(&path), v.variant))?;
            count += 1;
        }
    }

    let (_, t) = translate_path(&fixture("xor_and_deadlock"), MessageStrategy::Ignore, &default_options());
    let (space, strong) = solvable(&t, &t.problems[0], SolveMode::Strong)?;
    ensure(!strong, || "pathology is strong solvable".into())?;
    ensure(!space.deadlocks.is_empty(), || "pathology has no deadlock".into())?;

    let (_, t) = translate_path(&fixture("retry_loop"), MessageStrategy::Ignore, &default_options());
    let (_, cyclic) = solvable(&t, &t.problems[0], SolveMode::StrongCyclic)?;
    let (_, strong_loop) = solvable(&t, &t.problems[0], SolveMode::Strong)?;
    ensure(cyclic && !strong_loop, || format!("loop: cyclic {cyclic}, strong {strong_loop}"))?;
    Ok(format!(
        "{count} corpus problems solvable; pathology has {} deadlocks; loop needs cycles",
        space.deadlocks.len()
    ))
}

pub fn round_trip() -> Outcome {
    let mut files = 0;
    for path in corpus_files() {
        let (_, t) = translate_path(&path, MessageStrategy::ExclusiveEmulation, &default_options());
        let mut texts = vec![render_domain(&t.domain)];
        texts.extend(t.problems.iter().map(|v| render_problem(&v.problem)));
        for text in texts {
            let again = match parse_pddl(&text).map_err(|e| format!("{}: {e}", stem(&path)))? {
                PddlFile::Domain(d) => render_domain(&d),
                PddlFile::Problem(p) => render_problem(&p),
            };
            ensure(again == text, || format!("{} does not round-trip", stem(&path)))?;
            files += 1;
        }
    }
    Ok(format!("{files} files byte-identical"))
}

/// Goal-reaching runs of the strong-cyclic policy for one variant.
pub fn policy_runs(strategy: MessageStrategy, variant_name: &str) -> Result<(Translation, Vec<BTreeSet<String>>), String> {
    let (_, t) = translate_path(&fixture("task_message"), strategy, &default_options());
    let v = variant(&t, variant_name).clone();
    let (task, space) = explore_variant(&t, &v);
    let policy = solve(&task, &space, SolveMode::StrongCyclic).map_err(|e| e.to_string())?;
    let traces = enumerate_traces(&space, Some(&policy), &TraceLimits::default()).map_err(|e| e.to_string())?;
    let mut runs = Vec::new();
    for trace in &traces.traces {
        ensure(trace.terminal == Terminal::Goal, || format!("{:?} run", trace.terminal))?;
        let mut seen: BTreeSet<String> = BTreeSet::new();
        for s in trace.steps.iter().map(|st| st.state).chain([trace.final_state]) {
            seen.extend(task.state_names(&space.states[s]).into_iter().map(str::to_owned));
        }
        runs.push(seen);
    }
    Ok((t, runs))
}

pub fn message_strategies() -> Outcome {
    let (_, ignore) = policy_runs(MessageStrategy::Ignore, "prestarted_seller")?;
    ensure(ignore.len() == 1, || format!("Ignore gives {} traces", ignore.len()))?;
    let (t, emulated) = policy_runs(MessageStrategy::ExclusiveEmulation, "prestarted_seller")?;
    let marker = &t.names.flows["Msg_invoice"];
    ensure(emulated.len() >= 2, || format!("emulation gives {} traces", emulated.len()))?;
    ensure(emulated.iter().any(|r| r.contains(marker)), || "no trace delivers the message".into())?;
    ensure(emulated.iter().any(|r| !r.contains(marker)), || "every trace delivers the message".into())?;
    Ok(format!("Ignore 1 trace, emulation {} traces", emulated.len()))
}

/// Seed inputs for mutation: the corpus, the fixtures and a few edge cases.
fn seeds() -> Vec<Vec<u8>> {
    let mut out: Vec<Vec<u8>> = corpus_files()
        .iter()
        .chain(std::fs::read_dir(tests_dir().join("fixtures")).unwrap().map(|e| e.unwrap().path()).collect::<Vec<_>>().iter())
        .map(|p| std::fs::read(p).unwrap())
        .collect();
    out.push(b"<bpmn:definitions xmlns:bpmn=\"http://www.omg.org/spec/BPMN/20100524/MODEL\"/>".to_vec());
    out.push(Vec::new());
    out
}

const FRAGMENTS: &[&str] = &[
    "<", ">", "/>", "</", "\"", "&", "&amp;", "&#0;", "&#xFFFFFF;", "&undefined;", "<![CDATA[", "]]>", "<!--", "-->",
    "<?xml version=\"1.0\"?>", "<!DOCTYPE x [<!ENTITY a \"b\">]>", "xmlns=\"\"", "xmlns:bpmn=\"urn:other\"",
    "<bpmn:task id=\"T\"/>", "<bpmn:startEvent id=\"S\"/>", "<bpmn:sequenceFlow id=\"f\" sourceRef=\"S\" targetRef=\"T\"/>",
    "<bpmn:messageFlow id=\"m\" sourceRef=\"T\" targetRef=\"S\"/>", "<bpmn:inclusiveGateway id=\"G\"/>",
    "<bpmn:process id=\"P\">", "</bpmn:process>", "sourceRef=\"\"", "id=\"Start_order\"", "\u{feff}", "\u{0}", "é",
];

fn mutate(rng: &mut ChaCha8Rng, seed: &[u8]) -> Vec<u8> {
    let mut data = seed.to_vec();
    for _ in 0..rng.random_range(1..=8) {
        let at = if data.is_empty() { 0 } else { rng.random_range(0..=data.len()) };
        match rng.random_range(0..6) {
            0 if !data.is_empty() => {
                let i = rng.random_range(0..data.len());
                data[i] = rng.random();
            }
            1 => data.truncate(at),
            2 => {
                let end = (at + rng.random_range(0..64)).min(data.len());
                data.drain(at..end);
            }
            3 => {
                let frag = FRAGMENTS[rng.random_range(0..FRAGMENTS.len())].as_bytes();
                data.splice(at..at, frag.iter().copied());
            }
            4 if !data.is_empty() => {
                let from = rng.random_range(0..data.len());
                let len = rng.random_range(0..(data.len() - from).min(256) + 1);
                let chunk = data[from..from + len].to_vec();
                data.splice(at..at, chunk);
            }
            _ => {
                let junk: Vec<u8> = (0..rng.random_range(1..16)).map(|_| rng.random()).collect();
                data.splice(at..at, junk);
            }
        }
    }
    data
}

/// Runs mutated documents through the parser and, when they parse, through
/// the rest of the pipeline. Any panic is a failure.
pub fn fuzz(cases: usize, seed: u64) -> Outcome {
    let seeds = seeds();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut rejected, mut translated) = (0, 0);
    let hook = panic::take_hook();
    panic::set_hook(Box::new(|_| {}));
    let mut crash = None;
    for case in 0..cases {
        let input = if case % 10 == 0 {
            (0..rng.random_range(0..512)).map(|_| rng.random()).collect()
        } else {
            let pick = rng.random_range(0..seeds.len());
            mutate(&mut rng, &seeds[pick])
        };
        let result = panic::catch_unwind(AssertUnwindSafe(|| {
            let model = match bpmn2pddl::bpmn::parse_bpmn_bytes(&input) {
                Ok(m) => m,
                Err(e) => return Err(e.to_string()),
            };
            let graph = build_graph(&model, MessageStrategy::ExclusiveEmulation).map_err(|e| e.to_string())?;
            let t = translate(&graph, &default_options()).map_err(|e| e.to_string())?;
            Ok(render_domain(&t.domain).len())
        }));
        match result {
            Ok(Ok(_)) => translated += 1,
            Ok(Err(msg)) if !msg.is_empty() => rejected += 1,
            Ok(Err(_)) => {
                crash = Some(format!("case {case}: empty error message"));
                break;
            }
            Err(_) => {
                crash = Some(format!("case {case} panicked"));
                break;
            }
        }
    }
    panic::set_hook(hook);
    if let Some(c) = crash {
        return Err(c);
    }
    Ok(format!("{cases} inputs: {rejected} rejected with errors, {translated} translated"))
}
