//! Pipeline driver behind the `bpmn2pddl` binary. The `cmd_*` functions
//! write their reports to the given streams and return the process exit code.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use anyhow::{Context, Result};
use rayon::prelude::*;

use bpmn2pddl::encode::{translate, DoneMode, EncodeOptions, Translation};
use bpmn2pddl::fond::{
    enumerate_traces, explore, export_policy_dot, ground, solve, FondError, Limits, Policy, SolveMode, TraceLimits,
    DEFAULT_MAX_STATES,
};
use bpmn2pddl::graph::{build_graph, validate_graph, Diagnostic, MessageStrategy};
use bpmn2pddl::naming::{sanitize_id, IdStyle};
use bpmn2pddl::parse_bpmn;
use bpmn2pddl::pddl::{parse_domain, parse_problem, render_domain, render_problem};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 1;
pub const EXIT_CHECK: i32 = 2;

pub const MAX_STATES_ENV: &str = "BPMN2PDDL_MAX_STATES";

/// Which solution concepts `check` computes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveSelection {
    Strong,
    Cyclic,
    Both,
}

impl SolveSelection {
    fn modes(self) -> &'static [SolveMode] {
        match self {
            SolveSelection::Strong => &[SolveMode::Strong],
            SolveSelection::Cyclic => &[SolveMode::StrongCyclic],
            SolveSelection::Both => &[SolveMode::Strong, SolveMode::StrongCyclic],
        }
    }

    /// The most permissive requested mode; failing it fails the check.
    fn weakest(self) -> SolveMode {
        match self {
            SolveSelection::Strong => SolveMode::Strong,
            _ => SolveMode::StrongCyclic,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunConfig {
    pub input_path: PathBuf,
    pub output_dir: PathBuf,
    pub msg_strategy: MessageStrategy,
    pub done_mode: DoneMode,
    pub fig4_compat: bool,
    pub allow_spontaneous_start: bool,
    pub max_inclusive_branches: usize,
    pub solve_mode: SolveSelection,
    pub max_states: usize,
    pub write_dot: bool,
    pub write_traces: bool,
    pub warnings_as_errors: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            input_path: PathBuf::new(),
            output_dir: PathBuf::from("out"),
            msg_strategy: MessageStrategy::ExclusiveEmulation,
            done_mode: DoneMode::AnyEnd,
            fig4_compat: false,
            allow_spontaneous_start: false,
            max_inclusive_branches: EncodeOptions::default().max_inclusive_branches,
            solve_mode: SolveSelection::Both,
            max_states: DEFAULT_MAX_STATES,
            write_dot: false,
            write_traces: false,
            warnings_as_errors: false,
        }
    }
}

/// Flag beats environment beats default. Unparseable environment values are
/// ignored.
pub fn resolve_max_states(flag: Option<usize>, env: Option<&str>) -> usize {
    flag.or_else(|| env.and_then(|v| v.trim().parse().ok()))
        .unwrap_or(DEFAULT_MAX_STATES)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Stats {
    pub nodes: usize,
    pub flows: usize,
    pub synthetic_flows: usize,
    pub predicates: usize,
    pub actions: usize,
    pub domain_lines: usize,
    pub problems: usize,
    /// Parse through render, excluding file output.
    pub elapsed: Duration,
}

/// Everything `translate` produced for one input.
#[derive(Debug, Clone)]
pub struct Translated {
    pub name: String,
    pub translation: Translation,
    pub domain_text: String,
    /// `(variant, text)` pairs.
    pub problem_texts: Vec<(String, String)>,
    pub diagnostics: Vec<Diagnostic>,
    pub stats: Stats,
}

pub fn translate_file(cfg: &RunConfig) -> Result<Translated> {
    let path = &cfg.input_path;
    let xml = fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;

    let started = Instant::now();
    let model = parse_bpmn(&xml).with_context(|| format!("{}: parse error", path.display()))?;
    let graph = build_graph(&model, cfg.msg_strategy).with_context(|| format!("{}: invalid process", path.display()))?;
    let diagnostics = validate_graph(&graph);
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let name = sanitize_id(&stem, IdStyle::Label);
    let options = EncodeOptions {
        done_mode: cfg.done_mode,
        fig4_compat: cfg.fig4_compat,
        allow_spontaneous_start: cfg.allow_spontaneous_start,
        max_inclusive_branches: cfg.max_inclusive_branches,
        domain_name: Some(name.clone()),
    };
    let translation = translate(&graph, &options).with_context(|| format!("{}: encoding error", path.display()))?;
    let domain_text = render_domain(&translation.domain);
    let problem_texts: Vec<(String, String)> = translation
        .problems
        .iter()
        .map(|v| (v.variant.clone(), render_problem(&v.problem)))
        .collect();
    let elapsed = started.elapsed();

    let stats = Stats {
        nodes: graph.nodes.len(),
        flows: graph.flows.len(),
        synthetic_flows: graph.synthetic_count(),
        predicates: translation.domain.predicates.len(),
        actions: translation.domain.actions.len(),
        domain_lines: domain_text.lines().count(),
        problems: problem_texts.len(),
        elapsed,
    };
    Ok(Translated {
        name,
        translation,
        domain_text,
        problem_texts,
        diagnostics,
        stats,
    })
}

impl Translated {
    pub fn domain_path(&self, dir: &Path) -> PathBuf {
        dir.join(format!("{}.domain.pddl", self.name))
    }

    pub fn problem_path(&self, dir: &Path, variant: &str) -> PathBuf {
        dir.join(format!("{}.{variant}.problem.pddl", self.name))
    }

    pub fn write(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
        let mut written = vec![self.domain_path(dir)];
        fs::write(&written[0], &self.domain_text).with_context(|| format!("cannot write {}", written[0].display()))?;
        for (variant, text) in &self.problem_texts {
            let p = self.problem_path(dir, variant);
            fs::write(&p, text).with_context(|| format!("cannot write {}", p.display()))?;
            written.push(p);
        }
        Ok(written)
    }
}

fn print_diagnostics(t: &Translated, path: &Path, err: &mut dyn Write) {
    for d in &t.diagnostics {
        let _ = writeln!(err, "warning: {}: {d}", path.display());
    }
}

/// Runs translation and the warnings gate. `Err` carries the exit code.
fn prepare(cfg: &RunConfig, out: &mut dyn Write, err: &mut dyn Write) -> Result<Translated, i32> {
    let t = match translate_file(cfg) {
        Ok(t) => t,
        Err(e) => {
            let _ = writeln!(err, "error: {e:#}");
            return Err(EXIT_INPUT);
        }
    };
    print_diagnostics(&t, &cfg.input_path, err);
    if cfg.warnings_as_errors && !t.diagnostics.is_empty() {
        let _ = writeln!(err, "error: {} warning(s) treated as errors", t.diagnostics.len());
        return Err(EXIT_CHECK);
    }
    match t.write(&cfg.output_dir) {
        Ok(files) => {
            for f in files {
                let _ = writeln!(out, "wrote {}", f.display());
            }
        }
        Err(e) => {
            let _ = writeln!(err, "error: {e:#}");
            return Err(EXIT_INPUT);
        }
    }
    Ok(t)
}

pub fn cmd_translate(cfg: &RunConfig, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let t = match prepare(cfg, out, err) {
        Ok(t) => t,
        Err(code) => return code,
    };
    let s = &t.stats;
    let rows: [(&str, String); 8] = [
        ("nodes", s.nodes.to_string()),
        ("flows", s.flows.to_string()),
        ("synthetic flows", s.synthetic_flows.to_string()),
        ("predicates", s.predicates.to_string()),
        ("actions", s.actions.to_string()),
        ("domain lines", s.domain_lines.to_string()),
        ("problems", s.problems.to_string()),
        ("elapsed ms", format!("{:.3}", s.elapsed.as_secs_f64() * 1000.0)),
    ];
    for (k, v) in rows {
        let _ = writeln!(out, "{k:<16}{v}");
    }
    EXIT_OK
}

/// Check results for one problem variant.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VariantReport {
    pub variant: String,
    /// `None` when exploration hit the state limit.
    pub states: Option<usize>,
    pub deadlocks: usize,
    pub violations: usize,
    pub strong: Option<bool>,
    pub strong_cyclic: Option<bool>,
    pub policy_size: Option<usize>,
    pub limit_hit: bool,
}

fn check_variant(
    t: &Translated,
    variant: &str,
    problem_text: &str,
    cfg: &RunConfig,
    write_artifacts: bool,
) -> Result<VariantReport> {
    let domain = parse_domain(&t.domain_text).context("re-reading the emitted domain")?;
    let problem = parse_problem(problem_text).context("re-reading the emitted problem")?;
    let task = ground(&domain, &problem)?;
    let mut report = VariantReport {
        variant: variant.to_owned(),
        states: None,
        deadlocks: 0,
        violations: 0,
        strong: None,
        strong_cyclic: None,
        policy_size: None,
        limit_hit: false,
    };
    let space = match explore(&task, &Limits { max_states: cfg.max_states }) {
        Ok(s) => s,
        Err(FondError::LimitExceeded { .. }) => {
            report.limit_hit = true;
            return Ok(report);
        }
        Err(e) => return Err(e.into()),
    };
    report.states = Some(space.len());
    report.deadlocks = space.deadlocks.len();
    report.violations = space.violations.len();

    let mut best: Option<Policy> = None;
    for &mode in cfg.solve_mode.modes() {
        let result = solve(&task, &space, mode);
        let ok = result.is_ok();
        match mode {
            SolveMode::Strong => report.strong = Some(ok),
            SolveMode::StrongCyclic => report.strong_cyclic = Some(ok),
        }
        if let Ok(p) = result {
            best.get_or_insert(p);
        }
    }
    report.policy_size = best.as_ref().map(Policy::len);

    if write_artifacts {
        let stem = format!("{}.{variant}", t.name);
        if cfg.write_dot {
            if let Some(p) = &best {
                let path = cfg.output_dir.join(format!("{stem}.policy.dot"));
                fs::write(&path, export_policy_dot(&task, &space, p))
                    .with_context(|| format!("cannot write {}", path.display()))?;
            }
        }
        if cfg.write_traces {
            match enumerate_traces(&space, best.as_ref(), &TraceLimits::default()) {
                Ok(traces) => {
                    let path = cfg.output_dir.join(format!("{stem}.traces.json"));
                    fs::write(&path, traces.to_json(&task, &space))
                        .with_context(|| format!("cannot write {}", path.display()))?;
                }
                Err(FondError::LimitExceeded { .. }) => report.limit_hit = true,
                Err(e) => return Err(e.into()),
            }
        }
    }
    Ok(report)
}

fn yes_no(v: Option<bool>) -> &'static str {
    match v {
        Some(true) => "yes",
        Some(false) => "no",
        None => "-",
    }
}

pub fn cmd_check(cfg: &RunConfig, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let t = match prepare(cfg, out, err) {
        Ok(t) => t,
        Err(code) => return code,
    };
    let _ = writeln!(
        out,
        "{:<28}{:>9}{:>11}{:>8}{:>15}{:>8}{:>12}",
        "variant", "states", "deadlocks", "strong", "strong-cyclic", "policy", "violations"
    );
    let mut code = EXIT_OK;
    for (variant, text) in &t.problem_texts {
        let r = match check_variant(&t, variant, text, cfg, true) {
            Ok(r) => r,
            Err(e) => {
                let _ = writeln!(err, "error: {variant}: {e:#}");
                code = code.max(EXIT_INPUT);
                continue;
            }
        };
        let states = r.states.map_or_else(|| format!(">{}", cfg.max_states), |n| n.to_string());
        let policy = r.policy_size.map_or_else(|| "-".to_owned(), |n| n.to_string());
        let _ = writeln!(
            out,
            "{:<28}{:>9}{:>11}{:>8}{:>15}{:>8}{:>12}",
            r.variant,
            states,
            r.deadlocks,
            yes_no(r.strong),
            yes_no(r.strong_cyclic),
            policy,
            r.violations
        );
        if r.limit_hit {
            let _ = writeln!(err, "error: {variant}: limit exceeded");
            code = EXIT_CHECK;
            continue;
        }
        let solved = match cfg.solve_mode.weakest() {
            SolveMode::Strong => r.strong,
            SolveMode::StrongCyclic => r.strong_cyclic,
        };
        if solved != Some(true) {
            let _ = writeln!(err, "error: {variant}: unsolvable ({})", cfg.solve_mode.weakest());
            code = EXIT_CHECK;
        }
    }
    code
}

/// One TSV row of `corpus`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CorpusRow {
    Ok {
        file: String,
        nodes: usize,
        predicates: usize,
        actions: usize,
        lines: usize,
        ms: String,
        states: usize,
        strong: (usize, usize),
        strong_cyclic: (usize, usize),
    },
    Error {
        file: String,
        message: String,
    },
}

impl CorpusRow {
    pub fn file(&self) -> &str {
        match self {
            CorpusRow::Ok { file, .. } | CorpusRow::Error { file, .. } => file,
        }
    }

    pub fn to_tsv(&self) -> String {
        match self {
            CorpusRow::Ok {
                file,
                nodes,
                predicates,
                actions,
                lines,
                ms,
                states,
                strong,
                strong_cyclic,
            } => format!(
                "{file}\t{nodes}\t{predicates}\t{actions}\t{lines}\t{ms}\t{states}\t{}/{}\t{}/{}",
                strong.0, strong.1, strong_cyclic.0, strong_cyclic.1
            ),
            CorpusRow::Error { file, message } => format!("{file}\tERROR\t{}", message.replace(['\t', '\n'], " ")),
        }
    }
}

pub const CORPUS_HEADER: &str = "file\tnodes\tpredicates\tactions\tlines\tms\tstates\tstrong\tstrong_cyclic";

fn corpus_row(path: &Path, cfg: &RunConfig) -> CorpusRow {
    let file = path.file_name().map(|f| f.to_string_lossy().into_owned()).unwrap_or_default();
    let cfg = RunConfig {
        input_path: path.to_owned(),
        solve_mode: SolveSelection::Both,
        ..cfg.clone()
    };
    let result = translate_file(&cfg).and_then(|t| {
        t.write(&cfg.output_dir)?;
        Ok(t)
    });
    let t = match result {
        Ok(t) => t,
        Err(e) => {
            return CorpusRow::Error {
                file,
                message: format!("{e:#}"),
            }
        }
    };
    let mut states = 0;
    let mut strong = (0, 0);
    let mut cyclic = (0, 0);
    for (variant, text) in &t.problem_texts {
        strong.1 += 1;
        cyclic.1 += 1;
        if let Ok(r) = check_variant(&t, variant, text, &cfg, false) {
            states += r.states.unwrap_or(0);
            strong.0 += usize::from(r.strong == Some(true));
            cyclic.0 += usize::from(r.strong_cyclic == Some(true));
        }
    }
    CorpusRow::Ok {
        file,
        nodes: t.stats.nodes,
        predicates: t.stats.predicates,
        actions: t.stats.actions,
        lines: t.stats.domain_lines,
        ms: format!("{:.3}", t.stats.elapsed.as_secs_f64() * 1000.0),
        states,
        strong,
        strong_cyclic: cyclic,
    }
}

/// Translates and checks every `.bpmn` file in `dir`, in parallel.
pub fn run_corpus(dir: &Path, cfg: &RunConfig) -> Result<Vec<CorpusRow>> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)
        .with_context(|| format!("cannot read directory {}", dir.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file() && p.extension().is_some_and(|x| x == "bpmn"))
        .collect();
    files.sort();
    let mut rows: Vec<CorpusRow> = files.par_iter().map(|p| corpus_row(p, cfg)).collect();
    rows.sort_by(|a, b| a.file().cmp(b.file()));
    Ok(rows)
}

pub fn cmd_corpus(cfg: &RunConfig, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let rows = match run_corpus(&cfg.input_path, cfg) {
        Ok(r) => r,
        Err(e) => {
            let _ = writeln!(err, "error: {e:#}");
            return EXIT_INPUT;
        }
    };
    let mut tsv = String::from(CORPUS_HEADER);
    tsv.push('\n');
    for r in &rows {
        tsv.push_str(&r.to_tsv());
        tsv.push('\n');
    }
    let _ = out.write_all(tsv.as_bytes());
    let path = cfg.output_dir.join("corpus.tsv");
    if let Err(e) = fs::create_dir_all(&cfg.output_dir).and_then(|_| fs::write(&path, &tsv)) {
        let _ = writeln!(err, "error: cannot write {}: {e}", path.display());
        return EXIT_INPUT;
    }
    let failed = rows.iter().filter(|r| matches!(r, CorpusRow::Error { .. })).count();
    if failed > 0 {
        let _ = writeln!(err, "error: {failed} file(s) failed to translate");
        return EXIT_INPUT;
    }
    EXIT_OK
}
