use std::io;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use bpmn2pddl::encode::DoneMode;
use bpmn2pddl::graph::MessageStrategy;
use bpmn2pddl_cli::{cmd_check, cmd_corpus, cmd_translate, resolve_max_states, RunConfig, SolveSelection, MAX_STATES_ENV};

/// Translate BPMN 2.0 diagrams into FOND PDDL and check the result.
#[derive(Parser)]
#[command(name = "bpmn2pddl", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write the domain and problem files for one diagram.
    Translate {
        input: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Translate, then explore and solve every problem variant.
    Check {
        input: PathBuf,
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        check: CheckArgs,
    },
    /// Translate and check every .bpmn file in a directory.
    Corpus {
        dir: PathBuf,
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        check: CheckArgs,
    },
}

#[derive(Args)]
struct Common {
    #[arg(long, default_value = "out")]
    out: PathBuf,
    #[arg(long, value_enum, default_value_t = Strategy::Exclusive)]
    msg_strategy: Strategy,
    #[arg(long, value_enum, default_value_t = Done::Any)]
    done_mode: Done,
    /// Omit :non-deterministic from the requirements.
    #[arg(long)]
    fig4_compat: bool,
    /// Add the empty-init problem and bootstrap actions for start events.
    #[arg(long)]
    allow_spontaneous_start: bool,
    #[arg(long, default_value_t = 6)]
    max_inclusive_branches: usize,
    #[arg(long)]
    warnings_as_errors: bool,
}

#[derive(Args)]
struct CheckArgs {
    #[arg(long, value_enum, default_value_t = Solve::Both)]
    solve: Solve,
    /// State limit for exploration (default 1000000, or $BPMN2PDDL_MAX_STATES).
    #[arg(long)]
    max_states: Option<usize>,
    /// Write a Graphviz file per policy.
    #[arg(long)]
    dot: bool,
    /// Write a JSON trace report per variant.
    #[arg(long)]
    traces: bool,
}

impl Default for CheckArgs {
    fn default() -> Self {
        Self {
            solve: Solve::Both,
            max_states: None,
            dot: false,
            traces: false,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Strategy {
    Ignore,
    Exclusive,
}

#[derive(Clone, Copy, ValueEnum)]
enum Done {
    Any,
    All,
}

#[derive(Clone, Copy, ValueEnum)]
enum Solve {
    Strong,
    Cyclic,
    Both,
}

fn config(input: PathBuf, common: Common, check: CheckArgs) -> RunConfig {
    let env = std::env::var(MAX_STATES_ENV).ok();
    RunConfig {
        input_path: input,
        output_dir: common.out,
        msg_strategy: match common.msg_strategy {
            Strategy::Ignore => MessageStrategy::Ignore,
            Strategy::Exclusive => MessageStrategy::ExclusiveEmulation,
        },
        done_mode: match common.done_mode {
            Done::Any => DoneMode::AnyEnd,
            Done::All => DoneMode::AllPools,
        },
        fig4_compat: common.fig4_compat,
        allow_spontaneous_start: common.allow_spontaneous_start,
        max_inclusive_branches: common.max_inclusive_branches,
        solve_mode: match check.solve {
            Solve::Strong => SolveSelection::Strong,
            Solve::Cyclic => SolveSelection::Cyclic,
            Solve::Both => SolveSelection::Both,
        },
        max_states: resolve_max_states(check.max_states, env.as_deref()),
        write_dot: check.dot,
        write_traces: check.traces,
        warnings_as_errors: common.warnings_as_errors,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (mut out, mut err) = (io::stdout().lock(), io::stderr().lock());
    let code = match cli.command {
        Command::Translate { input, common } => cmd_translate(&config(input, common, CheckArgs::default()), &mut out, &mut err),
        Command::Check { input, common, check } => cmd_check(&config(input, common, check), &mut out, &mut err),
        Command::Corpus { dir, common, check } => cmd_corpus(&config(dir, common, check), &mut out, &mut err),
    };
    ExitCode::from(code as u8)
}
