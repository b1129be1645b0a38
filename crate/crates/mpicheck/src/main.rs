use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};

use mpicheck::report::{self, Timings};
use mpicheck::{dot, load, options_from_env, text};
use mpicheck_core::l0::{build_l0_reg, check_l0, ratio_consistent, Consistency, L0View, LabelledReg};
use mpicheck_core::l2::{normalize, strip_outer_infinite, to_power_string, PowerString, StripOutcome};
use mpicheck_core::model::{unroll, Program};
use mpicheck_core::oracle::{explore, OracleVerdict, Simulator, DEFAULT_MAX_STATES};
use mpicheck_core::ratio::{solve, RatioSolution, RegError};
use mpicheck_core::smodel::build_mdg;
use mpicheck_core::{check, CheckOptions, Via};

#[derive(Parser)]
#[command(name = "mpicheck", version, about = "Static deadlock checker for rendezvous message-passing programs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Method {
    Auto,
    Smodel,
    L0,
    L2,
}

impl From<Method> for Via {
    fn from(m: Method) -> Via {
        match m {
            Method::Auto => Via::Auto,
            Method::Smodel => Via::SModel,
            Method::L0 => Via::L0,
            Method::L2 => Via::L2,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Decide whether a program can deadlock. Exit 0: deadlock-free, 1: deadlock, 2: error.
    Check {
        path: PathBuf,
        /// Print the intermediate steps of the analysis.
        #[arg(long)]
        trace: bool,
        /// Print a JSON report instead of text.
        #[arg(long)]
        json: bool,
        /// Force a particular method.
        #[arg(long, value_enum, default_value = "auto")]
        via: Method,
    },
    /// Print the message dependence graph of the unrolled (or sliced) program.
    Mdg {
        path: PathBuf,
        /// Write Graphviz output to this file.
        #[arg(long)]
        dot: Option<PathBuf>,
    },
    /// Print the ratio equations and their solution.
    Reg { path: PathBuf },
    /// Explore every reachable state. Exit 3 when the state budget runs out.
    Simulate {
        path: PathBuf,
        #[arg(long, default_value_t = DEFAULT_MAX_STATES)]
        max_states: usize,
    },
}

const FREE: u8 = 0;
const DEADLOCK: u8 = 1;
const ERROR: u8 = 2;
const INCONCLUSIVE: u8 = 3;

fn fail(msg: impl std::fmt::Display) -> ExitCode {
    eprintln!("error: {msg}");
    ExitCode::from(ERROR)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let options = match options_from_env() {
        Ok(o) => o,
        Err(e) => return fail(e),
    };
    match cli.command {
        Command::Check { path, trace, json, via } => run_check(&path, trace, json, via.into(), options),
        Command::Mdg { path, dot } => run_mdg(&path, dot, &options),
        Command::Reg { path } => run_reg(&path),
        Command::Simulate { path, max_states } => run_simulate(&path, max_states),
    }
}

fn ms(since: Instant) -> f64 {
    since.elapsed().as_secs_f64() * 1e3
}

fn run_check(path: &Path, trace: bool, json: bool, via: Via, mut options: CheckOptions) -> ExitCode {
    let started = Instant::now();
    let program = match load(path) {
        Ok(p) => p,
        Err(e) => return fail(e),
    };
    let parse_ms = ms(started);
    options.trace = trace;
    let started = Instant::now();
    let analysis = match check(&program, via, &options) {
        Ok(a) => a,
        Err(e) => return fail(e),
    };
    let timings = Timings {
        parse_ms,
        analysis_ms: ms(started),
    };
    if json {
        let r = report::build(&program, &analysis, trace, timings);
        match serde_json::to_string_pretty(&r) {
            Ok(s) => println!("{s}"),
            Err(e) => return fail(e),
        }
    } else {
        println!("class: {}, method: {}", analysis.class, analysis.phase.name());
        if trace {
            print!("{}", text::trace(&program, &analysis));
        }
        for n in program.empty_nodes() {
            println!("note: {} is empty and terminates immediately", program.node_name(n));
        }
        println!("{}", text::verdict_line(&program, &analysis.verdict));
    }
    ExitCode::from(if analysis.verdict.is_deadlock() { DEADLOCK } else { FREE })
}

fn run_mdg(path: &Path, out: Option<PathBuf>, options: &CheckOptions) -> ExitCode {
    let program = match load(path) {
        Ok(p) => p,
        Err(e) => return fail(e),
    };
    let target = if program.bodies().iter().any(|b| has_infinite(b)) {
        let a = match check_l0(&program, options) {
            Ok(a) => a,
            Err(e) => return fail(format!("no finite graph for this program: {e}")),
        };
        match a.slice {
            Some(s) => s.program,
            None => {
                println!("{}", text::verdict_line(&program, &a.verdict));
                return fail("the program is not ratio consistent, so it has no sliced graph");
            }
        }
    } else {
        program.clone()
    };
    let queues = match unroll(&target, options.max_events) {
        Ok(q) => q,
        Err(e) => return fail(e),
    };
    let mdg = build_mdg(&queues);
    let graph = dot::mdg_to_dot(&program, &mdg);
    match out {
        Some(file) => {
            if let Err(e) = std::fs::write(&file, &graph) {
                return fail(format!("cannot write {}: {e}", file.display()));
            }
            println!("{} pairs, {} edges written to {}", mdg.pairs().len(), mdg.edges().len(), file.display());
        }
        None => print!("{graph}"),
    }
    let verdict = match mpicheck_core::smodel::check_smodel(&queues, false) {
        Ok(v) => v,
        Err(e) => return fail(e),
    };
    eprintln!("{}", text::verdict_line(&program, &verdict));
    ExitCode::from(if verdict.is_deadlock() { DEADLOCK } else { FREE })
}

fn has_infinite(stmts: &[mpicheck_core::model::Statement]) -> bool {
    use mpicheck_core::model::Statement;
    stmts.iter().any(|s| match s {
        Statement::For(c, body) => c.is_infinite() || has_infinite(body),
        _ => false,
    })
}

fn print_reg(program: &Program, reg: &LabelledReg) {
    if reg.group.equations().is_empty() {
        print!("no equations; ");
    } else {
        let mut out = String::new();
        text::reg_lines(program, reg, &mut out);
        print!("{out}");
    }
}

fn print_solution(solution: &RatioSolution) {
    println!("{}", text::solution(solution));
}

fn solve_and_print(program: &Program, reg: &LabelledReg) -> Result<RatioSolution, ExitCode> {
    print_reg(program, reg);
    match solve(&reg.group) {
        Ok(s) => {
            print_solution(&s);
            Ok(s)
        }
        Err(RegError::Inconsistent(inc)) => {
            let mut eqs: Vec<String> = inc.path.iter().map(text::equation).collect();
            eqs.push(text::equation(&inc.conflicting));
            println!("inconsistent: {}", eqs.join(", "));
            Err(ExitCode::from(DEADLOCK))
        }
        Err(e) => Err(fail(e)),
    }
}

fn run_reg(path: &Path) -> ExitCode {
    let program = match load(path) {
        Ok(p) => p,
        Err(e) => return fail(e),
    };
    if let Some(view) = L0View::from_program(&program).filter(L0View::is_canonical) {
        let reg = match build_l0_reg(&view) {
            Ok(r) => r,
            Err(u) => {
                println!("unmatched {}: {u}", text::symbol(&program, u.symbol));
                return ExitCode::from(DEADLOCK);
            }
        };
        let solution = match solve_and_print(&program, &reg) {
            Ok(s) => s,
            Err(code) => return code,
        };
        if reg.group.equations().is_empty() {
            return ExitCode::from(FREE);
        }
        match ratio_consistent(&solution, &view.loop_times()) {
            Ok(Consistency::Consistent) => println!("loop times are ratio consistent"),
            Ok(Consistency::Inconsistent(c)) => println!(
                "loop times are not ratio consistent: {}",
                text::witness(&program, &mpicheck_core::DeadlockWitness::RatioInconsistency(c))
            ),
            Err(e) => return fail(e),
        }
        return ExitCode::from(FREE);
    }
    let strings: Vec<PowerString> = program
        .nodes()
        .map(|n| normalize(&to_power_string(program.body(n))))
        .collect();
    match strip_outer_infinite(&strings) {
        Ok(StripOutcome::NotApplicable) => {
            fail("ratio equations need each node to be a single loop, or an endless loop alone")
        }
        Ok(StripOutcome::Deadlock { witness, report }) => {
            if let Some(r) = report {
                print_reg(&program, &r.reg);
                match &r.solution {
                    Some(s) => print_solution(s),
                    None => println!("no solution"),
                }
            }
            println!("{}", text::witness(&program, &witness));
            ExitCode::from(DEADLOCK)
        }
        Ok(StripOutcome::Stripped { report, .. }) => {
            print_reg(&program, &report.reg);
            match &report.solution {
                Some(s) => print_solution(s),
                None => println!("no solution"),
            }
            ExitCode::from(FREE)
        }
        Err(e) => fail(e),
    }
}

fn run_simulate(path: &Path, max_states: usize) -> ExitCode {
    let program = match load(path) {
        Ok(p) => p,
        Err(e) => return fail(e),
    };
    let r = explore(&program, max_states);
    match r.verdict {
        OracleVerdict::DeadlockFree => {
            println!("deadlock-free ({} states)", r.states);
            ExitCode::from(FREE)
        }
        OracleVerdict::Inconclusive(n) => {
            println!("inconclusive: state budget of {n} exhausted");
            ExitCode::from(INCONCLUSIVE)
        }
        OracleVerdict::DeadlockReachable { trace, blocked } => {
            println!("DEADLOCK reachable ({} states)", r.states);
            let steps: Vec<String> = trace.iter().map(|s| text::symbol(&program, *s)).collect();
            println!("trace: {}", if steps.is_empty() { "(initial state)".into() } else { steps.join(", ") });
            println!("stuck: {}", text::node_list(&program, blocked.iter().copied()));
            let sim = Simulator::new(&program);
            if let Some(state) = sim.replay(&trace) {
                for n in program.nodes() {
                    let next = sim
                        .next_event(&state, n)
                        .map(|s| text::symbol(&program, s))
                        .unwrap_or_else(|| "terminated".into());
                    println!("  {}: {}", program.node_name(n), next);
                }
            }
            ExitCode::from(DEADLOCK)
        }
    }
}
