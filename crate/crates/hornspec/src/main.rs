use clap::{Parser, Subcommand, ValueEnum};
use hornspec::abstraction::{
    describe, generate_dimension_properties, generate_guard_properties, AbstractionScope,
    PropertySet,
};
use hornspec::analysis::{
    dimension_bound_setup, dimension_instrument, emit_dot, pred_dep_graph, DimensionBound,
};
use hornspec::derivation::UnfoldingRule;
use hornspec::oracle::{equivalent_on_grid, ground_eval, GridSpec};
use hornspec::specializer::{render_trace_line, specialize, SpecializeError, SpecializeOptions};
use hornspec::syntax::{
    parse_constrained_facts, parse_program, render_fact, render_program, ConstrainedFact, Program,
};
use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "hornspec",
    version,
    about = "Polyvariant specialisation of constrained Horn clauses"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum ScopeArg {
    All,
    Recursive,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Exact,
    Atmost,
    Above,
}

#[derive(Subcommand)]
enum Command {
    /// Specialise a program with respect to entry facts and properties
    Specialize {
        /// Program file
        #[arg(short = 'p', long)]
        program: String,
        /// Entry facts: a file path or inline text like "p(X) :- X>0."
        #[arg(short = 'e', long)]
        entry: String,
        /// Property facts: a file path or inline text
        #[arg(long, conflicts_with = "gen_props")]
        props: Option<String>,
        /// Generate properties: "guards" or "dim:<bound>"
        #[arg(long)]
        gen_props: Option<String>,
        /// Unfolding rule: "one-step", "branch-recursive" or "depth:<k>"
        #[arg(long, default_value = "branch-recursive")]
        unfold: String,
        /// Where the generalisation operator applies
        #[arg(long = "abstract", value_enum, default_value = "recursive")]
        scope: ScopeArg,
        /// Merge equivalent versions after emission
        #[arg(long)]
        minimize: bool,
        /// Output program file (default stdout)
        #[arg(short = 'o', long)]
        output: Option<String>,
        /// Write the dependency graph of the output program as DOT
        #[arg(long)]
        dot: Option<String>,
        /// Write one JSON object per iteration to this file
        #[arg(long)]
        trace_json: Option<String>,
        /// Print the iteration trace to stderr
        #[arg(long)]
        trace: bool,
    },
    /// Print the predicate dependency graph in Graphviz format
    Graph {
        #[arg(short = 'p', long)]
        program: String,
        #[arg(short = 'o', long)]
        output: Option<String>,
    },
    /// Add derivation-tree dimension counters to every predicate
    DimInstrument {
        #[arg(short = 'p', long)]
        program: String,
        #[arg(short = 'o', long)]
        output: Option<String>,
        /// Dimension bound for the generated entry fact and properties
        #[arg(long, requires = "entry", requires = "mode")]
        bound: Option<i64>,
        /// Bound shape on the entry counter
        #[arg(long, value_enum)]
        mode: Option<ModeArg>,
        /// Entry predicate as "pred/arity" (pre-instrumentation arity)
        #[arg(long)]
        entry: Option<String>,
        /// Write the bounded entry fact here (default stdout, commented)
        #[arg(long)]
        entry_out: Option<String>,
        /// Write the ladder properties here (default stdout, commented)
        #[arg(long)]
        props_out: Option<String>,
    },
    /// Ground-evaluation oracle over an integer grid
    Oracle {
        #[command(subcommand)]
        command: OracleCommand,
    },
}

#[derive(Subcommand)]
enum OracleCommand {
    /// Compare the grid models of two programs on entry predicates
    Compare {
        first: String,
        second: String,
        /// Entry predicates "p/arity" or "p/arity=q" (default: shared names)
        #[arg(long = "entry")]
        entries: Vec<String>,
        /// Inclusive variable range "lo..hi"
        #[arg(long, default_value = "-5..5", allow_hyphen_values = true)]
        grid: String,
        #[arg(long, default_value_t = 12)]
        iters: usize,
    },
    /// Print the grid model of a program
    Eval {
        program: String,
        #[arg(long, default_value = "-5..5", allow_hyphen_values = true)]
        grid: String,
        #[arg(long, default_value_t = 12)]
        iters: usize,
    },
}

enum CmdError {
    /// Bad input: unreadable or unparsable files, malformed flags.
    Input(String),
    /// Internal invariant violation, e.g. a closedness failure.
    Internal(String),
}

fn input<T>(msg: impl Into<String>) -> Result<T, CmdError> {
    Err(CmdError::Input(msg.into()))
}

fn read_program(path: &str) -> Result<Program, CmdError> {
    let text =
        std::fs::read_to_string(path).map_err(|e| CmdError::Input(format!("{path}: {e}")))?;
    parse_program(&text).map_err(|e| CmdError::Input(format!("{path}: {e}")))
}

/// Inline text or a file path; anything naming an existing file is read.
fn read_facts(arg: &str) -> Result<Vec<ConstrainedFact>, CmdError> {
    let text = if Path::new(arg).is_file() {
        std::fs::read_to_string(arg).map_err(|e| CmdError::Input(format!("{arg}: {e}")))?
    } else {
        arg.to_string()
    };
    parse_constrained_facts(&text).map_err(|e| CmdError::Input(e.to_string()))
}

fn parse_unfold(s: &str) -> Result<UnfoldingRule, CmdError> {
    match s {
        "one-step" => Ok(UnfoldingRule::OneStep),
        "branch-recursive" => Ok(UnfoldingRule::branch_or_recursive()),
        _ => match s.strip_prefix("depth:") {
            Some(k) => k
                .parse()
                .map(UnfoldingRule::Depth)
                .map_err(|_| CmdError::Input(format!("bad depth in {s}"))),
            None => input(format!("unknown unfolding rule {s}")),
        },
    }
}

fn parse_grid(s: &str, iters: usize) -> Result<GridSpec, CmdError> {
    let Some((lo, hi)) = s.split_once("..") else {
        return input(format!("bad grid {s}, expected lo..hi"));
    };
    let lo: i64 = lo
        .parse()
        .map_err(|_| CmdError::Input(format!("bad grid bound {lo}")))?;
    let hi: i64 = hi
        .parse()
        .map_err(|_| CmdError::Input(format!("bad grid bound {hi}")))?;
    if lo > hi {
        return input(format!("empty grid {s}"));
    }
    Ok(GridSpec::new(lo, hi, iters))
}

/// "p/arity" or "p/arity=q", validated against the two programs.
fn parse_entry_pair(
    s: &str,
    p1: &Program,
    p2: &Program,
) -> Result<(String, String), CmdError> {
    let (spec, other) = match s.split_once('=') {
        Some((a, b)) => (a, Some(b.to_string())),
        None => (s, None),
    };
    let Some((name, arity)) = spec.split_once('/') else {
        return input(format!("bad entry {s}, expected p/arity[=q]"));
    };
    let arity: usize = arity
        .parse()
        .map_err(|_| CmdError::Input(format!("bad arity in {s}")))?;
    if p1.arity_of(name) != Some(arity) {
        return input(format!("{name}/{arity} not found in the first program"));
    }
    let other = other.unwrap_or_else(|| name.to_string());
    if p2.arity_of(&other) != Some(arity) {
        return input(format!("{other}/{arity} not found in the second program"));
    }
    Ok((name.to_string(), other))
}

fn build_props(
    program: &Program,
    props: &Option<String>,
    gen_props: &Option<String>,
) -> Result<PropertySet, CmdError> {
    match (props, gen_props) {
        (Some(p), None) => Ok(PropertySet::new(read_facts(p)?)),
        (None, Some(g)) => {
            if g == "guards" {
                Ok(generate_guard_properties(program))
            } else if let Some(d) = g.strip_prefix("dim:") {
                let d: i64 = d
                    .parse()
                    .map_err(|_| CmdError::Input(format!("bad generator {g}")))?;
                Ok(generate_dimension_properties(program, d))
            } else {
                input(format!("unknown generator {g}"))
            }
        }
        (None, None) => input("one of --props or --gen-props is required"),
        (Some(_), Some(_)) => unreachable!("clap conflict"),
    }
}

fn specialize_error(e: SpecializeError) -> CmdError {
    match e {
        SpecializeError::FoldTargetMissing { .. } => CmdError::Internal(e.to_string()),
        SpecializeError::Derivation(
            hornspec::derivation::DerivationError::PredicateMismatch { .. },
        ) => CmdError::Internal(e.to_string()),
        _ => CmdError::Input(e.to_string()),
    }
}

fn write_out(path: &Option<String>, text: &str) -> Result<(), CmdError> {
    match path {
        Some(p) => {
            std::fs::write(p, text).map_err(|e| CmdError::Input(format!("{p}: {e}")))
        }
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode, CmdError> {
    match cli.command {
        Command::Specialize {
            program,
            entry,
            props,
            gen_props,
            unfold,
            scope,
            minimize,
            output,
            dot,
            trace_json,
            trace,
        } => {
            let p = read_program(&program)?;
            let entry_facts = read_facts(&entry)?;
            if entry_facts.is_empty() {
                return input("no entry facts given");
            }
            let psi = build_props(&p, &props, &gen_props)?;
            let rule = parse_unfold(&unfold)?;
            let scope = match scope {
                ScopeArg::All => AbstractionScope::All,
                ScopeArg::Recursive => AbstractionScope::RecursiveOnly,
            };
            let opts = SpecializeOptions { minimize };
            log::info!("properties:\n{}", describe(&psi));
            let r = specialize(&p, &entry_facts, &psi, &rule, scope, &opts)
                .map_err(specialize_error)?;
            if trace {
                for rec in &r.trace {
                    eprintln!("{}", render_trace_line(rec));
                }
            }
            if let Some(path) = trace_json {
                let mut f = std::fs::File::create(&path)
                    .map_err(|e| CmdError::Input(format!("{path}: {e}")))?;
                for rec in &r.trace {
                    let obj = serde_json::json!({
                        "iter": rec.iteration,
                        "added": rec.added.iter().map(render_fact).collect::<Vec<_>>(),
                    });
                    writeln!(f, "{obj}").map_err(|e| CmdError::Input(format!("{path}: {e}")))?;
                }
            }
            if let Some(path) = dot {
                let text = emit_dot(&pred_dep_graph(&r.program));
                std::fs::write(&path, format!("{text}\n"))
                    .map_err(|e| CmdError::Input(format!("{path}: {e}")))?;
            }
            write_out(&output, &render_program(&r.program))?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Graph { program, output } => {
            let p = read_program(&program)?;
            let text = format!("{}\n", emit_dot(&pred_dep_graph(&p)));
            write_out(&output, &text)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::DimInstrument {
            program,
            output,
            bound,
            mode,
            entry,
            entry_out,
            props_out,
        } => {
            let p = read_program(&program)?;
            let d = dimension_instrument(&p);
            write_out(&output, &render_program(&d.program))?;
            if let (Some(bound), Some(mode), Some(entry)) = (bound, mode, entry) {
                let Some((pred, arity)) = entry.split_once('/') else {
                    return input(format!("bad entry {entry}, expected pred/arity"));
                };
                let arity: usize = arity
                    .parse()
                    .map_err(|_| CmdError::Input(format!("bad arity in {entry}")))?;
                if p.arity_of(pred) != Some(arity) {
                    return input(format!("{pred}/{arity} not found in the program"));
                }
                let bound = match mode {
                    ModeArg::Exact => DimensionBound::Exact(bound),
                    ModeArg::Atmost => DimensionBound::AtMost(bound),
                    ModeArg::Above => DimensionBound::Above(bound),
                };
                let (fact, psi) = dimension_bound_setup(&d, pred, bound);
                match entry_out {
                    Some(path) => std::fs::write(&path, format!("{}\n", render_fact(&fact)))
                        .map_err(|e| CmdError::Input(format!("{path}: {e}")))?,
                    None => println!("% entry\n{}", render_fact(&fact)),
                }
                let psi_text: String = psi
                    .facts()
                    .iter()
                    .map(|f| format!("{}\n", render_fact(f)))
                    .collect();
                match props_out {
                    Some(path) => std::fs::write(&path, psi_text)
                        .map_err(|e| CmdError::Input(format!("{path}: {e}")))?,
                    None => print!("% properties\n{psi_text}"),
                }
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Oracle { command } => match command {
            OracleCommand::Compare {
                first,
                second,
                entries,
                grid,
                iters,
            } => {
                let p1 = read_program(&first)?;
                let p2 = read_program(&second)?;
                let grid = parse_grid(&grid, iters)?;
                let map: BTreeMap<String, String> = if entries.is_empty() {
                    p1.predicates()
                        .into_iter()
                        .filter(|n| p2.predicates().contains(n))
                        .map(|n| (n.clone(), n))
                        .collect()
                } else {
                    entries
                        .iter()
                        .map(|e| parse_entry_pair(e, &p1, &p2))
                        .collect::<Result<_, _>>()?
                };
                match equivalent_on_grid(&p1, &p2, &map, &grid) {
                    None => {
                        println!("equivalent on [{},{}]", grid.lo, grid.hi);
                        Ok(ExitCode::SUCCESS)
                    }
                    Some(w) => {
                        let args: Vec<String> = w.atom.args.iter().map(i64::to_string).collect();
                        println!(
                            "disagreement: {}({}) vs {} ({} only)",
                            w.atom.pred,
                            args.join(","),
                            w.counterpart,
                            if w.in_first { "first" } else { "second" }
                        );
                        Ok(ExitCode::FAILURE)
                    }
                }
            }
            OracleCommand::Eval {
                program,
                grid,
                iters,
            } => {
                let p = read_program(&program)?;
                let grid = parse_grid(&grid, iters)?;
                for atom in ground_eval(&p, &grid) {
                    let args: Vec<String> = atom.args.iter().map(i64::to_string).collect();
                    if args.is_empty() {
                        println!("{}", atom.pred);
                    } else {
                        println!("{}({})", atom.pred, args.join(","));
                    }
                }
                Ok(ExitCode::SUCCESS)
            }
        },
    }
}

fn main() -> ExitCode {
    env_logger::init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // usage and flag errors exit 1; --help/--version exit 0
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(CmdError::Input(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(CmdError::Internal(msg)) => {
            eprintln!("internal error: {msg}");
            ExitCode::from(2)
        }
    }
}
