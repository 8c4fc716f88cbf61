use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

use problog::bdd::{export_script, BddManager};
use problog::engine::{self, Proof, SolveOptions};
use problog::graph::load_graph;
use problog::inference::{
    bounded_probability, monte_carlo, BoundsConfig, InferenceOptions, MonteCarloConfig,
};
use problog::parser::{parse_into, parse_query, Query};
use problog::program::{GroundFactId, Program};
use problog::report::{QueryReport, Timings};
use problog::term::pretty;
use problog::trie::ProofTrie;

const PRELUDE: &str = include_str!("../prelude.pl");

#[derive(Parser)]
#[command(name = "problog", about = "Probabilistic logic programming engine", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Program file (ProbLog syntax)
    #[arg(short = 'p', long = "program")]
    program: PathBuf,
    /// Query goal, e.g. "path(c,d)"
    #[arg(short = 'q', long = "query")]
    query: String,
    /// Edge-list file (TSV/CSV: source, target, probability), loaded before
    /// the program file
    #[arg(long)]
    graph: Option<PathBuf>,
    /// Predicate name for graph edges
    #[arg(long, default_value = "edge")]
    graph_predicate: String,
    /// Cap on resolution depth
    #[arg(long)]
    max_depth: Option<usize>,
    /// Write the BDD construction script to this path (exact/kbest)
    #[arg(long)]
    dump_script: Option<PathBuf>,
    /// Write the BDD in DOT format to this path (exact/kbest)
    #[arg(long)]
    dump_dot: Option<PathBuf>,
    /// Emit a machine-readable JSON report
    #[arg(long)]
    json: bool,
    /// Include wall-clock timings in the report
    #[arg(long)]
    timings: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Exact success probability over all proofs
    Exact {
        #[command(flatten)]
        common: Common,
    },
    /// Probability and content of the most likely explanation
    Explain {
        #[command(flatten)]
        common: Common,
    },
    /// Probability over the k most likely proofs
    Kbest {
        #[arg(short = 'k', long, default_value_t = 1)]
        k: usize,
        #[command(flatten)]
        common: Common,
    },
    /// Anytime lower/upper bounds by iterative deepening
    Bounds {
        /// Acceptance interval width
        #[arg(long, default_value_t = 0.01)]
        delta: f64,
        /// Initial probability threshold
        #[arg(long, default_value_t = 0.5)]
        gamma: f64,
        /// Threshold shrink factor per iteration
        #[arg(long, default_value_t = 0.5)]
        beta: f64,
        #[arg(long, default_value_t = 100)]
        max_iterations: usize,
        #[command(flatten)]
        common: Common,
    },
    /// Monte Carlo estimation
    Mc {
        /// Target 95% confidence interval half-width
        #[arg(long, default_value_t = 0.01)]
        delta: f64,
        /// Samples per convergence check
        #[arg(long, default_value_t = 1000)]
        batch: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1)]
        threads: usize,
        #[command(flatten)]
        common: Common,
    },
}

const EXIT_LOAD: u8 = 1;
const EXIT_QUERY: u8 = 2;
const EXIT_NO_CONVERGENCE: u8 = 3;

struct CliError {
    message: String,
    code: u8,
}

impl CliError {
    fn load(message: impl Into<String>) -> Self {
        CliError {
            message: message.into(),
            code: EXIT_LOAD,
        }
    }

    fn query(message: impl Into<String>) -> Self {
        CliError {
            message: message.into(),
            code: EXIT_QUERY,
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message);
            ExitCode::from(e.code)
        }
    }
}

fn load(common: &Common) -> Result<(Program, Query), CliError> {
    let mut program = Program::new();
    if let Some(path) = &common.graph {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::load(format!("{}: {e}", path.display())))?;
        load_graph(&text, &common.graph_predicate, &mut program)
            .map_err(|e| CliError::load(format!("{}: {e}", path.display())))?;
    }
    let text = fs::read_to_string(&common.program)
        .map_err(|e| CliError::load(format!("{}: {e}", common.program.display())))?;
    parse_into(&text, &mut program)
        .map_err(|e| CliError::load(format!("{}: {e}", common.program.display())))?;

    // append the prelude only when the program leaves absent/2 undefined
    let absent_defined = program
        .symbols
        .lookup("absent")
        .is_some_and(|sym| !program.candidate_clauses(sym, 2).is_empty());
    if !absent_defined {
        parse_into(PRELUDE, &mut program).expect("prelude parses");
    }

    let query = parse_query(&common.query, &mut program)
        .map_err(|e| CliError::query(format!("query: {e}")))?;
    Ok((program, query))
}

fn fact_name(program: &Program, id: GroundFactId) -> String {
    let head = pretty(&program.facts()[id.fact as usize].head, &program.symbols, &[]);
    if id.grounding == 0 {
        head
    } else {
        format!("{head}#{}", id.grounding)
    }
}

fn proof_terms(program: &Program, proof: &Proof) -> Vec<String> {
    proof.facts.iter().map(|&f| fact_name(program, f)).collect()
}

fn write_dumps(
    common: &Common,
    program: &Program,
    trie: &ProofTrie,
    mgr: &BddManager,
    root: problog::bdd::NodeRef,
) -> Result<(), CliError> {
    let name = |f: GroundFactId| fact_name(program, f);
    if let Some(path) = &common.dump_script {
        let text = if trie.is_empty() {
            String::new()
        } else {
            export_script(trie).render(&name)
        };
        fs::write(path, text).map_err(|e| CliError::query(format!("{}: {e}", path.display())))?;
    }
    if let Some(path) = &common.dump_dot {
        fs::write(path, mgr.to_dot(root, &name))
            .map_err(|e| CliError::query(format!("{}: {e}", path.display())))?;
    }
    Ok(())
}

fn emit(common: &Common, report: &QueryReport, human: &str) {
    if common.json {
        println!("{}", report.to_json());
    } else {
        println!("{human}");
    }
}

fn dnf_report(
    common: &Common,
    program: &Program,
    proofs: &[Proof],
    report: &mut QueryReport,
) -> Result<f64, CliError> {
    let bdd_start = Instant::now();
    let mut trie = ProofTrie::new();
    for p in proofs {
        trie.insert(&p.facts);
    }
    let (prob, bdd_nodes) = if trie.is_empty() {
        if common.dump_script.is_some() || common.dump_dot.is_some() {
            let mgr = BddManager::for_trie(&trie);
            write_dumps(common, program, &trie, &mgr, problog::bdd::FALSE)?;
        }
        (0.0, 0)
    } else {
        let mut mgr = BddManager::for_trie(&trie);
        let root = mgr
            .translate_trie(&trie)
            .map_err(|e| CliError::query(e.to_string()))?;
        let prob = mgr
            .probability(root, &|v| Some(program.fact_prob(v).value()))
            .map_err(|e| CliError::query(e.to_string()))?;
        write_dumps(common, program, &trie, &mgr, root)?;
        (prob, mgr.reachable_count(root))
    };
    report.probability = Some(prob);
    report.proof_count = Some(proofs.len());
    report.trie_nodes = Some(trie.node_count());
    report.bdd_nodes = Some(bdd_nodes);
    if common.timings {
        if let Some(t) = &mut report.timings {
            t.bdd_secs = bdd_start.elapsed().as_secs_f64();
        }
    }
    Ok(prob)
}

fn solve_opts(common: &Common) -> SolveOptions {
    SolveOptions {
        max_depth: common.max_depth,
        allow_visited_builtins: false,
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Exact { common } => {
            let (program, query) = load(&common)?;
            let mut report = QueryReport::new("exact", &common.query);
            let search_start = Instant::now();
            let proofs = collect_all(&program, &query, &common)?;
            if common.timings {
                report.timings = Some(Timings {
                    search_secs: search_start.elapsed().as_secs_f64(),
                    bdd_secs: 0.0,
                });
            }
            let prob = dnf_report(&common, &program, &proofs, &mut report)?;
            emit(&common, &report, &format!("P = {prob}"));
            Ok(())
        }
        Command::Explain { common } => {
            let (program, query) = load(&common)?;
            let mut report = QueryReport::new("explain", &common.query);
            let best = engine::best_proof(&program, &query, solve_opts(&common))
                .map_err(|e| CliError::query(e.to_string()))?;
            let mut human = String::new();
            match &best {
                Some(proof) => {
                    let prob: f64 = proof
                        .facts
                        .iter()
                        .map(|&f| program.fact_prob(f).value())
                        .product();
                    let answer = proof
                        .answer
                        .iter()
                        .map(|(name, term)| {
                            format!("{name} = {}", pretty(term, &program.symbols, &[]))
                        })
                        .collect::<Vec<_>>()
                        .join(", ");
                    human.push_str(&format!("P = {prob}\n"));
                    human.push_str(&format!(
                        "explanation: {}",
                        proof_terms(&program, proof).join(", ")
                    ));
                    if !answer.is_empty() {
                        human.push_str(&format!("\nanswer: {answer}"));
                    }
                    report.probability = Some(prob);
                    report.proofs = Some(vec![proof_terms(&program, proof)]);
                    if !answer.is_empty() {
                        report.answer = Some(answer);
                    }
                }
                None => {
                    human.push_str("P = 0\nno proof found");
                    report.probability = Some(0.0);
                }
            }
            emit(&common, &report, &human);
            Ok(())
        }
        Command::Kbest { k, common } => {
            if k < 1 {
                return Err(CliError::query("k must be at least 1"));
            }
            let (program, query) = load(&common)?;
            let mut report = QueryReport::new("kbest", &common.query);
            let search_start = Instant::now();
            let proofs = engine::k_best_proofs(&program, &query, k, solve_opts(&common))
                .map_err(|e| CliError::query(e.to_string()))?;
            if common.timings {
                report.timings = Some(Timings {
                    search_secs: search_start.elapsed().as_secs_f64(),
                    bdd_secs: 0.0,
                });
            }
            let prob = dnf_report(&common, &program, &proofs, &mut report)?;
            report.proofs = Some(proofs.iter().map(|p| proof_terms(&program, p)).collect());
            let mut human = format!("P = {prob}");
            for p in &proofs {
                human.push_str(&format!(
                    "\nproof (p = {}): {}",
                    p.prob(),
                    proof_terms(&program, p).join(", ")
                ));
            }
            emit(&common, &report, &human);
            Ok(())
        }
        Command::Bounds {
            delta,
            gamma,
            beta,
            max_iterations,
            common,
        } => {
            let (program, query) = load(&common)?;
            let cfg = BoundsConfig {
                interval_width: delta,
                initial_threshold: gamma,
                shrink_factor: beta,
                max_iterations,
            };
            let opts = InferenceOptions {
                max_depth: common.max_depth,
                proof_limit: None,
            };
            let start = Instant::now();
            let r = bounded_probability(&program, &query, &cfg, &opts)
                .map_err(|e| CliError::query(e.to_string()))?;
            let mut report = QueryReport::new("bounds", &common.query);
            report.interval = Some([r.interval.low, r.interval.high]);
            report.converged = Some(r.converged);
            report.iterations = Some(r.iterations);
            report.proof_count = Some(r.stats.proofs);
            report.trie_nodes = Some(r.stats.trie_nodes);
            report.bdd_nodes = Some(r.stats.bdd_nodes);
            if common.timings {
                report.timings = Some(Timings {
                    search_secs: start.elapsed().as_secs_f64(),
                    bdd_secs: 0.0,
                });
            }
            let human = format!(
                "P in [{}, {}] after {} iteration{}",
                r.interval.low,
                r.interval.high,
                r.iterations,
                if r.iterations == 1 { "" } else { "s" }
            );
            emit(&common, &report, &human);
            if !r.converged {
                return Err(CliError {
                    message: format!(
                        "did not converge to width {delta} within {max_iterations} iterations"
                    ),
                    code: EXIT_NO_CONVERGENCE,
                });
            }
            Ok(())
        }
        Command::Mc {
            delta,
            batch,
            seed,
            threads,
            common,
        } => {
            let (program, query) = load(&common)?;
            let cfg = MonteCarloConfig {
                interval_width: delta,
                batch_size: batch,
                seed,
                threads: threads.max(1),
                max_depth: common.max_depth,
            };
            let start = Instant::now();
            let r = monte_carlo(&program, &query, &cfg)
                .map_err(|e| CliError::query(e.to_string()))?;
            let mut report = QueryReport::new("mc", &common.query);
            report.probability = Some(r.estimate);
            report.samples = Some(r.samples);
            report.half_width = Some(r.half_width);
            if common.timings {
                report.timings = Some(Timings {
                    search_secs: start.elapsed().as_secs_f64(),
                    bdd_secs: 0.0,
                });
            }
            let human = format!(
                "P = {} ({} samples, half-width {})",
                r.estimate, r.samples, r.half_width
            );
            emit(&common, &report, &human);
            Ok(())
        }
    }
}

fn collect_all(program: &Program, query: &Query, common: &Common) -> Result<Vec<Proof>, CliError> {
    engine::all_proofs(program, query, solve_opts(common)).map_err(|e| CliError::query(e.to_string()))
}
