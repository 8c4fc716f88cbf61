//! Probabilistic logic programming engine: parses probability-labeled
//! logic programs, collects proofs by SLD resolution, shares them in a
//! prefix trie, compiles the resulting DNF to a reduced ordered BDD, and
//! answers queries exactly or approximately.

pub mod bdd;
pub mod engine;
pub mod graph;
pub mod inference;
pub mod parser;
pub mod program;
pub mod report;
pub mod term;
pub mod trie;

pub use engine::{EngineError, Proof, SolveOptions, Solver};
pub use inference::{
    bounded_probability, exact_probability, explanation_probability, k_probability, monte_carlo,
    BoundedResult, BoundsConfig, InferenceError, InferenceOptions, MonteCarloConfig,
    MonteCarloResult, ProbabilityInterval,
};
pub use parser::{parse_program, parse_query, ParseError, Query};
pub use program::{GroundFactId, LoadError, Probability, Program};
pub use trie::ProofTrie;
