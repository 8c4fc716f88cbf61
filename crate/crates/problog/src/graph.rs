//! Loader for edge-list datasets. Each row `source<sep>target<sep>prob`
//! (tab or comma separated) becomes one probabilistic fact
//! `prob::pred('source','target').` appended to the program.

use thiserror::Error;

use crate::parser::{parse_into, ParseError};
use crate::program::Program;

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("line {line}: expected 3 columns (source, target, probability), found {found}")]
    MalformedRow { line: usize, found: usize },
    #[error("line {line}: invalid probability '{text}'")]
    BadProbability { line: usize, text: String },
    #[error("line {line}: probability {value} outside [0,1]")]
    ProbabilityOutOfRange { line: usize, value: f64 },
    #[error("line {line}: empty node name")]
    EmptyNode { line: usize },
    #[error(transparent)]
    Parse(#[from] ParseError),
}

fn quote_atom(name: &str) -> String {
    let mut out = String::with_capacity(name.len() + 2);
    out.push('\'');
    for c in name.chars() {
        if c == '\'' || c == '\\' {
            out.push('\\');
        }
        out.push(c);
    }
    out.push('\'');
    out
}

/// Renders the edge list as program text. Kept separate from loading so
/// the generated fragment can be inspected.
pub fn graph_to_program_text(text: &str, predicate: &str) -> Result<String, GraphError> {
    let mut out = String::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let row = raw.trim();
        if row.is_empty() {
            continue;
        }
        let cols: Vec<&str> = if row.contains('\t') {
            row.split('\t').map(str::trim).collect()
        } else {
            row.split(',').map(str::trim).collect()
        };
        if cols.len() != 3 {
            return Err(GraphError::MalformedRow {
                line,
                found: cols.len(),
            });
        }
        if cols[0].is_empty() || cols[1].is_empty() {
            return Err(GraphError::EmptyNode { line });
        }
        let p: f64 = cols[2].parse().map_err(|_| GraphError::BadProbability {
            line,
            text: cols[2].to_string(),
        })?;
        if !(0.0..=1.0).contains(&p) || !p.is_finite() {
            return Err(GraphError::ProbabilityOutOfRange { line, value: p });
        }
        out.push_str(&format!(
            "{}::{}({},{}).\n",
            cols[2],
            predicate,
            quote_atom(cols[0]),
            quote_atom(cols[1])
        ));
    }
    Ok(out)
}

/// Parses the edge list and appends the resulting facts to `program`.
/// Returns the number of facts added.
pub fn load_graph(text: &str, predicate: &str, program: &mut Program) -> Result<usize, GraphError> {
    let fragment = graph_to_program_text(text, predicate)?;
    let before = program.facts().len();
    parse_into(&fragment, program)?;
    Ok(program.facts().len() - before)
}
