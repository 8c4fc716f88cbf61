//! Program model: probabilistic facts with dense identifiers, background
//! clauses, predicate indexes, and per-query grounding tables.

use std::collections::HashMap;

use thiserror::Error;

use crate::term::{pretty, Sym, SymbolTable, Term};

/// A probability stored in both linear and log space. Proof accumulation
/// works on `log_value`; reported probabilities use `value`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Probability {
    value: f64,
    log_value: f64,
}

#[derive(Debug, Error, PartialEq)]
#[error("probability {0} out of range [0,1]")]
pub struct ProbabilityError(pub f64);

impl Probability {
    pub fn new(value: f64) -> Result<Self, ProbabilityError> {
        if !(0.0..=1.0).contains(&value) {
            return Err(ProbabilityError(value));
        }
        Ok(Probability {
            value,
            log_value: value.ln(),
        })
    }

    pub const ONE: Probability = Probability {
        value: 1.0,
        log_value: 0.0,
    };

    pub fn value(&self) -> f64 {
        self.value
    }

    /// Natural log; `-inf` for probability zero.
    pub fn log_value(&self) -> f64 {
        self.log_value
    }
}

/// Identifier of one ground instance of a probabilistic fact.
/// `grounding == 0` is reserved for facts that were ground at declaration;
/// groundings of non-ground facts are numbered from 1 per query.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct GroundFactId {
    pub fact: u32,
    pub grounding: u32,
}

impl GroundFactId {
    pub fn ground(fact: usize) -> Self {
        GroundFactId {
            fact: fact as u32,
            grounding: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ProbabilisticFact {
    pub id: usize,
    pub head: Term,
    pub prob: Probability,
    /// Number of distinct variables in `head`; 0 means declared ground.
    pub n_vars: usize,
}

#[derive(Debug, Clone)]
pub struct Clause {
    pub head: Term,
    pub body: Vec<Term>,
    pub n_vars: usize,
    /// Source-level variable names, indexed by variable number.
    pub var_names: Vec<String>,
}

#[derive(Debug, Error)]
pub enum LoadError {
    #[error("probability {0} out of range [0,1]")]
    ProbabilityOutOfRange(f64),
    #[error("predicate {0} is declared both as a probabilistic fact and as a clause head")]
    MixedPredicate(String),
    #[error("probabilistic fact head must be callable")]
    HeadNotCallable,
}

/// Builtin symbols resolved once at program construction.
#[derive(Debug, Clone)]
pub struct BuiltinSyms {
    pub not_identical: Sym,
    pub identical: Sym,
    pub gt: Sym,
    pub ge: Sym,
    pub is: Sym,
    pub plus: Sym,
    pub minus: Sym,
    pub times: Sym,
    pub eraseall: Sym,
    pub recordzifnot: Sym,
    pub cons: Sym,
    pub nil: Sym,
    pub truth: Sym,
}

impl BuiltinSyms {
    fn new(symbols: &mut SymbolTable) -> Self {
        BuiltinSyms {
            not_identical: symbols.intern("\\=="),
            identical: symbols.intern("=="),
            gt: symbols.intern(">"),
            ge: symbols.intern(">="),
            is: symbols.intern("is"),
            plus: symbols.intern("+"),
            minus: symbols.intern("-"),
            times: symbols.intern("*"),
            eraseall: symbols.intern("eraseall"),
            recordzifnot: symbols.intern("recordzifnot"),
            cons: symbols.intern("."),
            nil: symbols.intern("[]"),
            truth: symbols.intern("true"),
        }
    }
}

/// First-argument index key for ground atoms/integers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
enum ArgKey {
    Atom(Sym),
    Int(i64),
}

fn arg_key(term: &Term) -> Option<ArgKey> {
    match term {
        Term::Atom(s) => Some(ArgKey::Atom(*s)),
        Term::Int(n) => Some(ArgKey::Int(*n)),
        _ => None,
    }
}

#[derive(Debug, Default, Clone)]
struct FactIndex {
    all: Vec<usize>,
    by_first_arg: HashMap<ArgKey, Vec<usize>>,
    /// Facts whose first argument is not indexable (variable or compound).
    unindexed: Vec<usize>,
}

/// An immutable-after-load ProbLog program: probabilistic facts plus
/// background-knowledge clauses, both indexed by functor/arity.
#[derive(Debug, Default, Clone)]
pub struct Program {
    pub symbols: SymbolTable,
    facts: Vec<ProbabilisticFact>,
    clauses: Vec<Clause>,
    fact_index: HashMap<(Sym, usize), FactIndex>,
    clause_index: HashMap<(Sym, usize), Vec<usize>>,
    builtins: Option<BuiltinSyms>,
}

impl Program {
    pub fn new() -> Self {
        let mut p = Program::default();
        p.builtins = Some(BuiltinSyms::new(&mut p.symbols));
        p
    }

    pub fn builtins(&self) -> &BuiltinSyms {
        self.builtins.as_ref().expect("constructed via Program::new")
    }

    pub fn facts(&self) -> &[ProbabilisticFact] {
        &self.facts
    }

    pub fn clauses(&self) -> &[Clause] {
        &self.clauses
    }

    pub fn fact(&self, id: usize) -> &ProbabilisticFact {
        &self.facts[id]
    }

    pub fn fact_prob(&self, id: GroundFactId) -> Probability {
        self.facts[id.fact as usize].prob
    }

    /// Identical declarations get distinct fact ids: each occurrence is its
    /// own random variable.
    pub fn add_fact(&mut self, prob: f64, head: Term) -> Result<usize, LoadError> {
        let key = head.functor().ok_or(LoadError::HeadNotCallable)?;
        let prob = Probability::new(prob).map_err(|e| LoadError::ProbabilityOutOfRange(e.0))?;
        if self.clause_index.contains_key(&key) {
            return Err(LoadError::MixedPredicate(self.pred_name(key)));
        }
        let id = self.facts.len();
        let n_vars = head.max_var().map_or(0, |m| m + 1);
        let idx = self.fact_index.entry(key).or_default();
        idx.all.push(id);
        let first = match &head {
            Term::Compound(_, args) => arg_key(&args[0]),
            _ => None,
        };
        match first {
            Some(k) => idx.by_first_arg.entry(k).or_default().push(id),
            None => idx.unindexed.push(id),
        }
        self.facts.push(ProbabilisticFact {
            id,
            head,
            prob,
            n_vars,
        });
        Ok(id)
    }

    pub fn add_clause(&mut self, clause: Clause) -> Result<(), LoadError> {
        let key = clause.head.functor().ok_or(LoadError::HeadNotCallable)?;
        if self.fact_index.contains_key(&key) {
            return Err(LoadError::MixedPredicate(self.pred_name(key)));
        }
        let id = self.clauses.len();
        self.clause_index.entry(key).or_default().push(id);
        self.clauses.push(clause);
        Ok(())
    }

    fn pred_name(&self, key: (Sym, usize)) -> String {
        format!("{}/{}", self.symbols.name(key.0), key.1)
    }

    pub fn defines_clause(&self, functor: Sym, arity: usize) -> bool {
        self.clause_index.contains_key(&(functor, arity))
    }

    pub fn defines_fact(&self, functor: Sym, arity: usize) -> bool {
        self.fact_index.contains_key(&(functor, arity))
    }

    /// Facts matching functor/arity in declaration order. When the goal's
    /// first argument is a ground atom/integer, the first-argument index
    /// narrows the candidates.
    pub fn candidate_facts(&self, functor: Sym, arity: usize, first_arg: Option<&Term>) -> Vec<usize> {
        let Some(idx) = self.fact_index.get(&(functor, arity)) else {
            return Vec::new();
        };
        match first_arg.and_then(arg_key) {
            Some(k) => {
                let indexed = idx.by_first_arg.get(&k).map_or(&[][..], |v| &v[..]);
                let mut merged: Vec<usize> =
                    indexed.iter().chain(idx.unindexed.iter()).copied().collect();
                merged.sort_unstable();
                merged
            }
            None => idx.all.clone(),
        }
    }

    pub fn candidate_clauses(&self, functor: Sym, arity: usize) -> &[usize] {
        self.clause_index
            .get(&(functor, arity))
            .map_or(&[], |v| &v[..])
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum GroundingError {
    #[error("non-ground probabilistic call: {0}")]
    NonGroundCall(String),
}

/// Per-query table assigning grounding numbers to instances of non-ground
/// probabilistic facts. Cleared between top-level queries.
#[derive(Debug, Default)]
pub struct GroundingTable {
    instances: HashMap<Term, GroundFactId>,
    next_index: HashMap<u32, u32>,
}

impl GroundingTable {
    pub fn new() -> Self {
        Self::default()
    }

    /// Returns the identifier for `instance` of fact `fact_id`, allocating
    /// the next grounding number on first sight. Declared-ground facts map
    /// straight to `(fact_id, 0)`.
    pub fn ground_id(
        &mut self,
        program: &Program,
        fact_id: usize,
        instance: &Term,
    ) -> Result<GroundFactId, GroundingError> {
        let fact = program.fact(fact_id);
        if fact.n_vars == 0 {
            return Ok(GroundFactId::ground(fact_id));
        }
        if !instance.is_ground() {
            return Err(GroundingError::NonGroundCall(pretty(
                instance,
                &program.symbols,
                &[],
            )));
        }
        if let Some(&id) = self.instances.get(instance) {
            return Ok(id);
        }
        let next = self.next_index.entry(fact_id as u32).or_insert(0);
        *next += 1;
        let id = GroundFactId {
            fact: fact_id as u32,
            grounding: *next,
        };
        self.instances.insert(instance.clone(), id);
        Ok(id)
    }
}

/// `∏_{f∈subset} p_f · ∏_{f∈universe∖subset} (1−p_f)`, the probability of
/// sampling exactly `subset` from `universe`.
pub fn subprogram_probability(
    program: &Program,
    subset: &[GroundFactId],
    universe: &[GroundFactId],
) -> f64 {
    debug_assert!(subset.iter().all(|f| universe.contains(f)));
    let mut p = 1.0;
    for f in universe {
        let pf = program.fact_prob(*f).value();
        if subset.contains(f) {
            p *= pf;
        } else {
            p *= 1.0 - pf;
        }
    }
    p
}
