//! SLD resolution with proof instrumentation: collects the ordered set of
//! ground probabilistic facts used by each derivation, supports pruning
//! hooks for threshold and branch-and-bound search, and entailment checks
//! against lazily realized samples.

use std::collections::{HashMap, HashSet};
use std::rc::Rc;

use thiserror::Error;

use crate::parser::Query;
use crate::program::{GroundFactId, GroundingError, GroundingTable, Program};
use crate::term::{pretty, Sym, Term};

/// One successful derivation: the duplicate-free fact sequence ordered by
/// first use, its log-probability, and the query's answer substitution.
#[derive(Debug, Clone)]
pub struct Proof {
    pub facts: Vec<GroundFactId>,
    pub log_prob: f64,
    pub answer: Vec<(String, Term)>,
}

impl Proof {
    pub fn prob(&self) -> f64 {
        self.log_prob.exp()
    }
}

/// A derivation halted by the pruner; `facts` is the prefix up to and
/// including the fact that triggered the stop.
#[derive(Debug, Clone)]
pub struct PartialProof {
    pub facts: Vec<GroundFactId>,
    pub log_prob: f64,
}

#[derive(Debug)]
pub enum ProofEvent {
    Complete(Proof),
    Stopped(PartialProof),
}

/// Sink decision after each emitted proof.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Step {
    Continue,
    Stop,
}

/// Decision taken each time the current proof prefix grows.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Pruning {
    Continue,
    /// Emit the prefix as a [`PartialProof`] and abandon the branch.
    StopRecord,
    /// Abandon the branch silently.
    StopDiscard,
}

pub trait Pruner {
    fn check(&mut self, log_prob: f64, facts: &[GroundFactId]) -> Pruning;
}

pub struct NoPruner;

impl Pruner for NoPruner {
    fn check(&mut self, _: f64, _: &[GroundFactId]) -> Pruning {
        Pruning::Continue
    }
}

/// Records any prefix whose probability drops below the threshold.
pub struct ThresholdPruner {
    pub log_gamma: f64,
}

impl Pruner for ThresholdPruner {
    fn check(&mut self, log_prob: f64, _: &[GroundFactId]) -> Pruning {
        if log_prob < self.log_gamma {
            Pruning::StopRecord
        } else {
            Pruning::Continue
        }
    }
}

#[derive(Debug, Error)]
pub enum EngineError {
    #[error(transparent)]
    Grounding(#[from] GroundingError),
    #[error("non-ground call to non-ground probabilistic fact: {0}")]
    NonGroundProbabilisticCall(String),
    #[error("arguments insufficiently instantiated in {0}")]
    UnboundArithmetic(String),
    #[error("unknown predicate {0}")]
    UnknownPredicate(String),
    #[error("{0} is only available under Monte Carlo inference")]
    VisitedBuiltinNotAllowed(String),
    #[error("recordzifnot requires a ground term, got {0}")]
    NonGroundRecord(String),
    #[error("unbound variable used as a goal")]
    UnboundGoal,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct SolveOptions {
    pub max_depth: Option<usize>,
    /// `eraseall`/`recordzifnot` are only sanctioned under Monte Carlo.
    pub allow_visited_builtins: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveOutcome {
    Exhausted,
    Pruned,
}

/// Three-valued per-fact sample for lazy Monte Carlo realization:
/// 0 = not yet sampled, 1 = in the sample, 2 = out.
#[derive(Debug)]
pub struct SampleState {
    ground: Vec<u8>,
    overflow: HashMap<GroundFactId, u8>,
    seed: u64,
    sample_index: u64,
}

const NOT_SAMPLED: u8 = 0;
const IN_SAMPLE: u8 = 1;
const OUT_OF_SAMPLE: u8 = 2;

/// splitmix64 finalizer; a stable mixing step shared by lazy and eager
/// realization so both make identical draws.
fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

pub fn sample_draw(seed: u64, sample_index: u64, id: GroundFactId, p: f64) -> bool {
    let h = mix64(mix64(seed ^ mix64(sample_index)) ^ (((id.fact as u64) << 32) | id.grounding as u64));
    // top 53 bits as a uniform in [0,1)
    let u = (h >> 11) as f64 * (1.0 / (1u64 << 53) as f64);
    u < p
}

impl SampleState {
    pub fn new(n_facts: usize, seed: u64) -> Self {
        SampleState {
            ground: vec![NOT_SAMPLED; n_facts],
            overflow: HashMap::new(),
            seed,
            sample_index: 0,
        }
    }

    /// Starts a fresh sample by resetting the sampling array.
    pub fn reset(&mut self, sample_index: u64) {
        self.ground.fill(NOT_SAMPLED);
        self.overflow.clear();
        self.sample_index = sample_index;
    }

    pub fn sample_index(&self) -> u64 {
        self.sample_index
    }

    fn slot(&mut self, id: GroundFactId) -> &mut u8 {
        if id.grounding == 0 {
            &mut self.ground[id.fact as usize]
        } else {
            self.overflow.entry(id).or_insert(NOT_SAMPLED)
        }
    }

    /// Lazily realizes the fact on first touch; later touches replay the
    /// stored value.
    pub fn contains(&mut self, id: GroundFactId, p: f64) -> bool {
        let seed = self.seed;
        let index = self.sample_index;
        let slot = self.slot(id);
        if *slot == NOT_SAMPLED {
            *slot = if sample_draw(seed, index, id, p) {
                IN_SAMPLE
            } else {
                OUT_OF_SAMPLE
            };
        }
        *slot == IN_SAMPLE
    }

    /// Realizes every declared-ground fact up front. Draws are identical to
    /// the lazy path by construction.
    pub fn realize_all(&mut self, program: &Program) {
        for fact in program.facts() {
            if fact.n_vars == 0 {
                let id = GroundFactId::ground(fact.id);
                let p = fact.prob.value();
                let _ = self.contains(id, p);
            }
        }
    }
}

/// Persistent goal list so alternative branches share their tails.
enum GoalList {
    Nil,
    Cons(Term, Rc<GoalList>),
}

enum Mode<'a> {
    /// Record proofs, consult the pruner.
    Collect,
    /// Consult/extend the sample instead of recording; stop at first success.
    Sample(&'a mut SampleState),
}

/// One resolution context over an immutable program. Holds the binding
/// store, trail, per-query grounding table, proof prefix, and the
/// non-backtrackable visited sets used by `recordzifnot`.
pub struct Solver<'p> {
    program: &'p Program,
    opts: SolveOptions,
    bindings: Vec<Option<Term>>,
    trail: Vec<usize>,
    grounding: GroundingTable,
    proof: Vec<GroundFactId>,
    proof_set: HashSet<GroundFactId>,
    log_prob: f64,
    visited: HashMap<Sym, HashSet<Term>>,
    pruned: bool,
}

impl<'p> Solver<'p> {
    pub fn new(program: &'p Program, opts: SolveOptions) -> Self {
        Solver {
            program,
            opts,
            bindings: Vec::new(),
            trail: Vec::new(),
            grounding: GroundingTable::new(),
            proof: Vec::new(),
            proof_set: HashSet::new(),
            log_prob: 0.0,
            visited: HashMap::new(),
            pruned: false,
        }
    }

    pub fn grounding_table(&mut self) -> &mut GroundingTable {
        &mut self.grounding
    }

    /// Explores the SLD tree of `query` left-to-right, clauses in
    /// declaration order, emitting proof events to `sink`.
    pub fn solve(
        &mut self,
        query: &Query,
        pruner: &mut dyn Pruner,
        sink: &mut dyn FnMut(ProofEvent) -> Step,
    ) -> Result<SolveOutcome, EngineError> {
        self.start_query(query.n_vars);
        let goals = Rc::new(GoalList::Cons(query.goal.clone(), Rc::new(GoalList::Nil)));
        let mut mode = Mode::Collect;
        self.prove(&goals, 0, &mut mode, pruner, sink, query)?;
        debug_assert!(self.proof.is_empty(), "proof prefix stack not unwound");
        debug_assert!(self.trail.is_empty());
        if self.pruned {
            Ok(SolveOutcome::Pruned)
        } else {
            Ok(SolveOutcome::Exhausted)
        }
    }

    /// Clears state scoped to a top-level query: the grounding table and
    /// the visited-set store. Callers running one sample per invocation
    /// reset between samples so grounding numbers depend only on the sample
    /// itself, not on execution order.
    pub fn clear_query_scope(&mut self) {
        self.grounding = GroundingTable::new();
        self.visited.clear();
    }

    /// Standard SLD refutation against a (lazily realized) sample. Returns
    /// whether the sample entails the query.
    pub fn solve_in_sample(
        &mut self,
        query: &Query,
        sample: &mut SampleState,
    ) -> Result<bool, EngineError> {
        self.start_query(query.n_vars);
        let goals = Rc::new(GoalList::Cons(query.goal.clone(), Rc::new(GoalList::Nil)));
        let mut entailed = false;
        let mut mode = Mode::Sample(sample);
        let step = self.prove(
            &goals,
            0,
            &mut mode,
            &mut NoPruner,
            &mut |_| {
                entailed = true;
                Step::Stop
            },
            query,
        )?;
        debug_assert!(step == Step::Stop || self.trail.is_empty());
        Ok(entailed)
    }

    fn start_query(&mut self, n_vars: usize) {
        self.bindings.clear();
        self.bindings.resize(n_vars, None);
        self.trail.clear();
        self.proof.clear();
        self.proof_set.clear();
        self.log_prob = 0.0;
        self.pruned = false;
        // visited sets survive across samples until eraseall; cleared per query
    }

    fn deref<'t>(&'t self, mut t: &'t Term) -> &'t Term {
        while let Term::Var(i) = t {
            match &self.bindings[*i] {
                Some(bound) => t = bound,
                None => break,
            }
        }
        t
    }

    /// Deep substitution of the current bindings into `t`.
    fn resolve(&self, t: &Term) -> Term {
        let t = self.deref(t);
        match t {
            Term::Compound(s, args) => {
                Term::Compound(*s, args.iter().map(|a| self.resolve(a)).collect())
            }
            other => other.clone(),
        }
    }

    fn bind(&mut self, var: usize, t: Term) {
        self.bindings[var] = Some(t);
        self.trail.push(var);
    }

    fn mark(&self) -> usize {
        self.trail.len()
    }

    fn undo_to(&mut self, mark: usize) {
        while self.trail.len() > mark {
            let var = self.trail.pop().unwrap();
            self.bindings[var] = None;
        }
    }

    /// Unification without occurs-check.
    fn unify(&mut self, a: &Term, b: &Term) -> bool {
        let a = self.deref(a).clone();
        let b = self.deref(b).clone();
        match (&a, &b) {
            (Term::Var(i), Term::Var(j)) if i == j => true,
            (Term::Var(i), _) => {
                self.bind(*i, b);
                true
            }
            (_, Term::Var(j)) => {
                self.bind(*j, a);
                true
            }
            (Term::Atom(x), Term::Atom(y)) => x == y,
            (Term::Int(x), Term::Int(y)) => x == y,
            (Term::Compound(f, xs), Term::Compound(g, ys)) => {
                f == g
                    && xs.len() == ys.len()
                    && xs.iter().zip(ys).all(|(x, y)| {
                        let (x, y) = (x.clone(), y.clone());
                        self.unify(&x, &y)
                    })
            }
            _ => false,
        }
    }

    fn eval_arith(&self, t: &Term) -> Result<i64, EngineError> {
        let b = self.program.builtins();
        match self.deref(t) {
            Term::Int(n) => Ok(*n),
            Term::Var(_) => Err(EngineError::UnboundArithmetic(
                pretty(&self.resolve(t), &self.program.symbols, &[]),
            )),
            Term::Compound(s, args) if args.len() == 2 => {
                let (s, args) = (*s, args.clone());
                let x = self.eval_arith(&args[0])?;
                let y = self.eval_arith(&args[1])?;
                if s == b.plus {
                    Ok(x + y)
                } else if s == b.minus {
                    Ok(x - y)
                } else if s == b.times {
                    Ok(x * y)
                } else {
                    Err(EngineError::UnboundArithmetic(
                        pretty(&self.resolve(t), &self.program.symbols, &[]),
                    ))
                }
            }
            other => Err(EngineError::UnboundArithmetic(
                pretty(other, &self.program.symbols, &[]),
            )),
        }
    }

    fn emit_complete(&self, sink: &mut dyn FnMut(ProofEvent) -> Step, query: &Query) -> Step {
        let answer = query
            .var_names
            .iter()
            .enumerate()
            .map(|(i, name)| (name.clone(), self.resolve(&Term::Var(i))))
            .collect();
        sink(ProofEvent::Complete(Proof {
            facts: self.proof.clone(),
            log_prob: self.log_prob,
            answer,
        }))
    }

    fn prove(
        &mut self,
        goals: &Rc<GoalList>,
        depth: usize,
        mode: &mut Mode<'_>,
        pruner: &mut dyn Pruner,
        sink: &mut dyn FnMut(ProofEvent) -> Step,
        query: &Query,
    ) -> Result<Step, EngineError> {
        let (goal, rest) = match goals.as_ref() {
            GoalList::Nil => {
                return Ok(match mode {
                    Mode::Collect => self.emit_complete(sink, query),
                    Mode::Sample(_) => sink(ProofEvent::Complete(Proof {
                        facts: Vec::new(),
                        log_prob: 0.0,
                        answer: Vec::new(),
                    })),
                });
            }
            GoalList::Cons(goal, rest) => (goal.clone(), rest.clone()),
        };

        let b = self.program.builtins().clone();
        let goal_deref = self.deref(&goal).clone();
        let (functor, arity) = match &goal_deref {
            Term::Var(_) => return Err(EngineError::UnboundGoal),
            Term::Int(_) => return Err(EngineError::UnboundGoal),
            t => t.functor().expect("callable"),
        };

        // builtins
        if arity == 2 && (functor == b.not_identical || functor == b.identical) {
            let args = match &goal_deref {
                Term::Compound(_, args) => args,
                _ => unreachable!(),
            };
            let equal = self.resolve(&args[0]) == self.resolve(&args[1]);
            let holds = if functor == b.identical { equal } else { !equal };
            return if holds {
                self.prove(&rest, depth, mode, pruner, sink, query)
            } else {
                Ok(Step::Continue)
            };
        }
        if arity == 2 && (functor == b.gt || functor == b.ge) {
            let args = match &goal_deref {
                Term::Compound(_, args) => args.clone(),
                _ => unreachable!(),
            };
            let x = self.eval_arith(&args[0])?;
            let y = self.eval_arith(&args[1])?;
            let holds = if functor == b.gt { x > y } else { x >= y };
            return if holds {
                self.prove(&rest, depth, mode, pruner, sink, query)
            } else {
                Ok(Step::Continue)
            };
        }
        if arity == 2 && functor == b.is {
            let args = match &goal_deref {
                Term::Compound(_, args) => args.clone(),
                _ => unreachable!(),
            };
            let value = Term::Int(self.eval_arith(&args[1])?);
            let mark = self.mark();
            let step = if self.unify(&args[0], &value) {
                self.prove(&rest, depth, mode, pruner, sink, query)?
            } else {
                Step::Continue
            };
            self.undo_to(mark);
            return Ok(step);
        }
        if functor == b.truth && arity == 0 {
            return self.prove(&rest, depth, mode, pruner, sink, query);
        }
        if functor == b.eraseall && arity == 1 {
            return self.visited_erase(&goal_deref, &rest, depth, mode, pruner, sink, query);
        }
        if functor == b.recordzifnot && (arity == 2 || arity == 3) {
            return self.visited_record(&goal_deref, &rest, depth, mode, pruner, sink, query);
        }

        if self.program.defines_fact(functor, arity) {
            return self.prove_fact(&goal_deref, functor, arity, &rest, depth, mode, pruner, sink, query);
        }
        if self.program.defines_clause(functor, arity) {
            if let Some(max) = self.opts.max_depth {
                if depth >= max {
                    self.pruned = true;
                    return Ok(Step::Continue);
                }
            }
            return self.prove_clause(&goal_deref, functor, arity, &rest, depth, mode, pruner, sink, query);
        }
        Err(EngineError::UnknownPredicate(format!(
            "{}/{}",
            self.program.symbols.name(functor),
            arity
        )))
    }

    #[allow(clippy::too_many_arguments)]
    fn visited_erase(
        &mut self,
        goal: &Term,
        rest: &Rc<GoalList>,
        depth: usize,
        mode: &mut Mode<'_>,
        pruner: &mut dyn Pruner,
        sink: &mut dyn FnMut(ProofEvent) -> Step,
        query: &Query,
    ) -> Result<Step, EngineError> {
        if !self.opts.allow_visited_builtins {
            return Err(EngineError::VisitedBuiltinNotAllowed("eraseall".into()));
        }
        let key = match self.deref(match goal {
            Term::Compound(_, args) => &args[0],
            _ => unreachable!(),
        }) {
            Term::Atom(s) => *s,
            other => {
                return Err(EngineError::NonGroundRecord(pretty(
                    other,
                    &self.program.symbols,
                    &[],
                )))
            }
        };
        self.visited.remove(&key);
        self.prove(rest, depth, mode, pruner, sink, query)
    }

    /// `recordzifnot(Key, T, _)`: succeeds iff T was absent under Key and
    /// inserts it. Insertion is not undone on backtracking.
    #[allow(clippy::too_many_arguments)]
    fn visited_record(
        &mut self,
        goal: &Term,
        rest: &Rc<GoalList>,
        depth: usize,
        mode: &mut Mode<'_>,
        pruner: &mut dyn Pruner,
        sink: &mut dyn FnMut(ProofEvent) -> Step,
        query: &Query,
    ) -> Result<Step, EngineError> {
        if !self.opts.allow_visited_builtins {
            return Err(EngineError::VisitedBuiltinNotAllowed("recordzifnot".into()));
        }
        let args = match goal {
            Term::Compound(_, args) => args,
            _ => unreachable!(),
        };
        let key = match self.deref(&args[0]) {
            Term::Atom(s) => *s,
            other => {
                return Err(EngineError::NonGroundRecord(pretty(
                    other,
                    &self.program.symbols,
                    &[],
                )))
            }
        };
        let term = self.resolve(&args[1]);
        if !term.is_ground() {
            return Err(EngineError::NonGroundRecord(pretty(
                &term,
                &self.program.symbols,
                &[],
            )));
        }
        if !self.visited.entry(key).or_default().insert(term) {
            return Ok(Step::Continue); // already recorded: fail
        }
        self.prove(rest, depth, mode, pruner, sink, query)
    }

    #[allow(clippy::too_many_arguments)]
    fn prove_fact(
        &mut self,
        goal: &Term,
        functor: Sym,
        arity: usize,
        rest: &Rc<GoalList>,
        depth: usize,
        mode: &mut Mode<'_>,
        pruner: &mut dyn Pruner,
        sink: &mut dyn FnMut(ProofEvent) -> Step,
        query: &Query,
    ) -> Result<Step, EngineError> {
        let first_arg = match goal {
            Term::Compound(_, args) => Some(self.resolve(&args[0])),
            _ => None,
        };
        let candidates = self
            .program
            .candidate_facts(functor, arity, first_arg.as_ref());
        for fact_id in candidates {
            let fact = self.program.fact(fact_id);
            if fact.n_vars > 0 {
                // calls to non-ground probabilistic facts must be ground
                let called = self.resolve(goal);
                if !called.is_ground() {
                    return Err(EngineError::NonGroundProbabilisticCall(pretty(
                        &called,
                        &self.program.symbols,
                        &[],
                    )));
                }
            }
            let mark = self.mark();
            let offset = self.bindings.len();
            self.bindings.resize(offset + fact.n_vars, None);
            let head = fact.head.rename(offset);
            let step = if self.unify(goal, &head) {
                let instance = self.resolve(goal);
                let id = self.grounding.ground_id(self.program, fact_id, &instance)?;
                self.continue_with_fact(id, rest, depth, mode, pruner, sink, query)?
            } else {
                Step::Continue
            };
            self.undo_to(mark);
            self.bindings.truncate(offset);
            if step == Step::Stop {
                return Ok(Step::Stop);
            }
        }
        Ok(Step::Continue)
    }

    #[allow(clippy::too_many_arguments)]
    fn continue_with_fact(
        &mut self,
        id: GroundFactId,
        rest: &Rc<GoalList>,
        depth: usize,
        mode: &mut Mode<'_>,
        pruner: &mut dyn Pruner,
        sink: &mut dyn FnMut(ProofEvent) -> Step,
        query: &Query,
    ) -> Result<Step, EngineError> {
        let p = self.program.fact_prob(id);
        match mode {
            Mode::Sample(sample) => {
                if sample.contains(id, p.value()) {
                    self.prove(rest, depth, mode, pruner, sink, query)
                } else {
                    Ok(Step::Continue)
                }
            }
            Mode::Collect => {
                // re-using a fact already in the proof changes nothing
                if self.proof_set.contains(&id) {
                    return self.prove(rest, depth, mode, pruner, sink, query);
                }
                self.proof.push(id);
                self.proof_set.insert(id);
                self.log_prob += p.log_value();
                let step = match pruner.check(self.log_prob, &self.proof) {
                    Pruning::Continue => self.prove(rest, depth, mode, pruner, sink, query)?,
                    Pruning::StopRecord => {
                        self.pruned = true;
                        sink(ProofEvent::Stopped(PartialProof {
                            facts: self.proof.clone(),
                            log_prob: self.log_prob,
                        }))
                    }
                    Pruning::StopDiscard => {
                        self.pruned = true;
                        Step::Continue
                    }
                };
                self.proof.pop();
                self.proof_set.remove(&id);
                self.log_prob -= p.log_value();
                Ok(step)
            }
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn prove_clause(
        &mut self,
        goal: &Term,
        functor: Sym,
        arity: usize,
        rest: &Rc<GoalList>,
        depth: usize,
        mode: &mut Mode<'_>,
        pruner: &mut dyn Pruner,
        sink: &mut dyn FnMut(ProofEvent) -> Step,
        query: &Query,
    ) -> Result<Step, EngineError> {
        let candidates: Vec<usize> = self.program.candidate_clauses(functor, arity).to_vec();
        for clause_id in candidates {
            let clause = &self.program.clauses()[clause_id];
            let mark = self.mark();
            let offset = self.bindings.len();
            self.bindings.resize(offset + clause.n_vars, None);
            let head = clause.head.rename(offset);
            let body: Vec<Term> = clause.body.iter().map(|g| g.rename(offset)).collect();
            let step = if self.unify(goal, &head) {
                let new_goals = body
                    .into_iter()
                    .rev()
                    .fold(rest.clone(), |acc, g| Rc::new(GoalList::Cons(g, acc)));
                self.prove(&new_goals, depth + 1, mode, pruner, sink, query)?
            } else {
                Step::Continue
            };
            self.undo_to(mark);
            self.bindings.truncate(offset);
            if step == Step::Stop {
                return Ok(Step::Stop);
            }
        }
        Ok(Step::Continue)
    }
}

/// Collects every proof of `query` (no pruning).
pub fn all_proofs(
    program: &Program,
    query: &Query,
    opts: SolveOptions,
) -> Result<Vec<Proof>, EngineError> {
    let mut proofs = Vec::new();
    let mut solver = Solver::new(program, opts);
    solver.solve(query, &mut NoPruner, &mut |ev| {
        if let ProofEvent::Complete(p) = ev {
            proofs.push(p);
        }
        Step::Continue
    })?;
    Ok(proofs)
}

/// Branch-and-bound search for a most likely explanation. Prefixes whose
/// probability does not strictly improve on the current best are cut.
pub fn best_proof(
    program: &Program,
    query: &Query,
    opts: SolveOptions,
) -> Result<Option<Proof>, EngineError> {
    struct BestBound {
        bound: f64,
        active: bool,
    }
    impl Pruner for BestBound {
        fn check(&mut self, log_prob: f64, _: &[GroundFactId]) -> Pruning {
            if self.active && log_prob <= self.bound {
                Pruning::StopDiscard
            } else {
                Pruning::Continue
            }
        }
    }

    let shared = Rc::new(std::cell::RefCell::new(BestBound {
        bound: f64::NEG_INFINITY,
        active: false,
    }));
    let mut best: Option<Proof> = None;

    struct SharedPruner(Rc<std::cell::RefCell<BestBound>>);
    impl Pruner for SharedPruner {
        fn check(&mut self, log_prob: f64, facts: &[GroundFactId]) -> Pruning {
            self.0.borrow_mut().check(log_prob, facts)
        }
    }

    let mut pruner = SharedPruner(shared.clone());
    let mut solver = Solver::new(program, opts);
    solver.solve(query, &mut pruner, &mut |ev| {
        if let ProofEvent::Complete(p) = ev {
            let mut state = shared.borrow_mut();
            // first-found proof at the maximal probability wins
            if !state.active || p.log_prob > state.bound {
                state.bound = p.log_prob;
                state.active = true;
                best = Some(p);
            }
        }
        Step::Continue
    })?;
    Ok(best)
}

/// All proofs whose probability is at least that of the k-th best, ties
/// included. The evolving k-th best probability bounds the search.
pub fn k_best_proofs(
    program: &Program,
    query: &Query,
    k: usize,
    opts: SolveOptions,
) -> Result<Vec<Proof>, EngineError> {
    assert!(k >= 1, "k must be at least 1");

    struct KBound {
        k: usize,
        // log-probs of proofs found so far, descending
        found: Vec<f64>,
    }
    impl KBound {
        fn bound(&self) -> f64 {
            if self.found.len() >= self.k {
                self.found[self.k - 1]
            } else {
                f64::NEG_INFINITY
            }
        }
    }
    impl Pruner for KBound {
        fn check(&mut self, log_prob: f64, _: &[GroundFactId]) -> Pruning {
            if log_prob < self.bound() {
                Pruning::StopDiscard
            } else {
                Pruning::Continue
            }
        }
    }

    let shared = Rc::new(std::cell::RefCell::new(KBound { k, found: Vec::new() }));
    struct SharedPruner(Rc<std::cell::RefCell<KBound>>);
    impl Pruner for SharedPruner {
        fn check(&mut self, log_prob: f64, facts: &[GroundFactId]) -> Pruning {
            self.0.borrow_mut().check(log_prob, facts)
        }
    }

    let mut proofs: Vec<Proof> = Vec::new();
    let mut pruner = SharedPruner(shared.clone());
    let mut solver = Solver::new(program, opts);
    solver.solve(query, &mut pruner, &mut |ev| {
        if let ProofEvent::Complete(p) = ev {
            let mut state = shared.borrow_mut();
            let pos = state
                .found
                .partition_point(|&lp| lp >= p.log_prob);
            state.found.insert(pos, p.log_prob);
            proofs.push(p);
        }
        Step::Continue
    })?;

    // keep everything at or above the k-th best probability
    let bound = shared.borrow().bound();
    proofs.retain(|p| p.log_prob >= bound);
    proofs.sort_by(|a, b| b.log_prob.partial_cmp(&a.log_prob).unwrap());
    Ok(proofs)
}
