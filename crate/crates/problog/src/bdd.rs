//! Reduced ordered BDD package: hash-consed nodes, apply-based
//! construction, trie-to-BDD translation, probability evaluation, and the
//! textual BDD-script debug export.

use std::collections::HashMap;
use std::fmt::Write as _;

use thiserror::Error;

use crate::program::GroundFactId;
use crate::trie::{NodeId as TrieNodeId, ProofTrie, Token};

/// Handle to a node inside one manager. 0 and 1 are the terminals.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeRef(u32);

pub const FALSE: NodeRef = NodeRef(0);
pub const TRUE: NodeRef = NodeRef(1);

impl NodeRef {
    pub fn is_terminal(self) -> bool {
        self.0 < 2
    }
}

#[derive(Debug, Clone, Copy)]
struct BddNode {
    /// Position in the variable order, not the fact id itself.
    var_pos: u32,
    low: NodeRef,
    high: NodeRef,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
enum Op {
    And,
    Or,
}

#[derive(Debug, Error, PartialEq)]
pub enum BddError {
    #[error("variable {0:?} is not registered in the manager's order")]
    UnregisteredVariable(GroundFactId),
    #[error("no probability for variable {0:?} reachable from the root")]
    MissingProbability(GroundFactId),
}

/// Hash-consed reduced ordered BDD manager over ground-fact variables.
/// Canonicity invariant: structurally identical nodes share one [`NodeRef`],
/// no node has `low == high`, and variable positions strictly increase
/// towards the terminals.
#[derive(Debug)]
pub struct BddManager {
    nodes: Vec<BddNode>,
    unique: HashMap<(u32, NodeRef, NodeRef), NodeRef>,
    cache: HashMap<(Op, NodeRef, NodeRef), NodeRef>,
    order: Vec<GroundFactId>,
    position: HashMap<GroundFactId, u32>,
}

impl BddManager {
    /// Creates a manager with the given global variable order.
    pub fn new(order: Vec<GroundFactId>) -> Self {
        let position = order
            .iter()
            .enumerate()
            .map(|(i, &v)| (v, i as u32))
            .collect();
        BddManager {
            // slots 0/1 are placeholders for the terminals
            nodes: vec![
                BddNode {
                    var_pos: u32::MAX,
                    low: FALSE,
                    high: FALSE,
                },
                BddNode {
                    var_pos: u32::MAX,
                    low: TRUE,
                    high: TRUE,
                },
            ],
            unique: HashMap::new(),
            cache: HashMap::new(),
            order,
            position,
        }
    }

    /// Manager whose order is the trie's first-appearance variable order.
    pub fn for_trie(trie: &ProofTrie) -> Self {
        Self::new(trie.var_order().to_vec())
    }

    pub fn order(&self) -> &[GroundFactId] {
        &self.order
    }

    /// Internal nodes allocated so far.
    pub fn node_count(&self) -> usize {
        self.nodes.len() - 2
    }

    /// Decision nodes reachable from `root`, the size of the final diagram
    /// excluding intermediates retained by the unique table.
    pub fn reachable_count(&self, root: NodeRef) -> usize {
        let mut seen = std::collections::HashSet::new();
        let mut stack = vec![root];
        while let Some(n) = stack.pop() {
            if n.is_terminal() || !seen.insert(n) {
                continue;
            }
            let node = &self.nodes[n.0 as usize];
            stack.push(node.low);
            stack.push(node.high);
        }
        seen.len()
    }

    fn var_pos(&self, n: NodeRef) -> u32 {
        if n.is_terminal() {
            u32::MAX
        } else {
            self.nodes[n.0 as usize].var_pos
        }
    }

    fn mk(&mut self, var_pos: u32, low: NodeRef, high: NodeRef) -> NodeRef {
        if low == high {
            return low; // redundant test deleted
        }
        if let Some(&n) = self.unique.get(&(var_pos, low, high)) {
            return n;
        }
        debug_assert!(var_pos < self.var_pos(low) && var_pos < self.var_pos(high));
        let n = NodeRef(self.nodes.len() as u32);
        self.nodes.push(BddNode { var_pos, low, high });
        self.unique.insert((var_pos, low, high), n);
        n
    }

    /// Canonical node for a single variable.
    pub fn var_node(&mut self, v: GroundFactId) -> Result<NodeRef, BddError> {
        let pos = *self
            .position
            .get(&v)
            .ok_or(BddError::UnregisteredVariable(v))?;
        Ok(self.mk(pos, FALSE, TRUE))
    }

    pub fn apply_and(&mut self, a: NodeRef, b: NodeRef) -> NodeRef {
        self.apply(Op::And, a, b)
    }

    pub fn apply_or(&mut self, a: NodeRef, b: NodeRef) -> NodeRef {
        self.apply(Op::Or, a, b)
    }

    fn apply(&mut self, op: Op, a: NodeRef, b: NodeRef) -> NodeRef {
        match op {
            Op::And => {
                if a == FALSE || b == FALSE {
                    return FALSE;
                }
                if a == TRUE {
                    return b;
                }
                if b == TRUE || a == b {
                    return a;
                }
            }
            Op::Or => {
                if a == TRUE || b == TRUE {
                    return TRUE;
                }
                if a == FALSE {
                    return b;
                }
                if b == FALSE || a == b {
                    return a;
                }
            }
        }
        // both operations are commutative
        let key = (op, a.min(b), a.max(b));
        if let Some(&r) = self.cache.get(&key) {
            return r;
        }
        let (pa, pb) = (self.var_pos(a), self.var_pos(b));
        let top = pa.min(pb);
        let (a_low, a_high) = self.cofactors(a, top);
        let (b_low, b_high) = self.cofactors(b, top);
        let low = self.apply(op, a_low, b_low);
        let high = self.apply(op, a_high, b_high);
        let r = self.mk(top, low, high);
        self.cache.insert(key, r);
        r
    }

    fn cofactors(&self, n: NodeRef, var_pos: u32) -> (NodeRef, NodeRef) {
        if self.var_pos(n) == var_pos {
            let node = self.nodes[n.0 as usize];
            (node.low, node.high)
        } else {
            (n, n)
        }
    }

    /// Algorithm-3 style evaluation: one memoized traversal, weighting the
    /// high child by the variable's probability and the low child by its
    /// complement.
    pub fn probability(
        &self,
        root: NodeRef,
        prob_of: &dyn Fn(GroundFactId) -> Option<f64>,
    ) -> Result<f64, BddError> {
        let mut memo: HashMap<NodeRef, f64> = HashMap::new();
        self.prob_rec(root, prob_of, &mut memo)
    }

    fn prob_rec(
        &self,
        n: NodeRef,
        prob_of: &dyn Fn(GroundFactId) -> Option<f64>,
        memo: &mut HashMap<NodeRef, f64>,
    ) -> Result<f64, BddError> {
        if n == FALSE {
            return Ok(0.0);
        }
        if n == TRUE {
            return Ok(1.0);
        }
        if let Some(&p) = memo.get(&n) {
            return Ok(p);
        }
        let node = self.nodes[n.0 as usize];
        let var = self.order[node.var_pos as usize];
        let p_var = prob_of(var).ok_or(BddError::MissingProbability(var))?;
        let high = self.prob_rec(node.high, prob_of, memo)?;
        let low = self.prob_rec(node.low, prob_of, memo)?;
        let p = p_var * high + (1.0 - p_var) * low;
        memo.insert(n, p);
        Ok(p)
    }

    /// Translates a proof trie bottom-up into the BDD of its DNF. A node's
    /// formula is its variable conjoined with the disjunction of its
    /// children; an end marker contributes True, which absorbs any deeper
    /// alternatives. Structurally identical subtrees are translated once.
    pub fn translate_trie(&mut self, trie: &ProofTrie) -> Result<NodeRef, BddError> {
        let mut translator = TrieTranslator {
            shapes: HashMap::new(),
            shape_bdd: Vec::new(),
        };
        let (_, root) = translator.build(self, trie, trie.root())?;
        Ok(root)
    }

    /// Checks reducedness and orderedness for every allocated node.
    pub fn assert_invariants(&self) {
        for (i, node) in self.nodes.iter().enumerate().skip(2) {
            assert!(node.low != node.high, "redundant node {i}");
            assert!(
                node.var_pos < self.var_pos(node.low) && node.var_pos < self.var_pos(node.high),
                "order violated at node {i}"
            );
        }
    }

    /// DOT rendering for documentation; solid edges = true, dashed = false.
    pub fn to_dot(&self, root: NodeRef, name_of: &dyn Fn(GroundFactId) -> String) -> String {
        let mut out = String::from("digraph bdd {\n");
        let mut seen = std::collections::HashSet::new();
        let mut stack = vec![root];
        out.push_str("  t0 [label=\"0\", shape=box];\n  t1 [label=\"1\", shape=box];\n");
        while let Some(n) = stack.pop() {
            if n.is_terminal() || !seen.insert(n) {
                continue;
            }
            let node = self.nodes[n.0 as usize];
            let var = self.order[node.var_pos as usize];
            let _ = writeln!(out, "  n{} [label=\"{}\"];", n.0, name_of(var));
            for (child, style) in [(node.high, "solid"), (node.low, "dashed")] {
                let target = if child.is_terminal() {
                    format!("t{}", child.0)
                } else {
                    format!("n{}", child.0)
                };
                let _ = writeln!(out, "  n{} -> {} [style={}];", n.0, target, style);
                stack.push(child);
            }
        }
        out.push_str("}\n");
        out
    }
}

/// Dense interned key per distinct subtree shape, so repeated subtrees map
/// to the already-built BDD without hash-collision risk.
struct TrieTranslator {
    shapes: HashMap<(Token, Vec<u32>), u32>,
    shape_bdd: Vec<NodeRef>,
}

impl TrieTranslator {
    fn build(
        &mut self,
        mgr: &mut BddManager,
        trie: &ProofTrie,
        node: TrieNodeId,
    ) -> Result<(u32, NodeRef), BddError> {
        let token = trie.token(node);
        if token == Token::End {
            return Ok((self.intern((Token::End, Vec::new()), TRUE), TRUE));
        }
        let mut child_shapes = Vec::new();
        let mut disjunction = FALSE;
        for child in trie.children(node).collect::<Vec<_>>() {
            let (shape, bdd) = self.build(mgr, trie, child)?;
            child_shapes.push(shape);
            disjunction = mgr.apply_or(disjunction, bdd);
        }
        let key = (token, child_shapes);
        if let Some(&shape) = self.shapes.get(&key) {
            return Ok((shape, self.shape_bdd[shape as usize]));
        }
        let bdd = match token {
            Token::Root => disjunction,
            Token::Fact(v) => {
                let var = mgr.var_node(v)?;
                mgr.apply_and(var, disjunction)
            }
            Token::End => unreachable!(),
        };
        Ok((self.intern(key, bdd), bdd))
    }

    fn intern(&mut self, key: (Token, Vec<u32>), bdd: NodeRef) -> u32 {
        if let Some(&shape) = self.shapes.get(&key) {
            return shape;
        }
        let shape = self.shape_bdd.len() as u32;
        self.shapes.insert(key, shape);
        self.shape_bdd.push(bdd);
        shape
    }
}

/// One operand of a script statement: a fact variable or an earlier `n_i`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Operand {
    Var(GroundFactId),
    Node(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScriptOp {
    And,
    Or,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Statement {
    pub name: usize,
    pub op: ScriptOp,
    pub operands: Vec<Operand>,
}

/// The textual BDD generation script produced from a trie: a statement
/// list ending in `top = name`.
#[derive(Debug, Clone, PartialEq)]
pub struct BddScript {
    pub statements: Vec<Statement>,
    pub top: Operand,
}

impl BddScript {
    pub fn render(&self, name_of: &dyn Fn(GroundFactId) -> String) -> String {
        let operand = |o: &Operand| match o {
            Operand::Var(v) => name_of(*v),
            Operand::Node(i) => format!("n{i}"),
        };
        let mut out = String::new();
        for stmt in &self.statements {
            let sep = match stmt.op {
                ScriptOp::And => " ∧ ",
                ScriptOp::Or => " ∨ ",
            };
            let rhs: Vec<String> = stmt.operands.iter().map(&operand).collect();
            let _ = writeln!(out, "n{} = {}", stmt.name, rhs.join(sep));
        }
        let _ = writeln!(out, "top = {}", operand(&self.top));
        out
    }

    /// Evaluates the script through the manager's apply operations.
    pub fn fold(&self, mgr: &mut BddManager) -> Result<NodeRef, BddError> {
        let mut defined: HashMap<usize, NodeRef> = HashMap::new();
        let eval = |mgr: &mut BddManager, o: &Operand, defined: &HashMap<usize, NodeRef>| {
            Ok::<NodeRef, BddError>(match o {
                Operand::Var(v) => mgr.var_node(*v)?,
                Operand::Node(i) => defined[i],
            })
        };
        for stmt in &self.statements {
            let mut acc = eval(mgr, &stmt.operands[0], &defined)?;
            for o in &stmt.operands[1..] {
                let rhs = eval(mgr, o, &defined)?;
                acc = match stmt.op {
                    ScriptOp::And => mgr.apply_and(acc, rhs),
                    ScriptOp::Or => mgr.apply_or(acc, rhs),
                };
            }
            defined.insert(stmt.name, acc);
        }
        eval(mgr, &self.top, &defined)
    }
}

/// Working tree for the script generator.
#[derive(Debug, Clone)]
struct SNode {
    label: Operand,
    children: Vec<SNode>,
}

impl SNode {
    fn is_leaf(&self) -> bool {
        self.children.is_empty()
    }
}

/// Generates the statement sequence of the trie-to-script translation:
/// repeatedly conjoin single leaf children with their parents and disjoin
/// all-leaf sibling groups, reusing the statement for a repeated subtree,
/// until the root holds a single leaf.
pub fn export_script(trie: &ProofTrie) -> BddScript {
    let mut root = SNode {
        label: Operand::Node(usize::MAX), // root carries no label
        children: trie
            .children(trie.root())
            .filter_map(|c| build_snode(trie, c))
            .collect(),
    };
    let mut statements = Vec::new();
    let mut next_name = 1usize;

    loop {
        if root.children.len() == 1 && root.children[0].is_leaf() {
            break;
        }
        // S∧: leaves that are the single child of their parent
        let mut and_subst: HashMap<(Operand, Operand), Operand> = HashMap::new();
        rewrite_and(
            &mut root,
            true,
            &mut and_subst,
            &mut statements,
            &mut next_name,
        );
        // S∨: parents whose children are all leaves (two or more)
        let mut or_subst: HashMap<Vec<Operand>, Operand> = HashMap::new();
        rewrite_or(&mut root, &mut or_subst, &mut statements, &mut next_name);
        debug_assert!(!(and_subst.is_empty() && or_subst.is_empty()), "no progress");
    }

    BddScript {
        statements,
        top: root.children[0].label,
    }
}

/// Converts a trie node, pruning alternatives below a stored proof end:
/// `a ∨ (a ∧ b) = a`, so a node with an end marker becomes a leaf.
fn build_snode(trie: &ProofTrie, node: TrieNodeId) -> Option<SNode> {
    let label = match trie.token(node) {
        Token::Fact(f) => Operand::Var(f),
        Token::End | Token::Root => return None,
    };
    let children: Vec<TrieNodeId> = trie.children(node).collect();
    if children.iter().any(|&c| trie.token(c) == Token::End) {
        return Some(SNode {
            label,
            children: Vec::new(),
        });
    }
    Some(SNode {
        label,
        children: children
            .into_iter()
            .filter_map(|c| build_snode(trie, c))
            .collect(),
    })
}

fn rewrite_and(
    node: &mut SNode,
    is_root: bool,
    subst: &mut HashMap<(Operand, Operand), Operand>,
    statements: &mut Vec<Statement>,
    next_name: &mut usize,
) {
    if !is_root && node.children.len() == 1 && node.children[0].is_leaf() {
        let key = (node.label, node.children[0].label);
        let replacement = *subst.entry(key).or_insert_with(|| {
            let name = *next_name;
            *next_name += 1;
            statements.push(Statement {
                name,
                op: ScriptOp::And,
                operands: vec![key.0, key.1],
            });
            Operand::Node(name)
        });
        node.label = replacement;
        node.children.clear();
        return;
    }
    for child in &mut node.children {
        rewrite_and(child, false, subst, statements, next_name);
    }
}

fn rewrite_or(
    node: &mut SNode,
    subst: &mut HashMap<Vec<Operand>, Operand>,
    statements: &mut Vec<Statement>,
    next_name: &mut usize,
) {
    if node.children.len() >= 2 && node.children.iter().all(SNode::is_leaf) {
        let key: Vec<Operand> = node.children.iter().map(|c| c.label).collect();
        let replacement = *subst.entry(key.clone()).or_insert_with(|| {
            let name = *next_name;
            *next_name += 1;
            statements.push(Statement {
                name,
                op: ScriptOp::Or,
                operands: key,
            });
            Operand::Node(name)
        });
        node.children = vec![SNode {
            label: replacement,
            children: Vec::new(),
        }];
        return;
    }
    for child in &mut node.children {
        rewrite_or(child, subst, statements, next_name);
    }
}
