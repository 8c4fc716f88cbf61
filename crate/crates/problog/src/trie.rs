//! Prefix-sharing trie over proofs stored as token sequences. This is the
//! concrete DNF representation handed to the BDD compiler: each root-to-end
//! path is one conjunction of fact variables.

use std::collections::{HashMap, HashSet};

use crate::program::GroundFactId;

/// Sibling lists are hash-indexed once they outgrow this length.
const HASH_PROMOTION_THRESHOLD: usize = 8;

pub type NodeId = u32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Token {
    Root,
    Fact(GroundFactId),
    /// Distinguishes a stored proof from a prefix of a longer proof.
    End,
}

#[derive(Debug)]
struct Node {
    token: Token,
    parent: Option<NodeId>,
    first_child: Option<NodeId>,
    last_child: Option<NodeId>,
    next_sibling: Option<NodeId>,
    child_count: usize,
    /// Present iff the sibling list outgrew the promotion threshold.
    child_index: Option<HashMap<Token, NodeId>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Insert {
    Inserted,
    Duplicate,
}

/// Store of proofs and partial proofs with maximal prefix sharing.
#[derive(Debug)]
pub struct ProofTrie {
    nodes: Vec<Node>,
    leaves: Vec<NodeId>,
    /// Fact tokens in order of first appearance across inserted proofs;
    /// this becomes the BDD variable order.
    var_order: Vec<GroundFactId>,
    vars_seen: HashSet<GroundFactId>,
}

impl Default for ProofTrie {
    fn default() -> Self {
        Self::new()
    }
}

impl ProofTrie {
    pub fn new() -> Self {
        ProofTrie {
            nodes: vec![Node {
                token: Token::Root,
                parent: None,
                first_child: None,
                last_child: None,
                next_sibling: None,
                child_count: 0,
                child_index: None,
            }],
            leaves: Vec::new(),
            var_order: Vec::new(),
            vars_seen: HashSet::new(),
        }
    }

    pub fn root(&self) -> NodeId {
        0
    }

    pub fn token(&self, id: NodeId) -> Token {
        self.nodes[id as usize].token
    }

    pub fn parent(&self, id: NodeId) -> Option<NodeId> {
        self.nodes[id as usize].parent
    }

    /// Nodes allocated beyond the root.
    pub fn node_count(&self) -> usize {
        self.nodes.len() - 1
    }

    /// Number of distinct inserted sequences (end markers).
    pub fn proof_count(&self) -> usize {
        self.leaves.len()
    }

    pub fn is_empty(&self) -> bool {
        self.leaves.is_empty()
    }

    pub fn var_order(&self) -> &[GroundFactId] {
        &self.var_order
    }

    pub fn children(&self, id: NodeId) -> ChildIter<'_> {
        ChildIter {
            trie: self,
            next: self.nodes[id as usize].first_child,
        }
    }

    fn find_child(&self, parent: NodeId, token: Token) -> Option<NodeId> {
        if let Some(index) = &self.nodes[parent as usize].child_index {
            return index.get(&token).copied();
        }
        self.children(parent).find(|&c| self.nodes[c as usize].token == token)
    }

    fn add_child(&mut self, parent: NodeId, token: Token) -> NodeId {
        let id = self.nodes.len() as NodeId;
        self.nodes.push(Node {
            token,
            parent: Some(parent),
            first_child: None,
            last_child: None,
            next_sibling: None,
            child_count: 0,
            child_index: None,
        });
        let p = &mut self.nodes[parent as usize];
        p.child_count += 1;
        let prev_last = p.last_child.replace(id);
        match prev_last {
            Some(last) => self.nodes[last as usize].next_sibling = Some(id),
            None => self.nodes[parent as usize].first_child = Some(id),
        }
        if let Some(index) = &mut self.nodes[parent as usize].child_index {
            index.insert(token, id);
        } else if self.nodes[parent as usize].child_count > HASH_PROMOTION_THRESHOLD {
            self.promote_to_hash(parent);
        }
        id
    }

    /// Builds the sibling hash index once the list exceeds the threshold.
    /// Membership answers are identical before and after promotion.
    fn promote_to_hash(&mut self, parent: NodeId) {
        let mut index = HashMap::new();
        let mut next = self.nodes[parent as usize].first_child;
        while let Some(c) = next {
            index.insert(self.nodes[c as usize].token, c);
            next = self.nodes[c as usize].next_sibling;
        }
        self.nodes[parent as usize].child_index = Some(index);
    }

    /// Walks the shared prefix, allocating nodes only for the novel suffix
    /// plus an end marker. Re-inserting an existing sequence allocates
    /// nothing.
    pub fn insert(&mut self, proof: &[GroundFactId]) -> Insert {
        debug_assert!(!proof.is_empty());
        debug_assert!(
            proof.iter().collect::<HashSet<_>>().len() == proof.len(),
            "proofs are duplicate-free"
        );
        let mut cur = self.root();
        for &fact in proof {
            if self.vars_seen.insert(fact) {
                self.var_order.push(fact);
            }
            let token = Token::Fact(fact);
            cur = match self.find_child(cur, token) {
                Some(c) => c,
                None => self.add_child(cur, token),
            };
        }
        if self.find_child(cur, Token::End).is_some() {
            return Insert::Duplicate;
        }
        let end = self.add_child(cur, Token::End);
        self.leaves.push(end);
        #[cfg(debug_assertions)]
        self.assert_child_uniqueness(cur);
        Insert::Inserted
    }

    pub fn contains(&self, proof: &[GroundFactId]) -> bool {
        let mut cur = self.root();
        for &fact in proof {
            match self.find_child(cur, Token::Fact(fact)) {
                Some(c) => cur = c,
                None => return false,
            }
        }
        self.find_child(cur, Token::End).is_some()
    }

    #[cfg(debug_assertions)]
    fn assert_child_uniqueness(&self, parent: NodeId) {
        let tokens: Vec<Token> = self
            .children(parent)
            .map(|c| self.nodes[c as usize].token)
            .collect();
        let set: HashSet<Token> = tokens.iter().copied().collect();
        debug_assert_eq!(tokens.len(), set.len(), "sibling tokens must be unique");
    }

    /// Post-order traversal: every child is visited before its parent,
    /// siblings in insertion order, the root last.
    pub fn iterate_bottom_up(&self, visitor: &mut dyn FnMut(NodeId)) {
        self.post_order(self.root(), visitor);
    }

    fn post_order(&self, id: NodeId, visitor: &mut dyn FnMut(NodeId)) {
        let children: Vec<NodeId> = self.children(id).collect();
        for c in children {
            self.post_order(c, visitor);
        }
        visitor(id);
    }

    /// Indented text dump, one token per line.
    pub fn dump(&self, name_of: &dyn Fn(GroundFactId) -> String) -> String {
        let mut out = String::new();
        self.dump_node(self.root(), 0, name_of, &mut out);
        out
    }

    fn dump_node(
        &self,
        id: NodeId,
        depth: usize,
        name_of: &dyn Fn(GroundFactId) -> String,
        out: &mut String,
    ) {
        for _ in 0..depth {
            out.push_str("  ");
        }
        match self.nodes[id as usize].token {
            Token::Root => out.push_str("root"),
            Token::Fact(f) => out.push_str(&name_of(f)),
            Token::End => out.push_str("<end>"),
        }
        out.push('\n');
        for c in self.children(id).collect::<Vec<_>>() {
            self.dump_node(c, depth + 1, name_of, out);
        }
    }
}

pub struct ChildIter<'t> {
    trie: &'t ProofTrie,
    next: Option<NodeId>,
}

impl Iterator for ChildIter<'_> {
    type Item = NodeId;

    fn next(&mut self) -> Option<NodeId> {
        let cur = self.next?;
        self.next = self.trie.nodes[cur as usize].next_sibling;
        Some(cur)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gid(fact: u32, grounding: u32) -> GroundFactId {
        GroundFactId { fact, grounding }
    }

    #[test]
    fn insert_shares_prefixes() {
        let mut t = ProofTrie::new();
        // [3, 5_1, 7, 5_2]: one token per element, plus the end marker
        let p1 = [gid(3, 0), gid(5, 1), gid(7, 0), gid(5, 2)];
        assert_eq!(t.insert(&p1), Insert::Inserted);
        assert_eq!(t.node_count(), 5); // 4 element nodes + end

        // shares the first two element nodes, adds 3 new + end
        let p2 = [gid(3, 0), gid(5, 1), gid(9, 0), gid(7, 0), gid(5, 2)];
        assert_eq!(t.insert(&p2), Insert::Inserted);
        assert_eq!(t.node_count(), 5 + 4);

        let before = t.node_count();
        assert_eq!(t.insert(&p1), Insert::Duplicate);
        assert_eq!(t.node_count(), before);
        assert_eq!(t.proof_count(), 2);
    }

    #[test]
    fn contains_after_insert() {
        let mut t = ProofTrie::new();
        let p1 = [gid(1, 0), gid(2, 0)];
        t.insert(&p1);
        assert!(t.contains(&p1));
        assert!(!t.contains(&[gid(1, 0)])); // prefix without end marker
        assert!(!t.contains(&[gid(2, 0)]));
        t.insert(&[gid(1, 0)]);
        assert!(t.contains(&[gid(1, 0)]));
    }

    #[test]
    fn hash_promotion_preserves_lookups() {
        let mut t = ProofTrie::new();
        for i in 0..9 {
            t.insert(&[gid(i, 0)]);
        }
        // 9th child triggered promotion; all 9 must still be found
        for i in 0..9 {
            assert!(t.contains(&[gid(i, 0)]));
        }
        assert!(!t.contains(&[gid(100, 0)]));
    }

    #[test]
    fn many_children_remain_correct() {
        let mut t = ProofTrie::new();
        for i in 0..1000 {
            t.insert(&[gid(i, 0), gid(i + 1000, 0)]);
        }
        for i in 0..1000 {
            assert!(t.contains(&[gid(i, 0), gid(i + 1000, 0)]));
            assert!(!t.contains(&[gid(i, 0), gid(i + 2000, 0)]));
        }
    }

    #[test]
    fn bottom_up_visits_children_first() {
        let mut t = ProofTrie::new();
        t.insert(&[gid(1, 0), gid(2, 0)]);
        let mut order = Vec::new();
        t.iterate_bottom_up(&mut |id| order.push(t.token(id)));
        assert_eq!(
            order,
            vec![
                Token::End,
                Token::Fact(gid(2, 0)),
                Token::Fact(gid(1, 0)),
                Token::Root,
            ]
        );
    }

    #[test]
    fn empty_trie_visits_only_root() {
        let t = ProofTrie::new();
        let mut order = Vec::new();
        t.iterate_bottom_up(&mut |id| order.push(t.token(id)));
        assert_eq!(order, vec![Token::Root]);
    }

    #[test]
    fn var_order_is_first_appearance() {
        let mut t = ProofTrie::new();
        t.insert(&[gid(2, 0), gid(5, 0)]);
        t.insert(&[gid(4, 0), gid(2, 0)]);
        assert_eq!(t.var_order(), &[gid(2, 0), gid(5, 0), gid(4, 0)]);
    }

    #[test]
    fn dump_mirrors_structure() {
        let mut t = ProofTrie::new();
        t.insert(&[gid(3, 0), gid(5, 1)]);
        t.insert(&[gid(3, 0), gid(4, 0)]);
        let text = t.dump(&|f| {
            if f.grounding == 0 {
                format!("{}", f.fact)
            } else {
                format!("{}_{}", f.fact, f.grounding)
            }
        });
        let expected = "root\n  3\n    5_1\n      <end>\n    4\n      <end>\n";
        assert_eq!(text, expected);
    }
}
