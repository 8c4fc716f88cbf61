//! Property tests for the structural invariants of the trie and the BDD
//! compiler, driven by generated inputs.

use std::collections::HashSet;

use proptest::prelude::*;

use problog::bdd::{export_script, BddManager};
use problog::program::GroundFactId;
use problog::trie::ProofTrie;

fn gid(i: u32) -> GroundFactId {
    GroundFactId::ground(i as usize)
}

/// Duplicate-free fact sequences, the shape of real proofs.
fn proof_sets() -> impl Strategy<Value = Vec<Vec<GroundFactId>>> {
    prop::collection::vec(prop::collection::vec(0u32..10, 1..6), 1..20).prop_map(|seqs| {
        seqs.into_iter()
            .map(|seq| {
                let mut used = HashSet::new();
                seq.into_iter()
                    .filter(|f| used.insert(*f))
                    .map(gid)
                    .collect()
            })
            .collect()
    })
}

fn probabilities() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.0f64..=1.0, 10)
}

proptest! {
    #[test]
    fn trie_membership_matches_a_set_oracle(seqs in proof_sets()) {
        let mut trie = ProofTrie::new();
        let mut oracle: HashSet<Vec<GroundFactId>> = HashSet::new();
        for seq in &seqs {
            trie.insert(seq);
            oracle.insert(seq.clone());
        }
        for seq in &seqs {
            prop_assert!(trie.contains(seq));
        }
        prop_assert_eq!(trie.proof_count(), oracle.len());
        // no strict prefix of a longer proof is reported as stored unless
        // it was inserted itself
        for seq in &oracle {
            for end in 1..seq.len() {
                let prefix = &seq[..end];
                prop_assert_eq!(trie.contains(prefix), oracle.contains(prefix));
            }
        }
    }

    #[test]
    fn trie_node_count_equals_distinct_prefixes(seqs in proof_sets()) {
        let mut trie = ProofTrie::new();
        let mut prefixes: HashSet<Vec<GroundFactId>> = HashSet::new();
        let mut distinct: HashSet<Vec<GroundFactId>> = HashSet::new();
        for seq in &seqs {
            trie.insert(seq);
            for end in 1..=seq.len() {
                prefixes.insert(seq[..end].to_vec());
            }
            distinct.insert(seq.clone());
        }
        prop_assert_eq!(trie.node_count(), prefixes.len() + distinct.len());
    }

    #[test]
    fn bdd_probability_stays_in_the_unit_interval(
        seqs in proof_sets(),
        probs in probabilities(),
    ) {
        let mut trie = ProofTrie::new();
        for seq in &seqs {
            trie.insert(seq);
        }
        let mut mgr = BddManager::for_trie(&trie);
        let root = mgr.translate_trie(&trie).unwrap();
        mgr.assert_invariants();
        let p = mgr.probability(root, &|v| Some(probs[v.fact as usize])).unwrap();
        prop_assert!((0.0..=1.0 + 1e-12).contains(&p), "p = {}", p);
    }

    #[test]
    fn script_fold_equals_direct_translation(seqs in proof_sets()) {
        let mut trie = ProofTrie::new();
        for seq in &seqs {
            trie.insert(seq);
        }
        let mut mgr = BddManager::for_trie(&trie);
        let direct = mgr.translate_trie(&trie).unwrap();
        let folded = export_script(&trie).fold(&mut mgr).unwrap();
        prop_assert_eq!(direct, folded);
    }

    #[test]
    fn adding_a_proof_never_lowers_the_probability(
        seqs in proof_sets(),
        extra in prop::collection::vec(0u32..10, 1..6),
        probs in probabilities(),
    ) {
        let mut used = HashSet::new();
        let extra: Vec<GroundFactId> = extra
            .into_iter()
            .filter(|f| used.insert(*f))
            .map(gid)
            .collect();

        let evaluate = |with_extra: bool| {
            let mut trie = ProofTrie::new();
            for seq in &seqs {
                trie.insert(seq);
            }
            if with_extra {
                trie.insert(&extra);
            }
            let mut mgr = BddManager::for_trie(&trie);
            let root = mgr.translate_trie(&trie).unwrap();
            mgr.probability(root, &|v| Some(probs[v.fact as usize])).unwrap()
        };
        prop_assert!(evaluate(true) >= evaluate(false) - 1e-12);
    }
}
