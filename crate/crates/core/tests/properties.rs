mod common;

use std::collections::BTreeSet;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use stepwise::adaptation::{rerank_indices, PreferenceVector};
use stepwise::chain::{descendants, ReasoningChain, StepId};
use stepwise::command::{CommandKind, EditCommand, EditScope};
use stepwise::protocol::{parse_steps, render_chain};
use stepwise::store::SessionStore;
use stepwise::{Engine, SessionConfig};

use common::*;

fn dag() -> impl Strategy<Value = (usize, Vec<(usize, usize)>)> {
    (1usize..=12).prop_flat_map(|n| {
        let pairs: Vec<(usize, usize)> = (0..n).flat_map(|j| (0..j).map(move |i| (i, j))).collect();
        let len = pairs.len();
        (Just(n), proptest::collection::vec(any::<bool>(), len)).prop_map(move |(n, keep)| {
            let edges = pairs.iter().zip(keep).filter(|(_, k)| *k).map(|(p, _)| *p).collect();
            (n, edges)
        })
    })
}

fn build(n: usize, edges: &[(usize, usize)]) -> ReasoningChain {
    let steps: Vec<(u32, String)> = (1..=n as u32).map(|o| (o, format!("step {o}"))).collect();
    ReasoningChain::with_dependencies(&steps, edges).unwrap()
}

/// Forward reachability by dynamic programming over list positions.
fn reachable(n: usize, edges: &[(usize, usize)], sources: &[usize]) -> BTreeSet<usize> {
    let mut hit = vec![false; n];
    for j in 0..n {
        hit[j] = edges.iter().any(|&(i, t)| t == j && (sources.contains(&i) || hit[i]));
    }
    (0..n).filter(|j| hit[*j] && !sources.contains(j)).collect()
}

fn ids(chain: &ReasoningChain, positions: &BTreeSet<usize>) -> BTreeSet<StepId> {
    positions.iter().map(|p| chain.steps()[*p].id).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn replace_invalidates_exactly_the_reachable_steps((n, edges) in dag(), pick in any::<prop::sample::Index>()) {
        let chain = build(n, &edges);
        let k = pick.index(n);
        let target = chain.steps()[k].ordinal;
        let effect = chain.apply_edit(&EditCommand::new(CommandKind::Replace { target, text: "new".into() })).unwrap();
        prop_assert_eq!(&effect.invalidated, &ids(&chain, &reachable(n, &edges, &[k])));
        prop_assert_eq!(descendants(chain.graph(), chain.steps()[k].id).unwrap(), effect.invalidated.clone());
        let local = chain
            .apply_edit(&EditCommand::new(CommandKind::Replace { target, text: "new".into() }).with_scope(EditScope::Local))
            .unwrap();
        prop_assert!(local.invalidated.is_empty());
    }

    #[test]
    fn delete_and_merge_invalidate_reachable_steps((n, edges) in dag(), pick in any::<prop::sample::Index>()) {
        let chain = build(n, &edges);
        let k = pick.index(n);
        let deleted = chain.apply_edit(&EditCommand::new(CommandKind::Delete { target: chain.steps()[k].ordinal })).unwrap();
        prop_assert_eq!(&deleted.invalidated, &ids(&chain, &reachable(n, &edges, &[k])));
        prop_assert!(deleted.chain.graph().is_acyclic());
        if k + 1 < n {
            let merged = chain
                .apply_edit(&EditCommand::new(CommandKind::Merge {
                    first: chain.steps()[k].ordinal,
                    second: chain.steps()[k + 1].ordinal,
                }))
                .unwrap();
            prop_assert_eq!(&merged.invalidated, &ids(&chain, &reachable(n, &edges, &[k, k + 1])));
            prop_assert!(merged.chain.graph().is_acyclic());
        }
    }

    #[test]
    fn ids_are_stable_and_never_reused((n, edges) in dag(), picks in proptest::collection::vec(0usize..20, 1..8)) {
        let mut chain = build(n, &edges);
        let mut seen: BTreeSet<StepId> = chain.steps().iter().map(|s| s.id).collect();
        for (round, p) in picks.into_iter().enumerate() {
            let before = chain.clone();
            let command = if chain.is_empty() {
                EditCommand::new(CommandKind::Insert { after: None, text: format!("r{round}") })
            } else {
                let s = &chain.steps()[p % chain.len()];
                match p % 4 {
                    0 => EditCommand::new(CommandKind::Replace { target: s.ordinal, text: format!("r{round}") }),
                    1 => EditCommand::new(CommandKind::Delete { target: s.ordinal }),
                    2 => EditCommand::new(CommandKind::Insert { after: Some(s.ordinal), text: format!("r{round}") }),
                    _ => match chain.steps().get(p % chain.len() + 1) {
                        Some(next) => EditCommand::new(CommandKind::Merge { first: s.ordinal, second: next.ordinal }),
                        None => EditCommand::new(CommandKind::Delete { target: s.ordinal }),
                    },
                }
            };
            let effect = chain.apply_edit(&command).unwrap();
            prop_assert!(effect.chain.graph().is_acyclic());
            for step in effect.chain.steps() {
                match before.step(step.id) {
                    // surviving steps keep their id; text changes only if edited
                    Some(old) => prop_assert!(old.text == step.text || effect.edited.contains(&step.id)),
                    None => prop_assert!(seen.insert(step.id), "id {} reused", step.id),
                }
            }
            let ordinals: Vec<u32> = effect.chain.steps().iter().map(|s| s.ordinal).collect();
            prop_assert!(ordinals.windows(2).all(|w| w[0] < w[1]));
            chain = effect.chain;
        }
    }

    #[test]
    fn render_parse_round_trip(seed in any::<u64>(), len in 1usize..15, gaps in any::<bool>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let steps = random_steps(&mut rng, len, gaps);
        let chain = ReasoningChain::new(&steps).unwrap();
        let parsed = parse_steps(&render_chain(&chain)).unwrap();
        prop_assert_eq!(parsed.steps, steps);
        prop_assert_eq!(parsed.prose, "");
    }

    #[test]
    fn rerank_is_a_stable_permutation(texts in proptest::collection::vec("[a-z ,.()0-9%]{0,40}", 0..8), p in proptest::array::uniform6(-1.0f64..=1.0)) {
        let pref = PreferenceVector { p, ..PreferenceVector::default() };
        let order = rerank_indices(&texts, &pref);
        let mut sorted = order.clone();
        sorted.sort();
        prop_assert_eq!(sorted, (0..texts.len()).collect::<Vec<_>>());
        let zero = rerank_indices(&texts, &PreferenceVector::default());
        prop_assert_eq!(zero, (0..texts.len()).collect::<Vec<_>>());
        for w in order.windows(2) {
            let (a, b) = (pref.score(&stepwise::adaptation::extract_features(&texts[w[0]])), pref.score(&stepwise::adaptation::extract_features(&texts[w[1]])));
            prop_assert!(a > b || (a == b && w[0] < w[1]));
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn no_final_answer_without_confirmation(seed in any::<u64>(), len in 1usize..=20) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let backend = SyntheticBackend::new("[Step 1] a\n\n[Step 2] b\n\n[Step 3] c\n\n[Step 4] d");
        let utterances: Vec<String> = (0..len).map(|_| random_utterance(&mut rng, false)).collect();
        let (session, states) = play_sequence(&backend, "q", &utterances);
        prop_assert!(session.final_answer().is_none());
        prop_assert!(gate_holds(&session, &utterances, &states));
    }

    #[test]
    fn done_implies_confirmation_in_review(seed in any::<u64>(), len in 1usize..=20) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let backend = SyntheticBackend::new("[Step 1] a\n\n[Step 2] b\n\n[Step 3] c");
        let utterances: Vec<String> = (0..len).map(|_| random_utterance(&mut rng, true)).collect();
        let (session, states) = play_sequence(&backend, "q", &utterances);
        prop_assert!(gate_holds(&session, &utterances, &states));
        if let Some(answer) = session.final_answer() {
            prop_assert!(!answer.chain_snapshot.has_stale());
        }
    }

    #[test]
    fn sessions_survive_persistence(seed in any::<u64>(), len in 0usize..=10) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let backend = SyntheticBackend::new("[Step 1] a\n\n[Step 3] b\n\n[Step 4] c");
        let utterances: Vec<String> = (0..len).map(|_| random_utterance(&mut rng, true)).collect();
        let (session, _) = play_sequence(&backend, "q", &utterances);
        let dir = tempfile::tempdir().unwrap();
        let store = SessionStore::new(dir.path());
        store.save(&session).unwrap();
        prop_assert_eq!(store.load(session.id()).unwrap(), session);
    }

    #[test]
    fn single_edits_change_only_edited_or_invalidated_steps(seed in any::<u64>(), len in 1usize..=8) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let steps = random_steps(&mut rng, len, false);
        let backend = scripted_for(&steps);
        let engine = Engine::new(&backend);
        let start = engine.start_session_with_id("m", "q", SessionConfig::default()).unwrap().session;
        let utterance = random_utterance(&mut rng, false);
        let commands = stepwise::protocol::parse_command(&utterance);
        prop_assume!(commands.len() == 1 && commands[0].is_structural());
        let Ok(effect) = start.chain().apply_edit(&commands[0]) else { return Ok(()) };
        prop_assume!(!utterance.contains('@'));
        let after = engine.handle_utterance(&start, &utterance).unwrap().session;
        let changed = stepwise::engine::changed_steps(start.chain(), after.chain());
        let allowed: BTreeSet<StepId> = effect.edited.union(&effect.invalidated).copied().collect();
        prop_assert!(changed.is_subset(&allowed), "{:?} not within {:?}", changed, allowed);
    }
}
