use std::collections::BTreeSet;

use proptest::prelude::*;

use blockseq::dataset::{format_record, parse_record, PairRecord};
use blockseq::logic::{apply, legal_moves, run};
use blockseq::model::{
    canonical, decode_sequence, encode_sequence, Action, CanonicalMode, Color, Configuration, Destination, MoveSequence,
};
use blockseq::planner::{plan, Horizon};

fn color() -> impl Strategy<Value = Color> {
    (0usize..6).prop_map(|i| Color::ALL[i])
}

/// A random scene: shuffled colors, the first few standing and cut into
/// stacks, some of the rest out.
fn config() -> impl Strategy<Value = Configuration> {
    (Just(Color::ALL.to_vec()).prop_shuffle(), 0usize..=5, any::<u8>(), any::<u8>()).prop_map(
        |(colors, standing, cuts, out_bits)| {
            let mut stacks: Vec<Vec<Color>> = Vec::new();
            for (i, &c) in colors[..standing].iter().enumerate() {
                if i == 0 || cuts >> i & 1 == 1 {
                    stacks.push(Vec::new());
                }
                stacks.last_mut().unwrap().push(c);
            }
            let out: BTreeSet<Color> = colors[standing..]
                .iter()
                .enumerate()
                .filter(|(i, _)| out_bits >> i & 1 == 1)
                .map(|(_, &c)| c)
                .collect();
            Configuration::new(stacks, out).unwrap()
        },
    )
}

fn action() -> impl Strategy<Value = Action> {
    (color(), 0usize..8)
        .prop_map(|(s, d)| Action::new(s, Destination::from_slot(d).unwrap()))
        .prop_filter("self move", |a| a.dest != Destination::Block(a.subject))
}

proptest! {
    #[test]
    fn config_text_round_trip(c in config()) {
        prop_assert_eq!(c.to_string().parse::<Configuration>().unwrap(), c);
    }

    #[test]
    fn sequence_bits_round_trip(actions in prop::collection::vec(action(), 0..=8)) {
        let seq = MoveSequence::from_actions(actions);
        prop_assert_eq!(decode_sequence(&encode_sequence(&seq).to_reals()), seq.clone());
        prop_assert_eq!(seq.to_string().parse::<MoveSequence>().unwrap(), seq);
    }

    #[test]
    fn relational_key_ignores_stack_order(c in config(), seed in any::<u64>()) {
        let mut stacks = c.stacks().to_vec();
        let n = stacks.len();
        if n > 1 {
            stacks.rotate_left(seed as usize % n);
        }
        let shuffled = Configuration::new(stacks, c.out().clone()).unwrap();
        prop_assert_eq!(canonical(&shuffled, CanonicalMode::Relational), canonical(&c, CanonicalMode::Relational));
        prop_assert!(shuffled.same_stacks(&c));
    }

    #[test]
    fn moves_keep_every_block(c in config()) {
        let before: BTreeSet<Color> = c.stack_colors().union(c.out()).copied().collect();
        for a in legal_moves(&c) {
            let n = apply(&c, a).unwrap();
            let after: BTreeSet<Color> = n.stack_colors().union(n.out()).copied().collect();
            prop_assert_eq!(&after, &before);
            prop_assert!(n.out().is_superset(c.out()));
        }
    }

    #[test]
    fn random_walks_are_planned_no_longer(c in config(), picks in prop::collection::vec(any::<prop::sample::Index>(), 0..4)) {
        let mut cur = c.clone();
        let mut walked = Vec::new();
        for p in picks {
            let moves = legal_moves(&cur);
            if moves.is_empty() {
                break;
            }
            let a = moves[p.index(moves.len())];
            cur = apply(&cur, a).unwrap();
            walked.push(a);
        }
        let result = plan(&c, &cur, Horizon::default());
        let len = result.min_length.expect("a walk reaches its end");
        prop_assert!(len <= walked.len());
        for p in &result.plans {
            prop_assert!(run(&c, p).unwrap().same_stacks(&cur));
        }
    }

    #[test]
    fn record_line_round_trip(a in config(), b in config()) {
        let rec = PairRecord::from_plan(a, b, Horizon::default(), Some(20));
        prop_assert_eq!(parse_record(&format_record(&rec)).unwrap(), rec);
    }
}
