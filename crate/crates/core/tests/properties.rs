use std::collections::BTreeSet;

use ehrner_core::corpus::{
    split_train_test, take_fraction, tokenize, Dataset, Document, EntitySpan, SplitSpec, Token,
};
use ehrner_core::eval::{f1_score, match_spans, Counts};
use ehrner_core::rng;
use ehrner_core::tagger::{
    gold_actions, greedy_decode, is_valid_sequence, spans_from_actions, Action, LabelScheme,
};
use proptest::prelude::*;
use rand::Rng as _;

fn scheme() -> LabelScheme {
    LabelScheme::new(&["CHEMICAL", "DISEASE", "SYMPTOM", "DOSAGE"]).unwrap()
}

fn word() -> impl Strategy<Value = String> {
    prop_oneof![
        "[a-z]{1,8}",
        "[A-Z][a-z]{1,6}",
        "[0-9]{1,3}(\\.[0-9])?",
        "[a-z]{1,4}[,.;:)]",
        "\\(?[a-z]{1,5}",
        "[a-z]{1,3}/[a-z]{1,3}",
    ]
}

fn text() -> impl Strategy<Value = String> {
    prop::collection::vec((word(), prop_oneof![Just(" "), Just("  "), Just("\t"), Just("\n")]), 0..25)
        .prop_map(|parts| parts.into_iter().map(|(w, s)| w + s).collect())
}

/// Random token-aligned, non-overlapping spans over `n` tokens, as
/// (first token, last token, label index).
fn layout(n: usize, rng: &mut rng::Rng) -> Vec<(usize, usize, usize)> {
    let mut out = Vec::new();
    let mut i = 0;
    while i < n {
        if rng.random_bool(0.4) {
            let len = rng.random_range(1..=3usize).min(n - i);
            out.push((i, i + len - 1, rng.random_range(0..4usize)));
            i += len + rng.random_range(0..2usize);
        } else {
            i += 1;
        }
    }
    out
}

fn spans_for(tokens: &[Token], layout: &[(usize, usize, usize)], scheme: &LabelScheme) -> Vec<EntitySpan> {
    layout
        .iter()
        .map(|&(a, b, l)| EntitySpan::new(tokens[a].start, tokens[b].end, scheme.labels()[l].clone()))
        .collect()
}

#[test]
fn gold_action_round_trip_over_1000_layouts() {
    let scheme = scheme();
    let mut rng = rng::seeded(99);
    for case in 0..1000 {
        let n = rng.random_range(1..30usize);
        let text: Vec<String> = (0..n).map(|i| format!("w{i}")).collect();
        let tokens = tokenize(&text.join(" "));
        let spans = spans_for(&tokens, &layout(n, &mut rng), &scheme);
        let actions = gold_actions(&tokens, &spans, &scheme).unwrap();
        assert!(is_valid_sequence(&actions, &scheme), "case {case}");
        assert_eq!(spans_from_actions(&tokens, &actions, &scheme), spans, "case {case}");
    }
}

#[test]
fn ten_thousand_fuzzed_decodes_are_valid() {
    let scheme = scheme();
    let mut rng = rng::seeded(5);
    let count = scheme.action_count();
    for case in 0..10_000 {
        let n = rng.random_range(0..20usize);
        // Mix in extreme, tied and NaN scores.
        let scores: Vec<f32> = (0..n * count)
            .map(|_| match rng.random_range(0..10) {
                0 => f32::NAN,
                1 => f32::INFINITY,
                2 => f32::NEG_INFINITY,
                3 => 0.0,
                _ => rng.random_range(-5.0..5.0),
            })
            .collect();
        let actions = greedy_decode(n, &scheme, |i, _, out| out.copy_from_slice(&scores[i * count..(i + 1) * count]));
        assert_eq!(actions.len(), n);
        assert!(is_valid_sequence(&actions, &scheme), "case {case}: {actions:?}");
    }
}

#[test]
fn decoder_prefers_the_best_legal_action() {
    let scheme = scheme();
    let count = scheme.action_count();
    // B-CHEMICAL scores highest on a one-token input, but is illegal there.
    let actions = greedy_decode(1, &scheme, |_, _, out| {
        out.fill(0.0);
        out[Action::Begin(0).index()] = 9.0;
        out[Action::Unit(2).index()] = 1.0;
    });
    assert_eq!(actions, vec![Action::Unit(2)]);
    assert_eq!(count, 17);
}

proptest! {
    #[test]
    fn tokens_are_slices_of_the_text(t in text()) {
        let chars: Vec<char> = t.chars().collect();
        let tokens = tokenize(&t);
        let mut last_end = 0;
        for tok in &tokens {
            prop_assert!(tok.start < tok.end);
            prop_assert!(tok.start >= last_end);
            prop_assert_eq!(chars[tok.start..tok.end].iter().collect::<String>(), tok.text.clone());
            prop_assert!(!tok.text.chars().any(char::is_whitespace));
            last_end = tok.end;
        }
    }

    #[test]
    fn tokenizing_is_idempotent(t in text()) {
        let first: Vec<String> = tokenize(&t).into_iter().map(|t| t.text).collect();
        let again: Vec<String> = tokenize(&first.join(" ")).into_iter().map(|t| t.text).collect();
        prop_assert_eq!(first, again);
    }

    #[test]
    fn split_partitions_the_dataset(n in 2usize..80, ratio in 0.05f64..0.95, seed in 0u64..1000) {
        let docs = (0..n).map(|i| Document::new(format!("d{i}"), format!("word {i}"), vec![]).unwrap()).collect();
        let ds = Dataset::from_documents(docs).unwrap();
        let spec = SplitSpec { test_ratio: ratio, fraction: 1.0, seed };
        let (train, test) = split_train_test(&ds, &spec).unwrap();
        let train_ids: BTreeSet<_> = train.documents.iter().map(|d| d.id.clone()).collect();
        let test_ids: BTreeSet<_> = test.documents.iter().map(|d| d.id.clone()).collect();
        prop_assert!(train_ids.is_disjoint(&test_ids));
        prop_assert_eq!(train_ids.len() + test_ids.len(), n);
        prop_assert_eq!(test.len(), (n as f64 * ratio).round() as usize);
        // Same seed, same split.
        prop_assert_eq!(split_train_test(&ds, &spec).unwrap(), (train, test));
    }

    #[test]
    fn fractions_are_nested_prefixes(n in 1usize..60, a in 0.05f64..1.0, b in 0.05f64..1.0, seed in 0u64..100) {
        let docs = (0..n).map(|i| Document::new(format!("d{i}"), "x", vec![]).unwrap()).collect();
        let ds = Dataset::from_documents(docs).unwrap();
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        let small = take_fraction(&ds, lo, seed).unwrap();
        let large = take_fraction(&ds, hi, seed).unwrap();
        prop_assert_eq!(small.len(), (lo * n as f64 + 1e-9).floor() as usize);
        prop_assert_eq!(&large.documents[..small.len()], &small.documents[..]);
        prop_assert_eq!(take_fraction(&ds, 1.0, seed).unwrap().len(), n);
    }

    #[test]
    fn f1_is_symmetric_under_swapping(seed in 0u64..500) {
        let mut rng = rng::seeded(seed);
        let scheme = scheme();
        let tokens = tokenize(&(0..15).map(|i| format!("t{i}")).collect::<Vec<_>>().join(" "));
        let gold = spans_for(&tokens, &layout(15, &mut rng), &scheme);
        let pred = spans_for(&tokens, &layout(15, &mut rng), &scheme);
        let total = |m: std::collections::BTreeMap<String, Counts>| {
            m.values().fold(Counts::default(), |a, c| Counts { tp: a.tp + c.tp, fp: a.fp + c.fp, fn_: a.fn_ + c.fn_ })
        };
        let ab = total(match_spans(&gold, &pred));
        let ba = total(match_spans(&pred, &gold));
        prop_assert_eq!(ab.precision(), ba.recall());
        prop_assert_eq!(ab.recall(), ba.precision());
        prop_assert!((ab.f1() - ba.f1()).abs() < 1e-12);
    }

    #[test]
    fn adding_a_true_positive_never_hurts(tp in 0usize..50, fp in 0usize..50, fn_ in 0usize..50) {
        let before = Counts { tp, fp, fn_ };
        let after = Counts { tp: tp + 1, fp, fn_ };
        prop_assert!(after.precision() >= before.precision());
        prop_assert!(after.recall() >= before.recall());
        prop_assert!(after.f1() >= before.f1());
        for v in [before.precision(), before.recall(), before.f1()] {
            prop_assert!((0.0..=1.0).contains(&v));
        }
        prop_assert_eq!(before.f1() == 0.0, before.precision() == 0.0 || before.recall() == 0.0);
        prop_assert!((f1_score(before.precision(), before.recall()) - before.f1()).abs() < 1e-12);
    }
}
