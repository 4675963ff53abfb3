//! Randomised invariants.

use std::collections::BTreeSet;

use crosswise::autodiff::{Graph, Matrix};
use crosswise::config::SwitchMode;
use crosswise::corpus::{bmes_to_words, is_valid_bmes, preprocess, words_to_bmes, Tag};
use crosswise::lexicon::{extract_candidates, Candidate, EraLexicon, ValueClass};
use crosswise::metrics::{oov_recall, score_segmentation, SegScore};
use crosswise::switcher::{switch, Phase};
use proptest::prelude::*;

fn word() -> impl Strategy<Value = String> {
    proptest::collection::vec(
        proptest::sample::select(vec!['天', '地', '人', '山', '水']),
        1..4,
    )
    .prop_map(|c| c.into_iter().collect())
}

fn sentence() -> impl Strategy<Value = Vec<String>> {
    proptest::collection::vec(word(), 1..8)
}

fn tag() -> impl Strategy<Value = Tag> {
    proptest::sample::select(Tag::ALL.to_vec())
}

/// Candidates of position `i` by scanning every substring.
fn brute_candidates(
    chars: &[char],
    lex: &EraLexicon,
    max_ngram: usize,
    i: usize,
) -> Vec<Candidate> {
    let mut out = Vec::new();
    for start in 0..chars.len() {
        for end in start + 1..=chars.len().min(start + max_ngram) {
            if start <= i && i < end {
                let w: String = chars[start..end].iter().collect();
                if let Some(id) = lex.id(&w) {
                    let c = Candidate {
                        word_id: id,
                        value: ValueClass::of(i, start, end),
                    };
                    if !out.contains(&c) {
                        out.push(c);
                    }
                }
            }
        }
    }
    out
}

proptest! {
    #[test]
    fn bmes_round_trip(words in sentence()) {
        let tags = words_to_bmes(&words).unwrap();
        let chars: Vec<char> = words.iter().flat_map(|w| w.chars()).collect();
        prop_assert_eq!(tags.len(), chars.len());
        prop_assert!(is_valid_bmes(&tags));
        prop_assert_eq!(bmes_to_words(&chars, &tags).unwrap(), words);
    }

    #[test]
    fn repair_always_covers_input(tags in proptest::collection::vec(tag(), 1..12)) {
        let chars: Vec<char> = (0..tags.len()).map(|i| char::from(b'a' + i as u8)).collect();
        let words = bmes_to_words(&chars, &tags).unwrap();
        prop_assert!(words.iter().all(|w| !w.is_empty()));
        prop_assert_eq!(words.concat(), chars.iter().collect::<String>());
        // repaired output re-encodes to a valid sequence
        prop_assert!(is_valid_bmes(&words_to_bmes(&words).unwrap()));
    }

    #[test]
    fn preprocess_is_idempotent_and_shrinks(s in "[a-z0-9 ，。天地人!?\\x{E000}\\x{E001}\\x{E002}]{0,24}") {
        let once = preprocess(&s);
        prop_assert_eq!(preprocess(&once), once.clone());
        prop_assert!(once.chars().count() <= s.chars().count());
    }

    #[test]
    fn candidates_match_substring_scan(
        words in sentence(),
        dict in proptest::collection::btree_set(word(), 0..10),
        max_ngram in 1usize..5,
    ) {
        let lex = EraLexicon::from_words(0, dict.iter().filter(|w| w.chars().count() <= max_ngram).cloned());
        let chars: Vec<char> = words.iter().flat_map(|w| w.chars()).collect();
        let set = extract_candidates(&chars, &lex, max_ngram);
        for i in 0..chars.len() {
            let mut got = set.at(i).to_vec();
            let mut want = brute_candidates(&chars, &lex, max_ngram, i);
            got.sort_by_key(|c| (c.word_id, c.value.index()));
            want.sort_by_key(|c| (c.word_id, c.value.index()));
            prop_assert_eq!(got, want);
        }
    }

    #[test]
    fn softmax_sums_to_one_and_ignores_shift(
        xs in proptest::collection::vec(-20.0f64..20.0, 1..8),
        shift in -50.0f64..50.0,
    ) {
        let a = Matrix::row(&xs);
        let b = Matrix::row(&xs.iter().map(|x| x + shift).collect::<Vec<_>>());
        let mut g = Graph::new();
        let (av, bv) = (g.leaf(&a), g.leaf(&b));
        let pa = g.softmax_row(av).unwrap();
        let pb = g.softmax_row(bv).unwrap();
        prop_assert!((g.value(pa).sum() - 1.0).abs() < 1e-12);
        for (x, y) in g.value(pa).data().iter().zip(g.value(pb).data()) {
            prop_assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn soft_switch_stays_in_convex_hull(
        cells in proptest::collection::vec(proptest::collection::vec(-3.0f64..3.0, 6), 2..5),
        logits in proptest::collection::vec(-4.0f64..4.0, 5),
    ) {
        let e = cells.len();
        let mut g = Graph::new();
        let vars: Vec<_> = cells.iter().map(|c| g.constant(Matrix::from_vec(2, 3, c.clone()))).collect();
        let l = g.constant(Matrix::row(&logits[..e]));
        let p = g.softmax_row(l).unwrap();
        let o = switch(&mut g, &vars, p, SwitchMode::Soft, Phase::Infer, None).unwrap();
        for k in 0..6 {
            let lo = cells.iter().map(|c| c[k]).fold(f64::INFINITY, f64::min);
            let hi = cells.iter().map(|c| c[k]).fold(f64::NEG_INFINITY, f64::max);
            let v = g.value(o).data()[k];
            prop_assert!(v >= lo - 1e-12 && v <= hi + 1e-12);
        }
    }

    #[test]
    fn scoring_is_micro_averaged_and_order_free(
        pairs in proptest::collection::vec((sentence(), proptest::collection::vec(any::<bool>(), 0..30)), 1..6),
        split in 0usize..6,
    ) {
        // predictions: the gold characters re-cut at random boundaries
        let gold: Vec<Vec<String>> = pairs.iter().map(|p| p.0.clone()).collect();
        let pred: Vec<Vec<String>> = pairs
            .iter()
            .map(|(words, cuts)| {
                let chars: Vec<char> = words.iter().flat_map(|w| w.chars()).collect();
                let mut out = vec![String::new()];
                for (i, c) in chars.iter().enumerate() {
                    if i > 0 && cuts.get(i).copied().unwrap_or(false) {
                        out.push(String::new());
                    }
                    out.last_mut().unwrap().push(*c);
                }
                out
            })
            .collect();
        let whole = score_segmentation(&gold, &pred).unwrap();
        prop_assert!(whole.correct <= whole.gold.min(whole.predicted));
        let k = split.min(gold.len());
        let a = score_segmentation(&gold[..k], &pred[..k]).unwrap();
        let b = score_segmentation(&gold[k..], &pred[k..]).unwrap();
        let merged: SegScore = a.merge(&b);
        prop_assert_eq!(merged, whole);
        prop_assert_eq!(merged.f1(), whole.f1());

        let mut rg = gold.clone();
        let mut rp = pred.clone();
        rg.reverse();
        rp.reverse();
        prop_assert_eq!(score_segmentation(&rg, &rp).unwrap(), whole);

        let train: BTreeSet<String> = gold.iter().flatten().step_by(2).cloned().collect();
        if let Some(r) = oov_recall(&gold, &pred, &train).unwrap() {
            prop_assert!((0.0..=1.0).contains(&r));
        }
    }
}
