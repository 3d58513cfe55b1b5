mod common;

use std::collections::BTreeSet;

use birthmark_core::align::{global_align, semi_local_align, GapPenalty, SubstitutionMatrix};
use birthmark_core::msa::{merge_order, select_spanning_edges, Msa, PairScoreTable};
use birthmark_core::phmm::{build_phmm, classify_columns, phmm_bruteforce_score, phmm_forward_score, ColumnTag};
use common::*;

#[test]
fn profile_example_column_classes() {
    let (msa, _) = profile_msa();
    let classes = classify_columns(&msa);
    assert_eq!(classes.n_match, 3);
    assert_eq!(
        classes.tags,
        vec![
            ColumnTag::Match(1),
            ColumnTag::Match(2),
            ColumnTag::Insert(2),
            ColumnTag::Insert(2),
            ColumnTag::Insert(2),
            ColumnTag::Match(3),
        ]
    );
}

#[test]
fn profile_example_probabilities() {
    let (msa, alphabet) = profile_msa();
    let model = build_phmm(&msa, alphabet.len()).unwrap();
    let id = |c: char| alphabet.id_of(&c.to_string()).unwrap();
    for (k, c, num, den) in PROFILE_MATCH_EMISSIONS {
        assert_eq!(model.match_emission(k, id(c)), num as f64 / den as f64, "M{k} {c}");
    }
    for (k, c, num, den) in PROFILE_INSERT_EMISSIONS {
        assert_eq!(model.insert_emission(k, id(c)), num as f64 / den as f64, "I{k} {c}");
    }
    assert!(model.emissions().insert_rows[0].iter().all(|&p| p == 0.25));
    for (from, to, num, den) in PROFILE_TRANSITIONS {
        assert_eq!(transition(&model, from, to), num as f64 / den as f64, "{from}->{to}");
    }
}

#[test]
fn profile_example_scores_members() {
    let (msa, alphabet) = profile_msa();
    let model = build_phmm(&msa, alphabet.len()).unwrap();
    let member = encode(&alphabet, "ECEG");
    let stranger = encode(&alphabet, "JJJJ");
    let m = phmm_forward_score(&model, &member).unwrap();
    let s = phmm_forward_score(&model, &stranger).unwrap();
    assert!(m.log_probability > s.log_probability);
    let brute = phmm_bruteforce_score(&model, &member).unwrap();
    assert!((m.log_probability - brute).abs() < 1e-12);
    assert_eq!(m.per_symbol, m.log_probability / 4.0);
}

#[test]
fn profile_example_text_round_trip() {
    let (msa, alphabet) = profile_msa();
    let text = msa.to_text(&alphabet).unwrap();
    assert_eq!(text, format!("MSA v1\n5\n6\n{}\n", PROFILE_MSA_ROWS.join("\n")));
    let back = Msa::from_text(&text, &alphabet).unwrap();
    assert_eq!(back.rows(), msa.rows());

    let model = build_phmm(&msa, alphabet.len()).unwrap();
    let (parsed, parsed_alphabet) =
        birthmark_core::phmm::PhmmModel::from_text(&model.to_text(&alphabet).unwrap()).unwrap();
    assert_eq!(parsed, model);
    assert_eq!(parsed_alphabet, alphabet);
}

#[test]
fn ten_sequence_tree_and_merge_order() {
    let table = PairScoreTable::from_rows(ten_sequence_scores()).unwrap();
    let tree = select_spanning_edges(&table).unwrap();
    let got: BTreeSet<_> = tree.edges.iter().map(|e| e.key()).collect();
    let expected: BTreeSet<_> = TEN_SEQUENCE_TREE.iter().map(|&(u, v)| (u - 1, v - 1)).collect();
    assert_eq!(got, expected);
    assert_eq!(tree.total_score(), TEN_SEQUENCE_TREE_TOTAL);
    let order: Vec<_> = merge_order(&tree).unwrap().into_iter().map(|(u, v)| (u + 1, v + 1)).collect();
    assert_eq!(order, TEN_SEQUENCE_MERGE_ORDER);
}

#[test]
fn example_pair_global_and_semi_local() {
    let alphabet = letters_alphabet("BCEGIJL");
    let a = encode(&alphabet, PAIR_A);
    let b = encode(&alphabet, PAIR_B);
    let subst = SubstitutionMatrix::identity_default(alphabet.len(), None);
    let gap = GapPenalty::default();

    let global = global_align(&a, &b, &subst, gap).unwrap();
    assert_eq!(global.identical_columns(), 9);
    assert_eq!(global.width(), 14);
    assert_eq!(global.score, 5);

    let local = semi_local_align(&a, &b, &subst, gap).unwrap();
    assert_eq!(local.score, 12);
    assert_eq!(local.core_width(), 11);
    assert_eq!(local.identical_columns(), 9);
    assert!(local.identical_columns() as f64 / local.core_width() as f64 >= 0.8);
}
