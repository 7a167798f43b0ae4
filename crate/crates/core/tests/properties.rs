mod common;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_xoshiro::Xoshiro256PlusPlus;

use sentigraph::codec::{
    decode, encode, encode_treebank, read_graph_file, read_json, write_graph_file, write_json, GraphSentence,
};
use sentigraph::metrics::{edge_micro_f1, sentiment_graph_f1};
use sentigraph::model::canonicalize_opinions;
use sentigraph::treebank_ops::{load_lexicon, merge_treebanks, stats, translate_word_level};
use sentigraph::EncodeMode;

fn rng(seed: u64) -> Xoshiro256PlusPlus {
    Xoshiro256PlusPlus::seed_from_u64(seed)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn canonicalize_is_idempotent(seed in any::<u64>()) {
        let (tb, _) = common::metric_instance(&mut rng(seed));
        for s in &tb.sentences {
            let once = canonicalize_opinions(&s.opinions);
            prop_assert_eq!(canonicalize_opinions(&once), once);
        }
    }

    #[test]
    fn json_round_trip(seed in any::<u64>()) {
        let tb = common::encodable_treebank(&mut rng(seed), "tb", 5);
        let bytes = write_json(&tb);
        let back = read_json(&bytes, "tb").unwrap();
        prop_assert_eq!(write_json(&back), bytes);
        prop_assert_eq!(back.sentences.len(), tb.sentences.len());
    }

    #[test]
    fn codec_round_trip_both_modes(seed in any::<u64>()) {
        let s = common::encodable_sentence(&mut rng(seed), "s");
        let expected = canonicalize_opinions(&s.opinions);
        let mut counts = Vec::new();
        for mode in [EncodeMode::HeadFinal, EncodeMode::HeadFirst] {
            let g = encode(&s, mode, false).unwrap();
            counts.push(g.len());
            let (ops, warnings) = decode(&g, &s).unwrap();
            prop_assert_eq!(warnings.dangling_count(), 0);
            prop_assert_eq!(canonicalize_opinions(&ops), expected.clone());
        }
        prop_assert_eq!(counts[0], counts[1]);
    }

    #[test]
    fn graph_file_round_trip(seed in any::<u64>()) {
        let tb = common::encodable_treebank(&mut rng(seed), "tb", 4);
        let graphs = encode_treebank(&tb, EncodeMode::HeadFinal, false).unwrap();
        let file: Vec<GraphSentence> = tb
            .sentences
            .iter()
            .zip(graphs)
            .map(|(s, g)| GraphSentence::from_sentence(s, g))
            .collect();
        let text = write_graph_file(&file);
        let back = read_graph_file(&text).unwrap();
        prop_assert_eq!(write_graph_file(&back), text);
        for (orig, b) in tb.sentences.iter().zip(&back) {
            let s = b.to_sentence();
            prop_assert_eq!(&s.text, &orig.text);
            let (ops, _) = decode(&b.graph, &s).unwrap();
            prop_assert_eq!(canonicalize_opinions(&ops), canonicalize_opinions(&orig.opinions));
        }
    }

    #[test]
    fn metric_scores_are_bounded_and_dual(seed in any::<u64>(), polarity in any::<bool>()) {
        let (pred, gold) = common::metric_instance(&mut rng(seed));
        let forward = sentiment_graph_f1(&pred, &gold, polarity).unwrap();
        let backward = sentiment_graph_f1(&gold, &pred, polarity).unwrap();
        for x in [forward.precision, forward.recall, forward.f1] {
            prop_assert!((0.0..=1.0).contains(&x));
        }
        prop_assert_eq!(&forward.tp_precision, &backward.tp_recall);
        prop_assert_eq!(forward.precision, backward.recall);
        prop_assert_eq!(forward.f1, backward.f1);
    }

    #[test]
    fn dropping_polarity_never_lowers_matched_weight(seed in any::<u64>()) {
        let (pred, gold) = common::metric_instance(&mut rng(seed));
        let strict = sentiment_graph_f1(&pred, &gold, true).unwrap();
        let loose = sentiment_graph_f1(&pred, &gold, false).unwrap();
        prop_assert!(&loose.tp_precision + &loose.tp_recall >= &strict.tp_precision + &strict.tp_recall);
    }

    #[test]
    fn self_evaluation_is_perfect(seed in any::<u64>()) {
        let (_, gold) = common::metric_instance(&mut rng(seed));
        let r = sentiment_graph_f1(&gold, &gold, true).unwrap();
        prop_assert_eq!(r.f1, 1.0);
    }

    #[test]
    fn unlabeled_edge_f1_dominates_labeled(seed in any::<u64>()) {
        let (pred, gold) = common::metric_instance(&mut rng(seed));
        let p = encode_treebank(&pred, EncodeMode::HeadFinal, true).unwrap();
        let g = encode_treebank(&gold, EncodeMode::HeadFinal, true).unwrap();
        let labeled = edge_micro_f1(&p, &g, true).unwrap();
        let unlabeled = edge_micro_f1(&p, &g, false).unwrap();
        prop_assert!(unlabeled.tp_precision >= labeled.tp_precision);
        prop_assert!((0.0..=1.0).contains(&labeled.f1));
    }

    #[test]
    fn translation_preserves_tokens_and_edges(seed in any::<u64>(), case_fold in any::<bool>()) {
        let mut r = rng(seed);
        let tb = common::encodable_treebank(&mut r, "tb", 4);
        let lex = load_lexicon(common::random_lexicon(&mut r).as_bytes(), case_fold).unwrap();
        let (out, cov) = translate_word_level(&tb, &lex).unwrap();
        prop_assert!(cov.translated <= cov.tokens);
        for mode in [EncodeMode::HeadFinal, EncodeMode::HeadFirst] {
            for (a, b) in tb.sentences.iter().zip(&out.sentences) {
                prop_assert_eq!(a.tokens.len(), b.tokens.len());
                prop_assert_eq!(encode(a, mode, false).unwrap().edge_set(), encode(b, mode, false).unwrap().edge_set());
            }
        }
    }

    #[test]
    fn merge_sizes_and_stats_are_additive(seed in any::<u64>()) {
        let mut r = rng(seed);
        let parts: Vec<_> = ["a", "b", "c"].iter().map(|n| common::encodable_treebank(&mut r, n, 4)).collect();
        let merged = merge_treebanks(&parts).unwrap();
        prop_assert_eq!(merged.len(), parts.iter().map(|p| p.len()).sum::<usize>());
        let total = parts.iter().map(stats).fold(Default::default(), |a, b| a + b);
        prop_assert_eq!(stats(&merged), total);
        let nested = merge_treebanks(&[merge_treebanks(&parts[..2]).unwrap(), parts[2].clone()]).unwrap();
        prop_assert_eq!(stats(&nested), total);
    }
}
