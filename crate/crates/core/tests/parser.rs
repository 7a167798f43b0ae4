mod common;

use common::{toy, toy_hyperparams};
use sentigraph::codec::{encode, EncodeMode};
use sentigraph::metrics::{edge_micro_f1, sentiment_graph_f1};
use sentigraph::parser::{
    load_checkpoint, predict, predict_treebank, save_checkpoint, train, train_with_grid, EmbeddingFile,
    EmbeddingProvider, Hyperparams, ParserError, TrainOptions,
};
use sentigraph::{Sentence, Treebank};

fn deterministic() -> TrainOptions {
    TrainOptions {
        deterministic: true,
        ..TrainOptions::default()
    }
}

#[test]
fn overfit_reproduces_gold_graphs() {
    let tb = toy();
    let provider = EmbeddingProvider::Trainable;
    let out = train(&tb, &tb, &toy_hyperparams(), &provider, deterministic()).unwrap();
    assert!(out.log.len() <= 500);

    let gold: Vec<_> = tb
        .sentences
        .iter()
        .map(|s| encode(s, EncodeMode::HeadFinal, false).unwrap())
        .collect();
    let pred = predict(&out.model, &tb.sentences, &provider).unwrap();
    assert_eq!(pred, gold);
    assert!(edge_micro_f1(&pred, &gold, true).unwrap().f1 >= 0.99);
    assert!(pred
        .iter()
        .flat_map(|g| g.edges())
        .all(|e| e.dep != 0 && e.head != e.dep));

    let (decoded, dangling) = predict_treebank(&out.model, &tb, &provider).unwrap();
    assert_eq!(dangling, 0);
    assert!(sentiment_graph_f1(&decoded, &tb, true).unwrap().f1 >= 0.99);

    let losses: Vec<f64> = out.log.iter().take(10).map(|l| l.loss).collect();
    let rises = losses.windows(2).filter(|w| w[1] > w[0]).count();
    assert!(rises <= 2, "{:?}", losses);
    assert!(losses.windows(2).all(|w| w[1] <= w[0] + 1e-3), "{:?}", losses);

    let reloaded = load_checkpoint(&save_checkpoint(&out.model)).unwrap();
    for s in &tb.sentences {
        let a = out.model.logits(s, &provider).unwrap().unwrap();
        let b = reloaded.logits(s, &provider).unwrap().unwrap();
        assert_eq!(a.edge.as_slice().unwrap(), b.edge.as_slice().unwrap());
        assert_eq!(a.label.as_slice().unwrap(), b.label.as_slice().unwrap());
    }
}

#[test]
fn seeded_runs_are_identical() {
    let tb = toy();
    let hp = Hyperparams {
        max_epochs: 25,
        dropout_rate: 0.1,
        ..toy_hyperparams()
    };
    let run = || {
        let out = train(&tb, &tb, &hp, &EmbeddingProvider::Trainable, deterministic()).unwrap();
        (save_checkpoint(&out.model), out.log)
    };
    let (a, log_a) = run();
    let (b, log_b) = run();
    assert_eq!(a, b);
    assert_eq!(log_a, log_b);
    assert!(log_a.iter().all(|l| l.elapsed_seconds == 0.0));

    let other = Hyperparams { seed: 2, ..hp };
    let c = train(&tb, &tb, &other, &EmbeddingProvider::Trainable, deterministic()).unwrap();
    assert_ne!(save_checkpoint(&c.model), a);
}

#[test]
fn zero_learning_rate_never_converges() {
    let tb = toy();
    let hp = Hyperparams {
        learning_rate: 0.0,
        max_epochs: 3,
        ..toy_hyperparams()
    };
    match train(&tb, &tb, &hp, &EmbeddingProvider::Trainable, deterministic()) {
        Err(e @ ParserError::NonConverged { .. }) => {
            assert_eq!(e.code(), "NON_CONVERGED");
            let ParserError::NonConverged { best_f1, log } = e else {
                unreachable!()
            };
            assert_eq!(best_f1, 0.0);
            assert_eq!(log.len(), 3);
        }
        other => panic!("{:?}", other.map(|o| o.best_f1)),
    }
}

#[test]
fn grid_moves_past_failing_rates() {
    let tb = toy();
    let hp = Hyperparams {
        max_epochs: 60,
        ..toy_hyperparams()
    };
    let (out, lr) = train_with_grid(
        &tb,
        &tb,
        &hp,
        &EmbeddingProvider::Trainable,
        deterministic(),
        &[0.0, 3e-3],
    )
    .unwrap();
    assert_eq!(lr, 3e-3);
    assert!(out.best_f1 > 0.5);
    let err = train_with_grid(&tb, &tb, &hp, &EmbeddingProvider::Trainable, deterministic(), &[0.0]).unwrap_err();
    assert_eq!(err.code(), "NON_CONVERGED");
}

#[test]
fn empty_treebank_rejected() {
    let empty = Treebank::new("empty", vec![]);
    let err = train(
        &empty,
        &toy(),
        &toy_hyperparams(),
        &EmbeddingProvider::Trainable,
        deterministic(),
    )
    .unwrap_err();
    assert_eq!(err.code(), "EMPTY_TREEBANK");
}

#[test]
fn prediction_is_independent_of_batch_order() {
    let tb = toy();
    let hp = Hyperparams {
        max_epochs: 25,
        ..toy_hyperparams()
    };
    let model = match train(&tb, &tb, &hp, &EmbeddingProvider::Trainable, deterministic()) {
        Ok(out) => out.model,
        Err(ParserError::NonConverged { .. }) => panic!("25 epochs should already find some edges"),
        Err(e) => panic!("{}", e),
    };
    let mut reversed: Vec<Sentence> = tb.sentences.clone();
    reversed.reverse();
    let a = predict(&model, &tb.sentences, &EmbeddingProvider::Trainable).unwrap();
    let mut b = predict(&model, &reversed, &EmbeddingProvider::Trainable).unwrap();
    b.reverse();
    assert_eq!(a, b);
}

#[test]
fn trains_from_precomputed_vectors() {
    let tb = toy();
    let hp = Hyperparams {
        embedding_dim: 8,
        max_epochs: 40,
        patience: 40,
        ..toy_hyperparams()
    };
    let mut file = EmbeddingFile::new(8);
    for s in &tb.sentences {
        for t in &s.tokens {
            let h = t
                .form
                .bytes()
                .fold(7u32, |a, b| a.wrapping_mul(31).wrapping_add(b as u32));
            let v = (0..8).map(|k| (((h >> k) & 1) as f32) * 2.0 - 1.0).collect();
            file.insert(&s.sent_id, t.index, v).unwrap();
        }
    }
    let provider = EmbeddingProvider::Precomputed(file);
    let out = train(&tb, &tb, &hp, &provider, deterministic()).unwrap();
    assert!(out.model.external_embeddings);
    assert_eq!(out.model.vocab.num_words(), 3);
    assert!(out.best_f1 > 0.3, "{}", out.best_f1);

    let err = predict(&out.model, &tb.sentences, &EmbeddingProvider::Trainable).unwrap_err();
    assert_eq!(err.code(), "EMBEDDING_MISSING");
    let reloaded = load_checkpoint(&save_checkpoint(&out.model)).unwrap();
    assert_eq!(
        predict(&reloaded, &tb.sentences, &provider).unwrap(),
        predict(&out.model, &tb.sentences, &provider).unwrap()
    );
}
