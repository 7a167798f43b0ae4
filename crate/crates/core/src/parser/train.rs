//! Training loop, model selection and prediction.

use std::str::FromStr;
use std::time::Instant;

use ndarray::{Array1, Zip};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_xoshiro::Xoshiro256PlusPlus;
use serde::{Deserialize, Serialize};

use super::embeddings::EmbeddingProvider;
use super::hyper::Hyperparams;
use super::network::{self, Logits, SentenceInput};
use super::params::{Float, Params};
use super::vocab::{Vocabulary, ROOT};
use super::ParserError;
use crate::codec::{decode, encode, DepEdge, DepGraph, EncodeMode, Label};
use crate::metrics::{edge_micro_f1, sentiment_graph_f1, EvalReport};
use crate::model::{Sentence, Treebank};

const ADAM_BETA1: f64 = 0.9;
const ADAM_BETA2: f64 = 0.999;
const ADAM_EPSILON: f64 = 1e-8;
/// Runs whose best dev score stays below this are reported as not
/// converged.
const CONVERGENCE_FLOOR: f64 = 0.01;

/// A trained parser.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub hyperparams: Hyperparams,
    pub vocab: Vocabulary,
    /// Token vectors come from an embedding file rather than the table.
    pub external_embeddings: bool,
    pub params: Params<f32>,
}

impl Model {
    /// Network input for `s`.
    pub fn input<F: Float>(&self, s: &Sentence, provider: &EmbeddingProvider) -> Result<SentenceInput<F>, ParserError> {
        if self.external_embeddings && !provider.is_external() {
            return Err(ParserError::EmbeddingMissing {
                sent_id: s.sent_id.clone(),
                token: 1,
            });
        }
        let external = if self.external_embeddings {
            provider.vectors(s, self.hyperparams.embedding_dim)?
        } else {
            None
        };
        let ids = std::iter::once(ROOT)
            .chain(s.tokens.iter().map(|t| self.vocab.word_id(&t.form)))
            .collect();
        Ok(SentenceInput { ids, external })
    }

    /// Edge and label logits, or `None` for a sentence without tokens.
    pub fn logits(&self, s: &Sentence, provider: &EmbeddingProvider) -> Result<Option<Logits<f32>>, ParserError> {
        if s.tokens.is_empty() {
            return Ok(None);
        }
        let input = self.input(s, provider)?;
        let (logits, _) = network::forward::<f32, Xoshiro256PlusPlus>(&self.params, &input, None)?;
        Ok(Some(logits))
    }
}

/// Dev score used to pick the best epoch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SelectionMetric {
    #[default]
    LabeledEdgeF1,
    SentimentGraphF1,
}

impl FromStr for SelectionMetric {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "labeled_edge_f1" | "edge" => Ok(SelectionMetric::LabeledEdgeF1),
            "sentiment_graph_f1" | "sentiment_graph" => Ok(SelectionMetric::SentimentGraphF1),
            _ => Err(format!("unknown selection metric {:?}", s)),
        }
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct TrainOptions {
    pub selection: SelectionMetric,
    /// Report zero elapsed time so that logs are reproducible.
    pub deterministic: bool,
}

/// One line of the training log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub loss: f64,
    pub dev_precision: f64,
    pub dev_recall: f64,
    pub dev_f1: f64,
    pub elapsed_seconds: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Parameters of the best dev epoch.
    pub model: Model,
    pub log: Vec<EpochLog>,
    pub best_epoch: usize,
    pub best_f1: f64,
}

struct Example {
    input: SentenceInput<f32>,
    gold: DepGraph,
}

struct Adam {
    m: Params<f32>,
    v: Params<f32>,
    step: i32,
}

impl Adam {
    fn new(p: &Params<f32>) -> Self {
        Adam {
            m: p.zeros_like(),
            v: p.zeros_like(),
            step: 0,
        }
    }

    fn update(&mut self, p: &mut Params<f32>, g: &Params<f32>, lr: f64) {
        self.step += 1;
        let (b1, b2) = (ADAM_BETA1 as f32, ADAM_BETA2 as f32);
        let c1 = 1.0 - b1.powi(self.step);
        let c2 = 1.0 - b2.powi(self.step);
        let (lr, eps) = (lr as f32, ADAM_EPSILON as f32);
        let tensors = p
            .named_mut()
            .into_iter()
            .zip(self.m.named_mut())
            .zip(self.v.named_mut())
            .zip(g.named());
        for ((((_, mut w), (_, mut m)), (_, mut v)), (_, g)) in tensors {
            Zip::from(&mut w)
                .and(&mut m)
                .and(&mut v)
                .and(&g)
                .for_each(|w, m, v, &g| {
                    *m = b1 * *m + (1.0 - b1) * g;
                    *v = b2 * *v + (1.0 - b2) * g * g;
                    *w -= lr * (*m / c1) / ((*v / c2).sqrt() + eps);
                });
        }
    }
}

fn encode_all(tb: &Treebank) -> Result<Vec<DepGraph>, ParserError> {
    tb.sentences
        .iter()
        .map(|s| encode(s, EncodeMode::HeadFinal, false).map_err(ParserError::from))
        .collect()
}

fn score_dev(
    model: &Model,
    dev: &Treebank,
    dev_gold: &[DepGraph],
    provider: &EmbeddingProvider,
    selection: SelectionMetric,
) -> Result<EvalReport, ParserError> {
    let metric_err = |e: crate::metrics::MetricsError| ParserError::DimMismatch(e.to_string());
    match selection {
        SelectionMetric::LabeledEdgeF1 => {
            let pred = predict(model, &dev.sentences, provider)?;
            edge_micro_f1(&pred, dev_gold, true).map_err(metric_err)
        }
        SelectionMetric::SentimentGraphF1 => {
            let (pred, _) = predict_treebank(model, dev, provider)?;
            sentiment_graph_f1(&pred, dev, true).map_err(metric_err)
        }
    }
}

/// Train on `train`, selecting the epoch with the best dev score.
///
/// The generator seeded with `hp.seed` initializes the parameters and then
/// drives batch shuffling and dropout, so a run is a pure function of its
/// inputs.
pub fn train(
    train: &Treebank,
    dev: &Treebank,
    hp: &Hyperparams,
    provider: &EmbeddingProvider,
    opts: TrainOptions,
) -> Result<TrainOutcome, ParserError> {
    hp.validate()?;
    if train.is_empty() {
        return Err(ParserError::EmptyTreebank(train.name.clone()));
    }
    if dev.is_empty() {
        return Err(ParserError::EmptyTreebank(dev.name.clone()));
    }
    if let EmbeddingProvider::Precomputed(file) = provider {
        if file.dim != hp.embedding_dim {
            return Err(ParserError::DimMismatch(format!(
                "embedding file has dimension {}, embedding_dim is {}",
                file.dim, hp.embedding_dim
            )));
        }
    }
    let train_gold = encode_all(train)?;
    let dev_gold = encode_all(dev)?;

    let vocab = if provider.is_external() {
        Vocabulary::reserved()
    } else {
        Vocabulary::build(train)
    };
    let mut rng = Xoshiro256PlusPlus::seed_from_u64(hp.seed);
    let params = Params::init(hp, vocab.num_words(), vocab.num_labels(), &mut rng);
    let mut model = Model {
        hyperparams: hp.clone(),
        vocab,
        external_embeddings: provider.is_external(),
        params,
    };

    let mut examples = Vec::new();
    for (s, gold) in train.sentences.iter().zip(train_gold) {
        if !s.tokens.is_empty() {
            examples.push(Example {
                input: model.input(s, provider)?,
                gold,
            });
        }
    }
    if examples.is_empty() {
        return Err(ParserError::EmptyTreebank(train.name.clone()));
    }

    let labels = model.vocab.labels().to_vec();
    let mut adam = Adam::new(&model.params);
    let mut order: Vec<usize> = (0..examples.len()).collect();
    let mut log = Vec::new();
    let mut best: Option<(f64, usize, Params<f32>)> = None;
    let mut since_best = 0;
    let started = Instant::now();

    for epoch in 1..=hp.max_epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0f64;
        for batch in order.chunks(hp.batch_size) {
            let mut grads = model.params.zeros_like();
            for &i in batch {
                let ex = &examples[i];
                let (logits, cache) = network::forward(&model.params, &ex.input, Some((hp.dropout_rate, &mut rng)))?;
                let (l, d_logits) = network::loss(&logits, &ex.gold, &labels)?;
                epoch_loss += l as f64;
                network::backward(&model.params, &cache, &d_logits, &mut grads);
            }
            for (_, mut g) in grads.named_mut() {
                g /= batch.len() as f32;
            }
            adam.update(&mut model.params, &grads, hp.learning_rate);
        }
        epoch_loss /= examples.len() as f64;
        if !epoch_loss.is_finite() {
            return Err(ParserError::NonFiniteLoss);
        }

        let report = score_dev(&model, dev, &dev_gold, provider, opts.selection)?;
        let entry = EpochLog {
            epoch,
            loss: epoch_loss,
            dev_precision: report.precision,
            dev_recall: report.recall,
            dev_f1: report.f1,
            elapsed_seconds: if opts.deterministic {
                0.0
            } else {
                started.elapsed().as_secs_f64()
            },
        };
        log::info!(
            "epoch {} loss {:.6} dev P {:.4} R {:.4} F1 {:.4}",
            epoch,
            entry.loss,
            entry.dev_precision,
            entry.dev_recall,
            entry.dev_f1
        );
        log.push(entry);

        if best.as_ref().is_none_or(|(f1, _, _)| report.f1 > *f1) {
            best = Some((report.f1, epoch, model.params.clone()));
            since_best = 0;
        } else {
            since_best += 1;
            if since_best >= hp.patience {
                break;
            }
        }
    }

    let Some((best_f1, best_epoch, params)) = best else {
        return Err(ParserError::NonConverged { best_f1: 0.0, log });
    };
    if best_f1 < CONVERGENCE_FLOOR {
        return Err(ParserError::NonConverged { best_f1, log });
    }
    model.params = params;
    Ok(TrainOutcome {
        model,
        log,
        best_epoch,
        best_f1,
    })
}

/// Train with each learning rate of `grid` in turn until a run converges.
/// Returns the outcome together with the learning rate that produced it;
/// if no rate converges the last failure is returned.
pub fn train_with_grid(
    train_tb: &Treebank,
    dev: &Treebank,
    hp: &Hyperparams,
    provider: &EmbeddingProvider,
    opts: TrainOptions,
    grid: &[f64],
) -> Result<(TrainOutcome, f64), ParserError> {
    let mut last = None;
    for &lr in grid {
        let hp = Hyperparams {
            learning_rate: lr,
            ..hp.clone()
        };
        match train(train_tb, dev, &hp, provider, opts) {
            Ok(out) => return Ok((out, lr)),
            Err(e @ ParserError::NonConverged { .. }) => {
                log::warn!("learning rate {} did not converge", lr);
                last = Some(e);
            }
            Err(e) => return Err(e),
        }
    }
    Err(last.unwrap_or_else(|| ParserError::InvalidHyperparams("empty learning-rate grid".to_string())))
}

/// Label softmax for the edge `head -> dep`.
pub fn label_probabilities(logits: &Logits<f32>, head: usize, dep: usize) -> Array1<f32> {
    network::softmax(logits.label.slice(ndarray::s![head, dep, ..]).iter().copied())
}

/// Highest-scoring label that is well formed for an edge out of `head`:
/// polarity labels for root edges, the others everywhere else.
pub fn repair_label(head: usize, scores: &[f32], labels: &[Label]) -> Label {
    let want_root = head == 0;
    let mut best: Option<(f32, Label)> = None;
    for (&score, &label) in scores.iter().zip(labels) {
        if label.is_root() == want_root && best.is_none_or(|(b, _)| score > b) {
            best = Some((score, label));
        }
    }
    best.map(|(_, l)| l)
        .expect("label inventory has root and non-root labels")
}

fn graph_from_logits(logits: &Logits<f32>, labels: &[Label], threshold: f64) -> DepGraph {
    let n1 = logits.edge.nrows();
    let mut g = DepGraph::new(n1 - 1);
    for h in 0..n1 {
        for d in 1..n1 {
            if h == d {
                continue;
            }
            let x = logits.edge[[h, d]] as f64;
            if 1.0 / (1.0 + (-x).exp()) > threshold {
                let scores = logits.label.slice(ndarray::s![h, d, ..]);
                let label = repair_label(h, scores.as_slice().expect("contiguous"), labels);
                g.insert(DepEdge::new(h, d, label)).expect("edge within bounds");
            }
        }
    }
    g
}

/// Predict one graph per sentence. Sentences without tokens get empty
/// graphs.
pub fn predict(
    model: &Model,
    sentences: &[Sentence],
    provider: &EmbeddingProvider,
) -> Result<Vec<DepGraph>, ParserError> {
    let labels = model.vocab.labels();
    sentences
        .iter()
        .map(|s| {
            Ok(match model.logits(s, provider)? {
                Some(logits) => graph_from_logits(&logits, labels, model.hyperparams.edge_threshold),
                None => DepGraph::new(0),
            })
        })
        .collect()
}

/// Predict and decode. Returns the treebank with predicted opinions and the
/// total number of dangling edges dropped while decoding.
pub fn predict_treebank(
    model: &Model,
    tb: &Treebank,
    provider: &EmbeddingProvider,
) -> Result<(Treebank, usize), ParserError> {
    let graphs = predict(model, &tb.sentences, provider)?;
    let mut out = tb.clone();
    let mut dangling = 0;
    for (s, g) in out.sentences.iter_mut().zip(&graphs) {
        let (opinions, warnings) = decode(g, s)?;
        dangling += warnings.dangling_count();
        s.opinions = opinions;
    }
    Ok((out, dangling))
}
