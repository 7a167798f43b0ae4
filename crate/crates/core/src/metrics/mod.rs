//! Scoring of predicted opinions and graphs.
//!
//! Sentiment graph F1 matches predicted and gold tuples one-to-one per
//! sentence. A pair can only match when, for each of holder, target and
//! expression, the two token sets overlap or are both empty (and, by
//! default, the polarities agree). A matched pair contributes the mean over
//! the three elements of `|pred ∩ gold| / |pred|` to precision and of
//! `|pred ∩ gold| / |gold|` to recall, an element empty on both sides
//! counting as 1.
//!
//! The matching maximizes the summed precision plus recall weight. Ties are
//! broken by the larger sum of squared per-pair weights, which is symmetric
//! in the roles of prediction and gold, and then by the smaller index sum
//! with gold indices dominating. Numerators are accumulated as exact
//! rationals and divided once at the end.

pub mod assignment;

use std::collections::BTreeSet;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::{BigRational, Rational64};
use num_traits::{One, ToPrimitive, Zero};
use serde::Serialize;
use thiserror::Error;

use crate::codec::{encode_treebank, CodecError, DepGraph, EncodeMode};
use crate::model::{align_span_to_tokens, CoreError, Opinion, Polarity, Role, Sentence, Treebank};
use assignment::{max_weight_matching, Lex3};

/// Largest per-sentence common denominator accepted by the exact matcher.
const MAX_DENOMINATOR: u64 = 1 << 50;

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("treebank mismatch at sentence {index}: {reason}")]
    TreebankMismatch { index: usize, reason: String },

    #[error("sentence {sent_id}: {source}")]
    Misaligned {
        sent_id: String,
        #[source]
        source: CoreError,
    },

    #[error("sentence {sent_id}: span lengths too diverse for exact weighting")]
    Overflow { sent_id: String },

    #[error(transparent)]
    Codec(#[from] CodecError),
}

impl MetricsError {
    pub fn code(&self) -> &'static str {
        match self {
            MetricsError::TreebankMismatch { .. } => "TREEBANK_MISMATCH",
            MetricsError::Misaligned { .. } => "MISALIGNED_SPAN",
            MetricsError::Overflow { .. } => "OVERFLOW",
            MetricsError::Codec(e) => e.code(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Scores {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// Number of predicted items (tuples, edges or spans).
    pub predicted: usize,
    pub gold: usize,
    /// Weighted true positives on the precision side.
    pub tp_precision: BigRational,
    /// Weighted true positives on the recall side.
    pub tp_recall: BigRational,
    /// Span scores per element; filled by [`sentiment_graph_f1`] only.
    pub per_element: Vec<(Role, Scores)>,
}

impl EvalReport {
    fn from_counts(tp_precision: BigRational, tp_recall: BigRational, predicted: usize, gold: usize) -> Self {
        let (p, r) = if predicted == 0 && gold == 0 {
            (BigRational::one(), BigRational::one())
        } else {
            let ratio = |num: &BigRational, den: usize| {
                if den == 0 {
                    BigRational::zero()
                } else {
                    num / BigRational::from_integer(BigInt::from(den))
                }
            };
            (ratio(&tp_precision, predicted), ratio(&tp_recall, gold))
        };
        let f = if (&p + &r).is_zero() {
            BigRational::zero()
        } else {
            BigRational::from_integer(2.into()) * &p * &r / (&p + &r)
        };
        let to_f64 = |x: &BigRational| x.to_f64().unwrap_or(0.0);
        EvalReport {
            precision: to_f64(&p),
            recall: to_f64(&r),
            f1: to_f64(&f),
            predicted,
            gold,
            tp_precision,
            tp_recall,
            per_element: Vec::new(),
        }
    }

    pub fn scores(&self) -> Scores {
        Scores {
            precision: self.precision,
            recall: self.recall,
            f1: self.f1,
        }
    }
}

/// Token index sets of an opinion's three elements, in `Role::ALL` order.
#[derive(Debug, Clone, PartialEq, Eq)]
struct TupleTokens {
    elements: [Vec<usize>; 3],
    polarity: Polarity,
}

fn tuple_tokens(op: &Opinion, s: &Sentence) -> Result<TupleTokens, MetricsError> {
    let align = |role| {
        align_span_to_tokens(op.span(role), s).map_err(|source| MetricsError::Misaligned {
            sent_id: s.sent_id.clone(),
            source,
        })
    };
    Ok(TupleTokens {
        elements: [align(Role::Holder)?, align(Role::Target)?, align(Role::Expression)?],
        polarity: op.polarity,
    })
}

fn intersection_size(a: &[usize], b: &[usize]) -> usize {
    let (mut i, mut j, mut n) = (0, 0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                n += 1;
                i += 1;
                j += 1;
            }
        }
    }
    n
}

/// Per-element (intersection, |pred|, |gold|) when the pair is matchable.
fn element_overlaps(
    pred: &TupleTokens,
    gold: &TupleTokens,
    require_polarity: bool,
) -> Option<[(usize, usize, usize); 3]> {
    if require_polarity && pred.polarity != gold.polarity {
        return None;
    }
    let mut out = [(0, 0, 0); 3];
    for (k, slot) in out.iter_mut().enumerate() {
        let (p, g) = (&pred.elements[k], &gold.elements[k]);
        let inter = intersection_size(p, g);
        let both_empty = p.is_empty() && g.is_empty();
        if !both_empty && inter == 0 {
            return None;
        }
        *slot = (inter, p.len(), g.len());
    }
    Some(out)
}

/// Precision and recall weight of one predicted tuple against one gold tuple.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TupleWeight {
    pub precision: Rational64,
    pub recall: Rational64,
}

/// Weight of a (predicted, gold) tuple pair from the same sentence, or
/// `None` when the pair cannot match.
pub fn tuple_weight(
    pred: &Opinion,
    gold: &Opinion,
    sentence: &Sentence,
    require_polarity: bool,
) -> Result<Option<TupleWeight>, MetricsError> {
    let p = tuple_tokens(pred, sentence)?;
    let g = tuple_tokens(gold, sentence)?;
    Ok(element_overlaps(&p, &g, require_polarity).map(|ov| {
        let ratio = |num: usize, den: usize| {
            if den == 0 {
                Rational64::one()
            } else {
                Rational64::new(num as i64, den as i64)
            }
        };
        let three = Rational64::from_integer(3);
        TupleWeight {
            precision: ov.iter().map(|&(i, p, _)| ratio(i, p)).sum::<Rational64>() / three,
            recall: ov.iter().map(|&(i, _, g)| ratio(i, g)).sum::<Rational64>() / three,
        }
    }))
}

/// Exact per-sentence weights scaled by a common denominator.
struct ScaledPair {
    precision: i128,
    recall: i128,
}

/// Items of one sentence reduced to per-element token sets. Single-element
/// span scoring reuses the same machinery with one element per item.
struct MatchInput<'a> {
    pred: &'a [TupleTokens],
    gold: &'a [TupleTokens],
    elements: &'a [usize],
    require_polarity: bool,
}

struct MatchOutcome {
    /// Summed matched weights, as (precision numerator, recall numerator)
    /// over `denominator`.
    precision: i128,
    recall: i128,
    denominator: i128,
}

fn match_sentence(input: &MatchInput<'_>, sent_id: &str) -> Result<MatchOutcome, MetricsError> {
    let MatchInput {
        pred,
        gold,
        elements,
        require_polarity,
    } = *input;

    // Common denominator: lcm of all non-empty element sizes.
    let mut lcm: u64 = 1;
    for t in pred.iter().chain(gold) {
        for &k in elements {
            let len = t.elements[k].len() as u64;
            if len > 0 {
                lcm = lcm.lcm(&len);
                if lcm > MAX_DENOMINATOR {
                    return Err(MetricsError::Overflow {
                        sent_id: sent_id.to_string(),
                    });
                }
            }
        }
    }
    let unit = lcm as i128;
    let denominator = unit * elements.len() as i128;

    let scaled = |p: usize, g: usize| -> Option<ScaledPair> {
        let (a, b) = (&pred[p], &gold[g]);
        if require_polarity && a.polarity != b.polarity {
            return None;
        }
        let mut out = ScaledPair {
            precision: 0,
            recall: 0,
        };
        for &k in elements {
            let (pe, ge) = (&a.elements[k], &b.elements[k]);
            if pe.is_empty() && ge.is_empty() {
                out.precision += unit;
                out.recall += unit;
                continue;
            }
            let inter = intersection_size(pe, ge) as i128;
            if inter == 0 {
                return None;
            }
            out.precision += inter * unit / pe.len() as i128;
            out.recall += inter * unit / ge.len() as i128;
        }
        Some(out)
    };

    let gold_stride = pred.len() as i128 + 1;
    let matching = max_weight_matching(pred.len(), gold.len(), |p, g| {
        scaled(p, g).map(|w| {
            Lex3(
                w.precision + w.recall,
                w.precision * w.precision + w.recall * w.recall,
                -(g as i128 * gold_stride + p as i128) - 1,
            )
        })
    });

    let mut outcome = MatchOutcome {
        precision: 0,
        recall: 0,
        denominator,
    };
    for (p, g) in matching {
        let w = scaled(p, g).expect("matched pairs are matchable");
        outcome.precision += w.precision;
        outcome.recall += w.recall;
    }
    Ok(outcome)
}

fn check_alignment(pred: &Treebank, gold: &Treebank) -> Result<(), MetricsError> {
    if pred.len() != gold.len() {
        return Err(MetricsError::TreebankMismatch {
            index: pred.len().min(gold.len()),
            reason: format!("{} predicted vs {} gold sentences", pred.len(), gold.len()),
        });
    }
    for (i, (p, g)) in pred.sentences.iter().zip(&gold.sentences).enumerate() {
        if p.sent_id != g.sent_id {
            return Err(MetricsError::TreebankMismatch {
                index: i,
                reason: format!("sent_id {:?} vs {:?}", p.sent_id, g.sent_id),
            });
        }
        if p.tokens.len() != g.tokens.len() {
            return Err(MetricsError::TreebankMismatch {
                index: i,
                reason: format!("{} vs {} tokens", p.tokens.len(), g.tokens.len()),
            });
        }
    }
    Ok(())
}

fn ratio(num: i128, den: i128) -> BigRational {
    BigRational::new(BigInt::from(num), BigInt::from(den))
}

/// Shared driver: items per sentence come from `items`, scored over the
/// chosen element indices.
fn score_treebanks<F>(
    pred: &Treebank,
    gold: &Treebank,
    elements: &[usize],
    require_polarity: bool,
    items: F,
) -> Result<EvalReport, MetricsError>
where
    F: Fn(&Sentence) -> Result<Vec<TupleTokens>, MetricsError>,
{
    check_alignment(pred, gold)?;
    let mut tp_p = BigRational::zero();
    let mut tp_r = BigRational::zero();
    let (mut n_pred, mut n_gold) = (0, 0);
    for (ps, gs) in pred.sentences.iter().zip(&gold.sentences) {
        let p_items = items(ps)?;
        let g_items = items(gs)?;
        n_pred += p_items.len();
        n_gold += g_items.len();
        if p_items.is_empty() || g_items.is_empty() {
            continue;
        }
        let outcome = match_sentence(
            &MatchInput {
                pred: &p_items,
                gold: &g_items,
                elements,
                require_polarity,
            },
            &gs.sent_id,
        )?;
        tp_p += ratio(outcome.precision, outcome.denominator);
        tp_r += ratio(outcome.recall, outcome.denominator);
    }
    Ok(EvalReport::from_counts(tp_p, tp_r, n_pred, n_gold))
}

/// Sentiment graph F1 over two treebanks with identical sentences.
pub fn sentiment_graph_f1(
    pred: &Treebank,
    gold: &Treebank,
    require_polarity: bool,
) -> Result<EvalReport, MetricsError> {
    let mut report = score_treebanks(pred, gold, &[0, 1, 2], require_polarity, |s| {
        s.opinions.iter().map(|op| tuple_tokens(op, s)).collect()
    })?;
    for role in Role::ALL {
        report.per_element.push((role, span_f1(pred, gold, role)?.scores()));
    }
    Ok(report)
}

/// Weighted token-overlap F1 for one element, over the non-empty spans of
/// that element across all tuples.
pub fn span_f1(pred: &Treebank, gold: &Treebank, role: Role) -> Result<EvalReport, MetricsError> {
    let k = Role::ALL.iter().position(|&r| r == role).unwrap();
    score_treebanks(pred, gold, &[k], false, |s| {
        let mut out = Vec::new();
        for op in &s.opinions {
            let t = tuple_tokens(op, s)?;
            if !t.elements[k].is_empty() {
                out.push(t);
            }
        }
        Ok(out)
    })
}

/// Micro-averaged edge precision/recall/F1 over aligned graph lists.
pub fn edge_micro_f1(pred: &[DepGraph], gold: &[DepGraph], labeled: bool) -> Result<EvalReport, MetricsError> {
    if pred.len() != gold.len() {
        return Err(MetricsError::TreebankMismatch {
            index: pred.len().min(gold.len()),
            reason: format!("{} predicted vs {} gold graphs", pred.len(), gold.len()),
        });
    }
    let (mut tp, mut n_pred, mut n_gold) = (0usize, 0usize, 0usize);
    for (i, (p, g)) in pred.iter().zip(gold).enumerate() {
        if p.n() != g.n() {
            return Err(MetricsError::TreebankMismatch {
                index: i,
                reason: format!("{} vs {} nodes", p.n(), g.n()),
            });
        }
        let key = |e: crate::codec::DepEdge| (e.head, e.dep, labeled.then_some(e.label));
        let ps: BTreeSet<_> = p.edges().map(key).collect();
        let gs: BTreeSet<_> = g.edges().map(key).collect();
        tp += ps.intersection(&gs).count();
        n_pred += ps.len();
        n_gold += gs.len();
    }
    let tp = BigRational::from_integer(BigInt::from(tp));
    Ok(EvalReport::from_counts(tp.clone(), tp, n_pred, n_gold))
}

/// Per-element span scores in the report's fixed key order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SpanScores {
    pub holder: Scores,
    pub target: Scores,
    pub expression: Scores,
}

/// The full evaluation report printed by the `evaluate` command.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FullReport {
    pub sentiment_graph: Scores,
    pub edges: Scores,
    pub spans: SpanScores,
}

/// Score a predicted treebank against gold on every metric. Edges are
/// compared after encoding both sides with `mode`; label collisions are
/// resolved last-writer-wins on both sides.
pub fn evaluate(
    pred: &Treebank,
    gold: &Treebank,
    require_polarity: bool,
    labeled: bool,
    mode: EncodeMode,
) -> Result<FullReport, MetricsError> {
    let sg = sentiment_graph_f1(pred, gold, require_polarity)?;
    let pred_graphs = encode_treebank(pred, mode, true)?;
    let gold_graphs = encode_treebank(gold, mode, true)?;
    let edges = edge_micro_f1(&pred_graphs, &gold_graphs, labeled)?;
    let element = |role: Role| {
        sg.per_element
            .iter()
            .find(|(r, _)| *r == role)
            .map(|(_, s)| *s)
            .expect("all elements scored")
    };
    Ok(FullReport {
        sentiment_graph: sg.scores(),
        edges: edges.scores(),
        spans: SpanScores {
            holder: element(Role::Holder),
            target: element(Role::Target),
            expression: element(Role::Expression),
        },
    })
}
