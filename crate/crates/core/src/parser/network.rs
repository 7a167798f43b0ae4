//! Forward pass, loss and backward pass of the biaffine graph parser.
//!
//! Position 0 of every sequence is the virtual root. The BiLSTM output
//! feeds four leaky-ReLU projections (edge head/dependent, label
//! head/dependent); the edge logit of `h -> d` is
//! `[dep_d; 1]^T U_edge [head_h; 1]` and label logit `l` uses the slice
//! `U_label[l]` the same way.

use ndarray::{concatenate, s, Array1, Array2, Array3, ArrayView2, Axis};
use rand::Rng;

use super::lstm::{self, LstmCache};
use super::params::{Float, Params, Projection};
use super::ParserError;
use crate::codec::{DepGraph, Label};

const LEAKY_SLOPE: f64 = 0.1;

/// Network input for one sentence.
#[derive(Debug, Clone)]
pub struct SentenceInput<F> {
    /// Word ids, root first: length n + 1.
    pub ids: Vec<usize>,
    /// Precomputed token vectors (n x embedding_dim) replacing the table
    /// lookup for positions 1..=n.
    pub external: Option<Array2<F>>,
}

impl<F> SentenceInput<F> {
    pub fn len(&self) -> usize {
        self.ids.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Edge logits `[h][d]` and label logits `[h][d][l]` over positions 0..=n.
#[derive(Debug, Clone, PartialEq)]
pub struct Logits<F> {
    pub edge: Array2<F>,
    pub label: Array3<F>,
}

pub struct ForwardCache<F> {
    ids: Vec<usize>,
    external: bool,
    embed_mask: Option<Array2<F>>,
    layers: Vec<LayerCache<F>>,
    top: Array2<F>,
    projections: [ProjectionCache<F>; 4],
}

struct LayerCache<F> {
    fwd: LstmCache<F>,
    bwd: LstmCache<F>,
    mask: Option<Array2<F>>,
}

struct ProjectionCache<F> {
    pre: Array2<F>,
    /// Activation with a trailing column of ones.
    augmented: Array2<F>,
}

fn dropout_mask<F: Float, R: Rng>(shape: (usize, usize), rate: f64, rng: &mut R) -> Array2<F> {
    let keep = F::lit(1.0 / (1.0 - rate));
    Array2::from_shape_simple_fn(shape, || if rng.random::<f64>() < rate { F::zero() } else { keep })
}

fn project<F: Float>(p: &Projection<F>, x: &Array2<F>) -> ProjectionCache<F> {
    let pre = x.dot(&p.weight.t()) + &p.bias;
    let slope = F::lit(LEAKY_SLOPE);
    let act = pre.mapv(|z| if z > F::zero() { z } else { z * slope });
    let ones = Array2::ones((x.nrows(), 1));
    let augmented = concatenate![Axis(1), act, ones];
    ProjectionCache { pre, augmented }
}

/// `[dep_d; 1]^T U [head_h; 1]` for all pairs, indexed `[h][d]`.
fn biaffine<F: Float>(dep: &Array2<F>, u: ArrayView2<'_, F>, head: &Array2<F>) -> Array2<F> {
    head.dot(&u.t()).dot(&dep.t())
}

/// Run the network. With `dropout = Some((rate, rng))` inverted dropout is
/// applied to the embeddings and every BiLSTM layer output.
pub fn forward<F: Float, R: Rng>(
    p: &Params<F>,
    input: &SentenceInput<F>,
    mut dropout: Option<(f64, &mut R)>,
) -> Result<(Logits<F>, ForwardCache<F>), ParserError> {
    let n1 = input.ids.len();
    let emb_dim = p.embed.ncols();
    if n1 < 2 {
        return Err(ParserError::EmptySentence);
    }
    if let Some(&bad) = input.ids.iter().find(|&&id| id >= p.embed.nrows()) {
        return Err(ParserError::DimMismatch(format!(
            "word id {} outside embedding table of {} rows",
            bad,
            p.embed.nrows()
        )));
    }

    let mut x = Array2::<F>::zeros((n1, emb_dim));
    x.row_mut(0).assign(&p.embed.row(input.ids[0]));
    match &input.external {
        Some(ext) => {
            if ext.dim() != (n1 - 1, emb_dim) {
                return Err(ParserError::DimMismatch(format!(
                    "external vectors {:?}, expected {:?}",
                    ext.dim(),
                    (n1 - 1, emb_dim)
                )));
            }
            x.slice_mut(s![1.., ..]).assign(ext);
        }
        None => {
            for (t, &id) in input.ids.iter().enumerate().skip(1) {
                x.row_mut(t).assign(&p.embed.row(id));
            }
        }
    }

    let mut embed_mask = None;
    if let Some((rate, rng)) = dropout.as_mut().filter(|(r, _)| *r > 0.0) {
        let m = dropout_mask(x.dim(), *rate, *rng);
        x *= &m;
        embed_mask = Some(m);
    }

    let mut layers = Vec::with_capacity(p.lstm.len());
    for dirs in &p.lstm {
        if dirs[0].w_ih.ncols() != x.ncols() {
            return Err(ParserError::DimMismatch(format!(
                "LSTM input width {} but layer expects {}",
                x.ncols(),
                dirs[0].w_ih.ncols()
            )));
        }
        let (out_f, fwd) = lstm::forward(&dirs[0], x.view(), false);
        let (out_b, bwd) = lstm::forward(&dirs[1], x.view(), true);
        x = concatenate![Axis(1), out_f, out_b];
        let mut mask = None;
        if let Some((rate, rng)) = dropout.as_mut().filter(|(r, _)| *r > 0.0) {
            let m = dropout_mask(x.dim(), *rate, *rng);
            x *= &m;
            mask = Some(m);
        }
        layers.push(LayerCache { fwd, bwd, mask });
    }

    for proj in [&p.edge_head, &p.edge_dep, &p.label_head, &p.label_dep] {
        if proj.weight.ncols() != x.ncols() {
            return Err(ParserError::DimMismatch("projection input width".to_string()));
        }
    }
    let projections = [
        project(&p.edge_head, &x),
        project(&p.edge_dep, &x),
        project(&p.label_head, &x),
        project(&p.label_dep, &x),
    ];
    let [edge_head, edge_dep, label_head, label_dep] = &projections;
    if p.u_edge.dim() != (edge_dep.augmented.ncols(), edge_head.augmented.ncols())
        || p.u_label.dim().1 != label_dep.augmented.ncols()
        || p.u_label.dim().2 != label_head.augmented.ncols()
    {
        return Err(ParserError::DimMismatch("biaffine tensor shape".to_string()));
    }

    let mut edge = biaffine(&edge_dep.augmented, p.u_edge.view(), &edge_head.augmented);
    let num_labels = p.u_label.dim().0;
    let mut label = Array3::<F>::zeros((n1, n1, num_labels));
    for l in 0..num_labels {
        let s_l = biaffine(
            &label_dep.augmented,
            p.u_label.index_axis(Axis(0), l),
            &label_head.augmented,
        );
        label.index_axis_mut(Axis(2), l).assign(&s_l);
    }
    for h in 0..n1 {
        edge[[h, h]] = F::neg_infinity();
        edge[[h, 0]] = F::neg_infinity();
    }

    Ok((
        Logits { edge, label },
        ForwardCache {
            ids: input.ids.clone(),
            external: input.external.is_some(),
            embed_mask,
            layers,
            top: x,
            projections,
        },
    ))
}

/// Gradients of the loss with respect to the score tensors.
#[derive(Debug, Clone)]
pub struct LogitGrads<F> {
    pub edge: Array2<F>,
    pub label: Array3<F>,
}

fn softplus<F: Float>(x: F) -> F {
    // log(1 + e^x) without overflow
    x.max(F::zero()) + (-x.abs()).exp().ln_1p()
}

/// Gold label of every edge, as a label-index matrix.
fn gold_labels(gold: &DepGraph, labels: &[Label]) -> Result<Vec<(usize, usize, usize)>, ParserError> {
    gold.edges()
        .map(|e| {
            labels
                .iter()
                .position(|&l| l == e.label)
                .map(|li| (e.head, e.dep, li))
                .ok_or_else(|| ParserError::DimMismatch(format!("label {} not in vocabulary", e.label)))
        })
        .collect()
}

/// Mean binary cross-entropy over every valid (head, dependent) pair plus
/// mean cross-entropy of the label logits over gold edges.
pub fn loss<F: Float>(
    scores: &Logits<F>,
    gold: &DepGraph,
    labels: &[Label],
) -> Result<(F, LogitGrads<F>), ParserError> {
    let n1 = scores.edge.nrows();
    let n = n1 - 1;
    if gold.n() != n || scores.label.dim() != (n1, n1, labels.len()) {
        return Err(ParserError::DimMismatch(format!(
            "scores for {} tokens, gold graph over {}",
            n,
            gold.n()
        )));
    }
    let mut target = Array2::<F>::zeros((n1, n1));
    let gold_edges = gold_labels(gold, labels)?;
    for &(h, d, _) in &gold_edges {
        target[[h, d]] = F::one();
    }

    let mut d_edge = Array2::<F>::zeros((n1, n1));
    let mut d_label = Array3::<F>::zeros(scores.label.dim());
    let pairs = F::lit((n * n) as f64);
    let mut edge_loss = F::zero();
    for h in 0..n1 {
        for d in 1..n1 {
            if h == d {
                continue;
            }
            let x = scores.edge[[h, d]];
            if !x.is_finite() {
                return Err(ParserError::NonFiniteLoss);
            }
            let y = target[[h, d]];
            edge_loss += softplus(x) - x * y;
            let sig = F::one() / (F::one() + (-x).exp());
            d_edge[[h, d]] = (sig - y) / pairs;
        }
    }
    edge_loss = edge_loss / pairs;

    let mut label_loss = F::zero();
    if !gold_edges.is_empty() {
        let count = F::lit(gold_edges.len() as f64);
        for &(h, d, li) in &gold_edges {
            let logits = scores.label.slice(s![h, d, ..]);
            if logits.iter().any(|x| !x.is_finite()) {
                return Err(ParserError::NonFiniteLoss);
            }
            let probs = softmax(logits.iter().copied());
            label_loss += -probs[li].ln();
            for (l, &pr) in probs.iter().enumerate() {
                let indicator = if l == li { F::one() } else { F::zero() };
                d_label[[h, d, l]] = (pr - indicator) / count;
            }
        }
        label_loss = label_loss / count;
    }

    let total = edge_loss + label_loss;
    if !total.is_finite() {
        return Err(ParserError::NonFiniteLoss);
    }
    Ok((
        total,
        LogitGrads {
            edge: d_edge,
            label: d_label,
        },
    ))
}

/// Numerically stable softmax.
pub fn softmax<F: Float>(logits: impl Iterator<Item = F> + Clone) -> Array1<F> {
    let max = logits.clone().fold(F::neg_infinity(), F::max);
    let exps: Array1<F> = logits.map(|x| (x - max).exp()).collect();
    let sum = exps.sum();
    exps / sum
}

fn projection_backward<F: Float>(
    p: &Projection<F>,
    cache: &ProjectionCache<F>,
    d_aug: &Array2<F>,
    input: &Array2<F>,
    grad: &mut Projection<F>,
) -> Array2<F> {
    let d = p.weight.nrows();
    let slope = F::lit(LEAKY_SLOPE);
    let mut d_pre = d_aug.slice(s![.., ..d]).to_owned();
    ndarray::Zip::from(&mut d_pre).and(&cache.pre).for_each(|g, &z| {
        if z <= F::zero() {
            *g *= slope;
        }
    });
    grad.weight += &d_pre.t().dot(input);
    grad.bias += &d_pre.sum_axis(Axis(0));
    d_pre.dot(&p.weight)
}

/// Backpropagate score gradients through the network, accumulating into
/// `grads`.
pub fn backward<F: Float>(p: &Params<F>, cache: &ForwardCache<F>, d_scores: &LogitGrads<F>, grads: &mut Params<F>) {
    let [edge_head, edge_dep, label_head, label_dep] = &cache.projections;

    // Edge biaffine. S[d][h] = dep_d U head_h^T, scores are S transposed.
    let d_s = d_scores.edge.t();
    let (de, he) = (&edge_dep.augmented, &edge_head.augmented);
    grads.u_edge += &de.t().dot(&d_s).dot(he);
    let d_edge_dep = d_s.dot(he).dot(&p.u_edge.t());
    let d_edge_head = d_s.t().dot(de).dot(&p.u_edge);

    let (ld, lh) = (&label_dep.augmented, &label_head.augmented);
    let mut d_label_dep = Array2::<F>::zeros(ld.dim());
    let mut d_label_head = Array2::<F>::zeros(lh.dim());
    for l in 0..p.u_label.dim().0 {
        let d_s = d_scores.label.index_axis(Axis(2), l).reversed_axes();
        let u = p.u_label.index_axis(Axis(0), l);
        let mut gu = grads.u_label.index_axis_mut(Axis(0), l);
        gu += &ld.t().dot(&d_s).dot(lh);
        d_label_dep += &d_s.dot(lh).dot(&u.t());
        d_label_head += &d_s.t().dot(ld).dot(&u);
    }

    let top = &cache.top;
    let mut d_top = projection_backward(&p.edge_head, edge_head, &d_edge_head, top, &mut grads.edge_head);
    d_top += &projection_backward(&p.edge_dep, edge_dep, &d_edge_dep, top, &mut grads.edge_dep);
    d_top += &projection_backward(&p.label_head, label_head, &d_label_head, top, &mut grads.label_head);
    d_top += &projection_backward(&p.label_dep, label_dep, &d_label_dep, top, &mut grads.label_dep);

    let mut d_x = d_top;
    for (layer, lc) in cache.layers.iter().enumerate().rev() {
        if let Some(m) = &lc.mask {
            d_x *= m;
        }
        let h = p.lstm[layer][0].w_hh.ncols();
        let d_f = d_x.slice(s![.., ..h]);
        let d_b = d_x.slice(s![.., h..]);
        let [gf, gb] = &mut grads.lstm[layer];
        let dx_f = lstm::backward(&p.lstm[layer][0], &lc.fwd, d_f, false, gf);
        let dx_b = lstm::backward(&p.lstm[layer][1], &lc.bwd, d_b, true, gb);
        d_x = dx_f + dx_b;
    }
    if let Some(m) = &cache.embed_mask {
        d_x *= m;
    }

    for (t, &id) in cache.ids.iter().enumerate() {
        if cache.external && t > 0 {
            break;
        }
        let mut row = grads.embed.row_mut(id);
        row += &d_x.row(t);
    }
}
