//! Random treebank generators and independent reference implementations
//! shared by the property and acceptance tests.

#![allow(dead_code)]

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};
use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng;

use sentigraph::codec::read_json;
use sentigraph::parser::Hyperparams;
use sentigraph::{Opinion, Polarity, Sentence, Span, Treebank};

const WORDS: &[&str] = &[
    "good", "bad", "room", "staff", "I", "we", "the", "very", "not", "price", "food", "okay", "café", "ñandú", "über",
    "x", "día", "naïve",
];
const SEPARATORS: &[&str] = &[" ", " ", " ", "  ", "\t", "\u{a0}"];

pub fn random_text<R: Rng>(rng: &mut R, n: usize) -> String {
    let mut text = String::new();
    for i in 0..n {
        if i > 0 {
            text.push_str(SEPARATORS.choose(rng).unwrap());
        }
        text.push_str(WORDS.choose(rng).unwrap());
    }
    text
}

/// Span over 1-based token indices, one fragment per maximal run.
pub fn span_from_tokens(s: &Sentence, tokens: &BTreeSet<usize>) -> Span {
    let mut fragments = Vec::new();
    let mut iter = tokens.iter().copied().peekable();
    while let Some(first) = iter.next() {
        let mut last = first;
        while iter.peek() == Some(&(last + 1)) {
            last = iter.next().unwrap();
        }
        fragments.push(s.token_fragment(first, last));
    }
    Span::new(fragments)
}

fn random_polarity<R: Rng>(rng: &mut R) -> Polarity {
    *Polarity::ALL.choose(rng).unwrap()
}

/// Split `pool` into at most `parts` non-empty random groups.
fn random_groups<R: Rng>(rng: &mut R, pool: &[usize], parts: usize) -> Vec<BTreeSet<usize>> {
    if pool.is_empty() || parts == 0 {
        return Vec::new();
    }
    let mut shuffled = pool.to_vec();
    shuffled.shuffle(rng);
    let parts = parts.min(shuffled.len());
    let mut groups = vec![BTreeSet::new(); parts];
    for (i, t) in shuffled.into_iter().enumerate() {
        let g = if i < parts { i } else { rng.random_range(0..parts) };
        groups[g].insert(t);
    }
    groups
}

/// A sentence whose opinions the codec can represent: expressions are
/// pairwise disjoint, targets and holders come from their own token pools
/// and may be shared between opinions only as identical spans.
pub fn encodable_sentence<R: Rng>(rng: &mut R, id: &str) -> Sentence {
    let n = rng.random_range(1..=12);
    let mut s = Sentence::new(id, random_text(rng, n), vec![]);
    let mut pools = [Vec::new(), Vec::new(), Vec::new(), Vec::new()];
    for t in 1..=n {
        pools[rng.random_range(0..4)].push(t);
    }
    let [expr_pool, target_pool, holder_pool, _] = pools;
    let k = rng.random_range(0..=4);
    let expressions = random_groups(rng, &expr_pool, k);
    let (kt, kh) = (rng.random_range(1..=3), rng.random_range(1..=2));
    let targets = random_groups(rng, &target_pool, kt);
    let holders = random_groups(rng, &holder_pool, kh);

    let mut opinions = Vec::new();
    for expr in &expressions {
        let pick = |rng: &mut R, groups: &[BTreeSet<usize>]| -> Span {
            if groups.is_empty() || rng.random_bool(0.3) {
                Span::empty()
            } else {
                span_from_tokens(&s, groups.choose(rng).unwrap())
            }
        };
        let target = pick(rng, &targets);
        let holder = pick(rng, &holders);
        opinions.push(Opinion::new(
            holder,
            target,
            span_from_tokens(&s, expr),
            random_polarity(rng),
        ));
    }
    s.opinions = opinions;
    s
}

pub fn encodable_treebank<R: Rng>(rng: &mut R, name: &str, max_sentences: usize) -> Treebank {
    let n = rng.random_range(0..=max_sentences);
    let sentences = (0..n)
        .map(|i| encodable_sentence(rng, &format!("{}-{}", name, i)))
        .collect();
    Treebank::new(name, sentences)
}

fn random_subset<R: Rng>(rng: &mut R, n: usize, p: f64) -> BTreeSet<usize> {
    (1..=n).filter(|_| rng.random_bool(p)).collect()
}

fn random_nonempty_subset<R: Rng>(rng: &mut R, n: usize, p: f64) -> BTreeSet<usize> {
    let mut s = random_subset(rng, n, p);
    if s.is_empty() {
        s.insert(rng.random_range(1..=n));
    }
    s
}

fn unconstrained_opinion<R: Rng>(rng: &mut R, s: &Sentence) -> Opinion {
    let n = s.tokens.len();
    let holder = if rng.random_bool(0.4) {
        BTreeSet::new()
    } else {
        random_nonempty_subset(rng, n, 0.2)
    };
    let target = if rng.random_bool(0.2) {
        BTreeSet::new()
    } else {
        random_nonempty_subset(rng, n, 0.3)
    };
    let expr = random_nonempty_subset(rng, n, 0.3);
    Opinion::new(
        span_from_tokens(s, &holder),
        span_from_tokens(s, &target),
        span_from_tokens(s, &expr),
        random_polarity(rng),
    )
}

/// A small random (prediction, gold) treebank pair over the same sentences.
/// Spans are arbitrary token subsets, so overlaps of every kind occur.
pub fn metric_instance<R: Rng>(rng: &mut R) -> (Treebank, Treebank) {
    let sentences = rng.random_range(1..=3);
    let mut pred = Vec::new();
    let mut gold = Vec::new();
    for i in 0..sentences {
        let n = rng.random_range(1..=12);
        let base = Sentence::new(format!("s{}", i), random_text(rng, n), vec![]);
        let mut g = base.clone();
        let mut p = base.clone();
        g.opinions = (0..rng.random_range(0..=4))
            .map(|_| unconstrained_opinion(rng, &base))
            .collect();
        p.opinions = (0..rng.random_range(0..=4))
            .map(|_| {
                if !g.opinions.is_empty() && rng.random_bool(0.4) {
                    let mut op = g.opinions.choose(rng).unwrap().clone();
                    if rng.random_bool(0.3) {
                        op.polarity = random_polarity(rng);
                    }
                    op
                } else {
                    unconstrained_opinion(rng, &base)
                }
            })
            .collect();
        gold.push(g);
        pred.push(p);
    }
    (Treebank::new("pred", pred), Treebank::new("gold", gold))
}

/// Tokens inside a span, computed from character offsets alone.
pub fn covered_tokens(s: &Sentence, span: &Span) -> BTreeSet<usize> {
    let mut out = BTreeSet::new();
    for f in &span.fragments {
        for t in &s.tokens {
            if f.start <= t.start && t.end <= f.end {
                out.insert(t.index);
            }
        }
    }
    out
}

fn rat(n: usize, d: usize) -> BigRational {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

/// Reference pair weight: `None` when the pair may not be matched.
pub fn oracle_weight(
    s: &Sentence,
    pred: &Opinion,
    gold: &Opinion,
    require_polarity: bool,
) -> Option<(BigRational, BigRational)> {
    if require_polarity && pred.polarity != gold.polarity {
        return None;
    }
    let mut p_sum = BigRational::zero();
    let mut r_sum = BigRational::zero();
    for (ps, gs) in [
        (&pred.holder, &gold.holder),
        (&pred.target, &gold.target),
        (&pred.expression, &gold.expression),
    ] {
        let a = covered_tokens(s, ps);
        let b = covered_tokens(s, gs);
        if a.is_empty() && b.is_empty() {
            p_sum += BigRational::one();
            r_sum += BigRational::one();
            continue;
        }
        let inter = a.intersection(&b).count();
        if inter == 0 {
            return None;
        }
        p_sum += rat(inter, a.len());
        r_sum += rat(inter, b.len());
    }
    let three = BigRational::from_integer(BigInt::from(3));
    Some((p_sum / &three, r_sum / three))
}

/// Every one-to-one partial matching between `0..p` and `0..g`.
fn all_matchings(p: usize, g: usize) -> Vec<Vec<(usize, usize)>> {
    fn go(
        pi: usize,
        p: usize,
        g: usize,
        used: &mut Vec<bool>,
        cur: &mut Vec<(usize, usize)>,
        out: &mut Vec<Vec<(usize, usize)>>,
    ) {
        if pi == p {
            out.push(cur.clone());
            return;
        }
        go(pi + 1, p, g, used, cur, out);
        for gi in 0..g {
            if !used[gi] {
                used[gi] = true;
                cur.push((pi, gi));
                go(pi + 1, p, g, used, cur, out);
                cur.pop();
                used[gi] = false;
            }
        }
    }
    let mut out = Vec::new();
    go(0, p, g, &mut vec![false; g], &mut Vec::new(), &mut out);
    out
}

/// Brute-force sentiment graph scores: (precision numerator, recall
/// numerator, #pred, #gold). Among matchings with the largest total weight
/// the one with the largest sum of squared weights wins, then the smallest
/// index sum with gold indices dominating.
pub fn oracle_counts(
    pred: &Treebank,
    gold: &Treebank,
    require_polarity: bool,
) -> (BigRational, BigRational, usize, usize) {
    let mut tp_p = BigRational::zero();
    let mut tp_r = BigRational::zero();
    let (mut np, mut ng) = (0, 0);
    for (ps, gs) in pred.sentences.iter().zip(&gold.sentences) {
        let (p, g) = (ps.opinions.len(), gs.opinions.len());
        np += p;
        ng += g;
        let weights: Vec<Vec<Option<(BigRational, BigRational)>>> = ps
            .opinions
            .iter()
            .map(|po| {
                gs.opinions
                    .iter()
                    .map(|go| oracle_weight(gs, po, go, require_polarity))
                    .collect()
            })
            .collect();
        let mut best: Option<((BigRational, BigRational, i64), BigRational, BigRational)> = None;
        'matchings: for m in all_matchings(p, g) {
            let (mut total, mut squares, mut tie) = (BigRational::zero(), BigRational::zero(), 0i64);
            let (mut sp, mut sr) = (BigRational::zero(), BigRational::zero());
            for &(pi, gi) in &m {
                let Some((wp, wr)) = &weights[pi][gi] else {
                    continue 'matchings;
                };
                total += wp + wr;
                squares += wp * wp + wr * wr;
                tie -= (gi * (p + 1) + pi + 1) as i64;
                sp += wp;
                sr += wr;
            }
            let key = (total, squares, tie);
            if best.as_ref().is_none_or(|(k, _, _)| key > *k) {
                best = Some((key, sp, sr));
            }
        }
        let (_, sp, sr) = best.expect("the empty matching always exists");
        tp_p += sp;
        tp_r += sr;
    }
    (tp_p, tp_r, np, ng)
}

/// Precision, recall and F1 from counts with the empty-side conventions.
pub fn oracle_scores(pred: &Treebank, gold: &Treebank, require_polarity: bool) -> (f64, f64, f64) {
    use num_traits::ToPrimitive;
    let (tp_p, tp_r, np, ng) = oracle_counts(pred, gold, require_polarity);
    if np == 0 && ng == 0 {
        return (1.0, 1.0, 1.0);
    }
    let p = if np == 0 {
        BigRational::zero()
    } else {
        tp_p / BigInt::from(np)
    };
    let r = if ng == 0 {
        BigRational::zero()
    } else {
        tp_r / BigInt::from(ng)
    };
    let f = if (&p + &r).is_zero() {
        BigRational::zero()
    } else {
        BigRational::from_integer(BigInt::from(2)) * &p * &r / (&p + &r)
    };
    (p.to_f64().unwrap(), r.to_f64().unwrap(), f.to_f64().unwrap())
}

/// Random two-column lexicon over the generator vocabulary.
pub fn random_lexicon<R: Rng>(rng: &mut R) -> String {
    let targets = ["bueno", "malo", "habitación", "para nada", "muy  bien", "x", "ça"];
    let mut out = String::from("# generated\n");
    for w in WORDS {
        if rng.random_bool(0.5) {
            out.push_str(&format!("{}\t{}\n", w, targets.choose(rng).unwrap()));
        }
    }
    out
}

pub fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

pub fn toy() -> Treebank {
    read_json(&std::fs::read(fixture("toy.json")).unwrap(), "toy").unwrap()
}

pub fn toy_hyperparams() -> Hyperparams {
    let text = std::fs::read_to_string(fixture("toy.toml")).unwrap();
    let mut hp = Hyperparams::default();
    let table: toml::Table = text.parse().unwrap();
    for (k, v) in table {
        match k.as_str() {
            "embedding_dim" => hp.embedding_dim = v.as_integer().unwrap() as usize,
            "recurrent_hidden_dim" => hp.recurrent_hidden_dim = v.as_integer().unwrap() as usize,
            "recurrent_layers" => hp.recurrent_layers = v.as_integer().unwrap() as usize,
            "projection_dim_edge" => hp.projection_dim_edge = v.as_integer().unwrap() as usize,
            "projection_dim_label" => hp.projection_dim_label = v.as_integer().unwrap() as usize,
            "dropout_rate" => hp.dropout_rate = v.as_float().unwrap(),
            "learning_rate" => hp.learning_rate = v.as_float().unwrap(),
            "max_epochs" => hp.max_epochs = v.as_integer().unwrap() as usize,
            "patience" => hp.patience = v.as_integer().unwrap() as usize,
            "batch_size" => hp.batch_size = v.as_integer().unwrap() as usize,
            other => panic!("unexpected key {}", other),
        }
    }
    hp
}
