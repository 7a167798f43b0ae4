//! Conversion between opinion tuples and bilexical sentiment graphs.
//!
//! Every opinion becomes a small tree hanging from the virtual root 0: the
//! expression head receives an `exp:<Polarity>` root edge, the remaining
//! expression tokens attach to it with `exp`, and the target and holder
//! spans attach through their own heads with `targ` and `hold`. Which
//! token heads a span is decided by [`EncodeMode`].

mod graph_file;
mod json;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::model::{
    align_span_to_tokens, canonicalize_opinions, CoreError, Opinion, Polarity, Role, Sentence, Span, Token, Treebank,
};

pub use graph_file::{read_graph_file, write_graph_file, GraphSentence};
pub use json::{read_json, write_json};

#[derive(Debug, Error)]
pub enum CodecError {
    #[error("schema error at sentence {sentence:?}, {path}: {message}")]
    Schema {
        sentence: Option<usize>,
        path: String,
        message: String,
    },

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("line {line}: unknown label {label:?}")]
    Label { line: usize, label: String },

    #[error("sentence {sent_id}: edge {head}->{dep} labeled both {existing} and {new}")]
    LabelCollision {
        sent_id: String,
        head: usize,
        dep: usize,
        existing: Label,
        new: Label,
    },

    #[error("sentence {sent_id}: {source}")]
    Misaligned {
        sent_id: String,
        #[source]
        source: CoreError,
    },

    #[error("sentence {sent_id}: opinion {opinion} has an empty expression")]
    EmptyExpression { sent_id: String, opinion: usize },

    #[error("invalid edge {head}->{dep} ({label}) in a graph over {n} tokens")]
    InvalidEdge {
        head: usize,
        dep: usize,
        label: Label,
        n: usize,
    },

    #[error("graph has {graph} nodes but sentence {sent_id} has {tokens} tokens")]
    SizeMismatch {
        sent_id: String,
        graph: usize,
        tokens: usize,
    },
}

impl CodecError {
    pub fn code(&self) -> &'static str {
        match self {
            CodecError::Schema { .. } => "SCHEMA_ERROR",
            CodecError::Parse { .. } => "PARSE_ERROR",
            CodecError::Label { .. } => "LABEL_ERROR",
            CodecError::LabelCollision { .. } => "LABEL_COLLISION",
            CodecError::Misaligned { .. } => "MISALIGNED_SPAN",
            CodecError::EmptyExpression { .. } => "EMPTY_EXPRESSION",
            CodecError::InvalidEdge { .. } => "INVALID_EDGE",
            CodecError::SizeMismatch { .. } => "SIZE_MISMATCH",
        }
    }
}

/// Split `text` on maximal runs of Unicode whitespace.
pub fn tokenize(text: &str) -> Vec<Token> {
    let mut tokens = Vec::new();
    let mut current: Option<(usize, String)> = None;
    let mut pos = 0;
    for c in text.chars() {
        if c.is_whitespace() {
            if let Some((start, form)) = current.take() {
                tokens.push(Token {
                    index: tokens.len() + 1,
                    form,
                    start,
                    end: pos,
                });
            }
        } else {
            current.get_or_insert_with(|| (pos, String::new())).1.push(c);
        }
        pos += 1;
    }
    if let Some((start, form)) = current {
        tokens.push(Token {
            index: tokens.len() + 1,
            form,
            start,
            end: pos,
        });
    }
    tokens
}

/// The closed label inventory.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Label {
    /// Root edge into an expression head, carrying the polarity.
    Root(Polarity),
    Exp,
    Targ,
    Hold,
}

impl Label {
    pub const ALL: [Label; 6] = [
        Label::Root(Polarity::Positive),
        Label::Root(Polarity::Negative),
        Label::Root(Polarity::Neutral),
        Label::Exp,
        Label::Targ,
        Label::Hold,
    ];

    pub fn is_root(self) -> bool {
        matches!(self, Label::Root(_))
    }

    fn for_role(role: Role) -> Label {
        match role {
            Role::Holder => Label::Hold,
            Role::Target => Label::Targ,
            Role::Expression => Label::Exp,
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Label::Root(p) => write!(f, "exp:{}", p),
            Label::Exp => f.write_str("exp"),
            Label::Targ => f.write_str("targ"),
            Label::Hold => f.write_str("hold"),
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("unknown label {0:?}")]
pub struct UnknownLabel(pub String);

impl FromStr for Label {
    type Err = UnknownLabel;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "exp" => Ok(Label::Exp),
            "targ" => Ok(Label::Targ),
            "hold" => Ok(Label::Hold),
            other => other
                .strip_prefix("exp:")
                .and_then(|p| p.parse::<Polarity>().ok())
                .map(Label::Root)
                .ok_or_else(|| UnknownLabel(other.to_string())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct DepEdge {
    /// 0 is the virtual root.
    pub head: usize,
    pub dep: usize,
    pub label: Label,
}

impl DepEdge {
    pub fn new(head: usize, dep: usize, label: Label) -> Self {
        DepEdge { head, dep, label }
    }
}

/// Labeled directed graph over tokens `1..=n` plus the virtual root.
/// Each (head, dep) pair carries at most one label.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct DepGraph {
    n: usize,
    edges: BTreeMap<(usize, usize), Label>,
}

impl DepGraph {
    pub fn new(n: usize) -> Self {
        DepGraph {
            n,
            edges: BTreeMap::new(),
        }
    }

    pub fn from_edges(n: usize, edges: impl IntoIterator<Item = DepEdge>) -> Result<Self, CodecError> {
        let mut g = DepGraph::new(n);
        for e in edges {
            g.check(&e)?;
            g.edges.insert((e.head, e.dep), e.label);
        }
        Ok(g)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    pub fn label(&self, head: usize, dep: usize) -> Option<Label> {
        self.edges.get(&(head, dep)).copied()
    }

    /// Edges ordered by (head, dep).
    pub fn edges(&self) -> impl Iterator<Item = DepEdge> + '_ {
        self.edges
            .iter()
            .map(|(&(head, dep), &label)| DepEdge { head, dep, label })
    }

    pub fn edge_set(&self) -> BTreeSet<DepEdge> {
        self.edges().collect()
    }

    /// Incoming edges of `dep`, ordered by head.
    pub fn heads_of(&self, dep: usize) -> Vec<(usize, Label)> {
        let mut heads: Vec<_> = self
            .edges
            .iter()
            .filter(|(&(_, d), _)| d == dep)
            .map(|(&(h, _), &l)| (h, l))
            .collect();
        heads.sort();
        heads
    }

    fn dependents(&self, head: usize, label: Label) -> impl Iterator<Item = usize> + '_ {
        self.edges
            .range((head, 0)..=(head, usize::MAX))
            .filter(move |(_, &l)| l == label)
            .map(|(&(_, d), _)| d)
    }

    fn check(&self, e: &DepEdge) -> Result<(), CodecError> {
        let ok =
            e.head != e.dep && (1..=self.n).contains(&e.dep) && e.head <= self.n && (e.head == 0) == e.label.is_root();
        if ok {
            Ok(())
        } else {
            Err(CodecError::InvalidEdge {
                head: e.head,
                dep: e.dep,
                label: e.label,
                n: self.n,
            })
        }
    }

    /// Insert an edge. Returns the label previously on the pair, if any.
    pub fn insert(&mut self, e: DepEdge) -> Result<Option<Label>, CodecError> {
        self.check(&e)?;
        Ok(self.edges.insert((e.head, e.dep), e.label))
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash)]
pub enum EncodeMode {
    HeadFirst,
    #[default]
    HeadFinal,
}

impl EncodeMode {
    fn pick_head(self, tokens: &[usize]) -> usize {
        match self {
            EncodeMode::HeadFirst => tokens[0],
            EncodeMode::HeadFinal => tokens[tokens.len() - 1],
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            EncodeMode::HeadFirst => "head_first",
            EncodeMode::HeadFinal => "head_final",
        }
    }
}

impl fmt::Display for EncodeMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EncodeMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "head_first" | "head-first" => Ok(EncodeMode::HeadFirst),
            "head_final" | "head-final" => Ok(EncodeMode::HeadFinal),
            other => Err(format!("unknown encoding mode {:?}", other)),
        }
    }
}

/// Encode the opinions of `s` as a sentiment graph.
///
/// Two opinions that force different labels onto the same token pair are a
/// `LABEL_COLLISION`; with `force` the later opinion overwrites the earlier
/// label instead. Edges that would be self-loops (a token shared between two
/// roles of one opinion) are skipped.
pub fn encode(s: &Sentence, mode: EncodeMode, force: bool) -> Result<DepGraph, CodecError> {
    let mut g = DepGraph::new(s.tokens.len());
    for (oi, op) in s.opinions.iter().enumerate() {
        let align = |span: &Span| {
            align_span_to_tokens(span, s).map_err(|source| CodecError::Misaligned {
                sent_id: s.sent_id.clone(),
                source,
            })
        };
        let expression = align(&op.expression)?;
        if expression.is_empty() {
            return Err(CodecError::EmptyExpression {
                sent_id: s.sent_id.clone(),
                opinion: oi,
            });
        }
        let eh = mode.pick_head(&expression);
        let mut edges = vec![DepEdge::new(0, eh, Label::Root(op.polarity))];
        edges.extend(
            expression
                .iter()
                .filter(|&&e| e != eh)
                .map(|&e| DepEdge::new(eh, e, Label::Exp)),
        );
        for role in [Role::Target, Role::Holder] {
            let tokens = align(op.span(role))?;
            if tokens.is_empty() {
                continue;
            }
            let label = Label::for_role(role);
            let head = mode.pick_head(&tokens);
            edges.push(DepEdge::new(eh, head, label));
            edges.extend(
                tokens
                    .iter()
                    .filter(|&&t| t != head)
                    .map(|&t| DepEdge::new(head, t, label)),
            );
        }

        for e in edges.into_iter().filter(|e| e.head != e.dep) {
            match g.label(e.head, e.dep) {
                Some(existing) if existing != e.label && !force => {
                    return Err(CodecError::LabelCollision {
                        sent_id: s.sent_id.clone(),
                        head: e.head,
                        dep: e.dep,
                        existing,
                        new: e.label,
                    });
                }
                _ => {
                    g.insert(e)?;
                }
            }
        }
    }
    Ok(g)
}

/// Edges that decode could not attribute to any opinion.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DecodeWarnings {
    pub dangling: Vec<DepEdge>,
}

impl DecodeWarnings {
    pub fn dangling_count(&self) -> usize {
        self.dangling.len()
    }
}

/// Recover opinion tuples from a sentiment graph.
///
/// Each root edge yields one opinion per combination of its target heads and
/// holder heads; a root without target (holder) heads gets an empty target
/// (holder). Edges not reachable this way are dropped and reported.
pub fn decode(g: &DepGraph, s: &Sentence) -> Result<(Vec<Opinion>, DecodeWarnings), CodecError> {
    if g.n() != s.tokens.len() {
        return Err(CodecError::SizeMismatch {
            sent_id: s.sent_id.clone(),
            graph: g.n(),
            tokens: s.tokens.len(),
        });
    }

    let mut used: BTreeSet<(usize, usize)> = BTreeSet::new();
    let mut opinions = Vec::new();

    for root in g.edges().filter(|e| e.head == 0) {
        let Label::Root(polarity) = root.label else {
            unreachable!("root edges carry exp:<polarity> labels");
        };
        let eh = root.dep;
        used.insert((0, eh));

        let mut expression = vec![eh];
        for d in g.dependents(eh, Label::Exp) {
            used.insert((eh, d));
            expression.push(d);
        }

        let mut role_spans = |label: Label| -> Vec<Span> {
            let mut spans = Vec::new();
            let heads: Vec<usize> = g.dependents(eh, label).collect();
            for h in heads {
                used.insert((eh, h));
                let mut tokens = vec![h];
                for d in g.dependents(h, label) {
                    used.insert((h, d));
                    tokens.push(d);
                }
                spans.push(tokens_to_span(&tokens, s));
            }
            if spans.is_empty() {
                spans.push(Span::empty());
            }
            spans
        };
        let targets = role_spans(Label::Targ);
        let holders = role_spans(Label::Hold);
        let expression = tokens_to_span(&expression, s);

        for target in &targets {
            for holder in &holders {
                opinions.push(Opinion::new(
                    holder.clone(),
                    target.clone(),
                    expression.clone(),
                    polarity,
                ));
            }
        }
    }

    let warnings = DecodeWarnings {
        dangling: g.edges().filter(|e| !used.contains(&(e.head, e.dep))).collect(),
    };
    Ok((canonicalize_opinions(&opinions), warnings))
}

/// One fragment per maximal run of consecutive token indices.
fn tokens_to_span(tokens: &[usize], s: &Sentence) -> Span {
    let mut sorted = tokens.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    let mut fragments = Vec::new();
    let mut iter = sorted.into_iter().peekable();
    while let Some(first) = iter.next() {
        let mut last = first;
        while iter.peek() == Some(&(last + 1)) {
            last = iter.next().unwrap();
        }
        fragments.push(s.token_fragment(first, last));
    }
    Span::new(fragments)
}

/// Encode every sentence of a treebank.
pub fn encode_treebank(tb: &Treebank, mode: EncodeMode, force: bool) -> Result<Vec<DepGraph>, CodecError> {
    tb.sentences.iter().map(|s| encode(s, mode, force)).collect()
}

/// Encode every sentence of a treebank and render the graph file.
pub fn write_treebank_graph(tb: &Treebank, mode: EncodeMode, force: bool) -> Result<String, CodecError> {
    let sentences = tb
        .sentences
        .iter()
        .map(|s| encode(s, mode, force).map(|g| GraphSentence::from_sentence(s, g)))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(write_graph_file(&sentences))
}

/// Parse a graph file and decode every sentence into opinions. Also returns
/// the number of dangling edges dropped.
pub fn read_treebank_graph(text: &str, name: &str) -> Result<(Treebank, usize), CodecError> {
    let graphs = read_graph_file(text)?;
    let mut sentences = Vec::with_capacity(graphs.len());
    let mut dangling = 0;
    for g in &graphs {
        let mut s = g.to_sentence();
        let (opinions, warnings) = decode(&g.graph, &s)?;
        dangling += warnings.dangling_count();
        s.opinions = opinions;
        sentences.push(s);
    }
    Ok((Treebank::new(name, sentences), dangling))
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::model::{validate_sentence, SpanFragment};

    pub const FIG1: &str = "I got an upgrade to Executive suite at no cost";

    pub fn fig1() -> Sentence {
        let op = Opinion::new(
            Span::new(vec![SpanFragment::new("I", 0, 1)]),
            Span::new(vec![SpanFragment::new("an upgrade to Executive suite", 6, 35)]),
            Span::new(vec![
                SpanFragment::new("got", 2, 5),
                SpanFragment::new("at no cost", 36, 46),
            ]),
            Polarity::Positive,
        );
        Sentence::new("fig1", FIG1, vec![op])
    }

    fn e(h: usize, d: usize, l: &str) -> DepEdge {
        DepEdge::new(h, d, l.parse().unwrap())
    }

    pub fn fig1_head_final_edges() -> BTreeSet<DepEdge> {
        [
            e(0, 10, "exp:Positive"),
            e(10, 2, "exp"),
            e(10, 8, "exp"),
            e(10, 9, "exp"),
            e(10, 7, "targ"),
            e(7, 3, "targ"),
            e(7, 4, "targ"),
            e(7, 5, "targ"),
            e(7, 6, "targ"),
            e(10, 1, "hold"),
        ]
        .into_iter()
        .collect()
    }

    #[test]
    fn tokenize_examples() {
        assert!(tokenize("").is_empty());
        assert!(tokenize(" \t\n").is_empty());
        let toks = tokenize("at no cost");
        let got: Vec<_> = toks.iter().map(|t| (t.form.as_str(), t.start, t.end)).collect();
        assert_eq!(got, vec![("at", 0, 2), ("no", 3, 5), ("cost", 6, 10)]);
        let toks = tokenize(FIG1);
        assert_eq!(toks.len(), 10);
        assert_eq!((toks[0].form.as_str(), toks[0].start, toks[0].end), ("I", 0, 1));
        assert_eq!((toks[9].form.as_str(), toks[9].start, toks[9].end), ("cost", 42, 46));
    }

    #[test]
    fn tokenize_unicode_whitespace_runs() {
        let toks = tokenize("  añb\u{00A0}\u{2003} c ");
        let got: Vec<_> = toks
            .iter()
            .map(|t| (t.form.as_str(), t.start, t.end, t.index))
            .collect();
        assert_eq!(got, vec![("añb", 2, 5, 1), ("c", 8, 9, 2)]);
    }

    #[test]
    fn labels_parse_and_print() {
        for l in Label::ALL {
            assert_eq!(l.to_string().parse::<Label>().unwrap(), l);
        }
        assert!("exp:Mixed".parse::<Label>().is_err());
        assert!("target".parse::<Label>().is_err());
    }

    #[test]
    fn graph_rejects_invalid_edges() {
        let mut g = DepGraph::new(3);
        assert!(g.insert(e(2, 2, "exp")).is_err());
        assert!(g.insert(e(1, 0, "exp")).is_err());
        assert!(g.insert(e(1, 4, "exp")).is_err());
        assert!(g.insert(e(0, 1, "targ")).is_err());
        assert!(g.insert(e(2, 1, "exp:Neutral")).is_err());
        assert_eq!(g.insert(e(0, 1, "exp:Neutral")).unwrap(), None);
        assert_eq!(
            g.insert(e(0, 1, "exp:Negative")).unwrap(),
            Some(Label::Root(Polarity::Neutral))
        );
    }

    #[test]
    fn encode_without_opinions() {
        let s = Sentence::new("x", "nothing to see", vec![]);
        assert!(encode(&s, EncodeMode::HeadFinal, false).unwrap().is_empty());
    }

    #[test]
    fn encode_figure_one_head_final() {
        let s = fig1();
        assert!(validate_sentence(&s).is_empty());
        let g = encode(&s, EncodeMode::HeadFinal, false).unwrap();
        assert_eq!(g.edge_set(), fig1_head_final_edges());
    }

    #[test]
    fn encode_figure_one_head_first() {
        let s = fig1();
        let g = encode(&s, EncodeMode::HeadFirst, false).unwrap();
        let expected: BTreeSet<_> = [
            e(0, 2, "exp:Positive"),
            e(2, 8, "exp"),
            e(2, 9, "exp"),
            e(2, 10, "exp"),
            e(2, 3, "targ"),
            e(3, 4, "targ"),
            e(3, 5, "targ"),
            e(3, 6, "targ"),
            e(3, 7, "targ"),
            e(2, 1, "hold"),
        ]
        .into_iter()
        .collect();
        assert_eq!(g.edge_set(), expected);
    }

    #[test]
    fn decode_figure_one() {
        let s = fig1();
        let g = DepGraph::from_edges(10, fig1_head_final_edges()).unwrap();
        let (ops, warnings) = decode(&g, &s).unwrap();
        assert!(warnings.dangling.is_empty());
        assert_eq!(ops, s.opinions);
        let op = &ops[0];
        assert_eq!(op.holder.fragments[0].text, "I");
        assert_eq!(op.target.fragments[0].text, "an upgrade to Executive suite");
        let expr: Vec<_> = op.expression.fragments.iter().map(|f| f.text.as_str()).collect();
        assert_eq!(expr, vec!["got", "at no cost"]);
        assert_eq!(op.polarity, Polarity::Positive);
    }

    #[test]
    fn decode_empty_graph() {
        let s = fig1();
        let (ops, w) = decode(&DepGraph::new(10), &s).unwrap();
        assert!(ops.is_empty());
        assert!(w.dangling.is_empty());
    }

    #[test]
    fn decode_drops_dangling_edges() {
        let s = fig1();
        let mut edges = fig1_head_final_edges();
        edges.insert(e(4, 5, "hold"));
        edges.insert(e(3, 1, "exp"));
        let g = DepGraph::from_edges(10, edges).unwrap();
        let (ops, w) = decode(&g, &s).unwrap();
        assert_eq!(ops, s.opinions);
        assert_eq!(w.dangling, vec![e(3, 1, "exp"), e(4, 5, "hold")]);
    }

    #[test]
    fn decode_cross_product_of_targets_and_holders() {
        let s = Sentence::new("x", "a b c d e", vec![]);
        let g = DepGraph::from_edges(
            5,
            [
                e(0, 3, "exp:Negative"),
                e(3, 1, "targ"),
                e(3, 2, "targ"),
                e(3, 4, "hold"),
                e(3, 5, "hold"),
            ],
        )
        .unwrap();
        let (ops, _) = decode(&g, &s).unwrap();
        assert_eq!(ops.len(), 4);
    }

    #[test]
    fn decode_rejects_size_mismatch() {
        let s = fig1();
        let err = decode(&DepGraph::new(3), &s).unwrap_err();
        assert_eq!(err.code(), "SIZE_MISMATCH");
    }

    #[test]
    fn label_collision_and_force() {
        // Two opinions: token 2 is an expression dependent in the first and a
        // target head in the second, both hanging from token 3.
        let frag = |s: &Sentence, a, b| Span::new(vec![s.token_fragment(a, b)]);
        let mut s = Sentence::new("x", "a b c d", vec![]);
        let op1 = Opinion::new(Span::empty(), Span::empty(), frag(&s, 2, 3), Polarity::Positive);
        let op2 = Opinion::new(Span::empty(), frag(&s, 2, 2), frag(&s, 3, 3), Polarity::Positive);
        s.opinions = vec![op1, op2];
        let err = encode(&s, EncodeMode::HeadFinal, false).unwrap_err();
        assert_eq!(err.code(), "LABEL_COLLISION");
        let g = encode(&s, EncodeMode::HeadFinal, true).unwrap();
        assert_eq!(g.label(3, 2), Some(Label::Targ));
    }

    #[test]
    fn misaligned_span_fails_encoding() {
        let mut s = fig1();
        s.opinions[0].target = Span::new(vec![SpanFragment::new("pgrade", 10, 16)]);
        assert_eq!(
            encode(&s, EncodeMode::HeadFinal, false).unwrap_err().code(),
            "MISALIGNED_SPAN"
        );
    }
}
