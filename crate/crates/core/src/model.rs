//! Sentences, opinion tuples and their invariants.
//!
//! Character offsets are 0-based, end-exclusive and counted in Unicode
//! scalar values, never bytes.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

/// Intensity assumed when a source file does not carry one.
pub const DEFAULT_INTENSITY: &str = "Average";

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CoreError {
    #[error("fragment {start}:{end} cuts through token {token}")]
    MisalignedSpan { start: usize, end: usize, token: usize },

    #[error("unknown polarity: {0:?}")]
    UnknownPolarity(String),
}

impl CoreError {
    pub fn code(&self) -> &'static str {
        match self {
            CoreError::MisalignedSpan { .. } => "MISALIGNED_SPAN",
            CoreError::UnknownPolarity(_) => "UNKNOWN_POLARITY",
        }
    }
}

/// Number of Unicode scalar values in `text`.
pub fn char_len(text: &str) -> usize {
    text.chars().count()
}

/// Slice `text` by character offsets. Returns `None` when the range is
/// out of bounds or reversed.
pub fn char_slice(text: &str, start: usize, end: usize) -> Option<&str> {
    if start > end {
        return None;
    }
    let mut indices = text.char_indices().map(|(b, _)| b).chain(Some(text.len()));
    let byte_start = indices.nth(start)?;
    let byte_end = if end == start {
        byte_start
    } else {
        indices.nth(end - start - 1)?
    };
    Some(&text[byte_start..byte_end])
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Token {
    /// 1-based position in the sentence.
    pub index: usize,
    pub form: String,
    pub start: usize,
    pub end: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SpanFragment {
    pub start: usize,
    pub end: usize,
    pub text: String,
}

impl SpanFragment {
    pub fn new(text: impl Into<String>, start: usize, end: usize) -> Self {
        SpanFragment {
            start,
            end,
            text: text.into(),
        }
    }

    /// Build a fragment whose text is taken from the sentence text.
    pub fn from_offsets(sentence_text: &str, start: usize, end: usize) -> Option<Self> {
        char_slice(sentence_text, start, end).map(|t| SpanFragment::new(t, start, end))
    }
}

/// A possibly discontinuous span. No fragments means the element is absent.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Span {
    pub fragments: Vec<SpanFragment>,
}

impl Span {
    pub fn empty() -> Self {
        Span::default()
    }

    pub fn new(fragments: Vec<SpanFragment>) -> Self {
        Span { fragments }
    }

    pub fn is_empty(&self) -> bool {
        self.fragments.is_empty()
    }

    pub fn first_start(&self) -> Option<usize> {
        self.fragments.iter().map(|f| f.start).min()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Polarity {
    Positive,
    Negative,
    Neutral,
}

impl Polarity {
    pub const ALL: [Polarity; 3] = [Polarity::Positive, Polarity::Negative, Polarity::Neutral];

    pub fn as_str(self) -> &'static str {
        match self {
            Polarity::Positive => "Positive",
            Polarity::Negative => "Negative",
            Polarity::Neutral => "Neutral",
        }
    }
}

impl fmt::Display for Polarity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Polarity {
    type Err = CoreError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "Positive" => Ok(Polarity::Positive),
            "Negative" => Ok(Polarity::Negative),
            "Neutral" => Ok(Polarity::Neutral),
            other => Err(CoreError::UnknownPolarity(other.to_string())),
        }
    }
}

/// The three span-valued elements of an opinion.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Role {
    Holder,
    Target,
    Expression,
}

impl Role {
    pub const ALL: [Role; 3] = [Role::Holder, Role::Target, Role::Expression];

    pub fn as_str(self) -> &'static str {
        match self {
            Role::Holder => "holder",
            Role::Target => "target",
            Role::Expression => "expression",
        }
    }
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Opinion {
    pub holder: Span,
    pub target: Span,
    pub expression: Span,
    pub polarity: Polarity,
    /// Carried through untouched; never encoded into graphs.
    pub intensity: String,
}

impl Opinion {
    pub fn new(holder: Span, target: Span, expression: Span, polarity: Polarity) -> Self {
        Opinion {
            holder,
            target,
            expression,
            polarity,
            intensity: DEFAULT_INTENSITY.to_string(),
        }
    }

    pub fn span(&self, role: Role) -> &Span {
        match role {
            Role::Holder => &self.holder,
            Role::Target => &self.target,
            Role::Expression => &self.expression,
        }
    }

    pub fn span_mut(&mut self, role: Role) -> &mut Span {
        match role {
            Role::Holder => &mut self.holder,
            Role::Target => &mut self.target,
            Role::Expression => &mut self.expression,
        }
    }

    fn canonical_cmp(&self, other: &Self) -> Ordering {
        self.expression
            .first_start()
            .cmp(&other.expression.first_start())
            .then_with(|| self.target.first_start().cmp(&other.target.first_start()))
            .then_with(|| self.holder.first_start().cmp(&other.holder.first_start()))
            .then_with(|| self.polarity.cmp(&other.polarity))
            .then_with(|| self.expression.cmp(&other.expression))
            .then_with(|| self.target.cmp(&other.target))
            .then_with(|| self.holder.cmp(&other.holder))
            .then_with(|| self.intensity.cmp(&other.intensity))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Sentence {
    pub sent_id: String,
    pub text: String,
    pub tokens: Vec<Token>,
    pub opinions: Vec<Opinion>,
}

impl Sentence {
    /// Build a sentence with whitespace tokens computed from `text`.
    pub fn new(sent_id: impl Into<String>, text: impl Into<String>, opinions: Vec<Opinion>) -> Self {
        let text = text.into();
        let tokens = crate::codec::tokenize(&text);
        Sentence {
            sent_id: sent_id.into(),
            text,
            tokens,
            opinions,
        }
    }

    /// Fragment over the given character range of this sentence's text.
    pub fn fragment(&self, start: usize, end: usize) -> Option<SpanFragment> {
        SpanFragment::from_offsets(&self.text, start, end)
    }

    /// Fragment covering the tokens `first..=last` (1-based indices).
    pub fn token_fragment(&self, first: usize, last: usize) -> SpanFragment {
        let start = self.tokens[first - 1].start;
        let end = self.tokens[last - 1].end;
        self.fragment(start, end)
            .expect("token offsets lie within the sentence text")
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Treebank {
    pub name: String,
    pub sentences: Vec<Sentence>,
}

impl Treebank {
    pub fn new(name: impl Into<String>, sentences: Vec<Sentence>) -> Self {
        Treebank {
            name: name.into(),
            sentences,
        }
    }

    pub fn len(&self) -> usize {
        self.sentences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sentences.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ViolationCode {
    EmptySentId,
    TokenIndex,
    TokenOffsets,
    TokenFormMismatch,
    TokenOrder,
    OffsetOutOfRange,
    EmptyFragment,
    FragmentTextMismatch,
    FragmentOrder,
    EmptyExpression,
    MisalignedSpan,
}

impl ViolationCode {
    pub fn as_str(self) -> &'static str {
        match self {
            ViolationCode::EmptySentId => "EMPTY_SENT_ID",
            ViolationCode::TokenIndex => "TOKEN_INDEX",
            ViolationCode::TokenOffsets => "TOKEN_OFFSETS",
            ViolationCode::TokenFormMismatch => "TOKEN_FORM_MISMATCH",
            ViolationCode::TokenOrder => "TOKEN_ORDER",
            ViolationCode::OffsetOutOfRange => "OFFSET_OUT_OF_RANGE",
            ViolationCode::EmptyFragment => "EMPTY_FRAGMENT",
            ViolationCode::FragmentTextMismatch => "FRAGMENT_TEXT_MISMATCH",
            ViolationCode::FragmentOrder => "FRAGMENT_ORDER",
            ViolationCode::EmptyExpression => "EMPTY_EXPRESSION",
            ViolationCode::MisalignedSpan => "MISALIGNED_SPAN",
        }
    }
}

impl fmt::Display for ViolationCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub code: ViolationCode,
    /// Path to the offending item, e.g. `opinion[0].expression.fragment[1]`.
    pub location: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_empty(&self) -> bool {
        self.violations.is_empty()
    }

    fn push(&mut self, code: ViolationCode, location: impl Into<String>) {
        self.violations.push(Violation {
            code,
            location: location.into(),
        });
    }
}

/// Check every sentence invariant. Violations are returned as data.
pub fn validate_sentence(s: &Sentence) -> ValidationReport {
    let mut report = ValidationReport::default();
    let text_len = char_len(&s.text);

    if s.sent_id.is_empty() {
        report.push(ViolationCode::EmptySentId, "sent_id");
    }

    for (i, tok) in s.tokens.iter().enumerate() {
        let loc = format!("token[{}]", i);
        if tok.index != i + 1 {
            report.push(ViolationCode::TokenIndex, &loc);
        }
        if tok.start >= tok.end || tok.end > text_len {
            report.push(ViolationCode::TokenOffsets, &loc);
        } else if char_slice(&s.text, tok.start, tok.end) != Some(tok.form.as_str()) {
            report.push(ViolationCode::TokenFormMismatch, &loc);
        }
        if i > 0 && s.tokens[i - 1].end > tok.start {
            report.push(ViolationCode::TokenOrder, &loc);
        }
    }

    for (oi, op) in s.opinions.iter().enumerate() {
        if op.expression.is_empty() {
            report.push(ViolationCode::EmptyExpression, format!("opinion[{}].expression", oi));
        }
        for role in Role::ALL {
            let span = op.span(role);
            for (fi, frag) in span.fragments.iter().enumerate() {
                let loc = format!("opinion[{}].{}.fragment[{}]", oi, role, fi);
                if frag.end > text_len || frag.start > text_len {
                    report.push(ViolationCode::OffsetOutOfRange, loc);
                    continue;
                }
                if frag.start >= frag.end {
                    report.push(ViolationCode::EmptyFragment, loc);
                    continue;
                }
                if fi > 0 && span.fragments[fi - 1].end > frag.start {
                    report.push(ViolationCode::FragmentOrder, &loc);
                }
                if char_slice(&s.text, frag.start, frag.end) != Some(frag.text.as_str()) {
                    report.push(ViolationCode::FragmentTextMismatch, &loc);
                }
                if !fragment_is_token_union(frag, &s.tokens) {
                    report.push(ViolationCode::MisalignedSpan, loc);
                }
            }
        }
    }

    report
}

/// True when `[start, end)` is exactly the union of a run of token ranges.
fn fragment_is_token_union(frag: &SpanFragment, tokens: &[Token]) -> bool {
    let covered: Vec<&Token> = tokens
        .iter()
        .filter(|t| t.start < frag.end && t.end > frag.start)
        .collect();
    match (covered.first(), covered.last()) {
        (Some(first), Some(last)) => {
            first.start == frag.start
                && last.end == frag.end
                && covered.iter().all(|t| t.start >= frag.start && t.end <= frag.end)
        }
        _ => false,
    }
}

/// Indices (1-based, strictly increasing) of the tokens covered by `span`.
pub fn align_span_to_tokens(span: &Span, s: &Sentence) -> Result<Vec<usize>, CoreError> {
    let mut indices = Vec::new();
    for frag in &span.fragments {
        for tok in &s.tokens {
            if tok.end <= frag.start || tok.start >= frag.end {
                continue;
            }
            if frag.start <= tok.start && tok.end <= frag.end {
                indices.push(tok.index);
            } else {
                return Err(CoreError::MisalignedSpan {
                    start: frag.start,
                    end: frag.end,
                    token: tok.index,
                });
            }
        }
    }
    indices.sort_unstable();
    indices.dedup();
    Ok(indices)
}

/// Sort fragments, sort opinions into canonical order and drop exact
/// duplicates. Idempotent.
pub fn canonicalize_opinions(ops: &[Opinion]) -> Vec<Opinion> {
    let mut out: Vec<Opinion> = ops
        .iter()
        .cloned()
        .map(|mut op| {
            for role in Role::ALL {
                op.span_mut(role).fragments.sort();
            }
            op
        })
        .collect();
    out.sort_by(Opinion::canonical_cmp);
    out.dedup();
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) const FIG1: &str = "I got an upgrade to Executive suite at no cost";

    fn frag(text: &str, start: usize, end: usize) -> SpanFragment {
        SpanFragment::new(text, start, end)
    }

    fn fig1() -> Sentence {
        let op = Opinion::new(
            Span::new(vec![frag("I", 0, 1)]),
            Span::new(vec![frag("an upgrade to Executive suite", 6, 35)]),
            Span::new(vec![frag("got", 2, 5), frag("at no cost", 36, 46)]),
            Polarity::Positive,
        );
        Sentence::new("fig1", FIG1, vec![op])
    }

    #[test]
    fn char_slicing_counts_scalar_values() {
        assert_eq!(char_slice("añb", 1, 2), Some("ñ"));
        assert_eq!(char_slice("añb", 0, 3), Some("añb"));
        assert_eq!(char_slice("añb", 3, 3), Some(""));
        assert_eq!(char_slice("añb", 2, 4), None);
        assert_eq!(char_slice("añb", 2, 1), None);
    }

    #[test]
    fn sentence_without_opinions_is_valid() {
        let s = Sentence::new("a", "just some words", vec![]);
        assert!(validate_sentence(&s).is_empty());
    }

    #[test]
    fn figure_one_is_valid() {
        assert!(validate_sentence(&fig1()).is_empty());
    }

    #[test]
    fn out_of_range_fragment_reported_once() {
        let mut s = fig1();
        s.opinions[0].holder = Span::new(vec![frag("cost!", 42, 47)]);
        let report = validate_sentence(&s);
        assert_eq!(report.violations.len(), 1, "{:?}", report);
        assert_eq!(report.violations[0].code, ViolationCode::OffsetOutOfRange);
        assert_eq!(report.violations[0].location, "opinion[0].holder.fragment[0]");
    }

    #[test]
    fn mid_token_fragment_is_a_violation() {
        let mut s = fig1();
        s.opinions[0].target = Span::new(vec![frag("pgrade", 10, 16)]);
        let codes: Vec<_> = validate_sentence(&s).violations.iter().map(|v| v.code).collect();
        assert_eq!(codes, vec![ViolationCode::MisalignedSpan]);
    }

    #[test]
    fn empty_expression_and_bad_text() {
        let mut s = fig1();
        s.opinions[0].expression = Span::empty();
        s.opinions[0].holder = Span::new(vec![frag("You", 0, 1)]);
        let codes: Vec<_> = validate_sentence(&s).violations.iter().map(|v| v.code).collect();
        assert_eq!(
            codes,
            vec![ViolationCode::EmptyExpression, ViolationCode::FragmentTextMismatch]
        );
    }

    #[test]
    fn token_invariants_checked() {
        let mut s = Sentence::new("x", "ab cd", vec![]);
        s.tokens[1].start = 1;
        s.tokens[1].form = "b cd".into();
        let codes: Vec<_> = validate_sentence(&s).violations.iter().map(|v| v.code).collect();
        assert_eq!(codes, vec![ViolationCode::TokenOrder]);
        s.sent_id.clear();
        assert_eq!(validate_sentence(&s).violations[0].code, ViolationCode::EmptySentId);
    }

    #[test]
    fn align_empty_span() {
        assert_eq!(
            align_span_to_tokens(&Span::empty(), &fig1()).unwrap(),
            Vec::<usize>::new()
        );
    }

    #[test]
    fn align_figure_one_target() {
        let s = fig1();
        let got = align_span_to_tokens(&s.opinions[0].target, &s).unwrap();
        assert_eq!(got, vec![3, 4, 5, 6, 7]);
        let expr = align_span_to_tokens(&s.opinions[0].expression, &s).unwrap();
        assert_eq!(expr, vec![2, 8, 9, 10]);
    }

    #[test]
    fn align_rejects_mid_token_boundary() {
        let s = fig1();
        let span = Span::new(vec![frag("pgrade", 10, 16)]);
        let err = align_span_to_tokens(&span, &s).unwrap_err();
        assert_eq!(err.code(), "MISALIGNED_SPAN");
        assert_eq!(
            err,
            CoreError::MisalignedSpan {
                start: 10,
                end: 16,
                token: 4
            }
        );
    }

    #[test]
    fn polarity_closed_set() {
        assert_eq!("Negative".parse::<Polarity>().unwrap(), Polarity::Negative);
        assert!("positive".parse::<Polarity>().is_err());
        assert!("Mixed".parse::<Polarity>().is_err());
    }

    #[test]
    fn canonicalize_contracts() {
        assert!(canonicalize_opinions(&[]).is_empty());
        let s = fig1();
        let a = s.opinions[0].clone();
        let mut b = a.clone();
        b.expression = Span::new(vec![frag("cost", 42, 46)]);
        assert_eq!(canonicalize_opinions(&[b.clone(), a.clone()]), vec![a.clone(), b]);
        assert_eq!(canonicalize_opinions(&[a.clone(), a.clone()]), vec![a]);
    }

    #[test]
    fn canonicalize_sorts_fragments() {
        let s = fig1();
        let mut op = s.opinions[0].clone();
        op.expression.fragments.reverse();
        let out = canonicalize_opinions(&[op]);
        assert_eq!(out[0].expression, s.opinions[0].expression);
    }
}
