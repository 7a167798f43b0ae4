//! Structured sentiment analysis as bilexical dependency graph parsing.
//!
//! Opinion tuples (holder, target, expression, polarity) are converted to
//! labeled dependency graphs over the tokens of a sentence, a biaffine
//! graph parser predicts such graphs, and the predicted graphs are decoded
//! back to tuples and scored with the weighted sentiment graph F1.
//!
//! Module map:
//!
//! * [`model`]: sentences, spans, opinions, validation and token alignment.
//! * [`codec`]: tokenization, head-first / head-final graph encodings, the
//!   opinion JSON format and the 10-column graph file format.
//! * [`metrics`]: sentiment graph F1, edge micro F1 and per-element span F1.
//! * [`parser`]: the BiLSTM + biaffine parser, its training loop and the
//!   checkpoint container.
//! * [`treebank_ops`]: treebank merging, experiment plans, word-level
//!   lexicon translation and corpus statistics.

pub mod codec;
pub mod io;
pub mod metrics;
pub mod model;
pub mod parser;
pub mod treebank_ops;

pub use codec::{DepEdge, DepGraph, EncodeMode, Label};
pub use metrics::{EvalReport, Scores};
pub use model::{Opinion, Polarity, Role, Sentence, Span, SpanFragment, Token, Treebank};
