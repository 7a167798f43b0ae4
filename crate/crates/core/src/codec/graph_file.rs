//! The 10-column graph file.
//!
//! ```text
//! # sent_id = 1
//! # text = at no cost
//! 1	at	_	_	_	_	_	_	3:exp	_
//! 2	no	_	_	_	_	_	_	3:exp	_
//! 3	cost	_	_	_	_	_	_	0:exp:Positive	_
//!
//! ```
//!
//! Column 9 lists `head:label` pairs sorted by head, joined with `|`, or `_`
//! for a token without heads. The remaining columns are written as `_` and
//! ignored on read.

#![allow(clippy::tabs_in_doc_comments)]

use std::fmt::Write;

use super::{tokenize, CodecError, DepEdge, DepGraph, Label};
use crate::model::{Sentence, Token};

const COLUMNS: usize = 10;

/// One sentence block of a graph file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GraphSentence {
    pub sent_id: String,
    pub text: String,
    pub forms: Vec<String>,
    pub graph: DepGraph,
}

impl GraphSentence {
    pub fn from_sentence(s: &Sentence, graph: DepGraph) -> Self {
        GraphSentence {
            sent_id: s.sent_id.clone(),
            text: s.text.clone(),
            forms: s.tokens.iter().map(|t| t.form.clone()).collect(),
            graph,
        }
    }

    /// Sentence without opinions. Offsets come from the text when its
    /// whitespace tokens agree with the forms; otherwise the text is rebuilt
    /// from the forms joined by single spaces.
    pub fn to_sentence(&self) -> Sentence {
        let tokens = tokenize(&self.text);
        if tokens.iter().map(|t| &t.form).eq(self.forms.iter()) {
            return Sentence {
                sent_id: self.sent_id.clone(),
                text: self.text.clone(),
                tokens,
                opinions: Vec::new(),
            };
        }
        let mut text = String::new();
        let mut tokens: Vec<Token> = Vec::with_capacity(self.forms.len());
        let mut pos = 0;
        for (i, form) in self.forms.iter().enumerate() {
            if i > 0 {
                text.push(' ');
                pos += 1;
            }
            let len = form.chars().count();
            text.push_str(form);
            tokens.push(Token {
                index: i + 1,
                form: form.clone(),
                start: pos,
                end: pos + len,
            });
            pos += len;
        }
        Sentence {
            sent_id: self.sent_id.clone(),
            text,
            tokens,
            opinions: Vec::new(),
        }
    }
}

pub fn write_graph_file(sentences: &[GraphSentence]) -> String {
    let mut out = String::new();
    for s in sentences {
        writeln!(out, "# sent_id = {}", s.sent_id).unwrap();
        writeln!(out, "# text = {}", s.text).unwrap();
        for (i, form) in s.forms.iter().enumerate() {
            let dep = i + 1;
            let heads = s.graph.heads_of(dep);
            let column9 = if heads.is_empty() {
                "_".to_string()
            } else {
                heads
                    .iter()
                    .map(|(h, l)| format!("{}:{}", h, l))
                    .collect::<Vec<_>>()
                    .join("|")
            };
            writeln!(out, "{}\t{}\t_\t_\t_\t_\t_\t_\t{}\t_", dep, form, column9).unwrap();
        }
        out.push('\n');
    }
    out
}

pub fn read_graph_file(text: &str) -> Result<Vec<GraphSentence>, CodecError> {
    let mut sentences = Vec::new();
    let mut block: Option<Block> = None;

    for (lineno, raw) in text.split('\n').enumerate() {
        let line_no = lineno + 1;
        let line = raw.strip_suffix('\r').unwrap_or(raw);
        if line.trim().is_empty() {
            if let Some(b) = block.take() {
                sentences.push(b.finish()?);
            }
            continue;
        }
        let b = block.get_or_insert_with(|| Block::new(line_no));
        if let Some(comment) = line.strip_prefix('#') {
            let comment = comment.trim_start();
            if let Some(v) = comment.strip_prefix("sent_id =") {
                b.sent_id = Some(v.trim_start().to_string());
            } else if let Some(v) = comment.strip_prefix("text =") {
                b.text = Some(v.strip_prefix(' ').unwrap_or(v).to_string());
            }
            continue;
        }
        b.push_row(line_no, line)?;
    }
    if let Some(b) = block.take() {
        sentences.push(b.finish()?);
    }
    Ok(sentences)
}

struct Block {
    first_line: usize,
    sent_id: Option<String>,
    text: Option<String>,
    forms: Vec<String>,
    edges: Vec<(usize, DepEdge)>,
}

impl Block {
    fn new(first_line: usize) -> Self {
        Block {
            first_line,
            sent_id: None,
            text: None,
            forms: Vec::new(),
            edges: Vec::new(),
        }
    }

    fn push_row(&mut self, line: usize, row: &str) -> Result<(), CodecError> {
        let parse = |message: String| CodecError::Parse { line, message };
        let cols: Vec<&str> = row.split('\t').collect();
        if cols.len() != COLUMNS {
            return Err(parse(format!("expected {} columns, found {}", COLUMNS, cols.len())));
        }
        let index: usize = cols[0]
            .parse()
            .map_err(|_| parse(format!("bad token index {:?}", cols[0])))?;
        if index != self.forms.len() + 1 {
            return Err(parse(format!(
                "expected token index {}, found {}",
                self.forms.len() + 1,
                index
            )));
        }
        if cols[1].is_empty() {
            return Err(parse("empty form".to_string()));
        }
        self.forms.push(cols[1].to_string());

        if cols[8] != "_" {
            for pair in cols[8].split('|') {
                let (head, label) = pair
                    .split_once(':')
                    .ok_or_else(|| parse(format!("expected head:label, found {:?}", pair)))?;
                let head: usize = head.parse().map_err(|_| parse(format!("bad head {:?}", head)))?;
                let label: Label = label.parse().map_err(|_| CodecError::Label {
                    line,
                    label: label.to_string(),
                })?;
                self.edges.push((line, DepEdge::new(head, index, label)));
            }
        }
        Ok(())
    }

    fn finish(self) -> Result<GraphSentence, CodecError> {
        let n = self.forms.len();
        if n == 0 {
            return Err(CodecError::Parse {
                line: self.first_line,
                message: "sentence block without token rows".to_string(),
            });
        }
        let mut graph = DepGraph::new(n);
        for (line, e) in self.edges {
            let previous = graph.insert(e).map_err(|err| CodecError::Parse {
                line,
                message: err.to_string(),
            })?;
            if previous.is_some() {
                return Err(CodecError::Parse {
                    line,
                    message: format!("duplicate head {} for token {}", e.head, e.dep),
                });
            }
        }
        let text = self.text.unwrap_or_else(|| self.forms.join(" "));
        Ok(GraphSentence {
            sent_id: self.sent_id.unwrap_or_default(),
            text,
            forms: self.forms,
            graph,
        })
    }
}
