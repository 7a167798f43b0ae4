//! Treebank merging, experiment plans, word-level translation and corpus
//! statistics.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::str::FromStr;

use serde::Serialize;
use thiserror::Error;

use crate::model::{align_span_to_tokens, CoreError, Role, Sentence, Span, Token, Treebank};

#[derive(Debug, Error)]
pub enum OpsError {
    #[error("nothing to merge")]
    NoParts,

    #[error("duplicate sentence id {0:?} after merging")]
    DuplicateId(String),

    #[error("treebank {treebank:?} has no {split} split")]
    MissingSplit { treebank: String, split: &'static str },

    #[error("lexicon line {line}: {message}")]
    MalformedLine { line: usize, message: String },

    #[error("sentence {sent_id}: {source}")]
    Misaligned {
        sent_id: String,
        #[source]
        source: CoreError,
    },
}

impl OpsError {
    pub fn code(&self) -> &'static str {
        match self {
            OpsError::NoParts => "NO_PARTS",
            OpsError::DuplicateId(_) => "DUPLICATE_ID",
            OpsError::MissingSplit { .. } => "MISSING_SPLIT",
            OpsError::MalformedLine { .. } => "MALFORMED_LINE",
            OpsError::Misaligned { .. } => "MISALIGNED_SPAN",
        }
    }
}

/// Concatenate treebanks in order, prefixing every sent_id with
/// `<treebank name>/`.
pub fn merge_treebanks(parts: &[Treebank]) -> Result<Treebank, OpsError> {
    if parts.is_empty() {
        return Err(OpsError::NoParts);
    }
    let mut seen = HashSet::new();
    let mut sentences = Vec::with_capacity(parts.iter().map(Treebank::len).sum());
    for part in parts {
        for s in &part.sentences {
            let mut s = s.clone();
            s.sent_id = format!("{}/{}", part.name, s.sent_id);
            if !seen.insert(s.sent_id.clone()) {
                return Err(OpsError::DuplicateId(s.sent_id));
            }
            sentences.push(s);
        }
    }
    let name = parts.iter().map(|p| p.name.as_str()).collect::<Vec<_>>().join("+");
    Ok(Treebank::new(name, sentences))
}

/// How training and development data are combined across treebanks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MergeStrategy {
    /// One model per treebank, trained and selected on its own splits.
    Single,
    /// One model on all training data, selected on all development data.
    MergeTrainAndDev,
    /// One model per treebank, all trained on the merged training data but
    /// each selected on its own development split.
    MergeTrainSingleDev,
}

impl MergeStrategy {
    pub fn number(self) -> u8 {
        match self {
            MergeStrategy::Single => 1,
            MergeStrategy::MergeTrainAndDev => 2,
            MergeStrategy::MergeTrainSingleDev => 3,
        }
    }
}

impl fmt::Display for MergeStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.number())
    }
}

impl FromStr for MergeStrategy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "1" | "single" => Ok(MergeStrategy::Single),
            "2" | "merge_train_and_dev" => Ok(MergeStrategy::MergeTrainAndDev),
            "3" | "merge_train_single_dev" => Ok(MergeStrategy::MergeTrainSingleDev),
            other => Err(format!("unknown strategy {:?} (expected 1, 2 or 3)", other)),
        }
    }
}

/// The available splits of one named treebank.
#[derive(Debug, Clone, Default)]
pub struct TreebankSplits {
    pub name: String,
    pub train: Option<Treebank>,
    pub dev: Option<Treebank>,
}

#[derive(Debug, Clone)]
pub struct PlanEntry {
    pub model_name: String,
    pub train: Treebank,
    pub dev: Treebank,
}

fn require<'a>(split: &'a Option<Treebank>, name: &str, which: &'static str) -> Result<&'a Treebank, OpsError> {
    split.as_ref().ok_or_else(|| OpsError::MissingSplit {
        treebank: name.to_string(),
        split: which,
    })
}

/// Expand a merge strategy into the list of models to train.
///
/// Strategy 3 trains one model for every treebank that has a development
/// split; treebanks with only a training split still contribute to the
/// merged training data.
pub fn plan_experiment(treebanks: &[TreebankSplits], strategy: MergeStrategy) -> Result<Vec<PlanEntry>, OpsError> {
    if treebanks.is_empty() {
        return Err(OpsError::NoParts);
    }
    let trains = || -> Result<Vec<Treebank>, OpsError> {
        treebanks
            .iter()
            .map(|t| require(&t.train, &t.name, "train").cloned())
            .collect()
    };
    match strategy {
        MergeStrategy::Single => treebanks
            .iter()
            .map(|t| {
                Ok(PlanEntry {
                    model_name: t.name.clone(),
                    train: require(&t.train, &t.name, "train")?.clone(),
                    dev: require(&t.dev, &t.name, "dev")?.clone(),
                })
            })
            .collect(),
        MergeStrategy::MergeTrainAndDev => {
            let devs: Vec<Treebank> = treebanks.iter().filter_map(|t| t.dev.clone()).collect();
            if devs.is_empty() {
                return Err(OpsError::MissingSplit {
                    treebank: treebanks[0].name.clone(),
                    split: "dev",
                });
            }
            Ok(vec![PlanEntry {
                model_name: "merged".to_string(),
                train: merge_treebanks(&trains()?)?,
                dev: merge_treebanks(&devs)?,
            }])
        }
        MergeStrategy::MergeTrainSingleDev => {
            let merged = merge_treebanks(&trains()?)?;
            let entries: Vec<PlanEntry> = treebanks
                .iter()
                .filter_map(|t| {
                    t.dev.as_ref().map(|dev| PlanEntry {
                        model_name: format!("merged-{}", t.name),
                        train: merged.clone(),
                        dev: dev.clone(),
                    })
                })
                .collect();
            if entries.is_empty() {
                return Err(OpsError::MissingSplit {
                    treebank: treebanks[0].name.clone(),
                    split: "dev",
                });
            }
            Ok(entries)
        }
    }
}

/// Word-for-word substitution table.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Lexicon {
    entries: BTreeMap<String, String>,
    case_fold: bool,
    /// Lines whose key overrode an earlier entry.
    pub duplicate_warnings: usize,
}

impl Lexicon {
    pub fn new(case_fold: bool) -> Self {
        Lexicon {
            case_fold,
            ..Lexicon::default()
        }
    }

    fn fold(&self, word: &str) -> String {
        if self.case_fold {
            word.to_lowercase()
        } else {
            word.to_string()
        }
    }

    /// Insert an entry; returns true when it replaced an existing one.
    pub fn insert(&mut self, source: &str, target: &str) -> bool {
        let key = self.fold(source);
        self.entries.insert(key, target.to_string()).is_some()
    }

    pub fn get(&self, word: &str) -> Option<&str> {
        self.entries.get(&self.fold(word)).map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Parse a two-column TSV lexicon. Blank lines and `#` comments are
/// skipped; a repeated key overrides the earlier value and counts one
/// warning.
pub fn load_lexicon(tsv: &[u8], case_fold: bool) -> Result<Lexicon, OpsError> {
    let text = std::str::from_utf8(tsv).map_err(|e| OpsError::MalformedLine {
        line: 1 + tsv[..e.valid_up_to()].iter().filter(|&&b| b == b'\n').count(),
        message: "invalid UTF-8".to_string(),
    })?;
    let mut lex = Lexicon::new(case_fold);
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim_end_matches('\r');
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let malformed = |message: &str| OpsError::MalformedLine {
            line: i + 1,
            message: message.to_string(),
        };
        let mut cols = line.split('\t');
        let (Some(source), Some(target), None) = (cols.next(), cols.next(), cols.next()) else {
            return Err(malformed("expected two tab-separated columns"));
        };
        if source.is_empty() {
            return Err(malformed("empty source word"));
        }
        if target.trim().is_empty() {
            return Err(malformed("empty translation"));
        }
        if lex.insert(source, target.trim()) {
            lex.duplicate_warnings += 1;
        }
    }
    Ok(lex)
}

/// How many tokens a translation run could look up.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct Coverage {
    pub tokens: usize,
    pub translated: usize,
    pub coverage: f64,
}

/// Replace each token by its lexicon entry, one token for one token.
///
/// Multiword translations are joined with `_`; the text is rebuilt from
/// the new forms separated by single spaces and every span is moved onto
/// the new token offsets, so encoded graphs are unchanged.
pub fn translate_word_level(t: &Treebank, lex: &Lexicon) -> Result<(Treebank, Coverage), OpsError> {
    let mut cov = Coverage::default();
    let mut sentences = Vec::with_capacity(t.len());
    for s in &t.sentences {
        let forms: Vec<String> = s
            .tokens
            .iter()
            .map(|tok| {
                cov.tokens += 1;
                match lex.get(&tok.form) {
                    Some(tr) => {
                        cov.translated += 1;
                        tr.split_whitespace().collect::<Vec<_>>().join("_")
                    }
                    None => tok.form.clone(),
                }
            })
            .collect();
        sentences.push(rebuild_sentence(s, forms)?);
    }
    cov.coverage = if cov.tokens == 0 {
        0.0
    } else {
        cov.translated as f64 / cov.tokens as f64
    };
    Ok((Treebank::new(t.name.clone(), sentences), cov))
}

fn rebuild_sentence(s: &Sentence, forms: Vec<String>) -> Result<Sentence, OpsError> {
    let mut text = String::new();
    let mut tokens = Vec::with_capacity(forms.len());
    let mut pos = 0;
    for (i, form) in forms.into_iter().enumerate() {
        if i > 0 {
            text.push(' ');
            pos += 1;
        }
        let len = form.chars().count();
        text.push_str(&form);
        tokens.push(Token {
            index: i + 1,
            form,
            start: pos,
            end: pos + len,
        });
        pos += len;
    }
    let mut out = Sentence {
        sent_id: s.sent_id.clone(),
        text,
        tokens,
        opinions: Vec::with_capacity(s.opinions.len()),
    };
    for op in &s.opinions {
        let mut new_op = op.clone();
        for role in Role::ALL {
            let span = op.span(role);
            let mut fragments = Vec::with_capacity(span.fragments.len());
            for frag in &span.fragments {
                let single = Span::new(vec![frag.clone()]);
                let idx = align_span_to_tokens(&single, s).map_err(|source| OpsError::Misaligned {
                    sent_id: s.sent_id.clone(),
                    source,
                })?;
                if let (Some(&first), Some(&last)) = (idx.first(), idx.last()) {
                    fragments.push(out.token_fragment(first, last));
                }
            }
            *new_op.span_mut(role) = Span::new(fragments);
        }
        out.opinions.push(new_op);
    }
    Ok(out)
}

/// Corpus counts: opinions with a non-empty holder, with a non-empty
/// target, and all opinions as expressions.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct Stats {
    pub sentences: usize,
    pub holders: usize,
    pub targets: usize,
    pub expressions: usize,
}

impl std::ops::Add for Stats {
    type Output = Stats;
    fn add(self, o: Stats) -> Stats {
        Stats {
            sentences: self.sentences + o.sentences,
            holders: self.holders + o.holders,
            targets: self.targets + o.targets,
            expressions: self.expressions + o.expressions,
        }
    }
}

pub fn stats(t: &Treebank) -> Stats {
    let mut st = Stats {
        sentences: t.len(),
        ..Stats::default()
    };
    for op in t.sentences.iter().flat_map(|s| &s.opinions) {
        st.expressions += 1;
        st.holders += usize::from(!op.holder.is_empty());
        st.targets += usize::from(!op.target.is_empty());
    }
    st
}
