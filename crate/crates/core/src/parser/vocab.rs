use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::codec::Label;
use crate::model::Treebank;

pub const PAD: usize = 0;
pub const UNK: usize = 1;
pub const ROOT: usize = 2;
const RESERVED: [&str; 3] = ["<pad>", "<unk>", "<root>"];

/// Word and label inventories. Words are numbered in order of first
/// occurrence after the reserved entries.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "VocabRepr", into = "VocabRepr")]
pub struct Vocabulary {
    words: Vec<String>,
    index: HashMap<String, usize>,
    labels: Vec<Label>,
}

#[derive(Serialize, Deserialize)]
struct VocabRepr {
    words: Vec<String>,
    labels: Vec<String>,
}

impl From<VocabRepr> for Vocabulary {
    fn from(r: VocabRepr) -> Self {
        let labels = r.labels.iter().filter_map(|l| l.parse().ok()).collect();
        Vocabulary::from_parts(r.words, labels)
    }
}

impl From<Vocabulary> for VocabRepr {
    fn from(v: Vocabulary) -> Self {
        VocabRepr {
            words: v.words,
            labels: v.labels.iter().map(Label::to_string).collect(),
        }
    }
}

impl Vocabulary {
    fn from_parts(words: Vec<String>, labels: Vec<Label>) -> Self {
        let index = words.iter().enumerate().map(|(i, w)| (w.clone(), i)).collect();
        Vocabulary { words, index, labels }
    }

    /// Reserved entries only; used with external embeddings.
    pub fn reserved() -> Self {
        Vocabulary::from_parts(RESERVED.iter().map(|s| s.to_string()).collect(), Label::ALL.to_vec())
    }

    pub fn build(train: &Treebank) -> Self {
        let mut words: Vec<String> = RESERVED.iter().map(|s| s.to_string()).collect();
        let mut index: HashMap<String, usize> = words.iter().enumerate().map(|(i, w)| (w.clone(), i)).collect();
        for tok in train.sentences.iter().flat_map(|s| &s.tokens) {
            if !index.contains_key(&tok.form) {
                index.insert(tok.form.clone(), words.len());
                words.push(tok.form.clone());
            }
        }
        Vocabulary {
            words,
            index,
            labels: Label::ALL.to_vec(),
        }
    }

    pub fn word_id(&self, form: &str) -> usize {
        self.index.get(form).copied().unwrap_or(UNK)
    }

    pub fn word(&self, id: usize) -> Option<&str> {
        self.words.get(id).map(String::as_str)
    }

    pub fn num_words(&self) -> usize {
        self.words.len()
    }

    pub fn labels(&self) -> &[Label] {
        &self.labels
    }

    pub fn label_id(&self, label: Label) -> Option<usize> {
        self.labels.iter().position(|&l| l == label)
    }

    pub fn num_labels(&self) -> usize {
        self.labels.len()
    }
}
