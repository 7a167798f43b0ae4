//! Opinion JSON in the shared-task layout.
//!
//! ```json
//! [{"sent_id": "1", "text": "...", "opinions": [
//!   {"Source": [["I"], ["0:1"]], "Target": [[], []],
//!    "Polar_expression": [["got", "at no cost"], ["2:5", "36:46"]],
//!    "Polarity": "Positive", "Intensity": "Average"}]}]
//! ```

use serde::Serialize;
use serde_json::Value;

use super::CodecError;
use crate::model::{Opinion, Polarity, Sentence, Span, SpanFragment, Treebank, DEFAULT_INTENSITY};

fn schema(sentence: Option<usize>, path: impl Into<String>, message: impl Into<String>) -> CodecError {
    CodecError::Schema {
        sentence,
        path: path.into(),
        message: message.into(),
    }
}

/// Parse a treebank. Tokens are computed by whitespace tokenization of each
/// sentence text.
pub fn read_json(bytes: &[u8], name: &str) -> Result<Treebank, CodecError> {
    let root: Value = serde_json::from_slice(bytes).map_err(|e| schema(None, "$", e.to_string()))?;
    let items = root
        .as_array()
        .ok_or_else(|| schema(None, "$", "expected an array of sentences"))?;

    let sentences = items
        .iter()
        .enumerate()
        .map(|(i, item)| read_sentence(i, item))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Treebank::new(name, sentences))
}

fn read_sentence(i: usize, item: &Value) -> Result<Sentence, CodecError> {
    let obj = item
        .as_object()
        .ok_or_else(|| schema(Some(i), format!("[{}]", i), "expected an object"))?;
    let string = |key: &str| -> Result<String, CodecError> {
        obj.get(key)
            .and_then(Value::as_str)
            .map(str::to_string)
            .ok_or_else(|| schema(Some(i), format!("[{}].{}", i, key), "expected a string"))
    };
    let sent_id = string("sent_id")?;
    let text = string("text")?;
    let opinions = match obj.get("opinions") {
        Some(Value::Array(ops)) => ops
            .iter()
            .enumerate()
            .map(|(j, op)| read_opinion(i, &format!("[{}].opinions[{}]", i, j), op))
            .collect::<Result<Vec<_>, _>>()?,
        Some(Value::Null) | None => Vec::new(),
        Some(_) => {
            return Err(schema(Some(i), format!("[{}].opinions", i), "expected an array"));
        }
    };
    Ok(Sentence::new(sent_id, text, opinions))
}

fn read_opinion(i: usize, path: &str, value: &Value) -> Result<Opinion, CodecError> {
    let obj = value
        .as_object()
        .ok_or_else(|| schema(Some(i), path, "expected an object"))?;
    let span = |key: &str| -> Result<Span, CodecError> {
        let key_path = format!("{}.{}", path, key);
        match obj.get(key) {
            Some(v) => read_span(i, &key_path, v),
            None => Err(schema(Some(i), key_path, "missing key")),
        }
    };
    let holder = span("Source")?;
    let target = span("Target")?;
    let expression = span("Polar_expression")?;

    let polarity_path = format!("{}.Polarity", path);
    let polarity: Polarity = obj
        .get("Polarity")
        .and_then(Value::as_str)
        .ok_or_else(|| schema(Some(i), &polarity_path, "expected a string"))?
        .parse()
        .map_err(|e: crate::model::CoreError| schema(Some(i), &polarity_path, e.to_string()))?;

    let intensity = match obj.get("Intensity") {
        Some(Value::String(s)) => s.clone(),
        Some(Value::Null) | None => DEFAULT_INTENSITY.to_string(),
        Some(_) => {
            return Err(schema(Some(i), format!("{}.Intensity", path), "expected a string"));
        }
    };

    Ok(Opinion {
        holder,
        target,
        expression,
        polarity,
        intensity,
    })
}

fn read_span(i: usize, path: &str, value: &Value) -> Result<Span, CodecError> {
    let pair = value
        .as_array()
        .filter(|a| a.len() == 2)
        .ok_or_else(|| schema(Some(i), path, "expected [texts, offsets]"))?;
    let strings = |idx: usize| -> Result<Vec<&str>, CodecError> {
        let list = pair[idx]
            .as_array()
            .ok_or_else(|| schema(Some(i), format!("{}[{}]", path, idx), "expected an array"))?;
        list.iter()
            .enumerate()
            .map(|(k, v)| {
                v.as_str()
                    .ok_or_else(|| schema(Some(i), format!("{}[{}][{}]", path, idx, k), "expected a string"))
            })
            .collect()
    };
    let texts = strings(0)?;
    let offsets = strings(1)?;
    if texts.len() != offsets.len() {
        return Err(schema(
            Some(i),
            path,
            format!("{} fragment texts but {} offsets", texts.len(), offsets.len()),
        ));
    }
    let fragments = texts
        .iter()
        .zip(&offsets)
        .enumerate()
        .map(|(k, (text, off))| {
            let (start, end) = parse_offsets(off).ok_or_else(|| {
                schema(
                    Some(i),
                    format!("{}[1][{}]", path, k),
                    format!("expected \"start:end\", got {:?}", off),
                )
            })?;
            Ok(SpanFragment::new(*text, start, end))
        })
        .collect::<Result<Vec<_>, CodecError>>()?;
    Ok(Span::new(fragments))
}

fn parse_offsets(s: &str) -> Option<(usize, usize)> {
    let (a, b) = s.split_once(':')?;
    Some((a.parse().ok()?, b.parse().ok()?))
}

#[derive(Serialize)]
struct SentenceOut<'a> {
    sent_id: &'a str,
    text: &'a str,
    opinions: Vec<OpinionOut<'a>>,
}

#[derive(Serialize)]
struct OpinionOut<'a> {
    #[serde(rename = "Source")]
    source: SpanOut<'a>,
    #[serde(rename = "Target")]
    target: SpanOut<'a>,
    #[serde(rename = "Polar_expression")]
    polar_expression: SpanOut<'a>,
    #[serde(rename = "Polarity")]
    polarity: &'static str,
    #[serde(rename = "Intensity")]
    intensity: &'a str,
}

#[derive(Serialize)]
struct SpanOut<'a>(Vec<&'a str>, Vec<String>);

impl<'a> From<&'a Span> for SpanOut<'a> {
    fn from(span: &'a Span) -> Self {
        SpanOut(
            span.fragments.iter().map(|f| f.text.as_str()).collect(),
            span.fragments
                .iter()
                .map(|f| format!("{}:{}", f.start, f.end))
                .collect(),
        )
    }
}

/// Serialize a treebank: one compact sentence object per line, LF endings.
pub fn write_json(tb: &Treebank) -> Vec<u8> {
    let mut out = String::from("[");
    for (i, s) in tb.sentences.iter().enumerate() {
        let obj = SentenceOut {
            sent_id: &s.sent_id,
            text: &s.text,
            opinions: s
                .opinions
                .iter()
                .map(|op| OpinionOut {
                    source: (&op.holder).into(),
                    target: (&op.target).into(),
                    polar_expression: (&op.expression).into(),
                    polarity: op.polarity.as_str(),
                    intensity: &op.intensity,
                })
                .collect(),
        };
        out.push_str(if i == 0 { "\n" } else { ",\n" });
        out.push_str(&serde_json::to_string(&obj).expect("plain data serializes"));
    }
    if !tb.sentences.is_empty() {
        out.push('\n');
    }
    out.push_str("]\n");
    out.into_bytes()
}
