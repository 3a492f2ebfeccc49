use std::collections::HashMap;
use std::fs;
use std::path::Path;

use super::{Dataset, Modality};
use crate::error::{Error, Result};

/// Word vectors keyed by token, all of width `dim`.
#[derive(Debug, Clone, Default)]
pub struct Embeddings {
    pub dim: usize,
    pub vectors: HashMap<String, Vec<f64>>,
}

/// Parses `token v1 v2 ...` records, one per line. Blank lines are skipped.
pub fn parse_embeddings(text: &str) -> Result<Embeddings> {
    let mut emb = Embeddings::default();
    for (lineno, line) in text.lines().enumerate() {
        let mut fields = line.split_whitespace();
        let Some(token) = fields.next() else { continue };
        let vector = fields
            .map(|f| {
                f.parse::<f64>().map_err(|_| {
                    Error::Format(format!("line {}: {f:?} is not a number", lineno + 1))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        if vector.is_empty() {
            return Err(Error::Format(format!("line {}: token {token:?} has no vector", lineno + 1)));
        }
        if emb.vectors.is_empty() {
            emb.dim = vector.len();
        } else if vector.len() != emb.dim {
            return Err(Error::Format(format!(
                "line {}: vector width {} differs from {}",
                lineno + 1,
                vector.len(),
                emb.dim
            )));
        }
        emb.vectors.insert(token.to_string(), vector);
    }
    if emb.vectors.is_empty() {
        return Err(Error::Format("embedding file has no records".into()));
    }
    Ok(emb)
}

pub fn ingest_embedded_text(
    corpus: impl AsRef<Path>,
    embeddings: impl AsRef<Path>,
    seq_len: usize,
    stride: usize,
) -> Result<Dataset> {
    let emb = parse_embeddings(&fs::read_to_string(embeddings)?)?;
    ingest_embedded_text_str(&fs::read_to_string(corpus)?, &emb, seq_len, stride)
}

/// Cuts a whitespace-tokenized corpus into windows of `seq_len` tokens every
/// `stride` tokens and replaces each token by its vector. Unknown tokens
/// become zero vectors.
pub fn ingest_embedded_text_str(
    corpus: &str,
    emb: &Embeddings,
    seq_len: usize,
    stride: usize,
) -> Result<Dataset> {
    if seq_len == 0 || stride == 0 {
        return Err(Error::Bounds("seq_len and stride must be positive".into()));
    }
    let tokens: Vec<&str> = corpus.split_whitespace().collect();
    if tokens.len() < seq_len {
        return Err(Error::InsufficientData(format!(
            "corpus has {} tokens, fewer than seq_len = {seq_len}",
            tokens.len()
        )));
    }
    let zero = vec![0.0; emb.dim];
    let d = seq_len * emb.dim;
    let mut values = Vec::new();
    let mut n = 0;
    for start in (0..=tokens.len() - seq_len).step_by(stride) {
        for tok in &tokens[start..start + seq_len] {
            values.extend_from_slice(emb.vectors.get(*tok).unwrap_or(&zero));
        }
        n += 1;
    }
    Dataset::new(n, d, values, None, Modality::TextEmbedding, Some(emb.dim))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_token_windows() {
        let emb = parse_embeddings("a 1 0\nb 0 1\n").unwrap();
        let ds = ingest_embedded_text_str("a b a b", &emb, 2, 2).unwrap();
        assert_eq!(ds.n(), 2);
        assert_eq!(ds.d(), 4);
        assert_eq!(ds.row(1), &[1.0, 0.0, 0.0, 1.0]);
        assert_eq!(ds.modality(), Modality::TextEmbedding);
    }

    #[test]
    fn unknown_token_is_zero() {
        let emb = parse_embeddings("a 1 2\n").unwrap();
        let ds = ingest_embedded_text_str("a zzz", &emb, 2, 1).unwrap();
        assert_eq!(ds.row(0), &[1.0, 2.0, 0.0, 0.0]);
    }

    #[test]
    fn fifty_tokens_of_fifty_dims() {
        let lines: String = (0..3)
            .map(|t| format!("w{t} {}\n", vec!["0.5"; 50].join(" ")))
            .collect();
        let emb = parse_embeddings(&lines).unwrap();
        let corpus: Vec<String> = (0..120).map(|i| format!("w{}", i % 3)).collect();
        let ds = ingest_embedded_text_str(&corpus.join(" "), &emb, 50, 10).unwrap();
        assert_eq!(ds.d(), 2500);
        assert_eq!(ds.n(), 8);
    }

    #[test]
    fn ragged_vectors_and_short_corpus() {
        assert!(matches!(parse_embeddings("a 1 2\nb 3\n"), Err(Error::Format(_))));
        let emb = parse_embeddings("a 1\n").unwrap();
        assert!(matches!(
            ingest_embedded_text_str("a a", &emb, 3, 1),
            Err(Error::InsufficientData(_))
        ));
    }
}
