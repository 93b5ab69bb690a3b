use std::collections::HashMap;
use std::path::Path;

use rand::Rng;

use crate::error::{Error, Result};
use crate::tensor::{glorot_uniform, Tensor};
use crate::textpipe::dict::read_text;
use crate::textpipe::Token;

pub const PAD_ID: usize = 0;
pub const UNK_ID: usize = 1;
const PAD: &str = "<pad>";
const UNK: &str = "<unk>";

/// Token to row mapping. Row 0 is padding, row 1 collects unknown words.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Vocab {
    tokens: Vec<String>,
    index: HashMap<String, usize>,
}

impl Vocab {
    pub fn from_tokens<I: IntoIterator<Item = String>>(words: I) -> Self {
        let mut v = Self {
            tokens: vec![PAD.to_string(), UNK.to_string()],
            index: HashMap::new(),
        };
        for w in words {
            if !v.index.contains_key(&w) && w != PAD && w != UNK {
                v.index.insert(w.clone(), v.tokens.len());
                v.tokens.push(w);
            }
        }
        v
    }

    /// Words seen at least `min_count` times, most frequent first, ties in
    /// lexical order.
    pub fn build<'a, I>(sentences: I, min_count: usize) -> Self
    where
        I: IntoIterator<Item = &'a [Token]>,
    {
        let mut counts: HashMap<&str, usize> = HashMap::new();
        for s in sentences {
            for t in s {
                *counts.entry(t.surface.as_str()).or_default() += 1;
            }
        }
        let mut words: Vec<(&str, usize)> = counts.into_iter().filter(|&(_, c)| c >= min_count.max(1)).collect();
        words.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(b.0)));
        Self::from_tokens(words.into_iter().map(|(w, _)| w.to_string()))
    }

    /// Restores a vocabulary saved with [`Vocab::tokens`].
    pub fn from_saved(tokens: Vec<String>) -> Result<Self> {
        if tokens.len() < 2 || tokens[PAD_ID] != PAD || tokens[UNK_ID] != UNK {
            return Err(Error::Checkpoint("vocabulary must start with <pad> and <unk>".into()));
        }
        Ok(Self::from_tokens(tokens.into_iter().skip(2)))
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn id(&self, word: &str) -> usize {
        self.index.get(word).copied().unwrap_or(UNK_ID)
    }

    /// Word and tag ids truncated or padded at the end to `seq_len`.
    pub fn encode(&self, tokens: &[Token], seq_len: usize) -> (Vec<usize>, Vec<usize>) {
        let mut words = vec![PAD_ID; seq_len];
        let mut tags = vec![PAD_ID; seq_len];
        for (i, t) in tokens.iter().take(seq_len).enumerate() {
            words[i] = self.id(&t.surface);
            tags[i] = t.pos.id();
        }
        (words, tags)
    }
}

/// Vectors read from a text embedding file.
#[derive(Clone, Debug, PartialEq)]
pub struct Embeddings {
    pub dim: usize,
    pub entries: Vec<(String, Vec<f64>)>,
}

impl Embeddings {
    /// Parses `token v1 ... vd` lines with an optional `count dim` first line.
    pub fn parse(text: &str, origin: &str) -> Result<Self> {
        let err = |line: usize, msg: String| Error::Parse {
            path: origin.to_string(),
            line,
            msg,
        };
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()).peekable();
        let mut declared = None;
        if let Some(&(_, first)) = lines.peek() {
            let f: Vec<&str> = first.split_whitespace().collect();
            if f.len() == 2 {
                if let (Ok(n), Ok(d)) = (f[0].parse::<usize>(), f[1].parse::<usize>()) {
                    declared = Some((n, d));
                    lines.next();
                }
            }
        }
        let mut dim = declared.map(|d| d.1);
        let mut entries = Vec::new();
        let mut seen = HashMap::new();
        for (i, line) in lines {
            let mut f = line.split_whitespace();
            let token = f.next().expect("non-blank line");
            let values = f
                .map(|s| s.parse::<f64>().ok().filter(|v| v.is_finite()))
                .collect::<Option<Vec<f64>>>()
                .ok_or_else(|| err(i + 1, "non-numeric vector component".into()))?;
            match dim {
                Some(d) if d != values.len() => {
                    return Err(err(i + 1, format!("expected {d} components, found {}", values.len())))
                }
                None if values.is_empty() => return Err(err(i + 1, "empty vector".into())),
                None => dim = Some(values.len()),
                _ => {}
            }
            if seen.insert(token.to_string(), i + 1).is_some() {
                log::debug!("{origin}: duplicate embedding for {token:?} ignored");
                continue;
            }
            entries.push((token.to_string(), values));
        }
        if let Some((n, _)) = declared {
            if n != entries.len() {
                return Err(err(1, format!("header declares {n} vectors, file has {}", entries.len())));
            }
        }
        let dim = dim.ok_or_else(|| err(1, "no vectors".into()))?;
        Ok(Self { dim, entries })
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&read_text(path)?, &path.display().to_string())
    }

    pub fn vocab(&self) -> Vocab {
        Vocab::from_tokens(self.entries.iter().map(|(t, _)| t.clone()))
    }

    /// Table for `vocab`: pretrained rows where available, random rows
    /// elsewhere (including the unknown-word row) and zeros for padding.
    pub fn table<R: Rng>(&self, vocab: &Vocab, rng: &mut R) -> Result<Tensor> {
        let mut t = random_table(vocab.len(), self.dim, rng);
        let lookup: HashMap<&str, &Vec<f64>> = self.entries.iter().map(|(w, v)| (w.as_str(), v)).collect();
        let d = self.dim;
        let data = t.data_mut();
        for (row, w) in vocab.tokens().iter().enumerate().skip(2) {
            if let Some(v) = lookup.get(w.as_str()) {
                data[row * d..(row + 1) * d].copy_from_slice(v);
            }
        }
        Ok(t)
    }
}

/// Glorot-uniform table with a zero padding row.
pub fn random_table<R: Rng>(rows: usize, dim: usize, rng: &mut R) -> Tensor {
    let mut t = glorot_uniform(&[rows, dim], rows, dim, rng);
    t.data_mut()[..dim].fill(0.0);
    t
}
