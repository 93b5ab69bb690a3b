use std::collections::HashMap;
use std::path::Path;

use crate::error::{Error, Result};

/// Closed set of entity keywords the NER dictionary may produce.
pub const ENTITY_KEYWORDS: [&str; 5] = ["_date_", "_number_", "_brand_", "_place_", "_name_"];

/// Parses `key<TAB>value[<TAB>...]` lines. Blank lines and lines starting
/// with `#` are skipped. Returns the tab-separated fields of each remaining line.
pub fn parse_tsv(text: &str, origin: &str, min_fields: usize) -> Result<Vec<(usize, Vec<String>)>> {
    let mut rows = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<String> = line.split('\t').map(|f| f.trim().to_string()).collect();
        if fields.len() < min_fields || fields.iter().take(min_fields).any(String::is_empty) {
            return Err(Error::Parse {
                path: origin.to_string(),
                line: i + 1,
                msg: format!("expected at least {min_fields} tab-separated fields"),
            });
        }
        rows.push((i + 1, fields));
    }
    Ok(rows)
}

pub fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

/// Reads a two-column TSV into a lower-cased map. Later duplicates win.
pub fn parse_map(text: &str, origin: &str) -> Result<HashMap<String, String>> {
    let mut map = HashMap::new();
    for (line, fields) in parse_tsv(text, origin, 2)? {
        let value = fields[1].to_lowercase();
        if value.contains(char::is_whitespace) {
            return Err(Error::Parse {
                path: origin.to_string(),
                line,
                msg: format!("replacement {value:?} contains whitespace"),
            });
        }
        map.insert(normalize_key(&fields[0]), value);
    }
    Ok(map)
}

/// Lower-cases and collapses internal whitespace so multi-word keys match
/// space-joined token windows.
pub fn normalize_key(key: &str) -> String {
    key.split_whitespace()
        .map(str::to_lowercase)
        .collect::<Vec<_>>()
        .join(" ")
}

/// Follows chains `a -> b -> c` so that one lookup reaches the end, and drops
/// self-loops. A cycle is reported as an error.
pub(crate) fn close_chains(map: &mut HashMap<String, String>, what: &str) -> Result<()> {
    map.retain(|k, v| k != v);
    let keys: Vec<String> = map.keys().cloned().collect();
    for k in keys {
        let mut cur = map[&k].clone();
        let mut hops = 0;
        while let Some(next) = map.get(&cur) {
            hops += 1;
            if next == &k || hops > map.len() {
                return Err(Error::Config(format!("{what} dictionary has a cycle through {k:?}")));
            }
            cur = next.clone();
        }
        map.insert(k, cur);
    }
    Ok(())
}

/// Dictionaries used by the cleaning passes. Keys are lower-cased.
#[derive(Clone, Debug, Default)]
pub struct ReplacementDictionaries {
    pub synonyms: HashMap<String, String>,
    pub wiki: HashMap<String, String>,
    pub ner: HashMap<String, String>,
    pub lemmas: HashMap<String, String>,
    pub emoji_groups: HashMap<String, String>,
}

const DEFAULT_EMOJI: &str = include_str!("../../data/emoji_groups.tsv");
const DEFAULT_SYNONYMS: &str = include_str!("../../data/synonyms.tsv");
const DEFAULT_WIKI: &str = include_str!("../../data/wiki.tsv");
const DEFAULT_NER: &str = include_str!("../../data/ner.tsv");
const DEFAULT_LEMMAS: &str = include_str!("../../data/lemmas.tsv");

impl ReplacementDictionaries {
    /// The illustrative dictionaries bundled with the crate.
    pub fn bundled() -> Self {
        Self::from_texts(DEFAULT_SYNONYMS, DEFAULT_WIKI, DEFAULT_NER, DEFAULT_LEMMAS, DEFAULT_EMOJI)
            .expect("bundled dictionaries are valid")
    }

    pub fn from_texts(synonyms: &str, wiki: &str, ner: &str, lemmas: &str, emoji_groups: &str) -> Result<Self> {
        let mut d = Self {
            synonyms: parse_map(synonyms, "synonyms")?,
            wiki: parse_map(wiki, "wiki")?,
            ner: parse_map(ner, "ner")?,
            lemmas: parse_map(lemmas, "lemmas")?,
            emoji_groups: parse_map(emoji_groups, "emoji_groups")?,
        };
        d.validate()?;
        Ok(d)
    }

    /// Loads `synonyms.tsv`, `wiki.tsv`, `ner.tsv`, `lemmas.tsv` and
    /// `emoji_groups.tsv` from a directory; missing files fall back to the
    /// bundled versions.
    pub fn load_dir(dir: &Path) -> Result<Self> {
        let read = |name: &str, fallback: &'static str| -> Result<String> {
            let p = dir.join(name);
            if p.exists() {
                read_text(&p)
            } else {
                Ok(fallback.to_string())
            }
        };
        Self::from_texts(
            &read("synonyms.tsv", DEFAULT_SYNONYMS)?,
            &read("wiki.tsv", DEFAULT_WIKI)?,
            &read("ner.tsv", DEFAULT_NER)?,
            &read("lemmas.tsv", DEFAULT_LEMMAS)?,
            &read("emoji_groups.tsv", DEFAULT_EMOJI)?,
        )
    }

    fn validate(&mut self) -> Result<()> {
        if let Some((k, v)) = self.ner.iter().find(|(_, v)| !ENTITY_KEYWORDS.contains(&v.as_str())) {
            return Err(Error::Config(format!(
                "ner entry {k:?} maps to {v:?}, expected one of {ENTITY_KEYWORDS:?}"
            )));
        }
        close_chains(&mut self.synonyms, "synonym")?;
        close_chains(&mut self.lemmas, "lemma")?;
        Ok(())
    }

    /// Longest key length, in words, of a phrase dictionary.
    pub(crate) fn max_phrase_len(map: &HashMap<String, String>) -> usize {
        map.keys().map(|k| k.split(' ').count()).max().unwrap_or(0)
    }
}
