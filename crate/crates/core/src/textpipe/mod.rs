//! Two-track tweet cleaning.
//!
//! Both tracks share tokenization, tagging, emoji grouping and a regex pass;
//! the complex track adds lemmatization, entity replacement, synonym
//! replacement and a phrase dictionary pass on top of the simple track.

pub mod dict;
mod pos;
mod tokenize;

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

pub use dict::{ReplacementDictionaries, ENTITY_KEYWORDS};
pub use pos::{PosTag, PosTagger, RuleTagger};
pub use tokenize::{is_emoji, is_emoticon_or_emoji, tokenize};

use crate::error::{Error, Result};

/// Keyword that replaces URLs.
pub const URL_KEYWORD: &str = "url";
/// Keyword that replaces user mentions.
pub const MENTION_KEYWORD: &str = "twitter-entity";

/// Byte offsets into the source text.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Span {
    pub start: usize,
    pub end: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Token {
    pub surface: String,
    pub pos: PosTag,
    pub span: Span,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawTweet {
    pub id: String,
    pub text: String,
}

impl RawTweet {
    pub fn new(id: impl Into<String>, text: impl Into<String>) -> Self {
        Self {
            id: id.into(),
            text: text.into(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    Simple,
    Complex,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CleanedTweet {
    pub id: String,
    /// Original text; token spans index into it.
    pub source: String,
    pub simple: Vec<Token>,
    pub complex: Vec<Token>,
}

impl CleanedTweet {
    pub fn tokens(&self, variant: Variant) -> &[Token] {
        match variant {
            Variant::Simple => &self.simple,
            Variant::Complex => &self.complex,
        }
    }

    pub fn text(&self, variant: Variant) -> String {
        join(self.tokens(variant))
    }
}

/// Surfaces joined by single spaces.
pub fn join(tokens: &[Token]) -> String {
    tokens.iter().map(|t| t.surface.as_str()).collect::<Vec<_>>().join(" ")
}

/// Tags tokens with the default rule tagger.
pub fn pos_tag(mut tokens: Vec<Token>) -> Vec<Token> {
    RuleTagger::default().tag(&mut tokens);
    tokens
}

fn emoji_lookup<'a>(groups: &'a HashMap<String, String>, surface: &str) -> Option<&'a String> {
    let lower = surface.to_lowercase();
    groups.get(&lower).or_else(|| {
        let bare: String = lower.chars().filter(|c| !matches!(c, '\u{FE0E}' | '\u{FE0F}')).collect();
        groups.get(&bare)
    })
}

/// Replaces emoticons and emojis with their group keyword.
pub fn group_emojis(tokens: Vec<Token>, groups: &HashMap<String, String>) -> Vec<Token> {
    tokens
        .into_iter()
        .map(|mut t| {
            if t.pos == PosTag::Emoticon || is_emoticon_or_emoji(&t.surface) {
                match emoji_lookup(groups, &t.surface) {
                    Some(k) => t.surface = k.clone(),
                    None => log::debug!("no emoji group for {:?}", t.surface),
                }
            }
            t
        })
        .collect()
}

/// Splits a hashtag body at case, digit and underscore boundaries, returning
/// byte ranges relative to `body`.
pub fn split_camel_case(body: &str) -> Vec<(usize, usize)> {
    let chars: Vec<(usize, char)> = body.char_indices().collect();
    let mut parts = Vec::new();
    let mut start: Option<usize> = None;
    for (k, &(i, c)) in chars.iter().enumerate() {
        if c == '_' {
            if let Some(s) = start.take() {
                parts.push((s, i));
            }
            continue;
        }
        let Some(s) = start else {
            start = Some(i);
            continue;
        };
        let prev = chars[k - 1].1;
        let next = chars.get(k + 1).map(|&(_, n)| n);
        let boundary = (prev.is_lowercase() && c.is_uppercase())
            || (prev.is_alphabetic() && c.is_numeric())
            || (prev.is_numeric() && c.is_alphabetic())
            || (prev.is_uppercase() && c.is_uppercase() && next.is_some_and(char::is_lowercase));
        if boundary && prev != '_' {
            parts.push((s, i));
            start = Some(i);
        }
    }
    if let Some(s) = start {
        parts.push((s, body.len()));
    }
    parts
}

fn is_url(s: &str) -> bool {
    s.starts_with("http://") || s.starts_with("https://") || s.starts_with("www.")
}

/// URL and mention replacement, hashtag splitting, lower-casing and collapse
/// of immediately repeated tokens.
pub fn regex_pass(tokens: Vec<Token>) -> Vec<Token> {
    let mut out: Vec<Token> = Vec::with_capacity(tokens.len());
    let emit = |t: Token, out: &mut Vec<Token>| {
        if out.last().is_some_and(|p| p.surface == t.surface) {
            return;
        }
        out.push(t);
    };
    for t in tokens {
        if is_url(&t.surface) {
            emit(Token { surface: URL_KEYWORD.into(), ..t }, &mut out);
        } else if t.surface.len() > 1 && t.surface.starts_with('@') {
            emit(Token { surface: MENTION_KEYWORD.into(), ..t }, &mut out);
        } else if t.surface.len() > 1 && t.surface.starts_with('#') {
            let body = &t.surface[1..];
            let base = t.span.start + 1;
            for (s, e) in split_camel_case(body) {
                let piece = Token {
                    surface: body[s..e].to_lowercase(),
                    pos: t.pos,
                    span: Span {
                        start: (base + s).min(t.span.end),
                        end: (base + e).min(t.span.end),
                    },
                };
                emit(piece, &mut out);
            }
        } else {
            let surface = t.surface.to_lowercase();
            emit(Token { surface, ..t }, &mut out);
        }
    }
    out
}

fn is_number(s: &str) -> bool {
    s.chars().any(|c| c.is_ascii_digit()) && s.chars().all(|c| c.is_ascii_digit() || c == '.' || c == ',')
}

/// Longest-match phrase replacement over space-joined token windows.
fn replace_phrases(tokens: Vec<Token>, map: &HashMap<String, String>) -> Vec<Token> {
    let max_len = ReplacementDictionaries::max_phrase_len(map);
    if max_len == 0 {
        return tokens;
    }
    let mut out = Vec::with_capacity(tokens.len());
    let mut i = 0;
    while i < tokens.len() {
        let mut matched = None;
        for len in (1..=max_len.min(tokens.len() - i)).rev() {
            let key = join(&tokens[i..i + len]);
            if let Some(v) = map.get(&key) {
                matched = Some((len, v));
                break;
            }
        }
        match matched {
            Some((len, v)) => {
                out.push(Token {
                    surface: v.clone(),
                    pos: tokens[i].pos,
                    span: Span {
                        start: tokens[i].span.start,
                        end: tokens[i + len - 1].span.end,
                    },
                });
                i += len;
            }
            None => {
                out.push(tokens[i].clone());
                i += 1;
            }
        }
    }
    out
}

fn complex_round(tokens: Vec<Token>, dicts: &ReplacementDictionaries) -> Vec<Token> {
    let lemmatized = tokens
        .into_iter()
        .map(|mut t| {
            if let Some(l) = dicts.lemmas.get(&t.surface) {
                t.surface = l.clone();
            }
            t
        })
        .collect();
    let mut entities = replace_phrases(lemmatized, &dicts.ner);
    for t in entities.iter_mut() {
        if is_number(&t.surface) {
            t.surface = "_number_".into();
        }
    }
    let synonyms = entities
        .into_iter()
        .map(|mut t| {
            if let Some(s) = dicts.synonyms.get(&t.surface) {
                t.surface = s.clone();
            }
            t
        })
        .collect();
    replace_phrases(synonyms, &dicts.wiki)
}

/// Bound on repeated rounds; dictionaries whose maps feed each other in a
/// cycle stop here instead of looping.
const MAX_COMPLEX_ROUNDS: usize = 8;

/// Lemma lookup, entity phrase replacement (numbers become `_number_`),
/// synonym replacement and phrase-dictionary replacement, repeated until the
/// output stops changing so the pass is idempotent.
pub fn complex_pass(tokens: Vec<Token>, dicts: &ReplacementDictionaries) -> Vec<Token> {
    let mut cur = tokens;
    for _ in 0..MAX_COMPLEX_ROUNDS {
        let next = complex_round(cur.clone(), dicts);
        if next == cur {
            return next;
        }
        cur = next;
    }
    log::warn!("complex pass did not converge; dictionaries may feed each other");
    cur
}

/// Cleans one tweet with the default tagger.
pub fn clean(raw: &RawTweet, dicts: &ReplacementDictionaries) -> Result<CleanedTweet> {
    clean_with(raw, dicts, &RuleTagger::default())
}

pub fn clean_with(raw: &RawTweet, dicts: &ReplacementDictionaries, tagger: &dyn PosTagger) -> Result<CleanedTweet> {
    if raw.text.trim().is_empty() {
        return Err(Error::invalid(format!("empty tweet (id {:?})", raw.id)));
    }
    let mut tokens = tokenize(&raw.text);
    tagger.tag(&mut tokens);
    let simple = regex_pass(group_emojis(tokens, &dicts.emoji_groups));
    let complex = complex_pass(simple.clone(), dicts);
    Ok(CleanedTweet {
        id: raw.id.clone(),
        source: raw.text.clone(),
        simple,
        complex,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const TWEET: &str = "@USAIRWAYS is right :-) ! Flying in September #NiceToFly";

    fn toks(words: &[&str]) -> Vec<Token> {
        let mut out = Vec::new();
        let mut off = 0;
        for w in words {
            out.push(Token {
                surface: w.to_string(),
                pos: PosTag::CommonNoun,
                span: Span { start: off, end: off + w.len() },
            });
            off += w.len() + 1;
        }
        out
    }

    fn surf(t: &[Token]) -> Vec<&str> {
        t.iter().map(|t| t.surface.as_str()).collect()
    }

    #[test]
    fn reference_round_trip() {
        let c = clean(&RawTweet::new("1", TWEET), &ReplacementDictionaries::bundled()).unwrap();
        assert_eq!(
            c.text(Variant::Simple),
            "twitter-entity is right happy-smily ! flying in september nice to fly"
        );
        assert_eq!(
            c.text(Variant::Complex),
            "twitter-entity be right happy-smily ! fly in _date_ pleasant to fly"
        );
    }

    #[test]
    fn untouched_word() {
        let c = clean(&RawTweet::new("1", "hello"), &ReplacementDictionaries::bundled()).unwrap();
        assert_eq!(surf(&c.simple), ["hello"]);
        assert_eq!(surf(&c.complex), ["hello"]);
    }

    #[test]
    fn empty_tweet_rejected() {
        let err = clean(&RawTweet::new("x", "   "), &ReplacementDictionaries::bundled()).unwrap_err();
        assert!(err.to_string().contains("empty tweet"));
    }

    #[test]
    fn emoji_grouping() {
        let d = ReplacementDictionaries::bundled();
        let t = pos_tag(tokenize(":-) word 😀 🦖"));
        let g = group_emojis(t, &d.emoji_groups);
        assert_eq!(surf(&g), ["happy-smily", "word", "happy-smily", "🦖"]);
    }

    #[test]
    fn regex_pass_rules() {
        assert_eq!(surf(&regex_pass(toks(&["@USAIRWAYS"]))), ["twitter-entity"]);
        assert_eq!(surf(&regex_pass(toks(&["#NiceToFly"]))), ["nice", "to", "fly"]);
        assert_eq!(surf(&regex_pass(toks(&["good", "good"]))), ["good"]);
        assert_eq!(surf(&regex_pass(toks(&["https://t.co/x", "ok"]))), ["url", "ok"]);
    }

    #[test]
    fn camel_case_splitting() {
        let split = |s: &str| -> Vec<String> {
            split_camel_case(s).into_iter().map(|(a, b)| s[a..b].to_string()).collect()
        };
        assert_eq!(split("NiceToFly"), ["Nice", "To", "Fly"]);
        assert_eq!(split("NYCRocks"), ["NYC", "Rocks"]);
        assert_eq!(split("happy_new_year"), ["happy", "new", "year"]);
        assert_eq!(split("top10list"), ["top", "10", "list"]);
        assert_eq!(split("irony"), ["irony"]);
    }

    #[test]
    fn complex_pass_examples() {
        let d = ReplacementDictionaries::bundled();
        assert_eq!(surf(&complex_pass(toks(&["flying"]), &d)), ["fly"]);
        assert_eq!(surf(&complex_pass(toks(&["september"]), &d)), ["_date_"]);
        assert_eq!(surf(&complex_pass(toks(&["nice"]), &d)), ["pleasant"]);
        assert_eq!(surf(&complex_pass(toks(&["zzz"]), &d)), ["zzz"]);
        let phrase = complex_pass(toks(&["to", "new", "york", "at", "7"]), &d);
        assert_eq!(surf(&phrase), ["to", "_place_", "at", "_number_"]);
        assert_eq!(phrase[1].span, Span { start: 3, end: 11 });
    }

    #[test]
    fn simple_track_ignores_non_emoji_dictionaries() {
        let full = ReplacementDictionaries::bundled();
        let only_emoji = ReplacementDictionaries {
            emoji_groups: full.emoji_groups.clone(),
            ..Default::default()
        };
        let a = clean(&RawTweet::new("1", TWEET), &full).unwrap();
        let b = clean(&RawTweet::new("1", TWEET), &only_emoji).unwrap();
        assert_eq!(a.simple, b.simple);
    }

    #[test]
    fn hashtag_spans_point_into_source() {
        let c = clean(&RawTweet::new("1", TWEET), &ReplacementDictionaries::bundled()).unwrap();
        let fly = c.simple.last().unwrap();
        assert_eq!(&TWEET[fly.span.start..fly.span.end], "Fly");
    }
}
