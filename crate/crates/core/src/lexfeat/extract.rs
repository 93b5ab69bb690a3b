use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use super::lexicon::{bundled_diminishers, bundled_magnifiers, AFFECT_EMOTIONS};
use super::{assemble, AffectLexicon, CategoryLexicon, FeatureMatrix, FeatureVector, PolarityLexicon};
use crate::error::Result;
use crate::textpipe::{tokenize, CleanedTweet, Token};

/// Upper bound of a summed category score.
pub const CATEGORY_CAP: f64 = 5.0;

/// Minimum run of one repeated letter that marks a word as elongated.
const ELONGATION_RUN: usize = 3;

fn is_url(s: &str) -> bool {
    s.starts_with("http://") || s.starts_with("https://") || s.starts_with("www.")
}

fn hashtag_body(s: &str) -> Option<&str> {
    s.strip_prefix('#').filter(|b| !b.is_empty())
}

/// True when some letter repeats at least three times in a row.
pub fn elongated(word: &str) -> bool {
    let mut run = 0;
    let mut prev = None;
    for c in word.chars() {
        if c.is_alphabetic() && Some(c) == prev {
            run += 1;
        } else {
            run = 1;
        }
        if c.is_alphabetic() && run >= ELONGATION_RUN {
            return true;
        }
        prev = Some(c);
    }
    false
}

fn all_caps(word: &str) -> bool {
    let letters: Vec<char> = word.chars().filter(|c| c.is_alphabetic()).collect();
    letters.len() >= 2 && letters.iter().all(|c| c.is_uppercase())
}

fn raw_tokens(t: &CleanedTweet) -> Vec<Token> {
    tokenize(&t.source)
}

fn flag(b: bool) -> f64 {
    if b {
        1.0
    } else {
        0.0
    }
}

/// `mag`, `dim`, `length`, `long`, `caps`, `hash`, `at`, `irony`.
///
/// Counts and length use the simple variant; the flags look at the original
/// tokens, before hashtags are split and text is lower-cased.
pub fn syntactic_features(
    t: &CleanedTweet,
    magnifiers: &HashSet<String>,
    diminishers: &HashSet<String>,
) -> FeatureVector {
    let raw = raw_tokens(t);
    let words = || raw.iter().map(|x| x.surface.as_str()).filter(|s| !is_url(s) && !s.starts_with('@'));
    let count = |set: &HashSet<String>| t.simple.iter().filter(|x| set.contains(&x.surface)).count() as f64;
    let n = t.simple.len();
    let length = if n == 0 { 0.0 } else { (n as f64).ln() };
    let hashtags: Vec<String> = raw.iter().filter_map(|x| hashtag_body(&x.surface)).map(str::to_lowercase).collect();

    let mut v = FeatureVector::new();
    let values = [
        ("mag", count(magnifiers)),
        ("dim", count(diminishers)),
        ("length", length),
        ("long", flag(words().any(elongated))),
        ("caps", flag(words().filter(|s| !s.starts_with('#')).any(all_caps))),
        ("hash", flag(!hashtags.is_empty())),
        ("at", flag(t.source.contains('@'))),
        ("irony", flag(hashtags.iter().any(|h| h == "irony" || h == "sarcasm"))),
    ];
    for (name, x) in values {
        v.push(name, x).expect("fixed names are distinct");
    }
    v
}

/// Per-category sum of matched token scores, capped at 5. Hashtags match by
/// their body.
pub fn category_features(t: &CleanedTweet, lex: &CategoryLexicon) -> FeatureVector {
    let mut sums = vec![0.0; lex.categories().len()];
    for tok in raw_tokens(t) {
        let s = hashtag_body(&tok.surface).unwrap_or(&tok.surface);
        if let Some((ci, score)) = lex.get(s) {
            sums[ci] += score;
        }
    }
    let mut v = FeatureVector::new();
    for (name, s) in lex.categories().iter().zip(sums) {
        v.push(name.clone(), s.min(CATEGORY_CAP)).expect("categories are distinct");
    }
    v
}

/// Largest lexicon score among the tweet's hashtags, per emotion.
pub fn nrc_hashtag_features(t: &CleanedTweet, lex: &AffectLexicon) -> FeatureVector {
    let mut best = [0.0f64; 4];
    for tok in raw_tokens(t) {
        if let Some(scores) = hashtag_body(&tok.surface).and_then(|b| lex.get(b)) {
            for (b, s) in best.iter_mut().zip(scores) {
                *b = b.max(s);
            }
        }
    }
    let mut v = FeatureVector::new();
    for (e, b) in AFFECT_EMOTIONS.iter().zip(best) {
        v.push(format!("hash_affect/{e}"), b).expect("emotions are distinct");
    }
    v
}

/// Negative, neutral and positive token proportions (`vader/neg`,
/// `vader/neu`, `vader/pos`) and the mean polarity of lexicon hits (`blob`).
pub fn polarity_scorer(t: &CleanedTweet, lex: &PolarityLexicon) -> FeatureVector {
    let hits: Vec<f64> = t.simple.iter().filter_map(|x| lex.get(&x.surface)).collect();
    let n = t.simple.len().max(1) as f64;
    let neg = hits.iter().filter(|&&p| p < 0.0).count() as f64 / n;
    let pos = hits.iter().filter(|&&p| p > 0.0).count() as f64 / n;
    let mean = if hits.is_empty() {
        0.0
    } else {
        hits.iter().sum::<f64>() / hits.len() as f64
    };
    let mut v = FeatureVector::new();
    for (name, x) in [("vader/neg", neg), ("vader/neu", 1.0 - neg - pos), ("vader/pos", pos), ("blob", mean)] {
        v.push(name, x).expect("fixed names are distinct");
    }
    v
}

/// Feature groups switched on for a run.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FeatureGroups {
    pub syntactic: bool,
    pub category: bool,
    pub affect: bool,
    pub polarity: bool,
}

impl Default for FeatureGroups {
    fn default() -> Self {
        Self {
            syntactic: true,
            category: true,
            affect: true,
            polarity: true,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Featurizer {
    pub category: CategoryLexicon,
    pub affect: AffectLexicon,
    pub polarity: PolarityLexicon,
    pub magnifiers: HashSet<String>,
    pub diminishers: HashSet<String>,
    pub groups: FeatureGroups,
}

impl Default for Featurizer {
    fn default() -> Self {
        Self {
            category: CategoryLexicon::bundled(),
            affect: AffectLexicon::bundled(),
            polarity: PolarityLexicon::bundled(),
            magnifiers: bundled_magnifiers(),
            diminishers: bundled_diminishers(),
            groups: FeatureGroups::default(),
        }
    }
}

impl Featurizer {
    pub fn featurize(&self, t: &CleanedTweet) -> Result<FeatureVector> {
        let mut parts = Vec::new();
        if self.groups.syntactic {
            parts.push(syntactic_features(t, &self.magnifiers, &self.diminishers));
        }
        if self.groups.category {
            parts.push(category_features(t, &self.category));
        }
        if self.groups.affect {
            parts.push(nrc_hashtag_features(t, &self.affect));
        }
        if self.groups.polarity {
            parts.push(polarity_scorer(t, &self.polarity));
        }
        assemble(&parts)
    }

    /// Featurizes tweets on up to `threads` worker threads; row order follows
    /// the input.
    pub fn featurize_all(&self, tweets: &[CleanedTweet], threads: usize) -> Result<FeatureMatrix> {
        let threads = threads.max(1);
        let chunk = tweets.len().div_ceil(threads).max(1);
        let vectors: Vec<FeatureVector> = std::thread::scope(|s| {
            let handles: Vec<_> = tweets
                .chunks(chunk)
                .map(|part| s.spawn(move || part.iter().map(|t| self.featurize(t)).collect::<Result<Vec<_>>>()))
                .collect();
            let mut out = Vec::with_capacity(tweets.len());
            for h in handles {
                out.extend(h.join().expect("featurizer thread panicked")?);
            }
            Ok::<_, crate::Error>(out)
        })?;
        FeatureMatrix::from_vectors(tweets.iter().map(|t| t.id.clone()).collect(), &vectors)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::textpipe::{clean, RawTweet, ReplacementDictionaries};

    fn cleaned(text: &str) -> CleanedTweet {
        clean(&RawTweet::new("t", text), &ReplacementDictionaries::bundled()).unwrap()
    }

    fn syn(text: &str) -> FeatureVector {
        syntactic_features(&cleaned(text), &bundled_magnifiers(), &bundled_diminishers())
    }

    #[test]
    fn elongation_threshold() {
        assert_eq!(syn("wowww that is great").get("long"), Some(1.0));
        assert_eq!(syn("wow").get("long"), Some(0.0));
        assert_eq!(syn("good!!!").get("long"), Some(0.0));
        assert!(!elongated("coffee"));
        assert!(elongated("soooo"));
    }

    #[test]
    fn length_is_log_token_count() {
        let v = syn("one two three four five six seven eight");
        assert!((v.get("length").unwrap() - 8f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn syntactic_flags_and_counts() {
        let v = syn("@bob this is INCREDIBLY good but hardly cheap #Sarcasm");
        assert_eq!(v.get("mag"), Some(1.0));
        assert_eq!(v.get("dim"), Some(1.0));
        assert_eq!(v.get("caps"), Some(1.0));
        assert_eq!(v.get("hash"), Some(1.0));
        assert_eq!(v.get("at"), Some(1.0));
        assert_eq!(v.get("irony"), Some(1.0));
        let w = syn("plain words here");
        for f in ["caps", "hash", "at", "irony", "long"] {
            assert_eq!(w.get(f), Some(0.0), "{f}");
        }
        assert_eq!(syn("@USAIRWAYS ok").get("caps"), Some(0.0));
    }

    #[test]
    fn category_sum_and_cap() {
        let lex = CategoryLexicon::parse("a\tjoy\t2\nb\tjoy\t2\nc\tjoy\t2\nd\tanger\t1.5\n", "t", ["x", "y", "z", "w"]).unwrap();
        let v = category_features(&cleaned("a b c"), &lex);
        assert_eq!(v.len(), 16);
        assert_eq!(v.get("joy"), Some(5.0));
        let v = category_features(&cleaned("d"), &lex);
        assert_eq!(v.get("anger"), Some(1.5));
        assert_eq!(v.values().iter().sum::<f64>(), 1.5);
        let v = category_features(&cleaned("nothing here"), &lex);
        assert!(v.values().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn hashtag_affect_max() {
        let mut lex = AffectLexicon::default();
        lex.insert("h1", 1, 0.3);
        lex.insert("h2", 1, 0.8);
        lex.insert("cross", 0, 0.6);
        let v = nrc_hashtag_features(&cleaned("so #h1 and #H2"), &lex);
        assert_eq!(v.get("hash_affect/fear"), Some(0.8));
        assert_eq!(nrc_hashtag_features(&cleaned("no tags h1"), &lex).values(), [0.0; 4]);
        assert_eq!(nrc_hashtag_features(&cleaned("#cross"), &lex).values(), [0.6, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn polarity_proportions() {
        let lex = PolarityLexicon::parse("good\t1\nbad\t-1\n", "p").unwrap();
        let v = polarity_scorer(&cleaned("good good"), &lex);
        assert_eq!(v.get("vader/pos"), Some(1.0));
        assert!(v.get("blob").unwrap() > 0.0);
        let v = polarity_scorer(&cleaned("meh"), &lex);
        assert_eq!(v.values(), [0.0, 1.0, 0.0, 0.0]);
        let v = polarity_scorer(&cleaned("good bad"), &lex);
        assert_eq!(v.get("blob"), Some(0.0));
    }

    #[test]
    fn featurize_all_keeps_order_and_threads_agree() {
        let f = Featurizer::default();
        let tweets: Vec<CleanedTweet> =
            ["I am sooo happy #joy", "terrible delay @airline", "ok", "love it 😍"].iter().map(|t| cleaned(t)).collect();
        let one = f.featurize_all(&tweets, 1).unwrap();
        let many = f.featurize_all(&tweets, 3).unwrap();
        assert_eq!(one, many);
        assert_eq!(one.n_cols(), 8 + 16 + 4 + 4);
    }
}
