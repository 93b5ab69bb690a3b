use std::collections::{BTreeMap, HashMap, HashSet};
use std::path::Path;

use crate::error::{Error, Result};
use crate::textpipe::dict::{parse_tsv, read_text};

/// Categories with fixed names.
pub const FIXED_CATEGORIES: [&str; 12] = [
    "anger",
    "disappointed",
    "fear",
    "hopeful",
    "joy",
    "lonely",
    "love",
    "negative",
    "neutral",
    "positive",
    "sadness",
    "surprise",
];

/// Default names for the four configurable categories.
pub const DEFAULT_EXTRA_CATEGORIES: [&str; 4] = ["disgust", "trust", "anticipation", "pessimism"];

pub const CATEGORY_SCORES: [f64; 4] = [0.5, 1.0, 1.5, 2.0];

/// Emotions of the affect-intensity lexicon, in feature order.
pub const AFFECT_EMOTIONS: [&str; 4] = ["anger", "fear", "joy", "sadness"];

const DEFAULT_CATEGORY: &str = include_str!("../../data/category_lexicon.tsv");
const DEFAULT_AFFECT: &str = include_str!("../../data/affect_lexicon.tsv");
const DEFAULT_POLARITY: &str = include_str!("../../data/polarity.tsv");
const DEFAULT_MAGNIFIERS: &str = include_str!("../../data/magnifiers.txt");
const DEFAULT_DIMINISHERS: &str = include_str!("../../data/diminishers.txt");

fn parse_score(s: &str, origin: &str, line: usize) -> Result<f64> {
    s.parse::<f64>().ok().filter(|v| v.is_finite()).ok_or_else(|| Error::Parse {
        path: origin.to_string(),
        line,
        msg: format!("bad score {s:?}"),
    })
}

/// Words and emojis annotated with one of 16 categories and a score.
#[derive(Clone, Debug)]
pub struct CategoryLexicon {
    categories: Vec<String>,
    entries: HashMap<String, (usize, f64)>,
}

impl CategoryLexicon {
    pub fn bundled() -> Self {
        Self::parse(DEFAULT_CATEGORY, "category_lexicon", DEFAULT_EXTRA_CATEGORIES)
            .expect("bundled category lexicon is valid")
    }

    /// Parses `token<TAB>category<TAB>score` lines. `extra` names the four
    /// configurable categories.
    pub fn parse(text: &str, origin: &str, extra: [&str; 4]) -> Result<Self> {
        let categories: Vec<String> = FIXED_CATEGORIES.iter().chain(extra.iter()).map(|c| c.to_lowercase()).collect();
        let distinct: HashSet<&String> = categories.iter().collect();
        if distinct.len() != 16 {
            return Err(Error::Config(format!("category names must be 16 distinct labels, got {categories:?}")));
        }
        let mut entries = HashMap::new();
        for (line, f) in parse_tsv(text, origin, 3)? {
            let cat = f[1].to_lowercase();
            let Some(ci) = categories.iter().position(|c| *c == cat) else {
                return Err(Error::Parse {
                    path: origin.into(),
                    line,
                    msg: format!("unknown category {cat:?}"),
                });
            };
            let score = parse_score(&f[2], origin, line)?;
            if !CATEGORY_SCORES.contains(&score) {
                return Err(Error::Parse {
                    path: origin.into(),
                    line,
                    msg: format!("score {score} not in {CATEGORY_SCORES:?}"),
                });
            }
            if entries.insert(f[0].to_lowercase(), (ci, score)).is_some() {
                return Err(Error::Parse {
                    path: origin.into(),
                    line,
                    msg: format!("duplicate entry {:?}", f[0]),
                });
            }
        }
        Ok(Self { categories, entries })
    }

    pub fn load(path: &Path, extra: [&str; 4]) -> Result<Self> {
        Self::parse(&read_text(path)?, &path.display().to_string(), extra)
    }

    pub fn categories(&self) -> &[String] {
        &self.categories
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Category index and score for a token, matched case-insensitively.
    pub fn get(&self, token: &str) -> Option<(usize, f64)> {
        let lower = token.to_lowercase();
        self.entries.get(&lower).copied().or_else(|| {
            let bare: String = lower.chars().filter(|c| !matches!(c, '\u{FE0E}' | '\u{FE0F}')).collect();
            self.entries.get(&bare).copied()
        })
    }
}

/// Word → emotion → intensity in [0, 1].
#[derive(Clone, Debug, Default)]
pub struct AffectLexicon {
    entries: HashMap<String, [f64; 4]>,
}

impl AffectLexicon {
    pub fn bundled() -> Self {
        Self::parse(DEFAULT_AFFECT, "affect_lexicon").expect("bundled affect lexicon is valid")
    }

    /// Accepts both `word<TAB>emotion<TAB>score` and the distributed
    /// `term<TAB>score<TAB>AffectDimension` column order, with or without a
    /// header line.
    pub fn parse(text: &str, origin: &str) -> Result<Self> {
        let mut entries: HashMap<String, [f64; 4]> = HashMap::new();
        for (n, (line, f)) in parse_tsv(text, origin, 3)?.into_iter().enumerate() {
            let (emotion, score) = match (f[1].parse::<f64>(), f[2].parse::<f64>()) {
                (Ok(_), _) => (&f[2], &f[1]),
                (_, Ok(_)) => (&f[1], &f[2]),
                _ if n == 0 => continue,
                _ => {
                    return Err(Error::Parse {
                        path: origin.into(),
                        line,
                        msg: "no numeric score column".into(),
                    })
                }
            };
            let emotion = emotion.to_lowercase();
            let Some(ei) = AFFECT_EMOTIONS.iter().position(|e| *e == emotion) else {
                return Err(Error::Parse {
                    path: origin.into(),
                    line,
                    msg: format!("unknown emotion {emotion:?}"),
                });
            };
            let score = parse_score(score, origin, line)?;
            if !(0.0..=1.0).contains(&score) {
                return Err(Error::Parse {
                    path: origin.into(),
                    line,
                    msg: format!("score {score} outside [0, 1]"),
                });
            }
            entries.entry(f[0].to_lowercase()).or_insert([0.0; 4])[ei] = score;
        }
        Ok(Self { entries })
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&read_text(path)?, &path.display().to_string())
    }

    pub fn insert(&mut self, word: &str, emotion: usize, score: f64) {
        self.entries.entry(word.to_lowercase()).or_insert([0.0; 4])[emotion] = score;
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Scores in [`AFFECT_EMOTIONS`] order; zeros for absent emotions.
    pub fn get(&self, word: &str) -> Option<[f64; 4]> {
        self.entries.get(&word.to_lowercase()).copied()
    }
}

/// Signed word polarity in [-1, 1].
#[derive(Clone, Debug, Default)]
pub struct PolarityLexicon {
    entries: HashMap<String, f64>,
}

impl PolarityLexicon {
    pub fn bundled() -> Self {
        Self::parse(DEFAULT_POLARITY, "polarity").expect("bundled polarity lexicon is valid")
    }

    pub fn parse(text: &str, origin: &str) -> Result<Self> {
        let mut entries = HashMap::new();
        for (line, f) in parse_tsv(text, origin, 2)? {
            let v = parse_score(&f[1], origin, line)?;
            if !(-1.0..=1.0).contains(&v) {
                return Err(Error::Parse {
                    path: origin.into(),
                    line,
                    msg: format!("polarity {v} outside [-1, 1]"),
                });
            }
            entries.insert(f[0].to_lowercase(), v);
        }
        Ok(Self { entries })
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&read_text(path)?, &path.display().to_string())
    }

    pub fn get(&self, word: &str) -> Option<f64> {
        self.entries.get(word).copied()
    }
}

/// One word per line, `#` comments allowed.
pub fn parse_word_list(text: &str) -> HashSet<String> {
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(str::to_lowercase)
        .collect()
}

pub fn bundled_magnifiers() -> HashSet<String> {
    parse_word_list(DEFAULT_MAGNIFIERS)
}

pub fn bundled_diminishers() -> HashSet<String> {
    parse_word_list(DEFAULT_DIMINISHERS)
}

/// Keyword lists per emotion, `emotion<TAB>keyword`.
pub fn parse_keyword_lists(text: &str, origin: &str) -> Result<BTreeMap<String, Vec<String>>> {
    let mut out: BTreeMap<String, Vec<String>> = BTreeMap::new();
    for (_, f) in parse_tsv(text, origin, 2)? {
        let list = out.entry(f[0].to_lowercase()).or_default();
        let kw = f[1].to_lowercase();
        if !list.contains(&kw) {
            list.push(kw);
        }
    }
    Ok(out)
}

pub fn bundled_keyword_lists() -> BTreeMap<String, Vec<String>> {
    parse_keyword_lists(include_str!("../../data/distant_keywords.tsv"), "distant_keywords")
        .expect("bundled keyword lists are valid")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_category_lexicon_shape() {
        let lex = CategoryLexicon::bundled();
        assert_eq!(lex.len(), 338);
        assert_eq!(lex.categories().len(), 16);
        let (ci, s) = lex.get("Furious").unwrap();
        assert_eq!(lex.categories()[ci], "anger");
        assert!(CATEGORY_SCORES.contains(&s));
    }

    #[test]
    fn category_scores_restricted() {
        let err = CategoryLexicon::parse("x\tjoy\t0.7\n", "c", DEFAULT_EXTRA_CATEGORIES).unwrap_err();
        assert!(err.to_string().contains("c:1"), "{err}");
        assert!(CategoryLexicon::parse("x\tboredom\t1\n", "c", DEFAULT_EXTRA_CATEGORIES).is_err());
        assert!(CategoryLexicon::parse("x\tboredom\t1\n", "c", ["boredom", "b", "c", "d"]).is_ok());
        assert!(CategoryLexicon::parse("", "c", ["joy", "b", "c", "d"]).is_err());
    }

    #[test]
    fn affect_column_orders() {
        let a = AffectLexicon::parse("term\tscore\tAffectDimension\nrage\t0.9\tanger\n", "a").unwrap();
        assert_eq!(a.get("rage"), Some([0.9, 0.0, 0.0, 0.0]));
        let b = AffectLexicon::parse("rage\tanger\t0.9\nrage\tfear\t0.2\n", "b").unwrap();
        assert_eq!(b.get("RAGE"), Some([0.9, 0.2, 0.0, 0.0]));
        assert!(AffectLexicon::parse("rage\tanger\t1.5\n", "c").is_err());
        assert!(AffectLexicon::parse("rage\tdisgust\t0.5\n", "d").is_err());
    }

    #[test]
    fn word_lists() {
        let m = bundled_magnifiers();
        assert!(m.contains("incredibly"));
        assert!(bundled_diminishers().contains("hardly"));
        assert!((25..=40).contains(&m.len()));
        let kw = bundled_keyword_lists();
        assert_eq!(kw.keys().collect::<Vec<_>>(), ["anger", "fear", "joy", "sadness"]);
    }
}
