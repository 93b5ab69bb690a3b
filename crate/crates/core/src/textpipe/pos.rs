use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::tokenize::is_emoticon_or_emoji;
use super::Token;

/// The 25-tag Twitter part-of-speech inventory.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum PosTag {
    CommonNoun,
    Pronoun,
    ProperNoun,
    NominalPossessive,
    ProperPossessive,
    Verb,
    Adjective,
    Adverb,
    Interjection,
    Determiner,
    Preposition,
    Conjunction,
    VerbParticle,
    Existential,
    ExistentialVerbal,
    Hashtag,
    Mention,
    Discourse,
    Url,
    Emoticon,
    Numeral,
    Punctuation,
    Other,
    NominalVerbal,
    ProperVerbal,
}

impl PosTag {
    pub const ALL: [PosTag; 25] = [
        PosTag::CommonNoun,
        PosTag::Pronoun,
        PosTag::ProperNoun,
        PosTag::NominalPossessive,
        PosTag::ProperPossessive,
        PosTag::Verb,
        PosTag::Adjective,
        PosTag::Adverb,
        PosTag::Interjection,
        PosTag::Determiner,
        PosTag::Preposition,
        PosTag::Conjunction,
        PosTag::VerbParticle,
        PosTag::Existential,
        PosTag::ExistentialVerbal,
        PosTag::Hashtag,
        PosTag::Mention,
        PosTag::Discourse,
        PosTag::Url,
        PosTag::Emoticon,
        PosTag::Numeral,
        PosTag::Punctuation,
        PosTag::Other,
        PosTag::NominalVerbal,
        PosTag::ProperVerbal,
    ];

    /// Tag assigned to alphabetic words no rule recognises.
    pub const FALLBACK: PosTag = PosTag::CommonNoun;

    /// Single-character code used by the Twitter tagset.
    pub fn code(self) -> char {
        match self {
            PosTag::CommonNoun => 'N',
            PosTag::Pronoun => 'O',
            PosTag::ProperNoun => '^',
            PosTag::NominalPossessive => 'S',
            PosTag::ProperPossessive => 'Z',
            PosTag::Verb => 'V',
            PosTag::Adjective => 'A',
            PosTag::Adverb => 'R',
            PosTag::Interjection => '!',
            PosTag::Determiner => 'D',
            PosTag::Preposition => 'P',
            PosTag::Conjunction => '&',
            PosTag::VerbParticle => 'T',
            PosTag::Existential => 'X',
            PosTag::ExistentialVerbal => 'Y',
            PosTag::Hashtag => '#',
            PosTag::Mention => '@',
            PosTag::Discourse => '~',
            PosTag::Url => 'U',
            PosTag::Emoticon => 'E',
            PosTag::Numeral => '$',
            PosTag::Punctuation => ',',
            PosTag::Other => 'G',
            PosTag::NominalVerbal => 'L',
            PosTag::ProperVerbal => 'M',
        }
    }

    pub fn from_code(c: char) -> Option<PosTag> {
        PosTag::ALL.into_iter().find(|t| t.code() == c)
    }

    /// Embedding row for this tag; row 0 is reserved for padding.
    pub fn id(self) -> usize {
        PosTag::ALL.iter().position(|&t| t == self).expect("tag in inventory") + 1
    }
}

impl fmt::Display for PosTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.code())
    }
}

/// Assigns one tag from [`PosTag::ALL`] to every token.
pub trait PosTagger {
    fn tag(&self, tokens: &mut [Token]);
}

/// Lexicon and suffix rules.
#[derive(Clone, Debug)]
pub struct RuleTagger {
    lexicon: HashMap<String, PosTag>,
}

const CLOSED_CLASS: &[(PosTag, &str)] = &[
    (PosTag::Pronoun, "i me my mine myself you your yours yourself he him his himself she her hers herself it its itself we us our ours ourselves they them their theirs themselves this that these those who whom whose which what u ur"),
    (PosTag::Determiner, "a an the every each some any no all both either neither another such"),
    (PosTag::Preposition, "in on at by for with about against between into through during before after above below to from up down of off over under again than via without within upon"),
    (PosTag::Conjunction, "and or but nor yet so because although though while if unless whereas &"),
    (PosTag::Verb, "is am are was were be been being do does did have has had can could will would shall should may might must get got go goes went gone make made say said see saw know knew think thought take took come came want need love hate like feel felt fly"),
    (PosTag::Adverb, "not never very too also just now then here there always often sometimes still already really so quite almost even ever again soon"),
    (PosTag::Interjection, "lol lmao omg wow oh ah yay ugh haha hahaha hehe yes no yeah nah ok okay hey hi hello wtf smh"),
    (PosTag::Existential, "there"),
    (PosTag::ExistentialVerbal, "there's theres"),
    (PosTag::NominalVerbal, "i'm im you're youre he's she's it's its we're they're i'll you'll i've i'd that's thats what's"),
    (PosTag::Discourse, "rt"),
    (PosTag::Adjective, "good bad great nice happy sad angry new old big small best worst right wrong awesome terrible pleasant"),
];

impl Default for RuleTagger {
    fn default() -> Self {
        let mut lexicon = HashMap::new();
        for (tag, words) in CLOSED_CLASS {
            for w in words.split_whitespace() {
                lexicon.entry(w.to_string()).or_insert(*tag);
            }
        }
        Self { lexicon }
    }
}

impl RuleTagger {
    pub fn with_lexicon(entries: impl IntoIterator<Item = (String, PosTag)>) -> Self {
        let mut t = Self::default();
        for (w, tag) in entries {
            t.lexicon.insert(w.to_lowercase(), tag);
        }
        t
    }

    pub fn tag_word(&self, surface: &str, sentence_initial: bool) -> PosTag {
        let mut chars = surface.chars();
        let Some(first) = chars.next() else {
            return PosTag::Other;
        };
        let rest = chars.as_str();
        if surface.starts_with("http://") || surface.starts_with("https://") || surface.starts_with("www.") {
            return PosTag::Url;
        }
        if first == '@' && !rest.is_empty() {
            return PosTag::Mention;
        }
        if first == '#' && !rest.is_empty() {
            return PosTag::Hashtag;
        }
        if is_emoticon_or_emoji(surface) {
            return PosTag::Emoticon;
        }
        if surface.chars().all(|c| !c.is_alphanumeric()) {
            return PosTag::Punctuation;
        }
        if surface.chars().all(|c| c.is_ascii_digit() || c == '.' || c == ',') {
            return PosTag::Numeral;
        }
        let lower = surface.to_lowercase();
        if let Some(&tag) = self.lexicon.get(&lower) {
            return tag;
        }
        if !surface.chars().any(char::is_alphabetic) {
            return PosTag::Other;
        }
        if lower.ends_with("'s") || lower.ends_with("’s") {
            return if first.is_uppercase() {
                PosTag::ProperPossessive
            } else {
                PosTag::NominalPossessive
            };
        }
        let suffix = |s: &str| lower.len() > s.len() + 2 && lower.ends_with(s);
        if suffix("ing") || suffix("ed") {
            return PosTag::Verb;
        }
        if suffix("ly") {
            return PosTag::Adverb;
        }
        if ["ous", "ful", "ive", "able", "ible", "less", "ish", "ic", "al"].iter().any(|s| suffix(s)) {
            return PosTag::Adjective;
        }
        let all_caps = surface.chars().filter(|c| c.is_alphabetic()).all(char::is_uppercase);
        if first.is_uppercase() && !sentence_initial && !all_caps {
            return PosTag::ProperNoun;
        }
        PosTag::FALLBACK
    }
}

impl PosTagger for RuleTagger {
    fn tag(&self, tokens: &mut [Token]) {
        for i in 0..tokens.len() {
            let initial = i == 0;
            tokens[i].pos = self.tag_word(&tokens[i].surface, initial);
        }
    }
}
