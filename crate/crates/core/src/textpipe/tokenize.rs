use std::sync::OnceLock;

use regex::Regex;

use super::{PosTag, Span, Token};

fn emoticon_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        Regex::new(
            r#"^(?:<3+|</3|[:;=8xX][-o^']?[()\[\]DPpOo/\\|*3$@]+|[()\[\]D][-o^']?[:;=8]|\^[_.-]?\^|-_-|o_O|O_o|T_T)"#,
        )
        .expect("emoticon pattern")
    })
}

fn url_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"^(?:https?://|www\.)\S+").expect("url pattern"))
}

/// Emoji code points: pictographs (including regional indicators), dingbats and symbols.
pub fn is_emoji(c: char) -> bool {
    matches!(c as u32,
        0x1F000..=0x1FAFF
        | 0x2600..=0x27BF
        | 0x2B00..=0x2BFF
        | 0x2190..=0x21FF
        | 0x2300..=0x23FF
        | 0x3030 | 0x303D | 0x3297 | 0x3299
    )
}

/// Joiners and modifiers that attach to a preceding emoji.
fn is_emoji_modifier(c: char) -> bool {
    matches!(c as u32, 0xFE0E | 0xFE0F | 0x200D | 0x1F3FB..=0x1F3FF | 0x20E3 | 0xE0020..=0xE007F)
}

fn is_word_char(c: char) -> bool {
    c.is_alphanumeric() || c == '_'
}

/// True when the surface is an emoticon or an emoji sequence.
pub fn is_emoticon_or_emoji(s: &str) -> bool {
    let Some(first) = s.chars().next() else {
        return false;
    };
    if is_emoji(first) {
        return true;
    }
    emoticon_re().find(s).is_some_and(|m| m.end() == s.len())
}

/// Splits raw text into tokens.
///
/// Whitespace separates chunks. Inside a chunk, URLs, `@mentions` and
/// `#hashtags` are kept whole, emoticons and emoji sequences become single
/// tokens, word characters (with inner apostrophes, hyphens and periods) group
/// into words and runs of one punctuation character stay together. Every
/// non-whitespace character ends up in exactly one token.
pub fn tokenize(text: &str) -> Vec<Token> {
    let mut out = Vec::new();
    let mut chunk_start = None;
    for (i, c) in text.char_indices().chain(std::iter::once((text.len(), ' '))) {
        if c.is_whitespace() {
            if let Some(s) = chunk_start.take() {
                tokenize_chunk(text, s, i, &mut out);
            }
        } else if chunk_start.is_none() {
            chunk_start = Some(i);
        }
    }
    out
}

fn push(out: &mut Vec<Token>, text: &str, start: usize, end: usize) {
    out.push(Token {
        surface: text[start..end].to_string(),
        pos: PosTag::Other,
        span: Span { start, end },
    });
}

fn tokenize_chunk(text: &str, start: usize, end: usize, out: &mut Vec<Token>) {
    let chunk = &text[start..end];
    if let Some(m) = url_re().find(chunk) {
        // trailing sentence punctuation is not part of the URL
        let url = m.as_str().trim_end_matches(['.', ',', '!', '?', ')', ';', ':', '"', '\'']);
        let url_end = start + url.len();
        push(out, text, start, url_end);
        if url_end < end {
            tokenize_chunk(text, url_end, end, out);
        }
        return;
    }
    let mut pos = start;
    while pos < end {
        let rest = &text[pos..end];
        let c = rest.chars().next().expect("non-empty rest");

        if (c == '@' || c == '#') && rest[c.len_utf8()..].chars().next().is_some_and(is_word_char) {
            let len = c.len_utf8()
                + rest[c.len_utf8()..]
                    .char_indices()
                    .find(|&(_, ch)| !is_word_char(ch))
                    .map_or(rest.len() - c.len_utf8(), |(i, _)| i);
            push(out, text, pos, pos + len);
            pos += len;
            continue;
        }

        if is_emoji(c) {
            let mut len = c.len_utf8();
            let mut joined = false;
            for ch in rest[len..].chars() {
                if is_emoji_modifier(ch) {
                    joined = ch == '\u{200D}';
                    len += ch.len_utf8();
                } else if joined && is_emoji(ch) {
                    joined = false;
                    len += ch.len_utf8();
                } else if (0x1F1E6..=0x1F1FF).contains(&(c as u32))
                    && (0x1F1E6..=0x1F1FF).contains(&(ch as u32))
                    && len == c.len_utf8()
                {
                    len += ch.len_utf8();
                } else {
                    break;
                }
            }
            push(out, text, pos, pos + len);
            pos += len;
            continue;
        }

        // Emoticons starting with a letter (xD, XP) only count when they are the
        // entire remainder, so words like "xylophone" are not split.
        if let Some(m) = emoticon_re().find(rest) {
            let letter_led = c.is_alphanumeric();
            let ends_chunk = m.end() == rest.len();
            let next_is_word = rest[m.end()..].chars().next().is_some_and(is_word_char);
            if (!letter_led || ends_chunk) && !next_is_word {
                push(out, text, pos, pos + m.end());
                pos += m.end();
                continue;
            }
        }

        if is_word_char(c) {
            let mut len = 0;
            let mut chars = rest.char_indices().peekable();
            while let Some((i, ch)) = chars.next() {
                if is_word_char(ch) {
                    len = i + ch.len_utf8();
                } else if matches!(ch, '\'' | '’' | '-' | '.')
                    && chars.peek().is_some_and(|&(_, nx)| nx.is_alphanumeric())
                    && !(ch == '.' && !rest[..i].chars().all(|x| x.is_ascii_digit() || x == '.'))
                {
                    len = i + ch.len_utf8();
                } else {
                    break;
                }
            }
            push(out, text, pos, pos + len);
            pos += len;
            continue;
        }

        // run of one repeated punctuation character
        let len: usize = rest.chars().take_while(|&ch| ch == c).map(char::len_utf8).sum();
        push(out, text, pos, pos + len);
        pos += len;
    }
}
