//! Corpus ingestion, the BMES tagging scheme, preprocessing, vocabularies
//! and the synthetic two-era corpus used by tests and examples.

use std::collections::BTreeSet;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Replaces a maximal run of Latin letters.
pub const LATIN_TOKEN: char = '\u{E000}';
/// Replaces a maximal run of digits.
pub const NUM_TOKEN: char = '\u{E001}';
/// Replaces each punctuation character.
pub const PUNC_TOKEN: char = '\u{E002}';

/// Default cap on content characters per sentence.
pub const DEFAULT_MAX_LEN: usize = 126;

/// Position of a character inside its word.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Tag {
    B,
    M,
    E,
    S,
}

impl Tag {
    pub const ALL: [Tag; 4] = [Tag::B, Tag::M, Tag::E, Tag::S];
    pub const COUNT: usize = 4;

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Tag> {
        Self::ALL.get(i).copied()
    }
}

impl fmt::Display for Tag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Tag::B => "B",
            Tag::M => "M",
            Tag::E => "E",
            Tag::S => "S",
        };
        f.write_str(s)
    }
}

impl FromStr for Tag {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "B" => Ok(Tag::B),
            "M" => Ok(Tag::M),
            "E" => Ok(Tag::E),
            "S" => Ok(Tag::S),
            other => Err(Error::InvalidTag(other.to_string())),
        }
    }
}

/// Tag each character of a word sequence.
pub fn words_to_bmes<S: AsRef<str>>(words: &[S]) -> Result<Vec<Tag>> {
    if words.is_empty() {
        return Err(Error::EmptySentence);
    }
    let mut tags = Vec::new();
    for w in words {
        let n = w.as_ref().chars().count();
        match n {
            0 => return Err(Error::EmptyWord),
            1 => tags.push(Tag::S),
            _ => {
                tags.push(Tag::B);
                tags.extend(std::iter::repeat_n(Tag::M, n - 2));
                tags.push(Tag::E);
            }
        }
    }
    Ok(tags)
}

/// Rebuild words from characters and tags.
///
/// Ill-formed tag sequences are repaired: a word is closed before every `B`
/// or `S` and at the end of the sentence, so the output always concatenates
/// back to `chars`.
pub fn bmes_to_words(chars: &[char], tags: &[Tag]) -> Result<Vec<String>> {
    if chars.len() != tags.len() {
        return Err(Error::LengthMismatch {
            what: "chars vs tags",
            left: chars.len(),
            right: tags.len(),
        });
    }
    let mut words = Vec::new();
    let mut current = String::new();
    for (&c, &t) in chars.iter().zip(tags) {
        if matches!(t, Tag::B | Tag::S) && !current.is_empty() {
            words.push(std::mem::take(&mut current));
        }
        current.push(c);
        if matches!(t, Tag::E | Tag::S) {
            words.push(std::mem::take(&mut current));
        }
    }
    if !current.is_empty() {
        words.push(current);
    }
    Ok(words)
}

/// Whether a tag sequence is well formed under BMES.
pub fn is_valid_bmes(tags: &[Tag]) -> bool {
    let mut open = false;
    for &t in tags {
        match (open, t) {
            (false, Tag::B) => open = true,
            (false, Tag::S) => {}
            (true, Tag::M) => {}
            (true, Tag::E) => open = false,
            _ => return false,
        }
    }
    !open
}

fn is_latin(c: char) -> bool {
    c.is_ascii_alphabetic()
        || (('\u{00C0}'..='\u{024F}').contains(&c) && c.is_alphabetic())
        || ('\u{FF21}'..='\u{FF3A}').contains(&c)
        || ('\u{FF41}'..='\u{FF5A}').contains(&c)
}

fn is_digit(c: char) -> bool {
    c.is_ascii_digit() || ('\u{FF10}'..='\u{FF19}').contains(&c)
}

fn is_punct(c: char) -> bool {
    c.is_ascii_punctuation()
        || ('\u{2000}'..='\u{206F}').contains(&c)
        || ('\u{3001}'..='\u{303F}').contains(&c)
        || ('\u{FE30}'..='\u{FE4F}').contains(&c)
        || ('\u{FF01}'..='\u{FF0F}').contains(&c)
        || ('\u{FF1A}'..='\u{FF20}').contains(&c)
        || ('\u{FF3B}'..='\u{FF40}').contains(&c)
        || ('\u{FF5B}'..='\u{FF65}').contains(&c)
        || matches!(
            c,
            '\u{00A1}' | '\u{00AB}' | '\u{00B7}' | '\u{00BB}' | '\u{00BF}'
        )
}

/// Collapse Latin runs and digit runs to single reserved tokens, map every
/// punctuation character to the punctuation token and drop whitespace.
/// Idempotent.
pub fn preprocess(text: &str) -> String {
    preprocess_aligned(text)
        .into_iter()
        .map(|(c, _)| c)
        .collect()
}

/// [`preprocess`], keeping for each output token the slice of `text` it
/// stands for.
pub fn preprocess_aligned(text: &str) -> Vec<(char, &str)> {
    let mut out: Vec<(char, &str)> = Vec::new();
    let mut run_start = 0;
    // class of the raw Latin or digit run in progress; reserved tokens
    // already in the input never extend a run, which keeps this idempotent
    let mut run: Option<char> = None;
    for (at, c) in text.char_indices() {
        let (mapped, runnable) = if is_latin(c) {
            (LATIN_TOKEN, true)
        } else if is_digit(c) {
            (NUM_TOKEN, true)
        } else if is_punct(c) {
            (PUNC_TOKEN, false)
        } else if c.is_whitespace() {
            run = None;
            continue;
        } else {
            (c, false)
        };
        let end = at + c.len_utf8();
        if runnable && run == Some(mapped) {
            if let Some(last) = out.last_mut() {
                last.1 = &text[run_start..end];
            }
        } else {
            run_start = at;
            out.push((mapped, &text[at..end]));
        }
        run = runnable.then_some(mapped);
    }
    out
}

/// Gold-segmented sentence with its era.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RawSentence {
    pub words: Vec<String>,
    pub era: usize,
}

impl RawSentence {
    pub fn chars(&self) -> Vec<char> {
        self.words.iter().flat_map(|w| w.chars()).collect()
    }

    pub fn char_len(&self) -> usize {
        self.words.iter().map(|w| w.chars().count()).sum()
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct RawCorpus {
    pub sentences: Vec<RawSentence>,
    pub source_name: String,
}

impl RawCorpus {
    pub fn len(&self) -> usize {
        self.sentences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sentences.is_empty()
    }

    /// Sentences belonging to one era.
    pub fn era(&self, era: usize) -> impl Iterator<Item = &RawSentence> {
        self.sentences.iter().filter(move |s| s.era == era)
    }

    /// Sorted, deduplicated word types.
    pub fn word_types(&self) -> BTreeSet<String> {
        self.sentences
            .iter()
            .flat_map(|s| s.words.iter().cloned())
            .collect()
    }

    pub fn extend(&mut self, other: RawCorpus) {
        self.sentences.extend(other.sentences);
    }

    /// Render in the on-disk format: words joined by U+0020, one per line.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for sent in &self.sentences {
            s.push_str(&sent.words.join(" "));
            s.push('\n');
        }
        s
    }
}

/// Unit of training and inference.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LabeledSentence {
    pub chars: Vec<char>,
    pub tags: Option<Vec<Tag>>,
    pub era: Option<usize>,
}

impl LabeledSentence {
    pub fn from_raw(raw: &RawSentence) -> Result<Self> {
        Ok(Self {
            chars: raw.chars(),
            tags: Some(words_to_bmes(&raw.words)?),
            era: Some(raw.era),
        })
    }

    pub fn unlabeled(chars: Vec<char>) -> Self {
        Self {
            chars,
            tags: None,
            era: None,
        }
    }

    pub fn len(&self) -> usize {
        self.chars.len()
    }

    pub fn is_empty(&self) -> bool {
        self.chars.is_empty()
    }
}

/// Split a word sequence so that no piece exceeds `max_len` characters,
/// cutting after the last punctuation token that fits when there is one and
/// at the last fitting word boundary otherwise. A single word longer than
/// `max_len` is kept whole.
pub fn split_long(words: Vec<String>, max_len: usize) -> Vec<Vec<String>> {
    let mut out = Vec::new();
    let mut chunk: Vec<String> = Vec::new();
    let mut chunk_len = 0;
    for w in words {
        let n = w.chars().count();
        while chunk_len + n > max_len && !chunk.is_empty() {
            let cut = chunk
                .iter()
                .rposition(|x| x.chars().all(|c| c == PUNC_TOKEN))
                .map_or(chunk.len(), |p| p + 1);
            let rest = chunk.split_off(cut);
            out.push(std::mem::replace(&mut chunk, rest));
            chunk_len = chunk.iter().map(|x| x.chars().count()).sum();
        }
        chunk_len += n;
        chunk.push(w);
    }
    if !chunk.is_empty() {
        out.push(chunk);
    }
    out
}

/// Split an unsegmented character stream into pieces of at most `max_len`,
/// preferring to cut right after a punctuation token.
pub fn split_chars(chars: &[char], max_len: usize) -> Vec<&[char]> {
    let max_len = max_len.max(1);
    let mut out = Vec::new();
    let mut rest = chars;
    while rest.len() > max_len {
        let cut = rest[..max_len]
            .iter()
            .rposition(|&c| c == PUNC_TOKEN)
            .map_or(max_len, |p| p + 1);
        let (head, tail) = rest.split_at(cut);
        out.push(head);
        rest = tail;
    }
    if !rest.is_empty() {
        out.push(rest);
    }
    out
}

/// Parse corpus text already in memory; `path` is only used in messages.
pub fn parse_corpus(bytes: &[u8], path: &Path, era: usize, max_len: usize) -> Result<RawCorpus> {
    let mut sentences = Vec::new();
    for (lineno, line) in bytes.split(|&b| b == b'\n').enumerate() {
        let line = std::str::from_utf8(line).map_err(|e| Error::Data {
            path: path.to_path_buf(),
            line: lineno + 1,
            msg: format!("invalid UTF-8: {e}"),
        })?;
        let words: Vec<String> = line
            .split(' ')
            .map(preprocess)
            .filter(|w| !w.is_empty())
            .collect();
        if words.is_empty() {
            continue;
        }
        for piece in split_long(words, max_len) {
            sentences.push(RawSentence { words: piece, era });
        }
    }
    Ok(RawCorpus {
        sentences,
        source_name: path.display().to_string(),
    })
}

/// Load a space-segmented UTF-8 corpus file, one sentence per line.
pub fn load_corpus(path: impl AsRef<Path>, era: usize, max_len: usize) -> Result<RawCorpus> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::Data {
        path: path.to_path_buf(),
        line: 0,
        msg: e.to_string(),
    })?;
    parse_corpus(&bytes, path, era, max_len)
}

/// Character vocabulary with reserved ids.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Vocab {
    chars: Vec<char>,
    index: std::collections::HashMap<char, usize>,
}

impl Vocab {
    pub const PAD: usize = 0;
    pub const UNK: usize = 1;
    pub const SENTINEL: usize = 2;
    pub const RESERVED: usize = 3;

    /// Build from the characters of the given corpora, sorted by code point.
    pub fn build<'a>(corpora: impl IntoIterator<Item = &'a RawCorpus>) -> Self {
        let mut set = BTreeSet::new();
        for c in corpora {
            for s in &c.sentences {
                for w in &s.words {
                    set.extend(w.chars());
                }
            }
        }
        Self::from_chars(set.into_iter().collect())
    }

    /// Non-reserved characters in id order (id = position + RESERVED).
    pub fn from_chars(chars: Vec<char>) -> Self {
        let index = chars
            .iter()
            .enumerate()
            .map(|(i, &c)| (c, i + Self::RESERVED))
            .collect();
        Self { chars, index }
    }

    pub fn len(&self) -> usize {
        self.chars.len() + Self::RESERVED
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn id(&self, c: char) -> usize {
        self.index.get(&c).copied().unwrap_or(Self::UNK)
    }

    pub fn char_of(&self, id: usize) -> Option<char> {
        id.checked_sub(Self::RESERVED)
            .and_then(|i| self.chars.get(i).copied())
    }

    /// Ids for `chars` with the sentinel prepended (length T + 1).
    pub fn encode(&self, chars: &[char]) -> Vec<usize> {
        std::iter::once(Self::SENTINEL)
            .chain(chars.iter().map(|&c| self.id(c)))
            .collect()
    }

    pub fn chars(&self) -> &[char] {
        &self.chars
    }

    pub fn to_text(&self) -> String {
        self.chars.iter().collect()
    }

    pub fn from_text(text: &str) -> Self {
        Self::from_chars(text.chars().collect())
    }

    pub fn fingerprint(&self) -> String {
        hex::encode(Sha256::digest(self.to_text().as_bytes()))
    }
}

const SYNTH_ALPHABET: &str = "天地人山水日月风云石木金火土花草鸟鱼马牛羊田口心手目耳言行立走";
const SYNTH_PAIR_CHARS: &str = "东西南北上下左右";
const SYNTH_MARKERS: [&str; 2] = ["曰矣焉哉", "的了吗呢"];
const SYNTH_TYPES_PER_ERA: usize = 300;

struct SynthEra {
    words: Vec<String>,
    cumulative: Vec<f64>,
    markers: Vec<char>,
}

impl SynthEra {
    fn sample_word(&self, rng: &mut ChaCha8Rng) -> &str {
        let u: f64 = rng.gen::<f64>() * self.cumulative.last().copied().unwrap_or(1.0);
        let i = self.cumulative.partition_point(|&c| c < u);
        &self.words[i.min(self.words.len() - 1)]
    }
}

fn synth_word(rng: &mut ChaCha8Rng, alphabet: &[char], weights: &[f64; 4]) -> String {
    let total: f64 = weights.iter().sum();
    let mut u = rng.gen::<f64>() * total;
    let mut len = 1;
    for (i, w) in weights.iter().enumerate() {
        if u < *w {
            len = i + 1;
            break;
        }
        u -= w;
    }
    (0..len).map(|_| *alphabet.choose(rng).unwrap()).collect()
}

/// Generate a two-era corpus over a shared alphabet.
///
/// Each era draws words from its own Zipf-distributed lexicon. A fixed set of
/// character pairs is written as one word in era 0 and as two single-character
/// words in era 1. With probability 0.9 a sentence carries one era-specific
/// marker character. Deterministic for a given seed.
pub fn make_synthetic_corpus(seed: u64, n_train: usize, n_test: usize) -> (RawCorpus, RawCorpus) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let alphabet: Vec<char> = SYNTH_ALPHABET.chars().collect();
    let pair_chars: Vec<char> = SYNTH_PAIR_CHARS.chars().collect();
    let pairs: Vec<(char, char)> = pair_chars.chunks(2).map(|p| (p[0], p[1])).collect();

    let length_weights = [[0.25, 0.5, 0.2, 0.05], [0.2, 0.4, 0.3, 0.1]];
    let eras: Vec<SynthEra> = (0..2)
        .map(|e| {
            let mut seen = BTreeSet::new();
            let mut words = Vec::new();
            while words.len() < SYNTH_TYPES_PER_ERA {
                let w = synth_word(&mut rng, &alphabet, &length_weights[e]);
                if seen.insert(w.clone()) {
                    words.push(w);
                }
            }
            let mut acc = 0.0;
            let cumulative = (0..words.len())
                .map(|r| {
                    acc += 1.0 / (r as f64 + 1.0);
                    acc
                })
                .collect();
            SynthEra {
                words,
                cumulative,
                markers: SYNTH_MARKERS[e].chars().collect(),
            }
        })
        .collect();

    let sentence = |rng: &mut ChaCha8Rng| -> RawSentence {
        let era = rng.gen_range(0..2);
        let spec = &eras[era];
        let n = rng.gen_range(3..=9);
        let mut words: Vec<String> = (0..n).map(|_| spec.sample_word(rng).to_string()).collect();
        if rng.gen_bool(0.6) {
            let (a, b) = pairs[rng.gen_range(0..pairs.len())];
            let at = rng.gen_range(0..=words.len());
            if era == 0 {
                words.insert(at, format!("{a}{b}"));
            } else {
                words.insert(at, b.to_string());
                words.insert(at, a.to_string());
            }
        }
        if rng.gen_bool(0.9) {
            let m = spec.markers[rng.gen_range(0..spec.markers.len())];
            let at = rng.gen_range(0..=words.len());
            words.insert(at, m.to_string());
        }
        RawSentence { words, era }
    };

    let train = (0..n_train).map(|_| sentence(&mut rng)).collect();
    let test = (0..n_test).map(|_| sentence(&mut rng)).collect();
    (
        RawCorpus {
            sentences: train,
            source_name: format!("synthetic-train-{seed}"),
        },
        RawCorpus {
            sentences: test,
            source_name: format!("synthetic-test-{seed}"),
        },
    )
}
