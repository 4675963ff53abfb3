//! Per-era dictionaries and candidate-word extraction.
//!
//! A lexicon for era `d` holds every word type seen in that era's training
//! data plus character bigrams and trigrams that occur at least
//! `ngram_min_count` times in the era's running text. Word ids double as row
//! indices into the era's key embedding table.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::corpus::RawCorpus;
use crate::error::{Error, Result};

pub const DEFAULT_MAX_NGRAM: usize = 5;

/// Boundary role of a character inside a matched word.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ValueClass {
    Begin,
    Middle,
    End,
    Single,
}

impl ValueClass {
    pub const COUNT: usize = 4;

    pub fn index(self) -> usize {
        self as usize
    }

    /// Role of position `i` inside the occurrence `[start, end)`.
    pub fn of(i: usize, start: usize, end: usize) -> ValueClass {
        debug_assert!(start <= i && i < end);
        if end - start == 1 {
            ValueClass::Single
        } else if i == start {
            ValueClass::Begin
        } else if i + 1 == end {
            ValueClass::End
        } else {
            ValueClass::Middle
        }
    }
}

#[derive(Default, Clone, Debug)]
struct TrieNode {
    children: HashMap<char, usize>,
    word: Option<usize>,
}

/// Character trie mapping words to their ids.
#[derive(Clone, Debug)]
pub struct Trie {
    nodes: Vec<TrieNode>,
}

impl Default for Trie {
    fn default() -> Self {
        Self {
            nodes: vec![TrieNode::default()],
        }
    }
}

impl Trie {
    pub fn insert(&mut self, word: &str, id: usize) {
        let mut cur = 0;
        for c in word.chars() {
            cur = match self.nodes[cur].children.get(&c) {
                Some(&n) => n,
                None => {
                    self.nodes.push(TrieNode::default());
                    let n = self.nodes.len() - 1;
                    self.nodes[cur].children.insert(c, n);
                    n
                }
            };
        }
        self.nodes[cur].word = Some(id);
    }

    pub fn get(&self, word: &str) -> Option<usize> {
        let mut cur = 0;
        for c in word.chars() {
            cur = *self.nodes[cur].children.get(&c)?;
        }
        self.nodes[cur].word
    }

    /// Every `(length, id)` of a word that is a prefix of `chars`, shortest
    /// first, up to `max_len` characters.
    pub fn prefixes(&self, chars: &[char], max_len: usize) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        let mut cur = 0;
        for (k, c) in chars.iter().take(max_len).enumerate() {
            match self.nodes[cur].children.get(c) {
                Some(&n) => cur = n,
                None => break,
            }
            if let Some(id) = self.nodes[cur].word {
                out.push((k + 1, id));
            }
        }
        out
    }
}

/// Dictionary for one era.
#[derive(Clone, Debug)]
pub struct EraLexicon {
    pub era: usize,
    words: Vec<String>,
    trie: Trie,
}

impl EraLexicon {
    /// Build from explicit words; ids follow sorted order.
    pub fn from_words<I, S>(era: usize, words: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let set: BTreeSet<String> = words
            .into_iter()
            .map(Into::into)
            .filter(|w: &String| !w.is_empty())
            .collect();
        let words: Vec<String> = set.into_iter().collect();
        let mut trie = Trie::default();
        for (id, w) in words.iter().enumerate() {
            trie.insert(w, id);
        }
        Self { era, words, trie }
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    pub fn id(&self, word: &str) -> Option<usize> {
        self.trie.get(word)
    }

    pub fn contains(&self, word: &str) -> bool {
        self.id(word).is_some()
    }

    pub fn word(&self, id: usize) -> Option<&str> {
        self.words.get(id).map(String::as_str)
    }

    pub fn trie(&self) -> &Trie {
        &self.trie
    }

    /// One word per line, sorted, newline terminated.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for w in &self.words {
            s.push_str(w);
            s.push('\n');
        }
        s
    }

    pub fn fingerprint(&self) -> String {
        hex::encode(Sha256::digest(self.to_text().as_bytes()))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>, era: usize) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::Data {
            path: path.to_path_buf(),
            line: 0,
            msg: e.to_string(),
        })?;
        Ok(Self::from_words(era, text.lines().map(str::to_string)))
    }
}

/// Build the era dictionary: gold word types of the era's sentences plus
/// frequent character bigrams and trigrams, with words longer than
/// `max_ngram` dropped.
pub fn build_lexicon(
    corpus: &RawCorpus,
    era: usize,
    ngram_min_count: usize,
    max_ngram: usize,
) -> EraLexicon {
    let mut words: BTreeSet<String> = BTreeSet::new();
    let mut counts: BTreeMap<String, usize> = BTreeMap::new();
    for s in corpus.era(era) {
        for w in &s.words {
            if w.chars().count() <= max_ngram {
                words.insert(w.clone());
            }
        }
        let chars = s.chars();
        for n in 2..=3usize.min(max_ngram) {
            for win in chars.windows(n) {
                *counts.entry(win.iter().collect()).or_default() += 1;
            }
        }
    }
    let min = ngram_min_count.max(1);
    words.extend(
        counts
            .into_iter()
            .filter(|(_, c)| *c >= min)
            .map(|(g, _)| g),
    );
    EraLexicon::from_words(era, words)
}

/// A matched dictionary word covering some character.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Candidate {
    pub word_id: usize,
    pub value: ValueClass,
}

/// Candidates for every character of one sentence under one lexicon.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct CandidateSet {
    pub per_char: Vec<Vec<Candidate>>,
}

impl CandidateSet {
    pub fn len(&self) -> usize {
        self.per_char.len()
    }

    pub fn is_empty(&self) -> bool {
        self.per_char.is_empty()
    }

    pub fn at(&self, i: usize) -> &[Candidate] {
        &self.per_char[i]
    }
}

/// For each position, every lexicon word occurring in `chars` that covers it,
/// ordered by match start then length, deduplicated on `(word, value)`.
pub fn extract_candidates(chars: &[char], lexicon: &EraLexicon, max_ngram: usize) -> CandidateSet {
    let mut per_char: Vec<Vec<Candidate>> = vec![Vec::new(); chars.len()];
    for start in 0..chars.len() {
        for (len, word_id) in lexicon.trie.prefixes(&chars[start..], max_ngram) {
            let end = start + len;
            for (i, slot) in per_char.iter_mut().enumerate().take(end).skip(start) {
                let cand = Candidate {
                    word_id,
                    value: ValueClass::of(i, start, end),
                };
                if !slot.contains(&cand) {
                    slot.push(cand);
                }
            }
        }
    }
    CandidateSet { per_char }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::RawSentence;

    fn corpus(lines: &[&[&str]], era: usize) -> RawCorpus {
        RawCorpus {
            sentences: lines
                .iter()
                .map(|ws| RawSentence {
                    words: ws.iter().map(|s| s.to_string()).collect(),
                    era,
                })
                .collect(),
            source_name: "t".into(),
        }
    }

    #[test]
    fn internal_dictionary_only() {
        let c = corpus(&[&["ab", "c"]], 0);
        let lex = build_lexicon(&c, 0, 10, 5);
        assert_eq!(lex.words(), &["ab".to_string(), "c".to_string()]);
    }

    #[test]
    fn frequent_bigram_is_added() {
        let c = corpus(&[&["x", "y"], &["x", "y", "z"]], 0);
        let lex = build_lexicon(&c, 0, 2, 5);
        assert!(lex.contains("xy"));
        assert!(!lex.contains("yz"));
        assert!(!lex.contains("xyz"));
    }

    #[test]
    fn other_eras_ignored() {
        let mut c = corpus(&[&["ab"]], 0);
        c.extend(corpus(&[&["cd"]], 1));
        let lex = build_lexicon(&c, 1, 10, 5);
        assert_eq!(lex.words(), &["cd".to_string()]);
    }

    #[test]
    fn deterministic_ids() {
        let c = corpus(&[&["b", "a", "ab"], &["ab"]], 0);
        let a = build_lexicon(&c, 0, 1, 5);
        let b = build_lexicon(&c, 0, 1, 5);
        assert_eq!(a.words(), b.words());
        assert_eq!(a.fingerprint(), b.fingerprint());
        for (i, w) in a.words().iter().enumerate() {
            assert_eq!(a.id(w), Some(i));
        }
    }

    #[test]
    fn figure_one_candidates() {
        let lex = EraLexicon::from_words(0, ["海口", "入海口", "海"]);
        let chars: Vec<char> = "入海口".chars().collect();
        let set = extract_candidates(&chars, &lex, 5);
        let got: Vec<(&str, ValueClass)> = set
            .at(1)
            .iter()
            .map(|c| (lex.word(c.word_id).unwrap(), c.value))
            .collect();
        assert_eq!(
            got,
            vec![
                ("入海口", ValueClass::Middle),
                ("海", ValueClass::Single),
                ("海口", ValueClass::Begin),
            ]
        );
    }

    #[test]
    fn single_char_and_no_match() {
        let lex = EraLexicon::from_words(0, ["a"]);
        let set = extract_candidates(&['a'], &lex, 5);
        assert_eq!(
            set.at(0),
            &[Candidate {
                word_id: 0,
                value: ValueClass::Single
            }]
        );
        let empty = EraLexicon::from_words(0, Vec::<String>::new());
        let set = extract_candidates(&['a', 'b'], &empty, 5);
        assert!(set.at(0).is_empty() && set.at(1).is_empty());
    }

    #[test]
    fn repeated_occurrence_deduplicated() {
        // "aa" in "aaa" covers position 1 twice: once as End, once as Begin
        let lex = EraLexicon::from_words(0, ["aa"]);
        let set = extract_candidates(&['a', 'a', 'a'], &lex, 5);
        assert_eq!(set.at(1).len(), 2);
        assert_eq!(set.at(0).len(), 1);
    }

    #[test]
    fn save_load_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("era0.txt");
        let lex = EraLexicon::from_words(0, ["乙", "甲", "甲乙"]);
        lex.save(&path).unwrap();
        let back = EraLexicon::load(&path, 0).unwrap();
        assert_eq!(back.fingerprint(), lex.fingerprint());
        assert_eq!(back.words(), lex.words());
    }
}
