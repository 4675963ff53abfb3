//! Build an era dictionary from a segmented corpus and list the matched
//! candidate words, with their value classes, for every character.

use crosswise::corpus::{parse_corpus, LabeledSentence};
use crosswise::lexicon::{build_lexicon, extract_candidates, EraLexicon};

fn main() -> crosswise::Result<()> {
    let text = "长江 入海口 在 上海\n海口 是 城市\n入海 口\n";
    let corpus = parse_corpus(text.as_bytes(), "inline".as_ref(), 0, 126)?;
    // frequent bigrams and trigrams join the word types once seen twice
    let lexicon = build_lexicon(&corpus, 0, 2, 5);
    println!("dictionary: {:?}", lexicon.words());

    let sentence = LabeledSentence::from_raw(&corpus.sentences[0])?;
    let set = extract_candidates(&sentence.chars, &lexicon, 5);
    for (i, c) in sentence.chars.iter().enumerate() {
        let cands: Vec<String> = set
            .at(i)
            .iter()
            .map(|cand| {
                format!(
                    "{}:{:?}",
                    lexicon.word(cand.word_id).unwrap_or("?"),
                    cand.value
                )
            })
            .collect();
        println!("{c} {}", cands.join(" "));
    }

    let small = EraLexicon::from_words(0, ["海口", "入海口", "海"]);
    let chars: Vec<char> = "入海口".chars().collect();
    let at_sea = extract_candidates(&chars, &small, 5);
    println!("candidates of 海 in 入海口: {:?}", at_sea.at(1));
    Ok(())
}
