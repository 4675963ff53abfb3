//! BMES tagging, the repair rule for invalid tag sequences, and token
//! replacement of Latin runs, digit runs and punctuation.

use crosswise::corpus::{bmes_to_words, preprocess, preprocess_aligned, words_to_bmes, Tag};

fn show(tags: &[Tag]) -> String {
    tags.iter()
        .map(|t| t.to_string())
        .collect::<Vec<_>>()
        .join(" ")
}

fn main() -> crosswise::Result<()> {
    let words = ["等待", "谁", "来"];
    let tags = words_to_bmes(&words)?;
    println!("{} -> {}", words.join(" "), show(&tags));

    let chars: Vec<char> = "abc".chars().collect();
    for tags in [
        [Tag::B, Tag::B, Tag::S],
        [Tag::B, Tag::M, Tag::M],
        [Tag::M, Tag::E, Tag::E],
    ] {
        println!(
            "repair {} -> {:?}",
            show(&tags),
            bmes_to_words(&chars, &tags)?
        );
    }

    let text = "等待2021年，Hello世界";
    let tokens = preprocess(text);
    println!("{text} -> {} tokens", tokens.chars().count());
    for (token, surface) in preprocess_aligned(text) {
        println!("  U+{:04X} <- {surface:?}", token as u32);
    }
    assert_eq!(preprocess(&tokens), tokens);
    Ok(())
}
