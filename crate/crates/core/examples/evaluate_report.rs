//! Train a small model, save and reload its checkpoint, segment raw text and
//! print the evaluation report.

use crosswise::config::Config;
use crosswise::corpus::{make_synthetic_corpus, LabeledSentence, Vocab};
use crosswise::lexicon::build_lexicon;
use crosswise::metrics::{oov_recall, score_segmentation};
use crosswise::trainer::{evaluate, train, Segmenter};
use crosswise::Checkpoint;

fn main() -> crosswise::Result<()> {
    let s = |w: &[&str]| w.iter().map(|x| x.to_string()).collect::<Vec<_>>();
    let score = score_segmentation(&[s(&["ab", "c"])], &[s(&["a", "b", "c"])])?;
    println!(
        "P={:.4} R={:.4} F1={:.4}",
        score.precision(),
        score.recall(),
        score.f1()
    );
    let train_words = s(&["ab", "c"]).into_iter().collect();
    println!(
        "R_oov={:?}",
        oov_recall(&[s(&["ab", "d"])], &[s(&["ab", "d"])], &train_words)?
    );

    let (train_corpus, test_corpus) = make_synthetic_corpus(1, 400, 100);
    let vocab = Vocab::build([&train_corpus]);
    let mut config = Config::default();
    config.eras = 2;
    config.epochs = 3;
    config.d_a = 32;
    config.d_e = 32;
    let lexicons: Vec<_> = (0..2)
        .map(|e| build_lexicon(&train_corpus, e, config.ngram_min_count, config.max_ngram))
        .collect();
    let sentences: Vec<LabeledSentence> = train_corpus
        .sentences
        .iter()
        .map(LabeledSentence::from_raw)
        .collect::<crosswise::Result<_>>()?;
    let outcome = train(&sentences, &[], &vocab, &lexicons, &config)?;

    let path = std::env::temp_dir().join("crosswise-example.xwsm");
    outcome.checkpoint.save(&path)?;
    let loaded = Checkpoint::load(&path)?;
    assert_eq!(loaded, outcome.checkpoint);

    let report = evaluate(
        &loaded.params,
        &loaded.config,
        &loaded.vocab,
        &lexicons,
        &test_corpus,
        Some(&train_corpus),
    )?;
    print!("{report}{}", report.machine_lines());

    let seg = Segmenter::new(loaded, lexicons)?;
    for raw in test_corpus.sentences.iter().take(3) {
        let out = seg.segment(&raw.words.concat())?;
        println!(
            "{}\tera={} (gold: {}\tera={})",
            out.words.join(" "),
            out.era,
            raw.words.join(" "),
            raw.era
        );
    }
    Ok(())
}
