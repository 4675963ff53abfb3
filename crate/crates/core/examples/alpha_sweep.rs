//! Grid search over the loss weight, then over the switch and fusion pairs,
//! selecting by dev F1.
//!
//! ```text
//! cargo run --release --example alpha_sweep -- [n_train] [epochs]
//! ```

use crosswise::cli::sweep_grid;
use crosswise::config::Config;
use crosswise::corpus::{make_synthetic_corpus, LabeledSentence, Vocab};
use crosswise::lexicon::build_lexicon;
use crosswise::trainer::train;

fn main() -> crosswise::Result<()> {
    let args: Vec<usize> = std::env::args()
        .skip(1)
        .filter_map(|a| a.parse().ok())
        .collect();
    let n_train = args.first().copied().unwrap_or(300);
    let epochs = args.get(1).copied().unwrap_or(2);

    let (train_corpus, dev_corpus) = make_synthetic_corpus(5, n_train, n_train / 5);
    let vocab = Vocab::build([&train_corpus]);
    let labeled = |c: &crosswise::corpus::RawCorpus| -> crosswise::Result<Vec<LabeledSentence>> {
        c.sentences.iter().map(LabeledSentence::from_raw).collect()
    };
    let (train_set, dev_set) = (labeled(&train_corpus)?, labeled(&dev_corpus)?);
    let mut base = Config::default();
    base.eras = 2;
    base.epochs = epochs;
    base.d_a = 16;
    base.d_e = 16;
    let lexicons: Vec<_> = (0..2)
        .map(|e| build_lexicon(&train_corpus, e, base.ngram_min_count, base.max_ngram))
        .collect();

    for grid in ["alpha", "modes"] {
        println!("setting\tdev_f1");
        for (label, config) in sweep_grid(&base, grid)? {
            let out = train(&train_set, &dev_set, &vocab, &lexicons, &config)?;
            println!("{label}\t{:.4}", out.checkpoint.dev_f1);
        }
    }
    Ok(())
}
