//! Train on the synthetic two-era corpus with and without the dictionary
//! memories and compare test scores.
//!
//! ```text
//! cargo run --release --example train_synthetic -- [n_train] [n_test] [epochs]
//! ```

use std::time::Instant;

use crosswise::config::Config;
use crosswise::corpus::{make_synthetic_corpus, LabeledSentence, Vocab};
use crosswise::lexicon::build_lexicon;
use crosswise::trainer::{evaluate, train_with_progress};

fn main() -> crosswise::Result<()> {
    let args: Vec<usize> = std::env::args()
        .skip(1)
        .filter_map(|a| a.parse().ok())
        .collect();
    let n_train = args.first().copied().unwrap_or(2000);
    let n_test = args.get(1).copied().unwrap_or(400);
    let epochs = args.get(2).copied().unwrap_or(10);

    let (train, test) = make_synthetic_corpus(7, n_train, n_test);
    let vocab = Vocab::build([&train]);
    let sentences: Vec<LabeledSentence> = train
        .sentences
        .iter()
        .map(LabeledSentence::from_raw)
        .collect::<crosswise::Result<_>>()?;

    let mut base = Config::default();
    base.eras = 2;
    base.epochs = epochs;
    let lexicons: Vec<_> = (0..2)
        .map(|e| build_lexicon(&train, e, base.ngram_min_count, base.max_ngram))
        .collect();
    for (e, l) in lexicons.iter().enumerate() {
        println!("era {e}: {} dictionary entries", l.len());
    }

    let mut ablated = base.clone();
    ablated.memory = false;
    ablated.alpha = 1.0;

    for (name, config) in [("with memory", base), ("memory off, alpha=1", ablated)] {
        let start = Instant::now();
        let outcome = train_with_progress(&sentences, &[], &vocab, &lexicons, &config, |s| {
            println!(
                "  epoch {:>2}  loss {:.4}  cws {:.4}  era {:.4}",
                s.epoch, s.loss.total, s.loss.cws, s.loss.disc
            );
        })?;
        let secs = start.elapsed().as_secs_f64();
        let report = evaluate(
            &outcome.checkpoint.params,
            &config,
            &vocab,
            &lexicons,
            &test,
            Some(&train),
        )?;
        println!("{name}: trained in {secs:.1}s");
        print!("{report}");
    }
    Ok(())
}
