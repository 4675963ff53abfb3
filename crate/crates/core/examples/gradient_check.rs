//! Finite-difference check of the whole network for each switch and fusion
//! pair on a two-character sentence.

use crosswise::autodiff::{grad_check, Matrix};
use crosswise::config::{Config, FusionMode, SwitchMode};
use crosswise::corpus::{LabeledSentence, RawCorpus, RawSentence, Vocab};
use crosswise::lexicon::build_lexicon;
use crosswise::model::{forward, loss, prepare, ModelParams, ModelVars};
use crosswise::switcher::Phase;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> crosswise::Result<()> {
    let corpus = RawCorpus {
        sentences: vec![
            RawSentence {
                words: vec!["天地".into()],
                era: 0,
            },
            RawSentence {
                words: vec!["天".into(), "地".into()],
                era: 1,
            },
        ],
        source_name: "inline".into(),
    };
    let vocab = Vocab::build([&corpus]);
    for switch in [SwitchMode::Hard, SwitchMode::Soft] {
        for fusion in [FusionMode::Sum, FusionMode::Concat] {
            let mut config = Config::default();
            config.eras = 2;
            config.d_a = 8;
            config.d_e = 4;
            config.switch_mode = switch;
            config.fusion = fusion;
            config.ngram_min_count = 1;
            let lexicons: Vec<_> = (0..2).map(|e| build_lexicon(&corpus, e, 1, 5)).collect();
            let sizes: Vec<usize> = lexicons.iter().map(|l| l.len()).collect();
            let params = ModelParams::init(
                &mut ChaCha8Rng::seed_from_u64(1),
                &config,
                vocab.len(),
                &sizes,
            );
            let tensors: Vec<Matrix> = params.tensors().into_iter().cloned().collect();
            for raw in &corpus.sentences {
                let input = prepare(
                    &LabeledSentence::from_raw(raw)?,
                    &vocab,
                    &lexicons,
                    config.max_ngram,
                )?;
                let report = grad_check(
                    |g, vars| {
                        let mv = ModelVars::from_vars(vars, config.eras).expect("tensor count");
                        let out = forward(g, &mv, &config, &input, Phase::Train)?;
                        Ok(loss(g, &mv, &config, &out, &input)?.total)
                    },
                    &tensors,
                    1e-5,
                )?;
                println!(
                    "{switch}+{fusion} era {}: {} entries, max relative error {:.2e}",
                    raw.era, report.entries, report.max_rel_error
                );
            }
        }
    }
    Ok(())
}
