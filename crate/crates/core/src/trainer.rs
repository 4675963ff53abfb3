//! Joint training, evaluation and segmentation with a trained model.

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::autodiff::{Graph, Matrix};
use crate::checkpoint::Checkpoint;
use crate::config::Config;
use crate::corpus::{
    bmes_to_words, preprocess_aligned, split_chars, LabeledSentence, RawCorpus, Vocab,
};
use crate::error::{Error, Result};
use crate::lexicon::EraLexicon;
use crate::metrics::{era_accuracy, oov_recall, score_segmentation, Report, ReportRow, SegScore};
use crate::model::{self, decode, forward, prepare, ModelParams, Prepared};
use crate::switcher::Phase;

/// Adam with bias correction.
#[derive(Clone, Debug)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    step: i32,
    m: Vec<Matrix>,
    v: Vec<Matrix>,
}

impl Adam {
    pub fn new(params: &ModelParams, lr: f64) -> Self {
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            step: 0,
            m: params.zeros_like(),
            v: params.zeros_like(),
        }
    }

    pub fn step(&mut self, params: &mut ModelParams, grads: &[Matrix]) {
        self.step += 1;
        let c1 = 1.0 - self.beta1.powi(self.step);
        let c2 = 1.0 - self.beta2.powi(self.step);
        for (((p, g), m), v) in params
            .tensors_mut()
            .into_iter()
            .zip(grads)
            .zip(&mut self.m)
            .zip(&mut self.v)
        {
            let p = p.data_mut();
            let (m, v) = (m.data_mut(), v.data_mut());
            for i in 0..p.len() {
                let gi = g.data()[i];
                m[i] = self.beta1 * m[i] + (1.0 - self.beta1) * gi;
                v[i] = self.beta2 * v[i] + (1.0 - self.beta2) * gi * gi;
                p[i] -= self.lr * (m[i] / c1) / ((v[i] / c2).sqrt() + self.eps);
            }
        }
    }
}

/// Rescale `grads` in place so their joint L2 norm is at most `max_norm`.
/// Returns the norm before clipping.
pub fn clip_global_norm(grads: &mut [Matrix], max_norm: f64) -> f64 {
    let norm = grads
        .iter()
        .flat_map(|g| g.data())
        .map(|x| x * x)
        .sum::<f64>()
        .sqrt();
    if norm > max_norm && norm > 0.0 {
        let c = max_norm / norm;
        for g in grads.iter_mut() {
            g.scale_assign(c);
        }
    }
    norm
}

/// Loss values of one sentence.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct LossValues {
    pub cws: f64,
    pub disc: f64,
    pub total: f64,
}

/// Gradients of the joint loss for one gold-labelled sentence, in
/// [`ModelParams::tensors`] order.
pub fn sentence_gradients(
    params: &ModelParams,
    config: &Config,
    input: &Prepared,
) -> Result<(Vec<Matrix>, LossValues)> {
    let mut g = Graph::new();
    let vars = params.bind(&mut g);
    let out = forward(&mut g, &vars, config, input, Phase::Train)?;
    let loss = model::loss(&mut g, &vars, config, &out, input)?;
    let values = LossValues {
        cws: g.value(loss.cws).get(0, 0),
        disc: g.value(loss.disc).get(0, 0),
        total: g.value(loss.total).get(0, 0),
    };
    g.backward(loss.total)?;
    let grads = vars
        .all
        .iter()
        .zip(params.tensors())
        .map(|(&v, m)| {
            g.grad(v)
                .cloned()
                .unwrap_or_else(|| Matrix::zeros(m.rows(), m.cols()))
        })
        .collect();
    Ok((grads, values))
}

/// Mean losses over one epoch and the dev score after it.
#[derive(Clone, Debug, PartialEq)]
pub struct EpochStats {
    pub epoch: usize,
    pub loss: LossValues,
    pub dev_f1: Option<f64>,
}

/// Result of [`train`].
#[derive(Clone, Debug)]
pub struct TrainOutcome {
    /// Parameters from the epoch with the best dev F1 (the last epoch when
    /// there is no dev data).
    pub checkpoint: Checkpoint,
    pub history: Vec<EpochStats>,
}

/// Drives the optimisation loop one batch at a time.
pub struct Trainer<'a> {
    pub config: Config,
    pub params: ModelParams,
    pub optimizer: Adam,
    lexicons: &'a [EraLexicon],
    vocab: &'a Vocab,
}

impl<'a> Trainer<'a> {
    pub fn new(config: Config, vocab: &'a Vocab, lexicons: &'a [EraLexicon]) -> Result<Self> {
        config.validate()?;
        if lexicons.len() != config.eras {
            return Err(Error::Config(format!(
                "{} eras configured but {} lexicons given",
                config.eras,
                lexicons.len()
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let sizes: Vec<usize> = lexicons.iter().map(|l| l.len()).collect();
        let params = ModelParams::init(&mut rng, &config, vocab.len(), &sizes);
        let optimizer = Adam::new(&params, config.lr);
        Ok(Self {
            config,
            params,
            optimizer,
            lexicons,
            vocab,
        })
    }

    pub fn prepare(&self, sentences: &[LabeledSentence]) -> Result<Vec<Prepared>> {
        sentences
            .iter()
            .map(|s| prepare(s, self.vocab, self.lexicons, self.config.max_ngram))
            .collect()
    }

    /// One parameter update from the mean gradient over `batch`.
    pub fn step(&mut self, batch: &[&Prepared]) -> Result<LossValues> {
        let mut acc = self.params.zeros_like();
        let mut sum = LossValues::default();
        for input in batch {
            let (grads, loss) = sentence_gradients(&self.params, &self.config, input)?;
            for (a, g) in acc.iter_mut().zip(&grads) {
                a.add_assign(g);
            }
            sum.cws += loss.cws;
            sum.disc += loss.disc;
            sum.total += loss.total;
        }
        let n = batch.len().max(1) as f64;
        for a in &mut acc {
            a.scale_assign(1.0 / n);
        }
        clip_global_norm(&mut acc, self.config.clip);
        self.optimizer.step(&mut self.params, &acc);
        Ok(sum)
    }

    pub fn checkpoint(&self, epoch: usize, dev_f1: f64) -> Checkpoint {
        Checkpoint {
            config: self.config.clone(),
            params: self.params.clone(),
            vocab: self.vocab.clone(),
            lexicon_hashes: self.lexicons.iter().map(|l| l.fingerprint()).collect(),
            epoch,
            dev_f1,
        }
    }
}

fn check_eras(sentences: &[LabeledSentence], eras: usize, need_all: bool) -> Result<()> {
    let mut seen = vec![false; eras];
    for s in sentences {
        let era = s.era.ok_or(Error::MissingGoldEra)?;
        if era >= eras {
            return Err(Error::EraOutOfRange { era, eras });
        }
        seen[era] = true;
    }
    if need_all {
        if let Some(missing) = seen.iter().position(|s| !s) {
            return Err(Error::Config(format!(
                "no training sentences for era {missing}"
            )));
        }
    }
    Ok(())
}

/// Train on `train` (all eras mixed), selecting the epoch with the best
/// pooled dev F1.
pub fn train(
    train: &[LabeledSentence],
    dev: &[LabeledSentence],
    vocab: &Vocab,
    lexicons: &[EraLexicon],
    config: &Config,
) -> Result<TrainOutcome> {
    train_with_progress(train, dev, vocab, lexicons, config, |_| {})
}

/// [`train`], calling `progress` after every epoch.
pub fn train_with_progress(
    train: &[LabeledSentence],
    dev: &[LabeledSentence],
    vocab: &Vocab,
    lexicons: &[EraLexicon],
    config: &Config,
    mut progress: impl FnMut(&EpochStats),
) -> Result<TrainOutcome> {
    let mut trainer = Trainer::new(config.clone(), vocab, lexicons)?;
    check_eras(train, config.eras, true)?;
    check_eras(dev, config.eras, false)?;
    let inputs = trainer.prepare(train)?;
    let dev_inputs = trainer.prepare(dev)?;

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed.wrapping_add(1));
    let mut order: Vec<usize> = (0..inputs.len()).collect();
    let mut history = Vec::with_capacity(config.epochs);
    let mut best: Option<Checkpoint> = None;

    for epoch in 1..=config.epochs {
        order.shuffle(&mut rng);
        let mut sum = LossValues::default();
        for (b, chunk) in order.chunks(config.batch).enumerate() {
            let batch: Vec<&Prepared> = chunk.iter().map(|&i| &inputs[i]).collect();
            let loss = trainer.step(&batch).map_err(|e| Error::Diverged {
                epoch,
                sentence: b * config.batch,
                msg: e.to_string(),
            })?;
            if !loss.total.is_finite() {
                return Err(Error::Diverged {
                    epoch,
                    sentence: b * config.batch,
                    msg: format!("loss {}", loss.total),
                });
            }
            sum.cws += loss.cws;
            sum.disc += loss.disc;
            sum.total += loss.total;
        }
        let n = inputs.len() as f64;
        let mean = LossValues {
            cws: sum.cws / n,
            disc: sum.disc / n,
            total: sum.total / n,
        };
        let dev_f1 = if dev_inputs.is_empty() {
            None
        } else {
            let predicted = decode_all(&trainer.params, &trainer.config, &dev_inputs)?;
            let gold: Vec<Vec<String>> = dev
                .iter()
                .map(|s| bmes_to_words(&s.chars, s.tags.as_deref().unwrap_or(&[])))
                .collect::<Result<_>>()?;
            let pred: Vec<Vec<String>> = dev
                .iter()
                .zip(&predicted)
                .map(|(s, d)| bmes_to_words(&s.chars, &d.tags))
                .collect::<Result<_>>()?;
            Some(score_segmentation(&gold, &pred)?.f1())
        };
        let stats = EpochStats {
            epoch,
            loss: mean,
            dev_f1,
        };
        progress(&stats);
        history.push(stats);

        let improved = match (&best, dev_f1) {
            (None, _) => true,
            (Some(_), None) => true,
            (Some(b), Some(f)) => f > b.dev_f1,
        };
        if improved {
            best = Some(trainer.checkpoint(epoch, dev_f1.unwrap_or(0.0)));
        }
    }
    let checkpoint = best.unwrap_or_else(|| trainer.checkpoint(0, 0.0));
    Ok(TrainOutcome {
        checkpoint,
        history,
    })
}

/// Decode prepared sentences on worker threads; output keeps input order.
pub fn decode_all(
    params: &ModelParams,
    config: &Config,
    inputs: &[Prepared],
) -> Result<Vec<model::Decoded>> {
    inputs
        .par_iter()
        .map(|p| decode(params, config, p))
        .collect()
}

/// Score `params` on gold corpora: one row per era present, then a pooled
/// row. OOV is measured against the era's own training words per era and
/// against their union for the pooled row; without `training` it is NA.
pub fn evaluate(
    params: &ModelParams,
    config: &Config,
    vocab: &Vocab,
    lexicons: &[EraLexicon],
    gold: &RawCorpus,
    training: Option<&RawCorpus>,
) -> Result<Report> {
    let sentences: Vec<LabeledSentence> = gold
        .sentences
        .iter()
        .map(LabeledSentence::from_raw)
        .collect::<Result<_>>()?;
    check_eras(&sentences, config.eras, false)?;
    let inputs: Vec<Prepared> = sentences
        .iter()
        .map(|s| prepare(s, vocab, lexicons, config.max_ngram))
        .collect::<Result<_>>()?;
    let decoded = decode_all(params, config, &inputs)?;
    let predicted: Vec<Vec<String>> = sentences
        .iter()
        .zip(&decoded)
        .map(|(s, d)| bmes_to_words(&s.chars, &d.tags))
        .collect::<Result<_>>()?;
    let gold_words: Vec<Vec<String>> = gold.sentences.iter().map(|s| s.words.clone()).collect();
    let gold_eras: Vec<usize> = gold.sentences.iter().map(|s| s.era).collect();
    let pred_eras: Vec<usize> = decoded.iter().map(|d| d.era).collect();

    let mut rows = Vec::new();
    let present: BTreeSet<usize> = gold_eras.iter().copied().collect();
    for era in present {
        let idx: Vec<usize> = (0..gold_eras.len())
            .filter(|&i| gold_eras[i] == era)
            .collect();
        let g: Vec<Vec<String>> = idx.iter().map(|&i| gold_words[i].clone()).collect();
        let p: Vec<Vec<String>> = idx.iter().map(|&i| predicted[i].clone()).collect();
        let roov = match training {
            Some(t) => {
                let words: BTreeSet<String> =
                    t.era(era).flat_map(|s| s.words.iter().cloned()).collect();
                oov_recall(&g, &p, &words)?
            }
            None => None,
        };
        let ge: Vec<usize> = idx.iter().map(|&i| gold_eras[i]).collect();
        let pe: Vec<usize> = idx.iter().map(|&i| pred_eras[i]).collect();
        rows.push(ReportRow {
            era: Some(era),
            score: score_segmentation(&g, &p)?,
            roov,
            era_acc: era_accuracy(&ge, &pe)?,
            sentences: idx.len(),
        });
    }
    let pooled = if gold_words.is_empty() {
        SegScore::default()
    } else {
        score_segmentation(&gold_words, &predicted)?
    };
    rows.push(ReportRow {
        era: None,
        score: pooled,
        roov: match training {
            Some(t) => oov_recall(&gold_words, &predicted, &t.word_types())?,
            None => None,
        },
        era_acc: era_accuracy(&gold_eras, &pred_eras)?,
        sentences: gold_words.len(),
    });
    Ok(Report { rows })
}

/// Output of [`Segmenter::segment`].
#[derive(Clone, Debug, PartialEq)]
pub struct Segmentation {
    /// Words in the surface form of the input.
    pub words: Vec<String>,
    /// Words over the preprocessed token alphabet.
    pub tokens: Vec<String>,
    pub era: usize,
    pub era_probs: Vec<f64>,
}

/// A trained model with its lexicons, ready for inference.
#[derive(Clone, Debug)]
pub struct Segmenter {
    pub checkpoint: Checkpoint,
    pub lexicons: Vec<EraLexicon>,
}

impl Segmenter {
    /// Fails when `lexicons` differ from the ones the checkpoint was trained
    /// with.
    pub fn new(checkpoint: Checkpoint, lexicons: Vec<EraLexicon>) -> Result<Self> {
        checkpoint.verify_lexicons(&lexicons)?;
        Ok(Self {
            checkpoint,
            lexicons,
        })
    }

    /// Decode already preprocessed characters.
    pub fn decode_chars(&self, chars: &[char]) -> Result<model::Decoded> {
        let ck = &self.checkpoint;
        let input = prepare(
            &LabeledSentence::unlabeled(chars.to_vec()),
            &ck.vocab,
            &self.lexicons,
            ck.config.max_ngram,
        )?;
        decode(&ck.params, &ck.config, &input)
    }

    /// Segment raw text. Inputs longer than the configured maximum are decoded
    /// in pieces; the reported era distribution is the length-weighted mean
    /// over pieces.
    pub fn segment(&self, text: &str) -> Result<Segmentation> {
        let aligned = preprocess_aligned(text);
        if aligned.is_empty() {
            return Err(Error::EmptySentence);
        }
        let chars: Vec<char> = aligned.iter().map(|t| t.0).collect();
        let eras = self.checkpoint.config.eras;
        let mut tokens = Vec::new();
        let mut era_probs = vec![0.0; eras];
        for piece in split_chars(&chars, self.checkpoint.config.max_len) {
            let d = self.decode_chars(piece)?;
            tokens.extend(bmes_to_words(piece, &d.tags)?);
            let w = piece.len() as f64 / chars.len() as f64;
            for (acc, p) in era_probs.iter_mut().zip(&d.era_probs) {
                *acc += w * p;
            }
        }
        let mut words = Vec::with_capacity(tokens.len());
        let mut at = 0;
        for t in &tokens {
            let n = t.chars().count();
            words.push(aligned[at..at + n].iter().map(|a| a.1).collect());
            at += n;
        }
        Ok(Segmentation {
            words,
            tokens,
            era: crate::switcher::argmax(&era_probs),
            era_probs,
        })
    }
}
