//! The full network: encoder, per-era memories, switcher, fusion and CRF,
//! plus the joint objective.

use rand::Rng;

use crate::autodiff::{Graph, Matrix, Var};
use crate::config::{Config, FusionMode};
use crate::corpus::{LabeledSentence, Tag, Vocab};
use crate::crf;
use crate::encoder::{self, uniform, EncoderParams, EncoderVars};
use crate::error::{Error, Result};
use crate::lexicon::{extract_candidates, CandidateSet, EraLexicon};
use crate::memory::{self, MemoryParams, MemoryVars};
use crate::switcher::{self, DiscriminatorParams, FusionParams, Phase};

#[derive(Clone, Debug, PartialEq)]
pub struct CrfParams {
    /// `d_a x 4`
    pub weight: Matrix,
    /// `1 x 4`
    pub bias: Matrix,
    /// `5 x 4`; the last row holds start scores.
    pub transitions: Matrix,
}

/// Every trainable tensor.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelParams {
    pub encoder: EncoderParams,
    pub memory: MemoryParams,
    pub discriminator: DiscriminatorParams,
    pub fusion: FusionParams,
    pub crf: CrfParams,
}

impl ModelParams {
    /// Seeded uniform(-0.1, 0.1) initialization.
    pub fn init<R: Rng>(
        rng: &mut R,
        config: &Config,
        vocab_size: usize,
        lexicon_sizes: &[usize],
    ) -> Self {
        let d_a = config.d_a;
        let labels = Tag::COUNT;
        Self {
            encoder: EncoderParams::init(rng, vocab_size, config.d_e, d_a),
            memory: MemoryParams::init(rng, lexicon_sizes, d_a),
            discriminator: DiscriminatorParams::init(rng, d_a, config.eras),
            fusion: FusionParams::init(rng, d_a, config.fusion),
            crf: CrfParams {
                weight: uniform(rng, d_a, labels, 0.1),
                bias: uniform(rng, 1, labels, 0.1),
                transitions: uniform(rng, labels + 1, labels, 0.1),
            },
        }
    }

    /// All tensors in a fixed order shared by [`ModelParams::tensors_mut`],
    /// [`ModelParams::names`] and [`ModelVars::from_vars`].
    pub fn tensors(&self) -> Vec<&Matrix> {
        let mut v = self.encoder.tensors();
        v.extend(self.memory.tensors());
        v.extend([
            &self.discriminator.weight,
            &self.discriminator.bias,
            &self.fusion.weight,
            &self.fusion.bias,
            &self.crf.weight,
            &self.crf.bias,
            &self.crf.transitions,
        ]);
        v
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut Matrix> {
        let mut v = self.encoder.tensors_mut();
        v.extend(self.memory.tensors_mut());
        v.extend([
            &mut self.discriminator.weight,
            &mut self.discriminator.bias,
            &mut self.fusion.weight,
            &mut self.fusion.bias,
            &mut self.crf.weight,
            &mut self.crf.bias,
            &mut self.crf.transitions,
        ]);
        v
    }

    pub fn names(&self) -> Vec<String> {
        let mut n = vec!["encoder.char_emb".to_string()];
        for dir in ["fwd", "bwd"] {
            for p in [
                "w_z", "w_r", "w_n", "u_z", "u_r", "u_n", "b_z", "b_r", "b_n",
            ] {
                n.push(format!("encoder.{dir}.{p}"));
            }
        }
        for d in 0..self.memory.keys.len() {
            n.push(format!("memory.keys.{d}"));
        }
        n.push("memory.values".into());
        for p in [
            "discriminator.weight",
            "discriminator.bias",
            "fusion.weight",
            "fusion.bias",
            "crf.weight",
            "crf.bias",
            "crf.transitions",
        ] {
            n.push(p.into());
        }
        n
    }

    /// Rebuild from tensors in [`ModelParams::tensors`] order.
    pub fn from_tensors(tensors: Vec<Matrix>, eras: usize) -> Result<Self> {
        let count = tensors.len();
        let mut it = tensors.into_iter();
        let bad = || Error::Format(format!("unexpected tensor count {count}"));
        let encoder = EncoderParams::from_iter(&mut it).ok_or_else(bad)?;
        let memory = MemoryParams::from_iter(&mut it, eras).ok_or_else(bad)?;
        let mut next = || it.next().ok_or_else(bad);
        let params = Self {
            encoder,
            memory,
            discriminator: DiscriminatorParams {
                weight: next()?,
                bias: next()?,
            },
            fusion: FusionParams {
                weight: next()?,
                bias: next()?,
            },
            crf: CrfParams {
                weight: next()?,
                bias: next()?,
                transitions: next()?,
            },
        };
        if it.next().is_some() {
            return Err(bad());
        }
        Ok(params)
    }

    pub fn bind<'a>(&'a self, g: &mut Graph<'a>) -> ModelVars {
        let vars: Vec<Var> = self.tensors().into_iter().map(|m| g.leaf(m)).collect();
        ModelVars::from_vars(&vars, self.memory.keys.len()).expect("tensor count")
    }

    pub fn zeros_like(&self) -> Vec<Matrix> {
        self.tensors()
            .into_iter()
            .map(|m| Matrix::zeros(m.rows(), m.cols()))
            .collect()
    }
}

/// Graph handles for every parameter.
#[derive(Clone, Debug)]
pub struct ModelVars {
    pub all: Vec<Var>,
    pub encoder: EncoderVars,
    pub memory: MemoryVars,
    pub disc_weight: Var,
    pub disc_bias: Var,
    pub fusion_weight: Var,
    pub fusion_bias: Var,
    pub crf_weight: Var,
    pub crf_bias: Var,
    pub transitions: Var,
}

impl ModelVars {
    pub fn from_vars(vars: &[Var], eras: usize) -> Option<Self> {
        let mut it = vars.iter().copied();
        let encoder = EncoderVars::take(&mut it)?;
        let memory = MemoryVars::take(&mut it, eras)?;
        Some(Self {
            encoder,
            memory,
            disc_weight: it.next()?,
            disc_bias: it.next()?,
            fusion_weight: it.next()?,
            fusion_bias: it.next()?,
            crf_weight: it.next()?,
            crf_bias: it.next()?,
            transitions: it.next()?,
            all: vars.to_vec(),
        })
    }
}

/// A sentence turned into model inputs.
#[derive(Clone, Debug)]
pub struct Prepared {
    /// Sentinel first.
    pub ids: Vec<usize>,
    /// One candidate set per era.
    pub candidates: Vec<CandidateSet>,
    pub labels: Option<Vec<usize>>,
    pub era: Option<usize>,
}

pub fn prepare(
    sentence: &LabeledSentence,
    vocab: &Vocab,
    lexicons: &[EraLexicon],
    max_ngram: usize,
) -> Result<Prepared> {
    if sentence.is_empty() {
        return Err(Error::EmptySentence);
    }
    if let Some(e) = sentence.era {
        if e >= lexicons.len() {
            return Err(Error::EraOutOfRange {
                era: e,
                eras: lexicons.len(),
            });
        }
    }
    Ok(Prepared {
        ids: vocab.encode(&sentence.chars),
        candidates: lexicons
            .iter()
            .map(|lex| extract_candidates(&sentence.chars, lex, max_ngram))
            .collect(),
        labels: sentence
            .tags
            .as_ref()
            .map(|t| t.iter().map(|t| t.index()).collect()),
        era: sentence.era,
    })
}

/// Nodes produced by one forward pass.
#[derive(Clone, Copy, Debug)]
pub struct ForwardOut {
    /// `T x 4`
    pub emissions: Var,
    /// `1 x E`
    pub era_log_probs: Var,
    pub era_probs: Var,
    /// `T x d_a`, the switched memory.
    pub memory: Var,
}

pub fn forward(
    g: &mut Graph<'_>,
    vars: &ModelVars,
    config: &Config,
    input: &Prepared,
    phase: Phase,
) -> Result<ForwardOut> {
    let enc = encoder::encode(g, &vars.encoder, &input.ids)?;
    let (era_log_probs, era_probs) =
        switcher::classify_era(g, enc.sentence, vars.disc_weight, vars.disc_bias)?;

    let memory = if config.memory {
        let gold = input.era;
        let route = match config.switch_mode {
            crate::config::SwitchMode::Hard => Some(switcher::hard_route(
                g.value(era_probs).data(),
                phase,
                gold,
            )?),
            crate::config::SwitchMode::Soft => None,
        };
        // in hard mode only the routed cell is needed; the others are
        // placeholders the switch never reads
        let mut cells = Vec::with_capacity(config.eras);
        for d in 0..config.eras {
            let cell = if route.is_none() || route == Some(d) {
                memory::memory_cell(
                    g,
                    enc.chars,
                    vars.memory.keys[d],
                    vars.memory.values,
                    &input.candidates[d],
                )?
            } else {
                enc.chars
            };
            cells.push(cell);
        }
        switcher::switch(g, &cells, era_probs, config.switch_mode, phase, gold)?
    } else {
        let (rows, cols) = g.shape(enc.chars);
        g.constant(Matrix::zeros(rows, cols))
    };

    let fused = switcher::fuse(
        g,
        memory,
        enc.chars,
        vars.fusion_weight,
        vars.fusion_bias,
        config.fusion,
    )?;
    let emissions = crf::emissions(g, fused, vars.crf_weight, vars.crf_bias)?;
    Ok(ForwardOut {
        emissions,
        era_log_probs,
        era_probs,
        memory,
    })
}

/// `alpha * cws + (1 - alpha) * disc`.
pub fn joint_loss(cws: f64, disc: f64, alpha: f64) -> f64 {
    alpha * cws + (1.0 - alpha) * disc
}

/// Loss nodes of one sentence.
#[derive(Clone, Copy, Debug)]
pub struct LossOut {
    pub total: Var,
    pub cws: Var,
    pub disc: Var,
}

pub fn loss(
    g: &mut Graph<'_>,
    vars: &ModelVars,
    config: &Config,
    out: &ForwardOut,
    input: &Prepared,
) -> Result<LossOut> {
    let labels = input
        .labels
        .as_ref()
        .ok_or(Error::InvalidTag("missing gold tags".into()))?;
    let era = input.era.ok_or(Error::MissingGoldEra)?;
    let cws = crf::nll_node(g, out.emissions, vars.transitions, labels)?;
    let disc = switcher::era_loss(g, out.era_log_probs, era)?;
    let a = g.scale(cws, config.alpha)?;
    let b = g.scale(disc, 1.0 - config.alpha)?;
    let total = g.add(a, b)?;
    Ok(LossOut { total, cws, disc })
}

/// Decoded output for one sentence.
#[derive(Clone, Debug, PartialEq)]
pub struct Decoded {
    pub tags: Vec<Tag>,
    pub era: usize,
    pub era_probs: Vec<f64>,
}

/// Inference on one prepared sentence.
pub fn decode(params: &ModelParams, config: &Config, input: &Prepared) -> Result<Decoded> {
    let mut g = Graph::new();
    let vars = params.bind(&mut g);
    let out = forward(&mut g, &vars, config, input, Phase::Infer)?;
    let (labels, _) = crf::viterbi(g.value(out.emissions), g.value(vars.transitions))?;
    let era_probs = g.value(out.era_probs).data().to_vec();
    Ok(Decoded {
        tags: labels.into_iter().filter_map(Tag::from_index).collect(),
        era: switcher::argmax(&era_probs),
        era_probs,
    })
}

/// Fusion weight rows expected for `mode`.
pub fn fusion_rows(d_a: usize, mode: FusionMode) -> usize {
    match mode {
        FusionMode::Sum => d_a,
        FusionMode::Concat => 2 * d_a,
    }
}
