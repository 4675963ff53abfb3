//! Era discriminator, memory switching and fusion with the encoder output.

use rand::Rng;

use crate::autodiff::{Graph, Matrix, Var};
use crate::config::{FusionMode, SwitchMode};
use crate::encoder::uniform;
use crate::error::{Error, Result};

/// Affine era classifier over the sentence vector.
#[derive(Clone, Debug, PartialEq)]
pub struct DiscriminatorParams {
    /// `d_a x E`
    pub weight: Matrix,
    /// `1 x E`
    pub bias: Matrix,
}

impl DiscriminatorParams {
    pub fn init<R: Rng>(rng: &mut R, d_a: usize, eras: usize) -> Self {
        Self {
            weight: uniform(rng, d_a, eras, 0.1),
            bias: uniform(rng, 1, eras, 0.1),
        }
    }
}

/// Fully connected layer applied to the fused memory and character vectors.
#[derive(Clone, Debug, PartialEq)]
pub struct FusionParams {
    /// `d_a x d_a` for sum fusion, `2 d_a x d_a` for concat fusion.
    pub weight: Matrix,
    /// `1 x d_a`
    pub bias: Matrix,
}

impl FusionParams {
    pub fn init<R: Rng>(rng: &mut R, d_a: usize, mode: FusionMode) -> Self {
        let d_in = match mode {
            FusionMode::Sum => d_a,
            FusionMode::Concat => 2 * d_a,
        };
        Self {
            weight: uniform(rng, d_in, d_a, 0.1),
            bias: uniform(rng, 1, d_a, 0.1),
        }
    }
}

/// Log-probabilities and probabilities over eras, both `1 x E`.
pub fn classify_era(
    g: &mut Graph<'_>,
    sentence: Var,
    weight: Var,
    bias: Var,
) -> Result<(Var, Var)> {
    let logits = g.matmul(sentence, weight)?;
    let logits = g.add(logits, bias)?;
    let log_probs = g.log_softmax_row(logits)?;
    let probs = g.softmax_row(logits)?;
    Ok((log_probs, probs))
}

/// Discriminator loss `-log p(gold)`.
pub fn era_loss(g: &mut Graph<'_>, log_probs: Var, gold: usize) -> Result<Var> {
    let eras = g.shape(log_probs).1;
    if gold >= eras {
        return Err(Error::EraOutOfRange { era: gold, eras });
    }
    let mut onehot = Matrix::zeros(1, eras);
    onehot.set(0, gold, -1.0);
    let mask = g.constant(onehot);
    let picked = g.mul(log_probs, mask)?;
    g.sum(picked)
}

/// Index of the largest probability; ties go to the lowest era.
pub fn argmax(probs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &p) in probs.iter().enumerate() {
        if p > probs[best] {
            best = i;
        }
    }
    best
}

/// Whether the graph is being built for a parameter update or for decoding.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Phase {
    Train,
    Infer,
}

/// Which era's memory a hard switch routes to.
pub fn hard_route(probs: &[f64], phase: Phase, gold: Option<usize>) -> Result<usize> {
    match phase {
        Phase::Train => gold.ok_or(Error::MissingGoldEra),
        Phase::Infer => Ok(argmax(probs)),
    }
}

/// Combine the per-era memory outputs (each `T x d_a`) into one.
///
/// Hard mode selects one cell: the gold era while training, the predicted
/// era at inference. Soft mode mixes all cells by the era probabilities.
pub fn switch(
    g: &mut Graph<'_>,
    cells: &[Var],
    probs: Var,
    mode: SwitchMode,
    phase: Phase,
    gold: Option<usize>,
) -> Result<Var> {
    let eras = g.shape(probs).1;
    if cells.len() != eras {
        return Err(Error::LengthMismatch {
            what: "memory cells vs eras",
            left: cells.len(),
            right: eras,
        });
    }
    match mode {
        SwitchMode::Hard => {
            let d = hard_route(g.value(probs).data(), phase, gold)?;
            cells
                .get(d)
                .copied()
                .ok_or(Error::EraOutOfRange { era: d, eras })
        }
        SwitchMode::Soft => {
            let (rows, cols) = g.shape(cells[0]);
            let flat = cells
                .iter()
                .map(|&c| g.reshape(c, 1, rows * cols))
                .collect::<Result<Vec<_>>>()?;
            let stacked = g.concat_rows(&flat)?;
            let mixed = g.matmul(probs, stacked)?;
            g.reshape(mixed, rows, cols)
        }
    }
}

/// `W_o (o ⊕ h) + bias`, where `⊕` is elementwise sum or concatenation.
pub fn fuse(
    g: &mut Graph<'_>,
    memory: Var,
    chars: Var,
    weight: Var,
    bias: Var,
    mode: FusionMode,
) -> Result<Var> {
    let d = g.shape(chars).1;
    let expected = match mode {
        FusionMode::Sum => d,
        FusionMode::Concat => 2 * d,
    };
    if g.shape(weight).0 != expected {
        return Err(Error::Config(format!(
            "{mode} fusion needs a weight with {expected} rows, got {:?}",
            g.shape(weight)
        )));
    }
    let joined = match mode {
        FusionMode::Sum => g.add(memory, chars)?,
        FusionMode::Concat => g.concat_cols(&[memory, chars])?,
    };
    let out = g.matmul(joined, weight)?;
    g.add(out, bias)
}
