//! Key-value memory cells.
//!
//! For a character `i` and era `d`, the keys are the embeddings of the
//! dictionary words covering `i` and the values are the embeddings of the
//! boundary role `i` plays in each word. Attention weights are a softmax of
//! raw dot products between the character state and the keys; the cell output
//! is the attention-weighted sum of values, or zero when nothing matched.

use rand::Rng;

use crate::autodiff::{Graph, Matrix, Var};
use crate::encoder::uniform;
use crate::error::{Error, Result};
use crate::lexicon::{Candidate, CandidateSet, ValueClass};

#[derive(Clone, Debug, PartialEq)]
pub struct MemoryParams {
    /// One `|D_d| x d_a` key table per era, rows aligned with lexicon ids.
    pub keys: Vec<Matrix>,
    /// `4 x d_a`, rows indexed by [`ValueClass::index`]; shared by all eras.
    pub values: Matrix,
}

impl MemoryParams {
    pub fn init<R: Rng>(rng: &mut R, lexicon_sizes: &[usize], d_a: usize) -> Self {
        Self {
            keys: lexicon_sizes
                .iter()
                .map(|&n| uniform(rng, n, d_a, 0.1))
                .collect(),
            values: uniform(rng, ValueClass::COUNT, d_a, 0.1),
        }
    }

    pub fn tensors(&self) -> Vec<&Matrix> {
        let mut v: Vec<&Matrix> = self.keys.iter().collect();
        v.push(&self.values);
        v
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut Matrix> {
        let mut v: Vec<&mut Matrix> = self.keys.iter_mut().collect();
        v.push(&mut self.values);
        v
    }

    pub(crate) fn from_iter(it: &mut impl Iterator<Item = Matrix>, eras: usize) -> Option<Self> {
        let keys = (0..eras).map(|_| it.next()).collect::<Option<Vec<_>>>()?;
        Some(Self {
            keys,
            values: it.next()?,
        })
    }
}

#[derive(Clone, Debug)]
pub struct MemoryVars {
    pub keys: Vec<Var>,
    pub values: Var,
}

impl MemoryVars {
    pub(crate) fn take(it: &mut impl Iterator<Item = Var>, eras: usize) -> Option<Self> {
        let keys = (0..eras).map(|_| it.next()).collect::<Option<Vec<_>>>()?;
        Some(Self {
            keys,
            values: it.next()?,
        })
    }
}

/// Attention over the keys of `candidates` for the state `h` (`1 x d_a`).
/// Returns a `1 x m` distribution.
pub fn attend(g: &mut Graph<'_>, h: Var, key_table: Var, candidates: &[Candidate]) -> Result<Var> {
    if candidates.is_empty() {
        return Err(Error::LengthMismatch {
            what: "attention needs at least one candidate",
            left: 0,
            right: 1,
        });
    }
    let ids: Vec<usize> = candidates.iter().map(|c| c.word_id).collect();
    let keys = g.gather_rows(key_table, &ids)?;
    let keys_t = g.transpose(keys)?;
    let scores = g.matmul(h, keys_t)?;
    g.softmax_row(scores)
}

/// Weighted sum of the candidates' value embeddings under `probs` (`1 x m`).
pub fn aggregate(
    g: &mut Graph<'_>,
    probs: Var,
    value_table: Var,
    candidates: &[Candidate],
) -> Result<Var> {
    let m = g.shape(probs).1;
    if m != candidates.len() {
        return Err(Error::LengthMismatch {
            what: "attention weights vs candidates",
            left: m,
            right: candidates.len(),
        });
    }
    let classes: Vec<usize> = candidates.iter().map(|c| c.value.index()).collect();
    let values = g.gather_rows(value_table, &classes)?;
    g.matmul(probs, values)
}

/// Output of one memory cell for a single character: zero when there are no
/// candidates.
pub fn cell_output(
    g: &mut Graph<'_>,
    h: Var,
    key_table: Var,
    value_table: Var,
    candidates: &[Candidate],
) -> Result<Var> {
    if candidates.is_empty() {
        let d = g.shape(value_table).1;
        return Ok(g.constant(Matrix::zeros(1, d)));
    }
    let p = attend(g, h, key_table, candidates)?;
    aggregate(g, p, value_table, candidates)
}

/// Cell outputs for every character of a sentence, `T x d_a`.
pub fn memory_cell(
    g: &mut Graph<'_>,
    chars: Var,
    key_table: Var,
    value_table: Var,
    candidates: &CandidateSet,
) -> Result<Var> {
    let t_len = g.shape(chars).0;
    if candidates.len() != t_len {
        return Err(Error::LengthMismatch {
            what: "candidate sets vs characters",
            left: candidates.len(),
            right: t_len,
        });
    }
    let mut rows = Vec::with_capacity(t_len);
    for i in 0..t_len {
        let cands = candidates.at(i);
        let row = if cands.is_empty() {
            let d = g.shape(value_table).1;
            g.constant(Matrix::zeros(1, d))
        } else {
            let h = g.gather_rows(chars, &[i])?;
            cell_output(g, h, key_table, value_table, cands)?
        };
        rows.push(row);
    }
    g.concat_rows(&rows)
}
