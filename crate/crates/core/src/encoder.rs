//! Character encoder: embeddings followed by one bidirectional GRU layer.
//!
//! The input is the id sequence with a sentinel at position 0. The hidden
//! state at the sentinel serves as the sentence vector; the states at
//! positions `1..=T` are the per-character vectors.

use rand::Rng;

use crate::autodiff::{Graph, Matrix, Var};
use crate::error::{Error, Result};

pub(crate) fn uniform<R: Rng>(rng: &mut R, rows: usize, cols: usize, scale: f64) -> Matrix {
    let data = (0..rows * cols)
        .map(|_| rng.gen_range(-scale..scale))
        .collect();
    Matrix::from_vec(rows, cols, data)
}

/// Weights of one GRU direction.
#[derive(Clone, Debug, PartialEq)]
pub struct GruParams {
    pub w_z: Matrix,
    pub w_r: Matrix,
    pub w_n: Matrix,
    pub u_z: Matrix,
    pub u_r: Matrix,
    pub u_n: Matrix,
    pub b_z: Matrix,
    pub b_r: Matrix,
    pub b_n: Matrix,
}

impl GruParams {
    pub fn init<R: Rng>(rng: &mut R, input: usize, hidden: usize) -> Self {
        Self {
            w_z: uniform(rng, input, hidden, 0.1),
            w_r: uniform(rng, input, hidden, 0.1),
            w_n: uniform(rng, input, hidden, 0.1),
            u_z: uniform(rng, hidden, hidden, 0.1),
            u_r: uniform(rng, hidden, hidden, 0.1),
            u_n: uniform(rng, hidden, hidden, 0.1),
            b_z: uniform(rng, 1, hidden, 0.1),
            b_r: uniform(rng, 1, hidden, 0.1),
            b_n: uniform(rng, 1, hidden, 0.1),
        }
    }

    pub fn tensors(&self) -> Vec<&Matrix> {
        vec![
            &self.w_z, &self.w_r, &self.w_n, &self.u_z, &self.u_r, &self.u_n, &self.b_z, &self.b_r,
            &self.b_n,
        ]
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut Matrix> {
        vec![
            &mut self.w_z,
            &mut self.w_r,
            &mut self.w_n,
            &mut self.u_z,
            &mut self.u_r,
            &mut self.u_n,
            &mut self.b_z,
            &mut self.b_r,
            &mut self.b_n,
        ]
    }

    fn from_iter(it: &mut impl Iterator<Item = Matrix>) -> Option<Self> {
        Some(Self {
            w_z: it.next()?,
            w_r: it.next()?,
            w_n: it.next()?,
            u_z: it.next()?,
            u_r: it.next()?,
            u_n: it.next()?,
            b_z: it.next()?,
            b_r: it.next()?,
            b_n: it.next()?,
        })
    }
}

#[derive(Clone, Copy, Debug)]
pub struct GruVars {
    w: [Var; 3],
    u: [Var; 3],
    b: [Var; 3],
}

impl GruVars {
    fn take(it: &mut impl Iterator<Item = Var>) -> Option<Self> {
        let mut next = || it.next();
        Some(Self {
            w: [next()?, next()?, next()?],
            u: [next()?, next()?, next()?],
            b: [next()?, next()?, next()?],
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EncoderParams {
    /// `|V| x d_e`
    pub char_emb: Matrix,
    pub fwd: GruParams,
    pub bwd: GruParams,
}

impl EncoderParams {
    pub fn init<R: Rng>(rng: &mut R, vocab: usize, d_e: usize, d_a: usize) -> Self {
        assert!(d_a.is_multiple_of(2), "d_a must be even");
        Self {
            char_emb: uniform(rng, vocab, d_e, 0.1),
            fwd: GruParams::init(rng, d_e, d_a / 2),
            bwd: GruParams::init(rng, d_e, d_a / 2),
        }
    }

    pub fn hidden(&self) -> usize {
        2 * self.fwd.u_z.rows()
    }

    pub fn tensors(&self) -> Vec<&Matrix> {
        let mut v = vec![&self.char_emb];
        v.extend(self.fwd.tensors());
        v.extend(self.bwd.tensors());
        v
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut Matrix> {
        let mut v = vec![&mut self.char_emb];
        v.extend(self.fwd.tensors_mut());
        v.extend(self.bwd.tensors_mut());
        v
    }

    pub(crate) fn from_iter(it: &mut impl Iterator<Item = Matrix>) -> Option<Self> {
        Some(Self {
            char_emb: it.next()?,
            fwd: GruParams::from_iter(it)?,
            bwd: GruParams::from_iter(it)?,
        })
    }

    pub fn bind<'a>(&'a self, g: &mut Graph<'a>) -> EncoderVars {
        let vars: Vec<Var> = self.tensors().into_iter().map(|m| g.leaf(m)).collect();
        EncoderVars::take(&mut vars.into_iter()).expect("tensor count")
    }
}

#[derive(Clone, Copy, Debug)]
pub struct EncoderVars {
    pub char_emb: Var,
    fwd: GruVars,
    bwd: GruVars,
}

impl EncoderVars {
    pub(crate) fn take(it: &mut impl Iterator<Item = Var>) -> Option<Self> {
        Some(Self {
            char_emb: it.next()?,
            fwd: GruVars::take(it)?,
            bwd: GruVars::take(it)?,
        })
    }
}

/// Encoder outputs.
#[derive(Clone, Copy, Debug)]
pub struct Encoded {
    /// `1 x d_a`, the state at the sentinel.
    pub sentence: Var,
    /// `T x d_a`, one row per character.
    pub chars: Var,
}

/// Run one GRU direction over the rows of `inputs`, in the given order.
/// Returns the hidden state per position, indexed by position.
fn run_gru(g: &mut Graph<'_>, p: &GruVars, inputs: Var, order: &[usize]) -> Result<Vec<Var>> {
    // input projections for every position at once
    let mut proj = [inputs; 3];
    for (k, slot) in proj.iter_mut().enumerate() {
        let x = g.matmul(inputs, p.w[k])?;
        *slot = g.add(x, p.b[k])?;
    }
    let hidden = g.shape(p.u[0]).0;
    let mut h = g.constant(Matrix::zeros(1, hidden));
    let mut states = vec![h; order.len()];
    for &t in order {
        let xz = g.gather_rows(proj[0], &[t])?;
        let xr = g.gather_rows(proj[1], &[t])?;
        let xn = g.gather_rows(proj[2], &[t])?;
        let hz = g.matmul(h, p.u[0])?;
        let z = g.add(xz, hz)?;
        let z = g.sigmoid(z)?;
        let hr = g.matmul(h, p.u[1])?;
        let r = g.add(xr, hr)?;
        let r = g.sigmoid(r)?;
        let rh = g.mul(r, h)?;
        let hn = g.matmul(rh, p.u[2])?;
        let n = g.add(xn, hn)?;
        let n = g.tanh(n)?;
        // h' = n + z * (h - n)
        let diff = g.sub(h, n)?;
        let gated = g.mul(z, diff)?;
        h = g.add(n, gated)?;
        states[t] = h;
    }
    Ok(states)
}

/// Encode `ids` (sentinel first, length `T + 1`).
pub fn encode(g: &mut Graph<'_>, vars: &EncoderVars, ids: &[usize]) -> Result<Encoded> {
    if ids.len() < 2 {
        return Err(Error::EmptySentence);
    }
    let n = ids.len();
    let x = g.gather_rows(vars.char_emb, ids)?;
    let fwd_order: Vec<usize> = (0..n).collect();
    let bwd_order: Vec<usize> = (0..n).rev().collect();
    let fwd = run_gru(g, &vars.fwd, x, &fwd_order)?;
    let bwd = run_gru(g, &vars.bwd, x, &bwd_order)?;
    let rows: Vec<Var> = (0..n)
        .map(|t| g.concat_cols(&[fwd[t], bwd[t]]))
        .collect::<Result<_>>()?;
    let sentence = rows[0];
    let chars = g.concat_rows(&rows[1..])?;
    Ok(Encoded { sentence, chars })
}
