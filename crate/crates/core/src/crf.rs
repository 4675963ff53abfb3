//! Linear-chain CRF over `L` labels.
//!
//! Scores are kept in log space. The transition matrix has `L + 1` rows: row
//! `y'` holds the score of moving from label `y'` to each label, and the last
//! row holds the start scores for the first position. There is no end state.

use crate::autodiff::{logsumexp, CustomOp, Graph, Matrix, Var};
use crate::error::{Error, Result};

fn check(emissions: &Matrix, transitions: &Matrix) -> Result<()> {
    let l = emissions.cols();
    if transitions.shape() != (l + 1, l) {
        return Err(Error::Shape {
            op: "crf transitions",
            left: emissions.shape(),
            right: transitions.shape(),
        });
    }
    if emissions.rows() == 0 {
        return Err(Error::EmptySentence);
    }
    Ok(())
}

fn check_labels(labels: &[usize], emissions: &Matrix) -> Result<()> {
    if labels.len() != emissions.rows() {
        return Err(Error::LengthMismatch {
            what: "gold labels vs emissions",
            left: labels.len(),
            right: emissions.rows(),
        });
    }
    if let Some(bad) = labels.iter().find(|&&y| y >= emissions.cols()) {
        return Err(Error::InvalidTag(bad.to_string()));
    }
    Ok(())
}

/// Emission scores `A W_s + b_s`, one row per character.
pub fn emissions(g: &mut Graph<'_>, reprs: Var, weight: Var, bias: Var) -> Result<Var> {
    let scores = g.matmul(reprs, weight)?;
    g.add(scores, bias)
}

/// Unnormalized log score of one labeling.
pub fn sequence_score(emissions: &Matrix, transitions: &Matrix, labels: &[usize]) -> Result<f64> {
    check(emissions, transitions)?;
    check_labels(labels, emissions)?;
    let start = emissions.cols();
    let mut prev = start;
    let mut total = 0.0;
    for (t, &y) in labels.iter().enumerate() {
        total += transitions.get(prev, y) + emissions.get(t, y);
        prev = y;
    }
    Ok(total)
}

/// Forward log-potentials, `T x L`.
fn forward(emissions: &Matrix, transitions: &Matrix) -> Matrix {
    let (t_len, l) = emissions.shape();
    let mut alpha = Matrix::zeros(t_len, l);
    for y in 0..l {
        alpha.set(0, y, transitions.get(l, y) + emissions.get(0, y));
    }
    let mut buf = vec![0.0; l];
    for t in 1..t_len {
        for y in 0..l {
            for (yp, b) in buf.iter_mut().enumerate() {
                *b = alpha.get(t - 1, yp) + transitions.get(yp, y);
            }
            alpha.set(t, y, logsumexp(&buf) + emissions.get(t, y));
        }
    }
    alpha
}

/// Backward log-potentials, `T x L`; the last row is zero.
fn backward(emissions: &Matrix, transitions: &Matrix) -> Matrix {
    let (t_len, l) = emissions.shape();
    let mut beta = Matrix::zeros(t_len, l);
    let mut buf = vec![0.0; l];
    for t in (0..t_len - 1).rev() {
        for yp in 0..l {
            for (y, b) in buf.iter_mut().enumerate() {
                *b = transitions.get(yp, y) + emissions.get(t + 1, y) + beta.get(t + 1, y);
            }
            beta.set(t, yp, logsumexp(&buf));
        }
    }
    beta
}

/// `log Z`, summed over all `L^T` labelings by the forward recursion.
pub fn log_partition(emissions: &Matrix, transitions: &Matrix) -> Result<f64> {
    check(emissions, transitions)?;
    let alpha = forward(emissions, transitions);
    Ok(logsumexp(alpha.row_slice(alpha.rows() - 1)))
}

/// Negative log likelihood `log Z - score(gold)`.
pub fn nll(emissions: &Matrix, transitions: &Matrix, labels: &[usize]) -> Result<f64> {
    let score = sequence_score(emissions, transitions, labels)?;
    Ok(log_partition(emissions, transitions)? - score)
}

/// Posterior label marginals (`T x L`) and expected transition counts
/// (`(L + 1) x L`, start row last).
pub fn marginals(emissions: &Matrix, transitions: &Matrix) -> Result<(Matrix, Matrix)> {
    check(emissions, transitions)?;
    let (t_len, l) = emissions.shape();
    let alpha = forward(emissions, transitions);
    let beta = backward(emissions, transitions);
    let log_z = logsumexp(alpha.row_slice(t_len - 1));

    let mut unary = Matrix::zeros(t_len, l);
    for t in 0..t_len {
        for y in 0..l {
            unary.set(t, y, (alpha.get(t, y) + beta.get(t, y) - log_z).exp());
        }
    }
    let mut pair = Matrix::zeros(l + 1, l);
    for y in 0..l {
        pair.set(l, y, unary.get(0, y));
    }
    for t in 1..t_len {
        for yp in 0..l {
            for y in 0..l {
                let lp = alpha.get(t - 1, yp)
                    + transitions.get(yp, y)
                    + emissions.get(t, y)
                    + beta.get(t, y)
                    - log_z;
                pair.set(yp, y, pair.get(yp, y) + lp.exp());
            }
        }
    }
    Ok((unary, pair))
}

/// Highest-scoring labeling and its score. Among equally scoring labelings
/// the lexicographically smallest label sequence wins.
pub fn viterbi(emissions: &Matrix, transitions: &Matrix) -> Result<(Vec<usize>, f64)> {
    check(emissions, transitions)?;
    let (t_len, l) = emissions.shape();

    // best score-to-go from label y at position t
    let mut to_go = Matrix::zeros(t_len, l);
    for t in (0..t_len - 1).rev() {
        for yp in 0..l {
            let best = (0..l)
                .map(|y| transitions.get(yp, y) + emissions.get(t + 1, y) + to_go.get(t + 1, y))
                .fold(f64::NEG_INFINITY, f64::max);
            to_go.set(t, yp, best);
        }
    }

    // walk forward, keeping the smallest label that stays on an optimal path
    let mut path = Vec::with_capacity(t_len);
    let mut prev = l;
    for t in 0..t_len {
        let cand: Vec<f64> = (0..l)
            .map(|y| transitions.get(prev, y) + emissions.get(t, y) + to_go.get(t, y))
            .collect();
        let best = cand.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let y = cand.iter().position(|&c| c == best).unwrap_or(0);
        path.push(y);
        prev = y;
    }
    let score = sequence_score(emissions, transitions, &path)?;
    Ok((path, score))
}

struct NllOp {
    labels: Vec<usize>,
}

impl CustomOp for NllOp {
    fn name(&self) -> &'static str {
        "crf_nll"
    }

    fn backward(&self, inputs: &[&Matrix], _output: &Matrix, grad_out: &Matrix) -> Vec<Matrix> {
        let (em, tr) = (inputs[0], inputs[1]);
        let g = grad_out.get(0, 0);
        let (mut d_em, mut d_tr) = marginals(em, tr).expect("shapes checked at forward");
        let l = em.cols();
        let mut prev = l;
        for (t, &y) in self.labels.iter().enumerate() {
            d_em.set(t, y, d_em.get(t, y) - 1.0);
            d_tr.set(prev, y, d_tr.get(prev, y) - 1.0);
            prev = y;
        }
        d_em.scale_assign(g);
        d_tr.scale_assign(g);
        vec![d_em, d_tr]
    }
}

/// Graph node for the negative log likelihood. Its gradient with respect to
/// the emissions is the posterior marginals minus the gold indicators.
pub fn nll_node(
    g: &mut Graph<'_>,
    emissions: Var,
    transitions: Var,
    labels: &[usize],
) -> Result<Var> {
    let value = nll(g.value(emissions), g.value(transitions), labels)?;
    g.custom(
        &[emissions, transitions],
        Matrix::row(&[value]),
        Box::new(NllOp {
            labels: labels.to_vec(),
        }),
    )
}
