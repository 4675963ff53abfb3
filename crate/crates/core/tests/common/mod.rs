//! Helpers shared by the integration tests: brute-force oracles and a tiny
//! two-era model.
#![allow(dead_code)]

use crosswise::autodiff::{Graph, Matrix, Var};
use crosswise::config::{Config, FusionMode, SwitchMode};
use crosswise::corpus::{LabeledSentence, RawCorpus, RawSentence, Vocab};
use crosswise::error::Result;
use crosswise::lexicon::{build_lexicon, EraLexicon};
use crosswise::model::{prepare, ModelParams, Prepared};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize, scale: f64) -> Matrix {
    let data = (0..rows * cols)
        .map(|_| rng.gen_range(-scale..scale))
        .collect();
    Matrix::from_vec(rows, cols, data)
}

/// Score of `labels` written out from the definition: start score plus
/// emission at the first position, then transition plus emission.
pub fn path_score(em: &Matrix, tr: &Matrix, labels: &[usize]) -> f64 {
    let start = em.cols();
    let mut s = tr.get(start, labels[0]) + em.get(0, labels[0]);
    for t in 1..labels.len() {
        s += tr.get(labels[t - 1], labels[t]) + em.get(t, labels[t]);
    }
    s
}

/// Every label sequence of length `t` over `l` labels, in lexicographic
/// order.
pub fn all_paths(t: usize, l: usize) -> Vec<Vec<usize>> {
    let total = l.pow(t as u32);
    (0..total)
        .map(|mut code| {
            let mut p = vec![0; t];
            for slot in p.iter_mut().rev() {
                *slot = code % l;
                code /= l;
            }
            p
        })
        .collect()
}

/// `(log Z, lexicographically first best path, its score)` by enumeration.
pub fn brute_force_crf(em: &Matrix, tr: &Matrix) -> (f64, Vec<usize>, f64) {
    let paths = all_paths(em.rows(), em.cols());
    let scores: Vec<f64> = paths.iter().map(|p| path_score(em, tr, p)).collect();
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let log_z = max + scores.iter().map(|s| (s - max).exp()).sum::<f64>().ln();
    let best = scores.iter().position(|&s| s == max).unwrap();
    (log_z, paths[best].clone(), max)
}

/// A short two-era corpus where "天地" is one word in era 0 and two in era 1.
pub fn toy_corpus() -> RawCorpus {
    let s = |words: &[&str], era| RawSentence {
        words: words.iter().map(|w| w.to_string()).collect(),
        era,
    };
    RawCorpus {
        sentences: vec![
            s(&["天地", "人"], 0),
            s(&["天", "地", "人"], 1),
            s(&["山水", "天地"], 0),
            s(&["山", "水", "人"], 1),
            s(&["人", "山水"], 0),
            s(&["天", "地"], 1),
            s(&["天地"], 0),
        ],
        source_name: "toy".into(),
    }
}

pub struct Tiny {
    pub config: Config,
    pub vocab: Vocab,
    pub lexicons: Vec<EraLexicon>,
    pub params: ModelParams,
    pub sentences: Vec<LabeledSentence>,
    pub inputs: Vec<Prepared>,
}

/// Tiny model with E = 2 and the given dimensions and modes.
pub fn tiny(d_a: usize, switch: SwitchMode, fusion: FusionMode, seed: u64) -> Tiny {
    let corpus = toy_corpus();
    let mut config = Config::default();
    config.eras = 2;
    config.d_a = d_a;
    config.d_e = 4;
    config.switch_mode = switch;
    config.fusion = fusion;
    config.ngram_min_count = 1;
    config.seed = seed;
    let vocab = Vocab::build([&corpus]);
    let lexicons: Vec<EraLexicon> = (0..2)
        .map(|e| build_lexicon(&corpus, e, config.ngram_min_count, config.max_ngram))
        .collect();
    let sizes: Vec<usize> = lexicons.iter().map(|l| l.len()).collect();
    // larger than the default init so the check exercises non-trivial curvature
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut params = ModelParams::init(&mut rng, &config, vocab.len(), &sizes);
    for t in params.tensors_mut() {
        for x in t.data_mut() {
            *x *= 5.0;
        }
    }
    let sentences: Vec<LabeledSentence> = corpus
        .sentences
        .iter()
        .map(|s| LabeledSentence::from_raw(s).unwrap())
        .collect();
    let inputs = sentences
        .iter()
        .map(|s| prepare(s, &vocab, &lexicons, config.max_ngram).unwrap())
        .collect();
    Tiny {
        config,
        vocab,
        lexicons,
        params,
        sentences,
        inputs,
    }
}

pub type OpFn = for<'g> fn(&mut Graph<'g>, &[Var]) -> Result<Var>;

/// Each op followed by a fixed nonlinear readout so the upstream gradient is
/// not all ones.
pub fn op_cases() -> Vec<(&'static str, Vec<(usize, usize)>, OpFn)> {
    fn readout(g: &mut Graph<'_>, v: Var) -> Result<Var> {
        let t = g.tanh(v)?;
        let w = g.mul(t, t)?;
        let s = g.add(w, t)?;
        g.sum(s)
    }
    vec![
        ("matmul", vec![(2, 3), (3, 2)], |g, v| {
            let y = g.matmul(v[0], v[1])?;
            readout(g, y)
        }),
        ("add", vec![(2, 3), (2, 3)], |g, v| {
            let y = g.add(v[0], v[1])?;
            readout(g, y)
        }),
        ("add_row_broadcast", vec![(3, 2), (1, 2)], |g, v| {
            let y = g.add(v[0], v[1])?;
            readout(g, y)
        }),
        ("sub", vec![(2, 2), (1, 2)], |g, v| {
            let y = g.sub(v[0], v[1])?;
            readout(g, y)
        }),
        ("mul", vec![(2, 3), (2, 3)], |g, v| {
            let y = g.mul(v[0], v[1])?;
            readout(g, y)
        }),
        ("scale", vec![(2, 2)], |g, v| {
            let y = g.scale(v[0], -1.7)?;
            readout(g, y)
        }),
        ("concat_cols", vec![(2, 1), (2, 3)], |g, v| {
            let y = g.concat_cols(&[v[0], v[1]])?;
            readout(g, y)
        }),
        ("concat_rows", vec![(1, 3), (2, 3)], |g, v| {
            let y = g.concat_rows(&[v[0], v[1]])?;
            readout(g, y)
        }),
        ("gather_rows", vec![(4, 2)], |g, v| {
            let y = g.gather_rows(v[0], &[2, 0, 2])?;
            readout(g, y)
        }),
        ("transpose", vec![(2, 3), (2, 3)], |g, v| {
            let t = g.transpose(v[0])?;
            let y = g.matmul(v[1], t)?;
            readout(g, y)
        }),
        ("reshape", vec![(2, 3), (3, 2)], |g, v| {
            let r = g.reshape(v[0], 3, 2)?;
            let y = g.mul(r, v[1])?;
            readout(g, y)
        }),
        ("tanh", vec![(2, 3)], |g, v| {
            let y = g.tanh(v[0])?;
            readout(g, y)
        }),
        ("sigmoid", vec![(2, 3)], |g, v| {
            let y = g.sigmoid(v[0])?;
            readout(g, y)
        }),
        ("softmax_row", vec![(1, 4), (1, 4)], |g, v| {
            let p = g.softmax_row(v[0])?;
            let y = g.mul(p, v[1])?;
            readout(g, y)
        }),
        ("log_softmax_row", vec![(1, 4), (1, 4)], |g, v| {
            let p = g.log_softmax_row(v[0])?;
            let y = g.mul(p, v[1])?;
            readout(g, y)
        }),
        ("logsumexp_row", vec![(1, 5)], |g, v| {
            let y = g.logsumexp_row(v[0])?;
            readout(g, y)
        }),
        ("crf_nll", vec![(3, 4), (5, 4)], |g, v| {
            crosswise::crf::nll_node(g, v[0], v[1], &[0, 2, 3])
        }),
    ]
}
