//! Partition function, marginals and Viterbi decoding of the linear-chain
//! CRF, checked against enumeration of every tag sequence.

use crosswise::autodiff::Matrix;
use crosswise::corpus::Tag;
use crosswise::crf::{log_partition, marginals, sequence_score, viterbi};

fn main() -> crosswise::Result<()> {
    let emissions = Matrix::from_rows(&[
        vec![2.0, -1.0, -1.0, 0.5],
        vec![-0.5, 0.3, 1.5, 0.2],
        vec![0.1, -0.2, 0.0, 1.0],
    ]);
    // rows B, M, E, S, START; columns B, M, E, S
    let transitions = Matrix::from_rows(&[
        vec![-4.0, 0.5, 1.0, -4.0],
        vec![-4.0, 0.2, 0.8, -4.0],
        vec![0.5, -4.0, -4.0, 0.5],
        vec![0.5, -4.0, -4.0, 0.5],
        vec![0.5, -4.0, -4.0, 0.5],
    ]);

    let log_z = log_partition(&emissions, &transitions)?;
    let mut brute = Vec::new();
    for code in 0..64usize {
        let labels = [code / 16, (code / 4) % 4, code % 4];
        brute.push(sequence_score(&emissions, &transitions, &labels)?);
    }
    let max = brute.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let brute_z = max + brute.iter().map(|s| (s - max).exp()).sum::<f64>().ln();
    println!("log Z = {log_z:.12} (enumeration {brute_z:.12})");

    let (path, score) = viterbi(&emissions, &transitions)?;
    let tags: Vec<Tag> = path.iter().filter_map(|&i| Tag::from_index(i)).collect();
    println!(
        "best path {tags:?} score {score:.4} probability {:.4}",
        (score - log_z).exp()
    );

    let (unary, _) = marginals(&emissions, &transitions)?;
    for t in 0..unary.rows() {
        let row: Vec<String> = unary
            .row_slice(t)
            .iter()
            .map(|p| format!("{p:.3}"))
            .collect();
        println!("position {t}: P(B,M,E,S) = [{}]", row.join(", "));
    }
    Ok(())
}
