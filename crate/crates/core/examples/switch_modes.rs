//! Hard and soft switching between per-era memory outputs, and the two ways
//! of fusing the result with the character states.

use crosswise::autodiff::{Graph, Matrix};
use crosswise::config::{FusionMode, SwitchMode};
use crosswise::switcher::{fuse, switch, Phase};

fn main() -> crosswise::Result<()> {
    let cells: Vec<Matrix> = (0..4)
        .map(|d| Matrix::from_rows(&[vec![d as f64, 1.0], vec![0.0, -(d as f64)]]))
        .collect();
    let mut g = Graph::new();
    let vars: Vec<_> = cells.iter().map(|c| g.leaf(c)).collect();
    let probs = g.constant(Matrix::row(&[0.1, 0.2, 0.1, 0.6]));

    let soft = switch(&mut g, &vars, probs, SwitchMode::Soft, Phase::Infer, None)?;
    println!("soft: {:?}", g.value(soft).data());
    let hard = switch(&mut g, &vars, probs, SwitchMode::Hard, Phase::Infer, None)?;
    println!("hard (predicted era 3): {:?}", g.value(hard).data());
    let gold = switch(
        &mut g,
        &vars,
        probs,
        SwitchMode::Hard,
        Phase::Train,
        Some(1),
    )?;
    println!(
        "hard (gold era 1 while training): {:?}",
        g.value(gold).data()
    );

    let chars = g.constant(Matrix::from_rows(&[vec![0.5, 0.5], vec![1.0, -1.0]]));
    let bias = g.constant(Matrix::zeros(1, 2));
    let w_sum = g.constant(Matrix::identity(2));
    let summed = fuse(&mut g, soft, chars, w_sum, bias, FusionMode::Sum)?;
    println!("sum fusion: {:?}", g.value(summed).data());
    let w_cat = g.constant(Matrix::from_rows(&[
        vec![1.0, 0.0],
        vec![0.0, 1.0],
        vec![1.0, 0.0],
        vec![0.0, 1.0],
    ]));
    let joined = fuse(&mut g, soft, chars, w_cat, bias, FusionMode::Concat)?;
    println!("concat fusion: {:?}", g.value(joined).data());
    Ok(())
}
