//! Runs the finite-difference gradient check over every loss and fusion
//! operator, then combines unit sub-losses with the default weights.
//!
//! cargo run --release --example loss_gradients -- [seeds]

use std::collections::BTreeMap;

use surfcorr::losses::suite::GradTarget;
use surfcorr::losses::{loss_total, LossReport, LossWeights, PART_NAMES};

fn main() -> surfcorr::Result<()> {
    let seeds: u64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(3);
    println!("{:<14} {:>10} {:>12}", "target", "inputs", "max rel err");
    for target in GradTarget::ALL {
        let mut worst: f64 = 0.0;
        let mut inputs = 0;
        for seed in 0..seeds {
            inputs = target.problem(seed)?.x.len();
            worst = worst.max(target.check(seed)?.max_rel_error);
        }
        println!("{:<14} {inputs:>10} {worst:>12.3e}", target.name());
    }

    let w = LossWeights::default();
    let parts: BTreeMap<String, LossReport> =
        PART_NAMES.iter().map(|n| (n.to_string(), LossReport { value: 1.0, ..Default::default() })).collect();
    let total = loss_total(&parts, &w)?;
    println!(
        "weights lambda1={} alpha={} lambda2={} lambda3={}: unit parts sum to {}",
        w.lambda1, w.alpha, w.lambda2, w.lambda3, total.value
    );
    Ok(())
}
