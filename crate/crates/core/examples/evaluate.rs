//! auROC with a DeLong 95% interval, printed the way results tables show
//! them.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use timeagg::metrics::{auroc, delong_ci, relative_difference, ScoredSet};

fn main() -> timeagg::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    for shift in [0.5, 1.0, 2.0] {
        let pos = Normal::new(shift, 1.0).unwrap();
        let neg = Normal::new(0.0, 1.0).unwrap();
        let mut scores = Vec::new();
        let mut labels = Vec::new();
        for _ in 0..60 {
            scores.push(pos.sample(&mut rng));
            labels.push(1);
            scores.push(neg.sample(&mut rng));
            labels.push(0);
        }
        let ci = delong_ci(&ScoredSet::new(scores, labels)?, 0.05)?;
        println!(
            "shift {shift}: {:.3} [{:.3}, {:.3}]  (variance {:.2e})",
            ci.auc, ci.lo, ci.hi, ci.variance
        );
    }

    let tiny = ScoredSet::new(vec![0.1, 0.4, 0.35, 0.8], vec![0, 0, 1, 1])?;
    println!("worked example: auROC {}", auroc(&tiny)?);
    println!(
        "relative difference of 0.800 vs 0.845: {:.5}",
        relative_difference(0.800, 0.845)?
    );
    Ok(())
}
