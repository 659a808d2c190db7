// Paired t-test of GHOST against MaxLogit over seeded resamples.

use std::error::Error;

use ghost_osr::gaussbank;
use ghost_osr::metrics::{KnownScores, Metric};
use ghost_osr::scoring::Scorer;
use ghost_osr::stats::{self, MethodEval, ResampleConfig};
use ghost_osr::synth::{self, SynthSpec};

pub fn run_example() -> Result<(), Box<dyn Error>> {
    let t = stats::paired_t_test(&[0.91, 0.93, 0.92, 0.95], &[0.88, 0.90, 0.91, 0.90])?;
    println!("paired t on four values: t = {:.3}, p = {:.4} (df {})", t.t, t.p, t.df);

    let mut spec = SynthSpec::new(10, 16, 5);
    spec.train_per_class = 100;
    let packs = synth::generate(&spec)?;
    let bank = gaussbank::fit(&packs.train)?;
    let eval = |scorer: Scorer| -> Result<MethodEval, Box<dyn Error>> {
        Ok(MethodEval {
            name: scorer.method().name().to_string(),
            known: KnownScores::new(&scorer.score_pack(&packs.known_test)?, &packs.known_test)?,
            unknown: scorer.score_pack(&packs.unknown_test)?.scores,
        })
    };
    let (ghost, maxlogit) = (eval(Scorer::Ghost(&bank))?, eval(Scorer::MaxLogit)?);

    let mut cfg = ResampleConfig::new(42);
    cfg.n_known = 300;
    cfg.n_unknown = 300;
    // two metrics are compared, so correct for both
    cfg.bonferroni_m = 2;
    for metric in [Metric::Auroc, Metric::Auoscr] {
        let r = stats::bootstrap_compare(&ghost, &maxlogit, metric, cfg)?;
        println!(
            "{}: ghost {:.4} ± {:.4}, maxlogit {:.4} ± {:.4}, p = {:.2e}, corrected {:.2e}",
            metric.name(),
            r.method_a.mean,
            r.method_a.std,
            r.method_b.mean,
            r.method_b.std,
            r.p_value,
            r.corrected_p
        );
    }

    match stats::bootstrap_compare(&ghost, &ghost, Metric::Auroc, cfg) {
        Err(e) => println!("ghost vs itself: {e}"),
        Ok(_) => return Err("identical methods should be indistinguishable".into()),
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn Error>> {
    run_example()
}
