// Fit per-class Gaussians on synthetic training data and score with every method.

use std::error::Error;

use ghost_osr::gaussbank;
use ghost_osr::metrics::{EvalSummary, KnownScores};
use ghost_osr::scoring::{self, Scorer};
use ghost_osr::synth::{self, SynthSpec};

pub fn run_example() -> Result<(), Box<dyn Error>> {
    let mut spec = SynthSpec::new(10, 16, 7);
    spec.train_per_class = 100;
    spec.test_per_class = 40;
    spec.n_unknown = 400;
    let packs = synth::generate(&spec)?;

    let bank = gaussbank::fit(&packs.train)?;
    println!(
        "bank: K={} D={}, correct samples per class {:?}",
        bank.n_classes(),
        bank.dim(),
        bank.counts()
    );

    let reference = scoring::build_reference(&packs.train, 0.1, 10, spec.seed)?;
    let scorers = [
        Scorer::Ghost(&bank),
        Scorer::Msp,
        Scorer::MaxLogit,
        Scorer::Energy,
        Scorer::NnGuide(&reference),
    ];
    println!("{:<9} {:>7} {:>7} {:>7}", "method", "AUOSCR", "AUROC", "FPR95");
    for scorer in scorers {
        let known = KnownScores::new(&scorer.score_pack(&packs.known_test)?, &packs.known_test)?;
        let unknown = scorer.score_pack(&packs.unknown_test)?.scores;
        let s = EvalSummary::compute(&known, &unknown)?;
        println!(
            "{:<9} {:>7.4} {:>7.4} {:>7.4}",
            scorer.method().name(),
            s.auoscr,
            s.auroc,
            s.fpr95
        );
    }

    // one row by hand: GHOST divides the winning logit by the z-score to its class
    let (k, gamma) = scoring::ghost_score(&bank, packs.known_test.embedding(0), packs.known_test.logits(0))?;
    let s = bank.zscore(packs.known_test.embedding(0), k)?;
    println!("row 0: predicted {k}, z-score {s:.3}, GHOST score {gamma:.4}");
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn Error>> {
    run_example()
}
