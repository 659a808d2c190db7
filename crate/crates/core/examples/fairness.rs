// Per-class CCR spread across FPR levels, and best/worst class OSCR curves.

use std::error::Error;

use ghost_osr::gaussbank;
use ghost_osr::metrics::{self, KnownScores};
use ghost_osr::scoring::Scorer;
use ghost_osr::synth::{self, SynthSpec};

pub fn run_example() -> Result<(), Box<dyn Error>> {
    let mut spec = SynthSpec::new(20, 32, 11);
    spec.train_per_class = 100;
    spec.noisy_classes = 4;
    let packs = synth::generate(&spec)?;
    let bank = gaussbank::fit(&packs.train)?;
    let grid = [1.0, 0.5, 0.1, 0.01];

    for scorer in [Scorer::Ghost(&bank), Scorer::MaxLogit] {
        let known = KnownScores::new(&scorer.score_pack(&packs.known_test)?, &packs.known_test)?;
        let unknown = scorer.score_pack(&packs.unknown_test)?.scores;
        let profile = metrics::fairness_at_fprs(&known, &unknown, &grid)?;
        println!("{}:", scorer.method());
        for p in &profile.points {
            println!(
                "  FPR {:<5} mean CCR {:.3}  variance {:.5}  CoV {}",
                p.fpr,
                p.mean,
                p.variance.unwrap_or(f64::NAN),
                p.cov.map_or("undefined".to_string(), |c| format!("{c:.3}"))
            );
        }
        let (top, bottom) = metrics::top_bottom_split(&known, 0.10);
        let a_top = metrics::area_under(&metrics::subset_oscr(&known, &unknown, &top)?);
        let a_bottom = metrics::area_under(&metrics::subset_oscr(&known, &unknown, &bottom)?);
        println!("  top classes {top:?} AUOSCR {a_top:.3}, bottom classes {bottom:?} AUOSCR {a_bottom:.3}");
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn Error>> {
    run_example()
}
