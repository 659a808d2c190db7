// NNGuide: energy scaled by cosine similarity to a reference subset of training rows.

use std::error::Error;

use ghost_osr::scoring::{self, ReferenceBank};
use ghost_osr::synth::{self, SynthSpec};

pub fn run_example() -> Result<(), Box<dyn Error>> {
    // a two-row bank by hand: unit vectors along x and y with base confidence 2 and 1
    let bank = ReferenceBank::from_parts(2, vec![5.0, 0.0, 0.0, 3.0], vec![2.0, 1.0], 1, 1.0)?;
    let logits = [1.0, 0.0];
    for query in [[1.0, 0.0], [0.0, 1.0], [1.0, 1.0], [-1.0, 0.0]] {
        let s = scoring::nnguide_score(&bank, &query, &logits)?;
        println!(
            "query {query:?}: score {s:.4} (energy {:.4})",
            scoring::energy_score(&logits)
        );
    }

    let mut spec = SynthSpec::new(5, 8, 9);
    spec.train_per_class = 200;
    let packs = synth::generate(&spec)?;
    let reference = scoring::build_reference(&packs.train, 0.05, 10, 123)?;
    println!(
        "reference bank from {} of {} training rows; k_nn = {}",
        reference.len(),
        packs.train.n_samples(),
        reference.k_nn()
    );
    let again = scoring::build_reference(&packs.train, 0.05, 10, 123)?;
    assert_eq!(again, reference);
    println!("same seed, same subset");
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn Error>> {
    run_example()
}
