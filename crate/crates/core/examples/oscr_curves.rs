// OSCR and ROC curves, the scalar summaries and a log-spaced FPR view.

use std::error::Error;

use ghost_osr::metrics::{self, KnownScores};

pub fn run_example() -> Result<(), Box<dyn Error>> {
    // knowns: scores with (predicted, label); the third one is misclassified
    let known = KnownScores::from_parts(
        2,
        vec![0.9, 0.8, 0.7, 0.4, 0.3],
        vec![0, 1, 1, 0, 1],
        vec![0, 1, 0, 0, 1],
    )?;
    let unknown = [0.75, 0.5, 0.35, 0.1];

    let oscr = metrics::oscr_curve(&known, &unknown)?;
    let roc = metrics::roc_curve(known.scores(), &unknown)?;
    print!("{}", oscr.to_csv());
    println!(
        "AUOSCR {:.4}  AUROC {:.4}  FPR95 {:.4}  F@C95 {:.4}  accuracy {:.2}",
        metrics::area_under(&oscr),
        metrics::area_under(&roc),
        metrics::fpr_at_tpr(&roc, 0.95),
        metrics::f_at_c95(&oscr),
        known.accuracy()
    );

    // OSCR read off at fixed FPRs, as plotted on a log axis
    for p in &metrics::oscr_at_fprs(&known, &unknown, &[1.0, 0.5, 0.25, 0.0])?.points {
        println!("FPR {:.2} -> CCR {:.2} (threshold {})", p.fpr, p.rate, p.threshold);
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn Error>> {
    run_example()
}
