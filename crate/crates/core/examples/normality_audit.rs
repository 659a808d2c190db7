// Shapiro-Wilk on every (class, dimension) with Holm correction.

use std::error::Error;

use ghost_osr::stats::{self, shapiro_wilk};
use ghost_osr::synth::gaussian_audit_pack;

pub fn run_example() -> Result<(), Box<dyn Error>> {
    let r = shapiro_wilk(&[2.1, 3.4, 1.9, 5.6, 4.4, 3.0, 2.7, 3.9, 4.1, 3.3])?;
    println!("single sample: W = {:.4}, p = {:.4}", r.w, r.p);

    // class 2, dimension 5 is exponential; everything else is Gaussian
    let pack = gaussian_audit_pack(5, 8, 200, &[(2, 5)], 3)?;
    let audit = stats::normality_audit(&pack, 0.05)?;
    println!(
        "{} tests, {} rejected after Holm ({:.2}%)",
        audit.tests_performed,
        audit.rejections,
        100.0 * audit.rejection_fraction()
    );
    for e in audit.entries.iter().filter(|e| e.rejected) {
        println!(
            "  rejected class {} dim {}: W = {:.4}, p = {:.2e}",
            e.class,
            e.dim,
            e.w.unwrap(),
            e.p.unwrap()
        );
    }

    let flags = stats::holm_stepdown(&[0.01, 0.04, 0.03], 0.05);
    println!("Holm on {{0.01, 0.04, 0.03}}: {flags:?}");
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn Error>> {
    run_example()
}
