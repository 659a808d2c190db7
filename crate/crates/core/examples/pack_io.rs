// Build a pack in memory, write it, read it back, import the same data from CSV.

use std::error::Error;

use ghost_osr::featurepack::{self, FeaturePack};

pub fn run_example() -> Result<(), Box<dyn Error>> {
    let dir = tempfile::tempdir()?;

    // three samples, K=2 classes, D=2 dims; the last row is an unknown
    let pack = FeaturePack::new(
        2,
        2,
        vec![0.0, 1.0, 2.0, 3.0, 9.0, 9.0],
        vec![3.0, -1.0, -0.5, 2.5, 0.1, 0.2],
        vec![0, 1, featurepack::UNKNOWN_LABEL],
    )?;
    let path = dir.path().join("tiny.ghpk");
    featurepack::write_pack(&pack, &path)?;
    let back = featurepack::read_pack(&path)?;
    assert_eq!(back, pack);
    println!(
        "round-tripped {} samples ({} bytes on disk)",
        back.n_samples(),
        std::fs::metadata(&path)?.len()
    );

    let csv = "label,e0,e1,z0,z1\n0,0,1,3,-1\n1,2,3,-0.5,2.5\n-1,9,9,0.1,0.2\n";
    let imported = featurepack::parse_csv(csv.as_bytes())?;
    assert_eq!(imported, pack);
    println!("CSV import matches the binary pack");

    let known = pack.select(&[0, 1]);
    let diag = featurepack::diagnose(&known)?;
    println!(
        "per-class counts {:?}, correct {:?}, accuracy {:.2}",
        diag.counts,
        diag.correct,
        diag.accuracy()
    );

    // corrupt one label and watch validation point at the row
    let mut bytes = pack.to_bytes();
    let label_offset = bytes.len() - 12;
    bytes[label_offset..label_offset + 4].copy_from_slice(&7i32.to_le_bytes());
    match FeaturePack::from_bytes(&bytes) {
        Err(e) => println!("corrupted pack rejected: {e}"),
        Ok(_) => return Err("corruption went unnoticed".into()),
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn Error>> {
    run_example()
}
