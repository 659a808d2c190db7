// The full command-line pipeline driven in-process: synth, fit, score, eval, audit, compare.

use std::error::Error;

use ghost_osr::cli;

fn ghost(args: &[&str]) -> Result<(), Box<dyn Error>> {
    let argv: Vec<&str> = std::iter::once("ghost").chain(args.iter().copied()).collect();
    match cli::run(argv) {
        0 => Ok(()),
        code => Err(format!("ghost {} exited with {code}", args.join(" ")).into()),
    }
}

pub fn run_example() -> Result<(), Box<dyn Error>> {
    let dir = tempfile::tempdir()?;
    let p = |name: &str| dir.path().join(name).to_string_lossy().into_owned();

    let config = p("run.toml");
    std::fs::write(&config, "seed = 1\nclasses = 8\ndim = 12\ntrain-per-class = 60\n")?;
    ghost(&["--config", &config, "synth", "--out-dir", &p("data")])?;
    ghost(&["fit", "--train", &p("data/train.ghpk"), "--out", &p("bank.ghbk")])?;
    for set in ["known", "unknown"] {
        ghost(&[
            "score",
            "--method",
            "ghost",
            "--bank",
            &p("bank.ghbk"),
            "--pack",
            &p(&format!("data/{set}.ghpk")),
            "--out",
            &p(&format!("{set}.csv")),
        ])?;
    }
    ghost(&[
        "eval",
        "--known-pack",
        &p("data/known.ghpk"),
        "--known-scores",
        &p("known.csv"),
        "--unknown-scores",
        &p("unknown.csv"),
        "--out-dir",
        &p("eval"),
    ])?;
    ghost(&["audit", "--train", &p("data/train.ghpk"), "--out", &p("audit.csv")])?;
    ghost(&[
        "--config",
        &config,
        "compare",
        "--method-a",
        "ghost",
        "--method-b",
        "energy",
        "--bank",
        &p("bank.ghbk"),
        "--known",
        &p("data/known.ghpk"),
        "--unknown",
        &p("data/unknown.ghpk"),
        "--n-known",
        "200",
        "--n-unknown",
        "200",
        "--out",
        &p("compare.json"),
    ])?;
    println!("{}", std::fs::read_to_string(p("eval/summary.json"))?);
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn Error>> {
    run_example()
}
