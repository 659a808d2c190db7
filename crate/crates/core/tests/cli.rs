use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use ghost_osr::metrics::{EvalSummary, KnownScores};
use ghost_osr::scoring::{Method, ScoredSet, Scorer};
use ghost_osr::synth::gaussian_audit_pack;
use ghost_osr::{featurepack, gaussbank, FeaturePack};
use serde_json::Value;

fn ghost(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ghost"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

struct Workspace {
    dir: tempfile::TempDir,
}

impl Workspace {
    fn new() -> Self {
        Self {
            dir: tempfile::tempdir().unwrap(),
        }
    }

    fn path(&self, name: &str) -> String {
        self.dir.path().join(name).to_string_lossy().into_owned()
    }

    fn synth(&self, seed: &str) -> PathBuf {
        let out = ghost(&[
            "synth",
            "--out-dir",
            &self.path("data"),
            "--classes",
            "6",
            "--dim",
            "5",
            "--train-per-class",
            "40",
            "--test-per-class",
            "20",
            "--unknowns",
            "120",
            "--seed",
            seed,
        ]);
        assert_eq!(code(&out), 0, "{}", stderr(&out));
        self.dir.path().join("data")
    }

    fn fit(&self) {
        let out = ghost(&[
            "fit",
            "--train",
            &self.path("data/train.ghpk"),
            "--out",
            &self.path("bank.ghbk"),
        ]);
        assert_eq!(code(&out), 0, "{}", stderr(&out));
    }
}

#[test]
fn usage_errors_exit_2() {
    let ws = Workspace::new();
    ws.synth("1");
    let pack = ws.path("data/known.ghpk");
    let out = ghost(&[
        "score",
        "--method",
        "openmax",
        "--pack",
        &pack,
        "--out",
        &ws.path("s.csv"),
    ]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("expected one of"));

    let out = ghost(&[
        "score",
        "--method",
        "nnguide",
        "--pack",
        &pack,
        "--out",
        &ws.path("s.csv"),
        "--seed",
        "1",
    ]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("reference"));

    let out = ghost(&["synth", "--out-dir", &ws.path("x")]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("--seed"));

    let out = ghost(&[
        "score",
        "--method",
        "ghost",
        "--pack",
        &pack,
        "--out",
        &ws.path("s.csv"),
    ]);
    assert_eq!(code(&out), 2);

    assert_eq!(code(&ghost(&["fit", "--bogus"])), 2);
    assert_eq!(code(&ghost(&["--help"])), 0);
}

#[test]
fn nnguide_requires_a_seed() {
    let ws = Workspace::new();
    ws.synth("1");
    let args = |seed: Option<&str>| {
        let mut v = vec![
            "score".to_string(),
            "--method".into(),
            "nnguide".into(),
            "--reference".into(),
            ws.path("data/train.ghpk"),
            "--pack".into(),
            ws.path("data/known.ghpk"),
            "--out".into(),
            ws.path("nn.csv"),
            "--nn-fraction".into(),
            "0.5".into(),
            "--k-nn".into(),
            "3".into(),
        ];
        if let Some(s) = seed {
            v.extend(["--seed".to_string(), s.to_string()]);
        }
        v
    };
    let no_seed = args(None);
    assert_eq!(code(&ghost(&no_seed.iter().map(String::as_str).collect::<Vec<_>>())), 2);
    let seeded = args(Some("9"));
    let out = ghost(&seeded.iter().map(String::as_str).collect::<Vec<_>>());
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let first = fs::read(ws.path("nn.csv")).unwrap();
    ghost(&seeded.iter().map(String::as_str).collect::<Vec<_>>());
    assert_eq!(fs::read(ws.path("nn.csv")).unwrap(), first);
}

#[test]
fn data_errors_exit_3() {
    let ws = Workspace::new();
    fs::write(ws.path("junk.ghpk"), b"GHPKnot really a pack").unwrap();
    let out = ghost(&["fit", "--train", &ws.path("junk.ghpk"), "--out", &ws.path("b")]);
    assert_eq!(code(&out), 3);
    assert!(stderr(&out).contains("offset"), "{}", stderr(&out));

    let out = ghost(&["fit", "--train", &ws.path("missing.ghpk"), "--out", &ws.path("b")]);
    assert_eq!(code(&out), 3);

    // class 1 has a single correctly classified sample
    let pack = FeaturePack::new(
        2,
        1,
        vec![0.0, 1.0, 5.0, 6.0],
        vec![1.0, 0.0, 1.0, 0.0, 0.0, 1.0, 1.0, 0.0],
        vec![0, 0, 1, 1],
    )
    .unwrap();
    featurepack::write_pack(&pack, ws.path("thin.ghpk")).unwrap();
    let out = ghost(&["fit", "--train", &ws.path("thin.ghpk"), "--out", &ws.path("b")]);
    assert_eq!(code(&out), 3);
    assert!(stderr(&out).contains("class 1"), "{}", stderr(&out));
    assert!(!Path::new(&ws.path("b")).exists());
}

#[test]
fn synth_is_deterministic_and_valid() {
    let (a, b) = (Workspace::new(), Workspace::new());
    let (da, db) = (a.synth("17"), b.synth("17"));
    for name in ["train.ghpk", "known.ghpk", "unknown.ghpk"] {
        let bytes = fs::read(da.join(name)).unwrap();
        assert_eq!(bytes, fs::read(db.join(name)).unwrap(), "{name}");
        FeaturePack::from_bytes(&bytes).expect("generated packs validate");
    }
    let other = Workspace::new();
    let dc = other.synth("18");
    assert_ne!(
        fs::read(da.join("train.ghpk")).unwrap(),
        fs::read(dc.join("train.ghpk")).unwrap()
    );
}

#[test]
fn eval_summary_matches_library() {
    let ws = Workspace::new();
    let data = ws.synth("3");
    ws.fit();
    for set in ["known", "unknown"] {
        let out = ghost(&[
            "score",
            "--method",
            "ghost",
            "--bank",
            &ws.path("bank.ghbk"),
            "--pack",
            &ws.path(&format!("data/{set}.ghpk")),
            "--out",
            &ws.path(&format!("{set}.csv")),
        ]);
        assert_eq!(code(&out), 0, "{}", stderr(&out));
    }
    let out = ghost(&[
        "eval",
        "--known-pack",
        &ws.path("data/known.ghpk"),
        "--known-scores",
        &ws.path("known.csv"),
        "--unknown-scores",
        &ws.path("unknown.csv"),
        "--out-dir",
        &ws.path("eval"),
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    for f in [
        "oscr.csv",
        "roc.csv",
        "oscr_log.csv",
        "oscr_top10.csv",
        "oscr_bottom10.csv",
        "fairness.csv",
        "fairness.json",
    ] {
        assert!(Path::new(&ws.path(&format!("eval/{f}"))).exists(), "{f}");
    }

    let known_pack = featurepack::read_pack(data.join("known.ghpk")).unwrap();
    let unknown_pack = featurepack::read_pack(data.join("unknown.ghpk")).unwrap();
    let bank = gaussbank::load_bank(ws.path("bank.ghbk")).unwrap();
    let scorer = Scorer::Ghost(&bank);
    let known = KnownScores::new(&scorer.score_pack(&known_pack).unwrap(), &known_pack).unwrap();
    let unknown = scorer.score_pack(&unknown_pack).unwrap().scores;
    let direct = serde_json::to_value(EvalSummary::compute(&known, &unknown).unwrap()).unwrap();
    let written: Value = serde_json::from_str(&fs::read_to_string(ws.path("eval/summary.json")).unwrap()).unwrap();
    assert_eq!(written, direct);
    let fairness = fs::read_to_string(ws.path("eval/fairness.csv")).unwrap();
    assert!(fairness.starts_with("fpr,mu,var,cov\n"));
}

fn write_scores(path: &str, predicted: &[usize], scores: &[f64]) {
    let set = ScoredSet::from_parts(Method::MaxLogit, 0, predicted.to_vec(), scores.to_vec()).unwrap();
    set.write_csv(path).unwrap();
}

#[test]
fn eval_perfect_separation() {
    let ws = Workspace::new();
    let pack = FeaturePack::new(
        2,
        1,
        vec![0.0; 4],
        vec![1.0, 0.0, 1.0, 0.0, 0.0, 1.0, 0.0, 1.0],
        vec![0, 0, 1, 1],
    )
    .unwrap();
    featurepack::write_pack(&pack, ws.path("known.ghpk")).unwrap();
    write_scores(&ws.path("k.csv"), &[0, 0, 1, 1], &[5.0, 6.0, 7.0, 8.0]);
    write_scores(&ws.path("u.csv"), &[0, 1, 0], &[1.0, 2.0, 3.0]);
    let out = ghost(&[
        "eval",
        "--known-pack",
        &ws.path("known.ghpk"),
        "--known-scores",
        &ws.path("k.csv"),
        "--unknown-scores",
        &ws.path("u.csv"),
        "--out-dir",
        &ws.path("eval"),
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let s: Value = serde_json::from_str(&fs::read_to_string(ws.path("eval/summary.json")).unwrap()).unwrap();
    assert_eq!(s["auroc"], 1.0);
    assert_eq!(s["auoscr"], 1.0);
    assert_eq!(s["fpr95"], 0.0);

    // a score file for another pack is caught by its row count
    write_scores(&ws.path("short.csv"), &[0], &[5.0]);
    let out = ghost(&[
        "eval",
        "--known-pack",
        &ws.path("known.ghpk"),
        "--known-scores",
        &ws.path("short.csv"),
        "--unknown-scores",
        &ws.path("u.csv"),
        "--out-dir",
        &ws.path("eval2"),
    ]);
    assert_eq!(code(&out), 3);
}

#[test]
fn audit_outputs() {
    let ws = Workspace::new();
    let pack = gaussian_audit_pack(3, 4, 150, &[(1, 2)], 5).unwrap();
    featurepack::write_pack(&pack, ws.path("train.ghpk")).unwrap();
    let out = ghost(&[
        "audit",
        "--train",
        &ws.path("train.ghpk"),
        "--out",
        &ws.path("audit.csv"),
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert!(String::from_utf8_lossy(&out.stdout).contains("rejection fraction"));
    let csv = fs::read_to_string(ws.path("audit.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("class,dim,W,p,rejected,degenerate"));
    let row = lines.find(|l| l.starts_with("1,2,")).unwrap();
    assert!(row.ends_with(",1,0"), "{row}");

    // too few correct samples: degenerate, not an error
    let tiny = pack.select(&[0, 1, 150, 151, 152, 153, 300, 301, 302]);
    featurepack::write_pack(&tiny, ws.path("tiny.ghpk")).unwrap();
    let out = ghost(&["audit", "--train", &ws.path("tiny.ghpk"), "--out", &ws.path("tiny.csv")]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let csv = fs::read_to_string(ws.path("tiny.csv")).unwrap();
    let class0: Vec<&str> = csv.lines().filter(|l| l.starts_with("0,")).collect();
    assert_eq!(class0.len(), 4);
    assert!(class0.iter().all(|l| l.ends_with(",1")), "{csv}");
}

#[test]
fn compare_reports_and_is_reproducible() {
    let ws = Workspace::new();
    ws.synth("4");
    ws.fit();
    let run = |a: &str, b: &str, out: &str, seed: &str| {
        ghost(&[
            "compare",
            "--method-a",
            a,
            "--method-b",
            b,
            "--known",
            &ws.path("data/known.ghpk"),
            "--unknown",
            &ws.path("data/unknown.ghpk"),
            "--bank",
            &ws.path("bank.ghbk"),
            "--n-known",
            "60",
            "--n-unknown",
            "60",
            "--seed",
            seed,
            "--out",
            &ws.path(out),
        ])
    };
    let out = run("ghost", "msp", "c1.json", "8");
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    run("ghost", "msp", "c2.json", "8");
    let first = fs::read_to_string(ws.path("c1.json")).unwrap();
    assert_eq!(first, fs::read_to_string(ws.path("c2.json")).unwrap());
    let report: Value = serde_json::from_str(&first).unwrap();
    assert_eq!(report["method_a"]["values"].as_array().unwrap().len(), 10);
    assert!(report["corrected_p"].as_f64().unwrap() <= 1.0);

    let out = run("energy", "energy", "same.json", "8");
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert!(String::from_utf8_lossy(&out.stdout).contains("indistinguishable"));
    let same: Value = serde_json::from_str(&fs::read_to_string(ws.path("same.json")).unwrap()).unwrap();
    assert_eq!(same["verdict"], "indistinguishable");

    assert_eq!(code(&run("ghost", "msp", "c3.json", "")), 2);
    let too_many = ghost(&[
        "compare",
        "--method-a",
        "ghost",
        "--method-b",
        "msp",
        "--known",
        &ws.path("data/known.ghpk"),
        "--unknown",
        &ws.path("data/unknown.ghpk"),
        "--bank",
        &ws.path("bank.ghbk"),
        "--seed",
        "1",
        "--out",
        &ws.path("c4.json"),
    ]);
    assert_eq!(code(&too_many), 3);
}

#[test]
fn compare_constant_gap_is_degenerate() {
    // knowns: high max logit, small margin; unknowns: low max logit, wide margin.
    // MaxLogit separates perfectly (AUROC 1) and MSP is exactly reversed (AUROC 0).
    let ws = Workspace::new();
    let n = 40;
    let emb: Vec<f32> = (0..n).map(|i| i as f32).collect();
    let known_logits: Vec<f32> = (0..n)
        .flat_map(|i| [5.0 + 0.1 * i as f32, 4.9 + 0.1 * i as f32])
        .collect();
    let known = FeaturePack::new(2, 1, emb.clone(), known_logits, vec![0; n]).unwrap();
    let unknown_logits: Vec<f32> = (0..n)
        .flat_map(|i| [-10.0 - 0.1 * i as f32, -20.0 - 0.1 * i as f32])
        .collect();
    let unknown = FeaturePack::new(2, 1, emb, unknown_logits, vec![-1; n]).unwrap();
    featurepack::write_pack(&known, ws.path("k.ghpk")).unwrap();
    featurepack::write_pack(&unknown, ws.path("u.ghpk")).unwrap();
    let run = |a: &str, b: &str| {
        ghost(&[
            "compare",
            "--method-a",
            a,
            "--method-b",
            b,
            "--known",
            &ws.path("k.ghpk"),
            "--unknown",
            &ws.path("u.ghpk"),
            "--n-known",
            "20",
            "--n-unknown",
            "20",
            "--seed",
            "2",
            "--out",
            &ws.path("c.json"),
        ])
    };
    let out = run("maxlogit", "msp");
    assert_eq!(code(&out), 4, "{}", stderr(&out));
    assert!(stderr(&out).contains("every difference equals 1"), "{}", stderr(&out));
    // energy also separates perfectly: identical AUROCs, so indistinguishable
    let out = run("maxlogit", "energy");
    assert_eq!(code(&out), 0, "{}", stderr(&out));
}

#[test]
fn import_csv_round_trip() {
    let ws = Workspace::new();
    fs::write(ws.path("f.csv"), "label,e0,z0,z1\n0,1.5,2,1\n1,-0.5,0,3\n-1,9,1,1\n").unwrap();
    let out = ghost(&["import-csv", "--csv", &ws.path("f.csv"), "--out", &ws.path("f.ghpk")]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let pack = featurepack::read_pack(ws.path("f.ghpk")).unwrap();
    assert_eq!((pack.n_samples(), pack.n_classes(), pack.dim()), (3, 2, 1));
    assert_eq!(pack.labels(), &[0, 1, -1]);

    fs::write(ws.path("bad.csv"), "label,e0,z0,z1\n0,1.5,2\n").unwrap();
    let out = ghost(&[
        "import-csv",
        "--csv",
        &ws.path("bad.csv"),
        "--out",
        &ws.path("bad.ghpk"),
    ]);
    assert_eq!(code(&out), 3);
}

#[test]
fn config_file_supplies_defaults() {
    let ws = Workspace::new();
    fs::write(
        ws.path("run.toml"),
        format!("seed = 5\nclasses = 3\ndim = 2\nout-dir = \"{}\"\n", ws.path("cfg")),
    )
    .unwrap();
    let out = ghost(&["--config", &ws.path("run.toml"), "synth", "--dim", "4"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let pack = featurepack::read_pack(ws.path("cfg/train.ghpk")).unwrap();
    assert_eq!((pack.n_classes(), pack.dim()), (3, 4));

    fs::write(ws.path("bad.toml"), "sed = 5\n").unwrap();
    assert_eq!(code(&ghost(&["--config", &ws.path("bad.toml"), "synth"])), 2);
}
