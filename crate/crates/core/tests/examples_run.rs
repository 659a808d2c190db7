macro_rules! example {
    ($name:ident, $file:literal) => {
        mod $name {
            include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/", $file));
        }

        #[test]
        fn $name() {
            $name::run_example().expect(concat!($file, " should run"));
        }
    };
}

example!(pack_io, "pack_io.rs");
example!(fit_and_score, "fit_and_score.rs");
example!(oscr_curves, "oscr_curves.rs");
example!(fairness, "fairness.rs");
example!(normality_audit, "normality_audit.rs");
example!(significance, "significance.rs");
example!(nnguide, "nnguide.rs");
example!(cli_pipeline, "cli_pipeline.rs");
