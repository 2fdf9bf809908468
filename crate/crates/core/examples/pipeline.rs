//! The whole command-line pipeline, driven in-process: synthesize, split,
//! tune, train, evaluate, score importance and plot.
//!
//! cargo run --release --example pipeline -- [out-dir]

fn main() {
    let out = std::env::args().nth(1).unwrap_or_else(|| {
        std::env::temp_dir()
            .join("timeagg-run")
            .display()
            .to_string()
    });
    let steps: &[&[&str]] = &[
        &["synth", "--pair"],
        &["prepare"],
        &[
            "tune",
            "--kind",
            "tdd_gru",
            "--trials",
            "8",
            "--max-epochs",
            "80",
        ],
        &[
            "train",
            "--kind",
            "tdd_gru",
            "--max-epochs",
            "80",
            "--merge-val",
        ],
        &[
            "tune",
            "--kind",
            "dense",
            "--trials",
            "8",
            "--max-epochs",
            "80",
        ],
        &[
            "train",
            "--kind",
            "dense",
            "--max-epochs",
            "80",
            "--merge-val",
        ],
        &["eval", "--sweep"],
        &["importance", "--kind", "tdd_gru"],
        &["confusion", "--kind", "tdd_gru"],
    ];
    for step in steps {
        let mut args = vec!["timeagg", "--seed", "1", "--out", &out];
        args.extend_from_slice(step);
        println!("$ {}", args.join(" "));
        let code = timeagg::cli::run(args);
        if code != 0 {
            std::process::exit(code);
        }
    }
    println!("artifacts in {out}");
}
