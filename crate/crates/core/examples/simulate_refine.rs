//! The file-based pipeline: simulate a corpus, refine it and evaluate,
//! driving the same entry point as the `gfs3d` binary.
//!
//! cargo run --example simulate_refine

fn main() {
    let dir = std::env::temp_dir().join("gfs3d-example-pipeline");
    let corpus = dir.join("corpus");
    let refined = dir.join("refined");
    let manifest = corpus.join("manifest.json");
    let steps: [Vec<String>; 4] = [
        args(&[
            "simulate",
            "--out",
            &path(&corpus),
            "--scenes",
            "4",
            "--flip",
            "0.2",
            "--erosion",
            "0.2",
            "--p-miss",
            "0.2",
            "--seed",
            "1",
        ]),
        args(&[
            "refine",
            "--manifest",
            &path(&manifest),
            "--out",
            &path(&refined),
        ]),
        args(&["eval", "--manifest", &path(&manifest), "--raw"]),
        args(&[
            "eval",
            "--manifest",
            &path(&manifest),
            "--pred-dir",
            &path(&refined),
        ]),
    ];
    for step in steps {
        println!("$ gfs3d {}", step[1..].join(" "));
        let code = gfs3d::cli::main_with(step);
        if code != 0 {
            std::process::exit(code);
        }
    }
}

fn path(p: &std::path::Path) -> String {
    p.display().to_string()
}

fn args(a: &[&str]) -> Vec<String> {
    std::iter::once("gfs3d")
        .chain(a.iter().copied())
        .map(String::from)
        .collect()
}
