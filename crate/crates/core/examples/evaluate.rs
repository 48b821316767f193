//! Score raw, selected and refined labels with mIoU and harmonic mean.
//!
//! cargo run --example evaluate

use gfs3d::metrics::{aggregate, summary, ConfusionMatrix};
use gfs3d::pipeline::{refine_scene, RefineConfig};
use gfs3d::sim::{simulate_corpus, CorpusConfig, NoiseSpec};

fn main() -> gfs3d::Result<()> {
    let mut runs = Vec::new();
    for seed in 0..3 {
        let mut cfg = CorpusConfig::new(seed);
        cfg.n_scenes = 3;
        cfg.noise = NoiseSpec {
            p_miss: 0.2,
            erosion_frac: 0.2,
            flip_prob: 0.2,
            seed,
        };
        let corpus = simulate_corpus(&cfg)?;
        let schema = &corpus.schema;
        let support = corpus.support_prototypes()?;
        let n = schema.n_classes();
        let (mut raw, mut sel, mut full) = (
            ConfusionMatrix::new(n),
            ConfusionMatrix::new(n),
            ConfusionMatrix::new(n),
        );
        for s in &corpus.scenes {
            let r = refine_scene(
                &s.features,
                &s.raw_predictions,
                &s.base_labels,
                &support,
                &RefineConfig::default(),
                schema,
            )?;
            let gt = &s.ground_truth.labels;
            raw.accumulate(&s.raw_predictions, gt)?;
            sel.accumulate(&r.selected, gt)?;
            full.accumulate(&r.labels, gt)?;
        }
        println!("seed {seed}");
        for (name, conf) in [("raw", &raw), ("selected", &sel), ("refined", &full)] {
            println!("  {name}");
            for line in summary(conf, schema)?.to_table().lines() {
                println!("    {line}");
            }
        }
        runs.push(summary(&full, schema)?);
    }
    let agg = aggregate(&runs);
    println!(
        "refined over {} runs: mIoU-A {:.2} ± {:.2}, HM {:.2} ± {:.2}",
        agg.runs,
        100.0 * agg.mean[2],
        100.0 * agg.std[2],
        100.0 * agg.mean[3],
        100.0 * agg.std[3]
    );
    Ok(())
}
