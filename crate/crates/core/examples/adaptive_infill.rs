//! Recover unlabeled novel points after selection with context prototypes.
//!
//! cargo run --example adaptive_infill

use gfs3d::infill::{adaptive_set, context_prototypes, infill, InfillConfig};
use gfs3d::metrics::{mean_quality, pseudo_label_quality};
use gfs3d::select::{ps_refine, SelectionConfig};
use gfs3d::sim::{simulate_corpus, CorpusConfig, NoiseSpec};

fn main() -> gfs3d::Result<()> {
    let mut cfg = CorpusConfig::new(5);
    cfg.n_scenes = 1;
    cfg.provider.noise_sigma = 0.1;
    cfg.provider.confusion_prob = 0.05;
    cfg.noise = NoiseSpec {
        p_miss: 0.3,
        erosion_frac: 0.3,
        flip_prob: 0.0,
        seed: 2,
    };
    let corpus = simulate_corpus(&cfg)?;
    let schema = &corpus.schema;
    let support = corpus.support_prototypes()?;
    let s = &corpus.scenes[0];
    let y = ps_refine(
        &s.features,
        &s.raw_predictions,
        &s.base_labels,
        &support,
        &SelectionConfig::default(),
        schema,
    )?
    .labels;

    let context = context_prototypes(&s.features, &y, schema)?;
    let (adaptive, sources) = adaptive_set(&context, &support, schema)?;
    for (class, src) in &sources {
        println!(
            "{:<10} prototype from {src:?}",
            schema.name(*class).unwrap()
        );
    }
    for delta in [0.8, 0.85, 0.9, 0.95] {
        let out = infill(
            &y,
            &s.features,
            &adaptive,
            &InfillConfig::new(delta)?,
            schema,
        )?;
        let q = pseudo_label_quality(&out.labels, &s.ground_truth.labels, schema)?;
        let (p, r) = mean_quality(&q);
        println!(
            "delta {delta:.2}: {:>5} points infilled, novel precision {:.3} recall {:.3}",
            out.total_assigned(),
            p.unwrap_or(0.0),
            r.unwrap_or(0.0)
        );
    }
    Ok(())
}
