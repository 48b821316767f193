//! Filter noisy novel-class predictions by prototype agreement.
//!
//! cargo run --example pseudo_label_selection

use gfs3d::metrics::{mean_quality, pseudo_label_quality};
use gfs3d::select::{ps_refine, SelectionConfig};
use gfs3d::sim::{simulate_corpus, CorpusConfig, NoiseSpec};

fn main() -> gfs3d::Result<()> {
    let mut cfg = CorpusConfig::new(42);
    cfg.n_scenes = 1;
    cfg.noise = NoiseSpec {
        p_miss: 0.2,
        erosion_frac: 0.1,
        flip_prob: 0.2,
        seed: 1,
    };
    let corpus = simulate_corpus(&cfg)?;
    let schema = &corpus.schema;
    let support = corpus.support_prototypes()?;
    let scene = &corpus.scenes[0];

    let ps = ps_refine(
        &scene.features,
        &scene.raw_predictions,
        &scene.base_labels,
        &support,
        &SelectionConfig::default(),
        schema,
    )?;
    for d in &ps.decisions {
        println!(
            "{:<10} points {:>5}  cosine {:>7.4}  {}",
            schema.name(d.class).unwrap(),
            d.points,
            d.cosine,
            if d.kept { "kept" } else { "dropped" }
        );
    }

    let gt = &scene.ground_truth.labels;
    let novel = |pred: &[i32]| -> gfs3d::Result<(Option<f64>, Option<f64>)> {
        let q = pseudo_label_quality(pred, gt, schema)?;
        Ok(mean_quality(&q))
    };
    println!(
        "raw      precision/recall {:?}",
        novel(&scene.raw_predictions)?
    );
    println!("selected precision/recall {:?}", novel(&ps.labels)?);
    Ok(())
}
