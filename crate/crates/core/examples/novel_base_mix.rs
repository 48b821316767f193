//! Paste cropped support objects next to a base room.
//!
//! cargo run --example novel_base_mix

use gfs3d::nbmix::{mix, MixConfig};
use gfs3d::ply::{save_scene, PlyFormat};
use gfs3d::scene::PointCloudScene;
use gfs3d::sim::{simulate_corpus, CorpusConfig};

fn main() -> gfs3d::Result<()> {
    let mut cfg = CorpusConfig::new(9);
    cfg.n_scenes = 1;
    cfg.shots = 2;
    let corpus = simulate_corpus(&cfg)?;
    let s = &corpus.scenes[0];
    let base = PointCloudScene {
        labels: s.base_labels.clone(),
        ..s.ground_truth.clone()
    };

    let mc = MixConfig {
        seed: 3,
        ..MixConfig::default()
    };
    let out = mix(&base, &corpus.support, &mc, &mut mc.rng())?;
    println!(
        "base {} points -> mixed {} points",
        base.len(),
        out.scene.len()
    );
    for b in &out.blocks {
        println!(
            "{:<10} shot {} {:>5} points  pairing {:?}  shift ({:.2}, {:.2}, {:.2})",
            corpus.schema.name(b.class).unwrap(),
            b.shot,
            b.len,
            b.placement.pairing,
            b.placement.translation[0],
            b.placement.translation[1],
            b.placement.z_adjust
        );
    }
    let path = std::env::temp_dir().join("gfs3d-example-mix.ply");
    save_scene(&out.scene, &path, PlyFormat::BinaryLittleEndian)?;
    println!("wrote {}", path.display());
    Ok(())
}
