//! Count class occurrences over labeled scenes and derive a base/novel split.
//!
//! cargo run --example benchmark_split

use gfs3d::bench::{build_split, class_stats, summarize, CountMode, SceneLabels, SplitSpec};
use gfs3d::sim::{demo_schema, gen_scene, random_room, RoomConfig};

fn main() -> gfs3d::Result<()> {
    // the full vocabulary; the split decides which classes become base
    let vocab = demo_schema(12, 24)?;
    let names: Vec<String> = vocab.names().map(str::to_string).collect();
    let room = RoomConfig {
        base_objects: 4,
        novel_objects: 4,
        ..RoomConfig::default()
    };
    let scenes = (0..60)
        .map(|i| gen_scene(&random_room(&vocab, &room, &[], i), &vocab))
        .collect::<gfs3d::Result<Vec<_>>>()?;

    let stats = class_stats(
        scenes.iter().map(|s| SceneLabels {
            labels: &s.labels,
            instances: None,
        }),
        &names,
        CountMode::Scenes,
    )?;
    let schema = build_split(
        &stats,
        &SplitSpec {
            freq_threshold: 8,
            n_base: 6,
        },
    )?;
    println!("base:  {}", schema.base_names().join(", "));
    println!("novel: {}", schema.novel_names().join(", "));
    println!();
    print!("{}", summarize(&stats, &schema)?.to_table());
    Ok(())
}
