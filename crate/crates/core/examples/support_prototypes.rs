//! Build K-shot support prototypes and compare them with the class anchors
//! of the synthetic feature provider.
//!
//! cargo run --example support_prototypes

use gfs3d::embed::{FeatureProvider, SyntheticProvider, SyntheticProviderConfig};
use gfs3d::prototype::{cosine, support_prototypes};
use gfs3d::sim::{demo_schema, gen_scene, make_support, random_room, RoomConfig};

fn main() -> gfs3d::Result<()> {
    let schema = demo_schema(4, 3)?;
    let provider = SyntheticProvider::new(
        &schema,
        SyntheticProviderConfig {
            dim: 64,
            anchor_seed: 7,
            noise_seed: 8,
            noise_sigma: 0.3,
            confusion_prob: 0.05,
        },
    )?;
    println!("prompt template: {}", provider.prompt_template());

    // every room is guaranteed to contain one novel class
    let rooms = (0..15)
        .map(|i| {
            let class = schema.novel_range().nth(i % 3).unwrap();
            gen_scene(
                &random_room(&schema, &RoomConfig::default(), &[class], i as u64),
                &schema,
            )
        })
        .collect::<gfs3d::Result<Vec<_>>>()?;

    for k in [1, 5] {
        let (support, chosen) = make_support(&rooms, &schema, k, 3)?;
        // shots carry only their class mask, so embed the full rooms
        let protos = gfs3d::prototype::support_prototypes_with(&support, |class, s, _| {
            provider.embed_scene(&rooms[chosen[&class][s]])
        })?;
        for (class, p) in protos.iter() {
            println!(
                "K={k} {:<8} cosine to anchor {:.4}",
                schema.name(class).unwrap(),
                cosine(p, provider.anchor(class).unwrap())
            );
        }
    }

    // embedding the masked shot directly treats context as background
    let (support, _) = make_support(&rooms, &schema, 1, 3)?;
    let direct = support_prototypes(&support, &provider)?;
    println!("prototypes from shot scenes: {} classes", direct.len());
    Ok(())
}
