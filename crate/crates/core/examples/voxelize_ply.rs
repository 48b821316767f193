//! Write a labeled scene to PLY, read it back and grid-downsample it.
//!
//! cargo run --example voxelize_ply

use gfs3d::ply::{load_scene, save_scene, PlyFormat};
use gfs3d::scene::{validate_scene, voxelize, ClassSchema, VoxelConfig};
use gfs3d::sim::{gen_scene, random_room, RoomConfig};

fn main() -> gfs3d::Result<()> {
    let schema = ClassSchema::new(["floor", "wall", "table"], ["lamp"])?;
    let spec = random_room(&schema, &RoomConfig::default(), &[3], 1);
    let scene = gen_scene(&spec, &schema)?;
    println!(
        "generated {} points, valid: {}",
        scene.len(),
        validate_scene(&scene, &schema).is_valid()
    );

    let dir = std::env::temp_dir().join("gfs3d-example-voxelize");
    std::fs::create_dir_all(&dir).map_err(|e| gfs3d::Error::Config(e.to_string()))?;
    let path = dir.join("room.ply");
    save_scene(&scene, &path, PlyFormat::BinaryLittleEndian)?;
    let loaded = load_scene(&path)?.scene;

    for grid in [0.02, 0.05, 0.2] {
        let v = voxelize(&loaded, &VoxelConfig::new(grid)?)?;
        println!("grid {grid:>4} m -> {:>5} points", v.len());
    }
    save_scene(
        &voxelize(&loaded, &VoxelConfig::default())?,
        dir.join("room_vox.ply"),
        PlyFormat::Ascii,
    )?;
    println!("wrote {}", dir.display());
    Ok(())
}
