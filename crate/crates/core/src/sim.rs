//! Procedural labeled rooms and a noisy-prediction model.
//!
//! Rooms are axis-aligned boxes with a sampled floor and walls and a few
//! box or cylinder objects. [`corrupt_predictions`] degrades ground truth
//! the way open-vocabulary predictions typically fail: whole classes
//! missing, masks eroded at their borders, and scattered wrong labels.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::embed::{EmbeddingMatrix, SyntheticProvider, SyntheticProviderConfig};
use crate::error::{Error, Result};
use crate::prototype::{SupportSet, SupportShot};
use crate::scene::{voxelize, ClassSchema, PointCloudScene, VoxelConfig, UNLABELED};
use crate::spatial::KdTree;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Primitive {
    Box {
        min: [f64; 3],
        max: [f64; 3],
    },
    Cylinder {
        center: [f64; 2],
        radius: f64,
        z: [f64; 2],
    },
}

impl Primitive {
    pub fn volume(&self) -> f64 {
        match *self {
            Primitive::Box { min, max } => (0..3).map(|a| (max[a] - min[a]).max(0.0)).product(),
            Primitive::Cylinder { radius, z, .. } => {
                std::f64::consts::PI * radius * radius * (z[1] - z[0]).max(0.0)
            }
        }
    }

    fn bounds(&self) -> ([f64; 3], [f64; 3]) {
        match *self {
            Primitive::Box { min, max } => (min, max),
            Primitive::Cylinder { center, radius, z } => (
                [center[0] - radius, center[1] - radius, z[0]],
                [center[0] + radius, center[1] + radius, z[1]],
            ),
        }
    }

    fn sample<R: Rng>(&self, rng: &mut R) -> [f64; 3] {
        match *self {
            Primitive::Box { min, max } => [0, 1, 2].map(|a| rng.random_range(min[a]..=max[a])),
            Primitive::Cylinder { center, radius, z } => {
                let r = radius * rng.random::<f64>().sqrt();
                let t = rng.random::<f64>() * std::f64::consts::TAU;
                [
                    center[0] + r * t.cos(),
                    center[1] + r * t.sin(),
                    rng.random_range(z[0]..=z[1]),
                ]
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObjectSpec {
    pub class_id: i32,
    pub shape: Primitive,
    /// Points per cubic meter.
    pub density: f64,
}

/// Floor or wall surface; `class_id` may be -1 for unannotated surfaces.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SurfaceSpec {
    pub class_id: i32,
    /// Points per square meter.
    pub density: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneSpec {
    /// Room size along X and Y; the room spans `[0, x] x [0, y]`.
    pub extent: [f64; 2],
    pub height: f64,
    pub floor: Option<SurfaceSpec>,
    pub walls: Option<SurfaceSpec>,
    pub objects: Vec<ObjectSpec>,
    pub seed: u64,
}

fn class_color(label: i32) -> [f32; 3] {
    if label < 0 {
        return [0.5; 3];
    }
    let h = (label as u32).wrapping_mul(2_654_435_761);
    [
        (h & 0xff) as f32 / 255.0,
        ((h >> 8) & 0xff) as f32 / 255.0,
        ((h >> 16) & 0xff) as f32 / 255.0,
    ]
}

fn poisson_count<R: Rng>(rng: &mut R, mean: f64) -> usize {
    if mean <= 0.0 {
        return 0;
    }
    Poisson::new(mean)
        .map(|d| d.sample(rng) as usize)
        .unwrap_or(mean.round() as usize)
}

/// Samples a room. Every object contributes at least one point.
pub fn gen_scene(spec: &SceneSpec, schema: &ClassSchema) -> Result<PointCloudScene> {
    let [ex, ey] = spec.extent;
    if !(ex > 0.0 && ey > 0.0 && spec.height > 0.0) {
        return Err(Error::Config(
            "room extent and height must be positive".into(),
        ));
    }
    for s in spec.floor.iter().chain(&spec.walls) {
        if s.density.is_nan() || s.density <= 0.0 || !schema.is_valid_label(s.class_id) {
            return Err(Error::Config(format!("invalid surface {s:?}")));
        }
    }
    for (k, o) in spec.objects.iter().enumerate() {
        if o.density.is_nan() || o.density <= 0.0 {
            return Err(Error::Config(format!(
                "object {k} has non-positive density"
            )));
        }
        if o.class_id < 0 || !schema.is_valid_label(o.class_id) {
            return Err(Error::Config(format!(
                "object {k} has invalid class {}",
                o.class_id
            )));
        }
        let (lo, hi) = o.shape.bounds();
        let inside = lo[0] >= 0.0
            && lo[1] >= 0.0
            && lo[2] >= 0.0
            && hi[0] <= ex
            && hi[1] <= ey
            && hi[2] <= spec.height;
        if !inside || (0..3).any(|a| hi[a] < lo[a]) {
            return Err(Error::Config(format!(
                "object {k} lies outside the room extent"
            )));
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut positions = Vec::new();
    let mut labels = Vec::new();
    if let Some(floor) = spec.floor {
        for _ in 0..poisson_count(&mut rng, floor.density * ex * ey) {
            positions.push([rng.random_range(0.0..=ex), rng.random_range(0.0..=ey), 0.0]);
            labels.push(floor.class_id);
        }
    }
    if let Some(walls) = spec.walls {
        let h = spec.height;
        for (len, wall) in [(ex, 0), (ex, 1), (ey, 2), (ey, 3)] {
            for _ in 0..poisson_count(&mut rng, walls.density * len * h) {
                let t = rng.random_range(0.0..=len);
                let z = rng.random_range(0.0..=h);
                positions.push(match wall {
                    0 => [t, 0.0, z],
                    1 => [t, ey, z],
                    2 => [0.0, t, z],
                    _ => [ex, t, z],
                });
                labels.push(walls.class_id);
            }
        }
    }
    for o in &spec.objects {
        let n = poisson_count(&mut rng, o.density * o.shape.volume()).max(1);
        for _ in 0..n {
            positions.push(o.shape.sample(&mut rng));
            labels.push(o.class_id);
        }
    }
    let colors = labels.iter().map(|&l| class_color(l)).collect();
    PointCloudScene::new(positions, Some(colors), labels)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    /// Probability that a novel class vanishes from the predictions.
    pub p_miss: f64,
    /// Fraction of each predicted mask, nearest its border, set to -1.
    pub erosion_frac: f64,
    /// Per-point probability of a uniformly random wrong class.
    pub flip_prob: f64,
    pub seed: u64,
}

impl NoiseSpec {
    pub fn none(seed: u64) -> Self {
        NoiseSpec {
            p_miss: 0.0,
            erosion_frac: 0.0,
            flip_prob: 0.0,
            seed,
        }
    }

    pub fn check(&self) -> Result<()> {
        for (name, v) in [
            ("p_miss", self.p_miss),
            ("erosion_frac", self.erosion_frac),
            ("flip_prob", self.flip_prob),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::Config(format!("{name} must be in [0, 1], got {v}")));
            }
        }
        Ok(())
    }
}

/// Degrades ground truth: class dropout, then border erosion, then flips.
pub fn corrupt_predictions(
    gt: &[i32],
    positions: &[[f64; 3]],
    noise: &NoiseSpec,
    schema: &ClassSchema,
) -> Result<Vec<i32>> {
    noise.check()?;
    if gt.len() != positions.len() {
        return Err(Error::Alignment {
            what: "ground truth".into(),
            expected: positions.len(),
            found: gt.len(),
        });
    }
    schema.check_labels(gt)?;
    let mut pred = gt.to_vec();

    // one draw per novel class, present or not
    let mut rng = ChaCha8Rng::seed_from_u64(noise.seed);
    rng.set_stream(0);
    for class in schema.novel_range() {
        if rng.random_bool(noise.p_miss) {
            pred.iter_mut()
                .filter(|l| **l == class)
                .for_each(|l| *l = UNLABELED);
        }
    }

    if noise.erosion_frac > 0.0 {
        let before = pred.clone();
        for class in 0..schema.n_classes() as i32 {
            let members: Vec<usize> = (0..before.len()).filter(|&i| before[i] == class).collect();
            let n_erode = (noise.erosion_frac * members.len() as f64).round() as usize;
            if n_erode == 0 {
                continue;
            }
            let outside: Vec<[f64; 3]> = (0..before.len())
                .filter(|&i| before[i] != class)
                .map(|i| positions[i])
                .collect();
            if outside.is_empty() {
                continue;
            }
            let tree = KdTree::new(outside);
            let mut ranked: Vec<(f64, usize)> = members
                .iter()
                .map(|&i| (tree.nearest_distance(&positions[i]).unwrap(), i))
                .collect();
            ranked.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            for &(_, i) in &ranked[..n_erode] {
                pred[i] = UNLABELED;
            }
        }
    }

    let n_classes = schema.n_classes() as i32;
    let mut rng = ChaCha8Rng::seed_from_u64(noise.seed);
    rng.set_stream(1);
    for l in pred.iter_mut() {
        let flip = rng.random_bool(noise.flip_prob);
        let other = rng.random_range(0..n_classes.max(2) - 1);
        if flip && *l != UNLABELED && n_classes > 1 {
            *l = if other >= *l { other + 1 } else { other };
        }
    }
    Ok(pred)
}

/// Picks K scenes containing each novel class and builds exclusive shots.
/// Also returns, per class, the indices of the chosen scenes.
pub fn make_support(
    scenes: &[PointCloudScene],
    schema: &ClassSchema,
    k: usize,
    seed: u64,
) -> Result<(SupportSet, BTreeMap<i32, Vec<usize>>)> {
    if k == 0 {
        return Err(Error::Config("K must be at least 1".into()));
    }
    let mut shots = BTreeMap::new();
    let mut chosen = BTreeMap::new();
    for class in schema.novel_range() {
        let mut candidates: Vec<usize> = (0..scenes.len())
            .filter(|&s| scenes[s].labels.contains(&class))
            .collect();
        if candidates.len() < k {
            return Err(Error::InsufficientOccurrences {
                class: schema.name(class).unwrap_or_default().to_string(),
                found: candidates.len(),
                needed: k,
            });
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(class as u64);
        candidates.shuffle(&mut rng);
        candidates.truncate(k);
        shots.insert(
            class,
            candidates
                .iter()
                .map(|&s| SupportShot::from_labels(scenes[s].clone(), class))
                .collect(),
        );
        chosen.insert(class, candidates);
    }
    Ok((SupportSet::new(shots, schema)?, chosen))
}

const BASE_NAMES: [&str; 12] = [
    "floor",
    "wall",
    "chair",
    "table",
    "door",
    "window",
    "cabinet",
    "bed",
    "desk",
    "bookshelf",
    "curtain",
    "refrigerator",
];

const NOVEL_NAMES: [&str; 24] = [
    "lamp",
    "sink",
    "monitor",
    "pillow",
    "towel",
    "plant",
    "stool",
    "keyboard",
    "microwave",
    "toilet",
    "mirror",
    "backpack",
    "whiteboard",
    "radiator",
    "bathtub",
    "telephone",
    "shelf",
    "box",
    "bag",
    "shoe",
    "jacket",
    "book",
    "tv",
    "nightstand",
];

/// Schema with `n_base` (1..=12) base and `n_novel` (1..=24) named
/// classes; class 0 is the floor and class 1 the wall.
pub fn demo_schema(n_base: usize, n_novel: usize) -> Result<ClassSchema> {
    if !(2..=BASE_NAMES.len()).contains(&n_base) || !(1..=NOVEL_NAMES.len()).contains(&n_novel) {
        return Err(Error::Config(format!(
            "demo schema supports 2..=12 base and 1..=24 novel classes, got {n_base}/{n_novel}"
        )));
    }
    ClassSchema::new(
        BASE_NAMES[..n_base].iter().copied(),
        NOVEL_NAMES[..n_novel].iter().copied(),
    )
}

/// Knobs for [`random_room`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RoomConfig {
    pub extent: [f64; 2],
    pub height: f64,
    pub surface_density: f64,
    pub object_density: f64,
    pub base_objects: usize,
    pub novel_objects: usize,
}

impl Default for RoomConfig {
    fn default() -> Self {
        RoomConfig {
            extent: [5.0, 4.0],
            height: 2.5,
            surface_density: 25.0,
            object_density: 1500.0,
            base_objects: 3,
            novel_objects: 3,
        }
    }
}

fn random_object<R: Rng>(rng: &mut R, class_id: i32, room: &RoomConfig) -> ObjectSpec {
    let [ex, ey] = room.extent;
    let sx = rng.random_range(0.25..0.8);
    let sy = rng.random_range(0.25..0.8);
    let h = rng.random_range(0.3..1.2f64).min(room.height);
    let x0 = rng.random_range(0.1..(ex - sx - 0.1).max(0.11));
    let y0 = rng.random_range(0.1..(ey - sy - 0.1).max(0.11));
    let shape = if rng.random_bool(0.5) {
        Primitive::Box {
            min: [x0, y0, 0.0],
            max: [x0 + sx, y0 + sy, h],
        }
    } else {
        let r = sx.min(sy) / 2.0;
        Primitive::Cylinder {
            center: [x0 + r, y0 + r],
            radius: r,
            z: [0.0, h],
        }
    };
    ObjectSpec {
        class_id,
        shape,
        density: room.object_density,
    }
}

/// Random room spec. `required` novel classes are always placed; the rest
/// of the objects are drawn uniformly from the schema.
pub fn random_room(
    schema: &ClassSchema,
    room: &RoomConfig,
    required: &[i32],
    seed: u64,
) -> SceneSpec {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut objects = Vec::new();
    let base_pool: Vec<i32> = (2..schema.n_base() as i32).collect();
    if !base_pool.is_empty() {
        for _ in 0..room.base_objects {
            let c = base_pool[rng.random_range(0..base_pool.len())];
            objects.push(random_object(&mut rng, c, room));
        }
    }
    for &c in required {
        objects.push(random_object(&mut rng, c, room));
    }
    let novel = schema.novel_range();
    for _ in required.len()..room.novel_objects {
        let c = rng.random_range(novel.clone());
        objects.push(random_object(&mut rng, c, room));
    }
    SceneSpec {
        extent: room.extent,
        height: room.height,
        floor: Some(SurfaceSpec {
            class_id: 0,
            density: room.surface_density,
        }),
        walls: Some(SurfaceSpec {
            class_id: 1.min(schema.n_base() as i32 - 1),
            density: room.surface_density,
        }),
        objects,
        seed: rng.random(),
    }
}

/// Everything needed to run and score the refinement on synthetic data.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CorpusConfig {
    pub n_scenes: usize,
    pub n_base: usize,
    pub n_novel: usize,
    pub shots: usize,
    pub room: RoomConfig,
    pub provider: SyntheticProviderConfig,
    pub noise: NoiseSpec,
    /// Voxel size applied to every generated scene; `None` skips it.
    pub grid_size: Option<f64>,
    pub seed: u64,
}

impl CorpusConfig {
    pub fn new(seed: u64) -> Self {
        CorpusConfig {
            n_scenes: 4,
            n_base: 6,
            n_novel: 6,
            shots: 1,
            room: RoomConfig::default(),
            provider: SyntheticProviderConfig {
                dim: 32,
                anchor_seed: seed,
                noise_seed: seed.wrapping_add(1),
                noise_sigma: 0.03,
                confusion_prob: 0.0,
            },
            noise: NoiseSpec::none(seed.wrapping_add(2)),
            grid_size: Some(crate::scene::DEFAULT_GRID_SIZE),
            seed,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SimScene {
    /// Positions with full ground-truth labels.
    pub ground_truth: PointCloudScene,
    /// Base-class annotation (novel and unlabeled points are -1).
    pub base_labels: Vec<i32>,
    pub raw_predictions: Vec<i32>,
    pub features: EmbeddingMatrix,
}

#[derive(Debug, Clone)]
pub struct SimShot {
    pub class: i32,
    pub shot: SupportShot,
    pub features: EmbeddingMatrix,
}

#[derive(Debug, Clone)]
pub struct Corpus {
    pub schema: ClassSchema,
    pub scenes: Vec<SimScene>,
    pub support: SupportSet,
    pub shots: Vec<SimShot>,
}

impl Corpus {
    /// Features of shot `s` of `class`, in [`SupportSet`] order.
    pub fn shot_features(&self, class: i32, s: usize) -> &EmbeddingMatrix {
        &self
            .shots
            .iter()
            .filter(|x| x.class == class)
            .nth(s)
            .expect("shot exists")
            .features
    }

    pub fn support_prototypes(&self) -> Result<crate::prototype::PrototypeSet> {
        crate::prototype::support_prototypes_with(&self.support, |c, s, _| {
            Ok(self.shot_features(c, s).clone())
        })
    }
}

fn finish_scene(
    spec: &SceneSpec,
    schema: &ClassSchema,
    grid: Option<&VoxelConfig>,
) -> Result<PointCloudScene> {
    let scene = gen_scene(spec, schema)?;
    match grid {
        Some(g) => voxelize(&scene, g),
        None => Ok(scene),
    }
}

/// Training scenes with corrupted predictions and features, plus a support
/// pool of `n_novel * shots` rooms from which K shots per class are drawn.
pub fn simulate_corpus(cfg: &CorpusConfig) -> Result<Corpus> {
    let schema = demo_schema(cfg.n_base, cfg.n_novel)?;
    cfg.noise.check()?;
    let grid = cfg.grid_size.map(VoxelConfig::new).transpose()?;
    let provider = SyntheticProvider::new(&schema, cfg.provider)?;

    let mut scenes = Vec::with_capacity(cfg.n_scenes);
    for s in 0..cfg.n_scenes {
        let spec = random_room(
            &schema,
            &cfg.room,
            &[],
            cfg.seed.wrapping_mul(1_000_003).wrapping_add(s as u64),
        );
        let gt = finish_scene(&spec, &schema, grid.as_ref())?;
        let noise = NoiseSpec {
            seed: cfg.noise.seed.wrapping_add(s as u64),
            ..cfg.noise
        };
        let raw = corrupt_predictions(&gt.labels, &gt.positions, &noise, &schema)?;
        let features = embed_with_stream(&provider, &gt.labels, s as u64)?;
        scenes.push(SimScene {
            base_labels: schema.base_only(&gt.labels),
            raw_predictions: raw,
            features,
            ground_truth: gt,
        });
    }

    let mut pool = Vec::new();
    for (j, class) in schema
        .novel_range()
        .cycle()
        .take(cfg.n_novel * cfg.shots)
        .enumerate()
    {
        let room = RoomConfig {
            novel_objects: cfg.room.novel_objects.max(1),
            ..cfg.room
        };
        let spec = random_room(
            &schema,
            &room,
            &[class],
            cfg.seed.wrapping_mul(7_000_003).wrapping_add(j as u64 + 1),
        );
        pool.push(finish_scene(&spec, &schema, grid.as_ref())?);
    }
    let (support, chosen) = make_support(&pool, &schema, cfg.shots, cfg.seed)?;
    let mut shots = Vec::new();
    for (class, idxs) in &chosen {
        for (s, &p) in idxs.iter().enumerate() {
            // features come from the full ground truth of the pool scene
            let features = embed_with_stream(&provider, &pool[p].labels, 1_000_000 + p as u64)?;
            shots.push(SimShot {
                class: *class,
                shot: support.shots(*class)[s].clone(),
                features,
            });
        }
    }
    Ok(Corpus {
        schema,
        scenes,
        support,
        shots,
    })
}

/// Embeds with a per-scene noise stream so scenes do not share noise.
fn embed_with_stream(
    provider: &SyntheticProvider,
    labels: &[i32],
    stream: u64,
) -> Result<EmbeddingMatrix> {
    let seed = provider
        .config()
        .noise_seed
        .wrapping_mul(0x9E37_79B9_7F4A_7C15)
        .wrapping_add(stream);
    provider.with_noise_seed(seed).embed_labels(labels)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn schema() -> ClassSchema {
        demo_schema(4, 3).unwrap()
    }

    fn room_with_box(seed: u64) -> SceneSpec {
        SceneSpec {
            extent: [4.0, 4.0],
            height: 3.0,
            floor: None,
            walls: None,
            objects: vec![ObjectSpec {
                class_id: 5,
                shape: Primitive::Box {
                    min: [1.0, 1.0, 0.0],
                    max: [2.0, 2.0, 1.0],
                },
                density: 5000.0,
            }],
            seed,
        }
    }

    #[test]
    fn box_point_count_tracks_density() {
        let s = schema();
        for seed in 0..100 {
            let scene = gen_scene(&room_with_box(seed), &s).unwrap();
            let n = scene.len() as f64;
            assert!((n - 5000.0).abs() <= 500.0, "seed {seed}: {n}");
            assert!(scene.labels.iter().all(|&l| l == 5));
        }
    }

    #[test]
    fn background_only_room_and_determinism() {
        let s = schema();
        let spec = SceneSpec {
            objects: vec![],
            floor: Some(SurfaceSpec {
                class_id: 0,
                density: 20.0,
            }),
            walls: Some(SurfaceSpec {
                class_id: -1,
                density: 20.0,
            }),
            ..room_with_box(3)
        };
        let a = gen_scene(&spec, &s).unwrap();
        assert!(a.labels.iter().all(|&l| l == 0 || l == -1));
        assert_eq!(a, gen_scene(&spec, &s).unwrap());
    }

    #[test]
    fn object_outside_room_rejected() {
        let s = schema();
        let mut spec = room_with_box(0);
        spec.objects[0].shape = Primitive::Box {
            min: [3.5, 1.0, 0.0],
            max: [4.5, 2.0, 1.0],
        };
        assert!(gen_scene(&spec, &s).is_err());
        let mut spec = room_with_box(0);
        spec.objects[0].density = 0.0;
        assert!(gen_scene(&spec, &s).is_err());
    }

    #[test]
    fn tiny_object_still_gets_a_point() {
        let s = schema();
        let mut spec = room_with_box(0);
        spec.objects[0].density = 1e-9;
        assert_eq!(gen_scene(&spec, &s).unwrap().len(), 1);
    }

    fn labeled(n: usize, seed: u64) -> (Vec<i32>, Vec<[f64; 3]>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let pos = (0..n)
            .map(|_| [rng.random(), rng.random(), rng.random()])
            .collect();
        let gt = (0..n).map(|_| rng.random_range(0..7)).collect();
        (gt, pos)
    }

    #[test]
    fn zero_noise_is_identity() {
        let (gt, pos) = labeled(500, 1);
        assert_eq!(
            corrupt_predictions(&gt, &pos, &NoiseSpec::none(4), &schema()).unwrap(),
            gt
        );
    }

    #[test]
    fn total_dropout_removes_novel_labels() {
        let (gt, pos) = labeled(500, 2);
        let s = schema();
        let noise = NoiseSpec {
            p_miss: 1.0,
            ..NoiseSpec::none(1)
        };
        let out = corrupt_predictions(&gt, &pos, &noise, &s).unwrap();
        assert!(out.iter().all(|&l| !s.is_novel(l)));
        assert!(out
            .iter()
            .zip(&gt)
            .all(|(&o, &g)| if s.is_base(g) { o == g } else { o == -1 }));
    }

    #[test]
    fn flip_rate() {
        let (gt, pos) = labeled(100_000, 3);
        let noise = NoiseSpec {
            flip_prob: 0.1,
            ..NoiseSpec::none(9)
        };
        let out = corrupt_predictions(&gt, &pos, &noise, &schema()).unwrap();
        let flipped = out.iter().zip(&gt).filter(|(a, b)| a != b).count() as f64 / gt.len() as f64;
        assert!((flipped - 0.1).abs() < 0.01, "{flipped}");
    }

    #[test]
    fn erosion_removes_border_points_first() {
        // class 4 on a line x in [0, 1), the rest at x >= 1
        let s = schema();
        let pos: Vec<[f64; 3]> = (0..20).map(|i| [i as f64 * 0.1, 0.0, 0.0]).collect();
        let gt: Vec<i32> = (0..20).map(|i| if i < 10 { 4 } else { 0 }).collect();
        let noise = NoiseSpec {
            erosion_frac: 0.2,
            ..NoiseSpec::none(0)
        };
        let out = corrupt_predictions(&gt, &pos, &noise, &s).unwrap();
        // two class-4 points nearest x = 1.0 and two class-0 points nearest x = 0.9
        assert_eq!(&out[..10], &[4, 4, 4, 4, 4, 4, 4, 4, -1, -1]);
        assert_eq!(&out[10..12], &[-1, -1]);
        assert!(out[12..].iter().all(|&l| l == 0));
    }

    #[test]
    fn support_selection() {
        let s = schema();
        let mk = |labels: Vec<i32>| {
            PointCloudScene::new(vec![[0.0; 3]; labels.len()], None, labels).unwrap()
        };
        let scenes = vec![mk(vec![4, 0]), mk(vec![5, 6, 1]), mk(vec![0, 0])];
        let (set, chosen) = make_support(&scenes, &s, 1, 3).unwrap();
        assert_eq!(chosen[&4], vec![0]);
        assert_eq!(chosen[&5], vec![1]);
        assert_eq!(set.shots(6)[0].scene.labels, vec![-1, 6, -1]);
        let err = make_support(&scenes, &s, 2, 3).unwrap_err();
        assert!(err.to_string().contains("`lamp`"));
        let (again, _) = make_support(&scenes, &s, 1, 3).unwrap();
        assert_eq!(set, again);
    }

    #[test]
    fn corpus_is_reproducible() {
        let cfg = CorpusConfig {
            n_scenes: 2,
            shots: 2,
            ..CorpusConfig::new(5)
        };
        let a = simulate_corpus(&cfg).unwrap();
        let b = simulate_corpus(&cfg).unwrap();
        assert_eq!(a.scenes[1].ground_truth, b.scenes[1].ground_truth);
        assert_eq!(a.scenes[1].features, b.scenes[1].features);
        assert_eq!(a.support, b.support);
        assert_eq!(a.support.k(), 2);
        assert!(a.scenes.iter().all(|s| s.ground_truth.len() <= 5000));
    }
}
