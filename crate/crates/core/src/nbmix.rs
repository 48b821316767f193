//! Novel-base mixing: paste cropped support regions next to a base scene.
//!
//! A support shot is cropped around its novel object (keeping surrounding
//! context), placed so that an XY-extreme point of the crop meets the
//! opposite extreme of the base cloud, and dropped onto the base floor.
//! Several blocks are added one after another, each aligned to the cloud
//! accumulated so far.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::prototype::SupportSet;
use crate::scene::{PointCloudScene, UNLABELED};

pub const DEFAULT_BLOCKS: usize = 3;
pub const DEFAULT_MARGIN: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MixConfig {
    pub n_blocks: usize,
    /// XY margin (meters) added around the object's bounding box.
    pub crop_margin_xy: f64,
    pub seed: u64,
}

impl Default for MixConfig {
    fn default() -> Self {
        MixConfig {
            n_blocks: DEFAULT_BLOCKS,
            crop_margin_xy: DEFAULT_MARGIN,
            seed: 0,
        }
    }
}

impl MixConfig {
    pub fn check(&self) -> Result<()> {
        if self.n_blocks == 0 {
            return Err(Error::Config("n_blocks must be at least 1".into()));
        }
        if !(self.crop_margin_xy >= 0.0 && self.crop_margin_xy.is_finite()) {
            return Err(Error::Config(format!(
                "crop margin must be non-negative, got {}",
                self.crop_margin_xy
            )));
        }
        Ok(())
    }

    pub fn rng(&self) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.seed)
    }
}

/// XY-extreme points of a cloud, with their indices.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CornerSet {
    pub top: [f64; 3],
    pub bottom: [f64; 3],
    pub left: [f64; 3],
    pub right: [f64; 3],
    pub indices: [usize; 4],
}

/// Which side of the base cloud the block is attached to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CornerPairing {
    /// base bottom meets block top
    Bottom,
    /// base top meets block bottom
    Top,
    /// base left meets block right
    Left,
    /// base right meets block left
    Right,
}

impl CornerPairing {
    pub const ALL: [CornerPairing; 4] = [
        CornerPairing::Bottom,
        CornerPairing::Top,
        CornerPairing::Left,
        CornerPairing::Right,
    ];

    /// (base corner, block corner) for this pairing.
    pub fn select(self, base: &CornerSet, block: &CornerSet) -> ([f64; 3], [f64; 3]) {
        match self {
            CornerPairing::Bottom => (base.bottom, block.top),
            CornerPairing::Top => (base.top, block.bottom),
            CornerPairing::Left => (base.left, block.right),
            CornerPairing::Right => (base.right, block.left),
        }
    }
}

/// Uniform draw over the four pairings.
pub fn pick_pair<R: Rng + ?Sized>(rng: &mut R) -> CornerPairing {
    CornerPairing::ALL[rng.random_range(0..4)]
}

/// Top = max Y, bottom = min Y, left = min X, right = max X. Ties keep
/// the smallest point index.
pub fn corners_xy(points: &[[f64; 3]]) -> Result<CornerSet> {
    if points.is_empty() {
        return Err(Error::Contract("corners of an empty cloud".into()));
    }
    let mut idx = [0usize; 4]; // top, bottom, left, right
    for (i, p) in points.iter().enumerate().skip(1) {
        if p[1] > points[idx[0]][1] {
            idx[0] = i;
        }
        if p[1] < points[idx[1]][1] {
            idx[1] = i;
        }
        if p[0] < points[idx[2]][0] {
            idx[2] = i;
        }
        if p[0] > points[idx[3]][0] {
            idx[3] = i;
        }
    }
    Ok(CornerSet {
        top: points[idx[0]],
        bottom: points[idx[1]],
        left: points[idx[2]],
        right: points[idx[3]],
        indices: idx,
    })
}

/// Crops a support scene to the XY box of its masked points grown by
/// `margin` on every side, keeping the full Z range. Masked points are
/// labeled `class`, the surrounding context -1.
pub fn crop_novel(
    support: &PointCloudScene,
    mask: &[bool],
    class: i32,
    margin: f64,
) -> Result<(PointCloudScene, Vec<bool>)> {
    if mask.len() != support.len() {
        return Err(Error::Alignment {
            what: "mask".into(),
            expected: support.len(),
            found: mask.len(),
        });
    }
    let mut lo = [f64::INFINITY; 2];
    let mut hi = [f64::NEG_INFINITY; 2];
    let mut any = false;
    for (p, _) in support.positions.iter().zip(mask).filter(|(_, &m)| m) {
        any = true;
        for a in 0..2 {
            lo[a] = lo[a].min(p[a]);
            hi[a] = hi[a].max(p[a]);
        }
    }
    if !any {
        return Err(Error::EmptyMask("crop mask selects no points".into()));
    }
    let keep: Vec<bool> = support
        .positions
        .iter()
        .map(|p| (0..2).all(|a| p[a] >= lo[a] - margin && p[a] <= hi[a] + margin))
        .collect();
    let mut cropped = support.select(&keep);
    let local_mask: Vec<bool> = mask
        .iter()
        .zip(&keep)
        .filter(|(_, &k)| k)
        .map(|(&m, _)| m)
        .collect();
    for (l, &m) in cropped.labels.iter_mut().zip(&local_mask) {
        *l = if m { class } else { UNLABELED };
    }
    Ok((cropped, local_mask))
}

/// Placement applied to one block.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Placement {
    pub pairing: CornerPairing,
    /// XY translation (z component is always zero).
    pub translation: [f64; 3],
    pub z_adjust: f64,
}

/// Moves `block` so the paired corners meet in XY, then shifts it so its
/// lowest point sits at the base's lowest Z, and appends it to `base`.
pub fn translate_and_align(
    base: &PointCloudScene,
    block: &PointCloudScene,
    pairing: CornerPairing,
) -> Result<(PointCloudScene, Placement)> {
    if base.is_empty() || block.is_empty() {
        return Err(Error::Contract("cannot align an empty cloud".into()));
    }
    let (b, n) = pairing.select(
        &corners_xy(&base.positions)?,
        &corners_xy(&block.positions)?,
    );
    let translation = [b[0] - n[0], b[1] - n[1], 0.0];
    let moved: Vec<[f64; 3]> = block
        .positions
        .iter()
        .map(|p| [p[0] + translation[0], p[1] + translation[1], p[2]])
        .collect();
    let moved_min_z = moved.iter().map(|p| p[2]).fold(f64::INFINITY, f64::min);
    let z_adjust = base.min_z() - moved_min_z;

    let mut out = base.clone();
    out.positions
        .extend(moved.iter().map(|p| [p[0], p[1], p[2] + z_adjust]));
    out.labels.extend_from_slice(&block.labels);
    out.colors = match (&base.colors, &block.colors) {
        (None, None) => None,
        (bc, nc) => {
            let neutral = [0.5f32; 3];
            let mut c = bc.clone().unwrap_or_else(|| vec![neutral; base.len()]);
            match nc {
                Some(nc) => c.extend_from_slice(nc),
                None => c.extend(std::iter::repeat_n(neutral, block.len())),
            }
            Some(c)
        }
    };
    Ok((
        out,
        Placement {
            pairing,
            translation,
            z_adjust,
        },
    ))
}

/// Provenance of one inserted block.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BlockRecord {
    pub class: i32,
    pub shot: usize,
    /// Index range of the block's points in the mixed scene.
    pub start: usize,
    pub len: usize,
    pub placement: Placement,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MixOutcome {
    pub scene: PointCloudScene,
    pub blocks: Vec<BlockRecord>,
}

/// Adds `cfg.n_blocks` support crops to `base`, drawing class, shot and
/// pairing from `rng`.
pub fn mix<R: Rng + ?Sized>(
    base: &PointCloudScene,
    support: &SupportSet,
    cfg: &MixConfig,
    rng: &mut R,
) -> Result<MixOutcome> {
    cfg.check()?;
    let classes: Vec<i32> = support.classes().collect();
    if classes.is_empty() {
        return Err(Error::Contract("support set is empty".into()));
    }
    let mut scene = base.clone();
    let mut blocks = Vec::with_capacity(cfg.n_blocks);
    for _ in 0..cfg.n_blocks {
        let class = classes[rng.random_range(0..classes.len())];
        let shots = support.shots(class);
        let shot_idx = rng.random_range(0..shots.len());
        let shot = &shots[shot_idx];
        let (crop, _) = crop_novel(&shot.scene, &shot.mask, class, cfg.crop_margin_xy)?;
        let pairing = pick_pair(rng);
        let start = scene.len();
        let (next, placement) = translate_and_align(&scene, &crop, pairing)?;
        scene = next;
        blocks.push(BlockRecord {
            class,
            shot: shot_idx,
            start,
            len: crop.len(),
            placement,
        });
    }
    Ok(MixOutcome { scene, blocks })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prototype::SupportShot;
    use crate::scene::ClassSchema;
    use std::collections::BTreeMap;

    fn cloud(pts: &[[f64; 3]]) -> PointCloudScene {
        PointCloudScene::unlabeled(pts.to_vec())
    }

    #[test]
    fn corners_example() {
        let c = corners_xy(&[[0.0, 0.0, 0.0], [2.0, 0.0, 0.0], [1.0, 3.0, 0.0]]).unwrap();
        assert_eq!(c.left, [0.0, 0.0, 0.0]);
        assert_eq!(c.right, [2.0, 0.0, 0.0]);
        assert_eq!(c.top, [1.0, 3.0, 0.0]);
        assert_eq!(c.bottom, [0.0, 0.0, 0.0]);
        assert_eq!(c.indices, [2, 0, 0, 1]);
    }

    #[test]
    fn corners_single_point() {
        let p = [0.3, -1.0, 2.0];
        let c = corners_xy(&[p]).unwrap();
        assert_eq!([c.top, c.bottom, c.left, c.right], [p; 4]);
        assert!(corners_xy(&[]).is_err());
    }

    #[test]
    fn bottom_pairing_translation() {
        // base bottom at (5, 0), block top at (1, 4)
        let base = cloud(&[[5.0, 0.0, 0.0], [5.0, 2.0, 0.0], [6.0, 1.0, 0.0]]);
        let block = cloud(&[[1.0, 4.0, 0.3], [1.0, 3.0, 0.5]]);
        let (out, pl) = translate_and_align(&base, &block, CornerPairing::Bottom).unwrap();
        assert_eq!(pl.translation, [4.0, -4.0, 0.0]);
        assert!((pl.z_adjust + 0.3).abs() < 1e-15);
        assert_eq!(out.len(), 5);
        assert_eq!(out.positions[3], [5.0, 0.0, 0.0]);
        assert!((out.positions[4][2] - 0.2).abs() < 1e-12);
    }

    #[test]
    fn left_pairing_uses_block_right() {
        let base = cloud(&[[0.0, 0.0, 0.0], [3.0, 1.0, 0.0]]);
        let block = cloud(&[[10.0, 5.0, 1.0], [12.0, 6.0, 1.0]]);
        let (out, _) = translate_and_align(&base, &block, CornerPairing::Left).unwrap();
        assert_eq!(out.len(), 4);
        // block's rightmost point lands on base's leftmost point
        assert_eq!(out.positions[3], [0.0, 0.0, 0.0]);
        assert_eq!(out.positions[2], [-2.0, -1.0, 0.0]);
    }

    #[test]
    fn crop_margin_zero_keeps_masked_points() {
        let scene = PointCloudScene::new(
            vec![
                [0.0, 0.0, 0.0],
                [1.0, 1.0, 5.0],
                [0.5, 0.5, -3.0],
                [2.0, 0.5, 0.0],
            ],
            None,
            vec![7, 7, 0, 1],
        )
        .unwrap();
        let mask = vec![true, true, false, false];
        let (crop, local) = crop_novel(&scene, &mask, 7, 0.0).unwrap();
        assert_eq!(crop.len(), 3);
        assert_eq!(local, vec![true, true, false]);
        assert_eq!(crop.labels, vec![7, 7, -1]);
        let (all, _) = crop_novel(&scene, &mask, 7, 100.0).unwrap();
        assert_eq!(all.positions, scene.positions);
        assert!(crop_novel(&scene, &[false; 4], 7, 1.0).is_err());
    }

    #[test]
    fn mix_conserves_counts_and_base() {
        let schema = ClassSchema::new(["floor"], ["lamp"]).unwrap();
        let shot_scene = PointCloudScene::new(
            vec![[0.0, 0.0, 1.0], [0.2, 0.1, 1.5], [3.0, 3.0, 1.0]],
            None,
            vec![1, 1, -1],
        )
        .unwrap();
        let support = SupportSet::new(
            BTreeMap::from([(1, vec![SupportShot::from_labels(shot_scene, 1)])]),
            &schema,
        )
        .unwrap();
        let base =
            PointCloudScene::new(vec![[0.0, 0.0, 0.0], [4.0, 4.0, 0.0]], None, vec![0, 0]).unwrap();
        let cfg = MixConfig {
            n_blocks: 3,
            crop_margin_xy: 0.5,
            seed: 7,
        };
        let out = mix(&base, &support, &cfg, &mut cfg.rng()).unwrap();
        let crops: usize = out.blocks.iter().map(|b| b.len).sum();
        assert_eq!(out.scene.len(), base.len() + crops);
        assert_eq!(&out.scene.positions[..2], &base.positions[..]);
        assert_eq!(&out.scene.labels[..2], &base.labels[..]);
        let again = mix(&base, &support, &cfg, &mut cfg.rng()).unwrap();
        assert_eq!(out, again);
        assert!(MixConfig { n_blocks: 0, ..cfg }.check().is_err());
    }
}
