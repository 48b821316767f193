//! Point cloud data model, label-space semantics and voxel downsampling.
//!
//! Labels are plain `i32`s: `-1` marks unlabeled / background points, base
//! classes occupy `[0, n_base)` and novel classes `[n_base, n_classes)`.

use std::collections::HashSet;
use std::ops::Range;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Label value for unlabeled (background) points.
pub const UNLABELED: i32 = -1;

/// Default voxel edge length in meters.
pub const DEFAULT_GRID_SIZE: f64 = 0.02;

/// Base and novel class names defining the label index space.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassSchema {
    base_names: Vec<String>,
    novel_names: Vec<String>,
}

impl ClassSchema {
    pub fn new<S: Into<String>>(
        base_names: impl IntoIterator<Item = S>,
        novel_names: impl IntoIterator<Item = S>,
    ) -> Result<Self> {
        let schema = ClassSchema {
            base_names: base_names.into_iter().map(Into::into).collect(),
            novel_names: novel_names.into_iter().map(Into::into).collect(),
        };
        schema.check()?;
        Ok(schema)
    }

    /// Re-checks invariants, for schemas obtained through deserialization.
    pub fn check(&self) -> Result<()> {
        let mut seen = HashSet::new();
        for name in self.base_names.iter().chain(&self.novel_names) {
            if !seen.insert(name.as_str()) {
                return Err(Error::Config(format!(
                    "class name `{name}` appears more than once in the schema"
                )));
            }
        }
        Ok(())
    }

    pub fn base_names(&self) -> &[String] {
        &self.base_names
    }

    pub fn novel_names(&self) -> &[String] {
        &self.novel_names
    }

    pub fn n_base(&self) -> usize {
        self.base_names.len()
    }

    pub fn n_novel(&self) -> usize {
        self.novel_names.len()
    }

    pub fn n_classes(&self) -> usize {
        self.base_names.len() + self.novel_names.len()
    }

    pub fn is_base(&self, label: i32) -> bool {
        label >= 0 && (label as usize) < self.n_base()
    }

    pub fn is_novel(&self, label: i32) -> bool {
        label >= 0 && (label as usize) >= self.n_base() && (label as usize) < self.n_classes()
    }

    pub fn is_valid_label(&self, label: i32) -> bool {
        label == UNLABELED || (label >= 0 && (label as usize) < self.n_classes())
    }

    pub fn novel_range(&self) -> Range<i32> {
        self.n_base() as i32..self.n_classes() as i32
    }

    pub fn base_range(&self) -> Range<i32> {
        0..self.n_base() as i32
    }

    pub fn name(&self, label: i32) -> Option<&str> {
        if label < 0 {
            return None;
        }
        let idx = label as usize;
        if idx < self.n_base() {
            Some(&self.base_names[idx])
        } else {
            self.novel_names
                .get(idx - self.n_base())
                .map(String::as_str)
        }
    }

    pub fn index_of(&self, name: &str) -> Option<i32> {
        self.base_names
            .iter()
            .chain(&self.novel_names)
            .position(|n| n == name)
            .map(|i| i as i32)
    }

    /// All class names in index order.
    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.base_names
            .iter()
            .chain(&self.novel_names)
            .map(String::as_str)
    }

    /// Checks every label against the schema.
    pub fn check_labels(&self, labels: &[i32]) -> Result<()> {
        match labels.iter().position(|&l| !self.is_valid_label(l)) {
            Some(index) => Err(Error::LabelOutOfRange {
                index,
                value: labels[index],
                n_classes: self.n_classes(),
            }),
            None => Ok(()),
        }
    }

    /// Keeps base labels and clears everything else to [`UNLABELED`].
    pub fn base_only(&self, labels: &[i32]) -> Vec<i32> {
        labels
            .iter()
            .map(|&l| if self.is_base(l) { l } else { UNLABELED })
            .collect()
    }
}

/// A labeled point cloud. Positions are meters, colors are in `[0, 1]`.
///
/// Fields are public so that malformed scenes can be represented and
/// diagnosed with [`validate_scene`]; [`PointCloudScene::new`] enforces the
/// length and finiteness invariants.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloudScene {
    pub positions: Vec<[f64; 3]>,
    pub colors: Option<Vec<[f32; 3]>>,
    pub labels: Vec<i32>,
}

impl PointCloudScene {
    pub fn new(
        positions: Vec<[f64; 3]>,
        colors: Option<Vec<[f32; 3]>>,
        labels: Vec<i32>,
    ) -> Result<Self> {
        if labels.len() != positions.len() {
            return Err(Error::Alignment {
                what: "labels".into(),
                expected: positions.len(),
                found: labels.len(),
            });
        }
        if let Some(c) = &colors {
            if c.len() != positions.len() {
                return Err(Error::Alignment {
                    what: "colors".into(),
                    expected: positions.len(),
                    found: c.len(),
                });
            }
        }
        if let Some(i) = positions
            .iter()
            .position(|p| !p.iter().all(|v| v.is_finite()))
        {
            return Err(Error::Contract(format!(
                "non-finite coordinate at point {i}"
            )));
        }
        Ok(PointCloudScene {
            positions,
            colors,
            labels,
        })
    }

    /// Scene with every point unlabeled.
    pub fn unlabeled(positions: Vec<[f64; 3]>) -> Self {
        let labels = vec![UNLABELED; positions.len()];
        PointCloudScene {
            positions,
            colors: None,
            labels,
        }
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn min_z(&self) -> f64 {
        self.positions
            .iter()
            .map(|p| p[2])
            .fold(f64::INFINITY, f64::min)
    }

    /// Copy of the points selected by `keep`, in original order.
    pub fn select(&self, keep: &[bool]) -> PointCloudScene {
        let pick = |i: usize| keep[i];
        let positions = (0..self.len())
            .filter(|&i| pick(i))
            .map(|i| self.positions[i])
            .collect();
        let colors = self
            .colors
            .as_ref()
            .map(|c| (0..self.len()).filter(|&i| pick(i)).map(|i| c[i]).collect());
        let labels = (0..self.len())
            .filter(|&i| pick(i))
            .map(|i| self.labels[i])
            .collect();
        PointCloudScene {
            positions,
            colors,
            labels,
        }
    }
}

/// One class of invariant violation, with the first offending index.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Violation {
    Empty,
    LengthMismatch {
        positions: usize,
        labels: usize,
        colors: Option<usize>,
    },
    LabelOutOfRange {
        index: usize,
        value: i32,
    },
    NonFiniteCoordinate {
        index: usize,
    },
    ColorOutOfRange {
        index: usize,
    },
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Violation::Empty => write!(f, "scene has no points"),
            Violation::LengthMismatch {
                positions,
                labels,
                colors,
            } => {
                write!(f, "length mismatch: {positions} positions, {labels} labels")?;
                if let Some(c) = colors {
                    write!(f, ", {c} colors")?;
                }
                Ok(())
            }
            Violation::LabelOutOfRange { index, value } => {
                write!(f, "label out of range: {value} at index {index}")
            }
            Violation::NonFiniteCoordinate { index } => {
                write!(f, "non-finite coordinate at index {index}")
            }
            Violation::ColorOutOfRange { index } => {
                write!(f, "color outside [0, 1] at index {index}")
            }
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Diagnoses a scene against a schema. Never fails; every violation class
/// is reported once with its first offending index.
pub fn validate_scene(scene: &PointCloudScene, schema: &ClassSchema) -> ValidationReport {
    let mut violations = Vec::new();
    let n = scene.positions.len();
    if n == 0 {
        violations.push(Violation::Empty);
    }
    let n_colors = scene.colors.as_ref().map(Vec::len);
    if scene.labels.len() != n || n_colors.is_some_and(|c| c != n) {
        violations.push(Violation::LengthMismatch {
            positions: n,
            labels: scene.labels.len(),
            colors: n_colors,
        });
    }
    if let Some(index) = scene.labels.iter().position(|&l| !schema.is_valid_label(l)) {
        violations.push(Violation::LabelOutOfRange {
            index,
            value: scene.labels[index],
        });
    }
    if let Some(index) = scene
        .positions
        .iter()
        .position(|p| !p.iter().all(|v| v.is_finite()))
    {
        violations.push(Violation::NonFiniteCoordinate { index });
    }
    if let Some(colors) = &scene.colors {
        if let Some(index) = colors
            .iter()
            .position(|c| !c.iter().all(|v| (0.0..=1.0).contains(v)))
        {
            violations.push(Violation::ColorOutOfRange { index });
        }
    }
    ValidationReport { violations }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VoxelConfig {
    pub grid_size: f64,
}

impl Default for VoxelConfig {
    fn default() -> Self {
        VoxelConfig {
            grid_size: DEFAULT_GRID_SIZE,
        }
    }
}

impl VoxelConfig {
    pub fn new(grid_size: f64) -> Result<Self> {
        let cfg = VoxelConfig { grid_size };
        cfg.check()?;
        Ok(cfg)
    }

    pub fn check(&self) -> Result<()> {
        if !(self.grid_size.is_finite() && self.grid_size > 0.0) {
            return Err(Error::Config(format!(
                "grid size must be positive, got {}",
                self.grid_size
            )));
        }
        Ok(())
    }

    pub fn cell_of(&self, p: &[f64; 3]) -> [i64; 3] {
        p.map(|v| (v / self.grid_size).floor() as i64)
    }
}

/// Grid downsampling: one output point per occupied cell.
///
/// The output point is the mean of the cell members (clamped to the
/// members' bounding box so it stays inside the cell), the color is the
/// mean color, and the label is the cell majority with ties going to the
/// smallest label. Output is ordered by lexicographic cell index.
pub fn voxelize(scene: &PointCloudScene, cfg: &VoxelConfig) -> Result<PointCloudScene> {
    cfg.check()?;
    if scene.labels.len() != scene.len() {
        return Err(Error::Alignment {
            what: "labels".into(),
            expected: scene.len(),
            found: scene.labels.len(),
        });
    }
    let mut keyed: Vec<([i64; 3], u32)> = scene
        .positions
        .par_iter()
        .enumerate()
        .map(|(i, p)| (cfg.cell_of(p), i as u32))
        .collect();
    // (cell, index) pairs are unique, so the unstable sort is deterministic.
    keyed.par_sort_unstable();

    let mut runs = Vec::new();
    let mut start = 0;
    for i in 1..=keyed.len() {
        if i == keyed.len() || keyed[i].0 != keyed[start].0 {
            runs.push(start..i);
            start = i;
        }
    }

    let cells: Vec<([f64; 3], Option<[f32; 3]>, i32)> = runs
        .par_iter()
        .map(|run| {
            let members = &keyed[run.clone()];
            let mut sum = [0.0f64; 3];
            let mut lo = [f64::INFINITY; 3];
            let mut hi = [f64::NEG_INFINITY; 3];
            for &(_, i) in members {
                let p = scene.positions[i as usize];
                for a in 0..3 {
                    sum[a] += p[a];
                    lo[a] = lo[a].min(p[a]);
                    hi[a] = hi[a].max(p[a]);
                }
            }
            let n = members.len() as f64;
            let pos = [0, 1, 2].map(|a| (sum[a] / n).clamp(lo[a], hi[a]));

            let color = scene.colors.as_ref().map(|colors| {
                let mut c = [0.0f64; 3];
                for &(_, i) in members {
                    for a in 0..3 {
                        c[a] += colors[i as usize][a] as f64;
                    }
                }
                c.map(|v| (v / n) as f32)
            });

            let mut labels: Vec<i32> = members
                .iter()
                .map(|&(_, i)| scene.labels[i as usize])
                .collect();
            labels.sort_unstable();
            (pos, color, majority_sorted(&labels))
        })
        .collect();

    let mut positions = Vec::with_capacity(cells.len());
    let mut colors = scene
        .colors
        .as_ref()
        .map(|_| Vec::with_capacity(cells.len()));
    let mut labels = Vec::with_capacity(cells.len());
    for (p, c, l) in cells {
        positions.push(p);
        if let (Some(cs), Some(c)) = (colors.as_mut(), c) {
            cs.push(c);
        }
        labels.push(l);
    }
    Ok(PointCloudScene {
        positions,
        colors,
        labels,
    })
}

/// Most frequent value of a sorted slice; ties go to the smallest value.
fn majority_sorted(sorted: &[i32]) -> i32 {
    let mut best = sorted[0];
    let mut best_count = 0;
    let mut i = 0;
    while i < sorted.len() {
        let mut j = i;
        while j < sorted.len() && sorted[j] == sorted[i] {
            j += 1;
        }
        if j - i > best_count {
            best_count = j - i;
            best = sorted[i];
        }
        i = j;
    }
    best
}
