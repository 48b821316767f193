//! Masked average pooling, support prototypes and cosine similarity.

use std::collections::BTreeMap;
use std::fs;
use std::ops::Range;
use std::path::Path;

use crate::embed::EmbeddingMatrix;
use crate::error::{Error, Result};
use crate::scene::{ClassSchema, PointCloudScene};

/// Norms below this are treated as zero by [`cosine`].
pub const MIN_NORM: f64 = 1e-12;

/// Dot product with a fixed accumulation order (four interleaved lanes,
/// then the tail), so every caller gets bitwise-identical results.
#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [0.0f64; 4];
    let ca = a.chunks_exact(4);
    let cb = b.chunks_exact(4);
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        acc[0] += x[0] * y[0];
        acc[1] += x[1] * y[1];
        acc[2] += x[2] * y[2];
        acc[3] += x[3] * y[3];
    }
    let mut tail = 0.0;
    for (x, y) in ra.iter().zip(rb) {
        tail += x * y;
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// Cosine similarity in `[-1, 1]`. Returns -1 when either vector has a norm
/// below [`MIN_NORM`].
pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    cosine_with_sq_norms(dot(a, b), dot(a, a), dot(b, b))
}

/// [`cosine`] from a precomputed dot product and squared norms. Given the
/// same inputs it returns exactly what [`cosine`] returns.
#[inline]
pub fn cosine_with_sq_norms(ab: f64, aa: f64, bb: f64) -> f64 {
    if aa < MIN_NORM * MIN_NORM || bb < MIN_NORM * MIN_NORM {
        return -1.0;
    }
    (ab / (aa * bb).sqrt()).clamp(-1.0, 1.0)
}

/// Class id to feature-space vector, all of one dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct PrototypeSet {
    dim: usize,
    vectors: BTreeMap<i32, Vec<f64>>,
}

impl PrototypeSet {
    pub fn new(dim: usize) -> Self {
        PrototypeSet {
            dim,
            vectors: BTreeMap::new(),
        }
    }

    pub fn insert(&mut self, class: i32, vector: Vec<f64>) -> Result<()> {
        if vector.len() != self.dim {
            return Err(Error::Alignment {
                what: format!("prototype for class {class}"),
                expected: self.dim,
                found: vector.len(),
            });
        }
        if !vector.iter().all(|v| v.is_finite()) {
            return Err(Error::Contract(format!(
                "prototype for class {class} has non-finite entries"
            )));
        }
        self.vectors.insert(class, vector);
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn get(&self, class: i32) -> Option<&[f64]> {
        self.vectors.get(&class).map(Vec::as_slice)
    }

    pub fn contains(&self, class: i32) -> bool {
        self.vectors.contains_key(&class)
    }

    /// Entries in ascending class order.
    pub fn iter(&self) -> impl Iterator<Item = (i32, &[f64])> {
        self.vectors.iter().map(|(&c, v)| (c, v.as_slice()))
    }

    pub fn classes(&self) -> impl Iterator<Item = i32> + '_ {
        self.vectors.keys().copied()
    }
}

/// Mean of the rows selected by `mask`, summed in ascending row order.
pub fn masked_pool(features: &EmbeddingMatrix, mask: &[bool]) -> Result<Vec<f64>> {
    if mask.len() != features.rows() {
        return Err(Error::Alignment {
            what: "mask".into(),
            expected: features.rows(),
            found: mask.len(),
        });
    }
    let mut sum = vec![0.0f64; features.dim()];
    let mut count = 0usize;
    for (i, _) in mask.iter().enumerate().filter(|(_, &m)| m) {
        for (s, &v) in sum.iter_mut().zip(features.row(i)) {
            *s += v as f64;
        }
        count += 1;
    }
    if count == 0 {
        return Err(Error::EmptyMask("mask selects no points".into()));
    }
    let n = count as f64;
    sum.iter_mut().for_each(|s| *s /= n);
    Ok(sum)
}

/// Pools one prototype per class of `classes` present in `labels`.
///
/// Each class is accumulated in ascending row order, so the result equals
/// [`masked_pool`] over the class mask bit for bit.
pub fn class_prototypes(
    features: &EmbeddingMatrix,
    labels: &[i32],
    classes: Range<i32>,
) -> Result<PrototypeSet> {
    if labels.len() != features.rows() {
        return Err(Error::Alignment {
            what: "labels".into(),
            expected: features.rows(),
            found: labels.len(),
        });
    }
    let dim = features.dim();
    let n_cls = classes.len();
    let mut sums = vec![0.0f64; n_cls * dim];
    let mut counts = vec![0usize; n_cls];
    for (i, &l) in labels.iter().enumerate() {
        if !classes.contains(&l) {
            continue;
        }
        let k = (l - classes.start) as usize;
        counts[k] += 1;
        for (s, &v) in sums[k * dim..(k + 1) * dim].iter_mut().zip(features.row(i)) {
            *s += v as f64;
        }
    }
    let mut set = PrototypeSet::new(dim);
    for (k, &count) in counts.iter().enumerate() {
        if count == 0 {
            continue;
        }
        let n = count as f64;
        let v = sums[k * dim..(k + 1) * dim].iter().map(|s| s / n).collect();
        set.insert(classes.start + k as i32, v)?;
    }
    Ok(set)
}

/// One labeled support sample: a scene plus the mask of its class.
#[derive(Debug, Clone, PartialEq)]
pub struct SupportShot {
    pub scene: PointCloudScene,
    pub mask: Vec<bool>,
}

impl SupportShot {
    /// Builds the shot from a scene whose labels mark `class` points; all
    /// other labels are cleared so the annotation is exclusive.
    pub fn from_labels(mut scene: PointCloudScene, class: i32) -> Self {
        let mask: Vec<bool> = scene.labels.iter().map(|&l| l == class).collect();
        for (l, &m) in scene.labels.iter_mut().zip(&mask) {
            *l = if m { class } else { crate::scene::UNLABELED };
        }
        SupportShot { scene, mask }
    }
}

/// K labeled shots for every novel class.
#[derive(Debug, Clone, PartialEq)]
pub struct SupportSet {
    shots: BTreeMap<i32, Vec<SupportShot>>,
    k: usize,
}

impl SupportSet {
    pub fn new(shots: BTreeMap<i32, Vec<SupportShot>>, schema: &ClassSchema) -> Result<Self> {
        let k = shots.values().next().map(Vec::len).unwrap_or(0);
        if k == 0 {
            return Err(Error::Contract("support set has no shots".into()));
        }
        for class in schema.novel_range() {
            match shots.get(&class) {
                None => {
                    return Err(Error::MissingPrototype {
                        class,
                        set: "support",
                    })
                }
                Some(v) if v.len() != k => {
                    return Err(Error::Contract(format!(
                        "class {class} has {} shots, expected {k}",
                        v.len()
                    )))
                }
                Some(_) => {}
            }
        }
        for (&class, list) in &shots {
            if !schema.is_novel(class) {
                return Err(Error::Contract(format!(
                    "support class {class} is not a novel class"
                )));
            }
            for (s, shot) in list.iter().enumerate() {
                if shot.mask.len() != shot.scene.len() {
                    return Err(Error::Alignment {
                        what: format!("mask of class {class} shot {s}"),
                        expected: shot.scene.len(),
                        found: shot.mask.len(),
                    });
                }
                if !shot.mask.iter().any(|&m| m) {
                    return Err(Error::EmptyMask(format!("class {class} shot {s}")));
                }
            }
        }
        Ok(SupportSet { shots, k })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn classes(&self) -> impl Iterator<Item = i32> + '_ {
        self.shots.keys().copied()
    }

    pub fn shots(&self, class: i32) -> &[SupportShot] {
        self.shots.get(&class).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn iter(&self) -> impl Iterator<Item = (i32, &[SupportShot])> {
        self.shots.iter().map(|(&c, v)| (c, v.as_slice()))
    }
}

/// Support prototype of every class: each shot is pooled under its mask,
/// then the K shot prototypes are averaged with equal weight.
///
/// `features_for(class, shot_index, shot)` supplies the shot's features.
pub fn support_prototypes_with<F>(support: &SupportSet, mut features_for: F) -> Result<PrototypeSet>
where
    F: FnMut(i32, usize, &SupportShot) -> Result<EmbeddingMatrix>,
{
    let mut set: Option<PrototypeSet> = None;
    for (class, shots) in support.iter() {
        let mut mean: Vec<f64> = Vec::new();
        for (s, shot) in shots.iter().enumerate() {
            let features = features_for(class, s, shot)?;
            if features.rows() != shot.scene.len() {
                return Err(Error::Alignment {
                    what: format!("features of class {class} shot {s}"),
                    expected: shot.scene.len(),
                    found: features.rows(),
                });
            }
            let p = masked_pool(&features, &shot.mask).map_err(|e| match e {
                Error::EmptyMask(_) => Error::EmptyMask(format!("class {class} shot {s}")),
                e => e,
            })?;
            if s == 0 {
                mean = p;
            } else {
                // running mean: K identical shots give back the single-shot vector
                let k = (s + 1) as f64;
                for (m, v) in mean.iter_mut().zip(&p) {
                    *m += (v - *m) / k;
                }
            }
        }
        let set = set.get_or_insert_with(|| PrototypeSet::new(mean.len()));
        set.insert(class, mean)?;
    }
    set.ok_or_else(|| Error::Contract("support set has no classes".into()))
}

/// [`support_prototypes_with`] using a feature provider for every shot.
pub fn support_prototypes<P>(support: &SupportSet, provider: &P) -> Result<PrototypeSet>
where
    P: crate::embed::FeatureProvider + ?Sized,
{
    support_prototypes_with(support, |_, _, shot| provider.embed_scene(&shot.scene))
}

const PROTO_MAGIC: &[u8; 4] = b"GFVP";
const PROTO_VERSION: u32 = 1;

/// Serializes prototypes: magic `GFVP`, u32 version, u64 count, u32 dim,
/// `count` index entries of (i32 class id, u32 row), then the rows as
/// little-endian f32.
pub fn encode_prototypes(set: &PrototypeSet) -> Vec<u8> {
    let mut out = Vec::with_capacity(20 + set.len() * (8 + 4 * set.dim()));
    out.extend_from_slice(PROTO_MAGIC);
    out.extend_from_slice(&PROTO_VERSION.to_le_bytes());
    out.extend_from_slice(&(set.len() as u64).to_le_bytes());
    out.extend_from_slice(&(set.dim() as u32).to_le_bytes());
    for (row, class) in set.classes().enumerate() {
        out.extend_from_slice(&class.to_le_bytes());
        out.extend_from_slice(&(row as u32).to_le_bytes());
    }
    for (_, v) in set.iter() {
        for &x in v {
            out.extend_from_slice(&(x as f32).to_le_bytes());
        }
    }
    out
}

pub fn decode_prototypes(path: &Path, bytes: &[u8]) -> Result<PrototypeSet> {
    let fmt = |message: String| Error::Format {
        path: path.to_path_buf(),
        message,
    };
    if bytes.len() < 20 {
        return Err(fmt("file shorter than the prototype header".into()));
    }
    if &bytes[..4] != PROTO_MAGIC {
        return Err(fmt("bad magic, expected GFVP".into()));
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
    if version != PROTO_VERSION {
        return Err(fmt(format!("unsupported version {version}")));
    }
    let count = u64::from_le_bytes(bytes[8..16].try_into().unwrap()) as usize;
    let dim = u32::from_le_bytes(bytes[16..20].try_into().unwrap()) as usize;
    let expected = count
        .checked_mul(8 + 4 * dim)
        .and_then(|n| n.checked_add(20))
        .ok_or_else(|| fmt("header sizes overflow".into()))?;
    if bytes.len() != expected {
        return Err(fmt(format!(
            "size mismatch: header implies {expected} bytes, file has {}",
            bytes.len()
        )));
    }
    let index = &bytes[20..20 + 8 * count];
    let data = &bytes[20 + 8 * count..];
    let mut set = PrototypeSet::new(dim);
    for entry in index.chunks_exact(8) {
        let class = i32::from_le_bytes(entry[..4].try_into().unwrap());
        let row = u32::from_le_bytes(entry[4..].try_into().unwrap()) as usize;
        if row >= count {
            return Err(fmt(format!("index row {row} out of range")));
        }
        let v = data[row * dim * 4..(row + 1) * dim * 4]
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes(b.try_into().unwrap()) as f64)
            .collect();
        set.insert(class, v)?;
    }
    Ok(set)
}

pub fn save_prototypes(set: &PrototypeSet, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode_prototypes(set)).map_err(|e| Error::io(path, e))
}

pub fn load_prototypes(path: impl AsRef<Path>) -> Result<PrototypeSet> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_prototypes(path, &bytes)
}
