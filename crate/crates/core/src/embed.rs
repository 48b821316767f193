//! Per-point feature providers.
//!
//! Real deployments export vision-language features into `.gfve` files and
//! use [`FileProvider`]. [`SyntheticProvider`] builds features from seeded
//! class anchors so the refinement pipeline can be exercised without any
//! network.

use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::prototype::PrototypeSet;
use crate::scene::{ClassSchema, PointCloudScene, UNLABELED};

/// Text prompt used when class-name embeddings are produced upstream.
/// Kept as provenance metadata only.
pub const DEFAULT_PROMPT_TEMPLATE: &str = "a CLASS_NAME in a scene";

/// Row-major `rows x dim` matrix of 32-bit features.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMatrix {
    rows: usize,
    dim: usize,
    data: Vec<f32>,
}

impl EmbeddingMatrix {
    pub fn new(rows: usize, dim: usize, data: Vec<f32>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Config("feature dimension must be positive".into()));
        }
        if data.len() != rows * dim {
            return Err(Error::Alignment {
                what: "feature payload".into(),
                expected: rows * dim,
                found: data.len(),
            });
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::Contract(format!(
                "non-finite feature at row {} column {}",
                i / dim,
                i % dim
            )));
        }
        Ok(EmbeddingMatrix { rows, dim, data })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn as_slice(&self) -> &[f32] {
        &self.data
    }

    /// Row `i` widened to f64, written into `out`.
    pub fn row_f64_into(&self, i: usize, out: &mut Vec<f64>) {
        out.clear();
        out.extend(self.row(i).iter().map(|&v| v as f64));
    }
}

/// Anything that turns a scene into one feature vector per point.
pub trait FeatureProvider {
    fn dim(&self) -> usize;

    fn embed_scene(&self, scene: &PointCloudScene) -> Result<EmbeddingMatrix>;

    fn prompt_template(&self) -> &str {
        DEFAULT_PROMPT_TEMPLATE
    }
}

/// Serves a precomputed matrix, checking it against the scene size.
#[derive(Debug, Clone)]
pub struct FileProvider {
    matrix: EmbeddingMatrix,
}

impl FileProvider {
    pub fn new(matrix: EmbeddingMatrix) -> Self {
        FileProvider { matrix }
    }

    pub fn open(path: impl AsRef<Path>) -> Result<Self> {
        Ok(FileProvider::new(load_embeddings(path)?))
    }
}

impl FeatureProvider for FileProvider {
    fn dim(&self) -> usize {
        self.matrix.dim()
    }

    fn embed_scene(&self, scene: &PointCloudScene) -> Result<EmbeddingMatrix> {
        if self.matrix.rows() != scene.len() {
            return Err(Error::Alignment {
                what: "embedding file".into(),
                expected: scene.len(),
                found: self.matrix.rows(),
            });
        }
        Ok(self.matrix.clone())
    }
}

/// `count` seeded unit directions; the first `min(count, dim)` are
/// orthonormalized (modified Gram-Schmidt). Values are rounded to f32 so
/// they survive a trip through a feature file unchanged.
pub fn anchor_directions(count: usize, dim: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
    if dim == 0 {
        return Err(Error::Config("feature dimension must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out: Vec<Vec<f64>> = Vec::with_capacity(count);
    for k in 0..count {
        loop {
            let mut v: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
            if k < dim {
                for prev in &out {
                    let proj = crate::prototype::dot(&v, prev);
                    v.iter_mut().zip(prev).for_each(|(x, p)| *x -= proj * p);
                }
            }
            let norm = crate::prototype::dot(&v, &v).sqrt();
            if norm > 1e-6 {
                out.push(v.iter().map(|x| x / norm).collect());
                break;
            }
        }
    }
    Ok(out
        .into_iter()
        .map(|v| v.into_iter().map(|x| x as f32 as f64).collect())
        .collect())
}

/// One unit anchor per class of the schema, keyed by class index.
pub fn class_anchors(schema: &ClassSchema, dim: usize, anchor_seed: u64) -> Result<PrototypeSet> {
    let dirs = anchor_directions(schema.n_classes(), dim, anchor_seed)?;
    let mut set = PrototypeSet::new(dim);
    for (c, v) in dirs.into_iter().enumerate() {
        set.insert(c as i32, v)?;
    }
    Ok(set)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SyntheticProviderConfig {
    pub dim: usize,
    pub anchor_seed: u64,
    /// Seed of the per-point noise and confusion streams.
    pub noise_seed: u64,
    pub noise_sigma: f64,
    pub confusion_prob: f64,
}

impl SyntheticProviderConfig {
    pub fn check(&self) -> Result<()> {
        if self.dim == 0 {
            return Err(Error::Config("feature dimension must be positive".into()));
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return Err(Error::Config(format!(
                "noise_sigma must be non-negative, got {}",
                self.noise_sigma
            )));
        }
        if !(0.0..=1.0).contains(&self.confusion_prob) {
            return Err(Error::Config(format!(
                "confusion_prob must be in [0, 1], got {}",
                self.confusion_prob
            )));
        }
        Ok(())
    }
}

/// Features drawn around class anchors: `normalize(anchor + sigma * g)`.
///
/// With probability `confusion_prob` a labeled point uses another class's
/// anchor instead. Unlabeled points use a dedicated background anchor.
/// Labels are read from the scene, so embed ground-truth scenes.
#[derive(Debug, Clone)]
pub struct SyntheticProvider {
    cfg: SyntheticProviderConfig,
    anchors: Vec<Vec<f64>>,
    background: Vec<f64>,
}

impl SyntheticProvider {
    pub fn new(schema: &ClassSchema, cfg: SyntheticProviderConfig) -> Result<Self> {
        cfg.check()?;
        let mut dirs = anchor_directions(schema.n_classes() + 1, cfg.dim, cfg.anchor_seed)?;
        let background = dirs.pop().expect("count >= 1");
        Ok(SyntheticProvider {
            cfg,
            anchors: dirs,
            background,
        })
    }

    pub fn config(&self) -> &SyntheticProviderConfig {
        &self.cfg
    }

    /// Same anchors, different per-point noise stream.
    pub fn with_noise_seed(&self, noise_seed: u64) -> Self {
        let mut out = self.clone();
        out.cfg.noise_seed = noise_seed;
        out
    }

    pub fn anchor(&self, class: i32) -> Option<&[f64]> {
        usize::try_from(class)
            .ok()
            .and_then(|c| self.anchors.get(c))
            .map(Vec::as_slice)
    }

    pub fn background_anchor(&self) -> &[f64] {
        &self.background
    }

    pub fn embed_labels(&self, labels: &[i32]) -> Result<EmbeddingMatrix> {
        self.embed_labels_traced(labels).map(|(m, _)| m)
    }

    /// Like [`embed_labels`](Self::embed_labels), also returning the
    /// anchor class each point was drawn from (-1 for background).
    pub fn embed_labels_traced(&self, labels: &[i32]) -> Result<(EmbeddingMatrix, Vec<i32>)> {
        let n_classes = self.anchors.len() as i32;
        if let Some(i) = labels
            .iter()
            .position(|&l| l != UNLABELED && !(0..n_classes).contains(&l))
        {
            return Err(Error::LabelOutOfRange {
                index: i,
                value: labels[i],
                n_classes: n_classes as usize,
            });
        }
        let dim = self.cfg.dim;
        let rows: Vec<(Vec<f32>, i32)> = labels
            .par_iter()
            .enumerate()
            .map(|(i, &label)| {
                let mut rng = ChaCha8Rng::seed_from_u64(self.cfg.noise_seed);
                rng.set_stream(i as u64);
                let source = if label == UNLABELED {
                    UNLABELED
                } else if self.cfg.confusion_prob > 0.0
                    && n_classes > 1
                    && rng.random_bool(self.cfg.confusion_prob)
                {
                    let other = rng.random_range(0..n_classes - 1);
                    if other >= label {
                        other + 1
                    } else {
                        other
                    }
                } else {
                    label
                };
                let anchor = if source == UNLABELED {
                    &self.background
                } else {
                    &self.anchors[source as usize]
                };
                let row = if self.cfg.noise_sigma == 0.0 {
                    anchor.iter().map(|&v| v as f32).collect()
                } else {
                    let v: Vec<f64> = anchor
                        .iter()
                        .map(|&a| a + self.cfg.noise_sigma * rng.sample::<f64, _>(StandardNormal))
                        .collect();
                    let norm = crate::prototype::dot(&v, &v).sqrt().max(1e-12);
                    v.iter().map(|x| (x / norm) as f32).collect()
                };
                (row, source)
            })
            .collect();
        let mut data = Vec::with_capacity(labels.len() * dim);
        let mut sources = Vec::with_capacity(labels.len());
        for (row, s) in rows {
            data.extend_from_slice(&row);
            sources.push(s);
        }
        Ok((EmbeddingMatrix::new(labels.len(), dim, data)?, sources))
    }
}

impl FeatureProvider for SyntheticProvider {
    fn dim(&self) -> usize {
        self.cfg.dim
    }

    fn embed_scene(&self, scene: &PointCloudScene) -> Result<EmbeddingMatrix> {
        self.embed_labels(&scene.labels)
    }
}

const MAGIC: &[u8; 4] = b"GFVE";
const VERSION: u32 = 1;
const HEADER_LEN: usize = 20;

/// `GFVE` magic, u32 version 1, u64 rows, u32 dim, then rows x dim
/// little-endian f32 values, row-major.
pub fn encode_embeddings(m: &EmbeddingMatrix) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_LEN + 4 * m.data.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(m.rows as u64).to_le_bytes());
    out.extend_from_slice(&(m.dim as u32).to_le_bytes());
    for v in &m.data {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn decode_embeddings(path: &Path, bytes: &[u8]) -> Result<EmbeddingMatrix> {
    let fmt = |message: String| Error::Format {
        path: path.to_path_buf(),
        message,
    };
    if bytes.len() < 4 || &bytes[..4] != MAGIC {
        return Err(fmt("bad magic, expected GFVE".into()));
    }
    if bytes.len() < HEADER_LEN {
        return Err(fmt("truncated header".into()));
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
    if version != VERSION {
        return Err(fmt(format!(
            "unsupported version {version}, expected {VERSION}"
        )));
    }
    let rows = u64::from_le_bytes(bytes[8..16].try_into().unwrap()) as usize;
    let dim = u32::from_le_bytes(bytes[16..20].try_into().unwrap()) as usize;
    let payload = &bytes[HEADER_LEN..];
    let expected = rows
        .checked_mul(dim)
        .and_then(|n| n.checked_mul(4))
        .ok_or_else(|| fmt("header sizes overflow".into()))?;
    if payload.len() < expected {
        return Err(fmt(format!(
            "truncated payload: {rows} x {dim} needs {expected} bytes, found {}",
            payload.len()
        )));
    }
    if payload.len() > expected {
        return Err(fmt(format!(
            "size mismatch: {} bytes after the declared payload",
            payload.len() - expected
        )));
    }
    let data = payload
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes(b.try_into().unwrap()))
        .collect();
    EmbeddingMatrix::new(rows, dim, data).map_err(|e| fmt(e.to_string()))
}

pub fn load_embeddings(path: impl AsRef<Path>) -> Result<EmbeddingMatrix> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_embeddings(path, &bytes)
}

pub fn save_embeddings(m: &EmbeddingMatrix, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode_embeddings(m)).map_err(|e| Error::io(path, e))
}
