//! Label files, JSON helpers and the scene manifest.

use std::fs;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Location, Result};
use crate::scene::ClassSchema;

/// Version stamped into every JSON document this crate writes.
pub const SCHEMA_VERSION: u32 = 1;

/// Reads a label file: one signed integer per line.
pub fn load_labels(path: impl AsRef<Path>) -> Result<Vec<i32>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_labels(path, &text)
}

pub fn parse_labels(path: &Path, text: &str) -> Result<Vec<i32>> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            l.trim().parse::<i32>().map_err(|_| Error::Parse {
                path: path.to_path_buf(),
                location: Location::Line(i + 1),
                message: format!("invalid label `{}`", l.trim()),
            })
        })
        .collect()
}

pub fn encode_labels(labels: &[i32]) -> String {
    let mut s = String::with_capacity(labels.len() * 3);
    for l in labels {
        s.push_str(&l.to_string());
        s.push('\n');
    }
    s
}

pub fn save_labels(labels: &[i32], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode_labels(labels)).map_err(|e| Error::io(path, e))
}

pub fn read_json<T: DeserializeOwned>(path: impl AsRef<Path>) -> Result<T> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_slice(&bytes).map_err(|source| Error::Json {
        path: path.to_path_buf(),
        source,
    })
}

pub fn write_json<T: Serialize>(value: &T, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut text = serde_json::to_string_pretty(value).expect("serializable report");
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn create_dir(path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Train,
    Test,
    Support,
}

/// One scene and its sidecar files. Paths are relative to the manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneEntry {
    pub name: String,
    pub role: Role,
    /// PLY file; for train/test scenes the `label` property holds the
    /// base-class annotation, for support shots it holds the class mask.
    pub scene: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub embeddings: Option<PathBuf>,
    /// Raw per-point predictions (label file).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub predictions: Option<PathBuf>,
    /// Full base + novel ground truth (label file).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ground_truth: Option<PathBuf>,
    /// Per-point instance ids (label file), used for instance counting.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub instances: Option<PathBuf>,
    /// Class name of a support shot.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub class: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub schema_version: u32,
    pub schema: ClassSchema,
    pub scenes: Vec<SceneEntry>,
}

impl Manifest {
    pub fn new(schema: ClassSchema) -> Self {
        Manifest {
            schema_version: SCHEMA_VERSION,
            schema,
            scenes: Vec::new(),
        }
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        if !path.exists() {
            return Err(Error::MissingInput(path.to_path_buf()));
        }
        let m: Manifest = read_json(path)?;
        if m.schema_version != SCHEMA_VERSION {
            return Err(Error::Format {
                path: path.to_path_buf(),
                message: format!("unsupported schema_version {}", m.schema_version),
            });
        }
        m.schema.check()?;
        Ok(m)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        write_json(self, path)
    }

    pub fn with_role(&self, role: Role) -> impl Iterator<Item = &SceneEntry> {
        self.scenes.iter().filter(move |e| e.role == role)
    }

    pub fn find(&self, name: &str) -> Option<&SceneEntry> {
        self.scenes.iter().find(|e| e.name == name)
    }
}

/// Resolves manifest-relative paths and checks that they exist.
#[derive(Debug, Clone)]
pub struct Resolver {
    root: PathBuf,
}

impl Resolver {
    pub fn for_manifest(manifest_path: &Path) -> Self {
        Resolver {
            root: manifest_path
                .parent()
                .map(Path::to_path_buf)
                .unwrap_or_default(),
        }
    }

    pub fn path(&self, rel: &Path) -> PathBuf {
        self.root.join(rel)
    }

    pub fn existing(&self, rel: &Path) -> Result<PathBuf> {
        let p = self.path(rel);
        if p.is_file() {
            Ok(p)
        } else {
            Err(Error::MissingInput(p))
        }
    }

    pub fn required(
        &self,
        entry: &SceneEntry,
        field: &str,
        rel: Option<&PathBuf>,
    ) -> Result<PathBuf> {
        let rel = rel.ok_or_else(|| {
            Error::Contract(format!("scene `{}` has no `{field}` entry", entry.name))
        })?;
        self.existing(rel)
    }
}
