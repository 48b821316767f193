//! Pseudo-label selection.
//!
//! Raw per-point predictions are filtered class by class: a novel class
//! survives when the prototype pooled over its predicted points agrees
//! with its support prototype (cosine >= tau). Base-class predictions are
//! always dropped, and survivors are only written into points that carry
//! no base annotation.

use serde::Serialize;

use crate::embed::EmbeddingMatrix;
use crate::error::{Error, Result};
use crate::prototype::{class_prototypes, cosine, PrototypeSet};
use crate::scene::{ClassSchema, UNLABELED};

pub const DEFAULT_TAU: f64 = 0.6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SelectionConfig {
    tau: f64,
}

impl Default for SelectionConfig {
    fn default() -> Self {
        SelectionConfig { tau: DEFAULT_TAU }
    }
}

impl SelectionConfig {
    pub fn new(tau: f64) -> Result<Self> {
        if !(-1.0..=1.0).contains(&tau) {
            return Err(Error::Config(format!("tau must be in [-1, 1], got {tau}")));
        }
        Ok(SelectionConfig { tau })
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }
}

/// Per-class outcome of the agreement test.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassDecision {
    pub class: i32,
    pub cosine: f64,
    pub kept: bool,
    /// Number of raw points predicted as this class.
    pub points: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Selection {
    /// Novel labels that passed, -1 elsewhere.
    pub labels: Vec<i32>,
    pub decisions: Vec<ClassDecision>,
}

impl Selection {
    pub fn kept_classes(&self) -> impl Iterator<Item = i32> + '_ {
        self.decisions.iter().filter(|d| d.kept).map(|d| d.class)
    }
}

/// Prototype of every novel class present in the raw predictions.
pub fn predicted_prototypes(
    features: &EmbeddingMatrix,
    raw: &[i32],
    schema: &ClassSchema,
) -> Result<PrototypeSet> {
    schema.check_labels(raw)?;
    class_prototypes(features, raw, schema.novel_range())
}

/// Filters raw predictions by per-class prototype agreement.
pub fn select_pseudo_labels(
    raw: &[i32],
    predicted: &PrototypeSet,
    support: &PrototypeSet,
    cfg: &SelectionConfig,
    schema: &ClassSchema,
) -> Result<Selection> {
    schema.check_labels(raw)?;
    let n_novel = schema.n_novel();
    let first = schema.n_base() as i32;
    let mut counts = vec![0usize; n_novel];
    for &l in raw {
        if schema.is_novel(l) {
            counts[(l - first) as usize] += 1;
        }
    }

    // keep[k] decides class first + k for all of its points at once
    let mut keep = vec![false; n_novel];
    let mut decisions = Vec::new();
    for (k, &points) in counts.iter().enumerate() {
        if points == 0 {
            continue;
        }
        let class = first + k as i32;
        let u = predicted.get(class).ok_or(Error::MissingPrototype {
            class,
            set: "predicted",
        })?;
        let p = support.get(class).ok_or(Error::MissingPrototype {
            class,
            set: "support",
        })?;
        let cos = cosine(u, p);
        keep[k] = cos >= cfg.tau;
        decisions.push(ClassDecision {
            class,
            cosine: cos,
            kept: keep[k],
            points,
        });
    }

    let labels = raw
        .iter()
        .map(|&l| {
            if schema.is_novel(l) && keep[(l - first) as usize] {
                l
            } else {
                UNLABELED
            }
        })
        .collect();
    Ok(Selection { labels, decisions })
}

/// Writes filtered novel labels into the unlabeled part of the base
/// annotation. Base labels are never overwritten.
pub fn merge_into_background(
    base_labels: &[i32],
    filtered: &[i32],
    schema: &ClassSchema,
) -> Result<Vec<i32>> {
    if base_labels.len() != filtered.len() {
        return Err(Error::Alignment {
            what: "filtered labels".into(),
            expected: base_labels.len(),
            found: filtered.len(),
        });
    }
    if let Some(i) = base_labels
        .iter()
        .position(|&l| l != UNLABELED && !schema.is_base(l))
    {
        return Err(Error::Contract(format!(
            "base annotation holds non-base label {} at index {i}",
            base_labels[i]
        )));
    }
    if let Some(i) = filtered
        .iter()
        .position(|&l| l != UNLABELED && !schema.is_novel(l))
    {
        return Err(Error::Contract(format!(
            "filtered pseudo-labels hold non-novel label {} at index {i}",
            filtered[i]
        )));
    }
    Ok(base_labels
        .iter()
        .zip(filtered)
        .map(|(&b, &f)| if b != UNLABELED { b } else { f })
        .collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct PsOutcome {
    /// Base annotation with the selected novel labels merged in.
    pub labels: Vec<i32>,
    pub predicted: PrototypeSet,
    pub decisions: Vec<ClassDecision>,
}

/// Full selection step: predicted prototypes, filtering, merge.
pub fn ps_refine(
    features: &EmbeddingMatrix,
    raw: &[i32],
    base_labels: &[i32],
    support: &PrototypeSet,
    cfg: &SelectionConfig,
    schema: &ClassSchema,
) -> Result<PsOutcome> {
    for (what, len) in [
        ("raw predictions", raw.len()),
        ("base labels", base_labels.len()),
    ] {
        if len != features.rows() {
            return Err(Error::Alignment {
                what: what.into(),
                expected: features.rows(),
                found: len,
            });
        }
    }
    let predicted = predicted_prototypes(features, raw, schema)?;
    let selection = select_pseudo_labels(raw, &predicted, support, cfg, schema)?;
    let labels = merge_into_background(base_labels, &selection.labels, schema)?;
    Ok(PsOutcome {
        labels,
        predicted,
        decisions: selection.decisions,
    })
}
