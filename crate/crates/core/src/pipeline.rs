//! Selection followed by infilling, for one scene at a time.

use serde::Serialize;

use crate::embed::EmbeddingMatrix;
use crate::error::Result;
use crate::infill::{adaptive_set, context_prototypes, infill, InfillConfig, PrototypeSource};
use crate::prototype::PrototypeSet;
use crate::scene::ClassSchema;
use crate::select::{ps_refine, ClassDecision, SelectionConfig};

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct RefineConfig {
    pub selection: SelectionConfig,
    pub infill: InfillConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RefineReport {
    pub decisions: Vec<ClassDecision>,
    pub kept: Vec<i32>,
    pub sources: Vec<(i32, PrototypeSource)>,
    pub assigned: Vec<(i32, usize)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Refined {
    /// Labels after selection and merge.
    pub selected: Vec<i32>,
    /// Labels after infilling.
    pub labels: Vec<i32>,
    pub report: RefineReport,
}

/// Runs selection then infilling on one scene.
pub fn refine_scene(
    features: &EmbeddingMatrix,
    raw: &[i32],
    base_labels: &[i32],
    support: &PrototypeSet,
    cfg: &RefineConfig,
    schema: &ClassSchema,
) -> Result<Refined> {
    let ps = ps_refine(features, raw, base_labels, support, &cfg.selection, schema)?;
    let context = context_prototypes(features, &ps.labels, schema)?;
    let (adaptive, sources) = adaptive_set(&context, support, schema)?;
    let filled = infill(&ps.labels, features, &adaptive, &cfg.infill, schema)?;
    let kept = ps
        .decisions
        .iter()
        .filter(|d| d.kept)
        .map(|d| d.class)
        .collect();
    Ok(Refined {
        selected: ps.labels,
        labels: filled.labels,
        report: RefineReport {
            decisions: ps.decisions,
            kept,
            sources,
            assigned: filled.assigned,
        },
    })
}
