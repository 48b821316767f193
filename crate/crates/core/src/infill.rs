//! Adaptive infilling of points left unlabeled after selection.
//!
//! Each novel class gets one prototype: pooled from the current labels
//! when the class is present there, otherwise its support prototype. An
//! unlabeled point takes the class of its most similar prototype when
//! that similarity reaches `delta`.

use rayon::prelude::*;
use serde::Serialize;

use crate::embed::EmbeddingMatrix;
use crate::error::{Error, Result};
use crate::prototype::{class_prototypes, cosine_with_sq_norms, dot, PrototypeSet};
use crate::scene::{ClassSchema, UNLABELED};

pub const DEFAULT_DELTA: f64 = 0.9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct InfillConfig {
    delta: f64,
}

impl Default for InfillConfig {
    fn default() -> Self {
        InfillConfig {
            delta: DEFAULT_DELTA,
        }
    }
}

impl InfillConfig {
    pub fn new(delta: f64) -> Result<Self> {
        if !(-1.0..=1.0).contains(&delta) {
            return Err(Error::Config(format!(
                "delta must be in [-1, 1], got {delta}"
            )));
        }
        Ok(InfillConfig { delta })
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }
}

/// Prototypes of the novel classes present in the selected labels.
pub fn context_prototypes(
    features: &EmbeddingMatrix,
    y_prime: &[i32],
    schema: &ClassSchema,
) -> Result<PrototypeSet> {
    schema.check_labels(y_prime)?;
    class_prototypes(features, y_prime, schema.novel_range())
}

/// Where each adaptive prototype came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PrototypeSource {
    Context,
    Support,
}

/// One prototype per novel class: context when available, else support.
pub fn adaptive_set(
    context: &PrototypeSet,
    support: &PrototypeSet,
    schema: &ClassSchema,
) -> Result<(PrototypeSet, Vec<(i32, PrototypeSource)>)> {
    let mut set = PrototypeSet::new(support.dim());
    let mut sources = Vec::with_capacity(schema.n_novel());
    for class in schema.novel_range() {
        let p = support.get(class).ok_or(Error::MissingPrototype {
            class,
            set: "support",
        })?;
        let (v, src) = match context.get(class) {
            Some(v) => (v, PrototypeSource::Context),
            None => (p, PrototypeSource::Support),
        };
        set.insert(class, v.to_vec())?;
        sources.push((class, src));
    }
    Ok((set, sources))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InfillOutcome {
    pub labels: Vec<i32>,
    /// Newly assigned points per novel class, in class order.
    pub assigned: Vec<(i32, usize)>,
}

impl InfillOutcome {
    pub fn total_assigned(&self) -> usize {
        self.assigned.iter().map(|(_, n)| n).sum()
    }
}

/// Thresholded nearest-prototype assignment of every unlabeled point.
/// Ties go to the smallest class index; labeled points are left alone.
pub fn infill(
    y_prime: &[i32],
    features: &EmbeddingMatrix,
    adaptive: &PrototypeSet,
    cfg: &InfillConfig,
    schema: &ClassSchema,
) -> Result<InfillOutcome> {
    if y_prime.len() != features.rows() {
        return Err(Error::Alignment {
            what: "labels".into(),
            expected: features.rows(),
            found: y_prime.len(),
        });
    }
    if adaptive.dim() != features.dim() {
        return Err(Error::Alignment {
            what: "prototype dimension".into(),
            expected: features.dim(),
            found: adaptive.dim(),
        });
    }
    for class in schema.novel_range() {
        if !adaptive.contains(class) {
            return Err(Error::MissingPrototype {
                class,
                set: "adaptive",
            });
        }
    }
    let protos: Vec<(i32, &[f64], f64)> = adaptive
        .iter()
        .filter(|(c, _)| schema.is_novel(*c))
        .map(|(c, v)| (c, v, dot(v, v)))
        .collect();
    let delta = cfg.delta;

    const CHUNK: usize = 1024;
    let labels: Vec<i32> = y_prime
        .par_chunks(CHUNK)
        .enumerate()
        .flat_map_iter(|(ci, chunk)| {
            let mut row = Vec::with_capacity(features.dim());
            let protos = &protos;
            chunk.iter().enumerate().map(move |(j, &l)| {
                if l != UNLABELED {
                    return l;
                }
                features.row_f64_into(ci * CHUNK + j, &mut row);
                let aa = dot(&row, &row);
                let mut best = (f64::NEG_INFINITY, UNLABELED);
                for &(c, p, pp) in protos {
                    let s = cosine_with_sq_norms(dot(&row, p), aa, pp);
                    if s > best.0 {
                        best = (s, c);
                    }
                }
                if best.0 >= delta {
                    best.1
                } else {
                    UNLABELED
                }
            })
        })
        .collect();

    let first = schema.n_base() as i32;
    let mut counts = vec![0usize; schema.n_novel()];
    for (&before, &after) in y_prime.iter().zip(&labels) {
        if before == UNLABELED && after != UNLABELED {
            counts[(after - first) as usize] += 1;
        }
    }
    Ok(InfillOutcome {
        labels,
        assigned: counts
            .into_iter()
            .enumerate()
            .map(|(k, n)| (first + k as i32, n))
            .collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prototype::cosine;

    fn schema() -> ClassSchema {
        ClassSchema::new(["floor", "wall"], ["lamp", "sink"]).unwrap()
    }

    fn set(entries: &[(i32, [f64; 2])]) -> PrototypeSet {
        let mut s = PrototypeSet::new(2);
        for (c, v) in entries {
            s.insert(*c, v.to_vec()).unwrap();
        }
        s
    }

    #[test]
    fn delta_range() {
        assert!(InfillConfig::new(1.01).is_err());
        assert!(InfillConfig::new(-1.0).is_ok());
        assert_eq!(InfillConfig::default().delta(), 0.9);
    }

    #[test]
    fn adaptive_prefers_context() {
        let s = schema();
        let sup = set(&[(2, [1.0, 0.0]), (3, [0.0, 1.0])]);
        let (a, _) = adaptive_set(&PrototypeSet::new(2), &sup, &s).unwrap();
        assert_eq!(a, sup);
        let ctx = set(&[(2, [0.5, 0.5]), (3, [0.2, 0.1])]);
        let (a, _) = adaptive_set(&ctx, &sup, &s).unwrap();
        assert_eq!(a, ctx);
        let ctx = set(&[(3, [0.2, 0.1])]);
        let (a, src) = adaptive_set(&ctx, &sup, &s).unwrap();
        assert_eq!(a.get(2).unwrap(), &[1.0, 0.0]);
        assert_eq!(a.get(3).unwrap(), &[0.2, 0.1]);
        assert_eq!(
            src,
            vec![(2, PrototypeSource::Support), (3, PrototypeSource::Context)]
        );
        let partial = set(&[(2, [1.0, 0.0])]);
        assert!(adaptive_set(&ctx, &partial, &s).is_err());
    }

    #[test]
    fn fully_labeled_input_is_unchanged() {
        let s = schema();
        let f = EmbeddingMatrix::new(3, 2, vec![1.0, 0.0, 0.0, 1.0, 1.0, 1.0]).unwrap();
        let a = set(&[(2, [1.0, 0.0]), (3, [0.0, 1.0])]);
        let y = vec![0, 2, 1];
        let out = infill(&y, &f, &a, &InfillConfig::default(), &s).unwrap();
        assert_eq!(out.labels, y);
        assert_eq!(out.total_assigned(), 0);
    }

    #[test]
    fn support_prototype_discovers_missing_class() {
        let s = schema();
        let f = EmbeddingMatrix::new(2, 2, vec![0.0, 3.0, 0.6, 0.8]).unwrap();
        let ctx = context_prototypes(&f, &[-1, -1], &s).unwrap();
        assert!(ctx.is_empty());
        let sup = set(&[(2, [1.0, 0.0]), (3, [0.0, 1.0])]);
        let (a, _) = adaptive_set(&ctx, &sup, &s).unwrap();
        let out = infill(&[-1, -1], &f, &a, &InfillConfig::default(), &s).unwrap();
        // second point: best cosine 0.8 < 0.9
        assert_eq!(out.labels, vec![3, -1]);
        assert_eq!(out.assigned, vec![(2, 0), (3, 1)]);
    }

    #[test]
    fn ties_go_to_smaller_class() {
        let s = schema();
        let f = EmbeddingMatrix::new(1, 2, vec![1.0, 1.0]).unwrap();
        let a = set(&[(2, [1.0, 1.0]), (3, [2.0, 2.0])]);
        let out = infill(&[-1], &f, &a, &InfillConfig::default(), &s).unwrap();
        assert_eq!(out.labels, vec![2]);
    }

    #[test]
    fn assignments_reach_threshold() {
        let s = schema();
        let rows: Vec<f32> = (0..200)
            .flat_map(|i| {
                let t = i as f32 / 200.0 * std::f32::consts::FRAC_PI_2;
                [t.cos(), t.sin()]
            })
            .collect();
        let f = EmbeddingMatrix::new(200, 2, rows).unwrap();
        let a = set(&[(2, [1.0, 0.0]), (3, [0.0, 1.0])]);
        let out = infill(&vec![-1; 200], &f, &a, &InfillConfig::default(), &s).unwrap();
        for (i, &l) in out.labels.iter().enumerate() {
            let row: Vec<f64> = f.row(i).iter().map(|&v| v as f64).collect();
            let best = [2, 3]
                .iter()
                .map(|&c| cosine(&row, a.get(c).unwrap()))
                .fold(f64::MIN, f64::max);
            assert_eq!(l != -1, best >= 0.9);
        }
    }
}
