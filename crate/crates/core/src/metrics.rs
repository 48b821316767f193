//! Segmentation metrics: confusion accumulation, per-class IoU, the
//! base / novel / all means with their harmonic mean, and pseudo-label
//! precision and recall.

use std::fmt::Write as _;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::scene::{ClassSchema, UNLABELED};

/// Rows are ground truth, columns are predictions. An extra last column
/// counts points predicted as unlabeled.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfusionMatrix {
    n: usize,
    counts: Vec<u64>,
}

impl ConfusionMatrix {
    pub fn new(n_classes: usize) -> Self {
        ConfusionMatrix {
            n: n_classes,
            counts: vec![0; n_classes * (n_classes + 1)],
        }
    }

    pub fn n_classes(&self) -> usize {
        self.n
    }

    /// Count for (ground truth, prediction); `pred = -1` reads the
    /// unlabeled column.
    pub fn get(&self, gt: usize, pred: i32) -> u64 {
        let col = if pred == UNLABELED {
            self.n
        } else {
            pred as usize
        };
        self.counts[gt * (self.n + 1) + col]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// Adds one (prediction, ground truth) pair of label vectors. Points
    /// with ground truth -1 are skipped.
    pub fn accumulate(&mut self, pred: &[i32], gt: &[i32]) -> Result<()> {
        if pred.len() != gt.len() {
            return Err(Error::Alignment {
                what: "predictions".into(),
                expected: gt.len(),
                found: pred.len(),
            });
        }
        let n = self.n as i32;
        for v in [gt, pred] {
            if let Some(i) = v.iter().position(|&l| l < UNLABELED || l >= n) {
                return Err(Error::LabelOutOfRange {
                    index: i,
                    value: v[i],
                    n_classes: self.n,
                });
            }
        }
        for (&p, &g) in pred.iter().zip(gt) {
            if g == UNLABELED {
                continue;
            }
            let col = if p == UNLABELED { self.n } else { p as usize };
            self.counts[g as usize * (self.n + 1) + col] += 1;
        }
        Ok(())
    }

    pub fn merge(&mut self, other: &ConfusionMatrix) -> Result<()> {
        if other.n != self.n {
            return Err(Error::Alignment {
                what: "confusion matrix classes".into(),
                expected: self.n,
                found: other.n,
            });
        }
        self.counts
            .iter_mut()
            .zip(&other.counts)
            .for_each(|(a, b)| *a += b);
        Ok(())
    }

    fn gt_count(&self, c: usize) -> u64 {
        self.counts[c * (self.n + 1)..(c + 1) * (self.n + 1)]
            .iter()
            .sum()
    }

    /// IoU = TP / (TP + FP + FN) per class; `None` for a zero denominator.
    pub fn iou_per_class(&self) -> Vec<Option<f64>> {
        (0..self.n)
            .map(|c| {
                let tp = self.get(c, c as i32);
                let fn_ = self.gt_count(c) - tp;
                let fp = (0..self.n)
                    .filter(|&g| g != c)
                    .map(|g| self.get(g, c as i32))
                    .sum::<u64>();
                let denom = tp + fp + fn_;
                (denom > 0).then(|| tp as f64 / denom as f64)
            })
            .collect()
    }
}

/// Harmonic mean of the base and novel means; zero if either is zero.
pub fn harmonic_mean(base: f64, novel: f64) -> f64 {
    if base <= 0.0 || novel <= 0.0 {
        0.0
    } else {
        2.0 * base * novel / (base + novel)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassIou {
    pub class: i32,
    pub name: String,
    pub iou: Option<f64>,
    /// Whether the class entered the means.
    pub evaluated: bool,
}

/// Means are fractions in [0, 1].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricSummary {
    pub miou_base: f64,
    pub miou_novel: f64,
    pub miou_all: f64,
    pub hm: f64,
    pub per_class: Vec<ClassIou>,
    /// Classes left out of the means (no ground-truth points).
    pub excluded: Vec<String>,
}

fn mean(v: &[f64]) -> f64 {
    if v.is_empty() {
        0.0
    } else {
        v.iter().sum::<f64>() / v.len() as f64
    }
}

/// Summary from per-class IoUs; `None` entries are excluded from means.
pub fn summary_from_ious(ious: &[Option<f64>], schema: &ClassSchema) -> Result<MetricSummary> {
    if ious.len() != schema.n_classes() {
        return Err(Error::Alignment {
            what: "per-class IoUs".into(),
            expected: schema.n_classes(),
            found: ious.len(),
        });
    }
    let pick = |range: std::ops::Range<i32>| -> Vec<f64> {
        range.filter_map(|c| ious[c as usize]).collect()
    };
    let base = pick(schema.base_range());
    let novel = pick(schema.novel_range());
    let all = pick(0..schema.n_classes() as i32);
    let miou_base = mean(&base);
    let miou_novel = mean(&novel);
    let per_class = ious
        .iter()
        .enumerate()
        .map(|(c, &iou)| ClassIou {
            class: c as i32,
            name: schema.name(c as i32).unwrap_or_default().to_string(),
            iou,
            evaluated: iou.is_some(),
        })
        .collect::<Vec<_>>();
    let excluded = per_class
        .iter()
        .filter(|c| !c.evaluated)
        .map(|c| c.name.clone())
        .collect();
    Ok(MetricSummary {
        miou_base,
        miou_novel,
        miou_all: mean(&all),
        hm: harmonic_mean(miou_base, miou_novel),
        per_class,
        excluded,
    })
}

/// mIoU-B / N / A and HM. Classes absent from the ground truth are
/// excluded from every mean.
pub fn summary(conf: &ConfusionMatrix, schema: &ClassSchema) -> Result<MetricSummary> {
    if conf.n_classes() != schema.n_classes() {
        return Err(Error::Alignment {
            what: "confusion matrix classes".into(),
            expected: schema.n_classes(),
            found: conf.n_classes(),
        });
    }
    let ious: Vec<Option<f64>> = conf
        .iou_per_class()
        .into_iter()
        .enumerate()
        .map(|(c, iou)| if conf.gt_count(c) == 0 { None } else { iou })
        .collect();
    summary_from_ious(&ious, schema)
}

impl MetricSummary {
    /// Table with the usual column layout, values in percent.
    pub fn to_table(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "{:>8} {:>8} {:>8} {:>8}",
            "mIoU-B", "mIoU-N", "mIoU-A", "HM"
        );
        let _ = writeln!(
            s,
            "{:>8.2} {:>8.2} {:>8.2} {:>8.2}",
            100.0 * self.miou_base,
            100.0 * self.miou_novel,
            100.0 * self.miou_all,
            100.0 * self.hm
        );
        if !self.excluded.is_empty() {
            let _ = writeln!(
                s,
                "excluded (no ground truth): {}",
                self.excluded.join(", ")
            );
        }
        s
    }
}

/// Mean and standard deviation of each headline metric over runs.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Aggregate {
    pub runs: usize,
    pub mean: [f64; 4],
    pub std: [f64; 4],
}

pub fn aggregate(summaries: &[MetricSummary]) -> Aggregate {
    let vals: Vec<[f64; 4]> = summaries
        .iter()
        .map(|s| [s.miou_base, s.miou_novel, s.miou_all, s.hm])
        .collect();
    let n = vals.len().max(1) as f64;
    let mut m = [0.0; 4];
    let mut sd = [0.0; 4];
    for k in 0..4 {
        m[k] = vals.iter().map(|v| v[k]).sum::<f64>() / n;
        sd[k] = (vals.iter().map(|v| (v[k] - m[k]).powi(2)).sum::<f64>() / n).sqrt();
    }
    Aggregate {
        runs: vals.len(),
        mean: m,
        std: sd,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ClassQuality {
    pub class: i32,
    /// `None` when nothing was labeled as the class.
    pub precision: Option<f64>,
    /// `None` when the class has no ground-truth points.
    pub recall: Option<f64>,
}

/// Per-novel-class precision and recall of pseudo-labels.
pub fn pseudo_label_quality(
    pseudo: &[i32],
    gt: &[i32],
    schema: &ClassSchema,
) -> Result<Vec<ClassQuality>> {
    if pseudo.len() != gt.len() {
        return Err(Error::Alignment {
            what: "pseudo-labels".into(),
            expected: gt.len(),
            found: pseudo.len(),
        });
    }
    let first = schema.n_base() as i32;
    let n = schema.n_novel();
    let mut tp = vec![0u64; n];
    let mut predicted = vec![0u64; n];
    let mut actual = vec![0u64; n];
    for (&p, &g) in pseudo.iter().zip(gt) {
        if schema.is_novel(p) {
            predicted[(p - first) as usize] += 1;
            if p == g {
                tp[(p - first) as usize] += 1;
            }
        }
        if schema.is_novel(g) {
            actual[(g - first) as usize] += 1;
        }
    }
    let ratio = |a: u64, b: u64| (b > 0).then(|| a as f64 / b as f64);
    Ok((0..n)
        .map(|k| ClassQuality {
            class: first + k as i32,
            precision: ratio(tp[k], predicted[k]),
            recall: ratio(tp[k], actual[k]),
        })
        .collect())
}

/// Mean of the defined precisions and of the defined recalls.
pub fn mean_quality(q: &[ClassQuality]) -> (Option<f64>, Option<f64>) {
    let avg = |v: Vec<f64>| (!v.is_empty()).then(|| mean(&v));
    (
        avg(q.iter().filter_map(|c| c.precision).collect()),
        avg(q.iter().filter_map(|c| c.recall).collect()),
    )
}
