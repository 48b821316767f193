//! Benchmark construction: class occurrence statistics, frequency-based
//! class retention and the base/novel split.

use std::collections::{BTreeMap, HashSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scene::ClassSchema;

/// What counts as one occurrence of a class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CountMode {
    /// A scene containing at least one point of the class.
    #[default]
    Scenes,
    /// A distinct instance id carrying the class.
    Instances,
}

impl std::str::FromStr for CountMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "scenes" | "scene" => Ok(CountMode::Scenes),
            "instances" | "instance" => Ok(CountMode::Instances),
            other => Err(Error::Config(format!("unknown count mode `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ClassStat {
    pub occurrences: u64,
    pub points: u64,
}

impl ClassStat {
    /// Average number of points per occurrence; zero when absent.
    pub fn mean_points(&self) -> f64 {
        if self.occurrences == 0 {
            0.0
        } else {
            self.points as f64 / self.occurrences as f64
        }
    }
}

/// Per-class occurrence counts. Partial statistics merge associatively.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ClassStats {
    pub mode: CountMode,
    pub classes: BTreeMap<String, ClassStat>,
}

impl ClassStats {
    pub fn new(mode: CountMode) -> Self {
        ClassStats {
            mode,
            classes: BTreeMap::new(),
        }
    }

    /// Stats given occurrence counts directly (points left at zero).
    pub fn from_counts<'a>(counts: impl IntoIterator<Item = (&'a str, u64)>) -> Self {
        let mut s = ClassStats::default();
        for (name, occurrences) in counts {
            s.classes.insert(
                name.to_string(),
                ClassStat {
                    occurrences,
                    points: 0,
                },
            );
        }
        s
    }

    pub fn get(&self, name: &str) -> Option<&ClassStat> {
        self.classes.get(name)
    }

    pub fn merge(mut self, other: &ClassStats) -> Self {
        for (name, stat) in &other.classes {
            let e = self.classes.entry(name.clone()).or_default();
            e.occurrences += stat.occurrences;
            e.points += stat.points;
        }
        self
    }

    /// Adds one labeled scene. `names[label]` names each class; negative
    /// labels are ignored. Instance mode needs per-point instance ids.
    pub fn add_scene(
        &mut self,
        names: &[String],
        labels: &[i32],
        instances: Option<&[i32]>,
    ) -> Result<()> {
        if let Some(i) = labels.iter().position(|&l| l >= names.len() as i32) {
            return Err(Error::LabelOutOfRange {
                index: i,
                value: labels[i],
                n_classes: names.len(),
            });
        }
        for name in names {
            self.classes.entry(name.clone()).or_default();
        }
        let mut points = vec![0u64; names.len()];
        for &l in labels.iter().filter(|&&l| l >= 0) {
            points[l as usize] += 1;
        }
        let occurrences: Vec<u64> = match self.mode {
            CountMode::Scenes => points.iter().map(|&p| u64::from(p > 0)).collect(),
            CountMode::Instances => {
                let inst = instances.ok_or_else(|| {
                    Error::Config("instance counting needs per-point instance ids".into())
                })?;
                if inst.len() != labels.len() {
                    return Err(Error::Alignment {
                        what: "instance ids".into(),
                        expected: labels.len(),
                        found: inst.len(),
                    });
                }
                let mut seen = HashSet::new();
                let mut occ = vec![0u64; names.len()];
                for (&l, &id) in labels.iter().zip(inst) {
                    if l >= 0 && id >= 0 && seen.insert((l, id)) {
                        occ[l as usize] += 1;
                    }
                }
                occ
            }
        };
        for (k, name) in names.iter().enumerate() {
            let e = self.classes.get_mut(name).expect("inserted above");
            e.occurrences += occurrences[k];
            if occurrences[k] > 0 {
                e.points += points[k];
            }
        }
        Ok(())
    }
}

/// One scene's labels (and optional instance ids) for [`class_stats`].
#[derive(Debug, Clone, Copy)]
pub struct SceneLabels<'a> {
    pub labels: &'a [i32],
    pub instances: Option<&'a [i32]>,
}

pub fn class_stats<'a>(
    scenes: impl IntoIterator<Item = SceneLabels<'a>>,
    names: &[String],
    mode: CountMode,
) -> Result<ClassStats> {
    let mut stats = ClassStats::new(mode);
    for s in scenes {
        stats.add_scene(names, s.labels, s.instances)?;
    }
    Ok(stats)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub freq_threshold: u64,
    pub n_base: usize,
}

/// Keeps classes with more than `freq_threshold` occurrences, ranks them
/// by count (ties by name) and makes the first `n_base` the base classes.
pub fn build_split(stats: &ClassStats, spec: &SplitSpec) -> Result<ClassSchema> {
    if spec.n_base == 0 {
        return Err(Error::Config("n_base must be at least 1".into()));
    }
    let mut retained: Vec<(&str, u64)> = stats
        .classes
        .iter()
        .filter(|(_, s)| s.occurrences > spec.freq_threshold)
        .map(|(n, s)| (n.as_str(), s.occurrences))
        .collect();
    if retained.len() < spec.n_base {
        return Err(Error::TooFewRetained {
            retained: retained.len(),
            needed: spec.n_base,
        });
    }
    retained.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    let (base, novel) = retained.split_at(spec.n_base);
    ClassSchema::new(
        base.iter().map(|(n, _)| n.to_string()),
        novel.iter().map(|(n, _)| n.to_string()),
    )
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassRow {
    pub name: String,
    pub role: &'static str,
    pub occurrences: u64,
    pub mean_points: f64,
}

/// Extremes over the novel classes, plus one row per schema class.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StatsReport {
    pub schema_version: u32,
    pub mode: CountMode,
    pub n_base: usize,
    pub n_novel: usize,
    pub max_occurrences: u64,
    pub min_occurrences: u64,
    pub max_mean_points: f64,
    pub min_mean_points: f64,
    pub rows: Vec<ClassRow>,
}

pub fn summarize(stats: &ClassStats, schema: &ClassSchema) -> Result<StatsReport> {
    let lookup = |name: &str| {
        stats
            .get(name)
            .copied()
            .ok_or_else(|| Error::Contract(format!("class `{name}` missing from statistics")))
    };
    let mut rows = Vec::with_capacity(schema.n_classes());
    for (role, names) in [
        ("base", schema.base_names()),
        ("novel", schema.novel_names()),
    ] {
        for name in names {
            let s = lookup(name)?;
            rows.push(ClassRow {
                name: name.clone(),
                role,
                occurrences: s.occurrences,
                mean_points: s.mean_points(),
            });
        }
    }
    let novel: Vec<&ClassRow> = rows.iter().filter(|r| r.role == "novel").collect();
    let (mut max_f, mut min_f) = (0, 0);
    let (mut max_p, mut min_p) = (0.0, 0.0);
    if !novel.is_empty() {
        max_f = novel.iter().map(|r| r.occurrences).max().unwrap();
        min_f = novel.iter().map(|r| r.occurrences).min().unwrap();
        max_p = novel.iter().map(|r| r.mean_points).fold(f64::MIN, f64::max);
        min_p = novel.iter().map(|r| r.mean_points).fold(f64::MAX, f64::min);
    }
    Ok(StatsReport {
        schema_version: crate::io::SCHEMA_VERSION,
        mode: stats.mode,
        n_base: schema.n_base(),
        n_novel: schema.n_novel(),
        max_occurrences: max_f,
        min_occurrences: min_f,
        max_mean_points: max_p,
        min_mean_points: min_p,
        rows,
    })
}

impl StatsReport {
    /// Aligned plain-text table.
    pub fn to_table(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "{:>5} {:>6} {:>8} {:>8} {:>10} {:>10}",
            "Base", "Novel", "Max (F)", "Min (F)", "Max (P)", "Min (P)"
        );
        let _ = writeln!(
            s,
            "{:>5} {:>6} {:>8} {:>8} {:>10.0} {:>10.0}",
            self.n_base,
            self.n_novel,
            self.max_occurrences,
            self.min_occurrences,
            self.max_mean_points,
            self.min_mean_points
        );
        let _ = writeln!(s);
        let width = self
            .rows
            .iter()
            .map(|r| r.name.len())
            .max()
            .unwrap_or(5)
            .max(5);
        let _ = writeln!(
            s,
            "{:<width$}  {:<5}  {:>8}  {:>12}",
            "class", "role", "F", "P"
        );
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{:<width$}  {:<5}  {:>8}  {:>12.1}",
                r.name, r.role, r.occurrences, r.mean_points
            );
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn names(n: &[&str]) -> Vec<String> {
        n.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn occurrence_and_mean_points() {
        let vocab = names(&["a", "b"]);
        let mut scenes: Vec<Vec<i32>> = Vec::new();
        for n in [10, 20, 30] {
            scenes.push(vec![0; n]);
        }
        scenes.push(vec![-1; 5]);
        scenes.push(vec![-1; 7]);
        let stats = class_stats(
            scenes.iter().map(|l| SceneLabels {
                labels: l,
                instances: None,
            }),
            &vocab,
            CountMode::Scenes,
        )
        .unwrap();
        let a = stats.get("a").unwrap();
        assert_eq!(a.occurrences, 3);
        assert_eq!(a.mean_points(), 20.0);
        let b = stats.get("b").unwrap();
        assert_eq!((b.occurrences, b.mean_points()), (0, 0.0));
    }

    #[test]
    fn instance_mode() {
        let vocab = names(&["a", "b"]);
        let labels = vec![0, 0, 0, 1, 1, -1];
        let inst = vec![1, 1, 2, 3, 3, 4];
        let stats = class_stats(
            [SceneLabels {
                labels: &labels,
                instances: Some(&inst),
            }],
            &vocab,
            CountMode::Instances,
        )
        .unwrap();
        assert_eq!(stats.get("a").unwrap().occurrences, 2);
        assert_eq!(stats.get("a").unwrap().mean_points(), 1.5);
        assert_eq!(stats.get("b").unwrap().occurrences, 1);
        let missing = class_stats(
            [SceneLabels {
                labels: &labels,
                instances: None,
            }],
            &vocab,
            CountMode::Instances,
        );
        assert!(missing.is_err());
    }

    #[test]
    fn split_example() {
        let stats = ClassStats::from_counts([("a", 500), ("b", 200), ("c", 90)]);
        let schema = build_split(
            &stats,
            &SplitSpec {
                freq_threshold: 100,
                n_base: 1,
            },
        )
        .unwrap();
        assert_eq!(schema.base_names(), &["a"]);
        assert_eq!(schema.novel_names(), &["b"]);
    }

    #[test]
    fn split_threshold_is_strict_and_ties_by_name() {
        let stats = ClassStats::from_counts([("z", 150), ("y", 150), ("x", 100), ("w", 300)]);
        let schema = build_split(
            &stats,
            &SplitSpec {
                freq_threshold: 100,
                n_base: 2,
            },
        )
        .unwrap();
        assert_eq!(schema.base_names(), &["w", "y"]);
        assert_eq!(schema.novel_names(), &["z"]);
    }

    #[test]
    fn split_needs_enough_classes() {
        let stats = ClassStats::from_counts([("a", 500), ("b", 50)]);
        let err = build_split(
            &stats,
            &SplitSpec {
                freq_threshold: 100,
                n_base: 2,
            },
        )
        .unwrap_err();
        assert!(matches!(
            err,
            Error::TooFewRetained {
                retained: 1,
                needed: 2
            }
        ));
    }

    #[test]
    fn summary_single_novel() {
        let stats = ClassStats::from_counts([("a", 500), ("b", 200)]);
        let schema = ClassSchema::new(["a"], ["b"]).unwrap();
        let r = summarize(&stats, &schema).unwrap();
        assert_eq!((r.max_occurrences, r.min_occurrences), (200, 200));
        assert!(r.to_table().contains("Max (F)"));
        let other = ClassSchema::new(["a"], ["q"]).unwrap();
        assert!(summarize(&stats, &other).is_err());
    }

    #[test]
    fn merge_is_additive() {
        let vocab = names(&["a", "b", "c"]);
        let s1 = vec![0, 1, 1];
        let s2 = vec![2, 1, -1];
        let both = class_stats(
            [&s1, &s2].map(|l| SceneLabels {
                labels: l,
                instances: None,
            }),
            &vocab,
            CountMode::Scenes,
        )
        .unwrap();
        let a = class_stats(
            [SceneLabels {
                labels: &s1,
                instances: None,
            }],
            &vocab,
            CountMode::Scenes,
        )
        .unwrap();
        let b = class_stats(
            [SceneLabels {
                labels: &s2,
                instances: None,
            }],
            &vocab,
            CountMode::Scenes,
        )
        .unwrap();
        assert_eq!(a.clone().merge(&b), both);
        assert_eq!(b.merge(&a), both);
    }
}
