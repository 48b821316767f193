//! Seeded comparisons against brute-force reimplementations.

use std::collections::{BTreeMap, BTreeSet};

use gfs3d::bench::{class_stats, summarize, ClassStats, CountMode, SceneLabels};
use gfs3d::embed::{EmbeddingMatrix, SyntheticProvider, SyntheticProviderConfig};
use gfs3d::infill::{adaptive_set, context_prototypes, infill, InfillConfig, PrototypeSource};
use gfs3d::metrics::{pseudo_label_quality, ConfusionMatrix};
use gfs3d::nbmix::{corners_xy, crop_novel, pick_pair, CornerPairing};
use gfs3d::prototype::{cosine, support_prototypes_with, PrototypeSet, SupportSet, SupportShot};
use gfs3d::scene::{ClassSchema, PointCloudScene};
use gfs3d::select::predicted_prototypes;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn schema(n_base: usize, n_novel: usize) -> ClassSchema {
    ClassSchema::new(
        (0..n_base).map(|i| format!("b{i}")),
        (0..n_novel).map(|i| format!("n{i}")),
    )
    .unwrap()
}

fn random_features(rng: &mut ChaCha8Rng, n: usize, dim: usize) -> EmbeddingMatrix {
    EmbeddingMatrix::new(
        n,
        dim,
        (0..n * dim).map(|_| rng.random_range(-1.0..1.0)).collect(),
    )
    .unwrap()
}

fn loop_mean(f: &EmbeddingMatrix, labels: &[i32], class: i32) -> Option<Vec<f64>> {
    let mut sum = vec![0.0; f.dim()];
    let mut n = 0;
    for (i, &l) in labels.iter().enumerate() {
        if l == class {
            for d in 0..f.dim() {
                sum[d] += f.row(i)[d] as f64;
            }
            n += 1;
        }
    }
    (n > 0).then(|| sum.into_iter().map(|s| s / n as f64).collect())
}

fn assert_close(a: &[f64], b: &[f64], tol: f64) {
    assert_eq!(a.len(), b.len());
    for (x, y) in a.iter().zip(b) {
        assert!((x - y).abs() <= tol, "{x} vs {y}");
    }
}

#[test]
fn pooled_k_shot_prototype_beats_single_shots() {
    let s = schema(1, 1);
    let mut wins = 0;
    for trial in 0..100u64 {
        let provider = SyntheticProvider::new(
            &s,
            SyntheticProviderConfig {
                dim: 32,
                anchor_seed: trial,
                noise_seed: 0,
                noise_sigma: 0.1,
                confusion_prob: 0.0,
            },
        )
        .unwrap();
        let anchor = provider.anchor(1).unwrap().to_vec();
        let shots: Vec<SupportShot> = (0..5)
            .map(|_| SupportShot {
                scene: PointCloudScene::new(vec![[0.0; 3]; 12], None, vec![1; 12]).unwrap(),
                mask: vec![true; 12],
            })
            .collect();
        let set = SupportSet::new(BTreeMap::from([(1, shots)]), &s).unwrap();
        let feats: Vec<EmbeddingMatrix> = (0..5)
            .map(|k| {
                provider
                    .with_noise_seed(trial * 100 + k)
                    .embed_labels(&[1; 12])
                    .unwrap()
            })
            .collect();
        let pooled = support_prototypes_with(&set, |_, k, _| Ok(feats[k].clone())).unwrap();
        let best_single = feats
            .iter()
            .map(|f| cosine(&loop_mean(f, &[1; 12], 1).unwrap(), &anchor))
            .fold(f64::NEG_INFINITY, f64::max);
        if cosine(pooled.get(1).unwrap(), &anchor) >= best_single {
            wins += 1;
        }
    }
    assert!(wins >= 90, "{wins}/100");
}

#[test]
fn predicted_prototypes_match_pooling_loop() {
    let s = schema(3, 2);
    for seed in 0..20 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let f = random_features(&mut rng, 300, 7);
        let raw: Vec<i32> = (0..300).map(|_| rng.random_range(-1..5)).collect();
        let set = predicted_prototypes(&f, &raw, &s).unwrap();
        for c in 3..5 {
            match loop_mean(&f, &raw, c) {
                Some(want) => assert_close(set.get(c).unwrap(), &want, 1e-12),
                None => assert!(!set.contains(c)),
            }
        }
        assert!(!set.contains(0));
    }
}

#[test]
fn context_and_adaptive_prototypes_match_oracles() {
    let s = schema(2, 6);
    for seed in 0..20 {
        let mut rng = ChaCha8Rng::seed_from_u64(100 + seed);
        let f = random_features(&mut rng, 400, 5);
        // only some novel classes present
        let present: Vec<i32> = (2..8).filter(|_| rng.random_bool(0.5)).collect();
        let y: Vec<i32> = (0..400)
            .map(|_| {
                if !present.is_empty() && rng.random_bool(0.5) {
                    present[rng.random_range(0..present.len())]
                } else {
                    -1
                }
            })
            .collect();
        let mut support = PrototypeSet::new(5);
        for c in 2..8 {
            support
                .insert(c, (0..5).map(|_| rng.random_range(-1.0..1.0)).collect())
                .unwrap();
        }
        let ctx = context_prototypes(&f, &y, &s).unwrap();
        let (adaptive, sources) = adaptive_set(&ctx, &support, &s).unwrap();
        for c in 2..8 {
            let oracle = loop_mean(&f, &y, c);
            match &oracle {
                Some(v) => {
                    assert_close(ctx.get(c).unwrap(), v, 1e-12);
                    assert_eq!(adaptive.get(c), ctx.get(c));
                }
                None => assert_eq!(adaptive.get(c), support.get(c)),
            }
            let want = if oracle.is_some() {
                PrototypeSource::Context
            } else {
                PrototypeSource::Support
            };
            assert!(sources.contains(&(c, want)));
        }
    }
}

#[test]
fn infill_matches_exhaustive_argmax() {
    let s = schema(2, 5);
    let mut rng = ChaCha8Rng::seed_from_u64(346);
    let mut protos = PrototypeSet::new(6);
    let dirs: Vec<Vec<f64>> = (0..5)
        .map(|_| (0..6).map(|_| rng.random_range(-1.0..1.0)).collect())
        .collect();
    for (k, d) in dirs.iter().enumerate() {
        protos.insert(2 + k as i32, d.clone()).unwrap();
    }
    let mut data = Vec::new();
    for _ in 0..500 {
        let d = &dirs[rng.random_range(0..5)];
        data.extend(d.iter().map(|&x| (x + rng.random_range(-0.3..0.3)) as f32));
    }
    let f = EmbeddingMatrix::new(500, 6, data).unwrap();
    let y: Vec<i32> = (0..500)
        .map(|_| {
            if rng.random_bool(0.2) {
                rng.random_range(0..7)
            } else {
                -1
            }
        })
        .collect();
    let out = infill(&y, &f, &protos, &InfillConfig::new(0.9).unwrap(), &s).unwrap();
    let mut assigned = 0;
    for i in 0..500 {
        if y[i] != -1 {
            assert_eq!(out.labels[i], y[i]);
            continue;
        }
        let row: Vec<f64> = f.row(i).iter().map(|&v| v as f64).collect();
        let scores: Vec<(f64, i32)> = protos.iter().map(|(c, p)| (cosine(&row, p), c)).collect();
        let best = scores.iter().map(|x| x.0).fold(f64::NEG_INFINITY, f64::max);
        let want = if best >= 0.9 {
            scores.iter().find(|x| x.0 == best).unwrap().1
        } else {
            -1
        };
        assert_eq!(out.labels[i], want, "point {i}");
        assigned += (want != -1) as usize;
    }
    assert!(assigned > 50);
}

#[test]
fn crop_membership_matches_box_test() {
    let mut rng = ChaCha8Rng::seed_from_u64(395);
    let pts: Vec<[f64; 3]> = (0..2000)
        .map(|_| {
            [
                rng.random_range(0.0..6.0),
                rng.random_range(0.0..6.0),
                rng.random_range(0.0..3.0),
            ]
        })
        .collect();
    let mask: Vec<bool> = pts
        .iter()
        .map(|p| (2.0..3.0).contains(&p[0]) && (1.0..2.5).contains(&p[1]))
        .collect();
    let scene = PointCloudScene::unlabeled(pts.clone());
    let (crop, local) = crop_novel(&scene, &mask, 9, 0.5).unwrap();
    let m: Vec<&[f64; 3]> = pts
        .iter()
        .zip(&mask)
        .filter(|(_, &k)| k)
        .map(|(p, _)| p)
        .collect();
    let lo = [0, 1].map(|a| m.iter().map(|p| p[a]).fold(f64::INFINITY, f64::min) - 0.5);
    let hi = [0, 1].map(|a| m.iter().map(|p| p[a]).fold(f64::NEG_INFINITY, f64::max) + 0.5);
    let want: Vec<usize> = (0..pts.len())
        .filter(|&i| (0..2).all(|a| pts[i][a] >= lo[a] && pts[i][a] <= hi[a]))
        .collect();
    assert_eq!(crop.len(), want.len());
    for (k, &i) in want.iter().enumerate() {
        assert_eq!(crop.positions[k], pts[i]);
        assert_eq!(local[k], mask[i]);
        assert_eq!(crop.labels[k], if mask[i] { 9 } else { -1 });
    }
}

#[test]
fn corners_match_linear_scan() {
    let mut rng = ChaCha8Rng::seed_from_u64(404);
    // coarse grid so ties are common
    let pts: Vec<[f64; 3]> = (0..1000)
        .map(|_| {
            [
                rng.random_range(0..20) as f64 * 0.5,
                rng.random_range(0..20) as f64 * 0.5,
                rng.random(),
            ]
        })
        .collect();
    let c = corners_xy(&pts).unwrap();
    let first = |key: &dyn Fn(&[f64; 3]) -> f64| {
        let best = pts.iter().map(key).fold(f64::NEG_INFINITY, f64::max);
        pts.iter().position(|p| key(p) == best).unwrap()
    };
    let want = [
        first(&|p| p[1]),
        first(&|p| -p[1]),
        first(&|p| -p[0]),
        first(&|p| p[0]),
    ];
    assert_eq!(c.indices, want);
    assert_eq!([c.top, c.bottom, c.left, c.right], want.map(|i| pts[i]));
}

#[test]
fn pairing_frequencies_are_uniform() {
    let mut rng = ChaCha8Rng::seed_from_u64(412);
    let mut counts: BTreeMap<String, usize> = BTreeMap::new();
    for _ in 0..4000 {
        *counts
            .entry(format!("{:?}", pick_pair(&mut rng)))
            .or_default() += 1;
    }
    assert_eq!(counts.len(), 4);
    for (k, n) in &counts {
        assert!((900..=1100).contains(n), "{k}: {n}");
    }
    let draw = |seed| pick_pair(&mut ChaCha8Rng::seed_from_u64(seed));
    assert_eq!(draw(5), draw(5));
    assert!(CornerPairing::ALL.contains(&draw(6)));
}

#[test]
fn class_stats_match_double_loop() {
    let names: Vec<String> = (0..15).map(|i| format!("c{i}")).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(482);
    let scenes: Vec<(Vec<i32>, Vec<i32>)> = (0..50)
        .map(|_| {
            let n = rng.random_range(1..400);
            let labels: Vec<i32> = (0..n)
                .map(|_| {
                    if rng.random_bool(0.1) {
                        -1
                    } else {
                        rng.random_range(0..15)
                    }
                })
                .collect();
            let inst: Vec<i32> = (0..n).map(|_| rng.random_range(0..6)).collect();
            (labels, inst)
        })
        .collect();
    let scene_mode = class_stats(
        scenes.iter().map(|(l, _)| SceneLabels {
            labels: l,
            instances: None,
        }),
        &names,
        CountMode::Scenes,
    )
    .unwrap();
    let inst_mode = class_stats(
        scenes.iter().map(|(l, i)| SceneLabels {
            labels: l,
            instances: Some(i),
        }),
        &names,
        CountMode::Instances,
    )
    .unwrap();
    for (c, name) in names.iter().enumerate() {
        let c = c as i32;
        let mut occ = 0;
        let mut points = 0;
        let mut inst = 0;
        for (labels, ids) in &scenes {
            let hits: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == c).collect();
            occ += !hits.is_empty() as u64;
            points += hits.len() as u64;
            inst += hits.iter().map(|&i| ids[i]).collect::<BTreeSet<_>>().len() as u64;
        }
        let s = scene_mode.get(name).copied().unwrap_or_default();
        assert_eq!((s.occurrences, s.points), (occ, points), "{name}");
        let s = inst_mode.get(name).copied().unwrap_or_default();
        assert_eq!((s.occurrences, s.points), (inst, points), "{name}");
    }
}

#[test]
fn summary_extremes_match_scan() {
    let mut rng = ChaCha8Rng::seed_from_u64(500);
    let counts: Vec<(String, u64, u64)> = (0..30)
        .map(|i| {
            (
                format!("k{i}"),
                rng.random_range(1..1000),
                rng.random_range(1..100_000),
            )
        })
        .collect();
    let mut stats = ClassStats::new(CountMode::Scenes);
    for (n, f, p) in &counts {
        let e = stats.classes.entry(n.clone()).or_default();
        e.occurrences = *f;
        e.points = *p;
    }
    let schema = ClassSchema::new(
        counts[..10].iter().map(|c| c.0.clone()),
        counts[10..].iter().map(|c| c.0.clone()),
    )
    .unwrap();
    let r = summarize(&stats, &schema).unwrap();
    let novel = &counts[10..];
    assert_eq!(r.max_occurrences, novel.iter().map(|c| c.1).max().unwrap());
    assert_eq!(r.min_occurrences, novel.iter().map(|c| c.1).min().unwrap());
    let mean: Vec<f64> = novel.iter().map(|c| c.2 as f64 / c.1 as f64).collect();
    assert_eq!(
        r.max_mean_points,
        mean.iter().cloned().fold(f64::MIN, f64::max)
    );
    assert_eq!(
        r.min_mean_points,
        mean.iter().cloned().fold(f64::MAX, f64::min)
    );
}

#[test]
fn quality_matches_point_tally() {
    let s = schema(3, 4);
    let mut rng = ChaCha8Rng::seed_from_u64(544);
    let gt: Vec<i32> = (0..3000).map(|_| rng.random_range(-1..7)).collect();
    let pseudo: Vec<i32> = gt
        .iter()
        .map(|&g| {
            if rng.random_bool(0.3) {
                rng.random_range(-1..7)
            } else {
                g
            }
        })
        .collect();
    let q = pseudo_label_quality(&pseudo, &gt, &s).unwrap();
    assert_eq!(q.len(), 4);
    for cq in &q {
        let c = cq.class;
        let tp = (0..gt.len())
            .filter(|&i| pseudo[i] == c && gt[i] == c)
            .count() as f64;
        let pred = (0..gt.len()).filter(|&i| pseudo[i] == c).count() as f64;
        let act = (0..gt.len()).filter(|&i| gt[i] == c).count() as f64;
        assert_eq!(cq.precision, Some(tp / pred));
        assert_eq!(cq.recall, Some(tp / act));
    }
}

#[test]
fn iou_matches_set_operations() {
    let mut rng = ChaCha8Rng::seed_from_u64(553);
    let n = 6;
    let gt: Vec<i32> = (0..5000).map(|_| rng.random_range(-1..n)).collect();
    let pred: Vec<i32> = gt
        .iter()
        .map(|&g| {
            if rng.random_bool(0.4) {
                rng.random_range(-1..n)
            } else {
                g
            }
        })
        .collect();
    let mut conf = ConfusionMatrix::new(n as usize);
    conf.accumulate(&pred, &gt).unwrap();
    let ious = conf.iou_per_class();
    for c in 0..n {
        // points with unlabeled ground truth are not scored
        let p: BTreeSet<usize> = (0..gt.len())
            .filter(|&i| pred[i] == c && gt[i] != -1)
            .collect();
        let g: BTreeSet<usize> = (0..gt.len()).filter(|&i| gt[i] == c).collect();
        let inter = p.intersection(&g).count() as f64;
        let union = p.union(&g).count() as f64;
        assert_eq!(ious[c as usize], Some(inter / union), "class {c}");
    }
}
