//! Static 3D k-d tree for nearest-neighbor distance queries.

/// Implicit k-d tree: points are stored in tree order, the median of each
/// range is the node splitting it on `depth % 3`.
#[derive(Debug, Clone)]
pub struct KdTree {
    points: Vec<[f64; 3]>,
}

impl KdTree {
    pub fn new(mut points: Vec<[f64; 3]>) -> Self {
        let n = points.len();
        build(&mut points[..], 0);
        debug_assert_eq!(points.len(), n);
        KdTree { points }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Euclidean distance to the nearest stored point, `None` if empty.
    pub fn nearest_distance(&self, q: &[f64; 3]) -> Option<f64> {
        if self.points.is_empty() {
            return None;
        }
        let mut best = f64::INFINITY;
        search(&self.points, 0, q, &mut best);
        Some(best.sqrt())
    }
}

fn build(pts: &mut [[f64; 3]], depth: usize) {
    if pts.len() <= 1 {
        return;
    }
    let axis = depth % 3;
    let mid = pts.len() / 2;
    pts.select_nth_unstable_by(mid, |a, b| a[axis].total_cmp(&b[axis]));
    let (left, right) = pts.split_at_mut(mid);
    build(left, depth + 1);
    build(&mut right[1..], depth + 1);
}

fn sq_dist(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    (a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)
}

fn search(pts: &[[f64; 3]], depth: usize, q: &[f64; 3], best: &mut f64) {
    if pts.is_empty() {
        return;
    }
    let mid = pts.len() / 2;
    let node = &pts[mid];
    *best = best.min(sq_dist(node, q));
    let axis = depth % 3;
    let diff = q[axis] - node[axis];
    let (near, far) = if diff < 0.0 {
        (&pts[..mid], &pts[mid + 1..])
    } else {
        (&pts[mid + 1..], &pts[..mid])
    };
    search(near, depth + 1, q, best);
    if diff * diff < *best {
        search(far, depth + 1, q, best);
    }
}
