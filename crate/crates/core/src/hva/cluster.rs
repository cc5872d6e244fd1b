use std::cmp::Ordering;

use crate::gaze::FixationPoint;

/// Canonical point order used to make outputs independent of input order.
pub(crate) fn point_order(a: &FixationPoint, b: &FixationPoint) -> Ordering {
    a.onset_ms
        .total_cmp(&b.onset_ms)
        .then(a.x_px.total_cmp(&b.x_px))
        .then(a.y_px.total_cmp(&b.y_px))
        .then(a.duration_ms.total_cmp(&b.duration_ms))
}

struct DisjointSet {
    parent: Vec<usize>,
}

impl DisjointSet {
    fn new(n: usize) -> Self {
        Self {
            parent: (0..n).collect(),
        }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.parent[ra.max(rb)] = ra.min(rb);
        }
    }
}

/// Single-linkage clusters under `distance <= d_thr`, each sorted by
/// [`point_order`] and the list ordered by first member.
pub fn single_linkage(points: &[FixationPoint], d_thr: f64) -> Vec<Vec<FixationPoint>> {
    let mut sorted = points.to_vec();
    sorted.sort_by(point_order);
    let mut ds = DisjointSet::new(sorted.len());
    for i in 0..sorted.len() {
        for j in i + 1..sorted.len() {
            if sorted[i].distance(&sorted[j]) <= d_thr {
                ds.union(i, j);
            }
        }
    }
    let mut clusters: Vec<Vec<FixationPoint>> = Vec::new();
    let mut slot = vec![usize::MAX; sorted.len()];
    for i in 0..sorted.len() {
        let root = ds.find(i);
        if slot[root] == usize::MAX {
            slot[root] = clusters.len();
            clusters.push(Vec::new());
        }
        clusters[slot[root]].push(sorted[i]);
    }
    clusters
}

/// Split fixations into the main attention region (the cluster with the
/// largest total dwell; ties go to the cluster holding the earliest
/// fixation) and the union of all other clusters.
pub fn cluster_integration(
    points: &[FixationPoint],
    d_thr: f64,
) -> (Vec<FixationPoint>, Vec<FixationPoint>) {
    assert!(d_thr > 0.0, "d_thr must be positive");
    let clusters = single_linkage(points, d_thr);
    // Clusters are ordered by their earliest member, so the first maximum wins ties.
    let mut best: Option<(usize, f64)> = None;
    for (i, c) in clusters.iter().enumerate() {
        let dwell: f64 = c.iter().map(|p| p.duration_ms).sum();
        if best.map_or(true, |(_, d)| dwell > d) {
            best = Some((i, dwell));
        }
    }
    let Some((main_idx, _)) = best else {
        return (Vec::new(), Vec::new());
    };
    let mut main = Vec::new();
    let mut substitutes = Vec::new();
    for (i, c) in clusters.into_iter().enumerate() {
        if i == main_idx {
            main = c;
        } else {
            substitutes.extend(c);
        }
    }
    substitutes.sort_by(point_order);
    (main, substitutes)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pt(x: f64, y: f64, t: f64) -> FixationPoint {
        FixationPoint::new(x, y, t, 100.0)
    }

    #[test]
    fn empty_input() {
        assert_eq!(cluster_integration(&[], 10.0), (vec![], vec![]));
    }

    #[test]
    fn single_point_is_main() {
        let p = pt(3.0, 4.0, 0.0);
        assert_eq!(cluster_integration(&[p], 10.0), (vec![p], vec![]));
    }

    #[test]
    fn far_point_is_substitute() {
        let pts = [
            pt(0.0, 0.0, 0.0),
            pt(10.0, 0.0, 100.0),
            pt(200.0, 0.0, 200.0),
        ];
        let (main, subs) = cluster_integration(&pts, 50.0);
        assert_eq!(main, vec![pts[0], pts[1]]);
        assert_eq!(subs, vec![pts[2]]);
    }

    #[test]
    fn join_rule_is_inclusive() {
        let pts = [pt(0.0, 0.0, 0.0), pt(30.0, 40.0, 1.0)];
        let (main, subs) = cluster_integration(&pts, 50.0);
        assert_eq!(main.len(), 2);
        assert!(subs.is_empty());
    }

    #[test]
    fn equal_dwell_tie_goes_to_earliest() {
        let pts = [pt(500.0, 0.0, 50.0), pt(0.0, 0.0, 10.0)];
        let (main, subs) = cluster_integration(&pts, 5.0);
        assert_eq!(main, vec![pts[1]]);
        assert_eq!(subs, vec![pts[0]]);
    }

    #[test]
    fn longer_dwell_beats_more_points() {
        let pts = [
            pt(0.0, 0.0, 0.0),
            pt(1.0, 0.0, 1.0),
            FixationPoint::new(100.0, 100.0, 2.0, 500.0),
        ];
        let (main, _) = cluster_integration(&pts, 5.0);
        assert_eq!(main, vec![pts[2]]);
    }
}
