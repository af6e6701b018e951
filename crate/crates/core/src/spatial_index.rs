//! Static 2-D k-d tree over planar points.
//!
//! Supports fixed-radius queries (distance-band weights) and k-nearest queries
//! with tie inclusion (IDW neighbourhoods). All comparisons use squared
//! distances computed by [`PlanarPoint::dist2`], so results agree exactly with
//! a brute-force scan using the same predicate.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::geo::PlanarPoint;

#[derive(Debug, Clone)]
pub struct KdTree {
    points: Vec<PlanarPoint>,
    // Implicit balanced tree: the node of a subrange [lo, hi) is at its
    // midpoint, split axis alternates with depth starting at x.
    order: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Candidate {
    dist2: f64,
    index: usize,
}

impl Eq for Candidate {}

impl Ord for Candidate {
    fn cmp(&self, other: &Self) -> Ordering {
        self.dist2.total_cmp(&other.dist2).then(self.index.cmp(&other.index))
    }
}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

#[inline]
fn coord(p: &PlanarPoint, axis: usize) -> f64 {
    if axis == 0 {
        p.x
    } else {
        p.y
    }
}

impl KdTree {
    pub fn build(points: &[PlanarPoint]) -> Self {
        let points = points.to_vec();
        let mut order: Vec<usize> = (0..points.len()).collect();
        Self::build_range(&points, &mut order, 0);
        Self { points, order }
    }

    fn build_range(points: &[PlanarPoint], order: &mut [usize], depth: usize) {
        if order.len() <= 1 {
            return;
        }
        let axis = depth % 2;
        let mid = order.len() / 2;
        order.select_nth_unstable_by(mid, |&a, &b| {
            coord(&points[a], axis)
                .total_cmp(&coord(&points[b], axis))
                .then(a.cmp(&b))
        });
        let (left, rest) = order.split_at_mut(mid);
        Self::build_range(points, left, depth + 1);
        Self::build_range(points, &mut rest[1..], depth + 1);
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn point(&self, index: usize) -> PlanarPoint {
        self.points[index]
    }

    /// Indices of all points with `dist2(q, p) <= radius2`, ascending.
    pub fn within(&self, q: PlanarPoint, radius2: f64) -> Vec<usize> {
        let mut out = Vec::new();
        self.within_range(q, radius2, 0, self.order.len(), 0, &mut out);
        out.sort_unstable();
        out
    }

    fn within_range(&self, q: PlanarPoint, radius2: f64, lo: usize, hi: usize, depth: usize, out: &mut Vec<usize>) {
        if lo >= hi {
            return;
        }
        let mid = lo + (hi - lo) / 2;
        let idx = self.order[mid];
        let node = self.points[idx];
        if q.dist2(&node) <= radius2 {
            out.push(idx);
        }
        let axis = depth % 2;
        let diff = coord(&q, axis) - coord(&node, axis);
        let (near, far) = if diff < 0.0 {
            ((lo, mid), (mid + 1, hi))
        } else {
            ((mid + 1, hi), (lo, mid))
        };
        self.within_range(q, radius2, near.0, near.1, depth + 1, out);
        if diff * diff <= radius2 {
            self.within_range(q, radius2, far.0, far.1, depth + 1, out);
        }
    }

    /// The `k` nearest points as `(index, dist2)`, ordered by distance then
    /// index.
    pub fn nearest(&self, q: PlanarPoint, k: usize) -> Vec<(usize, f64)> {
        if k == 0 {
            return Vec::new();
        }
        let mut heap = BinaryHeap::with_capacity(k + 1);
        self.nearest_range(q, k, 0, self.order.len(), 0, &mut heap);
        let mut found: Vec<Candidate> = heap.into_vec();
        found.sort_unstable();
        found.into_iter().map(|c| (c.index, c.dist2)).collect()
    }

    fn nearest_range(
        &self,
        q: PlanarPoint,
        k: usize,
        lo: usize,
        hi: usize,
        depth: usize,
        heap: &mut BinaryHeap<Candidate>,
    ) {
        if lo >= hi {
            return;
        }
        let mid = lo + (hi - lo) / 2;
        let idx = self.order[mid];
        let node = self.points[idx];
        let cand = Candidate {
            dist2: q.dist2(&node),
            index: idx,
        };
        if heap.len() < k {
            heap.push(cand);
        } else if let Some(worst) = heap.peek() {
            if cand < *worst {
                heap.pop();
                heap.push(cand);
            }
        }
        let axis = depth % 2;
        let diff = coord(&q, axis) - coord(&node, axis);
        let (near, far) = if diff < 0.0 {
            ((lo, mid), (mid + 1, hi))
        } else {
            ((mid + 1, hi), (lo, mid))
        };
        self.nearest_range(q, k, near.0, near.1, depth + 1, heap);
        let worst = heap.peek().map_or(f64::INFINITY, |c| c.dist2);
        if heap.len() < k || diff * diff <= worst {
            self.nearest_range(q, k, far.0, far.1, depth + 1, heap);
        }
    }

    /// The `k` nearest points plus every point tied with the k-th distance,
    /// restricted to `dist2 <= max_radius2`. Ordered by distance then index.
    pub fn nearest_with_ties(&self, q: PlanarPoint, k: usize, max_radius2: f64) -> Vec<(usize, f64)> {
        let nearest = self.nearest(q, k);
        let Some(&(_, kth)) = nearest.last() else {
            return Vec::new();
        };
        let cutoff = if nearest.len() < k {
            max_radius2
        } else {
            kth.min(max_radius2)
        };
        let mut out: Vec<(usize, f64)> = self
            .within(q, cutoff)
            .into_iter()
            .map(|i| (i, q.dist2(&self.points[i])))
            .collect();
        out.sort_unstable_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn brute_within(points: &[PlanarPoint], q: PlanarPoint, r2: f64) -> Vec<usize> {
        (0..points.len()).filter(|&i| q.dist2(&points[i]) <= r2).collect()
    }

    #[test]
    fn empty_tree() {
        let t = KdTree::build(&[]);
        assert!(t.is_empty());
        assert!(t.within(PlanarPoint::new(0.0, 0.0), 10.0).is_empty());
        assert!(t.nearest(PlanarPoint::new(0.0, 0.0), 3).is_empty());
    }

    #[test]
    fn lattice_ties_are_kept() {
        // 3×3 unit lattice, query at centre: 1 at d=0, 4 at d=1, 4 at d=√2
        let pts: Vec<_> = (0..9)
            .map(|i| PlanarPoint::new((i % 3) as f64, (i / 3) as f64))
            .collect();
        let t = KdTree::build(&pts);
        let q = PlanarPoint::new(1.0, 1.0);
        assert_eq!(t.nearest_with_ties(q, 2, f64::INFINITY).len(), 5);
        assert_eq!(t.nearest_with_ties(q, 6, f64::INFINITY).len(), 9);
        assert_eq!(t.nearest_with_ties(q, 6, 1.0).len(), 5);
        assert_eq!(t.nearest(q, 1), vec![(4, 0.0)]);
    }

    proptest! {
        #[test]
        fn within_matches_brute_force(
            pts in prop::collection::vec((-100.0..100.0f64, -100.0..100.0f64), 0..200),
            qx in -120.0..120.0f64, qy in -120.0..120.0f64, r in 0.0..80.0f64,
        ) {
            let pts: Vec<_> = pts.into_iter().map(|(x, y)| PlanarPoint::new(x, y)).collect();
            let t = KdTree::build(&pts);
            let q = PlanarPoint::new(qx, qy);
            prop_assert_eq!(t.within(q, r * r), brute_within(&pts, q, r * r));
        }

        #[test]
        fn nearest_matches_brute_force(
            pts in prop::collection::vec((-20i32..20, -20i32..20), 1..150),
            qx in -25i32..25, qy in -25i32..25, k in 1usize..20,
        ) {
            // integer coordinates provoke many exact ties
            let pts: Vec<_> = pts.into_iter().map(|(x, y)| PlanarPoint::new(x as f64, y as f64)).collect();
            let t = KdTree::build(&pts);
            let q = PlanarPoint::new(qx as f64, qy as f64);
            let mut all: Vec<(usize, f64)> = (0..pts.len()).map(|i| (i, q.dist2(&pts[i]))).collect();
            all.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
            let want: Vec<_> = all.iter().copied().take(k).collect();
            prop_assert_eq!(t.nearest(q, k), want);

            let kth = all[k.min(all.len()) - 1].1;
            let tied: Vec<_> = all.iter().copied().filter(|c| c.1 <= kth).collect();
            prop_assert_eq!(t.nearest_with_ties(q, k, f64::INFINITY), tied);
        }
    }
}
