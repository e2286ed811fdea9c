//! Exact nearest-neighbour search over 3D points.
//!
//! Ties between equidistant candidates always resolve to the smallest input
//! index, so results match a linear scan exactly.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

pub struct KdTree {
    points: Vec<[f64; 3]>,
    // index permutation laid out as an implicit balanced tree over ranges
    order: Vec<u32>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Neighbour {
    pub index: usize,
    pub dist2: f64,
}

#[derive(PartialEq)]
struct HeapItem(f64, usize);

impl Eq for HeapItem {}

impl PartialOrd for HeapItem {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for HeapItem {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0
            .total_cmp(&other.0)
            .then_with(|| self.1.cmp(&other.1))
    }
}

#[inline]
fn dist2(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    let dz = a[2] - b[2];
    dx * dx + dy * dy + dz * dz
}

impl KdTree {
    pub fn new(points: Vec<[f64; 3]>) -> Self {
        let mut order: Vec<u32> = (0..points.len() as u32).collect();
        build(&points, &mut order, 0);
        Self { points, order }
    }

    pub fn from_integer(points: &[[u32; 3]]) -> Self {
        Self::new(
            points
                .iter()
                .map(|p| [p[0] as f64, p[1] as f64, p[2] as f64])
                .collect(),
        )
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn point(&self, index: usize) -> [f64; 3] {
        self.points[index]
    }

    /// Nearest point to `query`; `None` only for an empty tree.
    pub fn nearest(&self, query: &[f64; 3]) -> Option<Neighbour> {
        if self.points.is_empty() {
            return None;
        }
        let mut best = Neighbour {
            index: usize::MAX,
            dist2: f64::INFINITY,
        };
        self.nearest_in(0, self.order.len(), 0, query, &mut best);
        Some(best)
    }

    fn nearest_in(&self, lo: usize, hi: usize, depth: usize, q: &[f64; 3], best: &mut Neighbour) {
        if lo >= hi {
            return;
        }
        let mid = lo + (hi - lo) / 2;
        let idx = self.order[mid] as usize;
        let p = &self.points[idx];
        let d = dist2(p, q);
        if d < best.dist2 || (d == best.dist2 && idx < best.index) {
            *best = Neighbour { index: idx, dist2: d };
        }
        let axis = depth % 3;
        let diff = q[axis] - p[axis];
        let (first, second) = if diff < 0.0 {
            ((lo, mid), (mid + 1, hi))
        } else {
            ((mid + 1, hi), (lo, mid))
        };
        self.nearest_in(first.0, first.1, depth + 1, q, best);
        if diff * diff <= best.dist2 {
            self.nearest_in(second.0, second.1, depth + 1, q, best);
        }
    }

    /// The `k` nearest points ordered by (distance, index).
    pub fn knn(&self, query: &[f64; 3], k: usize) -> Vec<Neighbour> {
        if k == 0 || self.points.is_empty() {
            return Vec::new();
        }
        let mut heap = BinaryHeap::with_capacity(k + 1);
        self.knn_in(0, self.order.len(), 0, query, k, &mut heap);
        let mut out: Vec<Neighbour> = heap
            .into_iter()
            .map(|HeapItem(d, i)| Neighbour { index: i, dist2: d })
            .collect();
        out.sort_by(|a, b| a.dist2.total_cmp(&b.dist2).then(a.index.cmp(&b.index)));
        out
    }

    fn knn_in(
        &self,
        lo: usize,
        hi: usize,
        depth: usize,
        q: &[f64; 3],
        k: usize,
        heap: &mut BinaryHeap<HeapItem>,
    ) {
        if lo >= hi {
            return;
        }
        let mid = lo + (hi - lo) / 2;
        let idx = self.order[mid] as usize;
        let p = &self.points[idx];
        let item = HeapItem(dist2(p, q), idx);
        if heap.len() < k {
            heap.push(item);
        } else if item < *heap.peek().unwrap() {
            heap.pop();
            heap.push(item);
        }
        let axis = depth % 3;
        let diff = q[axis] - p[axis];
        let (first, second) = if diff < 0.0 {
            ((lo, mid), (mid + 1, hi))
        } else {
            ((mid + 1, hi), (lo, mid))
        };
        self.knn_in(first.0, first.1, depth + 1, q, k, heap);
        let worst = if heap.len() < k {
            f64::INFINITY
        } else {
            heap.peek().unwrap().0
        };
        if diff * diff <= worst {
            self.knn_in(second.0, second.1, depth + 1, q, k, heap);
        }
    }
}

fn build(points: &[[f64; 3]], order: &mut [u32], depth: usize) {
    if order.len() <= 1 {
        return;
    }
    let axis = depth % 3;
    let mid = order.len() / 2;
    order.select_nth_unstable_by(mid, |&a, &b| {
        points[a as usize][axis]
            .total_cmp(&points[b as usize][axis])
            .then(a.cmp(&b))
    });
    let (left, right) = order.split_at_mut(mid);
    build(points, left, depth + 1);
    build(points, &mut right[1..], depth + 1);
}
