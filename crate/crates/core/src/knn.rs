//! Exact k-nearest-neighbor queries over 3D points via a median-split
//! kd-tree. Results are identical to brute force, including tie handling.

use crate::geom::Point3;
use std::collections::BinaryHeap;

const LEAF_SIZE: usize = 16;

/// Neighbor candidate ordered by squared distance, then index, so equal
/// distances resolve to the lower point index (matching sorted brute force).
#[derive(Debug, Clone, Copy, PartialEq)]
struct Candidate {
    d2: f64,
    index: usize,
}

impl Eq for Candidate {}

impl Ord for Candidate {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.d2
            .total_cmp(&other.d2)
            .then(self.index.cmp(&other.index))
    }
}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

enum Node {
    Leaf {
        start: usize,
        end: usize,
    },
    Split {
        axis: usize,
        value: f64,
        left: usize,
        right: usize,
    },
}

/// Static kd-tree over a point slice; queries return indices into the
/// original slice.
pub struct KdTree3 {
    points: Vec<Point3>,
    /// Original indices, permuted so each node owns a contiguous range.
    order: Vec<usize>,
    nodes: Vec<Node>,
    root: usize,
}

fn coord(p: Point3, axis: usize) -> f64 {
    match axis {
        0 => p.x,
        1 => p.y,
        _ => p.z,
    }
}

impl KdTree3 {
    /// Builds a tree; `points` must be non-empty with finite coordinates.
    pub fn build(points: &[Point3]) -> Self {
        assert!(!points.is_empty(), "cannot build a kd-tree over no points");
        let mut tree = KdTree3 {
            points: points.to_vec(),
            order: (0..points.len()).collect(),
            nodes: Vec::new(),
            root: 0,
        };
        let n = points.len();
        tree.root = tree.build_range(0, n, 0);
        tree
    }

    fn build_range(&mut self, start: usize, end: usize, depth: usize) -> usize {
        if end - start <= LEAF_SIZE {
            self.nodes.push(Node::Leaf { start, end });
            return self.nodes.len() - 1;
        }
        let axis = depth % 3;
        let mid = start + (end - start) / 2;
        let points = &self.points;
        self.order[start..end].select_nth_unstable_by(mid - start, |&a, &b| {
            coord(points[a], axis)
                .total_cmp(&coord(points[b], axis))
                .then(a.cmp(&b))
        });
        let value = coord(self.points[self.order[mid]], axis);
        let left = self.build_range(start, mid, depth + 1);
        let right = self.build_range(mid, end, depth + 1);
        self.nodes.push(Node::Split {
            axis,
            value,
            left,
            right,
        });
        self.nodes.len() - 1
    }

    /// Indices of the `k` nearest points to `query`, sorted by (distance,
    /// index) ascending. A query at a stored point's position returns that
    /// point first. Requires `1 <= k <= len`.
    pub fn k_nearest(&self, query: Point3, k: usize) -> Vec<usize> {
        assert!(k >= 1 && k <= self.points.len(), "k out of range");
        let mut heap: BinaryHeap<Candidate> = BinaryHeap::with_capacity(k + 1);
        self.search(self.root, query, k, &mut heap);
        let mut out: Vec<Candidate> = heap.into_vec();
        out.sort_unstable();
        out.into_iter().map(|c| c.index).collect()
    }

    fn search(&self, node: usize, query: Point3, k: usize, heap: &mut BinaryHeap<Candidate>) {
        match self.nodes[node] {
            Node::Leaf { start, end } => {
                for &idx in &self.order[start..end] {
                    let d = self.points[idx] - query;
                    let cand = Candidate {
                        d2: d.dot(d),
                        index: idx,
                    };
                    if heap.len() < k {
                        heap.push(cand);
                    } else if cand < *heap.peek().expect("non-empty heap") {
                        heap.pop();
                        heap.push(cand);
                    }
                }
            }
            Node::Split {
                axis,
                value,
                left,
                right,
            } => {
                let q = coord(query, axis);
                let (near, far) = if q < value { (left, right) } else { (right, left) };
                self.search(near, query, k, heap);
                let gap = q - value;
                // Visit the far side unless every point there is strictly
                // worse than the current k-th candidate. Equal distances must
                // still be visited so index tie-breaking stays exact.
                let prune = heap.len() == k
                    && gap * gap > heap.peek().expect("full heap").d2;
                if !prune {
                    self.search(far, query, k, heap);
                }
            }
        }
    }
}

/// Reference implementation: full sort by (distance, index).
pub fn brute_force_k_nearest(points: &[Point3], query: Point3, k: usize) -> Vec<usize> {
    assert!(k >= 1 && k <= points.len(), "k out of range");
    let mut all: Vec<Candidate> = points
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let d = *p - query;
            Candidate {
                d2: d.dot(d),
                index: i,
            }
        })
        .collect();
    all.sort_unstable();
    all.truncate(k);
    all.into_iter().map(|c| c.index).collect()
}
