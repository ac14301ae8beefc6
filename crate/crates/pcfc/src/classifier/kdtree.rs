//! kd-tree k-nearest-neighbor search with an optional (1+ε) bound.
//!
//! Build is deterministic: nodes split the widest dimension of their bounding
//! box at the median, with coordinate ties broken by point index. Queries
//! prune a subtree only when its box distance, inflated by (1+ε), cannot beat
//! the current k-th candidate, which guarantees every reported i-th distance
//! is within a factor (1+ε) of the true i-th distance (exact for ε = 0).
//! Distance ties between points are broken toward the lower index.

use std::collections::BinaryHeap;

const LEAF_SIZE: usize = 8;

#[derive(Debug, Clone)]
enum Node {
    /// Children: left is the next node in the vector, right is `right`.
    Split { dim: u32, value: f64, right: u32 },
    Leaf { start: u32, len: u32 },
}

#[derive(Debug, Clone)]
pub struct KdTree {
    dim: usize,
    nodes: Vec<Node>,
    /// Point indices, permuted so each leaf owns a contiguous range.
    order: Vec<u32>,
}

/// Max-heap entry; "greater" means worse: larger distance, then larger index.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Candidate {
    dist2: f64,
    index: u32,
}

impl Eq for Candidate {}

impl Ord for Candidate {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.dist2
            .total_cmp(&other.dist2)
            .then(self.index.cmp(&other.index))
    }
}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl KdTree {
    /// Build over `n` points stored row-major in `coords` (`n × dim`).
    pub fn build(coords: &[f64], dim: usize) -> Self {
        assert!(dim > 0 && coords.len().is_multiple_of(dim));
        let n = coords.len() / dim;
        let mut order: Vec<u32> = (0..n as u32).collect();
        let mut nodes = Vec::new();
        if n > 0 {
            build_node(coords, dim, &mut order, 0, &mut nodes);
        }
        Self { dim, nodes, order }
    }

    /// Indices and squared distances of the k nearest points, ascending by
    /// (distance, index). `epsilon ≥ 0` allows approximate pruning.
    pub fn knn(&self, coords: &[f64], q: &[f64], k: usize, epsilon: f64) -> Vec<(u32, f64)> {
        debug_assert_eq!(q.len(), self.dim);
        let mut heap: BinaryHeap<Candidate> = BinaryHeap::with_capacity(k + 1);
        if k > 0 && !self.nodes.is_empty() {
            let inflation = (1.0 + epsilon) * (1.0 + epsilon);
            let mut offsets = vec![0.0f64; self.dim];
            self.search(coords, q, k, inflation, 0, 0.0, &mut offsets, &mut heap);
        }
        let mut out: Vec<(u32, f64)> = heap.into_iter().map(|c| (c.index, c.dist2)).collect();
        out.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
        out
    }

    #[allow(clippy::too_many_arguments)]
    fn search(
        &self,
        coords: &[f64],
        q: &[f64],
        k: usize,
        inflation: f64,
        node: usize,
        rd: f64,
        offsets: &mut [f64],
        heap: &mut BinaryHeap<Candidate>,
    ) {
        match self.nodes[node] {
            Node::Leaf { start, len } => {
                for &index in &self.order[start as usize..(start + len) as usize] {
                    let base = index as usize * self.dim;
                    let mut dist2 = 0.0;
                    for (qi, ci) in q.iter().zip(&coords[base..base + self.dim]) {
                        let d = qi - ci;
                        dist2 += d * d;
                    }
                    let cand = Candidate { dist2, index };
                    if heap.len() < k {
                        heap.push(cand);
                    } else if cand < *heap.peek().unwrap() {
                        heap.pop();
                        heap.push(cand);
                    }
                }
            }
            Node::Split { dim, value, right } => {
                let dim = dim as usize;
                let old_off = offsets[dim];
                let new_off = q[dim] - value;
                let (near, far) = if new_off < 0.0 {
                    (node + 1, right as usize)
                } else {
                    (right as usize, node + 1)
                };
                self.search(coords, q, k, inflation, near, rd, offsets, heap);
                let far_rd = rd - old_off * old_off + new_off * new_off;
                let worst = if heap.len() < k {
                    f64::INFINITY
                } else {
                    heap.peek().unwrap().dist2
                };
                if far_rd * inflation <= worst {
                    offsets[dim] = new_off;
                    self.search(coords, q, k, inflation, far, far_rd, offsets, heap);
                    offsets[dim] = old_off;
                }
            }
        }
    }
}

fn build_node(
    coords: &[f64],
    dim: usize,
    order: &mut [u32],
    base: u32,
    nodes: &mut Vec<Node>,
) -> usize {
    let pos = nodes.len();
    if order.len() <= LEAF_SIZE {
        nodes.push(Node::Leaf { start: base, len: order.len() as u32 });
        return pos;
    }
    // Widest dimension of this subset's bounding box.
    let mut split_dim = 0;
    let mut widest = -1.0f64;
    for d in 0..dim {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for &i in order.iter() {
            let v = coords[i as usize * dim + d];
            lo = lo.min(v);
            hi = hi.max(v);
        }
        if hi - lo > widest {
            widest = hi - lo;
            split_dim = d;
        }
    }
    order.sort_unstable_by(|&a, &b| {
        coords[a as usize * dim + split_dim]
            .total_cmp(&coords[b as usize * dim + split_dim])
            .then(a.cmp(&b))
    });
    let mid = order.len() / 2;
    let value = coords[order[mid] as usize * dim + split_dim];
    nodes.push(Node::Split { dim: split_dim as u32, value, right: 0 });
    let (left, right) = order.split_at_mut(mid);
    let left_pos = build_node(coords, dim, left, base, nodes);
    debug_assert_eq!(left_pos, pos + 1);
    let right_pos = build_node(coords, dim, right, base + mid as u32, nodes);
    if let Node::Split { right, .. } = &mut nodes[pos] {
        *right = right_pos as u32;
    }
    pos
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn flat(points: &[Vec<f64>]) -> Vec<f64> {
        points.iter().flatten().copied().collect()
    }

    fn brute_knn(points: &[Vec<f64>], q: &[f64], k: usize) -> Vec<(u32, f64)> {
        let mut all: Vec<(u32, f64)> = points
            .iter()
            .enumerate()
            .map(|(i, p)| {
                let d2: f64 = p.iter().zip(q).map(|(a, b)| (a - b) * (a - b)).sum();
                (i as u32, d2)
            })
            .collect();
        all.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
        all.truncate(k);
        all
    }

    fn random_cloud(n: usize, dim: usize, seed: u64) -> Vec<Vec<f64>> {
        let mut rng = crate::rng::stream(seed, "kdtree-test");
        (0..n)
            .map(|_| (0..dim).map(|_| rng.random_range(-100.0..100.0)).collect())
            .collect()
    }

    #[test]
    fn tiny_cloud_exact() {
        let points = vec![vec![0.0, 0.0], vec![3.0, 0.0], vec![0.0, 4.0]];
        let coords = flat(&points);
        let tree = KdTree::build(&coords, 2);
        let got = tree.knn(&coords, &[0.0, 0.0], 2, 0.0);
        assert_eq!(got[0], (0, 0.0));
        assert_eq!(got[1], (1, 9.0));
    }

    #[test]
    fn exact_search_matches_brute_force() {
        for (n, dim, seed) in [(1000, 4, 1u64), (500, 2, 2), (257, 4, 3)] {
            let points = random_cloud(n, dim, seed);
            let coords = flat(&points);
            let tree = KdTree::build(&coords, dim);
            let mut rng = crate::rng::stream(seed + 100, "kdtree-query");
            for _ in 0..200 {
                let q: Vec<f64> = (0..dim).map(|_| rng.random_range(-120.0..120.0)).collect();
                for k in [1usize, 4, 9] {
                    let got = tree.knn(&coords, &q, k, 0.0);
                    let want = brute_knn(&points, &q, k);
                    assert_eq!(got, want, "n={n} dim={dim} k={k}");
                }
            }
        }
    }

    #[test]
    fn approximate_search_respects_the_bound() {
        let eps = 0.5;
        let points = random_cloud(1000, 4, 9);
        let coords = flat(&points);
        let tree = KdTree::build(&coords, 4);
        let mut rng = crate::rng::stream(77, "kdtree-query");
        for _ in 0..200 {
            let q: Vec<f64> = (0..4).map(|_| rng.random_range(-120.0..120.0)).collect();
            let got = tree.knn(&coords, &q, 5, eps);
            let want = brute_knn(&points, &q, 5);
            for (g, w) in got.iter().zip(&want) {
                let (gd, wd) = (g.1.sqrt(), w.1.sqrt());
                assert!(
                    gd <= (1.0 + eps) * wd + 1e-12,
                    "reported {gd} vs true {wd}"
                );
            }
        }
    }

    #[test]
    fn distance_ties_prefer_lower_index() {
        // Four corners of a square, all equidistant from the center.
        let points = vec![
            vec![1.0, 1.0],
            vec![-1.0, 1.0],
            vec![-1.0, -1.0],
            vec![1.0, -1.0],
        ];
        let coords = flat(&points);
        let tree = KdTree::build(&coords, 2);
        let got = tree.knn(&coords, &[0.0, 0.0], 2, 0.0);
        assert_eq!(got.iter().map(|g| g.0).collect::<Vec<_>>(), vec![0, 1]);
    }

    #[test]
    fn exact_ties_across_the_split_plane_are_found() {
        // Duplicate coordinates force equal distances in different subtrees.
        let points = vec![
            vec![0.0, 0.0],
            vec![2.0, 0.0],
            vec![2.0, 0.0],
            vec![4.0, 0.0],
            vec![6.0, 0.0],
            vec![8.0, 0.0],
            vec![8.0, 0.0],
            vec![10.0, 0.0],
            vec![12.0, 0.0],
            vec![14.0, 0.0],
        ];
        let coords = flat(&points);
        let tree = KdTree::build(&coords, 2);
        let got = tree.knn(&coords, &[2.0, 0.0], 3, 0.0);
        let want = brute_knn(&points, &[2.0, 0.0], 3);
        assert_eq!(got, want);
    }
}
