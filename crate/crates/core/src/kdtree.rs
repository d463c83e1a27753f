//! A static kd-tree over row-major points with range and nearest-neighbour
//! queries.

use alloc::vec::Vec;

const LEAF_SIZE: usize = 16;

#[derive(Debug, Clone)]
struct Node {
    start: usize,
    end: usize,
    left: u32,
    right: u32,
}

const NONE: u32 = u32::MAX;

/// Balanced kd-tree. Point indices refer to the slice it was built from.
#[derive(Debug, Clone)]
pub struct KdTree {
    d: usize,
    points: Vec<f64>,
    index: Vec<usize>,
    nodes: Vec<Node>,
    /// Per node: `d` lower then `d` upper bounding-box corners.
    bbox: Vec<f64>,
}

impl KdTree {
    /// Build from `n*d` row-major coordinates.
    pub fn build(data: &[f64], d: usize) -> Self {
        assert!(d > 0 && data.len().is_multiple_of(d));
        let n = data.len() / d;
        let mut tree = KdTree {
            d,
            points: data.to_vec(),
            index: (0..n).collect(),
            nodes: Vec::new(),
            bbox: Vec::new(),
        };
        if n > 0 {
            tree.build_node(0, n);
        }
        tree
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn len(&self) -> usize {
        self.index.len()
    }

    pub fn is_empty(&self) -> bool {
        self.index.is_empty()
    }

    #[inline]
    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i * self.d..(i + 1) * self.d]
    }

    fn build_node(&mut self, start: usize, end: usize) -> u32 {
        let d = self.d;
        let mut lo = alloc::vec![f64::INFINITY; d];
        let mut hi = alloc::vec![f64::NEG_INFINITY; d];
        for &i in &self.index[start..end] {
            let p = &self.points[i * d..(i + 1) * d];
            for k in 0..d {
                lo[k] = lo[k].min(p[k]);
                hi[k] = hi[k].max(p[k]);
            }
        }
        let id = self.nodes.len() as u32;
        let mut split_dim = 0;
        let mut spread = -1.0;
        for k in 0..d {
            if hi[k] - lo[k] > spread {
                spread = hi[k] - lo[k];
                split_dim = k;
            }
        }
        self.nodes.push(Node { start, end, left: NONE, right: NONE });
        self.bbox.extend_from_slice(&lo);
        self.bbox.extend_from_slice(&hi);
        if end - start <= LEAF_SIZE || spread <= 0.0 {
            return id;
        }
        let mid = start + (end - start) / 2;
        let pts = &self.points;
        self.index[start..end].select_nth_unstable_by(mid - start, |&a, &b| {
            pts[a * d + split_dim].total_cmp(&pts[b * d + split_dim]).then(a.cmp(&b))
        });
        let left = self.build_node(start, mid);
        let right = self.build_node(mid, end);
        self.nodes[id as usize].left = left;
        self.nodes[id as usize].right = right;
        id
    }

    #[inline]
    fn bounds(&self, id: u32) -> (&[f64], &[f64]) {
        let d = self.d;
        let b = &self.bbox[2 * d * id as usize..2 * d * (id as usize + 1)];
        b.split_at(d)
    }

    #[inline]
    fn min_dist2(&self, id: u32, q: &[f64]) -> f64 {
        let (lo, hi) = self.bounds(id);
        let mut s = 0.0;
        for k in 0..q.len() {
            let v = (lo[k] - q[k]).max(q[k] - hi[k]).max(0.0);
            s += v * v;
        }
        s
    }

    #[inline]
    fn max_dist2(&self, id: u32, q: &[f64]) -> f64 {
        let (lo, hi) = self.bounds(id);
        let mut s = 0.0;
        for k in 0..q.len() {
            let v = (q[k] - lo[k]).abs().max((hi[k] - q[k]).abs());
            s += v * v;
        }
        s
    }

    /// True if every point lies within squared distance `r2` of `q`.
    pub fn covers_all(&self, q: &[f64], r2: f64) -> bool {
        self.nodes.is_empty() || self.max_dist2(0, q) <= r2
    }

    /// Visit every point with squared distance `<= r2` from `q`, passing
    /// `(index, squared distance)`. Visiting order is deterministic.
    pub fn for_each_within<F: FnMut(usize, f64)>(&self, q: &[f64], r2: f64, mut f: F) {
        if self.nodes.is_empty() {
            return;
        }
        let mut stack: Vec<u32> = Vec::with_capacity(64);
        stack.push(0);
        while let Some(id) = stack.pop() {
            if self.min_dist2(id, q) > r2 {
                continue;
            }
            let node = &self.nodes[id as usize];
            if node.left == NONE {
                for &i in &self.index[node.start..node.end] {
                    let dist2 = sq_dist(self.point(i), q);
                    if dist2 <= r2 {
                        f(i, dist2);
                    }
                }
            } else {
                stack.push(node.right);
                stack.push(node.left);
            }
        }
    }

    /// Nearest point to `q` other than `exclude`, as `(index, squared distance)`.
    pub fn nearest(&self, q: &[f64], exclude: Option<usize>) -> Option<(usize, f64)> {
        if self.nodes.is_empty() {
            return None;
        }
        let mut best = (usize::MAX, f64::INFINITY);
        self.nearest_rec(0, q, exclude, &mut best);
        (best.0 != usize::MAX).then_some(best)
    }

    fn nearest_rec(&self, id: u32, q: &[f64], exclude: Option<usize>, best: &mut (usize, f64)) {
        let node = &self.nodes[id as usize];
        if node.left == NONE {
            for &i in &self.index[node.start..node.end] {
                if Some(i) == exclude {
                    continue;
                }
                let dist2 = sq_dist(self.point(i), q);
                if dist2 < best.1 || (dist2 == best.1 && i < best.0) {
                    *best = (i, dist2);
                }
            }
            return;
        }
        let (dl, dr) = (self.min_dist2(node.left, q), self.min_dist2(node.right, q));
        let (first, df, second, ds) =
            if dl <= dr { (node.left, dl, node.right, dr) } else { (node.right, dr, node.left, dl) };
        if df <= best.1 {
            self.nearest_rec(first, q, exclude, best);
        }
        if ds <= best.1 {
            self.nearest_rec(second, q, exclude, best);
        }
    }
}

#[inline]
pub(crate) fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Stream;

    fn cloud(n: usize, d: usize, seed: u64) -> Vec<f64> {
        let mut rng = Stream::new(seed).rng();
        (0..n * d).map(|_| rng.normal()).collect()
    }

    #[test]
    fn nearest_matches_brute_force() {
        for &d in &[1usize, 3, 8] {
            let data = cloud(500, d, d as u64);
            let tree = KdTree::build(&data, d);
            for i in 0..500 {
                let q = &data[i * d..(i + 1) * d];
                let (j, dist2) = tree.nearest(q, Some(i)).unwrap();
                let mut best = (usize::MAX, f64::INFINITY);
                for k in 0..500 {
                    if k == i {
                        continue;
                    }
                    let s = sq_dist(&data[k * d..(k + 1) * d], q);
                    if s < best.1 {
                        best = (k, s);
                    }
                }
                assert_eq!(dist2, best.1);
                assert_eq!(j, best.0);
            }
        }
    }

    #[test]
    fn range_matches_brute_force() {
        let d = 4;
        let data = cloud(800, d, 9);
        let tree = KdTree::build(&data, d);
        let q = [0.3, -0.2, 0.1, 0.0];
        let mut got = Vec::new();
        tree.for_each_within(&q, 1.5, |i, _| got.push(i));
        got.sort_unstable();
        let want: Vec<usize> =
            (0..800).filter(|&k| sq_dist(&data[k * d..(k + 1) * d], &q) <= 1.5).collect();
        assert_eq!(got, want);
        assert!(!tree.covers_all(&q, 1.5));
        assert!(tree.covers_all(&q, 1e6));
    }

    #[test]
    fn duplicates_do_not_break_build() {
        let data = alloc::vec![1.0; 100];
        let tree = KdTree::build(&data, 2);
        assert_eq!(tree.len(), 50);
        assert_eq!(tree.nearest(&[1.0, 1.0], Some(0)).unwrap().1, 0.0);
    }
}
