//! Chebyshev-metric neighbour search: a k-d tree with bounding-box pruning
//! and a brute-force scan for high-dimensional blocks.

const LEAF_SIZE: usize = 16;

struct Node {
    lo: usize,
    hi: usize,
    children: Option<(usize, usize)>,
}

pub(crate) struct KdTree {
    dim: usize,
    /// Points reordered so that every node owns a contiguous range.
    points: Vec<f64>,
    ids: Vec<usize>,
    nodes: Vec<Node>,
    /// Per node: `dim` lower bounds followed by `dim` upper bounds.
    bounds: Vec<f64>,
}

/// Chebyshev distance, abandoned once it reaches `limit`.
#[inline]
fn chebyshev_below(a: &[f64], b: &[f64], limit: f64) -> Option<f64> {
    let mut m: f64 = 0.0;
    for (x, y) in a.iter().zip(b) {
        m = m.max((x - y).abs());
        if m >= limit {
            return None;
        }
    }
    Some(m)
}

/// Keeps the `k` smallest distances seen, sorted ascending.
struct Best {
    d: Vec<f64>,
}

impl Best {
    fn new(k: usize) -> Self {
        Self { d: vec![f64::INFINITY; k] }
    }

    fn worst(&self) -> f64 {
        *self.d.last().unwrap()
    }

    fn push(&mut self, dist: f64) {
        if dist < self.worst() {
            let at = self.d.partition_point(|&x| x <= dist);
            self.d.pop();
            self.d.insert(at, dist);
        }
    }
}

impl KdTree {
    /// Builds over `n = points.len() / dim` row-major points.
    pub fn new(points: &[f64], dim: usize) -> Self {
        let n = points.len() / dim;
        let mut ids: Vec<usize> = (0..n).collect();
        let mut nodes = Vec::new();
        let mut bounds = Vec::new();
        build(points, dim, &mut ids, 0, n, &mut nodes, &mut bounds);
        let reordered = ids.iter().flat_map(|&i| points[i * dim..(i + 1) * dim].iter().copied()).collect();
        Self { dim, points: reordered, ids, nodes, bounds }
    }

    fn point(&self, slot: usize) -> &[f64] {
        &self.points[slot * self.dim..(slot + 1) * self.dim]
    }

    /// Distances from `q` to the nearest and farthest point of a node's box.
    fn box_range(&self, node: usize, q: &[f64]) -> (f64, f64) {
        let b = &self.bounds[node * 2 * self.dim..(node + 1) * 2 * self.dim];
        let (lo, hi) = b.split_at(self.dim);
        let mut near: f64 = 0.0;
        let mut far: f64 = 0.0;
        for d in 0..self.dim {
            near = near.max(lo[d] - q[d]).max(q[d] - hi[d]);
            far = far.max((q[d] - lo[d]).abs()).max((hi[d] - q[d]).abs());
        }
        (near, far)
    }

    /// Distance to the `k`-th nearest point other than point `skip`.
    pub fn kth_distance(&self, q: &[f64], skip: usize, k: usize) -> f64 {
        let mut best = Best::new(k);
        let mut stack = vec![0];
        while let Some(node) = stack.pop() {
            if self.box_range(node, q).0 >= best.worst() {
                continue;
            }
            match self.nodes[node].children {
                Some((l, r)) => {
                    let (dl, dr) = (self.box_range(l, q).0, self.box_range(r, q).0);
                    if dl <= dr {
                        stack.extend([r, l]);
                    } else {
                        stack.extend([l, r]);
                    }
                }
                None => {
                    for slot in self.nodes[node].lo..self.nodes[node].hi {
                        if self.ids[slot] != skip {
                            if let Some(d) = chebyshev_below(q, self.point(slot), best.worst()) {
                                best.push(d);
                            }
                        }
                    }
                }
            }
        }
        best.worst()
    }

    /// Number of points strictly closer than `r` to `q` (including `q` itself
    /// if it is one of the points).
    pub fn count_within(&self, q: &[f64], r: f64) -> usize {
        let mut count = 0;
        let mut stack = vec![0];
        while let Some(node) = stack.pop() {
            let (near, far) = self.box_range(node, q);
            if near >= r {
                continue;
            }
            let n = &self.nodes[node];
            if far < r {
                count += n.hi - n.lo;
                continue;
            }
            match n.children {
                Some((l, rr)) => stack.extend([l, rr]),
                None => {
                    count += (n.lo..n.hi).filter(|&s| chebyshev_below(q, self.point(s), r).is_some()).count();
                }
            }
        }
        count
    }
}

fn build(
    points: &[f64],
    dim: usize,
    ids: &mut [usize],
    lo: usize,
    hi: usize,
    nodes: &mut Vec<Node>,
    bounds: &mut Vec<f64>,
) -> usize {
    let me = nodes.len();
    nodes.push(Node { lo, hi, children: None });
    let mut lower = vec![f64::INFINITY; dim];
    let mut upper = vec![f64::NEG_INFINITY; dim];
    for &i in &ids[lo..hi] {
        for d in 0..dim {
            let v = points[i * dim + d];
            lower[d] = lower[d].min(v);
            upper[d] = upper[d].max(v);
        }
    }
    let (split, spread) = (0..dim)
        .map(|d| (d, upper[d] - lower[d]))
        .fold((0, -1.0), |a, b| if b.1 > a.1 { b } else { a });
    bounds.extend(lower);
    bounds.extend(upper);
    if hi - lo > LEAF_SIZE && spread > 0.0 {
        let mid = (hi - lo) / 2;
        ids[lo..hi].select_nth_unstable_by(mid, |&a, &b| {
            points[a * dim + split].total_cmp(&points[b * dim + split])
        });
        let l = build(points, dim, ids, lo, lo + mid, nodes, bounds);
        let r = build(points, dim, ids, lo + mid, hi, nodes, bounds);
        nodes[me].children = Some((l, r));
    }
    me
}

/// Neighbour index over one coordinate block.
pub(crate) enum NeighborIndex<'a> {
    Tree(KdTree),
    Brute { points: &'a [f64], dim: usize },
}

impl<'a> NeighborIndex<'a> {
    pub fn new(points: &'a [f64], dim: usize, brute_force_above: usize) -> Self {
        if dim > brute_force_above {
            NeighborIndex::Brute { points, dim }
        } else {
            NeighborIndex::Tree(KdTree::new(points, dim))
        }
    }

    pub fn kth_distance(&self, q: &[f64], skip: usize, k: usize) -> f64 {
        match self {
            NeighborIndex::Tree(t) => t.kth_distance(q, skip, k),
            NeighborIndex::Brute { points, dim } => {
                let mut best = Best::new(k);
                for (j, p) in points.chunks_exact(*dim).enumerate() {
                    if j != skip {
                        if let Some(d) = chebyshev_below(q, p, best.worst()) {
                            best.push(d);
                        }
                    }
                }
                best.worst()
            }
        }
    }

    pub fn count_within(&self, q: &[f64], r: f64) -> usize {
        match self {
            NeighborIndex::Tree(t) => t.count_within(q, r),
            NeighborIndex::Brute { points, dim } => {
                points.chunks_exact(*dim).filter(|p| chebyshev_below(q, p, r).is_some()).count()
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn chebyshev(a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).fold(0.0, |m, (x, y)| f64::max(m, (x - y).abs()))
    }

    fn brute_kth(points: &[f64], dim: usize, i: usize, k: usize) -> f64 {
        let q = &points[i * dim..(i + 1) * dim];
        let mut d: Vec<f64> = points
            .chunks_exact(dim)
            .enumerate()
            .filter(|(j, _)| *j != i)
            .map(|(_, p)| chebyshev(q, p))
            .collect();
        d.sort_by(f64::total_cmp);
        d[k - 1]
    }

    proptest! {
        #[test]
        fn tree_matches_brute_force(
            dim in 1usize..5,
            raw in prop::collection::vec(-3.0f64..3.0, 40..400),
            k in 1usize..6,
        ) {
            let n = raw.len() / dim;
            prop_assume!(n > k);
            let pts = &raw[..n * dim];
            let tree = KdTree::new(pts, dim);
            for i in (0..n).step_by(7) {
                let q = &pts[i * dim..(i + 1) * dim];
                let want = brute_kth(pts, dim, i, k);
                prop_assert_eq!(tree.kth_distance(q, i, k), want);
                let strict = pts.chunks_exact(dim).filter(|p| chebyshev(q, p) < want).count();
                prop_assert_eq!(tree.count_within(q, want), strict);
            }
        }
    }

    #[test]
    fn duplicate_points_have_zero_radius() {
        let pts = vec![0.5; 40];
        let tree = KdTree::new(&pts, 2);
        assert_eq!(tree.kth_distance(&[0.5, 0.5], 0, 3), 0.0);
        assert_eq!(tree.count_within(&[0.5, 0.5], 1e-3), 20);
    }

    #[test]
    fn brute_and_tree_agree_on_grid() {
        let pts: Vec<f64> = (0..100).flat_map(|i| [(i % 10) as f64, (i / 10) as f64]).collect();
        let tree = NeighborIndex::new(&pts, 2, 30);
        let brute = NeighborIndex::new(&pts, 2, 1);
        for i in [0, 45, 99] {
            let q = &pts[2 * i..2 * i + 2];
            assert_eq!(tree.kth_distance(q, i, 8), brute.kth_distance(q, i, 8));
            assert_eq!(tree.count_within(q, 1.5), brute.count_within(q, 1.5));
        }
    }
}
