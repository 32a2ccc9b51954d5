use rayon::prelude::*;

use super::{Point3, PointCloud};
use crate::error::{Error, Result};

/// A query point matched to its nearest target point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pairing {
    pub src_index: usize,
    pub dst_index: usize,
    pub distance: f64,
}

const LEAF_SIZE: usize = 8;

#[inline]
fn dist2(a: &Point3, b: &Point3) -> f64 {
    let dx = a.x - b.x;
    let dy = a.y - b.y;
    let dz = a.z - b.z;
    dx * dx + dy * dy + dz * dz
}

/// Exact nearest-neighbour index over a borrowed point set.
///
/// Balanced median-split tree stored implicitly in a permutation of the
/// point indices. Queries return the lowest index among equidistant points,
/// so results match an exhaustive scan bit for bit.
#[derive(Debug)]
pub struct KdTree<'a> {
    points: &'a [Point3],
    order: Vec<usize>,
    // split axis for the node whose median sits at this position of `order`
    axes: Vec<u8>,
}

impl<'a> KdTree<'a> {
    pub fn build(points: &'a [Point3]) -> Self {
        let mut order: Vec<usize> = (0..points.len()).collect();
        let mut axes = vec![0u8; points.len()];
        build_node(points, &mut order, &mut axes, 0);
        Self { points, order, axes }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &'a [Point3] {
        self.points
    }

    /// Index and squared distance of the nearest point; `None` when empty.
    pub fn nearest(&self, q: &Point3) -> Option<(usize, f64)> {
        if self.points.is_empty() {
            return None;
        }
        let mut best = (usize::MAX, f64::INFINITY);
        self.search(q, 0, self.order.len(), &mut best);
        Some(best)
    }

    fn search(&self, q: &Point3, lo: usize, hi: usize, best: &mut (usize, f64)) {
        if hi - lo <= LEAF_SIZE {
            for &i in &self.order[lo..hi] {
                consider(best, i, dist2(q, &self.points[i]));
            }
            return;
        }
        let mid = lo + (hi - lo) / 2;
        let idx = self.order[mid];
        let axis = self.axes[mid] as usize;
        let split = self.points[idx][axis];
        consider(best, idx, dist2(q, &self.points[idx]));

        let diff = q[axis] - split;
        let (near, far) = if diff < 0.0 {
            ((lo, mid), (mid + 1, hi))
        } else {
            ((mid + 1, hi), (lo, mid))
        };
        self.search(q, near.0, near.1, best);
        // equal distances must still be visited for the index tie-break
        if diff * diff <= best.1 {
            self.search(q, far.0, far.1, best);
        }
    }
}

#[inline]
fn consider(best: &mut (usize, f64), idx: usize, d2: f64) {
    if d2 < best.1 || (d2 == best.1 && idx < best.0) {
        *best = (idx, d2);
    }
}

fn build_node(points: &[Point3], order: &mut [usize], axes: &mut [u8], offset: usize) {
    let n = order.len();
    if n <= LEAF_SIZE {
        return;
    }
    let mut min = [f64::INFINITY; 3];
    let mut max = [f64::NEG_INFINITY; 3];
    for &i in order.iter() {
        for a in 0..3 {
            min[a] = min[a].min(points[i][a]);
            max[a] = max[a].max(points[i][a]);
        }
    }
    let axis = (0..3)
        .max_by(|&a, &b| (max[a] - min[a]).total_cmp(&(max[b] - min[b])))
        .unwrap_or(0);
    let mid = n / 2;
    order.select_nth_unstable_by(mid, |&i, &j| points[i][axis].total_cmp(&points[j][axis]));
    axes[offset + mid] = axis as u8;
    let (left, rest) = order.split_at_mut(mid);
    build_node(points, left, axes, offset);
    build_node(points, &mut rest[1..], axes, offset + mid + 1);
}

/// One pairing per query point against its exact nearest target point.
pub fn nearest_neighbors(query: &PointCloud, target: &PointCloud) -> Result<Vec<Pairing>> {
    if target.is_empty() {
        return Err(Error::EmptyInput("nearest_neighbors: target has no points"));
    }
    let tree = KdTree::build(&target.points);
    Ok(pair_with_tree(&query.points, &tree))
}

pub(crate) fn pair_with_tree(query: &[Point3], tree: &KdTree<'_>) -> Vec<Pairing> {
    query
        .par_iter()
        .enumerate()
        .map(|(i, q)| {
            let (j, d2) = tree.nearest(q).expect("tree is non-empty");
            Pairing {
                src_index: i,
                dst_index: j,
                distance: d2.sqrt(),
            }
        })
        .collect()
}
