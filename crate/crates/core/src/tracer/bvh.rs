//! Binned-SAH bounding volume hierarchy over a flat triangle list.

use alloc::vec;
use alloc::vec::Vec;

use super::intersect::ShearedRay;
use crate::geometry::{Aabb, Vec3};

const BINS: usize = 12;
const LEAF_SIZE: usize = 4;
/// Relative distance difference below which two hits count as a tie.
const TIE_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy)]
struct Node {
    bounds: Aabb,
    /// Leaf: first index into `order`. Interior: index of the left child
    /// (right child is `left + 1`).
    first: u32,
    /// Number of triangles for a leaf, zero for interior nodes.
    count: u32,
}

/// Nearest hit found by [`Bvh::nearest`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RawHit {
    pub t: f64,
    pub face: u32,
    pub barycentric: [f64; 3],
}

#[derive(Debug, Clone)]
pub struct Bvh {
    nodes: Vec<Node>,
    order: Vec<u32>,
}

impl Bvh {
    pub fn build(triangles: &[[Vec3; 3]]) -> Bvh {
        let n = triangles.len();
        let mut order: Vec<u32> = (0..n as u32).collect();
        let centroids: Vec<Vec3> = triangles.iter().map(|t| (t[0] + t[1] + t[2]) / 3.0).collect();
        let bounds: Vec<Aabb> = triangles
            .iter()
            .map(|t| {
                let mut b = Aabb::EMPTY;
                t.iter().for_each(|&p| b.grow(p));
                b
            })
            .collect();
        let mut nodes = Vec::with_capacity(2 * n.max(1));
        nodes.push(Node {
            bounds: Aabb::EMPTY,
            first: 0,
            count: n as u32,
        });
        if n > 0 {
            let mut stack = vec![(0usize, 0usize, n)];
            while let Some((node, start, end)) = stack.pop() {
                let mut nb = Aabb::EMPTY;
                let mut cb = Aabb::EMPTY;
                for &i in &order[start..end] {
                    nb = nb.union(&bounds[i as usize]);
                    cb.grow(centroids[i as usize]);
                }
                nodes[node].bounds = nb;
                let count = end - start;
                let split = if count <= LEAF_SIZE {
                    None
                } else {
                    split_sah(&mut order[start..end], &centroids, &bounds, &cb, &nb)
                };
                match split {
                    Some(mid) => {
                        let left = nodes.len();
                        nodes[node].first = left as u32;
                        nodes[node].count = 0;
                        for _ in 0..2 {
                            nodes.push(Node {
                                bounds: Aabb::EMPTY,
                                first: 0,
                                count: 0,
                            });
                        }
                        stack.push((left + 1, start + mid, end));
                        stack.push((left, start, start + mid));
                    }
                    None => {
                        nodes[node].first = start as u32;
                        nodes[node].count = count as u32;
                    }
                }
            }
        }
        Bvh { nodes, order }
    }

    /// Nearest hit in `(t_min, t_max)`; equal distances resolve to the
    /// lowest face id.
    pub fn nearest(&self, tris: &[[Vec3; 3]], ray: &ShearedRay, t_min: f64, t_max: f64) -> Option<RawHit> {
        if self.order.is_empty() {
            return None;
        }
        let mut best: Option<RawHit> = None;
        let mut limit = t_max;
        let mut stack: Vec<u32> = Vec::with_capacity(64);
        stack.push(0);
        while let Some(ni) = stack.pop() {
            let node = &self.nodes[ni as usize];
            let reach = limit * (1.0 + TIE_TOLERANCE) + TIE_TOLERANCE;
            if node.bounds.ray_entry(ray.origin, ray.inv_dir, t_min, reach).is_none() {
                continue;
            }
            if node.count > 0 {
                let s = node.first as usize;
                for &face in &self.order[s..s + node.count as usize] {
                    if let Some((t, bary)) = ray.intersect(&tris[face as usize], t_min, reach) {
                        let better = match best {
                            None => true,
                            Some(b) => {
                                let tol = TIE_TOLERANCE * b.t.abs().max(1.0);
                                t < b.t - tol || ((t - b.t).abs() <= tol && face < b.face)
                            }
                        };
                        if better {
                            best = Some(RawHit {
                                t,
                                face,
                                barycentric: bary,
                            });
                            limit = limit.min(t);
                        }
                    }
                }
            } else {
                let l = node.first;
                let r = l + 1;
                let el = self.nodes[l as usize].bounds.ray_entry(ray.origin, ray.inv_dir, t_min, reach);
                let er = self.nodes[r as usize].bounds.ray_entry(ray.origin, ray.inv_dir, t_min, reach);
                // push the farther child first so the nearer one is visited first
                match (el, er) {
                    (Some(a), Some(b)) if a <= b => {
                        stack.push(r);
                        stack.push(l);
                    }
                    (Some(_), Some(_)) => {
                        stack.push(l);
                        stack.push(r);
                    }
                    (Some(_), None) => stack.push(l),
                    (None, Some(_)) => stack.push(r),
                    (None, None) => {}
                }
            }
        }
        best
    }

    /// True if any triangle is hit in `(t_min, t_max)`.
    pub fn any(&self, tris: &[[Vec3; 3]], ray: &ShearedRay, t_min: f64, t_max: f64) -> bool {
        if self.order.is_empty() {
            return false;
        }
        let mut stack: Vec<u32> = Vec::with_capacity(64);
        stack.push(0);
        while let Some(ni) = stack.pop() {
            let node = &self.nodes[ni as usize];
            if node.bounds.ray_entry(ray.origin, ray.inv_dir, t_min, t_max).is_none() {
                continue;
            }
            if node.count > 0 {
                let s = node.first as usize;
                if self.order[s..s + node.count as usize]
                    .iter()
                    .any(|&f| ray.intersect(&tris[f as usize], t_min, t_max).is_some())
                {
                    return true;
                }
            } else {
                stack.push(node.first);
                stack.push(node.first + 1);
            }
        }
        false
    }
}

/// Partition `order` in place; returns the split position or `None` for a leaf.
fn split_sah(order: &mut [u32], centroids: &[Vec3], bounds: &[Aabb], cb: &Aabb, nb: &Aabb) -> Option<usize> {
    let extent = cb.extent();
    let axis = extent.max_abs_axis();
    if !(extent[axis] > 0.0) {
        // all centroids coincide: split by count
        return Some(order.len() / 2);
    }
    let lo = cb.min[axis];
    let scale = BINS as f64 / extent[axis];
    let bin_of = |i: u32| (((centroids[i as usize][axis] - lo) * scale) as usize).min(BINS - 1);

    let mut counts = [0usize; BINS];
    let mut boxes = [Aabb::EMPTY; BINS];
    for &i in order.iter() {
        let b = bin_of(i);
        counts[b] += 1;
        boxes[b] = boxes[b].union(&bounds[i as usize]);
    }
    let mut best = (f64::INFINITY, 0usize);
    for split in 1..BINS {
        let (mut lb, mut rb) = (Aabb::EMPTY, Aabb::EMPTY);
        let (mut lc, mut rc) = (0, 0);
        for b in 0..split {
            lb = lb.union(&boxes[b]);
            lc += counts[b];
        }
        for b in split..BINS {
            rb = rb.union(&boxes[b]);
            rc += counts[b];
        }
        if lc == 0 || rc == 0 {
            continue;
        }
        let cost = lc as f64 * lb.surface_area() + rc as f64 * rb.surface_area();
        if cost < best.0 {
            best = (cost, split);
        }
    }
    let leaf_cost = order.len() as f64 * nb.surface_area();
    if best.0.is_infinite() {
        return Some(order.len() / 2);
    }
    if best.0 >= leaf_cost && order.len() <= 2 * LEAF_SIZE {
        return None;
    }
    // stable partition keeps the build deterministic
    let split = best.1;
    let (mut left, mut right): (Vec<u32>, Vec<u32>) = order.iter().partition(|&&i| bin_of(i) < split);
    let mid = left.len();
    left.append(&mut right);
    order.copy_from_slice(&left);
    Some(mid)
}
