//! Watertight ray/triangle test (shear-and-scale formulation).
//!
//! Rays crossing a shared edge or vertex always hit at least one of the
//! adjacent triangles; the caller breaks ties by face id.

use crate::geometry::Vec3;

/// Per-ray constants for the watertight test.
#[derive(Debug, Clone, Copy)]
pub struct ShearedRay {
    pub origin: Vec3,
    pub dir: Vec3,
    pub inv_dir: Vec3,
    kx: usize,
    ky: usize,
    kz: usize,
    sx: f64,
    sy: f64,
    sz: f64,
}

impl ShearedRay {
    /// `dir` must be non-zero; it does not need to be normalized but the
    /// returned distances are in units of `|dir|`.
    pub fn new(origin: Vec3, dir: Vec3) -> Self {
        let kz = dir.max_abs_axis();
        let mut kx = (kz + 1) % 3;
        let mut ky = (kx + 1) % 3;
        if dir[kz] < 0.0 {
            core::mem::swap(&mut kx, &mut ky);
        }
        let sz = 1.0 / dir[kz];
        ShearedRay {
            origin,
            dir,
            inv_dir: Vec3::new(1.0 / dir.x, 1.0 / dir.y, 1.0 / dir.z),
            kx,
            ky,
            kz,
            sx: dir[kx] * sz,
            sy: dir[ky] * sz,
            sz,
        }
    }

    /// Distance and barycentric weights `(w0, w1, w2)` of the corners, or
    /// `None` when the ray misses or the hit lies outside `(t_min, t_max)`.
    #[inline]
    pub fn intersect(&self, tri: &[Vec3; 3], t_min: f64, t_max: f64) -> Option<(f64, [f64; 3])> {
        let a = tri[0] - self.origin;
        let b = tri[1] - self.origin;
        let c = tri[2] - self.origin;
        let (kx, ky, kz) = (self.kx, self.ky, self.kz);

        let ax = a[kx] - self.sx * a[kz];
        let ay = a[ky] - self.sy * a[kz];
        let bx = b[kx] - self.sx * b[kz];
        let by = b[ky] - self.sy * b[kz];
        let cx = c[kx] - self.sx * c[kz];
        let cy = c[ky] - self.sy * c[kz];

        let u = cx * by - cy * bx;
        let v = ax * cy - ay * cx;
        let w = bx * ay - by * ax;

        if (u < 0.0 || v < 0.0 || w < 0.0) && (u > 0.0 || v > 0.0 || w > 0.0) {
            return None;
        }
        let det = u + v + w;
        if det == 0.0 {
            return None;
        }
        let az = self.sz * a[kz];
        let bz = self.sz * b[kz];
        let cz = self.sz * c[kz];
        let t_scaled = u * az + v * bz + w * cz;
        let t = t_scaled / det;
        if !(t > t_min && t < t_max) {
            return None;
        }
        let inv = 1.0 / det;
        Some((t, [u * inv, v * inv, w * inv]))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const TRI: [Vec3; 3] = [
        Vec3::new(0.0, 0.0, 0.0),
        Vec3::new(1.0, 0.0, 0.0),
        Vec3::new(0.0, 1.0, 0.0),
    ];

    #[test]
    fn hits_interior() {
        let r = ShearedRay::new(Vec3::new(0.25, 0.25, 2.0), Vec3::new(0.0, 0.0, -1.0));
        let (t, w) = r.intersect(&TRI, 0.0, f64::INFINITY).unwrap();
        assert!((t - 2.0).abs() < 1e-15);
        assert!((w[0] - 0.5).abs() < 1e-15 && (w[1] - 0.25).abs() < 1e-15 && (w[2] - 0.25).abs() < 1e-15);
    }

    #[test]
    fn both_sides_and_range() {
        let r = ShearedRay::new(Vec3::new(0.25, 0.25, -1.0), Vec3::new(0.0, 0.0, 1.0));
        assert!(r.intersect(&TRI, 0.0, f64::INFINITY).is_some());
        assert!(r.intersect(&TRI, 0.0, 0.5).is_none());
        assert!(r.intersect(&TRI, 1.5, 5.0).is_none());
    }

    #[test]
    fn parallel_ray_misses() {
        let r = ShearedRay::new(Vec3::new(-1.0, 0.2, 0.0), Vec3::X);
        assert!(r.intersect(&TRI, 0.0, f64::INFINITY).is_none());
        let r = ShearedRay::new(Vec3::new(-1.0, 0.2, 0.5), Vec3::X);
        assert!(r.intersect(&TRI, 0.0, f64::INFINITY).is_none());
    }

    #[test]
    fn shared_edge_is_watertight() {
        let other = [TRI[1], Vec3::new(1.0, 1.0, 0.0), TRI[2]];
        // points exactly on the diagonal x + y = 1
        for i in 1..50 {
            let x = i as f64 / 50.0;
            let r = ShearedRay::new(Vec3::new(x - 0.013, 1.0 - x + 0.021, 1.0), Vec3::new(0.013, -0.021, -1.0));
            let hit_a = r.intersect(&TRI, 0.0, f64::INFINITY).is_some();
            let hit_b = r.intersect(&other, 0.0, f64::INFINITY).is_some();
            assert!(hit_a || hit_b, "ray {i} slipped through the shared edge");
        }
    }
}
