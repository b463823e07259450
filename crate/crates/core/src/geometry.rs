//! Cameras, rays, and the bounding cube of the modeling volume.

use crate::error::{Error, Result};
use crate::img::Image;
use crate::math::{Mat3, Vec3};
use crate::num::Real;

/// Maximum allowed entry of `R^T R - I` for a camera rotation.
pub const ORTHONORMALITY_TOL: f64 = 1e-6;

/// A ray with normalized direction.
#[derive(Clone, Copy, Debug)]
pub struct Ray<T> {
    pub origin: Vec3<T>,
    pub dir: Vec3<T>,
}

impl<T: Real> Ray<T> {
    #[inline]
    pub fn at(&self, t: T) -> Vec3<T> {
        self.origin + self.dir * t
    }
}

/// Axis-aligned cube given by its center and side length.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Aabb<T> {
    pub center: Vec3<T>,
    pub side: T,
}

impl<T: Real> Aabb<T> {
    pub fn new(center: Vec3<T>, side: T) -> Self {
        Self { center, side }
    }

    /// The canonical cube `[-1, 1]^3`.
    pub fn unit() -> Self {
        Self::new(Vec3::zero(), T::of(2.0))
    }

    #[inline]
    pub fn half(&self) -> T {
        self.side * T::of(0.5)
    }

    #[inline]
    pub fn min_corner(&self) -> Vec3<T> {
        self.center - Vec3::splat(self.half())
    }

    #[inline]
    pub fn max_corner(&self) -> Vec3<T> {
        self.center + Vec3::splat(self.half())
    }

    /// Maps a world point into the normalized cube coordinates `[-1, 1]^3`.
    #[inline]
    pub fn to_normalized(&self, x: Vec3<T>) -> Vec3<T> {
        (x - self.center) / self.half()
    }

    /// Inverse of [`Aabb::to_normalized`].
    #[inline]
    pub fn to_world(&self, u: Vec3<T>) -> Vec3<T> {
        self.center + u * self.half()
    }
}

/// Pinhole camera with a world-to-camera rigid transform and per-camera color
/// calibration. Immutable after construction except for `gain`, `bias`, and
/// `background`, which the trainer owns and updates between steps.
#[derive(Clone, Debug)]
pub struct Camera<T> {
    id: String,
    intrinsics: Mat3<T>,
    rotation: Mat3<T>,
    translation: Vec3<T>,
    width: usize,
    height: usize,
    gain: Vec3<T>,
    bias: Vec3<T>,
    background: Option<Image<T>>,
    // Cached at construction.
    k_inv: Mat3<T>,
    rot_t: Mat3<T>,
    center: Vec3<T>,
}

impl<T: Real> Camera<T> {
    /// Validates and builds a camera. `rotation` maps world to camera
    /// coordinates; `translation` is the camera-space offset, so the optical
    /// center sits at `-R^T t`.
    pub fn new(
        id: impl Into<String>,
        intrinsics: Mat3<T>,
        rotation: Mat3<T>,
        translation: Vec3<T>,
        width: usize,
        height: usize,
    ) -> Result<Self> {
        let id = id.into();
        let invalid = |reason: &str| Error::InvalidCamera {
            id: id.clone(),
            reason: reason.to_string(),
        };
        if width == 0 || height == 0 {
            return Err(invalid("zero image dimensions"));
        }
        let k_inv = intrinsics
            .inverse()
            .ok_or_else(|| invalid("singular intrinsics"))?;
        let gram = rotation.transpose().mul_mat(&rotation);
        let dev = gram.max_abs_diff(&Mat3::identity());
        if dev.f64() > ORTHONORMALITY_TOL {
            return Err(invalid(&format!(
                "rotation not orthonormal (max |R^T R - I| = {:.3e})",
                dev.f64()
            )));
        }
        let rot_t = rotation.transpose();
        let center = -rot_t.mul_vec(translation);
        Ok(Self {
            id,
            intrinsics,
            rotation,
            translation,
            width,
            height,
            gain: Vec3::splat(T::one()),
            bias: Vec3::zero(),
            background: None,
            k_inv,
            rot_t,
            center,
        })
    }

    /// Convenience constructor: camera at `eye` looking at `target`, with
    /// focal length `focal` in pixels and the principal point at the image
    /// center. Camera axes follow the usual computer-vision convention
    /// (`x` right, `y` down, `z` forward).
    pub fn look_at(
        id: impl Into<String>,
        eye: Vec3<T>,
        target: Vec3<T>,
        up: Vec3<T>,
        focal: T,
        width: usize,
        height: usize,
    ) -> Result<Self> {
        let id = id.into();
        let fwd = target - eye;
        if fwd.norm().f64() < 1e-12 {
            return Err(Error::InvalidCamera {
                id,
                reason: "eye coincides with target".into(),
            });
        }
        let z = fwd.normalized();
        let x = z.cross(up);
        if x.norm().f64() < 1e-9 {
            return Err(Error::InvalidCamera {
                id,
                reason: "view direction parallel to up vector".into(),
            });
        }
        let x = x.normalized();
        let y = z.cross(x);
        let rotation = Mat3::from_rows(x.to_array(), y.to_array(), z.to_array());
        let translation = -rotation.mul_vec(eye);
        let zero = T::zero();
        let intrinsics = Mat3::from_rows(
            [focal, zero, T::of_usize(width) * T::of(0.5)],
            [zero, focal, T::of_usize(height) * T::of(0.5)],
            [zero, zero, T::one()],
        );
        Self::new(id, intrinsics, rotation, translation, width, height)
    }

    #[inline]
    pub fn id(&self) -> &str {
        &self.id
    }

    #[inline]
    pub fn intrinsics(&self) -> &Mat3<T> {
        &self.intrinsics
    }

    #[inline]
    pub fn rotation(&self) -> &Mat3<T> {
        &self.rotation
    }

    #[inline]
    pub fn translation(&self) -> Vec3<T> {
        self.translation
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    /// Optical center in world coordinates.
    #[inline]
    pub fn center(&self) -> Vec3<T> {
        self.center
    }

    #[inline]
    pub fn gain(&self) -> Vec3<T> {
        self.gain
    }

    #[inline]
    pub fn bias(&self) -> Vec3<T> {
        self.bias
    }

    #[inline]
    pub fn background(&self) -> Option<&Image<T>> {
        self.background.as_ref()
    }

    pub fn set_gain(&mut self, gain: Vec3<T>) {
        self.gain = gain;
    }

    pub fn set_bias(&mut self, bias: Vec3<T>) {
        self.bias = bias;
    }

    pub fn set_background(&mut self, background: Option<Image<T>>) {
        self.background = background;
    }

    /// Background color behind pixel `(x, y)`: the stored image if present,
    /// otherwise black.
    #[inline]
    pub fn background_rgb(&self, x: usize, y: usize) -> Vec3<T> {
        match &self.background {
            Some(im) => im.rgb(x, y),
            None => Vec3::zero(),
        }
    }

    /// Projects a world point; `None` when it lies at or behind the camera
    /// plane.
    pub fn project(&self, x_world: Vec3<T>) -> Option<(T, T)> {
        let xc = self.rotation.mul_vec(x_world) + self.translation;
        if xc.z <= T::zero() {
            return None;
        }
        let p = self.intrinsics.mul_vec(xc);
        Some((p.x / p.z, p.y / p.z))
    }

    /// Converts the scalar type of the camera (backgrounds included).
    pub fn cast<U: Real>(&self) -> Camera<U> {
        let cvt_m = |m: &Mat3<T>| {
            let mut out = Mat3::<U>::identity();
            for r in 0..3 {
                for c in 0..3 {
                    out.m[r][c] = U::of(m.m[r][c].f64());
                }
            }
            out
        };
        let cvt_v = |v: Vec3<T>| Vec3::<U>::of(v.x.f64(), v.y.f64(), v.z.f64());
        Camera {
            id: self.id.clone(),
            intrinsics: cvt_m(&self.intrinsics),
            rotation: cvt_m(&self.rotation),
            translation: cvt_v(self.translation),
            width: self.width,
            height: self.height,
            gain: cvt_v(self.gain),
            bias: cvt_v(self.bias),
            background: self.background.as_ref().map(|b| b.cast()),
            k_inv: cvt_m(&self.k_inv),
            rot_t: cvt_m(&self.rot_t),
            center: cvt_v(self.center),
        }
    }
}

/// World-space ray through a continuous pixel coordinate. Image loops pass
/// pixel centers `(i + 0.5, j + 0.5)`.
pub fn pixel_ray<T: Real>(camera: &Camera<T>, pixel: (T, T)) -> Ray<T> {
    let hom = Vec3::new(pixel.0, pixel.1, T::one());
    let dir_cam = camera.k_inv.mul_vec(hom);
    let dir = camera.rot_t.mul_vec(dir_cam).normalized();
    Ray {
        origin: camera.center,
        dir,
    }
}

/// Slab-method ray/cube intersection. Returns the parameter interval
/// `(t_near, t_far)` with `max(t_near, 0) < t_far`, or `None` when the ray
/// misses the cube or the cube lies entirely behind the origin. A ray
/// starting inside reports `t_near = 0`.
pub fn ray_box_intersect<T: Real>(ray: &Ray<T>, bounds: &Aabb<T>) -> Option<(T, T)> {
    let lo = bounds.min_corner();
    let hi = bounds.max_corner();
    let mut t_near = T::zero();
    let mut t_far = T::infinity();
    for axis in 0..3 {
        let o = ray.origin.get(axis);
        let d = ray.dir.get(axis);
        let (l, h) = (lo.get(axis), hi.get(axis));
        if d == T::zero() {
            // Parallel to this slab: hit only if the origin lies strictly
            // inside it; grazing along a face plane counts as a miss.
            if o <= l || o >= h {
                return None;
            }
            continue;
        }
        let inv = T::one() / d;
        let (t0, t1) = {
            let a = (l - o) * inv;
            let b = (h - o) * inv;
            if a < b {
                (a, b)
            } else {
                (b, a)
            }
        };
        t_near = t_near.max(t0);
        t_far = t_far.min(t1);
    }
    if t_near < t_far {
        Some((t_near, t_far))
    } else {
        None
    }
}

/// Per-camera affine color model: `gain ∘ rgb + bias`, applied channel-wise.
#[inline]
pub fn apply_color_calibration<T: Real>(camera: &Camera<T>, rgb: Vec3<T>) -> Vec3<T> {
    camera.gain.cmul(rgb) + camera.bias
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn simple_camera() -> Camera<f64> {
        // f = 100 px, principal point (32, 32), identity pose: the camera
        // sits at the origin looking down +z.
        let k = Mat3::of([[100.0, 0.0, 32.0], [0.0, 100.0, 32.0], [0.0, 0.0, 1.0]]);
        Camera::new("c0", k, Mat3::identity(), Vec3::zero(), 64, 64).unwrap()
    }

    #[test]
    fn pixel_ray_reference_directions() {
        let cam = simple_camera();
        // Principal point: straight ahead.
        let r = pixel_ray(&cam, (32.0, 32.0));
        assert_relative_eq!(r.dir.z, 1.0, epsilon = 1e-15);
        // 100 px right of center with f = 100: 45 degrees off axis.
        let r = pixel_ray(&cam, (132.0, 32.0));
        let s = 0.5_f64.sqrt();
        assert_relative_eq!(r.dir.x, s, epsilon = 1e-12);
        assert_relative_eq!(r.dir.y, 0.0, epsilon = 1e-12);
        assert_relative_eq!(r.dir.z, s, epsilon = 1e-12);
        assert_relative_eq!(r.dir.norm(), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn project_backproject_round_trip() {
        // pixel -> ray -> point on ray -> project recovers the pixel. The
        // projection goes through K and R while the ray goes through their
        // inverses, so agreement checks both paths.
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for i in 0..50 {
            let eye = Vec3::new(
                rng.gen_range(-2.0..2.0),
                rng.gen_range(-2.0..2.0),
                rng.gen_range(1.2..3.0),
            );
            let cam = Camera::look_at(
                format!("c{i}"),
                eye,
                Vec3::zero(),
                Vec3::of(0.0, 1.0, 0.0),
                rng.gen_range(40.0..160.0),
                64,
                48,
            )
            .unwrap();
            let px = (rng.gen_range(0.0..64.0), rng.gen_range(0.0..48.0));
            let ray = pixel_ray(&cam, px);
            let point = ray.at(rng.gen_range(0.5..4.0));
            let (u, v) = cam.project(point).expect("point in front of camera");
            assert_relative_eq!(u, px.0, epsilon = 1e-6);
            assert_relative_eq!(v, px.1, epsilon = 1e-6);
        }
    }

    #[test]
    fn camera_center_matches_look_at_eye() {
        let eye = Vec3::of(0.3, -0.4, 1.7);
        let cam: Camera<f64> =
            Camera::look_at("c", eye, Vec3::zero(), Vec3::of(0.0, 1.0, 0.0), 80.0, 32, 32)
                .unwrap();
        assert!((cam.center() - eye).norm() < 1e-12);
    }

    #[test]
    fn rejects_singular_intrinsics_and_sheared_rotation() {
        let k_bad = Mat3::of([[1.0, 0.0, 0.0], [2.0, 0.0, 0.0], [0.0, 0.0, 1.0]]);
        let err = Camera::<f64>::new("bad", k_bad, Mat3::identity(), Vec3::zero(), 8, 8);
        assert!(matches!(err, Err(Error::InvalidCamera { .. })));

        let k = Mat3::of([[50.0, 0.0, 4.0], [0.0, 50.0, 4.0], [0.0, 0.0, 1.0]]);
        let sheared = Mat3::of([[1.0, 1e-3, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]);
        let err = Camera::<f64>::new("bad", k, sheared, Vec3::zero(), 8, 8);
        assert!(matches!(err, Err(Error::InvalidCamera { .. })));
    }

    #[test]
    fn box_intersection_cases() {
        let b = Aabb::<f64>::unit();
        // Straight through the center from outside.
        let r = Ray {
            origin: Vec3::of(0.0, 0.0, -3.0),
            dir: Vec3::of(0.0, 0.0, 1.0),
        };
        let (t0, t1) = ray_box_intersect(&r, &b).unwrap();
        assert_relative_eq!(t0, 2.0);
        assert_relative_eq!(t1, 4.0);

        // Origin inside: entry clamps to zero.
        let r = Ray {
            origin: Vec3::of(0.2, -0.1, 0.0),
            dir: Vec3::of(0.0, 0.0, 1.0),
        };
        let (t0, t1) = ray_box_intersect(&r, &b).unwrap();
        assert_relative_eq!(t0, 0.0);
        assert_relative_eq!(t1, 1.0);

        // Box behind the origin.
        let r = Ray {
            origin: Vec3::of(0.0, 0.0, 3.0),
            dir: Vec3::of(0.0, 0.0, 1.0),
        };
        assert!(ray_box_intersect(&r, &b).is_none());

        // Clear miss.
        let r = Ray {
            origin: Vec3::of(5.0, 5.0, -3.0),
            dir: Vec3::of(0.0, 0.0, 1.0),
        };
        assert!(ray_box_intersect(&r, &b).is_none());

        // Parallel to a slab, origin inside that slab: still hits.
        let r = Ray {
            origin: Vec3::of(0.5, 0.5, -2.0),
            dir: Vec3::of(0.0, 0.0, 1.0),
        };
        assert!(ray_box_intersect(&r, &b).is_some());

        // Parallel to a slab, origin outside it: miss even though the other
        // slabs would intersect.
        let r = Ray {
            origin: Vec3::of(1.5, 0.0, -2.0),
            dir: Vec3::of(0.0, 0.0, 1.0),
        };
        assert!(ray_box_intersect(&r, &b).is_none());

        // Tangent along a face plane counts as a miss (degenerate interval).
        let r = Ray {
            origin: Vec3::of(1.0, 0.0, -2.0),
            dir: Vec3::of(0.0, 0.0, 1.0),
        };
        assert!(ray_box_intersect(&r, &b).is_none());
    }

    #[test]
    fn off_center_cube_intersection() {
        let b = Aabb::new(Vec3::of(1.0, 0.0, 0.0), 1.0);
        let r = Ray {
            origin: Vec3::of(-1.0, 0.2, 0.1),
            dir: Vec3::of(1.0, 0.0, 0.0),
        };
        let (t0, t1) = ray_box_intersect(&r, &b).unwrap();
        assert_relative_eq!(t0, 1.5);
        assert_relative_eq!(t1, 2.5);
    }

    #[test]
    fn color_calibration_is_affine() {
        let mut cam = simple_camera();
        cam.set_gain(Vec3::of(2.0, 0.5, 1.0));
        cam.set_bias(Vec3::of(0.1, 0.0, -0.2));
        let out = apply_color_calibration(&cam, Vec3::of(0.3, 0.8, 0.5));
        assert_relative_eq!(out.x, 0.7);
        assert_relative_eq!(out.y, 0.4);
        assert_relative_eq!(out.z, 0.3);
    }

    #[test]
    fn normalized_cube_coordinates_round_trip() {
        let b = Aabb::new(Vec3::of(0.5, -1.0, 2.0), 3.0);
        let x = Vec3::of(1.2, -0.7, 0.9);
        let u = b.to_normalized(x);
        let back = b.to_world(u);
        assert!((back - x).norm() < 1e-12);
        assert_eq!(b.to_normalized(b.min_corner()), Vec3::of(-1.0, -1.0, -1.0));
    }
}
