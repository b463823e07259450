//! Inverse warp field: a global affine warp followed by a normalized mixture
//! of affine warps with spatially varying weights.
//!
//! Points travel from world space into template coordinates. With the global
//! warp output `x̃`, each mixture component contributes `p_i = A_i(x̃)` where
//! `A_i(x) = R_i (s_i ∘ (x - t_i))`, and the field evaluates to
//! `y = Σ_i a_i p_i` with normalized weights `a_i = w_i / Σ_j w_j`. The raw
//! weights come from per-component scalar volumes (stored post-activation,
//! strictly positive) sampled with clamp-to-edge either at the component's
//! own output `p_i` ("warped" space) or at `x̃` ("world" space).

use crate::error::{Error, Result};
use crate::grids::{Boundary, VoxelGrid};
use crate::math::{Mat3, Vec3};
use crate::num::Real;

/// Quaternion norms at or below this threshold are rejected as degenerate.
pub const QUAT_NORM_MIN: f64 = 1e-8;

/// Mixture weight sums below this threshold are a degenerate-mixture error.
pub const WEIGHT_SUM_MIN: f64 = 1e-30;

/// Where the mixture weights are sampled.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MixtureSpace {
    /// `w_i` sampled at the component output `A_i(x̃)`.
    Warped,
    /// `w_i` sampled at the shared pre-mixture point `x̃`.
    World,
}

/// One affine warp `A(x) = R(q) (s ∘ (x - t))` with an unnormalized
/// rotation quaternion `q = (w, x, y, z)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AffineWarp<T> {
    pub rotation_quat: [T; 4],
    pub scale: Vec3<T>,
    pub translation: Vec3<T>,
}

impl<T: Real> AffineWarp<T> {
    pub fn identity() -> Self {
        Self {
            rotation_quat: [T::one(), T::zero(), T::zero(), T::zero()],
            scale: Vec3::splat(T::one()),
            translation: Vec3::zero(),
        }
    }
}

/// Rotation matrix of an unnormalized quaternion `(w, x, y, z)`.
/// Fails when the norm is at or below [`QUAT_NORM_MIN`].
pub fn quat_to_rotmat<T: Real>(q: [T; 4]) -> Result<Mat3<T>> {
    let norm = (q[0] * q[0] + q[1] * q[1] + q[2] * q[2] + q[3] * q[3]).sqrt();
    if norm.f64() <= QUAT_NORM_MIN {
        return Err(Error::DegenerateParameter(format!(
            "quaternion norm {:e} too small",
            norm.f64()
        )));
    }
    let (w, x, y, z) = (q[0] / norm, q[1] / norm, q[2] / norm, q[3] / norm);
    let two = T::of(2.0);
    let one = T::one();
    Ok(Mat3::from_rows(
        [
            one - two * (y * y + z * z),
            two * (x * y - w * z),
            two * (x * z + w * y),
        ],
        [
            two * (x * y + w * z),
            one - two * (x * x + z * z),
            two * (y * z - w * x),
        ],
        [
            two * (x * z - w * y),
            two * (y * z + w * x),
            one - two * (x * x + y * y),
        ],
    ))
}

/// Pulls a rotation-matrix gradient back to the unnormalized quaternion:
/// given `dL/dR`, returns `dL/dq`. Chain: gradient with respect to the
/// normalized quaternion from the analytic entries of `R(q̂)`, then the
/// normalization Jacobian `(I - q̂ q̂ᵀ) / ‖q‖`.
pub fn quat_rotmat_backward<T: Real>(q: [T; 4], d_rot: &Mat3<T>) -> Result<[T; 4]> {
    let norm = (q[0] * q[0] + q[1] * q[1] + q[2] * q[2] + q[3] * q[3]).sqrt();
    if norm.f64() <= QUAT_NORM_MIN {
        return Err(Error::DegenerateParameter(format!(
            "quaternion norm {:e} too small",
            norm.f64()
        )));
    }
    let (w, x, y, z) = (q[0] / norm, q[1] / norm, q[2] / norm, q[3] / norm);
    let two = T::of(2.0);
    let four = T::of(4.0);
    let zero = T::zero();
    // dR/dq̂_k, row-major, for q̂ = (w, x, y, z).
    let d_w = [
        [zero, -two * z, two * y],
        [two * z, zero, -two * x],
        [-two * y, two * x, zero],
    ];
    let d_x = [
        [zero, two * y, two * z],
        [two * y, -four * x, -two * w],
        [two * z, two * w, -four * x],
    ];
    let d_y = [
        [-four * y, two * x, two * w],
        [two * x, zero, two * z],
        [-two * w, two * z, -four * y],
    ];
    let d_z = [
        [-four * z, -two * w, two * x],
        [two * w, -four * z, two * y],
        [two * x, two * y, zero],
    ];
    let contract = |tbl: [[T; 3]; 3]| {
        let mut acc = T::zero();
        for r in 0..3 {
            for c in 0..3 {
                acc = acc + tbl[r][c] * d_rot.m[r][c];
            }
        }
        acc
    };
    let g_hat = [contract(d_w), contract(d_x), contract(d_y), contract(d_z)];
    let q_hat = [w, x, y, z];
    let dot = (0..4).map(|k| g_hat[k] * q_hat[k]).sum::<T>();
    let mut out = [T::zero(); 4];
    for k in 0..4 {
        out[k] = (g_hat[k] - q_hat[k] * dot) / norm;
    }
    Ok(out)
}

/// Applies an affine warp to a point.
pub fn eval_affine<T: Real>(warp: &AffineWarp<T>, x: Vec3<T>) -> Result<Vec3<T>> {
    let rot = quat_to_rotmat(warp.rotation_quat)?;
    Ok(rot.mul_vec(warp.scale.cmul(x - warp.translation)))
}

/// Affine warp with its rotation matrix resolved once.
#[derive(Clone, Debug)]
pub struct PreparedAffine<T> {
    pub quat: [T; 4],
    pub rot: Mat3<T>,
    pub scale: Vec3<T>,
    pub trans: Vec3<T>,
}

impl<T: Real> PreparedAffine<T> {
    pub fn new(warp: &AffineWarp<T>) -> Result<Self> {
        Ok(Self {
            quat: warp.rotation_quat,
            rot: quat_to_rotmat(warp.rotation_quat)?,
            scale: warp.scale,
            trans: warp.translation,
        })
    }

    #[inline]
    pub fn eval(&self, x: Vec3<T>) -> Vec3<T> {
        self.rot.mul_vec(self.scale.cmul(x - self.trans))
    }

    /// Adjoint of [`PreparedAffine::eval`]: accumulates parameter gradients
    /// and returns the gradient with respect to `x`.
    #[inline]
    pub fn adjoint(&self, x: Vec3<T>, g_out: Vec3<T>, grads: &mut AffineGrads<T>) -> Vec3<T> {
        let centered = x - self.trans;
        let scaled = self.scale.cmul(centered);
        grads.d_rot += Mat3::outer(g_out, scaled);
        let h = self.rot.transpose().mul_vec(g_out);
        grads.d_scale += h.cmul(centered);
        grads.d_trans -= h.cmul(self.scale);
        h.cmul(self.scale)
    }
}

/// Gradient accumulator for one affine warp. Rotation gradients are kept in
/// matrix form and pulled back to the quaternion on finalize.
#[derive(Clone, Debug)]
pub struct AffineGrads<T> {
    pub d_rot: Mat3<T>,
    pub d_scale: Vec3<T>,
    pub d_trans: Vec3<T>,
}

impl<T: Real> AffineGrads<T> {
    pub fn zero() -> Self {
        Self {
            d_rot: Mat3::zero(),
            d_scale: Vec3::zero(),
            d_trans: Vec3::zero(),
        }
    }

    pub fn add_assign(&mut self, o: &Self) {
        self.d_rot += o.d_rot;
        self.d_scale += o.d_scale;
        self.d_trans += o.d_trans;
    }

    /// `dL/dq` for the (unnormalized) quaternion of `warp`.
    pub fn quat_grad(&self, warp: &PreparedAffine<T>) -> Result<[T; 4]> {
        quat_rotmat_backward(warp.quat, &self.d_rot)
    }
}

/// Warp field parameters in raw (unprepared) form.
#[derive(Clone, Debug)]
pub struct WarpField<T> {
    pub global: AffineWarp<T>,
    pub components: Vec<AffineWarp<T>>,
    /// One channel per component, stored post-activation (strictly positive).
    pub weights: VoxelGrid<T>,
    pub space: MixtureSpace,
}

/// Evaluates a warp field at a point, returning the template-space
/// coordinate and the normalized mixture weights.
pub fn eval_warp_field<T: Real>(field: &WarpField<T>, x: Vec3<T>) -> Result<(Vec3<T>, Vec<T>)> {
    let prepared = PreparedWarpField::new(field)?;
    let mut scratch = WarpScratch::new(field.components.len());
    let y = prepared.eval(x, &mut scratch)?;
    Ok((y, scratch.a.clone()))
}

/// Reusable per-thread buffers for warp evaluation. After [`PreparedWarpField::eval`]
/// they hold the forward intermediates needed by the cached adjoint.
#[derive(Clone, Debug)]
pub struct WarpScratch<T> {
    /// Global-warp output `x̃` of the last evaluation.
    pub xt: Vec3<T>,
    /// Component outputs `p_i`.
    pub p: Vec<Vec3<T>>,
    /// Normalized weights `a_i` from the last evaluation.
    pub a: Vec<T>,
    /// Pre-normalization weight sum `W`.
    pub sum: T,
}

impl<T: Real> WarpScratch<T> {
    pub fn new(n: usize) -> Self {
        Self {
            xt: Vec3::zero(),
            p: vec![Vec3::zero(); n],
            a: vec![T::zero(); n],
            sum: T::zero(),
        }
    }
}

/// Warp field with all rotation matrices resolved, ready for dense point
/// evaluation.
#[derive(Clone, Debug)]
pub struct PreparedWarpField<T> {
    pub global: PreparedAffine<T>,
    pub comps: Vec<PreparedAffine<T>>,
    pub weights: VoxelGrid<T>,
    pub space: MixtureSpace,
}

impl<T: Real> PreparedWarpField<T> {
    pub fn new(field: &WarpField<T>) -> Result<Self> {
        if field.weights.channels() != field.components.len() {
            return Err(Error::shape(
                "warp weight channels",
                field.components.len(),
                field.weights.channels(),
            ));
        }
        Ok(Self {
            global: PreparedAffine::new(&field.global)?,
            comps: field
                .components
                .iter()
                .map(PreparedAffine::new)
                .collect::<Result<_>>()?,
            weights: field.weights.clone(),
            space: field.space,
        })
    }

    pub fn n_components(&self) -> usize {
        self.comps.len()
    }

    /// Maps a point into template coordinates. Fills `scratch` with the
    /// component outputs and normalized weights.
    pub fn eval(&self, x: Vec3<T>, scratch: &mut WarpScratch<T>) -> Result<Vec3<T>> {
        let xt = self.global.eval(x);
        let mut sum = T::zero();
        for (i, comp) in self.comps.iter().enumerate() {
            let p = comp.eval(xt);
            scratch.p[i] = p;
            let at = match self.space {
                MixtureSpace::Warped => p,
                MixtureSpace::World => xt,
            };
            let w = self.weights.sample_channel(i, at, Boundary::ClampToEdge);
            scratch.a[i] = w;
            sum = sum + w;
        }
        if sum.f64() < WEIGHT_SUM_MIN {
            return Err(Error::DegenerateMixture {
                sum: sum.f64(),
                at: [x.x.f64(), x.y.f64(), x.z.f64()],
            });
        }
        let mut y = Vec3::zero();
        for i in 0..self.comps.len() {
            let a = scratch.a[i] / sum;
            scratch.a[i] = a;
            y += scratch.p[i] * a;
        }
        Ok(y)
    }

    /// Adjoint of [`PreparedWarpField::eval`]: given `dL/dy`, accumulates
    /// parameter gradients and returns `dL/dx`. Recomputes the forward pass
    /// internally, so it needs only the query point.
    pub fn adjoint(
        &self,
        x: Vec3<T>,
        g_y: Vec3<T>,
        scratch: &mut WarpScratch<T>,
        grads: &mut WarpFieldGrads<T>,
    ) -> Result<Vec3<T>> {
        let xt = self.global.eval(x);
        let n = self.comps.len();
        let mut sum = T::zero();
        for (i, comp) in self.comps.iter().enumerate() {
            let p = comp.eval(xt);
            scratch.p[i] = p;
            let at = match self.space {
                MixtureSpace::Warped => p,
                MixtureSpace::World => xt,
            };
            let w = self.weights.sample_channel(i, at, Boundary::ClampToEdge);
            scratch.a[i] = w;
            sum = sum + w;
        }
        if sum.f64() < WEIGHT_SUM_MIN {
            return Err(Error::DegenerateMixture {
                sum: sum.f64(),
                at: [x.x.f64(), x.y.f64(), x.z.f64()],
            });
        }
        for i in 0..n {
            scratch.a[i] = scratch.a[i] / sum;
        }
        // y = Σ a_i p_i with a_i = w_i / W:
        //   dL/dp_i       = a_i g_y            (+ weight-position term below)
        //   dL/dw_i       = (b_i - Σ_j b_j a_j) / W,  b_i = g_y · p_i
        let mut dot_ba = T::zero();
        for i in 0..n {
            dot_ba = dot_ba + g_y.dot(scratch.p[i]) * scratch.a[i];
        }
        let mut g_xt = Vec3::zero();
        for i in 0..n {
            let b_i = g_y.dot(scratch.p[i]);
            let d_w = (b_i - dot_ba) / sum;
            let at = match self.space {
                MixtureSpace::Warped => scratch.p[i],
                MixtureSpace::World => xt,
            };
            let g_at =
                self.weights
                    .sample_channel_adjoint_into(i, at, Boundary::ClampToEdge, d_w, &mut grads.d_weights);
            let mut g_p = g_y * scratch.a[i];
            match self.space {
                MixtureSpace::Warped => g_p += g_at,
                MixtureSpace::World => g_xt += g_at,
            }
            g_xt += self.comps[i].adjoint(xt, g_p, &mut grads.comps[i]);
        }
        Ok(self.global.adjoint(x, g_xt, &mut grads.global))
    }
}

/// Gradient accumulator for a whole warp field. `d_weights` is with respect
/// to the stored (post-activation) weight values, in the weight grid's
/// layout.
#[derive(Clone, Debug)]
pub struct WarpFieldGrads<T> {
    pub global: AffineGrads<T>,
    pub comps: Vec<AffineGrads<T>>,
    pub d_weights: Vec<T>,
}

impl<T: Real> WarpFieldGrads<T> {
    pub fn zeros_like(field: &PreparedWarpField<T>) -> Self {
        Self {
            global: AffineGrads::zero(),
            comps: vec![AffineGrads::zero(); field.comps.len()],
            d_weights: vec![T::zero(); field.weights.data().len()],
        }
    }

    pub fn add_assign(&mut self, o: &Self) {
        self.global.add_assign(&o.global);
        for (a, b) in self.comps.iter_mut().zip(&o.comps) {
            a.add_assign(b);
        }
        for (a, b) in self.d_weights.iter_mut().zip(&o.d_weights) {
            *a = *a + *b;
        }
    }
}
