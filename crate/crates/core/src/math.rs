//! Small fixed-size linear algebra and activation functions.
//!
//! Hand-rolled 3-vectors and 3x3 matrices keep the adjoint code transparent:
//! every gradient formula in this crate is written against these operations.

use crate::num::Real;
use std::ops::{Add, AddAssign, Div, Mul, Neg, Sub, SubAssign};

/// Column 3-vector.
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct Vec3<T> {
    pub x: T,
    pub y: T,
    pub z: T,
}

impl<T: Real> Vec3<T> {
    #[inline]
    pub fn new(x: T, y: T, z: T) -> Self {
        Self { x, y, z }
    }

    #[inline]
    pub fn splat(v: T) -> Self {
        Self { x: v, y: v, z: v }
    }

    #[inline]
    pub fn zero() -> Self {
        Self::splat(T::zero())
    }

    /// Builds a vector from `f64` components (constants in tests and scenes).
    #[inline]
    pub fn of(x: f64, y: f64, z: f64) -> Self {
        Self::new(T::of(x), T::of(y), T::of(z))
    }

    #[inline]
    pub fn dot(self, o: Self) -> T {
        self.x * o.x + self.y * o.y + self.z * o.z
    }

    #[inline]
    pub fn cross(self, o: Self) -> Self {
        Self::new(
            self.y * o.z - self.z * o.y,
            self.z * o.x - self.x * o.z,
            self.x * o.y - self.y * o.x,
        )
    }

    /// Component-wise product.
    #[inline]
    pub fn cmul(self, o: Self) -> Self {
        Self::new(self.x * o.x, self.y * o.y, self.z * o.z)
    }

    /// Component-wise quotient.
    #[inline]
    pub fn cdiv(self, o: Self) -> Self {
        Self::new(self.x / o.x, self.y / o.y, self.z / o.z)
    }

    #[inline]
    pub fn norm_sq(self) -> T {
        self.dot(self)
    }

    #[inline]
    pub fn norm(self) -> T {
        self.norm_sq().sqrt()
    }

    #[inline]
    pub fn normalized(self) -> Self {
        self / self.norm()
    }

    #[inline]
    pub fn min_elem(self) -> T {
        self.x.min(self.y).min(self.z)
    }

    #[inline]
    pub fn max_elem(self) -> T {
        self.x.max(self.y).max(self.z)
    }

    #[inline]
    pub fn abs(self) -> Self {
        Self::new(self.x.abs(), self.y.abs(), self.z.abs())
    }

    #[inline]
    pub fn sum(self) -> T {
        self.x + self.y + self.z
    }

    #[inline]
    pub fn get(self, i: usize) -> T {
        match i {
            0 => self.x,
            1 => self.y,
            2 => self.z,
            _ => panic!("Vec3 index {i} out of range"),
        }
    }

    #[inline]
    pub fn set(&mut self, i: usize, v: T) {
        match i {
            0 => self.x = v,
            1 => self.y = v,
            2 => self.z = v,
            _ => panic!("Vec3 index {i} out of range"),
        }
    }

    #[inline]
    pub fn to_array(self) -> [T; 3] {
        [self.x, self.y, self.z]
    }

    #[inline]
    pub fn from_array(a: [T; 3]) -> Self {
        Self::new(a[0], a[1], a[2])
    }

    #[inline]
    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    /// Widens every component to `f64`.
    #[inline]
    pub fn to_f64(self) -> Vec3<f64> {
        Vec3::new(self.x.f64(), self.y.f64(), self.z.f64())
    }
}

impl<T: Real> Add for Vec3<T> {
    type Output = Self;
    #[inline]
    fn add(self, o: Self) -> Self {
        Self::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl<T: Real> AddAssign for Vec3<T> {
    #[inline]
    fn add_assign(&mut self, o: Self) {
        *self = *self + o;
    }
}

impl<T: Real> Sub for Vec3<T> {
    type Output = Self;
    #[inline]
    fn sub(self, o: Self) -> Self {
        Self::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl<T: Real> SubAssign for Vec3<T> {
    #[inline]
    fn sub_assign(&mut self, o: Self) {
        *self = *self - o;
    }
}

impl<T: Real> Mul<T> for Vec3<T> {
    type Output = Self;
    #[inline]
    fn mul(self, s: T) -> Self {
        Self::new(self.x * s, self.y * s, self.z * s)
    }
}

impl<T: Real> Div<T> for Vec3<T> {
    type Output = Self;
    #[inline]
    fn div(self, s: T) -> Self {
        Self::new(self.x / s, self.y / s, self.z / s)
    }
}

impl<T: Real> Neg for Vec3<T> {
    type Output = Self;
    #[inline]
    fn neg(self) -> Self {
        Self::new(-self.x, -self.y, -self.z)
    }
}

/// Row-major 3x3 matrix.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Mat3<T> {
    /// `m[row][col]`.
    pub m: [[T; 3]; 3],
}

impl<T: Real> Mat3<T> {
    #[inline]
    pub fn from_rows(r0: [T; 3], r1: [T; 3], r2: [T; 3]) -> Self {
        Self { m: [r0, r1, r2] }
    }

    /// Builds a matrix from `f64` entries, row-major.
    pub fn of(rows: [[f64; 3]; 3]) -> Self {
        let c = |r: [f64; 3]| [T::of(r[0]), T::of(r[1]), T::of(r[2])];
        Self::from_rows(c(rows[0]), c(rows[1]), c(rows[2]))
    }

    #[inline]
    pub fn identity() -> Self {
        let (o, z) = (T::one(), T::zero());
        Self::from_rows([o, z, z], [z, o, z], [z, z, o])
    }

    #[inline]
    pub fn zero() -> Self {
        Self::from_rows([T::zero(); 3], [T::zero(); 3], [T::zero(); 3])
    }

    #[inline]
    pub fn diag(d: Vec3<T>) -> Self {
        let z = T::zero();
        Self::from_rows([d.x, z, z], [z, d.y, z], [z, z, d.z])
    }

    #[inline]
    pub fn row(&self, r: usize) -> Vec3<T> {
        Vec3::new(self.m[r][0], self.m[r][1], self.m[r][2])
    }

    #[inline]
    pub fn col(&self, c: usize) -> Vec3<T> {
        Vec3::new(self.m[0][c], self.m[1][c], self.m[2][c])
    }

    #[inline]
    pub fn transpose(&self) -> Self {
        Self::from_rows(
            [self.m[0][0], self.m[1][0], self.m[2][0]],
            [self.m[0][1], self.m[1][1], self.m[2][1]],
            [self.m[0][2], self.m[1][2], self.m[2][2]],
        )
    }

    #[inline]
    pub fn mul_vec(&self, v: Vec3<T>) -> Vec3<T> {
        Vec3::new(self.row(0).dot(v), self.row(1).dot(v), self.row(2).dot(v))
    }

    pub fn mul_mat(&self, o: &Self) -> Self {
        let mut out = Self::zero();
        for r in 0..3 {
            for c in 0..3 {
                out.m[r][c] =
                    self.m[r][0] * o.m[0][c] + self.m[r][1] * o.m[1][c] + self.m[r][2] * o.m[2][c];
            }
        }
        out
    }

    pub fn det(&self) -> T {
        self.row(0).dot(self.row(1).cross(self.row(2)))
    }

    /// Inverse via the adjugate; `None` when the determinant is not usable.
    pub fn inverse(&self) -> Option<Self> {
        let det = self.det();
        if det == T::zero() || !det.is_finite() {
            return None;
        }
        let inv_det = T::one() / det;
        // Columns of the inverse are cross products of the original rows.
        let r0 = self.row(0);
        let r1 = self.row(1);
        let r2 = self.row(2);
        let c0 = r1.cross(r2) * inv_det;
        let c1 = r2.cross(r0) * inv_det;
        let c2 = r0.cross(r1) * inv_det;
        Some(Self::from_rows(
            [c0.x, c1.x, c2.x],
            [c0.y, c1.y, c2.y],
            [c0.z, c1.z, c2.z],
        ))
    }

    /// Outer product `a * b^T`.
    pub fn outer(a: Vec3<T>, b: Vec3<T>) -> Self {
        Self::from_rows(
            [a.x * b.x, a.x * b.y, a.x * b.z],
            [a.y * b.x, a.y * b.y, a.y * b.z],
            [a.z * b.x, a.z * b.y, a.z * b.z],
        )
    }

    /// Largest absolute entry of `self - other`.
    pub fn max_abs_diff(&self, other: &Self) -> T {
        let mut worst = T::zero();
        for r in 0..3 {
            for c in 0..3 {
                worst = worst.max((self.m[r][c] - other.m[r][c]).abs());
            }
        }
        worst
    }
}

impl<T: Real> Add for Mat3<T> {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        let mut out = self;
        for r in 0..3 {
            for c in 0..3 {
                out.m[r][c] = out.m[r][c] + o.m[r][c];
            }
        }
        out
    }
}

impl<T: Real> AddAssign for Mat3<T> {
    fn add_assign(&mut self, o: Self) {
        *self = *self + o;
    }
}

impl<T: Real> Mul<T> for Mat3<T> {
    type Output = Self;
    fn mul(self, s: T) -> Self {
        let mut out = self;
        for r in 0..3 {
            for c in 0..3 {
                out.m[r][c] = out.m[r][c] * s;
            }
        }
        out
    }
}

/// Numerically stable `ln(1 + exp(x))`.
#[inline]
pub fn softplus<T: Real>(x: T) -> T {
    if x > T::zero() {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// Logistic sigmoid, the derivative of [`softplus`].
#[inline]
pub fn sigmoid<T: Real>(x: T) -> T {
    if x >= T::zero() {
        T::one() / (T::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (T::one() + e)
    }
}

/// Leaky ReLU with configurable negative slope.
#[inline]
pub fn leaky_relu<T: Real>(x: T, slope: T) -> T {
    if x >= T::zero() {
        x
    } else {
        x * slope
    }
}

/// Derivative of [`leaky_relu`] (subgradient `1` at the kink).
#[inline]
pub fn leaky_relu_grad<T: Real>(x: T, slope: T) -> T {
    if x >= T::zero() {
        T::one()
    } else {
        slope
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn vec_ops() {
        let a = Vec3::of(1.0, 2.0, 3.0);
        let b = Vec3::of(-4.0, 0.5, 2.0);
        assert_relative_eq!(a.dot(b), -3.0 + 6.0);
        let c: Vec3<f64> = a.cross(b);
        // Orthogonal to both inputs.
        assert_relative_eq!(c.dot(a), 0.0);
        assert_relative_eq!(c.dot(b), 0.0);
        assert_relative_eq!(Vec3::<f64>::of(3.0, 4.0, 0.0).norm(), 5.0);
        assert_relative_eq!(Vec3::<f64>::of(0.0, 0.0, 9.0).normalized().z, 1.0);
    }

    #[test]
    fn mat_inverse_round_trip() {
        let m: Mat3<f64> = Mat3::of([[2.0, 1.0, 0.3], [-1.0, 3.0, 0.7], [0.2, -0.5, 1.9]]);
        let inv = m.inverse().unwrap();
        let prod = m.mul_mat(&inv);
        assert!(prod.max_abs_diff(&Mat3::identity()) < 1e-12);
        // v = M^-1 (M v)
        let v = Vec3::of(0.3, -1.2, 2.5);
        let back = inv.mul_vec(m.mul_vec(v));
        assert_relative_eq!(back.x, v.x, epsilon = 1e-12);
        assert_relative_eq!(back.y, v.y, epsilon = 1e-12);
        assert_relative_eq!(back.z, v.z, epsilon = 1e-12);
    }

    #[test]
    fn singular_matrix_has_no_inverse() {
        let m: Mat3<f64> = Mat3::of([[1.0, 2.0, 3.0], [2.0, 4.0, 6.0], [0.0, 1.0, 1.0]]);
        assert!(m.inverse().is_none());
    }

    #[test]
    fn softplus_reference_values() {
        // softplus(0) = ln 2.
        assert_relative_eq!(softplus(0.0_f64), 0.6931471805599453, epsilon = 1e-15);
        // Large arguments do not overflow and approach the identity.
        assert_relative_eq!(softplus(40.0_f64), 40.0, epsilon = 1e-12);
        assert!(softplus(-40.0_f64) > 0.0);
        assert!(softplus(-40.0_f64) < 1e-15);
    }

    #[test]
    fn sigmoid_is_softplus_derivative() {
        for &x in &[-3.0_f64, -0.7, 0.0, 0.4, 2.5] {
            let h = 1e-6;
            let fd = (softplus(x + h) - softplus(x - h)) / (2.0 * h);
            assert_relative_eq!(sigmoid(x), fd, epsilon = 1e-9);
        }
    }

    #[test]
    fn leaky_relu_slope() {
        assert_eq!(leaky_relu(2.0_f64, 0.2), 2.0);
        assert_eq!(leaky_relu(-2.0_f64, 0.2), -0.4);
        assert_eq!(leaky_relu_grad(-1.0_f64, 0.2), 0.2);
        assert_eq!(leaky_relu_grad(1.0_f64, 0.2), 1.0);
    }
}
