//! Dense voxel grids over the normalized cube `[-1, 1]^3` with trilinear
//! interpolation and its adjoint.
//!
//! Storage is channel-major, `z`-major within a channel:
//! `data[((c * D + z) * D + y) * D + x]`. A normalized coordinate `u` maps to
//! the continuous grid coordinate `g = (u + 1)(D - 1) / 2`, so the lattice
//! points sit exactly at `u_i = 2 i / (D - 1) - 1`.

use crate::error::{Error, Result};
use crate::math::Vec3;
use crate::num::Real;

/// Out-of-domain policy for sampling.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Boundary {
    /// Points strictly outside `[-1, 1]^3` read as zero in every channel.
    ZeroPad,
    /// Coordinates clamp to the cube surface before sampling.
    ClampToEdge,
}

/// Dense multi-channel voxel grid with cubic resolution.
#[derive(Clone, Debug, PartialEq)]
pub struct VoxelGrid<T> {
    channels: usize,
    res: usize,
    data: Vec<T>,
}

/// One trilinear sampling site: the eight corner offsets within a channel,
/// their weights, and the chain factor from normalized coordinates to grid
/// coordinates (zero on axes clamped at the boundary).
struct Site<T> {
    off: [usize; 8],
    w: [T; 8],
    /// Per-corner fractional weights split by axis: `wx[bit], wy[bit], wz[bit]`.
    wa: [[T; 2]; 3],
    /// `d g / d u` per axis; zero when that axis was clamped or `D = 1`.
    dgdu: [T; 3],
}

impl<T: Real> VoxelGrid<T> {
    pub fn zeros(channels: usize, res: usize) -> Self {
        assert!(channels > 0 && res > 0, "empty grid");
        Self {
            channels,
            res,
            data: vec![T::zero(); channels * res * res * res],
        }
    }

    pub fn from_data(channels: usize, res: usize, data: Vec<T>) -> Result<Self> {
        if data.len() != channels * res * res * res {
            return Err(Error::shape(
                "voxel grid",
                channels * res * res * res,
                data.len(),
            ));
        }
        Ok(Self {
            channels,
            res,
            data,
        })
    }

    /// Fills each cell from `f(channel, z, y, x)`.
    pub fn from_fn(channels: usize, res: usize, mut f: impl FnMut(usize, usize, usize, usize) -> T) -> Self {
        let mut g = Self::zeros(channels, res);
        for c in 0..channels {
            for z in 0..res {
                for y in 0..res {
                    for x in 0..res {
                        let i = g.index(c, z, y, x);
                        g.data[i] = f(c, z, y, x);
                    }
                }
            }
        }
        g
    }

    #[inline]
    pub fn channels(&self) -> usize {
        self.channels
    }

    #[inline]
    pub fn res(&self) -> usize {
        self.res
    }

    #[inline]
    pub fn data(&self) -> &[T] {
        &self.data
    }

    #[inline]
    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    #[inline]
    pub fn index(&self, c: usize, z: usize, y: usize, x: usize) -> usize {
        debug_assert!(c < self.channels && z < self.res && y < self.res && x < self.res);
        ((c * self.res + z) * self.res + y) * self.res + x
    }

    #[inline]
    pub fn get(&self, c: usize, z: usize, y: usize, x: usize) -> T {
        self.data[self.index(c, z, y, x)]
    }

    #[inline]
    pub fn set(&mut self, c: usize, z: usize, y: usize, x: usize, v: T) {
        let i = self.index(c, z, y, x);
        self.data[i] = v;
    }

    /// Normalized coordinate of lattice index `i` along any axis.
    pub fn lattice_coord(&self, i: usize) -> T {
        if self.res == 1 {
            T::zero()
        } else {
            T::of(2.0) * T::of_usize(i) / T::of_usize(self.res - 1) - T::one()
        }
    }

    /// Resolves the sampling site for `u`, or `None` for a zero-padded miss.
    fn locate(&self, u: Vec3<T>, boundary: Boundary) -> Option<Site<T>> {
        let one = T::one();
        let mut coords = [u.x, u.y, u.z];
        match boundary {
            Boundary::ZeroPad => {
                for c in coords {
                    if c < -one || c > one {
                        return None;
                    }
                }
            }
            Boundary::ClampToEdge => {}
        }
        let d = self.res;
        let half_span = T::of(0.5) * T::of_usize(d - 1);
        let mut i0 = [0usize; 3];
        let mut i1 = [0usize; 3];
        let mut frac = [T::zero(); 3];
        let mut dgdu = [T::zero(); 3];
        for a in 0..3 {
            let mut c = coords[a];
            let mut clamped = false;
            if c < -one {
                c = -one;
                clamped = true;
            } else if c > one {
                c = one;
                clamped = true;
            }
            coords[a] = c;
            if d == 1 {
                continue;
            }
            let g = (c + one) * half_span;
            let mut lo = g.floor().to_usize().unwrap_or(0);
            if lo > d - 2 {
                lo = d - 2;
            }
            i0[a] = lo;
            i1[a] = lo + 1;
            frac[a] = g - T::of_usize(lo);
            dgdu[a] = if clamped { T::zero() } else { half_span };
        }
        // Corner index bit 0 selects x, bit 1 selects y, bit 2 selects z.
        let pick = |a: usize, bit: usize| if bit == 0 { i0[a] } else { i1[a] };
        let mut off = [0usize; 8];
        for (b, o) in off.iter_mut().enumerate() {
            let (bx, by, bz) = (b & 1, (b >> 1) & 1, (b >> 2) & 1);
            *o = (pick(2, bz) * d + pick(1, by)) * d + pick(0, bx);
        }
        let wa = [
            [one - frac[0], frac[0]],
            [one - frac[1], frac[1]],
            [one - frac[2], frac[2]],
        ];
        let mut w = [T::zero(); 8];
        for (b, wb) in w.iter_mut().enumerate() {
            *wb = wa[0][b & 1] * wa[1][(b >> 1) & 1] * wa[2][(b >> 2) & 1];
        }
        Some(Site { off, w, wa, dgdu })
    }

    /// Trilinear sample of all channels at `u` into `out`.
    pub fn sample_into(&self, u: Vec3<T>, boundary: Boundary, out: &mut [T]) {
        debug_assert_eq!(out.len(), self.channels);
        let Some(site) = self.locate(u, boundary) else {
            for o in out.iter_mut() {
                *o = T::zero();
            }
            return;
        };
        let stride = self.res * self.res * self.res;
        for (c, o) in out.iter_mut().enumerate() {
            let base = c * stride;
            let mut acc = T::zero();
            for b in 0..8 {
                acc = acc + self.data[base + site.off[b]] * site.w[b];
            }
            *o = acc;
        }
    }

    /// Trilinear sample of a single channel at `u`.
    pub fn sample_channel(&self, c: usize, u: Vec3<T>, boundary: Boundary) -> T {
        let Some(site) = self.locate(u, boundary) else {
            return T::zero();
        };
        let base = c * self.res * self.res * self.res;
        let mut acc = T::zero();
        for b in 0..8 {
            acc = acc + self.data[base + site.off[b]] * site.w[b];
        }
        acc
    }

    /// Adjoint of [`VoxelGrid::sample_channel`] for a scalar upstream value.
    /// Scatters into `grad_data` (same layout as this grid) and returns the
    /// gradient with respect to `u`.
    pub fn sample_channel_adjoint_into(
        &self,
        c: usize,
        u: Vec3<T>,
        boundary: Boundary,
        upstream: T,
        grad_data: &mut [T],
    ) -> Vec3<T> {
        debug_assert_eq!(grad_data.len(), self.data.len());
        let Some(site) = self.locate(u, boundary) else {
            return Vec3::zero();
        };
        let base = c * self.res * self.res * self.res;
        let mut dg = [T::zero(); 3];
        for b in 0..8 {
            let idx = base + site.off[b];
            grad_data[idx] = grad_data[idx] + upstream * site.w[b];
            let v = self.data[idx] * upstream;
            let (bx, by, bz) = (b & 1, (b >> 1) & 1, (b >> 2) & 1);
            let sx = if bx == 1 { T::one() } else { -T::one() };
            let sy = if by == 1 { T::one() } else { -T::one() };
            let sz = if bz == 1 { T::one() } else { -T::one() };
            dg[0] = dg[0] + v * sx * site.wa[1][by] * site.wa[2][bz];
            dg[1] = dg[1] + v * site.wa[0][bx] * sy * site.wa[2][bz];
            dg[2] = dg[2] + v * site.wa[0][bx] * site.wa[1][by] * sz;
        }
        Vec3::new(
            dg[0] * site.dgdu[0],
            dg[1] * site.dgdu[1],
            dg[2] * site.dgdu[2],
        )
    }

    /// Adjoint of [`VoxelGrid::sample_into`]: scatters `upstream` (one value
    /// per channel) into `grad_data` — a buffer with this grid's layout — and
    /// returns the gradient with respect to the normalized coordinate.
    pub fn sample_adjoint_into(
        &self,
        u: Vec3<T>,
        boundary: Boundary,
        upstream: &[T],
        grad_data: &mut [T],
    ) -> Vec3<T> {
        debug_assert_eq!(upstream.len(), self.channels);
        debug_assert_eq!(grad_data.len(), self.data.len());
        let Some(site) = self.locate(u, boundary) else {
            return Vec3::zero();
        };
        let stride = self.res * self.res * self.res;
        let mut dg = [T::zero(); 3];
        for (c, &up) in upstream.iter().enumerate() {
            if up == T::zero() {
                continue;
            }
            let base = c * stride;
            for b in 0..8 {
                let idx = base + site.off[b];
                grad_data[idx] = grad_data[idx] + up * site.w[b];
                let v = self.data[idx] * up;
                let (bx, by, bz) = (b & 1, (b >> 1) & 1, (b >> 2) & 1);
                // d w[b] / d g_axis replaces that axis' factor with ±1.
                let sx = if bx == 1 { T::one() } else { -T::one() };
                let sy = if by == 1 { T::one() } else { -T::one() };
                let sz = if bz == 1 { T::one() } else { -T::one() };
                dg[0] = dg[0] + v * sx * site.wa[1][by] * site.wa[2][bz];
                dg[1] = dg[1] + v * site.wa[0][bx] * sy * site.wa[2][bz];
                dg[2] = dg[2] + v * site.wa[0][bx] * site.wa[1][by] * sz;
            }
        }
        Vec3::new(
            dg[0] * site.dgdu[0],
            dg[1] * site.dgdu[1],
            dg[2] * site.dgdu[2],
        )
    }
}

/// Trilinear sample returning a fresh vector (one value per channel).
pub fn sample_trilinear<T: Real>(grid: &VoxelGrid<T>, u: Vec3<T>, boundary: Boundary) -> Vec<T> {
    let mut out = vec![T::zero(); grid.channels()];
    grid.sample_into(u, boundary, &mut out);
    out
}

/// Adjoint of [`sample_trilinear`]: returns the sparse cell-gradient list
/// (raw data index, value) and the gradient with respect to `u`.
pub fn grid_adjoint_sample<T: Real>(
    grid: &VoxelGrid<T>,
    u: Vec3<T>,
    boundary: Boundary,
    upstream: &[T],
) -> (Vec<(usize, T)>, Vec3<T>) {
    let mut grad = vec![T::zero(); grid.data().len()];
    let du = grid.sample_adjoint_into(u, boundary, upstream, &mut grad);
    let sparse = grad
        .into_iter()
        .enumerate()
        .filter(|(_, v)| *v != T::zero())
        .collect();
    (sparse, du)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// 2^3 single-channel grid with value `x + 2y + 4z` at each corner.
    fn corner_grid() -> VoxelGrid<f64> {
        VoxelGrid::from_fn(1, 2, |_, z, y, x| (x + 2 * y + 4 * z) as f64)
    }

    #[test]
    fn lattice_points_are_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let g = VoxelGrid::from_fn(2, 5, |_, _, _, _| rng.gen_range(-1.0..1.0));
        for z in 0..5 {
            for y in 0..5 {
                for x in 0..5 {
                    let u = Vec3::new(g.lattice_coord(x), g.lattice_coord(y), g.lattice_coord(z));
                    let s = sample_trilinear(&g, u, Boundary::ZeroPad);
                    assert_eq!(s[0], g.get(0, z, y, x));
                    assert_eq!(s[1], g.get(1, z, y, x));
                }
            }
        }
    }

    #[test]
    fn frozen_midpoint_values() {
        let g = corner_grid();
        // Center of the cell: mean of all eight corners = 3.5.
        let s = sample_trilinear(&g, Vec3::of(0.0, 0.0, 0.0), Boundary::ZeroPad);
        assert_relative_eq!(s[0], 3.5, epsilon = 1e-15);
        // u = (0.5, -1, -1): g_x = 0.75, interpolating 0 and 1.
        let s = sample_trilinear(&g, Vec3::of(0.5, -1.0, -1.0), Boundary::ZeroPad);
        assert_relative_eq!(s[0], 0.75, epsilon = 1e-15);
        // Far corner.
        let s = sample_trilinear(&g, Vec3::of(1.0, 1.0, 1.0), Boundary::ZeroPad);
        assert_relative_eq!(s[0], 7.0, epsilon = 1e-15);
    }

    #[test]
    fn zero_pad_outside_clamp_inside() {
        let g = corner_grid();
        let just_out = Vec3::of(1.0 + 1e-9, 0.0, 0.0);
        assert_eq!(sample_trilinear(&g, just_out, Boundary::ZeroPad)[0], 0.0);
        // Clamp-to-edge at a far coordinate equals the face value.
        let far = Vec3::of(7.0, -1.0, -1.0);
        let edge = Vec3::of(1.0, -1.0, -1.0);
        assert_eq!(
            sample_trilinear(&g, far, Boundary::ClampToEdge)[0],
            sample_trilinear(&g, edge, Boundary::ZeroPad)[0]
        );
    }

    #[test]
    fn partition_of_unity() {
        let g = VoxelGrid::from_fn(1, 7, |_, _, _, _| 1.0_f64);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..100 {
            let u = Vec3::new(
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
            );
            let s = sample_trilinear(&g, u, Boundary::ZeroPad);
            assert_relative_eq!(s[0], 1.0, epsilon = 1e-14);
        }
    }

    #[test]
    fn adjoint_matches_linearity_in_cells() {
        // The sample is linear in the cell values, so the scatter list is the
        // exact differential: f(V + dV) - f(V) = sum(scatter * dV).
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let g = VoxelGrid::from_fn(3, 4, |_, _, _, _| rng.gen_range(-1.0..1.0));
        for _ in 0..20 {
            let u = Vec3::new(
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
            );
            let up: Vec<f64> = (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let (scatter, _) = grid_adjoint_sample(&g, u, Boundary::ZeroPad, &up);

            let delta: Vec<f64> = (0..g.data().len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let mut g2 = g.clone();
            for (d, dv) in g2.data_mut().iter_mut().zip(&delta) {
                *d += dv;
            }
            let f = |gr: &VoxelGrid<f64>| -> f64 {
                sample_trilinear(gr, u, Boundary::ZeroPad)
                    .iter()
                    .zip(&up)
                    .map(|(s, u)| s * u)
                    .sum()
            };
            let predicted: f64 = scatter.iter().map(|(i, v)| v * delta[*i]).sum();
            assert_relative_eq!(f(&g2) - f(&g), predicted, epsilon = 1e-12);
        }
    }

    #[test]
    fn coordinate_gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let g = VoxelGrid::from_fn(2, 5, |_, _, _, _| rng.gen_range(-1.0..1.0));
        let up = [0.7, -0.3];
        for _ in 0..30 {
            // Stay inside one cell so the function is smooth around u.
            let u = Vec3::new(
                rng.gen_range(-0.9..0.9),
                rng.gen_range(-0.9..0.9),
                rng.gen_range(-0.9..0.9),
            );
            let (_, du) = grid_adjoint_sample(&g, u, Boundary::ZeroPad, &up);
            let f = |u: Vec3<f64>| -> f64 {
                sample_trilinear(&g, u, Boundary::ZeroPad)
                    .iter()
                    .zip(&up)
                    .map(|(s, w)| s * w)
                    .sum()
            };
            let h = 1e-7;
            for a in 0..3 {
                let mut lo = u;
                let mut hi = u;
                lo.set(a, u.get(a) - h);
                hi.set(a, u.get(a) + h);
                let fd = (f(hi) - f(lo)) / (2.0 * h);
                // Skip probes that straddle a cell face, where the derivative
                // legitimately jumps.
                let gc = (u.get(a) + 1.0) * 2.0;
                if (gc - gc.round()).abs() < 1e-5 {
                    continue;
                }
                assert_relative_eq!(du.get(a), fd, epsilon = 1e-6, max_relative = 1e-6);
            }
        }
    }

    #[test]
    fn clamped_axis_has_zero_coordinate_gradient() {
        let g = corner_grid();
        let (_, du) = grid_adjoint_sample(
            &g,
            Vec3::of(3.0, 0.2, -0.4),
            Boundary::ClampToEdge,
            &[1.0],
        );
        assert_eq!(du.x, 0.0);
        assert_ne!(du.y, 0.0);
        assert_ne!(du.z, 0.0);
    }

    #[test]
    fn channel_sampler_matches_full_sampler() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let g = VoxelGrid::from_fn(4, 3, |_, _, _, _| rng.gen_range(-2.0..2.0));
        for _ in 0..25 {
            let u = Vec3::new(
                rng.gen_range(-1.2..1.2),
                rng.gen_range(-1.2..1.2),
                rng.gen_range(-1.2..1.2),
            );
            let full = sample_trilinear(&g, u, Boundary::ClampToEdge);
            for c in 0..4 {
                assert_eq!(g.sample_channel(c, u, Boundary::ClampToEdge), full[c]);
            }
            // Single-channel adjoint agrees with the full adjoint restricted
            // to that channel.
            let mut up = vec![0.0; 4];
            up[2] = 1.3;
            let mut grad_full = vec![0.0; g.data().len()];
            let du_full = g.sample_adjoint_into(u, Boundary::ClampToEdge, &up, &mut grad_full);
            let mut grad_ch = vec![0.0; g.data().len()];
            let du_ch = g.sample_channel_adjoint_into(2, u, Boundary::ClampToEdge, 1.3, &mut grad_ch);
            assert_eq!(grad_full, grad_ch);
            assert_eq!(du_full, du_ch);
        }
    }

    #[test]
    fn single_cell_grid_is_constant() {
        let g = VoxelGrid::from_data(1, 1, vec![2.5_f64]).unwrap();
        for u in [Vec3::of(0.0, 0.0, 0.0), Vec3::of(0.9, -0.3, 0.2)] {
            assert_eq!(sample_trilinear(&g, u, Boundary::ZeroPad)[0], 2.5);
        }
        let (scatter, du) = grid_adjoint_sample(&g, Vec3::zero(), Boundary::ZeroPad, &[1.0]);
        // All eight corner contributions land on the one cell.
        assert_relative_eq!(scatter[0].1, 1.0, epsilon = 1e-15);
        assert_eq!(du, Vec3::zero());
    }
}
