//! Named parameter tensors, the training tape, and gradient verification.
//!
//! Differentiation here is hand-written reverse mode at pipeline-stage
//! granularity: the forward pass records a small tape of stage entries
//! (decoded frames, rendered pixels, loss terms), and [`backward`] walks it
//! in reverse applying each stage's analytic adjoint. Gradients accumulate
//! into the [`ParamStore`], which pairs every value tensor with a gradient
//! tensor of the same shape.

use crate::error::{Error, Result};
use crate::num::Real;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::collections::BTreeMap;

/// One named tensor with its gradient buffer.
#[derive(Clone, Debug)]
pub struct Param<T> {
    dims: Vec<usize>,
    value: Vec<T>,
    grad: Vec<T>,
}

impl<T: Real> Param<T> {
    #[inline]
    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.value.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.value.is_empty()
    }

    #[inline]
    pub fn value(&self) -> &[T] {
        &self.value
    }

    #[inline]
    pub fn grad(&self) -> &[T] {
        &self.grad
    }
}

/// Deterministically ordered collection of named parameter tensors.
///
/// Iteration order is the lexicographic name order (BTreeMap), which makes
/// every reduction over parameters reproducible.
#[derive(Clone, Debug, Default)]
pub struct ParamStore<T> {
    map: BTreeMap<String, Param<T>>,
}

impl<T: Real> ParamStore<T> {
    pub fn new() -> Self {
        Self {
            map: BTreeMap::new(),
        }
    }

    /// Registers a tensor. The value length must match the dimension product.
    pub fn insert(&mut self, name: impl Into<String>, dims: Vec<usize>, value: Vec<T>) -> Result<()> {
        let name = name.into();
        let expect: usize = dims.iter().product();
        if value.len() != expect {
            return Err(Error::shape(format!("param {name:?}"), expect, value.len()));
        }
        let grad = vec![T::zero(); value.len()];
        self.map.insert(name, Param { dims, value, grad });
        Ok(())
    }

    pub fn contains(&self, name: &str) -> bool {
        self.map.contains_key(name)
    }

    pub fn remove(&mut self, name: &str) -> Option<Param<T>> {
        self.map.remove(name)
    }

    pub fn get(&self, name: &str) -> Result<&Param<T>> {
        self.map
            .get(name)
            .ok_or_else(|| Error::UnknownParam(name.to_string()))
    }

    pub fn value(&self, name: &str) -> Result<&[T]> {
        Ok(&self.get(name)?.value)
    }

    pub fn value_mut(&mut self, name: &str) -> Result<&mut [T]> {
        Ok(&mut self
            .map
            .get_mut(name)
            .ok_or_else(|| Error::UnknownParam(name.to_string()))?
            .value)
    }

    pub fn grad(&self, name: &str) -> Result<&[T]> {
        Ok(&self.get(name)?.grad)
    }

    pub fn grad_mut(&mut self, name: &str) -> Result<&mut [T]> {
        Ok(&mut self
            .map
            .get_mut(name)
            .ok_or_else(|| Error::UnknownParam(name.to_string()))?
            .grad)
    }

    /// Simultaneous read access to a value and write access to its gradient,
    /// for adjoints that need both (e.g. matrix multiply backward).
    pub fn value_and_grad_mut(&mut self, name: &str) -> Result<(&[T], &mut [T])> {
        let p = self
            .map
            .get_mut(name)
            .ok_or_else(|| Error::UnknownParam(name.to_string()))?;
        Ok((&p.value, &mut p.grad))
    }

    /// Adds `src` into the gradient buffer of `name`.
    pub fn accumulate_grad(&mut self, name: &str, src: &[T]) -> Result<()> {
        let g = self.grad_mut(name)?;
        if g.len() != src.len() {
            return Err(Error::shape(format!("grad {name:?}"), g.len(), src.len()));
        }
        for (a, b) in g.iter_mut().zip(src) {
            *a = *a + *b;
        }
        Ok(())
    }

    pub fn zero_grads(&mut self) {
        for p in self.map.values_mut() {
            for g in &mut p.grad {
                *g = T::zero();
            }
        }
    }

    /// Names in deterministic (lexicographic) order.
    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.map.keys().map(String::as_str)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Param<T>)> {
        self.map.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    /// Total scalar count across all tensors.
    pub fn total_len(&self) -> usize {
        self.map.values().map(|p| p.value.len()).sum()
    }

    /// Errors with the first offending tensor name if any gradient value is
    /// NaN or infinite.
    pub fn check_finite_grads(&self) -> Result<()> {
        for (name, p) in &self.map {
            if p.grad.iter().any(|g| !g.is_finite()) {
                return Err(Error::NonFiniteGradient {
                    tensor: name.clone(),
                });
            }
        }
        Ok(())
    }

    /// Converts value tensors (and zeroed gradients) to another scalar type.
    pub fn cast<U: Real>(&self) -> ParamStore<U> {
        let mut out = ParamStore::new();
        for (name, p) in &self.map {
            let value: Vec<U> = p.value.iter().map(|v| U::of(v.f64())).collect();
            out.insert(name.clone(), p.dims.clone(), value)
                .expect("shape preserved by cast");
        }
        out
    }
}

/// Options for [`finite_diff_check`].
#[derive(Clone, Debug)]
pub struct FdOptions {
    /// Central-difference step.
    pub eps: f64,
    /// Relative-error tolerance per coordinate.
    pub rel_tol: f64,
    /// Denominator floor for the relative error, guarding near-zero
    /// gradients against round-off noise.
    pub abs_floor: f64,
    /// Cap on probed coordinates per tensor; larger tensors are subsampled
    /// deterministically from `seed`.
    pub max_coords_per_tensor: usize,
    pub seed: u64,
}

impl Default for FdOptions {
    fn default() -> Self {
        Self {
            eps: 1e-4,
            rel_tol: 1e-4,
            abs_floor: 1e-8,
            max_coords_per_tensor: 64,
            seed: 0,
        }
    }
}

/// A coordinate whose numeric and analytic derivatives disagree.
#[derive(Clone, Debug)]
pub struct FdFailure {
    pub tensor: String,
    pub index: usize,
    pub analytic: f64,
    pub numeric: f64,
    pub rel_err: f64,
}

/// Outcome of a finite-difference sweep.
#[derive(Clone, Debug, Default)]
pub struct FdReport {
    /// Coordinates compared against the analytic gradient.
    pub checked: usize,
    /// Coordinates skipped because the objective is locally non-smooth
    /// (e.g. the probe straddles a trilinear cell face or a clamp).
    pub excluded: usize,
    pub worst_rel_err: f64,
    pub failures: Vec<FdFailure>,
}

impl FdReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

/// Compares analytic gradients against central finite differences.
///
/// `store` must already hold the analytic gradient of `f` in its gradient
/// buffers. `f` is re-evaluated on perturbed copies of the store; it must be
/// deterministic, which is verified up front by evaluating it twice.
///
/// Non-smooth sample points are detected by halving the step: a smooth
/// objective changes its central-difference estimate by O(eps^2), so probes
/// whose estimate moves materially are excluded rather than failed.
pub fn finite_diff_check<T: Real>(
    store: &ParamStore<T>,
    mut f: impl FnMut(&ParamStore<T>) -> Result<T>,
    opts: &FdOptions,
) -> Result<FdReport> {
    let base_a = f(store)?.f64();
    let base_b = f(store)?.f64();
    if base_a != base_b {
        return Err(Error::NonDeterministic(base_a, base_b));
    }

    let mut report = FdReport::default();
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let names: Vec<String> = store.names().map(str::to_string).collect();
    let mut scratch = store.clone();
    for name in names {
        let len = store.get(&name)?.len();
        let mut coords: Vec<usize> = (0..len).collect();
        if len > opts.max_coords_per_tensor {
            coords.shuffle(&mut rng);
            coords.truncate(opts.max_coords_per_tensor);
            coords.sort_unstable();
        }
        for i in coords {
            let v0 = store.value(&name)?[i];
            let analytic = store.grad(&name)?[i].f64();

            let mut probe = |eps: f64| -> Result<f64> {
                let vm = scratch.value_mut(&name)?;
                vm[i] = v0 + T::of(eps);
                let hi = f(&scratch)?.f64();
                let vm = scratch.value_mut(&name)?;
                vm[i] = v0 - T::of(eps);
                let lo = f(&scratch)?.f64();
                let vm = scratch.value_mut(&name)?;
                vm[i] = v0;
                Ok((hi - lo) / (2.0 * eps))
            };

            let numeric = probe(opts.eps)?;
            let scale = analytic.abs().max(numeric.abs()).max(opts.abs_floor);
            let rel_err = (analytic - numeric).abs() / scale;
            if rel_err > opts.rel_tol {
                // Re-probe with half the step: if the estimate itself is not
                // converged, the function is locally non-smooth here.
                let refined = probe(opts.eps * 0.5)?;
                let drift = (refined - numeric).abs() / scale;
                if drift > opts.rel_tol {
                    report.excluded += 1;
                    continue;
                }
                // Converged estimate that still disagrees: genuine failure.
                // Keep the tighter of the two estimates for the report.
                let rel_refined = (analytic - refined).abs() / scale;
                report.failures.push(FdFailure {
                    tensor: name.clone(),
                    index: i,
                    analytic,
                    numeric: refined,
                    rel_err: rel_err.min(rel_refined),
                });
            }
            report.checked += 1;
            report.worst_rel_err = report.worst_rel_err.max(rel_err);
        }
    }
    Ok(report)
}
