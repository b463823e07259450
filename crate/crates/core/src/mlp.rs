//! Minimal fully-connected stacks over [`ParamStore`] tensors.
//!
//! Layers are stored as named tensors `{prefix}.{layer}.w` (row-major
//! `[out, in]`) and `{prefix}.{layer}.b`, with a leaky rectifier between
//! layers and a linear final layer. The forward pass records every layer
//! input and pre-activation so the backward pass can accumulate weight
//! gradients without recomputation.

use crate::autodiff::ParamStore;
use crate::error::{Error, Result};
use crate::math::{leaky_relu, leaky_relu_grad};
use crate::num::Real;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Shape and naming of one fully-connected stack.
#[derive(Clone, Debug)]
pub struct MlpSpec {
    pub prefix: String,
    /// `dims[0]` is the input width; each later entry is a layer output.
    pub dims: Vec<usize>,
    /// Negative slope of the leaky rectifier between layers.
    pub slope: f64,
}

/// Saved forward intermediates for one evaluation of a stack.
#[derive(Clone, Debug)]
pub struct MlpRecord<T> {
    /// `inputs[l]` is the input vector of layer `l`.
    pub inputs: Vec<Vec<T>>,
    /// `preacts[l]` is the pre-activation output of layer `l`.
    pub preacts: Vec<Vec<T>>,
}

impl MlpSpec {
    pub fn new(prefix: impl Into<String>, dims: Vec<usize>, slope: f64) -> Self {
        assert!(dims.len() >= 2, "an MLP needs at least one layer");
        Self {
            prefix: prefix.into(),
            dims,
            slope,
        }
    }

    pub fn n_layers(&self) -> usize {
        self.dims.len() - 1
    }

    pub fn in_dim(&self) -> usize {
        self.dims[0]
    }

    pub fn out_dim(&self) -> usize {
        *self.dims.last().unwrap()
    }

    fn weight_name(&self, layer: usize) -> String {
        format!("{}.{}.w", self.prefix, layer)
    }

    fn bias_name(&self, layer: usize) -> String {
        format!("{}.{}.b", self.prefix, layer)
    }

    /// Registers the stack's tensors: fan-in-scaled uniform weights in
    /// `(-1/sqrt(in), 1/sqrt(in))` and zero biases.
    pub fn init_params<T: Real>(&self, store: &mut ParamStore<T>, rng: &mut ChaCha8Rng) -> Result<()> {
        for l in 0..self.n_layers() {
            let (n_in, n_out) = (self.dims[l], self.dims[l + 1]);
            let bound = 1.0 / (n_in as f64).sqrt();
            let w: Vec<T> = (0..n_in * n_out)
                .map(|_| T::of(rng.gen_range(-bound..bound)))
                .collect();
            store.insert(self.weight_name(l), vec![n_out, n_in], w)?;
            store.insert(self.bias_name(l), vec![n_out], vec![T::zero(); n_out])?;
        }
        Ok(())
    }

    /// Forward pass; checks tensor shapes against the spec.
    pub fn forward<T: Real>(&self, store: &ParamStore<T>, x: &[T]) -> Result<(Vec<T>, MlpRecord<T>)> {
        if x.len() != self.in_dim() {
            return Err(Error::shape(
                format!("{} input", self.prefix),
                self.in_dim(),
                x.len(),
            ));
        }
        let slope = T::of(self.slope);
        let mut record = MlpRecord {
            inputs: Vec::with_capacity(self.n_layers()),
            preacts: Vec::with_capacity(self.n_layers()),
        };
        let mut cur = x.to_vec();
        for l in 0..self.n_layers() {
            let (n_in, n_out) = (self.dims[l], self.dims[l + 1]);
            let w = store.value(&self.weight_name(l))?;
            let b = store.value(&self.bias_name(l))?;
            if w.len() != n_in * n_out || b.len() != n_out {
                return Err(Error::shape(
                    format!("{} layer {l}", self.prefix),
                    n_in * n_out,
                    w.len(),
                ));
            }
            let mut pre = vec![T::zero(); n_out];
            for (j, p) in pre.iter_mut().enumerate() {
                let row = &w[j * n_in..(j + 1) * n_in];
                let mut acc = b[j];
                for (wi, xi) in row.iter().zip(&cur) {
                    acc = acc + *wi * *xi;
                }
                *p = acc;
            }
            record.inputs.push(cur);
            let last = l + 1 == self.n_layers();
            cur = if last {
                pre.clone()
            } else {
                pre.iter().map(|&v| leaky_relu(v, slope)).collect()
            };
            record.preacts.push(pre);
        }
        Ok((cur, record))
    }

    /// Backward pass: accumulates weight/bias gradients into `store` and
    /// returns the gradient with respect to the stack input.
    pub fn backward<T: Real>(
        &self,
        store: &mut ParamStore<T>,
        record: &MlpRecord<T>,
        g_out: &[T],
    ) -> Result<Vec<T>> {
        if g_out.len() != self.out_dim() {
            return Err(Error::shape(
                format!("{} upstream", self.prefix),
                self.out_dim(),
                g_out.len(),
            ));
        }
        let slope = T::of(self.slope);
        let mut g = g_out.to_vec();
        for l in (0..self.n_layers()).rev() {
            let (n_in, n_out) = (self.dims[l], self.dims[l + 1]);
            let last = l + 1 == self.n_layers();
            if !last {
                for (gj, pj) in g.iter_mut().zip(&record.preacts[l]) {
                    *gj = *gj * leaky_relu_grad(*pj, slope);
                }
            }
            let x = &record.inputs[l];
            // d b += g;  d W[j,i] += g_j x_i;  g_x_i = sum_j W[j,i] g_j.
            store.accumulate_grad(&self.bias_name(l), &g)?;
            let mut g_x = vec![T::zero(); n_in];
            {
                let (w, d_w) = store.value_and_grad_mut(&self.weight_name(l))?;
                for j in 0..n_out {
                    let gj = g[j];
                    let row = &w[j * n_in..(j + 1) * n_in];
                    let d_row = &mut d_w[j * n_in..(j + 1) * n_in];
                    for i in 0..n_in {
                        d_row[i] = d_row[i] + gj * x[i];
                        g_x[i] = g_x[i] + row[i] * gj;
                    }
                }
            }
            g = g_x;
        }
        Ok(g)
    }
}
