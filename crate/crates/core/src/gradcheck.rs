//! Finite-difference check of the analytic backward pass.

use ndarray::Array2;
use rand::seq::index::sample;
use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::network::{backward, forward, NetworkParams, NetworkSpec};

/// Default central-difference step.
pub const DEFAULT_EPS: f64 = 1e-4;

/// Linear functional `sum_t,r w[t,r] * readout[t,r]` of the readout trace.
/// Its gradient with respect to the readout is `w` itself.
pub fn probe_loss(spec: &NetworkSpec, params: &NetworkParams, input: &Array2<f64>, w: &Array2<f64>) -> Result<f64> {
    let tape = forward(spec, params, input)?;
    if tape.readout.dim() != w.dim() {
        return Err(Error::Contract("probe weights do not match the readout trace".into()));
    }
    Ok((&tape.readout * w).sum())
}

/// `|a - b| / max(|a|, |b|, 1e-8)`.
pub fn relative_error(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-8)
}

#[derive(Debug, Clone, Serialize)]
pub struct GradCheckEntry {
    pub index: usize,
    pub analytic: f64,
    pub numeric: f64,
    pub rel_error: f64,
}

fn with_flat(params: &mut NetworkParams, index: usize, f: impl FnOnce(&mut f64)) {
    let mut off = 0;
    let mut f = Some(f);
    params.for_each_tensor_mut(|t, _| {
        if index >= off && index < off + t.len() {
            if let Some(f) = f.take() {
                f(&mut t[index - off]);
            }
        }
        off += t.len();
    });
}

fn flat_mask(params: &NetworkParams) -> Vec<bool> {
    let mut m = Vec::with_capacity(params.len());
    params.for_each_tensor(|t, mask| match mask {
        Some(mask) => m.extend_from_slice(mask),
        None => m.extend(std::iter::repeat(true).take(t.len())),
    });
    m
}

/// Compares backward against central differences on `samples` randomly chosen
/// unmasked scalars. The spec should use soft spikes so the forward pass is
/// differentiable.
pub fn check_gradients<R: Rng>(
    spec: &NetworkSpec,
    params: &NetworkParams,
    input: &Array2<f64>,
    samples: usize,
    eps: f64,
    rng: &mut R,
) -> Result<Vec<GradCheckEntry>> {
    let tape = forward(spec, params, input)?;
    let w = Array2::from_shape_fn(tape.readout.dim(), |_| rng.gen_range(-1.0..1.0));
    let grads = backward(spec, params, &tape, &w)?.to_flat();
    let active: Vec<usize> = flat_mask(params)
        .iter()
        .enumerate()
        .filter_map(|(i, &b)| b.then_some(i))
        .collect();
    let picks = sample(rng, active.len(), samples.min(active.len()));
    let mut out = Vec::with_capacity(picks.len());
    for p in picks {
        let index = active[p];
        let mut plus = params.clone();
        with_flat(&mut plus, index, |x| *x += eps);
        let mut minus = params.clone();
        with_flat(&mut minus, index, |x| *x -= eps);
        let numeric = (probe_loss(spec, &plus, input, &w)? - probe_loss(spec, &minus, input, &w)?) / (2.0 * eps);
        let analytic = grads[index];
        out.push(GradCheckEntry {
            index,
            analytic,
            numeric,
            rel_error: relative_error(analytic, numeric),
        });
    }
    Ok(out)
}
