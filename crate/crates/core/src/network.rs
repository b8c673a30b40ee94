//! Network description, parameters and the time-unrolled forward pass.

use ndarray::{s, Array1, Array2, ArrayView1, Axis, Zip};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::layers::{
    accumulate_delayed, accumulate_dense, init_dense, DelayLayerParams, DelaySpec, SpikeHistory,
};
use crate::neuron::{decay_from_param, NeuronConfig, SurrogateConfig};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum LayerKind {
    Feedforward,
    /// Feedforward drive plus all-to-all lateral synapses with a one step lag.
    Recurrent,
    /// Multi-delay synapses from the previous layer.
    Delayed { delays: DelaySpec },
}

impl LayerKind {
    pub fn delays(&self) -> Option<&DelaySpec> {
        match self {
            LayerKind::Delayed { delays } => Some(delays),
            _ => None,
        }
    }

    pub fn is_recurrent(&self) -> bool {
        matches!(self, LayerKind::Recurrent)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerSpec {
    pub size: usize,
    #[serde(flatten)]
    pub kind: LayerKind,
    #[serde(default)]
    pub neuron: NeuronConfig,
}

/// Non-spiking integrator layer read out by the loss.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReadoutSpec {
    pub size: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delays: Option<DelaySpec>,
    pub tau_init: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkSpec {
    pub input_size: usize,
    pub layers: Vec<LayerSpec>,
    pub readout: ReadoutSpec,
    #[serde(default)]
    pub surrogate: SurrogateConfig,
}

impl NetworkSpec {
    pub fn validate(&self) -> Result<()> {
        if self.input_size == 0 {
            return Err(Error::Config("input size must be positive".into()));
        }
        if self.layers.is_empty() {
            return Err(Error::Config("at least one hidden layer is required".into()));
        }
        if self.layers[0].kind.delays().is_some() {
            return Err(Error::Config(
                "the first hidden layer takes the raw input without delays".into(),
            ));
        }
        for (i, l) in self.layers.iter().enumerate() {
            if l.size == 0 {
                return Err(Error::Config(format!("hidden layer {i} has no neurons")));
            }
            l.neuron.validate()?;
        }
        if self.readout.size == 0 {
            return Err(Error::Config("readout size must be positive".into()));
        }
        if !(self.readout.tau_init > 0.0) {
            return Err(Error::Config("readout tau_init must be positive".into()));
        }
        self.surrogate.validate()
    }

    /// Number of units feeding hidden layer `l` (or the readout for `l == layers.len()`).
    pub fn fan_in(&self, l: usize) -> usize {
        if l == 0 {
            self.input_size
        } else {
            self.layers[l - 1].size
        }
    }

    pub fn hidden_neurons(&self) -> usize {
        self.layers.iter().map(|l| l.size).sum()
    }

    /// Largest delay used anywhere in the network.
    pub fn max_delay(&self) -> usize {
        self.layers
            .iter()
            .filter_map(|l| l.kind.delays())
            .chain(self.readout.delays.as_ref())
            .map(DelaySpec::max_delay)
            .max()
            .unwrap_or(0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum Projection {
    Dense { weights: Array2<f64> },
    Delayed(DelayLayerParams),
}

impl Projection {
    fn zeros_like(&self) -> Self {
        match self {
            Projection::Dense { weights } => Projection::Dense {
                weights: Array2::zeros(weights.dim()),
            },
            Projection::Delayed(p) => {
                let mut z = p.clone();
                z.weights.fill(0.0);
                Projection::Delayed(z)
            }
        }
    }

    pub fn post(&self) -> usize {
        match self {
            Projection::Dense { weights } => weights.ncols(),
            Projection::Delayed(p) => p.post(),
        }
    }

    pub fn pre(&self) -> usize {
        match self {
            Projection::Dense { weights } => weights.nrows(),
            Projection::Delayed(p) => p.pre(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerParams {
    pub input: Projection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub recurrent: Option<Array2<f64>>,
    /// Unconstrained decay parameters, one per neuron.
    pub decay: Array1<f64>,
}

impl LayerParams {
    pub fn size(&self) -> usize {
        self.decay.len()
    }

    pub fn alpha(&self) -> Vec<f64> {
        self.decay.iter().map(|&p| decay_from_param(p)).collect()
    }

    fn zeros_like(&self) -> Self {
        Self {
            input: self.input.zeros_like(),
            recurrent: self.recurrent.as_ref().map(|r| Array2::zeros(r.dim())),
            decay: Array1::zeros(self.decay.len()),
        }
    }

    fn init<R: Rng>(
        pre: usize,
        post: usize,
        delays: Option<&DelaySpec>,
        recurrent: bool,
        decay_param: f64,
        gain: f64,
        rng: &mut R,
    ) -> Self {
        let input = match delays {
            Some(d) => Projection::Delayed(DelayLayerParams::init(pre, post, d.clone(), gain, rng)),
            None => Projection::Dense {
                weights: init_dense(pre, post, gain, rng),
            },
        };
        let recurrent = recurrent.then(|| init_dense(post, post, gain, rng));
        Self {
            input,
            recurrent,
            decay: Array1::from_elem(post, decay_param),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkParams {
    pub layers: Vec<LayerParams>,
    pub readout: LayerParams,
}

impl NetworkParams {
    /// Random initialisation; `gain` scales the uniform init bound.
    pub fn init<R: Rng>(spec: &NetworkSpec, gain: f64, rng: &mut R) -> Result<Self> {
        spec.validate()?;
        let mut layers = Vec::with_capacity(spec.layers.len());
        for (l, ls) in spec.layers.iter().enumerate() {
            layers.push(LayerParams::init(
                spec.fan_in(l),
                ls.size,
                ls.kind.delays(),
                ls.kind.is_recurrent(),
                ls.neuron.initial_decay_param(),
                gain,
                rng,
            ));
        }
        let readout = LayerParams::init(
            spec.fan_in(spec.layers.len()),
            spec.readout.size,
            spec.readout.delays.as_ref(),
            false,
            crate::neuron::decay_param_from_tau(spec.readout.tau_init),
            gain,
            rng,
        );
        Ok(Self { layers, readout })
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            layers: self.layers.iter().map(LayerParams::zeros_like).collect(),
            readout: self.readout.zeros_like(),
        }
    }

    /// Checks that the tensors agree with `spec`.
    pub fn check(&self, spec: &NetworkSpec) -> Result<()> {
        check_len("hidden layer count", spec.layers.len(), self.layers.len())?;
        let all = spec
            .layers
            .iter()
            .map(|l| (l.size, l.kind.delays(), l.kind.is_recurrent()))
            .chain(std::iter::once((
                spec.readout.size,
                spec.readout.delays.as_ref(),
                false,
            )));
        for (l, ((size, delays, recurrent), p)) in all.zip(self.all_layers()).enumerate() {
            check_len("layer fan-in", spec.fan_in(l), p.input.pre())?;
            check_len("layer size", size, p.input.post())?;
            check_len("decay vector", size, p.size())?;
            match (&p.input, delays) {
                (Projection::Dense { .. }, None) => {}
                (Projection::Delayed(dp), Some(d)) => {
                    dp.validate()?;
                    if dp.delay_spec != *d {
                        return Err(Error::Contract(format!("layer {l} delay set differs from spec")));
                    }
                }
                _ => {
                    return Err(Error::Contract(format!(
                        "layer {l} projection kind differs from spec"
                    )))
                }
            }
            if p.recurrent.is_some() != recurrent {
                return Err(Error::Contract(format!("layer {l} recurrence differs from spec")));
            }
            if let Some(r) = &p.recurrent {
                check_len("recurrent rows", size, r.nrows())?;
                check_len("recurrent cols", size, r.ncols())?;
            }
        }
        Ok(())
    }

    /// Hidden layers followed by the readout.
    pub fn all_layers(&self) -> impl Iterator<Item = &LayerParams> {
        self.layers.iter().chain(std::iter::once(&self.readout))
    }

    pub fn all_layers_mut(&mut self) -> impl Iterator<Item = &mut LayerParams> {
        self.layers.iter_mut().chain(std::iter::once(&mut self.readout))
    }

    /// Visits every trainable tensor as a flat slice, with the synapse mask
    /// when the tensor has one. Order is fixed.
    pub fn for_each_tensor_mut(&mut self, mut f: impl FnMut(&mut [f64], Option<&[bool]>)) {
        for layer in self.all_layers_mut() {
            match &mut layer.input {
                Projection::Dense { weights } => f(weights.as_slice_mut().expect("standard layout"), None),
                Projection::Delayed(p) => f(
                    p.weights.as_slice_mut().expect("standard layout"),
                    Some(p.mask.as_slice().expect("standard layout")),
                ),
            }
            if let Some(r) = &mut layer.recurrent {
                f(r.as_slice_mut().expect("standard layout"), None);
            }
            f(layer.decay.as_slice_mut().expect("standard layout"), None);
        }
    }

    pub fn for_each_tensor(&self, mut f: impl FnMut(&[f64], Option<&[bool]>)) {
        for layer in self.all_layers() {
            match &layer.input {
                Projection::Dense { weights } => f(weights.as_slice().expect("standard layout"), None),
                Projection::Delayed(p) => f(
                    p.weights.as_slice().expect("standard layout"),
                    Some(p.mask.as_slice().expect("standard layout")),
                ),
            }
            if let Some(r) = &layer.recurrent {
                f(r.as_slice().expect("standard layout"), None);
            }
            f(layer.decay.as_slice().expect("standard layout"), None);
        }
    }

    /// Total number of scalars across all tensors.
    pub fn len(&self) -> usize {
        let mut n = 0;
        self.for_each_tensor(|t, _| n += t.len());
        n
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Trainable scalars not removed by a mask.
    pub fn effective_len(&self) -> usize {
        let mut n = 0;
        self.for_each_tensor(|t, m| {
            n += match m {
                Some(m) => m.iter().filter(|&&b| b).count(),
                None => t.len(),
            }
        });
        n
    }

    pub fn to_flat(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.len());
        self.for_each_tensor(|t, _| v.extend_from_slice(t));
        v
    }

    pub fn add_scaled(&mut self, other: &NetworkParams, scale: f64) {
        let flat = other.to_flat();
        let mut off = 0;
        self.for_each_tensor_mut(|t, _| {
            for (x, y) in t.iter_mut().zip(&flat[off..]) {
                *x += scale * y;
            }
            off += t.len();
        });
    }

    pub fn all_finite(&self) -> bool {
        let mut ok = true;
        self.for_each_tensor(|t, _| ok &= t.iter().all(|x| x.is_finite()));
        ok
    }
}

/// Everything recorded for one hidden layer during a forward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerTrace {
    /// Membrane potential, `(T, N)`.
    pub u: Array2<f64>,
    /// Spike output, `(T, N)`.
    pub theta: Array2<f64>,
    /// Input current, `(T, N)`.
    pub current: Array2<f64>,
}

impl LayerTrace {
    fn new(steps: usize, n: usize) -> Self {
        Self {
            u: Array2::zeros((steps, n)),
            theta: Array2::zeros((steps, n)),
            current: Array2::zeros((steps, n)),
        }
    }

    pub fn spike_count(&self) -> f64 {
        self.theta.sum()
    }
}

/// Record of an unrolled forward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct Tape {
    pub input: Array2<f64>,
    pub layers: Vec<LayerTrace>,
    /// Readout membrane potential, `(T, R)`.
    pub readout: Array2<f64>,
    pub readout_current: Array2<f64>,
}

impl Tape {
    pub fn steps(&self) -> usize {
        self.input.nrows()
    }
}

/// Runs the network over `input` (`T x C`). The returned tape holds the
/// readout potentials in `tape.readout`.
pub fn forward(spec: &NetworkSpec, params: &NetworkParams, input: &Array2<f64>) -> Result<Tape> {
    let steps = input.nrows();
    if steps == 0 {
        return Err(Error::Data("input sequence is empty".into()));
    }
    check_len("input channels", spec.input_size, input.ncols())?;
    params.check(spec)?;

    let surrogate = spec.surrogate;
    let mut traces: Vec<LayerTrace> = spec.layers.iter().map(|l| LayerTrace::new(steps, l.size)).collect();
    let mut readout = Array2::zeros((steps, spec.readout.size));
    let mut readout_current = Array2::zeros((steps, spec.readout.size));

    let mut histories: Vec<Option<SpikeHistory>> = params
        .all_layers()
        .map(|p| match &p.input {
            Projection::Delayed(dp) => Some(SpikeHistory::for_delays(dp.pre(), &dp.delay_spec)),
            Projection::Dense { .. } => None,
        })
        .collect();
    let alphas: Vec<Vec<f64>> = params.all_layers().map(LayerParams::alpha).collect();
    let thresholds: Vec<f64> = spec.layers.iter().map(|l| l.neuron.u_th).collect();

    let n_hidden = spec.layers.len();
    let mut current = Vec::new();
    for k in 0..steps {
        for l in 0..=n_hidden {
            let p = if l < n_hidden { &params.layers[l] } else { &params.readout };
            let src: Vec<f64> = if l == 0 {
                input.row(k).to_vec()
            } else {
                traces[l - 1].theta.row(k).to_vec()
            };
            current.clear();
            current.resize(p.size(), 0.0);
            match (&p.input, &mut histories[l]) {
                (Projection::Dense { weights }, _) => accumulate_dense(weights, &src, &mut current)?,
                (Projection::Delayed(dp), Some(h)) => {
                    h.push(&src)?;
                    accumulate_delayed(dp, h, &mut current)?;
                }
                (Projection::Delayed(_), None) => unreachable!("history allocated for every delayed projection"),
            }
            let alpha = &alphas[l];
            if l < n_hidden {
                let tr = &mut traces[l];
                if k > 0 {
                    if let Some(rec) = &p.recurrent {
                        let prev = tr.theta.row(k - 1).to_vec();
                        accumulate_dense(rec, &prev, &mut current)?;
                    }
                }
                for j in 0..p.size() {
                    let carried = if k > 0 {
                        tr.u[[k - 1, j]] * alpha[j] * (1.0 - tr.theta[[k - 1, j]])
                    } else {
                        0.0
                    };
                    let u = carried + current[j];
                    tr.u[[k, j]] = u;
                    tr.theta[[k, j]] = surrogate.spike(u, thresholds[l]);
                    tr.current[[k, j]] = current[j];
                }
            } else {
                for j in 0..p.size() {
                    let carried = if k > 0 { readout[[k - 1, j]] * alpha[j] } else { 0.0 };
                    readout[[k, j]] = carried + current[j];
                    readout_current[[k, j]] = current[j];
                }
            }
        }
    }

    Ok(Tape {
        input: input.clone(),
        layers: traces,
        readout,
        readout_current,
    })
}

/// Gradients of a scalar loss with respect to every parameter, given
/// `dL/du` of the readout at each step (`T x R`).
///
/// Spikes are differentiated through the surrogate derivative, including
/// the reset gate. Masked synapses get a zero gradient.
pub fn backward(
    spec: &NetworkSpec,
    params: &NetworkParams,
    tape: &Tape,
    readout_grad: &Array2<f64>,
) -> Result<NetworkParams> {
    params.check(spec)?;
    let steps = tape.steps();
    check_len("tape layers", spec.layers.len(), tape.layers.len())?;
    check_len("readout gradient steps", steps, readout_grad.nrows())?;
    check_len("readout gradient width", spec.readout.size, readout_grad.ncols())?;
    check_len("tape readout width", spec.readout.size, tape.readout.ncols())?;
    for (l, (tr, ls)) in tape.layers.iter().zip(&spec.layers).enumerate() {
        if tr.u.dim() != (steps, ls.size) {
            return Err(Error::Contract(format!("tape layer {l} does not match the network")));
        }
    }

    let n_hidden = spec.layers.len();
    let mut grads = params.zeros_like();
    let mut g_theta: Vec<Array2<f64>> = spec.layers.iter().map(|l| Array2::zeros((steps, l.size))).collect();

    // readout: u[k] = alpha * u[k-1] + I[k]
    {
        let p = &params.readout;
        let alpha = p.alpha();
        let r = p.size();
        let mut gu_next = vec![0.0; r];
        let mut gu = vec![0.0; r];
        let mut g_alpha = vec![0.0; r];
        let mut g_cur = Array2::zeros((steps, r));
        for k in (0..steps).rev() {
            for j in 0..r {
                gu[j] = readout_grad[[k, j]] + gu_next[j] * alpha[j];
                if k > 0 {
                    g_alpha[j] += gu[j] * tape.readout[[k - 1, j]];
                }
            }
            g_cur.row_mut(k).assign(&ArrayView1::from(&gu[..]));
            std::mem::swap(&mut gu, &mut gu_next);
        }
        let src = &tape.layers[n_hidden - 1].theta;
        let (gin, gsrc) = (&mut grads.readout.input, &mut g_theta[n_hidden - 1]);
        distribute_projection(&p.input, gin, src, Some(gsrc), &g_cur);
        for (j, g) in grads.readout.decay.iter_mut().enumerate() {
            *g = g_alpha[j] * alpha[j] * (1.0 - alpha[j]);
        }
    }

    for l in (0..n_hidden).rev() {
        let p = &params.layers[l];
        let tr = &tape.layers[l];
        let alpha = p.alpha();
        let u_th = spec.layers[l].neuron.u_th;
        let n = p.size();
        let mut gu_next = vec![0.0; n];
        let mut gu = vec![0.0; n];
        let mut g_alpha = vec![0.0; n];
        let (below, rest) = g_theta.split_at_mut(l);
        let g_self = &mut rest[0];
        let mut g_cur = Array2::zeros((steps, n));
        for k in (0..steps).rev() {
            if k + 1 < steps {
                for j in 0..n {
                    // reset gate: u[k+1] contains -alpha * u[k] * theta[k]
                    g_self[[k, j]] -= alpha[j] * tr.u[[k, j]] * gu_next[j];
                }
                if let Some(rec) = &p.recurrent {
                    for i in 0..n {
                        let mut s = 0.0;
                        for j in 0..n {
                            s += rec[[i, j]] * gu_next[j];
                        }
                        g_self[[k, i]] += s;
                    }
                }
            }
            for j in 0..n {
                let u = tr.u[[k, j]];
                gu[j] = gu_next[j] * alpha[j] * (1.0 - tr.theta[[k, j]])
                    + g_self[[k, j]] * spec.surrogate.grad(u, u_th);
                if k > 0 {
                    g_alpha[j] += gu[j] * tr.u[[k - 1, j]] * (1.0 - tr.theta[[k - 1, j]]);
                }
            }
            if k > 0 {
                if let (Some(_), Some(grec)) = (&p.recurrent, grads.layers[l].recurrent.as_mut()) {
                    for i in 0..n {
                        let t = tr.theta[[k - 1, i]];
                        if t == 0.0 {
                            continue;
                        }
                        for j in 0..n {
                            grec[[i, j]] += t * gu[j];
                        }
                    }
                }
            }
            g_cur.row_mut(k).assign(&ArrayView1::from(&gu[..]));
            std::mem::swap(&mut gu, &mut gu_next);
        }
        let (src, gsrc) = if l == 0 {
            (&tape.input, None)
        } else {
            (&tape.layers[l - 1].theta, Some(&mut below[l - 1]))
        };
        distribute_projection(&p.input, &mut grads.layers[l].input, src, gsrc, &g_cur);
        for (j, g) in grads.layers[l].decay.iter_mut().enumerate() {
            *g = g_alpha[j] * alpha[j] * (1.0 - alpha[j]);
        }
    }

    Ok(grads)
}

/// Pushes `dL/dI` (all steps, `T x post`) through one projection into
/// weight gradients and, when the source is a spiking layer, into its spike
/// gradients.
fn distribute_projection(
    proj: &Projection,
    grad: &mut Projection,
    src: &Array2<f64>,
    mut g_src: Option<&mut Array2<f64>>,
    g_cur: &Array2<f64>,
) {
    let steps = g_cur.nrows();
    match (proj, grad) {
        (Projection::Dense { weights }, Projection::Dense { weights: gw }) => {
            *gw += &src.t().dot(g_cur);
            if let Some(gs) = g_src.as_deref_mut() {
                *gs += &g_cur.dot(&weights.t());
            }
        }
        (Projection::Delayed(dp), Projection::Delayed(gp)) => {
            for (slot, &d) in dp.delay_spec.delays().iter().enumerate() {
                if d >= steps {
                    break;
                }
                let mask = dp.mask.index_axis(Axis(2), slot);
                // input current at step k + d sees source spikes of step k
                let g_late = g_cur.slice(s![d.., ..]);
                let dw = src.slice(s![..steps - d, ..]).t().dot(&g_late);
                Zip::from(gp.weights.index_axis_mut(Axis(2), slot))
                    .and(&dw)
                    .and(&mask)
                    .for_each(|g, &x, &m| {
                        if m {
                            *g += x;
                        }
                    });
                if let Some(gs) = g_src.as_deref_mut() {
                    let w = Zip::from(dp.weights.index_axis(Axis(2), slot))
                        .and(&mask)
                        .map_collect(|&w, &m| if m { w } else { 0.0 });
                    let mut early = gs.slice_mut(s![..steps - d, ..]);
                    early += &g_late.dot(&w.t());
                }
            }
        }
        _ => unreachable!("gradient structure mirrors parameters"),
    }
}
