//! Synaptic projections: plain feedforward, lateral recurrence and
//! multi-delay (axonal) synapses, plus the spike history they read from.

use ndarray::{Array2, Array3};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};

/// Sorted, duplicate-free set of axonal delays in timesteps.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawDelaySpec")]
pub struct DelaySpec {
    delays: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    depth: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    stride: Option<usize>,
}

/// Either an explicit list or a `depth`/`stride` window.
#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDelaySpec {
    #[serde(default)]
    delays: Option<Vec<usize>>,
    #[serde(default)]
    depth: Option<usize>,
    #[serde(default)]
    stride: Option<usize>,
}

impl TryFrom<RawDelaySpec> for DelaySpec {
    type Error = Error;

    fn try_from(raw: RawDelaySpec) -> Result<Self> {
        match (raw.delays, raw.depth, raw.stride) {
            (None, Some(depth), Some(stride)) => Self::from_depth_stride(depth, stride),
            (Some(delays), None, None) => Self::new(delays),
            (Some(delays), None, Some(stride)) => Ok(Self::new(delays)?.with_stride(stride)),
            (Some(delays), Some(depth), Some(stride)) => {
                let window = Self::from_depth_stride(depth, stride)?;
                if window.delays != delays {
                    return Err(Error::Config(format!(
                        "delays {delays:?} do not match depth {depth} and stride {stride}"
                    )));
                }
                Ok(window)
            }
            _ => Err(Error::Config(
                "a delay set needs `delays`, or `depth` together with `stride`".into(),
            )),
        }
    }
}

impl DelaySpec {
    pub fn new(delays: Vec<usize>) -> Result<Self> {
        if delays.is_empty() {
            return Err(Error::Contract("delay set must not be empty".into()));
        }
        if delays.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Contract(format!(
                "delays must be strictly increasing, got {delays:?}"
            )));
        }
        Ok(Self {
            delays,
            depth: None,
            stride: None,
        })
    }

    /// A single zero delay: an ordinary synapse.
    pub fn immediate() -> Self {
        Self {
            delays: vec![0],
            depth: None,
            stride: None,
        }
    }

    /// Delays `0, stride, 2*stride, .., depth - stride` covering a receptive
    /// field of `depth` timesteps.
    pub fn from_depth_stride(depth: usize, stride: usize) -> Result<Self> {
        if stride == 0 {
            return Err(Error::Contract("delay stride must be at least 1".into()));
        }
        if depth < stride || depth % stride != 0 {
            return Err(Error::Contract(format!(
                "receptive field depth {depth} is not a positive multiple of stride {stride}"
            )));
        }
        Ok(Self {
            delays: (0..depth).step_by(stride).collect(),
            depth: Some(depth),
            stride: Some(stride),
        })
    }

    pub fn delays(&self) -> &[usize] {
        &self.delays
    }

    pub fn len(&self) -> usize {
        self.delays.len()
    }

    pub fn is_empty(&self) -> bool {
        self.delays.is_empty()
    }

    pub fn max_delay(&self) -> usize {
        *self.delays.last().expect("delay set is never empty")
    }

    pub fn depth(&self) -> Option<usize> {
        self.depth
    }

    pub fn stride(&self) -> Option<usize> {
        self.stride
    }

    /// Records the delay resolution of a set that is not a full window.
    pub fn with_stride(mut self, stride: usize) -> Self {
        self.stride = Some(stride);
        self.depth = None;
        self
    }

    pub fn slot_of(&self, delay: usize) -> Option<usize> {
        self.delays.binary_search(&delay).ok()
    }
}

/// Circular record of the most recent presynaptic spike vectors.
#[derive(Debug, Clone)]
pub struct SpikeHistory {
    width: usize,
    capacity: usize,
    buf: Vec<f64>,
    // next row to be written
    cursor: usize,
    pushed: usize,
    zeros: Vec<f64>,
}

impl SpikeHistory {
    pub fn new(width: usize, capacity: usize) -> Self {
        assert!(capacity >= 1, "history capacity must be at least 1");
        Self {
            width,
            capacity,
            buf: vec![0.0; width * capacity],
            cursor: 0,
            pushed: 0,
            zeros: vec![0.0; width],
        }
    }

    /// Buffer sized for lookbacks up to `spec.max_delay()`.
    pub fn for_delays(width: usize, spec: &DelaySpec) -> Self {
        Self::new(width, spec.max_delay() + 1)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    /// Number of vectors pushed so far.
    pub fn elapsed(&self) -> usize {
        self.pushed
    }

    pub fn push(&mut self, theta: &[f64]) -> Result<()> {
        check_len("spike history push", self.width, theta.len())?;
        let start = self.cursor * self.width;
        self.buf[start..start + self.width].copy_from_slice(theta);
        self.cursor = (self.cursor + 1) % self.capacity;
        self.pushed += 1;
        Ok(())
    }

    /// Spike vector from `lag` steps before the latest push. Lags reaching
    /// before the first push read as silence.
    pub fn lag(&self, lag: usize) -> &[f64] {
        assert!(
            lag < self.capacity,
            "lag {lag} exceeds history capacity {}",
            self.capacity
        );
        if lag >= self.pushed {
            return &self.zeros;
        }
        let row = (self.cursor + self.capacity - 1 - lag) % self.capacity;
        &self.buf[row * self.width..(row + 1) * self.width]
    }

    pub fn clear(&mut self) {
        self.buf.iter_mut().for_each(|x| *x = 0.0);
        self.cursor = 0;
        self.pushed = 0;
    }
}

/// Appends `theta` to the history.
pub fn push_spikes(history: &mut SpikeHistory, theta: &[f64]) -> Result<()> {
    history.push(theta)
}

/// Weights of a delayed projection, indexed `(pre, post, slot)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DelayLayerParams {
    pub weights: Array3<f64>,
    pub mask: Array3<bool>,
    pub delay_spec: DelaySpec,
}

impl DelayLayerParams {
    pub fn zeros(pre: usize, post: usize, delay_spec: DelaySpec) -> Self {
        let shape = (pre, post, delay_spec.len());
        Self {
            weights: Array3::zeros(shape),
            mask: Array3::from_elem(shape, true),
            delay_spec,
        }
    }

    /// Uniform initialisation in `[-k, k]`, `k = 1/sqrt(pre * |D|)`.
    pub fn init<R: Rng>(pre: usize, post: usize, delay_spec: DelaySpec, gain: f64, rng: &mut R) -> Self {
        let mut p = Self::zeros(pre, post, delay_spec);
        let k = gain / ((pre * p.delay_spec.len()) as f64).sqrt();
        p.weights.iter_mut().for_each(|w| *w = rng.gen_range(-k..=k));
        p
    }

    pub fn pre(&self) -> usize {
        self.weights.dim().0
    }

    pub fn post(&self) -> usize {
        self.weights.dim().1
    }

    pub fn slots(&self) -> usize {
        self.weights.dim().2
    }

    pub fn validate(&self) -> Result<()> {
        let (_, _, s) = self.weights.dim();
        check_len("delay weights slots", self.delay_spec.len(), s)?;
        if self.mask.dim() != self.weights.dim() {
            return Err(Error::Contract("mask shape differs from weight shape".into()));
        }
        Ok(())
    }

    /// Number of unmasked synapses.
    pub fn active_count(&self) -> usize {
        self.mask.iter().filter(|&&m| m).count()
    }

    /// Zeroes every masked weight.
    pub fn apply_mask(&mut self) {
        ndarray::Zip::from(&mut self.weights)
            .and(&self.mask)
            .for_each(|w, &m| {
                if !m {
                    *w = 0.0
                }
            });
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecurrentLayerParams {
    /// `(pre, post)`
    pub ff_weights: Array2<f64>,
    /// `(post, post)`, row is the sending neuron
    pub rec_weights: Array2<f64>,
}

impl RecurrentLayerParams {
    pub fn validate(&self) -> Result<()> {
        let m = self.ff_weights.ncols();
        check_len("recurrent weights rows", m, self.rec_weights.nrows())?;
        check_len("recurrent weights cols", m, self.rec_weights.ncols())
    }
}

pub fn init_dense<R: Rng>(pre: usize, post: usize, gain: f64, rng: &mut R) -> Array2<f64> {
    let k = gain / (pre as f64).sqrt();
    Array2::from_shape_fn((pre, post), |_| rng.gen_range(-k..=k))
}

/// `I_j = sum_i w[i][j] * theta_i` for weights shaped `(pre, post)`.
pub fn feedforward_input(weights: &Array2<f64>, theta_pre: &[f64]) -> Result<Vec<f64>> {
    let mut out = vec![0.0; weights.ncols()];
    accumulate_dense(weights, theta_pre, &mut out)?;
    Ok(out)
}

pub(crate) fn accumulate_dense(weights: &Array2<f64>, theta: &[f64], out: &mut [f64]) -> Result<()> {
    check_len("feedforward presynaptic width", weights.nrows(), theta.len())?;
    check_len("feedforward postsynaptic width", weights.ncols(), out.len())?;
    for (row, &t) in weights.outer_iter().zip(theta) {
        if t == 0.0 {
            continue;
        }
        for (o, &w) in out.iter_mut().zip(row.iter()) {
            *o += w * t;
        }
    }
    Ok(())
}

/// Feedforward drive plus lateral drive from the layer's own spikes at the
/// previous step.
pub fn recurrent_input(
    params: &RecurrentLayerParams,
    theta_pre: &[f64],
    theta_self_prev: &[f64],
) -> Result<Vec<f64>> {
    params.validate()?;
    let mut out = feedforward_input(&params.ff_weights, theta_pre)?;
    accumulate_dense(&params.rec_weights, theta_self_prev, &mut out)?;
    Ok(out)
}

/// `I_j = sum_{d in D} sum_i w[i][j][d] * mask[i][j][d] * theta_i(k - d)`
/// where `k` is the step of the latest push into `history`.
pub fn delayed_input(params: &DelayLayerParams, history: &SpikeHistory) -> Result<Vec<f64>> {
    let mut out = vec![0.0; params.post()];
    accumulate_delayed(params, history, &mut out)?;
    Ok(out)
}

pub(crate) fn accumulate_delayed(params: &DelayLayerParams, history: &SpikeHistory, out: &mut [f64]) -> Result<()> {
    check_len("delayed presynaptic width", params.pre(), history.width())?;
    check_len("delayed postsynaptic width", params.post(), out.len())?;
    if history.capacity() < params.delay_spec.max_delay() + 1 {
        return Err(Error::Contract(format!(
            "spike history holds {} steps but the largest delay is {}",
            history.capacity(),
            params.delay_spec.max_delay()
        )));
    }
    let (post, slots) = (params.post(), params.slots());
    let w = params.weights.as_slice().expect("standard layout");
    let mask = params.mask.as_slice().expect("standard layout");
    for (slot, &d) in params.delay_spec.delays().iter().enumerate() {
        if d >= history.elapsed() {
            // delays are sorted, later slots reach even further back
            break;
        }
        let theta = history.lag(d);
        for (i, &t) in theta.iter().enumerate() {
            if t == 0.0 {
                continue;
            }
            let base = i * post * slots + slot;
            for (j, o) in out.iter_mut().enumerate() {
                let idx = base + j * slots;
                if mask[idx] {
                    *o += w[idx] * t;
                }
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn delay_spec_deserialisation_validates() {
        let w: DelaySpec = serde_json::from_str(r#"{"depth": 10, "stride": 5}"#).unwrap();
        assert_eq!(w.delays(), &[0, 5]);
        let l: DelaySpec = serde_json::from_str(r#"{"delays": [0, 3, 7]}"#).unwrap();
        assert_eq!(l.delays(), &[0, 3, 7]);
        let back: DelaySpec = serde_json::from_str(&serde_json::to_string(&w).unwrap()).unwrap();
        assert_eq!(back, w);
        assert!(serde_json::from_str::<DelaySpec>(r#"{"delays": [3, 1]}"#).is_err());
        assert!(serde_json::from_str::<DelaySpec>(r#"{"delays": []}"#).is_err());
        assert!(serde_json::from_str::<DelaySpec>(r#"{"depth": 10}"#).is_err());
        assert!(serde_json::from_str::<DelaySpec>(r#"{"delays": [0, 1], "depth": 10, "stride": 5}"#).is_err());
    }
    use ndarray::array;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn depth_stride_sets() {
        let d1 = DelaySpec::from_depth_stride(150, 15).unwrap();
        assert_eq!(d1.len(), 10);
        assert_eq!(d1.max_delay(), 135);
        let d2 = DelaySpec::from_depth_stride(150, 30).unwrap();
        assert_eq!(d2.delays(), &[0, 30, 60, 90, 120]);
        assert_eq!(DelaySpec::from_depth_stride(4, 2).unwrap().delays(), &[0, 2]);
        assert_eq!(DelaySpec::from_depth_stride(40, 5).unwrap().len(), 8);
    }

    #[test]
    fn depth_stride_errors() {
        assert!(DelaySpec::from_depth_stride(150, 14).is_err());
        assert!(DelaySpec::from_depth_stride(10, 0).is_err());
        assert!(DelaySpec::from_depth_stride(2, 4).is_err());
        assert!(DelaySpec::new(vec![]).is_err());
        assert!(DelaySpec::new(vec![0, 5, 5]).is_err());
        assert!(DelaySpec::new(vec![3, 1]).is_err());
    }

    #[test]
    fn history_lags() {
        let mut h = SpikeHistory::new(2, 3);
        push_spikes(&mut h, &[1.0, 0.0]).unwrap();
        assert_eq!(h.lag(0), &[1.0, 0.0]);
        assert_eq!(h.lag(1), &[0.0, 0.0]);
        push_spikes(&mut h, &[0.0, 1.0]).unwrap();
        assert_eq!(h.lag(0), &[0.0, 1.0]);
        assert_eq!(h.lag(1), &[1.0, 0.0]);
        assert!(h.push(&[1.0]).is_err());
    }

    #[test]
    fn history_wraparound_matches_list() {
        let cap = 5;
        let mut h = SpikeHistory::new(1, cap);
        let mut naive = Vec::new();
        for step in 0..17 {
            let x = [step as f64];
            h.push(&x).unwrap();
            naive.push(step as f64);
            for lag in 0..cap {
                let expected = if lag < naive.len() { naive[naive.len() - 1 - lag] } else { 0.0 };
                assert_eq!(h.lag(lag)[0], expected);
            }
            if step + 1 == cap {
                assert_eq!(h.lag(cap - 1)[0], 0.0);
            }
        }
    }

    #[test]
    fn feedforward_basics() {
        let w = array![[0.5, -1.0], [2.0, 0.25], [0.0, 3.0]];
        assert_eq!(feedforward_input(&w, &[0.0; 3]).unwrap(), vec![0.0, 0.0]);
        assert_eq!(feedforward_input(&w, &[0.0, 1.0, 0.0]).unwrap(), vec![2.0, 0.25]);
        // 0.5*1 + 2*0.5 + 0*1 = 1.5; -1*1 + 0.25*0.5 + 3*1 = 2.125
        assert_eq!(feedforward_input(&w, &[1.0, 0.5, 1.0]).unwrap(), vec![1.5, 2.125]);
        assert!(feedforward_input(&w, &[1.0]).is_err());
    }

    #[test]
    fn recurrent_hand_case() {
        let params = RecurrentLayerParams {
            ff_weights: array![[0.4, -0.2], [0.1, 0.3]],
            rec_weights: array![[0.0, 0.7], [-0.5, 0.0]],
        };
        // ff: [0.4, -0.2]; rec from neuron 1: [-0.5, 0.0]
        let out = recurrent_input(&params, &[1.0, 0.0], &[0.0, 1.0]).unwrap();
        assert!((out[0] - (-0.1)).abs() < 1e-15);
        assert!((out[1] - (-0.2)).abs() < 1e-15);
        assert_eq!(recurrent_input(&params, &[0.0, 0.0], &[0.0, 0.0]).unwrap(), vec![0.0, 0.0]);

        let no_rec = RecurrentLayerParams {
            ff_weights: params.ff_weights.clone(),
            rec_weights: Array2::zeros((2, 2)),
        };
        assert_eq!(
            recurrent_input(&no_rec, &[1.0, 1.0], &[1.0, 1.0]).unwrap(),
            feedforward_input(&params.ff_weights, &[1.0, 1.0]).unwrap()
        );
    }

    #[test]
    fn delayed_scripted_history() {
        let spec = DelaySpec::new(vec![0, 2]).unwrap();
        let mut p = DelayLayerParams::zeros(2, 1, spec);
        p.weights[[0, 0, 0]] = 0.5;
        p.weights[[1, 0, 0]] = -0.25;
        p.weights[[0, 0, 1]] = 2.0;
        p.weights[[1, 0, 1]] = 4.0;
        let script = [[1.0, 0.0], [0.0, 1.0], [1.0, 1.0], [0.0, 0.0], [0.0, 1.0]];
        let mut h = SpikeHistory::for_delays(2, &p.delay_spec);
        let mut got = Vec::new();
        for theta in &script {
            h.push(theta).unwrap();
            got.push(delayed_input(&p, &h).unwrap()[0]);
        }
        // brute force over (d, i) with theta at negative time = 0
        let delays = [0usize, 2];
        let mut expected = Vec::new();
        for k in 0..script.len() {
            let mut s = 0.0;
            for (slot, &d) in delays.iter().enumerate() {
                for i in 0..2 {
                    if k >= d {
                        s += p.weights[[i, 0, slot]] * script[k - d][i];
                    }
                }
            }
            expected.push(s);
        }
        assert_eq!(got, expected);
        assert_eq!(expected, vec![0.5, -0.25, 2.25, 4.0, 5.75]);
    }

    #[test]
    fn delayed_requires_capacity() {
        let p = DelayLayerParams::zeros(1, 1, DelaySpec::new(vec![0, 4]).unwrap());
        let h = SpikeHistory::new(1, 3);
        assert!(matches!(delayed_input(&p, &h), Err(Error::Contract(_))));
    }

    #[test]
    fn masked_weights_never_contribute() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut p = DelayLayerParams::init(3, 2, DelaySpec::new(vec![0, 1]).unwrap(), 1.0, &mut rng);
        p.mask[[1, 0, 1]] = false;
        let mut h = SpikeHistory::for_delays(3, &p.delay_spec);
        h.push(&[1.0, 1.0, 1.0]).unwrap();
        h.push(&[1.0, 1.0, 1.0]).unwrap();
        let before = delayed_input(&p, &h).unwrap();
        p.weights[[1, 0, 1]] += 100.0;
        assert_eq!(before, delayed_input(&p, &h).unwrap());
    }

    #[test]
    fn init_bounds() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let p = DelayLayerParams::init(16, 4, DelaySpec::from_depth_stride(40, 5).unwrap(), 1.0, &mut rng);
        let k = 1.0 / (16.0f64 * 8.0).sqrt();
        assert!(p.weights.iter().all(|w| w.abs() <= k));
        assert_eq!(p.active_count(), 16 * 4 * 8);
    }
}
