//! Deployment cost model for digital neuromorphic hardware.
//!
//! Counts parameters, neuron states, the extra memory needed to realise
//! axonal delays (per-neuron ring buffers or per-layer delay queues) and the
//! memory accesses / arithmetic operations performed during one inference.
//! Energy is the dot product of those counts with per-operation
//! coefficients supplied by the caller.

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::layers::DelaySpec;
use crate::network::{LayerKind, NetworkParams, NetworkSpec, Projection, Tape};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NeuronKind {
    #[default]
    Lif,
    /// Adaptive threshold; carries a second time constant and state word.
    Alif,
}

impl NeuronKind {
    /// Time constants (and state words) per neuron.
    pub fn state_words(self) -> u64 {
        match self {
            NeuronKind::Lif => 1,
            NeuronKind::Alif => 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArchLayer {
    pub size: usize,
    #[serde(default)]
    pub neuron: NeuronKind,
    #[serde(default)]
    pub recurrent: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delays: Option<DelaySpec>,
    /// Unpruned synapses on the input projection, when fewer than the dense
    /// `fan_in * size * |D|`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub active_synapses: Option<u64>,
}

impl ArchLayer {
    pub fn lif(size: usize) -> Self {
        Self {
            size,
            neuron: NeuronKind::Lif,
            recurrent: false,
            delays: None,
            active_synapses: None,
        }
    }

    pub fn recurrent(mut self) -> Self {
        self.recurrent = true;
        self
    }

    pub fn alif(mut self) -> Self {
        self.neuron = NeuronKind::Alif;
        self
    }

    pub fn with_delays(mut self, delays: DelaySpec) -> Self {
        self.delays = Some(delays);
        self
    }

    fn slots(&self) -> u64 {
        self.delays.as_ref().map_or(1, |d| d.len() as u64)
    }

    fn max_delay(&self) -> u64 {
        self.delays.as_ref().map_or(0, |d| d.max_delay() as u64)
    }

    fn has_delays(&self) -> bool {
        self.delays.as_ref().is_some_and(|d| d.max_delay() > 0)
    }
}

/// Architecture as seen by the cost model. The readout is a non-spiking LIF
/// layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArchSpec {
    pub input: usize,
    pub layers: Vec<ArchLayer>,
    pub readout: ArchLayer,
}

impl ArchSpec {
    pub fn validate(&self) -> Result<()> {
        if self.layers.is_empty() {
            return Err(Error::Config("architecture needs a hidden layer".into()));
        }
        if self.layers[0].delays.is_some() {
            return Err(Error::Config(
                "the first hidden layer takes the raw input without delays".into(),
            ));
        }
        if self.readout.recurrent || self.readout.neuron != NeuronKind::Lif {
            return Err(Error::Config("the readout is a plain non-recurrent LIF layer".into()));
        }
        Ok(())
    }

    /// Hidden layers followed by the readout.
    pub fn all_layers(&self) -> impl Iterator<Item = &ArchLayer> {
        self.layers.iter().chain(std::iter::once(&self.readout))
    }

    fn fan_in(&self, l: usize) -> u64 {
        if l == 0 {
            self.input as u64
        } else {
            self.layers[l - 1].size as u64
        }
    }

    /// Cost-model view of a trained network; pruned synapses are excluded.
    pub fn from_network(spec: &NetworkSpec, params: Option<&NetworkParams>) -> Self {
        let convert = |size: usize, kind: Option<&LayerKind>, delays: Option<&DelaySpec>, proj: Option<&Projection>| ArchLayer {
            size,
            neuron: NeuronKind::Lif,
            recurrent: kind.is_some_and(LayerKind::is_recurrent),
            delays: delays.cloned(),
            active_synapses: match proj {
                Some(Projection::Delayed(p)) if p.active_count() < p.weights.len() => Some(p.active_count() as u64),
                _ => None,
            },
        };
        let layers = spec
            .layers
            .iter()
            .enumerate()
            .map(|(l, ls)| {
                convert(
                    ls.size,
                    Some(&ls.kind),
                    ls.kind.delays(),
                    params.map(|p| &p.layers[l].input),
                )
            })
            .collect();
        let readout = convert(
            spec.readout.size,
            None,
            spec.readout.delays.as_ref(),
            params.map(|p| &p.readout.input),
        );
        Self {
            input: spec.input_size,
            layers,
            readout,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParamCount {
    pub weights: u64,
    pub time_constants: u64,
}

impl ParamCount {
    pub fn total(&self) -> u64 {
        self.weights + self.time_constants
    }
}

/// Trainable parameters: every delay slot of every synapse (or only the
/// surviving ones once pruned), lateral weights, and one time constant per
/// LIF neuron (two per ALIF).
pub fn param_count(arch: &ArchSpec) -> ParamCount {
    let mut weights = 0;
    let mut time_constants = 0;
    for (l, layer) in arch.all_layers().enumerate() {
        let m = layer.size as u64;
        // the first hidden layer never carries delays
        let slots = if l == 0 { 1 } else { layer.slots() };
        weights += layer.active_synapses.unwrap_or(arch.fan_in(l) * m * slots);
        if layer.recurrent {
            weights += m * m;
        }
        time_constants += m * layer.neuron.state_words();
    }
    ParamCount {
        weights,
        time_constants,
    }
}

/// Neuron state words: the membrane, plus the adaptation variable for ALIF.
pub fn state_count(arch: &ArchSpec) -> u64 {
    arch.all_layers().map(|l| l.size as u64 * l.neuron.state_words()).sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RingBufferOverhead {
    pub words: u64,
    /// One extra accumulation per delayed neuron and timestep.
    pub extra_accumulations_per_step: u64,
}

/// Per-neuron ring buffers: `neurons with delayed input x max delay`.
pub fn ring_buffer_overhead(arch: &ArchSpec) -> RingBufferOverhead {
    let mut words = 0;
    let mut neurons = 0;
    for layer in arch.all_layers().filter(|l| l.has_delays()) {
        words += layer.size as u64 * layer.max_delay();
        neurons += layer.size as u64;
    }
    RingBufferOverhead {
        words,
        extra_accumulations_per_step: neurons,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DelayQueueOverhead {
    pub words: u64,
    /// Per inference.
    pub pushes: f64,
    /// Per inference.
    pub pops: f64,
}

/// Per-layer shared delay queues: `peak input spikes per step x max delay`
/// words. Every spike entering a delayed projection is pushed into and
/// popped from each non-zero delay queue once.
pub fn delay_queue_overhead(arch: &ArchSpec, activity: &ActivityTrace) -> Result<DelayQueueOverhead> {
    let mut words = 0;
    let mut ops = 0.0;
    for (l, layer) in arch.all_layers().enumerate() {
        if !layer.has_delays() {
            continue;
        }
        let src = l
            .checked_sub(1)
            .and_then(|s| activity.layers.get(s))
            .ok_or_else(|| Error::Data(format!("activity trace has no entry for the source of layer {l}")))?;
        words += src.max_per_step.ceil() as u64 * layer.max_delay();
        let queued = layer.delays.as_ref().map_or(0, |d| d.delays().iter().filter(|&&d| d > 0).count());
        ops += src.total * queued as f64;
    }
    Ok(DelayQueueOverhead {
        words,
        pushes: ops,
        pops: ops,
    })
}

/// Spiking statistics of one layer over an inference.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LayerActivity {
    pub avg_per_step: f64,
    pub max_per_step: f64,
    /// Spikes per inference.
    pub total: f64,
}

impl LayerActivity {
    /// Statistics with `total = avg * steps`.
    pub fn from_rates(avg_per_step: f64, max_per_step: f64, steps: usize) -> Self {
        Self {
            avg_per_step,
            max_per_step,
            total: avg_per_step * steps as f64,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActivityTrace {
    pub timesteps: usize,
    /// Events arriving on the input channels (non-zero entries).
    pub input: LayerActivity,
    /// One entry per hidden layer.
    pub layers: Vec<LayerActivity>,
}

impl ActivityTrace {
    /// Averages over several inferences. `max_per_step` is the peak over all
    /// steps of all inferences; `total` is per inference.
    pub fn from_tapes(tapes: &[&Tape]) -> Self {
        let steps = tapes.first().map_or(0, |t| t.steps());
        let n_layers = tapes.first().map_or(0, |t| t.layers.len());
        let stats = |rasters: &mut dyn Iterator<Item = &ndarray::Array2<f64>>| {
            let mut total = 0.0;
            let mut peak: f64 = 0.0;
            let mut count = 0usize;
            let mut step_total = 0usize;
            for r in rasters {
                count += 1;
                step_total += r.nrows();
                for row in r.rows() {
                    let s = row.iter().filter(|&&x| x != 0.0).count() as f64;
                    total += s;
                    peak = peak.max(s);
                }
            }
            if count == 0 {
                return LayerActivity::default();
            }
            LayerActivity {
                avg_per_step: total / step_total as f64,
                max_per_step: peak,
                total: total / count as f64,
            }
        };
        let input = stats(&mut tapes.iter().map(|t| &t.input));
        let layers = (0..n_layers)
            .map(|l| stats(&mut tapes.iter().map(|t| &t.layers[l].theta)))
            .collect();
        Self {
            timesteps: steps,
            input,
            layers,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (i, l) in std::iter::once(&self.input).chain(&self.layers).enumerate() {
            if !(l.avg_per_step >= 0.0 && l.max_per_step >= l.avg_per_step && l.total >= 0.0) {
                return Err(Error::Data(format!(
                    "activity entry {i} violates max >= avg >= 0: {l:?}"
                )));
            }
        }
        Ok(())
    }

    /// CSV with a `# timesteps=` comment and one row per layer, input first.
    pub fn to_csv(&self, seed: Option<u64>) -> String {
        let mut s = String::new();
        if let Some(seed) = seed {
            s.push_str(&format!("# seed={seed}\n"));
        }
        s.push_str(&format!("# timesteps={}\n", self.timesteps));
        s.push_str("layer,avg_per_step,max_per_step,total\n");
        let names = std::iter::once("input".to_string()).chain((0..self.layers.len()).map(|i| format!("hidden{i}")));
        for (name, l) in names.zip(std::iter::once(&self.input).chain(&self.layers)) {
            s.push_str(&format!("{name},{:?},{:?},{:?}\n", l.avg_per_step, l.max_per_step, l.total));
        }
        s
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut timesteps = None;
        let mut rows = Vec::new();
        for line in text.lines().map(str::trim).filter(|l| !l.is_empty()) {
            if let Some(c) = line.strip_prefix('#') {
                if let Some(v) = c.trim().strip_prefix("timesteps=") {
                    timesteps = Some(
                        v.trim()
                            .parse::<usize>()
                            .map_err(|e| Error::Data(format!("activity timesteps: {e}")))?,
                    );
                }
                continue;
            }
            if line.starts_with("layer,") {
                continue;
            }
            let f: Vec<&str> = line.split(',').map(str::trim).collect();
            if f.len() != 4 {
                return Err(Error::Data(format!("activity row needs 4 fields: `{line}`")));
            }
            let num = |s: &str| s.parse::<f64>().map_err(|e| Error::Data(format!("activity value `{s}`: {e}")));
            rows.push(LayerActivity {
                avg_per_step: num(f[1])?,
                max_per_step: num(f[2])?,
                total: num(f[3])?,
            });
        }
        let timesteps = timesteps.ok_or_else(|| Error::Data("activity file lacks `# timesteps=`".into()))?;
        if rows.len() < 2 {
            return Err(Error::Data("activity file needs an input row and at least one layer".into()));
        }
        let input = rows.remove(0);
        let trace = Self {
            timesteps,
            input,
            layers: rows,
        };
        trace.validate()?;
        Ok(trace)
    }
}

/// Counts of every costed operation for one inference.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct OpCounts {
    pub weight_reads: f64,
    pub state_reads: f64,
    pub state_writes: f64,
    pub spike_reads: f64,
    pub spike_writes: f64,
    pub accumulates: f64,
    pub compares: f64,
    pub queue_pushes: f64,
    pub queue_pops: f64,
}

impl OpCounts {
    pub fn add(&self, other: &OpCounts) -> OpCounts {
        let (a, b) = (self.as_array(), other.as_array());
        OpCounts::from_array(std::array::from_fn(|i| a[i] + b[i]))
    }

    pub fn scale(&self, s: f64) -> OpCounts {
        OpCounts::from_array(self.as_array().map(|x| x * s))
    }

    pub fn as_array(&self) -> [f64; 9] {
        [
            self.weight_reads,
            self.state_reads,
            self.state_writes,
            self.spike_reads,
            self.spike_writes,
            self.accumulates,
            self.compares,
            self.queue_pushes,
            self.queue_pops,
        ]
    }

    pub fn from_array(a: [f64; 9]) -> Self {
        Self {
            weight_reads: a[0],
            state_reads: a[1],
            state_writes: a[2],
            spike_reads: a[3],
            spike_writes: a[4],
            accumulates: a[5],
            compares: a[6],
            queue_pushes: a[7],
            queue_pops: a[8],
        }
    }

    pub const NAMES: [&'static str; 9] = [
        "weight_reads",
        "state_reads",
        "state_writes",
        "spike_reads",
        "spike_writes",
        "accumulates",
        "compares",
        "queue_pushes",
        "queue_pops",
    ];
}

/// Breakdown of the base (mechanism independent) work of one inference.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct OpSummary {
    /// Synaptic accumulations triggered by spikes.
    pub synaptic_events: f64,
    /// Neuron-steps (`neurons x T`).
    pub neuron_updates: f64,
    pub counts: OpCounts,
}

/// Operations of one inference of `steps` timesteps, excluding the delay
/// mechanism.
///
/// Each incoming spike reads one weight and performs one accumulation per
/// outgoing (unpruned) synapse, delay slots included. Each neuron-step reads
/// and writes its state words, multiplies by its decay and, for spiking
/// layers, compares against threshold. Emitted spikes are written once and
/// read once by every projection that consumes them.
pub fn op_counts(arch: &ArchSpec, activity: &ActivityTrace, steps: usize) -> Result<OpSummary> {
    if activity.layers.len() != arch.layers.len() {
        return Err(Error::Data(format!(
            "activity trace covers {} layers, architecture has {}",
            activity.layers.len(),
            arch.layers.len()
        )));
    }
    let t = steps as f64;
    let mut synaptic = 0.0;
    let mut spike_reads = 0.0;
    let mut neuron_updates = 0.0;
    let mut state_words = 0.0;
    let mut compares = 0.0;
    let n_hidden = arch.layers.len();
    for (l, layer) in arch.all_layers().enumerate() {
        let src = if l == 0 { &activity.input } else { &activity.layers[l - 1] };
        let m = layer.size as f64;
        let fan_in = arch.fan_in(l) as f64;
        let synapses_per_source = match layer.active_synapses {
            Some(active) => active as f64 / fan_in,
            None => m * if l == 0 { 1.0 } else { layer.slots() as f64 },
        };
        synaptic += src.total * synapses_per_source;
        spike_reads += src.total;
        if layer.recurrent {
            let own = &activity.layers[l];
            synaptic += own.total * m;
            spike_reads += own.total;
        }
        neuron_updates += m * t;
        state_words += m * layer.neuron.state_words() as f64 * t;
        if l < n_hidden {
            compares += m * t;
        }
    }
    let spike_writes: f64 = activity.layers.iter().map(|a| a.total).sum();
    Ok(OpSummary {
        synaptic_events: synaptic,
        neuron_updates,
        counts: OpCounts {
            weight_reads: synaptic,
            state_reads: state_words,
            state_writes: state_words,
            spike_reads,
            spike_writes,
            accumulates: synaptic + state_words,
            compares,
            queue_pushes: 0.0,
            queue_pops: 0.0,
        },
    })
}

/// Energy per operation, in joules.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnergyCoeffs {
    pub weight_read: f64,
    pub state_read: f64,
    pub state_write: f64,
    pub spike_read: f64,
    pub spike_write: f64,
    pub accumulate: f64,
    pub compare: f64,
    pub queue_push: f64,
    pub queue_pop: f64,
}

const DEFAULT_COEFFS: &str = include_str!("../configs/energy_coeffs.toml");

impl Default for EnergyCoeffs {
    fn default() -> Self {
        Self::from_toml(DEFAULT_COEFFS).expect("bundled coefficient file parses")
    }
}

impl EnergyCoeffs {
    pub fn from_toml(text: &str) -> Result<Self> {
        let c: EnergyCoeffs = toml::from_str(text).map_err(|e| Error::Config(format!("coefficient file: {e}")))?;
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn validate(&self) -> Result<()> {
        if self.as_array().iter().any(|c| !(c.is_finite() && *c >= 0.0)) {
            return Err(Error::Config(format!(
                "energy coefficients must be finite and non-negative: {self:?}"
            )));
        }
        Ok(())
    }

    pub fn as_array(&self) -> [f64; 9] {
        [
            self.weight_read,
            self.state_read,
            self.state_write,
            self.spike_read,
            self.spike_write,
            self.accumulate,
            self.compare,
            self.queue_push,
            self.queue_pop,
        ]
    }

    pub fn from_array(a: [f64; 9]) -> Self {
        Self {
            weight_read: a[0],
            state_read: a[1],
            state_write: a[2],
            spike_read: a[3],
            spike_write: a[4],
            accumulate: a[5],
            compare: a[6],
            queue_push: a[7],
            queue_pop: a[8],
        }
    }
}

/// `sum_i count_i * coeff_i`, in joules.
pub fn energy(counts: &OpCounts, coeffs: &EnergyCoeffs) -> f64 {
    counts
        .as_array()
        .iter()
        .zip(coeffs.as_array())
        .map(|(n, c)| n * c)
        .sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DelayMechanism {
    /// No delay hardware (networks without delays).
    #[default]
    None,
    Ring,
    Queue,
}

impl std::str::FromStr for DelayMechanism {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(Self::None),
            "ring" => Ok(Self::Ring),
            "queue" => Ok(Self::Queue),
            other => Err(Error::Config(format!("unknown delay mechanism `{other}`"))),
        }
    }
}

impl fmt::Display for DelayMechanism {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::None => "none",
            Self::Ring => "ring",
            Self::Queue => "queue",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostReport {
    pub name: String,
    pub mechanism: DelayMechanism,
    pub timesteps: usize,
    pub params: ParamCount,
    pub state_words: u64,
    pub overhead_words: u64,
    /// Base operations, without the delay mechanism.
    pub base_ops: OpCounts,
    /// Operations added by the delay mechanism.
    pub overhead_ops: OpCounts,
    pub synaptic_events: f64,
    pub neuron_updates: f64,
    pub base_energy: f64,
    pub overhead_energy: f64,
}

impl CostReport {
    pub fn build(
        name: impl Into<String>,
        arch: &ArchSpec,
        activity: &ActivityTrace,
        coeffs: &EnergyCoeffs,
        mechanism: DelayMechanism,
    ) -> Result<Self> {
        arch.validate()?;
        activity.validate()?;
        coeffs.validate()?;
        let steps = activity.timesteps;
        let summary = op_counts(arch, activity, steps)?;
        let delayed = arch.all_layers().any(ArchLayer::has_delays);
        let (overhead_words, overhead_ops) = match mechanism {
            DelayMechanism::None if delayed => {
                return Err(Error::Config(
                    "architecture has delays; choose the ring or queue mechanism".into(),
                ))
            }
            DelayMechanism::None => (0, OpCounts::default()),
            DelayMechanism::Ring => {
                let r = ring_buffer_overhead(arch);
                let ops = OpCounts {
                    accumulates: (r.extra_accumulations_per_step * steps as u64) as f64,
                    ..Default::default()
                };
                (r.words, ops)
            }
            DelayMechanism::Queue => {
                let q = delay_queue_overhead(arch, activity)?;
                let ops = OpCounts {
                    queue_pushes: q.pushes,
                    queue_pops: q.pops,
                    ..Default::default()
                };
                (q.words, ops)
            }
        };
        Ok(Self {
            name: name.into(),
            mechanism,
            timesteps: steps,
            params: param_count(arch),
            state_words: state_count(arch),
            overhead_words,
            base_ops: summary.counts,
            overhead_ops,
            synaptic_events: summary.synaptic_events,
            neuron_updates: summary.neuron_updates,
            base_energy: energy(&summary.counts, coeffs),
            overhead_energy: energy(&overhead_ops, coeffs),
        })
    }

    pub fn total_ops(&self) -> OpCounts {
        self.base_ops.add(&self.overhead_ops)
    }

    /// Parameters, neuron states and delay-structure words.
    pub fn memory_words(&self) -> u64 {
        self.params.total() + self.state_words + self.overhead_words
    }

    pub fn energy(&self) -> f64 {
        self.base_energy + self.overhead_energy
    }

    /// CSV lines (header first) describing the report.
    pub fn csv_rows(&self) -> Vec<(String, String)> {
        let mut rows = vec![
            ("name".to_string(), self.name.clone()),
            ("mechanism".into(), self.mechanism.to_string()),
            ("timesteps".into(), self.timesteps.to_string()),
            ("weights".into(), self.params.weights.to_string()),
            ("time_constants".into(), self.params.time_constants.to_string()),
            ("param_count".into(), self.params.total().to_string()),
            ("state_words".into(), self.state_words.to_string()),
            ("overhead_words".into(), self.overhead_words.to_string()),
            ("memory_words".into(), self.memory_words().to_string()),
            ("synaptic_events".into(), self.synaptic_events.to_string()),
            ("neuron_updates".into(), self.neuron_updates.to_string()),
        ];
        for (name, v) in OpCounts::NAMES.iter().zip(self.total_ops().as_array()) {
            rows.push((format!("ops_{name}"), v.to_string()));
        }
        rows.push(("base_energy_j".into(), self.base_energy.to_string()));
        rows.push(("overhead_energy_j".into(), self.overhead_energy.to_string()));
        rows.push(("energy_j".into(), self.energy().to_string()));
        rows
    }
}

impl fmt::Display for CostReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{} (delay mechanism: {}, T = {})", self.name, self.mechanism, self.timesteps)?;
        writeln!(f, "  parameters        {:>14}  ({} weights + {} time constants)", self.params.total(), self.params.weights, self.params.time_constants)?;
        writeln!(f, "  neuron states     {:>14}", self.state_words)?;
        writeln!(f, "  delay overhead    {:>14} words", self.overhead_words)?;
        writeln!(f, "  memory total      {:>14} words", self.memory_words())?;
        writeln!(f, "  synaptic events   {:>14.1}", self.synaptic_events)?;
        writeln!(f, "  energy            {:>14.4e} J  (overhead {:.4e} J)", self.energy(), self.overhead_energy)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SavingFactors {
    pub energy: f64,
    pub memory: f64,
}

/// Baseline-to-model ratios of energy and memory words.
pub fn saving_factors(baseline: &CostReport, model: &CostReport) -> Result<SavingFactors> {
    let e = model.energy();
    let m = model.memory_words();
    if e <= 0.0 || m == 0 {
        return Err(Error::Contract(format!(
            "model `{}` has zero cost; saving factors are undefined",
            model.name
        )));
    }
    Ok(SavingFactors {
        energy: baseline.energy() / e,
        memory: baseline.memory_words() as f64 / m as f64,
    })
}

/// Reference architectures for 700-channel, 20-class spoken-digit spike data.
pub mod presets {
    use super::*;

    pub const SHD_INPUTS: usize = 700;
    pub const SHD_CLASSES: usize = 20;
    pub const SHD_STEPS: usize = 250;

    fn arch(layers: Vec<ArchLayer>, readout_delays: Option<DelaySpec>) -> ArchSpec {
        let mut readout = ArchLayer::lif(SHD_CLASSES);
        readout.delays = readout_delays;
        ArchSpec {
            input: SHD_INPUTS,
            layers,
            readout,
        }
    }

    fn delayed_pair(width: usize, delays: DelaySpec) -> ArchSpec {
        arch(
            vec![ArchLayer::lif(width), ArchLayer::lif(width).with_delays(delays.clone())],
            Some(delays),
        )
    }

    /// Two laterally recurrent LIF layers of 128.
    pub fn r1() -> ArchSpec {
        arch(vec![ArchLayer::lif(128).recurrent(), ArchLayer::lif(128).recurrent()], None)
    }

    /// Two laterally recurrent adaptive-threshold layers of 48.
    pub fn r2() -> ArchSpec {
        arch(
            vec![ArchLayer::lif(48).recurrent().alif(), ArchLayer::lif(48).recurrent().alif()],
            None,
        )
    }

    /// 8 + 8 LIF with delays over depth 150, stride 15.
    pub fn d1() -> ArchSpec {
        delayed_pair(8, DelaySpec::from_depth_stride(150, 15).expect("valid delay window"))
    }

    /// 8 + 8 LIF with delays over depth 150, stride 30.
    pub fn d2() -> ArchSpec {
        delayed_pair(8, DelaySpec::from_depth_stride(150, 30).expect("valid delay window"))
    }

    /// 64 + 64 LIF with ten delays on the second layer and readout.
    pub fn delayed_64() -> ArchSpec {
        delayed_pair(64, DelaySpec::from_depth_stride(150, 15).expect("valid delay window"))
    }

    /// 48 + 48 LIF with ten delays on the second layer and readout.
    pub fn delayed_48() -> ArchSpec {
        delayed_pair(48, DelaySpec::from_depth_stride(150, 15).expect("valid delay window"))
    }

    /// Stack of LIF layers; `recurrent` applies to all of them.
    pub fn stack(widths: &[usize], recurrent: bool) -> ArchSpec {
        arch(
            widths
                .iter()
                .map(|&w| {
                    let l = ArchLayer::lif(w);
                    if recurrent {
                        l.recurrent()
                    } else {
                        l
                    }
                })
                .collect(),
            None,
        )
    }

    /// Published per-layer activity (average and peak spikes per step) of
    /// the four reference models. Input activity is left at zero: it is the
    /// same dataset for all of them.
    pub fn reference_activity(name: &str) -> Option<ActivityTrace> {
        let rates: [(f64, f64); 2] = match name {
            "r1" => [(8.678, 8.678), (4.582, 4.582)],
            "r2" => [(6.725, 6.725), (3.456, 3.456)],
            "d1" => [(1.894, 7.0), (1.772, 7.0)],
            "d2" => [(1.686, 7.0), (2.539, 8.0)],
            _ => return None,
        };
        Some(ActivityTrace {
            timesteps: SHD_STEPS,
            input: LayerActivity::default(),
            layers: rates
                .iter()
                .map(|&(avg, max)| LayerActivity::from_rates(avg, max, SHD_STEPS))
                .collect(),
        })
    }

    pub fn by_name(name: &str) -> Option<ArchSpec> {
        match name {
            "r1" => Some(r1()),
            "r2" => Some(r2()),
            "d1" => Some(d1()),
            "d2" => Some(d2()),
            "delayed-64" => Some(delayed_64()),
            "delayed-48" => Some(delayed_48()),
            _ => None,
        }
    }
}
