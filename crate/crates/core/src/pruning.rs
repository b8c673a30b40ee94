//! Magnitude pruning of delay synapses, delay-resolution refinement and the
//! prune / fine-tune loop.

use ndarray::Array3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::layers::{DelayLayerParams, DelaySpec};
use crate::network::{LayerKind, NetworkParams, NetworkSpec, Projection};
use crate::training::{evaluate, train_from, Hyperparams, Sample};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PruneRule {
    /// Keep the `k` largest-magnitude delay slots of every (pre, post) pair.
    CapPerPair(usize),
    /// Keep this fraction of the layer's active synapses, ranked layer-wide.
    KeepFraction(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawPruneConfig", into = "RawPruneConfig")]
pub struct PruneConfig {
    pub rule: PruneRule,
    pub refine_rounds: usize,
    pub finetune_epochs: usize,
    /// Divide the delay stride by this factor between rounds.
    pub refine_factor: Option<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPruneConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    cap_per_pair: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    keep_fraction: Option<f64>,
    #[serde(default = "one")]
    refine_rounds: usize,
    #[serde(default)]
    finetune_epochs: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    refine_factor: Option<usize>,
}

fn one() -> usize {
    1
}

impl TryFrom<RawPruneConfig> for PruneConfig {
    type Error = Error;

    fn try_from(raw: RawPruneConfig) -> Result<Self> {
        let rule = match (raw.cap_per_pair, raw.keep_fraction) {
            (Some(k), None) => PruneRule::CapPerPair(k),
            (None, Some(f)) => PruneRule::KeepFraction(f),
            _ => {
                return Err(Error::Config(
                    "set exactly one of cap_per_pair and keep_fraction".into(),
                ))
            }
        };
        let cfg = PruneConfig {
            rule,
            refine_rounds: raw.refine_rounds,
            finetune_epochs: raw.finetune_epochs,
            refine_factor: raw.refine_factor,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

impl From<PruneConfig> for RawPruneConfig {
    fn from(c: PruneConfig) -> Self {
        let (cap_per_pair, keep_fraction) = match c.rule {
            PruneRule::CapPerPair(k) => (Some(k), None),
            PruneRule::KeepFraction(f) => (None, Some(f)),
        };
        RawPruneConfig {
            cap_per_pair,
            keep_fraction,
            refine_rounds: c.refine_rounds,
            finetune_epochs: c.finetune_epochs,
            refine_factor: c.refine_factor,
        }
    }
}

impl PruneConfig {
    pub fn cap(k: usize) -> Self {
        Self {
            rule: PruneRule::CapPerPair(k),
            refine_rounds: 1,
            finetune_epochs: 0,
            refine_factor: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self.rule {
            PruneRule::CapPerPair(0) => Err(Error::Config("cap_per_pair must be at least 1".into())),
            PruneRule::KeepFraction(f) if !(f > 0.0 && f <= 1.0) => {
                Err(Error::Config(format!("keep_fraction must be in (0, 1], got {f}")))
            }
            _ if self.refine_factor.is_some_and(|r| r < 2) => {
                Err(Error::Config("refine_factor must be at least 2".into()))
            }
            _ => Ok(()),
        }
    }
}

/// New mask keeping the largest-magnitude active synapses. Only currently
/// active synapses compete; equal magnitudes prefer the smaller delay.
pub fn prune_by_magnitude(params: &DelayLayerParams, rule: PruneRule) -> Result<Array3<bool>> {
    let (pre, post, slots) = params.weights.dim();
    let mut mask = Array3::from_elem((pre, post, slots), false);
    match rule {
        PruneRule::CapPerPair(k) => {
            if k == 0 || k > slots {
                return Err(Error::Contract(format!(
                    "cannot keep {k} delay slots per pair out of {slots}"
                )));
            }
            let mut cand: Vec<usize> = Vec::with_capacity(slots);
            for i in 0..pre {
                for j in 0..post {
                    cand.clear();
                    cand.extend((0..slots).filter(|&s| params.mask[[i, j, s]]));
                    // slot order equals delay order, so a stable sort keeps
                    // smaller delays first among equal magnitudes
                    cand.sort_by(|&a, &b| {
                        params.weights[[i, j, b]]
                            .abs()
                            .total_cmp(&params.weights[[i, j, a]].abs())
                    });
                    for &s in cand.iter().take(k) {
                        mask[[i, j, s]] = true;
                    }
                }
            }
        }
        PruneRule::KeepFraction(f) => {
            if !(f > 0.0 && f <= 1.0) {
                return Err(Error::Contract(format!("keep fraction {f} outside (0, 1]")));
            }
            let mut cand: Vec<(usize, usize, usize)> = Vec::new();
            for s in 0..slots {
                for i in 0..pre {
                    for j in 0..post {
                        if params.mask[[i, j, s]] {
                            cand.push((i, j, s));
                        }
                    }
                }
            }
            let keep = ((cand.len() as f64) * f).round() as usize;
            cand.sort_by(|a, b| {
                params.weights[[b.0, b.1, b.2]]
                    .abs()
                    .total_cmp(&params.weights[[a.0, a.1, a.2]].abs())
            });
            for &(i, j, s) in cand.iter().take(keep) {
                mask[[i, j, s]] = true;
            }
        }
    }
    Ok(mask)
}

/// Applies `rule` in place and zeroes the removed weights.
pub fn prune_layer(params: &mut DelayLayerParams, rule: PruneRule) -> Result<()> {
    params.mask = prune_by_magnitude(params, rule)?;
    params.apply_mask();
    Ok(())
}

/// Adds zero-weight candidate slots at `new_stride` resolution around every
/// surviving synapse, within one old stride on either side and inside the
/// original delay range. Candidates are only enabled for the (pre, post)
/// pair whose survivor spawned them.
pub fn refine_delays(params: &DelayLayerParams, new_stride: usize) -> Result<DelayLayerParams> {
    let old_stride = params.delay_spec.stride().ok_or_else(|| {
        Error::Contract("refinement needs a delay set with a known stride".into())
    })?;
    if new_stride == 0 || new_stride > old_stride || old_stride % new_stride != 0 {
        return Err(Error::Contract(format!(
            "new stride {new_stride} does not divide the current stride {old_stride}"
        )));
    }
    let old = params.delay_spec.delays();
    let max_delay = params.delay_spec.max_delay();
    let (pre, post, _) = params.weights.dim();

    let window = |d: usize| {
        let lo = d.saturating_sub(old_stride - 1);
        let hi = (d + old_stride - 1).min(max_delay);
        (lo..=hi).filter(move |&c| c.abs_diff(d) % new_stride == 0)
    };

    let mut union: Vec<usize> = old.to_vec();
    for (s, &d) in old.iter().enumerate() {
        if params.mask.index_axis(ndarray::Axis(2), s).iter().any(|&m| m) {
            union.extend(window(d));
        }
    }
    union.sort_unstable();
    union.dedup();
    let spec = DelaySpec::new(union)?.with_stride(new_stride);

    let mut out = DelayLayerParams::zeros(pre, post, spec);
    out.mask.fill(false);
    for (s, &d) in old.iter().enumerate() {
        let ns = out.delay_spec.slot_of(d).expect("old delays are kept");
        for i in 0..pre {
            for j in 0..post {
                if params.mask[[i, j, s]] {
                    out.weights[[i, j, ns]] = params.weights[[i, j, s]];
                    out.mask[[i, j, ns]] = true;
                    for c in window(d) {
                        let cs = out.delay_spec.slot_of(c).expect("candidate was inserted");
                        out.mask[[i, j, cs]] = true;
                    }
                }
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundReport {
    pub round: usize,
    /// Unmasked trainable parameters.
    pub params: usize,
    pub loss: f64,
    pub accuracy: Option<f64>,
    pub spikes_per_step: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct PruneOutcome {
    pub spec: NetworkSpec,
    pub params: NetworkParams,
    /// Round 0 describes the input model.
    pub rounds: Vec<RoundReport>,
}

fn delayed_projections(params: &mut NetworkParams) -> impl Iterator<Item = &mut DelayLayerParams> {
    params.all_layers_mut().filter_map(|l| match &mut l.input {
        Projection::Delayed(p) => Some(p),
        Projection::Dense { .. } => None,
    })
}

/// Prunes every delayed projection of the network in place.
pub fn prune_network(params: &mut NetworkParams, rule: PruneRule) -> Result<()> {
    for p in delayed_projections(params) {
        prune_layer(p, rule)?;
    }
    Ok(())
}

fn refine_network(spec: &mut NetworkSpec, params: &mut NetworkParams, factor: usize) -> Result<bool> {
    let mut refined = false;
    let n_hidden = spec.layers.len();
    for (l, layer) in params.all_layers_mut().enumerate() {
        let Projection::Delayed(p) = &mut layer.input else { continue };
        let Some(stride) = p.delay_spec.stride() else { continue };
        if stride % factor != 0 {
            continue;
        }
        *p = refine_delays(p, stride / factor)?;
        let new_spec = p.delay_spec.clone();
        if l < n_hidden {
            spec.layers[l].kind = LayerKind::Delayed { delays: new_spec };
        } else {
            spec.readout.delays = Some(new_spec);
        }
        refined = true;
    }
    Ok(refined)
}

/// Repeats prune, optional refine, fine-tune for `refine_rounds` rounds.
/// The last round never refines, so the returned model respects the rule.
pub fn prune_finetune_loop(
    spec: &NetworkSpec,
    params: &NetworkParams,
    train: &[Sample],
    eval: &[Sample],
    config: &PruneConfig,
    hp: &Hyperparams,
) -> Result<PruneOutcome> {
    config.validate()?;
    let mut spec = spec.clone();
    let mut params = params.clone();
    let report = |round: usize, spec: &NetworkSpec, params: &NetworkParams| -> Result<RoundReport> {
        let m = evaluate(spec, params, eval, hp.loss)?;
        Ok(RoundReport {
            round,
            params: params.effective_len(),
            loss: m.loss,
            accuracy: m.accuracy,
            spikes_per_step: m.spikes_per_step,
        })
    };
    let mut rounds = vec![report(0, &spec, &params)?];
    for round in 1..=config.refine_rounds {
        prune_network(&mut params, config.rule)?;
        if let Some(factor) = config.refine_factor {
            if round < config.refine_rounds {
                refine_network(&mut spec, &mut params, factor)?;
            }
        }
        if config.finetune_epochs > 0 {
            let ft = Hyperparams {
                epochs: config.finetune_epochs,
                seed: hp.seed.wrapping_add(round as u64),
                target_loss: None,
                ..hp.clone()
            };
            params = train_from(&spec, params, train, &ft)?.params;
        }
        rounds.push(report(round, &spec, &params)?);
    }
    Ok(PruneOutcome { spec, params, rounds })
}
