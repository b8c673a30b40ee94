//! The class is the gap between two spikes on the same channel. With short
//! membrane time constants only the network with synaptic delays can see
//! both spikes at once.
//!
//! cargo run --release --example delay_xor -- [seed]

use delaysnn::tasks::{event_sample, gen_delay_xor, DelayXorOptions};
use delaysnn::training::{evaluate, train};
use delaysnn::{
    DelaySpec, Hyperparams, LayerKind, LayerSpec, LossKind, NetworkSpec, NeuronConfig, ReadoutSpec, Sample,
    SurrogateConfig,
};

const STEPS: usize = 64;
const GAPS: [usize; 4] = [6, 18, 30, 42];

fn network(delayed: bool) -> NetworkSpec {
    let neuron = NeuronConfig { u_th: 1.0, tau_init: 1.0 };
    let window = DelaySpec::from_depth_stride(48, 6).unwrap();
    let second = if delayed { LayerKind::Delayed { delays: window.clone() } } else { LayerKind::Feedforward };
    NetworkSpec {
        input_size: 4,
        layers: vec![
            LayerSpec { size: 16, kind: LayerKind::Feedforward, neuron },
            LayerSpec { size: 16, kind: second, neuron },
        ],
        readout: ReadoutSpec { size: GAPS.len(), delays: delayed.then_some(window), tau_init: 1.0 },
        surrogate: SurrogateConfig::default(),
    }
}

fn dataset(count: usize, seed: u64) -> delaysnn::Result<Vec<Sample>> {
    let opts = DelayXorOptions { channels: 4, jitter: 1 };
    gen_delay_xor(STEPS, &GAPS, count, seed, &opts)?.iter().map(|e| event_sample(e, STEPS)).collect()
}

fn main() -> delaysnn::Result<()> {
    let seed = std::env::args().nth(1).map_or(0, |a| a.parse().expect("seed"));
    let train_set = dataset(800, seed)?;
    let test_set = dataset(400, seed + 1000)?;
    let hp = Hyperparams {
        learning_rate: 0.01,
        batch_size: 32,
        epochs: 40,
        seed,
        loss: LossKind::CrossEntropy,
        init_gain: 4.0,
        ..Default::default()
    };
    for (name, delayed) in [("delayed", true), ("feedforward", false)] {
        let spec = network(delayed);
        let out = train(&spec, &train_set, &hp)?;
        let m = evaluate(&spec, &out.params, &test_set, LossKind::CrossEntropy)?;
        println!("{name:>11}: test accuracy {:.3} (chance {:.2})", m.accuracy.unwrap_or(0.0), 1.0 / GAPS.len() as f64);
    }
    Ok(())
}
