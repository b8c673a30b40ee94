//! Trains a delayed network and a recurrent one on the adding task and
//! prints the per-epoch training MSE of both.
//!
//! cargo run --release --example adding_task -- [epochs] [seed]

use delaysnn::tasks::gen_adding;
use delaysnn::training::{evaluate, train};
use delaysnn::{
    DelaySpec, Hyperparams, LayerKind, LayerSpec, LossKind, NetworkSpec, NeuronConfig, ReadoutSpec, Sample,
    SurrogateConfig,
};

fn network(delayed: bool) -> NetworkSpec {
    let neuron = NeuronConfig { u_th: 1.0, tau_init: 0.5 };
    let window = DelaySpec::from_depth_stride(40, 5).unwrap();
    let (first, second) = if delayed {
        (LayerKind::Feedforward, LayerKind::Delayed { delays: window.clone() })
    } else {
        (LayerKind::Recurrent, LayerKind::Recurrent)
    };
    NetworkSpec {
        input_size: 2,
        layers: vec![
            LayerSpec { size: 32, kind: first, neuron },
            LayerSpec { size: 32, kind: second, neuron },
        ],
        readout: ReadoutSpec { size: 1, delays: delayed.then_some(window), tau_init: 10.0 },
        surrogate: SurrogateConfig::default(),
    }
}

fn main() -> delaysnn::Result<()> {
    let mut args = std::env::args().skip(1);
    let epochs = args.next().map_or(20, |a| a.parse().expect("epochs"));
    let seed = args.next().map_or(0, |a| a.parse().expect("seed"));

    let to_samples = |s: Vec<delaysnn::tasks::AddingSample>| -> Vec<Sample> { s.iter().map(|x| x.to_sample()).collect() };
    let train_set = to_samples(gen_adding(50, 2000, seed)?);
    let test_set = to_samples(gen_adding(50, 500, seed + 1)?);
    let hp = Hyperparams {
        learning_rate: 0.01,
        batch_size: 16,
        epochs,
        seed,
        lr_decay: 0.95,
        ..Default::default()
    };

    for (name, delayed) in [("delayed", true), ("recurrent", false)] {
        let spec = network(delayed);
        let out = train(&spec, &train_set, &hp)?;
        let losses: Vec<String> = out.metrics.iter().map(|m| format!("{:.4}", m.loss)).collect();
        let test = evaluate(&spec, &out.params, &test_set, LossKind::Mse)?;
        println!("{name:>9}: train mse per epoch {}", losses.join(" "));
        println!("{name:>9}: held-out mse {:.4}", test.loss);
    }
    Ok(())
}
