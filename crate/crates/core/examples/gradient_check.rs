//! Compares backpropagated gradients with central differences on a small
//! network run with the smooth spike relaxation.

use delaysnn::gradcheck::{check_gradients, DEFAULT_EPS};
use delaysnn::{
    DelaySpec, LayerKind, LayerSpec, NetworkParams, NetworkSpec, NeuronConfig, ReadoutSpec, SurrogateConfig,
};
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> delaysnn::Result<()> {
    let spec = NetworkSpec {
        input_size: 3,
        layers: vec![
            LayerSpec { size: 6, kind: LayerKind::Recurrent, neuron: NeuronConfig::default() },
            LayerSpec {
                size: 5,
                kind: LayerKind::Delayed { delays: DelaySpec::new(vec![0, 2, 5])? },
                neuron: NeuronConfig::default(),
            },
        ],
        readout: ReadoutSpec { size: 2, delays: Some(DelaySpec::new(vec![0, 3])?), tau_init: 5.0 },
        surrogate: SurrogateConfig::soft(2.0),
    };
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let params = NetworkParams::init(&spec, 2.0, &mut rng)?;
    let input = Array2::from_shape_fn((12, 3), |_| rng.gen_range(0.0..1.5));
    let entries = check_gradients(&spec, &params, &input, 25, DEFAULT_EPS, &mut rng)?;
    for e in &entries {
        println!("param {:>4}: analytic {:+.6e} numeric {:+.6e} rel err {:.1e}", e.index, e.analytic, e.numeric, e.rel_error);
    }
    let worst = entries.iter().map(|e| e.rel_error).fold(0.0, f64::max);
    println!("{} of {} parameters checked, worst relative error {worst:.2e}", entries.len(), params.len());
    Ok(())
}
