//! Memory and energy of the reference spoken-digit architectures under the
//! two delay mechanisms, relative to the largest recurrent baseline.
//!
//! cargo run --example cost_model -- [coefficients.toml]

use delaysnn::hwcost::{param_count, presets, saving_factors};
use delaysnn::{CostReport, DelayMechanism, EnergyCoeffs};

fn main() -> delaysnn::Result<()> {
    let coeffs = match std::env::args().nth(1) {
        Some(p) => EnergyCoeffs::load(p.as_ref())?,
        None => EnergyCoeffs::default(),
    };
    for mechanism in [DelayMechanism::Queue, DelayMechanism::Ring] {
        println!("delay mechanism: {mechanism}");
        let mut baseline = None;
        for name in ["r1", "r2", "d1", "d2"] {
            let arch = presets::by_name(name).unwrap();
            let activity = presets::reference_activity(name).unwrap();
            let mech = if arch.all_layers().any(|l| l.delays.is_some()) { mechanism } else { DelayMechanism::None };
            let report = CostReport::build(name, &arch, &activity, &coeffs, mech)?;
            let base = baseline.get_or_insert_with(|| report.clone());
            let f = saving_factors(base, &report)?;
            println!(
                "  {name}: {:>6} params  {:>6} memory words  {:.3e} J/sample  memory x{:.2}  energy x{:.2}",
                param_count(&arch).total(),
                report.memory_words(),
                report.energy(),
                f.memory,
                f.energy
            );
        }
    }
    Ok(())
}
