//! Fit a 1R1C model to a noise-free 1R1C building with the genetic algorithm.
//!
//!     cargo run --release --example ga_baseline

use rcident::datagen::{generate_dataset, target_suite, GenerationOptions};
use rcident::eval::{evaluate_params, split, SplitSpec};
use rcident::ga::{ga_estimate, GaConfig};
use rcident::rc::Integrator;
use rcident::{ThermalParams, Topology};

fn main() -> rcident::Result<()> {
    let opts = GenerationOptions {
        truth_topology: Topology::OneROneC,
        ..GenerationOptions::default()
    };
    let s = generate_dataset(&target_suite()[0], 48, 3, &opts)?;
    let sp = split(&s, &SplitSpec::new(36))?;

    let out = ga_estimate(&sp.train, Topology::OneROneC, &GaConfig::default(), 0)?;
    for (i, r) in out.runs.iter().enumerate() {
        println!("seed {i}: mse {:.3e} after {} evaluations", r.loss, r.evaluations);
    }
    let est = ThermalParams::from_slice(Topology::OneROneC, &out.theta)?;
    let m = evaluate_params(&est, &sp.test, &Integrator::default())?;
    println!("truth    {:?}", s.truth.map(|t| t.to_vec()));
    println!("estimate {:?} (seed {})", out.theta, out.best_seed);
    println!("test rmse {:.3} °C, mae {:.3} °C", m.rmse, m.mae);
    Ok(())
}
