//! A small evaluation sweep over two suite buildings with GA and a cheap neural budget.
//!
//!     cargo run --release --example sweep

use rcident::datagen::{generate_dataset, target_suite, GenerationOptions};
use rcident::estimator::EstimatorConfig;
use rcident::eval::{sweep, Method, SweepConfig};
use rcident::ga::GaConfig;
use rcident::Topology;

fn main() -> rcident::Result<()> {
    let buildings = target_suite()
        .iter()
        .take(2)
        .enumerate()
        .map(|(i, spec)| Ok((spec.name.clone(), generate_dataset(spec, 24, i as u64, &GenerationOptions::default())?)))
        .collect::<rcident::Result<Vec<_>>>()?;
    let config = SweepConfig {
        methods: vec![Method::Scratch, Method::Ga],
        topologies: Topology::ALL.to_vec(),
        train_lengths: vec![12],
        estimator: EstimatorConfig {
            epochs: 1,
            seeds: 1,
            stride: 4,
            ..EstimatorConfig::default()
        },
        ga: GaConfig {
            seeds: 2,
            ..GaConfig::default()
        },
        ..SweepConfig::default()
    };
    let report = sweep(&buildings, &config, &[])?;
    print!("{}", report.cells_csv()?);
    println!();
    print!("{}", report.aggregates_csv()?);
    for imp in &report.improvements {
        println!(
            "{} vs {} ({} {}d): {:+.1} %",
            imp.model,
            imp.benchmark,
            imp.topology,
            imp.train_days,
            100.0 * imp.value
        );
    }
    Ok(())
}
