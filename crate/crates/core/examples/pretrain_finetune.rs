//! Pretrain on a small source fleet, then fine-tune on a 12-day target and compare with
//! training from scratch on the same budget.
//!
//!     cargo run --release --example pretrain_finetune

use rcident::datagen::{generate_dataset, generate_fleet, target_suite, FleetRanges, GenerationOptions};
use rcident::estimator::{finetune, fleet_network, pretrain, train_from_scratch, EstimatorConfig};
use rcident::eval::{evaluate_params, split, SplitSpec};
use rcident::rc::Integrator;
use rcident::series::BuildingSeries;
use rcident::Topology;

fn main() -> rcident::Result<()> {
    let topo = Topology::TwoRTwoC;
    let opts = GenerationOptions::default();
    let fleet: Vec<BuildingSeries> = generate_fleet(8, 14, 5, &FleetRanges::default(), &opts)?
        .into_iter()
        .map(|(_, s)| s)
        .collect();
    let config = EstimatorConfig {
        pretrain_epochs: 3,
        stride: 4,
        ..EstimatorConfig::default()
    };
    let mut net = fleet_network(&fleet, topo, &config, 5)?;
    let curve = pretrain(&mut net, &fleet, &config, 5)?;
    println!("pretraining loss per epoch: {curve:.3?}");

    let target = generate_dataset(&target_suite()[1], 24, 11, &opts)?;
    let sp = split(&target, &SplitSpec::new(12))?;
    let budget = EstimatorConfig {
        epochs: 1,
        seeds: 1,
        ..EstimatorConfig::default()
    };
    let integrator = Integrator::default();
    let tuned = finetune(&net, &sp.train, topo, &budget, 1)?;
    let scratch = train_from_scratch(&sp.train, topo, &budget, 1)?;
    for (label, p) in [("pretrained", tuned.theta), ("scratch", scratch.theta)] {
        println!("{label:>10}: test rmse {:.3} °C", evaluate_params(&p, &sp.test, &integrator)?.rmse);
    }
    Ok(())
}
