//! Neural estimator trained on one building, with the loss-weighted marginals it selects
//! from.
//!
//!     cargo run --release --example train_from_scratch [epochs] [seeds]

use rcident::datagen::{generate_dataset, target_suite, GenerationOptions};
use rcident::estimator::{select_with_histograms, train_from_scratch, EstimatorConfig};
use rcident::eval::{evaluate_params, split, SplitSpec};
use rcident::rc::Integrator;
use rcident::{ThermalParams, Topology};

fn main() -> rcident::Result<()> {
    let mut args = std::env::args().skip(1).map(|a| a.parse::<usize>().expect("integer argument"));
    let epochs = args.next().unwrap_or(1);
    let seeds = args.next().unwrap_or(2);

    let s = generate_dataset(&target_suite()[5], 48, 7, &GenerationOptions::default())?;
    let sp = split(&s, &SplitSpec::new(36))?;
    let config = EstimatorConfig {
        epochs,
        seeds,
        ..EstimatorConfig::default()
    };
    let out = train_from_scratch(&sp.train, Topology::TwoRTwoC, &config, 0)?;
    println!("{} trace records, {} skipped steps", out.trace.len(), out.skipped);

    let (theta, hists) = select_with_histograms(&out.trace, config.bins)?;
    for (name, h) in Topology::TwoRTwoC.param_names().iter().zip(&hists) {
        let peak = h.argmax();
        println!("{name:>5}: mode {:8.3} in [{:.3}, {:.3}]", h.center(peak), h.edges[0], h.edges[h.bins()]);
    }
    let integrator = Integrator::default();
    let best = out.trace.best().expect("non-empty trace");
    let best = ThermalParams::from_slice(Topology::TwoRTwoC, &best.theta)?;
    for (label, p) in [("marginal", theta), ("min-loss", best), ("truth", s.truth.expect("synthetic"))] {
        let m = evaluate_params(&p, &sp.test, &integrator)?;
        println!("{label:>8}: rmse {:.3} °C  {:?}", m.rmse, p.to_vec());
    }
    Ok(())
}
