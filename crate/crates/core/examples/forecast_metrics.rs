//! Split a series, run 24-hour rolling forecasts and score them.
//!
//!     cargo run --example forecast_metrics

use rcident::datagen::{generate_dataset, target_suite, GenerationOptions};
use rcident::eval::{metrics, rel_improvement, rolling_forecast, split, t_in_range, SplitSpec, HORIZON};
use rcident::rc::Integrator;
use rcident::ThermalParams;

fn main() -> rcident::Result<()> {
    let s = generate_dataset(&target_suite()[3], 36, 2, &GenerationOptions::default())?;
    let sp = split(&s, &SplitSpec::new(24))?;
    println!(
        "train {} / validation {} / test {} samples",
        sp.train.len(),
        sp.validation.len(),
        sp.test.len()
    );

    let truth = s.truth.expect("synthetic");
    let integrator = Integrator::default();
    let range = t_in_range(&sp.test);
    let mut rmse = vec![];
    for (label, p) in [("truth", truth), ("lumped 1R1C", truth.lumped())] {
        let fc = rolling_forecast(&p, &sp.test, HORIZON, &integrator)?;
        let m = metrics(&fc.predictions, &fc.targets(&sp.test), range)?;
        println!(
            "{label:>12}: {} origins, rmse {:.3} nrmse {:.3} mae {:.3}",
            fc.origins.len(),
            m.rmse,
            m.nrmse,
            m.mae
        );
        rmse.push(m.rmse);
    }
    println!("2R2C improves on 1R1C by {:.1} %", 100.0 * rel_improvement(rmse[1], rmse[0])?);

    let off = ThermalParams::two_r_two_c(1.0, 1.0, 5.0, 5.0, 5.0)?;
    let fc = rolling_forecast(&off, &sp.test, HORIZON, &integrator)?;
    println!("poor guess rmse {:.3}", metrics(&fc.predictions, &fc.targets(&sp.test), range)?.rmse);
    Ok(())
}
