//! Simulate both RC topologies and compare 1R1C free cooling with the exponential.
//!
//!     cargo run --example simulate

use rcident::rc::{init_envelope_temp, Forcings, Integrator};
use rcident::{ThermalParams, ThermalState};

fn main() -> rcident::Result<()> {
    let n = 96;
    let (t_out, q, u) = (vec![0.0; n], vec![0.0; n], vec![0.0; n]);
    let f = Forcings::new(&t_out, &q, &u)?;

    // R = 10 K/kW, C = 2 kWh/K: time constant 20 h
    let p = ThermalParams::one_r_one_c(10.0, 2.0, 1.0)?;
    let tau = 10.0 * 2.0 * 3600.0;
    for substeps in [1, 4, 16] {
        let sim = Integrator::new(substeps)?.simulate(&p, &ThermalState::indoor(20.0), &f, n)?;
        let exact = 20.0 * (-(n as f64) * 900.0 / tau).exp();
        println!(
            "1R1C substeps {substeps:>2}: T(24h) = {:.5} °C, exact {exact:.5}, rel err {:.2e}",
            sim[n],
            ((sim[n] - exact) / exact).abs()
        );
    }

    // heavy envelope, heater on for the first 6 hours
    let p = ThermalParams::two_r_two_c(2.0, 6.0, 3.0, 20.0, 4.0)?;
    let u: Vec<f64> = (0..n).map(|k| if k < 24 { 3.0 } else { 0.0 }).collect();
    let t_out = vec![-2.0; n];
    let f = Forcings::new(&t_out, &q, &u)?;
    let t_e0 = init_envelope_temp(2.0, 6.0, 20.0, -2.0)?;
    let traj = Integrator::default().simulate_states(&p, &ThermalState::with_envelope(20.0, t_e0), &f, n)?;
    let t_e = traj.t_e.expect("2R2C has an envelope state");
    for k in (0..=n).step_by(12) {
        println!("2R2C t = {:>4.1} h  T_in {:6.2}  T_e {:6.2}", k as f64 / 4.0, traj.t_in[k], t_e[k]);
    }
    Ok(())
}
