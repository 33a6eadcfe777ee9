//! Reverse-mode gradient of a simulation loss against central finite differences.
//!
//!     cargo run --example gradient_check

use rcident::datagen::{generate_dataset, target_suite, GenerationOptions};
use rcident::diff::{Real, Tape};
use rcident::estimator::{slice_windows, theta_loss, LOOKBACK};
use rcident::rc::Integrator;
use rcident::Topology;

fn main() -> rcident::Result<()> {
    let s = generate_dataset(&target_suite()[2], 3, 1, &GenerationOptions::default())?;
    let windows = slice_windows(&s, LOOKBACK)?;
    let w = &windows[40];
    let integrator = Integrator::default();
    let theta = [3.0, 8.0, 6.0, 25.0, 12.0];
    let topo = Topology::TwoRTwoC;

    let tape = Tape::new();
    let p = tape.param(&theta);
    let vars: Vec<_> = (0..5).map(|i| p.index(i)).collect();
    let sim = integrator.simulate_from_measured(topo, &vars, w.label()[0], &w.forcings(), LOOKBACK)?;
    let mut acc = tape.scalar(0.0);
    for (v, y) in sim.iter().zip(w.label()) {
        let r = *v - *y;
        acc = acc + r * r;
    }
    let loss = acc.sqrt();
    let grads = tape.backward(loss)?;
    let g = grads.wrt(p);

    for (i, name) in topo.param_names().iter().enumerate() {
        let h = 1e-5 * theta[i];
        let mut up = theta;
        let mut dn = theta;
        up[i] += h;
        dn[i] -= h;
        let fd = (theta_loss(topo, &up, w, &integrator)? - theta_loss(topo, &dn, w, &integrator)?) / (2.0 * h);
        println!("{name:>5}: tape {:+.8e}  fd {fd:+.8e}  rel {:.1e}", g[i], ((g[i] - fd) / fd).abs());
    }
    Ok(())
}
