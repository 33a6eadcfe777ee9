//! Generate the synthetic target suite and a small source fleet, then write one CSV.
//!
//!     cargo run --example generate_data

use rcident::datagen::{generate_dataset, generate_fleet, target_suite, FleetRanges, GenerationOptions};

fn main() -> rcident::Result<()> {
    let opts = GenerationOptions::default();
    for (i, spec) in target_suite().iter().enumerate() {
        let s = generate_dataset(spec, 14, i as u64, &opts)?;
        let lo = s.t_in.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = s.t_in.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let energy: f64 = s.u_heat.iter().sum::<f64>() * 0.25;
        println!(
            "{}  {:?}  T_in in [{lo:.1}, {hi:.1}] °C  heat {energy:7.1} kWh  truth {:?}",
            spec.name,
            spec.weather,
            s.truth.map(|t| t.to_vec())
        );
    }

    // noisy data with unrecorded occupancy gains
    let noisy = GenerationOptions {
        noise_std: 0.1,
        internal_gains: true,
        ..opts
    };
    let fleet = generate_fleet(4, 7, 42, &FleetRanges::default(), &noisy)?;
    for (spec, s) in &fleet {
        println!("{}: U {:.2} W/m²K, {} samples", spec.name, spec.u_wall, s.len());
    }
    let path = std::env::temp_dir().join("rcident_S001.csv");
    fleet[0].1.write_csv(&path)?;
    println!("wrote {}", path.display());
    Ok(())
}
