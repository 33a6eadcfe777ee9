use rand::Rng as _;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{synth_weather, BuildingSpec, FleetRanges};
use crate::error::{ensure, Result};
use crate::rc::{ForcingSample, Integrator, ThermalParams, Topology};
use crate::seed::{self, tag};
use crate::series::{default_start, BuildingSeries, SAMPLES_PER_DAY};

/// Day setpoint applies from 06:00 to 22:00.
pub const DAY_START_HOUR: f64 = 6.0;
pub const DAY_END_HOUR: f64 = 22.0;

/// Setpoint in effect at `hour` of day.
pub fn setpoint(hour: f64, t_sp_day: f64, dt_night: f64) -> f64 {
    if (DAY_START_HOUR..DAY_END_HOUR).contains(&hour) {
        t_sp_day
    } else {
        t_sp_day - dt_night
    }
}

/// Proportional heating controller: `clip(gain * (setpoint - t_in), 0, capacity)`.
pub fn thermostat(t_in: f64, setpoint: f64, capacity: f64, gain: f64) -> Result<f64> {
    ensure!(capacity > 0.0, "heater capacity must be positive");
    Ok((gain * (setpoint - t_in)).clamp(0.0, capacity))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GenerationOptions {
    /// Standard deviation of Gaussian noise on recorded T_in, °C.
    pub noise_std: f64,
    /// Unrecorded stochastic occupancy gains in the truth dynamics.
    pub internal_gains: bool,
    /// Truth model family; 1R1C lumps the 2R2C truth (series resistances, summed capacities).
    pub truth_topology: Topology,
    pub substeps: usize,
    /// Thermostat gain, kW/K.
    pub controller_gain: f64,
}

impl Default for GenerationOptions {
    fn default() -> Self {
        GenerationOptions {
            noise_std: 0.0,
            internal_gains: false,
            truth_topology: Topology::TwoRTwoC,
            substeps: 4,
            controller_gain: 0.5,
        }
    }
}

/// Default occupancy gain when a spec does not set one, kW.
const DEFAULT_OCCUPANCY_GAIN: f64 = 0.3;
/// Mean dwell time of each occupancy state, samples (4 h).
const OCCUPANCY_DWELL: f64 = 16.0;

impl ThermalParams {
    /// 1R1C approximation of a 2R2C network: resistances in series, capacities summed.
    pub fn lumped(&self) -> ThermalParams {
        match *self {
            ThermalParams::OneROneC { .. } => *self,
            ThermalParams::TwoRTwoC {
                r_ie,
                r_ea,
                c_i,
                c_e,
                a_eff,
            } => ThermalParams::OneROneC {
                r_ia: r_ie + r_ea,
                c_i: c_i + c_e,
                a_eff,
            },
        }
    }

    /// Same physical building expressed in `topology`.
    pub fn for_topology(&self, topology: Topology) -> Option<ThermalParams> {
        match (self.topology(), topology) {
            (a, b) if a == b => Some(*self),
            (Topology::TwoRTwoC, Topology::OneROneC) => Some(self.lumped()),
            _ => None,
        }
    }
}

/// Closed-loop simulation of a building under synthetic weather and thermostat control.
pub fn generate_dataset(
    spec: &BuildingSpec,
    days: usize,
    seed: u64,
    opts: &GenerationOptions,
) -> Result<BuildingSeries> {
    ensure!(days >= 1, "need at least one day");
    let truth = spec
        .truth_params()?
        .for_topology(opts.truth_topology)
        .expect("2R2C truth reduces to every topology");
    let integrator = Integrator::new(opts.substeps)?;
    let n = days * SAMPLES_PER_DAY;
    let weather = synth_weather(spec.weather, days, seed);
    let capacity = spec.heater_capacity();

    let noise = Normal::new(0.0, opts.noise_std.max(0.0)).expect("finite noise");
    let mut noise_rng = seed::rng(seed, &[tag::NOISE]);
    let mut gain_rng = seed::rng(seed, &[tag::GAINS]);
    let occupied_gain = spec.occupancy_gain.unwrap_or(DEFAULT_OCCUPANCY_GAIN);
    let mut occupied = false;

    let t_in0 = setpoint(0.0, spec.t_sp_day, spec.dt_night);
    let mut state = truth.initial_state(t_in0, weather.t_out[0]);
    let mut t_in = Vec::with_capacity(n);
    let mut u_heat = Vec::with_capacity(n);
    for k in 0..n {
        let hour = (k % SAMPLES_PER_DAY) as f64 * 24.0 / SAMPLES_PER_DAY as f64;
        let sp = setpoint(hour, spec.t_sp_day, spec.dt_night);
        let u = thermostat(state.t_in, sp, capacity, opts.controller_gain)?;
        t_in.push(state.t_in);
        u_heat.push(u);
        let gain = if opts.internal_gains {
            if gain_rng.random::<f64>() < 1.0 / OCCUPANCY_DWELL {
                occupied = !occupied;
            }
            if occupied {
                occupied_gain
            } else {
                0.0
            }
        } else {
            0.0
        };
        let sample = ForcingSample {
            t_out: weather.t_out[k],
            q_solar: weather.q_solar[k],
            u_heat: u + gain,
        };
        state = integrator.advance(&truth, &state, sample)?;
    }
    if opts.noise_std > 0.0 {
        for t in &mut t_in {
            *t += noise.sample(&mut noise_rng);
        }
    }

    let mut series =
        BuildingSeries::new(default_start(), t_in, weather.t_out, weather.q_solar, u_heat)?;
    series.truth = Some(truth);
    Ok(series)
}

/// Uniformly samples `n` specs from `ranges` and generates each building with its own
/// derived seed.
pub fn generate_fleet(
    n: usize,
    days: usize,
    seed: u64,
    ranges: &FleetRanges,
    opts: &GenerationOptions,
) -> Result<Vec<(BuildingSpec, BuildingSeries)>> {
    ensure!(n >= 1, "fleet size must be at least 1");
    ensure!(!ranges.weather.is_empty(), "fleet ranges list no weather profile");
    let specs: Vec<(BuildingSpec, u64)> = (0..n)
        .map(|i| {
            let mut rng = seed::rng(seed, &[tag::FLEET, i as u64]);
            let mut draw = |(lo, hi): (f64, f64)| {
                if hi > lo {
                    rng.random_range(lo..hi)
                } else {
                    lo
                }
            };
            let spec = BuildingSpec {
                name: format!("S{:03}", i + 1),
                u_wall: draw(ranges.u_wall),
                c_wall: draw(ranges.c_wall),
                f_win: draw(ranges.f_win),
                a_ground: draw(ranges.a_ground),
                t_sp_day: draw(ranges.t_sp_day),
                dt_night: draw(ranges.dt_night),
                weather: ranges.weather[rng.random_range(0..ranges.weather.len())],
                occupancy_gain: None,
            };
            (spec, seed::derive(seed, &[tag::WEATHER, i as u64]))
        })
        .collect();
    specs
        .into_par_iter()
        .map(|(spec, bseed)| {
            let series = generate_dataset(&spec, days, bseed, opts)?;
            Ok((spec, series))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datagen::target_suite;
    use crate::rc::ThermalState;

    #[test]
    fn thermostat_cases() {
        assert_eq!(thermostat(30.0, 20.0, 5.0, 0.5).unwrap(), 0.0);
        assert_eq!(thermostat(-40.0, 20.0, 5.0, 0.5).unwrap(), 5.0);
        assert_eq!(thermostat(20.0, 21.0, 10.0, 0.5).unwrap(), 0.5);
        assert!(thermostat(20.0, 21.0, 0.0, 0.5).is_err());
    }

    #[test]
    fn setpoint_schedule() {
        assert_eq!(setpoint(5.75, 21.0, 2.0), 19.0);
        assert_eq!(setpoint(6.0, 21.0, 2.0), 21.0);
        assert_eq!(setpoint(21.75, 21.0, 2.0), 21.0);
        assert_eq!(setpoint(22.0, 21.0, 2.0), 19.0);
    }

    #[test]
    fn noise_free_series_resimulates_exactly() {
        for topo in Topology::ALL {
            let spec = &target_suite()[2];
            let opts = GenerationOptions {
                truth_topology: topo,
                ..Default::default()
            };
            let s = generate_dataset(spec, 5, 9, &opts).unwrap();
            let truth = s.truth.unwrap();
            let init = truth.initial_state(s.t_in[0], s.t_out[0]);
            let n = s.len() - 1;
            let sim = Integrator::default()
                .simulate(&truth, &init, &s.forcings(), n)
                .unwrap();
            for (a, b) in sim.iter().zip(&s.t_in) {
                assert!((a - b).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn setback_creates_nightly_dip() {
        let spec = &target_suite()[0]; // dT_night = 2
        let s = generate_dataset(spec, 20, 4, &GenerationOptions::default()).unwrap();
        // average over the last 10 days: 21:45 vs 05:45
        let mut dips = vec![];
        for d in 10..20 {
            let evening = s.t_in[d * 96 + 87];
            let morning = s.t_in[d * 96 + 23];
            dips.push(evening - morning);
        }
        let mean = dips.iter().sum::<f64>() / dips.len() as f64;
        assert!(mean > 0.5, "mean dip {mean}");
    }

    #[test]
    fn generation_is_deterministic() {
        let spec = &target_suite()[5];
        let opts = GenerationOptions {
            noise_std: 0.1,
            internal_gains: true,
            ..Default::default()
        };
        let a = generate_dataset(spec, 3, 77, &opts).unwrap();
        let b = generate_dataset(spec, 3, 77, &opts).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn plausible_temperatures_over_ninety_days() {
        for spec in target_suite() {
            let s = generate_dataset(&spec, 90, 1, &GenerationOptions::default()).unwrap();
            let (lo, hi) = s
                .t_in
                .iter()
                .fold((f64::MAX, f64::MIN), |(a, b), x| (a.min(*x), b.max(*x)));
            assert!(lo >= 5.0 && hi <= 35.0, "{}: [{lo}, {hi}]", spec.name);
        }
    }

    #[test]
    fn truth_is_a_zero_loss_optimum() {
        let spec = &target_suite()[7];
        let s = generate_dataset(spec, 4, 2, &GenerationOptions::default()).unwrap();
        let truth = s.truth.unwrap();
        let init: ThermalState = truth.initial_state(s.t_in[0], s.t_out[0]);
        let sim = crate::rc::simulate(&truth, &init, &s.forcings(), s.len() - 1).unwrap();
        let mse: f64 =
            sim.iter().zip(&s.t_in).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / s.len() as f64;
        assert_eq!(mse, 0.0);
    }

    #[test]
    fn fleet_properties() {
        let ranges = FleetRanges::default();
        let opts = GenerationOptions::default();
        let one = generate_fleet(1, 2, 5, &ranges, &opts).unwrap();
        assert_eq!(one.len(), 1);
        let fleet = generate_fleet(10, 2, 5, &ranges, &opts).unwrap();
        let mut u: Vec<f64> = fleet.iter().map(|(s, _)| s.u_wall).collect();
        u.dedup();
        assert!(u.len() >= 2);
        for (spec, series) in &fleet {
            spec.validate().unwrap();
            assert_eq!(series.len(), 2 * 96);
        }
        // distinct weather per building
        assert_ne!(fleet[0].1.t_out, fleet[1].1.t_out);
        assert!(generate_fleet(0, 2, 5, &ranges, &opts).is_err());
    }
}
