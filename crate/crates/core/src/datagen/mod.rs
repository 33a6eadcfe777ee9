//! Synthetic building data: weather, thermostat control and closed-loop simulation.

mod generate;
mod spec;
mod weather;

pub use generate::{
    generate_dataset, generate_fleet, setpoint, thermostat, GenerationOptions, DAY_END_HOUR,
    DAY_START_HOUR,
};
pub use spec::{spec_to_truth_params, target_suite, BuildingSpec, FleetRanges, WeatherProfile};
pub use weather::{synth_weather, synth_weather_with, ClimateParams, Weather};
