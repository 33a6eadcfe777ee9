use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{ensure, Error, Result};
use crate::rc::ThermalParams;

/// Story height of the box-shaped reference building, m.
const STORY_HEIGHT: f64 = 2.5;
const STORIES: f64 = 2.0;
/// Share of the envelope resistance between the interior and the envelope node.
const INTERIOR_RESISTANCE_SHARE: f64 = 0.3;
/// Interior (air + furniture) capacity per m² of floor, kWh/K.
const INTERIOR_CAPACITY_PER_FLOOR_M2: f64 = 0.04;
/// Fraction of glazed area that acts as effective solar aperture.
const SOLAR_APERTURE_FACTOR: f64 = 0.6;

/// Synthetic stand-in climates. The first three are used by the target suite,
/// the rest by source fleets.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WeatherProfile {
    Amsterdam,
    Bratislava,
    Munich,
    Belgrade,
    Prague,
    Berlin,
    London,
    Zurich,
}

impl WeatherProfile {
    pub const SOURCE: [WeatherProfile; 5] = [
        WeatherProfile::Belgrade,
        WeatherProfile::Prague,
        WeatherProfile::Berlin,
        WeatherProfile::London,
        WeatherProfile::Zurich,
    ];

    pub fn id(self) -> u64 {
        self as u64
    }
}

impl fmt::Display for WeatherProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = serde_json::to_value(self).expect("unit variant");
        f.write_str(s.as_str().expect("string"))
    }
}

impl FromStr for WeatherProfile {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        serde_json::from_value(serde_json::Value::String(s.to_ascii_lowercase()))
            .map_err(|_| Error::invalid(format!("unknown weather profile {s:?}")))
    }
}

/// Envelope and operation description of a single-zone building.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BuildingSpec {
    pub name: String,
    /// W/(m²K)
    pub u_wall: f64,
    /// kJ/(m²K)
    pub c_wall: f64,
    /// window to wall area ratio
    pub f_win: f64,
    /// m²
    pub a_ground: f64,
    /// °C
    pub t_sp_day: f64,
    /// °C
    pub dt_night: f64,
    pub weather: WeatherProfile,
    /// kW while occupied, used when internal gains are enabled
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub occupancy_gain: Option<f64>,
}

impl BuildingSpec {
    pub fn validate(&self) -> Result<()> {
        ensure!(
            (0.1..=1.5).contains(&self.u_wall),
            "{}: U_wall {} outside [0.1, 1.5]",
            self.name,
            self.u_wall
        );
        ensure!(
            (30.0..=300.0).contains(&self.c_wall),
            "{}: c_wall {} outside [30, 300]",
            self.name,
            self.c_wall
        );
        ensure!(
            self.f_win > 0.0 && self.f_win < 0.5,
            "{}: f_win {} outside (0, 0.5)",
            self.name,
            self.f_win
        );
        ensure!(self.a_ground > 0.0, "{}: A_ground must be positive", self.name);
        ensure!(self.dt_night >= 0.0, "{}: night setback must be >= 0", self.name);
        ensure!(self.t_sp_day.is_finite(), "{}: setpoint not finite", self.name);
        if let Some(g) = self.occupancy_gain {
            ensure!(g >= 0.0, "{}: occupancy gain must be >= 0", self.name);
        }
        Ok(())
    }

    /// Opaque envelope area of a square two-story box, m².
    pub fn envelope_area(&self) -> f64 {
        4.0 * self.a_ground.sqrt() * STORIES * STORY_HEIGHT
    }

    pub fn floor_area(&self) -> f64 {
        STORIES * self.a_ground
    }

    /// Ground-truth 2R2C parameters in K/kW, kWh/K and m².
    pub fn truth_params(&self) -> Result<ThermalParams> {
        self.validate()?;
        let a_env = self.envelope_area();
        let ua = self.u_wall * a_env / 1000.0; // kW/K
        let r_total = 1.0 / ua;
        ThermalParams::two_r_two_c(
            INTERIOR_RESISTANCE_SHARE * r_total,
            (1.0 - INTERIOR_RESISTANCE_SHARE) * r_total,
            INTERIOR_CAPACITY_PER_FLOOR_M2 * self.floor_area(),
            self.c_wall * a_env / 3600.0,
            self.f_win * a_env * SOLAR_APERTURE_FACTOR,
        )
    }

    /// Heater size: 1.5x the steady load at -12 °C outdoors, at least 2 kW.
    pub fn heater_capacity(&self) -> f64 {
        let ua = self.u_wall * self.envelope_area() / 1000.0;
        (1.5 * ua * (self.t_sp_day + 12.0)).max(2.0)
    }
}

/// Maps a building specification to its ground-truth 2R2C parameters.
pub fn spec_to_truth_params(spec: &BuildingSpec) -> Result<ThermalParams> {
    spec.truth_params()
}

/// The eight target buildings (envelope, setpoint and climate combinations).
pub fn target_suite() -> Vec<BuildingSpec> {
    use WeatherProfile::*;
    let rows = [
        ("T1", 0.25, 280.0, 0.19, 100.0, 21.0, 2.0, Amsterdam),
        ("T2", 0.25, 40.0, 0.16, 70.0, 22.0, 1.0, Bratislava),
        ("T3", 0.55, 150.0, 0.16, 70.0, 23.0, 3.0, Amsterdam),
        ("T4", 0.55, 280.0, 0.19, 100.0, 20.5, 1.5, Munich),
        ("T5", 0.85, 150.0, 0.19, 100.0, 22.5, 0.5, Bratislava),
        ("T6", 0.85, 40.0, 0.16, 70.0, 22.0, 2.5, Munich),
        ("T7", 1.15, 280.0, 0.16, 70.0, 23.0, 0.0, Bratislava),
        ("T8", 1.15, 40.0, 0.19, 100.0, 23.0, 1.5, Amsterdam),
    ];
    rows.into_iter()
        .map(|(name, u, c, f, a, sp, dn, w)| BuildingSpec {
            name: name.to_string(),
            u_wall: u,
            c_wall: c,
            f_win: f,
            a_ground: a,
            t_sp_day: sp,
            dt_night: dn,
            weather: w,
            occupancy_gain: None,
        })
        .collect()
}

/// Uniform sampling ranges for source fleets.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FleetRanges {
    pub u_wall: (f64, f64),
    pub c_wall: (f64, f64),
    pub f_win: (f64, f64),
    pub a_ground: (f64, f64),
    pub t_sp_day: (f64, f64),
    pub dt_night: (f64, f64),
    pub weather: Vec<WeatherProfile>,
}

impl Default for FleetRanges {
    fn default() -> Self {
        FleetRanges {
            u_wall: (0.15, 1.3),
            c_wall: (30.0, 300.0),
            f_win: (0.15, 0.2),
            a_ground: (60.0, 120.0),
            t_sp_day: (20.0, 23.0),
            dt_night: (0.0, 3.0),
            weather: WeatherProfile::SOURCE.to_vec(),
        }
    }
}
