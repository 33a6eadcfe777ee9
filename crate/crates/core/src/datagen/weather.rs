use std::f64::consts::PI;

use rand::Rng as _;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::WeatherProfile;
use crate::seed::{self, tag};
use crate::series::SAMPLES_PER_DAY;

/// Shape parameters of a synthetic winter climate.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClimateParams {
    /// Mean outdoor temperature on day 0, °C.
    pub mean: f64,
    /// Warming of the daily mean per day, K/day.
    pub drift: f64,
    /// Half peak-to-peak diurnal swing, K.
    pub diurnal_amplitude: f64,
    /// Stationary standard deviation of the AR(1) component, K.
    pub noise_std: f64,
    /// Lag-1 coefficient of the AR(1) component at 15-minute resolution.
    pub ar_coefficient: f64,
    /// Clear-sky peak horizontal irradiation, kW/m².
    pub solar_peak: f64,
    /// Hours of day.
    pub sunrise: f64,
    pub sunset: f64,
    /// Daily cloudiness multiplier is drawn uniformly from this range.
    pub cloud_range: (f64, f64),
}

impl WeatherProfile {
    pub fn climate(self) -> ClimateParams {
        use WeatherProfile::*;
        let (mean, amp, sd, peak) = match self {
            Amsterdam => (4.0, 3.0, 2.0, 0.25),
            Bratislava => (1.0, 4.5, 2.5, 0.30),
            Munich => (-0.5, 4.5, 3.0, 0.32),
            Belgrade => (2.5, 5.0, 2.5, 0.33),
            Prague => (0.0, 4.0, 2.5, 0.27),
            Berlin => (1.0, 3.5, 2.5, 0.25),
            London => (5.5, 3.0, 1.8, 0.22),
            Zurich => (0.5, 4.0, 2.5, 0.30),
        };
        ClimateParams {
            mean,
            drift: 0.05,
            diurnal_amplitude: amp,
            noise_std: sd,
            ar_coefficient: 0.98,
            solar_peak: peak,
            sunrise: 8.0,
            sunset: 16.5,
            cloud_range: (0.15, 1.0),
        }
    }
}

/// Generated outdoor conditions at 15-minute resolution.
#[derive(Clone, Debug, PartialEq)]
pub struct Weather {
    pub t_out: Vec<f64>,
    pub q_solar: Vec<f64>,
    /// AR(1) component of `t_out`.
    pub t_out_noise: Vec<f64>,
}

impl ClimateParams {
    /// Deterministic part of the outdoor temperature at sample `k`; peaks at 15:00.
    pub fn t_out_mean(&self, k: usize) -> f64 {
        let day = k as f64 / SAMPLES_PER_DAY as f64;
        let hour = (k % SAMPLES_PER_DAY) as f64 * 24.0 / SAMPLES_PER_DAY as f64;
        self.mean + self.drift * day + self.diurnal_amplitude * (2.0 * PI * (hour - 15.0) / 24.0).cos()
    }

    /// Clear-sky irradiation shape at `hour`, zero outside daylight.
    pub fn clear_sky(&self, hour: f64) -> f64 {
        if hour <= self.sunrise || hour >= self.sunset {
            0.0
        } else {
            self.solar_peak * (PI * (hour - self.sunrise) / (self.sunset - self.sunrise)).sin()
        }
    }
}

/// Outdoor temperature and solar irradiation for `days` days.
pub fn synth_weather(profile: WeatherProfile, days: usize, seed: u64) -> Weather {
    synth_weather_with(&profile.climate(), days, seed)
}

pub fn synth_weather_with(climate: &ClimateParams, days: usize, seed: u64) -> Weather {
    let n = days.max(1) * SAMPLES_PER_DAY;
    let mut rng = seed::rng(seed, &[tag::WEATHER]);
    let phi = climate.ar_coefficient;
    let innovation = Normal::new(0.0, climate.noise_std * (1.0 - phi * phi).sqrt())
        .expect("finite standard deviation");

    let mut noise = Vec::with_capacity(n);
    let mut x = climate.noise_std * rng.sample::<f64, _>(rand_distr::StandardNormal);
    for _ in 0..n {
        noise.push(x);
        x = phi * x + innovation.sample(&mut rng);
    }

    let (c_lo, c_hi) = climate.cloud_range;
    let clouds: Vec<f64> = (0..days.max(1)).map(|_| rng.random_range(c_lo..=c_hi)).collect();

    let t_out = (0..n).map(|k| climate.t_out_mean(k) + noise[k]).collect();
    let q_solar = (0..n)
        .map(|k| {
            let hour = (k % SAMPLES_PER_DAY) as f64 * 24.0 / SAMPLES_PER_DAY as f64;
            climate.clear_sky(hour) * clouds[k / SAMPLES_PER_DAY]
        })
        .collect();
    Weather {
        t_out,
        q_solar,
        t_out_noise: noise,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solar_is_nonnegative_and_dark_at_night() {
        let w = synth_weather(WeatherProfile::Munich, 10, 3);
        let c = WeatherProfile::Munich.climate();
        for (k, q) in w.q_solar.iter().enumerate() {
            assert!(*q >= 0.0);
            let hour = (k % 96) as f64 / 4.0;
            if hour <= c.sunrise || hour >= c.sunset {
                assert_eq!(*q, 0.0, "k={k}");
            }
        }
        assert!(w.q_solar.iter().any(|q| *q > 0.0));
    }

    #[test]
    fn same_seed_same_weather() {
        let a = synth_weather(WeatherProfile::London, 5, 11);
        let b = synth_weather(WeatherProfile::London, 5, 11);
        assert_eq!(a, b);
        assert_ne!(a, synth_weather(WeatherProfile::London, 5, 12));
    }

    #[test]
    fn noise_autocorrelation_matches_coefficient() {
        let w = synth_weather(WeatherProfile::Amsterdam, 60, 5);
        let x = &w.t_out_noise;
        let mean = x.iter().sum::<f64>() / x.len() as f64;
        let var: f64 = x.iter().map(|v| (v - mean).powi(2)).sum();
        let cov: f64 = x.windows(2).map(|p| (p[0] - mean) * (p[1] - mean)).sum();
        let rho = cov / var;
        let phi = WeatherProfile::Amsterdam.climate().ar_coefficient;
        assert!((rho - phi).abs() < 0.1, "rho={rho}");
    }

    #[test]
    fn winter_means() {
        for p in WeatherProfile::SOURCE.iter().chain(&[
            WeatherProfile::Amsterdam,
            WeatherProfile::Bratislava,
            WeatherProfile::Munich,
        ]) {
            let w = synth_weather(*p, 30, 1);
            let m = w.t_out.iter().sum::<f64>() / w.t_out.len() as f64;
            assert!((-5.0..10.0).contains(&m), "{p}: {m}");
        }
    }
}
