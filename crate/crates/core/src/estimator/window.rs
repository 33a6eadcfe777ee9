use std::ops::Range;

use crate::error::{ensure, Result};
use crate::rc::Forcings;
use crate::series::BuildingSeries;

/// Samples of history per training example (24 h).
pub const LOOKBACK: usize = 96;
/// Columns per timestep: T_in, u_heat, Q_solar, T_out.
pub const FEATURES: usize = 4;

/// A training example borrowed from a series: `lookback` samples of history starting at
/// `start`, labelled with the `lookback + 1` indoor temperatures from `start`.
#[derive(Clone, Copy, Debug)]
pub struct Window<'a> {
    series: &'a BuildingSeries,
    start: usize,
    lookback: usize,
}

impl<'a> Window<'a> {
    pub fn new(series: &'a BuildingSeries, start: usize, lookback: usize) -> Result<Self> {
        ensure!(lookback >= 1, "lookback must be positive");
        ensure!(
            start + lookback < series.len(),
            "window at {start} with lookback {lookback} exceeds series of {} samples",
            series.len()
        );
        Ok(Window {
            series,
            start,
            lookback,
        })
    }

    pub fn series(&self) -> &'a BuildingSeries {
        self.series
    }

    pub fn start(&self) -> usize {
        self.start
    }

    pub fn lookback(&self) -> usize {
        self.lookback
    }

    /// Sample indices of the input history.
    pub fn history(&self) -> Range<usize> {
        self.start..self.start + self.lookback
    }

    /// Indoor temperatures the simulation is compared against; the first is the initial
    /// state.
    pub fn label(&self) -> &'a [f64] {
        &self.series.t_in[self.start..self.start + self.lookback + 1]
    }

    /// Inputs driving the simulation over the label horizon.
    pub fn forcings(&self) -> Forcings<'a> {
        self.series.forcings().slice(self.start, self.lookback)
    }

    /// Raw `lookback x 4` matrix, row-major.
    pub fn matrix(&self) -> Vec<f64> {
        let s = self.series;
        self.history()
            .flat_map(|k| [s.t_in[k], s.u_heat[k], s.q_solar[k], s.t_out[k]])
            .collect()
    }
}

/// Overlapping windows at stride 1; there are `len - lookback` of them.
pub fn slice_windows(series: &BuildingSeries, lookback: usize) -> Result<Vec<Window<'_>>> {
    slice_windows_strided(series, lookback, 1)
}

pub fn slice_windows_strided(
    series: &BuildingSeries,
    lookback: usize,
    stride: usize,
) -> Result<Vec<Window<'_>>> {
    ensure!(stride >= 1, "window stride must be positive");
    ensure!(
        series.len() > lookback,
        "series of {} samples is too short for lookback {lookback}",
        series.len()
    );
    (0..series.len() - lookback)
        .step_by(stride)
        .map(|k| Window::new(series, k, lookback))
        .collect()
}
