//! Lumped RC thermal networks and their fixed-step integrator.
//!
//! Units are chosen so parameter magnitudes stay moderate: resistances in K/kW,
//! capacities in kWh/K, effective solar aperture in m², solar irradiation in kW/m²
//! and heating power in kW. Capacities are converted to kJ/K (×3600) internally so
//! derivatives come out in K/s.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::diff::Real;
use crate::error::{ensure, Error, Result};

/// Length of one measurement sample in seconds.
pub const SAMPLE_SECONDS: f64 = 900.0;

/// kWh/K to kJ/K.
const KWH_TO_KJ: f64 = 3600.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Topology {
    #[serde(rename = "1R1C")]
    OneROneC,
    #[serde(rename = "2R2C")]
    TwoRTwoC,
}

impl Topology {
    pub const ALL: [Topology; 2] = [Topology::OneROneC, Topology::TwoRTwoC];

    /// Number of estimated parameters.
    pub fn arity(self) -> usize {
        match self {
            Topology::OneROneC => 3,
            Topology::TwoRTwoC => 5,
        }
    }

    pub fn param_names(self) -> &'static [&'static str] {
        match self {
            Topology::OneROneC => &["R_ia", "C_i", "A_eff"],
            Topology::TwoRTwoC => &["R_ie", "R_ea", "C_i", "C_e", "A_eff"],
        }
    }

    /// Kind of each parameter, in vector order.
    pub fn param_kinds(self) -> &'static [ParamKind] {
        use ParamKind::*;
        match self {
            Topology::OneROneC => &[Resistance, Capacity, Aperture],
            Topology::TwoRTwoC => &[Resistance, Resistance, Capacity, Capacity, Aperture],
        }
    }

    pub fn has_envelope(self) -> bool {
        self == Topology::TwoRTwoC
    }
}

impl fmt::Display for Topology {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Topology::OneROneC => "1R1C",
            Topology::TwoRTwoC => "2R2C",
        })
    }
}

impl FromStr for Topology {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "1R1C" => Ok(Topology::OneROneC),
            "2R2C" => Ok(Topology::TwoRTwoC),
            other => Err(Error::invalid(format!("unknown topology {other:?}"))),
        }
    }
}

/// Physical category of a parameter; used for initialization ranges and GA bounds.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ParamKind {
    Resistance,
    Capacity,
    Aperture,
}

/// Per-kind `(lower, upper)` ranges used to draw initial guesses and as GA bounds.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParamRanges {
    /// K/kW
    pub resistance: (f64, f64),
    /// kWh/K
    pub capacity: (f64, f64),
    /// m²
    pub aperture: (f64, f64),
}

impl Default for ParamRanges {
    fn default() -> Self {
        ParamRanges {
            resistance: (0.5, 50.0),
            capacity: (0.5, 50.0),
            aperture: (0.5, 30.0),
        }
    }
}

impl ParamRanges {
    pub fn validate(&self) -> Result<()> {
        for (name, (lo, hi)) in [
            ("resistance", self.resistance),
            ("capacity", self.capacity),
            ("aperture", self.aperture),
        ] {
            ensure!(
                lo > 0.0 && hi > lo && hi.is_finite(),
                "{name} range ({lo}, {hi}) must satisfy 0 < lower < upper"
            );
        }
        Ok(())
    }

    pub fn range(&self, kind: ParamKind) -> (f64, f64) {
        match kind {
            ParamKind::Resistance => self.resistance,
            ParamKind::Capacity => self.capacity,
            ParamKind::Aperture => self.aperture,
        }
    }

    /// Bounds in parameter-vector order.
    pub fn bounds(&self, topology: Topology) -> Vec<(f64, f64)> {
        topology.param_kinds().iter().map(|k| self.range(*k)).collect()
    }

    pub fn midpoints(&self, topology: Topology) -> Vec<f64> {
        self.bounds(topology).iter().map(|(lo, hi)| 0.5 * (lo + hi)).collect()
    }
}

/// Strictly positive parameter set of an RC network.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "topology")]
pub enum ThermalParams {
    #[serde(rename = "1R1C")]
    OneROneC { r_ia: f64, c_i: f64, a_eff: f64 },
    #[serde(rename = "2R2C")]
    TwoRTwoC {
        r_ie: f64,
        r_ea: f64,
        c_i: f64,
        c_e: f64,
        a_eff: f64,
    },
}

impl ThermalParams {
    pub fn one_r_one_c(r_ia: f64, c_i: f64, a_eff: f64) -> Result<Self> {
        Self::from_slice(Topology::OneROneC, &[r_ia, c_i, a_eff])
    }

    pub fn two_r_two_c(r_ie: f64, r_ea: f64, c_i: f64, c_e: f64, a_eff: f64) -> Result<Self> {
        Self::from_slice(Topology::TwoRTwoC, &[r_ie, r_ea, c_i, c_e, a_eff])
    }

    /// Builds parameters from vector form (order as in [`Topology::param_names`]).
    pub fn from_slice(topology: Topology, v: &[f64]) -> Result<Self> {
        ensure!(
            v.len() == topology.arity(),
            "{topology} expects {} parameters, got {}",
            topology.arity(),
            v.len()
        );
        for (name, x) in topology.param_names().iter().zip(v) {
            ensure!(
                x.is_finite() && *x > 0.0,
                "parameter {name} must be finite and positive, got {x}"
            );
        }
        Ok(match topology {
            Topology::OneROneC => ThermalParams::OneROneC {
                r_ia: v[0],
                c_i: v[1],
                a_eff: v[2],
            },
            Topology::TwoRTwoC => ThermalParams::TwoRTwoC {
                r_ie: v[0],
                r_ea: v[1],
                c_i: v[2],
                c_e: v[3],
                a_eff: v[4],
            },
        })
    }

    pub fn topology(&self) -> Topology {
        match self {
            ThermalParams::OneROneC { .. } => Topology::OneROneC,
            ThermalParams::TwoRTwoC { .. } => Topology::TwoRTwoC,
        }
    }

    pub fn to_vec(&self) -> Vec<f64> {
        match *self {
            ThermalParams::OneROneC { r_ia, c_i, a_eff } => vec![r_ia, c_i, a_eff],
            ThermalParams::TwoRTwoC {
                r_ie,
                r_ea,
                c_i,
                c_e,
                a_eff,
            } => vec![r_ie, r_ea, c_i, c_e, a_eff],
        }
    }

    /// Re-checks positivity; useful after deserializing.
    pub fn validate(&self) -> Result<()> {
        Self::from_slice(self.topology(), &self.to_vec()).map(|_| ())
    }

    /// Initial state for a trajectory starting at `t_in0`, using the voltage-divider
    /// rule for the envelope node of a 2R2C network.
    pub fn initial_state(&self, t_in0: f64, t_out0: f64) -> ThermalState {
        match *self {
            ThermalParams::OneROneC { .. } => ThermalState::indoor(t_in0),
            ThermalParams::TwoRTwoC { r_ie, r_ea, .. } => ThermalState {
                t_in: t_in0,
                t_e: Some(envelope_divider(r_ie, r_ea, t_in0, t_out0)),
            },
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThermalState {
    pub t_in: f64,
    /// Envelope temperature; present exactly for 2R2C.
    pub t_e: Option<f64>,
}

impl ThermalState {
    pub fn indoor(t_in: f64) -> Self {
        ThermalState { t_in, t_e: None }
    }

    pub fn with_envelope(t_in: f64, t_e: f64) -> Self {
        ThermalState {
            t_in,
            t_e: Some(t_e),
        }
    }

    fn check(&self, topology: Topology) -> Result<()> {
        ensure!(
            self.t_e.is_some() == topology.has_envelope(),
            "state {} an envelope temperature but parameters are {topology}",
            if self.t_e.is_some() { "has" } else { "lacks" }
        );
        Ok(())
    }
}

/// One sample of the exogenous inputs.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ForcingSample {
    pub t_out: f64,
    pub q_solar: f64,
    pub u_heat: f64,
}

/// Borrowed, equal-length forcing columns at the fixed 15-minute cadence.
#[derive(Clone, Copy, Debug)]
pub struct Forcings<'a> {
    t_out: &'a [f64],
    q_solar: &'a [f64],
    u_heat: &'a [f64],
}

impl<'a> Forcings<'a> {
    pub fn new(t_out: &'a [f64], q_solar: &'a [f64], u_heat: &'a [f64]) -> Result<Self> {
        ensure!(!t_out.is_empty(), "forcings must contain at least one sample");
        ensure!(
            t_out.len() == q_solar.len() && t_out.len() == u_heat.len(),
            "forcing columns differ in length: T_out {}, Q_solar {}, u_heat {}",
            t_out.len(),
            q_solar.len(),
            u_heat.len()
        );
        ensure!(
            q_solar.iter().all(|q| *q >= 0.0),
            "Q_solar must be non-negative"
        );
        ensure!(u_heat.iter().all(|u| *u >= 0.0), "u_heat must be non-negative");
        Ok(Forcings {
            t_out,
            q_solar,
            u_heat,
        })
    }

    pub fn len(&self) -> usize {
        self.t_out.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t_out.is_empty()
    }

    pub fn sample(&self, k: usize) -> ForcingSample {
        ForcingSample {
            t_out: self.t_out[k],
            q_solar: self.q_solar[k],
            u_heat: self.u_heat[k],
        }
    }

    /// Sub-range view; panics if out of bounds.
    pub fn slice(&self, start: usize, len: usize) -> Forcings<'a> {
        let r = start..start + len;
        Forcings {
            t_out: &self.t_out[r.clone()],
            q_solar: &self.q_solar[r.clone()],
            u_heat: &self.u_heat[r],
        }
    }

    pub fn t_out(&self) -> &'a [f64] {
        self.t_out
    }
}

/// Time derivative of the state in K/s.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StateDerivative {
    pub d_in: f64,
    pub d_e: Option<f64>,
}

/// Voltage-divider estimate of the hidden envelope temperature.
pub fn init_envelope_temp(r_ie: f64, r_ea: f64, t_in0: f64, t_out0: f64) -> Result<f64> {
    ensure!(
        r_ie > 0.0 && r_ea > 0.0,
        "resistances must be positive, got R_ie={r_ie}, R_ea={r_ea}"
    );
    Ok(envelope_divider(r_ie, r_ea, t_in0, t_out0))
}

pub(crate) fn envelope_divider<T: Real>(r_ie: T, r_ea: T, t_in0: f64, t_out0: f64) -> T {
    (r_ie * t_out0 + r_ea * t_in0) / (r_ie + r_ea)
}

/// Conductance-style coefficients, all in 1/s or K/s per unit input.
#[derive(Clone, Copy)]
enum Coefficients<T> {
    One {
        g_ia: T,
        g_sol: T,
        g_u: T,
    },
    Two {
        g_ie_i: T,
        g_sol: T,
        g_u: T,
        g_ie_e: T,
        g_ea_e: T,
    },
}

impl<T: Real> Coefficients<T> {
    fn new(topology: Topology, theta: &[T]) -> Self {
        match topology {
            Topology::OneROneC => {
                let (r, c, a) = (theta[0], theta[1], theta[2]);
                let g_u = (c * KWH_TO_KJ).recip();
                Coefficients::One {
                    g_ia: (r * c * KWH_TO_KJ).recip(),
                    g_sol: a * g_u,
                    g_u,
                }
            }
            Topology::TwoRTwoC => {
                let (r_ie, r_ea, c_i, c_e, a) = (theta[0], theta[1], theta[2], theta[3], theta[4]);
                let g_u = (c_i * KWH_TO_KJ).recip();
                Coefficients::Two {
                    g_ie_i: (r_ie * c_i * KWH_TO_KJ).recip(),
                    g_sol: a * g_u,
                    g_u,
                    g_ie_e: (r_ie * c_e * KWH_TO_KJ).recip(),
                    g_ea_e: (r_ea * c_e * KWH_TO_KJ).recip(),
                }
            }
        }
    }

    /// All coefficients multiplied by `h`, turning rates into per-step increments.
    fn scaled(&self, h: f64) -> Self {
        match *self {
            Coefficients::One { g_ia, g_sol, g_u } => Coefficients::One {
                g_ia: g_ia * h,
                g_sol: g_sol * h,
                g_u: g_u * h,
            },
            Coefficients::Two {
                g_ie_i,
                g_sol,
                g_u,
                g_ie_e,
                g_ea_e,
            } => Coefficients::Two {
                g_ie_i: g_ie_i * h,
                g_sol: g_sol * h,
                g_u: g_u * h,
                g_ie_e: g_ie_e * h,
                g_ea_e: g_ea_e * h,
            },
        }
    }

    #[inline]
    fn derivative(&self, t_in: T, t_e: Option<T>, f: ForcingSample) -> (T, Option<T>) {
        match *self {
            Coefficients::One { g_ia, g_sol, g_u } => {
                let d = g_sol * f.q_solar + g_u * f.u_heat - g_ia * (t_in - f.t_out);
                (d, None)
            }
            Coefficients::Two {
                g_ie_i,
                g_sol,
                g_u,
                g_ie_e,
                g_ea_e,
            } => {
                let t_e = t_e.expect("2R2C state carries an envelope temperature");
                let gap = t_in - t_e;
                let d_in = g_sol * f.q_solar + g_u * f.u_heat - g_ie_i * gap;
                let d_e = g_ie_e * gap - g_ea_e * (t_e - f.t_out);
                (d_in, Some(d_e))
            }
        }
    }
}

/// Evaluates the network's right-hand side for one state and input sample.
pub fn derivative(
    params: &ThermalParams,
    state: &ThermalState,
    sample: ForcingSample,
) -> Result<StateDerivative> {
    state.check(params.topology())?;
    let coeffs = Coefficients::new(params.topology(), &params.to_vec());
    let (d_in, d_e) = coeffs.derivative(state.t_in, state.t_e, sample);
    Ok(StateDerivative { d_in, d_e })
}

/// Explicit Euler with a fixed number of substeps per 15-minute sample.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Integrator {
    pub substeps: usize,
}

impl Default for Integrator {
    fn default() -> Self {
        Integrator { substeps: 4 }
    }
}

/// Envelope and indoor trajectories from [`Integrator::simulate_generic`].
pub struct Trajectory<T> {
    pub t_in: Vec<T>,
    pub t_e: Option<Vec<T>>,
}

impl Integrator {
    pub fn new(substeps: usize) -> Result<Self> {
        ensure!(substeps >= 1, "integrator needs at least one substep");
        Ok(Integrator { substeps })
    }

    fn h(&self) -> f64 {
        SAMPLE_SECONDS / self.substeps as f64
    }

    /// Advances `state` by one sample with inputs held constant over the sample.
    pub fn advance(
        &self,
        params: &ThermalParams,
        state: &ThermalState,
        sample: ForcingSample,
    ) -> Result<ThermalState> {
        state.check(params.topology())?;
        let c = Coefficients::new(params.topology(), &params.to_vec()).scaled(self.h());
        let (t_in, t_e) = self.advance_with(&c, state.t_in, state.t_e, sample);
        Ok(ThermalState { t_in, t_e })
    }

    /// `substeps` Euler steps with inputs held over the sample. `c` must already be
    /// multiplied by the step length (see [`Coefficients::scaled`]).
    #[inline]
    fn advance_with<T: Real>(
        &self,
        c: &Coefficients<T>,
        mut t_in: T,
        mut t_e: Option<T>,
        f: ForcingSample,
    ) -> (T, Option<T>) {
        match *c {
            Coefficients::One { g_ia, g_sol, g_u } => {
                let drive = g_sol * f.q_solar + g_u * f.u_heat;
                for _ in 0..self.substeps {
                    t_in = t_in + (drive - g_ia * (t_in - f.t_out));
                }
            }
            Coefficients::Two {
                g_ie_i,
                g_sol,
                g_u,
                g_ie_e,
                g_ea_e,
            } => {
                let drive = g_sol * f.q_solar + g_u * f.u_heat;
                let mut x_e = t_e.expect("2R2C state carries an envelope temperature");
                for _ in 0..self.substeps {
                    let gap = t_in - x_e;
                    t_in = t_in + (drive - g_ie_i * gap);
                    x_e = x_e + (g_ie_e * gap - g_ea_e * (x_e - f.t_out));
                }
                t_e = Some(x_e);
            }
        }
        (t_in, t_e)
    }

    /// Indoor-temperature trajectory of length `horizon + 1` starting at `init.t_in`.
    pub fn simulate(
        &self,
        params: &ThermalParams,
        init: &ThermalState,
        forcings: &Forcings<'_>,
        horizon: usize,
    ) -> Result<Vec<f64>> {
        init.check(params.topology())?;
        let traj = self.simulate_generic(
            params.topology(),
            &params.to_vec(),
            init.t_in,
            init.t_e,
            forcings,
            horizon,
        )?;
        Ok(traj.t_in)
    }

    /// Like [`Integrator::simulate`] but also returns the envelope trajectory.
    pub fn simulate_states(
        &self,
        params: &ThermalParams,
        init: &ThermalState,
        forcings: &Forcings<'_>,
        horizon: usize,
    ) -> Result<Trajectory<f64>> {
        init.check(params.topology())?;
        self.simulate_generic(
            params.topology(),
            &params.to_vec(),
            init.t_in,
            init.t_e,
            forcings,
            horizon,
        )
    }

    /// Simulation over any [`Real`] scalar; on a tape this records a differentiable
    /// graph from `theta` (and the initial state) to every trajectory value.
    pub fn simulate_generic<T: Real>(
        &self,
        topology: Topology,
        theta: &[T],
        t_in0: T,
        t_e0: Option<T>,
        forcings: &Forcings<'_>,
        horizon: usize,
    ) -> Result<Trajectory<T>> {
        ensure!(horizon >= 1, "horizon must be at least one step");
        ensure!(
            forcings.len() >= horizon,
            "forcings cover {} samples, horizon needs {horizon}",
            forcings.len()
        );
        ensure!(
            theta.len() == topology.arity(),
            "{topology} expects {} parameters, got {}",
            topology.arity(),
            theta.len()
        );
        ensure!(
            t_e0.is_some() == topology.has_envelope(),
            "initial envelope temperature must be given exactly for 2R2C"
        );
        let c = Coefficients::new(topology, theta).scaled(self.h());
        let mut t_in = Vec::with_capacity(horizon + 1);
        let mut t_e_traj = t_e0.map(|_| Vec::with_capacity(horizon + 1));
        let (mut x_in, mut x_e) = (t_in0, t_e0);
        t_in.push(x_in);
        if let (Some(v), Some(x)) = (t_e_traj.as_mut(), x_e) {
            v.push(x);
        }
        for k in 0..horizon {
            (x_in, x_e) = self.advance_with(&c, x_in, x_e, forcings.sample(k));
            t_in.push(x_in);
            if let (Some(v), Some(x)) = (t_e_traj.as_mut(), x_e) {
                v.push(x);
            }
        }
        Ok(Trajectory {
            t_in,
            t_e: t_e_traj,
        })
    }

    /// Simulation from a measured indoor temperature, initializing the envelope of a
    /// 2R2C network with the voltage-divider rule. Generic so it can run on a tape.
    pub fn simulate_from_measured<T: Real>(
        &self,
        topology: Topology,
        theta: &[T],
        t_in0: f64,
        forcings: &Forcings<'_>,
        horizon: usize,
    ) -> Result<Vec<T>> {
        ensure!(
            theta.len() == topology.arity(),
            "{topology} expects {} parameters, got {}",
            topology.arity(),
            theta.len()
        );
        let start = theta[0].lift(t_in0);
        let t_e0 = match topology {
            Topology::OneROneC => None,
            Topology::TwoRTwoC => Some(envelope_divider(
                theta[0],
                theta[1],
                t_in0,
                forcings.sample(0).t_out,
            )),
        };
        Ok(self
            .simulate_generic(topology, theta, start, t_e0, forcings, horizon)?
            .t_in)
    }
}

/// [`Integrator::simulate`] with the default four substeps.
pub fn simulate(
    params: &ThermalParams,
    init: &ThermalState,
    forcings: &Forcings<'_>,
    horizon: usize,
) -> Result<Vec<f64>> {
    Integrator::default().simulate(params, init, forcings, horizon)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diff::Tape;
    use proptest::prelude::*;

    fn zeros(n: usize) -> Vec<f64> {
        vec![0.0; n]
    }

    #[test]
    fn equilibrium_derivatives_vanish() {
        let p1 = ThermalParams::one_r_one_c(4.0, 2.0, 3.0).unwrap();
        let s = ForcingSample {
            t_out: 20.0,
            q_solar: 0.0,
            u_heat: 0.0,
        };
        let d = derivative(&p1, &ThermalState::indoor(20.0), s).unwrap();
        assert_eq!(d.d_in, 0.0);

        let p2 = ThermalParams::two_r_two_c(2.0, 5.0, 3.0, 10.0, 2.0).unwrap();
        let s = ForcingSample { t_out: 15.0, ..s };
        let d = derivative(&p2, &ThermalState::with_envelope(15.0, 15.0), s).unwrap();
        assert_eq!((d.d_in, d.d_e), (0.0, Some(0.0)));
    }

    #[test]
    fn one_r_one_c_hand_value() {
        let p = ThermalParams::one_r_one_c(10.0, 1.0, 1.0).unwrap();
        let s = ForcingSample {
            t_out: 30.0,
            q_solar: 0.0,
            u_heat: 0.0,
        };
        let d = derivative(&p, &ThermalState::indoor(20.0), s).unwrap();
        let expected = 10.0 / (10.0 * 3600.0);
        assert!((d.d_in - expected).abs() <= 1e-15 * expected);
    }

    #[test]
    fn solar_and_heating_terms() {
        // A/C * Q + u/C with C in kJ/K
        let p = ThermalParams::one_r_one_c(10.0, 2.0, 5.0).unwrap();
        let s = ForcingSample {
            t_out: 20.0,
            q_solar: 0.4,
            u_heat: 3.0,
        };
        let d = derivative(&p, &ThermalState::indoor(20.0), s).unwrap();
        let expected = (5.0 * 0.4 + 3.0) / 7200.0;
        assert!((d.d_in - expected).abs() < 1e-18);
    }

    #[test]
    fn topology_mismatch_is_rejected() {
        let p = ThermalParams::one_r_one_c(1.0, 1.0, 1.0).unwrap();
        let s = ForcingSample {
            t_out: 0.0,
            q_solar: 0.0,
            u_heat: 0.0,
        };
        assert!(derivative(&p, &ThermalState::with_envelope(1.0, 1.0), s).is_err());
        let p2 = ThermalParams::two_r_two_c(1.0, 1.0, 1.0, 1.0, 1.0).unwrap();
        assert!(derivative(&p2, &ThermalState::indoor(1.0), s).is_err());
    }

    #[test]
    fn params_must_be_positive() {
        assert!(ThermalParams::one_r_one_c(0.0, 1.0, 1.0).is_err());
        assert!(ThermalParams::one_r_one_c(1.0, f64::NAN, 1.0).is_err());
        assert!(ThermalParams::from_slice(Topology::TwoRTwoC, &[1.0; 3]).is_err());
    }

    #[test]
    fn envelope_divider_values() {
        assert_eq!(init_envelope_temp(2.0, 2.0, 20.0, 0.0).unwrap(), 10.0);
        assert_eq!(init_envelope_temp(7.3, 0.4, 18.0, 18.0).unwrap(), 18.0);
        assert_eq!(init_envelope_temp(3.0, 1.0, 20.0, 0.0).unwrap(), 5.0);
        assert!(init_envelope_temp(0.0, 1.0, 20.0, 0.0).is_err());
        assert!(init_envelope_temp(1.0, -1.0, 20.0, 0.0).is_err());
    }

    #[test]
    fn horizon_and_length_checks() {
        let p = ThermalParams::one_r_one_c(1.0, 1.0, 1.0).unwrap();
        let z = zeros(4);
        let f = Forcings::new(&z, &z, &z).unwrap();
        let s = ThermalState::indoor(20.0);
        assert!(simulate(&p, &s, &f, 0).is_err());
        assert!(simulate(&p, &s, &f, 5).is_err());
        assert_eq!(simulate(&p, &s, &f, 4).unwrap().len(), 5);
    }

    #[test]
    fn forcings_validation() {
        let a = [1.0, 2.0];
        assert!(Forcings::new(&a, &[0.0], &[0.0, 0.0]).is_err());
        assert!(Forcings::new(&a, &[0.0, -0.1], &[0.0, 0.0]).is_err());
        assert!(Forcings::new(&a, &[0.0, 0.1], &[-1.0, 0.0]).is_err());
        assert!(Forcings::new(&[], &[], &[]).is_err());
    }

    #[test]
    fn free_cooling_matches_exponential() {
        // error measured on the decaying difference T_in - T_out
        let (r, c) = (20.0, 8.0);
        let p = ThermalParams::one_r_one_c(r, c, 1.0).unwrap();
        let n = 96;
        let t_out = vec![5.0; n];
        let z = zeros(n);
        let f = Forcings::new(&t_out, &z, &z).unwrap();
        let traj = simulate(&p, &ThermalState::indoor(20.0), &f, n).unwrap();
        let tau = r * c * 3600.0;
        for (k, t) in traj.iter().enumerate() {
            let exact_gap = 15.0 * (-(k as f64) * 900.0 / tau).exp();
            assert!(((t - 5.0 - exact_gap) / exact_gap).abs() < 1e-3, "k={k}");
        }
    }

    #[test]
    fn large_envelope_capacity_freezes_envelope() {
        let p = ThermalParams::two_r_two_c(2.0, 3.0, 1.0, 1e6, 2.0).unwrap();
        let n = 96;
        let t_out: Vec<f64> = (0..n).map(|k| -5.0 + (k as f64 * 0.2).sin() * 4.0).collect();
        let q = vec![0.2; n];
        let u = vec![2.0; n];
        let f = Forcings::new(&t_out, &q, &u).unwrap();
        let init = p.initial_state(21.0, t_out[0]);
        let traj = Integrator::default()
            .simulate_states(&p, &init, &f, n)
            .unwrap();
        let te = traj.t_e.unwrap();
        for x in &te {
            assert!((x - te[0]).abs() < 1e-3);
        }
    }

    #[test]
    fn tape_and_float_paths_agree_bitwise() {
        let theta = [2.0, 6.0, 3.0, 12.0, 4.0];
        let n = 50;
        let t_out: Vec<f64> = (0..n).map(|k| (k as f64 * 0.1).cos()).collect();
        let q: Vec<f64> = (0..n).map(|k| 0.01 * k as f64).collect();
        let u = vec![1.5; n];
        let f = Forcings::new(&t_out, &q, &u).unwrap();
        let integ = Integrator::default();
        let plain = integ
            .simulate_from_measured(Topology::TwoRTwoC, &theta, 19.0, &f, n)
            .unwrap();
        let tape = Tape::new();
        let vars: Vec<_> = theta.iter().map(|x| tape.scalar(*x)).collect();
        let taped = integ
            .simulate_from_measured(Topology::TwoRTwoC, &vars, 19.0, &f, n)
            .unwrap();
        for (a, b) in plain.iter().zip(&taped) {
            assert_eq!(a.to_bits(), b.value().to_bits());
        }
    }

    #[test]
    fn euler_is_first_order() {
        let (r, c) = (3.0, 1.5);
        let p = ThermalParams::one_r_one_c(r, c, 1.0).unwrap();
        let n = 96;
        let t_out = vec![0.0; n];
        let z = zeros(n);
        let f = Forcings::new(&t_out, &z, &z).unwrap();
        let tau = r * c * 3600.0;
        let max_err = |substeps| {
            let traj = Integrator::new(substeps)
                .unwrap()
                .simulate(&p, &ThermalState::indoor(20.0), &f, n)
                .unwrap();
            traj.iter()
                .enumerate()
                .map(|(k, t)| (t - 20.0 * (-(k as f64) * 900.0 / tau).exp()).abs())
                .fold(0.0, f64::max)
        };
        let ratio = max_err(4) / max_err(8);
        assert!((1.8..2.2).contains(&ratio), "ratio {ratio}");
    }

    fn arb_params() -> impl Strategy<Value = ThermalParams> {
        prop_oneof![
            (0.5..50.0, 0.5..50.0, 0.5..20.0)
                .prop_map(|(a, b, c)| ThermalParams::one_r_one_c(a, b, c).unwrap()),
            (0.5..50.0, 0.5..50.0, 0.5..50.0, 0.5..50.0, 0.5..20.0).prop_map(
                |(a, b, c, d, e)| ThermalParams::two_r_two_c(a, b, c, d, e).unwrap()
            ),
        ]
    }

    proptest! {
        #[test]
        fn equilibrium_is_exactly_constant(p in arb_params(), t in -10.0..30.0f64, n in 1usize..200) {
            let t_out = vec![t; n];
            let z = zeros(n);
            let f = Forcings::new(&t_out, &z, &z).unwrap();
            let init = p.initial_state(t, t);
            let traj = simulate(&p, &init, &f, n).unwrap();
            prop_assert!(traj.iter().all(|x| *x == t));
        }

        #[test]
        fn response_is_linear_in_heating(
            p in arb_params(),
            alpha in 0.0..5.0f64,
            seed in 0u64..1000,
        ) {
            let n = 96;
            let t_out: Vec<f64> = (0..n).map(|k| ((k as u64 + seed) as f64 * 0.37).sin() * 5.0).collect();
            let q: Vec<f64> = (0..n).map(|k| ((k as f64) * 0.1).sin().max(0.0) * 0.3).collect();
            let u: Vec<f64> = (0..n).map(|k| ((k as u64 * 7 + seed) % 11) as f64 * 0.4).collect();
            let ua: Vec<f64> = u.iter().map(|x| x * alpha).collect();
            let z = zeros(n);
            let init = p.initial_state(20.0, t_out[0]);
            let run = |uu: &[f64]| simulate(&p, &init, &Forcings::new(&t_out, &q, uu).unwrap(), n).unwrap();
            let (base, one, scaled) = (run(&z), run(&u), run(&ua));
            for k in 0..=n {
                let lhs = scaled[k] - base[k];
                let rhs = alpha * (one[k] - base[k]);
                prop_assert!((lhs - rhs).abs() <= 1e-9 * (1.0 + rhs.abs()));
            }
        }

        #[test]
        fn free_cooling_is_monotone(r in 0.5..50.0f64, c in 0.5..50.0f64, gap in 0.1..30.0f64) {
            let p = ThermalParams::one_r_one_c(r, c, 1.0).unwrap();
            let n = 96;
            let t_out = vec![0.0; n];
            let z = zeros(n);
            let f = Forcings::new(&t_out, &z, &z).unwrap();
            let traj = simulate(&p, &ThermalState::indoor(gap), &f, n).unwrap();
            for w in traj.windows(2) {
                prop_assert!(w[1] < w[0]);
                prop_assert!(w[1] > 0.0);
            }
        }
    }
}
