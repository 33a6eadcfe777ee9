//! Train/test splitting, rolling 24-hour forecasts, error metrics and the sweep harness.

mod sweep;
pub use sweep::{
    aggregate, config_hash, run_cell, sweep, CellResult, EvalReport, FailedCell, Improvement, Method,
    MethodAggregate, ReportMeta, SweepConfig,
};

use serde::{Deserialize, Serialize};

use crate::error::{ensure, Result};
use crate::rc::{Integrator, ThermalParams};
use crate::series::{BuildingSeries, SAMPLES_PER_DAY};

/// Forecast horizon, samples (24 h).
pub const HORIZON: usize = 96;
pub const TEST_DAYS: usize = 12;
pub const TRAIN_LENGTHS: [usize; 4] = [12, 24, 48, 72];

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train_days: usize,
    pub test_days: usize,
    /// Chronological tail of the training block kept as validation.
    pub validation_fraction: f64,
}

impl SplitSpec {
    pub fn new(train_days: usize) -> Self {
        SplitSpec {
            train_days,
            test_days: TEST_DAYS,
            validation_fraction: 0.25,
        }
    }
}

/// The three blocks of a split. `validation` is the tail of `train`, not a separate block.
#[derive(Clone, Debug, PartialEq)]
pub struct Split {
    pub train: BuildingSeries,
    pub validation: BuildingSeries,
    pub test: BuildingSeries,
}

/// Splits the leading `train_days + test_days` of `series`; the rest is ignored.
pub fn split(series: &BuildingSeries, spec: &SplitSpec) -> Result<Split> {
    ensure!(spec.train_days >= 1 && spec.test_days >= 1, "split needs non-empty blocks");
    ensure!(
        (0.0..1.0).contains(&spec.validation_fraction),
        "validation fraction must lie in [0, 1)"
    );
    let n_train = spec.train_days * SAMPLES_PER_DAY;
    let n_test = spec.test_days * SAMPLES_PER_DAY;
    ensure!(
        series.len() >= n_train + n_test,
        "series has {:.2} days, split needs {} + {}",
        series.days(),
        spec.train_days,
        spec.test_days
    );
    let n_val = ((n_train as f64 * spec.validation_fraction).round() as usize).max(1);
    Ok(Split {
        train: series.slice(0, n_train)?,
        validation: series.slice(n_train - n_val, n_val)?,
        test: series.slice(n_train, n_test)?,
    })
}

/// Forecasts from every origin of a series. Row `i` starts at `origins[i]` and holds the
/// `horizon` predicted values after the origin.
#[derive(Clone, Debug, PartialEq)]
pub struct Forecast {
    pub horizon: usize,
    pub origins: Vec<usize>,
    pub predictions: Vec<Vec<f64>>,
}

impl Forecast {
    /// Measured values aligned with `predictions`.
    pub fn targets(&self, series: &BuildingSeries) -> Vec<Vec<f64>> {
        self.origins
            .iter()
            .map(|&t| series.t_in[t + 1..t + 1 + self.horizon].to_vec())
            .collect()
    }
}

/// Dense rolling forecast: one trajectory from each origin `t` with `t + horizon < len`,
/// started from the measured indoor temperature (and a divider-initialized envelope).
pub fn rolling_forecast(
    params: &ThermalParams,
    test: &BuildingSeries,
    horizon: usize,
    integrator: &Integrator,
) -> Result<Forecast> {
    ensure!(horizon >= 1, "horizon must be at least 1");
    ensure!(
        test.len() > horizon,
        "test series of {} samples is too short for a {horizon}-step horizon",
        test.len()
    );
    params.validate()?;
    let forcings = test.forcings();
    let theta = params.to_vec();
    let origins: Vec<usize> = (0..test.len() - horizon).collect();
    let predictions = origins
        .iter()
        .map(|&t| {
            let f = forcings.slice(t, horizon);
            let mut traj = integrator.simulate_from_measured(
                params.topology(),
                &theta,
                test.t_in[t],
                &f,
                horizon,
            )?;
            traj.remove(0);
            Ok(traj)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Forecast {
        horizon,
        origins,
        predictions,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub rmse: f64,
    pub nrmse: f64,
    pub mae: f64,
}

/// Pooled RMSE and MAE over every origin and step; nRMSE divides RMSE by `range`.
pub fn metrics(predictions: &[Vec<f64>], truth: &[Vec<f64>], range: f64) -> Result<Metrics> {
    ensure!(
        predictions.len() == truth.len(),
        "{} prediction rows vs {} truth rows",
        predictions.len(),
        truth.len()
    );
    ensure!(range > 0.0, "normalizing range must be positive, got {range}");
    let (mut se, mut ae, mut n) = (0.0, 0.0, 0usize);
    for (p, y) in predictions.iter().zip(truth) {
        ensure!(p.len() == y.len(), "prediction and truth rows differ in length");
        for (a, b) in p.iter().zip(y) {
            let e = a - b;
            se += e * e;
            ae += e.abs();
            n += 1;
        }
    }
    ensure!(n > 0, "no predictions to score");
    let rmse = (se / n as f64).sqrt();
    Ok(Metrics {
        rmse,
        nrmse: rmse / range,
        mae: ae / n as f64,
    })
}

/// max - min of the indoor temperature.
pub fn t_in_range(series: &BuildingSeries) -> f64 {
    let (lo, hi) = series
        .t_in
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), x| (lo.min(*x), hi.max(*x)));
    hi - lo
}

/// Rolling-forecast metrics of `params` on `test`, normalized by the test T_in range.
/// A flat test series (zero range) reports nRMSE as NaN.
pub fn evaluate_params(
    params: &ThermalParams,
    test: &BuildingSeries,
    integrator: &Integrator,
) -> Result<Metrics> {
    let fc = rolling_forecast(params, test, HORIZON, integrator)?;
    let range = t_in_range(test);
    let truth = fc.targets(test);
    if range > 0.0 {
        metrics(&fc.predictions, &truth, range)
    } else {
        let m = metrics(&fc.predictions, &truth, 1.0)?;
        Ok(Metrics {
            nrmse: f64::NAN,
            ..m
        })
    }
}

/// `(rmse_benchmark - rmse_model) / rmse_benchmark`.
pub fn rel_improvement(rmse_benchmark: f64, rmse_model: f64) -> Result<f64> {
    ensure!(
        rmse_benchmark > 0.0,
        "benchmark RMSE must be positive, got {rmse_benchmark}"
    );
    Ok((rmse_benchmark - rmse_model) / rmse_benchmark)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datagen::{generate_dataset, target_suite, GenerationOptions};
    use crate::rc::Topology;
    use proptest::prelude::*;

    fn series(days: usize) -> BuildingSeries {
        let n = days * SAMPLES_PER_DAY;
        let t: Vec<f64> = (0..n).map(|k| 20.0 + (k as f64 * 0.1).sin()).collect();
        BuildingSeries::new(
            crate::series::default_start(),
            t,
            vec![5.0; n],
            vec![0.0; n],
            vec![1.0; n],
        )
        .unwrap()
    }

    #[test]
    fn split_sixty_days() {
        let s = series(60);
        let sp = split(&s, &SplitSpec::new(48)).unwrap();
        assert_eq!(sp.train.len(), 48 * 96);
        assert_eq!(sp.test.len(), 12 * 96);
        assert_eq!(sp.validation.len(), 12 * 96);
        assert_eq!(sp.validation.t_in[..], s.t_in[36 * 96..48 * 96]);
        let mut joined = sp.train.t_in.clone();
        joined.extend(&sp.test.t_in);
        assert_eq!(joined[..], s.t_in[..60 * 96]);
        assert_eq!(sp.test.start, s.timestamp(48 * 96));
        assert!(split(&s, &SplitSpec::new(72)).is_err());
    }

    #[test]
    fn origin_counts() {
        let p = ThermalParams::one_r_one_c(10.0, 5.0, 2.0).unwrap();
        let it = Integrator::default();
        let s = series(2);
        let one = s.slice(0, 97).unwrap();
        assert_eq!(rolling_forecast(&p, &one, 96, &it).unwrap().origins, vec![0]);
        let fc = rolling_forecast(&p, &s, 96, &it).unwrap();
        assert_eq!(fc.origins.len(), s.len() - 96);
        assert!(fc.predictions.iter().all(|r| r.len() == 96));
        assert!(rolling_forecast(&p, &s.slice(0, 96).unwrap(), 96, &it).is_err());
    }

    #[test]
    fn truth_closure_on_one_r_one_c_data() {
        let opts = GenerationOptions {
            truth_topology: Topology::OneROneC,
            ..Default::default()
        };
        let s = generate_dataset(&target_suite()[3], 4, 3, &opts).unwrap();
        let m = evaluate_params(&s.truth.unwrap(), &s, &Integrator::default()).unwrap();
        assert!(m.rmse < 1e-6 && m.mae < 1e-6 && m.nrmse < 1e-6, "{m:?}");
    }

    #[test]
    fn metric_examples() {
        let y = vec![vec![0.0, 4.0, 2.0, 3.0]];
        let m = metrics(&y, &y, 4.0).unwrap();
        assert_eq!((m.rmse, m.nrmse, m.mae), (0.0, 0.0, 0.0));

        let p = vec![vec![0.5, 4.5, 2.5, 3.5]];
        let m = metrics(&p, &y, 4.0).unwrap();
        assert_eq!((m.rmse, m.mae), (0.5, 0.5));

        let p = vec![vec![1.0, 3.0, 3.0, 2.0]];
        let m = metrics(&p, &y, 4.0).unwrap();
        assert_eq!((m.rmse, m.mae, m.nrmse), (1.0, 1.0, 0.25));

        assert!(metrics(&[], &[], 1.0).is_err());
        assert!(metrics(&p, &y, 0.0).is_err());
    }

    #[test]
    fn improvement_values() {
        let cases = [(1.177, 0.895, 0.2396), (1.100, 0.895, 0.1864), (1.153, 0.584, 0.4935)];
        for (b, m, want) in cases {
            assert!((rel_improvement(b, m).unwrap() - want).abs() < 5e-4);
        }
        assert!(rel_improvement(0.0, 1.0).is_err());
    }

    proptest! {
        #[test]
        fn metrics_match_brute_force(
            rows in prop::collection::vec(prop::collection::vec(-5.0f64..5.0, 1..8), 1..6),
            off in -1.0f64..1.0,
        ) {
            let truth: Vec<Vec<f64>> = rows.iter().map(|r| r.iter().map(|x| x + 20.0).collect()).collect();
            let flat_p: Vec<f64> = rows.iter().flatten().map(|x| x + 20.0 + off * x).collect();
            let pred: Vec<Vec<f64>> = {
                let mut it = flat_p.iter();
                rows.iter().map(|r| r.iter().map(|_| *it.next().unwrap()).collect()).collect()
            };
            let m = metrics(&pred, &truth, 2.0).unwrap();
            let errs: Vec<f64> = pred.iter().flatten().zip(truth.iter().flatten()).map(|(a, b)| a - b).collect();
            let ms = errs.iter().map(|e| e * e).sum::<f64>() / errs.len() as f64;
            prop_assert!(m.rmse >= 0.0 && m.mae >= 0.0);
            prop_assert!((m.rmse * m.rmse - ms).abs() <= 1e-9 * ms.max(1.0));
            prop_assert!((m.nrmse - m.rmse / 2.0).abs() < 1e-15);
        }

        #[test]
        fn constant_error_rmse_equals_mae(c in -3.0f64..3.0, n in 1usize..50) {
            let y = vec![(0..n).map(|k| k as f64).collect::<Vec<_>>()];
            let p = vec![y[0].iter().map(|v| v + c).collect::<Vec<_>>()];
            let m = metrics(&p, &y, 1.0).unwrap();
            prop_assert!((m.rmse - m.mae).abs() < 1e-12);
        }
    }
}
