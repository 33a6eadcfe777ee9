use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use log::{info, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{evaluate_params, rel_improvement, split, Metrics, SplitSpec, HORIZON, TEST_DAYS, TRAIN_LENGTHS};
use crate::error::{ensure, Error, Result};
use crate::estimator::{finetune, train_from_scratch, EstimatorConfig, EstimatorNet};
use crate::ga::{ga_estimate, GaConfig};
use crate::rc::{ThermalParams, Topology};
use crate::seed;
use crate::series::BuildingSeries;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Scratch,
    Pretrained,
    Ga,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::Scratch, Method::Pretrained, Method::Ga];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::Scratch => "scratch",
            Method::Pretrained => "pretrained",
            Method::Ga => "ga",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "scratch" => Ok(Method::Scratch),
            "pretrained" | "finetune" => Ok(Method::Pretrained),
            "ga" => Ok(Method::Ga),
            other => Err(Error::invalid(format!("unknown method {other:?}"))),
        }
    }
}

/// SHA-256 over the JSON serialization of `value`, hex encoded. Struct fields serialize
/// in declaration order, so equal configs hash equally.
pub fn config_hash<T: Serialize>(value: &T) -> Result<String> {
    let bytes = serde_json::to_vec(value)?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SweepConfig {
    pub methods: Vec<Method>,
    pub topologies: Vec<Topology>,
    pub train_lengths: Vec<usize>,
    pub estimator: EstimatorConfig,
    /// Fine-tuning budget for the pretrained method.
    pub finetune: EstimatorConfig,
    pub ga: GaConfig,
    pub seed: u64,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            methods: Method::ALL.to_vec(),
            topologies: Topology::ALL.to_vec(),
            train_lengths: TRAIN_LENGTHS.to_vec(),
            estimator: EstimatorConfig::default(),
            finetune: EstimatorConfig {
                seeds: 1,
                ..EstimatorConfig::default()
            },
            ga: GaConfig::default(),
            seed: 0,
        }
    }
}

impl SweepConfig {
    pub fn validate(&self) -> Result<()> {
        ensure!(
            !self.methods.is_empty() && !self.topologies.is_empty() && !self.train_lengths.is_empty(),
            "sweep needs at least one method, topology and training length"
        );
        ensure!(self.train_lengths.iter().all(|d| *d >= 1), "training lengths must be positive");
        self.estimator.validate()?;
        self.finetune.validate()?;
        self.ga.validate()
    }
}

/// One evaluated (building, method, topology, training length) combination.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub building: String,
    pub method: Method,
    pub topology: Topology,
    pub train_days: usize,
    pub theta: Vec<f64>,
    pub rmse: f64,
    pub nrmse: f64,
    pub mae: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FailedCell {
    pub building: String,
    pub method: Method,
    pub topology: Topology,
    pub train_days: usize,
    pub error: String,
}

/// Unweighted means over buildings for one (method, topology, training length).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MethodAggregate {
    pub method: Method,
    pub topology: Topology,
    pub train_days: usize,
    pub buildings: usize,
    pub rmse: f64,
    pub nrmse: f64,
    pub mae: f64,
}

/// Relative RMSE improvement of `model` over `benchmark` on the aggregate means.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Improvement {
    pub benchmark: Method,
    pub model: Method,
    pub topology: Topology,
    pub train_days: usize,
    pub value: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportMeta {
    pub seed: u64,
    pub config_hash: String,
    pub horizon: usize,
    pub test_days: usize,
    pub estimator_seeds: usize,
    pub ga_seeds: usize,
    /// How metric errors were combined across forecast origins.
    pub pooling: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub meta: ReportMeta,
    pub cells: Vec<CellResult>,
    pub aggregates: Vec<MethodAggregate>,
    pub improvements: Vec<Improvement>,
    pub failed: Vec<FailedCell>,
}

/// Estimates parameters with `method` on the first `train_days` days of `series` and
/// scores them on the following test block.
#[allow(clippy::too_many_arguments)]
pub fn run_cell(
    building: &str,
    series: &BuildingSeries,
    method: Method,
    topology: Topology,
    train_days: usize,
    config: &SweepConfig,
    pretrained: Option<&EstimatorNet>,
    cell_seed: u64,
) -> Result<CellResult> {
    let sp = split(series, &SplitSpec::new(train_days))?;
    let theta = match method {
        Method::Scratch => train_from_scratch(&sp.train, topology, &config.estimator, cell_seed)?.theta,
        Method::Pretrained => {
            let net = pretrained.ok_or_else(|| {
                Error::invalid(format!("no pretrained {topology} network for method pretrained"))
            })?;
            finetune(net, &sp.train, topology, &config.finetune, cell_seed)?.theta
        }
        Method::Ga => {
            let out = ga_estimate(&sp.train, topology, &config.ga, cell_seed)?;
            ThermalParams::from_slice(topology, &out.theta)?
        }
    };
    let integrator = config.estimator.integrator()?;
    let Metrics { rmse, nrmse, mae } = evaluate_params(&theta, &sp.test, &integrator)?;
    Ok(CellResult {
        building: building.to_string(),
        method,
        topology,
        train_days,
        theta: theta.to_vec(),
        rmse,
        nrmse,
        mae,
    })
}

/// Full factorial over buildings x methods x topologies x training lengths. Cells run
/// concurrently; each has its own seed stream so results do not depend on scheduling.
/// Failed cells are listed in the report rather than aborting the sweep.
pub fn sweep(
    buildings: &[(String, BuildingSeries)],
    config: &SweepConfig,
    pretrained: &[EstimatorNet],
) -> Result<EvalReport> {
    config.validate()?;
    ensure!(!buildings.is_empty(), "sweep needs at least one building");
    let mut jobs = vec![];
    for (b, _) in buildings.iter().enumerate() {
        for &method in &config.methods {
            for (ti, &topology) in config.topologies.iter().enumerate() {
                for &days in &config.train_lengths {
                    let cell_seed = seed::derive(config.seed, &[b as u64, ti as u64, days as u64]);
                    jobs.push((b, method, topology, days, cell_seed));
                }
            }
        }
    }
    let outcomes: Vec<std::result::Result<CellResult, FailedCell>> = jobs
        .par_iter()
        .map(|&(b, method, topology, days, cell_seed)| {
            let (name, series) = &buildings[b];
            let net = pretrained.iter().find(|n| n.topology() == topology);
            let r = run_cell(name, series, method, topology, days, config, net, cell_seed);
            match &r {
                Ok(c) => info!("{name} {method} {topology} {days}d: rmse {:.3}", c.rmse),
                Err(e) => warn!("{name} {method} {topology} {days}d failed: {e}"),
            }
            r.map_err(|e| FailedCell {
                building: name.clone(),
                method,
                topology,
                train_days: days,
                error: e.to_string(),
            })
        })
        .collect();
    let mut cells = vec![];
    let mut failed = vec![];
    for o in outcomes {
        match o {
            Ok(c) => cells.push(c),
            Err(f) => failed.push(f),
        }
    }
    let aggregates = aggregate(&cells);
    let improvements = improvements(&aggregates);
    Ok(EvalReport {
        meta: ReportMeta {
            seed: config.seed,
            config_hash: config_hash(config)?,
            horizon: HORIZON,
            test_days: TEST_DAYS,
            estimator_seeds: config.estimator.seeds,
            ga_seeds: config.ga.seeds,
            pooling: "squared and absolute errors pooled over all origins and horizon steps".into(),
        },
        cells,
        aggregates,
        improvements,
        failed,
    })
}

/// Means over buildings, grouped by (method, topology, train_days) in sorted order.
pub fn aggregate(cells: &[CellResult]) -> Vec<MethodAggregate> {
    let mut keys: Vec<(Method, Topology, usize)> =
        cells.iter().map(|c| (c.method, c.topology, c.train_days)).collect();
    keys.sort_by_key(|k| (k.0, k.1 as u8, k.2));
    keys.dedup();
    keys.into_iter()
        .map(|(method, topology, train_days)| {
            let group: Vec<&CellResult> = cells
                .iter()
                .filter(|c| c.method == method && c.topology == topology && c.train_days == train_days)
                .collect();
            let n = group.len() as f64;
            let mean = |f: fn(&CellResult) -> f64| group.iter().map(|c| f(c)).sum::<f64>() / n;
            MethodAggregate {
                method,
                topology,
                train_days,
                buildings: group.len(),
                rmse: mean(|c| c.rmse),
                nrmse: mean(|c| c.nrmse),
                mae: mean(|c| c.mae),
            }
        })
        .collect()
}

fn improvements(aggs: &[MethodAggregate]) -> Vec<Improvement> {
    let pairs = [
        (Method::Ga, Method::Pretrained),
        (Method::Scratch, Method::Pretrained),
        (Method::Ga, Method::Scratch),
    ];
    let mut out = vec![];
    for a in aggs.iter().filter(|a| a.method == Method::Ga || a.method == Method::Scratch) {
        for (bench, model) in pairs.iter().filter(|p| p.0 == a.method) {
            let other = aggs
                .iter()
                .find(|m| m.method == *model && m.topology == a.topology && m.train_days == a.train_days);
            if let (Some(m), Ok(value)) = (other, rel_improvement(a.rmse, other.map_or(0.0, |m| m.rmse))) {
                out.push(Improvement {
                    benchmark: *bench,
                    model: *model,
                    topology: a.topology,
                    train_days: m.train_days,
                    value,
                });
            }
        }
    }
    out
}

impl EvalReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn write_json(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_json()? + "\n").map_err(|e| Error::io(path, e))
    }

    /// One row per cell: `building,method,topology,train_days,rmse,nrmse,mae`.
    pub fn cells_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(vec![]);
        w.write_record(["building", "method", "topology", "train_days", "rmse", "nrmse", "mae"])
            .map_err(csv_err)?;
        for c in &self.cells {
            w.write_record([
                c.building.clone(),
                c.method.to_string(),
                c.topology.to_string(),
                c.train_days.to_string(),
                c.rmse.to_string(),
                c.nrmse.to_string(),
                c.mae.to_string(),
            ])
            .map_err(csv_err)?;
        }
        finish(w)
    }

    /// Aggregate table: one row per (method, topology, train_days).
    pub fn aggregates_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(vec![]);
        w.write_record(["method", "topology", "train_days", "buildings", "rmse", "nrmse", "mae"])
            .map_err(csv_err)?;
        for a in &self.aggregates {
            w.write_record([
                a.method.to_string(),
                a.topology.to_string(),
                a.train_days.to_string(),
                a.buildings.to_string(),
                a.rmse.to_string(),
                a.nrmse.to_string(),
                a.mae.to_string(),
            ])
            .map_err(csv_err)?;
        }
        finish(w)
    }

    pub fn mean_rmse(&self, method: Method, topology: Topology, train_days: usize) -> Option<f64> {
        self.aggregates
            .iter()
            .find(|a| a.method == method && a.topology == topology && a.train_days == train_days)
            .map(|a| a.rmse)
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::invalid(format!("csv: {e}"))
}

fn finish(w: csv::Writer<Vec<u8>>) -> Result<String> {
    let bytes = w.into_inner().map_err(|e| Error::invalid(format!("csv: {e}")))?;
    String::from_utf8(bytes).map_err(|e| Error::invalid(format!("csv: {e}")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datagen::{generate_dataset, target_suite, GenerationOptions};

    fn cell(b: &str, m: Method, rmse: f64) -> CellResult {
        CellResult {
            building: b.into(),
            method: m,
            topology: Topology::TwoRTwoC,
            train_days: 12,
            theta: vec![],
            rmse,
            nrmse: rmse / 4.0,
            mae: rmse / 2.0,
        }
    }

    #[test]
    fn aggregate_is_plain_mean() {
        let cells = vec![
            cell("a", Method::Ga, 1.0),
            cell("b", Method::Ga, 2.0),
            cell("c", Method::Ga, 4.5),
            cell("a", Method::Pretrained, 0.5),
        ];
        let aggs = aggregate(&cells);
        assert_eq!(aggs.len(), 2);
        assert_eq!(aggs[1].method, Method::Ga);
        assert_eq!(aggs[1].rmse, (1.0 + 2.0 + 4.5) / 3.0);
        assert_eq!(aggs[1].buildings, 3);
        let imp = improvements(&aggs);
        assert_eq!(imp.len(), 1);
        assert_eq!(imp[0].value, (aggs[1].rmse - 0.5) / aggs[1].rmse);
    }

    #[test]
    fn hash_tracks_every_field() {
        let a = SweepConfig::default();
        let mut b = a.clone();
        assert_eq!(config_hash(&a).unwrap(), config_hash(&b).unwrap());
        b.ga.tournament = 4;
        assert_ne!(config_hash(&a).unwrap(), config_hash(&b).unwrap());
        let mut c = a.clone();
        c.seed = 1;
        assert_ne!(config_hash(&a).unwrap(), config_hash(&c).unwrap());
    }

    #[test]
    fn method_names_roundtrip() {
        for m in Method::ALL {
            assert_eq!(m.to_string().parse::<Method>().unwrap(), m);
        }
        assert!("neural".parse::<Method>().is_err());
    }

    #[test]
    fn single_ga_cell_report() {
        let spec = &target_suite()[7];
        let s = generate_dataset(spec, 24, 1, &GenerationOptions::default()).unwrap();
        let cfg = SweepConfig {
            methods: vec![Method::Ga],
            topologies: vec![Topology::OneROneC],
            train_lengths: vec![12],
            ga: GaConfig {
                seeds: 2,
                generations: 15,
                ..GaConfig::default()
            },
            ..SweepConfig::default()
        };
        let buildings = vec![("T8".to_string(), s)];
        let r = sweep(&buildings, &cfg, &[]).unwrap();
        assert_eq!(r.cells.len(), 1);
        assert!(r.failed.is_empty());
        assert!(r.cells[0].rmse.is_finite() && r.cells[0].rmse >= 0.0);
        assert_eq!(r.cells_csv().unwrap().lines().count(), 2);
        assert_eq!(r, sweep(&buildings, &cfg, &[]).unwrap());

        let missing = SweepConfig {
            methods: vec![Method::Pretrained],
            ..cfg
        };
        let r = sweep(&buildings, &missing, &[]).unwrap();
        assert!(r.cells.is_empty());
        assert_eq!(r.failed.len(), 1);
    }
}
