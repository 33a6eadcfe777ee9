//! Command-line driver: `generate`, `pretrain`, `estimate`, `evaluate` and `sweep`.
//!
//! Every run starts from a JSON [`RunConfig`] (all fields optional); command-line flags
//! override the corresponding fields. JSON artifacts carry the config hash and master
//! seed inline; each CSV artifact gets a `<file>.meta.json` sidecar with the same two
//! values.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use log::info;
use serde::{Deserialize, Serialize};

use crate::datagen::{generate_dataset, generate_fleet, target_suite, BuildingSpec, FleetRanges, GenerationOptions};
use crate::error::{ensure, Error, Result};
use crate::estimator::{
    finetune, fleet_network, pretrain, select_with_histograms, train_from_scratch, EstimatorConfig, EstimatorNet,
    TrainingOutcome,
};
use crate::eval::{
    aggregate, config_hash, evaluate_params, split, sweep, CellResult, EvalReport, Method, ReportMeta, SplitSpec,
    SweepConfig, HORIZON, TEST_DAYS, TRAIN_LENGTHS,
};
use crate::ga::{ga_estimate, GaConfig};
use crate::rc::{ThermalParams, Topology};
use crate::seed::{self, tag};
use crate::series::{BuildingSeries, SAMPLES_PER_DAY};

/// Which buildings `generate` writes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Dataset {
    /// `fleet_size` buildings sampled from `fleet_ranges`.
    Fleet,
    /// The fixed eight-building target suite.
    Suite,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    /// Worker threads; `None` uses the available parallelism. Not part of the hash.
    pub workers: Option<usize>,
    pub topology: Topology,
    pub method: Method,
    /// Leading days of the target used for training; `None` picks the longest standard
    /// length that fits.
    pub train_days: Option<usize>,
    /// Euler substeps, applied to estimator, fine-tuning and GA alike.
    pub substeps: usize,
    pub dataset: Dataset,
    pub fleet_size: usize,
    pub days: usize,
    pub generation: GenerationOptions,
    pub fleet_ranges: FleetRanges,
    /// Directory of building CSVs read by `pretrain` and `sweep`.
    pub data_dir: PathBuf,
    /// Building CSV for `estimate` and `evaluate`.
    pub target: Option<PathBuf>,
    /// Pretrained weights for `estimate` with method `pretrained`.
    pub weights: Option<PathBuf>,
    /// Pretrained weights for `sweep`, at most one per topology.
    pub pretrained: Vec<PathBuf>,
    /// Parameter-estimate JSON read by `evaluate`.
    pub estimate: Option<PathBuf>,
    pub out: PathBuf,
    pub estimator: EstimatorConfig,
    pub finetune: EstimatorConfig,
    pub ga: GaConfig,
    pub methods: Vec<Method>,
    pub topologies: Vec<Topology>,
    pub train_lengths: Vec<usize>,
}

impl Default for RunConfig {
    fn default() -> Self {
        let sweep = SweepConfig::default();
        RunConfig {
            seed: 0,
            workers: None,
            topology: Topology::TwoRTwoC,
            method: Method::Scratch,
            train_days: None,
            substeps: 4,
            dataset: Dataset::Fleet,
            fleet_size: 20,
            days: TRAIN_LENGTHS[3] + TEST_DAYS,
            generation: GenerationOptions::default(),
            fleet_ranges: FleetRanges::default(),
            data_dir: PathBuf::from("data"),
            target: None,
            weights: None,
            pretrained: vec![],
            estimate: None,
            out: PathBuf::from("out"),
            estimator: sweep.estimator,
            finetune: sweep.finetune,
            ga: sweep.ga,
            methods: sweep.methods,
            topologies: sweep.topologies,
            train_lengths: sweep.train_lengths,
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: e.line() as u64,
            message: e.to_string(),
        })
    }

    /// Copies `substeps` into the nested configs and validates them.
    pub fn normalized(mut self) -> Result<Self> {
        self.estimator.substeps = self.substeps;
        self.finetune.substeps = self.substeps;
        self.ga.substeps = self.substeps;
        ensure!(self.fleet_size >= 1, "fleet size must be at least 1");
        ensure!(self.days >= 1, "days must be positive");
        ensure!(self.workers != Some(0), "workers must be positive");
        self.estimator.validate()?;
        self.finetune.validate()?;
        self.ga.validate()?;
        Ok(self)
    }

    /// Hash of the effective configuration, independent of the worker count.
    pub fn hash(&self) -> Result<String> {
        config_hash(&RunConfig {
            workers: None,
            ..self.clone()
        })
    }

    pub fn sweep_config(&self) -> SweepConfig {
        SweepConfig {
            methods: self.methods.clone(),
            topologies: self.topologies.clone(),
            train_lengths: self.train_lengths.clone(),
            estimator: self.estimator.clone(),
            finetune: self.finetune.clone(),
            ga: self.ga.clone(),
            seed: self.seed,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "rcident", version, about = "RC thermal-model parameter estimation")]
pub struct Cli {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    /// JSON run configuration
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Master seed
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Worker threads
    #[arg(long, global = true)]
    pub workers: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write synthetic building CSVs with sidecars and a manifest
    Generate {
        /// Number of sampled buildings
        #[arg(long)]
        fleet_size: Option<usize>,
        /// Days of data per building
        #[arg(long)]
        days: Option<usize>,
        /// Write the eight-building target suite instead of a sampled fleet
        #[arg(long)]
        suite: bool,
    },
    /// Pretrain an estimator on every building CSV in a directory
    Pretrain {
        /// Directory of building CSVs
        #[arg(long)]
        data: Option<PathBuf>,
        /// 1R1C or 2R2C
        #[arg(long)]
        topology: Option<Topology>,
    },
    /// Estimate parameters of one building
    Estimate {
        /// Building CSV
        #[arg(long)]
        target: Option<PathBuf>,
        /// scratch, pretrained or ga
        #[arg(long)]
        method: Option<Method>,
        /// 1R1C or 2R2C
        #[arg(long)]
        topology: Option<Topology>,
        /// Pretrained network (.bin), for the pretrained method
        #[arg(long)]
        weights: Option<PathBuf>,
        /// Leading whole days used for training
        #[arg(long)]
        train_days: Option<usize>,
    },
    /// Score a parameter estimate on the test block following its training data
    Evaluate {
        /// Parameter JSON written by estimate
        #[arg(long)]
        estimate: Option<PathBuf>,
        /// Building CSV the estimate was trained on
        #[arg(long)]
        target: Option<PathBuf>,
    },
    /// Run the method x topology x training-length grid over a directory of buildings
    Sweep {
        /// Directory of building CSVs
        #[arg(long)]
        data: Option<PathBuf>,
        /// Comma-separated pretrained networks, one per topology
        #[arg(long, value_delimiter = ',')]
        pretrained: Option<Vec<PathBuf>>,
    },
}

impl Cli {
    /// Effective configuration: file (or defaults), then flags.
    pub fn config(&self) -> Result<RunConfig> {
        let mut c = match &self.common.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        if let Some(s) = self.common.seed {
            c.seed = s;
        }
        if let Some(o) = &self.common.out {
            c.out = o.clone();
        }
        if self.common.workers.is_some() {
            c.workers = self.common.workers;
        }
        match &self.command {
            Command::Generate { fleet_size, days, suite } => {
                set(&mut c.fleet_size, fleet_size);
                set(&mut c.days, days);
                if *suite {
                    c.dataset = Dataset::Suite;
                }
            }
            Command::Pretrain { data, topology } => {
                set(&mut c.data_dir, data);
                set(&mut c.topology, topology);
            }
            Command::Estimate {
                target,
                method,
                topology,
                weights,
                train_days,
            } => {
                set_opt(&mut c.target, target);
                set(&mut c.method, method);
                set(&mut c.topology, topology);
                set_opt(&mut c.weights, weights);
                set_opt(&mut c.train_days, train_days);
            }
            Command::Evaluate { estimate, target } => {
                set_opt(&mut c.estimate, estimate);
                set_opt(&mut c.target, target);
            }
            Command::Sweep { data, pretrained } => {
                set(&mut c.data_dir, data);
                set(&mut c.pretrained, pretrained);
            }
        }
        c.normalized()
    }
}

fn set<T: Clone>(field: &mut T, flag: &Option<T>) {
    if let Some(v) = flag {
        *field = v.clone();
    }
}

fn set_opt<T: Clone>(field: &mut Option<T>, flag: &Option<T>) {
    if flag.is_some() {
        *field = flag.clone();
    }
}

/// Parses `args` (program name first), runs the command and returns the exit code.
pub fn main_from<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match run(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

pub fn run(cli: &Cli) -> Result<()> {
    let config = cli.config()?;
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = config.workers {
        pool = pool.num_threads(n);
    }
    let pool = pool
        .build()
        .map_err(|e| Error::invalid(format!("worker pool: {e}")))?;
    pool.install(|| match &cli.command {
        Command::Generate { .. } => cmd_generate(&config),
        Command::Pretrain { .. } => cmd_pretrain(&config),
        Command::Estimate { .. } => cmd_estimate(&config),
        Command::Evaluate { .. } => cmd_evaluate(&config),
        Command::Sweep { .. } => cmd_sweep(&config),
    })
}

/// Hash and seed attached to every artifact of a run.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub config_hash: String,
    pub seed: u64,
}

impl Provenance {
    pub fn of(config: &RunConfig) -> Result<Self> {
        Ok(Provenance {
            config_hash: config.hash()?,
            seed: config.seed,
        })
    }
}

/// Path of the provenance sidecar of a CSV artifact.
pub fn meta_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".meta.json");
    PathBuf::from(s)
}

fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    write_file(path, serde_json::to_string_pretty(value)? + "\n")
}

#[derive(Serialize)]
struct CsvMeta<'a> {
    file: String,
    #[serde(flatten)]
    provenance: &'a Provenance,
}

fn write_csv_meta(path: &Path, prov: &Provenance) -> Result<()> {
    let file = path
        .file_name()
        .map(|f| f.to_string_lossy().into_owned())
        .unwrap_or_default();
    write_json(
        &meta_path(path),
        &CsvMeta {
            file,
            provenance: prov,
        },
    )
}

fn create_out(config: &RunConfig) -> Result<()> {
    fs::create_dir_all(&config.out).map_err(|e| Error::io(&config.out, e))
}

fn require(path: &Option<PathBuf>, what: &str) -> Result<PathBuf> {
    let p = path
        .clone()
        .ok_or_else(|| Error::invalid(format!("no {what} given")))?;
    ensure!(p.exists(), "{what} {} does not exist", p.display());
    Ok(p)
}

/// JSON written next to each generated building CSV.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BuildingSidecar {
    pub name: String,
    pub spec: BuildingSpec,
    pub truth: Option<ThermalParams>,
    /// Seed the building was generated with.
    pub building_seed: u64,
    pub days: usize,
    #[serde(flatten)]
    pub provenance: Provenance,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub name: String,
    pub csv: String,
    pub sidecar: String,
    pub building_seed: u64,
    pub truth: Option<ThermalParams>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    /// Wall-clock creation time; the only field that differs between identical runs.
    pub created_at: String,
    pub dataset: Dataset,
    pub days: usize,
    pub buildings: Vec<ManifestEntry>,
    #[serde(flatten)]
    pub provenance: Provenance,
}

pub fn cmd_generate(config: &RunConfig) -> Result<()> {
    create_out(config)?;
    let prov = Provenance::of(config)?;
    let built: Vec<(BuildingSpec, BuildingSeries, u64)> = match config.dataset {
        Dataset::Fleet => generate_fleet(
            config.fleet_size,
            config.days,
            config.seed,
            &config.fleet_ranges,
            &config.generation,
        )?
        .into_iter()
        .enumerate()
        .map(|(i, (spec, s))| (spec, s, seed::derive(config.seed, &[tag::WEATHER, i as u64])))
        .collect(),
        Dataset::Suite => target_suite()
            .into_iter()
            .enumerate()
            .map(|(i, spec)| {
                let bs = seed::derive(config.seed, &[tag::WEATHER, i as u64]);
                let s = generate_dataset(&spec, config.days, bs, &config.generation)?;
                Ok((spec, s, bs))
            })
            .collect::<Result<_>>()?,
    };
    let mut entries = vec![];
    for (spec, series, building_seed) in built {
        let csv = format!("{}.csv", spec.name);
        let sidecar = format!("{}.json", spec.name);
        series.write_csv(&config.out.join(&csv))?;
        write_json(
            &config.out.join(&sidecar),
            &BuildingSidecar {
                name: spec.name.clone(),
                spec: spec.clone(),
                truth: series.truth,
                building_seed,
                days: config.days,
                provenance: prov.clone(),
            },
        )?;
        entries.push(ManifestEntry {
            name: spec.name,
            csv,
            sidecar,
            building_seed,
            truth: series.truth,
        });
    }
    info!("wrote {} buildings to {}", entries.len(), config.out.display());
    write_json(
        &config.out.join("manifest.json"),
        &Manifest {
            created_at: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
            dataset: config.dataset,
            days: config.days,
            buildings: entries,
            provenance: prov,
        },
    )
}

/// Reads a building CSV and, when a generation sidecar sits next to it, its truth.
pub fn load_building(path: &Path) -> Result<(String, BuildingSeries)> {
    let mut series = BuildingSeries::read_csv(path)?;
    let sidecar = path.with_extension("json");
    if sidecar.exists() {
        let text = fs::read_to_string(&sidecar).map_err(|e| Error::io(&sidecar, e))?;
        let side: BuildingSidecar = serde_json::from_str(&text).map_err(|e| Error::Parse {
            path: sidecar.clone(),
            line: e.line() as u64,
            message: e.to_string(),
        })?;
        series.truth = side.truth;
    }
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    Ok((name, series))
}

/// All `*.csv` building files of a directory in file-name order.
pub fn load_buildings(dir: &Path) -> Result<Vec<(String, BuildingSeries)>> {
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "csv"))
        .collect();
    paths.sort();
    ensure!(!paths.is_empty(), "no building CSVs in {}", dir.display());
    paths.iter().map(|p| load_building(p)).collect()
}

pub fn cmd_pretrain(config: &RunConfig) -> Result<()> {
    ensure!(config.data_dir.is_dir(), "data directory {} does not exist", config.data_dir.display());
    let fleet: Vec<BuildingSeries> = load_buildings(&config.data_dir)?.into_iter().map(|b| b.1).collect();
    create_out(config)?;
    let prov = Provenance::of(config)?;
    let mut net = fleet_network(&fleet, config.topology, &config.estimator, config.seed)?;
    let curve = pretrain(&mut net, &fleet, &config.estimator, config.seed)?;
    let weights = config.out.join(format!("pretrained_{}.bin", config.topology));
    net.save(&weights)?;
    write_json(&meta_path(&weights), &prov)?;
    let loss_path = config.out.join("pretrain_loss.csv");
    let mut text = String::from("epoch,loss\n");
    for (e, l) in curve.iter().enumerate() {
        text.push_str(&format!("{e},{l}\n"));
    }
    write_file(&loss_path, text)?;
    write_csv_meta(&loss_path, &prov)?;
    info!("pretrained on {} buildings, final loss {:?}", fleet.len(), curve.last());
    Ok(())
}

/// Parameter estimate as written by `estimate` and read by `evaluate`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimateFile {
    pub building: String,
    pub method: Method,
    pub topology: Topology,
    pub train_days: usize,
    pub param_names: Vec<String>,
    pub theta: Vec<f64>,
    /// Independent optimization runs pooled into the estimate.
    pub seeds: usize,
    #[serde(flatten)]
    pub provenance: Provenance,
}

impl EstimateFile {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: e.line() as u64,
            message: e.to_string(),
        })
    }

    pub fn params(&self) -> Result<ThermalParams> {
        ThermalParams::from_slice(self.topology, &self.theta)
    }
}

/// Training length for a series of `days` whole days: the longest standard length that
/// fits, else every whole day.
pub fn default_train_days(days: usize) -> usize {
    TRAIN_LENGTHS
        .iter()
        .rev()
        .copied()
        .find(|d| *d <= days)
        .unwrap_or(days)
}

pub fn cmd_estimate(config: &RunConfig) -> Result<()> {
    let target = require(&config.target, "target CSV")?;
    let weights = match config.method {
        Method::Pretrained => Some(require(&config.weights, "weights file")?),
        _ => None,
    };
    let (name, series) = load_building(&target)?;
    let whole_days = series.len() / SAMPLES_PER_DAY;
    let train_days = config.train_days.unwrap_or_else(|| default_train_days(whole_days));
    ensure!(
        train_days >= 1 && train_days <= whole_days,
        "{} holds {whole_days} whole days, cannot train on {train_days}",
        target.display()
    );
    let train = series.slice(0, train_days * SAMPLES_PER_DAY)?;
    create_out(config)?;
    let prov = Provenance::of(config)?;
    let topology = config.topology;

    let neural = |out: TrainingOutcome, bins: usize| -> Result<ThermalParams> {
        let trace_path = config.out.join(format!("{name}_trace.csv"));
        out.trace.write_csv(&trace_path)?;
        write_csv_meta(&trace_path, &prov)?;
        let (theta, hists) = select_with_histograms(&out.trace, bins)?;
        let hist_path = config.out.join(format!("{name}_histograms.csv"));
        crate::estimator::write_histograms_csv(&hist_path, topology, &hists)?;
        write_csv_meta(&hist_path, &prov)?;
        Ok(theta)
    };
    let (theta, seeds) = match config.method {
        Method::Scratch => {
            let out = train_from_scratch(&train, topology, &config.estimator, config.seed)?;
            (neural(out, config.estimator.bins)?, config.estimator.seeds)
        }
        Method::Pretrained => {
            let path = weights.expect("checked above");
            let net = EstimatorNet::load(&path)?;
            ensure!(
                net.topology() == topology,
                "{} holds a {} network, requested {topology}",
                path.display(),
                net.topology()
            );
            let out = finetune(&net, &train, topology, &config.finetune, config.seed)?;
            (neural(out, config.finetune.bins)?, 1)
        }
        Method::Ga => {
            let out = ga_estimate(&train, topology, &config.ga, config.seed)?;
            let trace_path = config.out.join(format!("{name}_ga_trace.csv"));
            let mut text = String::from("seed,generation,best_loss\n");
            for (s, run) in out.runs.iter().enumerate() {
                for (g, l) in run.best_per_generation.iter().enumerate() {
                    text.push_str(&format!("{s},{g},{l}\n"));
                }
            }
            write_file(&trace_path, text)?;
            write_csv_meta(&trace_path, &prov)?;
            (ThermalParams::from_slice(topology, &out.theta)?, config.ga.seeds)
        }
    };
    let file = EstimateFile {
        building: name.clone(),
        method: config.method,
        topology,
        train_days,
        param_names: topology.param_names().iter().map(|s| s.to_string()).collect(),
        theta: theta.to_vec(),
        seeds,
        provenance: prov,
    };
    let path = config.out.join(format!("{name}_theta.json"));
    write_json(&path, &file)?;
    info!("{name}: {:?} -> {}", file.theta, path.display());
    Ok(())
}

fn write_report(config: &RunConfig, report: &EvalReport, prov: &Provenance) -> Result<()> {
    report.write_json(&config.out.join("report.json"))?;
    for (file, text) in [
        ("report.csv", report.cells_csv()?),
        ("aggregates.csv", report.aggregates_csv()?),
    ] {
        let path = config.out.join(file);
        write_file(&path, text)?;
        write_csv_meta(&path, prov)?;
    }
    Ok(())
}

pub fn cmd_evaluate(config: &RunConfig) -> Result<()> {
    let est_path = require(&config.estimate, "estimate JSON")?;
    let target = require(&config.target, "target CSV")?;
    let est = EstimateFile::load(&est_path)?;
    let (_, series) = load_building(&target)?;
    let sp = split(&series, &SplitSpec::new(est.train_days))?;
    let m = evaluate_params(&est.params()?, &sp.test, &config.estimator.integrator()?)?;
    create_out(config)?;
    let prov = Provenance::of(config)?;
    let cells = vec![CellResult {
        building: est.building.clone(),
        method: est.method,
        topology: est.topology,
        train_days: est.train_days,
        theta: est.theta.clone(),
        rmse: m.rmse,
        nrmse: m.nrmse,
        mae: m.mae,
    }];
    let report = EvalReport {
        meta: ReportMeta {
            seed: config.seed,
            config_hash: prov.config_hash.clone(),
            horizon: HORIZON,
            test_days: TEST_DAYS,
            estimator_seeds: est.seeds,
            ga_seeds: config.ga.seeds,
            pooling: "squared and absolute errors pooled over all origins and horizon steps".into(),
        },
        aggregates: aggregate(&cells),
        cells,
        improvements: vec![],
        failed: vec![],
    };
    write_report(config, &report, &prov)?;
    info!("{}: rmse {:.3} nrmse {:.3} mae {:.3}", est.building, m.rmse, m.nrmse, m.mae);
    Ok(())
}

pub fn cmd_sweep(config: &RunConfig) -> Result<()> {
    ensure!(config.data_dir.is_dir(), "data directory {} does not exist", config.data_dir.display());
    for p in &config.pretrained {
        ensure!(p.exists(), "pretrained weights {} do not exist", p.display());
    }
    let buildings = load_buildings(&config.data_dir)?;
    let nets = config
        .pretrained
        .iter()
        .map(|p| EstimatorNet::load(p))
        .collect::<Result<Vec<_>>>()?;
    create_out(config)?;
    let prov = Provenance::of(config)?;
    let mut report = sweep(&buildings, &config.sweep_config(), &nets)?;
    report.meta.config_hash = prov.config_hash.clone();
    write_report(config, &report, &prov)?;
    if report.failed.is_empty() {
        Ok(())
    } else {
        for f in &report.failed {
            eprintln!(
                "failed cell: {} {} {} {}d: {}",
                f.building, f.method, f.topology, f.train_days, f.error
            );
        }
        Err(Error::invalid(format!("{} sweep cells failed", report.failed.len())))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(args: &[&str]) -> Cli {
        Cli::try_parse_from(std::iter::once("rcident").chain(args.iter().copied())).unwrap()
    }

    #[test]
    fn flags_override_defaults() {
        let c = parse(&["estimate", "--seed", "9", "--method", "ga", "--topology", "1R1C", "--workers", "2"])
            .config()
            .unwrap();
        assert_eq!((c.seed, c.method, c.topology, c.workers), (9, Method::Ga, Topology::OneROneC, Some(2)));
        let d = parse(&["--seed", "9", "estimate"]).config().unwrap();
        assert_eq!(d.seed, 9);
    }

    #[test]
    fn hash_ignores_workers_only() {
        let a = RunConfig::default();
        let b = RunConfig {
            workers: Some(3),
            ..a.clone()
        };
        assert_eq!(a.hash().unwrap(), b.hash().unwrap());
        let c = RunConfig {
            substeps: 8,
            ..a.clone()
        };
        assert_ne!(a.hash().unwrap(), c.hash().unwrap());
    }

    #[test]
    fn config_file_roundtrip_and_unknown_fields() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.json");
        let c = RunConfig {
            fleet_size: 3,
            ..RunConfig::default()
        };
        fs::write(&p, serde_json::to_string(&c).unwrap()).unwrap();
        assert_eq!(RunConfig::load(&p).unwrap(), c);
        fs::write(&p, "{\"seed\": 1,\n \"fleet_sise\": 2}").unwrap();
        assert!(matches!(RunConfig::load(&p), Err(Error::Parse { line: 2, .. })));
        fs::write(&p, "{\"seed\": 4}").unwrap();
        assert_eq!(RunConfig::load(&p).unwrap().fleet_size, 20);
    }

    #[test]
    fn default_lengths() {
        assert_eq!(default_train_days(13), 12);
        assert_eq!(default_train_days(60), 48);
        assert_eq!(default_train_days(100), 72);
        assert_eq!(default_train_days(5), 5);
    }
}
