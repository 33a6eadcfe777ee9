//! Genetic-algorithm baseline: trajectory fitting over the whole training period.
//!
//! Genes are raw physical parameter values inside a box. Each generation keeps the
//! `elitism` best individuals and fills the rest with tournament-selected parents,
//! blend crossover and clipped Gaussian mutation.

use rand::Rng as _;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{ensure, Result};
use crate::rc::{Integrator, ParamRanges, Topology};
use crate::seed::{self, tag, Rng};
use crate::series::BuildingSeries;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GaConfig {
    pub population: usize,
    pub generations: usize,
    pub tournament: usize,
    pub crossover_rate: f64,
    /// Per-gene probability of mutation.
    pub mutation_rate: f64,
    /// Mutation standard deviation as a fraction of the gene's range.
    pub mutation_scale: f64,
    pub elitism: usize,
    /// Per-gene box; `None` uses the default parameter ranges of the topology.
    pub bounds: Option<Vec<(f64, f64)>>,
    pub seeds: usize,
    pub substeps: usize,
}

impl Default for GaConfig {
    fn default() -> Self {
        GaConfig {
            population: 50,
            generations: 100,
            tournament: 3,
            crossover_rate: 0.9,
            mutation_rate: 0.2,
            mutation_scale: 0.1,
            elitism: 1,
            bounds: None,
            seeds: 8,
            substeps: 4,
        }
    }
}

impl GaConfig {
    pub fn validate(&self) -> Result<()> {
        ensure!(self.population >= 2, "GA population must be at least 2");
        ensure!(self.tournament >= 1, "tournament size must be positive");
        ensure!(
            self.elitism < self.population,
            "elitism {} must be smaller than the population {}",
            self.elitism,
            self.population
        );
        for (name, r) in [
            ("crossover rate", self.crossover_rate),
            ("mutation rate", self.mutation_rate),
        ] {
            ensure!((0.0..=1.0).contains(&r), "{name} must lie in [0, 1], got {r}");
        }
        ensure!(
            self.mutation_scale.is_finite() && self.mutation_scale >= 0.0,
            "mutation scale must be non-negative"
        );
        ensure!(self.seeds >= 1, "GA needs at least one seed");
        ensure!(self.substeps >= 1, "integrator needs at least one substep");
        if let Some(b) = &self.bounds {
            validate_bounds(b)?;
        }
        Ok(())
    }

    pub fn bounds_for(&self, topology: Topology) -> Result<Vec<(f64, f64)>> {
        match &self.bounds {
            Some(b) => {
                ensure!(
                    b.len() == topology.arity(),
                    "{topology} needs {} bounds, config has {}",
                    topology.arity(),
                    b.len()
                );
                Ok(b.clone())
            }
            None => Ok(ParamRanges::default().bounds(topology)),
        }
    }
}

fn validate_bounds(bounds: &[(f64, f64)]) -> Result<()> {
    ensure!(!bounds.is_empty(), "GA needs at least one gene");
    for (i, (lo, hi)) in bounds.iter().enumerate() {
        ensure!(
            lo.is_finite() && hi.is_finite() && lo < hi,
            "gene {i}: bounds [{lo}, {hi}] are not a finite interval"
        );
    }
    Ok(())
}

/// Result of one GA run.
#[derive(Clone, Debug, PartialEq)]
pub struct GaRun {
    pub theta: Vec<f64>,
    pub loss: f64,
    /// Best loss after each generation, starting with the initial population.
    pub best_per_generation: Vec<f64>,
    pub evaluations: usize,
}

fn fitness<F: Fn(&[f64]) -> f64 + Sync>(objective: &F, pop: &[Vec<f64>]) -> Vec<f64> {
    pop.par_iter()
        .map(|x| {
            let l = objective(x);
            if l.is_nan() {
                f64::INFINITY
            } else {
                l
            }
        })
        .collect()
}

fn tournament(fit: &[f64], size: usize, rng: &mut Rng) -> usize {
    let mut best = rng.random_range(0..fit.len());
    for _ in 1..size {
        let c = rng.random_range(0..fit.len());
        if fit[c] < fit[best] {
            best = c;
        }
    }
    best
}

/// Minimizes `objective` over the box. Non-finite objective values count as +inf.
pub fn ga_minimize<F>(objective: F, bounds: &[(f64, f64)], config: &GaConfig, seed: u64) -> Result<GaRun>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    config.validate()?;
    validate_bounds(bounds)?;
    let mut rng = seed::rng(seed, &[]);
    let n = config.population;
    let mut pop: Vec<Vec<f64>> = (0..n)
        .map(|_| bounds.iter().map(|&(lo, hi)| rng.random_range(lo..=hi)).collect())
        .collect();
    let mut fit = fitness(&objective, &pop);
    let mut evaluations = n;
    let sigmas: Vec<Normal<f64>> = bounds
        .iter()
        .map(|(lo, hi)| Normal::new(0.0, config.mutation_scale * (hi - lo)).expect("finite sigma"))
        .collect();

    let rank = |fit: &[f64]| {
        let mut order: Vec<usize> = (0..fit.len()).collect();
        order.sort_by(|a, b| fit[*a].total_cmp(&fit[*b]).then(a.cmp(b)));
        order
    };
    let mut order = rank(&fit);
    let mut history = vec![fit[order[0]]];

    for _ in 0..config.generations {
        let mut next: Vec<Vec<f64>> = order[..config.elitism].iter().map(|&i| pop[i].clone()).collect();
        let elite_fit: Vec<f64> = order[..config.elitism].iter().map(|&i| fit[i]).collect();
        while next.len() < n {
            let a = &pop[tournament(&fit, config.tournament, &mut rng)];
            let b = &pop[tournament(&fit, config.tournament, &mut rng)];
            let mut child: Vec<f64> = if rng.random::<f64>() < config.crossover_rate {
                a.iter()
                    .zip(b)
                    .map(|(x, y)| {
                        let w: f64 = rng.random();
                        w * x + (1.0 - w) * y
                    })
                    .collect()
            } else {
                a.clone()
            };
            for ((g, (lo, hi)), dist) in child.iter_mut().zip(bounds).zip(&sigmas) {
                if rng.random::<f64>() < config.mutation_rate {
                    *g += dist.sample(&mut rng);
                }
                *g = g.clamp(*lo, *hi);
            }
            next.push(child);
        }
        let fresh = fitness(&objective, &next[config.elitism..]);
        evaluations += fresh.len();
        pop = next;
        fit = elite_fit.into_iter().chain(fresh).collect();
        order = rank(&fit);
        history.push(fit[order[0]]);
    }
    let best = order[0];
    Ok(GaRun {
        theta: pop[best].clone(),
        loss: fit[best],
        best_per_generation: history,
        evaluations,
    })
}

/// Mean squared error between measured T_in and a single simulation of the whole series
/// from its first sample.
pub fn trajectory_mse(
    series: &BuildingSeries,
    topology: Topology,
    theta: &[f64],
    integrator: &Integrator,
) -> Result<f64> {
    ensure!(series.len() >= 2, "series too short to simulate");
    let n = series.len() - 1;
    let sim: Vec<f64> =
        integrator.simulate_from_measured(topology, theta, series.t_in[0], &series.forcings(), n)?;
    let sse: f64 = sim[1..]
        .iter()
        .zip(&series.t_in[1..])
        .map(|(s, m)| (s - m) * (s - m))
        .sum();
    Ok(sse / n as f64)
}

#[derive(Clone, Debug, PartialEq)]
pub struct GaOutcome {
    pub theta: Vec<f64>,
    pub loss: f64,
    /// Index of the winning seed.
    pub best_seed: usize,
    pub runs: Vec<GaRun>,
}

/// Runs `config.seeds` independent GAs and returns the lowest-loss estimate; ties go to
/// the lower seed index.
pub fn ga_estimate(
    series: &BuildingSeries,
    topology: Topology,
    config: &GaConfig,
    master_seed: u64,
) -> Result<GaOutcome> {
    config.validate()?;
    let bounds = config.bounds_for(topology)?;
    let integrator = Integrator::new(config.substeps)?;
    trajectory_mse(series, topology, &ParamRanges::default().midpoints(topology), &integrator)?;
    let objective = |theta: &[f64]| {
        trajectory_mse(series, topology, theta, &integrator).unwrap_or(f64::INFINITY)
    };
    let runs: Vec<GaRun> = (0..config.seeds)
        .into_par_iter()
        .map(|s| ga_minimize(objective, &bounds, config, seed::derive(master_seed, &[tag::GA, s as u64])))
        .collect::<Result<_>>()?;
    let best_seed = (0..runs.len())
        .min_by(|a, b| runs[*a].loss.total_cmp(&runs[*b].loss).then(a.cmp(b)))
        .expect("at least one seed");
    Ok(GaOutcome {
        theta: runs[best_seed].theta.clone(),
        loss: runs[best_seed].loss,
        best_seed,
        runs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datagen::{generate_dataset, target_suite, GenerationOptions};
    use crate::eval::{evaluate_params, split, SplitSpec};
    use crate::rc::ThermalParams;

    fn sphere(c: &[f64]) -> impl Fn(&[f64]) -> f64 + Sync + '_ {
        move |x: &[f64]| x.iter().zip(c).map(|(a, b)| (a - b) * (a - b)).sum()
    }

    #[test]
    fn sphere_converges_within_one_percent_of_span() {
        let bounds = vec![(-5.0, 5.0); 5];
        let c = [1.0, -2.0, 3.5, 0.0, -4.0];
        let run = ga_minimize(sphere(&c), &bounds, &GaConfig::default(), 3).unwrap();
        for (x, ci) in run.theta.iter().zip(&c) {
            assert!((x - ci).abs() < 0.1, "{:?}", run.theta);
        }
        assert_eq!(run.loss, sphere(&c)(&run.theta));
    }

    #[test]
    fn constant_objective_returns_in_bounds_point() {
        let bounds = vec![(1.0, 2.0), (-3.0, -1.0)];
        let run = ga_minimize(|_: &[f64]| 4.5, &bounds, &GaConfig::default(), 0).unwrap();
        assert_eq!(run.loss, 4.5);
        assert!(run.theta.iter().zip(&bounds).all(|(x, (lo, hi))| lo <= x && x <= hi));
    }

    #[test]
    fn elitism_keeps_best_monotone_and_points_in_bounds() {
        let bounds = vec![(0.0, 1.0); 3];
        let seen = std::sync::Mutex::new(Vec::new());
        let obj = |x: &[f64]| {
            seen.lock().unwrap().push(x.to_vec());
            x.iter().map(|v| (v * 7.0).sin()).sum::<f64>()
        };
        let cfg = GaConfig {
            generations: 30,
            mutation_scale: 0.5,
            ..GaConfig::default()
        };
        let run = ga_minimize(obj, &bounds, &cfg, 11).unwrap();
        assert!(run.best_per_generation.windows(2).all(|w| w[1] <= w[0]));
        let seen = seen.into_inner().unwrap();
        assert_eq!(seen.len(), run.evaluations);
        assert!(seen.iter().flatten().all(|v| (0.0..=1.0).contains(v)));
    }

    #[test]
    fn nan_objective_is_worst() {
        let bounds = vec![(0.0, 1.0)];
        let run = ga_minimize(|x: &[f64]| if x[0] > 0.5 { f64::NAN } else { x[0] }, &bounds, &GaConfig::default(), 1)
            .unwrap();
        assert!(run.theta[0] <= 0.5 && run.loss.is_finite());
    }

    #[test]
    fn same_seed_same_evolution() {
        let bounds = vec![(-1.0, 1.0); 2];
        let cfg = GaConfig {
            generations: 20,
            ..GaConfig::default()
        };
        let c = [0.3, 0.1];
        let a = ga_minimize(sphere(&c), &bounds, &cfg, 9).unwrap();
        let b = ga_minimize(sphere(&c), &bounds, &cfg, 9).unwrap();
        assert_eq!(a, b);
        let d = ga_minimize(sphere(&c), &bounds, &cfg, 10).unwrap();
        assert_ne!(a.best_per_generation, d.best_per_generation);
    }

    #[test]
    fn invalid_configs_rejected() {
        let b = vec![(0.0, 1.0)];
        let o = |_: &[f64]| 0.0;
        for cfg in [
            GaConfig { population: 1, ..GaConfig::default() },
            GaConfig { crossover_rate: 1.5, ..GaConfig::default() },
            GaConfig { elitism: 50, ..GaConfig::default() },
        ] {
            assert!(ga_minimize(o, &b, &cfg, 0).is_err());
        }
        assert!(ga_minimize(o, &[(1.0, 1.0)], &GaConfig::default(), 0).is_err());
    }

    #[test]
    fn best_of_seeds_is_minimum() {
        let spec = &target_suite()[0];
        let opts = GenerationOptions {
            truth_topology: Topology::OneROneC,
            ..GenerationOptions::default()
        };
        let s = generate_dataset(spec, 4, 5, &opts).unwrap();
        let cfg = GaConfig {
            seeds: 3,
            generations: 10,
            population: 12,
            ..GaConfig::default()
        };
        let out = ga_estimate(&s, Topology::OneROneC, &cfg, 1).unwrap();
        let min = out.runs.iter().map(|r| r.loss).fold(f64::INFINITY, f64::min);
        assert_eq!(out.loss, min);
        assert_eq!(out.theta, out.runs[out.best_seed].theta);
        assert_eq!(out, ga_estimate(&s, Topology::OneROneC, &cfg, 1).unwrap());
    }

    #[test]
    fn recovers_one_r_one_c_building() {
        let spec = &target_suite()[5];
        let opts = GenerationOptions {
            truth_topology: Topology::OneROneC,
            ..GenerationOptions::default()
        };
        let s = generate_dataset(spec, 48, 7, &opts).unwrap();
        let sp = split(&s, &SplitSpec::new(36)).unwrap();
        let out = ga_estimate(&sp.train, Topology::OneROneC, &GaConfig::default(), 2).unwrap();
        let p = ThermalParams::from_slice(Topology::OneROneC, &out.theta).unwrap();
        let m = evaluate_params(&p, &sp.test, &Integrator::default()).unwrap();
        assert!(m.rmse <= 0.3, "rmse {}", m.rmse);
    }
}
