use log::{debug, warn};
use rand::seq::SliceRandom;
use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::marginal::{select_params, EstimationTrace, DEFAULT_BINS};
use super::net::{Activations, EstimatorNet, Standardization, INPUT_SIZE};
use super::window::{slice_windows_strided, Window, LOOKBACK};
use crate::diff::{clip_global_norm, AdamConfig, AdamState, Real, Tape, Var};
use crate::error::{ensure, Error, Result};
use crate::rc::{Integrator, ParamRanges, ThermalParams, Topology};
use crate::seed::{self, tag};
use crate::series::BuildingSeries;

/// Training hyperparameters. Defaults follow the reference setup.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EstimatorConfig {
    pub hidden: usize,
    pub epochs: usize,
    pub seeds: usize,
    pub adam: AdamConfig,
    /// Global gradient-norm limit applied before each update.
    pub clip_norm: f64,
    pub init_steps: usize,
    pub init_lr: f64,
    pub init_ranges: ParamRanges,
    pub bins: usize,
    pub substeps: usize,
    pub stride: usize,
    pub pretrain_epochs: usize,
    pub batch_size: usize,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        EstimatorConfig {
            hidden: super::net::HIDDEN,
            epochs: 50,
            seeds: 8,
            adam: AdamConfig::default(),
            clip_norm: 10.0,
            init_steps: 2000,
            init_lr: 1e-3,
            init_ranges: ParamRanges::default(),
            bins: DEFAULT_BINS,
            substeps: 4,
            stride: 1,
            pretrain_epochs: 30,
            batch_size: 32,
        }
    }
}

impl EstimatorConfig {
    pub fn validate(&self) -> Result<()> {
        ensure!(self.hidden >= 1, "hidden width must be positive");
        ensure!(self.seeds >= 1, "need at least one seed");
        ensure!(self.bins >= 1, "need at least one histogram bin");
        ensure!(self.batch_size >= 1, "batch size must be positive");
        ensure!(self.stride >= 1, "window stride must be positive");
        ensure!(self.clip_norm > 0.0, "clip norm must be positive");
        ensure!(self.adam.lr > 0.0 && self.init_lr > 0.0, "learning rates must be positive");
        self.init_ranges.validate()
    }

    pub fn integrator(&self) -> Result<Integrator> {
        Integrator::new(self.substeps)
    }
}

/// `sqrt(sum (sim - label)^2)` over the label horizon.
fn l2_loss<T: Real>(sim: &[T], label: &[f64]) -> T {
    let mut acc = (sim[0] - label[0]) * (sim[0] - label[0]);
    for (s, y) in sim.iter().zip(label).skip(1) {
        let r = *s - *y;
        acc = acc + r * r;
    }
    acc.sqrt()
}

/// Estimate and simulation loss of one window, without gradients.
pub fn window_loss(
    net: &EstimatorNet,
    window: &Window<'_>,
    integrator: &Integrator,
) -> Result<(Vec<f64>, f64)> {
    let theta = net.forward(&net.standardization.features(window))?;
    let loss = theta_loss(net.topology(), &theta, window, integrator)?;
    Ok((theta, loss))
}

/// ℓ2 loss of fixed parameters on one window.
pub fn theta_loss(
    topology: Topology,
    theta: &[f64],
    window: &Window<'_>,
    integrator: &Integrator,
) -> Result<f64> {
    let label = window.label();
    let sim = integrator.simulate_from_measured(
        topology,
        theta,
        label[0],
        &window.forcings(),
        window.lookback(),
    )?;
    Ok(l2_loss(&sim, label))
}

/// Reusable buffers for gradient evaluation.
#[derive(Default)]
pub struct Workspace {
    tape: Tape,
    act: Activations,
    /// Weight gradient of the latest [`loss_and_grad`] call.
    pub grads: Vec<f64>,
}

impl Workspace {
    pub fn new() -> Self {
        Self::default()
    }
}

/// Loss of one window and its gradient with respect to every network weight.
///
/// The network part is differentiated by hand; the parameters-to-loss part (simulation
/// and ℓ2 loss) is recorded on a tape. Returns the estimate and the loss; the gradient
/// is left in `ws.grads` and is only meaningful when the loss is finite.
pub fn loss_and_grad(
    net: &EstimatorNet,
    ws: &mut Workspace,
    window: &Window<'_>,
    integrator: &Integrator,
) -> Result<(Vec<f64>, f64)> {
    ensure!(window.lookback() == LOOKBACK, "window lookback must be {LOOKBACK}");
    let x = net.standardization.features(window);
    net.forward_cached(&x, &mut ws.act)?;
    let theta_vals = ws.act.theta.clone();
    ws.tape.clear();
    let tape = &ws.tape;
    let theta_leaf = tape.param(&theta_vals);
    let theta: Vec<Var<'_>> = (0..theta_vals.len()).map(|i| theta_leaf.index(i)).collect();
    let label = window.label();
    let sim = integrator.simulate_from_measured(
        net.topology(),
        &theta,
        label[0],
        &window.forcings(),
        window.lookback(),
    )?;
    let loss = l2_loss(&sim, label);
    let value = loss.value();
    ws.grads.resize(net.weights.len(), 0.0);
    if value.is_finite() {
        let g = tape.backward(loss)?;
        net.backward_into(&ws.act, g.wrt(theta_leaf), &mut ws.grads);
    }
    Ok((theta_vals, value))
}

/// Full-tape variant of [`loss_and_grad`]: the network is recorded on the tape too.
/// Slower; kept as an independent reference for the hand-written backward pass.
pub fn loss_and_grad_tape(
    net: &EstimatorNet,
    window: &Window<'_>,
    integrator: &Integrator,
) -> Result<(Vec<f64>, f64, Vec<f64>)> {
    let tape = Tape::new();
    let x = net.standardization.features(window);
    let (leaves, theta) = net.forward_tape(&tape, &x)?;
    let label = window.label();
    let sim = integrator.simulate_from_measured(
        net.topology(),
        &theta,
        label[0],
        &window.forcings(),
        window.lookback(),
    )?;
    let loss = l2_loss(&sim, label);
    let theta: Vec<f64> = theta.iter().map(|v| v.value()).collect();
    let grads = tape.backward(loss)?;
    Ok((theta, loss.value(), net.flatten_grads(&grads, &leaves)))
}

/// Batch-size-1 optimizer loop state for one network.
pub struct Trainer {
    pub net: EstimatorNet,
    pub adam: AdamState,
    pub integrator: Integrator,
    pub clip_norm: f64,
    /// Steps dropped because the loss or gradient was not finite.
    pub skipped: usize,
    ws: Workspace,
}

impl Trainer {
    pub fn new(net: EstimatorNet, adam: AdamConfig, integrator: Integrator, clip_norm: f64) -> Self {
        let adam = AdamState::new(net.weights.len(), adam);
        Trainer {
            net,
            adam,
            integrator,
            clip_norm,
            skipped: 0,
            ws: Workspace::new(),
        }
    }

    /// One estimate-simulate-loss-update step. Returns the pre-update estimate and loss,
    /// or `None` when the step was skipped as non-finite.
    pub fn step(&mut self, window: &Window<'_>) -> Result<Option<(Vec<f64>, f64)>> {
        let (theta, loss) = loss_and_grad(&self.net, &mut self.ws, window, &self.integrator)?;
        let grads = &mut self.ws.grads;
        if !loss.is_finite() || !clip_global_norm(grads, self.clip_norm).is_finite() {
            self.skipped += 1;
            debug!("skipping window at {}: non-finite loss {loss}", window.start());
            return Ok(None);
        }
        self.adam.step(&mut self.net.weights, grads)?;
        Ok(Some((theta, loss)))
    }

    /// Shuffled epochs over `windows`, appending every finite step to `trace`.
    pub fn run_epochs(
        &mut self,
        windows: &[Window<'_>],
        epochs: usize,
        rng: &mut seed::Rng,
        seed_id: u32,
        trace: &mut EstimationTrace,
    ) -> Result<()> {
        let mut order: Vec<usize> = (0..windows.len()).collect();
        for epoch in 0..epochs {
            order.shuffle(rng);
            for &i in &order {
                if let Some((theta, loss)) = self.step(&windows[i])? {
                    trace.push(&theta, loss, epoch as u32, seed_id)?;
                }
            }
        }
        Ok(())
    }
}

/// Trains `net` to output `guess` for any input, using inputs drawn uniformly from
/// `[0, 1]` and the loss `sum (theta_i / guess_i - 1)^2`. Returns the mean absolute
/// relative deviation over 100 fresh inputs.
pub fn init_to_constant_guess(
    net: &mut EstimatorNet,
    guess: &ThermalParams,
    steps: usize,
    lr: f64,
    rng: &mut seed::Rng,
) -> Result<f64> {
    ensure!(steps >= 1, "constant-guess initialization needs at least one step");
    ensure!(
        guess.topology() == net.topology(),
        "guess topology {} does not match network {}",
        guess.topology(),
        net.topology()
    );
    guess.validate()?;
    let g = guess.to_vec();
    let inv: Vec<f64> = g.iter().map(|v| 1.0 / v).collect();
    let mut adam = AdamState::new(net.weights.len(), AdamConfig { lr, ..Default::default() });
    let mut act = Activations::default();
    let mut grads = vec![0.0; net.weights.len()];
    let mut x = vec![0.0; INPUT_SIZE];
    for _ in 0..steps {
        x.iter_mut().for_each(|v| *v = rng.random::<f64>());
        net.forward_cached(&x, &mut act)?;
        // d/dtheta of sum (theta_i / g_i - 1)^2
        let g_theta: Vec<f64> = act
            .theta
            .iter()
            .zip(&inv)
            .map(|(t, iv)| 2.0 * (t * iv - 1.0) * iv)
            .collect();
        net.backward_into(&act, &g_theta, &mut grads);
        adam.step(&mut net.weights, &grads)?;
    }
    let mut dev = 0.0;
    let probes = 100;
    for _ in 0..probes {
        x.iter_mut().for_each(|v| *v = rng.random::<f64>());
        let out = net.forward(&x)?;
        dev += out.iter().zip(&g).map(|(o, t)| ((o - t) / t).abs()).sum::<f64>() / g.len() as f64;
    }
    Ok(dev / probes as f64)
}

/// Result of a neural estimation run.
#[derive(Clone, Debug)]
pub struct TrainingOutcome {
    pub trace: EstimationTrace,
    pub theta: ThermalParams,
    /// Final network of each seed that produced records, in seed order.
    pub nets: Vec<EstimatorNet>,
    pub skipped: usize,
}

fn draw_guess(topology: Topology, ranges: &ParamRanges, rng: &mut seed::Rng) -> Result<ThermalParams> {
    let v: Vec<f64> = ranges
        .bounds(topology)
        .into_iter()
        .map(|(lo, hi)| rng.random_range(lo..hi))
        .collect();
    ThermalParams::from_slice(topology, &v)
}

fn windows_of<'a>(series: &'a BuildingSeries, config: &EstimatorConfig) -> Result<Vec<Window<'a>>> {
    slice_windows_strided(series, LOOKBACK, config.stride)
}

/// Estimator from scratch: for each seed, draw a constant guess from the initialization
/// ranges, fit the network to it, then train on the series' windows. The traces of all
/// seeds are pooled before parameter selection.
pub fn train_from_scratch(
    series: &BuildingSeries,
    topology: Topology,
    config: &EstimatorConfig,
    master_seed: u64,
) -> Result<TrainingOutcome> {
    config.validate()?;
    let windows = windows_of(series, config)?;
    let integrator = config.integrator()?;
    let standardization = Standardization::fit(&[series]);
    let scales = config.init_ranges.midpoints(topology);

    let runs: Vec<Result<(EstimationTrace, EstimatorNet, usize)>> = (0..config.seeds)
        .into_par_iter()
        .map(|s| {
            let mut rng = seed::rng(master_seed, &[tag::SCRATCH, s as u64]);
            let guess = draw_guess(topology, &config.init_ranges, &mut rng)?;
            let mut net = EstimatorNet::zeros_with_hidden(
                topology,
                config.hidden,
                scales.clone(),
                standardization,
            )?;
            net.randomize(&mut rng);
            let dev = init_to_constant_guess(&mut net, &guess, config.init_steps, config.init_lr, &mut rng)?;
            debug!("seed {s}: constant-guess deviation {dev:.4}");
            let mut trainer = Trainer::new(net, config.adam, integrator, config.clip_norm);
            let mut trace = EstimationTrace::new(topology);
            trainer.run_epochs(&windows, config.epochs, &mut rng, s as u32, &mut trace)?;
            Ok((trace, trainer.net, trainer.skipped))
        })
        .collect();
    collect_runs(topology, runs, config.bins)
}

fn collect_runs(
    topology: Topology,
    runs: Vec<Result<(EstimationTrace, EstimatorNet, usize)>>,
    bins: usize,
) -> Result<TrainingOutcome> {
    let mut trace = EstimationTrace::new(topology);
    let mut nets = vec![];
    let mut skipped = 0;
    for (s, run) in runs.into_iter().enumerate() {
        let (t, net, sk) = run?;
        skipped += sk;
        if sk > 0 {
            warn!("seed {s}: {sk} non-finite steps skipped");
        }
        if t.is_empty() {
            warn!("seed {s} diverged (no finite records) and is excluded");
            continue;
        }
        trace.extend(&t)?;
        nets.push(net);
    }
    if trace.is_empty() {
        return Err(Error::Diverged("every seed diverged".into()));
    }
    let theta = select_params(&trace, bins)?;
    Ok(TrainingOutcome {
        trace,
        theta,
        nets,
        skipped,
    })
}

/// Fine-tunes a pretrained network on one series with a fresh optimizer and one seed.
/// With zero epochs the trace holds the pretrained network's estimate on every window.
pub fn finetune(
    pretrained: &EstimatorNet,
    series: &BuildingSeries,
    topology: Topology,
    config: &EstimatorConfig,
    master_seed: u64,
) -> Result<TrainingOutcome> {
    config.validate()?;
    ensure!(
        pretrained.topology() == topology,
        "pretrained network estimates {} parameters, requested {topology}",
        pretrained.topology()
    );
    let windows = windows_of(series, config)?;
    let integrator = config.integrator()?;
    let run = if config.epochs == 0 {
        let mut trace = EstimationTrace::new(topology);
        let mut skipped = 0;
        for w in &windows {
            let (theta, loss) = window_loss(pretrained, w, &integrator)?;
            if loss.is_finite() {
                trace.push(&theta, loss, 0, 0)?;
            } else {
                skipped += 1;
            }
        }
        Ok((trace, pretrained.clone(), skipped))
    } else {
        let mut rng = seed::rng(master_seed, &[tag::FINETUNE]);
        let mut trainer = Trainer::new(pretrained.clone(), config.adam, integrator, config.clip_norm);
        let mut trace = EstimationTrace::new(topology);
        trainer.run_epochs(&windows, config.epochs, &mut rng, 0, &mut trace)?;
        Ok((trace, trainer.net, trainer.skipped))
    };
    collect_runs(topology, vec![run], config.bins)
}

/// Output scales for a fleet-pretrained network: the per-parameter median of the fleet's
/// generating parameters, or the midpoints of `ranges` when any building lacks them.
pub fn fleet_scales(fleet: &[BuildingSeries], topology: Topology, ranges: &ParamRanges) -> Vec<f64> {
    let truths: Option<Vec<Vec<f64>>> = fleet
        .iter()
        .map(|s| s.truth.and_then(|t| t.for_topology(topology)).map(|t| t.to_vec()))
        .collect();
    match truths {
        Some(t) if !t.is_empty() => (0..topology.arity())
            .map(|i| {
                let mut col: Vec<f64> = t.iter().map(|v| v[i]).collect();
                col.sort_by(f64::total_cmp);
                let m = col.len() / 2;
                if col.len() % 2 == 1 {
                    col[m]
                } else {
                    0.5 * (col[m - 1] + col[m])
                }
            })
            .collect(),
        _ => ranges.midpoints(topology),
    }
}

/// Randomly initialized network with fleet standardization and output scales.
pub fn fleet_network(
    fleet: &[BuildingSeries],
    topology: Topology,
    config: &EstimatorConfig,
    master_seed: u64,
) -> Result<EstimatorNet> {
    ensure!(!fleet.is_empty(), "fleet is empty");
    let refs: Vec<&BuildingSeries> = fleet.iter().collect();
    let mut net = EstimatorNet::zeros_with_hidden(
        topology,
        config.hidden,
        fleet_scales(fleet, topology, &config.init_ranges),
        Standardization::fit(&refs),
    )?;
    net.randomize(&mut seed::rng(master_seed, &[tag::PRETRAIN, 0]));
    Ok(net)
}

/// Mini-batch training over the pooled windows of a fleet. Per-example losses are
/// averaged within each batch (gradients computed concurrently, summed in batch order).
/// Returns the mean finite loss of each epoch.
pub fn pretrain(
    net: &mut EstimatorNet,
    fleet: &[BuildingSeries],
    config: &EstimatorConfig,
    master_seed: u64,
) -> Result<Vec<f64>> {
    config.validate()?;
    ensure!(!fleet.is_empty(), "fleet is empty");
    let integrator = config.integrator()?;
    let windows: Vec<Window<'_>> = fleet
        .iter()
        .map(|s| windows_of(s, config))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .flatten()
        .collect();
    let mut rng = seed::rng(master_seed, &[tag::PRETRAIN, 1]);
    let mut adam = AdamState::new(net.weights.len(), config.adam);
    let mut order: Vec<usize> = (0..windows.len()).collect();
    let mut curve = Vec::with_capacity(config.pretrain_epochs);
    for epoch in 0..config.pretrain_epochs {
        order.shuffle(&mut rng);
        let (mut sum, mut count) = (0.0, 0usize);
        for batch in order.chunks(config.batch_size) {
            let current = &*net;
            let evals: Vec<Result<(f64, Vec<f64>)>> = batch
                .par_iter()
                .map_init(Workspace::new, |ws, &i| {
                    let (_, loss) = loss_and_grad(current, ws, &windows[i], &integrator)?;
                    Ok((loss, std::mem::take(&mut ws.grads)))
                })
                .collect();
            let mut grad = vec![0.0; net.weights.len()];
            let mut used = 0usize;
            for ev in evals {
                let (loss, g) = ev?;
                if !loss.is_finite() || g.iter().any(|v| !v.is_finite()) {
                    continue;
                }
                sum += loss;
                count += 1;
                used += 1;
                for (a, v) in grad.iter_mut().zip(&g) {
                    *a += v;
                }
            }
            if used == 0 {
                warn!("epoch {epoch}: batch without finite losses skipped");
                continue;
            }
            let inv = 1.0 / used as f64;
            grad.iter_mut().for_each(|g| *g *= inv);
            clip_global_norm(&mut grad, config.clip_norm);
            adam.step(&mut net.weights, &grad)?;
        }
        let mean = if count > 0 { sum / count as f64 } else { f64::NAN };
        debug!("pretrain epoch {epoch}: mean loss {mean:.4}");
        curve.push(mean);
    }
    Ok(curve)
}

/// Mean finite window loss of `net` over the pooled windows of `fleet`.
pub fn mean_fleet_loss(net: &EstimatorNet, fleet: &[BuildingSeries], config: &EstimatorConfig) -> Result<f64> {
    let integrator = config.integrator()?;
    let losses: Vec<f64> = fleet
        .iter()
        .map(|s| {
            windows_of(s, config)?
                .par_iter()
                .map(|w| window_loss(net, w, &integrator).map(|r| r.1))
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .flatten()
        .filter(|l| l.is_finite())
        .collect();
    ensure!(!losses.is_empty(), "no finite window losses");
    Ok(losses.iter().sum::<f64>() / losses.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datagen::{generate_dataset, target_suite, GenerationOptions};
    use crate::estimator::window::slice_windows;

    fn small_config() -> EstimatorConfig {
        EstimatorConfig {
            hidden: 8,
            epochs: 2,
            seeds: 2,
            init_steps: 50,
            ..Default::default()
        }
    }

    fn building(days: usize, topology: Topology) -> BuildingSeries {
        let opts = GenerationOptions {
            truth_topology: topology,
            ..Default::default()
        };
        generate_dataset(&target_suite()[5], days, 3, &opts).unwrap()
    }

    fn small_net(topology: Topology, seed: u64) -> EstimatorNet {
        let mut n = EstimatorNet::zeros_with_hidden(
            topology,
            8,
            ParamRanges::default().midpoints(topology),
            Default::default(),
        )
        .unwrap();
        n.randomize(&mut crate::seed::rng(seed, &[]));
        n
    }

    #[test]
    fn l2_loss_of_constant_offset() {
        let label = vec![20.0; 97];
        let sim: Vec<f64> = label.iter().map(|v| v + 0.3).collect();
        let l = l2_loss(&sim, &label);
        assert!((l - 97f64.sqrt() * 0.3).abs() < 1e-12);
        assert_eq!(l2_loss(&label, &label), 0.0);
    }

    #[test]
    fn perfect_prediction_leaves_weights_unchanged() {
        // flat series in equilibrium with no inputs: any parameters predict it exactly
        let n = 200;
        let s = BuildingSeries::new(
            crate::series::default_start(),
            vec![18.0; n],
            vec![18.0; n],
            vec![0.0; n],
            vec![0.0; n],
        )
        .unwrap();
        let w = slice_windows(&s, LOOKBACK).unwrap();
        let mut tr = Trainer::new(small_net(Topology::TwoRTwoC, 1), Default::default(), Integrator::default(), 10.0);
        let before = tr.net.weights.clone();
        let (_, loss) = tr.step(&w[0]).unwrap().unwrap();
        assert_eq!(loss, 0.0);
        assert_eq!(tr.net.weights, before);
    }

    #[test]
    fn step_loss_matches_independent_simulation() {
        let s = building(3, Topology::TwoRTwoC);
        let w = slice_windows(&s, LOOKBACK).unwrap();
        let mut tr = Trainer::new(small_net(Topology::TwoRTwoC, 2), Default::default(), Integrator::default(), 10.0);
        let (theta, loss) = tr.step(&w[17]).unwrap().unwrap();
        let p = ThermalParams::from_slice(Topology::TwoRTwoC, &theta).unwrap();
        let label = w[17].label();
        let init = p.initial_state(label[0], s.t_out[17]);
        let sim = crate::rc::simulate(&p, &init, &w[17].forcings(), 96).unwrap();
        let direct = sim.iter().zip(label).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        assert!((loss - direct).abs() <= 1e-10 * direct.max(1.0), "{loss} vs {direct}");
    }

    #[test]
    fn hand_backprop_matches_full_tape() {
        let s = building(3, Topology::TwoRTwoC);
        let w = slice_windows(&s, LOOKBACK).unwrap();
        let it = Integrator::default();
        for topo in Topology::ALL {
            let net = small_net(topo, 21);
            let mut ws = Workspace::new();
            let (theta, loss) = loss_and_grad(&net, &mut ws, &w[40], &it).unwrap();
            let (theta_t, loss_t, grads_t) = loss_and_grad_tape(&net, &w[40], &it).unwrap();
            assert_eq!(theta, theta_t);
            assert_eq!(loss, loss_t);
            for (a, b) in ws.grads.iter().zip(&grads_t) {
                assert!((a - b).abs() <= 1e-10 * b.abs().max(1e-6), "{a} vs {b}");
            }
        }
    }

    #[test]
    fn small_steps_descend() {
        let s = building(4, Topology::OneROneC);
        let w = slice_windows(&s, LOOKBACK).unwrap();
        let it = Integrator::default();
        let mut decreased = 0;
        for k in 0..20 {
            let net = small_net(Topology::OneROneC, 100 + k);
            let win = &w[(k as usize * 13) % w.len()];
            let (_, before) = window_loss(&net, win, &it).unwrap();
            let cfg = AdamConfig { lr: 1e-6, ..Default::default() };
            let mut tr = Trainer::new(net, cfg, it, 1e9);
            tr.step(win).unwrap();
            let (_, after) = window_loss(&tr.net, win, &it).unwrap();
            if after < before {
                decreased += 1;
            }
        }
        assert_eq!(decreased, 20);
    }

    #[test]
    fn constant_guess_fit() {
        let mut rng = crate::seed::rng(5, &[]);
        let mut net = EstimatorNet::zeros(Topology::OneROneC, ParamRanges::default().midpoints(Topology::OneROneC), Default::default()).unwrap();
        net.randomize(&mut rng);
        let guess = ThermalParams::one_r_one_c(5.0, 2.0, 1.0).unwrap();
        let dev = init_to_constant_guess(&mut net, &guess, 2000, 1e-3, &mut rng).unwrap();
        assert!(dev < 0.05, "deviation {dev}");

        let mut other = EstimatorNet::zeros(Topology::OneROneC, ParamRanges::default().midpoints(Topology::OneROneC), Default::default()).unwrap();
        other.randomize(&mut crate::seed::rng(5, &[]));
        let g2 = ThermalParams::one_r_one_c(20.0, 10.0, 8.0).unwrap();
        init_to_constant_guess(&mut other, &g2, 2000, 1e-3, &mut rng).unwrap();
        let x = vec![0.5; INPUT_SIZE];
        let (a, b) = (net.forward(&x).unwrap(), other.forward(&x).unwrap());
        assert!(a.iter().zip(&b).all(|(p, q)| (p - q).abs() / p > 0.01));
    }

    #[test]
    fn zero_net_already_at_its_own_guess() {
        let scales = vec![2.0, 3.0, 4.0];
        let mut net = EstimatorNet::zeros_with_hidden(Topology::OneROneC, 8, scales.clone(), Default::default()).unwrap();
        let ln2 = std::f64::consts::LN_2;
        let guess = ThermalParams::from_slice(Topology::OneROneC, &scales.iter().map(|s| s * ln2).collect::<Vec<_>>()).unwrap();
        let dev = init_to_constant_guess(&mut net, &guess, 1, 1e-3, &mut crate::seed::rng(0, &[])).unwrap();
        assert!(dev < 1e-12);
    }

    #[test]
    fn scratch_bookkeeping_and_determinism() {
        let s = building(2, Topology::OneROneC).slice(0, 97).unwrap();
        let cfg = small_config();
        let a = train_from_scratch(&s, Topology::OneROneC, &cfg, 11).unwrap();
        assert_eq!(a.trace.len() + a.skipped, cfg.seeds * cfg.epochs);
        let b = train_from_scratch(&s, Topology::OneROneC, &cfg, 11).unwrap();
        assert_eq!(a.trace, b.trace);
        assert_eq!(a.theta, b.theta);
    }

    #[test]
    fn zero_epoch_finetune_uses_raw_estimates() {
        let s = building(2, Topology::TwoRTwoC);
        let net = small_net(Topology::TwoRTwoC, 4);
        let cfg = EstimatorConfig { epochs: 0, ..small_config() };
        let out = finetune(&net, &s, Topology::TwoRTwoC, &cfg, 1).unwrap();
        let w = slice_windows(&s, LOOKBACK).unwrap();
        assert_eq!(out.trace.len(), w.len());
        let (theta, loss) = window_loss(&net, &w[5], &Integrator::default()).unwrap();
        assert_eq!(out.trace.theta(5), &theta[..]);
        assert_eq!(out.trace.loss(5), loss);
        assert!(finetune(&net, &s, Topology::OneROneC, &cfg, 1).is_err());
    }

    #[test]
    fn pretrain_single_building_is_deterministic() {
        let fleet = vec![building(2, Topology::TwoRTwoC)];
        let cfg = EstimatorConfig { pretrain_epochs: 1, ..small_config() };
        let mut a = fleet_network(&fleet, Topology::TwoRTwoC, &cfg, 3).unwrap();
        let mut b = a.clone();
        let ca = pretrain(&mut a, &fleet, &cfg, 3).unwrap();
        let cb = pretrain(&mut b, &fleet, &cfg, 3).unwrap();
        assert_eq!(a, b);
        assert_eq!(ca, cb);
        assert!(ca.iter().all(|l| l.is_finite()));
        assert!(pretrain(&mut a, &[], &cfg, 3).is_err());
    }

    #[test]
    fn fleet_scales_use_median_truth() {
        let s1 = building(1, Topology::TwoRTwoC);
        let mut s2 = s1.clone();
        s2.truth = Some(ThermalParams::two_r_two_c(1.0, 1.0, 1.0, 1.0, 1.0).unwrap());
        let mut s3 = s1.clone();
        s3.truth = Some(ThermalParams::two_r_two_c(3.0, 3.0, 3.0, 3.0, 3.0).unwrap());
        let fleet = vec![s2.clone(), s3.clone()];
        assert_eq!(fleet_scales(&fleet, Topology::TwoRTwoC, &Default::default()), vec![2.0; 5]);
        assert_eq!(fleet_scales(&fleet, Topology::OneROneC, &Default::default()), vec![4.0, 4.0, 2.0]);
        s2.truth = None;
        let r = ParamRanges::default();
        assert_eq!(fleet_scales(&[s2, s3], Topology::OneROneC, &r), r.midpoints(Topology::OneROneC));
    }
}
