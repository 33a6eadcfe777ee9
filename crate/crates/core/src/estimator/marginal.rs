use std::io::Write;
use std::path::Path;

use serde::Serialize;

use crate::error::{ensure, Error, Result};
use crate::rc::{ThermalParams, Topology};

pub const DEFAULT_BINS: usize = 100;

/// One explored estimate.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TraceRecord {
    pub theta: Vec<f64>,
    pub loss: f64,
    pub epoch: u32,
    pub seed: u32,
}

/// Ordered (estimate, loss) pairs collected during training, stored column-wise.
#[derive(Clone, Debug, PartialEq)]
pub struct EstimationTrace {
    topology: Topology,
    thetas: Vec<f64>,
    losses: Vec<f64>,
    epochs: Vec<u32>,
    seeds: Vec<u32>,
}

impl EstimationTrace {
    pub fn new(topology: Topology) -> Self {
        EstimationTrace {
            topology,
            thetas: vec![],
            losses: vec![],
            epochs: vec![],
            seeds: vec![],
        }
    }

    pub fn topology(&self) -> Topology {
        self.topology
    }

    pub fn len(&self) -> usize {
        self.losses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.losses.is_empty()
    }

    pub fn push(&mut self, theta: &[f64], loss: f64, epoch: u32, seed: u32) -> Result<()> {
        ensure!(
            theta.len() == self.topology.arity(),
            "trace record has {} parameters, {} expects {}",
            theta.len(),
            self.topology,
            self.topology.arity()
        );
        ensure!(loss >= 0.0 && loss.is_finite(), "trace loss must be finite and >= 0, got {loss}");
        ensure!(
            theta.iter().all(|v| *v > 0.0 && v.is_finite()),
            "trace estimates must be strictly positive"
        );
        self.thetas.extend_from_slice(theta);
        self.losses.push(loss);
        self.epochs.push(epoch);
        self.seeds.push(seed);
        Ok(())
    }

    /// Appends all records of `other`.
    pub fn extend(&mut self, other: &EstimationTrace) -> Result<()> {
        ensure!(other.topology == self.topology, "cannot merge traces of different topologies");
        self.thetas.extend_from_slice(&other.thetas);
        self.losses.extend_from_slice(&other.losses);
        self.epochs.extend_from_slice(&other.epochs);
        self.seeds.extend_from_slice(&other.seeds);
        Ok(())
    }

    pub fn theta(&self, i: usize) -> &[f64] {
        let n = self.topology.arity();
        &self.thetas[i * n..(i + 1) * n]
    }

    pub fn loss(&self, i: usize) -> f64 {
        self.losses[i]
    }

    pub fn losses(&self) -> &[f64] {
        &self.losses
    }

    pub fn record(&self, i: usize) -> TraceRecord {
        TraceRecord {
            theta: self.theta(i).to_vec(),
            loss: self.losses[i],
            epoch: self.epochs[i],
            seed: self.seeds[i],
        }
    }

    pub fn records(&self) -> impl Iterator<Item = TraceRecord> + '_ {
        (0..self.len()).map(|i| self.record(i))
    }

    /// Values of parameter `index` across all records.
    pub fn column(&self, index: usize) -> impl Iterator<Item = f64> + '_ {
        let n = self.topology.arity();
        self.thetas.iter().skip(index).step_by(n).copied()
    }

    /// Record with the lowest loss (first on ties).
    pub fn best(&self) -> Option<TraceRecord> {
        let i = (0..self.len()).min_by(|a, b| self.losses[*a].total_cmp(&self.losses[*b]))?;
        Some(self.record(i))
    }

    /// CSV with columns `seed,epoch,loss,<parameter names>`.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = std::io::BufWriter::new(file);
        let io = |e| Error::io(path, e);
        write!(w, "seed,epoch,loss").map_err(io)?;
        for name in self.topology.param_names() {
            write!(w, ",{name}").map_err(io)?;
        }
        writeln!(w).map_err(io)?;
        for i in 0..self.len() {
            write!(w, "{},{},{}", self.seeds[i], self.epochs[i], self.losses[i]).map_err(io)?;
            for v in self.theta(i) {
                write!(w, ",{v}").map_err(io)?;
            }
            writeln!(w).map_err(io)?;
        }
        w.flush().map_err(io)
    }
}

/// Loss-weighted histogram of one parameter over a trace.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MarginalHistogram {
    pub param_index: usize,
    /// `bins + 1` strictly increasing edges; bin `i` is `[edges[i], edges[i+1])`, the last
    /// bin is closed.
    pub edges: Vec<f64>,
    pub weights: Vec<f64>,
}

impl MarginalHistogram {
    /// Equal-width bins over `[lo, hi]`. A degenerate range is widened symmetrically.
    pub fn with_range(param_index: usize, lo: f64, hi: f64, bins: usize) -> Result<Self> {
        ensure!(bins >= 1, "histogram needs at least one bin");
        ensure!(lo.is_finite() && hi.is_finite() && lo <= hi, "invalid histogram range");
        let (lo, hi) = if hi > lo {
            (lo, hi)
        } else {
            let pad = (lo.abs() * 1e-6).max(1e-12);
            (lo - pad, hi + pad)
        };
        let width = (hi - lo) / bins as f64;
        let mut edges: Vec<f64> = (0..bins).map(|i| lo + i as f64 * width).collect();
        edges.push(hi);
        ensure!(
            edges.windows(2).all(|e| e[0] < e[1]),
            "range too narrow for {bins} bins"
        );
        Ok(MarginalHistogram {
            param_index,
            edges,
            weights: vec![0.0; bins],
        })
    }

    pub fn bins(&self) -> usize {
        self.weights.len()
    }

    /// Bin containing `x`, or `None` outside the edges.
    pub fn bin_of(&self, x: f64) -> Option<usize> {
        let (lo, hi) = (self.edges[0], self.edges[self.bins()]);
        if !(lo..=hi).contains(&x) {
            return None;
        }
        let width = (hi - lo) / self.bins() as f64;
        let mut i = (((x - lo) / width) as usize).min(self.bins() - 1);
        // the estimate may land one bin off near an edge
        while i > 0 && x < self.edges[i] {
            i -= 1;
        }
        while i + 1 < self.bins() && x >= self.edges[i + 1] {
            i += 1;
        }
        Some(i)
    }

    /// Adds `exp(-(loss - offset))` to the bin of `x`.
    pub fn add(&mut self, x: f64, loss: f64, offset: f64) -> Result<()> {
        let i = self
            .bin_of(x)
            .ok_or_else(|| Error::invalid(format!("value {x} outside histogram range")))?;
        self.weights[i] += (-(loss - offset)).exp();
        Ok(())
    }

    pub fn center(&self, bin: usize) -> f64 {
        0.5 * (self.edges[bin] + self.edges[bin + 1])
    }

    /// Lowest-index bin of maximal weight.
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (i, w) in self.weights.iter().enumerate() {
            if *w > self.weights[best] {
                best = i;
            }
        }
        best
    }

    pub fn total_weight(&self) -> f64 {
        self.weights.iter().sum()
    }

    fn from_trace(trace: &EstimationTrace, index: usize, bins: usize, offset: f64) -> Result<Self> {
        ensure!(!trace.is_empty(), "trace is empty");
        ensure!(
            index < trace.topology().arity(),
            "parameter index {index} out of range"
        );
        let (lo, hi) = trace
            .column(index)
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), x| (a.min(x), b.max(x)));
        let mut h = Self::with_range(index, lo, hi, bins)?;
        for (x, loss) in trace.column(index).zip(trace.losses()) {
            h.add(x, *loss, offset)?;
        }
        Ok(h)
    }
}

/// Marginal of parameter `index`: each record adds `exp(-loss)` to the bin of its value.
/// Edges span the observed range; records are accumulated in trace order.
pub fn marginal_histogram(
    trace: &EstimationTrace,
    index: usize,
    bins: usize,
) -> Result<MarginalHistogram> {
    MarginalHistogram::from_trace(trace, index, bins, 0.0)
}

/// Per-parameter argmax of the marginals, as bin centers.
///
/// Weights are computed relative to the smallest loss in the trace, which only rescales
/// each histogram but keeps the weights representable when every loss is large.
pub fn select_params(trace: &EstimationTrace, bins: usize) -> Result<ThermalParams> {
    Ok(select_with_histograms(trace, bins)?.0)
}

/// [`select_params`] together with the histograms it used.
pub fn select_with_histograms(
    trace: &EstimationTrace,
    bins: usize,
) -> Result<(ThermalParams, Vec<MarginalHistogram>)> {
    ensure!(!trace.is_empty(), "trace is empty");
    let offset = trace.losses().iter().copied().fold(f64::INFINITY, f64::min);
    let hists = (0..trace.topology().arity())
        .map(|i| MarginalHistogram::from_trace(trace, i, bins, offset))
        .collect::<Result<Vec<_>>>()?;
    let theta: Vec<f64> = hists.iter().map(|h| h.center(h.argmax())).collect();
    Ok((ThermalParams::from_slice(trace.topology(), &theta)?, hists))
}

/// Long-format CSV `param,bin,lower,upper,weight` for a set of histograms.
pub fn write_histograms_csv(
    path: &Path,
    topology: Topology,
    hists: &[MarginalHistogram],
) -> Result<()> {
    let mut out = String::from("param,bin,lower,upper,weight\n");
    for h in hists {
        let name = topology.param_names()[h.param_index];
        for (i, w) in h.weights.iter().enumerate() {
            out.push_str(&format!("{name},{i},{},{},{w}\n", h.edges[i], h.edges[i + 1]));
        }
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}
