use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::window::{Window, FEATURES, LOOKBACK};
use crate::diff::{matvec_into, sigmoid, softplus, Tape, Var};
use crate::error::{ensure, Error, Result};
use crate::rc::{ThermalParams, Topology};
use crate::series::BuildingSeries;

pub const INPUT_SIZE: usize = LOOKBACK * FEATURES;
pub const HIDDEN: usize = 140;
pub const HIDDEN_LAYERS: usize = 2;

const MAGIC: &[u8; 4] = b"RCNW";
const FORMAT_VERSION: u32 = 1;

/// Input scaling stored with the network.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Standardization {
    pub temp_center: f64,
    pub temp_scale: f64,
    pub u_scale: f64,
    pub q_scale: f64,
}

impl Default for Standardization {
    fn default() -> Self {
        Standardization {
            temp_center: 20.0,
            temp_scale: 10.0,
            u_scale: 1.0,
            q_scale: 1.0,
        }
    }
}

/// Nearest-rank 95th percentile; 1.0 when it is not positive.
fn p95(values: impl Iterator<Item = f64>) -> f64 {
    let mut v: Vec<f64> = values.collect();
    if v.is_empty() {
        return 1.0;
    }
    v.sort_by(f64::total_cmp);
    let rank = ((0.95 * v.len() as f64).ceil() as usize).clamp(1, v.len());
    let p = v[rank - 1];
    if p > 0.0 {
        p
    } else {
        1.0
    }
}

impl Standardization {
    /// Temperatures map as `(x - 20) / 10`; heat input and irradiation are divided by
    /// their 95th percentile over the given series.
    pub fn fit(series: &[&BuildingSeries]) -> Self {
        Standardization {
            u_scale: p95(series.iter().flat_map(|s| s.u_heat.iter().copied())),
            q_scale: p95(series.iter().flat_map(|s| s.q_solar.iter().copied())),
            ..Default::default()
        }
    }

    /// Flattened, scaled `96 x 4` input of a window, rows `(T_in, u_heat, Q_solar, T_out)`.
    pub fn features(&self, window: &Window<'_>) -> Vec<f64> {
        let mut x = Vec::with_capacity(INPUT_SIZE);
        let s = window.series();
        for k in window.history() {
            x.push((s.t_in[k] - self.temp_center) / self.temp_scale);
            x.push(s.u_heat[k] / self.u_scale);
            x.push(s.q_solar[k] / self.q_scale);
            x.push((s.t_out[k] - self.temp_center) / self.temp_scale);
        }
        x
    }
}

/// Multilayer perceptron mapping a 24-hour window to RC parameters.
///
/// Layout: `input -> hidden (tanh) -> hidden (tanh) -> n`, followed by the output map
/// `theta_i = scale_i * softplus(z_i)`. Weights are one flat vector
/// `[W1, b1, W2, b2, W3, b3]`, matrices row-major with shape `(out, in)`.
#[derive(Clone, Debug, PartialEq)]
pub struct EstimatorNet {
    topology: Topology,
    hidden: usize,
    pub weights: Vec<f64>,
    pub scales: Vec<f64>,
    pub standardization: Standardization,
}

/// Header fields shared by the binary weights file and its JSON sidecar.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightsHeader {
    pub format: String,
    pub version: u32,
    pub topology: Topology,
    pub activation: String,
    /// `(rows, cols)` of W1, W2, W3; each followed by a bias of length `rows`.
    pub layer_shapes: Vec<(usize, usize)>,
    pub standardization: Standardization,
    pub output_scales: Vec<f64>,
    pub weight_count: usize,
}

impl EstimatorNet {
    /// All-zero network with the architecture of the reference setup.
    pub fn zeros(topology: Topology, scales: Vec<f64>, standardization: Standardization) -> Result<Self> {
        Self::zeros_with_hidden(topology, HIDDEN, scales, standardization)
    }

    /// All-zero network with a custom hidden width (small widths speed up tests).
    pub fn zeros_with_hidden(
        topology: Topology,
        hidden: usize,
        scales: Vec<f64>,
        standardization: Standardization,
    ) -> Result<Self> {
        ensure!(hidden >= 1, "hidden width must be positive");
        ensure!(
            scales.len() == topology.arity(),
            "{topology} needs {} output scales, got {}",
            topology.arity(),
            scales.len()
        );
        ensure!(
            scales.iter().all(|s| *s > 0.0 && s.is_finite()),
            "output scales must be positive"
        );
        ensure!(
            standardization.temp_scale > 0.0
                && standardization.u_scale > 0.0
                && standardization.q_scale > 0.0,
            "standardization scales must be positive"
        );
        let mut net = EstimatorNet {
            topology,
            hidden,
            weights: vec![],
            scales,
            standardization,
        };
        net.weights = vec![0.0; net.weight_count()];
        Ok(net)
    }

    /// Glorot-uniform weights, zero biases.
    pub fn randomize(&mut self, rng: &mut impl rand::Rng) {
        let shapes = self.layer_shapes();
        let mut off = 0;
        for (rows, cols) in shapes {
            let a = (6.0 / (rows + cols) as f64).sqrt();
            for w in &mut self.weights[off..off + rows * cols] {
                *w = rng.random_range(-a..a);
            }
            off += rows * cols;
            self.weights[off..off + rows].fill(0.0);
            off += rows;
        }
    }

    pub fn topology(&self) -> Topology {
        self.topology
    }

    pub fn hidden(&self) -> usize {
        self.hidden
    }

    pub fn layer_shapes(&self) -> [(usize, usize); 3] {
        [
            (self.hidden, INPUT_SIZE),
            (self.hidden, self.hidden),
            (self.topology.arity(), self.hidden),
        ]
    }

    pub fn weight_count(&self) -> usize {
        self.layer_shapes().iter().map(|(r, c)| r * c + r).sum()
    }

    /// `(matrix, bias)` slices of each layer.
    fn layers(&self) -> [(&[f64], &[f64]); 3] {
        let mut off = 0;
        self.layer_shapes().map(|(r, c)| {
            let w = &self.weights[off..off + r * c];
            let b = &self.weights[off + r * c..off + r * c + r];
            off += r * c + r;
            (w, b)
        })
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        ensure!(
            x.len() == INPUT_SIZE,
            "network input must have {INPUT_SIZE} values, got {}",
            x.len()
        );
        Ok(())
    }

    /// Parameter vector for a standardized input.
    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_input(x)?;
        let [(w1, b1), (w2, b2), (w3, b3)] = self.layers();
        let h = self.hidden;
        let mut h1 = vec![0.0; h];
        matvec_into(w1, x, h, INPUT_SIZE, &mut h1);
        for (v, b) in h1.iter_mut().zip(b1) {
            *v = (*v + b).tanh();
        }
        let mut h2 = vec![0.0; h];
        matvec_into(w2, &h1, h, h, &mut h2);
        for (v, b) in h2.iter_mut().zip(b2) {
            *v = (*v + b).tanh();
        }
        let n = self.topology.arity();
        let mut z = vec![0.0; n];
        matvec_into(w3, &h2, n, h, &mut z);
        Ok(z.iter()
            .zip(b3)
            .zip(&self.scales)
            .map(|((z, b), s)| softplus(z + b) * s)
            .collect())
    }

    /// Forward pass keeping the intermediate activations for [`EstimatorNet::backward_into`].
    pub fn forward_cached(&self, x: &[f64], act: &mut Activations) -> Result<()> {
        self.check_input(x)?;
        let [(w1, b1), (w2, b2), (w3, b3)] = self.layers();
        let (h, n) = (self.hidden, self.topology.arity());
        act.x.clear();
        act.x.extend_from_slice(x);
        act.h1.resize(h, 0.0);
        act.h2.resize(h, 0.0);
        act.z.resize(n, 0.0);
        matvec_into(w1, x, h, INPUT_SIZE, &mut act.h1);
        for (v, b) in act.h1.iter_mut().zip(b1) {
            *v = (*v + b).tanh();
        }
        matvec_into(w2, &act.h1, h, h, &mut act.h2);
        for (v, b) in act.h2.iter_mut().zip(b2) {
            *v = (*v + b).tanh();
        }
        matvec_into(w3, &act.h2, n, h, &mut act.z);
        for (v, b) in act.z.iter_mut().zip(b3) {
            *v += b;
        }
        act.theta.clear();
        act.theta
            .extend(act.z.iter().zip(&self.scales).map(|(z, s)| softplus(*z) * s));
        Ok(())
    }

    /// Writes d(loss)/d(weights) into `grads` given d(loss)/d(theta) for the activations
    /// of the latest [`EstimatorNet::forward_cached`] call.
    pub fn backward_into(&self, act: &Activations, g_theta: &[f64], grads: &mut [f64]) {
        let (h, n) = (self.hidden, self.topology.arity());
        assert_eq!(grads.len(), self.weights.len(), "gradient buffer size");
        assert_eq!(g_theta.len(), n, "parameter gradient size");
        let [(_, _), (w2, _), (w3, _)] = self.layers();
        let (g1, rest) = grads.split_at_mut(h * INPUT_SIZE + h);
        let (g2, g3) = rest.split_at_mut(h * h + h);

        let gz: Vec<f64> = (0..n)
            .map(|i| g_theta[i] * self.scales[i] * sigmoid(act.z[i]))
            .collect();
        let ga2 = outer_layer(g3, &gz, &act.h2, w3, h);
        let ga2: Vec<f64> = ga2.iter().zip(&act.h2).map(|(g, y)| g * (1.0 - y * y)).collect();
        let ga1 = outer_layer(g2, &ga2, &act.h1, w2, h);
        let ga1: Vec<f64> = ga1.iter().zip(&act.h1).map(|(g, y)| g * (1.0 - y * y)).collect();
        let (gw1, gb1) = g1.split_at_mut(h * INPUT_SIZE);
        for ((row, g), b) in gw1.chunks_exact_mut(INPUT_SIZE).zip(&ga1).zip(gb1.iter_mut()) {
            *b = *g;
            for (r, xj) in row.iter_mut().zip(&act.x) {
                *r = g * xj;
            }
        }
    }

    /// Records the forward pass on `tape`. Returns the weight leaves (in layout order)
    /// and the parameter scalars.
    pub fn forward_tape<'t>(&self, tape: &'t Tape, x: &[f64]) -> Result<(Vec<Var<'t>>, Vec<Var<'t>>)> {
        self.check_input(x)?;
        let shapes = self.layer_shapes();
        let mut leaves = Vec::with_capacity(6);
        let mut a = tape.constant(x);
        for (i, ((w, b), (rows, cols))) in self.layers().into_iter().zip(shapes).enumerate() {
            let wv = tape.param_matrix(w, rows, cols);
            let bv = tape.param(b);
            leaves.push(wv);
            leaves.push(bv);
            let z = wv.matvec(a) + bv;
            a = if i < 2 { z.tanh() } else { z };
        }
        let theta = a.softplus() * tape.constant(&self.scales);
        let theta = (0..self.topology.arity()).map(|i| theta.index(i)).collect();
        Ok((leaves, theta))
    }

    /// Flattens per-leaf gradients from [`EstimatorNet::forward_tape`] into weight layout.
    pub fn flatten_grads(&self, grads: &crate::diff::Gradients, leaves: &[Var<'_>]) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.weights.len());
        for leaf in leaves {
            out.extend_from_slice(grads.wrt(*leaf));
        }
        out
    }

    /// Estimated parameters for one window.
    pub fn estimate(&self, window: &Window<'_>) -> Result<ThermalParams> {
        let theta = self.forward(&self.standardization.features(window))?;
        ThermalParams::from_slice(self.topology, &theta)
    }

    /// Parameter estimate for every window.
    pub fn estimate_all(&self, windows: &[Window<'_>]) -> Result<Vec<ThermalParams>> {
        windows.iter().map(|w| self.estimate(w)).collect()
    }

    pub fn header(&self) -> WeightsHeader {
        WeightsHeader {
            format: String::from_utf8_lossy(MAGIC).into_owned(),
            version: FORMAT_VERSION,
            topology: self.topology,
            activation: "tanh".into(),
            layer_shapes: self.layer_shapes().to_vec(),
            standardization: self.standardization,
            output_scales: self.scales.clone(),
            weight_count: self.weights.len(),
        }
    }

    /// Portable binary encoding; all numbers little-endian.
    ///
    /// ```text
    /// "RCNW"  u32 version  u8 topology (0 = 1R1C, 1 = 2R2C)  u8 activation (0 = tanh)
    /// u16 hidden layer count  u32 x 6 layer shapes (rows, cols per layer)
    /// f64 x 4 standardization (temp center, temp scale, u scale, Q scale)
    /// f64 x n output scales  u64 weight count  f64 x count weights
    /// ```
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut b = Vec::with_capacity(64 + 8 * self.weights.len());
        b.extend_from_slice(MAGIC);
        b.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        b.push(match self.topology {
            Topology::OneROneC => 0,
            Topology::TwoRTwoC => 1,
        });
        b.push(0);
        b.extend_from_slice(&(HIDDEN_LAYERS as u16).to_le_bytes());
        for (r, c) in self.layer_shapes() {
            b.extend_from_slice(&(r as u32).to_le_bytes());
            b.extend_from_slice(&(c as u32).to_le_bytes());
        }
        let st = self.standardization;
        for v in [st.temp_center, st.temp_scale, st.u_scale, st.q_scale]
            .iter()
            .chain(&self.scales)
        {
            b.extend_from_slice(&v.to_le_bytes());
        }
        b.extend_from_slice(&(self.weights.len() as u64).to_le_bytes());
        for w in &self.weights {
            b.extend_from_slice(&w.to_le_bytes());
        }
        b
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        ensure!(r.take(4)? == MAGIC, "not an estimator weights file");
        let version = r.u32()?;
        ensure!(version == FORMAT_VERSION, "unsupported weights format version {version}");
        let topology = match r.take(1)?[0] {
            0 => Topology::OneROneC,
            1 => Topology::TwoRTwoC,
            t => return Err(Error::invalid(format!("unknown topology code {t}"))),
        };
        ensure!(r.take(1)?[0] == 0, "unknown activation code");
        let layers = u16::from_le_bytes(r.take(2)?.try_into().expect("2 bytes"));
        ensure!(layers as usize == HIDDEN_LAYERS, "expected {HIDDEN_LAYERS} hidden layers, got {layers}");
        let mut shapes = [(0usize, 0usize); 3];
        for s in &mut shapes {
            *s = (r.u32()? as usize, r.u32()? as usize);
        }
        let st = Standardization {
            temp_center: r.f64()?,
            temp_scale: r.f64()?,
            u_scale: r.f64()?,
            q_scale: r.f64()?,
        };
        let scales = (0..topology.arity()).map(|_| r.f64()).collect::<Result<Vec<_>>>()?;
        let mut net = Self::zeros_with_hidden(topology, shapes[0].0, scales, st)?;
        ensure!(net.layer_shapes() == shapes, "layer shapes {shapes:?} are inconsistent");
        let count = r.u64()? as usize;
        ensure!(count == net.weight_count(), "weight count {count} does not match layer shapes");
        for w in &mut net.weights {
            *w = r.f64()?;
        }
        ensure!(r.pos == bytes.len(), "trailing bytes after weights");
        Ok(net)
    }

    /// Writes `path` and a `path.json` sidecar with the header.
    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))?;
        let sidecar = sidecar_path(path);
        let json = serde_json::to_string_pretty(&self.header())?;
        fs::write(&sidecar, json + "\n").map_err(|e| Error::io(&sidecar, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes).map_err(|e| match e {
            Error::InvalidInput(m) => Error::invalid(format!("{}: {m}", path.display())),
            other => other,
        })
    }
}

/// Intermediate values of one forward pass.
#[derive(Clone, Debug, Default)]
pub struct Activations {
    pub x: Vec<f64>,
    pub h1: Vec<f64>,
    pub h2: Vec<f64>,
    pub z: Vec<f64>,
    pub theta: Vec<f64>,
}

/// Gradients of one dense layer `y = W a + b` with `W: rows x cols`: writes `dW = g a^T`
/// and `db = g` into `out` (layout `[W, b]`) and returns `W^T g`.
fn outer_layer(out: &mut [f64], g: &[f64], a: &[f64], w: &[f64], cols: usize) -> Vec<f64> {
    let rows = g.len();
    let (gw, gb) = out.split_at_mut(rows * cols);
    gb.copy_from_slice(g);
    let mut back = vec![0.0; cols];
    for ((grow, wrow), gi) in gw.chunks_exact_mut(cols).zip(w.chunks_exact(cols)).zip(g) {
        for ((r, aj), (bk, wj)) in grow.iter_mut().zip(a).zip(back.iter_mut().zip(wrow)) {
            *r = gi * aj;
            *bk += gi * wj;
        }
    }
    back
}

pub fn sidecar_path(path: &Path) -> std::path::PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".json");
    s.into()
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Reader<'_> {
    fn take(&mut self, n: usize) -> Result<&[u8]> {
        ensure!(self.pos + n <= self.bytes.len(), "weights file is truncated");
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
}
