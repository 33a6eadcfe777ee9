//! Reverse-mode differentiation and optimization.
//!
//! [`Tape`] records a computation as it runs (define-by-run) and replays it backwards.
//! Values are stored in a single arena, so scalar nodes are as cheap as a `f64` push
//! and dense matrix-vector products are single nodes.
//!
//! Code that should run both on plain floats and on the tape is written against
//! [`Real`].

mod adam;
mod real;
mod tape;

pub use adam::{clip_global_norm, AdamConfig, AdamState};
pub use real::Real;
pub use tape::{Gradients, Tape, Var};

/// Numerically stable `ln(1 + e^x)`.
pub fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

/// Derivative of [`softplus`].
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Inverse of [`softplus`] for `y > 0`.
pub fn softplus_inv(y: f64) -> f64 {
    // ln(e^y - 1), rewritten to avoid overflow for large y
    y + (-(-y).exp_m1()).ln()
}

/// `out[i] = sum_j w[i, j] * x[j]` for a row-major `rows x cols` matrix.
///
/// Shared by the tape and the plain forward pass so both produce identical bits.
pub fn matvec_into(w: &[f64], x: &[f64], rows: usize, cols: usize, out: &mut [f64]) {
    debug_assert_eq!(w.len(), rows * cols);
    debug_assert_eq!(x.len(), cols);
    for (o, row) in out.iter_mut().zip(w.chunks_exact(cols)) {
        *o = dot(row, x);
    }
}

/// Dot product with four interleaved accumulators, combined as `(s0 + s1) + (s2 + s3)`
/// plus the tail. The order is fixed, so results are deterministic.
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [0.0f64; 4];
    let (ca, cb) = (a.chunks_exact(4), b.chunks_exact(4));
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        acc[0] += x[0] * y[0];
        acc[1] += x[1] * y[1];
        acc[2] += x[2] * y[2];
        acc[3] += x[3] * y[3];
    }
    let mut s = (acc[0] + acc[1]) + (acc[2] + acc[3]);
    for (x, y) in ra.iter().zip(rb) {
        s += x * y;
    }
    s
}
