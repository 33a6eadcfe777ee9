use std::cell::RefCell;
use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};

use super::{matvec_into, sigmoid, softplus, Real};
use crate::error::{ensure, Result};

#[derive(Clone, Copy, Debug)]
enum Op {
    Leaf,
    Add(usize, usize),
    Sub(usize, usize),
    Mul(usize, usize),
    Div(usize, usize),
    Neg(usize),
    AddConst(usize),
    MulConst(usize, f64),
    Recip(usize),
    Sqrt(usize),
    Tanh(usize),
    Softplus(usize),
    /// matrix node, vector node
    MatVec(usize, usize),
    Index(usize, usize),
    Sum(usize),
}

#[derive(Clone, Copy, Debug)]
struct Node {
    op: Op,
    offset: usize,
    rows: usize,
    cols: usize,
    needs_grad: bool,
}

impl Node {
    fn len(&self) -> usize {
        self.rows * self.cols
    }

    fn range(&self) -> std::ops::Range<usize> {
        self.offset..self.offset + self.len()
    }
}

#[derive(Default)]
struct Inner {
    nodes: Vec<Node>,
    values: Vec<f64>,
}

/// A define-by-run computation record.
///
/// Nodes are appended in evaluation order, which is also a topological order, so the
/// backward pass is a single reverse sweep. Each node holds a dense `rows x cols`
/// block of values; scalars are `1 x 1`, vectors `n x 1`.
#[derive(Default)]
pub struct Tape {
    inner: RefCell<Inner>,
}

/// Handle to a node on a [`Tape`].
#[derive(Clone, Copy)]
pub struct Var<'t> {
    tape: &'t Tape,
    id: usize,
}

impl fmt::Debug for Var<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Var")
            .field("id", &self.id)
            .field("values", &self.values())
            .finish()
    }
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_capacity(nodes: usize, values: usize) -> Self {
        Tape {
            inner: RefCell::new(Inner {
                nodes: Vec::with_capacity(nodes),
                values: Vec::with_capacity(values),
            }),
        }
    }

    pub fn len(&self) -> usize {
        self.inner.borrow().nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Drops all nodes but keeps the allocations, for reuse across iterations.
    pub fn clear(&mut self) {
        let inner = self.inner.get_mut();
        inner.nodes.clear();
        inner.values.clear();
    }

    /// Trainable vector leaf.
    pub fn param(&self, values: &[f64]) -> Var<'_> {
        self.push_leaf(values, values.len(), 1, true)
    }

    /// Trainable row-major matrix leaf.
    pub fn param_matrix(&self, values: &[f64], rows: usize, cols: usize) -> Var<'_> {
        assert_eq!(values.len(), rows * cols, "matrix shape");
        self.push_leaf(values, rows, cols, true)
    }

    /// Non-trainable vector; gradients are not propagated into it.
    pub fn constant(&self, values: &[f64]) -> Var<'_> {
        self.push_leaf(values, values.len(), 1, false)
    }

    pub fn scalar(&self, value: f64) -> Var<'_> {
        self.push_leaf(&[value], 1, 1, true)
    }

    fn push_leaf(&self, values: &[f64], rows: usize, cols: usize, needs_grad: bool) -> Var<'_> {
        let mut inner = self.inner.borrow_mut();
        let offset = inner.values.len();
        inner.values.extend_from_slice(values);
        let id = inner.nodes.len();
        inner.nodes.push(Node {
            op: Op::Leaf,
            offset,
            rows,
            cols,
            needs_grad,
        });
        Var { tape: self, id }
    }

    fn push_with(
        &self,
        op: Op,
        rows: usize,
        cols: usize,
        needs_grad: bool,
        fill: impl FnOnce(&[f64], &mut [f64], &[Node]),
    ) -> Var<'_> {
        let mut guard = self.inner.borrow_mut();
        let inner = &mut *guard;
        let offset = inner.values.len();
        inner.values.resize(offset + rows * cols, 0.0);
        let (done, out) = inner.values.split_at_mut(offset);
        fill(done, out, &inner.nodes);
        let id = inner.nodes.len();
        inner.nodes.push(Node {
            op,
            offset,
            rows,
            cols,
            needs_grad,
        });
        Var { tape: self, id }
    }

    fn node(&self, id: usize) -> Node {
        self.inner.borrow().nodes[id]
    }

    fn unary(&self, a: usize, op: Op, f: impl Fn(f64) -> f64) -> Var<'_> {
        let mut guard = self.inner.borrow_mut();
        let inner = &mut *guard;
        let na = inner.nodes[a];
        let offset = inner.values.len();
        for i in na.range() {
            let v = f(inner.values[i]);
            inner.values.push(v);
        }
        let id = inner.nodes.len();
        inner.nodes.push(Node { op, offset, ..na });
        Var { tape: self, id }
    }

    fn binary(&self, a: usize, b: usize, op: Op, f: impl Fn(f64, f64) -> f64) -> Var<'_> {
        let mut guard = self.inner.borrow_mut();
        let inner = &mut *guard;
        let (na, nb) = (inner.nodes[a], inner.nodes[b]);
        assert_eq!(
            (na.rows, na.cols),
            (nb.rows, nb.cols),
            "elementwise shape mismatch"
        );
        let offset = inner.values.len();
        for i in 0..na.len() {
            let v = f(inner.values[na.offset + i], inner.values[nb.offset + i]);
            inner.values.push(v);
        }
        let id = inner.nodes.len();
        inner.nodes.push(Node {
            op,
            offset,
            needs_grad: na.needs_grad || nb.needs_grad,
            ..na
        });
        Var { tape: self, id }
    }

    /// Reverse sweep from a scalar output. Returns d(output)/d(node) for every node.
    pub fn backward(&self, output: Var<'_>) -> Result<Gradients> {
        let inner = self.inner.borrow();
        let out = inner.nodes[output.id];
        ensure!(
            out.len() == 1,
            "backward requires a scalar output, got a {}x{} node",
            out.rows,
            out.cols
        );
        let vals = &inner.values;
        let mut grads = vec![0.0; vals.len()];
        grads[out.offset] = 1.0;

        for node in inner.nodes[..=output.id].iter().rev() {
            if !node.needs_grad {
                continue;
            }
            let (lo, hi) = grads.split_at_mut(node.offset);
            let g = &hi[..node.len()];
            let y = &vals[node.range()];
            let nodes = &inner.nodes;
            match node.op {
                Op::Leaf => {}
                Op::Add(a, b) => {
                    accumulate(lo, &nodes[a], |i| g[i]);
                    accumulate(lo, &nodes[b], |i| g[i]);
                }
                Op::Sub(a, b) => {
                    accumulate(lo, &nodes[a], |i| g[i]);
                    accumulate(lo, &nodes[b], |i| -g[i]);
                }
                Op::Mul(a, b) => {
                    let (xa, xb) = (&vals[nodes[a].range()], &vals[nodes[b].range()]);
                    accumulate(lo, &nodes[a], |i| g[i] * xb[i]);
                    accumulate(lo, &nodes[b], |i| g[i] * xa[i]);
                }
                Op::Div(a, b) => {
                    let xb = &vals[nodes[b].range()];
                    accumulate(lo, &nodes[a], |i| g[i] / xb[i]);
                    accumulate(lo, &nodes[b], |i| -g[i] * y[i] / xb[i]);
                }
                Op::Neg(a) => accumulate(lo, &nodes[a], |i| -g[i]),
                Op::AddConst(a) => accumulate(lo, &nodes[a], |i| g[i]),
                Op::MulConst(a, c) => accumulate(lo, &nodes[a], |i| g[i] * c),
                Op::Recip(a) => accumulate(lo, &nodes[a], |i| -g[i] * y[i] * y[i]),
                // at sqrt(0) (the kink of a norm) take the minimum-norm subgradient, 0
                Op::Sqrt(a) => accumulate(lo, &nodes[a], |i| {
                    if y[i] == 0.0 {
                        0.0
                    } else {
                        g[i] * 0.5 / y[i]
                    }
                }),
                Op::Tanh(a) => accumulate(lo, &nodes[a], |i| g[i] * (1.0 - y[i] * y[i])),
                Op::Softplus(a) => {
                    let x = &vals[nodes[a].range()];
                    accumulate(lo, &nodes[a], |i| g[i] * sigmoid(x[i]))
                }
                Op::MatVec(w, x) => {
                    let (nw, nx) = (nodes[w], nodes[x]);
                    let cols = nw.cols;
                    let wv = &vals[nw.range()];
                    let xv = &vals[nx.range()];
                    if nw.needs_grad {
                        let gw = &mut lo[nw.range()];
                        for (row, gi) in gw.chunks_exact_mut(cols).zip(g) {
                            if *gi != 0.0 {
                                for (r, xj) in row.iter_mut().zip(xv) {
                                    *r += gi * xj;
                                }
                            }
                        }
                    }
                    if nx.needs_grad {
                        let gx = &mut lo[nx.range()];
                        for (wrow, gi) in wv.chunks_exact(cols).zip(g) {
                            if *gi != 0.0 {
                                for (r, wj) in gx.iter_mut().zip(wrow) {
                                    *r += gi * wj;
                                }
                            }
                        }
                    }
                }
                Op::Index(a, i) => {
                    let na = nodes[a];
                    if na.needs_grad {
                        lo[na.offset + i] += g[0];
                    }
                }
                Op::Sum(a) => accumulate(lo, &nodes[a], |_| g[0]),
            }
        }

        let offsets = inner.nodes.iter().map(|n| (n.offset, n.len())).collect();
        Ok(Gradients { grads, offsets })
    }
}

#[inline]
fn accumulate(grads: &mut [f64], node: &Node, f: impl Fn(usize) -> f64) {
    if !node.needs_grad {
        return;
    }
    for (i, g) in grads[node.range()].iter_mut().enumerate() {
        *g += f(i);
    }
}

/// Result of [`Tape::backward`].
#[derive(Debug)]
pub struct Gradients {
    grads: Vec<f64>,
    offsets: Vec<(usize, usize)>,
}

impl Gradients {
    pub fn wrt(&self, var: Var<'_>) -> &[f64] {
        let (offset, len) = self.offsets[var.id];
        &self.grads[offset..offset + len]
    }

    pub fn wrt_scalar(&self, var: Var<'_>) -> f64 {
        self.wrt(var)[0]
    }
}

impl<'t> Var<'t> {
    pub fn tape(&self) -> &'t Tape {
        self.tape
    }

    pub fn shape(&self) -> (usize, usize) {
        let n = self.tape.node(self.id);
        (n.rows, n.cols)
    }

    pub fn len(&self) -> usize {
        self.tape.node(self.id).len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn values(&self) -> Vec<f64> {
        let inner = self.tape.inner.borrow();
        inner.values[inner.nodes[self.id].range()].to_vec()
    }

    fn same_tape(&self, other: &Var<'_>) {
        assert!(
            std::ptr::eq(self.tape, other.tape),
            "variables belong to different tapes"
        );
    }

    /// Matrix-vector product; `self` is the matrix.
    pub fn matvec(self, x: Var<'t>) -> Var<'t> {
        self.same_tape(&x);
        let (nw, nx) = (self.tape.node(self.id), self.tape.node(x.id));
        assert_eq!(nx.len(), nw.cols, "matvec shape mismatch");
        let needs = nw.needs_grad || nx.needs_grad;
        self.tape
            .push_with(Op::MatVec(self.id, x.id), nw.rows, 1, needs, |vals, out, _| {
                matvec_into(&vals[nw.range()], &vals[nx.range()], nw.rows, nw.cols, out)
            })
    }

    pub fn tanh(self) -> Var<'t> {
        self.tape.unary(self.id, Op::Tanh(self.id), f64::tanh)
    }

    pub fn softplus(self) -> Var<'t> {
        self.tape.unary(self.id, Op::Softplus(self.id), softplus)
    }

    /// Scalar element `i` of a vector node.
    pub fn index(self, i: usize) -> Var<'t> {
        let n = self.tape.node(self.id);
        assert!(i < n.len(), "index {i} out of range for length {}", n.len());
        self.tape
            .push_with(Op::Index(self.id, i), 1, 1, n.needs_grad, |vals, out, _| {
                out[0] = vals[n.offset + i]
            })
    }

    pub fn sum(self) -> Var<'t> {
        let n = self.tape.node(self.id);
        self.tape
            .push_with(Op::Sum(self.id), 1, 1, n.needs_grad, |vals, out, _| {
                out[0] = vals[n.range()].iter().sum()
            })
    }
}

impl Real for Var<'_> {
    fn value(&self) -> f64 {
        let inner = self.tape.inner.borrow();
        let n = inner.nodes[self.id];
        debug_assert_eq!(n.len(), 1, "value() on non-scalar node");
        inner.values[n.offset]
    }

    fn lift(&self, v: f64) -> Self {
        self.tape.push_leaf(&[v], 1, 1, false)
    }

    fn recip(self) -> Self {
        self.tape.unary(self.id, Op::Recip(self.id), |x| 1.0 / x)
    }

    fn sqrt(self) -> Self {
        self.tape.unary(self.id, Op::Sqrt(self.id), f64::sqrt)
    }
}

macro_rules! var_binop {
    ($trait:ident, $method:ident, $op:ident, $f:expr) => {
        impl<'t> $trait for Var<'t> {
            type Output = Var<'t>;
            fn $method(self, rhs: Var<'t>) -> Var<'t> {
                self.same_tape(&rhs);
                self.tape.binary(self.id, rhs.id, Op::$op(self.id, rhs.id), $f)
            }
        }
    };
}

var_binop!(Add, add, Add, |a, b| a + b);
var_binop!(Sub, sub, Sub, |a, b| a - b);
var_binop!(Mul, mul, Mul, |a, b| a * b);
var_binop!(Div, div, Div, |a, b| a / b);

impl<'t> Neg for Var<'t> {
    type Output = Var<'t>;
    fn neg(self) -> Var<'t> {
        self.tape.unary(self.id, Op::Neg(self.id), |x| -x)
    }
}

impl<'t> Add<f64> for Var<'t> {
    type Output = Var<'t>;
    fn add(self, c: f64) -> Var<'t> {
        self.tape.unary(self.id, Op::AddConst(self.id), |x| x + c)
    }
}

impl<'t> Sub<f64> for Var<'t> {
    type Output = Var<'t>;
    fn sub(self, c: f64) -> Var<'t> {
        self.tape.unary(self.id, Op::AddConst(self.id), |x| x - c)
    }
}

impl<'t> Mul<f64> for Var<'t> {
    type Output = Var<'t>;
    fn mul(self, c: f64) -> Var<'t> {
        self.tape.unary(self.id, Op::MulConst(self.id, c), |x| x * c)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_gradient_is_one() {
        let tape = Tape::new();
        let w = tape.scalar(3.5);
        let g = tape.backward(w).unwrap();
        assert_eq!(g.wrt_scalar(w), 1.0);
    }

    #[test]
    fn linear_layer_gradients() {
        let tape = Tape::new();
        let w = tape.scalar(0.7);
        let b = tape.scalar(-1.2);
        let f = w * 2.0 + b;
        let g = tape.backward(f).unwrap();
        assert_eq!(g.wrt_scalar(w), 2.0);
        assert_eq!(g.wrt_scalar(b), 1.0);
    }

    #[test]
    fn backward_rejects_vector_output() {
        let tape = Tape::new();
        let v = tape.param(&[1.0, 2.0]);
        let err = tape.backward(v.tanh()).unwrap_err();
        assert!(err.to_string().contains("scalar"));
    }

    #[test]
    fn reused_variable_accumulates() {
        // f = x*x + x  => f' = 2x + 1
        let tape = Tape::new();
        let x = tape.scalar(1.5);
        let f = x * x + x;
        assert_eq!(tape.backward(f).unwrap().wrt_scalar(x), 4.0);
    }

    #[test]
    fn scalar_ops_match_finite_differences() {
        let eval = |x: f64| -> f64 {
            let t = Tape::new();
            let v = t.scalar(x);
            (((v * v + 1.0).sqrt() / (v - 5.0)).recip() * 0.3 - v).value()
        };
        let x0 = 0.8;
        let tape = Tape::new();
        let v = tape.scalar(x0);
        let f = ((v * v + 1.0).sqrt() / (v - 5.0)).recip() * 0.3 - v;
        let g = tape.backward(f).unwrap().wrt_scalar(v);
        let h = 1e-6;
        let fd = (eval(x0 + h) - eval(x0 - h)) / (2.0 * h);
        assert!((g - fd).abs() < 1e-7, "{g} vs {fd}");
    }

    #[test]
    fn matvec_tanh_softplus_gradients() {
        let w0 = [0.3, -0.2, 0.5, 0.1, 0.4, -0.6];
        let x0 = [1.0, -2.0, 0.5];
        let loss = |w: &[f64], x: &[f64]| -> f64 {
            let t = Tape::new();
            let w = t.param_matrix(w, 2, 3);
            let x = t.param(x);
            w.matvec(x).tanh().softplus().sum().value()
        };
        let tape = Tape::new();
        let w = tape.param_matrix(&w0, 2, 3);
        let x = tape.param(&x0);
        let out = w.matvec(x).tanh().softplus().sum();
        let g = tape.backward(out).unwrap();
        let h = 1e-6;
        for i in 0..6 {
            let (mut p, mut m) = (w0, w0);
            p[i] += h;
            m[i] -= h;
            let fd = (loss(&p, &x0) - loss(&m, &x0)) / (2.0 * h);
            assert!((g.wrt(w)[i] - fd).abs() < 1e-8);
        }
        for i in 0..3 {
            let (mut p, mut m) = (x0, x0);
            p[i] += h;
            m[i] -= h;
            let fd = (loss(&w0, &p) - loss(&w0, &m)) / (2.0 * h);
            assert!((g.wrt(x)[i] - fd).abs() < 1e-8);
        }
    }

    #[test]
    fn constants_receive_no_gradient() {
        let tape = Tape::new();
        let w = tape.param_matrix(&[1.0, 2.0], 1, 2);
        let x = tape.constant(&[3.0, 4.0]);
        let y = w.matvec(x).sum();
        let g = tape.backward(y).unwrap();
        assert_eq!(g.wrt(w), &[3.0, 4.0]);
        assert_eq!(g.wrt(x), &[0.0, 0.0]);
    }
}
