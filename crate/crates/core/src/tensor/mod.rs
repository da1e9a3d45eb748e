//! Dense f64 tensors with reverse-mode automatic differentiation.
//!
//! A [`Tape`] owns every tensor created during one forward pass and records
//! the primitive operations that produced them. [`Tape::backward`] replays the
//! record in reverse, accumulating exact adjoints into the gradient buffers of
//! all `requires_grad` ancestors. The tape is rebuilt from scratch for every
//! training step; nothing is cached across steps.
//!
//! All values are 64-bit floats in row-major order. Tensors that do not
//! require gradients never receive a gradient buffer.

pub mod optim;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum TensorError {
    #[error("{op}: shape mismatch between {lhs:?} and {rhs:?}")]
    ShapeMismatch {
        op: &'static str,
        lhs: Vec<usize>,
        rhs: Vec<usize>,
    },
    #[error("{op}: invalid argument: {msg}")]
    InvalidArgument { op: &'static str, msg: String },
    #[error("backward requires a scalar output, got shape {shape:?}")]
    NonScalarBackward { shape: Vec<usize> },
}

/// Handle to a tensor recorded on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(usize);

/// How a broadcast maps the source shape onto the target shape.
#[derive(Debug, Clone, Copy)]
enum BroadcastKind {
    /// scalar -> any shape
    Scalar,
    /// row vector `[n]` or `[1, n]` -> `[m, n]`
    Rows { m: usize, n: usize },
    /// column vector `[m, 1]` -> `[m, n]`
    Cols { m: usize, n: usize },
}

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    Matmul { a: usize, b: usize, m: usize, k: usize, n: usize },
    Transpose { x: usize, rows: usize, cols: usize },
    Add { a: usize, b: usize },
    Sub { a: usize, b: usize },
    Mul { a: usize, b: usize },
    Scale { x: usize, c: f64 },
    Relu { x: usize },
    Tanh { x: usize },
    Exp { x: usize },
    Log { x: usize },
    Sin { x: usize },
    Softmax { x: usize, row_len: usize },
    Sum { x: usize },
    Mean { x: usize },
    ConcatRows { parts: Vec<usize> },
    SliceCols { x: usize, start: usize, len: usize, last: usize },
    Broadcast { x: usize, kind: BroadcastKind },
    SquaredError { a: usize, b: usize },
    Reshape { x: usize },
}

struct Node {
    values: Vec<f64>,
    shape: Vec<usize>,
    requires_grad: bool,
    grad: Option<Vec<f64>>,
    op: Op,
}

/// Record of one forward pass. Ops append nodes; `backward` walks them in
/// reverse. Confined to a single thread.
#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

fn numel(shape: &[usize]) -> usize {
    shape.iter().product()
}

/// `a` is `m x k`, `b` is `k x n`, returns `m x n`. ikj loop order.
pub(crate) fn mat_mul(a: &[f64], b: &[f64], m: usize, k: usize, n: usize) -> Vec<f64> {
    let mut out = vec![0.0; m * n];
    for i in 0..m {
        let arow = &a[i * k..(i + 1) * k];
        let orow = &mut out[i * n..(i + 1) * n];
        for (p, &av) in arow.iter().enumerate() {
            if av == 0.0 {
                continue;
            }
            let brow = &b[p * n..(p + 1) * n];
            for j in 0..n {
                orow[j] += av * brow[j];
            }
        }
    }
    out
}

/// `a` is `m x k`, `b` is `n x k`, returns `a * b^T` of shape `m x n`.
fn mat_mul_nt(a: &[f64], b: &[f64], m: usize, k: usize, n: usize) -> Vec<f64> {
    let mut out = vec![0.0; m * n];
    for i in 0..m {
        let arow = &a[i * k..(i + 1) * k];
        for j in 0..n {
            let brow = &b[j * k..(j + 1) * k];
            let mut s = 0.0;
            for p in 0..k {
                s += arow[p] * brow[p];
            }
            out[i * n + j] = s;
        }
    }
    out
}

/// `a` is `k x m`, `b` is `k x n`, returns `a^T * b` of shape `m x n`.
fn mat_mul_tn(a: &[f64], b: &[f64], m: usize, k: usize, n: usize) -> Vec<f64> {
    let mut out = vec![0.0; m * n];
    for p in 0..k {
        let arow = &a[p * m..(p + 1) * m];
        let brow = &b[p * n..(p + 1) * n];
        for i in 0..m {
            let av = arow[i];
            if av == 0.0 {
                continue;
            }
            let orow = &mut out[i * n..(i + 1) * n];
            for j in 0..n {
                orow[j] += av * brow[j];
            }
        }
    }
    out
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Records a leaf tensor. Panics if `values.len()` does not match `shape`.
    pub fn leaf(&mut self, values: Vec<f64>, shape: Vec<usize>, requires_grad: bool) -> Var {
        assert_eq!(
            values.len(),
            numel(&shape),
            "leaf: {} values for shape {:?}",
            values.len(),
            shape
        );
        self.push(values, shape, requires_grad, Op::Leaf)
    }

    /// Leaf that never tracks gradients.
    pub fn constant(&mut self, values: Vec<f64>, shape: Vec<usize>) -> Var {
        self.leaf(values, shape, false)
    }

    pub fn scalar(&mut self, v: f64) -> Var {
        self.constant(vec![v], vec![1])
    }

    fn push(&mut self, values: Vec<f64>, shape: Vec<usize>, requires_grad: bool, op: Op) -> Var {
        // Results only carry a backward record when some input requires grad.
        let op = if requires_grad { op } else { Op::Leaf };
        self.nodes.push(Node {
            values,
            shape,
            requires_grad,
            grad: None,
            op,
        });
        Var(self.nodes.len() - 1)
    }

    pub fn values(&self, v: Var) -> &[f64] {
        &self.nodes[v.0].values
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        &self.nodes[v.0].shape
    }

    pub fn item(&self, v: Var) -> f64 {
        debug_assert_eq!(numel(&self.nodes[v.0].shape), 1);
        self.nodes[v.0].values[0]
    }

    /// Gradient buffer of `v`, populated by a prior `backward` call.
    pub fn grad(&self, v: Var) -> Option<&[f64]> {
        self.nodes[v.0].grad.as_deref()
    }

    pub fn requires_grad(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    fn rg(&self, a: usize, b: usize) -> bool {
        self.nodes[a].requires_grad || self.nodes[b].requires_grad
    }

    // ── forward ops ─────────────────────────────────────────────────────

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var, TensorError> {
        let (sa, sb) = (&self.nodes[a.0].shape, &self.nodes[b.0].shape);
        if sa.len() != 2 || sb.len() != 2 || sa[1] != sb[0] {
            return Err(TensorError::ShapeMismatch {
                op: "matmul",
                lhs: sa.clone(),
                rhs: sb.clone(),
            });
        }
        let (m, k, n) = (sa[0], sa[1], sb[1]);
        let out = mat_mul(&self.nodes[a.0].values, &self.nodes[b.0].values, m, k, n);
        let rg = self.rg(a.0, b.0);
        Ok(self.push(out, vec![m, n], rg, Op::Matmul { a: a.0, b: b.0, m, k, n }))
    }

    pub fn transpose(&mut self, x: Var) -> Result<Var, TensorError> {
        let s = &self.nodes[x.0].shape;
        if s.len() != 2 {
            return Err(TensorError::InvalidArgument {
                op: "transpose",
                msg: format!("expected 2-d tensor, got shape {s:?}"),
            });
        }
        let (rows, cols) = (s[0], s[1]);
        let src = &self.nodes[x.0].values;
        let mut out = vec![0.0; rows * cols];
        for i in 0..rows {
            for j in 0..cols {
                out[j * rows + i] = src[i * cols + j];
            }
        }
        let rg = self.nodes[x.0].requires_grad;
        Ok(self.push(out, vec![cols, rows], rg, Op::Transpose { x: x.0, rows, cols }))
    }

    fn zip_op(
        &mut self,
        name: &'static str,
        a: Var,
        b: Var,
        f: impl Fn(f64, f64) -> f64,
        op: Op,
    ) -> Result<Var, TensorError> {
        if self.nodes[a.0].shape != self.nodes[b.0].shape {
            return Err(TensorError::ShapeMismatch {
                op: name,
                lhs: self.nodes[a.0].shape.clone(),
                rhs: self.nodes[b.0].shape.clone(),
            });
        }
        let out: Vec<f64> = self.nodes[a.0]
            .values
            .iter()
            .zip(&self.nodes[b.0].values)
            .map(|(&x, &y)| f(x, y))
            .collect();
        let shape = self.nodes[a.0].shape.clone();
        let rg = self.rg(a.0, b.0);
        Ok(self.push(out, shape, rg, op))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var, TensorError> {
        self.zip_op("add", a, b, |x, y| x + y, Op::Add { a: a.0, b: b.0 })
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var, TensorError> {
        self.zip_op("sub", a, b, |x, y| x - y, Op::Sub { a: a.0, b: b.0 })
    }

    /// Elementwise product.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var, TensorError> {
        self.zip_op("mul", a, b, |x, y| x * y, Op::Mul { a: a.0, b: b.0 })
    }

    /// Multiplication by a compile-time constant (not a tracked tensor).
    pub fn scale(&mut self, x: Var, c: f64) -> Var {
        let out: Vec<f64> = self.nodes[x.0].values.iter().map(|&v| v * c).collect();
        let shape = self.nodes[x.0].shape.clone();
        let rg = self.nodes[x.0].requires_grad;
        self.push(out, shape, rg, Op::Scale { x: x.0, c })
    }

    fn map_op(&mut self, x: Var, f: impl Fn(f64) -> f64, op: Op) -> Var {
        let out: Vec<f64> = self.nodes[x.0].values.iter().map(|&v| f(v)).collect();
        let shape = self.nodes[x.0].shape.clone();
        let rg = self.nodes[x.0].requires_grad;
        self.push(out, shape, rg, op)
    }

    pub fn relu(&mut self, x: Var) -> Var {
        self.map_op(x, |v| v.max(0.0), Op::Relu { x: x.0 })
    }

    pub fn tanh(&mut self, x: Var) -> Var {
        self.map_op(x, f64::tanh, Op::Tanh { x: x.0 })
    }

    pub fn exp(&mut self, x: Var) -> Var {
        self.map_op(x, f64::exp, Op::Exp { x: x.0 })
    }

    pub fn log(&mut self, x: Var) -> Var {
        self.map_op(x, f64::ln, Op::Log { x: x.0 })
    }

    pub fn sin(&mut self, x: Var) -> Var {
        self.map_op(x, f64::sin, Op::Sin { x: x.0 })
    }

    /// Softmax over the last axis, numerically stabilized by the row maximum.
    pub fn softmax(&mut self, x: Var) -> Var {
        let shape = self.nodes[x.0].shape.clone();
        let row_len = *shape.last().expect("softmax: empty shape");
        let src = &self.nodes[x.0].values;
        let mut out = vec![0.0; src.len()];
        for (orow, srow) in out.chunks_mut(row_len).zip(src.chunks(row_len)) {
            let mx = srow.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let mut z = 0.0;
            for (o, &s) in orow.iter_mut().zip(srow) {
                *o = (s - mx).exp();
                z += *o;
            }
            for o in orow.iter_mut() {
                *o /= z;
            }
        }
        let rg = self.nodes[x.0].requires_grad;
        self.push(out, shape, rg, Op::Softmax { x: x.0, row_len })
    }

    /// Sum of all entries; scalar result.
    pub fn sum(&mut self, x: Var) -> Var {
        let s: f64 = self.nodes[x.0].values.iter().sum();
        let rg = self.nodes[x.0].requires_grad;
        self.push(vec![s], vec![1], rg, Op::Sum { x: x.0 })
    }

    /// Mean of all entries; scalar result.
    pub fn mean(&mut self, x: Var) -> Var {
        let n = self.nodes[x.0].values.len() as f64;
        let s: f64 = self.nodes[x.0].values.iter().sum();
        let rg = self.nodes[x.0].requires_grad;
        self.push(vec![s / n], vec![1], rg, Op::Mean { x: x.0 })
    }

    /// Concatenates 2-d tensors (or 1-d row vectors) along axis 0. All parts
    /// must share the trailing dimension.
    pub fn concat_rows(&mut self, parts: &[Var]) -> Result<Var, TensorError> {
        if parts.is_empty() {
            return Err(TensorError::InvalidArgument {
                op: "concat",
                msg: "no tensors to concatenate".into(),
            });
        }
        let width = |s: &[usize]| if s.len() == 1 { s[0] } else { s[1] };
        let w = width(&self.nodes[parts[0].0].shape);
        let mut rows = 0;
        for p in parts {
            let s = &self.nodes[p.0].shape;
            if s.len() > 2 || width(s) != w {
                return Err(TensorError::ShapeMismatch {
                    op: "concat",
                    lhs: self.nodes[parts[0].0].shape.clone(),
                    rhs: s.clone(),
                });
            }
            rows += if s.len() == 1 { 1 } else { s[0] };
        }
        let mut out = Vec::with_capacity(rows * w);
        let mut rg = false;
        for p in parts {
            out.extend_from_slice(&self.nodes[p.0].values);
            rg |= self.nodes[p.0].requires_grad;
        }
        let ids: Vec<usize> = parts.iter().map(|p| p.0).collect();
        Ok(self.push(out, vec![rows, w], rg, Op::ConcatRows { parts: ids }))
    }

    /// Slice `[start, start+len)` of the last axis.
    pub fn slice_cols(&mut self, x: Var, start: usize, len: usize) -> Result<Var, TensorError> {
        let shape = self.nodes[x.0].shape.clone();
        let last = *shape.last().expect("slice: empty shape");
        if start + len > last || len == 0 {
            return Err(TensorError::InvalidArgument {
                op: "slice",
                msg: format!("range {start}..{} out of last axis {last}", start + len),
            });
        }
        let rows = numel(&shape) / last;
        let src = &self.nodes[x.0].values;
        let mut out = Vec::with_capacity(rows * len);
        for r in 0..rows {
            out.extend_from_slice(&src[r * last + start..r * last + start + len]);
        }
        let mut new_shape = shape.clone();
        *new_shape.last_mut().unwrap() = len;
        let rg = self.nodes[x.0].requires_grad;
        Ok(self.push(out, new_shape, rg, Op::SliceCols { x: x.0, start, len, last }))
    }

    /// Broadcast to `target` shape. Supported: scalar -> any, `[n]`/`[1,n]`
    /// -> `[m,n]` (row repeat), `[m,1]` -> `[m,n]` (column repeat).
    pub fn broadcast(&mut self, x: Var, target: &[usize]) -> Result<Var, TensorError> {
        let s = self.nodes[x.0].shape.clone();
        let src = &self.nodes[x.0].values;
        let tn = numel(target);
        let (out, kind) = if src.len() == 1 {
            (vec![src[0]; tn], BroadcastKind::Scalar)
        } else if target.len() == 2 {
            let (m, n) = (target[0], target[1]);
            let is_row = (s.len() == 1 && s[0] == n) || (s == [1, n]);
            let is_col = s.len() == 2 && s[0] == m && s[1] == 1;
            if is_row {
                let mut out = Vec::with_capacity(m * n);
                for _ in 0..m {
                    out.extend_from_slice(src);
                }
                (out, BroadcastKind::Rows { m, n })
            } else if is_col {
                let mut out = Vec::with_capacity(m * n);
                for r in 0..m {
                    out.extend(std::iter::repeat(src[r]).take(n));
                }
                (out, BroadcastKind::Cols { m, n })
            } else {
                return Err(TensorError::ShapeMismatch {
                    op: "broadcast",
                    lhs: s,
                    rhs: target.to_vec(),
                });
            }
        } else {
            return Err(TensorError::ShapeMismatch {
                op: "broadcast",
                lhs: s,
                rhs: target.to_vec(),
            });
        };
        let rg = self.nodes[x.0].requires_grad;
        Ok(self.push(out, target.to_vec(), rg, Op::Broadcast { x: x.0, kind }))
    }

    /// Sum of squared differences; scalar result.
    pub fn squared_error(&mut self, a: Var, b: Var) -> Result<Var, TensorError> {
        if self.nodes[a.0].shape != self.nodes[b.0].shape {
            return Err(TensorError::ShapeMismatch {
                op: "squared-error",
                lhs: self.nodes[a.0].shape.clone(),
                rhs: self.nodes[b.0].shape.clone(),
            });
        }
        let s: f64 = self.nodes[a.0]
            .values
            .iter()
            .zip(&self.nodes[b.0].values)
            .map(|(&x, &y)| (x - y) * (x - y))
            .sum();
        let rg = self.rg(a.0, b.0);
        Ok(self.push(vec![s], vec![1], rg, Op::SquaredError { a: a.0, b: b.0 }))
    }

    /// Reinterpret the value buffer under a new shape of equal element count.
    pub fn reshape(&mut self, x: Var, new_shape: Vec<usize>) -> Result<Var, TensorError> {
        if numel(&new_shape) != self.nodes[x.0].values.len() {
            return Err(TensorError::ShapeMismatch {
                op: "reshape",
                lhs: self.nodes[x.0].shape.clone(),
                rhs: new_shape,
            });
        }
        let out = self.nodes[x.0].values.clone();
        let rg = self.nodes[x.0].requires_grad;
        Ok(self.push(out, new_shape, rg, Op::Reshape { x: x.0 }))
    }

    // ── backward ────────────────────────────────────────────────────────

    fn add_grad(&mut self, idx: usize, contrib: &[f64]) {
        if !self.nodes[idx].requires_grad {
            return;
        }
        let n = self.nodes[idx].values.len();
        let g = self.nodes[idx].grad.get_or_insert_with(|| vec![0.0; n]);
        for (gi, ci) in g.iter_mut().zip(contrib) {
            *gi += ci;
        }
    }

    /// Reverse pass from a scalar output. Populates the gradient buffer of
    /// every `requires_grad` ancestor with its exact adjoint.
    pub fn backward(&mut self, out: Var) -> Result<(), TensorError> {
        if self.nodes.is_empty() {
            return Err(TensorError::InvalidArgument {
                op: "backward",
                msg: "empty tape".into(),
            });
        }
        if numel(&self.nodes[out.0].shape) != 1 {
            return Err(TensorError::NonScalarBackward {
                shape: self.nodes[out.0].shape.clone(),
            });
        }
        if !self.nodes[out.0].requires_grad {
            return Ok(()); // nothing reachable tracks gradients
        }
        self.nodes[out.0].grad = Some(vec![1.0]);

        for idx in (0..=out.0).rev() {
            let Some(g) = self.nodes[idx].grad.clone() else {
                continue;
            };
            let op = self.nodes[idx].op.clone();
            match op {
                Op::Leaf => {}
                Op::Matmul { a, b, m, k, n } => {
                    let da = mat_mul_nt(&g, &self.nodes[b].values, m, n, k);
                    let db = mat_mul_tn(&self.nodes[a].values, &g, k, m, n);
                    self.add_grad(a, &da);
                    self.add_grad(b, &db);
                }
                Op::Transpose { x, rows, cols } => {
                    // g has shape cols x rows; scatter back
                    let mut dx = vec![0.0; rows * cols];
                    for j in 0..cols {
                        for i in 0..rows {
                            dx[i * cols + j] = g[j * rows + i];
                        }
                    }
                    self.add_grad(x, &dx);
                }
                Op::Add { a, b } => {
                    self.add_grad(a, &g);
                    self.add_grad(b, &g);
                }
                Op::Sub { a, b } => {
                    self.add_grad(a, &g);
                    let neg: Vec<f64> = g.iter().map(|&v| -v).collect();
                    self.add_grad(b, &neg);
                }
                Op::Mul { a, b } => {
                    let da: Vec<f64> =
                        g.iter().zip(&self.nodes[b].values).map(|(&gi, &bv)| gi * bv).collect();
                    let db: Vec<f64> =
                        g.iter().zip(&self.nodes[a].values).map(|(&gi, &av)| gi * av).collect();
                    self.add_grad(a, &da);
                    self.add_grad(b, &db);
                }
                Op::Scale { x, c } => {
                    let dx: Vec<f64> = g.iter().map(|&v| v * c).collect();
                    self.add_grad(x, &dx);
                }
                Op::Relu { x } => {
                    let dx: Vec<f64> = g
                        .iter()
                        .zip(&self.nodes[x].values)
                        .map(|(&gi, &xv)| if xv > 0.0 { gi } else { 0.0 })
                        .collect();
                    self.add_grad(x, &dx);
                }
                Op::Tanh { x } => {
                    let dx: Vec<f64> = g
                        .iter()
                        .zip(&self.nodes[idx].values)
                        .map(|(&gi, &y)| gi * (1.0 - y * y))
                        .collect();
                    self.add_grad(x, &dx);
                }
                Op::Exp { x } => {
                    let dx: Vec<f64> = g
                        .iter()
                        .zip(&self.nodes[idx].values)
                        .map(|(&gi, &y)| gi * y)
                        .collect();
                    self.add_grad(x, &dx);
                }
                Op::Log { x } => {
                    let dx: Vec<f64> = g
                        .iter()
                        .zip(&self.nodes[x].values)
                        .map(|(&gi, &xv)| gi / xv)
                        .collect();
                    self.add_grad(x, &dx);
                }
                Op::Sin { x } => {
                    let dx: Vec<f64> = g
                        .iter()
                        .zip(&self.nodes[x].values)
                        .map(|(&gi, &xv)| gi * xv.cos())
                        .collect();
                    self.add_grad(x, &dx);
                }
                Op::Softmax { x, row_len } => {
                    let y = &self.nodes[idx].values;
                    let mut dx = vec![0.0; y.len()];
                    for r in 0..y.len() / row_len {
                        let ys = &y[r * row_len..(r + 1) * row_len];
                        let gs = &g[r * row_len..(r + 1) * row_len];
                        let dot: f64 = ys.iter().zip(gs).map(|(&yi, &gi)| yi * gi).sum();
                        for j in 0..row_len {
                            dx[r * row_len + j] = ys[j] * (gs[j] - dot);
                        }
                    }
                    self.add_grad(x, &dx);
                }
                Op::Sum { x } => {
                    let dx = vec![g[0]; self.nodes[x].values.len()];
                    self.add_grad(x, &dx);
                }
                Op::Mean { x } => {
                    let n = self.nodes[x].values.len();
                    let dx = vec![g[0] / n as f64; n];
                    self.add_grad(x, &dx);
                }
                Op::ConcatRows { parts } => {
                    let mut off = 0;
                    for p in parts {
                        let n = self.nodes[p].values.len();
                        let dx = g[off..off + n].to_vec();
                        self.add_grad(p, &dx);
                        off += n;
                    }
                }
                Op::SliceCols { x, start, len, last } => {
                    let mut dx = vec![0.0; self.nodes[x].values.len()];
                    let rows = dx.len() / last;
                    for r in 0..rows {
                        dx[r * last + start..r * last + start + len]
                            .copy_from_slice(&g[r * len..(r + 1) * len]);
                    }
                    self.add_grad(x, &dx);
                }
                Op::Broadcast { x, kind } => {
                    let dx = match kind {
                        BroadcastKind::Scalar => vec![g.iter().sum::<f64>()],
                        BroadcastKind::Rows { m, n } => {
                            let mut dx = vec![0.0; n];
                            for r in 0..m {
                                for j in 0..n {
                                    dx[j] += g[r * n + j];
                                }
                            }
                            dx
                        }
                        BroadcastKind::Cols { m, n } => {
                            let mut dx = vec![0.0; m];
                            for r in 0..m {
                                dx[r] = g[r * n..(r + 1) * n].iter().sum();
                            }
                            dx
                        }
                    };
                    self.add_grad(x, &dx);
                }
                Op::SquaredError { a, b } => {
                    let da: Vec<f64> = self.nodes[a]
                        .values
                        .iter()
                        .zip(&self.nodes[b].values)
                        .map(|(&x, &y)| 2.0 * (x - y) * g[0])
                        .collect();
                    let db: Vec<f64> = da.iter().map(|&v| -v).collect();
                    self.add_grad(a, &da);
                    self.add_grad(b, &db);
                }
                Op::Reshape { x } => {
                    self.add_grad(x, &g);
                }
            }
        }
        Ok(())
    }
}
