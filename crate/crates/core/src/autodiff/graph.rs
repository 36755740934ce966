use std::fmt;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use super::tensor::{gemm, Tensor};
use crate::error::{Error, Result};

static NEXT_GRAPH_ID: AtomicU64 = AtomicU64::new(1);

/// Handle to a node of a particular [`Graph`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var {
    graph: u64,
    pub(crate) index: usize,
}

impl Var {
    pub fn index(&self) -> usize {
        self.index
    }
}

/// Primitive recorded on the graph. Operands are node indices, always lower
/// than the index of the node that holds the op.
#[derive(Clone, Debug)]
pub(crate) enum Op {
    /// Placeholder whose value is supplied on replay.
    Input,
    /// Parameter or constant; keeps its value across replays.
    Leaf,
    MatMul {
        a: usize,
        b: usize,
        trans_a: bool,
        trans_b: bool,
    },
    Add(usize, usize),
    Sub(usize, usize),
    Mul(usize, usize),
    /// `[m,n] + [1,n]`, the bias add of an affine layer.
    AddRow { a: usize, row: usize },
    /// `[m,n] -> [1,n]`
    SumRows(usize),
    /// `[1,n] -> [rows,n]`
    BroadcastRows { a: usize, rows: usize },
    /// `[m,n] -> [m,1]`
    SumCols(usize),
    /// `[m,1] -> [m,cols]`
    BroadcastCols { a: usize, cols: usize },
    Scale(usize, f64),
    AddScalar(usize, f64),
    Tanh(usize),
    /// `g * (1 - y^2)`: the adjoint of `Tanh` given its output `y`.
    TanhGrad { y: usize, g: usize },
    Abs(usize),
    /// Sign of the operand; carries no gradient.
    Sign(usize),
    Square(usize),
    Sqrt(usize),
    /// `1/x`, with `1/0` defined as 0.
    SafeRecip(usize),
    Sum(usize),
    Mean(usize),
    /// One-element tensor repeated to `shape`.
    Broadcast { a: usize, shape: Vec<usize> },
    Concat { a: usize, b: usize, axis: usize },
    Slice {
        a: usize,
        axis: usize,
        start: usize,
        len: usize,
    },
    /// Zero tensor of extent `full` along `axis` with the operand written
    /// at `start`; the adjoint of `Slice`.
    PadSlice {
        a: usize,
        axis: usize,
        start: usize,
        full: usize,
    },
    /// `out[i] = a[index[i]]` over flat storage.
    Gather {
        a: usize,
        index: Arc<[usize]>,
        shape: Vec<usize>,
    },
    /// `out[index[i]] += a[i]` into zeros of `shape`; the adjoint of `Gather`.
    ScatterAdd {
        a: usize,
        index: Arc<[usize]>,
        shape: Vec<usize>,
    },
    /// Row-wise `w_i * a_i + (1 - w_i) * b_i`.
    Interpolate {
        a: usize,
        b: usize,
        weights: Arc<[f64]>,
    },
    /// Row-wise `w_i * a_i`.
    RowScale { a: usize, weights: Arc<[f64]> },
}

impl Op {
    pub(crate) fn operands(&self) -> [Option<usize>; 2] {
        use Op::*;
        match *self {
            Input | Leaf => [None, None],
            MatMul { a, b, .. }
            | Add(a, b)
            | Sub(a, b)
            | Mul(a, b)
            | AddRow { a, row: b }
            | Concat { a, b, .. }
            | TanhGrad { y: a, g: b }
            | Interpolate { a, b, .. } => [Some(a), Some(b)],
            SumRows(a)
            | BroadcastRows { a, .. }
            | SumCols(a)
            | BroadcastCols { a, .. }
            | Scale(a, _)
            | AddScalar(a, _)
            | Tanh(a)
            | Abs(a)
            | Sign(a)
            | Square(a)
            | Sqrt(a)
            | SafeRecip(a)
            | Sum(a)
            | Mean(a)
            | Broadcast { a, .. }
            | Slice { a, .. }
            | PadSlice { a, .. }
            | Gather { a, .. }
            | ScatterAdd { a, .. }
            | RowScale { a, .. } => [Some(a), None],
        }
    }

    fn name(&self) -> &'static str {
        use Op::*;
        match self {
            Input => "input",
            Leaf => "leaf",
            MatMul { .. } => "matmul",
            Add(..) => "add",
            Sub(..) => "sub",
            Mul(..) => "mul",
            AddRow { .. } => "add_row",
            SumRows(_) => "sum_rows",
            BroadcastRows { .. } => "broadcast_rows",
            SumCols(_) => "sum_cols",
            BroadcastCols { .. } => "broadcast_cols",
            Scale(..) => "scale",
            AddScalar(..) => "add_scalar",
            Tanh(_) => "tanh",
            TanhGrad { .. } => "tanh_grad",
            Abs(_) => "abs",
            Sign(_) => "sign",
            Square(_) => "square",
            Sqrt(_) => "sqrt",
            SafeRecip(_) => "safe_recip",
            Sum(_) => "sum",
            Mean(_) => "mean",
            Broadcast { .. } => "broadcast",
            Concat { .. } => "concat",
            Slice { .. } => "slice",
            PadSlice { .. } => "pad_slice",
            Gather { .. } => "gather",
            ScatterAdd { .. } => "scatter_add",
            Interpolate { .. } => "interpolate",
            RowScale { .. } => "row_scale",
        }
    }
}

#[derive(Clone, Debug)]
struct Node {
    op: Op,
    value: Tensor,
    label: Option<String>,
}

/// Define-by-run computation graph.
///
/// Every op is evaluated eagerly when it is recorded, and the record can be
/// replayed with new input values through [`Graph::forward`]. Gradients
/// produced by [`Graph::backward`] are themselves recorded as ordinary
/// nodes, so they can be differentiated again.
#[derive(Clone)]
pub struct Graph {
    id: u64,
    nodes: Vec<Node>,
    inputs: Vec<usize>,
}

impl Default for Graph {
    fn default() -> Self {
        Self::new()
    }
}

impl fmt::Debug for Graph {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Graph")
            .field("id", &self.id)
            .field("nodes", &self.nodes.len())
            .field("inputs", &self.inputs.len())
            .finish()
    }
}

impl Graph {
    pub fn new() -> Self {
        Self {
            id: NEXT_GRAPH_ID.fetch_add(1, Ordering::Relaxed),
            nodes: Vec::new(),
            inputs: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn var(&self, index: usize) -> Var {
        Var {
            graph: self.id,
            index,
        }
    }

    pub(crate) fn check(&self, v: Var) -> Result<usize> {
        if v.graph != self.id || v.index >= self.nodes.len() {
            return Err(Error::Lookup(format!(
                "node #{} of graph {} is not part of graph {}",
                v.index, v.graph, self.id
            )));
        }
        Ok(v.index)
    }

    /// Current value of a node.
    pub fn value(&self, v: Var) -> Result<&Tensor> {
        let i = self.check(v)?;
        Ok(&self.nodes[i].value)
    }

    pub(crate) fn value_at(&self, i: usize) -> &Tensor {
        &self.nodes[i].value
    }

    pub(crate) fn op_at(&self, i: usize) -> &Op {
        &self.nodes[i].op
    }

    fn describe(&self, i: usize) -> String {
        let node = &self.nodes[i];
        match &node.label {
            Some(l) => format!("node #{i} ({}, `{l}`)", node.op.name()),
            None => format!("node #{i} ({})", node.op.name()),
        }
    }

    /// Declares a replayable input, initialised with `value`.
    pub fn input(&mut self, value: Tensor) -> Var {
        let i = self.push_raw(Op::Input, value, None);
        self.inputs.push(i);
        self.var(i)
    }

    /// Records a parameter or constant.
    pub fn leaf(&mut self, value: Tensor) -> Var {
        let i = self.push_raw(Op::Leaf, value, None);
        self.var(i)
    }

    pub fn named_leaf(&mut self, label: impl Into<String>, value: Tensor) -> Var {
        let i = self.push_raw(Op::Leaf, value, Some(label.into()));
        self.var(i)
    }

    fn push_raw(&mut self, op: Op, value: Tensor, label: Option<String>) -> usize {
        self.nodes.push(Node { op, value, label });
        self.nodes.len() - 1
    }

    pub(crate) fn push(&mut self, op: Op) -> Result<Var> {
        let index = self.nodes.len();
        let value = {
            let nodes = &self.nodes;
            eval(&op, index, |j| &nodes[j].value)?
        };
        let i = self.push_raw(op, value, None);
        Ok(self.var(i))
    }

    /// Nodes that no other node consumes, in recording order.
    pub fn sinks(&self) -> Vec<Var> {
        let mut consumed = vec![false; self.nodes.len()];
        for node in &self.nodes {
            for o in node.op.operands().into_iter().flatten() {
                consumed[o] = true;
            }
        }
        (0..self.nodes.len())
            .filter(|&i| !consumed[i])
            .map(|i| self.var(i))
            .collect()
    }

    /// Replays the graph with new input values, in declaration order, and
    /// returns the values of all sink nodes. Recorded values are updated.
    pub fn forward(&mut self, inputs: &[Tensor]) -> Result<Vec<Tensor>> {
        let values = self.replay(inputs)?;
        for (node, value) in self.nodes.iter_mut().zip(values) {
            node.value = value;
        }
        Ok(self
            .sinks()
            .into_iter()
            .map(|v| self.nodes[v.index].value.clone())
            .collect())
    }

    /// Like [`Graph::forward`] but leaves the recorded values untouched, so
    /// a finished graph can be evaluated through a shared reference.
    pub fn evaluate(&self, inputs: &[Tensor]) -> Result<Vec<Tensor>> {
        let values = self.replay(inputs)?;
        Ok(self
            .sinks()
            .into_iter()
            .map(|v| values[v.index].clone())
            .collect())
    }

    fn replay(&self, inputs: &[Tensor]) -> Result<Vec<Tensor>> {
        if inputs.len() != self.inputs.len() {
            return Err(Error::dim(
                "graph inputs",
                format!(
                    "graph declares {} inputs, {} supplied",
                    self.inputs.len(),
                    inputs.len()
                ),
            ));
        }
        let mut supplied = inputs.iter();
        let mut values: Vec<Tensor> = Vec::with_capacity(self.nodes.len());
        for (i, node) in self.nodes.iter().enumerate() {
            let value = match node.op {
                Op::Input => {
                    let t = supplied.next().expect("input count checked above");
                    if t.shape() != node.value.shape() {
                        return Err(Error::dim(
                            self.describe(i),
                            format!(
                                "declared shape {:?}, supplied {:?}",
                                node.value.shape(),
                                t.shape()
                            ),
                        ));
                    }
                    t.clone()
                }
                Op::Leaf => node.value.clone(),
                _ => eval(&node.op, i, |j| &values[j])
                    .map_err(|e| self.rename_error(e, i))?,
            };
            values.push(value);
        }
        Ok(values)
    }

    fn rename_error(&self, err: Error, i: usize) -> Error {
        match err {
            Error::Dimension { detail, .. } => Error::dim(self.describe(i), detail),
            other => other,
        }
    }

    // ---- op constructors ------------------------------------------------

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.matmul_t(a, b, false, false)
    }

    /// `op(a) * op(b)` with optional transposition of either operand.
    pub fn matmul_t(&mut self, a: Var, b: Var, trans_a: bool, trans_b: bool) -> Result<Var> {
        let (a, b) = (self.check(a)?, self.check(b)?);
        self.push(Op::MatMul {
            a,
            b,
            trans_a,
            trans_b,
        })
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let (a, b) = (self.check(a)?, self.check(b)?);
        self.push(Op::Add(a, b))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        let (a, b) = (self.check(a)?, self.check(b)?);
        self.push(Op::Sub(a, b))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (a, b) = (self.check(a)?, self.check(b)?);
        self.push(Op::Mul(a, b))
    }

    pub fn add_row(&mut self, a: Var, row: Var) -> Result<Var> {
        let (a, row) = (self.check(a)?, self.check(row)?);
        self.push(Op::AddRow { a, row })
    }

    pub fn sum_rows(&mut self, a: Var) -> Result<Var> {
        let a = self.check(a)?;
        self.push(Op::SumRows(a))
    }

    pub fn broadcast_rows(&mut self, a: Var, rows: usize) -> Result<Var> {
        let a = self.check(a)?;
        self.push(Op::BroadcastRows { a, rows })
    }

    pub fn sum_cols(&mut self, a: Var) -> Result<Var> {
        let a = self.check(a)?;
        self.push(Op::SumCols(a))
    }

    pub fn broadcast_cols(&mut self, a: Var, cols: usize) -> Result<Var> {
        let a = self.check(a)?;
        self.push(Op::BroadcastCols { a, cols })
    }

    pub fn scale(&mut self, a: Var, factor: f64) -> Result<Var> {
        let a = self.check(a)?;
        self.push(Op::Scale(a, factor))
    }

    pub fn add_scalar(&mut self, a: Var, offset: f64) -> Result<Var> {
        let a = self.check(a)?;
        self.push(Op::AddScalar(a, offset))
    }

    pub fn tanh(&mut self, a: Var) -> Result<Var> {
        let a = self.check(a)?;
        self.push(Op::Tanh(a))
    }

    pub(crate) fn tanh_grad(&mut self, y: Var, g: Var) -> Result<Var> {
        let y = self.check(y)?;
        let g = self.check(g)?;
        self.push(Op::TanhGrad { y, g })
    }

    pub fn abs(&mut self, a: Var) -> Result<Var> {
        let a = self.check(a)?;
        self.push(Op::Abs(a))
    }

    pub fn sign(&mut self, a: Var) -> Result<Var> {
        let a = self.check(a)?;
        self.push(Op::Sign(a))
    }

    pub fn square(&mut self, a: Var) -> Result<Var> {
        let a = self.check(a)?;
        self.push(Op::Square(a))
    }

    pub fn sqrt(&mut self, a: Var) -> Result<Var> {
        let a = self.check(a)?;
        self.push(Op::Sqrt(a))
    }

    pub fn safe_recip(&mut self, a: Var) -> Result<Var> {
        let a = self.check(a)?;
        self.push(Op::SafeRecip(a))
    }

    pub fn sum(&mut self, a: Var) -> Result<Var> {
        let a = self.check(a)?;
        self.push(Op::Sum(a))
    }

    pub fn mean(&mut self, a: Var) -> Result<Var> {
        let a = self.check(a)?;
        self.push(Op::Mean(a))
    }

    pub fn broadcast(&mut self, a: Var, shape: &[usize]) -> Result<Var> {
        let a = self.check(a)?;
        self.push(Op::Broadcast {
            a,
            shape: shape.to_vec(),
        })
    }

    pub fn concat(&mut self, a: Var, b: Var, axis: usize) -> Result<Var> {
        let (a, b) = (self.check(a)?, self.check(b)?);
        self.push(Op::Concat { a, b, axis })
    }

    pub fn slice(&mut self, a: Var, axis: usize, start: usize, len: usize) -> Result<Var> {
        let a = self.check(a)?;
        self.push(Op::Slice {
            a,
            axis,
            start,
            len,
        })
    }

    pub(crate) fn pad_slice(&mut self, a: Var, axis: usize, start: usize, full: usize) -> Result<Var> {
        let a = self.check(a)?;
        self.push(Op::PadSlice {
            a,
            axis,
            start,
            full,
        })
    }

    /// Picks flat elements of `a` into a tensor of `shape`.
    pub fn gather(&mut self, a: Var, index: Arc<[usize]>, shape: &[usize]) -> Result<Var> {
        let a = self.check(a)?;
        self.push(Op::Gather {
            a,
            index,
            shape: shape.to_vec(),
        })
    }

    pub(crate) fn scatter_add(&mut self, a: Var, index: Arc<[usize]>, shape: &[usize]) -> Result<Var> {
        let a = self.check(a)?;
        self.push(Op::ScatterAdd {
            a,
            index,
            shape: shape.to_vec(),
        })
    }

    /// Same data, new shape.
    pub fn reshape(&mut self, a: Var, shape: &[usize]) -> Result<Var> {
        let n = self.value(a)?.numel();
        let index: Arc<[usize]> = (0..n).collect();
        self.gather(a, index, shape)
    }

    /// Row-wise convex combination `w_i * a_i + (1 - w_i) * b_i`.
    pub fn interpolate(&mut self, a: Var, b: Var, weights: Arc<[f64]>) -> Result<Var> {
        let (a, b) = (self.check(a)?, self.check(b)?);
        self.push(Op::Interpolate { a, b, weights })
    }

    pub fn row_scale(&mut self, a: Var, weights: Arc<[f64]>) -> Result<Var> {
        let a = self.check(a)?;
        self.push(Op::RowScale { a, weights })
    }

    pub(crate) fn var_at(&self, index: usize) -> Var {
        self.var(index)
    }
}

// ---- evaluation ----------------------------------------------------------

fn same_shape(op: &str, a: &Tensor, b: &Tensor) -> Result<()> {
    if a.shape() != b.shape() {
        return Err(Error::dim(
            op,
            format!("operand shapes differ: {:?} vs {:?}", a.shape(), b.shape()),
        ));
    }
    Ok(())
}

fn dims2(op: &str, t: &Tensor) -> Result<(usize, usize)> {
    t.dims2().map_err(|_| {
        Error::dim(op, format!("expected a matrix, found shape {:?}", t.shape()))
    })
}

fn zip_map(op: &str, a: &Tensor, b: &Tensor, f: impl Fn(f64, f64) -> f64) -> Result<Tensor> {
    same_shape(op, a, b)?;
    let data = a.data().iter().zip(b.data()).map(|(x, y)| f(*x, *y)).collect();
    Ok(Tensor::from_parts(a.shape().to_vec(), data))
}

fn map(a: &Tensor, f: impl Fn(f64) -> f64) -> Tensor {
    Tensor::from_parts(a.shape().to_vec(), a.data().iter().map(|x| f(*x)).collect())
}

/// `(outer, extent, inner)` decomposition of `shape` around `axis`.
fn split_axis(op: &str, shape: &[usize], axis: usize) -> Result<(usize, usize, usize)> {
    if axis >= shape.len() {
        return Err(Error::dim(
            op,
            format!("axis {axis} out of range for shape {shape:?}"),
        ));
    }
    let outer = shape[..axis].iter().product();
    let inner = shape[axis + 1..].iter().product();
    Ok((outer, shape[axis], inner))
}

fn with_axis(shape: &[usize], axis: usize, extent: usize) -> Vec<usize> {
    let mut s = shape.to_vec();
    s[axis] = extent;
    s
}

fn row_weights(op: &str, t: &Tensor, weights: &[f64]) -> Result<(usize, usize)> {
    let (rows, cols) = dims2(op, t)?;
    if weights.len() != rows {
        return Err(Error::dim(
            op,
            format!("{} row weights for {rows} rows", weights.len()),
        ));
    }
    Ok((rows, cols))
}

pub(crate) fn eval<'a>(op: &Op, index: usize, v: impl Fn(usize) -> &'a Tensor) -> Result<Tensor> {
    let out = eval_unchecked(op, &v).map_err(|e| match e {
        Error::Dimension { node, detail } => {
            Error::dim(format!("node #{index} ({node})"), detail)
        }
        other => other,
    })?;
    if !out.all_finite() {
        return Err(Error::NonFinite(format!(
            "node #{index} ({})",
            op.name()
        )));
    }
    Ok(out)
}

fn eval_unchecked<'a>(op: &Op, v: &impl Fn(usize) -> &'a Tensor) -> Result<Tensor> {
    use Op::*;
    Ok(match op {
        Input | Leaf => unreachable!("leaves are never re-evaluated"),
        MatMul {
            a,
            b,
            trans_a,
            trans_b,
        } => {
            let (ta, tb) = (v(*a), v(*b));
            let (m, n, data) = gemm(
                ta.data(),
                dims2("matmul", ta)?,
                *trans_a,
                tb.data(),
                dims2("matmul", tb)?,
                *trans_b,
            )?;
            Tensor::from_parts(vec![m, n], data)
        }
        Add(a, b) => zip_map("add", v(*a), v(*b), |x, y| x + y)?,
        Sub(a, b) => zip_map("sub", v(*a), v(*b), |x, y| x - y)?,
        Mul(a, b) => zip_map("mul", v(*a), v(*b), |x, y| x * y)?,
        AddRow { a, row } => {
            let (ta, tr) = (v(*a), v(*row));
            let (rows, cols) = dims2("add_row", ta)?;
            if tr.numel() != cols || tr.shape().len() > 2 || (tr.shape().len() == 2 && tr.shape()[0] != 1) {
                return Err(Error::dim(
                    "add_row",
                    format!("row of shape {:?} cannot extend {rows}x{cols}", tr.shape()),
                ));
            }
            let mut data = ta.data().to_vec();
            for r in data.chunks_exact_mut(cols.max(1)).take(rows) {
                for (x, b) in r.iter_mut().zip(tr.data()) {
                    *x += b;
                }
            }
            Tensor::from_parts(vec![rows, cols], data)
        }
        SumRows(a) => {
            let ta = v(*a);
            let (rows, cols) = dims2("sum_rows", ta)?;
            let mut out = vec![0.0; cols];
            for r in 0..rows {
                for (o, x) in out.iter_mut().zip(&ta.data()[r * cols..(r + 1) * cols]) {
                    *o += x;
                }
            }
            Tensor::from_parts(vec![1, cols], out)
        }
        BroadcastRows { a, rows } => {
            let ta = v(*a);
            let (one, cols) = dims2("broadcast_rows", ta)?;
            if one != 1 {
                return Err(Error::dim("broadcast_rows", format!("expected 1 row, found {one}")));
            }
            let mut data = Vec::with_capacity(rows * cols);
            for _ in 0..*rows {
                data.extend_from_slice(ta.data());
            }
            Tensor::from_parts(vec![*rows, cols], data)
        }
        SumCols(a) => {
            let ta = v(*a);
            let (rows, cols) = dims2("sum_cols", ta)?;
            let data = (0..rows)
                .map(|r| ta.data()[r * cols..(r + 1) * cols].iter().fold(0.0, |s, x| s + x))
                .collect();
            Tensor::from_parts(vec![rows, 1], data)
        }
        BroadcastCols { a, cols } => {
            let ta = v(*a);
            let (rows, one) = dims2("broadcast_cols", ta)?;
            if one != 1 {
                return Err(Error::dim("broadcast_cols", format!("expected 1 column, found {one}")));
            }
            let mut data = Vec::with_capacity(rows * cols);
            for x in ta.data() {
                data.extend(std::iter::repeat_n(*x, *cols));
            }
            Tensor::from_parts(vec![rows, *cols], data)
        }
        Scale(a, c) => map(v(*a), |x| c * x),
        AddScalar(a, c) => map(v(*a), |x| x + c),
        Tanh(a) => {
            let mut t = v(*a).clone();
            super::kernels::tanh_in_place(t.data_mut());
            t
        }
        TanhGrad { y, g } => zip_map("tanh_grad", v(*y), v(*g), |y, g| g * (1.0 - y * y))?,
        Abs(a) => map(v(*a), f64::abs),
        Sign(a) => map(v(*a), |x| {
            if x > 0.0 {
                1.0
            } else if x < 0.0 {
                -1.0
            } else {
                0.0
            }
        }),
        Square(a) => map(v(*a), |x| x * x),
        Sqrt(a) => {
            let ta = v(*a);
            if let Some(x) = ta.data().iter().find(|x| **x < 0.0) {
                return Err(Error::dim("sqrt", format!("negative operand {x}")));
            }
            map(ta, f64::sqrt)
        }
        SafeRecip(a) => map(v(*a), |x| if x == 0.0 { 0.0 } else { 1.0 / x }),
        Sum(a) => Tensor::from_parts(vec![], vec![v(*a).data().iter().fold(0.0, |s, x| s + x)]),
        Mean(a) => {
            let ta = v(*a);
            if ta.numel() == 0 {
                return Err(Error::dim("mean", "mean of an empty tensor"));
            }
            let s = ta.data().iter().fold(0.0, |s, x| s + x);
            Tensor::from_parts(vec![], vec![s / ta.numel() as f64])
        }
        Broadcast { a, shape } => {
            let ta = v(*a);
            if ta.numel() != 1 {
                return Err(Error::dim(
                    "broadcast",
                    format!("only one-element tensors broadcast, found {:?}", ta.shape()),
                ));
            }
            let n = shape.iter().product();
            Tensor::from_parts(shape.clone(), vec![ta.data()[0]; n])
        }
        Concat { a, b, axis } => {
            let (ta, tb) = (v(*a), v(*b));
            let (outer, ea, inner) = split_axis("concat", ta.shape(), *axis)?;
            let (outer_b, eb, inner_b) = split_axis("concat", tb.shape(), *axis)?;
            if ta.shape().len() != tb.shape().len() || outer != outer_b || inner != inner_b {
                return Err(Error::dim(
                    "concat",
                    format!("cannot join {:?} and {:?} along axis {axis}", ta.shape(), tb.shape()),
                ));
            }
            let mut data = Vec::with_capacity(ta.numel() + tb.numel());
            for o in 0..outer {
                data.extend_from_slice(&ta.data()[o * ea * inner..(o + 1) * ea * inner]);
                data.extend_from_slice(&tb.data()[o * eb * inner..(o + 1) * eb * inner]);
            }
            Tensor::from_parts(with_axis(ta.shape(), *axis, ea + eb), data)
        }
        Slice {
            a,
            axis,
            start,
            len,
        } => {
            let ta = v(*a);
            let (outer, extent, inner) = split_axis("slice", ta.shape(), *axis)?;
            if start + len > extent {
                return Err(Error::dim(
                    "slice",
                    format!("range {start}..{} exceeds extent {extent}", start + len),
                ));
            }
            let mut data = Vec::with_capacity(outer * len * inner);
            for o in 0..outer {
                let base = (o * extent + start) * inner;
                data.extend_from_slice(&ta.data()[base..base + len * inner]);
            }
            Tensor::from_parts(with_axis(ta.shape(), *axis, *len), data)
        }
        PadSlice {
            a,
            axis,
            start,
            full,
        } => {
            let ta = v(*a);
            let (outer, len, inner) = split_axis("pad_slice", ta.shape(), *axis)?;
            if start + len > *full {
                return Err(Error::dim("pad_slice", "padded range exceeds target extent"));
            }
            let mut data = vec![0.0; outer * full * inner];
            for o in 0..outer {
                let dst = (o * full + start) * inner;
                data[dst..dst + len * inner]
                    .copy_from_slice(&ta.data()[o * len * inner..(o + 1) * len * inner]);
            }
            Tensor::from_parts(with_axis(ta.shape(), *axis, *full), data)
        }
        Gather { a, index, shape } => {
            let ta = v(*a);
            let n: usize = shape.iter().product();
            if index.len() != n {
                return Err(Error::dim(
                    "gather",
                    format!("{} indices for output shape {shape:?}", index.len()),
                ));
            }
            if let Some(bad) = index.iter().find(|&&i| i >= ta.numel()) {
                return Err(Error::dim(
                    "gather",
                    format!("index {bad} out of range for {} elements", ta.numel()),
                ));
            }
            let data = index.iter().map(|&i| ta.data()[i]).collect();
            Tensor::from_parts(shape.clone(), data)
        }
        ScatterAdd { a, index, shape } => {
            let ta = v(*a);
            let n: usize = shape.iter().product();
            if index.len() != ta.numel() {
                return Err(Error::dim(
                    "scatter_add",
                    format!("{} indices for {} values", index.len(), ta.numel()),
                ));
            }
            let mut data = vec![0.0; n];
            for (&i, x) in index.iter().zip(ta.data()) {
                if i >= n {
                    return Err(Error::dim("scatter_add", format!("index {i} out of range {n}")));
                }
                data[i] += x;
            }
            Tensor::from_parts(shape.clone(), data)
        }
        Interpolate { a, b, weights } => {
            let (ta, tb) = (v(*a), v(*b));
            same_shape("interpolate", ta, tb)?;
            let (_, cols) = row_weights("interpolate", ta, weights)?;
            let mut data = Vec::with_capacity(ta.numel());
            for (r, w) in weights.iter().enumerate() {
                let ra = &ta.data()[r * cols..(r + 1) * cols];
                let rb = &tb.data()[r * cols..(r + 1) * cols];
                data.extend(ra.iter().zip(rb).map(|(x, y)| w * x + (1.0 - w) * y));
            }
            Tensor::from_parts(ta.shape().to_vec(), data)
        }
        RowScale { a, weights } => {
            let ta = v(*a);
            let (_, cols) = row_weights("row_scale", ta, weights)?;
            let mut data = ta.data().to_vec();
            for (r, w) in weights.iter().enumerate() {
                for x in &mut data[r * cols..(r + 1) * cols] {
                    *x *= w;
                }
            }
            Tensor::from_parts(ta.shape().to_vec(), data)
        }
    })
}
