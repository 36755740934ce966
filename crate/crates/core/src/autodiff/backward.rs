use std::sync::Arc;

use super::graph::{Graph, Op, Var};
use super::tensor::Tensor;
use crate::error::{Error, Result};

impl Graph {
    /// Reverse-mode gradient of the scalar `output` with respect to each
    /// node in `wrt`.
    ///
    /// The adjoint computation is recorded on this graph, so every returned
    /// gradient is an ordinary node and can be differentiated again. A node
    /// with no path to `output` gets an exact zero tensor of its own shape.
    pub fn backward(&mut self, output: Var, wrt: &[Var]) -> Result<Vec<Var>> {
        let out = self.check(output)?;
        if !self.value_at(out).is_scalar() {
            return Err(Error::Contract(format!(
                "backward needs a scalar output, node #{out} has shape {:?}",
                self.value_at(out).shape()
            )));
        }
        let targets = wrt
            .iter()
            .map(|w| self.check(*w))
            .collect::<Result<Vec<_>>>()?;

        // reach[i]: node i is a target or consumes one, directly or not.
        let span = out + 1;
        let mut reach = vec![false; span];
        for &t in &targets {
            if t < span {
                reach[t] = true;
            }
        }
        for i in 0..span {
            if !reach[i] {
                reach[i] = self
                    .op_at(i)
                    .operands()
                    .into_iter()
                    .flatten()
                    .any(|o| reach[o]);
            }
        }

        let mut grads: Vec<Option<Var>> = vec![None; span];
        if reach[out] {
            let seed = Tensor::ones(self.value_at(out).shape());
            grads[out] = Some(self.leaf(seed));
        }
        for i in (0..span).rev() {
            let Some(g) = grads[i] else { continue };
            if !reach[i] {
                continue;
            }
            self.propagate(i, g, &reach, &mut grads)?;
        }

        targets
            .iter()
            .map(|&t| match grads.get(t).copied().flatten() {
                Some(g) => Ok(g),
                None => {
                    let zeros = Tensor::zeros(self.value_at(t).shape());
                    Ok(self.leaf(zeros))
                }
            })
            .collect()
    }

    /// `||d output / d input||_2` as a node of this graph, differentiable
    /// with respect to everything upstream of `output`.
    pub fn input_gradient_norm(&mut self, output: Var, input: Var) -> Result<Var> {
        let g = self.backward(output, &[input])?[0];
        let sq = self.square(g)?;
        let total = self.sum(sq)?;
        self.sqrt(total)
    }

    fn accumulate(&mut self, grads: &mut [Option<Var>], target: usize, contribution: Var) -> Result<()> {
        grads[target] = Some(match grads[target] {
            Some(prev) => self.add(prev, contribution)?,
            None => contribution,
        });
        Ok(())
    }

    /// Pushes the adjoint `g` of node `i` to those of its operands that
    /// lead to a target.
    fn propagate(&mut self, i: usize, g: Var, reach: &[bool], grads: &mut [Option<Var>]) -> Result<()> {
        let op = self.op_at(i).clone();
        let y = self.var_at(i);
        let wants = |j: usize| reach[j];
        use Op::*;
        match op {
            Input | Leaf | Sign(_) => {}
            MatMul {
                a,
                b,
                trans_a,
                trans_b,
            } => {
                let (va, vb) = (self.var_at(a), self.var_at(b));
                if wants(a) {
                    let ga = if trans_a {
                        self.matmul_t(vb, g, trans_b, true)?
                    } else {
                        self.matmul_t(g, vb, false, !trans_b)?
                    };
                    self.accumulate(grads, a, ga)?;
                }
                if wants(b) {
                    let gb = if trans_b {
                        self.matmul_t(g, va, true, trans_a)?
                    } else {
                        self.matmul_t(va, g, !trans_a, false)?
                    };
                    self.accumulate(grads, b, gb)?;
                }
            }
            Add(a, b) => {
                if wants(a) {
                    self.accumulate(grads, a, g)?;
                }
                if wants(b) {
                    self.accumulate(grads, b, g)?;
                }
            }
            Sub(a, b) => {
                if wants(a) {
                    self.accumulate(grads, a, g)?;
                }
                if wants(b) {
                    let gb = self.scale(g, -1.0)?;
                    self.accumulate(grads, b, gb)?;
                }
            }
            Mul(a, b) => {
                let (va, vb) = (self.var_at(a), self.var_at(b));
                if wants(a) {
                    let ga = self.mul(g, vb)?;
                    self.accumulate(grads, a, ga)?;
                }
                if wants(b) {
                    let gb = self.mul(g, va)?;
                    self.accumulate(grads, b, gb)?;
                }
            }
            AddRow { a, row } => {
                if wants(a) {
                    self.accumulate(grads, a, g)?;
                }
                if wants(row) {
                    let mut gr = self.sum_rows(g)?;
                    let row_shape = self.value_at(row).shape().to_vec();
                    if row_shape.len() != 2 {
                        gr = self.reshape(gr, &row_shape)?;
                    }
                    self.accumulate(grads, row, gr)?;
                }
            }
            SumRows(a) => {
                let rows = self.value_at(a).shape()[0];
                let ga = self.broadcast_rows(g, rows)?;
                self.accumulate(grads, a, ga)?;
            }
            BroadcastRows { a, .. } => {
                let ga = self.sum_rows(g)?;
                self.accumulate(grads, a, ga)?;
            }
            SumCols(a) => {
                let cols = self.value_at(a).shape()[1];
                let ga = self.broadcast_cols(g, cols)?;
                self.accumulate(grads, a, ga)?;
            }
            BroadcastCols { a, .. } => {
                let ga = self.sum_cols(g)?;
                self.accumulate(grads, a, ga)?;
            }
            Scale(a, c) => {
                let ga = self.scale(g, c)?;
                self.accumulate(grads, a, ga)?;
            }
            AddScalar(a, _) => self.accumulate(grads, a, g)?,
            Tanh(a) => {
                // d tanh = 1 - y^2, expressed through the output node so the
                // second derivative flows through it.
                let ga = self.tanh_grad(y, g)?;
                self.accumulate(grads, a, ga)?;
            }
            TanhGrad { y: yi, g: gi } => {
                let (yv, gv) = (self.var_at(yi), self.var_at(gi));
                if reach[yi] {
                    // d/dy [g (1 - y^2)] = -2 y g
                    let ug = self.mul(g, gv)?;
                    let uyg = self.mul(ug, yv)?;
                    let gy = self.scale(uyg, -2.0)?;
                    self.accumulate(grads, yi, gy)?;
                }
                if reach[gi] {
                    let gg = self.tanh_grad(yv, g)?;
                    self.accumulate(grads, gi, gg)?;
                }
            }
            Abs(a) => {
                let s = self.sign(self.var_at(a))?;
                let ga = self.mul(g, s)?;
                self.accumulate(grads, a, ga)?;
            }
            Square(a) => {
                let two_a = self.scale(self.var_at(a), 2.0)?;
                let ga = self.mul(g, two_a)?;
                self.accumulate(grads, a, ga)?;
            }
            Sqrt(a) => {
                let r = self.safe_recip(y)?;
                let half_r = self.scale(r, 0.5)?;
                let ga = self.mul(g, half_r)?;
                self.accumulate(grads, a, ga)?;
            }
            SafeRecip(a) => {
                let r2 = self.square(y)?;
                let slope = self.scale(r2, -1.0)?;
                let ga = self.mul(g, slope)?;
                self.accumulate(grads, a, ga)?;
            }
            Sum(a) => {
                let shape = self.value_at(a).shape().to_vec();
                let ga = self.broadcast(g, &shape)?;
                self.accumulate(grads, a, ga)?;
            }
            Mean(a) => {
                let shape = self.value_at(a).shape().to_vec();
                let n = self.value_at(a).numel() as f64;
                let spread = self.broadcast(g, &shape)?;
                let ga = self.scale(spread, 1.0 / n)?;
                self.accumulate(grads, a, ga)?;
            }
            Broadcast { a, .. } => {
                let mut ga = self.sum(g)?;
                let shape = self.value_at(a).shape().to_vec();
                if !shape.is_empty() {
                    ga = self.reshape(ga, &shape)?;
                }
                self.accumulate(grads, a, ga)?;
            }
            Concat { a, b, axis } => {
                let ea = self.value_at(a).shape()[axis];
                let eb = self.value_at(b).shape()[axis];
                if wants(a) {
                    let ga = self.slice(g, axis, 0, ea)?;
                    self.accumulate(grads, a, ga)?;
                }
                if wants(b) {
                    let gb = self.slice(g, axis, ea, eb)?;
                    self.accumulate(grads, b, gb)?;
                }
            }
            Slice { a, axis, start, .. } => {
                let full = self.value_at(a).shape()[axis];
                let ga = self.pad_slice(g, axis, start, full)?;
                self.accumulate(grads, a, ga)?;
            }
            PadSlice { a, axis, start, .. } => {
                let len = self.value_at(a).shape()[axis];
                let ga = self.slice(g, axis, start, len)?;
                self.accumulate(grads, a, ga)?;
            }
            Gather { a, index, .. } => {
                let shape = self.value_at(a).shape().to_vec();
                let ga = self.scatter_add(g, index, &shape)?;
                self.accumulate(grads, a, ga)?;
            }
            ScatterAdd { a, index, .. } => {
                let shape = self.value_at(a).shape().to_vec();
                let ga = self.gather(g, index, &shape)?;
                self.accumulate(grads, a, ga)?;
            }
            Interpolate { a, b, weights } => {
                if wants(a) {
                    let ga = self.row_scale(g, weights.clone())?;
                    self.accumulate(grads, a, ga)?;
                }
                if wants(b) {
                    let complement: Arc<[f64]> = weights.iter().map(|w| 1.0 - w).collect();
                    let gb = self.row_scale(g, complement)?;
                    self.accumulate(grads, b, gb)?;
                }
            }
            RowScale { a, weights } => {
                let ga = self.row_scale(g, weights)?;
                self.accumulate(grads, a, ga)?;
            }
        }
        Ok(())
    }
}
