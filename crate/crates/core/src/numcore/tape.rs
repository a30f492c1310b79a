//! Tape-based reverse-mode automatic differentiation.
//!
//! Every primitive evaluates eagerly, checks its output for non-finite values,
//! and appends a node to the tape. Nodes only reference earlier nodes, so the
//! tape is always in topological order and `backward` is a single reverse sweep.

use super::tensor::{gemm, Tensor};
use crate::error::{Error, Result};

/// Handle to a value recorded on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Clone, Debug)]
enum Op {
    Leaf,
    MatMul(Var, Var),
    Add(Var, Var),
    AddRow(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Scale(Var, f64),
    AddScalar(Var),
    Concat(Vec<Var>),
    Slice { src: Var, start: usize },
    Sigmoid(Var),
    Tanh(Var),
    Relu(Var),
    Square(Var),
    Abs(Var),
    Mean(Var),
    Sum(Var),
    Distance(Var, Var),
    Gather { table: Var, ids: Vec<usize> },
    Normalize { src: Var, norms: Vec<f64> },
}

struct Node {
    value: Tensor,
    op: Op,
    requires_grad: bool,
}

#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

/// Gradients of a scalar with respect to the leaves of a tape.
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
    shapes: Vec<Vec<usize>>,
}

impl Gradients {
    /// Gradient for the leaf `var`; zeros when it does not influence the loss.
    pub fn get(&self, var: Var) -> Tensor {
        match &self.grads[var.0] {
            Some(g) => g.clone(),
            None => Tensor::zeros(&self.shapes[var.0]),
        }
    }

    pub fn take(&mut self, var: Var) -> Tensor {
        match self.grads[var.0].take() {
            Some(g) => g,
            None => Tensor::zeros(&self.shapes[var.0]),
        }
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
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

    pub fn value(&self, var: Var) -> &Tensor {
        &self.nodes[var.0].value
    }

    /// Trainable leaf.
    pub fn param(&mut self, value: Tensor) -> Var {
        self.push_leaf(value, true)
    }

    /// Leaf that never receives a gradient (inputs, targets, initial states).
    pub fn constant(&mut self, value: Tensor) -> Var {
        self.push_leaf(value, false)
    }

    fn push_leaf(&mut self, value: Tensor, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op: Op::Leaf,
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn push(&mut self, name: &str, value: Tensor, op: Op, inputs: &[Var]) -> Result<Var> {
        if !value.is_finite() {
            return Err(Error::NonFinite(name.to_string()));
        }
        let requires_grad = inputs.iter().any(|v| self.nodes[v.0].requires_grad);
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        Ok(Var(self.nodes.len() - 1))
    }

    fn shape_err(&self, op: &'static str, a: Var, b: Var) -> Error {
        Error::Shape {
            op,
            lhs: self.value(a).shape().to_vec(),
            rhs: self.value(b).shape().to_vec(),
        }
    }

    /// `[m, k] x [k, n] -> [m, n]`.
    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (av, bv) = (self.value(a), self.value(b));
        if av.shape().len() != 2 || bv.shape().len() != 2 || av.shape()[1] != bv.shape()[0] {
            return Err(self.shape_err("matmul", a, b));
        }
        let (m, k, n) = (av.shape()[0], av.shape()[1], bv.shape()[1]);
        let mut out = vec![0.0; m * n];
        gemm(m, k, n, av.data(), false, bv.data(), false, &mut out, false);
        self.push("matmul", Tensor::from_parts(vec![m, n], out), Op::MatMul(a, b), &[a, b])
    }

    /// Elementwise sum of equal shapes.
    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let (av, bv) = (self.value(a), self.value(b));
        if !av.same_shape(bv) {
            return Err(self.shape_err("add", a, b));
        }
        let data = av.data().iter().zip(bv.data()).map(|(x, y)| x + y).collect();
        let shape = av.shape().to_vec();
        self.push("add", Tensor::from_parts(shape, data), Op::Add(a, b), &[a, b])
    }

    /// Adds a bias vector of length `cols` to every row of `a`.
    pub fn add_row(&mut self, a: Var, bias: Var) -> Result<Var> {
        let (av, bv) = (self.value(a), self.value(bias));
        if bv.shape().len() != 1 || bv.len() != av.cols() {
            return Err(self.shape_err("add_row", a, bias));
        }
        let cols = av.cols();
        let data = av
            .data()
            .iter()
            .enumerate()
            .map(|(i, x)| x + bv.data()[i % cols])
            .collect();
        let shape = av.shape().to_vec();
        self.push("add_row", Tensor::from_parts(shape, data), Op::AddRow(a, bias), &[a, bias])
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        let (av, bv) = (self.value(a), self.value(b));
        if !av.same_shape(bv) {
            return Err(self.shape_err("sub", a, b));
        }
        let data = av.data().iter().zip(bv.data()).map(|(x, y)| x - y).collect();
        let shape = av.shape().to_vec();
        self.push("sub", Tensor::from_parts(shape, data), Op::Sub(a, b), &[a, b])
    }

    /// Elementwise product of equal shapes.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (av, bv) = (self.value(a), self.value(b));
        if !av.same_shape(bv) {
            return Err(self.shape_err("mul", a, b));
        }
        let data = av.data().iter().zip(bv.data()).map(|(x, y)| x * y).collect();
        let shape = av.shape().to_vec();
        self.push("mul", Tensor::from_parts(shape, data), Op::Mul(a, b), &[a, b])
    }

    pub fn scale(&mut self, a: Var, factor: f64) -> Result<Var> {
        let value = self.value(a).map(|x| x * factor);
        self.push("scale", value, Op::Scale(a, factor), &[a])
    }

    pub fn add_scalar(&mut self, a: Var, offset: f64) -> Result<Var> {
        let value = self.value(a).map(|x| x + offset);
        self.push("add_scalar", value, Op::AddScalar(a), &[a])
    }

    /// Concatenates along the last axis; leading dimensions must agree.
    pub fn concat(&mut self, parts: &[Var]) -> Result<Var> {
        let first = *parts
            .first()
            .ok_or_else(|| Error::Invalid("concat of zero tensors".into()))?;
        let rows = self.value(first).rows();
        let lead = self.value(first).shape().split_last().map(|(_, l)| l.to_vec());
        for &p in &parts[1..] {
            let pv = self.value(p);
            if pv.rows() != rows || pv.shape().split_last().map(|(_, l)| l.to_vec()) != lead {
                return Err(self.shape_err("concat", first, p));
            }
        }
        let total: usize = parts.iter().map(|&p| self.value(p).cols()).sum();
        let mut data = Vec::with_capacity(rows * total);
        for r in 0..rows {
            for &p in parts {
                data.extend_from_slice(self.value(p).row(r));
            }
        }
        let shape = self.value(first).with_cols(total);
        self.push("concat", Tensor::from_parts(shape, data), Op::Concat(parts.to_vec()), parts)
    }

    /// Columns `[start, start + len)` of the last axis.
    pub fn slice(&mut self, src: Var, start: usize, len: usize) -> Result<Var> {
        let sv = self.value(src);
        if len == 0 || start + len > sv.cols() {
            return Err(Error::Shape {
                op: "slice",
                lhs: sv.shape().to_vec(),
                rhs: vec![start, len],
            });
        }
        let mut data = Vec::with_capacity(sv.rows() * len);
        for r in 0..sv.rows() {
            data.extend_from_slice(&sv.row(r)[start..start + len]);
        }
        let shape = sv.with_cols(len);
        self.push("slice", Tensor::from_parts(shape, data), Op::Slice { src, start }, &[src])
    }

    pub fn sigmoid(&mut self, a: Var) -> Result<Var> {
        let value = self.value(a).map(sigmoid);
        self.push("sigmoid", value, Op::Sigmoid(a), &[a])
    }

    pub fn tanh(&mut self, a: Var) -> Result<Var> {
        let value = self.value(a).map(f64::tanh);
        self.push("tanh", value, Op::Tanh(a), &[a])
    }

    pub fn relu(&mut self, a: Var) -> Result<Var> {
        let value = self.value(a).map(|x| x.max(0.0));
        self.push("relu", value, Op::Relu(a), &[a])
    }

    pub fn square(&mut self, a: Var) -> Result<Var> {
        let value = self.value(a).map(|x| x * x);
        self.push("square", value, Op::Square(a), &[a])
    }

    pub fn abs(&mut self, a: Var) -> Result<Var> {
        let value = self.value(a).map(f64::abs);
        self.push("abs", value, Op::Abs(a), &[a])
    }

    /// Mean over every element, as a scalar.
    pub fn mean(&mut self, a: Var) -> Result<Var> {
        let av = self.value(a);
        let m = av.data().iter().sum::<f64>() / av.len() as f64;
        self.push("mean", Tensor::scalar(m), Op::Mean(a), &[a])
    }

    /// Sum over every element, as a scalar.
    pub fn sum(&mut self, a: Var) -> Result<Var> {
        let s = self.value(a).data().iter().sum::<f64>();
        self.push("sum", Tensor::scalar(s), Op::Sum(a), &[a])
    }

    /// Row-wise Euclidean distance along the last axis; output has one entry per row.
    pub fn distance(&mut self, a: Var, b: Var) -> Result<Var> {
        let (av, bv) = (self.value(a), self.value(b));
        if !av.same_shape(bv) {
            return Err(self.shape_err("distance", a, b));
        }
        let d: Vec<f64> = (0..av.rows())
            .map(|r| {
                av.row(r)
                    .iter()
                    .zip(bv.row(r))
                    .map(|(x, y)| (x - y) * (x - y))
                    .sum::<f64>()
                    .sqrt()
            })
            .collect();
        self.push("distance", Tensor::vector(d), Op::Distance(a, b), &[a, b])
    }

    /// Rows `ids` of a 2-D `table`, giving `[ids.len(), cols]`.
    pub fn gather(&mut self, table: Var, ids: &[usize]) -> Result<Var> {
        let tv = self.value(table);
        if tv.shape().len() != 2 {
            return Err(Error::Shape {
                op: "gather",
                lhs: tv.shape().to_vec(),
                rhs: vec![ids.len()],
            });
        }
        if ids.is_empty() {
            return Err(Error::Invalid("gather with no ids".into()));
        }
        if let Some(&bad) = ids.iter().find(|&&i| i >= tv.shape()[0]) {
            return Err(Error::Invalid(format!(
                "gather id {bad} out of range for table with {} rows",
                tv.shape()[0]
            )));
        }
        let cols = tv.cols();
        let mut data = Vec::with_capacity(ids.len() * cols);
        for &i in ids {
            data.extend_from_slice(tv.row(i));
        }
        let value = Tensor::from_parts(vec![ids.len(), cols], data);
        let op = Op::Gather {
            table,
            ids: ids.to_vec(),
        };
        self.push("gather", value, op, &[table])
    }

    /// Scales each row along the last axis to unit Euclidean norm.
    pub fn l2_normalize(&mut self, a: Var) -> Result<Var> {
        let av = self.value(a);
        let norms: Vec<f64> = (0..av.rows())
            .map(|r| av.row(r).iter().map(|x| x * x).sum::<f64>().sqrt())
            .collect();
        if let Some(r) = norms.iter().position(|&n| n == 0.0) {
            return Err(Error::Invalid(format!("l2_normalize of zero-norm row {r}")));
        }
        let cols = av.cols();
        let data = av
            .data()
            .iter()
            .enumerate()
            .map(|(i, x)| x / norms[i / cols])
            .collect();
        let value = Tensor::from_parts(av.shape().to_vec(), data);
        self.push("l2_normalize", value, Op::Normalize { src: a, norms }, &[a])
    }

    /// Reverse sweep from a scalar `loss`.
    pub fn backward(&self, loss: Var) -> Result<Gradients> {
        let lv = self.value(loss);
        if !lv.is_scalar() {
            return Err(Error::Invalid(format!(
                "backward needs a scalar loss, got shape {:?}",
                lv.shape()
            )));
        }
        let n = loss.0 + 1;
        let mut grads: Vec<Option<Tensor>> = vec![None; n];
        grads[loss.0] = Some(Tensor::full(lv.shape(), 1.0));

        for idx in (0..n).rev() {
            let Some(g) = grads[idx].take() else { continue };
            let node = &self.nodes[idx];
            if node.requires_grad {
                self.propagate(node, &g, &mut grads);
            }
            if matches!(node.op, Op::Leaf) {
                grads[idx] = Some(g);
            }
        }

        let shapes = self.nodes.iter().map(|nd| nd.value.shape().to_vec()).collect();
        grads.resize(self.nodes.len(), None);
        Ok(Gradients { grads, shapes })
    }

    fn wants(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    fn accumulate(&self, grads: &mut [Option<Tensor>], v: Var, contribution: Tensor) {
        match &mut grads[v.0] {
            Some(existing) => {
                for (e, c) in existing.data_mut().iter_mut().zip(contribution.data()) {
                    *e += c;
                }
            }
            slot @ None => *slot = Some(contribution),
        }
    }

    /// Pushes `g`-weighted elementwise local derivatives into `grads[v]`.
    fn accumulate_elementwise(
        &self,
        grads: &mut [Option<Tensor>],
        v: Var,
        g: &Tensor,
        local: impl Fn(usize) -> f64,
    ) {
        if !self.wants(v) {
            return;
        }
        let data = g.data().iter().enumerate().map(|(i, gi)| gi * local(i)).collect();
        let t = Tensor::from_parts(self.value(v).shape().to_vec(), data);
        self.accumulate(grads, v, t);
    }

    fn propagate(&self, node: &Node, g: &Tensor, grads: &mut [Option<Tensor>]) {
        let out = &node.value;
        match &node.op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                let (av, bv) = (self.value(*a), self.value(*b));
                let (m, k, n) = (av.shape()[0], av.shape()[1], bv.shape()[1]);
                if self.wants(*a) {
                    let mut da = vec![0.0; m * k];
                    gemm(m, n, k, g.data(), false, bv.data(), true, &mut da, false);
                    self.accumulate(grads, *a, Tensor::from_parts(vec![m, k], da));
                }
                if self.wants(*b) {
                    let mut db = vec![0.0; k * n];
                    gemm(k, m, n, av.data(), true, g.data(), false, &mut db, false);
                    self.accumulate(grads, *b, Tensor::from_parts(vec![k, n], db));
                }
            }
            Op::Add(a, b) => {
                self.accumulate_elementwise(grads, *a, g, |_| 1.0);
                self.accumulate_elementwise(grads, *b, g, |_| 1.0);
            }
            Op::AddRow(a, bias) => {
                self.accumulate_elementwise(grads, *a, g, |_| 1.0);
                if self.wants(*bias) {
                    let cols = g.cols();
                    let mut db = vec![0.0; cols];
                    for r in 0..g.rows() {
                        for (d, x) in db.iter_mut().zip(g.row(r)) {
                            *d += x;
                        }
                    }
                    self.accumulate(grads, *bias, Tensor::vector(db));
                }
            }
            Op::Sub(a, b) => {
                self.accumulate_elementwise(grads, *a, g, |_| 1.0);
                self.accumulate_elementwise(grads, *b, g, |_| -1.0);
            }
            Op::Mul(a, b) => {
                let (av, bv) = (self.value(*a).data(), self.value(*b).data());
                self.accumulate_elementwise(grads, *a, g, |i| bv[i]);
                self.accumulate_elementwise(grads, *b, g, |i| av[i]);
            }
            Op::Scale(a, f) => self.accumulate_elementwise(grads, *a, g, |_| *f),
            Op::AddScalar(a) => self.accumulate_elementwise(grads, *a, g, |_| 1.0),
            Op::Concat(parts) => {
                let total = out.cols();
                let mut offset = 0;
                for &p in parts {
                    let pc = self.value(p).cols();
                    if self.wants(p) {
                        let mut data = Vec::with_capacity(g.rows() * pc);
                        for r in 0..g.rows() {
                            data.extend_from_slice(&g.data()[r * total + offset..r * total + offset + pc]);
                        }
                        let t = Tensor::from_parts(self.value(p).shape().to_vec(), data);
                        self.accumulate(grads, p, t);
                    }
                    offset += pc;
                }
            }
            Op::Slice { src, start } => {
                if self.wants(*src) {
                    let sv = self.value(*src);
                    let (cols, len) = (sv.cols(), g.cols());
                    let mut data = vec![0.0; sv.len()];
                    for r in 0..g.rows() {
                        data[r * cols + start..r * cols + start + len].copy_from_slice(g.row(r));
                    }
                    self.accumulate(grads, *src, Tensor::from_parts(sv.shape().to_vec(), data));
                }
            }
            Op::Sigmoid(a) => {
                let y = out.data();
                self.accumulate_elementwise(grads, *a, g, |i| y[i] * (1.0 - y[i]));
            }
            Op::Tanh(a) => {
                let y = out.data();
                self.accumulate_elementwise(grads, *a, g, |i| 1.0 - y[i] * y[i]);
            }
            Op::Relu(a) => {
                let x = self.value(*a).data();
                self.accumulate_elementwise(grads, *a, g, |i| if x[i] > 0.0 { 1.0 } else { 0.0 });
            }
            Op::Square(a) => {
                let x = self.value(*a).data();
                self.accumulate_elementwise(grads, *a, g, |i| 2.0 * x[i]);
            }
            Op::Abs(a) => {
                let x = self.value(*a).data();
                self.accumulate_elementwise(grads, *a, g, |i| {
                    if x[i] > 0.0 {
                        1.0
                    } else if x[i] < 0.0 {
                        -1.0
                    } else {
                        0.0
                    }
                });
            }
            Op::Mean(a) => {
                let n = self.value(*a).len() as f64;
                let gi = g.item() / n;
                self.accumulate_elementwise(grads, *a, &Tensor::full(self.value(*a).shape(), gi), |_| 1.0);
            }
            Op::Sum(a) => {
                let gi = g.item();
                self.accumulate_elementwise(grads, *a, &Tensor::full(self.value(*a).shape(), gi), |_| 1.0);
            }
            Op::Distance(a, b) => {
                let (av, bv) = (self.value(*a), self.value(*b));
                let cols = av.cols();
                let d = out.data();
                // d/da = (a - b) / d; zero where the rows coincide.
                let coeff = |i: usize| {
                    let r = i / cols;
                    if d[r] == 0.0 {
                        0.0
                    } else {
                        g.data()[r] * (av.data()[i] - bv.data()[i]) / d[r]
                    }
                };
                let ones = Tensor::full(av.shape(), 1.0);
                self.accumulate_elementwise(grads, *a, &ones, coeff);
                self.accumulate_elementwise(grads, *b, &ones, |i| -coeff(i));
            }
            Op::Gather { table, ids } => {
                if self.wants(*table) {
                    let tv = self.value(*table);
                    let cols = tv.cols();
                    let mut data = vec![0.0; tv.len()];
                    for (r, &id) in ids.iter().enumerate() {
                        for (d, x) in data[id * cols..(id + 1) * cols].iter_mut().zip(g.row(r)) {
                            *d += x;
                        }
                    }
                    self.accumulate(grads, *table, Tensor::from_parts(tv.shape().to_vec(), data));
                }
            }
            Op::Normalize { src, norms } => {
                if self.wants(*src) {
                    let y = out;
                    let cols = y.cols();
                    let mut data = vec![0.0; y.len()];
                    for r in 0..y.rows() {
                        let (yr, gr) = (y.row(r), g.row(r));
                        let dot: f64 = yr.iter().zip(gr).map(|(a, b)| a * b).sum();
                        for c in 0..cols {
                            data[r * cols + c] = (gr[c] - yr[c] * dot) / norms[r];
                        }
                    }
                    let t = Tensor::from_parts(self.value(*src).shape().to_vec(), data);
                    self.accumulate(grads, *src, t);
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() < 1e-12
    }

    #[test]
    fn analytic_values() {
        let mut tape = Tape::new();
        let z = tape.constant(Tensor::scalar(0.0));
        let s = tape.sigmoid(z).unwrap();
        let t = tape.tanh(z).unwrap();
        assert_eq!(tape.value(s).item(), 0.5);
        assert_eq!(tape.value(t).item(), 0.0);
    }

    #[test]
    fn matmul_identity() {
        let mut tape = Tape::new();
        let a = Tensor::matrix(2, 3, vec![1.0, -2.0, 3.5, 0.25, 7.0, -1.0]).unwrap();
        let mut eye = Tensor::zeros(&[3, 3]);
        for i in 0..3 {
            eye.data_mut()[i * 3 + i] = 1.0;
        }
        let av = tape.constant(a.clone());
        let iv = tape.constant(eye);
        let out = tape.matmul(av, iv).unwrap();
        assert_eq!(tape.value(out), &a);
    }

    #[test]
    fn gather_lookup() {
        let mut tape = Tape::new();
        let table = Tensor::matrix(4, 3, (0..12).map(f64::from).collect()).unwrap();
        let t = tape.param(table);
        let g = tape.gather(t, &[2, 2]).unwrap();
        assert_eq!(tape.value(g).to_rows(), vec![vec![6.0, 7.0, 8.0]; 2]);
        assert!(tape.gather(t, &[4]).is_err());
    }

    #[test]
    fn mean_square_gradient() {
        let mut tape = Tape::new();
        let w = tape.param(Tensor::vector(vec![3.0]));
        let sq = tape.square(w).unwrap();
        let loss = tape.mean(sq).unwrap();
        let grads = tape.backward(loss).unwrap();
        assert_eq!(grads.get(w).data(), &[6.0]);
    }

    #[test]
    fn disconnected_leaf_gets_zero() {
        let mut tape = Tape::new();
        let w = tape.param(Tensor::vector(vec![1.0, 2.0]));
        let unused = tape.param(Tensor::vector(vec![5.0, 5.0, 5.0]));
        let loss = tape.sum(w).unwrap();
        let grads = tape.backward(loss).unwrap();
        assert_eq!(grads.get(unused), Tensor::zeros(&[3]));
        assert_eq!(grads.get(w).data(), &[1.0, 1.0]);
    }

    #[test]
    fn non_scalar_loss_rejected() {
        let mut tape = Tape::new();
        let w = tape.param(Tensor::vector(vec![1.0, 2.0]));
        assert!(tape.backward(w).is_err());
    }

    #[test]
    fn shape_mismatch_names_primitive() {
        let mut tape = Tape::new();
        let a = tape.constant(Tensor::zeros(&[2, 3]));
        let b = tape.constant(Tensor::zeros(&[2, 3]));
        match tape.matmul(a, b) {
            Err(Error::Shape { op, lhs, rhs }) => {
                assert_eq!(op, "matmul");
                assert_eq!(lhs, vec![2, 3]);
                assert_eq!(rhs, vec![2, 3]);
            }
            other => panic!("unexpected {other:?}", other = other.map(|v| v.index())),
        }
    }

    #[test]
    fn non_finite_is_an_error() {
        let mut tape = Tape::new();
        let a = tape.constant(Tensor::vector(vec![f64::MAX]));
        assert!(matches!(tape.scale(a, 10.0), Err(Error::NonFinite(_))));
    }

    #[test]
    fn normalize_unit_norm_and_zero_error() {
        let mut tape = Tape::new();
        let a = tape.constant(Tensor::matrix(2, 3, vec![3.0, 4.0, 0.0, 1e-3, -2e-3, 5.0]).unwrap());
        let n = tape.l2_normalize(a).unwrap();
        for row in tape.value(n).to_rows() {
            let norm: f64 = row.iter().map(|x| x * x).sum::<f64>().sqrt();
            assert!(close(norm, 1.0));
        }
        let z = tape.constant(Tensor::zeros(&[1, 3]));
        assert!(tape.l2_normalize(z).is_err());
    }

    #[test]
    fn concat_and_slice_roundtrip() {
        let mut tape = Tape::new();
        let a = tape.constant(Tensor::matrix(2, 1, vec![1.0, 2.0]).unwrap());
        let b = tape.constant(Tensor::matrix(2, 2, vec![3.0, 4.0, 5.0, 6.0]).unwrap());
        let c = tape.concat(&[a, b]).unwrap();
        assert_eq!(tape.value(c).data(), &[1.0, 3.0, 4.0, 2.0, 5.0, 6.0]);
        let s = tape.slice(c, 1, 2).unwrap();
        assert_eq!(tape.value(s), tape.value(b));
        assert!(tape.slice(c, 2, 2).is_err());
    }

    #[test]
    fn distance_rows() {
        let mut tape = Tape::new();
        let a = tape.constant(Tensor::matrix(2, 2, vec![0.0, 0.0, 1.0, 1.0]).unwrap());
        let b = tape.constant(Tensor::matrix(2, 2, vec![3.0, 4.0, 1.0, 1.0]).unwrap());
        let d = tape.distance(a, b).unwrap();
        assert_eq!(tape.value(d).data(), &[5.0, 0.0]);
    }
}
