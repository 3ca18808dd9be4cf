//! Reverse-mode automatic differentiation over a flat tape.
//!
//! Every forward primitive appends one node holding its output value and the
//! indices of its inputs, so the node list is always in topological order.
//! `backward` walks the list once in reverse, accumulating gradients into a
//! slot per node. Forward values are computed eagerly and every result is
//! checked for NaN/Inf, which surfaces wiring bugs at the op that produced
//! them instead of epochs later.

use super::tensor::Tensor;
use super::NumericsError;

/// Index of a value on the tape.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct ValueId(usize);

#[derive(Debug)]
enum Op {
    Leaf,
    MatMul(ValueId, ValueId),
    Add(ValueId, ValueId),
    /// Matrix plus a vector added to every row.
    AddRowBroadcast(ValueId, ValueId),
    Sub(ValueId, ValueId),
    Hadamard(ValueId, ValueId),
    Concat(ValueId, ValueId, usize),
    Tanh(ValueId),
    Sigmoid(ValueId),
    Softmax(ValueId, Option<Vec<bool>>),
    Gather(ValueId, Vec<usize>),
    Row(ValueId, usize),
    Dot(ValueId, ValueId),
    Stack(Vec<ValueId>),
    WeightedSum(Vec<ValueId>, ValueId),
    Scale(ValueId, f64),
    Sum(ValueId),
    Bce(ValueId, f64),
}

struct Node {
    op: Op,
    value: Tensor,
}

/// Gradients of one backward pass, indexed by the tape's value ids.
pub struct Gradients {
    slots: Vec<Option<Tensor>>,
}

impl Gradients {
    pub fn get(&self, id: ValueId) -> Option<&Tensor> {
        self.slots.get(id.0).and_then(|s| s.as_ref())
    }

    /// Gradient for `id`, or a zero tensor of `shape` if the value did not
    /// influence the loss.
    pub fn get_or_zeros(&self, id: ValueId, shape: &[usize]) -> Tensor {
        match self.get(id) {
            Some(g) => g.clone(),
            None => Tensor::zeros(shape),
        }
    }
}

#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

impl Tape {
    pub fn new() -> Self {
        Tape::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, id: ValueId) -> &Tensor {
        &self.nodes[id.0].value
    }

    /// Insert a tensor as a leaf (input or parameter).
    pub fn leaf(&mut self, value: Tensor) -> ValueId {
        self.push_unchecked(Op::Leaf, value)
    }

    fn push_unchecked(&mut self, op: Op, value: Tensor) -> ValueId {
        let id = ValueId(self.nodes.len());
        self.nodes.push(Node { op, value });
        id
    }

    fn push(&mut self, name: &'static str, op: Op, value: Tensor) -> Result<ValueId, NumericsError> {
        if !value.all_finite() {
            return Err(NumericsError::NumericFault { op: name });
        }
        Ok(self.push_unchecked(op, value))
    }

    fn shapes_err(
        &self,
        op: &'static str,
        a: ValueId,
        b: ValueId,
    ) -> Result<ValueId, NumericsError> {
        Err(NumericsError::ShapeMismatch {
            op,
            lhs: self.value(a).shape().to_vec(),
            rhs: self.value(b).shape().to_vec(),
        })
    }

    /// `[m,n] x [n] -> [m]` or `[m,n] x [n,p] -> [m,p]`.
    pub fn matmul(&mut self, a: ValueId, b: ValueId) -> Result<ValueId, NumericsError> {
        let (ta, tb) = (self.value(a), self.value(b));
        let out = match (ta.shape(), tb.shape()) {
            (&[m, n], &[n2]) if n == n2 => {
                let mut out = vec![0.0; m];
                let da = ta.data();
                let db = tb.data();
                for (i, o) in out.iter_mut().enumerate() {
                    let row = &da[i * n..(i + 1) * n];
                    *o = row.iter().zip(db).map(|(x, y)| x * y).sum();
                }
                Tensor::vector(out)
            }
            (&[m, n], &[n2, p]) if n == n2 => {
                let mut out = vec![0.0; m * p];
                let da = ta.data();
                let db = tb.data();
                for i in 0..m {
                    for k in 0..n {
                        let aik = da[i * n + k];
                        let brow = &db[k * p..(k + 1) * p];
                        let orow = &mut out[i * p..(i + 1) * p];
                        for (o, &bv) in orow.iter_mut().zip(brow) {
                            *o += aik * bv;
                        }
                    }
                }
                Tensor::new(vec![m, p], out)?
            }
            _ => return self.shapes_err("matmul", a, b),
        };
        self.push("matmul", Op::MatMul(a, b), out)
    }

    pub fn add(&mut self, a: ValueId, b: ValueId) -> Result<ValueId, NumericsError> {
        let (ta, tb) = (self.value(a), self.value(b));
        if ta.shape() == tb.shape() {
            let out = zip_map(ta, tb, |x, y| x + y);
            return self.push("add", Op::Add(a, b), out);
        }
        // Bias broadcast: matrix + row vector. The only broadcast we allow.
        if let (&[m, n], &[n2]) = (ta.shape(), tb.shape()) {
            if n == n2 {
                let mut out = ta.data().to_vec();
                let db = tb.data();
                for i in 0..m {
                    for (o, &bv) in out[i * n..(i + 1) * n].iter_mut().zip(db) {
                        *o += bv;
                    }
                }
                let t = Tensor::new(vec![m, n], out)?;
                return self.push("add", Op::AddRowBroadcast(a, b), t);
            }
        }
        self.shapes_err("add", a, b)
    }

    pub fn sub(&mut self, a: ValueId, b: ValueId) -> Result<ValueId, NumericsError> {
        let (ta, tb) = (self.value(a), self.value(b));
        if ta.shape() != tb.shape() {
            return self.shapes_err("sub", a, b);
        }
        let out = zip_map(ta, tb, |x, y| x - y);
        self.push("sub", Op::Sub(a, b), out)
    }

    pub fn hadamard(&mut self, a: ValueId, b: ValueId) -> Result<ValueId, NumericsError> {
        let (ta, tb) = (self.value(a), self.value(b));
        if ta.shape() != tb.shape() {
            return self.shapes_err("hadamard", a, b);
        }
        let out = zip_map(ta, tb, |x, y| x * y);
        self.push("hadamard", Op::Hadamard(a, b), out)
    }

    /// Concatenate two vectors (axis 0) or two matrices (axis 0 or 1).
    pub fn concat(&mut self, a: ValueId, b: ValueId, axis: usize) -> Result<ValueId, NumericsError> {
        let (ta, tb) = (self.value(a), self.value(b));
        let out = match (ta.shape(), tb.shape(), axis) {
            (&[_], &[_], 0) => {
                let mut data = ta.data().to_vec();
                data.extend_from_slice(tb.data());
                Tensor::vector(data)
            }
            (&[m1, n1], &[m2, n2], 0) if n1 == n2 => {
                let mut data = ta.data().to_vec();
                data.extend_from_slice(tb.data());
                Tensor::new(vec![m1 + m2, n1], data)?
            }
            (&[m1, n1], &[m2, n2], 1) if m1 == m2 => {
                let mut data = Vec::with_capacity(m1 * (n1 + n2));
                for i in 0..m1 {
                    data.extend_from_slice(ta.row(i));
                    data.extend_from_slice(tb.row(i));
                }
                Tensor::new(vec![m1, n1 + n2], data)?
            }
            _ => return self.shapes_err("concat", a, b),
        };
        self.push("concat", Op::Concat(a, b, axis), out)
    }

    pub fn tanh(&mut self, a: ValueId) -> Result<ValueId, NumericsError> {
        let out = self.value(a).map(f64::tanh);
        self.push("tanh", Op::Tanh(a), out)
    }

    pub fn sigmoid(&mut self, a: ValueId) -> Result<ValueId, NumericsError> {
        let out = self.value(a).map(|v| 1.0 / (1.0 + (-v).exp()));
        self.push("sigmoid", Op::Sigmoid(a), out)
    }

    /// Softmax over a vector. Masked entries are pushed to -1e30 before
    /// exponentiation, which underflows to exactly 0 after normalization.
    pub fn softmax(&mut self, a: ValueId, mask: Option<&[bool]>) -> Result<ValueId, NumericsError> {
        let ta = self.value(a);
        if ta.rank() != 1 {
            return Err(NumericsError::ShapeMismatch {
                op: "softmax",
                lhs: ta.shape().to_vec(),
                rhs: vec![],
            });
        }
        if let Some(m) = mask {
            if m.len() != ta.len() {
                return Err(NumericsError::ShapeMismatch {
                    op: "softmax",
                    lhs: ta.shape().to_vec(),
                    rhs: vec![m.len()],
                });
            }
            if m.iter().all(|&keep| !keep) {
                return Err(NumericsError::DegenerateInput {
                    what: "softmax: all positions masked",
                });
            }
        }
        let scores: Vec<f64> = ta
            .data()
            .iter()
            .enumerate()
            .map(|(i, &v)| match mask {
                Some(m) if !m[i] => v - 1e30,
                _ => v,
            })
            .collect();
        let max = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let exps: Vec<f64> = scores.iter().map(|&v| (v - max).exp()).collect();
        let total: f64 = exps.iter().sum();
        let out = Tensor::vector(exps.iter().map(|&e| e / total).collect());
        self.push("softmax", Op::Softmax(a, mask.map(|m| m.to_vec())), out)
    }

    /// Rows of `e` selected by `ids`: `[v,d] -> [len(ids),d]`.
    pub fn gather(&mut self, e: ValueId, ids: &[usize]) -> Result<ValueId, NumericsError> {
        let te = self.value(e);
        if te.rank() != 2 {
            return Err(NumericsError::ShapeMismatch {
                op: "gather",
                lhs: te.shape().to_vec(),
                rhs: vec![],
            });
        }
        let (rows, cols) = (te.shape()[0], te.shape()[1]);
        let mut data = Vec::with_capacity(ids.len() * cols);
        for &id in ids {
            if id >= rows {
                return Err(NumericsError::IndexOutOfRange { index: id, rows });
            }
            data.extend_from_slice(te.row(id));
        }
        let out = Tensor::new(vec![ids.len(), cols], data)?;
        self.push("gather", Op::Gather(e, ids.to_vec()), out)
    }

    /// Row `i` of a matrix as a vector.
    pub fn row(&mut self, m: ValueId, i: usize) -> Result<ValueId, NumericsError> {
        let tm = self.value(m);
        if tm.rank() != 2 {
            return Err(NumericsError::ShapeMismatch {
                op: "row",
                lhs: tm.shape().to_vec(),
                rhs: vec![],
            });
        }
        if i >= tm.shape()[0] {
            return Err(NumericsError::IndexOutOfRange {
                index: i,
                rows: tm.shape()[0],
            });
        }
        let out = Tensor::vector(tm.row(i).to_vec());
        self.push("row", Op::Row(m, i), out)
    }

    pub fn dot(&mut self, a: ValueId, b: ValueId) -> Result<ValueId, NumericsError> {
        let (ta, tb) = (self.value(a), self.value(b));
        if ta.rank() != 1 || ta.shape() != tb.shape() {
            return self.shapes_err("dot", a, b);
        }
        let v = ta.data().iter().zip(tb.data()).map(|(x, y)| x * y).sum();
        self.push("dot", Op::Dot(a, b), Tensor::scalar(v))
    }

    /// Stack scalars into a vector.
    pub fn stack(&mut self, parts: &[ValueId]) -> Result<ValueId, NumericsError> {
        let mut data = Vec::with_capacity(parts.len());
        for &p in parts {
            let tp = self.value(p);
            if tp.len() != 1 {
                return Err(NumericsError::ShapeMismatch {
                    op: "stack",
                    lhs: tp.shape().to_vec(),
                    rhs: vec![],
                });
            }
            data.push(tp.item());
        }
        self.push("stack", Op::Stack(parts.to_vec()), Tensor::vector(data))
    }

    /// `sum_t weights[t] * states[t]` for equally shaped vectors.
    pub fn weighted_sum(
        &mut self,
        states: &[ValueId],
        weights: ValueId,
    ) -> Result<ValueId, NumericsError> {
        let tw = self.value(weights);
        if tw.rank() != 1 || tw.len() != states.len() {
            return Err(NumericsError::ShapeMismatch {
                op: "weighted_sum",
                lhs: vec![states.len()],
                rhs: tw.shape().to_vec(),
            });
        }
        let dim = match states.first() {
            Some(&s) => self.value(s).len(),
            None => {
                return Err(NumericsError::DegenerateInput {
                    what: "weighted_sum: no states",
                })
            }
        };
        let mut out = vec![0.0; dim];
        for (t, &s) in states.iter().enumerate() {
            let ts = self.value(s);
            if ts.rank() != 1 || ts.len() != dim {
                return self.shapes_err("weighted_sum", states[0], s);
            }
            let w = tw.data()[t];
            for (o, &v) in out.iter_mut().zip(ts.data()) {
                *o += w * v;
            }
        }
        self.push(
            "weighted_sum",
            Op::WeightedSum(states.to_vec(), weights),
            Tensor::vector(out),
        )
    }

    pub fn scale(&mut self, a: ValueId, k: f64) -> Result<ValueId, NumericsError> {
        let out = self.value(a).map(|v| k * v);
        self.push("scale", Op::Scale(a, k), out)
    }

    pub fn sum(&mut self, a: ValueId) -> Result<ValueId, NumericsError> {
        let v = self.value(a).data().iter().sum();
        self.push("sum", Op::Sum(a), Tensor::scalar(v))
    }

    /// Binary cross-entropy of a scalar probability against target 0 or 1.
    /// The probability is clamped to `[1e-7, 1 - 1e-7]` before the logs.
    pub fn bce(&mut self, prediction: ValueId, target: f64) -> Result<ValueId, NumericsError> {
        let tp = self.value(prediction);
        if tp.len() != 1 {
            return Err(NumericsError::ShapeMismatch {
                op: "bce",
                lhs: tp.shape().to_vec(),
                rhs: vec![],
            });
        }
        let p = clamp_prob(tp.item());
        let loss = -(target * p.ln() + (1.0 - target) * (1.0 - p).ln());
        self.push("bce", Op::Bce(prediction, target), Tensor::scalar(loss))
    }

    /// Reverse accumulation of `d loss / d node` for every node.
    pub fn backward(&self, loss: ValueId) -> Result<Gradients, NumericsError> {
        if loss.0 >= self.nodes.len() {
            return Err(NumericsError::UnknownValue { id: loss.0 });
        }
        if self.value(loss).len() != 1 {
            return Err(NumericsError::NonScalarLoss {
                shape: self.value(loss).shape().to_vec(),
            });
        }
        let mut slots: Vec<Option<Tensor>> = vec![None; self.nodes.len()];
        slots[loss.0] = Some(Tensor::filled(self.value(loss).shape(), 1.0));

        for idx in (0..=loss.0).rev() {
            let g = match slots[idx].take() {
                Some(g) => g,
                None => continue,
            };
            self.accumulate_inputs(idx, &g, &mut slots);
            slots[idx] = Some(g);
        }
        Ok(Gradients { slots })
    }

    fn accumulate_inputs(&self, idx: usize, g: &Tensor, slots: &mut [Option<Tensor>]) {
        let node = &self.nodes[idx];
        match &node.op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                let (ta, tb) = (self.value(*a), self.value(*b));
                match (ta.shape(), tb.shape()) {
                    (&[m, n], &[_]) => {
                        // y[i] = sum_j a[i,j] b[j]
                        let mut da = Tensor::zeros(&[m, n]);
                        {
                            let d = da.data_mut();
                            for i in 0..m {
                                let gi = g.data()[i];
                                for (j, &bv) in tb.data().iter().enumerate() {
                                    d[i * n + j] = gi * bv;
                                }
                            }
                        }
                        add_grad(slots, *a, da);
                        let mut db = Tensor::zeros(&[n]);
                        {
                            let d = db.data_mut();
                            for i in 0..m {
                                let gi = g.data()[i];
                                for (j, dv) in d.iter_mut().enumerate() {
                                    *dv += gi * ta.data()[i * n + j];
                                }
                            }
                        }
                        add_grad(slots, *b, db);
                    }
                    (&[m, n], &[_, p]) => {
                        // dA = G B^T ; dB = A^T G
                        let mut da = Tensor::zeros(&[m, n]);
                        {
                            let d = da.data_mut();
                            for i in 0..m {
                                for k in 0..n {
                                    let mut acc = 0.0;
                                    for j in 0..p {
                                        acc += g.data()[i * p + j] * tb.data()[k * p + j];
                                    }
                                    d[i * n + k] = acc;
                                }
                            }
                        }
                        add_grad(slots, *a, da);
                        let mut db = Tensor::zeros(&[n, p]);
                        {
                            let d = db.data_mut();
                            for k in 0..n {
                                for i in 0..m {
                                    let aik = ta.data()[i * n + k];
                                    for j in 0..p {
                                        d[k * p + j] += aik * g.data()[i * p + j];
                                    }
                                }
                            }
                        }
                        add_grad(slots, *b, db);
                    }
                    _ => unreachable!("matmul shapes validated in forward"),
                }
            }
            Op::Add(a, b) => {
                add_grad(slots, *a, g.clone());
                add_grad(slots, *b, g.clone());
            }
            Op::AddRowBroadcast(a, b) => {
                add_grad(slots, *a, g.clone());
                let n = self.value(*b).len();
                let rows = g.len() / n;
                let mut db = Tensor::zeros(&[n]);
                {
                    let d = db.data_mut();
                    for i in 0..rows {
                        for (j, dv) in d.iter_mut().enumerate() {
                            *dv += g.data()[i * n + j];
                        }
                    }
                }
                add_grad(slots, *b, db);
            }
            Op::Sub(a, b) => {
                add_grad(slots, *a, g.clone());
                add_grad(slots, *b, g.map(|v| -v));
            }
            Op::Hadamard(a, b) => {
                let ga = zip_map(g, self.value(*b), |x, y| x * y);
                let gb = zip_map(g, self.value(*a), |x, y| x * y);
                add_grad(slots, *a, ga);
                add_grad(slots, *b, gb);
            }
            Op::Concat(a, b, axis) => {
                let (ta, tb) = (self.value(*a), self.value(*b));
                match (ta.shape(), tb.shape(), *axis) {
                    (&[la], &[_], 0) | (&[la, _], &[_, _], 0) => {
                        let la_len = if ta.rank() == 1 { la } else { ta.len() };
                        let ga = Tensor::new(ta.shape().to_vec(), g.data()[..la_len].to_vec())
                            .expect("concat grad shape");
                        let gb = Tensor::new(tb.shape().to_vec(), g.data()[la_len..].to_vec())
                            .expect("concat grad shape");
                        add_grad(slots, *a, ga);
                        add_grad(slots, *b, gb);
                    }
                    (&[m, n1], &[_, n2], 1) => {
                        let mut ga = Tensor::zeros(&[m, n1]);
                        let mut gb = Tensor::zeros(&[m, n2]);
                        {
                            let (da, db) = (ga.data_mut(), gb.data_mut());
                            let w = n1 + n2;
                            for i in 0..m {
                                da[i * n1..(i + 1) * n1]
                                    .copy_from_slice(&g.data()[i * w..i * w + n1]);
                                db[i * n2..(i + 1) * n2]
                                    .copy_from_slice(&g.data()[i * w + n1..(i + 1) * w]);
                            }
                        }
                        add_grad(slots, *a, ga);
                        add_grad(slots, *b, gb);
                    }
                    _ => unreachable!("concat shapes validated in forward"),
                }
            }
            Op::Tanh(a) => {
                let ga = zip_map(g, &node.value, |gv, y| gv * (1.0 - y * y));
                add_grad(slots, *a, ga);
            }
            Op::Sigmoid(a) => {
                let ga = zip_map(g, &node.value, |gv, y| gv * y * (1.0 - y));
                add_grad(slots, *a, ga);
            }
            Op::Softmax(a, _) => {
                // dv = y ⊙ (g - (g·y)); zero at masked positions since y is 0.
                let y = &node.value;
                let gy: f64 = g.data().iter().zip(y.data()).map(|(gv, yv)| gv * yv).sum();
                let ga = zip_map(g, y, |gv, yv| yv * (gv - gy));
                add_grad(slots, *a, ga);
            }
            Op::Gather(e, ids) => {
                let te = self.value(*e);
                let (rows, cols) = (te.shape()[0], te.shape()[1]);
                let mut de = Tensor::zeros(&[rows, cols]);
                {
                    let d = de.data_mut();
                    for (t, &id) in ids.iter().enumerate() {
                        for j in 0..cols {
                            d[id * cols + j] += g.data()[t * cols + j];
                        }
                    }
                }
                add_grad(slots, *e, de);
            }
            Op::Row(m, i) => {
                let tm = self.value(*m);
                let (rows, cols) = (tm.shape()[0], tm.shape()[1]);
                let mut dm = Tensor::zeros(&[rows, cols]);
                dm.data_mut()[i * cols..(i + 1) * cols].copy_from_slice(g.data());
                add_grad(slots, *m, dm);
            }
            Op::Dot(a, b) => {
                let gv = g.item();
                add_grad(slots, *a, self.value(*b).map(|v| gv * v));
                add_grad(slots, *b, self.value(*a).map(|v| gv * v));
            }
            Op::Stack(parts) => {
                for (t, &p) in parts.iter().enumerate() {
                    let shape = self.value(p).shape().to_vec();
                    add_grad(
                        slots,
                        p,
                        Tensor::new(shape, vec![g.data()[t]]).expect("scalar grad"),
                    );
                }
            }
            Op::WeightedSum(states, weights) => {
                let tw = self.value(*weights);
                let mut dw = Tensor::zeros(&[states.len()]);
                for (t, &s) in states.iter().enumerate() {
                    let w = tw.data()[t];
                    add_grad(slots, s, g.map(|v| w * v));
                    dw.data_mut()[t] = g
                        .data()
                        .iter()
                        .zip(self.value(s).data())
                        .map(|(gv, hv)| gv * hv)
                        .sum();
                }
                add_grad(slots, *weights, dw);
            }
            Op::Scale(a, k) => {
                let k = *k;
                add_grad(slots, *a, g.map(|v| k * v));
            }
            Op::Sum(a) => {
                let gv = g.item();
                add_grad(slots, *a, Tensor::filled(self.value(*a).shape(), gv));
            }
            Op::Bce(p, target) => {
                let pv = clamp_prob(self.value(*p).item());
                let d = -target / pv + (1.0 - target) / (1.0 - pv);
                let shape = self.value(*p).shape().to_vec();
                add_grad(
                    slots,
                    *p,
                    Tensor::new(shape, vec![g.item() * d]).expect("scalar grad"),
                );
            }
        }
    }
}

fn clamp_prob(p: f64) -> f64 {
    const EPS: f64 = 1e-7;
    p.clamp(EPS, 1.0 - EPS)
}

fn zip_map(a: &Tensor, b: &Tensor, f: impl Fn(f64, f64) -> f64) -> Tensor {
    debug_assert_eq!(a.len(), b.len());
    let data: Vec<f64> = a
        .data()
        .iter()
        .zip(b.data())
        .map(|(&x, &y)| f(x, y))
        .collect();
    Tensor::new(a.shape().to_vec(), data).expect("zip_map preserves shape")
}

fn add_grad(slots: &mut [Option<Tensor>], id: ValueId, g: Tensor) {
    match &mut slots[id.0] {
        Some(existing) => {
            let d = existing.data_mut();
            for (e, &v) in d.iter_mut().zip(g.data()) {
                *e += v;
            }
        }
        slot @ None => *slot = Some(g),
    }
}
