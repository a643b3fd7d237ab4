//! The recorded computation and its reverse sweep.

use std::cell::RefCell;
use std::collections::BTreeMap;

use super::value::{ParamSet, ShapeError, TensorValue};

/// Handle to one recorded tensor on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct VarId(usize);

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    Matmul(VarId, VarId),
    Add(VarId, VarId),
    Scale(VarId, f64),
    Mul(VarId, VarId),
    Concat(Vec<VarId>),
    Slice(VarId, usize),
    Row(VarId, usize),
    StackRows(Vec<VarId>),
    LeakyRelu(VarId, f64),
    Elu(VarId),
    Sigmoid(VarId),
    Tanh(VarId),
    Softmax(VarId),
    /// Column-wise max over rows; remembers the first winning row per column.
    RowMaxPool(VarId, Vec<usize>),
    Abs(VarId),
    Dot(VarId, VarId),
    Sum(VarId),
    CrossEntropyLogits(VarId, usize),
    BinaryCrossEntropyLogits(VarId, f64),
}

#[derive(Debug)]
struct Node {
    shape: Vec<usize>,
    data: Vec<f64>,
    op: Op,
}

/// Records every primitive operation in execution order; operations only
/// consume earlier results, so insertion order is already topological.
#[derive(Debug, Default)]
pub struct Tape {
    nodes: RefCell<Vec<Node>>,
    /// Parameter registrations, so each named tensor appears once per tape.
    registered: RefCell<BTreeMap<String, VarId>>,
    grads: RefCell<Vec<Vec<f64>>>,
}

impl Tape {
    pub fn new() -> Tape {
        Tape::default()
    }

    fn push(&self, shape: Vec<usize>, data: Vec<f64>, op: Op) -> VarId {
        debug_assert_eq!(shape.iter().product::<usize>(), data.len());
        let mut nodes = self.nodes.borrow_mut();
        nodes.push(Node { shape, data, op });
        VarId(nodes.len() - 1)
    }

    pub fn len(&self) -> usize {
        self.nodes.borrow().len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.borrow().is_empty()
    }

    pub fn shape(&self, id: VarId) -> Vec<usize> {
        self.nodes.borrow()[id.0].shape.clone()
    }

    pub fn value(&self, id: VarId) -> Vec<f64> {
        self.nodes.borrow()[id.0].data.clone()
    }

    /// The scalar held by a one-element tensor.
    pub fn scalar_value(&self, id: VarId) -> f64 {
        let nodes = self.nodes.borrow();
        assert_eq!(nodes[id.0].data.len(), 1, "not a scalar");
        nodes[id.0].data[0]
    }

    // ---- leaves ----

    pub fn leaf(&self, value: &TensorValue) -> VarId {
        self.push(value.shape.clone(), value.data.clone(), Op::Leaf)
    }

    pub fn vector(&self, data: Vec<f64>) -> VarId {
        let shape = vec![data.len()];
        self.push(shape, data, Op::Leaf)
    }

    pub fn scalar(&self, x: f64) -> VarId {
        self.push(vec![1], vec![x], Op::Leaf)
    }

    /// Registers a named parameter, reusing the node when already present,
    /// so shared weights accumulate one gradient.
    pub fn param(&self, name: &str, params: &ParamSet) -> VarId {
        if let Some(&id) = self.registered.borrow().get(name) {
            return id;
        }
        let id = self.leaf(params.get(name));
        self.registered.borrow_mut().insert(name.to_string(), id);
        id
    }

    // ---- primitive operations ----

    /// Matrix product. One-dimensional operands act as a single row (left)
    /// or a single column (right).
    pub fn matmul(&self, a: VarId, b: VarId) -> Result<VarId, ShapeError> {
        let (ashape, bshape) = (self.shape(a), self.shape(b));
        let (m, k1) = as_2d_rows(&ashape);
        let (k2, n) = as_2d_cols(&bshape);
        if k1 != k2 {
            return Err(ShapeError::new("matmul", &ashape, &bshape));
        }
        let (av, bv) = (self.value(a), self.value(b));
        let mut out = vec![0.0; m * n];
        for i in 0..m {
            for k in 0..k1 {
                let aik = av[i * k1 + k];
                if aik == 0.0 {
                    continue;
                }
                for j in 0..n {
                    out[i * n + j] += aik * bv[k * n + j];
                }
            }
        }
        let shape = match (ashape.len(), bshape.len()) {
            (1, 1) => vec![1],
            (1, 2) => vec![n],
            (2, 1) => vec![m],
            _ => vec![m, n],
        };
        Ok(self.push(shape, out, Op::Matmul(a, b)))
    }

    /// Elementwise sum; a one-dimensional right operand broadcasts across
    /// the rows of a two-dimensional left operand.
    pub fn add(&self, a: VarId, b: VarId) -> Result<VarId, ShapeError> {
        let (ashape, bshape) = (self.shape(a), self.shape(b));
        let (av, bv) = (self.value(a), self.value(b));
        let out = if ashape == bshape {
            av.iter().zip(&bv).map(|(x, y)| x + y).collect()
        } else if ashape.len() == 2 && bshape == [ashape[1]] {
            av.chunks(ashape[1]).flat_map(|row| row.iter().zip(&bv).map(|(x, y)| x + y)).collect()
        } else {
            return Err(ShapeError::new("add", &ashape, &bshape));
        };
        Ok(self.push(ashape, out, Op::Add(a, b)))
    }

    pub fn scale(&self, a: VarId, c: f64) -> VarId {
        let data = self.value(a).iter().map(|x| x * c).collect();
        self.push(self.shape(a), data, Op::Scale(a, c))
    }

    pub fn sub(&self, a: VarId, b: VarId) -> Result<VarId, ShapeError> {
        let neg = self.scale(b, -1.0);
        self.add(a, neg)
    }

    pub fn mul(&self, a: VarId, b: VarId) -> Result<VarId, ShapeError> {
        let (ashape, bshape) = (self.shape(a), self.shape(b));
        if ashape != bshape {
            return Err(ShapeError::new("mul", &ashape, &bshape));
        }
        let data = self.value(a).iter().zip(self.value(b)).map(|(x, y)| x * y).collect();
        Ok(self.push(ashape, data, Op::Mul(a, b)))
    }

    /// Concatenation of one-dimensional tensors.
    pub fn concat(&self, parts: &[VarId]) -> Result<VarId, ShapeError> {
        let mut data = Vec::new();
        for &p in parts {
            let shape = self.shape(p);
            if shape.len() != 1 {
                return Err(ShapeError::new("concat", &shape, &[]));
            }
            data.extend(self.value(p));
        }
        let shape = vec![data.len()];
        Ok(self.push(shape, data, Op::Concat(parts.to_vec())))
    }

    /// Contiguous range of a one-dimensional tensor.
    pub fn slice(&self, a: VarId, start: usize, len: usize) -> Result<VarId, ShapeError> {
        let shape = self.shape(a);
        if shape.len() != 1 || start + len > shape[0] {
            return Err(ShapeError::new("slice", &shape, &[start, len]));
        }
        let data = self.value(a)[start..start + len].to_vec();
        Ok(self.push(vec![len], data, Op::Slice(a, start)))
    }

    /// One row of a matrix as a vector.
    pub fn row(&self, a: VarId, i: usize) -> Result<VarId, ShapeError> {
        let shape = self.shape(a);
        if shape.len() != 2 || i >= shape[0] {
            return Err(ShapeError::new("row", &shape, &[i]));
        }
        let cols = shape[1];
        let data = self.value(a)[i * cols..(i + 1) * cols].to_vec();
        Ok(self.push(vec![cols], data, Op::Row(a, i)))
    }

    /// Stacks equal-length vectors into a matrix, one per row.
    pub fn stack_rows(&self, rows: &[VarId]) -> Result<VarId, ShapeError> {
        assert!(!rows.is_empty(), "cannot stack zero rows");
        let cols = match self.shape(rows[0]).as_slice() {
            &[c] => c,
            other => return Err(ShapeError::new("stack_rows", other, &[])),
        };
        let mut data = Vec::with_capacity(rows.len() * cols);
        for &r in rows {
            let shape = self.shape(r);
            if shape != [cols] {
                return Err(ShapeError::new("stack_rows", &shape, &[cols]));
            }
            data.extend(self.value(r));
        }
        let shape = vec![rows.len(), cols];
        Ok(self.push(shape, data, Op::StackRows(rows.to_vec())))
    }

    pub fn leaky_relu(&self, a: VarId, slope: f64) -> VarId {
        let data = self.value(a).iter().map(|&x| if x > 0.0 { x } else { slope * x }).collect();
        self.push(self.shape(a), data, Op::LeakyRelu(a, slope))
    }

    pub fn elu(&self, a: VarId) -> VarId {
        let data = self.value(a).iter().map(|&x| if x > 0.0 { x } else { x.exp() - 1.0 }).collect();
        self.push(self.shape(a), data, Op::Elu(a))
    }

    pub fn sigmoid(&self, a: VarId) -> VarId {
        let data = self.value(a).iter().map(|&x| sigmoid(x)).collect();
        self.push(self.shape(a), data, Op::Sigmoid(a))
    }

    pub fn tanh(&self, a: VarId) -> VarId {
        let data = self.value(a).iter().map(|&x| x.tanh()).collect();
        self.push(self.shape(a), data, Op::Tanh(a))
    }

    /// Numerically stable softmax over a one-dimensional tensor.
    pub fn softmax(&self, a: VarId) -> Result<VarId, ShapeError> {
        let shape = self.shape(a);
        if shape.len() != 1 || shape[0] == 0 {
            return Err(ShapeError::new("softmax", &shape, &[]));
        }
        let v = self.value(a);
        let max = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let exps: Vec<f64> = v.iter().map(|&x| (x - max).exp()).collect();
        let total: f64 = exps.iter().sum();
        let data = exps.iter().map(|e| e / total).collect();
        Ok(self.push(shape, data, Op::Softmax(a)))
    }

    /// Column-wise maximum over the rows of a matrix. Ties route the
    /// gradient to the first winning row.
    pub fn row_max_pool(&self, a: VarId) -> Result<VarId, ShapeError> {
        let shape = self.shape(a);
        let &[rows, cols] = shape.as_slice() else {
            return Err(ShapeError::new("row_max_pool", &shape, &[]));
        };
        if rows == 0 {
            return Err(ShapeError::new("row_max_pool", &shape, &[]));
        }
        let v = self.value(a);
        let mut data = vec![f64::NEG_INFINITY; cols];
        let mut winners = vec![0usize; cols];
        for i in 0..rows {
            for j in 0..cols {
                let x = v[i * cols + j];
                if x > data[j] {
                    data[j] = x;
                    winners[j] = i;
                }
            }
        }
        Ok(self.push(vec![cols], data, Op::RowMaxPool(a, winners)))
    }

    pub fn abs(&self, a: VarId) -> VarId {
        let data = self.value(a).iter().map(|x| x.abs()).collect();
        self.push(self.shape(a), data, Op::Abs(a))
    }

    /// Inner product of two equal-length vectors, as a scalar.
    pub fn dot(&self, a: VarId, b: VarId) -> Result<VarId, ShapeError> {
        let (ashape, bshape) = (self.shape(a), self.shape(b));
        if ashape.len() != 1 || ashape != bshape {
            return Err(ShapeError::new("dot", &ashape, &bshape));
        }
        let value = self.value(a).iter().zip(self.value(b)).map(|(x, y)| x * y).sum();
        Ok(self.push(vec![1], vec![value], Op::Dot(a, b)))
    }

    pub fn sum(&self, a: VarId) -> VarId {
        let value = self.value(a).iter().sum();
        self.push(vec![1], vec![value], Op::Sum(a))
    }

    /// Multi-class loss from raw logits: log-sum-exp minus the target logit.
    pub fn cross_entropy_with_logits(&self, logits: VarId, target: usize) -> Result<VarId, ShapeError> {
        let shape = self.shape(logits);
        if shape.len() != 1 || target >= shape[0] {
            return Err(ShapeError::new("cross_entropy_with_logits", &shape, &[target]));
        }
        let z = self.value(logits);
        let max = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lse = max + z.iter().map(|&x| (x - max).exp()).sum::<f64>().ln();
        let loss = lse - z[target];
        Ok(self.push(vec![1], vec![loss], Op::CrossEntropyLogits(logits, target)))
    }

    /// Binary loss from one raw logit and a 0/1 label.
    pub fn binary_cross_entropy_with_logits(&self, logit: VarId, label: f64) -> Result<VarId, ShapeError> {
        let shape = self.shape(logit);
        if shape != [1] {
            return Err(ShapeError::new("binary_cross_entropy_with_logits", &shape, &[1]));
        }
        let z = self.scalar_value(logit);
        let loss = z.max(0.0) - z * label + (-z.abs()).exp().ln_1p();
        Ok(self.push(vec![1], vec![loss], Op::BinaryCrossEntropyLogits(logit, label)))
    }

    // ---- reverse sweep ----

    /// Accumulates d(loss)/d(node) for every node, seeding the scalar loss
    /// with one. Inspect results with [`Tape::grad`] or collect parameter
    /// gradients with [`Tape::write_grads`].
    pub fn backward(&self, loss: VarId) {
        let nodes = self.nodes.borrow();
        assert_eq!(nodes[loss.0].data.len(), 1, "loss must be scalar");
        let mut grads: Vec<Vec<f64>> = nodes.iter().map(|n| vec![0.0; n.data.len()]).collect();
        grads[loss.0][0] = 1.0;

        for idx in (0..nodes.len()).rev() {
            let node = &nodes[idx];
            let g = std::mem::take(&mut grads[idx]);
            if g.iter().all(|&x| x == 0.0) {
                grads[idx] = g;
                continue;
            }
            match &node.op {
                Op::Leaf => {}
                Op::Matmul(a, b) => {
                    let (ashape, bshape) = (&nodes[a.0].shape, &nodes[b.0].shape);
                    let (m, k) = as_2d_rows(ashape);
                    let n = as_2d_cols(bshape).1;
                    let (av, bv) = (&nodes[a.0].data, &nodes[b.0].data);
                    // dA = dC Bᵀ, dB = Aᵀ dC
                    for i in 0..m {
                        for kk in 0..k {
                            let mut acc = 0.0;
                            for j in 0..n {
                                acc += g[i * n + j] * bv[kk * n + j];
                            }
                            grads[a.0][i * k + kk] += acc;
                        }
                    }
                    for kk in 0..k {
                        for j in 0..n {
                            let mut acc = 0.0;
                            for i in 0..m {
                                acc += av[i * k + kk] * g[i * n + j];
                            }
                            grads[b.0][kk * n + j] += acc;
                        }
                    }
                }
                Op::Add(a, b) => {
                    for (ga, &gx) in grads[a.0].iter_mut().zip(&g) {
                        *ga += gx;
                    }
                    let blen = nodes[b.0].data.len();
                    if blen == g.len() {
                        for (gb, &gx) in grads[b.0].iter_mut().zip(&g) {
                            *gb += gx;
                        }
                    } else {
                        // Row-broadcast bias: every row folds back onto it.
                        for (i, &gx) in g.iter().enumerate() {
                            grads[b.0][i % blen] += gx;
                        }
                    }
                }
                Op::Scale(a, c) => {
                    for (ga, &gx) in grads[a.0].iter_mut().zip(&g) {
                        *ga += c * gx;
                    }
                }
                Op::Mul(a, b) => {
                    let (av, bv) = (nodes[a.0].data.clone(), nodes[b.0].data.clone());
                    for ((ga, &gx), &y) in grads[a.0].iter_mut().zip(&g).zip(&bv) {
                        *ga += gx * y;
                    }
                    for ((gb, &gx), &x) in grads[b.0].iter_mut().zip(&g).zip(&av) {
                        *gb += gx * x;
                    }
                }
                Op::Concat(parts) => {
                    let mut offset = 0;
                    for &p in parts {
                        let len = nodes[p.0].data.len();
                        for (gp, &gx) in grads[p.0].iter_mut().zip(&g[offset..offset + len]) {
                            *gp += gx;
                        }
                        offset += len;
                    }
                }
                Op::Slice(a, start) => {
                    for (i, &gx) in g.iter().enumerate() {
                        grads[a.0][start + i] += gx;
                    }
                }
                Op::Row(a, i) => {
                    let cols = g.len();
                    for (j, &gx) in g.iter().enumerate() {
                        grads[a.0][i * cols + j] += gx;
                    }
                }
                Op::StackRows(rows) => {
                    let cols = g.len() / rows.len();
                    for (i, &r) in rows.iter().enumerate() {
                        for (gr, &gx) in grads[r.0].iter_mut().zip(&g[i * cols..(i + 1) * cols]) {
                            *gr += gx;
                        }
                    }
                }
                Op::LeakyRelu(a, slope) => {
                    let av = nodes[a.0].data.clone();
                    for ((ga, &gx), &x) in grads[a.0].iter_mut().zip(&g).zip(&av) {
                        *ga += gx * if x > 0.0 { 1.0 } else { *slope };
                    }
                }
                Op::Elu(a) => {
                    let av = nodes[a.0].data.clone();
                    let out = &node.data;
                    for (i, (ga, &gx)) in grads[a.0].iter_mut().zip(&g).enumerate() {
                        *ga += gx * if av[i] > 0.0 { 1.0 } else { out[i] + 1.0 };
                    }
                }
                Op::Sigmoid(a) => {
                    let out = &node.data;
                    for (i, (ga, &gx)) in grads[a.0].iter_mut().zip(&g).enumerate() {
                        *ga += gx * out[i] * (1.0 - out[i]);
                    }
                }
                Op::Tanh(a) => {
                    let out = &node.data;
                    for (i, (ga, &gx)) in grads[a.0].iter_mut().zip(&g).enumerate() {
                        *ga += gx * (1.0 - out[i] * out[i]);
                    }
                }
                Op::Softmax(a) => {
                    let s = &node.data;
                    let inner: f64 = g.iter().zip(s).map(|(gx, si)| gx * si).sum();
                    for (i, ga) in grads[a.0].iter_mut().enumerate() {
                        *ga += s[i] * (g[i] - inner);
                    }
                }
                Op::RowMaxPool(a, winners) => {
                    let cols = g.len();
                    for (j, &gx) in g.iter().enumerate() {
                        grads[a.0][winners[j] * cols + j] += gx;
                    }
                }
                Op::Abs(a) => {
                    let av = nodes[a.0].data.clone();
                    for ((ga, &gx), &x) in grads[a.0].iter_mut().zip(&g).zip(&av) {
                        *ga += gx * if x > 0.0 { 1.0 } else if x < 0.0 { -1.0 } else { 0.0 };
                    }
                }
                Op::Dot(a, b) => {
                    let (av, bv) = (nodes[a.0].data.clone(), nodes[b.0].data.clone());
                    for (ga, &y) in grads[a.0].iter_mut().zip(&bv) {
                        *ga += g[0] * y;
                    }
                    for (gb, &x) in grads[b.0].iter_mut().zip(&av) {
                        *gb += g[0] * x;
                    }
                }
                Op::Sum(a) => {
                    for ga in grads[a.0].iter_mut() {
                        *ga += g[0];
                    }
                }
                Op::CrossEntropyLogits(a, target) => {
                    let z = &nodes[a.0].data;
                    let max = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                    let exps: Vec<f64> = z.iter().map(|&x| (x - max).exp()).collect();
                    let total: f64 = exps.iter().sum();
                    for (i, ga) in grads[a.0].iter_mut().enumerate() {
                        let p = exps[i] / total;
                        *ga += g[0] * (p - if i == *target { 1.0 } else { 0.0 });
                    }
                }
                Op::BinaryCrossEntropyLogits(a, label) => {
                    let z = nodes[a.0].data[0];
                    grads[a.0][0] += g[0] * (sigmoid(z) - label);
                }
            }
            grads[idx] = g;
        }
        *self.grads.borrow_mut() = grads;
    }

    /// Gradient of the last [`Tape::backward`] call for one node.
    pub fn grad(&self, id: VarId) -> Vec<f64> {
        self.grads.borrow()[id.0].clone()
    }

    /// Adds the gradients of every registered parameter into its slot.
    /// Parameters never registered on this tape are left untouched.
    pub fn write_grads(&self, params: &mut ParamSet) {
        let grads = self.grads.borrow();
        assert!(!grads.is_empty(), "backward has not run");
        for (name, id) in self.registered.borrow().iter() {
            let slot = params.get_mut(name).grad_mut();
            for (dst, &src) in slot.iter_mut().zip(&grads[id.0]) {
                *dst += src;
            }
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

/// Interpret a shape as (rows, cols) with vectors as a single row.
fn as_2d_rows(shape: &[usize]) -> (usize, usize) {
    match shape {
        &[k] => (1, k),
        &[m, k] => (m, k),
        other => panic!("matmul operands must be vectors or matrices, got {other:?}"),
    }
}

/// Interpret a shape as (rows, cols) with vectors as a single column.
fn as_2d_cols(shape: &[usize]) -> (usize, usize) {
    match shape {
        &[k] => (k, 1),
        &[k, n] => (k, n),
        other => panic!("matmul operands must be vectors or matrices, got {other:?}"),
    }
}
