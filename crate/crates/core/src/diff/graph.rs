use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::Array;

use super::conv::{self, ConvDims, Conv3dSpec};
use super::ssim;

/// Handle to a node of a [`Graph`]. Only meaningful for the graph that
/// produced it.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Clone, Debug)]
enum Op<T> {
    Leaf,
    Conv3d { x: Var, k: Var, spec: Conv3dSpec, dims: ConvDims },
    AddBias { x: Var, b: Var },
    Dense { x: Var, w: Var, b: Var },
    Relu(Var),
    Softmax(Var),
    TemporalPool { x: Var, bins: Vec<(usize, usize)> },
    SpatialMean(Var),
    ChannelMean(Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    MatMul(Var, Var),
    Transpose(Var),
    Affine { x: Var, scale: T },
    Sum(Var),
    Mean(Var),
    Ln(Var),
    Clamp { x: Var, lo: T, hi: T },
    GlobalSsim { x: Var, y: Var, raw: T },
    Concat(Var, Var),
    Reshape(Var),
    Slice { x: Var, index: usize },
}

#[derive(Clone, Debug)]
struct Node<T> {
    value: Array<T>,
    op: Op<T>,
    needs_grad: bool,
    grad: Option<Array<T>>,
}

/// A recorded computation. Nodes are appended in evaluation order, so the
/// node list is already a topological order and the graph cannot contain
/// cycles.
#[derive(Clone, Debug, Default)]
pub struct Graph<T> {
    nodes: Vec<Node<T>>,
}

/// Contiguous temporal bins `[⌊iT/n⌋, ⌊(i+1)T/n⌋)`, widened to one row when
/// `T < n` would leave a bin empty.
pub fn pool_bins(t: usize, t_out: usize) -> Vec<(usize, usize)> {
    (0..t_out)
        .map(|i| {
            let start = i * t / t_out;
            let end = ((i + 1) * t / t_out).max(start + 1).min(t);
            (start.min(t - 1), end)
        })
        .collect()
}

fn same_shape(op: &str, a: &[usize], b: &[usize]) -> Result<()> {
    if a != b {
        return Err(Error::Shape(format!("{op}: {a:?} vs {b:?}")));
    }
    Ok(())
}

fn add_into<T: Scalar>(dst: &mut [T], src: &[T]) {
    for (d, &s) in dst.iter_mut().zip(src) {
        *d += s;
    }
}

/// `a (m×k) · b (k×n)`.
fn matmul_raw<T: Scalar>(a: &[T], b: &[T], m: usize, k: usize, n: usize) -> Vec<T> {
    let mut c = vec![T::zero(); m * n];
    for i in 0..m {
        let row = &mut c[i * n..(i + 1) * n];
        for p in 0..k {
            let av = a[i * k + p];
            for (cv, &bv) in row.iter_mut().zip(&b[p * n..(p + 1) * n]) {
                *cv += av * bv;
            }
        }
    }
    c
}

fn transpose_raw<T: Scalar>(a: &[T], m: usize, n: usize) -> Vec<T> {
    let mut t = vec![T::zero(); m * n];
    for i in 0..m {
        for j in 0..n {
            t[j * m + i] = a[i * n + j];
        }
    }
    t
}

fn as_matrix(shape: &[usize]) -> Option<(usize, usize)> {
    match shape {
        [n] => Some((1, *n)),
        [m, n] => Some((*m, *n)),
        _ => None,
    }
}

impl<T: Scalar> Graph<T> {
    pub fn new() -> Self {
        Graph { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Array<T>, op: Op<T>, inputs: &[Var]) -> Var {
        let needs_grad = inputs.iter().any(|v| self.nodes[v.0].needs_grad);
        self.nodes.push(Node {
            value,
            op,
            needs_grad,
            grad: None,
        });
        Var(self.nodes.len() - 1)
    }

    /// Leaf that receives a gradient.
    pub fn param(&mut self, value: Array<T>) -> Var {
        self.nodes.push(Node {
            value,
            op: Op::Leaf,
            needs_grad: true,
            grad: None,
        });
        Var(self.nodes.len() - 1)
    }

    /// Leaf that never receives a gradient.
    pub fn constant(&mut self, value: Array<T>) -> Var {
        self.nodes.push(Node {
            value,
            op: Op::Leaf,
            needs_grad: false,
            grad: None,
        });
        Var(self.nodes.len() - 1)
    }

    pub fn value(&self, v: Var) -> &Array<T> {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        self.nodes[v.0].value.shape()
    }

    /// Gradient of the last [`Graph::backward`] loss with respect to `v`.
    /// `None` when `v` does not influence the loss or needs no gradient.
    pub fn grad(&self, v: Var) -> Option<&Array<T>> {
        self.nodes[v.0].grad.as_ref()
    }

    fn data(&self, v: Var) -> &[T] {
        self.nodes[v.0].value.data()
    }

    pub fn conv3d(&mut self, x: Var, k: Var, spec: Conv3dSpec) -> Result<Var> {
        let dims = conv::conv_dims(self.shape(x), self.shape(k), &spec)?;
        let y = conv::forward(self.data(x), self.data(k), &dims, &spec);
        let value = Array::from_vec(&dims.output, y)?;
        Ok(self.push(value, Op::Conv3d { x, k, spec, dims }, &[x, k]))
    }

    /// Adds `b` (length = last axis of `x`) to every row of `x`.
    pub fn add_bias(&mut self, x: Var, b: Var) -> Result<Var> {
        let c = *self.shape(x).last().unwrap_or(&0);
        if self.shape(b) != [c] {
            return Err(Error::Shape(format!(
                "bias {:?} does not match trailing axis of {:?}",
                self.shape(b),
                self.shape(x)
            )));
        }
        let bias = self.data(b).to_vec();
        let mut value = self.value(x).clone();
        for row in value.data_mut().chunks_mut(c) {
            add_into(row, &bias);
        }
        Ok(self.push(value, Op::AddBias { x, b }, &[x, b]))
    }

    /// Affine map `x·W + b` for `x` of shape `[in]` or `[n, in]`.
    pub fn dense(&mut self, x: Var, w: Var, b: Var) -> Result<Var> {
        let xs = self.shape(x).to_vec();
        let (m, k) = as_matrix(&xs).ok_or_else(|| Error::Shape(format!("dense input {xs:?}")))?;
        let ws = self.shape(w);
        if ws.len() != 2 || ws[0] != k || self.shape(b) != [ws[1]] {
            return Err(Error::Shape(format!(
                "dense: input {xs:?}, weight {ws:?}, bias {:?}",
                self.shape(b)
            )));
        }
        let n = ws[1];
        let mut y = matmul_raw(self.data(x), self.data(w), m, k, n);
        let bias = self.data(b);
        for row in y.chunks_mut(n) {
            add_into(row, bias);
        }
        let shape = if xs.len() == 1 { vec![n] } else { vec![m, n] };
        let value = Array::from_vec(&shape, y)?;
        Ok(self.push(value, Op::Dense { x, w, b }, &[x, w, b]))
    }

    pub fn relu(&mut self, x: Var) -> Var {
        let value = self.value(x).map(|v| if v > T::zero() { v } else { T::zero() });
        self.push(value, Op::Relu(x), &[x])
    }

    /// Softmax along the last axis, with max subtraction.
    pub fn softmax(&mut self, x: Var) -> Result<Var> {
        let k = *self
            .shape(x)
            .last()
            .ok_or_else(|| Error::Shape("softmax of a 0-d array".into()))?;
        let mut value = self.value(x).clone();
        for row in value.data_mut().chunks_mut(k) {
            let max = row.iter().copied().fold(T::neg_infinity(), T::max);
            let mut total = T::zero();
            for v in row.iter_mut() {
                *v = (*v - max).exp();
                total += *v;
            }
            for v in row.iter_mut() {
                *v /= total;
            }
        }
        Ok(self.push(value, Op::Softmax(x), &[x]))
    }

    /// Averages contiguous row bins of a `T×D` array down to `t_out` rows.
    pub fn temporal_pool(&mut self, x: Var, t_out: usize) -> Result<Var> {
        let (t, d) = match self.shape(x) {
            [t, d] if *t >= 1 && t_out >= 1 => (*t, *d),
            s => {
                return Err(Error::Shape(format!(
                    "temporal_pool of {s:?} to {t_out} rows"
                )))
            }
        };
        let bins = pool_bins(t, t_out);
        let src = self.data(x);
        let mut y = vec![T::zero(); t_out * d];
        for (i, &(a, b)) in bins.iter().enumerate() {
            let inv = T::one() / T::of((b - a) as f64);
            let out = &mut y[i * d..(i + 1) * d];
            for r in a..b {
                add_into(out, &src[r * d..(r + 1) * d]);
            }
            for v in out.iter_mut() {
                *v *= inv;
            }
        }
        let value = Array::from_vec(&[t_out, d], y)?;
        Ok(self.push(value, Op::TemporalPool { x, bins }, &[x]))
    }

    /// `T×H×W×C → T×C`: mean over the two spatial axes.
    pub fn spatial_mean(&mut self, x: Var) -> Result<Var> {
        let [t, h, w, c] = *self.shape(x) else {
            return Err(Error::Shape(format!("spatial_mean of {:?}", self.shape(x))));
        };
        let src = self.data(x);
        let inv = T::one() / T::of((h * w) as f64);
        let mut y = vec![T::zero(); t * c];
        for ti in 0..t {
            let out = &mut y[ti * c..(ti + 1) * c];
            for px in src[ti * h * w * c..(ti + 1) * h * w * c].chunks(c) {
                add_into(out, px);
            }
            for v in out.iter_mut() {
                *v *= inv;
            }
        }
        let value = Array::from_vec(&[t, c], y)?;
        Ok(self.push(value, Op::SpatialMean(x), &[x]))
    }

    /// `…×C → …`: mean over the trailing channel axis.
    pub fn channel_mean(&mut self, x: Var) -> Result<Var> {
        let shape = self.shape(x).to_vec();
        let Some((&c, rest)) = shape.split_last() else {
            return Err(Error::Shape("channel_mean of a 0-d array".into()));
        };
        let inv = T::one() / T::of(c as f64);
        let y = self
            .data(x)
            .chunks(c)
            .map(|px| px.iter().copied().sum::<T>() * inv)
            .collect();
        let value = Array::from_vec(rest, y)?;
        Ok(self.push(value, Op::ChannelMean(x), &[x]))
    }

    fn zip_with(&mut self, a: Var, b: Var, name: &str, f: impl Fn(T, T) -> T, op: Op<T>) -> Result<Var> {
        same_shape(name, self.shape(a), self.shape(b))?;
        let y = self.data(a).iter().zip(self.data(b)).map(|(&p, &q)| f(p, q)).collect();
        let value = Array::from_vec(self.shape(a), y)?;
        Ok(self.push(value, op, &[a, b]))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.zip_with(a, b, "add", |p, q| p + q, Op::Add(a, b))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.zip_with(a, b, "sub", |p, q| p - q, Op::Sub(a, b))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.zip_with(a, b, "mul", |p, q| p * q, Op::Mul(a, b))
    }

    /// Matrix product of two 2-d arrays.
    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (m, k, k2, n) = match (self.shape(a), self.shape(b)) {
            ([m, k], [k2, n]) => (*m, *k, *k2, *n),
            (sa, sb) => return Err(Error::Shape(format!("matmul {sa:?} × {sb:?}"))),
        };
        if k != k2 {
            return Err(Error::Shape(format!("matmul [{m}, {k}] × [{k2}, {n}]")));
        }
        let y = matmul_raw(self.data(a), self.data(b), m, k, n);
        let value = Array::from_vec(&[m, n], y)?;
        Ok(self.push(value, Op::MatMul(a, b), &[a, b]))
    }

    pub fn transpose(&mut self, x: Var) -> Result<Var> {
        let [m, n] = *self.shape(x) else {
            return Err(Error::Shape(format!("transpose of {:?}", self.shape(x))));
        };
        let y = transpose_raw(self.data(x), m, n);
        let value = Array::from_vec(&[n, m], y)?;
        Ok(self.push(value, Op::Transpose(x), &[x]))
    }

    /// `scale·x + shift`, elementwise.
    pub fn affine(&mut self, x: Var, scale: T, shift: T) -> Var {
        let value = self.value(x).map(|v| scale * v + shift);
        self.push(value, Op::Affine { x, scale }, &[x])
    }

    pub fn scale(&mut self, x: Var, factor: T) -> Var {
        let value = self.value(x).map(|v| factor * v);
        self.push(value, Op::Affine { x, scale: factor }, &[x])
    }

    pub fn sum(&mut self, x: Var) -> Var {
        let s = self.data(x).iter().copied().sum::<T>();
        self.push(Array::scalar(s), Op::Sum(x), &[x])
    }

    pub fn mean(&mut self, x: Var) -> Var {
        let n = T::of(self.data(x).len() as f64);
        let s = self.data(x).iter().copied().sum::<T>() / n;
        self.push(Array::scalar(s), Op::Mean(x), &[x])
    }

    pub fn ln(&mut self, x: Var) -> Var {
        let value = self.value(x).map(|v| v.ln());
        self.push(value, Op::Ln(x), &[x])
    }

    /// Elementwise clamp to `[lo, hi]`; the gradient is zero where clamped.
    pub fn clamp(&mut self, x: Var, lo: T, hi: T) -> Var {
        let value = self.value(x).map(|v| v.max(lo).min(hi));
        self.push(value, Op::Clamp { x, lo, hi }, &[x])
    }

    /// Global-statistics SSIM of two equally shaped maps, clamped to `[0, 1]`.
    pub fn global_ssim(&mut self, x: Var, y: Var) -> Result<Var> {
        same_shape("global_ssim", self.shape(x), self.shape(y))?;
        if self.data(x).is_empty() {
            return Err(Error::Shape("global_ssim of empty maps".into()));
        }
        let raw = ssim::stats(self.data(x), self.data(y)).raw;
        let value = Array::scalar(raw.max(T::zero()).min(T::one()));
        Ok(self.push(value, Op::GlobalSsim { x, y, raw }, &[x, y]))
    }

    /// Concatenation along the last axis; leading axes must agree.
    pub fn concat(&mut self, a: Var, b: Var) -> Result<Var> {
        let (sa, sb) = (self.shape(a).to_vec(), self.shape(b).to_vec());
        if sa.is_empty() || sa.len() != sb.len() || sa[..sa.len() - 1] != sb[..sb.len() - 1] {
            return Err(Error::Shape(format!("concat {sa:?} with {sb:?}")));
        }
        let (ca, cb) = (sa[sa.len() - 1], sb[sb.len() - 1]);
        let mut y = Vec::with_capacity(self.data(a).len() + self.data(b).len());
        for (ra, rb) in self.data(a).chunks(ca.max(1)).zip(self.data(b).chunks(cb.max(1))) {
            y.extend_from_slice(ra);
            y.extend_from_slice(rb);
        }
        let mut shape = sa.clone();
        *shape.last_mut().unwrap() = ca + cb;
        let value = Array::from_vec(&shape, y)?;
        Ok(self.push(value, Op::Concat(a, b), &[a, b]))
    }

    pub fn reshape(&mut self, x: Var, shape: &[usize]) -> Result<Var> {
        let value = self.value(x).clone().reshape(shape)?;
        Ok(self.push(value, Op::Reshape(x), &[x]))
    }

    /// Sub-array at `index` along the leading axis.
    pub fn slice(&mut self, x: Var, index: usize) -> Result<Var> {
        match self.shape(x).first() {
            Some(&n) if index < n => {}
            _ => {
                return Err(Error::Shape(format!(
                    "slice {index} of {:?}",
                    self.shape(x)
                )))
            }
        }
        let value = self.value(x).outer(index);
        Ok(self.push(value, Op::Slice { x, index }, &[x]))
    }

    /// Smallest distance from any recorded kink (relu at 0, clamp bounds,
    /// SSIM clamp at 0 and 1) to the input it acts on. Finite differences
    /// with steps below this margin see a smooth function.
    pub fn kink_margin(&self) -> f64 {
        let mut margin = f64::INFINITY;
        for node in &self.nodes {
            match &node.op {
                Op::Relu(x) => {
                    for &v in self.data(*x) {
                        margin = margin.min(v.abs().as_f64());
                    }
                }
                Op::Clamp { x, lo, hi } => {
                    for &v in self.data(*x) {
                        margin = margin.min((v - *lo).abs().as_f64()).min((v - *hi).abs().as_f64());
                    }
                }
                Op::GlobalSsim { raw, .. } => {
                    margin = margin.min(raw.abs().as_f64()).min((*raw - T::one()).abs().as_f64());
                }
                _ => {}
            }
        }
        margin
    }

    /// Reverse-mode sweep from a scalar `loss`. Gradients of every node that
    /// depends on a [`Graph::param`] leaf are stored and readable through
    /// [`Graph::grad`]. Previous gradients are discarded.
    pub fn backward(&mut self, loss: Var) -> Result<()> {
        let n = self.shape(loss).iter().product::<usize>();
        if n != 1 {
            return Err(Error::NotScalar(self.shape(loss).to_vec()));
        }
        for node in &mut self.nodes {
            node.grad = None;
        }
        let mut grads: Vec<Option<Vec<T>>> = vec![None; self.nodes.len()];
        if !self.nodes[loss.0].needs_grad {
            return Ok(());
        }
        grads[loss.0] = Some(vec![T::one()]);

        for i in (0..=loss.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            self.propagate(i, &g, &mut grads);
            let shape = self.nodes[i].value.shape().to_vec();
            self.nodes[i].grad = Some(Array::from_vec(&shape, g)?);
        }
        Ok(())
    }

    fn wants(&self, v: Var) -> bool {
        self.nodes[v.0].needs_grad
    }

    fn propagate(&self, i: usize, g: &[T], grads: &mut [Option<Vec<T>>]) {
        let nodes = &self.nodes;
        let mut acc = |v: Var, contrib: Vec<T>| {
            if !nodes[v.0].needs_grad {
                return;
            }
            match &mut grads[v.0] {
                Some(existing) => add_into(existing, &contrib),
                slot @ None => *slot = Some(contrib),
            }
        };
        let node = &self.nodes[i];
        let y = node.value.data();
        match &node.op {
            Op::Leaf => {}
            Op::Conv3d { x, k, spec, dims } => {
                let (dx, dk) = conv::backward(
                    self.data(*x),
                    self.data(*k),
                    g,
                    dims,
                    spec,
                    self.wants(*x),
                    self.wants(*k),
                );
                if let Some(dx) = dx {
                    acc(*x, dx);
                }
                if let Some(dk) = dk {
                    acc(*k, dk);
                }
            }
            Op::AddBias { x, b } => {
                let c = self.shape(*b)[0];
                if self.wants(*b) {
                    let mut db = vec![T::zero(); c];
                    for row in g.chunks(c) {
                        add_into(&mut db, row);
                    }
                    acc(*b, db);
                }
                if self.wants(*x) {
                    acc(*x, g.to_vec());
                }
            }
            Op::Dense { x, w, b } => {
                let (m, k) = as_matrix(self.shape(*x)).unwrap();
                let n = self.shape(*w)[1];
                if self.wants(*x) {
                    let wt = transpose_raw(self.data(*w), k, n);
                    acc(*x, matmul_raw(g, &wt, m, n, k));
                }
                if self.wants(*w) {
                    let xt = transpose_raw(self.data(*x), m, k);
                    acc(*w, matmul_raw(&xt, g, k, m, n));
                }
                if self.wants(*b) {
                    let mut db = vec![T::zero(); n];
                    for row in g.chunks(n) {
                        add_into(&mut db, row);
                    }
                    acc(*b, db);
                }
            }
            Op::Relu(x) => {
                let d = self
                    .data(*x)
                    .iter()
                    .zip(g)
                    .map(|(&v, &gv)| if v > T::zero() { gv } else { T::zero() })
                    .collect();
                acc(*x, d);
            }
            Op::Softmax(x) => {
                let k = *self.shape(*x).last().unwrap();
                let mut d = Vec::with_capacity(g.len());
                for (yr, gr) in y.chunks(k).zip(g.chunks(k)) {
                    let dot: T = yr.iter().zip(gr).map(|(&a, &b)| a * b).sum();
                    d.extend(yr.iter().zip(gr).map(|(&a, &b)| a * (b - dot)));
                }
                acc(*x, d);
            }
            Op::TemporalPool { x, bins } => {
                let d_in = self.shape(*x)[1];
                let mut d = vec![T::zero(); self.data(*x).len()];
                for (o, &(a, b)) in bins.iter().enumerate() {
                    let inv = T::one() / T::of((b - a) as f64);
                    for r in a..b {
                        for j in 0..d_in {
                            d[r * d_in + j] += g[o * d_in + j] * inv;
                        }
                    }
                }
                acc(*x, d);
            }
            Op::SpatialMean(x) => {
                let [_, h, w, c] = *self.shape(*x) else { unreachable!() };
                let inv = T::one() / T::of((h * w) as f64);
                let mut d = Vec::with_capacity(self.data(*x).len());
                for gr in g.chunks(c) {
                    for _ in 0..h * w {
                        d.extend(gr.iter().map(|&v| v * inv));
                    }
                }
                acc(*x, d);
            }
            Op::ChannelMean(x) => {
                let c = *self.shape(*x).last().unwrap();
                let inv = T::one() / T::of(c as f64);
                let d = g.iter().flat_map(|&v| std::iter::repeat(v * inv).take(c)).collect();
                acc(*x, d);
            }
            Op::Add(a, b) => {
                if self.wants(*a) {
                    acc(*a, g.to_vec());
                }
                if self.wants(*b) {
                    acc(*b, g.to_vec());
                }
            }
            Op::Sub(a, b) => {
                if self.wants(*a) {
                    acc(*a, g.to_vec());
                }
                if self.wants(*b) {
                    acc(*b, g.iter().map(|&v| -v).collect());
                }
            }
            Op::Mul(a, b) => {
                if self.wants(*a) {
                    acc(*a, g.iter().zip(self.data(*b)).map(|(&u, &v)| u * v).collect());
                }
                if self.wants(*b) {
                    acc(*b, g.iter().zip(self.data(*a)).map(|(&u, &v)| u * v).collect());
                }
            }
            Op::MatMul(a, b) => {
                let [m, k] = *self.shape(*a) else { unreachable!() };
                let n = self.shape(*b)[1];
                if self.wants(*a) {
                    let bt = transpose_raw(self.data(*b), k, n);
                    acc(*a, matmul_raw(g, &bt, m, n, k));
                }
                if self.wants(*b) {
                    let at = transpose_raw(self.data(*a), m, k);
                    acc(*b, matmul_raw(&at, g, k, m, n));
                }
            }
            Op::Transpose(x) => {
                let [m, n] = *self.shape(*x) else { unreachable!() };
                acc(*x, transpose_raw(g, n, m));
            }
            Op::Affine { x, scale } => acc(*x, g.iter().map(|&v| v * *scale).collect()),
            Op::Sum(x) => acc(*x, vec![g[0]; self.data(*x).len()]),
            Op::Mean(x) => {
                let n = self.data(*x).len();
                acc(*x, vec![g[0] / T::of(n as f64); n]);
            }
            Op::Ln(x) => acc(*x, g.iter().zip(self.data(*x)).map(|(&u, &v)| u / v).collect()),
            Op::Clamp { x, lo, hi } => {
                let d = self
                    .data(*x)
                    .iter()
                    .zip(g)
                    .map(|(&v, &gv)| if v >= *lo && v <= *hi { gv } else { T::zero() })
                    .collect();
                acc(*x, d);
            }
            Op::GlobalSsim { x, y: other, raw } => {
                if *raw < T::zero() || *raw > T::one() {
                    return;
                }
                let (xd, yd) = (self.data(*x), self.data(*other));
                let s = ssim::stats(xd, yd);
                if self.wants(*x) {
                    acc(*x, ssim::grad_wrt_first(xd, yd, &s, g[0]));
                }
                if self.wants(*other) {
                    acc(*other, ssim::grad_wrt_first(yd, xd, &ssim::swapped(&s), g[0]));
                }
            }
            Op::Concat(a, b) => {
                let ca = *self.shape(*a).last().unwrap();
                let cb = *self.shape(*b).last().unwrap();
                let rows = g.len() / (ca + cb).max(1);
                let mut da = Vec::with_capacity(rows * ca);
                let mut db = Vec::with_capacity(rows * cb);
                for r in g.chunks(ca + cb) {
                    da.extend_from_slice(&r[..ca]);
                    db.extend_from_slice(&r[ca..]);
                }
                if self.wants(*a) {
                    acc(*a, da);
                }
                if self.wants(*b) {
                    acc(*b, db);
                }
            }
            Op::Reshape(x) => acc(*x, g.to_vec()),
            Op::Slice { x, index } => {
                let mut d = vec![T::zero(); self.data(*x).len()];
                let inner = g.len();
                d[index * inner..(index + 1) * inner].copy_from_slice(g);
                acc(*x, d);
            }
        }
    }
}
