//! Reverse-mode differentiation on a tape, restricted to the primitives the
//! parameter-map network and the unrolled solvers use.
//!
//! Nodes are appended in creation order and keep their forward values; the
//! backward sweep visits them in reverse and never touches those values.

mod check;
pub mod nn;

pub use check::{finite_diff_check, FdCheck, FdReport, FD_EPS};
pub use nn::{ConvGeom, PoolGeom};

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::linops::LinearMap;
use crate::prox::{clip_raw, exp_neg_scaled, prox_l2_raw, EXP_CLAMP};
use crate::solvers::engine::{lincomb_raw, relu_raw, Engine};
#[allow(unused_imports)]
use num_traits::Float;

/// Handle to a node on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Var(usize);

impl Var {
    pub fn id(self) -> usize {
        self.0
    }
}

enum Op<'op> {
    Constant,
    Param,
    LinComb(Vec<(f64, usize)>),
    Mul(usize, usize),
    Apply(&'op dyn LinearMap, usize),
    Adjoint(&'op dyn LinearMap, usize),
    Conv {
        x: usize,
        w: usize,
        b: usize,
        geom: ConvGeom,
    },
    AvgPool(usize, PoolGeom),
    Upsample(usize, PoolGeom),
    Concat(Vec<usize>),
    Slice {
        x: usize,
        start: usize,
    },
    Gather {
        x: usize,
        index: Vec<usize>,
    },
    LeakyRelu(usize, f64),
    Softplus(usize),
    Relu(usize),
    Clip {
        q: usize,
        lambda: usize,
        comps: usize,
    },
    ProxL2 {
        p: usize,
        ax: usize,
        sigma: f64,
    },
    ExpNeg(usize, f64),
    Sum(usize),
    Mse {
        a: usize,
        b: usize,
        denom: f64,
    },
}

struct Node<'op> {
    value: Vec<f64>,
    op: Op<'op>,
    needs_grad: bool,
}

/// An append-only record of a computation.
#[derive(Default)]
pub struct Tape<'op> {
    nodes: Vec<Node<'op>>,
    clamped: usize,
}

/// Gradients of a scalar with respect to every parameter leaf it depends on.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Gradients {
    entries: Vec<(Var, Vec<f64>)>,
}

impl Gradients {
    /// The gradient for `leaf`; `None` if it does not influence the output.
    pub fn get(&self, leaf: Var) -> Option<&[f64]> {
        self.entries.iter().find(|(v, _)| *v == leaf).map(|(_, g)| g.as_slice())
    }

    /// Like [`Gradients::get`] but with zeros for unreachable leaves.
    pub fn get_or_zero(&self, leaf: Var, len: usize) -> Vec<f64> {
        self.get(leaf).map_or_else(|| vec![0.0; len], <[f64]>::to_vec)
    }

    pub fn iter(&self) -> impl Iterator<Item = (Var, &[f64])> {
        self.entries.iter().map(|(v, g)| (*v, g.as_slice()))
    }
}

fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn leaky(x: f64, alpha: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        alpha * x
    }
}

impl<'op> Tape<'op> {
    pub fn new() -> Self {
        Tape::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Floats held by the tape (node values plus saved index tables).
    pub fn stored_floats(&self) -> usize {
        self.nodes
            .iter()
            .map(|n| {
                n.value.len()
                    + match &n.op {
                        Op::Gather { index, .. } => index.len(),
                        Op::LinComb(t) => 2 * t.len(),
                        _ => 0,
                    }
            })
            .sum()
    }

    /// Clamped exponent arguments met while recording.
    pub fn clamped(&self) -> usize {
        self.clamped
    }

    pub fn value(&self, v: Var) -> &[f64] {
        &self.nodes[v.0].value
    }

    pub fn requires_grad(&self, v: Var) -> bool {
        self.nodes[v.0].needs_grad
    }

    fn push(&mut self, value: Vec<f64>, op: Op<'op>, needs_grad: bool) -> Var {
        self.nodes.push(Node { value, op, needs_grad });
        Var(self.nodes.len() - 1)
    }

    fn needs(&self, ids: &[usize]) -> bool {
        ids.iter().any(|&i| self.nodes[i].needs_grad)
    }

    fn len_of(&self, v: Var) -> usize {
        self.nodes[v.0].value.len()
    }

    fn same_len(&self, a: Var, b: Var, what: &str) -> Result<()> {
        if self.len_of(a) != self.len_of(b) {
            return Err(Error::shape(format!(
                "{what}: operand lengths {} and {}",
                self.len_of(a),
                self.len_of(b)
            )));
        }
        Ok(())
    }

    pub fn constant(&mut self, value: Vec<f64>) -> Var {
        self.push(value, Op::Constant, false)
    }

    /// A leaf that gradients are taken with respect to.
    pub fn param(&mut self, value: Vec<f64>) -> Var {
        self.push(value, Op::Param, true)
    }

    pub fn lincomb(&mut self, terms: &[(f64, Var)]) -> Result<Var> {
        let Some(&(_, first)) = terms.first() else {
            return Err(Error::invalid("empty linear combination"));
        };
        for &(_, v) in terms {
            self.same_len(first, v, "linear combination")?;
        }
        let raw: Vec<(f64, &[f64])> = terms.iter().map(|&(c, v)| (c, self.value(v))).collect();
        let value = lincomb_raw(&raw);
        let ids: Vec<usize> = terms.iter().map(|t| t.1 .0).collect();
        let needs = self.needs(&ids);
        Ok(self.push(
            value,
            Op::LinComb(terms.iter().map(|&(c, v)| (c, v.0)).collect()),
            needs,
        ))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.lincomb(&[(1.0, a), (1.0, b)])
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.lincomb(&[(1.0, a), (-1.0, b)])
    }

    pub fn scale(&mut self, a: Var, c: f64) -> Var {
        self.lincomb(&[(c, a)]).expect("single term")
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_len(a, b, "elementwise product")?;
        let value = self.value(a).iter().zip(self.value(b)).map(|(x, y)| x * y).collect();
        let needs = self.needs(&[a.0, b.0]);
        Ok(self.push(value, Op::Mul(a.0, b.0), needs))
    }

    pub fn apply(&mut self, op: &'op dyn LinearMap, x: Var) -> Result<Var> {
        if self.len_of(x) != op.domain_len() {
            return Err(Error::shape("operator domain does not match its input"));
        }
        let value = op.forward(self.value(x));
        let needs = self.needs(&[x.0]);
        Ok(self.push(value, Op::Apply(op, x.0), needs))
    }

    pub fn apply_adjoint(&mut self, op: &'op dyn LinearMap, y: Var) -> Result<Var> {
        if self.len_of(y) != op.codomain_len() {
            return Err(Error::shape("operator codomain does not match its input"));
        }
        let value = op.adjoint(self.value(y));
        let needs = self.needs(&[y.0]);
        Ok(self.push(value, Op::Adjoint(op, y.0), needs))
    }

    pub fn conv(&mut self, x: Var, w: Var, b: Var, geom: ConvGeom) -> Result<Var> {
        if geom.kernel.iter().any(|k| k % 2 == 0) {
            return Err(Error::invalid("kernel extents must be odd"));
        }
        if self.len_of(x) != geom.input_len() || self.len_of(w) != geom.kernel_len() || self.len_of(b) != geom.cout {
            return Err(Error::shape("convolution operands do not match the geometry"));
        }
        let value = nn::conv_forward(self.value(x), self.value(w), self.value(b), &geom);
        let needs = self.needs(&[x.0, w.0, b.0]);
        Ok(self.push(
            value,
            Op::Conv {
                x: x.0,
                w: w.0,
                b: b.0,
                geom,
            },
            needs,
        ))
    }

    pub fn avg_pool(&mut self, x: Var, geom: PoolGeom) -> Result<Var> {
        if !geom.is_valid() || self.len_of(x) != geom.fine_len() {
            return Err(Error::shape("pooling input does not match the geometry"));
        }
        let value = nn::avg_pool(self.value(x), &geom);
        let needs = self.needs(&[x.0]);
        Ok(self.push(value, Op::AvgPool(x.0, geom), needs))
    }

    pub fn upsample(&mut self, x: Var, geom: PoolGeom) -> Result<Var> {
        if !geom.is_valid() || self.len_of(x) != geom.coarse_len() {
            return Err(Error::shape("upsampling input does not match the geometry"));
        }
        let value = nn::upsample(self.value(x), &geom);
        let needs = self.needs(&[x.0]);
        Ok(self.push(value, Op::Upsample(x.0, geom), needs))
    }

    /// Concatenation of flat storage, i.e. along the channel axis.
    pub fn concat(&mut self, parts: &[Var]) -> Result<Var> {
        if parts.is_empty() {
            return Err(Error::invalid("nothing to concatenate"));
        }
        let mut value = Vec::with_capacity(parts.iter().map(|&p| self.len_of(p)).sum());
        for &p in parts {
            value.extend_from_slice(self.value(p));
        }
        let ids: Vec<usize> = parts.iter().map(|p| p.0).collect();
        let needs = self.needs(&ids);
        Ok(self.push(value, Op::Concat(ids), needs))
    }

    pub fn slice(&mut self, x: Var, start: usize, len: usize) -> Result<Var> {
        if start + len > self.len_of(x) {
            return Err(Error::shape("slice out of range"));
        }
        let value = self.value(x)[start..start + len].to_vec();
        let needs = self.needs(&[x.0]);
        Ok(self.push(value, Op::Slice { x: x.0, start }, needs))
    }

    /// `out[i] = x[index[i]]`.
    pub fn gather(&mut self, x: Var, index: Vec<usize>) -> Result<Var> {
        let n = self.len_of(x);
        if index.iter().any(|&i| i >= n) {
            return Err(Error::shape("gather index out of range"));
        }
        let src = self.value(x);
        let value = index.iter().map(|&i| src[i]).collect();
        let needs = self.needs(&[x.0]);
        Ok(self.push(value, Op::Gather { x: x.0, index }, needs))
    }

    pub fn leaky_relu(&mut self, x: Var, alpha: f64) -> Var {
        let value = self.value(x).iter().map(|&v| leaky(v, alpha)).collect();
        let needs = self.needs(&[x.0]);
        self.push(value, Op::LeakyRelu(x.0, alpha), needs)
    }

    /// `log(1 + e^x)`.
    pub fn softplus(&mut self, x: Var) -> Var {
        let value = self.value(x).iter().map(|&v| softplus(v)).collect();
        let needs = self.needs(&[x.0]);
        self.push(value, Op::Softplus(x.0), needs)
    }

    pub fn relu(&mut self, x: Var) -> Var {
        let value = relu_raw(self.value(x));
        let needs = self.needs(&[x.0]);
        self.push(value, Op::Relu(x.0), needs)
    }

    /// Projection of `q` onto `[-lambda, lambda]`, `lambda[i / comps]`
    /// bounding `q[i]`.
    pub fn clip(&mut self, q: Var, lambda: Var, comps: usize) -> Result<Var> {
        if comps == 0 || self.len_of(q) != comps * self.len_of(lambda) {
            return Err(Error::shape("clip bound does not match the dual variable"));
        }
        let value = clip_raw(self.value(q), self.value(lambda), comps);
        let needs = self.needs(&[q.0, lambda.0]);
        Ok(self.push(
            value,
            Op::Clip {
                q: q.0,
                lambda: lambda.0,
                comps,
            },
            needs,
        ))
    }

    /// `(p + sigma (ax - z)) / (1 + sigma)` with `z` held constant.
    pub fn prox_l2(&mut self, p: Var, ax: Var, z: &[f64], sigma: f64) -> Result<Var> {
        self.same_len(p, ax, "dual L2 step")?;
        if z.len() != self.len_of(p) {
            return Err(Error::shape("dual L2 step: data length"));
        }
        let value = prox_l2_raw(self.value(p), self.value(ax), z, sigma);
        let needs = self.needs(&[p.0, ax.0]);
        Ok(self.push(
            value,
            Op::ProxL2 {
                p: p.0,
                ax: ax.0,
                sigma,
            },
            needs,
        ))
    }

    /// `exp(-mu x)` with clamped exponents; clamped entries pass no gradient.
    pub fn exp_neg(&mut self, x: Var, mu: f64) -> Var {
        let r = exp_neg_scaled(self.value(x), mu);
        self.clamped += r.clamped;
        let needs = self.needs(&[x.0]);
        self.push(r.value, Op::ExpNeg(x.0, mu), needs)
    }

    pub fn sum(&mut self, x: Var) -> Var {
        let value = vec![self.value(x).iter().sum()];
        let needs = self.needs(&[x.0]);
        self.push(value, Op::Sum(x.0), needs)
    }

    /// `sum (a - b)^2 / denom`.
    pub fn mse(&mut self, a: Var, b: Var, denom: f64) -> Result<Var> {
        self.same_len(a, b, "mse")?;
        if !(denom > 0.0) {
            return Err(Error::invalid("mse denominator must be positive"));
        }
        let s: f64 = self
            .value(a)
            .iter()
            .zip(self.value(b))
            .map(|(x, y)| (x - y) * (x - y))
            .sum();
        let needs = self.needs(&[a.0, b.0]);
        Ok(self.push(vec![s / denom], Op::Mse { a: a.0, b: b.0, denom }, needs))
    }

    /// Hash of every branch taken by piecewise primitives (clip regions,
    /// activation signs, exponent clamps). Two evaluations with equal
    /// signatures lie on the same smooth piece.
    pub fn branch_signature(&self) -> u64 {
        const PRIME: u64 = 0x0000_0100_0000_01b3;
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        let mut mix = |code: u8| {
            h ^= code as u64;
            h = h.wrapping_mul(PRIME);
        };
        for node in &self.nodes {
            match node.op {
                Op::Clip { q, lambda, comps } => {
                    let (qv, lv) = (&self.nodes[q].value, &self.nodes[lambda].value);
                    for (i, &v) in qv.iter().enumerate() {
                        let l = lv[i / comps];
                        mix(if v > l {
                            2
                        } else if v < -l {
                            0
                        } else {
                            1
                        });
                    }
                }
                Op::LeakyRelu(x, _) | Op::Relu(x) => {
                    for &v in &self.nodes[x].value {
                        mix((v > 0.0) as u8);
                    }
                }
                Op::ExpNeg(x, mu) => {
                    for &v in &self.nodes[x].value {
                        mix(((-mu * v).abs() > EXP_CLAMP) as u8);
                    }
                }
                _ => {}
            }
        }
        h
    }

    /// Reverse sweep from the scalar `loss`.
    pub fn backward(&self, loss: Var) -> Result<Gradients> {
        if loss.0 >= self.nodes.len() {
            return Err(Error::invalid("loss is not on this tape"));
        }
        if self.len_of(loss) != 1 {
            return Err(Error::shape("backward needs a scalar loss"));
        }
        let mut grads: Vec<Option<Vec<f64>>> = Vec::new();
        grads.resize_with(loss.0 + 1, || None);
        grads[loss.0] = Some(vec![1.0]);
        let mut entries = Vec::new();
        for i in (0..=loss.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            let node = &self.nodes[i];
            if !node.needs_grad {
                continue;
            }
            self.propagate(&node.op, &g, &mut grads);
            if let Op::Param = node.op {
                entries.push((Var(i), g));
            }
        }
        entries.reverse();
        Ok(Gradients { entries })
    }

    fn acc<'g>(&self, grads: &'g mut [Option<Vec<f64>>], id: usize) -> Option<&'g mut Vec<f64>> {
        if !self.nodes[id].needs_grad {
            return None;
        }
        let len = self.nodes[id].value.len();
        Some(grads[id].get_or_insert_with(|| vec![0.0; len]))
    }

    fn add_into(&self, grads: &mut [Option<Vec<f64>>], id: usize, delta: &[f64]) {
        if let Some(dst) = self.acc(grads, id) {
            dst.iter_mut().zip(delta).for_each(|(d, v)| *d += v);
        }
    }

    fn propagate(&self, op: &Op<'op>, g: &[f64], grads: &mut [Option<Vec<f64>>]) {
        let val = |id: usize| self.nodes[id].value.as_slice();
        match *op {
            Op::Constant | Op::Param => {}
            Op::LinComb(ref terms) => {
                for &(c, id) in terms {
                    if let Some(dst) = self.acc(grads, id) {
                        dst.iter_mut().zip(g).for_each(|(d, v)| *d += c * v);
                    }
                }
            }
            Op::Mul(a, b) => {
                if let Some(dst) = self.acc(grads, a) {
                    dst.iter_mut().zip(g).zip(val(b)).for_each(|((d, v), y)| *d += v * y);
                }
                if let Some(dst) = self.acc(grads, b) {
                    dst.iter_mut().zip(g).zip(val(a)).for_each(|((d, v), x)| *d += v * x);
                }
            }
            Op::Apply(map, x) => {
                if self.nodes[x].needs_grad {
                    self.add_into(grads, x, &map.adjoint(g));
                }
            }
            Op::Adjoint(map, y) => {
                if self.nodes[y].needs_grad {
                    self.add_into(grads, y, &map.forward(g));
                }
            }
            Op::Conv { x, w, b, ref geom } => {
                let (gx, gw, gb) = nn::conv_backward(val(x), val(w), g, geom);
                self.add_into(grads, x, &gx);
                self.add_into(grads, w, &gw);
                self.add_into(grads, b, &gb);
            }
            Op::AvgPool(x, ref geom) => self.add_into(grads, x, &nn::avg_pool_backward(g, geom)),
            Op::Upsample(x, ref geom) => self.add_into(grads, x, &nn::upsample_backward(g, geom)),
            Op::Concat(ref ids) => {
                let mut off = 0;
                for &id in ids {
                    let n = self.nodes[id].value.len();
                    self.add_into(grads, id, &g[off..off + n]);
                    off += n;
                }
            }
            Op::Slice { x, start } => {
                if let Some(dst) = self.acc(grads, x) {
                    dst[start..start + g.len()].iter_mut().zip(g).for_each(|(d, v)| *d += v);
                }
            }
            Op::Gather { x, ref index } => {
                if let Some(dst) = self.acc(grads, x) {
                    for (&i, v) in index.iter().zip(g) {
                        dst[i] += v;
                    }
                }
            }
            Op::LeakyRelu(x, alpha) => {
                if let Some(dst) = self.acc(grads, x) {
                    for ((d, v), &xv) in dst.iter_mut().zip(g).zip(val(x)) {
                        *d += if xv > 0.0 { *v } else { alpha * v };
                    }
                }
            }
            Op::Softplus(x) => {
                if let Some(dst) = self.acc(grads, x) {
                    for ((d, v), &xv) in dst.iter_mut().zip(g).zip(val(x)) {
                        *d += v * sigmoid(xv);
                    }
                }
            }
            Op::Relu(x) => {
                if let Some(dst) = self.acc(grads, x) {
                    for ((d, v), &xv) in dst.iter_mut().zip(g).zip(val(x)) {
                        if xv > 0.0 {
                            *d += v;
                        }
                    }
                }
            }
            Op::Clip { q, lambda, comps } => {
                let (qv, lv) = (val(q), val(lambda));
                if let Some(dst) = self.acc(grads, q) {
                    for (i, (d, v)) in dst.iter_mut().zip(g).enumerate() {
                        if qv[i].abs() <= lv[i / comps] {
                            *d += v;
                        }
                    }
                }
                if let Some(dst) = self.acc(grads, lambda) {
                    for (i, v) in g.iter().enumerate() {
                        let l = lv[i / comps];
                        if qv[i] > l {
                            dst[i / comps] += v;
                        } else if qv[i] < -l {
                            dst[i / comps] -= v;
                        }
                    }
                }
            }
            Op::ProxL2 { p, ax, sigma } => {
                let denom = 1.0 + sigma;
                if let Some(dst) = self.acc(grads, p) {
                    dst.iter_mut().zip(g).for_each(|(d, v)| *d += v / denom);
                }
                if let Some(dst) = self.acc(grads, ax) {
                    dst.iter_mut().zip(g).for_each(|(d, v)| *d += v * sigma / denom);
                }
            }
            Op::ExpNeg(x, mu) => {
                if let Some(dst) = self.acc(grads, x) {
                    for ((d, v), &xv) in dst.iter_mut().zip(g).zip(val(x)) {
                        let arg = -mu * xv;
                        if arg.abs() <= EXP_CLAMP {
                            *d -= v * mu * arg.exp();
                        }
                    }
                }
            }
            Op::Sum(x) => {
                if let Some(dst) = self.acc(grads, x) {
                    dst.iter_mut().for_each(|d| *d += g[0]);
                }
            }
            Op::Mse { a, b, denom } => {
                let (av, bv) = (val(a), val(b));
                let s = 2.0 * g[0] / denom;
                if let Some(dst) = self.acc(grads, a) {
                    for ((d, x), y) in dst.iter_mut().zip(av).zip(bv) {
                        *d += s * (x - y);
                    }
                }
                if let Some(dst) = self.acc(grads, b) {
                    for ((d, x), y) in dst.iter_mut().zip(av).zip(bv) {
                        *d -= s * (x - y);
                    }
                }
            }
        }
    }
}

impl<'op> Engine<'op> for Tape<'op> {
    type V = Var;

    fn value<'s>(&'s self, v: &'s Var) -> &'s [f64] {
        Tape::value(self, *v)
    }

    fn constant(&mut self, data: Vec<f64>) -> Var {
        Tape::constant(self, data)
    }

    fn apply(&mut self, op: &'op dyn LinearMap, x: &Var) -> Var {
        Tape::apply(self, op, *x).expect("solver operands match the operator")
    }

    fn apply_adjoint(&mut self, op: &'op dyn LinearMap, y: &Var) -> Var {
        Tape::apply_adjoint(self, op, *y).expect("solver operands match the operator")
    }

    fn lincomb(&mut self, terms: &[(f64, &Var)]) -> Var {
        let terms: Vec<(f64, Var)> = terms.iter().map(|&(c, v)| (c, *v)).collect();
        Tape::lincomb(self, &terms).expect("solver iterates share a length")
    }

    fn prox_l2(&mut self, p: &Var, ax: &Var, z: &[f64], sigma: f64) -> Var {
        Tape::prox_l2(self, *p, *ax, z, sigma).expect("solver iterates share a length")
    }

    fn clip(&mut self, q: &Var, lambda: &Var, comps: usize) -> Var {
        Tape::clip(self, *q, *lambda, comps).expect("parameter-map matches the dual variable")
    }

    fn relu(&mut self, v: &Var) -> Var {
        Tape::relu(self, *v)
    }

    fn exp_neg(&mut self, v: &Var, mu: f64) -> Var {
        Tape::exp_neg(self, *v, mu)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grad::Gradient;
    use crate::tensor::{DType, Shape};

    #[test]
    fn half_squared_norm() {
        let mut t = Tape::new();
        let x = t.param(vec![1.0, -2.0, 3.0]);
        let sq = t.mul(x, x).unwrap();
        let s = t.sum(sq);
        let l = t.scale(s, 0.5);
        let g = t.backward(l).unwrap();
        assert_eq!(g.get(x).unwrap(), &[1.0, -2.0, 3.0]);
    }

    #[test]
    fn mse_gradient() {
        let mut t = Tape::new();
        let a = t.param(vec![1.0, 2.0]);
        let b = t.constant(vec![0.0, 4.0]);
        let l = t.mse(a, b, 2.0).unwrap();
        assert_eq!(t.value(l), &[2.5]);
        let g = t.backward(l).unwrap();
        assert_eq!(g.get(a).unwrap(), &[1.0, -2.0]);
    }

    #[test]
    fn softplus_slope_at_zero() {
        let mut t = Tape::new();
        let x = t.param(vec![0.0]);
        let y = t.softplus(x);
        let g = t.backward(y).unwrap();
        assert_eq!(g.get(x).unwrap(), &[0.5]);
    }

    #[test]
    fn gradient_of_summed_differences_is_the_adjoint() {
        let shape = Shape::new(3, 4, 2);
        let op = Gradient::new(shape, DType::Real);
        let mut t = Tape::new();
        let x = t.param((0..24).map(|i| i as f64 * 0.37).collect());
        let gx = t.apply(&op, x).unwrap();
        let s = t.sum(gx);
        let g = t.backward(s).unwrap();
        assert_eq!(g.get(x).unwrap(), op.adjoint(&vec![1.0; op.codomain_len()]).as_slice());
    }

    #[test]
    fn clip_backward_regions() {
        let mut t = Tape::new();
        let q = t.param(vec![-2.0, 0.5, 3.0]);
        let l = t.param(vec![1.0, 1.0, 1.0]);
        let c = t.clip(q, l, 1).unwrap();
        let s = t.sum(c);
        let g = t.backward(s).unwrap();
        assert_eq!(g.get(q).unwrap(), &[0.0, 1.0, 0.0]);
        assert_eq!(g.get(l).unwrap(), &[-1.0, 0.0, 1.0]);
    }

    #[test]
    fn unreachable_leaves_and_bad_losses() {
        let mut t = Tape::new();
        let a = t.param(vec![1.0]);
        let b = t.param(vec![2.0]);
        let s = t.sum(a);
        let g = t.backward(s).unwrap();
        assert!(g.get(b).is_none());
        assert_eq!(g.get_or_zero(b, 1), vec![0.0]);
        let v = t.constant(vec![1.0, 2.0]);
        assert!(t.backward(v).is_err());
        assert!(t.backward(Var(99)).is_err());
    }

    #[test]
    fn clamped_exponents_pass_no_gradient() {
        let mut t = Tape::new();
        let x = t.param(vec![-800.0, 0.5]);
        let e = t.exp_neg(x, 1.0);
        let s = t.sum(e);
        let g = t.backward(s).unwrap();
        assert_eq!(t.clamped(), 1);
        assert_eq!(g.get(x).unwrap()[0], 0.0);
        assert!((g.get(x).unwrap()[1] + (-0.5f64).exp()).abs() < 1e-15);
    }
}
