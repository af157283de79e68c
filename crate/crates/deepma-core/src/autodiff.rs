//! Reverse-mode automatic differentiation on a flat tape.
//!
//! A `Graph` records operations as they execute (define-by-run). Each node
//! stores its operation, input node ids, and forward value; `backward` walks
//! the tape in reverse and accumulates gradients for every node that can
//! reach a parameter. Gradient buffers live beside the tape, so a backward
//! pass never touches forward activations: replaying the forward pass after
//! backward reproduces identical values bit for bit.
//!
//! The op set is exactly what the encoder/decoder networks and the channel
//! path need: convolutions (plain and transposed), dense layers, GDN/IGDN
//! normalization, pointwise nonlinearities, channel statistics and gating,
//! complex linear mixing, per-vector power normalization, and MSE.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fmath;
use crate::tensor::Tensor;

/// Identity of a node within one graph.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NodeId(usize);

impl NodeId {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    Conv2d { stride: usize, padding: usize },
    TConv2d { stride: usize, padding: usize },
    Dense,
    Gdn,
    Igdn,
    Relu,
    Prelu,
    Sigmoid,
    ChannelMean,
    ChannelScale,
    Add,
    Scale(f64),
    AddConst(f64),
    Square,
    Reshape,
    AppendConstCol(f64),
    ComplexMix(Vec<Complex64>),
    PowerNormalize { p_z: f64 },
    Mse,
}

#[derive(Debug)]
struct Node {
    op: Op,
    inputs: Vec<NodeId>,
    value: Tensor,
    requires_grad: bool,
}

#[derive(Debug)]
pub struct Graph {
    nodes: Vec<Node>,
    grads: Vec<Option<Tensor>>,
    seed: u64,
}

impl Graph {
    /// `seed` is recorded for any stochastic op; the current op set is fully
    /// deterministic, so it only documents the stream a graph was built for.
    pub fn new(seed: u64) -> Self {
        Graph { nodes: Vec::new(), grads: Vec::new(), seed }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn value(&self, id: NodeId) -> &Tensor {
        &self.nodes[id.0].value
    }

    /// Gradient of the last `backward` target with respect to this node.
    /// `None` until backward runs, and for nodes that cannot reach a parameter.
    pub fn grad(&self, id: NodeId) -> Option<&Tensor> {
        self.grads.get(id.0).and_then(|g| g.as_ref())
    }

    /// Non-trainable leaf (images, noise, targets).
    pub fn input(&mut self, value: Tensor) -> NodeId {
        self.push(Op::Leaf, vec![], value, false)
    }

    /// Trainable leaf; `backward` produces a gradient for it.
    pub fn param(&mut self, value: Tensor) -> NodeId {
        self.push(Op::Leaf, vec![], value, true)
    }

    fn push(&mut self, op: Op, inputs: Vec<NodeId>, value: Tensor, requires_grad: bool) -> NodeId {
        self.nodes.push(Node { op, inputs, value, requires_grad });
        NodeId(self.nodes.len() - 1)
    }

    fn push_op(&mut self, op: Op, inputs: Vec<NodeId>) -> Result<NodeId> {
        let requires = inputs.iter().any(|i| self.nodes[i.0].requires_grad);
        let id = self.push(op, inputs, Tensor::zeros(vec![0]), requires);
        match self.compute_value(id.0) {
            Ok(v) => {
                self.nodes[id.0].value = v;
                Ok(id)
            }
            Err(e) => {
                self.nodes.pop();
                Err(e)
            }
        }
    }

    fn shape(&self, id: NodeId) -> &[usize] {
        self.nodes[id.0].value.shape()
    }

    /// Cross-correlation over [B,C,H,W] with kernel [Co,Ci,kh,kw] and bias
    /// [Co]. Output height is floor((H + 2p - kh)/s) + 1.
    pub fn conv2d(
        &mut self,
        x: NodeId,
        w: NodeId,
        b: NodeId,
        stride: usize,
        padding: usize,
    ) -> Result<NodeId> {
        let (xs, ws, bs) = (self.shape(x), self.shape(w), self.shape(b));
        if xs.len() != 4 || ws.len() != 4 {
            return Err(Error::shape("conv2d", format!("input {:?}, kernel {:?}", xs, ws)));
        }
        if !(stride == 1 || stride == 2) {
            return Err(Error::shape("conv2d", format!("stride {} not in {{1,2}}", stride)));
        }
        if ws[1] != xs[1] {
            return Err(Error::shape(
                "conv2d",
                format!("kernel expects {} input channels, input has {}", ws[1], xs[1]),
            ));
        }
        if bs != [ws[0]] {
            return Err(Error::shape("conv2d", format!("bias {:?} vs {} filters", bs, ws[0])));
        }
        if xs[2] + 2 * padding < ws[2] || xs[3] + 2 * padding < ws[3] {
            return Err(Error::shape(
                "conv2d",
                format!("kernel {:?} larger than padded input {:?}+2*{}", ws, xs, padding),
            ));
        }
        self.push_op(Op::Conv2d { stride, padding }, vec![x, w, b])
    }

    /// Transposed convolution with kernel [Ci,Co,kh,kw]. Output padding is
    /// fixed at stride-1, so output height is H*s - 2p + kh - 1 and a
    /// stride-2 block exactly doubles the spatial size.
    pub fn tconv2d(
        &mut self,
        x: NodeId,
        w: NodeId,
        b: NodeId,
        stride: usize,
        padding: usize,
    ) -> Result<NodeId> {
        let (xs, ws, bs) = (self.shape(x), self.shape(w), self.shape(b));
        if xs.len() != 4 || ws.len() != 4 {
            return Err(Error::shape("tconv2d", format!("input {:?}, kernel {:?}", xs, ws)));
        }
        if !(stride == 1 || stride == 2) {
            return Err(Error::shape("tconv2d", format!("stride {} not in {{1,2}}", stride)));
        }
        if ws[0] != xs[1] {
            return Err(Error::shape(
                "tconv2d",
                format!("kernel expects {} input channels, input has {}", ws[0], xs[1]),
            ));
        }
        if bs != [ws[1]] {
            return Err(Error::shape("tconv2d", format!("bias {:?} vs {} filters", bs, ws[1])));
        }
        let ho = xs[2] as isize * stride as isize - 2 * padding as isize + ws[2] as isize - 1;
        let wo = xs[3] as isize * stride as isize - 2 * padding as isize + ws[3] as isize - 1;
        if ho < 1 || wo < 1 {
            return Err(Error::shape("tconv2d", format!("output {}x{} collapses", ho, wo)));
        }
        self.push_op(Op::TConv2d { stride, padding }, vec![x, w, b])
    }

    /// x[B,F] @ w[F,G] + b[G].
    pub fn dense(&mut self, x: NodeId, w: NodeId, b: NodeId) -> Result<NodeId> {
        let (xs, ws, bs) = (self.shape(x), self.shape(w), self.shape(b));
        if xs.len() != 2 || ws.len() != 2 || xs[1] != ws[0] || bs != [ws[1]] {
            return Err(Error::shape(
                "dense",
                format!("input {:?}, weight {:?}, bias {:?}", xs, ws, bs),
            ));
        }
        self.push_op(Op::Dense, vec![x, w, b])
    }

    /// out_c = in_c / sqrt(beta_c + sum_j gamma[c,j] * in_j^2), per position.
    /// beta must be strictly positive (callers get that from squaring a
    /// stored square-root parameter and adding a small floor).
    pub fn gdn(&mut self, x: NodeId, beta: NodeId, gamma: NodeId) -> Result<NodeId> {
        self.check_gdn("gdn", x, beta, gamma)?;
        self.push_op(Op::Gdn, vec![x, beta, gamma])
    }

    /// Multiplicative inverse of `gdn`: out_c = in_c * sqrt(beta_c + ...).
    pub fn igdn(&mut self, x: NodeId, beta: NodeId, gamma: NodeId) -> Result<NodeId> {
        self.check_gdn("igdn", x, beta, gamma)?;
        self.push_op(Op::Igdn, vec![x, beta, gamma])
    }

    fn check_gdn(&self, op: &'static str, x: NodeId, beta: NodeId, gamma: NodeId) -> Result<()> {
        let (xs, bs, gs) = (self.shape(x), self.shape(beta), self.shape(gamma));
        if xs.len() != 4 {
            return Err(Error::shape(op, format!("input {:?} is not [B,C,H,W]", xs)));
        }
        let c = xs[1];
        if bs != [c] || gs != [c, c] {
            return Err(Error::shape(
                op,
                format!("beta {:?} / gamma {:?} vs {} channels", bs, gs, c),
            ));
        }
        if self.nodes[beta.0].value.iter().any(|&v| v <= 0.0) {
            return Err(Error::contract(format!("{op}: beta must be strictly positive")));
        }
        Ok(())
    }

    pub fn relu(&mut self, x: NodeId) -> Result<NodeId> {
        self.push_op(Op::Relu, vec![x])
    }

    /// Leaky rectifier with one learnable slope per channel (dimension 1).
    pub fn prelu(&mut self, x: NodeId, alpha: NodeId) -> Result<NodeId> {
        let (xs, als) = (self.shape(x), self.shape(alpha));
        if xs.len() < 2 || als != [xs[1]] {
            return Err(Error::shape(
                "prelu",
                format!("alpha {:?} vs input {:?} (one slope per dim-1 channel)", als, xs),
            ));
        }
        self.push_op(Op::Prelu, vec![x, alpha])
    }

    pub fn sigmoid(&mut self, x: NodeId) -> Result<NodeId> {
        self.push_op(Op::Sigmoid, vec![x])
    }

    /// Spatial mean per channel: [B,C,H,W] -> [B,C].
    pub fn channel_mean(&mut self, x: NodeId) -> Result<NodeId> {
        if self.shape(x).len() != 4 {
            return Err(Error::shape("channel_mean", format!("input {:?}", self.shape(x))));
        }
        self.push_op(Op::ChannelMean, vec![x])
    }

    /// Per-sample, per-channel gate: out[b,c,h,w] = x[b,c,h,w] * s[b,c].
    pub fn channel_scale(&mut self, x: NodeId, s: NodeId) -> Result<NodeId> {
        let (xs, ss) = (self.shape(x), self.shape(s));
        if xs.len() != 4 || ss != [xs[0], xs[1]] {
            return Err(Error::shape("channel_scale", format!("input {:?}, gate {:?}", xs, ss)));
        }
        self.push_op(Op::ChannelScale, vec![x, s])
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        if self.shape(a) != self.shape(b) {
            return Err(Error::shape(
                "add",
                format!("{:?} vs {:?}", self.shape(a), self.shape(b)),
            ));
        }
        self.push_op(Op::Add, vec![a, b])
    }

    pub fn scale(&mut self, x: NodeId, k: f64) -> Result<NodeId> {
        self.push_op(Op::Scale(k), vec![x])
    }

    pub fn add_const(&mut self, x: NodeId, k: f64) -> Result<NodeId> {
        self.push_op(Op::AddConst(k), vec![x])
    }

    pub fn square(&mut self, x: NodeId) -> Result<NodeId> {
        self.push_op(Op::Square, vec![x])
    }

    pub fn reshape(&mut self, x: NodeId, shape: Vec<usize>) -> Result<NodeId> {
        let want: usize = shape.iter().product();
        if want != self.nodes[x.0].value.len() {
            return Err(Error::shape(
                "reshape",
                format!("{:?} cannot view as {:?}", self.shape(x), shape),
            ));
        }
        let v = self.nodes[x.0].value.reshaped(shape)?;
        let requires = self.nodes[x.0].requires_grad;
        Ok(self.push(Op::Reshape, vec![x], v, requires))
    }

    /// [B,F] -> [B,F+1] with a constant in the appended column. Used to
    /// feed the channel SNR into the attention blocks.
    pub fn append_const_col(&mut self, x: NodeId, k: f64) -> Result<NodeId> {
        if self.shape(x).len() != 2 {
            return Err(Error::shape("append_const_col", format!("input {:?}", self.shape(x))));
        }
        self.push_op(Op::AppendConstCol(k), vec![x])
    }

    /// Elementwise complex linear combination sum_t h_t * x_t over tensors
    /// of interleaved (re, im) pairs. Terms are summed in input order, so
    /// the result is bit-reproducible.
    pub fn complex_mix(&mut self, xs: &[NodeId], coeffs: &[Complex64]) -> Result<NodeId> {
        if xs.is_empty() || xs.len() != coeffs.len() {
            return Err(Error::shape(
                "complex_mix",
                format!("{} inputs vs {} coefficients", xs.len(), coeffs.len()),
            ));
        }
        let s0 = self.shape(xs[0]).to_vec();
        if self.nodes[xs[0].0].value.len() % 2 != 0 {
            return Err(Error::shape(
                "complex_mix",
                format!("{:?} has odd element count, cannot pair re/im", s0),
            ));
        }
        for &x in &xs[1..] {
            if self.shape(x) != s0.as_slice() {
                return Err(Error::shape(
                    "complex_mix",
                    format!("{:?} vs {:?}", self.shape(x), s0),
                ));
            }
        }
        self.push_op(Op::ComplexMix(coeffs.to_vec()), xs.to_vec())
    }

    /// Scales each length-2K row (interleaved re/im) to average complex
    /// symbol power p_z: z = sqrt(K * p_z) * y / |y|. A zero-norm row is a
    /// degenerate input.
    pub fn power_normalize(&mut self, x: NodeId, p_z: f64) -> Result<NodeId> {
        let xs = self.shape(x);
        let last = *xs.last().unwrap_or(&0);
        if last < 2 || last % 2 != 0 {
            return Err(Error::shape(
                "power_normalize",
                format!("last dimension of {:?} must be even and nonzero", xs),
            ));
        }
        if p_z <= 0.0 {
            return Err(Error::contract(format!("power_normalize: p_z = {p_z} must be positive")));
        }
        self.push_op(Op::PowerNormalize { p_z }, vec![x])
    }

    /// Mean squared error over all elements, as a one-element tensor.
    pub fn mse(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        if self.shape(a) != self.shape(b) || self.nodes[a.0].value.is_empty() {
            return Err(Error::shape(
                "mse",
                format!("{:?} vs {:?}", self.shape(a), self.shape(b)),
            ));
        }
        self.push_op(Op::Mse, vec![a, b])
    }

    /// Recomputes every non-leaf value in tape order. With unchanged leaves
    /// this reproduces the recorded values bit for bit.
    pub fn replay_forward(&mut self) -> Result<()> {
        for idx in 0..self.nodes.len() {
            if !matches!(self.nodes[idx].op, Op::Leaf) {
                let v = self.compute_value(idx)?;
                self.nodes[idx].value = v;
            }
        }
        Ok(())
    }

    /// Accumulates d(loss)/d(node) for every node that can reach a
    /// parameter. The loss must be a single-element tensor. Parameters not
    /// on a path to the loss end with a zero gradient.
    pub fn backward(&mut self, loss: NodeId) -> Result<()> {
        if self.nodes[loss.0].value.len() != 1 {
            return Err(Error::contract(format!(
                "backward: loss node has shape {:?}, expected a scalar",
                self.shape(loss)
            )));
        }
        self.grads = vec![None; self.nodes.len()];
        for (idx, node) in self.nodes.iter().enumerate() {
            if node.requires_grad && matches!(node.op, Op::Leaf) {
                self.grads[idx] = Some(Tensor::zeros(node.value.shape().to_vec()));
            }
        }
        if !self.nodes[loss.0].requires_grad {
            return Ok(());
        }
        self.grads[loss.0] = Some(Tensor::full(vec![1], 1.0));
        for idx in (0..=loss.0).rev() {
            if !self.nodes[idx].requires_grad {
                continue;
            }
            let Some(g) = self.grads[idx].take() else { continue };
            self.propagate(idx, &g)?;
            self.grads[idx] = Some(g);
        }
        Ok(())
    }
}

// Forward and backward kernels. Index helpers assume row-major layout.

struct Conv {
    b: usize,
    ci: usize,
    h: usize,
    w: usize,
    co: usize,
    kh: usize,
    kw: usize,
    ho: usize,
    wo: usize,
    stride: usize,
    padding: usize,
}

impl Conv {
    fn gather(xs: &[usize], ws: &[usize], stride: usize, padding: usize) -> Conv {
        let ho = (xs[2] + 2 * padding - ws[2]) / stride + 1;
        let wo = (xs[3] + 2 * padding - ws[3]) / stride + 1;
        Conv {
            b: xs[0],
            ci: xs[1],
            h: xs[2],
            w: xs[3],
            co: ws[0],
            kh: ws[2],
            kw: ws[3],
            ho,
            wo,
            stride,
            padding,
        }
    }

    fn scatter(xs: &[usize], ws: &[usize], stride: usize, padding: usize) -> Conv {
        let ho = xs[2] * stride + ws[2] - 1 - 2 * padding;
        let wo = xs[3] * stride + ws[3] - 1 - 2 * padding;
        Conv {
            b: xs[0],
            ci: xs[1],
            h: xs[2],
            w: xs[3],
            co: ws[1],
            kh: ws[2],
            kw: ws[3],
            ho,
            wo,
            stride,
            padding,
        }
    }

    /// Output index range hitting valid input positions for one kernel tap:
    /// o*s + k - p must land in [0, limit).
    fn valid(&self, k: usize, out_len: usize, limit: usize) -> (usize, usize) {
        let s = self.stride as isize;
        let off = k as isize - self.padding as isize;
        let lo = if off >= 0 { 0 } else { (-off + s - 1) / s };
        let hi = (limit as isize - 1 - off).div_euclid(s);
        let lo = lo.max(0) as usize;
        let hi = hi.min(out_len as isize - 1);
        if hi < lo as isize {
            (1, 0)
        } else {
            (lo, hi as usize)
        }
    }
}

fn conv2d_forward(x: &Tensor, w: &Tensor, b: &Tensor, stride: usize, padding: usize) -> Tensor {
    let c = Conv::gather(x.shape(), w.shape(), stride, padding);
    let mut out = Tensor::zeros(vec![c.b, c.co, c.ho, c.wo]);
    let (xd, wd, bd, od) = (x.data(), w.data(), b.data(), out.data_mut());
    for bt in 0..c.b {
        for co in 0..c.co {
            let oplane = &mut od[(bt * c.co + co) * c.ho * c.wo..][..c.ho * c.wo];
            oplane.fill(bd[co]);
            for ci in 0..c.ci {
                let xplane = &xd[(bt * c.ci + ci) * c.h * c.w..][..c.h * c.w];
                for kh in 0..c.kh {
                    let (oh_lo, oh_hi) = c.valid(kh, c.ho, c.h);
                    for kw in 0..c.kw {
                        let coeff = wd[((co * c.ci + ci) * c.kh + kh) * c.kw + kw];
                        if coeff == 0.0 {
                            continue;
                        }
                        let (ow_lo, ow_hi) = c.valid(kw, c.wo, c.w);
                        if ow_hi < ow_lo || oh_hi < oh_lo {
                            continue;
                        }
                        for oh in oh_lo..=oh_hi {
                            let ih = oh * c.stride + kh - c.padding;
                            let xrow = &xplane[ih * c.w..][..c.w];
                            let orow = &mut oplane[oh * c.wo..][..c.wo];
                            let mut iw = ow_lo * c.stride + kw - c.padding;
                            for o in &mut orow[ow_lo..=ow_hi] {
                                *o += coeff * xrow[iw];
                                iw += c.stride;
                            }
                        }
                    }
                }
            }
        }
    }
    out
}

fn conv2d_backward(
    x: &Tensor,
    w: &Tensor,
    g: &Tensor,
    stride: usize,
    padding: usize,
) -> (Tensor, Tensor, Tensor) {
    let c = Conv::gather(x.shape(), w.shape(), stride, padding);
    let mut gx = Tensor::zeros(x.shape().to_vec());
    let mut gw = Tensor::zeros(w.shape().to_vec());
    let mut gb = Tensor::zeros(vec![c.co]);
    let (xd, wd, gd) = (x.data(), w.data(), g.data());
    let gxd = gx.data_mut();
    for bt in 0..c.b {
        for co in 0..c.co {
            let gplane = &gd[(bt * c.co + co) * c.ho * c.wo..][..c.ho * c.wo];
            let mut acc = 0.0;
            for v in gplane {
                acc += v;
            }
            gb.data_mut()[co] += acc;
            for ci in 0..c.ci {
                let xplane = &xd[(bt * c.ci + ci) * c.h * c.w..][..c.h * c.w];
                let gxplane = &mut gxd[(bt * c.ci + ci) * c.h * c.w..][..c.h * c.w];
                for kh in 0..c.kh {
                    let (oh_lo, oh_hi) = c.valid(kh, c.ho, c.h);
                    for kw in 0..c.kw {
                        let (ow_lo, ow_hi) = c.valid(kw, c.wo, c.w);
                        if ow_hi < ow_lo || oh_hi < oh_lo {
                            continue;
                        }
                        let widx = ((co * c.ci + ci) * c.kh + kh) * c.kw + kw;
                        let coeff = wd[widx];
                        let mut wacc = 0.0;
                        for oh in oh_lo..=oh_hi {
                            let ih = oh * c.stride + kh - c.padding;
                            let xrow = &xplane[ih * c.w..][..c.w];
                            let gxrow = &mut gxplane[ih * c.w..][..c.w];
                            let grow = &gplane[oh * c.wo..][..c.wo];
                            let mut iw = ow_lo * c.stride + kw - c.padding;
                            for gv in &grow[ow_lo..=ow_hi] {
                                wacc += gv * xrow[iw];
                                gxrow[iw] += coeff * gv;
                                iw += c.stride;
                            }
                        }
                        gw.data_mut()[widx] += wacc;
                    }
                }
            }
        }
    }
    (gx, gw, gb)
}

fn tconv2d_forward(x: &Tensor, w: &Tensor, b: &Tensor, stride: usize, padding: usize) -> Tensor {
    let c = Conv::scatter(x.shape(), w.shape(), stride, padding);
    let mut out = Tensor::zeros(vec![c.b, c.co, c.ho, c.wo]);
    let (xd, wd, bd, od) = (x.data(), w.data(), b.data(), out.data_mut());
    for bt in 0..c.b {
        for co in 0..c.co {
            let oplane = &mut od[(bt * c.co + co) * c.ho * c.wo..][..c.ho * c.wo];
            oplane.fill(bd[co]);
            for ci in 0..c.ci {
                let xplane = &xd[(bt * c.ci + ci) * c.h * c.w..][..c.h * c.w];
                for kh in 0..c.kh {
                    // ih*s + kh - p must land in [0, ho)
                    let (ih_lo, ih_hi) = c.valid(kh, c.h, c.ho);
                    for kw in 0..c.kw {
                        let coeff = wd[((ci * c.co + co) * c.kh + kh) * c.kw + kw];
                        if coeff == 0.0 {
                            continue;
                        }
                        let (iw_lo, iw_hi) = c.valid(kw, c.w, c.wo);
                        if iw_hi < iw_lo || ih_hi < ih_lo {
                            continue;
                        }
                        for ih in ih_lo..=ih_hi {
                            let oh = ih * c.stride + kh - c.padding;
                            let xrow = &xplane[ih * c.w..][..c.w];
                            let orow = &mut oplane[oh * c.wo..][..c.wo];
                            let mut ow = iw_lo * c.stride + kw - c.padding;
                            for xv in &xrow[iw_lo..=iw_hi] {
                                orow[ow] += coeff * xv;
                                ow += c.stride;
                            }
                        }
                    }
                }
            }
        }
    }
    out
}

fn tconv2d_backward(
    x: &Tensor,
    w: &Tensor,
    g: &Tensor,
    stride: usize,
    padding: usize,
) -> (Tensor, Tensor, Tensor) {
    let c = Conv::scatter(x.shape(), w.shape(), stride, padding);
    let mut gx = Tensor::zeros(x.shape().to_vec());
    let mut gw = Tensor::zeros(w.shape().to_vec());
    let mut gb = Tensor::zeros(vec![c.co]);
    let (xd, wd, gd) = (x.data(), w.data(), g.data());
    let gxd = gx.data_mut();
    for bt in 0..c.b {
        for co in 0..c.co {
            let gplane = &gd[(bt * c.co + co) * c.ho * c.wo..][..c.ho * c.wo];
            let mut acc = 0.0;
            for v in gplane {
                acc += v;
            }
            gb.data_mut()[co] += acc;
            for ci in 0..c.ci {
                let xplane = &xd[(bt * c.ci + ci) * c.h * c.w..][..c.h * c.w];
                let gxplane = &mut gxd[(bt * c.ci + ci) * c.h * c.w..][..c.h * c.w];
                for kh in 0..c.kh {
                    let (ih_lo, ih_hi) = c.valid(kh, c.h, c.ho);
                    for kw in 0..c.kw {
                        let (iw_lo, iw_hi) = c.valid(kw, c.w, c.wo);
                        if iw_hi < iw_lo || ih_hi < ih_lo {
                            continue;
                        }
                        let widx = ((ci * c.co + co) * c.kh + kh) * c.kw + kw;
                        let coeff = wd[widx];
                        let mut wacc = 0.0;
                        for ih in ih_lo..=ih_hi {
                            let oh = ih * c.stride + kh - c.padding;
                            let xrow = &xplane[ih * c.w..][..c.w];
                            let gxrow = &mut gxplane[ih * c.w..][..c.w];
                            let grow = &gplane[oh * c.wo..][..c.wo];
                            let mut ow = iw_lo * c.stride + kw - c.padding;
                            for iw in iw_lo..=iw_hi {
                                let gv = grow[ow];
                                wacc += gv * xrow[iw];
                                gxrow[iw] += coeff * gv;
                                ow += c.stride;
                            }
                        }
                        gw.data_mut()[widx] += wacc;
                    }
                }
            }
        }
    }
    (gx, gw, gb)
}

fn dense_forward(x: &Tensor, w: &Tensor, b: &Tensor) -> Tensor {
    let (n, f) = (x.shape()[0], x.shape()[1]);
    let g = w.shape()[1];
    let mut out = Tensor::zeros(vec![n, g]);
    let (xd, wd, bd, od) = (x.data(), w.data(), b.data(), out.data_mut());
    for i in 0..n {
        let orow = &mut od[i * g..][..g];
        orow.copy_from_slice(bd);
        let xrow = &xd[i * f..][..f];
        for (k, &xv) in xrow.iter().enumerate() {
            if xv == 0.0 {
                continue;
            }
            let wrow = &wd[k * g..][..g];
            for (o, wv) in orow.iter_mut().zip(wrow) {
                *o += xv * wv;
            }
        }
    }
    out
}

fn dense_backward(x: &Tensor, w: &Tensor, g: &Tensor) -> (Tensor, Tensor, Tensor) {
    let (n, f) = (x.shape()[0], x.shape()[1]);
    let go = w.shape()[1];
    let mut gx = Tensor::zeros(vec![n, f]);
    let mut gw = Tensor::zeros(vec![f, go]);
    let mut gb = Tensor::zeros(vec![go]);
    let (xd, wd, gd) = (x.data(), w.data(), g.data());
    for i in 0..n {
        let grow = &gd[i * go..][..go];
        for (bv, gv) in gb.data_mut().iter_mut().zip(grow) {
            *bv += gv;
        }
        let xrow = &xd[i * f..][..f];
        let gxrow = &mut gx.data_mut()[i * f..][..f];
        for k in 0..f {
            let wrow = &wd[k * go..][..go];
            let mut acc = 0.0;
            for (wv, gv) in wrow.iter().zip(grow) {
                acc += wv * gv;
            }
            gxrow[k] = acc;
        }
        let gwd = gw.data_mut();
        for (k, &xv) in xrow.iter().enumerate() {
            if xv == 0.0 {
                continue;
            }
            let gwrow = &mut gwd[k * go..][..go];
            for (wv, gv) in gwrow.iter_mut().zip(grow) {
                *wv += xv * gv;
            }
        }
    }
    (gx, gw, gb)
}

/// Shared GDN/IGDN denominator d_c = beta_c + sum_j gamma[c,j] x_j^2 per
/// spatial position, recomputed in backward instead of cached.
fn gdn_pool(
    xs: &[f64],
    beta: &[f64],
    gamma: &[f64],
    c: usize,
    sq: &mut [f64],
    d: &mut [f64],
) -> bool {
    for j in 0..c {
        sq[j] = xs[j] * xs[j];
    }
    for i in 0..c {
        let grow = &gamma[i * c..][..c];
        let mut acc = beta[i];
        for (gv, sv) in grow.iter().zip(sq.iter()) {
            acc += gv * sv;
        }
        if acc <= 0.0 {
            return false;
        }
        d[i] = acc;
    }
    true
}

fn gdn_forward(x: &Tensor, beta: &Tensor, gamma: &Tensor, inverse: bool) -> Result<Tensor> {
    let s = x.shape();
    let (b, c, hw) = (s[0], s[1], s[2] * s[3]);
    let mut out = Tensor::zeros(s.to_vec());
    let (xd, od) = (x.data(), out.data_mut());
    let mut xs = vec![0.0; c];
    let mut sq = vec![0.0; c];
    let mut d = vec![0.0; c];
    for bt in 0..b {
        let base = bt * c * hw;
        for pos in 0..hw {
            for j in 0..c {
                xs[j] = xd[base + j * hw + pos];
            }
            if !gdn_pool(&xs, beta.data(), gamma.data(), c, &mut sq, &mut d) {
                return Err(Error::NonFinite(alloc::string::String::from(
                    "gdn: nonpositive denominator",
                )));
            }
            for j in 0..c {
                let r = fmath::sqrt(d[j]);
                od[base + j * hw + pos] = if inverse { xs[j] * r } else { xs[j] / r };
            }
        }
    }
    Ok(out)
}

fn gdn_backward(
    x: &Tensor,
    beta: &Tensor,
    gamma: &Tensor,
    g: &Tensor,
    inverse: bool,
) -> (Tensor, Tensor, Tensor) {
    let s = x.shape();
    let (b, c, hw) = (s[0], s[1], s[2] * s[3]);
    let mut gx = Tensor::zeros(s.to_vec());
    let mut gbeta = Tensor::zeros(vec![c]);
    let mut ggamma = Tensor::zeros(vec![c, c]);
    let (xd, gd) = (x.data(), g.data());
    let gammad = gamma.data();
    let mut xs = vec![0.0; c];
    let mut sq = vec![0.0; c];
    let mut d = vec![0.0; c];
    let mut t = vec![0.0; c];
    let mut col = vec![0.0; c];
    for bt in 0..b {
        let base = bt * c * hw;
        for pos in 0..hw {
            for j in 0..c {
                xs[j] = xd[base + j * hw + pos];
            }
            gdn_pool(&xs, beta.data(), gamma.data(), c, &mut sq, &mut d);
            if inverse {
                // y_i = x_i d_i^{1/2}; t_i = g_i x_i d_i^{-1/2}
                for i in 0..c {
                    let gi = gd[base + i * hw + pos];
                    t[i] = gi * xs[i] / fmath::sqrt(d[i]);
                }
                col.fill(0.0);
                for i in 0..c {
                    if t[i] == 0.0 {
                        continue;
                    }
                    let grow = &gammad[i * c..][..c];
                    for (cl, gv) in col.iter_mut().zip(grow) {
                        *cl += t[i] * gv;
                    }
                    gbeta.data_mut()[i] += 0.5 * t[i];
                    let ggrow = &mut ggamma.data_mut()[i * c..][..c];
                    for (gg, sv) in ggrow.iter_mut().zip(sq.iter()) {
                        *gg += 0.5 * t[i] * sv;
                    }
                }
                for l in 0..c {
                    let gl = gd[base + l * hw + pos];
                    gx.data_mut()[base + l * hw + pos] = gl * fmath::sqrt(d[l]) + xs[l] * col[l];
                }
            } else {
                // y_i = x_i d_i^{-1/2}; t_i = g_i x_i d_i^{-3/2}
                for i in 0..c {
                    let gi = gd[base + i * hw + pos];
                    let r = fmath::sqrt(d[i]);
                    t[i] = gi * xs[i] / (d[i] * r);
                }
                col.fill(0.0);
                for i in 0..c {
                    if t[i] == 0.0 {
                        continue;
                    }
                    let grow = &gammad[i * c..][..c];
                    for (cl, gv) in col.iter_mut().zip(grow) {
                        *cl += t[i] * gv;
                    }
                    gbeta.data_mut()[i] += -0.5 * t[i];
                    let ggrow = &mut ggamma.data_mut()[i * c..][..c];
                    for (gg, sv) in ggrow.iter_mut().zip(sq.iter()) {
                        *gg += -0.5 * t[i] * sv;
                    }
                }
                for l in 0..c {
                    let gl = gd[base + l * hw + pos];
                    gx.data_mut()[base + l * hw + pos] =
                        gl / fmath::sqrt(d[l]) - xs[l] * col[l];
                }
            }
        }
    }
    (gx, gbeta, ggamma)
}

fn channel_len(shape: &[usize]) -> usize {
    shape[2..].iter().product()
}

impl Graph {
    fn compute_value(&self, idx: usize) -> Result<Tensor> {
        let node = &self.nodes[idx];
        let val = |i: usize| -> &Tensor { &self.nodes[node.inputs[i].0].value };
        match &node.op {
            Op::Leaf => Ok(node.value.clone()),
            Op::Conv2d { stride, padding } => {
                Ok(conv2d_forward(val(0), val(1), val(2), *stride, *padding))
            }
            Op::TConv2d { stride, padding } => {
                Ok(tconv2d_forward(val(0), val(1), val(2), *stride, *padding))
            }
            Op::Dense => Ok(dense_forward(val(0), val(1), val(2))),
            Op::Gdn => gdn_forward(val(0), val(1), val(2), false),
            Op::Igdn => gdn_forward(val(0), val(1), val(2), true),
            Op::Relu => {
                let x = val(0);
                let mut out = x.clone();
                for v in out.data_mut() {
                    if *v < 0.0 {
                        *v = 0.0;
                    }
                }
                Ok(out)
            }
            Op::Prelu => {
                let (x, a) = (val(0), val(1));
                let clen = channel_len(x.shape());
                let c = x.shape()[1];
                let mut out = x.clone();
                let ad = a.data();
                for (i, v) in out.data_mut().iter_mut().enumerate() {
                    if *v < 0.0 {
                        *v *= ad[(i / clen) % c];
                    }
                }
                Ok(out)
            }
            Op::Sigmoid => {
                let mut out = val(0).clone();
                for v in out.data_mut() {
                    *v = fmath::sigmoid(*v);
                }
                Ok(out)
            }
            Op::ChannelMean => {
                let x = val(0);
                let s = x.shape();
                let (b, c, hw) = (s[0], s[1], s[2] * s[3]);
                let mut out = Tensor::zeros(vec![b, c]);
                let xd = x.data();
                for bt in 0..b {
                    for ch in 0..c {
                        let plane = &xd[(bt * c + ch) * hw..][..hw];
                        let mut acc = 0.0;
                        for v in plane {
                            acc += v;
                        }
                        out.data_mut()[bt * c + ch] = acc / hw as f64;
                    }
                }
                Ok(out)
            }
            Op::ChannelScale => {
                let (x, sc) = (val(0), val(1));
                let s = x.shape();
                let (b, c, hw) = (s[0], s[1], s[2] * s[3]);
                let mut out = x.clone();
                let scd = sc.data();
                for bt in 0..b {
                    for ch in 0..c {
                        let k = scd[bt * c + ch];
                        for v in &mut out.data_mut()[(bt * c + ch) * hw..][..hw] {
                            *v *= k;
                        }
                    }
                }
                Ok(out)
            }
            Op::Add => {
                let mut out = val(0).clone();
                for (o, v) in out.data_mut().iter_mut().zip(val(1).data()) {
                    *o += v;
                }
                Ok(out)
            }
            Op::Scale(k) => {
                let mut out = val(0).clone();
                for v in out.data_mut() {
                    *v *= k;
                }
                Ok(out)
            }
            Op::AddConst(k) => {
                let mut out = val(0).clone();
                for v in out.data_mut() {
                    *v += k;
                }
                Ok(out)
            }
            Op::Square => {
                let mut out = val(0).clone();
                for v in out.data_mut() {
                    *v *= *v;
                }
                Ok(out)
            }
            Op::Reshape => val(0).reshaped(node.value.shape().to_vec()),
            Op::AppendConstCol(k) => {
                let x = val(0);
                let (b, f) = (x.shape()[0], x.shape()[1]);
                let mut out = Tensor::zeros(vec![b, f + 1]);
                for i in 0..b {
                    out.data_mut()[i * (f + 1)..][..f].copy_from_slice(&x.data()[i * f..][..f]);
                    out.data_mut()[i * (f + 1) + f] = *k;
                }
                Ok(out)
            }
            Op::ComplexMix(coeffs) => {
                let shape = val(0).shape().to_vec();
                let mut out = Tensor::zeros(shape);
                for (t, h) in coeffs.iter().enumerate() {
                    let xd = val(t).data();
                    let od = out.data_mut();
                    for p in 0..xd.len() / 2 {
                        let (a, b2) = (xd[2 * p], xd[2 * p + 1]);
                        od[2 * p] += h.re * a - h.im * b2;
                        od[2 * p + 1] += h.re * b2 + h.im * a;
                    }
                }
                Ok(out)
            }
            Op::PowerNormalize { p_z } => {
                let x = val(0);
                let l = *x.shape().last().unwrap();
                let k = (l / 2) as f64;
                let target = fmath::sqrt(k * p_z);
                let mut out = x.clone();
                for row in out.data_mut().chunks_exact_mut(l) {
                    let mut n2 = 0.0;
                    for v in row.iter() {
                        n2 += v * v;
                    }
                    if n2 == 0.0 {
                        return Err(Error::Degenerate("power_normalize: zero-norm feature row"));
                    }
                    let s = target / fmath::sqrt(n2);
                    for v in row {
                        *v *= s;
                    }
                }
                Ok(out)
            }
            Op::Mse => {
                let (a, b) = (val(0), val(1));
                let mut acc = 0.0;
                for (av, bv) in a.data().iter().zip(b.data()) {
                    let d = av - bv;
                    acc += d * d;
                }
                Ok(Tensor::scalar(acc / a.len() as f64))
            }
        }
    }

    fn accumulate(&mut self, id: NodeId, delta: Tensor) {
        if !self.nodes[id.0].requires_grad {
            return;
        }
        match &mut self.grads[id.0] {
            Some(g) => {
                for (gv, dv) in g.data_mut().iter_mut().zip(delta.data()) {
                    *gv += dv;
                }
            }
            slot => *slot = Some(delta),
        }
    }

    fn propagate(&mut self, idx: usize, g: &Tensor) -> Result<()> {
        let inputs: Vec<NodeId> = self.nodes[idx].inputs.clone();
        let op = self.nodes[idx].op.clone();
        let val = |i: usize| -> &Tensor { &self.nodes[inputs[i].0].value };
        match &op {
            Op::Leaf => {}
            Op::Conv2d { stride, padding } => {
                let (gx, gw, gb) = conv2d_backward(val(0), val(1), g, *stride, *padding);
                self.accumulate(inputs[0], gx);
                self.accumulate(inputs[1], gw);
                self.accumulate(inputs[2], gb);
            }
            Op::TConv2d { stride, padding } => {
                let (gx, gw, gb) = tconv2d_backward(val(0), val(1), g, *stride, *padding);
                self.accumulate(inputs[0], gx);
                self.accumulate(inputs[1], gw);
                self.accumulate(inputs[2], gb);
            }
            Op::Dense => {
                let (gx, gw, gb) = dense_backward(val(0), val(1), g);
                self.accumulate(inputs[0], gx);
                self.accumulate(inputs[1], gw);
                self.accumulate(inputs[2], gb);
            }
            Op::Gdn => {
                let (gx, gb, gg) = gdn_backward(val(0), val(1), val(2), g, false);
                self.accumulate(inputs[0], gx);
                self.accumulate(inputs[1], gb);
                self.accumulate(inputs[2], gg);
            }
            Op::Igdn => {
                let (gx, gb, gg) = gdn_backward(val(0), val(1), val(2), g, true);
                self.accumulate(inputs[0], gx);
                self.accumulate(inputs[1], gb);
                self.accumulate(inputs[2], gg);
            }
            Op::Relu => {
                let x = val(0);
                let mut gx = g.clone();
                for (gv, xv) in gx.data_mut().iter_mut().zip(x.data()) {
                    if *xv < 0.0 {
                        *gv = 0.0;
                    }
                }
                self.accumulate(inputs[0], gx);
            }
            Op::Prelu => {
                let (x, a) = (val(0), val(1));
                let clen = channel_len(x.shape());
                let c = x.shape()[1];
                let mut gx = g.clone();
                let mut ga = Tensor::zeros(vec![c]);
                let ad = a.data();
                for (i, (gv, xv)) in gx.data_mut().iter_mut().zip(x.data()).enumerate() {
                    if *xv < 0.0 {
                        let ch = (i / clen) % c;
                        ga.data_mut()[ch] += *gv * *xv;
                        *gv *= ad[ch];
                    }
                }
                self.accumulate(inputs[0], gx);
                self.accumulate(inputs[1], ga);
            }
            Op::Sigmoid => {
                let y = &self.nodes[idx].value;
                let mut gx = g.clone();
                for (gv, yv) in gx.data_mut().iter_mut().zip(y.data()) {
                    *gv *= yv * (1.0 - yv);
                }
                self.accumulate(inputs[0], gx);
            }
            Op::ChannelMean => {
                let x = val(0);
                let s = x.shape();
                let (b, c, hw) = (s[0], s[1], s[2] * s[3]);
                let mut gx = Tensor::zeros(s.to_vec());
                for bt in 0..b {
                    for ch in 0..c {
                        let gv = g.data()[bt * c + ch] / hw as f64;
                        for v in &mut gx.data_mut()[(bt * c + ch) * hw..][..hw] {
                            *v = gv;
                        }
                    }
                }
                self.accumulate(inputs[0], gx);
            }
            Op::ChannelScale => {
                let (x, sc) = (val(0), val(1));
                let s = x.shape();
                let (b, c, hw) = (s[0], s[1], s[2] * s[3]);
                let mut gx = g.clone();
                let mut gs = Tensor::zeros(vec![b, c]);
                for bt in 0..b {
                    for ch in 0..c {
                        let k = sc.data()[bt * c + ch];
                        let xplane = &x.data()[(bt * c + ch) * hw..][..hw];
                        let gplane = &g.data()[(bt * c + ch) * hw..][..hw];
                        let mut acc = 0.0;
                        for (gv, xv) in gplane.iter().zip(xplane) {
                            acc += gv * xv;
                        }
                        gs.data_mut()[bt * c + ch] = acc;
                        for gv in &mut gx.data_mut()[(bt * c + ch) * hw..][..hw] {
                            *gv *= k;
                        }
                    }
                }
                self.accumulate(inputs[0], gx);
                self.accumulate(inputs[1], gs);
            }
            Op::Add => {
                self.accumulate(inputs[0], g.clone());
                self.accumulate(inputs[1], g.clone());
            }
            Op::Scale(k) => {
                let mut gx = g.clone();
                for v in gx.data_mut() {
                    *v *= k;
                }
                self.accumulate(inputs[0], gx);
            }
            Op::AddConst(_) => {
                self.accumulate(inputs[0], g.clone());
            }
            Op::Square => {
                let x = val(0);
                let mut gx = g.clone();
                for (gv, xv) in gx.data_mut().iter_mut().zip(x.data()) {
                    *gv *= 2.0 * xv;
                }
                self.accumulate(inputs[0], gx);
            }
            Op::Reshape => {
                let shape = val(0).shape().to_vec();
                self.accumulate(inputs[0], g.reshaped(shape)?);
            }
            Op::AppendConstCol(_) => {
                let x = val(0);
                let (b, f) = (x.shape()[0], x.shape()[1]);
                let mut gx = Tensor::zeros(vec![b, f]);
                for i in 0..b {
                    gx.data_mut()[i * f..][..f].copy_from_slice(&g.data()[i * (f + 1)..][..f]);
                }
                self.accumulate(inputs[0], gx);
            }
            Op::ComplexMix(coeffs) => {
                for (t, h) in coeffs.iter().enumerate() {
                    if !self.nodes[inputs[t].0].requires_grad {
                        continue;
                    }
                    // Transpose of multiply-by-h is multiply-by-conj(h).
                    let mut gx = Tensor::zeros(g.shape().to_vec());
                    let gd = g.data();
                    for p in 0..gd.len() / 2 {
                        let (gr, gi) = (gd[2 * p], gd[2 * p + 1]);
                        gx.data_mut()[2 * p] = h.re * gr + h.im * gi;
                        gx.data_mut()[2 * p + 1] = h.re * gi - h.im * gr;
                    }
                    self.accumulate(inputs[t], gx);
                }
            }
            Op::PowerNormalize { p_z } => {
                let x = val(0);
                let l = *x.shape().last().unwrap();
                let k = (l / 2) as f64;
                let target = fmath::sqrt(k * p_z);
                let mut gx = Tensor::zeros(x.shape().to_vec());
                let (xd, gd) = (x.data(), g.data());
                for (r, gxrow) in gx.data_mut().chunks_exact_mut(l).enumerate() {
                    let xrow = &xd[r * l..][..l];
                    let grow = &gd[r * l..][..l];
                    let mut n2 = 0.0;
                    let mut dot = 0.0;
                    for (xv, gv) in xrow.iter().zip(grow) {
                        n2 += xv * xv;
                        dot += xv * gv;
                    }
                    let s = target / fmath::sqrt(n2);
                    for ((o, xv), gv) in gxrow.iter_mut().zip(xrow).zip(grow) {
                        *o = s * (gv - xv * dot / n2);
                    }
                }
                self.accumulate(inputs[0], gx);
            }
            Op::Mse => {
                let (a, b) = (val(0), val(1));
                let k = 2.0 * g.data()[0] / a.len() as f64;
                let mut ga = Tensor::zeros(a.shape().to_vec());
                for ((o, av), bv) in ga.data_mut().iter_mut().zip(a.data()).zip(b.data()) {
                    *o = k * (av - bv);
                }
                if self.nodes[inputs[1].0].requires_grad {
                    let mut gb = ga.clone();
                    for v in gb.data_mut() {
                        *v = -*v;
                    }
                    self.accumulate(inputs[1], gb);
                }
                self.accumulate(inputs[0], ga);
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use approx::assert_relative_eq;

    fn t(shape: &[usize], data: &[f64]) -> Tensor {
        Tensor::new(shape.to_vec(), data.to_vec()).unwrap()
    }

    fn arange(n: usize, mul: f64, off: f64) -> Vec<f64> {
        (0..n).map(|i| i as f64 * mul + off).collect()
    }

    #[test]
    fn conv2d_matches_fixed_values() {
        // 1x2x3x3 input, 2x2x2x2 kernel, bias [0.5, -1].
        let x = t(&[1, 2, 3, 3], &arange(18, 0.25, -1.0));
        let w = t(&[2, 2, 2, 2], &arange(16, 0.1, -0.75));
        let b = t(&[2], &[0.5, -1.0]);
        let mut g = Graph::new(0);
        let (xi, wi, bi) = (g.input(x), g.input(w), g.input(b));

        let y1 = g.conv2d(xi, wi, bi, 1, 0).unwrap();
        assert_eq!(g.value(y1).shape(), &[1, 2, 2, 2]);
        let want1 = [
            0.6499999999999999,
            -0.15000000000000016,
            -1.75,
            -2.5500000000000003,
            3.15,
            3.95,
            5.550000000000001,
            6.35,
        ];
        for (got, want) in g.value(y1).data().iter().zip(&want1) {
            assert_relative_eq!(got, want, max_relative = 1e-12);
        }

        let y2 = g.conv2d(xi, wi, bi, 2, 1).unwrap();
        assert_eq!(g.value(y2).shape(), &[1, 2, 2, 2]);
        let want2 = [
            0.8875,
            0.8250000000000001,
            -0.2,
            -2.5500000000000003,
            -0.4125000000000001,
            0.925,
            2.3,
            6.35,
        ];
        for (got, want) in g.value(y2).data().iter().zip(&want2) {
            assert_relative_eq!(got, want, max_relative = 1e-12);
        }
    }

    #[test]
    fn tconv2d_matches_fixed_values() {
        let x = t(&[1, 2, 2, 2], &arange(8, 0.5, -1.0));
        let w = t(&[2, 1, 3, 3], &arange(18, 0.1, -0.4));
        let b = t(&[1], &[0.25]);
        let mut g = Graph::new(0);
        let (xi, wi, bi) = (g.input(x), g.input(w), g.input(b));

        let y2 = g.tconv2d(xi, wi, bi, 2, 1).unwrap();
        assert_eq!(g.value(y2).shape(), &[1, 1, 4, 4]);
        let want2 = [
            1.15,
            2.4000000000000004,
            1.6,
            1.7,
            2.35,
            5.15,
            3.25,
            3.6500000000000004,
            2.05,
            4.2,
            2.5,
            2.8,
            2.6500000000000004,
            5.700000000000001,
            3.4000000000000004,
            3.7000000000000006,
        ];
        for (got, want) in g.value(y2).data().iter().zip(&want2) {
            assert_relative_eq!(got, want, max_relative = 1e-12);
        }

        let y1 = g.tconv2d(xi, wi, bi, 1, 1).unwrap();
        assert_eq!(g.value(y1).shape(), &[1, 1, 2, 2]);
        let want1 = [4.65, 5.25, 6.450000000000001, 7.050000000000001];
        for (got, want) in g.value(y1).data().iter().zip(&want1) {
            assert_relative_eq!(got, want, max_relative = 1e-12);
        }
    }

    #[test]
    fn tconv2d_stride_two_doubles_and_stride_one_preserves() {
        let mut g = Graph::new(0);
        let x = g.input(Tensor::full(vec![2, 3, 5, 7], 0.5));
        let w = g.input(Tensor::full(vec![3, 4, 3, 3], 0.01));
        let b = g.input(Tensor::zeros(vec![4]));
        let y2 = g.tconv2d(x, w, b, 2, 1).unwrap();
        assert_eq!(g.value(y2).shape(), &[2, 4, 10, 14]);
        let y1 = g.tconv2d(x, w, b, 1, 1).unwrap();
        assert_eq!(g.value(y1).shape(), &[2, 4, 5, 7]);
    }

    #[test]
    fn dense_matches_fixed_values() {
        let x = t(&[2, 3], &[0.5, -1.0, 2.0, 1.5, 0.25, -0.75]);
        let w = t(&[3, 2], &[0.1, -0.2, 0.3, 0.4, -0.5, 0.6]);
        let b = t(&[2], &[0.05, -0.1]);
        let mut g = Graph::new(0);
        let (xi, wi, bi) = (g.input(x), g.input(w), g.input(b));
        let y = g.dense(xi, wi, bi).unwrap();
        let want = [-1.2, 0.6, 0.6500000000000001, -0.75];
        for (got, want) in g.value(y).data().iter().zip(&want) {
            assert_relative_eq!(got, want, max_relative = 1e-12);
        }
    }

    #[test]
    fn gdn_and_igdn_match_fixed_values() {
        let x = t(&[1, 2, 1, 1], &[1.0, -2.0]);
        let beta = t(&[2], &[0.5, 1.5]);
        let gamma = t(&[2, 2], &[0.1, 0.2, 0.3, 0.4]);
        let mut g = Graph::new(0);
        let (xi, bi, gi) = (g.input(x), g.input(beta), g.input(gamma));
        let y = g.gdn(xi, bi, gi).unwrap();
        let want = [0.8451542547285166, -1.0846522890932808];
        for (got, want) in g.value(y).data().iter().zip(&want) {
            assert_relative_eq!(got, want, max_relative = 1e-12);
        }
        let z = g.igdn(xi, bi, gi).unwrap();
        let want_inv = [1.1832159566199232, -3.687817782917155];
        for (got, want) in g.value(z).data().iter().zip(&want_inv) {
            assert_relative_eq!(got, want, max_relative = 1e-12);
        }
    }

    #[test]
    fn gdn_rejects_nonpositive_beta() {
        let mut g = Graph::new(0);
        let x = g.input(Tensor::full(vec![1, 2, 1, 1], 1.0));
        let beta = g.input(t(&[2], &[0.5, 0.0]));
        let gamma = g.input(Tensor::zeros(vec![2, 2]));
        assert!(matches!(g.gdn(x, beta, gamma), Err(Error::Contract(_))));
    }

    #[test]
    fn sigmoid_matches_fixed_values_and_saturates_safely() {
        let mut g = Graph::new(0);
        let x = g.input(t(&[1, 5], &[0.0, 1.5, -3.0, 800.0, -800.0]));
        let y = g.sigmoid(x).unwrap();
        let v = g.value(y).data();
        assert_relative_eq!(v[0], 0.5, max_relative = 1e-15);
        assert_relative_eq!(v[1], 0.8175744761936437, max_relative = 1e-12);
        assert_relative_eq!(v[2], 0.04742587317756678, max_relative = 1e-12);
        assert_eq!(v[3], 1.0);
        assert_eq!(v[4], 0.0);
    }

    #[test]
    fn power_normalize_scales_rows_to_target_power() {
        // Row (3+4i, 0, 0, 0) with K=4, p_z=2: target norm sqrt(8),
        // scale sqrt(8)/5.
        let mut g = Graph::new(0);
        let x = g.input(t(&[1, 8], &[3.0, 4.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]));
        let z = g.power_normalize(x, 2.0).unwrap();
        let v = g.value(z).data();
        assert_relative_eq!(v[0], 1.697056274847714, max_relative = 1e-12);
        assert_relative_eq!(v[1], 2.262741699796952, max_relative = 1e-12);
        assert!(v[2..].iter().all(|&q| q == 0.0));
    }

    #[test]
    fn power_normalize_rejects_zero_rows() {
        let mut g = Graph::new(0);
        let x = g.input(Tensor::zeros(vec![2, 4]));
        assert!(matches!(g.power_normalize(x, 1.0), Err(Error::Degenerate(_))));
    }

    #[test]
    fn complex_mix_applies_interleaved_complex_products() {
        // (1+2i)*(3-i) = 5+5i; adding 0.5*(4+2i) = 2+1i gives 7+6i.
        let mut g = Graph::new(0);
        let a = g.input(t(&[1, 2], &[3.0, -1.0]));
        let b = g.input(t(&[1, 2], &[4.0, 2.0]));
        let y = g
            .complex_mix(&[a, b], &[Complex64::new(1.0, 2.0), Complex64::new(0.5, 0.0)])
            .unwrap();
        let v = g.value(y).data();
        assert_relative_eq!(v[0], 7.0, max_relative = 1e-15);
        assert_relative_eq!(v[1], 6.0, max_relative = 1e-15);
    }

    #[test]
    fn mse_averages_squared_differences() {
        let mut g = Graph::new(0);
        let a = g.input(t(&[2, 2], &[1.0, 2.0, 3.0, 4.0]));
        let b = g.input(t(&[2, 2], &[1.0, 0.0, 3.0, 1.0]));
        let l = g.mse(a, b).unwrap();
        assert_relative_eq!(g.value(l).item().unwrap(), 13.0 / 4.0, max_relative = 1e-15);
    }

    #[test]
    fn requires_grad_propagates_from_params_only() {
        let mut g = Graph::new(0);
        let x = g.input(Tensor::full(vec![1, 4], 1.0));
        let w = g.param(Tensor::full(vec![1, 4], 2.0));
        let c = g.add(x, x).unwrap();
        let y = g.add(c, w).unwrap();
        let sq = g.square(y).unwrap();
        let flat = g.reshape(sq, vec![1, 4]).unwrap();
        let target = g.input(Tensor::zeros(vec![1, 4]));
        let loss = g.mse(flat, target).unwrap();
        g.backward(loss).unwrap();
        assert!(g.grad(x).is_none());
        assert!(g.grad(c).is_none());
        assert!(g.grad(w).is_some());
        // d/dw mean((2+w)^2) = 2(2+w)/4 * ... per element: 2*4/4 = 2.
        for v in g.grad(w).unwrap().data() {
            assert_relative_eq!(v, 2.0, max_relative = 1e-12);
        }
    }

    #[test]
    fn unused_params_get_zero_gradients() {
        let mut g = Graph::new(0);
        let w = g.param(Tensor::full(vec![2], 1.0));
        let unused = g.param(Tensor::full(vec![3], 1.0));
        let sq = g.square(w).unwrap();
        let flat = g.reshape(sq, vec![1, 2]).unwrap();
        let target = g.input(Tensor::zeros(vec![1, 2]));
        let loss = g.mse(flat, target).unwrap();
        g.backward(loss).unwrap();
        let gu = g.grad(unused).unwrap();
        assert_eq!(gu.shape(), &[3]);
        assert!(gu.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn backward_then_replay_reproduces_values_bitwise() {
        let mut g = Graph::new(7);
        let x = g.input(t(&[1, 1, 2, 2], &[0.3, -0.7, 1.1, 0.05]));
        let w = g.param(t(&[1, 1, 3, 3], &arange(9, 0.05, -0.2)));
        let b = g.param(t(&[1], &[0.1]));
        let beta = g.param(t(&[1], &[0.8]));
        let gamma = g.param(t(&[1, 1], &[0.2]));
        let y = g.conv2d(x, w, b, 1, 1).unwrap();
        let n = g.gdn(y, beta, gamma).unwrap();
        let flat = g.reshape(n, vec![1, 4]).unwrap();
        let z = g.power_normalize(flat, 1.0).unwrap();
        let target = g.input(Tensor::zeros(vec![1, 4]));
        let loss = g.mse(z, target).unwrap();
        let before: Vec<Vec<f64>> =
            (0..g.node_count()).map(|i| g.value(NodeId(i)).data().to_vec()).collect();
        g.backward(loss).unwrap();
        g.replay_forward().unwrap();
        for (i, snap) in before.iter().enumerate() {
            assert_eq!(g.value(NodeId(i)).data(), snap.as_slice(), "node {} drifted", i);
        }
    }

    #[test]
    fn shape_mismatches_are_rejected() {
        let mut g = Graph::new(0);
        let a = g.input(Tensor::zeros(vec![1, 4]));
        let b = g.input(Tensor::zeros(vec![1, 5]));
        assert!(g.add(a, b).is_err());
        assert!(g.mse(a, b).is_err());
        assert!(g.reshape(a, vec![3]).is_err());
        let x = g.input(Tensor::zeros(vec![1, 2, 4, 4]));
        let w = g.input(Tensor::zeros(vec![2, 3, 3, 3]));
        let bias = g.input(Tensor::zeros(vec![2]));
        assert!(g.conv2d(x, w, bias, 1, 1).is_err());
        assert!(g.conv2d(x, w, bias, 3, 1).is_err());
        let odd = g.input(Tensor::zeros(vec![1, 3]));
        assert!(g.complex_mix(&[odd], &[Complex64::new(1.0, 0.0)]).is_err());
    }
}
