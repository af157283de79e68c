//! Encoder/decoder pairs and the network that owns them.
//!
//! A `DmaNet` holds N encoder/decoder pairs (EDPs) trained jointly. Every
//! encoder maps an image batch to rows of interleaved (re, im) feature
//! pairs, normalized so each row carries a fixed average complex symbol
//! power. The matching decoder maps equalized rows back to images. Blocks
//! are residual: a strided main convolution with GDN (IGDN on the decoder
//! side) plus a 1x1 strided skip, merged by addition. Attention blocks fed
//! with the channel SNR re-weight feature channels between layers, so one
//! trained network serves a range of noise levels.
//!
//! Parameters live in one flat arena indexed by structure tables. That
//! keeps optimizer state, checkpoint order, and name lookup trivially
//! consistent.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex64;

use crate::autodiff::{Graph, NodeId};
use crate::error::{Error, Result};
use crate::fmath;
use crate::rng::{self, Purpose};
use crate::tensor::Tensor;

/// Lower bound added to squared beta parameters so GDN denominators stay
/// strictly positive.
const BETA_FLOOR: f64 = 1e-6;

/// Geometry and size of every EDP in a network.
#[derive(Debug, Clone, PartialEq)]
pub struct ArchConfig {
    pub height: usize,
    pub width: usize,
    pub in_channels: usize,
    /// Output channels per encoder block; the last entry is the feature
    /// channel count c. Decoders mirror this list.
    pub block_channels: Vec<usize>,
    /// Stride per block, each 1 or 2. Encoders downsample with them in
    /// order; decoders upsample with the same list, so stride-2 stages sit
    /// at the decoder's end.
    pub strides: Vec<usize>,
    pub kernel_size: usize,
    /// Hidden width of the attention blocks; 0 derives max(C/2, 1) from
    /// each block's channel count.
    pub afb_hidden: usize,
    /// Number of encoder/decoder pairs N.
    pub edps: usize,
    /// Average complex symbol power every transmitted row is scaled to.
    pub p_z: f64,
}

impl ArchConfig {
    /// Desk-scale preset: four blocks, 8x downsampling, feature channels c.
    pub fn desk(height: usize, width: usize, c: usize, edps: usize) -> ArchConfig {
        ArchConfig {
            height,
            width,
            in_channels: 3,
            block_channels: vec![32, 64, 64, c],
            strides: vec![1, 2, 2, 2],
            kernel_size: 3,
            afb_hidden: 0,
            edps,
            p_z: 1.0,
        }
    }

    pub fn n_blocks(&self) -> usize {
        self.block_channels.len()
    }

    /// Product of strides: total spatial reduction factor.
    pub fn downsample(&self) -> usize {
        self.strides.iter().product()
    }

    /// Interleaved feature length 2K produced by one encoder.
    pub fn feature_len(&self) -> usize {
        let d = self.downsample();
        (self.height / d) * (self.width / d) * self.block_channels[self.n_blocks() - 1]
    }

    /// Complex symbols per transmitted image.
    pub fn symbols(&self) -> usize {
        self.feature_len() / 2
    }

    pub fn validate(&self) -> Result<()> {
        if self.block_channels.is_empty() || self.block_channels.len() != self.strides.len() {
            return Err(Error::contract(format!(
                "arch: {} block channels vs {} strides",
                self.block_channels.len(),
                self.strides.len()
            )));
        }
        if self.block_channels.iter().any(|&c| c == 0) || self.in_channels == 0 {
            return Err(Error::contract("arch: zero-channel stage".into()));
        }
        if self.strides.iter().any(|&s| s != 1 && s != 2) {
            return Err(Error::contract("arch: strides must be 1 or 2".into()));
        }
        if self.kernel_size == 0 || self.kernel_size % 2 == 0 {
            return Err(Error::contract(format!(
                "arch: kernel size {} must be odd so same-size stages line up",
                self.kernel_size
            )));
        }
        let d = self.downsample();
        if self.height == 0 || self.width == 0 || self.height % d != 0 || self.width % d != 0 {
            return Err(Error::contract(format!(
                "arch: {}x{} images do not divide the {}x downsampling",
                self.height, self.width, d
            )));
        }
        if self.feature_len() % 2 != 0 {
            return Err(Error::contract(format!(
                "arch: feature length {} cannot pair into complex symbols",
                self.feature_len()
            )));
        }
        if self.edps == 0 {
            return Err(Error::contract("arch: at least one encoder/decoder pair".into()));
        }
        if !(self.p_z > 0.0) {
            return Err(Error::contract(format!("arch: symbol power {} must be positive", self.p_z)));
        }
        Ok(())
    }

    fn afb_width(&self, channels: usize) -> usize {
        if self.afb_hidden > 0 {
            self.afb_hidden
        } else {
            (channels / 2).max(1)
        }
    }
}

/// Arena indices for one residual block.
#[derive(Debug, Clone)]
struct BlockIdx {
    w: usize,
    b: usize,
    skip_w: usize,
    skip_b: usize,
    /// (beta_sqrt, gamma_sqrt) of the GDN/IGDN stage; the final decoder
    /// block has none.
    norm: Option<(usize, usize)>,
    /// Slope parameter of the trailing PReLU; absent where the block ends
    /// in the feature map (last encoder block) or in sigmoid (last decoder
    /// block).
    prelu: Option<usize>,
}

/// Arena indices for one attention block.
#[derive(Debug, Clone)]
struct AfbIdx {
    w1: usize,
    b1: usize,
    alpha: usize,
    w2: usize,
    b2: usize,
}

#[derive(Debug, Clone)]
struct CoderIdx {
    blocks: Vec<BlockIdx>,
    afbs: Vec<AfbIdx>,
}

#[derive(Debug, Clone)]
struct EdpIdx {
    enc: CoderIdx,
    dec: CoderIdx,
}

/// N jointly trained encoder/decoder pairs over one flat parameter arena.
#[derive(Debug, Clone)]
pub struct DmaNet {
    arch: ArchConfig,
    params: Vec<Tensor>,
    names: Vec<String>,
    edps: Vec<EdpIdx>,
}

/// Graph leaves for every parameter of a bound network, parallel to
/// `DmaNet::params`.
pub struct BoundNet {
    ids: Vec<NodeId>,
}

impl BoundNet {
    pub fn param_ids(&self) -> &[NodeId] {
        &self.ids
    }
}

enum Side {
    Encode,
    Decode,
}

struct ArenaBuilder {
    params: Vec<Tensor>,
    names: Vec<String>,
    seed: u64,
}

impl ArenaBuilder {
    fn push(&mut self, name: String, t: Tensor) -> usize {
        self.params.push(t);
        self.names.push(name);
        self.params.len() - 1
    }

    fn uniform(&mut self, name: String, shape: Vec<usize>, bound: f64) -> usize {
        let idx = self.params.len() as u64;
        let mut rng = rng::stream(self.seed, Purpose::ParamInit, idx);
        let n: usize = shape.iter().product();
        let data: Vec<f64> = (0..n).map(|_| rng::uniform(&mut rng, -bound, bound)).collect();
        self.push(name, Tensor::new(shape, data).expect("element count matches shape"))
    }

    fn conv_pair(
        &mut self,
        prefix: &str,
        ci: usize,
        co: usize,
        k: usize,
        transposed: bool,
    ) -> (usize, usize) {
        let fan_in = (ci * k * k) as f64;
        let bound = fmath::sqrt(6.0 / fan_in);
        let shape = if transposed { vec![ci, co, k, k] } else { vec![co, ci, k, k] };
        let w = self.uniform(format!("{prefix}.w"), shape, bound);
        let b = self.push(format!("{prefix}.b"), Tensor::zeros(vec![co]));
        (w, b)
    }

    fn skip_pair(
        &mut self,
        prefix: &str,
        ci: usize,
        co: usize,
        transposed: bool,
    ) -> (usize, usize) {
        let bound = fmath::sqrt(6.0 / ci as f64);
        let shape = if transposed { vec![ci, co, 1, 1] } else { vec![co, ci, 1, 1] };
        let w = self.uniform(format!("{prefix}.skip_w"), shape, bound);
        let b = self.push(format!("{prefix}.skip_b"), Tensor::zeros(vec![co]));
        (w, b)
    }

    fn norm_pair(&mut self, prefix: &str, c: usize) -> (usize, usize) {
        let beta = self.push(format!("{prefix}.beta_sqrt"), Tensor::full(vec![c], 1.0));
        let mut diag = Tensor::zeros(vec![c, c]);
        let g0 = fmath::sqrt(0.1);
        for i in 0..c {
            diag.data_mut()[i * c + i] = g0;
        }
        let gamma = self.push(format!("{prefix}.gamma_sqrt"), diag);
        (beta, gamma)
    }

    fn dense_pair(&mut self, prefix: &str, fi: usize, fo: usize) -> (usize, usize) {
        let bound = fmath::sqrt(6.0 / (fi + fo) as f64);
        let w = self.uniform(format!("{prefix}.w"), vec![fi, fo], bound);
        let b = self.push(format!("{prefix}.b"), Tensor::zeros(vec![fo]));
        (w, b)
    }

    fn afb(&mut self, prefix: &str, channels: usize, hidden: usize) -> AfbIdx {
        let (w1, b1) = self.dense_pair(&format!("{prefix}.fc1"), channels + 1, hidden);
        let alpha = self.push(format!("{prefix}.alpha"), Tensor::full(vec![hidden], 0.25));
        let (w2, b2) = self.dense_pair(&format!("{prefix}.fc2"), hidden, channels);
        AfbIdx { w1, b1, alpha, w2, b2 }
    }

    fn coder(&mut self, arch: &ArchConfig, edp: usize, side: Side) -> CoderIdx {
        let nb = arch.n_blocks();
        let k = arch.kernel_size;
        let (tag, transposed) = match side {
            Side::Encode => ("enc", false),
            Side::Decode => ("dec", true),
        };
        // Encoder channel path: in -> b0 -> ... -> c. Decoder runs it in
        // reverse: c -> b_{nb-2} -> ... -> b0 -> in.
        let mut path = Vec::with_capacity(nb + 1);
        path.push(arch.in_channels);
        path.extend_from_slice(&arch.block_channels);
        if transposed {
            path.reverse();
        }
        let mut blocks = Vec::with_capacity(nb);
        let mut afbs = Vec::with_capacity(nb.saturating_sub(1));
        for i in 0..nb {
            let (ci, co) = (path[i], path[i + 1]);
            let prefix = format!("edp{edp}.{tag}.block{i}");
            let (w, b) = self.conv_pair(&prefix, ci, co, k, transposed);
            let (skip_w, skip_b) = self.skip_pair(&prefix, ci, co, transposed);
            let last = i == nb - 1;
            let norm = if transposed && last { None } else { Some(self.norm_pair(&prefix, co)) };
            let has_prelu = !last;
            let prelu = if has_prelu {
                Some(self.push(format!("{prefix}.prelu"), Tensor::full(vec![co], 0.25)))
            } else {
                None
            };
            blocks.push(BlockIdx { w, b, skip_w, skip_b, norm, prelu });
            if i + 1 < nb {
                let hidden = arch.afb_width(co);
                afbs.push(self.afb(&format!("edp{edp}.{tag}.afb{i}"), co, hidden));
            }
        }
        CoderIdx { blocks, afbs }
    }
}

impl DmaNet {
    /// Builds a network with freshly initialized parameters. Each parameter
    /// tensor draws from its own stream of `seed`, so construction order
    /// cannot disturb reproducibility.
    pub fn new(arch: ArchConfig, seed: u64) -> Result<DmaNet> {
        arch.validate()?;
        let mut ab = ArenaBuilder { params: Vec::new(), names: Vec::new(), seed };
        let mut edps = Vec::with_capacity(arch.edps);
        for k in 0..arch.edps {
            let enc = ab.coder(&arch, k, Side::Encode);
            let dec = ab.coder(&arch, k, Side::Decode);
            edps.push(EdpIdx { enc, dec });
        }
        Ok(DmaNet { arch, params: ab.params, names: ab.names, edps })
    }

    pub fn arch(&self) -> &ArchConfig {
        &self.arch
    }

    /// Number of encoder/decoder pairs.
    pub fn n(&self) -> usize {
        self.arch.edps
    }

    pub fn params(&self) -> &[Tensor] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [Tensor] {
        &mut self.params
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn param_sizes(&self) -> Vec<usize> {
        self.params.iter().map(|t| t.len()).collect()
    }

    /// Registers every parameter as a trainable graph leaf.
    pub fn bind(&self, g: &mut Graph) -> BoundNet {
        BoundNet { ids: self.params.iter().map(|t| g.param(t.clone())).collect() }
    }

    /// Registers every parameter as a constant leaf: forward-only graphs
    /// skip all gradient bookkeeping.
    pub fn bind_frozen(&self, g: &mut Graph) -> BoundNet {
        BoundNet { ids: self.params.iter().map(|t| g.input(t.clone())).collect() }
    }

    fn afb_apply(
        &self,
        g: &mut Graph,
        bound: &BoundNet,
        afb: &AfbIdx,
        x: NodeId,
        snr_db: f64,
    ) -> Result<NodeId> {
        let id = |i: usize| bound.ids[i];
        let stats = g.channel_mean(x)?;
        let with_snr = g.append_const_col(stats, snr_db / 20.0)?;
        let h = g.dense(with_snr, id(afb.w1), id(afb.b1))?;
        let h = g.prelu(h, id(afb.alpha))?;
        let gate = g.dense(h, id(afb.w2), id(afb.b2))?;
        let gate = g.sigmoid(gate)?;
        g.channel_scale(x, gate)
    }

    fn run_coder(
        &self,
        g: &mut Graph,
        bound: &BoundNet,
        coder: &CoderIdx,
        side: Side,
        mut x: NodeId,
        snr_db: f64,
    ) -> Result<NodeId> {
        let id = |i: usize| bound.ids[i];
        let pad = (self.arch.kernel_size - 1) / 2;
        let transposed = matches!(side, Side::Decode);
        // Decoders upsample where encoders downsampled: the stride list is
        // reused in reverse so spatial sizes retrace the encoder's path.
        let nb = coder.blocks.len();
        for (i, blk) in coder.blocks.iter().enumerate() {
            let stride = if transposed { self.arch.strides[nb - 1 - i] } else { self.arch.strides[i] };
            let mut main = if transposed {
                g.tconv2d(x, id(blk.w), id(blk.b), stride, pad)?
            } else {
                g.conv2d(x, id(blk.w), id(blk.b), stride, pad)?
            };
            if let Some((beta_sqrt, gamma_sqrt)) = blk.norm {
                let beta_sq = g.square(id(beta_sqrt))?;
                let beta = g.add_const(beta_sq, BETA_FLOOR)?;
                let gamma = g.square(id(gamma_sqrt))?;
                main = if transposed {
                    g.igdn(main, beta, gamma)?
                } else {
                    g.gdn(main, beta, gamma)?
                };
            }
            let skip = if transposed {
                g.tconv2d(x, id(blk.skip_w), id(blk.skip_b), stride, 0)?
            } else {
                g.conv2d(x, id(blk.skip_w), id(blk.skip_b), stride, 0)?
            };
            x = g.add(main, skip)?;
            if let Some(alpha) = blk.prelu {
                x = g.prelu(x, id(alpha))?;
            }
            if let Some(afb) = coder.afbs.get(i) {
                x = self.afb_apply(g, bound, afb, x, snr_db)?;
            }
        }
        Ok(x)
    }

    /// Encodes an image batch [B, in_channels, H, W] into power-normalized
    /// feature rows [B, 2K] of interleaved (re, im) pairs.
    pub fn encode(
        &self,
        g: &mut Graph,
        bound: &BoundNet,
        edp: usize,
        images: NodeId,
        snr_db: f64,
    ) -> Result<NodeId> {
        self.check_edp(edp)?;
        check_snr(snr_db)?;
        let shape = g.value(images).shape().to_vec();
        let want = [self.arch.in_channels, self.arch.height, self.arch.width];
        if shape.len() != 4 || shape[1..] != want {
            return Err(Error::shape(
                "encode",
                format!("batch {:?}, expected [B, {}, {}, {}]", shape, want[0], want[1], want[2]),
            ));
        }
        let coder = &self.edps[edp].enc;
        let fm = self.run_coder(g, bound, coder, Side::Encode, images, snr_db)?;
        let batch = shape[0];
        let flat = g.reshape(fm, vec![batch, self.arch.feature_len()])?;
        g.power_normalize(flat, self.arch.p_z)
    }

    /// Decodes equalized feature rows [B, 2K] back to images in [0, 1].
    pub fn decode(
        &self,
        g: &mut Graph,
        bound: &BoundNet,
        edp: usize,
        features: NodeId,
        snr_db: f64,
    ) -> Result<NodeId> {
        self.check_edp(edp)?;
        check_snr(snr_db)?;
        let shape = g.value(features).shape().to_vec();
        if shape.len() != 2 || shape[1] != self.arch.feature_len() {
            return Err(Error::shape(
                "decode",
                format!("features {:?}, expected [B, {}]", shape, self.arch.feature_len()),
            ));
        }
        let d = self.arch.downsample();
        let (hq, wq) = (self.arch.height / d, self.arch.width / d);
        let c = self.arch.block_channels[self.arch.n_blocks() - 1];
        let fm = g.reshape(features, vec![shape[0], c, hq, wq])?;
        let coder = &self.edps[edp].dec;
        let out = self.run_coder(g, bound, coder, Side::Decode, fm, snr_db)?;
        g.sigmoid(out)
    }

    fn check_edp(&self, edp: usize) -> Result<()> {
        if edp >= self.arch.edps {
            return Err(Error::contract(format!(
                "pair index {} out of range for {} pairs",
                edp, self.arch.edps
            )));
        }
        Ok(())
    }
}

fn check_snr(snr_db: f64) -> Result<()> {
    if !snr_db.is_finite() {
        return Err(Error::contract(format!(
            "SNR conditioning value {snr_db} must be finite"
        )));
    }
    Ok(())
}

impl DmaNet {
    /// Replaces the arena with named tensors, matching by name and
    /// validating shapes. Order in `entries` is free; every arena slot must
    /// be covered exactly once.
    pub fn load_params(&mut self, entries: &[(String, Tensor)]) -> Result<()> {
        let mut used = vec![false; self.params.len()];
        for (name, tensor) in entries {
            let Some(slot) = self.names.iter().position(|n| n == name) else {
                return Err(Error::contract(format!("unknown parameter {name}")));
            };
            if used[slot] {
                return Err(Error::contract(format!("parameter {name} appears twice")));
            }
            if self.params[slot].shape() != tensor.shape() {
                return Err(Error::contract(format!(
                    "parameter {} has shape {:?}, expected {:?}",
                    name,
                    tensor.shape(),
                    self.params[slot].shape()
                )));
            }
            self.params[slot] = tensor.clone();
            used[slot] = true;
        }
        if let Some(missing) = used.iter().position(|u| !u) {
            return Err(Error::contract(format!(
                "parameter {} missing from checkpoint",
                self.names[missing]
            )));
        }
        Ok(())
    }
}

/// Interleaved (re, im) feature row viewed as complex symbols.
pub fn row_to_complex(row: &[f64]) -> Vec<Complex64> {
    row.chunks_exact(2).map(|p| Complex64::new(p[0], p[1])).collect()
}

/// Complex symbols flattened back to an interleaved feature row.
pub fn complex_to_row(z: &[Complex64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(z.len() * 2);
    for c in z {
        out.push(c.re);
        out.push(c.im);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn tiny_arch() -> ArchConfig {
        ArchConfig {
            height: 8,
            width: 8,
            in_channels: 3,
            block_channels: vec![4, 6, 6, 4],
            strides: vec![1, 2, 2, 2],
            kernel_size: 3,
            afb_hidden: 0,
            edps: 2,
            p_z: 1.0,
        }
    }

    #[test]
    fn desk_preset_symbol_budget() {
        let arch = ArchConfig::desk(128, 128, 16, 2);
        arch.validate().unwrap();
        // (128/8)^2 * 16 values = 4096 reals = 2048 complex symbols.
        assert_eq!(arch.feature_len(), 4096);
        assert_eq!(arch.symbols(), 2048);
    }

    #[test]
    fn encode_decode_shapes_roundtrip() {
        let arch = tiny_arch();
        let net = DmaNet::new(arch.clone(), 11).unwrap();
        let mut g = Graph::new(0);
        let bound = net.bind_frozen(&mut g);
        let images = g.input(Tensor::full(vec![2, 3, 8, 8], 0.5));
        let feats = net.encode(&mut g, &bound, 0, images, 10.0).unwrap();
        assert_eq!(g.value(feats).shape(), &[2, arch.feature_len()]);
        let out = net.decode(&mut g, &bound, 0, feats, 10.0).unwrap();
        assert_eq!(g.value(out).shape(), &[2, 3, 8, 8]);
        assert!(g.value(out).data().iter().all(|&v| (0.0..=1.0).contains(&v)));
    }

    #[test]
    fn encoded_rows_carry_the_configured_power() {
        let mut arch = tiny_arch();
        arch.p_z = 2.0;
        let net = DmaNet::new(arch.clone(), 3).unwrap();
        let mut g = Graph::new(0);
        let bound = net.bind_frozen(&mut g);
        let mut img = Tensor::zeros(vec![2, 3, 8, 8]);
        for (i, v) in img.data_mut().iter_mut().enumerate() {
            *v = (i % 17) as f64 / 17.0;
        }
        let images = g.input(img);
        let feats = net.encode(&mut g, &bound, 1, images, 5.0).unwrap();
        let k = arch.symbols() as f64;
        for row in g.value(feats).data().chunks_exact(arch.feature_len()) {
            let power: f64 = row.iter().map(|v| v * v).sum::<f64>() / k;
            assert_relative_eq!(power, 2.0, max_relative = 1e-12);
        }
    }

    #[test]
    fn same_seed_reproduces_same_params() {
        let a = DmaNet::new(tiny_arch(), 42).unwrap();
        let b = DmaNet::new(tiny_arch(), 42).unwrap();
        assert_eq!(a.names(), b.names());
        for (x, y) in a.params().iter().zip(b.params()) {
            assert_eq!(x.data(), y.data());
        }
        let c = DmaNet::new(tiny_arch(), 43).unwrap();
        assert!(a.params().iter().zip(c.params()).any(|(x, y)| x.data() != y.data()));
    }

    #[test]
    fn param_names_are_unique_and_structured() {
        let net = DmaNet::new(tiny_arch(), 0).unwrap();
        let names = net.names();
        for (i, n) in names.iter().enumerate() {
            assert!(!names[..i].contains(n), "duplicate name {}", n);
        }
        assert!(names.iter().any(|n| n == "edp0.enc.block0.w"));
        assert!(names.iter().any(|n| n == "edp1.dec.afb2.fc2.b"));
        // Final decoder block ends in sigmoid: no norm, no slope.
        assert!(!names.iter().any(|n| n.starts_with("edp0.dec.block3.beta")));
        assert!(!names.iter().any(|n| n == "edp0.dec.block3.prelu"));
        // Final encoder block keeps GDN but drops the slope.
        assert!(names.iter().any(|n| n == "edp0.enc.block3.beta_sqrt"));
        assert!(!names.iter().any(|n| n == "edp0.enc.block3.prelu"));
    }

    #[test]
    fn load_params_matches_by_name_and_rejects_gaps() {
        let src = DmaNet::new(tiny_arch(), 5).unwrap();
        let mut dst = DmaNet::new(tiny_arch(), 6).unwrap();
        let mut entries: Vec<(String, Tensor)> = src
            .names()
            .iter()
            .cloned()
            .zip(src.params().iter().cloned())
            .collect();
        entries.reverse();
        dst.load_params(&entries).unwrap();
        for (a, b) in dst.params().iter().zip(src.params()) {
            assert_eq!(a.data(), b.data());
        }
        entries.pop();
        let mut dst2 = DmaNet::new(tiny_arch(), 6).unwrap();
        assert!(dst2.load_params(&entries).is_err());
    }

    #[test]
    fn invalid_geometry_is_rejected() {
        let mut arch = tiny_arch();
        arch.height = 12; // not divisible by the 8x downsampling
        assert!(arch.validate().is_err());
        let mut arch = tiny_arch();
        arch.kernel_size = 4;
        assert!(arch.validate().is_err());
        let mut arch = tiny_arch();
        arch.strides = vec![1, 2, 3, 2];
        assert!(arch.validate().is_err());
        let mut arch = tiny_arch();
        arch.edps = 0;
        assert!(arch.validate().is_err());
    }

    #[test]
    fn complex_row_roundtrip() {
        let row = [1.0, -2.0, 0.5, 3.5];
        let z = row_to_complex(&row);
        assert_eq!(z, vec![Complex64::new(1.0, -2.0), Complex64::new(0.5, 3.5)]);
        assert_eq!(complex_to_row(&z), row.to_vec());
    }
}
