//! Complex-baseband channel simulation.
//!
//! One `ChannelRealization` is a single random draw of the physical medium:
//! an NxN coefficient matrix (transmitter k to receiver i) plus per-receiver
//! noise power. Transmission always evaluates the full superposition
//! rx_i = sum_k h_{k,i} z_k + n_i in fixed k order, so the structured cases
//! (single link, broadcast, shared uplink) reduce to it bit for bit when
//! their coefficient matrices carry the matching structure.
//!
//! Noise samples come from per-receiver streams of the realization's seed:
//! repeated transmission over one realization is deterministic, and distinct
//! realizations never share a stream.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex64;

use crate::autodiff::{Graph, NodeId};
use crate::error::{Error, Result};
use crate::fmath;
use crate::rng::{self, Purpose};
use crate::tensor::Tensor;

/// Equalization refuses direct coefficients at or below this magnitude and
/// reports the draw as an outage instead of amplifying by a huge 1/h.
pub const H_MIN: f64 = 1e-3;

/// Channel structure for one transmission.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScenarioKind {
    /// No fading: all coefficients one.
    Awgn,
    /// Independent fading on every transmitter/receiver link.
    D2d,
    /// One broadcast source: every receiver i sees its own h^(i) on all
    /// transmitted components (columns constant).
    Downlink,
    /// One physical receiver: transmitter k's coefficient h_k reaches all
    /// decoder instances, which also share one noise draw (rows constant).
    Uplink,
}

/// sigma^2 = P_z / 10^(snr_db/10).
pub fn noise_power_from_snr(snr_db: f64, p_z: f64) -> f64 {
    p_z / fmath::pow10(snr_db / 10.0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRealization {
    n: usize,
    /// Row-major [tx * n + rx].
    csi: Vec<Complex64>,
    noise_power: Vec<f64>,
    seed: u64,
}

impl ChannelRealization {
    /// Draws one realization for `snr_db.len()` links at symbol power
    /// `p_z`. Fading coefficients are circularly-symmetric unit-variance
    /// complex Gaussians arranged per `kind`; the uplink case shares one
    /// noise power and therefore requires equal SNR targets.
    pub fn sample(kind: ScenarioKind, snr_db: &[f64], p_z: f64, seed: u64) -> Result<Self> {
        let n = snr_db.len();
        if n == 0 {
            return Err(Error::contract("channel: at least one link".into()));
        }
        if !(p_z > 0.0) {
            return Err(Error::contract(format!("channel: symbol power {p_z} must be positive")));
        }
        if snr_db.iter().any(|s| !s.is_finite()) {
            return Err(Error::contract("channel: SNR targets must be finite".into()));
        }
        if kind == ScenarioKind::Uplink && snr_db.iter().any(|&s| s != snr_db[0]) {
            return Err(Error::contract(
                "channel: shared uplink noise needs one common SNR target".into(),
            ));
        }
        let mut rng = rng::stream(seed, Purpose::Csi, 0);
        let csi = match kind {
            ScenarioKind::Awgn => vec![Complex64::new(1.0, 0.0); n * n],
            ScenarioKind::D2d => (0..n * n).map(|_| rng::complex_normal(&mut rng)).collect(),
            ScenarioKind::Downlink => {
                let per_rx: Vec<Complex64> =
                    (0..n).map(|_| rng::complex_normal(&mut rng)).collect();
                let mut m = vec![Complex64::default(); n * n];
                for tx in 0..n {
                    m[tx * n..(tx + 1) * n].copy_from_slice(&per_rx);
                }
                m
            }
            ScenarioKind::Uplink => {
                let mut m = vec![Complex64::default(); n * n];
                for tx in 0..n {
                    let h = rng::complex_normal(&mut rng);
                    for rx in 0..n {
                        m[tx * n + rx] = h;
                    }
                }
                m
            }
        };
        let noise_power = snr_db.iter().map(|&s| noise_power_from_snr(s, p_z)).collect();
        Ok(ChannelRealization { n, csi, noise_power, seed })
    }

    /// Assembles a realization from explicit parts; reduction tests build
    /// structured matrices directly with this.
    pub fn from_parts(csi: Vec<Complex64>, noise_power: Vec<f64>, seed: u64) -> Result<Self> {
        let n = noise_power.len();
        if n == 0 || csi.len() != n * n {
            return Err(Error::contract(format!(
                "channel: {} coefficients vs {} noise powers",
                csi.len(),
                n
            )));
        }
        if noise_power.iter().any(|&p| !(p >= 0.0) || !p.is_finite()) {
            return Err(Error::contract("channel: noise powers must be finite and >= 0".into()));
        }
        Ok(ChannelRealization { n, csi, noise_power, seed })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Coefficient from transmitter `tx` to receiver `rx`.
    pub fn h(&self, tx: usize, rx: usize) -> Complex64 {
        self.csi[tx * self.n + rx]
    }

    /// Direct coefficient h_{i,i} of link i.
    pub fn h_direct(&self, i: usize) -> Complex64 {
        self.h(i, i)
    }

    pub fn noise_power(&self) -> &[f64] {
        &self.noise_power
    }

    /// True when any direct coefficient sits at or below the equalization
    /// cutoff, so callers can redraw instead of failing later.
    pub fn has_deep_fade(&self) -> bool {
        (0..self.n).any(|i| {
            let h = self.h_direct(i);
            fmath::hypot(h.re, h.im) <= H_MIN
        })
    }
}

fn noise_stream_index(kind: ScenarioKind, rx: usize) -> u64 {
    // One physical receiver in the uplink: every decoder instance reads the
    // same noise stream and therefore the same samples.
    if kind == ScenarioKind::Uplink {
        0
    } else {
        rx as u64
    }
}

/// Superposes N transmitted symbol vectors through one realization. A
/// silent transmitter contributes the zero vector. Noise and coefficients
/// are constants of the draw; only the symbols carry gradients (see
/// `transmit_graph` for the differentiable path).
pub fn transmit(
    ssvs: &[Vec<Complex64>],
    ch: &ChannelRealization,
    kind: ScenarioKind,
) -> Result<Vec<Vec<Complex64>>> {
    if ssvs.len() != ch.n {
        return Err(Error::shape(
            "transmit",
            format!("{} symbol vectors vs {} links", ssvs.len(), ch.n),
        ));
    }
    let k_len = ssvs.first().map(|s| s.len()).unwrap_or(0);
    if k_len == 0 || ssvs.iter().any(|s| s.len() != k_len) {
        return Err(Error::shape(
            "transmit",
            format!("symbol vectors must share one nonzero length, got {:?}",
                ssvs.iter().map(|s| s.len()).collect::<Vec<_>>()),
        ));
    }
    let mut out = Vec::with_capacity(ch.n);
    for rx in 0..ch.n {
        let mut acc = vec![Complex64::default(); k_len];
        for (tx, z) in ssvs.iter().enumerate() {
            let h = ch.h(tx, rx);
            for (a, s) in acc.iter_mut().zip(z) {
                *a += h * s;
            }
        }
        let sigma = fmath::sqrt(ch.noise_power[rx]);
        if sigma > 0.0 {
            let mut rng = rng::stream(ch.seed, Purpose::ChannelNoise, noise_stream_index(kind, rx));
            for a in &mut acc {
                *a += rng::complex_normal(&mut rng) * sigma;
            }
        }
        out.push(acc);
    }
    Ok(out)
}

/// z~ = rx / h_ii per symbol. Coefficients at or below `H_MIN` in magnitude
/// are outages.
pub fn equalize(rx: &[Complex64], h_ii: Complex64) -> Result<Vec<Complex64>> {
    let magnitude = fmath::hypot(h_ii.re, h_ii.im);
    if magnitude <= H_MIN {
        return Err(Error::DeepFade { magnitude, cutoff: H_MIN });
    }
    Ok(rx.iter().map(|z| z / h_ii).collect())
}

/// Differentiable superposition over graph nodes of interleaved (re, im)
/// rows, one node per transmitter, all of one shape. Noise enters as a
/// constant leaf drawn i.i.d. per element, so gradients flow only into the
/// symbols. Returns one received node per link.
pub fn transmit_graph(
    g: &mut Graph,
    ssvs: &[NodeId],
    ch: &ChannelRealization,
    kind: ScenarioKind,
) -> Result<Vec<NodeId>> {
    if ssvs.len() != ch.n {
        return Err(Error::shape(
            "transmit",
            format!("{} symbol nodes vs {} links", ssvs.len(), ch.n),
        ));
    }
    let shape = g.value(ssvs[0]).shape().to_vec();
    let elems = shape.iter().product::<usize>();
    let mut uplink_noise: Option<NodeId> = None;
    let mut out = Vec::with_capacity(ch.n);
    for rx in 0..ch.n {
        let mut inputs: Vec<NodeId> = ssvs.to_vec();
        let mut coeffs: Vec<Complex64> = (0..ch.n).map(|tx| ch.h(tx, rx)).collect();
        let sigma = fmath::sqrt(ch.noise_power[rx]);
        if sigma > 0.0 {
            let noise = match (kind, uplink_noise) {
                (ScenarioKind::Uplink, Some(node)) => node,
                _ => {
                    let mut rng =
                        rng::stream(ch.seed, Purpose::ChannelNoise, noise_stream_index(kind, rx));
                    let mut t = Tensor::zeros(shape.clone());
                    for pair in t.data_mut().chunks_exact_mut(2) {
                        let z = rng::complex_normal(&mut rng) * sigma;
                        pair[0] = z.re;
                        pair[1] = z.im;
                    }
                    debug_assert!(elems % 2 == 0);
                    let node = g.input(t);
                    if kind == ScenarioKind::Uplink {
                        uplink_noise = Some(node);
                    }
                    node
                }
            };
            inputs.push(noise);
            coeffs.push(Complex64::new(1.0, 0.0));
        }
        out.push(g.complex_mix(&inputs, &coeffs)?);
    }
    Ok(out)
}

/// Differentiable equalization: multiply by 1/h_ii, same outage rule as
/// `equalize`.
pub fn equalize_graph(g: &mut Graph, rx: NodeId, h_ii: Complex64) -> Result<NodeId> {
    let magnitude = fmath::hypot(h_ii.re, h_ii.im);
    if magnitude <= H_MIN {
        return Err(Error::DeepFade { magnitude, cutoff: H_MIN });
    }
    g.complex_mix(&[rx], &[Complex64::new(1.0, 0.0) / h_ii])
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn z(v: &[(f64, f64)]) -> Vec<Complex64> {
        v.iter().map(|&(r, i)| Complex64::new(r, i)).collect()
    }

    #[test]
    fn noise_power_follows_snr() {
        assert_relative_eq!(noise_power_from_snr(0.0, 2.0), 2.0, max_relative = 1e-15);
        assert_relative_eq!(noise_power_from_snr(10.0, 2.0), 0.2, max_relative = 1e-15);
        assert_relative_eq!(noise_power_from_snr(20.0, 1.0), 0.01, max_relative = 1e-15);
    }

    #[test]
    fn identity_channel_is_exact() {
        let ch = ChannelRealization::from_parts(
            vec![Complex64::new(1.0, 0.0)],
            vec![0.0],
            1,
        )
        .unwrap();
        let sym = z(&[(0.5, -1.25), (3.0, 0.0), (-0.125, 2.0)]);
        let rx = transmit(&[sym.clone()], &ch, ScenarioKind::Awgn).unwrap();
        assert_eq!(rx[0], sym);
    }

    #[test]
    fn two_link_superposition_matches_by_hand() {
        // h_{1,1}=1, h_{2,1}=i, noise-free: rx_1 = z_1 + i*z_2.
        let csi = z(&[(1.0, 0.0), (0.0, 0.0), (0.0, 1.0), (1.0, 0.0)]);
        let ch = ChannelRealization::from_parts(csi, vec![0.0, 0.0], 0).unwrap();
        let z1 = z(&[(1.0, 0.0), (0.0, 2.0)]);
        let z2 = z(&[(3.0, -1.0), (0.5, 0.5)]);
        let rx = transmit(&[z1.clone(), z2.clone()], &ch, ScenarioKind::D2d).unwrap();
        for (k, got) in rx[0].iter().enumerate() {
            let want = z1[k] + Complex64::new(0.0, 1.0) * z2[k];
            assert_relative_eq!(got.re, want.re, max_relative = 1e-15);
            assert_relative_eq!(got.im, want.im, max_relative = 1e-15);
        }
    }

    #[test]
    fn silent_transmitter_adds_nothing() {
        let csi = z(&[(0.6, 0.2), (0.0, 0.0), (0.7, -0.4), (1.0, 0.0)]);
        let ch = ChannelRealization::from_parts(csi, vec![0.0, 0.0], 0).unwrap();
        let z1 = z(&[(1.0, 1.0), (-2.0, 0.5)]);
        let silent = vec![Complex64::default(); 2];
        let rx = transmit(&[z1.clone(), silent], &ch, ScenarioKind::D2d).unwrap();
        for (k, got) in rx[0].iter().enumerate() {
            let want = Complex64::new(0.6, 0.2) * z1[k];
            assert_relative_eq!(got.re, want.re, max_relative = 1e-15);
            assert_relative_eq!(got.im, want.im, max_relative = 1e-15);
        }
    }

    #[test]
    fn equalize_divides_and_roundtrips() {
        let sym = z(&[(1.0, -1.0), (2.5, 0.25)]);
        let half: Vec<Complex64> =
            equalize(&sym, Complex64::new(2.0, 0.0)).unwrap();
        assert_relative_eq!(half[0].re, 0.5, max_relative = 1e-15);
        assert_relative_eq!(half[1].im, 0.125, max_relative = 1e-15);

        let h = Complex64::new(0.3, -0.4);
        let ch = ChannelRealization::from_parts(vec![h], vec![0.0], 9).unwrap();
        let rx = transmit(&[sym.clone()], &ch, ScenarioKind::D2d).unwrap();
        let back = equalize(&rx[0], h).unwrap();
        for (got, want) in back.iter().zip(&sym) {
            assert!((got - want).norm() < 1e-6);
        }
    }

    #[test]
    fn deep_fade_is_an_outage() {
        let sym = z(&[(1.0, 0.0)]);
        let at_cutoff = Complex64::new(H_MIN, 0.0);
        assert!(matches!(equalize(&sym, at_cutoff), Err(Error::DeepFade { .. })));
        let above = Complex64::new(1.5 * H_MIN, 0.0);
        assert!(equalize(&sym, above).is_ok());
    }

    #[test]
    fn sampling_is_seed_deterministic() {
        let a = ChannelRealization::sample(ScenarioKind::D2d, &[10.0, 10.0], 2.0, 7).unwrap();
        let b = ChannelRealization::sample(ScenarioKind::D2d, &[10.0, 10.0], 2.0, 7).unwrap();
        assert_eq!(a, b);
        let c = ChannelRealization::sample(ScenarioKind::D2d, &[10.0, 10.0], 2.0, 8).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn structured_kinds_have_structured_matrices() {
        let dl = ChannelRealization::sample(ScenarioKind::Downlink, &[5.0, 8.0, 3.0], 1.0, 4)
            .unwrap();
        for rx in 0..3 {
            let h = dl.h(0, rx);
            assert_eq!(dl.h(1, rx), h);
            assert_eq!(dl.h(2, rx), h);
        }
        let ul = ChannelRealization::sample(ScenarioKind::Uplink, &[5.0; 3], 1.0, 4).unwrap();
        for tx in 0..3 {
            let h = ul.h(tx, 0);
            assert_eq!(ul.h(tx, 1), h);
            assert_eq!(ul.h(tx, 2), h);
        }
        assert!(ChannelRealization::sample(ScenarioKind::Uplink, &[5.0, 6.0], 1.0, 4).is_err());
    }

    #[test]
    fn transmit_rejects_mismatched_lengths() {
        let ch = ChannelRealization::sample(ScenarioKind::Awgn, &[10.0, 10.0], 1.0, 0).unwrap();
        let a = z(&[(1.0, 0.0), (2.0, 0.0)]);
        let b = z(&[(1.0, 0.0)]);
        assert!(transmit(&[a.clone(), b], &ch, ScenarioKind::Awgn).is_err());
        assert!(transmit(&[a], &ch, ScenarioKind::Awgn).is_err());
    }
}
