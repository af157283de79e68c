//! User detection by correlation gating.
//!
//! Each decoder holds a small bank of reference rows captured from its
//! paired encoder. An equalized received row is scored by its average
//! absolute correlation against the bank; rows from the paired encoder
//! score near the symbol power, rows from other encoders score near zero
//! because training drives the transmitted rows toward mutual
//! orthogonality. A threshold on the score accepts or abandons the
//! transmission before any decoding work is spent on it.

use alloc::format;
use alloc::vec::Vec;

use num_complex::Complex64;

use crate::autodiff::Graph;
use crate::error::{Error, Result};
use crate::fmath;
use crate::model::{row_to_complex, DmaNet};
use crate::tensor::Tensor;

/// Reference rows produced by one paired encoder.
#[derive(Debug, Clone)]
pub struct ReferenceBank {
    refs: Vec<Vec<Complex64>>,
    owner: usize,
    snr_db: f64,
}

impl ReferenceBank {
    /// Wraps already-encoded reference rows. Every row must match the
    /// first row's length and carry average power `p_z` (the encoder's
    /// normalization guarantees it; snapshots from other sources are
    /// checked here).
    pub fn new(refs: Vec<Vec<Complex64>>, owner: usize, snr_db: f64, p_z: f64) -> Result<Self> {
        if refs.is_empty() || refs[0].is_empty() {
            return Err(Error::contract("reference bank: at least one nonempty row".into()));
        }
        let k = refs[0].len();
        for (m, r) in refs.iter().enumerate() {
            if r.len() != k {
                return Err(Error::shape(
                    "reference bank",
                    format!("row {} has {} symbols, expected {}", m, r.len(), k),
                ));
            }
            let power: f64 = r.iter().map(|z| z.norm_sqr()).sum::<f64>() / k as f64;
            if !(power.is_finite()) || fmath::fabs(power - p_z) > 1e-6 * p_z.max(1.0) {
                return Err(Error::contract(format!(
                    "reference bank: row {m} carries power {power}, expected {p_z}"
                )));
            }
        }
        Ok(ReferenceBank { refs, owner, snr_db })
    }

    pub fn refs(&self) -> &[Vec<Complex64>] {
        &self.refs
    }

    pub fn len(&self) -> usize {
        self.refs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.refs.is_empty()
    }

    pub fn owner(&self) -> usize {
        self.owner
    }

    pub fn snr_db(&self) -> f64 {
        self.snr_db
    }

    pub fn symbols(&self) -> usize {
        self.refs[0].len()
    }
}

/// Gate settings: decision threshold and expected bank size.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GateConfig {
    threshold: f64,
    m: usize,
}

impl GateConfig {
    pub fn new(threshold: f64, m: usize) -> Result<Self> {
        if !(threshold > 0.0) {
            return Err(Error::contract(format!(
                "gate: threshold {threshold} must be positive"
            )));
        }
        if m == 0 {
            return Err(Error::contract("gate: bank size must be at least 1".into()));
        }
        Ok(GateConfig { threshold, m })
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    pub fn m(&self) -> usize {
        self.m
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GateDecision {
    Accept,
    Abandon,
}

/// Average absolute correlation degree:
/// R = (1/(K*M)) * sum_m |sum_k conj(row_k) * ref_{m,k}|.
pub fn aacd(rmssv: &[Complex64], bank: &ReferenceBank) -> Result<f64> {
    let k = bank.symbols();
    if rmssv.len() != k {
        return Err(Error::shape(
            "aacd",
            format!("row has {} symbols, bank rows have {}", rmssv.len(), k),
        ));
    }
    let mut acc = 0.0;
    for r in bank.refs() {
        let mut dot = Complex64::default();
        for (z, href) in rmssv.iter().zip(r) {
            dot += z.conj() * href;
        }
        acc += fmath::hypot(dot.re, dot.im);
    }
    Ok(acc / (k as f64 * bank.len() as f64))
}

/// Accepts iff the score reaches the threshold (boundary inclusive).
pub fn gate(rmssv: &[Complex64], bank: &ReferenceBank, cfg: &GateConfig) -> Result<GateDecision> {
    if bank.len() != cfg.m {
        return Err(Error::contract(format!(
            "gate: bank holds {} rows, config expects {}",
            bank.len(),
            cfg.m
        )));
    }
    let score = aacd(rmssv, bank)?;
    Ok(if score >= cfg.threshold { GateDecision::Accept } else { GateDecision::Abandon })
}

/// Encodes `images` ([M, C, H, W]) with pair `edp`'s encoder at a nominal
/// SNR and keeps the rows as the pair's references.
pub fn build_reference_bank(
    net: &DmaNet,
    edp: usize,
    images: &Tensor,
    snr_db: f64,
) -> Result<ReferenceBank> {
    if images.shape().len() != 4 || images.shape()[0] == 0 {
        return Err(Error::shape(
            "reference bank",
            format!("sample batch {:?}, expected [M, C, H, W]", images.shape()),
        ));
    }
    let mut g = Graph::new(0);
    let bound = net.bind_frozen(&mut g);
    let batch = g.input(images.clone());
    let feats = net.encode(&mut g, &bound, edp, batch, snr_db)?;
    let len = net.arch().feature_len();
    let refs: Vec<Vec<Complex64>> =
        g.value(feats).data().chunks_exact(len).map(row_to_complex).collect();
    ReferenceBank::new(refs, edp, snr_db, net.arch().p_z)
}

/// Calibration outcome: the chosen threshold and the fraction of the
/// supplied scores it would misclassify.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Calibration {
    pub threshold: f64,
    pub overlap: f64,
}

/// Picks a decision threshold from empirical paired/unpaired score samples.
/// When the clouds separate, the midpoint between the closest edges; when
/// they overlap, the midpoint of the two means, with the misclassified
/// fraction reported.
pub fn calibrate_threshold(paired: &[f64], unpaired: &[f64]) -> Result<Calibration> {
    if paired.is_empty() || unpaired.is_empty() {
        return Err(Error::contract(
            "threshold calibration needs both paired and unpaired samples".into(),
        ));
    }
    let min_paired = paired.iter().cloned().fold(f64::INFINITY, f64::min);
    let max_unpaired = unpaired.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let threshold = if min_paired > max_unpaired {
        0.5 * (min_paired + max_unpaired)
    } else {
        let mean = |xs: &[f64]| xs.iter().sum::<f64>() / xs.len() as f64;
        0.5 * (mean(paired) + mean(unpaired))
    };
    let missed_paired = paired.iter().filter(|&&r| r < threshold).count();
    let passed_unpaired = unpaired.iter().filter(|&&r| r >= threshold).count();
    let overlap = (missed_paired + passed_unpaired) as f64 / (paired.len() + unpaired.len()) as f64;
    Ok(Calibration { threshold, overlap })
}
