//! Image quality, bandwidth efficiency, and orthogonality measurements.

use alloc::format;
use alloc::vec::Vec;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fmath;

/// Reconstruction quality of 8-bit images in dB: 10*log10(255^2 / MSE).
/// Identical images (MSE = 0) report the 100 dB cap; near-identical ones
/// are clamped to it so the scale stays bounded.
pub fn psnr_u8(original: &[u8], recovered: &[u8]) -> Result<f64> {
    if original.is_empty() || original.len() != recovered.len() {
        return Err(Error::shape(
            "psnr",
            format!("{} vs {} samples", original.len(), recovered.len()),
        ));
    }
    let mut acc = 0.0;
    for (&a, &b) in original.iter().zip(recovered) {
        let d = a as f64 - b as f64;
        acc += d * d;
    }
    let mse = acc / original.len() as f64;
    if mse == 0.0 {
        return Ok(100.0);
    }
    Ok((10.0 * fmath::log10(255.0 * 255.0 / mse)).min(100.0))
}

/// (1/K) * sum_k conj(a_k) * b_k.
pub fn corr_complex(a: &[Complex64], b: &[Complex64]) -> Result<Complex64> {
    if a.is_empty() || a.len() != b.len() {
        return Err(Error::shape(
            "corr_complex",
            format!("{} vs {} symbols", a.len(), b.len()),
        ));
    }
    let mut acc = Complex64::default();
    for (x, y) in a.iter().zip(b) {
        acc += x.conj() * y;
    }
    Ok(acc / a.len() as f64)
}

/// (1/(2K)) * <a, b> over interleaved (re, im) rows. Kept as a plain real
/// dot product so its relation to `corr_complex` is a genuine cross-check,
/// not the same arithmetic twice.
pub fn corr_real(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.is_empty() || a.len() % 2 != 0 || a.len() != b.len() {
        return Err(Error::shape(
            "corr_real",
            format!("{} vs {} components (must match, even)", a.len(), b.len()),
        ));
    }
    let mut acc = 0.0;
    for (x, y) in a.iter().zip(b) {
        acc += x * y;
    }
    Ok(acc / a.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CorrelationKind {
    /// Pairwise complex correlations of symbol rows.
    Complex,
    /// Pairwise real correlations of interleaved rows.
    Real,
}

/// All N^2 pairwise correlations of one transmission's rows. Complex form
/// is Hermitian with per-row average power on the diagonal; real form is
/// symmetric.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationMatrix {
    n: usize,
    kind: CorrelationKind,
    values: Vec<Complex64>,
}

impl CorrelationMatrix {
    pub fn from_complex_rows(rows: &[Vec<Complex64>]) -> Result<Self> {
        let n = rows.len();
        if n == 0 {
            return Err(Error::contract("correlation matrix: no rows".into()));
        }
        let mut values = Vec::with_capacity(n * n);
        for a in rows {
            for b in rows {
                values.push(corr_complex(a, b)?);
            }
        }
        Ok(CorrelationMatrix { n, kind: CorrelationKind::Complex, values })
    }

    pub fn from_real_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        if n == 0 {
            return Err(Error::contract("correlation matrix: no rows".into()));
        }
        let mut values = Vec::with_capacity(n * n);
        for a in rows {
            for b in rows {
                values.push(Complex64::new(corr_real(a, b)?, 0.0));
            }
        }
        Ok(CorrelationMatrix { n, kind: CorrelationKind::Real, values })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn kind(&self) -> CorrelationKind {
        self.kind
    }

    pub fn value(&self, i: usize, j: usize) -> Complex64 {
        self.values[i * self.n + j]
    }

    /// Largest off-diagonal magnitude: how far the rows are from mutual
    /// orthogonality.
    pub fn max_cross_magnitude(&self) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..self.n {
            for j in 0..self.n {
                if i != j {
                    let v = self.value(i, j);
                    worst = worst.max(fmath::hypot(v.re, v.im));
                }
            }
        }
        worst
    }
}

/// Bandwidth cost of one EDP and the share each of N users pays when all
/// transmit together over the shared medium.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BandwidthMetrics {
    /// Real symbols per source pixel.
    pub spp: f64,
    /// Complex symbols per source pixel.
    pub cspp: f64,
    /// Complex symbols per pixel per user at full multiplexing.
    pub min_cspp: f64,
}

/// For the 8x-downsampling architecture with c feature channels:
/// spp = c/64, cspp = c/128, min_cspp = c/(128N).
pub fn bandwidth_metrics(c: usize, n: usize) -> Result<BandwidthMetrics> {
    if c == 0 || n == 0 {
        return Err(Error::contract(format!("bandwidth metrics: c={c}, n={n} must be positive")));
    }
    Ok(BandwidthMetrics {
        spp: c as f64 / 64.0,
        cspp: c as f64 / 128.0,
        min_cspp: c as f64 / (128.0 * n as f64),
    })
}

/// Arithmetic mean of dB values, matching how multi-user quality is
/// reported.
pub fn avg_psnr(psnrs_db: &[f64]) -> Result<f64> {
    if psnrs_db.is_empty() {
        return Err(Error::contract("average over no PSNR values".into()));
    }
    Ok(psnrs_db.iter().sum::<f64>() / psnrs_db.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use approx::assert_relative_eq;

    #[test]
    fn psnr_fixed_points() {
        let a = [10u8, 20, 30, 40];
        assert_eq!(psnr_u8(&a, &a).unwrap(), 100.0);
        // Every pixel off by one: MSE = 1.
        let b = [11u8, 21, 31, 41];
        assert_relative_eq!(psnr_u8(&a, &b).unwrap(), 48.1308036086791, max_relative = 1e-12);
        // MSE = 100.
        let c = [20u8, 30, 40, 50];
        assert_relative_eq!(psnr_u8(&a, &c).unwrap(), 28.130803608679106, max_relative = 1e-12);
        // Full-range error floors at 0 dB.
        let zeros = [0u8; 4];
        let maxed = [255u8; 4];
        assert_relative_eq!(psnr_u8(&zeros, &maxed).unwrap(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn psnr_decreases_with_mse() {
        let base = [100u8; 16];
        let mut last = f64::INFINITY;
        for step in 1..8 {
            let moved: Vec<u8> = base.iter().map(|&v| v + step * 10).collect();
            let p = psnr_u8(&base, &moved).unwrap();
            assert!(p < last, "psnr must fall as error grows");
            assert!(p >= 0.0);
            last = p;
        }
    }

    #[test]
    fn complex_correlation_of_self_is_power() {
        let z = vec![Complex64::new(1.0, 1.0), Complex64::new(-1.0, 1.0)];
        let r = corr_complex(&z, &z).unwrap();
        assert_eq!(r, Complex64::new(2.0, 0.0));
        let a = vec![Complex64::new(1.0, 2.0), Complex64::default()];
        let b = vec![Complex64::default(), Complex64::new(3.0, -1.0)];
        assert_eq!(corr_complex(&a, &b).unwrap(), Complex64::default());
    }

    #[test]
    fn correlation_matrix_is_hermitian_with_power_diagonal() {
        let rows = vec![
            vec![Complex64::new(0.3, -1.1), Complex64::new(0.7, 0.2)],
            vec![Complex64::new(-0.4, 0.9), Complex64::new(1.3, 0.6)],
        ];
        let m = CorrelationMatrix::from_complex_rows(&rows).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                assert_eq!(m.value(i, j), m.value(j, i).conj());
            }
            let power = rows[i].iter().map(|z| z.norm_sqr()).sum::<f64>() / 2.0;
            assert_relative_eq!(m.value(i, i).re, power, max_relative = 1e-12);
            assert_eq!(m.value(i, i).im, 0.0);
        }
        assert!(m.max_cross_magnitude() > 0.0);
    }

    #[test]
    fn real_and_complex_correlations_agree() {
        let a = vec![0.5, -1.0, 2.0, 0.25];
        let b = vec![1.5, 0.75, -0.5, 1.0];
        let az = crate::model::row_to_complex(&a);
        let bz = crate::model::row_to_complex(&b);
        let rz = corr_complex(&az, &bz).unwrap();
        let rv = corr_real(&a, &b).unwrap();
        assert_relative_eq!(rz.re, 2.0 * rv, max_relative = 1e-12);
    }

    #[test]
    fn bandwidth_identities() {
        let m = bandwidth_metrics(128, 2).unwrap();
        assert_eq!(m.cspp, 1.0);
        assert_eq!(m.min_cspp, 0.5);
        assert_eq!(m.spp, 2.0);
        let one = bandwidth_metrics(64, 1).unwrap();
        assert_eq!(one.spp, 1.0);
        for c in 1..=512 {
            for n in 1..=16 {
                let bm = bandwidth_metrics(c, n).unwrap();
                assert_eq!(bm.spp, 2.0 * bm.cspp, "c={}, n={}", c, n);
                assert_eq!(bm.min_cspp, bm.cspp / n as f64, "c={}, n={}", c, n);
            }
        }
        assert!(bandwidth_metrics(0, 1).is_err());
    }

    #[test]
    fn psnr_averaging_is_arithmetic_in_db() {
        assert_eq!(avg_psnr(&[31.5]).unwrap(), 31.5);
        assert_eq!(avg_psnr(&[30.0, 36.0]).unwrap(), 33.0);
        assert!(avg_psnr(&[]).is_err());
    }
}
