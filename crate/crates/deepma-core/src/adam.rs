//! Adam optimizer over a flat list of parameter tensors.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::fmath;
use crate::tensor::Tensor;

const BETA1: f64 = 0.9;
const BETA2: f64 = 0.999;
const EPS: f64 = 1e-8;

/// First/second moment estimates plus the step counter. One moment buffer
/// per parameter tensor, in the same order as the parameter list.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    t: u64,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl AdamState {
    pub fn new(sizes: &[usize]) -> Self {
        AdamState {
            t: 0,
            m: sizes.iter().map(|&n| vec![0.0; n]).collect(),
            v: sizes.iter().map(|&n| vec![0.0; n]).collect(),
        }
    }

    pub fn steps(&self) -> u64 {
        self.t
    }

    /// One update: theta -= lr * mhat / (sqrt(vhat) + eps), with bias
    /// correction of both moments. `grads[i]` pairs with `params[i]`.
    pub fn step(&mut self, params: &mut [Tensor], grads: &[&Tensor], lr: f64) -> Result<()> {
        if params.len() != self.m.len() || grads.len() != self.m.len() {
            return Err(Error::contract(format!(
                "adam: {} params / {} grads vs state for {} tensors",
                params.len(),
                grads.len(),
                self.m.len()
            )));
        }
        self.t += 1;
        let c1 = 1.0 - fmath::powi(BETA1, self.t);
        let c2 = 1.0 - fmath::powi(BETA2, self.t);
        for i in 0..params.len() {
            if params[i].len() != self.m[i].len() || grads[i].len() != self.m[i].len() {
                return Err(Error::contract(format!(
                    "adam: tensor {} has {} elements, state expects {}",
                    i,
                    params[i].len(),
                    self.m[i].len()
                )));
            }
            let (m, v) = (&mut self.m[i], &mut self.v[i]);
            let gs = grads[i].data();
            for (j, p) in params[i].data_mut().iter_mut().enumerate() {
                let g = gs[j];
                m[j] = BETA1 * m[j] + (1.0 - BETA1) * g;
                v[j] = BETA2 * v[j] + (1.0 - BETA2) * g * g;
                let mhat = m[j] / c1;
                let vhat = v[j] / c2;
                *p -= lr * mhat / (fmath::sqrt(vhat) + EPS);
            }
        }
        Ok(())
    }

    pub fn to_bytes(&self, out: &mut Vec<u8>) {
        out.extend_from_slice(&self.t.to_le_bytes());
        out.extend_from_slice(&(self.m.len() as u32).to_le_bytes());
        for buf in self.m.iter().chain(self.v.iter()) {
            out.extend_from_slice(&(buf.len() as u32).to_le_bytes());
            for v in buf {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
    }

    pub fn from_bytes(bytes: &[u8], cursor: &mut usize) -> Result<Self> {
        let t = read_u64(bytes, cursor)?;
        let n = read_u32(bytes, cursor)? as usize;
        let mut bufs = Vec::with_capacity(2 * n);
        for _ in 0..2 * n {
            let len = read_u32(bytes, cursor)? as usize;
            let mut buf = Vec::with_capacity(len);
            for _ in 0..len {
                buf.push(f64::from_le_bytes(read_array(bytes, cursor)?));
            }
            bufs.push(buf);
        }
        let v = bufs.split_off(n);
        Ok(AdamState { t, m: bufs, v })
    }
}

fn read_array<const N: usize>(bytes: &[u8], cursor: &mut usize) -> Result<[u8; N]> {
    let end = cursor.checked_add(N).filter(|&e| e <= bytes.len()).ok_or(Error::Format {
        offset: *cursor,
        detail: "truncated optimizer state",
    })?;
    let mut out = [0u8; N];
    out.copy_from_slice(&bytes[*cursor..end]);
    *cursor = end;
    Ok(out)
}

fn read_u32(bytes: &[u8], cursor: &mut usize) -> Result<u32> {
    Ok(u32::from_le_bytes(read_array(bytes, cursor)?))
}

fn read_u64(bytes: &[u8], cursor: &mut usize) -> Result<u64> {
    Ok(u64::from_le_bytes(read_array(bytes, cursor)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn matches_reference_trajectory_on_constant_gradient() {
        // lr=0.1, g=1 every step, theta0=0.
        let mut params = [Tensor::zeros(vec![1])];
        let grad = Tensor::full(vec![1], 1.0);
        let mut adam = AdamState::new(&[1]);
        let expect = [
            -0.09999999900000009,
            -0.19999999799999946,
            -0.2999999969999995,
        ];
        for want in expect {
            adam.step(&mut params, &[&grad], 0.1).unwrap();
            assert_relative_eq!(params[0].data()[0], want, max_relative = 1e-14);
        }
        assert_eq!(adam.steps(), 3);
    }

    #[test]
    fn zero_learning_rate_leaves_params_fixed() {
        let mut params = [Tensor::full(vec![3], 0.7)];
        let grad = Tensor::full(vec![3], -2.5);
        let mut adam = AdamState::new(&[3]);
        adam.step(&mut params, &[&grad], 0.0).unwrap();
        assert!(params[0].data().iter().all(|&v| v == 0.7));
        // Moments still advance, so a later nonzero step differs from a
        // fresh optimizer; the counter records that.
        assert_eq!(adam.steps(), 1);
    }

    #[test]
    fn state_roundtrips_through_bytes() {
        let mut params = [Tensor::full(vec![2], 0.1), Tensor::zeros(vec![3])];
        let g0 = Tensor::full(vec![2], 0.3);
        let g1 = Tensor::full(vec![3], -0.2);
        let mut adam = AdamState::new(&[2, 3]);
        adam.step(&mut params, &[&g0, &g1], 0.01).unwrap();
        adam.step(&mut params, &[&g0, &g1], 0.01).unwrap();
        let mut bytes = Vec::new();
        adam.to_bytes(&mut bytes);
        let mut cursor = 0;
        let back = AdamState::from_bytes(&bytes, &mut cursor).unwrap();
        assert_eq!(cursor, bytes.len());
        assert_eq!(back, adam);
    }

    #[test]
    fn truncated_state_is_rejected() {
        let mut adam = AdamState::new(&[4]);
        let mut params = [Tensor::zeros(vec![4])];
        let g = Tensor::full(vec![4], 1.0);
        adam.step(&mut params, &[&g], 0.1).unwrap();
        let mut bytes = Vec::new();
        adam.to_bytes(&mut bytes);
        bytes.truncate(bytes.len() - 3);
        let mut cursor = 0;
        assert!(matches!(
            AdamState::from_bytes(&bytes, &mut cursor),
            Err(Error::Format { .. })
        ));
    }

    #[test]
    fn size_mismatch_is_rejected() {
        let mut adam = AdamState::new(&[2]);
        let mut params = [Tensor::zeros(vec![3])];
        let g = Tensor::zeros(vec![3]);
        assert!(adam.step(&mut params, &[&g], 0.1).is_err());
    }
}
