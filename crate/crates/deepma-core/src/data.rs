//! Image sets: binary dataset record parsing, synthetic generation,
//! normalization, and cropping. File IO stays in the companion crate; this
//! module works on bytes and tensors only.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::error::{Error, Result};
use crate::fmath;
use crate::rng::{self, Purpose};
use crate::tensor::Tensor;

const CHANNELS: usize = 3;

/// A stack of same-size 8-bit RGB images, stored plane-major per image.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ImageSet {
    data: Vec<u8>,
    labels: Option<Vec<u8>>,
    count: usize,
    h: usize,
    w: usize,
    source: String,
}

/// Families of generated images.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SyntheticKind {
    /// Uniform pixel noise; no structure to learn.
    Noise,
    /// Linear per-channel ramps with random slope and offset.
    Gradients,
    /// Bright rectangles and discs on a dark background. The default
    /// training family: enough shared structure for encoders to exploit,
    /// while the per-image layout still has to be transmitted.
    Shapes,
}

impl ImageSet {
    pub fn new(
        data: Vec<u8>,
        labels: Option<Vec<u8>>,
        h: usize,
        w: usize,
        source: String,
    ) -> Result<Self> {
        if h == 0 || w == 0 {
            return Err(Error::contract(format!("image set: degenerate size {h}x{w}")));
        }
        let per = CHANNELS * h * w;
        if data.len() % per != 0 {
            return Err(Error::contract(format!(
                "image set: {} bytes does not tile into {}-byte images",
                data.len(),
                per
            )));
        }
        let count = data.len() / per;
        if let Some(l) = &labels {
            if l.len() != count {
                return Err(Error::contract(format!(
                    "image set: {} labels for {} images",
                    l.len(),
                    count
                )));
            }
        }
        Ok(ImageSet { data, labels, count, h, w, source })
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn height(&self) -> usize {
        self.h
    }

    pub fn width(&self) -> usize {
        self.w
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn labels(&self) -> Option<&[u8]> {
        self.labels.as_deref()
    }

    /// Plane-major RGB bytes of image `i`.
    pub fn image(&self, i: usize) -> &[u8] {
        let per = CHANNELS * self.h * self.w;
        &self.data[i * per..(i + 1) * per]
    }

    /// Parses records of one leading label byte followed by 3072 plane-major
    /// pixels (32x32 RGB).
    pub fn from_cifar10_bytes(bytes: &[u8], source: &str) -> Result<Self> {
        Self::from_labeled_records(bytes, source, 1, 0)
    }

    /// Parses records of coarse+fine label bytes followed by 3072 pixels;
    /// the fine label is kept.
    pub fn from_cifar100_bytes(bytes: &[u8], source: &str) -> Result<Self> {
        Self::from_labeled_records(bytes, source, 2, 1)
    }

    fn from_labeled_records(
        bytes: &[u8],
        source: &str,
        label_bytes: usize,
        keep_label: usize,
    ) -> Result<Self> {
        const SIDE: usize = 32;
        let pixels = CHANNELS * SIDE * SIDE;
        let record = label_bytes + pixels;
        if bytes.is_empty() || bytes.len() % record != 0 {
            return Err(Error::Format {
                offset: bytes.len() - bytes.len() % record,
                detail: "dataset size is not a whole number of records",
            });
        }
        let count = bytes.len() / record;
        let mut data = Vec::with_capacity(count * pixels);
        let mut labels = Vec::with_capacity(count);
        for rec in bytes.chunks_exact(record) {
            labels.push(rec[keep_label]);
            data.extend_from_slice(&rec[label_bytes..]);
        }
        ImageSet::new(data, Some(labels), SIDE, SIDE, String::from(source))
    }

    /// Generates `n` images deterministically: image `i` draws only from
    /// stream `i` of `seed`, so subsets reproduce regardless of `n`.
    pub fn synthetic(n: usize, h: usize, w: usize, seed: u64, kind: SyntheticKind) -> Result<Self> {
        if h == 0 || w == 0 {
            return Err(Error::contract(format!("synthetic images: degenerate size {h}x{w}")));
        }
        let per = CHANNELS * h * w;
        let mut data = vec![0u8; n * per];
        for i in 0..n {
            let mut rng = rng::stream(seed, Purpose::DataGen, i as u64);
            let img = &mut data[i * per..(i + 1) * per];
            match kind {
                SyntheticKind::Noise => {
                    for v in img.iter_mut() {
                        *v = rng.gen();
                    }
                }
                SyntheticKind::Gradients => {
                    for c in 0..CHANNELS {
                        let base: i32 = rng.gen_range(0..256);
                        let sx: i32 = rng.gen_range(-8..=8);
                        let sy: i32 = rng.gen_range(-8..=8);
                        let plane = &mut img[c * h * w..(c + 1) * h * w];
                        for y in 0..h {
                            for x in 0..w {
                                let v = base + sx * x as i32 + sy * y as i32;
                                plane[y * w + x] = v.clamp(0, 255) as u8;
                            }
                        }
                    }
                }
                SyntheticKind::Shapes => draw_shapes(&mut rng, h, w, img),
            }
        }
        ImageSet::new(data, None, h, w, format!("synthetic:{}", kind_name(kind)))
    }

    /// Centered window of side `size`; odd margins leave the extra pixel on
    /// the right/bottom.
    pub fn center_crop(&self, size: usize) -> Result<ImageSet> {
        if size == 0 || size > self.h || size > self.w {
            return Err(Error::contract(format!(
                "crop {size} from {}x{} images",
                self.h, self.w
            )));
        }
        let (top, left) = ((self.h - size) / 2, (self.w - size) / 2);
        let mut data = Vec::with_capacity(self.count * CHANNELS * size * size);
        for i in 0..self.count {
            let img = self.image(i);
            for c in 0..CHANNELS {
                let plane = &img[c * self.h * self.w..];
                for y in 0..size {
                    let row = (top + y) * self.w + left;
                    data.extend_from_slice(&plane[row..row + size]);
                }
            }
        }
        ImageSet::new(data, self.labels.clone(), size, size, self.source.clone())
    }

    /// Gathers the indexed images as one [B, 3, H, W] batch scaled to
    /// [0, 1] (v = p/255).
    pub fn batch(&self, indices: &[usize]) -> Result<Tensor> {
        if indices.is_empty() {
            return Err(Error::contract("empty batch".into()));
        }
        let per = CHANNELS * self.h * self.w;
        let mut out = Tensor::zeros(vec![indices.len(), CHANNELS, self.h, self.w]);
        for (slot, &idx) in indices.iter().enumerate() {
            if idx >= self.count {
                return Err(Error::contract(format!(
                    "image index {idx} out of range for {} images",
                    self.count
                )));
            }
            let img = self.image(idx);
            for (o, &p) in out.data_mut()[slot * per..(slot + 1) * per].iter_mut().zip(img) {
                *o = p as f64 / 255.0;
            }
        }
        Ok(out)
    }
}

fn kind_name(kind: SyntheticKind) -> &'static str {
    match kind {
        SyntheticKind::Noise => "noise",
        SyntheticKind::Gradients => "gradients",
        SyntheticKind::Shapes => "shapes",
    }
}

fn draw_shapes<R: Rng>(rng: &mut R, h: usize, w: usize, img: &mut [u8]) {
    let plane = h * w;
    // Dark background keeps the image mean low and uninformative, so a
    // decoder that ignores its input cannot score well.
    for c in 0..CHANNELS {
        let bg: u8 = rng.gen_range(0..32);
        img[c * plane..(c + 1) * plane].fill(bg);
    }
    let m = h.min(w);
    let r_lo = (m / 8).max(1);
    let r_hi = (m / 3).max(r_lo + 1);
    let shapes = rng.gen_range(2..=4usize);
    for _ in 0..shapes {
        let disc: bool = rng.gen();
        let cx = rng.gen_range(0..w) as i64;
        let cy = rng.gen_range(0..h) as i64;
        let r = rng.gen_range(r_lo..=r_hi) as i64;
        let color: [u8; 3] = [
            rng.gen_range(96..=255),
            rng.gen_range(96..=255),
            rng.gen_range(96..=255),
        ];
        for y in (cy - r).max(0)..(cy + r + 1).min(h as i64) {
            for x in (cx - r).max(0)..(cx + r + 1).min(w as i64) {
                let (dx, dy) = (x - cx, y - cy);
                if disc && dx * dx + dy * dy > r * r {
                    continue;
                }
                let at = y as usize * w + x as usize;
                for c in 0..CHANNELS {
                    img[c * plane + at] = color[c];
                }
            }
        }
    }
}

/// Quantizes a [0, 1] tensor back to 8-bit: p = round(255 * clamp(v, 0, 1)),
/// halves rounding up.
pub fn denormalize(t: &Tensor) -> Vec<u8> {
    t.iter().map(|&v| fmath::round(255.0 * v.clamp(0.0, 1.0)) as u8).collect()
}
