//! Style bridging: per-channel feature statistics recorded on one image and
//! imposed on another, plus a small fixed-weight encoder to exercise it.
//!
//! Statistics use the population variance over spatial positions. The
//! epsilon floor applies to the query deviation only, so applying an image's
//! own statistics returns the features unchanged.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::raster::Image;

pub const DEFAULT_EPS: f64 = 1e-5;

/// Channel-major `C x H x W` feature map.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureTensor {
    channels: usize,
    height: usize,
    width: usize,
    data: Vec<f64>,
}

impl FeatureTensor {
    pub fn new(channels: usize, height: usize, width: usize, data: Vec<f64>) -> Result<Self> {
        if channels == 0 || height == 0 || width == 0 {
            return Err(Error::Config("feature dimensions must be positive".into()));
        }
        if data.len() != channels * height * width {
            return Err(Error::Config(format!(
                "{channels}x{height}x{width} features need {} values, got {}",
                channels * height * width,
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::Config("feature values must be finite".into()));
        }
        Ok(Self {
            channels,
            height,
            width,
            data,
        })
    }

    fn zeros(channels: usize, height: usize, width: usize) -> Self {
        Self {
            channels,
            height,
            width,
            data: vec![0.0; channels * height * width],
        }
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        (self.channels, self.height, self.width)
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn channel(&self, c: usize) -> &[f64] {
        let n = self.height * self.width;
        &self.data[c * n..(c + 1) * n]
    }

    fn channel_mut(&mut self, c: usize) -> &mut [f64] {
        let n = self.height * self.width;
        &mut self.data[c * n..(c + 1) * n]
    }

    fn at(&self, c: usize, y: usize, x: usize) -> f64 {
        self.data[(c * self.height + y) * self.width + x]
    }

    /// Root-mean-square difference; shapes must match.
    pub fn rms_distance(&self, other: &FeatureTensor) -> Result<f64> {
        if self.shape() != other.shape() {
            return Err(Error::Config(format!(
                "feature shapes differ: {:?} vs {:?}",
                self.shape(),
                other.shape()
            )));
        }
        let ss: f64 = self.data.iter().zip(&other.data).map(|(a, b)| (a - b) * (a - b)).sum();
        Ok((ss / self.data.len() as f64).sqrt())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelStats {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl ChannelStats {
    pub fn channels(&self) -> usize {
        self.mean.len()
    }
}

pub fn capture_stats(z: &FeatureTensor) -> ChannelStats {
    let n = (z.height * z.width) as f64;
    let (mut mean, mut std) = (Vec::with_capacity(z.channels), Vec::with_capacity(z.channels));
    for c in 0..z.channels {
        let xs = z.channel(c);
        let mu = xs.iter().sum::<f64>() / n;
        let var = xs.iter().map(|x| (x - mu) * (x - mu)).sum::<f64>() / n;
        mean.push(mu);
        std.push(var.sqrt());
    }
    ChannelStats { mean, std }
}

/// Renormalizes every channel of `z` to the reference mean and deviation.
pub fn apply_stats(z: &FeatureTensor, reference: &ChannelStats, eps: f64) -> Result<FeatureTensor> {
    if reference.channels() != z.channels || reference.std.len() != z.channels {
        return Err(Error::ChannelMismatch {
            expected: z.channels,
            found: reference.channels(),
        });
    }
    let own = capture_stats(z);
    let mut out = z.clone();
    for c in 0..z.channels {
        let scale = reference.std[c] / own.std[c].max(eps);
        let (mu_q, mu_r) = (own.mean[c], reference.mean[c]);
        for v in out.channel_mut(c) {
            *v = scale * (*v - mu_q) + mu_r;
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy)]
pub enum SblMode<'a> {
    /// Record statistics at every slot; features pass through unchanged.
    Record,
    /// Impose saved statistics at the first `sbl_count` slots.
    Apply(&'a [ChannelStats]),
}

#[derive(Debug, Clone, PartialEq)]
pub struct EncoderOutput {
    /// Output of each layer.
    pub features: Vec<FeatureTensor>,
    /// Statistics seen at each bridging slot, before any substitution.
    pub stats: Vec<ChannelStats>,
}

#[derive(Debug, Clone)]
struct Conv {
    in_ch: usize,
    out_ch: usize,
    weights: Vec<f64>, // out x in x 3 x 3
    bias: Vec<f64>,
}

impl Conv {
    fn random(rng: &mut ChaCha8Rng, in_ch: usize, out_ch: usize) -> Self {
        let scale = 1.0 / ((in_ch * 9) as f64).sqrt();
        Self {
            in_ch,
            out_ch,
            weights: (0..out_ch * in_ch * 9).map(|_| rng.gen_range(-1.0..1.0) * scale).collect(),
            bias: (0..out_ch).map(|_| rng.gen_range(-0.1..0.1)).collect(),
        }
    }

    /// 3x3 convolution, stride 1, zero padding.
    fn forward(&self, x: &FeatureTensor) -> FeatureTensor {
        debug_assert_eq!(x.channels, self.in_ch);
        let (h, w) = (x.height, x.width);
        let mut out = FeatureTensor::zeros(self.out_ch, h, w);
        for o in 0..self.out_ch {
            for y in 0..h {
                for xx in 0..w {
                    let mut acc = self.bias[o];
                    for i in 0..self.in_ch {
                        let k = &self.weights[(o * self.in_ch + i) * 9..][..9];
                        for dy in 0..3 {
                            let sy = y as isize + dy as isize - 1;
                            if sy < 0 || sy >= h as isize {
                                continue;
                            }
                            for dx in 0..3 {
                                let sx = xx as isize + dx as isize - 1;
                                if sx < 0 || sx >= w as isize {
                                    continue;
                                }
                                acc += k[dy * 3 + dx] * x.at(i, sy as usize, sx as usize);
                            }
                        }
                    }
                    out.data[(o * h + y) * w + xx] = acc;
                }
            }
        }
        out
    }
}

fn relu(mut x: FeatureTensor) -> FeatureTensor {
    x.data.iter_mut().for_each(|v| *v = v.max(0.0));
    x
}

/// 2x2 average pooling; odd trailing rows/columns are dropped.
fn avg_pool(x: &FeatureTensor) -> FeatureTensor {
    let (h, w) = (x.height / 2, x.width / 2);
    let mut out = FeatureTensor::zeros(x.channels, h, w);
    for c in 0..x.channels {
        for y in 0..h {
            for xx in 0..w {
                let s = x.at(c, 2 * y, 2 * xx)
                    + x.at(c, 2 * y + 1, 2 * xx)
                    + x.at(c, 2 * y, 2 * xx + 1)
                    + x.at(c, 2 * y + 1, 2 * xx + 1);
                out.data[(c * h + y) * w + xx] = s / 4.0;
            }
        }
    }
    out
}

/// Stem convolution followed by residual blocks, with a bridging slot after
/// the stem convolution and after each block's residual addition.
#[derive(Debug, Clone)]
pub struct ToyEncoder {
    stem: Conv,
    blocks: Vec<(Conv, Conv)>,
    eps: f64,
}

impl ToyEncoder {
    pub const CHANNELS: usize = 8;
    const SEED: u64 = 0x5b1_0001;

    pub fn new(layers: usize) -> Result<Self> {
        if layers == 0 {
            return Err(Error::Config("encoder needs at least one layer".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(Self::SEED);
        let c = Self::CHANNELS;
        let stem = Conv::random(&mut rng, 1, c);
        let blocks = (1..layers)
            .map(|_| (Conv::random(&mut rng, c, c), Conv::random(&mut rng, c, c)))
            .collect();
        Ok(Self {
            stem,
            blocks,
            eps: DEFAULT_EPS,
        })
    }

    pub fn layers(&self) -> usize {
        self.blocks.len() + 1
    }

    pub fn encode(&self, image: &Image, sbl_count: usize, mode: SblMode<'_>) -> Result<EncoderOutput> {
        if sbl_count > self.layers() {
            return Err(Error::Config(format!(
                "{sbl_count} bridging layers requested for a {}-layer encoder",
                self.layers()
            )));
        }
        if let SblMode::Apply(saved) = mode {
            if saved.len() < sbl_count {
                return Err(Error::Config(format!(
                    "{} saved statistics for {sbl_count} bridging layers",
                    saved.len()
                )));
            }
        }
        let input = FeatureTensor {
            channels: 1,
            height: image.height as usize,
            width: image.width as usize,
            data: image.pixels.iter().map(|&v| f64::from(v) / 65535.0).collect(),
        };
        let mut features = Vec::with_capacity(self.layers());
        let mut stats = Vec::with_capacity(self.layers());
        let bridge = |slot: usize, z: FeatureTensor, stats: &mut Vec<ChannelStats>| -> Result<FeatureTensor> {
            stats.push(capture_stats(&z));
            match mode {
                SblMode::Apply(saved) if slot < sbl_count => apply_stats(&z, &saved[slot], self.eps),
                _ => Ok(z),
            }
        };

        let mut x = relu(bridge(0, self.stem.forward(&input), &mut stats)?);
        features.push(x.clone());
        for (k, (a, b)) in self.blocks.iter().enumerate() {
            if x.height >= 8 && x.width >= 8 {
                x = avg_pool(&x);
            }
            let mut y = b.forward(&relu(a.forward(&x)));
            y.data.iter_mut().zip(&x.data).for_each(|(v, s)| *v += s);
            x = relu(bridge(k + 1, y, &mut stats)?);
            features.push(x.clone());
        }
        Ok(EncoderOutput { features, stats })
    }
}

/// Final-layer RMS distance between `reference` and `query` features, with
/// bridging applied at the first `k` slots, for `k = 0..=layers`.
pub fn style_gap_table(encoder: &ToyEncoder, reference: &Image, query: &Image) -> Result<Vec<(usize, f64)>> {
    let rec = encoder.encode(reference, 0, SblMode::Record)?;
    let target = rec.features.last().expect("at least one layer");
    (0..=encoder.layers())
        .map(|k| {
            let q = encoder.encode(query, k, SblMode::Apply(&rec.stats))?;
            Ok((k, q.features.last().expect("at least one layer").rms_distance(target)?))
        })
        .collect()
}

/// Deterministic textured test image: smooth gradients plus a few blocks.
pub fn demo_image(width: u32, height: u32) -> Image {
    let mut px = Vec::with_capacity((width * height) as usize);
    for y in 0..height {
        for x in 0..width {
            let (fx, fy) = (f64::from(x) / f64::from(width), f64::from(y) / f64::from(height));
            let mut v = 0.25 + 0.2 * (6.0 * fx).sin() * (4.0 * fy).cos() + 0.15 * fy;
            if (x / 6 + y / 5) % 3 == 0 {
                v += 0.25;
            }
            if x > width / 2 && y > height / 3 && y < 2 * height / 3 {
                v -= 0.15;
            }
            px.push((v.clamp(0.0, 1.0) * 65535.0).round() as u16);
        }
    }
    Image {
        width,
        height,
        pixels: px,
    }
}

/// Per-pixel affine intensity change on normalized values, rounded back.
pub fn affine_style(img: &Image, gain: f64, bias: f64) -> Image {
    Image {
        width: img.width,
        height: img.height,
        pixels: img
            .pixels
            .iter()
            .map(|&v| ((gain * f64::from(v) / 65535.0 + bias).clamp(0.0, 1.0) * 65535.0).round() as u16)
            .collect(),
    }
}
