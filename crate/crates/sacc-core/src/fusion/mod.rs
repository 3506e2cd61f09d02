//! Fusion geometry of the counting architecture: Interpolation-Down/Up,
//! synthetic scale fusion, intra-block fusion, channel-split blocks, and a
//! static parameter/MAC analyzer over declarative layer graphs.
//!
//! All runtime ops here are linear in their inputs for fixed weights (no
//! bias, no activation), so superposition holds exactly; desk-scale runs
//! use seeded random weights and never train.

pub mod graph;

pub use graph::{count_params_macs, layer_table, parse_graph, LayerKind, LayerReport, LayerSpec};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Nominal scale label of a feature layer as a reduced fraction of the full
/// input resolution. The fusion ladder uses nominal labels: pooling halves
/// the label, Interpolation-Down maps `s` to `2s/3` (dims shrink by 3/4),
/// and Interpolation-Up maps `s` to `4s/3` (dims grow by 3/2).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ScaleTag {
    num: u32,
    den: u32,
}

impl ScaleTag {
    pub fn new(num: u32, den: u32) -> Result<Self> {
        if num == 0 || den == 0 {
            return Err(Error::InvalidParameter(
                "scale tag numerator and denominator must be positive".into(),
            ));
        }
        let g = gcd(num, den);
        Ok(Self {
            num: num / g,
            den: den / g,
        })
    }

    pub const FULL: ScaleTag = ScaleTag { num: 1, den: 1 };

    pub fn num(&self) -> u32 {
        self.num
    }

    pub fn den(&self) -> u32 {
        self.den
    }

    pub fn halved(&self) -> ScaleTag {
        Self::new(self.num, self.den.saturating_mul(2)).expect("halving a valid tag")
    }

    fn times(&self, n: u32, d: u32) -> ScaleTag {
        Self::new(self.num * n, self.den * d).expect("scaling a valid tag")
    }

    /// Label after Interpolation-Down.
    pub fn interp_down(&self) -> ScaleTag {
        self.times(2, 3)
    }

    /// Label after Interpolation-Up.
    pub fn interp_up(&self) -> ScaleTag {
        self.times(4, 3)
    }
}

impl std::fmt::Display for ScaleTag {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}/{}", self.num, self.den)
    }
}

impl PartialOrd for ScaleTag {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for ScaleTag {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        // descending resolution first (1/2 before 1/3 before 1/4 ...)
        let lhs = (self.num as u64) * (other.den as u64);
        let rhs = (other.num as u64) * (self.den as u64);
        rhs.cmp(&lhs)
    }
}

/// A C x W x H feature array with a nominal scale label. Data is stored
/// channel-major, then rows: `data[(c * height + y) * width + x]`.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureTensor {
    pub channels: usize,
    pub width: usize,
    pub height: usize,
    pub data: Vec<f64>,
    pub scale_tag: ScaleTag,
}

impl FeatureTensor {
    pub fn zeros(channels: usize, width: usize, height: usize, scale_tag: ScaleTag) -> Self {
        Self {
            channels,
            width,
            height,
            data: vec![0.0; channels * width * height],
            scale_tag,
        }
    }

    pub fn from_data(
        channels: usize,
        width: usize,
        height: usize,
        data: Vec<f64>,
        scale_tag: ScaleTag,
    ) -> Result<Self> {
        if data.len() != channels * width * height {
            return Err(Error::ShapeMismatch(format!(
                "data length {} does not match {channels}x{width}x{height}",
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::ShapeMismatch("tensor holds non-finite values".into()));
        }
        Ok(Self {
            channels,
            width,
            height,
            data,
            scale_tag,
        })
    }

    pub fn constant(channels: usize, width: usize, height: usize, value: f64, tag: ScaleTag) -> Self {
        Self {
            channels,
            width,
            height,
            data: vec![value; channels * width * height],
            scale_tag: tag,
        }
    }

    pub fn seeded_uniform(
        channels: usize,
        width: usize,
        height: usize,
        tag: ScaleTag,
        seed: u64,
    ) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Self {
            channels,
            width,
            height,
            data: (0..channels * width * height)
                .map(|_| rng.gen_range(-1.0..1.0))
                .collect(),
            scale_tag: tag,
        }
    }

    #[inline]
    pub fn at(&self, c: usize, x: usize, y: usize) -> f64 {
        self.data[(c * self.height + y) * self.width + x]
    }

    #[inline]
    fn at_mut(&mut self, c: usize, x: usize, y: usize) -> &mut f64 {
        &mut self.data[(c * self.height + y) * self.width + x]
    }
}

/// One 2x2 kernel per channel (depthwise), as used by the interpolation
/// ops. Row-major: `k[dy][dx]`.
#[derive(Debug, Clone, PartialEq)]
pub struct DepthwiseKernel2x2 {
    kernels: Vec<[[f64; 2]; 2]>,
}

impl DepthwiseKernel2x2 {
    pub fn new(kernels: Vec<[[f64; 2]; 2]>) -> Self {
        Self { kernels }
    }

    /// The same kernel replicated over `channels`.
    pub fn uniform(channels: usize, kernel: [[f64; 2]; 2]) -> Self {
        Self {
            kernels: vec![kernel; channels],
        }
    }

    pub fn averaging(channels: usize) -> Self {
        Self::uniform(channels, [[0.25, 0.25], [0.25, 0.25]])
    }

    pub fn seeded(channels: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Self {
            kernels: (0..channels)
                .map(|_| {
                    let mut k = [[0.0; 2]; 2];
                    for row in &mut k {
                        for v in row.iter_mut() {
                            *v = rng.gen_range(-0.1..0.1);
                        }
                    }
                    k
                })
                .collect(),
        }
    }

    pub fn channels(&self) -> usize {
        self.kernels.len()
    }
}

/// Dense 1x1 convolution weights `[out][in]`, no bias.
#[derive(Debug, Clone, PartialEq)]
pub struct Conv1x1 {
    pub weight: Vec<Vec<f64>>,
}

impl Conv1x1 {
    pub fn identity(channels: usize) -> Self {
        Self {
            weight: (0..channels)
                .map(|o| (0..channels).map(|i| if i == o { 1.0 } else { 0.0 }).collect())
                .collect(),
        }
    }

    pub fn seeded(in_channels: usize, out_channels: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Self {
            weight: (0..out_channels)
                .map(|_| (0..in_channels).map(|_| rng.gen_range(-0.1..0.1)).collect())
                .collect(),
        }
    }

    pub fn zeros(in_channels: usize, out_channels: usize) -> Self {
        Self {
            weight: vec![vec![0.0; in_channels]; out_channels],
        }
    }

    pub fn out_channels(&self) -> usize {
        self.weight.len()
    }

    pub fn in_channels(&self) -> usize {
        self.weight.first().map_or(0, Vec::len)
    }

    fn apply(&self, t: &FeatureTensor) -> Result<FeatureTensor> {
        if t.channels != self.in_channels() {
            return Err(Error::ShapeMismatch(format!(
                "1x1 conv expects {} channels, tensor has {}",
                self.in_channels(),
                t.channels
            )));
        }
        let mut out = FeatureTensor::zeros(self.out_channels(), t.width, t.height, t.scale_tag);
        for (o, row) in self.weight.iter().enumerate() {
            for (i, &w) in row.iter().enumerate() {
                if w == 0.0 {
                    continue;
                }
                for y in 0..t.height {
                    for x in 0..t.width {
                        *out.at_mut(o, x, y) += w * t.at(i, x, y);
                    }
                }
            }
        }
        Ok(out)
    }
}

/// Dense 3x3 convolution weights `[out][in][ky][kx]`, padding 1, stride 1,
/// no bias, so spatial dimensions are preserved.
#[derive(Debug, Clone, PartialEq)]
pub struct Conv3x3 {
    pub weight: Vec<Vec<[[f64; 3]; 3]>>,
}

impl Conv3x3 {
    pub fn seeded(in_channels: usize, out_channels: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Self {
            weight: (0..out_channels)
                .map(|_| {
                    (0..in_channels)
                        .map(|_| {
                            let mut k = [[0.0; 3]; 3];
                            for row in &mut k {
                                for v in row.iter_mut() {
                                    *v = rng.gen_range(-0.1..0.1);
                                }
                            }
                            k
                        })
                        .collect()
                })
                .collect(),
        }
    }

    pub fn zeros(in_channels: usize, out_channels: usize) -> Self {
        Self {
            weight: vec![vec![[[0.0; 3]; 3]; in_channels]; out_channels],
        }
    }

    pub fn out_channels(&self) -> usize {
        self.weight.len()
    }

    pub fn in_channels(&self) -> usize {
        self.weight.first().map_or(0, Vec::len)
    }

    fn apply(&self, t: &FeatureTensor) -> Result<FeatureTensor> {
        if t.channels != self.in_channels() {
            return Err(Error::ShapeMismatch(format!(
                "3x3 conv expects {} channels, tensor has {}",
                self.in_channels(),
                t.channels
            )));
        }
        let mut out = FeatureTensor::zeros(self.out_channels(), t.width, t.height, t.scale_tag);
        for (o, ins) in self.weight.iter().enumerate() {
            for (i, k) in ins.iter().enumerate() {
                for y in 0..t.height {
                    for x in 0..t.width {
                        let mut acc = 0.0;
                        for (ky, krow) in k.iter().enumerate() {
                            for (kx, &w) in krow.iter().enumerate() {
                                let sx = x as isize + kx as isize - 1;
                                let sy = y as isize + ky as isize - 1;
                                if sx < 0
                                    || sy < 0
                                    || sx >= t.width as isize
                                    || sy >= t.height as isize
                                {
                                    continue;
                                }
                                acc += w * t.at(i, sx as usize, sy as usize);
                            }
                        }
                        *out.at_mut(o, x, y) += acc;
                    }
                }
            }
        }
        Ok(out)
    }
}

fn check_divisible(op: &'static str, dim: &'static str, value: usize, divisor: usize) -> Result<()> {
    if value % divisor != 0 {
        return Err(Error::DimensionNotDivisible {
            op,
            dim,
            value,
            divisor,
        });
    }
    Ok(())
}

/// Interpolation-Down: each 4x4 patch is reduced to 3x3 by a depthwise 2x2
/// stride-1 convolution, shrinking `C x 4W x 4H` to `C x 3W x 3H`.
pub fn interpolation_down(t: &FeatureTensor, weights: &DepthwiseKernel2x2) -> Result<FeatureTensor> {
    check_divisible("interpolation-down", "width", t.width, 4)?;
    check_divisible("interpolation-down", "height", t.height, 4)?;
    if weights.channels() != t.channels {
        return Err(Error::ShapeMismatch(format!(
            "kernel has {} channels, tensor has {}",
            weights.channels(),
            t.channels
        )));
    }
    let ow = t.width / 4 * 3;
    let oh = t.height / 4 * 3;
    let mut out = FeatureTensor::zeros(t.channels, ow, oh, t.scale_tag.interp_down());
    for (c, k) in weights.kernels.iter().enumerate() {
        for py in 0..t.height / 4 {
            for px in 0..t.width / 4 {
                for j in 0..3 {
                    for i in 0..3 {
                        let mut acc = 0.0;
                        for (dy, krow) in k.iter().enumerate() {
                            for (dx, &w) in krow.iter().enumerate() {
                                acc += w * t.at(c, px * 4 + i + dx, py * 4 + j + dy);
                            }
                        }
                        *out.at_mut(c, px * 3 + i, py * 3 + j) = acc;
                    }
                }
            }
        }
    }
    Ok(out)
}

/// Interpolation-Up: each 2x2 patch is replicated (nearest neighbor) to
/// 4x4, then reduced to 3x3 by a depthwise 2x2 stride-1 convolution,
/// growing `C x 2W x 2H` to `C x 3W x 3H`.
pub fn interpolation_up(t: &FeatureTensor, weights: &DepthwiseKernel2x2) -> Result<FeatureTensor> {
    check_divisible("interpolation-up", "width", t.width, 2)?;
    check_divisible("interpolation-up", "height", t.height, 2)?;
    if weights.channels() != t.channels {
        return Err(Error::ShapeMismatch(format!(
            "kernel has {} channels, tensor has {}",
            weights.channels(),
            t.channels
        )));
    }
    let ow = t.width / 2 * 3;
    let oh = t.height / 2 * 3;
    let mut out = FeatureTensor::zeros(t.channels, ow, oh, t.scale_tag.interp_up());
    for (c, k) in weights.kernels.iter().enumerate() {
        for py in 0..t.height / 2 {
            for px in 0..t.width / 2 {
                // nearest-neighbor 4x4 expansion of the 2x2 patch
                let patch = |ux: usize, uy: usize| t.at(c, px * 2 + ux / 2, py * 2 + uy / 2);
                for j in 0..3 {
                    for i in 0..3 {
                        let mut acc = 0.0;
                        for (dy, krow) in k.iter().enumerate() {
                            for (dx, &w) in krow.iter().enumerate() {
                                acc += w * patch(i + dx, j + dy);
                            }
                        }
                        *out.at_mut(c, px * 3 + i, py * 3 + j) = acc;
                    }
                }
            }
        }
    }
    Ok(out)
}

/// Weights for one synthetic fusion layer: a per-input interpolation kernel
/// (used when the input is not already at the target scale), the 1x1 merge
/// over the concatenated channels, and the 3x3 refinement.
#[derive(Debug, Clone)]
pub struct SfmWeights {
    pub interp: Vec<DepthwiseKernel2x2>,
    pub merge: Conv1x1,
    pub refine: Conv3x3,
}

impl SfmWeights {
    /// Seeded uniform weights in [-0.1, 0.1] for the given input channel
    /// counts and output width.
    pub fn seeded(input_channels: &[usize], out_channels: usize, seed: u64) -> Self {
        let total: usize = input_channels.iter().sum();
        Self {
            interp: input_channels
                .iter()
                .enumerate()
                .map(|(i, &c)| DepthwiseKernel2x2::seeded(c, seed ^ (i as u64 + 1)))
                .collect(),
            merge: Conv1x1::seeded(total, out_channels, seed ^ 0x5f5f),
            refine: Conv3x3::seeded(out_channels, out_channels, seed ^ 0xa0a0),
        }
    }
}

/// Synthesizes a feature layer at `target_scale` from inputs at adjacent
/// ladder scales: each input is brought to the target grid by
/// Interpolation-Down, Interpolation-Up, or identity, the aligned inputs
/// are concatenated and merged by a 1x1 convolution, and a 3x3 convolution
/// (padding 1) refines the result.
pub fn sfm_fuse(
    inputs: &[FeatureTensor],
    target_scale: ScaleTag,
    weights: &SfmWeights,
) -> Result<FeatureTensor> {
    if inputs.is_empty() || inputs.len() > 3 {
        return Err(Error::InvalidParameter(format!(
            "synthetic fusion takes 1..=3 inputs, got {}",
            inputs.len()
        )));
    }
    if weights.interp.len() != inputs.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} interpolation kernels for {} inputs",
            weights.interp.len(),
            inputs.len()
        )));
    }
    let mut aligned = Vec::with_capacity(inputs.len());
    for (t, k) in inputs.iter().zip(&weights.interp) {
        let tag = t.scale_tag;
        let a = if tag == target_scale {
            t.clone()
        } else if tag.interp_down() == target_scale {
            interpolation_down(t, k)?
        } else if tag.interp_up() == target_scale {
            interpolation_up(t, k)?
        } else {
            return Err(Error::UnreachableScale {
                input: tag.to_string(),
                target: target_scale.to_string(),
                legal: format!("{}, {}, {}", tag, tag.interp_down(), tag.interp_up()),
            });
        };
        aligned.push(a);
    }
    let (w, h) = (aligned[0].width, aligned[0].height);
    if aligned.iter().any(|a| a.width != w || a.height != h) {
        return Err(Error::ShapeMismatch(format!(
            "aligned inputs disagree on the {target_scale} grid: {:?}",
            aligned
                .iter()
                .map(|a| (a.width, a.height))
                .collect::<Vec<_>>()
        )));
    }
    let mut concat = FeatureTensor::zeros(
        aligned.iter().map(|a| a.channels).sum(),
        w,
        h,
        target_scale,
    );
    let mut offset = 0;
    for a in &aligned {
        let len = a.data.len();
        concat.data[offset * w * h..offset * w * h + len].copy_from_slice(&a.data);
        offset += a.channels;
    }
    let merged = weights.merge.apply(&concat)?;
    let mut out = weights.refine.apply(&merged)?;
    out.scale_tag = target_scale;
    Ok(out)
}

/// Intra-block fusion: channel-concatenates every layer of one convolution
/// block (in block order) and applies a single 1x1 convolution.
pub fn ifm_block(layers: &[FeatureTensor], weights: &Conv1x1) -> Result<FeatureTensor> {
    if layers.is_empty() {
        return Err(Error::InvalidParameter("intra-block fusion needs layers".into()));
    }
    let (w, h) = (layers[0].width, layers[0].height);
    if layers.iter().any(|l| l.width != w || l.height != h) {
        return Err(Error::ShapeMismatch(format!(
            "layers disagree spatially: {:?}",
            layers.iter().map(|l| (l.width, l.height)).collect::<Vec<_>>()
        )));
    }
    let total: usize = layers.iter().map(|l| l.channels).sum();
    let mut concat = FeatureTensor::zeros(total, w, h, layers[0].scale_tag);
    let mut offset = 0;
    for l in layers {
        concat.data[offset..offset + l.data.len()].copy_from_slice(&l.data);
        offset += l.data.len();
    }
    weights.apply(&concat)
}

/// Weights for the channel-split block: the first half of the channels
/// passes a pair of 3x3 convolutions (the heavy path), the second half a
/// pair of 1x1 convolutions (the simple path); outputs are concatenated.
#[derive(Debug, Clone)]
pub struct ScbWeights {
    pub heavy: (Conv3x3, Conv3x3),
    pub light: (Conv1x1, Conv1x1),
}

impl ScbWeights {
    pub fn seeded(channels: usize, seed: u64) -> Result<Self> {
        if channels % 2 != 0 {
            return Err(Error::InvalidParameter(format!(
                "channel-split block needs an even channel count, got {channels}"
            )));
        }
        let half = channels / 2;
        Ok(Self {
            heavy: (
                Conv3x3::seeded(half, half, seed ^ 0x11),
                Conv3x3::seeded(half, half, seed ^ 0x22),
            ),
            light: (
                Conv1x1::seeded(half, half, seed ^ 0x33),
                Conv1x1::seeded(half, half, seed ^ 0x44),
            ),
        })
    }
}

/// Channel-split block: splits the input channels in half, runs the heavy
/// and simple paths, and concatenates their outputs.
pub fn scb_split_block(t: &FeatureTensor, weights: &ScbWeights) -> Result<FeatureTensor> {
    if t.channels % 2 != 0 {
        return Err(Error::InvalidParameter(format!(
            "channel-split block needs an even channel count, got {}",
            t.channels
        )));
    }
    let half = t.channels / 2;
    let plane = t.width * t.height;
    let first = FeatureTensor::from_data(
        half,
        t.width,
        t.height,
        t.data[..half * plane].to_vec(),
        t.scale_tag,
    )?;
    let second = FeatureTensor::from_data(
        half,
        t.width,
        t.height,
        t.data[half * plane..].to_vec(),
        t.scale_tag,
    )?;
    let heavy = weights.heavy.1.apply(&weights.heavy.0.apply(&first)?)?;
    let light = weights.light.1.apply(&weights.light.0.apply(&second)?)?;
    let mut out = FeatureTensor::zeros(
        heavy.channels + light.channels,
        t.width,
        t.height,
        t.scale_tag,
    );
    out.data[..heavy.data.len()].copy_from_slice(&heavy.data);
    out.data[heavy.data.len()..].copy_from_slice(&light.data);
    Ok(out)
}

/// Nominal scales reachable in the fusion ladder: the pooled scales
/// themselves plus every synthetic scale whose Interpolation-Down and
/// Interpolation-Up sources are both present as adjacent ladder layers.
pub fn reachable_scales(ladder: &[ScaleTag]) -> std::collections::BTreeSet<ScaleTag> {
    let mut out: std::collections::BTreeSet<ScaleTag> = ladder.iter().copied().collect();
    for p in ladder {
        let target = p.interp_down();
        let up_source = ladder.iter().any(|q| q.interp_up() == target);
        if up_source {
            out.insert(target);
        }
    }
    out
}

fn gcd(a: u32, b: u32) -> u32 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}
