//! Scenes, head annotations, annotation noise, and the per-scale parameter
//! schedule (alpha, beta_s, w_s) derived from the head-size distribution.
//!
//! Coordinate convention: pixel centers sit at integer coordinates with the
//! origin at the top-left; annotation positions are continuous. Rescaled
//! coordinates are kept exact (no rounding).

use std::fmt::Write as _;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};

/// One annotated head: the true center, the noisy human-labeled point, and
/// the apparent head size in pixels.
#[derive(Debug, Clone, PartialEq)]
pub struct Annotation {
    pub true_pos: [f64; 2],
    pub noisy_pos: [f64; 2],
    pub head_size: f64,
}

/// An image of known dimensions together with its head annotations.
///
/// True positions lie inside `[0, width) x [0, height)`; noisy positions may
/// fall outside the image.
#[derive(Debug, Clone, PartialEq)]
pub struct AnnotatedScene {
    width: u32,
    height: u32,
    annotations: Vec<Annotation>,
}

impl AnnotatedScene {
    pub fn new(width: u32, height: u32, annotations: Vec<Annotation>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidParameter(
                "scene dimensions must be positive".into(),
            ));
        }
        for (i, a) in annotations.iter().enumerate() {
            let [x, y] = a.true_pos;
            if !(x.is_finite() && y.is_finite() && a.noisy_pos.iter().all(|v| v.is_finite())) {
                return Err(Error::InvalidParameter(format!(
                    "annotation {i} has non-finite coordinates"
                )));
            }
            if x < 0.0 || x >= width as f64 || y < 0.0 || y >= height as f64 {
                return Err(Error::InvalidParameter(format!(
                    "annotation {i} true position ({x}, {y}) lies outside the image"
                )));
            }
            if !(a.head_size > 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "annotation {i} head size must be positive"
                )));
            }
        }
        Ok(Self {
            width,
            height,
            annotations,
        })
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn annotations(&self) -> &[Annotation] {
        &self.annotations
    }

    pub fn count(&self) -> usize {
        self.annotations.len()
    }

    /// Serializes to the line-oriented text format: a `width height count`
    /// header, then one `true_x true_y noisy_x noisy_y head_size` line per
    /// annotation at 17 significant digits.
    pub fn write_text<W: Write>(&self, mut out: W) -> Result<()> {
        let mut buf = String::new();
        writeln!(buf, "{} {} {}", self.width, self.height, self.count()).unwrap();
        for a in &self.annotations {
            writeln!(
                buf,
                "{:.16e} {:.16e} {:.16e} {:.16e} {:.16e}",
                a.true_pos[0], a.true_pos[1], a.noisy_pos[0], a.noisy_pos[1], a.head_size
            )
            .unwrap();
        }
        out.write_all(buf.as_bytes())?;
        Ok(())
    }

    pub fn read_text<R: Read>(input: R) -> Result<Self> {
        let mut lines = BufReader::new(input).lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::Parse("empty scene file".into()))??;
        let mut it = header.split_whitespace();
        let width: u32 = parse_field(it.next(), "width")?;
        let height: u32 = parse_field(it.next(), "height")?;
        let count: usize = parse_field(it.next(), "count")?;
        let mut annotations = Vec::with_capacity(count);
        for i in 0..count {
            let line = lines
                .next()
                .ok_or_else(|| Error::Parse(format!("scene file truncated at annotation {i}")))??;
            let fields: Vec<f64> = line
                .split_whitespace()
                .map(|t| {
                    t.parse::<f64>()
                        .map_err(|e| Error::Parse(format!("annotation {i}: {e}")))
                })
                .collect::<Result<_>>()?;
            if fields.len() != 5 {
                return Err(Error::Parse(format!(
                    "annotation {i}: expected 5 fields, got {}",
                    fields.len()
                )));
            }
            annotations.push(Annotation {
                true_pos: [fields[0], fields[1]],
                noisy_pos: [fields[2], fields[3]],
                head_size: fields[4],
            });
        }
        Self::new(width, height, annotations)
    }

    pub fn write_file<P: AsRef<Path>>(&self, path: P) -> Result<()> {
        self.write_text(std::fs::File::create(path)?)
    }

    pub fn read_file<P: AsRef<Path>>(path: P) -> Result<Self> {
        Self::read_text(std::fs::File::open(path)?)
    }
}

fn parse_field<T: std::str::FromStr>(token: Option<&str>, name: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    token
        .ok_or_else(|| Error::Parse(format!("missing {name} in scene header")))?
        .parse()
        .map_err(|e| Error::Parse(format!("bad {name}: {e}")))
}

/// Parametric family behind a [`HeadSizeDistribution`].
#[derive(Debug, Clone, PartialEq)]
pub enum SizeFamily {
    /// Log-normal in pixels: `ln h ~ N(location, scale^2)`.
    LogNormal { location: f64, scale: f64 },
    /// Histogram-only distribution; samples are drawn from the bins.
    Empirical,
}

/// Distribution of apparent head sizes, kept both as a binned histogram (for
/// the `w_s` lookups) and as a parametric family tag (for sampling).
///
/// Head-size distributions observed in crowd data are positively skewed, so
/// the default family is log-normal.
#[derive(Debug, Clone, PartialEq)]
pub struct HeadSizeDistribution {
    /// Bin centers in pixels, strictly increasing.
    centers: Vec<f64>,
    /// Bin probabilities, summing to 1.
    probs: Vec<f64>,
    family: SizeFamily,
}

const LOG_NORMAL_BINS: usize = 96;
const LOG_NORMAL_SPAN_SIGMAS: f64 = 4.5;

impl HeadSizeDistribution {
    /// Binned log-normal with the given location and scale of `ln h`.
    pub fn log_normal(location: f64, scale: f64) -> Result<Self> {
        if !location.is_finite() || !(scale > 0.0) || !scale.is_finite() {
            return Err(Error::InvalidParameter(
                "log-normal location must be finite and scale positive".into(),
            ));
        }
        let lo = (location - LOG_NORMAL_SPAN_SIGMAS * scale).exp();
        let hi = (location + LOG_NORMAL_SPAN_SIGMAS * scale).exp();
        let n = LOG_NORMAL_BINS;
        let width = (hi - lo) / n as f64;
        let cdf = |h: f64| 0.5 * (1.0 + libm::erf((h.ln() - location) / (scale * std::f64::consts::SQRT_2)));
        let mut centers = Vec::with_capacity(n);
        let mut probs = Vec::with_capacity(n);
        for i in 0..n {
            let a = lo + i as f64 * width;
            let b = a + width;
            centers.push(0.5 * (a + b));
            probs.push(cdf(b) - cdf(a));
        }
        let total: f64 = probs.iter().sum();
        for p in &mut probs {
            *p /= total;
        }
        Ok(Self {
            centers,
            probs,
            family: SizeFamily::LogNormal { location, scale },
        })
    }

    /// Builds an empirical distribution from `(bin center, weight)` pairs.
    /// Weights are normalized to probabilities; zero-weight bins are kept.
    pub fn from_histogram(bins: Vec<(f64, f64)>) -> Result<Self> {
        if bins.is_empty() {
            return Err(Error::InvalidParameter("histogram has no bins".into()));
        }
        let mut bins = bins;
        bins.sort_by(|a, b| a.0.total_cmp(&b.0));
        let total: f64 = bins.iter().map(|(_, p)| p).sum();
        if !(total > 0.0) || bins.iter().any(|(c, p)| !(*c > 0.0) || *p < 0.0) {
            return Err(Error::InvalidParameter(
                "histogram bins need positive centers, nonnegative weights, positive total".into(),
            ));
        }
        let centers = bins.iter().map(|(c, _)| *c).collect();
        let probs = bins.iter().map(|(_, p)| p / total).collect();
        Ok(Self {
            centers,
            probs,
            family: SizeFamily::Empirical,
        })
    }

    pub fn family(&self) -> &SizeFamily {
        &self.family
    }

    pub fn bins(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.centers.iter().copied().zip(self.probs.iter().copied())
    }

    /// Histogram mean `sum_h h P(h)`.
    pub fn mean(&self) -> f64 {
        self.centers
            .iter()
            .zip(&self.probs)
            .map(|(c, p)| c * p)
            .sum()
    }

    /// Probability of the bin whose center is nearest to `size`; ties go to
    /// the lower center.
    pub fn lookup_nearest(&self, size: f64) -> f64 {
        let mut best = 0usize;
        let mut best_d = f64::INFINITY;
        for (i, c) in self.centers.iter().enumerate() {
            let d = (c - size).abs();
            if d < best_d {
                best_d = d;
                best = i;
            }
        }
        self.probs[best]
    }

    /// Draws one head size.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self.family {
            SizeFamily::LogNormal { location, scale } => {
                let z: f64 = StandardNormal.sample(rng);
                (location + scale * z).exp()
            }
            SizeFamily::Empirical => {
                let u: f64 = rng.gen();
                let mut acc = 0.0;
                for (c, p) in self.centers.iter().zip(&self.probs) {
                    acc += p;
                    if u < acc {
                        return *c;
                    }
                }
                *self.centers.last().unwrap()
            }
        }
    }
}

/// How the annotation-noise variance is carried across scales.
///
/// Rescaling coordinates by `2^(s-1)` shrinks the noise covariance
/// quadratically, so the geometrically consistent choice divides alpha by
/// `4^(s-1)` per scale. `Fixed` reuses one alpha at every scale.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum AlphaMode {
    #[default]
    Scaled,
    Fixed,
}

/// The mixture configuration: annotation-noise variance alpha, per-scale
/// kernel variances `beta_1..beta_S` (halving per scale), and normalized
/// mixture weights `w_1..w_S`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScaleParams {
    alpha: f64,
    betas: Vec<f64>,
    weights: Vec<f64>,
    downsample_factor: f64,
    alpha_mode: AlphaMode,
}

impl ScaleParams {
    /// Builds from explicit parameters. `alpha` may be zero (the noise-free
    /// limit); weights are normalized to sum to 1.
    pub fn new(alpha: f64, betas: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        if !(alpha >= 0.0) || !alpha.is_finite() {
            return Err(Error::InvalidParameter(
                "alpha must be finite and nonnegative".into(),
            ));
        }
        if betas.is_empty() || betas.len() != weights.len() {
            return Err(Error::InvalidParameter(
                "need one beta and one weight per scale".into(),
            ));
        }
        if betas.iter().any(|b| !(*b > 0.0) || !b.is_finite()) {
            return Err(Error::InvalidParameter("every beta must be positive".into()));
        }
        if weights.iter().any(|w| !(*w >= 0.0) || !w.is_finite()) {
            return Err(Error::InvalidParameter(
                "weights must be nonnegative".into(),
            ));
        }
        let total: f64 = weights.iter().sum();
        if !(total > 0.0) {
            return Err(Error::InvalidParameter(
                "weights must have positive total".into(),
            ));
        }
        let weights = weights.iter().map(|w| w / total).collect();
        Ok(Self {
            alpha,
            betas,
            weights,
            downsample_factor: 2.0,
            alpha_mode: AlphaMode::Scaled,
        })
    }

    pub fn with_alpha_mode(mut self, mode: AlphaMode) -> Self {
        self.alpha_mode = mode;
        self
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn alpha_mode(&self) -> AlphaMode {
        self.alpha_mode
    }

    pub fn num_scales(&self) -> usize {
        self.betas.len()
    }

    pub fn downsample_factor(&self) -> f64 {
        self.downsample_factor
    }

    pub fn betas(&self) -> &[f64] {
        &self.betas
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Kernel variance at 1-based scale `s`.
    pub fn beta(&self, scale_index: usize) -> f64 {
        self.betas[scale_index - 1]
    }

    /// Mixture weight at 1-based scale `s`.
    pub fn weight(&self, scale_index: usize) -> f64 {
        self.weights[scale_index - 1]
    }

    /// Coordinate shrink factor at 1-based scale `s`: `factor^(s-1)`.
    pub fn scale_factor(&self, scale_index: usize) -> f64 {
        self.downsample_factor.powi(scale_index as i32 - 1)
    }

    /// Annotation-noise variance expressed in scale-`s` coordinates.
    pub fn alpha_at(&self, scale_index: usize) -> f64 {
        match self.alpha_mode {
            AlphaMode::Scaled => {
                let f = self.scale_factor(scale_index);
                self.alpha / (f * f)
            }
            AlphaMode::Fixed => self.alpha,
        }
    }

    pub fn validate_scale(&self, scale_index: usize) -> Result<()> {
        if scale_index == 0 || scale_index > self.num_scales() {
            return Err(Error::InvalidParameter(format!(
                "scale index {scale_index} outside [1, {}]",
                self.num_scales()
            )));
        }
        Ok(())
    }
}

/// Derives the schedule from a head-size distribution: `beta_1` is the
/// histogram mean, `beta_{s+1} = beta_s / 2`, and `w_s` is the nearest-bin
/// probability of `beta_(S+1-s)` normalized over scales.
pub fn build_scale_params(
    dist: &HeadSizeDistribution,
    num_scales: usize,
    alpha: f64,
) -> Result<ScaleParams> {
    build_scale_params_with_beta1(dist, num_scales, alpha, dist.mean())
}

/// Same schedule but with an explicit `beta_1` instead of the histogram mean.
pub fn build_scale_params_with_beta1(
    dist: &HeadSizeDistribution,
    num_scales: usize,
    alpha: f64,
    beta1: f64,
) -> Result<ScaleParams> {
    if num_scales == 0 {
        return Err(Error::InvalidParameter("need at least one scale".into()));
    }
    if !(beta1 > 0.0) {
        return Err(Error::InvalidParameter("beta_1 must be positive".into()));
    }
    let mut betas = Vec::with_capacity(num_scales);
    let mut b = beta1;
    for _ in 0..num_scales {
        betas.push(b);
        b /= 2.0;
    }
    let raw: Vec<f64> = (1..=num_scales)
        .map(|s| dist.lookup_nearest(betas[num_scales - s]))
        .collect();
    let total: f64 = raw.iter().sum();
    if !(total > 0.0) {
        return Err(Error::DegenerateHeadSizeDistribution);
    }
    ScaleParams::new(alpha, betas, raw)
}

/// Draws a synthetic scene: true positions uniform over the image, head
/// sizes i.i.d. from `dist`, and noisy positions displaced by
/// `N(0, alpha I)`. Deterministic for a given seed; the standard-normal
/// stream is drawn even when `alpha == 0`, so the same seed produces the
/// same true positions for any alpha.
pub fn sample_scene(
    width: u32,
    height: u32,
    count: usize,
    dist: &HeadSizeDistribution,
    alpha: f64,
    seed: u64,
) -> Result<AnnotatedScene> {
    if !(alpha >= 0.0) || !alpha.is_finite() {
        return Err(Error::InvalidParameter(
            "noise alpha must be finite and nonnegative".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sigma = alpha.sqrt();
    let mut annotations = Vec::with_capacity(count);
    for _ in 0..count {
        let x = rng.gen_range(0.0..width as f64);
        let y = rng.gen_range(0.0..height as f64);
        let head_size = dist.sample(&mut rng);
        let zx: f64 = StandardNormal.sample(&mut rng);
        let zy: f64 = StandardNormal.sample(&mut rng);
        annotations.push(Annotation {
            true_pos: [x, y],
            noisy_pos: [x + sigma * zx, y + sigma * zy],
            head_size,
        });
    }
    AnnotatedScene::new(width, height, annotations)
}

/// Noisy positions divided by `factor^(scale_index - 1)`. The scene is left
/// unmodified; fractional coordinates are kept exact.
pub fn rescale_annotations(
    scene: &AnnotatedScene,
    scale_index: usize,
    factor: f64,
) -> Vec<[f64; 2]> {
    let f = factor.powi(scale_index as i32 - 1);
    scene
        .annotations()
        .iter()
        .map(|a| [a.noisy_pos[0] / f, a.noisy_pos[1] / f])
        .collect()
}

/// Which annotation coordinates to place kernels on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PositionKind {
    True,
    Noisy,
}

/// Annotation positions of the requested kind, rescaled to scale-`s`
/// coordinates.
pub(crate) fn positions_at_scale(
    scene: &AnnotatedScene,
    params: &ScaleParams,
    scale_index: usize,
    kind: PositionKind,
) -> Vec<[f64; 2]> {
    let f = params.scale_factor(scale_index);
    scene
        .annotations()
        .iter()
        .map(|a| {
            let p = match kind {
                PositionKind::True => a.true_pos,
                PositionKind::Noisy => a.noisy_pos,
            };
            [p[0] / f, p[1] / f]
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn schedule_from_mean_8_3() {
        // A single-bin histogram pins the mean exactly.
        let dist = HeadSizeDistribution::from_histogram(vec![(8.3, 1.0)]).unwrap();
        let p = build_scale_params(&dist, 3, 8.0).unwrap();
        assert_eq!(p.betas(), &[8.3, 4.15, 2.075]);
        assert_eq!(p.alpha(), 8.0);
    }

    #[test]
    fn schedule_single_scale_degenerate_dist() {
        let dist = HeadSizeDistribution::from_histogram(vec![(5.0, 1.0)]).unwrap();
        let p = build_scale_params(&dist, 1, 8.0).unwrap();
        assert_eq!(p.betas(), &[5.0]);
        assert_eq!(p.weights(), &[1.0]);
    }

    #[test]
    fn schedule_weights_match_direct_lookup() {
        let dist = HeadSizeDistribution::log_normal(8.0f64.ln(), 0.5).unwrap();
        let p = build_scale_params(&dist, 3, 8.0).unwrap();
        let s_count = 3;
        let raw: Vec<f64> = (1..=s_count)
            .map(|s| dist.lookup_nearest(p.betas()[s_count - s]))
            .collect();
        let total: f64 = raw.iter().sum();
        let sum: f64 = p.weights().iter().sum();
        assert!((sum - 1.0).abs() < 1e-9);
        for (w, r) in p.weights().iter().zip(&raw) {
            assert!((w - r / total).abs() < 1e-12);
        }
    }

    #[test]
    fn schedule_zero_mass_errors() {
        // All mass sits in one far bin; every queried beta lands on a
        // zero-probability bin.
        let dist = HeadSizeDistribution::from_histogram(vec![
            (2.0, 0.0),
            (4.0, 0.0),
            (8.0, 0.0),
            (1000.0, 1.0),
        ])
        .unwrap();
        let err = build_scale_params_with_beta1(&dist, 3, 8.0, 8.0).unwrap_err();
        assert!(matches!(err, Error::DegenerateHeadSizeDistribution));
    }

    #[test]
    fn lognormal_histogram_is_normalized_and_skewed() {
        let dist = HeadSizeDistribution::log_normal(8.0f64.ln(), 0.5).unwrap();
        let total: f64 = dist.bins().map(|(_, p)| p).sum();
        assert!((total - 1.0).abs() < 1e-9);
        // mean > median for a positively skewed distribution
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let mut samples: Vec<f64> = (0..10_000).map(|_| dist.sample(&mut rng)).collect();
        samples.sort_by(f64::total_cmp);
        let mean = samples.iter().sum::<f64>() / samples.len() as f64;
        let median = samples[samples.len() / 2];
        assert!(mean > median, "mean {mean} should exceed median {median}");
    }

    #[test]
    fn sample_scene_zero_alpha_is_noise_free() {
        let dist = HeadSizeDistribution::log_normal(8.0f64.ln(), 0.5).unwrap();
        let scene = sample_scene(32, 24, 50, &dist, 0.0, 9).unwrap();
        for a in scene.annotations() {
            assert_eq!(a.true_pos, a.noisy_pos);
        }
    }

    #[test]
    fn sample_scene_deterministic() {
        let dist = HeadSizeDistribution::log_normal(8.0f64.ln(), 0.5).unwrap();
        let a = sample_scene(32, 24, 20, &dist, 8.0, 7).unwrap();
        let b = sample_scene(32, 24, 20, &dist, 8.0, 7).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn sample_scene_same_positions_for_any_alpha() {
        let dist = HeadSizeDistribution::log_normal(8.0f64.ln(), 0.5).unwrap();
        let a = sample_scene(32, 24, 20, &dist, 0.0, 7).unwrap();
        let b = sample_scene(32, 24, 20, &dist, 8.0, 7).unwrap();
        for (x, y) in a.annotations().iter().zip(b.annotations()) {
            assert_eq!(x.true_pos, y.true_pos);
        }
    }

    #[test]
    fn sample_scene_noise_variance_within_three_se() {
        let dist = HeadSizeDistribution::from_histogram(vec![(8.0, 1.0)]).unwrap();
        let alpha = 8.0;
        let n = 10_000usize;
        let scene = sample_scene(1000, 1000, n, &dist, alpha, 11).unwrap();
        // Sample variance of a normal: Var(s^2) = 2 sigma^4 / (n - 1).
        let se = alpha * (2.0 / (n as f64 - 1.0)).sqrt();
        for axis in 0..2 {
            let diffs: Vec<f64> = scene
                .annotations()
                .iter()
                .map(|a| a.noisy_pos[axis] - a.true_pos[axis])
                .collect();
            let mean = diffs.iter().sum::<f64>() / n as f64;
            let var = diffs.iter().map(|d| (d - mean) * (d - mean)).sum::<f64>() / (n as f64 - 1.0);
            assert!(
                (var - alpha).abs() <= 3.0 * se,
                "axis {axis}: sample variance {var} vs alpha {alpha} (3 SE = {})",
                3.0 * se
            );
        }
    }

    #[test]
    fn sample_scene_noise_unbiased() {
        let dist = HeadSizeDistribution::from_histogram(vec![(8.0, 1.0)]).unwrap();
        let alpha = 8.0;
        let n = 100_000usize;
        let scene = sample_scene(1000, 1000, n, &dist, alpha, 13).unwrap();
        let bound = 3.0 * (alpha / n as f64).sqrt();
        for axis in 0..2 {
            let mean = scene
                .annotations()
                .iter()
                .map(|a| a.noisy_pos[axis] - a.true_pos[axis])
                .sum::<f64>()
                / n as f64;
            assert!(mean.abs() <= bound, "axis {axis}: mean {mean} vs {bound}");
        }
    }

    #[test]
    fn rescale_identity_and_halving() {
        let scene = AnnotatedScene::new(
            128,
            64,
            vec![Annotation {
                true_pos: [64.0, 32.0],
                noisy_pos: [64.0, 32.0],
                head_size: 8.0,
            }],
        )
        .unwrap();
        assert_eq!(rescale_annotations(&scene, 1, 2.0)[0], [64.0, 32.0]);
        assert_eq!(rescale_annotations(&scene, 2, 2.0)[0], [32.0, 16.0]);
        let scene10 = AnnotatedScene::new(
            32,
            32,
            vec![Annotation {
                true_pos: [10.0, 10.0],
                noisy_pos: [10.0, 10.0],
                head_size: 4.0,
            }],
        )
        .unwrap();
        assert_eq!(rescale_annotations(&scene10, 3, 2.0)[0], [2.5, 2.5]);
    }

    #[test]
    fn alpha_scales_quadratically() {
        let p = ScaleParams::new(8.0, vec![8.0, 4.0, 2.0], vec![0.2, 0.3, 0.5]).unwrap();
        assert_eq!(p.alpha_at(1), 8.0);
        assert_eq!(p.alpha_at(2), 2.0);
        assert_eq!(p.alpha_at(3), 0.5);
        let fixed = p.clone().with_alpha_mode(AlphaMode::Fixed);
        assert_eq!(fixed.alpha_at(3), 8.0);
    }

    #[test]
    fn scene_round_trip_is_exact() {
        let dist = HeadSizeDistribution::log_normal(8.0f64.ln(), 0.5).unwrap();
        let scene = sample_scene(640, 480, 37, &dist, 8.0, 3).unwrap();
        let mut bytes = Vec::new();
        scene.write_text(&mut bytes).unwrap();
        let back = AnnotatedScene::read_text(&bytes[..]).unwrap();
        assert_eq!(scene, back);
        let mut again = Vec::new();
        back.write_text(&mut again).unwrap();
        assert_eq!(bytes, again);
    }
}
