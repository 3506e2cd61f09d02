//! Experiment configuration: a flat `key = value` text format with `#`
//! comments. Unknown keys are rejected so typos fail loudly.

use std::path::Path;

use crate::annotation::{
    build_scale_params, build_scale_params_with_beta1, AlphaMode, HeadSizeDistribution,
    ScaleParams,
};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Beta1Setting {
    /// Use the head-size distribution mean.
    Derive,
    Explicit(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RankSetting {
    /// Keep every selected-pixel factor (no further truncation).
    Full,
    Fixed(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LossKind {
    ScaleAware,
    L2,
}

impl LossKind {
    pub fn parse(token: &str) -> Result<Self> {
        match token {
            "scale_aware" => Ok(Self::ScaleAware),
            "l2" => Ok(Self::L2),
            other => Err(Error::Parse(format!(
                "loss must be `scale_aware` or `l2`, got `{other}`"
            ))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::ScaleAware => "scale_aware",
            Self::L2 => "l2",
        }
    }
}

/// Full experiment configuration; see the README for the key reference.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub width: u32,
    pub height: u32,
    pub count_min: u32,
    pub count_max: u32,
    pub num_scenes: u32,
    /// Log-normal location of `ln h` in pixels.
    pub head_loc: f64,
    /// Log-normal scale of `ln h`.
    pub head_scale: f64,
    /// Annotation-noise variance used when generating scenes.
    pub noise_alpha: f64,
    /// Annotation-noise variance assumed by the loss model.
    pub alpha: f64,
    pub beta1: Beta1Setting,
    pub num_scales: usize,
    pub alpha_mode: AlphaMode,
    pub mass_threshold: f64,
    pub rank: RankSetting,
    /// Jitter as a fraction of the largest singular value.
    pub jitter_rel: f64,
    pub step_size: f64,
    pub iterations: usize,
    pub backtrack_factor: f64,
    pub max_backtracks: usize,
    pub loss: LossKind,
    pub sweep_alphas: Vec<f64>,
    pub sweep_betas: Vec<f64>,
    pub sweep_scenes: u32,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seed: 1,
            width: 32,
            height: 32,
            count_min: 8,
            count_max: 24,
            num_scenes: 50,
            head_loc: 8.0f64.ln(),
            head_scale: 0.5,
            noise_alpha: 8.0,
            alpha: 8.0,
            beta1: Beta1Setting::Explicit(8.0),
            num_scales: 3,
            alpha_mode: AlphaMode::Scaled,
            mass_threshold: 0.8,
            rank: RankSetting::Full,
            jitter_rel: 1e-6,
            step_size: 1.0,
            iterations: 200,
            backtrack_factor: 0.5,
            max_backtracks: 60,
            loss: LossKind::ScaleAware,
            sweep_alphas: vec![2.0, 4.0, 8.0, 16.0, 32.0],
            sweep_betas: vec![8.0],
            sweep_scenes: 6,
        }
    }
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Parse(format!("line {}: expected `key = value`", lineno + 1))
            })?;
            let key = key.trim();
            let value = value.trim();
            let ctx = |e: String| Error::Parse(format!("line {}: {key}: {e}", lineno + 1));
            macro_rules! num {
                () => {
                    value.parse().map_err(|e| ctx(format!("{e}")))?
                };
            }
            match key {
                "seed" => cfg.seed = num!(),
                "width" => cfg.width = num!(),
                "height" => cfg.height = num!(),
                "count_min" => cfg.count_min = num!(),
                "count_max" => cfg.count_max = num!(),
                "num_scenes" => cfg.num_scenes = num!(),
                "head_loc" => cfg.head_loc = num!(),
                "head_scale" => cfg.head_scale = num!(),
                "noise_alpha" => cfg.noise_alpha = num!(),
                "alpha" => cfg.alpha = num!(),
                "beta1" => {
                    cfg.beta1 = if value == "derive" {
                        Beta1Setting::Derive
                    } else {
                        Beta1Setting::Explicit(num!())
                    }
                }
                "num_scales" => cfg.num_scales = num!(),
                "alpha_mode" => {
                    cfg.alpha_mode = match value {
                        "scaled" => AlphaMode::Scaled,
                        "fixed" => AlphaMode::Fixed,
                        other => {
                            return Err(ctx(format!("must be `scaled` or `fixed`, got `{other}`")))
                        }
                    }
                }
                "mass_threshold" => cfg.mass_threshold = num!(),
                "rank" => {
                    cfg.rank = if value == "full" {
                        RankSetting::Full
                    } else {
                        RankSetting::Fixed(num!())
                    }
                }
                "jitter_rel" => cfg.jitter_rel = num!(),
                "step_size" => cfg.step_size = num!(),
                "iterations" => cfg.iterations = num!(),
                "backtrack_factor" => cfg.backtrack_factor = num!(),
                "max_backtracks" => cfg.max_backtracks = num!(),
                "loss" => cfg.loss = LossKind::parse(value)?,
                "sweep_alphas" => cfg.sweep_alphas = parse_list(value).map_err(|e| ctx(e))?,
                "sweep_betas" => cfg.sweep_betas = parse_list(value).map_err(|e| ctx(e))?,
                "sweep_scenes" => cfg.sweep_scenes = num!(),
                other => {
                    return Err(Error::Parse(format!(
                        "line {}: unknown key `{other}`",
                        lineno + 1
                    )))
                }
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file<P: AsRef<Path>>(path: P) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidParameter(msg.into()));
        if !(self.alpha > 0.0) {
            return bad("model alpha must be positive");
        }
        if let Beta1Setting::Explicit(b) = self.beta1 {
            if !(b > 0.0) {
                return bad("beta1 must be positive");
            }
        }
        if !(self.noise_alpha >= 0.0) {
            return bad("noise_alpha must be nonnegative");
        }
        if self.iterations < 1 {
            return bad("iterations must be >= 1");
        }
        if !(self.mass_threshold > 0.0 && self.mass_threshold < 1.0) {
            return bad("mass_threshold must lie in (0, 1)");
        }
        if !(self.backtrack_factor > 0.0 && self.backtrack_factor < 1.0) {
            return bad("backtrack_factor must lie in (0, 1)");
        }
        if self.count_min > self.count_max {
            return bad("count_min must not exceed count_max");
        }
        if self.num_scales == 0 {
            return bad("num_scales must be >= 1");
        }
        if !(self.jitter_rel > 0.0) {
            return bad("jitter_rel must be positive");
        }
        if !(self.step_size > 0.0) {
            return bad("step_size must be positive");
        }
        if !(self.head_scale > 0.0) {
            return bad("head_scale must be positive");
        }
        if self.sweep_alphas.is_empty() || self.sweep_betas.is_empty() {
            return bad("sweep grids must be nonempty");
        }
        Ok(())
    }

    pub fn head_size_distribution(&self) -> Result<HeadSizeDistribution> {
        HeadSizeDistribution::log_normal(self.head_loc, self.head_scale)
    }

    /// Scale parameters implied by the config (model side).
    pub fn scale_params(&self) -> Result<ScaleParams> {
        self.scale_params_with(self.alpha, self.beta1)
    }

    /// Scale parameters with an overridden alpha / beta1, as used by sweeps.
    pub fn scale_params_with(&self, alpha: f64, beta1: Beta1Setting) -> Result<ScaleParams> {
        let dist = self.head_size_distribution()?;
        let params = match beta1 {
            Beta1Setting::Derive => build_scale_params(&dist, self.num_scales, alpha)?,
            Beta1Setting::Explicit(b) => {
                build_scale_params_with_beta1(&dist, self.num_scales, alpha, b)?
            }
        };
        Ok(params.with_alpha_mode(self.alpha_mode))
    }
}

fn parse_list(value: &str) -> std::result::Result<Vec<f64>, String> {
    let items: std::result::Result<Vec<f64>, _> = value
        .split(',')
        .map(|t| t.trim().parse::<f64>())
        .collect();
    items.map_err(|e| format!("{e}"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        ExperimentConfig::default().validate().unwrap();
    }

    #[test]
    fn parses_overrides_and_rejects_unknown_keys() {
        let cfg = ExperimentConfig::parse(
            "seed = 9\nwidth = 16\nbeta1 = derive\nloss = l2\nsweep_alphas = 1, 2, 4\n",
        )
        .unwrap();
        assert_eq!(cfg.seed, 9);
        assert_eq!(cfg.width, 16);
        assert_eq!(cfg.beta1, Beta1Setting::Derive);
        assert_eq!(cfg.loss, LossKind::L2);
        assert_eq!(cfg.sweep_alphas, vec![1.0, 2.0, 4.0]);
        assert!(ExperimentConfig::parse("no_such_key = 1\n").is_err());
        assert!(ExperimentConfig::parse("mass_threshold = 1.5\n").is_err());
    }

    #[test]
    fn scale_params_respect_beta_pathways() {
        let cfg = ExperimentConfig::default();
        let explicit = cfg.scale_params().unwrap();
        assert_eq!(explicit.betas()[0], 8.0);
        let mut derived_cfg = cfg;
        derived_cfg.beta1 = Beta1Setting::Derive;
        let derived = derived_cfg.scale_params().unwrap();
        let dist = derived_cfg.head_size_distribution().unwrap();
        assert!((derived.betas()[0] - dist.mean()).abs() < 1e-12);
    }
}
