//! Density fitting over free per-pixel predictions and count reporting.
//!
//! Predictions are optimized directly (no network) by the block descent in
//! [`crate::optim`]: per scale, the selected-pixel block takes spectrally
//! preconditioned steps against the jittered rank-M quadratic
//! (`P = (Sigma_hat + lambda I) / 2`, so the pure-NLL direction is the
//! residual itself) while the unselected block follows the raw regularizer
//! subgradient. Negative prediction values are allowed during optimization
//! and clipped to zero only when counts are reported.

use rayon::prelude::*;

use crate::annotation::{AnnotatedScene, PositionKind, ScaleParams};
use crate::density::{
    approx_cov_selected, approx_diag_var, approx_mean, grid_for_scale, render_density_on_grid,
    DensityField, GridDims,
};
use crate::error::{Error, Result};
use crate::harness::config::{ExperimentConfig, LossKind, RankSetting};
use crate::harness::thread_pool;
use crate::loss::SoftAssign;
use crate::lowrank::{select_pixels, truncate_cov, RankMApprox};
use crate::optim::{block_descent, BlockProblem, DescentOptions, TraceRow};

/// Per-scene count outcome.
#[derive(Debug, Clone, PartialEq)]
pub struct SceneCount {
    pub index: usize,
    pub true_count: f64,
    pub predicted: f64,
    pub abs_error: f64,
}

/// Aggregate count report over a scene set.
#[derive(Debug, Clone, PartialEq)]
pub struct CountReport {
    pub rows: Vec<SceneCount>,
    pub mae: f64,
    pub mse: f64,
}

impl CountReport {
    pub fn from_rows(rows: Vec<SceneCount>) -> Self {
        let n = rows.len().max(1) as f64;
        let mae = rows.iter().map(|r| r.abs_error).sum::<f64>() / n;
        let mse = rows.iter().map(|r| r.abs_error * r.abs_error).sum::<f64>() / n;
        Self { rows, mae, mse }
    }

    pub fn counts_csv(&self) -> String {
        let mut out = String::from("scene,true_count,pred_count,abs_error\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{}\n",
                r.index, r.true_count, r.predicted, r.abs_error
            ));
        }
        out
    }

    pub fn summary_csv(&self) -> String {
        format!("metric,value\nmae,{}\nmse,{}\nscenes,{}\n", self.mae, self.mse, self.rows.len())
    }
}

/// One fitted scene: the clipped count and the optimizer trace.
#[derive(Debug, Clone)]
pub struct FitResult {
    pub count: f64,
    pub trace: Vec<TraceRow>,
    pub cycles: usize,
    pub predictions: Vec<DensityField>,
}

/// Fit plus report for a scene set.
#[derive(Debug, Clone)]
pub struct FitOutcome {
    pub report: CountReport,
    /// Trace of the first scene (representative; one row per scale per cycle).
    pub first_trace: Vec<TraceRow>,
}

pub(crate) struct ScaleAwareScale {
    dims: GridDims,
    mean: Vec<f64>,
    /// Grid indices of the selected pixels; the rank-M factors live on this
    /// subspace (their own index set is identity).
    selected: Vec<usize>,
    approx: Option<RankMApprox>,
    assign: SoftAssign,
    weight: f64,
}

struct ScaleAwareProblem {
    scales: Vec<ScaleAwareScale>,
}

impl ScaleAwareProblem {
    fn build(scene: &AnnotatedScene, params: &ScaleParams, cfg: &ExperimentConfig) -> Result<Self> {
        let mut scales = Vec::with_capacity(params.num_scales());
        for s in 1..=params.num_scales() {
            let dims = grid_for_scale(scene, params, s);
            let mean = approx_mean(scene, params, s, dims, PositionKind::Noisy)?;
            let assign = SoftAssign::new(scene, params, s, dims)?;
            let (selected, approx) = if scene.count() == 0 {
                (Vec::new(), None)
            } else {
                let diag = approx_diag_var(scene, params, s, dims, PositionKind::Noisy)?;
                let selected = select_pixels(&diag, cfg.mass_threshold)?;
                let cov =
                    approx_cov_selected(scene, params, s, dims, &selected, PositionKind::Noisy)?;
                let rank = match cfg.rank {
                    RankSetting::Full => selected.len(),
                    RankSetting::Fixed(r) => r.min(selected.len()).max(1),
                };
                // the covariance is already restricted, so the factor's own
                // index set is the identity
                let identity: Vec<usize> = (0..selected.len()).collect();
                let full = truncate_cov(&cov, &identity, rank, 0.0)?;
                let c1 = full.singular_values().first().copied().unwrap_or(0.0);
                let jitter = cfg.jitter_rel * c1;
                if !(jitter > 0.0) {
                    return Err(Error::SingularQuadraticForm);
                }
                (selected, Some(truncate_cov(&cov, &identity, rank, jitter)?))
            };
            scales.push(ScaleAwareScale {
                dims,
                mean,
                selected,
                approx,
                assign,
                weight: params.weight(s),
            });
        }
        Ok(Self { scales })
    }

    fn reg_gradient(&self, scale: &ScaleAwareScale, x: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; x.len()];
        scale.assign.add_penalty_gradient(x, scale.weight, &mut g);
        g
    }
}

impl BlockProblem for ScaleAwareProblem {
    fn num_scales(&self) -> usize {
        self.scales.len()
    }

    fn dim(&self, scale_index: usize) -> usize {
        self.scales[scale_index - 1].dims.pixel_count()
    }

    fn blocks_per_scale(&self) -> usize {
        2
    }

    fn scale_loss(&self, scale_index: usize, x: &[f64]) -> Result<(f64, f64)> {
        let sc = &self.scales[scale_index - 1];
        let nll = match &sc.approx {
            Some(a) => {
                let d: Vec<f64> = sc.selected.iter().map(|&j| x[j] - sc.mean[j]).collect();
                a.quadratic_form(&d)?
            }
            None => 0.0,
        };
        Ok((nll, sc.assign.penalty(x, sc.weight)))
    }

    fn block_direction(
        &self,
        scale_index: usize,
        block: usize,
        x: &[f64],
        direction: &mut [f64],
    ) -> Result<bool> {
        let sc = &self.scales[scale_index - 1];
        let mut any = false;
        match block {
            0 => {
                // selected block, preconditioned by (Sigma_hat + lambda I)/2:
                // the NLL part becomes the plain residual, the regularizer
                // part is forward-multiplied by the covariance.
                let Some(a) = &sc.approx else {
                    return Ok(false);
                };
                let reg = self.reg_gradient(sc, x);
                let reg_l: Vec<f64> = sc.selected.iter().map(|&j| reg[j]).collect();
                let smoothed = a.apply_forward(&reg_l)?;
                for (idx, &j) in sc.selected.iter().enumerate() {
                    let v = (x[j] - sc.mean[j]) + 0.5 * smoothed[idx];
                    direction[j] = v;
                    any |= v != 0.0;
                }
            }
            1 => {
                // unselected block: raw regularizer subgradient
                let reg = self.reg_gradient(sc, x);
                let mut in_selection = vec![false; x.len()];
                for &j in &sc.selected {
                    in_selection[j] = true;
                }
                for (j, g) in reg.iter().enumerate() {
                    if !in_selection[j] && *g != 0.0 {
                        direction[j] = *g;
                        any = true;
                    }
                }
            }
            other => {
                return Err(Error::InvalidParameter(format!(
                    "scale-aware problem has blocks 0 and 1, got {other}"
                )))
            }
        }
        Ok(any)
    }
}

struct L2Problem {
    targets: Vec<DensityField>,
}

impl L2Problem {
    fn build(scene: &AnnotatedScene, params: &ScaleParams) -> Result<Self> {
        let mut targets = Vec::with_capacity(params.num_scales());
        for s in 1..=params.num_scales() {
            let dims = grid_for_scale(scene, params, s);
            let mut t = render_density_on_grid(scene, params, s, dims, true)?;
            let w = params.weight(s);
            for v in &mut t.values {
                *v *= w;
            }
            targets.push(t);
        }
        Ok(Self { targets })
    }
}

impl BlockProblem for L2Problem {
    fn num_scales(&self) -> usize {
        self.targets.len()
    }

    fn dim(&self, scale_index: usize) -> usize {
        self.targets[scale_index - 1].values.len()
    }

    fn blocks_per_scale(&self) -> usize {
        1
    }

    fn scale_loss(&self, scale_index: usize, x: &[f64]) -> Result<(f64, f64)> {
        let t = &self.targets[scale_index - 1];
        let l2 = x
            .iter()
            .zip(&t.values)
            .map(|(p, t)| (p - t) * (p - t))
            .sum();
        Ok((l2, 0.0))
    }

    fn block_direction(
        &self,
        scale_index: usize,
        _block: usize,
        x: &[f64],
        direction: &mut [f64],
    ) -> Result<bool> {
        // half the gradient: the exact Newton direction for sum-of-squares
        let t = &self.targets[scale_index - 1];
        let mut any = false;
        for ((d, p), tv) in direction.iter_mut().zip(x).zip(&t.values) {
            *d = p - tv;
            any |= *d != 0.0;
        }
        Ok(any)
    }
}

fn descent_options(cfg: &ExperimentConfig) -> DescentOptions {
    DescentOptions {
        step_size: cfg.step_size,
        iterations: cfg.iterations,
        backtrack_factor: cfg.backtrack_factor,
        max_backtracks: cfg.max_backtracks,
        relative_tolerance: 1e-10,
    }
}

/// Clipped count: negative pixels are zeroed, per-scale sums added across
/// scales (the mixture components carry their weights, which sum to 1).
pub fn count_from_predictions(preds: &[DensityField]) -> f64 {
    preds
        .iter()
        .map(|p| p.values.iter().map(|v| v.max(0.0)).sum::<f64>())
        .sum()
}

/// Fits one scene under the configured loss and reports the clipped count.
pub fn fit_scene(
    scene: &AnnotatedScene,
    params: &ScaleParams,
    cfg: &ExperimentConfig,
) -> Result<FitResult> {
    let opts = descent_options(cfg);
    let outcome = match cfg.loss {
        LossKind::ScaleAware => {
            let problem = ScaleAwareProblem::build(scene, params, cfg)?;
            block_descent(&problem, &opts)?
        }
        LossKind::L2 => {
            let problem = L2Problem::build(scene, params)?;
            block_descent(&problem, &opts)?
        }
    };
    let predictions: Vec<DensityField> = outcome
        .solution
        .into_iter()
        .enumerate()
        .map(|(i, values)| {
            let dims = grid_for_scale(scene, params, i + 1);
            DensityField {
                scale_index: i + 1,
                width: dims.width,
                height: dims.height,
                values,
                nonnegative: false,
            }
        })
        .collect();
    Ok(FitResult {
        count: count_from_predictions(&predictions),
        trace: outcome.trace,
        cycles: outcome.cycles,
        predictions,
    })
}

/// Fits every scene (in parallel when `SACC_THREADS` allows) and assembles
/// the count report. Rows are ordered by scene index regardless of
/// completion order.
pub fn cmd_fit(cfg: &ExperimentConfig, scenes: &[AnnotatedScene]) -> Result<FitOutcome> {
    let params = cfg.scale_params()?;
    let results: Vec<Result<FitResult>> = thread_pool()
        .install(|| scenes.par_iter().map(|s| fit_scene(s, &params, cfg)).collect());
    let mut rows = Vec::with_capacity(scenes.len());
    let mut first_trace = Vec::new();
    for (index, (scene, result)) in scenes.iter().zip(results).enumerate() {
        let fit = result?;
        if index == 0 {
            first_trace = fit.trace.clone();
        }
        let true_count = scene.count() as f64;
        rows.push(SceneCount {
            index,
            true_count,
            predicted: fit.count,
            abs_error: (fit.count - true_count).abs(),
        });
    }
    Ok(FitOutcome {
        report: CountReport::from_rows(rows),
        first_trace,
    })
}

/// Loss-trace CSV (`step,scale,nll,reg,total`) for one fitted scene.
pub fn trace_csv(trace: &[TraceRow]) -> String {
    let mut out = String::from("step,scale,nll,reg,total\n");
    for r in trace {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            r.step, r.scale_index, r.nll, r.reg, r.total
        ));
    }
    out
}
