//! The count regularizer, the multi-scale scale-aware loss, analytic
//! gradients with respect to the predicted maps, and the L2 baseline.
//!
//! The regularizer soft-assigns predicted mass to heads through kernel
//! ratios built at the noisy annotations (the true positions are unknown at
//! training time) and penalizes each head's assigned mass away from its
//! target. As a standalone operation the target mass is 1; inside the total
//! loss each scale component carries its mixture weight, so the per-scale
//! prediction is measured against a target of `w_s` per head (equivalently
//! the regularizer is applied to the `1/w_s`-normalized component).

use crate::annotation::{positions_at_scale, AnnotatedScene, PositionKind, ScaleParams};
use crate::density::{kernel2, DensityField, GridDims};
use crate::error::{Error, Result};
use crate::lowrank::{neg_log_likelihood, restrict_residual, RankMApprox};

/// Denominator guard in the soft-assignment ratio; keeps pixels far from
/// every head contributing their (tiny) kernel-weighted mass instead of 0/0.
pub const SOFT_ASSIGN_EPS: f64 = 1e-12;

/// Per-scale loss terms. `total` is the sum of every entry.
#[derive(Debug, Clone, PartialEq)]
pub struct LossBreakdown {
    pub per_scale_nll: Vec<f64>,
    pub per_scale_reg: Vec<f64>,
    pub total: f64,
}

impl LossBreakdown {
    fn new(per_scale_nll: Vec<f64>, per_scale_reg: Vec<f64>) -> Self {
        let total = per_scale_nll.iter().sum::<f64>() + per_scale_reg.iter().sum::<f64>();
        Self {
            per_scale_nll,
            per_scale_reg,
            total,
        }
    }
}

/// Precomputed per-scale moment data for the scale-aware loss. `approx` is
/// `None` when the scene has no annotation randomness to model (empty scene
/// or zero variance), in which case the NLL term is 0.
#[derive(Debug, Clone)]
pub struct ScalePrecomp {
    pub mean: Vec<f64>,
    pub approx: Option<RankMApprox>,
}

/// Soft-assignment ratios `r_ij = phi_i(x_j) / (sum_k phi_k(x_j) + eps)`
/// for one scale, head-major.
#[derive(Debug, Clone)]
pub struct SoftAssign {
    ratios: Vec<f64>,
    num_heads: usize,
    num_pixels: usize,
}

impl SoftAssign {
    pub fn new(
        scene: &AnnotatedScene,
        params: &ScaleParams,
        scale_index: usize,
        dims: GridDims,
    ) -> Result<Self> {
        params.validate_scale(scale_index)?;
        let centers = positions_at_scale(scene, params, scale_index, PositionKind::Noisy);
        let beta = params.beta(scale_index);
        let n = centers.len();
        let j_s = dims.pixel_count();
        let mut ratios = vec![0.0; n * j_s];
        let mut denom = vec![SOFT_ASSIGN_EPS; j_s];
        for (i, c) in centers.iter().enumerate() {
            for j in 0..j_s {
                let p = dims.center(j);
                let phi = kernel2(p[0] - c[0], p[1] - c[1], beta);
                ratios[i * j_s + j] = phi;
                denom[j] += phi;
            }
        }
        for i in 0..n {
            for j in 0..j_s {
                ratios[i * j_s + j] /= denom[j];
            }
        }
        Ok(Self {
            ratios,
            num_heads: n,
            num_pixels: j_s,
        })
    }

    pub fn num_heads(&self) -> usize {
        self.num_heads
    }

    fn row(&self, i: usize) -> &[f64] {
        &self.ratios[i * self.num_pixels..(i + 1) * self.num_pixels]
    }

    /// Per-head soft-assigned masses `m_i = sum_j pred_j r_ij`.
    pub fn masses(&self, pred: &[f64]) -> Vec<f64> {
        (0..self.num_heads)
            .map(|i| {
                self.row(i)
                    .iter()
                    .zip(pred)
                    .map(|(r, p)| r * p)
                    .sum::<f64>()
            })
            .collect()
    }

    /// `sum_i |m_i / target - 1|`.
    pub fn penalty(&self, pred: &[f64], target_mass: f64) -> f64 {
        if !(target_mass > 0.0) {
            return 0.0;
        }
        self.masses(pred)
            .iter()
            .map(|m| (m / target_mass - 1.0).abs())
            .sum()
    }

    /// Adds the subgradient `sum_i sign(m_i/target - 1) r_ij / target` into
    /// `grad`. `sign(0) = 0`.
    pub fn add_penalty_gradient(&self, pred: &[f64], target_mass: f64, grad: &mut [f64]) {
        if !(target_mass > 0.0) {
            return;
        }
        let masses = self.masses(pred);
        for (i, m) in masses.iter().enumerate() {
            let rel = m / target_mass - 1.0;
            let s = if rel > 0.0 {
                1.0
            } else if rel < 0.0 {
                -1.0
            } else {
                0.0
            };
            if s == 0.0 {
                continue;
            }
            let coeff = s / target_mass;
            for (g, r) in grad.iter_mut().zip(self.row(i)) {
                *g += coeff * r;
            }
        }
    }
}

/// Count regularizer for one scale: each head's soft-assigned mass of
/// `pred` is penalized away from 1.
pub fn regularizer(
    pred: &DensityField,
    scene: &AnnotatedScene,
    params: &ScaleParams,
    scale_index: usize,
) -> Result<f64> {
    let assign = SoftAssign::new(scene, params, scale_index, pred.dims())?;
    Ok(assign.penalty(&pred.values, 1.0))
}

fn check_scale_counts(preds: &[DensityField], params: &ScaleParams, pre: &[ScalePrecomp]) -> Result<()> {
    if preds.len() != params.num_scales() {
        return Err(Error::ScaleCountMismatch {
            expected: params.num_scales(),
            got: preds.len(),
        });
    }
    if pre.len() != params.num_scales() {
        return Err(Error::ScaleCountMismatch {
            expected: params.num_scales(),
            got: pre.len(),
        });
    }
    Ok(())
}

/// Multi-scale scale-aware loss: per-scale rank-M NLL plus the per-scale
/// count regularizer with target mass `w_s`.
pub fn total_loss(
    preds: &[DensityField],
    scene: &AnnotatedScene,
    params: &ScaleParams,
    pre: &[ScalePrecomp],
) -> Result<LossBreakdown> {
    check_scale_counts(preds, params, pre)?;
    let mut nll = Vec::with_capacity(preds.len());
    let mut reg = Vec::with_capacity(preds.len());
    for (i, (pred, pc)) in preds.iter().zip(pre).enumerate() {
        let s = i + 1;
        nll.push(match &pc.approx {
            Some(approx) => neg_log_likelihood(pred, &pc.mean, approx)?,
            None => 0.0,
        });
        let assign = SoftAssign::new(scene, params, s, pred.dims())?;
        reg.push(assign.penalty(&pred.values, params.weight(s)));
    }
    Ok(LossBreakdown::new(nll, reg))
}

/// Analytic gradient of [`total_loss`] with respect to each predicted map.
/// The NLL part scatters `2 (Sigma_hat + lambda I)^{-1} d` onto the selected
/// pixels; unselected pixels carry only the regularizer subgradient.
pub fn loss_gradient(
    preds: &[DensityField],
    scene: &AnnotatedScene,
    params: &ScaleParams,
    pre: &[ScalePrecomp],
) -> Result<Vec<DensityField>> {
    check_scale_counts(preds, params, pre)?;
    let mut out = Vec::with_capacity(preds.len());
    for (i, (pred, pc)) in preds.iter().zip(pre).enumerate() {
        let s = i + 1;
        let mut grad = vec![0.0; pred.values.len()];
        if let Some(approx) = &pc.approx {
            let d = restrict_residual(pred, &pc.mean, approx)?;
            let inv = approx.apply_inverse(&d)?;
            for (&j, v) in approx.selected().iter().zip(&inv) {
                grad[j] += 2.0 * v;
            }
        }
        let assign = SoftAssign::new(scene, params, s, pred.dims())?;
        assign.add_penalty_gradient(&pred.values, params.weight(s), &mut grad);
        if grad.iter().any(|g| !g.is_finite()) {
            return Err(Error::InvalidParameter(
                "non-finite loss gradient".into(),
            ));
        }
        out.push(DensityField {
            scale_index: pred.scale_index,
            width: pred.width,
            height: pred.height,
            values: grad,
            nonnegative: false,
        });
    }
    Ok(out)
}

/// Sum of squared differences between two fields on the same grid.
pub fn baseline_l2_loss(pred: &DensityField, target: &DensityField) -> Result<f64> {
    check_same_grid(pred, target)?;
    Ok(pred
        .values
        .iter()
        .zip(&target.values)
        .map(|(p, t)| (p - t) * (p - t))
        .sum())
}

/// Gradient of [`baseline_l2_loss`] with respect to `pred`: `2 (pred - target)`.
pub fn baseline_l2_gradient(pred: &DensityField, target: &DensityField) -> Result<DensityField> {
    check_same_grid(pred, target)?;
    Ok(DensityField {
        scale_index: pred.scale_index,
        width: pred.width,
        height: pred.height,
        values: pred
            .values
            .iter()
            .zip(&target.values)
            .map(|(p, t)| 2.0 * (p - t))
            .collect(),
        nonnegative: false,
    })
}

fn check_same_grid(pred: &DensityField, target: &DensityField) -> Result<()> {
    if pred.width != target.width || pred.height != target.height {
        return Err(Error::GridMismatch(format!(
            "{}x{} prediction vs {}x{} target",
            pred.width, pred.height, target.width, target.height
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::annotation::Annotation;
    use crate::density::{approx_cov, grid_for_scale, render_density};
    use crate::lowrank::{select_pixels, truncate_cov_default_jitter};
    use approx::assert_relative_eq;

    fn one_head_scene(w: u32, h: u32, x: f64, y: f64) -> AnnotatedScene {
        AnnotatedScene::new(
            w,
            h,
            vec![Annotation {
                true_pos: [x, y],
                noisy_pos: [x, y],
                head_size: 8.0,
            }],
        )
        .unwrap()
    }

    fn scene_heads(w: u32, h: u32, pts: &[(f64, f64)]) -> AnnotatedScene {
        AnnotatedScene::new(
            w,
            h,
            pts.iter()
                .map(|&(x, y)| Annotation {
                    true_pos: [x, y],
                    noisy_pos: [x, y],
                    head_size: 8.0,
                })
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn regularizer_near_zero_for_exact_render() {
        // single well-separated head: soft mass of its own render is ~1
        let scene = one_head_scene(41, 41, 20.0, 20.0);
        let params = ScaleParams::new(8.0, vec![4.0], vec![1.0]).unwrap();
        let pred = render_density(&scene, &params, 1, true).unwrap();
        let r = regularizer(&pred, &scene, &params, 1).unwrap();
        assert!(r <= 2e-3, "regularizer {r}");
    }

    #[test]
    fn regularizer_counts_missing_heads() {
        let scene = scene_heads(24, 24, &[(5.0, 5.0), (12.0, 16.0), (20.0, 8.0)]);
        let params = ScaleParams::new(8.0, vec![4.0], vec![1.0]).unwrap();
        let zeros = DensityField::zeros(1, grid_for_scale(&scene, &params, 1));
        let r = regularizer(&zeros, &scene, &params, 1).unwrap();
        assert_eq!(r, 3.0, "all-zero prediction leaves |0 - 1| per head");
    }

    #[test]
    fn regularizer_doubled_render_is_one() {
        let scene = one_head_scene(41, 41, 20.0, 20.0);
        let params = ScaleParams::new(8.0, vec![4.0], vec![1.0]).unwrap();
        let mut pred = render_density(&scene, &params, 1, true).unwrap();
        for v in &mut pred.values {
            *v *= 2.0;
        }
        let r = regularizer(&pred, &scene, &params, 1).unwrap();
        assert!((r - 1.0).abs() <= 2e-3, "regularizer {r}");
    }

    fn precompute(scene: &AnnotatedScene, params: &ScaleParams) -> Vec<ScalePrecomp> {
        (1..=params.num_scales())
            .map(|s| {
                let dims = grid_for_scale(scene, params, s);
                let approx = approx_cov(scene, params, s, dims, PositionKind::Noisy).unwrap();
                let rank_m = if scene.count() == 0 || params.alpha() == 0.0 {
                    None
                } else {
                    let sel = select_pixels(&approx.diag_var, 0.8).unwrap();
                    Some(truncate_cov_default_jitter(&approx.cov, &sel, sel.len()).unwrap())
                };
                ScalePrecomp {
                    mean: approx.mean,
                    approx: rank_m,
                }
            })
            .collect()
    }

    fn mean_fields(pre: &[ScalePrecomp], scene: &AnnotatedScene, params: &ScaleParams) -> Vec<DensityField> {
        pre.iter()
            .enumerate()
            .map(|(i, pc)| {
                let dims = grid_for_scale(scene, params, i + 1);
                DensityField {
                    scale_index: i + 1,
                    width: dims.width,
                    height: dims.height,
                    values: pc.mean.clone(),
                    nonnegative: false,
                }
            })
            .collect()
    }

    #[test]
    fn total_loss_at_mean_is_pure_regularizer() {
        let scene = scene_heads(16, 16, &[(4.0, 5.0), (11.0, 9.0)]);
        let params = ScaleParams::new(8.0, vec![8.0, 4.0], vec![0.5, 0.5]).unwrap();
        let pre = precompute(&scene, &params);
        let preds = mean_fields(&pre, &scene, &params);
        let breakdown = total_loss(&preds, &scene, &params, &pre).unwrap();
        assert_eq!(breakdown.per_scale_nll, vec![0.0, 0.0]);
        assert!(breakdown.per_scale_reg.iter().all(|r| *r > 0.0));
        assert_eq!(
            breakdown.total,
            breakdown.per_scale_reg.iter().sum::<f64>()
        );
    }

    #[test]
    fn total_loss_empty_scene_zero_prediction() {
        let scene = AnnotatedScene::new(16, 16, vec![]).unwrap();
        let params = ScaleParams::new(8.0, vec![8.0, 4.0], vec![0.5, 0.5]).unwrap();
        let pre: Vec<ScalePrecomp> = (1..=2)
            .map(|s| ScalePrecomp {
                mean: vec![0.0; grid_for_scale(&scene, &params, s).pixel_count()],
                approx: None,
            })
            .collect();
        let preds: Vec<DensityField> = (1..=2)
            .map(|s| DensityField::zeros(s, grid_for_scale(&scene, &params, s)))
            .collect();
        let breakdown = total_loss(&preds, &scene, &params, &pre).unwrap();
        assert_eq!(breakdown.total, 0.0);
    }

    #[test]
    fn total_loss_rejects_scale_mismatch() {
        let scene = scene_heads(16, 16, &[(8.0, 8.0)]);
        let params = ScaleParams::new(8.0, vec![8.0, 4.0], vec![0.5, 0.5]).unwrap();
        let pre = precompute(&scene, &params);
        let preds = vec![DensityField::zeros(1, grid_for_scale(&scene, &params, 1))];
        assert!(matches!(
            total_loss(&preds, &scene, &params, &pre),
            Err(Error::ScaleCountMismatch { .. })
        ));
    }

    #[test]
    fn gradient_at_mean_is_pure_regularizer_part() {
        let scene = scene_heads(16, 16, &[(4.0, 5.0), (11.0, 9.0)]);
        let params = ScaleParams::new(8.0, vec![8.0], vec![1.0]).unwrap();
        let pre = precompute(&scene, &params);
        let preds = mean_fields(&pre, &scene, &params);
        let grads = loss_gradient(&preds, &scene, &params, &pre).unwrap();
        let assign = SoftAssign::new(&scene, &params, 1, preds[0].dims()).unwrap();
        let mut want = vec![0.0; preds[0].values.len()];
        assign.add_penalty_gradient(&preds[0].values, params.weight(1), &mut want);
        for (g, w) in grads[0].values.iter().zip(&want) {
            assert_eq!(*g, *w, "quadratic gradient must vanish at the mean");
        }
    }

    #[test]
    fn nll_gradient_doubles_with_residual() {
        let scene = scene_heads(12, 12, &[(4.0, 4.0), (8.0, 7.0)]);
        let params = ScaleParams::new(8.0, vec![8.0], vec![1.0]).unwrap();
        let pre = precompute(&scene, &params);
        let dims = grid_for_scale(&scene, &params, 1);
        let mk = |scale: f64| {
            vec![DensityField {
                scale_index: 1,
                width: dims.width,
                height: dims.height,
                values: pre[0]
                    .mean
                    .iter()
                    .enumerate()
                    .map(|(j, m)| m + scale * ((j % 7) as f64 - 3.0) * 1e-4)
                    .collect(),
                nonnegative: false,
            }]
        };
        let g1 = loss_gradient(&mk(1.0), &scene, &params, &pre).unwrap();
        let g2 = loss_gradient(&mk(2.0), &scene, &params, &pre).unwrap();
        let sel = pre[0].approx.as_ref().unwrap().selected();
        let assign = SoftAssign::new(&scene, &params, 1, dims).unwrap();
        let mut reg1 = vec![0.0; dims.pixel_count()];
        let mut reg2 = vec![0.0; dims.pixel_count()];
        assign.add_penalty_gradient(&mk(1.0)[0].values, 1.0, &mut reg1);
        assign.add_penalty_gradient(&mk(2.0)[0].values, 1.0, &mut reg2);
        for &j in sel {
            let nll1 = g1[0].values[j] - reg1[j];
            let nll2 = g2[0].values[j] - reg2[j];
            assert_relative_eq!(nll2, 2.0 * nll1, max_relative = 1e-9);
        }
    }

    #[test]
    fn l2_loss_identities() {
        let scene = one_head_scene(12, 12, 6.0, 6.0);
        let params = ScaleParams::new(8.0, vec![4.0], vec![1.0]).unwrap();
        let a = render_density(&scene, &params, 1, false).unwrap();
        assert_eq!(baseline_l2_loss(&a, &a).unwrap(), 0.0);
        let mut b = a.clone();
        b.values[17] += 1.0;
        assert_eq!(baseline_l2_loss(&a, &b).unwrap(), 1.0);
        let small = DensityField::zeros(1, GridDims::new(4, 4));
        assert!(matches!(
            baseline_l2_loss(&a, &small),
            Err(Error::GridMismatch(_))
        ));
    }

    #[test]
    fn l2_loss_matches_dot_product_oracle() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(8);
        let dims = GridDims::new(8, 8);
        let a = DensityField {
            scale_index: 1,
            width: 8,
            height: 8,
            values: (0..64).map(|_| rng.gen_range(-1.0..1.0)).collect(),
            nonnegative: false,
        };
        let b = DensityField {
            scale_index: 1,
            width: 8,
            height: 8,
            values: (0..64).map(|_| rng.gen_range(-1.0..1.0)).collect(),
            nonnegative: false,
        };
        let want: f64 = (0..dims.pixel_count())
            .map(|j| {
                let d = a.values[j] - b.values[j];
                d * d
            })
            .sum();
        assert_relative_eq!(
            baseline_l2_loss(&a, &b).unwrap(),
            want,
            max_relative = 1e-12
        );
    }
}
