//! Ground-truth density rendering and the closed-form mean, variance, and
//! covariance of the noisy-annotation density model.
//!
//! A head at annotation `H` contributes an isotropic bivariate Gaussian
//! kernel of variance `beta_s` per scale. With annotation noise
//! `eps ~ N(0, alpha I)` the per-scale density vector is approximately
//! Gaussian; its mean convolves the kernel with the noise
//! (variance `alpha_s + beta_s`) and its second moment follows from the
//! Gaussian product rule:
//!
//! `E[phi(x_j) phi(x_k)] = N(q_j - q_k | 0, 2 beta I) *
//!                         N((q_j + q_k)/2 | 0, (beta/2 + alpha_s) I)`
//!
//! which at `j == k` reduces to the `1/(4 pi beta)` diagonal form. The
//! closed forms are validated against seeded Monte Carlo oracles in the
//! test suite.
//!
//! Summation order is fixed (annotation-major, then pixel) so parallel
//! callers see reproducible values.

use std::io::{BufRead, BufReader, Read, Write};

use nalgebra::DMatrix;

use crate::annotation::{positions_at_scale, AnnotatedScene, PositionKind, ScaleParams};
use crate::error::{Error, Result};

/// Largest pixel count for which a dense `J x J` covariance is built.
pub const MAX_DENSE_COV_PIXELS: usize = 4096;

/// Grid dimensions at one scale.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GridDims {
    pub width: usize,
    pub height: usize,
}

impl GridDims {
    pub fn new(width: usize, height: usize) -> Self {
        Self { width, height }
    }

    pub fn pixel_count(&self) -> usize {
        self.width * self.height
    }

    /// Pixel center for flat index `j` (row-major).
    #[inline]
    pub fn center(&self, j: usize) -> [f64; 2] {
        [(j % self.width) as f64, (j / self.width) as f64]
    }
}

/// Grid covering the scene at 1-based scale `s`: image dimensions divided by
/// `factor^(s-1)`, rounded up so every rescaled position stays inside.
pub fn grid_for_scale(scene: &AnnotatedScene, params: &ScaleParams, scale_index: usize) -> GridDims {
    let f = params.scale_factor(scale_index);
    GridDims::new(
        (scene.width() as f64 / f).ceil() as usize,
        (scene.height() as f64 / f).ceil() as usize,
    )
}

/// A per-scale grid of density values in heads per pixel area.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityField {
    pub scale_index: usize,
    pub width: usize,
    pub height: usize,
    pub values: Vec<f64>,
    /// True for rendered ground truth; free predictions under optimization
    /// may go negative and carry `false`.
    pub nonnegative: bool,
}

impl DensityField {
    pub fn zeros(scale_index: usize, dims: GridDims) -> Self {
        Self {
            scale_index,
            width: dims.width,
            height: dims.height,
            values: vec![0.0; dims.pixel_count()],
            nonnegative: true,
        }
    }

    pub fn dims(&self) -> GridDims {
        GridDims::new(self.width, self.height)
    }

    pub fn sum(&self) -> f64 {
        self.values.iter().sum()
    }

    /// Serializes as a `scale width height` header followed by one row of
    /// 17-significant-digit values per line.
    pub fn write_text<W: Write>(&self, mut out: W) -> Result<()> {
        use std::fmt::Write as _;
        let mut buf = String::new();
        writeln!(buf, "{} {} {}", self.scale_index, self.width, self.height).unwrap();
        for row in self.values.chunks(self.width) {
            for (i, v) in row.iter().enumerate() {
                if i > 0 {
                    buf.push(' ');
                }
                write!(buf, "{v:.16e}").unwrap();
            }
            buf.push('\n');
        }
        out.write_all(buf.as_bytes())?;
        Ok(())
    }

    pub fn read_text<R: Read>(input: R) -> Result<Self> {
        let mut lines = BufReader::new(input).lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::Parse("empty density file".into()))??;
        let mut it = header.split_whitespace();
        let mut field = |name: &str| -> Result<usize> {
            it.next()
                .ok_or_else(|| Error::Parse(format!("missing {name} in density header")))?
                .parse()
                .map_err(|e| Error::Parse(format!("bad {name}: {e}")))
        };
        let scale_index = field("scale")?;
        let width = field("width")?;
        let height = field("height")?;
        let mut values = Vec::with_capacity(width * height);
        for row in 0..height {
            let line = lines
                .next()
                .ok_or_else(|| Error::Parse(format!("density file truncated at row {row}")))??;
            for tok in line.split_whitespace() {
                values.push(
                    tok.parse::<f64>()
                        .map_err(|e| Error::Parse(format!("row {row}: {e}")))?,
                );
            }
        }
        if values.len() != width * height {
            return Err(Error::Parse(format!(
                "expected {} values, got {}",
                width * height,
                values.len()
            )));
        }
        let nonnegative = values.iter().all(|v| *v >= 0.0);
        Ok(Self {
            scale_index,
            width,
            height,
            values,
            nonnegative,
        })
    }
}

/// Gaussian approximation to the per-scale density vector: mean, dense
/// covariance, and the independently computed diagonal.
#[derive(Debug, Clone)]
pub struct GaussianApprox {
    pub scale_index: usize,
    pub dims: GridDims,
    pub mean: Vec<f64>,
    pub cov: DMatrix<f64>,
    pub diag_var: Vec<f64>,
}

/// Isotropic bivariate Gaussian kernel
/// `(1 / (2 pi v)) exp(-|q|^2 / (2 v))`, which integrates to 1 over the
/// plane so each head contributes unit count.
pub fn gaussian_kernel_2d(q: [f64; 2], variance: f64) -> Result<f64> {
    if !(variance > 0.0) || !variance.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "kernel variance must be positive and finite, got {variance}"
        )));
    }
    Ok(kernel2(q[0], q[1], variance))
}

#[inline]
pub(crate) fn kernel2(dx: f64, dy: f64, variance: f64) -> f64 {
    (-(dx * dx + dy * dy) / (2.0 * variance)).exp() / (std::f64::consts::TAU * variance)
}

/// Sum of unit-mass kernels with variance `beta_s` centered on the rescaled
/// annotation positions, evaluated at every pixel of the scene grid for
/// scale `s`.
pub fn render_density(
    scene: &AnnotatedScene,
    params: &ScaleParams,
    scale_index: usize,
    use_noisy: bool,
) -> Result<DensityField> {
    params.validate_scale(scale_index)?;
    let dims = grid_for_scale(scene, params, scale_index);
    let kind = if use_noisy {
        PositionKind::Noisy
    } else {
        PositionKind::True
    };
    let centers = positions_at_scale(scene, params, scale_index, kind);
    let values = kernel_sum(&centers, dims, params.beta(scale_index));
    Ok(DensityField {
        scale_index,
        width: dims.width,
        height: dims.height,
        values,
        nonnegative: true,
    })
}

/// Kernel sum on an explicit grid; used by the mixture and by oracles that
/// need margins around the scene.
pub fn render_density_on_grid(
    scene: &AnnotatedScene,
    params: &ScaleParams,
    scale_index: usize,
    dims: GridDims,
    use_noisy: bool,
) -> Result<DensityField> {
    params.validate_scale(scale_index)?;
    let kind = if use_noisy {
        PositionKind::Noisy
    } else {
        PositionKind::True
    };
    let centers = positions_at_scale(scene, params, scale_index, kind);
    let values = kernel_sum(&centers, dims, params.beta(scale_index));
    Ok(DensityField {
        scale_index,
        width: dims.width,
        height: dims.height,
        values,
        nonnegative: true,
    })
}

fn kernel_sum(centers: &[[f64; 2]], dims: GridDims, variance: f64) -> Vec<f64> {
    let mut values = vec![0.0; dims.pixel_count()];
    for c in centers {
        for (j, v) in values.iter_mut().enumerate() {
            let p = dims.center(j);
            *v += kernel2(p[0] - c[0], p[1] - c[1], variance);
        }
    }
    values
}

/// Per-scale weighted mixture components `D_s = w_s * render_s`. Component
/// `s` is evaluated on `grids[s-1]`.
pub fn mixture_density(
    scene: &AnnotatedScene,
    params: &ScaleParams,
    grids: &[GridDims],
    use_noisy: bool,
) -> Result<Vec<DensityField>> {
    if grids.len() != params.num_scales() {
        return Err(Error::ScaleCountMismatch {
            expected: params.num_scales(),
            got: grids.len(),
        });
    }
    let mut out = Vec::with_capacity(grids.len());
    for (i, dims) in grids.iter().enumerate() {
        let s = i + 1;
        let mut field = render_density_on_grid(scene, params, s, *dims, use_noisy)?;
        let w = params.weight(s);
        for v in &mut field.values {
            *v *= w;
        }
        out.push(field);
    }
    Ok(out)
}

/// Closed-form mean of the scale-`s` density vector:
/// `mu_s(x_j) = w_s sum_i N(x_j - H_i | 0, (alpha_s + beta_s) I)`.
pub fn approx_mean(
    scene: &AnnotatedScene,
    params: &ScaleParams,
    scale_index: usize,
    dims: GridDims,
    kind: PositionKind,
) -> Result<Vec<f64>> {
    params.validate_scale(scale_index)?;
    let centers = positions_at_scale(scene, params, scale_index, kind);
    let v = params.alpha_at(scale_index) + params.beta(scale_index);
    let w = params.weight(scale_index);
    let mut mean = vec![0.0; dims.pixel_count()];
    for c in &centers {
        for (j, m) in mean.iter_mut().enumerate() {
            let p = dims.center(j);
            *m += kernel2(p[0] - c[0], p[1] - c[1], v);
        }
    }
    for m in &mut mean {
        *m *= w;
    }
    Ok(mean)
}

/// Closed-form variance diagonal,
/// `sum_i [ w_s^2 / (4 pi beta_s) N(q_i | 0, (beta_s/2 + alpha_s) I)
///          - mu_i(x_j)^2 ]`,
/// coded independently of the general covariance path.
pub fn approx_diag_var(
    scene: &AnnotatedScene,
    params: &ScaleParams,
    scale_index: usize,
    dims: GridDims,
    kind: PositionKind,
) -> Result<Vec<f64>> {
    params.validate_scale(scale_index)?;
    let centers = positions_at_scale(scene, params, scale_index, kind);
    let beta = params.beta(scale_index);
    let alpha_s = params.alpha_at(scale_index);
    let w = params.weight(scale_index);
    let w2 = w * w;
    let peak = 1.0 / (2.0 * std::f64::consts::TAU * beta); // N(0 | 0, 2 beta I)
    let mut diag = vec![0.0; dims.pixel_count()];
    for c in &centers {
        for (j, d) in diag.iter_mut().enumerate() {
            let p = dims.center(j);
            let qx = p[0] - c[0];
            let qy = p[1] - c[1];
            let second = w2 * peak * kernel2(qx, qy, beta / 2.0 + alpha_s);
            let mu_i = w * kernel2(qx, qy, alpha_s + beta);
            *d += second - mu_i * mu_i;
        }
    }
    Ok(diag)
}

/// Second-moment factor `E[phi(x_j) phi(x_k)]` for one annotation, from the
/// Gaussian product rule.
#[inline]
fn omega(qjx: f64, qjy: f64, qkx: f64, qky: f64, beta: f64, alpha_s: f64) -> f64 {
    kernel2(qjx - qkx, qjy - qky, 2.0 * beta)
        * kernel2(0.5 * (qjx + qkx), 0.5 * (qjy + qky), 0.5 * beta + alpha_s)
}

/// Dense covariance of the scale-`s` density vector together with its mean
/// and the independently coded diagonal. Guarded to
/// [`MAX_DENSE_COV_PIXELS`]; larger grids should restrict to selected
/// pixels via [`approx_cov_selected`].
pub fn approx_cov(
    scene: &AnnotatedScene,
    params: &ScaleParams,
    scale_index: usize,
    dims: GridDims,
    kind: PositionKind,
) -> Result<GaussianApprox> {
    params.validate_scale(scale_index)?;
    let n_px = dims.pixel_count();
    if n_px > MAX_DENSE_COV_PIXELS {
        return Err(Error::CovGridTooLarge {
            pixels: n_px,
            limit: MAX_DENSE_COV_PIXELS,
        });
    }
    let centers = positions_at_scale(scene, params, scale_index, kind);
    let beta = params.beta(scale_index);
    let alpha_s = params.alpha_at(scale_index);
    let w = params.weight(scale_index);
    let mut cov = DMatrix::zeros(n_px, n_px);
    for c in &centers {
        for j in 0..n_px {
            let pj = dims.center(j);
            let qjx = pj[0] - c[0];
            let qjy = pj[1] - c[1];
            let mu_j = w * kernel2(qjx, qjy, alpha_s + beta);
            for k in j..n_px {
                let pk = dims.center(k);
                let qkx = pk[0] - c[0];
                let qky = pk[1] - c[1];
                let mu_k = w * kernel2(qkx, qky, alpha_s + beta);
                let term = w * w * omega(qjx, qjy, qkx, qky, beta, alpha_s) - mu_j * mu_k;
                cov[(j, k)] += term;
                if k != j {
                    cov[(k, j)] += term;
                }
            }
        }
    }
    Ok(GaussianApprox {
        scale_index,
        dims,
        mean: approx_mean(scene, params, scale_index, dims, kind)?,
        cov,
        diag_var: approx_diag_var(scene, params, scale_index, dims, kind)?,
    })
}

/// Covariance restricted to `selected x selected` without materializing the
/// full grid, for the fit path on larger grids.
pub fn approx_cov_selected(
    scene: &AnnotatedScene,
    params: &ScaleParams,
    scale_index: usize,
    dims: GridDims,
    selected: &[usize],
    kind: PositionKind,
) -> Result<DMatrix<f64>> {
    params.validate_scale(scale_index)?;
    let n_px = dims.pixel_count();
    if selected.iter().any(|&j| j >= n_px) {
        return Err(Error::GridMismatch(format!(
            "selected index out of range for a {}x{} grid",
            dims.width, dims.height
        )));
    }
    let centers = positions_at_scale(scene, params, scale_index, kind);
    let beta = params.beta(scale_index);
    let alpha_s = params.alpha_at(scale_index);
    let w = params.weight(scale_index);
    let m = selected.len();
    let mut cov = DMatrix::zeros(m, m);
    for c in &centers {
        for (a, &j) in selected.iter().enumerate() {
            let pj = dims.center(j);
            let qjx = pj[0] - c[0];
            let qjy = pj[1] - c[1];
            let mu_j = w * kernel2(qjx, qjy, alpha_s + beta);
            for (b, &k) in selected.iter().enumerate().skip(a) {
                let pk = dims.center(k);
                let qkx = pk[0] - c[0];
                let qky = pk[1] - c[1];
                let mu_k = w * kernel2(qkx, qky, alpha_s + beta);
                let term = w * w * omega(qjx, qjy, qkx, qky, beta, alpha_s) - mu_j * mu_k;
                cov[(a, b)] += term;
                if b != a {
                    cov[(b, a)] += term;
                }
            }
        }
    }
    Ok(cov)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::annotation::{Annotation, ScaleParams};
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

    #[test]
    fn kernel_peaks() {
        let p = gaussian_kernel_2d([0.0, 0.0], 1.0).unwrap();
        assert_relative_eq!(p, 1.0 / std::f64::consts::TAU, max_relative = 1e-15);
        let p8 = gaussian_kernel_2d([0.0, 0.0], 8.0).unwrap();
        assert_relative_eq!(p8, 1.0 / (16.0 * std::f64::consts::PI), max_relative = 1e-15);
        assert!(gaussian_kernel_2d([0.0, 0.0], 0.0).is_err());
        assert!(gaussian_kernel_2d([0.0, 0.0], -1.0).is_err());
    }

    #[test]
    fn kernel_unit_mass_on_large_grid() {
        // Quadrature with unit pixel spacing over a 200x200 grid centered on
        // the kernel.
        let mut sum = 0.0;
        for y in -100..100 {
            for x in -100..100 {
                sum += gaussian_kernel_2d([x as f64 + 0.5, y as f64 + 0.5], 8.0).unwrap();
            }
        }
        assert!((sum - 1.0).abs() < 1e-6, "grid mass {sum}");
    }

    #[test]
    fn render_empty_scene_is_zero() {
        let scene = AnnotatedScene::new(16, 16, vec![]).unwrap();
        let params = ScaleParams::new(8.0, vec![4.0], vec![1.0]).unwrap();
        let field = render_density(&scene, &params, 1, false).unwrap();
        assert!(field.values.iter().all(|v| *v == 0.0));
        assert_eq!(field.sum(), 0.0);
    }

    #[test]
    fn render_single_head_unit_mass() {
        // 6 sqrt(beta) = 12 pixel margin on all sides.
        let scene = one_head_scene(41, 41, 20.0, 20.0);
        let params = ScaleParams::new(8.0, vec![4.0], vec![1.0]).unwrap();
        let field = render_density(&scene, &params, 1, false).unwrap();
        assert!((field.sum() - 1.0).abs() < 1e-3, "mass {}", field.sum());
        assert!(field.values.iter().all(|v| *v >= 0.0));
    }

    #[test]
    fn render_coincident_heads_double_exactly() {
        let a = Annotation {
            true_pos: [12.25, 9.5],
            noisy_pos: [12.25, 9.5],
            head_size: 8.0,
        };
        let one = AnnotatedScene::new(24, 24, vec![a.clone()]).unwrap();
        let two = AnnotatedScene::new(24, 24, vec![a.clone(), a]).unwrap();
        let params = ScaleParams::new(8.0, vec![4.0], vec![1.0]).unwrap();
        let f1 = render_density(&one, &params, 1, false).unwrap();
        let f2 = render_density(&two, &params, 1, false).unwrap();
        for (x, y) in f1.values.iter().zip(&f2.values) {
            assert_eq!(*y, 2.0 * *x);
        }
    }

    #[test]
    fn render_additive_over_subsets() {
        let mk = |x: f64, y: f64| Annotation {
            true_pos: [x, y],
            noisy_pos: [x, y],
            head_size: 8.0,
        };
        let a = vec![mk(3.0, 4.0), mk(10.0, 2.0)];
        let b = vec![mk(7.5, 12.0), mk(1.0, 1.0), mk(14.0, 14.0)];
        let mut both = a.clone();
        both.extend(b.clone());
        let params = ScaleParams::new(8.0, vec![4.0], vec![1.0]).unwrap();
        let fa = render_density(&AnnotatedScene::new(16, 16, a).unwrap(), &params, 1, false).unwrap();
        let fb = render_density(&AnnotatedScene::new(16, 16, b).unwrap(), &params, 1, false).unwrap();
        let fab =
            render_density(&AnnotatedScene::new(16, 16, both).unwrap(), &params, 1, false).unwrap();
        for j in 0..fab.values.len() {
            assert_relative_eq!(fab.values[j], fa.values[j] + fb.values[j], max_relative = 1e-12);
        }
    }

    #[test]
    fn mixture_single_scale_equals_render() {
        let scene = one_head_scene(24, 24, 11.0, 12.0);
        let params = ScaleParams::new(8.0, vec![4.0], vec![1.0]).unwrap();
        let grids = [grid_for_scale(&scene, &params, 1)];
        let mix = mixture_density(&scene, &params, &grids, false).unwrap();
        let render = render_density(&scene, &params, 1, false).unwrap();
        assert_eq!(mix[0].values, render.values);
    }

    #[test]
    fn mixture_component_masses_follow_weights() {
        // One head centered on wide-margin grids at every scale so all mass
        // is captured: component integrals must equal w_s within 1e-2.
        let scene = one_head_scene(97, 97, 48.0, 48.0);
        for weights in [vec![1.0 / 3.0; 3], vec![0.5, 0.3, 0.2]] {
            let params = ScaleParams::new(8.0, vec![8.0, 4.0, 2.0], weights.clone()).unwrap();
            let grids: Vec<GridDims> = (1..=3).map(|s| grid_for_scale(&scene, &params, s)).collect();
            let mix = mixture_density(&scene, &params, &grids, false).unwrap();
            let total: f64 = mix.iter().map(|f| f.sum()).sum();
            assert!((total - 1.0).abs() < 1e-2, "total {total}");
            for (f, w) in mix.iter().zip(&weights) {
                assert!((f.sum() - w).abs() < 1e-2, "component {} vs {w}", f.sum());
            }
        }
    }

    #[test]
    fn approx_mean_noise_free_matches_weighted_render() {
        let scene = one_head_scene(24, 24, 10.0, 13.0);
        let params = ScaleParams::new(0.0, vec![8.0, 4.0], vec![0.6, 0.4]).unwrap();
        for s in 1..=2 {
            let dims = grid_for_scale(&scene, &params, s);
            let mean = approx_mean(&scene, &params, s, dims, PositionKind::True).unwrap();
            let render = render_density(&scene, &params, s, false).unwrap();
            let w = params.weight(s);
            for (m, r) in mean.iter().zip(&render.values) {
                assert_eq!(*m, w * r);
            }
        }
    }

    #[test]
    fn approx_mean_peak_value() {
        // One head, alpha = 8, beta_s = 8: querying at the head position
        // gives w / (2 pi * 16).
        let scene = one_head_scene(33, 33, 16.0, 16.0);
        let params = ScaleParams::new(8.0, vec![8.0], vec![1.0]).unwrap();
        let dims = grid_for_scale(&scene, &params, 1);
        let mean = approx_mean(&scene, &params, 1, dims, PositionKind::True).unwrap();
        let at_head = mean[16 * 33 + 16];
        assert_relative_eq!(
            at_head,
            1.0 / (std::f64::consts::TAU * 16.0),
            max_relative = 1e-12
        );
    }

    #[test]
    fn cov_zero_when_alpha_zero() {
        let scene = AnnotatedScene::new(
            12,
            12,
            vec![
                Annotation {
                    true_pos: [4.0, 4.0],
                    noisy_pos: [4.0, 4.0],
                    head_size: 8.0,
                },
                Annotation {
                    true_pos: [8.0, 7.0],
                    noisy_pos: [8.0, 7.0],
                    head_size: 8.0,
                },
            ],
        )
        .unwrap();
        let params = ScaleParams::new(0.0, vec![4.0], vec![1.0]).unwrap();
        let dims = grid_for_scale(&scene, &params, 1);
        let approx = approx_cov(&scene, &params, 1, dims, PositionKind::True).unwrap();
        let max_abs = approx.cov.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        assert!(max_abs < 1e-12, "max |cov| = {max_abs}");
    }

    #[test]
    fn cov_diagonal_matches_independent_formula() {
        let scene = AnnotatedScene::new(
            10,
            10,
            vec![
                Annotation {
                    true_pos: [3.0, 3.5],
                    noisy_pos: [3.0, 3.5],
                    head_size: 8.0,
                },
                Annotation {
                    true_pos: [6.5, 6.0],
                    noisy_pos: [6.5, 6.0],
                    head_size: 8.0,
                },
                Annotation {
                    true_pos: [5.0, 2.0],
                    noisy_pos: [5.0, 2.0],
                    head_size: 8.0,
                },
            ],
        )
        .unwrap();
        let params = ScaleParams::new(8.0, vec![8.0, 4.0], vec![0.5, 0.5]).unwrap();
        for s in 1..=2 {
            let dims = grid_for_scale(&scene, &params, s);
            let approx = approx_cov(&scene, &params, s, dims, PositionKind::True).unwrap();
            for j in 0..dims.pixel_count() {
                let general = approx.cov[(j, j)];
                let direct = approx.diag_var[j];
                let denom = direct.abs().max(1e-300);
                assert!(
                    ((general - direct) / denom).abs() < 1e-10,
                    "scale {s} pixel {j}: {general} vs {direct}"
                );
            }
        }
    }

    #[test]
    fn cov_symmetric_and_mean_nonnegative() {
        let scene = one_head_scene(9, 9, 4.2, 3.8);
        let params = ScaleParams::new(8.0, vec![8.0], vec![1.0]).unwrap();
        let dims = grid_for_scale(&scene, &params, 1);
        let approx = approx_cov(&scene, &params, 1, dims, PositionKind::True).unwrap();
        for j in 0..dims.pixel_count() {
            assert!(approx.mean[j] >= 0.0);
            for k in 0..dims.pixel_count() {
                assert_eq!(approx.cov[(j, k)], approx.cov[(k, j)]);
            }
        }
    }

    #[test]
    fn cov_guard_rejects_large_grids() {
        let scene = one_head_scene(100, 100, 50.0, 50.0);
        let params = ScaleParams::new(8.0, vec![8.0], vec![1.0]).unwrap();
        let err = approx_cov(
            &scene,
            &params,
            1,
            GridDims::new(100, 100),
            PositionKind::True,
        )
        .unwrap_err();
        assert!(matches!(err, Error::CovGridTooLarge { pixels: 10000, limit }
            if limit == MAX_DENSE_COV_PIXELS));
    }

    #[test]
    fn cov_selected_matches_dense_submatrix() {
        let scene = one_head_scene(8, 8, 3.7, 4.1);
        let params = ScaleParams::new(8.0, vec![8.0], vec![1.0]).unwrap();
        let dims = grid_for_scale(&scene, &params, 1);
        let approx = approx_cov(&scene, &params, 1, dims, PositionKind::True).unwrap();
        let selected = [3usize, 17, 20, 41, 60];
        let sub =
            approx_cov_selected(&scene, &params, 1, dims, &selected, PositionKind::True).unwrap();
        for (a, &j) in selected.iter().enumerate() {
            for (b, &k) in selected.iter().enumerate() {
                assert_relative_eq!(sub[(a, b)], approx.cov[(j, k)], max_relative = 1e-12);
            }
        }
    }

    #[test]
    fn density_field_round_trip() {
        let scene = one_head_scene(12, 9, 5.0, 4.0);
        let params = ScaleParams::new(8.0, vec![4.0], vec![1.0]).unwrap();
        let field = render_density(&scene, &params, 1, false).unwrap();
        let mut bytes = Vec::new();
        field.write_text(&mut bytes).unwrap();
        let back = DensityField::read_text(&bytes[..]).unwrap();
        assert_eq!(field, back);
    }
}
