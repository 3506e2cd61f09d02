//! Parameter sweeps over the model's alpha and beta_1 on a shared scene set.

use rayon::prelude::*;

use crate::error::Result;
use crate::harness::config::{Beta1Setting, ExperimentConfig};
use crate::harness::fit::{fit_scene, CountReport, SceneCount};
use crate::harness::synth::generate_scene;
use crate::harness::thread_pool;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepRow {
    pub alpha: f64,
    pub beta1: f64,
    pub mae: f64,
}

/// Runs a fit per `(alpha, beta1)` grid point over one shared scene set
/// drawn from the config (`sweep_scenes` scenes). Rows come back sorted by
/// alpha, then beta1.
pub fn cmd_sweep(cfg: &ExperimentConfig) -> Result<Vec<SweepRow>> {
    let scenes: Vec<_> = (0..cfg.sweep_scenes as u64)
        .map(|i| generate_scene(cfg, i))
        .collect::<Result<_>>()?;
    let mut grid: Vec<(f64, f64)> = Vec::new();
    for &alpha in &cfg.sweep_alphas {
        for &beta in &cfg.sweep_betas {
            grid.push((alpha, beta));
        }
    }
    let mut rows: Vec<SweepRow> = thread_pool().install(|| {
        grid.par_iter()
            .map(|&(alpha, beta1)| -> Result<SweepRow> {
                let params = cfg.scale_params_with(alpha, Beta1Setting::Explicit(beta1))?;
                let counts: Vec<SceneCount> = scenes
                    .iter()
                    .enumerate()
                    .map(|(index, scene)| -> Result<SceneCount> {
                        let fit = fit_scene(scene, &params, cfg)?;
                        let true_count = scene.count() as f64;
                        Ok(SceneCount {
                            index,
                            true_count,
                            predicted: fit.count,
                            abs_error: (fit.count - true_count).abs(),
                        })
                    })
                    .collect::<Result<_>>()?;
                Ok(SweepRow {
                    alpha,
                    beta1,
                    mae: CountReport::from_rows(counts).mae,
                })
            })
            .collect::<Result<_>>()
    })?;
    rows.sort_by(|a, b| a.alpha.total_cmp(&b.alpha).then(a.beta1.total_cmp(&b.beta1)));
    Ok(rows)
}

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from("alpha,beta1,mae\n");
    for r in rows {
        out.push_str(&format!("{},{},{}\n", r.alpha, r.beta1, r.mae));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::fit::cmd_fit;
    use crate::harness::synth::generate_scene;

    fn tiny_cfg() -> ExperimentConfig {
        ExperimentConfig {
            width: 12,
            height: 12,
            count_min: 3,
            count_max: 5,
            iterations: 40,
            sweep_scenes: 2,
            ..ExperimentConfig::default()
        }
    }

    #[test]
    fn single_point_sweep_matches_standalone_fit() {
        let mut cfg = tiny_cfg();
        cfg.sweep_alphas = vec![cfg.alpha];
        cfg.sweep_betas = vec![8.0];
        let rows = cmd_sweep(&cfg).unwrap();
        assert_eq!(rows.len(), 1);
        let scenes: Vec<_> = (0..cfg.sweep_scenes as u64)
            .map(|i| generate_scene(&cfg, i).unwrap())
            .collect();
        let fit = cmd_fit(&cfg, &scenes).unwrap();
        assert_eq!(rows[0].mae, fit.report.mae);
    }

    #[test]
    fn sweep_row_count_is_grid_size() {
        let mut cfg = tiny_cfg();
        cfg.sweep_alphas = vec![4.0, 8.0];
        cfg.sweep_betas = vec![4.0, 8.0, 16.0];
        let rows = cmd_sweep(&cfg).unwrap();
        assert_eq!(rows.len(), 6);
        // canonical order: alpha-major, beta-minor
        let keys: Vec<(f64, f64)> = rows.iter().map(|r| (r.alpha, r.beta1)).collect();
        let mut sorted = keys.clone();
        sorted.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
        assert_eq!(keys, sorted);
    }
}
