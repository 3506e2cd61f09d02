//! Experiment harness behind the `sacc` CLI: configuration, synthetic
//! scene sets, density fitting with count reports, parameter sweeps, and
//! the oracle verification suite.

pub mod config;
pub mod fit;
pub mod sweep;
pub mod synth;
pub mod verify;

pub use config::{Beta1Setting, ExperimentConfig, LossKind, RankSetting};
pub use fit::{cmd_fit, count_from_predictions, fit_scene, CountReport, FitOutcome, SceneCount};
pub use sweep::{cmd_sweep, sweep_csv, SweepRow};
pub use synth::{cmd_synth, generate_scene, generate_scenes, read_scene_set};
pub use verify::{all_passed, print_table, run_all, CheckResult};

use std::sync::OnceLock;

/// Rayon pool sized by the `SACC_THREADS` environment variable (builder
/// default when unset or unparsable). Scenes are independent work items;
/// per-scene arithmetic stays single-threaded and deterministic.
pub fn thread_pool() -> &'static rayon::ThreadPool {
    static POOL: OnceLock<rayon::ThreadPool> = OnceLock::new();
    POOL.get_or_init(|| {
        let threads = std::env::var("SACC_THREADS")
            .ok()
            .and_then(|v| v.parse::<usize>().ok())
            .unwrap_or(0);
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .expect("thread pool construction")
    })
}
