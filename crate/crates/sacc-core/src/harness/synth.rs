//! Seeded synthetic-scene generation and the `synth` command.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::annotation::{sample_scene, AnnotatedScene};
use crate::error::Result;
use crate::harness::config::ExperimentConfig;

/// SplitMix64 finalizer; decorrelates per-scene seeds derived from one base.
pub(crate) fn mix_seed(base: u64, salt: u64) -> u64 {
    let mut z = base ^ salt.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Scene `index` of the config's scene set: the head count is drawn
/// uniformly from the configured range, then positions, sizes, and noise
/// come from the scene's own derived seed.
pub fn generate_scene(cfg: &ExperimentConfig, index: u64) -> Result<AnnotatedScene> {
    let dist = cfg.head_size_distribution()?;
    let seed = mix_seed(cfg.seed, index.wrapping_add(1));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let count = rng.gen_range(cfg.count_min..=cfg.count_max) as usize;
    sample_scene(
        cfg.width,
        cfg.height,
        count,
        &dist,
        cfg.noise_alpha,
        mix_seed(seed, 0x5ce),
    )
}

/// The config's full scene set.
pub fn generate_scenes(cfg: &ExperimentConfig) -> Result<Vec<AnnotatedScene>> {
    (0..cfg.num_scenes as u64).map(|i| generate_scene(cfg, i)).collect()
}

/// Writes `scene_NNNN.txt` files plus `manifest.csv` into `out_dir`.
/// Returns the manifest CSV content.
pub fn cmd_synth(cfg: &ExperimentConfig, out_dir: &Path) -> Result<String> {
    std::fs::create_dir_all(out_dir)?;
    let mut manifest = String::from("scene,file,width,height,count\n");
    for i in 0..cfg.num_scenes as u64 {
        let scene = generate_scene(cfg, i)?;
        let name = format!("scene_{i:04}.txt");
        scene.write_file(out_dir.join(&name))?;
        manifest.push_str(&format!(
            "{i},{name},{},{},{}\n",
            scene.width(),
            scene.height(),
            scene.count()
        ));
    }
    std::fs::write(out_dir.join("manifest.csv"), &manifest)?;
    Ok(manifest)
}

/// Reads every scene listed in a `manifest.csv` produced by [`cmd_synth`].
pub fn read_scene_set(dir: &Path) -> Result<Vec<AnnotatedScene>> {
    let manifest = std::fs::read_to_string(dir.join("manifest.csv"))?;
    let mut scenes = Vec::new();
    for line in manifest.lines().skip(1) {
        if line.trim().is_empty() {
            continue;
        }
        let file = line.split(',').nth(1).ok_or_else(|| {
            crate::error::Error::Parse(format!("bad manifest row `{line}`"))
        })?;
        scenes.push(AnnotatedScene::read_file(dir.join(file))?);
    }
    Ok(scenes)
}
