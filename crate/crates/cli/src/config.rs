use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use tensegrity_core::dataset::RunManifest;
use tensegrity_core::sim::SimConfig;
use tensegrity_core::{TensegrityTopology, TrackerConfig};

use crate::error::{CliError, CliResult};

fn parse<T: DeserializeOwned>(path: &Path) -> CliResult<T> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))?;
    let is_json = path.extension().is_some_and(|e| e == "json");
    let parsed = if is_json {
        serde_json::from_str(&text).map_err(|e| e.to_string())
    } else {
        toml::from_str(&text).map_err(|e| e.to_string())
    };
    parsed.map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
}

/// Simulation settings from TOML, defaults when no file is given.
pub fn load_sim_config(path: Option<&Path>, topology: &TensegrityTopology) -> CliResult<SimConfig> {
    let cfg: SimConfig = match path {
        Some(p) => parse(p)?,
        None => SimConfig::default(),
    };
    cfg.validate(topology)?;
    Ok(cfg)
}

/// Tracker settings from TOML, or the effective configuration recorded in a
/// run manifest.
pub fn load_tracker_config(path: Option<&Path>) -> CliResult<TrackerConfig> {
    let Some(p) = path else {
        return Ok(TrackerConfig::default());
    };
    if p.extension().is_some_and(|e| e == "json") {
        if let Ok(manifest) = parse::<RunManifest>(p) {
            return serde_json::from_value(manifest.config)
                .map_err(|e| CliError::Usage(format!("{}: config: {e}", p.display())));
        }
    }
    let cfg: TrackerConfig = parse(p)?;
    cfg.validate()?;
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::path::PathBuf;
    use tensegrity_core::sim::SimNoise;

    fn shipped(name: &str) -> PathBuf {
        Path::new(env!("CARGO_MANIFEST_DIR"))
            .join("../../configs")
            .join(name)
    }

    #[test]
    fn shipped_configs_load() {
        let topo = TensegrityTopology::three_bar();
        let clean = load_sim_config(Some(&shipped("noise_free.toml")), &topo).unwrap();
        assert_eq!(clean.noise, SimNoise::noise_free());
        let occl = load_sim_config(Some(&shipped("occlusion.toml")), &topo).unwrap();
        assert_eq!(occl.occlusions.len(), 1);
        assert_eq!(occl.noise.occlusion_episodes, 0);
        let tracker = load_tracker_config(Some(&shipped("tracker.toml"))).unwrap();
        assert_eq!(tracker, TrackerConfig::default());
    }

    #[test]
    fn partial_toml_keeps_defaults() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("sim.toml");
        fs::write(
            &p,
            "seed = 9\n[trajectory]\nframes = 12\n[noise]\ndepth_sigma = 0.002\n",
        )
        .unwrap();
        let cfg = load_sim_config(Some(&p), &TensegrityTopology::three_bar()).unwrap();
        assert_eq!(cfg.seed, 9);
        assert_eq!(cfg.trajectory.frames, 12);
        assert_eq!(cfg.noise.depth_sigma, 0.002);
        assert_eq!(
            cfg.noise.cable_sigma,
            SimConfig::default().noise.cable_sigma
        );
    }

    #[test]
    fn negative_sigma_is_a_usage_error() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("sim.toml");
        fs::write(&p, "[noise]\ndepth_sigma = -0.1\n").unwrap();
        let err = load_sim_config(Some(&p), &TensegrityTopology::three_bar()).unwrap_err();
        assert_eq!(err.exit_code(), crate::error::EXIT_USAGE);
        assert!(err.to_string().contains("noise"), "{err}");
    }

    #[test]
    fn tracker_toml_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("track.toml");
        fs::write(&p, "max_outer_iterations = 3\ndummy_count = 20\n").unwrap();
        let cfg = load_tracker_config(Some(&p)).unwrap();
        assert_eq!(cfg.max_outer_iterations, 3);
        assert_eq!(cfg.dummy_count, 20);
        assert!(load_tracker_config(None).is_ok());
    }
}
