use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::channel::PruningConfig;
use crate::dataset::SplitSpec;
use crate::geo::{GeodeticPoint, LocalPoint, SiteFrame};
use crate::ml::{Hyper, ModelFamily};
use crate::raytracer::TraceConfig;
use crate::scene::{Clearance, SceneGenConfig};

/// Default transmitter position in the local frame (metres).
pub const DEFAULT_TX: [f64; 3] = [52.94, 43.75, 16.0];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitConfig {
    pub model_subset_size: usize,
    pub train_fraction: f64,
}

impl Default for SplitConfig {
    fn default() -> Self {
        let s = SplitSpec::default();
        Self {
            model_subset_size: s.model_subset_size,
            train_fraction: s.train_fraction,
        }
    }
}

/// Everything a run needs. Loaded from JSON, then overridden by flags.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub scene: SceneGenConfig,
    /// Geographic box [lat_min, lon_min, lat_max, lon_max]; when set, the
    /// scene extent is taken from its UTM footprint.
    pub site: Option<[f64; 4]>,
    pub tx: [f64; 3],
    /// Radius of the building-free disc around the transmitter; 0 disables it.
    pub tx_clearance: f64,
    pub receivers: usize,
    pub rx_height: f64,
    pub trace: TraceConfig,
    pub pruning: PruningConfig,
    pub split: SplitConfig,
    pub models: Vec<ModelFamily>,
    pub hyper: Hyper,
    pub workers: Option<usize>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            scene: SceneGenConfig::default(),
            site: None,
            tx: DEFAULT_TX,
            tx_clearance: 15.0,
            receivers: 15000,
            rx_height: 1.5,
            trace: TraceConfig::default(),
            pruning: PruningConfig::default(),
            split: SplitConfig::default(),
            models: ModelFamily::ALL.to_vec(),
            hyper: Hyper::default(),
            workers: None,
        }
    }
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> Result<Self, String> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
        serde_json::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))
    }

    pub fn tx_point(&self) -> LocalPoint {
        LocalPoint::new(self.tx[0], self.tx[1], self.tx[2])
    }

    pub fn split_spec(&self) -> SplitSpec {
        SplitSpec {
            model_subset_size: self.split.model_subset_size,
            train_fraction: self.split.train_fraction,
            seed: self.seed,
        }
    }

    /// Scene generator settings with the site extent and transmitter
    /// clearance folded in.
    pub fn scene_gen(&self) -> Result<SceneGenConfig, String> {
        let mut cfg = self.scene.clone();
        if let Some([lat0, lon0, lat1, lon1]) = self.site {
            let a = GeodeticPoint::new(lat0, lon0).map_err(|e| format!("site: {e}"))?;
            let b = GeodeticPoint::new(lat1, lon1).map_err(|e| format!("site: {e}"))?;
            let frame = SiteFrame::from_bbox(a, b).map_err(|e| format!("site: {e}"))?;
            cfg.size_x = frame.extent.0;
            cfg.size_y = frame.extent.1;
        }
        cfg.clearance = (self.tx_clearance > 0.0).then_some(Clearance {
            x: self.tx[0],
            y: self.tx[1],
            radius: self.tx_clearance,
        });
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), String> {
        self.trace.validate().map_err(|e| e.to_string())?;
        self.pruning.validate().map_err(|e| e.to_string())?;
        if !self.tx.iter().all(|v| v.is_finite()) || self.tx[2] <= 0.0 {
            return Err(format!(
                "transmitter position {:?} must be finite and above ground",
                self.tx
            ));
        }
        if !(self.tx_clearance.is_finite() && self.tx_clearance >= 0.0) {
            return Err(format!(
                "tx_clearance {} must be non-negative",
                self.tx_clearance
            ));
        }
        if self.receivers == 0 {
            return Err("receiver count must be positive".into());
        }
        if !(self.rx_height.is_finite() && self.rx_height > 0.0) {
            return Err(format!("rx_height {} must be positive", self.rx_height));
        }
        if !(self.split.train_fraction > 0.0 && self.split.train_fraction < 1.0) {
            return Err(format!(
                "train_fraction {} outside (0, 1)",
                self.split.train_fraction
            ));
        }
        if self.split.model_subset_size < 2 {
            return Err("model subset must hold at least 2 rows".into());
        }
        if self.models.is_empty() {
            return Err("no model families selected".into());
        }
        if self.workers == Some(0) {
            return Err("workers must be at least 1".into());
        }
        let s = &self.hyper.svr;
        if !(s.c > 0.0 && s.epsilon >= 0.0 && s.tol > 0.0 && s.gamma.is_none_or(|g| g > 0.0)) {
            return Err(format!("invalid SVR hyperparameters {s:?}"));
        }
        if self.hyper.tree.min_samples_leaf == 0 {
            return Err("min_samples_leaf must be at least 1".into());
        }
        self.scene_gen()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        RunConfig::default().validate().unwrap();
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(serde_json::from_str::<RunConfig>(r#"{"seed": 3, "sede": 4}"#).is_err());
        assert!(
            serde_json::from_str::<RunConfig>(r#"{"trace": {"carrier_frequency": 7e9}}"#).is_err()
        );
        let c: RunConfig =
            serde_json::from_str(r#"{"seed": 3, "trace": {"carrier_frequency_hz": 3.5e9}}"#)
                .unwrap();
        assert_eq!(c.seed, 3);
        assert_eq!(c.trace.carrier_frequency_hz, 3.5e9);
        assert_eq!(c.trace.max_reflection_order, 2);
    }

    #[test]
    fn site_sets_extent() {
        let c = RunConfig {
            site: Some([16.46269, 80.50635, 16.46564, 80.50887]),
            ..Default::default()
        };
        let g = c.scene_gen().unwrap();
        assert!(g.size_x > 250.0 && g.size_x < 300.0);
        assert!(g.clearance.is_some());
    }
}
