//! Multipath list to narrowband coefficient: relative-power pruning, the
//! excess-delay LOS window and the coherent phasor sum at the carrier.

use std::f64::consts::TAU;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geo::LocalPoint;
use crate::raytracer::{PropagationPath, SPEED_OF_LIGHT};

#[derive(Debug, Error, PartialEq)]
pub enum ChannelError {
    #[error("empty path list")]
    Empty,
    #[error("no valid path survives pruning and LOS filtering")]
    NoValidPath,
    #[error("invalid pruning config: {0}")]
    Config(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PruningConfig {
    /// Δ_th: keep paths within this many dB of the strongest one.
    pub delta_th_db: f64,
    /// ε_τ in seconds: admissible excess delay over the straight-line delay.
    pub epsilon_tau_s: f64,
}

impl Default for PruningConfig {
    fn default() -> Self {
        Self {
            delta_th_db: 30.0,
            epsilon_tau_s: 57.76e-9,
        }
    }
}

impl PruningConfig {
    pub fn validate(&self) -> Result<(), ChannelError> {
        // Δ_th = 0 is allowed as the "strongest path only" boundary case.
        if !(self.delta_th_db.is_finite() && self.delta_th_db >= 0.0) {
            return Err(ChannelError::Config(format!(
                "delta_th_db = {}",
                self.delta_th_db
            )));
        }
        if self.epsilon_tau_s.is_nan() || self.epsilon_tau_s < 0.0 {
            return Err(ChannelError::Config(format!(
                "epsilon_tau_s = {}",
                self.epsilon_tau_s
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComplexCoefficient {
    pub re: f64,
    pub im: f64,
}

impl From<Complex64> for ComplexCoefficient {
    fn from(c: Complex64) -> Self {
        Self { re: c.re, im: c.im }
    }
}

impl From<ComplexCoefficient> for Complex64 {
    fn from(c: ComplexCoefficient) -> Self {
        Complex64::new(c.re, c.im)
    }
}

/// P_i = |α_i|².
pub fn path_powers(paths: &[PropagationPath]) -> Result<Vec<f64>, ChannelError> {
    if paths.is_empty() {
        return Err(ChannelError::Empty);
    }
    Ok(paths.iter().map(|p| p.gain.norm_sqr()).collect())
}

pub fn max_power(powers: &[f64]) -> f64 {
    powers.iter().copied().fold(f64::NEG_INFINITY, f64::max)
}

/// Keeps paths with P_i ≥ P_max·10^(−Δ_th/10), in input order.
pub fn prune_paths(
    paths: &[PropagationPath],
    cfg: &PruningConfig,
) -> Result<Vec<PropagationPath>, ChannelError> {
    let powers = path_powers(paths)?;
    let floor = max_power(&powers) * 10f64.powf(-cfg.delta_th_db / 10.0);
    Ok(paths
        .iter()
        .zip(&powers)
        .filter(|(_, &p)| p >= floor)
        .map(|(path, _)| path.clone())
        .collect())
}

/// Paths whose delay lies within ε_τ of the straight-line Tx–Rx delay.
pub fn los_set(
    paths: &[PropagationPath],
    tx: LocalPoint,
    rx: LocalPoint,
    cfg: &PruningConfig,
) -> Vec<PropagationPath> {
    let direct = tx.distance(&rx) / SPEED_OF_LIGHT;
    paths
        .iter()
        .filter(|p| (p.delay - direct).abs() <= cfg.epsilon_tau_s)
        .cloned()
        .collect()
}

/// e^(−j2π f τ), with whole carrier cycles removed before forming the angle.
pub fn carrier_phasor(f_c: f64, tau: f64) -> Complex64 {
    let cycles = f_c * tau;
    let frac = cycles - cycles.round();
    Complex64::from_polar(1.0, -TAU * frac)
}

/// h = Σ α_i e^(−j2π f_c τ_i).
pub fn narrowband_coefficient(
    paths: &[PropagationPath],
    f_c: f64,
) -> Result<ComplexCoefficient, ChannelError> {
    if paths.is_empty() {
        return Err(ChannelError::NoValidPath);
    }
    let h: Complex64 = paths
        .iter()
        .map(|p| p.gain * carrier_phasor(f_c, p.delay))
        .sum();
    Ok(h.into())
}

/// Prune, then LOS-filter, then sum. `None` marks a receiver with no valid path.
pub fn synthesize(
    paths: &[PropagationPath],
    tx: LocalPoint,
    rx: LocalPoint,
    cfg: &PruningConfig,
    f_c: f64,
) -> Option<ComplexCoefficient> {
    if paths.is_empty() {
        return None;
    }
    let kept = prune_paths(paths, cfg).ok()?;
    let los = los_set(&kept, tx, rx, cfg);
    narrowband_coefficient(&los, f_c).ok()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn path(gain: f64, delay: f64) -> PropagationPath {
        let tx = LocalPoint::new(0.0, 0.0, 0.0);
        let rx = LocalPoint::new(delay * SPEED_OF_LIGHT, 0.0, 0.0);
        PropagationPath {
            gain: Complex64::new(gain, 0.0),
            delay,
            order: 0,
            vertices: vec![tx, rx],
        }
    }

    #[test]
    fn powers_square_gains() {
        assert_eq!(
            path_powers(&[path(1.0, 1e-7), path(0.5, 2e-7)]).unwrap(),
            vec![1.0, 0.25]
        );
        let p = path_powers(&[path(3.408e-5, 1e-7)]).unwrap();
        assert!((p[0] - 1.161e-9).abs() < 1e-12);
        let eq = path_powers(&[path(0.3, 1e-7), path(0.3, 2e-7)]).unwrap();
        assert!(eq.iter().all(|&v| v == max_power(&eq)));
        assert_eq!(path_powers(&[]), Err(ChannelError::Empty));
    }

    #[test]
    fn pruning_examples() {
        let paths = vec![path(1.0, 1e-7), path(0.1, 2e-7), path(0.01, 3e-7)];
        let kept = prune_paths(&paths, &PruningConfig::default()).unwrap();
        assert_eq!(kept, paths[..2].to_vec());

        let single = vec![path(1e-9, 1e-7)];
        let cfg = PruningConfig {
            delta_th_db: 0.0,
            ..Default::default()
        };
        assert_eq!(prune_paths(&single, &cfg).unwrap(), single);

        let tied = vec![path(0.5, 1e-7), path(1.0, 2e-7), path(1.0, 3e-7)];
        assert_eq!(prune_paths(&tied, &cfg).unwrap(), tied[1..].to_vec());
        assert_eq!(prune_paths(&[], &cfg), Err(ChannelError::Empty));
    }

    #[test]
    fn los_window() {
        let tx = LocalPoint::new(0.0, 0.0, 16.0);
        let rx = LocalPoint::new(100.0, 0.0, 1.5);
        let d = tx.distance(&rx);
        let direct = path(1.0, d / SPEED_OF_LIGHT);
        let bounce = path(0.5, (d + 20.0) / SPEED_OF_LIGHT);
        let cfg = PruningConfig::default();
        assert!(20.0 / SPEED_OF_LIGHT > cfg.epsilon_tau_s);
        let kept = los_set(&[direct.clone(), bounce.clone()], tx, rx, &cfg);
        assert_eq!(kept, vec![direct.clone()]);
        let open = PruningConfig {
            epsilon_tau_s: f64::INFINITY,
            ..cfg
        };
        assert_eq!(
            los_set(&[direct.clone(), bounce.clone()], tx, rx, &open),
            vec![direct, bounce]
        );
    }

    #[test]
    fn eq6_phase_examples() {
        let f = 7e9;
        let h = narrowband_coefficient(&[path(1e-4, 1e-9)], f).unwrap();
        assert!((h.re - 1e-4).abs() < 1e-18 && h.im.abs() < 1e-16);

        let h = narrowband_coefficient(&[path(1.0, 0.0), path(1.0, 1.0 / (2.0 * f))], f).unwrap();
        assert!(Complex64::from(h).norm() < 1e-12);

        assert_eq!(
            narrowband_coefficient(&[], f),
            Err(ChannelError::NoValidPath)
        );
    }

    #[test]
    fn free_space_coefficient() {
        let tau = 100.0 / SPEED_OF_LIGHT;
        let alpha = SPEED_OF_LIGHT / 7e9 / (4.0 * std::f64::consts::PI * 100.0);
        let h: Complex64 = narrowband_coefficient(&[path(alpha, tau)], 7e9)
            .unwrap()
            .into();
        assert!((h.norm() - alpha).abs() < 1e-18);
        let expected = (-TAU * 7e9 * tau).rem_euclid(TAU);
        let got = h.arg().rem_euclid(TAU);
        let diff = (got - expected).abs();
        assert!(diff.min(TAU - diff) < 1e-6);
    }

    #[test]
    fn synthesize_flags_empty() {
        let tx = LocalPoint::new(0.0, 0.0, 16.0);
        let rx = LocalPoint::new(10.0, 0.0, 1.5);
        assert!(synthesize(&[], tx, rx, &PruningConfig::default(), 7e9).is_none());
        let far = path(1.0, 1e-6);
        assert!(synthesize(&[far], tx, rx, &PruningConfig::default(), 7e9).is_none());
    }

    fn paths_strategy() -> impl Strategy<Value = Vec<PropagationPath>> {
        prop::collection::vec((1e-8f64..1.0, 0.0f64..1e-6), 1..12)
            .prop_map(|v| v.into_iter().map(|(g, t)| path(g, t)).collect())
    }

    proptest! {
        #[test]
        fn prune_is_idempotent(paths in paths_strategy(), dth in 0.0f64..60.0) {
            let cfg = PruningConfig { delta_th_db: dth, ..Default::default() };
            let once = prune_paths(&paths, &cfg).unwrap();
            prop_assert_eq!(prune_paths(&once, &cfg).unwrap(), once);
        }

        #[test]
        fn prune_monotone_in_threshold(paths in paths_strategy(), a in 0.0f64..60.0, b in 0.0f64..60.0) {
            let (lo, hi) = (a.min(b), a.max(b));
            let small = prune_paths(&paths, &PruningConfig { delta_th_db: lo, ..Default::default() }).unwrap();
            let large = prune_paths(&paths, &PruningConfig { delta_th_db: hi, ..Default::default() }).unwrap();
            prop_assert!(small.iter().all(|p| large.contains(p)));
        }

        #[test]
        fn triangle_inequality(paths in paths_strategy()) {
            let h: Complex64 = narrowband_coefficient(&paths, 7e9).unwrap().into();
            let bound: f64 = paths.iter().map(|p| p.gain.norm()).sum();
            prop_assert!(h.norm() <= bound * (1.0 + 1e-12));
        }

        #[test]
        fn single_path_phase(g in 1e-6f64..1.0, tau in 0.0f64..2e-6) {
            let f = 7e9;
            let h: Complex64 = narrowband_coefficient(&[path(g, tau)], f).unwrap().into();
            prop_assert!((h.norm() - g).abs() <= 1e-15 * g);
            let cycles = f * tau;
            let expected = -TAU * (cycles - cycles.round());
            let diff = (h.arg() - expected).rem_euclid(TAU);
            prop_assert!(diff.min(TAU - diff) < 1e-9);
        }

        #[test]
        fn prune_and_los_commute_when_strongest_is_los(paths in paths_strategy(), dth in 0.0f64..40.0) {
            let tx = LocalPoint::new(0.0, 0.0, 0.0);
            let strongest = paths.iter().map(|p| p.gain.re).fold(0.0, f64::max);
            // put the strongest path on the direct delay
            let mut paths = paths;
            let rx_d = 50.0;
            let rx = LocalPoint::new(rx_d, 0.0, 0.0);
            paths.push(path(strongest * 1.5, rx_d / SPEED_OF_LIGHT));
            let cfg = PruningConfig { delta_th_db: dth, ..Default::default() };
            let a = los_set(&prune_paths(&paths, &cfg).unwrap(), tx, rx, &cfg);
            let b = prune_paths(&los_set(&paths, tx, rx, &cfg), &cfg).unwrap();
            prop_assert_eq!(a, b);
        }
    }
}
