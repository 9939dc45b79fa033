//! Outdoor scene: flat terrain plus vertically extruded building footprints.
//!
//! Scenes are immutable once validated. All occlusion queries treat the
//! segment as open and buildings as closed solids whose boundary does not
//! block, so a ray may graze a wall or start on a rooftop.

use std::collections::HashSet;
use std::fs;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::geo::LocalPoint;
use crate::rng::{stream_rng, Stream};

/// Boundary tolerance for containment tests, metres.
const GEOM_EPS: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum SceneError {
    #[error("scene parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("building {index}: {reason}")]
    InvalidBuilding { index: usize, reason: String },
    #[error("invalid scene: {0}")]
    Invalid(String),
    #[error("could not place {requested} buildings without overlap (placed {placed} after {attempts} attempts)")]
    Infeasible {
        requested: usize,
        placed: usize,
        attempts: usize,
    },
    #[error(
        "receiver sampling exhausted {attempts} attempts with {accepted} of {requested} accepted"
    )]
    SamplingExhausted {
        requested: usize,
        accepted: usize,
        attempts: usize,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Material {
    pub name: String,
    /// Amplitude loss per specular bounce.
    pub reflection_loss_db: f64,
}

impl Material {
    pub fn new(name: &str, reflection_loss_db: f64) -> Self {
        Self {
            name: name.to_string(),
            reflection_loss_db,
        }
    }
}

pub fn default_materials() -> Vec<Material> {
    vec![
        Material::new("concrete", 3.0),
        Material::new("glass", 1.0),
        Material::new("metal", 0.5),
    ]
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Bounds {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
}

impl Bounds {
    pub fn square(size: f64) -> Self {
        Self::rect(size, size)
    }

    pub fn rect(width: f64, depth: f64) -> Self {
        Self {
            x_min: 0.0,
            x_max: width,
            y_min: 0.0,
            y_max: depth,
        }
    }

    pub fn contains_xy(&self, x: f64, y: f64) -> bool {
        x >= self.x_min && x <= self.x_max && y >= self.y_min && y <= self.y_max
    }

    pub fn width(&self) -> f64 {
        self.x_max - self.x_min
    }

    pub fn depth(&self) -> f64 {
        self.y_max - self.y_min
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Building {
    /// Counter-clockwise simple polygon, metres.
    pub footprint: Vec<[f64; 2]>,
    pub height: f64,
    pub material: String,
}

impl Building {
    pub fn rectangle(x0: f64, y0: f64, x1: f64, y1: f64, height: f64, material: &str) -> Self {
        Self {
            footprint: vec![[x0, y0], [x1, y0], [x1, y1], [x0, y1]],
            height,
            material: material.to_string(),
        }
    }

    pub fn edges(&self) -> impl Iterator<Item = ([f64; 2], [f64; 2])> + '_ {
        let n = self.footprint.len();
        (0..n).map(move |i| (self.footprint[i], self.footprint[(i + 1) % n]))
    }

    fn aabb(&self) -> [f64; 4] {
        let mut bb = [
            f64::INFINITY,
            f64::NEG_INFINITY,
            f64::INFINITY,
            f64::NEG_INFINITY,
        ];
        for v in &self.footprint {
            bb[0] = bb[0].min(v[0]);
            bb[1] = bb[1].max(v[0]);
            bb[2] = bb[2].min(v[1]);
            bb[3] = bb[3].max(v[1]);
        }
        bb
    }

    /// True when (x, y) lies inside the footprint and off its boundary.
    pub fn contains_xy_strict(&self, x: f64, y: f64) -> bool {
        point_in_polygon_strict([x, y], &self.footprint)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scene {
    pub bounds: Bounds,
    pub terrain_z: f64,
    /// Material used for ground reflections.
    #[serde(default = "default_terrain_material")]
    pub terrain_material: String,
    pub materials: Vec<Material>,
    pub buildings: Vec<Building>,
}

fn default_terrain_material() -> String {
    "concrete".to_string()
}

impl Scene {
    pub fn free_space(bounds: Bounds) -> Self {
        Self {
            bounds,
            terrain_z: 0.0,
            terrain_material: default_terrain_material(),
            materials: default_materials(),
            buildings: Vec::new(),
        }
    }

    pub fn material(&self, name: &str) -> Option<&Material> {
        self.materials.iter().find(|m| m.name == name)
    }

    pub fn validate(&self) -> Result<(), SceneError> {
        let b = &self.bounds;
        let finite = [b.x_min, b.x_max, b.y_min, b.y_max, self.terrain_z]
            .iter()
            .all(|v| v.is_finite());
        if !finite || b.x_max <= b.x_min || b.y_max <= b.y_min {
            return Err(SceneError::Invalid(format!("degenerate bounds {b:?}")));
        }
        let mut names = HashSet::new();
        for m in &self.materials {
            if !m.reflection_loss_db.is_finite() || m.reflection_loss_db < 0.0 {
                return Err(SceneError::Invalid(format!(
                    "material {:?} has invalid reflection loss {}",
                    m.name, m.reflection_loss_db
                )));
            }
            if !names.insert(m.name.as_str()) {
                return Err(SceneError::Invalid(format!(
                    "duplicate material {:?}",
                    m.name
                )));
            }
        }
        if !names.contains(self.terrain_material.as_str()) {
            return Err(SceneError::Invalid(format!(
                "unknown terrain material {:?}",
                self.terrain_material
            )));
        }
        for (index, bld) in self.buildings.iter().enumerate() {
            let fail = |reason: String| SceneError::InvalidBuilding { index, reason };
            if bld.footprint.len() < 3 {
                return Err(fail("footprint needs at least 3 vertices".into()));
            }
            if !(bld.height.is_finite() && bld.height > 0.0) {
                return Err(fail(format!("height {} must be positive", bld.height)));
            }
            if !names.contains(bld.material.as_str()) {
                return Err(fail(format!("unknown material {:?}", bld.material)));
            }
            for v in &bld.footprint {
                if !(v[0].is_finite() && v[1].is_finite()) || !b.contains_xy(v[0], v[1]) {
                    return Err(fail(format!("vertex {v:?} outside bounds")));
                }
            }
            if !is_simple_polygon(&bld.footprint) {
                return Err(fail("footprint is self-intersecting".into()));
            }
            if signed_area(&bld.footprint) <= 0.0 {
                return Err(fail(
                    "footprint must be counter-clockwise with non-zero area".into(),
                ));
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("scene serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self, SceneError> {
        let scene: Scene = serde_json::from_str(text).map_err(|e| SceneError::Parse {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })?;
        scene.validate()?;
        Ok(scene)
    }

    /// SHA-256 of the canonical JSON form.
    pub fn content_hash(&self) -> String {
        hex::encode(Sha256::digest(self.to_json().as_bytes()))
    }

    /// True iff the open segment (a, b) passes through the interior of any
    /// building volume or below the terrain.
    pub fn segment_occluded(&self, a: LocalPoint, b: LocalPoint) -> bool {
        if a.z < self.terrain_z || b.z < self.terrain_z {
            return true;
        }
        self.buildings
            .iter()
            .any(|bld| segment_hits_building(bld, self.terrain_z, a, b))
    }

    pub fn inside_any_footprint(&self, x: f64, y: f64) -> bool {
        self.buildings.iter().any(|b| b.contains_xy_strict(x, y))
    }
}

pub fn load_scene(path: &Path) -> Result<Scene, SceneError> {
    Scene::from_json(&fs::read_to_string(path)?)
}

pub fn save_scene(scene: &Scene, path: &Path) -> Result<(), SceneError> {
    fs::write(path, scene.to_json())?;
    Ok(())
}

pub fn segment_occluded(scene: &Scene, a: LocalPoint, b: LocalPoint) -> bool {
    scene.segment_occluded(a, b)
}

fn cross(o: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
}

fn signed_area(poly: &[[f64; 2]]) -> f64 {
    let n = poly.len();
    (0..n)
        .map(|i| {
            let (p, q) = (poly[i], poly[(i + 1) % n]);
            p[0] * q[1] - q[0] * p[1]
        })
        .sum::<f64>()
        / 2.0
}

fn on_segment(p: [f64; 2], a: [f64; 2], b: [f64; 2]) -> bool {
    p[0] >= a[0].min(b[0]) - GEOM_EPS
        && p[0] <= a[0].max(b[0]) + GEOM_EPS
        && p[1] >= a[1].min(b[1]) - GEOM_EPS
        && p[1] <= a[1].max(b[1]) + GEOM_EPS
}

fn segments_intersect(a: [f64; 2], b: [f64; 2], c: [f64; 2], d: [f64; 2]) -> bool {
    let d1 = cross(c, d, a);
    let d2 = cross(c, d, b);
    let d3 = cross(a, b, c);
    let d4 = cross(a, b, d);
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0))
        && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0))
    {
        return true;
    }
    (d1 == 0.0 && on_segment(a, c, d))
        || (d2 == 0.0 && on_segment(b, c, d))
        || (d3 == 0.0 && on_segment(c, a, b))
        || (d4 == 0.0 && on_segment(d, a, b))
}

/// Non-adjacent edges must not touch; adjacent edges may only share their
/// common vertex.
pub fn is_simple_polygon(poly: &[[f64; 2]]) -> bool {
    let n = poly.len();
    if n < 3 {
        return false;
    }
    for i in 0..n {
        let (a, b) = (poly[i], poly[(i + 1) % n]);
        if a == b {
            return false;
        }
        for j in (i + 1)..n {
            let adjacent = j == i + 1 || (i == 0 && j == n - 1);
            let (c, d) = (poly[j], poly[(j + 1) % n]);
            if adjacent {
                // Only collinear overlap (a fold-back) is a violation.
                let (shared, other_i, other_j) = if j == i + 1 { (b, a, d) } else { (a, b, c) };
                if cross(shared, other_i, other_j) == 0.0 {
                    let u = [other_i[0] - shared[0], other_i[1] - shared[1]];
                    let v = [other_j[0] - shared[0], other_j[1] - shared[1]];
                    if u[0] * v[0] + u[1] * v[1] > 0.0 {
                        return false;
                    }
                }
            } else if segments_intersect(a, b, c, d) {
                return false;
            }
        }
    }
    true
}

fn distance_to_segment(p: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    let (dx, dy) = (b[0] - a[0], b[1] - a[1]);
    let len2 = dx * dx + dy * dy;
    let t = if len2 > 0.0 {
        (((p[0] - a[0]) * dx + (p[1] - a[1]) * dy) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    let (qx, qy) = (a[0] + t * dx - p[0], a[1] + t * dy - p[1]);
    (qx * qx + qy * qy).sqrt()
}

/// Crossing-number test that excludes points within `GEOM_EPS` of the boundary.
pub fn point_in_polygon_strict(p: [f64; 2], poly: &[[f64; 2]]) -> bool {
    let n = poly.len();
    let mut inside = false;
    for i in 0..n {
        let (a, b) = (poly[i], poly[(i + 1) % n]);
        if distance_to_segment(p, a, b) <= GEOM_EPS {
            return false;
        }
        if (a[1] > p[1]) != (b[1] > p[1]) {
            let x = a[0] + (p[1] - a[1]) * (b[0] - a[0]) / (b[1] - a[1]);
            if p[0] < x {
                inside = !inside;
            }
        }
    }
    inside
}

/// The inside/outside state of a point moving along the segment only changes
/// at slab crossings and footprint-edge crossings, so testing one midpoint per
/// sub-interval decides the whole open segment.
fn segment_hits_building(bld: &Building, terrain_z: f64, a: LocalPoint, b: LocalPoint) -> bool {
    let z_lo = terrain_z;
    let z_hi = terrain_z + bld.height;
    if a.z.min(b.z) >= z_hi || a.z.max(b.z) <= z_lo {
        return false;
    }
    let bb = bld.aabb();
    if a.x.max(b.x) <= bb[0]
        || a.x.min(b.x) >= bb[1]
        || a.y.max(b.y) <= bb[2]
        || a.y.min(b.y) >= bb[3]
    {
        return false;
    }

    let mut ts = vec![0.0, 1.0];
    let dz = b.z - a.z;
    if dz != 0.0 {
        for zc in [z_lo, z_hi] {
            let t = (zc - a.z) / dz;
            if t > 0.0 && t < 1.0 {
                ts.push(t);
            }
        }
    }
    let d = [b.x - a.x, b.y - a.y];
    for (e0, e1) in bld.edges() {
        let f = [e1[0] - e0[0], e1[1] - e0[1]];
        let denom = d[0] * f[1] - d[1] * f[0];
        if denom == 0.0 {
            continue;
        }
        let w = [e0[0] - a.x, e0[1] - a.y];
        let t = (w[0] * f[1] - w[1] * f[0]) / denom;
        let s = (w[0] * d[1] - w[1] * d[0]) / denom;
        if t > 0.0 && t < 1.0 && (-GEOM_EPS..=1.0 + GEOM_EPS).contains(&s) {
            ts.push(t);
        }
    }
    ts.sort_by(f64::total_cmp);
    ts.windows(2).any(|w| {
        if w[1] - w[0] <= 1e-12 {
            return false;
        }
        let t = 0.5 * (w[0] + w[1]);
        let z = a.z + t * dz;
        z > z_lo + GEOM_EPS
            && z < z_hi - GEOM_EPS
            && point_in_polygon_strict([a.x + t * d[0], a.y + t * d[1]], &bld.footprint)
    })
}

/// Disc kept free of buildings, e.g. around a mast-mounted transmitter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Clearance {
    pub x: f64,
    pub y: f64,
    pub radius: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SceneGenConfig {
    pub size_x: f64,
    pub size_y: f64,
    pub building_count: usize,
    pub footprint_min: f64,
    pub footprint_max: f64,
    pub height_min: f64,
    pub height_max: f64,
    /// Minimum spacing between footprints.
    pub min_gap: f64,
    pub clearance: Option<Clearance>,
    pub materials: Vec<Material>,
}

impl Default for SceneGenConfig {
    fn default() -> Self {
        Self {
            size_x: 300.0,
            size_y: 300.0,
            building_count: 40,
            footprint_min: 10.0,
            footprint_max: 35.0,
            height_min: 6.0,
            height_max: 30.0,
            min_gap: 4.0,
            clearance: None,
            materials: default_materials(),
        }
    }
}

impl SceneGenConfig {
    fn check(&self) -> Result<(), SceneError> {
        let positive = [
            self.size_x,
            self.size_y,
            self.footprint_min,
            self.height_min,
        ]
        .iter()
        .all(|v| v.is_finite() && *v > 0.0);
        if !positive
            || self.footprint_max < self.footprint_min
            || self.height_max < self.height_min
            || self.min_gap < 0.0
            || self.footprint_max > self.size_x.min(self.size_y)
        {
            return Err(SceneError::Invalid(format!(
                "bad generator config {self:?}"
            )));
        }
        if self.materials.is_empty() {
            return Err(SceneError::Invalid(
                "generator needs at least one material".into(),
            ));
        }
        Ok(())
    }
}

/// Places non-overlapping axis-aligned rectangular buildings by rejection
/// sampling, giving up after 100 attempts per requested building.
pub fn generate_synthetic_scene(seed: u64, cfg: &SceneGenConfig) -> Result<Scene, SceneError> {
    cfg.check()?;
    let mut rng = stream_rng(seed, Stream::Scene);
    let bounds = Bounds::rect(cfg.size_x, cfg.size_y);
    let max_attempts = 100 * cfg.building_count;
    let mut rects: Vec<[f64; 4]> = Vec::with_capacity(cfg.building_count);
    let mut buildings = Vec::with_capacity(cfg.building_count);
    let mut attempts = 0;
    while buildings.len() < cfg.building_count {
        if attempts >= max_attempts {
            return Err(SceneError::Infeasible {
                requested: cfg.building_count,
                placed: buildings.len(),
                attempts,
            });
        }
        attempts += 1;
        let w = rng.gen_range(cfg.footprint_min..=cfg.footprint_max);
        let d = rng.gen_range(cfg.footprint_min..=cfg.footprint_max);
        let x0 = rng.gen_range(0.0..=cfg.size_x - w);
        let y0 = rng.gen_range(0.0..=cfg.size_y - d);
        let height = rng.gen_range(cfg.height_min..=cfg.height_max);
        let material = rng.gen_range(0..cfg.materials.len());
        let r = [x0, x0 + w, y0, y0 + d];

        let g = cfg.min_gap;
        let overlaps = rects
            .iter()
            .any(|o| r[0] < o[1] + g && o[0] < r[1] + g && r[2] < o[3] + g && o[2] < r[3] + g);
        let blocks_site = cfg.clearance.is_some_and(|c| {
            let cx = c.x.clamp(r[0], r[1]);
            let cy = c.y.clamp(r[2], r[3]);
            (cx - c.x).powi(2) + (cy - c.y).powi(2) < c.radius * c.radius
        });
        if overlaps || blocks_site {
            continue;
        }
        rects.push(r);
        buildings.push(Building::rectangle(
            r[0],
            r[2],
            r[1],
            r[3],
            height,
            &cfg.materials[material].name,
        ));
    }
    let scene = Scene {
        bounds,
        terrain_z: 0.0,
        terrain_material: cfg.materials[0].name.clone(),
        materials: cfg.materials.clone(),
        buildings,
    };
    scene.validate()?;
    Ok(scene)
}

/// Uniform receiver drops over the scene bounds at a fixed height, rejecting
/// points strictly inside a footprint. At most 100 attempts per receiver.
pub fn sample_receiver_positions(
    scene: &Scene,
    count: usize,
    height: f64,
    seed: u64,
) -> Result<Vec<LocalPoint>, SceneError> {
    if count == 0 {
        return Err(SceneError::Invalid(
            "receiver count must be positive".into(),
        ));
    }
    let mut rng = stream_rng(seed, Stream::Receivers);
    let b = scene.bounds;
    let z = scene.terrain_z + height;
    let max_attempts = 100 * count;
    let mut out = Vec::with_capacity(count);
    let mut attempts = 0;
    while out.len() < count {
        if attempts >= max_attempts {
            return Err(SceneError::SamplingExhausted {
                requested: count,
                accepted: out.len(),
                attempts,
            });
        }
        attempts += 1;
        let x = rng.gen_range(b.x_min..=b.x_max);
        let y = rng.gen_range(b.y_min..=b.y_max);
        if !scene.inside_any_footprint(x, y) {
            out.push(LocalPoint::new(x, y, z));
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn cube_scene() -> Scene {
        let mut s = Scene::free_space(Bounds::square(100.0));
        s.buildings.push(Building::rectangle(
            45.0, 45.0, 55.0, 55.0, 10.0, "concrete",
        ));
        s
    }

    /// Slab method: the segment enters the box interior iff the parametric
    /// overlap of the three slabs has positive length inside (0, 1).
    fn box_oracle(lo: [f64; 3], hi: [f64; 3], a: LocalPoint, b: LocalPoint) -> bool {
        let (pa, pb) = ([a.x, a.y, a.z], [b.x, b.y, b.z]);
        let (mut t0, mut t1) = (0.0f64, 1.0f64);
        for k in 0..3 {
            let d = pb[k] - pa[k];
            if d == 0.0 {
                if pa[k] <= lo[k] || pa[k] >= hi[k] {
                    return false;
                }
            } else {
                let (mut u, mut v) = ((lo[k] - pa[k]) / d, (hi[k] - pa[k]) / d);
                if u > v {
                    std::mem::swap(&mut u, &mut v);
                }
                t0 = t0.max(u);
                t1 = t1.min(v);
            }
        }
        t1 - t0 > 1e-9
    }

    #[test]
    fn empty_scene_is_free_space() {
        let s = Scene::from_json(&Scene::free_space(Bounds::square(300.0)).to_json()).unwrap();
        assert!(s.buildings.is_empty());
        assert!(!s.segment_occluded(
            LocalPoint::new(1.0, 1.0, 1.5),
            LocalPoint::new(299.0, 299.0, 16.0)
        ));
    }

    #[test]
    fn self_intersecting_footprint_rejected() {
        let mut s = Scene::free_space(Bounds::square(100.0));
        s.buildings.push(Building {
            footprint: vec![[10.0, 10.0], [20.0, 20.0], [20.0, 10.0], [10.0, 20.0]],
            height: 5.0,
            material: "glass".into(),
        });
        let err = Scene::from_json(&s.to_json()).unwrap_err();
        assert!(
            matches!(err, SceneError::InvalidBuilding { index: 0, .. }),
            "{err}"
        );
    }

    #[test]
    fn clockwise_and_unknown_material_rejected() {
        let mut s = Scene::free_space(Bounds::square(100.0));
        s.buildings.push(Building {
            footprint: vec![[10.0, 10.0], [10.0, 20.0], [20.0, 20.0], [20.0, 10.0]],
            height: 5.0,
            material: "glass".into(),
        });
        assert!(s.validate().is_err());
        s.buildings[0] = Building::rectangle(10.0, 10.0, 20.0, 20.0, 5.0, "wood");
        assert!(s.validate().is_err());
    }

    #[test]
    fn parse_error_reports_line() {
        let err = Scene::from_json("{\n  \"bounds\": {\n  oops\n}").unwrap_err();
        match err {
            SceneError::Parse { line, .. } => assert_eq!(line, 3),
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn unknown_keys_rejected() {
        let mut v: serde_json::Value =
            serde_json::from_str(&Scene::free_space(Bounds::square(10.0)).to_json()).unwrap();
        v["vegetation"] = serde_json::json!([]);
        assert!(Scene::from_json(&v.to_string()).is_err());
    }

    #[test]
    fn generated_scene_round_trips_through_file() {
        let cfg = SceneGenConfig::default();
        let scene = generate_synthetic_scene(11, &cfg).unwrap();
        assert_eq!(scene.buildings.len(), 40);
        assert!(scene
            .buildings
            .iter()
            .all(|b| (6.0..=30.0).contains(&b.height)));
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("scene.json");
        save_scene(&scene, &path).unwrap();
        let back = load_scene(&path).unwrap();
        assert_eq!(back.buildings.len(), 40);
        assert_eq!(back, scene);
    }

    #[test]
    fn generation_is_deterministic() {
        let cfg = SceneGenConfig::default();
        let a = generate_synthetic_scene(7, &cfg).unwrap().to_json();
        let b = generate_synthetic_scene(7, &cfg).unwrap().to_json();
        assert_eq!(a, b);
        let c = generate_synthetic_scene(8, &cfg).unwrap().to_json();
        assert_ne!(a, c);
    }

    #[test]
    fn zero_buildings_is_free_space() {
        let cfg = SceneGenConfig {
            building_count: 0,
            ..Default::default()
        };
        assert!(generate_synthetic_scene(1, &cfg)
            .unwrap()
            .buildings
            .is_empty());
    }

    #[test]
    fn generated_buildings_inside_bounds_and_disjoint() {
        let cfg = SceneGenConfig::default();
        for seed in 0..5 {
            let s = generate_synthetic_scene(seed, &cfg).unwrap();
            for b in &s.buildings {
                assert!(b.footprint.iter().all(|v| s.bounds.contains_xy(v[0], v[1])));
            }
            // exhaustive pairwise check: no vertex of one inside another and no edge crossings
            for (i, a) in s.buildings.iter().enumerate() {
                for b in &s.buildings[i + 1..] {
                    for (p, q) in a.edges() {
                        for (r, t) in b.edges() {
                            assert!(!segments_intersect(p, q, r, t));
                        }
                    }
                    assert!(a
                        .footprint
                        .iter()
                        .all(|v| !b.contains_xy_strict(v[0], v[1])));
                    assert!(b
                        .footprint
                        .iter()
                        .all(|v| !a.contains_xy_strict(v[0], v[1])));
                }
            }
        }
    }

    #[test]
    fn infeasible_density_errors() {
        let cfg = SceneGenConfig {
            size_x: 50.0,
            size_y: 50.0,
            building_count: 100,
            footprint_min: 20.0,
            footprint_max: 20.0,
            ..Default::default()
        };
        assert!(matches!(
            generate_synthetic_scene(0, &cfg),
            Err(SceneError::Infeasible { .. })
        ));
    }

    #[test]
    fn clearance_is_respected() {
        let c = Clearance {
            x: 52.94,
            y: 43.75,
            radius: 15.0,
        };
        let cfg = SceneGenConfig {
            clearance: Some(c),
            ..Default::default()
        };
        let s = generate_synthetic_scene(3, &cfg).unwrap();
        for b in &s.buildings {
            let bb = b.aabb();
            let dx = c.x.clamp(bb[0], bb[1]) - c.x;
            let dy = c.y.clamp(bb[2], bb[3]) - c.y;
            assert!(dx.hypot(dy) >= c.radius);
        }
    }

    #[test]
    fn occlusion_cases() {
        let s = cube_scene();
        // high above everything
        assert!(!s.segment_occluded(
            LocalPoint::new(0.0, 50.0, 20.0),
            LocalPoint::new(100.0, 50.0, 20.0)
        ));
        // straight through the cube
        assert!(s.segment_occluded(
            LocalPoint::new(0.0, 50.0, 5.0),
            LocalPoint::new(100.0, 50.0, 5.0)
        ));
        // grazing along the south face
        assert!(!s.segment_occluded(
            LocalPoint::new(0.0, 45.0, 5.0),
            LocalPoint::new(100.0, 45.0, 5.0)
        ));
        // grazing the roof plane
        assert!(!s.segment_occluded(
            LocalPoint::new(0.0, 50.0, 10.0),
            LocalPoint::new(100.0, 50.0, 10.0)
        ));
        // starting on the roof and leaving upward
        assert!(!s.segment_occluded(
            LocalPoint::new(50.0, 50.0, 10.0),
            LocalPoint::new(90.0, 90.0, 20.0)
        ));
        // below terrain
        assert!(s.segment_occluded(
            LocalPoint::new(0.0, 0.0, -1.0),
            LocalPoint::new(10.0, 0.0, 1.0)
        ));
    }

    #[test]
    fn sampling_basics() {
        let s = generate_synthetic_scene(5, &SceneGenConfig::default()).unwrap();
        let pts = sample_receiver_positions(&s, 15000, 1.5, 9).unwrap();
        assert_eq!(pts.len(), 15000);
        assert!(pts.iter().all(|p| p.z == 1.5));
        assert!(pts.iter().all(|p| s.bounds.contains_xy(p.x, p.y)));
        assert!(pts.iter().all(|p| s
            .buildings
            .iter()
            .all(|b| !point_in_polygon_strict([p.x, p.y], &b.footprint))));
        assert_eq!(pts, sample_receiver_positions(&s, 15000, 1.5, 9).unwrap());

        let free = Scene::free_space(Bounds::square(300.0));
        let one = sample_receiver_positions(&free, 1, 1.5, 42).unwrap();
        assert_eq!(one, sample_receiver_positions(&free, 1, 1.5, 42).unwrap());
        assert!(free.bounds.contains_xy(one[0].x, one[0].y));
        assert!(sample_receiver_positions(&free, 0, 1.5, 42).is_err());
    }

    #[test]
    fn sampling_gives_up_when_everything_is_built_over() {
        let mut s = Scene::free_space(Bounds::square(10.0));
        s.buildings
            .push(Building::rectangle(0.0, 0.0, 10.0, 10.0, 3.0, "metal"));
        assert!(matches!(
            sample_receiver_positions(&s, 5, 1.5, 0),
            Err(SceneError::SamplingExhausted { .. })
        ));
    }

    fn pt() -> impl Strategy<Value = LocalPoint> {
        (0.0f64..100.0, 0.0f64..100.0, 0.0f64..25.0).prop_map(|(x, y, z)| LocalPoint::new(x, y, z))
    }

    proptest! {
        #[test]
        fn cube_matches_slab_oracle(a in pt(), b in pt()) {
            let s = cube_scene();
            let expected = box_oracle([45.0, 45.0, 0.0], [55.0, 55.0, 10.0], a, b);
            prop_assert_eq!(s.segment_occluded(a, b), expected);
        }

        #[test]
        fn occlusion_is_symmetric(a in pt(), b in pt(), seed in 0u64..20) {
            let s = generate_synthetic_scene(seed, &SceneGenConfig { size_x: 100.0, size_y: 100.0, building_count: 6, footprint_max: 20.0, ..Default::default() }).unwrap();
            prop_assert_eq!(s.segment_occluded(a, b), s.segment_occluded(b, a));
        }

        #[test]
        fn adding_buildings_is_monotone(a in pt(), b in pt(), x0 in 0.0f64..80.0, y0 in 0.0f64..80.0, h in 1.0f64..30.0) {
            let mut s = cube_scene();
            let before = s.segment_occluded(a, b);
            s.buildings.push(Building::rectangle(x0, y0, x0 + 15.0, y0 + 10.0, h, "glass"));
            prop_assert!(!before || s.segment_occluded(a, b));
        }
    }
}
