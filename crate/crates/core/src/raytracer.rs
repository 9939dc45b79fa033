//! Deterministic geometric ray tracer: line of sight plus specular
//! reflections found with the image method.
//!
//! Reflecting faces are the exterior building walls and the ground plane.
//! Each path amplitude is the free-space (Friis) amplitude over the unfolded
//! path length times a constant per-bounce material loss. Gains are kept
//! real and positive; all phase comes from the path delay downstream.

use std::f64::consts::PI;
use std::io::Write;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geo::LocalPoint;
use crate::scene::Scene;

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Slack when checking that a bounce point lies on its face.
const FACE_EPS: f64 = 1e-9;

#[derive(Debug, Error, PartialEq)]
pub enum TraceError {
    #[error("invalid trace config: {0}")]
    Config(String),
    #[error("invalid endpoint: {0}")]
    Endpoint(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TraceConfig {
    pub max_reflection_order: usize,
    pub carrier_frequency_hz: f64,
    pub tx_power_w: f64,
}

impl Default for TraceConfig {
    fn default() -> Self {
        Self {
            max_reflection_order: 2,
            carrier_frequency_hz: 7e9,
            tx_power_w: 1.0,
        }
    }
}

impl TraceConfig {
    pub fn validate(&self) -> Result<(), TraceError> {
        if !(self.carrier_frequency_hz.is_finite() && self.carrier_frequency_hz > 0.0) {
            return Err(TraceError::Config(format!(
                "carrier frequency {} must be positive",
                self.carrier_frequency_hz
            )));
        }
        if !(self.tx_power_w.is_finite() && self.tx_power_w > 0.0) {
            return Err(TraceError::Config(format!(
                "transmit power {} must be positive",
                self.tx_power_w
            )));
        }
        Ok(())
    }

    pub fn wavelength(&self) -> f64 {
        SPEED_OF_LIGHT / self.carrier_frequency_hz
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropagationPath {
    pub gain: Complex64,
    /// Seconds.
    pub delay: f64,
    pub order: usize,
    /// Tx, bounce points in order, Rx.
    pub vertices: Vec<LocalPoint>,
}

impl PropagationPath {
    pub fn length(&self) -> f64 {
        self.vertices.windows(2).map(|w| w[0].distance(&w[1])).sum()
    }
}

#[derive(Serialize)]
struct PathDump {
    receiver: usize,
    vertices: Vec<[f64; 3]>,
    gain_abs: f64,
    delay_ns: f64,
    order: usize,
}

/// Writes one JSON object per path: `{receiver, vertices, gain_abs, delay_ns, order}`.
pub fn dump_paths_jsonl<W: Write>(
    mut out: W,
    receiver: usize,
    paths: &[PropagationPath],
) -> std::io::Result<()> {
    for p in paths {
        let row = PathDump {
            receiver,
            vertices: p.vertices.iter().map(|v| [v.x, v.y, v.z]).collect(),
            gain_abs: p.gain.norm(),
            delay_ns: p.delay * 1e9,
            order: p.order,
        };
        serde_json::to_writer(&mut out, &row)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

/// Infinite plane `normal · p = offset` with unit normal.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Plane {
    pub normal: [f64; 3],
    pub offset: f64,
}

impl Plane {
    pub fn signed_distance(&self, p: LocalPoint) -> f64 {
        self.normal[0] * p.x + self.normal[1] * p.y + self.normal[2] * p.z - self.offset
    }
}

pub fn mirror_point(p: LocalPoint, plane: &Plane) -> LocalPoint {
    let d = 2.0 * plane.signed_distance(p);
    let n = plane.normal;
    LocalPoint::new(p.x - d * n[0], p.y - d * n[1], p.z - d * n[2])
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum FaceShape {
    Ground {
        x_min: f64,
        x_max: f64,
        y_min: f64,
        y_max: f64,
    },
    Wall {
        start: [f64; 2],
        dir: [f64; 2],
        len2: f64,
        z_lo: f64,
        z_hi: f64,
    },
}

/// Planar reflector; the normal points to the exterior side.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Face {
    pub plane: Plane,
    /// Amplitude factor 10^(-loss/20).
    amplitude: f64,
    shape: FaceShape,
}

impl Face {
    fn contains(&self, p: LocalPoint) -> bool {
        match self.shape {
            FaceShape::Ground {
                x_min,
                x_max,
                y_min,
                y_max,
            } => {
                p.x >= x_min - FACE_EPS
                    && p.x <= x_max + FACE_EPS
                    && p.y >= y_min - FACE_EPS
                    && p.y <= y_max + FACE_EPS
            }
            FaceShape::Wall {
                start,
                dir,
                len2,
                z_lo,
                z_hi,
            } => {
                let s = ((p.x - start[0]) * dir[0] + (p.y - start[1]) * dir[1]) / len2;
                let tol = FACE_EPS / len2.sqrt();
                s >= -tol && s <= 1.0 + tol && p.z >= z_lo - FACE_EPS && p.z <= z_hi + FACE_EPS
            }
        }
    }
}

/// Ground first, then each building's walls in footprint order.
pub fn scene_faces(scene: &Scene) -> Vec<Face> {
    let loss = |name: &str| {
        let db = scene.material(name).map_or(0.0, |m| m.reflection_loss_db);
        10f64.powf(-db / 20.0)
    };
    let b = scene.bounds;
    let mut faces = vec![Face {
        plane: Plane {
            normal: [0.0, 0.0, 1.0],
            offset: scene.terrain_z,
        },
        amplitude: loss(&scene.terrain_material),
        shape: FaceShape::Ground {
            x_min: b.x_min,
            x_max: b.x_max,
            y_min: b.y_min,
            y_max: b.y_max,
        },
    }];
    for bld in &scene.buildings {
        let amplitude = loss(&bld.material);
        for (e0, e1) in bld.edges() {
            let dir = [e1[0] - e0[0], e1[1] - e0[1]];
            let len2 = dir[0] * dir[0] + dir[1] * dir[1];
            let len = len2.sqrt();
            let normal = [dir[1] / len, -dir[0] / len, 0.0];
            faces.push(Face {
                plane: Plane {
                    normal,
                    offset: normal[0] * e0[0] + normal[1] * e0[1],
                },
                amplitude,
                shape: FaceShape::Wall {
                    start: e0,
                    dir,
                    len2,
                    z_lo: scene.terrain_z,
                    z_hi: scene.terrain_z + bld.height,
                },
            });
        }
    }
    faces
}

struct ImageNode {
    parent: Option<usize>,
    face: usize,
    image: LocalPoint,
}

/// Image tree for a fixed source, reused across many receivers.
pub struct PathTracer<'a> {
    scene: &'a Scene,
    cfg: TraceConfig,
    faces: Vec<Face>,
    source: LocalPoint,
    images: Vec<ImageNode>,
}

impl<'a> PathTracer<'a> {
    pub fn new(scene: &'a Scene, source: LocalPoint, cfg: TraceConfig) -> Result<Self, TraceError> {
        cfg.validate()?;
        check_endpoint(scene, source, "tx")?;
        let faces = scene_faces(scene);
        let mut images: Vec<ImageNode> = Vec::new();
        let mut level_start = 0;
        for order in 1..=cfg.max_reflection_order {
            let level_end = images.len();
            if order == 1 {
                for (fi, face) in faces.iter().enumerate() {
                    if face.plane.signed_distance(source) > 0.0 {
                        images.push(ImageNode {
                            parent: None,
                            face: fi,
                            image: mirror_point(source, &face.plane),
                        });
                    }
                }
            } else {
                for parent in level_start..level_end {
                    let (pf, pimg) = (images[parent].face, images[parent].image);
                    for (fi, face) in faces.iter().enumerate() {
                        // The previous virtual source must sit on the exterior
                        // side of the next reflector.
                        if fi != pf && face.plane.signed_distance(pimg) > 0.0 {
                            images.push(ImageNode {
                                parent: Some(parent),
                                face: fi,
                                image: mirror_point(pimg, &face.plane),
                            });
                        }
                    }
                }
                level_start = level_end;
            }
            if images.len() == level_end {
                break;
            }
        }
        Ok(Self {
            scene,
            cfg,
            faces,
            source,
            images,
        })
    }

    pub fn faces(&self) -> &[Face] {
        &self.faces
    }

    pub fn trace_to(&self, rx: LocalPoint) -> Result<Vec<PropagationPath>, TraceError> {
        check_endpoint(self.scene, rx, "rx")?;
        if rx == self.source {
            return Err(TraceError::Endpoint("tx and rx coincide".into()));
        }
        let scale = self.cfg.tx_power_w.sqrt() * self.cfg.wavelength() / (4.0 * PI);
        let mut found: Vec<(Vec<usize>, PropagationPath)> = Vec::new();

        if !self.scene.segment_occluded(self.source, rx) {
            let vertices = vec![self.source, rx];
            found.push((Vec::new(), self.make_path(vertices, 1.0, scale)));
        }

        let mut chain = Vec::with_capacity(self.cfg.max_reflection_order);
        for leaf in 0..self.images.len() {
            chain.clear();
            let mut node = Some(leaf);
            while let Some(n) = node {
                chain.push(n);
                node = self.images[n].parent;
            }
            // chain: last bounce first
            if let Some((vertices, amplitude)) = self.unfold(&chain, rx) {
                let faces: Vec<usize> = chain.iter().rev().map(|&n| self.images[n].face).collect();
                found.push((faces, self.make_path(vertices, amplitude, scale)));
            }
        }

        found.sort_by(|(fa, a), (fb, b)| {
            a.delay
                .total_cmp(&b.delay)
                .then(a.order.cmp(&b.order))
                .then_with(|| fa.cmp(fb))
        });
        Ok(found.into_iter().map(|(_, p)| p).collect())
    }

    fn make_path(&self, vertices: Vec<LocalPoint>, amplitude: f64, scale: f64) -> PropagationPath {
        let length: f64 = vertices.windows(2).map(|w| w[0].distance(&w[1])).sum();
        PropagationPath {
            gain: Complex64::new(scale / length * amplitude, 0.0),
            delay: length / SPEED_OF_LIGHT,
            order: vertices.len() - 2,
            vertices,
        }
    }

    /// Walks back from the receiver through the image chain, returning the
    /// vertex list and accumulated material amplitude if every bounce lands
    /// on its face and every leg is unobstructed.
    fn unfold(&self, chain: &[usize], rx: LocalPoint) -> Option<(Vec<LocalPoint>, f64)> {
        let mut target = rx;
        let mut bounces = Vec::with_capacity(chain.len());
        let mut amplitude = 1.0;
        for &n in chain {
            let node = &self.images[n];
            let face = &self.faces[node.face];
            let d_target = face.plane.signed_distance(target);
            if d_target <= 0.0 {
                return None;
            }
            let d_image = face.plane.signed_distance(node.image);
            let t = d_target / (d_target - d_image);
            if !(t > 0.0 && t < 1.0) {
                return None;
            }
            let mut p = LocalPoint::new(
                target.x + t * (node.image.x - target.x),
                target.y + t * (node.image.y - target.y),
                target.z + t * (node.image.z - target.z),
            );
            // snap onto the plane to avoid drift in later legs
            let off = face.plane.signed_distance(p);
            p = LocalPoint::new(
                p.x - off * face.plane.normal[0],
                p.y - off * face.plane.normal[1],
                p.z - off * face.plane.normal[2],
            );
            if !face.contains(p) {
                return None;
            }
            amplitude *= face.amplitude;
            bounces.push(p);
            target = p;
        }
        // The source must also be on the exterior side of the first face.
        let first = &self.faces[self.images[*chain.last()?].face];
        if first.plane.signed_distance(self.source) <= 0.0 {
            return None;
        }

        let mut vertices = Vec::with_capacity(bounces.len() + 2);
        vertices.push(self.source);
        vertices.extend(bounces.iter().rev());
        vertices.push(rx);
        if vertices
            .windows(2)
            .any(|w| self.scene.segment_occluded(w[0], w[1]))
        {
            return None;
        }
        Some((vertices, amplitude))
    }
}

fn check_endpoint(scene: &Scene, p: LocalPoint, what: &str) -> Result<(), TraceError> {
    if !p.is_finite() {
        return Err(TraceError::Endpoint(format!("{what} is not finite")));
    }
    if !scene.bounds.contains_xy(p.x, p.y) {
        return Err(TraceError::Endpoint(format!(
            "{what} {p:?} outside scene bounds"
        )));
    }
    Ok(())
}

/// All LOS and specular paths between `tx` and `rx`, sorted by delay.
pub fn trace_paths(
    scene: &Scene,
    tx: LocalPoint,
    rx: LocalPoint,
    cfg: &TraceConfig,
) -> Result<Vec<PropagationPath>, TraceError> {
    PathTracer::new(scene, tx, *cfg)?.trace_to(rx)
}
