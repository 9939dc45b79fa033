//! Geodetic (WGS84) to UTM to scene-local coordinate conversion.
//!
//! The forward projection uses the Krüger series for the transverse Mercator
//! projection carried to sixth order in the third flattening, which is accurate
//! to well under a millimetre inside a UTM zone.

use serde::{Deserialize, Serialize};
use thiserror::Error;

const WGS84_A: f64 = 6_378_137.0;
const WGS84_F: f64 = 1.0 / 298.257_223_563;
const UTM_K0: f64 = 0.9996;
const FALSE_EASTING: f64 = 500_000.0;
const FALSE_NORTHING_SOUTH: f64 = 10_000_000.0;

#[derive(Debug, Error, PartialEq)]
pub enum GeoError {
    #[error("latitude {0} outside [-90, 90]")]
    Latitude(f64),
    #[error("longitude {0} outside [-180, 180]")]
    Longitude(f64),
    #[error("UTM zone {0} outside 1..=60")]
    Zone(u8),
    #[error("zone/hemisphere mismatch: point in {point}, origin in {origin}")]
    ZoneMismatch { point: String, origin: String },
    #[error("non-finite coordinate")]
    NonFinite,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Hemisphere {
    N,
    S,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeodeticPoint {
    pub lat: f64,
    pub lon: f64,
}

impl GeodeticPoint {
    pub fn new(lat: f64, lon: f64) -> Result<Self, GeoError> {
        if !lat.is_finite() || !lon.is_finite() {
            return Err(GeoError::NonFinite);
        }
        if !(-90.0..=90.0).contains(&lat) {
            return Err(GeoError::Latitude(lat));
        }
        if !(-180.0..=180.0).contains(&lon) {
            return Err(GeoError::Longitude(lon));
        }
        Ok(Self { lat, lon })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UtmPoint {
    pub easting: f64,
    pub northing: f64,
    pub zone: u8,
    pub hemisphere: Hemisphere,
}

impl UtmPoint {
    fn zone_label(&self) -> String {
        format!("{}{:?}", self.zone, self.hemisphere)
    }
}

/// Point in the scene frame, metres, z up.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LocalPoint {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl LocalPoint {
    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    pub fn distance(&self, other: &LocalPoint) -> f64 {
        let (dx, dy, dz) = (self.x - other.x, self.y - other.y, self.z - other.z);
        (dx * dx + dy * dy + dz * dz).sqrt()
    }
}

/// Standard UTM zone for a longitude, ignoring the Norway/Svalbard exceptions.
pub fn zone_for_longitude(lon: f64) -> u8 {
    let z = ((lon + 180.0) / 6.0).floor() as i32 + 1;
    z.clamp(1, 60) as u8
}

pub fn central_meridian(zone: u8) -> f64 {
    f64::from(zone) * 6.0 - 183.0
}

pub fn geodetic_to_utm(p: GeodeticPoint) -> Result<UtmPoint, GeoError> {
    let p = GeodeticPoint::new(p.lat, p.lon)?;
    geodetic_to_utm_in_zone(p, zone_for_longitude(p.lon))
}

/// Projects into a forced zone; used to keep a whole site in one frame when
/// it straddles a zone boundary.
pub fn geodetic_to_utm_in_zone(p: GeodeticPoint, zone: u8) -> Result<UtmPoint, GeoError> {
    let p = GeodeticPoint::new(p.lat, p.lon)?;
    if !(1..=60).contains(&zone) {
        return Err(GeoError::Zone(zone));
    }
    let (x, y) = transverse_mercator(p.lat, p.lon - central_meridian(zone));
    let hemisphere = if p.lat >= 0.0 {
        Hemisphere::N
    } else {
        Hemisphere::S
    };
    let northing = match hemisphere {
        Hemisphere::N => y,
        Hemisphere::S => y + FALSE_NORTHING_SOUTH,
    };
    Ok(UtmPoint {
        easting: x + FALSE_EASTING,
        northing,
        zone,
        hemisphere,
    })
}

/// Krüger-series transverse Mercator, returning (x, y) in metres relative to
/// the central meridian and equator, scaled by k0.
fn transverse_mercator(lat_deg: f64, dlon_deg: f64) -> (f64, f64) {
    let n = WGS84_F / (2.0 - WGS84_F);
    let n2 = n * n;
    let n3 = n2 * n;
    let n4 = n3 * n;
    let n5 = n4 * n;
    let n6 = n5 * n;
    let rectifying_radius = WGS84_A / (1.0 + n) * (1.0 + n2 / 4.0 + n4 / 64.0 + n6 / 256.0);
    let alpha = [
        n / 2.0 - 2.0 * n2 / 3.0 + 5.0 * n3 / 16.0 + 41.0 * n4 / 180.0 - 127.0 * n5 / 288.0
            + 7891.0 * n6 / 37800.0,
        13.0 * n2 / 48.0 - 3.0 * n3 / 5.0 + 557.0 * n4 / 1440.0 + 281.0 * n5 / 630.0
            - 1_983_433.0 * n6 / 1_935_360.0,
        61.0 * n3 / 240.0 - 103.0 * n4 / 140.0
            + 15061.0 * n5 / 26880.0
            + 167_603.0 * n6 / 181_440.0,
        49561.0 * n4 / 161_280.0 - 179.0 * n5 / 168.0 + 6_601_661.0 * n6 / 7_257_600.0,
        34729.0 * n5 / 80640.0 - 3_418_889.0 * n6 / 1_995_840.0,
        212_378_941.0 * n6 / 319_334_400.0,
    ];

    let e = (WGS84_F * (2.0 - WGS84_F)).sqrt();
    let phi = lat_deg.to_radians();
    let lam = dlon_deg.to_radians();

    // conformal latitude, via its tangent
    let tau = phi.tan();
    let sigma = (e * (e * tau / (1.0 + tau * tau).sqrt()).atanh()).sinh();
    let tau_c = tau * (1.0 + sigma * sigma).sqrt() - sigma * (1.0 + tau * tau).sqrt();

    let xi_p = tau_c.atan2(lam.cos());
    let eta_p = (lam.sin() / (tau_c * tau_c + lam.cos() * lam.cos()).sqrt()).asinh();

    let mut xi = xi_p;
    let mut eta = eta_p;
    for (j, a) in alpha.iter().enumerate() {
        let k = 2.0 * (j as f64 + 1.0);
        xi += a * (k * xi_p).sin() * (k * eta_p).cosh();
        eta += a * (k * xi_p).cos() * (k * eta_p).sinh();
    }
    (
        UTM_K0 * rectifying_radius * eta,
        UTM_K0 * rectifying_radius * xi,
    )
}

/// Translates a UTM point into the scene frame anchored at `origin`; the
/// height is supplied by the caller.
pub fn utm_to_local(p: UtmPoint, origin: UtmPoint, z: f64) -> Result<LocalPoint, GeoError> {
    if p.zone != origin.zone || p.hemisphere != origin.hemisphere {
        return Err(GeoError::ZoneMismatch {
            point: p.zone_label(),
            origin: origin.zone_label(),
        });
    }
    Ok(LocalPoint::new(
        p.easting - origin.easting,
        p.northing - origin.northing,
        z,
    ))
}

pub fn local_to_utm(p: LocalPoint, origin: UtmPoint) -> UtmPoint {
    UtmPoint {
        easting: origin.easting + p.x,
        northing: origin.northing + p.y,
        ..origin
    }
}

/// Scene frame anchored at the south-west corner of a geodetic bounding box.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SiteFrame {
    pub origin: UtmPoint,
    /// East-west and north-south extent of the box in the local frame.
    pub extent: (f64, f64),
}

impl SiteFrame {
    pub fn from_bbox(a: GeodeticPoint, b: GeodeticPoint) -> Result<Self, GeoError> {
        let (lat0, lat1) = (a.lat.min(b.lat), a.lat.max(b.lat));
        let (lon0, lon1) = (a.lon.min(b.lon), a.lon.max(b.lon));
        let zone = zone_for_longitude(lon0);
        let corners = [(lat0, lon0), (lat0, lon1), (lat1, lon0), (lat1, lon1)]
            .into_iter()
            .map(|(lat, lon)| geodetic_to_utm_in_zone(GeodeticPoint::new(lat, lon)?, zone))
            .collect::<Result<Vec<_>, _>>()?;
        let hemisphere = corners[0].hemisphere;
        if corners.iter().any(|c| c.hemisphere != hemisphere) {
            return Err(GeoError::ZoneMismatch {
                point: corners[3].zone_label(),
                origin: corners[0].zone_label(),
            });
        }
        let min_e = corners
            .iter()
            .map(|c| c.easting)
            .fold(f64::INFINITY, f64::min);
        let max_e = corners
            .iter()
            .map(|c| c.easting)
            .fold(f64::NEG_INFINITY, f64::max);
        let min_n = corners
            .iter()
            .map(|c| c.northing)
            .fold(f64::INFINITY, f64::min);
        let max_n = corners
            .iter()
            .map(|c| c.northing)
            .fold(f64::NEG_INFINITY, f64::max);
        Ok(Self {
            origin: UtmPoint {
                easting: min_e,
                northing: min_n,
                zone,
                hemisphere,
            },
            extent: (max_e - min_e, max_n - min_n),
        })
    }

    pub fn to_local(&self, p: GeodeticPoint, z: f64) -> Result<LocalPoint, GeoError> {
        let utm = geodetic_to_utm_in_zone(p, self.origin.zone)?;
        utm_to_local(utm, self.origin, z)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Snyder's USGS map-projection power series in the
    /// longitude offset, coded independently of the Krüger route.
    fn snyder_utm(lat_deg: f64, lon_deg: f64, zone: u8) -> (f64, f64) {
        let a = WGS84_A;
        let e2 = WGS84_F * (2.0 - WGS84_F);
        let ep2 = e2 / (1.0 - e2);
        let phi = lat_deg.to_radians();
        let lam0 = central_meridian(zone).to_radians();
        let n = a / (1.0 - e2 * phi.sin().powi(2)).sqrt();
        let t = phi.tan().powi(2);
        let c = ep2 * phi.cos().powi(2);
        let aa = phi.cos() * (lon_deg.to_radians() - lam0);
        let e4 = e2 * e2;
        let e6 = e4 * e2;
        let m = a
            * ((1.0 - e2 / 4.0 - 3.0 * e4 / 64.0 - 5.0 * e6 / 256.0) * phi
                - (3.0 * e2 / 8.0 + 3.0 * e4 / 32.0 + 45.0 * e6 / 1024.0) * (2.0 * phi).sin()
                + (15.0 * e4 / 256.0 + 45.0 * e6 / 1024.0) * (4.0 * phi).sin()
                - (35.0 * e6 / 3072.0) * (6.0 * phi).sin());
        let x = UTM_K0
            * n
            * (aa
                + (1.0 - t + c) * aa.powi(3) / 6.0
                + (5.0 - 18.0 * t + t * t + 72.0 * c - 58.0 * ep2) * aa.powi(5) / 120.0);
        let y = UTM_K0
            * (m + n
                * phi.tan()
                * (aa * aa / 2.0
                    + (5.0 - t + 9.0 * c + 4.0 * c * c) * aa.powi(4) / 24.0
                    + (61.0 - 58.0 * t + t * t + 600.0 * c - 330.0 * ep2) * aa.powi(6) / 720.0));
        (x + FALSE_EASTING, y)
    }

    #[test]
    fn site_longitude_falls_in_zone_44_north() {
        let p = geodetic_to_utm(GeodeticPoint::new(16.4649, 80.5078).unwrap()).unwrap();
        assert_eq!(p.zone, 44);
        assert_eq!(p.hemisphere, Hemisphere::N);
        assert!((100_000.0..=900_000.0).contains(&p.easting));
    }

    #[test]
    fn matches_independent_series() {
        let p = geodetic_to_utm(GeodeticPoint::new(16.4649, 80.5078).unwrap()).unwrap();
        let (e, n) = snyder_utm(16.4649, 80.5078, 44);
        assert!((p.easting - e).abs() < 0.01, "{} vs {}", p.easting, e);
        assert!((p.northing - n).abs() < 0.01, "{} vs {}", p.northing, n);
    }

    #[test]
    fn central_meridian_maps_to_false_easting() {
        let p = geodetic_to_utm(GeodeticPoint::new(16.4649, 81.0).unwrap()).unwrap();
        assert_eq!(p.zone, 44);
        assert_eq!(p.easting, 500_000.0);
        let q = geodetic_to_utm(GeodeticPoint::new(-33.0, 3.0).unwrap()).unwrap();
        assert_eq!(q.easting, 500_000.0);
        assert_eq!(q.hemisphere, Hemisphere::S);
    }

    #[test]
    fn southern_hemisphere_adds_false_northing() {
        let p = geodetic_to_utm(GeodeticPoint::new(-0.001, 81.0).unwrap()).unwrap();
        assert!(p.northing > 9_999_000.0 && p.northing < FALSE_NORTHING_SOUTH);
    }

    #[test]
    fn rejects_out_of_range() {
        assert_eq!(GeodeticPoint::new(91.0, 0.0), Err(GeoError::Latitude(91.0)));
        assert_eq!(
            GeodeticPoint::new(0.0, -181.0),
            Err(GeoError::Longitude(-181.0))
        );
        let bad = GeodeticPoint {
            lat: 95.0,
            lon: 0.0,
        };
        assert!(geodetic_to_utm(bad).is_err());
    }

    #[test]
    fn local_translation() {
        let origin = UtmPoint {
            easting: 300_000.0,
            northing: 1_820_000.0,
            zone: 44,
            hemisphere: Hemisphere::N,
        };
        assert_eq!(
            utm_to_local(origin, origin, 1.5).unwrap(),
            LocalPoint::new(0.0, 0.0, 1.5)
        );
        let p = UtmPoint {
            easting: 300_010.0,
            northing: 1_820_020.0,
            ..origin
        };
        assert_eq!(
            utm_to_local(p, origin, 2.0).unwrap(),
            LocalPoint::new(10.0, 20.0, 2.0)
        );
        let other = UtmPoint { zone: 43, ..origin };
        assert!(matches!(
            utm_to_local(other, origin, 0.0),
            Err(GeoError::ZoneMismatch { .. })
        ));
    }

    #[test]
    fn campus_site_frame_is_roughly_300_m() {
        let frame = SiteFrame::from_bbox(
            GeodeticPoint::new(16.46269, 80.50635).unwrap(),
            GeodeticPoint::new(16.46564, 80.50887).unwrap(),
        )
        .unwrap();
        assert_eq!(frame.origin.zone, 44);
        assert!(frame.extent.0 > 250.0 && frame.extent.0 < 300.0);
        assert!(frame.extent.1 > 300.0 && frame.extent.1 < 350.0);
        let sw = frame
            .to_local(GeodeticPoint::new(16.46269, 80.50635).unwrap(), 0.0)
            .unwrap();
        assert!(sw.x >= -1e-9 && sw.y >= -1e-9);
    }

    proptest! {
        #[test]
        fn site_longitudes_stay_in_zone_44(lon in 80.50635f64..=80.50887, lat in 16.46269f64..=16.46564) {
            let p = geodetic_to_utm(GeodeticPoint::new(lat, lon).unwrap()).unwrap();
            prop_assert_eq!(p.zone, 44);
        }

        #[test]
        fn local_round_trip(x in -1e4f64..1e4, y in -1e4f64..1e4, z in 0.0f64..100.0,
                            e0 in 2e5f64..8e5, n0 in 0.0f64..9e6) {
            let origin = UtmPoint { easting: e0, northing: n0, zone: 44, hemisphere: Hemisphere::N };
            let back = utm_to_local(local_to_utm(LocalPoint::new(x, y, z), origin), origin, z).unwrap();
            prop_assert!((back.x - x).abs() < 1e-9 && (back.y - y).abs() < 1e-9);
        }

        #[test]
        fn nearby_points_stay_separated(lat in 16.46f64..16.47, lon in 80.50f64..80.51,
                                        bearing in 0.0f64..std::f64::consts::TAU) {
            // ~1.5 m step on the sphere; projection distortion is far below 1%.
            let step_m = 1.5;
            let dlat = step_m * bearing.cos() / 110_574.0;
            let dlon = step_m * bearing.sin() / (111_320.0 * lat.to_radians().cos());
            let a = geodetic_to_utm(GeodeticPoint::new(lat, lon).unwrap()).unwrap();
            let b = geodetic_to_utm(GeodeticPoint::new(lat + dlat, lon + dlon).unwrap()).unwrap();
            let d = ((a.easting - b.easting).powi(2) + (a.northing - b.northing).powi(2)).sqrt();
            prop_assert!(d >= 0.99, "separation {}", d);
        }
    }
}
