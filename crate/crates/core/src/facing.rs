//! Camera facing from sunrise/sunset frames, and bearing-wedge filtering.
//!
//! Solar position follows the NOAA solar calculator (Meeus-derived mean
//! elements, equation of time, hour angle), without atmospheric refraction.
//! The facing model: a frame shows the sun to the left of the optical axis,
//! to the right, or within the field of view near its center. Each
//! observation constrains the camera bearing to an arc and the estimate is
//! the intersection of the arcs.

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::distance::euclidean_transform;
use crate::error::{Error, Result};
use crate::mask::{check_same_shape, BitMask};
use crate::raster::Geotransform;

pub const DEFAULT_FOV_DEG: f64 = 40.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolarQuery {
    pub timestamp: DateTime<Utc>,
    pub latitude: f64,
    pub longitude: f64,
}

impl SolarQuery {
    pub fn new(timestamp: DateTime<Utc>, latitude: f64, longitude: f64) -> Result<Self> {
        if !(-90.0..=90.0).contains(&latitude) || !(-180.0..=180.0).contains(&longitude) {
            return Err(Error::Parameter(format!(
                "latitude/longitude out of range: ({latitude}, {longitude})"
            )));
        }
        Ok(SolarQuery {
            timestamp,
            latitude,
            longitude,
        })
    }

    /// Parses an RFC 3339 timestamp.
    pub fn parse(timestamp: &str, latitude: f64, longitude: f64) -> Result<Self> {
        let ts = DateTime::parse_from_rfc3339(timestamp)
            .map_err(|e| Error::Parameter(format!("bad timestamp `{timestamp}`: {e}")))?
            .with_timezone(&Utc);
        Self::new(ts, latitude, longitude)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SolarPosition {
    /// Degrees clockwise from true north.
    pub azimuth: f64,
    /// Degrees above the geometric horizon.
    pub elevation: f64,
}

fn julian_day(ts: &DateTime<Utc>) -> f64 {
    let secs = ts.timestamp() as f64 + f64::from(ts.timestamp_subsec_nanos()) * 1e-9;
    secs / 86_400.0 + 2_440_587.5
}

pub fn solar_position(q: &SolarQuery) -> SolarPosition {
    let jd = julian_day(&q.timestamp);
    let t = (jd - 2_451_545.0) / 36_525.0;

    let mean_long = (280.46646 + t * (36_000.769_83 + t * 0.000_303_2)).rem_euclid(360.0);
    let mean_anom = 357.52911 + t * (35_999.050_29 - 0.000_153_7 * t);
    let ecc = 0.016_708_634 - t * (0.000_042_037 + 0.000_000_126_7 * t);
    let m = mean_anom.to_radians();
    let center = m.sin() * (1.914_602 - t * (0.004_817 + 0.000_014 * t))
        + (2.0 * m).sin() * (0.019_993 - 0.000_101 * t)
        + (3.0 * m).sin() * 0.000_289;
    let true_long = mean_long + center;
    let omega = (125.04 - 1934.136 * t).to_radians();
    let apparent_long = true_long - 0.00569 - 0.00478 * omega.sin();
    let mean_obliq = 23.0 + (26.0 + (21.448 - t * (46.815 + t * (0.00059 - t * 0.001_813))) / 60.0) / 60.0;
    let obliq = (mean_obliq + 0.00256 * omega.cos()).to_radians();
    let decl = (obliq.sin() * apparent_long.to_radians().sin()).asin();

    let y = (obliq / 2.0).tan().powi(2);
    let l0 = mean_long.to_radians();
    let eq_time_min = 4.0
        * (y * (2.0 * l0).sin() - 2.0 * ecc * m.sin() + 4.0 * ecc * y * m.sin() * (2.0 * l0).cos()
            - 0.5 * y * y * (4.0 * l0).sin()
            - 1.25 * ecc * ecc * (2.0 * m).sin())
        .to_degrees();

    let utc_min = (jd + 0.5).rem_euclid(1.0) * 1440.0;
    let true_solar_min = (utc_min + eq_time_min + 4.0 * q.longitude).rem_euclid(1440.0);
    let hour_angle = if true_solar_min / 4.0 < 0.0 {
        true_solar_min / 4.0 + 180.0
    } else {
        true_solar_min / 4.0 - 180.0
    };

    let lat = q.latitude.to_radians();
    let h = hour_angle.to_radians();
    let cos_zen = (lat.sin() * decl.sin() + lat.cos() * decl.cos() * h.cos()).clamp(-1.0, 1.0);
    let zen = cos_zen.acos();
    let denom = lat.cos() * zen.sin();
    let azimuth = if denom.abs() < 1e-12 {
        // Sun at the zenith (or observer at a pole): pick east before
        // solar noon, west from noon on.
        if hour_angle < 0.0 {
            90.0
        } else {
            270.0
        }
    } else {
        let a = ((lat.sin() * cos_zen - decl.sin()) / denom)
            .clamp(-1.0, 1.0)
            .acos()
            .to_degrees();
        if hour_angle > 0.0 {
            (a + 180.0).rem_euclid(360.0)
        } else {
            (540.0 - a).rem_euclid(360.0)
        }
    };
    SolarPosition {
        azimuth,
        elevation: 90.0 - zen.to_degrees(),
    }
}

pub fn solar_azimuth(q: &SolarQuery) -> f64 {
    solar_position(q).azimuth
}

/// Where the sun appears relative to the camera's optical axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SunSide {
    Left,
    Right,
    Center,
}

/// Clockwise arc of bearings from `min_deg` to `max_deg`, inclusive.
/// `wraps` is set when the arc crosses north.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BearingInterval {
    pub min_deg: f64,
    pub max_deg: f64,
    pub wraps: bool,
}

impl BearingInterval {
    pub const FULL: BearingInterval = BearingInterval {
        min_deg: 0.0,
        max_deg: 360.0,
        wraps: false,
    };

    /// A span of 360 degrees or more is the full circle; equal endpoints
    /// otherwise are rejected.
    pub fn new(min_deg: f64, max_deg: f64) -> Result<Self> {
        if !min_deg.is_finite() || !max_deg.is_finite() {
            return Err(Error::Parameter("bearings must be finite".into()));
        }
        if max_deg - min_deg >= 360.0 {
            return Ok(Self::FULL);
        }
        let lo = min_deg.rem_euclid(360.0);
        let hi = max_deg.rem_euclid(360.0);
        if lo == hi {
            return Err(Error::Parameter(format!(
                "bearing interval [{min_deg}, {max_deg}] has zero width"
            )));
        }
        Ok(BearingInterval {
            min_deg: lo,
            max_deg: hi,
            wraps: lo > hi,
        })
    }

    fn from_arc(start: f64, width: f64) -> Result<Self> {
        if width >= 360.0 {
            return Ok(Self::FULL);
        }
        Self::new(start, start + width)
    }

    pub fn is_full(&self) -> bool {
        *self == Self::FULL
    }

    pub fn width(&self) -> f64 {
        if self.is_full() {
            360.0
        } else {
            (self.max_deg - self.min_deg).rem_euclid(360.0)
        }
    }

    pub fn midpoint(&self) -> f64 {
        (self.min_deg + self.width() / 2.0).rem_euclid(360.0)
    }

    pub fn contains(&self, bearing: f64) -> bool {
        if self.is_full() {
            return true;
        }
        let b = bearing.rem_euclid(360.0);
        if self.wraps {
            b >= self.min_deg || b <= self.max_deg
        } else {
            b >= self.min_deg && b <= self.max_deg
        }
    }

    /// Intersection; `None` when it is empty or a single bearing.
    pub fn intersect(&self, other: &BearingInterval) -> Option<BearingInterval> {
        if self.is_full() {
            return Some(*other);
        }
        if other.is_full() {
            return Some(*self);
        }
        let (w1, w2) = (self.width(), other.width());
        let d = (other.min_deg - self.min_deg).rem_euclid(360.0);
        // Work in self's frame, where self is [0, w1] and other is [d, d + w2]
        // or its copy one turn back.
        let pieces = [(d, d + w2), (d - 360.0, d - 360.0 + w2)]
            .into_iter()
            .map(|(a, b)| (a.max(0.0), b.min(w1)))
            .filter(|(a, b)| b > a)
            .collect::<Vec<_>>();
        match pieces.as_slice() {
            [(a, b)] => BearingInterval::from_arc(self.min_deg + a, b - a).ok(),
            // Two disjoint pieces need a combined width above 360 degrees;
            // keep the wider one.
            [(a1, b1), (a2, b2)] => {
                let (a, b) = if b1 - a1 >= b2 - a2 { (a1, b1) } else { (a2, b2) };
                BearingInterval::from_arc(self.min_deg + a, b - a).ok()
            }
            _ => None,
        }
    }
}

/// Camera bearings consistent with one frame: the sun at `sun_azimuth`
/// seen on `side`.
pub fn event_constraint(sun_azimuth: f64, side: SunSide, fov_deg: f64) -> Result<BearingInterval> {
    check_fov(fov_deg)?;
    match side {
        // Sun left of the axis: the camera looks clockwise of the sun.
        SunSide::Left => BearingInterval::from_arc(sun_azimuth, 180.0),
        SunSide::Right => BearingInterval::from_arc(sun_azimuth - 180.0, 180.0),
        SunSide::Center => BearingInterval::from_arc(sun_azimuth - fov_deg / 2.0, fov_deg),
    }
}

fn check_fov(fov_deg: f64) -> Result<()> {
    if !(fov_deg > 0.0 && fov_deg < 180.0) {
        return Err(Error::Parameter(format!(
            "field of view must be in (0, 180), got {fov_deg}"
        )));
    }
    Ok(())
}

pub fn facing_interval(
    sunrise_az: f64,
    sunset_az: f64,
    sun_side_at_sunrise: SunSide,
    sun_side_at_sunset: SunSide,
    horizontal_fov: f64,
) -> Result<BearingInterval> {
    let rise = event_constraint(sunrise_az, sun_side_at_sunrise, horizontal_fov)?;
    let set = event_constraint(sunset_az, sun_side_at_sunset, horizontal_fov)?;
    rise.intersect(&set).ok_or_else(|| {
        Error::Inconsistent(format!(
            "sun {sun_side_at_sunrise:?} at sunrise ({sunrise_az:.1} deg) and {sun_side_at_sunset:?} at sunset ({sunset_az:.1} deg) admit no facing"
        ))
    })
}

/// Bearing, clockwise from north, of a displacement given in pixels
/// (`d_row` positive southward).
#[inline]
pub fn pixel_bearing(d_row: i64, d_col: i64) -> f64 {
    (d_col as f64).atan2(-d_row as f64).to_degrees().rem_euclid(360.0)
}

/// Keeps candidates whose bearing toward the nearest landmark pixel falls in
/// `interval`. Landmark pixels themselves have no bearing and are dropped
/// unless the interval is the full circle.
pub fn bearing_filter(
    candidates: &BitMask,
    landmark: &BitMask,
    interval: &BearingInterval,
    _gt: &Geotransform,
) -> Result<BitMask> {
    check_same_shape(candidates, landmark)?;
    if landmark.is_empty() {
        return Err(Error::Parameter(
            "bearing filter needs a non-empty landmark mask".into(),
        ));
    }
    if interval.is_full() {
        return Ok(candidates.clone());
    }
    let t = euclidean_transform(landmark);
    let mut out = BitMask::empty(candidates.width(), candidates.height());
    for (r, c) in candidates.iter_ones() {
        let (sr, sc) = t.site_at(r, c).expect("landmark is non-empty");
        if (sr, sc) == (r, c) {
            continue;
        }
        let b = pixel_bearing(sr as i64 - r as i64, sc as i64 - c as i64);
        if interval.contains(b) {
            out.set(r, c, true);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn q(ts: &str, lat: f64, lon: f64) -> SolarQuery {
        SolarQuery::parse(ts, lat, lon).unwrap()
    }

    // Reference values from NREL SPA (pvlib 0.15, method nrel_numpy).
    #[test]
    fn mpala_azimuths_match_reference() {
        for (ts, expect) in [
            ("2021-01-15T04:00:00Z", 111.1707),
            ("2021-06-21T14:00:00Z", 295.2081),
            ("2021-09-10T06:30:00Z", 83.4541),
        ] {
            let az = solar_azimuth(&q(ts, 0.29, 36.90));
            assert!((az - expect).abs() < 0.5, "{ts}: {az} vs {expect}");
        }
    }

    #[test]
    fn equinox_at_equator() {
        let rise = solar_position(&q("2024-03-20T06:07:00Z", 0.0, 0.0));
        assert!(rise.elevation.abs() < 1.0);
        assert!((rise.azimuth - 90.0).abs() < 1.0, "{rise:?}");
        let set = solar_position(&q("2024-03-20T18:07:00Z", 0.0, 0.0));
        assert!((set.azimuth - 270.0).abs() < 1.0, "{set:?}");
    }

    #[test]
    fn azimuth_is_defined_near_the_zenith() {
        for ts in ["2024-03-20T12:07:00Z", "2024-03-20T12:07:30Z"] {
            let p = solar_position(&q(ts, 0.0, 0.0));
            assert!(p.elevation > 89.0);
            assert!(p.azimuth.is_finite() && (0.0..360.0).contains(&p.azimuth));
        }
    }

    #[test]
    fn longitude_shift_by_a_full_turn_is_invisible() {
        let a = solar_azimuth(&q("2021-06-21T08:00:00Z", 10.0, 100.0));
        let b = solar_position(&SolarQuery {
            timestamp: q("2021-06-21T08:00:00Z", 0.0, 0.0).timestamp,
            latitude: 10.0,
            longitude: 100.0 - 360.0,
        })
        .azimuth;
        assert!((a - b).abs() < 1e-9);
    }

    #[test]
    fn rejects_out_of_range_queries() {
        assert!(SolarQuery::parse("2021-01-01T00:00:00Z", 91.0, 0.0).is_err());
        assert!(SolarQuery::parse("not a time", 0.0, 0.0).is_err());
    }

    #[test]
    fn south_by_southeast_example() {
        let iv = facing_interval(90.0, 270.0, SunSide::Left, SunSide::Right, 40.0).unwrap();
        assert!(iv.contains(157.5));
        assert!(!iv.contains(45.0) && !iv.contains(300.0));
    }

    #[test]
    fn centered_sun_pins_facing() {
        let iv = event_constraint(90.0, SunSide::Center, 40.0).unwrap();
        assert_eq!(iv.midpoint(), 90.0);
        assert_eq!((iv.min_deg, iv.max_deg), (70.0, 110.0));
    }

    #[test]
    fn contradictory_sides_are_inconsistent() {
        let err = facing_interval(90.0, 270.0, SunSide::Left, SunSide::Left, 40.0).unwrap_err();
        assert!(matches!(err, Error::Inconsistent(_)));
        // Oracle: no whole-degree facing has the sun strictly left at both events.
        let left_of = |sun: f64, f: f64| {
            let off = (sun - f + 180.0).rem_euclid(360.0) - 180.0;
            off < 0.0 && off > -180.0
        };
        assert!((0..360).all(|f| !(left_of(90.0, f as f64) && left_of(270.0, f as f64))));
    }

    #[test]
    fn fov_bounds() {
        assert!(facing_interval(90.0, 270.0, SunSide::Left, SunSide::Right, 0.0).is_err());
        assert!(facing_interval(90.0, 270.0, SunSide::Left, SunSide::Right, 180.0).is_err());
    }

    #[test]
    fn forward_simulation_always_contains_truth() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for _ in 0..2000 {
            let facing: f64 = rng.random_range(0.0..360.0);
            let fov: f64 = rng.random_range(20.0..120.0);
            let rise: f64 = rng.random_range(60.0..120.0);
            let set: f64 = rng.random_range(240.0..300.0);
            let mut side = |sun: f64| {
                let off = (sun - facing + 180.0).rem_euclid(360.0) - 180.0;
                if off.abs() <= fov / 2.0 && rng.random_bool(0.5) {
                    SunSide::Center
                } else if off < 0.0 {
                    SunSide::Left
                } else {
                    SunSide::Right
                }
            };
            let (s1, s2) = (side(rise), side(set));
            let iv = facing_interval(rise, set, s1, s2, fov).unwrap();
            assert!(iv.contains(facing), "{facing} {s1:?} {s2:?} {iv:?}");
        }
    }

    #[test]
    fn interval_normalization() {
        let iv = BearingInterval::new(315.0, 45.0).unwrap();
        assert!(iv.wraps && iv.contains(0.0) && iv.contains(350.0) && !iv.contains(90.0));
        assert_eq!(iv.width(), 90.0);
        assert!(BearingInterval::new(0.0, 360.0).unwrap().is_full());
        assert!(BearingInterval::new(10.0, 10.0).is_err());
        assert!(BearingInterval::new(-45.0, 45.0).unwrap().contains(0.0));
    }

    fn gt() -> Geotransform {
        Geotransform::new(0.0, 0.0, 10.0).unwrap()
    }

    #[test]
    fn looking_north_keeps_pixels_south_of_the_landmark() {
        let mut lm = BitMask::empty(21, 21);
        lm.set(10, 10, true);
        let full = BitMask::full(21, 21);
        let iv = BearingInterval::new(315.0, 45.0).unwrap();
        let kept = bearing_filter(&full, &lm, &iv, &gt()).unwrap();
        for (r, c) in full.iter_ones() {
            let (dr, dc) = (r as i64 - 10, c as i64 - 10);
            let expect = dr > 0 && dc.abs() <= dr;
            assert_eq!(kept.get(r, c), expect, "{r},{c}");
        }
    }

    #[test]
    fn full_circle_is_identity_and_empty_landmark_errors() {
        let cand = BitMask::from_fn(8, 8, |r, c| (r + c) % 3 == 0);
        let mut lm = BitMask::empty(8, 8);
        lm.set(3, 3, true);
        assert_eq!(bearing_filter(&cand, &lm, &BearingInterval::FULL, &gt()).unwrap(), cand);
        assert!(bearing_filter(&cand, &BitMask::empty(8, 8), &BearingInterval::FULL, &gt()).is_err());
    }

    #[test]
    fn random_masks_match_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for _ in 0..50 {
            let cand = BitMask::from_fn(32, 32, |_, _| rng.random_bool(0.5));
            let lm = BitMask::from_fn(32, 32, |_, _| rng.random_bool(0.03));
            if lm.is_empty() {
                continue;
            }
            let lo: f64 = rng.random_range(0.0..360.0);
            let iv = BearingInterval::new(lo, lo + rng.random_range(10.0..350.0)).unwrap();
            let got = bearing_filter(&cand, &lm, &iv, &gt()).unwrap();
            let sites: Vec<_> = lm.iter_ones().collect();
            for (r, c) in cand.iter_ones() {
                let &(sr, sc) = sites
                    .iter()
                    .min_by_key(|&&(sr, sc)| {
                        let (dr, dc) = (sr as i64 - r as i64, sc as i64 - c as i64);
                        (dr * dr + dc * dc, sc, sr)
                    })
                    .unwrap();
                let expect = (sr, sc) != (r, c) && {
                    let b = ((sc as f64 - c as f64).atan2(r as f64 - sr as f64))
                        .to_degrees()
                        .rem_euclid(360.0);
                    iv.contains(b)
                };
                assert_eq!(got.get(r, c), expect);
            }
        }
    }
}
