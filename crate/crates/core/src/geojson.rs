//! Minimal GeoJSON polygon ingestion.
//!
//! Accepts `Polygon`, `MultiPolygon`, a `Feature` wrapping either, or a
//! `FeatureCollection` whose features are unioned. Positions are
//! `[x, y]`; extra ordinates are ignored.

use serde_json::Value;

use crate::error::{Error, Result};
use crate::geo::{MultiPolygon, Point, Polygon};

/// Parses GeoJSON text, mapping every position through `project`.
pub fn parse_polygons(text: &str, project: impl Fn(f64, f64) -> Point) -> Result<MultiPolygon> {
    let v: Value = serde_json::from_str(text).map_err(|e| Error::Geometry(format!("invalid GeoJSON: {e}")))?;
    let mut out = Vec::new();
    collect(&v, &project, &mut out, 0)?;
    if out.is_empty() {
        return Err(Error::Geometry("GeoJSON holds no polygons".into()));
    }
    Ok(MultiPolygon(out))
}

fn collect(v: &Value, project: &dyn Fn(f64, f64) -> Point, out: &mut Vec<Polygon>, depth: usize) -> Result<()> {
    if depth > 4 {
        return Err(Error::Geometry("GeoJSON nesting too deep".into()));
    }
    let ty = v
        .get("type")
        .and_then(Value::as_str)
        .ok_or_else(|| Error::Geometry("GeoJSON object without a `type`".into()))?;
    match ty {
        "FeatureCollection" => {
            let features = v
                .get("features")
                .and_then(Value::as_array)
                .ok_or_else(|| Error::Geometry("FeatureCollection without `features`".into()))?;
            for f in features {
                collect(f, project, out, depth + 1)?;
            }
        }
        "Feature" => {
            let g = v
                .get("geometry")
                .ok_or_else(|| Error::Geometry("Feature without `geometry`".into()))?;
            collect(g, project, out, depth + 1)?;
        }
        "Polygon" => out.push(polygon(coords(v)?, project)?),
        "MultiPolygon" => {
            let parts = coords(v)?
                .as_array()
                .ok_or_else(|| Error::Geometry("MultiPolygon coordinates must be an array".into()))?;
            for p in parts {
                out.push(polygon(p, project)?);
            }
        }
        other => return Err(Error::Geometry(format!("unsupported GeoJSON type `{other}`"))),
    }
    Ok(())
}

fn coords(v: &Value) -> Result<&Value> {
    v.get("coordinates")
        .ok_or_else(|| Error::Geometry("geometry without `coordinates`".into()))
}

fn polygon(v: &Value, project: &dyn Fn(f64, f64) -> Point) -> Result<Polygon> {
    let rings = v
        .as_array()
        .ok_or_else(|| Error::Geometry("polygon coordinates must be an array of rings".into()))?;
    let mut rings = rings.iter().map(|r| ring(r, project));
    let exterior = rings
        .next()
        .ok_or_else(|| Error::Geometry("polygon without an exterior ring".into()))??;
    let holes = rings.collect::<Result<Vec<_>>>()?;
    Polygon::new(exterior, holes)
}

fn ring(v: &Value, project: &dyn Fn(f64, f64) -> Point) -> Result<Vec<Point>> {
    v.as_array()
        .ok_or_else(|| Error::Geometry("ring must be an array of positions".into()))?
        .iter()
        .map(|p| {
            let xy = p.as_array().filter(|a| a.len() >= 2);
            match xy.map(|a| (a[0].as_f64(), a[1].as_f64())) {
                Some((Some(x), Some(y))) => Ok(project(x, y)),
                _ => Err(Error::Geometry(format!("invalid position {p}"))),
            }
        })
        .collect()
}
