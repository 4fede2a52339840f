use std::f64::consts::PI;

use super::{polygon_self_intersects, signed_area, GeometryError, Point2, TrackMesh};

/// Input for [`generate_track`]: a closed centerline and the ring to build
/// around it.
#[derive(Debug, Clone)]
pub struct TrackSpec {
    pub name: String,
    /// Closed polyline; the last point connects back to the first.
    pub centerline: Vec<Point2>,
    pub half_width: f64,
    pub vertices_per_side: usize,
}

/// Triangulates the ring between the two offsets of a closed centerline.
///
/// Outer vertices come first (`0..n`), inner vertices after (`n..2n`), both
/// counterclockwise from the resampled centerline's first point.
pub fn generate_track(spec: &TrackSpec) -> Result<TrackMesh, GeometryError> {
    let n = spec.vertices_per_side;
    if n < 3 {
        return Err(GeometryError::MalformedTrack("need at least 3 vertices per side".into()));
    }
    if !(spec.half_width > 0.0) {
        return Err(GeometryError::MalformedTrack("half-width must be positive".into()));
    }
    let mut poly = spec.centerline.clone();
    if poly.len() > 1 && poly.first() == poly.last() {
        poly.pop();
    }
    if poly.len() < 3 {
        return Err(GeometryError::MalformedTrack("centerline needs at least 3 points".into()));
    }
    if polygon_self_intersects(&poly) {
        return Err(GeometryError::SelfIntersecting);
    }
    if signed_area(&poly) < 0.0 {
        poly[1..].reverse();
    }
    let center = resample_closed(&poly, n);

    let hw = spec.half_width;
    let mut outer = Vec::with_capacity(n);
    let mut inner = Vec::with_capacity(n);
    for k in 0..n {
        let tangent = (center[(k + 1) % n] - center[(k + n - 1) % n]).normalized();
        let left = tangent.perp();
        inner.push(center[k] + left * hw);
        outer.push(center[k] - left * hw);
    }
    // offsets must keep the centerline's direction and stay simple
    for k in 0..n {
        let c = center[(k + 1) % n] - center[k];
        if (inner[(k + 1) % n] - inner[k]).dot(c) <= 0.0 || (outer[(k + 1) % n] - outer[k]).dot(c) <= 0.0 {
            return Err(GeometryError::SelfIntersecting);
        }
    }
    if polygon_self_intersects(&inner) || polygon_self_intersects(&outer) {
        return Err(GeometryError::SelfIntersecting);
    }

    let mut vertices = outer;
    vertices.extend(inner);
    let mut triangles = Vec::with_capacity(2 * n);
    for k in 0..n {
        let (o0, o1) = (k, (k + 1) % n);
        let (i0, i1) = (n + k, n + (k + 1) % n);
        triangles.push([o0, o1, i1]);
        triangles.push([o0, i1, i0]);
    }
    TrackMesh::new(spec.name.clone(), vertices, triangles)
}

/// `n` points evenly spaced by arclength along a closed polyline, starting
/// at its first point.
fn resample_closed(poly: &[Point2], n: usize) -> Vec<Point2> {
    let m = poly.len();
    let seg: Vec<f64> = (0..m).map(|i| poly[i].dist(poly[(i + 1) % m])).collect();
    let total: f64 = seg.iter().sum();
    let mut out = Vec::with_capacity(n);
    let mut i = 0usize;
    let mut seg_start = 0.0;
    for k in 0..n {
        let s = total * k as f64 / n as f64;
        while i + 1 < m && seg_start + seg[i] < s {
            seg_start += seg[i];
            i += 1;
        }
        let t = ((s - seg_start) / seg[i]).clamp(0.0, 1.0);
        out.push(poly[i] + (poly[(i + 1) % m] - poly[i]) * t);
    }
    out
}

pub fn circle_polyline(radius: f64, samples: usize) -> Vec<Point2> {
    (0..samples)
        .map(|k| {
            let a = 2.0 * PI * k as f64 / samples as f64;
            Point2::new(radius * a.cos(), radius * a.sin())
        })
        .collect()
}

/// Stadium shape: two straights of length `straight` joined by semicircles
/// of radius `radius`, counterclockwise, starting at the middle of the
/// bottom straight. Perimeter is `2·straight + 2π·radius`.
pub fn oval_polyline(straight: f64, radius: f64, samples_per_meter: f64) -> Vec<Point2> {
    let half = 0.5 * straight;
    let n_straight = ((straight * samples_per_meter).ceil() as usize).max(1);
    let n_arc = ((PI * radius * samples_per_meter).ceil() as usize).max(8);
    let mut pts = Vec::new();
    for k in 0..n_straight {
        pts.push(Point2::new(-half + straight * k as f64 / n_straight as f64, -radius));
    }
    // rotate the start to the middle of the bottom straight
    let rot = n_straight / 2;
    let mut bottom = std::mem::take(&mut pts);
    bottom.rotate_left(rot);
    let (first_half, second_half) = bottom.split_at(n_straight - rot);
    pts.extend_from_slice(first_half);
    for k in 0..n_arc {
        let a = -PI / 2.0 + PI * k as f64 / n_arc as f64;
        pts.push(Point2::new(half + radius * a.cos(), radius * a.sin()));
    }
    for k in 0..n_straight {
        pts.push(Point2::new(half - straight * k as f64 / n_straight as f64, radius));
    }
    for k in 0..n_arc {
        let a = PI / 2.0 + PI * k as f64 / n_arc as f64;
        pts.push(Point2::new(-half + radius * a.cos(), radius * a.sin()));
    }
    pts.extend_from_slice(second_half);
    pts
}

/// Lemniscate of Gerono; crosses itself at the origin.
pub fn figure_eight_polyline(size: f64, samples: usize) -> Vec<Point2> {
    (0..samples)
        .map(|k| {
            let t = 2.0 * PI * k as f64 / samples as f64;
            Point2::new(size * t.sin(), size * t.sin() * t.cos())
        })
        .collect()
}
