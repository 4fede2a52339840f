use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::{normalize_angle, linear_sum_assignment, BoundaryLoop, GeometryError, Point2, TrackMesh};

/// Direction of travel along the waypoint order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Forward,
    Reverse,
}

impl Direction {
    pub fn sign(self) -> f64 {
        match self {
            Direction::Forward => 1.0,
            Direction::Reverse => -1.0,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Direction::Forward => "forward",
            Direction::Reverse => "reverse",
        }
    }
}

impl std::str::FromStr for Direction {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "forward" | "F" => Ok(Direction::Forward),
            "reverse" | "R" => Ok(Direction::Reverse),
            other => Err(format!("unknown direction `{other}`")),
        }
    }
}

/// Closed waypoint spline with per-waypoint track widths.
#[derive(Debug, Clone, PartialEq)]
pub struct CenterLine {
    pub waypoints: Vec<Point2>,
    pub widths: Vec<f64>,
    pub cumulative_arclength: Vec<f64>,
    pub lap_length: f64,
    pub closed: bool,
    curvature: Vec<f64>,
}

/// The car's position expressed relative to the centerline.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrackPose {
    pub nearest_segment_index: usize,
    /// Unsigned distance to the closest point of the spline.
    pub lateral_deviation: f64,
    pub arclength_s: f64,
    pub heading_of_segment: f64,
    /// Position of the projection along the segment, in [0, 1].
    pub segment_t: f64,
    /// Lateral deviation signed positive to the left of the waypoint order.
    pub signed_offset: f64,
}

impl CenterLine {
    /// Builds a closed centerline from ordered waypoints and widths.
    pub fn new(waypoints: Vec<Point2>, widths: Vec<f64>) -> Result<Self, GeometryError> {
        let n = waypoints.len();
        if n < 3 {
            return Err(GeometryError::MalformedTrack(format!(
                "a closed centerline needs at least 3 waypoints, got {n}"
            )));
        }
        if widths.len() != n {
            return Err(GeometryError::MalformedTrack("width count mismatch".into()));
        }
        if widths.iter().any(|w| !(*w > 0.0) || !w.is_finite()) {
            return Err(GeometryError::MalformedTrack("track widths must be positive".into()));
        }
        let mut cum = Vec::with_capacity(n);
        let mut s = 0.0;
        for i in 0..n {
            cum.push(s);
            let len = waypoints[i].dist(waypoints[(i + 1) % n]);
            if !(len > 0.0) {
                return Err(GeometryError::MalformedTrack(format!(
                    "waypoints {i} and {} coincide",
                    (i + 1) % n
                )));
            }
            s += len;
        }
        let curvature = (0..n)
            .map(|i| {
                let prev = waypoints[(i + n - 1) % n];
                let here = waypoints[i];
                let next = waypoints[(i + 1) % n];
                let turn = normalize_angle((next - here).heading() - (here - prev).heading());
                turn / (0.5 * (prev.dist(here) + here.dist(next)))
            })
            .collect();
        Ok(CenterLine {
            waypoints,
            widths,
            cumulative_arclength: cum,
            lap_length: s,
            closed: true,
            curvature,
        })
    }

    pub fn len(&self) -> usize {
        self.waypoints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.waypoints.is_empty()
    }

    fn next(&self, i: usize) -> usize {
        (i + 1) % self.waypoints.len()
    }

    pub fn segment_length(&self, i: usize) -> f64 {
        self.waypoints[i].dist(self.waypoints[self.next(i)])
    }

    pub fn segment_heading(&self, i: usize) -> f64 {
        (self.waypoints[self.next(i)] - self.waypoints[i]).heading()
    }

    /// Track width at a projected pose, linearly interpolated along the segment.
    pub fn width_at(&self, pose: &TrackPose) -> f64 {
        let i = pose.nearest_segment_index;
        let t = pose.segment_t;
        self.widths[i] * (1.0 - t) + self.widths[self.next(i)] * t
    }

    /// Wraps an arclength into [0, lap_length).
    pub fn wrap_s(&self, s: f64) -> f64 {
        let r = s.rem_euclid(self.lap_length);
        if r >= self.lap_length {
            0.0
        } else {
            r
        }
    }

    /// Segment index and fraction along it for an arclength.
    pub fn locate(&self, s: f64) -> (usize, f64) {
        let s = self.wrap_s(s);
        let i = match self.cumulative_arclength.binary_search_by(|c| c.total_cmp(&s)) {
            Ok(i) => i,
            Err(i) => i - 1,
        };
        (i, ((s - self.cumulative_arclength[i]) / self.segment_length(i)).clamp(0.0, 1.0))
    }

    pub fn point_at(&self, s: f64) -> Point2 {
        let (i, t) = self.locate(s);
        let a = self.waypoints[i];
        let b = self.waypoints[self.next(i)];
        a + (b - a) * t
    }

    pub fn width_at_s(&self, s: f64) -> f64 {
        let (i, t) = self.locate(s);
        self.widths[i] * (1.0 - t) + self.widths[self.next(i)] * t
    }

    /// Signed curvature (1/m, left turns positive in waypoint order) at an
    /// arclength, interpolated between the discrete waypoint curvatures.
    pub fn curvature_at(&self, s: f64) -> f64 {
        let (i, t) = self.locate(s);
        self.curvature[i] * (1.0 - t) + self.curvature[self.next(i)] * t
    }

    /// CSV export: `index,x,y,width,cum_s`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("index,x,y,width,cum_s\n");
        for i in 0..self.len() {
            let p = self.waypoints[i];
            let _ = writeln!(
                out,
                "{},{:?},{:?},{:?},{:?}",
                i, p.x, p.y, self.widths[i], self.cumulative_arclength[i]
            );
        }
        out
    }

    /// Parses the CSV produced by [`CenterLine::to_csv`].
    pub fn from_csv(text: &str) -> Result<Self, GeometryError> {
        let mut wps = Vec::new();
        let mut widths = Vec::new();
        for (ln, line) in text.lines().enumerate().skip(1) {
            if line.trim().is_empty() {
                continue;
            }
            let f: Vec<&str> = line.split(',').collect();
            let bad = || GeometryError::Parse { line: ln + 1, msg: "bad centerline row".into() };
            if f.len() != 5 {
                return Err(bad());
            }
            let x: f64 = f[1].parse().map_err(|_| bad())?;
            let y: f64 = f[2].parse().map_err(|_| bad())?;
            let w: f64 = f[3].parse().map_err(|_| bad())?;
            wps.push(Point2::new(x, y));
            widths.push(w);
        }
        CenterLine::new(wps, widths)
    }
}

/// Minimum-total-distance pairing of inner and outer border vertices,
/// returned as `(inner_vertex, outer_vertex)` mesh indices.
pub fn match_boundaries(
    inner: &BoundaryLoop,
    outer: &BoundaryLoop,
    mesh: &TrackMesh,
) -> Vec<(usize, usize)> {
    let ip = inner.points(mesh);
    let op = outer.points(mesh);
    let a = linear_sum_assignment(ip.len(), op.len(), |i, j| ip[i].dist(op[j]));
    a.pairs
        .into_iter()
        .map(|(i, j)| (inner.vertex_indices[i], outer.vertex_indices[j]))
        .collect()
}

/// Waypoints at the midpoints of matched pairs, ordered along the outer loop.
pub fn compute_centerline(
    pairs: &[(usize, usize)],
    _inner: &BoundaryLoop,
    outer: &BoundaryLoop,
    mesh: &TrackMesh,
) -> Result<CenterLine, GeometryError> {
    if pairs.len() < 3 {
        return Err(GeometryError::MalformedTrack(format!(
            "only {} matched pairs; need at least 3 waypoints",
            pairs.len()
        )));
    }
    let pos: std::collections::HashMap<usize, usize> =
        outer.vertex_indices.iter().enumerate().map(|(k, &v)| (v, k)).collect();
    let mut ordered: Vec<(usize, usize)> = pairs.to_vec();
    ordered.sort_by_key(|&(_, o)| pos.get(&o).copied().unwrap_or(usize::MAX));
    let mut wps = Vec::with_capacity(ordered.len());
    let mut widths = Vec::with_capacity(ordered.len());
    for (i, o) in ordered {
        let (pi, po) = (mesh.vertex(i), mesh.vertex(o));
        wps.push(pi.midpoint(po));
        widths.push(pi.dist(po));
    }
    CenterLine::new(wps, widths)
}

/// Closest point on the closed spline. Ties go to the lower segment index.
pub fn project_to_centerline(point: Point2, cl: &CenterLine) -> TrackPose {
    let n = cl.len();
    let mut best = (f64::INFINITY, 0usize, 0.0f64);
    for i in 0..n {
        let a = cl.waypoints[i];
        let b = cl.waypoints[(i + 1) % n];
        let ab = b - a;
        let t = ((point - a).dot(ab) / ab.dot(ab)).clamp(0.0, 1.0);
        let d = point.dist(a + ab * t);
        if d < best.0 {
            best = (d, i, t);
        }
    }
    let (d, i, t) = best;
    let a = cl.waypoints[i];
    let b = cl.waypoints[(i + 1) % n];
    let side = (b - a).cross(point - a);
    TrackPose {
        nearest_segment_index: i,
        lateral_deviation: d,
        arclength_s: cl.wrap_s(cl.cumulative_arclength[i] + t * cl.segment_length(i)),
        heading_of_segment: cl.segment_heading(i),
        segment_t: t,
        signed_offset: if side < 0.0 { -d } else { d },
    }
}

/// Off-track iff the deviation strictly exceeds half the local width.
pub fn is_off_track(pose: &TrackPose, cl: &CenterLine) -> bool {
    pose.lateral_deviation > cl.width_at(pose) / 2.0
}

/// Fraction of a lap covered going from `s_start` to `s_now` in the given
/// direction, for a single displacement shorter than one lap.
pub fn progress_fraction(s_start: f64, s_now: f64, direction: Direction, cl: &CenterLine) -> f64 {
    let d = (direction.sign() * (s_now - s_start)).rem_euclid(cl.lap_length);
    (d / cl.lap_length).clamp(0.0, 1.0)
}

/// Accumulates signed travel along the spline by incremental unwrapping.
/// Each update assumes the arclength moved by less than half a lap.
#[derive(Debug, Clone, PartialEq)]
pub struct ProgressTracker {
    direction: Direction,
    lap_length: f64,
    last_s: f64,
    travelled: f64,
}

impl ProgressTracker {
    pub fn new(s_start: f64, direction: Direction, lap_length: f64) -> Self {
        ProgressTracker { direction, lap_length, last_s: s_start, travelled: 0.0 }
    }

    /// Feeds the current arclength and returns the progress fraction.
    pub fn update(&mut self, s_now: f64) -> f64 {
        let half = 0.5 * self.lap_length;
        let mut ds = s_now - self.last_s;
        if ds > half {
            ds -= self.lap_length;
        } else if ds < -half {
            ds += self.lap_length;
        }
        self.travelled += self.direction.sign() * ds;
        self.last_s = s_now;
        self.fraction()
    }

    pub fn fraction(&self) -> f64 {
        (self.travelled / self.lap_length).clamp(0.0, 1.0)
    }

    /// Signed distance travelled in the episode's direction, meters.
    pub fn travelled(&self) -> f64 {
        self.travelled
    }

    pub fn lap_complete(&self) -> bool {
        self.travelled >= self.lap_length
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::boundary::tests::square_annulus;
    use crate::geometry::{centerline_from_mesh, extract_border_edges, group_boundaries};
    use proptest::prelude::*;

    fn two_by_two_mesh() -> TrackMesh {
        TrackMesh::new(
            "pair",
            vec![
                Point2::new(0.0, 0.0),
                Point2::new(1.0, 0.0),
                Point2::new(0.0, 1.0),
                Point2::new(1.0, 1.0),
            ],
            vec![[0, 1, 3], [0, 3, 2]],
        )
        .unwrap()
    }

    #[test]
    fn vertical_correspondences() {
        let m = two_by_two_mesh();
        let inner = BoundaryLoop { vertex_indices: vec![0, 1], kind: super::super::LoopKind::Inner };
        let outer = BoundaryLoop { vertex_indices: vec![2, 3], kind: super::super::LoopKind::Outer };
        let pairs = match_boundaries(&inner, &outer, &m);
        assert_eq!(pairs, vec![(0, 2), (1, 3)]);
        let cost: f64 = pairs.iter().map(|&(i, o)| m.vertex(i).dist(m.vertex(o))).sum();
        assert_eq!(cost, 2.0);
        // two waypoints is not a closed spline
        assert!(compute_centerline(&pairs, &inner, &outer, &m).is_err());
    }

    #[test]
    fn midpoints_and_widths() {
        let m = two_by_two_mesh();
        let outer = BoundaryLoop { vertex_indices: vec![2, 3], kind: super::super::LoopKind::Outer };
        let wp: Vec<Point2> = [(0usize, 2usize), (1, 3)]
            .iter()
            .map(|&(i, o)| m.vertex(i).midpoint(m.vertex(o)))
            .collect();
        assert_eq!(wp, vec![Point2::new(0.0, 0.5), Point2::new(1.0, 0.5)]);
        let _ = outer;
    }

    #[test]
    fn annulus_centerline() {
        let m = square_annulus(2.0, 1.0);
        let cl = centerline_from_mesh(&m).unwrap();
        assert_eq!(cl.len(), 4);
        for w in &cl.widths {
            // diagonal corner-to-corner distance of the annulus: sqrt(2)
            assert!((w - 2f64.sqrt()).abs() < 1e-12);
        }
        assert!((cl.lap_length - 12.0).abs() < 1e-12);
    }

    #[test]
    fn projection_examples() {
        let cl = CenterLine::new(
            vec![
                Point2::new(0.0, 0.5),
                Point2::new(1.0, 0.5),
                Point2::new(1.0, 2.0),
                Point2::new(0.0, 2.0),
            ],
            vec![0.6; 4],
        )
        .unwrap();
        let p = project_to_centerline(Point2::new(0.5, 0.7), &cl);
        assert_eq!(p.nearest_segment_index, 0);
        assert!((p.lateral_deviation - 0.2).abs() < 1e-12);
        assert!((p.arclength_s - 0.5).abs() < 1e-12);
        assert!(p.signed_offset > 0.0);
        for k in 0..4 {
            let p = project_to_centerline(cl.waypoints[k], &cl);
            assert_eq!(p.lateral_deviation, 0.0);
            assert_eq!(p.arclength_s, cl.cumulative_arclength[k]);
        }
    }

    #[test]
    fn off_track_is_strict() {
        let cl = CenterLine::new(
            vec![Point2::new(0.0, 0.0), Point2::new(10.0, 0.0), Point2::new(10.0, 10.0)],
            vec![0.6; 3],
        )
        .unwrap();
        let mut pose = project_to_centerline(Point2::new(5.0, 0.0), &cl);
        assert!(!is_off_track(&pose, &cl));
        pose.lateral_deviation = 0.31;
        assert!(is_off_track(&pose, &cl));
        pose.lateral_deviation = 0.30;
        assert!(!is_off_track(&pose, &cl));
        pose.lateral_deviation = 0.30 + 1e-9;
        assert!(is_off_track(&pose, &cl));
    }

    fn ten_meter_loop() -> CenterLine {
        // 2.5 x 2.5 square: lap length 10
        CenterLine::new(
            vec![
                Point2::new(0.0, 0.0),
                Point2::new(2.5, 0.0),
                Point2::new(2.5, 2.5),
                Point2::new(0.0, 2.5),
            ],
            vec![0.6; 4],
        )
        .unwrap()
    }

    #[test]
    fn progress_examples() {
        let cl = ten_meter_loop();
        assert_eq!(cl.lap_length, 10.0);
        assert_eq!(progress_fraction(0.0, 2.5, Direction::Forward, &cl), 0.25);
        assert!((progress_fraction(9.5, 0.5, Direction::Forward, &cl) - 0.1).abs() < 1e-12);
        assert!((progress_fraction(0.5, 9.5, Direction::Reverse, &cl) - 0.1).abs() < 1e-12);

        let mut tr = ProgressTracker::new(0.0, Direction::Forward, 10.0);
        let mut s: f64 = 0.0;
        for _ in 0..40 {
            s = (s + 0.25) % 10.0;
            tr.update(s);
        }
        assert_eq!(tr.fraction(), 1.0);
        assert!(tr.lap_complete());
    }

    #[test]
    fn csv_round_trip() {
        let cl = ten_meter_loop();
        let text = cl.to_csv();
        assert!(text.starts_with("index,x,y,width,cum_s\n0,0.0,0.0,0.6,0.0\n"));
        assert_eq!(CenterLine::from_csv(&text).unwrap(), cl);
    }

    #[test]
    fn projection_ties_prefer_lower_segment() {
        let m = square_annulus(2.0, 1.0);
        let e = extract_border_edges(&m).unwrap();
        let (_i, _o) = group_boundaries(&e, &m).unwrap();
        let cl = centerline_from_mesh(&m).unwrap();
        // the center of the square is equidistant from all four segments
        let p = project_to_centerline(Point2::new(0.0, 0.0), &cl);
        assert_eq!(p.nearest_segment_index, 0);
    }

    proptest! {
        #[test]
        fn projection_matches_dense_sampling(x in -3.0f64..3.0, y in -3.0f64..3.0) {
            let cl = CenterLine::new(
                vec![Point2::new(-1.5, -1.0), Point2::new(1.7, -1.2), Point2::new(1.1, 1.4), Point2::new(-0.8, 1.9)],
                vec![0.6; 4],
            ).unwrap();
            let p = Point2::new(x, y);
            let pose = project_to_centerline(p, &cl);
            let samples = 10_000;
            let mut best = f64::INFINITY;
            for k in 0..samples {
                let s = cl.lap_length * k as f64 / samples as f64;
                best = best.min(cl.point_at(s).dist(p));
            }
            // the dense oracle over-estimates by at most half the sample spacing
            let spacing = cl.lap_length / samples as f64;
            prop_assert!(pose.lateral_deviation <= best + 1e-6);
            prop_assert!(best - pose.lateral_deviation <= 0.5 * spacing + 1e-6);
            prop_assert!(pose.arclength_s >= 0.0 && pose.arclength_s < cl.lap_length);
            let q = cl.point_at(pose.arclength_s);
            prop_assert!((q.dist(p) - pose.lateral_deviation).abs() < 1e-6);
        }

        #[test]
        fn forward_progress_non_decreasing(steps in proptest::collection::vec(0.0f64..2.0, 1..200), start in 0.0f64..10.0) {
            let mut tr = ProgressTracker::new(start, Direction::Forward, 10.0);
            let mut s = start;
            let mut last = 0.0;
            for d in steps {
                s = (s + d) % 10.0;
                let f = tr.update(s);
                prop_assert!(f >= last);
                prop_assert!((0.0..=1.0).contains(&f));
                last = f;
            }
        }
    }
}
