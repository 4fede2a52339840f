use std::fmt::Write as _;
use std::path::Path;

use super::{GeometryError, Point2};

const DUPLICATE_TOL: f64 = 1e-9;

/// Triangulated drivable surface of a track.
#[derive(Debug, Clone, PartialEq)]
pub struct TrackMesh {
    name: String,
    vertices: Vec<Point2>,
    triangles: Vec<[usize; 3]>,
}

impl TrackMesh {
    /// Builds a mesh, rejecting out-of-range indices, duplicate vertices and
    /// zero-area triangles.
    pub fn new(
        name: impl Into<String>,
        vertices: Vec<Point2>,
        triangles: Vec<[usize; 3]>,
    ) -> Result<Self, GeometryError> {
        let name = name.into();
        if name.is_empty() || name.chars().any(char::is_whitespace) {
            return Err(GeometryError::InvalidMesh(format!(
                "track name {name:?} must be a non-empty token"
            )));
        }
        let n = vertices.len();
        if vertices.iter().any(|p| !p.x.is_finite() || !p.y.is_finite()) {
            return Err(GeometryError::InvalidMesh("non-finite vertex".into()));
        }
        for (ti, t) in triangles.iter().enumerate() {
            if t.iter().any(|&i| i >= n) {
                return Err(GeometryError::InvalidMesh(format!(
                    "triangle {ti} references a vertex beyond {n}"
                )));
            }
            let (a, b, c) = (vertices[t[0]], vertices[t[1]], vertices[t[2]]);
            if (b - a).cross(c - a) == 0.0 {
                return Err(GeometryError::InvalidMesh(format!("triangle {ti} is degenerate")));
            }
        }
        // sort-and-sweep along x for near-duplicates
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&i, &j| vertices[i].x.total_cmp(&vertices[j].x));
        for (k, &i) in order.iter().enumerate() {
            for &j in &order[k + 1..] {
                if vertices[j].x - vertices[i].x > DUPLICATE_TOL {
                    break;
                }
                if vertices[i].dist(vertices[j]) <= DUPLICATE_TOL {
                    return Err(GeometryError::InvalidMesh(format!(
                        "vertices {i} and {j} coincide"
                    )));
                }
            }
        }
        Ok(TrackMesh { name, vertices, triangles })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn vertices(&self) -> &[Point2] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn vertex(&self, i: usize) -> Point2 {
        self.vertices[i]
    }

    /// Parses the `trackmesh v1` text format.
    pub fn parse(text: &str) -> Result<Self, GeometryError> {
        let mut lines = text.lines().enumerate();
        let name = loop {
            match lines.next() {
                None => {
                    return Err(GeometryError::Parse { line: 0, msg: "empty file".into() });
                }
                Some((_, l)) if l.trim().is_empty() => continue,
                Some((i, l)) => {
                    let mut it = l.split_whitespace();
                    match (it.next(), it.next(), it.next(), it.next()) {
                        (Some("trackmesh"), Some("v1"), Some(name), None) => break name.to_string(),
                        _ => {
                            return Err(GeometryError::Parse {
                                line: i + 1,
                                msg: "expected header `trackmesh v1 <name>`".into(),
                            })
                        }
                    }
                }
            }
        };
        let mut vertices = Vec::new();
        let mut triangles = Vec::new();
        for (i, line) in lines {
            let mut it = line.split_whitespace();
            let err = |msg: &str| GeometryError::Parse { line: i + 1, msg: msg.to_string() };
            match it.next() {
                None => continue,
                Some("v") => {
                    let x: f64 = parse_field(it.next(), i)?;
                    let y: f64 = parse_field(it.next(), i)?;
                    if it.next().is_some() {
                        return Err(err("trailing fields"));
                    }
                    vertices.push(Point2::new(x, y));
                }
                Some("t") => {
                    let a: usize = parse_field(it.next(), i)?;
                    let b: usize = parse_field(it.next(), i)?;
                    let c: usize = parse_field(it.next(), i)?;
                    if it.next().is_some() {
                        return Err(err("trailing fields"));
                    }
                    triangles.push([a, b, c]);
                }
                Some(tag) => return Err(err(&format!("unknown record `{tag}`"))),
            }
        }
        TrackMesh::new(name, vertices, triangles)
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("trackmesh v1 {}\n", self.name);
        for v in &self.vertices {
            // `{:?}` on f64 prints the shortest representation that round-trips
            let _ = writeln!(out, "v {:?} {:?}", v.x, v.y);
        }
        for t in &self.triangles {
            let _ = writeln!(out, "t {} {} {}", t[0], t[1], t[2]);
        }
        out
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, GeometryError> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), GeometryError> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }
}

fn parse_field<T: std::str::FromStr>(tok: Option<&str>, line: usize) -> Result<T, GeometryError> {
    let tok = tok.ok_or_else(|| GeometryError::Parse { line: line + 1, msg: "missing field".into() })?;
    tok.parse()
        .map_err(|_| GeometryError::Parse { line: line + 1, msg: format!("bad number `{tok}`") })
}
