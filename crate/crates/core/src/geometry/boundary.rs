use std::collections::{BTreeMap, BTreeSet, HashMap};

use super::{signed_area, GeometryError, Point2, TrackMesh};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LoopKind {
    Inner,
    Outer,
}

/// A closed, counterclockwise chain of border vertices.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryLoop {
    pub vertex_indices: Vec<usize>,
    pub kind: LoopKind,
}

impl BoundaryLoop {
    pub fn points(&self, mesh: &TrackMesh) -> Vec<Point2> {
        self.vertex_indices.iter().map(|&i| mesh.vertex(i)).collect()
    }

    pub fn len(&self) -> usize {
        self.vertex_indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertex_indices.is_empty()
    }
}

/// Undirected edges incident to exactly one triangle, low index first.
pub fn extract_border_edges(mesh: &TrackMesh) -> Result<BTreeSet<(usize, usize)>, GeometryError> {
    let mut incidence: HashMap<(usize, usize), usize> = HashMap::new();
    for t in mesh.triangles() {
        for k in 0..3 {
            let (a, b) = (t[k], t[(k + 1) % 3]);
            *incidence.entry((a.min(b), a.max(b))).or_insert(0) += 1;
        }
    }
    let mut border = BTreeSet::new();
    for (&(a, b), &count) in &incidence {
        match count {
            1 => {
                border.insert((a, b));
            }
            2 => {}
            n => return Err(GeometryError::NonManifold(a, b, n)),
        }
    }
    Ok(border)
}

/// Chains border edges into closed vertex loops, each starting at its
/// smallest vertex index.
pub fn trace_loops(border_edges: &BTreeSet<(usize, usize)>) -> Result<Vec<Vec<usize>>, GeometryError> {
    let mut adj: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for &(a, b) in border_edges {
        adj.entry(a).or_default().push(b);
        adj.entry(b).or_default().push(a);
    }
    if let Some((v, nbrs)) = adj.iter().find(|(_, n)| n.len() != 2) {
        let what = if nbrs.len() < 2 { "open boundary chain" } else { "pinched boundary" };
        return Err(GeometryError::MalformedTrack(format!("{what} at vertex {v}")));
    }

    let mut visited = BTreeSet::new();
    let mut loops: Vec<Vec<usize>> = Vec::new();
    for &start in adj.keys() {
        if visited.contains(&start) {
            continue;
        }
        let mut chain = vec![start];
        visited.insert(start);
        let mut prev = start;
        let mut cur = adj[&start][0].min(adj[&start][1]);
        while cur != start {
            if !visited.insert(cur) {
                return Err(GeometryError::MalformedTrack(format!(
                    "boundary revisits vertex {cur}"
                )));
            }
            chain.push(cur);
            let n = &adj[&cur];
            let next = if n[0] != prev { n[0] } else { n[1] };
            prev = cur;
            cur = next;
        }
        if chain.len() < 3 {
            return Err(GeometryError::MalformedTrack("boundary loop shorter than 3".into()));
        }
        loops.push(chain);
    }
    Ok(loops)
}

/// Chains border edges into closed loops and labels the one enclosing the
/// smaller area as the inner boundary. Both loops come back counterclockwise.
pub fn group_boundaries(
    border_edges: &BTreeSet<(usize, usize)>,
    mesh: &TrackMesh,
) -> Result<(BoundaryLoop, BoundaryLoop), GeometryError> {
    let loops = trace_loops(border_edges)?;
    if loops.len() != 2 {
        return Err(GeometryError::MalformedTrack(format!(
            "expected 2 boundary loops, found {}",
            loops.len()
        )));
    }

    let mut oriented: Vec<(f64, Vec<usize>)> = loops
        .into_iter()
        .map(|mut chain| {
            let pts: Vec<Point2> = chain.iter().map(|&i| mesh.vertex(i)).collect();
            let area = signed_area(&pts);
            if area < 0.0 {
                // keep the start vertex, flip the direction
                chain[1..].reverse();
            }
            (area.abs(), chain)
        })
        .collect();
    if oriented[0].0 == oriented[1].0 {
        return Err(GeometryError::MalformedTrack("boundary loops enclose equal areas".into()));
    }
    oriented.sort_by(|a, b| a.0.total_cmp(&b.0));
    let outer = oriented.pop().unwrap().1;
    let inner = oriented.pop().unwrap().1;
    Ok((
        BoundaryLoop { vertex_indices: inner, kind: LoopKind::Inner },
        BoundaryLoop { vertex_indices: outer, kind: LoopKind::Outer },
    ))
}
