//! Builds an oval mesh, recovers its centerline and writes both files.
//!
//! `cargo run --example track_pipeline [out_dir]`

use std::path::PathBuf;

use dracer::geometry::{
    centerline_from_mesh, extract_border_edges, generate_track, group_boundaries, match_boundaries, oval_polyline,
    TrackSpec,
};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let out = std::env::args().nth(1).map_or_else(|| std::env::temp_dir().join("dracer-track"), PathBuf::from);
    std::fs::create_dir_all(&out)?;

    let spec = TrackSpec {
        name: "oval".into(),
        centerline: oval_polyline(8.0, 1.0, 20.0),
        half_width: 0.3,
        vertices_per_side: 120,
    };
    let mesh = generate_track(&spec)?;
    mesh.save(out.join("oval.mesh"))?;

    // the same stages centerline_from_mesh runs, shown one at a time
    let edges = extract_border_edges(&mesh)?;
    let (inner, outer) = group_boundaries(&edges, &mesh)?;
    let pairs = match_boundaries(&inner, &outer, &mesh);
    println!(
        "{} triangles, {} border edges, inner loop {} / outer loop {} vertices, {} matched pairs",
        mesh.triangles().len(),
        edges.len(),
        inner.len(),
        outer.len(),
        pairs.len()
    );

    let centerline = centerline_from_mesh(&mesh)?;
    std::fs::write(out.join("oval_waypoints.csv"), centerline.to_csv())?;
    let mean_width = centerline.widths.iter().sum::<f64>() / centerline.len() as f64;
    println!(
        "lap length {:.3} m (nominal {:.3}), mean width {mean_width:.3} m",
        centerline.lap_length,
        16.0 + 2.0 * std::f64::consts::PI
    );
    println!("wrote {}", out.display());
    Ok(())
}
