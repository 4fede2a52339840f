//! Ground-plane ray casting from a pinhole camera mounted on the car.

use crate::geometry::{CenterLine, Point2};

use super::{CarState, GrayImage, SimConfig};

pub const BACKGROUND: u8 = 30;
pub const SURFACE: u8 = 128;
pub const LINE: u8 = 255;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Camera {
    /// Mount height above the ground, meters.
    pub height: f64,
    /// Radians; negative looks down.
    pub pitch: f64,
    pub hfov: f64,
    pub width: usize,
    pub rows: usize,
    pub max_distance: f64,
    pub line_width: f64,
}

impl Camera {
    pub fn from_config(cfg: &SimConfig) -> Self {
        Camera {
            height: cfg.camera_height,
            pitch: cfg.camera_pitch_deg.to_radians(),
            hfov: cfg.camera_hfov_deg.to_radians(),
            width: cfg.image_w,
            rows: cfg.image_h,
            max_distance: cfg.render_distance,
            line_width: cfg.line_width,
        }
    }

    fn focal(&self) -> f64 {
        0.5 * self.width as f64 / (0.5 * self.hfov).tan()
    }

    /// Ground point seen through the center of pixel `(col, row)` in the car
    /// frame as `(forward, left)` meters, or `None` above the horizon.
    pub fn pixel_to_ground(&self, col: usize, row: usize) -> Option<(f64, f64)> {
        let f = self.focal();
        let u = (col as f64 + 0.5 - 0.5 * self.width as f64) / f;
        let v = (row as f64 + 0.5 - 0.5 * self.rows as f64) / f;
        let down = -self.pitch;
        let (sa, ca) = down.sin_cos();
        // ray = forward_axis + u * right_axis + v * down_axis
        let z = -sa - v * ca;
        if z >= 0.0 {
            return None;
        }
        let t = self.height / -z;
        Some((t * (ca - v * sa), -t * u))
    }

    /// Renders the track surface, its edge lines and the background.
    pub fn render(&self, state: &CarState, cl: &CenterLine) -> GrayImage {
        let mut img = GrayImage::filled(self.width, self.rows, BACKGROUND);
        let origin = state.position();
        let (sh, ch) = state.heading.sin_cos();
        let reach = self.max_distance + cl.widths.iter().cloned().fold(0.0, f64::max);
        let n = cl.len();
        let segments: Vec<usize> = (0..n)
            .filter(|&i| {
                let a = cl.waypoints[i];
                let b = cl.waypoints[(i + 1) % n];
                distance_to_segment(origin, a, b) <= reach
            })
            .collect();
        if segments.is_empty() {
            return img;
        }
        for row in 0..self.rows {
            for col in 0..self.width {
                let Some((fwd, left)) = self.pixel_to_ground(col, row) else { continue };
                if fwd.hypot(left) > self.max_distance {
                    continue;
                }
                let p = Point2::new(origin.x + fwd * ch - left * sh, origin.y + fwd * sh + left * ch);
                let mut best = (f64::INFINITY, 0usize, 0.0);
                for &i in &segments {
                    let a = cl.waypoints[i];
                    let ab = cl.waypoints[(i + 1) % n] - a;
                    let t = ((p - a).dot(ab) / ab.dot(ab)).clamp(0.0, 1.0);
                    let d = p.dist(a + ab * t);
                    if d < best.0 {
                        best = (d, i, t);
                    }
                }
                let (d, i, t) = best;
                let half = 0.5 * (cl.widths[i] * (1.0 - t) + cl.widths[(i + 1) % n] * t);
                if d <= half {
                    let v = if d >= half - self.line_width { LINE } else { SURFACE };
                    img.set(col, row, v);
                }
            }
        }
        img
    }
}

fn distance_to_segment(p: Point2, a: Point2, b: Point2) -> f64 {
    let ab = b - a;
    let t = ((p - a).dot(ab) / ab.dot(ab)).clamp(0.0, 1.0);
    p.dist(a + ab * t)
}
