use serde::{Deserialize, Serialize};

pub const FEATURE_LEN: usize = 8;

/// Row-major 8-bit grayscale image, top row first.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GrayImage {
    pub width: usize,
    pub height: usize,
    pub data: Vec<u8>,
}

impl GrayImage {
    pub fn filled(width: usize, height: usize, value: u8) -> Self {
        GrayImage { width, height, data: vec![value; width * height] }
    }

    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.data[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, v: u8) {
        self.data[y * self.width + x] = v;
    }

    pub fn row(&self, y: usize) -> &[u8] {
        &self.data[y * self.width..(y + 1) * self.width]
    }

    /// Binary PGM (P5), handy for eyeballing renders.
    pub fn to_pgm(&self) -> Vec<u8> {
        let mut out = format!("P5\n{} {}\n255\n", self.width, self.height).into_bytes();
        out.extend_from_slice(&self.data);
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Observation {
    Image(GrayImage),
    /// Signed offset / half-width, heading error (rad), speed / vmax, then
    /// curvature 0.2, 0.5, 1, 2 and 4 m ahead.
    Features([f32; FEATURE_LEN]),
}

impl Observation {
    /// Network input: pixels scaled to [0, 1] or the raw feature vector.
    pub fn to_input(&self) -> Vec<f32> {
        match self {
            Observation::Image(img) => img.data.iter().map(|&p| p as f32 / 255.0).collect(),
            Observation::Features(f) => f.to_vec(),
        }
    }

    pub fn input_len(&self) -> usize {
        match self {
            Observation::Image(img) => img.data.len(),
            Observation::Features(_) => FEATURE_LEN,
        }
    }

    pub fn as_image(&self) -> Option<&GrayImage> {
        match self {
            Observation::Image(img) => Some(img),
            Observation::Features(_) => None,
        }
    }

    pub fn as_features(&self) -> Option<&[f32; FEATURE_LEN]> {
        match self {
            Observation::Features(f) => Some(f),
            Observation::Image(_) => None,
        }
    }
}
