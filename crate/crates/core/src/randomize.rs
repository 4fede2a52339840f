//! Rollout-time domain randomization: action noise, episode start and
//! direction, and observation image augmentations.
//!
//! Every function draws from an explicit generator so a worker's whole
//! randomization stream is reproducible from its seed.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::config::{ConfigError, KvFile};
use crate::geometry::Direction;
use crate::sim::{ActionSpace, EpisodeConfig, GrayImage, Track};

pub const SECTION: &str = "randomization";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ImageAug {
    Color,
    Translation,
    Shadow,
    Sharpen,
    Pepper,
}

impl ImageAug {
    pub const ALL: [ImageAug; 5] =
        [ImageAug::Color, ImageAug::Translation, ImageAug::Shadow, ImageAug::Sharpen, ImageAug::Pepper];

    pub fn as_str(self) -> &'static str {
        match self {
            ImageAug::Color => "color",
            ImageAug::Translation => "translation",
            ImageAug::Shadow => "shadow",
            ImageAug::Sharpen => "sharpen",
            ImageAug::Pepper => "pepper",
        }
    }
}

impl std::str::FromStr for ImageAug {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        ImageAug::ALL
            .into_iter()
            .find(|a| a.as_str() == s)
            .ok_or_else(|| format!("unknown augmentation `{s}`"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomizationConfig {
    /// Uniform action noise as a fraction of full scale.
    pub action_noise_frac: f64,
    pub reverse_each_episode: bool,
    pub randomize_start: bool,
    pub image_augs: Vec<ImageAug>,
    pub aug_probability: f64,
    pub seed: u64,
}

impl Default for RandomizationConfig {
    fn default() -> Self {
        RandomizationConfig {
            action_noise_frac: 0.1,
            reverse_each_episode: false,
            randomize_start: true,
            image_augs: Vec::new(),
            aug_probability: 0.2,
            seed: 0,
        }
    }
}

const KEYS: &[&str] =
    &["action_noise_frac", "reverse_each_episode", "randomize_start", "image_augs", "aug_probability", "seed"];

impl RandomizationConfig {
    /// Everything off: no noise, no augmentation, waypoint 0, forward.
    pub fn none() -> Self {
        RandomizationConfig { action_noise_frac: 0.0, randomize_start: false, ..Default::default() }
    }

    /// Default action noise plus alternating direction from waypoint 0.
    pub fn noise_and_reverse() -> Self {
        RandomizationConfig {
            action_noise_frac: Self::default().action_noise_frac,
            reverse_each_episode: true,
            ..Self::none()
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(0.0..=0.5).contains(&self.action_noise_frac) {
            return Err(ConfigError::Invalid("action_noise_frac must lie in [0, 0.5]".into()));
        }
        if !(0.0..=1.0).contains(&self.aug_probability) {
            return Err(ConfigError::Invalid("aug_probability must lie in [0, 1]".into()));
        }
        Ok(())
    }

    pub fn from_kv(file: &KvFile) -> Result<Self, ConfigError> {
        let s = file.section(SECTION);
        s.check_keys(KEYS)?;
        let mut c = RandomizationConfig::default();
        s.read("action_noise_frac", &mut c.action_noise_frac)?;
        s.read("reverse_each_episode", &mut c.reverse_each_episode)?;
        s.read("randomize_start", &mut c.randomize_start)?;
        s.read("aug_probability", &mut c.aug_probability)?;
        s.read("seed", &mut c.seed)?;
        if let Some(v) = s.get("image_augs") {
            c.image_augs = v
                .split(',')
                .map(str::trim)
                .filter(|t| !t.is_empty() && *t != "none")
                .map(str::parse)
                .collect::<Result<_, _>>()
                .map_err(|e| s.value_error("image_augs", e))?;
        }
        c.validate()?;
        Ok(c)
    }

    pub fn write_kv(&self, file: &mut KvFile) {
        file.set(SECTION, "action_noise_frac", self.action_noise_frac);
        file.set(SECTION, "reverse_each_episode", self.reverse_each_episode);
        file.set(SECTION, "randomize_start", self.randomize_start);
        let augs: Vec<&str> = self.image_augs.iter().map(|a| a.as_str()).collect();
        file.set(SECTION, "image_augs", if augs.is_empty() { "none".to_string() } else { augs.join(",") });
        file.set(SECTION, "aug_probability", self.aug_probability);
        file.set(SECTION, "seed", self.seed);
    }
}

/// Adds independent uniform noise of ±`frac` full scale to both controls and
/// clamps them to the actuator range. Full scale is the largest steering
/// level and `vmax`.
pub fn perturb_action<R: Rng + ?Sized>(
    steering: f64,
    target_speed: f64,
    frac: f64,
    space: &ActionSpace,
    vmax: f64,
    rng: &mut R,
) -> (f64, f64) {
    if frac <= 0.0 {
        return (steering, target_speed);
    }
    let max_steer = space.max_steering();
    let ds = rng.random_range(-1.0..=1.0) * frac * max_steer;
    let dv = rng.random_range(-1.0..=1.0) * frac * vmax;
    ((steering + ds).clamp(-max_steer, max_steer), (target_speed + dv).clamp(0.0, vmax))
}

/// Start waypoint and direction for the `episode_index`-th episode.
pub fn randomize_episode<R: Rng + ?Sized>(
    episode_index: u64,
    track: &Track,
    cfg: &RandomizationConfig,
    max_steps: usize,
    rng: &mut R,
) -> EpisodeConfig {
    let direction = if cfg.reverse_each_episode && episode_index % 2 == 1 {
        Direction::Reverse
    } else {
        Direction::Forward
    };
    let start = if cfg.randomize_start { rng.random_range(0..track.centerline.len()) } else { 0 };
    EpisodeConfig { start_waypoint_index: start, direction, max_steps, seed: rng.random() }
}

/// Applies each enabled augmentation independently with `aug_probability`.
pub fn augment_image<R: Rng + ?Sized>(img: &GrayImage, cfg: &RandomizationConfig, rng: &mut R) -> GrayImage {
    let mut out = img.clone();
    if cfg.aug_probability <= 0.0 {
        return out;
    }
    for aug in ImageAug::ALL {
        if !cfg.image_augs.contains(&aug) || rng.random::<f64>() >= cfg.aug_probability {
            continue;
        }
        out = match aug {
            ImageAug::Color => {
                let offset = rng.random_range(-40.0..40.0);
                let gain = rng.random_range(0.6..1.4);
                adjust_color(&out, offset, gain)
            }
            ImageAug::Translation => {
                let frac: f64 = rng.random_range(-0.1..=0.1);
                translate(&out, (frac * out.width as f64).round() as isize)
            }
            ImageAug::Shadow => {
                let w = out.width as f64;
                let mut top = [rng.random_range(0.0..w), rng.random_range(0.0..w)];
                let mut bottom = [rng.random_range(0.0..w), rng.random_range(0.0..w)];
                top.sort_by(f64::total_cmp);
                bottom.sort_by(f64::total_cmp);
                let gain = rng.random_range(0.4..0.8);
                shadow(&out, top, bottom, gain)
            }
            ImageAug::Sharpen => sharpen(&out),
            ImageAug::Pepper => pepper(&out, 0.02, rng),
        };
    }
    out
}

fn clamp_u8(v: f64) -> u8 {
    v.round().clamp(0.0, 255.0) as u8
}

/// Brightness offset plus contrast gain about mid-gray.
pub fn adjust_color(img: &GrayImage, offset: f64, gain: f64) -> GrayImage {
    let data = img.data.iter().map(|&p| clamp_u8((p as f64 - 128.0) * gain + 128.0 + offset)).collect();
    GrayImage { data, ..*img }
}

/// Shifts content right by `shift` columns (left if negative), replicating
/// the edge column into the vacated area.
pub fn translate(img: &GrayImage, shift: isize) -> GrayImage {
    let w = img.width as isize;
    let mut out = img.clone();
    for y in 0..img.height {
        let row = img.row(y);
        for x in 0..w {
            let src = (x - shift).clamp(0, w - 1) as usize;
            out.data[y * img.width + x as usize] = row[src];
        }
    }
    out
}

/// Darkens the quadrilateral between `top = [x_left, x_right]` on the first
/// row and `bottom` on the last row.
pub fn shadow(img: &GrayImage, top: [f64; 2], bottom: [f64; 2], gain: f64) -> GrayImage {
    let mut out = img.clone();
    let h = (img.height.max(2) - 1) as f64;
    for y in 0..img.height {
        let t = y as f64 / h;
        let left = top[0] + (bottom[0] - top[0]) * t;
        let right = top[1] + (bottom[1] - top[1]) * t;
        for x in 0..img.width {
            let cx = x as f64 + 0.5;
            if cx >= left && cx <= right {
                let i = y * img.width + x;
                out.data[i] = clamp_u8(img.data[i] as f64 * gain);
            }
        }
    }
    out
}

/// 3×3 sharpening kernel: center 5, 4-neighbours −1, edges replicated.
pub fn sharpen(img: &GrayImage) -> GrayImage {
    let (w, h) = (img.width as isize, img.height as isize);
    let at = |x: isize, y: isize| img.get(x.clamp(0, w - 1) as usize, y.clamp(0, h - 1) as usize) as f64;
    let mut out = img.clone();
    for y in 0..h {
        for x in 0..w {
            let v = 5.0 * at(x, y) - at(x - 1, y) - at(x + 1, y) - at(x, y - 1) - at(x, y + 1);
            out.data[(y * w + x) as usize] = clamp_u8(v);
        }
    }
    out
}

/// Salt and pepper: each pixel becomes 0 with probability `rate` and 255
/// with probability `rate`.
pub fn pepper<R: Rng + ?Sized>(img: &GrayImage, rate: f64, rng: &mut R) -> GrayImage {
    let data = img
        .data
        .iter()
        .map(|&p| {
            let u: f64 = rng.random();
            if u < rate {
                0
            } else if u < 2.0 * rate {
                255
            } else {
                p
            }
        })
        .collect();
    GrayImage { data, ..*img }
}
