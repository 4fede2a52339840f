use serde::{Deserialize, Serialize};

use crate::config::{parse_list, ConfigError, KvFile, ROOT_SECTION};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ObsMode {
    Image,
    Features,
}

impl std::str::FromStr for ObsMode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "image" => Ok(ObsMode::Image),
            "features" => Ok(ObsMode::Features),
            other => Err(format!("unknown observation mode `{other}`")),
        }
    }
}

impl std::fmt::Display for ObsMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ObsMode::Image => "image",
            ObsMode::Features => "features",
        })
    }
}

/// Simulator parameters. Angles are stored in degrees as they appear in the
/// config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub vmax: f64,
    pub dt: f64,
    pub substeps: usize,
    pub wheelbase: f64,
    /// First-order lag time constant of the speed controller, seconds.
    pub speed_tau: f64,
    pub camera_height: f64,
    pub camera_pitch_deg: f64,
    pub camera_hfov_deg: f64,
    pub image_w: usize,
    pub image_h: usize,
    pub obs_mode: ObsMode,
    pub max_steps: usize,
    pub steering_deg: Vec<f64>,
    /// Throttle levels as fractions of `vmax`.
    pub throttle_frac: Vec<f64>,
    /// Ground beyond this distance renders as background, meters.
    pub render_distance: f64,
    pub line_width: f64,
    /// Simulated seconds per wall second; 0 runs unpaced.
    pub realtime_factor: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            vmax: 1.0,
            dt: 1.0 / 15.0,
            substeps: 10,
            wheelbase: 0.16,
            speed_tau: 0.3,
            camera_height: 0.12,
            camera_pitch_deg: -15.0,
            camera_hfov_deg: 120.0,
            image_w: 160,
            image_h: 120,
            obs_mode: ObsMode::Image,
            max_steps: 2000,
            steering_deg: vec![-30.0, -15.0, 0.0, 15.0, 30.0],
            throttle_frac: vec![0.5, 1.0],
            render_distance: 6.0,
            line_width: 0.05,
            realtime_factor: 0.0,
        }
    }
}

const KEYS: &[&str] = &[
    "vmax",
    "dt",
    "substeps",
    "wheelbase",
    "speed_tau",
    "camera_height",
    "camera_pitch_deg",
    "camera_hfov_deg",
    "image_w",
    "image_h",
    "obs_mode",
    "max_steps",
    "steering_deg",
    "throttle_frac",
    "render_distance",
    "line_width",
    "realtime_factor",
];

impl SimConfig {
    /// Feature observations with the CI-sized image profile.
    pub fn features() -> Self {
        SimConfig { obs_mode: ObsMode::Features, ..Self::small_image() }
    }

    /// 64×48 image profile.
    pub fn small_image() -> Self {
        SimConfig { image_w: 64, image_h: 48, ..Self::default() }
    }

    pub fn from_kv(file: &KvFile) -> Result<Self, ConfigError> {
        let s = file.section(ROOT_SECTION);
        s.check_keys(KEYS)?;
        let mut c = SimConfig::default();
        s.read("vmax", &mut c.vmax)?;
        s.read("dt", &mut c.dt)?;
        s.read("substeps", &mut c.substeps)?;
        s.read("wheelbase", &mut c.wheelbase)?;
        s.read("speed_tau", &mut c.speed_tau)?;
        s.read("camera_height", &mut c.camera_height)?;
        s.read("camera_pitch_deg", &mut c.camera_pitch_deg)?;
        s.read("camera_hfov_deg", &mut c.camera_hfov_deg)?;
        s.read("image_w", &mut c.image_w)?;
        s.read("image_h", &mut c.image_h)?;
        s.read("obs_mode", &mut c.obs_mode)?;
        s.read("max_steps", &mut c.max_steps)?;
        s.read("render_distance", &mut c.render_distance)?;
        s.read("line_width", &mut c.line_width)?;
        s.read("realtime_factor", &mut c.realtime_factor)?;
        if let Some(v) = s.get("steering_deg") {
            c.steering_deg = parse_list(v).map_err(|e| s.value_error("steering_deg", e))?;
        }
        if let Some(v) = s.get("throttle_frac") {
            c.throttle_frac = parse_list(v).map_err(|e| s.value_error("throttle_frac", e))?;
        }
        c.validate()?;
        Ok(c)
    }

    pub fn write_kv(&self, file: &mut KvFile) {
        let join = |v: &[f64]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",");
        let s = ROOT_SECTION;
        file.set(s, "vmax", self.vmax);
        file.set(s, "dt", self.dt);
        file.set(s, "substeps", self.substeps);
        file.set(s, "wheelbase", self.wheelbase);
        file.set(s, "speed_tau", self.speed_tau);
        file.set(s, "camera_height", self.camera_height);
        file.set(s, "camera_pitch_deg", self.camera_pitch_deg);
        file.set(s, "camera_hfov_deg", self.camera_hfov_deg);
        file.set(s, "image_w", self.image_w);
        file.set(s, "image_h", self.image_h);
        file.set(s, "obs_mode", self.obs_mode);
        file.set(s, "max_steps", self.max_steps);
        file.set(s, "steering_deg", join(&self.steering_deg));
        file.set(s, "throttle_frac", join(&self.throttle_frac));
        file.set(s, "render_distance", self.render_distance);
        file.set(s, "line_width", self.line_width);
        file.set(s, "realtime_factor", self.realtime_factor);
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: &str| Err(ConfigError::Invalid(m.to_string()));
        if !(self.vmax > 0.0) || !(self.dt > 0.0) || !(self.wheelbase > 0.0) || !(self.speed_tau > 0.0) {
            return bad("vmax, dt, wheelbase and speed_tau must be positive");
        }
        if self.substeps == 0 || self.max_steps == 0 {
            return bad("substeps and max_steps must be positive");
        }
        if self.image_w < 8 || self.image_h < 8 {
            return bad("image must be at least 8x8");
        }
        if self.steering_deg.is_empty() || self.throttle_frac.is_empty() {
            return bad("action levels must be non-empty");
        }
        if self.steering_deg.windows(2).any(|w| w[0] >= w[1])
            || self.throttle_frac.windows(2).any(|w| w[0] >= w[1])
        {
            return bad("action levels must be strictly increasing");
        }
        if self.steering_deg.iter().any(|d| d.abs() >= 90.0) {
            return bad("steering levels must lie strictly within ±90°");
        }
        if self.throttle_frac.iter().any(|&f| !(f > 0.0) || f > 1.0) {
            return bad("throttle fractions must lie in (0, 1]");
        }
        if self.realtime_factor < 0.0 {
            return bad("realtime_factor must be non-negative");
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kv_round_trip() {
        let mut c = SimConfig::features();
        c.vmax = 1.67;
        c.steering_deg = vec![-20.0, 0.0, 20.0];
        let mut f = KvFile::default();
        c.write_kv(&mut f);
        let back = SimConfig::from_kv(&KvFile::parse(&f.to_text()).unwrap()).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn rejects_unknown_and_invalid() {
        assert!(SimConfig::from_kv(&KvFile::parse("warp=9\n").unwrap()).is_err());
        assert!(SimConfig::from_kv(&KvFile::parse("vmax=-1\n").unwrap()).is_err());
        assert!(SimConfig::from_kv(&KvFile::parse("steering_deg=10,0\n").unwrap()).is_err());
    }
}
