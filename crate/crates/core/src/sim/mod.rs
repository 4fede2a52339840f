//! Episodic racing simulator: kinematic bicycle dynamics, a discrete
//! action grid, camera or feature observations and the centerline reward.

mod action;
mod car;
mod config;
mod env;
mod features;
mod observation;
mod render;
mod reward;
mod trace;

pub use action::ActionSpace;
pub use car::CarState;
pub use config::{ObsMode, SimConfig};
pub use env::{EpisodeConfig, RacingEnv, StepInfo, StepResult};
pub use features::{extract_features, LOOKAHEAD};
pub use observation::{GrayImage, Observation, FEATURE_LEN};
pub use render::{Camera, BACKGROUND, LINE, SURFACE};
pub use reward::{default_reward, CenterlineReward, RewardContext, RewardFn};
pub use trace::EpisodeTrace;

use std::path::Path;

use thiserror::Error;

use crate::config::ConfigError;
use crate::geometry::{
    centerline_from_mesh, generate_track, oval_polyline, CenterLine, GeometryError, TrackMesh, TrackSpec,
};

#[derive(Debug, Error)]
pub enum SimError {
    #[error("start waypoint {index} out of range for {count} waypoints")]
    InvalidStart { index: usize, count: usize },
    #[error("action {index} out of range for {count} actions")]
    ActionOutOfRange { index: usize, count: usize },
    #[error("step called after the episode finished; reset first")]
    EpisodeDone,
    #[error("step called before reset")]
    NotReset,
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

/// A track mesh together with its derived centerline.
#[derive(Debug, Clone, PartialEq)]
pub struct Track {
    pub mesh: TrackMesh,
    pub centerline: CenterLine,
}

impl Track {
    pub fn from_mesh(mesh: TrackMesh) -> Result<Self, GeometryError> {
        let centerline = centerline_from_mesh(&mesh)?;
        Ok(Track { mesh, centerline })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, GeometryError> {
        Self::from_mesh(TrackMesh::load(path)?)
    }

    pub fn name(&self) -> &str {
        self.mesh.name()
    }

    /// Stadium track `length` meters end to end with semicircular ends of
    /// `radius`, `width` meters wide. Vertex spacing is about 15 cm.
    pub fn oval(length: f64, radius: f64, width: f64) -> Result<Self, GeometryError> {
        let straight = length - 2.0 * radius;
        if !(straight > 0.0) {
            return Err(GeometryError::MalformedTrack("oval length must exceed its diameter".into()));
        }
        let perimeter = 2.0 * straight + 2.0 * std::f64::consts::PI * radius;
        let spec = TrackSpec {
            name: "oval".into(),
            centerline: oval_polyline(straight, radius, 50.0),
            half_width: 0.5 * width,
            vertices_per_side: (perimeter / 0.15).round() as usize,
        };
        Self::from_mesh(generate_track(&spec)?)
    }
}
