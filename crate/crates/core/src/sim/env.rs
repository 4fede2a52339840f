use std::sync::Arc;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::geometry::{is_off_track, normalize_angle, project_to_centerline, Direction, ProgressTracker, TrackPose};

use super::{
    extract_features, ActionSpace, Camera, CarState, CenterlineReward, ObsMode, Observation, RewardContext,
    RewardFn, SimConfig, SimError, Track,
};

/// How an episode starts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EpisodeConfig {
    pub start_waypoint_index: usize,
    pub direction: Direction,
    pub max_steps: usize,
    pub seed: u64,
}

impl EpisodeConfig {
    pub fn forward_from(start: usize, max_steps: usize) -> Self {
        EpisodeConfig { start_waypoint_index: start, direction: Direction::Forward, max_steps, seed: 0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepInfo {
    pub progress: f64,
    pub off_track: bool,
    pub lap_complete: bool,
    /// Hit the episode's step limit.
    pub truncated: bool,
    pub pose: TrackPose,
    pub sim_time: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepResult {
    pub observation: Observation,
    pub reward: f64,
    pub done: bool,
    pub info: StepInfo,
}

/// One car on one track, stepped synchronously: every `step` consumes
/// exactly one action and produces exactly one observation.
pub struct RacingEnv {
    track: Arc<Track>,
    cfg: SimConfig,
    space: ActionSpace,
    camera: Camera,
    reward: Arc<dyn RewardFn>,
    state: CarState,
    episode: Option<EpisodeConfig>,
    progress: ProgressTracker,
    pose: TrackPose,
    steps: usize,
    observations: usize,
    done: bool,
    sim_time: f64,
    next_deadline: Option<Instant>,
}

impl RacingEnv {
    pub fn new(track: Arc<Track>, cfg: SimConfig) -> Result<Self, SimError> {
        cfg.validate()?;
        let space = ActionSpace::from_config(&cfg);
        let camera = Camera::from_config(&cfg);
        let pose = project_to_centerline(track.centerline.waypoints[0], &track.centerline);
        let lap = track.centerline.lap_length;
        Ok(RacingEnv {
            track,
            cfg,
            space,
            camera,
            reward: Arc::new(CenterlineReward),
            state: CarState::default(),
            episode: None,
            progress: ProgressTracker::new(0.0, Direction::Forward, lap),
            pose,
            steps: 0,
            observations: 0,
            done: true,
            sim_time: 0.0,
            next_deadline: None,
        })
    }

    pub fn with_reward(mut self, reward: Arc<dyn RewardFn>) -> Self {
        self.reward = reward;
        self
    }

    pub fn track(&self) -> &Arc<Track> {
        &self.track
    }

    pub fn config(&self) -> &SimConfig {
        &self.cfg
    }

    pub fn action_space(&self) -> &ActionSpace {
        &self.space
    }

    pub fn camera(&self) -> &Camera {
        &self.camera
    }

    pub fn state(&self) -> &CarState {
        &self.state
    }

    pub fn pose(&self) -> &TrackPose {
        &self.pose
    }

    pub fn episode(&self) -> Option<&EpisodeConfig> {
        self.episode.as_ref()
    }

    pub fn direction(&self) -> Direction {
        self.episode.map(|e| e.direction).unwrap_or(Direction::Forward)
    }

    pub fn is_done(&self) -> bool {
        self.done
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    /// Observations produced since the last reset, including the initial one.
    pub fn observations_emitted(&self) -> usize {
        self.observations
    }

    pub fn progress(&self) -> f64 {
        self.progress.fraction()
    }

    /// Places the car on the start waypoint facing along the spline (or
    /// against it in reverse), at rest.
    pub fn reset(&mut self, episode: &EpisodeConfig) -> Result<Observation, SimError> {
        let cl = &self.track.centerline;
        if episode.start_waypoint_index >= cl.len() {
            return Err(SimError::InvalidStart { index: episode.start_waypoint_index, count: cl.len() });
        }
        if episode.max_steps == 0 {
            return Err(SimError::Config(crate::config::ConfigError::Invalid("max_steps must be positive".into())));
        }
        let k = episode.start_waypoint_index;
        let p = cl.waypoints[k];
        let mut heading = cl.segment_heading(k);
        if episode.direction == Direction::Reverse {
            heading = normalize_angle(heading + std::f64::consts::PI);
        }
        self.state = CarState { x: p.x, y: p.y, heading, speed: 0.0, steering_angle: 0.0 };
        self.pose = project_to_centerline(p, cl);
        self.progress = ProgressTracker::new(self.pose.arclength_s, episode.direction, cl.lap_length);
        self.episode = Some(*episode);
        self.steps = 0;
        self.done = false;
        self.sim_time = 0.0;
        self.next_deadline = None;
        self.observations = 1;
        Ok(self.observe())
    }

    pub fn step(&mut self, action: usize) -> Result<StepResult, SimError> {
        let (steer, speed) = self.space.map_action(action)?;
        self.step_controls(steer, speed)
    }

    /// Steps with continuous controls, clamped to the actuator limits.
    pub fn step_controls(&mut self, steering: f64, target_speed: f64) -> Result<StepResult, SimError> {
        let Some(episode) = self.episode else { return Err(SimError::NotReset) };
        if self.done {
            return Err(SimError::EpisodeDone);
        }
        self.pace();
        let max_steer = self.space.max_steering();
        let steering = steering.clamp(-max_steer, max_steer);
        let target_speed = target_speed.clamp(0.0, self.cfg.vmax);
        self.state = self.state.integrate(steering, target_speed, &self.cfg);
        self.steps += 1;
        self.sim_time += self.cfg.dt;

        let cl = &self.track.centerline;
        self.pose = project_to_centerline(self.state.position(), cl);
        let progress = self.progress.update(self.pose.arclength_s);
        let off_track = is_off_track(&self.pose, cl);
        let lap_complete = self.progress.lap_complete();
        let truncated = self.steps >= episode.max_steps.min(self.cfg.max_steps);
        let reward = self.reward.reward(&RewardContext {
            pose: &self.pose,
            centerline: cl,
            state: &self.state,
            progress,
            off_track,
            lap_complete,
        });
        self.done = off_track || lap_complete || truncated;
        let observation = self.observe();
        self.observations += 1;
        Ok(StepResult {
            observation,
            reward,
            done: self.done,
            info: StepInfo { progress, off_track, lap_complete, truncated, pose: self.pose, sim_time: self.sim_time },
        })
    }

    /// Renders the current observation without advancing the simulation.
    pub fn observe(&self) -> Observation {
        match self.cfg.obs_mode {
            ObsMode::Image => Observation::Image(self.camera.render(&self.state, &self.track.centerline)),
            ObsMode::Features => Observation::Features(extract_features(
                &self.state,
                &self.pose,
                &self.track.centerline,
                self.direction(),
                self.cfg.vmax,
            )),
        }
    }

    /// Overrides the car state mid-episode (test rigs and scripted scenarios).
    pub fn set_state(&mut self, state: CarState) {
        self.state = state;
        self.pose = project_to_centerline(state.position(), &self.track.centerline);
    }

    fn pace(&mut self) {
        if self.cfg.realtime_factor <= 0.0 {
            return;
        }
        let frame = Duration::from_secs_f64(self.cfg.dt / self.cfg.realtime_factor);
        let now = Instant::now();
        match self.next_deadline {
            Some(deadline) if deadline > now => {
                std::thread::sleep(deadline - now);
                self.next_deadline = Some(deadline + frame);
            }
            _ => self.next_deadline = Some(now + frame),
        }
    }
}
