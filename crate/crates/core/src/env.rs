//! Episode wrapper: observations, the contact-point action space, goal
//! trajectories, rewards and domain randomization around the controller and
//! simulator.

use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use thiserror::Error;

use crate::control::{ControlConfig, ControlError, Controller, ControllerState, Primitive, TickInfo};
use crate::geom::{ContactSpec, CubeGeometry, FaceId, Pose, Vec3};
use crate::kinematics::{RobotConfig, NUM_FINGERS, NUM_JOINTS};
use crate::simulator::{SimConfig, SimError, Simulator, WorldState};

pub const OBS_DIM: usize = 19;
pub const ACTION_DIM: usize = 2 * NUM_FINGERS;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EnvError {
    #[error("invalid env config: {0}")]
    InvalidConfig(String),
    #[error("invalid action: {0}")]
    InvalidAction(String),
    #[error("step called before reset or after the episode ended")]
    NotRunning,
    #[error("goal trajectory line {line}: {reason}")]
    GoalParse { line: usize, reason: String },
    #[error("invalid goal trajectory: {0}")]
    InvalidGoal(String),
    #[error("simulator: {0}")]
    Sim(#[from] SimError),
}

/// Cube position, cube quaternion (w, x, y, z), active goal, then the three
/// tip positions finger by finger.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Observation {
    pub cube_position: Vec3,
    pub cube_quaternion: [f64; 4],
    pub goal: Vec3,
    pub tips: [Vec3; NUM_FINGERS],
}

impl Observation {
    pub fn to_array(&self) -> [f64; OBS_DIM] {
        let mut out = [0.0; OBS_DIM];
        out[0..3].copy_from_slice(&self.cube_position.to_array());
        out[3..7].copy_from_slice(&self.cube_quaternion);
        out[7..10].copy_from_slice(&self.goal.to_array());
        for (f, tip) in self.tips.iter().enumerate() {
            out[10 + 3 * f..13 + 3 * f].copy_from_slice(&tip.to_array());
        }
        out
    }

    pub fn from_slice(v: &[f64]) -> Option<Observation> {
        if v.len() != OBS_DIM || v.iter().any(|x| !x.is_finite()) {
            return None;
        }
        Some(Observation {
            cube_position: Vec3::from_slice(&v[0..3]),
            cube_quaternion: [v[3], v[4], v[5], v[6]],
            goal: Vec3::from_slice(&v[7..10]),
            tips: std::array::from_fn(|f| Vec3::from_slice(&v[10 + 3 * f..13 + 3 * f])),
        })
    }

    pub fn is_finite(&self) -> bool {
        self.to_array().iter().all(|x| x.is_finite())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Waypoint {
    pub position: Vec3,
    pub duration: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GoalTrajectory {
    pub waypoints: Vec<Waypoint>,
}

impl GoalTrajectory {
    /// One waypoint per line, `x y z duration`; `#` starts a comment.
    pub fn parse(text: &str) -> Result<GoalTrajectory, EnvError> {
        let mut waypoints = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let vals: Result<Vec<f64>, _> = line.split_whitespace().map(str::parse::<f64>).collect();
            let vals = vals.map_err(|e| EnvError::GoalParse {
                line: i + 1,
                reason: e.to_string(),
            })?;
            if vals.len() != 4 {
                return Err(EnvError::GoalParse {
                    line: i + 1,
                    reason: format!("expected 4 numbers, got {}", vals.len()),
                });
            }
            waypoints.push(Waypoint {
                position: Vec3::new(vals[0], vals[1], vals[2]),
                duration: vals[3],
            });
        }
        Ok(GoalTrajectory { waypoints })
    }

    pub fn to_text(&self) -> String {
        let mut s = String::from("# x y z duration\n");
        for w in &self.waypoints {
            let p = w.position;
            let _ = writeln!(s, "{:?} {:?} {:?} {:?}", p.x, p.y, p.z, w.duration);
        }
        s
    }

    pub fn validate(&self, cfg: &EnvConfig) -> Result<(), EnvError> {
        if self.waypoints.is_empty() {
            return Err(EnvError::InvalidGoal("no waypoints".into()));
        }
        for (i, w) in self.waypoints.iter().enumerate() {
            let p = w.position;
            if !p.is_finite() || !w.duration.is_finite() {
                return Err(EnvError::InvalidGoal(format!("waypoint {i} not finite")));
            }
            if !(w.duration > 0.0) {
                return Err(EnvError::InvalidGoal(format!("waypoint {i} duration must be > 0")));
            }
            if p.x.hypot(p.y) > cfg.arena_radius || p.z < 0.0 || p.z > cfg.max_height {
                return Err(EnvError::InvalidGoal(format!("waypoint {i} outside the arena")));
            }
        }
        Ok(())
    }

    pub fn total_duration(&self) -> f64 {
        self.waypoints.iter().map(|w| w.duration).sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnvConfig {
    pub arena_radius: f64,
    /// Cube start positions are uniform in a disc of this radius.
    pub spawn_radius: f64,
    pub num_waypoints: usize,
    pub waypoint_duration: f64,
    /// Goal cylinder radius as a fraction of the arena radius.
    pub goal_radius_fraction: f64,
    pub min_goal_height: f64,
    pub max_goal_height: f64,
    pub max_step: f64,
    /// Upper bound on any goal height.
    pub max_height: f64,
    pub reward_scale: f64,
    pub reward_sharpness: f64,
    /// A dropped cube is regrasped only once its speed falls below this.
    pub settle_speed: f64,
}

impl Default for EnvConfig {
    fn default() -> Self {
        Self {
            arena_radius: 0.19,
            spawn_radius: 0.05,
            num_waypoints: 4,
            waypoint_duration: 6.0,
            goal_radius_fraction: 0.7,
            min_goal_height: 0.04,
            max_goal_height: 0.15,
            max_step: 0.15,
            max_height: 0.2,
            reward_scale: 0.001,
            reward_sharpness: 300.0,
            settle_speed: 0.05,
        }
    }
}

impl EnvConfig {
    pub fn validate(&self) -> Result<(), EnvError> {
        let bad = |m: &str| Err(EnvError::InvalidConfig(m.to_string()));
        let fin = [
            self.arena_radius,
            self.spawn_radius,
            self.waypoint_duration,
            self.goal_radius_fraction,
            self.min_goal_height,
            self.max_goal_height,
            self.max_step,
            self.max_height,
            self.reward_scale,
            self.reward_sharpness,
            self.settle_speed,
        ];
        if fin.iter().any(|v| !v.is_finite()) {
            return bad("non-finite value");
        }
        if !(self.arena_radius > 0.0) || !(self.spawn_radius >= 0.0) || self.spawn_radius > self.arena_radius {
            return bad("need 0 <= spawn_radius <= arena_radius and arena_radius > 0");
        }
        if self.num_waypoints == 0 || !(self.waypoint_duration > 0.0) {
            return bad("need num_waypoints >= 1 and waypoint_duration > 0");
        }
        if !(0.0..=1.0).contains(&self.goal_radius_fraction) {
            return bad("goal_radius_fraction must lie in [0, 1]");
        }
        if !(self.min_goal_height > 0.0)
            || self.min_goal_height > self.max_goal_height
            || self.max_goal_height > self.max_height
        {
            return bad("need 0 < min_goal_height <= max_goal_height <= max_height");
        }
        if !(self.max_step > 0.0) || !(self.reward_scale > 0.0) || !(self.reward_sharpness > 0.0) {
            return bad("max_step, reward_scale and reward_sharpness must be > 0");
        }
        if !(self.settle_speed > 0.0) {
            return bad("settle_speed must be > 0");
        }
        Ok(())
    }
}

/// Multiplicative parameter ranges resampled at every reset.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RandomizationConfig {
    pub enabled: bool,
    pub mass_range: (f64, f64),
    pub friction_range: (f64, f64),
    pub tip_stiffness_range: (f64, f64),
    /// Std of Gaussian noise on observed positions (m).
    pub obs_noise_std: f64,
}

impl Default for RandomizationConfig {
    fn default() -> Self {
        Self {
            enabled: false,
            mass_range: (0.8, 1.2),
            friction_range: (0.8, 1.2),
            tip_stiffness_range: (0.8, 1.2),
            obs_noise_std: 0.001,
        }
    }
}

impl RandomizationConfig {
    pub fn validate(&self) -> Result<(), EnvError> {
        for (name, (lo, hi)) in [
            ("mass_range", self.mass_range),
            ("friction_range", self.friction_range),
            ("tip_stiffness_range", self.tip_stiffness_range),
        ] {
            if !(0.5 <= lo && lo <= hi && hi <= 2.0) {
                return Err(EnvError::InvalidConfig(format!("{name} must satisfy 0.5 <= lo <= hi <= 2")));
            }
        }
        if !(self.obs_noise_std >= 0.0) || !self.obs_noise_std.is_finite() {
            return Err(EnvError::InvalidConfig("obs_noise_std must be >= 0".into()));
        }
        Ok(())
    }
}

/// Physical parameters actually used by the simulator in one episode.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpisodeParams {
    pub cube_mass: f64,
    pub friction: f64,
    pub tip_stiffness: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub s: [f64; OBS_DIM],
    pub a: [f64; ACTION_DIM],
    pub r: f64,
    pub s2: [f64; OBS_DIM],
    pub done: bool,
}

pub fn reward(goal: Vec3, cube: Vec3, scale: f64, sharpness: f64) -> f64 {
    scale * (-sharpness * (goal - cube).norm_squared()).exp()
}

/// Assigns each finger one of the four faces currently around the cube's
/// sides: the assignment maximizing the summed alignment between each face's
/// outward normal and the horizontal direction toward that finger's base. Ties
/// go to the lexicographically first assignment in finger order.
pub fn assign_faces(cube_pose: &Pose, bases: &[Vec3; NUM_FINGERS]) -> [FaceId; NUM_FINGERS] {
    let sides = side_faces(cube_pose);
    let score = |f: usize, face: FaceId| {
        let n = cube_pose.transform_vector(face.local_normal());
        let n = Vec3::new(n.x, n.y, 0.0);
        let d = bases[f] - cube_pose.position;
        let d = Vec3::new(d.x, d.y, 0.0);
        let (nn, dn) = (n.norm(), d.norm());
        if nn < 1e-12 || dn < 1e-12 {
            0.0
        } else {
            n.dot(d) / (nn * dn)
        }
    };
    let mut best = [sides[0], sides[1], sides[2]];
    let mut best_score = f64::NEG_INFINITY;
    for a in 0..4 {
        for b in 0..4 {
            for c in 0..4 {
                if a == b || b == c || a == c {
                    continue;
                }
                let s = score(0, sides[a]) + score(1, sides[b]) + score(2, sides[c]);
                if s > best_score + 1e-9 {
                    best_score = s;
                    best = [sides[a], sides[b], sides[c]];
                }
            }
        }
    }
    best
}

/// The four faces whose normals are closest to horizontal, in a fixed order.
fn side_faces(pose: &Pose) -> [FaceId; 4] {
    let vertical = |f: FaceId| pose.transform_vector(f.local_normal()).z.abs();
    let axes = [
        [FaceId::PosY, FaceId::NegY, FaceId::PosZ, FaceId::NegZ],
        [FaceId::PosX, FaceId::NegX, FaceId::PosZ, FaceId::NegZ],
        [FaceId::PosX, FaceId::PosY, FaceId::NegX, FaceId::NegY],
    ];
    let up = [FaceId::PosX, FaceId::PosY, FaceId::PosZ];
    let mut k = 2;
    for i in 0..3 {
        if vertical(up[i]) > vertical(up[k]) + 1e-12 {
            k = i;
        }
    }
    axes[k]
}

/// Maps a box action to contact specs on the faces given by [`assign_faces`].
pub fn action_to_contacts(
    action: &[f64; ACTION_DIM],
    cube_pose: &Pose,
    bases: &[Vec3; NUM_FINGERS],
) -> Result<[ContactSpec; NUM_FINGERS], EnvError> {
    let faces = assign_faces(cube_pose, bases);
    let mut out = [ContactSpec::center(faces[0]); NUM_FINGERS];
    for f in 0..NUM_FINGERS {
        out[f] = ContactSpec::new(faces[f], action[2 * f], action[2 * f + 1])
            .map_err(|e| EnvError::InvalidAction(e.to_string()))?;
    }
    Ok(out)
}

pub fn sample_goal_trajectory<R: Rng>(rng: &mut R, cfg: &EnvConfig) -> GoalTrajectory {
    let radius = cfg.goal_radius_fraction * cfg.arena_radius;
    let mut waypoints: Vec<Waypoint> = Vec::with_capacity(cfg.num_waypoints);
    while waypoints.len() < cfg.num_waypoints {
        let r = radius * rng.gen::<f64>().sqrt();
        let th = rng.gen_range(-std::f64::consts::PI..std::f64::consts::PI);
        let z = rng.gen_range(cfg.min_goal_height..=cfg.max_goal_height);
        let p = Vec3::new(r * th.cos(), r * th.sin(), z);
        if let Some(prev) = waypoints.last() {
            if (p - prev.position).norm() > cfg.max_step {
                continue;
            }
        }
        waypoints.push(Waypoint {
            position: p,
            duration: cfg.waypoint_duration,
        });
    }
    GoalTrajectory { waypoints }
}

/// One line of a rollout trace, recorded per control tick.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRecord {
    pub time: f64,
    pub cube_pose: Pose,
    pub tips: [Vec3; NUM_FINGERS],
    pub torques: [f64; NUM_JOINTS],
    /// Primitive active when the tick began.
    pub primitive: Primitive,
    pub reward: f64,
    pub info: TickInfo,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub observation: Observation,
    pub reward: f64,
    pub done: bool,
    /// Set when the episode ended early (reach failure or divergence).
    pub failure: Option<String>,
}

#[derive(Debug, Clone)]
pub struct Env {
    pub cfg: EnvConfig,
    pub sim_cfg: SimConfig,
    pub cube: CubeGeometry,
    pub robot: RobotConfig,
    pub control: ControlConfig,
    pub randomization: RandomizationConfig,
    episode: Option<Episode>,
    pub record_trace: bool,
    pub trace: Vec<TraceRecord>,
}

#[derive(Debug, Clone)]
struct Episode {
    sim: Simulator,
    controller: Controller,
    params: EpisodeParams,
    world: WorldState,
    cstate: ControllerState,
    goals: GoalTrajectory,
    window: usize,
    done: bool,
    rng: ChaCha8Rng,
}

impl Env {
    pub fn new(
        cfg: EnvConfig,
        sim_cfg: SimConfig,
        cube: CubeGeometry,
        robot: RobotConfig,
        control: ControlConfig,
        randomization: RandomizationConfig,
    ) -> Result<Env, EnvError> {
        cfg.validate()?;
        randomization.validate()?;
        sim_cfg.validate()?;
        control.validate().map_err(EnvError::InvalidConfig)?;
        robot.validate().map_err(EnvError::InvalidConfig)?;
        cube.validate().map_err(|e| EnvError::InvalidConfig(e.to_string()))?;
        Ok(Env {
            cfg,
            sim_cfg,
            cube,
            robot,
            control,
            randomization,
            episode: None,
            record_trace: false,
            trace: Vec::new(),
        })
    }

    pub fn with_defaults() -> Env {
        Env::new(
            EnvConfig::default(),
            SimConfig::default(),
            CubeGeometry::default(),
            RobotConfig::default(),
            ControlConfig::default(),
            RandomizationConfig::default(),
        )
        .expect("defaults are valid")
    }

    /// Starts an episode with a sampled goal trajectory.
    pub fn reset(&mut self, seed: u64) -> Observation {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (pose, params) = self.sample_start(&mut rng);
        let goals = sample_goal_trajectory(&mut rng, &self.cfg);
        self.start(rng, pose, params, goals)
    }

    /// Starts an episode on a fixed goal trajectory.
    pub fn reset_with_goals(&mut self, seed: u64, goals: GoalTrajectory) -> Result<Observation, EnvError> {
        goals.validate(&self.cfg)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (pose, params) = self.sample_start(&mut rng);
        Ok(self.start(rng, pose, params, goals))
    }

    fn sample_start(&self, rng: &mut ChaCha8Rng) -> ((f64, f64, f64), EpisodeParams) {
        let r = self.cfg.spawn_radius * rng.gen::<f64>().sqrt();
        let th = rng.gen_range(-std::f64::consts::PI..std::f64::consts::PI);
        let yaw = rng.gen_range(-std::f64::consts::PI..std::f64::consts::PI);
        let mut params = EpisodeParams {
            cube_mass: self.cube.mass,
            friction: self.cube.friction_coeff,
            tip_stiffness: self.sim_cfg.tip_stiffness,
        };
        if self.randomization.enabled {
            let rz = &self.randomization;
            let mut pick = |(lo, hi): (f64, f64)| if hi > lo { rng.gen_range(lo..=hi) } else { lo };
            params.cube_mass *= pick(rz.mass_range);
            params.friction *= pick(rz.friction_range);
            params.tip_stiffness *= pick(rz.tip_stiffness_range);
        }
        ((r * th.cos(), r * th.sin(), yaw), params)
    }

    fn start(
        &mut self,
        rng: ChaCha8Rng,
        (x, y, yaw): (f64, f64, f64),
        params: EpisodeParams,
        goals: GoalTrajectory,
    ) -> Observation {
        let cube = CubeGeometry::solid(self.cube.edge_length, params.cube_mass, params.friction);
        let sim_cfg = SimConfig {
            tip_stiffness: params.tip_stiffness,
            ..self.sim_cfg.clone()
        };
        let sim = Simulator::new(sim_cfg, cube, self.robot.clone()).expect("validated config");
        let controller = Controller::new(
            self.control.clone(),
            self.cube,
            self.robot.clone(),
            self.sim_cfg.gravity,
            self.sim_cfg.tip_radius,
        );
        let world = sim.resting_state(x, y, yaw);
        self.trace.clear();
        self.episode = Some(Episode {
            sim,
            controller,
            params,
            world,
            cstate: ControllerState::default(),
            goals,
            window: 0,
            done: false,
            rng,
        });
        self.observe()
    }

    fn observe(&mut self) -> Observation {
        let noise = if self.randomization.enabled { self.randomization.obs_noise_std } else { 0.0 };
        let ep = self.episode.as_mut().expect("episode running");
        let goal_index = ep.window.min(ep.goals.waypoints.len() - 1);
        let goal = ep.goals.waypoints[goal_index].position;
        let mut cube_position = ep.world.cube_pose.position;
        let mut tips = ep.sim.tip_positions(&ep.world.joints);
        if noise > 0.0 {
            let dist = Normal::new(0.0, noise).expect("std >= 0");
            let mut jitter = |v: Vec3| v + Vec3::new(dist.sample(&mut ep.rng), dist.sample(&mut ep.rng), dist.sample(&mut ep.rng));
            cube_position = jitter(cube_position);
            for t in tips.iter_mut() {
                *t = jitter(*t);
            }
        }
        Observation {
            cube_position,
            cube_quaternion: ep.world.cube_pose.orientation.to_array(),
            goal,
            tips,
        }
    }

    pub fn params(&self) -> Option<EpisodeParams> {
        self.episode.as_ref().map(|e| e.params)
    }

    pub fn goals(&self) -> Option<&GoalTrajectory> {
        self.episode.as_ref().map(|e| &e.goals)
    }

    pub fn world(&self) -> Option<&WorldState> {
        self.episode.as_ref().map(|e| &e.world)
    }

    pub fn primitive(&self) -> Option<Primitive> {
        self.episode.as_ref().map(|e| e.cstate.primitive)
    }

    pub fn control_dt(&self) -> f64 {
        self.sim_cfg.dt * self.control.decimation as f64
    }

    pub fn ticks_in_window(&self, duration: f64) -> usize {
        (duration / self.control_dt()).round() as usize
    }

    /// Runs one waypoint window with the contacts chosen by `action`.
    pub fn step(&mut self, action: &[f64; ACTION_DIM]) -> Result<StepOutcome, EnvError> {
        if action.iter().any(|a| !a.is_finite() || a.abs() > 1.0) {
            return Err(EnvError::InvalidAction("components must be finite and within [-1, 1]".into()));
        }
        let dt = self.control_dt();
        let bases: [Vec3; NUM_FINGERS] = std::array::from_fn(|f| self.robot.base_position(f));
        let settle = self.cfg.settle_speed;
        let (scale, sharp) = (self.cfg.reward_scale, self.cfg.reward_sharpness);
        let record = self.record_trace;
        let ticks = match &self.episode {
            Some(ep) if !ep.done => self.ticks_in_window(ep.goals.waypoints[ep.window].duration),
            _ => return Err(EnvError::NotRunning),
        };
        let ep = self.episode.as_mut().expect("checked above");
        let goal = ep.goals.waypoints[ep.window].position;
        let mut total = 0.0;
        let mut failure = None;
        for _ in 0..ticks {
            let decision = if ep.cstate.primitive == Primitive::SelectContacts
                && ep.world.cube_linvel.norm() < settle
                && ep.world.cube_angvel.norm() * self.cube.half_edge() < settle
            {
                Some(action_to_contacts(action, &ep.world.cube_pose, &bases)?)
            } else {
                None
            };
            let active = ep.cstate.primitive;
            let (tau, next, info) = match ep.controller.tick(&ep.cstate, &ep.world, goal, decision, dt) {
                Ok(v) => v,
                Err(e @ (ControlError::ReachFailed { .. } | ControlError::NonFinite)) => {
                    failure = Some(e.to_string());
                    break;
                }
                Err(e) => return Err(EnvError::InvalidConfig(e.to_string())),
            };
            ep.cstate = next;
            let mut diverged = None;
            for _ in 0..ep.controller.cfg.decimation {
                match ep.sim.step(&ep.world, &tau) {
                    Ok(w) => ep.world = w,
                    Err(e) => {
                        diverged = Some(e.to_string());
                        break;
                    }
                }
            }
            if diverged.is_some() {
                failure = diverged;
                break;
            }
            let r = reward(goal, ep.world.cube_pose.position, scale, sharp);
            total += r;
            if record {
                self.trace.push(TraceRecord {
                    time: ep.world.time,
                    cube_pose: ep.world.cube_pose,
                    tips: ep.sim.tip_positions(&ep.world.joints),
                    torques: ep.sim.clamp_torques(&tau),
                    primitive: active,
                    reward: r,
                    info,
                });
            }
        }
        ep.window += 1;
        ep.done = failure.is_some() || ep.window >= ep.goals.waypoints.len();
        let done = ep.done;
        let observation = self.observe();
        Ok(StepOutcome {
            observation,
            reward: total,
            done,
            failure,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::UnitQuat;

    fn bases() -> [Vec3; NUM_FINGERS] {
        let robot = RobotConfig::default();
        std::array::from_fn(|f| robot.base_position(f))
    }

    #[test]
    fn reward_examples() {
        assert_eq!(reward(Vec3::ZERO, Vec3::ZERO, 0.001, 300.0), 0.001);
        let d = (2f64.ln() / 300.0).sqrt();
        assert!((reward(Vec3::ZERO, Vec3::new(d, 0.0, 0.0), 0.001, 300.0) - 0.0005).abs() < 1e-15);
        let far = reward(Vec3::ZERO, Vec3::X, 0.001, 300.0);
        assert!((far / 5.1e-134 - 1.0).abs() < 0.01, "{far:e}");
    }

    #[test]
    fn axis_aligned_faces_are_distinct() {
        let faces = assign_faces(&Pose::IDENTITY, &bases());
        assert_eq!(faces, [FaceId::PosX, FaceId::PosY, FaceId::NegY]);
    }

    #[test]
    fn yawed_cube_rotates_assignment() {
        let pose = Pose::new(Vec3::ZERO, UnitQuat::from_yaw(std::f64::consts::FRAC_PI_2));
        // +Y local points along -X world after a quarter turn
        let faces = assign_faces(&pose, &bases());
        assert_eq!(faces, [FaceId::NegY, FaceId::PosX, FaceId::NegX]);
    }

    #[test]
    fn symmetric_bases_tie_break_by_finger_order() {
        let b = [Vec3::new(0.0, 1.0, 0.3), Vec3::new(0.0, -1.0, 0.3), Vec3::new(1.0, 0.0, 0.3)];
        let pose = Pose::new(Vec3::ZERO, UnitQuat::from_yaw(std::f64::consts::FRAC_PI_4));
        assert_eq!(assign_faces(&pose, &b), assign_faces(&pose, &b));
        let faces = assign_faces(&pose, &b);
        assert!(faces[0] != faces[1] && faces[1] != faces[2] && faces[0] != faces[2]);
    }

    #[test]
    fn goal_text_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let g = sample_goal_trajectory(&mut rng, &EnvConfig::default());
        assert_eq!(GoalTrajectory::parse(&g.to_text()).unwrap(), g);
        assert!(GoalTrajectory::parse("0 0 0.1").is_err());
        assert!(GoalTrajectory::parse("0 0 x 1").is_err());
    }

    #[test]
    fn observation_round_trip() {
        let env_obs = Env::with_defaults().reset(5);
        assert_eq!(Observation::from_slice(&env_obs.to_array()), Some(env_obs));
    }
}
