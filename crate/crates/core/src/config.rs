//! Flat `section.key = value` run configuration covering every tunable of the
//! stack. Unknown and duplicate keys are rejected; values are validated by the
//! owning module.

use std::collections::HashSet;

use thiserror::Error;

use crate::control::ControlConfig;
use crate::env::{EnvConfig, RandomizationConfig};
use crate::geom::{CubeGeometry, Vec3};
use crate::kinematics::RobotConfig;
use crate::sac::{Activation, SacConfig};
use crate::simulator::SimConfig;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("line {line}: {reason}")]
    Syntax { line: usize, reason: String },
    #[error("unknown key '{0}'")]
    UnknownKey(String),
    #[error("duplicate key '{0}'")]
    DuplicateKey(String),
    #[error("key '{key}': cannot parse '{value}' ({reason})")]
    BadValue { key: String, value: String, reason: String },
    #[error("invalid configuration: {0}")]
    Invalid(String),
}

/// Training budget and schedule.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub episodes: usize,
    /// Episodes with uniformly random actions before the policy acts.
    pub warmup_episodes: usize,
    /// Gradient updates per collected transition once the buffer holds a batch.
    pub updates_per_step: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            episodes: 800,
            warmup_episodes: 50,
            updates_per_step: 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub robot: RobotConfig,
    pub sim: SimConfig,
    pub cube: CubeGeometry,
    pub env: EnvConfig,
    pub control: ControlConfig,
    pub randomization: RandomizationConfig,
    pub sac: SacConfig,
    pub train: TrainConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            robot: RobotConfig::default(),
            sim: SimConfig::default(),
            cube: CubeGeometry::default(),
            env: EnvConfig::default(),
            control: ControlConfig::default(),
            randomization: RandomizationConfig::default(),
            sac: SacConfig::default(),
            train: TrainConfig::default(),
        }
    }
}

fn fmt_f(v: f64) -> String {
    format!("{v:?}")
}

fn fmt_list(v: &[f64]) -> String {
    v.iter().map(|x| fmt_f(*x)).collect::<Vec<_>>().join(" ")
}

fn fmt_vec3(v: Vec3) -> String {
    fmt_list(&v.to_array())
}

struct Value<'a> {
    key: &'a str,
    raw: &'a str,
}

impl Value<'_> {
    fn err(&self, reason: impl Into<String>) -> ConfigError {
        ConfigError::BadValue {
            key: self.key.to_string(),
            value: self.raw.to_string(),
            reason: reason.into(),
        }
    }

    fn f64(&self) -> Result<f64, ConfigError> {
        let v: f64 = self.raw.trim().parse().map_err(|e: std::num::ParseFloatError| self.err(e.to_string()))?;
        if !v.is_finite() {
            return Err(self.err("not finite"));
        }
        Ok(v)
    }

    fn usize(&self) -> Result<usize, ConfigError> {
        self.raw.trim().parse().map_err(|e: std::num::ParseIntError| self.err(e.to_string()))
    }

    fn u64(&self) -> Result<u64, ConfigError> {
        self.raw.trim().parse().map_err(|e: std::num::ParseIntError| self.err(e.to_string()))
    }

    fn bool(&self) -> Result<bool, ConfigError> {
        match self.raw.trim() {
            "true" => Ok(true),
            "false" => Ok(false),
            _ => Err(self.err("expected true or false")),
        }
    }

    fn list(&self) -> Result<Vec<f64>, ConfigError> {
        self.raw
            .split_whitespace()
            .map(|t| {
                let v: f64 = t.parse().map_err(|e: std::num::ParseFloatError| self.err(e.to_string()))?;
                if v.is_finite() {
                    Ok(v)
                } else {
                    Err(self.err("not finite"))
                }
            })
            .collect()
    }

    fn array<const N: usize>(&self) -> Result<[f64; N], ConfigError> {
        let v = self.list()?;
        v.as_slice().try_into().map_err(|_| self.err(format!("expected {N} numbers")))
    }

    fn vec3(&self) -> Result<Vec3, ConfigError> {
        let a = self.array::<3>()?;
        Ok(Vec3::new(a[0], a[1], a[2]))
    }

    fn range(&self) -> Result<(f64, f64), ConfigError> {
        let a = self.array::<2>()?;
        Ok((a[0], a[1]))
    }

    fn sizes(&self) -> Result<Vec<usize>, ConfigError> {
        self.raw
            .split_whitespace()
            .map(|t| t.parse().map_err(|e: std::num::ParseIntError| self.err(e.to_string())))
            .collect()
    }
}

/// Every key with a one-line description, in dump order.
pub const KEYS: &[(&str, &str)] = &[
    ("robot.base_radius", "horizontal distance of each finger base from the arena center (m)"),
    ("robot.base_height", "height of the finger bases (m)"),
    ("robot.link_lengths", "three link lengths (m)"),
    ("robot.joint_lower", "lower joint limits (rad)"),
    ("robot.joint_upper", "upper joint limits (rad)"),
    ("robot.link_mass", "mass of each link (kg)"),
    ("robot.armature", "rotor inertia added to each joint (kg m^2)"),
    ("robot.joint_damping", "viscous joint damping (N m s/rad)"),
    ("robot.torque_limit", "joint torque limit (N m)"),
    ("robot.home", "home joint angles of each finger (rad)"),
    ("sim.dt", "integration step (s)"),
    ("sim.gravity", "gravity vector (m/s^2)"),
    ("sim.floor_stiffness", "floor contact stiffness (N/m)"),
    ("sim.floor_damping", "floor contact damping (N s/m)"),
    ("sim.tip_stiffness", "fingertip contact stiffness (N/m)"),
    ("sim.tip_damping", "fingertip contact damping (N s/m)"),
    ("sim.tip_radius", "fingertip sphere radius (m)"),
    ("sim.floor_enabled", "whether the floor exists"),
    ("sim.max_linear_speed", "cube speed treated as divergence (m/s)"),
    ("sim.max_angular_speed", "cube angular speed treated as divergence (rad/s)"),
    ("sim.max_joint_speed", "joint speed treated as divergence (rad/s)"),
    ("sim.joint_limit_stiffness", "stiffness of the joint limit springs (N m/rad)"),
    ("sim.cube_edge", "cube edge length (m)"),
    ("sim.cube_mass", "cube mass (kg)"),
    ("sim.cube_friction", "tip and floor friction coefficient"),
    ("control.kp_joint", "joint position gains for the three joints of a finger"),
    ("control.kd_joint", "joint velocity gains for the three joints of a finger"),
    ("control.kp_lin", "cube position gain (1/s^2)"),
    ("control.kd_lin", "cube velocity gain (1/s)"),
    ("control.kp_ang", "cube orientation gain (1/s^2, scaled by inertia)"),
    ("control.kd_ang", "cube angular velocity gain (1/s, scaled by inertia)"),
    ("control.decimation", "simulator steps per control tick"),
    ("control.reach_segment_duration", "duration of each reach segment (s)"),
    ("control.standoff", "pre-contact offset along the face normal (m)"),
    ("control.contact_tolerance", "tip distance for reach completion (m)"),
    ("control.reach_timeout", "time allowed after the reach path before replanning (s)"),
    ("control.press_depth", "tip target depth inside the face (m)"),
    ("control.lift_duration", "duration of each cube path toward a waypoint (s)"),
    ("control.f_max", "normal force bound per tip (N)"),
    ("control.w_reg", "weight of the normal preload term"),
    ("control.f_ref", "normal preload per tip (N)"),
    ("control.wrench_weight", "penalty weight on the wrench residual"),
    ("control.drop_slack", "tip gap still counted as contact (m)"),
    ("control.drop_error", "cube position error counted as a drop (m)"),
    ("control.drop_grace_ticks", "consecutive lost ticks before a drop is declared"),
    ("control.lift_settle_ticks", "lift ticks before drop detection starts"),
    ("env.arena_radius", "arena radius (m)"),
    ("env.spawn_radius", "radius of the disc of cube start positions (m)"),
    ("env.num_waypoints", "waypoints per goal trajectory"),
    ("env.waypoint_duration", "duration of each waypoint window (s)"),
    ("env.goal_radius_fraction", "goal cylinder radius as a fraction of the arena radius"),
    ("env.min_goal_height", "lowest goal height (m)"),
    ("env.max_goal_height", "highest sampled goal height (m)"),
    ("env.max_step", "largest distance between consecutive waypoints (m)"),
    ("env.max_height", "highest goal height accepted from files (m)"),
    ("env.reward_scale", "reward at zero distance"),
    ("env.reward_sharpness", "reward decay per squared meter"),
    ("env.settle_speed", "cube speed below which a dropped cube is regrasped (m/s)"),
    ("randomization.enabled", "resample physical parameters at every reset"),
    ("randomization.mass_range", "multiplicative cube mass range"),
    ("randomization.friction_range", "multiplicative friction range"),
    ("randomization.tip_stiffness_range", "multiplicative tip stiffness range"),
    ("randomization.obs_noise_std", "observation position noise std (m)"),
    ("sac.gamma", "discount factor"),
    ("sac.alpha", "entropy temperature"),
    ("sac.tau", "soft target update rate"),
    ("sac.lr", "Adam learning rate"),
    ("sac.batch_size", "minibatch size"),
    ("sac.buffer_capacity", "replay buffer capacity"),
    ("sac.hidden", "hidden layer widths"),
    ("sac.activation", "hidden activation (tanh or relu)"),
    ("sac.output_init_scale", "half-width of the output layer init"),
    ("sac.seed", "run seed"),
    ("train.episodes", "training episodes"),
    ("train.warmup_episodes", "initial episodes with uniform random actions"),
    ("train.updates_per_step", "gradient updates per collected transition"),
];

impl RunConfig {
    pub fn get(&self, key: &str) -> Result<String, ConfigError> {
        let (r, s, c, g) = (&self.robot, &self.sim, &self.control, &self.control.gains);
        let (e, z, q, t) = (&self.env, &self.randomization, &self.sac, &self.train);
        let range = |(a, b): (f64, f64)| fmt_list(&[a, b]);
        Ok(match key {
            "robot.base_radius" => fmt_f(r.base_radius),
            "robot.base_height" => fmt_f(r.base_height),
            "robot.link_lengths" => fmt_list(&r.link_lengths),
            "robot.joint_lower" => fmt_list(&r.joint_lower),
            "robot.joint_upper" => fmt_list(&r.joint_upper),
            "robot.link_mass" => fmt_f(r.link_mass),
            "robot.armature" => fmt_f(r.armature),
            "robot.joint_damping" => fmt_f(r.joint_damping),
            "robot.torque_limit" => fmt_f(r.torque_limit),
            "robot.home" => fmt_list(&r.home),
            "sim.dt" => fmt_f(s.dt),
            "sim.gravity" => fmt_vec3(s.gravity),
            "sim.floor_stiffness" => fmt_f(s.floor_stiffness),
            "sim.floor_damping" => fmt_f(s.floor_damping),
            "sim.tip_stiffness" => fmt_f(s.tip_stiffness),
            "sim.tip_damping" => fmt_f(s.tip_damping),
            "sim.tip_radius" => fmt_f(s.tip_radius),
            "sim.floor_enabled" => s.floor_enabled.to_string(),
            "sim.max_linear_speed" => fmt_f(s.max_linear_speed),
            "sim.max_angular_speed" => fmt_f(s.max_angular_speed),
            "sim.max_joint_speed" => fmt_f(s.max_joint_speed),
            "sim.joint_limit_stiffness" => fmt_f(s.joint_limit_stiffness),
            "sim.cube_edge" => fmt_f(self.cube.edge_length),
            "sim.cube_mass" => fmt_f(self.cube.mass),
            "sim.cube_friction" => fmt_f(self.cube.friction_coeff),
            "control.kp_joint" => fmt_list(&g.kp_joint),
            "control.kd_joint" => fmt_list(&g.kd_joint),
            "control.kp_lin" => fmt_f(g.cube.kp_lin),
            "control.kd_lin" => fmt_f(g.cube.kd_lin),
            "control.kp_ang" => fmt_f(g.cube.kp_ang),
            "control.kd_ang" => fmt_f(g.cube.kd_ang),
            "control.decimation" => c.decimation.to_string(),
            "control.reach_segment_duration" => fmt_f(c.reach_segment_duration),
            "control.standoff" => fmt_f(c.standoff),
            "control.contact_tolerance" => fmt_f(c.contact_tolerance),
            "control.reach_timeout" => fmt_f(c.reach_timeout),
            "control.press_depth" => fmt_f(c.press_depth),
            "control.lift_duration" => fmt_f(c.lift_duration),
            "control.f_max" => fmt_f(c.f_max),
            "control.w_reg" => fmt_f(c.w_reg),
            "control.f_ref" => fmt_f(c.f_ref),
            "control.wrench_weight" => fmt_f(c.wrench_weight),
            "control.drop_slack" => fmt_f(c.drop_slack),
            "control.drop_error" => fmt_f(c.drop_error),
            "control.drop_grace_ticks" => c.drop_grace_ticks.to_string(),
            "control.lift_settle_ticks" => c.lift_settle_ticks.to_string(),
            "env.arena_radius" => fmt_f(e.arena_radius),
            "env.spawn_radius" => fmt_f(e.spawn_radius),
            "env.num_waypoints" => e.num_waypoints.to_string(),
            "env.waypoint_duration" => fmt_f(e.waypoint_duration),
            "env.goal_radius_fraction" => fmt_f(e.goal_radius_fraction),
            "env.min_goal_height" => fmt_f(e.min_goal_height),
            "env.max_goal_height" => fmt_f(e.max_goal_height),
            "env.max_step" => fmt_f(e.max_step),
            "env.max_height" => fmt_f(e.max_height),
            "env.reward_scale" => fmt_f(e.reward_scale),
            "env.reward_sharpness" => fmt_f(e.reward_sharpness),
            "env.settle_speed" => fmt_f(e.settle_speed),
            "randomization.enabled" => z.enabled.to_string(),
            "randomization.mass_range" => range(z.mass_range),
            "randomization.friction_range" => range(z.friction_range),
            "randomization.tip_stiffness_range" => range(z.tip_stiffness_range),
            "randomization.obs_noise_std" => fmt_f(z.obs_noise_std),
            "sac.gamma" => fmt_f(q.gamma),
            "sac.alpha" => fmt_f(q.alpha),
            "sac.tau" => fmt_f(q.tau),
            "sac.lr" => fmt_f(q.lr),
            "sac.batch_size" => q.batch_size.to_string(),
            "sac.buffer_capacity" => q.buffer_capacity.to_string(),
            "sac.hidden" => q.hidden.iter().map(usize::to_string).collect::<Vec<_>>().join(" "),
            "sac.activation" => q.activation.label().to_string(),
            "sac.output_init_scale" => fmt_f(q.output_init_scale),
            "sac.seed" => q.seed.to_string(),
            "train.episodes" => t.episodes.to_string(),
            "train.warmup_episodes" => t.warmup_episodes.to_string(),
            "train.updates_per_step" => t.updates_per_step.to_string(),
            _ => return Err(ConfigError::UnknownKey(key.to_string())),
        })
    }

    pub fn set(&mut self, key: &str, raw: &str) -> Result<(), ConfigError> {
        let v = Value { key, raw };
        let (r, s, c) = (&mut self.robot, &mut self.sim, &mut self.control);
        let (e, z, q, t) = (&mut self.env, &mut self.randomization, &mut self.sac, &mut self.train);
        match key {
            "robot.base_radius" => r.base_radius = v.f64()?,
            "robot.base_height" => r.base_height = v.f64()?,
            "robot.link_lengths" => r.link_lengths = v.array()?,
            "robot.joint_lower" => r.joint_lower = v.array()?,
            "robot.joint_upper" => r.joint_upper = v.array()?,
            "robot.link_mass" => r.link_mass = v.f64()?,
            "robot.armature" => r.armature = v.f64()?,
            "robot.joint_damping" => r.joint_damping = v.f64()?,
            "robot.torque_limit" => r.torque_limit = v.f64()?,
            "robot.home" => r.home = v.array()?,
            "sim.dt" => s.dt = v.f64()?,
            "sim.gravity" => s.gravity = v.vec3()?,
            "sim.floor_stiffness" => s.floor_stiffness = v.f64()?,
            "sim.floor_damping" => s.floor_damping = v.f64()?,
            "sim.tip_stiffness" => s.tip_stiffness = v.f64()?,
            "sim.tip_damping" => s.tip_damping = v.f64()?,
            "sim.tip_radius" => s.tip_radius = v.f64()?,
            "sim.floor_enabled" => s.floor_enabled = v.bool()?,
            "sim.max_linear_speed" => s.max_linear_speed = v.f64()?,
            "sim.max_angular_speed" => s.max_angular_speed = v.f64()?,
            "sim.max_joint_speed" => s.max_joint_speed = v.f64()?,
            "sim.joint_limit_stiffness" => s.joint_limit_stiffness = v.f64()?,
            "sim.cube_edge" => {
                self.cube = CubeGeometry::solid(v.f64()?, self.cube.mass, self.cube.friction_coeff);
            }
            "sim.cube_mass" => {
                self.cube = CubeGeometry::solid(self.cube.edge_length, v.f64()?, self.cube.friction_coeff);
            }
            "sim.cube_friction" => {
                self.cube = CubeGeometry::solid(self.cube.edge_length, self.cube.mass, v.f64()?);
            }
            "control.kp_joint" => c.gains.kp_joint = v.array()?,
            "control.kd_joint" => c.gains.kd_joint = v.array()?,
            "control.kp_lin" => c.gains.cube.kp_lin = v.f64()?,
            "control.kd_lin" => c.gains.cube.kd_lin = v.f64()?,
            "control.kp_ang" => c.gains.cube.kp_ang = v.f64()?,
            "control.kd_ang" => c.gains.cube.kd_ang = v.f64()?,
            "control.decimation" => c.decimation = v.usize()?,
            "control.reach_segment_duration" => c.reach_segment_duration = v.f64()?,
            "control.standoff" => c.standoff = v.f64()?,
            "control.contact_tolerance" => c.contact_tolerance = v.f64()?,
            "control.reach_timeout" => c.reach_timeout = v.f64()?,
            "control.press_depth" => c.press_depth = v.f64()?,
            "control.lift_duration" => c.lift_duration = v.f64()?,
            "control.f_max" => c.f_max = v.f64()?,
            "control.w_reg" => c.w_reg = v.f64()?,
            "control.f_ref" => c.f_ref = v.f64()?,
            "control.wrench_weight" => c.wrench_weight = v.f64()?,
            "control.drop_slack" => c.drop_slack = v.f64()?,
            "control.drop_error" => c.drop_error = v.f64()?,
            "control.drop_grace_ticks" => c.drop_grace_ticks = v.usize()?,
            "control.lift_settle_ticks" => c.lift_settle_ticks = v.usize()?,
            "env.arena_radius" => {
                e.arena_radius = v.f64()?;
                s.arena_radius = e.arena_radius;
            }
            "env.spawn_radius" => e.spawn_radius = v.f64()?,
            "env.num_waypoints" => e.num_waypoints = v.usize()?,
            "env.waypoint_duration" => e.waypoint_duration = v.f64()?,
            "env.goal_radius_fraction" => e.goal_radius_fraction = v.f64()?,
            "env.min_goal_height" => e.min_goal_height = v.f64()?,
            "env.max_goal_height" => e.max_goal_height = v.f64()?,
            "env.max_step" => e.max_step = v.f64()?,
            "env.max_height" => e.max_height = v.f64()?,
            "env.reward_scale" => e.reward_scale = v.f64()?,
            "env.reward_sharpness" => e.reward_sharpness = v.f64()?,
            "env.settle_speed" => e.settle_speed = v.f64()?,
            "randomization.enabled" => z.enabled = v.bool()?,
            "randomization.mass_range" => z.mass_range = v.range()?,
            "randomization.friction_range" => z.friction_range = v.range()?,
            "randomization.tip_stiffness_range" => z.tip_stiffness_range = v.range()?,
            "randomization.obs_noise_std" => z.obs_noise_std = v.f64()?,
            "sac.gamma" => q.gamma = v.f64()?,
            "sac.alpha" => q.alpha = v.f64()?,
            "sac.tau" => q.tau = v.f64()?,
            "sac.lr" => q.lr = v.f64()?,
            "sac.batch_size" => q.batch_size = v.usize()?,
            "sac.buffer_capacity" => q.buffer_capacity = v.usize()?,
            "sac.hidden" => q.hidden = v.sizes()?,
            "sac.activation" => {
                q.activation = Activation::from_label(raw.trim()).ok_or_else(|| v.err("expected tanh or relu"))?
            }
            "sac.output_init_scale" => q.output_init_scale = v.f64()?,
            "sac.seed" => q.seed = v.u64()?,
            "train.episodes" => t.episodes = v.usize()?,
            "train.warmup_episodes" => t.warmup_episodes = v.usize()?,
            "train.updates_per_step" => t.updates_per_step = v.usize()?,
            _ => return Err(ConfigError::UnknownKey(key.to_string())),
        }
        Ok(())
    }

    /// Defaults overridden by `text`; the result is validated.
    pub fn parse(text: &str) -> Result<RunConfig, ConfigError> {
        let mut cfg = RunConfig::default();
        let mut seen = HashSet::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| ConfigError::Syntax {
                line: i + 1,
                reason: "expected 'section.key = value'".into(),
            })?;
            let key = key.trim();
            if !seen.insert(key.to_string()) {
                return Err(ConfigError::DuplicateKey(key.to_string()));
            }
            cfg.set(key, value.trim())?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let inv = ConfigError::Invalid;
        self.robot.validate().map_err(|e| inv(format!("robot: {e}")))?;
        self.sim.validate().map_err(|e| inv(e.to_string()))?;
        self.cube.validate().map_err(|e| inv(e.to_string()))?;
        self.control.validate().map_err(|e| inv(format!("control: {e}")))?;
        self.env.validate().map_err(|e| inv(e.to_string()))?;
        self.randomization.validate().map_err(|e| inv(e.to_string()))?;
        self.sac.validate().map_err(|e| inv(e.to_string()))?;
        if self.sim.arena_radius != self.env.arena_radius {
            return Err(inv("sim and env arena radii differ".into()));
        }
        if self.train.updates_per_step == 0 {
            return Err(inv("train.updates_per_step must be >= 1".into()));
        }
        Ok(())
    }

    /// All keys with their current values, in schema order.
    pub fn entries(&self) -> Vec<(String, String)> {
        KEYS.iter()
            .map(|(k, _)| (k.to_string(), self.get(k).expect("schema keys are known")))
            .collect()
    }

    /// Text that parses back to this configuration.
    pub fn to_text(&self) -> String {
        self.entries().into_iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }

    /// Every key with its default and description.
    pub fn schema() -> String {
        let d = RunConfig::default();
        KEYS.iter()
            .map(|(k, doc)| format!("# {doc}\n{k} = {}\n", d.get(k).expect("schema keys are known")))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn text_round_trip() {
        let mut cfg = RunConfig::default();
        cfg.set("sac.alpha", "0.1").unwrap();
        cfg.set("robot.home", "0.1 0.4 2.0").unwrap();
        assert_eq!(RunConfig::parse(&cfg.to_text()).unwrap(), cfg);
    }

    #[test]
    fn schema_parses_to_defaults() {
        assert_eq!(RunConfig::parse(&RunConfig::schema()).unwrap(), RunConfig::default());
    }

    #[test]
    fn rejects_bad_input() {
        assert!(matches!(RunConfig::parse("sac.bogus = 1"), Err(ConfigError::UnknownKey(_))));
        assert!(matches!(RunConfig::parse("sac.alpha = 1\nsac.alpha = 2"), Err(ConfigError::DuplicateKey(_))));
        assert!(matches!(RunConfig::parse("sac.alpha"), Err(ConfigError::Syntax { line: 1, .. })));
        assert!(matches!(RunConfig::parse("sac.alpha = x"), Err(ConfigError::BadValue { .. })));
        assert!(matches!(RunConfig::parse("sac.gamma = 1.5"), Err(ConfigError::Invalid(_))));
        assert!(matches!(RunConfig::parse("randomization.mass_range = 0.1 1"), Err(ConfigError::Invalid(_))));
    }

    #[test]
    fn every_key_is_settable() {
        let d = RunConfig::default();
        for (k, _) in KEYS {
            let mut c = RunConfig::default();
            c.set(k, &d.get(k).unwrap()).unwrap();
            assert_eq!(c, d, "{k}");
        }
    }
}
