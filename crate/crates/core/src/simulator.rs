//! Penalty-contact rigid-body simulation of the cube, the floor and three fingertips.
//!
//! Normal contact forces are spring-dampers on penetration depth. Tangential
//! forces come from a spring stretched between the current contact point and a
//! stick anchor, clamped to the Coulomb limit; when the clamp is active the anchor
//! slides so the spring stays on the friction boundary. The cube and the finger
//! joints advance together with a kick-drift-kick (velocity Verlet) step, which is
//! exact for constant accelerations and symplectic for the conservative part.

use thiserror::Error;

use crate::geom::{CubeGeometry, Mat3, Pose, UnitQuat, Vec3};
use crate::kinematics::{
    point_jacobian, FingerModel, JointState, RobotConfig, NUM_FINGERS, NUM_JOINTS,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("non-finite simulation input: {0}")]
    NonFinite(&'static str),
    #[error("simulation diverged at t={time:.4}s: {what}")]
    Diverged { time: f64, what: String },
    #[error("invalid simulation config: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub dt: f64,
    pub gravity: Vec3,
    /// Per-corner floor spring (N/m) and damper (N s/m).
    pub floor_stiffness: f64,
    pub floor_damping: f64,
    pub tip_stiffness: f64,
    pub tip_damping: f64,
    pub tip_radius: f64,
    pub arena_radius: f64,
    /// Disables the floor plane entirely.
    pub floor_enabled: bool,
    /// Divergence caps.
    pub max_linear_speed: f64,
    pub max_angular_speed: f64,
    pub max_joint_speed: f64,
    /// Spring rate of the soft joint-limit stops (N m/rad).
    pub joint_limit_stiffness: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            dt: 1e-3,
            gravity: Vec3::new(0.0, 0.0, -9.81),
            floor_stiffness: 2.0e4,
            floor_damping: 10.0,
            tip_stiffness: 3.0e3,
            tip_damping: 5.0,
            tip_radius: 0.0175,
            arena_radius: 0.19,
            floor_enabled: true,
            max_linear_speed: 10.0,
            max_angular_speed: 300.0,
            max_joint_speed: 200.0,
            joint_limit_stiffness: 50.0,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |m: &str| Err(SimError::InvalidConfig(m.to_string()));
        if !(self.dt > 0.0 && self.dt <= 0.01) {
            return bad("dt must lie in (0, 0.01]");
        }
        if !(self.floor_stiffness > 0.0 && self.tip_stiffness > 0.0) {
            return bad("stiffnesses must be > 0");
        }
        if !(self.floor_damping >= 0.0 && self.tip_damping >= 0.0) {
            return bad("damping must be >= 0");
        }
        if !(self.tip_radius > 0.0 && self.arena_radius > 0.0) {
            return bad("tip and arena radii must be > 0");
        }
        if !self.gravity.is_finite() {
            return bad("gravity must be finite");
        }
        if !(self.max_linear_speed > 0.0 && self.max_angular_speed > 0.0 && self.max_joint_speed > 0.0) {
            return bad("speed caps must be > 0");
        }
        Ok(())
    }
}

pub const CUBE_CORNERS: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WorldState {
    pub cube_pose: Pose,
    pub cube_linvel: Vec3,
    /// World-frame angular velocity.
    pub cube_angvel: Vec3,
    pub joints: JointState,
    pub time: f64,
    /// Stick anchors of tip contacts, in cube coordinates.
    pub tip_anchors: [Option<Vec3>; NUM_FINGERS],
    /// Stick anchors of cube corners on the floor, in world coordinates.
    pub floor_anchors: [Option<Vec3>; CUBE_CORNERS],
}

impl WorldState {
    pub fn new(cube_pose: Pose, joints: JointState) -> Self {
        Self {
            cube_pose,
            cube_linvel: Vec3::ZERO,
            cube_angvel: Vec3::ZERO,
            joints,
            time: 0.0,
            tip_anchors: [None; NUM_FINGERS],
            floor_anchors: [None; CUBE_CORNERS],
        }
    }

    pub fn is_finite(&self) -> bool {
        self.cube_pose.position.is_finite()
            && self.cube_pose.orientation.to_array().iter().all(|x| x.is_finite())
            && self.cube_linvel.is_finite()
            && self.cube_angvel.is_finite()
            && self.joints.is_finite()
            && self.time.is_finite()
    }
}

/// Contact status of one fingertip.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContactState {
    pub in_contact: bool,
    /// Closest point on the cube surface (world).
    pub point: Vec3,
    /// Outward cube normal at `point` (world).
    pub normal: Vec3,
    /// Penetration depth; negative values are the clearance gap.
    pub penetration: f64,
    /// Force the tip currently applies to the cube (world).
    pub force: Vec3,
}

#[derive(Debug, Clone, Copy)]
struct Accel {
    cube_lin: Vec3,
    cube_ang: Vec3,
    joints: [f64; NUM_JOINTS],
}

struct Geometry {
    point: Vec3,
    normal: Vec3,
    penetration: f64,
    local_point: Vec3,
}

/// The simulated world: configuration plus the fixed robot and cube models.
#[derive(Debug, Clone)]
pub struct Simulator {
    pub cfg: SimConfig,
    pub cube: CubeGeometry,
    pub robot: RobotConfig,
    fingers: [FingerModel; NUM_FINGERS],
}

impl Simulator {
    pub fn new(cfg: SimConfig, cube: CubeGeometry, robot: RobotConfig) -> Result<Self, SimError> {
        cfg.validate()?;
        cube.validate()
            .map_err(|e| SimError::InvalidConfig(e.to_string()))?;
        robot.validate().map_err(SimError::InvalidConfig)?;
        let fingers = robot.fingers();
        Ok(Self {
            cfg,
            cube,
            robot,
            fingers,
        })
    }

    pub fn fingers(&self) -> &[FingerModel; NUM_FINGERS] {
        &self.fingers
    }

    /// Cube resting flat on the floor at `(x, y)` with the given yaw, robot at home.
    pub fn resting_state(&self, x: f64, y: f64, yaw: f64) -> WorldState {
        let pose = Pose::new(
            Vec3::new(x, y, self.cube.half_edge()),
            UnitQuat::from_yaw(yaw),
        );
        WorldState::new(pose, JointState::at_rest(self.robot.home_joints()))
    }

    pub fn tip_positions(&self, joints: &JointState) -> [Vec3; NUM_FINGERS] {
        std::array::from_fn(|f| self.fingers[f].frames(&joints.finger_q(f)).tip)
    }

    pub fn clamp_torques(&self, torques: &[f64; NUM_JOINTS]) -> [f64; NUM_JOINTS] {
        let lim = self.robot.torque_limit;
        std::array::from_fn(|i| torques[i].clamp(-lim, lim))
    }

    fn tip_geometry(&self, pose: &Pose, tip: Vec3) -> Geometry {
        let h = self.cube.half_edge();
        let r = self.cfg.tip_radius;
        let local = pose.inverse_transform_point(tip);
        let clamped = Vec3::new(local.x.clamp(-h, h), local.y.clamp(-h, h), local.z.clamp(-h, h));
        let diff = local - clamped;
        let d = diff.norm();
        let (local_point, local_normal, penetration) = if d > 1e-12 {
            (clamped, diff / d, r - d)
        } else {
            // tip center inside the box: push out through the nearest face
            let depths = [h - local.x.abs(), h - local.y.abs(), h - local.z.abs()];
            let axis = (0..3)
                .min_by(|&a, &b| depths[a].total_cmp(&depths[b]))
                .unwrap_or(0);
            let unit = [Vec3::X, Vec3::Y, Vec3::Z][axis];
            let sign = if local[axis] >= 0.0 { 1.0 } else { -1.0 };
            let n = unit * sign;
            let p = local + n * depths[axis];
            (p, n, r + depths[axis])
        };
        Geometry {
            point: pose.transform_point(local_point),
            normal: pose.transform_vector(local_normal),
            penetration,
            local_point,
        }
    }

    /// Force on the tip from the cube contact and the updated anchor.
    #[allow(clippy::too_many_arguments)]
    fn tip_contact_force(
        &self,
        pose: &Pose,
        linvel: Vec3,
        angvel: Vec3,
        tip: Vec3,
        tip_vel: Vec3,
        anchor: Option<Vec3>,
    ) -> (Vec3, Option<Vec3>, Geometry) {
        let g = self.tip_geometry(pose, tip);
        if g.penetration <= 0.0 {
            return (Vec3::ZERO, None, g);
        }
        let k = self.cfg.tip_stiffness;
        let c = self.cfg.tip_damping;
        let mu = self.cube.friction_coeff;
        let n = g.normal;
        let material_vel = linvel + angvel.cross(g.point - pose.position);
        let v_rel = tip_vel - material_vel;
        let vn = v_rel.dot(n);
        let fn_mag = (k * g.penetration - c * vn).max(0.0);
        let anchor_local = anchor.unwrap_or(g.local_point);
        let anchor_world = pose.transform_point(anchor_local);
        let disp = g.point - anchor_world;
        let disp_t = disp - n * disp.dot(n);
        let v_t = v_rel - n * vn;
        let mut f_t = -(disp_t * k) - v_t * c;
        let limit = mu * fn_mag;
        let ft_norm = f_t.norm();
        let new_anchor = if ft_norm > limit {
            f_t = if ft_norm > 0.0 { f_t * (limit / ft_norm) } else { Vec3::ZERO };
            pose.inverse_transform_point(g.point + f_t / k)
        } else {
            anchor_local
        };
        (n * fn_mag + f_t, Some(new_anchor), g)
    }

    fn accelerations(
        &self,
        pose: &Pose,
        linvel: Vec3,
        angvel: Vec3,
        joints: &JointState,
        torques: &[f64; NUM_JOINTS],
        tip_anchors: &mut [Option<Vec3>; NUM_FINGERS],
        floor_anchors: &mut [Option<Vec3>; CUBE_CORNERS],
    ) -> Accel {
        let cfg = &self.cfg;
        let cube = &self.cube;
        let mut force = Vec3::ZERO;
        let mut torque = Vec3::ZERO;
        let mut joint_acc = [0.0; NUM_JOINTS];

        for f in 0..NUM_FINGERS {
            let model = &self.fingers[f];
            let q = joints.finger_q(f);
            let qd = Vec3::from_slice(&joints.finger_qdot(f));
            let fr = model.frames(&q);
            let jac = point_jacobian(&fr, 2, fr.tip);
            let tip_vel = jac.mul_vec(qd);
            let (mut f_tip, anchor, g) =
                self.tip_contact_force(pose, linvel, angvel, fr.tip, tip_vel, tip_anchors[f]);
            tip_anchors[f] = anchor;
            if g.penetration > 0.0 {
                force -= f_tip;
                torque -= (g.point - pose.position).cross(f_tip);
            }
            if cfg.floor_enabled {
                let depth = cfg.tip_radius - fr.tip.z;
                if depth > 0.0 {
                    f_tip.z += (cfg.tip_stiffness * depth - cfg.tip_damping * tip_vel.z).max(0.0);
                }
            }
            let mut tau = Vec3::from_slice(&torques[3 * f..3 * f + 3]);
            tau -= qd * self.robot.joint_damping;
            tau -= model.gravity_compensation(&q, cfg.gravity);
            tau += jac.transpose().mul_vec(f_tip);
            for i in 0..3 {
                let over = q[i] - model.joint_upper[i];
                let under = q[i] - model.joint_lower[i];
                if over > 0.0 {
                    tau_add(&mut tau, i, -cfg.joint_limit_stiffness * over);
                } else if under < 0.0 {
                    tau_add(&mut tau, i, -cfg.joint_limit_stiffness * under);
                }
            }
            let m = model.mass_matrix(&q);
            let acc = m.solve_spd(tau).unwrap_or(Vec3::ZERO);
            joint_acc[3 * f..3 * f + 3].copy_from_slice(&acc.to_array());
        }

        if cfg.floor_enabled {
            let h = cube.half_edge();
            for (i, anchor) in floor_anchors.iter_mut().enumerate() {
                let corner_local = corner(i, h);
                let p = pose.transform_point(corner_local);
                if p.z >= 0.0 {
                    *anchor = None;
                    continue;
                }
                let vc = linvel + angvel.cross(p - pose.position);
                let fn_mag = (cfg.floor_stiffness * -p.z - cfg.floor_damping * vc.z).max(0.0);
                let a = anchor.unwrap_or(Vec3::new(p.x, p.y, 0.0));
                let disp = Vec3::new(p.x - a.x, p.y - a.y, 0.0);
                let v_t = Vec3::new(vc.x, vc.y, 0.0);
                let mut f_t = -(disp * cfg.floor_stiffness) - v_t * cfg.floor_damping;
                let limit = cube.friction_coeff * fn_mag;
                let n = f_t.norm();
                if n > limit {
                    f_t = if n > 0.0 { f_t * (limit / n) } else { Vec3::ZERO };
                    let moved = Vec3::new(p.x, p.y, 0.0) + f_t / cfg.floor_stiffness;
                    *anchor = Some(moved);
                } else {
                    *anchor = Some(a);
                }
                let fc = Vec3::new(f_t.x, f_t.y, fn_mag);
                force += fc;
                torque += (p - pose.position).cross(fc);
            }
        }

        let cube_lin = force / cube.mass + cfg.gravity;
        let rot = pose.orientation.to_matrix();
        let inertia_world = rot.mul_mat(&Mat3::diag(cube.inertia_diag)).mul_mat(&rot.transpose());
        let gyro = angvel.cross(inertia_world.mul_vec(angvel));
        let cube_ang = inertia_world
            .solve_spd(torque - gyro)
            .unwrap_or(Vec3::ZERO);
        Accel {
            cube_lin,
            cube_ang,
            joints: joint_acc,
        }
    }

    /// Advances the world by one `dt`. Torques are clamped to the robot torque limit.
    pub fn step(&self, state: &WorldState, torques: &[f64; NUM_JOINTS]) -> Result<WorldState, SimError> {
        if torques.iter().any(|t| !t.is_finite()) {
            return Err(SimError::NonFinite("torques"));
        }
        if !state.is_finite() {
            return Err(SimError::NonFinite("state"));
        }
        let tau = self.clamp_torques(torques);
        let dt = self.cfg.dt;
        let mut tip_anchors = state.tip_anchors;
        let mut floor_anchors = state.floor_anchors;

        let a0 = self.accelerations(
            &state.cube_pose,
            state.cube_linvel,
            state.cube_angvel,
            &state.joints,
            &tau,
            &mut tip_anchors,
            &mut floor_anchors,
        );
        let half = 0.5 * dt;
        let v_half = state.cube_linvel + a0.cube_lin * half;
        let w_half = state.cube_angvel + a0.cube_ang * half;
        let mut joints_half = state.joints;
        for i in 0..NUM_JOINTS {
            joints_half.qdot[i] += a0.joints[i] * half;
            joints_half.q[i] += joints_half.qdot[i] * dt;
        }
        let pose = Pose::new(
            state.cube_pose.position + v_half * dt,
            UnitQuat::from_rotation_vector(w_half * dt).compose(&state.cube_pose.orientation),
        );
        let a1 = self.accelerations(
            &pose,
            v_half,
            w_half,
            &joints_half,
            &tau,
            &mut tip_anchors,
            &mut floor_anchors,
        );
        let mut joints = joints_half;
        for i in 0..NUM_JOINTS {
            joints.qdot[i] += a1.joints[i] * half;
        }
        let next = WorldState {
            cube_pose: pose,
            cube_linvel: v_half + a1.cube_lin * half,
            cube_angvel: w_half + a1.cube_ang * half,
            joints,
            time: state.time + dt,
            tip_anchors,
            floor_anchors,
        };
        self.check_divergence(&next)?;
        Ok(next)
    }

    fn check_divergence(&self, s: &WorldState) -> Result<(), SimError> {
        let fail = |what: String| {
            Err(SimError::Diverged {
                time: s.time,
                what,
            })
        };
        if !s.is_finite() {
            return fail("non-finite state".into());
        }
        let v = s.cube_linvel.norm();
        if v > self.cfg.max_linear_speed {
            return fail(format!("cube speed {v:.3} m/s"));
        }
        let w = s.cube_angvel.norm();
        if w > self.cfg.max_angular_speed {
            return fail(format!("cube spin {w:.3} rad/s"));
        }
        if let Some(qd) = s.joints.qdot.iter().find(|x| x.abs() > self.cfg.max_joint_speed) {
            return fail(format!("joint speed {qd:.3} rad/s"));
        }
        Ok(())
    }

    /// Per-tip contact geometry and the penalty force currently applied to the cube.
    pub fn tip_contact_report(&self, state: &WorldState) -> [ContactState; NUM_FINGERS] {
        std::array::from_fn(|f| {
            let model = &self.fingers[f];
            let q = state.joints.finger_q(f);
            let fr = model.frames(&q);
            let jac = point_jacobian(&fr, 2, fr.tip);
            let tip_vel = jac.mul_vec(Vec3::from_slice(&state.joints.finger_qdot(f)));
            let (f_tip, _, g) = self.tip_contact_force(
                &state.cube_pose,
                state.cube_linvel,
                state.cube_angvel,
                fr.tip,
                tip_vel,
                state.tip_anchors[f],
            );
            ContactState {
                in_contact: g.penetration > 0.0,
                point: g.point,
                normal: g.normal,
                penetration: g.penetration,
                force: -f_tip,
            }
        })
    }

    /// True when fewer than two of the expected tips touch the cube (within
    /// `slack` meters of its surface) or, when `min_height` is given, the cube
    /// center fell below it.
    pub fn is_grasp_lost(
        &self,
        state: &WorldState,
        expected_tips: usize,
        slack: f64,
        min_height: Option<f64>,
    ) -> bool {
        let report = self.tip_contact_report(state);
        let touching = report
            .iter()
            .take(expected_tips.min(NUM_FINGERS))
            .filter(|c| c.penetration > -slack)
            .count();
        if touching < 2 {
            return true;
        }
        matches!(min_height, Some(h) if state.cube_pose.position.z < h)
    }

    /// Kinetic + gravitational + contact-spring energy of the whole system.
    pub fn mechanical_energy(&self, s: &WorldState) -> f64 {
        let cfg = &self.cfg;
        let cube = &self.cube;
        let g = -cfg.gravity.z;
        let rot = s.cube_pose.orientation.to_matrix();
        let iw = rot.mul_mat(&Mat3::diag(cube.inertia_diag)).mul_mat(&rot.transpose());
        let mut e = 0.5 * cube.mass * s.cube_linvel.norm_squared()
            + 0.5 * s.cube_angvel.dot(iw.mul_vec(s.cube_angvel))
            + cube.mass * g * s.cube_pose.position.z;
        for f in 0..NUM_FINGERS {
            let model = &self.fingers[f];
            let q = s.joints.finger_q(f);
            let qd = Vec3::from_slice(&s.joints.finger_qdot(f));
            e += 0.5 * qd.dot(model.mass_matrix(&q).mul_vec(qd));
            let fr = model.frames(&q);
            for k in 0..3 {
                e += model.link_masses[k] * g * fr.link_midpoints[k].z;
            }
            for i in 0..3 {
                let over = (q[i] - model.joint_upper[i]).max(0.0) + (model.joint_lower[i] - q[i]).max(0.0);
                e += 0.5 * cfg.joint_limit_stiffness * over * over;
            }
            if cfg.floor_enabled {
                let depth = (cfg.tip_radius - fr.tip.z).max(0.0);
                e += 0.5 * cfg.tip_stiffness * depth * depth;
            }
            let geo = self.tip_geometry(&s.cube_pose, fr.tip);
            if geo.penetration > 0.0 {
                e += 0.5 * cfg.tip_stiffness * geo.penetration * geo.penetration;
                if let Some(a) = s.tip_anchors[f] {
                    let d = geo.point - s.cube_pose.transform_point(a);
                    let dt = d - geo.normal * d.dot(geo.normal);
                    e += 0.5 * cfg.tip_stiffness * dt.norm_squared();
                }
            }
        }
        if cfg.floor_enabled {
            for i in 0..CUBE_CORNERS {
                let p = s.cube_pose.transform_point(corner(i, cube.half_edge()));
                if p.z < 0.0 {
                    e += 0.5 * cfg.floor_stiffness * p.z * p.z;
                    if let Some(a) = s.floor_anchors[i] {
                        let d = Vec3::new(p.x - a.x, p.y - a.y, 0.0);
                        e += 0.5 * cfg.floor_stiffness * d.norm_squared();
                    }
                }
            }
        }
        e
    }
}

fn tau_add(tau: &mut Vec3, i: usize, v: f64) {
    match i {
        0 => tau.x += v,
        1 => tau.y += v,
        _ => tau.z += v,
    }
}

fn corner(i: usize, h: f64) -> Vec3 {
    let s = |bit: usize| if i & bit != 0 { h } else { -h };
    Vec3::new(s(1), s(2), s(4))
}
