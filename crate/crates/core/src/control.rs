//! Low-level control: joint PD with inverse-dynamics feedforward, and the
//! select-contacts / reach / lift state machine that drives it.

use thiserror::Error;

use crate::geom::{contact_point_local, ContactSpec, CubeGeometry, Mat3, Pose, UnitQuat, Vec3};
use crate::grasp::{
    desired_wrench, grasp_matrix, solve_contact_forces, CubeGains, CubeReference, EqualityMode, FrictionPyramid,
    GraspError, QpSettings,
};
use crate::kinematics::{
    ik_tip, ik_tip_seeded, tip_jacobian, FingerJoints, FingerModel, IkError, IkOptions, JointState, RobotConfig, NUM_FINGERS,
    NUM_JOINTS,
};
use crate::simulator::WorldState;
use crate::trajectory::{point_to_point, TimedPath3};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ControlError {
    #[error("reach failed for finger {finger}: {reason}")]
    ReachFailed { finger: usize, reason: String },
    #[error("contact decision required in SelectContacts")]
    MissingDecision,
    #[error("non-finite controller input")]
    NonFinite,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GainSet {
    /// Per-joint gains, shared by the three fingers.
    pub kp_joint: [f64; 3],
    pub kd_joint: [f64; 3],
    pub cube: CubeGains,
}

impl Default for GainSet {
    fn default() -> Self {
        Self {
            kp_joint: [10.0; 3],
            kd_joint: [0.3; 3],
            cube: CubeGains::default(),
        }
    }
}

impl GainSet {
    pub fn validate(&self) -> Result<(), String> {
        let c = &self.cube;
        let all = self
            .kp_joint
            .iter()
            .chain(&self.kd_joint)
            .chain([&c.kp_lin, &c.kd_lin, &c.kp_ang, &c.kd_ang]);
        for v in all {
            if !(*v >= 0.0) || !v.is_finite() {
                return Err("gains must be finite and >= 0".into());
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ControlConfig {
    pub gains: GainSet,
    /// Control period; the simulator is stepped `decimation` times per tick.
    pub decimation: usize,
    pub reach_segment_duration: f64,
    /// Pre-contact offset along the face normal.
    pub standoff: f64,
    pub contact_tolerance: f64,
    /// Extra time allowed after the reach path ends before the reach is replanned.
    pub reach_timeout: f64,
    /// Tip targets sit this far inside the surface so contact is established.
    pub press_depth: f64,
    pub lift_duration: f64,
    pub f_max: f64,
    pub w_reg: f64,
    pub f_ref: f64,
    pub wrench_weight: f64,
    /// A tip further than this from the cube surface counts as detached.
    pub drop_slack: f64,
    /// Cube position error that counts as a drop.
    pub drop_error: f64,
    /// Consecutive lost ticks before a drop is declared.
    pub drop_grace_ticks: usize,
    /// Lift ticks before drop detection starts.
    pub lift_settle_ticks: usize,
}

impl Default for ControlConfig {
    fn default() -> Self {
        Self {
            gains: GainSet::default(),
            decimation: 10,
            reach_segment_duration: 1.5,
            standoff: 0.02,
            contact_tolerance: 0.005,
            reach_timeout: 1.0,
            press_depth: 0.001,
            lift_duration: 2.0,
            f_max: 4.0,
            w_reg: 1e-2,
            f_ref: 0.3,
            wrench_weight: 1e4,
            drop_slack: 0.01,
            drop_error: 0.04,
            drop_grace_ticks: 5,
            lift_settle_ticks: 20,
        }
    }
}

impl ControlConfig {
    pub fn validate(&self) -> Result<(), String> {
        self.gains.validate()?;
        if self.decimation == 0 {
            return Err("decimation must be >= 1".into());
        }
        let positive = [
            ("reach_segment_duration", self.reach_segment_duration),
            ("lift_duration", self.lift_duration),
            ("f_max", self.f_max),
            ("contact_tolerance", self.contact_tolerance),
            ("wrench_weight", self.wrench_weight),
            ("drop_error", self.drop_error),
        ];
        for (name, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return Err(format!("{name} must be > 0"));
            }
        }
        let non_negative = [
            ("standoff", self.standoff),
            ("reach_timeout", self.reach_timeout),
            ("press_depth", self.press_depth),
            ("w_reg", self.w_reg),
            ("f_ref", self.f_ref),
            ("drop_slack", self.drop_slack),
        ];
        for (name, v) in non_negative {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(format!("{name} must be >= 0"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Primitive {
    SelectContacts,
    Reach,
    Lift,
}

impl Primitive {
    pub fn label(self) -> &'static str {
        match self {
            Primitive::SelectContacts => "select",
            Primitive::Reach => "reach",
            Primitive::Lift => "lift",
        }
    }

    pub fn from_label(s: &str) -> Option<Primitive> {
        [Primitive::SelectContacts, Primitive::Reach, Primitive::Lift]
            .into_iter()
            .find(|p| p.label() == s)
    }

    /// Legal moves of the state machine, self-loops included.
    pub fn can_follow(self, prev: Primitive) -> bool {
        use Primitive::*;
        matches!(
            (prev, self),
            (SelectContacts, SelectContacts)
                | (SelectContacts, Reach)
                | (Reach, Reach)
                | (Reach, Lift)
                | (Lift, Lift)
                | (Lift, SelectContacts)
        )
    }
}

/// Checks a primitive sequence against `(SelectContacts+ Reach+ Lift+)*` with an
/// optional unfinished last cycle.
pub fn is_legal_sequence(seq: &[Primitive]) -> bool {
    match seq.first() {
        None => true,
        Some(&p) if p != Primitive::SelectContacts => false,
        Some(_) => seq.windows(2).all(|w| w[1].can_follow(w[0])),
    }
}

/// Two-segment approach of one finger: to the standoff point, then onto the face.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReachPlan {
    pub approach: TimedPath3,
    pub close: TimedPath3,
}

impl ReachPlan {
    pub fn duration(&self) -> f64 {
        self.approach.duration + self.close.duration
    }

    pub fn sample(&self, t: f64) -> crate::trajectory::PathSample {
        if t < self.approach.duration {
            self.approach.sample(t)
        } else {
            self.close.sample(t - self.approach.duration)
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ControllerState {
    pub primitive: Primitive,
    pub contacts: Option<[ContactSpec; NUM_FINGERS]>,
    pub reach: Option<[ReachPlan; NUM_FINGERS]>,
    pub cube_path: Option<TimedPath3>,
    /// Orientation held by the cube reference during a lift.
    pub hold_orientation: UnitQuat,
    pub lift_target: Option<Vec3>,
    /// Seconds since the current primitive (or lift segment) began.
    pub phase_clock: f64,
    pub replans: usize,
    pub lost_ticks: usize,
    pub lift_ticks: usize,
}

impl Default for ControllerState {
    fn default() -> Self {
        Self {
            primitive: Primitive::SelectContacts,
            contacts: None,
            reach: None,
            cube_path: None,
            hold_orientation: UnitQuat::IDENTITY,
            lift_target: None,
            phase_clock: 0.0,
            replans: 0,
            lost_ticks: 0,
            lift_ticks: 0,
        }
    }
}

/// Per-tick diagnostics for traces.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct TickInfo {
    /// Largest tip-to-target distance (reach) or wrench residual (lift).
    pub tip_error: f64,
    pub wrench_residual: f64,
    pub qp_ok: bool,
    pub dropped: bool,
}

/// Joint-space PD plus inverse-dynamics feedforward:
/// `tau = Kp (q_des - q) + Kd (qdot_des - qdot) + M qddot_des + J^T f + g(q)`,
/// clamped to `torque_limit`. Gravity compensation is skipped when `gravity` is
/// `None`.
#[allow(clippy::too_many_arguments)]
pub fn joint_pd_id(
    joints: &JointState,
    q_des: &[f64; NUM_JOINTS],
    qdot_des: &[f64; NUM_JOINTS],
    qddot_des: Option<&[f64; NUM_JOINTS]>,
    tip_forces: &[Vec3; NUM_FINGERS],
    models: &[FingerModel; NUM_FINGERS],
    gains: &GainSet,
    gravity: Option<Vec3>,
    torque_limit: f64,
) -> [f64; NUM_JOINTS] {
    let mut tau = [0.0; NUM_JOINTS];
    for f in 0..NUM_FINGERS {
        let q = joints.finger_q(f);
        let jt = tip_jacobian(&models[f], &q).transpose().mul_vec(tip_forces[f]);
        let g = gravity.map_or(Vec3::ZERO, |g| models[f].gravity_compensation(&q, g));
        let ff = match qddot_des {
            Some(a) => models[f].mass_matrix(&q).mul_vec(Vec3::new(a[3 * f], a[3 * f + 1], a[3 * f + 2])),
            None => Vec3::ZERO,
        };
        for j in 0..3 {
            let i = 3 * f + j;
            tau[i] = gains.kp_joint[j] * (q_des[i] - joints.q[i])
                + gains.kd_joint[j] * (qdot_des[i] - joints.qdot[i])
                + ff[j]
                + jt[j]
                + g[j];
            tau[i] = tau[i].clamp(-torque_limit, torque_limit);
        }
    }
    tau
}

/// The model-based controller: nominal cube and robot models plus settings.
#[derive(Debug, Clone)]
pub struct Controller {
    pub cfg: ControlConfig,
    pub cube: CubeGeometry,
    pub robot: RobotConfig,
    pub gravity: Vec3,
    pub tip_radius: f64,
    fingers: [FingerModel; NUM_FINGERS],
    ik: IkOptions,
}

struct JointTargets {
    q: [f64; NUM_JOINTS],
    qdot: [f64; NUM_JOINTS],
    qddot: [f64; NUM_JOINTS],
}

impl Controller {
    pub fn new(cfg: ControlConfig, cube: CubeGeometry, robot: RobotConfig, gravity: Vec3, tip_radius: f64) -> Self {
        let fingers = robot.fingers();
        Self {
            cfg,
            cube,
            robot,
            gravity,
            tip_radius,
            fingers,
            ik: IkOptions::default(),
        }
    }

    pub fn fingers(&self) -> &[FingerModel; NUM_FINGERS] {
        &self.fingers
    }

    pub fn control_dt(&self, sim_dt: f64) -> f64 {
        sim_dt * self.cfg.decimation as f64
    }

    /// World target for the tip center touching `spec` on a cube at `pose`,
    /// `offset` meters out along the face normal.
    pub fn contact_target(&self, pose: &Pose, spec: &ContactSpec, offset: f64) -> Vec3 {
        let p = pose.transform_point(contact_point_local(&self.cube, spec));
        let n = pose.transform_vector(spec.face.local_normal());
        p + n * (self.tip_radius - self.cfg.press_depth + offset)
    }

    /// One control tick. Returns the torques to hold for the next
    /// `decimation` simulator steps and the successor state.
    pub fn tick(
        &self,
        cs: &ControllerState,
        world: &WorldState,
        goal: Vec3,
        decision: Option<[ContactSpec; NUM_FINGERS]>,
        dt: f64,
    ) -> Result<([f64; NUM_JOINTS], ControllerState, TickInfo), ControlError> {
        if !world.is_finite() || !goal.is_finite() {
            return Err(ControlError::NonFinite);
        }
        let mut next = cs.clone();
        match cs.primitive {
            Primitive::SelectContacts => match decision {
                Some(contacts) => {
                    let plans = self.plan_reach(world, &contacts)?;
                    next.primitive = Primitive::Reach;
                    next.contacts = Some(contacts);
                    next.reach = Some(plans);
                    next.cube_path = None;
                    next.lift_target = None;
                    next.phase_clock = 0.0;
                    next.replans = 0;
                    next.lost_ticks = 0;
                    next.lift_ticks = 0;
                    let (tau, info) = self.track_reach(&next, world)?;
                    next.phase_clock += dt;
                    Ok((tau, next, info))
                }
                None => {
                    let tau = self.hold_home(world);
                    next.phase_clock += dt;
                    Ok((tau, next, TickInfo::default()))
                }
            },
            Primitive::Reach => {
                let contacts = cs.contacts.expect("contacts set in reach");
                let plans = cs.reach.expect("plans set in reach");
                let duration = plans[0].duration();
                if cs.phase_clock >= duration {
                    let err = self.max_contact_error(world, &contacts);
                    if err < self.cfg.contact_tolerance {
                        next.primitive = Primitive::Lift;
                        next.hold_orientation = world.cube_pose.orientation;
                        next.cube_path = None;
                        next.lift_target = None;
                        next.phase_clock = 0.0;
                        next.lift_ticks = 0;
                        next.lost_ticks = 0;
                        return self.lift_tick(next, world, goal, dt);
                    }
                    if cs.phase_clock >= duration + self.cfg.reach_timeout {
                        if cs.replans >= 1 {
                            return Err(ControlError::ReachFailed {
                                finger: self.worst_finger(world, &contacts),
                                reason: format!("tip error {err:.4} m after replanning"),
                            });
                        }
                        next.reach = Some(self.plan_reach(world, &contacts)?);
                        next.replans += 1;
                        next.phase_clock = 0.0;
                    }
                }
                let (tau, info) = self.track_reach(&next, world)?;
                next.phase_clock += dt;
                Ok((tau, next, info))
            }
            Primitive::Lift => self.lift_tick(next, world, goal, dt),
        }
    }

    fn hold_home(&self, world: &WorldState) -> [f64; NUM_JOINTS] {
        let home = self.robot.home_joints();
        joint_pd_id(
            &world.joints,
            &home,
            &[0.0; NUM_JOINTS],
            None,
            &[Vec3::ZERO; NUM_FINGERS],
            &self.fingers,
            &self.cfg.gains,
            Some(self.gravity),
            self.robot.torque_limit,
        )
    }

    fn plan_reach(
        &self,
        world: &WorldState,
        contacts: &[ContactSpec; NUM_FINGERS],
    ) -> Result<[ReachPlan; NUM_FINGERS], ControlError> {
        let pose = world.cube_pose;
        let mut plans = Vec::with_capacity(NUM_FINGERS);
        for (f, spec) in contacts.iter().enumerate() {
            let model = &self.fingers[f];
            let start = model.frames(&world.joints.finger_q(f)).tip;
            let standoff = self.contact_target(&pose, spec, self.cfg.standoff);
            let touch = self.contact_target(&pose, spec, 0.0);
            for target in [standoff, touch] {
                self.solve_ik(f, target, &world.joints.finger_q(f))
                    .map_err(|e| ControlError::ReachFailed {
                        finger: f,
                        reason: e.to_string(),
                    })?;
            }
            let d = self.cfg.reach_segment_duration;
            let bad = |e: crate::trajectory::TrajectoryError| ControlError::ReachFailed {
                finger: f,
                reason: e.to_string(),
            };
            plans.push(ReachPlan {
                approach: point_to_point(start, standoff, d).map_err(bad)?,
                close: point_to_point(standoff, touch, d).map_err(bad)?,
            });
        }
        Ok([plans[0], plans[1], plans[2]])
    }

    fn solve_ik(&self, f: usize, target: Vec3, seed: &FingerJoints) -> Result<FingerJoints, IkError> {
        ik_tip(&self.fingers[f], target, seed, &self.ik)
    }

    /// Joint targets for Cartesian tip samples. IK failures fall back to the
    /// best iterate, which keeps the PD pulling toward the target.
    fn joint_targets(&self, world: &WorldState, samples: &[(Vec3, Vec3, Vec3); NUM_FINGERS]) -> JointTargets {
        let mut out = JointTargets {
            q: [0.0; NUM_JOINTS],
            qdot: [0.0; NUM_JOINTS],
            qddot: [0.0; NUM_JOINTS],
        };
        for (f, (pos, vel, acc)) in samples.iter().enumerate() {
            let seed = world.joints.finger_q(f);
            let q = match ik_tip_seeded(&self.fingers[f], *pos, &seed, &self.ik) {
                Ok(q) => q,
                Err(IkError::NotConverged { best, .. }) => best,
                Err(_) => seed,
            };
            let j = tip_jacobian(&self.fingers[f], &q);
            let qd = dls_solve(&j, *vel);
            let qdd = dls_solve(&j, *acc);
            for k in 0..3 {
                out.q[3 * f + k] = q[k];
                out.qdot[3 * f + k] = qd[k];
                out.qddot[3 * f + k] = qdd[k];
            }
        }
        out
    }

    fn track_reach(&self, cs: &ControllerState, world: &WorldState) -> Result<([f64; NUM_JOINTS], TickInfo), ControlError> {
        let plans = cs.reach.as_ref().expect("plans set in reach");
        let samples: [(Vec3, Vec3, Vec3); NUM_FINGERS] = std::array::from_fn(|f| {
            let s = plans[f].sample(cs.phase_clock);
            (s.position, s.velocity, s.acceleration)
        });
        let t = self.joint_targets(world, &samples);
        let tau = joint_pd_id(
            &world.joints,
            &t.q,
            &t.qdot,
            Some(&t.qddot),
            &[Vec3::ZERO; NUM_FINGERS],
            &self.fingers,
            &self.cfg.gains,
            Some(self.gravity),
            self.robot.torque_limit,
        );
        let contacts = cs.contacts.as_ref().expect("contacts set in reach");
        Ok((
            tau,
            TickInfo {
                tip_error: self.max_contact_error(world, contacts),
                qp_ok: true,
                ..TickInfo::default()
            },
        ))
    }

    fn tip_errors(&self, world: &WorldState, contacts: &[ContactSpec; NUM_FINGERS]) -> [f64; NUM_FINGERS] {
        std::array::from_fn(|f| {
            let tip = self.fingers[f].frames(&world.joints.finger_q(f)).tip;
            (tip - self.contact_target(&world.cube_pose, &contacts[f], 0.0)).norm()
        })
    }

    pub fn max_contact_error(&self, world: &WorldState, contacts: &[ContactSpec; NUM_FINGERS]) -> f64 {
        self.tip_errors(world, contacts).into_iter().fold(0.0, f64::max)
    }

    fn worst_finger(&self, world: &WorldState, contacts: &[ContactSpec; NUM_FINGERS]) -> usize {
        let e = self.tip_errors(world, contacts);
        (0..NUM_FINGERS).max_by(|&a, &b| e[a].total_cmp(&e[b])).unwrap_or(0)
    }

    fn lift_tick(
        &self,
        mut next: ControllerState,
        world: &WorldState,
        goal: Vec3,
        dt: f64,
    ) -> Result<([f64; NUM_JOINTS], ControllerState, TickInfo), ControlError> {
        let contacts = next.contacts.expect("contacts set in lift");
        // (re)plan the cube path when the waypoint changes
        if next.lift_target != Some(goal) || next.cube_path.is_none() {
            let start = match &next.cube_path {
                Some(p) => p.sample(next.phase_clock).position,
                None => world.cube_pose.position,
            };
            next.cube_path = Some(point_to_point(start, goal, self.cfg.lift_duration).map_err(|e| {
                ControlError::ReachFailed {
                    finger: 0,
                    reason: e.to_string(),
                }
            })?);
            next.lift_target = Some(goal);
            next.phase_clock = 0.0;
        }
        let path = next.cube_path.expect("cube path planned");
        let sample = path.sample(next.phase_clock);
        let reference = CubeReference {
            pose: Pose::new(sample.position, next.hold_orientation),
            linvel: sample.velocity,
            linacc: sample.acceleration,
        };

        // forces from the measured cube state
        let pose = world.cube_pose;
        let wrench = desired_wrench(
            &pose,
            world.cube_linvel,
            world.cube_angvel,
            &reference,
            &self.cube,
            self.gravity,
            &self.cfg.gains.cube,
        );
        let points: Vec<Vec3> = contacts
            .iter()
            .map(|c| pose.transform_point(contact_point_local(&self.cube, c)))
            .collect();
        let normals: Vec<Vec3> = contacts
            .iter()
            .map(|c| -pose.transform_vector(c.face.local_normal()))
            .collect();
        let g = grasp_matrix(&points, pose.position);
        let settings = QpSettings {
            w_reg: self.cfg.w_reg,
            f_ref: self.cfg.f_ref,
            equality: EqualityMode::Penalty(self.cfg.wrench_weight),
            ..QpSettings::default()
        };
        let pyr = FrictionPyramid::new(self.cube.friction_coeff);
        let (forces, residual, qp_ok) =
            match solve_contact_forces(&g, &normals, &wrench, &pyr, self.cfg.f_max, &settings) {
                Ok(sol) => (sol.forces.forces, sol.residual, true),
                Err(GraspError::NotConverged { best, residual, .. } | GraspError::Infeasible { best, residual }) => {
                    (best.forces, residual, false)
                }
                Err(GraspError::BadInput(_)) => (vec![Vec3::ZERO; NUM_FINGERS], wrench.norm(), false),
            };
        let tip_forces: [Vec3; NUM_FINGERS] = std::array::from_fn(|f| forces[f]);

        // tips ride on the reference pose; the reference velocity of a point
        // attached to a translating body equals the body velocity
        let samples: [(Vec3, Vec3, Vec3); NUM_FINGERS] = std::array::from_fn(|f| {
            (
                self.contact_target(&reference.pose, &contacts[f], 0.0),
                reference.linvel,
                reference.linacc,
            )
        });
        let t = self.joint_targets(world, &samples);
        let tau = joint_pd_id(
            &world.joints,
            &t.q,
            &t.qdot,
            Some(&t.qddot),
            &tip_forces,
            &self.fingers,
            &self.cfg.gains,
            Some(self.gravity),
            self.robot.torque_limit,
        );

        // drop detection
        next.lift_ticks += 1;
        let detached = self
            .tip_gaps(world, &contacts)
            .iter()
            .filter(|&&gap| gap <= self.cfg.drop_slack)
            .count()
            < 2;
        let far = (pose.position - reference.pose.position).norm() > self.cfg.drop_error;
        if next.lift_ticks > self.cfg.lift_settle_ticks && (detached || far) {
            next.lost_ticks += 1;
        } else {
            next.lost_ticks = 0;
        }
        let dropped = next.lost_ticks >= self.cfg.drop_grace_ticks;
        let info = TickInfo {
            tip_error: (pose.position - reference.pose.position).norm(),
            wrench_residual: residual,
            qp_ok,
            dropped,
        };
        if dropped {
            next = ControllerState {
                primitive: Primitive::SelectContacts,
                ..ControllerState::default()
            };
            return Ok((self.hold_home(world), next, info));
        }
        next.phase_clock += dt;
        Ok((tau, next, info))
    }

    /// Distance from each tip sphere to the cube surface (negative when pressing).
    fn tip_gaps(&self, world: &WorldState, _contacts: &[ContactSpec; NUM_FINGERS]) -> [f64; NUM_FINGERS] {
        let h = self.cube.half_edge();
        std::array::from_fn(|f| {
            let tip = self.fingers[f].frames(&world.joints.finger_q(f)).tip;
            let local = world.cube_pose.inverse_transform_point(tip);
            let outside = Vec3::new(
                (local.x.abs() - h).max(0.0),
                (local.y.abs() - h).max(0.0),
                (local.z.abs() - h).max(0.0),
            );
            let d = if outside.max_abs() > 0.0 {
                outside.norm()
            } else {
                -(h - local.x.abs()).min(h - local.y.abs()).min(h - local.z.abs())
            };
            d - self.tip_radius
        })
    }
}

/// `J^T (J J^T + lambda^2 I)^-1 b`.
fn dls_solve(j: &Mat3, b: Vec3) -> Vec3 {
    let l2 = 1e-6;
    let jjt = j.mul_mat(&j.transpose()).add(&Mat3::diag(Vec3::new(l2, l2, l2)));
    match jjt.solve_spd(b) {
        Some(y) => j.transpose().mul_vec(y),
        None => Vec3::ZERO,
    }
}
