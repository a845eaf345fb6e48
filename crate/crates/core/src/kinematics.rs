//! Three identical yaw-pitch-pitch fingers mounted above the arena.
//!
//! Each finger chain is `base -> R(axis0, q0) -> l0 along x -> R(axis1, q1) -> l1 along x
//! -> R(axis2, q2) -> l2 along x -> tip`. With the default axes (z, y, y) and all joints
//! at zero the finger is stretched horizontally along the base frame's x axis, so the
//! zero-configuration tip sits at `base + (l0 + l1 + l2) * x_base`.

use thiserror::Error;

use crate::geom::{Mat3, Pose, UnitQuat, Vec3};

pub const NUM_FINGERS: usize = 3;
pub const JOINTS_PER_FINGER: usize = 3;
pub const NUM_JOINTS: usize = NUM_FINGERS * JOINTS_PER_FINGER;

pub type FingerJoints = [f64; JOINTS_PER_FINGER];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum IkError {
    #[error("target {distance:.4} m from the finger base exceeds reach {reach:.4} m")]
    Unreachable { distance: f64, reach: f64 },
    #[error("inverse kinematics did not converge, best residual {residual:.3e} m")]
    NotConverged { best: FingerJoints, residual: f64 },
    #[error("non-finite inverse kinematics input")]
    NonFinite,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FingerModel {
    pub base_pose: Pose,
    pub link_lengths: [f64; 3],
    pub joint_lower: FingerJoints,
    pub joint_upper: FingerJoints,
    pub axes: [Vec3; 3],
    /// Point mass placed at each link midpoint.
    pub link_masses: [f64; 3],
    /// Rotor inertia added on the mass-matrix diagonal.
    pub armature: f64,
}

/// Intermediate frames of one finger evaluation.
#[derive(Debug, Clone, Copy)]
pub struct FingerFrames {
    /// World position of each joint origin.
    pub joint_origins: [Vec3; 3],
    /// World direction of each joint axis.
    pub joint_axes: [Vec3; 3],
    /// World position of each link midpoint.
    pub link_midpoints: [Vec3; 3],
    pub tip: Vec3,
}

/// Row-major 3x3 Jacobian (rows: x, y, z; columns: joints).
pub type Jacobian3 = Mat3;

impl FingerModel {
    pub fn frames(&self, q: &FingerJoints) -> FingerFrames {
        let mut rot = self.base_pose.orientation;
        let mut origin = self.base_pose.position;
        let mut joint_origins = [Vec3::ZERO; 3];
        let mut joint_axes = [Vec3::ZERO; 3];
        let mut link_midpoints = [Vec3::ZERO; 3];
        for i in 0..3 {
            joint_origins[i] = origin;
            joint_axes[i] = rot.rotate(self.axes[i]).normalized();
            rot = rot.compose(&UnitQuat::from_axis_angle(self.axes[i], q[i]));
            let link = rot.rotate(Vec3::X * self.link_lengths[i]);
            link_midpoints[i] = origin + link * 0.5;
            origin = origin + link;
        }
        FingerFrames {
            joint_origins,
            joint_axes,
            link_midpoints,
            tip: origin,
        }
    }

    pub fn reach(&self) -> f64 {
        self.link_lengths.iter().sum()
    }

    pub fn clamp(&self, q: &FingerJoints) -> FingerJoints {
        let mut out = *q;
        for i in 0..3 {
            out[i] = out[i].clamp(self.joint_lower[i], self.joint_upper[i]);
        }
        out
    }

    pub fn within_limits(&self, q: &FingerJoints) -> bool {
        (0..3).all(|i| q[i] >= self.joint_lower[i] && q[i] <= self.joint_upper[i])
    }

    /// Mass matrix of the point-mass finger plus armature.
    pub fn mass_matrix(&self, q: &FingerJoints) -> Mat3 {
        let fr = self.frames(q);
        let mut m = Mat3::diag(Vec3::new(self.armature, self.armature, self.armature));
        for k in 0..3 {
            let j = point_jacobian(&fr, k, fr.link_midpoints[k]);
            m = m.add(&j.transpose().mul_mat(&j).scale(self.link_masses[k]));
        }
        m
    }

    /// Joint torques that cancel gravity on the link point masses.
    pub fn gravity_compensation(&self, q: &FingerJoints, gravity: Vec3) -> Vec3 {
        let fr = self.frames(q);
        let mut tau = Vec3::ZERO;
        for k in 0..3 {
            let j = point_jacobian(&fr, k, fr.link_midpoints[k]);
            tau -= j.transpose().mul_vec(gravity * self.link_masses[k]);
        }
        tau
    }
}

/// Jacobian of a point rigidly attached to link `link` (0-based).
pub fn point_jacobian(frames: &FingerFrames, link: usize, point: Vec3) -> Jacobian3 {
    let mut cols = [Vec3::ZERO; 3];
    for (j, col) in cols.iter_mut().enumerate().take(link + 1) {
        *col = frames.joint_axes[j].cross(point - frames.joint_origins[j]);
    }
    Mat3::from_cols(cols[0], cols[1], cols[2])
}

pub fn fk_tip(model: &FingerModel, q: &FingerJoints) -> Vec3 {
    model.frames(q).tip
}

/// d(tip)/dq; its transpose maps a tip force to joint torques.
pub fn tip_jacobian(model: &FingerModel, q: &FingerJoints) -> Jacobian3 {
    let fr = model.frames(q);
    point_jacobian(&fr, 2, fr.tip)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IkOptions {
    pub damping: f64,
    pub max_step: f64,
    pub max_iterations: usize,
    /// Iteration stops once the tip error drops below this.
    pub tolerance: f64,
    /// Best-effort results within this error count as success.
    pub accept: f64,
}

impl Default for IkOptions {
    fn default() -> Self {
        Self {
            damping: 1e-3,
            max_step: 0.2,
            max_iterations: 200,
            tolerance: 1e-7,
            accept: 1e-4,
        }
    }
}

/// Damped least-squares IK for the tip position. Every iterate is clamped into
/// the joint limits; success is judged in tip space only. If the caller's seed
/// stalls (joint limits, singular start), a few deterministic restarts aimed at
/// the target heading are tried before giving up.
pub fn ik_tip(
    model: &FingerModel,
    target: Vec3,
    seed: &FingerJoints,
    opts: &IkOptions,
) -> Result<FingerJoints, IkError> {
    if !target.is_finite() || seed.iter().any(|x| !x.is_finite()) {
        return Err(IkError::NonFinite);
    }
    let distance = (target - model.base_pose.position).norm();
    if distance > model.reach() {
        return Err(IkError::Unreachable {
            distance,
            reach: model.reach(),
        });
    }
    let mut best = dls(model, target, seed, opts);
    if best.0 > opts.accept {
        let local = model.base_pose.inverse_transform_point(target);
        let yaw = local.y.atan2(local.x);
        // heading when the shoulder is pitched back past vertical
        let yaw_back = (yaw + 2.0 * std::f64::consts::PI).rem_euclid(2.0 * std::f64::consts::PI)
            - std::f64::consts::PI;
        let (lo, hi) = (model.joint_lower, model.joint_upper);
        let frac = |i: usize, f: f64| lo[i] + f * (hi[i] - lo[i]);
        let restarts = [
            [yaw, frac(1, 0.5), frac(2, 0.5)],
            [yaw, frac(1, 0.25), frac(2, 0.5)],
            [yaw, frac(1, 0.5), frac(2, 0.25)],
            [yaw_back, frac(1, 0.85), frac(2, 0.5)],
            [yaw_back, frac(1, 0.7), frac(2, 0.25)],
            [yaw_back, frac(1, 0.95), frac(2, 0.1)],
        ];
        for s in restarts {
            let r = dls(model, target, &s, opts);
            if r.0 < best.0 {
                best = r;
            }
            if best.0 <= opts.accept {
                break;
            }
        }
    }
    if best.0 <= opts.accept {
        Ok(best.1)
    } else {
        Err(IkError::NotConverged {
            best: best.1,
            residual: best.0,
        })
    }
}

/// Seeded damped least-squares without restarts. Stays on the seed's branch,
/// which keeps per-tick tracking targets continuous.
pub fn ik_tip_seeded(
    model: &FingerModel,
    target: Vec3,
    seed: &FingerJoints,
    opts: &IkOptions,
) -> Result<FingerJoints, IkError> {
    if !target.is_finite() || seed.iter().any(|x| !x.is_finite()) {
        return Err(IkError::NonFinite);
    }
    let (residual, q) = dls(model, target, seed, opts);
    if residual <= opts.accept {
        Ok(q)
    } else {
        Err(IkError::NotConverged { best: q, residual })
    }
}

fn dls(model: &FingerModel, target: Vec3, seed: &FingerJoints, opts: &IkOptions) -> (f64, FingerJoints) {
    let lambda2 = opts.damping * opts.damping;
    let mut q = model.clamp(seed);
    let mut best = (f64::INFINITY, q);
    for _ in 0..=opts.max_iterations {
        let fr = model.frames(&q);
        let err = target - fr.tip;
        let r = err.norm();
        if r < best.0 {
            best = (r, q);
        }
        if r <= opts.tolerance {
            break;
        }
        let j = point_jacobian(&fr, 2, fr.tip);
        let jjt = j.mul_mat(&j.transpose()).add(&Mat3::diag(Vec3::new(lambda2, lambda2, lambda2)));
        let Some(y) = jjt.solve_spd(err) else {
            break;
        };
        let mut dq = j.transpose().mul_vec(y);
        let m = dq.max_abs();
        if m > opts.max_step {
            dq = dq * (opts.max_step / m);
        }
        for i in 0..3 {
            q[i] += dq[i];
        }
        q = model.clamp(&q);
    }
    best
}

/// Geometry of the three-finger platform.
#[derive(Debug, Clone, PartialEq)]
pub struct RobotConfig {
    pub base_radius: f64,
    pub base_height: f64,
    pub link_lengths: [f64; 3],
    pub joint_lower: FingerJoints,
    pub joint_upper: FingerJoints,
    pub link_mass: f64,
    pub armature: f64,
    pub joint_damping: f64,
    pub torque_limit: f64,
    pub home: FingerJoints,
}

impl Default for RobotConfig {
    fn default() -> Self {
        Self {
            base_radius: 0.13,
            base_height: 0.26,
            link_lengths: [0.02, 0.16, 0.16],
            joint_lower: [-1.6, -1.3, 0.05],
            joint_upper: [1.6, 2.3, 2.9],
            link_mass: 0.2,
            armature: 0.005,
            joint_damping: 0.05,
            torque_limit: 1.5,
            home: [0.0, 0.32, 2.2],
        }
    }
}

impl RobotConfig {
    /// Horizontal angle of finger `i` around the arena center.
    pub fn finger_angle(i: usize) -> f64 {
        i as f64 * 2.0 * std::f64::consts::PI / NUM_FINGERS as f64
    }

    pub fn base_position(&self, i: usize) -> Vec3 {
        let a = Self::finger_angle(i);
        Vec3::new(self.base_radius * a.cos(), self.base_radius * a.sin(), self.base_height)
    }

    pub fn finger(&self, i: usize) -> FingerModel {
        // base x axis points horizontally toward the arena center
        let yaw = Self::finger_angle(i) + std::f64::consts::PI;
        FingerModel {
            base_pose: Pose::new(self.base_position(i), UnitQuat::from_yaw(yaw)),
            link_lengths: self.link_lengths,
            joint_lower: self.joint_lower,
            joint_upper: self.joint_upper,
            axes: [Vec3::Z, Vec3::Y, Vec3::Y],
            link_masses: [self.link_mass; 3],
            armature: self.armature,
        }
    }

    pub fn fingers(&self) -> [FingerModel; NUM_FINGERS] {
        [self.finger(0), self.finger(1), self.finger(2)]
    }

    pub fn home_joints(&self) -> [f64; NUM_JOINTS] {
        let mut q = [0.0; NUM_JOINTS];
        for f in 0..NUM_FINGERS {
            q[f * 3..f * 3 + 3].copy_from_slice(&self.home);
        }
        q
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.link_lengths.iter().any(|&l| !(l > 0.0)) {
            return Err("link lengths must be > 0".into());
        }
        for i in 0..3 {
            if !(self.joint_lower[i] < self.joint_upper[i]) {
                return Err(format!("joint {i}: lower limit must be below upper limit"));
            }
            if self.home[i] < self.joint_lower[i] || self.home[i] > self.joint_upper[i] {
                return Err(format!("home joint {i} outside limits"));
            }
        }
        if !(self.base_height > 0.0 && self.base_radius >= 0.0) {
            return Err("base placement must be above the floor".into());
        }
        if !(self.link_mass >= 0.0 && self.armature > 0.0 && self.joint_damping >= 0.0) {
            return Err("masses and damping must be non-negative, armature positive".into());
        }
        if !(self.torque_limit > 0.0) {
            return Err("torque limit must be > 0".into());
        }
        Ok(())
    }
}

/// Joint positions and velocities of all fingers, finger-major.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JointState {
    pub q: [f64; NUM_JOINTS],
    pub qdot: [f64; NUM_JOINTS],
}

impl JointState {
    pub fn at_rest(q: [f64; NUM_JOINTS]) -> Self {
        Self {
            q,
            qdot: [0.0; NUM_JOINTS],
        }
    }

    pub fn finger_q(&self, f: usize) -> FingerJoints {
        [self.q[3 * f], self.q[3 * f + 1], self.q[3 * f + 2]]
    }

    pub fn finger_qdot(&self, f: usize) -> FingerJoints {
        [self.qdot[3 * f], self.qdot[3 * f + 1], self.qdot[3 * f + 2]]
    }

    pub fn is_finite(&self) -> bool {
        self.q.iter().chain(self.qdot.iter()).all(|x| x.is_finite())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn model() -> FingerModel {
        RobotConfig::default().finger(0)
    }

    fn random_q(m: &FingerModel, rng: &mut ChaCha8Rng) -> FingerJoints {
        let mut q = [0.0; 3];
        for i in 0..3 {
            q[i] = rng.gen_range(m.joint_lower[i]..m.joint_upper[i]);
        }
        q
    }

    #[test]
    fn zero_configuration_tip() {
        let m = model();
        let tip = fk_tip(&m, &[0.0; 3]);
        // base at (0.13, 0, 0.26) facing -x; stretched length 0.34
        let expected = Vec3::new(0.13 - 0.34, 0.0, 0.26);
        assert!((tip - expected).max_abs() < 1e-15, "{tip}");
    }

    #[test]
    fn yaw_traces_circle() {
        let m = model();
        let axis_point = m.base_pose.position;
        let r0 = {
            let t = fk_tip(&m, &[0.0, 0.4, 1.0]);
            Vec3::new(t.x - axis_point.x, t.y - axis_point.y, 0.0).norm()
        };
        for k in 0..20 {
            let th = -1.5 + 0.15 * k as f64;
            let t = fk_tip(&m, &[th, 0.4, 1.0]);
            let r = Vec3::new(t.x - axis_point.x, t.y - axis_point.y, 0.0).norm();
            assert!((r - r0).abs() < 1e-12);
        }
    }

    /// Homogeneous-transform oracle: chains 4x4 matrices built from Rodrigues rotations.
    fn fk_by_matrices(m: &FingerModel, q: &FingerJoints) -> Vec3 {
        type M4 = [[f64; 4]; 4];
        fn mul(a: &M4, b: &M4) -> M4 {
            let mut r = [[0.0; 4]; 4];
            for i in 0..4 {
                for j in 0..4 {
                    r[i][j] = (0..4).map(|k| a[i][k] * b[k][j]).sum();
                }
            }
            r
        }
        fn rot(axis: Vec3, ang: f64) -> M4 {
            let k = Mat3::skew(axis.normalized());
            let r = Mat3::IDENTITY
                .add(&k.scale(ang.sin()))
                .add(&k.mul_mat(&k).scale(1.0 - ang.cos()));
            let mut o = [[0.0; 4]; 4];
            for i in 0..3 {
                for j in 0..3 {
                    o[i][j] = r.m[i][j];
                }
            }
            o[3][3] = 1.0;
            o
        }
        fn trans(x: f64) -> M4 {
            let mut o = [[0.0; 4]; 4];
            for (i, row) in o.iter_mut().enumerate() {
                row[i] = 1.0;
            }
            o[0][3] = x;
            o
        }
        let b = m.base_pose;
        let yaw = b.orientation.yaw();
        let mut t = rot(Vec3::Z, yaw);
        t[0][3] = b.position.x;
        t[1][3] = b.position.y;
        t[2][3] = b.position.z;
        for i in 0..3 {
            t = mul(&t, &rot(m.axes[i], q[i]));
            t = mul(&t, &trans(m.link_lengths[i]));
        }
        Vec3::new(t[0][3], t[1][3], t[2][3])
    }

    #[test]
    fn fk_matches_transform_composition() {
        let m = model();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            let q = random_q(&m, &mut rng);
            let a = fk_tip(&m, &q);
            let b = fk_by_matrices(&m, &q);
            assert!((a - b).max_abs() < 1e-12, "{a} vs {b}");
        }
    }

    #[test]
    fn jacobian_matches_finite_differences() {
        let m = model();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let h = 1e-6;
        for _ in 0..100 {
            let q = random_q(&m, &mut rng);
            let j = tip_jacobian(&m, &q);
            for c in 0..3 {
                let mut qp = q;
                let mut qm = q;
                qp[c] += h;
                qm[c] -= h;
                let fd = (fk_tip(&m, &qp) - fk_tip(&m, &qm)) / (2.0 * h);
                assert!((fd - j.col(c)).max_abs() < 1e-6);
            }
        }
    }

    #[test]
    fn stretched_configuration_is_singular() {
        let m = model();
        let j = tip_jacobian(&m, &[0.3, 0.7, 0.0]);
        assert!(j.determinant().abs() < 1e-12);
    }

    #[test]
    fn column_vanishes_when_axis_hits_tip() {
        // knee folded back so the tip lands on the yaw axis
        let mut m = model();
        m.link_lengths = [0.0, 0.16, 0.16];
        m.joint_lower = [-4.0; 3];
        m.joint_upper = [4.0; 3];
        let q = [0.0, 1.0, std::f64::consts::PI];
        let j = tip_jacobian(&m, &q);
        assert!(j.col(0).max_abs() < 1e-12);
        assert!(j.col(1).max_abs() < 1e-12);
    }

    #[test]
    fn ik_round_trips() {
        let m = model();
        let opts = IkOptions::default();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut worst_zero = 0.0f64;
        for _ in 0..200 {
            let q = random_q(&m, &mut rng);
            let target = fk_tip(&m, &q);
            let sol = ik_tip(&m, target, &q, &opts).unwrap();
            assert!((fk_tip(&m, &sol) - target).norm() <= 1e-6);
            let from_zero = ik_tip(&m, target, &[0.0; 3], &opts).unwrap_or_else(|e| panic!("{q:?}: {e:?}"));
            assert!(m.within_limits(&from_zero));
            worst_zero = worst_zero.max((fk_tip(&m, &from_zero) - target).norm());
        }
        assert!(worst_zero <= 1e-4, "worst {worst_zero}");
    }

    #[test]
    fn ik_reports_unreachable() {
        let m = model();
        let err = ik_tip(&m, Vec3::new(10.0, 0.0, 0.0), &[0.0; 3], &IkOptions::default());
        assert!(matches!(err, Err(IkError::Unreachable { .. })));
    }

    #[test]
    fn gravity_compensation_balances_virtual_work() {
        // torque should equal dV/dq for V = sum m g z_k
        let m = model();
        let g = Vec3::new(0.0, 0.0, -9.81);
        let q = [0.2, 0.5, 1.1];
        let pot = |q: &FingerJoints| {
            let fr = m.frames(q);
            (0..3).map(|k| m.link_masses[k] * 9.81 * fr.link_midpoints[k].z).sum::<f64>()
        };
        let tau = m.gravity_compensation(&q, g);
        let h = 1e-6;
        for c in 0..3 {
            let mut qp = q;
            let mut qm = q;
            qp[c] += h;
            qm[c] -= h;
            let fd = (pot(&qp) - pot(&qm)) / (2.0 * h);
            assert!((fd - tau[c]).abs() < 1e-7);
        }
    }

    #[test]
    fn mass_matrix_is_spd() {
        let m = model();
        let mm = m.mass_matrix(&[0.1, 0.4, 1.3]);
        assert!(mm.solve_spd(Vec3::new(1.0, 1.0, 1.0)).is_some());
        assert!((mm.m[0][1] - mm.m[1][0]).abs() < 1e-15);
    }

    #[test]
    fn default_config_valid() {
        RobotConfig::default().validate().unwrap();
    }
}
