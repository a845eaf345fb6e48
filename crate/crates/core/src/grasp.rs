//! Contact-force distribution for a cube held by fingertips.
//!
//! The held cube is a rigid body standing on `k` point contacts. Per-tip forces
//! come from a small QP: stay close to a light normal preload, reproduce the
//! desired body wrench, and remain inside an inscribed friction pyramid.

use thiserror::Error;

use crate::geom::{CubeGeometry, Mat3, Pose, Vec3};
use crate::linalg::DMat;
use crate::qp::{AdmmSettings, DenseQp, QpStatus};

pub const MAX_CONTACTS: usize = 4;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GraspError {
    #[error("bad grasp input: {0}")]
    BadInput(String),
    #[error("requested wrench is not reachable inside the friction pyramids (residual {residual:.3e})")]
    Infeasible { best: ContactForces, residual: f64 },
    #[error("force solver stopped before reaching tolerance (residual {residual:.3e}, violation {violation:.3e})")]
    NotConverged {
        best: ContactForces,
        residual: f64,
        violation: f64,
    },
}

/// Body wrench at the cube center of mass, world frame.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct WrenchTarget {
    pub force: Vec3,
    pub torque: Vec3,
}

impl WrenchTarget {
    pub fn to_array(&self) -> [f64; 6] {
        let (f, t) = (self.force, self.torque);
        [f.x, f.y, f.z, t.x, t.y, t.z]
    }

    pub fn norm(&self) -> f64 {
        (self.force.norm_squared() + self.torque.norm_squared()).sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.force.is_finite() && self.torque.is_finite()
    }
}

/// `6 x 3k` map from stacked contact forces to the wrench about `com`.
#[derive(Debug, Clone, PartialEq)]
pub struct GraspMatrix {
    pub g: DMat,
    pub contacts: Vec<Vec3>,
    pub com: Vec3,
}

pub fn grasp_matrix(contacts: &[Vec3], com: Vec3) -> GraspMatrix {
    let k = contacts.len();
    let mut g = DMat::zeros(6, 3 * k);
    for (i, p) in contacts.iter().enumerate() {
        let s = Mat3::skew(*p - com);
        for r in 0..3 {
            g[(r, 3 * i + r)] = 1.0;
            for c in 0..3 {
                g[(3 + r, 3 * i + c)] = s.m[r][c];
            }
        }
    }
    GraspMatrix {
        g,
        contacts: contacts.to_vec(),
        com,
    }
}

impl GraspMatrix {
    pub fn num_contacts(&self) -> usize {
        self.contacts.len()
    }

    pub fn wrench(&self, forces: &[Vec3]) -> WrenchTarget {
        let w = self.g.mul_vec(&flatten(forces));
        WrenchTarget {
            force: Vec3::new(w[0], w[1], w[2]),
            torque: Vec3::new(w[3], w[4], w[5]),
        }
    }
}

fn flatten(forces: &[Vec3]) -> Vec<f64> {
    forces.iter().flat_map(|f| f.to_array()).collect()
}

/// Cube-space PD gains. Linear gains are accelerations per unit error; angular
/// gains are angular accelerations per unit error and get scaled by the inertia.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CubeGains {
    pub kp_lin: f64,
    pub kd_lin: f64,
    pub kp_ang: f64,
    pub kd_ang: f64,
}

impl Default for CubeGains {
    fn default() -> Self {
        Self {
            kp_lin: 200.0,
            kd_lin: 28.0,
            kp_ang: 20.0,
            kd_ang: 2.0,
        }
    }
}

/// Reference motion for the cube: pose plus linear velocity/acceleration.
/// The angular reference is a held orientation (zero angular velocity).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CubeReference {
    pub pose: Pose,
    pub linvel: Vec3,
    pub linacc: Vec3,
}

/// Wrench the fingertips must apply so the cube follows `reference`.
/// Zero tracking error at rest yields exactly the gravity-compensating force.
pub fn desired_wrench(
    pose: &Pose,
    linvel: Vec3,
    angvel: Vec3,
    reference: &CubeReference,
    cube: &CubeGeometry,
    gravity: Vec3,
    gains: &CubeGains,
) -> WrenchTarget {
    let e_pos = reference.pose.position - pose.position;
    let e_vel = reference.linvel - linvel;
    let acc = reference.linacc + e_pos * gains.kp_lin + e_vel * gains.kd_lin;
    let force = acc * cube.mass - gravity * cube.mass;

    let e_rot = reference
        .pose
        .orientation
        .compose(&pose.orientation.conjugate())
        .log();
    let alpha = e_rot * gains.kp_ang - angvel * gains.kd_ang;
    let r = pose.orientation.to_matrix();
    let inertia_world = r.mul_mat(&Mat3::diag(cube.inertia_diag)).mul_mat(&r.transpose());
    let torque = inertia_world.mul_vec(alpha);
    WrenchTarget { force, torque }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrictionPyramid {
    pub mu: f64,
    /// Inscribed pyramids bound each tangent axis by `mu / sqrt(2)` so the
    /// whole pyramid lies inside the Coulomb cone.
    pub inscribed: bool,
}

impl FrictionPyramid {
    pub fn new(mu: f64) -> Self {
        Self { mu, inscribed: true }
    }

    pub fn tangent_bound(&self) -> f64 {
        if self.inscribed {
            self.mu / std::f64::consts::SQRT_2
        } else {
            self.mu
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ContactForces {
    /// Force applied by each tip on the cube, world frame.
    pub forces: Vec<Vec3>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EqualityMode {
    /// `G f = w` exactly; unreachable wrenches are reported as infeasible.
    Hard,
    /// `weight * |G f - w|^2` added to the objective; always solvable.
    Penalty(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QpSettings {
    pub w_reg: f64,
    pub f_ref: f64,
    pub equality: EqualityMode,
    pub admm: AdmmSettings,
}

impl Default for QpSettings {
    fn default() -> Self {
        Self {
            w_reg: 1e-2,
            f_ref: 0.3,
            equality: EqualityMode::Hard,
            admm: AdmmSettings::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QpSolution {
    pub forces: ContactForces,
    /// `|G f - w|`.
    pub residual: f64,
    /// Largest violation of any pyramid or normal-bound row.
    pub violation: f64,
    /// `|f|^2 + w_reg * sum (n.f - f_ref)^2`.
    pub objective: f64,
    pub iterations: usize,
    pub polished: bool,
}

/// Orthonormal tangents `(t1, t2)` with `t1 x t2 = n`; axis-aligned normals get
/// axis-aligned tangents.
pub fn tangent_basis(n: Vec3) -> (Vec3, Vec3) {
    let a = if n.x.abs() <= n.y.abs() && n.x.abs() <= n.z.abs() {
        Vec3::X
    } else if n.y.abs() <= n.z.abs() {
        Vec3::Y
    } else {
        Vec3::Z
    };
    let t1 = n.cross(a).normalized();
    let t2 = n.cross(t1);
    (t1, t2)
}

/// Constraint rows for one contact: `0 <= n.f <= f_max` and `c n.f +- t.f >= 0`.
fn contact_rows(n: Vec3, pyr: &FrictionPyramid, f_max: f64) -> [(Vec3, f64, f64); 5] {
    let c = pyr.tangent_bound();
    let (t1, t2) = tangent_basis(n);
    [
        (n, 0.0, f_max),
        (n * c + t1, 0.0, f64::INFINITY),
        (n * c - t1, 0.0, f64::INFINITY),
        (n * c + t2, 0.0, f64::INFINITY),
        (n * c - t2, 0.0, f64::INFINITY),
    ]
}

/// Largest constraint violation of `forces` for the given normals.
pub fn constraint_violation(normals: &[Vec3], forces: &[Vec3], pyr: &FrictionPyramid, f_max: f64) -> f64 {
    let mut worst = 0.0f64;
    for (n, f) in normals.iter().zip(forces) {
        for (a, lo, hi) in contact_rows(*n, pyr, f_max) {
            let v = a.dot(*f);
            worst = worst.max(lo - v).max(v - hi);
        }
    }
    worst
}

pub fn force_objective(normals: &[Vec3], forces: &[Vec3], w_reg: f64, f_ref: f64) -> f64 {
    normals
        .iter()
        .zip(forces)
        .map(|(n, f)| f.norm_squared() + w_reg * (n.dot(*f) - f_ref).powi(2))
        .sum()
}

/// Solves for tip forces. `normals` point into the cube (the direction a tip
/// pushes). In [`EqualityMode::Hard`] the wrench must be matched to
/// `1e-6 (1 + |w|)`; otherwise an error carrying the best effort is returned.
pub fn solve_contact_forces(
    g: &GraspMatrix,
    normals: &[Vec3],
    w: &WrenchTarget,
    pyr: &FrictionPyramid,
    f_max: f64,
    settings: &QpSettings,
) -> Result<QpSolution, GraspError> {
    let k = g.num_contacts();
    if !(1..=MAX_CONTACTS).contains(&k) {
        return Err(GraspError::BadInput(format!("{k} contacts, expected 1..={MAX_CONTACTS}")));
    }
    if normals.len() != k {
        return Err(GraspError::BadInput(format!("{} normals for {k} contacts", normals.len())));
    }
    if normals.iter().any(|n| !n.is_finite() || (n.norm() - 1.0).abs() > 1e-9) {
        return Err(GraspError::BadInput("normals must be finite unit vectors".into()));
    }
    if !w.is_finite() {
        return Err(GraspError::BadInput("non-finite wrench".into()));
    }
    if !(pyr.mu > 0.0) || !(f_max > 0.0) {
        return Err(GraspError::BadInput("mu and f_max must be positive".into()));
    }

    let qp = build_qp(g, normals, w, pyr, f_max, settings, settings.equality);
    let res = qp.solve(&settings.admm);
    let forces: Vec<Vec3> = res.x.chunks(3).map(Vec3::from_slice).collect();
    let achieved = g.wrench(&forces);
    let residual = wrench_gap(&achieved, w);
    let violation = constraint_violation(normals, &forces, pyr, f_max);
    let sol = QpSolution {
        objective: force_objective(normals, &forces, settings.w_reg, settings.f_ref),
        forces: ContactForces { forces },
        residual,
        violation,
        iterations: res.iterations,
        polished: res.polished,
    };

    let feasible_tol = 1e-8;
    match settings.equality {
        EqualityMode::Hard => {
            let eq_tol = 1e-6 * (1.0 + w.norm());
            if res.status == QpStatus::Infeasible || (res.status != QpStatus::Solved && residual > eq_tol) {
                // best effort: closest reachable wrench
                let best = best_effort(g, normals, w, pyr, f_max, settings);
                let residual = wrench_gap(&g.wrench(&best.forces), w);
                if res.status == QpStatus::Infeasible {
                    return Err(GraspError::Infeasible { best, residual });
                }
                return Err(GraspError::NotConverged {
                    best,
                    residual,
                    violation,
                });
            }
            if residual > eq_tol || violation > feasible_tol {
                return Err(GraspError::NotConverged {
                    best: sol.forces,
                    residual,
                    violation,
                });
            }
        }
        EqualityMode::Penalty(_) => {
            if violation > feasible_tol {
                return Err(GraspError::NotConverged {
                    best: sol.forces,
                    residual,
                    violation,
                });
            }
        }
    }
    Ok(sol)
}

fn wrench_gap(a: &WrenchTarget, b: &WrenchTarget) -> f64 {
    ((a.force - b.force).norm_squared() + (a.torque - b.torque).norm_squared()).sqrt()
}

fn best_effort(
    g: &GraspMatrix,
    normals: &[Vec3],
    w: &WrenchTarget,
    pyr: &FrictionPyramid,
    f_max: f64,
    settings: &QpSettings,
) -> ContactForces {
    let qp = build_qp(g, normals, w, pyr, f_max, settings, EqualityMode::Penalty(1e4));
    let res = qp.solve(&settings.admm);
    ContactForces {
        forces: res.x.chunks(3).map(Vec3::from_slice).collect(),
    }
}

#[allow(clippy::too_many_arguments)]
fn build_qp(
    g: &GraspMatrix,
    normals: &[Vec3],
    w: &WrenchTarget,
    pyr: &FrictionPyramid,
    f_max: f64,
    settings: &QpSettings,
    mode: EqualityMode,
) -> DenseQp {
    let k = normals.len();
    let n = 3 * k;
    // objective scaled by 1/2 relative to the documented form
    let mut p = DMat::identity(n);
    let mut q = vec![0.0; n];
    for (i, nrm) in normals.iter().enumerate() {
        let na = nrm.to_array();
        for r in 0..3 {
            for c in 0..3 {
                p[(3 * i + r, 3 * i + c)] += settings.w_reg * na[r] * na[c];
            }
            q[3 * i + r] -= settings.w_reg * settings.f_ref * na[r];
        }
    }
    let wv = w.to_array();
    let ineq_rows = 5 * k;
    let eq_rows = if mode == EqualityMode::Hard { 6 } else { 0 };
    let m = ineq_rows + eq_rows;
    let mut a = DMat::zeros(m, n);
    let mut l = vec![0.0; m];
    let mut u = vec![0.0; m];
    for (i, nrm) in normals.iter().enumerate() {
        for (j, (row, lo, hi)) in contact_rows(*nrm, pyr, f_max).into_iter().enumerate() {
            let r = 5 * i + j;
            let ra = row.to_array();
            for c in 0..3 {
                a[(r, 3 * i + c)] = ra[c];
            }
            l[r] = lo;
            u[r] = hi;
        }
    }
    match mode {
        EqualityMode::Hard => {
            for r in 0..6 {
                for c in 0..n {
                    a[(ineq_rows + r, c)] = g.g[(r, c)];
                }
                l[ineq_rows + r] = wv[r];
                u[ineq_rows + r] = wv[r];
            }
        }
        EqualityMode::Penalty(weight) => {
            let ones = [weight; 6];
            p.add_assign(&g.g.weighted_gram(&ones));
            let gtw = g.g.tr_mul_vec(&wv);
            for c in 0..n {
                q[c] -= weight * gtw[c];
            }
        }
    }
    DenseQp { p, q, a, l, u }
}
