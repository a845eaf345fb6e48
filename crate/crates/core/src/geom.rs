//! Small fixed-size 3D math plus the cube and its contact-region parameterization.

use std::fmt;
use std::ops::{Add, AddAssign, Div, Index, Mul, Neg, Sub, SubAssign};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeomError {
    #[error("contact coordinates ({u}, {v}) must be finite and inside [-1, 1]")]
    ContactOutOfRange { u: f64, v: f64 },
    #[error("invalid cube geometry: {0}")]
    InvalidCube(&'static str),
    #[error("unknown face label `{0}`")]
    UnknownFace(String),
}

/// Half-extent of the allowed contact square as a fraction of the edge length.
/// The usable region is the central 60% of a face, i.e. +-0.3 edge around the center.
pub const CONTACT_REGION_HALF_FRACTION: f64 = 0.3;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Vec3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Vec3 {
    pub const ZERO: Vec3 = Vec3::new(0.0, 0.0, 0.0);
    pub const X: Vec3 = Vec3::new(1.0, 0.0, 0.0);
    pub const Y: Vec3 = Vec3::new(0.0, 1.0, 0.0);
    pub const Z: Vec3 = Vec3::new(0.0, 0.0, 1.0);

    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn from_slice(s: &[f64]) -> Self {
        Self::new(s[0], s[1], s[2])
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }

    pub fn dot(self, o: Vec3) -> f64 {
        self.x * o.x + self.y * o.y + self.z * o.z
    }

    pub fn cross(self, o: Vec3) -> Vec3 {
        Vec3::new(
            self.y * o.z - self.z * o.y,
            self.z * o.x - self.x * o.z,
            self.x * o.y - self.y * o.x,
        )
    }

    pub fn norm_squared(self) -> f64 {
        self.dot(self)
    }

    pub fn norm(self) -> f64 {
        self.norm_squared().sqrt()
    }

    /// Unit vector in the same direction, or zero for a (near) zero vector.
    pub fn normalized(self) -> Vec3 {
        let n = self.norm();
        if n > 1e-300 {
            self / n
        } else {
            Vec3::ZERO
        }
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    pub fn component_mul(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x * o.x, self.y * o.y, self.z * o.z)
    }

    pub fn lerp(self, o: Vec3, s: f64) -> Vec3 {
        self + (o - self) * s
    }

    pub fn max_abs(self) -> f64 {
        self.x.abs().max(self.y.abs()).max(self.z.abs())
    }
}

impl Index<usize> for Vec3 {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        match i {
            0 => &self.x,
            1 => &self.y,
            2 => &self.z,
            _ => panic!("Vec3 index {i} out of range"),
        }
    }
}

impl Add for Vec3 {
    type Output = Vec3;
    fn add(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl AddAssign for Vec3 {
    fn add_assign(&mut self, o: Vec3) {
        *self = *self + o;
    }
}

impl Sub for Vec3 {
    type Output = Vec3;
    fn sub(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl SubAssign for Vec3 {
    fn sub_assign(&mut self, o: Vec3) {
        *self = *self - o;
    }
}

impl Neg for Vec3 {
    type Output = Vec3;
    fn neg(self) -> Vec3 {
        Vec3::new(-self.x, -self.y, -self.z)
    }
}

impl Mul<f64> for Vec3 {
    type Output = Vec3;
    fn mul(self, s: f64) -> Vec3 {
        Vec3::new(self.x * s, self.y * s, self.z * s)
    }
}

impl Mul<Vec3> for f64 {
    type Output = Vec3;
    fn mul(self, v: Vec3) -> Vec3 {
        v * self
    }
}

impl Div<f64> for Vec3 {
    type Output = Vec3;
    fn div(self, s: f64) -> Vec3 {
        Vec3::new(self.x / s, self.y / s, self.z / s)
    }
}

impl fmt::Display for Vec3 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}, {})", self.x, self.y, self.z)
    }
}

/// Row-major 3x3 matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mat3 {
    pub m: [[f64; 3]; 3],
}

impl Mat3 {
    pub const IDENTITY: Mat3 = Mat3 {
        m: [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]],
    };
    pub const ZERO: Mat3 = Mat3 { m: [[0.0; 3]; 3] };

    pub fn from_cols(c0: Vec3, c1: Vec3, c2: Vec3) -> Mat3 {
        Mat3 {
            m: [[c0.x, c1.x, c2.x], [c0.y, c1.y, c2.y], [c0.z, c1.z, c2.z]],
        }
    }

    pub fn diag(d: Vec3) -> Mat3 {
        Mat3 {
            m: [[d.x, 0.0, 0.0], [0.0, d.y, 0.0], [0.0, 0.0, d.z]],
        }
    }

    /// Matrix of the linear map `v -> a x v`.
    pub fn skew(a: Vec3) -> Mat3 {
        Mat3 {
            m: [[0.0, -a.z, a.y], [a.z, 0.0, -a.x], [-a.y, a.x, 0.0]],
        }
    }

    pub fn col(&self, j: usize) -> Vec3 {
        Vec3::new(self.m[0][j], self.m[1][j], self.m[2][j])
    }

    pub fn row(&self, i: usize) -> Vec3 {
        Vec3::new(self.m[i][0], self.m[i][1], self.m[i][2])
    }

    pub fn transpose(&self) -> Mat3 {
        let mut t = Mat3::ZERO;
        for i in 0..3 {
            for j in 0..3 {
                t.m[i][j] = self.m[j][i];
            }
        }
        t
    }

    pub fn mul_vec(&self, v: Vec3) -> Vec3 {
        Vec3::new(self.row(0).dot(v), self.row(1).dot(v), self.row(2).dot(v))
    }

    pub fn mul_mat(&self, o: &Mat3) -> Mat3 {
        let mut r = Mat3::ZERO;
        for i in 0..3 {
            for j in 0..3 {
                r.m[i][j] = (0..3).map(|k| self.m[i][k] * o.m[k][j]).sum();
            }
        }
        r
    }

    pub fn add(&self, o: &Mat3) -> Mat3 {
        let mut r = *self;
        for i in 0..3 {
            for j in 0..3 {
                r.m[i][j] += o.m[i][j];
            }
        }
        r
    }

    pub fn scale(&self, s: f64) -> Mat3 {
        let mut r = *self;
        r.m.iter_mut().flatten().for_each(|x| *x *= s);
        r
    }

    pub fn determinant(&self) -> f64 {
        let m = &self.m;
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
            - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    }

    pub fn inverse(&self) -> Option<Mat3> {
        let det = self.determinant();
        if det.abs() < 1e-300 || !det.is_finite() {
            return None;
        }
        let m = &self.m;
        let mut inv = Mat3::ZERO;
        inv.m[0][0] = m[1][1] * m[2][2] - m[1][2] * m[2][1];
        inv.m[0][1] = m[0][2] * m[2][1] - m[0][1] * m[2][2];
        inv.m[0][2] = m[0][1] * m[1][2] - m[0][2] * m[1][1];
        inv.m[1][0] = m[1][2] * m[2][0] - m[1][0] * m[2][2];
        inv.m[1][1] = m[0][0] * m[2][2] - m[0][2] * m[2][0];
        inv.m[1][2] = m[0][2] * m[1][0] - m[0][0] * m[1][2];
        inv.m[2][0] = m[1][0] * m[2][1] - m[1][1] * m[2][0];
        inv.m[2][1] = m[0][1] * m[2][0] - m[0][0] * m[2][1];
        inv.m[2][2] = m[0][0] * m[1][1] - m[0][1] * m[1][0];
        Some(inv.scale(1.0 / det))
    }

    /// Solves `self * x = b` for symmetric positive definite `self` via Cholesky.
    pub fn solve_spd(&self, b: Vec3) -> Option<Vec3> {
        let a = &self.m;
        let l00 = a[0][0].sqrt();
        if !(l00 > 0.0) {
            return None;
        }
        let l10 = a[1][0] / l00;
        let l20 = a[2][0] / l00;
        let d1 = a[1][1] - l10 * l10;
        if !(d1 > 0.0) {
            return None;
        }
        let l11 = d1.sqrt();
        let l21 = (a[2][1] - l20 * l10) / l11;
        let d2 = a[2][2] - l20 * l20 - l21 * l21;
        if !(d2 > 0.0) {
            return None;
        }
        let l22 = d2.sqrt();
        let y0 = b.x / l00;
        let y1 = (b.y - l10 * y0) / l11;
        let y2 = (b.z - l20 * y0 - l21 * y1) / l22;
        let x2 = y2 / l22;
        let x1 = (y1 - l21 * x2) / l11;
        let x0 = (y0 - l10 * x1 - l20 * x2) / l00;
        Some(Vec3::new(x0, x1, x2))
    }
}

/// Unit quaternion stored as (w, x, y, z).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UnitQuat {
    w: f64,
    x: f64,
    y: f64,
    z: f64,
}

impl Default for UnitQuat {
    fn default() -> Self {
        Self::IDENTITY
    }
}

impl UnitQuat {
    pub const IDENTITY: UnitQuat = UnitQuat {
        w: 1.0,
        x: 0.0,
        y: 0.0,
        z: 0.0,
    };

    /// Normalizes the given components. A zero quaternion maps to identity.
    pub fn new_normalize(w: f64, x: f64, y: f64, z: f64) -> Self {
        let n = (w * w + x * x + y * y + z * z).sqrt();
        if !(n > 1e-300) || !n.is_finite() {
            return Self::IDENTITY;
        }
        Self {
            w: w / n,
            x: x / n,
            y: y / n,
            z: z / n,
        }
    }

    pub fn from_axis_angle(axis: Vec3, angle: f64) -> Self {
        let a = axis.normalized();
        let (s, c) = (0.5 * angle).sin_cos();
        Self::new_normalize(c, a.x * s, a.y * s, a.z * s)
    }

    /// Exponential map of a rotation vector (axis * angle).
    pub fn from_rotation_vector(rv: Vec3) -> Self {
        let angle = rv.norm();
        if angle < 1e-12 {
            // second-order series keeps tiny steps accurate
            return Self::new_normalize(1.0 - angle * angle / 8.0, 0.5 * rv.x, 0.5 * rv.y, 0.5 * rv.z);
        }
        Self::from_axis_angle(rv / angle, angle)
    }

    pub fn from_yaw(yaw: f64) -> Self {
        Self::from_axis_angle(Vec3::Z, yaw)
    }

    pub fn w(&self) -> f64 {
        self.w
    }

    pub fn vector(&self) -> Vec3 {
        Vec3::new(self.x, self.y, self.z)
    }

    pub fn to_array(&self) -> [f64; 4] {
        [self.w, self.x, self.y, self.z]
    }

    pub fn norm(&self) -> f64 {
        (self.w * self.w + self.x * self.x + self.y * self.y + self.z * self.z).sqrt()
    }

    pub fn conjugate(&self) -> Self {
        Self {
            w: self.w,
            x: -self.x,
            y: -self.y,
            z: -self.z,
        }
    }

    /// Hamilton product `self * o`, renormalized.
    pub fn compose(&self, o: &UnitQuat) -> UnitQuat {
        let (a, b) = (self, o);
        UnitQuat::new_normalize(
            a.w * b.w - a.x * b.x - a.y * b.y - a.z * b.z,
            a.w * b.x + a.x * b.w + a.y * b.z - a.z * b.y,
            a.w * b.y - a.x * b.z + a.y * b.w + a.z * b.x,
            a.w * b.z + a.x * b.y - a.y * b.x + a.z * b.w,
        )
    }

    pub fn rotate(&self, v: Vec3) -> Vec3 {
        // v' = v + 2w (q x v) + 2 q x (q x v)
        let q = self.vector();
        let t = q.cross(v) * 2.0;
        v + t * self.w + q.cross(t)
    }

    pub fn inverse_rotate(&self, v: Vec3) -> Vec3 {
        self.conjugate().rotate(v)
    }

    pub fn to_matrix(&self) -> Mat3 {
        Mat3::from_cols(self.rotate(Vec3::X), self.rotate(Vec3::Y), self.rotate(Vec3::Z))
    }

    /// Rotation vector (log map) with angle in [0, pi].
    pub fn log(&self) -> Vec3 {
        let (w, v) = if self.w < 0.0 {
            (-self.w, -self.vector())
        } else {
            (self.w, self.vector())
        };
        let s = v.norm();
        if s < 1e-12 {
            return v * 2.0;
        }
        let angle = 2.0 * s.atan2(w);
        v * (angle / s)
    }

    /// Heading of the rotated x axis projected onto the horizontal plane.
    pub fn yaw(&self) -> f64 {
        let x = self.rotate(Vec3::X);
        x.y.atan2(x.x)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Pose {
    pub position: Vec3,
    pub orientation: UnitQuat,
}

impl Pose {
    pub const IDENTITY: Pose = Pose {
        position: Vec3::ZERO,
        orientation: UnitQuat::IDENTITY,
    };

    pub fn new(position: Vec3, orientation: UnitQuat) -> Self {
        Self {
            position,
            orientation,
        }
    }

    pub fn from_translation(position: Vec3) -> Self {
        Self::new(position, UnitQuat::IDENTITY)
    }

    pub fn inverse(&self) -> Pose {
        let inv = self.orientation.conjugate();
        Pose::new(-inv.rotate(self.position), inv)
    }

    pub fn compose(&self, o: &Pose) -> Pose {
        Pose::new(
            self.transform_point(o.position),
            self.orientation.compose(&o.orientation),
        )
    }

    pub fn transform_point(&self, local: Vec3) -> Vec3 {
        transform_point(self, local)
    }

    pub fn transform_vector(&self, local: Vec3) -> Vec3 {
        self.orientation.rotate(local)
    }

    pub fn inverse_transform_point(&self, world: Vec3) -> Vec3 {
        self.orientation.inverse_rotate(world - self.position)
    }
}

/// Maps a point from the pose's local frame to the world frame.
pub fn transform_point(pose: &Pose, local: Vec3) -> Vec3 {
    pose.orientation.rotate(local) + pose.position
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CubeGeometry {
    pub edge_length: f64,
    pub mass: f64,
    pub inertia_diag: Vec3,
    pub friction_coeff: f64,
}

impl Default for CubeGeometry {
    fn default() -> Self {
        Self::solid(0.065, 0.094, 0.8)
    }
}

impl CubeGeometry {
    /// Uniform-density cube; inertia m*e^2/6 about every principal axis.
    pub fn solid(edge_length: f64, mass: f64, friction_coeff: f64) -> Self {
        let i = mass * edge_length * edge_length / 6.0;
        Self {
            edge_length,
            mass,
            inertia_diag: Vec3::new(i, i, i),
            friction_coeff,
        }
    }

    pub fn half_edge(&self) -> f64 {
        0.5 * self.edge_length
    }

    pub fn validate(&self) -> Result<(), GeomError> {
        if !(self.edge_length > 0.0) || !self.edge_length.is_finite() {
            return Err(GeomError::InvalidCube("edge_length must be > 0"));
        }
        if !(self.mass > 0.0) || !self.mass.is_finite() {
            return Err(GeomError::InvalidCube("mass must be > 0"));
        }
        let i = self.inertia_diag;
        if !(i.x > 0.0 && i.y > 0.0 && i.z > 0.0) || !i.is_finite() {
            return Err(GeomError::InvalidCube("inertia components must be > 0"));
        }
        if !(self.friction_coeff > 0.0 && self.friction_coeff <= 2.0) {
            return Err(GeomError::InvalidCube("friction_coeff must lie in (0, 2]"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum FaceId {
    PosX,
    NegX,
    PosY,
    NegY,
    PosZ,
    NegZ,
}

impl FaceId {
    pub const ALL: [FaceId; 6] = [
        FaceId::PosX,
        FaceId::NegX,
        FaceId::PosY,
        FaceId::NegY,
        FaceId::PosZ,
        FaceId::NegZ,
    ];

    /// Vertical faces of an upright cube, in a fixed order.
    pub const SIDES: [FaceId; 4] = [FaceId::PosX, FaceId::PosY, FaceId::NegX, FaceId::NegY];

    pub fn local_normal(self) -> Vec3 {
        match self {
            FaceId::PosX => Vec3::X,
            FaceId::NegX => -Vec3::X,
            FaceId::PosY => Vec3::Y,
            FaceId::NegY => -Vec3::Y,
            FaceId::PosZ => Vec3::Z,
            FaceId::NegZ => -Vec3::Z,
        }
    }

    /// Right-handed in-face axes (u, v) with u x v = outward normal.
    pub fn tangent_axes(self) -> (Vec3, Vec3) {
        match self {
            FaceId::PosX => (Vec3::Y, Vec3::Z),
            FaceId::NegX => (Vec3::Z, Vec3::Y),
            FaceId::PosY => (Vec3::Z, Vec3::X),
            FaceId::NegY => (Vec3::X, Vec3::Z),
            FaceId::PosZ => (Vec3::X, Vec3::Y),
            FaceId::NegZ => (Vec3::Y, Vec3::X),
        }
    }

    pub fn opposite(self) -> FaceId {
        match self {
            FaceId::PosX => FaceId::NegX,
            FaceId::NegX => FaceId::PosX,
            FaceId::PosY => FaceId::NegY,
            FaceId::NegY => FaceId::PosY,
            FaceId::PosZ => FaceId::NegZ,
            FaceId::NegZ => FaceId::PosZ,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            FaceId::PosX => "+x",
            FaceId::NegX => "-x",
            FaceId::PosY => "+y",
            FaceId::NegY => "-y",
            FaceId::PosZ => "+z",
            FaceId::NegZ => "-z",
        }
    }

    pub fn from_label(s: &str) -> Result<FaceId, GeomError> {
        FaceId::ALL
            .into_iter()
            .find(|f| f.label() == s)
            .ok_or_else(|| GeomError::UnknownFace(s.to_string()))
    }
}

/// A fingertip contact: a face plus normalized coordinates in its allowed region.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContactSpec {
    pub face: FaceId,
    u: f64,
    v: f64,
}

impl ContactSpec {
    pub fn new(face: FaceId, u: f64, v: f64) -> Result<Self, GeomError> {
        if !u.is_finite() || !v.is_finite() || u.abs() > 1.0 || v.abs() > 1.0 {
            return Err(GeomError::ContactOutOfRange { u, v });
        }
        Ok(Self { face, u, v })
    }

    pub fn center(face: FaceId) -> Self {
        Self { face, u: 0.0, v: 0.0 }
    }

    pub fn uv(&self) -> (f64, f64) {
        (self.u, self.v)
    }
}

/// Contact location in the cube frame. `uv = (+-1, +-1)` lands on the corners of
/// the central 60% square of the face.
pub fn contact_point_local(geom: &CubeGeometry, spec: &ContactSpec) -> Vec3 {
    let h = geom.half_edge();
    let reach = CONTACT_REGION_HALF_FRACTION * geom.edge_length;
    let (tu, tv) = spec.face.tangent_axes();
    spec.face.local_normal() * h + tu * (spec.u * reach) + tv * (spec.v * reach)
}

/// Checked variant for raw coordinates coming from outside.
pub fn contact_point_local_checked(
    geom: &CubeGeometry,
    face: FaceId,
    u: f64,
    v: f64,
) -> Result<Vec3, GeomError> {
    Ok(contact_point_local(geom, &ContactSpec::new(face, u, v)?))
}

/// Outward unit normal of `face` in world coordinates.
pub fn face_normal_world(pose: &Pose, face: FaceId) -> Vec3 {
    pose.orientation.rotate(face.local_normal()).normalized()
}
