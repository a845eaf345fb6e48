//! Random grasp instances and an exact LP feasibility oracle shared by the
//! force-solver tests.

use cubegrasp_core::geom::{contact_point_local, face_normal_world, ContactSpec, CubeGeometry, FaceId, Pose, UnitQuat, Vec3};
use cubegrasp_core::grasp::{desired_wrench, CubeGains, CubeReference, WrenchTarget};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

const G: Vec3 = Vec3::new(0.0, 0.0, -9.81);

pub struct Instance {
    pub contacts: Vec<Vec3>,
    pub normals: Vec<Vec3>,
    pub com: Vec3,
    pub w: WrenchTarget,
    pub mu: f64,
}

pub fn three_contact_instance(rng: &mut ChaCha8Rng) -> Instance {
    let edge = rng.gen_range(0.04..0.09);
    let mass = rng.gen_range(0.05..0.3);
    let cube = CubeGeometry::solid(edge, mass, 0.8);
    let pose = Pose::new(
        Vec3::new(rng.gen_range(-0.1..0.1), rng.gen_range(-0.1..0.1), rng.gen_range(0.03..0.15)),
        UnitQuat::from_yaw(rng.gen_range(-3.14..3.14)),
    );
    let skip = rng.gen_range(0..4);
    let faces: Vec<FaceId> = FaceId::SIDES.iter().copied().enumerate().filter(|(i, _)| *i != skip).map(|(_, f)| f).collect();
    let mut contacts = Vec::new();
    let mut normals = Vec::new();
    for f in faces {
        let spec = ContactSpec::new(f, rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)).unwrap();
        contacts.push(pose.transform_point(contact_point_local(&cube, &spec)));
        normals.push(-face_normal_world(&pose, f));
    }
    // gravity compensation plus a small tracking correction
    let reference = CubeReference {
        pose: Pose::new(
            pose.position + Vec3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)) * 0.002,
            pose.orientation.compose(&UnitQuat::from_yaw(rng.gen_range(-0.02..0.02))),
        ),
        linvel: Vec3::ZERO,
        linacc: Vec3::ZERO,
    };
    let w = desired_wrench(&pose, Vec3::ZERO, Vec3::ZERO, &reference, &cube, G, &CubeGains::default());
    Instance {
        contacts,
        normals,
        com: pose.position,
        w,
        mu: rng.gen_range(0.5..1.0),
    }
}

/// Phase-one simplex (Bland's rule) for `A x = b, x >= 0` with `b >= 0`.
/// Returns the minimal sum of artificial variables; zero means feasible.
pub fn phase_one(a: &[Vec<f64>], b: &[f64]) -> f64 {
    let m = a.len();
    let n = a[0].len();
    // tableau columns: n originals, m artificials, rhs
    let w = n + m + 1;
    let mut t = vec![vec![0.0; w]; m + 1];
    for i in 0..m {
        t[i][..n].copy_from_slice(&a[i]);
        t[i][n + i] = 1.0;
        t[i][w - 1] = b[i];
    }
    for j in 0..w {
        if j >= n && j < n + m {
            continue;
        }
        t[m][j] = -(0..m).map(|i| t[i][j]).sum::<f64>();
    }
    let mut basis: Vec<usize> = (n..n + m).collect();
    for _ in 0..10_000 {
        let Some(enter) = (0..n + m).find(|&j| t[m][j] < -1e-12) else {
            break;
        };
        let mut leave: Option<usize> = None;
        let mut best = f64::INFINITY;
        for i in 0..m {
            if t[i][enter] > 1e-12 {
                let ratio = t[i][w - 1] / t[i][enter];
                let tie = (ratio - best).abs() <= 1e-15;
                if ratio < best - 1e-15 || (tie && leave.is_some_and(|l| basis[i] < basis[l])) {
                    best = ratio;
                    leave = Some(i);
                }
            }
        }
        let Some(r) = leave else {
            break;
        };
        let piv = t[r][enter];
        for v in t[r].iter_mut() {
            *v /= piv;
        }
        for i in 0..=m {
            if i != r {
                let f = t[i][enter];
                if f != 0.0 {
                    for j in 0..w {
                        t[i][j] -= f * t[r][j];
                    }
                }
            }
        }
        basis[r] = enter;
    }
    -t[m][w - 1]
}

/// Exact feasibility of `G f = w` over the pyramids via a linear program.
/// Per contact `f = n fn + t1 (p1 - q1) + t2 (p2 - q2)` with
/// `p1 + q1 <= c fn`, `p2 + q2 <= c fn`, `fn <= f_max`, everything nonnegative.
/// Returns the phase-one optimum on unit-scaled rows.
pub fn feasibility_oracle(inst: &Instance, f_max: f64) -> f64 {
    let k = inst.contacts.len();
    let c = inst.mu / 2f64.sqrt();
    // variables per contact: fn p1 q1 p2 q2, then 3 slacks per contact
    let nv = 5 * k + 3 * k;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut rhs = Vec::new();
    let wv = inst.w.to_array();
    let mut eq = vec![vec![0.0; nv]; 6];
    for (i, (p, n)) in inst.contacts.iter().zip(&inst.normals).enumerate() {
        let t1 = n.cross(Vec3::Z).normalized();
        let t2 = n.cross(t1);
        let r = *p - inst.com;
        for (d, dir) in [*n, t1, -t1, t2, -t2].iter().enumerate() {
            let tq = r.cross(*dir);
            let col = [dir.x, dir.y, dir.z, tq.x, tq.y, tq.z];
            for row in 0..6 {
                eq[row][5 * i + d] = col[row];
            }
        }
    }
    for row in 0..6 {
        let scale = eq[row].iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let sign = if wv[row] < 0.0 { -1.0 } else { 1.0 } / scale;
        rows.push(eq[row].iter().map(|v| v * sign).collect());
        rhs.push(wv[row] * sign);
    }
    for i in 0..k {
        let s0 = 5 * k + 3 * i;
        for (pair, slack) in [((1, 2), s0), ((3, 4), s0 + 1)] {
            let mut r = vec![0.0; nv];
            r[5 * i + pair.0] = 1.0;
            r[5 * i + pair.1] = 1.0;
            r[5 * i] = -c;
            r[slack] = 1.0;
            rows.push(r);
            rhs.push(0.0);
        }
        let mut r = vec![0.0; nv];
        r[5 * i] = 1.0;
        r[s0 + 2] = 1.0;
        rows.push(r);
        rhs.push(f_max);
    }
    phase_one(&rows, &rhs)
}
