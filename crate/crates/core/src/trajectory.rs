//! Rest-to-rest quintic time scaling and straight-line timed paths.

use thiserror::Error;

use crate::geom::Vec3;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TrajectoryError {
    #[error("duration must be positive and finite, got {0}")]
    BadDuration(f64),
    #[error("displacement must be finite, got {0}")]
    BadDisplacement(f64),
}

/// Coefficients of `s(t) = a0 + a1 t + ... + a5 t^5` valid on `[0, duration]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuinticCoeffs {
    pub a: [f64; 6],
    pub duration: f64,
}

/// Position, velocity and acceleration of a scalar profile.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ScalarState {
    pub s: f64,
    pub sdot: f64,
    pub sddot: f64,
}

/// Quintic with `s(0)=s'(0)=s''(0)=s'(T)=s''(T)=0` and `s(T)=n`.
pub fn quintic_coeffs(n: f64, duration: f64) -> Result<QuinticCoeffs, TrajectoryError> {
    if !(duration > 0.0) || !duration.is_finite() {
        return Err(TrajectoryError::BadDuration(duration));
    }
    if !n.is_finite() {
        return Err(TrajectoryError::BadDisplacement(n));
    }
    let t3 = duration.powi(3);
    let t4 = t3 * duration;
    let t5 = t4 * duration;
    Ok(QuinticCoeffs {
        a: [0.0, 0.0, 0.0, 10.0 * n / t3, -15.0 * n / t4, 6.0 * n / t5],
        duration,
    })
}

/// Evaluates the profile; times outside `[0, T]` are clamped to the endpoints.
pub fn eval_quintic(c: &QuinticCoeffs, t: f64) -> ScalarState {
    let t = t.clamp(0.0, c.duration);
    let a = &c.a;
    let s = a[0] + t * (a[1] + t * (a[2] + t * (a[3] + t * (a[4] + t * a[5]))));
    let sdot = a[1] + t * (2.0 * a[2] + t * (3.0 * a[3] + t * (4.0 * a[4] + t * 5.0 * a[5])));
    let sddot = 2.0 * a[2] + t * (6.0 * a[3] + t * (12.0 * a[4] + t * 20.0 * a[5]));
    ScalarState { s, sdot, sddot }
}

/// Cartesian position, velocity and acceleration at one instant.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PathSample {
    pub position: Vec3,
    pub velocity: Vec3,
    pub acceleration: Vec3,
}

/// How the scalar path parameter is scaled.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PathScaling {
    /// `s` runs over `[0, 1]`; positions are `start + s (end - start)`.
    Normalized,
    /// `s` runs over `[0, |end - start|]` in meters along the unit direction.
    Metric,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimedPath3 {
    pub start: Vec3,
    pub end: Vec3,
    pub duration: f64,
    pub coeffs: QuinticCoeffs,
    pub scaling: PathScaling,
}

/// Straight segment `p0 -> p1` with normalized quintic time scaling.
pub fn point_to_point(p0: Vec3, p1: Vec3, duration: f64) -> Result<TimedPath3, TrajectoryError> {
    point_to_point_scaled(p0, p1, duration, PathScaling::Normalized)
}

pub fn point_to_point_scaled(
    p0: Vec3,
    p1: Vec3,
    duration: f64,
    scaling: PathScaling,
) -> Result<TimedPath3, TrajectoryError> {
    let n = match scaling {
        PathScaling::Normalized => 1.0,
        PathScaling::Metric => (p1 - p0).norm(),
    };
    Ok(TimedPath3 {
        start: p0,
        end: p1,
        duration,
        coeffs: quintic_coeffs(n, duration)?,
        scaling,
    })
}

impl TimedPath3 {
    /// A path that stays at `p` for `duration` seconds.
    pub fn stationary(p: Vec3, duration: f64) -> Result<TimedPath3, TrajectoryError> {
        point_to_point(p, p, duration)
    }

    fn direction(&self) -> Vec3 {
        let d = self.end - self.start;
        match self.scaling {
            PathScaling::Normalized => d,
            PathScaling::Metric => d.normalized(),
        }
    }

    pub fn sample(&self, t: f64) -> PathSample {
        let st = eval_quintic(&self.coeffs, t);
        let d = self.direction();
        PathSample {
            position: self.start + d * st.s,
            velocity: d * st.sdot,
            acceleration: d * st.sddot,
        }
    }

    pub fn is_finished(&self, t: f64) -> bool {
        t >= self.duration
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn unit_coefficients() {
        let c = quintic_coeffs(1.0, 1.0).unwrap();
        assert_eq!(c.a, [0.0, 0.0, 0.0, 10.0, -15.0, 6.0]);
        let z = quintic_coeffs(0.0, 2.0).unwrap();
        assert!(z.a.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn rejects_bad_duration() {
        assert!(quintic_coeffs(1.0, 0.0).is_err());
        assert!(quintic_coeffs(1.0, -1.0).is_err());
        assert!(quintic_coeffs(1.0, f64::NAN).is_err());
        assert!(quintic_coeffs(f64::INFINITY, 1.0).is_err());
        assert!(point_to_point(Vec3::ZERO, Vec3::X, 0.0).is_err());
    }

    #[test]
    fn eval_examples() {
        let c = quintic_coeffs(1.0, 1.0).unwrap();
        let end = eval_quintic(&c, 1.0);
        assert_abs_diff_eq!(end.s, 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(end.sdot, 0.0, epsilon = 1e-14);
        assert_abs_diff_eq!(end.sddot, 0.0, epsilon = 1e-13);
        let mid = eval_quintic(&c, 0.5);
        assert_abs_diff_eq!(mid.s, 0.5, epsilon = 1e-15);
        // peak speed 15 n / (8 T)
        assert_abs_diff_eq!(mid.sdot, 1.875, epsilon = 1e-15);
        let h = 1e-5;
        let fd = (eval_quintic(&c, 0.5 + h).s - eval_quintic(&c, 0.5 - h).s) / (2.0 * h);
        assert_abs_diff_eq!(fd, 1.875, epsilon = 1e-8);
        assert_eq!(eval_quintic(&c, -3.0), eval_quintic(&c, 0.0));
        assert_eq!(eval_quintic(&c, 7.0), eval_quintic(&c, 1.0));
    }

    #[test]
    fn point_to_point_examples() {
        let p = point_to_point(Vec3::ZERO, Vec3::Z, 1.0).unwrap();
        assert_abs_diff_eq!(p.sample(0.5).position.z, 0.5, epsilon = 1e-15);

        let still = point_to_point(Vec3::ZERO, Vec3::ZERO, 1.0).unwrap();
        for i in 0..=10 {
            let s = still.sample(i as f64 * 0.1);
            assert_eq!(s.position, Vec3::ZERO);
            assert_eq!(s.velocity, Vec3::ZERO);
        }

        let diag = point_to_point(Vec3::X, Vec3::Y, 2.0).unwrap();
        let m = diag.sample(1.0).position;
        assert!((m - Vec3::new(0.5, 0.5, 0.0)).max_abs() < 1e-15);
        let end = diag.sample(2.0);
        assert_eq!(end.position, Vec3::Y);
        assert!(end.velocity.max_abs() < 1e-14 && end.acceleration.max_abs() < 1e-13);
    }

    #[test]
    fn metric_scaling_matches_normalized() {
        let a = Vec3::new(0.1, -0.2, 0.3);
        let b = Vec3::new(-0.4, 0.5, 0.05);
        let n = point_to_point(a, b, 1.7).unwrap();
        let m = point_to_point_scaled(a, b, 1.7, PathScaling::Metric).unwrap();
        for i in 0..=17 {
            let t = i as f64 * 0.1;
            let (x, y) = (n.sample(t), m.sample(t));
            assert!((x.position - y.position).max_abs() < 1e-14);
            assert!((x.velocity - y.velocity).max_abs() < 1e-13);
            assert!((x.acceleration - y.acceleration).max_abs() < 1e-12);
        }
    }
}
