use cubegrasp_core::geom::Vec3;
use cubegrasp_core::trajectory::{eval_quintic, point_to_point, quintic_coeffs, QuinticCoeffs};
use nalgebra::{Matrix6, Vector6};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};

/// Solves the six boundary conditions directly.
fn oracle(n: f64, t: f64) -> [f64; 6] {
    let row_pos = |x: f64| [1.0, x, x * x, x.powi(3), x.powi(4), x.powi(5)];
    let row_vel = |x: f64| [0.0, 1.0, 2.0 * x, 3.0 * x * x, 4.0 * x.powi(3), 5.0 * x.powi(4)];
    let row_acc = |x: f64| [0.0, 0.0, 2.0, 6.0 * x, 12.0 * x * x, 20.0 * x.powi(3)];
    let rows = [row_pos(0.0), row_vel(0.0), row_acc(0.0), row_pos(t), row_vel(t), row_acc(t)];
    let a = Matrix6::from_fn(|i, j| rows[i][j]);
    let b = Vector6::new(0.0, 0.0, 0.0, n, 0.0, 0.0);
    let x = a.lu().solve(&b).expect("boundary system is regular");
    std::array::from_fn(|i| x[i])
}

fn boundary_errors(c: &QuinticCoeffs, n: f64) -> [f64; 6] {
    let (a, b) = (eval_quintic(c, 0.0), eval_quintic(c, c.duration));
    [a.s, a.sdot, a.sddot, b.s - n, b.sdot, b.sddot].map(f64::abs)
}

#[test]
fn closed_form_matches_linear_solve() {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
    for _ in 0..100 {
        let n = rng.gen_range(-10.0..=10.0);
        let t = rng.gen_range(0.1..=10.0);
        let c = quintic_coeffs(n, t).unwrap();
        let o = oracle(n, t);
        for (k, (x, y)) in c.a.iter().zip(o).enumerate() {
            assert!((x - y).abs() <= 1e-9 * (1.0 + y.abs()), "n={n} T={t} a{k}: {x} vs {y}");
        }
    }
}

#[test]
fn unit_case_and_degenerate_case() {
    let o = oracle(1.0, 1.0);
    let c = quintic_coeffs(1.0, 1.0).unwrap();
    for (x, y) in c.a.iter().zip(o.iter()) {
        assert!((x - y).abs() < 1e-12);
    }
    assert_eq!(quintic_coeffs(0.0, 2.0).unwrap().a, [0.0; 6]);
    assert!((eval_quintic(&c, 0.5).s - 0.5).abs() < 1e-15);
    assert!((eval_quintic(&c, 0.5).sdot - 1.875).abs() < 1e-12);
}

#[test]
fn midpoint_of_diagonal_segment() {
    let p = point_to_point(Vec3::new(1.0, 0.0, 0.0), Vec3::new(0.0, 1.0, 0.0), 2.0).unwrap();
    let m = p.sample(1.0).position;
    assert!((m - Vec3::new(0.5, 0.5, 0.0)).norm() < 1e-12);
    let still = point_to_point(Vec3::ZERO, Vec3::ZERO, 1.0).unwrap();
    for k in 0..=10 {
        let s = still.sample(k as f64 / 10.0);
        assert_eq!(s.position, Vec3::ZERO);
        assert_eq!(s.velocity, Vec3::ZERO);
    }
}

proptest! {
    #[test]
    fn boundary_conditions_hold(n in -10.0..=10.0f64, t in 0.1..=10.0f64) {
        let c = quintic_coeffs(n, t).unwrap();
        for (k, e) in boundary_errors(&c, n).iter().enumerate() {
            prop_assert!(*e <= 1e-9, "condition {} off by {}", k, e);
        }
    }

    #[test]
    fn positive_displacement_is_monotone(n in 1e-3..=10.0f64, t in 0.1..=10.0f64) {
        let c = quintic_coeffs(n, t).unwrap();
        let mut prev = eval_quintic(&c, 0.0).s;
        for k in 1..=1000 {
            let s = eval_quintic(&c, t * k as f64 / 1000.0);
            prop_assert!(s.sdot >= -1e-12);
            prop_assert!(s.s >= prev - 1e-12);
            prev = s.s;
        }
    }

    #[test]
    fn derivatives_match_finite_differences(n in -10.0..=10.0f64, t in 0.1..=10.0f64, frac in 0.05..0.95f64) {
        let c = quintic_coeffs(n, t).unwrap();
        let x = frac * t;
        let h = 1e-5 * t;
        let at = |y: f64| eval_quintic(&c, y);
        let fd_v = (at(x + h).s - at(x - h).s) / (2.0 * h);
        let fd_a = (at(x + h).sdot - at(x - h).sdot) / (2.0 * h);
        let scale_v = n.abs() / t;
        let scale_a = n.abs() / (t * t);
        prop_assert!((fd_v - at(x).sdot).abs() <= 1e-6 * (scale_v + 1e-12), "{} vs {}", fd_v, at(x).sdot);
        prop_assert!((fd_a - at(x).sddot).abs() <= 1e-6 * (scale_a + 1e-12), "{} vs {}", fd_a, at(x).sddot);
    }

    #[test]
    fn queries_outside_clamp(n in -10.0..=10.0f64, t in 0.1..=10.0f64, early in 0.0..100.0f64) {
        let c = quintic_coeffs(n, t).unwrap();
        prop_assert_eq!(eval_quintic(&c, -early), eval_quintic(&c, 0.0));
        prop_assert_eq!(eval_quintic(&c, t + early), eval_quintic(&c, t));
    }

    #[test]
    fn segment_samples_are_collinear(
        a in prop::array::uniform3(-1.0..1.0f64),
        b in prop::array::uniform3(-1.0..1.0f64),
        t in 0.1..=10.0f64,
        frac in 0.0..=1.0f64,
    ) {
        let (p0, p1) = (Vec3::from_slice(&a), Vec3::from_slice(&b));
        let path = point_to_point(p0, p1, t).unwrap();
        let s = path.sample(frac * t);
        let d = p1 - p0;
        let off = (s.position - p0).cross(d).norm() / d.norm().max(1e-12);
        prop_assert!(off <= 1e-9);
        prop_assert!((path.sample(0.0).position - p0).norm() <= 1e-12);
        prop_assert!((path.sample(t).position - p1).norm() <= 1e-12);
        prop_assert!(path.sample(t).velocity.norm() <= 1e-9 && path.sample(t).acceleration.norm() <= 1e-9);
    }

    #[test]
    fn non_positive_duration_rejected(t in -10.0..=0.0f64) {
        prop_assert!(quintic_coeffs(1.0, t).is_err());
        prop_assert!(point_to_point(Vec3::ZERO, Vec3::X, t).is_err());
    }
}
