//! One test per acceptance criterion. Each writes a single PASS/FAIL line
//! straight to stderr so the verdicts show up even for passing tests.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use cubegrasp_cli::files::{read_eval_set, read_text};
use cubegrasp_cli::{cmd_ablate, cmd_eval, cmd_train, load_config, AblationTable, CHECKPOINT_FILE, METRICS_FILE};
use cubegrasp_core::config::RunConfig;
use cubegrasp_core::control::{joint_pd_id, GainSet, Primitive};
use cubegrasp_core::env::{reward, GoalTrajectory, Waypoint};
use cubegrasp_core::geom::{CubeGeometry, UnitQuat, Vec3};
use cubegrasp_core::grasp::{
    constraint_violation, grasp_matrix, solve_contact_forces, FrictionPyramid, QpSettings, WrenchTarget,
};
use cubegrasp_core::kinematics::{RobotConfig, NUM_FINGERS, NUM_JOINTS};
use cubegrasp_core::sac::{Agent, Experience, SacConfig, UpdateNoise};
use cubegrasp_core::simulator::{SimConfig, Simulator, WorldState};
use cubegrasp_core::train::env_from_config;
use cubegrasp_core::trajectory::{eval_quintic, quintic_coeffs};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[path = "../../core/tests/support/grasp_lp.rs"]
mod grasp_lp;
use grasp_lp::{feasibility_oracle, three_contact_instance};

fn verdict(n: u32, name: &str, ok: bool, detail: &str) {
    let status = if ok { "PASS" } else { "FAIL" };
    let _ = writeln!(std::io::stderr(), "acceptance criterion {n} [{name}]: {status} ({detail})");
}

fn root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

#[test]
fn criterion_1_quintic_exactness() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let n = rng.gen_range(-10.0..=10.0);
        let t = rng.gen_range(0.1..=10.0);
        let c = quintic_coeffs(n, t).unwrap();
        let (a, b) = (eval_quintic(&c, 0.0), eval_quintic(&c, t));
        for e in [a.s, a.sdot, a.sddot, b.s - n, b.sdot, b.sddot] {
            worst = worst.max(e.abs());
        }
    }
    let secs = start.elapsed().as_secs_f64();
    let ok = worst <= 1e-9 && secs < 1.0;
    verdict(1, "quintic exactness", ok, &format!("worst boundary error {worst:.2e}, {secs:.4} s"));
    assert!(ok);
}

/// Brute force over the one-dimensional feasible set of a planar
/// two-contact problem.
fn planar_grid_oracle(contacts: &[Vec3; 2], normals: &[Vec3; 2], w: &WrenchTarget, mu: f64, f_max: f64, s: &QpSettings) -> f64 {
    let a = DMatrix::from_row_slice(
        3,
        4,
        &[
            1.0, 0.0, 1.0, 0.0,
            0.0, 1.0, 0.0, 1.0,
            contacts[0].z, -contacts[0].x, contacts[1].z, -contacts[1].x,
        ],
    );
    let b = DVector::from_row_slice(&[w.force.x, w.force.z, w.torque.y]);
    let fp = a.clone().svd(true, true).solve(&b, 1e-14).unwrap();
    let eig = nalgebra::SymmetricEigen::new(a.transpose() * &a);
    let imin = (0..4).min_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j])).unwrap();
    let d = eig.eigenvectors.column(imin).into_owned();
    let force = |t: f64, i: usize| {
        let x = &fp + &d * t;
        Vec3::new(x[2 * i], 0.0, x[2 * i + 1])
    };
    let c = mu / 2f64.sqrt();
    let (mut lo, mut hi) = (f64::NEG_INFINITY, f64::INFINITY);
    let mut clip = |g0: f64, g1: f64| {
        if g1 > 1e-14 {
            lo = lo.max(-g0 / g1);
        } else if g1 < -1e-14 {
            hi = hi.min(-g0 / g1);
        }
    };
    for i in 0..2 {
        let n = normals[i];
        let tg = n.cross(Vec3::Y);
        let (f0, f1) = (force(0.0, i), force(1.0, i) - force(0.0, i));
        clip(n.dot(f0), n.dot(f1));
        clip(f_max - n.dot(f0), -n.dot(f1));
        clip(c * n.dot(f0) - tg.dot(f0), c * n.dot(f1) - tg.dot(f1));
        clip(c * n.dot(f0) + tg.dot(f0), c * n.dot(f1) + tg.dot(f1));
    }
    let samples = 200 * 200;
    (0..samples)
        .map(|k| {
            let t = lo + (hi - lo) * k as f64 / (samples - 1) as f64;
            (0..2)
                .map(|i| {
                    let f = force(t, i);
                    f.norm_squared() + s.w_reg * (normals[i].dot(f) - s.f_ref).powi(2)
                })
                .sum::<f64>()
        })
        .fold(f64::INFINITY, f64::min)
}

#[test]
fn criterion_2_qp_soundness() {
    let start = Instant::now();
    let s = QpSettings::default();
    let f_max = 10.0;
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let (mut worst_res, mut worst_viol, mut failures) = (0.0f64, 0.0f64, 0);
    let (mut counted, mut false_successes) = (0, 0);
    while counted < 200 {
        let inst = three_contact_instance(&mut rng);
        let g = grasp_matrix(&inst.contacts, inst.com);
        let pyr = FrictionPyramid::new(inst.mu);
        let gap = feasibility_oracle(&inst, f_max);
        let res = solve_contact_forces(&g, &inst.normals, &inst.w, &pyr, f_max, &s);
        if gap > 1e-6 {
            false_successes += usize::from(res.is_ok());
            continue;
        }
        if gap > 1e-10 {
            continue;
        }
        counted += 1;
        match res {
            Ok(sol) => {
                worst_res = worst_res.max(sol.residual / (1.0 + inst.w.norm()));
                worst_viol = worst_viol.max(constraint_violation(&inst.normals, &sol.forces.forces, &pyr, f_max));
            }
            Err(_) => failures += 1,
        }
    }
    let mut worst_gap = f64::NEG_INFINITY;
    for _ in 0..50 {
        let h = rng.gen_range(0.02..0.05);
        let rot = UnitQuat::from_axis_angle(Vec3::Y, rng.gen_range(-0.4..0.4));
        let mut contacts = [Vec3::ZERO; 2];
        let mut normals = [Vec3::ZERO; 2];
        for (i, side) in [1.0, -1.0].into_iter().enumerate() {
            contacts[i] = rot.rotate(Vec3::new(side * h, 0.0, rng.gen_range(-0.6..0.6) * h));
            normals[i] = rot.rotate(Vec3::new(-side, 0.0, 0.0));
        }
        let mu = rng.gen_range(0.4..1.2);
        let c = mu / 2f64.sqrt();
        let mut w = WrenchTarget::default();
        for i in 0..2 {
            let fn_ = rng.gen_range(0.5..3.0);
            let f = normals[i] * fn_ + normals[i].cross(Vec3::Y) * (rng.gen_range(-0.9..0.9) * c * fn_);
            w.force += f;
            w.torque += contacts[i].cross(f);
        }
        let g = grasp_matrix(&contacts, Vec3::ZERO);
        match solve_contact_forces(&g, &normals, &w, &FrictionPyramid::new(mu), 5.0, &s) {
            Ok(sol) => {
                let oracle = planar_grid_oracle(&contacts, &normals, &w, mu, 5.0, &s);
                worst_gap = worst_gap.max(sol.objective - oracle);
            }
            Err(_) => failures += 1,
        }
    }
    let secs = start.elapsed().as_secs_f64();
    let ok = failures == 0 && false_successes == 0 && worst_res <= 1e-6 && worst_viol <= 1e-8 && worst_gap <= 1e-3 && secs < 30.0;
    verdict(
        2,
        "QP soundness",
        ok,
        &format!(
            "{failures} unsolved, {false_successes} infeasible accepted, worst relative residual {worst_res:.2e}, worst violation {worst_viol:.2e}, worst objective excess over grid {worst_gap:.2e}, {secs:.2} s"
        ),
    );
    assert!(ok);
}

#[test]
fn criterion_3_gradient_fidelity() {
    let start = Instant::now();
    let mut worst = 0.0f64;
    for seed in 0..3u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(30 + seed);
        let cfg = SacConfig {
            hidden: vec![4],
            output_init_scale: 0.5,
            ..SacConfig::default()
        };
        let agent = Agent::new(2, 1, cfg, &mut rng).unwrap();
        assert_eq!(agent.policy.net.sizes, vec![2, 4, 2]);
        let batch: Vec<Experience> = (0..8)
            .map(|i| Experience {
                s: vec![rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)],
                a: vec![rng.gen_range(-0.9..0.9)],
                r: rng.gen_range(0.0..1.0),
                s2: vec![rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)],
                done: i % 4 == 3,
            })
            .collect();
        let noise = UpdateNoise::sample(batch.len(), 1, &mut rng);
        let y = agent.critic_targets(&batch, &noise.next);
        let (_, g1, g2) = agent.critic_loss_grad(&batch, &y);
        let (_, gp, _) = agent.actor_loss_grad(&batch, &noise.current);
        let h = 1e-6;
        let mut check = |analytic: &[f64], params: &[f64], loss: &dyn Fn(Vec<f64>) -> f64| {
            for i in 0..params.len() {
                let mut p = params.to_vec();
                p[i] += h;
                let lp = loss(p.clone());
                p[i] -= 2.0 * h;
                let lm = loss(p);
                let fd = (lp - lm) / (2.0 * h);
                let err = (analytic[i] - fd).abs() / (analytic[i].abs().max(fd.abs()) + 1e-5);
                worst = worst.max(err);
            }
        };
        check(&g1, &agent.critics.q1.params, &|p| {
            let mut a = agent.clone();
            a.critics.q1.params = p;
            a.critic_loss_grad(&batch, &y).0
        });
        check(&g2, &agent.critics.q2.params, &|p| {
            let mut a = agent.clone();
            a.critics.q2.params = p;
            a.critic_loss_grad(&batch, &y).0
        });
        check(&gp, &agent.policy.net.params, &|p| {
            let mut a = agent.clone();
            a.policy.net.params = p;
            a.actor_loss_grad(&batch, &noise.current).0
        });
    }
    let secs = start.elapsed().as_secs_f64();
    let ok = worst <= 1e-4 && secs < 10.0;
    verdict(3, "gradient fidelity", ok, &format!("worst relative error {worst:.2e}, {secs:.3} s"));
    assert!(ok);
}

#[test]
fn criterion_4_reward_conformance() {
    let goal = Vec3::new(0.03, -0.01, 0.08);
    let at_goal = reward(goal, goal, 0.001, 300.0);
    let mut monotone = true;
    let mut prev = f64::INFINITY;
    for k in 0..100 {
        let d = 0.25 * k as f64 / 99.0;
        let r = reward(goal, goal + Vec3::new(0.6, -0.8, 0.0) * d, 0.001, 300.0);
        monotone &= r < prev;
        prev = r;
    }
    let ok = at_goal == 0.001 && monotone;
    verdict(4, "reward conformance", ok, &format!("r(0) = {at_goal:?}, strictly decreasing on grid: {monotone}"));
    assert!(ok);
}

fn hold(sim: &Simulator, st: &WorldState, robot: &RobotConfig) -> [f64; NUM_JOINTS] {
    let home = robot.home_joints();
    let models = sim.fingers();
    joint_pd_id(
        &st.joints,
        &home,
        &[0.0; NUM_JOINTS],
        None,
        &[Vec3::ZERO; NUM_FINGERS],
        models,
        &GainSet::default(),
        Some(sim.cfg.gravity),
        robot.torque_limit,
    )
}

#[test]
fn criterion_5_simulator_sanity() {
    let robot = RobotConfig::default();
    let sim = Simulator::new(SimConfig::default(), CubeGeometry::default(), robot.clone()).unwrap();
    let mut st = sim.resting_state(0.01, -0.02, 0.4);
    let start = st.cube_pose.position;
    let mut drift = 0.0f64;
    for _ in 0..5000 {
        st = sim.step(&st, &hold(&sim, &st, &robot)).unwrap();
        drift = drift.max((st.cube_pose.position - start).norm());
    }

    let cfg = SimConfig {
        floor_enabled: false,
        ..SimConfig::default()
    };
    assert_eq!(cfg.dt, 1e-3);
    let free = Simulator::new(cfg, CubeGeometry::default(), robot.clone()).unwrap();
    let mut st = free.resting_state(0.0, 0.0, 0.0);
    let z0 = 0.1;
    st.cube_pose.position.z = z0;
    let mut ballistic = 0.0f64;
    for k in 1..=140 {
        st = free.step(&st, &hold(&free, &st, &robot)).unwrap();
        let t = k as f64 * 1e-3;
        ballistic = ballistic.max((st.cube_pose.position.z - (z0 - 0.5 * 9.81 * t * t)).abs());
    }
    let ok = drift < 1e-3 && ballistic <= 1e-4;
    verdict(
        5,
        "simulator sanity",
        ok,
        &format!("resting drift {:.3} mm over 5 s, ballistic error {ballistic:.2e} m", drift * 1e3),
    );
    assert!(ok);
}

#[test]
fn criterion_6_scripted_lift() {
    let start = Instant::now();
    let cfg = RunConfig::default();
    let mut env = env_from_config(&cfg).unwrap();
    env.record_trace = true;
    let dt = env.control_dt();
    let mut successes = 0;
    let mut errors = Vec::new();
    for seed in 0..10u64 {
        let p = env.reset(seed).cube_position;
        let goal = p + Vec3::new(0.0, 0.0, 0.05);
        let goals = GoalTrajectory {
            waypoints: vec![Waypoint {
                position: goal,
                duration: 8.0,
            }],
        };
        env.reset_with_goals(seed, goals).unwrap();
        env.step(&[0.0; 6]).unwrap();
        let lift = env.trace.iter().position(|r| r.primitive == Primitive::Lift);
        let err = lift.and_then(|i| {
            let t = env.trace[i].time - dt + 3.0;
            env.trace
                .iter()
                .find(|r| r.time >= t - 1e-9)
                .map(|r| (r.cube_pose.position - goal).norm())
        });
        if let Some(e) = err {
            successes += usize::from(e < 0.02);
        }
        errors.push(err.map_or("none".to_string(), |e| format!("{:.1}", e * 1e3)));
    }
    let secs = start.elapsed().as_secs_f64();
    let ok = successes >= 9 && secs < 120.0;
    verdict(
        6,
        "scripted lift",
        ok,
        &format!("{successes}/10 seeds under 2 cm, errors in mm [{}], {secs:.1} s", errors.join(", ")),
    );
    assert!(ok);
}

/// Uses the committed training artifacts unless `CUBEGRASP_RETRAIN` is set,
/// in which case the committed config is trained and ablated from scratch.
#[test]
fn criterion_7_learning_effect() {
    let root = root();
    let cfg = load_config(&root.join("configs/default.cfg"), &[]).unwrap();
    let set = read_eval_set(&root.join("eval/set.txt")).unwrap();
    assert_eq!(set.len(), 20);
    let retrain = std::env::var_os("CUBEGRASP_RETRAIN").is_some();
    let scratch = tempfile::tempdir().unwrap();
    let (run_dir, table) = if retrain {
        let dir = scratch.path().join("train");
        cmd_train(&cfg, &dir, &mut |_| {}).unwrap();
        let table = cmd_ablate(&cfg, &[0, 1, 2], &set, &scratch.path().join("ablation"), false).unwrap();
        (dir, table)
    } else {
        let table = AblationTable::parse(&read_text(&root.join("artifacts/ablation.csv")).unwrap()).unwrap();
        (root.join("artifacts/runs/cp_seed0"), table)
    };

    let log = read_text(&run_dir.join(cubegrasp_cli::LOG_FILE)).unwrap();
    let wall: f64 = log
        .lines()
        .last()
        .and_then(|l| l.split_whitespace().nth(1))
        .and_then(|v| v.parse().ok())
        .unwrap_or(0.0);
    let text = read_text(&run_dir.join(CHECKPOINT_FILE)).unwrap();
    let (agent, echo) = Agent::from_checkpoint(&text, cfg.sac.clone()).unwrap();
    let same_config = echo == cfg.entries();
    let episodes = cubegrasp_cli::files::parse_metrics(&read_text(&run_dir.join(METRICS_FILE)).unwrap())
        .unwrap()
        .len();

    let tp = cmd_eval(&cfg, None, &set).unwrap().mean();
    let cp = cmd_eval(&cfg, Some(&agent), &set).unwrap().mean();
    let ratio = cp / tp;
    let ordered = table.seeds.len() == 3 && (0..3).all(|k| table.values[0][k] <= table.values[1][k]);
    let tp_consistent = table.values[0].iter().all(|v| (v - tp).abs() <= 1e-9);
    let per_seed: Vec<String> = (0..table.seeds.len())
        .map(|k| {
            format!(
                "seed {}: TP {:.4} TP+CP {:.4} TP+CP+DR {:.4}",
                table.seeds[k], table.values[0][k], table.values[1][k], table.values[2][k]
            )
        })
        .collect();
    let ok = same_config && wall <= 1800.0 && ratio >= 1.2 && ordered && tp_consistent;
    verdict(
        7,
        "learning effect",
        ok,
        &format!(
            "TP {tp:.4}, TP+CP {cp:.4}, ratio {ratio:.4} (needs 1.2); {episodes} training episodes in {wall:.0} s; checkpoint matches committed config: {same_config}; ablation ordering TP <= TP+CP on all seeds: {ordered}; {}",
            per_seed.join("; ")
        ),
    );
    assert!(ok);
}

#[test]
fn criterion_8_determinism() {
    let root = root();
    let overrides = ["train.episodes=4", "train.warmup_episodes=1", "sac.batch_size=8"].map(String::from);
    let cfg = load_config(&root.join("configs/default.cfg"), &overrides).unwrap();
    let d = tempfile::tempdir().unwrap();
    let (a, b) = (d.path().join("a"), d.path().join("b"));
    cmd_train(&cfg, &a, &mut |_| {}).unwrap();
    cmd_train(&cfg, &b, &mut |_| {}).unwrap();
    let ma = std::fs::read(a.join(METRICS_FILE)).unwrap();
    let mb = std::fs::read(b.join(METRICS_FILE)).unwrap();
    let rows = cubegrasp_cli::files::parse_metrics(std::str::from_utf8(&ma).unwrap()).unwrap();
    let updated = rows.iter().any(|r| r.critic_loss.is_some());
    let ok = ma == mb && updated;
    verdict(
        8,
        "determinism",
        ok,
        &format!("{} metric rows, byte-identical: {}, learning updates exercised: {updated}", rows.len(), ma == mb),
    );
    assert!(ok);
}
