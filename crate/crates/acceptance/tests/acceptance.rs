//! One line per criterion, then a non-zero exit if any failed.

#[path = "../../core/tests/oracle/dh.rs"]
mod dh;

use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use teleop_client::{run_latency_bench, HttpClient};
use teleop_core::accuracy::{run_accuracy_bench, AccuracyBenchConfig};
use teleop_core::bench::{run_grasp_bench, sample_object};
use teleop_core::kinematics::{forward_kinematics, inverse_kinematics, jacobian, tool_isometry, IkParams, KinematicModel};
use teleop_core::scenario::Scenario;
use teleop_core::wire::{decode_angle, decode_scaled, encode_angle, encode_scaled, Mode, ScaleConfig};
use teleop_core::world::{in_perception_volume, perceive, Command, Detection, Perception, World, WorldConfig};
use teleop_core::RobotKind;
use teleop_service::{Bridge, BridgeConfig};

type Check<'a> = Box<dyn Fn() -> Outcome + 'a>;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn oracle(kind: RobotKind, q: &[f64]) -> dh::Mat4 {
    match kind {
        RobotKind::Ur5 => dh::ur5_fk(q),
        RobotKind::Panda => dh::panda_fk(q),
    }
}

fn library(model: &KinematicModel, q: &[f64]) -> dh::Mat4 {
    let h = tool_isometry(model, q).unwrap().to_homogeneous();
    let mut m = [[0.0; 4]; 4];
    for (i, row) in m.iter_mut().enumerate() {
        for (j, v) in row.iter_mut().enumerate() {
            *v = h[(i, j)];
        }
    }
    m
}

fn random_q(model: &KinematicModel, rng: &mut impl Rng) -> Vec<f64> {
    model.limits().iter().map(|(lo, hi)| rng.gen_range(*lo..=*hi)).collect()
}

fn codec() -> Outcome {
    let start = Instant::now();
    let angles_ok = (-180..=180).all(|d| encode_angle(d).and_then(decode_angle) == Ok(d));
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst = [0.0f64; 2];
    for (k, cfg) in [ScaleConfig::CENTI, ScaleConfig::MILLI].into_iter().enumerate() {
        let scale = f64::from(cfg.scale());
        for _ in 0..100_000 {
            let r: f64 = rng.gen_range(-9.99..9.99);
            let back = decode_scaled(encode_scaled(r, cfg).unwrap(), cfg).unwrap();
            worst[k] = worst[k].max((back - r).abs() * scale);
        }
    }
    let elapsed = start.elapsed();
    outcome(
        angles_ok && worst.iter().all(|w| *w <= 0.5 + 1e-9) && elapsed < Duration::from_secs(1),
        format!(
            "361 angles {}, worst scaled error {:.4}/{:.4} steps (limit 0.5), {:?}",
            if angles_ok { "exact" } else { "MISMATCH" },
            worst[0],
            worst[1],
            elapsed
        ),
    )
}

fn fk_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let (mut dp, mut dr) = (0.0f64, 0.0f64);
    for kind in RobotKind::ALL {
        let model = KinematicModel::builtin(kind);
        let mut configs = vec![model.home().0.clone()];
        configs.extend((0..20).map(|_| random_q(&model, &mut rng)));
        for q in configs {
            let (a, b) = (library(&model, &q), oracle(kind, &q));
            dp = dp.max(dh::position_distance(&a, &b));
            dr = dr.max(dh::rotation_distance(&a, &b));
        }
    }
    outcome(dp <= 1e-6 && dr <= 1e-6, format!("max {dp:.2e} m, {dr:.2e} rad over 2 x 21 poses"))
}

fn ik() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let params = IkParams::default();
    let mut parts = vec![];
    let mut pass = true;
    for kind in RobotKind::ALL {
        let model = KinematicModel::builtin(kind);
        let mut solved = 0;
        for _ in 0..100 {
            let q = random_q(&model, &mut rng);
            let target = forward_kinematics(&model, &q).unwrap();
            let r = inverse_kinematics(&model, &target, model.home(), &params).unwrap();
            let (a, b) = (library(&model, &r.q), oracle(kind, &q));
            if r.converged()
                && dh::position_distance(&a, &b) <= 1e-3
                && dh::rotation_distance(&a, &b) <= 0.5f64.to_radians()
            {
                solved += 1;
            }
        }
        pass &= solved >= 95;
        parts.push(format!("{kind} {solved}/100"));
    }
    let elapsed = start.elapsed();
    pass &= elapsed < Duration::from_secs(30);
    outcome(pass, format!("{} solved (need 95), {elapsed:?}", parts.join(", ")))
}

fn jacobian_fd() -> Outcome {
    let h = 1e-6;
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst = 0.0f64;
    for kind in RobotKind::ALL {
        let model = KinematicModel::builtin(kind);
        for _ in 0..50 {
            let q = random_q(&model, &mut rng);
            let j = jacobian(&model, &q).unwrap();
            for col in 0..q.len() {
                let (mut qp, mut qm) = (q.clone(), q.clone());
                qp[col] += h;
                qm[col] -= h;
                let (tp, tm) = (oracle(kind, &qp), oracle(kind, &qm));
                let (pp, pm) = (dh::position(&tp), dh::position(&tm));
                let w = dh::rotation_vector_between(&tm, &tp);
                for r in 0..3 {
                    worst = worst.max((j[(r, col)] - (pp[r] - pm[r]) / (2.0 * h)).abs());
                    worst = worst.max((j[(r + 3, col)] - w[r] / (2.0 * h)).abs());
                }
            }
        }
    }
    outcome(worst <= 1e-4, format!("max component error {worst:.2e} over 2 x 50 configurations"))
}

fn joint_modes(scenario: &Scenario) -> Outcome {
    let r = run_accuracy_bench(scenario, &AccuracyBenchConfig::default()).unwrap();
    let mut pass = r.joint_modes.len() == 2;
    let mut parts = vec![];
    for m in &r.joint_modes {
        pass &= matches!(m.mode, Mode::Joints | Mode::Tilt) && m.accuracy.mae <= 1e-4 && m.accuracy.std_dev <= 1e-4;
        parts.push(format!(
            "{:?} n={} MAE {:.2e} std {:.2e} rad",
            m.mode, m.accuracy.samples, m.accuracy.mae, m.accuracy.std_dev
        ));
    }
    outcome(pass, parts.join("; "))
}

fn pose_quantization(scenario: &Scenario) -> Outcome {
    let mut pass = true;
    let mut parts = vec![];
    for (cfg, limit) in [(ScaleConfig::CENTI, 0.01), (ScaleConfig::MILLI, 0.001)] {
        let r = run_accuracy_bench(
            scenario,
            &AccuracyBenchConfig {
                scale: cfg,
                ..Default::default()
            },
        )
        .unwrap();
        pass &= !r.pose_samples.is_empty() && r.pose_max_error <= limit;
        parts.push(format!(
            "scale {}: max {:.2e} m (limit {limit}) over {} targets, {} unreachable",
            cfg.scale(),
            r.pose_max_error,
            r.pose_samples.len(),
            r.pose_unreachable
        ));
    }
    outcome(pass, parts.join("; "))
}

fn grasp(scenario: &Scenario) -> Outcome {
    let a = run_grasp_bench(scenario, 40, scenario.seed).unwrap();
    let b = run_grasp_bench(scenario, 40, scenario.seed).unwrap();
    let same = a == b;
    let f = a.success_fraction;
    outcome(
        same && (0.45..=1.0).contains(&f),
        format!(
            "{}/{} placed, fraction {f:.3} (band [0.45, 1.0], reference 0.55), repeat run {}",
            a.successes,
            a.trials - a.stopped,
            if same { "identical" } else { "DIFFERENT" }
        ),
    )
}

fn perception(scenario: &Scenario) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut violations = 0;
    let mut detections = 0;
    for _ in 0..200 {
        let mut scene = scenario.world.scene.clone();
        scene.objects.clear();
        for i in 0..6u32 {
            let robot = RobotKind::ALL[i as usize % 2];
            let mut o = sample_object(&scene, &scenario.trials, robot, &mut rng).unwrap();
            o.id = i + 1;
            if rng.gen_bool(0.3) {
                o.position.z = o.shape.height() / 2.0;
                o.support = Some(0.0);
            }
            scene.objects.push(o);
        }
        let w = World::new(WorldConfig {
            scene: scene.clone(),
            ..scenario.world.clone()
        })
        .unwrap();
        let Perception::Batch(batch) = perceive(&scene, &w.link_origins(), 0.0, None) else {
            unreachable!()
        };
        let cam = scene.camera.origin();
        for d in &batch {
            detections += 1;
            let supported = d
                .object_id()
                .is_none_or(|id| scene.object(id).and_then(|o| o.support).is_some_and(|s| s >= 0.5));
            if (d.centroid - cam).norm() > 1.85 || d.centroid.z < 0.5 || !in_perception_volume(&scene, &d.centroid) || !supported {
                violations += 1;
            }
        }
    }

    let mut w = World::new(scenario.world.clone()).unwrap();
    w.apply(&Command::GraspStart { robot: RobotKind::Ur5 });
    let mut times = vec![];
    let mut spurious = 0;
    for _ in 0..30_000 {
        if let Some(batch) = w.step(scenario.dt).perception {
            times.push(w.time());
            spurious += batch.iter().filter(|d| d.detection == Detection::Spurious).count();
        }
    }
    let min_gap = times.windows(2).map(|p| p[1] - p[0]).fold(f64::INFINITY, f64::min);
    outcome(
        violations == 0 && min_gap >= 5.0 - 1e-9 && spurious >= 1,
        format!(
            "{violations} violations in {detections} detections; min batch gap {min_gap:.3} s; {spurious} spurious from arm links"
        ),
    )
}

fn latency(rt: &tokio::runtime::Runtime) -> Outcome {
    rt.block_on(async {
        let bridge = Bridge::start(BridgeConfig::loopback(Scenario::default())).await.unwrap();
        let http = HttpClient::for_addr(bridge.http_addr().unwrap());
        let r = run_latency_bench(bridge.wire_addr(), Some(&http), 1000).await.unwrap();
        bridge.shutdown().await;
        let processing = r.bridge_processing.unwrap_or(f64::INFINITY);
        outcome(
            r.one_way <= 16.4 && processing <= 2.0,
            format!(
                "one-way {:.4} ms (limit 16.4), p99 rtt {:.4} ms, bridge processing {processing:.4} ms (limit 2)",
                r.one_way, r.rtt_p99
            ),
        )
    })
}

fn real_time_factor(rt: &tokio::runtime::Runtime) -> Outcome {
    rt.block_on(async {
        let scenario = Scenario::default();
        assert_eq!(scenario.dt, 0.001);
        let bridge = Bridge::start(BridgeConfig::loopback(scenario)).await.unwrap();
        let mut client = teleop_client::BridgeClient::connect(bridge.wire_addr()).await.unwrap();
        // keep both arms busy with autonomous runs while measuring
        client
            .send_all(
                &["5000 1", "4004 1", "1001 1", "5001 1", "4004 1", "1001 1"]
                    .map(|l| teleop_core::wire::WireFrame::parse_line(l).unwrap()),
            )
            .await
            .unwrap();
        tokio::time::sleep(Duration::from_secs(7)).await;
        let m = bridge.shutdown().await;
        let rtf = m.real_time_factor.unwrap_or(0.0);
        outcome(
            rtf >= 0.9,
            format!("{rtf:.3} over the last 5 s window, 2 arms, 1 ms ticks, {} ticks", m.ticks),
        )
    })
}

fn main() -> ExitCode {
    let scenario = Scenario::default();
    let rt = tokio::runtime::Builder::new_multi_thread().enable_all().build().unwrap();
    let criteria: Vec<(&str, Check)> = vec![
        ("codec exhaustiveness", Box::new(codec)),
        ("FK oracle", Box::new(fk_oracle)),
        ("IK self-consistency", Box::new(ik)),
        ("Jacobian vs finite differences", Box::new(jacobian_fd)),
        ("Mode-1/3 accuracy", Box::new(|| joint_modes(&scenario))),
        ("Mode-2 quantization", Box::new(|| pose_quantization(&scenario))),
        ("grasp benchmark", Box::new(|| grasp(&scenario))),
        ("perception properties", Box::new(|| perception(&scenario))),
        ("latency", Box::new(|| latency(&rt))),
        ("real-time factor", Box::new(|| real_time_factor(&rt))),
    ];
    let mut failed = 0;
    for (name, check) in &criteria {
        let o = check();
        println!("{} {name}: {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        failed += usize::from(!o.pass);
    }
    println!("acceptance: {} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
