//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any fail.
//!
//! Runs sequentially on the main thread so the realtime criteria do not
//! compete with other tests for the CPU.

use std::fs;
use std::path::Path;
use std::process::ExitCode;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::thread;
use std::time::{Duration, Instant};

use palpsim_cli::{
    bench_stats, cmd_classify, cmd_run, run_lockstep, ClassifyArgs, RunArgs, SeedList,
};
use palpsim_core::collision::probe_vs_mesh;
use palpsim_core::deform::{build_skeleton, spring_force, GelNode, GelSkeleton, SkeletonParams, SpringLink, Tether};
use palpsim_core::engine::{Engine, MachineInfo, Mode, SceneSetup, SimConfig, TimingStats};
use palpsim_core::geometry::{liver_mesh, TriMesh, Vec3};
use palpsim_core::haptics::{Backend, ProbeState, Trajectory, VirtualDevice, World, DEFAULT_PROBE_RADIUS};
use palpsim_core::pathology::{make_preset, Condition};
use palpsim_core::persistence::{load_scene, save_scene, save_setup, SceneDocument};
use palpsim_core::scenegraph::{Quat, Scene, SceneNode, Transform};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn liver_setup() -> SceneSetup {
    let spec = SceneSetup::default_liver().object_spec().unwrap();
    SceneSetup::with_mesh(spec.mesh, None)
}

fn press_over(setup: &SceneSetup, duration: f64, depth: f64) -> Trajectory {
    let top = setup.object_spec().unwrap().mesh.aabb().max.z;
    let (up, down) = (Vec3::new(0.0, 0.0, top + 0.01), Vec3::new(0.0, 0.0, top - depth));
    Trajectory::new(vec![(0.0, up), (duration * 0.5, down), (duration, up)]).unwrap()
}

// ---- haptic budget ----

fn haptic_budget() -> Outcome {
    let mut setup = SceneSetup::default_liver();
    setup.backend = Backend::Skeleton;
    let spec = setup.object_spec().map_err(|e| e.to_string())?;
    let tris = spec.mesh.triangle_count();
    let nodes = spec.skeleton.nodes;
    let s = bench_stats(&setup, 10.0, setup.skeleton.seed).map_err(|e| e.to_string())?;
    let m = &s.machine;
    check(
        tris <= 3200 && nodes == 128 && s.p99_step_s < 1e-3 && s.achieved_haptic_rate_hz >= 990.0,
        format!(
            "{tris} tris, {nodes} nodes, p99 {:.3} ms, max {:.3} ms, rate {:.1} Hz, skipped {}; machine {} {} {} cpu(s) {}",
            s.p99_step_s * 1e3,
            s.max_step_s * 1e3,
            s.achieved_haptic_rate_hz,
            s.skipped_deadlines,
            m.os,
            m.arch,
            m.cpus,
            m.cpu_model
        ),
    )
}

// ---- integrator ----

/// Closed-form underdamped oscillator `m x'' = -k x - c x'`, x(0) = x0, x'(0) = 0.
fn damped_oscillator(m: f64, k: f64, c: f64, x0: f64, t: f64) -> f64 {
    let w0 = (k / m).sqrt();
    let zeta = c / (2.0 * (k * m).sqrt());
    let wd = w0 * (1.0 - zeta * zeta).sqrt();
    x0 * (-zeta * w0 * t).exp() * ((wd * t).cos() + zeta * w0 / wd * (wd * t).sin())
}

fn node(position: Vec3, mass: f64, anchored: bool) -> GelNode {
    GelNode {
        position,
        velocity: Vec3::ZERO,
        mass,
        radius: 0.001,
        anchored,
    }
}

fn integrator() -> Outcome {
    let (m, ks, kd, x0, l0, dt) = (0.01, 300.0, 0.2, 0.01, 0.05, 1e-3);
    let link = SpringLink {
        i: 0,
        j: 1,
        rest_length: l0,
        ks,
        kd,
    };
    let mut skel = GelSkeleton::from_parts(
        vec![node(Vec3::ZERO, 1.0, true), node(Vec3::new(l0 + x0, 0.0, 0.0), m, false)],
        vec![link],
    )
    .map_err(|e| e.to_string())?;
    let mut worst: f64 = 0.0;
    for n in 1..=1000 {
        skel.step(dt, &[Vec3::ZERO; 2], Vec3::ZERO).map_err(|e| e.to_string())?;
        let x = skel.nodes[1].position.x - l0;
        worst = worst.max((x - damped_oscillator(m, ks, kd, x0, n as f64 * dt)).abs());
    }
    check(worst < 0.01 * x0, format!("max error {:.4}% of x0", 100.0 * worst / x0))
}

// ---- force linearity ----

fn slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

fn force_linearity() -> Outcome {
    let mut worst: f64 = 0.0;
    let mut faces_tested = 0;
    for condition in Condition::ALL {
        let mut setup = liver_setup();
        setup.preset = make_preset(condition, 3);
        let mut world = World::new(setup.object_spec().unwrap(), Backend::Surface).map_err(|e| e.to_string())?;
        let mesh = world.rest_mesh().clone();
        let v = mesh.vertices();
        let faces: Vec<(Vec3, Vec3)> = mesh
            .triangles()
            .iter()
            .map(|&[a, b, c]| ((v[a] + v[b] + v[c]) / 3.0, (v[b] - v[a]).cross(v[c] - v[a]).normalize()))
            .filter(|(q, n)| n.z > 0.9 && q.x.abs() < 0.06 && q.y.abs() < 0.03)
            .collect();
        let mut rng = ChaCha8Rng::seed_from_u64(condition as u64);
        for _ in 0..5 {
            let (q, n) = faces[rng.random_range(0..faces.len())];
            let depths: Vec<f64> = (0..9).map(|i| 0.001 + 0.0005 * i as f64).collect();
            let mut forces = Vec::new();
            let mut k = None;
            for &d in &depths {
                let probe = ProbeState {
                    position: q + n * (DEFAULT_PROBE_RADIUS - d),
                    velocity: Vec3::ZERO,
                    radius: DEFAULT_PROBE_RADIUS,
                };
                let s = world.haptic_tick(&probe, 0.0, 1e-3).map_err(|e| e.to_string())?;
                let c = s.contact.ok_or("probe does not overlap the surface")?;
                k.get_or_insert(world.stiffness_at(c.point));
                forces.push(s.force.norm());
            }
            let k = k.unwrap();
            worst = worst.max(((slope(&depths, &forces) - k) / k).abs());
            faces_tested += 1;
        }
    }
    check(worst < 1e-6, format!("{faces_tested} contact points, worst relative slope error {worst:.2e}"))
}

// ---- energy gradient ----

fn energy_gradient() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let mut worst: f64 = 0.0;
    let r = |rng: &mut ChaCha8Rng| Vec3::new(rng.random_range(-0.1..0.1), rng.random_range(-0.1..0.1), rng.random_range(-0.1..0.1));
    for _ in 0..100 {
        let (pi, pj) = (r(&mut rng), r(&mut rng));
        let l0 = rng.random_range(0.01..0.2);
        let ks = rng.random_range(10.0..1000.0);
        let link = SpringLink {
            i: 0,
            j: 1,
            rest_length: l0,
            ks,
            kd: 0.0,
        };
        let f = spring_force(&link, &[node(pi, 0.01, false), node(pj, 0.01, false)]);
        let energy = |p: Vec3| 0.5 * ks * (p.distance(pj) - l0).powi(2);
        let h = 1e-7;
        let grad = Vec3::new(
            (energy(pi + Vec3::X * h) - energy(pi - Vec3::X * h)) / (2.0 * h),
            (energy(pi + Vec3::Y * h) - energy(pi - Vec3::Y * h)) / (2.0 * h),
            (energy(pi + Vec3::Z * h) - energy(pi - Vec3::Z * h)) / (2.0 * h),
        );
        worst = worst.max((f.on_i + grad).norm() / f.on_i.norm().max(1e-12));
    }
    check(worst < 1e-6, format!("100 links, worst relative error {worst:.2e}"))
}

// ---- energy behaviour ----

fn energy_ratio(mesh: &TriMesh, kd: f64, tether: Tether) -> Result<f64, String> {
    let params = SkeletonParams {
        nodes: 128,
        kd,
        tether,
        ..Default::default()
    };
    let mut s = build_skeleton(mesh, &params).map_err(|e| e.to_string())?;
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for n in s.nodes.iter_mut().filter(|n| !n.anchored) {
        n.position += Vec3::new(
            rng.random_range(-0.002..0.002),
            rng.random_range(-0.002..0.002),
            rng.random_range(-0.002..0.002),
        );
    }
    let e0 = s.energy();
    let ext = vec![Vec3::ZERO; s.nodes.len()];
    for _ in 0..1000 {
        s.step(1e-3, &ext, Vec3::ZERO).map_err(|e| e.to_string())?;
    }
    Ok(s.energy() / e0)
}

fn energy() -> Outcome {
    let mesh = liver_setup().object_spec().unwrap().mesh;
    let damped = energy_ratio(&mesh, SkeletonParams::default().kd, SkeletonParams::default().tether)?;
    let undamped = energy_ratio(&mesh, 0.0, Tether { kd: 0.0, ..SkeletonParams::default().tether })?;
    check(
        damped < 1.0 && (undamped - 1.0).abs() <= 0.05,
        format!("E(1s)/E(0) damped {damped:.4}, undamped {undamped:.4}"),
    )
}

// ---- collision oracle ----

fn point_segment_distance(p: Vec3, a: Vec3, b: Vec3) -> f64 {
    let ab = b - a;
    let t = ((p - a).dot(ab) / ab.norm_squared()).clamp(0.0, 1.0);
    (p - (a + ab * t)).norm()
}

fn point_triangle_distance(p: Vec3, a: Vec3, b: Vec3, c: Vec3) -> f64 {
    let n = (b - a).cross(c - a);
    let q = p - n * ((p - a).dot(n) / n.norm_squared());
    if [(a, b), (b, c), (c, a)].iter().all(|&(u, v)| (v - u).cross(q - u).dot(n) >= 0.0) {
        return (p - q).norm();
    }
    point_segment_distance(p, a, b)
        .min(point_segment_distance(p, b, c))
        .min(point_segment_distance(p, c, a))
}

/// Generalized winding number (solid angle sum / 4π).
fn winding_number(p: Vec3, m: &TriMesh) -> f64 {
    let mut total = 0.0;
    for t in 0..m.triangle_count() {
        let [a, b, c] = m.triangle(t);
        let (a, b, c) = (a - p, b - p, c - p);
        let (la, lb, lc) = (a.norm(), b.norm(), c.norm());
        let num = a.dot(b.cross(c));
        let den = la * lb * lc + a.dot(b) * lc + b.dot(c) * la + c.dot(a) * lb;
        total += 2.0 * num.atan2(den);
    }
    total / (4.0 * std::f64::consts::PI)
}

fn collision_oracle() -> Outcome {
    let mesh = liver_mesh();
    let verts = mesh.vertices();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (mut hits, mut mismatches, mut worst) = (0, 0, 0.0f64);
    for k in 0..200 {
        let radius = rng.random_range(0.002..0.01);
        let center = if k % 4 == 0 {
            let b = mesh.aabb().inflate(0.02);
            Vec3::new(
                rng.random_range(b.min.x..b.max.x),
                rng.random_range(b.min.y..b.max.y),
                rng.random_range(b.min.z..b.max.z),
            )
        } else {
            verts[rng.random_range(0..verts.len())]
                + Vec3::new(
                    rng.random_range(-0.015..0.015),
                    rng.random_range(-0.015..0.015),
                    rng.random_range(-0.015..0.015),
                )
        };
        let dist = (0..mesh.triangle_count())
            .map(|t| {
                let [a, b, c] = mesh.triangle(t);
                point_triangle_distance(center, a, b, c)
            })
            .fold(f64::INFINITY, f64::min);
        let want = if winding_number(center, &mesh).abs() > 0.5 {
            Some(radius + dist)
        } else if dist < radius {
            Some(radius - dist)
        } else {
            None
        };
        match (probe_vs_mesh(center, radius, &mesh), want) {
            (Some(g), Some(w)) => {
                hits += 1;
                worst = worst.max((g.depth - w).abs());
            }
            (None, None) => {}
            _ => mismatches += 1,
        }
    }
    check(
        mismatches == 0 && worst <= 1e-9,
        format!("200 poses, {hits} contacts, {mismatches} presence mismatches, worst depth error {worst:.2e}"),
    )
}

// ---- scene graph ----

type M4 = [[f64; 4]; 4];

fn matrix(t: &Transform) -> M4 {
    let (w, x, y, z) = (t.rotation.w, t.rotation.x, t.rotation.y, t.rotation.z);
    let r = [
        [1.0 - 2.0 * (y * y + z * z), 2.0 * (x * y - w * z), 2.0 * (x * z + w * y)],
        [2.0 * (x * y + w * z), 1.0 - 2.0 * (x * x + z * z), 2.0 * (y * z - w * x)],
        [2.0 * (x * z - w * y), 2.0 * (y * z + w * x), 1.0 - 2.0 * (x * x + y * y)],
    ];
    let (s, tr) = (t.scale, t.translation);
    [
        [r[0][0] * s, r[0][1] * s, r[0][2] * s, tr.x],
        [r[1][0] * s, r[1][1] * s, r[1][2] * s, tr.y],
        [r[2][0] * s, r[2][1] * s, r[2][2] * s, tr.z],
        [0.0, 0.0, 0.0, 1.0],
    ]
}

fn matmul(a: &M4, b: &M4) -> M4 {
    let mut c = [[0.0; 4]; 4];
    for i in 0..4 {
        for j in 0..4 {
            c[i][j] = (0..4).map(|k| a[i][k] * b[k][j]).sum();
        }
    }
    c
}

fn max_abs_diff(a: &M4, b: &M4) -> f64 {
    (0..16).map(|k| (a[k / 4][k % 4] - b[k / 4][k % 4]).abs()).fold(0.0, f64::max)
}

fn random_transform(rng: &mut ChaCha8Rng) -> Transform {
    let mut v = || Vec3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
    let (translation, axis) = (v(), v());
    Transform {
        translation,
        rotation: Quat::from_axis_angle(axis, rng.random_range(-3.0..3.0)),
        scale: rng.random_range(0.5..1.5),
    }
}

fn scene_graph() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let (mut world_err, mut group_err, mut translate_err) = (0.0f64, 0.0f64, 0.0f64);
    for _ in 0..200 {
        let locals: Vec<Transform> = (0..5).map(|_| random_transform(&mut rng)).collect();
        let mut scene = Scene::new(SceneNode::new("n0").with_transform(locals[0]));
        for i in 1..5 {
            scene = scene
                .with_child(&format!("n{}", i - 1), SceneNode::new(format!("n{i}")).with_transform(locals[i]))
                .map_err(|e| e.to_string())?;
        }
        let oracle = locals.iter().fold(matrix(&Transform::IDENTITY), |acc, t| matmul(&acc, &matrix(t)));
        world_err = world_err.max(max_abs_diff(&matrix(&scene.world_transform("n4").unwrap()), &oracle));

        // a general delta applied at n2, expressed in n2's parent frame
        let delta = random_transform(&mut rng);
        let moved = scene.apply_group("n2", &delta).map_err(|e| e.to_string())?;
        let parent = scene.world_transform("n1").unwrap();
        for n in ["n2", "n3", "n4"] {
            let before = scene.world_transform(n).unwrap();
            let expect = matmul(
                &matmul(&matrix(&parent), &matrix(&delta)),
                &matmul(&matrix(&parent.inverse()), &matrix(&before)),
            );
            group_err = group_err.max(max_abs_diff(&matrix(&moved.world_transform(n).unwrap()), &expect));
        }
        for n in ["n0", "n1"] {
            if moved.world_transform(n) != scene.world_transform(n) {
                return Err(format!("{n} above the group moved"));
            }
        }

        // a pure translation of a top-level group shifts every descendant by exactly that vector
        let shift = Vec3::new(rng.random_range(-0.1..0.1), rng.random_range(-0.1..0.1), rng.random_range(-0.1..0.1));
        let moved = scene.apply_group("n0", &Transform::from_translation(shift)).map_err(|e| e.to_string())?;
        for i in 0..5 {
            let n = format!("n{i}");
            let d = moved.world_transform(&n).unwrap().translation - scene.world_transform(&n).unwrap().translation;
            translate_err = translate_err.max((d - shift).norm());
        }
    }
    check(
        world_err < 1e-12 && group_err < 1e-12 && translate_err < 1e-12,
        format!(
            "200 depth-5 chains: world {world_err:.1e}, apply_group {group_err:.1e}, translation shift {translate_err:.1e}"
        ),
    )
}

// ---- determinism ----

fn run_args(scene: &Path, traj: &Path, out: &Path) -> RunArgs {
    RunArgs {
        scene: scene.to_path_buf(),
        traj: traj.to_path_buf(),
        duration: 1.0,
        mode: Mode::Lockstep,
        out: out.to_path_buf(),
        stats: None,
        backend: None,
        seed: None,
        haptic_rate: 1000.0,
        graphics_rate: 30.0,
    }
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut setup = liver_setup();
    setup.preset = make_preset(Condition::Cirrhosis, 7);
    setup.backend = Backend::Skeleton;
    let traj = press_over(&setup, 1.0, 0.008);
    let scene = dir.path().join("scene.xml");
    let traj_path = dir.path().join("press.txt");
    save_setup(&scene, &setup).map_err(|e| e.to_string())?;
    fs::write(&traj_path, traj.to_text()).map_err(|e| e.to_string())?;

    let mut traces = Vec::new();
    for name in ["a.csv", "b.csv"] {
        let out = dir.path().join(name);
        cmd_run(&run_args(&scene, &traj_path, &out)).map_err(|e| e.to_string())?;
        traces.push(fs::read_to_string(out).map_err(|e| e.to_string())?);
    }
    let config = SimConfig {
        seed: setup.skeleton.seed,
        backend: setup.backend,
        ..SimConfig::default()
    };
    let in_memory = run_lockstep(&setup, config, traj).map_err(|e| e.to_string())?;
    let contacts = traces[0].lines().skip(1).filter(|l| l.split(',').nth(12) == Some("1")).count();
    check(
        traces[0] == traces[1] && traces[0] == in_memory && contacts > 0,
        format!(
            "run/run identical {}, saved-and-loaded vs in-memory identical {}, {} rows, {contacts} in contact",
            traces[0] == traces[1],
            traces[0] == in_memory,
            traces[0].lines().count() - 1
        ),
    )
}

// ---- persistence ----

fn persistence() -> Outcome {
    let mut setup = liver_setup();
    setup.preset = make_preset(Condition::Neoplasm, 11);
    setup.backend = Backend::Skeleton;
    let doc = SceneDocument::from_setup(&setup);
    let a = save_scene(&doc).map_err(|e| e.to_string())?;
    let loaded = load_scene(&a).map_err(|e| e.to_string())?;
    let b = save_scene(&loaded).map_err(|e| e.to_string())?;
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let mut differing = 0;
    for _ in 0..100 {
        let q = Vec3::new(rng.random_range(-0.1..0.1), rng.random_range(-0.06..0.06), rng.random_range(-0.04..0.04));
        if doc.preset.stiffness_at(q).to_bits() != loaded.preset.stiffness_at(q).to_bits() {
            differing += 1;
        }
    }
    check(
        a == b && differing == 0,
        format!("save/load/save identical {}, {} bytes, stiffness differs at {differing}/100 points", a == b, a.len()),
    )
}

// ---- diagnosis ----

fn diagnosis() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let out = dir.path().join("report.json");
    cmd_classify(&ClassifyArgs {
        conditions: palpsim_cli::ConditionList(Condition::ALL.to_vec()),
        seeds: SeedList((0..20).collect()),
        out: out.clone(),
        calibration: None,
        noiseless: false,
        scene: None,
    })
    .map_err(|e| e.to_string())?;
    let report: palpsim_core::protocol::ExperimentReport =
        serde_json::from_str(&fs::read_to_string(&out).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
    let confused = report.count(Condition::Neoplasm, Condition::Normal) + report.count(Condition::Normal, Condition::Neoplasm);
    check(
        report.trials.len() == 100 && report.accuracy >= 0.9 && confused == 0,
        format!(
            "{} trials, accuracy {:.2}, neoplasm/normal confusions {confused}",
            report.trials.len(),
            report.accuracy
        ),
    )
}

// ---- loop isolation ----

fn realtime_rate(setup: &SceneSetup, consumer: Option<Duration>) -> Result<(TimingStats, usize), String> {
    let duration = 3.0;
    let config = SimConfig {
        mode: Mode::Realtime,
        duration: Some(duration),
        backend: Backend::Skeleton,
        ..SimConfig::default()
    };
    let mut engine = Engine::new(config, VirtualDevice::scripted(press_over(setup, duration, 0.006)), setup)
        .map_err(|e| e.to_string())?;
    engine.set_recording(false);
    let hub = engine.snapshots();
    let done = Arc::new(AtomicBool::new(false));
    let reader = consumer.map(|every| {
        let done = done.clone();
        thread::spawn(move || {
            let mut reads = 0;
            while !done.load(Ordering::Relaxed) {
                if let Some(s) = hub.latest() {
                    let _copy: Vec<Vec3> = s.vertices.clone();
                    reads += 1;
                }
                thread::sleep(every);
            }
            reads
        })
    });
    let stats = engine.run().map_err(|e| e.to_string())?.1;
    done.store(true, Ordering::Relaxed);
    let reads = reader.map(|r| r.join().unwrap()).unwrap_or(0);
    Ok((stats, reads))
}

fn median(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(f64::total_cmp);
    xs[xs.len() / 2]
}

fn loop_isolation() -> Outcome {
    let setup = liver_setup();
    // the consumer polls at a tenth of the graphics rate
    let period = Duration::from_secs_f64(10.0 / SimConfig::default().graphics_rate);
    // alternate the two arms so host scheduling noise hits both alike
    let (mut alone, mut watched, mut reads) = (Vec::new(), Vec::new(), 0);
    for _ in 0..3 {
        alone.push(realtime_rate(&setup, None)?.0.achieved_haptic_rate_hz);
        let (s, r) = realtime_rate(&setup, Some(period))?;
        watched.push(s.achieved_haptic_rate_hz);
        reads += r;
    }
    let (a, w) = (median(alone.clone()), median(watched.clone()));
    let change = (w - a).abs() / a;
    check(
        change < 0.01,
        format!(
            "median {a:.1} Hz alone {alone:.1?}, {w:.1} Hz with a consumer reading every {} ms {watched:.1?} ({reads} reads), change {:.3}%",
            period.as_millis(),
            change * 100.0
        ),
    )
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 11] = [
        ("haptic-budget", haptic_budget),
        ("integrator-analytic", integrator),
        ("force-linearity", force_linearity),
        ("energy-gradient", energy_gradient),
        ("energy-behaviour", energy),
        ("collision-oracle", collision_oracle),
        ("scene-graph", scene_graph),
        ("determinism", determinism),
        ("persistence-round-trip", persistence),
        ("diagnosis-accuracy", diagnosis),
        ("loop-isolation", loop_isolation),
    ];
    let machine = MachineInfo::detect();
    println!("acceptance on {} {} ({} cpu(s), {})", machine.os, machine.arch, machine.cpus, machine.cpu_model);
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let t0 = Instant::now();
        let (status, detail) = match std::panic::catch_unwind(f) {
            Ok(Ok(d)) => ("PASS", d),
            Ok(Err(d)) => ("FAIL", d),
            Err(_) => ("FAIL", "panicked".to_string()),
        };
        failed += (status == "FAIL") as usize;
        println!("{status} {:>2} {name}: {detail} [{:.1} s]", i + 1, t0.elapsed().as_secs_f64());
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
