use palpsim_core::geometry::Vec3;
use palpsim_core::scenegraph::{Quat, Scene, SceneNode, Transform};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type M4 = [[f64; 4]; 4];

/// Homogeneous matrix built directly from the quaternion formula.
fn oracle_matrix(t: &Transform) -> M4 {
    let q = t.rotation;
    let (w, x, y, z) = (q.w, q.x, q.y, q.z);
    let r = [
        [1.0 - 2.0 * (y * y + z * z), 2.0 * (x * y - w * z), 2.0 * (x * z + w * y)],
        [2.0 * (x * y + w * z), 1.0 - 2.0 * (x * x + z * z), 2.0 * (y * z - w * x)],
        [2.0 * (x * z - w * y), 2.0 * (y * z + w * x), 1.0 - 2.0 * (x * x + y * y)],
    ];
    let s = t.scale;
    let tr = t.translation;
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

fn random_transform(rng: &mut ChaCha8Rng) -> Transform {
    let axis = Vec3::new(
        rng.random_range(-1.0..1.0),
        rng.random_range(-1.0..1.0),
        rng.random_range(-1.0..1.0),
    );
    Transform {
        translation: Vec3::new(
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
        ),
        rotation: Quat::from_axis_angle(axis, rng.random_range(-3.0..3.0)),
        scale: rng.random_range(0.5..1.5),
    }
}

fn random_chain(rng: &mut ChaCha8Rng, depth: usize) -> (Scene, Vec<Transform>) {
    let locals: Vec<Transform> = (0..depth).map(|_| random_transform(rng)).collect();
    let mut s = Scene::new(SceneNode::new("n0").with_transform(locals[0]));
    for i in 1..depth {
        s = s
            .with_child(&format!("n{}", i - 1), SceneNode::new(format!("n{i}")).with_transform(locals[i]))
            .unwrap();
    }
    (s, locals)
}

fn max_abs_diff(a: &M4, b: &M4) -> f64 {
    let mut m: f64 = 0.0;
    for i in 0..4 {
        for j in 0..4 {
            m = m.max((a[i][j] - b[i][j]).abs());
        }
    }
    m
}

#[test]
fn world_transform_matches_matrix_product() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for _ in 0..200 {
        let (scene, locals) = random_chain(&mut rng, 5);
        let oracle = locals
            .iter()
            .fold(oracle_matrix(&Transform::IDENTITY), |acc, t| matmul(&acc, &oracle_matrix(t)));
        let world = scene.world_transform("n4").unwrap();
        assert!(max_abs_diff(&oracle_matrix(&world), &oracle) < 1e-12);
    }
}

#[test]
fn group_translation_moves_every_member() {
    let scene = Scene::new(SceneNode::new("root"))
        .with_child("root", SceneNode::new("group").with_transform(Transform::from_translation(Vec3::X)))
        .unwrap();
    let mut scene = scene;
    for (i, name) in ["a", "b", "c"].iter().enumerate() {
        let t = Transform {
            translation: Vec3::new(0.0, i as f64, 0.5),
            rotation: Quat::from_axis_angle(Vec3::Z, i as f64),
            scale: 1.0 + i as f64,
        };
        scene = scene.with_child("group", SceneNode::new(*name).with_transform(t)).unwrap();
    }
    let outside = scene.with_child("root", SceneNode::new("other")).unwrap();
    let delta = Transform::from_translation(Vec3::new(0.0, 0.0, 0.1));
    let moved = outside.apply_group("group", &delta).unwrap();
    for name in ["a", "b", "c"] {
        let before = outside.world_transform(name).unwrap().translation;
        let after = moved.world_transform(name).unwrap().translation;
        assert!((after - before - Vec3::new(0.0, 0.0, 0.1)).norm() < 1e-15);
    }
    assert_eq!(
        moved.world_transform("other").unwrap(),
        outside.world_transform("other").unwrap()
    );
}

#[test]
fn apply_group_is_exact_delta_at_subtree_root() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..50 {
        let (scene, _) = random_chain(&mut rng, 5);
        let delta = random_transform(&mut rng);
        let moved = scene.apply_group("n2", &delta).unwrap();
        // nodes above the subtree are untouched
        for n in ["n0", "n1"] {
            assert_eq!(moved.world_transform(n).unwrap(), scene.world_transform(n).unwrap());
        }
        // descendants: parent_world ∘ delta ∘ (rest of the chain)
        let parent = scene.world_transform("n1").unwrap();
        for n in ["n2", "n3", "n4"] {
            let before = scene.world_transform(n).unwrap();
            let expect = matmul(
                &matmul(&oracle_matrix(&parent), &oracle_matrix(&delta)),
                &matmul(&oracle_matrix(&parent.inverse()), &oracle_matrix(&before)),
            );
            assert!(max_abs_diff(&oracle_matrix(&moved.world_transform(n).unwrap()), &expect) < 1e-12);
        }
    }
}

#[test]
fn apply_to_leaf_changes_only_leaf() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let (scene, _) = random_chain(&mut rng, 4);
    let moved = scene
        .apply_group("n3", &Transform::from_translation(Vec3::Y))
        .unwrap();
    for n in ["n0", "n1", "n2"] {
        assert_eq!(moved.world_transform(n).unwrap(), scene.world_transform(n).unwrap());
    }
    assert_ne!(moved.world_transform("n3").unwrap(), scene.world_transform("n3").unwrap());
    assert_eq!(scene.apply_group("n1", &Transform::IDENTITY).unwrap(), scene);
}

/// Reference recursive DFS.
fn reference_dfs(scene: &Scene, id: &str, out: &mut Vec<String>) {
    out.push(id.to_string());
    for c in &scene.node(id).unwrap().children {
        reference_dfs(scene, c, out);
    }
}

#[test]
fn traverse_matches_recursive_reference_on_random_tree() {
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    let mut scene = Scene::new(SceneNode::new("node000"));
    for i in 1..50 {
        let parent = format!("node{:03}", rng.random_range(0..i));
        scene = scene
            .with_child(&parent, SceneNode::new(format!("node{i:03}")))
            .unwrap();
    }
    let mut reference = Vec::new();
    reference_dfs(&scene, "node000", &mut reference);
    let got: Vec<String> = scene.traverse().into_iter().map(|(id, _)| id).collect();
    assert_eq!(got, reference);
    let mut uniq = got.clone();
    uniq.sort();
    uniq.dedup();
    assert_eq!(uniq.len(), 50);
}

proptest! {
    #[test]
    fn group_then_inverse_restores(seed in 0u64..10_000) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (scene, _) = random_chain(&mut rng, 5);
        let delta = random_transform(&mut rng);
        let back = scene
            .apply_group("n1", &delta)
            .unwrap()
            .apply_group("n1", &delta.inverse())
            .unwrap();
        for n in ["n0", "n1", "n2", "n3", "n4"] {
            let a = oracle_matrix(&scene.world_transform(n).unwrap());
            let b = oracle_matrix(&back.world_transform(n).unwrap());
            prop_assert!(max_abs_diff(&a, &b) < 1e-12);
        }
    }
}
