use palpsim_core::engine::{self, SceneSetup, SimConfig};
use palpsim_core::geometry::{icosphere, liver_mesh, Vec3};
use palpsim_core::haptics::{Backend, Trajectory, VirtualDevice};
use palpsim_core::pathology::{make_preset, Condition};
use palpsim_core::persistence::{
    load_scene, load_scene_file, read_trace_csv, save_scene, save_setup, trace_to_csv, PersistenceError,
    SceneDocument, SCENE_SCHEMA,
};
use palpsim_core::scenegraph::{MeshRef, Quat, SceneNode, Transform};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn press() -> Trajectory {
    let top = Vec3::new(0.0, 0.0, 0.045);
    Trajectory::new(vec![
        (0.0, top),
        (0.4, Vec3::new(0.0, 0.0, 0.034)),
        (0.6, Vec3::new(0.0, 0.0, 0.034)),
        (1.0, top),
    ])
    .unwrap()
}

fn cirrhosis_doc() -> SceneDocument {
    let mut setup = SceneSetup::with_mesh(icosphere(0.05, 2), None);
    setup.preset = make_preset(Condition::Cirrhosis, 7);
    setup.backend = Backend::Skeleton;
    setup.gravity = Vec3::new(0.0, -9.81, 0.0);
    setup.scene = setup
        .scene
        .with_child(
            "world",
            SceneNode::new("a-tool")
                .with_transform(Transform {
                    translation: Vec3::new(0.1, 1.0 / 3.0, -0.2),
                    rotation: Quat::from_axis_angle(Vec3::new(1.0, 2.0, 3.0).normalize(), 0.7),
                    scale: 1.1,
                })
                .with_visual_material("steel & <chrome>"),
        )
        .unwrap();
    SceneDocument::from_setup(&setup)
}

#[test]
fn save_load_save_is_byte_identical() {
    for doc in [cirrhosis_doc(), SceneDocument::from_setup(&SceneSetup::with_mesh(icosphere(0.05, 1), Some(50)))] {
        let a = save_scene(&doc).unwrap();
        let loaded = load_scene(&a).unwrap();
        assert_eq!(loaded, doc);
        let b = save_scene(&loaded).unwrap();
        assert_eq!(a, b);
    }
}

#[test]
fn neoplasm_lesions_round_trip() {
    let mut doc = cirrhosis_doc();
    doc.preset = make_preset(Condition::Neoplasm, 3);
    assert!(!doc.preset.lesions.is_empty());
    let text = save_scene(&doc).unwrap();
    assert_eq!(load_scene(&text).unwrap(), doc);
}

#[test]
fn stiffness_field_reproduces_after_reload() {
    let doc = cirrhosis_doc();
    let text = save_scene(&doc).unwrap();
    assert!(text.contains("seed=\"7\""));
    let reloaded = load_scene(&text).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..100 {
        let q = Vec3::new(
            rng.random_range(-0.12..0.12),
            rng.random_range(-0.07..0.07),
            rng.random_range(-0.05..0.05),
        );
        assert_eq!(
            doc.preset.stiffness_at(q).to_bits(),
            reloaded.preset.stiffness_at(q).to_bits()
        );
    }
}

#[test]
fn unknown_version_is_rejected() {
    let text = save_scene(&cirrhosis_doc()).unwrap().replace("version=\"1\"", "version=\"99\"");
    match load_scene(&text) {
        Err(PersistenceError::UnknownVersion(v)) => assert_eq!(v, "99"),
        other => panic!("expected a version error, got {other:?}"),
    }
}

#[test]
fn truncated_document_names_the_open_element() {
    let text = save_scene(&cirrhosis_doc()).unwrap();
    let cut = text.find("<lesion").unwrap_or_else(|| text.find("<nodularity").unwrap());
    match load_scene(&text[..cut + 5]) {
        Err(PersistenceError::Parse { element, .. }) => assert!(
            element == "nodularity" || element == "lesion" || element == "preset",
            "{element}"
        ),
        other => panic!("expected a parse error, got {other:?}"),
    }
    let cut = text.find("<transform").unwrap();
    match load_scene(&text[..cut]) {
        Err(PersistenceError::Parse { element, .. }) => assert_eq!(element, "node"),
        other => panic!("expected a parse error, got {other:?}"),
    }
}

#[test]
fn schema_violations_carry_the_element_path() {
    let text = save_scene(&cirrhosis_doc()).unwrap();
    let bad = text.replacen("<gravity ", "<gravity w=\"1\" ", 1);
    match load_scene(&bad) {
        Err(PersistenceError::Schema { path, .. }) => {
            assert_eq!(path, "/palpsim-scene/simulation/gravity")
        }
        other => panic!("{other:?}"),
    }
    let bad = text.replacen("damping=\"", "damping=\"x", 1);
    match load_scene(&bad) {
        Err(PersistenceError::Schema { path, .. }) => assert!(path.contains("node[@id=\"liver\"]/haptic-material"), "{path}"),
        other => panic!("{other:?}"),
    }
    let bad = text.replacen("<deform>", "<deform><extra/>", 1);
    assert!(matches!(load_scene(&bad), Err(PersistenceError::Schema { .. })));
    let bad = text.replacen("<child ref=\"liver\"/>", "<child ref=\"nowhere\"/>", 1);
    assert!(matches!(load_scene(&bad), Err(PersistenceError::Schema { .. })));
}

#[test]
fn escaping_asset_references_are_refused() {
    let mut doc = cirrhosis_doc();
    let mut nodes: Vec<SceneNode> = doc.scene.nodes().cloned().collect();
    for n in &mut nodes {
        if let Some(g) = &mut n.geometry {
            *g = MeshRef {
                asset: "../outside.off".into(),
                target_triangles: None,
            };
        }
    }
    doc.scene = palpsim_core::scenegraph::Scene::from_nodes(doc.scene.root().clone(), nodes).unwrap();
    assert!(matches!(save_scene(&doc), Err(PersistenceError::AssetReference(_))));
}

#[test]
fn missing_asset_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("scene.xml");
    save_setup(&path, &SceneSetup::with_mesh(icosphere(0.05, 1), None)).unwrap();
    std::fs::remove_file(dir.path().join("liver.off")).unwrap();
    match load_scene_file(&path) {
        Err(PersistenceError::MissingAsset { asset, .. }) => assert_eq!(asset, "liver.off"),
        other => panic!("{other:?}"),
    }
}

#[test]
fn schema_covers_every_emitted_element_and_attribute() {
    let text = save_scene(&cirrhosis_doc()).unwrap();
    let doc = roxmltree::Document::parse(&text).unwrap();
    for n in doc.descendants().filter(|n| n.is_element()) {
        let name = n.tag_name().name();
        assert!(SCENE_SCHEMA.contains(&format!("name=\"{name}\"")), "<{name}> missing from schema");
        for a in n.attributes() {
            assert!(SCENE_SCHEMA.contains(&format!("name=\"{}\"", a.name())), "@{} missing", a.name());
        }
    }
}

#[test]
fn reloaded_scene_runs_to_an_identical_trace() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("scene.xml");
    let mut original = SceneSetup::with_mesh(liver_mesh(), Some(3200));
    original.preset = make_preset(Condition::Cirrhosis, 7);
    save_setup(&path, &original).unwrap();
    let reloaded = load_scene_file(&path).unwrap();
    assert_eq!(reloaded, original);
    for backend in [Backend::Surface, Backend::Skeleton] {
        let config = SimConfig {
            backend,
            ..SimConfig::default()
        };
        let run = |setup: &SceneSetup| {
            let (trace, _) = engine::run(config, VirtualDevice::scripted(press()), setup).unwrap();
            trace_to_csv(&trace)
        };
        let a = run(&original);
        let b = run(&reloaded);
        assert_eq!(a, b);
        let rows = read_trace_csv(&a).unwrap();
        assert_eq!(rows.len(), 1000);
        assert!(rows.iter().any(|r| r.contact));
    }
}
