use std::fmt::Write as _;
use std::path::Path;

use super::{check_asset_reference, PersistenceError, SceneDocument, FORMAT_VERSION, ROOT_ELEMENT};
use crate::geometry::Vec3;
use crate::pathology::Sex;
use crate::scenegraph::SceneNode;

/// 17 significant digits: round-trips every finite f64 exactly.
fn num(v: f64) -> Result<String, PersistenceError> {
    if !v.is_finite() {
        return Err(PersistenceError::Unserializable(format!("non-finite number {v}")));
    }
    Ok(format!("{v:.16e}"))
}

fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            _ => out.push(c),
        }
    }
    out
}

struct Attrs(String);

impl Attrs {
    fn new() -> Self {
        Attrs(String::new())
    }

    fn s(mut self, k: &str, v: &str) -> Self {
        write!(self.0, " {k}=\"{}\"", escape(v)).unwrap();
        self
    }

    fn f(self, k: &str, v: f64) -> Result<Self, PersistenceError> {
        Ok(self.s(k, &num(v)?))
    }

    fn i(self, k: &str, v: impl std::fmt::Display) -> Self {
        let v = v.to_string();
        self.s(k, &v)
    }

    fn vec(self, v: Vec3) -> Result<Self, PersistenceError> {
        self.f("x", v.x)?.f("y", v.y)?.f("z", v.z)
    }
}

fn leaf(out: &mut String, indent: usize, name: &str, a: Attrs) {
    writeln!(out, "{:indent$}<{name}{}/>", "", a.0, indent = indent).unwrap();
}

fn open(out: &mut String, indent: usize, name: &str, a: Attrs) {
    writeln!(out, "{:indent$}<{name}{}>", "", a.0, indent = indent).unwrap();
}

fn close(out: &mut String, indent: usize, name: &str) {
    writeln!(out, "{:indent$}</{name}>", "", indent = indent).unwrap();
}

fn write_node(out: &mut String, n: &SceneNode) -> Result<(), PersistenceError> {
    let mut a = Attrs::new().s("id", &n.id);
    if let Some(v) = &n.visual_material {
        a = a.s("visual-material", v);
    }
    open(out, 4, "node", a);
    let t = &n.local;
    leaf(
        out,
        6,
        "transform",
        Attrs::new()
            .f("tx", t.translation.x)?
            .f("ty", t.translation.y)?
            .f("tz", t.translation.z)?
            .f("qw", t.rotation.w)?
            .f("qx", t.rotation.x)?
            .f("qy", t.rotation.y)?
            .f("qz", t.rotation.z)?
            .f("scale", t.scale)?,
    );
    if let Some(g) = &n.geometry {
        check_asset_reference(&g.asset)?;
        let mut a = Attrs::new().s("asset", &g.asset);
        if let Some(tt) = g.target_triangles {
            a = a.i("target-triangles", tt);
        }
        leaf(out, 6, "mesh", a);
    }
    if let Some(m) = &n.haptic_material {
        leaf(out, 6, "haptic-material", Attrs::new().f("damping", m.damping)?);
    }
    for c in &n.children {
        leaf(out, 6, "child", Attrs::new().s("ref", c));
    }
    close(out, 4, "node");
    Ok(())
}

/// Canonical XML text for `doc`: fixed element order, nodes sorted by id,
/// numbers with 17 significant digits.
pub fn save_scene(doc: &SceneDocument) -> Result<String, PersistenceError> {
    let mut out = String::new();
    out.push_str("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n");
    open(&mut out, 0, ROOT_ELEMENT, Attrs::new().i("version", FORMAT_VERSION));

    open(&mut out, 2, "simulation", Attrs::new().s("backend", doc.backend.as_str()));
    leaf(&mut out, 4, "gravity", Attrs::new().vec(doc.gravity)?);
    close(&mut out, 2, "simulation");

    open(&mut out, 2, "deform", Attrs::new());
    let s = &doc.surface;
    leaf(
        &mut out,
        4,
        "surface",
        Attrs::new().f("falloff-radius", s.falloff_radius)?.f("max-indent", s.max_indent)?,
    );
    let k = &doc.skeleton;
    leaf(
        &mut out,
        4,
        "skeleton",
        Attrs::new()
            .i("nodes", k.nodes)
            .i("connectors", k.connectors_per_node)
            .i("seed", k.seed)
            .f("ks", k.ks)?
            .f("kd", k.kd)?
            .f("total-mass", k.total_mass)?
            .f("anchor-band", k.anchor_band)?
            .f("dt", k.dt)?
            .f("tether-ks", k.tether.ks)?
            .f("tether-kd", k.tether.kd)?,
    );
    close(&mut out, 2, "deform");

    let p = &doc.preset;
    let mut a = Attrs::new()
        .s("condition", p.condition.as_str())
        .i("seed", p.seed)
        .f("scale", p.scale)?
        .f("k-base", p.k_base)?
        .i("edge-rounding", p.edge_rounding);
    if let Some(t) = p.tenderness_threshold {
        a = a.f("tenderness-threshold", t)?;
    }
    open(&mut out, 2, "preset", a);
    let sex = match p.anatomy.sex {
        Sex::Male => "male",
        Sex::Female => "female",
    };
    leaf(
        &mut out,
        4,
        "anatomy",
        Attrs::new().f("span", p.anatomy.span)?.f("mass", p.anatomy.mass)?.s("sex", sex),
    );
    let n = &p.nodularity;
    leaf(
        &mut out,
        4,
        "nodularity",
        Attrs::new().f("amplitude", n.amplitude)?.f("frequency", n.frequency)?.i("seed", n.seed),
    );
    for l in &p.lesions {
        leaf(
            &mut out,
            4,
            "lesion",
            Attrs::new().vec(l.center)?.f("radius", l.radius)?.f("k", l.k)?,
        );
    }
    close(&mut out, 2, "preset");

    open(&mut out, 2, "scene", Attrs::new().s("root", doc.scene.root()));
    for node in doc.scene.nodes() {
        write_node(&mut out, node)?;
    }
    close(&mut out, 2, "scene");
    close(&mut out, 0, ROOT_ELEMENT);
    Ok(out)
}

pub fn save_scene_file(path: &Path, doc: &SceneDocument) -> Result<(), PersistenceError> {
    let text = save_scene(doc)?;
    std::fs::write(path, text).map_err(|source| PersistenceError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Writes `setup` as a scene document at `path` plus its mesh assets
/// (OFF text) next to it.
pub fn save_setup(path: &Path, setup: &crate::engine::SceneSetup) -> Result<(), PersistenceError> {
    let doc = SceneDocument::from_setup(setup);
    let text = save_scene(&doc)?;
    let dir = path.parent().unwrap_or(Path::new("."));
    for (asset, mesh) in &setup.meshes {
        check_asset_reference(asset)?;
        let p = dir.join(asset);
        if let Some(parent) = p.parent() {
            std::fs::create_dir_all(parent).map_err(|source| PersistenceError::Io {
                path: parent.to_path_buf(),
                source,
            })?;
        }
        std::fs::write(&p, crate::geometry::write_off(mesh))
            .map_err(|source| PersistenceError::Io { path: p, source })?;
    }
    std::fs::write(path, text).map_err(|source| PersistenceError::Io {
        path: path.to_path_buf(),
        source,
    })
}
