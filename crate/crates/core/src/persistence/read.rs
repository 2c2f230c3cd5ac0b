use std::collections::BTreeMap;
use std::path::Path;
use std::str::FromStr;

use roxmltree::{Document, Node};

use super::{check_asset_reference, PersistenceError, SceneDocument, FORMAT_VERSION, ROOT_ELEMENT};
use crate::deform::{SkeletonParams, SurfaceParams, Tether};
use crate::engine::{SceneSetup, TRACE_HEADER};
use crate::geometry::{load_mesh_file, Vec3};
use crate::haptics::Backend;
use crate::pathology::{AnatomyParams, Condition, Lesion, LiverPreset, Nodularity, Sex};
use crate::scenegraph::{HapticMaterial, MeshRef, Quat, Scene, SceneNode, Transform};

/// An element with its document path, for error messages.
#[derive(Clone, Copy)]
struct El<'a, 'i> {
    node: Node<'a, 'i>,
    path: &'a str,
}

fn schema(path: &str, message: impl Into<String>) -> PersistenceError {
    PersistenceError::Schema {
        path: path.to_string(),
        message: message.into(),
    }
}

impl<'a, 'i> El<'a, 'i> {
    fn name(&self) -> &'a str {
        self.node.tag_name().name()
    }

    fn allow(&self, names: &[&str]) -> Result<(), PersistenceError> {
        for a in self.node.attributes() {
            if !names.contains(&a.name()) {
                return Err(schema(self.path, format!("unexpected attribute {:?}", a.name())));
            }
        }
        Ok(())
    }

    fn opt(&self, k: &str) -> Option<&'a str> {
        self.node.attribute(k)
    }

    fn req(&self, k: &str) -> Result<&'a str, PersistenceError> {
        self.opt(k)
            .ok_or_else(|| schema(self.path, format!("missing attribute {k:?}")))
    }

    fn parse<T: FromStr>(&self, k: &str, v: &str) -> Result<T, PersistenceError> {
        v.trim()
            .parse()
            .map_err(|_| schema(self.path, format!("attribute {k:?}: invalid value {v:?}")))
    }

    fn f(&self, k: &str) -> Result<f64, PersistenceError> {
        let v: f64 = self.parse(k, self.req(k)?)?;
        if !v.is_finite() {
            return Err(schema(self.path, format!("attribute {k:?} must be finite")));
        }
        Ok(v)
    }

    fn u(&self, k: &str) -> Result<u64, PersistenceError> {
        self.parse(k, self.req(k)?)
    }

    fn vec(&self) -> Result<Vec3, PersistenceError> {
        Ok(Vec3::new(self.f("x")?, self.f("y")?, self.f("z")?))
    }

    /// Child elements, rejecting stray text.
    fn children(&self) -> Result<Vec<Node<'a, 'i>>, PersistenceError> {
        let mut out = Vec::new();
        for c in self.node.children() {
            if c.is_element() {
                out.push(c);
            } else if c.is_text() && !c.text().unwrap_or("").trim().is_empty() {
                return Err(schema(self.path, "unexpected text content"));
            }
        }
        Ok(out)
    }
}

/// Checks that element children follow `spec`: (name, min, max) in order.
fn sequence<'a, 'i>(
    parent: &El<'a, 'i>,
    spec: &[(&str, usize, usize)],
) -> Result<Vec<(usize, Node<'a, 'i>)>, PersistenceError> {
    let kids = parent.children()?;
    let mut out = Vec::new();
    let mut k = 0;
    for (slot, &(name, min, max)) in spec.iter().enumerate() {
        let mut n = 0;
        while k < kids.len() && kids[k].tag_name().name() == name && n < max {
            out.push((slot, kids[k]));
            k += 1;
            n += 1;
        }
        if n < min {
            return Err(schema(parent.path, format!("expected <{name}>")));
        }
    }
    if k < kids.len() {
        return Err(schema(
            parent.path,
            format!("unexpected element <{}>", kids[k].tag_name().name()),
        ));
    }
    Ok(out)
}

fn child_path(parent: &str, name: &str) -> String {
    format!("{parent}/{name}")
}

/// Innermost element left open at the end of `text` (for truncated input).
fn innermost_open(text: &str, upto: usize) -> String {
    let mut stack: Vec<&str> = Vec::new();
    let mut rest = &text[..upto.min(text.len())];
    while let Some(i) = rest.find('<') {
        rest = &rest[i + 1..];
        let end = rest.find('>').unwrap_or(rest.len());
        let tag = &rest[..end];
        if tag.starts_with('?') || tag.starts_with('!') {
        } else if let Some(name) = tag.strip_prefix('/') {
            if stack.last() == Some(&name.trim()) {
                stack.pop();
            }
        } else {
            let name = tag.split(|c: char| c.is_whitespace() || c == '/').next().unwrap_or("");
            if !tag.ends_with('/') && end < rest.len() && !name.is_empty() {
                stack.push(name);
            }
        }
        rest = &rest[end.min(rest.len())..];
    }
    stack.last().map_or_else(|| ROOT_ELEMENT.to_string(), |s| s.to_string())
}

fn text_offset(text: &str, pos: roxmltree::TextPos) -> usize {
    let mut offset = 0;
    for (i, line) in text.split_inclusive('\n').enumerate() {
        if i + 1 == pos.row as usize {
            return offset + line.char_indices().nth(pos.col as usize - 1).map_or(line.len(), |c| c.0);
        }
        offset += line.len();
    }
    text.len()
}

/// Parses a scene document. Nothing is constructed unless the whole
/// document is valid.
pub fn load_scene(text: &str) -> Result<SceneDocument, PersistenceError> {
    let doc = Document::parse(text).map_err(|e| {
        let upto = match e {
            roxmltree::Error::UnexpectedEndOfStream | roxmltree::Error::UnclosedRootNode => text.len(),
            _ => text_offset(text, e.pos()),
        };
        PersistenceError::Parse {
            element: innermost_open(text, upto),
            message: e.to_string(),
        }
    })?;
    let root_path = format!("/{ROOT_ELEMENT}");
    let root = El {
        node: doc.root_element(),
        path: &root_path,
    };
    if root.name() != ROOT_ELEMENT {
        return Err(schema(&format!("/{}", root.name()), format!("root element must be <{ROOT_ELEMENT}>")));
    }
    root.allow(&["version"])?;
    let version = root.req("version")?;
    if version.trim() != FORMAT_VERSION.to_string() {
        return Err(PersistenceError::UnknownVersion(version.to_string()));
    }
    let parts = sequence(&root, &[("simulation", 1, 1), ("deform", 1, 1), ("preset", 1, 1), ("scene", 1, 1)])?;
    let path_of = |n: &Node| child_path(&root_path, n.tag_name().name());

    let sim_path = path_of(&parts[0].1);
    let sim = El { node: parts[0].1, path: &sim_path };
    sim.allow(&["backend"])?;
    let backend: Backend = sim.req("backend")?.parse().map_err(|e: String| schema(&sim_path, e))?;
    let g = sequence(&sim, &[("gravity", 1, 1)])?;
    let g_path = child_path(&sim_path, "gravity");
    let g = El { node: g[0].1, path: &g_path };
    g.allow(&["x", "y", "z"])?;
    let gravity = g.vec()?;

    let deform_path = path_of(&parts[1].1);
    let deform = El { node: parts[1].1, path: &deform_path };
    deform.allow(&[])?;
    let d = sequence(&deform, &[("surface", 1, 1), ("skeleton", 1, 1)])?;
    let s_path = child_path(&deform_path, "surface");
    let s = El { node: d[0].1, path: &s_path };
    s.allow(&["falloff-radius", "max-indent"])?;
    let surface = SurfaceParams {
        falloff_radius: s.f("falloff-radius")?,
        max_indent: s.f("max-indent")?,
    };
    if !(surface.falloff_radius > 0.0 && surface.max_indent > 0.0) {
        return Err(schema(&s_path, "falloff radius and max indent must be positive"));
    }
    let k_path = child_path(&deform_path, "skeleton");
    let k = El { node: d[1].1, path: &k_path };
    k.allow(&[
        "nodes", "connectors", "seed", "ks", "kd", "total-mass", "anchor-band", "dt", "tether-ks", "tether-kd",
    ])?;
    let skeleton = SkeletonParams {
        nodes: k.u("nodes")? as usize,
        connectors_per_node: k.u("connectors")? as usize,
        seed: k.u("seed")?,
        ks: k.f("ks")?,
        kd: k.f("kd")?,
        total_mass: k.f("total-mass")?,
        anchor_band: k.f("anchor-band")?,
        dt: k.f("dt")?,
        tether: Tether {
            ks: k.f("tether-ks")?,
            kd: k.f("tether-kd")?,
        },
    };

    let preset = read_preset(parts[2].1, &path_of(&parts[2].1))?;
    let scene = read_scene(parts[3].1, &path_of(&parts[3].1))?;
    Ok(SceneDocument {
        scene,
        surface,
        skeleton,
        preset,
        backend,
        gravity,
    })
}

fn read_preset(node: Node, path: &str) -> Result<LiverPreset, PersistenceError> {
    let p = El { node, path };
    p.allow(&["condition", "seed", "scale", "k-base", "edge-rounding", "tenderness-threshold"])?;
    let condition: Condition = p
        .req("condition")?
        .parse()
        .map_err(|e: crate::pathology::PathologyError| schema(path, e.to_string()))?;
    let kids = sequence(&p, &[("anatomy", 1, 1), ("nodularity", 1, 1), ("lesion", 0, usize::MAX)])?;
    let a_path = child_path(path, "anatomy");
    let a = El { node: kids[0].1, path: &a_path };
    a.allow(&["span", "mass", "sex"])?;
    let sex = match a.req("sex")? {
        "male" => Sex::Male,
        "female" => Sex::Female,
        other => return Err(schema(&a_path, format!("unknown sex {other:?}"))),
    };
    let n_path = child_path(path, "nodularity");
    let n = El { node: kids[1].1, path: &n_path };
    n.allow(&["amplitude", "frequency", "seed"])?;
    let mut lesions = Vec::new();
    for (i, &(_, node)) in kids[2..].iter().enumerate() {
        let l_path = format!("{path}/lesion[{}]", i + 1);
        let l = El { node, path: &l_path };
        l.allow(&["x", "y", "z", "radius", "k"])?;
        lesions.push(Lesion {
            center: l.vec()?,
            radius: l.f("radius")?,
            k: l.f("k")?,
        });
    }
    let preset = LiverPreset {
        condition,
        seed: p.u("seed")?,
        anatomy: AnatomyParams {
            span: a.f("span")?,
            mass: a.f("mass")?,
            sex,
        },
        scale: p.f("scale")?,
        k_base: p.f("k-base")?,
        nodularity: Nodularity {
            amplitude: n.f("amplitude")?,
            frequency: n.f("frequency")?,
            seed: n.u("seed")?,
        },
        lesions,
        tenderness_threshold: match p.opt("tenderness-threshold") {
            Some(_) => Some(p.f("tenderness-threshold")?),
            None => None,
        },
        edge_rounding: p.u("edge-rounding")? as usize,
    };
    preset.validate().map_err(|e| schema(path, e.to_string()))?;
    Ok(preset)
}

fn read_scene(node: Node, path: &str) -> Result<Scene, PersistenceError> {
    let s = El { node, path };
    s.allow(&["root"])?;
    let root = s.req("root")?.to_string();
    let kids = sequence(&s, &[("node", 1, usize::MAX)])?;
    let mut nodes = Vec::new();
    for (_, node) in kids {
        let id = node.attribute("id").unwrap_or("");
        let n_path = format!("{path}/node[@id={id:?}]");
        let n = El { node, path: &n_path };
        n.allow(&["id", "visual-material"])?;
        let parts = sequence(
            &n,
            &[("transform", 1, 1), ("mesh", 0, 1), ("haptic-material", 0, 1), ("child", 0, usize::MAX)],
        )?;
        let mut sn = SceneNode::new(n.req("id")?);
        sn.visual_material = n.opt("visual-material").map(str::to_string);
        for (slot, c) in parts {
            let c_path = child_path(&n_path, c.tag_name().name());
            let e = El { node: c, path: &c_path };
            match slot {
                0 => {
                    e.allow(&["tx", "ty", "tz", "qw", "qx", "qy", "qz", "scale"])?;
                    sn.local = Transform {
                        translation: Vec3::new(e.f("tx")?, e.f("ty")?, e.f("tz")?),
                        rotation: Quat::new(e.f("qw")?, e.f("qx")?, e.f("qy")?, e.f("qz")?),
                        scale: e.f("scale")?,
                    };
                }
                1 => {
                    e.allow(&["asset", "target-triangles"])?;
                    let asset = e.req("asset")?.to_string();
                    check_asset_reference(&asset).map_err(|err| schema(&c_path, err.to_string()))?;
                    let target_triangles = match e.opt("target-triangles") {
                        Some(_) => Some(e.u("target-triangles")? as usize),
                        None => None,
                    };
                    sn.geometry = Some(MeshRef { asset, target_triangles });
                }
                2 => {
                    e.allow(&["damping"])?;
                    let damping = e.f("damping")?;
                    if damping < 0.0 {
                        return Err(schema(&c_path, "damping must be non-negative"));
                    }
                    sn.haptic_material = Some(HapticMaterial { damping });
                }
                _ => {
                    e.allow(&["ref"])?;
                    sn.children.push(e.req("ref")?.to_string());
                }
            }
        }
        nodes.push(sn);
    }
    Scene::from_nodes(root, nodes).map_err(|e| schema(path, e.to_string()))
}

/// Loads a scene document and the mesh assets it references (relative to
/// the document's directory).
pub fn load_scene_file(path: &Path) -> Result<SceneSetup, PersistenceError> {
    let text = std::fs::read_to_string(path).map_err(|source| PersistenceError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let doc = load_scene(&text)?;
    let dir = path.parent().unwrap_or(Path::new("."));
    let mut meshes = BTreeMap::new();
    for node in doc.scene.nodes() {
        if let Some(g) = &node.geometry {
            if meshes.contains_key(&g.asset) {
                continue;
            }
            let p = dir.join(&g.asset);
            let mesh = load_mesh_file(&p).map_err(|source| PersistenceError::MissingAsset {
                asset: g.asset.clone(),
                path: p.clone(),
                source,
            })?;
            meshes.insert(g.asset.clone(), mesh);
        }
    }
    Ok(SceneSetup {
        scene: doc.scene,
        meshes,
        surface: doc.surface,
        skeleton: doc.skeleton,
        preset: doc.preset,
        backend: doc.backend,
        gravity: doc.gravity,
    })
}

/// One parsed row of a trace CSV file.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub tick: u64,
    pub t: f64,
    pub position: Vec3,
    pub velocity: Vec3,
    pub force: Vec3,
    pub depth: f64,
    pub contact: bool,
    pub events: Vec<String>,
}

pub fn read_trace_csv(text: &str) -> Result<Vec<TraceRow>, PersistenceError> {
    let err = |line: usize, message: String| PersistenceError::Trace { line, message };
    let mut lines = text.lines();
    if lines.next() != Some(TRACE_HEADER) {
        return Err(err(1, format!("expected header {TRACE_HEADER:?}")));
    }
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate() {
        let ln = i + 2;
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != 14 {
            return Err(err(ln, format!("expected 14 columns, found {}", cols.len())));
        }
        let f = |k: usize| cols[k].parse::<f64>().map_err(|_| err(ln, format!("bad number {:?}", cols[k])));
        rows.push(TraceRow {
            tick: cols[0].parse().map_err(|_| err(ln, format!("bad tick {:?}", cols[0])))?,
            t: f(1)?,
            position: Vec3::new(f(2)?, f(3)?, f(4)?),
            velocity: Vec3::new(f(5)?, f(6)?, f(7)?),
            force: Vec3::new(f(8)?, f(9)?, f(10)?),
            depth: f(11)?,
            contact: match cols[12] {
                "0" => false,
                "1" => true,
                other => return Err(err(ln, format!("contact must be 0 or 1, found {other:?}"))),
            },
            events: cols[13].split(';').filter(|s| !s.is_empty()).map(str::to_string).collect(),
        });
    }
    Ok(rows)
}
