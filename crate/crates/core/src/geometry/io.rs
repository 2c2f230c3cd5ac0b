//! OBJ-subset and OFF readers/writers.
//!
//! OBJ: only `v x y z` and `f i j k` records (1-based; `i/t/n` slots are
//! accepted and the texture/normal parts ignored). Comments and unknown
//! record types (`vn`, `vt`, `o`, `g`, `s`, `usemtl`, `mtllib`) are skipped.
//! OFF: `OFF` header, `nv nf ne` counts, vertex lines, `3 i j k` faces.

use std::fmt::Write as _;
use std::path::Path;

use super::{GeometryError, TriMesh, Vec3};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MeshFormat {
    Obj,
    Off,
}

impl MeshFormat {
    pub fn from_path(path: &Path) -> Option<Self> {
        match path.extension()?.to_str()?.to_ascii_lowercase().as_str() {
            "obj" => Some(MeshFormat::Obj),
            "off" => Some(MeshFormat::Off),
            _ => None,
        }
    }
}

fn parse_err(line: usize, msg: impl Into<String>) -> GeometryError {
    GeometryError::Parse {
        line,
        message: msg.into(),
    }
}

fn parse_f64(tok: Option<&str>, line: usize) -> Result<f64, GeometryError> {
    let tok = tok.ok_or_else(|| parse_err(line, "missing coordinate"))?;
    let v: f64 = tok
        .parse()
        .map_err(|_| parse_err(line, format!("invalid number {tok:?}")))?;
    if !v.is_finite() {
        return Err(parse_err(line, format!("non-finite coordinate {tok:?}")));
    }
    Ok(v)
}

/// Loads a mesh, sniffing the format from the content (`OFF` header or not).
pub fn load_mesh(text: &str) -> Result<TriMesh, GeometryError> {
    let first = text
        .lines()
        .map(str::trim)
        .find(|l| !l.is_empty() && !l.starts_with('#'));
    match first {
        Some(l) if l.starts_with("OFF") => parse_off(text),
        _ => parse_obj(text),
    }
}

pub fn load_mesh_file(path: &Path) -> Result<TriMesh, GeometryError> {
    let text = std::fs::read_to_string(path).map_err(|e| GeometryError::Io {
        path: path.display().to_string(),
        source: e,
    })?;
    match MeshFormat::from_path(path) {
        Some(MeshFormat::Obj) => parse_obj(&text),
        Some(MeshFormat::Off) => parse_off(&text),
        None => load_mesh(&text),
    }
}

pub fn parse_obj(text: &str) -> Result<TriMesh, GeometryError> {
    let mut vertices = Vec::new();
    let mut faces: Vec<([usize; 3], usize)> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        let mut toks = line.split_whitespace();
        match toks.next() {
            Some("v") => {
                let x = parse_f64(toks.next(), line_no)?;
                let y = parse_f64(toks.next(), line_no)?;
                let z = parse_f64(toks.next(), line_no)?;
                vertices.push(Vec3::new(x, y, z));
            }
            Some("f") => {
                let idx: Vec<&str> = toks.collect();
                if idx.len() != 3 {
                    return Err(GeometryError::NonTriangularFace {
                        line: line_no,
                        arity: idx.len(),
                    });
                }
                let mut tri = [0usize; 3];
                for (slot, tok) in tri.iter_mut().zip(idx) {
                    let head = tok.split('/').next().unwrap_or("");
                    let v: i64 = head
                        .parse()
                        .map_err(|_| parse_err(line_no, format!("invalid face index {tok:?}")))?;
                    if v < 1 {
                        return Err(parse_err(line_no, format!("face index {v} must be 1-based positive")));
                    }
                    *slot = (v - 1) as usize;
                }
                faces.push((tri, line_no));
            }
            Some("vn" | "vt" | "o" | "g" | "s" | "usemtl" | "mtllib") | None => {}
            Some(other) => {
                return Err(parse_err(line_no, format!("unsupported record {other:?}")));
            }
        }
    }
    check_indices(&faces, vertices.len())?;
    TriMesh::new(vertices, faces.into_iter().map(|(t, _)| t).collect())
}

fn check_indices(faces: &[([usize; 3], usize)], n: usize) -> Result<(), GeometryError> {
    for (t, (tri, line)) in faces.iter().enumerate() {
        if let Some(&bad) = tri.iter().find(|&&i| i >= n) {
            log::debug!("face on line {line} references vertex {bad}");
            return Err(GeometryError::IndexOutOfRange {
                triangle: t,
                index: bad,
                vertex_count: n,
            });
        }
    }
    Ok(())
}

pub fn parse_off(text: &str) -> Result<TriMesh, GeometryError> {
    // (line number, content) of meaningful lines
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("").trim()))
        .filter(|(_, l)| !l.is_empty());

    let (hl, header) = lines.next().ok_or_else(|| parse_err(1, "empty document"))?;
    let rest_of_header = header
        .strip_prefix("OFF")
        .ok_or_else(|| parse_err(hl, "missing OFF header"))?
        .trim();
    let (cl, counts) = if rest_of_header.is_empty() {
        lines.next().ok_or_else(|| parse_err(hl, "missing counts line"))?
    } else {
        (hl, rest_of_header)
    };
    let counts: Vec<usize> = counts
        .split_whitespace()
        .map(|t| t.parse().map_err(|_| parse_err(cl, format!("invalid count {t:?}"))))
        .collect::<Result<_, _>>()?;
    if counts.len() < 2 {
        return Err(parse_err(cl, "expected vertex and face counts"));
    }
    let (nv, nf) = (counts[0], counts[1]);

    let mut vertices = Vec::with_capacity(nv);
    for _ in 0..nv {
        let (ln, l) = lines
            .next()
            .ok_or_else(|| parse_err(cl, format!("expected {nv} vertices, found {}", vertices.len())))?;
        let mut toks = l.split_whitespace();
        let x = parse_f64(toks.next(), ln)?;
        let y = parse_f64(toks.next(), ln)?;
        let z = parse_f64(toks.next(), ln)?;
        vertices.push(Vec3::new(x, y, z));
    }
    let mut faces = Vec::with_capacity(nf);
    for _ in 0..nf {
        let (ln, l) = lines
            .next()
            .ok_or_else(|| parse_err(cl, format!("expected {nf} faces, found {}", faces.len())))?;
        let toks: Vec<&str> = l.split_whitespace().collect();
        let arity: usize = toks
            .first()
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| parse_err(ln, "invalid face arity"))?;
        if arity != 3 {
            return Err(GeometryError::NonTriangularFace { line: ln, arity });
        }
        if toks.len() < 4 {
            return Err(parse_err(ln, "face line has fewer than 3 indices"));
        }
        let mut tri = [0usize; 3];
        for (slot, tok) in tri.iter_mut().zip(&toks[1..4]) {
            *slot = tok
                .parse()
                .map_err(|_| parse_err(ln, format!("invalid face index {tok:?}")))?;
        }
        faces.push((tri, ln));
    }
    check_indices(&faces, vertices.len())?;
    TriMesh::new(vertices, faces.into_iter().map(|(t, _)| t).collect())
}

/// OFF text with coordinates at full round-trip precision.
pub fn write_off(mesh: &TriMesh) -> String {
    let mut out = String::with_capacity(mesh.vertex_count() * 40 + mesh.triangle_count() * 20);
    let _ = writeln!(out, "OFF\n{} {} 0", mesh.vertex_count(), mesh.triangle_count());
    for v in mesh.vertices() {
        let _ = writeln!(out, "{} {} {}", v.x, v.y, v.z);
    }
    for [a, b, c] in mesh.triangles() {
        let _ = writeln!(out, "3 {a} {b} {c}");
    }
    out
}

pub fn write_obj(mesh: &TriMesh) -> String {
    let mut out = String::new();
    for v in mesh.vertices() {
        let _ = writeln!(out, "v {} {} {}", v.x, v.y, v.z);
    }
    for [a, b, c] in mesh.triangles() {
        let _ = writeln!(out, "f {} {} {}", a + 1, b + 1, c + 1);
    }
    out
}
