//! PLY and plain-text readers and writers for labeled clouds and meshes.
//!
//! Written PLY is binary little-endian: vertices carry double `x y z`,
//! optional uchar `red green blue`, uchar `semantic` and uint `instance`;
//! mesh faces carry a uchar/int vertex list plus `semantic` and `instance`.
//! The reader also accepts ASCII PLY and any numeric property types, and
//! treats missing label properties as unlabeled.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use thiserror::Error;

use crate::class::{SemanticClass, UNLABELED};
use crate::cloud::LabeledPointCloud;
use crate::geom::Vec3;
use crate::mesh::LabeledMesh;

#[derive(Debug, Error)]
pub enum IoError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("format error: {0}")]
    Format(String),
}

fn format_err(m: impl Into<String>) -> IoError {
    IoError::Format(m.into())
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum Scalar {
    I8,
    U8,
    I16,
    U16,
    I32,
    U32,
    F32,
    F64,
}

impl Scalar {
    fn parse(s: &str) -> Result<Self, IoError> {
        Ok(match s {
            "char" | "int8" => Scalar::I8,
            "uchar" | "uint8" => Scalar::U8,
            "short" | "int16" => Scalar::I16,
            "ushort" | "uint16" => Scalar::U16,
            "int" | "int32" => Scalar::I32,
            "uint" | "uint32" => Scalar::U32,
            "float" | "float32" => Scalar::F32,
            "double" | "float64" => Scalar::F64,
            _ => return Err(format_err(format!("unknown property type `{s}`"))),
        })
    }

    fn size(self) -> usize {
        match self {
            Scalar::I8 | Scalar::U8 => 1,
            Scalar::I16 | Scalar::U16 => 2,
            Scalar::I32 | Scalar::U32 | Scalar::F32 => 4,
            Scalar::F64 => 8,
        }
    }

    fn decode(self, b: &[u8], big_endian: bool) -> f64 {
        macro_rules! num {
            ($t:ty, $n:expr) => {{
                let a: [u8; $n] = b[..$n].try_into().unwrap();
                (if big_endian { <$t>::from_be_bytes(a) } else { <$t>::from_le_bytes(a) }) as f64
            }};
        }
        match self {
            Scalar::I8 => b[0] as i8 as f64,
            Scalar::U8 => b[0] as f64,
            Scalar::I16 => num!(i16, 2),
            Scalar::U16 => num!(u16, 2),
            Scalar::I32 => num!(i32, 4),
            Scalar::U32 => num!(u32, 4),
            Scalar::F32 => num!(f32, 4),
            Scalar::F64 => num!(f64, 8),
        }
    }
}

#[derive(Debug)]
struct Property {
    name: String,
    /// `Some(count type)` for list properties.
    list: Option<Scalar>,
    ty: Scalar,
}

#[derive(Debug)]
struct Element {
    name: String,
    count: usize,
    props: Vec<Property>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum Encoding {
    Ascii,
    BinaryLe,
    BinaryBe,
}

fn read_header<R: BufRead>(r: &mut R) -> Result<(Encoding, Vec<Element>), IoError> {
    let mut line = String::new();
    let mut next = |line: &mut String| -> Result<(), IoError> {
        line.clear();
        if r.read_line(line)? == 0 {
            return Err(format_err("unexpected end of header"));
        }
        Ok(())
    };
    next(&mut line)?;
    if line.trim_end() != "ply" {
        return Err(format_err("missing `ply` magic"));
    }
    let mut encoding = None;
    let mut elements: Vec<Element> = Vec::new();
    loop {
        next(&mut line)?;
        let words: Vec<&str> = line.split_whitespace().collect();
        match words.as_slice() {
            ["end_header"] => break,
            ["format", f, _] => {
                encoding = Some(match *f {
                    "ascii" => Encoding::Ascii,
                    "binary_little_endian" => Encoding::BinaryLe,
                    "binary_big_endian" => Encoding::BinaryBe,
                    _ => return Err(format_err(format!("unknown format `{f}`"))),
                })
            }
            ["comment", ..] | ["obj_info", ..] | [] => {}
            ["element", name, count] => elements.push(Element {
                name: name.to_string(),
                count: count.parse().map_err(|_| format_err("bad element count"))?,
                props: Vec::new(),
            }),
            ["property", "list", ct, ty, name] => elements
                .last_mut()
                .ok_or_else(|| format_err("property before element"))?
                .props
                .push(Property { name: name.to_string(), list: Some(Scalar::parse(ct)?), ty: Scalar::parse(ty)? }),
            ["property", ty, name] => elements
                .last_mut()
                .ok_or_else(|| format_err("property before element"))?
                .props
                .push(Property { name: name.to_string(), list: None, ty: Scalar::parse(ty)? }),
            _ => return Err(format_err(format!("bad header line `{}`", line.trim_end()))),
        }
    }
    Ok((encoding.ok_or_else(|| format_err("missing format line"))?, elements))
}

/// One decoded record: scalar values, and list values for list properties.
type Record = Vec<Vec<f64>>;

struct BodyReader<R> {
    r: R,
    encoding: Encoding,
    tokens: std::vec::IntoIter<String>,
}

impl<R: BufRead> BodyReader<R> {
    fn token(&mut self) -> Result<f64, IoError> {
        loop {
            if let Some(t) = self.tokens.next() {
                return t.parse().map_err(|_| format_err(format!("bad number `{t}`")));
            }
            let mut line = String::new();
            if self.r.read_line(&mut line)? == 0 {
                return Err(format_err("unexpected end of data"));
            }
            self.tokens = line.split_whitespace().map(str::to_string).collect::<Vec<_>>().into_iter();
        }
    }

    fn scalar(&mut self, ty: Scalar) -> Result<f64, IoError> {
        match self.encoding {
            Encoding::Ascii => self.token(),
            e => {
                let mut b = [0u8; 8];
                self.r.read_exact(&mut b[..ty.size()])?;
                Ok(ty.decode(&b, e == Encoding::BinaryBe))
            }
        }
    }

    fn record(&mut self, el: &Element) -> Result<Record, IoError> {
        el.props
            .iter()
            .map(|p| match p.list {
                None => Ok(vec![self.scalar(p.ty)?]),
                Some(ct) => {
                    let n = self.scalar(ct)? as usize;
                    (0..n).map(|_| self.scalar(p.ty)).collect()
                }
            })
            .collect()
    }
}

struct Ply {
    elements: Vec<(Element, Vec<Record>)>,
}

impl Ply {
    fn read<R: BufRead>(mut r: R) -> Result<Self, IoError> {
        let (encoding, elements) = read_header(&mut r)?;
        let mut body = BodyReader { r, encoding, tokens: Vec::new().into_iter() };
        let mut out = Vec::new();
        for el in elements {
            let records = (0..el.count).map(|_| body.record(&el)).collect::<Result<Vec<_>, _>>()?;
            out.push((el, records));
        }
        Ok(Ply { elements: out })
    }

    fn element(&self, name: &str) -> Option<&(Element, Vec<Record>)> {
        self.elements.iter().find(|(e, _)| e.name == name)
    }
}

fn column(el: &Element, name: &str) -> Option<usize> {
    el.props.iter().position(|p| p.name == name)
}

fn label_u8(v: f64, what: &str) -> Result<u8, IoError> {
    if (0.0..=255.0).contains(&v) && v.fract() == 0.0 {
        Ok(v as u8)
    } else {
        Err(format_err(format!("{what} value {v} out of range")))
    }
}

fn read_vertices(ply: &Ply) -> Result<LabeledPointCloud, IoError> {
    let (el, records) = ply.element("vertex").ok_or_else(|| format_err("no vertex element"))?;
    let xyz: Vec<usize> =
        ["x", "y", "z"].iter().map(|n| column(el, n).ok_or_else(|| format_err(format!("missing property {n}")))).collect::<Result<_, _>>()?;
    let rgb: Option<Vec<usize>> = ["red", "green", "blue"].iter().map(|n| column(el, n)).collect();
    let sem = column(el, "semantic");
    let inst = column(el, "instance");
    let mut cloud = LabeledPointCloud::with_capacity(records.len(), rgb.is_some());
    for rec in records {
        let p = Vec3::new(rec[xyz[0]][0], rec[xyz[1]][0], rec[xyz[2]][0]);
        let color = match &rgb {
            Some(c) => Some([label_u8(rec[c[0]][0], "color")?, label_u8(rec[c[1]][0], "color")?, label_u8(rec[c[2]][0], "color")?]),
            None => None,
        };
        let s = sem.map_or(Ok(UNLABELED), |c| label_u8(rec[c][0], "semantic"))?;
        let i = inst.map_or(0, |c| rec[c][0] as u32);
        cloud.push(p, color, s, i);
    }
    Ok(cloud)
}

fn vertex_header(n: usize, colored: bool, labeled: bool) -> String {
    let mut h = format!("ply\nformat binary_little_endian 1.0\nelement vertex {n}\nproperty double x\nproperty double y\nproperty double z\n");
    if colored {
        h.push_str("property uchar red\nproperty uchar green\nproperty uchar blue\n");
    }
    if labeled {
        h.push_str("property uchar semantic\nproperty uint instance\n");
    }
    h
}

pub fn write_cloud_ply<W: Write>(w: W, cloud: &LabeledPointCloud) -> Result<(), IoError> {
    let mut w = BufWriter::new(w);
    w.write_all(vertex_header(cloud.len(), cloud.colors.is_some(), true).as_bytes())?;
    w.write_all(b"end_header\n")?;
    for i in 0..cloud.len() {
        for c in cloud.positions[i].iter() {
            w.write_all(&c.to_le_bytes())?;
        }
        if let Some(colors) = &cloud.colors {
            w.write_all(&colors[i])?;
        }
        w.write_all(&[cloud.semantic[i]])?;
        w.write_all(&cloud.instance[i].to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_cloud_ply<R: Read>(r: R) -> Result<LabeledPointCloud, IoError> {
    read_vertices(&Ply::read(BufReader::new(r))?)
}

pub fn write_mesh_ply<W: Write>(w: W, mesh: &LabeledMesh) -> Result<(), IoError> {
    let mut w = BufWriter::new(w);
    w.write_all(vertex_header(mesh.vertices.len(), false, false).as_bytes())?;
    w.write_all(
        format!(
            "element face {}\nproperty list uchar int vertex_indices\nproperty uchar semantic\nproperty uint instance\nend_header\n",
            mesh.triangle_count()
        )
        .as_bytes(),
    )?;
    for v in &mesh.vertices {
        for c in v.iter() {
            w.write_all(&c.to_le_bytes())?;
        }
    }
    for t in 0..mesh.triangle_count() {
        w.write_all(&[3])?;
        for &i in &mesh.triangles[t] {
            w.write_all(&(i as i32).to_le_bytes())?;
        }
        w.write_all(&[mesh.tri_semantic[t].id()])?;
        w.write_all(&mesh.tri_instance[t].to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a triangle mesh. Faces with more than three vertices are fanned;
/// faces without a `semantic` property are an error since every triangle
/// must carry a class.
pub fn read_mesh_ply<R: Read>(r: R) -> Result<LabeledMesh, IoError> {
    let ply = Ply::read(BufReader::new(r))?;
    let cloud = read_vertices(&ply)?;
    let (el, records) = ply.element("face").ok_or_else(|| format_err("no face element"))?;
    let idx = column(el, "vertex_indices")
        .or_else(|| column(el, "vertex_index"))
        .ok_or_else(|| format_err("missing vertex_indices"))?;
    let sem = column(el, "semantic").ok_or_else(|| format_err("faces carry no semantic property"))?;
    let inst = column(el, "instance");
    let mut mesh = LabeledMesh { vertices: cloud.positions, ..LabeledMesh::new() };
    for rec in records {
        let id = label_u8(rec[sem][0], "semantic")?;
        let class = SemanticClass::from_id(id).ok_or_else(|| format_err(format!("unknown class id {id}")))?;
        let instance = inst.map_or(0, |c| rec[c][0] as u32);
        let v: Vec<u32> = rec[idx].iter().map(|&x| x as u32).collect();
        if v.len() < 3 {
            return Err(format_err("face with fewer than three vertices"));
        }
        for k in 1..v.len() - 1 {
            mesh.add_triangle([v[0], v[k], v[k + 1]], class, instance);
        }
    }
    mesh.validate().map_err(|e| format_err(e.to_string()))?;
    Ok(mesh)
}

/// One point per line: `x y z r g b semantic instance`. Coordinates use the
/// shortest representation that reads back to the same value.
pub fn write_cloud_text<W: Write>(w: W, cloud: &LabeledPointCloud) -> Result<(), IoError> {
    let mut w = BufWriter::new(w);
    for i in 0..cloud.len() {
        let p = cloud.positions[i];
        let c = cloud.colors.as_ref().map_or([0, 0, 0], |c| c[i]);
        writeln!(w, "{} {} {} {} {} {} {} {}", p.x, p.y, p.z, c[0], c[1], c[2], cloud.semantic[i], cloud.instance[i])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_cloud_text<R: Read>(r: R) -> Result<LabeledPointCloud, IoError> {
    let mut cloud = LabeledPointCloud::with_capacity(0, true);
    for (ln, line) in BufReader::new(r).lines().enumerate() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let bad = || format_err(format!("line {}: expected `x y z r g b semantic instance`", ln + 1));
        let cols: Vec<&str> = line.split_whitespace().collect();
        if cols.len() != 8 {
            return Err(bad());
        }
        let f = |i: usize| cols[i].parse::<f64>().map_err(|_| bad());
        let b = |i: usize| cols[i].parse::<u8>().map_err(|_| bad());
        let inst: u32 = cols[7].parse().map_err(|_| bad())?;
        cloud.push(Vec3::new(f(0)?, f(1)?, f(2)?), Some([b(3)?, b(4)?, b(5)?]), b(6)?, inst);
    }
    Ok(cloud)
}

/// Reads a cloud from `.ply` or `.txt` by extension.
pub fn load_cloud(path: &Path) -> Result<LabeledPointCloud, IoError> {
    let f = File::open(path)?;
    match path.extension().and_then(|e| e.to_str()) {
        Some("ply") => read_cloud_ply(f),
        Some("txt") => read_cloud_text(f),
        _ => Err(format_err(format!("unknown cloud extension: {}", path.display()))),
    }
}

pub fn save_cloud(path: &Path, cloud: &LabeledPointCloud) -> Result<(), IoError> {
    let f = File::create(path)?;
    match path.extension().and_then(|e| e.to_str()) {
        Some("ply") => write_cloud_ply(f, cloud),
        Some("txt") => write_cloud_text(f, cloud),
        _ => Err(format_err(format!("unknown cloud extension: {}", path.display()))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_cloud(colored: bool) -> LabeledPointCloud {
        let mut c = LabeledPointCloud::with_capacity(3, colored);
        c.push(Vec3::new(0.1, -2.5, 1e-7), colored.then_some([1, 2, 3]), 4, 7);
        c.push(Vec3::new(1.0 / 3.0, 5.0, 6.0), colored.then_some([255, 0, 9]), UNLABELED, 0);
        c.push(Vec3::new(-1e6, 0.0, 2.0), colored.then_some([0, 0, 0]), 18, u32::MAX);
        c
    }

    #[test]
    fn binary_cloud_round_trip() {
        for colored in [false, true] {
            let c = sample_cloud(colored);
            let mut buf = Vec::new();
            write_cloud_ply(&mut buf, &c).unwrap();
            assert_eq!(read_cloud_ply(&buf[..]).unwrap(), c);
        }
    }

    #[test]
    fn text_cloud_round_trip() {
        let c = sample_cloud(true);
        let mut buf = Vec::new();
        write_cloud_text(&mut buf, &c).unwrap();
        assert_eq!(read_cloud_text(&buf[..]).unwrap(), c);
        assert!(read_cloud_text(&b"1 2 3\n"[..]).is_err());
    }

    #[test]
    fn mesh_round_trip() {
        let mut m = LabeledMesh::new();
        m.push_quad(
            Vec3::new(0.0, 0.0, 0.0),
            Vec3::new(1.0, 0.0, 0.0),
            Vec3::new(1.0, 1.0, 0.0),
            Vec3::new(0.0, 1.0, 0.0),
            SemanticClass::Road,
            0,
        );
        m.push_triangle(Vec3::new(0.0, 0.0, 1.0), Vec3::new(1.0, 0.0, 1.0), Vec3::new(0.0, 1.0, 1.0), SemanticClass::Vehicle, 3);
        let mut buf = Vec::new();
        write_mesh_ply(&mut buf, &m).unwrap();
        assert_eq!(read_mesh_ply(&buf[..]).unwrap(), m);
    }

    #[test]
    fn ascii_input_with_float_coordinates() {
        let text = "ply\nformat ascii 1.0\ncomment hand written\nelement vertex 4\nproperty float x\nproperty float y\nproperty float z\n\
                    element face 1\nproperty list uchar int vertex_indices\nproperty uchar semantic\nend_header\n\
                    0 0 0\n1 0 0\n1 1 0\n0 1 0\n4 0 1 2 3 14\n";
        let m = read_mesh_ply(text.as_bytes()).unwrap();
        assert_eq!(m.triangle_count(), 2);
        assert_eq!(m.tri_semantic, vec![SemanticClass::Road; 2]);
        let c = read_cloud_ply(text.as_bytes()).unwrap();
        assert_eq!(c.semantic, vec![UNLABELED; 4]);
    }

    #[test]
    fn rejects_garbage() {
        assert!(read_cloud_ply(&b"not a ply"[..]).is_err());
        let truncated = "ply\nformat binary_little_endian 1.0\nelement vertex 2\nproperty double x\nproperty double y\nproperty double z\nend_header\n";
        assert!(read_cloud_ply(truncated.as_bytes()).is_err());
    }
}
