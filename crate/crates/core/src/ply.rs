//! PLY reading and writing for labeled point clouds.
//!
//! Supported: `ascii 1.0` and `binary_little_endian 1.0`, a single `vertex`
//! element with `x y z` (float or double), optional `red green blue`
//! (uchar) and optional `label` (int). Anything else is rejected.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::error::{Error, Location, Result};
use crate::scene::{PointCloudScene, UNLABELED};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PlyFormat {
    Ascii,
    #[default]
    BinaryLittleEndian,
}

/// A scene read from disk plus what had to be defaulted.
#[derive(Debug, Clone)]
pub struct LoadedScene {
    pub scene: PointCloudScene,
    /// Set when the file had no `label` property; every label is then -1.
    pub label_missing: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Scalar {
    F32,
    F64,
    U8,
    I32,
}

impl Scalar {
    fn parse(s: &str) -> Option<Scalar> {
        Some(match s {
            "float" | "float32" => Scalar::F32,
            "double" | "float64" => Scalar::F64,
            "uchar" | "uint8" => Scalar::U8,
            "int" | "int32" => Scalar::I32,
            _ => return None,
        })
    }

    fn size(self) -> usize {
        match self {
            Scalar::U8 => 1,
            Scalar::F32 | Scalar::I32 => 4,
            Scalar::F64 => 8,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Field {
    X,
    Y,
    Z,
    Red,
    Green,
    Blue,
    Label,
}

impl Field {
    fn parse(name: &str) -> Option<Field> {
        Some(match name {
            "x" => Field::X,
            "y" => Field::Y,
            "z" => Field::Z,
            "red" => Field::Red,
            "green" => Field::Green,
            "blue" => Field::Blue,
            "label" => Field::Label,
            _ => return None,
        })
    }

    fn accepts(self, ty: Scalar) -> bool {
        match self {
            Field::X | Field::Y | Field::Z => matches!(ty, Scalar::F32 | Scalar::F64),
            Field::Red | Field::Green | Field::Blue => ty == Scalar::U8,
            Field::Label => ty == Scalar::I32,
        }
    }
}

struct Header {
    format: PlyFormat,
    count: usize,
    props: Vec<(Field, Scalar)>,
    /// Byte length of the header including the `end_header` line.
    len: usize,
    /// Number of header lines.
    lines: usize,
}

fn parse_err(path: &Path, location: Location, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        location,
        message: message.into(),
    }
}

fn parse_header(path: &Path, bytes: &[u8]) -> Result<Header> {
    let mut pos = 0;
    let mut line_no = 0;
    let mut format = None;
    let mut count = None;
    let mut props: Vec<(Field, Scalar)> = Vec::new();
    loop {
        let Some(nl) = bytes[pos..].iter().position(|&b| b == b'\n') else {
            return Err(parse_err(
                path,
                Location::Line(line_no + 1),
                "header ended before `end_header`",
            ));
        };
        line_no += 1;
        let raw = &bytes[pos..pos + nl];
        pos += nl + 1;
        let line = std::str::from_utf8(raw)
            .map_err(|_| parse_err(path, Location::Line(line_no), "header is not valid UTF-8"))?
            .trim_end_matches('\r');
        let at = Location::Line(line_no);
        let mut words = line.split_whitespace();
        let keyword = words.next().unwrap_or("");
        if line_no == 1 {
            if line.trim() != "ply" {
                return Err(parse_err(path, at, "missing `ply` magic line"));
            }
            continue;
        }
        match keyword {
            "" | "comment" | "obj_info" => {}
            "format" => {
                let fmt = match words.next() {
                    Some("ascii") => PlyFormat::Ascii,
                    Some("binary_little_endian") => PlyFormat::BinaryLittleEndian,
                    other => {
                        return Err(parse_err(
                            path,
                            at,
                            format!("unsupported format `{}`", other.unwrap_or("")),
                        ))
                    }
                };
                if words.next() != Some("1.0") {
                    return Err(parse_err(path, at, "unsupported format version"));
                }
                format = Some(fmt);
            }
            "element" => {
                let name = words.next().unwrap_or("");
                if name != "vertex" || count.is_some() {
                    return Err(parse_err(path, at, format!("unsupported element `{name}`")));
                }
                let n = words
                    .next()
                    .and_then(|w| w.parse::<usize>().ok())
                    .ok_or_else(|| parse_err(path, at, "bad element count"))?;
                count = Some(n);
            }
            "property" => {
                if count.is_none() {
                    return Err(parse_err(path, at, "property before element"));
                }
                let ty = words.next().unwrap_or("");
                if ty == "list" {
                    return Err(parse_err(path, at, "list properties are not supported"));
                }
                let name = words.next().unwrap_or("");
                let field = Field::parse(name)
                    .ok_or_else(|| parse_err(path, at, format!("unknown property `{name}`")))?;
                let scalar = Scalar::parse(ty)
                    .filter(|&s| field.accepts(s))
                    .ok_or_else(|| {
                        parse_err(path, at, format!("unsupported type `{ty}` for `{name}`"))
                    })?;
                if props.iter().any(|(f, _)| *f == field) {
                    return Err(parse_err(path, at, format!("duplicate property `{name}`")));
                }
                props.push((field, scalar));
            }
            "end_header" => break,
            other => {
                return Err(parse_err(
                    path,
                    at,
                    format!("unexpected header keyword `{other}`"),
                ))
            }
        }
    }
    let at = Location::Line(line_no);
    let format = format.ok_or_else(|| parse_err(path, at, "missing format line"))?;
    let count = count.ok_or_else(|| parse_err(path, at, "missing vertex element"))?;
    for f in [Field::X, Field::Y, Field::Z] {
        if !props.iter().any(|(p, _)| *p == f) {
            return Err(parse_err(
                path,
                at,
                format!("missing coordinate property {f:?}"),
            ));
        }
    }
    let n_colors = props
        .iter()
        .filter(|(f, _)| matches!(f, Field::Red | Field::Green | Field::Blue))
        .count();
    if n_colors != 0 && n_colors != 3 {
        return Err(parse_err(
            path,
            at,
            "color needs all of red, green and blue",
        ));
    }
    Ok(Header {
        format,
        count,
        props,
        len: pos,
        lines: line_no,
    })
}

struct Columns {
    positions: Vec<[f64; 3]>,
    colors: Option<Vec<[f32; 3]>>,
    labels: Option<Vec<i32>>,
}

impl Columns {
    fn new(header: &Header) -> Self {
        let has = |f| header.props.iter().any(|(p, _)| *p == f);
        Columns {
            positions: Vec::with_capacity(header.count),
            colors: has(Field::Red).then(|| Vec::with_capacity(header.count)),
            labels: has(Field::Label).then(|| Vec::with_capacity(header.count)),
        }
    }

    fn push(&mut self, row: &[(Field, f64)]) {
        let mut p = [0.0; 3];
        let mut c = [0.0f32; 3];
        let mut label = UNLABELED;
        for &(f, v) in row {
            match f {
                Field::X => p[0] = v,
                Field::Y => p[1] = v,
                Field::Z => p[2] = v,
                Field::Red => c[0] = v as f32 / 255.0,
                Field::Green => c[1] = v as f32 / 255.0,
                Field::Blue => c[2] = v as f32 / 255.0,
                Field::Label => label = v as i32,
            }
        }
        self.positions.push(p);
        if let Some(cs) = &mut self.colors {
            cs.push(c);
        }
        if let Some(ls) = &mut self.labels {
            ls.push(label);
        }
    }
}

fn read_ascii(path: &Path, header: &Header, body: &[u8]) -> Result<Columns> {
    let text = std::str::from_utf8(body).map_err(|e| {
        parse_err(
            path,
            Location::Byte((header.len + e.valid_up_to()) as u64),
            "body is not valid UTF-8",
        )
    })?;
    let mut cols = Columns::new(header);
    let mut row = Vec::with_capacity(header.props.len());
    let mut lines = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty());
    for k in 0..header.count {
        let Some((idx, line)) = lines.next() else {
            return Err(parse_err(
                path,
                Location::Line(header.lines + text.lines().count() + 1),
                format!("expected {} vertices, found {k}", header.count),
            ));
        };
        let at = Location::Line(header.lines + idx + 1);
        row.clear();
        let mut tokens = line.split_whitespace();
        for &(field, ty) in &header.props {
            let tok = tokens
                .next()
                .ok_or_else(|| parse_err(path, at, "too few values in vertex row"))?;
            let v = match ty {
                Scalar::F32 => tok.parse::<f32>().map(f64::from).ok(),
                Scalar::F64 => tok.parse::<f64>().ok(),
                Scalar::U8 => tok.parse::<u8>().map(f64::from).ok(),
                Scalar::I32 => tok.parse::<i32>().map(f64::from).ok(),
            }
            .ok_or_else(|| parse_err(path, at, format!("invalid value `{tok}`")))?;
            row.push((field, v));
        }
        if tokens.next().is_some() {
            return Err(parse_err(path, at, "too many values in vertex row"));
        }
        cols.push(&row);
    }
    if let Some((idx, _)) = lines.next() {
        return Err(parse_err(
            path,
            Location::Line(header.lines + idx + 1),
            "data after the last vertex",
        ));
    }
    Ok(cols)
}

fn read_binary(path: &Path, header: &Header, body: &[u8]) -> Result<Columns> {
    let stride: usize = header.props.iter().map(|(_, t)| t.size()).sum();
    let needed = header.count * stride;
    if body.len() < needed {
        let complete = body.len() / stride;
        return Err(parse_err(
            path,
            Location::Byte((header.len + complete * stride) as u64),
            format!(
                "payload truncated: expected {} vertices, found {complete}",
                header.count
            ),
        ));
    }
    if body.len() > needed {
        return Err(parse_err(
            path,
            Location::Byte((header.len + needed) as u64),
            "data after the last vertex",
        ));
    }
    let mut cols = Columns::new(header);
    let mut row = Vec::with_capacity(header.props.len());
    for rec in body.chunks_exact(stride) {
        row.clear();
        let mut off = 0;
        for &(field, ty) in &header.props {
            let b = &rec[off..off + ty.size()];
            let v = match ty {
                Scalar::F32 => f32::from_le_bytes(b.try_into().unwrap()) as f64,
                Scalar::F64 => f64::from_le_bytes(b.try_into().unwrap()),
                Scalar::U8 => b[0] as f64,
                Scalar::I32 => i32::from_le_bytes(b.try_into().unwrap()) as f64,
            };
            row.push((field, v));
            off += ty.size();
        }
        cols.push(&row);
    }
    Ok(cols)
}

/// Parses PLY bytes; `path` is only used in error messages.
pub fn parse_scene(path: &Path, bytes: &[u8]) -> Result<LoadedScene> {
    let header = parse_header(path, bytes)?;
    let body = &bytes[header.len..];
    let cols = match header.format {
        PlyFormat::Ascii => read_ascii(path, &header, body)?,
        PlyFormat::BinaryLittleEndian => read_binary(path, &header, body)?,
    };
    if let Some(i) = cols
        .positions
        .iter()
        .position(|p| !p.iter().all(|v| v.is_finite()))
    {
        return Err(Error::Format {
            path: path.to_path_buf(),
            message: format!("non-finite coordinate at vertex {i}"),
        });
    }
    let label_missing = cols.labels.is_none();
    let n = cols.positions.len();
    Ok(LoadedScene {
        scene: PointCloudScene {
            positions: cols.positions,
            colors: cols.colors,
            labels: cols.labels.unwrap_or_else(|| vec![UNLABELED; n]),
        },
        label_missing,
    })
}

pub fn load_scene(path: impl AsRef<Path>) -> Result<LoadedScene> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    parse_scene(path, &bytes)
}

fn color_byte(c: f32) -> u8 {
    (c * 255.0).round().clamp(0.0, 255.0) as u8
}

/// Encodes a scene as PLY. Positions are stored as 32-bit floats and
/// colors as 8-bit channels.
pub fn encode_scene(scene: &PointCloudScene, format: PlyFormat) -> Result<Vec<u8>> {
    if scene.labels.len() != scene.len() {
        return Err(Error::Alignment {
            what: "labels".into(),
            expected: scene.len(),
            found: scene.labels.len(),
        });
    }
    if let Some(c) = &scene.colors {
        if c.len() != scene.len() {
            return Err(Error::Alignment {
                what: "colors".into(),
                expected: scene.len(),
                found: c.len(),
            });
        }
    }
    let mut out = Vec::with_capacity(64 + scene.len() * 19);
    let fmt = match format {
        PlyFormat::Ascii => "ascii",
        PlyFormat::BinaryLittleEndian => "binary_little_endian",
    };
    let _ = write!(
        out,
        "ply\nformat {fmt} 1.0\nelement vertex {}\nproperty float x\nproperty float y\nproperty float z\n",
        scene.len()
    );
    if scene.colors.is_some() {
        out.extend_from_slice(b"property uchar red\nproperty uchar green\nproperty uchar blue\n");
    }
    out.extend_from_slice(b"property int label\nend_header\n");
    for i in 0..scene.len() {
        let p = scene.positions[i].map(|v| v as f32);
        let c = scene.colors.as_ref().map(|c| c[i].map(color_byte));
        let l = scene.labels[i];
        match format {
            PlyFormat::Ascii => {
                let _ = write!(out, "{} {} {}", p[0], p[1], p[2]);
                if let Some(c) = c {
                    let _ = write!(out, " {} {} {}", c[0], c[1], c[2]);
                }
                let _ = writeln!(out, " {l}");
            }
            PlyFormat::BinaryLittleEndian => {
                for v in p {
                    out.extend_from_slice(&v.to_le_bytes());
                }
                if let Some(c) = c {
                    out.extend_from_slice(&c);
                }
                out.extend_from_slice(&l.to_le_bytes());
            }
        }
    }
    Ok(out)
}

pub fn save_scene(
    scene: &PointCloudScene,
    path: impl AsRef<Path>,
    format: PlyFormat,
) -> Result<()> {
    let path = path.as_ref();
    let bytes = encode_scene(scene, format)?;
    fs::write(path, bytes).map_err(|e| Error::io(PathBuf::from(path), e))
}
