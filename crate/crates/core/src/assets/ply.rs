//! Binary little-endian PLY reader/writer for the standard 3DGS vertex layout.

use std::path::Path;

use super::point::{GaussianCloud, GaussianPoint, ATTRIBUTE_COUNT, ATTRIBUTE_NAMES};
use super::AssetError;

/// Vertex properties every asset must carry; extra properties are skipped.
pub const REQUIRED_PROPERTIES: [&str; ATTRIBUTE_COUNT] = ATTRIBUTE_NAMES;

#[derive(Debug, Clone, Copy, PartialEq)]
enum ScalarType {
    I8,
    U8,
    I16,
    U16,
    I32,
    U32,
    F32,
    F64,
}

impl ScalarType {
    fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "char" | "int8" => ScalarType::I8,
            "uchar" | "uint8" => ScalarType::U8,
            "short" | "int16" => ScalarType::I16,
            "ushort" | "uint16" => ScalarType::U16,
            "int" | "int32" => ScalarType::I32,
            "uint" | "uint32" => ScalarType::U32,
            "float" | "float32" => ScalarType::F32,
            "double" | "float64" => ScalarType::F64,
            _ => return None,
        })
    }

    fn size(self) -> usize {
        match self {
            ScalarType::I8 | ScalarType::U8 => 1,
            ScalarType::I16 | ScalarType::U16 => 2,
            ScalarType::I32 | ScalarType::U32 | ScalarType::F32 => 4,
            ScalarType::F64 => 8,
        }
    }
}

#[derive(Debug)]
struct Property {
    name: String,
    ty: ScalarType,
    offset: usize,
}

#[derive(Debug)]
struct Element {
    name: String,
    count: usize,
    properties: Vec<Property>,
    stride: usize,
}

struct Header {
    elements: Vec<Element>,
    body_start: usize,
}

fn header_error(line: usize, content: &str, reason: impl Into<String>) -> AssetError {
    AssetError::Header {
        line,
        content: content.to_string(),
        reason: reason.into(),
    }
}

fn parse_header(bytes: &[u8]) -> Result<Header, AssetError> {
    let mut elements: Vec<Element> = Vec::new();
    let mut pos = 0usize;
    let mut line_no = 0usize;
    let mut saw_format = false;
    loop {
        line_no += 1;
        let rest = &bytes[pos..];
        let Some(nl) = rest.iter().position(|&b| b == b'\n') else {
            let tail = String::from_utf8_lossy(&rest[..rest.len().min(80)]).into_owned();
            return Err(header_error(
                line_no,
                &tail,
                "header ended without `end_header`",
            ));
        };
        let raw = &rest[..nl];
        pos += nl + 1;
        let raw = raw.strip_suffix(b"\r").unwrap_or(raw);
        let Ok(line) = std::str::from_utf8(raw) else {
            let shown = String::from_utf8_lossy(raw).into_owned();
            return Err(header_error(line_no, &shown, "header line is not ASCII"));
        };
        let mut words = line.split_whitespace();
        let keyword = words.next().unwrap_or("");
        if line_no == 1 {
            if line.trim() != "ply" {
                return Err(header_error(line_no, line, "expected `ply` magic"));
            }
            continue;
        }
        match keyword {
            "format" => {
                let fmt = words.next().unwrap_or("");
                if fmt != "binary_little_endian" {
                    return Err(header_error(
                        line_no,
                        line,
                        format!("unsupported format `{fmt}` (only binary_little_endian)"),
                    ));
                }
                saw_format = true;
            }
            "comment" | "obj_info" | "" => {}
            "element" => {
                let (Some(name), Some(count)) = (words.next(), words.next()) else {
                    return Err(header_error(
                        line_no,
                        line,
                        "expected `element <name> <count>`",
                    ));
                };
                let count = count
                    .parse::<usize>()
                    .map_err(|_| header_error(line_no, line, "element count is not an integer"))?;
                elements.push(Element {
                    name: name.to_string(),
                    count,
                    properties: Vec::new(),
                    stride: 0,
                });
            }
            "property" => {
                let Some(element) = elements.last_mut() else {
                    return Err(header_error(line_no, line, "property before any element"));
                };
                let ty = words.next().unwrap_or("");
                if ty == "list" {
                    return Err(header_error(
                        line_no,
                        line,
                        "list properties are not supported",
                    ));
                }
                let ty = ScalarType::parse(ty).ok_or_else(|| {
                    header_error(line_no, line, format!("unknown property type `{ty}`"))
                })?;
                let name = words
                    .next()
                    .ok_or_else(|| header_error(line_no, line, "property without a name"))?;
                element.properties.push(Property {
                    name: name.to_string(),
                    ty,
                    offset: element.stride,
                });
                element.stride += ty.size();
            }
            "end_header" => break,
            _ => {
                return Err(header_error(
                    line_no,
                    line,
                    format!("unknown keyword `{keyword}`"),
                ))
            }
        }
    }
    if !saw_format {
        return Err(header_error(
            line_no,
            "end_header",
            "no `format` line before end_header",
        ));
    }
    Ok(Header {
        elements,
        body_start: pos,
    })
}

fn read_scalar(ty: ScalarType, b: &[u8]) -> f32 {
    match ty {
        ScalarType::F32 => f32::from_le_bytes([b[0], b[1], b[2], b[3]]),
        ScalarType::F64 => {
            f64::from_le_bytes([b[0], b[1], b[2], b[3], b[4], b[5], b[6], b[7]]) as f32
        }
        ScalarType::I8 => b[0] as i8 as f32,
        ScalarType::U8 => b[0] as f32,
        ScalarType::I16 => i16::from_le_bytes([b[0], b[1]]) as f32,
        ScalarType::U16 => u16::from_le_bytes([b[0], b[1]]) as f32,
        ScalarType::I32 => i32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f32,
        ScalarType::U32 => u32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f32,
    }
}

/// Parse a PLY blob; the cloud's source id is left empty.
pub fn parse_ply(bytes: &[u8]) -> Result<GaussianCloud, AssetError> {
    parse_ply_named(bytes, "")
}

pub fn parse_ply_named(bytes: &[u8], source_id: &str) -> Result<GaussianCloud, AssetError> {
    let header = parse_header(bytes)?;
    let Some(vertex_pos) = header.elements.iter().position(|e| e.name == "vertex") else {
        return Err(AssetError::MissingProperty("element vertex".into()));
    };
    let vertex = &header.elements[vertex_pos];

    let mut slots = [(ScalarType::F32, 0usize); ATTRIBUTE_COUNT];
    for (slot, name) in slots.iter_mut().zip(REQUIRED_PROPERTIES) {
        let prop = vertex
            .properties
            .iter()
            .find(|p| p.name == name)
            .ok_or_else(|| AssetError::MissingProperty(name.to_string()))?;
        *slot = (prop.ty, prop.offset);
    }

    let expected: usize = header.elements.iter().map(|e| e.count * e.stride).sum();
    let body = &bytes[header.body_start..];
    if body.len() != expected {
        return Err(AssetError::SizeMismatch {
            expected,
            actual: body.len(),
        });
    }
    if vertex.count == 0 {
        return Err(AssetError::EmptyCloud);
    }

    let start: usize = header.elements[..vertex_pos]
        .iter()
        .map(|e| e.count * e.stride)
        .sum();
    let points = body[start..start + vertex.count * vertex.stride]
        .chunks_exact(vertex.stride)
        .map(|row| {
            let mut v = [0f32; ATTRIBUTE_COUNT];
            for (dst, &(ty, off)) in v.iter_mut().zip(&slots) {
                *dst = read_scalar(ty, &row[off..]);
            }
            GaussianPoint::from_array(&v)
        })
        .collect();
    GaussianCloud::new(source_id, points)
}

/// Read a PLY file; the source id is the file stem.
pub fn read_ply(path: impl AsRef<Path>) -> Result<GaussianCloud, AssetError> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| AssetError::io(path, e))?;
    let id = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    parse_ply_named(&bytes, &id)
}

/// Serialize with exactly the 14 required float properties.
pub fn write_ply(cloud: &GaussianCloud) -> Vec<u8> {
    let mut out = String::from("ply\nformat binary_little_endian 1.0\n");
    out.push_str(&format!("element vertex {}\n", cloud.len()));
    for name in REQUIRED_PROPERTIES {
        out.push_str(&format!("property float {name}\n"));
    }
    out.push_str("end_header\n");
    let mut bytes = out.into_bytes();
    bytes.reserve(cloud.len() * ATTRIBUTE_COUNT * 4);
    for p in cloud.points() {
        for v in p.to_array() {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
    }
    bytes
}
