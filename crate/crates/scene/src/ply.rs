//! Minimal PLY reader (ascii, binary little/big endian) and binary
//! little-endian writer. Only the `vertex` element is decoded; other
//! elements are skipped.

use std::fmt;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("PLY error at byte {offset}: {message}")]
pub struct PlyError {
    pub offset: usize,
    pub message: String,
}

fn fail<T>(offset: usize, message: impl Into<String>) -> Result<T, PlyError> {
    Err(PlyError {
        offset,
        message: message.into(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Ascii,
    BinaryLittleEndian,
    BinaryBigEndian,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScalarType {
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

    pub fn size(self) -> usize {
        match self {
            ScalarType::I8 | ScalarType::U8 => 1,
            ScalarType::I16 | ScalarType::U16 => 2,
            ScalarType::I32 | ScalarType::U32 | ScalarType::F32 => 4,
            ScalarType::F64 => 8,
        }
    }

    fn decode(self, b: &[u8], big: bool) -> f64 {
        macro_rules! num {
            ($t:ty, $n:expr) => {{
                let a: [u8; $n] = b[..$n].try_into().unwrap();
                (if big { <$t>::from_be_bytes(a) } else { <$t>::from_le_bytes(a) }) as f64
            }};
        }
        match self {
            ScalarType::I8 => b[0] as i8 as f64,
            ScalarType::U8 => b[0] as f64,
            ScalarType::I16 => num!(i16, 2),
            ScalarType::U16 => num!(u16, 2),
            ScalarType::I32 => num!(i32, 4),
            ScalarType::U32 => num!(u32, 4),
            ScalarType::F32 => num!(f32, 4),
            ScalarType::F64 => num!(f64, 8),
        }
    }

    fn encode(self, v: f64, out: &mut Vec<u8>) {
        match self {
            ScalarType::I8 => out.push(v as i8 as u8),
            ScalarType::U8 => out.push(v as u8),
            ScalarType::I16 => out.extend_from_slice(&(v as i16).to_le_bytes()),
            ScalarType::U16 => out.extend_from_slice(&(v as u16).to_le_bytes()),
            ScalarType::I32 => out.extend_from_slice(&(v as i32).to_le_bytes()),
            ScalarType::U32 => out.extend_from_slice(&(v as u32).to_le_bytes()),
            ScalarType::F32 => out.extend_from_slice(&(v as f32).to_le_bytes()),
            ScalarType::F64 => out.extend_from_slice(&v.to_le_bytes()),
        }
    }

    pub fn is_integer(self) -> bool {
        !matches!(self, ScalarType::F32 | ScalarType::F64)
    }
}

impl fmt::Display for ScalarType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ScalarType::I8 => "char",
            ScalarType::U8 => "uchar",
            ScalarType::I16 => "short",
            ScalarType::U16 => "ushort",
            ScalarType::I32 => "int",
            ScalarType::U32 => "uint",
            ScalarType::F32 => "float",
            ScalarType::F64 => "double",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PropertyKind {
    Scalar(ScalarType),
    List { count: ScalarType, item: ScalarType },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Property {
    pub name: String,
    pub kind: PropertyKind,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Element {
    pub name: String,
    pub count: usize,
    pub properties: Vec<Property>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Header {
    pub format: Format,
    pub elements: Vec<Element>,
    /// Bytes up to and including the `end_header` line.
    pub len: usize,
}

/// Decoded vertex rows, one `f64` per scalar property.
#[derive(Debug, Clone, PartialEq)]
pub struct VertexTable {
    pub names: Vec<String>,
    pub types: Vec<ScalarType>,
    pub rows: usize,
    /// Row-major, `rows × names.len()`.
    pub data: Vec<f64>,
}

impl VertexTable {
    pub fn column(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn has(&self, name: &str) -> bool {
        self.column(name).is_some()
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.names.len() + col]
    }
}

pub fn parse_header(bytes: &[u8]) -> Result<Header, PlyError> {
    let mut pos = 0;
    let next_line = |pos: &mut usize| -> Option<(usize, String)> {
        if *pos >= bytes.len() {
            return None;
        }
        let start = *pos;
        let end = bytes[start..].iter().position(|b| *b == b'\n').map_or(bytes.len(), |i| start + i);
        *pos = (end + 1).min(bytes.len() + 1);
        let line = String::from_utf8_lossy(&bytes[start..end]).trim_end_matches('\r').to_string();
        Some((start, line))
    };
    match next_line(&mut pos) {
        Some((_, l)) if l.trim() == "ply" => {}
        _ => return fail(0, "missing 'ply' magic line"),
    }
    let mut format = None;
    let mut elements: Vec<Element> = Vec::new();
    loop {
        let Some((at, line)) = next_line(&mut pos) else {
            return fail(bytes.len(), "header has no end_header line");
        };
        let words: Vec<&str> = line.split_whitespace().collect();
        match words.as_slice() {
            [] => {}
            ["comment", ..] | ["obj_info", ..] => {}
            ["format", f, _version] => {
                format = Some(match *f {
                    "ascii" => Format::Ascii,
                    "binary_little_endian" => Format::BinaryLittleEndian,
                    "binary_big_endian" => Format::BinaryBigEndian,
                    other => return fail(at, format!("unknown format '{other}'")),
                })
            }
            ["element", name, count] => {
                let Ok(count) = count.parse() else {
                    return fail(at, format!("bad element count '{count}'"));
                };
                elements.push(Element {
                    name: name.to_string(),
                    count,
                    properties: Vec::new(),
                });
            }
            ["property", "list", c, i, name] => {
                let (Some(count), Some(item)) = (ScalarType::parse(c), ScalarType::parse(i)) else {
                    return fail(at, format!("unknown list types in '{line}'"));
                };
                let Some(el) = elements.last_mut() else {
                    return fail(at, "property before any element");
                };
                el.properties.push(Property {
                    name: name.to_string(),
                    kind: PropertyKind::List { count, item },
                });
            }
            ["property", t, name] => {
                let Some(t) = ScalarType::parse(t) else {
                    return fail(at, format!("unknown property type '{t}'"));
                };
                let Some(el) = elements.last_mut() else {
                    return fail(at, "property before any element");
                };
                el.properties.push(Property {
                    name: name.to_string(),
                    kind: PropertyKind::Scalar(t),
                });
            }
            ["end_header"] => break,
            _ => return fail(at, format!("unrecognised header line '{line}'")),
        }
    }
    let Some(format) = format else {
        return fail(0, "header has no format line");
    };
    Ok(Header {
        format,
        elements,
        len: pos.min(bytes.len()),
    })
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Cursor<'_> {
    fn take(&mut self, n: usize) -> Result<&[u8], PlyError> {
        if self.pos + n > self.bytes.len() {
            return fail(self.pos, "unexpected end of data");
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn token(&mut self) -> Result<(usize, &str), PlyError> {
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
        let start = self.pos;
        while self.pos < self.bytes.len() && !self.bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
        if start == self.pos {
            return fail(start, "unexpected end of data");
        }
        let s = std::str::from_utf8(&self.bytes[start..self.pos]).map_err(|_| PlyError {
            offset: start,
            message: "non-UTF-8 token".into(),
        })?;
        Ok((start, s))
    }

    fn value(&mut self, t: ScalarType, format: Format) -> Result<(usize, f64), PlyError> {
        match format {
            Format::Ascii => {
                let (at, tok) = self.token()?;
                let v: f64 = tok.parse().map_err(|_| PlyError {
                    offset: at,
                    message: format!("'{tok}' is not a number"),
                })?;
                Ok((at, v))
            }
            _ => {
                let at = self.pos;
                let b = self.take(t.size())?;
                Ok((at, t.decode(b, format == Format::BinaryBigEndian)))
            }
        }
    }
}

/// Reads the `vertex` element; returns an empty table when there is none.
pub fn read_vertices(bytes: &[u8]) -> Result<VertexTable, PlyError> {
    let header = parse_header(bytes)?;
    let mut cur = Cursor {
        bytes,
        pos: header.len,
    };
    let mut table = VertexTable {
        names: Vec::new(),
        types: Vec::new(),
        rows: 0,
        data: Vec::new(),
    };
    for el in &header.elements {
        let is_vertex = el.name == "vertex";
        if is_vertex {
            for p in &el.properties {
                if let PropertyKind::Scalar(t) = p.kind {
                    table.names.push(p.name.clone());
                    table.types.push(t);
                }
            }
            table.rows = el.count;
            table.data.reserve(el.count.saturating_mul(table.names.len()).min(1 << 28));
        }
        for _ in 0..el.count {
            for p in &el.properties {
                match p.kind {
                    PropertyKind::Scalar(t) => {
                        let (at, v) = cur.value(t, header.format)?;
                        if is_vertex {
                            if !v.is_finite() {
                                return fail(at, format!("non-finite value in property '{}'", p.name));
                            }
                            table.data.push(v);
                        }
                    }
                    PropertyKind::List { count, item } => {
                        let (at, n) = cur.value(count, header.format)?;
                        if !(n >= 0.0) || n.fract() != 0.0 {
                            return fail(at, format!("bad list length {n}"));
                        }
                        for _ in 0..n as usize {
                            cur.value(item, header.format)?;
                        }
                    }
                }
            }
        }
        if is_vertex && header.format != Format::Ascii && cur.pos > bytes.len() {
            return fail(bytes.len(), "vertex data truncated");
        }
    }
    Ok(table)
}

/// Binary little-endian vertex writer with a fixed property list.
#[derive(Debug, Clone, PartialEq)]
pub struct PlyWriter {
    properties: Vec<(String, ScalarType)>,
    comments: Vec<String>,
}

impl PlyWriter {
    pub fn new(properties: Vec<(String, ScalarType)>) -> Self {
        PlyWriter {
            properties,
            comments: Vec::new(),
        }
    }

    pub fn comment(mut self, c: impl Into<String>) -> Self {
        self.comments.push(c.into());
        self
    }

    pub fn header(&self, rows: usize) -> String {
        let mut h = String::from("ply\nformat binary_little_endian 1.0\n");
        for c in &self.comments {
            h.push_str(&format!("comment {c}\n"));
        }
        h.push_str(&format!("element vertex {rows}\n"));
        for (name, t) in &self.properties {
            h.push_str(&format!("property {t} {name}\n"));
        }
        h.push_str("end_header\n");
        h
    }

    pub fn record_len(&self) -> usize {
        self.properties.iter().map(|(_, t)| t.size()).sum()
    }

    /// Exact encoded size for `rows` vertices.
    pub fn encoded_len(&self, rows: usize) -> usize {
        self.header(rows).len() + rows * self.record_len()
    }

    /// Encodes `rows` vertices; `row(i, out)` must push one value per property.
    pub fn encode<F>(&self, rows: usize, mut row: F) -> Vec<u8>
    where
        F: FnMut(usize, &mut Vec<f64>),
    {
        let mut out = Vec::with_capacity(self.encoded_len(rows));
        out.extend_from_slice(self.header(rows).as_bytes());
        let mut values = Vec::with_capacity(self.properties.len());
        for i in 0..rows {
            values.clear();
            row(i, &mut values);
            assert_eq!(values.len(), self.properties.len(), "row {i} has the wrong arity");
            for ((_, t), v) in self.properties.iter().zip(&values) {
                let v = if t.is_integer() { v.round() } else { *v };
                t.encode(v, &mut out);
            }
        }
        out
    }
}
