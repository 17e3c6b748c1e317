//! Cloud file formats.
//!
//! Binary (`.pcsg`), little-endian: magic `PCSG`, `u32` version (1), `u32`
//! point count, `u8` has-color flag, `u16` class count, class names as
//! `u16`-length-prefixed UTF-8, then per point `3 x f32` position, optional
//! `3 x u8` color and a `u16` label.
//!
//! ASCII: a header line `pcsg-ascii M=<m> color=<0|1>`, optional
//! `# class <i> <name>` lines, then `x y z [r g b] label` per point.

use std::fmt::Write as _;
use std::io::{Read, Write};
use std::path::Path;

use super::LabeledPointCloud;
use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"PCSG";
const VERSION: u32 = 1;
const ASCII_HEADER: &str = "pcsg-ascii";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CloudFormat {
    Binary,
    Ascii,
}

impl std::str::FromStr for CloudFormat {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "binary" => Ok(CloudFormat::Binary),
            "ascii" => Ok(CloudFormat::Ascii),
            _ => Err(Error::Argument(format!("unknown cloud format {s:?}"))),
        }
    }
}

impl CloudFormat {
    /// `.txt`/`.asc`/`.xyz` are ASCII, everything else binary.
    pub fn for_path(path: &Path) -> CloudFormat {
        match path.extension().and_then(|e| e.to_str()) {
            Some("txt" | "asc" | "xyz") => CloudFormat::Ascii,
            _ => CloudFormat::Binary,
        }
    }
}

pub fn write_binary<W: Write>(mut out: W, cloud: &LabeledPointCloud) -> Result<()> {
    let mut buf = Vec::with_capacity(16 + cloud.len() * 17);
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&VERSION.to_le_bytes());
    buf.extend_from_slice(&(cloud.len() as u32).to_le_bytes());
    buf.push(cloud.colors().is_some() as u8);
    buf.extend_from_slice(&(cloud.num_classes() as u16).to_le_bytes());
    for name in cloud.class_names() {
        let len = u16::try_from(name.len())
            .map_err(|_| Error::Argument(format!("class name too long: {name}")))?;
        buf.extend_from_slice(&len.to_le_bytes());
        buf.extend_from_slice(name.as_bytes());
    }
    for i in 0..cloud.len() {
        for v in cloud.positions()[i] {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        if let Some(c) = cloud.colors() {
            buf.extend_from_slice(&c[i]);
        }
        buf.extend_from_slice(&(cloud.labels()[i] as u16).to_le_bytes());
    }
    out.write_all(&buf)?;
    Ok(())
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        let left = self.buf.len() - self.pos;
        if left < n {
            return Err(Error::Format {
                offset: self.pos as u64,
                message: format!("truncated {what}: expected {n} bytes, found {left}"),
            });
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }
    fn u16(&mut self, what: &str) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2, what)?.try_into().unwrap()))
    }
    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }
    fn f32(&mut self) -> f32 {
        f32::from_le_bytes(self.take(4, "").unwrap().try_into().unwrap())
    }
}

pub fn read_binary<R: Read>(mut input: R) -> Result<LabeledPointCloud> {
    let mut buf = Vec::new();
    input.read_to_end(&mut buf)?;
    let mut r = Reader { buf: &buf, pos: 0 };
    if r.take(4, "magic")? != MAGIC {
        return Err(Error::Format { offset: 0, message: "bad magic, expected PCSG".into() });
    }
    let version = r.u32("version")?;
    if version != VERSION {
        return Err(Error::Format { offset: 4, message: format!("unsupported version {version}") });
    }
    let n = r.u32("point count")? as usize;
    let has_color = match r.take(1, "color flag")?[0] {
        0 => false,
        1 => true,
        f => return Err(Error::Format { offset: 12, message: format!("color flag {f}") }),
    };
    let m = r.u16("class count")? as usize;
    let mut names = Vec::with_capacity(m);
    for _ in 0..m {
        let at = r.pos as u64;
        let len = r.u16("class name length")? as usize;
        let s = std::str::from_utf8(r.take(len, "class name")?)
            .map_err(|_| Error::Format { offset: at, message: "class name is not UTF-8".into() })?;
        names.push(s.to_string());
    }
    let stride = 12 + if has_color { 3 } else { 0 } + 2;
    let expected = n * stride;
    let found = buf.len() - r.pos;
    if found != expected {
        return Err(Error::Format {
            offset: r.pos as u64,
            message: format!("point data: expected {expected} bytes for {n} points, found {found}"),
        });
    }
    let mut positions = Vec::with_capacity(n);
    let mut colors = has_color.then(|| Vec::with_capacity(n));
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        positions.push([r.f32(), r.f32(), r.f32()]);
        if let Some(c) = colors.as_mut() {
            let b = r.take(3, "color")?;
            c.push([b[0], b[1], b[2]]);
        }
        let label = r.u16("label")? as usize;
        if label >= m {
            return Err(Error::Data(format!("point {i}: label {label} out of range for {m} classes")));
        }
        labels.push(label);
    }
    LabeledPointCloud::new(positions, colors, labels, names)
}

pub fn write_ascii<W: Write>(mut out: W, cloud: &LabeledPointCloud) -> Result<()> {
    let mut s = String::with_capacity(cloud.len() * 32);
    let color = cloud.colors().is_some();
    writeln!(s, "{ASCII_HEADER} M={} color={}", cloud.num_classes(), color as u8).unwrap();
    for (i, name) in cloud.class_names().iter().enumerate() {
        writeln!(s, "# class {i} {name}").unwrap();
    }
    for i in 0..cloud.len() {
        let [x, y, z] = cloud.positions()[i];
        write!(s, "{x} {y} {z}").unwrap();
        if let Some(c) = cloud.colors() {
            let [r, g, b] = c[i];
            write!(s, " {r} {g} {b}").unwrap();
        }
        writeln!(s, " {}", cloud.labels()[i]).unwrap();
    }
    out.write_all(s.as_bytes())?;
    Ok(())
}

fn parse_header(line: &str) -> Option<(usize, bool)> {
    let mut parts = line.split_whitespace();
    if parts.next()? != ASCII_HEADER {
        return None;
    }
    let m = parts.next()?.strip_prefix("M=")?.parse().ok()?;
    let color = match parts.next()?.strip_prefix("color=")? {
        "0" => false,
        "1" => true,
        _ => return None,
    };
    parts.next().is_none().then_some((m, color))
}

pub fn read_ascii<R: Read>(mut input: R) -> Result<LabeledPointCloud> {
    let mut text = String::new();
    input
        .read_to_string(&mut text)
        .map_err(|e| Error::Format { offset: 0, message: format!("not UTF-8 text: {e}") })?;
    let mut offset = 0u64;
    let mut lines = text.split_inclusive('\n');
    let header = lines.next().unwrap_or("");
    let (m, has_color) = parse_header(header.trim_end()).ok_or_else(|| Error::Format {
        offset: 0,
        message: format!("expected `{ASCII_HEADER} M=<m> color=<0|1>` header"),
    })?;
    if m == 0 {
        return Err(Error::Format { offset: 0, message: "M must be at least 1".into() });
    }
    offset += header.len() as u64;
    let mut names = LabeledPointCloud::default_class_names(m);
    let mut positions = Vec::new();
    let mut colors = has_color.then(Vec::new);
    let mut labels = Vec::new();
    let width = if has_color { 7 } else { 4 };
    for raw in lines {
        let at = offset;
        offset += raw.len() as u64;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('#') {
            let mut p = rest.split_whitespace();
            if p.next() == Some("class") {
                if let (Some(Ok(i)), Some(name)) = (p.next().map(str::parse::<usize>), p.next()) {
                    if i < m {
                        names[i] = name.to_string();
                    }
                }
            }
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        let bad = |what: &str| Error::Format { offset: at, message: format!("{what} in line {line:?}") };
        if fields.len() != width {
            return Err(bad(&format!("expected {width} fields, found {}", fields.len())));
        }
        let mut p = [0f32; 3];
        for a in 0..3 {
            p[a] = fields[a].parse().map_err(|_| bad("bad coordinate"))?;
        }
        positions.push(p);
        if let Some(c) = colors.as_mut() {
            let mut rgb = [0u8; 3];
            for a in 0..3 {
                rgb[a] = fields[3 + a].parse().map_err(|_| bad("color must be an integer 0-255"))?;
            }
            c.push(rgb);
        }
        let label: usize = fields[width - 1].parse().map_err(|_| bad("bad label"))?;
        if label >= m {
            return Err(Error::Data(format!(
                "point {}: label {label} out of range for {m} classes",
                labels.len()
            )));
        }
        labels.push(label);
    }
    LabeledPointCloud::new(positions, colors, labels, names)
}

/// Reads either format, sniffing the leading bytes.
pub fn read_cloud<R: Read>(mut input: R) -> Result<LabeledPointCloud> {
    let mut buf = Vec::new();
    input.read_to_end(&mut buf)?;
    if buf.starts_with(MAGIC) {
        read_binary(&buf[..])
    } else {
        read_ascii(&buf[..])
    }
}

pub fn load_cloud(path: &Path, format: Option<CloudFormat>) -> Result<LabeledPointCloud> {
    let bytes = std::fs::read(path)?;
    match format {
        Some(CloudFormat::Binary) => read_binary(&bytes[..]),
        Some(CloudFormat::Ascii) => read_ascii(&bytes[..]),
        None => read_cloud(&bytes[..]),
    }
}

pub fn save_cloud(path: &Path, cloud: &LabeledPointCloud, format: CloudFormat) -> Result<()> {
    let mut buf = Vec::new();
    match format {
        CloudFormat::Binary => write_binary(&mut buf, cloud)?,
        CloudFormat::Ascii => write_ascii(&mut buf, cloud)?,
    }
    std::fs::write(path, buf)?;
    Ok(())
}
