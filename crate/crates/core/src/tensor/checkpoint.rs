//! Binary parameter checkpoints.
//!
//! Layout, little-endian throughout: magic `PTSG`, `u32` version, `u32`
//! tensor count, then per tensor a `u16` name length, the UTF-8 name, a
//! `u8` rank, `rank` `u32` extents and the payload as `f32`.

use std::io::{Read, Write};

use super::{Real, Tensor};
use crate::error::{Error, Result};

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"PTSG";
pub const CHECKPOINT_VERSION: u32 = 1;

pub fn write_checkpoint<T: Real, W: Write>(mut out: W, tensors: &[(&str, &Tensor<T>)]) -> Result<()> {
    let mut buf = Vec::new();
    buf.extend_from_slice(CHECKPOINT_MAGIC);
    buf.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    buf.extend_from_slice(&(tensors.len() as u32).to_le_bytes());
    for (name, t) in tensors {
        let bytes = name.as_bytes();
        let len = u16::try_from(bytes.len())
            .map_err(|_| Error::Argument(format!("tensor name too long: {name}")))?;
        let rank = u8::try_from(t.rank())
            .map_err(|_| Error::Argument(format!("tensor {name} has rank {}", t.rank())))?;
        buf.extend_from_slice(&len.to_le_bytes());
        buf.extend_from_slice(bytes);
        buf.push(rank);
        for &e in t.shape() {
            let e = u32::try_from(e).map_err(|_| Error::Argument(format!("extent {e} too large")))?;
            buf.extend_from_slice(&e.to_le_bytes());
        }
        for &v in t.data() {
            buf.extend_from_slice(&(v.as_f64() as f32).to_le_bytes());
        }
    }
    out.write_all(&buf)?;
    Ok(())
}

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        if self.buf.len() - self.pos < n {
            return Err(Error::Format {
                offset: self.pos as u64,
                message: format!(
                    "truncated {what}: expected {n} bytes, {} available",
                    self.buf.len() - self.pos
                ),
            });
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }
}

pub fn read_checkpoint<R: Read>(mut input: R) -> Result<Vec<(String, Tensor<f32>)>> {
    let mut buf = Vec::new();
    input.read_to_end(&mut buf)?;
    let mut c = Cursor { buf: &buf, pos: 0 };
    if c.take(4, "magic")? != CHECKPOINT_MAGIC {
        return Err(Error::Format { offset: 0, message: "bad magic, expected PTSG".into() });
    }
    let version = c.u32("version")?;
    if version != CHECKPOINT_VERSION {
        return Err(Error::Format { offset: 4, message: format!("unsupported version {version}") });
    }
    let count = c.u32("tensor count")? as usize;
    let mut out = Vec::with_capacity(count.min(1 << 16));
    for _ in 0..count {
        let at = c.pos as u64;
        let len = u16::from_le_bytes(c.take(2, "name length")?.try_into().unwrap()) as usize;
        let name = std::str::from_utf8(c.take(len, "name")?)
            .map_err(|_| Error::Format { offset: at, message: "tensor name is not UTF-8".into() })?
            .to_string();
        let rank = c.take(1, "rank")?[0] as usize;
        let mut shape = Vec::with_capacity(rank);
        for _ in 0..rank {
            shape.push(c.u32("extent")? as usize);
        }
        let n: usize = shape.iter().product();
        let payload = c.take(n * 4, "payload")?;
        let data = payload.chunks_exact(4).map(|b| f32::from_le_bytes(b.try_into().unwrap())).collect();
        let t = Tensor::new(shape, data)
            .map_err(|e| Error::Format { offset: at, message: format!("tensor {name}: {e}") })?;
        out.push((name, t));
    }
    if c.pos != buf.len() {
        return Err(Error::Format {
            offset: c.pos as u64,
            message: format!("{} trailing bytes", buf.len() - c.pos),
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_bit_exact() {
        let a = Tensor::<f32>::new(vec![2, 3], vec![1.0, -0.0, f32::MIN_POSITIVE, 3.5e-12, 7.0, -1e30]).unwrap();
        let b = Tensor::<f32>::vector(vec![0.1, 0.2]);
        let mut buf = Vec::new();
        write_checkpoint(&mut buf, &[("layer.w", &a), ("layer.b", &b)]).unwrap();
        let back = read_checkpoint(&buf[..]).unwrap();
        assert_eq!(back.len(), 2);
        assert_eq!(back[0].0, "layer.w");
        assert_eq!(back[0].1.shape(), &[2, 3]);
        let bits = |t: &Tensor<f32>| t.data().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&back[0].1), bits(&a));
        assert_eq!(bits(&back[1].1), bits(&b));

        let mut again = Vec::new();
        let refs: Vec<(&str, &Tensor<f32>)> = back.iter().map(|(n, t)| (n.as_str(), t)).collect();
        write_checkpoint(&mut again, &refs).unwrap();
        assert_eq!(buf, again);
    }

    #[test]
    fn bad_magic_and_truncation() {
        assert!(matches!(read_checkpoint(&b"NOPE\x01\0\0\0\0\0\0\0"[..]), Err(Error::Format { offset: 0, .. })));
        let t = Tensor::<f32>::vector(vec![1.0, 2.0]);
        let mut buf = Vec::new();
        write_checkpoint(&mut buf, &[("x", &t)]).unwrap();
        buf.truncate(buf.len() - 3);
        match read_checkpoint(&buf[..]) {
            Err(Error::Format { message, .. }) => assert!(message.contains("truncated payload")),
            other => panic!("{other:?}"),
        }
    }
}
