// SPDX-License-Identifier: Apache-2.0

//! Binary model and frame-container files, and the labels CSV.
//!
//! All multi-byte integers and floats are little-endian.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::fragment::{BoundingBox, FragmentModel};
use crate::hdc::Hypervector;
use crate::sliding::Frame;

pub const MODEL_MAGIC: &[u8; 4] = b"HSM1";
pub const MODEL_VERSION: u8 = 1;
pub const FRAMES_MAGIC: &[u8; 4] = b"HSF1";
pub const LABELS_HEADER: &str = "frame,x,y,w,h";

/// Model file: magic, version byte, `u32`-length-prefixed generator id,
/// `u32` D, `u32` h, `u32` w, `u64` encoder seed, then `C_neg` and `C_pos`
/// as D `f32` values each.
pub fn encode_model(model: &FragmentModel) -> Vec<u8> {
    let id = model.rng_algorithm_id.as_bytes();
    let mut out = Vec::with_capacity(4 + 1 + 4 + id.len() + 20 + 8 * model.dim);
    out.extend_from_slice(MODEL_MAGIC);
    out.push(MODEL_VERSION);
    out.extend_from_slice(&(id.len() as u32).to_le_bytes());
    out.extend_from_slice(id);
    out.extend_from_slice(&(model.dim as u32).to_le_bytes());
    out.extend_from_slice(&(model.frag_h as u32).to_le_bytes());
    out.extend_from_slice(&(model.frag_w as u32).to_le_bytes());
    out.extend_from_slice(&model.enc_seed.to_le_bytes());
    for v in model.c_neg.values().iter().chain(model.c_pos.values()) {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
    what: &'static str,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.bytes.len() - self.pos < n {
            return Err(Error::data(format!("{} file truncated", self.what)));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(
            self.take(4)?.try_into().expect("4 bytes"),
        ))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(
            self.take(8)?.try_into().expect("8 bytes"),
        ))
    }

    fn f32s(&mut self, n: usize) -> Result<Vec<f32>> {
        let raw = self.take(
            n.checked_mul(4)
                .ok_or_else(|| Error::data("length overflow"))?,
        )?;
        let vals: Vec<f32> = raw
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes(b.try_into().expect("4 bytes")))
            .collect();
        if vals.iter().any(|v| !v.is_finite()) {
            return Err(Error::data(format!(
                "{} file holds non-finite values",
                self.what
            )));
        }
        Ok(vals)
    }

    fn finish(&self) -> Result<()> {
        if self.pos != self.bytes.len() {
            return Err(Error::data(format!(
                "{} file has {} trailing bytes",
                self.what,
                self.bytes.len() - self.pos
            )));
        }
        Ok(())
    }
}

pub fn decode_model(bytes: &[u8]) -> Result<FragmentModel> {
    let mut r = Reader {
        bytes,
        pos: 0,
        what: "model",
    };
    if r.take(4)? != MODEL_MAGIC {
        return Err(Error::data("not a model file (bad magic)"));
    }
    let version = r.take(1)?[0];
    if version != MODEL_VERSION {
        return Err(Error::data(format!("unsupported model version {version}")));
    }
    let id_len = r.u32()? as usize;
    let id = std::str::from_utf8(r.take(id_len)?)
        .map_err(|_| Error::data("model generator id is not UTF-8"))?
        .to_string();
    let dim = r.u32()? as usize;
    let h = r.u32()? as usize;
    let w = r.u32()? as usize;
    let seed = r.u64()?;
    if dim == 0 || h == 0 || w == 0 {
        return Err(Error::data("model geometry has a zero dimension"));
    }
    let c_neg = r.f32s(dim)?;
    let c_pos = r.f32s(dim)?;
    r.finish()?;
    FragmentModel::from_parts(
        Hypervector::new(c_neg)?,
        Hypervector::new(c_pos)?,
        seed,
        h,
        w,
        &id,
    )
    .map_err(|e| match e {
        Error::Usage(m) => Error::Data(format!("model geometry invalid: {m}")),
        other => other,
    })
}

/// Frame container: magic, `u32` count, `u32` H, `u32` W, then every frame's
/// pixels as `f32`, frame-major and row-major.
pub fn encode_frames(frames: &[Frame]) -> Result<Vec<u8>> {
    let (h, w) = frames
        .first()
        .map(|f| (f.height(), f.width()))
        .unwrap_or((0, 0));
    if frames.iter().any(|f| f.height() != h || f.width() != w) {
        return Err(Error::usage(
            "all frames in a container must share one size",
        ));
    }
    let mut out = Vec::with_capacity(16 + frames.len() * h * w * 4);
    out.extend_from_slice(FRAMES_MAGIC);
    out.extend_from_slice(&(frames.len() as u32).to_le_bytes());
    out.extend_from_slice(&(h as u32).to_le_bytes());
    out.extend_from_slice(&(w as u32).to_le_bytes());
    for f in frames {
        for p in f.pixels() {
            out.extend_from_slice(&p.to_le_bytes());
        }
    }
    Ok(out)
}

pub fn decode_frames(bytes: &[u8]) -> Result<Vec<Frame>> {
    let mut r = Reader {
        bytes,
        pos: 0,
        what: "frame container",
    };
    if r.take(4)? != FRAMES_MAGIC {
        return Err(Error::data("not a frame container (bad magic)"));
    }
    let count = r.u32()? as usize;
    let h = r.u32()? as usize;
    let w = r.u32()? as usize;
    let expect = count
        .checked_mul(h)
        .and_then(|v| v.checked_mul(w))
        .and_then(|v| v.checked_mul(4))
        .ok_or_else(|| Error::data("frame container header overflows"))?;
    if bytes.len() - 16 != expect {
        return Err(Error::data(format!(
            "frame container payload is {} bytes, header implies {expect}",
            bytes.len() - 16
        )));
    }
    let mut frames = Vec::with_capacity(count);
    for _ in 0..count {
        frames.push(Frame::new(h, w, r.f32s(h * w)?)?);
    }
    r.finish()?;
    Ok(frames)
}

/// `frame,x,y,w,h` rows, header first, frames in ascending order.
pub fn labels_to_csv(labels: &[Vec<BoundingBox>]) -> String {
    let mut out = format!("{LABELS_HEADER}\n");
    for (i, boxes) in labels.iter().enumerate() {
        for b in boxes {
            let _ = writeln!(out, "{i},{},{},{},{}", b.x, b.y, b.w, b.h);
        }
    }
    out
}

/// Parses a labels CSV for `frame_count` frames. Frames without rows are
/// object-free.
pub fn labels_from_csv(text: &str, frame_count: usize) -> Result<Vec<Vec<BoundingBox>>> {
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h.trim() == LABELS_HEADER => {}
        _ => {
            return Err(Error::data(format!(
                "labels file must start with '{LABELS_HEADER}'"
            )))
        }
    }
    let mut labels = vec![Vec::new(); frame_count];
    for (n, line) in lines.enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        let parsed: Option<Vec<usize>> = fields.iter().map(|f| f.parse().ok()).collect();
        let vals = match parsed {
            Some(v) if v.len() == 5 => v,
            _ => {
                return Err(Error::data(format!(
                    "labels line {}: expected five non-negative integers",
                    n + 2
                )))
            }
        };
        let frame = vals[0];
        if frame >= frame_count {
            return Err(Error::data(format!(
                "labels line {}: frame {frame} out of range ({frame_count} frames)",
                n + 2
            )));
        }
        labels[frame].push(BoundingBox {
            x: vals[1],
            y: vals[2],
            w: vals[3],
            h: vals[4],
        });
    }
    Ok(labels)
}

pub fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(|e| Error::data(format!("cannot read {}: {e}", path.display())))
}

pub fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path)
        .map_err(|e| Error::data(format!("cannot read {}: {e}", path.display())))
}

pub fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    std::fs::write(path, bytes)
        .map_err(|e| Error::data(format!("cannot write {}: {e}", path.display())))
}

pub fn read_model(path: &Path) -> Result<FragmentModel> {
    decode_model(&read_bytes(path)?)
}

pub fn read_frames(path: &Path) -> Result<Vec<Frame>> {
    decode_frames(&read_bytes(path)?)
}
