//! Binary field file: little-endian header `TOCH`, version, T, N, point-set
//! seed; then T×N records `(u8 c, f32 d, f32 y[3])`; then N records
//! `(f32 point[3], f32 normal[3])`.

use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;
use std::sync::Arc;

use byteorder::{LittleEndian as LE, ReadBytesExt, WriteBytesExt};

use super::{FieldEntry, TochSequence};
use crate::geometry::ObjectPointSet;
use crate::{Error, Result, Vec3};

pub const TOCH_FORMAT_VERSION: u32 = 1;
const MAGIC: &[u8; 4] = b"TOCH";

fn format_err(msg: impl Into<String>) -> Error {
    Error::Format {
        what: "TOCH field",
        msg: msg.into(),
    }
}

fn write_vec3(w: &mut impl Write, v: &Vec3) -> std::io::Result<()> {
    for c in v.iter() {
        w.write_f32::<LE>(*c as f32)?;
    }
    Ok(())
}

fn read_vec3(r: &mut impl Read) -> std::io::Result<Vec3> {
    Ok(Vec3::new(
        r.read_f32::<LE>()? as f64,
        r.read_f32::<LE>()? as f64,
        r.read_f32::<LE>()? as f64,
    ))
}

pub fn encode_toch(seq: &TochSequence, w: &mut impl Write) -> std::io::Result<()> {
    let points = seq.points();
    w.write_all(MAGIC)?;
    w.write_u32::<LE>(TOCH_FORMAT_VERSION)?;
    w.write_u32::<LE>(seq.len() as u32)?;
    w.write_u32::<LE>(points.len() as u32)?;
    w.write_u64::<LE>(points.seed)?;
    for frame in seq.frames() {
        for e in frame.entries() {
            w.write_u8(e.c as u8)?;
            w.write_f32::<LE>(e.d as f32)?;
            write_vec3(w, &e.y)?;
        }
    }
    for (p, n) in points.points.iter().zip(&points.normals) {
        write_vec3(w, p)?;
        write_vec3(w, n)?;
    }
    Ok(())
}

pub fn decode_toch(r: &mut impl Read) -> Result<TochSequence> {
    let truncated = |e: std::io::Error| format_err(format!("truncated or unreadable: {e}"));
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic).map_err(truncated)?;
    if &magic != MAGIC {
        return Err(format_err("bad magic"));
    }
    let version = r.read_u32::<LE>().map_err(truncated)?;
    if version != TOCH_FORMAT_VERSION {
        return Err(format_err(format!("unsupported version {version}")));
    }
    let t = r.read_u32::<LE>().map_err(truncated)? as usize;
    let n = r.read_u32::<LE>().map_err(truncated)? as usize;
    let seed = r.read_u64::<LE>().map_err(truncated)?;
    if t == 0 {
        return Err(format_err("zero frames"));
    }
    let mut entries = Vec::with_capacity(t);
    for _ in 0..t {
        let mut frame = Vec::with_capacity(n);
        for _ in 0..n {
            let c = match r.read_u8().map_err(truncated)? {
                0 => false,
                1 => true,
                other => return Err(format_err(format!("invalid c flag {other}"))),
            };
            let d = r.read_f32::<LE>().map_err(truncated)? as f64;
            let y = read_vec3(r).map_err(truncated)?;
            frame.push(FieldEntry { c, d, y });
        }
        entries.push(frame);
    }
    let mut points = Vec::with_capacity(n);
    let mut normals = Vec::with_capacity(n);
    for _ in 0..n {
        points.push(read_vec3(r).map_err(truncated)?);
        normals.push(read_vec3(r).map_err(truncated)?);
    }
    let mut rest = [0u8; 1];
    if r.read(&mut rest).map_err(truncated)? != 0 {
        return Err(format_err("trailing bytes"));
    }
    TochSequence::from_entries(
        entries,
        Arc::new(ObjectPointSet {
            points,
            normals,
            seed,
        }),
    )
}

pub fn write_toch(seq: &TochSequence, path: &Path) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    encode_toch(seq, &mut w)
        .and_then(|_| w.flush())
        .map_err(|e| Error::io(path, e))
}

pub fn read_toch(path: &Path) -> Result<TochSequence> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    decode_toch(&mut BufReader::new(file))
}
