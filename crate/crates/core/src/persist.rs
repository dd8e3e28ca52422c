//! Binary model and ensemble files.
//!
//! Layout: 4 magic bytes, u16 major and u16 minor version, a little-endian
//! payload, then a CRC-32 of everything before it. Floats are stored as raw
//! IEEE-754 bits so a loaded model reproduces forward outputs exactly.
//! Random maps are stored with their full weight matrix.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::anomaly::{Ensemble, Member};
use crate::error::{Error, Result};
use crate::mapping::{MapKind, RandomMap};
use crate::network::{Decoder, LossTrace, Objective, RdpModel, Task};
use crate::numerics::Matrix;

pub const MODEL_MAGIC: &[u8; 4] = b"RDPM";
pub const ENSEMBLE_MAGIC: &[u8; 4] = b"RDPE";
pub const FORMAT_MAJOR: u16 = 1;
pub const FORMAT_MINOR: u16 = 0;

const HEADER: usize = 8;
const TRAILER: usize = 4;

#[derive(Default)]
struct Writer {
    buf: Vec<u8>,
}

impl Writer {
    fn u8(&mut self, v: u8) {
        self.buf.push(v);
    }
    fn u64(&mut self, v: u64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }
    fn len(&mut self, v: usize) {
        self.u64(v as u64);
    }
    fn f64(&mut self, v: f64) {
        self.u64(v.to_bits());
    }
    fn opt_f64(&mut self, v: Option<f64>) {
        match v {
            Some(v) => {
                self.u8(1);
                self.f64(v);
            }
            None => self.u8(0),
        }
    }
    fn floats(&mut self, v: &[f64]) {
        for &x in v {
            self.f64(x);
        }
    }
    fn matrix(&mut self, m: &Matrix) {
        self.len(m.rows());
        self.len(m.cols());
        self.floats(m.as_slice());
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).ok_or(Error::Truncated)?;
        let s = self.buf.get(self.pos..end).ok_or(Error::Truncated)?;
        self.pos = end;
        Ok(s)
    }
    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }
    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
    fn len(&mut self) -> Result<usize> {
        let v = self.u64()?;
        // a length can never exceed the bytes left to hold it
        if v > self.buf.len() as u64 {
            return Err(Error::Malformed(format!("length {v} exceeds file size")));
        }
        Ok(v as usize)
    }
    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_bits(self.u64()?))
    }
    fn flag(&mut self) -> Result<bool> {
        match self.u8()? {
            0 => Ok(false),
            1 => Ok(true),
            b => Err(Error::Malformed(format!("flag byte {b}"))),
        }
    }
    fn opt_f64(&mut self) -> Result<Option<f64>> {
        Ok(if self.flag()? { Some(self.f64()?) } else { None })
    }
    fn floats(&mut self, n: usize) -> Result<Vec<f64>> {
        let bytes = self.take(n.checked_mul(8).ok_or(Error::Truncated)?)?;
        Ok(bytes
            .chunks_exact(8)
            .map(|c| f64::from_bits(u64::from_le_bytes(c.try_into().expect("8 bytes"))))
            .collect())
    }
    fn matrix(&mut self) -> Result<Matrix> {
        let rows = self.len()?;
        let cols = self.len()?;
        let n = rows.checked_mul(cols).ok_or_else(|| Error::Malformed("matrix size overflows".into()))?;
        Matrix::from_vec(rows, cols, self.floats(n)?).map_err(|e| Error::Malformed(e.to_string()))
    }
}

fn write_map(w: &mut Writer, map: &RandomMap) {
    w.u8(map.kind().tag());
    w.len(map.in_dim());
    w.len(map.out_dim());
    w.u64(map.seed());
    w.opt_f64(map.bandwidth());
    w.opt_f64(map.density());
    match map.weights() {
        Some(m) => {
            w.u8(1);
            w.matrix(m);
        }
        None => w.u8(0),
    }
    match map.offsets() {
        Some(o) => {
            w.u8(1);
            w.len(o.len());
            w.floats(o);
        }
        None => w.u8(0),
    }
}

fn read_map(r: &mut Reader) -> Result<RandomMap> {
    let tag = r.u8()?;
    let kind = MapKind::from_tag(tag).ok_or_else(|| Error::Malformed(format!("unknown map kind {tag}")))?;
    let in_dim = r.len()?;
    let out_dim = r.len()?;
    let seed = r.u64()?;
    let bandwidth = r.opt_f64()?;
    let density = r.opt_f64()?;
    let weights = if r.flag()? { Some(r.matrix()?) } else { None };
    let offsets = if r.flag()? {
        let n = r.len()?;
        Some(r.floats(n)?)
    } else {
        None
    };
    RandomMap::from_parts(kind, in_dim, out_dim, seed, bandwidth, density, weights, offsets)
}

fn write_model(w: &mut Writer, model: &RdpModel) {
    let obj = model.objective();
    w.u8(match obj.task {
        Task::Anomaly => 0,
        Task::Clustering => 1,
    });
    w.u8(obj.use_rdp_loss as u8);
    w.u8(obj.use_aux_loss as u8);
    w.f64(obj.aux_weight);
    w.f64(model.leaky_slope());
    w.matrix(model.weights());
    w.len(model.bias().len());
    w.floats(model.bias());
    match model.decoder() {
        Some(dec) => {
            w.u8(1);
            w.matrix(&dec.weights);
            w.len(dec.bias.len());
            w.floats(&dec.bias);
        }
        None => w.u8(0),
    }
    write_map(w, model.map());
}

fn read_model(r: &mut Reader) -> Result<RdpModel> {
    let task = match r.u8()? {
        0 => Task::Anomaly,
        1 => Task::Clustering,
        t => return Err(Error::Malformed(format!("unknown task {t}"))),
    };
    let objective = Objective {
        task,
        use_rdp_loss: r.flag()?,
        use_aux_loss: r.flag()?,
        aux_weight: r.f64()?,
    };
    let slope = r.f64()?;
    let weights = r.matrix()?;
    let n = r.len()?;
    let bias = r.floats(n)?;
    let decoder = if r.flag()? {
        let dw = r.matrix()?;
        let n = r.len()?;
        Some(Decoder {
            weights: dw,
            bias: r.floats(n)?,
        })
    } else {
        None
    };
    let map = read_map(r)?;
    RdpModel::from_parts(weights, bias, decoder, slope, objective, map)
}

fn seal(magic: &[u8; 4], body: impl FnOnce(&mut Writer)) -> Vec<u8> {
    let mut w = Writer::default();
    w.buf.extend_from_slice(magic);
    w.buf.extend_from_slice(&FORMAT_MAJOR.to_le_bytes());
    w.buf.extend_from_slice(&FORMAT_MINOR.to_le_bytes());
    body(&mut w);
    let crc = crc32fast::hash(&w.buf);
    w.buf.extend_from_slice(&crc.to_le_bytes());
    w.buf
}

fn open<'a>(bytes: &'a [u8], magic: &[u8; 4], what: &'static str) -> Result<Reader<'a>> {
    if bytes.len() < 4 || &bytes[..4] != magic {
        return Err(Error::BadMagic(what));
    }
    if bytes.len() < HEADER + TRAILER {
        return Err(Error::Truncated);
    }
    let major = u16::from_le_bytes([bytes[4], bytes[5]]);
    let minor = u16::from_le_bytes([bytes[6], bytes[7]]);
    if major != FORMAT_MAJOR {
        return Err(Error::UnsupportedVersion {
            found_major: major,
            found_minor: minor,
            supported: FORMAT_MAJOR,
        });
    }
    let (content, trailer) = bytes.split_at(bytes.len() - TRAILER);
    let stored = u32::from_le_bytes(trailer.try_into().expect("4 bytes"));
    let computed = crc32fast::hash(content);
    if stored != computed {
        return Err(Error::ChecksumMismatch { stored, computed });
    }
    Ok(Reader {
        buf: content,
        pos: HEADER,
    })
}

fn finish(r: &Reader) -> Result<()> {
    if r.pos != r.buf.len() {
        return Err(Error::Malformed(format!("{} trailing bytes", r.buf.len() - r.pos)));
    }
    Ok(())
}

pub fn encode_model(model: &RdpModel) -> Vec<u8> {
    seal(MODEL_MAGIC, |w| write_model(w, model))
}

pub fn decode_model(bytes: &[u8]) -> Result<RdpModel> {
    let mut r = open(bytes, MODEL_MAGIC, "model")?;
    let model = read_model(&mut r)?;
    finish(&r)?;
    Ok(model)
}

/// Member seeds and models are stored; training traces are not.
pub fn encode_ensemble(ensemble: &Ensemble) -> Vec<u8> {
    seal(ENSEMBLE_MAGIC, |w| {
        w.len(ensemble.members.len());
        for m in &ensemble.members {
            w.u64(m.seed);
            w.len(m.train_sizes.len());
            for &s in &m.train_sizes {
                w.len(s);
            }
            write_model(w, &m.model);
        }
    })
}

pub fn decode_ensemble(bytes: &[u8]) -> Result<Ensemble> {
    let mut r = open(bytes, ENSEMBLE_MAGIC, "ensemble")?;
    let count = r.len()?;
    let mut members = Vec::with_capacity(count.min(1024));
    for _ in 0..count {
        let seed = r.u64()?;
        let n = r.len()?;
        let train_sizes = (0..n).map(|_| r.len()).collect::<Result<_>>()?;
        let model = read_model(&mut r)?;
        members.push(Member {
            seed,
            model,
            train_sizes,
            trace: LossTrace::default(),
        });
    }
    finish(&r)?;
    if members.is_empty() {
        return Err(Error::Malformed("ensemble has no members".into()));
    }
    Ok(Ensemble { members })
}

/// Writes `bytes` to a temporary sibling of `path`, then renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::io(dir, e))?;
    tmp.write_all(bytes).map_err(|e| Error::io(tmp.path(), e))?;
    tmp.as_file().sync_all().map_err(|e| Error::io(tmp.path(), e))?;
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}

pub fn save_model(path: &Path, model: &RdpModel) -> Result<()> {
    write_atomic(path, &encode_model(model))
}

pub fn load_model(path: &Path) -> Result<RdpModel> {
    decode_model(&fs::read(path).map_err(|e| Error::io(path, e))?)
}

pub fn save_ensemble(path: &Path, ensemble: &Ensemble) -> Result<()> {
    write_atomic(path, &encode_ensemble(ensemble))
}

pub fn load_ensemble(path: &Path) -> Result<Ensemble> {
    decode_ensemble(&fs::read(path).map_err(|e| Error::io(path, e))?)
}
