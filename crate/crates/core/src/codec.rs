//! On-disk formats: `.lfae` encoded light fields and `.lfck` checkpoints.
//!
//! All integers and floats are little-endian; floats are IEEE-754 single
//! precision.
//!
//! `.lfae` layout (28-byte header, then payload):
//!
//! | offset | size | field                                  |
//! |-------:|-----:|----------------------------------------|
//! | 0      | 4    | magic `LFAE`                           |
//! | 4      | 2    | format version (1)                     |
//! | 6      | 1    | grid rows                              |
//! | 7      | 1    | grid cols                              |
//! | 8      | 4    | spatial size `S`                       |
//! | 12     | 4    | latent channels `C`                    |
//! | 16     | 4    | latent spatial `L` (= `S / 32`)        |
//! | 20     | 8    | model config fingerprint               |
//! | 28     | 4·C·L·L | latent, `(C, L, L)` row-major       |
//! |        | 4·S·S·3 | center view, `(S, S, RGB)` row-major |
//!
//! `.lfck` layout: magic `LFCK`, version `u16`, the model config
//! (`rows u8, cols u8, spatial u32, n u8, schedule u32×n, decoder_out u32,
//! init_seed u64`), mode `u8` (0 train, 1 eval), trained epochs `u64`,
//! optimizer flag `u8` followed by the Adam step `u64` when set, a manifest
//! (`count u32`, then per entry `name_len u16, name, ndims u8, dims u32×ndims,
//! offset u64`), the payload length `u64`, and the payload. Entry offsets are
//! relative to the payload start; each entry holds `Π dims` floats.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::data::Image;
use crate::error::{Error, Result};
use crate::model::{EncodedLightField, LayerKind, Mode, Model, ModelConfig, LANE_DEPTH};
use crate::tensor::Tensor;
use crate::train::AdamState;

pub const ENCODED_MAGIC: [u8; 4] = *b"LFAE";
pub const CHECKPOINT_MAGIC: [u8; 4] = *b"LFCK";
pub const FORMAT_VERSION: u16 = 1;
pub const ENCODED_HEADER_BYTES: usize = 28;

/// Refuse to trust any declared size beyond this many bytes.
const MAX_DECLARED_BYTES: u64 = 1 << 40;
/// Widest layer a checkpoint may declare; keeps size arithmetic in range.
const MAX_CHANNELS: usize = 1 << 16;

struct Reader<R> {
    inner: R,
}

impl<R: Read> Reader<R> {
    fn bytes(&mut self, n: u64, what: &str) -> Result<Vec<u8>> {
        if n > MAX_DECLARED_BYTES {
            return Err(Error::Corrupt(format!("{what}: implausible size {n}")));
        }
        let mut buf = Vec::new();
        (&mut self.inner)
            .take(n)
            .read_to_end(&mut buf)
            .map_err(Error::Stream)?;
        if (buf.len() as u64) < n {
            return Err(Error::Truncated {
                what: what.to_string(),
                expected: n,
                actual: buf.len() as u64,
            });
        }
        Ok(buf)
    }

    fn array<const N: usize>(&mut self, what: &str) -> Result<[u8; N]> {
        Ok(self.bytes(N as u64, what)?.try_into().expect("exact length"))
    }

    fn u8(&mut self, what: &str) -> Result<u8> {
        Ok(self.array::<1>(what)?[0])
    }

    fn u16(&mut self, what: &str) -> Result<u16> {
        Ok(u16::from_le_bytes(self.array(what)?))
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.array(what)?))
    }

    fn u64(&mut self, what: &str) -> Result<u64> {
        Ok(u64::from_le_bytes(self.array(what)?))
    }

    fn f32s(&mut self, count: u64, what: &str) -> Result<Vec<f32>> {
        let bytes = count
            .checked_mul(4)
            .ok_or_else(|| Error::Corrupt(format!("{what}: size overflow")))?;
        Ok(decode_f32s(&self.bytes(bytes, what)?))
    }
}

fn decode_f32s(bytes: &[u8]) -> Vec<f32> {
    bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
        .collect()
}

fn encode_f32s(values: &[f32], out: &mut Vec<u8>) {
    out.reserve(values.len() * 4);
    for v in values {
        out.extend_from_slice(&v.to_le_bytes());
    }
}

fn check_magic(found: [u8; 4], expected: [u8; 4], version: u16) -> Result<()> {
    if found != expected {
        return Err(Error::UnsupportedFormat(format!(
            "bad magic {:?}, expected {:?}",
            String::from_utf8_lossy(&found),
            String::from_utf8_lossy(&expected)
        )));
    }
    if version != FORMAT_VERSION {
        return Err(Error::UnsupportedFormat(format!(
            "version {version}, this build reads version {FORMAT_VERSION}"
        )));
    }
    Ok(())
}

/// Bytes `write_encoded` produces for `cfg`.
pub fn encoded_size(cfg: &ModelConfig) -> usize {
    let l = cfg.latent_spatial();
    ENCODED_HEADER_BYTES + 4 * (cfg.latent_channels() * l * l + cfg.spatial * cfg.spatial * 3)
}

pub fn write_encoded<W: Write>(enc: &EncodedLightField, mut sink: W) -> Result<()> {
    let d = enc.latent.dims();
    let spatial = enc.spatial();
    if d.batch != 1 || d.height != d.width || enc.center.width() != spatial {
        return Err(Error::shape(
            "write_encoded",
            &d.as_array(),
            &[enc.center.height(), enc.center.width()],
        ));
    }
    let (rows, cols) = enc.grid;
    let narrow = |v: usize, what: &str| -> Result<u32> {
        u32::try_from(v).map_err(|_| Error::Config(format!("{what} {v} does not fit the header")))
    };
    let grid = |v: usize| -> Result<u8> {
        u8::try_from(v).map_err(|_| Error::Config(format!("grid side {v} does not fit the header")))
    };
    let mut buf = Vec::with_capacity(ENCODED_HEADER_BYTES + 4 * (d.len() + enc.center.data().len()));
    buf.extend_from_slice(&ENCODED_MAGIC);
    buf.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    buf.push(grid(rows)?);
    buf.push(grid(cols)?);
    buf.extend_from_slice(&narrow(spatial, "spatial size")?.to_le_bytes());
    buf.extend_from_slice(&narrow(d.channels, "latent channels")?.to_le_bytes());
    buf.extend_from_slice(&narrow(d.height, "latent spatial")?.to_le_bytes());
    buf.extend_from_slice(&enc.fingerprint.to_le_bytes());
    encode_f32s(enc.latent.data(), &mut buf);
    encode_f32s(enc.center.data(), &mut buf);
    sink.write_all(&buf).map_err(Error::Stream)?;
    sink.flush().map_err(Error::Stream)
}

pub fn read_encoded<R: Read>(source: R) -> Result<EncodedLightField> {
    let mut r = Reader { inner: source };
    let magic = r.array::<4>("header magic")?;
    let version = r.u16("header version")?;
    check_magic(magic, ENCODED_MAGIC, version)?;
    let rows = r.u8("header grid rows")? as usize;
    let cols = r.u8("header grid cols")? as usize;
    let spatial = r.u32("header spatial size")? as u64;
    let channels = r.u32("header latent channels")? as u64;
    let latent_spatial = r.u32("header latent spatial")? as u64;
    let fingerprint = r.u64("header fingerprint")?;
    if latent_spatial << LANE_DEPTH != spatial || spatial == 0 || channels == 0 || rows == 0 || cols == 0 {
        return Err(Error::Corrupt(format!(
            "inconsistent header: grid {rows}x{cols}, spatial {spatial}, latent {channels}x{latent_spatial}x{latent_spatial}"
        )));
    }
    let size = |factors: &[u64], what: &str| {
        factors
            .iter()
            .try_fold(1u64, |acc, &f| acc.checked_mul(f))
            .ok_or_else(|| Error::Corrupt(format!("{what}: size overflow")))
    };
    let latent = r.f32s(size(&[channels, latent_spatial, latent_spatial], "latent")?, "latent payload")?;
    let center = r.f32s(size(&[spatial, spatial, 3], "center view")?, "center-view payload")?;
    let (s, c, l) = (spatial as usize, channels as usize, latent_spatial as usize);
    Ok(EncodedLightField {
        grid: (rows, cols),
        latent: Tensor::from_vec([1, c, l, l], latent)?,
        center: Image::new(s, s, center)?,
        fingerprint,
    })
}

pub fn save_encoded(enc: &EncodedLightField, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_encoded(enc, BufWriter::new(file)).map_err(|e| with_path(e, path))
}

pub fn load_encoded(path: &Path) -> Result<EncodedLightField> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_encoded(BufReader::new(file)).map_err(|e| with_path(e, path))
}

fn with_path(e: Error, path: &Path) -> Error {
    match e {
        Error::Stream(source) => Error::io(path, source),
        other => other,
    }
}

/// Model, optional optimizer state and training progress restored from a
/// checkpoint.
#[derive(Clone, Debug)]
pub struct Checkpoint {
    pub model: Model<f32>,
    pub adam: Option<AdamState<f32>>,
    pub trained_epochs: u64,
}

struct Entry {
    name: String,
    dims: Vec<usize>,
}

impl Entry {
    fn len(&self) -> usize {
        self.dims.iter().product()
    }
}

/// Every tensor a checkpoint for `cfg` holds, in file order: parameters in
/// [`Model::parameters`] order, then [`Model::buffers`], then the Adam
/// moments when present.
fn manifest(cfg: &ModelConfig, with_adam: bool) -> Vec<Entry> {
    let entry = |name: String, dims: Vec<usize>| Entry { name, dims };
    let mut params = Vec::new();
    let mut buffers = Vec::new();
    for spec in cfg.layer_specs() {
        let (i, o, k) = (spec.in_channels, spec.out_channels, spec.kernel);
        if spec.kind == LayerKind::Merge {
            params.push(entry("merge.weight".into(), vec![o, i, 1, 1]));
            params.push(entry("merge.bias".into(), vec![o]));
            continue;
        }
        let weight = match spec.kind {
            LayerKind::Conv => vec![o, i, k, k],
            _ => vec![i, o, k, k],
        };
        let n = &spec.name;
        params.push(entry(format!("{n}.conv.weight"), weight));
        for suffix in ["conv.bias", "norm.gamma", "norm.beta"] {
            params.push(entry(format!("{n}.{suffix}"), vec![o]));
        }
        for suffix in ["norm.running_mean", "norm.running_var"] {
            buffers.push(entry(format!("{n}.{suffix}"), vec![o]));
        }
    }
    let mut moments = Vec::new();
    if with_adam {
        for prefix in ["adam.m", "adam.v"] {
            moments.extend(params.iter().map(|p| entry(format!("{prefix}.{}", p.name), p.dims.clone())));
        }
    }
    params.into_iter().chain(buffers).chain(moments).collect()
}

fn write_config(cfg: &ModelConfig, buf: &mut Vec<u8>) -> Result<()> {
    let to_u32 = |v: usize| {
        u32::try_from(v).map_err(|_| Error::Config(format!("{v} does not fit a checkpoint field")))
    };
    buf.push(cfg.grid.0 as u8);
    buf.push(cfg.grid.1 as u8);
    buf.extend_from_slice(&to_u32(cfg.spatial)?.to_le_bytes());
    buf.push(cfg.channel_schedule.len() as u8);
    for &c in &cfg.channel_schedule {
        buf.extend_from_slice(&to_u32(c)?.to_le_bytes());
    }
    buf.extend_from_slice(&to_u32(cfg.decoder_out_channels)?.to_le_bytes());
    buf.extend_from_slice(&cfg.init_seed.to_le_bytes());
    Ok(())
}

fn read_config<R: Read>(r: &mut Reader<R>) -> Result<ModelConfig> {
    let rows = r.u8("config grid rows")? as usize;
    let cols = r.u8("config grid cols")? as usize;
    let spatial = r.u32("config spatial")? as usize;
    let n = r.u8("config schedule length")? as usize;
    let mut channel_schedule = Vec::with_capacity(n);
    for _ in 0..n {
        channel_schedule.push(r.u32("config schedule")? as usize);
    }
    let decoder_out_channels = r.u32("config decoder width")? as usize;
    let init_seed = r.u64("config seed")?;
    let cfg = ModelConfig {
        grid: (rows, cols),
        spatial,
        channel_schedule,
        decoder_out_channels,
        init_seed,
    };
    cfg.validate()
        .map_err(|e| Error::Corrupt(format!("checkpoint config: {e}")))?;
    let widest = cfg.channel_schedule.iter().chain([&cfg.decoder_out_channels]).max();
    if widest.is_some_and(|&c| c > MAX_CHANNELS) {
        return Err(Error::Corrupt(format!(
            "checkpoint config: layer wider than {MAX_CHANNELS} channels"
        )));
    }
    Ok(cfg)
}

pub fn write_checkpoint<W: Write>(
    model: &Model<f32>,
    adam: Option<&AdamState<f32>>,
    trained_epochs: u64,
    mut sink: W,
) -> Result<()> {
    let entries = manifest(model.config(), adam.is_some());
    let mut header = Vec::new();
    header.extend_from_slice(&CHECKPOINT_MAGIC);
    header.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    write_config(model.config(), &mut header)?;
    header.push(match model.mode() {
        Mode::Train => 0,
        Mode::Eval => 1,
    });
    header.extend_from_slice(&trained_epochs.to_le_bytes());
    match adam {
        Some(a) => {
            if a.first.len() != model.parameters().len() {
                return Err(Error::Config("optimizer state does not match the model".into()));
            }
            header.push(1);
            header.extend_from_slice(&a.step.to_le_bytes());
        }
        None => header.push(0),
    }
    header.extend_from_slice(&(entries.len() as u32).to_le_bytes());
    let mut offset = 0u64;
    for e in &entries {
        header.extend_from_slice(&(e.name.len() as u16).to_le_bytes());
        header.extend_from_slice(e.name.as_bytes());
        header.push(e.dims.len() as u8);
        for &d in &e.dims {
            header.extend_from_slice(&(d as u32).to_le_bytes());
        }
        header.extend_from_slice(&offset.to_le_bytes());
        offset += 4 * e.len() as u64;
    }
    header.extend_from_slice(&offset.to_le_bytes());
    sink.write_all(&header).map_err(Error::Stream)?;

    let mut payload = Vec::with_capacity(offset as usize);
    for p in model.parameters().iter().chain(model.buffers().iter()) {
        encode_f32s(p.values, &mut payload);
    }
    if let Some(a) = adam {
        for buf in a.first.iter().chain(&a.second) {
            encode_f32s(buf, &mut payload);
        }
    }
    sink.write_all(&payload).map_err(Error::Stream)?;
    sink.flush().map_err(Error::Stream)
}

pub fn read_checkpoint<R: Read>(source: R) -> Result<Checkpoint> {
    let mut r = Reader { inner: source };
    let magic = r.array::<4>("checkpoint magic")?;
    let version = r.u16("checkpoint version")?;
    check_magic(magic, CHECKPOINT_MAGIC, version)?;
    let cfg = read_config(&mut r)?;
    let mode = match r.u8("checkpoint mode")? {
        0 => Mode::Train,
        1 => Mode::Eval,
        m => return Err(Error::Corrupt(format!("unknown mode tag {m}"))),
    };
    let trained_epochs = r.u64("checkpoint epochs")?;
    let adam_step = match r.u8("optimizer flag")? {
        0 => None,
        1 => Some(r.u64("optimizer step")?),
        f => return Err(Error::Corrupt(format!("unknown optimizer flag {f}"))),
    };

    let expected = manifest(&cfg, adam_step.is_some());
    let count = r.u32("manifest count")? as usize;
    if count != expected.len() {
        return Err(Error::Corrupt(format!(
            "manifest lists {count} tensors, config implies {}",
            expected.len()
        )));
    }
    let mut offsets: HashMap<String, (Vec<usize>, u64)> = HashMap::with_capacity(count);
    for _ in 0..count {
        let len = r.u16("manifest name length")?;
        let name = String::from_utf8(r.bytes(len as u64, "manifest name")?)
            .map_err(|_| Error::Corrupt("manifest name is not UTF-8".into()))?;
        let ndims = r.u8("manifest rank")?;
        let mut dims = Vec::with_capacity(ndims as usize);
        for _ in 0..ndims {
            dims.push(r.u32("manifest dims")? as usize);
        }
        let offset = r.u64("manifest offset")?;
        if offsets.insert(name.clone(), (dims, offset)).is_some() {
            return Err(Error::Corrupt(format!("duplicate manifest entry {name:?}")));
        }
    }
    let payload_len = r.u64("payload length")?;

    let mut spans = Vec::with_capacity(count);
    for e in &expected {
        let (dims, offset) = offsets
            .get(&e.name)
            .ok_or_else(|| Error::Corrupt(format!("manifest lacks {:?}", e.name)))?;
        if *dims != e.dims {
            return Err(Error::Corrupt(format!(
                "{:?} has dims {dims:?}, config implies {:?}",
                e.name, e.dims
            )));
        }
        let end = offset.checked_add(4 * e.len() as u64).unwrap_or(u64::MAX);
        if end > payload_len {
            return Err(Error::Corrupt(format!(
                "{:?} spans bytes {offset}..{end} beyond payload of {payload_len}",
                e.name
            )));
        }
        spans.push((*offset, end));
    }
    let mut sorted = spans.clone();
    sorted.sort_unstable();
    if sorted.windows(2).any(|w| w[1].0 < w[0].1) {
        return Err(Error::Corrupt("manifest entries overlap".into()));
    }

    let payload = r.bytes(payload_len, "checkpoint payload")?;
    let mut model = Model::<f32>::zeroed(&cfg)?;
    model.set_mode(mode);
    let mut tensors = spans
        .iter()
        .map(|&(start, end)| decode_f32s(&payload[start as usize..end as usize]));
    let mut fill = |dst: &mut [f32]| {
        dst.copy_from_slice(&tensors.next().expect("one span per manifest entry"));
    };
    for p in model.parameters_mut() {
        fill(p);
    }
    for b in model.buffers_mut() {
        fill(b);
    }
    let adam = adam_step.map(|step| {
        let sizes: Vec<usize> = model.parameters().iter().map(|p| p.values.len()).collect();
        let mut state = AdamState::<f32>::new(sizes);
        state.step = step;
        for buf in state.first.iter_mut().chain(state.second.iter_mut()) {
            fill(buf);
        }
        state
    });
    Ok(Checkpoint {
        model,
        adam,
        trained_epochs,
    })
}

pub fn save_checkpoint(
    model: &Model<f32>,
    adam: Option<&AdamState<f32>>,
    trained_epochs: u64,
    path: &Path,
) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_checkpoint(model, adam, trained_epochs, BufWriter::new(file)).map_err(|e| with_path(e, path))
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_checkpoint(BufReader::new(file)).map_err(|e| with_path(e, path))
}
