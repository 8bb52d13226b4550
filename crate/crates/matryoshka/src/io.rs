//! Bit-exact file formats shared by the library and the CLI.
//!
//! Checkpoint layout (models, pools, and raw tensors):
//!
//! ```text
//! "MTRK1"                      magic, 5 bytes
//! u32 LE                       header byte length
//! header                       UTF-8 `key=value` lines
//! payload                      little-endian f64 arrays, canonical order
//! u64 LE                       FNV-1a 64 checksum of everything after magic
//! ```
//!
//! Keys and run logs are short plain-text records. All writers are
//! deterministic: identical inputs produce identical bytes.

use std::fs;
use std::path::Path;

use crate::mat::Mat;
use crate::nn::{Model, ModelSpec, ParamKind};
use crate::pool::{ParamPool, PoolSizes, SecretKey};
use crate::{Error, Result};

pub const MAGIC: &[u8; 5] = b"MTRK1";
pub const FORMAT_VERSION: u32 = 1;

/// FNV-1a 64-bit hash.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01B3);
    }
    h
}

fn encode(header: &str, arrays: &[&[f64]]) -> Vec<u8> {
    let header_bytes = header.as_bytes();
    let array_len: usize = arrays.iter().map(|a| a.len() * 8).sum();
    let mut body = Vec::with_capacity(4 + header_bytes.len() + array_len);
    body.extend_from_slice(&(header_bytes.len() as u32).to_le_bytes());
    body.extend_from_slice(header_bytes);
    for array in arrays {
        for v in *array {
            body.extend_from_slice(&v.to_le_bytes());
        }
    }
    let checksum = fnv1a64(&body);
    let mut out = Vec::with_capacity(5 + body.len() + 8);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&body);
    out.extend_from_slice(&checksum.to_le_bytes());
    out
}

struct Decoded {
    fields: Vec<(String, String)>,
    payload: Vec<f64>,
}

impl Decoded {
    fn get(&self, key: &str) -> Result<&str> {
        self.fields
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
            .ok_or_else(|| Error::Format(format!("missing header field `{key}`")))
    }

    fn get_usize(&self, key: &str) -> Result<usize> {
        self.get(key)?
            .parse()
            .map_err(|_| Error::Format(format!("header field `{key}` is not an integer")))
    }
}

fn decode(bytes: &[u8]) -> Result<Decoded> {
    if bytes.len() < 5 + 4 + 8 || &bytes[..5] != MAGIC {
        return Err(Error::Format("not a MTRK1 file".into()));
    }
    let body = &bytes[5..bytes.len() - 8];
    let stored = u64::from_le_bytes(bytes[bytes.len() - 8..].try_into().unwrap());
    let computed = fnv1a64(body);
    if stored != computed {
        return Err(Error::Format(format!(
            "checksum mismatch: stored {stored:#018x}, computed {computed:#018x}"
        )));
    }
    let header_len = u32::from_le_bytes(body[..4].try_into().unwrap()) as usize;
    if body.len() < 4 + header_len {
        return Err(Error::Format("truncated header".into()));
    }
    let header = std::str::from_utf8(&body[4..4 + header_len])
        .map_err(|_| Error::Format("header is not UTF-8".into()))?;
    let mut fields = Vec::new();
    for line in header.lines() {
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Format(format!("bad header line `{line}`")))?;
        fields.push((k.to_string(), v.to_string()));
    }
    let raw = &body[4 + header_len..];
    if raw.len() % 8 != 0 {
        return Err(Error::Format("payload is not a whole number of f64s".into()));
    }
    let payload = raw
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    let d = Decoded { fields, payload };
    let version: u32 = d
        .get("version")?
        .parse()
        .map_err(|_| Error::Format("bad version".into()))?;
    if version != FORMAT_VERSION {
        return Err(Error::Format(format!("unsupported format version {version}")));
    }
    Ok(d)
}

pub fn encode_model(model: &Model) -> Vec<u8> {
    let header = format!(
        "version={FORMAT_VERSION}\nkind=model\narch={}\nweights={}\nbiases={}\nscales={}\n",
        model.spec.arch_id,
        model.weights.len(),
        model.biases.len(),
        model.scales.len()
    );
    encode(header.as_str(), &[&model.weights, &model.biases, &model.scales])
}

pub fn decode_model(bytes: &[u8]) -> Result<Model> {
    let d = decode(bytes)?;
    if d.get("kind")? != "model" {
        return Err(Error::Format("expected a model file".into()));
    }
    let spec = ModelSpec::from_arch_id(d.get("arch")?)?;
    let counts = [
        d.get_usize("weights")?,
        d.get_usize("biases")?,
        d.get_usize("scales")?,
    ];
    if counts != spec.param_counts() {
        return Err(Error::Format(
            "stored counts do not match the architecture".into(),
        ));
    }
    if d.payload.len() != counts.iter().sum::<usize>() {
        return Err(Error::Format("payload length does not match counts".into()));
    }
    let (w, rest) = d.payload.split_at(counts[0]);
    let (b, s) = rest.split_at(counts[1]);
    Ok(Model {
        spec,
        weights: w.to_vec(),
        biases: b.to_vec(),
        scales: s.to_vec(),
    })
}

pub fn encode_pool(pool: &ParamPool) -> Vec<u8> {
    let sizes = pool.sizes();
    let header = format!(
        "version={FORMAT_VERSION}\nkind=pool\nweights={}\nbiases={}\nscales={}\n",
        sizes.weight, sizes.bias, sizes.scale
    );
    encode(
        header.as_str(),
        &[
            pool.group(ParamKind::Weight),
            pool.group(ParamKind::Bias),
            pool.group(ParamKind::Scale),
        ],
    )
}

pub fn decode_pool(bytes: &[u8]) -> Result<ParamPool> {
    let d = decode(bytes)?;
    if d.get("kind")? != "pool" {
        return Err(Error::Format("expected a pool file".into()));
    }
    let counts = [
        d.get_usize("weights")?,
        d.get_usize("biases")?,
        d.get_usize("scales")?,
    ];
    if d.payload.len() != counts.iter().sum::<usize>() {
        return Err(Error::Format("payload length does not match counts".into()));
    }
    let (w, rest) = d.payload.split_at(counts[0]);
    let (b, s) = rest.split_at(counts[1]);
    let mut pool = ParamPool::from_scratch(PoolSizes::new(counts[0], counts[1], counts[2]), 0);
    *pool.group_mut(ParamKind::Weight) = w.to_vec();
    *pool.group_mut(ParamKind::Bias) = b.to_vec();
    *pool.group_mut(ParamKind::Scale) = s.to_vec();
    Ok(pool)
}

/// Raw tensor: a matrix of row vectors plus the 2D shape each row folds to.
pub fn encode_tensor(mat: &Mat, shape: (usize, usize)) -> Vec<u8> {
    let header = format!(
        "version={FORMAT_VERSION}\nkind=tensor\nrows={}\ncols={}\nshape_h={}\nshape_w={}\n",
        mat.rows, mat.cols, shape.0, shape.1
    );
    encode(header.as_str(), &[&mat.data])
}

pub fn decode_tensor(bytes: &[u8]) -> Result<(Mat, (usize, usize))> {
    let d = decode(bytes)?;
    if d.get("kind")? != "tensor" {
        return Err(Error::Format("expected a tensor file".into()));
    }
    let rows = d.get_usize("rows")?;
    let cols = d.get_usize("cols")?;
    let shape = (d.get_usize("shape_h")?, d.get_usize("shape_w")?);
    if d.payload.len() != rows * cols {
        return Err(Error::Format("payload length does not match shape".into()));
    }
    Ok((Mat::new(rows, cols, d.payload)?, shape))
}

pub fn write_model(path: &Path, model: &Model) -> Result<()> {
    fs::write(path, encode_model(model))?;
    Ok(())
}

pub fn read_model(path: &Path) -> Result<Model> {
    decode_model(&fs::read(path)?)
}

pub fn write_pool(path: &Path, pool: &ParamPool) -> Result<()> {
    fs::write(path, encode_pool(pool))?;
    Ok(())
}

pub fn read_pool(path: &Path) -> Result<ParamPool> {
    decode_pool(&fs::read(path)?)
}

pub fn write_tensor(path: &Path, mat: &Mat, shape: (usize, usize)) -> Result<()> {
    fs::write(path, encode_tensor(mat, shape))?;
    Ok(())
}

pub fn read_tensor(path: &Path) -> Result<(Mat, (usize, usize))> {
    decode_tensor(&fs::read(path)?)
}

/// Stable fingerprint of a pool's values, used as a snapshot identifier.
pub fn pool_fingerprint(pool: &ParamPool) -> u64 {
    fnv1a64(&encode_pool(pool))
}

pub fn encode_key(key: &SecretKey) -> String {
    let mut s = format!(
        "v={}\narch={}\npool={},{},{}\npermute={}\n",
        key.v,
        key.arch_id,
        key.pool_sizes.weight,
        key.pool_sizes.bias,
        key.pool_sizes.scale,
        key.permute
    );
    if let Some(seed) = key.noise_seed {
        s.push_str(&format!("noise_seed={seed}\n"));
    }
    s
}

pub fn decode_key(text: &str) -> Result<SecretKey> {
    let mut v = None;
    let mut arch = None;
    let mut pool = None;
    let mut permute = None;
    let mut noise_seed = None;
    for line in text.lines() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let (k, val) = line
            .split_once('=')
            .ok_or_else(|| Error::Format(format!("bad key line `{line}`")))?;
        match k {
            "v" => v = Some(val.parse::<u64>().map_err(|_| bad_key("v"))?),
            "arch" => arch = Some(val.to_string()),
            "pool" => {
                let parts: Vec<usize> = val
                    .split(',')
                    .map(|p| p.trim().parse::<usize>().map_err(|_| bad_key("pool")))
                    .collect::<Result<_>>()?;
                if parts.len() != 3 {
                    return Err(bad_key("pool"));
                }
                pool = Some(PoolSizes::new(parts[0], parts[1], parts[2]));
            }
            "permute" => permute = Some(val.parse::<bool>().map_err(|_| bad_key("permute"))?),
            "noise_seed" => {
                noise_seed = Some(val.parse::<u64>().map_err(|_| bad_key("noise_seed"))?)
            }
            _ => return Err(Error::Format(format!("unknown key field `{k}`"))),
        }
    }
    let key = SecretKey {
        v: v.ok_or_else(|| bad_key("v"))?,
        noise_seed,
        arch_id: arch.ok_or_else(|| bad_key("arch"))?,
        pool_sizes: pool.ok_or_else(|| bad_key("pool"))?,
        permute: permute.ok_or_else(|| bad_key("permute"))?,
    };
    Ok(key)
}

fn bad_key(field: &str) -> Error {
    Error::Format(format!("missing or malformed key field `{field}`"))
}

pub fn write_key(path: &Path, key: &SecretKey) -> Result<()> {
    fs::write(path, encode_key(key))?;
    Ok(())
}

pub fn read_key(path: &Path) -> Result<SecretKey> {
    decode_key(&fs::read_to_string(path)?)
}

/// Binary 8-bit PGM of one row vector folded to `h x w`, values clamped
/// from [0, 1].
pub fn write_pgm(path: &Path, pixels: &[f64], h: usize, w: usize) -> Result<()> {
    if pixels.len() != h * w {
        return Err(Error::ShapeMismatch(format!(
            "{} pixels do not fold to {h}x{w}",
            pixels.len()
        )));
    }
    let mut bytes = format!("P5\n{w} {h}\n255\n").into_bytes();
    bytes.extend(
        pixels
            .iter()
            .map(|&p| (p.clamp(0.0, 1.0) * 255.0).round() as u8),
    );
    fs::write(path, bytes)?;
    Ok(())
}
