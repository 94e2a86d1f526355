//! Binary weights container.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! magic   4 bytes  "UENC"
//! version u32      currently 1
//! config  u32 length + that many bytes of config JSON
//! count   u32      number of tensors
//! tensor  u16 name length, name bytes (UTF-8),
//!         u8 ndim, ndim × u32 dims,
//!         product × f32 values
//! ```
//!
//! Tensors may appear in any order but every tensor of the config's layout
//! must appear exactly once with its expected shape. `f32` storage makes a
//! save/load round trip bit-exact.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::{EncoderConfig, EncoderError, EncoderParams, ParamLayout};

const MAGIC: [u8; 4] = *b"UENC";
const WEIGHTS_VERSION: u32 = 1;
const MAX_CONFIG_BYTES: u32 = 1 << 20;
const MAX_DIMS: u8 = 4;

fn io_err(path: &Path, source: std::io::Error) -> EncoderError {
    EncoderError::Io {
        path: path.display().to_string(),
        source,
    }
}

fn bad(path: &Path, message: impl Into<String>) -> EncoderError {
    EncoderError::BadWeightsFile {
        path: path.display().to_string(),
        message: message.into(),
    }
}

fn fill(reader: &mut impl Read, buf: &mut [u8], path: &Path) -> Result<(), EncoderError> {
    reader.read_exact(buf).map_err(|e| {
        if e.kind() == std::io::ErrorKind::UnexpectedEof {
            bad(path, "unexpected end of file")
        } else {
            io_err(path, e)
        }
    })
}

fn read_u8(reader: &mut impl Read, path: &Path) -> Result<u8, EncoderError> {
    let mut b = [0u8; 1];
    fill(reader, &mut b, path)?;
    Ok(b[0])
}

fn read_u16(reader: &mut impl Read, path: &Path) -> Result<u16, EncoderError> {
    let mut b = [0u8; 2];
    fill(reader, &mut b, path)?;
    Ok(u16::from_le_bytes(b))
}

fn read_u32(reader: &mut impl Read, path: &Path) -> Result<u32, EncoderError> {
    let mut b = [0u8; 4];
    fill(reader, &mut b, path)?;
    Ok(u32::from_le_bytes(b))
}

/// Write all parameters to `path` in the container format above.
pub fn save_params(params: &EncoderParams, path: &Path) -> Result<(), EncoderError> {
    let file = File::create(path).map_err(|e| io_err(path, e))?;
    let mut w = BufWriter::new(file);
    let config_json =
        serde_json::to_vec(params.config()).expect("config serialization cannot fail");
    w.write_all(&MAGIC).map_err(|e| io_err(path, e))?;
    w.write_all(&WEIGHTS_VERSION.to_le_bytes())
        .map_err(|e| io_err(path, e))?;
    w.write_all(&(config_json.len() as u32).to_le_bytes())
        .map_err(|e| io_err(path, e))?;
    w.write_all(&config_json).map_err(|e| io_err(path, e))?;
    let layout = params.layout();
    w.write_all(&(layout.entries().len() as u32).to_le_bytes())
        .map_err(|e| io_err(path, e))?;
    for entry in layout.entries() {
        let name = entry.name.as_bytes();
        w.write_all(&(name.len() as u16).to_le_bytes())
            .map_err(|e| io_err(path, e))?;
        w.write_all(name).map_err(|e| io_err(path, e))?;
        w.write_all(&[entry.shape.len() as u8])
            .map_err(|e| io_err(path, e))?;
        for &dim in &entry.shape {
            w.write_all(&(dim as u32).to_le_bytes())
                .map_err(|e| io_err(path, e))?;
        }
        let values = &params.values()[entry.offset..entry.offset + entry.len()];
        let mut bytes = Vec::with_capacity(values.len() * 4);
        for &v in values {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
        w.write_all(&bytes).map_err(|e| io_err(path, e))?;
    }
    w.flush().map_err(|e| io_err(path, e))
}

struct Header {
    config: EncoderConfig,
    count: usize,
}

fn read_header(reader: &mut impl Read, path: &Path) -> Result<Header, EncoderError> {
    let mut magic = [0u8; 4];
    fill(reader, &mut magic, path)?;
    if magic != MAGIC {
        return Err(bad(path, "not an encoder weights file (bad magic)"));
    }
    let version = read_u32(reader, path)?;
    if version != WEIGHTS_VERSION {
        return Err(bad(path, format!("unsupported format version {version}")));
    }
    let config_len = read_u32(reader, path)?;
    if config_len > MAX_CONFIG_BYTES {
        return Err(bad(path, format!("config block of {config_len} bytes is implausible")));
    }
    let mut config_json = vec![0u8; config_len as usize];
    fill(reader, &mut config_json, path)?;
    let config: EncoderConfig = serde_json::from_slice(&config_json)
        .map_err(|e| bad(path, format!("embedded config does not parse: {e}")))?;
    let count = read_u32(reader, path)? as usize;
    Ok(Header { config, count })
}

fn read_tensor_meta(
    reader: &mut impl Read,
    path: &Path,
) -> Result<(String, Vec<usize>), EncoderError> {
    let name_len = read_u16(reader, path)? as usize;
    let mut name_bytes = vec![0u8; name_len];
    fill(reader, &mut name_bytes, path)?;
    let name = String::from_utf8(name_bytes)
        .map_err(|_| bad(path, "tensor name is not valid UTF-8"))?;
    let ndim = read_u8(reader, path)?;
    if ndim == 0 || ndim > MAX_DIMS {
        return Err(bad(path, format!("tensor {name} claims {ndim} dimensions")));
    }
    let mut shape = Vec::with_capacity(ndim as usize);
    for _ in 0..ndim {
        shape.push(read_u32(reader, path)? as usize);
    }
    Ok((name, shape))
}

/// Load parameters, reading the config embedded in the file.
pub fn load_params(path: &Path) -> Result<EncoderParams, EncoderError> {
    let file = File::open(path).map_err(|e| io_err(path, e))?;
    let mut r = BufReader::new(file);
    let header = read_header(&mut r, path)?;
    header
        .config
        .validate()
        .map_err(|e| bad(path, format!("embedded config is invalid: {e}")))?;
    let layout = ParamLayout::new(&header.config);
    if header.count != layout.entries().len() {
        return Err(bad(
            path,
            format!(
                "file has {} tensors, config implies {}",
                header.count,
                layout.entries().len()
            ),
        ));
    }
    let mut values = vec![0.0f32; layout.total_len()];
    let mut seen = vec![false; layout.entries().len()];
    for _ in 0..header.count {
        let (name, shape) = read_tensor_meta(&mut r, path)?;
        let (index, entry) = layout
            .entries()
            .iter()
            .enumerate()
            .find(|(_, e)| e.name == name)
            .ok_or_else(|| bad(path, format!("unknown tensor {name}")))?;
        if seen[index] {
            return Err(bad(path, format!("tensor {name} appears twice")));
        }
        seen[index] = true;
        if shape != entry.shape {
            return Err(EncoderError::ShapeMismatch {
                name,
                expected: entry.shape.clone(),
                got: shape,
            });
        }
        let mut bytes = vec![0u8; entry.len() * 4];
        fill(&mut r, &mut bytes, path)?;
        for (slot, chunk) in values[entry.offset..entry.offset + entry.len()]
            .iter_mut()
            .zip(bytes.chunks_exact(4))
        {
            let v = f32::from_le_bytes(chunk.try_into().expect("chunk of 4"));
            if !v.is_finite() {
                return Err(bad(path, format!("tensor {name} holds a non-finite value")));
            }
            *slot = v;
        }
    }
    Ok(EncoderParams::from_parts(header.config, values))
}

/// Load parameters and require the stored config to equal `expected`.
pub fn load_params_expecting(
    path: &Path,
    expected: &EncoderConfig,
) -> Result<EncoderParams, EncoderError> {
    let params = load_params(path)?;
    if params.config() != expected {
        return Err(EncoderError::ConfigMismatch(format!(
            "file {} holds {:?}, expected {:?}",
            path.display(),
            params.config(),
            expected
        )));
    }
    Ok(params)
}

/// Named tensor shapes as listed in a container header.
pub type TensorShapes = Vec<(String, Vec<usize>)>;

/// Read only the header: the stored config plus every tensor's name and
/// shape, without materializing the values.
pub fn peek_params(path: &Path) -> Result<(EncoderConfig, TensorShapes), EncoderError> {
    let file = File::open(path).map_err(|e| io_err(path, e))?;
    let mut r = BufReader::new(file);
    let header = read_header(&mut r, path)?;
    let mut tensors = Vec::with_capacity(header.count);
    for _ in 0..header.count {
        let (name, shape) = read_tensor_meta(&mut r, path)?;
        let len: usize = shape.iter().product();
        std::io::copy(
            &mut r.by_ref().take(len as u64 * 4),
            &mut std::io::sink(),
        )
        .map_err(|e| io_err(path, e))?;
        tensors.push((name, shape));
    }
    Ok((header.config, tensors))
}
