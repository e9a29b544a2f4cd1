//! Binary weight-file format.
//!
//! Layout, all little-endian:
//!
//! ```text
//! magic   [u8; 4] = "SSW1"
//! version u16     = 1
//! layers  u32
//! per layer:
//!   kind     u8            1 conv, 2 pointwise, 3 depthwise, 4 transposed
//!   ndims    u8
//!   dims     ndims x u32
//!   format   u8            0 = 32-bit float payload, 1 = coded minifloat
//!   if coded: exponent_bits u8, mantissa_bits u8, bias i16, subnormals u8
//!   payload  product(dims) x (4 bytes f32 | code bytes)
//!   mask     u8            0 = none, 1 = bitmap of ceil(n/8) bytes follows
//! ```
//!
//! Coded payloads store the format's integer codes (one or two bytes each,
//! from the format width), so a file written from a quantized bank decodes to
//! exactly the same values. Float payloads are stored as f32; writing a bank
//! that has been through f32 once is therefore lossless and byte-stable.

use std::fs;
use std::io::{self, Read, Write};
use std::path::Path;

use sepsim_core::minifloat::MinifloatFormat;
use sepsim_core::model::{LayerSpec, NetworkPlan, WeightBank, WeightTensor};

const MAGIC: &[u8; 4] = b"SSW1";
const VERSION: u16 = 1;

/// Weight-row kind tag, stored so a file is self-describing without a config.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LayerKind {
    Conv = 1,
    Pointwise = 2,
    Depthwise = 3,
    Transposed = 4,
}

impl LayerKind {
    fn from_tag(tag: u8) -> Option<Self> {
        match tag {
            1 => Some(LayerKind::Conv),
            2 => Some(LayerKind::Pointwise),
            3 => Some(LayerKind::Depthwise),
            4 => Some(LayerKind::Transposed),
            _ => None,
        }
    }

    pub fn of_spec(spec: &LayerSpec) -> Option<Self> {
        match spec {
            LayerSpec::Conv1D { .. } => Some(LayerKind::Conv),
            LayerSpec::Pointwise { .. } => Some(LayerKind::Pointwise),
            LayerSpec::DepthwiseDilated { .. } => Some(LayerKind::Depthwise),
            LayerSpec::TransposedConv1D { .. } => Some(LayerKind::Transposed),
            _ => None,
        }
    }
}

/// How one layer's payload is stored.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Storage {
    Float32,
    Coded(MinifloatFormat),
}

/// One layer record.
#[derive(Debug, Clone)]
pub struct LayerRecord {
    pub kind: LayerKind,
    pub storage: Storage,
    pub tensor: WeightTensor,
}

/// A parsed weight file.
#[derive(Debug, Clone)]
pub struct WeightFile {
    pub layers: Vec<LayerRecord>,
}

#[derive(Debug)]
pub enum WfError {
    Io(io::Error),
    Malformed(String),
}

impl std::fmt::Display for WfError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            WfError::Io(e) => write!(f, "weight file i/o: {e}"),
            WfError::Malformed(m) => write!(f, "malformed weight file: {m}"),
        }
    }
}

impl std::error::Error for WfError {}

impl From<io::Error> for WfError {
    fn from(e: io::Error) -> Self {
        // A reader that ends mid-record means the file content is wrong, not
        // that the transfer failed. Classify it with the other parse errors.
        if e.kind() == io::ErrorKind::UnexpectedEof {
            WfError::Malformed("file ends mid-record (truncated)".into())
        } else {
            WfError::Io(e)
        }
    }
}

fn bad(msg: impl Into<String>) -> WfError {
    WfError::Malformed(msg.into())
}

fn code_bytes(fmt: &MinifloatFormat) -> usize {
    (fmt.width() as usize).div_ceil(8)
}

impl WeightFile {
    /// Capture a bank, storing every layer in `storage`. The layer kinds come
    /// from the plan the bank belongs to.
    pub fn from_bank(plan: &NetworkPlan, bank: &WeightBank, storage: Storage) -> Self {
        let layers = plan
            .weight_rows()
            .into_iter()
            .zip(&bank.tensors)
            .map(|(row, tensor)| LayerRecord {
                kind: LayerKind::of_spec(&plan.rows[row].spec).expect("weight row"),
                storage,
                tensor: tensor.clone(),
            })
            .collect();
        WeightFile { layers }
    }

    /// Reassemble a bank, checking shape agreement with `plan`.
    pub fn into_bank(self, plan: &NetworkPlan) -> Result<WeightBank, WfError> {
        let bank = WeightBank { tensors: self.layers.into_iter().map(|l| l.tensor).collect() };
        bank.validate_for(plan).map_err(|e| bad(e.to_string()))?;
        Ok(bank)
    }

    pub fn write(&self, w: &mut impl Write) -> Result<(), WfError> {
        w.write_all(MAGIC)?;
        w.write_all(&VERSION.to_le_bytes())?;
        w.write_all(&(self.layers.len() as u32).to_le_bytes())?;
        for layer in &self.layers {
            let t = &layer.tensor;
            w.write_all(&[layer.kind as u8, t.dims.len() as u8])?;
            for &d in &t.dims {
                w.write_all(&(d as u32).to_le_bytes())?;
            }
            match &layer.storage {
                Storage::Float32 => {
                    w.write_all(&[0u8])?;
                    for &v in &t.data {
                        w.write_all(&(v as f32).to_le_bytes())?;
                    }
                }
                Storage::Coded(fmt) => {
                    w.write_all(&[
                        1u8,
                        fmt.exponent_bits as u8,
                        fmt.mantissa_bits as u8,
                    ])?;
                    w.write_all(&(fmt.bias as i16).to_le_bytes())?;
                    w.write_all(&[fmt.subnormals as u8])?;
                    for &v in &t.data {
                        let code = fmt.encode_bits(v);
                        w.write_all(&code.to_le_bytes()[..code_bytes(fmt)])?;
                    }
                }
            }
            match &t.pruned {
                None => w.write_all(&[0u8])?,
                Some(mask) => {
                    w.write_all(&[1u8])?;
                    let mut bits = vec![0u8; mask.len().div_ceil(8)];
                    for (i, &gone) in mask.iter().enumerate() {
                        if gone {
                            bits[i / 8] |= 1 << (i % 8);
                        }
                    }
                    w.write_all(&bits)?;
                }
            }
        }
        Ok(())
    }

    pub fn read(r: &mut impl Read) -> Result<Self, WfError> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(bad(format!("bad magic {magic:02x?}")));
        }
        let version = read_u16(r)?;
        if version != VERSION {
            return Err(bad(format!("unsupported version {version}")));
        }
        let count = read_u32(r)? as usize;
        if count > 1 << 20 {
            return Err(bad(format!("implausible layer count {count}")));
        }
        let mut layers = Vec::with_capacity(count);
        for li in 0..count {
            let kind = LayerKind::from_tag(read_u8(r)?)
                .ok_or_else(|| bad(format!("layer {li}: unknown kind tag")))?;
            let ndims = read_u8(r)? as usize;
            if ndims == 0 || ndims > 4 {
                return Err(bad(format!("layer {li}: {ndims} dims")));
            }
            let mut dims = Vec::with_capacity(ndims);
            for _ in 0..ndims {
                dims.push(read_u32(r)? as usize);
            }
            let n: usize = dims.iter().product();
            if n == 0 || n > 1 << 28 {
                return Err(bad(format!("layer {li}: implausible element count {n}")));
            }
            let storage = match read_u8(r)? {
                0 => Storage::Float32,
                1 => {
                    let exponent_bits = read_u8(r)? as u32;
                    let mantissa_bits = read_u8(r)? as u32;
                    let bias = read_i16(r)? as i32;
                    let subnormals = read_u8(r)? != 0;
                    let mut fmt = MinifloatFormat::new(exponent_bits, mantissa_bits, bias)
                        .map_err(|e| bad(format!("layer {li}: {e}")))?;
                    fmt.subnormals = subnormals;
                    Storage::Coded(fmt)
                }
                tag => return Err(bad(format!("layer {li}: unknown format tag {tag}"))),
            };
            let mut data = Vec::with_capacity(n);
            match &storage {
                Storage::Float32 => {
                    let mut buf = [0u8; 4];
                    for _ in 0..n {
                        r.read_exact(&mut buf)?;
                        data.push(f32::from_le_bytes(buf) as f64);
                    }
                }
                Storage::Coded(fmt) => {
                    let width = code_bytes(fmt);
                    let mut buf = [0u8; 4];
                    for _ in 0..n {
                        r.read_exact(&mut buf[..width])?;
                        let code = u32::from_le_bytes(buf);
                        data.push(fmt.decode_bits(code));
                        buf = [0u8; 4];
                    }
                }
            }
            let pruned = match read_u8(r)? {
                0 => None,
                1 => {
                    let mut bits = vec![0u8; n.div_ceil(8)];
                    r.read_exact(&mut bits)?;
                    let mask: Vec<bool> =
                        (0..n).map(|i| bits[i / 8] & (1 << (i % 8)) != 0).collect();
                    Some(mask)
                }
                tag => return Err(bad(format!("layer {li}: unknown mask tag {tag}"))),
            };
            let mut tensor = WeightTensor { dims, data, pruned };
            tensor.enforce_prune_mask();
            layers.push(LayerRecord { kind, storage, tensor });
        }
        let mut rest = [0u8; 1];
        if r.read(&mut rest)? != 0 {
            return Err(bad("trailing bytes after the last layer"));
        }
        Ok(WeightFile { layers })
    }

    pub fn save(&self, path: &Path) -> Result<(), WfError> {
        let mut buf = Vec::new();
        self.write(&mut buf)?;
        fs::write(path, buf)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, WfError> {
        let bytes = fs::read(path)?;
        Self::read(&mut bytes.as_slice())
    }
}

fn read_u8(r: &mut impl Read) -> Result<u8, WfError> {
    let mut b = [0u8; 1];
    r.read_exact(&mut b)?;
    Ok(b[0])
}

fn read_u16(r: &mut impl Read) -> Result<u16, WfError> {
    let mut b = [0u8; 2];
    r.read_exact(&mut b)?;
    Ok(u16::from_le_bytes(b))
}

fn read_i16(r: &mut impl Read) -> Result<i16, WfError> {
    let mut b = [0u8; 2];
    r.read_exact(&mut b)?;
    Ok(i16::from_le_bytes(b))
}

fn read_u32(r: &mut impl Read) -> Result<u32, WfError> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}
