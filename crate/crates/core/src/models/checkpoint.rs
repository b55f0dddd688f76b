//! Versioned little-endian checkpoint format.
//!
//! ```text
//! magic      8 bytes  "BNNPRUNE"
//! version    u32
//! spec       arch u8, n u32, widths n×u32, input 3×u32, classes u32
//! counters   epoch u64, has_rng u8, [seed 32 bytes, stream u64, word_pos u128]
//! layers     count u32, then per layer:
//!              name (u32 len + utf-8), precision u8, trainable u8, stride u32, pad u32,
//!              weight tensor (ndim u32, dims ndim×u32, data f64×len),
//!              bias (u8 flag, u32 len, f64×len),
//!              fixed alpha (u8 flag, u32 len, f64×len),
//!              batch norm (u8 flag, momentum f64, eps f64, u32 len, mean f64×len, var f64×len),
//!              mask (u8 flag, mode u8, trainable u8, u32 len, f64×len)
//! nodes      count u32, then per node: op u8, arg0 u32, arg1 u32, n_inputs u32, inputs×u32
//! trailer    crc32 (IEEE) of every preceding byte, u32
//! ```

use std::path::Path;

use super::{Arch, ModelSpec};
use crate::binops::BatchNormState;
use crate::graph::{Layer, Network, Node, Op, Precision};
use crate::subsidiary::{FilterMask, MaskMode};
use crate::tensor::Tensor;
use crate::{Error, Result};

pub const MAGIC: &[u8; 8] = b"BNNPRUNE";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RngState {
    pub seed: [u8; 32],
    pub stream: u64,
    pub word_pos: u128,
}

impl RngState {
    pub fn capture(rng: &rand_chacha::ChaCha8Rng) -> Self {
        RngState {
            seed: rng.get_seed(),
            stream: rng.get_stream(),
            word_pos: rng.get_word_pos(),
        }
    }

    pub fn restore(&self) -> rand_chacha::ChaCha8Rng {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::from_seed(self.seed);
        rng.set_stream(self.stream);
        rng.set_word_pos(self.word_pos);
        rng
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub spec: ModelSpec,
    pub network: Network,
    pub epoch: u64,
    pub rng: Option<RngState>,
}

struct Writer(Vec<u8>);

impl Writer {
    fn u8(&mut self, v: u8) {
        self.0.push(v);
    }
    fn u32(&mut self, v: usize) {
        self.0.extend_from_slice(&(v as u32).to_le_bytes());
    }
    fn u64(&mut self, v: u64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn f64(&mut self, v: f64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn f64s(&mut self, v: &[f64]) {
        self.u32(v.len());
        v.iter().for_each(|&x| self.f64(x));
    }
    fn opt_f64s(&mut self, v: Option<&[f64]>) {
        match v {
            Some(v) => {
                self.u8(1);
                self.f64s(v);
            }
            None => self.u8(0),
        }
    }
}

fn op_code(op: &Op) -> (u8, usize, usize) {
    match *op {
        Op::Input => (0, 0, 0),
        Op::Conv(l) => (1, l, 0),
        Op::Linear(l) => (2, l, 0),
        Op::BatchNorm(l) => (3, l, 0),
        Op::Sign => (4, 0, 0),
        Op::Gate(l) => (5, l, 0),
        Op::MaxPool(k) => (6, k, 0),
        Op::GlobalAvgPool => (7, 0, 0),
        Op::Add => (8, 0, 0),
        Op::Downsample { stride, channels } => (9, stride, channels),
    }
}

fn op_from(code: u8, a: usize, b: usize) -> Option<Op> {
    Some(match code {
        0 => Op::Input,
        1 => Op::Conv(a),
        2 => Op::Linear(a),
        3 => Op::BatchNorm(a),
        4 => Op::Sign,
        5 => Op::Gate(a),
        6 => Op::MaxPool(a),
        7 => Op::GlobalAvgPool,
        8 => Op::Add,
        9 => Op::Downsample {
            stride: a,
            channels: b,
        },
        _ => return None,
    })
}

pub fn encode(ck: &Checkpoint) -> Vec<u8> {
    let mut w = Writer(Vec::new());
    w.0.extend_from_slice(MAGIC);
    w.u32(FORMAT_VERSION as usize);
    w.u8(ck.spec.arch.code());
    w.u32(ck.spec.widths.len());
    ck.spec.widths.iter().for_each(|&x| w.u32(x));
    ck.spec.input_shape.iter().for_each(|&x| w.u32(x));
    w.u32(ck.spec.classes);
    w.u64(ck.epoch);
    match &ck.rng {
        Some(r) => {
            w.u8(1);
            w.0.extend_from_slice(&r.seed);
            w.u64(r.stream);
            w.0.extend_from_slice(&r.word_pos.to_le_bytes());
        }
        None => w.u8(0),
    }
    let net = &ck.network;
    w.u32(net.layers.len());
    for l in &net.layers {
        w.u32(l.name.len());
        w.0.extend_from_slice(l.name.as_bytes());
        w.u8(match l.precision {
            Precision::Full => 0,
            Precision::Binary => 1,
        });
        w.u8(l.trainable as u8);
        w.u32(l.stride);
        w.u32(l.pad);
        w.u32(l.weight.ndim());
        l.weight.shape().iter().for_each(|&d| w.u32(d));
        l.weight.data().iter().for_each(|&x| w.f64(x));
        w.opt_f64s(l.bias.as_deref());
        w.opt_f64s(l.fixed_alpha.as_deref());
        match &l.bn {
            Some(bn) => {
                w.u8(1);
                w.f64(bn.momentum);
                w.f64(bn.eps);
                w.f64s(&bn.running_mean);
                w.f64s(&bn.running_var);
            }
            None => w.u8(0),
        }
        match &l.mask {
            Some(m) => {
                w.u8(1);
                w.u8(m.mode().code());
                w.u8(m.trainable() as u8);
                w.f64s(m.values());
            }
            None => w.u8(0),
        }
    }
    w.u32(net.nodes.len());
    for n in &net.nodes {
        let (c, a, b) = op_code(&n.op);
        w.u8(c);
        w.u32(a);
        w.u32(b);
        w.u32(n.inputs.len());
        n.inputs.iter().for_each(|&i| w.u32(i));
    }
    let crc = crc32fast::hash(&w.0);
    w.0.extend_from_slice(&crc.to_le_bytes());
    w.0
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn corrupt(&self, reason: impl Into<String>) -> Error {
        Error::Corrupt {
            offset: self.pos as u64,
            reason: reason.into(),
        }
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.buf.len() - self.pos < n {
            return Err(self.corrupt(format!(
                "truncated: needed {n} bytes, {} left",
                self.buf.len() - self.pos
            )));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }
    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }
    fn u32(&mut self) -> Result<usize> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()) as usize)
    }
    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    fn len(&mut self, elem: usize) -> Result<usize> {
        let n = self.u32()?;
        if n.saturating_mul(elem) > self.buf.len() - self.pos {
            return Err(self.corrupt(format!("length {n} runs past end of file")));
        }
        Ok(n)
    }
    fn f64s(&mut self) -> Result<Vec<f64>> {
        let n = self.len(8)?;
        (0..n).map(|_| self.f64()).collect()
    }
    fn flag(&mut self) -> Result<bool> {
        match self.u8()? {
            0 => Ok(false),
            1 => Ok(true),
            v => Err(self.corrupt(format!("invalid flag byte {v}"))),
        }
    }
}

pub fn decode(buf: &[u8]) -> Result<Checkpoint> {
    let mut r = Reader { buf, pos: 0 };
    if r.take(8)? != MAGIC {
        return Err(Error::Corrupt {
            offset: 0,
            reason: "bad magic".into(),
        });
    }
    let version = r.u32()? as u32;
    if version != FORMAT_VERSION {
        return Err(Error::VersionMismatch {
            found: version,
            expected: FORMAT_VERSION,
        });
    }
    if buf.len() < 16 {
        return Err(r.corrupt("truncated: missing checksum"));
    }
    let body = &buf[..buf.len() - 4];
    let stored = u32::from_le_bytes(buf[buf.len() - 4..].try_into().unwrap());
    if crc32fast::hash(body) != stored {
        return Err(Error::Corrupt {
            offset: (buf.len() - 4) as u64,
            reason: "checksum mismatch (truncated or corrupted file)".into(),
        });
    }
    let mut r = Reader {
        buf: body,
        pos: r.pos,
    };
    let arch_code = r.u8()?;
    let arch = Arch::from_code(arch_code).ok_or_else(|| r.corrupt(format!("unknown arch code {arch_code}")))?;
    let nw = r.len(4)?;
    let widths = (0..nw).map(|_| r.u32()).collect::<Result<Vec<_>>>()?;
    let input_shape = [r.u32()?, r.u32()?, r.u32()?];
    let classes = r.u32()?;
    let spec = ModelSpec::new(arch, widths, input_shape, classes);
    let epoch = r.u64()?;
    let rng = if r.flag()? {
        let seed: [u8; 32] = r.take(32)?.try_into().unwrap();
        let stream = r.u64()?;
        let word_pos = u128::from_le_bytes(r.take(16)?.try_into().unwrap());
        Some(RngState {
            seed,
            stream,
            word_pos,
        })
    } else {
        None
    };
    let mut net = Network::new(input_shape, classes);
    net.nodes.clear();
    let n_layers = r.len(1)?;
    for _ in 0..n_layers {
        let name_len = r.len(1)?;
        let name = String::from_utf8(r.take(name_len)?.to_vec()).map_err(|_| r.corrupt("layer name is not utf-8"))?;
        let precision = match r.u8()? {
            0 => Precision::Full,
            1 => Precision::Binary,
            v => return Err(r.corrupt(format!("invalid precision {v}"))),
        };
        let trainable = r.flag()?;
        let stride = r.u32()?;
        let pad = r.u32()?;
        let ndim = r.len(4)?;
        let shape = (0..ndim).map(|_| r.u32()).collect::<Result<Vec<_>>>()?;
        let count: usize = shape.iter().product();
        if count.saturating_mul(8) > r.buf.len() - r.pos {
            return Err(r.corrupt("tensor data runs past end of file"));
        }
        let data = (0..count).map(|_| r.f64()).collect::<Result<Vec<_>>>()?;
        let weight = Tensor::new(shape, data)?;
        let bias = if r.flag()? { Some(r.f64s()?) } else { None };
        let fixed_alpha = if r.flag()? { Some(r.f64s()?) } else { None };
        let bn = if r.flag()? {
            let momentum = r.f64()?;
            let eps = r.f64()?;
            let running_mean = r.f64s()?;
            let running_var = r.f64s()?;
            Some(BatchNormState {
                running_mean,
                running_var,
                momentum,
                eps,
            })
        } else {
            None
        };
        let mask = if r.flag()? {
            let code = r.u8()?;
            let mode = MaskMode::from_code(code).ok_or_else(|| r.corrupt(format!("invalid mask mode {code}")))?;
            let trainable = r.flag()?;
            let mut m = FilterMask::from_values(r.f64s()?, mode);
            m.set_trainable(trainable);
            Some(m)
        } else {
            None
        };
        net.layers.push(Layer {
            name,
            precision,
            weight,
            bias,
            fixed_alpha,
            stride,
            pad,
            bn,
            mask,
            trainable,
        });
    }
    let n_nodes = r.len(1)?;
    for _ in 0..n_nodes {
        let code = r.u8()?;
        let a = r.u32()?;
        let b = r.u32()?;
        let op = op_from(code, a, b).ok_or_else(|| r.corrupt(format!("invalid op code {code}")))?;
        let ni = r.len(4)?;
        let inputs = (0..ni).map(|_| r.u32()).collect::<Result<Vec<_>>>()?;
        if net.nodes.is_empty() {
            net.nodes.push(Node { op, inputs });
        } else {
            net.push(op, &inputs).map_err(|e| r.corrupt(e.to_string()))?;
        }
    }
    if r.pos != body.len() {
        return Err(r.corrupt("trailing bytes before checksum"));
    }
    Ok(Checkpoint {
        spec,
        network: net,
        epoch,
        rng,
    })
}

/// Writes atomically: the file is written under a temporary name and renamed.
pub fn save_checkpoint(ck: &Checkpoint, path: &Path) -> Result<()> {
    let bytes = encode(ck);
    let tmp = path.with_extension("tmp");
    std::fs::write(&tmp, &bytes).map_err(|e| Error::io(&tmp, e))?;
    std::fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(&bytes)
}
