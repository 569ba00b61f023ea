//! Versioned binary checkpoint container.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! magic "FDFC" | version u32 | stage u8 | config_fp u64 | stage1_fp u64
//! epoch u32 | best_val f64
//! n_params u32
//!   per tensor: name (u16 len + utf8) | trainable u8 | ndim u8 | dims u32.. | f32 data
//! has_optimizer u8
//!   per entry (n u32 first): name | ndim u8 | dims u32.. | f32 data
//! ```
//!
//! Save goes through a temporary file and rename, so interrupted writes
//! never leave a partial checkpoint. `load(save(x))` is bit-identical.

use std::fs;
use std::io::Write;
use std::path::Path;

use fdfnet_nn::params::{ParamId, ParamStore};
use fdfnet_nn::tensor::Tensor;
use fdfnet_nn::Rmsprop;

use crate::error::CoreError;

const MAGIC: &[u8; 4] = b"FDFC";
const VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StageTag {
    Fme,
    Dsr,
    Full,
}

impl StageTag {
    fn to_byte(self) -> u8 {
        match self {
            StageTag::Fme => 1,
            StageTag::Dsr => 2,
            StageTag::Full => 3,
        }
    }

    fn from_byte(b: u8) -> Result<Self, CoreError> {
        match b {
            1 => Ok(StageTag::Fme),
            2 => Ok(StageTag::Dsr),
            3 => Ok(StageTag::Full),
            other => Err(CoreError::Data(format!("unknown checkpoint stage tag {other}"))),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            StageTag::Fme => "fme",
            StageTag::Dsr => "dsr",
            StageTag::Full => "full",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CheckpointMeta {
    pub stage: StageTag,
    pub config_fingerprint: u64,
    /// Fingerprint of the stage-1 parameters this stage-2 model was trained
    /// against (zero when not applicable).
    pub stage1_fingerprint: u64,
    pub epoch: u32,
    pub best_val: f64,
}

#[derive(Debug, Clone)]
pub struct CheckpointTensor {
    pub name: String,
    pub trainable: bool,
    pub value: Tensor<f32>,
}

#[derive(Debug, Clone)]
pub struct Checkpoint {
    pub meta: CheckpointMeta,
    pub tensors: Vec<CheckpointTensor>,
    pub optimizer: Option<Vec<(String, Tensor<f32>)>>,
}

/// FNV-1a over arbitrary bytes.
pub fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h = 0xcbf2_9ce4_8422_2325u64;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x100_0000_01b3);
    }
    h
}

/// Fingerprint over names and raw values of all parameters under a prefix
/// (every parameter when the prefix is empty).
pub fn fingerprint_params(params: &ParamStore<f32>, prefix: &str) -> u64 {
    let mut bytes = Vec::new();
    for (_, p) in params.iter() {
        if !p.name.starts_with(prefix) {
            continue;
        }
        bytes.extend_from_slice(p.name.as_bytes());
        for v in p.value.data() {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
    }
    fnv1a(&bytes)
}

fn push_tensor(out: &mut Vec<u8>, name: &str, trainable: Option<bool>, t: &Tensor<f32>) {
    out.extend_from_slice(&(name.len() as u16).to_le_bytes());
    out.extend_from_slice(name.as_bytes());
    if let Some(tr) = trainable {
        out.push(tr as u8);
    }
    out.push(t.shape().len() as u8);
    for &d in t.shape() {
        out.extend_from_slice(&(d as u32).to_le_bytes());
    }
    for v in t.data() {
        out.extend_from_slice(&v.to_le_bytes());
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
    path: String,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], CoreError> {
        if self.pos + n > self.bytes.len() {
            return Err(CoreError::Data(format!("{}: truncated checkpoint", self.path)));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8, CoreError> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16, CoreError> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> Result<u32, CoreError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64, CoreError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64, CoreError> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn name(&mut self) -> Result<String, CoreError> {
        let len = self.u16()? as usize;
        String::from_utf8(self.take(len)?.to_vec())
            .map_err(|_| CoreError::Data(format!("{}: bad tensor name", self.path)))
    }

    fn tensor(&mut self) -> Result<Tensor<f32>, CoreError> {
        let ndim = self.u8()? as usize;
        let mut shape = Vec::with_capacity(ndim);
        for _ in 0..ndim {
            shape.push(self.u32()? as usize);
        }
        let n: usize = shape.iter().product();
        let raw = self.take(4 * n)?;
        let data = raw
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        Ok(Tensor::from_vec(&shape, data))
    }
}

/// Saves every parameter whose name starts with `prefix` (all when empty).
pub fn save_checkpoint(
    path: &Path,
    meta: &CheckpointMeta,
    params: &ParamStore<f32>,
    prefix: &str,
    optimizer: Option<&Rmsprop<f32>>,
) -> Result<(), CoreError> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.push(meta.stage.to_byte());
    out.extend_from_slice(&meta.config_fingerprint.to_le_bytes());
    out.extend_from_slice(&meta.stage1_fingerprint.to_le_bytes());
    out.extend_from_slice(&meta.epoch.to_le_bytes());
    out.extend_from_slice(&meta.best_val.to_le_bytes());

    let selected: Vec<_> = params.iter().filter(|(_, p)| p.name.starts_with(prefix)).collect();
    out.extend_from_slice(&(selected.len() as u32).to_le_bytes());
    for (_, p) in &selected {
        push_tensor(&mut out, &p.name, Some(p.trainable), &p.value);
    }

    match optimizer {
        Some(opt) => {
            let entries: Vec<(ParamId, &Tensor<f32>)> = opt
                .state()
                .filter(|(id, _)| params.get(*id).name.starts_with(prefix))
                .collect();
            out.push(1);
            out.extend_from_slice(&(entries.len() as u32).to_le_bytes());
            for (id, t) in entries {
                push_tensor(&mut out, &params.get(id).name, None, t);
            }
        }
        None => out.push(0),
    }

    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent)
                .map_err(|e| CoreError::io(parent.display().to_string(), e))?;
        }
    }
    let tmp = path.with_extension("ckpt.tmp");
    {
        let mut f =
            fs::File::create(&tmp).map_err(|e| CoreError::io(tmp.display().to_string(), e))?;
        f.write_all(&out).map_err(|e| CoreError::io(tmp.display().to_string(), e))?;
    }
    fs::rename(&tmp, path).map_err(|e| CoreError::io(path.display().to_string(), e))?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint, CoreError> {
    let bytes = fs::read(path).map_err(|e| CoreError::io(path.display().to_string(), e))?;
    let mut r = Reader { bytes: &bytes, pos: 0, path: path.display().to_string() };
    if r.take(4)? != MAGIC {
        return Err(CoreError::Data(format!("{}: not a checkpoint file", path.display())));
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(CoreError::Data(format!(
            "{}: unsupported checkpoint version {version}",
            path.display()
        )));
    }
    let stage = StageTag::from_byte(r.u8()?)?;
    let config_fingerprint = r.u64()?;
    let stage1_fingerprint = r.u64()?;
    let epoch = r.u32()?;
    let best_val = r.f64()?;
    let n = r.u32()? as usize;
    let mut tensors = Vec::with_capacity(n);
    for _ in 0..n {
        let name = r.name()?;
        let trainable = r.u8()? != 0;
        let value = r.tensor()?;
        tensors.push(CheckpointTensor { name, trainable, value });
    }
    let optimizer = if r.u8()? == 1 {
        let n = r.u32()? as usize;
        let mut entries = Vec::with_capacity(n);
        for _ in 0..n {
            let name = r.name()?;
            let value = r.tensor()?;
            entries.push((name, value));
        }
        Some(entries)
    } else {
        None
    };
    Ok(Checkpoint {
        meta: CheckpointMeta { stage, config_fingerprint, stage1_fingerprint, epoch, best_val },
        tensors,
        optimizer,
    })
}

/// Copies checkpoint tensors into a parameter store by name, shape-checked.
/// Every checkpoint tensor must have a home; parameters outside the
/// checkpoint keep their values.
pub fn apply_to_store(params: &mut ParamStore<f32>, ckpt: &Checkpoint) -> Result<(), CoreError> {
    for t in &ckpt.tensors {
        let id = params
            .lookup(&t.name)
            .map_err(|_| CoreError::Data(format!("checkpoint tensor '{}' has no home", t.name)))?;
        if params.value(id).shape() != t.value.shape() {
            return Err(CoreError::Data(format!(
                "checkpoint tensor '{}' shape {:?} does not match model {:?}",
                t.name,
                t.value.shape(),
                params.value(id).shape()
            )));
        }
        *params.value_mut(id) = t.value.clone();
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use fdfnet_nn::init;
    use rand::SeedableRng;

    #[test]
    fn save_load_round_trip_is_bit_identical() {
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(9);
        let mut ps = ParamStore::<f32>::new();
        ps.register("a.w", init::uniform(&mut rng, &[3, 4], 1.0)).unwrap();
        ps.register("a.b", init::uniform(&mut rng, &[4], 1.0)).unwrap();
        ps.register_buffer("a.rmean", init::constant(&[4], 0.0)).unwrap();

        let mut opt = Rmsprop::new(2e-4);
        let grads = fdfnet_nn::ParamGrads {
            grads: vec![
                Some(init::uniform(&mut rng, &[3, 4], 0.5)),
                Some(init::uniform(&mut rng, &[4], 0.5)),
                None,
            ],
        };
        opt.step(&mut ps, &grads);

        let meta = CheckpointMeta {
            stage: StageTag::Fme,
            config_fingerprint: 0xDEAD_BEEF,
            stage1_fingerprint: 0,
            epoch: 12,
            best_val: 0.125,
        };
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.ckpt");
        save_checkpoint(&path, &meta, &ps, "", Some(&opt)).unwrap();
        let first = fs::read(&path).unwrap();

        let ckpt = load_checkpoint(&path).unwrap();
        assert_eq!(ckpt.meta, meta);
        assert_eq!(ckpt.tensors.len(), 3);
        assert_eq!(ckpt.optimizer.as_ref().unwrap().len(), 2);

        // Re-apply and re-save: bytes must be identical.
        let mut ps2 = ParamStore::<f32>::new();
        ps2.register("a.w", Tensor::zeros(&[3, 4])).unwrap();
        ps2.register("a.b", Tensor::zeros(&[4])).unwrap();
        ps2.register_buffer("a.rmean", Tensor::zeros(&[4])).unwrap();
        apply_to_store(&mut ps2, &ckpt).unwrap();
        let mut opt2 = Rmsprop::new(2e-4);
        let entries: Vec<(ParamId, Tensor<f32>)> = ckpt
            .optimizer
            .as_ref()
            .unwrap()
            .iter()
            .map(|(name, t)| (ps2.lookup(name).unwrap(), t.clone()))
            .collect();
        opt2.restore(ps2.len(), entries);
        let path2 = dir.path().join("model2.ckpt");
        save_checkpoint(&path2, &meta, &ps2, "", Some(&opt2)).unwrap();
        let second = fs::read(&path2).unwrap();
        assert_eq!(first, second);
    }

    #[test]
    fn shape_mismatch_is_rejected() {
        let mut ps = ParamStore::<f32>::new();
        ps.register("w", Tensor::zeros(&[2, 2])).unwrap();
        let meta = CheckpointMeta {
            stage: StageTag::Full,
            config_fingerprint: 1,
            stage1_fingerprint: 0,
            epoch: 0,
            best_val: 0.0,
        };
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.ckpt");
        save_checkpoint(&path, &meta, &ps, "", None).unwrap();
        let ckpt = load_checkpoint(&path).unwrap();
        let mut other = ParamStore::<f32>::new();
        other.register("w", Tensor::zeros(&[3])).unwrap();
        assert!(apply_to_store(&mut other, &ckpt).is_err());
    }

    #[test]
    fn corrupt_magic_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.ckpt");
        fs::write(&path, b"WXYZ123").unwrap();
        assert!(load_checkpoint(&path).is_err());
    }
}
