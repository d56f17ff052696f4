//! Binary training checkpoints.
//!
//! Little-endian layout:
//!
//! ```text
//! "GPCK"  u32 version (1)
//! u64 iteration  u64 round  u64 phase_iter  u8 lr_halved  u8 finished
//! f64 lr
//! u64 n  f64[n] params  f64[n] adam_m  f64[n] adam_v  u64 adam_t
//! u64 rng_seed  u64 rng_stream  u64 word_pos_lo  u64 word_pos_hi
//! u64 dim  u64 n_points  { f64[dim] coords  u64 round }[n_points]
//! u64 len  u8[len] progress (UTF-8 JSON)
//! ```

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::network::{ByteReader, NetworkError};

use super::{Adam, TrainingPoint};

pub const MAGIC: &[u8; 4] = b"GPCK";
pub const VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("not a checkpoint file (bad magic)")]
    Magic,
    #[error("unsupported checkpoint version {0}")]
    Version(u32),
    #[error("corrupt checkpoint: {0}")]
    Corrupt(String),
    #[error("checkpoint {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl From<NetworkError> for CheckpointError {
    fn from(e: NetworkError) -> Self {
        CheckpointError::Corrupt(e.to_string())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub iteration: u64,
    pub round: u64,
    pub phase_iter: u64,
    pub lr_halved: bool,
    pub finished: bool,
    pub params: Vec<f64>,
    pub adam: Adam,
    pub rng_seed: u64,
    pub rng_stream: u64,
    pub rng_word_pos: u128,
    pub dim: usize,
    pub points: Vec<TrainingPoint>,
    pub progress: String,
}

impl Checkpoint {
    pub fn encode(&self) -> Vec<u8> {
        let mut b = Vec::new();
        let u64s = |b: &mut Vec<u8>, v: u64| b.extend_from_slice(&v.to_le_bytes());
        let f64s = |b: &mut Vec<u8>, xs: &[f64]| {
            for x in xs {
                b.extend_from_slice(&x.to_le_bytes());
            }
        };
        b.extend_from_slice(MAGIC);
        b.extend_from_slice(&VERSION.to_le_bytes());
        u64s(&mut b, self.iteration);
        u64s(&mut b, self.round);
        u64s(&mut b, self.phase_iter);
        b.push(self.lr_halved as u8);
        b.push(self.finished as u8);
        f64s(&mut b, &[self.adam.lr]);
        u64s(&mut b, self.params.len() as u64);
        f64s(&mut b, &self.params);
        f64s(&mut b, &self.adam.m);
        f64s(&mut b, &self.adam.v);
        u64s(&mut b, self.adam.t);
        u64s(&mut b, self.rng_seed);
        u64s(&mut b, self.rng_stream);
        u64s(&mut b, self.rng_word_pos as u64);
        u64s(&mut b, (self.rng_word_pos >> 64) as u64);
        u64s(&mut b, self.dim as u64);
        u64s(&mut b, self.points.len() as u64);
        for p in &self.points {
            f64s(&mut b, &p.coords);
            u64s(&mut b, p.round as u64);
        }
        u64s(&mut b, self.progress.len() as u64);
        b.extend_from_slice(self.progress.as_bytes());
        b
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, CheckpointError> {
        let mut r = ByteReader::new(bytes);
        if r.take(4).map_err(|_| CheckpointError::Magic)? != MAGIC {
            return Err(CheckpointError::Magic);
        }
        let version = r.u32()?;
        if version != VERSION {
            return Err(CheckpointError::Version(version));
        }
        let iteration = r.u64()?;
        let round = r.u64()?;
        let phase_iter = r.u64()?;
        let flags = r.take(2)?;
        let (lr_halved, finished) = (flags[0] != 0, flags[1] != 0);
        let lr = r.f64()?;
        let n = r.u64()? as usize;
        if n > bytes.len() / 8 {
            return Err(CheckpointError::Corrupt(format!("parameter count {n} exceeds file size")));
        }
        let floats = |r: &mut ByteReader, k: usize| (0..k).map(|_| r.f64()).collect::<Result<Vec<_>, _>>();
        let params = floats(&mut r, n)?;
        let m = floats(&mut r, n)?;
        let v = floats(&mut r, n)?;
        let t = r.u64()?;
        let rng_seed = r.u64()?;
        let rng_stream = r.u64()?;
        let lo = r.u64()? as u128;
        let hi = r.u64()? as u128;
        let dim = r.u64()? as usize;
        let n_points = r.u64()? as usize;
        if dim == 0 || n_points > bytes.len() / (8 * (dim + 1)) {
            return Err(CheckpointError::Corrupt("point block does not fit the file".into()));
        }
        let mut points = Vec::with_capacity(n_points);
        for _ in 0..n_points {
            let coords = floats(&mut r, dim)?;
            let round = r.u64()? as usize;
            points.push(TrainingPoint { coords, round });
        }
        let len = r.u64()? as usize;
        let progress = String::from_utf8(r.take(len)?.to_vec())
            .map_err(|_| CheckpointError::Corrupt("progress block is not UTF-8".into()))?;
        if !r.is_done() {
            return Err(CheckpointError::Corrupt("trailing bytes".into()));
        }
        Ok(Checkpoint {
            iteration,
            round,
            phase_iter,
            lr_halved,
            finished,
            params,
            adam: Adam { lr, m, v, t },
            rng_seed,
            rng_stream,
            rng_word_pos: lo | (hi << 64),
            dim,
            points,
            progress,
        })
    }

    /// Writes through a temporary file and a rename.
    pub fn save(&self, path: &Path) -> Result<(), CheckpointError> {
        let io = |source| CheckpointError::Io {
            path: path.to_path_buf(),
            source,
        };
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            fs::create_dir_all(dir).map_err(io)?;
        }
        let tmp = path.with_extension("gpck.tmp");
        let mut f = fs::File::create(&tmp).map_err(io)?;
        f.write_all(&self.encode()).map_err(io)?;
        f.sync_all().map_err(io)?;
        fs::rename(&tmp, path).map_err(io)
    }

    pub fn load(path: &Path) -> Result<Self, CheckpointError> {
        let bytes = fs::read(path).map_err(|source| CheckpointError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::decode(&bytes)
    }
}
