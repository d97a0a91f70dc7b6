//! Binary policy checkpoints.
//!
//! Layout, all little-endian:
//!
//! ```text
//! "PLCK"  u32 version
//! u32 input_width, layers, width, components, action_dims, bins  f64 log_scale_floor
//! f64 x 19 obs_mean   f64 x 19 obs_scale   f64 x 8 action low   f64 x 8 action high
//! u64 parameter count, then that many f64 parameters
//! ```
//!
//! A `<name>.txt` sidecar holds `key=value` lines describing the training run.

use std::fs;
use std::io::{self, Read, Write};
use std::path::{Path, PathBuf};

use playclone_core::pipeline::{Policy, TrainConfig};
use playclone_core::playdata::ActionQuantizer;
use playclone_core::seqnet::{NetSpec, PolicyParams};
use playclone_core::{ACT_DIM, OBS_DIM};

pub const MAGIC: &[u8; 4] = b"PLCK";
pub const VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum CheckpointError {
    #[error("io: {0}")]
    Io(#[from] io::Error),
    #[error("not a checkpoint (bad magic)")]
    Magic,
    #[error("unsupported checkpoint version {0}")]
    Version(u32),
    #[error("invalid checkpoint: {0}")]
    Invalid(String),
}

fn put_u32(w: &mut Vec<u8>, x: u32) {
    w.extend_from_slice(&x.to_le_bytes());
}

fn put_f64s(w: &mut Vec<u8>, xs: &[f64]) {
    for x in xs {
        w.extend_from_slice(&x.to_le_bytes());
    }
}

pub fn encode(p: &Policy) -> Vec<u8> {
    let s = p.params.spec;
    let mut w = Vec::with_capacity(64 + 8 * (p.params.len() + 54));
    w.extend_from_slice(MAGIC);
    put_u32(&mut w, VERSION);
    for x in [s.input_width, s.layers, s.width, s.components, s.action_dims, s.bins] {
        put_u32(&mut w, x as u32);
    }
    put_f64s(&mut w, &[s.log_scale_floor]);
    put_f64s(&mut w, &p.obs_mean);
    put_f64s(&mut w, &p.obs_scale);
    put_f64s(&mut w, &p.quantizer.low);
    put_f64s(&mut w, &p.quantizer.high);
    w.extend_from_slice(&(p.params.len() as u64).to_le_bytes());
    put_f64s(&mut w, &p.params.values);
    w
}

struct Cursor<'a>(&'a [u8]);

impl Cursor<'_> {
    fn take<const N: usize>(&mut self) -> Result<[u8; N], CheckpointError> {
        if self.0.len() < N {
            return Err(CheckpointError::Invalid("file ends early".into()));
        }
        let (head, rest) = self.0.split_at(N);
        self.0 = rest;
        Ok(head.try_into().expect("split at N"))
    }

    fn u32(&mut self) -> Result<u32, CheckpointError> {
        Ok(u32::from_le_bytes(self.take()?))
    }

    fn f64(&mut self) -> Result<f64, CheckpointError> {
        Ok(f64::from_le_bytes(self.take()?))
    }

    fn array<const N: usize>(&mut self) -> Result<[f64; N], CheckpointError> {
        let mut a = [0.0; N];
        for x in &mut a {
            *x = self.f64()?;
        }
        Ok(a)
    }
}

pub fn decode(bytes: &[u8]) -> Result<Policy, CheckpointError> {
    let mut c = Cursor(bytes);
    if &c.take::<4>()? != MAGIC {
        return Err(CheckpointError::Magic);
    }
    let version = c.u32()?;
    if version != VERSION {
        return Err(CheckpointError::Version(version));
    }
    let mut dims = [0usize; 6];
    for d in &mut dims {
        *d = c.u32()? as usize;
    }
    let spec = NetSpec {
        input_width: dims[0],
        layers: dims[1],
        width: dims[2],
        components: dims[3],
        action_dims: dims[4],
        bins: dims[5],
        log_scale_floor: c.f64()?,
    };
    spec.validate().map_err(|e| CheckpointError::Invalid(e.to_string()))?;
    if spec.action_dims != ACT_DIM || (spec.input_width != OBS_DIM && spec.input_width != 2 * OBS_DIM) {
        return Err(CheckpointError::Invalid(format!("input width {} / action dims {} do not fit the playroom", spec.input_width, spec.action_dims)));
    }
    let obs_mean = c.array::<OBS_DIM>()?;
    let obs_scale = c.array::<OBS_DIM>()?;
    let low = c.array::<ACT_DIM>()?;
    let high = c.array::<ACT_DIM>()?;
    let count = u64::from_le_bytes(c.take()?) as usize;
    if count != spec.param_count() {
        return Err(CheckpointError::Invalid(format!("parameter count {count}, spec needs {}", spec.param_count())));
    }
    if c.0.len() != 8 * count {
        return Err(CheckpointError::Invalid(format!("{} payload bytes for {count} parameters", c.0.len())));
    }
    let values = c.0.chunks_exact(8).map(|b| f64::from_le_bytes(b.try_into().expect("8 bytes"))).collect();
    let params = PolicyParams::from_values(spec, values).map_err(|e| CheckpointError::Invalid(e.to_string()))?;
    if !params.all_finite() {
        return Err(CheckpointError::Invalid("non-finite parameter".into()));
    }
    Ok(Policy { params, obs_mean, obs_scale, quantizer: ActionQuantizer::new(low, high, spec.bins) })
}

pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".txt");
    PathBuf::from(s)
}

/// Training-run description written next to a checkpoint.
pub fn sidecar_text(kind: &str, cfg: &TrainConfig, data_frames: usize, final_loss: Option<f64>) -> String {
    let n = &cfg.net;
    let mut out = String::new();
    let mut kv = |k: &str, v: String| out.push_str(&format!("{k}={v}\n"));
    kv("kind", kind.into());
    kv("layers", n.layers.to_string());
    kv("width", n.width.to_string());
    kv("components", n.components.to_string());
    kv("bins", n.bins.to_string());
    kv("log_scale_floor", n.log_scale_floor.to_string());
    kv("batch", cfg.batch_size.to_string());
    kv("steps", cfg.steps.to_string());
    kv("lr", cfg.adam.lr.to_string());
    kv("beta1", cfg.adam.beta1.to_string());
    kv("beta2", cfg.adam.beta2.to_string());
    kv("eps", cfg.adam.eps.to_string());
    kv("clip_norm", cfg.clip_norm.to_string());
    kv("min_window", cfg.min_window.to_string());
    kv("max_window", cfg.max_window.to_string());
    kv("reference_share", cfg.reference_share.map_or("none".into(), |p| p.to_string()));
    kv("seed", cfg.seed.to_string());
    kv("data_frames", data_frames.to_string());
    kv("final_loss", final_loss.map_or("none".into(), |l| format!("{l:?}")));
    out
}

pub fn save(path: &Path, p: &Policy, sidecar: &str) -> io::Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    let tmp = path.with_extension("tmp");
    fs::File::create(&tmp)?.write_all(&encode(p))?;
    fs::rename(&tmp, path)?;
    fs::write(sidecar_path(path), sidecar)
}

pub fn load(path: &Path) -> Result<Policy, CheckpointError> {
    let mut bytes = Vec::new();
    fs::File::open(path)?.read_to_end(&mut bytes)?;
    decode(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use playclone_core::playdata::NormStats;
    use playclone_core::rng::rng_from_seed;

    fn policy() -> Policy {
        let spec = NetSpec::new(2 * OBS_DIM).with_shape(1, 4);
        let params = PolicyParams::init(spec, &mut rng_from_seed(3)).unwrap();
        let stats = NormStats { mean: [0.5; 27], std: [0.25; 27], min: [-1.0; 27], max: [1.0; 27], count: 2 };
        Policy::from_stats(params, &stats)
    }

    #[test]
    fn round_trip_and_corruption() {
        let p = policy();
        let b = encode(&p);
        assert_eq!(decode(&b).unwrap(), p);
        let mut bad = b.clone();
        bad[0] = b'X';
        assert!(matches!(decode(&bad), Err(CheckpointError::Magic)));
        let mut v2 = b.clone();
        v2[4] = 2;
        assert!(matches!(decode(&v2), Err(CheckpointError::Version(2))));
        assert!(matches!(decode(&b[..b.len() - 3]), Err(CheckpointError::Invalid(_))));
    }
}
