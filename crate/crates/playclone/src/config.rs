//! Flat `key=value` run configuration.
//!
//! One setting per line, `#` starts a comment, keys carry a section prefix:
//!
//! ```text
//! seed=7
//! paths.root=data
//! scene.grasp_radius=0.05
//! collect.minutes=30
//! bc.layers=2
//! bc.width=128
//! lfp.steps=20000
//! lfp.reference_share=0.5
//! clone.minutes=1
//! eval.trials=50
//! sweep.kind=data_quantity
//! sweep.grid=0,2,5,10
//! sweep.seeds=1,2,3
//! ```
//!
//! [`RunConfig::to_text`] prints every key with its current value.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use playclone_core::benchmark::{ExperimentConfig, SweepKind, SweepSpec};
use playclone_core::pipeline::{Decode, TrainConfig};

pub const ROOT_ENV: &str = "PLAYCLONE_ROOT";

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("line {line}: {msg}")]
    Syntax { line: usize, msg: String },
    #[error("unknown key `{0}`")]
    UnknownKey(String),
    #[error("bad value for `{key}`: {value:?}")]
    BadValue { key: String, value: String },
    #[error("invalid configuration: {0}")]
    Invalid(String),
    #[error("cannot read config {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub seed: u64,
    pub root: PathBuf,
    /// Set from the command line; beats both `root` and the environment.
    pub root_flag: Option<PathBuf>,
    /// Relative paths resolve against `root`.
    pub checkpoints: PathBuf,
    pub reports: PathBuf,
    pub experiment: ExperimentConfig,
    pub sweep: SweepSpec,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 0,
            root: PathBuf::from("playclone-data"),
            root_flag: None,
            checkpoints: PathBuf::from("checkpoints"),
            reports: PathBuf::from("reports"),
            experiment: ExperimentConfig::default(),
            sweep: SweepSpec { kind: SweepKind::DataQuantity, grid: SweepKind::DataQuantity.default_grid(), seeds: vec![1, 2, 3] },
        }
    }
}

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, ConfigError> {
    value.parse().map_err(|_| ConfigError::BadValue { key: key.into(), value: value.into() })
}

fn parse_bool(key: &str, value: &str) -> Result<bool, ConfigError> {
    match value {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        _ => Err(ConfigError::BadValue { key: key.into(), value: value.into() }),
    }
}

fn parse_list<T: std::str::FromStr>(key: &str, value: &str) -> Result<Vec<T>, ConfigError> {
    value.split(',').map(|s| parse(key, s.trim())).collect()
}

fn set_train(cfg: &mut TrainConfig, key: &str, full: &str, value: &str) -> Result<(), ConfigError> {
    match key {
        "layers" => cfg.net.layers = parse(full, value)?,
        "width" => cfg.net.width = parse(full, value)?,
        "components" => cfg.net.components = parse(full, value)?,
        "bins" => cfg.net.bins = parse(full, value)?,
        "log_scale_floor" => cfg.net.log_scale_floor = parse(full, value)?,
        "batch" => cfg.batch_size = parse(full, value)?,
        "steps" => cfg.steps = parse(full, value)?,
        "lr" => cfg.adam.lr = parse(full, value)?,
        "beta1" => cfg.adam.beta1 = parse(full, value)?,
        "beta2" => cfg.adam.beta2 = parse(full, value)?,
        "eps" => cfg.adam.eps = parse(full, value)?,
        "clip_norm" => cfg.clip_norm = parse(full, value)?,
        "min_window" => cfg.min_window = parse(full, value)?,
        "max_window" => cfg.max_window = parse(full, value)?,
        "reference_share" => {
            cfg.reference_share = if value == "none" { None } else { Some(parse(full, value)?) };
        }
        _ => return Err(ConfigError::UnknownKey(full.into())),
    }
    Ok(())
}

fn train_text(out: &mut String, section: &str, c: &TrainConfig) {
    let n = &c.net;
    for (k, v) in [
        ("layers", n.layers.to_string()),
        ("width", n.width.to_string()),
        ("components", n.components.to_string()),
        ("bins", n.bins.to_string()),
        ("log_scale_floor", n.log_scale_floor.to_string()),
        ("batch", c.batch_size.to_string()),
        ("steps", c.steps.to_string()),
        ("lr", c.adam.lr.to_string()),
        ("beta1", c.adam.beta1.to_string()),
        ("beta2", c.adam.beta2.to_string()),
        ("eps", c.adam.eps.to_string()),
        ("clip_norm", c.clip_norm.to_string()),
        ("min_window", c.min_window.to_string()),
        ("max_window", c.max_window.to_string()),
        ("reference_share", c.reference_share.map_or("none".into(), |p| p.to_string())),
    ] {
        writeln!(out, "{section}.{k}={v}").unwrap();
    }
}

fn decode_parts(d: Decode) -> (bool, f64) {
    match d {
        Decode::Greedy => (true, 0.0),
        Decode::Sample { temperature } => (false, temperature),
    }
}

fn join<T: ToString>(xs: &[T]) -> String {
    xs.iter().map(ToString::to_string).collect::<Vec<_>>().join(",")
}

impl RunConfig {
    /// Applies one `key=value` setting.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        let e = &mut self.experiment;
        let bad = || ConfigError::BadValue { key: key.into(), value: value.into() };
        let (section, rest) = key.split_once('.').unwrap_or(("", key));
        match (section, rest) {
            ("", "seed") => self.seed = parse(key, value)?,
            ("paths", "root") => self.root = PathBuf::from(value),
            ("paths", "checkpoints") => self.checkpoints = PathBuf::from(value),
            ("paths", "reports") => self.reports = PathBuf::from(value),
            ("scene", k) => e.scene.set(k, parse(key, value)?).map_err(|_| ConfigError::UnknownKey(key.into()))?,
            ("oracle", "wander_prob") => e.oracle.wander_prob = parse(key, value)?,
            ("oracle", "pos_noise") => e.oracle.pos_noise = parse(key, value)?,
            ("oracle", "angle_noise") => e.oracle.angle_noise = parse(key, value)?,
            ("oracle", "tick_limit") => e.oracle.tick_limit = parse(key, value)?,
            ("oracle", "speed_min") => e.oracle.speed_range.0 = parse(key, value)?,
            ("oracle", "speed_max") => e.oracle.speed_range.1 = parse(key, value)?,
            ("collect", "minutes") => e.human_minutes = parse(key, value)?,
            ("collect", "episode_minutes") => e.human_episode_minutes = parse(key, value)?,
            ("bc", k) => set_train(&mut e.bc, k, key, value)?,
            ("lfp", k) => set_train(&mut e.lfp, k, key, value)?,
            ("clone", "episodes") => e.clone.episodes = parse(key, value)?,
            ("clone", "minutes") => e.clone.minutes = parse(key, value)?,
            ("clone", "lanes") => e.clone.lanes = parse(key, value)?,
            ("clone", "hours") => e.clone_hours = parse(key, value)?,
            ("clone", "greedy") => {
                e.clone.decode = if parse_bool(key, value)? { Decode::Greedy } else { Decode::CLONE_DEFAULT };
            }
            ("clone", "temperature") => e.clone.decode = Decode::Sample { temperature: parse(key, value)? },
            ("eval", "trials") => e.eval.trials_per_task = parse(key, value)?,
            ("eval", "greedy") => {
                e.eval.decode = if parse_bool(key, value)? { Decode::Greedy } else { Decode::EVAL_DEFAULT };
            }
            ("eval", "temperature") => e.eval.decode = Decode::Sample { temperature: parse(key, value)? },
            ("eval", "budget") => e.eval.budget = if value == "none" { None } else { Some(parse(key, value)?) },
            ("sweep", "kind") => self.sweep.kind = SweepKind::from_name(value).ok_or_else(bad)?,
            ("sweep", "grid") => self.sweep.grid = parse_list(key, value)?,
            ("sweep", "seeds") => self.sweep.seeds = parse_list(key, value)?,
            _ => return Err(ConfigError::UnknownKey(key.into())),
        }
        Ok(())
    }

    pub fn parse_text(&mut self, text: &str) -> Result<(), ConfigError> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| ConfigError::Syntax { line: i + 1, msg: format!("expected key=value, got {line:?}") })?;
            self.set(k.trim(), v.trim())?;
        }
        Ok(())
    }

    pub fn from_file(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.into(), source })?;
        let mut c = RunConfig::default();
        c.parse_text(&text)?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let e = &self.experiment;
        let inv = |m: String| ConfigError::Invalid(m);
        e.scene.validate().map_err(|x| inv(x.to_string()))?;
        e.bc.validate().map_err(|x| inv(format!("bc: {x}")))?;
        e.lfp.validate().map_err(|x| inv(format!("lfp: {x}")))?;
        e.clone.validate().map_err(|x| inv(format!("clone: {x}")))?;
        if !(e.human_minutes > 0.0 && e.human_episode_minutes > 0.0) {
            return Err(inv("collect durations must be positive".into()));
        }
        if !(e.clone_hours >= 0.0) {
            return Err(inv("clone.hours must be non-negative".into()));
        }
        if e.eval.trials_per_task == 0 {
            return Err(inv("eval.trials must be at least 1".into()));
        }
        let (lo, hi) = e.oracle.speed_range;
        if !(lo > 0.0 && hi >= lo) {
            return Err(inv("oracle speed range must satisfy 0 < min <= max".into()));
        }
        self.sweep.validate().map_err(|x| inv(format!("sweep: {x}")))?;
        Ok(())
    }

    /// The command-line root, else `PLAYCLONE_ROOT`, else `root`.
    pub fn data_root(&self) -> PathBuf {
        if let Some(r) = &self.root_flag {
            return r.clone();
        }
        std::env::var_os(ROOT_ENV).map(PathBuf::from).unwrap_or_else(|| self.root.clone())
    }

    pub fn checkpoint_dir(&self) -> PathBuf {
        self.data_root().join(&self.checkpoints)
    }

    pub fn report_dir(&self) -> PathBuf {
        self.data_root().join(&self.reports)
    }

    /// Every key with its value, in a form [`parse_text`](Self::parse_text) accepts.
    pub fn to_text(&self) -> String {
        let e = &self.experiment;
        let mut out = String::new();
        writeln!(out, "seed={}", self.seed).unwrap();
        writeln!(out, "paths.root={}", self.root.display()).unwrap();
        writeln!(out, "paths.checkpoints={}", self.checkpoints.display()).unwrap();
        writeln!(out, "paths.reports={}", self.reports.display()).unwrap();
        for (k, v) in e.scene.entries() {
            writeln!(out, "scene.{k}={v}").unwrap();
        }
        writeln!(out, "oracle.wander_prob={}", e.oracle.wander_prob).unwrap();
        writeln!(out, "oracle.pos_noise={}", e.oracle.pos_noise).unwrap();
        writeln!(out, "oracle.angle_noise={}", e.oracle.angle_noise).unwrap();
        writeln!(out, "oracle.tick_limit={}", e.oracle.tick_limit).unwrap();
        writeln!(out, "oracle.speed_min={}", e.oracle.speed_range.0).unwrap();
        writeln!(out, "oracle.speed_max={}", e.oracle.speed_range.1).unwrap();
        writeln!(out, "collect.minutes={}", e.human_minutes).unwrap();
        writeln!(out, "collect.episode_minutes={}", e.human_episode_minutes).unwrap();
        train_text(&mut out, "bc", &e.bc);
        train_text(&mut out, "lfp", &e.lfp);
        writeln!(out, "clone.episodes={}", e.clone.episodes).unwrap();
        writeln!(out, "clone.minutes={}", e.clone.minutes).unwrap();
        writeln!(out, "clone.lanes={}", e.clone.lanes).unwrap();
        writeln!(out, "clone.hours={}", e.clone_hours).unwrap();
        let (g, t) = decode_parts(e.clone.decode);
        writeln!(out, "clone.greedy={g}").unwrap();
        if !g {
            writeln!(out, "clone.temperature={t}").unwrap();
        }
        writeln!(out, "eval.trials={}", e.eval.trials_per_task).unwrap();
        let (g, t) = decode_parts(e.eval.decode);
        writeln!(out, "eval.greedy={g}").unwrap();
        if !g {
            writeln!(out, "eval.temperature={t}").unwrap();
        }
        writeln!(out, "eval.budget={}", e.eval.budget.map_or("none".into(), |b| b.to_string())).unwrap();
        writeln!(out, "sweep.kind={}", self.sweep.kind.name()).unwrap();
        writeln!(out, "sweep.grid={}", join(&self.sweep.grid)).unwrap();
        writeln!(out, "sweep.seeds={}", join(&self.sweep.seeds)).unwrap();
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn text_round_trip() {
        let mut c = RunConfig::default();
        c.parse_text("seed=9\n# comment\nbc.width=64  # trailing\nlfp.reference_share=0.25\nsweep.grid=0,1.5\neval.greedy=true\nscene.grasp_radius=0.07\n").unwrap();
        assert_eq!(c.seed, 9);
        assert_eq!(c.experiment.bc.net.width, 64);
        assert_eq!(c.experiment.lfp.reference_share, Some(0.25));
        assert_eq!(c.sweep.grid, vec![0.0, 1.5]);
        assert_eq!(c.experiment.eval.decode, Decode::Greedy);
        let mut d = RunConfig::default();
        d.parse_text(&c.to_text()).unwrap();
        assert_eq!(c, d);
    }

    #[test]
    fn errors_are_specific() {
        let mut c = RunConfig::default();
        assert!(matches!(c.parse_text("nonsense"), Err(ConfigError::Syntax { line: 1, .. })));
        assert!(matches!(c.set("bc.depth", "3"), Err(ConfigError::UnknownKey(_))));
        assert!(matches!(c.set("scene.nope", "3"), Err(ConfigError::UnknownKey(_))));
        assert!(matches!(c.set("bc.width", "wide"), Err(ConfigError::BadValue { .. })));
        c.set("bc.batch", "0").unwrap();
        assert!(matches!(c.validate(), Err(ConfigError::Invalid(_))));
    }
}
