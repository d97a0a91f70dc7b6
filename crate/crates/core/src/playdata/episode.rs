use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use crate::scene::{SceneConfig, ACT_DIM, OBS_DIM};

pub const EPISODE_FORMAT_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Source {
    Human,
    Oracle,
    Cloned,
    Random,
}

impl Source {
    pub const ALL: [Source; 4] = [Source::Human, Source::Oracle, Source::Cloned, Source::Random];

    pub fn as_str(self) -> &'static str {
        match self {
            Source::Human => "human",
            Source::Oracle => "oracle",
            Source::Cloned => "cloned",
            Source::Random => "random",
        }
    }

    /// Human and oracle play both fill the "human play" role of the pipeline.
    pub fn is_reference_play(self) -> bool {
        matches!(self, Source::Human | Source::Oracle)
    }
}

impl fmt::Display for Source {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Source {
    type Err = SchemaError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Source::ALL
            .iter()
            .copied()
            .find(|x| x.as_str() == s)
            .ok_or_else(|| SchemaError::BadSource(String::from(s)))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EpisodeHeader {
    pub version: u32,
    pub hz: u32,
    pub obs_dim: u32,
    pub act_dim: u32,
    pub source: Source,
    pub seed: u64,
    /// Unix seconds; generators leave it at 0 so content stays reproducible.
    pub created: u64,
    /// Set when recording ended because the teleop client disconnected.
    pub interrupted: bool,
}

impl EpisodeHeader {
    pub fn new(source: Source, seed: u64) -> Self {
        EpisodeHeader {
            version: EPISODE_FORMAT_VERSION,
            hz: 30,
            obs_dim: OBS_DIM as u32,
            act_dim: ACT_DIM as u32,
            source,
            seed,
            created: 0,
            interrupted: false,
        }
    }
}

/// Observation at `tick` and the action applied from it.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Frame {
    pub tick: u64,
    pub obs: [f64; OBS_DIM],
    pub act: [f64; ACT_DIM],
}

#[derive(Clone, Debug, PartialEq)]
pub struct Episode {
    pub header: EpisodeHeader,
    pub frames: Vec<Frame>,
}

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum SchemaError {
    #[error("unknown source tag `{0}`")]
    BadSource(String),
    #[error("unsupported episode format version {0}")]
    Version(u32),
    #[error("header declares {field} = {got}, expected {expected}")]
    HeaderField { field: &'static str, got: u32, expected: u32 },
    #[error("frame {index} has tick {tick}, expected {index}")]
    TickGap { index: usize, tick: u64 },
    #[error("frame {index} has a non-finite value at column {column}")]
    NonFinite { index: usize, column: usize },
    #[error("frame {index} observation coordinate {coord} = {value} outside scene range [{low}, {high}]")]
    OutOfRange { index: usize, coord: usize, value: f64, low: f64, high: f64 },
    #[error("frame {index} action coordinate {coord} = {value} exceeds bound {bound}")]
    ActionBound { index: usize, coord: usize, value: f64, bound: f64 },
}

impl Episode {
    pub fn new(header: EpisodeHeader) -> Self {
        Episode { header, frames: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn source(&self) -> Source {
        self.header.source
    }

    pub fn push(&mut self, obs: [f64; OBS_DIM], act: [f64; ACT_DIM]) {
        let tick = self.frames.len() as u64;
        self.frames.push(Frame { tick, obs, act });
    }

    /// Structural checks: header widths, consecutive ticks, finite values.
    pub fn validate(&self) -> Result<(), SchemaError> {
        let h = &self.header;
        if h.version != EPISODE_FORMAT_VERSION {
            return Err(SchemaError::Version(h.version));
        }
        if h.obs_dim != OBS_DIM as u32 {
            return Err(SchemaError::HeaderField { field: "obs_dim", got: h.obs_dim, expected: OBS_DIM as u32 });
        }
        if h.act_dim != ACT_DIM as u32 {
            return Err(SchemaError::HeaderField { field: "act_dim", got: h.act_dim, expected: ACT_DIM as u32 });
        }
        if h.hz != 30 {
            return Err(SchemaError::HeaderField { field: "hz", got: h.hz, expected: 30 });
        }
        for (index, f) in self.frames.iter().enumerate() {
            if f.tick != index as u64 {
                return Err(SchemaError::TickGap { index, tick: f.tick });
            }
            let bad = f.obs.iter().chain(f.act.iter()).position(|x| !x.is_finite());
            if let Some(column) = bad {
                return Err(SchemaError::NonFinite { index, column });
            }
        }
        Ok(())
    }

    /// [`validate`](Self::validate) plus scene range checks on every frame.
    pub fn validate_with_scene(&self, cfg: &SceneConfig) -> Result<(), SchemaError> {
        self.validate()?;
        let bounds = cfg.obs_bounds();
        let abounds = cfg.action_bounds();
        for (index, f) in self.frames.iter().enumerate() {
            for (coord, (&value, &(low, high))) in f.obs.iter().zip(bounds.iter()).enumerate() {
                if value < low || value > high {
                    return Err(SchemaError::OutOfRange { index, coord, value, low, high });
                }
            }
            for (coord, (&value, &bound)) in f.act.iter().zip(abounds.iter()).enumerate() {
                if libm::fabs(value) > bound {
                    return Err(SchemaError::ActionBound { index, coord, value, bound });
                }
            }
        }
        Ok(())
    }
}

/// Frame totals per source tag.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct SourceTotals {
    pub human: usize,
    pub oracle: usize,
    pub cloned: usize,
    pub random: usize,
}

impl SourceTotals {
    pub fn add(&mut self, source: Source, frames: usize) {
        match source {
            Source::Human => self.human += frames,
            Source::Oracle => self.oracle += frames,
            Source::Cloned => self.cloned += frames,
            Source::Random => self.random += frames,
        }
    }

    pub fn get(&self, source: Source) -> usize {
        match source {
            Source::Human => self.human,
            Source::Oracle => self.oracle,
            Source::Cloned => self.cloned,
            Source::Random => self.random,
        }
    }

    pub fn total(&self) -> usize {
        self.human + self.oracle + self.cloned + self.random
    }
}

/// Ordered, in-memory collection of episodes.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Dataset {
    pub episodes: Vec<Episode>,
}

impl Dataset {
    pub fn new(episodes: Vec<Episode>) -> Self {
        Dataset { episodes }
    }

    pub fn frame_count(&self) -> usize {
        self.episodes.iter().map(Episode::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.frame_count() == 0
    }

    pub fn frames(&self) -> impl Iterator<Item = &Frame> + Clone + '_ {
        self.episodes.iter().flat_map(|e| e.frames.iter())
    }

    pub fn source_totals(&self) -> SourceTotals {
        let mut t = SourceTotals::default();
        for e in &self.episodes {
            t.add(e.source(), e.len());
        }
        t
    }

    /// Episodes whose source is in `keep`.
    pub fn filter_sources(&self, keep: &[Source]) -> Dataset {
        Dataset::new(self.episodes.iter().filter(|e| keep.contains(&e.source())).cloned().collect())
    }

    /// Concatenates datasets in order; returns the merged set and its per-source
    /// frame totals.
    pub fn merge(parts: &[&Dataset]) -> (Dataset, SourceTotals) {
        let mut episodes = Vec::with_capacity(parts.iter().map(|d| d.episodes.len()).sum());
        for d in parts {
            episodes.extend(d.episodes.iter().cloned());
        }
        let merged = Dataset::new(episodes);
        let totals = merged.source_totals();
        (merged, totals)
    }

    /// Frame at a flat index across all episodes.
    pub fn frame_at(&self, mut index: usize) -> Option<&Frame> {
        for e in &self.episodes {
            if index < e.len() {
                return Some(&e.frames[index]);
            }
            index -= e.len();
        }
        None
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ep(source: Source, n: usize) -> Episode {
        let mut e = Episode::new(EpisodeHeader::new(source, 1));
        for i in 0..n {
            let mut obs = [0.0; OBS_DIM];
            obs[0] = i as f64;
            e.push(obs, [0.0; ACT_DIM]);
        }
        e
    }

    #[test]
    fn validate_catches_tick_gaps_and_nan() {
        let mut e = ep(Source::Oracle, 5);
        e.validate().unwrap();
        e.frames[3].tick = 7;
        assert_eq!(e.validate(), Err(SchemaError::TickGap { index: 3, tick: 7 }));
        let mut e = ep(Source::Oracle, 5);
        e.frames[2].act[4] = f64::NAN;
        assert_eq!(e.validate(), Err(SchemaError::NonFinite { index: 2, column: OBS_DIM + 4 }));
        let mut e = ep(Source::Oracle, 1);
        e.header.version = 9;
        assert_eq!(e.validate(), Err(SchemaError::Version(9)));
    }

    #[test]
    fn merge_sums_sources_and_keeps_order() {
        // 32 human-role minutes and 10 cloned hours at 30 Hz.
        let human = Dataset::new(vec![ep(Source::Oracle, 57_600)]);
        let cloned = Dataset::new((0..600).map(|_| ep(Source::Cloned, 1_800)).collect());
        let (m, totals) = Dataset::merge(&[&human, &cloned]);
        assert_eq!(totals.oracle, 57_600);
        assert_eq!(totals.cloned, 1_080_000);
        assert_eq!(totals.total(), 57_600 + 1_080_000);
        assert_eq!(m.frame_count(), totals.total());
        assert_eq!(m.episodes[0].source(), Source::Oracle);
        assert!(m.episodes[1..].iter().all(|e| e.source() == Source::Cloned));
    }

    #[test]
    fn source_tags_parse() {
        for s in Source::ALL {
            assert_eq!(s.as_str().parse::<Source>().unwrap(), s);
        }
        assert!("robot".parse::<Source>().is_err());
    }

    #[test]
    fn frame_at_walks_episodes() {
        let d = Dataset::new(vec![ep(Source::Oracle, 3), ep(Source::Cloned, 2)]);
        assert_eq!(d.frame_at(4).unwrap().obs[0], 1.0);
        assert!(d.frame_at(5).is_none());
    }
}
