//! Episodes, datasets, normalization statistics, action quantization and
//! hindsight window sampling.

mod episode;
mod quantize;
mod stats;
mod window;

pub use episode::{Dataset, Episode, EpisodeHeader, Frame, SchemaError, Source, SourceTotals, EPISODE_FORMAT_VERSION};
pub use quantize::{ActionQuantizer, DEFAULT_BINS};
pub use stats::{compute_norm_stats, NormStats, StatsError, STATS_DIM};
pub use window::{sample_window, window_at, Window, WindowError, WindowSampler, MAX_WINDOW, MIN_WINDOW};
