//! `.play` episode files.
//!
//! ```text
//! #play v1 hz=30 obs_dim=19 act_dim=8 source=oracle seed=7 created=0 interrupted=0
//! 0 <19 obs values> <8 act values>
//! ...
//! #end frames=1800 checksum=1a2b3c4d
//! ```
//!
//! Values use Rust's shortest round-trip float formatting, so a load of a
//! save is bit-exact. The checksum is the CRC-32 of every frame line,
//! newlines included.

use std::fmt::Write as _;
use std::fs;
use std::io::{self, BufRead, BufWriter, Write};
use std::path::Path;

use playclone_core::playdata::{Episode, EpisodeHeader, Frame, SchemaError, Source, EPISODE_FORMAT_VERSION};
use playclone_core::{ACT_DIM, OBS_DIM};

#[derive(Debug, thiserror::Error)]
pub enum PlayError {
    #[error("io: {0}")]
    Io(#[from] io::Error),
    #[error("unsupported format version {0}")]
    Version(String),
    #[error("line {line}: {msg}")]
    Malformed { line: usize, msg: String },
    #[error("truncated file: {0}")]
    Truncated(String),
    #[error("checksum mismatch: footer says {expected:08x}, frames hash to {actual:08x}")]
    Checksum { expected: u32, actual: u32 },
    #[error(transparent)]
    Schema(#[from] SchemaError),
}

impl PlayError {
    /// Corruption or schema problems, as opposed to IO failures.
    pub fn is_schema(&self) -> bool {
        !matches!(self, PlayError::Io(_))
    }
}

pub fn header_line(h: &EpisodeHeader) -> String {
    format!(
        "#play v{} hz={} obs_dim={} act_dim={} source={} seed={} created={} interrupted={}",
        h.version, h.hz, h.obs_dim, h.act_dim, h.source, h.seed, h.created, h.interrupted as u8
    )
}

pub fn frame_line(f: &Frame, out: &mut String) {
    write!(out, "{}", f.tick).unwrap();
    for v in f.obs.iter().chain(&f.act) {
        write!(out, " {v:?}").unwrap();
    }
    out.push('\n');
}

pub fn write_episode<W: Write>(e: &Episode, w: W) -> io::Result<()> {
    let mut w = BufWriter::new(w);
    writeln!(w, "{}", header_line(&e.header))?;
    let mut crc = crc32fast::Hasher::new();
    let mut line = String::with_capacity(512);
    for f in &e.frames {
        line.clear();
        frame_line(f, &mut line);
        crc.update(line.as_bytes());
        w.write_all(line.as_bytes())?;
    }
    writeln!(w, "#end frames={} checksum={:08x}", e.frames.len(), crc.finalize())?;
    w.flush()
}

/// Writes through a temporary file and renames, so readers never see a
/// partial episode.
pub fn save_episode(path: &Path, e: &Episode) -> Result<(), PlayError> {
    let tmp = path.with_extension("play.tmp");
    write_episode(e, fs::File::create(&tmp)?)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

fn field<'a>(line: usize, tok: Option<&'a str>, key: &str) -> Result<&'a str, PlayError> {
    let tok = tok.ok_or_else(|| PlayError::Malformed { line, msg: format!("missing header field {key}") })?;
    tok.strip_prefix(key)
        .and_then(|r| r.strip_prefix('='))
        .ok_or_else(|| PlayError::Malformed { line, msg: format!("expected {key}=..., found {tok:?}") })
}

fn num<T: std::str::FromStr>(line: usize, s: &str, what: &str) -> Result<T, PlayError> {
    s.parse().map_err(|_| PlayError::Malformed { line, msg: format!("bad {what} {s:?}") })
}

pub fn parse_header(line: &str) -> Result<EpisodeHeader, PlayError> {
    let mut it = line.split_ascii_whitespace();
    if it.next() != Some("#play") {
        return Err(PlayError::Malformed { line: 1, msg: "not a .play file".into() });
    }
    let v = it.next().unwrap_or("");
    let version: u32 = v.strip_prefix('v').and_then(|s| s.parse().ok()).ok_or_else(|| PlayError::Version(v.to_string()))?;
    if version != EPISODE_FORMAT_VERSION {
        return Err(PlayError::Version(v.to_string()));
    }
    let hz = num(1, field(1, it.next(), "hz")?, "hz")?;
    let obs_dim = num(1, field(1, it.next(), "obs_dim")?, "obs_dim")?;
    let act_dim = num(1, field(1, it.next(), "act_dim")?, "act_dim")?;
    let source: Source = field(1, it.next(), "source")?.parse()?;
    let seed = num(1, field(1, it.next(), "seed")?, "seed")?;
    let created = num(1, field(1, it.next(), "created")?, "created")?;
    let interrupted = match field(1, it.next(), "interrupted")? {
        "0" => false,
        "1" => true,
        s => return Err(PlayError::Malformed { line: 1, msg: format!("bad interrupted flag {s:?}") }),
    };
    Ok(EpisodeHeader { version, hz, obs_dim, act_dim, source, seed, created, interrupted })
}

fn parse_frame(line_no: usize, line: &str) -> Result<Frame, PlayError> {
    let mut it = line.split_ascii_whitespace();
    let tick = num(line_no, it.next().unwrap_or(""), "tick")?;
    let mut obs = [0.0; OBS_DIM];
    let mut act = [0.0; ACT_DIM];
    for slot in obs.iter_mut().chain(act.iter_mut()) {
        let tok = it.next().ok_or_else(|| PlayError::Malformed { line: line_no, msg: "too few values".into() })?;
        *slot = num(line_no, tok, "value")?;
    }
    if it.next().is_some() {
        return Err(PlayError::Malformed { line: line_no, msg: "too many values".into() });
    }
    Ok(Frame { tick, obs, act })
}

pub fn read_episode<R: BufRead>(r: R) -> Result<Episode, PlayError> {
    let mut lines = r.lines();
    let first = lines.next().ok_or_else(|| PlayError::Truncated("empty file".into()))??;
    let header = parse_header(&first)?;
    if header.obs_dim as usize != OBS_DIM {
        return Err(SchemaError::HeaderField { field: "obs_dim", got: header.obs_dim, expected: OBS_DIM as u32 }.into());
    }
    if header.act_dim as usize != ACT_DIM {
        return Err(SchemaError::HeaderField { field: "act_dim", got: header.act_dim, expected: ACT_DIM as u32 }.into());
    }
    let mut e = Episode::new(header);
    let mut crc = crc32fast::Hasher::new();
    let mut line_no = 1;
    for line in lines {
        let line = line?;
        line_no += 1;
        if let Some(rest) = line.strip_prefix("#end") {
            let mut it = rest.split_ascii_whitespace();
            let frames: usize = num(line_no, field(line_no, it.next(), "frames")?, "frame count")?;
            let sum = field(line_no, it.next(), "checksum")?;
            let expected = u32::from_str_radix(sum, 16).map_err(|_| PlayError::Malformed { line: line_no, msg: format!("bad checksum {sum:?}") })?;
            if frames != e.frames.len() {
                return Err(PlayError::Truncated(format!("footer declares {frames} frames, file has {}", e.frames.len())));
            }
            let actual = crc.finalize();
            if actual != expected {
                return Err(PlayError::Checksum { expected, actual });
            }
            e.validate()?;
            return Ok(e);
        }
        crc.update(line.as_bytes());
        crc.update(b"\n");
        e.frames.push(parse_frame(line_no, &line)?);
    }
    Err(PlayError::Truncated(format!("no #end footer after {} frames", e.frames.len())))
}

pub fn load_episode(path: &Path) -> Result<Episode, PlayError> {
    read_episode(io::BufReader::new(fs::File::open(path)?))
}

/// Reads only the header line.
pub fn peek_header(path: &Path) -> Result<EpisodeHeader, PlayError> {
    let mut first = String::new();
    io::BufReader::new(fs::File::open(path)?).read_line(&mut first)?;
    parse_header(first.trim_end())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Episode {
        let mut e = Episode::new(EpisodeHeader::new(Source::Cloned, 42));
        for t in 0..3 {
            let mut obs = [0.1 * t as f64; OBS_DIM];
            obs[0] = -1.0 / 3.0;
            obs[1] = 1e-300;
            e.push(obs, [f64::MIN_POSITIVE; ACT_DIM]);
        }
        e
    }

    fn bytes(e: &Episode) -> Vec<u8> {
        let mut v = Vec::new();
        write_episode(e, &mut v).unwrap();
        v
    }

    #[test]
    fn round_trip_is_exact() {
        let e = sample();
        assert_eq!(read_episode(&bytes(&e)[..]).unwrap(), e);
    }

    #[test]
    fn corruption_kinds_are_distinct() {
        let e = sample();
        let text = String::from_utf8(bytes(&e)).unwrap();
        let v2 = text.replacen("#play v1", "#play v2", 1);
        assert!(matches!(read_episode(v2.as_bytes()), Err(PlayError::Version(_))));
        let cut: String = text.lines().take(3).map(|l| format!("{l}\n")).collect();
        assert!(matches!(read_episode(cut.as_bytes()), Err(PlayError::Truncated(_))));
        let flipped = text.replacen("0.1 ", "0.2 ", 1);
        assert!(matches!(read_episode(flipped.as_bytes()), Err(PlayError::Checksum { .. })));
    }
}
