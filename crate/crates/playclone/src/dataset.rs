//! Dataset directories: `manifest.txt` plus the episode files it lists.
//!
//! ```text
//! # playclone manifest v1
//! ep_00000.play 1800 oracle
//! ../human/ep_00003.play 2711 human
//! ```
//!
//! Paths are relative to the manifest's directory, so a merged dataset can
//! reference the episodes of its inputs without copying them.

use std::collections::HashSet;
use std::fs;
use std::io::{self, Write};
use std::path::{Component, Path, PathBuf};

use playclone_core::playdata::{Dataset, Episode, Source, SourceTotals};

use crate::play::{load_episode, peek_header, save_episode, PlayError};

pub const MANIFEST: &str = "manifest.txt";
const MANIFEST_HEADER: &str = "# playclone manifest v1";

#[derive(Debug, thiserror::Error)]
pub enum DatasetError {
    #[error("io on {path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("no dataset at {0} (missing {MANIFEST})")]
    Missing(PathBuf),
    #[error("{path}: {source}")]
    Episode { path: PathBuf, source: PlayError },
    #[error("{path} line {line}: {msg}")]
    Manifest { path: PathBuf, line: usize, msg: String },
    #[error("manifest says {path} has {listed} frames of {listed_source}, file has {actual} of {actual_source}")]
    Mismatch { path: PathBuf, listed: usize, listed_source: Source, actual: usize, actual_source: Source },
    #[error("episode {0} appears more than once")]
    Duplicate(PathBuf),
}

impl DatasetError {
    pub fn is_missing(&self) -> bool {
        match self {
            DatasetError::Missing(_) => true,
            DatasetError::Io { source, .. } => source.kind() == io::ErrorKind::NotFound,
            DatasetError::Episode { source: PlayError::Io(e), .. } => e.kind() == io::ErrorKind::NotFound,
            _ => false,
        }
    }
}

/// One manifest line.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Entry {
    pub path: PathBuf,
    pub frames: usize,
    pub source: Source,
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> DatasetError + '_ {
    move |source| DatasetError::Io { path: path.to_path_buf(), source }
}

pub fn read_manifest(dir: &Path) -> Result<Vec<Entry>, DatasetError> {
    let path = dir.join(MANIFEST);
    let text = match fs::read_to_string(&path) {
        Ok(t) => t,
        Err(e) if e.kind() == io::ErrorKind::NotFound => return Err(DatasetError::Missing(dir.to_path_buf())),
        Err(e) => return Err(io_err(&path)(e)),
    };
    let bad = |line: usize, msg: String| DatasetError::Manifest { path: path.clone(), line, msg };
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, l)) if l.trim_end() == MANIFEST_HEADER => {}
        _ => return Err(bad(1, format!("expected {MANIFEST_HEADER:?}"))),
    }
    let mut out = Vec::new();
    for (i, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let parts: Vec<&str> = line.split_whitespace().collect();
        if parts.len() != 3 {
            return Err(bad(i + 1, "expected `path frames source`".into()));
        }
        let frames = parts[1].parse().map_err(|_| bad(i + 1, format!("bad frame count {:?}", parts[1])))?;
        let source = parts[2].parse().map_err(|e| bad(i + 1, format!("{e}")))?;
        out.push(Entry { path: PathBuf::from(parts[0]), frames, source });
    }
    Ok(out)
}

pub fn write_manifest(dir: &Path, entries: &[Entry]) -> Result<(), DatasetError> {
    let path = dir.join(MANIFEST);
    let mut text = String::from(MANIFEST_HEADER);
    text.push('\n');
    for e in entries {
        text.push_str(&format!("{} {} {}\n", e.path.display(), e.frames, e.source));
    }
    let tmp = dir.join("manifest.txt.tmp");
    fs::write(&tmp, text).map_err(io_err(&tmp))?;
    fs::rename(&tmp, &path).map_err(io_err(&path))
}

fn episode_name(i: usize) -> String {
    format!("ep_{i:05}.play")
}

/// Writes every episode and a fresh manifest into `dir`.
pub fn save_dataset(dir: &Path, d: &Dataset) -> Result<Vec<Entry>, DatasetError> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let mut entries = Vec::with_capacity(d.episodes.len());
    for (i, e) in d.episodes.iter().enumerate() {
        let name = episode_name(i);
        let path = dir.join(&name);
        save_episode(&path, e).map_err(|source| DatasetError::Episode { path: path.clone(), source })?;
        entries.push(Entry { path: PathBuf::from(name), frames: e.len(), source: e.source() });
    }
    write_manifest(dir, &entries)?;
    Ok(entries)
}

/// Saves `e` under the next free name in `dir` and appends it to the
/// manifest, creating the dataset if needed. Returns the episode path.
pub fn append_episode(dir: &Path, e: &Episode) -> Result<PathBuf, DatasetError> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let mut entries = match read_manifest(dir) {
        Ok(v) => v,
        Err(DatasetError::Missing(_)) => Vec::new(),
        Err(err) => return Err(err),
    };
    let mut i = entries.len();
    while dir.join(episode_name(i)).exists() {
        i += 1;
    }
    let name = episode_name(i);
    let path = dir.join(&name);
    save_episode(&path, e).map_err(|source| DatasetError::Episode { path: path.clone(), source })?;
    entries.push(Entry { path: PathBuf::from(name), frames: e.len(), source: e.source() });
    write_manifest(dir, &entries)?;
    Ok(path)
}

/// Loads every listed episode and checks it against its manifest line.
pub fn load_dataset(dir: &Path) -> Result<Dataset, DatasetError> {
    let entries = read_manifest(dir)?;
    let mut episodes = Vec::with_capacity(entries.len());
    for en in &entries {
        let path = dir.join(&en.path);
        let e = load_episode(&path).map_err(|source| DatasetError::Episode { path: path.clone(), source })?;
        check_entry(en, &path, e.len(), e.source())?;
        episodes.push(e);
    }
    Ok(Dataset::new(episodes))
}

fn check_entry(en: &Entry, path: &Path, frames: usize, source: Source) -> Result<(), DatasetError> {
    if frames != en.frames || source != en.source {
        return Err(DatasetError::Mismatch { path: path.to_path_buf(), listed: en.frames, listed_source: en.source, actual: frames, actual_source: source });
    }
    Ok(())
}

/// Manifest-level summary without reading frames.
pub fn manifest_totals(dir: &Path) -> Result<SourceTotals, DatasetError> {
    let mut t = SourceTotals::default();
    for e in read_manifest(dir)? {
        t.add(e.source, e.frames);
    }
    Ok(t)
}

/// Checks every listed file's header source against the manifest.
pub fn check_headers(dir: &Path) -> Result<(), DatasetError> {
    for en in read_manifest(dir)? {
        let path = dir.join(&en.path);
        let h = peek_header(&path).map_err(|source| DatasetError::Episode { path: path.clone(), source })?;
        if h.source != en.source {
            return Err(DatasetError::Mismatch { path, listed: en.frames, listed_source: en.source, actual: en.frames, actual_source: h.source });
        }
    }
    Ok(())
}

/// Lexical normalization: drops `.` and folds `..` where possible.
fn normalize(p: &Path) -> PathBuf {
    let mut out = PathBuf::new();
    for c in p.components() {
        match c {
            Component::CurDir => {}
            Component::ParentDir => {
                if !out.pop() {
                    out.push("..");
                }
            }
            other => out.push(other.as_os_str()),
        }
    }
    out
}

/// Path of `target` relative to directory `base`; both absolute.
fn relative_to(target: &Path, base: &Path) -> PathBuf {
    let t: Vec<_> = target.components().collect();
    let b: Vec<_> = base.components().collect();
    let common = t.iter().zip(&b).take_while(|(x, y)| x == y).count();
    let mut out = PathBuf::new();
    for _ in common..b.len() {
        out.push("..");
    }
    for c in &t[common..] {
        out.push(c.as_os_str());
    }
    out
}

fn absolute(p: &Path) -> Result<PathBuf, DatasetError> {
    let abs = if p.is_absolute() { p.to_path_buf() } else { std::env::current_dir().map_err(io_err(p))?.join(p) };
    Ok(normalize(&abs))
}

/// Concatenates the manifests of `inputs` (in order) into a new dataset at
/// `out` whose entries point at the original files. Episode identities must
/// be disjoint.
pub fn merge_datasets(out: &Path, inputs: &[&Path]) -> Result<SourceTotals, DatasetError> {
    fs::create_dir_all(out).map_err(io_err(out))?;
    let out_abs = absolute(out)?;
    let mut seen = HashSet::new();
    let mut entries = Vec::new();
    let mut totals = SourceTotals::default();
    for dir in inputs {
        let dir_abs = absolute(dir)?;
        for en in read_manifest(dir)? {
            let file = normalize(&dir_abs.join(&en.path));
            if !seen.insert(file.clone()) {
                return Err(DatasetError::Duplicate(file));
            }
            totals.add(en.source, en.frames);
            entries.push(Entry { path: relative_to(&file, &out_abs), ..en });
        }
    }
    write_manifest(out, &entries)?;
    Ok(totals)
}

pub fn write_totals<W: Write>(t: &SourceTotals, mut w: W) -> io::Result<()> {
    for s in Source::ALL {
        writeln!(w, "{s} {}", t.get(s))?;
    }
    writeln!(w, "total {}", t.total())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn relative_paths() {
        assert_eq!(relative_to(Path::new("/a/b/c.play"), Path::new("/a/d")), PathBuf::from("../b/c.play"));
        assert_eq!(relative_to(Path::new("/a/d/c.play"), Path::new("/a/d")), PathBuf::from("c.play"));
        assert_eq!(normalize(Path::new("/a/./b/../c")), PathBuf::from("/a/c"));
    }
}
