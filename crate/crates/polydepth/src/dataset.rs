//! KITTI object-benchmark directory layout:
//!
//! ```text
//! root/calib/000000.txt
//! root/label_2/000000.txt
//! root/depth/000000.png     (optional, 16-bit depth maps)
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use polydepth_core::bev::DepthMap;

use crate::kitti::{load_depth_png, parse_calib, parse_labels, CalibFile, LabelRecord};
use crate::{Error, Result};

pub const CALIB_DIR: &str = "calib";
pub const LABEL_DIR: &str = "label_2";
pub const DEPTH_DIR: &str = "depth";

/// A frame's file stem and its numeric id.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct FrameId {
    pub index: u32,
    pub name: String,
}

impl FrameId {
    pub fn parse(name: &str) -> Option<Self> {
        if name.is_empty() || !name.bytes().all(|b| b.is_ascii_digit()) {
            return None;
        }
        Some(FrameId { index: name.parse().ok()?, name: name.to_string() })
    }

    pub fn from_index(index: u32) -> Self {
        FrameId { index, name: format!("{index:06}") }
    }
}

pub fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

pub fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

/// Frame ids named by the `*.txt` (or `ext`) files of a directory, sorted.
pub fn frames_in_dir(dir: &Path, ext: &str) -> Result<Vec<FrameId>> {
    let mut out = Vec::new();
    for entry in fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        if path.extension().and_then(|e| e.to_str()) != Some(ext) {
            continue;
        }
        if let Some(id) = path.file_stem().and_then(|s| s.to_str()).and_then(FrameId::parse) {
            out.push(id);
        }
    }
    out.sort();
    out.dedup_by_key(|f| f.index);
    Ok(out)
}

/// One frame id per non-blank line.
pub fn read_split(path: &Path) -> Result<Vec<FrameId>> {
    let text = read_text(path)?;
    let mut out = Vec::new();
    for (i, l) in text.lines().enumerate() {
        let l = l.trim();
        if l.is_empty() {
            continue;
        }
        let id = FrameId::parse(l).ok_or_else(|| {
            Error::parse(path, crate::ParseError::new(i + 1, format!("frame ids are decimal digits, found {l:?}")))
        })?;
        out.push(id);
    }
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct Dataset {
    root: PathBuf,
}

impl Dataset {
    pub fn open(root: impl Into<PathBuf>) -> Result<Self> {
        let root = root.into();
        if !root.is_dir() {
            return Err(Error::Config(format!("dataset root {} is not a directory", root.display())));
        }
        Ok(Self { root })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn calib_path(&self, f: &FrameId) -> PathBuf {
        self.root.join(CALIB_DIR).join(format!("{}.txt", f.name))
    }

    pub fn label_path(&self, f: &FrameId) -> PathBuf {
        self.root.join(LABEL_DIR).join(format!("{}.txt", f.name))
    }

    pub fn depth_path(&self, f: &FrameId) -> PathBuf {
        self.root.join(DEPTH_DIR).join(format!("{}.png", f.name))
    }

    /// Frames from the split file, else every label file, else every calib file.
    pub fn frames(&self, split: Option<&Path>) -> Result<Vec<FrameId>> {
        if let Some(s) = split {
            return read_split(s);
        }
        let labels = self.root.join(LABEL_DIR);
        if labels.is_dir() {
            return frames_in_dir(&labels, "txt");
        }
        frames_in_dir(&self.root.join(CALIB_DIR), "txt")
    }

    pub fn calib(&self, f: &FrameId) -> Result<CalibFile> {
        let p = self.calib_path(f);
        parse_calib(&read_text(&p)?).map_err(|e| Error::parse(p, e))
    }

    pub fn labels(&self, f: &FrameId) -> Result<Vec<LabelRecord>> {
        let p = self.label_path(f);
        parse_labels(&read_text(&p)?).map_err(|e| Error::parse(p, e))
    }

    /// `None` when the frame has no depth map.
    pub fn depth(&self, f: &FrameId) -> Result<Option<DepthMap>> {
        let p = self.depth_path(f);
        if !p.exists() {
            return Ok(None);
        }
        let bytes = fs::read(&p).map_err(|e| Error::io(&p, e))?;
        load_depth_png(&bytes)
            .map(Some)
            .map_err(|e| Error::Format(format!("{}: {e}", p.display())))
    }
}
