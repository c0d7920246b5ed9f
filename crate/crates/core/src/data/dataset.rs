use std::path::{Path, PathBuf};

use rayon::prelude::*;

use super::io::{read_mask, read_rgb, write_mask, write_rgb};
use super::pair::BitemporalPair;
use crate::error::{Error, Result};

/// Split names with a manifest file each.
pub const SPLITS: [&str; 3] = ["train", "val", "test"];

/// A dataset directory: `A/`, `B/` and `label/` hold same-named 8-bit PNGs;
/// `<split>.txt` lists one file name per line.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DatasetLayout {
    root: PathBuf,
}

impl DatasetLayout {
    /// Opens an existing dataset; the three image directories must exist.
    pub fn open(root: impl Into<PathBuf>) -> Result<Self> {
        let layout = Self { root: root.into() };
        for dir in [layout.a_dir(), layout.b_dir(), layout.label_dir()] {
            if !dir.is_dir() {
                return Err(Error::io(
                    &dir,
                    std::io::Error::new(std::io::ErrorKind::NotFound, "dataset directory missing"),
                ));
            }
        }
        Ok(layout)
    }

    /// Creates the directory skeleton (existing files are kept).
    pub fn create(root: impl Into<PathBuf>) -> Result<Self> {
        let layout = Self { root: root.into() };
        for dir in [layout.a_dir(), layout.b_dir(), layout.label_dir()] {
            std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        }
        Ok(layout)
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn a_dir(&self) -> PathBuf {
        self.root.join("A")
    }

    pub fn b_dir(&self) -> PathBuf {
        self.root.join("B")
    }

    pub fn label_dir(&self) -> PathBuf {
        self.root.join("label")
    }

    pub fn manifest_path(&self, split: &str) -> PathBuf {
        self.root.join(format!("{split}.txt"))
    }

    /// File names listed in a split manifest, blank lines skipped.
    pub fn manifest(&self, split: &str) -> Result<Vec<String>> {
        let path = self.manifest_path(split);
        let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        Ok(text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty())
            .map(String::from)
            .collect())
    }

    pub fn write_manifest(&self, split: &str, names: &[String]) -> Result<()> {
        let path = self.manifest_path(split);
        let mut text = names.join("\n");
        if !text.is_empty() {
            text.push('\n');
        }
        std::fs::write(&path, text).map_err(|e| Error::io(&path, e))
    }

    /// Every PNG in `A/`, sorted.
    pub fn list_images(&self) -> Result<Vec<String>> {
        let dir = self.a_dir();
        let mut names = Vec::new();
        for entry in std::fs::read_dir(&dir).map_err(|e| Error::io(&dir, e))? {
            let entry = entry.map_err(|e| Error::io(&dir, e))?;
            let name = entry.file_name().to_string_lossy().into_owned();
            if name.ends_with(".png") {
                names.push(name);
            }
        }
        names.sort();
        Ok(names)
    }

    /// Checks that every file in `A/` has a same-named `B/` and `label/` file.
    pub fn validate(&self) -> Result<()> {
        for name in self.list_images()? {
            for dir in [self.b_dir(), self.label_dir()] {
                if !dir.join(&name).is_file() {
                    return Err(Error::Validation(format!(
                        "{name} has no counterpart in {}",
                        dir.display()
                    )));
                }
            }
        }
        Ok(())
    }

    /// Loads one pair by file name; the label is optional on disk.
    pub fn load_pair(&self, file: &str) -> Result<BitemporalPair> {
        let a = read_rgb(&self.a_dir().join(file))?;
        let b = read_rgb(&self.b_dir().join(file))?;
        let lp = self.label_dir().join(file);
        let label = if lp.is_file() { Some(read_mask(&lp)?) } else { None };
        let name = file.strip_suffix(".png").unwrap_or(file);
        BitemporalPair::new(name, a, b, label)
    }

    /// Loads a split in manifest order. With `parallel` the files are read
    /// by a worker pool; the order of the result is the same either way.
    pub fn load_split(&self, split: &str, parallel: bool) -> Result<Vec<BitemporalPair>> {
        let names = self.manifest(split)?;
        if parallel {
            names.par_iter().map(|n| self.load_pair(n)).collect()
        } else {
            names.iter().map(|n| self.load_pair(n)).collect()
        }
    }

    pub fn write_pair(&self, pair: &BitemporalPair) -> Result<()> {
        let file = format!("{}.png", pair.name);
        write_rgb(&pair.a, &self.a_dir().join(&file))?;
        write_rgb(&pair.b, &self.b_dir().join(&file))?;
        if let Some(l) = &pair.label {
            write_mask(l, &self.label_dir().join(&file))?;
        }
        Ok(())
    }
}
