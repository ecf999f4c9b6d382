//! Image-folder dataset: `root/<class>/*.{jpg,jpeg,png,ppm}`, classes in
//! sorted directory-name order, a seeded per-class 4:1 train/test split.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{DfeiaError, Result};

const EXTENSIONS: [&str; 4] = ["jpg", "jpeg", "png", "ppm"];

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Item {
    pub path: PathBuf,
    pub label: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Split {
    Train,
    Test,
}

impl FromStr for Split {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "train" => Ok(Split::Train),
            "test" => Ok(Split::Test),
            other => Err(format!("unknown split '{other}' (expected train or test)")),
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Split::Train => "train",
            Split::Test => "test",
        })
    }
}

#[derive(Clone, Debug)]
pub struct Dataset {
    pub root: PathBuf,
    pub classes: Vec<String>,
    pub train: Vec<Item>,
    pub test: Vec<Item>,
}

fn sorted_entries(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for entry in std::fs::read_dir(dir).map_err(DfeiaError::io(dir))? {
        out.push(entry.map_err(DfeiaError::io(dir))?.path());
    }
    out.sort();
    Ok(out)
}

fn is_image(path: &Path) -> bool {
    path.is_file()
        && path
            .extension()
            .and_then(|e| e.to_str())
            .is_some_and(|e| EXTENSIONS.contains(&e.to_ascii_lowercase().as_str()))
}

/// Number of a class's `n` items that go to training: `⌊0.8·n⌋`.
pub fn train_count(n: usize) -> usize {
    n * 4 / 5
}

impl Dataset {
    /// Scans `root` and splits each class: its filename-sorted items are
    /// shuffled by a generator seeded with `seed` (consumed class by class in
    /// label order), the first `⌊0.8·n⌋` go to training, the rest to test.
    pub fn open(root: &Path, seed: u64) -> Result<Self> {
        if !root.is_dir() {
            return Err(DfeiaError::dataset(root, "dataset directory does not exist"));
        }
        let class_dirs: Vec<PathBuf> = sorted_entries(root)?.into_iter().filter(|p| p.is_dir()).collect();
        if class_dirs.len() < 2 {
            return Err(DfeiaError::dataset(
                root,
                format!("need at least 2 class directories, found {}", class_dirs.len()),
            ));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut ds = Dataset { root: root.into(), classes: Vec::new(), train: Vec::new(), test: Vec::new() };
        for (label, dir) in class_dirs.iter().enumerate() {
            let name = dir
                .file_name()
                .and_then(|n| n.to_str())
                .ok_or_else(|| DfeiaError::dataset(dir, "class directory name is not valid UTF-8"))?;
            ds.classes.push(name.to_string());
            let mut items: Vec<PathBuf> = sorted_entries(dir)?.into_iter().filter(|p| is_image(p)).collect();
            if items.is_empty() {
                return Err(DfeiaError::dataset(dir, "class directory contains no .jpg/.png/.ppm images"));
            }
            items.shuffle(&mut rng);
            let cut = train_count(items.len());
            for (i, path) in items.into_iter().enumerate() {
                let item = Item { path, label };
                if i < cut {
                    ds.train.push(item);
                } else {
                    ds.test.push(item);
                }
            }
        }
        Ok(ds)
    }

    pub fn split(&self, split: Split) -> &[Item] {
        match split {
            Split::Train => &self.train,
            Split::Test => &self.test,
        }
    }

    pub fn num_classes(&self) -> usize {
        self.classes.len()
    }
}
