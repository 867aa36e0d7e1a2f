use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const IMAGE_EXTENSIONS: [&str; 3] = ["png", "jpg", "jpeg"];

/// Maps class directory names to labels.
///
/// A directory matches an entry when its name equals the entry's prefix or
/// starts with the prefix followed by `_` (the source dataset suffixes some
/// class folders with staging information). Directories named in
/// `containers` are descended into and pooled.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassMapping {
    pub classes: Vec<ClassDir>,
    #[serde(default)]
    pub containers: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassDir {
    pub prefix: String,
    pub label: usize,
}

impl Default for ClassMapping {
    fn default() -> Self {
        let classes = [
            "adenocarcinoma",
            "large.cell.carcinoma",
            "squamous.cell.carcinoma",
            "normal",
        ]
        .iter()
        .enumerate()
        .map(|(label, prefix)| ClassDir {
            prefix: prefix.to_string(),
            label,
        })
        .collect();
        ClassMapping {
            classes,
            containers: ["Data", "train", "test", "valid"].iter().map(|s| s.to_string()).collect(),
        }
    }
}

impl ClassMapping {
    pub fn label_for(&self, dir_name: &str) -> Option<usize> {
        self.classes.iter().find_map(|c| {
            let hit = dir_name == c.prefix
                || dir_name
                    .strip_prefix(c.prefix.as_str())
                    .is_some_and(|rest| rest.starts_with('_'));
            hit.then_some(c.label)
        })
    }

    pub fn class_count(&self) -> usize {
        self.classes.iter().map(|c| c.label + 1).max().unwrap_or(0)
    }
}

/// One image file found by [`scan_dataset`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScannedImage {
    pub path: PathBuf,
    /// Path relative to the dataset root with `/` separators; the sort key.
    pub id: String,
    pub label: usize,
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn is_image(path: &Path) -> bool {
    path.extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| IMAGE_EXTENSIONS.contains(&e.to_ascii_lowercase().as_str()))
}

fn sorted_entries(dir: &Path) -> Result<Vec<fs::DirEntry>> {
    let mut entries = fs::read_dir(dir)
        .map_err(io_err(dir))?
        .collect::<std::io::Result<Vec<_>>>()
        .map_err(io_err(dir))?;
    entries.sort_by_key(|e| e.file_name());
    Ok(entries)
}

/// Lists every image under `root`, sorted by relative path.
pub fn scan_dataset(root: &Path, mapping: &ClassMapping) -> Result<Vec<ScannedImage>> {
    if !root.is_dir() {
        return Err(Error::Data(format!("dataset root {} is not a directory", root.display())));
    }
    let mut found = Vec::new();
    walk(root, "", mapping, &mut found)?;
    if found.is_empty() {
        return Err(Error::Data(format!("no images found under {}", root.display())));
    }
    found.sort_by(|a, b| a.id.cmp(&b.id));
    Ok(found)
}

fn walk(dir: &Path, rel: &str, mapping: &ClassMapping, found: &mut Vec<ScannedImage>) -> Result<()> {
    for entry in sorted_entries(dir)? {
        let path = entry.path();
        if !path.is_dir() {
            continue;
        }
        let name = entry.file_name().to_string_lossy().into_owned();
        let child_rel = if rel.is_empty() { name.clone() } else { format!("{rel}/{name}") };
        if let Some(label) = mapping.label_for(&name) {
            for file in sorted_entries(&path)? {
                let fpath = file.path();
                if fpath.is_file() && is_image(&fpath) {
                    found.push(ScannedImage {
                        id: format!("{child_rel}/{}", file.file_name().to_string_lossy()),
                        path: fpath,
                        label,
                    });
                }
            }
        } else if mapping.containers.contains(&name) {
            walk(&path, &child_rel, mapping, found)?;
        } else {
            return Err(Error::UnknownClassDir(child_rel));
        }
    }
    Ok(())
}
