//! Image / ground-truth pairs from a manifest file or an `images/` + `gt/` directory.

use std::collections::BTreeMap;
use std::ffi::OsStr;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use bcosfire::{load_image, BinaryMap, GrayImage};

const IMAGE_EXTENSIONS: &[&str] = &["png", "bmp", "jpg", "jpeg", "tif", "tiff"];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Pair {
    /// Name used in reports: the image file stem.
    pub name: String,
    pub image: PathBuf,
    pub truth: PathBuf,
}

/// A pair that loaded and passed the dimension check.
pub struct Loaded {
    pub name: String,
    pub image: GrayImage,
    pub truth: BinaryMap,
}

pub fn is_image(path: &Path) -> bool {
    path.is_file()
        && path
            .extension()
            .and_then(OsStr::to_str)
            .is_some_and(|e| IMAGE_EXTENSIONS.contains(&e.to_ascii_lowercase().as_str()))
}

fn stem(path: &Path) -> String {
    path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
}

/// Image files directly inside `dir`, sorted by name.
pub fn list_images(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files = Vec::new();
    for entry in std::fs::read_dir(dir).with_context(|| format!("reading directory {}", dir.display()))? {
        let path = entry?.path();
        if is_image(&path) {
            files.push(path);
        }
    }
    files.sort();
    Ok(files)
}

/// Pairs `root/images/<name>.*` with `root/gt/<name>.*`.
pub fn from_directory(root: &Path) -> Result<Vec<Pair>> {
    let images = list_images(&root.join("images"))?;
    let truths: BTreeMap<String, PathBuf> =
        list_images(&root.join("gt"))?.into_iter().map(|p| (stem(&p), p)).collect();
    let mut pairs = Vec::new();
    for image in images {
        let name = stem(&image);
        let truth = truths
            .get(&name)
            .with_context(|| format!("no ground truth for {} in {}", image.display(), root.join("gt").display()))?;
        pairs.push(Pair {
            name,
            image,
            truth: truth.clone(),
        });
    }
    Ok(pairs)
}

/// Reads a two-column CSV (`image,truth`); an optional header row is skipped.
/// Relative paths are resolved against the manifest's directory.
pub fn from_manifest(path: &Path) -> Result<Vec<Pair>> {
    let base = path.parent().unwrap_or(Path::new("."));
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_path(path)
        .with_context(|| format!("reading manifest {}", path.display()))?;
    let mut pairs = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.with_context(|| format!("manifest {} row {}", path.display(), i + 1))?;
        if record.len() != 2 {
            bail!("manifest {} row {}: expected 2 columns, found {}", path.display(), i + 1, record.len());
        }
        if i == 0 && record[0].eq_ignore_ascii_case("image") {
            continue;
        }
        let resolve = |s: &str| {
            let p = PathBuf::from(s);
            if p.is_relative() {
                base.join(p)
            } else {
                p
            }
        };
        let image = resolve(&record[0]);
        pairs.push(Pair {
            name: stem(&image),
            image,
            truth: resolve(&record[1]),
        });
    }
    pairs.sort_by(|a, b| a.name.cmp(&b.name).then_with(|| a.image.cmp(&b.image)));
    Ok(pairs)
}

pub fn resolve(manifest: Option<&Path>, dataset: Option<&Path>) -> Result<Vec<Pair>> {
    let pairs = match (manifest, dataset) {
        (Some(_), Some(_)) => bail!("give either a manifest or a dataset directory, not both"),
        (Some(m), None) => from_manifest(m)?,
        (None, Some(d)) => from_directory(d)?,
        (None, None) => bail!("a dataset is required (--manifest or --dataset)"),
    };
    if pairs.is_empty() {
        bail!("the dataset is empty");
    }
    for pair in &pairs {
        for p in [&pair.image, &pair.truth] {
            if !p.is_file() {
                bail!("{}: no such file", p.display());
            }
        }
    }
    Ok(pairs)
}

/// Loads a pair; ground truth is foreground where the gray level exceeds 127.
pub fn load(pair: &Pair) -> Result<Loaded> {
    let image = load_image(&pair.image)?;
    let truth = BinaryMap::from_annotation(&load_image(&pair.truth)?);
    if image.dimensions() != truth.dimensions() {
        bail!(
            "{}: image is {}x{} but ground truth is {}x{}",
            pair.name,
            image.width(),
            image.height(),
            truth.width(),
            truth.height()
        );
    }
    Ok(Loaded {
        name: pair.name.clone(),
        image,
        truth,
    })
}
