use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use anyhow::{bail, Result};
use bcosfire::{load_image, save_png, BinaryMap, CosfireParams, GrayImage, Polarity, Prepared};
use serde::Serialize;

use crate::dataset::{is_image, list_images};
use crate::output::{artifact, create_dir, orientation_image, write_json};

#[derive(Serialize)]
struct Summary<'a> {
    image: String,
    width: usize,
    height: usize,
    params: &'a CosfireParams,
    polarity: Polarity,
    t_high: f64,
    thinned_pixels: usize,
    mask_pixels: usize,
    artifacts: [String; 4],
}

/// Expands directories to the images they contain and checks that every
/// input exists and that artifact names do not collide.
pub fn expand_inputs(inputs: &[PathBuf]) -> Result<Vec<(String, PathBuf)>> {
    let mut files = Vec::new();
    for input in inputs {
        if input.is_dir() {
            files.extend(list_images(input)?);
        } else if input.is_file() {
            files.push(input.clone());
        } else {
            bail!("{}: no such file or directory", input.display());
        }
    }
    if files.is_empty() {
        bail!("no input images");
    }
    let mut names = BTreeSet::new();
    let mut out = Vec::new();
    for file in files {
        if !is_image(&file) {
            bail!("{}: not a supported image file", file.display());
        }
        let name = file.file_stem().unwrap_or_default().to_string_lossy().into_owned();
        if !names.insert(name.clone()) {
            bail!("two inputs share the name {name:?}; their artifacts would collide");
        }
        out.push((name, file));
    }
    out.sort();
    Ok(out)
}

/// Runs the pipeline on `image` and writes its artifacts as `<name>_*`.
pub fn detect_image(
    name: &str,
    source: &str,
    image: &GrayImage,
    out_dir: &Path,
    params: &CosfireParams,
    polarity: Polarity,
    t_high: f64,
) -> Result<(Prepared, BinaryMap)> {
    let prep = Prepared::new(image, params, polarity)?;
    let mask = prep.binarize(t_high)?;
    let files = ["response.png", "orientation.png", "thinned.png", "mask.png"].map(|s| artifact(out_dir, name, s));
    save_png(&prep.pair.response, &files[0])?;
    save_png(&orientation_image(&prep.pair), &files[1])?;
    save_png(&prep.thinned, &files[2])?;
    mask.save_png(&files[3])?;
    let summary = Summary {
        image: source.to_owned(),
        width: image.width(),
        height: image.height(),
        params,
        polarity,
        t_high,
        thinned_pixels: prep.thinned.data().iter().filter(|&&v| v > 0.0).count(),
        mask_pixels: mask.count(),
        artifacts: files.map(|f| f.file_name().unwrap().to_string_lossy().into_owned()),
    };
    write_json(&artifact(out_dir, name, "summary.json"), &summary)?;
    Ok((prep, mask))
}

fn detect_file(
    name: &str,
    path: &Path,
    out_dir: &Path,
    params: &CosfireParams,
    polarity: Polarity,
    t_high: f64,
) -> Result<usize> {
    let image = load_image(path)?;
    let (_, mask) = detect_image(name, &path.display().to_string(), &image, out_dir, params, polarity, t_high)?;
    Ok(mask.count())
}

/// Returns the number of images that failed.
pub fn run(inputs: &[PathBuf], out_dir: &Path, params: &CosfireParams, polarity: Polarity, t_high: f64) -> Result<usize> {
    let items = expand_inputs(inputs)?;
    create_dir(out_dir)?;
    let mut failures = 0;
    for (name, path) in &items {
        match detect_file(name, path, out_dir, params, polarity, t_high) {
            Ok(n) => println!("{name}: {n} line pixels"),
            Err(e) => {
                eprintln!("error: {name}: {e:#}");
                failures += 1;
            }
        }
    }
    Ok(failures)
}
