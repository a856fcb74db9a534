//! Manifest files and PGM images.
//!
//! A manifest has one `<relative-image-path>,<class-label>` record per line;
//! blank lines and lines starting with `#` are skipped. Class indices follow
//! first appearance. Images are binary (P5) or plain (P2) PGM with maxval 255,
//! scaled to [0, 1] on load.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use image::codecs::pnm::{PnmEncoder, PnmSubtype, SampleEncoding};
use image::{DynamicImage, ExtendedColorType, ImageEncoder, ImageFormat, ImageReader};

use super::LabeledDataset;
use crate::error::{Error, Result};
use crate::linalg::Matrix;

pub const MANIFEST_FILE: &str = "manifest.txt";

pub fn load_manifest(manifest_path: impl AsRef<Path>) -> Result<LabeledDataset> {
    let manifest_path = manifest_path.as_ref();
    let text = fs::read_to_string(manifest_path)
        .map_err(|e| Error::load(manifest_path, e.to_string()))?;
    let base = manifest_path.parent().unwrap_or_else(|| Path::new("."));

    let mut samples = Vec::new();
    let mut labels = Vec::new();
    let mut class_names: Vec<String> = Vec::new();
    let mut shape: Option<(usize, usize, String)> = None;

    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (rel, label) = line.rsplit_once(',').ok_or_else(|| {
            Error::load(
                manifest_path,
                format!("line {}: expected `<path>,<label>`", lineno + 1),
            )
        })?;
        let (rel, label) = (rel.trim(), label.trim());
        if rel.is_empty() || label.is_empty() {
            return Err(Error::load(
                manifest_path,
                format!("line {}: empty path or label", lineno + 1),
            ));
        }
        let image_path = base.join(rel);
        let x = load_pgm(&image_path)?;
        match &shape {
            None => shape = Some((x.rows(), x.cols(), rel.to_string())),
            Some((h, w, first)) if (*h, *w) != x.shape() => {
                return Err(Error::load(
                    &image_path,
                    format!(
                        "dimension mismatch: image is {}x{} but {first} is {h}x{w}",
                        x.rows(),
                        x.cols()
                    ),
                ));
            }
            Some(_) => {}
        }
        let class = match class_names.iter().position(|c| c == label) {
            Some(j) => j,
            None => {
                class_names.push(label.to_string());
                class_names.len() - 1
            }
        };
        samples.push(x);
        labels.push(class);
    }

    if samples.is_empty() {
        return Err(Error::load(manifest_path, "manifest lists no images"));
    }
    LabeledDataset::new(samples, labels, class_names)
}

/// Reads a grayscale PGM image into a matrix with entries in [0, 1].
pub fn load_pgm(path: &Path) -> Result<Matrix> {
    let reader = ImageReader::open(path)
        .map_err(|e| Error::load(path, e.to_string()))?
        .with_guessed_format()
        .map_err(|e| Error::load(path, e.to_string()))?;
    if reader.format() != Some(ImageFormat::Pnm) {
        return Err(Error::load(path, "unknown image format, expected PGM"));
    }
    let img = reader.decode().map_err(|e| Error::load(path, e.to_string()))?;
    let gray = match img {
        DynamicImage::ImageLuma8(g) => g,
        other => {
            return Err(Error::load(
                path,
                format!("expected 8-bit grayscale PGM, found {:?}", other.color()),
            ))
        }
    };
    let (w, h) = gray.dimensions();
    let data = gray.into_raw().into_iter().map(|b| f64::from(b) / 255.0).collect();
    Matrix::new(h as usize, w as usize, data).map_err(|e| Error::load(path, e.to_string()))
}

/// Writes a matrix as binary PGM, scaling by 255 and clamping to [0, 255].
pub fn save_pgm(x: &Matrix, path: &Path) -> Result<()> {
    let bytes: Vec<u8> = x
        .as_slice()
        .iter()
        .map(|v| (v * 255.0).round().clamp(0.0, 255.0) as u8)
        .collect();
    let file = BufWriter::new(fs::File::create(path)?);
    PnmEncoder::new(file)
        .with_subtype(PnmSubtype::Graymap(SampleEncoding::Binary))
        .write_image(&bytes, x.cols() as u32, x.rows() as u32, ExtendedColorType::L8)
        .map_err(|e| Error::Io(std::io::Error::other(e)))
}

/// Dumps a dataset as `manifest.txt` plus one P5 image per sample into `dir`.
/// Returns the manifest path.
pub fn save_manifest(ds: &LabeledDataset, dir: impl AsRef<Path>) -> Result<std::path::PathBuf> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir)?;
    let manifest_path = dir.join(MANIFEST_FILE);
    let mut out = BufWriter::new(fs::File::create(&manifest_path)?);
    writeln!(out, "# path,label")?;
    for (i, (x, &label)) in ds.samples().iter().zip(ds.labels()).enumerate() {
        let name = format!("img_{i:05}.pgm");
        save_pgm(x, &dir.join(&name))?;
        writeln!(out, "{name},{}", ds.class_names()[label])?;
    }
    out.flush()?;
    Ok(manifest_path)
}
