//! Square patch extraction, centering, reassembly and the patch library.

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::container::{self, PayloadReader};
use crate::error::{Error, Result};
use crate::image_io::{load_image, prepare_image, GrayImage};

/// Where a patch came from: image ordinal in the manifest, top-left corner, side.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct PatchRef {
    pub image_index: u32,
    pub x: u32,
    pub y: u32,
    pub n: u32,
}

/// An n×n block of 8-bit intensities stored row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Patch {
    n: u32,
    values: Vec<u8>,
}

impl Patch {
    pub fn new(n: u32, values: Vec<u8>) -> Result<Self> {
        if !n.is_power_of_two() {
            return Err(Error::InvalidParameter(format!(
                "patch side {n} is not a power of two"
            )));
        }
        if values.len() != (n * n) as usize {
            return Err(Error::DimensionMismatch(format!(
                "patch side {n} needs {} values, got {}",
                n * n,
                values.len()
            )));
        }
        Ok(Self { n, values })
    }

    pub fn filled(n: u32, value: u8) -> Self {
        Self {
            n,
            values: vec![value; (n * n) as usize],
        }
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    pub fn values(&self) -> &[u8] {
        &self.values
    }

    pub fn into_values(self) -> Vec<u8> {
        self.values
    }
}

/// A patch with its mean intensity subtracted.
#[derive(Debug, Clone, PartialEq)]
pub struct CenteredPatch {
    pub n: u32,
    pub values: Vec<f64>,
    pub mean: f64,
}

impl CenteredPatch {
    /// Adds the mean back.
    pub fn restore(&self) -> Vec<f64> {
        self.values.iter().map(|v| v + self.mean).collect()
    }
}

/// Subtracts the mean intensity from every pixel.
///
/// Because n² is a power of two the mean is a dyadic rational, so both the
/// subtraction and its inverse are exact in `f64`.
pub fn center_patch(p: &Patch) -> CenteredPatch {
    let mut values = vec![0.0; p.values.len()];
    let mean = center_into(&p.values, &mut values);
    CenteredPatch {
        n: p.n,
        values,
        mean,
    }
}

pub(crate) fn center_into(src: &[u8], dst: &mut [f64]) -> f64 {
    let sum: u64 = src.iter().map(|&v| v as u64).sum();
    let mean = sum as f64 / src.len() as f64;
    for (d, &s) in dst.iter_mut().zip(src) {
        *d = s as f64 - mean;
    }
    mean
}

/// Checks the parts of the patch geometry that do not depend on the image side.
pub fn validate_geometry(n: u32, stride: u32) -> Result<()> {
    if n == 0 || !n.is_power_of_two() {
        return Err(Error::InvalidParameter(format!(
            "patch side {n} must be a power of two"
        )));
    }
    if stride == 0 || !stride.is_power_of_two() {
        return Err(Error::InvalidParameter(format!(
            "stride {stride} must be a power of two"
        )));
    }
    if stride > n {
        return Err(Error::InvalidParameter(format!(
            "stride {stride} exceeds patch side {n}"
        )));
    }
    Ok(())
}

/// Patches per image: `((side - n) / stride + 1)²`, which is `(side / n)²` when `stride == n`.
pub fn patch_count(side: u32, n: u32, stride: u32) -> Result<usize> {
    validate_geometry(n, stride)?;
    if !side.is_power_of_two() {
        return Err(Error::InvalidParameter(format!(
            "image side {side} must be a power of two"
        )));
    }
    if n > side {
        return Err(Error::InvalidParameter(format!(
            "patch side {n} exceeds image side {side}"
        )));
    }
    if !(side - n).is_multiple_of(stride) {
        return Err(Error::InvalidParameter(format!(
            "stride {stride} does not divide {side} - {n}"
        )));
    }
    let per_axis = ((side - n) / stride + 1) as usize;
    Ok(per_axis * per_axis)
}

/// Cuts `img` into n×n windows at multiples of `stride`, row-major by (y, x).
/// Every returned [`PatchRef`] has `image_index` 0.
pub fn extract_patches(img: &GrayImage, n: u32, stride: u32) -> Result<Vec<(PatchRef, Patch)>> {
    extract_indexed(img, 0, n, stride)
}

fn extract_indexed(
    img: &GrayImage,
    image_index: u32,
    n: u32,
    stride: u32,
) -> Result<Vec<(PatchRef, Patch)>> {
    let side = img.side()?;
    let count = patch_count(side, n, stride)?;
    let mut out = Vec::with_capacity(count);
    for y in (0..=side - n).step_by(stride as usize) {
        for x in (0..=side - n).step_by(stride as usize) {
            let values = copy_window(img, x, y, n);
            out.push((
                PatchRef {
                    image_index,
                    x,
                    y,
                    n,
                },
                Patch { n, values },
            ));
        }
    }
    debug_assert_eq!(out.len(), count);
    Ok(out)
}

fn copy_window(img: &GrayImage, x: u32, y: u32, n: u32) -> Vec<u8> {
    let w = img.width() as usize;
    let pixels = img.pixels();
    let mut values = Vec::with_capacity((n * n) as usize);
    for row in y..y + n {
        let start = row as usize * w + x as usize;
        values.extend_from_slice(&pixels[start..start + n as usize]);
    }
    values
}

/// Non-overlapping partition of a target image, row-major.
pub fn partition(img: &GrayImage, n: u32) -> Result<Vec<Patch>> {
    let side = img.side()?;
    if n == 0 || !n.is_power_of_two() || n > side {
        return Err(Error::DimensionMismatch(format!(
            "image side {side} is not divisible into {n}x{n} patches"
        )));
    }
    Ok(extract_patches(img, n, n)?
        .into_iter()
        .map(|(_, p)| p)
        .collect())
}

/// Places `grid` (row-major, non-overlapping) into a `side`×`side` image.
pub fn assemble(grid: &[Patch], side: u32) -> Result<GrayImage> {
    let first = grid
        .first()
        .ok_or_else(|| Error::DimensionMismatch("no patches to assemble".into()))?;
    let n = first.n;
    if grid.iter().any(|p| p.n != n) {
        return Err(Error::DimensionMismatch("patches have mixed sides".into()));
    }
    if n > side || !side.is_multiple_of(n) {
        return Err(Error::DimensionMismatch(format!(
            "patch side {n} does not tile image side {side}"
        )));
    }
    let per_row = (side / n) as usize;
    if grid.len() != per_row * per_row {
        return Err(Error::DimensionMismatch(format!(
            "{} patches cannot fill a {per_row}x{per_row} grid",
            grid.len()
        )));
    }
    let (n, side) = (n as usize, side as usize);
    let mut pixels = vec![0u8; side * side];
    for (cell, patch) in grid.iter().enumerate() {
        let (cx, cy) = ((cell % per_row) * n, (cell / per_row) * n);
        for (row, src) in patch.values.chunks_exact(n).enumerate() {
            let start = (cy + row) * side + cx;
            pixels[start..start + n].copy_from_slice(src);
        }
    }
    GrayImage::new(side as u32, side as u32, pixels)
}

/// Reads a dataset manifest: one image path per line, blank lines and `#`
/// comments skipped. Relative paths resolve against the manifest's directory.
pub fn read_manifest(path: &Path) -> Result<Vec<PathBuf>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let base = path.parent().unwrap_or(Path::new(""));
    Ok(text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(|l| base.join(l))
        .collect())
}

/// Every patch extracted from an ordered set of images.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PatchLibrary {
    n: u32,
    stride: u32,
    side: u32,
    manifest: Vec<String>,
    digest: String,
    refs: Vec<PatchRef>,
    data: Vec<u8>,
}

#[derive(Serialize, Deserialize)]
struct LibraryHeader {
    format_version: u32,
    kind: String,
    n: u32,
    stride: u32,
    side: u32,
    count: u64,
    manifest_digest: String,
    manifest: Vec<String>,
}

const LIBRARY_KIND: &str = "patch-library";
const LIBRARY_VERSION: u32 = 1;

impl PatchLibrary {
    /// Loads every manifest entry, optionally center-cropping to `crop_to`,
    /// and extracts its patches.
    pub fn build(paths: &[PathBuf], n: u32, stride: u32, crop_to: Option<u32>) -> Result<Self> {
        validate_geometry(n, stride)?;
        if paths.is_empty() {
            return Err(Error::EmptyLibrary);
        }
        let images = paths
            .par_iter()
            .map(|path| {
                let load = || -> Result<GrayImage> {
                    let img = load_image(path)?;
                    match crop_to {
                        Some(side) => prepare_image(&img, side),
                        None => {
                            img.side()?;
                            Ok(img)
                        }
                    }
                };
                load().map_err(|e| Error::InImage {
                    path: path.clone(),
                    source: Box::new(e),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let names = paths.iter().map(|p| p.display().to_string()).collect();
        Self::from_images(names, &images, n, stride)
    }

    /// Builds a library from already prepared images; `names` label the
    /// manifest entries in the same order.
    pub fn from_images(
        names: Vec<String>,
        images: &[GrayImage],
        n: u32,
        stride: u32,
    ) -> Result<Self> {
        validate_geometry(n, stride)?;
        if images.is_empty() {
            return Err(Error::EmptyLibrary);
        }
        if names.len() != images.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} names for {} images",
                names.len(),
                images.len()
            )));
        }
        let side = images[0].side()?;
        for (name, img) in names.iter().zip(images) {
            let this = img.side().map_err(|e| Error::InImage {
                path: name.into(),
                source: Box::new(e),
            })?;
            if this != side {
                return Err(Error::InImage {
                    path: name.into(),
                    source: Box::new(Error::DimensionMismatch(format!(
                        "side {this} differs from the first image's {side}"
                    ))),
                });
            }
        }
        patch_count(side, n, stride)?;
        let per_image = images
            .par_iter()
            .enumerate()
            .map(|(i, img)| extract_indexed(img, i as u32, n, stride))
            .collect::<Result<Vec<_>>>()?;
        let total: usize = per_image.iter().map(Vec::len).sum();
        let mut refs = Vec::with_capacity(total);
        let mut data = Vec::with_capacity(total * (n * n) as usize);
        for (r, p) in per_image.into_iter().flatten() {
            refs.push(r);
            data.extend_from_slice(&p.values);
        }
        Ok(Self {
            n,
            stride,
            side,
            manifest: names,
            digest: dataset_digest(images),
            refs,
            data,
        })
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    pub fn stride(&self) -> u32 {
        self.stride
    }

    pub fn side(&self) -> u32 {
        self.side
    }

    /// Pixels per patch.
    pub fn dim(&self) -> usize {
        (self.n * self.n) as usize
    }

    pub fn len(&self) -> usize {
        self.refs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.refs.is_empty()
    }

    pub fn image_count(&self) -> usize {
        self.manifest.len()
    }

    pub fn manifest(&self) -> &[String] {
        &self.manifest
    }

    /// SHA-256 over the ordered image rasters the library was built from.
    pub fn digest(&self) -> &str {
        &self.digest
    }

    pub fn patch_ref(&self, index: usize) -> PatchRef {
        self.refs[index]
    }

    pub fn refs(&self) -> &[PatchRef] {
        &self.refs
    }

    pub fn patch_bytes(&self, index: usize) -> &[u8] {
        let d = self.dim();
        &self.data[index * d..(index + 1) * d]
    }

    pub fn patch(&self, index: usize) -> Patch {
        Patch {
            n: self.n,
            values: self.patch_bytes(index).to_vec(),
        }
    }

    pub fn iter(&self) -> impl ExactSizeIterator<Item = (PatchRef, &[u8])> {
        self.refs
            .iter()
            .copied()
            .zip(self.data.chunks_exact(self.dim()))
    }

    /// All patches centered, as a row-major `len() × dim()` matrix.
    pub fn centered(&self) -> CenteredSet {
        let d = self.dim();
        let mut data = vec![0.0; self.data.len()];
        let means = data
            .par_chunks_mut(d)
            .zip(self.data.par_chunks(d))
            .map(|(dst, src)| center_into(src, dst))
            .collect();
        CenteredSet {
            dim: d,
            data,
            means,
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let header = LibraryHeader {
            format_version: LIBRARY_VERSION,
            kind: LIBRARY_KIND.into(),
            n: self.n,
            stride: self.stride,
            side: self.side,
            count: self.len() as u64,
            manifest_digest: self.digest.clone(),
            manifest: self.manifest.clone(),
        };
        let mut payload = Vec::with_capacity(self.len() * (12 + self.dim()));
        for (r, bytes) in self.iter() {
            payload.extend_from_slice(&r.image_index.to_le_bytes());
            payload.extend_from_slice(&r.x.to_le_bytes());
            payload.extend_from_slice(&r.y.to_le_bytes());
            payload.extend_from_slice(bytes);
        }
        container::write(path, &header, &payload)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let (header, payload): (LibraryHeader, _) = container::read(path)?;
        if header.kind != LIBRARY_KIND || header.format_version != LIBRARY_VERSION {
            return Err(Error::corrupt(
                path,
                format!(
                    "expected {LIBRARY_KIND} v{LIBRARY_VERSION}, found {} v{}",
                    header.kind, header.format_version
                ),
            ));
        }
        let per_image = patch_count(header.side, header.n, header.stride)
            .map_err(|e| Error::corrupt(path, e.to_string()))?;
        let count = header.count as usize;
        if count != per_image * header.manifest.len() {
            return Err(Error::corrupt(path, "patch count disagrees with geometry"));
        }
        let d = (header.n * header.n) as usize;
        let mut reader = PayloadReader::new(&payload, path);
        let mut refs = Vec::with_capacity(count);
        let mut data = Vec::with_capacity(count * d);
        for _ in 0..count {
            let r = PatchRef {
                image_index: reader.u32()?,
                x: reader.u32()?,
                y: reader.u32()?,
                n: header.n,
            };
            if r.image_index as usize >= header.manifest.len()
                || r.x + header.n > header.side
                || r.y + header.n > header.side
            {
                return Err(Error::corrupt(
                    path,
                    format!("patch ref {r:?} out of range"),
                ));
            }
            refs.push(r);
            data.extend_from_slice(reader.bytes(d)?);
        }
        reader.finish()?;
        Ok(Self {
            n: header.n,
            stride: header.stride,
            side: header.side,
            manifest: header.manifest,
            digest: header.manifest_digest,
            refs,
            data,
        })
    }
}

fn dataset_digest(images: &[GrayImage]) -> String {
    let mut hasher = Sha256::new();
    for img in images {
        hasher.update(img.width().to_le_bytes());
        hasher.update(img.height().to_le_bytes());
        hasher.update(img.pixels());
    }
    hex::encode(hasher.finalize())
}

/// Centered patch vectors stored contiguously.
#[derive(Debug, Clone, PartialEq)]
pub struct CenteredSet {
    dim: usize,
    data: Vec<f64>,
    means: Vec<f64>,
}

impl CenteredSet {
    /// Wraps raw row-major vectors; `means` are zeros.
    pub fn from_rows(dim: usize, data: Vec<f64>) -> Result<Self> {
        if dim == 0 || !data.len().is_multiple_of(dim) {
            return Err(Error::DimensionMismatch(format!(
                "{} values do not split into rows of {dim}",
                data.len()
            )));
        }
        let means = vec![0.0; data.len() / dim];
        Ok(Self { dim, data, means })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.means.len()
    }

    pub fn is_empty(&self) -> bool {
        self.means.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> std::slice::ChunksExact<'_, f64> {
        self.data.chunks_exact(self.dim)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn means(&self) -> &[f64] {
        &self.means
    }
}
