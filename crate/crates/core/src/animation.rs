//! Frame sequences: the same matched target re-sampled with fresh randomness per frame.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::clustering::ClusterModel;
use crate::error::{Error, Result};
use crate::image_io::{load_image, save_image, GrayImage, ImageFormat};
use crate::patching::PatchLibrary;
use crate::reconstruction::{MatchedTarget, ReconstructOptions, ReconstructionGrid};

pub const MANIFEST_FILE: &str = "manifest.txt";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SequenceConfig {
    pub n: u32,
    pub k: usize,
    pub options: ReconstructOptions,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FrameSequence {
    pub seed: u64,
    pub config: SequenceConfig,
    pub frames: Vec<GrayImage>,
    pub grids: Vec<ReconstructionGrid>,
}

impl FrameSequence {
    pub fn frame_count(&self) -> usize {
        self.frames.len()
    }
}

/// Renders individual frames of one target; any frame can be produced in any order.
pub struct FrameRenderer<'a> {
    model: &'a ClusterModel,
    library: &'a PatchLibrary,
    matched: MatchedTarget,
    seed: u64,
    options: ReconstructOptions,
}

impl<'a> FrameRenderer<'a> {
    /// Matches the target once; every frame reuses these cluster choices.
    pub fn new(
        target: &GrayImage,
        model: &'a ClusterModel,
        library: &'a PatchLibrary,
        seed: u64,
        options: ReconstructOptions,
    ) -> Result<Self> {
        Ok(Self {
            matched: MatchedTarget::new(target, model, library)?,
            model,
            library,
            seed,
            options,
        })
    }

    pub fn frame(&self, index: u64) -> Result<(GrayImage, ReconstructionGrid)> {
        self.matched
            .render(self.model, self.library, self.seed, index, self.options)
    }
}

pub fn generate_frames(
    target: &GrayImage,
    model: &ClusterModel,
    library: &PatchLibrary,
    frame_count: usize,
    seed: u64,
    options: ReconstructOptions,
) -> Result<FrameSequence> {
    if frame_count < 1 {
        return Err(Error::InvalidParameter(
            "frame count must be at least 1".into(),
        ));
    }
    let renderer = FrameRenderer::new(target, model, library, seed, options)?;
    let (frames, grids) = (0..frame_count as u64)
        .map(|f| renderer.frame(f))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .unzip();
    Ok(FrameSequence {
        seed,
        config: SequenceConfig {
            n: model.n,
            k: model.k(),
            options,
        },
        frames,
        grids,
    })
}

pub fn frame_file_name(index: usize) -> String {
    format!("frame_{index:05}.png")
}

/// SHA-256 of the raw raster, independent of the PNG encoding.
pub fn pixel_digest(img: &GrayImage) -> String {
    let mut hasher = Sha256::new();
    hasher.update(img.width().to_le_bytes());
    hasher.update(img.height().to_le_bytes());
    hasher.update(img.pixels());
    hex::encode(hasher.finalize())
}

/// Parsed `manifest.txt`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FrameManifest {
    /// `key=value` settings, keyed by name.
    pub settings: BTreeMap<String, String>,
    /// `(file name, pixel digest)` per frame.
    pub frames: Vec<(String, String)>,
}

fn settings_block(seq: &FrameSequence) -> Result<String> {
    let first = &seq.frames[0];
    let mut out = String::new();
    let _ = writeln!(out, "seed={}", seq.seed);
    let _ = writeln!(out, "frame_count={}", seq.frame_count());
    let _ = writeln!(out, "n={}", seq.config.n);
    let _ = writeln!(out, "k={}", seq.config.k);
    let _ = writeln!(
        out,
        "histogram_match={}",
        seq.config.options.histogram_match
    );
    let _ = writeln!(out, "width={}", first.width());
    let _ = writeln!(out, "height={}", first.height());
    if seq
        .frames
        .iter()
        .any(|f| f.width() != first.width() || f.height() != first.height())
    {
        return Err(Error::DimensionMismatch("frames differ in size".into()));
    }
    Ok(out)
}

/// Writes `frame_00000.png`, `frame_00001.png`, … and `manifest.txt` into `dir`.
///
/// Manifest layout:
///
/// ```text
/// # patchmosaic frames v1
/// seed=<u64>
/// frame_count=<count>
/// n=<patch side>
/// k=<clusters>
/// histogram_match=<true|false>
/// width=<px>
/// height=<px>
/// config_hash=<sha256 hex of the key=value lines above>
/// frame <index> <file> <sha256 hex of width, height (u32 LE) and pixels>
/// ```
pub fn write_frames(seq: &FrameSequence, dir: &Path) -> Result<PathBuf> {
    if seq.frames.is_empty() {
        return Err(Error::InvalidParameter("no frames to write".into()));
    }
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let settings = settings_block(seq)?;
    let mut manifest = String::from("# patchmosaic frames v1\n");
    manifest.push_str(&settings);
    let _ = writeln!(
        manifest,
        "config_hash={}",
        hex::encode(Sha256::digest(settings.as_bytes()))
    );
    for (i, frame) in seq.frames.iter().enumerate() {
        let name = frame_file_name(i);
        save_image(frame, dir.join(&name), ImageFormat::Png)?;
        let _ = writeln!(manifest, "frame {i} {name} {}", pixel_digest(frame));
    }
    let path = dir.join(MANIFEST_FILE);
    std::fs::write(&path, manifest).map_err(|e| Error::io(&path, e))?;
    Ok(path)
}

pub fn read_manifest(dir: &Path) -> Result<FrameManifest> {
    let path = dir.join(MANIFEST_FILE);
    let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let mut settings = BTreeMap::new();
    let mut frames = Vec::new();
    for line in text
        .lines()
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
    {
        if let Some(rest) = line.strip_prefix("frame ") {
            let parts: Vec<&str> = rest.split_whitespace().collect();
            let [index, name, digest] = parts[..] else {
                return Err(Error::corrupt(&path, format!("bad frame line: {line}")));
            };
            if index.parse::<usize>().ok() != Some(frames.len()) {
                return Err(Error::corrupt(&path, format!("frame out of order: {line}")));
            }
            frames.push((name.to_owned(), digest.to_owned()));
        } else if let Some((k, v)) = line.split_once('=') {
            settings.insert(k.to_owned(), v.to_owned());
        } else {
            return Err(Error::corrupt(&path, format!("unrecognised line: {line}")));
        }
    }
    Ok(FrameManifest { settings, frames })
}

/// Reloads every frame listed in the manifest and checks its pixel digest.
pub fn verify_frames(dir: &Path) -> Result<FrameManifest> {
    let manifest = read_manifest(dir)?;
    for (name, digest) in &manifest.frames {
        let path = dir.join(name);
        let actual = pixel_digest(&load_image(&path)?);
        if &actual != digest {
            return Err(Error::corrupt(path, "pixel digest does not match manifest"));
        }
    }
    Ok(manifest)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clustering::{kmeans, KMeansParams};

    fn fixture() -> (PatchLibrary, ClusterModel, GrayImage) {
        let imgs: Vec<GrayImage> = (0..2)
            .map(|k| GrayImage::from_fn(16, 16, |x, y| ((x * 13 + y * 7 + k * 50) % 256) as u8))
            .collect();
        let lib = PatchLibrary::from_images(vec!["a".into(), "b".into()], &imgs, 4, 4).unwrap();
        let model = kmeans(&lib, &KMeansParams::new(3, 5)).unwrap();
        let target = GrayImage::from_fn(16, 16, |x, y| (x * 16 + y) as u8);
        (lib, model, target)
    }

    #[test]
    fn zero_frames_rejected() {
        let (lib, model, target) = fixture();
        assert!(generate_frames(&target, &model, &lib, 0, 1, Default::default()).is_err());
        let seq = FrameSequence {
            seed: 0,
            config: SequenceConfig {
                n: 4,
                k: 3,
                options: Default::default(),
            },
            frames: vec![],
            grids: vec![],
        };
        let dir = tempfile::tempdir().unwrap();
        assert!(write_frames(&seq, dir.path()).is_err());
    }

    #[test]
    fn write_and_verify() {
        let (lib, model, target) = fixture();
        let seq = generate_frames(&target, &model, &lib, 3, 77, Default::default()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        write_frames(&seq, dir.path()).unwrap();
        for name in [
            "frame_00000.png",
            "frame_00001.png",
            "frame_00002.png",
            MANIFEST_FILE,
        ] {
            assert!(dir.path().join(name).is_file(), "{name}");
        }
        let manifest = verify_frames(dir.path()).unwrap();
        assert_eq!(manifest.settings["seed"], "77");
        assert_eq!(manifest.settings["frame_count"], "3");
        assert_eq!(manifest.frames.len(), 3);

        // tamper with one frame
        save_image(
            &GrayImage::filled(16, 16, 0),
            dir.path().join("frame_00001.png"),
            ImageFormat::Png,
        )
        .unwrap();
        assert!(matches!(
            verify_frames(dir.path()),
            Err(Error::Corrupt { .. })
        ));
    }

    #[test]
    fn frame_index_only_changes_sampling() {
        let (lib, model, target) = fixture();
        let seq = generate_frames(&target, &model, &lib, 4, 3, Default::default()).unwrap();
        let first = seq.grids[0].clusters();
        for g in &seq.grids {
            assert_eq!(g.clusters(), first);
        }
    }
}
