//! Target matching and representative sampling.

use std::fmt::Write as _;
use std::path::Path;

use rand::Rng;
use rayon::prelude::*;

use crate::clustering::{nearest_centroid, ClusterModel};
use crate::error::{Error, Result};
use crate::image_io::GrayImage;
use crate::patching::{assemble, center_into, partition, Patch, PatchLibrary, PatchRef};
use crate::rng::cell_rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ReconstructOptions {
    /// Remap each sampled patch onto the histogram of the target patch it replaces.
    pub histogram_match: bool,
}

impl Default for ReconstructOptions {
    fn default() -> Self {
        Self {
            histogram_match: true,
        }
    }
}

/// What was placed in one grid cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Cell {
    pub cluster: usize,
    /// Position of the chosen patch within the cluster's member list.
    pub member_slot: usize,
    /// Library index of the chosen patch.
    pub patch_index: usize,
    pub patch_ref: PatchRef,
}

/// Row-major record of one reconstructed frame.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReconstructionGrid {
    pub grid_side: u32,
    pub n: u32,
    pub seed: u64,
    pub frame: u64,
    pub cells: Vec<Cell>,
}

impl ReconstructionGrid {
    pub fn clusters(&self) -> Vec<usize> {
        self.cells.iter().map(|c| c.cluster).collect()
    }

    /// Line-oriented sidecar: two `#` header lines, then one
    /// `cell_x cell_y cluster image_index src_x src_y` record per cell.
    pub fn to_sidecar(&self) -> String {
        let mut out = String::new();
        out.push_str("# patchmosaic grid v1\n");
        let _ = writeln!(
            out,
            "# grid_side={} n={} seed={} frame={}",
            self.grid_side, self.n, self.seed, self.frame
        );
        for (i, c) in self.cells.iter().enumerate() {
            let (cx, cy) = (i as u32 % self.grid_side, i as u32 / self.grid_side);
            let r = c.patch_ref;
            let _ = writeln!(
                out,
                "{cx} {cy} {} {} {} {}",
                c.cluster, r.image_index, r.x, r.y
            );
        }
        out
    }

    pub fn write_sidecar(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_sidecar()).map_err(|e| Error::io(path, e))
    }
}

/// One parsed sidecar record.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SidecarRecord {
    pub cell_x: u32,
    pub cell_y: u32,
    pub cluster: usize,
    pub patch_ref: PatchRef,
}

/// Parses a grid sidecar; `n` fills in the patch side of each reference.
pub fn parse_sidecar(text: &str, n: u32) -> Result<Vec<SidecarRecord>> {
    let path = Path::new("<sidecar>");
    text.lines()
        .filter(|l| !l.trim().is_empty() && !l.starts_with('#'))
        .map(|line| {
            let fields: Vec<u64> = line
                .split_whitespace()
                .map(str::parse)
                .collect::<std::result::Result<_, _>>()
                .map_err(|_| Error::corrupt(path, format!("bad record: {line}")))?;
            let [cx, cy, cluster, image, x, y] = fields[..] else {
                return Err(Error::corrupt(path, format!("expected 6 fields: {line}")));
            };
            Ok(SidecarRecord {
                cell_x: cx as u32,
                cell_y: cy as u32,
                cluster: cluster as usize,
                patch_ref: PatchRef {
                    image_index: image as u32,
                    x: x as u32,
                    y: y as u32,
                    n,
                },
            })
        })
        .collect()
}

fn check_target(target: &GrayImage, n: u32) -> Result<u32> {
    let side = target.side()?;
    if n > side || side % n != 0 {
        return Err(Error::DimensionMismatch(format!(
            "target side {side} is not divisible by patch side {n}"
        )));
    }
    Ok(side)
}

fn match_patches(patches: &[Patch], model: &ClusterModel) -> Vec<usize> {
    patches
        .par_iter()
        .map(|p| {
            let mut centered = vec![0.0; p.values().len()];
            center_into(p.values(), &mut centered);
            nearest_centroid(&centered, &model.centroids)
        })
        .collect()
}

/// Nearest cluster for each non-overlapping target patch, row-major.
pub fn match_target(target: &GrayImage, model: &ClusterModel) -> Result<Vec<usize>> {
    check_target(target, model.n)?;
    let patches = partition(target, model.n)?;
    Ok(match_patches(&patches, model))
}

/// Uniformly picks one member of cluster `j`, returning its slot and provenance.
pub fn sample_member(
    j: usize,
    model: &ClusterModel,
    rng: &mut impl Rng,
) -> Result<(usize, PatchRef)> {
    let refs = model
        .member_refs
        .get(j)
        .ok_or_else(|| Error::DimensionMismatch(format!("no cluster {j}")))?;
    if refs.is_empty() {
        return Err(Error::EmptyCluster(j));
    }
    let slot = rng.random_range(0..refs.len());
    Ok((slot, refs[slot]))
}

/// Maps `source` onto the intensity distribution of `reference`.
///
/// Each intensity v becomes the smallest w with `CDF_ref(w) >= CDF_src(v)`.
/// Both patches have the same pixel count, so the CDFs compare as integer counts.
pub fn histogram_match(source: &Patch, reference: &Patch) -> Result<Patch> {
    if source.n() != reference.n() {
        return Err(Error::DimensionMismatch(format!(
            "histogram match between sides {} and {}",
            source.n(),
            reference.n()
        )));
    }
    let cdf = |values: &[u8]| {
        let mut counts = [0u32; 256];
        for &v in values {
            counts[v as usize] += 1;
        }
        let mut acc = 0;
        counts.map(|c| {
            acc += c;
            acc
        })
    };
    let src = cdf(source.values());
    let reference_cdf = cdf(reference.values());
    let mut lut = [0u8; 256];
    let mut w = 0usize;
    for v in 0..256 {
        while reference_cdf[w] < src[v] {
            w += 1;
        }
        lut[v] = w as u8;
    }
    Patch::new(
        source.n(),
        source.values().iter().map(|&v| lut[v as usize]).collect(),
    )
}

/// Per-target state shared by every frame.
pub(crate) struct MatchedTarget {
    pub side: u32,
    pub patches: Vec<Patch>,
    pub clusters: Vec<usize>,
}

impl MatchedTarget {
    pub fn new(target: &GrayImage, model: &ClusterModel, library: &PatchLibrary) -> Result<Self> {
        model.check_library(library)?;
        let side = check_target(target, model.n)?;
        let patches = partition(target, model.n)?;
        let clusters = match_patches(&patches, model);
        if let Some(&j) = clusters.iter().find(|&&j| model.members[j].is_empty()) {
            return Err(Error::EmptyCluster(j));
        }
        Ok(Self {
            side,
            patches,
            clusters,
        })
    }

    pub fn render(
        &self,
        model: &ClusterModel,
        library: &PatchLibrary,
        seed: u64,
        frame: u64,
        options: ReconstructOptions,
    ) -> Result<(GrayImage, ReconstructionGrid)> {
        let placed = self
            .clusters
            .par_iter()
            .zip(self.patches.par_iter())
            .enumerate()
            .map(|(cell, (&j, original))| {
                let mut rng = cell_rng(seed, frame, cell as u64);
                let (slot, patch_ref) = sample_member(j, model, &mut rng)?;
                let patch_index = model.members[j][slot] as usize;
                let mut patch = library.patch(patch_index);
                if options.histogram_match {
                    patch = histogram_match(&patch, original)?;
                }
                Ok((
                    patch,
                    Cell {
                        cluster: j,
                        member_slot: slot,
                        patch_index,
                        patch_ref,
                    },
                ))
            })
            .collect::<Result<Vec<_>>>()?;
        let (patches, cells): (Vec<Patch>, Vec<Cell>) = placed.into_iter().unzip();
        let image = assemble(&patches, self.side)?;
        Ok((
            image,
            ReconstructionGrid {
                grid_side: self.side / model.n,
                n: model.n,
                seed,
                frame,
                cells,
            },
        ))
    }
}

/// Rebuilds `target` from library patches drawn from the matched clusters.
pub fn reconstruct(
    target: &GrayImage,
    model: &ClusterModel,
    library: &PatchLibrary,
    seed: u64,
    options: ReconstructOptions,
) -> Result<(GrayImage, ReconstructionGrid)> {
    MatchedTarget::new(target, model, library)?.render(model, library, seed, 0, options)
}
