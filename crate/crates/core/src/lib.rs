//! Patch-mosaic reconstruction and animation of grayscale images.
//!
//! The pipeline has three phases:
//!
//! 1. cut a dataset of square grayscale images into n×n patches
//!    ([`PatchLibrary`]), center them and cluster them with Lloyd's k-means
//!    ([`kmeans`]);
//! 2. cut a target image into the same grid, match every centered target patch
//!    to its nearest centroid and replace it with a randomly drawn original
//!    member of that cluster ([`reconstruct`]), optionally histogram-matched to
//!    the patch it replaces;
//! 3. repeat the random draw per frame to obtain a flickering sequence
//!    ([`generate_frames`]).
//!
//! All randomness is derived from a single `u64` seed through per-item
//! streams, and all reductions run in a fixed order, so outputs are
//! bit-identical across runs and rayon pool sizes.

pub mod analysis;
pub mod animation;
pub mod clustering;
pub mod container;
mod error;
pub mod image_io;
pub mod patching;
pub mod reconstruction;
pub mod rng;

pub use analysis::{centroid_grid, dct_basis, pca_components, render_montage, ComponentGrid};
pub use animation::{generate_frames, verify_frames, write_frames, FrameRenderer, FrameSequence};
pub use clustering::{
    assign_step, kmeans, nearest_cluster, objective, update_step, ClusterModel, InitMethod,
    KMeansParams,
};
pub use error::{Error, ErrorKind, Result};
pub use image_io::{load_image, prepare_image, save_image, to_grayscale, GrayImage, ImageFormat};
pub use patching::{
    assemble, center_patch, extract_patches, patch_count, CenteredPatch, Patch, PatchLibrary,
    PatchRef,
};
pub use reconstruction::{
    histogram_match, match_target, reconstruct, sample_member, ReconstructOptions,
    ReconstructionGrid,
};
