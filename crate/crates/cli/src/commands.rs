use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::Args;
use patchmosaic::analysis::ComponentGrid;
use patchmosaic::animation::frame_file_name;
use patchmosaic::patching::{read_manifest, validate_geometry};
use patchmosaic::{
    centroid_grid, dct_basis, generate_frames, kmeans, load_image, patch_count, pca_components,
    prepare_image, reconstruct, save_image, write_frames, ClusterModel, GrayImage, ImageFormat,
    InitMethod, KMeansParams, PatchLibrary, ReconstructOptions,
};

use crate::config::{run_file_for, ConfigFile, Settings};
use crate::error::CliError;

#[derive(Debug, Args)]
pub struct ExtractArgs {
    /// Text file listing one image path per line
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    /// Patch side n, a power of two [default: 32]
    #[arg(long)]
    pub n: Option<u32>,
    /// Stride s, a power of two no larger than n [default: n]
    #[arg(long)]
    pub stride: Option<u32>,
    /// Center-crop every image to this power-of-two side first
    #[arg(long)]
    pub crop: Option<u32>,
    /// Patch library file to write
    #[arg(long, short)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ClusterArgs {
    /// Patch library written by `extract`
    #[arg(long)]
    pub library: Option<PathBuf>,
    /// Number of clusters. Larger patches need fewer: k=166 suits 128x128
    /// patches, k=512 suits 8x8
    #[arg(long, short)]
    pub k: Option<usize>,
    /// Stop when every centroid moves less than this [default: 1e-4]
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// Iteration cap per run [default: 300]
    #[arg(long)]
    pub max_iter: Option<usize>,
    /// Independent runs; the lowest objective wins [default: 3]
    #[arg(long)]
    pub restarts: Option<usize>,
    /// Initialization: random or plusplus [default: random]
    #[arg(long)]
    pub init: Option<Init>,
    /// Master seed; generated and printed when absent
    #[arg(long)]
    pub seed: Option<u64>,
    /// Model file to write
    #[arg(long, short)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TargetArgs {
    /// Model written by `cluster`
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Library the model was built from
    #[arg(long)]
    pub library: Option<PathBuf>,
    /// Image to recompose
    #[arg(long)]
    pub target: Option<PathBuf>,
    /// Center-crop the target to this power-of-two side first
    #[arg(long)]
    pub crop: Option<u32>,
    /// Seed for member sampling; generated and printed when absent
    #[arg(long)]
    pub seed: Option<u64>,
    /// Remap each sampled patch to the target cell's histogram [default: true]
    #[arg(long)]
    pub histogram_match: Option<bool>,
}

#[derive(Debug, Args)]
pub struct ReconstructArgs {
    #[command(flatten)]
    pub target: TargetArgs,
    /// Output image (.png or .pgm)
    #[arg(long, short)]
    pub output: Option<PathBuf>,
    /// Grid sidecar [default: <output>.grid.txt]
    #[arg(long)]
    pub grid: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct AnimateArgs {
    #[command(flatten)]
    pub target: TargetArgs,
    /// Number of frames [default: 10]
    #[arg(long)]
    pub frames: Option<usize>,
    /// Output directory for frames and manifest.txt
    #[arg(long, short)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    /// pca, dct or centroids
    #[arg(long)]
    pub mode: Option<Mode>,
    /// Library (pca; also sets n for dct)
    #[arg(long)]
    pub library: Option<PathBuf>,
    /// Model (centroids)
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Patch side for dct without a library
    #[arg(long)]
    pub n: Option<u32>,
    /// Number of components to show [default: 16 for pca, n*n for dct, all for centroids]
    #[arg(long, short)]
    pub components: Option<usize>,
    /// Montage columns [default: ceil(sqrt(components))]
    #[arg(long)]
    pub columns: Option<u32>,
    /// Montage image (.png or .pgm)
    #[arg(long, short)]
    pub output: Option<PathBuf>,
    /// Also save the raw component vectors
    #[arg(long)]
    pub vectors: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Init {
    Random,
    PlusPlus,
}

impl FromStr for Init {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "random" => Ok(Self::Random),
            "plusplus" | "kmeans++" => Ok(Self::PlusPlus),
            _ => Err(format!("unknown init `{s}` (random, plusplus)")),
        }
    }
}

impl fmt::Display for Init {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Random => "random",
            Self::PlusPlus => "plusplus",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Pca,
    Dct,
    Centroids,
}

impl FromStr for Mode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "pca" => Ok(Self::Pca),
            "dct" => Ok(Self::Dct),
            "centroids" => Ok(Self::Centroids),
            _ => Err(format!("unknown mode `{s}` (pca, dct, centroids)")),
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Pca => "pca",
            Self::Dct => "dct",
            Self::Centroids => "centroids",
        })
    }
}

fn image_format(path: &Path) -> Result<ImageFormat, CliError> {
    ImageFormat::from_path(path).ok_or_else(|| {
        CliError::usage(format!(
            "{}: output must end in .png or .pgm",
            path.display()
        ))
    })
}

fn seed(s: &mut Settings, flag: Option<u64>) -> Result<u64, CliError> {
    if let Some(v) = s.optional("seed", flag)? {
        return Ok(v);
    }
    let v: u64 = rand::random();
    println!("seed={v} (generated)");
    s.record("seed", v);
    Ok(v)
}

pub fn extract(args: ExtractArgs, file: ConfigFile) -> Result<(), CliError> {
    let mut s = Settings::new("extract", file)?;
    let manifest = s.required_path("manifest", args.manifest)?;
    let n = s.or("n", args.n, 32)?;
    let stride = s.or("stride", args.stride, n)?;
    let crop = s.optional("crop", args.crop)?;
    let output = s.required_path("output", args.output)?;
    s.finish()?;
    validate_geometry(n, stride)?;
    if let Some(side) = crop {
        patch_count(side, n, stride)?;
    }
    if !manifest.is_file() {
        return Err(CliError::usage(format!(
            "manifest {} is not a readable file",
            manifest.display()
        )));
    }

    let paths = read_manifest(&manifest)?;
    let library = PatchLibrary::build(&paths, n, stride, crop)?;
    library.save(&output)?;
    s.write(&run_file_for(&output))?;
    let per_image = library.len() / library.image_count();
    println!(
        "M={} T={} L={} N={} n={n} s={stride}",
        library.len(),
        library.image_count(),
        per_image,
        library.side()
    );
    Ok(())
}

pub fn cluster(args: ClusterArgs, file: ConfigFile) -> Result<(), CliError> {
    let mut s = Settings::new("cluster", file)?;
    let library_path = s.required_path("library", args.library)?;
    let k = s.required("k", args.k)?;
    let epsilon = s.or("epsilon", args.epsilon, KMeansParams::DEFAULT_EPSILON)?;
    let max_iter = s.or("max_iter", args.max_iter, KMeansParams::DEFAULT_MAX_ITER)?;
    let restarts = s.or("restarts", args.restarts, KMeansParams::DEFAULT_RESTARTS)?;
    let init = s.or("init", args.init, Init::Random)?;
    let output = s.required_path("output", args.output)?;
    let seed = seed(&mut s, args.seed)?;
    s.finish()?;

    let library = PatchLibrary::load(&library_path)?;
    let params = KMeansParams {
        k,
        epsilon,
        max_iter,
        restarts,
        seed,
        init: match init {
            Init::Random => InitMethod::Random,
            Init::PlusPlus => InitMethod::PlusPlus,
        },
    };
    let model = kmeans(&library, &params)?;
    model.save(&output)?;
    s.write(&run_file_for(&output))?;
    println!(
        "k={} M={} J={} iterations={} converged={} best_run={} seed={seed}",
        model.k(),
        library.len(),
        model.final_objective,
        model.iterations_run,
        model.converged,
        model.best_run
    );
    Ok(())
}

struct Loaded {
    model: ClusterModel,
    library: PatchLibrary,
    target: GrayImage,
    seed: u64,
    options: ReconstructOptions,
}

fn resolve_target(
    s: &mut Settings,
    args: TargetArgs,
) -> Result<impl FnOnce() -> Result<Loaded, CliError>, CliError> {
    let model_path = s.required_path("model", args.model)?;
    let library_path = s.required_path("library", args.library)?;
    let target_path = s.required_path("target", args.target)?;
    let crop = s.optional("crop", args.crop)?;
    let histogram_match = s.or("histogram_match", args.histogram_match, true)?;
    let seed = seed(s, args.seed)?;
    Ok(move || {
        let model = ClusterModel::load(&model_path)?;
        let library = PatchLibrary::load(&library_path)?;
        let mut target = load_image(&target_path)?;
        if let Some(side) = crop {
            target = prepare_image(&target, side)?;
        }
        Ok(Loaded {
            model,
            library,
            target,
            seed,
            options: ReconstructOptions { histogram_match },
        })
    })
}

pub fn reconstruct_cmd(args: ReconstructArgs, file: ConfigFile) -> Result<(), CliError> {
    let mut s = Settings::new("reconstruct", file)?;
    let load = resolve_target(&mut s, args.target)?;
    let output = s.required_path("output", args.output)?;
    let grid_path = s.path("grid", args.grid)?;
    s.finish()?;
    let format = image_format(&output)?;
    let grid_path = grid_path.unwrap_or_else(|| {
        let mut name = output.as_os_str().to_owned();
        name.push(".grid.txt");
        PathBuf::from(name)
    });

    let run = load()?;
    let (image, grid) = reconstruct(&run.target, &run.model, &run.library, run.seed, run.options)?;
    save_image(&image, &output, format)?;
    grid.write_sidecar(&grid_path)?;
    s.write(&run_file_for(&output))?;
    println!(
        "cells={} side={} seed={}",
        grid.cells.len(),
        image.width(),
        run.seed
    );
    Ok(())
}

pub fn animate(args: AnimateArgs, file: ConfigFile) -> Result<(), CliError> {
    let mut s = Settings::new("animate", file)?;
    let load = resolve_target(&mut s, args.target)?;
    let frames = s.or("frames", args.frames, 10)?;
    let output = s.required_path("output", args.output)?;
    s.finish()?;
    if frames < 1 {
        return Err(CliError::usage("--frames must be at least 1"));
    }

    let run = load()?;
    let seq = generate_frames(
        &run.target,
        &run.model,
        &run.library,
        frames,
        run.seed,
        run.options,
    )?;
    let manifest = write_frames(&seq, &output)?;
    for (i, grid) in seq.grids.iter().enumerate() {
        let name = frame_file_name(i).replace(".png", ".grid.txt");
        grid.write_sidecar(&output.join(name))?;
    }
    s.write(&output.join("run.conf"))?;
    println!(
        "frames={frames} seed={} manifest={}",
        run.seed,
        manifest.display()
    );
    println!(
        "encode with: ffmpeg -framerate 12 -i {}/frame_%05d.png -c:v libx264 -pix_fmt yuv420p movie.mp4",
        output.display()
    );
    Ok(())
}

pub fn analyze(args: AnalyzeArgs, file: ConfigFile) -> Result<(), CliError> {
    let mut s = Settings::new("analyze", file)?;
    let mode = s.required("mode", args.mode)?;
    let library_path = s.path("library", args.library)?;
    let model_path = s.path("model", args.model)?;
    let n = s.optional("n", args.n)?;
    let components = s.optional("components", args.components)?;
    let columns = s.optional("columns", args.columns)?;
    let output = s.required_path("output", args.output)?;
    let vectors_path = s.path("vectors", args.vectors)?;
    s.finish()?;
    let format = image_format(&output)?;
    if components == Some(0) {
        return Err(CliError::usage("--components must be at least 1"));
    }

    let grid: ComponentGrid = match mode {
        Mode::Pca => {
            let path = library_path.ok_or_else(|| CliError::usage("pca needs --library"))?;
            let library = PatchLibrary::load(&path)?;
            let m = components.unwrap_or(16).min(library.dim());
            pca_components(&library, m)?
        }
        Mode::Dct => {
            let n = match (n, &library_path) {
                (Some(n), _) => n,
                (None, Some(path)) => PatchLibrary::load(path)?.n(),
                (None, None) => return Err(CliError::usage("dct needs --n or --library")),
            };
            let m = components.unwrap_or((n * n) as usize);
            dct_basis(n, m)?
        }
        Mode::Centroids => {
            let path = model_path.ok_or_else(|| CliError::usage("centroids needs --model"))?;
            let mut grid = centroid_grid(&ClusterModel::load(&path)?);
            if let Some(m) = components {
                grid.vectors.truncate(m);
                grid.weights.truncate(m);
            }
            grid
        }
    };
    let columns = columns.unwrap_or_else(|| (grid.count() as f64).sqrt().ceil() as u32);
    let montage = grid.montage(columns)?;
    save_image(&montage, &output, format)?;
    if let Some(path) = &vectors_path {
        grid.save(path)?;
    }
    s.write(&run_file_for(&output))?;
    let shown: Vec<String> = grid
        .weights
        .iter()
        .take(8)
        .map(|w| format!("{w:.4}"))
        .collect();
    println!(
        "mode={mode} components={} size={}x{} weights=[{}]",
        grid.count(),
        montage.width(),
        montage.height(),
        shown.join(", ")
    );
    Ok(())
}
