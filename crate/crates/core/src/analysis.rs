//! Principal components, DCT bases and montage rendering for patch corpora.

use std::f64::consts::PI;
use std::path::Path;

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::clustering::ClusterModel;
use crate::container::{self, PayloadReader};
use crate::error::{Error, Result};
use crate::image_io::GrayImage;
use crate::patching::PatchLibrary;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ComponentOrdering {
    PcaDescendingEigenvalue,
    DctZigzag,
    ClusterSizeDescending,
}

/// A list of n×n patterns stored as row-major vectors of length n².
#[derive(Debug, Clone, PartialEq)]
pub struct ComponentGrid {
    pub n: u32,
    pub ordering: ComponentOrdering,
    pub vectors: Vec<Vec<f64>>,
    /// PCA eigenvalues or cluster sizes, aligned with `vectors`; empty for DCT.
    pub weights: Vec<f64>,
}

impl ComponentGrid {
    pub fn count(&self) -> usize {
        self.vectors.len()
    }

    pub fn montage(&self, columns: u32) -> Result<GrayImage> {
        render_montage(&self.vectors, self.n, columns)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let header = ComponentHeader {
            format_version: 1,
            kind: COMPONENT_KIND.into(),
            n: self.n,
            count: self.count(),
            ordering: self.ordering,
            weights: self.weights.clone(),
        };
        let payload: Vec<u8> = self
            .vectors
            .iter()
            .flatten()
            .flat_map(|v| v.to_le_bytes())
            .collect();
        container::write(path, &header, &payload)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let (h, payload): (ComponentHeader, _) = container::read(path)?;
        if h.kind != COMPONENT_KIND || h.format_version != 1 {
            return Err(Error::corrupt(path, "not a component dump"));
        }
        let dim = (h.n * h.n) as usize;
        let mut reader = PayloadReader::new(&payload, path);
        let mut vectors = Vec::with_capacity(h.count);
        for _ in 0..h.count {
            vectors.push((0..dim).map(|_| reader.f64()).collect::<Result<Vec<_>>>()?);
        }
        reader.finish()?;
        Ok(Self {
            n: h.n,
            ordering: h.ordering,
            vectors,
            weights: h.weights,
        })
    }
}

#[derive(Serialize, Deserialize)]
struct ComponentHeader {
    format_version: u32,
    kind: String,
    n: u32,
    count: usize,
    ordering: ComponentOrdering,
    weights: Vec<f64>,
}

const COMPONENT_KIND: &str = "components";

/// Flips `v` so its largest-magnitude coordinate (first one on ties) is positive.
fn fix_sign(v: &mut [f64]) {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if x.abs() > v[best].abs() {
            best = i;
        }
    }
    if v[best] < 0.0 {
        v.iter_mut().for_each(|x| *x = -*x);
    }
}

/// Top `m` eigenvectors of the covariance of the library's centered patches.
pub fn pca_components(library: &PatchLibrary, m: usize) -> Result<ComponentGrid> {
    if library.is_empty() {
        return Err(Error::EmptyLibrary);
    }
    let centered = library.centered();
    pca_of_rows(centered.as_slice(), library.dim(), library.n(), m)
}

/// PCA over arbitrary row-major vectors of length n².
pub fn pca_of_rows(rows: &[f64], dim: usize, n: u32, m: usize) -> Result<ComponentGrid> {
    if dim != (n * n) as usize || rows.is_empty() || !rows.len().is_multiple_of(dim) {
        return Err(Error::DimensionMismatch(format!(
            "{} values are not rows of length {}",
            rows.len(),
            n * n
        )));
    }
    if m < 1 || m > dim {
        return Err(Error::InvalidParameter(format!(
            "component count {m} outside 1..={dim}"
        )));
    }
    let count = rows.len() / dim;
    let mut data = DMatrix::from_row_slice(count, dim, rows);
    let mean = data.row_mean();
    for mut row in data.row_iter_mut() {
        row -= &mean;
    }
    let cov = data.tr_mul(&data) / count as f64;
    if cov.trace() <= 1e-12 {
        return Err(Error::DegenerateCorpus);
    }
    let eig = SymmetricEigen::new(cov);
    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[b]
            .total_cmp(&eig.eigenvalues[a])
            .then(a.cmp(&b))
    });
    let vectors = order[..m]
        .iter()
        .map(|&j| {
            let mut v: Vec<f64> = eig.eigenvectors.column(j).iter().copied().collect();
            fix_sign(&mut v);
            v
        })
        .collect();
    Ok(ComponentGrid {
        n,
        ordering: ComponentOrdering::PcaDescendingEigenvalue,
        vectors,
        weights: order[..m].iter().map(|&j| eig.eigenvalues[j]).collect(),
    })
}

/// Frequency pairs `(u, v)` by ascending `u + v`, then ascending `u`.
pub fn zigzag_order(n: u32) -> Vec<(u32, u32)> {
    let mut pairs: Vec<(u32, u32)> = (0..n).flat_map(|v| (0..n).map(move |u| (u, v))).collect();
    pairs.sort_by_key(|&(u, v)| (u + v, u));
    pairs
}

fn dct_alpha(freq: u32, n: u32) -> f64 {
    if freq == 0 {
        (1.0 / n as f64).sqrt()
    } else {
        (2.0 / n as f64).sqrt()
    }
}

/// Orthonormal 2-D DCT-II basis function for horizontal frequency `u` and
/// vertical frequency `v`, row-major over (y, x).
pub fn dct_function(n: u32, u: u32, v: u32) -> Vec<f64> {
    let nf = n as f64;
    let scale = dct_alpha(u, n) * dct_alpha(v, n);
    let mut out = Vec::with_capacity((n * n) as usize);
    for y in 0..n {
        let cy = (PI * (2 * y + 1) as f64 * v as f64 / (2.0 * nf)).cos();
        for x in 0..n {
            let cx = (PI * (2 * x + 1) as f64 * u as f64 / (2.0 * nf)).cos();
            out.push(scale * cx * cy);
        }
    }
    out
}

/// First `m` DCT basis functions in zigzag order.
pub fn dct_basis(n: u32, m: usize) -> Result<ComponentGrid> {
    if n == 0 {
        return Err(Error::InvalidParameter(
            "patch side must be positive".into(),
        ));
    }
    let dim = (n * n) as usize;
    if m < 1 || m > dim {
        return Err(Error::InvalidParameter(format!(
            "component count {m} outside 1..={dim}"
        )));
    }
    let vectors = zigzag_order(n)[..m]
        .iter()
        .map(|&(u, v)| dct_function(n, u, v))
        .collect();
    Ok(ComponentGrid {
        n,
        ordering: ComponentOrdering::DctZigzag,
        vectors,
        weights: Vec::new(),
    })
}

/// Coefficients of `values` (row-major n×n) against the full zigzag basis.
pub fn dct_coefficients(values: &[f64], n: u32) -> Result<Vec<f64>> {
    if values.len() != (n * n) as usize {
        return Err(Error::DimensionMismatch(format!(
            "{} values for a {n}x{n} patch",
            values.len()
        )));
    }
    Ok(zigzag_order(n)
        .into_iter()
        .map(|(u, v)| {
            dct_function(n, u, v)
                .iter()
                .zip(values)
                .map(|(b, x)| b * x)
                .sum()
        })
        .collect())
}

/// Model centroids ordered by descending cluster size.
pub fn centroid_grid(model: &ClusterModel) -> ComponentGrid {
    let order = model.clusters_by_size();
    ComponentGrid {
        n: model.n,
        ordering: ComponentOrdering::ClusterSizeDescending,
        vectors: order
            .iter()
            .map(|&j| model.centroids.row(j).to_vec())
            .collect(),
        weights: order
            .iter()
            .map(|&j| model.members[j].len() as f64)
            .collect(),
    }
}

/// Tiles n×n vectors row-major, `columns` per row, separated by 1-pixel black
/// lines. Each tile is stretched independently so its minimum maps to 0 and its
/// maximum to 255; constant tiles render as 128.
pub fn render_montage(vectors: &[Vec<f64>], n: u32, columns: u32) -> Result<GrayImage> {
    if vectors.is_empty() {
        return Err(Error::InvalidParameter("nothing to render".into()));
    }
    if columns == 0 || n == 0 {
        return Err(Error::InvalidParameter(
            "columns and tile side must be positive".into(),
        ));
    }
    let dim = (n * n) as usize;
    if let Some(v) = vectors.iter().find(|v| v.len() != dim) {
        return Err(Error::DimensionMismatch(format!(
            "tile of {} values, expected {dim}",
            v.len()
        )));
    }
    let cols = columns.min(vectors.len() as u32);
    let rows = (vectors.len() as u32).div_ceil(cols);
    let width = cols * n + (cols - 1);
    let height = rows * n + (rows - 1);
    let mut pixels = vec![0u8; width as usize * height as usize];
    for (i, v) in vectors.iter().enumerate() {
        let (lo, hi) = v
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| {
                (lo.min(x), hi.max(x))
            });
        let x0 = (i as u32 % cols) * (n + 1);
        let y0 = (i as u32 / cols) * (n + 1);
        for (k, &x) in v.iter().enumerate() {
            let value = if hi > lo {
                ((x - lo) / (hi - lo) * 255.0).round().clamp(0.0, 255.0) as u8
            } else {
                128
            };
            let px = x0 + k as u32 % n;
            let py = y0 + k as u32 / n;
            pixels[py as usize * width as usize + px as usize] = value;
        }
    }
    GrayImage::new(width, height, pixels)
}
