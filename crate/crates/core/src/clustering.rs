//! Lloyd's k-means over centered patch vectors.
//!
//! Every reduction runs in ascending patch-index order and parallel loops only
//! compute independent per-item values, so the result is bit-identical for any
//! rayon pool size.

use std::path::Path;

use rand::seq::index;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::container::{self, PayloadReader};
use crate::error::{Error, Result};
use crate::patching::{CenteredPatch, CenteredSet, PatchLibrary, PatchRef};
use crate::rng::restart_rng;

/// k row vectors of equal dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct Centroids {
    dim: usize,
    data: Vec<f64>,
}

impl Centroids {
    pub fn from_rows(dim: usize, data: Vec<f64>) -> Result<Self> {
        if dim == 0 || data.is_empty() || !data.len().is_multiple_of(dim) {
            return Err(Error::DimensionMismatch(format!(
                "{} values do not form centroids of dimension {dim}",
                data.len()
            )));
        }
        Ok(Self { dim, data })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn k(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn row(&self, j: usize) -> &[f64] {
        &self.data[j * self.dim..(j + 1) * self.dim]
    }

    fn row_mut(&mut self, j: usize) -> &mut [f64] {
        &mut self.data[j * self.dim..(j + 1) * self.dim]
    }

    pub fn rows(&self) -> std::slice::ChunksExact<'_, f64> {
        self.data.chunks_exact(self.dim)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }
}

pub fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Squared distance, abandoned once the running sum exceeds `bound`.
///
/// Partial sums of non-negative terms never decrease under round-to-nearest,
/// so an abandoned candidate could not have been strictly closer.
fn squared_distance_bounded(a: &[f64], b: &[f64], bound: f64) -> f64 {
    let mut acc = 0.0;
    for (ca, cb) in a.chunks(32).zip(b.chunks(32)) {
        for (x, y) in ca.iter().zip(cb) {
            acc += (x - y) * (x - y);
        }
        if acc > bound {
            return acc;
        }
    }
    acc
}

/// Index of the closest centroid; ties go to the lowest index.
pub fn nearest_centroid(query: &[f64], centroids: &Centroids) -> usize {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (j, c) in centroids.rows().enumerate() {
        let d = squared_distance_bounded(query, c, best_d);
        if d < best_d {
            best = j;
            best_d = d;
        }
    }
    best
}

/// Cluster whose centroid is closest to `query`.
pub fn nearest_cluster(query: &CenteredPatch, model: &ClusterModel) -> Result<usize> {
    if query.values.len() != model.centroids.dim() {
        return Err(Error::DimensionMismatch(format!(
            "query has {} values, model centroids have {}",
            query.values.len(),
            model.centroids.dim()
        )));
    }
    Ok(nearest_centroid(&query.values, &model.centroids))
}

/// Within-cluster sum of squared distances, accumulated in patch order.
pub fn objective(
    assignments: &[usize],
    centroids: &Centroids,
    patches: &CenteredSet,
) -> Result<f64> {
    if patches.dim() != centroids.dim() || assignments.len() != patches.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} assignments for {} patches of dim {} against centroids of dim {}",
            assignments.len(),
            patches.len(),
            patches.dim(),
            centroids.dim()
        )));
    }
    if let Some(&j) = assignments.iter().find(|&&j| j >= centroids.k()) {
        return Err(Error::DimensionMismatch(format!(
            "assignment to cluster {j} but only {} centroids",
            centroids.k()
        )));
    }
    let terms: Vec<f64> = assignments
        .par_iter()
        .enumerate()
        .map(|(i, &j)| squared_distance(patches.row(i), centroids.row(j)))
        .collect();
    Ok(terms.iter().sum())
}

/// Assigns every patch to its nearest centroid.
pub fn assign_step(patches: &CenteredSet, centroids: &Centroids) -> Vec<usize> {
    (0..patches.len())
        .into_par_iter()
        .map(|i| nearest_centroid(patches.row(i), centroids))
        .collect()
}

fn member_lists(assignments: &[usize], k: usize) -> Vec<Vec<usize>> {
    let mut members = vec![Vec::new(); k];
    for (i, &j) in assignments.iter().enumerate() {
        members[j].push(i);
    }
    members
}

/// Recomputes each centroid as the mean of its members.
///
/// Clusters without members are returned in the second element and get a zero
/// centroid.
pub fn update_step(
    patches: &CenteredSet,
    assignments: &[usize],
    k: usize,
) -> (Centroids, Vec<usize>) {
    let dim = patches.dim();
    let members = member_lists(assignments, k);
    let mut data = vec![0.0; k * dim];
    data.par_chunks_mut(dim)
        .zip(members.par_iter())
        .for_each(|(centroid, list)| {
            if list.is_empty() {
                return;
            }
            for &i in list {
                for (c, v) in centroid.iter_mut().zip(patches.row(i)) {
                    *c += v;
                }
            }
            let count = list.len() as f64;
            centroid.iter_mut().for_each(|c| *c /= count);
        });
    let empty = members
        .iter()
        .enumerate()
        .filter(|(_, m)| m.is_empty())
        .map(|(j, _)| j)
        .collect();
    (Centroids { dim, data }, empty)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitMethod {
    /// k distinct patches drawn uniformly without replacement.
    #[default]
    Random,
    /// D²-weighted seeding.
    PlusPlus,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KMeansParams {
    pub k: usize,
    /// A run converges once no centroid moves this far (intensity units).
    pub epsilon: f64,
    pub max_iter: usize,
    pub restarts: usize,
    pub seed: u64,
    pub init: InitMethod,
}

impl KMeansParams {
    pub const DEFAULT_EPSILON: f64 = 1e-4;
    pub const DEFAULT_MAX_ITER: usize = 300;
    pub const DEFAULT_RESTARTS: usize = 3;

    pub fn new(k: usize, seed: u64) -> Self {
        Self {
            k,
            epsilon: Self::DEFAULT_EPSILON,
            max_iter: Self::DEFAULT_MAX_ITER,
            restarts: Self::DEFAULT_RESTARTS,
            seed,
            init: InitMethod::Random,
        }
    }

    fn validate(&self, m: usize) -> Result<()> {
        if self.k < 1 {
            return Err(Error::InvalidParameter("k must be at least 1".into()));
        }
        if self.k > m {
            return Err(Error::InvalidParameter(format!(
                "k = {} exceeds the number of patches ({m})",
                self.k
            )));
        }
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "epsilon must be positive, got {}",
                self.epsilon
            )));
        }
        if self.max_iter < 1 {
            return Err(Error::InvalidParameter(
                "max_iter must be at least 1".into(),
            ));
        }
        if self.restarts < 1 {
            return Err(Error::InvalidParameter(
                "restarts must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

/// Outcome of one Lloyd run.
#[derive(Debug, Clone, PartialEq)]
pub struct LloydRun {
    pub centroids: Centroids,
    pub assignments: Vec<usize>,
    pub iterations: usize,
    pub converged: bool,
    /// Objective after the initial assignment and after every iteration.
    pub history: Vec<f64>,
    pub objective: f64,
}

fn initial_centroids(
    patches: &CenteredSet,
    k: usize,
    init: InitMethod,
    rng: &mut ChaCha8Rng,
) -> Centroids {
    let picks: Vec<usize> = match init {
        InitMethod::Random => index::sample(rng, patches.len(), k).into_vec(),
        InitMethod::PlusPlus => plus_plus_picks(patches, k, rng),
    };
    let mut data = Vec::with_capacity(k * patches.dim());
    for i in picks {
        data.extend_from_slice(patches.row(i));
    }
    Centroids {
        dim: patches.dim(),
        data,
    }
}

fn plus_plus_picks(patches: &CenteredSet, k: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let m = patches.len();
    let mut picks = vec![rng.random_range(0..m)];
    let mut d2: Vec<f64> = (0..m)
        .into_par_iter()
        .map(|i| squared_distance(patches.row(i), patches.row(picks[0])))
        .collect();
    while picks.len() < k {
        let total: f64 = d2.iter().sum();
        let next = if total > 0.0 {
            let target = rng.random::<f64>() * total;
            let mut acc = 0.0;
            let mut chosen = None;
            for (i, &w) in d2.iter().enumerate() {
                acc += w;
                if w > 0.0 && acc > target {
                    chosen = Some(i);
                    break;
                }
            }
            // rounding can leave target at the very top of the range
            chosen.unwrap_or_else(|| d2.iter().rposition(|&w| w > 0.0).unwrap())
        } else {
            let free: Vec<usize> = (0..m).filter(|i| !picks.contains(i)).collect();
            free[rng.random_range(0..free.len())]
        };
        picks.push(next);
        let row = patches.row(next);
        d2.par_iter_mut().enumerate().for_each(|(i, d)| {
            *d = d.min(squared_distance(patches.row(i), row));
        });
    }
    picks
}

/// Moves each empty cluster's centroid onto the patch farthest from its
/// currently assigned centroid. Returns false if no patch is off-centroid.
fn repair_empty(
    patches: &CenteredSet,
    assignments: &[usize],
    centroids: &mut Centroids,
    empty: &[usize],
) -> bool {
    let mut dist: Vec<f64> = assignments
        .par_iter()
        .enumerate()
        .map(|(i, &j)| squared_distance(patches.row(i), centroids.row(j)))
        .collect();
    for &j in empty {
        let (far, d) = dist
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |best, (i, &d)| {
                if d > best.1 {
                    (i, d)
                } else {
                    best
                }
            });
        if d <= 0.0 {
            return false;
        }
        centroids.row_mut(j).copy_from_slice(patches.row(far));
        dist[far] = f64::NEG_INFINITY;
    }
    true
}

/// Runs Lloyd iterations from the initialization drawn with `rng`.
///
/// The run stops when every centroid moved less than `epsilon` and the next
/// assignment pass leaves all assignments unchanged, or after `max_iter`
/// iterations. In the first case the returned state is a fixed point.
pub fn lloyd(
    patches: &CenteredSet,
    params: &KMeansParams,
    rng: &mut ChaCha8Rng,
) -> Result<LloydRun> {
    params.validate(patches.len())?;
    let k = params.k;
    let mut centroids = initial_centroids(patches, k, params.init, rng);
    let mut assignments = assign_step(patches, &centroids);
    let mut history = vec![objective(&assignments, &centroids, patches)?];
    let mut converged = false;
    let mut iterations = 0;

    while iterations < params.max_iter {
        iterations += 1;
        let (mut next, empty) = update_step(patches, &assignments, k);
        if !empty.is_empty() {
            // no patch is off-centroid: nothing to reseed with, keep the old positions
            if !repair_empty(patches, &assignments, &mut next, &empty) {
                for &j in &empty {
                    let old = centroids.row(j).to_vec();
                    next.row_mut(j).copy_from_slice(&old);
                }
            }
        }
        let shift = next
            .rows()
            .zip(centroids.rows())
            .map(|(a, b)| squared_distance(a, b).sqrt())
            .fold(0.0, f64::max);
        centroids = next;
        let reassigned = assign_step(patches, &centroids);
        history.push(objective(&reassigned, &centroids, patches)?);
        let stable = reassigned == assignments;
        assignments = reassigned;
        if empty.is_empty() && stable && shift < params.epsilon {
            converged = true;
            break;
        }
    }

    if !converged {
        // leave centroids equal to the means of the reported members
        let (means, empty) = update_step(patches, &assignments, k);
        let mut finished = means;
        for &j in &empty {
            let old = centroids.row(j).to_vec();
            finished.row_mut(j).copy_from_slice(&old);
        }
        centroids = finished;
    }
    let objective = objective(&assignments, &centroids, patches)?;
    Ok(LloydRun {
        centroids,
        assignments,
        iterations,
        converged,
        history,
        objective,
    })
}

/// Best of `params.restarts` Lloyd runs, each seeded from `(seed, run index)`.
/// Returns the winning run and its index; ties keep the earliest run.
pub fn cluster_vectors(patches: &CenteredSet, params: &KMeansParams) -> Result<(LloydRun, usize)> {
    params.validate(patches.len())?;
    let mut best: Option<(LloydRun, usize)> = None;
    for run in 0..params.restarts {
        let mut rng = restart_rng(params.seed, run as u64);
        let result = lloyd(patches, params, &mut rng)?;
        if best
            .as_ref()
            .is_none_or(|(b, _)| result.objective < b.objective)
        {
            best = Some((result, run));
        }
    }
    Ok(best.expect("restarts >= 1"))
}

/// Persisted clustering of a patch library.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterModel {
    pub n: u32,
    pub stride: u32,
    pub seed: u64,
    pub epsilon: f64,
    pub max_iter: usize,
    pub restarts: usize,
    pub init: InitMethod,
    pub best_run: usize,
    pub iterations_run: usize,
    pub converged: bool,
    pub final_objective: f64,
    pub manifest_digest: String,
    pub library_len: usize,
    pub centroids: Centroids,
    /// Library indices per cluster, ascending.
    pub members: Vec<Vec<u32>>,
    pub member_refs: Vec<Vec<PatchRef>>,
}

/// Clusters the centered patches of `library`.
pub fn kmeans(library: &PatchLibrary, params: &KMeansParams) -> Result<ClusterModel> {
    params.validate(library.len())?;
    let centered = library.centered();
    let (run, best_run) = cluster_vectors(&centered, params)?;
    let lists = member_lists(&run.assignments, params.k);
    let members: Vec<Vec<u32>> = lists
        .iter()
        .map(|l| l.iter().map(|&i| i as u32).collect())
        .collect();
    let member_refs = lists
        .iter()
        .map(|l| l.iter().map(|&i| library.patch_ref(i)).collect())
        .collect();
    Ok(ClusterModel {
        n: library.n(),
        stride: library.stride(),
        seed: params.seed,
        epsilon: params.epsilon,
        max_iter: params.max_iter,
        restarts: params.restarts,
        init: params.init,
        best_run,
        iterations_run: run.iterations,
        converged: run.converged,
        final_objective: run.objective,
        manifest_digest: library.digest().to_owned(),
        library_len: library.len(),
        centroids: run.centroids,
        members,
        member_refs,
    })
}

#[derive(Serialize, Deserialize)]
struct ModelHeader {
    format_version: u32,
    kind: String,
    n: u32,
    stride: u32,
    k: usize,
    dim: usize,
    seed: u64,
    epsilon: f64,
    max_iter: usize,
    restarts: usize,
    init: InitMethod,
    best_run: usize,
    iterations_run: usize,
    converged: bool,
    final_objective: f64,
    manifest_digest: String,
    library_len: usize,
    member_counts: Vec<usize>,
}

const MODEL_KIND: &str = "cluster-model";
const MODEL_VERSION: u32 = 1;

impl ClusterModel {
    pub fn k(&self) -> usize {
        self.centroids.k()
    }

    /// Cluster indices sorted by descending member count, ties by index.
    pub fn clusters_by_size(&self) -> Vec<usize> {
        let mut order: Vec<usize> = (0..self.k()).collect();
        order.sort_by_key(|&j| (std::cmp::Reverse(self.members[j].len()), j));
        order
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let header = ModelHeader {
            format_version: MODEL_VERSION,
            kind: MODEL_KIND.into(),
            n: self.n,
            stride: self.stride,
            k: self.k(),
            dim: self.centroids.dim(),
            seed: self.seed,
            epsilon: self.epsilon,
            max_iter: self.max_iter,
            restarts: self.restarts,
            init: self.init,
            best_run: self.best_run,
            iterations_run: self.iterations_run,
            converged: self.converged,
            final_objective: self.final_objective,
            manifest_digest: self.manifest_digest.clone(),
            library_len: self.library_len,
            member_counts: self.members.iter().map(Vec::len).collect(),
        };
        let mut payload = Vec::new();
        for v in self.centroids.as_slice() {
            payload.extend_from_slice(&v.to_le_bytes());
        }
        for (indices, refs) in self.members.iter().zip(&self.member_refs) {
            for (i, r) in indices.iter().zip(refs) {
                for word in [*i, r.image_index, r.x, r.y] {
                    payload.extend_from_slice(&word.to_le_bytes());
                }
            }
        }
        container::encode(&header, &payload)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes, path)
    }

    pub fn from_bytes(bytes: &[u8], path: &Path) -> Result<Self> {
        let (h, payload): (ModelHeader, _) = container::decode(bytes, path)?;
        if h.kind != MODEL_KIND || h.format_version != MODEL_VERSION {
            return Err(Error::corrupt(
                path,
                format!(
                    "expected {MODEL_KIND} v{MODEL_VERSION}, found {} v{}",
                    h.kind, h.format_version
                ),
            ));
        }
        if h.k == 0 || h.member_counts.len() != h.k || h.dim != (h.n * h.n) as usize {
            return Err(Error::corrupt(path, "inconsistent model header"));
        }
        let mut reader = PayloadReader::new(&payload, path);
        let mut data = Vec::with_capacity(h.k * h.dim);
        for _ in 0..h.k * h.dim {
            data.push(reader.f64()?);
        }
        let mut members = Vec::with_capacity(h.k);
        let mut member_refs = Vec::with_capacity(h.k);
        for &count in &h.member_counts {
            let mut indices = Vec::with_capacity(count);
            let mut refs = Vec::with_capacity(count);
            for _ in 0..count {
                let index = reader.u32()?;
                if index as usize >= h.library_len {
                    return Err(Error::corrupt(path, format!("member {index} out of range")));
                }
                indices.push(index);
                refs.push(PatchRef {
                    image_index: reader.u32()?,
                    x: reader.u32()?,
                    y: reader.u32()?,
                    n: h.n,
                });
            }
            members.push(indices);
            member_refs.push(refs);
        }
        reader.finish()?;
        Ok(Self {
            n: h.n,
            stride: h.stride,
            seed: h.seed,
            epsilon: h.epsilon,
            max_iter: h.max_iter,
            restarts: h.restarts,
            init: h.init,
            best_run: h.best_run,
            iterations_run: h.iterations_run,
            converged: h.converged,
            final_objective: h.final_objective,
            manifest_digest: h.manifest_digest,
            library_len: h.library_len,
            centroids: Centroids { dim: h.dim, data },
            members,
            member_refs,
        })
    }

    /// Checks that this model was built from `library`.
    pub fn check_library(&self, library: &PatchLibrary) -> Result<()> {
        if self.n != library.n() {
            return Err(Error::ModelMismatch(format!(
                "model patch side {} vs library {}",
                self.n,
                library.n()
            )));
        }
        if self.manifest_digest != library.digest() || self.library_len != library.len() {
            return Err(Error::ModelMismatch("dataset digest differs".into()));
        }
        for (indices, refs) in self.members.iter().zip(&self.member_refs) {
            for (&i, r) in indices.iter().zip(refs) {
                if library.patch_ref(i as usize) != *r {
                    return Err(Error::ModelMismatch(format!(
                        "member {i} does not resolve to {r:?}"
                    )));
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    fn set(dim: usize, rows: &[f64]) -> CenteredSet {
        CenteredSet::from_rows(dim, rows.to_vec()).unwrap()
    }

    fn cents(dim: usize, rows: &[f64]) -> Centroids {
        Centroids::from_rows(dim, rows.to_vec()).unwrap()
    }

    #[test]
    fn objective_examples() {
        let same = set(2, &[1.0, 2.0, 1.0, 2.0, 1.0, 2.0]);
        assert_eq!(
            objective(&[0, 0, 0], &cents(2, &[1.0, 2.0]), &same).unwrap(),
            0.0
        );

        let pts = set(1, &[0.0, 1.0, 10.0, 11.0]);
        let j = objective(&[0, 0, 1, 1], &cents(1, &[0.5, 10.5]), &pts).unwrap();
        assert_eq!(j, 1.0);

        let one = set(3, &[4.0, 5.0, 6.0]);
        assert_eq!(
            objective(&[0], &cents(3, &[4.0, 5.0, 6.0]), &one).unwrap(),
            0.0
        );
    }

    #[test]
    fn objective_dimension_mismatch() {
        let pts = set(2, &[0.0, 0.0]);
        assert!(objective(&[0], &cents(3, &[0.0; 3]), &pts).is_err());
        assert!(objective(&[0, 0], &cents(2, &[0.0; 2]), &pts).is_err());
        assert!(objective(&[1], &cents(2, &[0.0; 2]), &pts).is_err());
    }

    #[test]
    fn assign_exact_and_ties() {
        let c = cents(1, &[0.0, 10.0, 20.0, 30.0, 10.0]);
        // equal to centroid 3
        assert_eq!(assign_step(&set(1, &[30.0]), &c), vec![3]);
        // 5.0 is equidistant from centroids 0 and 1
        assert_eq!(assign_step(&set(1, &[5.0]), &c), vec![0]);
        // duplicates of centroid 1 at index 4 lose the tie
        assert_eq!(assign_step(&set(1, &[10.0]), &c), vec![1]);
    }

    #[test]
    fn update_examples() {
        let pts = set(2, &[1.0, 2.0, 3.0, 4.0, 5.0, 9.0]);
        let (c, empty) = update_step(&pts, &[0, 0, 0], 1);
        assert_eq!(c.row(0), &[3.0, 5.0]);
        assert!(empty.is_empty());

        let (c, empty) = update_step(&pts, &[0, 1, 1], 3);
        assert_eq!(c.row(0), &[1.0, 2.0]);
        assert_eq!(c.row(1), &[4.0, 6.5]);
        assert_eq!(empty, vec![2]);
    }

    #[test]
    fn parameter_validation() {
        let pts = set(1, &[0.0, 1.0]);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(lloyd(&pts, &KMeansParams::new(0, 1), &mut rng).is_err());
        assert!(lloyd(&pts, &KMeansParams::new(3, 1), &mut rng).is_err());
        let mut p = KMeansParams::new(1, 1);
        p.epsilon = 0.0;
        assert!(lloyd(&pts, &p, &mut rng).is_err());
        p.epsilon = 1e-4;
        p.max_iter = 0;
        assert!(lloyd(&pts, &p, &mut rng).is_err());
        p.max_iter = 10;
        p.restarts = 0;
        assert!(cluster_vectors(&pts, &p).is_err());
    }

    #[test]
    fn k_equals_one_is_global_mean() {
        let pts = set(1, &[0.0, 2.0, 4.0, 10.0]);
        let (run, _) = cluster_vectors(&pts, &KMeansParams::new(1, 7)).unwrap();
        assert_eq!(run.centroids.row(0), &[4.0]);
        // variance 14 times M = 4
        assert_eq!(run.objective, 56.0);
        assert!(run.converged);
    }

    #[test]
    fn k_equals_m_gives_singletons() {
        let pts = set(2, &[0.0, 0.0, 1.0, 0.0, 0.0, 1.0, 5.0, 5.0, -3.0, 2.0]);
        let (run, _) = cluster_vectors(&pts, &KMeansParams::new(5, 3)).unwrap();
        assert_eq!(run.objective, 0.0);
        let mut sorted = run.assignments.clone();
        sorted.sort_unstable();
        assert_eq!(sorted, vec![0, 1, 2, 3, 4]);
    }

    #[test]
    fn empty_cluster_repair_reseeds_farthest() {
        // centroids 1 and 2 coincide, so 2 ends up empty after the first pass
        let pts = set(1, &[0.0, 1.0, 2.0, 100.0]);
        let mut assignments = assign_step(&pts, &cents(1, &[0.0, 1.0, 1.0]));
        assert_eq!(assignments, vec![0, 1, 1, 1]);
        let (mut c, empty) = update_step(&pts, &assignments, 3);
        assert_eq!(empty, vec![2]);
        assert!(repair_empty(&pts, &assignments, &mut c, &empty));
        assert_eq!(c.row(2), &[100.0]);
        assignments = assign_step(&pts, &c);
        assert_eq!(assignments[3], 2);
    }

    #[test]
    fn plus_plus_init_converges() {
        let pts = set(1, &[0.0, 1.0, 10.0, 11.0, 20.0, 21.0]);
        let mut p = KMeansParams::new(3, 11);
        p.init = InitMethod::PlusPlus;
        let (run, _) = cluster_vectors(&pts, &p).unwrap();
        assert!(run.converged);
        assert_eq!(run.objective, 1.5);
    }

    #[test]
    fn duplicate_points_cannot_fill_all_clusters() {
        let pts = set(1, &[3.0, 3.0, 3.0]);
        let mut p = KMeansParams::new(2, 1);
        p.max_iter = 5;
        let run = lloyd(&pts, &p, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        assert!(!run.converged);
        assert_eq!(run.objective, 0.0);
    }
}
