//! K-means clustering, deterministic under a seed.
//!
//! Lloyd iterations from k-means++ seeding, with the best of several restarts
//! kept. The assignment step uses Hamerly's bounds to skip distance
//! evaluations; it produces the same assignments as a plain Lloyd step.

use alloc::vec;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::rng::{derive_seed, seeded, uniform};
use crate::stats::column_moments;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KMeansConfig {
    pub restarts: usize,
    pub max_iter: usize,
    /// Converged when no centroid moves farther than this (scaled space).
    pub tol: f64,
    /// Z-score each dimension before computing distances.
    pub standardize: bool,
    /// Keep the inertia after every assignment step (one extra pass per step).
    pub record_history: bool,
}

impl Default for KMeansConfig {
    fn default() -> Self {
        Self { restarts: 10, max_iter: 300, tol: 1e-6, standardize: true, record_history: true }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Clustering {
    pub k: usize,
    pub dim: usize,
    pub seed: u64,
    /// Cluster index per input point, in input order.
    pub assignments: Vec<usize>,
    /// `k * dim` row-major centroids in the input (unscaled) space.
    pub centroids: Vec<f64>,
    /// Within-cluster sum of squared distances in the scaled space.
    pub inertia: f64,
    pub iterations: usize,
    /// Inertia after every assignment step of the kept restart; empty unless
    /// [`KMeansConfig::record_history`] is set.
    pub inertia_history: Vec<f64>,
    pub scale_means: Vec<f64>,
    pub scale_stds: Vec<f64>,
}

impl Clustering {
    pub fn cluster_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &a in &self.assignments {
            sizes[a] += 1;
        }
        sizes
    }

    /// Member indices of every cluster, ascending.
    pub fn members(&self) -> Vec<Vec<usize>> {
        let mut out: Vec<Vec<usize>> = self.cluster_sizes().into_iter().map(Vec::with_capacity).collect();
        for (i, &a) in self.assignments.iter().enumerate() {
            out[a].push(i);
        }
        out
    }

    pub fn centroid(&self, c: usize) -> &[f64] {
        &self.centroids[c * self.dim..(c + 1) * self.dim]
    }
}

/// Clusters `points` (row-major, `dim` columns) into `k` groups.
pub fn kmeans(points: &[f64], dim: usize, k: usize, seed: u64, config: &KMeansConfig) -> Result<Clustering> {
    if dim == 0 || !points.len().is_multiple_of(dim) {
        return Err(Error::Invalid(alloc::format!("{} values do not form rows of {dim}", points.len())));
    }
    let n = points.len() / dim;
    if k == 0 || k > n {
        return Err(Error::InvalidClusterCount { k, n });
    }
    if points.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("k-means input"));
    }
    let (means, stds) = if config.standardize {
        column_moments(points, dim)
    } else {
        (vec![0.0; dim], vec![1.0; dim])
    };
    // Rows are zero-padded to a fixed width so distance loops unroll; the
    // padding contributes exact zeros to every distance and sum.
    let width = match dim {
        1 | 2 => dim,
        3 | 4 => 4,
        5..=8 => 8,
        _ => dim,
    };
    let mut scaled = vec![0.0; n * width];
    for (row, out) in points.chunks_exact(dim).zip(scaled.chunks_exact_mut(width)) {
        for ((o, v), (m, s)) in out.iter_mut().zip(row).zip(means.iter().zip(&stds)) {
            *o = (v - m) / s;
        }
    }
    let best = match width {
        1 => restarts(&scaled, Fixed::<1>, k, seed, config),
        2 => restarts(&scaled, Fixed::<2>, k, seed, config),
        4 => restarts(&scaled, Fixed::<4>, k, seed, config),
        8 => restarts(&scaled, Fixed::<8>, k, seed, config),
        _ => restarts(&scaled, Dynamic(width), k, seed, config),
    };
    let centroids = best
        .centers
        .chunks_exact(width)
        .flat_map(|c| c[..dim].iter().zip(&means).zip(&stds).map(|((v, m), s)| v * s + m))
        .collect();
    Ok(Clustering {
        k,
        dim,
        seed,
        assignments: best.assign,
        centroids,
        inertia: best.inertia,
        iterations: best.iterations,
        inertia_history: best.history,
        scale_means: means,
        scale_stds: stds,
    })
}

trait Width: Copy {
    fn get(self) -> usize;
}

#[derive(Clone, Copy)]
struct Fixed<const D: usize>;

impl<const D: usize> Width for Fixed<D> {
    #[inline(always)]
    fn get(self) -> usize {
        D
    }
}

#[derive(Clone, Copy)]
struct Dynamic(usize);

impl Width for Dynamic {
    #[inline(always)]
    fn get(self) -> usize {
        self.0
    }
}

fn restarts<W: Width>(x: &[f64], w: W, k: usize, seed: u64, config: &KMeansConfig) -> Run {
    let mut best: Option<Run> = None;
    for r in 0..config.restarts.max(1) {
        let run = lloyd(x, w, k, derive_seed(seed, &[r as u64]), config);
        if best.as_ref().is_none_or(|b| run.inertia < b.inertia) {
            best = Some(run);
        }
    }
    best.expect("at least one restart")
}

struct Run {
    assign: Vec<usize>,
    centers: Vec<f64>,
    inertia: f64,
    iterations: usize,
    history: Vec<f64>,
}

#[inline(always)]
fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

#[inline(always)]
fn row<W: Width>(x: &[f64], w: W, i: usize) -> &[f64] {
    let d = w.get();
    &x[i * d..(i + 1) * d]
}

fn kmeans_pp<W: Width>(x: &[f64], w: W, k: usize, rng: &mut crate::rng::StdRng) -> Vec<f64> {
    let dim = w.get();
    let n = x.len() / dim;
    let mut centers = Vec::with_capacity(k * dim);
    let first = (uniform(rng, 0.0, n as f64) as usize).min(n - 1);
    centers.extend_from_slice(row(x, w, first));
    let mut d2: Vec<f64> = x.chunks_exact(dim).map(|p| sq_dist(p, &centers[..dim])).collect();
    let mut chosen = vec![first];
    for _ in 1..k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let target = uniform(rng, 0.0, total);
            let mut acc = 0.0;
            let mut pick = n - 1;
            for (i, &wt) in d2.iter().enumerate() {
                acc += wt;
                if acc > target && wt > 0.0 {
                    pick = i;
                    break;
                }
            }
            pick
        } else {
            // every point coincides with a centre; take the first unused index
            (0..n).find(|i| !chosen.contains(i)).unwrap_or(0)
        };
        chosen.push(pick);
        let c = row(x, w, pick);
        centers.extend_from_slice(c);
        for (p, d) in x.chunks_exact(dim).zip(d2.iter_mut()) {
            let nd = sq_dist(p, c);
            if nd < *d {
                *d = nd;
            }
        }
    }
    centers
}

/// Nearest and second-nearest centre distances; ties go to the lower index.
#[inline(always)]
fn nearest_two(p: &[f64], centers: &[f64], dim: usize) -> (usize, f64, f64) {
    let (mut best, mut d1, mut d2) = (0usize, f64::INFINITY, f64::INFINITY);
    for (j, c) in centers.chunks_exact(dim).enumerate() {
        let d = sq_dist(p, c);
        if d < d1 {
            d2 = d1;
            d1 = d;
            best = j;
        } else if d < d2 {
            d2 = d;
        }
    }
    (best, libm::sqrt(d1), libm::sqrt(d2))
}

fn lloyd<W: Width>(x: &[f64], w: W, k: usize, seed: u64, config: &KMeansConfig) -> Run {
    let dim = w.get();
    let n = x.len() / dim;
    let mut rng = seeded(seed);
    let mut centers = kmeans_pp(x, w, k, &mut rng);
    let mut assign = vec![0usize; n];
    let mut upper = vec![0.0f64; n];
    let mut lower = vec![0.0f64; n];
    for (i, p) in x.chunks_exact(dim).enumerate() {
        let (a, d1, d2) = nearest_two(p, &centers, dim);
        assign[i] = a;
        upper[i] = d1;
        lower[i] = d2;
    }

    let mut history = Vec::new();
    let mut half_gap = vec![0.0f64; k];
    let mut sums = vec![0.0f64; k * dim];
    let mut counts = vec![0usize; k];
    let mut moved = vec![0.0f64; k];
    let mut iterations = 0;
    // centre drift since the bounds were last tightened: (largest, its index, runner-up)
    let mut drift: Option<(f64, usize, f64)> = None;
    loop {
        iterations += 1;
        if let Some((m1, m1_idx, m2)) = drift {
            // half distance from each centre to its closest other centre
            for j in 0..k {
                let cj = &centers[j * dim..(j + 1) * dim];
                let mut m = f64::INFINITY;
                for (l, cl) in centers.chunks_exact(dim).enumerate() {
                    if l != j {
                        m = m.min(sq_dist(cj, cl));
                    }
                }
                half_gap[j] = 0.5 * libm::sqrt(m);
            }
            for (i, p) in x.chunks_exact(dim).enumerate() {
                let a = assign[i];
                upper[i] += moved[a];
                lower[i] -= if a == m1_idx { m2 } else { m1 };
                let bound = half_gap[a].max(lower[i]);
                if upper[i] <= bound {
                    continue;
                }
                upper[i] = libm::sqrt(sq_dist(p, &centers[a * dim..(a + 1) * dim]));
                if upper[i] <= bound {
                    continue;
                }
                let (na, d1, d2) = nearest_two(p, &centers, dim);
                if na != a {
                    counts[a] -= 1;
                    counts[na] += 1;
                    for d in 0..dim {
                        sums[a * dim + d] -= p[d];
                        sums[na * dim + d] += p[d];
                    }
                }
                assign[i] = na;
                upper[i] = d1;
                lower[i] = d2;
            }
        } else {
            accumulate(x, w, &assign, &mut counts, &mut sums);
        }

        if counts.contains(&0) && repair_empty(x, w, &mut centers, &mut assign, &mut counts) {
            // a teleported centre invalidates every bound
            upper.iter_mut().for_each(|u| *u = f64::INFINITY);
            lower.iter_mut().for_each(|l| *l = 0.0);
            accumulate(x, w, &assign, &mut counts, &mut sums);
        }
        if config.record_history {
            history.push(inertia_of(x, w, &centers, &assign));
        }

        let mut max_move = 0.0f64;
        for j in 0..k {
            let c = &mut centers[j * dim..(j + 1) * dim];
            let inv = 1.0 / counts[j] as f64;
            let mut shift = 0.0;
            for (cv, s) in c.iter_mut().zip(&sums[j * dim..(j + 1) * dim]) {
                let nv = s * inv;
                shift += (nv - *cv) * (nv - *cv);
                *cv = nv;
            }
            moved[j] = libm::sqrt(shift);
            max_move = max_move.max(moved[j]);
        }
        if max_move < config.tol || iterations >= config.max_iter {
            break;
        }
        let (mut m1, mut m1_idx, mut m2) = (0.0f64, 0usize, 0.0f64);
        for (j, &m) in moved.iter().enumerate() {
            if m > m1 {
                m2 = m1;
                m1 = m;
                m1_idx = j;
            } else if m > m2 {
                m2 = m;
            }
        }
        drift = Some((m1, m1_idx, m2));
    }
    let inertia = inertia_of(x, w, &centers, &assign);
    Run { assign, centers, inertia, iterations, history }
}

/// Cluster sizes and coordinate sums from scratch.
fn accumulate<W: Width>(x: &[f64], w: W, assign: &[usize], counts: &mut [usize], sums: &mut [f64]) {
    let dim = w.get();
    counts.iter_mut().for_each(|c| *c = 0);
    sums.iter_mut().for_each(|s| *s = 0.0);
    for (p, &a) in x.chunks_exact(dim).zip(assign) {
        counts[a] += 1;
        for (s, v) in sums[a * dim..(a + 1) * dim].iter_mut().zip(p) {
            *s += v;
        }
    }
}

fn inertia_of<W: Width>(x: &[f64], w: W, centers: &[f64], assign: &[usize]) -> f64 {
    let dim = w.get();
    x.chunks_exact(dim).zip(assign).map(|(p, &a)| sq_dist(p, &centers[a * dim..(a + 1) * dim])).sum()
}

/// Gives every empty cluster the point farthest from its current centre,
/// taken from a cluster that keeps at least one member, and moves the empty
/// cluster's centre onto it. Returns whether anything changed.
fn repair_empty<W: Width>(x: &[f64], w: W, centers: &mut [f64], assign: &mut [usize], counts: &mut [usize]) -> bool {
    let dim = w.get();
    let k = counts.len();
    let mut repaired = false;
    for j in 0..k {
        if counts[j] > 0 {
            continue;
        }
        let mut far = None;
        let mut far_d = -1.0;
        for (i, p) in x.chunks_exact(dim).enumerate() {
            let a = assign[i];
            if counts[a] < 2 {
                continue;
            }
            let d = sq_dist(p, &centers[a * dim..(a + 1) * dim]);
            if d > far_d {
                far_d = d;
                far = Some(i);
            }
        }
        let Some(i) = far else { continue };
        counts[assign[i]] -= 1;
        assign[i] = j;
        counts[j] = 1;
        centers[j * dim..(j + 1) * dim].copy_from_slice(row(x, w, i));
        repaired = true;
    }
    repaired
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::normal;

    fn blobs(seed: u64) -> (Vec<f64>, Vec<usize>) {
        let mut rng = seeded(seed);
        let mut pts = Vec::new();
        let mut truth = Vec::new();
        for (label, c) in [(0usize, 0.0), (1, 10.0)] {
            for _ in 0..100 {
                pts.push(normal(&mut rng, c, 0.5));
                pts.push(normal(&mut rng, c, 0.5));
                truth.push(label);
            }
        }
        (pts, truth)
    }

    #[test]
    fn k_one_is_the_mean() {
        let pts = [1.0, 2.0, 3.0, 6.0, 5.0, 1.0];
        let c = kmeans(&pts, 2, 1, 0, &KMeansConfig::default()).unwrap();
        assert_eq!(c.assignments, vec![0, 0, 0]);
        assert!((c.centroid(0)[0] - 3.0).abs() < 1e-12);
        assert!((c.centroid(0)[1] - 3.0).abs() < 1e-12);
    }

    #[test]
    fn two_blobs_recovered() {
        let (pts, truth) = blobs(11);
        let c = kmeans(&pts, 2, 2, 5, &KMeansConfig::default()).unwrap();
        let flip = c.assignments[0] != truth[0];
        for (a, t) in c.assignments.iter().zip(&truth) {
            assert_eq!(*a == 1, (*t == 1) != flip);
        }
    }

    #[test]
    fn k_equals_n_has_zero_inertia() {
        let pts = [0.0, 1.0, 5.0, 2.5, -3.0, 7.25];
        let c = kmeans(&pts, 1, 6, 9, &KMeansConfig::default()).unwrap();
        assert_eq!(c.inertia, 0.0);
        assert!(c.cluster_sizes().iter().all(|&s| s == 1));
    }

    #[test]
    fn duplicates_still_fill_every_cluster() {
        let pts = [1.0, 1.0, 1.0, 1.0, 2.0];
        let c = kmeans(&pts, 1, 3, 1, &KMeansConfig::default()).unwrap();
        assert!(c.cluster_sizes().iter().all(|&s| s > 0));
    }

    #[test]
    fn invalid_inputs() {
        assert_eq!(
            kmeans(&[1.0, 2.0], 1, 3, 0, &KMeansConfig::default()),
            Err(Error::InvalidClusterCount { k: 3, n: 2 })
        );
        assert!(matches!(kmeans(&[1.0, f64::NAN], 1, 1, 0, &KMeansConfig::default()), Err(Error::NonFinite(_))));
    }

    #[test]
    fn bounded_assignment_matches_brute_force() {
        let mut rng = seeded(4);
        let pts: Vec<f64> = (0..900).map(|_| uniform(&mut rng, -3.0, 3.0)).collect();
        let c = kmeans(&pts, 3, 7, 21, &KMeansConfig { restarts: 1, ..KMeansConfig::default() }).unwrap();
        let (m, sd) = (&c.scale_means, &c.scale_stds);
        let scaled: Vec<f64> = pts
            .chunks_exact(3)
            .flat_map(|r| (0..3).map(move |d| (r[d] - m[d]) / sd[d]))
            .collect();
        let centers: Vec<f64> = c
            .centroids
            .chunks_exact(3)
            .flat_map(|r| (0..3).map(move |d| (r[d] - m[d]) / sd[d]))
            .collect();
        // after convergence, labels are (up to the last centroid shift) the nearest centres
        let mut disagreements = 0;
        for (p, &a) in scaled.chunks_exact(3).zip(&c.assignments) {
            let (best, _, _) = nearest_two(p, &centers, 3);
            disagreements += usize::from(best != a);
        }
        assert_eq!(disagreements, 0);
    }
}
