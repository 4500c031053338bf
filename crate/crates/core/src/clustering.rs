//! Channel clustering from probe-beam gains and cluster-to-agent assignment.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::radio::{
    avg_comm_gain, comm_gain, quantize, ArrayGeometry, BeamVector, ChannelVector, PhaseCodomain,
};

pub const KMEANS_MAX_ITERATIONS: usize = 300;

/// `count` quantized beams steered at equally spaced angles inside
/// `(-π/2, π/2)`.
pub fn probe_beams(
    geom: &ArrayGeometry,
    codomain: &PhaseCodomain,
    count: usize,
) -> Result<Vec<BeamVector>> {
    if count == 0 {
        return Err(Error::Empty("probe set"));
    }
    Ok((0..count)
        .map(|c| {
            let theta = -PI / 2.0 + PI * (c + 1) as f64 / (count + 1) as f64;
            quantize(&geom.matched_beam(theta), codomain)
        })
        .collect())
}

/// Gains of every probe beam on every channel.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbeGainMatrix {
    /// Row-major `C × K'`.
    entries: Vec<f64>,
    probes: usize,
    channel_refs: Vec<usize>,
}

impl ProbeGainMatrix {
    pub fn num_probes(&self) -> usize {
        self.probes
    }

    pub fn num_channels(&self) -> usize {
        self.channel_refs.len()
    }

    pub fn channel_refs(&self) -> &[usize] {
        &self.channel_refs
    }

    pub fn get(&self, probe: usize, channel: usize) -> f64 {
        self.entries[probe * self.num_channels() + channel]
    }

    pub fn column(&self, channel: usize) -> Vec<f64> {
        (0..self.probes).map(|c| self.get(c, channel)).collect()
    }

    /// Builds a matrix from explicit columns (one per channel).
    pub fn from_columns(columns: &[Vec<f64>]) -> Result<Self> {
        if columns.is_empty() {
            return Err(Error::Empty("gain columns"));
        }
        let probes = columns[0].len();
        if probes == 0 {
            return Err(Error::Empty("probe set"));
        }
        let k = columns.len();
        let mut entries = vec![0.0; probes * k];
        for (j, col) in columns.iter().enumerate() {
            check_len("gain column", probes, col.len())?;
            for (c, &v) in col.iter().enumerate() {
                if !(v.is_finite() && v >= 0.0) {
                    return Err(Error::InvalidArgument(
                        "probe gains must be finite and nonnegative".into(),
                    ));
                }
                entries[c * k + j] = v;
            }
        }
        Ok(ProbeGainMatrix {
            entries,
            probes,
            channel_refs: (0..k).collect(),
        })
    }
}

pub fn probe_gains(probes: &[BeamVector], channels: &[ChannelVector]) -> Result<ProbeGainMatrix> {
    if probes.is_empty() {
        return Err(Error::Empty("probe set"));
    }
    if channels.is_empty() {
        return Err(Error::Empty("channel set"));
    }
    let k = channels.len();
    let mut entries = Vec::with_capacity(probes.len() * k);
    for f in probes {
        for h in channels {
            entries.push(comm_gain(f, h)?);
        }
    }
    Ok(ProbeGainMatrix {
        entries,
        probes: probes.len(),
        channel_refs: (0..k).collect(),
    })
}

/// One normalized pairwise-difference feature per channel.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    columns: Vec<Vec<f64>>,
}

impl FeatureMatrix {
    pub fn new(columns: Vec<Vec<f64>>) -> Result<Self> {
        if columns.is_empty() {
            return Err(Error::Empty("feature matrix"));
        }
        let len = columns[0].len();
        for c in &columns {
            check_len("feature column", len, c.len())?;
        }
        Ok(FeatureMatrix { columns })
    }

    pub fn columns(&self) -> &[Vec<f64>] {
        &self.columns
    }

    pub fn len(&self) -> usize {
        self.columns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.columns.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.columns[0].len()
    }
}

/// Column `k` becomes the `C(C-1)/2` differences `P[c,k] − P[c',k]` (`c < c'`)
/// divided by the column's mean gain.
pub fn feature_matrix(p: &ProbeGainMatrix) -> Result<FeatureMatrix> {
    let c = p.num_probes();
    let columns = (0..p.num_channels())
        .map(|k| {
            let col = p.column(k);
            let mean = col.iter().sum::<f64>() / c as f64;
            if mean <= 0.0 {
                return Err(Error::DegenerateChannel(p.channel_refs[k]));
            }
            let mut u = Vec::with_capacity(c * (c - 1) / 2);
            for i in 0..c {
                for j in i + 1..c {
                    u.push((col[i] - col[j]) / mean);
                }
            }
            Ok(u)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(FeatureMatrix { columns })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Partition {
    /// Cluster id per channel.
    pub assignments: Vec<usize>,
    pub centroids: Vec<Vec<f64>>,
    pub distortion: f64,
    /// Distortion after every assignment phase.
    pub history: Vec<f64>,
}

impl Partition {
    pub fn num_clusters(&self) -> usize {
        self.centroids.len()
    }

    pub fn members(&self, cluster: usize) -> Vec<usize> {
        self.assignments
            .iter()
            .enumerate()
            .filter(|(_, &a)| a == cluster)
            .map(|(k, _)| k)
            .collect()
    }
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn nearest_centroid(point: &[f64], centroids: &[Vec<f64>]) -> usize {
    let mut best = (0, f64::INFINITY);
    for (n, c) in centroids.iter().enumerate() {
        let d = sq_dist(point, c);
        if d < best.1 {
            best = (n, d);
        }
    }
    best.0
}

/// Sum of squared distances from every column to its assigned centroid.
pub fn distortion(u: &FeatureMatrix, assignments: &[usize], centroids: &[Vec<f64>]) -> f64 {
    u.columns
        .iter()
        .zip(assignments)
        .map(|(x, &a)| sq_dist(x, &centroids[a]))
        .sum()
}

/// Assignment phase; clusters left empty take over the point farthest from its
/// centroid.
fn assign_points(u: &FeatureMatrix, centroids: &mut [Vec<f64>]) -> Vec<usize> {
    let mut assignments: Vec<usize> = u
        .columns
        .iter()
        .map(|x| nearest_centroid(x, centroids))
        .collect();
    loop {
        let mut counts = vec![0usize; centroids.len()];
        for &a in &assignments {
            counts[a] += 1;
        }
        let Some(empty) = counts.iter().position(|&c| c == 0) else {
            break;
        };
        let mut far = None;
        let mut far_d = -1.0;
        for (k, x) in u.columns.iter().enumerate() {
            if counts[assignments[k]] < 2 {
                continue;
            }
            let d = sq_dist(x, &centroids[assignments[k]]);
            if d > far_d {
                far_d = d;
                far = Some(k);
            }
        }
        let Some(k) = far else { break };
        centroids[empty] = u.columns[k].clone();
        assignments[k] = empty;
    }
    assignments
}

fn cluster_means(u: &FeatureMatrix, assignments: &[usize], previous: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let dim = u.dim();
    let mut sums = vec![vec![0.0; dim]; previous.len()];
    let mut counts = vec![0usize; previous.len()];
    for (x, &a) in u.columns.iter().zip(assignments) {
        counts[a] += 1;
        for (s, v) in sums[a].iter_mut().zip(x) {
            *s += v;
        }
    }
    sums.into_iter()
        .zip(counts)
        .zip(previous)
        .map(|((s, n), prev)| {
            if n == 0 {
                prev.clone()
            } else {
                s.into_iter().map(|v| v / n as f64).collect()
            }
        })
        .collect()
}

/// Lloyd iterations from seeded, distinct initial columns until the
/// assignments stop changing (or [`KMEANS_MAX_ITERATIONS`]).
pub fn kmeans(u: &FeatureMatrix, num_clusters: usize, seed: u64) -> Result<Partition> {
    if num_clusters == 0 {
        return Err(Error::InvalidArgument("need at least one cluster".into()));
    }
    if num_clusters > u.len() {
        return Err(Error::InvalidArgument(alloc::format!(
            "{num_clusters} clusters requested for {} channels",
            u.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centroids: Vec<Vec<f64>> = sample(&mut rng, u.len(), num_clusters)
        .into_iter()
        .map(|k| u.columns[k].clone())
        .collect();
    let mut assignments = assign_points(u, &mut centroids);
    let mut history = vec![distortion(u, &assignments, &centroids)];
    for _ in 0..KMEANS_MAX_ITERATIONS {
        centroids = cluster_means(u, &assignments, &centroids);
        let next = assign_points(u, &mut centroids);
        history.push(distortion(u, &next, &centroids));
        let stable = next == assignments;
        assignments = next;
        if stable {
            break;
        }
    }
    centroids = cluster_means(u, &assignments, &centroids);
    let distortion = distortion(u, &assignments, &centroids);
    Ok(Partition {
        assignments,
        centroids,
        distortion,
        history,
    })
}

/// `Z[n][n']` = average gain of beam `n` over cluster `n'`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostMatrix {
    pub size: usize,
    /// Row-major.
    pub values: Vec<f64>,
}

impl CostMatrix {
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        if n == 0 {
            return Err(Error::Empty("cost matrix"));
        }
        for r in rows {
            if r.len() != n {
                return Err(Error::NonSquare {
                    rows: n,
                    cols: r.len(),
                });
            }
        }
        Ok(CostMatrix {
            size: n,
            values: rows.iter().flatten().copied().collect(),
        })
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.size + col]
    }
}

pub fn assignment_cost(beams: &[BeamVector], clusters: &[Vec<ChannelVector>]) -> Result<CostMatrix> {
    if beams.len() != clusters.len() {
        return Err(Error::NonSquare {
            rows: beams.len(),
            cols: clusters.len(),
        });
    }
    if clusters.iter().any(|c| c.is_empty()) {
        return Err(Error::Empty("channel cluster"));
    }
    let rows = beams
        .iter()
        .map(|w| clusters.iter().map(|c| avg_comm_gain(w, c)).collect())
        .collect::<Result<Vec<Vec<f64>>>>()?;
    CostMatrix::from_rows(&rows)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Assignment {
    /// `permutation[n]` is the cluster given to beam/agent `n`.
    pub permutation: Vec<usize>,
    pub cost: CostMatrix,
    pub value: f64,
}

/// Minimum-cost perfect matching on a square `n × n` matrix (shortest
/// augmenting paths with row/column potentials). Returns the column per row.
fn hungarian_min(cost: &[f64], n: usize) -> Vec<usize> {
    // 1-based arrays; index 0 is the virtual row/column.
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=n {
                if !used[j] {
                    let cur = cost[(i0 - 1) * n + j - 1] - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut rows = vec![0usize; n];
    for j in 1..=n {
        if p[j] > 0 {
            rows[p[j] - 1] = j - 1;
        }
    }
    rows
}

/// Solves the maximization over the rows after `prefix` and the columns not
/// already taken by it, and returns the completed permutation.
fn complete(z: &CostMatrix, prefix: &[usize]) -> Vec<usize> {
    let n = z.size;
    let rows: Vec<usize> = (prefix.len()..n).collect();
    let cols: Vec<usize> = (0..n).filter(|c| !prefix.contains(c)).collect();
    let k = rows.len();
    let mut perm = prefix.to_vec();
    if k == 0 {
        return perm;
    }
    let sub: Vec<f64> = rows
        .iter()
        .flat_map(|&r| cols.iter().map(move |&c| -z.get(r, c)))
        .collect();
    perm.extend(hungarian_min(&sub, k).into_iter().map(|j| cols[j]));
    perm
}

fn permutation_value(z: &CostMatrix, perm: &[usize]) -> f64 {
    perm.iter().enumerate().map(|(n, &c)| z.get(n, c)).sum()
}

/// Permutation maximizing `Σ_n Z[n][perm(n)]`. Among optimal permutations the
/// lexicographically smallest one (by beam index) is returned.
pub fn assign(z: &CostMatrix) -> Result<Assignment> {
    let n = z.size;
    if n == 0 {
        return Err(Error::Empty("cost matrix"));
    }
    if z.values.len() != n * n {
        return Err(Error::NonSquare {
            rows: n,
            cols: z.values.len() / n,
        });
    }
    if z.values.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("cost matrix"));
    }
    let optimum = permutation_value(z, &complete(z, &[]));
    let scale = z.values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let tol = 1e-12 * (1.0 + scale * n as f64);
    // Fix rows in order to the smallest column that still reaches the optimum.
    let mut prefix: Vec<usize> = Vec::with_capacity(n);
    let mut perm = Vec::new();
    for _ in 0..n {
        let mut chosen = None;
        let free: Vec<usize> = (0..n).filter(|c| !prefix.contains(c)).collect();
        for col in free {
            prefix.push(col);
            let candidate = complete(z, &prefix);
            if permutation_value(z, &candidate) >= optimum - tol {
                chosen = Some(candidate);
                break;
            }
            prefix.pop();
        }
        match chosen {
            Some(c) => perm = c,
            // unreachable in exact arithmetic; keep the unconstrained optimum
            None => {
                perm = complete(z, &prefix);
                prefix.push(perm[prefix.len()]);
            }
        }
    }
    let value = permutation_value(z, &perm);
    Ok(Assignment {
        permutation: perm,
        cost: z.clone(),
        value,
    })
}
