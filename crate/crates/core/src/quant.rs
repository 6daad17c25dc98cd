//! Exploratory statistics over clips and channels: five-number summaries,
//! PCA, channel correlation, hierarchical sensor clustering, two-sample
//! distribution shift and z-score outlier scans.
//!
//! Observation matrices are row-major [`Matrix`] values with one row per
//! observation and one column per feature (channel).

use serde::Serialize;

use crate::error::{Error, Result};
use crate::mat::Matrix;

// --- five-number summary ---

/// Tukey-style summary of one channel. Quartiles use linear interpolation
/// between order statistics (the same convention as NumPy's default);
/// fences sit 1.5 * IQR beyond the quartiles.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FiveNumberSummary {
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
    pub iqr: f64,
    pub lower_fence: f64,
    pub upper_fence: f64,
    /// Samples strictly outside the fences.
    pub outlier_count: usize,
}

fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let pos = (sorted.len() - 1) as f64 * p;
    let lo = pos.floor() as usize;
    let frac = pos - lo as f64;
    if frac == 0.0 {
        sorted[lo]
    } else {
        sorted[lo] + frac * (sorted[lo + 1] - sorted[lo])
    }
}

pub fn summarize_channel(x: &[f64]) -> Result<FiveNumberSummary> {
    if x.is_empty() {
        return Err(Error::EmptyInput("summarize_channel".into()));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("summarize_channel input".into()));
    }
    let mut sorted = x.to_vec();
    sorted.sort_unstable_by(f64::total_cmp);
    let q1 = quantile_sorted(&sorted, 0.25);
    let median = quantile_sorted(&sorted, 0.5);
    let q3 = quantile_sorted(&sorted, 0.75);
    let iqr = q3 - q1;
    let lower_fence = q1 - 1.5 * iqr;
    let upper_fence = q3 + 1.5 * iqr;
    let outlier_count = sorted
        .iter()
        .filter(|&&v| v < lower_fence || v > upper_fence)
        .count();
    Ok(FiveNumberSummary {
        min: sorted[0],
        q1,
        median,
        q3,
        max: *sorted.last().unwrap(),
        iqr,
        lower_fence,
        upper_fence,
        outlier_count,
    })
}

// --- symmetric eigendecomposition (cyclic Jacobi) ---

/// Eigenvalues (descending) and matching eigenvector columns of a symmetric
/// matrix, via cyclic Jacobi rotations. Each eigenvector's largest-magnitude
/// entry is made positive so results are sign-deterministic.
fn jacobi_eigh(a: &Matrix) -> Result<(Vec<f64>, Matrix)> {
    let n = a.n_rows();
    if a.n_cols() != n {
        return Err(Error::ShapeMismatch("jacobi_eigh needs a square matrix".into()));
    }
    let mut m = a.data().to_vec();
    let mut v = vec![0.0; n * n];
    for i in 0..n {
        v[i * n + i] = 1.0;
    }
    let fro_sq: f64 = m.iter().map(|x| x * x).sum();
    let tol = 1e-30 * fro_sq.max(f64::MIN_POSITIVE);

    for _sweep in 0..60 {
        let mut off_sq = 0.0;
        for p in 0..n {
            for q in (p + 1)..n {
                off_sq += 2.0 * m[p * n + q] * m[p * n + q];
            }
        }
        if off_sq <= tol {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m[p * n + q];
                if apq == 0.0 {
                    continue;
                }
                let app = m[p * n + p];
                let aqq = m[q * n + q];
                let theta = (aqq - app) / (2.0 * apq);
                let t = if theta >= 0.0 {
                    1.0 / (theta + (theta * theta + 1.0).sqrt())
                } else {
                    -1.0 / (-theta + (theta * theta + 1.0).sqrt())
                };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                // A <- J^T A J with J the (p,q) rotation.
                for k in 0..n {
                    let akp = m[k * n + p];
                    let akq = m[k * n + q];
                    m[k * n + p] = c * akp - s * akq;
                    m[k * n + q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = m[p * n + k];
                    let aqk = m[q * n + k];
                    m[p * n + k] = c * apk - s * aqk;
                    m[q * n + k] = s * apk + c * aqk;
                }
                for k in 0..n {
                    let vkp = v[k * n + p];
                    let vkq = v[k * n + q];
                    v[k * n + p] = c * vkp - s * vkq;
                    v[k * n + q] = s * vkp + c * vkq;
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m[j * n + j].total_cmp(&m[i * n + i]));
    let eigenvalues: Vec<f64> = order.iter().map(|&i| m[i * n + i]).collect();
    let mut vectors = Matrix::zeros(n, n);
    for (col, &src) in order.iter().enumerate() {
        // Sign convention: largest-|entry| component positive.
        let mut best = 0;
        for k in 1..n {
            if v[k * n + src].abs() > v[best * n + src].abs() {
                best = k;
            }
        }
        let sign = if v[best * n + src] < 0.0 { -1.0 } else { 1.0 };
        for k in 0..n {
            vectors.set(k, col, sign * v[k * n + src]);
        }
    }
    Ok((eigenvalues, vectors))
}

// --- PCA ---

/// Principal component analysis of an observations x features matrix.
#[derive(Debug, Clone, Serialize)]
pub struct PcaResult {
    /// Covariance eigenvalues, descending, clamped at zero.
    pub eigenvalues: Vec<f64>,
    /// Fraction of total variance per component; sums to 1.
    pub explained_ratio: Vec<f64>,
    /// Running sum of `explained_ratio`.
    pub cumulative_ratio: Vec<f64>,
    /// Feature-space components, one per column, aligned with `eigenvalues`.
    #[serde(skip)]
    pub components: Matrix,
}

impl PcaResult {
    /// Smallest number of leading components whose cumulative explained
    /// variance reaches `threshold` (a fraction in (0, 1]).
    pub fn min_components_for_variance(&self, threshold: f64) -> usize {
        for (i, &c) in self.cumulative_ratio.iter().enumerate() {
            if c >= threshold - 1e-12 {
                return i + 1;
            }
        }
        self.cumulative_ratio.len()
    }
}

/// PCA on the sample covariance (1/(n-1)) of column-centered data. Needs at
/// least two observations, finite entries, and nonzero total variance.
pub fn pca(data: &Matrix) -> Result<PcaResult> {
    let n = data.n_rows();
    let d = data.n_cols();
    if n < 2 {
        return Err(Error::DegenerateData(format!(
            "pca needs at least 2 observations, got {n}"
        )));
    }
    data.ensure_finite("pca input")?;

    let mut means = vec![0.0; d];
    for r in 0..n {
        for (c, m) in means.iter_mut().enumerate() {
            *m += data.get(r, c);
        }
    }
    for m in &mut means {
        *m /= n as f64;
    }
    let mut cov = Matrix::zeros(d, d);
    for r in 0..n {
        let row = data.row(r);
        for i in 0..d {
            let xi = row[i] - means[i];
            for j in i..d {
                let xj = row[j] - means[j];
                let v = cov.get(i, j) + xi * xj;
                cov.set(i, j, v);
            }
        }
    }
    for i in 0..d {
        for j in i..d {
            let v = cov.get(i, j) / (n - 1) as f64;
            cov.set(i, j, v);
            cov.set(j, i, v);
        }
    }

    let total: f64 = (0..d).map(|i| cov.get(i, i)).sum();
    if total <= 0.0 {
        return Err(Error::DegenerateData(
            "pca input has zero total variance".into(),
        ));
    }
    let (mut eigenvalues, components) = jacobi_eigh(&cov)?;
    for e in &mut eigenvalues {
        // Covariance matrices are PSD; tiny negative values are round-off.
        if *e < 0.0 {
            *e = 0.0;
        }
    }
    let sum: f64 = eigenvalues.iter().sum();
    let explained_ratio: Vec<f64> = eigenvalues.iter().map(|e| e / sum).collect();
    let mut running = 0.0;
    let cumulative_ratio: Vec<f64> = explained_ratio
        .iter()
        .map(|r| {
            running += r;
            running.min(1.0)
        })
        .collect();
    Ok(PcaResult {
        eigenvalues,
        explained_ratio,
        cumulative_ratio,
        components,
    })
}

// --- correlation ---

/// Pearson correlation between feature columns. Symmetric with a unit
/// diagonal; any zero-variance column is an error.
pub fn correlation_matrix(data: &Matrix) -> Result<Matrix> {
    let n = data.n_rows();
    let d = data.n_cols();
    if n < 2 {
        return Err(Error::DegenerateData(format!(
            "correlation needs at least 2 observations, got {n}"
        )));
    }
    data.ensure_finite("correlation input")?;

    let mut means = vec![0.0; d];
    for r in 0..n {
        for (c, m) in means.iter_mut().enumerate() {
            *m += data.get(r, c);
        }
    }
    for m in &mut means {
        *m /= n as f64;
    }
    let mut centered = data.clone();
    for r in 0..n {
        let row = centered.row_mut(r);
        for c in 0..d {
            row[c] -= means[c];
        }
    }
    let mut norms = vec![0.0; d];
    for r in 0..n {
        let row = centered.row(r);
        for c in 0..d {
            norms[c] += row[c] * row[c];
        }
    }
    for (c, nv) in norms.iter().enumerate() {
        if *nv == 0.0 {
            return Err(Error::ZeroVariance { channel: c });
        }
    }

    let mut corr = Matrix::zeros(d, d);
    for i in 0..d {
        corr.set(i, i, 1.0);
        for j in (i + 1)..d {
            let mut dot = 0.0;
            for r in 0..n {
                dot += centered.get(r, i) * centered.get(r, j);
            }
            let v = (dot / (norms[i] * norms[j]).sqrt()).clamp(-1.0, 1.0);
            corr.set(i, j, v);
            corr.set(j, i, v);
        }
    }
    Ok(corr)
}

// --- hierarchical clustering ---

/// One agglomeration step. Cluster ids follow the usual linkage convention:
/// leaves are `0..n`, the cluster created by merge `k` gets id `n + k`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Merge {
    pub a: usize,
    pub b: usize,
    pub distance: f64,
    /// Leaves under the merged cluster.
    pub size: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct Dendrogram {
    pub n_leaves: usize,
    pub merges: Vec<Merge>,
    /// Left-to-right leaf positions from walking the final tree.
    pub leaf_order: Vec<usize>,
}

/// Average-linkage agglomerative clustering of channels, using distance
/// `1 - correlation`. Ties break toward the smallest cluster-id pair, so
/// the merge sequence is deterministic.
pub fn cluster_sensors(corr: &Matrix) -> Result<Dendrogram> {
    let n = corr.n_rows();
    if corr.n_cols() != n {
        return Err(Error::ShapeMismatch("correlation matrix must be square".into()));
    }
    if n < 2 {
        return Err(Error::DegenerateData(
            "clustering needs at least 2 channels".into(),
        ));
    }
    corr.ensure_finite("correlation matrix")?;

    // Active cluster list; dist[(i,j)] keyed by current cluster ids.
    let mut active: Vec<usize> = (0..n).collect();
    let mut sizes: Vec<usize> = vec![1; n];
    let mut dist = std::collections::BTreeMap::<(usize, usize), f64>::new();
    for i in 0..n {
        for j in (i + 1)..n {
            dist.insert((i, j), 1.0 - corr.get(i, j));
        }
    }

    let mut merges = Vec::with_capacity(n - 1);
    let mut children: Vec<Option<(usize, usize)>> = vec![None; n];
    while active.len() > 1 {
        // Smallest distance, ties toward the lexicographically first pair.
        let (&(a, b), &d) = dist
            .iter()
            .min_by(|x, y| x.1.total_cmp(y.1).then(x.0.cmp(y.0)))
            .expect("non-empty distance table");
        let new_id = n + merges.len();
        let (sa, sb) = (sizes[a], sizes[b]);
        merges.push(Merge {
            a,
            b,
            distance: d,
            size: sa + sb,
        });
        children.push(Some((a, b)));
        sizes.push(sa + sb);

        active.retain(|&c| c != a && c != b);
        // Lance-Williams update for average linkage.
        for &c in &active {
            let da = dist[&(a.min(c), a.max(c))];
            let db = dist[&(b.min(c), b.max(c))];
            let dn = (sa as f64 * da + sb as f64 * db) / (sa + sb) as f64;
            dist.insert((c.min(new_id), c.max(new_id)), dn);
        }
        dist.retain(|&(i, j), _| i != a && i != b && j != a && j != b);
        active.push(new_id);
    }

    // In-order walk of the tree for display order.
    let mut leaf_order = Vec::with_capacity(n);
    let mut stack = vec![n + merges.len() - 1];
    while let Some(id) = stack.pop() {
        match children[id] {
            None => leaf_order.push(id),
            Some((a, b)) => {
                // Pop order: a comes out first.
                stack.push(b);
                stack.push(a);
            }
        }
    }
    Ok(Dendrogram {
        n_leaves: n,
        merges,
        leaf_order,
    })
}

// --- distribution shift ---

/// Two-sample Kolmogorov-Smirnov statistic: the supremum distance between
/// the empirical CDFs of `a` and `b`. 0 means identical samples, 1 means
/// fully separated supports.
pub fn distribution_shift(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptyInput("distribution_shift".into()));
    }
    if a.iter().chain(b).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("distribution_shift input".into()));
    }
    let mut sa = a.to_vec();
    let mut sb = b.to_vec();
    sa.sort_unstable_by(f64::total_cmp);
    sb.sort_unstable_by(f64::total_cmp);
    let (na, nb) = (sa.len() as f64, sb.len() as f64);
    let (mut i, mut j) = (0usize, 0usize);
    let mut d = 0.0f64;
    while i < sa.len() && j < sb.len() {
        let v = sa[i].min(sb[j]);
        while i < sa.len() && sa[i] == v {
            i += 1;
        }
        while j < sb.len() && sb[j] == v {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    Ok(d)
}

// --- outliers ---

/// One extreme observation cell.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OutlierHit {
    pub row: usize,
    pub column: usize,
    /// Signed z-score of the offending value.
    pub z: f64,
}

/// Flags cells whose per-column z-score magnitude strictly exceeds `z_threshold`
/// (sample standard deviation, n-1). Columns with zero variance are an
/// error. Hits come back in row-major scan order.
pub fn detect_outliers(data: &Matrix, z_threshold: f64) -> Result<Vec<OutlierHit>> {
    if !(z_threshold.is_finite() && z_threshold > 0.0) {
        return Err(Error::InvalidConfig(format!(
            "z_threshold must be positive, got {z_threshold}"
        )));
    }
    let n = data.n_rows();
    let d = data.n_cols();
    if n < 2 {
        return Err(Error::DegenerateData(format!(
            "outlier scan needs at least 2 observations, got {n}"
        )));
    }
    data.ensure_finite("outlier scan input")?;

    let mut means = vec![0.0; d];
    for r in 0..n {
        for (c, m) in means.iter_mut().enumerate() {
            *m += data.get(r, c);
        }
    }
    for m in &mut means {
        *m /= n as f64;
    }
    let mut stds = vec![0.0; d];
    for r in 0..n {
        for c in 0..d {
            let e = data.get(r, c) - means[c];
            stds[c] += e * e;
        }
    }
    for (c, s) in stds.iter_mut().enumerate() {
        *s = (*s / (n - 1) as f64).sqrt();
        if *s == 0.0 {
            return Err(Error::ZeroVariance { channel: c });
        }
    }

    let mut hits = Vec::new();
    for r in 0..n {
        for c in 0..d {
            let z = (data.get(r, c) - means[c]) / stds[c];
            if z.abs() > z_threshold {
                hits.push(OutlierHit { row: r, column: c, z });
            }
        }
    }
    Ok(hits)
}
