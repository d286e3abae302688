//! Uniform manifold approximation and projection to two dimensions.
//!
//! The stages follow the reference algorithm: exact k-nearest neighbors,
//! per-point bandwidth calibration (rho/sigma smoothing), fuzzy union of the
//! directed membership graph, least-squares fit of the low-dimensional decay
//! curve `1 / (1 + a d^(2b))` from `min_dist`, principal-component
//! initialization, and edge-sampled stochastic gradient descent with negative
//! sampling. Everything is single-threaded and driven by one ChaCha20 stream,
//! so identical `(features, params, seed)` give identical coordinates.
//! Input rows must already be in canonical order; callers sort by sample id.

use super::{EmbeddingResult, PointTag, UmapParamsRecord};
use crate::error::{Error, Result};
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

#[derive(Debug, Clone, Copy)]
pub struct UmapParams {
    pub n_neighbors: usize,
    pub min_dist: f64,
    pub spread: f64,
    pub n_epochs: usize,
    pub negative_sample_rate: usize,
    pub initial_alpha: f64,
    pub seed: u64,
}

impl Default for UmapParams {
    fn default() -> Self {
        UmapParams {
            n_neighbors: 15,
            min_dist: 0.1,
            spread: 1.0,
            n_epochs: 300,
            negative_sample_rate: 5,
            initial_alpha: 1.0,
            seed: 0,
        }
    }
}

struct Edge {
    from: usize,
    to: usize,
    weight: f64,
}

/// Exact brute-force k-nearest neighbors (desk-scale N).
fn knn(features: &Array2<f64>, k: usize) -> (Vec<Vec<usize>>, Vec<Vec<f64>>) {
    let n = features.nrows();
    let mut all_idx = Vec::with_capacity(n);
    let mut all_dist = Vec::with_capacity(n);
    for i in 0..n {
        let row_i = features.row(i);
        let mut dists: Vec<(f64, usize)> = (0..n)
            .filter(|&j| j != i)
            .map(|j| {
                let row_j = features.row(j);
                let mut acc = 0.0;
                for (a, b) in row_i.iter().zip(row_j.iter()) {
                    let d = a - b;
                    acc += d * d;
                }
                (acc.sqrt(), j)
            })
            .collect();
        dists.sort_by(|a, b| a.partial_cmp(b).unwrap());
        dists.truncate(k);
        all_idx.push(dists.iter().map(|&(_, j)| j).collect());
        all_dist.push(dists.iter().map(|&(d, _)| d).collect());
    }
    (all_idx, all_dist)
}

/// Smooth-kNN calibration: rho is the nearest-neighbor distance; sigma is the
/// bandwidth making the summed membership equal log2(k).
fn calibrate(dists: &[Vec<f64>], k: usize) -> (Vec<f64>, Vec<f64>) {
    let target = (k as f64).log2();
    let mut rhos = Vec::with_capacity(dists.len());
    let mut sigmas = Vec::with_capacity(dists.len());
    for row in dists {
        let rho = row
            .iter()
            .cloned()
            .filter(|&d| d > 0.0)
            .fold(f64::INFINITY, f64::min);
        let rho = if rho.is_finite() { rho } else { 0.0 };
        let mut lo = 0.0f64;
        let mut hi = f64::INFINITY;
        let mut mid = 1.0f64;
        for _ in 0..64 {
            let sum: f64 = row
                .iter()
                .map(|&d| (-((d - rho).max(0.0)) / mid).exp())
                .sum();
            if (sum - target).abs() < 1e-5 {
                break;
            }
            if sum > target {
                hi = mid;
                mid = (lo + hi) / 2.0;
            } else {
                lo = mid;
                mid = if hi.is_finite() { (lo + hi) / 2.0 } else { mid * 2.0 };
            }
        }
        rhos.push(rho);
        sigmas.push(mid.max(1e-12));
    }
    (rhos, sigmas)
}

/// Directed memberships combined by fuzzy union: `w = u + v - u v`.
fn fuzzy_graph(
    idx: &[Vec<usize>],
    dists: &[Vec<f64>],
    rhos: &[f64],
    sigmas: &[f64],
) -> Vec<Edge> {
    let n = idx.len();
    let mut directed: std::collections::BTreeMap<(usize, usize), f64> =
        std::collections::BTreeMap::new();
    for i in 0..n {
        for (pos, &j) in idx[i].iter().enumerate() {
            let d = dists[i][pos];
            let w = (-((d - rhos[i]).max(0.0)) / sigmas[i]).exp();
            directed.insert((i, j), w);
        }
    }
    let mut edges = Vec::new();
    for (&(i, j), &u) in &directed {
        if i > j {
            continue;
        }
        let v = directed.get(&(j, i)).copied().unwrap_or(0.0);
        let w = u + v - u * v;
        if w > 0.0 {
            edges.push(Edge {
                from: i,
                to: j,
                weight: w,
            });
        }
    }
    edges
}

/// Least-squares fit of `1 / (1 + a d^(2b))` to the target membership curve
/// defined by `min_dist` and `spread`, by Gauss-Newton on sampled points.
pub fn fit_curve(min_dist: f64, spread: f64) -> (f64, f64) {
    let xs: Vec<f64> = (1..=300).map(|i| i as f64 * 3.0 * spread / 300.0).collect();
    let ys: Vec<f64> = xs
        .iter()
        .map(|&x| {
            if x < min_dist {
                1.0
            } else {
                (-(x - min_dist) / spread).exp()
            }
        })
        .collect();
    let mut a = 1.0f64;
    let mut b = 1.0f64;
    for _ in 0..200 {
        // Residuals and Jacobian of f(x) = 1 / (1 + a x^(2b)).
        let mut jtj = [[0.0f64; 2]; 2];
        let mut jtr = [0.0f64; 2];
        for (&x, &y) in xs.iter().zip(&ys) {
            let x2b = x.powf(2.0 * b);
            let denom = 1.0 + a * x2b;
            let f = 1.0 / denom;
            let r = y - f;
            let df_da = -x2b / (denom * denom);
            let df_db = -a * x2b * 2.0 * x.ln() / (denom * denom);
            jtj[0][0] += df_da * df_da;
            jtj[0][1] += df_da * df_db;
            jtj[1][0] += df_db * df_da;
            jtj[1][1] += df_db * df_db;
            jtr[0] += df_da * r;
            jtr[1] += df_db * r;
        }
        // Levenberg damping keeps the 2x2 solve well-posed.
        let damp = 1e-9;
        let det = (jtj[0][0] + damp) * (jtj[1][1] + damp) - jtj[0][1] * jtj[1][0];
        if det.abs() < 1e-18 {
            break;
        }
        let da = (jtr[0] * (jtj[1][1] + damp) - jtr[1] * jtj[0][1]) / det;
        let db = (jtr[1] * (jtj[0][0] + damp) - jtr[0] * jtj[1][0]) / det;
        a += da;
        b += db;
        if da.abs() < 1e-12 && db.abs() < 1e-12 {
            break;
        }
    }
    (a, b)
}

/// Deterministic top-2 principal components via orthogonalized power
/// iteration, scaled to a 10-unit extent.
fn pca_init(features: &Array2<f64>) -> Vec<[f64; 2]> {
    let n = features.nrows();
    let d = features.ncols();
    let mut mean = vec![0.0f64; d];
    for row in features.rows() {
        for (m, &v) in mean.iter_mut().zip(row.iter()) {
            *m += v;
        }
    }
    for m in &mut mean {
        *m /= n as f64;
    }
    // Power iteration on the centered Gram product without materializing the
    // covariance matrix.
    let centered_dot = |v: &[f64]| -> Vec<f64> {
        // X^T (X v) with X centered.
        let mut xv = vec![0.0f64; n];
        for (i, row) in features.rows().into_iter().enumerate() {
            let mut acc = 0.0;
            for ((&x, &m), &vv) in row.iter().zip(&mean).zip(v.iter()) {
                acc += (x - m) * vv;
            }
            xv[i] = acc;
        }
        let mut out = vec![0.0f64; d];
        for (i, row) in features.rows().into_iter().enumerate() {
            for ((o, &x), &m) in out.iter_mut().zip(row.iter()).zip(&mean) {
                *o += (x - m) * xv[i];
            }
        }
        out
    };
    let normalize = |v: &mut [f64]| {
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 0.0 {
            for x in v.iter_mut() {
                *x /= norm;
            }
        }
    };
    let mut comp1: Vec<f64> = (0..d).map(|i| ((i * 2654435761) % 1000) as f64 / 1000.0 - 0.5).collect();
    normalize(&mut comp1);
    for _ in 0..50 {
        comp1 = centered_dot(&comp1);
        normalize(&mut comp1);
    }
    let mut comp2: Vec<f64> = (0..d).map(|i| ((i * 40503 + 7) % 1000) as f64 / 1000.0 - 0.5).collect();
    for _ in 0..50 {
        comp2 = centered_dot(&comp2);
        let dot: f64 = comp2.iter().zip(&comp1).map(|(a, b)| a * b).sum();
        for (x, &c) in comp2.iter_mut().zip(&comp1) {
            *x -= dot * c;
        }
        normalize(&mut comp2);
    }
    let project = |row: ndarray::ArrayView1<'_, f64>, comp: &[f64]| -> f64 {
        row.iter()
            .zip(&mean)
            .zip(comp)
            .map(|((&x, &m), &c)| (x - m) * c)
            .sum()
    };
    let mut coords: Vec<[f64; 2]> = features
        .rows()
        .into_iter()
        .map(|row| [project(row, &comp1), project(row, &comp2)])
        .collect();
    let max_abs = coords
        .iter()
        .flat_map(|c| c.iter())
        .fold(0.0f64, |m, &v| m.max(v.abs()));
    if max_abs > 0.0 {
        for c in &mut coords {
            c[0] *= 10.0 / max_abs;
            c[1] *= 10.0 / max_abs;
        }
    }
    coords
}

/// Compute a 2-D embedding of `features` (one row per sample). `sample_ids`
/// and `labels` ride along into the result. Requires `N > n_neighbors`.
pub fn compute_embedding(
    features: &Array2<f64>,
    sample_ids: Vec<String>,
    labels: Vec<PointTag>,
    params: &UmapParams,
) -> Result<EmbeddingResult> {
    let n = features.nrows();
    if n <= params.n_neighbors {
        return Err(Error::TooFewSamples {
            needed: params.n_neighbors,
            got: n,
        });
    }
    if sample_ids.len() != n || labels.len() != n {
        return Err(Error::ShapeMismatch(
            "sample ids / labels length mismatch".into(),
        ));
    }
    if features.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidSpec("non-finite feature input".into()));
    }

    // Canonicalize row order by sample id so determinism survives input
    // reordering: permuting the inputs permutes the outputs identically.
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| sample_ids[i].cmp(&sample_ids[j]));
    let features = &Array2::from_shape_fn((n, features.ncols()), |(i, j)| {
        features[[order[i], j]]
    });
    let sample_ids: Vec<String> = order.iter().map(|&i| sample_ids[i].clone()).collect();
    let labels: Vec<PointTag> = order.iter().map(|&i| labels[i].clone()).collect();

    let (idx, dists) = knn(features, params.n_neighbors);
    let (rhos, sigmas) = calibrate(&dists, params.n_neighbors);
    let edges = fuzzy_graph(&idx, &dists, &rhos, &sigmas);
    let (a, b) = fit_curve(params.min_dist, params.spread);
    let mut coords = pca_init(features);

    // Edge sampling schedule: an edge with weight w fires every
    // max_weight / w epochs.
    let max_weight = edges.iter().map(|e| e.weight).fold(0.0f64, f64::max);
    let epochs_per_sample: Vec<f64> = edges
        .iter()
        .map(|e| {
            if e.weight > 0.0 {
                max_weight / e.weight
            } else {
                f64::INFINITY
            }
        })
        .collect();
    let mut next_sample: Vec<f64> = epochs_per_sample.clone();

    let mut rng = ChaCha20Rng::seed_from_u64(params.seed);
    let clip = |v: f64| v.clamp(-4.0, 4.0);
    for epoch in 0..params.n_epochs {
        let alpha = params.initial_alpha * (1.0 - epoch as f64 / params.n_epochs as f64);
        for (ei, edge) in edges.iter().enumerate() {
            if next_sample[ei] > (epoch + 1) as f64 {
                continue;
            }
            next_sample[ei] += epochs_per_sample[ei];
            let (i, j) = (edge.from, edge.to);
            // Attractive move along the edge.
            let dx = coords[i][0] - coords[j][0];
            let dy = coords[i][1] - coords[j][1];
            let d2 = dx * dx + dy * dy;
            if d2 > 0.0 {
                let coeff = (-2.0 * a * b * d2.powf(b - 1.0)) / (1.0 + a * d2.powf(b));
                let gx = clip(coeff * dx) * alpha;
                let gy = clip(coeff * dy) * alpha;
                coords[i][0] += gx;
                coords[i][1] += gy;
                coords[j][0] -= gx;
                coords[j][1] -= gy;
            }
            // Repulsive moves against sampled non-neighbors.
            for _ in 0..params.negative_sample_rate {
                let k = rng.random_range(0..n);
                if k == i || k == j {
                    continue;
                }
                let dx = coords[i][0] - coords[k][0];
                let dy = coords[i][1] - coords[k][1];
                let d2 = dx * dx + dy * dy;
                let coeff = if d2 > 0.0 {
                    (2.0 * b) / ((0.001 + d2) * (1.0 + a * d2.powf(b)))
                } else {
                    0.0
                };
                let gx = clip(coeff * dx) * alpha;
                let gy = clip(coeff * dy) * alpha;
                if d2 > 0.0 {
                    coords[i][0] += gx;
                    coords[i][1] += gy;
                } else {
                    // Coincident points get a deterministic nudge.
                    coords[i][0] += alpha;
                }
            }
        }
    }

    if coords.iter().flat_map(|c| c.iter()).any(|v| !v.is_finite()) {
        return Err(Error::NonFiniteLoss {
            step: params.n_epochs,
            detail: "embedding produced non-finite coordinates".into(),
        });
    }

    Ok(EmbeddingResult {
        coordinates: coords,
        sample_ids,
        labels,
        params: UmapParamsRecord {
            n_neighbors: params.n_neighbors,
            min_dist: params.min_dist,
            seed: params.seed,
        },
        feature_source: super::FeatureSource::RawPixels, // caller overwrites
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_clusters(n_per: usize, dim: usize, separation: f64) -> (Array2<f64>, Vec<usize>) {
        // Deterministic pseudo-noise around two centers `separation` apart
        // (unit within-cluster scale).
        let n = n_per * 2;
        let mut data = Array2::<f64>::zeros((n, dim));
        let mut truth = Vec::with_capacity(n);
        for i in 0..n {
            let cluster = i / n_per;
            truth.push(cluster);
            for j in 0..dim {
                let noise = ((((i * 131 + j * 31 + 17) % 1000) as f64) / 1000.0 - 0.5) * 2.0;
                data[[i, j]] = noise + if cluster == 1 && j == 0 { separation } else { 0.0 };
            }
        }
        (data, truth)
    }

    #[test]
    fn shape_and_determinism() {
        let (data, _) = two_clusters(30, 8, 10.0);
        let params = UmapParams {
            n_neighbors: 10,
            n_epochs: 50,
            seed: 4,
            ..UmapParams::default()
        };
        let ids: Vec<String> = (0..60).map(|i| format!("s{i}")).collect();
        let labels: Vec<String> = (0..60).map(|i| format!("c{}", i / 30)).collect();
        let r1 = compute_embedding(&data, ids.clone(), labels.clone(), &params).unwrap();
        let r2 = compute_embedding(&data, ids, labels, &params).unwrap();
        assert_eq!(r1.coordinates.len(), 60);
        assert_eq!(r1.coordinates, r2.coordinates);
        assert!(r1
            .coordinates
            .iter()
            .all(|c| c[0].is_finite() && c[1].is_finite()));
    }

    #[test]
    fn permutation_consistent() {
        let (data, _) = two_clusters(20, 5, 8.0);
        let params = UmapParams {
            n_neighbors: 8,
            n_epochs: 40,
            seed: 2,
            ..UmapParams::default()
        };
        let ids: Vec<String> = (0..40).map(|i| format!("s{i:02}")).collect();
        let labels: Vec<String> = (0..40).map(|i| format!("c{}", i / 20)).collect();
        let straight = compute_embedding(&data, ids.clone(), labels.clone(), &params).unwrap();
        // Reverse the row order; the per-id coordinates must not change.
        let reversed = Array2::from_shape_fn(data.dim(), |(i, j)| data[[39 - i, j]]);
        let rev_ids: Vec<String> = ids.iter().rev().cloned().collect();
        let rev_labels: Vec<String> = labels.iter().rev().cloned().collect();
        let permuted = compute_embedding(&reversed, rev_ids, rev_labels, &params).unwrap();
        for (id, coord) in straight.sample_ids.iter().zip(&straight.coordinates) {
            let j = permuted.sample_ids.iter().position(|p| p == id).unwrap();
            assert_eq!(coord, &permuted.coordinates[j], "id {id}");
        }
    }

    #[test]
    fn too_few_samples_rejected() {
        let data = Array2::<f64>::zeros((5, 3));
        let params = UmapParams {
            n_neighbors: 10,
            ..UmapParams::default()
        };
        assert!(matches!(
            compute_embedding(&data, vec!["a".into(); 5], vec!["l".into(); 5], &params),
            Err(Error::TooFewSamples { .. })
        ));
    }

    #[test]
    fn well_separated_clusters_recovered() {
        let (data, truth) = two_clusters(50, 6, 10.0);
        let params = UmapParams {
            n_neighbors: 12,
            n_epochs: 200,
            seed: 7,
            ..UmapParams::default()
        };
        let ids: Vec<String> = (0..100).map(|i| format!("s{i:03}")).collect();
        let labels: Vec<String> = truth.iter().map(|t| format!("c{t}")).collect();
        let result = compute_embedding(&data, ids, labels, &params).unwrap();
        // Nearest-centroid assignment in embedding space.
        let centroid = |cluster: usize| -> [f64; 2] {
            let pts: Vec<&[f64; 2]> = result
                .coordinates
                .iter()
                .zip(&truth)
                .filter(|(_, &t)| t == cluster)
                .map(|(c, _)| c)
                .collect();
            let n = pts.len() as f64;
            [
                pts.iter().map(|p| p[0]).sum::<f64>() / n,
                pts.iter().map(|p| p[1]).sum::<f64>() / n,
            ]
        };
        let c0 = centroid(0);
        let c1 = centroid(1);
        let mut correct = 0;
        for (point, &t) in result.coordinates.iter().zip(&truth) {
            let d0 = (point[0] - c0[0]).powi(2) + (point[1] - c0[1]).powi(2);
            let d1 = (point[0] - c1[0]).powi(2) + (point[1] - c1[1]).powi(2);
            let assigned = if d0 <= d1 { 0 } else { 1 };
            if assigned == t {
                correct += 1;
            }
        }
        assert!(
            correct >= 95,
            "nearest-centroid recovery {correct}/100 below 95%"
        );
    }

    #[test]
    fn curve_fit_matches_reference_defaults() {
        // Reference values for min_dist = 0.1, spread = 1.0 are
        // a ~ 1.577, b ~ 0.895.
        let (a, b) = fit_curve(0.1, 1.0);
        assert!((a - 1.577).abs() < 0.05, "a = {a}");
        assert!((b - 0.8951).abs() < 0.02, "b = {b}");
    }
}
