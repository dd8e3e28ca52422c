//! Synthetic data generators for tests and demos.

use crate::numerics::{norm, squared_distance, Dataset, Matrix, RngStream};

/// `k` spherical Gaussian clusters of `per_cluster` points each, std `spread`
/// per coordinate. Centers are pairwise at least `10 * spread` apart. Labels
/// are cluster ids, rows grouped by cluster.
pub fn synth_blobs(k: usize, per_cluster: usize, d: usize, spread: f64, seed: u64) -> Dataset {
    assert!(k >= 1 && per_cluster >= 1 && d >= 1, "k, per_cluster and d must be positive");
    let mut rng = RngStream::new(seed);
    let min_sep = 10.0 * spread.abs().max(f64::MIN_POSITIVE);
    let min_sep2 = min_sep * min_sep;

    // Rejection-sample centers in a cube that widens after repeated failures.
    let mut half_width = min_sep;
    let mut centers: Vec<Vec<f64>> = Vec::with_capacity(k);
    let mut failures = 0;
    while centers.len() < k {
        let c: Vec<f64> = (0..d).map(|_| rng.uniform_range(-half_width, half_width)).collect();
        if centers.iter().all(|o| squared_distance(o, &c) >= min_sep2) {
            centers.push(c);
            failures = 0;
        } else {
            failures += 1;
            if failures >= 64 {
                half_width *= 1.5;
                failures = 0;
            }
        }
    }

    let mut data = Vec::with_capacity(k * per_cluster * d);
    let mut labels = Vec::with_capacity(k * per_cluster);
    for (c, center) in centers.iter().enumerate() {
        for _ in 0..per_cluster {
            data.extend(center.iter().map(|m| m + spread * rng.normal()));
            labels.push(c as i64);
        }
    }
    let features = Matrix::from_vec(k * per_cluster, d, data).expect("sized above");
    Dataset::new(features, Some(labels)).expect("finite by construction")
}

/// Standard-Gaussian normals plus anomalies scattered uniformly in direction on
/// a shell of radius `[√d + 6, √d + 8]`, i.e. at least six per-coordinate
/// standard deviations beyond the typical normal radius. Label 1 marks anomalies.
/// Rows are shuffled.
pub fn synth_anomaly(n_normal: usize, n_anomaly: usize, d: usize, seed: u64) -> Dataset {
    assert!(n_anomaly < n_normal, "anomalies must be the minority");
    assert!(d >= 1, "d must be positive");
    let mut rng = RngStream::new(seed);
    let n = n_normal + n_anomaly;
    let r0 = (d as f64).sqrt() + 6.0;

    let mut rows: Vec<(Vec<f64>, i64)> = Vec::with_capacity(n);
    for _ in 0..n_normal {
        rows.push(((0..d).map(|_| rng.normal()).collect(), 0));
    }
    for _ in 0..n_anomaly {
        let mut dir: Vec<f64> = (0..d).map(|_| rng.normal()).collect();
        let mut len = norm(&dir);
        while len == 0.0 {
            dir = (0..d).map(|_| rng.normal()).collect();
            len = norm(&dir);
        }
        let radius = rng.uniform_range(r0, r0 + 2.0);
        rows.push((dir.iter().map(|v| v / len * radius).collect(), 1));
    }
    rng.shuffle(&mut rows);

    let mut data = Vec::with_capacity(n * d);
    let mut labels = Vec::with_capacity(n);
    for (x, y) in rows {
        data.extend(x);
        labels.push(y);
    }
    let features = Matrix::from_vec(n, d, data).expect("sized above");
    Dataset::new(features, Some(labels)).expect("finite by construction")
}
