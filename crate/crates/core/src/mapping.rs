//! Frozen random mappings that supply the supervisory inner products.
//!
//! A [`RandomMap`] is drawn once from its seed and never changes afterwards.
//! Four constructions are available:
//!
//! * Gaussian random projection, `x ↦ A x / √K` with `A_ij ~ N(0, 1)`;
//! * very sparse random projection, entries `±√(1/(sK))` with probability
//!   `s/2` each and zero otherwise, applied as a plain product;
//! * random Fourier features, `x ↦ √(2/K) cos(W x + b)` with
//!   `W_ij ~ N(0, 1/σ²)` and `b_i ~ U[0, 2π)`, whose inner products are
//!   unbiased estimates of the RBF kernel of bandwidth `σ`;
//! * the identity, which makes the targets raw inner products of the inputs.
//!
//! The full weight matrix is kept so a map can be persisted and restored
//! without replaying the generator.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::numerics::{dot, norm, squared_distance, Matrix, RngStream};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MapKind {
    GaussianRp,
    SparseRp,
    Rff,
    Identity,
}

impl MapKind {
    pub fn name(self) -> &'static str {
        match self {
            MapKind::GaussianRp => "gaussian_rp",
            MapKind::SparseRp => "sparse_rp",
            MapKind::Rff => "rff",
            MapKind::Identity => "identity",
        }
    }

    pub(crate) fn tag(self) -> u8 {
        match self {
            MapKind::GaussianRp => 0,
            MapKind::SparseRp => 1,
            MapKind::Rff => 2,
            MapKind::Identity => 3,
        }
    }

    pub(crate) fn from_tag(tag: u8) -> Option<Self> {
        Some(match tag {
            0 => MapKind::GaussianRp,
            1 => MapKind::SparseRp,
            2 => MapKind::Rff,
            3 => MapKind::Identity,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RandomMap {
    kind: MapKind,
    weights: Option<Matrix>,
    offsets: Option<Vec<f64>>,
    in_dim: usize,
    out_dim: usize,
    bandwidth: Option<f64>,
    density: Option<f64>,
    seed: u64,
}

fn check_dims(d: usize, k: usize) -> Result<()> {
    if d == 0 || k == 0 {
        return Err(Error::InvalidArgument(format!(
            "map dimensions must be positive, got in={d}, out={k}"
        )));
    }
    Ok(())
}

impl RandomMap {
    pub fn new_gaussian_rp(d: usize, k: usize, seed: u64) -> Result<Self> {
        check_dims(d, k)?;
        let mut rng = RngStream::new(seed);
        let weights = Matrix::from_fn(k, d, |_, _| rng.normal());
        Ok(Self {
            kind: MapKind::GaussianRp,
            weights: Some(weights),
            offsets: None,
            in_dim: d,
            out_dim: k,
            bandwidth: None,
            density: None,
            seed,
        })
    }

    /// Sparse projection with the given nonzero `density`, or `1/√d` when `None`.
    pub fn new_sparse_rp(d: usize, k: usize, density: Option<f64>, seed: u64) -> Result<Self> {
        check_dims(d, k)?;
        let s = density.unwrap_or_else(|| 1.0 / (d as f64).sqrt());
        if !(s > 0.0 && s <= 1.0) {
            return Err(Error::InvalidArgument(format!("density must lie in (0, 1], got {s}")));
        }
        let v = (1.0 / (s * k as f64)).sqrt();
        let mut rng = RngStream::new(seed);
        let weights = Matrix::from_fn(k, d, |_, _| {
            let u = rng.uniform();
            if u < s / 2.0 {
                v
            } else if u < s {
                -v
            } else {
                0.0
            }
        });
        Ok(Self {
            kind: MapKind::SparseRp,
            weights: Some(weights),
            offsets: None,
            in_dim: d,
            out_dim: k,
            bandwidth: None,
            density: Some(s),
            seed,
        })
    }

    /// Random Fourier features for the RBF kernel of bandwidth `sigma`.
    pub fn new_rff(d: usize, k: usize, sigma: f64, seed: u64) -> Result<Self> {
        check_dims(d, k)?;
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::InvalidArgument(format!("bandwidth must be positive, got {sigma}")));
        }
        let mut rng = RngStream::new(seed);
        let weights = Matrix::from_fn(k, d, |_, _| rng.normal() / sigma);
        let offsets = (0..k).map(|_| rng.uniform_range(0.0, 2.0 * PI)).collect();
        Ok(Self {
            kind: MapKind::Rff,
            weights: Some(weights),
            offsets: Some(offsets),
            in_dim: d,
            out_dim: k,
            bandwidth: Some(sigma),
            density: None,
            seed,
        })
    }

    /// Random Fourier features with `σ` chosen by [`median_heuristic`] on `data`.
    pub fn new_rff_median(data: &Matrix, k: usize, seed: u64) -> Result<Self> {
        let sigma = median_heuristic(data, seed);
        Self::new_rff(data.cols(), k, sigma, seed)
    }

    pub fn new_identity(d: usize) -> Result<Self> {
        check_dims(d, d)?;
        Ok(Self {
            kind: MapKind::Identity,
            weights: None,
            offsets: None,
            in_dim: d,
            out_dim: d,
            bandwidth: None,
            density: None,
            seed: 0,
        })
    }

    /// Reassembles a map from stored parts, validating shapes.
    #[allow(clippy::too_many_arguments)]
    pub(crate) fn from_parts(
        kind: MapKind,
        in_dim: usize,
        out_dim: usize,
        seed: u64,
        bandwidth: Option<f64>,
        density: Option<f64>,
        weights: Option<Matrix>,
        offsets: Option<Vec<f64>>,
    ) -> Result<Self> {
        check_dims(in_dim, out_dim)?;
        let bad = |m: &str| Err(Error::Malformed(format!("{} map: {m}", kind.name())));
        match kind {
            MapKind::Identity => {
                if in_dim != out_dim || weights.is_some() || offsets.is_some() {
                    return bad("identity map carries no parameters and has out = in");
                }
            }
            _ => match &weights {
                Some(w) if w.rows() == out_dim && w.cols() == in_dim => {}
                _ => return bad("weight matrix shape"),
            },
        }
        match (kind, &offsets, bandwidth) {
            (MapKind::Rff, Some(o), Some(s)) if o.len() == out_dim && s > 0.0 => {}
            (MapKind::Rff, _, _) => return bad("offsets or bandwidth"),
            (_, Some(_), _) => return bad("unexpected offsets"),
            _ => {}
        }
        Ok(Self {
            kind,
            weights,
            offsets,
            in_dim,
            out_dim,
            bandwidth,
            density,
            seed,
        })
    }

    pub fn kind(&self) -> MapKind {
        self.kind
    }

    pub fn in_dim(&self) -> usize {
        self.in_dim
    }

    pub fn out_dim(&self) -> usize {
        self.out_dim
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn bandwidth(&self) -> Option<f64> {
        self.bandwidth
    }

    pub fn density(&self) -> Option<f64> {
        self.density
    }

    pub fn weights(&self) -> Option<&Matrix> {
        self.weights.as_ref()
    }

    pub fn offsets(&self) -> Option<&[f64]> {
        self.offsets.as_deref()
    }

    /// `η(x)` for a single vector.
    pub fn apply_row(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.in_dim {
            return Err(Error::DimensionMismatch {
                expected: self.in_dim,
                got: x.len(),
            });
        }
        let mut out = match &self.weights {
            None => return Ok(x.to_vec()),
            Some(w) => w.matvec(x)?,
        };
        match self.kind {
            MapKind::GaussianRp => {
                let scale = 1.0 / (self.out_dim as f64).sqrt();
                out.iter_mut().for_each(|v| *v *= scale);
            }
            MapKind::Rff => {
                let scale = (2.0 / self.out_dim as f64).sqrt();
                let offsets = self.offsets.as_ref().expect("rff carries offsets");
                for (v, b) in out.iter_mut().zip(offsets) {
                    *v = scale * (*v + b).cos();
                }
            }
            MapKind::SparseRp | MapKind::Identity => {}
        }
        Ok(out)
    }

    /// Row-wise `η` over an `n × in_dim` matrix.
    pub fn apply(&self, x: &Matrix) -> Result<Matrix> {
        if x.cols() != self.in_dim {
            return Err(Error::DimensionMismatch {
                expected: self.in_dim,
                got: x.cols(),
            });
        }
        let mut data = Vec::with_capacity(x.rows() * self.out_dim);
        for r in x.row_iter() {
            data.extend(self.apply_row(r)?);
        }
        Matrix::from_vec(x.rows(), self.out_dim, data)
    }

    /// The supervisory target `η(x_i) · η(x_j)`.
    pub fn pairwise_target(&self, xi: &[f64], xj: &[f64]) -> Result<f64> {
        Ok(dot(&self.apply_row(xi)?, &self.apply_row(xj)?))
    }
}

/// `exp(-‖x - y‖² / (2σ²))`.
pub fn rbf_kernel(x: &[f64], y: &[f64], sigma: f64) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: x.len(),
            got: y.len(),
        });
    }
    if !(sigma > 0.0) {
        return Err(Error::InvalidArgument(format!("bandwidth must be positive, got {sigma}")));
    }
    Ok((-squared_distance(x, y) / (2.0 * sigma * sigma)).exp())
}

/// Median pairwise Euclidean distance over a uniform sample of at most 1000 rows.
///
/// Falls back to 1.0 when the sample has fewer than two rows or the median is zero.
pub fn median_heuristic(data: &Matrix, seed: u64) -> f64 {
    const MAX_SAMPLE: usize = 1000;
    let n = data.rows();
    let mut idx: Vec<usize> = (0..n).collect();
    if n > MAX_SAMPLE {
        RngStream::new(seed).shuffle(&mut idx);
        idx.truncate(MAX_SAMPLE);
        idx.sort_unstable();
    }
    let mut dists = Vec::with_capacity(idx.len() * idx.len().saturating_sub(1) / 2);
    for (a, &i) in idx.iter().enumerate() {
        for &j in &idx[a + 1..] {
            dists.push(squared_distance(data.row(i), data.row(j)).sqrt());
        }
    }
    if dists.is_empty() {
        return 1.0;
    }
    let mid = dists.len() / 2;
    let (_, &mut upper, _) = dists.select_nth_unstable_by(mid, f64::total_cmp);
    let median = if dists.len() % 2 == 1 {
        upper
    } else {
        let lower = dists[..mid].iter().copied().fold(f64::NEG_INFINITY, f64::max);
        0.5 * (lower + upper)
    };
    if median > 0.0 {
        median
    } else {
        1.0
    }
}

/// Inner-product preservation audit of a Gaussian projection.
#[derive(Debug, Clone, PartialEq)]
pub struct JlAudit {
    pub epsilon: f64,
    pub sample_pairs: usize,
    pub violation_rate: f64,
    /// `4 exp(-(ε² - ε³) K / 4)`
    pub bound: f64,
}

/// Tail bound on the probability that a projected inner product of
/// norm-≤1 vectors deviates by at least `epsilon`.
pub fn jl_inner_product_bound(epsilon: f64, k: usize) -> f64 {
    4.0 * (-(epsilon * epsilon - epsilon.powi(3)) * k as f64 / 4.0).exp()
}

/// Samples `n_pairs` row pairs (with replacement, possibly `i == j`), rescales
/// all rows by the largest row norm so every row has norm ≤ 1, and counts the
/// pairs whose projected inner product misses the original by `epsilon` or more.
pub fn jl_audit(map: &RandomMap, data: &Matrix, epsilon: f64, n_pairs: usize, seed: u64) -> Result<JlAudit> {
    if map.kind() != MapKind::GaussianRp {
        return Err(Error::WrongMapKind {
            expected: MapKind::GaussianRp.name(),
            got: map.kind().name(),
        });
    }
    if !(epsilon > 0.0 && epsilon < 0.5) {
        return Err(Error::InvalidArgument(format!("epsilon must lie in (0, 1/2), got {epsilon}")));
    }
    if data.rows() == 0 || n_pairs == 0 {
        return Err(Error::InvalidArgument("audit needs rows and at least one pair".into()));
    }
    let max_norm = data.row_iter().map(norm).fold(0.0, f64::max);
    let mut scaled = data.clone();
    if max_norm > 0.0 {
        scaled.as_mut_slice().iter_mut().for_each(|v| *v /= max_norm);
    }
    let projected = map.apply(&scaled)?;
    let mut rng = RngStream::new(seed);
    let n = data.rows();
    let mut violations = 0usize;
    for _ in 0..n_pairs {
        let (i, j) = (rng.index(n), rng.index(n));
        let original = dot(scaled.row(i), scaled.row(j));
        let mapped = dot(projected.row(i), projected.row(j));
        if (original - mapped).abs() >= epsilon {
            violations += 1;
        }
    }
    Ok(JlAudit {
        epsilon,
        sample_pairs: n_pairs,
        violation_rate: violations as f64 / n_pairs as f64,
        bound: jl_inner_product_bound(epsilon, map.out_dim()),
    })
}

/// Which random mapping supplies the targets.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Source {
    /// Random Fourier features; `None` selects the bandwidth by the median heuristic.
    Rff { bandwidth: Option<f64> },
    /// Sparse random projection; `None` uses density `1/√D`.
    Srp { density: Option<f64> },
    GaussianRp,
    /// Inner products of the inputs themselves.
    Identity,
}

impl Source {
    pub fn name(&self) -> &'static str {
        match self {
            Source::Rff { .. } => "rff",
            Source::Srp { .. } => "srp",
            Source::GaussianRp => "gaussian",
            Source::Identity => "identity",
        }
    }

    /// Draws the map for `data` with output dimension `k` (ignored for identity).
    pub fn build(&self, data: &Matrix, k: usize, seed: u64) -> Result<RandomMap> {
        let d = data.cols();
        match *self {
            Source::Rff { bandwidth: Some(s) } => RandomMap::new_rff(d, k, s, seed),
            Source::Rff { bandwidth: None } => RandomMap::new_rff_median(data, k, seed),
            Source::Srp { density } => RandomMap::new_sparse_rp(d, k, density, seed),
            Source::GaussianRp => RandomMap::new_gaussian_rp(d, k, seed),
            Source::Identity => RandomMap::new_identity(d),
        }
    }

    /// Output dimension the built map will have.
    pub fn out_dim(&self, d: usize, k: usize) -> usize {
        match self {
            Source::Identity => d,
            _ => k,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit(d: usize, seed: u64) -> Vec<f64> {
        let mut r = RngStream::new(seed);
        let v: Vec<f64> = (0..d).map(|_| r.normal()).collect();
        let n = norm(&v);
        v.iter().map(|x| x / n).collect()
    }

    #[test]
    fn zero_maps_to_zero() {
        let g = RandomMap::new_gaussian_rp(5, 7, 1).unwrap();
        assert!(g.apply_row(&[0.0; 5]).unwrap().iter().all(|&v| v == 0.0));
        let s = RandomMap::new_sparse_rp(5, 7, None, 1).unwrap();
        assert!(s.apply_row(&[0.0; 5]).unwrap().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn zero_dimensions_rejected() {
        assert!(RandomMap::new_gaussian_rp(0, 3, 1).is_err());
        assert!(RandomMap::new_sparse_rp(3, 0, None, 1).is_err());
        assert!(RandomMap::new_rff(0, 3, 1.0, 1).is_err());
        assert!(RandomMap::new_identity(0).is_err());
    }

    #[test]
    fn bad_density_and_bandwidth_rejected() {
        assert!(RandomMap::new_sparse_rp(3, 3, Some(0.0), 1).is_err());
        assert!(RandomMap::new_sparse_rp(3, 3, Some(1.5), 1).is_err());
        assert!(RandomMap::new_sparse_rp(3, 3, Some(1.0), 1).is_ok());
        assert!(RandomMap::new_rff(3, 3, 0.0, 1).is_err());
        assert!(RandomMap::new_rff(3, 3, -1.0, 1).is_err());
    }

    #[test]
    fn gaussian_norm_concentrates_at_large_k() {
        let mut hits = 0;
        for t in 0..100 {
            let x = unit(10, 1000 + t);
            let m = RandomMap::new_gaussian_rp(10, 2000, t).unwrap();
            let y = m.apply_row(&x).unwrap();
            if (dot(&y, &y) - 1.0).abs() <= 0.15 {
                hits += 1;
            }
        }
        assert!(hits >= 95, "only {hits}/100 within tolerance");
    }

    #[test]
    fn gaussian_norm_unbiased_small_k() {
        let x = [0.3, -1.2, 2.0];
        let target = dot(&x, &x);
        let trials = 5000;
        let vals: Vec<f64> = (0..trials)
            .map(|s| {
                let y = RandomMap::new_gaussian_rp(3, 2, s).unwrap().apply_row(&x).unwrap();
                dot(&y, &y)
            })
            .collect();
        let mean = vals.iter().sum::<f64>() / trials as f64;
        let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (trials - 1) as f64;
        let se = (var / trials as f64).sqrt();
        assert!((mean - target).abs() <= 3.0 * se, "mean {mean} target {target} se {se}");
    }

    #[test]
    fn sparse_density_fraction() {
        let m = RandomMap::new_sparse_rp(400, 300, Some(0.1), 3).unwrap();
        let w = m.weights().unwrap().as_slice();
        let frac = w.iter().filter(|&&v| v != 0.0).count() as f64 / w.len() as f64;
        assert!((frac - 0.1).abs() < 0.005, "nonzero fraction {frac}");
        let v = (1.0f64 / (0.1 * 300.0)).sqrt();
        assert!(w.iter().all(|&x| x == 0.0 || x == v || x == -v));
        let default = RandomMap::new_sparse_rp(64, 10, None, 3).unwrap();
        assert_eq!(default.density(), Some(1.0 / 8.0));
    }

    #[test]
    fn sparse_inner_product_unbiased() {
        let x = unit(64, 5);
        let y = unit(64, 6);
        let target = dot(&x, &y);
        let trials = 5000u64;
        let vals: Vec<f64> = (0..trials)
            .map(|s| RandomMap::new_sparse_rp(64, 16, None, s).unwrap().pairwise_target(&x, &y).unwrap())
            .collect();
        let mean = vals.iter().sum::<f64>() / trials as f64;
        let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (trials - 1) as f64;
        let se = (var / trials as f64).sqrt();
        assert!((mean - target).abs() <= 3.0 * se, "mean {mean} target {target} se {se}");
    }

    #[test]
    fn rff_offsets_in_range() {
        let m = RandomMap::new_rff(4, 500, 1.3, 8).unwrap();
        assert!(m.offsets().unwrap().iter().all(|&b| (0.0..2.0 * PI).contains(&b)));
    }

    #[test]
    fn rff_self_product_near_one() {
        let m = RandomMap::new_rff(6, 4096, 2.0, 4).unwrap();
        let x = [0.1, -0.4, 1.0, 2.0, 0.0, -1.5];
        let v = m.pairwise_target(&x, &x).unwrap();
        assert!((v - 1.0).abs() <= 0.05, "{v}");
    }

    #[test]
    fn rff_unbiased() {
        let x = [0.5, -0.2, 1.0];
        let y = [-0.3, 0.4, 0.2];
        let sigma = 1.1;
        let target = rbf_kernel(&x, &y, sigma).unwrap();
        let trials = 5000u64;
        let vals: Vec<f64> = (0..trials)
            .map(|s| RandomMap::new_rff(3, 8, sigma, s).unwrap().pairwise_target(&x, &y).unwrap())
            .collect();
        let mean = vals.iter().sum::<f64>() / trials as f64;
        let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (trials - 1) as f64;
        let se = (var / trials as f64).sqrt();
        assert!((mean - target).abs() <= 3.0 * se, "mean {mean} target {target} se {se}");
    }

    #[test]
    fn identity_map() {
        let m = RandomMap::new_identity(3).unwrap();
        assert_eq!(m.out_dim(), 3);
        let x = [1.5, -2.0, 0.25];
        assert_eq!(m.apply_row(&x).unwrap(), x.to_vec());
        assert_eq!(m.pairwise_target(&[1.0, 0.0, 0.0], &[0.0, 1.0, 0.0]).unwrap(), 0.0);
        assert_eq!(m.pairwise_target(&[0.0, 1.0, 0.0], &[0.0, 1.0, 0.0]).unwrap(), 1.0);
        assert_eq!(m.pairwise_target(&x, &[2.0, 1.0, 4.0]).unwrap(), dot(&x, &[2.0, 1.0, 4.0]));
        let data = Matrix::from_rows(&[x, [0.0, 1.0, 2.0]]).unwrap();
        assert_eq!(m.apply(&data).unwrap(), data);
    }

    #[test]
    fn apply_matches_rows_and_stacks() {
        let a = Matrix::from_fn(4, 3, |i, j| (i * 3 + j) as f64 * 0.1 - 0.5);
        let b = Matrix::from_fn(2, 3, |i, j| (i + j) as f64 * 0.7);
        for map in [
            RandomMap::new_gaussian_rp(3, 5, 2).unwrap(),
            RandomMap::new_sparse_rp(3, 5, Some(0.5), 2).unwrap(),
            RandomMap::new_rff(3, 5, 1.0, 2).unwrap(),
        ] {
            let pa = map.apply(&a).unwrap();
            for i in 0..a.rows() {
                assert_eq!(pa.row(i), map.apply_row(a.row(i)).unwrap().as_slice());
            }
            let stacked = map.apply(&a.vstack(&b).unwrap()).unwrap();
            assert_eq!(stacked, pa.vstack(&map.apply(&b).unwrap()).unwrap());
            let t = map.pairwise_target(a.row(0), a.row(1)).unwrap();
            assert_eq!(t.to_bits(), dot(pa.row(0), pa.row(1)).to_bits());
        }
    }

    #[test]
    fn dimension_mismatch() {
        let m = RandomMap::new_gaussian_rp(3, 2, 1).unwrap();
        assert!(matches!(m.apply_row(&[1.0]), Err(Error::DimensionMismatch { .. })));
        assert!(m.apply(&Matrix::zeros(2, 4)).is_err());
        assert!(m.pairwise_target(&[1.0, 2.0, 3.0], &[1.0]).is_err());
        assert!(rbf_kernel(&[1.0], &[1.0, 2.0], 1.0).is_err());
    }

    #[test]
    fn same_seed_bit_identical() {
        let x = [0.2, 0.9, -1.1];
        for (a, b) in [
            (RandomMap::new_rff(3, 32, 0.8, 5).unwrap(), RandomMap::new_rff(3, 32, 0.8, 5).unwrap()),
            (RandomMap::new_sparse_rp(3, 32, None, 5).unwrap(), RandomMap::new_sparse_rp(3, 32, None, 5).unwrap()),
        ] {
            let (ya, yb) = (a.apply_row(&x).unwrap(), b.apply_row(&x).unwrap());
            assert!(ya.iter().zip(&yb).all(|(p, q)| p.to_bits() == q.to_bits()));
        }
    }

    #[test]
    fn rbf_values() {
        assert_eq!(rbf_kernel(&[1.0, 2.0], &[1.0, 2.0], 0.7).unwrap(), 1.0);
        let s = 1.7f64;
        let v = rbf_kernel(&[0.0], &[s * 2f64.sqrt()], s).unwrap();
        assert!((v - (-1.0f64).exp()).abs() < 1e-15);
        let mut prev = 1.0;
        for t in 1..20 {
            let v = rbf_kernel(&[0.0], &[t as f64], 1.0).unwrap();
            assert!(v < prev);
            prev = v;
        }
        assert!(prev < 1e-70);
    }

    #[test]
    fn median_heuristic_small() {
        let m = Matrix::from_rows(&[[0.0], [1.0], [3.0]]).unwrap();
        // distances 1, 3, 2
        assert_eq!(median_heuristic(&m, 0), 2.0);
        let m = Matrix::from_rows(&[[0.0], [1.0], [3.0], [7.0]]).unwrap();
        // distances 1,3,7,2,6,4 -> sorted 1,2,3,4,6,7
        assert_eq!(median_heuristic(&m, 0), 3.5);
        assert_eq!(median_heuristic(&Matrix::zeros(3, 2), 0), 1.0);
    }

    #[test]
    fn jl_audit_requires_gaussian() {
        let m = RandomMap::new_identity(3).unwrap();
        assert!(matches!(
            jl_audit(&m, &Matrix::zeros(3, 3), 0.3, 10, 0),
            Err(Error::WrongMapKind { .. })
        ));
    }

    #[test]
    fn jl_audit_tight_epsilon_large_k() {
        let mut r = RngStream::new(12);
        let data = Matrix::from_fn(100, 20, |_, _| r.normal());
        let m = RandomMap::new_gaussian_rp(20, 2000, 3).unwrap();
        let a = jl_audit(&m, &data, 0.49, 2000, 4).unwrap();
        assert_eq!(a.violation_rate, 0.0);
        let expect = 4.0 * (-(0.49f64.powi(2) - 0.49f64.powi(3)) * 500.0).exp();
        assert!((a.bound - expect).abs() <= 1e-12 * expect, "{}", a.bound);
    }

    #[test]
    fn jl_audit_duplicates_never_violate_at_large_k() {
        let row = [0.3, -0.1, 0.8, 0.5];
        let data = Matrix::from_rows(&[row; 10]).unwrap();
        let m = RandomMap::new_gaussian_rp(4, 2000, 9).unwrap();
        let a = jl_audit(&m, &data, 0.2, 500, 1).unwrap();
        assert_eq!(a.violation_rate, 0.0);
    }

    #[test]
    fn jl_audit_within_bound_at_recommended_k() {
        let n = 200;
        let eps = 0.45;
        let k = (20.0 * (n as f64).ln() / (eps * eps)).ceil() as usize;
        let mut r = RngStream::new(2);
        let data = Matrix::from_fn(n, 32, |_, _| r.normal());
        let m = RandomMap::new_gaussian_rp(32, k, 5).unwrap();
        let a = jl_audit(&m, &data, eps, 5000, 6).unwrap();
        assert!(a.violation_rate <= a.bound + 0.01, "{a:?}");
        assert!((0.0..=1.0).contains(&a.violation_rate));
    }

    #[test]
    fn source_out_dims() {
        let x = Matrix::from_fn(5, 3, |i, j| (i + 2 * j) as f64);
        assert_eq!(Source::Identity.build(&x, 9, 0).unwrap().out_dim(), 3);
        assert_eq!(Source::Rff { bandwidth: None }.build(&x, 9, 0).unwrap().out_dim(), 9);
        assert_eq!(Source::Srp { density: None }.out_dim(3, 9), 9);
    }
}
