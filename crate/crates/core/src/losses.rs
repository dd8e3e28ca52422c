//! Loss evaluators.
//!
//! Conventions, shared with the gradient code and anomaly scoring:
//!
//! * `l_rdp` and `l_aux_clu` are raw squared errors (no averaging over coordinates);
//! * `l_aux_ad` averages the squared error over the `K` coordinates;
//! * in a batch, `l_rdp` is averaged over pairs and the auxiliary loss over the
//!   distinct points the pairs touch.

use crate::error::{Error, Result};
use crate::network::{Objective, RdpModel, Task};
use crate::numerics::{dot, squared_distance, Matrix};

/// One supervised pair `(i, j)` with target `y_ij = η(x_i)·η(x_j)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pair {
    pub i: usize,
    pub j: usize,
    pub target: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct PairBatch {
    pairs: Vec<Pair>,
}

impl PairBatch {
    /// Validates indices against `n` rows and target finiteness.
    pub fn new(pairs: Vec<Pair>, n: usize) -> Result<Self> {
        if pairs.is_empty() {
            return Err(Error::InvalidArgument("pair batch is empty".into()));
        }
        for p in &pairs {
            if p.i >= n || p.j >= n {
                return Err(Error::InvalidArgument(format!(
                    "pair ({}, {}) out of range for {n} rows",
                    p.i, p.j
                )));
            }
            if !p.target.is_finite() {
                return Err(Error::InvalidArgument(format!("non-finite target for pair ({}, {})", p.i, p.j)));
            }
        }
        Ok(Self { pairs })
    }

    pub fn pairs(&self) -> &[Pair] {
        &self.pairs
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// Sorted distinct row indices referenced by the batch.
    pub fn distinct_points(&self) -> Vec<usize> {
        let mut pts: Vec<usize> = self.pairs.iter().flat_map(|p| [p.i, p.j]).collect();
        pts.sort_unstable();
        pts.dedup();
        pts
    }
}

/// Mean squared difference over coordinates.
pub(crate) fn novelty_from_parts(h: &[f64], e: &[f64]) -> f64 {
    squared_distance(h, e) / h.len() as f64
}

/// `(φ(x_i)·φ(x_j) − y_ij)²`
pub fn l_rdp(model: &RdpModel, xi: &[f64], xj: &[f64], target: f64) -> Result<f64> {
    let hi = model.forward(xi)?;
    let hj = model.forward(xj)?;
    let r = dot(&hi, &hj) - target;
    Ok(r * r)
}

/// `‖x − φ′(φ(x))‖²`
pub fn l_aux_clu(model: &RdpModel, x: &[f64]) -> Result<f64> {
    let h = model.forward(x)?;
    let z = model.decode(&h)?;
    Ok(squared_distance(x, &z))
}

/// `mean_k (φ(x)_k − η(x)_k)²`
pub fn l_aux_ad(model: &RdpModel, x: &[f64]) -> Result<f64> {
    let k = model.map().out_dim();
    if model.m() != k {
        return Err(Error::NoveltyDimMismatch { m: model.m(), k });
    }
    let h = model.forward(x)?;
    let e = model.map().apply_row(x)?;
    Ok(novelty_from_parts(&h, &e))
}

/// Auxiliary loss for the objective's task.
pub fn l_aux(model: &RdpModel, x: &[f64], task: Task) -> Result<f64> {
    match task {
        Task::Anomaly => l_aux_ad(model, x),
        Task::Clustering => l_aux_clu(model, x),
    }
}

/// Mean `l_rdp` over the pairs (if enabled) plus `λ` times the mean auxiliary
/// loss over the batch's distinct points (if enabled).
pub fn batch_objective(model: &RdpModel, features: &Matrix, batch: &PairBatch, objective: &Objective) -> Result<f64> {
    objective.validate()?;
    if batch.is_empty() {
        return Err(Error::InvalidArgument("pair batch is empty".into()));
    }
    let mut total = 0.0;
    if objective.use_rdp_loss {
        let mut sum = 0.0;
        for p in batch.pairs() {
            sum += l_rdp(model, features.row(p.i), features.row(p.j), p.target)?;
        }
        total += sum / batch.len() as f64;
    }
    if objective.use_aux_loss {
        let pts = batch.distinct_points();
        let mut sum = 0.0;
        for &u in &pts {
            sum += l_aux(model, features.row(u), objective.task)?;
        }
        total += objective.aux_weight * (sum / pts.len() as f64);
    }
    Ok(total)
}
