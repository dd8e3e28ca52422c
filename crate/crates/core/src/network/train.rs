use crate::error::{Error, Result};
use crate::losses::{novelty_from_parts, Pair, PairBatch};
use crate::mapping::RandomMap;
use crate::network::model::{init_model, leaky, leaky_grad, Gradients, Objective, RdpModel, TrainConfig};
use crate::numerics::{axpy, derive_seed, dot, Matrix, RngStream};

/// Training rows together with their frozen projections `η(X)`.
///
/// Projections are computed once; pair targets are dot products of projected
/// rows, which is exactly what [`RandomMap::pairwise_target`] returns.
#[derive(Debug, Clone)]
pub struct Supervision<'a> {
    features: &'a Matrix,
    projected: Matrix,
}

impl<'a> Supervision<'a> {
    pub fn new(map: &RandomMap, features: &'a Matrix) -> Result<Self> {
        Ok(Self {
            features,
            projected: map.apply(features)?,
        })
    }

    pub fn features(&self) -> &Matrix {
        self.features
    }

    pub fn projected(&self) -> &Matrix {
        &self.projected
    }

    pub fn n(&self) -> usize {
        self.features.rows()
    }

    pub fn pair(&self, i: usize, j: usize) -> Pair {
        Pair {
            i,
            j,
            target: dot(self.projected.row(i), self.projected.row(j)),
        }
    }
}

/// Loss values of one batch, as seen by the gradient computation.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LossParts {
    pub total: f64,
    pub rdp: f64,
    pub aux: f64,
}

/// Exact gradients of the mean batch objective with respect to every parameter.
pub fn grad_batch(
    model: &RdpModel,
    sup: &Supervision<'_>,
    batch: &PairBatch,
    objective: &Objective,
) -> Result<(Gradients, LossParts)> {
    objective.validate()?;
    if batch.is_empty() {
        return Err(Error::InvalidArgument("pair batch is empty".into()));
    }
    if objective.uses_novelty() && model.m() != sup.projected.cols() {
        return Err(Error::NoveltyDimMismatch {
            m: model.m(),
            k: sup.projected.cols(),
        });
    }
    if sup.features.cols() != model.d() {
        return Err(Error::DimensionMismatch {
            expected: model.d(),
            got: sup.features.cols(),
        });
    }
    let m = model.m();
    let slope = model.leaky_slope();
    let pts = batch.distinct_points();
    let slot = |row: usize| pts.binary_search(&row).expect("point listed");

    let mut pre = Vec::with_capacity(pts.len());
    let mut hidden = Vec::with_capacity(pts.len());
    for &u in &pts {
        let a = model.pre_activation(sup.features.row(u));
        hidden.push(a.iter().map(|&v| leaky(v, slope)).collect::<Vec<_>>());
        pre.push(a);
    }
    let mut d_hidden = vec![vec![0.0; m]; pts.len()];
    let mut grads = Gradients::zeros_like(model);
    let mut parts = LossParts::default();

    if objective.use_rdp_loss {
        let scale = 2.0 / batch.len() as f64;
        let mut sum = 0.0;
        for p in batch.pairs() {
            let (si, sj) = (slot(p.i), slot(p.j));
            let r = dot(&hidden[si], &hidden[sj]) - p.target;
            sum += r * r;
            let c = scale * r;
            // si == sj accumulates twice, matching d(h·h)/dh = 2h
            let hj = hidden[sj].clone();
            axpy(c, &hj, &mut d_hidden[si]);
            let hi = hidden[si].clone();
            axpy(c, &hi, &mut d_hidden[sj]);
        }
        parts.rdp = sum / batch.len() as f64;
        parts.total += parts.rdp;
    }

    if objective.use_aux_loss {
        let weight = objective.aux_weight / pts.len() as f64;
        let mut sum = 0.0;
        if objective.uses_novelty() {
            let c = weight * 2.0 / m as f64;
            for (s, &u) in pts.iter().enumerate() {
                let e = sup.projected.row(u);
                sum += novelty_from_parts(&hidden[s], e);
                for ((g, h), ev) in d_hidden[s].iter_mut().zip(&hidden[s]).zip(e) {
                    *g += c * (h - ev);
                }
            }
        } else {
            let dec = model.decoder().ok_or(Error::DecoderAbsent)?;
            let gw = grads.decoder_weights.as_mut().expect("decoder gradient allocated");
            let gb = grads.decoder_bias.as_mut().expect("decoder gradient allocated");
            for (s, &u) in pts.iter().enumerate() {
                let x = sup.features.row(u);
                let z = model.decode(&hidden[s])?;
                let diff: Vec<f64> = z.iter().zip(x).map(|(zi, xi)| zi - xi).collect();
                sum += dot(&diff, &diff);
                let dz: Vec<f64> = diff.iter().map(|v| weight * 2.0 * v).collect();
                for (row, &g) in dz.iter().enumerate() {
                    axpy(g, &hidden[s], gw.row_mut(row));
                }
                axpy(1.0, &dz, gb);
                let back = dec.weights.matvec_t(&dz)?;
                axpy(1.0, &back, &mut d_hidden[s]);
            }
        }
        parts.aux = sum / pts.len() as f64;
        parts.total += objective.aux_weight * parts.aux;
    }

    for (s, &u) in pts.iter().enumerate() {
        let x = sup.features.row(u);
        for (k, (&g, &a)) in d_hidden[s].iter().zip(&pre[s]).enumerate() {
            let da = g * leaky_grad(a, slope);
            if da != 0.0 {
                axpy(da, x, grads.weights.row_mut(k));
            }
            grads.bias[k] += da;
        }
    }

    if !parts.total.is_finite() {
        return Err(Error::Divergence { epoch: 0, what: "loss" });
    }
    Ok((grads, parts))
}

/// Per-epoch mean losses.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct LossTrace {
    pub total: Vec<f64>,
    pub rdp: Vec<f64>,
    pub aux: Vec<f64>,
}

impl LossTrace {
    pub fn epochs(&self) -> usize {
        self.total.len()
    }

    /// Mean total loss over the first and last `fraction` of epochs (at least one each).
    pub fn head_tail_means(&self, fraction: f64) -> (f64, f64) {
        let n = self.total.len();
        let w = ((n as f64 * fraction).ceil() as usize).clamp(1, n.max(1));
        let mean = |s: &[f64]| s.iter().sum::<f64>() / s.len() as f64;
        (mean(&self.total[..w]), mean(&self.total[n - w..]))
    }
}

/// Pairs for one batch: each element with its cyclic successor and with a
/// uniformly drawn partner from the same batch.
pub fn batch_pairs(batch: &[usize], sup: &Supervision<'_>, rng: &mut RngStream) -> Vec<Pair> {
    let b = batch.len();
    let mut pairs = Vec::with_capacity(2 * b);
    for (t, &i) in batch.iter().enumerate() {
        pairs.push(sup.pair(i, batch[(t + 1) % b]));
        pairs.push(sup.pair(i, batch[rng.index(b)]));
    }
    pairs
}

/// Seeds used by one training run: `(initialization, shuffling)`.
pub fn train_seeds(seed: u64) -> (u64, u64) {
    (derive_seed(seed, 0), derive_seed(seed, 1))
}

/// Trains a fresh model on `features` (expected as produced by `prepare`) against `map`.
///
/// Each epoch shuffles the rows, cuts them into batches of `batch_size`
/// (a trailing batch of one row is skipped), and takes one plain SGD step
/// per batch.
pub fn train(features: &Matrix, config: &TrainConfig, map: &RandomMap) -> Result<(RdpModel, LossTrace)> {
    config.validate()?;
    if features.rows() < 2 {
        return Err(Error::InvalidArgument("training needs at least two rows".into()));
    }
    if features.cols() != map.in_dim() {
        return Err(Error::DimensionMismatch {
            expected: map.in_dim(),
            got: features.cols(),
        });
    }
    let (init_seed, shuffle_seed) = train_seeds(config.seed);
    let mut model = init_model(features.cols(), config, map, init_seed)?;
    let objective = config.objective();
    let sup = Supervision::new(map, features)?;
    let mut rng = RngStream::new(shuffle_seed);
    let mut order: Vec<usize> = (0..features.rows()).collect();
    let mut trace = LossTrace::default();

    for epoch in 0..config.epochs {
        rng.shuffle(&mut order);
        let (mut total, mut rdp, mut aux, mut steps) = (0.0, 0.0, 0.0, 0usize);
        for chunk in order.chunks(config.batch_size) {
            if chunk.len() < 2 {
                continue;
            }
            let pairs = batch_pairs(chunk, &sup, &mut rng);
            let batch = PairBatch::new(pairs, sup.n())?;
            let (grads, parts) = grad_batch(&model, &sup, &batch, &objective).map_err(|e| match e {
                Error::Divergence { what, .. } => Error::Divergence { epoch, what },
                other => other,
            })?;
            model.sgd_step(&grads, config.learning_rate);
            if !model.is_finite() {
                return Err(Error::Divergence {
                    epoch,
                    what: "parameters",
                });
            }
            total += parts.total;
            rdp += parts.rdp;
            aux += parts.aux;
            steps += 1;
        }
        let s = steps.max(1) as f64;
        trace.total.push(total / s);
        trace.rdp.push(rdp / s);
        trace.aux.push(aux / s);
    }
    Ok((model, trace))
}
