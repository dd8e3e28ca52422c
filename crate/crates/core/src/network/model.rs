use crate::error::{Error, Result};
use crate::mapping::RandomMap;
use crate::numerics::{axpy, Matrix, RngStream};

/// What the auxiliary loss is for, and therefore which one it is.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Task {
    /// Auxiliary loss is the novelty loss `mean_k (φ(x)_k − η(x)_k)²`.
    Anomaly,
    /// Auxiliary loss is the reconstruction loss `‖x − φ′(φ(x))‖²`.
    Clustering,
}

impl Task {
    pub fn name(self) -> &'static str {
        match self {
            Task::Anomaly => "anomaly",
            Task::Clustering => "clustering",
        }
    }
}

/// Which terms make up the training objective `L_rdp + λ·L_aux`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Objective {
    pub task: Task,
    pub use_rdp_loss: bool,
    pub use_aux_loss: bool,
    pub aux_weight: f64,
}

impl Objective {
    pub fn uses_novelty(&self) -> bool {
        self.use_aux_loss && self.task == Task::Anomaly
    }

    pub fn uses_reconstruction(&self) -> bool {
        self.use_aux_loss && self.task == Task::Clustering
    }

    pub fn validate(&self) -> Result<()> {
        if !self.use_rdp_loss && !self.use_aux_loss {
            return Err(Error::NoLossEnabled);
        }
        if !(self.aux_weight >= 0.0 && self.aux_weight.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "auxiliary weight must be finite and nonnegative, got {}",
                self.aux_weight
            )));
        }
        Ok(())
    }
}

/// Hyperparameters of one training run.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    /// Representation dimension `M`.
    pub m: usize,
    pub leaky_slope: f64,
    pub use_rdp_loss: bool,
    pub use_aux_loss: bool,
    /// `λ` in `L_rdp + λ·L_aux`.
    pub aux_weight: f64,
    pub seed: u64,
    pub task: Task,
}

pub const DEFAULT_BATCH_SIZE: usize = 192;
pub const DEFAULT_LEARNING_RATE: f64 = 0.1;
pub const DEFAULT_LEAKY_SLOPE: f64 = 0.01;

impl TrainConfig {
    /// 50 units, 200 epochs, novelty auxiliary loss.
    pub fn anomaly() -> Self {
        Self {
            epochs: 200,
            batch_size: DEFAULT_BATCH_SIZE,
            learning_rate: DEFAULT_LEARNING_RATE,
            m: 50,
            leaky_slope: DEFAULT_LEAKY_SLOPE,
            use_rdp_loss: true,
            use_aux_loss: true,
            aux_weight: 1.0,
            seed: 0,
            task: Task::Anomaly,
        }
    }

    /// 1024 units, 1000 epochs, reconstruction auxiliary loss.
    pub fn clustering() -> Self {
        Self {
            epochs: 1000,
            m: 1024,
            task: Task::Clustering,
            ..Self::anomaly()
        }
    }

    pub fn objective(&self) -> Objective {
        Objective {
            task: self.task,
            use_rdp_loss: self.use_rdp_loss,
            use_aux_loss: self.use_aux_loss,
            aux_weight: self.aux_weight,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.objective().validate()?;
        let mut problems = Vec::new();
        if self.epochs < 1 {
            problems.push("epochs must be at least 1".to_string());
        }
        if self.batch_size < 2 {
            problems.push("batch size must be at least 2".to_string());
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            problems.push(format!("learning rate must be positive, got {}", self.learning_rate));
        }
        if self.m < 1 {
            problems.push("representation dimension must be at least 1".to_string());
        }
        if !self.leaky_slope.is_finite() {
            problems.push("leaky slope must be finite".to_string());
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidArgument(problems.join("; ")))
        }
    }
}

/// Linear decoder `h ↦ W′h + b′`.
#[derive(Debug, Clone, PartialEq)]
pub struct Decoder {
    /// `D × M`
    pub weights: Matrix,
    pub bias: Vec<f64>,
}

/// One-layer leaky-ReLU encoder `φ(x) = leaky(Wx + b)`, optional linear
/// decoder, and the frozen map whose inner products it was trained against.
#[derive(Debug, Clone, PartialEq)]
pub struct RdpModel {
    weights: Matrix,
    bias: Vec<f64>,
    decoder: Option<Decoder>,
    leaky_slope: f64,
    objective: Objective,
    map: RandomMap,
}

#[inline]
pub(crate) fn leaky(v: f64, slope: f64) -> f64 {
    if v > 0.0 {
        v
    } else {
        slope * v
    }
}

/// Derivative of the leaky ReLU; `slope` at and below zero.
#[inline]
pub(crate) fn leaky_grad(v: f64, slope: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else {
        slope
    }
}

impl RdpModel {
    /// Assembles a model from explicit parameters, checking every shape.
    pub fn from_parts(
        weights: Matrix,
        bias: Vec<f64>,
        decoder: Option<Decoder>,
        leaky_slope: f64,
        objective: Objective,
        map: RandomMap,
    ) -> Result<Self> {
        let (m, d) = (weights.rows(), weights.cols());
        if m == 0 || d == 0 {
            return Err(Error::InvalidArgument("encoder must have positive dimensions".into()));
        }
        if bias.len() != m {
            return Err(Error::DimensionMismatch {
                expected: m,
                got: bias.len(),
            });
        }
        if map.in_dim() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: map.in_dim(),
            });
        }
        if objective.uses_novelty() && map.out_dim() != m {
            return Err(Error::NoveltyDimMismatch { m, k: map.out_dim() });
        }
        match (&decoder, objective.uses_reconstruction()) {
            (Some(dec), true) => {
                if dec.weights.rows() != d || dec.weights.cols() != m || dec.bias.len() != d {
                    return Err(Error::Malformed(format!(
                        "decoder must be {d}x{m} with bias {d}, got {}x{} with bias {}",
                        dec.weights.rows(),
                        dec.weights.cols(),
                        dec.bias.len()
                    )));
                }
            }
            (None, false) => {}
            (Some(_), false) => return Err(Error::Malformed("decoder present without reconstruction loss".into())),
            (None, true) => return Err(Error::DecoderAbsent),
        }
        Ok(Self {
            weights,
            bias,
            decoder,
            leaky_slope,
            objective,
            map,
        })
    }

    pub fn m(&self) -> usize {
        self.weights.rows()
    }

    pub fn d(&self) -> usize {
        self.weights.cols()
    }

    pub fn weights(&self) -> &Matrix {
        &self.weights
    }

    pub fn bias(&self) -> &[f64] {
        &self.bias
    }

    pub fn decoder(&self) -> Option<&Decoder> {
        self.decoder.as_ref()
    }

    pub fn leaky_slope(&self) -> f64 {
        self.leaky_slope
    }

    pub fn objective(&self) -> &Objective {
        &self.objective
    }

    pub fn map(&self) -> &RandomMap {
        &self.map
    }

    pub(crate) fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.d() {
            return Err(Error::DimensionMismatch {
                expected: self.d(),
                got: x.len(),
            });
        }
        Ok(())
    }

    /// Pre-activation `Wx + b`.
    pub(crate) fn pre_activation(&self, x: &[f64]) -> Vec<f64> {
        let mut a = self.weights.matvec(x).expect("checked by caller");
        for (ai, bi) in a.iter_mut().zip(&self.bias) {
            *ai += bi;
        }
        a
    }

    /// `φ(x)`.
    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_input(x)?;
        let mut a = self.pre_activation(x);
        a.iter_mut().for_each(|v| *v = leaky(*v, self.leaky_slope));
        Ok(a)
    }

    /// `φ′(h)`.
    pub fn decode(&self, h: &[f64]) -> Result<Vec<f64>> {
        let dec = self.decoder.as_ref().ok_or(Error::DecoderAbsent)?;
        if h.len() != self.m() {
            return Err(Error::DimensionMismatch {
                expected: self.m(),
                got: h.len(),
            });
        }
        let mut z = dec.weights.matvec(h)?;
        for (zi, bi) in z.iter_mut().zip(&dec.bias) {
            *zi += bi;
        }
        Ok(z)
    }

    pub fn is_finite(&self) -> bool {
        self.weights.is_finite()
            && self.bias.iter().all(|v| v.is_finite())
            && self
                .decoder
                .as_ref()
                .is_none_or(|d| d.weights.is_finite() && d.bias.iter().all(|v| v.is_finite()))
    }

    /// Plain SGD step `θ ← θ − lr·g`.
    pub(crate) fn sgd_step(&mut self, grads: &Gradients, lr: f64) {
        axpy(-lr, grads.weights.as_slice(), self.weights.as_mut_slice());
        axpy(-lr, &grads.bias, &mut self.bias);
        if let (Some(dec), Some(gw), Some(gb)) = (&mut self.decoder, &grads.decoder_weights, &grads.decoder_bias) {
            axpy(-lr, gw.as_slice(), dec.weights.as_mut_slice());
            axpy(-lr, gb, &mut dec.bias);
        }
    }

    /// Mutable view of every parameter, encoder first, in a fixed order.
    pub fn parameters_mut(&mut self) -> Vec<&mut f64> {
        let mut out: Vec<&mut f64> = self.weights.as_mut_slice().iter_mut().collect();
        out.extend(self.bias.iter_mut());
        if let Some(dec) = &mut self.decoder {
            out.extend(dec.weights.as_mut_slice().iter_mut());
            out.extend(dec.bias.iter_mut());
        }
        out
    }
}

/// Gradients of the batch objective, shaped like the model parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub weights: Matrix,
    pub bias: Vec<f64>,
    pub decoder_weights: Option<Matrix>,
    pub decoder_bias: Option<Vec<f64>>,
}

impl Gradients {
    pub(crate) fn zeros_like(model: &RdpModel) -> Self {
        Self {
            weights: Matrix::zeros(model.m(), model.d()),
            bias: vec![0.0; model.m()],
            decoder_weights: model.decoder.as_ref().map(|_| Matrix::zeros(model.d(), model.m())),
            decoder_bias: model.decoder.as_ref().map(|_| vec![0.0; model.d()]),
        }
    }

    /// All entries flattened in the same order as [`RdpModel::parameters_mut`].
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = self.weights.as_slice().to_vec();
        out.extend_from_slice(&self.bias);
        if let Some(w) = &self.decoder_weights {
            out.extend_from_slice(w.as_slice());
        }
        if let Some(b) = &self.decoder_bias {
            out.extend_from_slice(b);
        }
        out
    }
}

/// Fresh model: `W ~ N(0, 1/D)`, `b = 0`; decoder `W′ ~ N(0, 1/M)`, `b′ = 0`
/// when the reconstruction loss is enabled.
pub fn init_model(d: usize, config: &TrainConfig, map: &RandomMap, seed: u64) -> Result<RdpModel> {
    config.validate()?;
    let m = config.m;
    let objective = config.objective();
    if objective.uses_novelty() && m != map.out_dim() {
        return Err(Error::NoveltyDimMismatch { m, k: map.out_dim() });
    }
    if d == 0 {
        return Err(Error::InvalidArgument("input dimension must be positive".into()));
    }
    let mut rng = RngStream::new(seed);
    let enc_scale = 1.0 / (d as f64).sqrt();
    let weights = Matrix::from_fn(m, d, |_, _| enc_scale * rng.normal());
    let decoder = objective.uses_reconstruction().then(|| {
        let dec_scale = 1.0 / (m as f64).sqrt();
        Decoder {
            weights: Matrix::from_fn(d, m, |_, _| dec_scale * rng.normal()),
            bias: vec![0.0; d],
        }
    });
    RdpModel::from_parts(weights, vec![0.0; m], decoder, config.leaky_slope, objective, map.clone())
}
